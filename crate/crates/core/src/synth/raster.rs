//! Pixel-center, even-odd polygon rasterization.
//!
//! Pixel `(i, j)` is set iff its center `(i + 0.5, j + 0.5)` lies strictly
//! inside the polygon; centers on the boundary are left unset.

use crate::error::{Error, Result};
use crate::geometry::{bbox_of, Point, Polygon2D};

/// Row-major binary grid; `(x, y)` addresses column `x` of row `y`.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.bits[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        let i = self.index(x, y);
        self.bits[i] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Run lengths over the row-major bit sequence, starting with a run of
    /// zeros (possibly empty).
    pub fn to_rle(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(width: u32, height: u32, runs: &[u32]) -> Result<Self> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for (k, &r) in runs.iter().enumerate() {
            bits.extend(std::iter::repeat_n(k % 2 == 1, r as usize));
        }
        Self::from_bits(width, height, bits)
    }
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMask {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for y in 0..self.height {
                let row: String = (0..self.width)
                    .map(|x| if self.get(x, y) { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

/// Horizontal run of set pixels `[x0, x1)` in row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

impl Span {
    pub fn len(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn is_empty(&self) -> bool {
        self.x1 == self.x0
    }
}

/// Covered pixels of `p` on a `w × h` grid as sorted, disjoint spans.
pub fn polygon_spans(p: &Polygon2D, w: u32, h: u32) -> Vec<Span> {
    let mut spans = Vec::new();
    if w == 0 || h == 0 {
        return spans;
    }
    let b = bbox_of(p);
    let row_lo = (b.y_min - 0.5).floor().max(0.0);
    let row_hi = (b.y_max - 0.5).ceil().min(h as f64 - 1.0);
    if row_lo > row_hi {
        return spans;
    }
    let mut xs = Vec::new();
    for j in row_lo as u32..=row_hi as u32 {
        let yc = j as f64 + 0.5;
        let on_horizontal_edge = p.edges().any(|(a, c)| a.y == yc && c.y == yc);
        if on_horizontal_edge {
            // Rare: fall back to the per-point test for this row.
            let col_lo = (b.x_min - 0.5).floor().max(0.0) as u32;
            let col_hi = ((b.x_max - 0.5).ceil().min(w as f64 - 1.0)).max(-1.0);
            if col_hi < 0.0 {
                continue;
            }
            let mut run: Option<u32> = None;
            for i in col_lo..=col_hi as u32 {
                let inside = p.contains_strict(Point::new(i as f64 + 0.5, yc));
                match (inside, run) {
                    (true, None) => run = Some(i),
                    (false, Some(s)) => {
                        spans.push(Span { y: j, x0: s, x1: i });
                        run = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = run {
                spans.push(Span {
                    y: j,
                    x0: s,
                    x1: col_hi as u32 + 1,
                });
            }
            continue;
        }
        xs.clear();
        for (a, c) in p.edges() {
            if (a.y > yc) != (c.y > yc) {
                xs.push(a.x + (yc - a.y) * (c.x - a.x) / (c.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let (xa, xb) = (pair[0], pair[1]);
            // first column whose center is > xa, last whose center is < xb
            let first = ((xa - 0.5).floor() + 1.0).max(0.0);
            let last = ((xb - 0.5).ceil() - 1.0).min(w as f64 - 1.0);
            if first <= last {
                let x0 = first as u32;
                let x1 = last as u32 + 1;
                match spans.last_mut() {
                    Some(prev) if prev.y == j && prev.x1 == x0 => prev.x1 = x1,
                    _ => spans.push(Span { y: j, x0, x1 }),
                }
            }
        }
    }
    spans
}

pub fn rasterize_polygon(p: &Polygon2D, w: u32, h: u32) -> BitMask {
    let mut m = BitMask::new(w, h);
    for s in polygon_spans(p, w, h) {
        let row = s.y as usize * w as usize;
        m.bits[row + s.x0 as usize..row + s.x1 as usize].fill(true);
    }
    m
}
