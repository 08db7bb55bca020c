use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{grade_sample, Dataset, SupervisionLevel};
use crate::error::{Error, Result};

/// Strips annotations from a fully annotated dataset to emulate mixed
/// supervision.
///
/// A seeded shuffle picks `round(frac_oh·n)` records that stay `OH` and
/// `round(frac_h·n)` records that lose offsets (→ `H`); the rest lose
/// offsets and heights (→ `N`). Roofs go with the offsets and the image
/// pose goes with them too, since both determine the offset.
pub fn degrade_dataset(d: &Dataset, frac_oh: f64, frac_h: f64, seed: u64) -> Result<Dataset> {
    for (name, f) in [("frac_oh", frac_oh), ("frac_h", frac_h)] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("{name} must be in [0, 1], got {f}")));
        }
    }
    if frac_oh + frac_h > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "frac_oh + frac_h must be <= 1, got {}",
            frac_oh + frac_h
        )));
    }
    for r in &d.records {
        if grade_sample(r)? != SupervisionLevel::OH {
            return Err(Error::Record {
                image_id: r.image_id.clone(),
                instance: None,
                message: "degradation needs fully annotated (OH) input".into(),
            });
        }
    }

    let n = d.records.len();
    let n_oh = ((frac_oh * n as f64).round() as usize).min(n);
    let n_h = ((frac_h * n as f64).round() as usize).min(n - n_oh);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut target = vec![SupervisionLevel::N; n];
    for (rank, &idx) in order.iter().enumerate() {
        target[idx] = if rank < n_oh {
            SupervisionLevel::OH
        } else if rank < n_oh + n_h {
            SupervisionLevel::H
        } else {
            SupervisionLevel::N
        };
    }

    let mut out = d.clone();
    for (r, level) in out.records.iter_mut().zip(target) {
        if level == SupervisionLevel::OH {
            continue;
        }
        r.pose = None;
        for inst in &mut r.instances {
            inst.offset = None;
            inst.roof = None;
            if level == SupervisionLevel::N {
                inst.height = None;
            }
        }
    }
    out.metadata.insert(
        "degradation".into(),
        serde_json::json!({"frac_oh": frac_oh, "frac_h": frac_h, "seed": seed}),
    );
    Ok(out)
}
