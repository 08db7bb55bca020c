//! Wavefront OBJ text export.
//!
//! One `o` object per mesh, its `v` lines then its `f` lines; vertex
//! indices are global and 1-based. Coordinates use six decimals, lines end
//! in LF.

use std::fmt::Write as _;
use std::path::Path;

use super::Mesh3D;
use crate::error::{Error, Result};

pub const OBJ_HEADER: &str = "# offnadir building prisms\n";

pub fn write_obj(meshes: &[(String, Mesh3D)]) -> String {
    let mut out = String::from(OBJ_HEADER);
    let mut base = 1;
    for (name, mesh) in meshes {
        let _ = writeln!(out, "o {name}");
        for v in &mesh.vertices {
            let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2]);
        }
        for t in &mesh.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += mesh.vertices.len();
    }
    out
}

pub fn export_obj(meshes: &[(String, Mesh3D)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj(meshes)).map_err(|e| Error::io(path, e))
}

/// Reads back the subset of OBJ that [`write_obj`] produces.
pub fn parse_obj(text: &str) -> Result<Vec<(String, Mesh3D)>> {
    let mut meshes: Vec<(String, Mesh3D)> = Vec::new();
    let mut base = 1;
    for (ln, line) in text.lines().enumerate() {
        let err = |message: String| Error::MeshFormat {
            line: ln + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "#" => {}
            _ if tag.starts_with('#') => {}
            "o" => {
                if let Some((_, m)) = meshes.last() {
                    base += m.vertices.len();
                }
                let name = parts.collect::<Vec<_>>().join(" ");
                meshes.push((name, Mesh3D::default()));
            }
            "v" | "f" => {
                let Some((_, mesh)) = meshes.last_mut() else {
                    return Err(err(format!("`{tag}` before any object")));
                };
                let fields: Vec<&str> = parts.collect();
                if fields.len() != 3 {
                    return Err(err(format!("expected 3 fields, got {}", fields.len())));
                }
                if tag == "v" {
                    let mut v = [0.0; 3];
                    for (slot, f) in v.iter_mut().zip(&fields) {
                        *slot = f
                            .parse()
                            .map_err(|e| err(format!("bad coordinate `{f}`: {e}")))?;
                    }
                    mesh.vertices.push(v);
                } else {
                    let mut t = [0usize; 3];
                    for (slot, f) in t.iter_mut().zip(&fields) {
                        let idx: usize = f
                            .parse()
                            .map_err(|e| err(format!("bad index `{f}`: {e}")))?;
                        if idx < base || idx >= base + mesh.vertices.len() {
                            return Err(err(format!("index {idx} outside the current object")));
                        }
                        *slot = idx - base;
                    }
                    mesh.triangles.push(t);
                }
            }
            other => return Err(err(format!("unsupported record `{other}`"))),
        }
    }
    Ok(meshes)
}
