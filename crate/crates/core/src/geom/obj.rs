//! Wavefront OBJ subset: `v`, `vn` and triangular `f` records.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Parses OBJ text. Faces with more than three corners are rejected.
///
/// Normals are taken from `vn` records when every face corner references one
/// and each vertex maps to a single normal; otherwise they are recomputed.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut vn = Vec::new();
    let mut faces = Vec::new();
    let mut corner_normals: Vec<[Option<usize>; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let tag = parts.next().unwrap_or("");
        match tag {
            "v" => vertices.push(parse_vec3(parts, line)?),
            "vn" => vn.push(parse_vec3(parts, line)?),
            "f" => {
                let corners: Vec<&str> = parts.collect();
                if corners.len() != 3 {
                    return Err(Error::Obj {
                        line,
                        msg: format!("face has {} corners; only triangles are supported", corners.len()),
                    });
                }
                let mut f = [0usize; 3];
                let mut fnrm = [None; 3];
                for (k, c) in corners.iter().enumerate() {
                    let mut fields = c.split('/');
                    let vi = fields.next().unwrap_or("");
                    f[k] = resolve_index(vi, vertices.len(), line)?;
                    let _texcoord = fields.next();
                    if let Some(ni) = fields.next().filter(|s| !s.is_empty()) {
                        fnrm[k] = Some(resolve_index(ni, vn.len(), line)?);
                    }
                }
                faces.push(f);
                corner_normals.push(fnrm);
            }
            // groups, objects, smoothing, materials and texture coordinates carry no geometry we use
            "vt" | "g" | "o" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => {
                return Err(Error::Obj {
                    line,
                    msg: format!("unsupported record `{other}`"),
                })
            }
        }
    }

    if let Some(normals) = per_vertex_normals(vertices.len(), &faces, &corner_normals, &vn) {
        Mesh::with_normals(vertices, faces, normals)
    } else {
        Mesh::new(vertices, faces)
    }
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_obj(&text)
}

/// Serializes with shortest round-trip float formatting; output is deterministic.
pub fn to_obj_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 64);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for f in &mesh.faces {
        let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
        let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
    }
    s
}

/// Creates missing parent directories.
pub fn write_obj(path: impl AsRef<Path>, mesh: &Mesh) -> Result<()> {
    crate::io::write_text(path.as_ref(), &to_obj_string(mesh))
}

fn parse_vec3<'a>(mut parts: impl Iterator<Item = &'a str>, line: usize) -> Result<Vector3<f64>> {
    let mut v = [0.0f64; 3];
    for c in v.iter_mut() {
        let tok = parts.next().ok_or_else(|| Error::Obj {
            line,
            msg: "expected three coordinates".into(),
        })?;
        *c = tok.parse().map_err(|_| Error::Obj {
            line,
            msg: format!("bad number `{tok}`"),
        })?;
        if !c.is_finite() {
            return Err(Error::Obj {
                line,
                msg: "non-finite coordinate".into(),
            });
        }
    }
    Ok(Vector3::from(v))
}

fn resolve_index(tok: &str, count: usize, line: usize) -> Result<usize> {
    let i: i64 = tok.parse().map_err(|_| Error::Obj {
        line,
        msg: format!("bad index `{tok}`"),
    })?;
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::Obj {
            line,
            msg: format!("index {i} out of range ({count} defined so far)"),
        });
    }
    Ok(idx as usize)
}

fn per_vertex_normals(
    nv: usize,
    faces: &[[usize; 3]],
    corners: &[[Option<usize>; 3]],
    vn: &[Vector3<f64>],
) -> Option<Vec<Vector3<f64>>> {
    if vn.is_empty() || faces.is_empty() {
        return None;
    }
    let mut assigned: Vec<Option<usize>> = vec![None; nv];
    for (f, c) in faces.iter().zip(corners) {
        for k in 0..3 {
            let n = c[k]?;
            match assigned[f[k]] {
                None => assigned[f[k]] = Some(n),
                Some(prev) if vn[prev] == vn[n] => {}
                Some(_) => return None,
            }
        }
    }
    assigned.into_iter().map(|a| a.map(|i| vn[i])).collect()
}
