use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::{GeomError, TriMesh};

/// Write a mesh as a minimal OBJ (`v` and `f` lines, 1-based indices).
/// Vertex groups, if any, go to a `<path>.groups.json` sidecar.
pub fn save_obj(path: &Path, mesh: &TriMesh) -> Result<(), GeomError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    if !mesh.groups.is_empty() {
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(&mesh.groups)
            .map_err(|e| GeomError::InvalidMesh(e.to_string()))?;
        std::fs::write(sidecar, json)?;
    }
    Ok(())
}

pub fn load_obj(path: &Path) -> Result<TriMesh, GeomError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    *c = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| GeomError::Parse {
                            line: lineno + 1,
                            msg: "malformed vertex".into(),
                        })?;
                }
                vertices.push(Point3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                let mut idx = [0usize; 3];
                for (k, slot) in idx.iter_mut().enumerate() {
                    let tok = it.next().ok_or_else(|| GeomError::Parse {
                        line: lineno + 1,
                        msg: format!("face needs 3 indices, got {k}"),
                    })?;
                    // Accept `v`, `v/vt`, `v/vt/vn`, `v//vn` forms.
                    let vtok = tok.split('/').next().unwrap_or(tok);
                    let one_based: usize = vtok.parse().map_err(|_| GeomError::Parse {
                        line: lineno + 1,
                        msg: format!("bad face index `{tok}`"),
                    })?;
                    if one_based == 0 {
                        return Err(GeomError::Parse {
                            line: lineno + 1,
                            msg: "face index 0 (OBJ is 1-based)".into(),
                        });
                    }
                    *slot = one_based - 1;
                }
                if it.next().is_some() {
                    return Err(GeomError::Parse {
                        line: lineno + 1,
                        msg: "only triangle faces are supported".into(),
                    });
                }
                faces.push(idx);
            }
            // Ignore normals, texcoords, objects, groups, materials.
            _ => {}
        }
    }
    let mut mesh = TriMesh::new(vertices, faces);
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        mesh.groups = load_vertex_groups(&sidecar)?;
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn load_vertex_groups(path: &Path) -> Result<BTreeMap<String, Vec<usize>>, GeomError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| GeomError::Parse {
        line: 0,
        msg: format!("groups sidecar: {e}"),
    })
}

fn sidecar_path(obj_path: &Path) -> std::path::PathBuf {
    let mut p = obj_path.as_os_str().to_owned();
    p.push(".groups.json");
    std::path::PathBuf::from(p)
}
