use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use nalgebra::Point3;

use super::ply::{self, PlyData};
use super::{GeomError, Result, TriMesh};

fn io_err(path: &Path, source: std::io::Error) -> GeomError {
    GeomError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Load an OBJ or PLY mesh (chosen by extension) and multiply coordinates by `unit_scale`.
pub fn load_mesh(path: impl AsRef<Path>, unit_scale: f64) -> Result<TriMesh> {
    let path = path.as_ref();
    if !(unit_scale > 0.0 && unit_scale.is_finite()) {
        return Err(GeomError::InvalidArgument(format!("unit_scale must be > 0, got {unit_scale}")));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mesh = match ext.as_str() {
        "obj" => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_obj(&text)?
        }
        "ply" => {
            let f = File::open(path).map_err(|e| io_err(path, e))?;
            parse_ply_mesh(&mut BufReader::new(f))?
        }
        _ => return Err(GeomError::UnsupportedFormat(path.display().to_string())),
    };
    let mut scaled = mesh.scaled(unit_scale);
    scaled.unit_scale = unit_scale;
    Ok(scaled)
}

fn parse_index(tok: &str, nverts: usize, line: usize) -> Result<u32> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| GeomError::Parse {
        line,
        msg: format!("bad face index {tok:?}"),
    })?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        nverts as i64 + i
    } else {
        -1
    };
    if resolved < 0 || resolved as usize >= nverts {
        return Err(GeomError::Parse {
            line,
            msg: format!("face index {i} out of range ({nverts} vertices so far)"),
        });
    }
    Ok(resolved as u32)
}

/// Parse Wavefront OBJ text. Vertex colors use the `v x y z r g b` extension and are taken as
/// 0..1 floats unless some component exceeds 1, in which case all are read as 0..255.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut raw_colors: Vec<Option<[f64; 3]>> = Vec::new();
    let mut faces = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals: Vec<f64> = toks
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| GeomError::Parse {
                            line: line_no,
                            msg: format!("bad coordinate {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if vals.len() < 3 {
                    return Err(GeomError::Parse {
                        line: line_no,
                        msg: format!("vertex needs 3 coordinates, found {}", vals.len()),
                    });
                }
                vertices.push(Point3::new(vals[0], vals[1], vals[2]));
                raw_colors.push((vals.len() >= 6).then(|| [vals[3], vals[4], vals[5]]));
            }
            Some("f") => {
                let idx: Vec<u32> = toks
                    .map(|t| parse_index(t, vertices.len(), line_no))
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(GeomError::Parse {
                        line: line_no,
                        msg: format!("face needs 3 indices, found {}", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let colors = if !raw_colors.is_empty() && raw_colors.iter().all(Option::is_some) {
        let cs: Vec<[f64; 3]> = raw_colors.into_iter().flatten().collect();
        let byte_range = cs.iter().flatten().any(|&c| c > 1.0);
        let mul = if byte_range { 1.0 } else { 255.0 };
        Some(
            cs.iter()
                .map(|c| c.map(|v| (v * mul).round().clamp(0.0, 255.0) as u8))
                .collect(),
        )
    } else {
        None
    };
    let mesh = TriMesh::new(vertices, faces)?;
    match colors {
        Some(c) => mesh.with_colors(c),
        None => Ok(mesh),
    }
}

pub fn parse_ply_mesh(reader: &mut impl std::io::BufRead) -> Result<TriMesh> {
    ply_to_mesh(ply::read_ply(reader)?)
}

fn ply_to_mesh(data: PlyData) -> Result<TriMesh> {
    let missing = |what: &str| GeomError::Parse {
        line: 0,
        msg: format!("PLY missing {what}"),
    };
    let v = data.element("vertex").ok_or_else(|| missing("vertex element"))?;
    let (xs, ys, zs) = (
        v.scalar("x").ok_or_else(|| missing("x"))?,
        v.scalar("y").ok_or_else(|| missing("y"))?,
        v.scalar("z").ok_or_else(|| missing("z"))?,
    );
    let vertices: Vec<Point3<f64>> = (0..v.count).map(|i| Point3::new(xs[i], ys[i], zs[i])).collect();
    let colors = match (v.scalar("red"), v.scalar("green"), v.scalar("blue")) {
        (Some(r), Some(g), Some(b)) => Some(
            (0..v.count)
                .map(|i| [r[i] as u8, g[i] as u8, b[i] as u8])
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let mut faces = Vec::new();
    if let Some(f) = data.element("face") {
        let lists = f
            .list(&["vertex_indices", "vertex_index"])
            .ok_or_else(|| missing("face vertex_indices"))?;
        for l in lists {
            if l.len() < 3 {
                return Err(GeomError::Parse {
                    line: 0,
                    msg: format!("face with {} indices", l.len()),
                });
            }
            for k in 1..l.len() - 1 {
                faces.push([l[0] as u32, l[k] as u32, l[k + 1] as u32]);
            }
        }
    }
    let mesh = TriMesh::new(vertices, faces)?;
    match colors {
        Some(c) => mesh.with_colors(c),
        None => Ok(mesh),
    }
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => {
                let [r, g, b] = c[i];
                writeln!(s, "v {} {} {} {} {} {}", v.x, v.y, v.z, r, g, b).unwrap();
            }
            None => writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap(),
        }
    }
    for f in &mesh.faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(s.as_bytes()).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomcore::primitives;

    const TET: &str = "# tetrahedron\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

    #[test]
    fn tetrahedron_fixture() {
        let m = parse_obj(TET).unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (4, 4));
        assert!(!m.non_manifold);
        assert!(m.colors.is_none());
    }

    #[test]
    fn unit_scale_applied_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        save_obj(&primitives::unit_cube(), &p).unwrap();
        let m = load_mesh(&p, 0.01).unwrap();
        let e = m.aabb().extent();
        for k in 0..3 {
            assert!((e[k] - 0.01).abs() < 1e-15);
        }
        assert_eq!(m.unit_scale, 0.01);
    }

    #[test]
    fn truncated_file_reports_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1";
        match parse_obj(text) {
            Err(GeomError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 0 0\nf 1 2") {
            Err(GeomError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn colors_negative_indices_and_quads() {
        let text = "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 1 1 0 0 0 1\nv 0 1 0 0.5 0.5 0.5\nf -4 -3 -2 -1\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.colors.as_ref().unwrap()[3], [128, 128, 128]);
        let bytes = parse_obj("v 0 0 0 200 10 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n").unwrap();
        assert_eq!(bytes.colors.unwrap()[1], [0, 1, 0]);
    }

    #[test]
    fn obj_and_ply_round_trip_with_colors() {
        let dir = tempfile::tempdir().unwrap();
        let cube = primitives::unit_cube().with_uniform_color([10, 20, 30]);
        let p = dir.path().join("c.obj");
        save_obj(&cube, &p).unwrap();
        let back = load_mesh(&p, 1.0).unwrap();
        assert_eq!(back.vertices, cube.vertices);
        assert_eq!(back.faces, cube.faces);
        assert_eq!(back.colors, cube.colors);

        let ply = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                   property uchar red\nproperty uchar green\nproperty uchar blue\nelement face 4\n\
                   property list uchar int vertex_indices\nend_header\n0 0 0 1 2 3\n1 0 0 1 2 3\n0 1 0 1 2 3\n0 0 1 1 2 3\n\
                   3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let pp = dir.path().join("t.ply");
        std::fs::write(&pp, ply).unwrap();
        let m = load_mesh(&pp, 2.0).unwrap();
        assert_eq!(m.face_count(), 4);
        assert_eq!(m.vertices[3], Point3::new(0.0, 0.0, 2.0));
        assert_eq!(m.colors.unwrap()[0], [1, 2, 3]);
    }

    #[test]
    fn rejects_bad_scale_and_extension() {
        assert!(matches!(load_mesh("x.obj", 0.0), Err(GeomError::InvalidArgument(_))));
        assert!(matches!(load_mesh("x.stl", 1.0), Err(GeomError::UnsupportedFormat(_))));
    }
}
