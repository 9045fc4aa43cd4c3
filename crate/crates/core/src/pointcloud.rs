//! Labeled point clouds and their PLY/CSV serialization.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geomcore::ply::{self, ElementSpec, PropertyKind, ScalarType};
use crate::geomcore::{GeomError, Result};

/// Instance id of points that hit no labeled object.
pub const UNLABELED: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub pos: Point3<f64>,
    pub rgb: [u8; 3],
    pub lidar_id: u16,
    pub instance_id: i32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPointCloud {
    pub points: Vec<LabeledPoint>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.points.iter().map(|p| p.pos).collect()
    }

    pub fn instance_ids(&self) -> Vec<i32> {
        self.points.iter().map(|p| p.instance_id).collect()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> GeomError {
    GeomError::Io {
        path: path.to_path_buf(),
        source,
    }
}

const LABELED_PROPS: [(&str, ScalarType); 8] = [
    ("x", ScalarType::F64),
    ("y", ScalarType::F64),
    ("z", ScalarType::F64),
    ("red", ScalarType::U8),
    ("green", ScalarType::U8),
    ("blue", ScalarType::U8),
    ("lidar_id", ScalarType::U16),
    ("instance_id", ScalarType::I32),
];

pub fn write_labeled_ply(cloud: &LabeledPointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut body = Vec::with_capacity(cloud.len() * 33);
    for p in &cloud.points {
        body.extend_from_slice(&p.pos.x.to_le_bytes());
        body.extend_from_slice(&p.pos.y.to_le_bytes());
        body.extend_from_slice(&p.pos.z.to_le_bytes());
        body.extend_from_slice(&p.rgb);
        body.extend_from_slice(&p.lidar_id.to_le_bytes());
        body.extend_from_slice(&p.instance_id.to_le_bytes());
    }
    let spec = ElementSpec {
        name: "vertex",
        count: cloud.len(),
        properties: LABELED_PROPS
            .iter()
            .map(|&(n, t)| (n, PropertyKind::Scalar(t)))
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    ply::write_binary_ply(&mut w, &["instance_id -1 = unlabeled".into()], &[spec], &body)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

pub fn read_labeled_ply(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let data = ply::read_ply(&mut BufReader::new(f))?;
    let v = data.element("vertex").ok_or_else(|| GeomError::Parse {
        line: 0,
        msg: "PLY missing vertex element".into(),
    })?;
    let col = |name: &str| {
        v.scalar(name).ok_or_else(|| GeomError::Parse {
            line: 0,
            msg: format!("PLY missing property {name}"),
        })
    };
    let (x, y, z) = (col("x")?, col("y")?, col("z")?);
    let (r, g, b) = (col("red").ok(), col("green").ok(), col("blue").ok());
    let lid = col("lidar_id").ok();
    let iid = col("instance_id").ok();
    let points = (0..v.count)
        .map(|i| LabeledPoint {
            pos: Point3::new(x[i], y[i], z[i]),
            rgb: match (r, g, b) {
                (Some(r), Some(g), Some(b)) => [r[i] as u8, g[i] as u8, b[i] as u8],
                _ => [0, 0, 0],
            },
            lidar_id: lid.map_or(0, |c| c[i] as u16),
            instance_id: iid.map_or(UNLABELED, |c| c[i] as i32),
        })
        .collect();
    Ok(LabeledPointCloud { points })
}

pub fn write_labeled_csv(cloud: &LabeledPointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("x,y,z,r,g,b,lidar_id,instance_id\n");
    for p in &cloud.points {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.pos.x, p.pos.y, p.pos.z, p.rgb[0], p.rgb[1], p.rgb[2], p.lidar_id, p.instance_id
        )
        .unwrap();
    }
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| GeomError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |k: usize| f[k].trim().parse::<f64>().map_err(|_| bad("bad number"));
        points.push(LabeledPoint {
            pos: Point3::new(num(0)?, num(1)?, num(2)?),
            rgb: [num(3)? as u8, num(4)? as u8, num(5)? as u8],
            lidar_id: num(6)? as u16,
            instance_id: num(7)? as i32,
        });
    }
    Ok(LabeledPointCloud { points })
}

/// Plain XYZ cloud as binary little-endian PLY with double coordinates.
pub fn write_xyz_ply(points: &[Point3<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut body = Vec::with_capacity(points.len() * 24);
    for p in points {
        for k in 0..3 {
            body.extend_from_slice(&p[k].to_le_bytes());
        }
    }
    let spec = ElementSpec {
        name: "vertex",
        count: points.len(),
        properties: ["x", "y", "z"]
            .iter()
            .map(|&n| (n, PropertyKind::Scalar(ScalarType::F64)))
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    ply::write_binary_ply(&mut w, &[], &[spec], &body)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

pub fn read_xyz_ply(path: impl AsRef<Path>) -> Result<Vec<Point3<f64>>> {
    Ok(read_labeled_ply(path)?.positions())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledPointCloud {
        LabeledPointCloud::new(vec![
            LabeledPoint {
                pos: Point3::new(0.1, -2.5e-7, 3.0),
                rgb: [1, 2, 3],
                lidar_id: 14,
                instance_id: 359,
            },
            LabeledPoint {
                pos: Point3::new(1.0 / 3.0, 0.0, -1e10),
                rgb: [255, 0, 128],
                lidar_id: 0,
                instance_id: UNLABELED,
            },
        ])
    }

    #[test]
    fn ply_and_csv_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        write_labeled_ply(&c, dir.path().join("a.ply")).unwrap();
        write_labeled_csv(&c, dir.path().join("a.csv")).unwrap();
        assert_eq!(read_labeled_ply(dir.path().join("a.ply")).unwrap(), c);
        assert_eq!(read_labeled_csv(dir.path().join("a.csv")).unwrap(), c);
        write_xyz_ply(&c.positions(), dir.path().join("b.ply")).unwrap();
        assert_eq!(read_xyz_ply(dir.path().join("b.ply")).unwrap(), c.positions());
    }
}
