use std::fs;
use std::path::Path;

use super::{Cluster, GroundSplit, SceneError};
use crate::geom::{Point3, PointCloud};
use crate::scalar::Scalar;

/// On-disk point-cloud layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// Little-endian f32 `x, y, z` records.
    BinXyz,
    /// Little-endian f32 `x, y, z, intensity` records; intensity is dropped.
    BinXyzi,
    /// Comma-separated with a header naming at least `x`, `y`, `z`.
    Csv,
}

impl CloudFormat {
    fn stride(self) -> usize {
        match self {
            CloudFormat::BinXyz => 3,
            CloudFormat::BinXyzi => 4,
            CloudFormat::Csv => 0,
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bin3" | "xyz" => Ok(Self::BinXyz),
            "bin4" | "bin" | "xyzi" => Ok(Self::BinXyzi),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown cloud format '{other}' (expected bin3, bin4 or csv)")),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> SceneError {
    SceneError::Io { path: path.display().to_string(), source }
}

pub fn load_cloud<T: Scalar>(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud<T>, SceneError> {
    let path = path.as_ref();
    match format {
        CloudFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_csv_cloud(&text)
        }
        _ => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            parse_binary_cloud(&bytes, format.stride())
        }
    }
}

/// Decodes packed little-endian f32 records of `stride` floats; the first
/// three are `x, y, z`.
pub fn parse_binary_cloud<T: Scalar>(bytes: &[u8], stride: usize) -> Result<PointCloud<T>, SceneError> {
    let record = stride * 4;
    if !bytes.len().is_multiple_of(record) {
        let offset = bytes.len() - bytes.len() % record;
        return Err(SceneError::Malformed {
            offset,
            reason: format!("trailing {} bytes do not form a {record}-byte record", bytes.len() - offset),
        });
    }
    let points = bytes
        .chunks_exact(record)
        .map(|r| {
            let f = |k: usize| T::lit(f32::from_le_bytes([r[4 * k], r[4 * k + 1], r[4 * k + 2], r[4 * k + 3]]) as f64);
            Point3::new(f(0), f(1), f(2))
        })
        .collect();
    Ok(PointCloud::new(points))
}

fn parse_csv_cloud<T: Scalar>(text: &str) -> Result<PointCloud<T>, SceneError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| SceneError::Parse { line: 1, reason: e.to_string() })?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| SceneError::Parse { line: 1, reason: format!("header is missing column '{name}'") })
    };
    let cols = [column("x")?, column("y")?, column("z")?];
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| SceneError::Parse { line, reason: e.to_string() })?;
        let mut xyz = [0.0f64; 3];
        for (v, &c) in xyz.iter_mut().zip(&cols) {
            let field = rec.get(c).ok_or_else(|| SceneError::Parse { line, reason: format!("missing field {c}") })?;
            *v = field.parse().map_err(|_| SceneError::Parse { line, reason: format!("'{field}' is not a number") })?;
        }
        points.push(Point3::new(T::lit(xyz[0]), T::lit(xyz[1]), T::lit(xyz[2])));
    }
    Ok(PointCloud::new(points))
}

/// Writes `cloud` as `format`. Binary layouts store f32; intensity is written as 0.
pub fn write_cloud<T: Scalar>(
    path: impl AsRef<Path>,
    cloud: &PointCloud<T>,
    format: CloudFormat,
) -> Result<(), SceneError> {
    let path = path.as_ref();
    let bytes = match format {
        CloudFormat::Csv => {
            let mut s = String::from("x,y,z\n");
            for p in &cloud.points {
                s.push_str(&format!("{},{},{}\n", p.x.to_f64_lossy(), p.y.to_f64_lossy(), p.z.to_f64_lossy()));
            }
            s.into_bytes()
        }
        _ => {
            let stride = format.stride();
            let mut out = Vec::with_capacity(cloud.len() * stride * 4);
            for p in &cloud.points {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
                }
                if stride == 4 {
                    out.extend_from_slice(&0f32.to_le_bytes());
                }
            }
            out
        }
    };
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Ground-mask sidecar: one `0`/`1` per line, one line per point.
pub fn read_ground_mask(path: impl AsRef<Path>, n_points: usize) -> Result<GroundSplit, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut split = GroundSplit::default();
    let mut count = 0usize;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match line.trim() {
            "1" => split.ground.push(count),
            "0" => split.non_ground.push(count),
            other => return Err(SceneError::Parse { line: i + 1, reason: format!("expected 0 or 1, got '{other}'") }),
        }
        count += 1;
    }
    if count != n_points {
        return Err(SceneError::Parse {
            line: count,
            reason: format!("mask has {count} entries for {n_points} points"),
        });
    }
    Ok(split)
}

/// Cluster-label sidecar: one integer per line, `-1` for noise.
pub fn read_cluster_labels<T: Scalar>(
    path: impl AsRef<Path>,
    cloud: &PointCloud<T>,
) -> Result<Vec<Cluster<T>>, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    let mut count = 0usize;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let label: i64 = line.trim().parse().map_err(|_| SceneError::Parse {
            line: i + 1,
            reason: format!("'{}' is not an integer label", line.trim()),
        })?;
        if label >= 0 {
            groups.entry(label).or_default().push(count);
        }
        count += 1;
    }
    if count != cloud.len() {
        return Err(SceneError::Parse { line: count, reason: format!("{count} labels for {} points", cloud.len()) });
    }
    Ok(groups.into_values().map(|idx| Cluster::from_indices(cloud, idx)).collect())
}
