//! Sequence directories, key=value text files and TUM trajectories.
//!
//! A sequence directory holds
//!
//! * `imu.csv` — `t,wx,wy,wz,ax,ay,az` (s, rad/s, m/s²)
//! * `scans/NNNNNN.csv` — `t,x,y,z,doppler,rcs` (m, m/s, dBsm), one file per scan
//! * `gt.csv` — `t,px,py,pz,qx,qy,qz,qw` (optional)
//! * `labels.csv` — `scan,point,label` with `static:<id>`, `dynamic` or `clutter` (optional)
//! * `meta.txt` — `key = value` lines (see [`Meta`])
//!
//! Floats are written in shortest round-trip form, so write→read is lossless.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geom::{quat_from_wxyz, UnitQuat, Vec3};
use crate::sensor::{Extrinsics, FrameState, ImuSample, RadarPoint, RadarScan, DEFAULT_GRAVITY_Z};

pub const IMU_HEADER: [&str; 7] = ["t", "wx", "wy", "wz", "ax", "ay", "az"];
pub const SCAN_HEADER: [&str; 6] = ["t", "x", "y", "z", "doppler", "rcs"];
pub const GT_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qx", "qy", "qz", "qw"];
pub const LABEL_HEADER: [&str; 3] = ["scan", "point", "label"];
pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        msg: String,
    },
    #[error("{}:{line}: time {t} does not increase", path.display())]
    NonMonotonic { path: PathBuf, line: u64, t: f64 },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Invalid {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RcsError {
    #[error("intensity must be positive, got {0}")]
    Intensity(f64),
    #[error("range must be positive, got {0}")]
    Range(f64),
}

/// RCS proxy in dB from a detection's intensity and range, with the radar
/// equation's range factor removed: `10·log10(intensity · r⁴)`. The omitted
/// antenna/power constants only shift all values by a common offset.
pub fn intensity_to_rcs(intensity: f64, range: f64) -> Result<f64, RcsError> {
    if !(intensity > 0.0) {
        return Err(RcsError::Intensity(intensity));
    }
    if !(range > 0.0) {
        return Err(RcsError::Range(range));
    }
    Ok(10.0 * intensity.log10() + 40.0 * range.log10())
}

/// Ordered `key = value` pairs; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(String, String)>,
}

impl KeyValues {
    /// Parses text, reporting the 1-based line of the first malformed entry.
    pub fn parse(text: &str) -> Result<Self, (u64, String)> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err((i as u64 + 1, format!("expected 'key = value', got '{line}'")));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err((i as u64 + 1, "empty key".into()));
            }
            entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text).map_err(|(line, msg)| IoError::Parse {
            path: path.to_path_buf(),
            line,
            column: 1,
            msg,
        })
    }

    /// Last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| format!("invalid value '{v}' for '{key}'")))
            .transpose()
    }

    /// Whitespace-separated floats.
    pub fn floats(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>, String> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let vals: Result<Vec<f64>, _> = v.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(vals) if vals.len() == n => Ok(Some(vals)),
            _ => Err(format!("'{key}' needs {n} numbers, got '{v}'")),
        }
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Sequence-level constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meta {
    pub imu_rate_hz: f64,
    pub scan_rate_hz: f64,
    pub gravity_z: f64,
    /// Multiplies stored Doppler values on read; -1 for sensors reporting
    /// positive Doppler on receding targets.
    pub doppler_sign: f64,
    pub ext: Extrinsics,
}

impl Default for Meta {
    fn default() -> Self {
        Self {
            imu_rate_hz: 200.0,
            scan_rate_hz: 10.0,
            gravity_z: DEFAULT_GRAVITY_Z,
            doppler_sign: 1.0,
            ext: Extrinsics::identity(),
        }
    }
}

impl Meta {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, String> {
        let mut m = Meta::default();
        if let Some(v) = kv.parsed("imu_rate_hz")? {
            m.imu_rate_hz = v;
        }
        if let Some(v) = kv.parsed("scan_rate_hz")? {
            m.scan_rate_hz = v;
        }
        if let Some(v) = kv.parsed("gravity_z")? {
            m.gravity_z = v;
        }
        if let Some(v) = kv.parsed::<f64>("doppler_sign")? {
            if v != 1.0 && v != -1.0 {
                return Err(format!("doppler_sign must be 1 or -1, got {v}"));
            }
            m.doppler_sign = v;
        }
        if let Some(q) = kv.floats("ext_q", 4)? {
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(format!("ext_q is not a unit quaternion (norm {norm})"));
            }
            m.ext.rotation = quat_from_wxyz(q[3], q[0], q[1], q[2]);
        }
        if let Some(t) = kv.floats("ext_t", 3)? {
            m.ext.translation = Vec3::new(t[0], t[1], t[2]);
        }
        if !(m.imu_rate_hz > 0.0 && m.scan_rate_hz > 0.0) {
            return Err("rates must be positive".into());
        }
        Ok(m)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let q = self.ext.rotation.quaternion();
        let t = self.ext.translation;
        let mut kv = KeyValues::default();
        kv.set("imu_rate_hz", self.imu_rate_hz.to_string());
        kv.set("scan_rate_hz", self.scan_rate_hz.to_string());
        kv.set("gravity_z", self.gravity_z.to_string());
        kv.set("doppler_sign", self.doppler_sign.to_string());
        kv.set("ext_q", format!("{} {} {} {}", q.i, q.j, q.k, q.w));
        kv.set("ext_t", format!("{} {} {}", t.x, t.y, t.z));
        kv
    }
}

/// A timestamped pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub t: f64,
    pub p: Vec3,
    pub q: UnitQuat,
}

impl From<&FrameState> for StampedPose {
    fn from(x: &FrameState) -> Self {
        Self {
            t: x.t,
            p: x.p,
            q: x.q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointLabel {
    Static(u64),
    Dynamic,
    Clutter,
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointLabel::Static(id) => write!(f, "static:{id}"),
            PointLabel::Dynamic => f.write_str("dynamic"),
            PointLabel::Clutter => f.write_str("clutter"),
        }
    }
}

impl FromStr for PointLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dynamic" => Ok(PointLabel::Dynamic),
            "clutter" => Ok(PointLabel::Clutter),
            _ => s
                .strip_prefix("static:")
                .and_then(|id| id.parse().ok())
                .map(PointLabel::Static)
                .ok_or_else(|| format!("unknown label '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sequence {
    pub meta: Meta,
    pub imu: Vec<ImuSample>,
    pub scans: Vec<RadarScan>,
    pub gt: Option<Vec<StampedPose>>,
    /// Per scan, one label per point.
    pub labels: Option<Vec<Vec<PointLabel>>>,
}

impl Sequence {
    /// IMU samples with `t0 <= t <= t1`.
    pub fn imu_between(&self, t0: f64, t1: f64) -> &[ImuSample] {
        let a = self.imu.partition_point(|s| s.t < t0);
        let b = self.imu.partition_point(|s| s.t <= t1);
        &self.imu[a..b]
    }

    /// IMU samples bracketing `[t0, t1]`: the last sample at or before `t0`
    /// through the first at or after `t1`.
    pub fn imu_bracketing(&self, t0: f64, t1: f64) -> &[ImuSample] {
        let a = self.imu.partition_point(|s| s.t <= t0).saturating_sub(1);
        let b = (self.imu.partition_point(|s| s.t < t1) + 1).min(self.imu.len());
        &self.imu[a..b.max(a)]
    }
}

fn parse_row(
    path: &Path,
    record: &csv::StringRecord,
    expected: usize,
) -> Result<Vec<f64>, IoError> {
    let line = record.position().map_or(0, |p| p.line());
    if record.len() != expected {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line,
            column: record.len().min(expected) + 1,
            msg: format!("expected {expected} columns, found {}", record.len()),
        });
    }
    record
        .iter()
        .enumerate()
        .map(|(i, field)| {
            field.trim().parse::<f64>().map_err(|_| IoError::Parse {
                path: path.to_path_buf(),
                line,
                column: i + 1,
                msg: format!("invalid number '{field}'"),
            })
        })
        .collect()
}

/// Reads a headed CSV of floats, returning rows with their line numbers.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let got = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            msg: format!("expected header '{}'", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, parse_row(path, &rec, header.len())?));
    }
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => IoError::Parse {
            path: path.to_path_buf(),
            line,
            column: 1,
            msg: format!("{kind:?}"),
        },
    }
}

fn check_increasing(path: &Path, rows: &[(u64, Vec<f64>)]) -> Result<(), IoError> {
    for w in rows.windows(2) {
        if !(w[1].1[0] > w[0].1[0]) {
            return Err(IoError::NonMonotonic {
                path: path.to_path_buf(),
                line: w[1].0,
                t: w[1].1[0],
            });
        }
    }
    Ok(())
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>, IoError> {
    let rows = read_csv(path, &IMU_HEADER)?;
    check_increasing(path, &rows)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| ImuSample::new(r[0], Vec3::new(r[1], r[2], r[3]), Vec3::new(r[4], r[5], r[6])))
        .collect())
}

/// Reads one scan file; every row must share the first row's time.
pub fn read_scan(path: &Path, doppler_sign: f64) -> Result<RadarScan, IoError> {
    let rows = read_csv(path, &SCAN_HEADER)?;
    let t = rows.first().map_or(f64::NAN, |r| r.1[0]);
    let mut points = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if r[0] != t {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                column: 1,
                msg: format!("row time {} differs from scan time {t}", r[0]),
            });
        }
        points.push(RadarPoint::new(Vec3::new(r[1], r[2], r[3]), doppler_sign * r[4], r[5]));
    }
    Ok(RadarScan::new(t, points))
}

fn parse_pose_row(r: &[f64]) -> StampedPose {
    StampedPose {
        t: r[0],
        p: Vec3::new(r[1], r[2], r[3]),
        q: quat_from_wxyz(r[7], r[4], r[5], r[6]),
    }
}

pub fn read_gt(path: &Path) -> Result<Vec<StampedPose>, IoError> {
    let rows = read_csv(path, &GT_HEADER)?;
    check_increasing(path, &rows)?;
    Ok(rows.iter().map(|(_, r)| parse_pose_row(r)).collect())
}

/// Reads labels into per-scan vectors sized by `scan_sizes`.
pub fn read_labels(path: &Path, scan_sizes: &[usize]) -> Result<Vec<Vec<PointLabel>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let got = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(LABEL_HEADER.iter().copied()) {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            msg: format!("expected header '{}'", LABEL_HEADER.join(",")),
        });
    }
    let mut out: Vec<Vec<Option<PointLabel>>> = scan_sizes.iter().map(|&n| vec![None; n]).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str, IoError> {
            rec.get(i).ok_or_else(|| IoError::Parse {
                path: path.to_path_buf(),
                line,
                column: i + 1,
                msg: "missing column".into(),
            })
        };
        let bad = |column: usize, msg: String| IoError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            msg,
        };
        let scan: usize = field(0)?.parse().map_err(|_| bad(1, "invalid scan index".into()))?;
        let point: usize = field(1)?.parse().map_err(|_| bad(2, "invalid point index".into()))?;
        let label: PointLabel = field(2)?.parse().map_err(|m| bad(3, m))?;
        let slot = out
            .get_mut(scan)
            .and_then(|s| s.get_mut(point))
            .ok_or_else(|| bad(1, format!("no point {point} in scan {scan}")))?;
        *slot = Some(label);
    }
    out.into_iter()
        .enumerate()
        .map(|(s, labels)| {
            labels
                .into_iter()
                .enumerate()
                .map(|(p, l)| l.ok_or_else(|| invalid(path, format!("point {p} of scan {s} has no label"))))
                .collect()
        })
        .collect()
}

fn scan_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("scans").join(format!("{index:06}.csv"))
}

pub fn read_sequence(dir: &Path) -> Result<Sequence, IoError> {
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        let kv = KeyValues::read(&meta_path)?;
        Meta::from_key_values(&kv).map_err(|m| invalid(&meta_path, m))?
    } else {
        Meta::default()
    };
    let imu = read_imu(&dir.join("imu.csv"))?;

    let scan_dir = dir.join("scans");
    let mut names: Vec<String> = fs::read_dir(&scan_dir)
        .map_err(io_err(&scan_dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut scans: Vec<RadarScan> = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let path = scan_dir.join(name);
        if name != &format!("{i:06}.csv") {
            return Err(invalid(&path, format!("expected scan file {i:06}.csv")));
        }
        let scan = read_scan(&path, meta.doppler_sign)?;
        if let Some(prev) = scans.last() {
            if !(scan.t > prev.t) {
                return Err(IoError::NonMonotonic { path, line: 2, t: scan.t });
            }
        }
        scans.push(scan);
    }

    let gt_path = dir.join("gt.csv");
    let gt = if gt_path.exists() { Some(read_gt(&gt_path)?) } else { None };
    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() {
        let sizes: Vec<usize> = scans.iter().map(RadarScan::len).collect();
        Some(read_labels(&labels_path, &sizes)?)
    } else {
        None
    };
    Ok(Sequence {
        meta,
        imu,
        scans,
        gt,
        labels,
    })
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn pose_fields(p: &StampedPose) -> Vec<String> {
    let q = p.q.quaternion();
    [p.t, p.p.x, p.p.y, p.p.z, q.i, q.j, q.k, q.w]
        .iter()
        .map(f64::to_string)
        .collect()
}

pub fn write_gt(path: &Path, poses: &[StampedPose]) -> Result<(), IoError> {
    write_csv(path, &GT_HEADER, poses.iter().map(pose_fields))
}

pub fn write_sequence(dir: &Path, seq: &Sequence) -> Result<(), IoError> {
    let scan_dir = dir.join("scans");
    fs::create_dir_all(&scan_dir).map_err(io_err(&scan_dir))?;
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, seq.meta.to_key_values().to_string()).map_err(io_err(&meta_path))?;

    write_csv(
        &dir.join("imu.csv"),
        &IMU_HEADER,
        seq.imu.iter().map(|s| {
            [s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z]
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
        }),
    )?;
    for (i, scan) in seq.scans.iter().enumerate() {
        write_csv(
            &scan_path(dir, i),
            &SCAN_HEADER,
            scan.points.iter().map(|p| {
                [scan.t, p.p.x, p.p.y, p.p.z, seq.meta.doppler_sign * p.doppler, p.rcs]
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
            }),
        )?;
    }
    if let Some(gt) = &seq.gt {
        write_gt(&dir.join("gt.csv"), gt)?;
    }
    if let Some(labels) = &seq.labels {
        write_csv(
            &dir.join("labels.csv"),
            &LABEL_HEADER,
            labels.iter().enumerate().flat_map(|(s, ls)| {
                ls.iter()
                    .enumerate()
                    .map(move |(p, l)| vec![s.to_string(), p.to_string(), l.to_string()])
            }),
        )?;
    }
    Ok(())
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros removed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// One `t px py pz qx qy qz qw` line per pose.
pub fn export_trajectory_tum(poses: &[StampedPose]) -> String {
    let mut out = String::new();
    for p in poses {
        let q = p.q.quaternion();
        let fields: Vec<String> = [p.p.x, p.p.y, p.p.z, q.i, q.j, q.k, q.w]
            .iter()
            .map(|v| format_sig9(*v))
            .collect();
        out.push_str(&format!("{:.9} {}\n", p.t, fields.join(" ")));
    }
    out
}

/// Parses TUM text; blank lines and `#` comments are skipped. Errors carry
/// the 1-based line and column.
pub fn parse_tum(text: &str) -> Result<Vec<StampedPose>, (u64, usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err((i as u64 + 1, fields.len().min(8) + 1, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut r = [0.0; 8];
        for (j, f) in fields.iter().enumerate() {
            r[j] = f
                .parse()
                .map_err(|_| (i as u64 + 1, j + 1, format!("invalid number '{f}'")))?;
        }
        out.push(parse_pose_row(&r));
    }
    Ok(out)
}

pub fn read_tum(path: &Path) -> Result<Vec<StampedPose>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_tum(&text).map_err(|(line, column, msg)| IoError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rcs_proxy_differences() {
        let a = intensity_to_rcs(2.0, 10.0).unwrap();
        let b = intensity_to_rcs(1.0, 10.0).unwrap();
        assert_relative_eq!(a - b, 10.0 * 2f64.log10(), epsilon = 1e-12);
        assert_relative_eq!(a - b, 3.0103, epsilon = 1e-4);
        let c = intensity_to_rcs(1.0, 20.0).unwrap();
        assert_relative_eq!(c - b, 12.0412, epsilon = 1e-4);
        // equal intensity·r⁴ → equal proxy
        let d = intensity_to_rcs(16.0, 5.0).unwrap();
        assert_relative_eq!(d, b, epsilon = 1e-12);
        assert_eq!(intensity_to_rcs(0.0, 1.0), Err(RcsError::Intensity(0.0)));
        assert_eq!(intensity_to_rcs(1.0, -1.0), Err(RcsError::Range(-1.0)));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(2.0e10), "2e+10");
        assert_eq!(format_sig9(0.0001), "0.0001");
    }

    #[test]
    fn identity_pose_tum_line() {
        let p = StampedPose {
            t: 0.0,
            p: Vec3::zeros(),
            q: UnitQuat::identity(),
        };
        assert_eq!(export_trajectory_tum(&[p]), "0.000000000 0 0 0 0 0 0 1\n");
    }

    #[test]
    fn key_values() {
        let kv = KeyValues::parse("# c\na = 1\n b=two  # tail\n\na = 3\n").unwrap();
        assert_eq!(kv.get("a"), Some("3"));
        assert_eq!(kv.get("b"), Some("two"));
        assert_eq!(KeyValues::parse("x\n").unwrap_err().0, 1);
        assert_eq!(KeyValues::parse("a=1\n=2").unwrap_err().0, 2);
    }

    #[test]
    fn labels_round_trip_text() {
        for l in [PointLabel::Static(17), PointLabel::Dynamic, PointLabel::Clutter] {
            assert_eq!(l.to_string().parse::<PointLabel>().unwrap(), l);
        }
        assert!("static:x".parse::<PointLabel>().is_err());
    }
}
