//! On-disk formats and the dataset model.
//!
//! Three file families:
//!
//! * recording CSV — header `t,ppg`, seconds + arbitrary units, one row per
//!   sample; or a bare single column of samples,
//! * metadata sidecar — JSON next to the recording (`<stem>.json`) with the
//!   [`SubjectMeta`] fields plus an optional `fs`,
//! * feature matrix CSV — `subject_id`, one column per feature, final column
//!   `age_label`; floats are written with 17 significant digits so the
//!   save/load round trip is bit-exact.
//!
//! Loaders never repair data: every rejection names the file and, where it
//! applies, the offending row.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error in {path} (line {line}): {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("data error in {path}: {msg}")]
    Data { path: String, msg: String },
    #[error("schema error in {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("{0}")]
    File(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gender::Male => write!(f, "male"),
            Gender::Female => write!(f, "female"),
        }
    }
}

/// Per-subject demographics and vitals. `age` is the regression label and is
/// never emitted as a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    /// Years.
    pub age: f64,
    pub gender: Gender,
    /// Centimetres.
    pub height: f64,
    /// Kilograms.
    pub weight: f64,
    pub family_history_cvd: bool,
    pub smoker: bool,
    /// Beats per minute.
    pub heart_rate: f64,
    /// Percent.
    pub spo2: f64,
}

impl SubjectMeta {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.age > 0.0 && self.age < 130.0) {
            return Err(format!("age {} outside (0, 130)", self.age));
        }
        if !(self.heart_rate >= 40.0 && self.heart_rate <= 220.0) {
            return Err(format!("heart_rate {} outside [40, 220]", self.heart_rate));
        }
        if !(self.spo2 >= 50.0 && self.spo2 <= 100.0) {
            return Err(format!("spo2 {} outside [50, 100]", self.spo2));
        }
        if !(self.height > 0.0) {
            return Err(format!("height {} must be positive", self.height));
        }
        if !(self.weight > 0.0) {
            return Err(format!("weight {} must be positive", self.weight));
        }
        Ok(())
    }
}

/// Uniformly sampled raw PPG time series plus its subject metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub meta: SubjectMeta,
    /// Sample rate in Hz.
    pub fs: f64,
    pub samples: Vec<f64>,
    pub duration_s: f64,
}

#[derive(Deserialize)]
struct Sidecar {
    #[serde(default)]
    fs: Option<f64>,
    #[serde(flatten)]
    meta: SubjectMeta,
}

const DEFAULT_FS: f64 = 400.0;

/// Load a recording CSV plus its `<stem>.json` metadata sidecar.
pub fn load_recording(path: &Path) -> Result<RawRecording> {
    let pathstr = path.display().to_string();
    let text = fs::read_to_string(path)?;

    let sidecar_path = path.with_extension("json");
    let sidecar_str = sidecar_path.display().to_string();
    let sidecar_text = fs::read_to_string(&sidecar_path).map_err(|e| IoError::Schema {
        path: sidecar_str.clone(),
        msg: format!("metadata sidecar missing: {e}"),
    })?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text).map_err(|e| IoError::Schema {
        path: sidecar_str.clone(),
        msg: e.to_string(),
    })?;
    sidecar.meta.validate().map_err(|msg| IoError::Data {
        path: sidecar_str,
        msg,
    })?;

    let mut lines = text.lines().enumerate().peekable();
    let has_header = matches!(lines.peek(), Some((_, l)) if l.trim() == "t,ppg");
    if has_header {
        lines.next();
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| IoError::Parse {
                path: pathstr.clone(),
                line: lineno + 1,
                msg: format!("bad {what} value {s:?}"),
            })
        };
        if has_header {
            let t = parse(fields.next().unwrap_or(""), "t")?;
            let v = parse(fields.next().unwrap_or(""), "ppg")?;
            if fields.next().is_some() {
                return Err(IoError::Parse {
                    path: pathstr,
                    line: lineno + 1,
                    msg: "expected exactly two columns".into(),
                });
            }
            times.push(t);
            samples.push(v);
        } else {
            let v = parse(fields.next().unwrap_or(""), "sample")?;
            if fields.next().is_some() {
                return Err(IoError::Parse {
                    path: pathstr,
                    line: lineno + 1,
                    msg: "expected a single column (or a t,ppg header)".into(),
                });
            }
            samples.push(v);
        }
    }
    if samples.is_empty() {
        return Err(IoError::Parse {
            path: pathstr,
            line: 0,
            msg: "no samples found".into(),
        });
    }
    if let Some(row) = samples.iter().position(|v| !v.is_finite()) {
        return Err(IoError::Data {
            path: pathstr,
            msg: format!("non-finite sample at row {row}"),
        });
    }

    let fs = if has_header && times.len() >= 2 {
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(IoError::Parse {
                    path: pathstr,
                    line: 0,
                    msg: format!("t column is not strictly increasing around t={}", w[0]),
                });
            }
        }
        (times.len() - 1) as f64 / (times[times.len() - 1] - times[0])
    } else {
        sidecar.fs.unwrap_or(DEFAULT_FS)
    };
    if !(fs > 0.0) {
        return Err(IoError::Data {
            path: pathstr,
            msg: format!("non-positive sample rate {fs}"),
        });
    }

    let duration_s = samples.len() as f64 / fs;
    Ok(RawRecording {
        meta: sidecar.meta,
        fs,
        samples,
        duration_s,
    })
}

/// Write a recording as `t,ppg` CSV plus its metadata sidecar (with `fs`).
pub fn save_recording(rec: &RawRecording, path: &Path) -> Result<()> {
    let mut out = String::from("t,ppg\n");
    for (i, v) in rec.samples.iter().enumerate() {
        out.push_str(&format!("{:.16e},{}\n", i as f64 / rec.fs, fmt_f64(*v)));
    }
    fs::write(path, out)?;

    let mut sidecar = serde_json::to_value(&rec.meta).expect("meta serializes");
    sidecar["fs"] = serde_json::json!(rec.fs);
    fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )?;
    Ok(())
}

/// 17-significant-digit decimal encoding: enough to reconstruct any finite
/// f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One labelled feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    /// Origin subject; augmentation copies keep the id of their original so
    /// splits can group them.
    pub subject_id: String,
    pub values: Vec<f64>,
    /// Age in years.
    pub label: f64,
}

/// A labelled feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Dataset {
            feature_names,
            rows: Vec::new(),
        }
    }

    /// Number of rows (the paper's cohort-size symbol).
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.feature_names.is_empty() {
            return Err("feature_names is empty".into());
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name) {
                return Err(format!("duplicate feature name {name:?}"));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.values.len() != self.feature_names.len() {
                return Err(format!(
                    "row {i} has {} values, expected {}",
                    row.values.len(),
                    self.feature_names.len()
                ));
            }
        }
        Ok(())
    }

    /// Column values for feature `idx`.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[idx]).collect()
    }

    /// New dataset keeping only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> std::result::Result<Dataset, String> {
        let indices: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| format!("unknown feature {n:?}"))
            })
            .collect::<std::result::Result<_, _>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| DatasetRow {
                subject_id: r.subject_id.clone(),
                values: indices.iter().map(|&i| r.values[i]).collect(),
                label: r.label,
            })
            .collect();
        Ok(Dataset {
            feature_names: names.to_vec(),
            rows,
        })
    }
}

/// Save a feature matrix: header `subject_id,<features...>,age_label`, one
/// row per subject, 17-significant-digit floats.
pub fn save_feature_matrix(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate().map_err(|msg| IoError::Schema {
        path: path.display().to_string(),
        msg,
    })?;
    let mut out = String::from("subject_id,");
    out.push_str(&ds.feature_names.join(","));
    out.push_str(",age_label\n");
    for row in &ds.rows {
        out.push_str(&row.subject_id);
        for v in &row.values {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(row.label));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Inverse of [`save_feature_matrix`]; bit-exact for finite floats.
pub fn load_feature_matrix(path: &Path) -> Result<Dataset> {
    let pathstr = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| IoError::Parse {
        path: pathstr.clone(),
        line: 0,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "subject_id" || *cols.last().unwrap() != "age_label" {
        return Err(IoError::Schema {
            path: pathstr,
            msg: "header must be subject_id,<features...>,age_label".into(),
        });
    }
    let feature_names: Vec<String> = cols[1..cols.len() - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let mut ds = Dataset::new(feature_names);
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(IoError::Schema {
                path: pathstr,
                msg: format!(
                    "row at line {} has {} fields, header has {}",
                    lineno + 1,
                    fields.len(),
                    cols.len()
                ),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| IoError::Parse {
                path: pathstr.clone(),
                line: lineno + 1,
                msg: format!("bad float {s:?}"),
            })
        };
        let values: Vec<f64> = fields[1..fields.len() - 1]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        let label = parse(fields[fields.len() - 1])?;
        ds.rows.push(DatasetRow {
            subject_id: fields[0].to_string(),
            values,
            label,
        });
    }
    ds.validate().map_err(|msg| IoError::Schema {
        path: pathstr,
        msg,
    })?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn meta(id: &str) -> SubjectMeta {
        SubjectMeta {
            subject_id: id.into(),
            age: 34.0,
            gender: Gender::Male,
            height: 175.0,
            weight: 70.0,
            family_history_cvd: false,
            smoker: false,
            heart_rate: 72.0,
            spo2: 98.0,
        }
    }

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ppgmorph_io_{tag}_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn recording_round_trip_and_duration() {
        let dir = tmpdir("roundtrip");
        let fs = 400.0;
        let samples: Vec<f64> = (0..48_000).map(|i| (i as f64 * 0.013).sin()).collect();
        let rec = RawRecording {
            meta: meta("s1"),
            fs,
            duration_s: samples.len() as f64 / fs,
            samples,
        };
        let path = dir.join("s1.csv");
        save_recording(&rec, &path).unwrap();
        let loaded = load_recording(&path).unwrap();
        assert_eq!(loaded.samples.len(), 48_000);
        assert!((loaded.duration_s - 120.0).abs() < 1e-9);
        assert!((loaded.fs - 400.0).abs() < 1e-6);
        assert_eq!(loaded.meta, rec.meta);
        for (a, b) in loaded.samples.iter().zip(&rec.samples) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_recording_is_a_parse_error() {
        let dir = tmpdir("empty");
        let path = dir.join("empty.csv");
        std::fs::write(&path, "").unwrap();
        std::fs::write(
            dir.join("empty.json"),
            serde_json::to_string(&meta("e")).unwrap(),
        )
        .unwrap();
        assert!(matches!(load_recording(&path), Err(IoError::Parse { .. })));
    }

    #[test]
    fn nan_sample_is_a_data_error_naming_the_row() {
        let dir = tmpdir("nan");
        let path = dir.join("bad.csv");
        std::fs::write(&path, "t,ppg\n0.0,1.0\n0.0025,NaN\n0.005,2.0\n").unwrap();
        std::fs::write(
            dir.join("bad.json"),
            serde_json::to_string(&meta("n")).unwrap(),
        )
        .unwrap();
        match load_recording(&path) {
            Err(IoError::Data { msg, .. }) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("expected Data error, got {other:?}"),
        }
    }

    #[test]
    fn missing_metadata_field_is_a_schema_error() {
        let dir = tmpdir("schema");
        let path = dir.join("s.csv");
        std::fs::write(&path, "t,ppg\n0.0,1.0\n0.0025,1.5\n").unwrap();
        std::fs::write(dir.join("s.json"), r#"{"subject_id":"s","age":30.0}"#).unwrap();
        match load_recording(&path) {
            Err(IoError::Schema { msg, .. }) => assert!(msg.contains("gender"), "{msg}"),
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_time_axis_is_a_parse_error() {
        let dir = tmpdir("tmono");
        let path = dir.join("t.csv");
        std::fs::write(&path, "t,ppg\n0.0,1.0\n0.0050,1.5\n0.0025,2.0\n").unwrap();
        std::fs::write(
            dir.join("t.json"),
            serde_json::to_string(&meta("t")).unwrap(),
        )
        .unwrap();
        assert!(matches!(load_recording(&path), Err(IoError::Parse { .. })));
    }

    #[test]
    fn single_column_uses_sidecar_fs() {
        let dir = tmpdir("onecol");
        let path = dir.join("one.csv");
        std::fs::write(&path, "1.0\n2.0\n3.0\n4.0\n").unwrap();
        let mut sc = serde_json::to_value(meta("one")).unwrap();
        sc["fs"] = serde_json::json!(200.0);
        std::fs::write(dir.join("one.json"), sc.to_string()).unwrap();
        let rec = load_recording(&path).unwrap();
        assert_eq!(rec.fs, 200.0);
        assert_eq!(rec.samples, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn feature_matrix_line_count_contract() {
        let dir = tmpdir("lines");
        let mut ds = Dataset::new(vec!["f0".into(), "f1".into(), "f2".into()]);
        for i in 0..2 {
            ds.rows.push(DatasetRow {
                subject_id: format!("s{i}"),
                values: vec![i as f64, 1.0, 2.0],
                label: 20.0 + i as f64,
            });
        }
        let path = dir.join("m.csv");
        save_feature_matrix(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3, "header + one line per row");
        assert_eq!(lines[0], "subject_id,f0,f1,f2,age_label");
    }

    #[test]
    fn feature_matrix_round_trip_is_bit_exact() {
        let dir = tmpdir("bitexact");
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let names: Vec<String> = (0..60).map(|i| format!("f{i}")).collect();
        let mut ds = Dataset::new(names);
        for i in 0..10 {
            ds.rows.push(DatasetRow {
                subject_id: format!("s{i}"),
                values: (0..60)
                    .map(|_| (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-12..12)))
                    .collect(),
                label: rng.gen_range(3.0..65.0),
            });
        }
        let path = dir.join("rt.csv");
        save_feature_matrix(&ds, &path).unwrap();
        let loaded = load_feature_matrix(&path).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn header_row_length_mismatch_is_a_schema_error() {
        let dir = tmpdir("mismatch");
        let path = dir.join("bad.csv");
        std::fs::write(&path, "subject_id,f0,f1,age_label\ns0,1.0,30.0\n").unwrap();
        assert!(matches!(
            load_feature_matrix(&path),
            Err(IoError::Schema { .. })
        ));
    }

    #[test]
    fn duplicate_feature_names_rejected() {
        let dir = tmpdir("dup");
        let ds = Dataset {
            feature_names: vec!["a".into(), "a".into()],
            rows: vec![],
        };
        assert!(matches!(
            save_feature_matrix(&ds, &dir.join("d.csv")),
            Err(IoError::Schema { .. })
        ));
    }
}
