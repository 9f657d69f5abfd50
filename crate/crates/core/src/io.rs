//! Diagnostics CSV, field snapshots and binary checkpoints.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::base::MetricPreset;
use crate::diagnostics::{DiagnosticsRecord, MonitorState, INTEGER_FIELDS};
use crate::error::{FlowError, Result};
use crate::grid::ChartGrid;

// ---- CSV ------------------------------------------------------------------

pub fn csv_header() -> String {
    DiagnosticsRecord::FIELDS.join(",")
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    DiagnosticsRecord::FIELDS
        .iter()
        .zip(r.values())
        .map(|(name, v)| {
            if INTEGER_FIELDS.contains(name) && v.fract() == 0.0 && v.abs() < 9e15 && !v.is_sign_negative() {
                format!("{}", v as i64)
            } else {
                format!("{v:.16e}")
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut text = csv_header();
    text.push('\n');
    for r in records {
        text.push_str(&csv_row(r));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| FlowError::io(path, e))
}

/// Append rows, writing the header first when the file is new or empty.
pub fn append_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| FlowError::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(&csv_header());
        text.push('\n');
    }
    for r in records {
        text.push_str(&csv_row(r));
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| FlowError::io(path, e))
}

pub fn parse_csv(path: &Path, text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| FlowError::format(path, "empty diagnostics file"))?;
    if header.trim() != csv_header() {
        return Err(FlowError::format(path, "diagnostics header does not match this schema version"));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| FlowError::format(path, format!("row {}: {e}", k + 2)))?;
        let rec = DiagnosticsRecord::from_values(&vals)
            .ok_or_else(|| FlowError::format(path, format!("row {} has {} columns", k + 2, vals.len())))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(FlowError::format(path, "diagnostics file has no data rows"));
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| FlowError::io(path, e))?;
    parse_csv(path, &text)
}

// ---- snapshots ----------------------------------------------------------

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub dims: Vec<usize>,
    pub preset: String,
    pub field: String,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "WFSNAP {SNAPSHOT_VERSION}\nt {:.16e}\nn {}\ndims {}\npreset {}\nfield {}\n",
            self.t,
            self.dims.len(),
            self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "),
            self.preset,
            self.field
        );
        for v in &self.values {
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let bad = |m: &str| FlowError::format(path, m.to_string());
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated snapshot header"))?;
            line.strip_prefix(key).map(|r| r.trim().to_string()).ok_or_else(|| bad(&format!("expected `{key}` line")))
        };
        let version: u32 = header("WFSNAP")?.parse().map_err(|_| bad("bad snapshot version"))?;
        if version != SNAPSHOT_VERSION {
            return Err(bad(&format!("snapshot version {version}, this build reads version {SNAPSHOT_VERSION}")));
        }
        let t: f64 = header("t")?.parse().map_err(|_| bad("bad time"))?;
        let n: usize = header("n")?.parse().map_err(|_| bad("bad dimension"))?;
        let dims: Vec<usize> = header("dims")?
            .split_whitespace()
            .map(|d| d.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad dims"))?;
        if dims.len() != n {
            return Err(bad("dims do not match n"));
        }
        let preset = header("preset")?;
        let field = header("field")?;
        let values: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad value"))?;
        if values.len() != dims.iter().product::<usize>() {
            return Err(bad(&format!("expected {} values, found {}", dims.iter().product::<usize>(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value"));
        }
        Ok(Snapshot { t, dims, preset, field, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::format(path, "refusing to write non-finite snapshot"));
        }
        fs::write(path, self.to_text()).map_err(|e| FlowError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FlowError::io(path, e))?;
        Self::parse(path, &text)
    }
}

// ---- checkpoints --------------------------------------------------------

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"WFLW";
pub const CHECKPOINT_VERSION: u32 = 1;
const MONITOR_MAGIC: &[u8; 4] = b"MONS";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub grid_hash: u64,
    pub t: f64,
    pub step: u64,
    pub phi: Vec<f64>,
    /// Index of the diagnostics sample the checkpoint was taken at.
    pub sample: u64,
    pub monitor: MonitorState,
}

/// Hash identifying the preset, its parameters and the grid.
pub fn grid_hash(preset: &MetricPreset, grid: &ChartGrid) -> u64 {
    let params = match preset {
        MetricPreset::PerturbedSphere { epsilon, mode } => format!("eps={:016x};l={mode}", epsilon.to_bits()),
        _ => String::new(),
    };
    let text = format!("{};{};{}", preset.name(), params, grid.canonical());
    let digest = Sha256::digest(text.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + 8 * self.phi.len());
        b.extend_from_slice(CHECKPOINT_MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        b.extend_from_slice(&self.grid_hash.to_le_bytes());
        b.extend_from_slice(&self.t.to_le_bytes());
        b.extend_from_slice(&self.step.to_le_bytes());
        b.extend_from_slice(&(self.phi.len() as u64).to_le_bytes());
        for v in &self.phi {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(MONITOR_MAGIC);
        b.extend_from_slice(&self.sample.to_le_bytes());
        b.extend_from_slice(&self.monitor.mu_min.to_le_bytes());
        b.extend_from_slice(&self.monitor.f_sup.to_le_bytes());
        b
    }

    pub fn from_bytes(path: &Path, b: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            let s = b.get(pos..pos + k).ok_or_else(|| FlowError::format(path, "truncated checkpoint"))?;
            pos += k;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(FlowError::format(path, "not a checkpoint (bad magic bytes)"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(FlowError::format(
                path,
                format!("checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"),
            ));
        }
        let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap());
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let grid_hash = u64_at(take(8)?);
        let t = f64_at(take(8)?);
        let step = u64_at(take(8)?);
        let count = u64_at(take(8)?) as usize;
        let mut phi = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            phi.push(f64_at(take(8)?));
        }
        if take(4)? != MONITOR_MAGIC {
            return Err(FlowError::format(path, "checkpoint monitor block missing"));
        }
        let sample = u64_at(take(8)?);
        let mu_min = f64_at(take(8)?);
        let f_sup = f64_at(take(8)?);
        Ok(Checkpoint { grid_hash, t, step, phi, sample, monitor: MonitorState { mu_min, f_sup } })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| FlowError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let b = fs::read(path).map_err(|e| FlowError::io(path, e))?;
        Self::from_bytes(path, &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            grid_hash: 42,
            t: 0.125,
            step: 9,
            phi: vec![0.1, -0.2, 1e-300],
            sample: 3,
            monitor: MonitorState { mu_min: 0.5, f_sup: 2.0 },
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(Path::new("x"), &c.to_bytes()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn corrupt_magic_and_version_skew() {
        let mut b = sample().to_bytes();
        b[0] = b'X';
        let e = Checkpoint::from_bytes(Path::new("x"), &b).unwrap_err().to_string();
        assert!(e.contains("magic"), "{e}");
        let mut b = sample().to_bytes();
        b[4..8].copy_from_slice(&7u32.to_le_bytes());
        let e = Checkpoint::from_bytes(Path::new("x"), &b).unwrap_err().to_string();
        assert!(e.contains("version 7") && e.contains("version 1"), "{e}");
        let b = sample().to_bytes();
        assert!(Checkpoint::from_bytes(Path::new("x"), &b[..b.len() - 3]).is_err());
    }

    #[test]
    fn grid_hash_distinguishes_resolution_and_parameters() {
        let s = MetricPreset::RoundSphere;
        let a = grid_hash(&s, &s.grid(&[16, 32]).unwrap());
        let b = grid_hash(&s, &s.grid(&[16, 34]).unwrap());
        assert_ne!(a, b);
        let p = MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 2 };
        let q = MetricPreset::PerturbedSphere { epsilon: 0.2, mode: 2 };
        assert_ne!(grid_hash(&p, &p.grid(&[16, 32]).unwrap()), grid_hash(&q, &q.grid(&[16, 32]).unwrap()));
    }

    #[test]
    fn empty_csv_rejected() {
        assert!(parse_csv(Path::new("x"), "").is_err());
        assert!(parse_csv(Path::new("x"), &csv_header()).is_err());
        assert!(parse_csv(Path::new("x"), "t,step\n1,2\n").is_err());
    }
}
