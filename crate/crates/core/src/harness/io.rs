//! CSV files for waveforms and feature vectors.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every sample bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::attacks::AttackKind;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::ClassLabel;
use crate::sigsim::Waveform;

pub const DATASET_HEADER: &str = "window_id,sample_idx,V,P,Q,class_id,attack_kind";

fn attack_from_name(name: &str) -> Result<Option<AttackKind>> {
    match name {
        "none" => Ok(None),
        other => other
            .parse()
            .map(Some)
            .map_err(|_| Error::data(format!("unknown attack kind {other:?}"))),
    }
}

pub fn dataset_csv(windows: &[Waveform]) -> String {
    let rows: usize = windows.iter().map(Waveform::len).sum();
    let mut out = String::with_capacity(48 * rows + 64);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for w in windows {
        let (class_id, attack) = (w.label.id(), w.attack_name());
        for k in 0..w.len() {
            let _ = writeln!(
                out,
                "{},{k},{},{},{},{class_id},{attack}",
                w.window_id, w.v[k], w.p[k], w.q[k]
            );
        }
    }
    out
}

pub fn write_dataset(path: &Path, windows: &[Waveform]) -> Result<()> {
    fs::write(path, dataset_csv(windows))?;
    Ok(())
}

/// Parse a dataset file. Rows of one window must be contiguous and in
/// sample order. Seeds are not stored and read back as 0.
pub fn parse_dataset(text: &str) -> Result<Vec<Waveform>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DATASET_HEADER => {}
        _ => return Err(Error::data(format!("dataset must start with `{DATASET_HEADER}`"))),
    }
    let mut out: Vec<Waveform> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::data(format!("dataset line {}: {what}: {line:?}", lineno + 1));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let window_id: usize = f[0].parse().map_err(|_| bad("bad window_id"))?;
        let sample_idx: usize = f[1].parse().map_err(|_| bad("bad sample_idx"))?;
        let mut vpq = [0.0; 3];
        for (slot, s) in vpq.iter_mut().zip(&f[2..5]) {
            *slot = s.parse().map_err(|_| bad("bad sample value"))?;
        }
        let class_id: usize = f[5].parse().map_err(|_| bad("bad class_id"))?;
        let label = ClassLabel::from_id(class_id).map_err(|_| bad("class_id out of range"))?;
        let attack = attack_from_name(f[6]).map_err(|_| bad("bad attack_kind"))?;

        let start_new = out.last().is_none_or(|w| w.window_id != window_id);
        if start_new {
            if sample_idx != 0 {
                return Err(bad("window does not start at sample 0"));
            }
            out.push(Waveform {
                window_id,
                v: Vec::new(),
                p: Vec::new(),
                q: Vec::new(),
                label,
                attack,
                seed: 0,
            });
        }
        let w = out.last_mut().expect("window pushed above");
        if sample_idx != w.len() || w.label != label || w.attack != attack {
            return Err(bad("rows out of order or inconsistent within a window"));
        }
        w.v.push(vpq[0]);
        w.p.push(vpq[1]);
        w.q.push(vpq[2]);
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Waveform>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// One feature row: `window_id,f_0,...,f_{D-1},class_id,attack_kind`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub window_id: usize,
    pub features: FeatureVector,
    pub label: ClassLabel,
    pub attack: Option<AttackKind>,
}

pub fn features_csv(rows: &[FeatureRow]) -> String {
    let dim = rows.first().map_or(0, |r| r.features.dim());
    let mut out = String::from("window_id");
    for d in 0..dim {
        let _ = write!(out, ",f_{d}");
    }
    out.push_str(",class_id,attack_kind\n");
    for r in rows {
        let _ = write!(out, "{}", r.window_id);
        for v in &r.features.values {
            let _ = write!(out, ",{v}");
        }
        let attack = r.attack.map_or("none", AttackKind::name);
        let _ = writeln!(out, ",{},{attack}", r.label.id());
    }
    out
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    fs::write(path, features_csv(rows))?;
    Ok(())
}

/// Parse a feature file; every row gets `schema_id`.
pub fn parse_features(text: &str, schema_id: u32) -> Result<Vec<FeatureRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::data("empty feature file"))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let dim = cols.len().saturating_sub(3);
    if cols.len() < 3 || cols[0] != "window_id" || cols[cols.len() - 2..] != ["class_id", "attack_kind"] {
        return Err(Error::data(format!("bad feature header {header:?}")));
    }
    lines
        .map(|line| {
            let bad = |what: &str| Error::data(format!("feature row {line:?}: {what}"));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != dim + 3 {
                return Err(bad("wrong field count"));
            }
            let values = f[1..=dim]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<Vec<_>>>()?;
            let class_id: usize = f[dim + 1].parse().map_err(|_| bad("bad class_id"))?;
            Ok(FeatureRow {
                window_id: f[0].parse().map_err(|_| bad("bad window_id"))?,
                features: FeatureVector { values, schema_id },
                label: ClassLabel::from_id(class_id).map_err(|_| bad("class_id out of range"))?,
                attack: attack_from_name(f[dim + 2])?,
            })
        })
        .collect()
}

pub fn read_features(path: &Path, schema_id: u32) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    parse_features(&text, schema_id)
}
