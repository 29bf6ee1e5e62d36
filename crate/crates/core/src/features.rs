//! Dual fractional-order feature vectors.
//!
//! Each window yields six derivative series (Caputo and GL of V, P, Q), and
//! every series is summarised by five statistics. The layout is fixed:
//!
//! ```text
//! (CaputoV, CaputoP, CaputoQ, GLV, GLP, GLQ) x (mean, std, max|.|, rms, argmax/L)
//! ```
//!
//! giving 30 values (schema 1). The raw-signal ablation summarises V, P, Q
//! directly with the same statistics (schema 2, 15 values).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::fracdiff::{
    FractionalKernel, OperatorKind, DEFAULT_CAPUTO_ORDER, DEFAULT_GL_ORDER, DEFAULT_KERNEL_LEN,
};
use crate::sigsim::{Waveform, SAMPLE_RATE_HZ};

pub const NUM_STATS: usize = 5;
pub const SCHEMA_FRACTIONAL: u32 = 1;
pub const SCHEMA_RAW: u32 = 2;
pub const STD_FLOOR: f64 = 1e-9;

pub const STAT_NAMES: [&str; NUM_STATS] = ["mean", "std", "maxabs", "rms", "argmax"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub caputo_order: f64,
    pub gl_order: f64,
    pub kernel_len: usize,
    /// Sampling interval used as the derivative step, in seconds.
    pub step: f64,
    /// `false` selects the raw-statistics ablation layout.
    pub fractional: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            caputo_order: DEFAULT_CAPUTO_ORDER,
            gl_order: DEFAULT_GL_ORDER,
            kernel_len: DEFAULT_KERNEL_LEN,
            step: 1.0 / SAMPLE_RATE_HZ,
            fractional: true,
        }
    }
}

impl FeatureConfig {
    pub fn schema_id(&self) -> u32 {
        if self.fractional {
            SCHEMA_FRACTIONAL
        } else {
            SCHEMA_RAW
        }
    }

    pub fn dim(&self) -> usize {
        dim_for_schema(self.schema_id())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        kv.read_into("alpha", &mut cfg.caputo_order)?;
        kv.read_into("beta", &mut cfg.gl_order)?;
        kv.read_into("kernel_len", &mut cfg.kernel_len)?;
        kv.read_into("fractional_features", &mut cfg.fractional)?;
        Ok(cfg)
    }

    /// Inverse of [`FeatureConfig::from_key_values`].
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("alpha", self.caputo_order);
        kv.set("beta", self.gl_order);
        kv.set("kernel_len", self.kernel_len);
        kv.set("fractional_features", self.fractional);
        kv
    }

    /// Build the two kernels once, for extracting many windows.
    pub fn extractor(&self) -> Result<FeatureExtractor> {
        let caputo =
            FractionalKernel::new(OperatorKind::Caputo, self.caputo_order, self.kernel_len, self.step)?;
        let gl = FractionalKernel::new(OperatorKind::Gl, self.gl_order, self.kernel_len, self.step)?;
        Ok(FeatureExtractor {
            caputo,
            gl,
            fractional: self.fractional,
        })
    }
}

pub fn dim_for_schema(schema_id: u32) -> usize {
    match schema_id {
        SCHEMA_RAW => 3 * NUM_STATS,
        _ => 6 * NUM_STATS,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: u32,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    caputo: FractionalKernel,
    gl: FractionalKernel,
    fractional: bool,
}

impl FeatureExtractor {
    pub fn schema_id(&self) -> u32 {
        if self.fractional {
            SCHEMA_FRACTIONAL
        } else {
            SCHEMA_RAW
        }
    }

    pub fn extract(&self, w: &Waveform) -> Result<FeatureVector> {
        for ch in w.channels() {
            if ch.iter().any(|x| !x.is_finite()) {
                return Err(Error::data(format!(
                    "window {} contains non-finite samples",
                    w.window_id
                )));
            }
        }
        let mut values = Vec::with_capacity(dim_for_schema(self.schema_id()));
        if self.fractional {
            for ch in w.channels() {
                values.extend(series_stats(&self.caputo.apply(ch)?));
            }
            for ch in w.channels() {
                values.extend(series_stats(&self.gl.apply(ch)?));
            }
        } else {
            for ch in w.channels() {
                values.extend(series_stats(ch));
            }
        }
        Ok(FeatureVector {
            values,
            schema_id: self.schema_id(),
        })
    }

    pub fn extract_all(&self, windows: &[Waveform]) -> Result<Vec<FeatureVector>> {
        windows.iter().map(|w| self.extract(w)).collect()
    }
}

pub fn extract_features(w: &Waveform, config: &FeatureConfig) -> Result<FeatureVector> {
    config.extractor()?.extract(w)
}

/// mean, population std, max |x|, RMS, and the normalised position of the
/// first maximum of |x|.
pub fn series_stats(xs: &[f64]) -> [f64; NUM_STATS] {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut max_abs = 0.0;
    let mut argmax = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.abs() > max_abs {
            max_abs = x.abs();
            argmax = i;
        }
    }
    let rms = (xs.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    [mean, var.sqrt(), max_abs, rms, argmax as f64 / n]
}

/// Per-dimension standardisation fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub schema_id: u32,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_normalizer(features: &[FeatureVector]) -> Result<Normalizer> {
    if features.len() < 2 {
        return Err(Error::domain(format!(
            "normalizer needs at least 2 vectors, got {}",
            features.len()
        )));
    }
    let schema_id = features[0].schema_id;
    let dim = features[0].dim();
    if features.iter().any(|f| f.schema_id != schema_id || f.dim() != dim) {
        return Err(Error::domain("feature vectors with mixed schemas"));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        for (m, v) in mean.iter_mut().zip(&f.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in features {
        for ((s, v), m) in var.iter_mut().zip(&f.values).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    Ok(Normalizer {
        schema_id,
        mean,
        std,
    })
}

/// Bound of [`soft_clip`].
pub const CLIP_BOUND: f64 = 3.0;

/// `CLIP_BOUND * tanh(x / CLIP_BOUND)`: close to the identity near zero,
/// smooth and monotone, bounded by `CLIP_BOUND`. Attacked windows can sit
/// hundreds (or, on dimensions with a floored std, ~1e9) standard deviations
/// out, which destabilises SGD on the small stage-2 subsets.
pub fn soft_clip(x: f64) -> f64 {
    CLIP_BOUND * (x / CLIP_BOUND).tanh()
}

pub fn apply_normalizer(n: &Normalizer, f: &FeatureVector) -> Result<FeatureVector> {
    n.apply(f)
}

impl Normalizer {
    fn check(&self, f: &FeatureVector) -> Result<()> {
        if f.schema_id != self.schema_id || f.dim() != self.mean.len() {
            return Err(Error::domain(format!(
                "feature schema {} (dim {}) does not match normalizer schema {} (dim {})",
                f.schema_id,
                f.dim(),
                self.schema_id,
                self.mean.len()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, f: &FeatureVector) -> Result<FeatureVector> {
        self.check(f)?;
        let values = f
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        Ok(FeatureVector {
            values,
            schema_id: f.schema_id,
        })
    }

    pub fn invert(&self, f: &FeatureVector) -> Result<FeatureVector> {
        self.check(f)?;
        let values = f
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect();
        Ok(FeatureVector {
            values,
            schema_id: f.schema_id,
        })
    }

    pub fn apply_all(&self, fs: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
        fs.iter().map(|f| self.apply(f)).collect()
    }

    /// Classifier input: standardised values passed through [`soft_clip`].
    pub fn model_input(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        let mut values = self.apply(f)?.values;
        values.iter_mut().for_each(|v| *v = soft_clip(*v));
        Ok(values)
    }

    /// `schema_id <id>` followed by `dim,mean,std` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("schema_id {}\n", self.schema_id);
        for (d, (m, s)) in self.mean.iter().zip(&self.std).enumerate() {
            let _ = writeln!(out, "{d},{m:e},{s:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::data("empty normalizer file"))?;
        let schema_id = header
            .trim()
            .strip_prefix("schema_id")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("bad normalizer header {header:?}")))?;
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.trim().split(',').collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::data(format!("bad normalizer row {line:?}")))
            };
            if parts.len() != 3 || parts[0].parse::<usize>().ok() != Some(mean.len()) {
                return Err(Error::data(format!("bad normalizer row {line:?}")));
            }
            mean.push(parse(parts[1])?);
            std.push(parse(parts[2])?);
        }
        Ok(Self {
            schema_id,
            mean,
            std,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
