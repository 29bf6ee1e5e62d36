//! Deterministic cyber-attack injectors for (V, P, Q) windows.
//!
//! Attacks act on raw waveforms, before feature extraction, and never touch
//! the ground-truth label.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sigsim::{derive_seed, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    Bias,
    Noise,
    Replacement,
    Replay,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Bias,
        AttackKind::Noise,
        AttackKind::Replacement,
        AttackKind::Replay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Bias => "bias",
            AttackKind::Noise => "noise",
            AttackKind::Replacement => "replacement",
            AttackKind::Replay => "replay",
        }
    }

    /// Default difficulty score in `[0, 1]`.
    pub fn default_difficulty(self) -> f64 {
        match self {
            AttackKind::Bias => 0.3,
            AttackKind::Noise => 0.6,
            AttackKind::Replacement => 0.9,
            AttackKind::Replay => 0.8,
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(AttackKind::Bias),
            "noise" => Ok(AttackKind::Noise),
            "replacement" | "replace" => Ok(AttackKind::Replacement),
            "replay" => Ok(AttackKind::Replay),
            other => Err(Error::Config(format!("unknown attack kind {other:?}"))),
        }
    }
}

/// Value written over a replaced segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplacementMode {
    Zero,
    /// The last sample before the segment (or the first sample when the
    /// segment starts at 0).
    HoldFirst,
    Constant(f64),
}

impl FromStr for ReplacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(ReplacementMode::Zero),
            "hold-first" | "hold" => Ok(ReplacementMode::HoldFirst),
            other => other
                .parse::<f64>()
                .map(ReplacementMode::Constant)
                .map_err(|_| Error::Config(format!("bad replacement mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackParams {
    Bias {
        dv: f64,
        dp: f64,
        dq: f64,
    },
    Noise {
        sigma_rel: f64,
        start: usize,
        len: usize,
        /// Per-channel base scale (V, P, Q) the relative std refers to.
        scale: [f64; 3],
    },
    Replacement {
        mode: ReplacementMode,
        start: usize,
        len: usize,
    },
    Replay {
        source_start: usize,
        target_start: usize,
        len: usize,
    },
}

impl AttackParams {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackParams::Bias { .. } => AttackKind::Bias,
            AttackParams::Noise { .. } => AttackKind::Noise,
            AttackParams::Replacement { .. } => AttackKind::Replacement,
            AttackParams::Replay { .. } => AttackKind::Replay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub params: AttackParams,
    pub difficulty: f64,
    pub seed: u64,
}

impl AttackSpec {
    /// Default parameters for 400-sample windows at the default signal scale.
    pub fn default_for(kind: AttackKind) -> Self {
        let params = match kind {
            AttackKind::Bias => AttackParams::Bias {
                dv: 0.1,
                dp: 50.0,
                dq: 30.0,
            },
            AttackKind::Noise => AttackParams::Noise {
                sigma_rel: 0.05,
                start: 150,
                len: 200,
                scale: [311.0, 5000.0, 2000.0],
            },
            AttackKind::Replacement => AttackParams::Replacement {
                mode: ReplacementMode::Zero,
                start: 200,
                len: 100,
            },
            AttackKind::Replay => AttackParams::Replay {
                source_start: 0,
                target_start: 200,
                len: 100,
            },
        };
        Self {
            params,
            difficulty: kind.default_difficulty(),
            seed: 0,
        }
    }

    pub fn kind(&self) -> AttackKind {
        self.params.kind()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Rescale segment positions and lengths from windows of `from` samples
    /// to windows of `to` samples, e.g. to reuse the 400-sample defaults.
    pub fn rescaled(mut self, from: usize, to: usize) -> Self {
        let r = |i: usize| i * to / from;
        match &mut self.params {
            AttackParams::Bias { .. } => {}
            AttackParams::Noise { start, len, .. } | AttackParams::Replacement { start, len, .. } => {
                *start = r(*start);
                *len = r(*len);
            }
            AttackParams::Replay {
                source_start,
                target_start,
                len,
            } => {
                *source_start = r(*source_start);
                *target_start = r(*target_start);
                *len = r(*len);
            }
        }
        self
    }
}

fn check_segment(start: usize, len: usize, window: usize) -> Result<()> {
    if start.checked_add(len).is_some_and(|end| end <= window) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "segment [{start}, {start}+{len}) exceeds window of {window} samples"
        )))
    }
}

fn kind_mismatch(expected: AttackKind, spec: &AttackSpec) -> Error {
    Error::domain(format!("expected a {expected} attack, got {}", spec.kind()))
}

pub fn apply_bias(w: &Waveform, spec: &AttackSpec) -> Result<Waveform> {
    let AttackParams::Bias { dv, dp, dq } = spec.params else {
        return Err(kind_mismatch(AttackKind::Bias, spec));
    };
    let mut out = w.clone();
    for (channel, delta) in out.channels_mut().into_iter().zip([dv, dp, dq]) {
        channel.iter_mut().for_each(|x| *x += delta);
    }
    out.attack = Some(AttackKind::Bias);
    Ok(out)
}

pub fn apply_noise(w: &Waveform, spec: &AttackSpec) -> Result<Waveform> {
    let AttackParams::Noise {
        sigma_rel,
        start,
        len,
        scale,
    } = spec.params
    else {
        return Err(kind_mismatch(AttackKind::Noise, spec));
    };
    check_segment(start, len, w.len())?;
    if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
        return Err(Error::domain(format!("noise sigma {sigma_rel} must be non-negative")));
    }
    let mut out = w.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for (channel, s) in out.channels_mut().into_iter().zip(scale) {
        let std = sigma_rel * s;
        for x in &mut channel[start..start + len] {
            let z: f64 = rng.sample(StandardNormal);
            *x += std * z;
        }
    }
    out.attack = Some(AttackKind::Noise);
    Ok(out)
}

pub fn apply_replacement(w: &Waveform, spec: &AttackSpec) -> Result<Waveform> {
    let AttackParams::Replacement { mode, start, len } = spec.params else {
        return Err(kind_mismatch(AttackKind::Replacement, spec));
    };
    check_segment(start, len, w.len())?;
    let mut out = w.clone();
    for channel in out.channels_mut() {
        let value = match mode {
            ReplacementMode::Zero => 0.0,
            ReplacementMode::Constant(c) => c,
            ReplacementMode::HoldFirst => channel[start.saturating_sub(1)],
        };
        channel[start..start + len].iter_mut().for_each(|x| *x = value);
    }
    out.attack = Some(AttackKind::Replacement);
    Ok(out)
}

/// Copy a pre-fault segment over a later segment. The source must end at or
/// before the fault onset (window midpoint).
pub fn apply_replay(w: &Waveform, spec: &AttackSpec) -> Result<Waveform> {
    let AttackParams::Replay {
        source_start,
        target_start,
        len,
    } = spec.params
    else {
        return Err(kind_mismatch(AttackKind::Replay, spec));
    };
    let onset = w.len() / 2;
    if source_start + len > onset {
        return Err(Error::domain(format!(
            "replay source [{source_start}, {}) overlaps the post-fault region starting at {onset}",
            source_start + len
        )));
    }
    check_segment(target_start, len, w.len())?;
    let mut out = w.clone();
    for channel in out.channels_mut() {
        channel.copy_within(source_start..source_start + len, target_start);
    }
    out.attack = Some(AttackKind::Replay);
    Ok(out)
}

pub fn apply(w: &Waveform, spec: &AttackSpec) -> Result<Waveform> {
    match spec.kind() {
        AttackKind::Bias => apply_bias(w, spec),
        AttackKind::Noise => apply_noise(w, spec),
        AttackKind::Replacement => apply_replacement(w, spec),
        AttackKind::Replay => apply_replay(w, spec),
    }
}

/// Attack every window, deriving each window's noise seed from `spec.seed`
/// and its window id.
pub fn apply_to_dataset(windows: &[Waveform], spec: &AttackSpec) -> Result<Vec<Waveform>> {
    windows
        .iter()
        .map(|w| apply(w, &spec.with_seed(derive_seed(spec.seed, w.window_id as u64))))
        .collect()
}
