//! Parametric synthetic generator of single-sensor (V, P, Q) windows.
//!
//! The physical four-inverter plant is replaced by an additive signature
//! model. A normal window is a slowly drifting operating point with load
//! jitter, a small 100 Hz envelope ripple on V and white measurement noise.
//! A fault window is the same normal window with an (inverter, switch)
//! signature superimposed from the window midpoint on:
//!
//! * V: a ripple whose frequency and phase are set by the switch;
//! * P, Q: inverter-specific droop steps with a short settling transient,
//!   plus a weaker quadrature copy of the switch ripple.
//!
//! Load jitter and drift statistics are modelling choices of this crate, not
//! measured plant data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::attacks::AttackKind;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_INVERTERS, SWITCHES_PER_INVERTER};

pub const SAMPLE_RATE_HZ: f64 = 2000.0;
pub const GRID_FREQ_HZ: f64 = 50.0;
pub const DEFAULT_WINDOW_LEN: usize = 400;
/// Longest window the generator will produce (1 s at 2 kHz).
pub const MAX_WINDOW_LEN: usize = 2000;
pub const MIN_WINDOW_LEN: usize = 20;

/// Settling time constant of the droop steps, in seconds.
const DROOP_TAU_S: f64 = 0.004;
/// Amplitude of the P/Q ripple relative to the V ripple amplitude.
const POWER_RIPPLE_RATIO: f64 = 0.5;

/// Fault signature for one (inverter, switch) pair. All amplitudes are
/// relative to the channel base value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub ripple_freq_hz: f64,
    pub ripple_amp: f64,
    pub phase_rad: f64,
    pub p_droop: f64,
    pub q_droop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub base_voltage: f64,
    pub base_p: f64,
    pub base_q: f64,
    /// Relative std of the per-window operating point offset.
    pub load_jitter: f64,
    /// Relative std of white measurement noise.
    pub noise_floor: f64,
    pub window_len: usize,
    pub seed: u64,
    /// Indexed `[inverter - 1][switch - 1]`.
    pub signatures: [[Signature; SWITCHES_PER_INVERTER]; NUM_INVERTERS],
}

const DEFAULT_P_DROOP: [f64; NUM_INVERTERS] = [0.030, 0.045, 0.060, 0.075];
const DEFAULT_Q_DROOP: [f64; NUM_INVERTERS] = [0.040, -0.040, 0.060, -0.060];
/// Per-switch relative change of the P and Q droops within one inverter.
const SWITCH_P_DROOP_STEP: f64 = 0.12;
const SWITCH_Q_DROOP_STEP: f64 = -0.06;

fn default_signature(inverter: usize, switch: usize) -> Signature {
    let s = (switch - 1) as f64;
    let i = (inverter - 1) as f64;
    Signature {
        ripple_freq_hz: 125.0 + 25.0 * s,
        ripple_amp: 0.010 + 0.001 * i,
        phase_rad: s * PI / 3.0,
        p_droop: DEFAULT_P_DROOP[inverter - 1] * (1.0 + SWITCH_P_DROOP_STEP * s),
        q_droop: DEFAULT_Q_DROOP[inverter - 1] * (1.0 + SWITCH_Q_DROOP_STEP * s),
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let signatures =
            std::array::from_fn(|i| std::array::from_fn(|s| default_signature(i + 1, s + 1)));
        Self {
            base_voltage: 311.0,
            base_p: 5000.0,
            base_q: 2000.0,
            load_jitter: 0.01,
            noise_floor: 0.001,
            window_len: DEFAULT_WINDOW_LEN,
            seed: 0,
            signatures,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("base_voltage", self.base_voltage),
            ("base_p", self.base_p),
            ("base_q", self.base_q),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("load_jitter", self.load_jitter), ("noise_floor", self.noise_floor)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        check_window_len(self.window_len)?;
        let nyquist = SAMPLE_RATE_HZ / 2.0;
        for row in &self.signatures {
            for sig in row {
                if !(sig.ripple_freq_hz > 0.0 && sig.ripple_freq_hz < nyquist) {
                    return Err(Error::Config(format!(
                        "ripple frequency {} Hz outside (0, {nyquist})",
                        sig.ripple_freq_hz
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn signature(&self, inverter: usize, switch: usize) -> Result<&Signature> {
        ClassLabel::fault(inverter, switch)?;
        Ok(&self.signatures[inverter - 1][switch - 1])
    }

    /// Index of the first faulted sample.
    pub fn fault_onset(&self) -> usize {
        self.window_len / 2
    }

    /// Read overrides from a flat key/value file. Unknown keys are ignored
    /// so one file can hold scenario and training settings together.
    ///
    /// Signature overrides use keys like `sig.3.5.freq`, `sig.3.5.amp`,
    /// `sig.3.5.phase`, `sig.3.5.p_droop`, `sig.3.5.q_droop`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        kv.read_into("base_voltage", &mut cfg.base_voltage)?;
        kv.read_into("base_p", &mut cfg.base_p)?;
        kv.read_into("base_q", &mut cfg.base_q)?;
        kv.read_into("load_jitter", &mut cfg.load_jitter)?;
        kv.read_into("noise_floor", &mut cfg.noise_floor)?;
        kv.read_into("window_len", &mut cfg.window_len)?;
        kv.read_into("seed", &mut cfg.seed)?;
        for inv in 1..=NUM_INVERTERS {
            for sw in 1..=SWITCHES_PER_INVERTER {
                let sig = &mut cfg.signatures[inv - 1][sw - 1];
                let key = |field: &str| format!("sig.{inv}.{sw}.{field}");
                kv.read_into(&key("freq"), &mut sig.ripple_freq_hz)?;
                kv.read_into(&key("amp"), &mut sig.ripple_amp)?;
                kv.read_into(&key("phase"), &mut sig.phase_rad)?;
                kv.read_into(&key("p_droop"), &mut sig.p_droop)?;
                kv.read_into(&key("q_droop"), &mut sig.q_droop)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn check_window_len(len: usize) -> Result<()> {
    if (MIN_WINDOW_LEN..=MAX_WINDOW_LEN).contains(&len) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "window length {len} outside supported range [{MIN_WINDOW_LEN}, {MAX_WINDOW_LEN}]"
        )))
    }
}

/// One window of (V, P, Q) samples with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub window_id: usize,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub label: ClassLabel,
    pub attack: Option<AttackKind>,
    pub seed: u64,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.v, &self.p, &self.q]
    }

    pub fn channels_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.v, &mut self.p, &mut self.q]
    }

    pub fn attack_name(&self) -> &'static str {
        self.attack.map_or("none", AttackKind::name)
    }
}

/// Per-window RNG: a ChaCha8 stream selected by the window's seed, so each
/// window is independent of generation order.
fn window_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5157_5f53_494d);
    rng
}

/// SplitMix64 finaliser used to derive child seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn jitter(rng: &mut ChaCha8Rng, rel_std: f64) -> f64 {
    // Uniform with the requested std; bounded by sqrt(3) std.
    let half_width = 3f64.sqrt() * rel_std;
    if half_width == 0.0 {
        return 0.0;
    }
    Uniform::new_inclusive(-half_width, half_width)
        .expect("finite bounds")
        .sample(rng)
}

/// Normal operation window.
pub fn generate_normal(config: &ScenarioConfig, seed: u64) -> Result<Waveform> {
    config.validate()?;
    let n = config.window_len;
    let mut rng = window_rng(seed);
    let dt = 1.0 / SAMPLE_RATE_HZ;

    let offset_v = jitter(&mut rng, config.load_jitter);
    let offset_p = jitter(&mut rng, 2.0 * config.load_jitter);
    let offset_q = jitter(&mut rng, 2.0 * config.load_jitter);
    // Slow load/irradiance drift: one low-frequency component per window.
    let drift_freq = rng.random_range(0.5..3.0);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let drift_amp = 0.1 * config.load_jitter;
    let envelope_phase = rng.random_range(0.0..2.0 * PI);
    let envelope_amp = 0.001;

    let mut v = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let drift = drift_amp * (2.0 * PI * drift_freq * t + drift_phase).sin();
        let envelope = envelope_amp * (2.0 * PI * 2.0 * GRID_FREQ_HZ * t + envelope_phase).sin();
        let nv: f64 = rng.sample(StandardNormal);
        let np: f64 = rng.sample(StandardNormal);
        let nq: f64 = rng.sample(StandardNormal);
        v.push(config.base_voltage * (1.0 + offset_v + 0.5 * drift + envelope + config.noise_floor * nv));
        p.push(config.base_p * (1.0 + offset_p + drift + config.noise_floor * np));
        q.push(config.base_q * (1.0 + offset_q + drift + config.noise_floor * nq));
    }
    Ok(Waveform {
        window_id: 0,
        v,
        p,
        q,
        label: ClassLabel::NORMAL,
        attack: None,
        seed,
    })
}

/// Open-circuit fault of `switch` on `inverter`, onset at the window midpoint.
pub fn generate_fault(
    config: &ScenarioConfig,
    inverter: usize,
    switch: usize,
    seed: u64,
) -> Result<Waveform> {
    let label = ClassLabel::fault(inverter, switch)?;
    let sig = *config.signature(inverter, switch)?;
    let mut w = generate_normal(config, seed)?;
    w.label = label;
    let onset = config.fault_onset();
    let dt = 1.0 / SAMPLE_RATE_HZ;
    for k in onset..w.len() {
        let tau = (k - onset) as f64 * dt;
        let arg = 2.0 * PI * sig.ripple_freq_hz * tau + sig.phase_rad;
        let settle = 1.0 - (-tau / DROOP_TAU_S).exp();
        w.v[k] += config.base_voltage * sig.ripple_amp * arg.sin();
        w.p[k] += config.base_p
            * (-sig.p_droop * settle + POWER_RIPPLE_RATIO * sig.ripple_amp * arg.cos());
        w.q[k] += config.base_q
            * (sig.q_droop * settle + POWER_RIPPLE_RATIO * sig.ripple_amp * arg.cos());
    }
    Ok(w)
}

/// `n_normal` normal windows followed by `n_per_fault` windows of each fault
/// class in class-id order. Window `i` uses seed `derive_seed(seed, i)`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    n_normal: usize,
    n_per_fault: usize,
    seed: u64,
) -> Result<Vec<Waveform>> {
    config.validate()?;
    let mut out = Vec::with_capacity(n_normal + 24 * n_per_fault);
    for _ in 0..n_normal {
        let id = out.len();
        let mut w = generate_normal(config, derive_seed(seed, id as u64))?;
        w.window_id = id;
        out.push(w);
    }
    for label in ClassLabel::all().skip(1) {
        let (inv, sw) = (label.inverter().unwrap(), label.switch().unwrap());
        for _ in 0..n_per_fault {
            let id = out.len();
            let mut w = generate_fault(config, inv, sw, derive_seed(seed, id as u64))?;
            w.window_id = id;
            out.push(w);
        }
    }
    Ok(out)
}

/// Stratified split: within each class, the first `round(frac * n)` windows of
/// a seeded shuffle go to the first (training) part.
pub fn stratified_split(
    windows: &[Waveform],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<Waveform>, Vec<Waveform>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::domain(format!("train fraction {train_frac} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5_9117));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in ClassLabel::all() {
        let mut members: Vec<&Waveform> = windows.iter().filter(|w| w.label == label).collect();
        if members.is_empty() {
            continue;
        }
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        let n_train = ((train_frac * members.len() as f64).round() as usize).min(members.len());
        for (k, w) in members.into_iter().enumerate() {
            if k < n_train {
                train.push(w.clone());
            } else {
                test.push(w.clone());
            }
        }
    }
    train.sort_by_key(|w| w.window_id);
    test.sort_by_key(|w| w.window_id);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cfg = ScenarioConfig::default();
        let a = generate_normal(&cfg, 7).unwrap();
        let b = generate_normal(&cfg, 7).unwrap();
        let c = generate_normal(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.v, c.v);
        assert_eq!(a.len(), 400);
        assert!(a.label.is_normal());
    }

    #[test]
    fn normal_voltage_mean_is_near_base() {
        let cfg = ScenarioConfig::default();
        let bound = 3.0 * cfg.load_jitter * cfg.base_voltage;
        for seed in 0..100 {
            let w = generate_normal(&cfg, seed).unwrap();
            assert!((mean(&w.v) - cfg.base_voltage).abs() < bound, "seed {seed}");
        }
    }

    #[test]
    fn fault_prefix_matches_normal() {
        let cfg = ScenarioConfig::default();
        let n = generate_normal(&cfg, 42).unwrap();
        let f = generate_fault(&cfg, 2, 3, 42).unwrap();
        assert_eq!(&n.v[..200], &f.v[..200]);
        assert_eq!(&n.p[..200], &f.p[..200]);
        assert_eq!(&n.q[..200], &f.q[..200]);
        assert_ne!(&n.v[200..], &f.v[200..]);
        assert_eq!(f.label.id(), 9);
    }

    #[test]
    fn switches_differ_in_ripple_phase() {
        let cfg = ScenarioConfig::default();
        let a = generate_fault(&cfg, 1, 1, 3).unwrap();
        let b = generate_fault(&cfg, 1, 2, 3).unwrap();
        // First faulted sample carries sin(phase): 0 for S1, sin(pi/3) for S2.
        let base = generate_normal(&cfg, 3).unwrap();
        assert!((a.v[200] - base.v[200]).abs() < 1e-9);
        assert!((b.v[200] - base.v[200]).abs() > 1.0);
    }

    #[test]
    fn fault_power_drop_meets_droop() {
        let cfg = ScenarioConfig::default();
        for seed in 0..50 {
            let base = generate_normal(&cfg, seed).unwrap();
            for inv in 1..=4 {
                let f = generate_fault(&cfg, inv, 4, seed).unwrap();
                let sig = cfg.signature(inv, 4).unwrap();
                // Past three time constants the droop has settled to 95%.
                let settled = 200 + (3.0 * DROOP_TAU_S * SAMPLE_RATE_HZ).ceil() as usize;
                let floor = cfg.base_p * (0.95 * sig.p_droop - POWER_RIPPLE_RATIO * sig.ripple_amp);
                assert!(floor > 0.0);
                for k in settled..f.len() {
                    assert!((f.p[k] - base.p[k]).abs() >= floor - 1e-9);
                }
            }
        }
    }

    #[test]
    fn signatures_pairwise_distinct() {
        let cfg = ScenarioConfig::default();
        let all: Vec<Signature> = cfg.signatures.iter().flatten().copied().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn bad_fault_indices() {
        let cfg = ScenarioConfig::default();
        assert!(matches!(generate_fault(&cfg, 0, 1, 0), Err(Error::Domain(_))));
        assert!(matches!(generate_fault(&cfg, 1, 7, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn dataset_counts() {
        let cfg = ScenarioConfig::default();
        let d = generate_dataset(&cfg, 0, 1, 1).unwrap();
        assert_eq!(d.len(), 24);
        assert!(d.iter().enumerate().all(|(i, w)| w.label.id() == i + 1));
        let d = generate_dataset(&cfg, 1, 0, 1).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].label.is_normal());
    }

    #[test]
    fn paper_scale_histogram() {
        let cfg = ScenarioConfig::default();
        let d = generate_dataset(&cfg, 800, 200, 11).unwrap();
        assert_eq!(d.len(), 5600);
        let mut hist = [0usize; 25];
        for w in &d {
            hist[w.label.id()] += 1;
        }
        assert_eq!(hist[0], 800);
        assert!(hist[1..].iter().all(|&c| c == 200));
    }

    #[test]
    fn stratified_split_is_exact() {
        let cfg = ScenarioConfig::default();
        let d = generate_dataset(&cfg, 40, 10, 5).unwrap();
        let (train, test) = stratified_split(&d, 0.8, 5).unwrap();
        assert_eq!(train.len(), 32 + 24 * 8);
        assert_eq!(test.len(), 8 + 24 * 2);
        let (train2, _) = stratified_split(&d, 0.8, 5).unwrap();
        assert_eq!(train, train2);
    }

    #[test]
    fn window_len_is_configurable() {
        let cfg = ScenarioConfig {
            window_len: 600,
            ..Default::default()
        };
        let f = generate_fault(&cfg, 1, 1, 0).unwrap();
        assert_eq!(f.len(), 600);
        assert_eq!(cfg.fault_onset(), 300);
        let bad = ScenarioConfig {
            window_len: MAX_WINDOW_LEN + 1,
            ..Default::default()
        };
        assert!(generate_normal(&bad, 0).is_err());
    }
}
