//! Dense single-hidden-layer classifiers and the gated two-stage model.
//!
//! A [`DenseNet`] computes `softmax(W2 act(W1 x + b1) + b2)`. Parameters are
//! stored in one flat vector laid out as `[W1 (H x D, row-major), b1, W2 (C x
//! H, row-major), b2]` so optimisers and gradient checks can treat them
//! uniformly.
//!
//! The [`HierarchicalModel`] runs an inverter-level network first. A
//! confident "normal" stops there; a confident inverter routes to that
//! inverter's switch-level network; an unconfident stage-1 output falls back
//! to a flat network over all classes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_INVERTERS, SWITCHES_PER_INVERTER};
use crate::sigsim::derive_seed;

pub const MODEL_HEADER: &str = "FOMADS-MODEL v1";
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    input_dim: usize,
    hidden_dim: usize,
    classes: usize,
    activation: Activation,
    params: Vec<f64>,
}

/// Output of [`DenseNet::loss_and_grads`].
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub loss: f64,
    /// Unweighted cross-entropy of every sample.
    pub per_sample: Vec<f64>,
    /// Gradient of `loss` w.r.t. the flat parameter vector.
    pub params: Vec<f64>,
    /// Gradient of `loss` w.r.t. each input vector.
    pub inputs: Vec<Vec<f64>>,
}

pub fn param_count(input_dim: usize, hidden_dim: usize, classes: usize) -> usize {
    input_dim * hidden_dim + hidden_dim + hidden_dim * classes + classes
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl DenseNet {
    /// Uniform initialisation in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        classes: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut net = Self::zeros(input_dim, hidden_dim, classes, activation);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = 1.0 / (input_dim as f64).sqrt();
        let r2 = 1.0 / (hidden_dim as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = rng.random_range(-r1..r1);
        }
        for p in &mut net.params[w2] {
            *p = rng.random_range(-r2..r2);
        }
        net
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, classes: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            hidden_dim,
            classes,
            activation,
            params: vec![0.0; param_count(input_dim, hidden_dim, classes)],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.input_dim * self.hidden_dim
    }

    fn b1_offset(&self) -> usize {
        self.input_dim * self.hidden_dim
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let start = self.b1_offset() + self.hidden_dim;
        start..start + self.hidden_dim * self.classes
    }

    fn b2_offset(&self) -> usize {
        self.w2_range().end
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            Err(Error::domain(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim
            )))
        } else {
            Ok(())
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let (d, b1) = (self.input_dim, self.b1_offset());
        (0..self.hidden_dim)
            .map(|j| {
                let row = &self.params[j * d..(j + 1) * d];
                let z = self.params[b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                self.activation.apply(z)
            })
            .collect()
    }

    fn logits_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let (hd, w2, b2) = (self.hidden_dim, self.w2_range().start, self.b2_offset());
        (0..self.classes)
            .map(|c| {
                let row = &self.params[w2 + c * hd..w2 + (c + 1) * hd];
                self.params[b2 + c] + row.iter().zip(h).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.logits_from_hidden(&self.hidden(x)))
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Weighted mean cross-entropy `(1/n) sum_i w_i CE_i` with exact gradients
    /// w.r.t. parameters and every input.
    pub fn loss_and_grads(
        &self,
        inputs: &[&[f64]],
        targets: &[usize],
        weights: &[f64],
    ) -> Result<LossGrads> {
        let n = inputs.len();
        if targets.len() != n || weights.len() != n {
            return Err(Error::domain("batch inputs, targets and weights differ in length"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("sample weights must be finite and non-negative"));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= self.classes) {
            return Err(Error::domain(format!(
                "label {t} out of range for {} classes",
                self.classes
            )));
        }
        let (d, hd, c) = (self.input_dim, self.hidden_dim, self.classes);
        let (b1, w2, b2) = (self.b1_offset(), self.w2_range().start, self.b2_offset());
        let mut grads = vec![0.0; self.params.len()];
        let mut input_grads = Vec::with_capacity(n);
        let mut per_sample = Vec::with_capacity(n);
        let mut loss = 0.0;
        let inv_n = if n == 0 { 0.0 } else { 1.0 / n as f64 };

        for ((x, &t), &w) in inputs.iter().zip(targets).zip(weights) {
            self.check_input(x)?;
            let h = self.hidden(x);
            let mut p = self.logits_from_hidden(&h);
            softmax_in_place(&mut p);
            let ce = -p[t].max(f64::MIN_POSITIVE).ln();
            per_sample.push(ce);
            loss += w * ce * inv_n;

            let scale = w * inv_n;
            let mut dz2 = p;
            dz2[t] -= 1.0;
            dz2.iter_mut().for_each(|g| *g *= scale);

            let mut dh = vec![0.0; hd];
            for k in 0..c {
                let g = dz2[k];
                grads[b2 + k] += g;
                if g == 0.0 {
                    continue;
                }
                let row = w2 + k * hd;
                for j in 0..hd {
                    grads[row + j] += g * h[j];
                    dh[j] += g * self.params[row + j];
                }
            }
            let mut dx = vec![0.0; d];
            for j in 0..hd {
                let dz1 = dh[j] * self.activation.derivative(h[j]);
                grads[b1 + j] += dz1;
                if dz1 == 0.0 {
                    continue;
                }
                let row = j * d;
                for i in 0..d {
                    grads[row + i] += dz1 * x[i];
                    dx[i] += dz1 * self.params[row + i];
                }
            }
            input_grads.push(dx);
        }
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss {loss}")));
        }
        Ok(LossGrads {
            loss,
            per_sample,
            params: grads,
            inputs: input_grads,
        })
    }

    /// Cross-entropy of one sample and its gradient w.r.t. the input only.
    pub fn loss_and_input_grad(&self, x: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        if target >= self.classes {
            return Err(Error::domain(format!(
                "label {target} out of range for {} classes",
                self.classes
            )));
        }
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let w2 = self.w2_range().start;
        let h = self.hidden(x);
        let mut p = self.logits_from_hidden(&h);
        softmax_in_place(&mut p);
        let ce = -p[target].max(f64::MIN_POSITIVE).ln();
        p[target] -= 1.0;
        let mut dx = vec![0.0; d];
        for j in 0..hd {
            let dh: f64 = (0..self.classes).map(|k| p[k] * self.params[w2 + k * hd + j]).sum();
            let dz1 = dh * self.activation.derivative(h[j]);
            if dz1 == 0.0 {
                continue;
            }
            let row = &self.params[j * d..(j + 1) * d];
            for (g, w) in dx.iter_mut().zip(row) {
                *g += dz1 * w;
            }
        }
        Ok((ce, dx))
    }

    /// Unweighted per-sample cross-entropy without gradients.
    pub fn per_sample_loss(&self, inputs: &[&[f64]], targets: &[usize]) -> Result<Vec<f64>> {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, &t)| {
                let p = self.forward(x)?;
                p.get(t)
                    .map(|pt| -pt.max(f64::MIN_POSITIVE).ln())
                    .ok_or_else(|| Error::domain(format!("label {t} out of range")))
            })
            .collect()
    }

    pub fn apply_gradient(&mut self, grads: &[f64], learn_rate: f64) {
        for (p, g) in self.params.iter_mut().zip(grads) {
            *p -= learn_rate * g;
        }
    }

    fn write_block(&self, name: &str, out: &mut String) {
        let _ = writeln!(
            out,
            "net {name} {} {} {} {}",
            self.input_dim,
            self.hidden_dim,
            self.classes,
            self.activation.name()
        );
        for chunk in self.params.chunks(8) {
            let line: Vec<String> = chunk.iter().map(|p| format!("{p:.16e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
}

/// One plain gradient-descent step on a weighted batch.
pub fn train_step(
    net: &mut DenseNet,
    inputs: &[&[f64]],
    targets: &[usize],
    weights: &[f64],
    learn_rate: f64,
) -> Result<f64> {
    if !(learn_rate >= 0.0 && learn_rate.is_finite()) {
        return Err(Error::domain(format!("learn rate {learn_rate} must be non-negative")));
    }
    let lg = net.loss_and_grads(inputs, targets, weights)?;
    if lg.params.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training("non-finite parameter gradient".into()));
    }
    net.apply_gradient(&lg.params, learn_rate);
    Ok(lg.loss)
}

/// SGD with optional classical momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learn_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(learn_rate: f64, momentum: f64, n_params: usize) -> Self {
        Self {
            learn_rate,
            momentum,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &[f64]) -> Result<()> {
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training("non-finite parameter gradient".into()));
        }
        for ((p, v), g) in net.params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = self.momentum * *v + g;
            *p -= self.learn_rate * *v;
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training("parameters became non-finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Hierarchical,
    /// Only the flat all-class network is used.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Stage 1 confidently predicted normal.
    Normal,
    /// Routed to the switch-level network of this 1-based inverter.
    Stage2(usize),
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class_id: usize,
    pub confidence: f64,
    pub route: Route,
}

#[derive(Debug)]
pub struct HierarchicalModel {
    pub stage1: DenseNet,
    pub stage2: Vec<DenseNet>,
    pub fallback: DenseNet,
    pub gate_threshold: f64,
    pub mode: ModelMode,
    stage2_calls: AtomicU64,
}

impl Clone for HierarchicalModel {
    fn clone(&self) -> Self {
        Self {
            stage1: self.stage1.clone(),
            stage2: self.stage2.clone(),
            fallback: self.fallback.clone(),
            gate_threshold: self.gate_threshold,
            mode: self.mode,
            stage2_calls: AtomicU64::new(0),
        }
    }
}

impl PartialEq for HierarchicalModel {
    fn eq(&self, other: &Self) -> bool {
        self.stage1 == other.stage1
            && self.stage2 == other.stage2
            && self.fallback == other.fallback
            && self.gate_threshold == other.gate_threshold
            && self.mode == other.mode
    }
}

impl HierarchicalModel {
    /// Four inverters with six switches each.
    pub fn new(input_dim: usize, hidden_dim: usize, gate_threshold: f64, seed: u64) -> Self {
        Self::with_inverters(NUM_INVERTERS, input_dim, hidden_dim, gate_threshold, seed)
    }

    pub fn with_inverters(
        inverters: usize,
        input_dim: usize,
        hidden_dim: usize,
        gate_threshold: f64,
        seed: u64,
    ) -> Self {
        let act = Activation::Tanh;
        let stage1 = DenseNet::new(input_dim, hidden_dim, inverters + 1, act, derive_seed(seed, 1));
        let stage2 = (0..inverters)
            .map(|i| {
                DenseNet::new(
                    input_dim,
                    hidden_dim,
                    SWITCHES_PER_INVERTER,
                    act,
                    derive_seed(seed, 100 + i as u64),
                )
            })
            .collect();
        let fallback = DenseNet::new(
            input_dim,
            hidden_dim,
            1 + inverters * SWITCHES_PER_INVERTER,
            act,
            derive_seed(seed, 2),
        );
        Self::from_parts(stage1, stage2, fallback, gate_threshold, ModelMode::Hierarchical)
    }

    pub fn from_parts(
        stage1: DenseNet,
        stage2: Vec<DenseNet>,
        fallback: DenseNet,
        gate_threshold: f64,
        mode: ModelMode,
    ) -> Self {
        Self {
            stage1,
            stage2,
            fallback,
            gate_threshold,
            mode,
            stage2_calls: AtomicU64::new(0),
        }
    }

    pub fn inverters(&self) -> usize {
        self.stage2.len()
    }

    pub fn input_dim(&self) -> usize {
        self.stage1.input_dim()
    }

    /// Number of switch-level forward passes since construction or the last
    /// [`reset_stage2_calls`](Self::reset_stage2_calls).
    pub fn stage2_calls(&self) -> u64 {
        self.stage2_calls.load(Ordering::Relaxed)
    }

    pub fn reset_stage2_calls(&self) {
        self.stage2_calls.store(0, Ordering::Relaxed);
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.mode == ModelMode::Flat {
            return self.predict_fallback(x);
        }
        let p1 = self.stage1.forward(x)?;
        let inv = argmax(&p1);
        let conf1 = p1[inv];
        if conf1 < self.gate_threshold {
            return self.predict_fallback(x);
        }
        if inv == 0 {
            return Ok(Prediction {
                class_id: 0,
                confidence: conf1,
                route: Route::Normal,
            });
        }
        self.stage2_calls.fetch_add(1, Ordering::Relaxed);
        let p2 = self.stage2[inv - 1].forward(x)?;
        let sw = argmax(&p2);
        Ok(Prediction {
            class_id: (inv - 1) * SWITCHES_PER_INVERTER + sw + 1,
            confidence: conf1 * p2[sw],
            route: Route::Stage2(inv),
        })
    }

    fn predict_fallback(&self, x: &[f64]) -> Result<Prediction> {
        let p = self.fallback.forward(x)?;
        let k = argmax(&p);
        Ok(Prediction {
            class_id: k,
            confidence: p[k],
            route: Route::Fallback,
        })
    }

    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            ModelMode::Hierarchical => "hierarchical",
            ModelMode::Flat => "flat",
        };
        let mut out = format!("{MODEL_HEADER}\n");
        let _ = writeln!(
            out,
            "meta mode {mode} gate_threshold {:.16e} inverters {}",
            self.gate_threshold,
            self.inverters()
        );
        self.stage1.write_block("stage1", &mut out);
        for (i, net) in self.stage2.iter().enumerate() {
            net.write_block(&format!("stage2.{}", i + 1), &mut out);
        }
        self.fallback.write_block("fallback", &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::data(format!("model file: {msg}"));
        let mut tokens = Tokens(text.split_whitespace().rev().collect());
        if tokens.next()? != "FOMADS-MODEL" || tokens.next()? != "v1" {
            return Err(bad("missing FOMADS-MODEL v1 header"));
        }
        tokens.expect("meta")?;
        tokens.expect("mode")?;
        let mode = match tokens.next()? {
            "hierarchical" => ModelMode::Hierarchical,
            "flat" => ModelMode::Flat,
            other => return Err(bad(&format!("unknown mode {other:?}"))),
        };
        tokens.expect("gate_threshold")?;
        let gate_threshold: f64 = tokens.parse()?;
        tokens.expect("inverters")?;
        let inverters: usize = tokens.parse()?;

        let stage1 = tokens.net("stage1")?;
        let stage2 = (1..=inverters)
            .map(|i| tokens.net(&format!("stage2.{i}")))
            .collect::<Result<Vec<_>>>()?;
        let fallback = tokens.net("fallback")?;
        if tokens.0.pop().is_some() {
            return Err(bad("trailing data"));
        }
        Ok(Self::from_parts(stage1, stage2, fallback, gate_threshold, mode))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Reversed token stack for the model file reader.
struct Tokens<'a>(Vec<&'a str>);

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.0.pop().ok_or_else(|| Error::data("model file: truncated"))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.next()? {
            t if t == word => Ok(()),
            t => Err(Error::data(format!("model file: expected {word:?}, found {t:?}"))),
        }
    }

    fn parse<T: FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse()
            .map_err(|_| Error::data(format!("model file: bad number {t:?}")))
    }

    fn net(&mut self, name: &str) -> Result<DenseNet> {
        self.expect("net")?;
        self.expect(name)?;
        let (d, h, c): (usize, usize, usize) = (self.parse()?, self.parse()?, self.parse()?);
        let act: Activation = self.next()?.parse()?;
        let mut net = DenseNet::zeros(d, h, c, act);
        for p in net.params.iter_mut() {
            *p = self.parse()?;
        }
        Ok(net)
    }
}

/// Label-level prediction for the standard four-inverter model.
pub fn predict_hierarchical(m: &HierarchicalModel, x: &[f64]) -> Result<(ClassLabel, f64)> {
    let p = m.predict(x)?;
    Ok((ClassLabel::from_id(p.class_id)?, p.confidence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = DenseNet::zeros(4, 3, 5, Activation::Tanh);
        let p = net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert_eq!(net.params().len(), 4 * 3 + 3 + 3 * 5 + 5);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = vec![0.3, -1.2, 2.0];
        let mut b: Vec<f64> = a.iter().map(|v| v + 7.5).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..10 {
            let net = DenseNet::new(6, 8, 4, Activation::Tanh, s);
            let p = net.forward(&random_input(&mut rng, 6)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn zero_weights_zero_loss() {
        let net = DenseNet::new(3, 4, 2, Activation::Tanh, 0);
        let x = [0.1, 0.2, 0.3];
        let lg = net.loss_and_grads(&[&x, &x], &[0, 1], &[0.0, 0.0]).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.params.iter().all(|&g| g == 0.0));
        assert!(lg.inputs.iter().flatten().all(|&g| g == 0.0));
        assert!(net.loss_and_grads(&[&x], &[2], &[1.0]).is_err());
    }

    #[test]
    fn confident_prediction_has_near_zero_loss() {
        let mut net = DenseNet::zeros(2, 2, 3, Activation::Tanh);
        let b2 = net.b2_offset();
        net.params_mut()[b2 + 1] = 60.0;
        let x = [0.5, -0.5];
        let lg = net.loss_and_grads(&[&x], &[1], &[1.0]).unwrap();
        assert!(lg.loss < 1e-20);
        assert!(lg.params.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn learn_rate_zero_keeps_params() {
        let mut net = DenseNet::new(3, 4, 2, Activation::Tanh, 3);
        let before = net.clone();
        let x = [0.1, 0.2, 0.3];
        train_step(&mut net, &[&x], &[1], &[1.0], 0.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn overfits_one_sample() {
        let mut net = DenseNet::new(5, 16, 6, Activation::Tanh, 9);
        let x = [0.3, -0.7, 1.1, 0.0, 0.4];
        for _ in 0..200 {
            train_step(&mut net, &[&x], &[4], &[1.0], 0.1).unwrap();
        }
        assert_eq!(net.predict(&x).unwrap(), 4);
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..16).map(|_| random_input(&mut rng, 7)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ys: Vec<usize> = (0..16).map(|i| i % 3).collect();
        let w = vec![1.0; 16];
        let mut net = DenseNet::new(7, 10, 3, Activation::Tanh, 4);
        let before = net.loss_and_grads(&refs, &ys, &w).unwrap().loss;
        train_step(&mut net, &refs, &ys, &w, 1e-4).unwrap();
        let after = net.loss_and_grads(&refs, &ys, &w).unwrap().loss;
        assert!(after <= before);
    }

    #[test]
    fn momentum_sgd_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<Vec<f64>> = (0..32).map(|_| random_input(&mut rng, 4)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ys: Vec<usize> = xs.iter().map(|x| usize::from(x[0] > 0.0)).collect();
        let w = vec![1.0; 32];
        let mut net = DenseNet::new(4, 8, 2, Activation::Tanh, 0);
        let mut opt = Sgd::new(0.1, 0.9, net.params().len());
        let first = net.loss_and_grads(&refs, &ys, &w).unwrap().loss;
        for _ in 0..100 {
            let g = net.loss_and_grads(&refs, &ys, &w).unwrap();
            opt.step(&mut net, &g.params).unwrap();
        }
        assert!(net.loss_and_grads(&refs, &ys, &w).unwrap().loss < 0.5 * first);
    }

    fn one_hot_net(input_dim: usize, classes: usize, class: usize) -> DenseNet {
        let mut net = DenseNet::zeros(input_dim, 2, classes, Activation::Tanh);
        let b2 = net.b2_offset();
        net.params_mut()[b2 + class] = 800.0;
        net
    }

    #[test]
    fn confident_normal_skips_stage2() {
        let stage2 = (0..4).map(|_| one_hot_net(3, 6, 0)).collect();
        let m = HierarchicalModel::from_parts(
            one_hot_net(3, 5, 0),
            stage2,
            one_hot_net(3, 25, 7),
            0.6,
            ModelMode::Hierarchical,
        );
        let (label, conf) = predict_hierarchical(&m, &[0.1, 0.2, 0.3]).unwrap();
        assert!(label.is_normal());
        assert_eq!(conf, 1.0);
        assert_eq!(m.stage2_calls(), 0);
    }

    #[test]
    fn low_confidence_takes_fallback() {
        let mut stage1 = DenseNet::zeros(3, 2, 5, Activation::Tanh);
        let b2 = stage1.b2_offset();
        for (k, p) in [0.1f64, 0.5, 0.2, 0.1, 0.1].iter().enumerate() {
            stage1.params_mut()[b2 + k] = p.ln();
        }
        let stage2 = (0..4).map(|_| one_hot_net(3, 6, 0)).collect();
        let m = HierarchicalModel::from_parts(
            stage1,
            stage2,
            one_hot_net(3, 25, 7),
            0.6,
            ModelMode::Hierarchical,
        );
        let p = m.predict(&[0.0; 3]).unwrap();
        assert_eq!(p.route, Route::Fallback);
        assert_eq!(p.class_id, 7);
        assert_eq!(m.stage2_calls(), 0);
    }

    #[test]
    fn routes_to_inverter_three_switch_five() {
        let stage2 = (0..4).map(|i| one_hot_net(3, 6, if i == 2 { 4 } else { 0 })).collect();
        let m = HierarchicalModel::from_parts(
            one_hot_net(3, 5, 3),
            stage2,
            one_hot_net(3, 25, 0),
            0.6,
            ModelMode::Hierarchical,
        );
        let (label, conf) = predict_hierarchical(&m, &[0.0; 3]).unwrap();
        assert_eq!(label.id(), 17);
        assert_eq!(label.to_string(), "Inv 3, Switch S5");
        assert!((conf - 1.0).abs() < 1e-12);
        assert_eq!(m.stage2_calls(), 1);
    }

    #[test]
    fn adding_an_inverter_keeps_existing_shapes() {
        let four = HierarchicalModel::new(30, 16, 0.6, 1);
        let five = HierarchicalModel::with_inverters(5, 30, 16, 0.6, 1);
        assert_eq!(five.stage1.classes(), four.stage1.classes() + 1);
        assert_eq!(five.inverters(), 5);
        for (a, b) in four.stage2.iter().zip(&five.stage2) {
            assert_eq!(a.params().len(), b.params().len());
        }
        assert_eq!(five.fallback.classes(), 31);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = HierarchicalModel::new(7, 5, 0.55, 42);
        let text = m.to_text();
        assert!(text.starts_with("FOMADS-MODEL v1\n"));
        let back = HierarchicalModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert!(HierarchicalModel::from_text("FOMADS-MODEL v2\n").is_err());
        assert!(HierarchicalModel::from_text(&text[..text.len() / 2]).is_err());
    }
}
