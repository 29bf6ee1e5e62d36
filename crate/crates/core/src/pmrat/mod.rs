//! Progressive memory-replay adversarial training (PMR-AT).
//!
//! Training walks a fixed curriculum (normal, bias, noise, replacement,
//! replay). Every stage adds that stage's attacked copy of the clean training
//! windows to a cumulative pool. Within an attack stage each batch mixes clean
//! samples, their PGD perturbations at the scheduled budget and examples
//! replayed from a high-loss buffer. The loss adds an OHEM term weighted by
//! the stage's attack difficulty. Stage 1, every stage-2 network and the
//! fallback network are each attacked and optimised separately.
//!
//! The normal stage uses plain cross-entropy on clean data, so a curriculum
//! holding only that stage is ordinary supervised training.

mod buffer;
mod loss;
mod pgd;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use buffer::{replay_sample, ReplayBuffer, ReplayEntry};
pub use loss::{adaptive_lambda, epsilon_schedule, ohem_select, ohem_weights, total_loss};
pub use pgd::{default_step_size, pgd_attack};

use crate::attacks::{apply_to_dataset, AttackKind, AttackSpec};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::features::{fit_normalizer, FeatureConfig, FeatureExtractor, Normalizer};
use crate::label::ClassLabel;
use crate::model::{DenseNet, HierarchicalModel, ModelMode, Sgd};
use crate::sigsim::{derive_seed, Waveform};

pub const STAGE_NAMES: [&str; 5] = ["normal", "bias", "noise", "replacement", "replay"];

/// Largest probe subset used for the per-epoch metrics.
const PROBE_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumStage {
    /// Position in the canonical order, 0 (normal) to 4 (replay).
    pub index: usize,
    /// Attack template; `None` for the clean stage.
    pub attack: Option<AttackSpec>,
    pub epochs: usize,
}

impl CurriculumStage {
    pub fn normal(epochs: usize) -> Self {
        Self {
            index: 0,
            attack: None,
            epochs,
        }
    }

    pub fn attacked(kind: AttackKind, epochs: usize) -> Self {
        Self {
            index: stage_index(kind),
            attack: Some(AttackSpec::default_for(kind)),
            epochs,
        }
    }

    pub fn name(&self) -> &'static str {
        STAGE_NAMES[self.index]
    }

    pub fn difficulty(&self) -> f64 {
        self.attack.map_or(0.0, |a| a.difficulty)
    }

    /// The five stages in canonical order.
    pub fn standard(epochs: usize) -> Vec<Self> {
        std::iter::once(Self::normal(epochs))
            .chain(AttackKind::ALL.into_iter().map(|k| Self::attacked(k, epochs)))
            .collect()
    }

    pub fn parse(name: &str, epochs: usize) -> Result<Self> {
        match name.trim() {
            "normal" => Ok(Self::normal(epochs)),
            other => Ok(Self::attacked(other.parse()?, epochs)),
        }
    }
}

fn stage_index(kind: AttackKind) -> usize {
    match kind {
        AttackKind::Bias => 1,
        AttackKind::Noise => 2,
        AttackKind::Replacement => 3,
        AttackKind::Replay => 4,
    }
}

/// Parse a comma-separated stage list, keeping the canonical order.
pub fn parse_stages(list: &str, epochs: usize) -> Result<Vec<CurriculumStage>> {
    let mut stages = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| CurriculumStage::parse(s, epochs))
        .collect::<Result<Vec<_>>>()?;
    stages.sort_by_key(|s| s.index);
    stages.dedup_by_key(|s| s.index);
    if stages.is_empty() {
        return Err(Error::Config("empty stage list".into()));
    }
    Ok(stages)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stages: Vec<CurriculumStage>,
    pub pgd_steps: usize,
    /// Budget used when probing adversarial accuracy.
    pub pgd_eps: f64,
    /// `None` selects `2.5 * eps / steps`.
    pub pgd_step_size: Option<f64>,
    pub eps_start: f64,
    pub eps_end: f64,
    pub ohem_frac: f64,
    pub lambda_beta: f64,
    pub max_difficulty: f64,
    /// `false` forces the hard-example weight to zero.
    pub use_ohem: bool,
    /// `false` skips PGD inside attack stages.
    pub adversarial: bool,
    pub replay_frac: f64,
    pub buffer_capacity: usize,
    /// Fraction of each batch's adversarial examples offered to the buffer.
    pub buffer_insert_frac: f64,
    pub batch_size: usize,
    pub learn_rate: f64,
    /// Off by default: with 0.9 the hard-example weights stall training on
    /// the attacked pools at this learning rate.
    pub momentum: f64,
    pub hidden_dim: usize,
    pub gate_threshold: f64,
    /// Train and use only the flat all-class network.
    pub flat: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stages: CurriculumStage::standard(20),
            pgd_steps: 7,
            pgd_eps: 0.1,
            pgd_step_size: None,
            eps_start: 0.02,
            eps_end: 0.15,
            ohem_frac: 0.2,
            lambda_beta: 0.5,
            max_difficulty: 1.0,
            use_ohem: true,
            adversarial: true,
            replay_frac: 0.25,
            buffer_capacity: 512,
            buffer_insert_frac: 0.1,
            batch_size: 64,
            learn_rate: 0.01,
            momentum: 0.0,
            hidden_dim: crate::model::DEFAULT_HIDDEN,
            gate_threshold: crate::model::DEFAULT_GATE_THRESHOLD,
            flat: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Every stage gets `epochs` epochs.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.stages.iter_mut().for_each(|s| s.epochs = epochs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.stages.is_empty() {
            return bad("no curriculum stages".into());
        }
        if self.stages.windows(2).any(|w| w[0].index >= w[1].index) {
            return bad("stages must follow normal, bias, noise, replacement, replay".into());
        }
        if self.pgd_steps == 0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return bad("pgd_steps, batch_size and hidden_dim must be positive".into());
        }
        if !(self.eps_start > 0.0 && self.eps_start <= self.eps_end && self.pgd_eps > 0.0) {
            return bad(format!(
                "need 0 < eps_start <= eps_end and pgd_eps > 0, got {} / {} / {}",
                self.eps_start, self.eps_end, self.pgd_eps
            ));
        }
        if !(self.ohem_frac > 0.0 && self.ohem_frac <= 1.0) {
            return bad(format!("ohem_frac {} not in (0, 1]", self.ohem_frac));
        }
        if !(0.0..1.0).contains(&self.replay_frac) {
            return bad(format!("replay_frac {} not in [0, 1)", self.replay_frac));
        }
        if !(self.buffer_insert_frac > 0.0 && self.buffer_insert_frac <= 1.0) {
            return bad(format!("buffer_insert_frac {} not in (0, 1]", self.buffer_insert_frac));
        }
        if !(self.learn_rate > 0.0 && self.max_difficulty > 0.0 && self.lambda_beta >= 0.0) {
            return bad("learn_rate and max_difficulty must be positive".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} not in [0, 1)", self.momentum));
        }
        Ok(())
    }

    /// Keys: `stages`, `epochs_per_stage`, `pgd_steps`, `pgd_eps`,
    /// `pgd_step_size`, `eps_start`, `eps_end`, `ohem_frac`, `lambda_beta`,
    /// `use_ohem`, `adversarial`, `replay_frac`, `buffer_capacity`,
    /// `batch_size`, `learn_rate`, `momentum`, `hidden`, `gate_threshold`,
    /// `flat`, `seed`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        let mut epochs = 20usize;
        kv.read_into("epochs_per_stage", &mut epochs)?;
        cfg.stages = match kv.get("stages") {
            Some(list) => parse_stages(list, epochs)?,
            None => CurriculumStage::standard(epochs),
        };
        kv.read_into("pgd_steps", &mut cfg.pgd_steps)?;
        kv.read_into("pgd_eps", &mut cfg.pgd_eps)?;
        cfg.pgd_step_size = kv.parsed("pgd_step_size")?;
        kv.read_into("eps_start", &mut cfg.eps_start)?;
        kv.read_into("eps_end", &mut cfg.eps_end)?;
        kv.read_into("ohem_frac", &mut cfg.ohem_frac)?;
        kv.read_into("lambda_beta", &mut cfg.lambda_beta)?;
        kv.read_into("use_ohem", &mut cfg.use_ohem)?;
        kv.read_into("adversarial", &mut cfg.adversarial)?;
        kv.read_into("replay_frac", &mut cfg.replay_frac)?;
        kv.read_into("buffer_capacity", &mut cfg.buffer_capacity)?;
        kv.read_into("batch_size", &mut cfg.batch_size)?;
        kv.read_into("learn_rate", &mut cfg.learn_rate)?;
        kv.read_into("momentum", &mut cfg.momentum)?;
        kv.read_into("hidden", &mut cfg.hidden_dim)?;
        kv.read_into("gate_threshold", &mut cfg.gate_threshold)?;
        kv.read_into("flat", &mut cfg.flat)?;
        kv.read_into("seed", &mut cfg.seed)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn step_size(&self, eps: f64) -> f64 {
        self.pgd_step_size
            .unwrap_or_else(|| default_step_size(eps, self.pgd_steps))
    }
}

/// One normalised training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: ClassLabel,
    /// Curriculum stage index whose data produced it.
    pub stage: usize,
}

/// Cumulative stage pools stored as one stage-ordered list.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePools {
    samples: Vec<Sample>,
    /// `ends[k]` is the length of pool `k`.
    ends: Vec<usize>,
}

impl StagePools {
    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Training pool of the `k`-th configured stage: all data up to and
    /// including that stage.
    pub fn pool(&self, k: usize) -> &[Sample] {
        &self.samples[..self.ends[k]]
    }
}

/// Attack a fresh copy of the clean windows for every stage, turn them into
/// model inputs with the frozen clean normaliser, and accumulate.
pub fn build_stage_pools(
    windows: &[Waveform],
    stages: &[CurriculumStage],
    extractor: &FeatureExtractor,
    normalizer: &Normalizer,
    seed: u64,
) -> Result<StagePools> {
    let mut samples = Vec::with_capacity(windows.len() * stages.len());
    let mut ends = Vec::with_capacity(stages.len());
    for stage in stages {
        let attacked;
        let source = match stage.attack {
            None => windows,
            Some(spec) => {
                let spec = spec.with_seed(derive_seed(seed, 0xa77a_c000 + stage.index as u64));
                attacked = apply_to_dataset(windows, &spec)?;
                &attacked
            }
        };
        for w in source {
            samples.push(Sample {
                x: normalizer.model_input(&extractor.extract(w)?)?,
                label: w.label,
                stage: stage.index,
            });
        }
        ends.push(samples.len());
    }
    Ok(StagePools { samples, ends })
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub stage: &'static str,
    pub epoch: usize,
    pub epsilon: f64,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub buffer_size: usize,
    pub mean_loss: f64,
}

pub const METRICS_HEADER: &str = "stage,epoch,epsilon,clean_acc,adv_acc,buffer_size,mean_loss";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.stage, r.epoch, r.epsilon, r.clean_acc, r.adv_acc, r.buffer_size, r.mean_loss
        );
    }
    out
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    fs::write(path, metrics_csv(rows))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HierarchicalModel,
    /// Fitted on the clean training features; feed the model
    /// [`Normalizer::model_input`] vectors.
    pub normalizer: Normalizer,
    pub metrics: Vec<MetricsRow>,
    pub buffer: ReplayBuffer,
}

/// Which network a batch is trained for and how labels map to its classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Stage1,
    Stage2(usize),
    Fallback,
}

impl Role {
    /// Class index of `label` for this network, or `None` when the network
    /// does not see that label.
    fn target(self, label: ClassLabel) -> Option<usize> {
        match self {
            Role::Stage1 => Some(label.stage1_target()),
            Role::Stage2(i) => (label.inverter() == Some(i + 1)).then(|| label.switch().unwrap() - 1),
            Role::Fallback => Some(label.id()),
        }
    }
}

struct NetTrainer {
    role: Role,
    sgd: Sgd,
}

/// Per-batch settings shared by every network.
struct BatchPlan {
    eps: Option<f64>,
    lambda: f64,
}

struct BatchResult {
    loss: f64,
    count: usize,
    /// Adversarial inputs with their post-perturbation losses.
    adversarial: Vec<(Vec<f64>, ClassLabel, f64)>,
}

fn net_for(model: &mut HierarchicalModel, role: Role) -> &mut DenseNet {
    match role {
        Role::Stage1 => &mut model.stage1,
        Role::Stage2(i) => &mut model.stage2[i],
        Role::Fallback => &mut model.fallback,
    }
}

fn train_batch(
    net: &mut DenseNet,
    sgd: &mut Sgd,
    role: Role,
    fresh: &[&Sample],
    replayed: &[&ReplayEntry],
    plan: &BatchPlan,
    cfg: &TrainConfig,
) -> Result<Option<BatchResult>> {
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut targets = Vec::new();
    for s in fresh {
        if let Some(t) = role.target(s.label) {
            inputs.push(s.x.clone());
            labels.push(s.label);
            targets.push(t);
        }
    }
    if inputs.is_empty() {
        return Ok(None);
    }
    let n_clean = inputs.len();
    if let Some(eps) = plan.eps {
        for k in 0..n_clean {
            let adv = pgd_attack(net, &inputs[k], targets[k], eps, cfg.pgd_steps, cfg.step_size(eps))?;
            inputs.push(adv);
            labels.push(labels[k]);
            targets.push(targets[k]);
        }
    }
    let n_adv = inputs.len() - n_clean;
    for e in replayed {
        if let Some(t) = role.target(e.label) {
            inputs.push(e.features.clone());
            labels.push(e.label);
            targets.push(t);
        }
    }
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let per_sample = net.per_sample_loss(&refs, &targets)?;
    // Hard examples are ranked over the whole mixed batch after perturbation.
    let hard = if plan.lambda > 0.0 {
        ohem_select(&per_sample, cfg.ohem_frac)?
    } else {
        Vec::new()
    };
    let lg = total_loss(net, &refs, &targets, &hard, plan.lambda)?;
    sgd.step(net, &lg.params)?;

    let adversarial = (n_clean..n_clean + n_adv)
        .map(|i| (inputs[i].clone(), labels[i], per_sample[i]))
        .collect();
    Ok(Some(BatchResult {
        loss: lg.loss,
        count: refs.len(),
        adversarial,
    }))
}

/// Prefix a numerical failure with where in the curriculum it happened.
fn diverged(stage: &str, epoch: usize, place: &str, err: Error) -> Error {
    match err {
        Error::Training(msg) | Error::Domain(msg) if !msg.is_empty() => {
            Error::Training(format!("stage {stage}, epoch {epoch}, {place}: {msg}"))
        }
        other => other,
    }
}

/// Clean accuracy of the full model and PGD accuracy of its primary network
/// on an evenly spaced probe subset of `pool`.
fn probe_metrics(
    model: &HierarchicalModel,
    pool: &[Sample],
    primary: Role,
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let stride = pool.len().div_ceil(PROBE_LEN).max(1);
    let probe: Vec<&Sample> = pool.iter().step_by(stride).collect();
    let net = match primary {
        Role::Stage1 => &model.stage1,
        _ => &model.fallback,
    };
    let (mut clean, mut adv) = (0usize, 0usize);
    for s in &probe {
        if model.predict(&s.x)?.class_id == s.label.id() {
            clean += 1;
        }
        let t = primary.target(s.label).expect("primary net sees every label");
        let xa = pgd_attack(net, &s.x, t, cfg.pgd_eps, cfg.pgd_steps, cfg.step_size(cfg.pgd_eps))?;
        if net.predict(&xa)? == t {
            adv += 1;
        }
    }
    let n = probe.len().max(1) as f64;
    Ok((clean as f64 / n, adv as f64 / n))
}

/// Train `model` through the curriculum on clean training windows.
///
/// The clean features fit the normaliser, which then stays frozen for every
/// attacked pool. The model's input dimension must match `features`.
pub fn train_curriculum(
    mut model: HierarchicalModel,
    train: &[Waveform],
    features: &FeatureConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model.input_dim() != features.dim() {
        return Err(Error::Config(format!(
            "model expects {} features, extractor produces {}",
            model.input_dim(),
            features.dim()
        )));
    }
    let extractor = features.extractor()?;
    let clean = extractor.extract_all(train)?;
    let normalizer = fit_normalizer(&clean)?;
    let pools = build_stage_pools(train, &cfg.stages, &extractor, &normalizer, cfg.seed)?;

    model.mode = if cfg.flat {
        ModelMode::Flat
    } else {
        ModelMode::Hierarchical
    };
    let roles: Vec<Role> = if cfg.flat {
        vec![Role::Fallback]
    } else {
        std::iter::once(Role::Stage1)
            .chain((0..model.inverters()).map(Role::Stage2))
            .chain(std::iter::once(Role::Fallback))
            .collect()
    };
    let primary = roles[0];
    let mut trainers: Vec<NetTrainer> = roles
        .iter()
        .map(|&role| NetTrainer {
            role,
            sgd: Sgd::new(cfg.learn_rate, cfg.momentum, net_for(&mut model, role).params().len()),
        })
        .collect();

    let adversarial_epochs: usize = cfg
        .stages
        .iter()
        .filter(|s| s.attack.is_some())
        .map(|s| s.epochs)
        .sum();
    let mut adv_epoch = 0;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut metrics = Vec::new();

    for (k, stage) in cfg.stages.iter().enumerate() {
        let pool = pools.pool(k);
        let attacked = stage.attack.is_some();
        let lambda = if cfg.use_ohem {
            adaptive_lambda(stage.difficulty(), cfg.max_difficulty, cfg.lambda_beta)?
        } else {
            0.0
        };
        let n_replay = if attacked {
            (cfg.replay_frac * cfg.batch_size as f64).round() as usize
        } else {
            0
        };
        let n_fresh = (cfg.batch_size - n_replay).max(1);

        for epoch in 0..stage.epochs {
            let eps = if attacked {
                let e = epsilon_schedule(adv_epoch, adversarial_epochs, cfg.eps_start, cfg.eps_end)?;
                adv_epoch += 1;
                Some(e)
            } else {
                None
            };
            let plan = BatchPlan {
                eps: eps.filter(|_| cfg.adversarial),
                lambda,
            };
            let epoch_seed = derive_seed(cfg.seed, ((stage.index as u64) << 32) | epoch as u64);
            let mut order: Vec<&Sample> = pool.iter().collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));

            let (mut loss_sum, mut loss_count) = (0.0, 0usize);
            for (b, fresh) in order.chunks(n_fresh).enumerate() {
                let replayed = replay_sample(&buffer, n_replay, derive_seed(epoch_seed, b as u64));
                let mut offered = Vec::new();
                for t in trainers.iter_mut() {
                    let net = net_for(&mut model, t.role);
                    let res = train_batch(net, &mut t.sgd, t.role, fresh, &replayed, &plan, cfg)
                        .map_err(|e| diverged(stage.name(), epoch, &format!("batch {b}"), e))?;
                    let Some(res) = res else { continue };
                    if !res.loss.is_finite() {
                        return Err(Error::Training(format!(
                            "stage {}, epoch {epoch}, batch {b}: loss {}",
                            stage.name(),
                            res.loss
                        )));
                    }
                    loss_sum += res.loss * res.count as f64;
                    loss_count += res.count;
                    if t.role == primary {
                        offered = res.adversarial;
                    }
                }
                if !offered.is_empty() {
                    let losses: Vec<f64> = offered.iter().map(|o| o.2).collect();
                    for i in ohem_select(&losses, cfg.buffer_insert_frac)? {
                        let (x, label, loss) = offered[i].clone();
                        buffer.insert(ReplayEntry {
                            features: x,
                            label,
                            loss,
                            stage: stage.index,
                        });
                    }
                }
            }

            let (clean_acc, adv_acc) = probe_metrics(&model, pool, primary, cfg)
                .map_err(|e| diverged(stage.name(), epoch, "probe", e))?;
            metrics.push(MetricsRow {
                stage: stage.name(),
                epoch,
                epsilon: eps.unwrap_or(0.0),
                clean_acc,
                adv_acc,
                buffer_size: buffer.len(),
                mean_loss: loss_sum / loss_count.max(1) as f64,
            });
        }
    }
    Ok(TrainOutcome {
        model,
        normalizer,
        metrics,
        buffer,
    })
}
