//! End-to-end runs: dataset generation, training, evaluation under every
//! attack condition, ablations and the (alpha, L) sensitivity sweep.

mod io;
mod report;

pub use io::{
    dataset_csv, features_csv, parse_dataset, parse_features, read_dataset, read_features,
    write_dataset, write_features, FeatureRow, DATASET_HEADER,
};
pub use report::{ConditionReport, EvalReport, SwitchConvention, CONDITIONS, REPORT_HEADER};

use std::fmt::Write as _;

use crate::attacks::{apply_to_dataset, AttackKind, AttackSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, Normalizer};
use crate::label::ClassLabel;
use crate::model::HierarchicalModel;
use crate::pmrat::{parse_stages, train_curriculum, TrainConfig, TrainOutcome};
use crate::sigsim::{
    check_window_len, derive_seed, generate_dataset, stratified_split, ScenarioConfig, Waveform,
    DEFAULT_WINDOW_LEN,
};

/// Window length the default attack segments are defined for.
const REFERENCE_LEN: usize = DEFAULT_WINDOW_LEN;

/// Default attack of `kind`, with segments scaled to `window_len`.
pub fn attack_for_window(kind: AttackKind, window_len: usize, seed: u64) -> AttackSpec {
    AttackSpec::default_for(kind)
        .rescaled(REFERENCE_LEN, window_len)
        .with_seed(seed)
}

/// The clean set followed by one attacked copy per attack kind, in report
/// order.
pub fn attacked_conditions(windows: &[Waveform], seed: u64) -> Result<Vec<(&'static str, Vec<Waveform>)>> {
    let len = windows.first().map_or(REFERENCE_LEN, Waveform::len);
    let mut out = vec![(CONDITIONS[0], windows.to_vec())];
    for (i, kind) in AttackKind::ALL.into_iter().enumerate() {
        let spec = attack_for_window(kind, len, derive_seed(seed, i as u64));
        out.push((kind.name(), apply_to_dataset(windows, &spec)?));
    }
    Ok(out)
}

/// Trained model plus everything needed to turn a window into its input.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub model: HierarchicalModel,
    pub normalizer: Normalizer,
    pub extractor: FeatureExtractor,
}

impl Classifier {
    pub fn new(model: HierarchicalModel, normalizer: Normalizer, features: &FeatureConfig) -> Result<Self> {
        if normalizer.schema_id != features.schema_id() || model.input_dim() != features.dim() {
            return Err(Error::Config(format!(
                "model/normalizer (dim {}, schema {}) do not match feature schema {}",
                model.input_dim(),
                normalizer.schema_id,
                features.schema_id()
            )));
        }
        Ok(Self {
            model,
            normalizer,
            extractor: features.extractor()?,
        })
    }

    pub fn classify(&self, w: &Waveform) -> Result<ClassLabel> {
        let x = self.normalizer.model_input(&self.extractor.extract(w)?)?;
        ClassLabel::from_id(self.model.predict(&x)?.class_id)
    }

    pub fn evaluate_condition(
        &self,
        name: &str,
        windows: &[Waveform],
        convention: SwitchConvention,
    ) -> Result<ConditionReport> {
        let mut report = ConditionReport::new(name, convention);
        for w in windows {
            report.record(w.label, self.classify(w)?);
        }
        Ok(report)
    }

    /// Evaluate on `test` and on its attacked copies.
    pub fn evaluate(&self, test: &[Waveform], attack_seed: u64, convention: SwitchConvention) -> Result<EvalReport> {
        let conditions = attacked_conditions(test, attack_seed)?
            .iter()
            .map(|(name, windows)| self.evaluate_condition(name, windows, convention))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport { conditions })
    }
}

/// Table-I style ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    /// Flat 25-class network only.
    Flat,
    /// No hard-example term.
    NoOhem,
    /// Raw-signal statistics instead of fractional features.
    NoFracFeatures,
    /// Clean training only, for as many epochs as the full curriculum.
    NormalOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Full,
        Ablation::Flat,
        Ablation::NoOhem,
        Ablation::NoFracFeatures,
        Ablation::NormalOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::Flat => "flat",
            Ablation::NoOhem => "no-ohem",
            Ablation::NoFracFeatures => "no-frac-features",
            Ablation::NormalOnly => "normal-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub n_normal: usize,
    pub n_per_fault: usize,
    pub train_frac: f64,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub switch_convention: SwitchConvention,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            n_normal: 800,
            n_per_fault: 200,
            train_frac: 0.8,
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            switch_convention: SwitchConvention::RoutedOnly,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// 800 normal and 50 windows per fault class (2000 windows).
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            n_per_fault: 50,
            seed,
            ..Self::default()
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::Full => {}
            Ablation::Flat => self.train.flat = true,
            Ablation::NoOhem => self.train.use_ohem = false,
            Ablation::NoFracFeatures => self.features.fractional = false,
            Ablation::NormalOnly => {
                // Same epoch budget as the whole curriculum.
                let epochs = self.train.stages.iter().map(|s| s.epochs).sum();
                self.train.stages = parse_stages("normal", epochs).expect("static stage list");
            }
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub classifier: Classifier,
    pub training: TrainOutcome,
    pub report: EvalReport,
}

/// Generate, split 80/20 by class, train through the curriculum and evaluate
/// on the held-out split under every condition. Every random choice derives
/// from `cfg.seed`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let data = generate_dataset(&cfg.scenario, cfg.n_normal, cfg.n_per_fault, cfg.seed)?;
    let (train, test) = stratified_split(&data, cfg.train_frac, derive_seed(cfg.seed, 1))?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, 2),
        ..cfg.train.clone()
    };
    let model = HierarchicalModel::new(
        cfg.features.dim(),
        train_cfg.hidden_dim,
        train_cfg.gate_threshold,
        derive_seed(cfg.seed, 3),
    );
    let training = train_curriculum(model, &train, &cfg.features, &train_cfg)?;
    let classifier = Classifier::new(training.model.clone(), training.normalizer.clone(), &cfg.features)?;
    let report = classifier.evaluate(&test, derive_seed(cfg.seed, 4), cfg.switch_convention)?;
    Ok(PipelineRun {
        classifier,
        training,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub window_lens: Vec<usize>,
    /// Epochs of clean training per cell.
    pub epochs: usize,
    pub scenario: ScenarioConfig,
    pub n_normal: usize,
    pub n_per_fault: usize,
    pub train_frac: f64,
    pub features: FeatureConfig,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    /// alpha 0.1..=1.0 in steps of 0.1, L 100..=600 in steps of 100, on the
    /// default 5600-window set.
    fn default() -> Self {
        Self {
            alphas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            window_lens: (1..=6).map(|i| 100 * i).collect(),
            epochs: 10,
            scenario: ScenarioConfig::default(),
            n_normal: 800,
            n_per_fault: 200,
            train_frac: 0.8,
            features: FeatureConfig::default(),
            hidden_dim: crate::model::DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub alpha: f64,
    pub window_len: usize,
    pub val_acc: f64,
}

/// Validation accuracy of a clean-trained hierarchical model for every
/// (alpha, L) pair. Each L gets a freshly generated dataset; cells share
/// seeds so they differ only in alpha and L.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    for &len in &cfg.window_lens {
        check_window_len(len)?;
    }
    if cfg.alphas.is_empty() || cfg.window_lens.is_empty() {
        return Err(Error::domain("sweep grid is empty"));
    }
    let train_cfg = TrainConfig {
        stages: parse_stages("normal", cfg.epochs)?,
        hidden_dim: cfg.hidden_dim,
        seed: derive_seed(cfg.seed, 2),
        ..TrainConfig::default()
    };
    let mut cells = Vec::with_capacity(cfg.alphas.len() * cfg.window_lens.len());
    for &alpha in &cfg.alphas {
        for &len in &cfg.window_lens {
            let scenario = ScenarioConfig {
                window_len: len,
                ..cfg.scenario.clone()
            };
            let data = generate_dataset(&scenario, cfg.n_normal, cfg.n_per_fault, cfg.seed)?;
            let (train, val) = stratified_split(&data, cfg.train_frac, derive_seed(cfg.seed, 1))?;
            let features = FeatureConfig {
                caputo_order: alpha,
                ..cfg.features.clone()
            };
            let model =
                HierarchicalModel::new(features.dim(), cfg.hidden_dim, train_cfg.gate_threshold, derive_seed(cfg.seed, 3));
            let out = train_curriculum(model, &train, &features, &train_cfg)?;
            let classifier = Classifier::new(out.model, out.normalizer, &features)?;
            let report = classifier.evaluate_condition("normal", &val, SwitchConvention::RoutedOnly)?;
            cells.push(SweepCell {
                alpha,
                window_len: len,
                val_acc: report.overall_accuracy(),
            });
        }
    }
    Ok(cells)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("alpha,L,val_acc\n");
    for c in cells {
        let _ = writeln!(out, "{},{},{}", c.alpha, c.window_len, c.val_acc);
    }
    out
}

/// Highest-accuracy cell; the first one wins ties.
pub fn best_cell(cells: &[SweepCell]) -> Option<SweepCell> {
    cells
        .iter()
        .copied()
        .reduce(|best, c| if c.val_acc > best.val_acc { c } else { best })
}

/// Competition rank (1 = best) of the cell at (alpha, L).
pub fn cell_rank(cells: &[SweepCell], alpha: f64, window_len: usize) -> Option<usize> {
    let cell = cells
        .iter()
        .find(|c| (c.alpha - alpha).abs() < 1e-9 && c.window_len == window_len)?;
    Some(1 + cells.iter().filter(|c| c.val_acc > cell.val_acc).count())
}
