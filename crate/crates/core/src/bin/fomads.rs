//! Command-line driver. Every subcommand reads and writes the crate's CSV and
//! key/value text formats; see the library docs for the layouts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fomads::attacks::{apply_to_dataset, AttackKind, AttackParams, AttackSpec, ReplacementMode};
use fomads::config::KeyValues;
use fomads::features::{FeatureConfig, Normalizer};
use fomads::harness::{
    attacked_conditions, best_cell, read_dataset, sweep, sweep_csv, write_dataset, write_features,
    Classifier, EvalReport, FeatureRow, SweepConfig, SwitchConvention,
};
use fomads::model::HierarchicalModel;
use fomads::pmrat::{parse_stages, train_curriculum, write_metrics, TrainConfig};
use fomads::sigsim::{derive_seed, generate_dataset, stratified_split, ScenarioConfig};
use fomads::{Error, Result};

#[derive(Parser)]
#[command(name = "fomads", version, about = "Single-sensor microgrid fault and attack diagnosis")]
struct Cli {
    /// Global seed; subcommands derive their own streams from it.
    #[arg(long, global = true, env = "FOMADS_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled waveform dataset.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 800)]
        n_normal: usize,
        #[arg(long, default_value_t = 200)]
        n_per_fault: usize,
        /// Scenario overrides (`key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Apply one attack to every window of a dataset.
    Attack(AttackArgs),
    /// Extract feature vectors from a dataset.
    Extract {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_frac_features: bool,
    },
    /// Train through the curriculum on a stratified split of a dataset.
    Train(TrainArgs),
    /// Evaluate a trained model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// One dataset per condition; the condition is read from its
        /// attack_kind column.
        #[arg(long, required = true, num_args = 1..)]
        dataset: Vec<PathBuf>,
        /// Also evaluate attacked copies of every clean dataset.
        #[arg(long)]
        all_attacks: bool,
        /// Count every fault sample in switch accuracy, not only correctly
        /// routed ones.
        #[arg(long)]
        switch_all: bool,
        /// Report CSV (the table goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Validation accuracy over an (alpha, L) grid.
    Sweep {
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.1:1.0:0.1")]
        alphas: String,
        #[arg(long, default_value = "100:600:100")]
        lengths: String,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 800)]
        n_normal: usize,
        #[arg(long, default_value_t = 200)]
        n_per_fault: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    attack: AttackKind,
    #[arg(long)]
    out: PathBuf,
    /// Bias offsets in V, W and var.
    #[arg(long)]
    dv: Option<f64>,
    #[arg(long)]
    dp: Option<f64>,
    #[arg(long)]
    dq: Option<f64>,
    /// Noise std relative to the channel scale.
    #[arg(long)]
    sigma_rel: Option<f64>,
    /// Segment start and length (noise, replacement, replay target).
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    /// Replacement value: `zero`, `hold-first` or a number.
    #[arg(long)]
    mode: Option<ReplacementMode>,
    #[arg(long)]
    source_start: Option<usize>,
    #[arg(long)]
    difficulty: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Feature and training overrides (`key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated curriculum stages.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    no_ohem: bool,
    #[arg(long)]
    no_frac_features: bool,
    #[arg(long)]
    flat: bool,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Model file; the normaliser and feature settings are written next to
    /// it as `<out>.norm` and `<out>.features`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Where to write the held-out split.
    #[arg(long)]
    holdout: Option<PathBuf>,
}

fn sidecar(model: &Path, ext: &str) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(format!(".{ext}"));
    PathBuf::from(name)
}

fn load_kv(path: Option<&PathBuf>) -> Result<KeyValues> {
    path.map_or_else(|| Ok(KeyValues::default()), |p| KeyValues::load(p))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn parse_grid<T: std::str::FromStr + Copy>(spec: &str, to_f: fn(T) -> f64, from_f: fn(f64) -> T) -> Result<Vec<T>> {
    let bad = || Error::Config(format!("bad grid {spec:?}"));
    let parse = |s: &str| s.trim().parse::<T>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (to_f(parse(start)?), to_f(parse(stop)?), to_f(parse(step)?));
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| from_f(start + i as f64 * step)).collect())
        }
        [_] => spec.split(',').map(parse).collect(),
        _ => Err(bad()),
    }
}

fn attack_spec(a: &AttackArgs, seed: u64) -> AttackSpec {
    let mut spec = AttackSpec::default_for(a.attack).with_seed(seed);
    match &mut spec.params {
        AttackParams::Bias { dv, dp, dq } => {
            *dv = a.dv.unwrap_or(*dv);
            *dp = a.dp.unwrap_or(*dp);
            *dq = a.dq.unwrap_or(*dq);
        }
        AttackParams::Noise { sigma_rel, start, len, .. } => {
            *sigma_rel = a.sigma_rel.unwrap_or(*sigma_rel);
            *start = a.start.unwrap_or(*start);
            *len = a.len.unwrap_or(*len);
        }
        AttackParams::Replacement { mode, start, len } => {
            *mode = a.mode.unwrap_or(*mode);
            *start = a.start.unwrap_or(*start);
            *len = a.len.unwrap_or(*len);
        }
        AttackParams::Replay {
            source_start,
            target_start,
            len,
        } => {
            *source_start = a.source_start.unwrap_or(*source_start);
            *target_start = a.start.unwrap_or(*target_start);
            *len = a.len.unwrap_or(*len);
        }
    }
    if let Some(d) = a.difficulty {
        spec.difficulty = d;
    }
    spec
}

fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let kv = load_kv(a.config.as_ref())?;
    let mut features = FeatureConfig::from_key_values(&kv)?;
    let mut cfg = TrainConfig::from_key_values(&kv)?;
    let epochs = a.epochs.unwrap_or(cfg.stages[0].epochs);
    if let Some(list) = &a.stages {
        cfg.stages = parse_stages(list, epochs)?;
    }
    cfg = cfg.with_epochs(epochs);
    cfg.use_ohem &= !a.no_ohem;
    cfg.flat |= a.flat;
    features.fractional &= !a.no_frac_features;
    if kv.get("seed").is_none() {
        cfg.seed = derive_seed(seed, 2);
    }

    let data = read_dataset(&a.dataset)?;
    let (train_set, holdout) = stratified_split(&data, a.train_frac, derive_seed(seed, 1))?;
    let model = HierarchicalModel::new(features.dim(), cfg.hidden_dim, cfg.gate_threshold, derive_seed(seed, 3));
    let out = train_curriculum(model, &train_set, &features, &cfg)?;
    out.model.save(&a.out)?;
    out.normalizer.save(&sidecar(&a.out, "norm"))?;
    write_text(&sidecar(&a.out, "features"), &features.to_key_values().to_text())?;
    if let Some(path) = &a.metrics {
        write_metrics(path, &out.metrics)?;
    }
    if let Some(path) = &a.holdout {
        write_dataset(path, &holdout)?;
    }
    eprintln!(
        "trained on {} windows ({} held out), {} epochs",
        train_set.len(),
        holdout.len(),
        out.metrics.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate {
            out,
            n_normal,
            n_per_fault,
            config,
        } => {
            let scenario = ScenarioConfig::from_key_values(&load_kv(config.as_ref())?)?;
            write_dataset(&out, &generate_dataset(&scenario, n_normal, n_per_fault, seed)?)
        }
        Command::Attack(a) => {
            let data = read_dataset(&a.dataset)?;
            write_dataset(&a.out, &apply_to_dataset(&data, &attack_spec(&a, seed))?)
        }
        Command::Extract {
            dataset,
            out,
            config,
            no_frac_features,
        } => {
            let mut features = FeatureConfig::from_key_values(&load_kv(config.as_ref())?)?;
            features.fractional &= !no_frac_features;
            let extractor = features.extractor()?;
            let rows = read_dataset(&dataset)?
                .iter()
                .map(|w| {
                    Ok(FeatureRow {
                        window_id: w.window_id,
                        features: extractor.extract(w)?,
                        label: w.label,
                        attack: w.attack,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_features(&out, &rows)
        }
        Command::Train(a) => train(&a, seed),
        Command::Eval {
            model,
            dataset,
            all_attacks,
            switch_all,
            out,
            confusion,
        } => {
            let features = FeatureConfig::from_key_values(&KeyValues::load(&sidecar(&model, "features"))?)?;
            let classifier = Classifier::new(
                HierarchicalModel::load(&model)?,
                Normalizer::load(&sidecar(&model, "norm"))?,
                &features,
            )?;
            let convention = if switch_all {
                SwitchConvention::AllFaults
            } else {
                SwitchConvention::RoutedOnly
            };
            let mut conditions = Vec::new();
            for path in &dataset {
                let windows = read_dataset(path)?;
                let name = windows.first().map_or("normal", |w| w.attack.map_or("normal", AttackKind::name));
                if all_attacks && name == "normal" {
                    for (cond, set) in attacked_conditions(&windows, derive_seed(seed, 4))? {
                        conditions.push(classifier.evaluate_condition(cond, &set, convention)?);
                    }
                } else {
                    conditions.push(classifier.evaluate_condition(name, &windows, convention)?);
                }
            }
            let report = EvalReport { conditions };
            print!("{}", report.to_table());
            match &out {
                Some(path) => write_text(path, &report.to_csv())?,
                None => print!("{}", report.to_csv()),
            }
            if let Some(path) = &confusion {
                write_text(path, &report.confusion_csv())?;
            }
            Ok(())
        }
        Command::Sweep {
            alphas,
            lengths,
            epochs,
            n_normal,
            n_per_fault,
            config,
            out,
        } => {
            let kv = load_kv(config.as_ref())?;
            let cfg = SweepConfig {
                alphas: parse_grid(&alphas, |a: f64| a, |a| (a * 1e9).round() / 1e9)?,
                window_lens: parse_grid(&lengths, |l: usize| l as f64, |l| l.round() as usize)?,
                epochs,
                scenario: ScenarioConfig::from_key_values(&kv)?,
                n_normal,
                n_per_fault,
                features: FeatureConfig::from_key_values(&kv)?,
                seed,
                ..SweepConfig::default()
            };
            let cells = sweep(&cfg)?;
            match &out {
                Some(path) => write_text(path, &sweep_csv(&cells))?,
                None => print!("{}", sweep_csv(&cells)),
            }
            if let Some(best) = best_cell(&cells) {
                eprintln!("best: alpha {} L {} val_acc {:.4}", best.alpha, best.window_len, best.val_acc);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fomads: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
