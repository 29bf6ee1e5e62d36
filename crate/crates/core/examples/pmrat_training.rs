//! Progressive memory-replay adversarial training on the desk-scale set,
//! printing the per-epoch metrics log.
//!
//! `cargo run --release --example pmrat_training [epochs_per_stage] [metrics.csv]`

use fomads::features::FeatureConfig;
use fomads::model::HierarchicalModel;
use fomads::pmrat::{metrics_csv, train_curriculum, write_metrics, TrainConfig};
use fomads::sigsim::{generate_dataset, stratified_split, ScenarioConfig};

fn main() -> fomads::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(5, |s| s.parse().expect("epochs must be an integer"));
    let features = FeatureConfig::default();
    let data = generate_dataset(&ScenarioConfig::default(), 800, 50, 1)?;
    let (train, _) = stratified_split(&data, 0.8, 1)?;
    let cfg = TrainConfig::default().with_epochs(epochs);
    let model = HierarchicalModel::new(features.dim(), cfg.hidden_dim, cfg.gate_threshold, 1);

    let out = train_curriculum(model, &train, &features, &cfg)?;
    print!("{}", metrics_csv(&out.metrics));
    println!("replay buffer: {} entries, lowest loss {:.3}", out.buffer.len(), out.buffer.min_loss().unwrap_or(0.0));
    if let Some(path) = args.next() {
        write_metrics(path.as_ref(), &out.metrics)?;
    }
    Ok(())
}
