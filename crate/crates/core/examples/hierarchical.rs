//! The gated two-stage classifier: inverter network, per-inverter switch
//! networks and the flat fallback for low-confidence inputs.
//!
//! `cargo run --release --example hierarchical`

use fomads::features::FeatureConfig;
use fomads::model::{HierarchicalModel, Route};
use fomads::pmrat::{parse_stages, train_curriculum, TrainConfig};
use fomads::sigsim::{generate_dataset, stratified_split, ScenarioConfig};

fn main() -> fomads::Result<()> {
    let features = FeatureConfig::default();
    let data = generate_dataset(&ScenarioConfig::default(), 800, 50, 5)?;
    let (train, test) = stratified_split(&data, 0.8, 5)?;
    let cfg = TrainConfig {
        stages: parse_stages("normal", 30)?,
        ..TrainConfig::default()
    };
    let model = HierarchicalModel::new(features.dim(), cfg.hidden_dim, cfg.gate_threshold, 5);
    let out = train_curriculum(model, &train, &features, &cfg)?;

    let extractor = features.extractor()?;
    out.model.reset_stage2_calls();
    let (mut correct, mut fallback) = (0, 0);
    for w in &test {
        let x = out.normalizer.model_input(&extractor.extract(w)?)?;
        let p = out.model.predict(&x)?;
        correct += usize::from(p.class_id == w.label.id());
        fallback += usize::from(p.route == Route::Fallback);
    }
    println!("test accuracy {:.3} on {} windows", correct as f64 / test.len() as f64, test.len());
    println!("switch networks called {} times, fallback used {fallback} times", out.model.stage2_calls());
    Ok(())
}
