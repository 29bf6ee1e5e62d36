//! Paired ablation runs on the desk-scale set: the full model against flat,
//! no-OHEM, raw-feature and clean-only variants, all with the same seeds.
//!
//! `cargo run --release --example ablations [seed]`

use fomads::harness::{run_pipeline, Ablation, PipelineConfig};

fn main() -> fomads::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(7), |s| s.parse()).expect("seed must be an integer");
    println!("variant,condition,overall_acc,inverter_acc,switch_acc");
    for ablation in Ablation::ALL {
        let run = run_pipeline(&PipelineConfig::desk_scale(seed).with_ablation(ablation))?;
        for c in &run.report.conditions {
            println!(
                "{},{},{:.4},{:.4},{:.4}",
                ablation.name(),
                c.condition,
                c.overall_accuracy(),
                c.inverter_accuracy(),
                c.switch_accuracy()
            );
        }
    }
    Ok(())
}
