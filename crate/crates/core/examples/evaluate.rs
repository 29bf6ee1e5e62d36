//! Full pipeline on the desk-scale set: train, then score the held-out split
//! clean and under each attack.
//!
//! `cargo run --release --example evaluate [seed]`

use fomads::harness::{run_pipeline, PipelineConfig};

fn main() -> fomads::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let run = run_pipeline(&PipelineConfig::desk_scale(seed))?;
    print!("{}", run.report.to_table());
    println!();
    print!("{}", run.report.to_csv());
    Ok(())
}
