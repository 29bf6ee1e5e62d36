//! Validation accuracy over a small (alpha, L) grid; each window length gets
//! its own regenerated dataset.
//!
//! `cargo run --release --example sweep`

use fomads::harness::{best_cell, cell_rank, sweep, sweep_csv, SweepConfig};

fn main() -> fomads::Result<()> {
    let cfg = SweepConfig {
        alphas: vec![0.3, 0.7, 1.0],
        window_lens: vec![200, 400],
        epochs: 5,
        n_per_fault: 50,
        ..SweepConfig::default()
    };
    let cells = sweep(&cfg)?;
    print!("{}", sweep_csv(&cells));
    if let Some(best) = best_cell(&cells) {
        println!("best: alpha {} L {} ({:.4})", best.alpha, best.window_len, best.val_acc);
    }
    println!("rank of (0.7, 400): {:?}", cell_rank(&cells, 0.7, 400));
    Ok(())
}
