//! Synthetic (V, P, Q) windows: one normal and one faulted window, and the
//! class layout of a desk-scale dataset.
//!
//! `cargo run --example generate [out.csv]`

use fomads::harness::write_dataset;
use fomads::sigsim::{generate_dataset, generate_fault, generate_normal, ScenarioConfig};

fn main() -> fomads::Result<()> {
    let cfg = ScenarioConfig::default();
    let normal = generate_normal(&cfg, 1)?;
    let fault = generate_fault(&cfg, 2, 3, 1)?;
    let onset = cfg.fault_onset();
    println!("window of {} samples, fault onset at sample {onset}", normal.len());
    for k in [onset - 1, onset + 20, onset + 100] {
        println!(
            "k={k:3}  normal P={:8.1}  fault ({}) P={:8.1}",
            normal.p[k], fault.label, fault.p[k]
        );
    }

    let data = generate_dataset(&cfg, 800, 50, 42)?;
    let faults = data.iter().filter(|w| !w.label.is_normal()).count();
    println!("desk-scale set: {} windows, {} faulted", data.len(), faults);
    if let Some(path) = std::env::args().nth(1) {
        write_dataset(path.as_ref(), &data)?;
        println!("wrote {path}");
    }
    Ok(())
}
