//! The four sensor attacks applied to one faulted window.
//!
//! `cargo run --example attacks`

use fomads::attacks::{apply, AttackKind, AttackSpec};
use fomads::sigsim::{generate_fault, ScenarioConfig};

fn main() -> fomads::Result<()> {
    let clean = generate_fault(&ScenarioConfig::default(), 3, 5, 11)?;
    println!("{:<12} {:>10} {:>10} {:>10}", "attack", "V[250]", "P[250]", "max |dP|");
    for kind in AttackKind::ALL {
        let spec = AttackSpec::default_for(kind).with_seed(5);
        let attacked = apply(&clean, &spec)?;
        let max_dp = attacked
            .p
            .iter()
            .zip(&clean.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "{:<12} {:>10.2} {:>10.1} {:>10.1}",
            kind.name(),
            attacked.v[250],
            attacked.p[250],
            max_dp
        );
    }
    println!("{:<12} {:>10.2} {:>10.1}", "clean", clean.v[250], clean.p[250]);
    Ok(())
}
