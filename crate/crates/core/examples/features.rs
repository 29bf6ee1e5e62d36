//! Dual fractional feature vectors, normalised on clean windows, for a clean
//! and a noise-attacked copy of the same fault.
//!
//! `cargo run --example features`

use fomads::attacks::{apply, AttackKind, AttackSpec};
use fomads::features::{fit_normalizer, FeatureConfig, STAT_NAMES};
use fomads::sigsim::{generate_dataset, ScenarioConfig};

fn main() -> fomads::Result<()> {
    let cfg = FeatureConfig::default();
    let extractor = cfg.extractor()?;
    let data = generate_dataset(&ScenarioConfig::default(), 40, 4, 3)?;
    let normalizer = fit_normalizer(&extractor.extract_all(&data)?)?;

    let w = data.last().expect("non-empty dataset");
    let noisy = apply(w, &AttackSpec::default_for(AttackKind::Noise))?;
    let a = normalizer.model_input(&extractor.extract(w)?)?;
    let b = normalizer.model_input(&extractor.extract(&noisy)?)?;
    println!("{} features for class {}", cfg.dim(), w.label);
    let channels = ["Caputo V", "Caputo P", "Caputo Q", "GL V", "GL P", "GL Q"];
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let name = format!("{} {}", channels[i / STAT_NAMES.len()], STAT_NAMES[i % STAT_NAMES.len()]);
        println!("{name:<16} clean {x:7.3}  noise {y:7.3}");
    }
    Ok(())
}
