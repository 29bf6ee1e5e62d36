use fomads::features::FeatureConfig;
use fomads::harness::{
    dataset_csv, parse_dataset, run_pipeline, sweep, sweep_csv, Ablation, ConditionReport, PipelineConfig,
    SweepConfig, SwitchConvention, CONDITIONS,
};
use fomads::label::NUM_CLASSES;
use fomads::pmrat::{parse_stages, TrainConfig};
use fomads::sigsim::{generate_dataset, ScenarioConfig};
use fomads::{ClassLabel, Error};

fn small(seed: u64) -> PipelineConfig {
    PipelineConfig {
        n_normal: 50,
        n_per_fault: 5,
        train: TrainConfig {
            stages: parse_stages("normal,bias,noise,replacement,replay", 1).unwrap(),
            ..TrainConfig::default()
        },
        seed,
        ..PipelineConfig::default()
    }
}

#[test]
fn default_dataset_has_5600_windows() {
    let data = generate_dataset(&ScenarioConfig::default(), 800, 200, 0).unwrap();
    assert_eq!(data.len(), 5600);
    assert_eq!(data.iter().filter(|w| w.label.is_normal()).count(), 800);
}

#[test]
fn pipeline_is_deterministic_and_consistent() {
    let a = run_pipeline(&small(3)).unwrap();
    let b = run_pipeline(&small(3)).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.report.to_csv(), b.report.to_csv());
    assert_eq!(a.report.confusion_csv(), b.report.confusion_csv());

    let names: Vec<&str> = a.report.conditions.iter().map(|c| c.condition.as_str()).collect();
    assert_eq!(names, CONDITIONS);
    // 10 normal + 1 per fault class held out.
    for c in &a.report.conditions {
        assert_eq!(c.confusion[0].iter().sum::<usize>(), 10);
        for row in &c.confusion[1..] {
            assert_eq!(row.iter().sum::<usize>(), 1);
        }
        let trace: usize = (0..NUM_CLASSES).map(|k| c.confusion[k][k]).sum();
        assert_eq!(c.overall_accuracy(), trace as f64 / c.total() as f64);
        for acc in [c.overall_accuracy(), c.inverter_accuracy(), c.switch_accuracy(), c.adjacency_error_fraction()] {
            assert!((0.0..=1.0).contains(&acc));
        }
    }
}

#[test]
fn ablations_change_only_their_switch() {
    let base = PipelineConfig::desk_scale(1);
    assert!(base.clone().with_ablation(Ablation::Flat).train.flat);
    assert!(!base.clone().with_ablation(Ablation::NoOhem).train.use_ohem);
    assert!(!base.clone().with_ablation(Ablation::NoFracFeatures).features.fractional);
    let normal = base.clone().with_ablation(Ablation::NormalOnly).train.stages;
    assert_eq!(normal.len(), 1);
    assert_eq!(normal[0].epochs, 100);
    assert_eq!(base.clone().with_ablation(Ablation::Full), base);
}

#[test]
fn majority_predictor_on_default_proportions() {
    let data = generate_dataset(&ScenarioConfig::default(), 800, 200, 0).unwrap();
    let mut report = ConditionReport::new("normal", SwitchConvention::RoutedOnly);
    for w in &data {
        report.record(w.label, ClassLabel::NORMAL);
    }
    assert!((report.overall_accuracy() - 800.0 / 5600.0).abs() < 1e-15);
}

#[test]
fn dataset_file_round_trip_preserves_pipeline_input() {
    let data = generate_dataset(&ScenarioConfig::default(), 3, 1, 8).unwrap();
    let back = parse_dataset(&dataset_csv(&data)).unwrap();
    let ex = FeatureConfig::default().extractor().unwrap();
    for (a, b) in data.iter().zip(&back) {
        assert_eq!(ex.extract(a).unwrap(), ex.extract(b).unwrap());
    }
}

#[test]
fn sweep_grid_shape_and_determinism() {
    let cfg = SweepConfig {
        alphas: vec![0.5, 0.7],
        window_lens: vec![100, 300],
        epochs: 1,
        n_normal: 20,
        n_per_fault: 2,
        seed: 5,
        ..SweepConfig::default()
    };
    let a = sweep(&cfg).unwrap();
    assert_eq!(a.len(), 4);
    assert_eq!(sweep_csv(&a), sweep_csv(&sweep(&cfg).unwrap()));
    let too_long = SweepConfig {
        window_lens: vec![100_000],
        ..cfg
    };
    assert!(matches!(sweep(&too_long), Err(Error::Domain(_))));
}
