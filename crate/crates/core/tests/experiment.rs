use std::collections::BTreeMap;
use std::path::Path;

use mimu_dr::data::{SplitId, SplitSpec};
use mimu_dr::eval::{read_combination_table, run_experiment, AraModels, ExperimentConfig};
use mimu_dr::fusion::FusionMode;
use mimu_dr::quadnet::{ArchSpec, TrainConfig};
use mimu_dr::synth::{gen_corpus, CorpusSpec};
use mimu_dr::{Error, TrajectoryKind};

fn small_config(split: SplitId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(SplitSpec::standard(split).with_test_trajectory("5"));
    cfg.modes = vec![FusionMode::Rda, FusionMode::Ara];
    cfg.arch = ArchSpec::compact();
    cfg.train = TrainConfig {
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    cfg
}

fn corpus() -> Vec<mimu_dr::MimuRecording> {
    let mut spec = CorpusSpec::new(TrajectoryKind::HorizontalPeriodic, 5, 4, 21);
    spec.duration = 12.0;
    gen_corpus(&spec).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn rerun_is_byte_identical_and_tables_have_one_row_per_k() {
    let corpus = corpus();
    let cfg = small_config(SplitId::D3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, &corpus, Some(a.path())).unwrap();
    run_experiment(&cfg, &corpus, Some(b.path())).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    assert_eq!(fa, fb);
    for name in [
        "table_D3_rda_distance.csv",
        "table_D3_ara_altitude.csv",
        "epochs_D3.csv",
        "track_D3.csv",
        "baseline_D3.csv",
    ] {
        assert!(fa.contains_key(name), "missing {name}");
    }

    let rows = read_combination_table(&a.path().join("table_D3_rda_distance.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert_eq!(rows.iter().map(|r| r.n_subsets).collect::<Vec<_>>(), vec![4, 6, 4, 1]);
    for r in &rows {
        assert!(r.rmse_m.is_finite() && r.rmse_m <= r.max_m + 1e-12);
    }

    let epochs = String::from_utf8(fa["epochs_D3.csv"].clone()).unwrap();
    assert!(epochs.starts_with("epoch,gt_m,pred_m\n1,"));
    assert_eq!(epochs.lines().count(), 1 + 12);
}

#[test]
fn contradictions_fail_before_training() {
    let corpus = corpus();
    let mut cfg = small_config(SplitId::D1);
    cfg.ara_models = AraModels::PerImu;
    assert!(matches!(run_experiment(&cfg, &corpus, None), Err(Error::Config(_))));

    let mut cfg = small_config(SplitId::D3);
    cfg.modes.clear();
    assert!(matches!(run_experiment(&cfg, &corpus, None), Err(Error::Config(_))));

    let mut cfg = small_config(SplitId::D3);
    cfg.arch.conv.pop();
    assert!(run_experiment(&cfg, &corpus, None).is_err());
}
