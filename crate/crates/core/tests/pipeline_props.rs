use mvlayout::pipeline::{run_pipeline, ScenarioConfig};
use mvlayout::simulator::NoiseSpec;

fn config(dir: &std::path::Path, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::with_seed(seed);
    cfg.outputs = dir.to_path_buf();
    cfg
}

#[test]
fn zero_noise_two_views_is_near_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 5);
    cfg.view_count = 2;
    cfg.width = 512;
    cfg.noise = NoiseSpec::multiplicative(0.0);
    let report = run_pipeline(&cfg, None).unwrap();
    let pseudo = report.mean("pseudo").unwrap();
    let noisy = report.mean("noisy").unwrap();
    assert!(pseudo.iou2d >= 0.999, "pseudo iou2d {}", pseudo.iou2d);
    assert!(noisy.iou2d >= 0.999 && noisy.rmse == 0.0);
}

#[test]
fn consensus_beats_noisy_input_over_twenty_rooms() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 17);
    cfg.rooms = 20;
    cfg.width = 256;
    cfg.noise = NoiseSpec::multiplicative(0.05);
    let report = run_pipeline(&cfg, None).unwrap();
    let pseudo = report.mean("pseudo").unwrap();
    let noisy = report.mean("noisy").unwrap();
    assert!(pseudo.rmse < noisy.rmse, "pseudo {} vs noisy {}", pseudo.rmse, noisy.rmse);
    let csv = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("all:pseudo,mean,")), "{csv}");
}

#[test]
fn rerun_reproduces_every_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = config(a.path(), 8);
    cfg.rooms = 2;
    cfg.width = 128;
    cfg.noise = NoiseSpec::multiplicative(0.05);
    run_pipeline(&cfg, Some(2)).unwrap();
    let echoed = ScenarioConfig::load(&a.path().join("config.json")).unwrap();
    let mut again = echoed.clone();
    again.outputs = b.path().to_path_buf();
    run_pipeline(&again, Some(5)).unwrap();
    for f in ["metrics.csv", "losses.csv", "room001/costvolume/view03.csv", "room000/labels/view00.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
