use std::fs;

use ota_core::experiments::{run, validate, ExperimentConfig, Scenario};

#[test]
fn config_file_round_trip_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("profile.csv");
    let cfg_path = dir.path().join("profile.toml");
    fs::write(
        &cfg_path,
        format!(
            "scenario = \"constellation-profile\"\nseed = 3\noutput = {:?}\n\n[parameters]\npreset = \"oneweb-like\"\nlat_step = 15\nsamples = 40\n",
            out.display().to_string()
        ),
    )
    .unwrap();
    let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
    assert!(validate(&cfg).is_empty());
    let table = run(&cfg).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# scenario: constellation-profile\n# seed: 3\n"));
    assert!(text.contains("# param.preset: oneweb-like\n"));
    assert!(text.contains("lat_deg [deg],mean [satellites],min [satellites],max [satellites]"));

    // data section parses back with the csv reader
    let data: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut reader = csv::Reader::from_reader(data.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), table.rows.len());
    assert_eq!(rows.len(), 13);
    for r in &rows {
        let mean: f64 = r[1].parse().unwrap();
        let min: f64 = r[2].parse().unwrap();
        let max: f64 = r[3].parse().unwrap();
        assert!(min <= mean && mean <= max);
    }
}

#[test]
fn rerun_is_byte_identical() {
    for sc in [Scenario::Nomographic, Scenario::EstimationScaling] {
        let cfg = ExperimentConfig::new(sc)
            .with_seed(11)
            .set(if sc == Scenario::Nomographic { "points" } else { "trials" }, 300);
        assert_eq!(run(&cfg).unwrap().csv_body().unwrap(), run(&cfg).unwrap().csv_body().unwrap());
    }
}

#[test]
fn noisy_nomographic_trace_has_errors() {
    let cfg = ExperimentConfig::new(Scenario::Nomographic)
        .set("function", "sum")
        .set("noise_var", 0.5)
        .set("points", 200);
    let t = run(&cfg).unwrap();
    let errors = t.numbers("error").unwrap();
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    // noise_var is the in-phase variance, as in the estimation scenarios
    assert!((mse - 0.5).abs() < 0.15, "{mse}");
}

#[test]
fn invalid_parameters_are_reported_before_running() {
    let cfg = ExperimentConfig::new(Scenario::EstimationScaling)
        .set("trials", 0)
        .set("ptot_mode", "quadratic")
        .set("n_list", "4,x");
    let keys: Vec<String> = validate(&cfg).into_iter().map(|d| d.key).collect();
    assert_eq!(keys, ["n_list", "ptot_mode", "trials"]);
    let err = run(&cfg).unwrap_err().to_string();
    assert!(err.contains("trials"));
}
