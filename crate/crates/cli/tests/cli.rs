use std::fs;
use std::process::{Command, Output};

fn ota(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ota")).args(args).output().expect("spawn ota")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn separation_reports_the_gap() {
    let o = ota(&["separation", "--draws", "5000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# scenario: separation"));
    assert!(text.contains("mac_sum_capacity,1.5,bits/use"));
    assert!(text.contains("separation_fails,1,bool"));
    assert!(text.contains("uncoded_errors,0,count"));
}

#[test]
fn nomographic_list_shows_builtins() {
    let o = ota(&["nomographic", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["mean", "sum", "weighted_sum", "product", "euclidean_norm", "active_count"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name}:"))), "{name}");
    }
}

#[test]
fn estimate_sweep_schema() {
    let o = ota(&[
        "estimate", "sweep", "--n-list", "1,4,16", "--ptot-mode", "linear", "--trials", "2000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines = data_lines(&text);
    assert!(lines[0].starts_with("N,p_tot [power],d_analog_emp [mse],d_analog_ana [mse],d_digital [mse],std_err [mse]"));
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("16,16,"));
}

#[test]
fn detect_sweep_accepts_negative_snr_and_k4() {
    let o = ota(&[
        "detect", "sweep", "--snr-db", "-3,6", "--n-list", "2", "--k", "4", "--trials", "3000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines = data_lines(&text);
    assert_eq!(lines[0], "N,K,snr_db [dB],p_fa,p_miss,p_error,std_err");
    assert!(lines[1].starts_with("2,4,-3,"));
    assert!(lines[2].starts_with("2,4,6,"));
}

#[test]
fn validation_failure_exits_nonzero() {
    let o = ota(&["detect", "sweep", "--prior", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("prior"), "{err}");
    assert!(o.stdout.is_empty());

    let o = ota(&["constellation", "profile", "--preset", "iridium"]);
    assert_eq!(o.status.code(), Some(2));

    let o = ota(&["separation", "--set", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_seed_and_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ota.toml");
    fs::write(
        &cfg,
        "scenario = \"constellation-ota-mse\"\nseed = 5\n\n[parameters]\nepochs = 2\ntrials = 1000\nphase_err_grid = [0.0, 0.5]\n",
    )
    .unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let cfg_s = cfg.to_str().unwrap();
    let run = |out: &str, threads: &str| {
        ota(&["constellation", "ota-mse", "--config", cfg_s, "--out", out, "--threads", threads])
    };
    assert!(run(out_a.to_str().unwrap(), "1").status.success());
    assert!(run(out_b.to_str().unwrap(), "4").status.success());
    let a = fs::read_to_string(&out_a).unwrap();
    let b = fs::read_to_string(&out_b).unwrap();
    assert!(a.contains("# seed: 5"));
    assert!(a.contains("# param.epochs: 2"));
    assert_eq!(data_lines(&a), data_lines(&b));
    // 2 grid values + timing-implied value, 3 policies
    assert_eq!(data_lines(&a).len(), 1 + 3 * 3);

    // verb and config must agree
    let o = ota(&["separation", "--config", cfg_s]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_monte_carlo_rows() {
    let args = |seed: &'static str| ["detect", "sweep", "--n-list", "3", "--trials", "2000", "--seed", seed];
    let a = stdout(&ota(&args("1")));
    let b = stdout(&ota(&args("2")));
    let a2 = stdout(&ota(&args("1")));
    assert_ne!(data_lines(&a), data_lines(&b));
    assert_eq!(data_lines(&a), data_lines(&a2));
}
