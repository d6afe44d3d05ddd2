//! `ota`: command-line runner for the experiment scenarios.
//!
//! Every verb maps to one scenario. Parameters come from `--config` (TOML),
//! then verb flags, then `--set key=value`, later sources winning. Output is
//! CSV with `#` metadata lines, written to `--out` or stdout.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ota_core::constellation::preset_catalog;
use ota_core::experiments::{run_with_threads, validate, ExperimentConfig, Scenario};
use ota_core::nomographic::Catalog;

#[derive(Debug, Parser)]
#[command(name = "ota", version, about = "Over-the-air computation experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config with `scenario`, `seed`, `output` and a `[parameters]` table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the Monte Carlo loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Check the parameters and exit without running.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Source entropy vs adder-MAC sum capacity, and the uncoded scheme.
    Separation {
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        draws: Option<u64>,
    },
    /// Nomographic function catalog and OTA evaluation traces.
    Nomographic {
        #[command(subcommand)]
        action: NomographicAction,
    },
    /// Distributed estimation sweeps.
    Estimate {
        #[command(subcommand)]
        action: EstimateAction,
    },
    /// Distributed detection sweeps.
    Detect {
        #[command(subcommand)]
        action: DetectAction,
    },
    /// LEO constellation geometry and the satellite OTA study.
    Constellation {
        #[command(subcommand)]
        action: ConstellationAction,
    },
}

#[derive(Debug, Subcommand)]
enum NomographicAction {
    /// Print the builtin specs.
    List,
    /// Direct vs OTA evaluation on random readings.
    Trace {
        /// Builtin name or `all`.
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        points: Option<u64>,
        #[arg(long)]
        noise_var: Option<f64>,
        #[arg(long)]
        phase_err_std: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum EstimateAction {
    /// Analog vs digital distortion over a list of sensor counts.
    Sweep {
        /// Comma-separated sensor counts.
        #[arg(long)]
        n_list: Option<String>,
        /// `fixed` or `linear`.
        #[arg(long)]
        ptot_mode: Option<String>,
        /// Total power in `fixed` mode.
        #[arg(long)]
        p_tot: Option<f64>,
        /// Power per sensor in `linear` mode.
        #[arg(long)]
        p_per_sensor: Option<f64>,
        #[arg(long)]
        noise_var: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum DetectAction {
    /// Error rates over sensor counts and SNRs.
    Sweep {
        /// Comma-separated SNRs in dB.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
        #[arg(long)]
        n_list: Option<String>,
        /// Number of hypotheses, 2 or 4.
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long)]
        policy: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum ConstellationAction {
    /// Print the preset catalog.
    Presets,
    /// LoS count statistics against latitude.
    Profile {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        mask_deg: Option<f64>,
        #[arg(long)]
        lat_step: Option<f64>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Estimation MSE against residual phase error over the LoS satellites.
    OtaMse {
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated phase error stds in radians.
        #[arg(long)]
        phase_err_grid: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        lat_deg: Option<f64>,
        #[arg(long)]
        mask_deg: Option<f64>,
        #[arg(long)]
        timing_err_std_s: Option<f64>,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
    },
}

/// Flags of one verb as `(key, value)` overrides.
type Overrides = Vec<(&'static str, Option<String>)>;

fn some<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

/// Scenario and flag overrides for verbs that run an experiment.
fn plan(verb: &Verb) -> Option<(Scenario, Overrides)> {
    Some(match verb {
        Verb::Separation { grid_step, draws } => (
            Scenario::Separation,
            vec![("grid_step", some(grid_step)), ("draws", some(draws))],
        ),
        Verb::Nomographic { action } => match action {
            NomographicAction::List => return None,
            NomographicAction::Trace {
                function,
                n,
                points,
                noise_var,
                phase_err_std,
            } => (
                Scenario::Nomographic,
                vec![
                    ("function", function.clone()),
                    ("n", some(n)),
                    ("points", some(points)),
                    ("noise_var", some(noise_var)),
                    ("phase_err_std", some(phase_err_std)),
                ],
            ),
        },
        Verb::Estimate {
            action:
                EstimateAction::Sweep {
                    n_list,
                    ptot_mode,
                    p_tot,
                    p_per_sensor,
                    noise_var,
                    trials,
                },
        } => (
            Scenario::EstimationScaling,
            vec![
                ("n_list", n_list.clone()),
                ("ptot_mode", ptot_mode.clone()),
                ("p_tot", some(p_tot)),
                ("p_per_sensor", some(p_per_sensor)),
                ("noise_var", some(noise_var)),
                ("trials", some(trials)),
            ],
        ),
        Verb::Detect {
            action:
                DetectAction::Sweep {
                    snr_db,
                    n_list,
                    k,
                    trials,
                    prior,
                    policy,
                },
        } => (
            Scenario::DetectionSweep,
            vec![
                ("snr_db", snr_db.clone()),
                ("n_list", n_list.clone()),
                ("k", some(k)),
                ("trials", some(trials)),
                ("prior", some(prior)),
                ("policy", policy.clone()),
            ],
        ),
        Verb::Constellation { action } => match action {
            ConstellationAction::Presets => return None,
            ConstellationAction::Profile {
                preset,
                mask_deg,
                lat_step,
                samples,
            } => (
                Scenario::ConstellationProfile,
                vec![
                    ("preset", preset.clone()),
                    ("mask_deg", some(mask_deg)),
                    ("lat_step", some(lat_step)),
                    ("samples", some(samples)),
                ],
            ),
            ConstellationAction::OtaMse {
                preset,
                phase_err_grid,
                lat_deg,
                mask_deg,
                timing_err_std_s,
                epochs,
                trials,
            } => (
                Scenario::ConstellationOtaMse,
                vec![
                    ("preset", preset.clone()),
                    ("phase_err_grid", phase_err_grid.clone()),
                    ("lat_deg", some(lat_deg)),
                    ("mask_deg", some(mask_deg)),
                    ("timing_err_std_s", some(timing_err_std_s)),
                    ("epochs", some(epochs)),
                    ("trials", some(trials)),
                ],
            ),
        },
    })
}

fn build_config(common: &Common, scenario: Scenario, overrides: Overrides) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?;
            if cfg.scenario != scenario {
                bail!(
                    "config {} is for scenario `{}`, but this verb runs `{}`",
                    path.display(),
                    cfg.scenario,
                    scenario
                );
            }
            cfg
        }
        None => ExperimentConfig::new(scenario),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.parameters.insert(key.to_string(), v);
        }
    }
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{pair}`"))?;
        cfg.parameters.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.out.is_some() {
        cfg.output_path = common.out.clone();
    }
    Ok(cfg)
}

fn list_nomographic() {
    for spec in Catalog::with_builtins().list() {
        let kind = if spec.is_linear() { "linear" } else { "nonlinear" };
        println!("{spec} ({kind})");
    }
}

fn list_presets() -> anyhow::Result<()> {
    println!("name,altitude_km,inclination_deg,n_planes,sats_per_plane,phasing_f,raan_offset_deg");
    for (name, c) in preset_catalog()? {
        println!(
            "{name},{},{},{},{},{},{}",
            c.altitude_km, c.inclination_deg, c.n_planes, c.sats_per_plane, c.phasing_f, c.raan_offset_deg
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some((scenario, overrides)) = plan(&cli.verb) else {
        let listed = match &cli.verb {
            Verb::Nomographic { .. } => {
                list_nomographic();
                Ok(())
            }
            _ => list_presets(),
        };
        return match listed {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        };
    };

    let cfg = match build_config(&cli.common, scenario, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let diagnostics = validate(&cfg);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid parameter {d}");
        }
        return ExitCode::from(2);
    }
    if cli.common.dry_run {
        eprintln!("{}: parameters ok", cfg.scenario);
        return ExitCode::SUCCESS;
    }

    let table = match run_with_threads(&cfg, cli.common.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &cfg.output_path {
        Some(path) => eprintln!("wrote {} rows to {}", table.rows.len(), path.display()),
        None => match table.to_csv() {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
    }
    ExitCode::SUCCESS
}
