//! `surfhop`: run trajectory ensembles or the exact reference, compare them,
//! and tabulate momentum jumps.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when propagation
//! or output fails.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use surfhop_core::{
    compare, consistency_report, jump_table, run_ensemble, run_exact, summarize, ConfigError,
    ConsistencyReport, EnsembleFrame, ExactConfig, ModelPotential, RunConfig, RunError, RunSummary,
    Tolerances, TwoStateModel, Verdict,
};

use config::{Engine, Settings};

#[derive(Parser)]
#[command(
    name = "surfhop",
    version,
    about = "Two-state nonadiabatic dynamics in one dimension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine and write its frames and a summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Frame CSV; the summary goes to the same path with a .json extension.
        #[arg(long, default_value = "frames.csv")]
        out: PathBuf,
    },
    /// Run an engine and a reference on the same clock and compare them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comparison CSV; the verdict goes beside it as .json.
        #[arg(long, default_value = "comparison.csv")]
        out: PathBuf,
    },
    /// Impulsive and rescaling momentum jumps at a crossing point.
    JumpTable {
        #[command(flatten)]
        common: Common,
        /// Kinematic momenta, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "10,3"
        )]
        momenta: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        q_star: f64,
        #[arg(long, default_value = "jump_table.csv")]
        out: PathBuf,
    },
    /// Tabulate the model potential, coupling and localized quantum force.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        q_min: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        q_max: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long, default_value = "scan.csv")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(e) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(format!("{e:#}"))
    }
}

impl Common {
    fn resolve(&self) -> Result<Settings, Failure> {
        let file = match &self.config {
            Some(path) => Settings::load(path).map_err(Failure::Config)?,
            None => Settings::default(),
        };
        Ok(self.settings.overlay(&file))
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    engine: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<&'a ExactConfig>,
    summary: RunSummary,
    diagnostics: ConsistencyReport,
}

#[derive(Serialize)]
struct VerdictReport<'a> {
    engine: &'static str,
    reference: &'static str,
    config: &'a RunConfig,
    grid: &'a ExactConfig,
    tolerances: Tolerances,
    gap: f64,
    p_plus: surfhop_core::Deviation,
    p_minus: surfhop_core::Deviation,
    alpha: surfhop_core::Deviation,
    beta: surfhop_core::Deviation,
    run: RunSummary,
    reference_summary: RunSummary,
    reference_transfer: f64,
    verdict: Verdict,
}

fn frames_for(
    engine: Engine,
    cfg: &RunConfig,
    exact: &ExactConfig,
) -> Result<Vec<EnsembleFrame>, Failure> {
    let clock = Instant::now();
    let frames = match engine.trajectory() {
        Some(kind) => {
            run_ensemble(&RunConfig {
                engine: kind,
                ..*cfg
            })?
            .frames
        }
        None => run_exact(cfg, exact)?.frames,
    };
    eprintln!(
        "{}: {} frames in {:.2?}",
        engine.as_str(),
        frames.len(),
        clock.elapsed()
    );
    Ok(frames)
}

fn cmd_run(common: &Common, out: &Path) -> Result<(), Failure> {
    let s = common.resolve()?;
    let engine = s.engine();
    let cfg = s.run_config(engine);
    let exact = s.exact_config();
    let frames = frames_for(engine, &cfg, &exact)?;
    let report = RunReport {
        engine: engine.as_str(),
        config: &cfg,
        grid: (engine == Engine::Exact).then_some(&exact),
        summary: summarize(&frames).expect("at least one frame"),
        diagnostics: consistency_report(&frames).expect("at least one frame"),
    };
    output::write_text(out, &output::frames_csv(&frames))?;
    output::write_json(&output::json_path(out), &report)?;
    Ok(())
}

/// Energy gap at the diabatic crossing, where the quantum-force work is
/// expected to settle per unit of transferred population.
fn crossing_gap(model: &ModelPotential) -> f64 {
    model.adiabatic(0.0).omega
}

fn cmd_compare(common: &Common, out: &Path) -> Result<(), Failure> {
    let s = common.resolve()?;
    let engine = s.engine();
    if engine == Engine::Exact {
        return Err(Failure::Config(
            "compare needs a trajectory engine (bo, fssh or qtsh)".into(),
        ));
    }
    let reference = s.reference();
    let cfg = s.run_config(engine);
    let exact = s.exact_config();
    let run = frames_for(engine, &cfg, &exact)?;
    let reference_frames = frames_for(reference, &cfg, &exact)?;
    let cmp = compare(&run, &reference_frames)?;
    let tolerances = Tolerances::default();
    let gap = crossing_gap(&cfg.model);
    let verdict = cmp.verdict(&tolerances, gap, engine == Engine::Qtsh);
    let report = VerdictReport {
        engine: engine.as_str(),
        reference: reference.as_str(),
        config: &cfg,
        grid: &exact,
        tolerances,
        gap,
        p_plus: cmp.p_plus,
        p_minus: cmp.p_minus,
        alpha: cmp.alpha,
        beta: cmp.beta,
        run: cmp.run,
        reference_summary: cmp.reference,
        reference_transfer: cmp.reference_transfer,
        verdict,
    };
    output::write_text(out, &output::comparison_csv(&cmp.rows))?;
    output::write_json(&output::json_path(out), &report)?;
    eprintln!(
        "max |dP+| = {:.3e}, verdict {}",
        cmp.p_plus.max_abs,
        if verdict.pass { "pass" } else { "fail" }
    );
    Ok(())
}

fn cmd_jump_table(
    common: &Common,
    momenta: &[f64],
    q_star: f64,
    out: &Path,
) -> Result<(), Failure> {
    let s = common.resolve()?;
    let cfg = s.run_config(s.engine());
    cfg.model.validate().map_err(ConfigError::from)?;
    if !q_star.is_finite() || momenta.iter().any(|p| !p.is_finite()) {
        return Err(Failure::Config("momenta and q-star must be finite".into()));
    }
    let rows = jump_table(&cfg.model, q_star, momenta);
    output::write_text(out, &output::jump_csv(&rows))?;
    Ok(())
}

fn cmd_scan(
    common: &Common,
    q_min: f64,
    q_max: f64,
    points: usize,
    out: &Path,
) -> Result<(), Failure> {
    let s = common.resolve()?;
    let model = s.run_config(s.engine()).model;
    model.validate().map_err(ConfigError::from)?;
    if points < 2 || q_min.partial_cmp(&q_max) != Some(std::cmp::Ordering::Less) {
        return Err(Failure::Config(
            "scan needs q-min < q-max and at least two points".into(),
        ));
    }
    let rows: Vec<[f64; 11]> = (0..points)
        .map(|i| {
            let q = q_min + (q_max - q_min) * i as f64 / (points - 1) as f64;
            let di = model.diabatic(q);
            let ad = model.adiabatic(q);
            // coherence of a walker that stays in the diabat the upper
            // state starts from on the left, and the force it feels
            let alpha_loc = 0.5 * ad.phi.sin();
            let f_q = 2.0 * ad.omega * ad.d * alpha_loc;
            [
                q, di.v1, di.v2, di.v12, ad.v_plus, ad.v_minus, ad.omega, ad.phi, ad.d, alpha_loc,
                f_q,
            ]
        })
        .collect();
    output::write_text(out, &output::scan_csv(&rows))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out),
        Command::Compare { common, out } => cmd_compare(common, out),
        Command::JumpTable {
            common,
            momenta,
            q_star,
            out,
        } => cmd_jump_table(common, momenta, *q_star, out),
        Command::Scan {
            common,
            q_min,
            q_max,
            points,
            out,
        } => cmd_scan(common, *q_min, *q_max, *points, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
