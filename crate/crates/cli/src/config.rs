//! Flat `key = value` configuration files and command-line overrides.

use std::path::Path;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use surfhop_core::{EngineKind, ExactConfig, Grid, RunConfig, Surface};

/// An ensemble engine or the exact wavepacket reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Bo,
    Fssh,
    Qtsh,
    Exact,
}

impl Engine {
    pub fn trajectory(self) -> Option<EngineKind> {
        match self {
            Engine::Bo => Some(EngineKind::BornOppenheimer),
            Engine::Fssh => Some(EngineKind::Fssh),
            Engine::Qtsh => Some(EngineKind::Qtsh),
            Engine::Exact => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Bo => "bo",
            Engine::Fssh => "fssh",
            Engine::Qtsh => "qtsh",
            Engine::Exact => "exact",
        }
    }
}

/// Every key a config file may set. All keys are optional; missing keys
/// keep the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Propagation engine.
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Reference engine for `compare`.
    #[arg(long, value_enum)]
    pub reference: Option<Engine>,
    /// Number of trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory time step (a.u.).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Steps between output frames.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub d_width: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    #[arg(long)]
    pub sigma_q: Option<f64>,
    /// Initial adiabatic surface (upper or lower).
    #[arg(long, value_parser = parse_surface)]
    pub surface: Option<Surface>,
    /// Left edge of the exact-propagation grid.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    /// Grid points, a power of two.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Time step of the exact propagation.
    #[arg(long)]
    pub grid_dt: Option<f64>,
}

fn parse_surface(s: &str) -> Result<Surface, String> {
    Surface::from_str(s)
}

/// Values are taken from `top` where set, otherwise from `base`.
macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),+) => {
        Settings { $($f: $top.$f.or($base.$f)),+ }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn overlay(&self, base: &Settings) -> Settings {
        overlay!(
            self,
            base,
            engine,
            reference,
            n,
            seed,
            dt,
            t_final,
            stride,
            a,
            b,
            c,
            d_width,
            mass,
            q0,
            k0,
            sigma_q,
            surface,
            grid_min,
            grid_max,
            grid_points,
            grid_dt
        )
    }

    pub fn engine(&self) -> Engine {
        self.engine.unwrap_or(Engine::Qtsh)
    }

    pub fn reference(&self) -> Engine {
        self.reference.unwrap_or(Engine::Exact)
    }

    /// Run configuration for `engine`. The exact reference has no ensemble,
    /// so it borrows the QTSH tag; only the model, packet and frame clock are
    /// read from it.
    pub fn run_config(&self, engine: Engine) -> RunConfig {
        let mut cfg = RunConfig {
            engine: engine.trajectory().unwrap_or(EngineKind::Qtsh),
            ..RunConfig::default()
        };
        let m = &mut cfg.model;
        m.a = self.a.unwrap_or(m.a);
        m.b = self.b.unwrap_or(m.b);
        m.c = self.c.unwrap_or(m.c);
        m.d_width = self.d_width.unwrap_or(m.d_width);
        m.mass = self.mass.unwrap_or(m.mass);
        let ic = &mut cfg.initial;
        ic.q0 = self.q0.unwrap_or(ic.q0);
        ic.k0 = self.k0.unwrap_or(ic.k0);
        ic.sigma_q = self.sigma_q.unwrap_or(ic.sigma_q);
        ic.surface0 = self.surface.unwrap_or(ic.surface0);
        cfg.n_traj = self.n.unwrap_or(cfg.n_traj);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.dt = self.dt.unwrap_or(cfg.dt);
        cfg.t_final = self.t_final.unwrap_or(cfg.t_final);
        cfg.stride = self.stride.unwrap_or(cfg.stride);
        cfg
    }

    pub fn exact_config(&self) -> ExactConfig {
        let d = ExactConfig::default();
        ExactConfig {
            grid: Grid {
                x_min: self.grid_min.unwrap_or(d.grid.x_min),
                x_max: self.grid_max.unwrap_or(d.grid.x_max),
                n_points: self.grid_points.unwrap_or(d.grid.n_points),
            },
            dt: self.grid_dt.unwrap_or(d.dt),
        }
    }
}
