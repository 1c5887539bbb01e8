//! Exact two-state wavepacket propagation on a uniform grid.
//!
//! The wavefunction is held in the diabatic basis and advanced with a symmetric
//! split-operator step: half a kinetic step in momentum space, the exact 2x2
//! potential propagator at every grid point, then another half kinetic step.
//! Observables are reported in the adiabatic basis so they line up with the
//! trajectory ensembles.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleFrame, InitialCondition, RunConfig, Surface};
use crate::error::{ConfigError, RunError};
use crate::model::TwoStateModel;

/// Probability allowed in the edge bands before a run is declared under-resolved.
pub const EDGE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            x_min: -30.0,
            x_max: 50.0,
            n_points: 4096,
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_points < 256 || !self.n_points.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "grid needs a power-of-two point count >= 256, got {}",
                self.n_points
            )));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(ConfigError::Invalid(format!(
                "bad grid bounds [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.dx());
        (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    /// Points in each edge band used by the boundary monitor (1/32 of the grid).
    pub fn edge_points(&self) -> usize {
        self.n_points / 32
    }
}

/// Diabatic components on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub grid: Grid,
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
}

impl Wavefunction {
    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .psi1
            .iter()
            .zip(&self.psi2)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        s * self.grid.dx()
    }

    /// Probability within the edge bands at both ends of the grid.
    pub fn edge_density(&self) -> f64 {
        let n = self.grid.n_points;
        let e = self.grid.edge_points();
        let dens = |i: usize| self.psi1[i].norm_sqr() + self.psi2[i].norm_sqr();
        let s: f64 = (0..e).chain(n - e..n).map(dens).sum();
        s * self.grid.dx()
    }

    pub fn mean_position(&self) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n_points)
            .map(|i| self.grid.x(i) * (self.psi1[i].norm_sqr() + self.psi2[i].norm_sqr()))
            .sum::<f64>()
            * dx
    }

    pub fn position_variance(&self) -> f64 {
        let dx = self.grid.dx();
        let mean = self.mean_position();
        (0..self.grid.n_points)
            .map(|i| {
                (self.grid.x(i) - mean).powi(2)
                    * (self.psi1[i].norm_sqr() + self.psi2[i].norm_sqr())
            })
            .sum::<f64>()
            * dx
    }
}

/// Adiabatic amplitudes `(psi+, psi-) = U(q)^T (psi1, psi2)` at every point.
fn adiabatic_components<M: TwoStateModel>(
    psi: &Wavefunction,
    model: &M,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = psi.grid.n_points;
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for i in 0..n {
        let (s, c) = (0.5 * model.adiabatic(psi.grid.x(i)).phi).sin_cos();
        let (a, b) = (psi.psi1[i], psi.psi2[i]);
        plus.push(a * c + b * s);
        minus.push(-a * s + b * c);
    }
    (plus, minus)
}

/// Normalised Gaussian `exp(i k0 x - (x-q0)²/(4 sigma_q²))` placed on the
/// requested adiabatic surface by rotating through `U(x)` point by point.
pub fn init_wavepacket<M: TwoStateModel>(
    grid: &Grid,
    ic: &InitialCondition,
    model: &M,
) -> Result<Wavefunction, ConfigError> {
    grid.validate()?;
    ic.validate()?;
    let margin = 5.0 * ic.sigma_q;
    if ic.q0 - margin < grid.x_min || ic.q0 + margin > grid.x_max {
        return Err(ConfigError::Invalid(format!(
            "packet at q0 = {} lies within 5 sigma_q of the grid edge",
            ic.q0
        )));
    }
    let n = grid.n_points;
    let mut psi1 = Vec::with_capacity(n);
    let mut psi2 = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.x(i);
        let env = (-(x - ic.q0).powi(2) / (4.0 * ic.sigma_q * ic.sigma_q)).exp();
        let g = Complex64::from_polar(env, ic.k0 * (x - ic.q0));
        let (s, c) = (0.5 * model.adiabatic(x).phi).sin_cos();
        // columns of U(x): |+> = (c, s), |-> = (-s, c)
        match ic.surface0 {
            Surface::Upper => {
                psi1.push(g * c);
                psi2.push(g * s);
            }
            Surface::Lower => {
                psi1.push(-g * s);
                psi2.push(g * c);
            }
        }
    }
    let mut psi = Wavefunction {
        grid: *grid,
        psi1,
        psi2,
    };
    let scale = 1.0 / psi.norm().sqrt();
    psi.psi1
        .iter_mut()
        .chain(psi.psi2.iter_mut())
        .for_each(|z| *z *= scale);
    Ok(psi)
}

/// Adiabatic observables of a wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactObservables {
    pub p_plus: f64,
    pub p_minus: f64,
    /// `Re ∫ psi+ conj(psi-) dx`
    pub alpha: f64,
    /// `Im ∫ psi+ conj(psi-) dx`
    pub beta: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub norm: f64,
}

/// Split-operator propagator with precomputed phase factors for a fixed `dt`.
pub struct SplitOperator {
    grid: Grid,
    dt: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kinetic_half: Vec<Complex64>,
    kinetic_energy: Vec<f64>,
    /// Per-point 2x2 potential propagator `[[u11, u12], [u12, u22]]`.
    potential: Vec<[Complex64; 3]>,
    /// Per-point diabatic potential `(V1, V2, V12)`.
    diabatic: Vec<(f64, f64, f64)>,
    scratch: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new<M: TwoStateModel>(grid: &Grid, model: &M, dt: f64) -> Result<Self, ConfigError> {
        grid.validate()?;
        if !dt.is_finite() || dt == 0.0 {
            return Err(ConfigError::Invalid(format!("bad grid time step {dt}")));
        }
        let n = grid.n_points;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mass = model.mass();
        let kinetic_energy: Vec<f64> = grid
            .wavenumbers()
            .into_iter()
            .map(|k| 0.5 * k * k / mass)
            .collect();
        let kinetic_half = kinetic_energy
            .iter()
            .map(|&t| Complex64::from_polar(1.0, -0.5 * dt * t))
            .collect();

        let mut potential = Vec::with_capacity(n);
        let mut diabatic = Vec::with_capacity(n);
        for i in 0..n {
            let p = model.diabatic(grid.x(i));
            diabatic.push((p.v1, p.v2, p.v12));
            // V = mean I + half sigma_z + v12 sigma_x
            let mean = 0.5 * (p.v1 + p.v2);
            let half = 0.5 * (p.v1 - p.v2);
            let r = half.hypot(p.v12);
            let phase = Complex64::from_polar(1.0, -mean * dt);
            let (sn, cs) = (r * dt).sin_cos();
            let (nz, nx) = if r > 0.0 {
                (half / r, p.v12 / r)
            } else {
                (0.0, 0.0)
            };
            let i_sin = Complex64::new(0.0, -sn);
            potential.push([
                phase * (cs + i_sin * nz),
                phase * (i_sin * nx),
                phase * (cs - i_sin * nz),
            ]);
        }
        Ok(SplitOperator {
            grid: *grid,
            dt,
            forward,
            inverse,
            kinetic_half,
            kinetic_energy,
            potential,
            diabatic,
            scratch: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic_half_step(&mut self, psi: &mut [Complex64]) {
        let n = psi.len();
        self.scratch
            .resize(self.forward.get_inplace_scratch_len(), Complex64::default());
        self.forward.process_with_scratch(psi, &mut self.scratch);
        let inv_n = 1.0 / n as f64;
        for (z, k) in psi.iter_mut().zip(&self.kinetic_half) {
            *z *= k * inv_n;
        }
        self.scratch
            .resize(self.inverse.get_inplace_scratch_len(), Complex64::default());
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    /// One Strang step `e^{-iT dt/2} e^{-iV dt} e^{-iT dt/2}` in place.
    pub fn step(&mut self, psi: &mut Wavefunction) {
        debug_assert_eq!(psi.grid, self.grid);
        self.kinetic_half_step(&mut psi.psi1);
        self.kinetic_half_step(&mut psi.psi2);
        for ((a, b), u) in psi
            .psi1
            .iter_mut()
            .zip(psi.psi2.iter_mut())
            .zip(&self.potential)
        {
            let (x, y) = (*a, *b);
            *a = u[0] * x + u[1] * y;
            *b = u[1] * x + u[2] * y;
        }
        self.kinetic_half_step(&mut psi.psi1);
        self.kinetic_half_step(&mut psi.psi2);
    }

    fn kinetic_expectation(&self, psi: &[Complex64]) -> f64 {
        let mut buf = psi.to_vec();
        let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        let s: f64 = buf
            .iter()
            .zip(&self.kinetic_energy)
            .map(|(z, t)| z.norm_sqr() * t)
            .sum();
        s * self.grid.dx() / self.grid.n_points as f64
    }

    /// Adiabatic populations and coherence plus `<H>`.
    pub fn analyze<M: TwoStateModel>(&self, psi: &Wavefunction, model: &M) -> ExactObservables {
        let dx = self.grid.dx();
        let (plus, minus) = adiabatic_components(psi, model);
        let p_plus: f64 = plus.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        let p_minus: f64 = minus.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        let coh: Complex64 = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * dx;
        let potential: f64 = psi
            .psi1
            .iter()
            .zip(&psi.psi2)
            .zip(&self.diabatic)
            .map(|((a, b), &(v1, v2, v12))| {
                v1 * a.norm_sqr() + v2 * b.norm_sqr() + 2.0 * v12 * (a.conj() * b).re
            })
            .sum::<f64>()
            * dx;
        let kinetic = self.kinetic_expectation(&psi.psi1) + self.kinetic_expectation(&psi.psi2);
        ExactObservables {
            p_plus,
            p_minus,
            alpha: coh.re,
            beta: coh.im,
            kinetic,
            potential,
            energy: kinetic + potential,
            norm: psi.norm(),
        }
    }

    /// Mean momentum `<p>` from the spectral representation.
    pub fn mean_momentum(&self, psi: &Wavefunction) -> f64 {
        let ks = self.grid.wavenumbers();
        let mut total = 0.0;
        for comp in [&psi.psi1, &psi.psi2] {
            let mut buf = comp.clone();
            let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            total += buf
                .iter()
                .zip(&ks)
                .map(|(z, k)| z.norm_sqr() * k)
                .sum::<f64>();
        }
        total * self.grid.dx() / self.grid.n_points as f64
    }
}

/// Grid settings for the exact reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub grid: Grid,
    pub dt: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            grid: Grid::default(),
            dt: 0.1,
        }
    }
}

/// Frames of an exact run together with per-frame health data.
#[derive(Debug, Clone)]
pub struct ExactRun {
    pub frames: Vec<EnsembleFrame>,
    pub observables: Vec<ExactObservables>,
    pub max_edge_density: f64,
}

/// Propagates the packet described by `cfg.initial` on `cfg.model` and reports
/// frames at exactly the times a trajectory run with `cfg` would.
pub fn run_exact(cfg: &RunConfig, exact: &ExactConfig) -> Result<ExactRun, RunError> {
    cfg.validate()?;
    if !(exact.dt.is_finite() && exact.dt > 0.0) {
        return Err(
            ConfigError::Invalid(format!("exact dt must be positive, got {}", exact.dt)).into(),
        );
    }
    let model = &cfg.model;
    let mut psi = init_wavepacket(&exact.grid, &cfg.initial, model)?;
    let mut prop = SplitOperator::new(&exact.grid, model, exact.dt)?;
    let times = cfg.frame_times();

    let mut frames = Vec::with_capacity(times.len());
    let mut observables = Vec::with_capacity(times.len());
    let mut max_edge: f64 = psi.edge_density();
    let mut now = 0.0;
    for &t in &times {
        let span = t - now;
        let steps = (span / exact.dt).round();
        if (steps * exact.dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(RunError::FrameMismatch(format!(
                "interval {span} is not a multiple of the grid step {}",
                exact.dt
            )));
        }
        for _ in 0..steps as usize {
            prop.step(&mut psi);
        }
        now = t;
        let edge = psi.edge_density();
        max_edge = max_edge.max(edge);
        if edge > EDGE_TOLERANCE {
            return Err(RunError::GridTooSmall { density: edge, t });
        }
        let obs = prop.analyze(&psi, model);
        frames.push(EnsembleFrame {
            t,
            p_plus: obs.p_plus,
            p_minus: obs.p_minus,
            mean_alpha: obs.alpha,
            mean_beta: obs.beta,
            energy: obs.energy,
            work: 0.0,
            frustrated_count: 0,
            consistency_gap: 0.0,
            mean_a_pp: obs.p_plus,
            hop_energy: 0.0,
        });
        observables.push(obs);
    }
    Ok(ExactRun {
        frames,
        observables,
        max_edge_density: max_edge,
    })
}
