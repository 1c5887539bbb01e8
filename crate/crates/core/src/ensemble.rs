//! Initial-condition sampling, seeded ensemble propagation and the aggregate
//! observables of a trajectory run.
//!
//! Each trajectory owns two ChaCha8 streams keyed by `(seed, index)`: one for
//! its Wigner sample, one for its hop draws. Ensemble sums are reduced in fixed
//! chunks of [`CHUNK`] trajectories and then across chunks in index order, so a
//! run is bitwise reproducible for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    trajectory_energy, EngineKind, HopKind, HopOutcome, Stepper, TrajectoryState,
};
use crate::error::{ConfigError, RunError};
use crate::model::{ModelPotential, TwoStateModel};

/// Trajectories per reduction chunk.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Upper,
    Lower,
}

impl Surface {
    pub fn sigma(self) -> u8 {
        match self {
            Surface::Upper => 1,
            Surface::Lower => 0,
        }
    }
}

impl std::str::FromStr for Surface {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upper" | "+" => Ok(Surface::Upper),
            "lower" | "-" => Ok(Surface::Lower),
            other => Err(format!(
                "unknown surface `{other}` (expected upper or lower)"
            )),
        }
    }
}

/// Minimum-uncertainty Gaussian wavepacket on one adiabatic surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub q0: f64,
    /// Mean momentum ħk.
    pub k0: f64,
    /// Position standard deviation.
    pub sigma_q: f64,
    pub surface0: Surface,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition {
            q0: -5.0,
            k0: 10.0,
            sigma_q: 1.0,
            surface0: Surface::Upper,
        }
    }
}

impl InitialCondition {
    /// Momentum standard deviation `ħ / (2 sigma_q)`.
    pub fn sigma_p(&self) -> f64 {
        0.5 / self.sigma_q
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sigma_q.is_finite() && self.sigma_q > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "sigma_q must be positive, got {}",
                self.sigma_q
            )));
        }
        if !self.q0.is_finite() || !self.k0.is_finite() {
            return Err(ConfigError::Invalid("q0 and k0 must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelPotential,
    pub engine: EngineKind,
    pub initial: InitialCondition,
    pub n_traj: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Steps between emitted frames.
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelPotential::default(),
            engine: EngineKind::Qtsh,
            initial: InitialCondition::default(),
            n_traj: 10_000,
            dt: 0.25,
            t_final: 2500.0,
            seed: 42,
            stride: 40,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.initial.validate()?;
        if self.n_traj == 0 {
            return Err(ConfigError::Invalid(
                "ensemble size must be at least 1".into(),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.stride == 0 {
            return Err(ConfigError::Invalid("stride must be at least 1".into()));
        }
        if self.n_steps() == 0 {
            return Err(ConfigError::Invalid(
                "t_final is shorter than one step".into(),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step indices at which frames are emitted: every `stride` steps and the last step.
    pub fn frame_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.stride).collect();
        if steps.last() != Some(&n) {
            steps.push(n);
        }
        steps
    }

    pub fn frame_times(&self) -> Vec<f64> {
        self.frame_steps()
            .into_iter()
            .map(|s| s as f64 * self.dt)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Stream {
    Sampling = 0,
    Hopping = 1,
}

fn trajectory_rng(seed: u64, index: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64 + stream as u64);
    rng
}

fn sample_one(ic: &InitialCondition, seed: u64, index: usize) -> TrajectoryState {
    let mut rng = trajectory_rng(seed, index, Stream::Sampling);
    let q = Normal::new(ic.q0, ic.sigma_q).expect("validated width");
    let p = Normal::new(ic.k0, ic.sigma_p()).expect("validated width");
    let q0 = q.sample(&mut rng);
    let pk0 = p.sample(&mut rng);
    TrajectoryState::on_surface(q0, pk0, ic.surface0.sigma())
}

/// Draws `n` walkers from the Wigner distribution of the Gaussian packet:
/// independent normals in `q` and `pk` with no initial coherence.
pub fn sample_initial(ic: &InitialCondition, n: usize, seed: u64) -> Vec<TrajectoryState> {
    (0..n).map(|i| sample_one(ic, seed, i)).collect()
}

/// Ensemble averages at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFrame {
    pub t: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean_alpha: f64,
    pub mean_beta: f64,
    pub energy: f64,
    pub work: f64,
    /// Frustrated hops so far, summed over the ensemble.
    pub frustrated_count: u64,
    /// `|<sigma> - <a_pp>|`.
    pub consistency_gap: f64,
    pub mean_a_pp: f64,
    /// Mean electronic energy change from hops so far.
    pub hop_energy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct FrameSums {
    upper: u64,
    a_pp: f64,
    alpha: f64,
    beta: f64,
    energy: f64,
    work: f64,
    hop_energy: f64,
    frustrated: u64,
}

impl FrameSums {
    fn add_state<M: TwoStateModel>(&mut self, s: &TrajectoryState, model: &M, frustrated: u64) {
        self.upper += u64::from(s.sigma);
        self.a_pp += s.a_pp;
        self.alpha += s.alpha;
        self.beta += s.beta;
        self.energy += trajectory_energy(s, model);
        self.work += s.work_acc;
        self.hop_energy += s.hop_energy;
        self.frustrated += frustrated;
    }

    fn merge(&mut self, o: &FrameSums) {
        self.upper += o.upper;
        self.a_pp += o.a_pp;
        self.alpha += o.alpha;
        self.beta += o.beta;
        self.energy += o.energy;
        self.work += o.work;
        self.hop_energy += o.hop_energy;
        self.frustrated += o.frustrated;
    }

    fn frame(&self, t: f64, n: usize) -> EnsembleFrame {
        let inv = 1.0 / n as f64;
        let p_plus = self.upper as f64 * inv;
        let mean_a_pp = self.a_pp * inv;
        EnsembleFrame {
            t,
            p_plus,
            p_minus: 1.0 - p_plus,
            mean_alpha: self.alpha * inv,
            mean_beta: self.beta * inv,
            energy: self.energy * inv,
            work: self.work * inv,
            frustrated_count: self.frustrated,
            consistency_gap: (p_plus - mean_a_pp).abs(),
            mean_a_pp,
            hop_energy: self.hop_energy * inv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub frames: Vec<EnsembleFrame>,
    pub final_states: Vec<TrajectoryState>,
}

struct ChunkResult {
    sums: Vec<FrameSums>,
    finals: Vec<TrajectoryState>,
}

/// Propagates member `index` of the ensemble described by `cfg`, calling
/// `observe(step, state, outcome)` after every step (and once with step 0 and
/// no outcome). Uses the same random streams as [`run_ensemble`].
pub fn propagate_member<F>(
    cfg: &RunConfig,
    index: usize,
    mut observe: F,
) -> Result<TrajectoryState, RunError>
where
    F: FnMut(usize, &TrajectoryState, Option<&HopOutcome>),
{
    cfg.validate()?;
    let stepper = Stepper::new(&cfg.model, cfg.engine, cfg.dt);
    let mut state = sample_one(&cfg.initial, cfg.seed, index);
    let mut rng = trajectory_rng(cfg.seed, index, Stream::Hopping);
    observe(0, &state, None);
    for step in 1..=cfg.n_steps() {
        let (next, outcome) = stepper
            .step(&state, &mut rng)
            .map_err(|source| RunError::Trajectory { index, source })?;
        state = next;
        observe(step, &state, Some(&outcome));
    }
    Ok(state)
}

fn run_chunk(
    cfg: &RunConfig,
    frame_steps: &[usize],
    range: std::ops::Range<usize>,
) -> Result<ChunkResult, RunError> {
    let model = &cfg.model;
    let mut sums = vec![FrameSums::default(); frame_steps.len()];
    let mut finals = Vec::with_capacity(range.len());
    for index in range {
        let mut frustrated = 0u64;
        let mut next_frame = 0;
        let last = propagate_member(cfg, index, |step, state, outcome| {
            if outcome.is_some_and(|o| o.kind == HopKind::Frustrated) {
                frustrated += 1;
            }
            if frame_steps.get(next_frame) == Some(&step) {
                sums[next_frame].add_state(state, model, frustrated);
                next_frame += 1;
            }
        })?;
        finals.push(last);
    }
    Ok(ChunkResult { sums, finals })
}

/// Propagates the ensemble in parallel. See [`run_ensemble_with`].
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleOutput, RunError> {
    run_ensemble_with(cfg, Execution::Parallel)
}

/// Propagates `cfg.n_traj` independent trajectories and reduces them into
/// frames at [`RunConfig::frame_steps`]. The first failing trajectory (lowest
/// index) aborts the run.
pub fn run_ensemble_with(cfg: &RunConfig, exec: Execution) -> Result<EnsembleOutput, RunError> {
    cfg.validate()?;
    let frame_steps = cfg.frame_steps();
    let chunks: Vec<_> = (0..cfg.n_traj)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(cfg.n_traj))
        .collect();
    let results: Vec<Result<ChunkResult, RunError>> = match exec {
        Execution::Serial => chunks
            .into_iter()
            .map(|r| run_chunk(cfg, &frame_steps, r))
            .collect(),
        Execution::Parallel => chunks
            .into_par_iter()
            .map(|r| run_chunk(cfg, &frame_steps, r))
            .collect(),
    };

    let mut total = vec![FrameSums::default(); frame_steps.len()];
    let mut final_states = Vec::with_capacity(cfg.n_traj);
    for chunk in results {
        let chunk = chunk?;
        for (acc, s) in total.iter_mut().zip(&chunk.sums) {
            acc.merge(s);
        }
        final_states.extend(chunk.finals);
    }
    let frames = total
        .iter()
        .zip(&frame_steps)
        .map(|(s, &step)| s.frame(step as f64 * cfg.dt, cfg.n_traj))
        .collect();
    Ok(EnsembleOutput {
        frames,
        final_states,
    })
}

/// Maxima of the run diagnostics over a frame series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub max_consistency_gap: f64,
    pub frustrated_total: u64,
    /// `max_t |E(t) - E(0)|`.
    pub max_energy_drift: f64,
    pub final_energy_drift: f64,
    /// `max_t |E(t) - E(0) - W(t) - hop_energy(t)|`; integrator error only.
    pub max_work_energy_residual: f64,
}

/// Summarises the consistency diagnostics; `None` for an empty series.
pub fn consistency_report(frames: &[EnsembleFrame]) -> Option<ConsistencyReport> {
    let first = frames.first()?;
    let last = frames.last()?;
    let e0 = first.energy;
    let mut report = ConsistencyReport {
        max_consistency_gap: 0.0,
        frustrated_total: last.frustrated_count,
        max_energy_drift: 0.0,
        final_energy_drift: last.energy - e0,
        max_work_energy_residual: 0.0,
    };
    for f in frames {
        report.max_consistency_gap = report.max_consistency_gap.max(f.consistency_gap);
        report.max_energy_drift = report.max_energy_drift.max((f.energy - e0).abs());
        let residual = f.energy - e0 - (f.work - first.work) - (f.hop_energy - first.hop_energy);
        report.max_work_energy_residual = report.max_work_energy_residual.max(residual.abs());
    }
    Some(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(engine: EngineKind, n: usize) -> RunConfig {
        RunConfig {
            engine,
            n_traj: n,
            t_final: 1000.0,
            ..RunConfig::default()
        }
    }

    #[test]
    fn sampling_moments() {
        let ic = InitialCondition::default();
        let n = 100_000;
        let states = sample_initial(&ic, n, 9);
        let mean_p = states.iter().map(|s| s.pk).sum::<f64>() / n as f64;
        let mean_q = states.iter().map(|s| s.q).sum::<f64>() / n as f64;
        let var_p = states.iter().map(|s| (s.pk - mean_p).powi(2)).sum::<f64>() / n as f64;
        let se = ic.sigma_p() / (n as f64).sqrt();
        assert!((mean_p - 10.0).abs() < 3.0 * se);
        assert!((mean_q + 5.0).abs() < 3.0 / (n as f64).sqrt());
        assert!((var_p.sqrt() - 0.5).abs() < 0.01);
        assert!(states
            .iter()
            .all(|s| s.sigma == 1 && s.a_pp == 1.0 && s.alpha == 0.0 && s.beta == 0.0));
    }

    #[test]
    fn sampling_is_deterministic_and_seed_dependent() {
        let ic = InitialCondition::default();
        let a = sample_initial(&ic, 500, 1);
        let b = sample_initial(&ic, 500, 1);
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.q.to_bits() == y.q.to_bits() && x.pk.to_bits() == y.pk.to_bits()));
        let c = sample_initial(&ic, 500, 2);
        assert_ne!(a[0].q, c[0].q);
        // a prefix does not depend on the ensemble size
        let d = sample_initial(&ic, 10, 1);
        assert_eq!(&a[..10], &d[..]);
    }

    #[test]
    fn lower_surface_sampling_sets_occupation() {
        let ic = InitialCondition {
            surface0: Surface::Lower,
            ..Default::default()
        };
        let s = sample_initial(&ic, 5, 0);
        assert!(s.iter().all(|s| s.sigma == 0 && s.a_pp == 0.0));
    }

    #[test]
    fn frame_schedule() {
        let cfg = RunConfig {
            t_final: 10.0,
            dt: 1.0,
            stride: 4,
            ..RunConfig::default()
        };
        assert_eq!(cfg.frame_steps(), vec![0, 4, 8, 10]);
        assert_eq!(RunConfig::default().frame_steps().len(), 251);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            RunConfig {
                n_traj: 0,
                ..RunConfig::default()
            },
            RunConfig {
                dt: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                t_final: -1.0,
                ..RunConfig::default()
            },
            RunConfig {
                stride: 0,
                ..RunConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(run_ensemble(&cfg), Err(RunError::Config(_))));
        }
    }

    #[test]
    fn born_oppenheimer_lower_surface_stays_put() {
        let cfg = RunConfig {
            engine: EngineKind::BornOppenheimer,
            n_traj: 1,
            initial: InitialCondition {
                q0: -20.0,
                surface0: Surface::Lower,
                ..Default::default()
            },
            t_final: 500.0,
            ..RunConfig::default()
        };
        let out = run_ensemble(&cfg).unwrap();
        assert!(out
            .frames
            .iter()
            .all(|f| f.p_minus == 1.0 && f.consistency_gap == 0.0));
        let r = consistency_report(&out.frames).unwrap();
        assert_eq!(r.max_consistency_gap, 0.0);
        assert_eq!(r.frustrated_total, 0);
    }

    #[test]
    fn populations_sum_to_one() {
        let out = run_ensemble(&small(EngineKind::Qtsh, 300)).unwrap();
        for f in &out.frames {
            assert_eq!(f.p_plus + f.p_minus, 1.0);
        }
        assert!(out.frames.iter().all(|f| f.frustrated_count == 0));
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        for engine in [EngineKind::Qtsh, EngineKind::Fssh] {
            let cfg = small(engine, 200);
            let a = run_ensemble_with(&cfg, Execution::Serial).unwrap();
            let b = run_ensemble_with(&cfg, Execution::Parallel).unwrap();
            assert_eq!(a.frames, b.frames);
            assert_eq!(a.final_states, b.final_states);
        }
    }

    #[test]
    fn fssh_low_momentum_frustrates() {
        let cfg = RunConfig {
            engine: EngineKind::Fssh,
            n_traj: 200,
            initial: InitialCondition {
                q0: -5.0,
                k0: 5.0,
                sigma_q: 1.0,
                surface0: Surface::Lower,
            },
            t_final: 4000.0,
            ..RunConfig::default()
        };
        let out = run_ensemble(&cfg).unwrap();
        let r = consistency_report(&out.frames).unwrap();
        assert!(r.frustrated_total > 0, "{r:?}");
    }

    #[test]
    fn fssh_ensemble_energy_is_conserved() {
        let out = run_ensemble(&small(EngineKind::Fssh, 200)).unwrap();
        let r = consistency_report(&out.frames).unwrap();
        assert!(r.max_energy_drift < 1e-9, "{r:?}");
    }

    #[test]
    fn qtsh_work_energy_ledger_closes() {
        let out = run_ensemble(&small(EngineKind::Qtsh, 200)).unwrap();
        let r = consistency_report(&out.frames).unwrap();
        assert!(r.max_work_energy_residual < 1e-9, "{r:?}");
    }

    #[test]
    fn member_propagation_matches_ensemble() {
        let cfg = small(EngineKind::Fssh, 70);
        let out = run_ensemble(&cfg).unwrap();
        let mut calls = 0;
        let last = propagate_member(&cfg, 65, |_, _, _| calls += 1).unwrap();
        assert_eq!(calls, cfg.n_steps() + 1);
        assert_eq!(last, out.final_states[65]);
    }

    #[test]
    fn report_of_empty_series_is_none() {
        assert!(consistency_report(&[]).is_none());
    }
}
