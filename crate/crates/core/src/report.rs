//! Run summaries, engine-versus-reference comparisons and momentum-jump tables.

use serde::{Deserialize, Serialize};

use crate::dynamics::{fssh_momentum_jump, impulsive_jump, HopDirection};
use crate::ensemble::EnsembleFrame;
use crate::error::RunError;
use crate::model::TwoStateModel;

/// Pass/fail thresholds applied by [`Comparison::verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `max_t |P+ - P+_ref|`
    pub p_plus: f64,
    /// `max_t |E(t) - E(0)|` of the trajectory run.
    pub energy_drift: f64,
    /// `max_t |<sigma> - <a_pp>|`
    pub consistency_gap: f64,
    /// Relative band around `gap * transfer` for the final quantum-force work.
    pub work_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            p_plus: 0.05,
            energy_drift: 1e-4,
            consistency_gap: 0.02,
            work_relative: 0.10,
        }
    }
}

/// Scalar summary of a frame series; every field is recomputable from the
/// columns written to the frame CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub t_final: f64,
    pub final_p_plus: f64,
    pub final_p_minus: f64,
    pub final_alpha: f64,
    pub final_beta: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_energy_drift: f64,
    pub final_work: f64,
    pub max_consistency_gap: f64,
    pub frustrated_total: u64,
}

pub fn summarize(frames: &[EnsembleFrame]) -> Option<RunSummary> {
    let first = frames.first()?;
    let last = frames.last()?;
    let e0 = first.energy;
    Some(RunSummary {
        frames: frames.len(),
        t_final: last.t,
        final_p_plus: last.p_plus,
        final_p_minus: last.p_minus,
        final_alpha: last.mean_alpha,
        final_beta: last.mean_beta,
        initial_energy: e0,
        final_energy: last.energy,
        max_energy_drift: frames
            .iter()
            .map(|f| (f.energy - e0).abs())
            .fold(0.0, f64::max),
        final_work: last.work,
        max_consistency_gap: frames.iter().map(|f| f.consistency_gap).fold(0.0, f64::max),
        frustrated_total: last.frustrated_count,
    })
}

/// One aligned output time of a trajectory run and the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub p_plus: f64,
    pub p_plus_ref: f64,
    pub p_minus: f64,
    pub p_minus_ref: f64,
    pub alpha: f64,
    pub alpha_ref: f64,
    pub beta: f64,
    pub beta_ref: f64,
    pub energy: f64,
    pub energy_ref: f64,
    pub work: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Deviation {
    pub max_abs: f64,
    pub final_abs: f64,
}

impl Deviation {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut d = Deviation::default();
        for (a, b) in pairs {
            let e = (a - b).abs();
            d.max_abs = d.max_abs.max(e);
            d.final_abs = e;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub p_plus: Deviation,
    pub p_minus: Deviation,
    pub alpha: Deviation,
    pub beta: Deviation,
    pub run: RunSummary,
    pub reference: RunSummary,
    /// `P-(t_final) - P-(0)` of the reference.
    pub reference_transfer: f64,
}

/// Checks of one comparison against [`Tolerances`]; `None` where a check does
/// not apply to the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub p_plus_ok: bool,
    pub energy_ok: bool,
    pub consistency_ok: bool,
    pub work_ok: Option<bool>,
    pub expected_work: f64,
    pub pass: bool,
}

/// Aligns two frame series; their time grids must coincide.
pub fn compare(run: &[EnsembleFrame], reference: &[EnsembleFrame]) -> Result<Comparison, RunError> {
    if run.len() != reference.len() || run.is_empty() {
        return Err(RunError::FrameMismatch(format!(
            "{} frames against {} reference frames",
            run.len(),
            reference.len()
        )));
    }
    for (a, b) in run.iter().zip(reference) {
        if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1.0) {
            return Err(RunError::FrameMismatch(format!(
                "t = {} against t = {}",
                a.t, b.t
            )));
        }
    }
    let rows = run
        .iter()
        .zip(reference)
        .map(|(a, b)| ComparisonRow {
            t: a.t,
            p_plus: a.p_plus,
            p_plus_ref: b.p_plus,
            p_minus: a.p_minus,
            p_minus_ref: b.p_minus,
            alpha: a.mean_alpha,
            alpha_ref: b.mean_alpha,
            beta: a.mean_beta,
            beta_ref: b.mean_beta,
            energy: a.energy,
            energy_ref: b.energy,
            work: a.work,
        })
        .collect();
    let pairs =
        |f: fn(&EnsembleFrame) -> f64| run.iter().zip(reference).map(move |(a, b)| (f(a), f(b)));
    let first = &reference[0];
    let last = &reference[reference.len() - 1];
    Ok(Comparison {
        rows,
        p_plus: Deviation::from_pairs(pairs(|f| f.p_plus)),
        p_minus: Deviation::from_pairs(pairs(|f| f.p_minus)),
        alpha: Deviation::from_pairs(pairs(|f| f.mean_alpha)),
        beta: Deviation::from_pairs(pairs(|f| f.mean_beta)),
        run: summarize(run).expect("non-empty"),
        reference: summarize(reference).expect("non-empty"),
        reference_transfer: last.p_minus - first.p_minus,
    })
}

impl Comparison {
    /// `gap` is the crossing gap `ħω(q*)`; `with_work` enables the
    /// quantum-force work check (QTSH only).
    pub fn verdict(&self, tol: &Tolerances, gap: f64, with_work: bool) -> Verdict {
        let expected_work = gap * self.reference_transfer;
        let p_plus_ok = self.p_plus.max_abs <= tol.p_plus;
        let energy_ok = self.run.max_energy_drift <= tol.energy_drift;
        let consistency_ok = self.run.max_consistency_gap <= tol.consistency_gap;
        let work_ok = with_work.then(|| {
            (self.run.final_work - expected_work).abs() <= tol.work_relative * expected_work.abs()
        });
        Verdict {
            p_plus_ok,
            energy_ok,
            consistency_ok,
            work_ok,
            expected_work,
            pass: p_plus_ok && energy_ok && consistency_ok && work_ok.unwrap_or(true),
        }
    }
}

/// Impulsive and FSSH momentum jumps at one momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRow {
    pub pk: f64,
    pub q_star: f64,
    pub gap: f64,
    pub qtsh_down: f64,
    pub qtsh_up: f64,
    pub fssh_down: Option<f64>,
    pub fssh_up: Option<f64>,
    pub up_frustrated: bool,
    pub singular: bool,
    /// `(fssh_down - qtsh_down) / qtsh_down`
    pub rel_discrepancy: f64,
}

pub fn jump_table<M: TwoStateModel>(model: &M, q_star: f64, momenta: &[f64]) -> Vec<JumpRow> {
    let ad = model.adiabatic(q_star);
    let mass = model.mass();
    momenta
        .iter()
        .map(|&pk| {
            let down = impulsive_jump(model, q_star, pk, HopDirection::Down).ok();
            let up = impulsive_jump(model, q_star, pk, HopDirection::Up).ok();
            let fssh_down = fssh_momentum_jump(pk, ad.omega, mass, HopDirection::Down);
            let fssh_up = fssh_momentum_jump(pk, ad.omega, mass, HopDirection::Up);
            let qtsh_down = down.unwrap_or(f64::NAN);
            JumpRow {
                pk,
                q_star,
                gap: ad.omega,
                qtsh_down,
                qtsh_up: up.unwrap_or(f64::NAN),
                fssh_down,
                fssh_up,
                up_frustrated: fssh_up.is_none(),
                singular: down.is_none(),
                rel_discrepancy: fssh_down.map_or(f64::NAN, |f| (f - qtsh_down) / qtsh_down),
            }
        })
        .collect()
}
