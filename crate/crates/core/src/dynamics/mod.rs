//! Single-trajectory propagation for the Born–Oppenheimer, FSSH and QTSH engines.
//!
//! Every engine moves `(q, pk)` with the kinematic momentum `pk = m dq/dt` and
//! carries a proxy electronic density matrix `(a_pp, alpha + i beta)` in the
//! adiabatic basis. The engines differ only in how the nuclei feel the
//! electronic transition:
//!
//! | engine | force on `pk`                    | proxy coupling | hop            |
//! |--------|----------------------------------|----------------|----------------|
//! | BO     | `-V'(q, sigma)`                  | off            | never          |
//! | FSSH   | `-V'(q, sigma)`                  | on             | flip + rescale |
//! | QTSH   | `-V'(q, sigma) + 2 ω d alpha`    | on             | flip only      |

mod hopping;
mod impulse;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;
use crate::model::{AdiabaticPoint, TwoStateModel};

pub use hopping::{
    attempt_hop, fssh_momentum_jump, hop_probability, HopDirection, HopKind, HopOutcome,
    HopProbability, DEPLETION_EPS,
};
pub use impulse::{
    frozen_coupling_impulse, frozen_position_profile_impulse, impulsive_jump,
    quantum_force_impulse, ImpulseTrace,
};

/// Phase-space and electronic variables of one walker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub q: f64,
    /// Kinematic momentum, `m * dq/dt`.
    pub pk: f64,
    /// Occupied surface: 1 = upper, 0 = lower.
    pub sigma: u8,
    pub alpha: f64,
    pub beta: f64,
    /// Continuous upper-state population of the proxy density matrix.
    pub a_pp: f64,
    /// Accumulated work of the quantum force on the nuclei.
    pub work_acc: f64,
    /// Accumulated electronic energy change from hops, `Σ ħω Δsigma`.
    pub hop_energy: f64,
    pub t: f64,
}

impl TrajectoryState {
    /// A state with no coherence whose proxy population matches the occupied surface.
    pub fn on_surface(q: f64, pk: f64, sigma: u8) -> Self {
        TrajectoryState {
            q,
            pk,
            sigma,
            alpha: 0.0,
            beta: 0.0,
            a_pp: f64::from(sigma),
            work_acc: 0.0,
            hop_energy: 0.0,
            t: 0.0,
        }
    }

    pub fn a_mm(&self) -> f64 {
        1.0 - self.a_pp
    }

    /// Canonical momentum `p = pk + 2ħ beta d(q)`.
    pub fn canonical_momentum<M: TwoStateModel>(&self, model: &M) -> f64 {
        self.pk + 2.0 * self.beta * model.adiabatic(self.q).d
    }

    fn is_finite(&self) -> bool {
        [
            self.q,
            self.pk,
            self.alpha,
            self.beta,
            self.a_pp,
            self.work_acc,
            self.t,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    #[serde(rename = "bo")]
    BornOppenheimer,
    Fssh,
    Qtsh,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::BornOppenheimer => "bo",
            EngineKind::Fssh => "fssh",
            EngineKind::Qtsh => "qtsh",
        }
    }

    pub fn hops(self) -> bool {
        !matches!(self, EngineKind::BornOppenheimer)
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bo" | "born-oppenheimer" => Ok(EngineKind::BornOppenheimer),
            "fssh" => Ok(EngineKind::Fssh),
            "qtsh" => Ok(EngineKind::Qtsh),
            other => Err(format!(
                "unknown engine `{other}` (expected bo, fssh or qtsh)"
            )),
        }
    }
}

/// Time derivatives of the integrated variables. `dwork` is the power of the
/// quantum force, nonzero only for QTSH.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Derivatives {
    pub dq: f64,
    pub dpk: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub da_pp: f64,
    pub dwork: f64,
}

/// Quantum force `2ħ ω d alpha`.
#[inline]
pub fn quantum_force(ad: &AdiabaticPoint, alpha: f64) -> f64 {
    2.0 * ad.omega * ad.d * alpha
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn rates(
    ad: &AdiabaticPoint,
    mass: f64,
    sigma: u8,
    engine: EngineKind,
    pk: f64,
    alpha: f64,
    beta: f64,
    a_pp: f64,
) -> Derivatives {
    let v = pk / mass;
    let classical = -ad.gradient(sigma);
    match engine {
        EngineKind::BornOppenheimer => Derivatives {
            dq: v,
            dpk: classical,
            dalpha: ad.omega * beta,
            dbeta: -ad.omega * alpha,
            da_pp: 0.0,
            dwork: 0.0,
        },
        EngineKind::Fssh | EngineKind::Qtsh => {
            let dv = ad.d * v;
            let (force_q, dwork) = if engine == EngineKind::Qtsh {
                let f = quantum_force(ad, alpha);
                (f, f * v)
            } else {
                (0.0, 0.0)
            };
            Derivatives {
                dq: v,
                dpk: classical + force_q,
                dalpha: ad.omega * beta + dv * (2.0 * a_pp - 1.0),
                dbeta: -ad.omega * alpha,
                da_pp: -2.0 * dv * alpha,
                dwork,
            }
        }
    }
}

/// Equations of motion evaluated at `state`.
pub fn derivatives<M: TwoStateModel>(
    state: &TrajectoryState,
    model: &M,
    engine: EngineKind,
) -> Derivatives {
    let ad = model.adiabatic(state.q);
    rates(
        &ad,
        model.mass(),
        state.sigma,
        engine,
        state.pk,
        state.alpha,
        state.beta,
        state.a_pp,
    )
}

/// One classical fourth-order Runge–Kutta step of the coupled nuclear and proxy
/// variables. The quantum-force work is carried as an extra quadrature variable
/// with the same stage weights.
pub fn rk4_step<M: TwoStateModel>(
    state: &TrajectoryState,
    dt: f64,
    model: &M,
    engine: EngineKind,
) -> Result<TrajectoryState, DynamicsError> {
    let mass = model.mass();
    let sigma = state.sigma;
    let eval = |q: f64, pk: f64, alpha: f64, beta: f64, a_pp: f64| {
        let ad = model.adiabatic(q);
        rates(&ad, mass, sigma, engine, pk, alpha, beta, a_pp)
    };

    let s = state;
    let k1 = eval(s.q, s.pk, s.alpha, s.beta, s.a_pp);
    let h = 0.5 * dt;
    let k2 = eval(
        s.q + h * k1.dq,
        s.pk + h * k1.dpk,
        s.alpha + h * k1.dalpha,
        s.beta + h * k1.dbeta,
        s.a_pp + h * k1.da_pp,
    );
    let k3 = eval(
        s.q + h * k2.dq,
        s.pk + h * k2.dpk,
        s.alpha + h * k2.dalpha,
        s.beta + h * k2.dbeta,
        s.a_pp + h * k2.da_pp,
    );
    let k4 = eval(
        s.q + dt * k3.dq,
        s.pk + dt * k3.dpk,
        s.alpha + dt * k3.dalpha,
        s.beta + dt * k3.dbeta,
        s.a_pp + dt * k3.da_pp,
    );

    let w = dt / 6.0;
    let combine = |f: fn(&Derivatives) -> f64| w * (f(&k1) + 2.0 * f(&k2) + 2.0 * f(&k3) + f(&k4));
    let next = TrajectoryState {
        q: s.q + combine(|k| k.dq),
        pk: s.pk + combine(|k| k.dpk),
        sigma,
        alpha: s.alpha + combine(|k| k.dalpha),
        beta: s.beta + combine(|k| k.dbeta),
        a_pp: s.a_pp + combine(|k| k.da_pp),
        work_acc: s.work_acc + combine(|k| k.dwork),
        hop_energy: s.hop_energy,
        t: s.t + dt,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFinite { t: next.t })
    }
}

/// Trajectory energy in kinematic form, `pk²/2m + V(q, sigma)`.
pub fn trajectory_energy<M: TwoStateModel>(state: &TrajectoryState, model: &M) -> f64 {
    let ad = model.adiabatic(state.q);
    0.5 * state.pk * state.pk / model.mass() + ad.potential(state.sigma)
}

/// Trajectory energy in canonical form, `p²/2m + V(q, sigma) - 2ħ beta d pk/m`,
/// which exceeds the kinematic form by `2ħ² beta² d² / m`.
pub fn energy_canonical<M: TwoStateModel>(state: &TrajectoryState, model: &M) -> f64 {
    let ad = model.adiabatic(state.q);
    let m = model.mass();
    let p = state.pk + 2.0 * state.beta * ad.d;
    0.5 * p * p / m + ad.potential(state.sigma) - 2.0 * state.beta * ad.d * state.pk / m
}

/// Advances one trajectory by RK4 steps followed by at most one hop test per step.
#[derive(Debug, Clone, Copy)]
pub struct Stepper<'m, M> {
    pub model: &'m M,
    pub engine: EngineKind,
    pub dt: f64,
}

impl<'m, M: TwoStateModel> Stepper<'m, M> {
    pub fn new(model: &'m M, engine: EngineKind, dt: f64) -> Self {
        Stepper { model, engine, dt }
    }

    /// One step with the hop decision drawn from `rng`. A uniform number is
    /// consumed on every step for the hopping engines, so the stream position
    /// depends only on the step count.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &TrajectoryState,
        rng: &mut R,
    ) -> Result<(TrajectoryState, HopOutcome), DynamicsError> {
        let next = rk4_step(state, self.dt, self.model, self.engine)?;
        if !self.engine.hops() {
            return Ok((next, HopOutcome::none()));
        }
        let u: f64 = rng.random();
        Ok(attempt_hop(&next, u, self.engine, self.model, self.dt))
    }
}
