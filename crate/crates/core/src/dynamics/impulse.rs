//! Impulsive momentum-jump results for localized transitions and the
//! quadratures used to check them against the continuous quantum force.

use std::f64::consts::PI;

use super::{quantum_force, rk4_step, EngineKind, HopDirection, TrajectoryState};
use crate::error::DynamicsError;
use crate::model::TwoStateModel;

/// Impulsive momentum jump `±ħω(q*) d(q*) m / (d(q*) pk)`, `+` for down
/// transitions. In one dimension this is `±ħω m / pk`.
pub fn impulsive_jump<M: TwoStateModel>(
    model: &M,
    q_star: f64,
    pk: f64,
    direction: HopDirection,
) -> Result<f64, DynamicsError> {
    let ad = model.adiabatic(q_star);
    let denom = ad.d * pk;
    if denom == 0.0 || !denom.is_finite() {
        return Err(DynamicsError::SingularJump { q_star, pk });
    }
    let jump = ad.omega * ad.d * model.mass() / denom;
    Ok(match direction {
        HopDirection::Down => jump,
        HopDirection::Up => -jump,
    })
}

/// Localized coherence `alpha(phi)` for a walker that stays in one diabatic
/// state while crossing, given the sign of `dphi/dt` and the direction of the
/// adiabatic transition.
fn localized_alpha_sign(phi_rate: f64, direction: HopDirection) -> f64 {
    // Down with phi decreasing means the walker sits in diabat 2, where
    // alpha = +sin(phi)/2; the other three cases follow by symmetry.
    let s = -phi_rate.signum();
    match direction {
        HopDirection::Down => s,
        HopDirection::Up => -s,
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// `2ħω(q*) d(q*) ∫ alpha dt` with everything frozen at `q*`: the mixing angle
/// sweeps through `[0, π]` at the constant rate `-2 d(q*) pk / m` and
/// `alpha = ±sin(phi)/2`. Equals [`impulsive_jump`] up to quadrature error.
pub fn frozen_coupling_impulse<M: TwoStateModel>(
    model: &M,
    q_star: f64,
    pk: f64,
    direction: HopDirection,
    intervals: usize,
) -> Result<f64, DynamicsError> {
    let ad = model.adiabatic(q_star);
    let phi_rate = -2.0 * ad.d * pk / model.mass();
    if phi_rate == 0.0 || !phi_rate.is_finite() {
        return Err(DynamicsError::SingularJump { q_star, pk });
    }
    let sign = localized_alpha_sign(phi_rate, direction);
    let phi0 = if phi_rate < 0.0 { PI } else { 0.0 };
    let duration = PI / phi_rate.abs();
    let integral = simpson(
        |t| sign * 0.5 * (phi0 + phi_rate * t).sin(),
        0.0,
        duration,
        intervals,
    );
    Ok(2.0 * ad.omega * ad.d * integral)
}

/// Same quadrature, but with `phi(t)` taken from the model's mixing-angle
/// profile along the straight line `q = q* + (pk/m) t` over
/// `|q - q*| <= half_width`. Gap and coupling stay frozen at `q*`.
pub fn frozen_position_profile_impulse<M: TwoStateModel>(
    model: &M,
    q_star: f64,
    pk: f64,
    direction: HopDirection,
    half_width: f64,
    intervals: usize,
) -> Result<f64, DynamicsError> {
    let ad = model.adiabatic(q_star);
    let v = pk / model.mass();
    let phi_rate = -2.0 * ad.d * v;
    if phi_rate == 0.0 || !phi_rate.is_finite() {
        return Err(DynamicsError::SingularJump { q_star, pk });
    }
    let sign = localized_alpha_sign(phi_rate, direction);
    let t_half = half_width / v.abs();
    let integral = simpson(
        |t| sign * 0.5 * model.adiabatic(q_star + v * t).phi.sin(),
        -t_half,
        t_half,
        intervals,
    );
    Ok(2.0 * ad.omega * ad.d * integral)
}

/// Diagnostics of a single QTSH trajectory propagated without hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseTrace {
    /// `∫ F^Q dt` by the trapezoidal rule on step endpoints.
    pub impulse: f64,
    /// `∫ F^Q v dt` as accumulated by the integrator.
    pub work: f64,
    /// Kinematic momentum when the walker first passes `q_star`, if it does.
    pub pk_at_crossing: Option<f64>,
    pub min_phi: f64,
    pub max_phi: f64,
    pub final_state: TrajectoryState,
}

/// Propagates `start` under the QTSH equations (surface fixed) for `steps`
/// steps of `dt`, integrating the quantum-force impulse and work.
pub fn quantum_force_impulse<M: TwoStateModel>(
    model: &M,
    start: TrajectoryState,
    q_star: f64,
    dt: f64,
    steps: usize,
) -> Result<ImpulseTrace, DynamicsError> {
    let mut s = start;
    let force = |st: &TrajectoryState| quantum_force(&model.adiabatic(st.q), st.alpha);
    let mut f_prev = force(&s);
    let mut impulse = 0.0;
    let mut pk_at_crossing = None;
    let phi0 = model.adiabatic(s.q).phi;
    let (mut min_phi, mut max_phi) = (phi0, phi0);
    for _ in 0..steps {
        let next = rk4_step(&s, dt, model, EngineKind::Qtsh)?;
        let f_next = force(&next);
        impulse += 0.5 * dt * (f_prev + f_next);
        if pk_at_crossing.is_none() && (s.q - q_star) * (next.q - q_star) <= 0.0 && next.q != s.q {
            let frac = (q_star - s.q) / (next.q - s.q);
            pk_at_crossing = Some(s.pk + frac * (next.pk - s.pk));
        }
        let phi = model.adiabatic(next.q).phi;
        min_phi = min_phi.min(phi);
        max_phi = max_phi.max(phi);
        f_prev = f_next;
        s = next;
    }
    Ok(ImpulseTrace {
        impulse,
        work: s.work_acc - start.work_acc,
        pk_at_crossing,
        min_phi,
        max_phi,
        final_state: s,
    })
}
