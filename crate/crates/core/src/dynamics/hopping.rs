use serde::Serialize;

use super::{derivatives, EngineKind, TrajectoryState};
use crate::model::TwoStateModel;

/// Occupied-state populations at or below this are treated as depleted.
pub const DEPLETION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HopKind {
    NoHop,
    HopUp,
    HopDown,
    /// Up-hop rejected for lack of kinetic energy (FSSH only).
    Frustrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopOutcome {
    pub kind: HopKind,
    /// Momentum change; nonzero only for successful FSSH hops.
    pub delta_pk: f64,
}

impl HopOutcome {
    pub fn none() -> Self {
        HopOutcome {
            kind: HopKind::NoHop,
            delta_pk: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopDirection {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopProbability {
    pub g: f64,
    /// The occupied proxy population vanished while the walker still sits on
    /// that surface; surface occupancy and proxy have lost consistency.
    pub depleted: bool,
}

/// Fewest-switches probability of leaving the occupied surface during `dt`:
/// `g = max(0, -ȧ_occ dt / a_occ)`, clamped to `[0, 1]`.
pub fn hop_probability<M: TwoStateModel>(
    state: &TrajectoryState,
    model: &M,
    engine: EngineKind,
    dt: f64,
) -> HopProbability {
    let a_pp = state.a_pp.clamp(0.0, 1.0);
    let (a_occ, rate) = {
        let da_pp = derivatives(state, model, engine).da_pp;
        if state.sigma == 1 {
            (a_pp, da_pp)
        } else {
            (1.0 - a_pp, -da_pp)
        }
    };
    if a_occ <= DEPLETION_EPS {
        return HopProbability {
            g: 0.0,
            depleted: true,
        };
    }
    HopProbability {
        g: (-rate * dt / a_occ).clamp(0.0, 1.0),
        depleted: false,
    }
}

/// Energy-conserving FSSH rescaling: solves
/// `(pk + Δ)²/2m = pk²/2m ± gap` (+ for down-hops) for the root that keeps the
/// sign of `pk`. Returns `None` when an up-hop lacks the kinetic energy.
pub fn fssh_momentum_jump(pk: f64, gap: f64, mass: f64, direction: HopDirection) -> Option<f64> {
    let kinetic = 0.5 * pk * pk / mass;
    let target = match direction {
        HopDirection::Down => kinetic + gap,
        HopDirection::Up => kinetic - gap,
    };
    if target < 0.0 {
        return None;
    }
    let new_pk = pk.signum() * (2.0 * mass * target).sqrt();
    Some(new_pk - pk)
}

/// Stochastic hop test with the uniform draw `u`. QTSH hops flip `sigma` only;
/// FSSH hops also rescale `pk` and may be frustrated.
pub fn attempt_hop<M: TwoStateModel>(
    state: &TrajectoryState,
    u: f64,
    engine: EngineKind,
    model: &M,
    dt: f64,
) -> (TrajectoryState, HopOutcome) {
    if !engine.hops() {
        return (*state, HopOutcome::none());
    }
    let prob = hop_probability(state, model, engine, dt);
    if u >= prob.g {
        return (*state, HopOutcome::none());
    }

    let ad = model.adiabatic(state.q);
    let (direction, kind) = if state.sigma == 1 {
        (HopDirection::Down, HopKind::HopDown)
    } else {
        (HopDirection::Up, HopKind::HopUp)
    };
    let mut next = *state;
    let mut delta_pk = 0.0;
    if engine == EngineKind::Fssh {
        match fssh_momentum_jump(state.pk, ad.omega, model.mass(), direction) {
            Some(dp) => {
                delta_pk = dp;
                next.pk += dp;
            }
            None => {
                return (
                    *state,
                    HopOutcome {
                        kind: HopKind::Frustrated,
                        delta_pk: 0.0,
                    },
                )
            }
        }
    }
    next.sigma = 1 - state.sigma;
    let dsigma = f64::from(next.sigma) - f64::from(state.sigma);
    next.hop_energy += ad.omega * dsigma;
    (next, HopOutcome { kind, delta_pk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rk4_step, trajectory_energy, Stepper};
    use crate::model::ModelPotential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn crossing_state(alpha: f64) -> TrajectoryState {
        let mut s = TrajectoryState::on_surface(0.0, 10.0, 1);
        s.alpha = alpha;
        s
    }

    #[test]
    fn no_coherence_no_hop() {
        let m = ModelPotential::default();
        let p = hop_probability(&crossing_state(0.0), &m, EngineKind::Qtsh, 0.25);
        assert_eq!(p.g, 0.0);
        assert!(!p.depleted);
    }

    #[test]
    fn fewest_switches_quotient() {
        // d = 4, v = 0.005: da_pp = -2 * 0.02 * 0.5 = -0.02 per unit time
        let m = ModelPotential::default();
        let p = hop_probability(&crossing_state(0.5), &m, EngineKind::Qtsh, 1.0);
        assert!((p.g - 0.02).abs() < 1e-15);
    }

    #[test]
    fn inflow_gives_zero_probability() {
        let m = ModelPotential::default();
        let mut s = crossing_state(-0.5);
        s.a_pp = 0.5;
        assert_eq!(hop_probability(&s, &m, EngineKind::Qtsh, 1.0).g, 0.0);
        // same state on the lower surface sees outflow
        s.sigma = 0;
        let g = hop_probability(&s, &m, EngineKind::Qtsh, 1.0).g;
        assert!((g - 0.04).abs() < 1e-15);
    }

    #[test]
    fn depleted_population_is_flagged() {
        let m = ModelPotential::default();
        let mut s = crossing_state(0.5);
        s.a_pp = 0.0;
        let p = hop_probability(&s, &m, EngineKind::Qtsh, 1.0);
        assert_eq!(p.g, 0.0);
        assert!(p.depleted);
    }

    #[test]
    fn fssh_down_jump_solves_quadratic() {
        let dp = fssh_momentum_jump(10.0, 0.004, 2000.0, HopDirection::Down).unwrap();
        assert!((dp - 0.770_329_614_269_008).abs() < 1e-12);
        let dp = fssh_momentum_jump(-10.0, 0.004, 2000.0, HopDirection::Down).unwrap();
        assert!((dp + 0.770_329_614_269_008).abs() < 1e-12);
    }

    #[test]
    fn fssh_up_jump_frustrated_at_low_momentum() {
        assert_eq!(
            fssh_momentum_jump(3.0, 0.004, 2000.0, HopDirection::Up),
            None
        );
        // pk = 10: sqrt(100 - 16) - 10
        let dp = fssh_momentum_jump(10.0, 0.004, 2000.0, HopDirection::Up).unwrap();
        assert!((dp - (84f64.sqrt() - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn fssh_down_hop_at_crossing() {
        let m = ModelPotential::default();
        let s = crossing_state(0.5);
        let (next, out) = attempt_hop(&s, 0.0, EngineKind::Fssh, &m, 1.0);
        assert_eq!(out.kind, HopKind::HopDown);
        assert!((next.pk - 116f64.sqrt()).abs() < 1e-12);
        assert!((out.delta_pk - 0.770_329_614_269_008).abs() < 1e-12);
        assert_eq!(next.sigma, 0);
        let de = trajectory_energy(&next, &m) - trajectory_energy(&s, &m);
        assert!(de.abs() < 1e-15);
        assert!((next.hop_energy + 0.004).abs() < 1e-15);
    }

    #[test]
    fn fssh_frustrated_up_hop_leaves_state_untouched() {
        let m = ModelPotential::default();
        let mut s = TrajectoryState::on_surface(0.0, 3.0, 0);
        s.a_pp = 0.2;
        s.alpha = -0.3;
        let g = hop_probability(&s, &m, EngineKind::Fssh, 1.0).g;
        assert!(g > 0.0);
        let (next, out) = attempt_hop(&s, 0.0, EngineKind::Fssh, &m, 1.0);
        assert_eq!(out.kind, HopKind::Frustrated);
        assert_eq!(next, s);
    }

    #[test]
    fn qtsh_hop_only_flips_surface() {
        let m = ModelPotential::default();
        let s = crossing_state(0.5);
        let (next, out) = attempt_hop(&s, 0.0, EngineKind::Qtsh, &m, 1.0);
        assert_eq!(out.kind, HopKind::HopDown);
        assert_eq!(out.delta_pk, 0.0);
        assert_eq!(next.pk.to_bits(), s.pk.to_bits());
        assert_eq!(next.sigma, 0);
        assert_eq!(
            (next.alpha, next.beta, next.a_pp),
            (s.alpha, s.beta, s.a_pp)
        );
    }

    #[test]
    fn draw_above_probability_does_not_hop() {
        let m = ModelPotential::default();
        let s = crossing_state(0.5);
        let (next, out) = attempt_hop(&s, 0.5, EngineKind::Qtsh, &m, 1.0);
        assert_eq!(out.kind, HopKind::NoHop);
        assert_eq!(next, s);
        let (_, out) = attempt_hop(&s, 0.0, EngineKind::BornOppenheimer, &m, 1.0);
        assert_eq!(out.kind, HopKind::NoHop);
    }

    #[test]
    fn fssh_trajectory_conserves_energy_through_hops() {
        let m = ModelPotential::default();
        let stepper = Stepper::new(&m, EngineKind::Fssh, 0.25);
        let mut hops = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = TrajectoryState::on_surface(-5.0, 10.0, 1);
            let e0 = trajectory_energy(&s, &m);
            for _ in 0..10_000 {
                let (next, out) = stepper.step(&s, &mut rng).unwrap();
                if out.kind != HopKind::NoHop {
                    hops += 1;
                }
                s = next;
                assert!((trajectory_energy(&s, &m) - e0).abs() < 1e-9);
            }
        }
        assert!(hops > 0);
    }

    #[test]
    fn rk4_then_hop_matches_stepper() {
        let m = ModelPotential::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let stepper = Stepper::new(&m, EngineKind::Qtsh, 0.25);
        let mut a = TrajectoryState::on_surface(-1.0, 10.0, 1);
        let mut b = a;
        for _ in 0..1000 {
            a = stepper.step(&a, &mut rng).unwrap().0;
            let mid = rk4_step(&b, 0.25, &m, EngineKind::Qtsh).unwrap();
            let u: f64 = rand::Rng::random(&mut rng2);
            b = attempt_hop(&mid, u, EngineKind::Qtsh, &m, 0.25).0;
        }
        assert_eq!(a, b);
    }
}
