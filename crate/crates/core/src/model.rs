//! Two-state diabatic model potentials and their adiabatic decomposition.
//!
//! Conventions (ħ = 1 throughout):
//!
//! * the mixing angle is `phi = atan2(2 V12, V1 - V2)`, which lies in `(0, π)`
//!   whenever `V12 > 0` and is continuous across the crossing;
//! * the upper adiabatic state is `|+> = cos(phi/2)|1> + sin(phi/2)|2>` and the
//!   lower one `|-> = -sin(phi/2)|1> + cos(phi/2)|2>`;
//! * the nonadiabatic coupling is `d = <+|d/dq|-> = -phi'/2`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Diabatic potential matrix and its gradient at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiabaticPoint {
    pub v1: f64,
    pub v2: f64,
    pub v12: f64,
    pub dv1: f64,
    pub dv2: f64,
    pub dv12: f64,
}

/// Adiabatic surfaces, gap, mixing angle and coupling at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticPoint {
    pub v_plus: f64,
    pub v_minus: f64,
    /// Gap frequency; with ħ = 1 this is also the gap energy `V+ - V-`.
    pub omega: f64,
    /// Mixing angle in `[0, π]`.
    pub phi: f64,
    /// Nonadiabatic coupling `-phi'/2`.
    pub d: f64,
    pub dv_plus: f64,
    pub dv_minus: f64,
}

impl AdiabaticPoint {
    /// Potential of the surface selected by `sigma` (1 = upper).
    #[inline]
    pub fn potential(&self, sigma: u8) -> f64 {
        if sigma == 1 {
            self.v_plus
        } else {
            self.v_minus
        }
    }

    /// Gradient of the surface selected by `sigma`.
    #[inline]
    pub fn gradient(&self, sigma: u8) -> f64 {
        if sigma == 1 {
            self.dv_plus
        } else {
            self.dv_minus
        }
    }

    /// Closed-form diagonalisation of a real symmetric 2x2 diabatic matrix.
    pub fn from_diabatic(p: &DiabaticPoint) -> Self {
        let mean = 0.5 * (p.v1 + p.v2);
        let dmean = 0.5 * (p.dv1 + p.dv2);
        let half_diff = 0.5 * (p.v1 - p.v2);
        let dhalf_diff = 0.5 * (p.dv1 - p.dv2);
        let r2 = half_diff * half_diff + p.v12 * p.v12;
        let r = r2.sqrt();

        // dr/dq; the radius has a cusp only at an exact degeneracy.
        let dr = if r > 0.0 {
            (half_diff * dhalf_diff + p.v12 * p.dv12) / r
        } else {
            0.0
        };
        let dphi = if r2 > 0.0 {
            (half_diff * p.dv12 - p.v12 * dhalf_diff) / r2
        } else {
            0.0
        };

        AdiabaticPoint {
            v_plus: mean + r,
            v_minus: mean - r,
            omega: 2.0 * r,
            phi: p.v12.atan2(half_diff),
            d: -0.5 * dphi,
            dv_plus: dmean + dr,
            dv_minus: dmean - dr,
        }
    }
}

/// A two-state, one-dimensional model with a scalar nuclear mass.
///
/// Implementors only have to provide the diabatic matrix; the adiabatic bundle is
/// derived from it unless a model has a reason to override it.
pub trait TwoStateModel: Sync {
    fn mass(&self) -> f64;

    /// Unchecked diabatic evaluation; callers guarantee `q` is finite.
    fn diabatic(&self, q: f64) -> DiabaticPoint;

    fn adiabatic(&self, q: f64) -> AdiabaticPoint {
        AdiabaticPoint::from_diabatic(&self.diabatic(q))
    }
}

impl<M: TwoStateModel + ?Sized> TwoStateModel for &M {
    fn mass(&self) -> f64 {
        (**self).mass()
    }
    fn diabatic(&self, q: f64) -> DiabaticPoint {
        (**self).diabatic(q)
    }
    fn adiabatic(&self, q: f64) -> AdiabaticPoint {
        (**self).adiabatic(q)
    }
}

/// Antisymmetric tanh-like diabats with a Gaussian coupling:
///
/// `V1 = sgn(q) a (1 - exp(-b|q|))`, `V2 = -V1`, `V12 = c exp(-d_width q²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPotential {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_width: f64,
    pub mass: f64,
}

impl Default for ModelPotential {
    fn default() -> Self {
        ModelPotential {
            a: 0.01,
            b: 1.6,
            c: 0.002,
            d_width: 1.0,
            mass: 2000.0,
        }
    }
}

impl ModelPotential {
    pub fn new(a: f64, b: f64, c: f64, d_width: f64, mass: f64) -> Result<Self, ModelError> {
        let model = ModelPotential {
            a,
            b,
            c,
            d_width,
            mass,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let named = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d_width", self.d_width),
            ("mass", self.mass),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::Parameter { name, value });
            }
        }
        Ok(())
    }

    pub fn eval_diabatic(&self, q: f64) -> Result<DiabaticPoint, ModelError> {
        if !q.is_finite() {
            return Err(ModelError::NonFinitePosition(q));
        }
        Ok(self.diabatic(q))
    }

    pub fn eval_adiabatic(&self, q: f64) -> Result<AdiabaticPoint, ModelError> {
        if !q.is_finite() {
            return Err(ModelError::NonFinitePosition(q));
        }
        Ok(self.adiabatic(q))
    }
}

impl TwoStateModel for ModelPotential {
    #[inline]
    fn mass(&self) -> f64 {
        self.mass
    }

    #[inline]
    fn diabatic(&self, q: f64) -> DiabaticPoint {
        let decay = (-self.b * q.abs()).exp();
        let sign = if q > 0.0 {
            1.0
        } else if q < 0.0 {
            -1.0
        } else {
            0.0
        };
        let v1 = sign * self.a * (1.0 - decay);
        // Two-sided limit at the origin, so no special case.
        let dv1 = self.a * self.b * decay;
        let v12 = self.c * (-self.d_width * q * q).exp();
        DiabaticPoint {
            v1,
            v2: -v1,
            v12,
            dv1,
            dv2: -dv1,
            dv12: -2.0 * self.d_width * q * v12,
        }
    }
}

/// Two uncoupled harmonic diabats `V1 = k q²/2`, `V2 = k q²/2 + shift`.
///
/// With `k = 0` and `shift = 0` this is the free particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncoupledHarmonic {
    pub k: f64,
    pub shift: f64,
    pub mass: f64,
}

impl UncoupledHarmonic {
    pub fn free(mass: f64) -> Self {
        UncoupledHarmonic {
            k: 0.0,
            shift: 0.0,
            mass,
        }
    }
}

impl TwoStateModel for UncoupledHarmonic {
    fn mass(&self) -> f64 {
        self.mass
    }

    fn diabatic(&self, q: f64) -> DiabaticPoint {
        let v = 0.5 * self.k * q * q;
        DiabaticPoint {
            v1: v,
            v2: v + self.shift,
            v12: 0.0,
            dv1: self.k * q,
            dv2: self.k * q,
            dv12: 0.0,
        }
    }
}

/// Wraps a model and reverses the sign of its nonadiabatic coupling, i.e. the
/// other phase choice for one of the adiabatic states.
#[derive(Debug, Clone, Copy)]
pub struct FlippedCoupling<M>(pub M);

impl<M: TwoStateModel> TwoStateModel for FlippedCoupling<M> {
    fn mass(&self) -> f64 {
        self.0.mass()
    }
    fn diabatic(&self, q: f64) -> DiabaticPoint {
        self.0.diabatic(q)
    }
    fn adiabatic(&self, q: f64) -> AdiabaticPoint {
        let mut p = self.0.adiabatic(q);
        p.d = -p.d;
        p
    }
}

/// Electronic 2x2 density matrix with a real diagonal and complex coherence
/// `rho12 = re12 + i im12`. The same layout serves the adiabatic representation
/// (`rho11 -> rho++`, `rho22 -> rho--`, `rho12 -> rho+-`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityMatrix2 {
    pub rho11: f64,
    pub rho22: f64,
    pub re12: f64,
    pub im12: f64,
}

impl DensityMatrix2 {
    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22
    }
}

/// Diabatic to adiabatic transformation for localized densities at mixing angle `phi`.
pub fn density_to_adiabatic(rho: &DensityMatrix2, phi: f64) -> DensityMatrix2 {
    let (s, c) = phi.sin_cos();
    let mean = 0.5 * (rho.rho11 + rho.rho22);
    let half = 0.5 * (rho.rho11 - rho.rho22);
    let half_a = half * c + rho.re12 * s;
    DensityMatrix2 {
        rho11: mean + half_a,
        rho22: mean - half_a,
        re12: -half * s + rho.re12 * c,
        im12: rho.im12,
    }
}

/// Inverse of [`density_to_adiabatic`].
pub fn density_to_diabatic(rho: &DensityMatrix2, phi: f64) -> DensityMatrix2 {
    let (s, c) = phi.sin_cos();
    let mean = 0.5 * (rho.rho11 + rho.rho22);
    let half = 0.5 * (rho.rho11 - rho.rho22);
    let half_d = half * c - rho.re12 * s;
    DensityMatrix2 {
        rho11: mean + half_d,
        rho22: mean - half_d,
        re12: half * s + rho.re12 * c,
        im12: rho.im12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn origin_values() {
        let m = ModelPotential::default();
        let p = m.eval_diabatic(0.0).unwrap();
        assert_eq!(p.v1, 0.0);
        assert_eq!(p.v2, 0.0);
        assert_eq!(p.v12, 0.002);
        assert_eq!(p.dv1, 0.01 * 1.6);
        assert_eq!(p.dv12, 0.0);
    }

    #[test]
    fn far_field_asymptotes() {
        let m = ModelPotential::default();
        let p = m.eval_diabatic(60.0).unwrap();
        assert!((p.v1 - 0.01).abs() < 1e-15);
        assert_eq!(p.v12, 0.0);
        let a = m.eval_adiabatic(60.0).unwrap();
        assert!(a.phi.abs() < 1e-12);
        let a = m.eval_adiabatic(-60.0).unwrap();
        assert!((a.phi - PI).abs() < 1e-12);
    }

    #[test]
    fn values_at_minus_five() {
        // mpmath at 30 digits
        let m = ModelPotential::default();
        let p = m.eval_diabatic(-5.0).unwrap();
        assert!(rel_close(p.v1, -0.009_996_645_373_720_975, 1e-14));
        assert!(rel_close(p.v12, 2.777_588_772_992_804e-14, 1e-12));
        let a = m.eval_adiabatic(-5.0).unwrap();
        assert!(rel_close(a.v_plus, 0.009_996_645_373_720_975, 1e-14));
    }

    #[test]
    fn non_finite_position_is_rejected() {
        let m = ModelPotential::default();
        assert!(matches!(
            m.eval_diabatic(f64::NAN),
            Err(ModelError::NonFinitePosition(_))
        ));
        assert!(m.eval_adiabatic(f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ModelPotential::new(0.01, 1.6, 0.0, 1.0, 2000.0).is_err());
        assert!(ModelPotential::new(0.01, -1.6, 0.002, 1.0, 2000.0).is_err());
        assert!(ModelPotential::new(0.01, 1.6, 0.002, 1.0, f64::NAN).is_err());
        assert!(ModelPotential::new(0.01, 1.6, 0.002, 1.0, 2000.0).is_ok());
    }

    #[test]
    fn crossing_gap_angle_and_coupling() {
        let m = ModelPotential::default();
        let a = m.eval_adiabatic(0.0).unwrap();
        assert_eq!(a.v_plus, 0.002);
        assert_eq!(a.v_minus, -0.002);
        assert!((a.omega - 0.004).abs() < 1e-15);
        assert!((a.phi - FRAC_PI_2).abs() < 1e-15);
        // -phi'(0)/2 with phi'(0) = -(a b / c)
        assert!((a.d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_matches_mpmath_off_crossing() {
        let m = ModelPotential::default();
        assert!(rel_close(
            m.adiabatic(-0.3).d,
            0.623_197_606_334_658_7,
            1e-12
        ));
        assert!(rel_close(
            m.adiabatic(1.7).d,
            0.020_896_799_834_275_84,
            1e-10
        ));
        assert!(rel_close(
            m.adiabatic(-0.3).dv_plus,
            -0.008_453_198_831_030_15,
            1e-12
        ));
    }

    #[test]
    fn gradients_match_central_differences() {
        let m = ModelPotential::default();
        let h = 1e-5;
        for i in -200..=200 {
            let q = 0.05 * i as f64 + 0.0123;
            let p = m.diabatic(q);
            let fd = |f: &dyn Fn(f64) -> f64| (f(q + h) - f(q - h)) / (2.0 * h);
            // relative 1e-6 plus the round-off floor of the difference quotient
            let tol = |exact: f64, approx: f64, scale: f64| {
                (exact - approx).abs() <= 1e-6 * exact.abs() + 4.0 * f64::EPSILON * scale / h
            };
            assert!(
                tol(p.dv1, fd(&|x| m.diabatic(x).v1), p.v1.abs()),
                "dV1 at {q}"
            );
            assert!(
                tol(p.dv12, fd(&|x| m.diabatic(x).v12), p.v12),
                "dV12 at {q}"
            );
            let a = m.adiabatic(q);
            assert!(
                tol(a.dv_plus, fd(&|x| m.adiabatic(x).v_plus), a.v_plus.abs()),
                "dV+ at {q}"
            );
            assert!(
                tol(a.dv_minus, fd(&|x| m.adiabatic(x).v_minus), a.v_minus.abs()),
                "dV- at {q}"
            );
        }
    }

    #[test]
    fn coupling_matches_finite_difference_of_phi() {
        let m = ModelPotential::default();
        let h = 1e-5;
        for i in -2000..=2000 {
            let q = 0.005 * i as f64 + 1e-4;
            let d = m.adiabatic(q).d;
            let fd = (m.adiabatic(q + h).phi - m.adiabatic(q - h).phi) / (2.0 * h);
            assert!(
                (d + 0.5 * fd).abs() <= 1e-5 * d.abs().max(1.0),
                "q={q} d={d} fd={fd}"
            );
        }
    }

    #[test]
    fn phi_is_continuous_and_nonincreasing() {
        let m = ModelPotential::default();
        let mut prev = m.adiabatic(-10.0).phi;
        for i in 1..=200_000 {
            let q = -10.0 + 1e-4 * i as f64;
            let phi = m.adiabatic(q).phi;
            assert!(phi <= prev + 1e-15, "phi increased at {q}");
            assert!(prev - phi < 1e-2, "jump at {q}");
            assert!((0.0..=PI).contains(&phi));
            prev = phi;
        }
    }

    #[test]
    fn flipped_coupling_only_negates_d() {
        let m = ModelPotential::default();
        let f = FlippedCoupling(m);
        let a = m.adiabatic(0.3);
        let b = f.adiabatic(0.3);
        assert_eq!(a.d, -b.d);
        assert_eq!(a.v_plus, b.v_plus);
        assert_eq!(a.omega, b.omega);
    }

    #[test]
    fn transform_examples() {
        let rho = DensityMatrix2 {
            rho11: 0.7,
            rho22: 0.3,
            re12: 0.1,
            im12: -0.2,
        };
        let same = density_to_adiabatic(&rho, 0.0);
        assert!((same.rho11 - rho.rho11).abs() < 1e-15);
        assert!((same.rho22 - rho.rho22).abs() < 1e-15);
        assert_eq!((same.re12, same.im12), (rho.re12, rho.im12));

        let up = DensityMatrix2 {
            rho11: 1.0,
            ..Default::default()
        };
        let a = density_to_adiabatic(&up, PI);
        assert!(a.rho11.abs() < 1e-15);
        assert!((a.rho22 - 1.0).abs() < 1e-15);
        assert!(a.re12.abs() < 1e-15 && a.im12 == 0.0);

        let a = density_to_adiabatic(&up, FRAC_PI_2);
        assert!((a.rho11 - 0.5).abs() < 1e-15);
        assert!((a.rho22 - 0.5).abs() < 1e-15);
        assert!((a.re12 + 0.5).abs() < 1e-15);
        assert_eq!(a.im12, 0.0);
    }

    fn any_model() -> impl Strategy<Value = ModelPotential> {
        (
            1e-3..0.1f64,
            0.2..4.0f64,
            1e-4..0.02f64,
            0.1..10.0f64,
            100.0..5000.0f64,
        )
            .prop_map(|(a, b, c, d, m)| ModelPotential::new(a, b, c, d, m).unwrap())
    }

    proptest! {
        #[test]
        fn transform_round_trip_and_trace(
            r11 in 0.0..1.0f64, re in -0.5..0.5f64, im in -0.5..0.5f64, phi in 0.0..PI
        ) {
            let rho = DensityMatrix2 { rho11: r11, rho22: 1.0 - r11, re12: re, im12: im };
            let a = density_to_adiabatic(&rho, phi);
            prop_assert!((a.trace() - rho.trace()).abs() < 1e-15);
            let back = density_to_diabatic(&a, phi);
            prop_assert!((back.rho11 - rho.rho11).abs() < 1e-14);
            prop_assert!((back.rho22 - rho.rho22).abs() < 1e-14);
            prop_assert!((back.re12 - rho.re12).abs() < 1e-14);
            prop_assert_eq!(back.im12, rho.im12);
        }

        #[test]
        fn eigenvalue_identities(model in any_model(), q in -20.0..20.0f64) {
            let p = model.diabatic(q);
            let a = model.adiabatic(q);
            prop_assert!(a.v_plus >= a.v_minus);
            prop_assert!(((a.v_plus - a.v_minus) - a.omega).abs() <= 1e-15 * a.omega.max(1e-300) * 4.0);
            let lhs = (a.v_plus - a.v_minus).powi(2);
            let rhs = (p.v1 - p.v2).powi(2) + 4.0 * p.v12 * p.v12;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            prop_assert!((a.v_plus + a.v_minus - (p.v1 + p.v2)).abs() <= 1e-15 * (p.v1.abs() + p.v12));
            prop_assert!(p.v12 > 0.0 || q.abs() > 5.0);
        }
    }

    #[test]
    fn eigenvalue_identity_on_many_points() {
        use rand::{Rng, SeedableRng};
        let m = ModelPotential::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let q: f64 = rng.random_range(-10.0..10.0);
            let p = m.diabatic(q);
            let a = m.adiabatic(q);
            let lhs = (a.v_plus - a.v_minus).powi(2);
            let rhs = (p.v1 - p.v2).powi(2) + 4.0 * p.v12 * p.v12;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }
}
