//! Phase coefficients: the sharp `lambda^2(v)` and its relaxed profile.
//!
//! The relaxed profile is a half-cosine ramp of width `epsilon`,
//! `phi(v) = lambda2^2 + (lambda1^2 - lambda2^2) s(v / epsilon)` with
//! `s(t) = (1 - cos(pi t)) / 2` on `[0, 1]`, clamped outside. It is `C^{1,1}`,
//! flat outside `(0, epsilon)` and monotone inside.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub epsilon: T,
}

impl<T: Real> PhaseModel<T> {
    pub fn new(lambda1: T, lambda2: T, epsilon: T) -> Result<Self, Error> {
        let m = Self { lambda1, lambda2, epsilon };
        m.validate()?;
        if m.is_linear() {
            log::warn!("lambda1 == lambda2: the phase term is constant and the problem is linear");
        }
        Ok(m)
    }

    /// `lambda1 = 0`, `lambda2 = 1`: the homogeneous setting of the corner
    /// experiments.
    pub fn standard(epsilon: T) -> Result<Self, Error> {
        Self::new(T::zero(), T::one(), epsilon)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidModel(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        for (name, l) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(l >= T::zero()) || !l.is_finite() {
                return Err(Error::InvalidModel(format!("{name} must be finite and nonnegative, got {l}")));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: T) -> Result<Self, Error> {
        let m = Self { epsilon, ..self };
        m.validate()?;
        Ok(m)
    }

    pub fn is_linear(&self) -> bool {
        self.lambda1 == self.lambda2
    }

    /// `lambda1^2 - lambda2^2`, the jump of the phase coefficient across `v = 0`.
    pub fn jump(&self) -> T {
        self.lambda1 * self.lambda1 - self.lambda2 * self.lambda2
    }

    /// Sharp coefficient: `lambda1^2` for `v > 0`, `lambda2^2` for `v <= 0`.
    #[inline]
    pub fn lambda_sq(&self, v: T) -> T {
        if v > T::zero() {
            self.lambda1 * self.lambda1
        } else {
            self.lambda2 * self.lambda2
        }
    }

    #[inline]
    pub fn phi(&self, v: T) -> T {
        let l2 = self.lambda2 * self.lambda2;
        if v <= T::zero() {
            l2
        } else if v >= self.epsilon {
            self.lambda1 * self.lambda1
        } else {
            let t = v / self.epsilon;
            l2 + self.jump() * T::lit(0.5) * (T::one() - (T::PI() * t).cos())
        }
    }

    #[inline]
    pub fn phi_prime(&self, v: T) -> T {
        if v <= T::zero() || v >= self.epsilon {
            T::zero()
        } else {
            let k = T::PI() / self.epsilon;
            self.jump() * T::lit(0.5) * k * (k * v).sin()
        }
    }

    /// Second derivative; bounded by [`Self::curvature_bound`] and
    /// discontinuous at `0` and `epsilon`.
    #[inline]
    pub fn phi_second(&self, v: T) -> T {
        if v <= T::zero() || v >= self.epsilon {
            T::zero()
        } else {
            let k = T::PI() / self.epsilon;
            self.jump() * T::lit(0.5) * k * k * (k * v).cos()
        }
    }

    /// `sup |phi''| = pi^2 |lambda1^2 - lambda2^2| / (2 epsilon^2)`.
    pub fn curvature_bound(&self) -> T {
        T::PI() * T::PI() * self.jump().abs() / (T::lit(2.0) * self.epsilon * self.epsilon)
    }

    /// True if `v` lies where the relaxed and sharp coefficients differ.
    #[inline]
    pub fn in_layer(&self, v: T) -> bool {
        v > T::zero() && v < self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn std_model(eps: f64) -> PhaseModel<f64> {
        PhaseModel::standard(eps).unwrap()
    }

    #[test]
    fn sharp_coefficient_branches() {
        assert_eq!(std_model(0.1).lambda_sq(0.3), 0.0);
        assert_eq!(std_model(0.1).lambda_sq(0.0), 1.0);
        let m = PhaseModel::new(2.0, 1.0, 0.1).unwrap();
        assert_eq!(m.lambda_sq(-5.0), 1.0);
        assert_eq!(m.lambda_sq(5.0), 4.0);
    }

    #[test]
    fn profile_plateaus_and_midpoint() {
        let m = std_model(0.05);
        assert_eq!(m.phi(-0.1), 1.0);
        assert_eq!(m.phi(0.05), 0.0);
        for eps in [1e-3, 0.05, 0.7] {
            assert_abs_diff_eq!(std_model(eps).phi(eps / 2.0), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_vanishes_at_layer_edges() {
        let m = std_model(0.05);
        assert_eq!(m.phi_prime(0.0), 0.0);
        assert_eq!(m.phi_prime(0.05), 0.0);
        assert_abs_diff_eq!(m.phi_prime(1e-12), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.phi_prime(0.05 - 1e-12), 0.0, epsilon = 1e-8);
    }

    fn gauss_mass(m: &PhaseModel<f64>) -> f64 {
        // composite 5-point Gauss-Legendre on 64 panels
        let nodes = [-0.906179845938664, -0.538469310105683, 0.0, 0.538469310105683, 0.906179845938664];
        let weights = [0.236926885056189, 0.478628670499366, 0.568888888888889, 0.478628670499366, 0.236926885056189];
        let panels = 64;
        let w = m.epsilon / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * w;
            for (x, wt) in nodes.iter().zip(weights) {
                s += wt * 0.5 * w * m.phi_prime(mid + 0.5 * w * x);
            }
        }
        s
    }

    #[test]
    fn derivative_mass_equals_jump() {
        assert_abs_diff_eq!(gauss_mass(&std_model(0.05)), -1.0, epsilon = 1e-10);
        let m = PhaseModel::new(1.5, 0.5, 0.02).unwrap();
        assert_abs_diff_eq!(gauss_mass(&m), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn pointwise_convergence_to_sharp_coefficient() {
        for v in [0.05, -0.05] {
            let errs: Vec<f64> = [1e-1, 1e-2, 1e-3]
                .iter()
                .map(|&eps| (std_model(eps).phi(v) - std_model(eps).lambda_sq(v)).abs())
                .collect();
            assert!(errs[1] == 0.0 && errs[2] == 0.0, "{errs:?}");
        }
        // inside the widest layer the profile is strictly between the plateaus
        assert!(std_model(0.1).phi(0.05) > 0.0 && std_model(0.1).phi(0.05) < 1.0);
    }

    #[test]
    fn finite_difference_matches_derivative() {
        let m = PhaseModel::new(0.3, 1.2, 0.04).unwrap();
        let step = 1e-6;
        let mut worst = 0.0f64;
        for k in 0..50 {
            let v = -0.01 + 0.06 * k as f64 / 49.0;
            let fd = (m.phi(v + step) - m.phi(v - step)) / (2.0 * step);
            worst = worst.max((fd - m.phi_prime(v)).abs());
        }
        // O(step^2 * |phi'''|) plus the kinks of phi'' at 0 and eps
        assert!(worst < 1e-3, "worst = {worst}");
    }

    #[test]
    fn curvature_bound_is_attained_at_layer_edge() {
        let m = std_model(0.02);
        let near = m.phi_second(1e-12).abs();
        assert_abs_diff_eq!(near, m.curvature_bound(), epsilon = 1e-6 * m.curvature_bound());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PhaseModel::new(0.0, 1.0, 0.0).is_err());
        assert!(PhaseModel::new(-1.0, 1.0, 0.1).is_err());
        assert!(PhaseModel::new(0.0, f64::NAN, 0.1).is_err());
        assert!(PhaseModel::new(1.0, 1.0, 0.1).unwrap().is_linear());
    }

    proptest! {
        #[test]
        fn derivative_has_sign_of_jump(l1 in 0.0f64..3.0, l2 in 0.0f64..3.0, eps in 1e-3f64..1.0, t in 0.001f64..0.999) {
            let m = PhaseModel::new(l1, l2, eps).unwrap();
            let d = m.phi_prime(t * eps);
            if m.jump() > 0.0 { prop_assert!(d > 0.0) }
            if m.jump() < 0.0 { prop_assert!(d < 0.0) }
            if m.jump() == 0.0 { prop_assert!(d == 0.0) }
            let lo = m.lambda1.powi(2).min(m.lambda2.powi(2));
            let hi = m.lambda1.powi(2).max(m.lambda2.powi(2));
            let p = m.phi(t * eps);
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}
