//! Lamé coefficient fields μ, λ and the reaction coefficient ρ.
//!
//! Discontinuous models are evaluated per cell side: the caller passes the
//! [`Phase`] of the cell the point belongs to, so values on an interface are
//! never averaged.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::mesh::{Point, Rect};

/// Side of a coefficient discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// `y > η` for a plane jump, inside the rectangle for an inclusion.
    Plus,
    Minus,
}

/// Sign convention for the reaction term: ρ = −k² (`Negative`) or ρ = k².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoSign {
    #[default]
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialVariant {
    Constant { mu: f64, lambda: f64 },
    /// μ = 1 + ½ sin x sin y, λ = 1.25 + ½ cos x cos y.
    SmoothTrig,
    /// μ = μ₊ above `y = eta`, μ₋ below.
    PlaneJump { mu_plus: f64, mu_minus: f64, eta: f64, lambda: f64 },
    /// μ = μ_i inside `rect`, μ_e outside.
    Inclusion { mu_inside: f64, mu_outside: f64, rect: Rect, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub variant: MaterialVariant,
    pub k: f64,
    pub rho_sign: RhoSign,
}

/// μ and λ with derivatives up to second order, plus ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialJet {
    pub mu: Jet,
    pub lambda: Jet,
    pub rho: f64,
}

/// Pointwise coefficient values with first derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub mu: f64,
    pub lambda: f64,
    pub rho: f64,
    pub grad_mu: [f64; 2],
    pub grad_lambda: [f64; 2],
}

impl MaterialModel {
    pub fn new(variant: MaterialVariant, k: f64, rho_sign: RhoSign) -> Result<Self> {
        let model = MaterialModel { variant, k, rho_sign };
        model.validate()?;
        Ok(model)
    }

    pub fn constant(mu: f64, lambda: f64, k: f64) -> Result<Self> {
        Self::new(MaterialVariant::Constant { mu, lambda }, k, RhoSign::Negative)
    }

    pub fn smooth(k: f64) -> Self {
        MaterialModel { variant: MaterialVariant::SmoothTrig, k, rho_sign: RhoSign::Negative }
    }

    pub fn with_rho_sign(mut self, sign: RhoSign) -> Self {
        self.rho_sign = sign;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.k.is_finite() || self.k < 0.0 {
            return Err(Error::Invalid(format!("wavenumber must be non-negative, got {}", self.k)));
        }
        let pairs: Vec<(f64, f64)> = match self.variant {
            MaterialVariant::Constant { mu, lambda } => vec![(mu, lambda)],
            // μ ≥ 1/2 and λ + 2μ ≥ 7/4 everywhere
            MaterialVariant::SmoothTrig => vec![],
            MaterialVariant::PlaneJump { mu_plus, mu_minus, eta, lambda } => {
                if !(0.0 < eta && eta < 1.0) {
                    return Err(Error::Invalid(format!("interface height must lie in (0,1), got {eta}")));
                }
                vec![(mu_plus, lambda), (mu_minus, lambda)]
            }
            MaterialVariant::Inclusion { mu_inside, mu_outside, lambda, .. } => {
                vec![(mu_inside, lambda), (mu_outside, lambda)]
            }
        };
        for (mu, lambda) in pairs {
            if !(mu > 0.0) || !(lambda + 2.0 * mu > 0.0) {
                return Err(Error::Invalid(format!(
                    "coefficients violate μ > 0, λ + 2μ > 0 (μ = {mu}, λ = {lambda})"
                )));
            }
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        match self.rho_sign {
            RhoSign::Negative => -self.k * self.k,
            RhoSign::Positive => self.k * self.k,
        }
    }

    /// True when μ and λ are C^∞ on the whole domain.
    pub fn is_smooth(&self) -> bool {
        match self.variant {
            MaterialVariant::Constant { .. } | MaterialVariant::SmoothTrig => true,
            MaterialVariant::PlaneJump { mu_plus, mu_minus, .. } => mu_plus == mu_minus,
            MaterialVariant::Inclusion { mu_inside, mu_outside, .. } => mu_inside == mu_outside,
        }
    }

    /// Whether the model needs a cell side to be evaluated.
    pub fn is_piecewise(&self) -> bool {
        matches!(self.variant, MaterialVariant::PlaneJump { .. } | MaterialVariant::Inclusion { .. })
    }

    /// Side of the discontinuity containing `p`. Only meaningful for points
    /// strictly inside a cell, such as centroids.
    pub fn phase_at(&self, p: Point) -> Option<Phase> {
        match self.variant {
            MaterialVariant::PlaneJump { eta, .. } => {
                Some(if p[1] > eta { Phase::Plus } else { Phase::Minus })
            }
            MaterialVariant::Inclusion { rect, .. } => {
                Some(if rect.contains(p) { Phase::Plus } else { Phase::Minus })
            }
            _ => None,
        }
    }

    pub fn jet(&self, side: Option<Phase>, p: Point) -> Result<MaterialJet> {
        let rho = self.rho();
        let pick = |plus: f64, minus: f64, what: &'static str| -> Result<f64> {
            match side {
                Some(Phase::Plus) => Ok(plus),
                Some(Phase::Minus) => Ok(minus),
                None => Err(Error::MissingSide(what)),
            }
        };
        let (mu, lambda) = match self.variant {
            MaterialVariant::Constant { mu, lambda } => (Jet::constant(mu), Jet::constant(lambda)),
            MaterialVariant::SmoothTrig => {
                let (x, y) = (Jet::x(p), Jet::y(p));
                (
                    (x.sin() * y.sin()).scale(0.5) + 1.0,
                    (x.cos() * y.cos()).scale(0.5) + 1.25,
                )
            }
            MaterialVariant::PlaneJump { mu_plus, mu_minus, lambda, .. } => {
                (Jet::constant(pick(mu_plus, mu_minus, "plane-jump")?), Jet::constant(lambda))
            }
            MaterialVariant::Inclusion { mu_inside, mu_outside, lambda, .. } => {
                (Jet::constant(pick(mu_inside, mu_outside, "inclusion")?), Jet::constant(lambda))
            }
        };
        Ok(MaterialJet { mu, lambda, rho })
    }

    pub fn eval(&self, side: Option<Phase>, p: Point) -> Result<MaterialSample> {
        let j = self.jet(side, p)?;
        Ok(MaterialSample {
            mu: j.mu.value,
            lambda: j.lambda.value,
            rho: j.rho,
            grad_mu: j.mu.grad,
            grad_lambda: j.lambda.grad,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jump() -> MaterialModel {
        MaterialModel::new(
            MaterialVariant::PlaneJump { mu_plus: 2.0, mu_minus: 1.0, eta: 0.6, lambda: 1.25 },
            4.0,
            RhoSign::Negative,
        )
        .unwrap()
    }

    #[test]
    fn smooth_values() {
        let m = MaterialModel::smooth(1.0);
        let s = m.eval(None, [0.0, 0.0]).unwrap();
        assert_eq!(s.mu, 1.0);
        assert_eq!(s.lambda, 1.75);
        let s = m.eval(None, [0.5, 0.5]).unwrap();
        assert!((s.mu - 1.114924).abs() < 1e-6);
        assert_eq!(m.rho(), -1.0);
        assert_eq!(m.with_rho_sign(RhoSign::Positive).rho(), 1.0);
    }

    #[test]
    fn smooth_gradients_match_finite_differences() {
        let m = MaterialModel::smooth(6.0);
        let h = 1e-6;
        for p in [[0.1, 0.2], [0.7, 0.4], [0.95, 0.9]] {
            let s = m.eval(None, p).unwrap();
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                let (a, b) = (m.eval(None, pp).unwrap(), m.eval(None, pm).unwrap());
                let dmu = (a.mu - b.mu) / (2.0 * h);
                let dla = (a.lambda - b.lambda) / (2.0 * h);
                assert!((dmu - s.grad_mu[d]).abs() <= 1e-8 * s.grad_mu[d].abs().max(1e-2));
                assert!((dla - s.grad_lambda[d]).abs() <= 1e-8 * s.grad_lambda[d].abs().max(1e-2));
            }
        }
    }

    #[test]
    fn jump_sides_are_not_averaged() {
        let m = jump();
        assert_eq!(m.eval(Some(Phase::Plus), [0.3, 0.7]).unwrap().mu, 2.0);
        assert_eq!(m.eval(Some(Phase::Plus), [0.3, 0.6]).unwrap().mu, 2.0);
        assert_eq!(m.eval(Some(Phase::Minus), [0.3, 0.6]).unwrap().mu, 1.0);
        assert_eq!(m.eval(Some(Phase::Minus), [0.3, 0.6]).unwrap().grad_mu, [0.0, 0.0]);
        assert!(matches!(m.eval(None, [0.3, 0.7]), Err(Error::MissingSide(_))));
        assert_eq!(m.phase_at([0.5, 0.61]), Some(Phase::Plus));
        assert!(!m.is_smooth());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(MaterialModel::constant(-1.0, 1.0, 1.0).is_err());
        assert!(MaterialModel::constant(1.0, -3.0, 1.0).is_err());
        let bad = MaterialVariant::PlaneJump { mu_plus: 1.0, mu_minus: 1.0, eta: 1.2, lambda: 1.0 };
        assert!(MaterialModel::new(bad, 1.0, RhoSign::Negative).is_err());
    }
}
