//! Closed-form reference displacements and the right-hand sides they induce.

use std::f64::consts::PI;

use crate::coefficients::{MaterialModel, Phase};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::mesh::{Point, Rect};

/// Coefficients of the upper branch of the plane-jump solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

/// Branch coefficients making the plane-jump displacement and its traction
/// continuous across `y = eta`.
pub fn jump_coefficients(mu_plus: f64, mu_minus: f64, eta: f64, k: f64) -> Result<JumpCoefficients> {
    if !(eta > 0.0 && eta < 1.0) || !(mu_plus > 0.0) || !(mu_minus > 0.0) {
        return Err(Error::Invalid(format!("jump coefficients need η ∈ (0,1) and μ± > 0 (η = {eta})")));
    }
    let b1 = 0.0;
    let c1 = k * PI / (2.0 * eta) * ((mu_plus - mu_minus) / mu_plus);
    let a1 = 1.0 - c1 * eta * eta;
    let b2 = 1.0;
    let c2 = -1.0 / (2.0 * eta);
    let a2 = 1.0 - b2 * eta - c2 * eta * eta;
    Ok(JumpCoefficients { a1, b1, c1, a2, b2, c2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionVariant {
    /// `sin(kπx) sin(kπy) (1, 1)`.
    Oscillatory,
    /// Piecewise ansatz with a kink at `y = eta`.
    PlaneJump { coeffs: JumpCoefficients, eta: f64 },
    /// `ζ²`-weighted fields inside and outside `rect`.
    Inclusion { rect: Rect },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSolution {
    pub variant: SolutionVariant,
    pub k: f64,
}

impl ReferenceSolution {
    pub fn oscillatory(k: f64) -> Self {
        ReferenceSolution { variant: SolutionVariant::Oscillatory, k }
    }

    pub fn plane_jump(mu_plus: f64, mu_minus: f64, eta: f64, k: f64) -> Result<Self> {
        let coeffs = jump_coefficients(mu_plus, mu_minus, eta, k)?;
        Ok(ReferenceSolution { variant: SolutionVariant::PlaneJump { coeffs, eta }, k })
    }

    pub fn inclusion(rect: Rect, k: f64) -> Self {
        ReferenceSolution { variant: SolutionVariant::Inclusion { rect }, k }
    }

    pub fn is_piecewise(&self) -> bool {
        !matches!(self.variant, SolutionVariant::Oscillatory)
    }

    /// Branch containing `p`; only meaningful away from the branch boundary.
    pub fn phase_at(&self, p: Point) -> Option<Phase> {
        match self.variant {
            SolutionVariant::Oscillatory => None,
            SolutionVariant::PlaneJump { eta, .. } => Some(if p[1] > eta { Phase::Plus } else { Phase::Minus }),
            SolutionVariant::Inclusion { rect } => Some(if rect.contains(p) { Phase::Plus } else { Phase::Minus }),
        }
    }

    /// Second-order jets of both displacement components.
    pub fn jets(&self, side: Option<Phase>, p: Point) -> Result<[Jet; 2]> {
        let kp = self.k * PI;
        let (x, y) = (Jet::x(p), Jet::y(p));
        let branch = |name| side.ok_or(Error::MissingSide(name));
        Ok(match self.variant {
            SolutionVariant::Oscillatory => {
                let s = x.scale(kp).sin() * y.scale(kp).sin();
                [s, s]
            }
            SolutionVariant::PlaneJump { coeffs: c, eta } => match branch("plane-jump solution")? {
                Phase::Plus => {
                    let q1 = y.scale(c.b1) + (y * y).scale(c.c1) + c.a1;
                    let q2 = y.scale(c.b2) + (y * y).scale(c.c2) + c.a2;
                    [q1 * x.scale(kp).sin(), q2 * x.scale(kp).cos()]
                }
                Phase::Minus => {
                    let cy = Jet::affine(-kp * eta, 0.0, kp, p).cos();
                    [x.scale(kp).sin() * cy, x.scale(kp).cos() * cy]
                }
            },
            SolutionVariant::Inclusion { rect } => {
                let zeta = (x + (-rect.x0)) * (x + (-rect.x1)) * (y + (-rect.y0)) * (y + (-rect.y1));
                let z2 = zeta * zeta;
                let (sy, cy) = (y.scale(kp).sin(), y.scale(kp).cos());
                match branch("inclusion solution")? {
                    Phase::Plus => {
                        let cx = x.scale(kp).cos();
                        [z2 * cx * sy, z2 * cx * cy]
                    }
                    Phase::Minus => {
                        let sx = x.scale(kp).sin();
                        [z2 * sx * sy, z2 * sx * cy]
                    }
                }
            }
        })
    }

    pub fn eval_u(&self, side: Option<Phase>, p: Point) -> Result<[f64; 2]> {
        let j = self.jets(side, p)?;
        Ok([j[0].value, j[1].value])
    }

    /// `[[∂x u₁, ∂y u₁], [∂x u₂, ∂y u₂]]`.
    pub fn eval_grad_u(&self, side: Option<Phase>, p: Point) -> Result<[[f64; 2]; 2]> {
        let j = self.jets(side, p)?;
        Ok([j[0].grad, j[1].grad])
    }

    /// `f = 𝓛u` for the given material; the same side selects the material
    /// branch and the solution branch.
    pub fn eval_f(&self, material: &MaterialModel, side: Option<Phase>, p: Point) -> Result<[f64; 2]> {
        let u = self.jets(side, p)?;
        let m = material.jet(side.or(material.phase_at(p)), p)?;
        Ok(apply_operator(&m, &u))
    }

    /// `q = ∇·u`.
    pub fn divergence_trace(&self, side: Option<Phase>, p: Point) -> Result<f64> {
        let j = self.jets(side, p)?;
        Ok(j[0].grad[0] + j[1].grad[1])
    }
}

/// `-∇·σ(u) - ρu` from second-order jets of `u` and of the coefficients.
pub fn apply_operator(m: &crate::coefficients::MaterialJet, u: &[Jet; 2]) -> [f64; 2] {
    let mu = m.mu.value;
    let la = m.lambda.value;
    let div = u[0].grad[0] + u[1].grad[1];
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        let mut ds = 0.0;
        for b in 0..2 {
            ds += m.mu.grad[b] * (u[c].grad[b] + u[b].grad[c]);
        }
        let grad_div = u[0].hess[0][c] + u[1].hess[1][c];
        ds += mu * u[c].laplacian() + (mu + la) * grad_div + m.lambda.grad[c] * div;
        *o = -ds - m.rho * u[c].value;
    }
    out
}

/// `σ(u)·n` from the displacement gradient.
pub fn traction(mu: f64, lambda: f64, grad: &[[f64; 2]; 2], n: Point) -> [f64; 2] {
    let div = grad[0][0] + grad[1][1];
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        for d in 0..2 {
            let mut s = mu * (grad[c][d] + grad[d][c]);
            if c == d {
                s += lambda * div;
            }
            *o += s * n[d];
        }
    }
    out
}

/// Largest displacement and traction jumps found on the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceReport {
    pub displacement: f64,
    pub traction: f64,
}

/// Samples `samples` points of `y = eta` (midpoints of a uniform partition
/// of `(0,1)`) and measures `|⟦u⟧|` and `|⟦σ(u)·n⟧|` for the plane-jump
/// ansatz with the given coefficients.
pub fn verify_interface_conditions(
    coeffs: &JumpCoefficients,
    eta: f64,
    mu_plus: f64,
    mu_minus: f64,
    lambda: f64,
    k: f64,
    samples: usize,
) -> InterfaceReport {
    let sol = ReferenceSolution { variant: SolutionVariant::PlaneJump { coeffs: *coeffs, eta }, k };
    let mut report = InterfaceReport { displacement: 0.0, traction: 0.0 };
    for i in 0..samples {
        let p = [(i as f64 + 0.5) / samples as f64, eta];
        let up = sol.jets(Some(Phase::Plus), p).expect("side given");
        let um = sol.jets(Some(Phase::Minus), p).expect("side given");
        let tp = traction(mu_plus, lambda, &[up[0].grad, up[1].grad], [0.0, 1.0]);
        let tm = traction(mu_minus, lambda, &[um[0].grad, um[1].grad], [0.0, 1.0]);
        for c in 0..2 {
            report.displacement = report.displacement.max((up[c].value - um[c].value).abs());
            report.traction = report.traction.max((tp[c] - tm[c]).abs());
        }
    }
    report
}
