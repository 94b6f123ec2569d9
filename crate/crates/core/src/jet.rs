//! Second-order jets of scalar fields: value, gradient and Hessian at a point.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet { value, ..Default::default() }
    }

    /// `c + a·x + b·y` at `p`.
    pub fn affine(c: f64, a: f64, b: f64, p: [f64; 2]) -> Self {
        Jet { value: c + a * p[0] + b * p[1], grad: [a, b], hess: [[0.0; 2]; 2] }
    }

    pub fn x(p: [f64; 2]) -> Self {
        Jet::affine(0.0, 1.0, 0.0, p)
    }

    pub fn y(p: [f64; 2]) -> Self {
        Jet::affine(0.0, 0.0, 1.0, p)
    }

    /// Chain rule for `g(self)` given `g, g', g''` at `self.value`.
    pub fn compose(self, g: f64, dg: f64, ddg: f64) -> Self {
        let mut hess = [[0.0; 2]; 2];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                *h = ddg * self.grad[i] * self.grad[j] + dg * self.hess[i][j];
            }
        }
        Jet { value: g, grad: [dg * self.grad[0], dg * self.grad[1]], hess }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            value: s * self.value,
            grad: [s * self.grad[0], s * self.grad[1]],
            hess: [[s * self.hess[0][0], s * self.hess[0][1]], [s * self.hess[1][0], s * self.hess[1][1]]],
        }
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        self.compose(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.value += o.value;
        for i in 0..2 {
            out.grad[i] += o.grad[i];
            for j in 0..2 {
                out.hess[i][j] += o.hess[i][j];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut hess = [[0.0; 2]; 2];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                *h = self.hess[i][j] * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.hess[i][j];
            }
        }
        Jet {
            value: self.value * o.value,
            grad: [
                self.grad[0] * o.value + self.value * o.grad[0],
                self.grad[1] * o.value + self.value * o.grad[1],
            ],
            hess,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.value += c;
        self
    }
}
