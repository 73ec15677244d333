//! Second-order forward-mode differentiation in two variables.
//!
//! Coefficient functions are written once against [`Real`] and evaluated either
//! on plain `f64` (simulation) or on [`Jet2`] (exact first and second partial
//! derivatives, used to build divergence-form Fokker-Planck operators).

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::constant(k)
    }
}

impl Real for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Value, gradient and Hessian of a scalar function of two variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet2 {
    /// The independent variable `index` (0 or 1) taking the value `v`.
    pub fn variable(v: f64, index: usize) -> Self {
        let mut g = [0.0; 2];
        g[index] = 1.0;
        Jet2 {
            v,
            g,
            h: [[0.0; 2]; 2],
        }
    }

    /// Chain rule for a unary function with derivatives `d1`, `d2` at `self.v`.
    fn chain(self, f: f64, d1: f64, d2: f64) -> Self {
        let mut out = Jet2 {
            v: f,
            g: [d1 * self.g[0], d1 * self.g[1]],
            h: [[0.0; 2]; 2],
        };
        for i in 0..2 {
            for j in 0..2 {
                out.h[i][j] = d1 * self.h[i][j] + d2 * self.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r.v += o.v;
        for i in 0..2 {
            r.g[i] += o.g[i];
            for j in 0..2 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        let mut r = self;
        r.v = -r.v;
        for i in 0..2 {
            r.g[i] = -r.g[i];
            for j in 0..2 {
                r.h[i][j] = -r.h[i][j];
            }
        }
        r
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut r = Jet2 {
            v: self.v * o.v,
            g: [0.0; 2],
            h: [[0.0; 2]; 2],
        };
        for i in 0..2 {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..2 {
                r.h[i][j] = self.h[i][j] * o.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i]
                    + self.v * o.h[i][j];
            }
        }
        r
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        let inv = o.chain(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v));
        self * inv
    }
}

impl Real for Jet2 {
    fn constant(v: f64) -> Self {
        Jet2 {
            v,
            g: [0.0; 2],
            h: [[0.0; 2]; 2],
        }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(x: f64, y: f64) -> (Jet2, Jet2) {
        (Jet2::variable(x, 0), Jet2::variable(y, 1))
    }

    #[test]
    fn product_rule_on_polynomial() {
        // f = x^2 y^3 at (1.5, -0.7)
        let (x, y) = xy(1.5, -0.7);
        let f = x * x * y * y * y;
        let (a, b) = (1.5f64, -0.7f64);
        assert!((f.v - a * a * b.powi(3)).abs() < 1e-14);
        assert!((f.g[0] - 2.0 * a * b.powi(3)).abs() < 1e-13);
        assert!((f.g[1] - 3.0 * a * a * b * b).abs() < 1e-13);
        assert!((f.h[0][0] - 2.0 * b.powi(3)).abs() < 1e-13);
        assert!((f.h[0][1] - 6.0 * a * b * b).abs() < 1e-13);
        assert!((f.h[1][0] - f.h[0][1]).abs() < 1e-15);
        assert!((f.h[1][1] - 6.0 * a * a * b).abs() < 1e-13);
    }

    #[test]
    fn quotient_and_sqrt() {
        // f = sqrt(x) / y, compare with hand derivatives
        let (x, y) = xy(2.0, 3.0);
        let f = x.sqrt() / y;
        let s = 2.0f64.sqrt();
        assert!((f.v - s / 3.0).abs() < 1e-15);
        assert!((f.g[0] - 0.5 / (s * 3.0)).abs() < 1e-15);
        assert!((f.g[1] + s / 9.0).abs() < 1e-15);
        assert!((f.h[0][0] + 0.25 / (2.0 * s * 3.0)).abs() < 1e-15);
        assert!((f.h[1][1] - 2.0 * s / 27.0).abs() < 1e-15);
        assert!((f.h[0][1] + 0.5 / (s * 9.0)).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_and_trig_second_derivatives() {
        let (x, _) = xy(0.4, 0.0);
        let f = x.cosh() / x.sinh();
        // d/dx coth = -1/sinh^2, d2/dx2 coth = 2 cosh / sinh^3
        let (s, c) = (0.4f64.sinh(), 0.4f64.cosh());
        assert!((f.g[0] + 1.0 / (s * s)).abs() < 1e-12);
        assert!((f.h[0][0] - 2.0 * c / (s * s * s)).abs() < 1e-10);
        let g = x.sin() * x.cos();
        assert!((g.h[0][0] + 2.0 * (0.8f64).sin()).abs() < 1e-14);
    }
}
