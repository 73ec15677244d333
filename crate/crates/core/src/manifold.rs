//! Points of R³, S³ ≅ SU(2) and H³, with the projections read off their
//! matrix entries.
//!
//! * SU(2) elements are stored by their first row `(a, b)`; the full matrix is
//!   `[[a, b], [-conj(b), conj(a)]]`.
//! * H³ is the set of positive-definite Hermitian matrices `[[a, b], [conj(b), c]]`
//!   with `ac - |b|² = 1`. The upper half-space chart `(x1, x2, y)` maps its base
//!   point `(0, 0, 1)` to the identity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Unit-norm tolerance enforced on constructed SU(2) points.
pub const SU2_NORM_TOL: f64 = 1e-12;
/// Unit-determinant tolerance enforced on constructed H³ points.
pub const H3_DET_TOL: f64 = 1e-10;
/// Largest excursion outside `[-1, 1]` (or below 1 for arccosh) that is treated
/// as rounding and clamped. Anything further is an invariant violation.
pub const CLAMP_TOL: f64 = 1e-9;

/// `acos` with rounding-level excursions clamped to the domain.
pub fn acos_clamped(v: f64) -> Result<f64> {
    if !(v.abs() <= 1.0 + CLAMP_TOL) {
        return Err(domain(format!("acos argument {v} outside [-1, 1]")));
    }
    Ok(v.clamp(-1.0, 1.0).acos())
}

/// `acosh` with rounding-level excursions below 1 clamped.
pub fn acosh_clamped(v: f64) -> Result<f64> {
    if !(v >= 1.0 - CLAMP_TOL) {
        return Err(domain(format!("acosh argument {v} below 1")));
    }
    Ok(v.max(1.0).acosh())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanPoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EuclideanPoint3 {
    pub const ORIGIN: EuclideanPoint3 = EuclideanPoint3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(domain("non-finite coordinate"));
        }
        Ok(EuclideanPoint3 { x, y, z })
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// An element of SU(2), stored as the first row `(a, b)` of its matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Point {
    a: Complex64,
    b: Complex64,
}

impl Su2Point {
    pub const IDENTITY: Su2Point = Su2Point {
        a: Complex64 { re: 1.0, im: 0.0 },
        b: Complex64 { re: 0.0, im: 0.0 },
    };

    /// Rescales `(a, b)` onto the unit sphere in C².
    pub fn normalize(a: Complex64, b: Complex64) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !n.is_finite() {
            return Err(domain("non-finite SU(2) entries"));
        }
        if n == 0.0 {
            return Err(domain("cannot normalize (a, b) = (0, 0)"));
        }
        Ok(Su2Point { a: a / n, b: b / n })
    }

    /// Accepts `(a, b)` only if it already has unit norm within [`SU2_NORM_TOL`].
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let dev = (a.norm_sqr() + b.norm_sqr() - 1.0).abs();
        if !(dev <= SU2_NORM_TOL) {
            return Err(domain(format!("|a|^2 + |b|^2 deviates from 1 by {dev:e}")));
        }
        Ok(Su2Point { a, b })
    }

    /// Raw entries without any norm check. Used by integrators that are
    /// expected to drift off the group (e.g. the unprojected Itô scheme).
    pub fn from_entries_unchecked(a: Complex64, b: Complex64) -> Self {
        Su2Point { a, b }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }
    pub fn b(&self) -> Complex64 {
        self.b
    }
    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }
    pub fn x(&self) -> f64 {
        self.a.re
    }
    pub fn y(&self) -> f64 {
        self.a.im
    }
    pub fn rho(&self) -> f64 {
        self.a.norm()
    }
    pub fn phi(&self) -> f64 {
        self.a.arg()
    }

    /// Eigen-angle θ ∈ [0, π] with cos θ = ½ tr g.
    ///
    /// Entries are read relative to the norm of `(a, b)`, so points carried
    /// slightly off the group by an integrator still map into [0, π].
    pub fn trace_angle(&self) -> f64 {
        let n = self.norm_sqr().sqrt();
        (self.a.re / n).clamp(-1.0, 1.0).acos()
    }

    /// The upper-left matrix entry as `(Re a, Im a)`.
    pub fn project_a(&self) -> (f64, f64) {
        (self.a.re, self.a.im)
    }

    /// Group product `self · other`.
    pub fn mul(&self, other: &Su2Point) -> Su2Point {
        Su2Point {
            a: self.a * other.a - self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    /// `exp(v1 e1 + v2 e2 + v3 e3)` for the su(2) basis
    /// `e1 = [[0, i], [i, 0]]`, `e2 = [[0, -1], [1, 0]]`, `e3 = [[i, 0], [0, -i]]`.
    pub fn exp_algebra(v: [f64; 3]) -> Su2Point {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (s, c) = if n < 1e-8 {
            // sin(n)/n and cos(n) to rounding
            (1.0 - n * n / 6.0, 1.0 - n * n / 2.0)
        } else {
            (n.sin() / n, n.cos())
        };
        Su2Point {
            a: Complex64::new(c, s * v[2]),
            b: Complex64::new(-s * v[1], s * v[0]),
        }
    }
}

/// A point of H³ as a unit-determinant positive-definite Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    a: f64,
    b: Complex64,
    c: f64,
}

impl HPoint {
    pub const IDENTITY: HPoint = HPoint {
        a: 1.0,
        b: Complex64 { re: 0.0, im: 0.0 },
        c: 1.0,
    };

    pub fn new(a: f64, b: Complex64, c: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0) {
            return Err(domain(format!(
                "diagonal entries must be positive (a={a}, c={c})"
            )));
        }
        let dev = (a * c - b.norm_sqr() - 1.0).abs();
        if !(dev <= H3_DET_TOL) {
            return Err(domain(format!("ac - |b|^2 deviates from 1 by {dev:e}")));
        }
        Ok(HPoint { a, b, c })
    }

    /// `diag(Λ, 1/Λ)`, the point at distance `ln Λ` from the identity along the diagonal.
    pub fn diagonal(lambda_cap: f64) -> Result<Self> {
        HPoint::new(lambda_cap, Complex64::new(0.0, 0.0), 1.0 / lambda_cap)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> Complex64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Half-trace `w = (a + c)/2 ≥ 1`.
    pub fn w(&self) -> f64 {
        0.5 * (self.a + self.c)
    }

    /// Logarithm of the larger eigenvalue, equal to the distance from the identity.
    pub fn radial_lambda(&self) -> f64 {
        self.w().max(1.0).acosh()
    }

    pub fn project_wc(&self) -> (f64, f64) {
        (self.w(), self.c)
    }

    /// Geodesic distance `arccosh(½ tr(g1 g2⁻¹))`.
    pub fn distance(&self, other: &HPoint) -> f64 {
        let half_trace = 0.5 * (self.a * other.c + self.c * other.a) - (self.b * other.b.conj()).re;
        half_trace.max(1.0).acosh()
    }
}

/// Upper half-space coordinates `(x1, x2, y)` with `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePoint {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
}

impl HalfSpacePoint {
    pub const BASE: HalfSpacePoint = HalfSpacePoint {
        x1: 0.0,
        x2: 0.0,
        y: 1.0,
    };

    pub fn new(x1: f64, x2: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x1.is_finite() || !x2.is_finite() || !y.is_finite() {
            return Err(domain(format!(
                "half-space point needs finite x and y > 0 (y={y})"
            )));
        }
        Ok(HalfSpacePoint { x1, x2, y })
    }

    /// `a = (|x|² + y²)/y`, `b = (x1 + i x2)/y`, `c = 1/y`.
    pub fn to_hpoint(&self) -> HPoint {
        let r2 = self.x1 * self.x1 + self.x2 * self.x2;
        HPoint {
            a: (r2 + self.y * self.y) / self.y,
            b: Complex64::new(self.x1 / self.y, self.x2 / self.y),
            c: 1.0 / self.y,
        }
    }
}

pub fn h3_from_halfspace(p: &HalfSpacePoint) -> HPoint {
    p.to_hpoint()
}

pub fn h3_distance(g1: &HPoint, g2: &HPoint) -> f64 {
    g1.distance(g2)
}
