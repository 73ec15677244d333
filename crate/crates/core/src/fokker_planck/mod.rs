//! Fokker–Planck equations of the projected processes.
//!
//! Expanded forms, with `∂t p = a_xx p_xx + a_xy p_xy + a_yy p_yy + b_x p_x + b_y p_y + c p`:
//!
//! | id       | a_xx        | a_xy    | a_yy       | b_x      | b_y      | c     |
//! |----------|-------------|---------|------------|----------|----------|-------|
//! | `fp1-s3` | ½(1−x²)     |         |            | −½x      |          | ½     |
//! | `fp2-s3` | ½(1−x²)     | −xy     | ½(1−y²)    | −3x/2    | −3y/2    | 0     |
//! | `fp1-h3` | ½(w²−1)     |         |            | ½w       |          | −½    |
//! | `fp2-h3` | ½(w²−1)     | cw−1    | ½c²        | 3w/2     | 3c/2     | 0     |
//!
//! The solvers work on the equivalent conservative form `∂t p = −∇·J` with
//! `J = v p − D∇p`, `D = ½σσᵀ` and `v = b − ½ div(σσᵀ)`, both derived from the
//! SDE coefficients.

mod ansatz;
mod grid;
mod solver;

pub use ansatz::{
    ansatz_residual, ansatz_residual_with, conditional_deviation, Conditional,
    ConditionalDeviation, ResidualOptions,
};
pub use grid::{marginal, mollified_delta, DensityGrid, GridDomain};
pub use solver::{solve_fp, solve_fp_with, stability_bound, FpOptions, FpSolution};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Manifold;
use crate::jet::{Jet2, Real};
use crate::sde::{SdeSystem, SystemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FpEquation {
    #[serde(rename = "fp1-s3")]
    Fp1S3,
    #[serde(rename = "fp2-s3")]
    Fp2S3,
    #[serde(rename = "fp1-h3")]
    Fp1H3,
    #[serde(rename = "fp2-h3")]
    Fp2H3,
}

impl fmt::Display for FpEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FpEquation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FpEquation::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown equation '{s}'")))
    }
}

/// Coefficients of the expanded operator at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expanded<T> {
    pub a_xx: T,
    pub a_xy: T,
    pub a_yy: T,
    pub b_x: T,
    pub b_y: T,
    pub c: T,
}

impl FpEquation {
    pub const ALL: [FpEquation; 4] = [
        FpEquation::Fp1S3,
        FpEquation::Fp2S3,
        FpEquation::Fp1H3,
        FpEquation::Fp2H3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FpEquation::Fp1S3 => "fp1-s3",
            FpEquation::Fp2S3 => "fp2-s3",
            FpEquation::Fp1H3 => "fp1-h3",
            FpEquation::Fp2H3 => "fp2-h3",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            FpEquation::Fp1S3 | FpEquation::Fp1H3 => 1,
            _ => 2,
        }
    }

    /// The SDE whose law the equation transports (its first coordinate for `fp1-h3`).
    pub fn system(self) -> SdeSystem {
        SdeSystem::new(match self {
            FpEquation::Fp1S3 => SystemId::S3X,
            FpEquation::Fp2S3 => SystemId::S3Xy,
            FpEquation::Fp1H3 | FpEquation::Fp2H3 => SystemId::H3Wc,
        })
    }

    pub fn is_hyperbolic(self) -> bool {
        matches!(self, FpEquation::Fp1H3 | FpEquation::Fp2H3)
    }

    pub fn matches(self, domain: &GridDomain) -> bool {
        matches!(
            (self, domain),
            (FpEquation::Fp1S3, GridDomain::S3Interval)
                | (FpEquation::Fp2S3, GridDomain::S3Disc)
                | (FpEquation::Fp1H3, GridDomain::H3Interval { .. })
                | (FpEquation::Fp2H3, GridDomain::H3Box { .. })
        )
    }

    /// The grid domain of the equation; `lambda_max` is ignored on S³.
    pub fn domain(self, lambda_max: f64) -> GridDomain {
        match self {
            FpEquation::Fp1S3 => GridDomain::S3Interval,
            FpEquation::Fp2S3 => GridDomain::S3Disc,
            FpEquation::Fp1H3 => GridDomain::H3Interval { lambda_max },
            FpEquation::Fp2H3 => GridDomain::H3Box { lambda_max },
        }
    }

    pub fn manifold(self) -> Manifold {
        if self.is_hyperbolic() {
            Manifold::H3
        } else {
            Manifold::S3
        }
    }

    pub(crate) fn check_grid(self, grid: &DensityGrid) -> Result<()> {
        if self.matches(&grid.domain) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{self} cannot act on a {:?} grid",
                grid.domain
            )))
        }
    }

    /// Expanded coefficients at `(x, y)`; `y` is ignored in 1D.
    pub fn expanded<T: Real>(self, x: T, y: T) -> Expanded<T> {
        let z = T::constant(0.0);
        let one = T::constant(1.0);
        match self {
            FpEquation::Fp1S3 => Expanded {
                a_xx: (one - x * x).scale(0.5),
                a_xy: z,
                a_yy: z,
                b_x: x.scale(-0.5),
                b_y: z,
                c: T::constant(0.5),
            },
            FpEquation::Fp2S3 => Expanded {
                a_xx: (one - x * x).scale(0.5),
                a_xy: -(x * y),
                a_yy: (one - y * y).scale(0.5),
                b_x: x.scale(-1.5),
                b_y: y.scale(-1.5),
                c: z,
            },
            FpEquation::Fp1H3 => Expanded {
                a_xx: (x * x - one).scale(0.5),
                a_xy: z,
                a_yy: z,
                b_x: x.scale(0.5),
                b_y: z,
                c: T::constant(-0.5),
            },
            FpEquation::Fp2H3 => Expanded {
                a_xx: (x * x - one).scale(0.5),
                a_xy: y * x - one,
                a_yy: (y * y).scale(0.5),
                b_x: x.scale(1.5),
                b_y: y.scale(1.5),
                c: z,
            },
        }
    }

    fn state<T: Real>(self, x: T, y: T) -> [T; 2] {
        match self {
            // the w-equation does not depend on c; any admissible c will do
            FpEquation::Fp1H3 => [x, x],
            _ => [x, y],
        }
    }

    /// Drift `b` of the underlying SDE.
    pub fn drift<T: Real>(self, x: T, y: T) -> [T; 2] {
        let s = self.state(x, y);
        let b = self.system().drift_generic(&s);
        if self.dimension() == 1 {
            [b[0], T::constant(0.0)]
        } else {
            b
        }
    }

    /// Covariation `a = σσᵀ` of the underlying SDE.
    pub fn covariation<T: Real>(self, x: T, y: T) -> [[T; 2]; 2] {
        let s = self.state(x, y);
        let a = self.system().covariation(&s);
        if self.dimension() == 1 {
            let z = T::constant(0.0);
            [[a[0][0], z], [z, z]]
        } else {
            a
        }
    }

    /// Diffusion tensor `D = ½a`.
    pub fn diffusion(self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let a = self.covariation(x, y);
        [
            [0.5 * a[0][0], 0.5 * a[0][1]],
            [0.5 * a[1][0], 0.5 * a[1][1]],
        ]
    }

    /// Conservative velocity `v = b − ½ div a`, from exact derivatives of `a`.
    pub fn velocity(self, x: f64, y: f64) -> [f64; 2] {
        let a = self.covariation(Jet2::variable(x, 0), Jet2::variable(y, 1));
        let b = self.drift(x, y);
        let d = self.dimension();
        let mut v = [0.0; 2];
        for i in 0..d {
            let div: f64 = (0..d).map(|j| a[i][j].g[j]).sum();
            v[i] = b[i] - 0.5 * div;
        }
        v
    }

    /// Expanded operator applied to a function given by its 2-jet at a point.
    pub fn apply_expanded(self, x: f64, y: f64, f: &Jet2) -> f64 {
        let e = self.expanded(x, y);
        e.a_xx * f.h[0][0]
            + e.a_xy * f.h[0][1]
            + e.a_yy * f.h[1][1]
            + e.b_x * f.g[0]
            + e.b_y * f.g[1]
            + e.c * f.v
    }

    /// Forward Kolmogorov operator `½ ∂i∂j(a_ij f) − ∂i(b_i f)` built from the
    /// SDE coefficients, for `f` given as a function of two jets.
    pub fn apply_kolmogorov<F: Fn(Jet2, Jet2) -> Jet2>(self, x: f64, y: f64, f: F) -> f64 {
        let (jx, jy) = (Jet2::variable(x, 0), Jet2::variable(y, 1));
        let fv = f(jx, jy);
        let a = self.covariation(jx, jy);
        let b = self.drift(jx, jy);
        let d = self.dimension();
        let mut out = 0.0;
        for i in 0..d {
            out -= (b[i] * fv).g[i];
            for j in 0..d {
                out += 0.5 * (a[i][j] * fv).h[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn test_fn(x: Jet2, y: Jet2) -> Jet2 {
        // smooth, non-polynomial, couples both variables
        (x * y.scale(0.7) + x.sin()).cos() + (y * y.scale(0.3)).sinh() + x * x * y
    }

    #[test]
    fn expanded_forms_match_sde_coefficients() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for eq in FpEquation::ALL {
            for _ in 0..100 {
                let (x, y) = match eq {
                    FpEquation::Fp1S3 | FpEquation::Fp2S3 => loop {
                        let (x, y): (f64, f64) =
                            (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                        if x * x + y * y < 1.0 {
                            break (x, y);
                        }
                    },
                    _ => {
                        let w: f64 = rng.random_range(1.0..6.0);
                        let h = (w * w - 1.0).sqrt();
                        (w, rng.random_range(w - h..=w + h))
                    }
                };
                let (jx, jy) = (Jet2::variable(x, 0), Jet2::variable(y, 1));
                let f = if eq.dimension() == 1 {
                    test_fn(jx, Jet2::constant(0.4))
                } else {
                    test_fn(jx, jy)
                };
                let lhs = eq.apply_expanded(x, y, &f);
                let rhs = eq.apply_kolmogorov(x, y, |a, b| {
                    if eq.dimension() == 1 {
                        test_fn(a, Jet2::constant(0.4))
                    } else {
                        test_fn(a, b)
                    }
                });
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()),
                    "{eq} at ({x}, {y}): {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn velocities() {
        for &(x, y) in &[(0.3, -0.2), (-0.6, 0.5)] {
            assert!((FpEquation::Fp1S3.velocity(x, y)[0] + 0.5 * x).abs() < 1e-15);
            let v = FpEquation::Fp2S3.velocity(x, y);
            assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
        }
        for &(w, c) in &[(1.5, 1.0), (3.0, 0.5)] {
            assert!((FpEquation::Fp1H3.velocity(w, c)[0] - 0.5 * w).abs() < 1e-15);
            let v = FpEquation::Fp2H3.velocity(w, c);
            assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_density_of_fp1_s3() {
        // (2/π)√(1−x²) is annihilated by the expanded operator
        for k in 1..40 {
            let x = -0.975 + k as f64 * 0.05;
            let jx = Jet2::variable(x, 0);
            let p = (Jet2::constant(1.0) - jx * jx)
                .sqrt()
                .scale(2.0 / std::f64::consts::PI);
            assert!(FpEquation::Fp1S3.apply_expanded(x, 0.0, &p).abs() < 1e-12);
        }
    }

    #[test]
    fn names() {
        for e in FpEquation::ALL {
            assert_eq!(e.name().parse::<FpEquation>().unwrap(), e);
        }
        assert!("fp3-s3".parse::<FpEquation>().is_err());
    }
}
