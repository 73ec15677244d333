//! The projected SDE systems and a seeded Euler–Maruyama integrator.
//!
//! | id          | state      | drift / diffusion                                              |
//! |-------------|------------|----------------------------------------------------------------|
//! | `bessel3`   | r          | dr = dB + dt/r                                                 |
//! | `r3-rz`     | (r, z)     | dr = √(r²−z²)/r dB¹ + z/r dB² + dt/r,  dz = dB²               |
//! | `s3-theta`  | θ          | dθ = dB + cot θ dt                                             |
//! | `s3-x`      | x          | dx = √(1−x²) dB − (3/2) x dt                                   |
//! | `s3-xy`     | (x, y)     | Re/Im of the upper-left entry of SU(2) Brownian motion         |
//! | `s3-polar`  | (ρ, φ)     | dρ = √(1−ρ²) dB¹ + (1−3ρ²)/(2ρ) dt,  dφ = dB²/ρ               |
//! | `h3-lambda` | λ          | dλ = dB + coth λ dt                                            |
//! | `h3-wc`     | (w, c)     | half-trace and lower diagonal entry of H³ Brownian motion      |
//!
//! After every step the state is mapped back into the closed admissible
//! region: degenerate-diffusion boundaries are clamped, entrance boundaries of
//! singular drifts are reflected. Near those boundaries the drift increment
//! of a step is truncated to length `√dt`, the start offset.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::jet::Real;
use crate::noise::{NoiseStream, SeedRecord};

/// Tolerance for the closed admissible region.
pub const REGION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemId {
    #[serde(rename = "bessel3")]
    Bessel3,
    #[serde(rename = "r3-rz")]
    R3Rz,
    #[serde(rename = "s3-theta")]
    S3Theta,
    #[serde(rename = "s3-x")]
    S3X,
    #[serde(rename = "s3-xy")]
    S3Xy,
    #[serde(rename = "s3-polar")]
    S3Polar,
    #[serde(rename = "h3-lambda")]
    H3Lambda,
    #[serde(rename = "h3-wc")]
    H3Wc,
}

impl SystemId {
    pub const ALL: [SystemId; 8] = [
        SystemId::Bessel3,
        SystemId::R3Rz,
        SystemId::S3Theta,
        SystemId::S3X,
        SystemId::S3Xy,
        SystemId::S3Polar,
        SystemId::H3Lambda,
        SystemId::H3Wc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Bessel3 => "bessel3",
            SystemId::R3Rz => "r3-rz",
            SystemId::S3Theta => "s3-theta",
            SystemId::S3X => "s3-x",
            SystemId::S3Xy => "s3-xy",
            SystemId::S3Polar => "s3-polar",
            SystemId::H3Lambda => "h3-lambda",
            SystemId::H3Wc => "h3-wc",
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown SDE system '{s}'")))
    }
}

/// Drift vector and diffusion matrix (rows: state components, columns: noise components).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients<T> {
    pub drift: [T; 2],
    pub diffusion: [[T; 2]; 2],
}

/// One of the catalogued SDE systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SdeSystem {
    pub id: SystemId,
}

fn nonneg_sqrt<T: Real>(q: T) -> T {
    if q.value() <= 0.0 {
        T::constant(0.0)
    } else {
        q.sqrt()
    }
}

impl SdeSystem {
    pub fn new(id: SystemId) -> Self {
        SdeSystem { id }
    }

    pub fn dimension(&self) -> usize {
        match self.id {
            SystemId::Bessel3 | SystemId::S3Theta | SystemId::S3X | SystemId::H3Lambda => 1,
            _ => 2,
        }
    }

    pub fn noise_dimension(&self) -> usize {
        self.dimension()
    }

    pub fn state_labels(&self) -> &'static [&'static str] {
        match self.id {
            SystemId::Bessel3 => &["r"],
            SystemId::R3Rz => &["r", "z"],
            SystemId::S3Theta => &["theta"],
            SystemId::S3X => &["x"],
            SystemId::S3Xy => &["x", "y"],
            SystemId::S3Polar => &["rho", "phi"],
            SystemId::H3Lambda => &["lambda"],
            SystemId::H3Wc => &["w", "c"],
        }
    }

    /// Image of the group unit (or origin), where the projected process starts.
    pub fn natural_start(&self) -> [f64; 2] {
        match self.id {
            SystemId::Bessel3 | SystemId::S3Theta | SystemId::H3Lambda => [0.0, 0.0],
            SystemId::R3Rz => [0.0, 0.0],
            SystemId::S3X => [1.0, 0.0],
            SystemId::S3Xy | SystemId::S3Polar => [1.0, 0.0],
            SystemId::H3Wc => [1.0, 1.0],
        }
    }

    /// Closed admissible region, up to [`REGION_TOL`].
    pub fn is_admissible(&self, s: &[f64]) -> bool {
        if s.len() != self.dimension() || s.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let t = REGION_TOL;
        match self.id {
            SystemId::Bessel3 | SystemId::H3Lambda => s[0] >= 0.0,
            SystemId::R3Rz => s[0] >= 0.0 && s[1].abs() <= s[0] * (1.0 + t) + t,
            SystemId::S3Theta => s[0] >= 0.0 && s[0] <= std::f64::consts::PI,
            SystemId::S3X => s[0].abs() <= 1.0 + t,
            SystemId::S3Xy => s[0] * s[0] + s[1] * s[1] <= 1.0 + t,
            SystemId::S3Polar => s[0] >= 0.0 && s[0] <= 1.0 + t,
            SystemId::H3Wc => {
                let (w, c) = (s[0], s[1]);
                w >= 1.0 - t && c > 0.0 && c * c - 2.0 * c * w + 1.0 <= t * w * w
            }
        }
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dimension() {
            return Err(domain(format!(
                "{} expects a state of dimension {}, got {}",
                self.id,
                self.dimension(),
                s.len()
            )));
        }
        if !self.is_admissible(s) {
            return Err(domain(format!(
                "state {s:?} outside the region of {}",
                self.id
            )));
        }
        Ok(())
    }

    fn singular(&self, s: &[f64]) -> Error {
        Error::Singularity {
            system: self.id.name().into(),
            state: s.to_vec(),
        }
    }

    /// Drift and diffusion at an interior state, generic over the scalar so
    /// that exact derivatives can be taken.
    pub fn coefficients_generic<T: Real>(&self, s: &[T]) -> Result<Coefficients<T>> {
        let vals: Vec<f64> = s.iter().map(|v| v.value()).collect();
        self.check_state(&vals)?;
        let zero = T::constant(0.0);
        let one = T::constant(1.0);
        let mut drift = [zero; 2];
        let mut diffusion = [[zero; 2]; 2];
        match self.id {
            SystemId::Bessel3 => {
                if vals[0] <= 0.0 {
                    return Err(self.singular(&vals));
                }
                drift[0] = one / s[0];
                diffusion[0][0] = one;
            }
            SystemId::R3Rz => {
                if vals[0] <= 0.0 {
                    return Err(self.singular(&vals));
                }
                let (r, z) = (s[0], s[1]);
                drift[0] = one / r;
                diffusion[0][0] = nonneg_sqrt(r * r - z * z) / r;
                diffusion[0][1] = z / r;
                diffusion[1][1] = one;
            }
            SystemId::S3Theta => {
                if vals[0] <= 0.0 || vals[0] >= std::f64::consts::PI {
                    return Err(self.singular(&vals));
                }
                drift[0] = s[0].cos() / s[0].sin();
                diffusion[0][0] = one;
            }
            SystemId::S3X => {
                let x = s[0];
                drift[0] = x.scale(-1.5);
                diffusion[0][0] = nonneg_sqrt(one - x * x);
            }
            SystemId::S3Xy => {
                let (x, y) = (s[0], s[1]);
                let rho2 = x * x + y * y;
                if rho2.value() <= 0.0 {
                    return Err(self.singular(&vals));
                }
                let rho = rho2.sqrt();
                let tail = nonneg_sqrt(one - rho2);
                drift = [x.scale(-1.5), y.scale(-1.5)];
                diffusion[0] = [y / rho, x * tail / rho];
                diffusion[1] = [-x / rho, y * tail / rho];
            }
            SystemId::S3Polar => {
                let rho = s[0];
                if vals[0] <= 0.0 {
                    return Err(self.singular(&vals));
                }
                drift[0] = (one - rho * rho.scale(3.0)) / rho.scale(2.0);
                diffusion[0][0] = nonneg_sqrt(one - rho * rho);
                diffusion[1][1] = one / rho;
            }
            SystemId::H3Lambda => {
                if vals[0] <= 0.0 {
                    return Err(self.singular(&vals));
                }
                drift[0] = s[0].cosh() / s[0].sinh();
                diffusion[0][0] = one;
            }
            SystemId::H3Wc => {
                let (w, c) = (s[0], s[1]);
                if vals[0] <= 1.0 {
                    return Err(self.singular(&vals));
                }
                let root = (w * w - one).sqrt();
                drift = [w.scale(1.5), c.scale(1.5)];
                diffusion[0][0] = root;
                diffusion[1][0] = (c * w - one) / root;
                diffusion[1][1] = nonneg_sqrt(c * w.scale(2.0) - c * c - one) / root;
            }
        }
        Ok(Coefficients { drift, diffusion })
    }

    /// Drift and diffusion at `state` (the operation `evaluate_coefficients`).
    pub fn coefficients(&self, state: &[f64]) -> Result<Coefficients<f64>> {
        self.coefficients_generic(state)
    }

    /// Closed-form quadratic covariation `σσᵀ` per unit time.
    ///
    /// Polynomial for the Cartesian systems, so it is also defined where the
    /// diffusion matrix itself is singular (e.g. at the centre of the disc).
    pub fn covariation<T: Real>(&self, s: &[T]) -> [[T; 2]; 2] {
        let zero = T::constant(0.0);
        let one = T::constant(1.0);
        match self.id {
            SystemId::Bessel3 | SystemId::S3Theta | SystemId::H3Lambda => {
                [[one, zero], [zero, zero]]
            }
            SystemId::R3Rz => {
                let (r, z) = (s[0], s[1]);
                [[one, z / r], [z / r, one]]
            }
            SystemId::S3X => [[one - s[0] * s[0], zero], [zero, zero]],
            SystemId::S3Xy => {
                let (x, y) = (s[0], s[1]);
                [[one - x * x, -(x * y)], [-(x * y), one - y * y]]
            }
            SystemId::S3Polar => {
                let rho = s[0];
                [[one - rho * rho, zero], [zero, one / (rho * rho)]]
            }
            SystemId::H3Wc => {
                let (w, c) = (s[0], s[1]);
                [[w * w - one, c * w - one], [c * w - one, c * c]]
            }
        }
    }

    /// Drift alone, without the region checks of [`Self::coefficients_generic`].
    pub fn drift_generic<T: Real>(&self, s: &[T]) -> [T; 2] {
        let zero = T::constant(0.0);
        let one = T::constant(1.0);
        match self.id {
            SystemId::Bessel3 => [one / s[0], zero],
            SystemId::R3Rz => [one / s[0], zero],
            SystemId::S3Theta => [s[0].cos() / s[0].sin(), zero],
            SystemId::S3X => [s[0].scale(-1.5), zero],
            SystemId::S3Xy => [s[0].scale(-1.5), s[1].scale(-1.5)],
            SystemId::S3Polar => [(one - s[0] * s[0].scale(3.0)) / s[0].scale(2.0), zero],
            SystemId::H3Lambda => [s[0].cosh() / s[0].sinh(), zero],
            SystemId::H3Wc => [s[0].scale(1.5), s[1].scale(1.5)],
        }
    }

    /// Systems whose drift blows up at an entrance boundary.
    pub fn has_singular_drift(&self) -> bool {
        matches!(
            self.id,
            SystemId::Bessel3
                | SystemId::R3Rz
                | SystemId::S3Theta
                | SystemId::S3Polar
                | SystemId::H3Lambda
        )
    }

    /// Replaces a start on the singular set by the offset `ε₀ = √dt` into the
    /// interior. Other admissible starts are returned unchanged.
    pub fn start_state(&self, x0: &[f64], dt: f64) -> Result<[f64; 2]> {
        self.check_state(x0)?;
        let eps = start_offset(dt);
        let mut s = [0.0; 2];
        s[..x0.len()].copy_from_slice(x0);
        match self.id {
            SystemId::Bessel3 | SystemId::H3Lambda if s[0] == 0.0 => s[0] = eps,
            SystemId::R3Rz if s[0] == 0.0 => s = [eps, 0.0],
            SystemId::S3Theta if s[0] == 0.0 => s[0] = eps,
            SystemId::S3Theta if s[0] == std::f64::consts::PI => s[0] = std::f64::consts::PI - eps,
            SystemId::H3Wc if s[0] <= 1.0 => s = [eps.cosh(), 1.0],
            SystemId::S3Xy if s[0] == 0.0 && s[1] == 0.0 => return Err(self.singular(x0)),
            SystemId::S3Polar if s[0] == 0.0 => return Err(self.singular(x0)),
            _ => {}
        }
        Ok(s)
    }

    /// Maps a post-step state back into the closed region.
    fn safeguard(&self, s: &mut [f64; 2]) -> std::result::Result<(), String> {
        use std::f64::consts::PI;
        match self.id {
            SystemId::Bessel3 | SystemId::H3Lambda => {
                s[0] = s[0].abs();
                if s[0] == 0.0 {
                    return Err("landed on the singular point".into());
                }
            }
            SystemId::R3Rz => {
                s[0] = s[0].abs();
                if s[0] == 0.0 {
                    return Err("landed on r = 0".into());
                }
                s[1] = s[1].clamp(-s[0], s[0]);
            }
            SystemId::S3Theta => {
                let t = s[0].rem_euclid(2.0 * PI);
                s[0] = if t > PI { 2.0 * PI - t } else { t };
                if !(s[0] > 0.0 && s[0] < PI) {
                    return Err(format!("reflection could not repair theta = {}", s[0]));
                }
            }
            SystemId::S3X => s[0] = s[0].clamp(-1.0, 1.0),
            SystemId::S3Xy => {
                let rho = (s[0] * s[0] + s[1] * s[1]).sqrt();
                if rho > 1.0 {
                    s[0] /= rho;
                    s[1] /= rho;
                }
            }
            SystemId::S3Polar => {
                if s[0] < 0.0 {
                    s[0] = -s[0];
                    s[1] += PI;
                }
                s[0] = s[0].min(1.0);
            }
            SystemId::H3Wc => {
                if s[0] < 1.0 {
                    s[0] = 2.0 - s[0];
                }
                let half = (s[0] * s[0] - 1.0).max(0.0).sqrt();
                s[1] = s[1].clamp(s[0] - half, s[0] + half);
            }
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err("non-finite state".into());
        }
        Ok(())
    }
}

/// Offset used to start a process at (the image of) its singular point.
pub fn start_offset(dt: f64) -> f64 {
    dt.sqrt()
}

/// A discretized trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub system: SystemId,
    pub dt: f64,
    pub dimension: usize,
    /// Row-major `(n_steps + 1) × dimension`.
    pub states: Vec<f64>,
    pub seed: SeedRecord,
}

impl Path {
    pub fn len(&self) -> usize {
        self.states.len() / self.dimension
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dimension..(k + 1) * self.dimension]
    }
    pub fn endpoint(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Endpoints of independent paths sharing a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointEnsemble {
    pub system: SystemId,
    pub t_end: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub dimension: usize,
    /// Row-major `n_paths × dimension`.
    pub endpoints: Vec<f64>,
}

impl EndpointEnsemble {
    pub fn len(&self) -> usize {
        self.endpoints.len() / self.dimension
    }
    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }
    pub fn endpoint(&self, i: usize) -> &[f64] {
        &self.endpoints[i * self.dimension..(i + 1) * self.dimension]
    }
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.endpoints
            .chunks(self.dimension)
            .map(|s| s[j])
            .collect()
    }
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.endpoints
            .chunks(self.dimension)
            .map(|s| (s[0], s[1]))
            .collect()
    }
}

fn validate_grid(t_end: f64, n_steps: usize, noise_scale: f64) -> Result<f64> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be positive".into()));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::Config("noise_scale must be non-negative".into()));
    }
    Ok(t_end / n_steps as f64)
}

/// Runs one path, handing every state to `visit`.
fn run<F: FnMut(&[f64; 2])>(
    system: &SdeSystem,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    noise_scale: f64,
    mut visit: F,
) -> Result<[f64; 2]> {
    let dt = validate_grid(t_end, n_steps, noise_scale)?;
    let dim = system.dimension();
    let mut s = system.start_state(x0, dt)?;
    let mut noise = NoiseStream::new(seed, system.noise_dimension());
    let sd = dt.sqrt() * noise_scale;
    let mut db = [0.0; 2];
    visit(&s);
    for step in 0..n_steps {
        let fail = |reason: String| Error::Integration {
            path: seed.stream,
            step,
            reason,
        };
        let co = system
            .coefficients(&s[..dim])
            .map_err(|e| fail(e.to_string()))?;
        noise.fill_normal(&mut db[..dim], sd);
        let mut drift = co.drift;
        if system.has_singular_drift() {
            let len = dt * drift[..dim].iter().map(|d| d * d).sum::<f64>().sqrt();
            if len > dt.sqrt() {
                drift.iter_mut().for_each(|d| *d *= dt.sqrt() / len);
            }
        }
        let mut next = s;
        for i in 0..dim {
            let mut inc = drift[i] * dt;
            for (j, dbj) in db[..dim].iter().enumerate() {
                inc += co.diffusion[i][j] * dbj;
            }
            next[i] += inc;
        }
        system.safeguard(&mut next).map_err(fail)?;
        s = next;
        visit(&s);
    }
    Ok(s)
}

/// Euler–Maruyama path from `x0`; increments come from the stream `seed`.
pub fn integrate_path(
    system: &SdeSystem,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    noise_scale: f64,
) -> Result<Path> {
    let dim = system.dimension();
    let mut states = Vec::with_capacity((n_steps + 1) * dim);
    run(system, x0, t_end, n_steps, seed, noise_scale, |s| {
        states.extend_from_slice(&s[..dim])
    })?;
    Ok(Path {
        system: system.id,
        dt: t_end / n_steps as f64,
        dimension: dim,
        states,
        seed,
    })
}

/// Endpoint of the path that [`integrate_path`] would produce.
pub fn integrate_endpoint(
    system: &SdeSystem,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    noise_scale: f64,
) -> Result<[f64; 2]> {
    run(system, x0, t_end, n_steps, seed, noise_scale, |_| {})
}

/// Endpoints of `n_paths` paths; path `i` uses stream `i` of `master_seed`.
pub fn integrate_ensemble(
    system: &SdeSystem,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    n_paths: usize,
    master_seed: u64,
) -> Result<EndpointEnsemble> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    let dim = system.dimension();
    let results: Vec<Result<[f64; 2]>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            integrate_endpoint(
                system,
                x0,
                t_end,
                n_steps,
                SeedRecord::new(master_seed, i),
                1.0,
            )
        })
        .collect();
    let mut endpoints = Vec::with_capacity(n_paths * dim);
    for r in results {
        endpoints.extend_from_slice(&r?[..dim]);
    }
    Ok(EndpointEnsemble {
        system: system.id,
        t_end,
        dt: t_end / n_steps as f64,
        master_seed,
        dimension: dim,
        endpoints,
    })
}
