//! Brownian motion on R³, SU(2) and H³ and its projections.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{EuclideanPoint3, HPoint, HalfSpacePoint, Su2Point};
use crate::noise::{NoiseStream, SeedRecord};
use crate::sde::SystemId;

type Mat2 = [[Complex64; 2]; 2];

/// The basis `e1 = [[0, i], [i, 0]]`, `e2 = [[0, −1], [1, 0]]`, `e3 = [[i, 0], [0, −i]]` of su(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Generators {
    pub e1: Mat2,
    pub e2: Mat2,
    pub e3: Mat2,
}

impl Default for Su2Generators {
    fn default() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        Su2Generators {
            e1: [[z, i], [i, z]],
            e2: [[z, -one], [one, z]],
            e3: [[i, z], [z, -i]],
        }
    }
}

impl Su2Generators {
    pub fn as_array(&self) -> [Mat2; 3] {
        [self.e1, self.e2, self.e3]
    }

    /// `v1 e1 + v2 e2 + v3 e3`.
    pub fn combine(&self, v: [f64; 3]) -> Mat2 {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (e, vk) in self.as_array().iter().zip(v) {
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] += e[r][c] * vk;
                }
            }
        }
        m
    }
}

pub fn mat_mul(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = x[r][0] * y[0][c] + x[r][1] * y[1][c];
        }
    }
    m
}

pub fn bm_step_r3(p: &EuclideanPoint3, db: [f64; 3]) -> EuclideanPoint3 {
    EuclideanPoint3 {
        x: p.x + db[0],
        y: p.y + db[1],
        z: p.z + db[2],
    }
}

/// One Euler step of `dg = g Σ e_i dB_i − (3/2) g dt` on the first row `(a, b)`.
/// The result is not projected back onto the group.
pub fn bm_step_su2_ito(g: &Su2Point, db: [f64; 3], dt: f64) -> Su2Point {
    let (a, b) = (g.a(), g.b());
    let i = Complex64::new(0.0, 1.0);
    let damp = 1.5 * dt;
    let a2 = a + b * Complex64::new(db[1], db[0]) + i * a * db[2] - a * damp;
    let b2 = b + a * Complex64::new(-db[1], db[0]) - i * b * db[2] - b * damp;
    Su2Point::from_entries_unchecked(a2, b2)
}

/// Geometric step `g · exp(Σ e_i ΔB_i)`.
pub fn bm_step_su2_exp(g: &Su2Point, db: [f64; 3]) -> Su2Point {
    g.mul(&Su2Point::exp_algebra(db))
}

/// Half-space step: `x_i += y ΔB_i`, `y ← y exp(ΔB_3 − dt)`.
pub fn bm_step_h3_halfspace(p: &HalfSpacePoint, db: [f64; 3], dt: f64) -> HalfSpacePoint {
    HalfSpacePoint {
        x1: p.x1 + p.y * db[0],
        x2: p.x2 + p.y * db[1],
        y: p.y * (db[2] - dt).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    R3,
    S3,
    H3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Direct,
    Ito,
    Exp,
    Halfspace,
}

macro_rules! named_enum {
    ($t:ty, $what:literal, $($v:path => $s:literal),+ $(,)?) => {
        impl $t {
            pub fn name(self) -> &'static str {
                match self { $($v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
    };
}
pub(crate) use named_enum;

named_enum!(Manifold, "manifold", Manifold::R3 => "r3", Manifold::S3 => "s3", Manifold::H3 => "h3");
named_enum!(Scheme, "scheme",
    Scheme::Direct => "direct", Scheme::Ito => "ito", Scheme::Exp => "exp", Scheme::Halfspace => "halfspace");

impl Manifold {
    pub fn default_scheme(self) -> Scheme {
        match self {
            Manifold::R3 => Scheme::Direct,
            Manifold::S3 => Scheme::Exp,
            Manifold::H3 => Scheme::Halfspace,
        }
    }

    pub fn supports(self, scheme: Scheme) -> bool {
        matches!(
            (self, scheme),
            (Manifold::R3, Scheme::Direct)
                | (Manifold::S3, Scheme::Ito)
                | (Manifold::S3, Scheme::Exp)
                | (Manifold::H3, Scheme::Halfspace)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupState {
    R3(EuclideanPoint3),
    S3(Su2Point),
    H3(HPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupOptions {
    /// Project the Itô scheme back onto `|a|² + |b|² = 1` after every step.
    pub renormalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPath {
    pub manifold: Manifold,
    pub scheme: Scheme,
    pub dt: f64,
    pub states: Vec<GroupState>,
    pub seed: SeedRecord,
}

impl GroupPath {
    pub fn endpoint(&self) -> &GroupState {
        self.states.last().expect("a path holds at least its start")
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

enum Walker {
    R3(EuclideanPoint3),
    S3Ito(Su2Point),
    S3Exp(Su2Point),
    H3(HalfSpacePoint),
}

impl Walker {
    fn state(&self) -> GroupState {
        match self {
            Walker::R3(p) => GroupState::R3(*p),
            Walker::S3Ito(g) | Walker::S3Exp(g) => GroupState::S3(*g),
            Walker::H3(p) => GroupState::H3(p.to_hpoint()),
        }
    }
}

fn check_pairing(manifold: Manifold, scheme: Scheme) -> Result<()> {
    if manifold.supports(scheme) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "scheme '{scheme}' is not available on '{manifold}'"
        )))
    }
}

fn run<F: FnMut(&Walker)>(
    manifold: Manifold,
    scheme: Scheme,
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    opts: GroupOptions,
    mut visit: F,
) -> Result<()> {
    check_pairing(manifold, scheme)?;
    if !(t_end >= 0.0 && t_end.is_finite()) || n_steps == 0 {
        return Err(Error::Config(format!(
            "need t_end >= 0 and n_steps >= 1 (t_end={t_end}, n_steps={n_steps})"
        )));
    }
    let dt = t_end / n_steps as f64;
    let mut noise = NoiseStream::new(seed, 3);
    let sd = dt.sqrt();
    let mut w = match scheme {
        Scheme::Direct => Walker::R3(EuclideanPoint3::ORIGIN),
        Scheme::Ito => Walker::S3Ito(Su2Point::IDENTITY),
        Scheme::Exp => Walker::S3Exp(Su2Point::IDENTITY),
        Scheme::Halfspace => Walker::H3(HalfSpacePoint::BASE),
    };
    visit(&w);
    let mut db = [0.0; 3];
    for step in 0..n_steps {
        noise.fill_normal(&mut db, sd);
        w = match w {
            Walker::R3(p) => Walker::R3(bm_step_r3(&p, db)),
            Walker::S3Ito(g) => {
                let next = bm_step_su2_ito(&g, db, dt);
                if opts.renormalize {
                    let n = Su2Point::normalize(next.a(), next.b()).map_err(|e| {
                        Error::Integration {
                            path: seed.stream,
                            step,
                            reason: e.to_string(),
                        }
                    })?;
                    Walker::S3Ito(n)
                } else {
                    Walker::S3Ito(next)
                }
            }
            Walker::S3Exp(g) => Walker::S3Exp(bm_step_su2_exp(&g, db)),
            Walker::H3(p) => Walker::H3(bm_step_h3_halfspace(&p, db, dt)),
        };
        visit(&w);
    }
    Ok(())
}

/// A full path from the base point (origin, identity, or half-space point (0, 0, 1)).
pub fn simulate_group_path(
    manifold: Manifold,
    scheme: Scheme,
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    opts: GroupOptions,
) -> Result<GroupPath> {
    let mut states = Vec::with_capacity(n_steps + 1);
    run(manifold, scheme, t_end, n_steps, seed, opts, |w| {
        states.push(w.state())
    })?;
    Ok(GroupPath {
        manifold,
        scheme,
        dt: t_end / n_steps as f64,
        states,
        seed,
    })
}

/// The half-space trajectory underlying an `h3` path.
pub fn simulate_halfspace_path(
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
) -> Result<Vec<HalfSpacePoint>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    run(
        Manifold::H3,
        Scheme::Halfspace,
        t_end,
        n_steps,
        seed,
        GroupOptions::default(),
        |w| {
            if let Walker::H3(p) = w {
                out.push(*p)
            }
        },
    )?;
    Ok(out)
}

pub fn simulate_group_endpoint(
    manifold: Manifold,
    scheme: Scheme,
    t_end: f64,
    n_steps: usize,
    seed: SeedRecord,
    opts: GroupOptions,
) -> Result<GroupState> {
    let mut last = None;
    run(manifold, scheme, t_end, n_steps, seed, opts, |w| {
        last = Some(w.state())
    })?;
    Ok(last.expect("at least one state"))
}

/// Endpoints of `n_paths` paths; path `i` draws from stream `i` of `master_seed`.
pub fn simulate_group_ensemble(
    manifold: Manifold,
    scheme: Scheme,
    t_end: f64,
    n_steps: usize,
    n_paths: usize,
    master_seed: u64,
    opts: GroupOptions,
) -> Result<Vec<GroupState>> {
    check_pairing(manifold, scheme)?;
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            simulate_group_endpoint(
                manifold,
                scheme,
                t_end,
                n_steps,
                SeedRecord::new(master_seed, i),
                opts,
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    R,
    Rz,
    Theta,
    AXy,
    Polar,
    Lambda,
    Wc,
}

named_enum!(Projection, "projection",
    Projection::R => "r", Projection::Rz => "rz", Projection::Theta => "theta",
    Projection::AXy => "a_xy", Projection::Polar => "polar", Projection::Lambda => "lambda",
    Projection::Wc => "wc");

impl Projection {
    pub fn manifold(self) -> Manifold {
        match self {
            Projection::R | Projection::Rz => Manifold::R3,
            Projection::Theta | Projection::AXy | Projection::Polar => Manifold::S3,
            Projection::Lambda | Projection::Wc => Manifold::H3,
        }
    }

    /// The SDE system the projected process should follow.
    pub fn system(self) -> SystemId {
        match self {
            Projection::R => SystemId::Bessel3,
            Projection::Rz => SystemId::R3Rz,
            Projection::Theta => SystemId::S3Theta,
            Projection::AXy => SystemId::S3Xy,
            Projection::Polar => SystemId::S3Polar,
            Projection::Lambda => SystemId::H3Lambda,
            Projection::Wc => SystemId::H3Wc,
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Projection::R | Projection::Theta | Projection::Lambda => 1,
            _ => 2,
        }
    }
}

pub fn project_state(state: &GroupState, projection: Projection) -> Result<Vec<f64>> {
    let out = match (state, projection) {
        (GroupState::R3(p), Projection::R) => vec![p.radius()],
        (GroupState::R3(p), Projection::Rz) => vec![p.radius(), p.z],
        (GroupState::S3(g), Projection::Theta) => vec![g.trace_angle()],
        (GroupState::S3(g), Projection::AXy) => vec![g.x(), g.y()],
        (GroupState::S3(g), Projection::Polar) => vec![g.rho(), g.phi()],
        (GroupState::H3(h), Projection::Lambda) => vec![h.radial_lambda()],
        (GroupState::H3(h), Projection::Wc) => vec![h.w(), h.c()],
        _ => {
            return Err(Error::Config(format!(
                "projection '{projection}' does not apply to this manifold"
            )))
        }
    };
    Ok(out)
}

pub fn project_group_path(path: &GroupPath, projection: Projection) -> Result<Vec<Vec<f64>>> {
    if projection.manifold() != path.manifold {
        return Err(Error::Config(format!(
            "projection '{projection}' does not apply to '{}'",
            path.manifold
        )));
    }
    path.states
        .iter()
        .map(|s| project_state(s, projection))
        .collect()
}

/// Projects an ensemble onto one coordinate per state (component `k` of `projection`).
pub fn project_ensemble(
    states: &[GroupState],
    projection: Projection,
    k: usize,
) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| project_state(s, projection).map(|v| v[k]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn generators_square_to_minus_identity_and_are_orthonormal() {
        let g = Su2Generators::default();
        let e = g.as_array();
        for (i, ei) in e.iter().enumerate() {
            let sq = mat_mul(ei, ei);
            assert_eq!(
                sq,
                [[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
            );
            for (j, ej) in e.iter().enumerate() {
                // <X, Y> = -½ tr(XY)
                let p = mat_mul(ei, ej);
                let ip = -0.5 * (p[0][0] + p[1][1]);
                assert_eq!(ip, c(if i == j { 1.0 } else { 0.0 }, 0.0));
            }
            // traceless, anti-Hermitian
            assert_eq!(ei[0][0] + ei[1][1], c(0.0, 0.0));
            for r in 0..2 {
                for s in 0..2 {
                    assert_eq!(ei[r][s], -ei[s][r].conj());
                }
            }
        }
    }

    #[test]
    fn ito_step_is_the_matrix_equation_on_the_first_row() {
        let gens = Su2Generators::default();
        let g = Su2Point::exp_algebra([0.3, -0.2, 0.5]);
        let (db, dt) = ([0.01, -0.03, 0.02], 1e-3);
        let gm = [[g.a(), g.b()], [-g.b().conj(), g.a().conj()]];
        let inc = mat_mul(&gm, &gens.combine(db));
        let want_a = gm[0][0] + inc[0][0] - gm[0][0] * (1.5 * dt);
        let want_b = gm[0][1] + inc[0][1] - gm[0][1] * (1.5 * dt);
        let got = bm_step_su2_ito(&g, db, dt);
        assert!((got.a() - want_a).norm() < 1e-15);
        assert!((got.b() - want_b).norm() < 1e-15);
        // exponential agrees with the closed form
        let v = gens.combine(db);
        let e = Su2Point::exp_algebra(db);
        let n = (db[0] * db[0] + db[1] * db[1] + db[2] * db[2]).sqrt();
        assert!((e.a() - (c(n.cos(), 0.0) + v[0][0] * (n.sin() / n))).norm() < 1e-15);
        assert!((e.b() - v[0][1] * (n.sin() / n)).norm() < 1e-15);
    }

    #[test]
    fn step_examples() {
        assert_eq!(
            bm_step_r3(
                &EuclideanPoint3 {
                    x: 1.0,
                    y: 2.0,
                    z: 3.0
                },
                [0.1, 0.0, 0.0]
            ),
            EuclideanPoint3 {
                x: 1.1,
                y: 2.0,
                z: 3.0
            }
        );
        let dt = 1e-3;
        let g = bm_step_su2_ito(&Su2Point::IDENTITY, [0.0; 3], dt);
        assert_abs_diff_eq!(g.a().re, 1.0 - 1.5 * dt);
        assert_abs_diff_eq!(1.0 - g.norm_sqr(), 3.0 * dt, epsilon = 3e-6);
        let h = 0.05;
        let g = bm_step_su2_ito(&Su2Point::IDENTITY, [h, 0.0, 0.0], dt);
        assert_eq!(g.a(), c(1.0 - 1.5 * dt, 0.0));
        assert_eq!(g.b(), c(0.0, h));
        let g = bm_step_su2_exp(&Su2Point::IDENTITY, [h, 0.0, 0.0]);
        assert_abs_diff_eq!(g.a().re, h.cos(), epsilon = 1e-16);
        assert_abs_diff_eq!(g.b().im, h.sin(), epsilon = 1e-16);
        assert_eq!(bm_step_su2_exp(&g, [0.0; 3]), g);
        let p = bm_step_h3_halfspace(&HalfSpacePoint::BASE, [0.0; 3], dt);
        assert_eq!((p.x1, p.x2), (0.0, 0.0));
        assert_abs_diff_eq!(p.y, (-dt).exp());
    }

    #[test]
    fn exp_scheme_stays_on_the_group() {
        let path = simulate_group_endpoint(
            Manifold::S3,
            Scheme::Exp,
            1000.0,
            1_000_000,
            SeedRecord::new(4, 0),
            GroupOptions::default(),
        )
        .unwrap();
        let GroupState::S3(g) = path else { panic!() };
        assert!(
            (g.norm_sqr() - 1.0).abs() <= 1e-10,
            "{}",
            g.norm_sqr() - 1.0
        );
    }

    #[test]
    fn halfspace_points_have_unit_determinant() {
        let hs = simulate_halfspace_path(2.0, 2000, SeedRecord::new(8, 3)).unwrap();
        for p in hs {
            assert!(p.y > 0.0);
            let h = p.to_hpoint();
            assert!((h.a() * h.c() - h.b().norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_horizon_and_projections() {
        let path = simulate_group_path(
            Manifold::S3,
            Scheme::Exp,
            0.0,
            10,
            SeedRecord::new(0, 0),
            GroupOptions::default(),
        )
        .unwrap();
        assert!(path
            .states
            .iter()
            .all(|s| *s == GroupState::S3(Su2Point::IDENTITY)));
        let th = project_group_path(&path, Projection::Theta).unwrap();
        assert!(th.iter().all(|v| v == &vec![0.0]));
        let h = simulate_group_path(
            Manifold::H3,
            Scheme::Halfspace,
            0.0,
            3,
            SeedRecord::new(0, 0),
            GroupOptions::default(),
        )
        .unwrap();
        assert_eq!(
            project_group_path(&h, Projection::Wc).unwrap()[0],
            vec![1.0, 1.0]
        );
        let r = simulate_group_path(
            Manifold::R3,
            Scheme::Direct,
            1.0,
            20,
            SeedRecord::new(2, 0),
            GroupOptions::default(),
        )
        .unwrap();
        for (s, v) in r
            .states
            .iter()
            .zip(project_group_path(&r, Projection::Rz).unwrap())
        {
            let GroupState::R3(p) = s else { panic!() };
            assert_eq!(v, vec![(p.x * p.x + p.y * p.y + p.z * p.z).sqrt(), p.z]);
        }
        assert!(project_group_path(&r, Projection::Theta).is_err());
    }

    #[test]
    fn invalid_pairings_are_rejected() {
        let seed = SeedRecord::new(0, 0);
        let o = GroupOptions::default();
        assert!(matches!(
            simulate_group_path(Manifold::S3, Scheme::Halfspace, 1.0, 10, seed, o),
            Err(Error::Config(_))
        ));
        assert!(simulate_group_path(Manifold::R3, Scheme::Exp, 1.0, 10, seed, o).is_err());
        assert!("s4".parse::<Manifold>().is_err());
        assert_eq!("a_xy".parse::<Projection>().unwrap(), Projection::AXy);
    }

    #[test]
    fn ito_and_exp_share_increments() {
        // with the same keys, one small step of each scheme differs only at second order
        let seed = SeedRecord::new(12, 5);
        let o = GroupOptions::default();
        let a = simulate_group_endpoint(Manifold::S3, Scheme::Ito, 1e-4, 1, seed, o).unwrap();
        let b = simulate_group_endpoint(Manifold::S3, Scheme::Exp, 1e-4, 1, seed, o).unwrap();
        let (GroupState::S3(a), GroupState::S3(b)) = (a, b) else {
            panic!()
        };
        assert!((a.a() - b.a()).norm() < 1e-3 && (a.b() - b.b()).norm() < 1e-5);
    }

    #[test]
    fn renormalized_ito_stays_on_group() {
        let o = GroupOptions { renormalize: true };
        let GroupState::S3(g) = simulate_group_endpoint(
            Manifold::S3,
            Scheme::Ito,
            5.0,
            500,
            SeedRecord::new(1, 1),
            o,
        )
        .unwrap() else {
            panic!()
        };
        assert!((g.norm_sqr() - 1.0).abs() < 1e-14);
    }
}
