//! Named end-to-end checks: each one simulates or solves, applies a test from
//! [`crate::stats`], and returns a [`TestReport`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dh::DhFamily;
use crate::error::{Error, Result};
use crate::fokker_planck::{
    ansatz_residual_with, conditional_deviation, mollified_delta, solve_fp_with, stability_bound,
    DensityGrid, FpEquation, FpOptions, GridDomain, ResidualOptions,
};
use crate::group::{
    named_enum, project_ensemble, simulate_group_ensemble, GroupOptions, GroupState, Manifold,
    Projection, Scheme,
};
use crate::noise::{derive_seed, SeedRecord};
use crate::sde::{integrate_ensemble, integrate_path, SdeSystem, SystemId};
use crate::stats::{
    ks_two_sample, leaf_support, verify_conditional_dh, verify_pitman_dh, EmpiricalSample,
    Provenance, TestReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    ConditionalR3,
    ConditionalS3,
    ConditionalH3,
    RadialR3,
    RadialS3,
    RadialH3,
    SchemeAgreementS3,
    MeanDecayS3,
    StationaryS3,
    ProductPersistenceS3,
    ProductPersistenceH3,
    Covariation,
    Pitman,
}

named_enum!(CheckId, "check",
    CheckId::ConditionalR3 => "conditional-r3", CheckId::ConditionalS3 => "conditional-s3",
    CheckId::ConditionalH3 => "conditional-h3", CheckId::RadialR3 => "radial-r3",
    CheckId::RadialS3 => "radial-s3", CheckId::RadialH3 => "radial-h3",
    CheckId::SchemeAgreementS3 => "scheme-agreement-s3", CheckId::MeanDecayS3 => "mean-decay-s3",
    CheckId::StationaryS3 => "stationary-s3", CheckId::ProductPersistenceS3 => "product-persistence-s3",
    CheckId::ProductPersistenceH3 => "product-persistence-h3", CheckId::Covariation => "covariation",
    CheckId::Pitman => "pitman");

impl CheckId {
    pub const ALL: [CheckId; 13] = [
        CheckId::ConditionalR3,
        CheckId::ConditionalS3,
        CheckId::ConditionalH3,
        CheckId::RadialR3,
        CheckId::RadialS3,
        CheckId::RadialH3,
        CheckId::SchemeAgreementS3,
        CheckId::MeanDecayS3,
        CheckId::StationaryS3,
        CheckId::ProductPersistenceS3,
        CheckId::ProductPersistenceH3,
        CheckId::Covariation,
        CheckId::Pitman,
    ];
}

/// Sizes and thresholds of a check. `defaults` gives the standard run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub paths: usize,
    pub t: f64,
    pub dt: f64,
    pub seed: u64,
    pub half_width: f64,
    pub bins: usize,
    pub threshold: f64,
    /// Grid nodes per axis (Fokker–Planck checks).
    pub nodes: usize,
    pub lambda_max: f64,
    /// Width of the 2D initial delta; `None` means five grid steps.
    pub eps: Option<f64>,
}

impl CheckConfig {
    pub fn defaults(check: CheckId) -> Self {
        let base = CheckConfig {
            paths: 10_000,
            t: 0.5,
            dt: 1e-3,
            seed: 1,
            half_width: 0.02,
            bins: 20,
            threshold: 0.01,
            nodes: 201,
            lambda_max: 3.0,
            eps: None,
        };
        match check {
            CheckId::ConditionalR3 => CheckConfig {
                paths: 200_000,
                t: 1.0,
                ..base
            },
            CheckId::ConditionalS3 | CheckId::ConditionalH3 => CheckConfig {
                paths: 200_000,
                ..base
            },
            CheckId::RadialR3 => CheckConfig { t: 1.0, ..base },
            CheckId::MeanDecayS3 => CheckConfig {
                paths: 100_000,
                ..base
            },
            CheckId::StationaryS3 => CheckConfig {
                paths: 100_000,
                t: 5.0,
                nodes: 401,
                bins: 100,
                ..base
            },
            CheckId::ProductPersistenceH3 => CheckConfig { t: 0.25, ..base },
            CheckId::Covariation => CheckConfig {
                paths: 1000,
                t: 1.0,
                bins: 10,
                ..base
            },
            CheckId::Pitman => CheckConfig {
                paths: 200_000,
                t: 1.0,
                ..base
            },
            _ => base,
        }
    }

    pub fn n_steps(&self) -> Result<usize> {
        if !(self.t > 0.0 && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "t and dt must be positive, got {} and {}",
                self.t, self.dt
            )));
        }
        Ok((self.t / self.dt).round().max(1.0) as usize)
    }

    fn provenance(&self, source: &str) -> Result<Provenance> {
        Ok(Provenance {
            source: source.into(),
            t: Some(self.t),
            dt: Some(self.t / self.n_steps()? as f64),
            seed: Some(self.seed),
        })
    }
}

pub fn run_check(check: CheckId, cfg: &CheckConfig) -> Result<TestReport> {
    let mut r = match check {
        CheckId::ConditionalR3 => conditional_check(Manifold::R3, cfg, &[1.5])?,
        CheckId::ConditionalS3 => conditional_check(
            Manifold::S3,
            cfg,
            &[(std::f64::consts::FRAC_PI_3).cos(), 0.0],
        )?,
        CheckId::ConditionalH3 => conditional_check(Manifold::H3, cfg, &[0.8f64.cosh()])?,
        CheckId::RadialR3 => radial_check(Manifold::R3, cfg)?,
        CheckId::RadialS3 => radial_check(Manifold::S3, cfg)?,
        CheckId::RadialH3 => radial_check(Manifold::H3, cfg)?,
        CheckId::SchemeAgreementS3 => scheme_agreement_check(cfg)?,
        CheckId::MeanDecayS3 => mean_decay_check(cfg)?,
        CheckId::StationaryS3 => stationary_check(cfg)?,
        CheckId::ProductPersistenceS3 => product_persistence_check(Manifold::S3, cfg)?,
        CheckId::ProductPersistenceH3 => product_persistence_check(Manifold::H3, cfg)?,
        CheckId::Covariation => {
            let parts = [
                covariation_check(SystemId::S3Xy, cfg)?,
                covariation_check(SystemId::H3Wc, cfg)?,
            ];
            TestReport::all("covariation", &parts)
        }
        CheckId::Pitman => pitman_check(cfg)?,
    };
    r.name = check.name().into();
    Ok(r)
}

fn group_sample(
    manifold: Manifold,
    scheme: Scheme,
    proj: Projection,
    k: usize,
    cfg: &CheckConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let states = simulate_group_ensemble(
        manifold,
        scheme,
        cfg.t,
        cfg.n_steps()?,
        cfg.paths,
        seed,
        GroupOptions::default(),
    )?;
    project_ensemble(&states, proj, k)
}

fn radial_projection(manifold: Manifold) -> Projection {
    match manifold {
        Manifold::R3 => Projection::R,
        Manifold::S3 => Projection::Theta,
        Manifold::H3 => Projection::Lambda,
    }
}

/// Two-sample KS between the radial image of the group walk and the radial SDE.
pub fn radial_check(manifold: Manifold, cfg: &CheckConfig) -> Result<TestReport> {
    let proj = radial_projection(manifold);
    let group = group_sample(
        manifold,
        manifold.default_scheme(),
        proj,
        0,
        cfg,
        derive_seed(cfg.seed, 1),
    )?;
    let system = SdeSystem::new(proj.system());
    let sde = integrate_ensemble(
        &system,
        &system.natural_start()[..system.dimension()],
        cfg.t,
        cfg.n_steps()?,
        cfg.paths,
        derive_seed(cfg.seed, 2),
    )?;
    let r = ks_two_sample(
        &EmpiricalSample::new(group)?,
        &EmpiricalSample::new(sde.component(0))?,
        cfg.threshold,
    )?;
    Ok(r.label("manifold", manifold.name())
        .label("system", system.id.name())
        .with_provenance(cfg.provenance("group walk vs radial sde")?))
}

/// Conditional DH uniformity on slices of the projected group walk.
pub fn conditional_check(manifold: Manifold, cfg: &CheckConfig, u0s: &[f64]) -> Result<TestReport> {
    let (proj, family) = match manifold {
        Manifold::R3 => (Projection::Rz, DhFamily::R3Sphere),
        Manifold::S3 => (Projection::AXy, DhFamily::S3Class),
        Manifold::H3 => (Projection::Wc, DhFamily::H3Class),
    };
    let states = simulate_group_ensemble(
        manifold,
        manifold.default_scheme(),
        cfg.t,
        cfg.n_steps()?,
        cfg.paths,
        cfg.seed,
        GroupOptions::default(),
    )?;
    let pairs: Vec<(f64, f64)> = project_ensemble(&states, proj, 0)?
        .into_iter()
        .zip(project_ensemble(&states, proj, 1)?)
        .collect();
    let mut parts = Vec::new();
    for &u0 in u0s {
        let mut r =
            verify_conditional_dh(&pairs, family, u0, cfg.half_width, cfg.bins, cfg.threshold)?;
        if family == DhFamily::H3Class {
            // the slab w ∈ u0 ± hw fills the leaf of u0 + hw
            let (elo, ehi) = leaf_support(family, u0 + cfg.half_width);
            let (slo, shi) = (r.parameters["support_lo"], r.parameters["support_hi"]);
            let (vlo, vhi) = (r.parameters["v_min"], r.parameters["v_max"]);
            let err = (vlo - elo).abs().max((vhi - ehi).abs());
            r = r
                .param("support_error", err)
                .param("support_tolerance", SUPPORT_TOL)
                .param("envelope_lo", elo)
                .param("envelope_hi", ehi)
                .param("slab_dilation", (slo - elo).max(ehi - shi))
                .param(
                    "raw_support_error",
                    (vlo - slo).abs().max((vhi - shi).abs()),
                );
            r.pass &= err <= SUPPORT_TOL;
        }
        parts.push(r);
    }
    let r = if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        TestReport::all("conditional", &parts)
    };
    Ok(r.label("manifold", manifold.name())
        .with_provenance(cfg.provenance(&format!("{manifold} group walk"))?))
}

/// Largest gap between the empirical conditional support ends and the leaf
/// filled by the slab (h3).
pub const SUPPORT_TOL: f64 = 0.03;

/// Mean signed norm deficit `1 − |a|² − |b|²` of the plain Itô scheme.
pub fn ito_norm_deficit(t: f64, dt: f64, paths: usize, seed: u64) -> Result<(f64, f64)> {
    let n = (t / dt).round().max(1.0) as usize;
    let states = simulate_group_ensemble(
        Manifold::S3,
        Scheme::Ito,
        t,
        n,
        paths,
        seed,
        GroupOptions::default(),
    )?;
    let d: Vec<f64> = states
        .iter()
        .map(|s| match s {
            GroupState::S3(g) => 1.0 - g.norm_sqr(),
            _ => f64::NAN,
        })
        .collect();
    let s = EmpiricalSample::new(d)?;
    Ok((s.mean(), (s.variance() / s.len() as f64).sqrt()))
}

/// Horizon of the norm-deficit comparison in [`scheme_agreement_check`].
pub const DEFICIT_T: f64 = 5.0;

/// KS agreement of the `x` marginal under the Itô and exponential schemes,
/// and first-order decay of the Itô norm deficit: the deficit at
/// `10·dt` over the deficit at `5·dt` (horizon [`DEFICIT_T`], `4 × paths`
/// paths) must be `2 ± 0.3`.
pub fn scheme_agreement_check(cfg: &CheckConfig) -> Result<TestReport> {
    let ito = group_sample(
        Manifold::S3,
        Scheme::Ito,
        Projection::AXy,
        0,
        cfg,
        derive_seed(cfg.seed, 1),
    )?;
    let exp = group_sample(
        Manifold::S3,
        Scheme::Exp,
        Projection::AXy,
        0,
        cfg,
        derive_seed(cfg.seed, 2),
    )?;
    let ks = ks_two_sample(
        &EmpiricalSample::new(ito)?,
        &EmpiricalSample::new(exp)?,
        cfg.threshold,
    )?
    .with_provenance(cfg.provenance("ito vs exp")?);
    let (coarse, fine) = (10.0 * cfg.dt, 5.0 * cfg.dt);
    let (d1, s1) = ito_norm_deficit(DEFICIT_T, coarse, 4 * cfg.paths, derive_seed(cfg.seed, 3))?;
    let (d2, s2) = ito_norm_deficit(DEFICIT_T, fine, 4 * cfg.paths, derive_seed(cfg.seed, 4))?;
    let ratio = d1 / d2;
    let ratio_se = ratio * ((s1 / d1).powi(2) + (s2 / d2).powi(2)).sqrt();
    let def = TestReport::from_distance(
        "norm-deficit-ratio",
        (ratio - 2.0).abs(),
        0.3,
        vec![4 * cfg.paths; 2],
    )
    .param("ratio", ratio)
    .param("ratio_se", ratio_se)
    .param("deficit_coarse", d1)
    .param("deficit_fine", d2)
    .param("dt_coarse", coarse)
    .param("dt_fine", fine)
    .param("t", DEFICIT_T);
    Ok(TestReport::all("scheme-agreement-s3", &[ks, def]))
}

/// `E[x_t] = e^{−3t/2}` for the exponential scheme, within three standard errors.
pub fn mean_decay_check(cfg: &CheckConfig) -> Result<TestReport> {
    let x = EmpiricalSample::new(group_sample(
        Manifold::S3,
        Scheme::Exp,
        Projection::AXy,
        0,
        cfg,
        cfg.seed,
    )?)?;
    let exact = (-1.5 * cfg.t).exp();
    let se = (x.variance() / x.len() as f64).sqrt();
    let z = (x.mean() - exact).abs() / se;
    Ok(
        TestReport::from_distance("mean-decay-s3", z, 3.0, vec![x.len()])
            .param("mean", x.mean())
            .param("exact", exact)
            .param("standard_error", se)
            .with_provenance(cfg.provenance("s3 exp walk")?),
    )
}

/// `(2/π)√(1−x²)`.
pub fn s3_stationary_density(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        2.0 / std::f64::consts::PI * (1.0 - x * x).sqrt()
    }
}

/// Trapezoidal `∫|p − f|` over a 1D grid.
pub fn grid_l1<F: Fn(f64) -> f64>(grid: &DensityGrid, f: F) -> f64 {
    grid.weights_x()
        .iter()
        .zip(&grid.xs)
        .zip(&grid.values)
        .map(|((w, x), p)| w * (p - f(*x)).abs())
        .sum()
}

/// `Σ |n_b/(nΔ) − p̄_b| Δ` over `bins` equal bins of `[lo, hi]`, where `p̄_b`
/// is the bin average of `f` (Simpson's rule).
pub fn histogram_l1<F: Fn(f64) -> f64>(
    values: &[f64],
    (lo, hi): (f64, f64),
    bins: usize,
    f: F,
) -> Result<f64> {
    if values.is_empty() || bins == 0 || !(hi > lo) {
        return Err(Error::InsufficientData(
            "histogram needs values, bins and a non-empty range".into(),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let n = values.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            let avg = (f(a) + 4.0 * f(0.5 * (a + z)) + f(z)) / 6.0;
            (c as f64 / (n * width) - avg).abs() * width
        })
        .sum())
}

/// Piecewise-linear interpolant of a 1D grid density.
pub fn grid_interpolant(grid: &DensityGrid) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let (xs, ps) = (&grid.xs, &grid.values);
        if x <= xs[0] || x >= xs[xs.len() - 1] {
            return if x == xs[0] {
                ps[0]
            } else if x == xs[xs.len() - 1] {
                ps[ps.len() - 1]
            } else {
                0.0
            };
        }
        let k = (((x - xs[0]) / grid.hx()) as usize).min(xs.len() - 2);
        let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
        ps[k] * (1.0 - s) + ps[k + 1] * s
    }
}

/// fp1-s3 from the uniform density against `(2/π)√(1−x²)` (L¹ < 0.02), and a
/// long-run s3-x ensemble histogram against the same density (L¹ < 0.05).
pub fn stationary_check(cfg: &CheckConfig) -> Result<TestReport> {
    let p0 = DensityGrid::uniform(GridDomain::S3Interval, cfg.nodes, 0)?;
    let sol = solve_fp_with(FpEquation::Fp1S3, &p0, cfg.t, cfg.dt, FpOptions::default())?;
    let l1 = grid_l1(&sol.grid, s3_stationary_density);
    let fp = TestReport::from_distance("fp1-s3-stationary-l1", l1, 0.02, vec![cfg.nodes])
        .param("mass_drift", sol.mass_drift())
        .param("t", cfg.t);
    let system = SdeSystem::new(SystemId::S3X);
    let sde = integrate_ensemble(&system, &[0.0], cfg.t, cfg.n_steps()?, cfg.paths, cfg.seed)?;
    let h = histogram_l1(
        &sde.component(0),
        (-1.0, 1.0),
        cfg.bins,
        s3_stationary_density,
    )?;
    let hist = TestReport::from_distance("s3-x-histogram-l1", h, 0.05, vec![cfg.paths])
        .param("bins", cfg.bins as f64)
        .with_provenance(cfg.provenance("s3-x sde from x = 0")?);
    Ok(TestReport::all("stationary-s3", &[fp, hist]))
}

/// Least-squares slope of `log r` against `log h`.
pub fn loglog_slope(h: &[f64], r: &[f64]) -> f64 {
    let n = h.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = h.iter().zip(r).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Boundary band, column count and mass floor of the conditional-uniformity test.
const PERSISTENCE_MIN_NODES: usize = 5;
const PERSISTENCE_MASS_FLOOR: f64 = 0.05;
/// Largest deviation from a uniform conditional and largest wall leakage.
pub const PERSISTENCE_TOL: f64 = 0.05;
pub const LEAKAGE_TOL: f64 = 1e-4;
/// 1D step for the marginals entering the residual refinement.
const MARGINAL_DT: f64 = 1e-4;

/// Ansatz residuals of the 1D solution at `t` on grids with `n`, `2n−1`,
/// `4n−3` nodes, evaluated on the nodes of the coarsest grid.
pub fn residual_refinement(
    manifold: Manifold,
    coarse: usize,
    t: f64,
    lambda_max: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (eq1, eq2, domain) = match manifold {
        Manifold::S3 => (FpEquation::Fp1S3, FpEquation::Fp2S3, GridDomain::S3Interval),
        Manifold::H3 => (
            FpEquation::Fp1H3,
            FpEquation::Fp2H3,
            GridDomain::H3Interval { lambda_max },
        ),
        Manifold::R3 => return Err(Error::Config("no product ansatz on r3".into())),
    };
    let eps = 5.0 * DensityGrid::zeros(domain, coarse, 0)?.hx();
    let (mut hs, mut rs) = (Vec::new(), Vec::new());
    for stride in [1, 2, 4] {
        let g = DensityGrid::zeros(domain, stride * (coarse - 1) + 1, 0)?;
        let p0 = mollified_delta(manifold, eps, &g)?;
        let opts = FpOptions {
            leakage_tolerance: f64::INFINITY,
            ..FpOptions::default()
        };
        let sol = solve_fp_with(eq1, &p0, t, MARGINAL_DT, opts)?;
        let ropts = ResidualOptions {
            stride,
            ..ResidualOptions::default()
        };
        hs.push(g.hx());
        rs.push(ansatz_residual_with(eq2, &sol.grid, t, ropts)?);
    }
    Ok((hs, rs))
}

/// The 2D equation from a mollified delta keeps uniform conditionals, and
/// the product ansatz residual converges at second order.
pub fn product_persistence_check(manifold: Manifold, cfg: &CheckConfig) -> Result<TestReport> {
    let (eq, domain) = match manifold {
        Manifold::S3 => (FpEquation::Fp2S3, GridDomain::S3Disc),
        Manifold::H3 => (
            FpEquation::Fp2H3,
            GridDomain::H3Box {
                lambda_max: cfg.lambda_max,
            },
        ),
        Manifold::R3 => return Err(Error::Config("no product ansatz on r3".into())),
    };
    let grid = DensityGrid::zeros(domain, cfg.nodes, cfg.nodes)?;
    let eps = cfg.eps.unwrap_or(5.0 * grid.hx().max(grid.hy()));
    let p0 = mollified_delta(manifold, eps, &grid)?;
    let dt = stability_bound(eq, &grid)?.expect("2D bound");
    let opts = FpOptions {
        leakage_tolerance: f64::INFINITY,
        ..FpOptions::default()
    };
    let sol = solve_fp_with(eq, &p0, cfg.t, dt, opts)?;
    let dev = conditional_deviation(
        &sol.grid,
        0.0,
        PERSISTENCE_MIN_NODES,
        PERSISTENCE_MASS_FLOOR,
    )?;
    let mut parts = vec![TestReport::from_distance(
        "conditional-deviation",
        dev.max_deviation,
        PERSISTENCE_TOL,
        vec![dev.nodes],
    )
    .param("slices", dev.slices as f64)
    .param("eps", eps)
    .param("t", cfg.t)
    .param("dt", sol.dt)
    .param("steps", sol.steps as f64)
    .param("mass_drift", sol.mass_drift())];
    if manifold == Manifold::H3 {
        let mut r = TestReport::from_distance("leakage", sol.leakage, LEAKAGE_TOL, vec![]);
        r.pass = sol.leakage <= LEAKAGE_TOL;
        parts.push(r.param("lambda_max", cfg.lambda_max));
    }
    if (cfg.nodes - 1) % 4 != 0 {
        return Err(Error::Config(format!(
            "nodes - 1 must be divisible by 4, got {}",
            cfg.nodes
        )));
    }
    let (hs, rs) = residual_refinement(manifold, (cfg.nodes - 1) / 4 + 1, cfg.t, cfg.lambda_max)?;
    let slope = loglog_slope(&hs, &rs);
    let mut res = TestReport::from_distance(
        "ansatz-residual-slope",
        (slope - 2.0).abs(),
        0.3,
        vec![hs.len()],
    )
    .param("slope", slope);
    for (k, (h, r)) in hs.iter().zip(&rs).enumerate() {
        res = res
            .param(&format!("h{k}"), *h)
            .param(&format!("residual{k}"), *r);
    }
    parts.push(res);
    Ok(TestReport::all(
        &format!("product-persistence-{manifold}"),
        &parts,
    ))
}

/// Per-step increment second moments against `a·dt + b bᵀ dt²`, in `bins`
/// equal-count bins of the first coordinate; every entry within three
/// standard errors.
pub fn covariation_check(system: SystemId, cfg: &CheckConfig) -> Result<TestReport> {
    let sys = SdeSystem::new(system);
    if sys.dimension() != 2 {
        return Err(Error::Config(format!(
            "covariation check needs a 2D system, got {system}"
        )));
    }
    let n = cfg.n_steps()?;
    let dt = cfg.t / n as f64;
    let rows: Vec<Result<Vec<[f64; 4]>>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = integrate_path(
                &sys,
                &sys.natural_start()[..2],
                cfg.t,
                n,
                SeedRecord::new(cfg.seed, i),
                1.0,
            )?;
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let (s, e) = (p.state(k), p.state(k + 1));
                let co = sys.coefficients(s)?;
                let a = sys.covariation(s);
                let d = [e[0] - s[0], e[1] - s[1]];
                let b = co.drift;
                let m = |i: usize, j: usize| d[i] * d[j] - a[i][j] * dt - b[i] * b[j] * dt * dt;
                out.push([s[0], m(0, 0), m(0, 1), m(1, 1)]);
            }
            Ok(out)
        })
        .collect();
    let mut all: Vec<[f64; 4]> = Vec::with_capacity(cfg.paths * n);
    for r in rows {
        all.extend(r?);
    }
    all.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let per = all.len() / cfg.bins.max(1);
    if per < 30 {
        return Err(Error::InsufficientData(format!(
            "{} increments for {} bins",
            all.len(),
            cfg.bins
        )));
    }
    let mut worst = 0.0f64;
    let mut report =
        TestReport::from_distance(&format!("covariation-{system}"), 0.0, 3.0, vec![all.len()]);
    for b in 0..cfg.bins {
        let chunk = &all[b * per..if b + 1 == cfg.bins {
            all.len()
        } else {
            (b + 1) * per
        }];
        let k = chunk.len() as f64;
        for (e, name) in [(1, "xx"), (2, "xy"), (3, "yy")] {
            let mean = chunk.iter().map(|r| r[e]).sum::<f64>() / k;
            let var = chunk.iter().map(|r| (r[e] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let z = mean / (var / k).sqrt();
            worst = worst.max(z.abs());
            report = report.param(&format!("bin{b}.{name}.z"), z);
        }
        report = report
            .param(&format!("bin{b}.lo"), chunk[0][0])
            .param(&format!("bin{b}.hi"), chunk[chunk.len() - 1][0]);
    }
    report.statistic = worst;
    report.distance = Some(worst);
    report.pass = worst <= 3.0;
    Ok(report
        .label("system", system.name())
        .with_provenance(cfg.provenance(system.name())?))
}

/// Pitman identity: uniform `B_t / PB_t` on the slice `PB_t ≈ 1.2`, `PB ≥ |B|`
/// everywhere, and a slice mean of `B_t` within three standard errors of 0.
pub fn pitman_check(cfg: &CheckConfig) -> Result<TestReport> {
    let r = verify_pitman_dh(
        cfg.paths,
        cfg.t,
        cfg.dt,
        cfg.seed,
        PITMAN_R0,
        cfg.half_width,
        cfg.bins,
        cfg.threshold,
    )?;
    let z = r.parameters["slice_mean"].abs() / r.parameters["slice_mean_se"];
    let mut r = r.param("slice_mean_z", z);
    r.pass &= z <= 3.0;
    Ok(r)
}

pub const PITMAN_R0: f64 = 1.2;
