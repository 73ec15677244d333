use lgmm::error::Error;
use lgmm::fokker_planck::{
    marginal, mollified_delta, solve_fp, solve_fp_with, stability_bound, DensityGrid, FpEquation,
    FpOptions, GridDomain,
};
use lgmm::group::Manifold;
use lgmm::sde::{integrate_ensemble, SdeSystem, SystemId};
use lgmm::verify::{grid_interpolant, histogram_l1};

#[test]
fn fp1_s3_matches_the_s3_x_histogram() {
    let g = DensityGrid::zeros(GridDomain::S3Interval, 401, 0).unwrap();
    let p0 = mollified_delta(Manifold::S3, 5.0 * g.hx(), &g).unwrap();
    let sol = solve_fp(FpEquation::Fp1S3, &p0, 0.5, 1e-4).unwrap();
    let sys = SdeSystem::new(SystemId::S3X);
    let e = integrate_ensemble(&sys, &[1.0], 0.5, 500, 100_000, 7).unwrap();
    let l1 = histogram_l1(
        &e.component(0),
        (-1.0, 1.0),
        200,
        grid_interpolant(&sol.grid),
    )
    .unwrap();
    assert!(l1 <= 0.05, "L1 = {l1}");
}

#[test]
fn fp1_h3_mean_grows_like_exp_three_halves_t() {
    let g = DensityGrid::zeros(GridDomain::H3Interval { lambda_max: 4.0 }, 801, 0).unwrap();
    let p0 = mollified_delta(Manifold::H3, 5.0 * g.hx(), &g).unwrap();
    let m0 = p0.expectation(|w| w);
    for t in [0.1, 0.2, 0.3] {
        let sol = solve_fp(FpEquation::Fp1H3, &p0, t, 1e-4).unwrap();
        assert!(sol.leakage <= 1e-4);
        let ratio = sol.grid.expectation(|w| w) / (m0 * (1.5 * t).exp());
        assert!((ratio - 1.0).abs() < 0.02, "t = {t}: ratio {ratio}");
    }
}

#[test]
fn s3_equations_conserve_mass_over_unit_time() {
    let g = DensityGrid::zeros(GridDomain::S3Interval, 201, 0).unwrap();
    let p0 = mollified_delta(Manifold::S3, 5.0 * g.hx(), &g).unwrap();
    let sol = solve_fp(FpEquation::Fp1S3, &p0, 1.0, 1e-3).unwrap();
    assert!(sol.mass_drift().abs() < 1e-6, "{}", sol.mass_drift());

    let g = DensityGrid::zeros(GridDomain::S3Disc, 101, 101).unwrap();
    let p0 = mollified_delta(Manifold::S3, 5.0 * g.hx(), &g).unwrap();
    let dt = stability_bound(FpEquation::Fp2S3, &g).unwrap().unwrap();
    let sol = solve_fp(FpEquation::Fp2S3, &p0, 1.0, dt).unwrap();
    assert!(sol.mass_drift().abs() < 1e-6, "{}", sol.mass_drift());
    assert!(sol.grid.values.iter().all(|v| *v >= 0.0));
    let mx = marginal(&sol.grid, 0).unwrap();
    assert!((mx.mass() - 1.0).abs() < 1e-6);
}

#[test]
fn a_short_box_leaks() {
    let g = DensityGrid::zeros(GridDomain::H3Box { lambda_max: 1.0 }, 41, 41).unwrap();
    let p0 = mollified_delta(Manifold::H3, 5.0 * g.hx().max(g.hy()), &g).unwrap();
    let dt = stability_bound(FpEquation::Fp2H3, &g).unwrap().unwrap();
    let err = solve_fp(FpEquation::Fp2H3, &p0, 0.5, dt).unwrap_err();
    assert!(
        matches!(err, Error::Leakage { leakage, .. } if leakage > 1e-4),
        "{err}"
    );
    let opts = FpOptions {
        leakage_tolerance: f64::INFINITY,
        ..FpOptions::default()
    };
    let sol = solve_fp_with(FpEquation::Fp2H3, &p0, 0.5, dt, opts).unwrap();
    assert!((sol.mass_drift()).abs() < 1e-9);
}
