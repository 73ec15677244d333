use lgmm::noise::{NoiseStream, SeedRecord};
use lgmm::sde::{integrate_ensemble, integrate_path, SdeSystem, SystemId};
use lgmm::stats::EmpiricalSample;
use lgmm::verify::{covariation_check, CheckConfig, CheckId};
use rayon::prelude::*;

fn mean_se(v: Vec<f64>) -> (f64, f64) {
    let s = EmpiricalSample::new(v).unwrap();
    (s.mean(), (s.variance() / s.len() as f64).sqrt())
}

#[test]
fn ode_limits() {
    let path = |id, x0: &[f64], t| {
        let sys = SdeSystem::new(id);
        let p = integrate_path(&sys, x0, t, 10_000, SeedRecord::new(1, 0), 0.0).unwrap();
        p.endpoint().to_vec()
    };
    assert!((path(SystemId::Bessel3, &[1.0], 1.5)[0] - 2.0).abs() < 1e-3);
    assert!((path(SystemId::S3X, &[1.0], 1.0)[0] - (-1.5f64).exp()).abs() < 1e-3);
    let w = path(SystemId::H3Wc, &[1.0, 1.0], 1.0)[0];
    assert!((w / 1.5f64.exp() - 1.0).abs() < 5e-3, "w = {w}");
}

#[test]
fn s3_x_mean_decays() {
    let sys = SdeSystem::new(SystemId::S3X);
    let e = integrate_ensemble(&sys, &[1.0], 0.5, 500, 100_000, 3).unwrap();
    let (m, se) = mean_se(e.component(0));
    assert!((m - (-0.75f64).exp()).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn bessel3_second_moment() {
    let sys = SdeSystem::new(SystemId::Bessel3);
    let e = integrate_ensemble(&sys, &[0.0], 1.0, 1000, 100_000, 4).unwrap();
    let (m, _) = mean_se(e.component(0).iter().map(|r| r * r).collect());
    assert!((m / 3.0 - 1.0).abs() < 0.02, "E r² = {m}");
}

#[test]
fn ensembles_stay_admissible() {
    for id in SystemId::ALL {
        let sys = SdeSystem::new(id);
        let x0 = sys.natural_start();
        let e = integrate_ensemble(&sys, &x0[..sys.dimension()], 0.25, 250, 500, 5).unwrap();
        for i in 0..e.len() {
            assert!(
                sys.is_admissible(e.endpoint(i)),
                "{id}: {:?}",
                e.endpoint(i)
            );
        }
    }
}

/// Endpoint mean of s3-x at `t` with the martingale part of the Euler sum
/// subtracted: `x_n − Σ_k β^{n−1−k} σ(x_k) ΔB_k` with `β = 1 − 3dt/2`.
fn s3_x_mean(t: f64, n: usize, paths: usize, seed: u64) -> (f64, f64) {
    let sys = SdeSystem::new(SystemId::S3X);
    let dt = t / n as f64;
    let beta = 1.0 - 1.5 * dt;
    let est: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let rec = SeedRecord::new(seed, i);
            let p = integrate_path(&sys, &[1.0], t, n, rec, 1.0).unwrap();
            let mut noise = NoiseStream::new(rec, 1);
            let mut db = [0.0];
            let mut cv = 0.0;
            for k in 0..n {
                noise.fill_normal(&mut db, dt.sqrt());
                let x = p.state(k)[0];
                cv += beta.powi((n - 1 - k) as i32) * (1.0 - x * x).max(0.0).sqrt() * db[0];
            }
            p.endpoint()[0] - cv
        })
        .collect();
    mean_se(est)
}

#[test]
fn weak_error_is_first_order() {
    let exact = (-0.75f64).exp();
    let dts: [f64; 3] = [4e-3, 2e-3, 1e-3];
    let (bias, se): (Vec<f64>, Vec<f64>) = dts
        .iter()
        .map(|dt| {
            let (m, se) = s3_x_mean(0.5, (0.5 / dt).round() as usize, 20_000, 6);
            (m - exact, se)
        })
        .unzip();
    assert!(
        se.iter().zip(&bias).all(|(s, b)| 5.0 * s < b.abs()),
        "bias {bias:?} ± {se:?}"
    );
    let n = dts.len() as f64;
    let (mx, my) = (dts.iter().sum::<f64>() / n, bias.iter().sum::<f64>() / n);
    let sxy: f64 = dts
        .iter()
        .zip(&bias)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let sxx: f64 = dts.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = bias.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.9, "bias {bias:?}, R² = {r2}");
    assert!(bias[0].abs() > 3.0 * bias[2].abs(), "bias {bias:?}");
}

#[test]
fn covariation_matches_the_second_order_coefficients() {
    let cfg = CheckConfig::defaults(CheckId::Covariation);
    for id in [SystemId::S3Xy, SystemId::H3Wc] {
        let r = covariation_check(id, &cfg).unwrap();
        assert!(r.pass, "{id}: worst |z| = {}", r.statistic);
    }
}
