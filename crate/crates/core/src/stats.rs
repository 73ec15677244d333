//! Goodness-of-fit tests, conditional slicing and the Pitman check.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dh::DhFamily;
use crate::error::{domain, Error, Result};
use crate::noise::{NoiseStream, SeedRecord};

/// Relative slack within which values just outside a test interval are clamped.
pub const CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_provenance(values, Provenance::default())
    }

    pub fn with_provenance(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty sample".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("sample contains non-finite value {v}")));
        }
        Ok(EmpiricalSample {
            values,
            weights: None,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (self.len() as f64 - 1.0).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub distance: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
    pub parameters: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    pub provenance: Provenance,
}

impl TestReport {
    /// A p-value report: passes iff `p > threshold`.
    pub fn from_p_value(
        name: &str,
        statistic: f64,
        p: f64,
        threshold: f64,
        sizes: Vec<usize>,
    ) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            p_value: Some(p),
            distance: None,
            threshold,
            pass: p > threshold,
            sample_sizes: sizes,
            parameters: BTreeMap::new(),
            labels: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    /// A distance report: passes iff `distance < threshold`.
    pub fn from_distance(name: &str, distance: f64, threshold: f64, sizes: Vec<usize>) -> Self {
        TestReport {
            name: name.into(),
            statistic: distance,
            p_value: None,
            distance: Some(distance),
            threshold,
            pass: distance < threshold,
            sample_sizes: sizes,
            parameters: BTreeMap::new(),
            labels: BTreeMap::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.into(), value);
        self
    }

    pub fn label(mut self, key: &str, value: &str) -> Self {
        self.labels.insert(key.into(), value.into());
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    /// Combines sub-reports; passes iff all do.
    pub fn all(name: &str, parts: &[TestReport]) -> Self {
        let pass = parts.iter().all(|r| r.pass);
        let min_p = parts
            .iter()
            .filter_map(|r| r.p_value)
            .fold(f64::INFINITY, f64::min);
        let mut r = TestReport {
            name: name.into(),
            statistic: parts
                .iter()
                .map(|r| r.statistic)
                .fold(f64::NEG_INFINITY, f64::max),
            p_value: min_p.is_finite().then_some(min_p),
            distance: None,
            threshold: parts.first().map_or(0.0, |r| r.threshold),
            pass,
            sample_sizes: parts
                .iter()
                .flat_map(|r| r.sample_sizes.iter().copied())
                .collect(),
            parameters: BTreeMap::new(),
            labels: BTreeMap::new(),
            provenance: parts
                .first()
                .map(|r| r.provenance.clone())
                .unwrap_or_default(),
        };
        for (i, p) in parts.iter().enumerate() {
            for (k, v) in &p.parameters {
                r.parameters.insert(format!("{i}.{k}"), *v);
            }
            r.parameters.insert(format!("{i}.statistic"), p.statistic);
            if let Some(pv) = p.p_value {
                r.parameters.insert(format!("{i}.p_value"), pv);
            }
            r.labels.insert(format!("{i}.name"), p.name.clone());
        }
        r
    }
}

/// Upper tail `P(K > λ)` of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=100)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (c * m * m).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample Kolmogorov–Smirnov test against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(
    sample: &EmpiricalSample,
    cdf: F,
    threshold: f64,
) -> Result<TestReport> {
    let n = sample.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "KS test needs n >= 10, got {n}"
        )));
    }
    let v = sorted(&sample.values);
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let p = kolmogorov_sf(nf.sqrt() * d);
    Ok(TestReport::from_p_value("ks", d, p, threshold, vec![n])
        .with_provenance(sample.provenance.clone()))
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    threshold: f64,
) -> Result<TestReport> {
    let (n, m) = (a.len(), b.len());
    if n < 10 || m < 10 {
        return Err(Error::InsufficientData(format!(
            "KS test needs n, m >= 10, got {n}, {m}"
        )));
    }
    let (x, y) = (sorted(&a.values), sorted(&b.values));
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let p = kolmogorov_sf(ne.sqrt() * d);
    Ok(TestReport::from_p_value(
        "ks-two-sample",
        d,
        p,
        threshold,
        vec![n, m],
    ))
}

/// Pearson chi-square test of uniformity on `[lo, hi]` with `n_bins` equal bins.
pub fn chi2_uniformity(
    sample: &EmpiricalSample,
    interval: (f64, f64),
    n_bins: usize,
    threshold: f64,
) -> Result<TestReport> {
    let (lo, hi) = interval;
    if !(hi > lo) || n_bins < 2 {
        return Err(Error::Config(format!(
            "need lo < hi and >= 2 bins, got [{lo}, {hi}], {n_bins}"
        )));
    }
    let n = sample.len();
    let expected = n as f64 / n_bins as f64;
    if expected < 5.0 {
        return Err(Error::BinUnderflow { expected });
    }
    let slack = CLAMP_SLACK * (hi - lo).max(lo.abs()).max(hi.abs());
    let mut counts = vec![0usize; n_bins];
    for &v in &sample.values {
        if v < lo - slack || v > hi + slack {
            return Err(domain(format!("value {v} outside [{lo}, {hi}]")));
        }
        let k = (((v - lo) / (hi - lo)) * n_bins as f64).floor();
        counts[(k.max(0.0) as usize).min(n_bins - 1)] += 1;
    }
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((n_bins - 1) as f64).expect("positive degrees of freedom");
    let p = if stat == 0.0 { 1.0 } else { dist.sf(stat) };
    Ok(
        TestReport::from_p_value("chi2-uniformity", stat, p, threshold, vec![n])
            .param("bins", n_bins as f64)
            .param("lo", lo)
            .param("hi", hi)
            .with_provenance(sample.provenance.clone()),
    )
}

/// Pairs `(u, v)` with `|u − u0| ≤ half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSlice {
    pub u0: f64,
    pub half_width: f64,
    pub pairs: Vec<(f64, f64)>,
    pub retained_fraction: f64,
}

impl ConditionalSlice {
    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn sample(&self) -> Result<EmpiricalSample> {
        EmpiricalSample::new(self.values())
    }
}

pub fn conditional_slice(
    pairs: &[(f64, f64)],
    u0: f64,
    half_width: f64,
) -> Result<ConditionalSlice> {
    if !(half_width > 0.0) {
        return Err(Error::Config(format!(
            "half_width must be positive, got {half_width}"
        )));
    }
    let kept: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|(u, _)| (u - u0).abs() <= half_width)
        .collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no points with |u - {u0}| <= {half_width}"
        )));
    }
    let retained_fraction = kept.len() as f64 / pairs.len() as f64;
    Ok(ConditionalSlice {
        u0,
        half_width,
        pairs: kept,
        retained_fraction,
    })
}

/// Maps `v` on the leaf through `u` onto the canonical interval of the family
/// (`[−1, 1]` for r3 and s3, `[0, 1]` for h3).
pub fn canonical_coordinate(family: DhFamily, u: f64, v: f64) -> f64 {
    match family {
        DhFamily::R3Sphere => v / u,
        DhFamily::S3Class => v / (1.0 - u * u).max(0.0).sqrt(),
        DhFamily::H3Class => {
            let half = (u * u - 1.0).max(0.0).sqrt();
            (v - (u - half)) / (2.0 * half)
        }
    }
}

pub fn canonical_interval(family: DhFamily) -> (f64, f64) {
    match family {
        DhFamily::H3Class => (0.0, 1.0),
        _ => (-1.0, 1.0),
    }
}

/// Leaf support of `v` when the sliced coordinate equals `u`.
pub fn leaf_support(family: DhFamily, u: f64) -> (f64, f64) {
    match family {
        DhFamily::R3Sphere => (-u, u),
        DhFamily::S3Class => {
            let s = (1.0 - u * u).max(0.0).sqrt();
            (-s, s)
        }
        DhFamily::H3Class => {
            let half = (u * u - 1.0).max(0.0).sqrt();
            (u - half, u + half)
        }
    }
}

/// Slices at `u0`, rescales every retained `v` by its own leaf, and tests the
/// result for uniformity on the canonical interval.
pub fn verify_conditional_dh(
    pairs: &[(f64, f64)],
    family: DhFamily,
    u0: f64,
    half_width: f64,
    n_bins: usize,
    threshold: f64,
) -> Result<TestReport> {
    let slice = conditional_slice(pairs, u0, half_width)?;
    if slice.pairs.len() < 500 {
        return Err(Error::InsufficientData(format!(
            "slice at {u0} +- {half_width} holds {} points, need 500",
            slice.pairs.len()
        )));
    }
    let scaled: Vec<f64> = slice
        .pairs
        .iter()
        .map(|&(u, v)| canonical_coordinate(family, u, v))
        .collect();
    let (vmin, vmax) = slice
        .pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, v)| {
            (a.min(v), b.max(v))
        });
    let (slo, shi) = leaf_support(family, u0);
    let mut r = chi2_uniformity(
        &EmpiricalSample::new(scaled)?,
        canonical_interval(family),
        n_bins,
        threshold,
    )?;
    r.name = format!("conditional-dh-{}", family.name());
    Ok(r.param("u0", u0)
        .param("half_width", half_width)
        .param("retained_fraction", slice.retained_fraction)
        .param("v_min", vmin)
        .param("v_max", vmax)
        .param("support_lo", slo)
        .param("support_hi", shi))
}

/// `2·max_{j≤k} path_j − path_k`. The path must start at 0.
pub fn pitman_transform(path: &[f64]) -> Result<Vec<f64>> {
    match path.first() {
        Some(&x) if x == 0.0 => {}
        Some(&x) => return Err(domain(format!("path must start at 0, starts at {x}"))),
        None => return Ok(Vec::new()),
    }
    let mut m = f64::NEG_INFINITY;
    Ok(path
        .iter()
        .map(|&b| {
            m = m.max(b);
            2.0 * m - b
        })
        .collect())
}

/// `(B_t, PB_t)` for one Brownian path. The running maximum is refined inside
/// each step by sampling the exact maximum of the Brownian bridge between the
/// grid values, so `PB_t` carries no discretization bias.
pub fn pitman_endpoint(seed: SeedRecord, t: f64, n_steps: usize) -> (f64, f64) {
    let dt = t / n_steps as f64;
    let sd = dt.sqrt();
    let mut noise = NoiseStream::new(seed, 2);
    let (mut b, mut m) = (0.0f64, 0.0f64);
    for _ in 0..n_steps {
        let next = b + sd * noise.standard_normal();
        let u = noise.uniform();
        let d = next - b;
        let bridge = 0.5 * (b + next + (d * d - 2.0 * dt * u.ln()).sqrt());
        m = m.max(bridge).max(next);
        b = next;
    }
    (b, 2.0 * m - b)
}

/// Tests that `B_t / PB_t` is uniform on `[−1, 1]` on the slice `PB_t ≈ r0`.
#[allow(clippy::too_many_arguments)]
pub fn verify_pitman_dh(
    n_paths: usize,
    t: f64,
    dt: f64,
    seed: u64,
    r0: f64,
    half_width: f64,
    n_bins: usize,
    threshold: f64,
) -> Result<TestReport> {
    if !(t > 0.0 && dt > 0.0) || n_paths == 0 {
        return Err(Error::Config("need t, dt > 0 and n_paths >= 1".into()));
    }
    let n_steps = (t / dt).round().max(1.0) as usize;
    let pts: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| pitman_endpoint(SeedRecord::new(seed, i), t, n_steps))
        .collect();
    let dominated = pts.iter().all(|&(b, pb)| pb >= b.abs());
    let pairs: Vec<(f64, f64)> = pts.iter().map(|&(b, pb)| (pb, b)).collect();
    let slice = conditional_slice(&pairs, r0, half_width)?;
    let vals = slice.values();
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    let mut r = verify_conditional_dh(
        &pairs,
        DhFamily::R3Sphere,
        r0,
        half_width,
        n_bins,
        threshold,
    )?;
    r.name = "pitman".into();
    r.pass &= dominated;
    Ok(
        r.param("pb_dominates_abs_b", if dominated { 1.0 } else { 0.0 })
            .param("slice_mean", mean)
            .param("slice_mean_se", (var / k).sqrt())
            .param("t", t)
            .param("dt", t / n_steps as f64)
            .with_provenance(Provenance {
                source: "pitman".into(),
                t: Some(t),
                dt: Some(t / n_steps as f64),
                seed: Some(seed),
            }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: Vec<f64>) -> EmpiricalSample {
        EmpiricalSample::new(v).unwrap()
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // reference tail values of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_sf(1.36) - 0.049485876755377876).abs() < 1e-12);
        assert!((kolmogorov_sf(0.5) - 0.9639452436648751).abs() < 1e-12);
        assert!((kolmogorov_sf(1.1799999) - kolmogorov_sf(1.1800001)).abs() < 1e-6);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_on_exact_quantiles() {
        let n = 1000;
        let s = sample((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect());
        let r = ks_test(&s, |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert!((r.statistic - 0.5 / n as f64).abs() < 1e-15);
        assert!(r.pass);
        let s = sample(vec![0.5; 100]);
        let r = ks_test(&s, |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-15);
        assert!(!r.pass);
        assert!(matches!(
            ks_test(&sample(vec![0.1; 5]), |x| x, 0.01),
            Err(Error::InsufficientData(_))
        ));
        assert!(EmpiricalSample::new(vec![]).is_err());
    }

    #[test]
    fn two_sample_ks() {
        let a = sample((0..100).map(|i| i as f64).collect());
        let r = ks_two_sample(&a, &a, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        let b = sample((0..100).map(|i| i as f64 + 50.0).collect());
        let r = ks_two_sample(&a, &b, 0.01).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        assert!(!r.pass);
    }

    #[test]
    fn chi2_examples() {
        let n_bins = 10;
        let s = sample((0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect());
        let r = chi2_uniformity(&s, (0.0, 1.0), n_bins, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
        let s = sample(vec![0.05; 1000]);
        let r = chi2_uniformity(&s, (0.0, 1.0), n_bins, 0.01).unwrap();
        assert!((r.statistic - 9.0 * 1000.0).abs() < 1e-9);
        assert!(r.p_value.unwrap() < 1e-100);
        assert!(matches!(
            chi2_uniformity(&sample(vec![0.5; 40]), (0.0, 1.0), 10, 0.01),
            Err(Error::BinUnderflow { .. })
        ));
        let s = sample(
            (0..100)
                .map(|i| if i == 0 { 1.0 + 1e-12 } else { 0.5 })
                .collect(),
        );
        assert!(chi2_uniformity(&s, (0.0, 1.0), 2, 0.01).is_ok());
        let s = sample((0..100).map(|i| if i == 0 { 1.1 } else { 0.5 }).collect());
        assert!(chi2_uniformity(&s, (0.0, 1.0), 2, 0.01).is_err());
    }

    #[test]
    fn chi2_matches_statrs_tail() {
        let d = ChiSquared::new(19.0).unwrap();
        // 19 degrees of freedom, 95th percentile 30.1435
        assert!((d.sf(30.14352720564616) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn slicing() {
        let pairs: Vec<(f64, f64)> = (0..1000)
            .map(|i| (i as f64 / 1000.0, i as f64 / 1000.0))
            .collect();
        let s = conditional_slice(&pairs, 0.4, 0.05).unwrap();
        assert!(s.values().iter().all(|v| (v - 0.4).abs() <= 0.05 + 1e-12));
        assert!((s.retained_fraction - 0.1).abs() < 0.002);
        let all = conditional_slice(&pairs, 0.5, 10.0).unwrap();
        assert_eq!(all.pairs.len(), 1000);
        assert_eq!(all.retained_fraction, 1.0);
        assert!(matches!(
            conditional_slice(&pairs, 5.0, 0.1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn conditional_dh_is_invariant_under_rescaling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<(f64, f64)> = (0..20_000)
            .map(|_| {
                let r: f64 = rng.random_range(1.0..2.0);
                (r, r * rng.random_range(-1.0..1.0))
            })
            .collect();
        let a = verify_conditional_dh(&pairs, DhFamily::R3Sphere, 1.5, 0.05, 20, 0.01).unwrap();
        let k = 3.7;
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(u, v)| (k * u, k * v)).collect();
        let b = verify_conditional_dh(&scaled, DhFamily::R3Sphere, k * 1.5, k * 0.05, 20, 0.01)
            .unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert!(a.pass);
        let few = &pairs[..1000];
        assert!(matches!(
            verify_conditional_dh(few, DhFamily::R3Sphere, 1.5, 0.01, 20, 0.01),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn pitman_examples() {
        assert_eq!(
            pitman_transform(&[0.0, 1.0, 0.5]).unwrap(),
            vec![0.0, 1.0, 1.5]
        );
        assert_eq!(
            pitman_transform(&[0.0, -1.0, -2.0]).unwrap(),
            vec![0.0, 1.0, 2.0]
        );
        let up = [0.0, 0.1, 0.3, 0.7];
        assert_eq!(pitman_transform(&up).unwrap(), up.to_vec());
        assert!(pitman_transform(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn pitman_endpoint_is_dominated_and_reproducible() {
        for i in 0..200 {
            let (b, pb) = pitman_endpoint(SeedRecord::new(5, i), 1.0, 100);
            assert!(pb >= b.abs());
            assert_eq!((b, pb), pitman_endpoint(SeedRecord::new(5, i), 1.0, 100));
        }
    }

    proptest! {
        #[test]
        fn pitman_dominates_abs(steps in prop::collection::vec(-1.0..1.0f64, 1..200)) {
            let mut path = vec![0.0];
            for s in steps {
                path.push(path.last().unwrap() + s);
            }
            let pb = pitman_transform(&path).unwrap();
            let mut m = f64::NEG_INFINITY;
            for (b, p) in path.iter().zip(&pb) {
                prop_assert!(*p >= b.abs());
                if *b >= m {
                    m = *b;
                    prop_assert!(*p == *b || *b < 0.0);
                }
                prop_assert!(*p >= 0.0);
            }
        }
    }
}
