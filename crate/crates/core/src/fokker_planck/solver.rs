use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::Strip;
use super::{DensityGrid, FpEquation};
use crate::error::{Error, Result};

/// Values in `(−NEG_TOL, 0)` are rounding noise and clipped to zero.
pub const NEG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpOptions {
    /// Largest mass allowed to leave through the absorbing wall (H³ only).
    pub leakage_tolerance: f64,
    /// Backward-Euler half steps replacing the first Crank–Nicolson steps (1D).
    pub rannacher_steps: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        FpOptions {
            leakage_tolerance: 1e-4,
            rannacher_steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpSolution {
    pub grid: DensityGrid,
    pub steps: usize,
    pub dt: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Mass absorbed at the wall (zero for S³ equations).
    pub leakage: f64,
    /// Total clipped magnitude of slightly negative values.
    pub clipped: f64,
}

impl FpSolution {
    pub fn mass_drift(&self) -> f64 {
        self.final_mass + self.leakage - self.initial_mass
    }
}

/// Explicit bound `min(hx², hy²) / (4 max λ(D))` over active nodes (2D equations).
pub fn stability_bound(eq: FpEquation, grid: &DensityGrid) -> Result<Option<f64>> {
    eq.check_grid(grid)?;
    if eq.dimension() == 1 {
        return Ok(None);
    }
    let mut dmax = 0.0f64;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            if grid.active[grid.index(i, j)] {
                let d = eq.diffusion(grid.xs[i], grid.ys[j]);
                let tr = 0.5 * (d[0][0] + d[1][1]);
                let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
                dmax = dmax.max(tr + (tr * tr - det).max(0.0).sqrt());
            }
        }
    }
    let h = grid.hx().min(grid.hy());
    Ok(Some(h * h / (4.0 * dmax)))
}

pub fn solve_fp(eq: FpEquation, p0: &DensityGrid, t_end: f64, dt: f64) -> Result<FpSolution> {
    solve_fp_with(eq, p0, t_end, dt, FpOptions::default())
}

/// Evolves `p0` to `t_end` with steps no longer than `dt`.
///
/// 1D equations use Crank–Nicolson on Scharfetter–Gummel fluxes. 2D equations
/// use forward Euler on a centred finite-volume operator. Each column is a
/// strip covering its true slice; faces between columns follow the true slice
/// at the half-node, so fluxes near the degenerate rim are not cut off by the
/// staircase mask. Positivity is kept by splitting the operator into a
/// monotone low-order part and limited antidiffusive edge fluxes, which
/// leaves the discrete mass balance exact.
pub fn solve_fp_with(
    eq: FpEquation,
    p0: &DensityGrid,
    t_end: f64,
    dt: f64,
    opts: FpOptions,
) -> Result<FpSolution> {
    eq.check_grid(p0)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if let Some(v) = p0.values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Config(format!(
            "initial density has negative or non-finite value {v}"
        )));
    }
    if let Some(bound) = stability_bound(eq, p0)? {
        if dt > bound {
            return Err(Error::Stability { dt, bound });
        }
    }
    let initial_mass = p0.mass();
    if t_end == 0.0 {
        return Ok(FpSolution {
            grid: p0.clone(),
            steps: 0,
            dt: 0.0,
            initial_mass,
            final_mass: initial_mass,
            leakage: 0.0,
            clipped: 0.0,
        });
    }
    let steps = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt_eff = t_end / steps as f64;
    let mut grid = p0.clone();
    let sink = grid.sink();
    for (v, s) in grid.values.iter_mut().zip(sink) {
        if s {
            *v = 0.0;
        }
    }
    let clipped = if eq.dimension() == 1 {
        crank_nicolson(eq, &mut grid, steps, dt_eff, opts.rannacher_steps)?
    } else {
        explicit_limited(eq, &mut grid, steps, dt_eff)?
    };
    grid.time = p0.time + t_end;
    let final_mass = grid.mass();
    let leakage = if eq.is_hyperbolic() {
        (initial_mass - final_mass).max(0.0)
    } else {
        0.0
    };
    if eq.is_hyperbolic() && leakage > opts.leakage_tolerance {
        return Err(Error::Leakage {
            leakage,
            tolerance: opts.leakage_tolerance,
        });
    }
    Ok(FpSolution {
        grid,
        steps,
        dt: dt_eff,
        initial_mass,
        final_mass,
        leakage,
        clipped,
    })
}

fn clip(values: &mut [f64]) -> Result<f64> {
    let mut clipped = 0.0;
    for (k, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEG_TOL || !v.is_finite() {
                return Err(Error::SchemeFailure(format!("density {v:e} at node {k}")));
            }
            clipped -= *v;
            *v = 0.0;
        } else if !v.is_finite() {
            return Err(Error::SchemeFailure(format!(
                "non-finite density at node {k}"
            )));
        }
    }
    Ok(clipped)
}

/// `z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Tridiagonal `ω ṗ = A p` from Scharfetter–Gummel interface fluxes.
pub(crate) fn assemble_1d(eq: FpEquation, grid: &DensityGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.nx();
    let h = grid.hx();
    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n - 1 {
        let xf = 0.5 * (grid.xs[k] + grid.xs[k + 1]);
        let d = eq.diffusion(xf, xf)[0][0];
        let v = eq.velocity(xf, xf)[0];
        // J = alpha p_k − beta p_{k+1}
        let (alpha, beta) = if d > 0.0 {
            let pe = v * h / d;
            (d / h * bernoulli(-pe), d / h * bernoulli(pe))
        } else {
            (v.max(0.0), (-v).max(0.0))
        };
        diag[k] -= alpha;
        upper[k] += beta;
        lower[k + 1] += alpha;
        diag[k + 1] -= beta;
    }
    (lower, diag, upper)
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for k in 1..n {
        beta = diag[k] - lower[k] * c[k - 1];
        c[k] = upper[k] / beta;
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
}

fn crank_nicolson(
    eq: FpEquation,
    grid: &mut DensityGrid,
    steps: usize,
    dt: f64,
    rannacher: usize,
) -> Result<f64> {
    let (lower, diag, upper) = assemble_1d(eq, grid);
    let w = grid.weights_x();
    // the absorbing node is removed from the system
    let m = if eq.is_hyperbolic() {
        grid.nx() - 1
    } else {
        grid.nx()
    };
    let mut p: Vec<f64> = grid.values[..m].to_vec();
    let mut clipped = 0.0;
    let step = |p: &mut Vec<f64>, theta: f64, tau: f64| {
        let mut rhs: Vec<f64> = (0..m)
            .map(|k| {
                let mut ap = diag[k] * p[k];
                if k > 0 {
                    ap += lower[k] * p[k - 1];
                }
                if k + 1 < m {
                    ap += upper[k] * p[k + 1];
                }
                w[k] * p[k] + (1.0 - theta) * tau * ap
            })
            .collect();
        let l: Vec<f64> = (0..m).map(|k| -theta * tau * lower[k]).collect();
        let d: Vec<f64> = (0..m).map(|k| w[k] - theta * tau * diag[k]).collect();
        let u: Vec<f64> = (0..m).map(|k| -theta * tau * upper[k]).collect();
        thomas(&l, &d, &u, &mut rhs);
        *p = rhs;
    };
    let smoothing = rannacher.min(2 * steps);
    for _ in 0..smoothing {
        step(&mut p, 1.0, 0.5 * dt);
        clipped += clip(&mut p)?;
    }
    for _ in 0..steps - smoothing / 2 - smoothing % 2 {
        step(&mut p, 0.5, dt);
        clipped += clip(&mut p)?;
    }
    if smoothing % 2 == 1 {
        step(&mut p, 1.0, 0.5 * dt);
        clipped += clip(&mut p)?;
    }
    grid.values[..m].copy_from_slice(&p);
    Ok(clipped)
}

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut row_ptr = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Csr {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        row.binary_search(&c)
            .map_or(0.0, |k| self.vals[self.row_ptr[r] + k])
    }
}

/// The centred finite-volume operator on nodes of positive weight, `V ṗ = K p`.
pub(crate) struct FvOperator {
    /// Active grid index of every unknown.
    pub nodes: Vec<usize>,
    pub volume: Vec<f64>,
    pub sink: Vec<bool>,
    pub k: Csr,
}

pub(crate) fn assemble_2d(eq: FpEquation, grid: &DensityGrid) -> FvOperator {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let wx = grid.weights_x();
    let weight = grid.node_weights();
    let strips = grid.strips();
    let mut local = vec![usize::MAX; grid.len()];
    let mut nodes = Vec::new();
    for (g, &w) in weight.iter().enumerate() {
        if w > 0.0 {
            local[g] = nodes.len();
            nodes.push(g);
        }
    }
    let strip = |i: isize| -> Option<Strip> {
        if i < 0 || i >= nx as isize {
            return None;
        }
        strips[i as usize]
    };
    let at = |i: usize, j: usize| local[i * ny + j];
    // derivatives at a node as (unknown, weight) lists; neighbours in the
    // adjacent columns are the rows owning the same height
    let dx = |i: usize, j: usize| -> Vec<(usize, f64)> {
        let y = grid.ys[j];
        let side = |d: isize| {
            strip(i as isize + d).map(|s| at((i as isize + d) as usize, grid.owner(&s, y)))
        };
        let c = at(i, j);
        match (side(1), side(-1)) {
            (Some(p), Some(m)) => vec![(p, 0.5 / hx), (m, -0.5 / hx)],
            (Some(p), None) => vec![(p, 1.0 / hx), (c, -1.0 / hx)],
            (None, Some(m)) => vec![(c, 1.0 / hx), (m, -1.0 / hx)],
            (None, None) => Vec::new(),
        }
    };
    let dy = |i: usize, j: usize, s: &Strip| -> Vec<(usize, f64)> {
        let c = at(i, j);
        match (j < s.jhi, j > s.jlo) {
            (true, true) => vec![(at(i, j + 1), 0.5 / hy), (at(i, j - 1), -0.5 / hy)],
            (true, false) => vec![(at(i, j + 1), 1.0 / hy), (c, -1.0 / hy)],
            (false, true) => vec![(c, 1.0 / hy), (at(i, j - 1), -1.0 / hy)],
            (false, false) => Vec::new(),
        }
    };
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
    // flux from a to b across a face of length len, normal along `axis`
    let mut add_face =
        |a: usize, b: usize, len: f64, axis: usize, xf: f64, yf: f64, cross: Vec<(usize, f64)>| {
            let d = eq.diffusion(xf, yf);
            let v = eq.velocity(xf, yf);
            let h = if axis == 0 { hx } else { hy };
            let other = 1 - axis;
            let mut flux = vec![
                (a, 0.5 * v[axis] + d[axis][axis] / h),
                (b, 0.5 * v[axis] - d[axis][axis] / h),
            ];
            flux.extend(
                cross
                    .into_iter()
                    .map(|(n, w)| (n, -0.5 * d[axis][other] * w)),
            );
            for (n, c) in flux {
                *rows[a].entry(n).or_insert(0.0) -= len * c;
                *rows[b].entry(n).or_insert(0.0) += len * c;
            }
        };
    for i in 0..nx {
        let Some(s) = strips[i] else { continue };
        for j in s.jlo..s.jhi {
            let cross = dx(i, j).into_iter().chain(dx(i, j + 1)).collect();
            add_face(
                at(i, j),
                at(i, j + 1),
                wx[i],
                1,
                grid.xs[i],
                grid.ys[j] + 0.5 * hy,
                cross,
            );
        }
        let Some(t) = strip(i as isize + 1) else {
            continue;
        };
        // the true face at x_{i+1/2}, split where either column changes owner
        let xf = grid.xs[i] + 0.5 * hx;
        let (half, mid) = grid.domain.slice(xf);
        let (lo, hi) = (mid - half, mid + half);
        let mut cuts = vec![lo, hi];
        for st in [&s, &t] {
            cuts.extend(
                (st.jlo..st.jhi)
                    .map(|j| grid.ys[j] + 0.5 * hy)
                    .filter(|&y| y > lo && y < hi),
            );
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let ym = 0.5 * (w[0] + w[1]);
            let (ja, jb) = (grid.owner(&s, ym), grid.owner(&t, ym));
            let cross = dy(i, ja, &s).into_iter().chain(dy(i + 1, jb, &t)).collect();
            add_face(at(i, ja), at(i + 1, jb), len, 0, xf, ym, cross);
        }
    }
    let volume = nodes.iter().map(|&g| weight[g]).collect();
    let sinkg = grid.sink();
    let sink = nodes.iter().map(|&g| sinkg[g]).collect();
    FvOperator {
        nodes,
        volume,
        sink,
        k: Csr::from_rows(rows),
    }
}

struct Limited {
    low: Csr,
    edges: Vec<(usize, usize, f64)>,
}

/// Discrete upwinding: `L = K + D` with symmetric `D ≥ 0` cancelling every
/// negative off-diagonal entry of `K`.
fn split(k: &Csr) -> Limited {
    let n = k.row_ptr.len() - 1;
    let mut rows: Vec<BTreeMap<usize, f64>> = (0..n)
        .map(|r| {
            (k.row_ptr[r]..k.row_ptr[r + 1])
                .map(|e| (k.cols[e], k.vals[e]))
                .collect()
        })
        .collect();
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for r in 0..n {
        for e in k.row_ptr[r]..k.row_ptr[r + 1] {
            let c = k.cols[e];
            if c != r {
                let d = pairs.entry((r.min(c), r.max(c))).or_insert(0.0);
                *d = d.max(-k.vals[e]);
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .filter(|(_, d)| *d > 0.0)
        .map(|((i, j), d)| (i, j, d))
        .collect();
    for &(i, j, d) in &edges {
        *rows[i].entry(j).or_insert(0.0) += d;
        *rows[j].entry(i).or_insert(0.0) += d;
        *rows[i].entry(i).or_insert(0.0) -= d;
        *rows[j].entry(j).or_insert(0.0) -= d;
    }
    Limited {
        low: Csr::from_rows(rows),
        edges,
    }
}

fn explicit_limited(eq: FpEquation, grid: &mut DensityGrid, steps: usize, dt: f64) -> Result<f64> {
    let op = assemble_2d(eq, grid);
    let lim = split(&op.k);
    let n = op.nodes.len();
    // sub-steps keeping the low-order update monotone
    let mut rate = 0.0f64;
    for r in 0..n {
        rate = rate.max(-lim.low.get(r, r) / op.volume[r]);
    }
    let sub = ((dt * rate) / 0.95).ceil().max(1.0) as usize;
    let tau = dt / sub as f64;
    let mut p: Vec<f64> = op.nodes.iter().map(|&g| grid.values[g]).collect();
    let mut lp = vec![0.0; n];
    let mut loss = vec![0.0; n];
    let mut ratio = vec![1.0; n];
    let mut anti = vec![0.0; lim.edges.len()];
    let mut clipped = 0.0;
    for _ in 0..steps * sub {
        lim.low.apply(&p, &mut lp);
        for r in 0..n {
            lp[r] = p[r] + tau * lp[r] / op.volume[r];
            loss[r] = 0.0;
        }
        for (e, &(i, j, d)) in lim.edges.iter().enumerate() {
            let f = d * (p[i] - p[j]);
            anti[e] = f;
            if f < 0.0 {
                loss[i] -= f;
            } else {
                loss[j] += f;
            }
        }
        for r in 0..n {
            ratio[r] = if loss[r] > 0.0 {
                (op.volume[r] * lp[r].max(0.0) / (tau * loss[r])).min(1.0)
            } else {
                1.0
            };
        }
        for (e, &(i, j, _)) in lim.edges.iter().enumerate() {
            let f = anti[e];
            let a = if f < 0.0 { ratio[i] } else { ratio[j] };
            lp[i] += tau * a * f / op.volume[i];
            lp[j] -= tau * a * f / op.volume[j];
        }
        for r in 0..n {
            if op.sink[r] {
                lp[r] = 0.0;
            }
        }
        clipped += clip(&mut lp)?;
        std::mem::swap(&mut p, &mut lp);
    }
    for (r, &g) in op.nodes.iter().enumerate() {
        grid.values[g] = p[r];
    }
    Ok(clipped)
}

#[cfg(test)]
mod tests {
    use super::super::{mollified_delta, GridDomain};
    use super::*;
    use crate::group::Manifold;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_horizon_returns_input() {
        let g = DensityGrid::uniform(GridDomain::S3Interval, 101, 0).unwrap();
        let s = solve_fp(FpEquation::Fp1S3, &g, 0.0, 1e-3).unwrap();
        assert_eq!(s.grid, g);
        let g = DensityGrid::uniform(GridDomain::S3Disc, 41, 41).unwrap();
        assert_eq!(solve_fp(FpEquation::Fp2S3, &g, 0.0, 1e-5).unwrap().grid, g);
    }

    #[test]
    fn fv_operator_is_conservative_and_exact_on_constants() {
        for (eq, dom) in [
            (FpEquation::Fp2S3, GridDomain::S3Disc),
            (FpEquation::Fp2H3, GridDomain::H3Box { lambda_max: 1.5 }),
        ] {
            let g = DensityGrid::uniform(dom, 41, 45).unwrap();
            let op = assemble_2d(eq, &g);
            let n = op.nodes.len();
            let ones = vec![1.0; n];
            let mut out = vec![0.0; n];
            op.k.apply(&ones, &mut out);
            // velocity vanishes, so constants are stationary
            assert!(out.iter().all(|v| v.abs() < 1e-9), "{eq}");
            // column sums vanish
            let mut colsum = vec![0.0; n];
            for r in 0..n {
                for e in op.k.row_ptr[r]..op.k.row_ptr[r + 1] {
                    colsum[op.k.cols[e]] += op.k.vals[e];
                }
            }
            assert!(colsum.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn stability_bound_is_enforced() {
        let g = DensityGrid::uniform(GridDomain::S3Disc, 51, 51).unwrap();
        let b = stability_bound(FpEquation::Fp2S3, &g).unwrap().unwrap();
        assert_abs_diff_eq!(b, 0.04f64.powi(2) / 2.0, epsilon = 1e-12);
        assert!(matches!(
            solve_fp(FpEquation::Fp2S3, &g, 0.1, 2.0 * b),
            Err(Error::Stability { .. })
        ));
        assert!(matches!(
            solve_fp(FpEquation::Fp1H3, &g, 0.1, 1e-3),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn disc_delta_stays_nonnegative_and_conserves_mass() {
        let g = DensityGrid::zeros(GridDomain::S3Disc, 61, 61).unwrap();
        let p0 = mollified_delta(Manifold::S3, 5.0 * g.hx(), &g).unwrap();
        let b = stability_bound(FpEquation::Fp2S3, &g).unwrap().unwrap();
        let s = solve_fp(FpEquation::Fp2S3, &p0, 0.2, 0.9 * b).unwrap();
        assert!(s.grid.values.iter().all(|v| *v >= 0.0));
        assert!(s.mass_drift().abs() < 1e-10, "{}", s.mass_drift());
    }

    #[test]
    fn one_d_conserves_mass() {
        let g = DensityGrid::uniform(GridDomain::S3Interval, 201, 0).unwrap();
        let s = solve_fp(FpEquation::Fp1S3, &g, 1.0, 1e-3).unwrap();
        assert!(s.mass_drift().abs() < 1e-12);
        let d = mollified_delta(Manifold::S3, 0.05, &g).unwrap();
        let s = solve_fp(FpEquation::Fp1S3, &d, 1.0, 1e-3).unwrap();
        assert!(s.mass_drift().abs() < 1e-6, "{}", s.mass_drift());
    }

    #[test]
    fn bernoulli_limits() {
        assert_abs_diff_eq!(bernoulli(0.0), 1.0);
        assert_abs_diff_eq!(bernoulli(1e-9), 1.0 - 5e-10, epsilon = 1e-16);
        assert_abs_diff_eq!(
            bernoulli(1.0),
            1.0 / (std::f64::consts::E - 1.0),
            epsilon = 1e-15
        );
        assert!(bernoulli(800.0) < 1e-300);
    }
}
