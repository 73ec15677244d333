use serde::{Deserialize, Serialize};

use super::grid::{DensityGrid, GridDomain};
use super::solver::assemble_2d;
use super::FpEquation;
use crate::error::{Error, Result};

/// Conditional factor used to lift a marginal to two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Conditional {
    /// Uniform on the full slice, as the DH measure prescribes.
    Dh,
    /// Uniform on the central fraction `factor` of the slice.
    Shrunk { factor: f64 },
}

/// Two-dimensional template matching a 1D marginal grid for `equation`.
fn template(eq: FpEquation, marginal: &DensityGrid) -> Result<DensityGrid> {
    let n = marginal.nx();
    match (eq, marginal.domain) {
        (FpEquation::Fp2S3, GridDomain::S3Interval) => DensityGrid::zeros(GridDomain::S3Disc, n, n),
        (FpEquation::Fp2H3, GridDomain::H3Interval { lambda_max }) => {
            DensityGrid::zeros(GridDomain::H3Box { lambda_max }, n, n)
        }
        _ => Err(Error::GridMismatch(format!(
            "ansatz residual needs fp2-s3 or fp2-h3 with a matching 1D marginal, got {eq} on {:?}",
            marginal.domain
        ))),
    }
}

/// Active non-sink nodes whose `(2·band+1)²` index neighbourhood is active
/// and free of sinks, and which lie `margin` inside both the `x` range and
/// their slice.
pub(crate) fn interior(grid: &DensityGrid, band: usize, margin: f64) -> Vec<bool> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let sink = grid.sink();
    let ok = |i: isize, j: isize| {
        i >= 0 && j >= 0 && i < nx as isize && j < ny as isize && {
            let k = i as usize * ny + j as usize;
            grid.active[k] && !sink[k]
        }
    };
    let (x_lo, x_hi) = grid.domain.x_range();
    let inside = |x: f64, y: f64| {
        let (half, mid) = grid.domain.slice(x);
        x - x_lo >= margin && x_hi - x >= margin && half - (y - mid).abs() >= margin
    };
    let b = band as isize;
    (0..grid.len())
        .map(|k| {
            let (i, j) = ((k / ny) as isize, (k % ny) as isize);
            inside(grid.xs[k / ny], grid.ys[k % ny])
                && (-b..=b).all(|di| (-b..=b).all(|dj| ok(i + di, j + dj)))
        })
        .collect()
}

/// Where and against which lifted density the residual is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    pub conditional: Conditional,
    /// Extra distance from the region boundary for evaluation nodes.
    pub margin: f64,
    /// Evaluate only every `stride`-th node in each direction, with the
    /// boundary band scaled by `stride`; nested grids then share one node set.
    pub stride: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            conditional: Conditional::Dh,
            margin: 0.0,
            stride: 1,
        }
    }
}

/// Sup-norm of `(∂t − L₂) p` for `p = p_x(x) · uniform(slice at x)`, where
/// `∂t p` is the 1D operator applied to the marginal times the conditional
/// factor, over nodes at least three steps inside the admissible region.
pub fn ansatz_residual(eq: FpEquation, marginal: &DensityGrid, t: f64) -> Result<f64> {
    ansatz_residual_with(eq, marginal, t, ResidualOptions::default())
}

pub fn ansatz_residual_with(
    eq: FpEquation,
    marginal: &DensityGrid,
    t: f64,
    opts: ResidualOptions,
) -> Result<f64> {
    if marginal.is_two_d() {
        return Err(Error::GridMismatch(
            "the marginal must be one-dimensional".into(),
        ));
    }
    if opts.stride == 0 || (marginal.nx() - 1) % opts.stride != 0 {
        return Err(Error::Config(format!(
            "stride {} does not divide the grid",
            opts.stride
        )));
    }
    let _ = t;
    let mut p2 = template(eq, marginal)?;
    let one_d = match eq {
        FpEquation::Fp2S3 => FpEquation::Fp1S3,
        _ => FpEquation::Fp1H3,
    };
    let (nx, ny) = (p2.nx(), p2.ny());
    let h = marginal.hx();
    let px = &marginal.values;
    let factor = match opts.conditional {
        Conditional::Dh => 1.0,
        Conditional::Shrunk { factor } => factor,
    };
    let mut dt_marg = vec![0.0; nx];
    for i in 1..nx - 1 {
        let x = marginal.xs[i];
        let e = one_d.expanded(x, 0.0);
        let d2 = (px[i + 1] - 2.0 * px[i] + px[i - 1]) / (h * h);
        let d1 = (px[i + 1] - px[i - 1]) / (2.0 * h);
        dt_marg[i] = e.a_xx * d2 + e.b_x * d1 + e.c * px[i];
    }
    let mut kfac = vec![0.0; p2.len()];
    for i in 0..nx {
        let (half, mid) = p2.domain.slice(p2.xs[i]);
        let half = half * factor;
        for j in 0..ny {
            let k = p2.index(i, j);
            if p2.active[k] && half > 0.0 && (p2.ys[j] - mid).abs() <= half {
                kfac[k] = 1.0 / (2.0 * half);
            }
            p2.values[k] = px[i] * kfac[k];
        }
    }
    let op = assemble_2d(eq, &p2);
    let vals: Vec<f64> = op.nodes.iter().map(|&g| p2.values[g]).collect();
    let mut lp = vec![0.0; vals.len()];
    op.k.apply(&vals, &mut lp);
    let inner = interior(&p2, 3 * opts.stride, opts.margin);
    let mut worst = 0.0f64;
    for (r, &g) in op.nodes.iter().enumerate() {
        let (i, j) = (g / ny, g % ny);
        if inner[g] && i % opts.stride == 0 && j % opts.stride == 0 {
            let res = dt_marg[i] * kfac[g] - lp[r] / op.volume[r];
            worst = worst.max(res.abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDeviation {
    /// `max |p / mean − 1|` over the tested nodes.
    pub max_deviation: f64,
    pub slices: usize,
    pub nodes: usize,
}

/// Deviation of the conditional density on fixed-`x` columns from uniform.
///
/// A column is tested when it carries at least `mass_floor` times the largest
/// column mass and has at least `min_nodes` nodes lying three steps and
/// `margin` or more inside the admissible region. Each such column is
/// compared with its own mean over those nodes.
pub fn conditional_deviation(
    grid: &DensityGrid,
    margin: f64,
    min_nodes: usize,
    mass_floor: f64,
) -> Result<ConditionalDeviation> {
    if !grid.is_two_d() {
        return Err(Error::GridMismatch(
            "conditional deviation needs a 2D grid".into(),
        ));
    }
    let inner = interior(grid, 3, margin);
    let w = grid.node_weights();
    let ny = grid.ny();
    let col_mass: Vec<f64> = (0..grid.nx())
        .map(|i| {
            (0..ny)
                .map(|j| w[i * ny + j] * grid.values[i * ny + j])
                .sum()
        })
        .collect();
    let top = col_mass.iter().cloned().fold(0.0, f64::max);
    let mut out = ConditionalDeviation {
        max_deviation: 0.0,
        slices: 0,
        nodes: 0,
    };
    for i in 0..grid.nx() {
        let nodes: Vec<usize> = (0..ny).map(|j| i * ny + j).filter(|&k| inner[k]).collect();
        if nodes.len() < min_nodes || col_mass[i] < mass_floor * top {
            continue;
        }
        let mean = nodes.iter().map(|&k| grid.values[k]).sum::<f64>() / nodes.len() as f64;
        for &k in &nodes {
            out.max_deviation = out.max_deviation.max((grid.values[k] / mean - 1.0).abs());
        }
        out.slices += 1;
        out.nodes += nodes.len();
    }
    if out.slices == 0 {
        return Err(Error::InsufficientData(
            "no column qualifies for the conditional test".into(),
        ));
    }
    Ok(out)
}
