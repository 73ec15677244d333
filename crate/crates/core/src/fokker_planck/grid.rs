use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Manifold;

/// Domains carried by a [`DensityGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridDomain {
    /// `x ∈ [−1, 1]`.
    S3Interval,
    /// `w ∈ [1, cosh λ_max]`, absorbing at the right end.
    H3Interval { lambda_max: f64 },
    /// `[−1, 1]²` masked to the closed unit disc.
    S3Disc,
    /// `[1, cosh λ_max] × [e^{−λ_max}, e^{λ_max}]` masked to `c² − 2cw + 1 ≤ 0`,
    /// absorbing on the column `w = cosh λ_max`.
    H3Box { lambda_max: f64 },
    /// A plain interval, e.g. the result of marginalizing onto `y` or `c`.
    Interval { lo: f64, hi: f64 },
}

impl GridDomain {
    pub fn is_two_d(&self) -> bool {
        matches!(self, GridDomain::S3Disc | GridDomain::H3Box { .. })
    }

    pub fn x_range(&self) -> (f64, f64) {
        match *self {
            GridDomain::S3Interval | GridDomain::S3Disc => (-1.0, 1.0),
            GridDomain::H3Interval { lambda_max } | GridDomain::H3Box { lambda_max } => {
                (1.0, lambda_max.cosh())
            }
            GridDomain::Interval { lo, hi } => (lo, hi),
        }
    }

    pub fn y_range(&self) -> Option<(f64, f64)> {
        match *self {
            GridDomain::S3Disc => Some((-1.0, 1.0)),
            GridDomain::H3Box { lambda_max } => Some(((-lambda_max).exp(), lambda_max.exp())),
            _ => None,
        }
    }

    /// Half-width and centre of the conditional support at `x` (2D domains).
    pub fn slice(&self, x: f64) -> (f64, f64) {
        match self {
            GridDomain::H3Box { .. } | GridDomain::H3Interval { .. } => {
                ((x * x - 1.0).max(0.0).sqrt(), x)
            }
            _ => ((1.0 - x * x).max(0.0).sqrt(), 0.0),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            GridDomain::S3Disc => x * x + y * y <= 1.0 + TOL,
            GridDomain::H3Box { .. } => y * y - 2.0 * y * x + 1.0 <= TOL * x.max(1.0),
            _ => true,
        }
    }

    fn absorbing_right(&self) -> bool {
        matches!(
            self,
            GridDomain::H3Interval { .. } | GridDomain::H3Box { .. }
        )
    }
}

/// Active rows `jlo..=jhi` of a column and the slice `[lo, hi]` they cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Strip {
    pub jlo: usize,
    pub jhi: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Nodal values of a density on a uniform (masked) grid.
///
/// Two-dimensional values are stored row-major in `x`: node `(i, j)` sits at
/// index `i * ny + j`. Masses use trapezoid weights in `x`; in `y` each active
/// node owns `hy` except the two ends of a column, which extend to the true
/// slice boundary, so a column-constant density integrates exactly over its
/// slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub domain: GridDomain,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub active: Vec<bool>,
    pub values: Vec<f64>,
    pub time: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + k as f64 * h })
        .collect()
}

fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| if k == 0 || k + 1 == n { 0.5 * h } else { h })
        .collect()
}

impl DensityGrid {
    /// A zero density on `nx` (× `ny`) nodes. `ny` is ignored for 1D domains.
    pub fn zeros(domain: GridDomain, nx: usize, ny: usize) -> Result<Self> {
        let (lo, hi) = domain.x_range();
        if nx < 3 || !(hi > lo) {
            return Err(Error::Config(format!(
                "need at least 3 nodes on a non-empty range, got {nx} on [{lo}, {hi}]"
            )));
        }
        if let GridDomain::H3Interval { lambda_max } | GridDomain::H3Box { lambda_max } = domain {
            if !(lambda_max > 0.0 && lambda_max.is_finite()) {
                return Err(Error::Config(format!(
                    "lambda_max must be positive, got {lambda_max}"
                )));
            }
        }
        let xs = linspace(lo, hi, nx);
        let (ys, active) = match domain.y_range() {
            Some((ylo, yhi)) => {
                if ny < 3 {
                    return Err(Error::Config(format!(
                        "need at least 3 nodes in y, got {ny}"
                    )));
                }
                let ys = linspace(ylo, yhi, ny);
                let active = xs
                    .iter()
                    .flat_map(|&x| ys.iter().map(move |&y| domain.contains(x, y)))
                    .collect();
                (ys, active)
            }
            None => (Vec::new(), vec![true; nx]),
        };
        let n = active.len();
        Ok(DensityGrid {
            domain,
            xs,
            ys,
            active,
            values: vec![0.0; n],
            time: 0.0,
        })
    }

    /// The normalized uniform density on the active nodes.
    pub fn uniform(domain: GridDomain, nx: usize, ny: usize) -> Result<Self> {
        let mut g = Self::zeros(domain, nx, ny)?;
        for (v, &a) in g.values.iter_mut().zip(&g.active) {
            *v = if a { 1.0 } else { 0.0 };
        }
        g.normalize()?;
        Ok(g)
    }

    pub fn is_two_d(&self) -> bool {
        !self.ys.is_empty()
    }
    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn ny(&self) -> usize {
        self.ys.len().max(1)
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }
    pub fn hx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }
    pub fn hy(&self) -> f64 {
        if self.is_two_d() {
            self.ys[1] - self.ys[0]
        } else {
            0.0
        }
    }

    pub fn weights_x(&self) -> Vec<f64> {
        trapezoid(self.nx(), self.hx())
    }

    pub fn weights_y(&self) -> Vec<f64> {
        if self.is_two_d() {
            trapezoid(self.ny(), self.hy())
        } else {
            vec![1.0]
        }
    }

    /// Quadrature weight of every node (zero on masked nodes).
    pub fn node_weights(&self) -> Vec<f64> {
        let wx = self.weights_x();
        if !self.is_two_d() {
            return wx;
        }
        let ny = self.ny();
        let mut w = vec![0.0; self.len()];
        for (i, strip) in self.strips().iter().enumerate() {
            if let Some(s) = strip {
                for j in s.jlo..=s.jhi {
                    w[i * ny + j] = wx[i] * self.strip_weight(s, j);
                }
            }
        }
        w
    }

    /// Active rows and true slice of every column; `None` for columns whose
    /// slice has zero length.
    pub(crate) fn strips(&self) -> Vec<Option<Strip>> {
        let Some((ylo, yhi)) = self.domain.y_range() else {
            return Vec::new();
        };
        (0..self.nx())
            .map(|i| {
                let col = self.column(i);
                let (&jlo, &jhi) = (col.first()?, col.last()?);
                debug_assert_eq!(jhi - jlo + 1, col.len());
                let (half, mid) = self.domain.slice(self.xs[i]);
                let (lo, hi) = ((mid - half).max(ylo), (mid + half).min(yhi));
                (hi > lo).then(|| Strip {
                    jlo,
                    jhi,
                    lo: lo.min(self.ys[jlo]),
                    hi: hi.max(self.ys[jhi]),
                })
            })
            .collect()
    }

    /// Length of the part of the slice owned by row `j`.
    pub(crate) fn strip_weight(&self, s: &Strip, j: usize) -> f64 {
        let h = 0.5 * self.hy();
        let top = if j == s.jhi { s.hi } else { self.ys[j] + h };
        let bottom = if j == s.jlo { s.lo } else { self.ys[j] - h };
        top - bottom
    }

    /// Row of column strip `s` owning height `y`.
    pub(crate) fn owner(&self, s: &Strip, y: f64) -> usize {
        let j = ((y - self.ys[0]) / self.hy()).round();
        (j.max(0.0) as usize).clamp(s.jlo, s.jhi)
    }

    /// Nodes held at zero (the absorbing wall at `w_max` on H³ domains).
    pub fn sink(&self) -> Vec<bool> {
        let nx = self.nx();
        let ny = self.ny();
        (0..self.len())
            .map(|k| self.domain.absorbing_right() && k / ny == nx - 1)
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.node_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::SchemeFailure(format!(
                "cannot normalize a grid of mass {m}"
            )));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    /// Trapezoidal mean of `f(x)` (1D) under the density.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let w = self.weights_x();
        let m = self.mass();
        self.xs
            .iter()
            .zip(&w)
            .zip(&self.values)
            .map(|((x, w), p)| f(*x) * w * p)
            .sum::<f64>()
            / m
    }

    /// Active node indices of column `i` (2D).
    pub fn column(&self, i: usize) -> Vec<usize> {
        (0..self.ny())
            .filter(|&j| self.active[self.index(i, j)])
            .collect()
    }

    pub fn same_nodes(&self, other: &DensityGrid) -> bool {
        self.xs == other.xs && self.ys == other.ys && self.active == other.active
    }
}

/// Discretized `δ_{x*}(x) × uniform(slice)` with `x* = √(1−ε²)` (s3) or `√(1+ε²)` (h3).
///
/// On a 1D grid the factor in `x` is a single-node spike. On a 2D grid the
/// spike is placed on the column nearest `x*` whose slice half-width is at
/// least `2h`, and the whole active slice of that column is filled uniformly.
pub fn mollified_delta(family: Manifold, eps: f64, grid: &DensityGrid) -> Result<DensityGrid> {
    let target = match (family, grid.domain) {
        (Manifold::S3, GridDomain::S3Interval | GridDomain::S3Disc) => {
            if eps >= 1.0 {
                return Err(Error::Resolution(format!(
                    "epsilon = {eps} must be below 1 on S3"
                )));
            }
            (1.0 - eps * eps).sqrt()
        }
        (Manifold::H3, GridDomain::H3Interval { .. } | GridDomain::H3Box { .. }) => {
            (1.0 + eps * eps).sqrt()
        }
        _ => {
            return Err(Error::GridMismatch(format!(
                "no mollified delta for {family} on {:?}",
                grid.domain
            )))
        }
    };
    let h = grid.hx().max(grid.hy());
    if !(eps >= 2.0 * h) {
        return Err(Error::Resolution(format!(
            "epsilon = {eps} is below 2h = {}",
            2.0 * h
        )));
    }
    let mut out = grid.clone();
    out.values.iter_mut().for_each(|v| *v = 0.0);
    out.time = 0.0;
    let sink = grid.sink();
    let hy = grid.hy();
    let candidates = (0..grid.nx()).filter(|&i| {
        !sink[grid.index(i, 0)] && (!grid.is_two_d() || grid.domain.slice(grid.xs[i]).0 >= 2.0 * hy)
    });
    let col = candidates
        .min_by(|&a, &b| {
            (grid.xs[a] - target)
                .abs()
                .total_cmp(&(grid.xs[b] - target).abs())
        })
        .ok_or_else(|| Error::Resolution("no grid column can hold the initial slice".into()))?;
    for j in 0..grid.ny() {
        let k = grid.index(col, j);
        if grid.active[k] {
            out.values[k] = 1.0;
        }
    }
    out.normalize()?;
    Ok(out)
}

/// Trapezoidal marginal keeping `axis` (0 keeps `x`, 1 keeps `y`).
pub fn marginal(p2d: &DensityGrid, axis: usize) -> Result<DensityGrid> {
    if !p2d.is_two_d() {
        return Err(Error::GridMismatch("marginal needs a 2D grid".into()));
    }
    let (w, wy) = (p2d.node_weights(), p2d.weights_y());
    let (nx, ny) = (p2d.nx(), p2d.ny());
    let wx = p2d.weights_x();
    let (domain, xs, values) = match axis {
        0 => {
            let d = match p2d.domain {
                GridDomain::S3Disc => GridDomain::S3Interval,
                GridDomain::H3Box { lambda_max } => GridDomain::H3Interval { lambda_max },
                other => other,
            };
            let v = (0..nx)
                .map(|i| {
                    if wx[i] == 0.0 {
                        return 0.0;
                    }
                    (0..ny)
                        .map(|j| w[i * ny + j] * p2d.values[i * ny + j])
                        .sum::<f64>()
                        / wx[i]
                })
                .collect();
            (d, p2d.xs.clone(), v)
        }
        1 => {
            let (lo, hi) = p2d.domain.y_range().expect("2D domain");
            let d = match p2d.domain {
                GridDomain::S3Disc => GridDomain::S3Interval,
                _ => GridDomain::Interval { lo, hi },
            };
            let v = (0..ny)
                .map(|j| {
                    (0..nx)
                        .map(|i| w[i * ny + j] * p2d.values[i * ny + j])
                        .sum::<f64>()
                        / wy[j]
                })
                .collect();
            (d, p2d.ys.clone(), v)
        }
        _ => return Err(Error::Config(format!("axis must be 0 or 1, got {axis}"))),
    };
    let n = xs.len();
    Ok(DensityGrid {
        domain,
        xs,
        ys: Vec::new(),
        active: vec![true; n],
        values,
        time: p2d.time,
    })
}
