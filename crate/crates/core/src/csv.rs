//! CSV tables with 17 significant digits, `,` separators, `\n` line endings
//! and one header row.

use std::fmt::Write;

use crate::fokker_planck::{DensityGrid, GridDomain};
use crate::group::{GroupPath, GroupState, Manifold};
use crate::sde::{EndpointEnsemble, Path, SdeSystem};

/// `v` with 17 significant digits, so that the text round-trips bit for bit.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn group_labels(manifold: Manifold) -> &'static [&'static str] {
    match manifold {
        Manifold::R3 => &["x", "y", "z"],
        Manifold::S3 => &["a_re", "a_im", "b_re", "b_im"],
        Manifold::H3 => &["a", "b_re", "b_im", "c"],
    }
}

pub fn group_row(state: &GroupState) -> Vec<f64> {
    match state {
        GroupState::R3(p) => vec![p.x, p.y, p.z],
        GroupState::S3(g) => vec![g.a().re, g.a().im, g.b().re, g.b().im],
        GroupState::H3(h) => vec![h.a(), h.b().re, h.b().im, h.c()],
    }
}

fn header(out: &mut String, lead: &[&str], labels: &[&str]) {
    let cols: Vec<&str> = lead.iter().chain(labels).copied().collect();
    out.push_str(&cols.join(","));
    out.push('\n');
}

fn row(out: &mut String, lead: &[String], values: &[f64]) {
    let mut first = true;
    for cell in lead
        .iter()
        .cloned()
        .chain(values.iter().map(|v| fmt_float(*v)))
    {
        if !first {
            out.push(',');
        }
        out.push_str(&cell);
        first = false;
    }
    out.push('\n');
}

/// `path,<coordinates>` with one row per endpoint.
pub fn group_endpoints_csv(manifold: Manifold, states: &[GroupState]) -> String {
    let mut out = String::new();
    header(&mut out, &["path"], group_labels(manifold));
    for (i, s) in states.iter().enumerate() {
        row(&mut out, &[i.to_string()], &group_row(s));
    }
    out
}

/// `path,step,t,<coordinates>` for every recorded state.
pub fn group_paths_csv(manifold: Manifold, paths: &[GroupPath]) -> String {
    let mut out = String::new();
    header(&mut out, &["path", "step", "t"], group_labels(manifold));
    for (i, p) in paths.iter().enumerate() {
        for (k, s) in p.states.iter().enumerate() {
            row(
                &mut out,
                &[i.to_string(), k.to_string(), fmt_float(p.time(k))],
                &group_row(s),
            );
        }
    }
    out
}

pub fn sde_endpoints_csv(ensemble: &EndpointEnsemble) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &["path"],
        SdeSystem::new(ensemble.system).state_labels(),
    );
    for i in 0..ensemble.len() {
        row(&mut out, &[i.to_string()], ensemble.endpoint(i));
    }
    out
}

pub fn sde_paths_csv(paths: &[Path]) -> String {
    let mut out = String::new();
    if let Some(p) = paths.first() {
        header(
            &mut out,
            &["path", "step", "t"],
            SdeSystem::new(p.system).state_labels(),
        );
    }
    for (i, p) in paths.iter().enumerate() {
        for k in 0..p.len() {
            row(
                &mut out,
                &[i.to_string(), k.to_string(), fmt_float(p.time(k))],
                p.state(k),
            );
        }
    }
    out
}

pub fn grid_labels(domain: GridDomain) -> &'static [&'static str] {
    match domain {
        GridDomain::S3Interval | GridDomain::Interval { .. } => &["x"],
        GridDomain::H3Interval { .. } => &["w"],
        GridDomain::S3Disc => &["x", "y"],
        GridDomain::H3Box { .. } => &["w", "c"],
    }
}

/// Every node of the grid, masked nodes included with `p = 0`.
pub fn grid_csv(grid: &DensityGrid) -> String {
    let mut out = String::new();
    let mut cols: Vec<&str> = grid_labels(grid.domain).to_vec();
    cols.push("p");
    header(&mut out, &[], &cols);
    if grid.is_two_d() {
        for (i, x) in grid.xs.iter().enumerate() {
            for (j, y) in grid.ys.iter().enumerate() {
                row(&mut out, &[], &[*x, *y, grid.values[grid.index(i, j)]]);
            }
        }
    } else {
        for (x, p) in grid.xs.iter().zip(&grid.values) {
            row(&mut out, &[], &[*x, *p]);
        }
    }
    out
}

/// Gnuplot script plotting `columns` of `csv_file`.
pub fn plot_script(csv_file: &str, title: &str, columns: &[&str]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    match columns {
        [.., "p"] if columns.len() == 3 => {
            let _ = writeln!(s, "set view map\nsplot '{csv_file}' using 1:2:3 with points palette pointtype 5 pointsize 0.3");
        }
        [.., "p"] => {
            let _ = writeln!(s, "plot '{csv_file}' using 1:2 with lines");
        }
        _ if columns.contains(&"step") => {
            let _ = writeln!(s, "plot '{csv_file}' using 3:4 with dots");
        }
        _ => {
            let _ = writeln!(
                s,
                "binwidth = 0.05\nbin(x) = binwidth * floor(x / binwidth)"
            );
            let _ = writeln!(
                s,
                "plot '{csv_file}' using (bin($2)):(1.0) smooth frequency with boxes"
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fokker_planck::GridDomain;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            assert_eq!(
                s.split('e').next().unwrap().replace(['-', '.'], "").len(),
                17
            );
        }
    }

    #[test]
    fn grid_table_has_one_header_and_all_nodes() {
        let g = DensityGrid::uniform(GridDomain::S3Disc, 11, 11).unwrap();
        let t = grid_csv(&g);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "x,y,p");
        assert_eq!(lines.len(), 1 + 121);
        assert!(t.ends_with('\n') && !t.contains('\r'));
    }
}
