use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{Grid, State};
use crate::{Error, Result};

/// Column order of `timeseries.csv`; `norm_h3_interior` is appended when
/// enabled.
pub const TIMESERIES_COLUMNS: [&str; 17] = [
    "t",
    "mass_dev",
    "momentum",
    "energy_dev",
    "eta_total",
    "dissipation_accum",
    "identity_residual",
    "sup_dev",
    "min_v",
    "max_v",
    "min_theta",
    "max_theta",
    "mu_vx_norm",
    "kanel_lhs",
    "kanel_rhs",
    "norm_h1",
    "norm_h2",
];

pub const PROFILE_COLUMNS: [&str; 5] = ["t", "x", "v", "u", "theta"];

/// Shortest round-trip scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    write_text(path, &text)
}

fn record_row(r: &DiagnosticsRecord, h3: bool) -> String {
    let mut cols = [
        r.t,
        r.mass_dev,
        r.momentum,
        r.energy_dev,
        r.eta_total,
        r.dissipation_accum,
        r.identity_residual,
        r.sup_dev,
        r.min_v,
        r.max_v,
        r.min_theta,
        r.max_theta,
        r.mu_vx_norm,
        r.kanel_lhs,
        r.kanel_rhs,
        r.norm_h1,
        r.norm_h2,
    ]
    .map(fmt_num)
    .join(",");
    if h3 {
        cols.push(',');
        cols.push_str(&r.norm_h3_interior.map_or_else(String::new, fmt_num));
    }
    cols
}

/// Streams diagnostics rows to `timeseries.csv`.
pub struct TimeseriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
    h3: bool,
}

impl TimeseriesWriter {
    pub fn create(path: PathBuf, h3: bool) -> Result<Self> {
        let mut out = create(&path)?;
        let mut header = TIMESERIES_COLUMNS.join(",");
        if h3 {
            header.push_str(",norm_h3_interior");
        }
        writeln!(out, "{header}").map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, out, h3 })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", record_row(r, self.h3)).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes one profile snapshot with `u` averaged from nodes to cell centres.
pub fn write_profile(path: &Path, grid: &Grid, state: &State) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", PROFILE_COLUMNS.join(",")).map_err(io)?;
    let t = fmt_num(state.t);
    for c in grid.interior_cells() {
        let u = 0.5 * (state.u[c] + state.u[c + 1]);
        writeln!(
            out,
            "{t},{},{},{},{}",
            fmt_num(grid.cell_x(c)),
            fmt_num(state.v[c]),
            fmt_num(u),
            fmt_num(state.theta[c])
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 0.0, 5.0 / 3.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn profile_has_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1.0, 16, 2).unwrap();
        let s = State::from_profile(&g, 0.5, |x| (1.0, x, 1.0));
        let p = dir.path().join("p.csv");
        write_profile(&p, &g, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 17);
        assert_eq!(lines[0], "t,x,v,u,theta");
        // linear u averages exactly to the centre
        let first: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert!((first[3] - first[1]).abs() < 1e-15);
    }
}
