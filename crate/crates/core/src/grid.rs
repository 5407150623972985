//! Truncated mass-coordinate domain `[-L, L]` with a staggered layout.
//!
//! Cell-centred fields (`v`, `theta`) have `N + 2g` entries, node fields (`u`)
//! have `N + 1 + 2g`; `g` ghost entries on each side hold the far-field state
//! `(1, 0, 1)`. Cell `c` (ghosted index) sits between nodes `c` and `c + 1`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_length: f64,
    cells: usize,
    ghost: usize,
    dx: f64,
    cell_centers: Vec<f64>,
    node_positions: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    Linf,
    H1,
    H2,
    /// H2 plus third differences taken on the interior only.
    H3Interior,
}

impl Grid {
    pub fn new(half_length: f64, cells: usize, ghost: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Argument(format!("L must be positive, got {half_length}")));
        }
        if cells < 8 {
            return Err(Error::Argument(format!("N must be at least 8, got {cells}")));
        }
        if ghost < 2 {
            return Err(Error::Argument(format!("ghost depth must be at least 2, got {ghost}")));
        }
        let dx = 2.0 * half_length / cells as f64;
        let cell_centers = (0..cells).map(|i| -half_length + (i as f64 + 0.5) * dx).collect();
        let node_positions = (0..=cells).map(|j| -half_length + j as f64 * dx).collect();
        Ok(Self { half_length, cells, ghost, dx, cell_centers, node_positions })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn ghost(&self) -> usize {
        self.ghost
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Interior cell centres (length `N`).
    pub fn cell_centers(&self) -> &[f64] {
        &self.cell_centers
    }

    /// Interior node positions (length `N + 1`).
    pub fn node_positions(&self) -> &[f64] {
        &self.node_positions
    }

    pub fn cell_len(&self) -> usize {
        self.cells + 2 * self.ghost
    }

    pub fn node_len(&self) -> usize {
        self.cells + 1 + 2 * self.ghost
    }

    pub fn interior_cells(&self) -> Range<usize> {
        self.ghost..self.ghost + self.cells
    }

    pub fn interior_nodes(&self) -> Range<usize> {
        self.ghost..self.ghost + self.cells + 1
    }

    /// Coordinate of ghosted cell index `c` (may lie outside `[-L, L]`).
    pub fn cell_x(&self, c: usize) -> f64 {
        -self.half_length + (c as f64 - self.ghost as f64 + 0.5) * self.dx
    }

    /// Coordinate of ghosted node index `n`.
    pub fn node_x(&self, n: usize) -> f64 {
        -self.half_length + (n as f64 - self.ghost as f64) * self.dx
    }

    fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected, actual })
        }
    }

    /// Cell-to-node difference `(cell[n] - cell[n-1]) / dx`. The two outermost
    /// nodes have a single neighbour and are set to 0.
    pub fn node_diff(&self, cell: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.cell_len(), cell.len())?;
        let mut out = vec![0.0; self.node_len()];
        let inv = 1.0 / self.dx;
        for n in 1..self.node_len() - 1 {
            out[n] = (cell[n] - cell[n - 1]) * inv;
        }
        Ok(out)
    }

    /// Node-to-cell difference `(node[c+1] - node[c]) / dx`.
    pub fn cell_diff(&self, node: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.node_len(), node.len())?;
        let inv = 1.0 / self.dx;
        Ok(node.windows(2).map(|w| (w[1] - w[0]) * inv).collect())
    }

    /// Mean of the two cells adjacent to each node; outermost nodes copy their
    /// single neighbour.
    pub fn face_average(&self, cell: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.cell_len(), cell.len())?;
        let mut out = vec![0.0; self.node_len()];
        out[0] = cell[0];
        out[self.node_len() - 1] = cell[self.cell_len() - 1];
        for n in 1..self.node_len() - 1 {
            out[n] = 0.5 * (cell[n - 1] + cell[n]);
        }
        Ok(out)
    }

    /// Discrete norm of an interior deviation field (length `N` or `N + 1`).
    ///
    /// Differences for H1/H2 pad the field with the far-field deviation 0 on
    /// both sides; `H3Interior` adds third differences over the unpadded
    /// interior only.
    pub fn discrete_norm(&self, field: &[f64], kind: NormKind) -> f64 {
        discrete_norm(field, self.dx, kind)
    }
}

pub fn discrete_norm(field: &[f64], dx: f64, kind: NormKind) -> f64 {
    let l2 = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>() * dx;
    match kind {
        NormKind::Linf => field.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        NormKind::L2 => l2(field).sqrt(),
        NormKind::H1 | NormKind::H2 | NormKind::H3Interior => {
            let mut padded = Vec::with_capacity(field.len() + 2);
            padded.push(0.0);
            padded.extend_from_slice(field);
            padded.push(0.0);
            let d1 = differences(&padded, dx);
            let mut sum = l2(field) + l2(&d1);
            if kind != NormKind::H1 {
                sum += l2(&differences(&d1, dx));
            }
            if kind == NormKind::H3Interior {
                let i1 = differences(field, dx);
                let i2 = differences(&i1, dx);
                sum += l2(&differences(&i2, dx));
            }
            sum.sqrt()
        }
    }
}

fn differences(xs: &[f64], dx: f64) -> Vec<f64> {
    xs.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

/// Discrete Lagrangian snapshot on a [`Grid`], ghosts included.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
}

impl State {
    pub fn equilibrium(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            v: vec![1.0; grid.cell_len()],
            u: vec![0.0; grid.node_len()],
            theta: vec![1.0; grid.cell_len()],
        }
    }

    /// Samples `profile(x) -> (v, u, theta)`: `v`, `theta` at cell centres and
    /// `u` at nodes. Ghosts are set to the far field.
    pub fn from_profile<F>(grid: &Grid, t: f64, profile: F) -> Self
    where
        F: Fn(f64) -> (f64, f64, f64),
    {
        let mut s = Self::equilibrium(grid);
        s.t = t;
        for c in grid.interior_cells() {
            let (v, _, th) = profile(grid.cell_x(c));
            s.v[c] = v;
            s.theta[c] = th;
        }
        for n in grid.interior_nodes() {
            s.u[n] = profile(grid.node_x(n)).1;
        }
        s
    }

    pub fn check_layout(&self, grid: &Grid) -> Result<()> {
        Grid::check_len(grid.cell_len(), self.v.len())?;
        Grid::check_len(grid.cell_len(), self.theta.len())?;
        Grid::check_len(grid.node_len(), self.u.len())
    }

    /// Resets every ghost entry to `(1, 0, 1)`.
    pub fn apply_farfield(&mut self, grid: &Grid) {
        let g = grid.ghost();
        let (nc, nn) = (grid.cell_len(), grid.node_len());
        for c in (0..g).chain(nc - g..nc) {
            self.v[c] = 1.0;
            self.theta[c] = 1.0;
        }
        for n in (0..g).chain(nn - g..nn) {
            self.u[n] = 0.0;
        }
    }

    /// Fails if any interior `v` or `theta` is not above `floor` (or not finite).
    pub fn check_positivity(&self, grid: &Grid, floor: f64) -> Result<()> {
        for c in grid.interior_cells() {
            let (v, th) = (self.v[c], self.theta[c]);
            if !(v > floor && v.is_finite()) {
                return Err(Error::Positivity(format!("v = {v} at x = {}", grid.cell_x(c))));
            }
            if !(th > floor && th.is_finite()) {
                return Err(Error::Positivity(format!("theta = {th} at x = {}", grid.cell_x(c))));
            }
        }
        for n in grid.interior_nodes() {
            if !self.u[n].is_finite() {
                return Err(Error::Positivity(format!("u not finite at x = {}", grid.node_x(n))));
            }
        }
        Ok(())
    }

    pub fn interior_v<'a>(&'a self, grid: &Grid) -> &'a [f64] {
        &self.v[grid.interior_cells()]
    }

    pub fn interior_theta<'a>(&'a self, grid: &Grid) -> &'a [f64] {
        &self.theta[grid.interior_cells()]
    }

    pub fn interior_u<'a>(&'a self, grid: &Grid) -> &'a [f64] {
        &self.u[grid.interior_nodes()]
    }

    /// `max |(v - 1, u, theta - 1)|` over interior entries.
    pub fn sup_deviation(&self, grid: &Grid) -> f64 {
        let cells = self
            .interior_v(grid)
            .iter()
            .zip(self.interior_theta(grid))
            .fold(0.0_f64, |m, (v, th)| m.max((v - 1.0).abs()).max((th - 1.0).abs()));
        self.interior_u(grid).iter().fold(cells, |m, u| m.max(u.abs()))
    }
}
