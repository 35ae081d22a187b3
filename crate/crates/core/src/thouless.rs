//! Thouless-formula and Stieltjes-transform checks on a tabulated spectral shift density.
//!
//! The table is read as a piecewise-linear `ξ` on its grid, zero below the first node, and
//! `c/√E` beyond the last node. All integrals against this model are done in closed form.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct SsdTable {
    grid: Vec<f64>,
    xi: Vec<f64>,
    tail_coefficient: f64,
}

impl SsdTable {
    /// Table with the tail coefficient fitted by least squares on the last decade of the grid.
    pub fn new(grid: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if grid.len() != xi.len() || grid.len() < 2 {
            return domain("ssd table needs at least two (E, xi) pairs of equal length");
        }
        if grid.iter().chain(&xi).any(|v| !v.is_finite()) {
            return domain("ssd table contains non-finite values");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("ssd grid must be strictly increasing");
        }
        let tail_coefficient = fit_tail(&grid, &xi);
        Ok(SsdTable { grid, xi, tail_coefficient })
    }

    /// Like [`SsdTable::new`], prepending `ξ(0) = 0` when the grid starts above zero
    /// (no spectrum below zero for nonnegative potentials).
    pub fn anchored(mut grid: Vec<f64>, mut xi: Vec<f64>) -> Result<Self> {
        if grid.first().is_some_and(|&e| e > 0.0) {
            grid.insert(0, 0.0);
            xi.insert(0, 0.0);
        }
        Self::new(grid, xi)
    }

    pub fn with_tail(mut self, c: f64) -> Self {
        self.tail_coefficient = c;
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn tail_coefficient(&self) -> f64 {
        self.tail_coefficient
    }

    fn top(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Model value of `ξ` at `e`.
    pub fn value(&self, e: f64) -> f64 {
        let g = &self.grid;
        if e < g[0] {
            return 0.0;
        }
        if e > self.top() {
            return self.tail_coefficient / e.sqrt();
        }
        let i = g.partition_point(|&x| x <= e).clamp(1, g.len() - 1);
        let t = (e - g[i - 1]) / (g[i] - g[i - 1]);
        self.xi[i - 1] + t * (self.xi[i] - self.xi[i - 1])
    }

    /// `-∫ log|E - E'| dξ(E')` without the interior precondition.
    fn log_potential(&self, e: f64) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        // jump onto the first node
        if self.xi[0] != 0.0 {
            acc -= self.xi[0] * (e - g[0]).abs().ln();
        }
        for i in 0..g.len() - 1 {
            let s = (self.xi[i + 1] - self.xi[i]) / (g[i + 1] - g[i]);
            if s != 0.0 {
                acc -= s * (big_g(g[i + 1] - e) - big_g(g[i] - e));
            }
        }
        let c = self.tail_coefficient;
        if c != 0.0 || *self.xi.last().unwrap() != 0.0 {
            let a = self.top();
            let jump = c / a.sqrt() - self.xi.last().unwrap();
            acc -= jump * (a - e).abs().ln();
            acc += 0.5 * c * (2.0 * (a - e).ln() / a.sqrt() + 2.0 * tail_j(a, e));
        }
        acc
    }
}

/// Least-squares `c` in `ξ ≈ c/√E` over the last decade of the grid.
fn fit_tail(grid: &[f64], xi: &[f64]) -> f64 {
    let top = *grid.last().unwrap();
    if top <= 0.0 {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&e, &x) in grid.iter().zip(xi) {
        if e >= top / 10.0 && e > 0.0 {
            num += x / e.sqrt();
            den += 1.0 / e;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Antiderivative of `log|x|`.
fn big_g(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln() - x
    }
}

/// `∫_A^∞ dE' / (√E' (E' - E))` for `E < A`.
fn tail_j(a: f64, e: f64) -> f64 {
    let ra = a.sqrt();
    if e > 0.0 {
        let re = e.sqrt();
        ((ra + re) / (ra - re)).ln() / re
    } else if e < 0.0 {
        let kappa = (-e).sqrt();
        2.0 / kappa * (std::f64::consts::FRAC_PI_2 - (ra / kappa).atan())
    } else {
        2.0 / ra
    }
}

/// `-∫ log|E - E'| dξ(E')`; `E` must have at least three grid nodes on each side.
pub fn thouless_rhs(table: &SsdTable, energy: f64) -> Result<f64> {
    let g = &table.grid;
    let below = g.partition_point(|&x| x < energy);
    let above = g.len() - g.partition_point(|&x| x <= energy);
    if below < 3 || above < 3 {
        return domain(format!("energy {energy} is not in the interior of the ssd grid [{}, {}]", g[0], table.top()));
    }
    Ok(table.log_potential(energy))
}

/// `γ(E) = √(-E) - ∫ log|E - E'| dξ(E')` below a spectrum supported on `[0, ∞)`.
pub fn negative_energy_gamma(table: &SsdTable, energy: f64) -> Result<f64> {
    if table.grid[0] < 0.0 {
        return Err(Error::Unsupported(format!(
            "ssd table extends below zero (starts at {}); bound-state regimes are not handled",
            table.grid[0]
        )));
    }
    if !(energy <= 0.0) {
        return domain(format!("energy {energy} must be <= 0"));
    }
    Ok((-energy).sqrt() + table.log_potential(energy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesResult {
    pub z: C64,
    /// `-∫ ξ(E) dE / (E - z)`.
    pub w_big: C64,
    /// `W(z) - √(-z)`.
    pub w: C64,
}

/// Stieltjes transform of the table model at `Im z > 0`.
pub fn stieltjes_w(table: &SsdTable, z: Complex64) -> Result<StieltjesResult> {
    if !(z.im > 0.0) {
        return domain(format!("Im z = {} must be positive", z.im));
    }
    let g = &table.grid;
    let mut integral = C64::new(0.0, 0.0);
    for i in 0..g.len() - 1 {
        let h = g[i + 1] - g[i];
        let s = (table.xi[i + 1] - table.xi[i]) / h;
        let lead = table.xi[i] + s * (z - g[i]);
        integral += lead * ((g[i + 1] - z).ln() - (g[i] - z).ln()) + s * h;
    }
    let c = table.tail_coefficient;
    if c != 0.0 {
        let ra = table.top().sqrt();
        let s = z.sqrt();
        integral -= c / s * ((ra - s) / (ra + s)).ln();
    }
    let w_big = -integral;
    Ok(StieltjesResult { z, w_big, w: w_big - (-z).sqrt() })
}

/// `γ_0(E) = √max(0, -E)`.
pub fn gamma0(energy: f64) -> f64 {
    (-energy).max(0.0).sqrt()
}
