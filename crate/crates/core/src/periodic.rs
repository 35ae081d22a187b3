//! Periodic reference operator `Σ_j α f(x - j)`: discriminant, Floquet multipliers,
//! rotation-number density of states, and detectors for the zero-Lyapunov energy sets.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::linalg::{C64, I, ONE};
use crate::scattering::{check_energy, single_site, ScatteringData};
use crate::potential::SingleSitePotential;
use crate::chain::tilted_transfer;

/// Grid step of the rotation-number integration in `u = sign(E)·√|E|`.
pub const DEFAULT_U_STEP: f64 = 1e-3;

/// `Δ = 2cos(√E - πξ_α)/|T_α|` from single-site scattering data. Only `e^{iπξ}` enters, so
/// the principal phase suffices.
pub fn discriminant_from(s: &ScatteringData) -> Result<f64> {
    if s.abs_t < 1e-12 {
        return domain(format!("|T| = {} too small for the discriminant at E = {}", s.abs_t, s.energy));
    }
    Ok(2.0 * (s.sqrt_energy + s.delta_phase).cos() / s.abs_t)
}

pub fn discriminant(alpha: f64, energy: f64, f: &SingleSitePotential) -> Result<f64> {
    discriminant_from(&single_site(f, alpha, energy)?)
}

/// Trace of the one-period monodromy of `(u, u')` at any real energy. Agrees with
/// [`discriminant`] for `E > 0`.
pub fn monodromy_trace(alpha: f64, energy: f64, f: &SingleSitePotential) -> f64 {
    match f {
        SingleSitePotential::Delta => {
            if energy > 0.0 {
                let k = energy.sqrt();
                2.0 * k.cos() + alpha * k.sin() / k
            } else if energy < 0.0 {
                let kappa = (-energy).sqrt();
                2.0 * kappa.cosh() + alpha * kappa.sinh() / kappa
            } else {
                2.0 + alpha
            }
        }
        // the barrier fills the whole unit cell
        SingleSitePotential::Square => 2.0 * C64::new(energy - alpha, 0.0).sqrt().cos().re,
        SingleSitePotential::Tabulated { samples } => {
            let (a, _) = f.domain();
            let mut m = [[1.0, 0.0], [0.0, 1.0]];
            let mut x = a;
            for w in samples.windows(2) {
                let ((x0, v0), (x1, v1)) = (w[0], w[1]);
                let slope = (v1 - v0) / (x1 - x0);
                real_rk4(&mut m, x0, x1, energy, |y| alpha * (v0 + slope * (y - x0)));
                x = x1;
            }
            // free remainder of the unit cell
            real_rk4(&mut m, x, a + 1.0, energy, |_| 0.0);
            m[0][0] + m[1][1]
        }
    }
}

/// Propagate the columns of the real fundamental matrix of `u'' = (V - E) u`.
fn real_rk4(m: &mut [[f64; 2]; 2], x0: f64, x1: f64, energy: f64, v: impl Fn(f64) -> f64) {
    if x1 <= x0 {
        return;
    }
    let n = ((x1 - x0) / 1e-3 - 1e-9).ceil().max(1.0) as usize;
    let h = (x1 - x0) / n as f64;
    for col in 0..2 {
        let (mut u, mut p) = (m[0][col], m[1][col]);
        for s in 0..n {
            let x = x0 + h * s as f64;
            let q = |y: f64| v(y) - energy;
            let (q0, qm, q1) = (q(x), q(x + 0.5 * h), q(x + h));
            let (k1u, k1p) = (p, q0 * u);
            let (k2u, k2p) = (p + 0.5 * h * k1p, qm * (u + 0.5 * h * k1u));
            let (k3u, k3p) = (p + 0.5 * h * k2p, qm * (u + 0.5 * h * k2u));
            let (k4u, k4p) = (p + h * k3p, q1 * (u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        }
        m[0][col] = u;
        m[1][col] = p;
    }
}

/// Floquet data of the periodic operator at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInfo {
    pub energy: f64,
    pub discriminant: f64,
    pub in_gap: bool,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub gamma_periodic: f64,
    pub n_periodic: f64,
}

/// `λ± = Δ/2 ∓ √(Δ²/4 - 1)`.
pub fn floquet_multipliers(delta: f64) -> (C64, C64) {
    let half = C64::new(delta / 2.0, 0.0);
    let root = (half * half - ONE).sqrt();
    (half - root, half + root)
}

/// Slack on `|Δ| = 2` absorbing rounding at band edges.
pub const EDGE_TOL: f64 = 1e-12;

pub fn is_gap(delta: f64) -> bool {
    delta.abs() > 2.0 + EDGE_TOL
}

pub fn gamma_from_discriminant(delta: f64) -> f64 {
    if is_gap(delta) {
        (delta.abs() / 2.0).acosh()
    } else {
        0.0
    }
}

fn theta(delta: f64) -> f64 {
    (delta / 2.0).clamp(-1.0, 1.0).acos()
}

fn energy_of(u: f64) -> f64 {
    u * u.abs()
}

/// Rotation-number integrated density of states of the periodic operator, tabulated on a
/// uniform grid in `u = sign(E)·√|E|` from below the spectrum.
#[derive(Debug, Clone)]
pub struct PeriodicTable {
    alpha: f64,
    potential: SingleSitePotential,
    u0: f64,
    du: f64,
    delta: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PeriodicTable {
    pub fn build(alpha: f64, f: &SingleSitePotential, e_max: f64) -> Result<Self> {
        Self::build_with_step(alpha, f, e_max, DEFAULT_U_STEP)
    }

    pub fn build_with_step(alpha: f64, f: &SingleSitePotential, e_max: f64, du: f64) -> Result<Self> {
        if !(e_max.is_finite() && du > 0.0) {
            return domain("periodic table needs finite e_max and positive step");
        }
        f.validate()?;
        let floor = spectrum_floor(alpha, f);
        let u0 = -(-floor).sqrt();
        let u_max = if e_max >= 0.0 { e_max.sqrt() } else { -(-e_max).sqrt() };
        let n = (((u_max - u0) / du).ceil().max(1.0)) as usize;
        let mut delta = Vec::with_capacity(n + 1);
        let mut cumulative = Vec::with_capacity(n + 1);
        delta.push(monodromy_trace(alpha, energy_of(u0), f));
        cumulative.push(0.0);
        for i in 0..n {
            let ua = u0 + du * i as f64;
            let d0 = delta[i];
            let d1 = monodromy_trace(alpha, energy_of(ua + du), f);
            let dm = monodromy_trace(alpha, energy_of(ua + 0.5 * du), f);
            cumulative.push(cumulative[i] + cell_variation(d0, dm, d1));
            delta.push(d1);
        }
        Ok(PeriodicTable { alpha, potential: f.clone(), u0, du, delta, cumulative })
    }

    pub fn e_max(&self) -> f64 {
        energy_of(self.u0 + self.du * (self.delta.len() - 1) as f64)
    }

    /// `N_per(E)`.
    pub fn ids(&self, energy: f64) -> f64 {
        let u = if energy >= 0.0 { energy.sqrt() } else { -(-energy).sqrt() };
        if u <= self.u0 {
            return 0.0;
        }
        let pos = (u - self.u0) / self.du;
        let i = (pos.floor() as usize).min(self.delta.len() - 1);
        let ua = self.u0 + self.du * i as f64;
        if u <= ua || i + 1 >= self.delta.len() && u > ua + self.du {
            return self.cumulative[i] / PI;
        }
        let d1 = monodromy_trace(self.alpha, energy, &self.potential);
        let dm = monodromy_trace(self.alpha, energy_of(0.5 * (ua + u)), &self.potential);
        (self.cumulative[i] + cell_variation(self.delta[i], dm, d1)) / PI
    }
}

/// Variation of `θ = arccos(Δ/2)` across one cell from three samples, passing through the
/// interpolated extremum of `Δ` when it lies inside the cell.
fn cell_variation(d0: f64, dm: f64, d1: f64) -> f64 {
    let (t0, t1) = (theta(d0), theta(d1));
    // parabola through (-1, d0), (0, dm), (1, d1)
    let a = 0.5 * (d0 + d1) - dm;
    let b = 0.5 * (d1 - d0);
    if a.abs() > 1e-300 {
        let s = -b / (2.0 * a);
        if s > -1.0 && s < 1.0 {
            let tip = theta(dm + b * s + a * s * s);
            return (t0 - tip).abs() + (tip - t1).abs();
        }
    }
    (t1 - t0).abs()
}

/// Energy below the spectrum of the periodic operator.
fn spectrum_floor(alpha: f64, f: &SingleSitePotential) -> f64 {
    match f {
        SingleSitePotential::Delta => {
            if alpha >= 0.0 {
                0.0
            } else {
                -(0.5 * alpha.abs() + 2.0).powi(2)
            }
        }
        _ => {
            let inf = match f {
                SingleSitePotential::Tabulated { samples } => samples.iter().map(|s| s.1).fold(0.0, f64::min),
                _ => 0.0,
            };
            (alpha * inf).min(alpha * f.sup()).min(0.0) - 1.0
        }
    }
}

/// Band data at `E > 0` with `N_per` from a fresh table.
pub fn periodic_reference(alpha: f64, energy: f64, f: &SingleSitePotential) -> Result<BandInfo> {
    check_energy(energy)?;
    let table = PeriodicTable::build(alpha, f, energy)?;
    band_info(&table, energy)
}

/// Band data at `E > 0` using a prebuilt table covering `E`.
pub fn band_info(table: &PeriodicTable, energy: f64) -> Result<BandInfo> {
    check_energy(energy)?;
    if energy > table.e_max() * (1.0 + 1e-12) {
        return domain(format!("energy {energy} beyond periodic table range {}", table.e_max()));
    }
    let delta = discriminant(table.alpha, energy, &table.potential)?;
    let (lambda_plus, lambda_minus) = floquet_multipliers(delta);
    Ok(BandInfo {
        energy,
        discriminant: delta,
        in_gap: is_gap(delta),
        lambda_plus,
        lambda_minus,
        gamma_periodic: gamma_from_discriminant(delta),
        n_periodic: table.ids(energy),
    })
}

/// Energies in `(0, e_max]` where `|Δ| = 2`, located by bisection on a fine grid.
pub fn band_edges(alpha: f64, f: &SingleSitePotential, e_max: f64) -> Result<Vec<f64>> {
    let g = |u: f64| monodromy_trace(alpha, u * u, f).abs() - 2.0;
    let du = DEFAULT_U_STEP;
    let n = (e_max.sqrt() / du).ceil() as usize;
    let mut edges = Vec::new();
    let mut prev = g(du * 0.5);
    let mut ua = du * 0.5;
    for i in 1..=n {
        let ub = (du * (i as f64 + 0.5)).min(e_max.sqrt());
        if ub <= ua {
            break;
        }
        let cur = g(ub);
        if prev == 0.0 {
            edges.push(ua * ua);
        } else if prev * cur < 0.0 {
            let (mut lo, mut hi, mut glo) = (ua, ub, prev);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if gm * glo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            edges.push((0.5 * (lo + hi)).powi(2));
        }
        prev = cur;
        ua = ub;
    }
    Ok(edges)
}

/// Per-energy measurements behind a [`SpecialEnergyReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialEnergyRow {
    pub energy: f64,
    pub max_abs_r: f64,
    /// `max_α |F⁺(α) - F⁺(α₀)|`, `None` when every `α` was skipped.
    pub spread_plus: Option<f64>,
    pub spread_minus: Option<f64>,
    /// `max_α [cos²(√E - πξ_α) - |T_α|²]`.
    pub max_margin: f64,
    pub fourier_re: f64,
    pub fourier_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialEnergyReport {
    pub candidates_s: Vec<f64>,
    pub candidates_s_pm: Vec<f64>,
    pub candidates_s_tilde: Vec<f64>,
    pub tol_r: f64,
    pub tol_f: f64,
    pub rows: Vec<SpecialEnergyRow>,
}

/// `F_E^{(±)}(α)`; `None` when `|R| < tol`.
pub fn f_functions(s: &ScatteringData, tol: f64) -> Option<(C64, C64)> {
    if s.r.norm() < tol {
        return None;
    }
    let phase = s.sqrt_energy + s.delta_phase; // √E - πξ
    let root = C64::new(phase.cos().powi(2) - s.abs_t * s.abs_t, 0.0).sqrt();
    let lead = -I * phase.sin();
    let denom = s.r * C64::from_polar(1.0, -s.delta_phase);
    Some(((lead + root) / denom, (lead - root) / denom))
}

pub fn special_energy_scan(
    f: &SingleSitePotential,
    alpha_grid: &[f64],
    energy_grid: &[f64],
    tol_r: f64,
    tol_f: f64,
) -> Result<SpecialEnergyReport> {
    if alpha_grid.is_empty() || energy_grid.is_empty() {
        return domain("special-energy scan needs nonempty coupling and energy grids");
    }
    if !(tol_r > 0.0 && tol_f > 0.0) {
        return domain("tolerances must be positive");
    }
    let mut report = SpecialEnergyReport {
        candidates_s: vec![],
        candidates_s_pm: vec![],
        candidates_s_tilde: vec![],
        tol_r,
        tol_f,
        rows: vec![],
    };
    for &e in energy_grid {
        check_energy(e)?;
        let mut max_r: f64 = 0.0;
        let mut margin = f64::NEG_INFINITY;
        let mut first: Option<(C64, C64)> = None;
        let (mut sp, mut sm): (Option<f64>, Option<f64>) = (None, None);
        for &alpha in alpha_grid {
            let s = single_site(f, alpha, e)?;
            max_r = max_r.max(s.r.norm());
            margin = margin.max((s.sqrt_energy + s.delta_phase).cos().powi(2) - s.abs_t * s.abs_t);
            if let Some((fp, fm)) = f_functions(&s, tol_r) {
                match first {
                    None => {
                        first = Some((fp, fm));
                        sp = Some(0.0);
                        sm = Some(0.0);
                    }
                    Some((p0, m0)) => {
                        sp = sp.map(|v| v.max((fp - p0).norm()));
                        sm = sm.map(|v| v.max((fm - m0).norm()));
                    }
                }
            }
        }
        let fourier = f.fourier(e);
        let in_s = max_r < tol_r;
        let in_pm = !in_s && (sp.is_some_and(|v| v < tol_f) || sm.is_some_and(|v| v < tol_f));
        if in_s {
            report.candidates_s.push(e);
        }
        if in_pm {
            report.candidates_s_pm.push(e);
            if margin <= tol_f {
                report.candidates_s_tilde.push(e);
            }
        }
        report.rows.push(SpecialEnergyRow {
            energy: e,
            max_abs_r: max_r,
            spread_plus: sp,
            spread_minus: sm,
            max_margin: margin,
            fourier_re: fourier.re,
            fourier_im: fourier.im,
        });
    }
    Ok(report)
}

/// Trace of the unit-spacing tilted matrix; an independent route to the discriminant.
pub fn tilted_trace(alpha: f64, energy: f64, f: &SingleSitePotential) -> Result<f64> {
    Ok(tilted_transfer(&single_site(f, alpha, energy)?).entries.trace().re)
}
