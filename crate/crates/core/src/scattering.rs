//! Single-site scattering data `(T, R, L)` at `E > 0`: closed forms for the point
//! interaction and the square barrier, and the transfer-matrix propagator for
//! arbitrary bounded potentials.
//!
//! Conventions: `T = |T| e^{iδ}`, `R = i√(1-|T|²) e^{i(δ+θ)}`, `L = i√(1-|T|²) e^{i(δ-θ)}`,
//! spectral shift `ξ = -δ/π` normalized to vanish at high energy. The transfer matrix
//! `Λ = [[1/T, -R/T], [L/T, 1/T*]]` of a potential on `[x0, x1]` composes left to right
//! in increasing position: `Λ[x0, x2] = Λ[x0, x1] Λ[x1, x2]`.

use std::f64::consts::PI;
use std::sync::Arc;


use crate::error::{domain, Error, Result};
use crate::linalg::{Mat2, C64, I, ONE};
use crate::potential::SingleSitePotential;

/// Smallest energy accepted by scattering operations.
pub const MIN_ENERGY: f64 = 1e-6;

pub(crate) fn check_energy(energy: f64) -> Result<()> {
    if !(energy >= MIN_ENERGY) || !energy.is_finite() {
        return domain(format!("energy {energy} must be finite and >= {MIN_ENERGY}"));
    }
    Ok(())
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringData {
    pub energy: f64,
    pub sqrt_energy: f64,
    pub t: C64,
    pub r: C64,
    pub l: C64,
    pub abs_t: f64,
    /// Principal value of `arg T`.
    pub delta_phase: f64,
    pub theta_phase: f64,
}

impl ScatteringData {
    pub fn from_amplitudes(energy: f64, t: C64, r: C64, l: C64) -> Self {
        let delta = t.arg();
        let theta = if r.norm() > 1e-300 { wrap_angle(r.arg() - PI / 2.0 - delta) } else { 0.0 };
        ScatteringData {
            energy,
            sqrt_energy: energy.sqrt(),
            t,
            r,
            l,
            abs_t: t.norm(),
            delta_phase: delta,
            theta_phase: theta,
        }
    }

    /// Free propagation: `T = 1`, `R = L = 0`.
    pub fn free(energy: f64) -> Self {
        Self::from_amplitudes(energy, ONE, C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn unitarity_defect(&self) -> f64 {
        let t2 = self.t.norm_sqr();
        (t2 + self.r.norm_sqr() - 1.0).abs().max((t2 + self.l.norm_sqr() - 1.0).abs())
    }

    /// Max deviation of `(T, R, L)` from the `(|T|, δ, θ)` parameterization.
    pub fn parameterization_defect(&self) -> f64 {
        let b = (1.0 - self.abs_t * self.abs_t).max(0.0).sqrt();
        let t = C64::from_polar(self.abs_t, self.delta_phase);
        let r = I * C64::from_polar(b, self.delta_phase + self.theta_phase);
        let l = I * C64::from_polar(b, self.delta_phase - self.theta_phase);
        (t - self.t).norm().max((r - self.r).norm()).max((l - self.l).norm())
    }

    pub fn transfer(&self) -> TransferMatrix {
        let inv_t = ONE / self.t;
        TransferMatrix(Mat2::new(inv_t, -self.r * inv_t, self.l * inv_t, ONE / self.t.conj()))
    }
}

/// Unimodular `Λ = [[1/T, -R/T], [L/T, 1/T*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub Mat2);

impl TransferMatrix {
    pub fn identity() -> Self {
        TransferMatrix(Mat2::IDENTITY)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn det(&self) -> C64 {
        self.0.det()
    }

    pub fn su11_defect(&self) -> f64 {
        self.0.su11_defect()
    }

    /// Transfer matrix of the same potential translated by `shift`.
    pub fn translated(&self, sqrt_energy: f64, shift: f64) -> Self {
        let u = Mat2::phase(sqrt_energy * shift);
        TransferMatrix(u * self.0 * Mat2::phase(-sqrt_energy * shift))
    }
}

/// Point interaction `α δ(x)`.
pub fn s_matrix_delta(alpha: f64, energy: f64) -> Result<ScatteringData> {
    check_energy(energy)?;
    let beta = alpha / (2.0 * energy.sqrt());
    let t = ONE / C64::new(1.0, beta);
    let r = C64::new(0.0, -beta) * t;
    Ok(ScatteringData::from_amplitudes(energy, t, r, r))
}

fn p_matrix(k: f64, x: f64) -> Mat2 {
    let ep = C64::from_polar(1.0, k * x);
    let em = C64::from_polar(1.0, -k * x);
    Mat2::new(ep, em, I * k * ep, -I * k * em)
}

fn p_inverse(k: f64, x: f64) -> Mat2 {
    let ep = C64::from_polar(1.0, k * x);
    let em = C64::from_polar(1.0, -k * x);
    let inv_det = ONE / C64::new(0.0, -2.0 * k);
    Mat2::new(-I * k * em, -em, -I * k * ep, ep).scale(inv_det)
}

/// Square barrier of height `α` on `[-1/2, 1/2]` by plane-wave matching.
pub fn s_matrix_square(alpha: f64, energy: f64) -> Result<ScatteringData> {
    check_energy(energy)?;
    let lambda = slab_transfer(alpha, energy.sqrt(), -0.5, 0.5);
    scattering_from_transfer(&TransferMatrix(lambda), energy)
}

/// Transfer matrix of a constant potential `v` on `[a, b]` at momentum `k`.
pub(crate) fn slab_transfer(v: f64, k: f64, a: f64, b: f64) -> Mat2 {
    let w = b - a;
    // internal momentum, branch with Im q >= 0
    let q = C64::new(k * k - v, 0.0).sqrt();
    let qw = q * w;
    let (c, sinc, qs) = if qw.norm() < 1e-6 {
        let z2 = qw * qw;
        (ONE - z2 / 2.0, (ONE - z2 / 6.0) * w, q * q * w)
    } else {
        (qw.cos(), qw.sin() / q, q * qw.sin())
    };
    // fundamental matrix from b back to a
    let phi_back = Mat2::new(c, -sinc, qs, c);
    p_inverse(k, a) * phi_back * p_matrix(k, b)
}

/// Read `(T, R, L)` off a transfer matrix.
pub fn scattering_from_transfer(lambda: &TransferMatrix, energy: f64) -> Result<ScatteringData> {
    check_energy(energy)?;
    let m = &lambda.0;
    let a = m.get(0, 0);
    if !a.re.is_finite() || !a.im.is_finite() || a.norm() < 1e-12 {
        return Err(Error::ZeroTransmission);
    }
    let inv = 1.0 / a.norm();
    if !inv.is_finite() || inv < 1e-300 {
        return Err(Error::ZeroTransmission);
    }
    let t = ONE / a;
    let r = -m.get(0, 1) * t;
    let l = m.get(1, 0) * t;
    Ok(ScatteringData::from_amplitudes(energy, t, r, l))
}

type PotentialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One continuous piece of a sampled potential.
#[derive(Clone)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    value: PotentialFn,
}

impl std::fmt::Debug for Piece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Piece").field("start", &self.start).field("end", &self.end).finish()
    }
}

impl Piece {
    pub fn new(start: f64, end: f64, value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Piece { start, end, value: Arc::new(value) }
    }

    pub fn constant(start: f64, end: f64, v: f64) -> Self {
        Piece::new(start, end, move |_| v)
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
}

/// Piecewise-continuous potential over `[start, end]`, zero between pieces. Each piece is
/// evaluated on its own closed interval so jumps at piece boundaries are resolved one-sided.
#[derive(Debug, Clone, Default)]
pub struct Profile {
    pieces: Vec<Piece>,
}

impl Profile {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        for p in &pieces {
            if !(p.end > p.start) || !p.start.is_finite() || !p.end.is_finite() {
                return domain(format!("degenerate piece [{}, {}]", p.start, p.end));
            }
        }
        if pieces.windows(2).any(|w| w[1].start < w[0].end - 1e-12) {
            return domain("overlapping potential pieces");
        }
        Ok(Profile { pieces })
    }

    /// `α f(x - center)`, one piece per linear segment so that kinks fall on piece
    /// boundaries; the delta kind has no pointwise profile.
    pub fn site(f: &SingleSitePotential, alpha: f64, center: f64) -> Result<Self> {
        match f {
            SingleSitePotential::Delta => Err(Error::NotPointwise),
            SingleSitePotential::Square => Profile::new(vec![Piece::constant(center - 0.5, center + 0.5, alpha)]),
            SingleSitePotential::Tabulated { samples } => {
                let pieces = samples
                    .windows(2)
                    .map(|w| {
                        let ((x0, v0), (x1, v1)) = (w[0], w[1]);
                        let slope = (v1 - v0) / (x1 - x0);
                        let start = center + x0;
                        Piece::new(start, center + x1, move |x| alpha * (v0 + slope * (x - start)))
                    })
                    .collect();
                Profile::new(pieces)
            }
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn push(&mut self, piece: Piece) -> Result<()> {
        let mut v = std::mem::take(&mut self.pieces);
        v.push(piece);
        *self = Profile::new(v)?;
        Ok(())
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.start, self.pieces.last()?.end))
    }

    /// Profile restricted to `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Profile {
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| {
                let (s, e) = (p.start.max(a), p.end.min(b));
                (e > s).then(|| Piece { start: s, end: e, value: p.value.clone() })
            })
            .collect();
        Profile { pieces }
    }
}

/// Default fixed RK4 step: `min(1e-3, 0.05/√E)`.
pub fn default_step(energy: f64) -> f64 {
    (0.05 / energy.sqrt()).min(1e-3)
}

#[derive(Debug, Clone, Copy)]
pub struct Propagation {
    pub transfer: TransferMatrix,
    /// Set when the effective step exceeds `0.1/√E`.
    pub coarse_step: bool,
    pub steps: usize,
}

#[inline]
fn generator(k: f64, v: f64, x: f64) -> Mat2 {
    // (i/2k) V(x) M(x),  M = [[1, e^{-2ikx}], [-e^{2ikx}, -1]]
    let c = I * (v / (2.0 * k));
    let e = C64::from_polar(1.0, -2.0 * k * x);
    Mat2::new(c, c * e, -c * e.conj(), -c)
}

/// Transfer matrix `Λ` of the profile, integrating `dΛ/dx = (i/2√E) V(x) Λ M(x, E)` from the
/// left end with classical RK4. This is the propagator `U(x0, x1)` in the convention where
/// products of adjacent intervals are ordered left to right.
pub fn propagate_u(profile: &Profile, energy: f64, step: f64) -> Result<Propagation> {
    check_energy(energy)?;
    if !(step > 0.0) {
        return domain("step must be positive");
    }
    let k = energy.sqrt();
    let mut lam = Mat2::IDENTITY;
    let mut coarse = false;
    let mut steps = 0;
    for p in &profile.pieces {
        let len = p.end - p.start;
        let n = (len / step - 1e-9).ceil().max(1.0) as usize;
        let h = len / n as f64;
        if h * k > 0.1 {
            coarse = true;
        }
        for s in 0..n {
            let x = p.start + h * s as f64;
            let xm = x + 0.5 * h;
            let x1 = if s + 1 == n { p.end } else { x + h };
            let g0 = generator(k, p.value(x), x);
            let gm = generator(k, p.value(xm), xm);
            let g1 = generator(k, p.value(x1), x1);
            let k1 = lam * g0;
            let k2 = lam.add(&k1.scale(C64::new(0.5 * h, 0.0))) * gm;
            let k3 = lam.add(&k2.scale(C64::new(0.5 * h, 0.0))) * gm;
            let k4 = lam.add(&k3.scale(C64::new(h, 0.0))) * g1;
            let incr = k1.add(&k2.scale(C64::new(2.0, 0.0))).add(&k3.scale(C64::new(2.0, 0.0))).add(&k4);
            lam = lam.add(&incr.scale(C64::new(h / 6.0, 0.0)));
        }
        steps += n;
    }
    Ok(Propagation { transfer: TransferMatrix(lam), coarse_step: coarse, steps })
}

/// Fundamental matrix `φ` of `-u'' + V u = E u` acting on `(u, u')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    pub entries: Mat2,
    pub x_from: f64,
    pub x_to: f64,
}

impl FundamentalMatrix {
    pub fn max_imag(&self) -> f64 {
        self.entries.0.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// Forward fundamental matrix from `x_from` to `x_to` for a potential whose transfer
/// matrix over `[x_from, x_to]` is `Λ`: `φ(x_to, x_from) = P(x_to) Λ⁻¹ P(x_from)⁻¹`.
pub fn fundamental_matrix(lambda: &TransferMatrix, energy: f64, x_from: f64, x_to: f64) -> Result<FundamentalMatrix> {
    check_energy(energy)?;
    let k = energy.sqrt();
    let entries = p_matrix(k, x_to) * lambda.0.inverse() * p_inverse(k, x_from);
    Ok(FundamentalMatrix { entries, x_from, x_to })
}

/// Scattering data of `α f` centered at the origin.
pub fn single_site(f: &SingleSitePotential, alpha: f64, energy: f64) -> Result<ScatteringData> {
    check_energy(energy)?;
    if alpha == 0.0 {
        return Ok(ScatteringData::free(energy));
    }
    match f {
        SingleSitePotential::Delta => s_matrix_delta(alpha, energy),
        SingleSitePotential::Square => s_matrix_square(alpha, energy),
        SingleSitePotential::Tabulated { .. } => {
            let prof = Profile::site(f, alpha, 0.0)?;
            let prop = propagate_u(&prof, energy, default_step(energy))?;
            scattering_from_transfer(&prop.transfer, energy)
        }
    }
}

/// Spectral shift `ξ_α(E)` of `α f` by continuation of `arg T` down from high energy.
pub fn xi_single(alpha: f64, energy: f64, f: &SingleSitePotential) -> Result<f64> {
    Ok(xi_single_sweep(alpha, f, &[energy])?[0])
}

/// `ξ_α` at many energies with one descending continuation.
pub fn xi_single_sweep(alpha: f64, f: &SingleSitePotential, energies: &[f64]) -> Result<Vec<f64>> {
    for &e in energies {
        check_energy(e)?;
    }
    if alpha == 0.0 {
        return Ok(vec![0.0; energies.len()]);
    }
    if f.is_delta() {
        return Ok(energies.iter().map(|&e| (alpha / (2.0 * e.sqrt())).atan() / PI).collect());
    }
    let strength = alpha.abs() * f.integral();
    let k_max = energies.iter().fold(0.0f64, |m, &e| m.max(e.sqrt()));
    let k_high = k_max.max(20.0).max(8.0 * strength).max(2.0 * (alpha.abs() * f.sup()).sqrt());
    let arg_t = |k: f64| -> Result<f64> { Ok(single_site(f, alpha, k * k)?.delta_phase) };

    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]));

    // branch at k_high from the leading high-energy term arg T ≈ -α∫f / 2k
    let reference = -alpha * f.integral() / (2.0 * k_high);
    let a0 = arg_t(k_high)?;
    let mut phase = a0 + 2.0 * PI * ((reference - a0) / (2.0 * PI)).round();
    let mut k = k_high;
    let mut prev = a0;
    let mut dk = 0.02;
    let mut out = vec![0.0; energies.len()];
    for idx in order {
        let target = energies[idx].sqrt();
        while k > target {
            let trial_k = (k - dk).max(target);
            let a = arg_t(trial_k)?;
            let inc = wrap_angle(a - prev);
            if inc.abs() > PI / 4.0 && dk > 1e-10 {
                dk *= 0.5;
                continue;
            }
            phase += inc;
            prev = a;
            k = trial_k;
            if inc.abs() < PI / 16.0 {
                dk = (dk * 1.5).min(0.05);
            }
        }
        out[idx] = -phase / PI;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn delta_free_case() {
        let s = s_matrix_delta(0.0, 4.0).unwrap();
        assert!(close(s.t, ONE, 1e-15) && s.r.norm() < 1e-15);
    }

    #[test]
    fn delta_example_values() {
        let s = s_matrix_delta(2.0, 1.0).unwrap();
        assert!(close(s.t, C64::new(0.5, -0.5), 1e-15));
        assert!(close(s.r, C64::new(-0.5, -0.5), 1e-15));
        assert!((s.abs_t.powi(2) - 0.5).abs() < 1e-15);
        assert!(s.unitarity_defect() < 1e-15);
    }

    #[test]
    fn energy_domain_errors() {
        assert!(s_matrix_delta(1.0, 0.0).is_err());
        assert!(s_matrix_square(1.0, -1.0).is_err());
        assert!(xi_single(1.0, 1e-9, &SingleSitePotential::Square).is_err());
    }

    #[test]
    fn square_free_case() {
        let s = s_matrix_square(0.0, 1.0).unwrap();
        assert!(close(s.t, ONE, 1e-14) && s.r.norm() < 1e-14);
    }

    fn square_via_ode(alpha: f64, e: f64) -> ScatteringData {
        let prof = Profile::new(vec![Piece::constant(-0.5, 0.5, alpha)]).unwrap();
        let prop = propagate_u(&prof, e, 1e-4).unwrap();
        scattering_from_transfer(&prop.transfer, e).unwrap()
    }

    #[test]
    fn square_matches_propagator() {
        for &(alpha, e) in &[(1.0, 2.0), (-1.0, 2.0), (5.0, 1.3), (3.0, 3.0)] {
            let closed = s_matrix_square(alpha, e).unwrap();
            let ode = square_via_ode(alpha, e);
            assert!(close(closed.t, ode.t, 1e-8), "T mismatch at α={alpha}, E={e}");
            assert!(close(closed.r, ode.r, 1e-8) && close(closed.l, ode.l, 1e-8));
        }
    }

    #[test]
    fn zero_potential_propagates_to_identity() {
        let prof = Profile::new(vec![Piece::constant(-0.5, 0.5, 0.0)]).unwrap();
        let p = propagate_u(&prof, 3.0, default_step(3.0)).unwrap();
        assert!(p.transfer.0.max_abs_diff(&Mat2::IDENTITY) < 1e-15);
    }

    #[test]
    fn propagator_composition() {
        let bump = |x: f64| 1.0 + 0.5 * (3.0 * x).sin();
        let full = Profile::new(vec![Piece::new(-0.5, 0.5, bump)]).unwrap();
        let e = 2.5;
        let h = 1e-3;
        let whole = propagate_u(&full, e, h).unwrap().transfer.0;
        for split in [-0.3, 0.0, 0.21] {
            let left = propagate_u(&full.restrict(-0.5, split), e, h).unwrap().transfer.0;
            let right = propagate_u(&full.restrict(split, 0.5), e, h).unwrap().transfer.0;
            assert!((left * right).max_abs_diff(&whole) < 1e-10);
        }
    }

    #[test]
    fn coarse_step_is_flagged() {
        let prof = Profile::new(vec![Piece::constant(0.0, 1.0, 1.0)]).unwrap();
        assert!(propagate_u(&prof, 100.0, 0.05).unwrap().coarse_step);
        assert!(!propagate_u(&prof, 100.0, default_step(100.0)).unwrap().coarse_step);
    }

    #[test]
    fn transfer_round_trip() {
        let id = scattering_from_transfer(&TransferMatrix::identity(), 2.0).unwrap();
        assert!(close(id.t, ONE, 1e-15) && id.r.norm() == 0.0 && id.l.norm() == 0.0);
        let s = s_matrix_delta(2.0, 1.0).unwrap();
        let back = scattering_from_transfer(&s.transfer(), 1.0).unwrap();
        assert!(close(back.t, s.t, 1e-12) && close(back.r, s.r, 1e-12) && close(back.l, s.l, 1e-12));
    }

    #[test]
    fn zero_transmission_error() {
        let m = TransferMatrix(Mat2::new(C64::new(0.0, 0.0), ONE, -ONE, C64::new(0.0, 0.0)));
        assert_eq!(scattering_from_transfer(&m, 1.0), Err(Error::ZeroTransmission));
    }

    #[test]
    fn fundamental_matrix_free_and_identity() {
        let id = fundamental_matrix(&TransferMatrix::identity(), 2.0, 0.0, 0.0).unwrap();
        assert!(id.entries.max_abs_diff(&Mat2::IDENTITY) < 1e-14);
        let e: f64 = 2.0;
        let k = e.sqrt();
        let phi = fundamental_matrix(&TransferMatrix::identity(), e, 0.3, 1.3).unwrap();
        let exact = Mat2::new(
            C64::new(k.cos(), 0.0),
            C64::new(k.sin() / k, 0.0),
            C64::new(-k * k.sin(), 0.0),
            C64::new(k.cos(), 0.0),
        );
        assert!(phi.entries.max_abs_diff(&exact) < 1e-13);
    }

    #[test]
    fn fundamental_matrix_of_delta_is_real_and_jumps() {
        let s = s_matrix_delta(2.0, 1.0).unwrap();
        let phi = fundamental_matrix(&s.transfer(), 1.0, 0.0, 0.0).unwrap();
        assert!(phi.max_imag() < 1e-10);
        // u' jumps by α u across the point interaction
        let jump = Mat2::new(ONE, C64::new(0.0, 0.0), C64::new(2.0, 0.0), ONE);
        assert!(phi.entries.max_abs_diff(&jump) < 1e-12);
        assert!((phi.entries.det() - ONE).norm() < 1e-12);
    }

    #[test]
    fn xi_delta_example() {
        assert!((xi_single(2.0, 1.0, &SingleSitePotential::Delta).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(xi_single(0.0, 3.0, &SingleSitePotential::Square).unwrap(), 0.0);
    }

    #[test]
    fn reflection_symmetry_of_even_sites() {
        for e in [0.5, 2.0, 17.0] {
            let s = s_matrix_square(2.0, e).unwrap();
            assert!((C64::from_polar(1.0, 2.0 * s.theta_phase) - ONE).norm() < 1e-8);
            assert!(s.parameterization_defect() < 1e-10);
        }
    }
}
