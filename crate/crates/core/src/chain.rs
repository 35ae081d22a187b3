//! Tilted per-cell transfer matrices, their renormalized ordered products, pair
//! composition, and a whole-chain propagation oracle.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::linalg::{Mat2, C64, ONE};
use crate::potential::{CellLayout, SingleSitePotential};
use crate::scattering::{
    check_energy, default_step, propagate_u, slab_transfer, single_site, Profile, ScatteringData,
    TransferMatrix,
};

/// Principal-branch increments at or above this fraction of π are refused.
pub const HAZARD_FRACTION: f64 = 0.95;

/// `Λ̃ = D(√E g_l/2) Λ D(√E g_r/2)` where `Λ` is the site transfer matrix at the
/// origin, `D(φ) = diag(e^{-iφ}, e^{iφ})` and `g_l`, `g_r` are the gaps to the neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedTransfer {
    pub entries: Mat2,
    pub core: Mat2,
    pub left_phase: f64,
    pub right_phase: f64,
    /// Site center in chain coordinates.
    pub position: f64,
    pub sqrt_energy: f64,
}

impl TiltedTransfer {
    pub fn from_core(core: Mat2, sqrt_energy: f64, gap_left: f64, gap_right: f64, position: f64) -> Self {
        let left_phase = 0.5 * sqrt_energy * gap_left;
        let right_phase = 0.5 * sqrt_energy * gap_right;
        TiltedTransfer {
            entries: Mat2::phase(left_phase) * core * Mat2::phase(right_phase),
            core,
            left_phase,
            right_phase,
            position,
            sqrt_energy,
        }
    }

    pub fn det(&self) -> C64 {
        self.entries.det()
    }

    pub fn op_norm(&self) -> f64 {
        self.entries.op_norm()
    }

    /// Deviation from the `[[a, b], [b*, a*]]` form.
    pub fn structure_defect(&self) -> f64 {
        let m = &self.entries;
        (m.get(0, 0).conj() - m.get(1, 1)).norm().max((m.get(0, 1).conj() - m.get(1, 0)).norm())
    }

    /// Cell length `(g_l + g_r)/2`.
    pub fn cell_length(&self) -> f64 {
        (self.left_phase + self.right_phase) / self.sqrt_energy
    }
}

/// Tilted matrix of a unit-spaced cell.
pub fn tilted_transfer(s: &ScatteringData) -> TiltedTransfer {
    TiltedTransfer::from_core(s.transfer().0, s.sqrt_energy, 1.0, 1.0, 0.0)
}

/// Tilted matrix of the cell at `y_cur` with neighbors at `y_prev` and `y_next`.
pub fn tilted_transfer_general(s: &ScatteringData, y_prev: f64, y_cur: f64, y_next: f64) -> Result<TiltedTransfer> {
    if !(y_prev < y_cur && y_cur < y_next) {
        return domain(format!("positions must increase: {y_prev}, {y_cur}, {y_next}"));
    }
    Ok(TiltedTransfer::from_core(s.transfer().0, s.sqrt_energy, y_cur - y_prev, y_next - y_cur, y_cur))
}

/// Tilted matrix of site `j` of an `n`-site chain with the given layout.
pub fn tilted_for_layout(s: &ScatteringData, layout: &CellLayout, j: usize, n: usize) -> TiltedTransfer {
    TiltedTransfer::from_core(
        s.transfer().0,
        s.sqrt_energy,
        layout.gap_left(j, n),
        layout.gap_right(j, n),
        layout.position(j),
    )
}

/// One renormalized running product with the unwrapped arguments of its diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Track {
    unit: Mat2,
    log_norm: f64,
    arg11: f64,
    arg22: f64,
}

impl Track {
    fn new() -> Self {
        // Frobenius norm of the identity is √2
        let s = std::f64::consts::SQRT_2;
        Track { unit: Mat2::IDENTITY.scale(C64::new(1.0 / s, 0.0)), log_norm: s.ln(), arg11: 0.0, arg22: 0.0 }
    }

    /// Right-multiply by `D(a) Π pieces D(b)`. Diagonal phases are booked exactly; the
    /// pieces advance the arguments by principal-branch increments.
    fn absorb(&self, a: f64, pieces: &[Mat2], b: f64, site: usize) -> Result<Track> {
        let mut p = self.unit * Mat2::phase(a);
        let mut arg11 = self.arg11 - a;
        let mut arg22 = self.arg22 + a;
        for q in pieces {
            let next = p * *q;
            let i11 = (next.get(0, 0) / p.get(0, 0)).arg();
            let i22 = (next.get(1, 1) / p.get(1, 1)).arg();
            let worst = if i11.abs() >= i22.abs() { i11 } else { i22 };
            if !(worst.abs() < HAZARD_FRACTION * PI) {
                return Err(Error::UnwrapHazard { site, increment: worst });
            }
            arg11 += i11;
            arg22 += i22;
            p = next;
        }
        p *= Mat2::phase(b);
        arg11 -= b;
        arg22 += b;
        let nrm = p.frobenius();
        if !(nrm.is_finite() && nrm > 0.0) {
            return domain(format!("non-finite product at site {site}"));
        }
        Ok(Track { unit: p.scale(C64::new(1.0 / nrm, 0.0)), log_norm: self.log_norm + nrm.ln(), arg11, arg22 })
    }
}

/// Renormalized ordered product `Π Λ̃_j` (left to right), together with an independent
/// product of the untranslated-frame matrices `Λ_j` whose (1,1) entry is `1/T` of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainProductState {
    tilted: Track,
    plain: Track,
    pub site_count: usize,
    /// Accumulated cell length.
    pub length: f64,
}

impl Default for ChainProductState {
    fn default() -> Self {
        Self::new()
    }
}

impl ChainProductState {
    pub fn new() -> Self {
        ChainProductState { tilted: Track::new(), plain: Track::new(), site_count: 0, length: 0.0 }
    }

    pub fn unit_matrix(&self) -> &Mat2 {
        &self.tilted.unit
    }

    pub fn log_norm(&self) -> f64 {
        self.tilted.log_norm
    }

    /// Unwrapped argument of `(e₊, Π Λ̃ e₊)`.
    pub fn arg_plus(&self) -> f64 {
        self.tilted.arg11
    }

    /// Unwrapped argument of `(e₋, Π Λ̃ e₋)`.
    pub fn arg_minus(&self) -> f64 {
        self.tilted.arg22
    }

    /// Unwrapped argument of `1/T` of the chain absorbed so far.
    pub fn arg_inv_t(&self) -> f64 {
        self.plain.arg11
    }

    /// `ln |1/T|` of the chain absorbed so far.
    pub fn log_abs_inv_t(&self) -> f64 {
        self.plain.log_norm + self.plain.unit.get(0, 0).norm().ln()
    }

    /// `ln ‖Π Λ̃‖` (operator norm).
    pub fn log_op_norm(&self) -> f64 {
        self.tilted.log_norm + self.tilted.unit.op_norm().ln()
    }

    /// Unrenormalized tilted product; overflows for long chains.
    pub fn product(&self) -> Mat2 {
        self.tilted.unit.scale(C64::new(self.tilted.log_norm.exp(), 0.0))
    }

    /// Unrenormalized product of the `Λ_j`; overflows for long chains.
    pub fn plain_product(&self) -> Mat2 {
        self.plain.unit.scale(C64::new(self.plain.log_norm.exp(), 0.0))
    }

    pub fn absorb(&mut self, m: &TiltedTransfer) -> Result<()> {
        self.absorb_refined(m, &[m.core])
    }

    /// Absorb `m` with its core given as an ordered factorization into `pieces`, which
    /// keeps each principal-branch phase increment small.
    pub fn absorb_refined(&mut self, m: &TiltedTransfer, pieces: &[Mat2]) -> Result<()> {
        let site = self.site_count;
        let tilted = self.tilted.absorb(m.left_phase, pieces, m.right_phase, site)?;
        let ky = m.sqrt_energy * m.position;
        let plain = self.plain.absorb(ky, pieces, -ky, site)?;
        self.tilted = tilted;
        self.plain = plain;
        self.site_count += 1;
        self.length += m.cell_length();
        Ok(())
    }
}

/// Ordered factorization of the site transfer matrix `Λ_α(E)` at the origin into `q` pieces.
pub fn site_core_pieces(f: &SingleSitePotential, alpha: f64, energy: f64, q: usize) -> Result<Vec<Mat2>> {
    check_energy(energy)?;
    let q = q.max(1);
    let k = energy.sqrt();
    match f {
        SingleSitePotential::Delta => {
            let m = crate::scattering::s_matrix_delta(alpha / q as f64, energy)?.transfer().0;
            Ok(vec![m; q])
        }
        SingleSitePotential::Square => Ok((0..q)
            .map(|i| {
                let a = -0.5 + i as f64 / q as f64;
                let b = -0.5 + (i + 1) as f64 / q as f64;
                slab_transfer(alpha, k, a, b)
            })
            .collect()),
        SingleSitePotential::Tabulated { .. } => {
            let prof = Profile::site(f, alpha, 0.0)?;
            let (a, b) = f.domain();
            let w = (b - a) / q as f64;
            (0..q)
                .map(|i| {
                    let sub = prof.restrict(a + w * i as f64, a + w * (i + 1) as f64);
                    Ok(propagate_u(&sub, energy, default_step(energy))?.transfer.0)
                })
                .collect()
        }
    }
}

/// Transmission of two sites at separation `d` and their cluster defect `ξ₁₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairComposition {
    pub t_combined: C64,
    pub xi12: f64,
    pub separation: f64,
}

/// Compose site 1 at the origin with site 2 at `d`.
pub fn compose_pair(s1: &ScatteringData, s2: &ScatteringData, d: f64) -> Result<PairComposition> {
    if s1.energy != s2.energy {
        return domain(format!("energy mismatch: {} vs {}", s1.energy, s2.energy));
    }
    let k = s1.sqrt_energy;
    let z = s1.r * s2.l * C64::from_polar(1.0, 2.0 * k * d);
    let denom = ONE - z;
    let t_combined = s1.t * s2.t / denom;
    // ξ = ξ₁ + ξ₂ + ξ₁₂ with ξ = -arg T/π; the ratio (1-z*)/(1-z) has argument in (-π, π)
    let ratio = (ONE - z.conj()) / denom;
    let xi12 = -(ratio.ln() / C64::new(0.0, 2.0 * PI)).re;
    Ok(PairComposition { t_combined, xi12, separation: d })
}

/// Transfer matrix of the whole chain `Σ α_j f(x - y_j)` by a single propagation.
pub fn chain_transfer_direct(
    f: &SingleSitePotential,
    alphas: &[f64],
    layout: &CellLayout,
    energy: f64,
    step: f64,
) -> Result<TransferMatrix> {
    if f.is_delta() {
        return Err(Error::NotPointwise);
    }
    check_energy(energy)?;
    layout.validate()?;
    layout.check_supports(f, alphas.len())?;
    let mut pieces = Vec::new();
    for (j, &alpha) in alphas.iter().enumerate() {
        pieces.extend_from_slice(Profile::site(f, alpha, layout.position(j))?.pieces());
    }
    if pieces.is_empty() {
        return Ok(TransferMatrix::identity());
    }
    Ok(propagate_u(&Profile::new(pieces)?, energy, step)?.transfer)
}

/// Ordered product `Λ_0 Λ_1 ⋯` of per-site transfer matrices translated to their positions.
pub fn chain_transfer_product(
    f: &SingleSitePotential,
    alphas: &[f64],
    layout: &CellLayout,
    energy: f64,
) -> Result<TransferMatrix> {
    layout.validate()?;
    layout.check_supports(f, alphas.len())?;
    let k = energy.sqrt();
    let mut m = Mat2::IDENTITY;
    for (j, &alpha) in alphas.iter().enumerate() {
        let s = single_site(f, alpha, energy)?;
        m *= s.transfer().translated(k, layout.position(j)).0;
    }
    Ok(TransferMatrix(m))
}

/// `F(a, b, E, B) = 2B²(1-a²) + 2(1-b²) + (Ba-b)²/E + E(Ba+b)²`.
pub fn overlap_f(a: f64, b: f64, energy: f64, big_b: f64) -> f64 {
    2.0 * big_b * big_b * (1.0 - a * a)
        + 2.0 * (1.0 - b * b)
        + (big_b * a - b).powi(2) / energy
        + energy * (big_b * a + b).powi(2)
}

/// Lower bound `4E/(1+E²)` of [`overlap_f`] over `a, b ∈ [-1,1]`, `B ∈ [0,1]`.
pub fn overlap_bound(energy: f64) -> f64 {
    4.0 * energy / (1.0 + energy * energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{s_matrix_delta, s_matrix_square};

    fn tent() -> SingleSitePotential {
        SingleSitePotential::tabulated(vec![(-0.5, 0.0), (0.0, 2.0), (0.5, 0.0)]).unwrap()
    }

    #[test]
    fn free_cell_is_pure_phase() {
        let e: f64 = 3.0;
        let m = tilted_transfer(&ScatteringData::free(e));
        assert!(m.entries.max_abs_diff(&Mat2::phase(e.sqrt())) < 1e-15);
        assert!((m.op_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_tilted_norm() {
        let m = tilted_transfer(&s_matrix_delta(2.0, 1.0).unwrap());
        assert!((m.det() - ONE).norm() < 1e-12);
        assert!(m.structure_defect() < 1e-12);
        let t2: f64 = 0.5;
        let x = (2.0 - t2) / t2;
        let expected = x + (x * x - 1.0).sqrt();
        assert!((m.op_norm().powi(2) - expected).abs() < 1e-10);
        assert!((expected - (3.0 + 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn frobenius_identity() {
        for &(alpha, e) in &[(2.0, 1.0), (0.3, 7.0), (-1.5, 0.4)] {
            let s = s_matrix_delta(alpha, e).unwrap();
            let t2 = s.abs_t * s.abs_t;
            let f2 = s.transfer().0.frobenius_sq();
            assert!((f2 - (4.0 - 2.0 * t2) / t2).abs() < 1e-8);
        }
    }

    #[test]
    fn norm_is_one_only_without_reflection() {
        let reflect = tilted_transfer(&s_matrix_square(1.0, 2.0).unwrap());
        assert!(reflect.op_norm() > 1.0 + 1e-6);
        // square barrier is transparent where √(E-α) = π
        let e = 1.0 + PI * PI;
        let s = s_matrix_square(1.0, e).unwrap();
        assert!(s.r.norm() < 1e-10);
        assert!((tilted_transfer(&s).op_norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn general_layout_reduces_to_unit() {
        let s = s_matrix_delta(1.3, 2.2).unwrap();
        let g = tilted_transfer_general(&s, 4.0, 5.0, 6.0).unwrap();
        assert!(g.entries.max_abs_diff(&tilted_transfer(&s).entries) < 1e-12);
        let free = tilted_transfer_general(&ScatteringData::free(2.0), 0.0, 1.0, 3.5).unwrap();
        assert!(free.entries.get(0, 1).norm() < 1e-15 && free.entries.get(1, 0).norm() < 1e-15);
        assert!(tilted_transfer_general(&s, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn free_cells_accumulate_phase() {
        let e: f64 = 2.0;
        let m = tilted_transfer(&ScatteringData::free(e));
        let mut st = ChainProductState::new();
        for _ in 0..7 {
            st.absorb(&m).unwrap();
        }
        assert!(st.log_op_norm().abs() < 1e-12);
        assert!((st.arg_plus() + 7.0 * e.sqrt()).abs() < 1e-12);
        assert!((st.arg_minus() - 7.0 * e.sqrt()).abs() < 1e-12);
        assert_eq!(st.site_count, 7);
        assert!((st.length - 7.0).abs() < 1e-12);
    }

    #[test]
    fn renormalized_product_matches_direct() {
        let e = 2.0;
        let m = tilted_transfer(&s_matrix_delta(1.0, e).unwrap());
        let mut st = ChainProductState::new();
        let mut direct = Mat2::IDENTITY;
        for _ in 0..30 {
            st.absorb(&m).unwrap();
            direct *= m.entries;
            assert!((st.unit_matrix().frobenius() - 1.0).abs() < 1e-12);
        }
        let rel = st.product().max_abs_diff(&direct) / direct.max_abs();
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn single_site_phase_is_spectral_shift() {
        let s = s_matrix_delta(2.0, 1.0).unwrap();
        let mut st = ChainProductState::new();
        st.absorb(&tilted_transfer(&s)).unwrap();
        assert!((st.arg_inv_t() - 0.25 * PI).abs() < 1e-12);
        assert!((st.log_abs_inv_t() - 2f64.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn tilted_and_plain_phases_agree() {
        let e: f64 = 3.3;
        let k = e.sqrt();
        for layout in [CellLayout::Unit, CellLayout::explicit((0..200).map(|j| 1.3 * j as f64 + 0.2 * (j % 3) as f64).collect()).unwrap()] {
            let mut st = ChainProductState::new();
            for j in 0..200 {
                let alpha = 0.5 + 0.5 * ((j * 7919) % 13) as f64 / 13.0;
                let s = s_matrix_delta(alpha, e).unwrap();
                st.absorb(&tilted_for_layout(&s, &layout, j, 200)).unwrap();
            }
            assert!((st.length - layout.chain_length(200)).abs() < 1e-9);
            assert!((st.arg_plus() + k * st.length - st.arg_inv_t()).abs() < 1e-7);
            assert!((-st.arg_minus() + k * st.length - st.arg_inv_t()).abs() < 1e-7);
        }
    }

    #[test]
    fn plain_track_reads_chain_transmission() {
        let f = SingleSitePotential::Square;
        let alphas = [0.5, 1.0, 0.7, 2.0];
        let e = 2.0;
        let direct = chain_transfer_product(&f, &alphas, &CellLayout::Unit, e).unwrap();
        let mut st = ChainProductState::new();
        for (j, &a) in alphas.iter().enumerate() {
            st.absorb(&tilted_for_layout(&single_site(&f, a, e).unwrap(), &CellLayout::Unit, j, 4)).unwrap();
        }
        assert!(st.plain_product().max_abs_diff(&direct.0) < 1e-10);
        let inv_t = direct.0.get(0, 0);
        assert!((st.log_abs_inv_t() - inv_t.norm().ln()).abs() < 1e-10);
        assert!((crate::scattering::wrap_angle(st.arg_inv_t()) - inv_t.arg()).abs() < 1e-10);
    }

    #[test]
    fn hazard_is_reported_and_state_untouched() {
        let core = Mat2::phase(-0.97 * PI);
        let m = TiltedTransfer::from_core(core, 1.0, 0.0, 0.0, 0.0);
        let mut st = ChainProductState::new();
        let before = st;
        match st.absorb(&m) {
            Err(Error::UnwrapHazard { site: 0, .. }) => {}
            other => panic!("expected hazard, got {other:?}"),
        }
        assert_eq!(st, before);
        let half = Mat2::phase(-0.485 * PI);
        st.absorb_refined(&m, &[half, half]).unwrap();
        assert!((st.arg_plus() - 0.97 * PI).abs() < 1e-12);
    }

    #[test]
    fn core_pieces_multiply_to_core() {
        let e = 1.7;
        for f in [SingleSitePotential::Delta, SingleSitePotential::Square, tent()] {
            let whole = single_site(&f, 1.4, e).unwrap().transfer().0;
            let pieces = site_core_pieces(&f, 1.4, e, 5).unwrap();
            let prod = pieces.iter().fold(Mat2::IDENTITY, |acc, p| acc * *p);
            assert!(prod.max_abs_diff(&whole) < 1e-8, "{f:?} {}", prod.max_abs_diff(&whole));
        }
    }

    #[test]
    fn pair_with_free_site() {
        let s1 = s_matrix_delta(2.0, 1.0).unwrap();
        let p = compose_pair(&s1, &ScatteringData::free(1.0), 1.0).unwrap();
        assert!((p.t_combined - s1.t).norm() < 1e-15);
        assert_eq!(p.xi12, 0.0);
        assert!(compose_pair(&s1, &ScatteringData::free(2.0), 1.0).is_err());
    }

    #[test]
    fn pair_bounds_for_delta_sweep() {
        let s = s_matrix_delta(2.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            let d = 1.0 + 0.1 * i as f64;
            let p = compose_pair(&s, &s, d).unwrap();
            assert!(p.t_combined.norm() >= 0.25);
            worst = worst.max(p.xi12.abs());
        }
        assert!(worst <= 0.5);
    }

    #[test]
    fn pair_matches_two_site_chain() {
        let e: f64 = 1.9;
        let (s1, s2) = (s_matrix_delta(1.2, e).unwrap(), s_matrix_delta(-0.7, e).unwrap());
        let d = 2.4;
        let p = compose_pair(&s1, &s2, d).unwrap();
        let layout = CellLayout::explicit(vec![0.0, d]).unwrap();
        let m = chain_transfer_product(&SingleSitePotential::Delta, &[1.2, -0.7], &layout, e).unwrap();
        let t = ONE / m.0.get(0, 0);
        assert!((t - p.t_combined).norm() < 1e-12);
        // ξ of the pair equals ξ₁ + ξ₂ + ξ₁₂ modulo integers
        let total = -t.arg() / PI;
        let parts = -s1.t.arg() / PI - s2.t.arg() / PI + p.xi12;
        let diff = total - parts;
        assert!((diff - diff.round()).abs() < 1e-12);
    }

    #[test]
    fn direct_propagation_cases() {
        let f = SingleSitePotential::Square;
        let id = chain_transfer_direct(&f, &[], &CellLayout::Unit, 2.0, 1e-3).unwrap();
        assert!(id.0.max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert_eq!(
            chain_transfer_direct(&SingleSitePotential::Delta, &[1.0], &CellLayout::Unit, 2.0, 1e-3),
            Err(Error::NotPointwise)
        );
        let alphas = [0.5, 1.0, 0.7];
        let direct = chain_transfer_direct(&f, &alphas, &CellLayout::Unit, 2.0, 1e-3).unwrap();
        let product = chain_transfer_product(&f, &alphas, &CellLayout::Unit, 2.0).unwrap();
        assert!(direct.0.max_abs_diff(&product.0) < 1e-7);
    }

    #[test]
    fn tilted_product_matches_propagation_with_spacings() {
        let f = tent();
        let e: f64 = 2.6;
        let k = e.sqrt();
        let y = vec![0.0, 1.0, 3.0];
        let layout = CellLayout::explicit(y.clone()).unwrap();
        let alphas = [0.8, 1.5, 0.4];
        let mut tilted = Mat2::IDENTITY;
        for (j, &a) in alphas.iter().enumerate() {
            tilted *= tilted_for_layout(&single_site(&f, a, e).unwrap(), &layout, j, 3).entries;
        }
        // undo the boundary half-gaps and move to the untranslated frame
        let lead = k * (y[0] - layout.gap_left(0, 3) / 2.0);
        let tail = -k * (y[2] + layout.gap_right(2, 3) / 2.0);
        let plain = Mat2::phase(lead) * tilted * Mat2::phase(tail);
        let direct = chain_transfer_direct(&f, &alphas, &layout, e, 1e-3).unwrap();
        assert!(plain.max_abs_diff(&direct.0) < 1e-8);
    }

    #[test]
    fn overlap_bound_examples() {
        assert!((overlap_bound(1.0) - 2.0).abs() < 1e-15);
        assert!(overlap_f(0.0, 0.0, 1.0, 1.0) >= overlap_bound(1.0));
        assert!((overlap_f(1.0, -1.0, 1.0, 1.0) - 4.0).abs() < 1e-15);
    }
}

/// Worst factorization residual over random short chains.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FactorizationReport {
    pub trials: usize,
    pub max_residual: f64,
    pub worst_sites: usize,
    pub worst_energy: f64,
}

/// Compare whole-chain propagation with the ordered factor product on `trials` random
/// chains of 1–10 square or tabulated sites, unit or irregular spacing.
pub fn factorization_suite(seed: u64, trials: usize) -> Result<FactorizationReport> {
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut report = FactorizationReport { trials, max_residual: 0.0, worst_sites: 0, worst_energy: 0.0 };
    for _ in 0..trials {
        let n = 1 + (u() * 10.0) as usize;
        let f = if u() < 0.5 {
            SingleSitePotential::Square
        } else {
            let peak = -0.4 + 0.8 * u();
            SingleSitePotential::tabulated(vec![(-0.5, 0.0), (peak, 1.0 + u()), (0.5, 0.2 * u())])?
        };
        let alphas: Vec<f64> = (0..n).map(|_| -2.0 + 5.0 * u()).collect();
        let layout = if u() < 0.5 {
            CellLayout::Unit
        } else {
            let mut y = 0.0;
            let pos = (0..n)
                .map(|_| {
                    let here = y;
                    y += 1.0 + 1.5 * u();
                    here
                })
                .collect();
            CellLayout::explicit(pos)?
        };
        let energy = 0.5 + 49.5 * u();
        let direct = chain_transfer_direct(&f, &alphas, &layout, energy, default_step(energy))?;
        let product = chain_transfer_product(&f, &alphas, &layout, energy)?;
        let r = direct.0.max_abs_diff(&product.0);
        if r > report.max_residual {
            report.max_residual = r;
            report.worst_sites = n;
            report.worst_energy = energy;
        }
    }
    Ok(report)
}
