//! Minimal 2×2 complex matrix arithmetic for transfer-matrix products.

use std::ops::{Mul, MulAssign};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2([[a, ZERO], [ZERO, d]])
    }

    /// `diag(e^{-iφ}, e^{iφ})`, the free phase rotation `U_E^{s}` with `φ = √E·s`.
    pub fn phase(phi: f64) -> Self {
        Self::diag(C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi))
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[r][c]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn add(&self, o: &Mat2) -> Self {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        self.add(&o.scale(-ONE))
    }

    /// Inverse; panics never, returns non-finite entries for singular input.
    pub fn inverse(&self) -> Self {
        let m = &self.0;
        let d = self.det();
        Mat2([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
    }

    pub fn conj_transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        let f2 = self.frobenius_sq();
        let d2 = self.det().norm_sqr();
        let disc = (f2 * f2 - 4.0 * d2).max(0.0);
        ((f2 + disc.sqrt()) / 2.0).sqrt()
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        self.sub(o).0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Residual from the `[[a, b], [b*, a*]]` pattern.
    pub fn su11_defect(&self) -> f64 {
        let m = &self.0;
        (m[1][1] - m[0][0].conj()).norm().max((m[1][0] - m[0][1].conj()).norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl MulAssign for Mat2 {
    fn mul_assign(&mut self, o: Mat2) {
        *self = *self * o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_diagonal() {
        let m = Mat2::diag(C64::new(3.0, 0.0), C64::new(0.0, -0.5));
        assert!((m.op_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_round_trip() {
        let m = Mat2::new(
            C64::new(1.0, 2.0),
            C64::new(0.3, -1.0),
            C64::new(0.5, 0.5),
            C64::new(2.0, 0.0),
        );
        assert!((m * m.inverse()).max_abs_diff(&Mat2::IDENTITY) < 1e-14);
    }

    #[test]
    fn phase_is_unitary() {
        let u = Mat2::phase(0.7);
        assert!((u * u.conj_transpose()).max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!((u.op_norm() - 1.0).abs() < 1e-15);
    }
}
