//! Single-site version of the Thouless identity: `-log|T(E)|` equals the log-potential of
//! the single-site spectral shift `ξ_α`.

use disorderlab::potential::SingleSitePotential;
use disorderlab::scattering::{single_site, xi_single_sweep};
use disorderlab::thouless::{stieltjes_w, thouless_rhs, SsdTable};
use num_complex::Complex64;

fn table(f: &SingleSitePotential, alpha: f64) -> SsdTable {
    let n = 2000;
    let grid: Vec<f64> = (0..n).map(|i| 1e-6 + 400.0 * (i as f64 / (n - 1) as f64).powi(2)).collect();
    let xi = xi_single_sweep(alpha, f, &grid).unwrap();
    SsdTable::anchored(grid, xi).unwrap()
}

#[test]
fn log_transmission_from_spectral_shift() {
    for f in [SingleSitePotential::Delta, SingleSitePotential::Square] {
        let alpha = 2.0;
        let t = table(&f, alpha);
        for e in [1.0, 3.0, 10.0, 40.0] {
            let expected = -single_site(&f, alpha, e).unwrap().abs_t.ln();
            let rhs = thouless_rhs(&t, e).unwrap();
            assert!((rhs - expected).abs() < 1e-2, "{f:?} E={e}: {rhs} vs {expected}");
        }
    }
}

#[test]
fn quadrature_converges_under_refinement() {
    let f = SingleSitePotential::Delta;
    let coarse = {
        let grid: Vec<f64> = (0..500).map(|i| 1e-6 + 400.0 * (i as f64 / 499.0).powi(2)).collect();
        SsdTable::anchored(grid.clone(), xi_single_sweep(1.0, &f, &grid).unwrap()).unwrap()
    };
    let fine = table(&f, 1.0);
    for e in [2.0, 10.0] {
        let (a, b) = (thouless_rhs(&coarse, e).unwrap(), thouless_rhs(&fine, e).unwrap());
        assert!((a - b).abs() < 4.0 * 1e-2);
    }
}

#[test]
fn single_site_stieltjes_is_log_transmission() {
    // boundary value of W on the real axis carries -π ξ
    let f = SingleSitePotential::Delta;
    let t = table(&f, 2.0);
    for e in [1.0, 5.0] {
        let w = stieltjes_w(&t, Complex64::new(e, 1e-3)).unwrap();
        let xi = (2.0 / (2.0 * e.sqrt())).atan() / std::f64::consts::PI;
        assert!((w.w_big.im + std::f64::consts::PI * xi).abs() < 0.01);
    }
}
