use nalgebra::DMatrix;
use plasmon_core::kernel::{memory_kernel, tabulate_kernel};
use plasmon_core::spectral::TableSettings;
use plasmon_core::table::SpectralTable;
use plasmon_core::Complex;
use plasmon_core::MaterialSystem;

fn default_table() -> SpectralTable<f64> {
    TableSettings::default()
        .build(&MaterialSystem::silver_germanium_default())
        .unwrap()
}

fn min_toeplitz_eigenvalue(k: &[Complex<f64>]) -> f64 {
    let n = k.len();
    let m = DMatrix::from_fn(n, n, |i, j| if i >= j { k[i - j] } else { k[j - i].conj() });
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

#[test]
fn toeplitz_matrix_is_positive_semidefinite() {
    let table = default_table();
    for dt in [0.01, 0.3, 2.0] {
        let kt = tabulate_kernel(&table, 63.0 * dt, dt).unwrap();
        assert_eq!(kt.len(), 64);
        let lam = min_toeplitz_eigenvalue(kt.values());
        assert!(lam > -1e-6 * kt.k0(), "dt {dt}: min eigenvalue {lam}");
    }
}

#[test]
fn kernel_decays_on_the_plasmon_lifetime() {
    let table = default_table();
    let k0 = memory_kernel(&table, 0.0).re;
    assert!(memory_kernel(&table, 40.0).norm() < 0.2 * k0);
}

#[test]
fn segment_exact_matches_denser_trapezoid_at_tau_50() {
    let table = default_table();
    let tau = 50.0;
    let exact = memory_kernel(&table, tau);
    // Trapezoid on a grid 10x denser than the table, over the interpolant,
    // plus the cubic tail on [0, ω_min].
    let omega = table.omega();
    let mut dense = Complex::new(0.0, 0.0);
    for w in omega.windows(2) {
        let h = (w[1] - w[0]) / 10.0;
        for k in 0..10 {
            let (a, b) = (w[0] + h * k as f64, w[0] + h * (k + 1) as f64);
            let fa = Complex::from_polar(table.value(a), -a * tau);
            let fb = Complex::from_polar(table.value(b), -b * tau);
            dense += (fa + fb) * (h / 2.0);
        }
    }
    let m = table.omega_min();
    let n = 1000;
    let h = m / n as f64;
    for k in 0..n {
        let (a, b) = (h * k as f64, h * (k + 1) as f64);
        dense += (Complex::from_polar(table.value(a), -a * tau)
            + Complex::from_polar(table.value(b), -b * tau))
            * (h / 2.0);
    }
    let rel = (exact - dense).norm() / exact.norm();
    assert!(rel < 1e-4, "relative difference {rel}");
}

#[test]
fn hermitian_extension_is_consistent() {
    // K(−τ) = conj K(τ): the transform of a real J at −τ.
    let table = default_table();
    let tau = 3.7;
    let direct: Complex<f64> = table
        .segments()
        .map(|s| {
            let mid = 0.5 * (s.lo + s.hi);
            Complex::from_polar(table.value(mid) * s.width(), mid * tau)
        })
        .sum();
    let k = memory_kernel(&table, tau).conj();
    assert!((direct - k).norm() < 2e-3 * k.norm(), "{direct} vs {k}");
}
