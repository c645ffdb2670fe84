use plasmon_core::dynamics::{
    extract_rates, markov_solution, solve_volterra, solve_volterra_fn, AmplitudeTrajectory,
    VolterraScheme,
};
use plasmon_core::kernel::{lorentzian_kernel, tabulate_kernel};
use plasmon_core::pseudomode::{pe_discrepancy, solve_pseudomode, Convention, PseudomodeParams};
use plasmon_core::spectral::{SpectralOptions, TableSettings};
use plasmon_core::Complex;
use plasmon_core::MaterialSystem;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exponential_kernel_matches_closed_form(
        g in 0.01f64..1.0,
        wc in 0.5f64..3.0,
        gam in 0.0f64..0.5,
        w0 in 0.5f64..3.0,
    ) {
        let p = PseudomodeParams { omega_c: wc, gamma_p: gam, g, convention: Convention::KernelMatched };
        let dt = 1e-3;
        let ex = solve_volterra_fn(p.kernel(), w0, 20.0, dt, VolterraScheme::Gregory4).unwrap();
        let pm = solve_pseudomode(&p, w0, 20.0, dt).unwrap();
        let (max, _) = pe_discrepancy(&ex, &pm);
        prop_assert!(max < 1e-6, "max diff {}", max);
        prop_assert!(ex.pe.iter().all(|p| *p <= 1.0 + 1e-6 && *p >= 0.0));
    }
}

#[test]
fn trapezoid_scheme_is_second_order_on_oracle() {
    let k = lorentzian_kernel(0.25, 1.6, 0.1);
    let run = |dt: f64| solve_volterra_fn(k, 1.2, 20.0, dt, VolterraScheme::Trapezoid).unwrap();
    let p = PseudomodeParams {
        omega_c: 1.6,
        gamma_p: 0.1,
        g: 0.5,
        convention: Convention::KernelMatched,
    };
    let e1 = pe_discrepancy(&run(0.02), &solve_pseudomode(&p, 1.2, 20.0, 0.02).unwrap()).0;
    let e2 = pe_discrepancy(&run(0.01), &solve_pseudomode(&p, 1.2, 20.0, 0.01).unwrap()).0;
    let ratio = e1 / e2;
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
}

/// max_t |P_e(dt) − P_e(dt/2)| on the shared nodes.
fn halving_gap(a: &AmplitudeTrajectory<f64>, b: &AmplitudeTrajectory<f64>) -> f64 {
    (0..a.len())
        .map(|i| (a.pe[i] - b.pe[2 * i]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn table_driven_run_contracts_and_converges() {
    let sys = MaterialSystem::silver_germanium_default();
    let table = TableSettings::default().build(&sys).unwrap();
    let t_max = 150.0;
    let coarse = solve_volterra(
        &tabulate_kernel(&table, t_max, 0.01).unwrap(),
        1.2,
        t_max,
        0.01,
    )
    .unwrap();
    let fine = solve_volterra(
        &tabulate_kernel(&table, t_max, 0.005).unwrap(),
        1.2,
        t_max,
        0.005,
    )
    .unwrap();
    assert!(coarse.pe.iter().all(|p| *p <= 1.0 + 1e-6));
    let gap = halving_gap(&coarse, &fine);
    assert!(gap < 1e-4, "dt-halving gap {gap}");
}

#[test]
fn markov_regime_rate_matches_golden_rule() {
    let sys = MaterialSystem::silver_germanium_default()
        .with_delta_z(10.0)
        .with_gamma0(1e-6);
    let table = TableSettings::default().build(&sys).unwrap();
    let m = markov_solution(&table, 1.2).unwrap();
    let t_max = 400.0;
    let traj = solve_volterra(
        &tabulate_kernel(&table, t_max, 0.01).unwrap(),
        1.2,
        t_max,
        0.01,
    )
    .unwrap();
    let traj = extract_rates(traj);
    let late = traj.late_mean_abs_gamma(0.1);
    assert!(
        (late - m.gamma_bar).abs() < 0.2 * m.gamma_bar,
        "{late} vs {}",
        m.gamma_bar
    );
}

#[test]
fn free_dielectric_markov_rate() {
    let sys = MaterialSystem::silver_germanium_default();
    let settings = TableSettings {
        options: SpectralOptions {
            include_reflection: false,
            ..SpectralOptions::default()
        },
        ..TableSettings::default()
    };
    let table = settings.build(&sys).unwrap();
    let m = markov_solution(&table, 1.2).unwrap();
    assert!((m.gamma_bar / (5.0 * sys.emitter.gamma0) - 1.0).abs() < 1e-6);
}

#[test]
fn free_evolution_of_zero_kernel_table() {
    let kt =
        plasmon_core::kernel::KernelTable::from_fn(|_: f64| Complex::new(0.0, 0.0), 10.0, 0.01)
            .unwrap();
    let tr = solve_volterra(&kt, 1.2, 10.0, 0.01).unwrap();
    assert!(tr.pe.iter().all(|p| (p - 1.0).abs() < 1e-12));
}
