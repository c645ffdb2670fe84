//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use plasmon_cli::experiments::eps_point;
use plasmon_cli::RunConfig;
use plasmon_core::bound_state::{
    check_pole_monotone, find_bound_state, residue_weight, self_energy, steady_population,
};
use plasmon_core::dynamics::{
    extract_rates, markov_solution, solve_volterra, solve_volterra_fn, VolterraScheme,
};
use plasmon_core::kernel::{lorentzian_kernel, memory_kernel, tabulate_kernel};
use plasmon_core::pseudomode::{
    compare_exact_vs_pseudomode, coupling_g, pe_discrepancy, solve_pseudomode, Convention,
    PseudomodeParams,
};
use plasmon_core::quadrature::{integrate_finite, QuadConfig};
use plasmon_core::spectral::{
    lorentzian_fixture_table, spectral_density_exact, SpectralOptions, TableSettings,
};
use plasmon_core::{AmplitudeTrajectory, Complex, MaterialSystem, SpectralTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LONG_T: f64 = 2000.0;
const FINE_DT: f64 = 0.005;
const COARSE_DT: f64 = 0.01;
const HALVING_WINDOW: f64 = 200.0;
const HALVING_TOL: f64 = 1e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn system(delta_z: f64) -> MaterialSystem {
    MaterialSystem::silver_germanium_default().with_delta_z(delta_z)
}

fn table(delta_z: f64) -> SpectralTable {
    TableSettings::default().build(&system(delta_z)).unwrap()
}

fn run(table: &SpectralTable, t_max: f64, dt: f64) -> AmplitudeTrajectory {
    let k = tabulate_kernel(table, t_max, dt).unwrap();
    solve_volterra(&k, 1.2, t_max, dt).unwrap()
}

fn free_dielectric_limit() -> Outcome {
    let sys = system(1.2);
    let opts = SpectralOptions {
        include_reflection: false,
        ..SpectralOptions::default()
    };
    let j = spectral_density_exact(&sys, sys.emitter.omega0, &opts).unwrap();
    let rate = std::f64::consts::TAU * j;
    let expected = sys.dielectric.eps_d.sqrt() * sys.emitter.gamma0;
    let rel = (rate / expected - 1.0).abs();
    outcome(
        rel < 1e-6,
        format!("2piJ(w0) = {rate:.9e}, sqrt(eps_d)*gamma0 = {expected:.9e}, rel {rel:.2e}"),
    )
}

fn spp_cutoff() -> Outcome {
    let wc = system(1.2).spp_cutoff();
    let expected = 9.0 / 30.7f64.sqrt();
    outcome(
        (wc - 1.62433).abs() < 1e-5 && (wc - expected).abs() < 1e-12,
        format!("w_c = {wc:.7} eV"),
    )
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = PseudomodeParams {
            omega_c: rng.gen_range(0.5..3.0),
            gamma_p: rng.gen_range(0.0..0.5),
            g: rng.gen_range(0.01..1.0),
            convention: Convention::KernelMatched,
        };
        let w0 = rng.gen_range(0.5..3.0);
        let (t_max, dt) = (30.0, 1e-3);
        let ex = solve_volterra_fn(p.kernel(), w0, t_max, dt, VolterraScheme::Gregory4).unwrap();
        let pm = solve_pseudomode(&p, w0, t_max, dt).unwrap();
        worst = worst.max(pe_discrepancy(&ex, &pm).0);
    }
    outcome(
        worst < 1e-6,
        format!("10 draws, worst max |dP_e| = {worst:.2e}"),
    )
}

fn resonant_rabi() -> Outcome {
    let (g, w0, dt) = (0.5, 1.2, 1e-3);
    let t_max = 10.0 * std::f64::consts::PI / g;
    let traj = solve_volterra_fn(
        lorentzian_kernel(g * g, w0, 0.0),
        w0,
        t_max,
        dt,
        VolterraScheme::Gregory4,
    )
    .unwrap();
    let worst = (0..traj.len())
        .map(|i| (traj.pe[i] - (g * traj.t(i)).cos().powi(2)).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6,
        format!("g = {g} eV, max |P_e - cos^2(gt)| = {worst:.2e}"),
    )
}

fn bound_state_fixture() -> Outcome {
    let t = lorentzian_fixture_table(2.0, 4.0, 1e-4, 1.0, 3.0).unwrap();
    let r = find_bound_state(&t, 1.0).unwrap();
    let (w, z) = (
        r.varpi_b.unwrap_or(f64::NAN),
        r.z_weight.unwrap_or(f64::NAN),
    );
    outcome(
        r.exists && (w + 0.5616).abs() < 1e-3 && (z - 0.6213).abs() < 1e-3,
        format!("varpi_b = {w:.5} eV, Z = {z:.5}"),
    )
}

struct LongRun {
    table: SpectralTable,
    traj: AmplitudeTrajectory,
    dt: f64,
    halving_gap: f64,
}

/// t = 2000 run at the coarse step if halving the step on the first
/// 200 eV⁻¹ changes P_e by less than the tolerance, else at the fine step.
fn long_run(delta_z: f64) -> LongRun {
    let table = table(delta_z);
    let a = run(&table, HALVING_WINDOW, COARSE_DT);
    let b = run(&table, HALVING_WINDOW, FINE_DT);
    let halving_gap = (0..a.len())
        .map(|i| (a.pe[i] - b.pe[2 * i]).abs())
        .fold(0.0, f64::max);
    let dt = if halving_gap < HALVING_TOL {
        COARSE_DT
    } else {
        FINE_DT
    };
    let traj = extract_rates(run(&table, LONG_T, dt));
    LongRun {
        table,
        traj,
        dt,
        halving_gap,
    }
}

fn regime_split(far: &LongRun, near: &LongRun) -> Outcome {
    let far_b = find_bound_state(&far.table, 1.2).unwrap();
    let near_b = find_bound_state(&near.table, 1.2).unwrap();
    let pe_end = far.traj.pe[far.traj.len() - 1];
    let plateau = near.traj.late_mean_pe(0.1);
    let z2 = steady_population(&near_b);
    let rel = (plateau - z2).abs() / z2;
    outcome(
        !far_b.exists && pe_end < 1e-3 && near_b.exists && rel < 0.05,
        format!(
            "2.0 nm: bound={} P_e(2000)={pe_end:.2e}; 1.2 nm: bound={} plateau={plateau:.6} Z^2={z2:.6} rel {rel:.2e} (dt {}/{}, halving gaps {:.1e}/{:.1e})",
            far_b.exists, near_b.exists, far.dt, near.dt, far.halving_gap, near.halving_gap
        ),
    )
}

fn rate_decay(near: &LongRun) -> Outcome {
    let gamma_bar = markov_solution(&near.table, 1.2).unwrap().gamma_bar;
    let late = near.traj.late_mean_abs_gamma(0.1);
    outcome(
        late < 0.05 * gamma_bar,
        format!("late mean |gamma| = {late:.3e} eV, 2piJ(w0) = {gamma_bar:.4} eV"),
    )
}

fn pseudomode_run(delta_z: f64, convention: Convention, dt: f64) -> AmplitudeTrajectory {
    let p = coupling_g(&system(delta_z), convention);
    solve_pseudomode(&p, 1.2, LONG_T, dt).unwrap()
}

fn pseudomode_breakdown(far: &LongRun, near: &LongRun, convention: Convention) -> Outcome {
    let (_, late_far) = pe_discrepancy(&far.traj, &pseudomode_run(2.0, convention, far.dt));
    let (_, late_near) = pe_discrepancy(&near.traj, &pseudomode_run(1.2, convention, near.dt));
    let z2 = steady_population(&find_bound_state(&near.table, 1.2).unwrap());
    outcome(
        late_far < 1e-2 && late_near > z2 / 2.0,
        format!("{convention}: late |dP_e| 2.0 nm = {late_far:.2e}, 1.2 nm = {late_near:.4} (Z^2/2 = {:.4})", z2 / 2.0),
    )
}

/// Returns the outcome and the convention later comparisons use.
fn convention_pinning() -> (Outcome, Convention) {
    let settings = TableSettings::default();
    let maxes: Vec<(Convention, f64)> = Convention::ALL
        .iter()
        .map(|&c| {
            let cmp =
                compare_exact_vs_pseudomode(&system(2.0), &settings, c, 200.0, COARSE_DT).unwrap();
            (c, cmp.max_abs_diff)
        })
        .collect();
    let tracking: Vec<Convention> = maxes.iter().filter(|m| m.1 < 0.05).map(|m| m.0).collect();
    let best = maxes
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|m| m.0)
        .unwrap();
    let listing: Vec<String> = maxes
        .iter()
        .map(|(c, m)| format!("{c} max |dP_e| = {m:.4e}"))
        .collect();
    let detail = match tracking.as_slice() {
        [one] => format!("{}; pinned {one}", listing.join(", ")),
        _ => format!(
            "{}; {} conventions below 0.05, closest is {best}",
            listing.join(", "),
            tracking.len()
        ),
    };
    (
        outcome(tracking.len() == 1, detail),
        tracking.first().copied().unwrap_or(best),
    )
}

fn eps_sweep() -> Outcome {
    let cfg = RunConfig::default();
    let rows: Vec<(f64, Option<(f64, f64)>)> = [5.0, 10.0, 25.0]
        .iter()
        .map(|&e| (e, eps_point(&cfg, e)))
        .collect();
    let pe: Vec<f64> = rows.iter().map(|r| r.1.map_or(f64::NAN, |v| v.1)).collect();
    let pass = pe.iter().all(|&p| p > 0.0) && pe[0] > pe[1] && pe[0] > pe[2];
    let detail = rows
        .iter()
        .map(|(e, r)| match r {
            Some((dz, p)) => format!("eps_d {e}: dz {dz:.3} nm pe_max {p:.4}"),
            None => format!("eps_d {e}: failed"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn check(failures: &mut Vec<String>, name: &str, ok: bool) {
    if !ok {
        failures.push(name.to_string());
    }
}

fn run_cli(dir: &Path, jobs: &str, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_plasmon"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .args(["--jobs", jobs])
        .env("RUST_LOG", "warn")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_outputs(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "resolved_config.txt")
        .collect();
    names.sort();
    !names.is_empty()
        && names
            .iter()
            .all(|n| std::fs::read(a.join(n)).ok() == std::fs::read(b.join(n)).ok())
}

fn property_suite(near: &LongRun) -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = QuadConfig::default();

    // quadrature linearity and subdivision invariance
    for _ in 0..20 {
        let (a, b, k) = (
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.5..8.0),
        );
        let f = |x: f64| Complex::new((k * x).cos(), x * x);
        let g = |x: f64| Complex::new((-x).exp(), (k * x).sin());
        let i = |h: &dyn Fn(f64) -> Complex<f64>, lo: f64, hi: f64| {
            integrate_finite(h, lo, hi, &cfg).unwrap().value
        };
        let lin =
            i(&|x| f(x) * a + g(x) * b, 0.0, 2.0) - (i(&f, 0.0, 2.0) * a + i(&g, 0.0, 2.0) * b);
        let s = rng.gen_range(0.01..1.99);
        let split = i(&f, 0.0, s) + i(&f, s, 2.0) - i(&f, 0.0, 2.0);
        check(
            &mut failures,
            "quadrature",
            lin.norm() < 1e-8 && split.norm() < 1e-8,
        );
    }

    // J >= 0 on tables across the Δz range, and ω³ scaling of the free term
    for dz in [0.8, 1.2, 2.0, 5.0] {
        check(
            &mut failures,
            "J >= 0",
            table(dz).values().iter().all(|&j| j >= 0.0),
        );
    }
    let free = SpectralOptions {
        include_reflection: false,
        ..SpectralOptions::default()
    };
    for _ in 0..10 {
        let (w, k) = (rng.gen_range(0.05..3.0), rng.gen_range(1.1..2.0));
        let sys = system(1.2);
        let ratio = spectral_density_exact(&sys, k * w, &free).unwrap()
            / spectral_density_exact(&sys, w, &free).unwrap();
        check(
            &mut failures,
            "omega^3 scaling",
            (ratio / k.powi(3) - 1.0).abs() < 1e-8,
        );
    }

    // Bochner: Σ c̄_i c_j K(t_i − t_j) ≥ 0
    let kernel_at = |tau: f64| {
        if tau >= 0.0 {
            memory_kernel(&near.table, tau)
        } else {
            memory_kernel(&near.table, -tau).conj()
        }
    };
    let k0 = near.table.total_weight();
    for _ in 0..5 {
        let n = 24;
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..40.0)).collect();
        let c: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut q = Complex::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                q += c[i].conj() * c[j] * kernel_at(times[i] - times[j]);
            }
        }
        check(
            &mut failures,
            "Bochner",
            q.re > -1e-9 * k0 * n as f64 && q.im.abs() < 1e-9 * k0 * (n * n) as f64,
        );
    }

    // trajectory contraction and step-halving convergence
    let alpha_max = near.traj.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    check(&mut failures, "contraction", alpha_max <= 1.0 + 1e-9);
    check(&mut failures, "dt halving", near.halving_gap < HALVING_TOL);

    // y monotone below the band edge; Z from the closed-form derivative
    // agrees with a finite difference of Σ
    check(
        &mut failures,
        "y monotone",
        check_pole_monotone(&near.table, 1.2, -10.0, 200).is_ok(),
    );
    let b = find_bound_state(&near.table, 1.2).unwrap();
    if let Some(w) = b.varpi_b {
        let h = 1e-4;
        let d = (self_energy(&near.table, w + h).unwrap()
            - self_energy(&near.table, w - h).unwrap())
            / (2.0 * h);
        let z_fd = 1.0 / (1.0 + d);
        let z = residue_weight(&near.table, w).unwrap();
        check(
            &mut failures,
            "Z derivative",
            (z - z_fd).abs() < 1e-6 && (z - b.z_weight.unwrap()).abs() < 1e-12,
        );
    } else {
        check(&mut failures, "Z derivative", false);
    }

    // outputs do not depend on the worker count
    let tmp = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("bound-state", vec!["bound-state"]),
        (
            "sweep-z",
            vec![
                "sweep-z",
                "--set",
                "t_max_inv_ev=20",
                "--set",
                "dt_inv_ev=0.01",
            ],
        ),
        ("kernel", vec!["kernel", "--set", "t_max_inv_ev=50"]),
    ] {
        let one = tmp.path().join(format!("{name}-1"));
        let two = tmp.path().join(format!("{name}-3"));
        let ok = run_cli(&one, "1", &args) && run_cli(&two, "3", &args) && same_outputs(&one, &two);
        check(&mut failures, "determinism under --jobs", ok);
    }

    failures.dedup();
    let detail = if failures.is_empty() {
        "quadrature, J >= 0, omega^3, Bochner, contraction, dt halving, y monotone, Z derivative, --jobs determinism".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        println!(
            "criterion {id:>2} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, o));
    };

    record(1, "free-dielectric limit", &mut free_dielectric_limit);
    record(2, "SPP cutoff", &mut spp_cutoff);
    record(3, "solver oracle", &mut solver_oracle);
    record(4, "resonant Rabi", &mut resonant_rabi);
    record(5, "bound-state fixture", &mut bound_state_fixture);
    let far = long_run(2.0);
    let near = long_run(1.2);
    record(6, "regime split", &mut || regime_split(&far, &near));
    record(7, "rate decay with bound state", &mut || rate_decay(&near));
    let (pinning, convention) = convention_pinning();
    record(8, "pseudomode breakdown", &mut || {
        pseudomode_breakdown(&far, &near, convention)
    });
    let mut pinning = Some(pinning);
    record(9, "convention pinning", &mut || pinning.take().unwrap());
    record(10, "eps_d sweep", &mut eps_sweep);
    record(11, "property suite", &mut || property_suite(&near));

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0} s",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
