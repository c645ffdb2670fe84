//! Experiment orchestration: one function per subcommand, each writing its
//! CSV (and SVG) files plus the resolved configuration into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use plasmon_core::bound_state::{
    existence_threshold, find_bound_state, spectrum_map, steady_population, SpectrumMap,
};
use plasmon_core::dynamics::{
    extract_rates, markov_solution, solve_volterra_with, AmplitudeTrajectory,
};
use plasmon_core::kernel::tabulate_kernel;
use plasmon_core::materials::MaterialSystem;
use plasmon_core::pseudomode::{compare_exact_vs_pseudomode, write_summary_csv};
use plasmon_core::spectral::TableSettings;
use plasmon_core::table::{fmt_sig, SpectralTable};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::svg::{decimate, line_plot, Series};

pub const CONFIG_ECHO: &str = "resolved_config.txt";
/// Fraction of the run treated as the late-time window.
pub const LATE_FRACTION: f64 = 0.1;
const PLOT_POINTS: usize = 2000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] plasmon_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for a numerical procedure that failed to converge.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(e) if e.is_convergence() => 3,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

fn num<E: Into<plasmon_core::Error>>(e: E) -> CliError {
    CliError::Numerical(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Spectral,
    Kernel,
    Evolve,
    BoundState,
    Spectrum,
    Rates,
    Compare,
    SweepZ,
    SweepEps,
}

impl Experiment {
    /// Data and plot files written by each experiment (besides the config echo).
    pub fn outputs(&self) -> &'static [&'static str] {
        match self {
            Experiment::Spectral => &["spectral_density.csv", "spectral_density.svg"],
            Experiment::Kernel => &["kernel.csv", "kernel.svg"],
            Experiment::Evolve => &["dynamics.csv", "population.svg"],
            Experiment::BoundState => &["bound_state.csv"],
            Experiment::Spectrum => &["spectrum.csv", "spectrum.svg"],
            Experiment::Rates => &["markov.csv", "rates.svg"],
            Experiment::Compare => &["comparison.csv", "comparison_summary.csv", "comparison.svg"],
            Experiment::SweepZ => &["steady_sweep.csv", "steady_sweep.svg"],
            Experiment::SweepEps => &["eps_sweep.csv", "eps_sweep.svg"],
        }
    }
}

struct OutDir {
    root: PathBuf,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn write_with<F>(&self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.root.join(name);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w)?;
        w.flush().map_err(io)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Runs one experiment with `cfg`, writing into `cfg.out_dir`.
pub fn run(exp: Experiment, cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = OutDir::create(&cfg.out_dir)?;
    out.write_text(CONFIG_ECHO, &cfg.echo())?;
    match exp {
        Experiment::Spectral => run_spectral(cfg, &out),
        Experiment::Kernel => run_kernel(cfg, &out),
        Experiment::Evolve => run_evolution(cfg, &out),
        Experiment::BoundState => run_bound_state(cfg, &out),
        Experiment::Spectrum => run_spectrum(cfg, &out),
        Experiment::Rates => run_rates(cfg, &out),
        Experiment::Compare => run_comparison(cfg, &out),
        Experiment::SweepZ => run_steady_sweep(cfg, &out),
        Experiment::SweepEps => run_eps_sweep(cfg, &out),
    }
}

fn build_table(
    cfg: &RunConfig,
    system: &MaterialSystem<f64>,
) -> Result<SpectralTable<f64>, CliError> {
    cfg.table_settings().build(system).map_err(num)
}

/// Table → kernel → Volterra for `system` on the configured grid.
pub fn exact_dynamics(
    cfg: &RunConfig,
    system: &MaterialSystem<f64>,
) -> Result<(SpectralTable<f64>, AmplitudeTrajectory<f64>), CliError> {
    let table = build_table(cfg, system)?;
    let kernel = tabulate_kernel(&table, cfg.t_max_inv_ev, cfg.dt_inv_ev).map_err(num)?;
    let traj = solve_volterra_with(
        &kernel,
        system.emitter.omega0,
        cfg.t_max_inv_ev,
        cfg.dt_inv_ev,
        cfg.scheme,
    )
    .map_err(num)?;
    Ok((table, traj))
}

fn times(traj: &AmplitudeTrajectory<f64>) -> Vec<f64> {
    (0..traj.len()).map(|i| traj.t(i)).collect()
}

fn run_spectral(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let table = build_table(cfg, &cfg.system)?;
    out.write_with("spectral_density.csv", |w| {
        table
            .write_csv(w)
            .map_err(|e| num(plasmon_core::spectral::SpectralError::from(e)))
    })?;
    let svg = line_plot(
        "Spectral density",
        "omega (eV)",
        "J (eV)",
        &[Series {
            label: "J",
            x: table.omega(),
            y: table.values(),
        }],
    );
    out.write_text("spectral_density.svg", &svg)?;
    info!(
        "tabulated J on {} nodes, total weight {:.6} eV^2",
        table.len(),
        table.total_weight()
    );
    Ok(())
}

fn run_kernel(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let table = build_table(cfg, &cfg.system)?;
    let kernel = tabulate_kernel(&table, cfg.t_max_inv_ev, cfg.dt_inv_ev).map_err(num)?;
    out.write_with("kernel.csv", |w| kernel.write_csv(w).map_err(num))?;
    let tau: Vec<f64> = (0..kernel.len()).map(|k| kernel.tau(k)).collect();
    let re: Vec<f64> = kernel.values().iter().map(|v| v.re).collect();
    let im: Vec<f64> = kernel.values().iter().map(|v| v.im).collect();
    let (x, re) = decimate(&tau, &re, PLOT_POINTS);
    let (_, im) = decimate(&tau, &im, PLOT_POINTS);
    let svg = line_plot(
        "Memory kernel",
        "tau (1/eV)",
        "K (eV^2)",
        &[
            Series {
                label: "Re K",
                x: &x,
                y: &re,
            },
            Series {
                label: "Im K",
                x: &x,
                y: &im,
            },
        ],
    );
    out.write_text("kernel.svg", &svg)
}

fn run_evolution(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let (table, traj) = exact_dynamics(cfg, &cfg.system)?;
    out.write_with("dynamics.csv", |w| traj.write_csv(w).map_err(num))?;
    let (x, y) = decimate(&times(&traj), &traj.pe, PLOT_POINTS);
    let svg = line_plot(
        "Excited-state population",
        "t (1/eV)",
        "P_e",
        &[Series {
            label: "P_e",
            x: &x,
            y: &y,
        }],
    );
    out.write_text("population.svg", &svg)?;
    let bound = find_bound_state(&table, cfg.system.emitter.omega0).map_err(num)?;
    info!(
        "final P_e = {:.6e}, late mean = {:.6e}, Z^2 = {:.6e} (bound state: {})",
        traj.pe[traj.len() - 1],
        traj.late_mean_pe(LATE_FRACTION),
        steady_population(&bound),
        bound.exists
    );
    Ok(())
}

fn log_thresholds(cfg: &RunConfig, map: &SpectrumMap<f64>, settings: &TableSettings<f64>) {
    for w in map.rows.windows(2) {
        if w[0].result.exists != w[1].result.exists {
            match existence_threshold(&cfg.system, w[0].delta_z, w[1].delta_z, settings) {
                Ok(dz) => info!("bound state threshold at delta_z = {dz:.6} nm"),
                Err(e) => warn!("threshold search failed: {e}"),
            }
        }
    }
}

fn run_bound_state(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let settings = cfg.table_settings();
    let map = spectrum_map(&cfg.system, &cfg.delta_z_grid_nm, &settings).map_err(num)?;
    out.write_with("bound_state.csv", |w| map.write_csv(w).map_err(num))?;
    log_thresholds(cfg, &map, &settings);
    Ok(())
}

fn run_spectrum(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let settings = cfg.table_settings();
    let map = spectrum_map(&cfg.system, &cfg.delta_z_grid_nm, &settings).map_err(num)?;
    out.write_with("spectrum.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["delta_z_nm", "bound_energy_ev", "band_edge_ev"])
            .map_err(csv_io)?;
        for row in &map.rows {
            wtr.write_record([
                fmt_sig(row.delta_z),
                row.bound_energy().map(fmt_sig).unwrap_or_default(),
                fmt_sig(row.band_edge()),
            ])
            .map_err(csv_io)?;
        }
        wtr.flush().map_err(|e| csv_io(e.into()))
    })?;
    let dz: Vec<f64> = map.rows.iter().map(|r| r.delta_z).collect();
    let energy: Vec<f64> = map
        .rows
        .iter()
        .map(|r| r.bound_energy().unwrap_or(f64::NAN))
        .collect();
    let edge = vec![0.0; dz.len()];
    let svg = line_plot(
        "Energy spectrum",
        "delta z (nm)",
        "energy (eV)",
        &[
            Series {
                label: "bound state",
                x: &dz,
                y: &energy,
            },
            Series {
                label: "band edge",
                x: &dz,
                y: &edge,
            },
        ],
    );
    out.write_text("spectrum.svg", &svg)
}

fn run_rates(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let (table, traj) = exact_dynamics(cfg, &cfg.system)?;
    let traj = extract_rates(traj);
    let markov = markov_solution(&table, cfg.system.emitter.omega0).map_err(num)?;
    let late = traj.late_mean_abs_gamma(LATE_FRACTION);
    out.write_with("markov.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["gamma_bar_ev", "omega_bar_ev", "late_mean_abs_gamma_ev"])
            .map_err(csv_io)?;
        wtr.write_record([
            fmt_sig(markov.gamma_bar),
            fmt_sig(markov.omega_bar),
            fmt_sig(late),
        ])
        .map_err(csv_io)?;
        wtr.flush().map_err(|e| csv_io(e.into()))
    })?;
    let t = times(&traj);
    let (x, g) = decimate(&t, &traj.gamma_t, PLOT_POINTS);
    let bar = vec![markov.gamma_bar; x.len()];
    let svg = line_plot(
        "Decay rate",
        "t (1/eV)",
        "gamma (eV)",
        &[
            Series {
                label: "gamma(t)",
                x: &x,
                y: &g,
            },
            Series {
                label: "Markov",
                x: &x,
                y: &bar,
            },
        ],
    );
    out.write_text("rates.svg", &svg)?;
    info!(
        "Markov rate {:.6e} eV, late mean |gamma(t)| = {:.6e} eV",
        markov.gamma_bar, late
    );
    Ok(())
}

fn run_comparison(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let cmp = compare_exact_vs_pseudomode(
        &cfg.system,
        &cfg.table_settings(),
        cfg.convention,
        cfg.t_max_inv_ev,
        cfg.dt_inv_ev,
    )
    .map_err(CliError::Numerical)?;
    out.write_with("comparison.csv", |w| cmp.write_csv(w).map_err(num))?;
    out.write_with("comparison_summary.csv", |w| {
        write_summary_csv(&[&cmp], w).map_err(num)
    })?;
    let t = times(&cmp.exact);
    let (x, a) = decimate(&t, &cmp.exact.pe, PLOT_POINTS);
    let (_, b) = decimate(&t, &cmp.pseudomode.pe, PLOT_POINTS);
    let svg = line_plot(
        "Exact vs pseudomode",
        "t (1/eV)",
        "P_e",
        &[
            Series {
                label: "exact",
                x: &x,
                y: &a,
            },
            Series {
                label: "pseudomode",
                x: &x,
                y: &b,
            },
        ],
    );
    out.write_text("comparison.svg", &svg)?;
    info!(
        "max |dP_e| = {:.4e}, late |dP_e| = {:.4e}, bound state: {}",
        cmp.max_abs_diff, cmp.late_diff, cmp.bound_state
    );
    Ok(())
}

/// Long-time population from dynamics and from the residue at one Δz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyPoint {
    pub delta_z: f64,
    pub pe_infinity: f64,
    pub z_squared: f64,
    pub exists: bool,
}

pub fn steady_point(cfg: &RunConfig, delta_z: f64) -> Result<SteadyPoint, CliError> {
    let system = cfg.system.with_delta_z(delta_z);
    let (table, traj) = exact_dynamics(cfg, &system)?;
    let bound = find_bound_state(&table, system.emitter.omega0).map_err(num)?;
    Ok(SteadyPoint {
        delta_z,
        pe_infinity: traj.late_mean_pe(LATE_FRACTION),
        z_squared: steady_population(&bound),
        exists: bound.exists,
    })
}

fn run_steady_sweep(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let points: Result<Vec<SteadyPoint>, CliError> = cfg
        .delta_z_grid_nm
        .par_iter()
        .map(|&dz| steady_point(cfg, dz))
        .collect();
    let points = points?;
    out.write_with("steady_sweep.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["delta_z_nm", "pe_infinity_numeric", "z_squared", "exists"])
            .map_err(csv_io)?;
        for p in &points {
            wtr.write_record([
                fmt_sig(p.delta_z),
                fmt_sig(p.pe_infinity),
                fmt_sig(p.z_squared),
                p.exists.to_string(),
            ])
            .map_err(csv_io)?;
        }
        wtr.flush().map_err(|e| csv_io(e.into()))
    })?;
    for p in &points {
        if p.exists {
            info!(
                "delta_z = {} nm: relative gap |P_inf - Z^2|/Z^2 = {:.3e}",
                p.delta_z,
                (p.pe_infinity - p.z_squared).abs() / p.z_squared
            );
        } else {
            info!(
                "delta_z = {} nm: no bound state, P_inf = {:.3e}",
                p.delta_z, p.pe_infinity
            );
        }
    }
    let dz: Vec<f64> = points.iter().map(|p| p.delta_z).collect();
    let pe: Vec<f64> = points.iter().map(|p| p.pe_infinity).collect();
    let z2: Vec<f64> = points.iter().map(|p| p.z_squared).collect();
    let svg = line_plot(
        "Long-time population",
        "delta z (nm)",
        "P_e",
        &[
            Series {
                label: "dynamics",
                x: &dz,
                y: &pe,
            },
            Series {
                label: "Z^2",
                x: &dz,
                y: &z2,
            },
        ],
    );
    out.write_text("steady_sweep.svg", &svg)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptimizeError {
    #[error("degenerate bracket [{lo}, {hi}] nm")]
    Degenerate { lo: f64, hi: f64 },
    #[error("no bound state anywhere on the Δz grid")]
    NoTrapping,
    #[error(transparent)]
    Numerical(#[from] plasmon_core::Error),
}

/// Δz in [lo, hi] maximizing Z², by a uniform grid followed by
/// golden-section refinement on the cell around the best grid point.
pub fn optimize_trapping(
    system: &MaterialSystem<f64>,
    settings: &TableSettings<f64>,
    lo: f64,
    hi: f64,
    grid_points: usize,
    tol: f64,
) -> Result<(f64, f64), OptimizeError> {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) || grid_points < 3 {
        return Err(OptimizeError::Degenerate { lo, hi });
    }
    let z2 = |dz: f64| -> Result<f64, OptimizeError> {
        let sys = system.with_delta_z(dz);
        let table = settings.build(&sys).map_err(plasmon_core::Error::from)?;
        let r = find_bound_state(&table, sys.emitter.omega0).map_err(plasmon_core::Error::from)?;
        Ok(steady_population(&r))
    };
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| lo + (hi - lo) * k as f64 / (grid_points - 1) as f64)
        .collect();
    let values: Result<Vec<f64>, OptimizeError> = grid.iter().map(|&d| z2(d)).collect();
    let values = values?;
    let (best, &best_val) =
        values.iter().enumerate().fold(
            (0, &values[0]),
            |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc },
        );
    if best_val <= 0.0 {
        return Err(OptimizeError::NoTrapping);
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid_points - 1)];
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (z2(c)?, z2(d)?);
    let mut top = (grid[best], best_val);
    while b - a > tol {
        if fc >= fd {
            if fc > top.1 {
                top = (c, fc);
            }
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = z2(c)?;
        } else {
            if fd > top.1 {
                top = (d, fd);
            }
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = z2(d)?;
        }
    }
    for (x, f) in [(c, fc), (d, fd)] {
        if f > top.1 {
            top = (x, f);
        }
    }
    Ok(top)
}

/// One row of the ε_d sweep; `None` marks a failed optimization.
pub fn eps_point(cfg: &RunConfig, eps_d: f64) -> Option<(f64, f64)> {
    let system = cfg.system.with_eps_d(eps_d);
    match optimize_trapping(
        &system,
        &cfg.table_settings(),
        cfg.opt_delta_z_min_nm,
        cfg.opt_delta_z_max_nm,
        cfg.opt_grid_points,
        cfg.opt_tolerance_nm,
    ) {
        Ok(best) => Some(best),
        Err(e) => {
            warn!("eps_d = {eps_d}: {e}");
            None
        }
    }
}

fn run_eps_sweep(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let rows: Vec<(f64, Option<(f64, f64)>)> = cfg
        .eps_d_grid
        .par_iter()
        .map(|&eps| (eps, eps_point(cfg, eps)))
        .collect();
    if cfg.confirm_runs {
        let checks: Vec<(f64, Result<SteadyPoint, CliError>)> = rows
            .par_iter()
            .filter_map(|(eps, r)| r.map(|(dz, _)| (*eps, dz)))
            .map(|(eps, dz)| {
                let mut c = cfg.clone();
                c.system = c.system.with_eps_d(eps);
                (eps, steady_point(&c, dz))
            })
            .collect();
        for (eps, res) in checks {
            match res {
                Ok(p) => info!(
                    "eps_d = {eps}: confirmation at delta_z = {:.4} nm gives P_inf = {:.5}, Z^2 = {:.5}",
                    p.delta_z, p.pe_infinity, p.z_squared
                ),
                Err(e) => warn!("eps_d = {eps}: confirmation run failed: {e}"),
            }
        }
    }
    out.write_with("eps_sweep.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["eps_d", "delta_z_opt_nm", "pe_max"])
            .map_err(csv_io)?;
        for (eps, r) in &rows {
            let (dz, pe) = match r {
                Some((dz, pe)) => (fmt_sig(*dz), fmt_sig(*pe)),
                None => (String::new(), String::new()),
            };
            wtr.write_record([fmt_sig(*eps), dz, pe]).map_err(csv_io)?;
        }
        wtr.flush().map_err(|e| csv_io(e.into()))
    })?;
    let eps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pe: Vec<f64> = rows.iter().map(|r| r.1.map_or(f64::NAN, |v| v.1)).collect();
    let svg = line_plot(
        "Maximal trapped population",
        "eps_d",
        "max Z^2",
        &[Series {
            label: "pe_max",
            x: &eps,
            y: &pe,
        }],
    );
    out.write_text("eps_sweep.svg", &svg)
}
