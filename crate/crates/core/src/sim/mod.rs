//! Scenario setup, the coupled time loop, timing and file output.

mod cli;
mod config;
mod ledger;
mod output;
mod system;

pub use cli::cli_main;
pub use config::{
    load_config, load_config_file, parse_forcing, parse_variant, ConfigError, Coupling, Flow, Geometry, Material,
    Mesh, Output, SimConfig, Solver, Structure, Time, Uvlm, PLATE_TOML,
};
pub use ledger::TimingLedger;
pub use output::{write_timeseries, write_timing_report, write_wake, TimeSeriesOutput, TimeSeriesRow, TIMESERIES_HEADER};
pub use system::{CoupledStepSystem, StructuralStepSystem};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::coupling::{aero_force_function, build_transfer_map, AeroForceContext, CouplingError, TransferMap};
use crate::linalg::{factorize_sparse, norm2};
use crate::solvers::{estimate_contraction, solve, ForcingSequence, SolverError, SplitSystem, Variant};
use crate::structure::{RibbonModel, StructureError};
use crate::uvlm::{
    convect_wake, flat_plate_nodes, lift_coefficient, shed_wake, FlowConditions, UvlmConfig, UvlmError, Vec3, WakeState,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("time step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("non-finite state after time step {step}: {detail}")]
    NonFiniteState { step: usize, detail: String },
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Uvlm(#[from] UvlmError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 1 for bad input or I/O, 2 for failures of the run itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Io { .. } => 1,
            _ => 2,
        }
    }
}

/// Structural model, transfer map and flow built from a configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: RibbonModel,
    pub map: TransferMap,
    pub flow: FlowConditions,
    pub uvlm: UvlmConfig,
    pub dt: f64,
    pub steps: usize,
    pub gravity: Vec3,
    pub ref_area: f64,
}

impl Scenario {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let model = RibbonModel::new(cfg.ribbon_params()?)?;
        let aero_ref = flat_plate_nodes(cfg.geometry.length, cfg.geometry.c, cfg.mesh.m_a, cfg.mesh.n_a);
        let map = build_transfer_map(model.reference_positions(), &aero_ref, cfg.coupling.gamma_ref)?;
        let flow = FlowConditions::from_speed_alpha(cfg.flow.v_inf, cfg.flow.alpha_deg.to_radians(), cfg.flow.rho_f)?;
        let g = cfg.structure.gravity;
        Ok(Self {
            model,
            map,
            flow,
            uvlm: cfg.uvlm_config(),
            dt: cfg.dt(),
            steps: cfg.steps(),
            gravity: Vec3::new(g[0], g[1], g[2]),
            ref_area: cfg.geometry.length * cfg.geometry.c,
        })
    }

    /// Mean displacement of the two chains at mid-span.
    pub fn midspan_displacement(&self, q: &[f64]) -> Vec3 {
        let m = self.model.params().elements;
        let stations: Vec<usize> = if m % 2 == 0 { vec![m / 2] } else { vec![m / 2, m / 2 + 1] };
        let mut u = Vec3::zeros();
        for st in &stations {
            for chain in 0..2 {
                let n = self.model.node(*st, chain);
                u += Vec3::new(q[3 * n], q[3 * n + 1], q[3 * n + 2]);
            }
        }
        u / (2 * stations.len()) as f64
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub series: TimeSeriesOutput,
    pub ledger: TimingLedger,
    /// Converged `y = [q, s, λ]` after every step.
    pub states: Vec<Vec<f64>>,
    /// Per-step contraction estimates when `output.contraction` is set.
    pub contraction: Vec<f64>,
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult, SimError> {
    let start = Instant::now();
    let newton = cfg.newton_config()?;
    let sc = Scenario::new(cfg)?;
    let wake_dir = match (&cfg.output.dir, cfg.output.wake_dump) {
        (Some(d), true) => {
            fs::create_dir_all(d).map_err(|e| SimError::io(d, e))?;
            Some(d.clone())
        }
        _ => None,
    };
    let model = &sc.model;
    let n = model.dof();
    let mut y = vec![0.0; 2 * n + model.constraint_count()];
    let mut wake = WakeState::new();
    let mut gamma_prev = vec![0.0; sc.uvlm.span_panels * sc.uvlm.chord_panels];
    let lift_dir = sc.flow.lift_direction();
    let mut ledger = TimingLedger::default();
    let mut series = TimeSeriesOutput::default();
    let mut states = Vec::with_capacity(sc.steps);
    let mut contraction = Vec::new();

    for step in 1..=sc.steps {
        let ctx = AeroForceContext {
            wake,
            gamma_prev,
            flow: sc.flow,
            dt: sc.dt,
            uvlm: sc.uvlm,
        };
        let (q_n, s_n) = (y[..n].to_vec(), y[n..2 * n].to_vec());
        let mut sys = CoupledStepSystem {
            model,
            map: &sc.map,
            aero: &ctx,
            q_n: &q_n,
            s_n: &s_n,
            gravity: sc.gravity,
            fd_eps: cfg.coupling.fd_eps,
        };
        let t = Instant::now();
        let solved = solve(&mut sys, &y, &newton);
        ledger.newton_total += t.elapsed();
        let (y_new, report) = solved.map_err(|source| SimError::Solver { step, source })?;
        ledger.newton_eval_uvlm += report.eval_uvlm;
        ledger.newton_eval_structure += report.eval_structure;
        ledger.newton_linear_solver += report.linear_solver;
        ledger.newton_steps += report.newton_steps;
        ledger.refinement_steps += report.refinement_steps;
        if let Some(i) = y_new.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState {
                step,
                detail: format!("component {i} of {} is {}; |F| history {:?}", y_new.len(), y_new[i], report.residual_history),
            });
        }
        y = y_new;

        if cfg.output.contraction {
            let t = Instant::now();
            let mut times = Default::default();
            let jac = sys
                .split_jacobian(&y, &mut times)
                .map_err(|source| SimError::Solver { step, source })?;
            let fact = factorize_sparse(&jac.structural).map_err(|e| SimError::Solver {
                step,
                source: e.into(),
            })?;
            let rho = estimate_contraction(&fact, &jac, 50, cfg.seed.wrapping_add(step as u64))
                .map_err(|source| SimError::Solver { step, source })?;
            contraction.push(rho);
            ledger.eval_uvlm_total += t.elapsed();
        }

        let t = Instant::now();
        let (q, s) = (&y[..n], &y[n..2 * n]);
        let accepted = aero_force_function(&ctx, &sc.map, q, s)?;
        let cl = if sc.flow.dynamic_pressure() > 0.0 {
            lift_coefficient(&accepted.total_force, &sc.flow, sc.ref_area, &lift_dir)?
        } else {
            f64::NAN
        };
        let shed = shed_wake(&accepted.lattice, &ctx.wake);
        wake = convect_wake(&accepted.lattice, &shed, &sc.flow, sc.dt, sc.uvlm.cutoff_delta)?;
        gamma_prev = accepted.lattice.gammas().to_vec();
        ledger.eval_uvlm_total += t.elapsed();

        let t = Instant::now();
        let displacement = sc.midspan_displacement(&y[..n]);
        ledger.eval_structure_total += t.elapsed();
        series.rows.push(TimeSeriesRow {
            time: step as f64 * sc.dt,
            displacement,
            cl,
            res_norm: report.final_residual(),
            newton_steps: report.newton_steps,
            refine_steps: report.refinement_steps,
        });
        states.push(y.clone());
        ledger.time_steps = step;
        if let Some(dir) = &wake_dir {
            write_wake(accepted.lattice.trailing_edge(), &wake, &dir.join(format!("wake_{step}.csv")))?;
        }
    }
    ledger.integration_total = start.elapsed();
    Ok(SimResult {
        series,
        ledger,
        states,
        contraction,
    })
}

/// Writes `timeseries.csv`, `timing.txt` and, if present, `contraction.csv` into `dir`.
pub fn write_run_outputs(result: &SimResult, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    write_timeseries(&result.series, &dir.join("timeseries.csv"))?;
    write_timing_report(&result.ledger, &dir.join("timing.txt"))?;
    if !result.contraction.is_empty() {
        let mut s = String::from("step,rho\n");
        for (i, r) in result.contraction.iter().enumerate() {
            let _ = writeln!(s, "{},{r:.14e}", i + 1);
        }
        let p = dir.join("contraction.csv");
        fs::write(&p, s).map_err(|e| SimError::io(&p, e))?;
    }
    Ok(())
}

/// Largest per-step relative deviation of displacement and lift between two runs.
pub fn trace_deviation(a: &TimeSeriesOutput, b: &TimeSeriesOutput) -> f64 {
    if a.rows.len() != b.rows.len() {
        return f64::INFINITY;
    }
    let rel = |x: f64, y: f64| {
        let d = (x - y).abs();
        if d == 0.0 {
            0.0
        } else {
            d / x.abs().max(y.abs())
        }
    };
    a.rows
        .iter()
        .zip(&b.rows)
        .map(|(r, s)| {
            let du = (r.displacement - s.displacement).norm();
            let scale = r.displacement.norm().max(s.displacement.norm());
            let ru = if du == 0.0 { 0.0 } else { du / scale };
            let rc = if r.cl.is_nan() && s.cl.is_nan() { 0.0 } else { rel(r.cl, s.cl) };
            ru.max(rc)
        })
        .fold(0.0, f64::max)
}

/// Largest per-step relative difference of converged states.
pub fn state_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            let s = norm2(y).max(norm2(x));
            if s == 0.0 {
                norm2(&d)
            } else {
                norm2(&d) / s
            }
        })
        .fold(0.0, f64::max)
}

/// One solver configuration of a comparison run.
#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub name: String,
    pub result: SimResult,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub entries: Vec<CompareEntry>,
    pub text: String,
}

/// Runs exact, quasi, inexact (variant 1) and inexact (variant 2) Newton on one scenario.
pub fn compare_solvers(cfg: &SimConfig, out_dir: Option<&Path>) -> Result<CompareReport, SimError> {
    let runs: [(&str, Variant, ForcingSequence); 4] = [
        ("exact", Variant::Exact, ForcingSequence::variant1()),
        ("quasi", Variant::Quasi, ForcingSequence::variant1()),
        ("inexact-1", Variant::Inexact, ForcingSequence::variant1()),
        ("inexact-2", Variant::Inexact, ForcingSequence::variant2()),
    ];
    let mut entries = Vec::new();
    for (name, variant, forcing) in runs {
        let mut c = cfg.clone();
        c.solver.variant = match variant {
            Variant::Exact => "exact",
            Variant::Quasi => "quasi",
            Variant::Inexact => "inexact",
        }
        .into();
        c.solver.forcing = match forcing.kind {
            crate::solvers::ForcingKind::Variant2 => "variant2".into(),
            _ => "variant1".into(),
        };
        if let Some(d) = out_dir {
            c.output.dir = Some(d.join(name));
        }
        let result = run_simulation(&c)?;
        if let Some(d) = out_dir {
            write_run_outputs(&result, &d.join(name))?;
        }
        entries.push(CompareEntry {
            name: name.to_string(),
            result,
        });
    }
    let text = compare_table(&entries);
    if let Some(d) = out_dir {
        let p = d.join("compare.txt");
        fs::write(&p, &text).map_err(|e| SimError::io(&p, e))?;
    }
    Ok(CompareReport { entries, text })
}

/// Same Newton step count on every time step and states within 1e-8.
pub fn iterates_match(a: &SimResult, b: &SimResult) -> bool {
    let counts = a.series.rows.len() == b.series.rows.len()
        && a.series
            .rows
            .iter()
            .zip(&b.series.rows)
            .all(|(x, y)| x.newton_steps == y.newton_steps);
    counts && state_deviation(&a.states, &b.states) <= 1e-8
}

fn compare_table(entries: &[CompareEntry]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<11}{:>14}{:>14}{:>14}{:>14}{:>14}{:>14}{:>12}",
        "solver", "integration", "newton", "linear", "newton_steps", "refine_steps", "trace_dev", "vs_exact"
    );
    let exact = &entries[0].result;
    for e in entries {
        let l = &e.result.ledger;
        let m = if iterates_match(&e.result, exact) { "match" } else { "differ" };
        let _ = writeln!(
            s,
            "{:<11}{:>14.4}{:>14.4}{:>14.4}{:>14}{:>14}{:>14.3e}{:>12}",
            e.name,
            l.integration_total.as_secs_f64(),
            l.newton_total.as_secs_f64(),
            l.newton_linear_solver.as_secs_f64(),
            l.newton_steps,
            l.refinement_steps,
            trace_deviation(&e.result.series, &exact.series),
            m
        );
    }
    s
}
