use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use super::{compare_solvers, load_config_file, parse_forcing, parse_variant, run_simulation, write_run_outputs};
use super::{ConfigError, Mesh, SimConfig, SimError};

#[derive(Debug, Parser)]
#[command(name = "uvlm-fsi", about = "Strongly coupled vortex-lattice / ribbon time stepping", version)]
struct Cli {
    /// TOML scenario file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: plate or reduced
    #[arg(long)]
    preset: Option<String>,
    /// exact | quasi | inexact
    #[arg(long)]
    solver: Option<String>,
    /// variant1 | variant2 | const:<eta> | scale:<s>
    #[arg(long)]
    forcing: Option<String>,
    /// Newton tolerance on the residual norm
    #[arg(long)]
    tol: Option<f64>,
    /// Time step [s]
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time [s]
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// m_S,m_A,n_A
    #[arg(long)]
    mesh: Option<String>,
    /// Vortex cut-off radius [m]
    #[arg(long)]
    cutoff: Option<f64>,
    /// Bump-function support radius [m]
    #[arg(long = "transfer-radius")]
    transfer_radius: Option<f64>,
    /// Output directory (default: out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the contraction estimate
    #[arg(long)]
    seed: Option<u64>,
    /// Write wake node dumps every step
    #[arg(long = "wake-dump")]
    wake_dump: bool,
    /// Run every solver on the scenario and write a comparison table
    #[arg(long = "compare-solvers")]
    compare_solvers: bool,
}

fn parse_mesh(s: &str) -> Result<Mesh, ConfigError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || ConfigError::Validation(format!("--mesh expects m_S,m_A,n_A, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<usize> = parts.iter().map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    Ok(Mesh {
        m_s: v[0],
        m_a: v[1],
        n_a: v[2],
    })
}

fn build_config(cli: &Cli) -> Result<SimConfig, ConfigError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(p), _) => load_config_file(p)?,
        (None, Some(name)) => SimConfig::preset(name)?,
        (None, None) => SimConfig::plate(),
    };
    if let Some(v) = &cli.solver {
        parse_variant(v)?;
        cfg.solver.variant = v.clone();
    }
    if let Some(f) = &cli.forcing {
        parse_forcing(f)?;
        cfg.solver.forcing = f.clone();
    }
    if let Some(t) = cli.tol {
        cfg.solver.tol = t;
    }
    if let Some(dt) = cli.dt {
        cfg.time.dt = Some(dt);
    }
    if let Some(t) = cli.t_final {
        cfg.time.t_final = t;
    }
    if let Some(m) = &cli.mesh {
        cfg.mesh = parse_mesh(m)?;
    }
    if let Some(c) = cli.cutoff {
        cfg.uvlm.cutoff = c;
    }
    if let Some(r) = cli.transfer_radius {
        cfg.coupling.gamma_ref = r;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.wake_dump {
        cfg.output.wake_dump = true;
    }
    if cfg.output.dir.is_none() {
        cfg.output.dir = Some(PathBuf::from("out"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), SimError> {
    let cfg = build_config(cli)?;
    let dir = cfg.output.dir.clone().expect("set in build_config");
    if cli.compare_solvers {
        let report = compare_solvers(&cfg, Some(&dir))?;
        print!("{}", report.text);
        println!("wrote {}", dir.join("compare.txt").display());
    } else {
        let result = run_simulation(&cfg)?;
        write_run_outputs(&result, &dir)?;
        let l = &result.ledger;
        println!(
            "{} steps, {} Newton steps, {} refinement steps, {:.3} s; wrote {}",
            l.time_steps,
            l.newton_steps,
            l.refinement_steps,
            l.integration_total.as_secs_f64(),
            dir.display()
        );
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_flag() {
        assert_eq!(parse_mesh("10, 10,2").unwrap(), Mesh { m_s: 10, m_a: 10, n_a: 2 });
        assert!(parse_mesh("10,10").is_err());
        assert!(parse_mesh("a,b,c").is_err());
    }

    #[test]
    fn flags_override_preset() {
        let cli = Cli::try_parse_from([
            "uvlm-fsi", "--preset", "reduced", "--solver", "quasi", "--tol", "1e-9", "--mesh", "4,4,1",
        ])
        .unwrap();
        let cfg = build_config(&cli).unwrap();
        assert_eq!(cfg.solver.variant, "quasi");
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.mesh.m_a, 4);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["uvlm-fsi", "--bogus"]), 1);
        assert_eq!(cli_main(["uvlm-fsi", "--solver", "broyden"]), 1);
        assert_eq!(cli_main(["uvlm-fsi", "--dt", "-1"]), 1);
    }
}
