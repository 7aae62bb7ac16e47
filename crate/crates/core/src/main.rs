use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinscl::config::{ConfigMap, RunConfig};
use kinscl::experiments::{
    compare_with_reference, experiment_counterexample, experiment_shock_rarefaction, run_simulation,
    write_compare, write_counterexample, write_shock_rarefaction, write_simulation, CounterexampleParams,
    ShockRarefactionParams,
};
use kinscl::report::Report;
use kinscl::{Error, MollifierKernel, Result};

const SHOCK_KEYS: &[&str] = &[
    "flux.kind",
    "flux.coeffs",
    "flux.table",
    "grid.L",
    "grid.nx",
    "grid.nv",
    "init.u_minus",
    "init.u_plus",
    "mollify.eps",
    "mollify.kernel",
    "time.T",
    "time.cfl",
    "output.dir",
];

const COUNTER_KEYS: &[&str] = &[
    "grid.L",
    "grid.nx",
    "grid.nv",
    "mollify.eps",
    "mollify.kernel",
    "time.cfl",
    "output.dir",
];

/// Kinetic solver for 1-D scalar conservation laws.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial data described by a config file.
    Simulate {
        config: PathBuf,
        /// Config overrides, e.g. --grid.nx=512
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Smoothed shock next to a rarefaction: interaction profile, minimizer and shock speed.
    ShockRarefaction {
        /// Overrides, e.g. --flux.kind=shifted_square --init.u_plus=0.5
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Square wave for f = (u - 1/2)^2: mollified exact solutions lose L2 conservation.
    Counterexample {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Level-extracted kinetic solution against a Godunov reference, with a refinement table.
    Compare {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn overrides(keys: &'static [&'static str], args: &[String]) -> Result<ConfigMap> {
    let mut map = ConfigMap::with_keys(keys);
    map.apply_overrides(args)?;
    Ok(map)
}

fn kernel(map: &ConfigMap, default: MollifierKernel) -> Result<MollifierKernel> {
    match map.get("mollify.kernel") {
        None => Ok(default),
        Some(k) => k.parse().map_err(|e: Error| map.err("mollify.kernel", e.to_string())),
    }
}

fn output_dir(map: &ConfigMap, default: &str) -> PathBuf {
    PathBuf::from(map.get("output.dir").unwrap_or(default))
}

fn shock_params(map: &ConfigMap) -> Result<ShockRarefactionParams> {
    let d = ShockRarefactionParams::default();
    let half_length = map.parse_value("grid.L")?.unwrap_or(d.half_length);
    let nx = map.parse_value("grid.nx")?.unwrap_or(d.nx);
    let p = ShockRarefactionParams {
        flux: map.flux()?.0,
        u_minus: map.parse_value("init.u_minus")?.unwrap_or(d.u_minus),
        u_plus: map.parse_value("init.u_plus")?.unwrap_or(d.u_plus),
        half_length,
        eps: map.parse_value("mollify.eps")?.unwrap_or(half_length / 16.0),
        nx,
        nv: map.parse_value("grid.nv")?.unwrap_or(nx),
        horizon: map.parse_value("time.T")?.unwrap_or(d.horizon),
        kernel: kernel(map, d.kernel)?,
        cfl: map.parse_value("time.cfl")?.unwrap_or(d.cfl),
    };
    if !(p.u_plus > p.u_minus) || !(0.0..=1.0).contains(&p.u_minus) || !(0.0..=1.0).contains(&p.u_plus) {
        return Err(map.err("init.u_plus", "need 0 <= u_minus < u_plus <= 1"));
    }
    check_eps(map, p.eps, p.half_length)?;
    Ok(p)
}

fn check_eps(map: &ConfigMap, eps: f64, half_length: f64) -> Result<()> {
    if !(eps > 0.0 && eps < half_length / 8.0) {
        return Err(map.err("mollify.eps", format!("need 0 < eps < L/8 = {}", half_length / 8.0)));
    }
    Ok(())
}

fn counter_params(map: &ConfigMap) -> Result<CounterexampleParams> {
    let d = CounterexampleParams::default();
    let nx = map.parse_value("grid.nx")?.unwrap_or(d.nx);
    let p = CounterexampleParams {
        eps: map.parse_value("mollify.eps")?.unwrap_or(d.eps),
        half_length: map.parse_value("grid.L")?.unwrap_or(d.half_length),
        nx,
        nv: map.parse_value("grid.nv")?.unwrap_or(nx),
        kernel: kernel(map, d.kernel)?,
        cfl: map.parse_value("time.cfl")?.unwrap_or(d.cfl),
    };
    if !(p.half_length > 2.0) {
        return Err(map.err("grid.L", "the square wave needs L > 2"));
    }
    check_eps(map, p.eps, p.half_length)?;
    // The noise floor reruns at half resolution.
    let coarse_dx = 2.0 * p.half_length / (p.nx / 2) as f64;
    if p.eps < 2.0 * coarse_dx {
        return Err(map.err(
            "grid.nx",
            format!("eps = {} needs nx >= {} so the half-resolution rerun keeps two cells per eps", p.eps, (8.0 * p.half_length / p.eps).ceil()),
        ));
    }
    Ok(p)
}

fn summarize(report: &Report, dir: &Path) {
    for a in &report.assertions {
        println!(
            "{} {}: measured {:e}, expected {}",
            if a.pass { "PASS" } else { "FAIL" },
            a.name,
            a.measured,
            a.expected
        );
    }
    println!("outputs written to {}", dir.display());
}

fn run(cli: Cli) -> Result<Report> {
    let (report, dir) = match cli.command {
        Command::Simulate { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let out = run_simulation(&cfg)?;
            write_simulation(&out, &cfg.output_dir)?;
            (out.report, cfg.output_dir)
        }
        Command::Compare { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let out = compare_with_reference(&cfg)?;
            write_compare(&out, &cfg.output_dir)?;
            (out.report, cfg.output_dir)
        }
        Command::ShockRarefaction { overrides: args } => {
            let map = overrides(SHOCK_KEYS, &args)?;
            let params = shock_params(&map)?;
            let dir = output_dir(&map, "out/shock-rarefaction");
            let out = experiment_shock_rarefaction(&params)?;
            write_shock_rarefaction(&out, &dir)?;
            (out.report, dir)
        }
        Command::Counterexample { overrides: args } => {
            let map = overrides(COUNTER_KEYS, &args)?;
            let params = counter_params(&map)?;
            let dir = output_dir(&map, "out/counterexample");
            let out = experiment_counterexample(&params)?;
            write_counterexample(&out, &dir)?;
            (out.report, dir)
        }
    };
    summarize(&report, &dir);
    Ok(report)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) if report.passed() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
