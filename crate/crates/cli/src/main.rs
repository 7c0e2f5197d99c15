//! Command-line front end: run configs and built-in cases, sweep the
//! carbonation humidity levels, self-check, and export preset configs.
//!
//! Exit codes: 0 success, 1 failed checks or I/O trouble, 2 usage or
//! configuration errors, 3 solver aborts (the diagnostic dump path is
//! printed). Errors are reported on stderr as a single line
//! `error: <kind>: <message>`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use carbsim::cases::{self, Scenario, CASE4_RH_LEVELS, DAY};
use carbsim::config::{parse_config, preset_configs, RunConfig};
use carbsim::output::{fmt_f64, write_results, SeriesRows};
use carbsim::{run_scenario, Error, RunOptions};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "carbsim", version, about = "Moisture, carbonation and corrosion-current simulation of concrete")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in case studies.
    Case {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        number: u8,
        /// Case 5: add the two cracks.
        #[arg(long)]
        cracked: bool,
        /// Case 4: relative humidity in percent.
        #[arg(long, value_parser = parse_percent)]
        rh: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run case 4 at every humidity level in parallel (CARBSIM_THREADS caps
    /// the worker count).
    SweepRh {
        #[arg(long, default_value = "output/sweep_rh")]
        out: PathBuf,
    },
    /// Run the self-check suite on a small mesh.
    Validate {
        /// Elements per side.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(2..=64))]
        n: u16,
    },
    /// Write every preset as an editable config file.
    ExportPresets {
        #[arg(long, default_value = "presets")]
        out: PathBuf,
    },
}

fn parse_percent(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 100.0 {
        Ok(v)
    } else {
        Err("relative humidity must lie in (0, 100) %".into())
    }
}

/// Failure reported to the user: exit code plus one-line message.
struct Failure {
    code: u8,
    kind: &'static str,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::StepUnderflow { .. } => (3, "solver_abort"),
            Error::Config { .. } => (2, "config"),
            Error::InvalidParameter { .. } | Error::Scenario(_) | Error::UnknownMarker(_) => (2, "scenario"),
            Error::Io(_) | Error::Csv(_) => (1, "io"),
            _ => (1, "runtime"),
        };
        let msg = match &e {
            Error::StepUnderflow { t, dt, dump } => format!(
                "time step underflow at t={t:e} s (dt={dt:e} s); dump={}",
                dump.as_ref().map_or("none".into(), |p| p.display().to_string())
            ),
            _ => e.to_string(),
        };
        Failure { code, kind, msg }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}: {}", f.kind, f.msg.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Run { config, out } => run_config(&config, out),
        Command::Case { number, cracked, rh, out } => {
            if rh.is_some() && number != 4 {
                return Err(usage("--rh applies to case 4 only"));
            }
            if cracked && number != 5 {
                return Err(usage("--cracked applies to case 5 only"));
            }
            let sc = cases::preset(number, cracked, rh.map(|p| p / 100.0))?;
            let out = out.unwrap_or_else(|| Path::new("output").join(&sc.name));
            run_and_write(&sc, &out)?;
            Ok(0)
        }
        Command::SweepRh { out } => sweep_rh(&out),
        Command::Validate { n } => {
            let checks = carbsim::validate::run_suite(n as usize);
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} ({:.2} s): {}", c.name, c.seconds, c.detail);
            }
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::ExportPresets { out } => {
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            for (name, cfg) in preset_configs() {
                let path = out.join(format!("{name}.toml"));
                std::fs::write(&path, cfg.to_toml()?).map_err(Error::from)?;
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn usage(msg: &str) -> Failure {
    Failure { code: 2, kind: "usage", msg: msg.into() }
}

fn run_config(path: &Path, out: Option<PathBuf>) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        kind: "config",
        msg: format!("{}: {e}", path.display()),
    })?;
    let mut cfg: RunConfig = parse_config(&text).map_err(|e| {
        let f = Failure::from(e);
        Failure { msg: format!("{}: {}", path.display(), f.msg), ..f }
    })?;
    // A command-line output directory is relative to the working directory,
    // the config's own `output_dir` to the config file.
    if let Some(o) = out {
        cfg.output_dir = std::env::current_dir().map_err(Error::from)?.join(o);
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let sc = cfg.resolve(base)?;
    let dir = cfg.prepare_output(base)?;
    if cfg.features.jacobian_check {
        jacobian_check(&sc)?;
    }
    run_and_write(&sc, &dir)?;
    Ok(0)
}

/// Compare analytic and finite-difference Jacobian columns on the initial
/// state perturbed by one small step.
fn jacobian_check(sc: &Scenario) -> Result<(), Failure> {
    let (p, init) = sc.setup()?;
    let mut new = init.clone();
    new.t = sc.time.dt_init;
    new.s.iter_mut().enumerate().for_each(|(i, s)| *s = (*s + 1e-3 * ((i % 7) as f64 - 3.0)).clamp(1e-3, 0.999));
    new.c.iter_mut().enumerate().for_each(|(i, c)| *c += 1e-2 * (i % 5) as f64);
    let n = 3 * p.mesh.num_nodes();
    let columns: Vec<usize> = (0..n).step_by((n / 60).max(1)).collect();
    let err = p.jacobian_spot_check(&new, &init, &columns, 1e-6)?;
    println!("jacobian check: {} columns, max relative mismatch {err:.3e}", columns.len());
    if err > 1e-5 {
        return Err(Failure { code: 1, kind: "jacobian_check", msg: format!("mismatch {err:e} exceeds 1e-5") });
    }
    Ok(())
}

fn run_and_write(sc: &Scenario, out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let opts = RunOptions { dump_dir: Some(out.to_path_buf()) };
    let result = run_scenario(sc, &opts)?;
    let files = write_results(out, sc, &result)?;
    let s = &result.stats;
    println!(
        "{}: {} steps ({} rejected), {} Newton iterations, t_end={} s",
        sc.name,
        s.accepted_steps,
        s.rejected_steps,
        s.newton_iterations,
        fmt_f64(result.final_state.t)
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn sweep_rh(out: &Path) -> Result<u8, Failure> {
    let threads = match std::env::var("CARBSIM_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage("CARBSIM_THREADS must be a positive integer"))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Failure {
        code: 1,
        kind: "runtime",
        msg: e.to_string(),
    })?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let runs: Vec<Result<(f64, SeriesRows), Failure>> = pool.install(|| {
        CASE4_RH_LEVELS
            .par_iter()
            .map(|&rh| {
                let sc = cases::case4_carbonation(rh);
                let dir = out.join(&sc.name);
                std::fs::create_dir_all(&dir).map_err(Error::from)?;
                let result = run_scenario(&sc, &RunOptions { dump_dir: Some(dir.clone()) })?;
                write_results(&dir, &sc, &result)?;
                let depths = result
                    .snapshots
                    .iter()
                    .map(|st| Ok((st.t, cases::carbonation_depth(&result.problem.mesh, st, "exposed")?)))
                    .collect::<Result<Vec<_>, Error>>()?;
                Ok((rh, depths))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in runs {
        rows.push(r?);
    }
    let path = out.join("carbonation_depth_vs_rh.csv");
    let mut text = String::from("rh [-],t [s],carbonation_depth [m]\n");
    for (rh, depths) in &rows {
        for (t, d) in depths {
            text.push_str(&format!("{},{},{}\n", fmt_f64(*rh), fmt_f64(*t), fmt_f64(*d)));
        }
    }
    std::fs::write(&path, text).map_err(Error::from)?;
    for (rh, depths) in &rows {
        let d: Vec<String> = depths.iter().map(|(t, d)| format!("{:.0} d: {:.3} mm", t / DAY, d * 1e3)).collect();
        println!("RH {:.0} %: {}", rh * 100.0, d.join(", "));
    }
    println!("wrote {}", path.display());
    Ok(0)
}
