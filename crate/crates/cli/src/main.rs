//! `rcs`: reproduce the summary table, optimize radius functions, emit curve
//! data and cross-check quadrature against simulation.

mod config;
mod failure;
mod radius_file;

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rcs_core::mc::{estimate, McConfig};
use rcs_core::optimizer::{solve, sweep_grid};
use rcs_core::performance::{coverage_infimum, coverage_probability, curve, sev, CurveKind};
use rcs_core::sphere::{standard_radius, DEFAULT_CAP};
use rcs_core::{QuadratureConfig, RadiusFunction, RcsSpec};
use serde::Serialize;

use config::RunConfig;
use failure::Failure;
use radius_file::RadiusFile;

const TABLE_P: [u32; 9] = [3, 5, 7, 9, 11, 13, 15, 17, 19];

#[derive(Debug, Parser)]
#[command(
    name = "rcs",
    version,
    about = "Recentered confidence spheres for a normal mean"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimum coverage and SEV(0) of the Casella-Hwang and optimized spheres.
    Table1 {
        /// Dimensions, comma separated.
        #[arg(long = "p", value_delimiter = ',', num_args = 0.., default_values_t = TABLE_P)]
        p: Vec<u32>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize a Hermite radius function and write it as JSON.
    Optimize {
        /// JSON run configuration; `--p`, `--alpha` and `--k` are used without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "p")]
        p: Option<u32>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        k: f64,
        /// Radius file; the summary goes next to it as `<stem>.summary.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage and SEV curves of a radius file, plus samples of b(x).
    Curves {
        #[arg(long)]
        radius: PathBuf,
        #[arg(long = "gamma-max", default_value_t = 20.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// CSV with columns gamma,coverage,sev.
        #[arg(long)]
        out: PathBuf,
        /// CSV with columns x,b; defaults to `<stem>_radius.csv` next to `--out`.
        #[arg(long = "radius-out")]
        radius_out: Option<PathBuf>,
    },
    /// Compare quadrature with Monte Carlo at the given gamma values.
    Verify {
        #[arg(long)]
        radius: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long = "gamma", value_delimiter = ',', default_values_t = [0.0, 1.0, 5.0, 20.0])]
        gammas: Vec<f64>,
    },
    /// Write the Casella-Hwang radius function as JSON.
    ChRadius {
        #[arg(long = "p")]
        p: u32,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Table1 { p, alpha, out } => cmd_table1(&p, alpha, &out),
        Command::Optimize {
            config,
            p,
            alpha,
            k,
            out,
        } => cmd_optimize(config.as_deref(), p, alpha, k, out),
        Command::Curves {
            radius,
            gamma_max,
            step,
            out,
            radius_out,
        } => cmd_curves(&radius, gamma_max, step, &out, radius_out),
        Command::Verify {
            radius,
            samples,
            seed,
            gammas,
        } => cmd_verify(&radius, samples, seed, &gammas),
        Command::ChRadius { p, alpha, k, out } => {
            RadiusFile::casella_hwang(p, alpha, k).and_then(|f| f.write(&out))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rcs: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Grid for the Casella-Hwang minimum: step 0.01 on [0, 20] plus γ = 65.
fn table_gamma_grid() -> Vec<f64> {
    let mut g = sweep_grid(0.01, 20.0);
    g.push(65.0);
    g
}

struct TableRow {
    ch_min_cp: f64,
    ch_sev0: f64,
    new_min_cp: f64,
    new_sev0: f64,
}

fn table_row(p: u32, alpha: f64) -> Result<TableRow, Failure> {
    let cfg = QuadratureConfig::default();
    let d = standard_radius(p, alpha)?;
    let ch = RcsSpec::new(alpha, RadiusFunction::casella_hwang(p, d)?)?;
    let (ch_min_cp, _) = coverage_infimum(&ch, &table_gamma_grid(), &cfg)?;
    let ch_sev0 = sev(&ch, 0.0, &cfg)?;
    let problem = rcs_core::OptimizationProblem::new(p, alpha)?;
    let res = solve(&problem)?;
    Ok(TableRow {
        ch_min_cp,
        ch_sev0,
        // coverage tends to 1 − α as γ grows, which bounds the infimum
        new_min_cp: res.global_min_coverage.min(1.0 - alpha),
        new_sev0: res.sev_at_zero,
    })
}

fn cmd_table1(ps: &[u32], alpha: f64, out: &Path) -> Result<(), Failure> {
    let mut file = File::create(out)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", out.display())))?;
    let io = |e: std::io::Error| Failure::Input(format!("cannot write {}: {e}", out.display()));
    writeln!(file, "p,ch_min_cp,ch_sev0,new_min_cp,new_sev0").map_err(io)?;
    for &p in ps {
        match table_row(p, alpha) {
            Ok(r) => {
                writeln!(
                    file,
                    "{p},{:.5},{:.5},{:.5},{:.5}",
                    r.ch_min_cp, r.ch_sev0, r.new_min_cp, r.new_sev0
                )
                .map_err(io)?;
                file.flush().map_err(io)?;
            }
            Err(e) => {
                writeln!(file, "# p={p}: {e}").map_err(io)?;
                return Err(e);
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    sev_at_zero: f64,
    min_coverage_on_grid: f64,
    global_min_coverage: f64,
    iterations: usize,
}

fn cmd_optimize(
    config: Option<&Path>,
    p: Option<u32>,
    alpha: f64,
    k: f64,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let run = match (config, p) {
        (Some(path), _) => RunConfig::read(path)?,
        (None, Some(p)) => RunConfig {
            p,
            alpha,
            k,
            knots: None,
            gamma_grid: None,
            rel_tol: None,
            value_floor: None,
            coverage_slack: None,
            max_iterations: None,
            mc_samples: None,
            mc_seed: None,
            out: None,
        },
        (None, None) => return Err(Failure::Input("give --config or --p".into())),
    };
    let out = out
        .or_else(|| run.out.clone())
        .ok_or_else(|| Failure::Input("no output path: give --out".into()))?;
    let problem = run.problem()?;
    let res = solve(&problem)?;
    let spec = RcsSpec::new(problem.alpha, res.radius.clone())?;
    RadiusFile::from_spec(&spec)?.write(&out)?;
    let summary = Summary {
        sev_at_zero: res.sev_at_zero,
        min_coverage_on_grid: res.min_coverage_on_grid,
        global_min_coverage: res.global_min_coverage,
        iterations: res.iterations,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_file(&sibling(&out, ".summary.json"), &text)?;
    println!(
        "p = {}: SEV(0) = {:.5}, min coverage on grid = {:.6}, on sweep = {:.6} at gamma = {}",
        problem.p,
        res.sev_at_zero,
        res.min_coverage_on_grid,
        res.global_min_coverage,
        res.global_argmin_gamma
    );
    match run.mc_samples {
        Some(samples) => {
            let seed = run.mc_seed.unwrap_or(McConfig::default().seed);
            let gammas = [0.0, res.global_argmin_gamma];
            compare_with_simulation(&spec, samples, seed, &gammas, &problem.quadrature)
        }
        None => Ok(()),
    }
}

/// Rounds grid values so that CSV output shows `0.3`, not `0.30000000000000004`.
fn tidy(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

fn cmd_curves(
    radius: &Path,
    gamma_max: f64,
    step: f64,
    out: &Path,
    radius_out: Option<PathBuf>,
) -> Result<(), Failure> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Failure::Input(format!(
            "--step must be positive, got {step}"
        )));
    }
    if !(gamma_max >= 0.0 && gamma_max.is_finite()) {
        return Err(Failure::Input(format!(
            "--gamma-max must be nonnegative, got {gamma_max}"
        )));
    }
    let spec = RadiusFile::read(radius)?.to_spec()?;
    let cfg = QuadratureConfig::default();
    let gammas = sweep_grid(step, gamma_max);
    let cp = curve(&spec, &gammas, CurveKind::Coverage, &cfg)?;
    let sv = curve(&spec, &gammas, CurveKind::Sev, &cfg)?;
    let mut text = String::from("gamma,coverage,sev\n");
    for ((g, c), s) in gammas.iter().zip(&cp.value).zip(&sv.value) {
        writeln!(text, "{},{c:.5},{s:.5}", tidy(*g)).unwrap();
    }
    write_file(out, &text)?;

    let k = spec.radius().k();
    let mut text = String::from("x,b\n");
    for x in sweep_grid(0.01, k) {
        writeln!(text, "{},{}", tidy(x), spec.radius().eval(x)).unwrap();
    }
    let radius_out = radius_out.unwrap_or_else(|| sibling(out, "_radius.csv"));
    write_file(&radius_out, &text)
}

fn cmd_verify(radius: &Path, samples: u64, seed: u64, gammas: &[f64]) -> Result<(), Failure> {
    let spec = RadiusFile::read(radius)?.to_spec()?;
    if gammas.is_empty() {
        return Err(Failure::Input("no gamma values given".into()));
    }
    compare_with_simulation(&spec, samples, seed, gammas, &QuadratureConfig::default())
}

/// Prints quadrature next to Monte Carlo at each `γ`; fails if any pair is
/// more than 4 standard errors apart.
fn compare_with_simulation(
    spec: &RcsSpec,
    samples: u64,
    seed: u64,
    gammas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(), Failure> {
    let mc = McConfig {
        samples,
        seed,
        ..McConfig::default()
    };
    let n = samples as f64;
    println!(
        "{:>8} {:>10} {:>10} {:>9} {:>10} {:>10} {:>9}  result",
        "gamma", "cp_quad", "cp_mc", "cp_se", "sev_quad", "sev_mc", "sev_se"
    );
    let mut failures = 0;
    for &g in gammas {
        let cp = coverage_probability(spec, g, cfg)?;
        let sv = sev(spec, g, cfg)?;
        let est = estimate(spec, g, &mc)?;
        // a zero standard error gets a floor of one sample for coverage and
        // rounding level for SEV
        let cp_ok = (cp - est.cp).abs() <= 4.0 * est.cp_se.max(1.0 / n);
        let sev_ok = (sv - est.sev).abs() <= 4.0 * est.sev_se + 1e-9;
        let ok = cp_ok && sev_ok;
        if !ok {
            failures += 1;
        }
        println!(
            "{g:>8} {cp:>10.6} {:>10.6} {:>9.2e} {sv:>10.6} {:>10.6} {:>9.2e}  {}",
            est.cp,
            est.cp_se,
            est.sev,
            est.sev_se,
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    if failures > 0 {
        return Err(Failure::Numerical(format!(
            "{failures} gamma value(s) differ by more than 4 standard errors"
        )));
    }
    Ok(())
}
