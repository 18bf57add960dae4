use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use laserbound_core::constructions::{Construction, ConstructionRegistry};
use laserbound_core::format::{write_atomic, Real};
use laserbound_core::kernel::kernel_basis;
use laserbound_core::omega::{
    level_of_power, margin_linear, omega_upper, sweep, sweep_csv, verify_certificate, BoundCertificate, OmegaConfig,
    SAFETY_MARGIN,
};
use laserbound_core::power::{analyze_power, component_support, interior_representatives, power_supports, AnalysisConfig, LevelPolicy};
use laserbound_core::reference::{load_any, replay_certificate};
use laserbound_core::solvers::SolverConfig;
use laserbound_core::support::induced_group;

const CACHE_ENV: &str = "LASERBOUND_CACHE";

#[derive(Parser)]
#[command(name = "laserbound", version, about = "Certified upper bounds on the matrix multiplication exponent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower-bound the value of one power at one rho and write a certificate.
    Analyze(AnalyzeArgs),
    /// Bisect over rho for the smallest certifying exponent.
    Omega(OmegaArgs),
    /// Tabulate V − R^m over a grid of rho values as CSV.
    Sweep(SweepArgs),
    /// Re-check a certificate from its stored distributions.
    Verify(VerifyArgs),
    /// Print invariant dimensions and compatibility degrees.
    Kernel(KernelArgs),
}

#[derive(Args, Clone)]
struct SolveArgs {
    #[arg(long, default_value = "cw")]
    construction: String,
    /// Power m = 2^r of the construction.
    #[arg(long)]
    power: u32,
    /// A, B, or hybrid (B through power 8, A above).
    #[arg(long, default_value = "A")]
    algorithm: String,
    /// Reference table (bundled name or file) whose distribution seeds the global problem.
    #[arg(long = "warm-start")]
    warm_start: Vec<String>,
    /// Directory for per-level results; defaults to $LASERBOUND_CACHE when set.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random restarts for the kernel-constrained solver.
    #[arg(long)]
    restarts: Option<usize>,
    /// OPT1 strategy (barrier-newton or mirror-descent).
    #[arg(long)]
    opt1: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    q: u32,
    #[arg(long)]
    rho: f64,
    /// Certificate output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Certify a reference table's global distribution instead of optimizing it.
    #[arg(long)]
    replay: Option<String>,
}

#[derive(Args)]
struct OmegaArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, conflicts_with = "q_range", required_unless_present = "q_range")]
    q: Option<u32>,
    /// Inclusive range such as 1..8.
    #[arg(long = "q-range")]
    q_range: Option<String>,
    #[arg(long = "rho-tol", default_value_t = 1e-7)]
    rho_tol: f64,
    /// Optional bracket; ignored unless rho-hi certifies and rho-lo does not.
    #[arg(long = "rho-lo", requires = "rho_hi")]
    rho_lo: Option<f64>,
    #[arg(long = "rho-hi", requires = "rho_lo")]
    rho_hi: Option<f64>,
    /// Certificate for the best q.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    q: u32,
    #[arg(long = "rho-min", requires_all = ["rho_max", "steps"], conflicts_with = "rhos")]
    rho_min: Option<f64>,
    #[arg(long = "rho-max")]
    rho_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Explicit comma-separated list of rho values.
    #[arg(long, value_delimiter = ',', required_unless_present = "rho_min")]
    rhos: Vec<f64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    path: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value = "cw")]
    construction: String,
    #[arg(long, default_value_t = 5)]
    q: u32,
    #[arg(long)]
    power: u32,
}

/// Errors that are the caller's fault map to exit code 2; everything the
/// computation decides maps to 0 or 1.
enum Exit {
    Ok,
    Negative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Omega(a) => cmd_omega(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Kernel(a) => cmd_kernel(a),
    };
    match result {
        Ok(Exit::Ok) => ExitCode::SUCCESS,
        Ok(Exit::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn construction(name: &str, q: u32) -> Result<std::sync::Arc<dyn Construction>> {
    Ok(ConstructionRegistry::default().build(name, q)?)
}

fn cache_dir(flag: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn analysis_config(args: &SolveArgs, construction: &dyn Construction) -> Result<AnalysisConfig> {
    let mut solver = SolverConfig {
        rng_seed: args.seed,
        ..SolverConfig::default()
    };
    if let Some(r) = args.restarts {
        solver.restarts = r;
    }
    if let Some(name) = &args.opt1 {
        solver.opt1 = name.clone();
    }
    solver.validate()?;
    let mut cfg = AnalysisConfig {
        solver,
        policy: LevelPolicy::parse(&args.algorithm)?,
        cache_dir: cache_dir(&args.cache),
        ..AnalysisConfig::default()
    };
    for source in &args.warm_start {
        let table = load_any(source).with_context(|| format!("reading warm start {source}"))?;
        if table.construction != construction.name() || table.q != construction.q() {
            bail!(
                "warm start {source} is for {} q={}, not {} q={}",
                table.construction,
                table.q,
                construction.name(),
                construction.q()
            );
        }
        let level = table.level()?;
        let entry = cfg.warm_starts.global.entry(level).or_default();
        entry.push(table.warm_start(table.global_column())?);
    }
    Ok(cfg)
}

fn write_certificate(path: &Path, cert: &BoundCertificate) -> Result<()> {
    write_atomic(path, cert.to_json()?.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<Exit> {
    let r = level_of_power(a.solve.power)?;
    let c = construction(&a.solve.construction, a.q)?;
    let cfg = analysis_config(&a.solve, c.as_ref())?;
    let (analysis, cert) = match &a.replay {
        Some(source) => {
            let table = load_any(source).with_context(|| format!("reading {source}"))?;
            if table.construction != c.name() || table.q != a.q || table.power != a.solve.power || table.rho.get() != a.rho {
                bail!("replay table {source} is for {} q={} power {} rho {}", table.construction, table.q, table.power, table.rho);
            }
            replay_certificate(&table, &cfg, SAFETY_MARGIN)?
        }
        None => {
            let analysis = analyze_power(c.as_ref(), r, a.rho, &cfg)?;
            let cert = BoundCertificate::from_analysis(&analysis, SAFETY_MARGIN);
            (analysis, cert)
        }
    };
    let log_bound = cert.global.log_value.get();
    let threshold = analysis.threshold_log;
    println!(
        "{} q={} power {} rho {} algorithm {}",
        c.name(),
        a.q,
        a.solve.power,
        a.rho,
        analysis.policy.label()
    );
    println!("components solved: {}", analysis.components().count());
    println!("log V lower bound: {}", Real(log_bound));
    println!("V lower bound:     {:.10}", log_bound.exp());
    println!("threshold R^m:     {:.10}", threshold.exp());
    println!("V - R^m:           {:+.6e}", margin_linear(log_bound, threshold));
    if let Some(path) = &a.out {
        write_certificate(path, &cert)?;
        println!("certificate:       {}", path.display());
    }
    if cert.omega_claim.is_some() {
        println!("certifying: omega < {}", a.rho);
        Ok(Exit::Ok)
    } else {
        println!("not certifying at rho {}", a.rho);
        Ok(Exit::Negative)
    }
}

fn parse_q_range(s: &str) -> Result<Vec<u32>> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| anyhow!("q range must look like A..B, got {s:?}"))?;
    let lo: u32 = lo.trim().parse().context("q range start")?;
    let hi: u32 = hi.trim().parse().context("q range end")?;
    if lo > hi {
        bail!("empty q range {s}");
    }
    Ok((lo..=hi).collect())
}

fn cmd_omega(a: OmegaArgs) -> Result<Exit> {
    let r = level_of_power(a.solve.power)?;
    let qs = match (&a.q, &a.q_range) {
        (Some(q), _) => vec![*q],
        (None, Some(range)) => parse_q_range(range)?,
        (None, None) => bail!("one of --q or --q-range is required"),
    };
    let ocfg = OmegaConfig {
        rho_tol: a.rho_tol,
        safety: SAFETY_MARGIN,
        bracket: a.rho_lo.zip(a.rho_hi),
    };
    let mut best: Option<(u32, laserbound_core::omega::OmegaResult)> = None;
    let mut lines = Vec::new();
    for q in qs {
        let c = construction(&a.solve.construction, q)?;
        let cfg = analysis_config(&a.solve, c.as_ref())?;
        match omega_upper(c.as_ref(), r, &cfg, &ocfg) {
            Ok(res) => {
                let mut line = format!(
                    "q={q}: omega < {:.7} (certified at rho {:.7}, {} evaluations)",
                    res.omega_bound,
                    res.rho_star,
                    res.evaluations.len()
                );
                if res.non_monotone {
                    line.push_str(" [non-monotone bound, grid scan used]");
                }
                lines.push((q, line));
                if best.as_ref().map_or(true, |(_, b)| res.rho_star < b.rho_star) {
                    best = Some((q, res));
                }
            }
            Err(laserbound_core::Error::NonCertifying { margin }) => {
                lines.push((q, format!("q={q}: no certifying rho in [2, 3] (log margin at rho=3: {margin:.6e})")));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let best_q = best.as_ref().map(|(q, _)| *q);
    for (q, line) in lines {
        let mark = if Some(q) == best_q { "*" } else { " " };
        println!("{mark} {line}");
    }
    let Some((q, res)) = best else {
        return Ok(Exit::Negative);
    };
    println!("best: q={q}, omega < {:.7}", res.omega_bound);
    if let Some(path) = &a.out {
        let cert = BoundCertificate::from_analysis(&res.analysis, SAFETY_MARGIN);
        write_certificate(path, &cert)?;
        println!("certificate: {}", path.display());
    }
    Ok(Exit::Ok)
}

fn cmd_sweep(a: SweepArgs) -> Result<Exit> {
    let r = level_of_power(a.solve.power)?;
    let c = construction(&a.solve.construction, a.q)?;
    let cfg = analysis_config(&a.solve, c.as_ref())?;
    let rhos = match (a.rho_min, a.rho_max, a.steps) {
        (Some(lo), Some(hi), Some(n)) => {
            if n == 0 || hi < lo {
                bail!("need rho-min <= rho-max and at least one step");
            }
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        }
        _ => a.rhos.clone(),
    };
    if rhos.is_empty() {
        bail!("no rho values to sweep");
    }
    let rows = sweep(c.as_ref(), r, &rhos, &cfg)?;
    let csv = sweep_csv(&rows);
    match &a.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
            for row in &rows {
                println!("rho {:.7}  V - R^m {:+.4e}", row.rho, row.margin_linear);
            }
        }
        None => print!("{csv}"),
    }
    Ok(Exit::Ok)
}

fn cmd_verify(a: VerifyArgs) -> Result<Exit> {
    let text = std::fs::read_to_string(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
    let cert = BoundCertificate::from_json(&text).with_context(|| format!("parsing {}", a.path.display()))?;
    let report = verify_certificate(&cert, &cert.config)?;
    println!("{} q={} power {} rho {}", cert.construction, cert.q, cert.power, cert.rho.get());
    println!("{:>5}  {:<14} {:>22} {:>22} {:>11}", "level", "component", "claimed log", "recomputed log", "residual");
    for c in &report.components {
        println!(
            "{:>5}  {:<14} {:>22} {:>22} {:>+11.3e}",
            c.level,
            c.abc.to_string(),
            Real(c.claimed).to_string(),
            Real(c.recomputed).to_string(),
            c.residual()
        );
    }
    println!(
        "global: claimed {} recomputed {} residual {:+.3e}",
        Real(report.claimed_log),
        Real(report.recomputed_log),
        report.recomputed_log - report.claimed_log
    );
    println!("threshold {}  log margin {:+.6e}", Real(report.threshold_log), report.log_margin);
    for note in &report.notes {
        println!("note: {note}");
    }
    match (cert.omega_claim, report.verified) {
        (Some(claim), true) => {
            println!("VERIFIED: omega < {}", claim.get());
            Ok(Exit::Ok)
        }
        (Some(claim), false) => {
            println!("REFUTED: claim omega < {} does not hold", claim.get());
            Ok(Exit::Negative)
        }
        (None, _) => {
            println!("NO CLAIM: the certificate does not assert an exponent bound");
            Ok(Exit::Negative)
        }
    }
}

fn cmd_kernel(a: KernelArgs) -> Result<Exit> {
    let r = level_of_power(a.power)?;
    let c = construction(&a.construction, a.q)?;
    let supports = power_supports(c.as_ref(), r)?;
    let support = &supports[r as usize];
    let group = induced_group(support, &c.symmetry())?;
    let global = kernel_basis(support, &group);
    println!("{} power {}: |S| = {}", c.name(), a.power, support.len());
    println!("global: dim {} chi {}", global.invariant_dim(), global.chi());
    if r == 0 {
        return Ok(Exit::Ok);
    }
    println!("{:<14} {:>4} {:>4} {:>4}", "component", "|S|", "d", "chi");
    // boundary status does not depend on rho
    for t in interior_representatives(c.as_ref(), support, r, 2.5)? {
        let problem = component_support(&supports[r as usize - 1], t)?;
        let k = kernel_basis(&problem.support, &problem.group);
        println!("{:<14} {:>4} {:>4} {:>4}", t.to_string(), problem.support.len(), k.invariant_dim(), k.chi());
    }
    Ok(Exit::Ok)
}
