//! Command-line surface: build the action, verify bundles, sample map
//! graphs as CSV, and run sign-sequence families.
//!
//! Exit codes: 0 = all assertions passed, 1 = construction failure,
//! 2 = verification failure, 3 = I/O or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use serde::Deserialize;
use serde_json::json;

use higman::config::Config;
use higman::denjoy::build_blowup;
use higman::families::{run_family, SignSequence};
use higman::homeo::interval::OpenSet;
use higman::homeo::plmap::PLMap;
use higman::iterate;
use higman::seed::{build_psi, build_seed, SeedBundle};
use higman::verify::{circle_report, freeness_sweep, ping_pong_certificate, ActionBundle};

const SCHEMA_VERSION: u32 = 1;
const ROTATION_ITERATIONS: usize = 2048;

#[derive(Parser)]
#[command(name = "higman", version, about = "PL actions of Higman's group on the line")]
struct Cli {
    #[command(flatten)]
    opts: CommonOpts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonOpts {
    /// Base length scale of the blown-up intervals.
    #[arg(long, default_value_t = 0.125)]
    kappa: f64,
    /// Maximal dyadic level receiving an inserted interval.
    #[arg(long, default_value_t = 6)]
    depth: u32,
    /// Half-width (in periods) of the modeled window.
    #[arg(long, default_value_t = 8)]
    window: u32,
    /// Grid resolution for residual measurements.
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    /// Convergence tolerance of the fixed-point iteration.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Iteration budget for the fixed-point loop.
    #[arg(long, default_value_t = 60)]
    max_iter: usize,
    /// Exponent override for the ping-pong pair b = β₀^N, d = β₁^N.
    #[arg(long)]
    n_override: Option<u32>,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Sign sequence ε: "all", "periodic:1,-1", or "flips:2,5".
    #[arg(long, default_value = "all")]
    seq_eps: String,
    /// Sign sequence δ, same format as --seq-eps.
    #[arg(long, default_value = "all")]
    seq_delta: String,
    /// RNG seed for randomized sweeps.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full construction pipeline and write manifest + bundle.
    Build,
    /// Load a bundle file and run the verification harness on it.
    Verify {
        /// Path to a bundle.json produced by `build`.
        bundle: PathBuf,
    },
    /// Sample a named map over a range and emit two-column CSV.
    Sample {
        /// One of a, b, c, d (from a bundle) or psi, beta0, beta1, a0, c0.
        map: String,
        /// Bundle file for the iterated generators a, b, c, d.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
    /// Rerun the pipeline on twisted generators given by --seq-eps/--seq-delta.
    Family,
}

impl CommonOpts {
    fn config(&self) -> Config {
        Config {
            kappa: self.kappa,
            depth: self.depth,
            window: self.window,
            grid: self.grid,
            tol: self.tol,
            max_iter: self.max_iter,
            n_override: self.n_override,
            seq_eps: self.seq_eps.clone(),
            seq_delta: self.seq_delta.clone(),
            out: self.out.clone(),
            rng_seed: self.seed,
        }
    }
}

/// Exit-code discipline for the subcommands.
enum Failure {
    Construction(String),
    Verification(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Construction(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Construction(m) | Failure::Verification(m) | Failure::Io(m) => m,
        }
    }
}

fn io_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Io(e.to_string())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(io_err)?;
    std::fs::write(path, text).map_err(io_err)
}

fn build_seed_from(cfg: &Config) -> Result<SeedBundle, Failure> {
    let dj = build_blowup(&cfg.blowup()).map_err(|e| Failure::Construction(e.to_string()))?;
    build_seed(&dj).map_err(|e| Failure::Construction(e.to_string()))
}

/// A construction-time assertion with its measured witness.
struct Assertion {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn report_assertions(assertions: &[Assertion]) -> bool {
    let mut all = true;
    for a in assertions {
        let status = if a.pass { "pass" } else { "FAIL" };
        println!("{status}  {:<28} {:>12.3e} (limit {:.1e})", a.name, a.value, a.threshold);
        all &= a.pass;
    }
    all
}

fn cmd_build(cfg: &Config) -> Result<(), Failure> {
    cfg.validate().map_err(io_err)?;
    let mut seed = build_seed_from(cfg)?;
    if let Some(n) = cfg.n_override {
        seed.b = seed.beta0.pow(n as i64).map_err(|e| Failure::Construction(e.to_string()))?;
        seed.d = seed.beta1.pow(n as i64).map_err(|e| Failure::Construction(e.to_string()))?;
        seed.n = n;
    }
    let certificate = ping_pong_certificate(&seed.b, &seed.d, &seed.iset0, &seed.iset1)
        .map_err(|e| Failure::Construction(e.to_string()))?;
    if !certificate {
        let manifest = json!({
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "n": seed.n,
            "ping_pong_certificate": false,
            "pass": false,
        });
        write_json(&cfg.out.join("manifest.json"), &manifest)?;
        return Err(Failure::Construction(format!(
            "ping-pong certificate failed for N = {}",
            seed.n
        )));
    }

    let (a, c, diag) = iterate::run(&seed, cfg.max_iter, cfg.tol, cfg.grid)
        .map_err(|e| Failure::Construction(e.to_string()))?;
    let bundle = ActionBundle { a, b: seed.b.clone(), c, d: seed.d.clone() };

    // Relation residuals in the two-sided form sup |f g f⁻¹ − g²|; the
    // iteration contract bounds these by a small multiple of tol. The word
    // forms sup |w(x) − x| pass through neighbourhoods of hyperbolic fixed
    // points where inverse powers amplify float-level errors by many orders
    // of magnitude, so they are reported but not gated.
    let pairs = [
        ("relation a b a^-1 = b^2", &bundle.a, &bundle.b),
        ("relation b c b^-1 = c^2", &bundle.b, &bundle.c),
        ("relation c d c^-1 = d^2", &bundle.c, &bundle.d),
        ("relation d a d^-1 = a^2", &bundle.d, &bundle.a),
    ];
    let residual_limit = 100.0 * cfg.tol;
    let mut assertions = vec![Assertion {
        name: "ping-pong certificate",
        value: 1.0,
        threshold: 1.0,
        pass: certificate,
    }];
    assertions.push(Assertion {
        name: "iteration converged",
        value: if diag.a.converged && diag.c.converged { 1.0 } else { 0.0 },
        threshold: 1.0,
        pass: diag.a.converged && diag.c.converged,
    });
    let mut conjugacy = Vec::new();
    for (name, f, g) in pairs {
        let r = iterate::conjugation_residual(f, g, cfg.grid);
        conjugacy.push(r);
        assertions.push(Assertion { name, value: r, threshold: residual_limit, pass: r < residual_limit });
    }
    let pass = report_assertions(&assertions);

    let bundle_file = json!({
        "schema_version": SCHEMA_VERSION,
        "a": bundle.a, "b": bundle.b, "c": bundle.c, "d": bundle.d,
        "iset0": seed.iset0, "iset1": seed.iset1,
    });
    write_json(&cfg.out.join("bundle.json"), &bundle_file)?;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "n": seed.n,
        "ping_pong_certificate": certificate,
        "iterations": { "a": diag.a.iterations, "c": diag.c.iterations },
        "conjugacy_residuals": conjugacy,
        "diagnostics": diag,
        "pass": pass,
    });
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Construction("a construction-time assertion failed".into()))
    }
}

/// On-disk layout of bundle.json.
#[derive(Deserialize)]
struct BundleFile {
    #[allow(dead_code)]
    schema_version: u32,
    a: PLMap,
    b: PLMap,
    c: PLMap,
    d: PLMap,
    iset0: Option<OpenSet>,
    iset1: Option<OpenSet>,
}

fn cmd_verify(cfg: &Config, path: &Path) -> Result<(), Failure> {
    cfg.validate().map_err(io_err)?;
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let file: BundleFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Io(format!("cannot parse bundle {}: {e}", path.display())))?;
    let bundle = ActionBundle { a: file.a, b: file.b, c: file.c, d: file.d };
    let sets = match (&file.iset0, &file.iset1) {
        (Some(i0), Some(i1)) => Some((i0, i1)),
        _ => None,
    };
    let report = circle_report(&bundle, cfg.grid, ROTATION_ITERATIONS, sets)
        .map_err(|e| Failure::Verification(e.to_string()))?;
    let sweep = if sets.is_some() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        Some(freeness_sweep(&bundle, 50, 8, cfg.grid, &mut rng))
    } else {
        None
    };

    let names = ["a", "b", "c", "d"];
    println!("{:<14} {:>14} {:>14} {:>8}", "generator", "commutation", "rotation", "fixed");
    for i in 0..4 {
        println!(
            "{:<14} {:>14.3e} {:>14.6} {:>8}",
            names[i],
            report.commutation_residuals[i],
            report.rotation_numbers[i],
            report.fixed_intervals[i].len()
        );
    }
    for (i, r) in report.relator_residuals.iter().enumerate() {
        println!("relator {i} word residual: {r:.3e}");
    }
    println!("min-max displacement: {:.3e}", report.min_max_displacement);
    if let Some(p) = report.ping_pong {
        println!("ping-pong certificate: {p}");
    }
    if let Some(s) = &sweep {
        println!("freeness sweep: {} words, min displacement {:.3e}", s.words, s.min_displacement);
    }

    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "report": report,
        "freeness": sweep,
    });
    write_json(&cfg.out.join("report.json"), &out)?;

    let commutation_ok = report.commutation_residuals.iter().all(|r| *r < 1e-10);
    let displaced = report.min_max_displacement > 0.0;
    let certificate_ok = report.ping_pong != Some(false);
    let relators_ok = report.relator_residuals.iter().all(|r| *r < 1e-2);
    let sweep_ok = sweep.map_or(true, |s| s.all_nontrivial);
    if commutation_ok && displaced && certificate_ok && relators_ok && sweep_ok {
        Ok(())
    } else {
        Err(Failure::Verification("a verification check failed".into()))
    }
}

fn cmd_sample(
    cfg: &Config,
    map: &str,
    bundle: Option<&Path>,
    from: f64,
    to: f64,
    points: usize,
) -> Result<(), Failure> {
    cfg.validate().map_err(io_err)?;
    if !(to > from) || points < 2 {
        return Err(Failure::Io("sample range must be increasing with at least 2 points".into()));
    }
    let resolved: PLMap = match map {
        "a" | "b" | "c" | "d" => {
            let path = bundle
                .ok_or_else(|| Failure::Io(format!("map '{map}' requires --bundle")))?;
            let text = std::fs::read_to_string(path).map_err(io_err)?;
            let file: BundleFile = serde_json::from_str(&text)
                .map_err(|e| Failure::Io(format!("cannot parse bundle {}: {e}", path.display())))?;
            match map {
                "a" => file.a,
                "b" => file.b,
                "c" => file.c,
                _ => file.d,
            }
        }
        "psi" => build_psi(),
        "beta0" | "beta1" | "a0" | "c0" => {
            let seed = build_seed_from(cfg)?;
            match map {
                "beta0" => seed.beta0,
                "beta1" => seed.beta1,
                "a0" => seed.a0,
                _ => seed.c0,
            }
        }
        other => return Err(Failure::Io(format!("unknown map name '{other}'"))),
    };

    let mut csv = String::from("x,y\n");
    for i in 0..points {
        let x = from + (to - from) * i as f64 / (points - 1) as f64;
        csv.push_str(&format!("{x},{}\n", resolved.eval(x)));
    }
    let path = cfg.out.join(format!("{map}.csv"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    std::fs::write(&path, csv).map_err(io_err)?;
    println!("wrote {} samples of {map} to {}", points, path.display());
    Ok(())
}

fn cmd_family(cfg: &Config) -> Result<(), Failure> {
    cfg.validate().map_err(io_err)?;
    let eps = SignSequence::parse(&cfg.seq_eps).map_err(io_err)?;
    let delta = SignSequence::parse(&cfg.seq_delta).map_err(io_err)?;
    let seed = build_seed_from(cfg)?;
    let (bundle, rep) = run_family(
        &seed,
        &eps,
        &delta,
        cfg.window as usize,
        cfg.max_iter,
        cfg.tol,
        cfg.grid,
    )
    .map_err(|e| Failure::Construction(e.to_string()))?;

    println!("tiles per period: {}", rep.m);
    println!("converged: {} (a: {} steps, c: {} steps)", rep.converged, rep.a_diag_steps, rep.c_diag_steps);
    match rep.common_period {
        Some(p) => println!("common period: {p} (commutation residual {:.3e})", rep.period_commutation.unwrap_or(f64::NAN)),
        None => println!("common period: none (no circle projection)"),
    }
    for (i, r) in rep.conjugacy_residuals.iter().enumerate() {
        println!("relation {i} two-sided residual: {r:.3e}");
    }

    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "eps": eps,
        "delta": delta,
        "report": rep,
        "bundle": { "a": bundle.a, "b": bundle.b, "c": bundle.c, "d": bundle.d },
    });
    write_json(&cfg.out.join("family.json"), &out)?;

    let residual_limit = 100.0 * cfg.tol;
    let residuals_ok = rep.conjugacy_residuals.iter().all(|r| *r < residual_limit);
    if rep.converged && residuals_ok {
        Ok(())
    } else {
        Err(Failure::Verification("family relations exceed tolerance".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.opts.config();
    let result = match &cli.cmd {
        Cmd::Build => cmd_build(&cfg),
        Cmd::Verify { bundle } => cmd_verify(&cfg, bundle),
        Cmd::Sample { map, bundle, from, to, points } => {
            cmd_sample(&cfg, map, bundle.as_deref(), *from, *to, *points)
        }
        Cmd::Family => cmd_family(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
