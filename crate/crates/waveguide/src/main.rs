//! Command-line front end: one subcommand per experiment, deterministic
//! CSV/JSON output, exit codes 0 (success), 1 (validation), 2 (numerical
//! convergence), 3 (I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waveguide::bump::BumpSpec;
use waveguide::config::{self, Overlay};
use waveguide::error::{Error, Result};
use waveguide::expsum::{
    derivative_sum, exponential_sum, poisson_side, Phase, PhaseSpec,
};
use waveguide::grid::{make_cube, sample_on_cube};
use waveguide::norms::xpq_norm;
use waveguide::probe::{
    fit_exponent, main_ratio_opts, necessity_exponent, necessity_note, run_sweep, strong_ratio_opts,
    sweep_pair, FitField, Profile, Regime,
};
use waveguide::report::{emit_report, format_float, read_csv_rows, report_csv, Format};

#[derive(Parser)]
#[command(
    name = "waveguide",
    about = "Numerical experiments on bilinear space-time estimates for the \
             Schrödinger propagator on R x T",
    version
)]
struct Cli {
    /// Worker thread count (overrides the WAVEGUIDE_JOBS environment variable)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Report per-row failures and keep sweeping instead of exiting nonzero
    #[arg(long, global = true)]
    keep_going: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SweepFlags {
    /// Configuration file (flat TOML; flags override file values)
    #[arg(long)]
    config: Option<PathBuf>,

    /// theorem, appendixA, or counterexample
    #[arg(long)]
    regime: Option<String>,

    /// Lebesgue exponent (accepts fractions such as 12/7)
    #[arg(long, value_parser = parse_fraction)]
    p: Option<f64>,

    /// Cube sidelengths to sweep
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<u32>>,

    /// Time horizon(s); a list sweeps T in the counterexample regime
    #[arg(long = "T", value_delimiter = ',')]
    t: Option<Vec<f64>>,

    /// default (regime rule) or fixed (use --T)
    #[arg(long = "T-rule")]
    t_rule: Option<String>,

    /// Transversality multiple (support distance >= separation * delta)
    #[arg(long)]
    separation: Option<f64>,

    /// Lattice nodes per unit length
    #[arg(long)]
    resolution: Option<u32>,

    /// smooth or indicator
    #[arg(long)]
    profile: Option<String>,

    /// Counterexample interval-length constant
    #[arg(long)]
    c: Option<f64>,

    /// Recorded in report metadata for provenance
    #[arg(long)]
    seed: Option<u64>,

    /// Report destination (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,

    /// csv or json
    #[arg(long)]
    format: Option<String>,

    /// Evaluate ratios even where the regime guard fails (recorded)
    #[arg(long)]
    override_regime: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a single estimate ratio at one (delta, T)
    Probe {
        #[arg(long, default_value = "theorem")]
        regime: String,
        #[arg(long)]
        delta: u32,
        /// Time horizon (defaults to the regime rule)
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long, value_parser = parse_fraction, default_value = "12/7")]
        p: f64,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 8)]
        resolution: u32,
        #[arg(long, default_value = "smooth")]
        profile: String,
        #[arg(long)]
        override_regime: bool,
    },
    /// Sweep (delta, T) in the theorem or short-time regime and fit exponents
    Sweep(SweepFlags),
    /// Sweep T in the necessity example at fixed delta
    Counterexample(SweepFlags),
    /// Exponential-sum suites: nonstationary, derivative, or poisson
    Expsum {
        #[arg(long)]
        suite: String,
        #[arg(long, value_delimiter = ',', default_value = "256")]
        deltas: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        orders: Vec<u32>,
        /// Poisson-side mode cutoff
        #[arg(long, default_value_t = 16)]
        modes: u32,
    },
    /// Evaluate the cube-refinement norm of cube data
    Xnorm {
        #[arg(long)]
        delta: u32,
        #[arg(long, value_parser = parse_fraction, default_value = "12/7")]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 8)]
        resolution: u32,
        #[arg(long, default_value = "smooth")]
        profile: String,
    },
    /// Report the necessity exponent 8(p-2)/(4-p)
    Exponent {
        #[arg(long, value_parser = parse_fraction)]
        p: f64,
    },
    /// Re-fit a power law on an existing CSV report
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "delta")]
        x_field: String,
        #[arg(long, default_value = "ratio")]
        y_field: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        expected: f64,
    },
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
    match s.split_once('/') {
        Some((num, den)) => Ok(parse(num)? / parse(den)?),
        None => parse(s),
    }
}

fn init_jobs(flag: Option<usize>) {
    let jobs = flag.or_else(|| {
        std::env::var("WAVEGUIDE_JOBS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = jobs.filter(|&n| n > 0) {
        // ignore failure: the pool may already exist in test harnesses
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn overlay_from(flags: &SweepFlags) -> Overlay {
    Overlay {
        regime: flags.regime.clone(),
        p: flags.p,
        deltas: flags.deltas.clone(),
        t: flags.t.clone(),
        t_rule: flags.t_rule.clone(),
        separation: flags.separation,
        resolution: flags.resolution,
        profile: flags.profile.clone(),
        c: flags.c,
        seed: flags.seed,
        output: flags.output.clone(),
        format: flags.format.clone(),
        override_regime: flags.override_regime,
    }
}

fn run_probe(
    regime: &str,
    delta: u32,
    t: Option<f64>,
    p: f64,
    separation: f64,
    resolution: u32,
    profile: &str,
    override_regime: bool,
) -> Result<()> {
    let regime = Regime::from_label(regime)?;
    let profile = Profile::from_label(profile)?;
    let d = delta as f64;
    let t = t.unwrap_or(match regime {
        Regime::Theorem => 1.0 / (8.0 * d),
        _ => 1.0 / (8.0 * d * d),
    });
    let (f, g) = sweep_pair(delta, separation, resolution, profile)?;
    let (lhs, rhs, ratio) = match regime {
        Regime::StrongTime => strong_ratio_opts(&f, &g, delta, t, p, separation, override_regime)?,
        _ => main_ratio_opts(&f, &g, delta, t, p, separation, override_regime)?,
    };
    println!("delta = {delta}");
    println!("T = {}", format_float(t));
    println!("p = {}", format_float(p));
    println!("lhs = {}", format_float(lhs));
    println!("rhs = {}", format_float(rhs));
    println!("ratio = {}", format_float(ratio));
    if let Some(note) = necessity_note(p) {
        println!("note: {note}");
    }
    Ok(())
}

fn run_sweep_cmd(flags: &SweepFlags, counterexample: bool, keep_going: bool) -> Result<u8> {
    let mut overlay = overlay_from(flags);
    if counterexample && overlay.regime.is_none() {
        overlay.regime = Some("counterexample".to_string());
    }
    let resolved = config::resolve(flags.config.as_deref(), &overlay)?;
    let report = run_sweep(&resolved.probe)?;
    match &resolved.output {
        Some(path) => emit_report(&report, resolved.format, path)?,
        None => match resolved.format {
            Format::Csv => print!("{}", report_csv(&report)),
            Format::Json => print!("{}", waveguide::report::report_json(&report)),
        },
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if let Some(fit) = &report.fitted {
        eprintln!(
            "fit: exponent = {} (expected {}), constant = {}, max residual = {}",
            format_float(fit.exponent),
            format_float(fit.expected_exponent),
            format_float(fit.constant),
            format_float(fit.max_residual),
        );
    }
    for err in &report.errors {
        eprintln!("row failure: {err}");
    }
    if !report.errors.is_empty() && !keep_going {
        return Ok(2);
    }
    Ok(0)
}

fn kappa() -> BumpSpec {
    BumpSpec::generic(0.0, 1.0, 1.0)
}

fn run_expsum(
    suite: &str,
    deltas: &[u32],
    lambdas: &[f64],
    orders: &[u32],
    modes: u32,
) -> Result<()> {
    match suite {
        // |sum_n e^{2 pi i (lambda/delta) n} kappa(n/delta)| against the
        // bound delta / lambda^N for every requested N
        "nonstationary" => {
            println!("delta,lambda,N,normalized");
            for &delta in deltas {
                for &lambda in lambdas {
                    let spec = PhaseSpec::new(
                        Phase::linear(lambda / delta as f64),
                        kappa(),
                        delta,
                        lambda,
                    )?;
                    spec.validate_slope_bracket()?;
                    let s = exponential_sum(&spec).norm();
                    for &n in orders {
                        let normalized = s * lambda.powi(n as i32) / delta as f64;
                        println!("{delta},{lambda},{n},{}", format_float(normalized));
                    }
                }
            }
        }
        // |sum_n (e^{2 pi i P})^(N)(n) kappa(n/delta)| * delta^{N-1} for a
        // scale-consistent small-slope quadratic family
        "derivative" => {
            println!("delta,N,normalized");
            for &delta in deltas {
                let d = delta as f64;
                let spec = PhaseSpec::new(
                    Phase::quadratic(1.0 / (16.0 * d), 1.0 / (32.0 * d * d)),
                    kappa(),
                    delta,
                    1.0,
                )?;
                for &n in orders {
                    let s = derivative_sum(&spec, n)?.norm();
                    let normalized = s * d.powi(n as i32 - 1);
                    println!("{delta},{n},{}", format_float(normalized));
                }
            }
        }
        // direct sum vs truncated Poisson side
        "poisson" => {
            println!("delta,lambda,direct,poisson,rel_error");
            for &delta in deltas {
                for &lambda in lambdas {
                    let spec = PhaseSpec::new(
                        Phase::linear(lambda / delta as f64),
                        kappa(),
                        delta,
                        lambda,
                    )?;
                    spec.validate_slope_bracket()?;
                    let direct = exponential_sum(&spec);
                    let poisson = poisson_side(&spec, modes)?;
                    let rel = (direct - poisson).norm() / direct.norm().max(f64::MIN_POSITIVE);
                    println!(
                        "{delta},{lambda},{},{},{}",
                        format_float(direct.norm()),
                        format_float(poisson.norm()),
                        format_float(rel),
                    );
                }
            }
        }
        other => {
            return Err(Error::InvalidParameter {
                key: "suite".into(),
                message: format!(
                    "unknown suite {other:?} (expected nonstationary, derivative, or poisson)"
                ),
            })
        }
    }
    Ok(())
}

fn run_xnorm(delta: u32, p: f64, q: f64, resolution: u32, profile: &str) -> Result<()> {
    let profile = Profile::from_label(profile)?;
    let theta = make_cube(0, 0, delta)?;
    let d = delta as f64;
    let margin = 0.1 * d;
    let f = sample_on_cube(
        &theta,
        |xi, mode| {
            let amp = match profile {
                Profile::Indicator => 1.0,
                Profile::Smooth => {
                    waveguide::bump::inner_cutoff(xi, 0.0, d, margin)
                        * waveguide::bump::inner_cutoff(
                            mode as f64,
                            -0.5,
                            d + 0.5,
                            margin,
                        )
                }
            };
            num_complex::Complex64::new(amp, 0.0)
        },
        resolution,
    )?;
    let value = xpq_norm(&f, p, q)?;
    println!("xnorm = {}", format_float(value));
    Ok(())
}

fn run_report(input: &PathBuf, x_field: &str, y_field: &str, expected: f64) -> Result<()> {
    let rows = read_csv_rows(input)?;
    let fit = fit_exponent(
        &rows,
        FitField::from_label(x_field)?,
        FitField::from_label(y_field)?,
        expected,
    )?;
    println!("exponent = {}", format_float(fit.exponent));
    println!("expected = {}", format_float(fit.expected_exponent));
    println!("constant = {}", format_float(fit.constant));
    println!("max_residual = {}", format_float(fit.max_residual));
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Probe {
            regime,
            delta,
            t,
            p,
            separation,
            resolution,
            profile,
            override_regime,
        } => {
            run_probe(
                regime,
                *delta,
                *t,
                *p,
                *separation,
                *resolution,
                profile,
                *override_regime,
            )?;
            Ok(0)
        }
        Command::Sweep(flags) => run_sweep_cmd(flags, false, cli.keep_going),
        Command::Counterexample(flags) => run_sweep_cmd(flags, true, cli.keep_going),
        Command::Expsum {
            suite,
            deltas,
            lambdas,
            orders,
            modes,
        } => {
            run_expsum(suite, deltas, lambdas, orders, *modes)?;
            Ok(0)
        }
        Command::Xnorm {
            delta,
            p,
            q,
            resolution,
            profile,
        } => {
            run_xnorm(*delta, *p, *q, *resolution, profile)?;
            Ok(0)
        }
        Command::Exponent { p } => {
            let value = necessity_exponent(*p)?;
            println!("c(p) = {}", format_float(value));
            if let Some(note) = necessity_note(*p) {
                println!("note: {note}");
            }
            Ok(0)
        }
        Command::Report {
            input,
            x_field,
            y_field,
            expected,
        } => {
            run_report(input, x_field, y_field, *expected)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_jobs(cli.jobs);
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
