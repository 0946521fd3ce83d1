//! Command-line interface: key-rate evaluation, parameter scans, figure-data
//! reproduction, Monte Carlo validation, and estimation from data files.
//!
//! Exit codes: 0 on success, 2 on domain/validation errors, 3 on I/O or
//! parse errors.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvqkd::error::{Error, Result};
use cvqkd::estimation::GAUSSIAN_APPROX_FLOOR;
use cvqkd::finite_size::{KeyStatus, SecurityBudget};
use cvqkd::modulation::Modulation;
use cvqkd::montecarlo::{coverage_experiment, estimator_distribution_check, TrialConfig};
use cvqkd::scenario::{
    epsilon_split, estimate_from_file, figure1_rows, figure2_rows, figure3_rows, figure4_rows,
    optimize_va, scan, write_figure1_csv, write_figure2_csv, write_figure3_csv, write_figure4_csv,
    write_scan_csv, ScanAxis, ScanGrid, Scenario, VaOptimum,
};
use cvqkd::ProtocolSpec;

#[derive(Parser)]
#[command(name = "cvqkd", version, about = "Finite-size CV-QKD secret-key-rate calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the finite-size key rate at one operating point.
    Keyrate(KeyrateArgs),
    /// Sweep distance, block length, or excess noise and emit CSV rows.
    Scan(ScanArgs),
    /// Reproduce the data behind one of the four reference figures.
    Figure(FigureArgs),
    /// Validate estimator laws and confidence-region coverage by Monte Carlo.
    McValidate(McValidateArgs),
    /// Estimate the channel from an x,y data file and compute the key rate.
    Estimate(EstimateArgs),
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Modulation scheme: gaussian | twostate | fourstate | eightdim.
    #[arg(long)]
    scheme: Option<String>,
    /// Alice's modulation variance (shot-noise units); omit to optimize.
    #[arg(long)]
    va: Option<f64>,
    /// Fiber distance in km (0.2 dB/km).
    #[arg(long)]
    distance_km: Option<f64>,
    /// Total channel transmission including detector efficiency.
    #[arg(long)]
    transmission: Option<f64>,
    /// Excess noise at the channel input, shot-noise units.
    #[arg(long)]
    xi: Option<f64>,
    /// Total number of exchanged signals N.
    #[arg(long = "N")]
    n_total: Option<f64>,
    /// Fraction of N disclosed for parameter estimation.
    #[arg(long)]
    m_fraction: Option<f64>,
    /// Reconciliation efficiency beta.
    #[arg(long)]
    beta: Option<f64>,
    /// Detector quantum efficiency eta.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eps_pe: Option<f64>,
    #[arg(long)]
    eps_ec: Option<f64>,
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long)]
    eps_pa: Option<f64>,
    /// Seed of all randomized operations.
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct KeyrateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Re-split eps_bar/eps_pa to minimize Delta(n) before evaluating.
    #[arg(long)]
    optimize_eps_split: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Scan axis: distance | blocklength | xi.
    #[arg(long)]
    axis: String,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Space the grid logarithmically (default for blocklength).
    #[arg(long)]
    grid_log: bool,
}

#[derive(Args)]
struct FigureArgs {
    /// Which figure to reproduce (1-4).
    figure: u8,
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args)]
struct McValidateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Samples per synthetic trial.
    #[arg(long, default_value_t = 10_000)]
    mc_m: usize,
    /// Trials for the estimator-law check.
    #[arg(long, default_value_t = 2_000)]
    mc_trials: usize,
    /// Trials for the coverage experiment.
    #[arg(long, default_value_t = 10_000)]
    coverage_trials: usize,
    /// Desk-scale failure probability for the coverage experiment
    /// (sampling cannot resolve the production value of 1e-10).
    #[arg(long, default_value_t = 0.05)]
    desk_eps: f64,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Two-column x,y CSV file of disclosed sample pairs.
    #[arg(long)]
    data: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keyrate(args) => run_keyrate(args),
        Command::Scan(args) => run_scan(args),
        Command::Figure(args) => run_figure(args),
        Command::McValidate(args) => run_mc_validate(args),
        Command::Estimate(args) => run_estimate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Parse { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

/// Values from a key=value config file, keyed by flag name.
fn load_config(path: &Path) -> Result<HashMap<String, String>> {
    const KNOWN: [&str; 15] = [
        "scheme", "va", "distance-km", "transmission", "xi", "N", "m-fraction", "beta", "eta",
        "eps-pe", "eps-ec", "eps-bar", "eps-pa", "seed", "out",
    ];
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected key=value, got `{line}`"),
            });
        };
        let key = key.trim();
        if !KNOWN.contains(&key) {
            return Err(Error::Parse { line: idx + 1, msg: format!("unknown key `{key}`") });
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(cfg: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Domain(format!("config value `{raw}` invalid for `{key}`"))),
    }
}

fn parse_n_total(v: f64) -> Result<u64> {
    if !(2.0..=9.0e18).contains(&v) {
        return Err(Error::Domain(format!("N must lie in [2, 9e18], got {v}")));
    }
    Ok(v.round() as u64)
}

/// Builds the scenario from flags over config over defaults.
fn build_scenario(common: &CommonOpts) -> Result<(Scenario, Option<PathBuf>)> {
    let cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => HashMap::new(),
    };
    let defaults = Scenario::default();

    let scheme = match common.scheme.clone().or(config_get(&cfg, "scheme")?) {
        Some(name) => Modulation::from_name(&name)?,
        None => defaults.scheme,
    };
    let budget = SecurityBudget::new(
        common.eps_pe.or(config_get(&cfg, "eps-pe")?).unwrap_or(1e-10),
        common.eps_ec.or(config_get(&cfg, "eps-ec")?).unwrap_or(1e-10),
        common.eps_bar.or(config_get(&cfg, "eps-bar")?).unwrap_or(1e-10),
        common.eps_pa.or(config_get(&cfg, "eps-pa")?).unwrap_or(1e-10),
    )?;
    let n_total = match common.n_total.or(config_get(&cfg, "N")?) {
        Some(v) => Some(parse_n_total(v)?),
        None => None,
    };
    let scenario = Scenario {
        scheme,
        va: common.va.or(config_get(&cfg, "va")?),
        dist_km: common.distance_km.or(config_get(&cfg, "distance-km")?),
        transmission: common.transmission.or(config_get(&cfg, "transmission")?),
        xi: common.xi.or(config_get(&cfg, "xi")?).unwrap_or(defaults.xi),
        eta: common.eta.or(config_get(&cfg, "eta")?).unwrap_or(defaults.eta),
        n_total,
        est_fraction: common
            .m_fraction
            .or(config_get(&cfg, "m-fraction")?)
            .unwrap_or(defaults.est_fraction),
        budget,
        beta: common.beta.or(config_get(&cfg, "beta")?).unwrap_or(defaults.beta),
        seed: common.seed.or(config_get(&cfg, "seed")?).unwrap_or(defaults.seed),
    };
    let out = common.out.clone().or(config_get::<String>(&cfg, "out")?.map(PathBuf::from));
    Ok((scenario, out))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run_keyrate(args: KeyrateArgs) -> Result<ExitCode> {
    let (mut sc, out) = build_scenario(&args.common)?;
    if args.optimize_eps_split {
        let plan = sc.plan()?;
        let (eps_bar, eps_pa) = epsilon_split(
            &plan,
            sc.budget.total(),
            sc.budget.eps_pe(),
            sc.budget.eps_ec(),
        )?;
        sc.budget = sc.budget.with_split(eps_bar, eps_pa)?;
        println!("optimized split: eps_bar={eps_bar:.3e} eps_pa={eps_pa:.3e}");
    }
    let ch = sc.channel()?;
    let plan = sc.plan()?;
    let opt: VaOptimum = match sc.va {
        Some(va) => {
            let spec = ProtocolSpec::new(sc.scheme, va)?;
            let report = cvqkd::finite_size::expected_keyrate(&spec, &ch, &plan, &sc.budget, sc.beta)?;
            VaOptimum { va, report: Some(report), at_boundary: false }
        }
        None => optimize_va(sc.scheme, &ch, &plan, &sc.budget, sc.beta)?,
    };

    println!("scheme            : {}", sc.scheme.name());
    match sc.va {
        Some(va) => println!("va                : {va}"),
        None => println!("va (optimized)    : {}{}", opt.va, if opt.at_boundary { "  [search boundary]" } else { "" }),
    }
    println!("distance_km       : {}", ch.dist_km());
    println!("transmission      : {}", ch.t_lin());
    println!("xi                : {}", sc.xi);
    println!("N / n / m         : {} / {} / {}", plan.n_total(), plan.n_key(), plan.n_est());
    println!("epsilon total     : {:.3e}", sc.budget.total());
    match &opt.report {
        Some(r) => {
            println!("I(x:y)            : {} bits/use", r.i_xy);
            println!("chi_worst(y:E)    : {} bits/use", r.chi_ye);
            println!("Delta(n)          : {}", r.delta_n);
            println!("worst-case t      : {}", r.worst_t);
            println!("worst-case sigma2 : {}", r.worst_sigma2);
            println!("rate              : {} bits/use", r.rate);
            println!(
                "status            : {}",
                match r.status {
                    KeyStatus::Distillable => "distillable",
                    KeyStatus::Abort => "abort (no positive key)",
                }
            );
        }
        None => {
            println!("rate              : -inf");
            println!("status            : abort (estimation too weak at every va)");
        }
    }

    if out.is_some() {
        let mut w = open_out(&out)?;
        for line in sc.metadata_lines() {
            writeln!(w, "{line}")?;
        }
        writeln!(w, "va,i_xy,chi_worst,delta_n,rate,status")?;
        match &opt.report {
            Some(r) => writeln!(
                w,
                "{},{},{},{},{},{}",
                opt.va,
                r.i_xy,
                r.chi_ye,
                r.delta_n,
                r.rate,
                if r.status == KeyStatus::Distillable { "distillable" } else { "abort" }
            )?,
            None => writeln!(w, "nan,nan,nan,nan,-inf,abort")?,
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_scan(args: ScanArgs) -> Result<ExitCode> {
    let (sc, out) = build_scenario(&args.common)?;
    let axis = ScanAxis::from_name(&args.axis)?;
    let (dmin, dmax, dpoints, dlog) = match axis {
        ScanAxis::Distance => (0.0, 120.0, 25, false),
        ScanAxis::BlockLength => (1e6, 1e14, 9, true),
        ScanAxis::Xi => (0.001, 0.02, 11, false),
    };
    let grid = ScanGrid::new(
        args.grid_min.unwrap_or(dmin),
        args.grid_max.unwrap_or(dmax),
        args.grid_points.unwrap_or(dpoints),
        args.grid_log || dlog,
    )?;
    let rows = scan(&sc, axis, &grid)?;
    let mut w = open_out(&out)?;
    write_scan_csv(&mut w, &sc, axis, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn run_figure(args: FigureArgs) -> Result<ExitCode> {
    let (sc, out) = build_scenario(&args.common)?;
    let mut w = open_out(&out)?;
    match args.figure {
        1 => {
            let grid = ScanGrid::new(
                args.grid_min.unwrap_or(1e4),
                args.grid_max.unwrap_or(1e12),
                args.grid_points.unwrap_or(33),
                true,
            )?;
            write_figure1_csv(&mut w, &figure1_rows(&grid))?;
        }
        2 => {
            let grid = ScanGrid::new(
                args.grid_min.unwrap_or(1e6),
                args.grid_max.unwrap_or(1e12),
                args.grid_points.unwrap_or(25),
                true,
            )?;
            write_figure2_csv(&mut w, sc.budget.eps_pe(), &figure2_rows(&grid, sc.budget.eps_pe())?)?;
        }
        3 => {
            let grid = distance_grid(&args)?;
            write_figure3_csv(&mut w, &sc, &figure3_rows(&sc, &grid)?)?;
        }
        4 => {
            let grid = distance_grid(&args)?;
            write_figure4_csv(&mut w, &sc, &figure4_rows(&sc, &grid)?)?;
        }
        other => return Err(Error::Domain(format!("no figure {other}; pick 1-4"))),
    }
    Ok(ExitCode::SUCCESS)
}

fn distance_grid(args: &FigureArgs) -> Result<ScanGrid> {
    ScanGrid::new(
        args.grid_min.unwrap_or(0.0),
        args.grid_max.unwrap_or(120.0),
        args.grid_points.unwrap_or(25),
        false,
    )
}

fn run_mc_validate(args: McValidateArgs) -> Result<ExitCode> {
    let (sc, out) = build_scenario(&args.common)?;
    let ch = sc.channel()?;
    let va = sc.va.unwrap_or(1.0);
    let spec = ProtocolSpec::new(sc.scheme, va)?;
    let cfg = TrialConfig::new(ch.t_slope(), ch.sigma2(), spec, args.mc_m, args.mc_trials, sc.seed)?;

    println!(
        "estimator-law check: scheme={} va={} t={} sigma2={} m={} trials={} seed={}",
        sc.scheme.name(),
        va,
        ch.t_slope(),
        ch.sigma2(),
        args.mc_m,
        args.mc_trials,
        sc.seed
    );
    let rep = estimator_distribution_check(&cfg)?;
    if rep.gaussian_proxy {
        println!("note: no sample law is specified for this scheme; using the Gaussian proxy");
    }
    let level = 1e-3;
    let mut failed = false;
    let t_ok = rep.p_value_t > level;
    println!(
        "  t-hat law      : KS D={:.5} p={:.4} {}",
        rep.ks_stat_t,
        rep.p_value_t,
        if t_ok { "PASS" } else { "FAIL" }
    );
    let s_ok = rep.p_value_sigma2 > level;
    println!(
        "  sigma2-hat law : KS D={:.5} p={:.4} {}",
        rep.ks_stat_sigma2,
        rep.p_value_sigma2,
        if s_ok { "PASS" } else { "FAIL" }
    );
    let corr_bound = 5.0 / (args.mc_trials as f64).sqrt();
    let c_ok = rep.corr_t_sigma2.abs() < corr_bound;
    println!(
        "  independence   : corr={:+.5} (bound {:.5}) {}",
        rep.corr_t_sigma2,
        corr_bound,
        if c_ok { "PASS" } else { "FAIL" }
    );
    failed |= !(t_ok && s_ok && c_ok);

    let cov_cfg =
        TrialConfig::new(ch.t_slope(), ch.sigma2(), spec, args.mc_m, args.coverage_trials, sc.seed)?;
    let coverage = coverage_experiment(&cov_cfg, args.desk_eps)?;
    let sigma_binomial =
        (args.desk_eps * (1.0 - args.desk_eps) / args.coverage_trials as f64).sqrt();
    let floor = 1.0 - args.desk_eps - 3.0 * sigma_binomial;
    let cov_ok = coverage >= floor;
    println!(
        "coverage         : eps_pe={} trials={} coverage={:.4} floor={:.4} {}",
        args.desk_eps,
        args.coverage_trials,
        coverage,
        floor,
        if cov_ok { "PASS" } else { "FAIL" }
    );
    failed |= !cov_ok;
    if args.mc_m < GAUSSIAN_APPROX_FLOOR as usize {
        println!("note: m below {GAUSSIAN_APPROX_FLOOR}: chi-squared normal approximation degraded");
    }

    if out.is_some() {
        let mut w = open_out(&out)?;
        writeln!(w, "# mc-validate seed={} m={} trials={}", sc.seed, args.mc_m, args.mc_trials)?;
        writeln!(w, "check,statistic,p_value")?;
        writeln!(w, "ks_t,{},{}", rep.ks_stat_t, rep.p_value_t)?;
        writeln!(w, "ks_sigma2,{},{}", rep.ks_stat_sigma2, rep.p_value_sigma2)?;
        writeln!(w, "corr_t_sigma2,{},", rep.corr_t_sigma2)?;
        writeln!(w, "coverage,{coverage},")?;
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run_estimate(args: EstimateArgs) -> Result<ExitCode> {
    let (sc, out) = build_scenario(&args.common)?;
    let rep = estimate_from_file(&args.data, &sc)?;
    println!("samples (m)       : {}", rep.outcome.m);
    println!("t-hat             : {}", rep.outcome.t_hat);
    println!("sigma2-hat        : {}", rep.outcome.sigma2_hat);
    println!("t_min             : {}", rep.outcome.t_min);
    println!("sigma2_max        : {}", rep.outcome.sigma2_max);
    if rep.outcome.below_gaussian_floor {
        println!("warning           : m < {GAUSSIAN_APPROX_FLOOR}; chi-squared normal approximation degraded");
    }
    println!("raw key (n)       : {}", rep.n_key);
    println!("I(x:y)            : {} bits/use", rep.report.i_xy);
    println!("chi_worst(y:E)    : {} bits/use", rep.report.chi_ye);
    println!("Delta(n)          : {}", rep.report.delta_n);
    println!("rate              : {} bits/use", rep.report.rate);
    println!(
        "status            : {}",
        match rep.report.status {
            KeyStatus::Distillable => "distillable",
            KeyStatus::Abort => "abort (no positive key)",
        }
    );
    if out.is_some() {
        let mut w = open_out(&out)?;
        for line in sc.metadata_lines() {
            writeln!(w, "{line}")?;
        }
        writeln!(w, "m,t_hat,sigma2_hat,t_min,sigma2_max,n_key,i_xy,chi_worst,delta_n,rate")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            rep.outcome.m,
            rep.outcome.t_hat,
            rep.outcome.sigma2_hat,
            rep.outcome.t_min,
            rep.outcome.sigma2_max,
            rep.n_key,
            rep.report.i_xy,
            rep.report.chi_ye,
            rep.report.delta_n,
            rep.report.rate
        )?;
    }
    Ok(ExitCode::SUCCESS)
}
