//! Scenario configuration and the operations behind the command-line tool:
//! modulation-variance optimization, parameter scans, figure-data
//! generation, epsilon-budget splitting, and estimation from data files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{estimate_channel, EstimationOutcome};
use crate::finite_size::{
    delta_n, delta_n_raw, expected_keyrate, keyrate_from_estimates, BlockPlan, KeyRateReport,
    SecurityBudget,
};
use crate::gaussian::ChannelModel;
use crate::modulation::{Modulation, ProtocolSpec};

/// Search window for the modulation variance, in log10 units.
const VA_LOG_MIN: f64 = -2.0;
const VA_LOG_MAX: f64 = 2.0;

/// Relative tolerance on the optimized modulation variance.
const VA_REL_TOL: f64 = 1e-3;

/// Coarse pre-scan resolution preceding the golden-section refinement.
const VA_COARSE_POINTS: usize = 33;

/// Ratio grid for the smoothing / privacy-amplification split: one decade
/// each side of the even split. The penalty Delta(n) depends on the split
/// only logarithmically, so a wider grid buys nothing.
const EPS_SPLIT_RATIO_DECADES: f64 = 1.0;
const EPS_SPLIT_POINTS: usize = 21;

/// A complete operating point of the protocol. Optional fields fall back to
/// the standard defaults at evaluation time.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub scheme: Modulation,
    /// Modulation variance; `None` requests optimization.
    pub va: Option<f64>,
    /// Fiber distance in km; mutually exclusive with `transmission`.
    pub dist_km: Option<f64>,
    /// Total transmission (including detector efficiency).
    pub transmission: Option<f64>,
    pub xi: f64,
    pub eta: f64,
    /// Total number of exchanged signals N.
    pub n_total: Option<u64>,
    /// Fraction of N disclosed for parameter estimation.
    pub est_fraction: f64,
    pub budget: SecurityBudget,
    pub beta: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            scheme: Modulation::FourState,
            va: None,
            dist_km: None,
            transmission: None,
            xi: 0.005,
            eta: 0.6,
            n_total: None,
            est_fraction: 0.5,
            budget: SecurityBudget::defaults(),
            beta: 0.8,
            seed: 42,
        }
    }
}

impl Scenario {
    pub const DEFAULT_N_TOTAL: u64 = 10_000_000_000;

    pub fn n_total_or_default(&self) -> u64 {
        self.n_total.unwrap_or(Self::DEFAULT_N_TOTAL)
    }

    /// The channel implied by the distance or transmission setting.
    pub fn channel(&self) -> Result<ChannelModel> {
        match (self.dist_km, self.transmission) {
            (Some(_), Some(_)) => Err(Error::domain(
                "give either a distance or a transmission, not both".to_string(),
            )),
            (Some(d), None) => ChannelModel::from_distance(self.eta, d, self.xi),
            (None, Some(t)) => ChannelModel::from_transmission(t, self.eta, self.xi),
            (None, None) => Err(Error::domain(
                "the scenario needs a distance or a transmission".to_string(),
            )),
        }
    }

    pub fn plan(&self) -> Result<BlockPlan> {
        BlockPlan::split(self.n_total_or_default(), self.est_fraction)
    }

    /// `#`-prefixed metadata lines recorded at the top of every CSV output.
    pub fn metadata_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("# scheme={}", self.scheme.name())];
        match self.va {
            Some(va) => lines.push(format!("# va={va}")),
            None => lines.push("# va=optimize".to_string()),
        }
        if let Some(d) = self.dist_km {
            lines.push(format!("# distance_km={d}"));
        }
        if let Some(t) = self.transmission {
            lines.push(format!("# transmission={t}"));
        }
        lines.push(format!("# xi={}", self.xi));
        lines.push(format!("# eta={}", self.eta));
        lines.push(format!("# N={}", self.n_total_or_default()));
        lines.push(format!("# m_fraction={}", self.est_fraction));
        lines.push(format!("# beta={}", self.beta));
        lines.push(format!(
            "# eps_pe={:e} eps_ec={:e} eps_bar={:e} eps_pa={:e}",
            self.budget.eps_pe(),
            self.budget.eps_ec(),
            self.budget.eps_bar(),
            self.budget.eps_pa()
        ));
        lines.push(format!("# seed={}", self.seed));
        lines
    }
}

/// Result of the modulation-variance search.
#[derive(Debug, Clone, Copy)]
pub struct VaOptimum {
    /// Optimal variance; NaN when no candidate was even evaluable.
    pub va: f64,
    /// Key-rate report at the optimum; `None` when every candidate failed
    /// the physicality checks (estimation too weak at any variance).
    pub report: Option<KeyRateReport>,
    /// The search ended on the edge of the [1e-2, 1e2] window.
    pub at_boundary: bool,
}

impl VaOptimum {
    pub fn rate(&self) -> f64 {
        self.report.map_or(f64::NEG_INFINITY, |r| r.rate)
    }

    /// False means "no positive key" at any modulation variance.
    pub fn positive(&self) -> bool {
        self.rate() > 0.0
    }
}

/// Maximizes the finite-size key rate over log V_A in [1e-2, 1e2] with a
/// coarse scan followed by golden-section refinement (relative tolerance
/// 1e-3 on V_A). Candidates whose worst-case covariance is unphysical count
/// as negatively infinite.
pub fn optimize_va(
    scheme: Modulation,
    ch: &ChannelModel,
    plan: &BlockPlan,
    budget: &SecurityBudget,
    beta: f64,
) -> Result<VaOptimum> {
    let eval = |log_va: f64| -> Result<(f64, Option<KeyRateReport>)> {
        let spec = ProtocolSpec::new(scheme, 10f64.powf(log_va))?;
        match expected_keyrate(&spec, ch, plan, budget, beta) {
            Ok(report) => Ok((report.rate, Some(report))),
            Err(Error::Unphysical(_)) => Ok((f64::NEG_INFINITY, None)),
            Err(e) => Err(e),
        }
    };

    let mut best_idx = 0;
    let mut best = (f64::NEG_INFINITY, None);
    let step = (VA_LOG_MAX - VA_LOG_MIN) / (VA_COARSE_POINTS - 1) as f64;
    for i in 0..VA_COARSE_POINTS {
        let candidate = eval(VA_LOG_MIN + step * i as f64)?;
        if candidate.0 > best.0 {
            best = candidate;
            best_idx = i;
        }
    }
    if best.1.is_none() {
        return Ok(VaOptimum { va: f64::NAN, report: None, at_boundary: false });
    }

    // golden-section refinement between the neighbors of the coarse optimum
    let mut lo = VA_LOG_MIN + step * best_idx.saturating_sub(1) as f64;
    let mut hi = (VA_LOG_MIN + step * (best_idx + 1) as f64).min(VA_LOG_MAX);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let tol = (1.0 + VA_REL_TOL).log10();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > tol {
        if f1.0 >= f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (log_opt, opt) = if f1.0 >= f2.0 { (x1, f1) } else { (x2, f2) };
    let (log_opt, opt) = if opt.0 >= best.0 {
        (log_opt, opt)
    } else {
        (VA_LOG_MIN + step * best_idx as f64, best)
    };
    Ok(VaOptimum {
        va: 10f64.powf(log_opt),
        report: opt.1,
        at_boundary: log_opt - VA_LOG_MIN < step || VA_LOG_MAX - log_opt < step,
    })
}

/// Which scenario parameter a scan sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Distance,
    BlockLength,
    Xi,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::Distance => "distance_km",
            ScanAxis::BlockLength => "blocklength",
            ScanAxis::Xi => "xi",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distance" | "distance_km" | "distance-km" => Ok(ScanAxis::Distance),
            "blocklength" | "block-length" | "n" => Ok(ScanAxis::BlockLength),
            "xi" | "excess-noise" => Ok(ScanAxis::Xi),
            other => Err(Error::domain(format!("unknown scan axis `{other}`"))),
        }
    }
}

/// Grid of axis values, linear or logarithmic.
#[derive(Debug, Clone, Copy)]
pub struct ScanGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log: bool,
}

impl ScanGrid {
    pub fn new(min: f64, max: f64, points: usize, log: bool) -> Result<Self> {
        if points == 0 {
            return Err(Error::domain("grid needs at least one point".to_string()));
        }
        if !(min <= max) {
            return Err(Error::domain(format!("grid bounds out of order: {min} > {max}")));
        }
        if log && min <= 0.0 {
            return Err(Error::domain("logarithmic grid requires positive bounds".to_string()));
        }
        Ok(ScanGrid { min, max, points, log })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let f = i as f64 / n;
                if self.log {
                    10f64.powf(self.min.log10() + f * (self.max.log10() - self.min.log10()))
                } else {
                    self.min + f * (self.max - self.min)
                }
            })
            .collect()
    }
}

/// One evaluated grid point of a scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub axis_value: f64,
    pub va: f64,
    pub i_xy: f64,
    pub chi_worst: f64,
    pub delta_n: f64,
    pub rate: f64,
}

fn row_from_optimum(axis_value: f64, plan: &BlockPlan, budget: &SecurityBudget, opt: &VaOptimum) -> ScanRow {
    match opt.report {
        Some(r) => ScanRow {
            axis_value,
            va: opt.va,
            i_xy: r.i_xy,
            chi_worst: r.chi_ye,
            delta_n: r.delta_n,
            rate: r.rate,
        },
        None => ScanRow {
            axis_value,
            va: f64::NAN,
            i_xy: f64::NAN,
            chi_worst: f64::NAN,
            delta_n: delta_n(plan, budget),
            rate: f64::NEG_INFINITY,
        },
    }
}

/// Evaluates one grid point: the scenario with the axis value substituted,
/// the modulation variance either fixed or optimized.
fn scan_point(sc: &Scenario, axis: ScanAxis, value: f64) -> Result<ScanRow> {
    let mut point = sc.clone();
    match axis {
        ScanAxis::Distance => {
            point.transmission = None;
            point.dist_km = Some(value);
        }
        ScanAxis::BlockLength => {
            if !(value >= 2.0) {
                return Err(Error::domain(format!("block length {value} too small")));
            }
            point.n_total = Some(value.round() as u64);
        }
        ScanAxis::Xi => {
            point.xi = value;
        }
    }
    let ch = point.channel()?;
    let plan = point.plan()?;
    let opt = match point.va {
        Some(va) => {
            let spec = ProtocolSpec::new(point.scheme, va)?;
            match expected_keyrate(&spec, &ch, &plan, &point.budget, point.beta) {
                Ok(report) => VaOptimum { va, report: Some(report), at_boundary: false },
                Err(Error::Unphysical(_)) => {
                    VaOptimum { va, report: None, at_boundary: false }
                }
                Err(e) => return Err(e),
            }
        }
        None => optimize_va(point.scheme, &ch, &plan, &point.budget, point.beta)?,
    };
    Ok(row_from_optimum(value, &plan, &point.budget, &opt))
}

/// Sweeps the axis over the grid. Points run in parallel; rows come back in
/// grid order.
pub fn scan(sc: &Scenario, axis: ScanAxis, grid: &ScanGrid) -> Result<Vec<ScanRow>> {
    grid.values()
        .par_iter()
        .map(|&v| scan_point(sc, axis, v))
        .collect()
}

/// Splits the residual eps_total - eps_PE - eps_EC between the smoothing
/// parameter and the privacy-amplification failure probability, minimizing
/// Delta(n) over a log grid of ratios (one decade around the even split).
pub fn epsilon_split(
    plan: &BlockPlan,
    eps_total: f64,
    eps_pe: f64,
    eps_ec: f64,
) -> Result<(f64, f64)> {
    let residual = eps_total - eps_pe - eps_ec;
    if !(residual > 0.0) {
        return Err(Error::Budget(format!(
            "no residual failure probability left to split: \
             eps_total={eps_total}, eps_pe={eps_pe}, eps_ec={eps_ec}"
        )));
    }
    let mut best = (f64::INFINITY, residual / 2.0, residual / 2.0);
    for i in 0..EPS_SPLIT_POINTS {
        let exp = -EPS_SPLIT_RATIO_DECADES
            + 2.0 * EPS_SPLIT_RATIO_DECADES * i as f64 / (EPS_SPLIT_POINTS - 1) as f64;
        let ratio = 10f64.powf(exp);
        let eps_bar = residual * ratio / (1.0 + ratio);
        let eps_pa = residual / (1.0 + ratio);
        let d = delta_n_raw(plan.n_key(), plan.dim_key_alphabet(), eps_bar, eps_pa);
        if d < best.0 {
            best = (d, eps_bar, eps_pa);
        }
    }
    Ok((best.1, best.2))
}

/// Outcome of estimating the channel from a data file and pushing the
/// estimates through the key-rate pipeline.
#[derive(Debug, Clone, Copy)]
pub struct EstimateFileReport {
    pub outcome: EstimationOutcome,
    pub report: KeyRateReport,
    pub n_key: u64,
}

/// Reads two-column `x,y` CSV data (optional header, `#` comments), runs the
/// ML estimators and confidence bounds, and evaluates the finite-size rate
/// on the remaining n = N - m signals.
pub fn estimate_from_file(path: &Path, sc: &Scenario) -> Result<EstimateFileReport> {
    let text = std::fs::read_to_string(path)?;
    let (xs, ys) = parse_xy_csv(&text)?;
    let va = sc.va.ok_or_else(|| {
        Error::domain("estimation from a file requires an explicit modulation variance".to_string())
    })?;
    let spec = ProtocolSpec::new(sc.scheme, va)?;
    let outcome = estimate_channel(&xs, &ys, va, sc.budget.eps_pe())?;
    let m = outcome.m;
    let n_total = sc.n_total.unwrap_or(2 * m);
    if n_total <= m {
        return Err(Error::domain(format!(
            "total block size N={n_total} must exceed the {m} disclosed samples"
        )));
    }
    let plan = BlockPlan::new(n_total - m, m, 2)?;
    let report =
        keyrate_from_estimates(&spec, outcome.t_hat, outcome.sigma2_hat, &plan, &sc.budget, sc.beta)?;
    Ok(EstimateFileReport { outcome, report, n_key: plan.n_key() })
}

/// Parses `x,y` rows; an optional non-numeric first row is treated as a
/// header. Returns parse errors with 1-based line numbers.
fn parse_xy_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut saw_data_or_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(fx), Some(fy), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected two comma-separated columns, got `{line}`"),
            });
        };
        match (fx.parse::<f64>(), fy.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
                saw_data_or_header = true;
            }
            _ if !saw_data_or_header => {
                // header row
                saw_data_or_header = true;
            }
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("could not parse `{line}` as two numbers"),
                });
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::Parse { line: 1, msg: "file contains no data rows".to_string() });
    }
    Ok((xs, ys))
}

/// The smoothing-parameter values of the privacy-amplification figure.
/// Smaller eps_bar means a larger penalty, so the columns run from the
/// bottom curve (1e-6) to the top one (1e-10).
pub const FIG1_EPS_LIST: [f64; 5] = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// Channel losses (dB) of the effective-noise figure, bottom curve first.
pub const FIG2_LOSSES_DB: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

/// Block lengths of the key-rate figures.
pub const FIG34_BLOCK_LENGTHS: [u64; 4] =
    [100_000_000, 10_000_000_000, 1_000_000_000_000, 100_000_000_000_000];

/// Expected excess-noise values of the key-rate-vs-distance figure.
pub const FIG3_XI_LIST: [f64; 3] = [0.001, 0.005, 0.01];

/// Privacy-amplification penalty vs raw-key size, one column per
/// eps_bar = eps_PA value.
pub struct Fig1Row {
    pub n: u64,
    pub delta: [f64; 5],
}

pub fn figure1_rows(grid: &ScanGrid) -> Vec<Fig1Row> {
    grid.values()
        .iter()
        .map(|&nf| {
            let n = nf.round().max(1.0) as u64;
            let mut delta = [0.0; 5];
            for (j, &eps) in FIG1_EPS_LIST.iter().enumerate() {
                delta[j] = delta_n_raw(n, 2, eps, eps);
            }
            Fig1Row { n, delta }
        })
        .collect()
}

/// Effective excess noise vs sample count, one column per channel loss.
pub struct Fig2Row {
    pub m: u64,
    pub dxi: [f64; 4],
}

pub fn figure2_rows(grid: &ScanGrid, eps_pe: f64) -> Result<Vec<Fig2Row>> {
    grid.values()
        .iter()
        .map(|&mf| {
            let m = mf.round().max(1.0) as u64;
            let mut dxi = [0.0; 4];
            for (j, &db) in FIG2_LOSSES_DB.iter().enumerate() {
                let t = 10f64.powf(-db / 10.0);
                dxi[j] = crate::estimation::effective_excess_noise(t, m, eps_pe)?;
            }
            Ok(Fig2Row { m, dxi })
        })
        .collect()
}

/// Four-state key rate vs distance for each (N, xi) combination.
pub struct Fig3Row {
    pub n_total: u64,
    pub xi: f64,
    pub distance_km: f64,
    pub row: ScanRow,
}

pub fn figure3_rows(sc: &Scenario, grid: &ScanGrid) -> Result<Vec<Fig3Row>> {
    let mut combos = Vec::new();
    for &n in &FIG34_BLOCK_LENGTHS {
        for &xi in &FIG3_XI_LIST {
            for &d in &grid.values() {
                combos.push((n, xi, d));
            }
        }
    }
    combos
        .par_iter()
        .map(|&(n, xi, d)| {
            let mut point = sc.clone();
            point.scheme = Modulation::FourState;
            point.va = sc.va;
            point.n_total = Some(n);
            point.xi = xi;
            let row = scan_point(&point, ScanAxis::Distance, d)?;
            Ok(Fig3Row { n_total: n, xi, distance_km: d, row })
        })
        .collect()
}

/// Four-state vs eight-dimension key rate at xi = 0.005.
pub struct Fig4Row {
    pub scheme: Modulation,
    pub n_total: u64,
    pub distance_km: f64,
    pub row: ScanRow,
}

pub fn figure4_rows(sc: &Scenario, grid: &ScanGrid) -> Result<Vec<Fig4Row>> {
    let mut combos = Vec::new();
    for scheme in [Modulation::FourState, Modulation::EightDim] {
        for &n in &FIG34_BLOCK_LENGTHS {
            for &d in &grid.values() {
                combos.push((scheme, n, d));
            }
        }
    }
    combos
        .par_iter()
        .map(|&(scheme, n, d)| {
            let mut point = sc.clone();
            point.scheme = scheme;
            point.n_total = Some(n);
            point.xi = 0.005;
            let row = scan_point(&point, ScanAxis::Distance, d)?;
            Ok(Fig4Row { scheme, n_total: n, distance_km: d, row })
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes scan rows as CSV with scenario metadata in `#` comment lines.
pub fn write_scan_csv(
    out: &mut dyn Write,
    sc: &Scenario,
    axis: ScanAxis,
    rows: &[ScanRow],
) -> std::io::Result<()> {
    for line in sc.metadata_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "# axis={}", axis.name())?;
    writeln!(out, "{},va,i_xy,chi_worst,delta_n,rate", axis.name())?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.axis_value),
            fmt_f64(r.va),
            fmt_f64(r.i_xy),
            fmt_f64(r.chi_worst),
            fmt_f64(r.delta_n),
            fmt_f64(r.rate)
        )?;
    }
    Ok(())
}

pub fn write_figure1_csv(out: &mut dyn Write, rows: &[Fig1Row]) -> std::io::Result<()> {
    writeln!(out, "# figure=1 dim=2 (delta for eps_bar = eps_pa)")?;
    let mut header = String::from("n");
    for eps in FIG1_EPS_LIST {
        let _ = write!(header, ",delta_eps_{eps:.0e}");
    }
    writeln!(out, "{header}")?;
    for r in rows {
        let mut line = format!("{}", r.n);
        for d in r.delta {
            let _ = write!(line, ",{}", fmt_f64(d));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_figure2_csv(out: &mut dyn Write, eps_pe: f64, rows: &[Fig2Row]) -> std::io::Result<()> {
    writeln!(out, "# figure=2 eps_pe={eps_pe:e}")?;
    let mut header = String::from("m");
    for db in FIG2_LOSSES_DB {
        let _ = write!(header, ",dxi_{db:.0}db");
    }
    writeln!(out, "{header}")?;
    for r in rows {
        let mut line = format!("{}", r.m);
        for d in r.dxi {
            let _ = write!(line, ",{}", fmt_f64(d));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_figure3_csv(
    out: &mut dyn Write,
    sc: &Scenario,
    rows: &[Fig3Row],
) -> std::io::Result<()> {
    for line in sc.metadata_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "# figure=3 scheme=fourstate")?;
    writeln!(out, "n_total,xi,distance_km,va,i_xy,chi_worst,delta_n,rate")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n_total,
            fmt_f64(r.xi),
            fmt_f64(r.distance_km),
            fmt_f64(r.row.va),
            fmt_f64(r.row.i_xy),
            fmt_f64(r.row.chi_worst),
            fmt_f64(r.row.delta_n),
            fmt_f64(r.row.rate)
        )?;
    }
    Ok(())
}

pub fn write_figure4_csv(
    out: &mut dyn Write,
    sc: &Scenario,
    rows: &[Fig4Row],
) -> std::io::Result<()> {
    for line in sc.metadata_lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "# figure=4 xi=0.005")?;
    writeln!(out, "scheme,n_total,distance_km,va,i_xy,chi_worst,delta_n,rate")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.n_total,
            fmt_f64(r.distance_km),
            fmt_f64(r.row.va),
            fmt_f64(r.row.i_xy),
            fmt_f64(r.row.chi_worst),
            fmt_f64(r.row.delta_n),
            fmt_f64(r.row.rate)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_size::KeyStatus;

    fn scenario_50km() -> Scenario {
        Scenario {
            dist_km: Some(50.0),
            n_total: Some(10_000_000_000),
            ..Scenario::default()
        }
    }

    #[test]
    fn defaults_match_reference_parameters() {
        let sc = Scenario::default();
        assert_eq!(sc.beta, 0.8);
        assert_eq!(sc.eta, 0.6);
        assert_eq!(sc.est_fraction, 0.5);
        assert_eq!(sc.budget.eps_pe(), 1e-10);
        assert_eq!(sc.budget.eps_ec(), 1e-10);
        assert_eq!(sc.budget.eps_bar(), 1e-10);
        assert_eq!(sc.budget.eps_pa(), 1e-10);
    }

    #[test]
    fn channel_requires_exactly_one_of_distance_transmission() {
        let mut sc = Scenario::default();
        assert!(sc.channel().is_err());
        sc.dist_km = Some(10.0);
        assert!(sc.channel().is_ok());
        sc.transmission = Some(0.3);
        assert!(sc.channel().is_err());
    }

    #[test]
    fn optimum_is_positive_and_locally_maximal_at_50km() {
        // four-state, d=50 km, xi=0.005, N=1e10: a positive optimum exists
        let sc = scenario_50km();
        let ch = sc.channel().unwrap();
        let plan = sc.plan().unwrap();
        let opt = optimize_va(sc.scheme, &ch, &plan, &sc.budget, sc.beta).unwrap();
        assert!(opt.positive(), "rate {}", opt.rate());
        assert!(!opt.at_boundary, "va={}", opt.va);
        // perturbing the optimum by +/-10% decreases the rate
        for factor in [0.9, 1.1] {
            let spec = ProtocolSpec::new(sc.scheme, opt.va * factor).unwrap();
            let r = expected_keyrate(&spec, &ch, &plan, &sc.budget, sc.beta).unwrap();
            assert!(
                r.rate <= opt.rate() + 1e-9,
                "perturbed rate {} beats optimum {}",
                r.rate,
                opt.rate()
            );
        }
    }

    #[test]
    fn lossless_noiseless_rate_grows_to_boundary() {
        // T=1 (eta=1), xi=0: chi stays ~0, the rate increases with V_A and
        // the search saturates at the upper edge of the window
        let sc = Scenario {
            transmission: Some(1.0),
            eta: 1.0,
            xi: 0.0,
            n_total: Some(100_000_000_000_000),
            scheme: Modulation::Gaussian,
            ..Scenario::default()
        };
        let ch = sc.channel().unwrap();
        let plan = sc.plan().unwrap();
        let opt = optimize_va(sc.scheme, &ch, &plan, &sc.budget, sc.beta).unwrap();
        assert!(opt.at_boundary);
        assert!(opt.va > 50.0);
        assert!(opt.positive());
    }

    #[test]
    fn scan_grid_values() {
        let lin = ScanGrid::new(0.0, 10.0, 3, false).unwrap();
        assert_eq!(lin.values(), vec![0.0, 5.0, 10.0]);
        let log = ScanGrid::new(1.0, 100.0, 3, true).unwrap();
        let vals = log.values();
        assert!((vals[1] - 10.0).abs() < 1e-12);
        assert_eq!(log.values().len(), 3);
        assert!(ScanGrid::new(5.0, 1.0, 3, false).is_err());
        assert!(ScanGrid::new(0.0, 1.0, 3, true).is_err());
        let single = ScanGrid::new(7.0, 7.0, 1, false).unwrap();
        assert_eq!(single.values(), vec![7.0]);
    }

    #[test]
    fn singleton_scan_equals_direct_keyrate() {
        let sc = Scenario { va: Some(0.3), ..scenario_50km() };
        let grid = ScanGrid::new(50.0, 50.0, 1, false).unwrap();
        let rows = scan(&sc, ScanAxis::Distance, &grid).unwrap();
        assert_eq!(rows.len(), 1);
        let spec = ProtocolSpec::new(sc.scheme, 0.3).unwrap();
        let direct = expected_keyrate(
            &spec,
            &sc.channel().unwrap(),
            &sc.plan().unwrap(),
            &sc.budget,
            sc.beta,
        )
        .unwrap();
        assert_eq!(rows[0].rate, direct.rate);
        assert_eq!(rows[0].chi_worst, direct.chi_ye);
    }

    #[test]
    fn scan_over_xi_is_monotone() {
        let sc = Scenario { va: Some(0.3), ..scenario_50km() };
        let grid = ScanGrid::new(0.001, 0.02, 5, false).unwrap();
        let rows = scan(&sc, ScanAxis::Xi, &grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].rate < w[0].rate);
        }
    }

    #[test]
    fn epsilon_split_behavior() {
        // n = 1e7: Delta barely depends on the split (< 5% across the grid)
        // and the argmin does at least as well as the even split
        let plan = BlockPlan::new(10_000_000, 0, 2).unwrap();
        let (eps_bar, eps_pa) = epsilon_split(&plan, 4.2e-10, 1e-10, 1e-10).unwrap();
        let residual = 2.2e-10;
        assert!((eps_bar + eps_pa - residual).abs() < 1e-22);
        let best = delta_n_raw(plan.n_key(), 2, eps_bar, eps_pa);
        let even = delta_n_raw(plan.n_key(), 2, residual / 2.0, residual / 2.0);
        assert!(best <= even);
        // flatness across the searched window
        let worst_corner = delta_n_raw(plan.n_key(), 2, residual / 11.0, residual * 10.0 / 11.0);
        assert!((worst_corner - best) / best < 0.05);
        // more residual can only help
        let (b2, p2) = epsilon_split(&plan, 8.2e-10, 1e-10, 1e-10).unwrap();
        assert!(delta_n_raw(plan.n_key(), 2, b2, p2) < best);
        // at a degenerate raw-key size the second term dominates the
        // marginal trade-off and the optimum tilts toward eps_pa
        let tiny = BlockPlan::new(4, 0, 2).unwrap();
        let (b, p) = epsilon_split(&tiny, 4.2e-10, 1e-10, 1e-10).unwrap();
        assert!(p > b, "expected the split to favor eps_pa, got ({b}, {p})");
        // no residual -> budget error
        assert!(matches!(
            epsilon_split(&plan, 2e-10, 1e-10, 1e-10),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn parse_xy_csv_variants() {
        let (xs, ys) = parse_xy_csv("x,y\n1.0,2.0\n3.0,4.0\n").unwrap();
        assert_eq!(xs, vec![1.0, 3.0]);
        assert_eq!(ys, vec![2.0, 4.0]);
        // no header, comments and blank lines
        let (xs, _) = parse_xy_csv("# comment\n\n0.5, -0.25\n").unwrap();
        assert_eq!(xs, vec![0.5]);
        // bad arity
        let err = parse_xy_csv("1.0,2.0,3.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        // bad number after data started
        let err = parse_xy_csv("1.0,2.0\nfoo,bar\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        // empty
        assert!(matches!(parse_xy_csv(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_xy_csv("# only comments\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn estimate_from_file_degenerate_noiseless() {
        // y = x: sigma2_hat = 0 is below shot noise; the worst-case
        // covariance must reject it with an unphysical-state error
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perfect.csv");
        let mut text = String::from("x,y\n");
        for i in 0..100 {
            let v = (i as f64 - 50.0) / 10.0;
            let _ = writeln!(text, "{v},{v}");
        }
        std::fs::write(&path, text).unwrap();
        let sc = Scenario { va: Some(1.0), ..scenario_50km() };
        let err = estimate_from_file(&path, &sc).unwrap_err();
        assert!(matches!(err, Error::Unphysical(_)), "got {err:?}");
    }

    #[test]
    fn estimate_from_file_matches_expected_bounds() {
        // a synthetic file drawn at known (t, sigma2) must reproduce the
        // expected-value bounds up to statistical fluctuation
        use crate::montecarlo::{sample_pairs, TrialConfig};
        let spec = ProtocolSpec::new(Modulation::Gaussian, 1.0).unwrap();
        let m = 200_000usize;
        let cfg = TrialConfig::new(0.5, 1.1, spec, m, 1, 99).unwrap();
        let (xs, ys) = sample_pairs(&cfg);
        let mut text = String::new();
        for (x, y) in xs.iter().zip(&ys) {
            let _ = writeln!(text, "{x},{y}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.csv");
        std::fs::write(&path, text).unwrap();
        let sc = Scenario {
            scheme: Modulation::Gaussian,
            va: Some(1.0),
            n_total: Some(2 * m as u64),
            ..Scenario::default()
        };
        let rep = estimate_from_file(&path, &sc).unwrap();
        // standard errors: se(t) = sigma/sqrt(m va), se(s2) = s2 sqrt(2/m)
        let se_t = (1.1f64 / (m as f64)).sqrt();
        let se_s2 = 1.1 * (2.0 / m as f64).sqrt();
        assert!((rep.outcome.t_hat - 0.5).abs() < 5.0 * se_t);
        assert!((rep.outcome.sigma2_hat - 1.1).abs() < 5.0 * se_s2);
        let ch = ChannelModel::from_transmission(0.25, 1.0, 0.4).unwrap();
        let expect =
            crate::estimation::expected_bounds(&ch, m as u64, 1.0, sc.budget.eps_pe()).unwrap();
        assert!((rep.outcome.t_min - expect.t_min).abs() < 5.0 * se_t);
        assert!((rep.outcome.sigma2_max - expect.sigma2_max).abs() < 5.0 * se_s2);
        assert!(!rep.outcome.below_gaussian_floor);
    }

    #[test]
    fn estimate_from_file_requires_va_and_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        let sc = Scenario { va: Some(1.0), ..Scenario::default() };
        assert!(matches!(estimate_from_file(&path, &sc), Err(Error::Parse { .. })));
        let sc_no_va = Scenario::default();
        std::fs::write(&path, "1.0,1.0\n2.0,2.0\n").unwrap();
        assert!(matches!(estimate_from_file(&path, &sc_no_va), Err(Error::Domain(_))));
    }

    #[test]
    fn figure1_rows_ordering() {
        let grid = ScanGrid::new(1e4, 1e10, 13, true).unwrap();
        let rows = figure1_rows(&grid);
        assert_eq!(rows.len(), 13);
        for r in &rows {
            // top to bottom: eps = 1e-6 smallest penalty? No: smaller eps
            // means a larger penalty, so delta increases along the list
            for w in r.delta.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
        // delta decreasing in n
        for w in rows.windows(2) {
            assert!(w[1].delta[4] < w[0].delta[4]);
        }
    }

    #[test]
    fn figure2_rows_ordering() {
        let grid = ScanGrid::new(1e6, 1e12, 13, true).unwrap();
        let rows = figure2_rows(&grid, 1e-10).unwrap();
        for r in &rows {
            // higher loss -> more noise: columns increase from 5 dB to 20 dB
            for w in r.dxi.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
        for w in rows.windows(2) {
            assert!(w[1].dxi[0] < w[0].dxi[0]);
        }
    }

    #[test]
    fn scan_csv_is_deterministic() {
        let sc = Scenario { va: Some(0.25), ..scenario_50km() };
        let grid = ScanGrid::new(10.0, 60.0, 4, false).unwrap();
        let rows = scan(&sc, ScanAxis::Distance, &grid).unwrap();
        let mut buf1 = Vec::new();
        write_scan_csv(&mut buf1, &sc, ScanAxis::Distance, &rows).unwrap();
        let rows2 = scan(&sc, ScanAxis::Distance, &grid).unwrap();
        let mut buf2 = Vec::new();
        write_scan_csv(&mut buf2, &sc, ScanAxis::Distance, &rows2).unwrap();
        assert_eq!(buf1, buf2);
        let text = String::from_utf8(buf1).unwrap();
        assert!(text.contains("distance_km,va,i_xy,chi_worst,delta_n,rate"));
        assert!(text.contains("# scheme=fourstate"));
    }

    #[test]
    fn blocklength_scan_hits_abort_for_small_n() {
        let sc = Scenario { dist_km: Some(50.0), ..Scenario::default() };
        let grid = ScanGrid::new(1e6, 1e10, 3, true).unwrap();
        let rows = scan(&sc, ScanAxis::BlockLength, &grid).unwrap();
        assert!(rows[0].rate <= 0.0, "N=1e6 should not distill at 50 km");
        assert!(rows[2].rate > 0.0, "N=1e10 should distill at 50 km");
    }

    #[test]
    fn keyrate_report_status_consistency() {
        let sc = Scenario { va: Some(0.25), ..scenario_50km() };
        let spec = ProtocolSpec::new(sc.scheme, 0.25).unwrap();
        let r = expected_keyrate(
            &spec,
            &sc.channel().unwrap(),
            &sc.plan().unwrap(),
            &sc.budget,
            sc.beta,
        )
        .unwrap();
        match r.status {
            KeyStatus::Distillable => assert!(r.rate > 0.0),
            KeyStatus::Abort => assert!(r.rate <= 0.0),
        }
    }
}
