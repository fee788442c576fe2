//! Subcommand implementations.

use crate::args::{ObsArgs, QuasiArgs, RegArgs, ScenarioArgs, SynthArgs};
use crate::manifest::Run;
use clap::{Args, ValueEnum};
use fracid::bounds::{
    bounds_report, empirical_delta, estimate_norms, log_grid, BoundsRequest, ConstantsLedger, DeltaCurve, DeltaKind,
    H7Data, LedgerInputs, OrderBounds,
};
use fracid::pipeline::{
    ex74_leading_curve, reconstruct_observation, ReferenceTable, TABLE_DELTAS, TABLE_EX74, TABLE_FIP, TABLE_NOISES,
    TABLE_SIP,
};
use fracid::quasiopt::Selection;
use fracid::reconstruct::ParamPair;
use fracid::regression::tikhonov_fit;
use fracid::scenario::{builtin, observe, uniform_times, TrueParams, BUILTIN_NAMES};
use fracid::verify::{delta_suite, identity_suite, lemma_suite, oracle_suite, SuiteReport, DEFAULT_SEED};
use fracid::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// What a successful command reports back to `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn opt(x: Option<f64>, decimals: Option<usize>) -> String {
    x.map(|v| num(v, decimals)).unwrap_or_default()
}

fn num(v: f64, decimals: Option<usize>) -> String {
    match decimals {
        Some(d) => format!("{v:.d$}"),
        None => v.to_string(),
    }
}

#[derive(Args, Debug, Clone)]
pub struct ScenariosCmd {
    /// Print the full JSON definition of the selected scenario instead of the list.
    #[arg(long)]
    pub dump: bool,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScenarioSummary {
    name: String,
    terms: usize,
    orders: Vec<f64>,
    true_params: TrueParams,
}

pub fn scenarios(cmd: &ScenariosCmd, run: &mut Run) -> Result<Status> {
    if cmd.dump {
        let s = cmd.scenario.load_into(run)?;
        run.json(cmd.out.as_deref(), &s)?;
        return Ok(Status::Ok);
    }
    let list = BUILTIN_NAMES
        .iter()
        .map(|name| {
            let s = builtin(name, cmd.scenario.nu, None)?;
            Ok(ScenarioSummary { name: s.name.clone(), terms: s.fdo.terms().len(), orders: s.fdo.orders(), true_params: s.true_params })
        })
        .collect::<Result<Vec<_>>>()?;
    run.param("nu", cmd.scenario.nu)?;
    match cmd.format {
        Format::Json => run.json(cmd.out.as_deref(), &list),
        Format::Csv => {
            let rows = list.iter().map(|s| {
                let tp = &s.true_params;
                vec![
                    s.name.clone(),
                    format!("{:?}", tp.kind).to_lowercase(),
                    s.terms.to_string(),
                    tp.nu1.to_string(),
                    tp.second.to_string(),
                    tp.i_star.map(|i| i.to_string()).unwrap_or_default(),
                ]
            });
            let text = csv_text(&["name", "kind", "terms", "nu1", "second", "i_star"], rows)?;
            run.csv(cmd.out.as_deref(), &text)
        }
    }?;
    Ok(Status::Ok)
}

#[derive(Args, Debug, Clone)]
pub struct SynthCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn synth(cmd: &SynthCmd, run: &mut Run) -> Result<Status> {
    let s = cmd.scenario.load_into(run)?;
    let obs = cmd.synth.observe(&s, run)?;
    match cmd.format {
        Format::Csv => run.csv(cmd.out.as_deref(), &obs.to_csv_string())?,
        Format::Json => run.json(cmd.out.as_deref(), &obs)?,
    }
    Ok(Status::Ok)
}

#[derive(Args, Debug, Clone)]
pub struct FitCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub obs: ObsArgs,
    #[command(flatten)]
    pub reg: RegArgs,
    /// Tikhonov parameter.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn fit(cmd: &FitCmd, run: &mut Run) -> Result<Status> {
    let s = cmd.scenario.load_into(run)?;
    let obs = cmd.obs.resolve(&s, run)?;
    let model = cmd.reg.config(run)?.model(obs.t_k())?;
    run.param("sigma", cmd.sigma)?;
    run.json(cmd.out.as_deref(), &tikhonov_fit(&model, &obs, cmd.sigma)?)?;
    Ok(Status::Ok)
}

#[derive(Args, Debug, Clone)]
pub struct ReconstructCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub obs: ObsArgs,
    #[command(flatten)]
    pub reg: RegArgs,
    #[command(flatten)]
    pub quasi: QuasiArgs,
    /// Result JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV dump of the full candidate grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReconstructOutput {
    scenario: String,
    estimate: ParamPair,
    selection: Selection,
    true_params: TrueParams,
}

pub fn reconstruct(cmd: &ReconstructCmd, run: &mut Run) -> Result<Status> {
    let s = cmd.scenario.load_into(run)?;
    let obs = cmd.obs.resolve(&s, run)?;
    let reg = cmd.reg.config(run)?;
    let quasi = cmd.quasi.config(s.true_params.kind, obs.t_k(), run)?;
    let res = reconstruct_observation(&s, &obs, &reg, Some(quasi))?;
    let out = ReconstructOutput {
        scenario: s.name.clone(),
        estimate: res.pair,
        selection: res.selection,
        true_params: s.true_params.clone(),
    };
    run.json(cmd.out.as_deref(), &out)?;
    if let (Some(path), Some(grid)) = (&cmd.grid, &res.grid) {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)?;
        run.csv(Some(path), &String::from_utf8(buf).expect("csv output is utf-8"))?;
    }
    Ok(Status::Ok)
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// fip_ex82: estimates of the leading and the unknown minor order.
    Fip,
    /// sip_ex83: estimates of the leading order and the kernel exponent.
    Sip,
    /// ex74: leading-order approximation from exact data as a function of t_a.
    Ex74,
}

#[derive(Args, Debug, Clone)]
pub struct TableCmd {
    #[arg(long, value_enum)]
    pub kind: TableKind,
    /// Leading orders, one row each; defaults to the published rows.
    #[arg(long = "nu", value_delimiter = ',')]
    pub nus: Vec<f64>,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[command(flatten)]
    pub reg: RegArgs,
    #[command(flatten)]
    pub quasi: QuasiArgs,
    /// Evaluation times of the ex74 curve; defaults to 10^-1 .. 10^-9.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<f64>,
    /// Fixed number of decimals in CSV output instead of the shortest round-trip form.
    #[arg(long)]
    pub decimals: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TableLine {
    nu: f64,
    nu1_hat: Option<f64>,
    second_hat: Option<f64>,
    status: String,
    ref_nu1: Option<f64>,
    ref_second: Option<f64>,
}

#[derive(Serialize)]
struct CurveLine {
    nu: f64,
    t_a: f64,
    nu1_a: f64,
    ref_nu1_a: Option<f64>,
}

/// Published cell for `(ν, δ, noise)`, when the table has one.
fn reference_cell(table: &ReferenceTable, nu: f64, cmd: &SynthArgs) -> Option<(f64, f64)> {
    let d = TABLE_DELTAS.iter().position(|&x| x == cmd.delta)?;
    let n = TABLE_NOISES.iter().position(|&x| x == cmd.noise)?;
    let default_grid = cmd.k == fracid::pipeline::TABLE_POINTS && cmd.tau == fracid::pipeline::TABLE_TAU;
    let row = table.rows.iter().find(|r| (r.0 - nu).abs() < 1e-12)?;
    default_grid.then(|| row.1[d * 3 + n])
}

pub fn table(cmd: &TableCmd, run: &mut Run) -> Result<Status> {
    run.param("kind", format!("{:?}", cmd.kind).to_lowercase())?;
    if cmd.kind == TableKind::Ex74 {
        return ex74_table(cmd, run);
    }
    let table = if cmd.kind == TableKind::Fip { &TABLE_FIP } else { &TABLE_SIP };
    let nus: Vec<f64> = if cmd.nus.is_empty() { table.rows.iter().map(|r| r.0).collect() } else { cmd.nus.clone() };
    run.param("nus", &nus)?;
    let reg = cmd.reg.config(run)?;
    let times = uniform_times(cmd.synth.k, cmd.synth.tau);
    let t_k = *times.last().ok_or_else(|| Error::Domain("--K must be positive".into()))?;
    let quasi = cmd.quasi.config(table.kind, t_k, run)?;
    run.param("noise", cmd.synth.spec())?;
    run.param("K", cmd.synth.k)?;
    run.param("tau", cmd.synth.tau)?;
    let lines: Vec<TableLine> = nus
        .par_iter()
        .map(|&nu| {
            let res = builtin(table.scenario, nu, None)
                .and_then(|s| Ok((observe(&s, &times, cmd.synth.spec())?, s)))
                .and_then(|(obs, s)| reconstruct_observation(&s, &obs, &reg, Some(quasi)));
            let reference = reference_cell(table, nu, &cmd.synth);
            let (nu1_hat, second_hat, status) = match res {
                Ok(r) => (Some(r.pair.nu1), Some(r.pair.second), "ok".to_string()),
                Err(e) => (None, None, format!("error: {e}")),
            };
            TableLine { nu, nu1_hat, second_hat, status, ref_nu1: reference.map(|r| r.0), ref_second: reference.map(|r| r.1) }
        })
        .collect();
    if cmd.format == Format::Json {
        run.json(cmd.out.as_deref(), &lines)?;
        return Ok(Status::Ok);
    }
    let d = cmd.decimals;
    let rows = lines.iter().map(|l| {
        vec![num(l.nu, None), opt(l.nu1_hat, d), opt(l.second_hat, d), l.status.clone(), opt(l.ref_nu1, None), opt(l.ref_second, None)]
    });
    let text = csv_text(&["nu", "nu1_hat", "second_hat", "status", "ref_nu1", "ref_second"], rows)?;
    run.csv(cmd.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn ex74_table(cmd: &TableCmd, run: &mut Run) -> Result<Status> {
    let nus: Vec<f64> = if cmd.nus.is_empty() { TABLE_EX74.iter().map(|r| r.0).collect() } else { cmd.nus.clone() };
    let times = if cmd.times.is_empty() { log_grid(8, 1) } else { cmd.times.clone() };
    run.param("nus", &nus)?;
    run.param("times", &times)?;
    let lines: Vec<CurveLine> = ex74_leading_curve(&nus, &times)?
        .into_iter()
        .map(|p| CurveLine {
            nu: p.nu,
            t_a: p.t_a,
            nu1_a: p.nu1_a,
            ref_nu1_a: TABLE_EX74.iter().find(|r| (r.0 - p.nu).abs() < 1e-12).map(|r| r.1),
        })
        .collect();
    if cmd.format == Format::Json {
        run.json(cmd.out.as_deref(), &lines)?;
        return Ok(Status::Ok);
    }
    let d = cmd.decimals;
    let rows = lines
        .iter()
        .map(|l| vec![num(l.nu, None), format!("{:e}", l.t_a), num(l.nu1_a, d), opt(l.ref_nu1_a, None)]);
    run.csv(cmd.out.as_deref(), &csv_text(&["nu", "t_a", "nu1_a", "ref_nu1_a"], rows)?)?;
    Ok(Status::Ok)
}

#[derive(Args, Debug, Clone)]
pub struct BoundsCmd {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// JSON file with supplied constants; missing entries are estimated or defaulted.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub t_star: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps_i: f64,
    #[arg(long)]
    pub eps_ii: Option<f64>,
    #[arg(long)]
    pub eps_iii: Option<f64>,
    /// Target accuracy of the minor-order and kernel-exponent horizons.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.99)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub mu: f64,
    #[arg(long)]
    pub gamma_bar: Option<f64>,
    /// Hölder exponent used for the kernel seminorm.
    #[arg(long, default_value_t = 0.5)]
    pub alpha5: f64,
    /// Sampling intervals for norm estimates.
    #[arg(long, default_value_t = 128)]
    pub density: usize,
    #[arg(long)]
    pub nu_under: Option<f64>,
    #[arg(long)]
    pub nu_bar: Option<f64>,
    #[arg(long)]
    pub t1_star: Option<f64>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long = "c2-0")]
    pub c2_0: Option<f64>,
    #[arg(long)]
    pub t_a: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BoundsCmd {
    fn h7(&self) -> Result<Option<H7Data>> {
        match (self.t1_star, self.alpha1, self.c2_0, self.t_a) {
            (Some(t1_star), Some(alpha1), Some(c2_0), Some(t_a)) => Ok(Some(H7Data { t1_star, alpha1, c2_0, t_a })),
            (None, None, None, None) => Ok(None),
            _ => Err(Error::Domain("--t1-star, --alpha1, --c2-0 and --t-a must be given together".into())),
        }
    }

    fn order_bounds(&self, s: &fracid::scenario::Scenario) -> Option<OrderBounds> {
        if self.nu_under.is_none() && self.nu_bar.is_none() {
            return None;
        }
        let d = OrderBounds::defaults(s);
        Some(OrderBounds { nu_under: self.nu_under.unwrap_or(d.nu_under), nu_bar: self.nu_bar.unwrap_or(d.nu_bar) })
    }
}

pub fn bounds(cmd: &BoundsCmd, run: &mut Run) -> Result<Status> {
    let s = cmd.scenario.load_into(run)?;
    let inputs = match &cmd.ledger {
        Some(p) => {
            run.param("ledger", p.to_string_lossy())?;
            LedgerInputs::from_json(&std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)?
        }
        None => LedgerInputs::default(),
    };
    let norms = estimate_norms(&s, cmd.t_star, cmd.density, inputs.alpha.unwrap_or(0.5), cmd.alpha5)?;
    let ledger = ConstantsLedger::build(&s, &inputs, &norms)?;
    let req = BoundsRequest {
        t_star: cmd.t_star,
        eps_i: cmd.eps_i,
        eps_ii: cmd.eps_ii,
        eps_iii: cmd.eps_iii,
        eps: cmd.eps,
        lambda: cmd.lambda,
        mu: cmd.mu,
        gamma_bar: cmd.gamma_bar,
        alpha5: cmd.alpha5,
        bounds: cmd.order_bounds(&s),
        h7: cmd.h7()?,
    };
    run.param("request", req)?;
    run.param("density", cmd.density)?;
    let report = bounds_report(&s, ledger, &req)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    run.json(cmd.out.as_deref(), &report)?;
    Ok(Status::Ok)
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Margins of the analytic lemmas on random admissible cases.
    Lemmas,
    /// Operator and source identities of the built-in scenarios.
    Identities,
    /// Horizon soundness and decay of the estimator errors.
    Deltas,
    /// Fast evaluators against independent quadrature.
    Oracle,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyCmd {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Seed of the case generator (lemmas, oracle).
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Cases per lemma, or total oracle cases.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Accuracy whose leading-order threshold the deltas suite reports.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Directory for the error-curve CSVs of the deltas suite.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Threshold {
    scenario: &'static str,
    nu: f64,
    eps: f64,
    t_a: Option<f64>,
}

#[derive(Serialize)]
struct VerifyOutput {
    #[serde(flatten)]
    report: SuiteReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    leading_threshold: Option<Threshold>,
}

fn write_curve(run: &mut Run, dir: &Path, name: &str, curve: &DeltaCurve) -> Result<()> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    run.csv(Some(&dir.join(name)), &String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn verify(cmd: &VerifyCmd, run: &mut Run) -> Result<Status> {
    run.param("suite", format!("{:?}", cmd.suite).to_lowercase())?;
    let seeded = |run: &mut Run, cases: usize| -> Result<()> {
        run.param("seed", cmd.seed)?;
        run.param("cases", cases)?;
        run.determinism(format!("cases drawn from a ChaCha8 generator seeded with {}; rerunning reproduces every output byte for byte", cmd.seed));
        Ok(())
    };
    let mut leading_threshold = None;
    let mut curve_files = Vec::new();
    let report = match cmd.suite {
        Suite::Identities => identity_suite(),
        Suite::Lemmas => {
            let n = cmd.cases.unwrap_or(20);
            seeded(run, n)?;
            lemma_suite(cmd.seed, n)
        }
        Suite::Oracle => {
            let n = cmd.cases.unwrap_or(200);
            seeded(run, n)?;
            oracle_suite(cmd.seed, n)
        }
        Suite::Deltas => {
            let (report, curves) = delta_suite();
            let s = builtin("fip_ex82", 0.5, None)?;
            let leading = empirical_delta(&s, DeltaKind::Leading, &log_grid(11, 2), 0.99)?;
            run.param("eps", cmd.eps)?;
            leading_threshold = Some(Threshold { scenario: "fip_ex82", nu: 0.5, eps: cmd.eps, t_a: leading.threshold(cmd.eps) });
            for c in &curves {
                let name = match c.kind {
                    DeltaKind::MinorOrder => "delta2_fip_ex82.csv",
                    DeltaKind::KernelExponent => "delta3_sip_ex83.csv",
                    DeltaKind::Leading => "delta1_extra.csv",
                };
                curve_files.push((name, c.clone()));
            }
            curve_files.insert(0, ("delta1_fip_ex82.csv", leading));
            report
        }
    };
    let passed = report.passed;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    run.json(cmd.out.as_deref(), &VerifyOutput { report, leading_threshold })?;
    if let Some(dir) = &cmd.curves {
        for (name, curve) in &curve_files {
            write_curve(run, dir, name, curve)?;
        }
    }
    Ok(if passed { Status::Ok } else { Status::VerificationFailed })
}
