//! `kshrink` command line: `simulate`, `estimate` and `check`.
//!
//! Exit codes: 0 success, 1 a checked condition is false, 2 invalid
//! configuration or input, 3 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{MatrixValue, OutputFormat, RunConfig};
use crate::error::{Error, FieldError, Result};
use crate::estimators::{Estimator, EstimatorConfig};
use crate::minimax::{theorem1_report, theorem2_report, theorem3_report, MinimaxReport};
use crate::model::{Model, ModelSpec, Sample};
use crate::risk_sim::{simulate_risk, table1_preset_with, RiskReport, SimPlan, Table1Options};
use crate::statistics::PooledStats;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONDITION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "kshrink", version, about = "Minimax shrinkage estimators for k-sample normal means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo risk and PRIAL of the configured estimators.
    Simulate(SimulateArgs),
    /// Apply the estimators to one data set.
    Estimate(EstimateArgs),
    /// Report the minimaxity conditions and bounds of a model.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Table1,
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in experiment.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Significance level for every PT estimator.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override σ² of the model.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// CSV data: k rows of p values, then `S,<value>`; optional `n,<dof>`,
    /// `V,<m1>,…,<mk>` and `Q,<m>` lines (`c*I` shorthand).
    #[arg(long)]
    data: PathBuf,
    /// Take V, Q and n from a run configuration instead of the data file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of PT,JS,EB,HB,HEB.
    #[arg(long, value_delimiter = ',', default_value = "PT,JS,EB,HB,HEB")]
    estimators: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eb_a0: Option<f64>,
    #[arg(long)]
    hb_a: Option<f64>,
    #[arg(long)]
    hb_c: Option<f64>,
    #[arg(long)]
    hb_l: Option<f64>,
    #[arg(long)]
    heb_a0: Option<f64>,
    #[arg(long)]
    heb_b0: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: TextFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    /// Weights d for the linear-combination condition.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Option<Vec<f64>>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Estimate(a) => cmd_estimate(&a, out, err),
        Command::Check(a) => cmd_check(&a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = report_error(&e, err);
            exit_code(&e)
        }
    }
}

fn report_error(e: &Error, err: &mut dyn Write) -> std::io::Result<()> {
    match e {
        Error::InvalidConfig(fields) | Error::InvalidSpec(fields) => {
            writeln!(err, "error: invalid configuration")?;
            for f in fields {
                writeln!(err, "  {}: {}", f.field, f.message)?;
            }
            Ok(())
        }
        other => writeln!(err, "error: {other}"),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn config_error(field: &str, msg: impl Into<String>) -> Error {
    Error::InvalidConfig(vec![FieldError::new(field, msg)])
}

type NamedPlans = Vec<(String, SimPlan)>;

fn load_plans(source: &Source, sigma2: Option<f64>) -> Result<(NamedPlans, Option<RunConfig>)> {
    match (&source.preset, &source.config) {
        (Some(Preset::Table1), None) => {
            let mut opts = Table1Options::default();
            if let Some(s) = sigma2 {
                opts.sigma2 = s;
            }
            Ok((table1_preset_with(&opts), None))
        }
        (None, Some(path)) => {
            let mut cfg = RunConfig::from_path(path).map_err(|e| match e {
                Error::Io(io) => config_error("config", format!("{}: {io}", path.display())),
                other => other,
            })?;
            if let Some(s) = sigma2 {
                cfg.model.sigma2 = s;
            }
            Ok((cfg.to_plans()?, Some(cfg)))
        }
        _ => Err(config_error("source", "give exactly one of --preset or --config")),
    }
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let (mut plans, cfg) = load_plans(&a.source, a.sigma2)?;
    for (_, plan) in &mut plans {
        if let Some(r) = a.reps {
            plan.replications = r;
        }
        if let Some(s) = a.seed {
            plan.seed = s;
        }
        if let Some(alpha) = a.alpha {
            for e in &mut plan.estimators {
                if let EstimatorConfig::Pt { alpha: al } = e {
                    *al = Some(alpha);
                }
            }
        }
    }
    let output = cfg.as_ref().and_then(|c| c.output.clone()).unwrap_or_default();
    let format = a.format.or(output.format).unwrap_or_default();
    let path = a.out.clone().or(output.path.map(PathBuf::from));
    let workers = a.workers.or(cfg.as_ref().and_then(|c| c.workers));

    let mut errs = Vec::new();
    for (name, plan) in &plans {
        if let Err(Error::InvalidConfig(e)) = plan.validate() {
            errs.extend(e.into_iter().map(|f| FieldError::new(format!("{name}: {}", f.field), f.message)));
        }
    }
    if workers == Some(0) {
        errs.push(FieldError::new("workers", "must be at least 1"));
    }
    if !errs.is_empty() {
        return Err(Error::InvalidConfig(errs));
    }

    let run_all = || -> Result<Vec<(String, RiskReport)>> {
        plans
            .iter()
            .map(|(name, plan)| Ok((name.clone(), simulate_risk(plan)?)))
            .collect()
    };
    let reports = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let bytes = match format {
        OutputFormat::Csv => render_csv(&reports)?,
        OutputFormat::Json => render_json(&reports)?,
    };
    match path {
        Some(p) => write_file(&p, &bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(EXIT_OK)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

/// `x` with 6 significant digits, in the style of C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

pub fn render_csv(reports: &[(String, RiskReport)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "mean_config",
        "estimator",
        "risk",
        "risk_se",
        "prial",
        "prial_se",
        "replications",
        "seed",
    ])
    .map_err(io)?;
    for (name, rep) in reports {
        for e in &rep.estimators {
            w.write_record([
                name.clone(),
                e.estimator.clone(),
                fmt_sig6(e.risk_estimate),
                fmt_sig6(e.std_error),
                fmt_sig6(e.prial),
                fmt_sig6(e.prial_std_error),
                rep.replications.to_string(),
                rep.seed.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

#[derive(Serialize)]
struct NamedReport<'a> {
    mean_config: &'a str,
    #[serde(flatten)]
    report: &'a RiskReport,
}

pub fn render_json(reports: &[(String, RiskReport)]) -> Result<Vec<u8>> {
    let named: Vec<_> = reports
        .iter()
        .map(|(n, r)| NamedReport {
            mean_config: n,
            report: r,
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&named).map_err(|e| Error::Parse(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// A data set read by `estimate`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub x: Vec<Vec<f64>>,
    pub s: Option<f64>,
    pub n: Option<u32>,
    pub v: Option<Vec<MatrixValue>>,
    pub q: Option<MatrixValue>,
}

/// Parses the `estimate` data format. A first line with no numeric field
/// is treated as a header.
pub fn parse_data(text: &str) -> Result<DataFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = DataFile {
        x: Vec::new(),
        s: None,
        n: None,
        v: None,
        q: None,
    };
    let mut errs = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let line = format!("line {}", rec.position().map_or(idx as u64 + 1, |p| p.line()));
        let rest = &fields[1..];
        match fields[0] {
            "S" => match rest {
                [v] => match v.parse::<f64>() {
                    Ok(s) => data.s = Some(s),
                    Err(_) => errs.push(FieldError::new(line, format!("bad S value {v:?}"))),
                },
                _ => errs.push(FieldError::new(line, "expected `S,<value>`")),
            },
            "n" => match rest {
                [v] => match v.parse::<u32>() {
                    Ok(n) => data.n = Some(n),
                    Err(_) => errs.push(FieldError::new(line, format!("bad n value {v:?}"))),
                },
                _ => errs.push(FieldError::new(line, "expected `n,<dof>`")),
            },
            "V" => data.v = Some(rest.iter().map(|s| MatrixValue::Shorthand(s.to_string())).collect()),
            "Q" => match rest {
                [v] => data.q = Some(MatrixValue::Shorthand(v.to_string())),
                _ => errs.push(FieldError::new(line, "expected `Q,<c*I>`")),
            },
            _ => {
                let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
                if parsed.iter().all(Option::is_none) && data.x.is_empty() && idx == 0 {
                    continue; // header
                }
                match parsed.into_iter().collect::<Option<Vec<f64>>>() {
                    Some(row) => data.x.push(row),
                    None => errs.push(FieldError::new(line, "non-numeric value in data row")),
                }
            }
        }
    }
    if data.x.is_empty() {
        errs.push(FieldError::new("data", "no data rows"));
    } else if data.x.iter().any(|r| r.len() != data.x[0].len()) {
        errs.push(FieldError::new("data", "ragged rows: every row needs p values"));
    }
    match data.s {
        None => errs.push(FieldError::new("S", "missing `S,<value>` line")),
        Some(s) if !(s > 0.0 && s.is_finite()) => errs.push(FieldError::new("S", format!("must be positive (got {s})"))),
        _ => {}
    }
    if !errs.is_empty() {
        return Err(Error::InvalidConfig(errs));
    }
    Ok(data)
}

#[derive(Serialize)]
struct EstimateOutput {
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "G")]
    g: f64,
    nu_hat: Vec<f64>,
    estimates: Vec<(String, Vec<f64>)>,
}

fn estimate_model(a: &EstimateArgs, data: &DataFile) -> Result<Model> {
    let k = data.x.len();
    let p = data.x[0].len();
    let mu = vec![DVector::zeros(p); k];
    let spec = match &a.config {
        Some(path) => {
            let cfg = RunConfig::from_path(path)?;
            cfg.model_spec(mu)?
        }
        None => {
            let n = data
                .n
                .ok_or_else(|| config_error("n", "missing `n,<dof>` line (or pass --config)"))?;
            let v = match &data.v {
                Some(v) => v
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.to_matrix(p).map_err(|e| config_error(&format!("V[{}]", i + 1), e)))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![DMatrix::identity(p, p); k],
            };
            let q = match &data.q {
                Some(q) => q.to_matrix(p).map_err(|e| config_error("Q", e))?,
                None => DMatrix::identity(p, p),
            };
            ModelSpec {
                p,
                k,
                n,
                v,
                q,
                sigma2: 1.0,
                mu,
            }
        }
    };
    if spec.p != p || spec.k != k {
        return Err(config_error(
            "data",
            format!("data has k = {k} rows of p = {p}; model has k = {}, p = {}", spec.k, spec.p),
        ));
    }
    spec.validate()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_sig6(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let text = std::fs::read_to_string(&a.data)
        .map_err(|e| config_error("data", format!("{}: {e}", a.data.display())))?;
    let data = parse_data(&text)?;
    let model = estimate_model(a, &data)?;
    let sample = Sample::new(
        data.x.iter().map(|r| DVector::from_row_slice(r)).collect(),
        data.s.expect("validated"),
    )?;
    let stats = PooledStats::compute(&model, &sample)?;

    let mut code = EXIT_OK;
    let mut estimates = Vec::new();
    for name in &a.estimators {
        let cfg = match name.to_ascii_uppercase().as_str() {
            "PT" => EstimatorConfig::Pt { alpha: a.alpha },
            "JS" => EstimatorConfig::Js,
            "EB" => EstimatorConfig::Eb { a0: a.eb_a0 },
            "HB" => EstimatorConfig::Hb {
                a: a.hb_a,
                c: a.hb_c,
                l: a.hb_l,
            },
            "HEB" => EstimatorConfig::Heb {
                a0: a.heb_a0,
                b0: a.heb_b0,
            },
            other => return Err(config_error("estimators", format!("unknown estimator {other:?}"))),
        };
        match Estimator::new(&cfg, &model).and_then(|e| e.estimate_with(&model, &sample, &stats)) {
            Ok(v) => estimates.push((cfg.kind().to_string(), v.iter().copied().collect())),
            Err(e) => {
                writeln!(err, "{}: {e}", cfg.kind())?;
                code = code.max(exit_code(&e));
            }
        }
    }
    let report = EstimateOutput {
        f: stats.f,
        g: stats.g,
        nu_hat: stats.nu_hat.iter().copied().collect(),
        estimates,
    };
    match a.format {
        TextFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out)?;
        }
        TextFormat::Text => {
            writeln!(out, "F = {}", fmt_sig6(report.f))?;
            writeln!(out, "G = {}", fmt_sig6(report.g))?;
            writeln!(out, "nu_hat = {}", fmt_vec(&report.nu_hat))?;
            for (name, v) in &report.estimates {
                writeln!(out, "{name} = {}", fmt_vec(v))?;
            }
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct CheckOutput {
    theorem1: MinimaxReport,
    theorem2: MinimaxReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem3: Option<MinimaxReport>,
    all_conditions_hold: bool,
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let (plans, _) = load_plans(&a.source, None)?;
    let (_, plan) = plans
        .first()
        .ok_or_else(|| config_error("means", "no model in configuration"))?;
    let model = plan.spec.validate()?;
    let theorem1 = theorem1_report(&model)?;
    let theorem2 = theorem2_report(&model)?;
    let theorem3 = match &a.d {
        Some(d) => Some(theorem3_report(&model, d).map_err(|e| config_error("d", e.to_string()))?),
        None => None,
    };
    let all = theorem1.condition_holds
        && theorem2.aq_condition_holds == Some(true)
        && theorem3.as_ref().is_none_or(|r| r.condition_holds);
    let report = CheckOutput {
        theorem1,
        theorem2,
        theorem3,
        all_conditions_hold: all,
    };
    serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out)?;
    Ok(if all { EXIT_OK } else { EXIT_CONDITION })
}
