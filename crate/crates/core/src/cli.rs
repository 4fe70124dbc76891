//! Command-line front end.
//!
//! Single results are printed as [`RunRecord`] JSON, tables as CSV. Exit
//! codes: 0 success, 2 usage error, 3 resource cap, 4 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::discrete::{optimize_settings, SettingsSearch};
use crate::error::{Error, Result};
use crate::estimator::{mc_overlap, with_threads};
use crate::qcorr::{corr_oracle, corr_reduced, FrameKind, OutcomeFrame, PhaseSum, Scenario, SettingVector, DEFAULT_ORACLE_CAP};
use crate::record::{RunRecord, TOOL, VERSION};
use crate::scaling::{fit_table, read_table, subadditivity_report, write_table, FitModel, TableRow};
use crate::wwwzb::{search_all_s, ExponentRule, QuantumBudget};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "GBI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gbi", version, about = "GHZ correlations, local-realistic overlaps and Bell-type ratios")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the reduced correlation vector at given phases
    Corr(CorrArgs),
    /// Monte Carlo estimate of the overlap L_{d,N}
    Overlap(OverlapArgs),
    /// Overlap table over several dimensions and party counts (CSV)
    Table(TableArgs),
    /// Exponential fit of 1/L against N from a table
    Fit(FitArgs),
    /// Compare log QCR of a composite dimension with its factors
    Subadd(SubaddArgs),
    /// Optimise finitely many settings per observer (trajectory CSV)
    Discrete(DiscreteArgs),
    /// Search all 3x3 sign matrices of the qutrit two-party inequality
    Wwwzb(WwwzbArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FrameArg {
    Recursive,
    Tetrahedral,
}

impl FrameArg {
    fn build(self, d: usize) -> Result<OutcomeFrame> {
        let kind = match self {
            FrameArg::Recursive => FrameKind::Recursive,
            FrameArg::Tetrahedral => FrameKind::Tetrahedral,
        };
        OutcomeFrame::new(d, kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelArg {
    TwoParam,
    OneParam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RuleArg {
    Sum,
    Product,
}

#[derive(Debug, Args)]
struct Output {
    /// Worker threads (default: $GBI_THREADS, else all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Write the result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall time in JSON records
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args, Serialize)]
struct CorrArgs {
    #[arg(long)]
    d: usize,
    /// Number of observers; inferred from --settings when omitted
    #[arg(long)]
    n: Option<usize>,
    /// Phase sum x_1,...,x_{d-1}
    #[arg(long, conflicts_with = "settings", allow_hyphen_values = true)]
    x: Option<String>,
    /// Per-observer phases, observers separated by ';'
    #[arg(long, allow_hyphen_values = true)]
    settings: Option<String>,
    #[arg(long, value_enum, default_value = "recursive")]
    frame: FrameArg,
    /// Evaluate through the explicit state-vector simulation
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args, Serialize)]
struct OverlapArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    points: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "recursive")]
    frame: FrameArg,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct TableArgs {
    /// Dimensions, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<usize>,
    /// Observer counts, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    points: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use the exact closed forms for d = 2 and d = 3
    #[arg(long)]
    closed_form: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Table CSV produced by `table`
    #[arg(long)]
    input: PathBuf,
    /// Dimension to fit; required when the table holds several
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value = "two-param")]
    model: ModelArg,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct SubaddArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    d1: usize,
    #[arg(long)]
    d2: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    n: Vec<usize>,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct DiscreteArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Largest number of settings per observer
    #[arg(long, default_value_t = 8)]
    m_max: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random starting points per M besides the warm and spread starts
    #[arg(long, default_value_t = 1)]
    random_starts: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct WwwzbArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Evaluate one representative per symmetry class (default)
    #[arg(long, overrides_with = "no_prune")]
    #[serde(skip)]
    prune: bool,
    /// Evaluate all 19683 sign matrices
    #[arg(long, overrides_with = "prune")]
    no_prune: bool,
    /// Grid points refined per sign matrix
    #[arg(long, default_value_t = 24)]
    starts: usize,
    /// Coarse grid points per phase
    #[arg(long, default_value_t = 3)]
    grid: usize,
    #[arg(long, default_value_t = 8)]
    random_starts: usize,
    #[arg(long, value_enum, default_value = "sum")]
    rule: RuleArg,
    /// Keep only the best entries of the ranking
    #[arg(long)]
    top: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                2
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Corr(a) => cmd_corr(&a, out),
        Command::Overlap(a) => cmd_overlap(&a, out, err),
        Command::Table(a) => cmd_table(&a, out),
        Command::Fit(a) => cmd_fit(&a, out, err),
        Command::Subadd(a) => cmd_subadd(&a, out, err),
        Command::Discrete(a) => cmd_discrete(&a, out),
        Command::Wwwzb(a) => cmd_wwwzb(&a, out, err),
    }
}

/// Worker count from the flag, else from `GBI_THREADS`, else 0 (all cores).
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        _ => Ok(0),
    }
}

/// Seed of the `(d, N)` row of a table run with base seed `seed`.
pub fn row_seed(seed: u64, d: usize, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((d as u64) << 32 | n as u64)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("not a number: {v:?}")))
        })
        .collect()
}

fn format_component(x: f64) -> String {
    let r = (x * 1e4).round() / 1e4;
    if r == 0.0 {
        return "0".into();
    }
    let s = format!("{r:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `(a, b, ...)` with four decimals, or a bare number for one component.
pub fn format_vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| format_component(x)).collect();
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        format!("({})", parts.join(", "))
    }
}

fn emit(output: &Output, text: &str, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::ResourceLimit(format!("write failed: {e}"));
    match &output.out {
        Some(path) => {
            let mut f = File::create(path).map_err(io)?;
            f.write_all(text.as_bytes()).map_err(io)
        }
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn emit_record(output: &Output, mut rec: RunRecord, started: Instant, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let elapsed = started.elapsed().as_secs_f64();
    if output.timing {
        rec.elapsed_seconds = Some(elapsed);
    } else {
        let _ = writeln!(err, "{}: {elapsed:.2} s", rec.command);
    }
    let mut text = rec.to_json().map_err(|e| Error::Numerical(format!("serialisation: {e}")))?;
    text.push('\n');
    emit(output, &text, out)
}

fn record(command: &str, params: impl Serialize, result: impl Serialize) -> Result<RunRecord> {
    RunRecord::new(command, params, result).map_err(|e| Error::Numerical(format!("serialisation: {e}")))
}

fn cmd_corr(a: &CorrArgs, out: &mut dyn Write) -> Result<()> {
    let frame = a.frame.build(a.d)?;
    let settings: Vec<SettingVector> = match (&a.x, &a.settings) {
        (Some(x), None) => vec![SettingVector::new(parse_list(x)?)],
        (None, Some(s)) => s
            .split(';')
            .map(|obs| parse_list(obs).map(SettingVector::new))
            .collect::<Result<_>>()?,
        _ => return Err(Error::Usage("give either --x or --settings".into())),
    };
    let parties = a.n.unwrap_or(settings.len());
    if a.settings.is_some() && parties != settings.len() {
        return Err(Error::Usage(format!(
            "--n {parties} but {} observers in --settings",
            settings.len()
        )));
    }
    let scenario = Scenario::new(a.d, parties)?;
    let e = if a.oracle {
        if a.x.is_some() && parties != 1 {
            return Err(Error::Usage("--oracle needs --settings for more than one observer".into()));
        }
        corr_oracle(&scenario, &frame, &settings, DEFAULT_ORACLE_CAP)?
    } else {
        corr_reduced(&frame, &PhaseSum::from_settings(&settings)?)?
    };
    writeln!(out, "{}", format_vector(&e)).map_err(|e| Error::ResourceLimit(e.to_string()))
}

fn cmd_overlap(a: &OverlapArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let threads = resolve_threads(a.output.threads)?;
    let scenario = Scenario::new(a.d, a.n)?;
    let frame = a.frame.build(a.d)?;
    let est = mc_overlap(&scenario, &frame, a.points, a.seed, threads)?;
    let row = TableRow::from_estimate(&est)?;
    #[derive(Serialize)]
    struct Payload<'a> {
        #[serde(flatten)]
        estimate: &'a crate::estimator::MCEstimate,
        qcr: f64,
        log_qcr: f64,
    }
    let rec = record(
        "overlap",
        a,
        Payload {
            estimate: &est,
            qcr: row.qcr,
            log_qcr: row.log_qcr,
        },
    )?
    .with_seed(a.seed)
    .with_points(a.points);
    emit_record(&a.output, rec, started, out, err)
}

/// Rows of a table run in `(d, N)` order.
fn table_rows(a: &TableArgs, threads: usize) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for &d in &a.d {
        for &n in &a.n {
            if a.closed_form && (d == 2 || d == 3) {
                rows.push(TableRow::closed_form(d, n)?);
                continue;
            }
            let scenario = Scenario::new(d, n)?;
            let frame = OutcomeFrame::recursive(d)?;
            let est = mc_overlap(&scenario, &frame, a.points, row_seed(a.seed, d, n), threads)?;
            rows.push(TableRow::from_estimate(&est)?);
        }
    }
    Ok(rows)
}

fn cmd_table(a: &TableArgs, out: &mut dyn Write) -> Result<()> {
    let threads = resolve_threads(a.output.threads)?;
    let rows = table_rows(a, threads)?;
    let params = serde_json::to_string(a).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut buf = format!("# {TOOL} {VERSION} table {params}\n").into_bytes();
    write_table(&rows, &mut buf)?;
    emit(&a.output, &String::from_utf8_lossy(&buf), out)
}

fn load_table(path: &Path) -> Result<Vec<TableRow>> {
    let f = File::open(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    read_table(f)
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let rows = load_table(&a.input)?;
    let d = match a.d {
        Some(d) => d,
        None => {
            let mut ds: Vec<usize> = rows.iter().map(|r| r.d).collect();
            ds.sort_unstable();
            ds.dedup();
            match ds.as_slice() {
                [d] => *d,
                _ => return Err(Error::Usage("table holds several dimensions; pass --d".into())),
            }
        }
    };
    let model = match a.model {
        ModelArg::TwoParam => FitModel::TwoParam,
        ModelArg::OneParam => FitModel::OneParam,
    };
    let fit = fit_table(&rows, d, model)?;
    emit_record(&a.output, record("fit", a, fit)?, started, out, err)
}

fn cmd_subadd(a: &SubaddArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let rows = load_table(&a.input)?;
    let report = subadditivity_report(a.d1, a.d2, &a.n, &rows)?;
    emit_record(&a.output, record("subadd", a, report)?, started, out, err)
}

fn format_settings(settings: &[Vec<SettingVector>]) -> String {
    settings
        .iter()
        .map(|obs| {
            obs.iter()
                .map(|s| {
                    s.phases()
                        .iter()
                        .map(|p| p.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";")
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn cmd_discrete(a: &DiscreteArgs, out: &mut dyn Write) -> Result<()> {
    let threads = resolve_threads(a.output.threads)?;
    let scenario = Scenario::new(a.d, a.n)?;
    let frame = OutcomeFrame::recursive(a.d)?;
    let opts = SettingsSearch {
        random_starts: a.random_starts,
        ..Default::default()
    };
    let trajectory = with_threads(threads, || optimize_settings(scenario, &frame, a.m_max, a.seed, opts))??;

    #[derive(Serialize)]
    struct Row {
        #[serde(rename = "M")]
        m: usize,
        qcr: f64,
        settings: String,
    }
    let params = serde_json::to_string(a).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut buf = format!("# {TOOL} {VERSION} discrete {params}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for p in &trajectory {
            w.serialize(Row {
                m: p.settings_per_observer,
                qcr: p.qcr,
                settings: format_settings(&p.settings),
            })
            .map_err(|e| Error::ResourceLimit(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::ResourceLimit(format!("csv: {e}")))?;
    }
    emit(&a.output, &String::from_utf8_lossy(&buf), out)
}

fn cmd_wwwzb(a: &WwwzbArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let threads = resolve_threads(a.output.threads)?;
    let budget = QuantumBudget {
        starts: a.starts,
        grid_per_axis: a.grid,
        random_starts: a.random_starts,
        ..Default::default()
    };
    let rule = match a.rule {
        RuleArg::Sum => ExponentRule::Sum,
        RuleArg::Product => ExponentRule::Product,
    };
    let mut result = with_threads(threads, || search_all_s(&budget, a.seed, !a.no_prune, rule))??;
    if let Some(top) = a.top {
        result.ranking.truncate(top);
    }
    let rec = record("wwwzb", a, result)?.with_seed(a.seed);
    emit_record(&a.output, rec, started, out, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_formatting() {
        assert_eq!(format_vector(&[1.0, 0.0]), "(1, 0)");
        assert_eq!(format_vector(&[-0.5, -0.8660254]), "(-0.5, -0.866)");
        assert_eq!(format_vector(&[1e-17]), "0");
        assert_eq!(format_vector(&[-1e-9]), "0");
    }

    #[test]
    fn row_seeds_differ() {
        assert_ne!(row_seed(1, 4, 2), row_seed(1, 4, 3));
        assert_ne!(row_seed(1, 4, 2), row_seed(1, 5, 2));
        assert_ne!(row_seed(1, 4, 2), row_seed(2, 4, 2));
    }
}
