//! The `calmtier` command line.
//!
//! Every failure prints one `error:` line on stderr and exits with 2.
//! `classify` exits 0, 10 or 20 for the highest tier among its inputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::classifier::{classify, explain, Classification, Tier};
use crate::data;
use crate::engine::{self, ModeStats, PartitionPlan, RunResult, ScheduleMode};
use crate::portfolio::{estimate_f, load_portfolio, TaxReport};
use crate::rational::{self, Rational};
use crate::report::{self, ReportOptions, SCHEMA};
use crate::task::{load_task, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Uncoordinated,
    Causal,
    Orchestrated,
    All,
}

#[derive(Debug, Parser)]
#[command(name = "calmtier", version, about = "Coordination tiers for multi-agent task specs")]
struct Args {
    /// Output format (default: json for simulate, text otherwise)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the output to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for sampled schedules
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify task specs; exit code 0 = M, 10 = M-O, 20 = NM
    Classify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run a task under one or all scheduling modes
    Simulate {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        mode: ModeArg,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Enumerate every interleaving when the task is small enough
        #[arg(long)]
        exhaustive: bool,
        /// JSON partition plan applied to every run
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Coordination tax for a fraction or a portfolio
    Tax {
        #[arg(long, conflicts_with = "f")]
        portfolio: Option<PathBuf>,
        #[arg(long)]
        f: Option<String>,
        #[arg(long, conflicts_with = "c_range")]
        c: Option<String>,
        /// Multiplier interval as lo:hi
        #[arg(long)]
        c_range: Option<String>,
    },
    /// Rebuild the full report from the bundled data
    Reproduce {
        #[arg(long)]
        tax_only: bool,
    },
}

type CliResult<T> = Result<T, String>;

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("error: invalid arguments");
            let _ = writeln!(stderr, "{first}");
            return 2;
        }
    };
    match dispatch(&args, stdout) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {}", one_line(&msg));
            2
        }
    }
}

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

fn dispatch(args: &Args, stdout: &mut dyn Write) -> CliResult<i32> {
    match &args.command {
        Command::Classify { paths } => cmd_classify(args, paths, stdout),
        Command::Simulate {
            task,
            mode,
            runs,
            exhaustive,
            partition,
        } => {
            let body = cmd_simulate(args, task, *mode, *runs, *exhaustive, partition.as_deref())?;
            emit(args, &body, stdout)?;
            Ok(0)
        }
        Command::Tax {
            portfolio,
            f,
            c,
            c_range,
        } => {
            let body = cmd_tax(args, portfolio.as_deref(), f.as_deref(), c.as_deref(), c_range.as_deref())?;
            emit(args, &body, stdout)?;
            Ok(0)
        }
        Command::Reproduce { tax_only } => cmd_reproduce(args, *tax_only, stdout),
    }
}

fn emit(args: &Args, body: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match &args.out {
        Some(path) => report::write_file(path, body).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(body.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_task(path: &Path) -> CliResult<TaskSpec> {
    load_task(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string(value).expect("json values serialize");
    s.push('\n');
    s
}

fn exit_code(tier: Tier) -> i32 {
    match tier {
        Tier::M => 0,
        Tier::MO => 10,
        Tier::NM => 20,
    }
}

fn cmd_classify(args: &Args, paths: &[PathBuf], stdout: &mut dyn Write) -> CliResult<i32> {
    let mut results: Vec<Classification> = Vec::new();
    for p in paths {
        let spec = read_task(p)?;
        results.push(classify(&spec).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let body = match args.format.unwrap_or(Format::Text) {
        Format::Text => results.iter().map(explain).collect::<Vec<_>>().join("\n"),
        Format::Json => to_json(&json!({ "schema": SCHEMA, "classifications": results })),
        Format::Csv => {
            let mut s = String::from("task_id,tier,thompson,defaulted,fired\n");
            for c in &results {
                let fired: Vec<String> = c.fired().map(|t| t.test.to_string()).collect();
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.task_id,
                    c.tier.label(),
                    c.inferred_thompson,
                    c.defaulted,
                    fired.join(";")
                ));
            }
            s
        }
    };
    emit(args, &body, stdout)?;
    Ok(results.iter().map(|c| exit_code(c.tier)).max().unwrap_or(0))
}

fn cmd_simulate(
    args: &Args,
    task: &Path,
    mode: ModeArg,
    runs: usize,
    exhaustive: bool,
    partition: Option<&Path>,
) -> CliResult<String> {
    let spec = read_task(task)?;
    let plan: Option<PartitionPlan> = match partition {
        Some(p) => Some(serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    if runs == 0 {
        return Err("--runs must be at least 1".into());
    }
    let modes: Vec<ScheduleMode> = match mode {
        ModeArg::Uncoordinated => vec![ScheduleMode::Uncoordinated],
        ModeArg::Causal => vec![ScheduleMode::Causal],
        ModeArg::Orchestrated => vec![ScheduleMode::Orchestrated],
        ModeArg::All => ScheduleMode::ALL.to_vec(),
    };
    let mut all_runs: Vec<RunResult> = Vec::new();
    let mut stats: Vec<ModeStats> = Vec::new();
    for m in modes {
        let batch: Vec<RunResult> = if exhaustive {
            engine::enumerate_runs_with(&spec, m, runs, plan.as_ref())
        } else {
            (args.seed..args.seed + runs as u64)
                .map(|s| match &plan {
                    Some(p) => engine::inject_partition(&spec, m, p, s),
                    None => engine::run(&spec, m, s),
                })
                .collect()
        }
        .map_err(|e| e.to_string())?;
        let complete = exhaustive && engine::is_exhaustive(&spec);
        stats.push(ModeStats::from_runs(m, &batch, complete));
        all_runs.extend(batch);
    }
    let cost = |m| stats.iter().find(|s| s.mode == m).map(|s| s.mean_cost);
    let c_ratio = match (cost(ScheduleMode::Orchestrated), cost(ScheduleMode::Uncoordinated)) {
        (Some(o), Some(u)) if u > 0.0 => Some(o / u),
        _ => None,
    };
    let mut summary = json!({ "task_id": spec.id, "modes": stats });
    if let Some(c) = c_ratio {
        summary["c_ratio"] = json!(c);
    }
    Ok(match args.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&json!({ "schema": SCHEMA, "runs": all_runs, "summary": summary })),
        Format::Text => {
            let mut s = format!("task: {}\n", spec.id);
            for st in &stats {
                s.push_str(&format!(
                    "{:<14} runs {:>4}  valid {:>4}  rate {:>6.2}%  mean cost {:.2}\n",
                    st.mode.name(),
                    st.runs,
                    st.valid,
                    st.validity_rate * 100.0,
                    st.mean_cost
                ));
            }
            if let Some(c) = c_ratio {
                s.push_str(&format!("c ratio: {c:.3}\n"));
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("mode,runs,valid,validity_rate,mean_cost\n");
            for st in &stats {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    st.mode.name(),
                    st.runs,
                    st.valid,
                    st.validity_rate,
                    st.mean_cost
                ));
            }
            s
        }
    })
}

fn parse_rational(flag: &str, text: &str) -> CliResult<Rational> {
    rational::parse(text).map_err(|e| format!("--{flag}: {e}"))
}

fn cmd_tax(
    args: &Args,
    portfolio: Option<&Path>,
    f: Option<&str>,
    c: Option<&str>,
    c_range: Option<&str>,
) -> CliResult<String> {
    let (c_lo, c_hi) = match (c, c_range) {
        (Some(c), _) => {
            let c = parse_rational("c", c)?;
            (c, c)
        }
        (None, Some(range)) => {
            let (lo, hi) = range
                .split_once(':')
                .ok_or_else(|| format!("--c-range: expected lo:hi, got '{range}'"))?;
            (parse_rational("c-range", lo)?, parse_rational("c-range", hi)?)
        }
        (None, None) => {
            let (lo, hi) = data::C_RANGE_SIMULATED;
            (parse_rational("c-range", lo)?, parse_rational("c-range", hi)?)
        }
    };
    let report = match f {
        Some(f) => TaxReport::new(parse_rational("f", f)?, c_lo, c_hi),
        None => {
            let records = match portfolio {
                Some(p) => load_portfolio(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
                None => data::apqc_portfolio(data::data_dir_from_env().as_deref())
                    .map_err(|e| e.to_string())?,
            };
            let est = estimate_f(&records).map_err(|e| e.to_string())?;
            TaxReport::new(est.f, c_lo, c_hi).map(|t| t.with_estimate(&est))
        }
    }
    .map_err(|e| e.to_string())?;

    let point = report.c == report.c_hi;
    Ok(match args.format.unwrap_or(Format::Text) {
        Format::Json => to_json(&json!({ "schema": SCHEMA, "tax": report })),
        Format::Csv => {
            let mut s = String::from("f,c,t,t_percent\n");
            let mut row = |c: &Rational, t: &Rational| {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    rational::to_text(&report.f),
                    rational::to_text(c),
                    rational::to_text(t),
                    rational::to_percent(t, 0)
                ));
            };
            row(&report.c, &report.t);
            if !point {
                row(&report.c_hi, &report.t_hi);
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "f = {} ({})",
                rational::to_text(&report.f),
                rational::to_decimal(&report.f, 4)
            );
            if let (Some(n), Some((lo, hi))) = (report.n, report.f_ci) {
                s.push_str(&format!(", n = {n}, 95% CI [{lo:.3}, {hi:.3}]"));
            }
            s.push('\n');
            let (lo, hi) = report.t_range();
            if point {
                s.push_str(&format!("c = {}\n", rational::to_decimal(&report.c, 2)));
                s.push_str(&format!("T = {}% ({lo:.4})\n", report.t_percent));
            } else {
                s.push_str(&format!(
                    "c = {} .. {}\n",
                    rational::to_decimal(&report.c, 2),
                    rational::to_decimal(&report.c_hi, 2)
                ));
                s.push_str(&format!(
                    "T = {}% .. {}% ({lo:.4} .. {hi:.4})\n",
                    report.t_range_percent.0, report.t_range_percent.1
                ));
            }
            s
        }
    })
}

fn cmd_reproduce(args: &Args, tax_only: bool, stdout: &mut dyn Write) -> CliResult<i32> {
    let bundle = report::build(&ReportOptions {
        tax_only,
        seed: args.seed,
        data_dir: data::data_dir_from_env(),
    })
    .map_err(|e| e.to_string())?;
    let render = |format: Format| match format {
        Format::Text => bundle.to_text(),
        Format::Json => bundle.to_json(),
        Format::Csv => {
            let mut s = String::from("label,f,c,t,t_percent\n");
            for row in &bundle.tax {
                for cell in &row.cells {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.label,
                        rational::to_text(&row.f),
                        rational::to_text(&cell.c),
                        rational::to_text(&cell.t),
                        cell.t_percent
                    ));
                }
            }
            s
        }
    };
    match &args.out {
        // With --out the file gets the machine-readable bundle and the
        // terminal still gets the text tables.
        Some(path) => {
            let body = render(args.format.unwrap_or(Format::Json));
            report::write_file(path, &body).map_err(|e| format!("{}: {e}", path.display()))?;
            stdout
                .write_all(bundle.to_text().as_bytes())
                .map_err(|e| e.to_string())?;
        }
        None => stdout
            .write_all(render(args.format.unwrap_or(Format::Text)).as_bytes())
            .map_err(|e| e.to_string())?,
    }
    Ok(0)
}
