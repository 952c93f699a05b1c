//! The `reproduce` bundle: classification and simulation tables over the
//! bundled tasks, the portfolio summary and the coordination-tax grid.
//!
//! Every table is built in a fixed order from fixed seeds, so the text and
//! JSON renderings are byte-stable for a given version.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::classifier::{classify, ClassifyError, TestKind, TestResult, Tier};
use crate::data::{self, DataError};
use crate::engine::{enumerate_runs, is_exhaustive, EngineError, ModeStats, ScheduleMode};
use crate::portfolio::{
    coordination_tax_exact, estimate_f, summarize, wilson_interval, FEstimate, PortfolioError,
    Summary,
};
use crate::rational::{self, Rational};
use crate::task::ThompsonType;

pub const SCHEMA: u32 = 1;

/// Seeded schedules drawn for tasks too large to enumerate.
pub const SAMPLE_LIMIT: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{task}: {source}")]
    Classify { task: String, source: ClassifyError },
    #[error("{task}: {source}")]
    Engine { task: String, source: EngineError },
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub tax_only: bool,
    /// First seed of the sampled schedules (only used beyond the
    /// exhaustive threshold).
    pub seed: u64,
    pub data_dir: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationRow {
    pub task_id: String,
    pub tier: Tier,
    pub thompson: ThompsonType,
    pub defaulted: bool,
    pub fired: Vec<TestKind>,
    pub evidence: Vec<TestResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRow {
    pub task_id: String,
    pub tier: Tier,
    pub exhaustive: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    pub modes: Vec<ModeStats>,
    /// Orchestrated mean cost over uncoordinated mean cost.
    pub c_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupationalCi {
    pub monotonic: u64,
    pub total: u64,
    pub share: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct PortfolioBlock {
    pub summary: Summary,
    pub estimate: FEstimate,
    pub occupational: OccupationalCi,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaxCell {
    #[serde(with = "rational")]
    pub c: Rational,
    #[serde(with = "rational")]
    pub t: Rational,
    pub t_percent: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaxRow {
    pub label: String,
    #[serde(with = "rational")]
    pub f: Rational,
    pub cells: Vec<TaxCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub data: String,
    pub exhaustive_limit: usize,
    pub sample_limit: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Vec<ClassificationRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Vec<SimulationRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PortfolioBlock>,
    pub tax: Vec<TaxRow>,
    pub provenance: Provenance,
}

fn r(text: &str) -> Rational {
    rational::parse(text).expect("built-in constants parse")
}

/// Multipliers in the tax grid: the simulated range, then the literature
/// range.
pub fn tax_columns() -> Vec<Rational> {
    let (a, b) = data::C_RANGE_SIMULATED;
    let (c, d) = data::C_RANGE_LITERATURE;
    vec![r(a), r(b), r(c), r(d)]
}

pub fn tax_grid(apqc_exact: Option<Rational>) -> Result<Vec<TaxRow>, PortfolioError> {
    let mut fs = vec![("apqc".to_string(), r(data::APQC_F))];
    if let Some(f) = apqc_exact {
        fs.push(("apqc exact".to_string(), f));
    }
    fs.push(("onet".to_string(), r(data::ONET_F)));
    fs.into_iter()
        .map(|(label, f)| {
            let cells = tax_columns()
                .into_iter()
                .map(|c| {
                    let t = coordination_tax_exact(&f, &c)?;
                    Ok(TaxCell {
                        c,
                        t,
                        t_percent: rational::to_percent(&t, 0),
                    })
                })
                .collect::<Result<_, PortfolioError>>()?;
            Ok(TaxRow { label, f, cells })
        })
        .collect()
}

fn simulate(spec: &crate::task::TaskSpec, tier: Tier, seed: u64) -> Result<SimulationRow, ReportError> {
    let engine = |source| ReportError::Engine {
        task: spec.id.clone(),
        source,
    };
    let exhaustive = is_exhaustive(spec);
    let mut modes = Vec::new();
    for mode in ScheduleMode::ALL {
        let runs = if exhaustive {
            enumerate_runs(spec, mode, 1).map_err(engine)?
        } else {
            (seed..seed + SAMPLE_LIMIT as u64)
                .map(|s| crate::engine::run(spec, mode, s))
                .collect::<Result<_, _>>()
                .map_err(engine)?
        };
        modes.push(ModeStats::from_runs(mode, &runs, exhaustive));
    }
    let cost = |m: ScheduleMode| modes.iter().find(|s| s.mode == m).map_or(0.0, |s| s.mean_cost);
    let base = cost(ScheduleMode::Uncoordinated);
    Ok(SimulationRow {
        task_id: spec.id.clone(),
        tier,
        exhaustive,
        seeds: if exhaustive {
            Vec::new()
        } else {
            (seed..seed + SAMPLE_LIMIT as u64).collect()
        },
        c_ratio: if base > 0.0 { cost(ScheduleMode::Orchestrated) / base } else { 0.0 },
        modes,
    })
}

pub fn build(options: &ReportOptions) -> Result<ReportBundle, ReportError> {
    let dir = options.data_dir.as_deref();
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        data: dir.map_or_else(|| "bundled".to_string(), |d| d.display().to_string()),
        exhaustive_limit: crate::engine::EXHAUSTIVE_LIMIT,
        sample_limit: SAMPLE_LIMIT,
        seed: options.seed,
    };
    if options.tax_only {
        return Ok(ReportBundle {
            schema: SCHEMA,
            classification: None,
            simulation: None,
            portfolio: None,
            tax: tax_grid(None)?,
            provenance,
        });
    }

    let tasks = data::bundled_tasks(dir)?;
    let mut classification = Vec::new();
    let mut simulation = Vec::new();
    for spec in &tasks {
        let c = classify(spec).map_err(|source| ReportError::Classify {
            task: spec.id.clone(),
            source,
        })?;
        simulation.push(simulate(spec, c.tier, options.seed)?);
        classification.push(ClassificationRow {
            task_id: c.task_id.clone(),
            tier: c.tier,
            thompson: c.inferred_thompson,
            defaulted: c.defaulted,
            fired: c.fired().map(|t| t.test).collect(),
            evidence: c.evidence,
        });
    }

    let records = data::apqc_portfolio(dir)?;
    let estimate = estimate_f(&records)?;
    let portfolio = PortfolioBlock {
        summary: summarize(&records)?,
        occupational: OccupationalCi {
            monotonic: data::ONET_MONOTONIC,
            total: data::ONET_TOTAL,
            share: data::ONET_MONOTONIC as f64 / data::ONET_TOTAL as f64,
            ci: wilson_interval(data::ONET_MONOTONIC, data::ONET_TOTAL, 0.95)?,
        },
        estimate,
    };
    Ok(ReportBundle {
        schema: SCHEMA,
        classification: Some(classification),
        simulation: Some(simulation),
        tax: tax_grid(Some(portfolio.estimate.f))?,
        portfolio: Some(portfolio),
        provenance,
    })
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(rows) = &self.classification {
            out.push_str("== classification ==\n");
            let _ = writeln!(out, "{:<20} {:<4} {:<25} fired", "task", "tier", "thompson");
            for row in rows {
                let fired: Vec<String> = row.fired.iter().map(ToString::to_string).collect();
                let fired = if fired.is_empty() { "-".to_string() } else { fired.join(", ") };
                let _ = writeln!(
                    out,
                    "{:<20} {:<4} {:<25} {}",
                    row.task_id,
                    row.tier.label(),
                    row.thompson.to_string(),
                    fired
                );
            }
            let totals: Vec<String> = [Tier::M, Tier::MO, Tier::NM]
                .iter()
                .map(|&tier| {
                    let n = rows.iter().filter(|r| r.tier == tier).count();
                    format!("{}={n}", tier.label())
                })
                .collect();
            let _ = writeln!(out, "{}\n", totals.join(" "));
        }
        if let Some(rows) = &self.simulation {
            out.push_str("== simulation (validity %, mean messages) ==\n");
            let _ = writeln!(
                out,
                "{:<20} {:<4} {:>14} {:>14} {:>14} {:>7}",
                "task", "tier", "uncoordinated", "causal", "orchestrated", "c"
            );
            for row in rows {
                let cell = |m: ScheduleMode| {
                    row.modes.iter().find(|s| s.mode == m).map_or(String::new(), |s| {
                        format!("{:>4.0}% {:>6.2}", s.validity_rate * 100.0, s.mean_cost)
                    })
                };
                let _ = writeln!(
                    out,
                    "{:<20} {:<4} {:>14} {:>14} {:>14} {:>7.3}",
                    row.task_id,
                    row.tier.label(),
                    cell(ScheduleMode::Uncoordinated),
                    cell(ScheduleMode::Causal),
                    cell(ScheduleMode::Orchestrated),
                    row.c_ratio
                );
            }
            out.push('\n');
        }
        if let Some(p) = &self.portfolio {
            out.push_str("== portfolio ==\n");
            let _ = write!(out, "{}", p.summary);
            let e = &p.estimate;
            let _ = writeln!(
                out,
                "f = {}/{} = {:.4}  95% CI [{:.3}, {:.3}]",
                e.non_monotonic,
                e.n,
                rational::to_f64(&e.f),
                e.ci.0,
                e.ci.1
            );
            let o = &p.occupational;
            let _ = writeln!(
                out,
                "occupational monotonic share = {}/{} = {:.4}  95% CI [{:.3}, {:.3}]",
                o.monotonic, o.total, o.share, o.ci.0, o.ci.1
            );
            out.push('\n');
        }
        out.push_str("== coordination tax T(f, c) ==\n");
        let _ = write!(out, "{:<12} {:>8}", "", "f");
        if let Some(first) = self.tax.first() {
            for cell in &first.cells {
                let _ = write!(out, " {:>7}", format!("c={}", rational::to_decimal(&cell.c, 1)));
            }
        }
        out.push('\n');
        for row in &self.tax {
            let _ = write!(out, "{:<12} {:>8}", row.label, rational::to_decimal(&row.f, 4));
            for cell in &row.cells {
                let _ = write!(out, " {:>7}", format!("{}%", cell.t_percent));
            }
            out.push('\n');
        }
        let p = &self.provenance;
        let _ = writeln!(
            out,
            "\n{} {} (data: {}, exhaustive up to {} subtasks, else {} schedules from seed {})",
            p.tool, p.version, p.data, p.exhaustive_limit, p.sample_limit, p.seed
        );
        out
    }
}

/// Writes `text` to `path`, creating parent directories as needed.
pub fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)
}
