//! Bundled task specs and portfolio data.
//!
//! The files under `data/` are compiled into the binary. Setting
//! `CALMTIER_DATA` to a directory with the same layout (`tasks/*.json`,
//! `apqc_portfolio.csv`) replaces them at run time.

use std::path::{Path, PathBuf};

use crate::portfolio::{load_portfolio, PortfolioError, PortfolioRecord};
use crate::task::{load_task, TaskError, TaskSpec};

pub const DATA_ENV: &str = "CALMTIER_DATA";

/// Headline occupational-task counts: monotonic statements out of all
/// classified statements.
pub const ONET_MONOTONIC: u64 = 5564;
pub const ONET_TOTAL: u64 = 13417;

/// Non-monotonic fractions as quoted for the two corpora.
pub const APQC_F: &str = "0.26";
pub const ONET_F: &str = "0.58";

/// Measured and literature multiplier ranges offered by the `tax` command.
pub const C_RANGE_SIMULATED: (&str, &str) = ("2.3", "4.4");
pub const C_RANGE_LITERATURE: (&str, &str) = ("4", "10");

const TASKS: [(&str, &str); 10] = [
    ("strategy_pillars", include_str!("../data/tasks/strategy_pillars.json")),
    ("feature_specs", include_str!("../data/tasks/feature_specs.json")),
    ("marketing_content", include_str!("../data/tasks/marketing_content.json")),
    ("security_audit", include_str!("../data/tasks/security_audit.json")),
    ("stage_gate", include_str!("../data/tasks/stage_gate.json")),
    ("ticket_escalation", include_str!("../data/tasks/ticket_escalation.json")),
    ("budget", include_str!("../data/tasks/budget.json")),
    ("backlog_sprint", include_str!("../data/tasks/backlog_sprint.json")),
    ("production_schedule", include_str!("../data/tasks/production_schedule.json")),
    ("headcount", include_str!("../data/tasks/headcount.json")),
];

const APQC_PORTFOLIO: &str = include_str!("../data/apqc_portfolio.csv");

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{name}: {source}")]
    Task { name: String, source: TaskError },
    #[error("{0}")]
    Portfolio(#[from] PortfolioError),
}

/// Directory named by `CALMTIER_DATA`, if set and non-empty.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The ten bundled task specs, or every `tasks/*.json` under `dir` sorted by
/// file name.
pub fn bundled_tasks(dir: Option<&Path>) -> Result<Vec<TaskSpec>, DataError> {
    let Some(dir) = dir else {
        return TASKS
            .iter()
            .map(|(name, doc)| {
                load_task(doc).map_err(|source| DataError::Task {
                    name: (*name).to_string(),
                    source,
                })
            })
            .collect();
    };
    let tasks_dir = dir.join("tasks");
    let entries = std::fs::read_dir(&tasks_dir).map_err(|source| DataError::Io {
        path: tasks_dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            load_task(&read(p)?).map_err(|source| DataError::Task {
                name: p.display().to_string(),
                source,
            })
        })
        .collect()
}

/// A single bundled spec by id.
pub fn bundled_task(name: &str) -> Option<TaskSpec> {
    TASKS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, doc)| load_task(doc).expect("bundled specs are valid"))
}

pub fn apqc_portfolio(dir: Option<&Path>) -> Result<Vec<PortfolioRecord>, DataError> {
    let text = match dir {
        Some(d) => read(&d.join("apqc_portfolio.csv"))?,
        None => APQC_PORTFOLIO.to_string(),
    };
    Ok(load_portfolio(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_loads() {
        let tasks = bundled_tasks(None).unwrap();
        assert_eq!(tasks.len(), 10);
        for ((name, _), spec) in TASKS.iter().zip(&tasks) {
            assert_eq!(*name, spec.id);
        }
        assert_eq!(apqc_portfolio(None).unwrap().len(), 65);
        assert!(bundled_task("budget").is_some());
        assert!(bundled_task("nope").is_none());
    }

    #[test]
    fn data_dir_override_reads_files() {
        let dir = std::env::temp_dir().join(format!("calmtier-data-{}", std::process::id()));
        std::fs::create_dir_all(dir.join("tasks")).unwrap();
        std::fs::write(dir.join("tasks/one.json"), r#"{"id":"one","name":"one"}"#).unwrap();
        std::fs::write(dir.join("apqc_portfolio.csv"), "task_id,category,tier\nt,c,NM\n").unwrap();
        let tasks = bundled_tasks(Some(&dir)).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(apqc_portfolio(Some(&dir)).unwrap().len(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(bundled_tasks(Some(&dir)).is_err());
    }
}
