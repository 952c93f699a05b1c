//! Portfolio statistics and the coordination tax.
//!
//! With a fraction `f` of tasks that need coordination and a coordination
//! cost multiplier `c > 1`, coordinating every task costs `n·c` while
//! coordinating only the non-monotonic ones costs `n·(1 − f + f·c)`. The tax
//! is the avoidable share of the uniform spend:
//!
//! ```text
//! T(f, c) = (1 − f)(c − 1) / c
//! ```
//!
//! `f` counts only NM tasks; M-O tasks are monotonic.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::classifier::Tier;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioRecord {
    pub task_id: String,
    pub category: String,
    pub tier: Tier,
}

#[derive(Debug, thiserror::Error)]
pub enum PortfolioError {
    #[error("portfolio is empty")]
    EmptyPortfolio,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("portfolio csv: {0}")]
    Csv(String),
}

/// Reads `task_id,category,tier` records.
pub fn load_portfolio(text: &str) -> Result<Vec<PortfolioRecord>, PortfolioError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| PortfolioError::Csv(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["task_id", "category", "tier"] {
        return Err(PortfolioError::Csv(format!(
            "expected header task_id,category,tier, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| PortfolioError::Csv(e.to_string())))
        .collect()
}

pub fn write_portfolio(records: &[PortfolioRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("records always serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn check_domain_f64(f: f64, c: f64) -> Result<(), PortfolioError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(PortfolioError::Domain(format!("f = {f} is outside [0, 1]")));
    }
    if c.is_nan() || c <= 1.0 {
        return Err(PortfolioError::Domain(format!("c = {c} must exceed 1")));
    }
    Ok(())
}

fn check_domain(f: &Rational, c: &Rational) -> Result<(), PortfolioError> {
    if f < &Rational::zero() || f > &Rational::one() {
        return Err(PortfolioError::Domain(format!(
            "f = {} is outside [0, 1]",
            rational::to_text(f)
        )));
    }
    if c <= &Rational::one() {
        return Err(PortfolioError::Domain(format!(
            "c = {} must exceed 1",
            rational::to_text(c)
        )));
    }
    Ok(())
}

/// Avoidable share of uniform coordination spend.
pub fn coordination_tax(f: f64, c: f64) -> Result<f64, PortfolioError> {
    check_domain_f64(f, c)?;
    Ok((1.0 - f) * (c - 1.0) / c)
}

/// [`coordination_tax`] in exact arithmetic.
pub fn coordination_tax_exact(f: &Rational, c: &Rational) -> Result<Rational, PortfolioError> {
    check_domain(f, c)?;
    let one = Rational::one();
    Ok((one - f) * (c - one) / c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxCosts {
    /// Spend when every task is coordinated: `n·c`.
    pub uniform: Rational,
    /// Spend when only non-monotonic tasks are coordinated: `n·(1 − f + f·c)`.
    pub selective: Rational,
    /// `(uniform − selective) / uniform`.
    pub tax: Rational,
}

pub fn tax_from_costs(n: u64, f: &Rational, c: &Rational) -> Result<TaxCosts, PortfolioError> {
    check_domain(f, c)?;
    if n == 0 {
        return Err(PortfolioError::Domain("n must be at least 1".into()));
    }
    let n = Rational::from_integer(n as i128);
    let one = Rational::one();
    let uniform = n * c;
    let selective = n * (one - f + f * c);
    let tax = (uniform - selective) / uniform;
    Ok(TaxCosts {
        uniform,
        selective,
        tax,
    })
}

/// Wilson score interval for `k` successes in `n` trials, clamped to [0, 1].
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> Result<(f64, f64), PortfolioError> {
    if n == 0 || k > n {
        return Err(PortfolioError::Domain(format!("need 0 <= k <= n and n >= 1, got k={k}, n={n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(PortfolioError::Domain(format!(
            "confidence {confidence} is outside (0, 1)"
        )));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FEstimate {
    pub n: usize,
    pub non_monotonic: usize,
    #[serde(with = "rational")]
    pub f: Rational,
    pub ci: (f64, f64),
}

/// Non-monotonic fraction with its 95% Wilson interval.
pub fn estimate_f(records: &[PortfolioRecord]) -> Result<FEstimate, PortfolioError> {
    if records.is_empty() {
        return Err(PortfolioError::EmptyPortfolio);
    }
    let n = records.len();
    let nm = records.iter().filter(|r| r.tier == Tier::NM).count();
    Ok(FEstimate {
        n,
        non_monotonic: nm,
        f: Rational::new(nm as i128, n as i128),
        ci: wilson_interval(nm as u64, n as u64, 0.95)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub m: usize,
    pub m_o: usize,
    pub nm: usize,
}

impl CategoryRow {
    fn empty(category: &str) -> Self {
        CategoryRow {
            category: category.to_string(),
            m: 0,
            m_o: 0,
            nm: 0,
        }
    }

    fn add(&mut self, tier: Tier) {
        match tier {
            Tier::M => self.m += 1,
            Tier::MO => self.m_o += 1,
            Tier::NM => self.nm += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.m + self.m_o + self.nm
    }

    /// `(M + M-O) / total`.
    pub fn monotonic(&self) -> Rational {
        Rational::new((self.m + self.m_o) as i128, self.total().max(1) as i128)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<CategoryRow>,
    pub totals: CategoryRow,
}

/// Per-category tier counts, ordered by monotonic share (descending), then
/// category name.
pub fn summarize(records: &[PortfolioRecord]) -> Result<Summary, PortfolioError> {
    if records.is_empty() {
        return Err(PortfolioError::EmptyPortfolio);
    }
    let mut by_category: BTreeMap<&str, CategoryRow> = BTreeMap::new();
    let mut totals = CategoryRow::empty("Total");
    for r in records {
        by_category
            .entry(&r.category)
            .or_insert_with(|| CategoryRow::empty(&r.category))
            .add(r.tier);
        totals.add(r.tier);
    }
    let mut rows: Vec<CategoryRow> = by_category.into_values().collect();
    rows.sort_by(|a, b| {
        b.monotonic()
            .cmp(&a.monotonic())
            .then_with(|| a.category.cmp(&b.category))
    });
    Ok(Summary { rows, totals })
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|r| r.category.len())
            .max()
            .unwrap_or(0)
            .max(8);
        writeln!(f, "{:<width$}  {:>3}  {:>3}  {:>3}  {:>6}", "category", "M", "M-O", "NM", "%mono")?;
        for r in self.rows.iter().chain(std::iter::once(&self.totals)) {
            let places = if std::ptr::eq(r, &self.totals) { 1 } else { 0 };
            writeln!(
                f,
                "{:<width$}  {:>3}  {:>3}  {:>3}  {:>5}%",
                r.category,
                r.m,
                r.m_o,
                r.nm,
                rational::to_percent(&r.monotonic(), places)
            )?;
        }
        Ok(())
    }
}

/// Tax at one `f` over a multiplier interval `[c_lo, c_hi]`. `c` and `t`
/// are taken at the lower end; a point estimate has `c_lo == c_hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(with = "rational")]
    pub f: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_ci: Option<(f64, f64)>,
    #[serde(with = "rational")]
    pub c: Rational,
    #[serde(with = "rational")]
    pub t: Rational,
    #[serde(with = "rational")]
    pub c_hi: Rational,
    #[serde(with = "rational")]
    pub t_hi: Rational,
    pub t_percent: String,
    pub t_range_percent: (String, String),
}

impl TaxReport {
    pub fn new(f: Rational, c_lo: Rational, c_hi: Rational) -> Result<Self, PortfolioError> {
        let t = coordination_tax_exact(&f, &c_lo)?;
        let t_hi = coordination_tax_exact(&f, &c_hi)?;
        Ok(TaxReport {
            n: None,
            f,
            f_ci: None,
            c: c_lo,
            t,
            c_hi,
            t_hi,
            t_percent: rational::to_percent(&t, 0),
            t_range_percent: (rational::to_percent(&t, 0), rational::to_percent(&t_hi, 0)),
        })
    }

    pub fn with_estimate(mut self, est: &FEstimate) -> Self {
        self.n = Some(est.n);
        self.f_ci = Some(est.ci);
        self
    }

    pub fn t_range(&self) -> (f64, f64) {
        (rational::to_f64(&self.t), rational::to_f64(&self.t_hi))
    }
}
