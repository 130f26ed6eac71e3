//! Cronbach's alpha and descriptive statistics over complete response matrices.
//!
//! Cells are canonical (0-floored) integer ratings. All variance sums are
//! accumulated exactly in integer arithmetic; floating point enters only at
//! the final division, so alpha is bit-for-bit independent of the variance
//! denominator convention.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One questionnaire item: a criterion rated within a scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemKey {
    pub criterion: String,
    pub scenario: String,
}

impl ItemKey {
    pub fn new(criterion: impl Into<String>, scenario: impl Into<String>) -> Self {
        Self {
            criterion: criterion.into(),
            scenario: scenario.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// n − 1 denominator.
    #[default]
    Sample,
    /// n denominator.
    Population,
}

impl VarianceConvention {
    /// Convert an exact scatter `n·Σx² − (Σx)²` into a variance.
    fn scale(self, scatter: i128, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Self::Sample => scatter as f64 / (n * (n - 1.0)),
            Self::Population => scatter as f64 / (n * n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("{0} items; at least 2 are required")]
    TooFewItems(usize),
    #[error("{0} respondents; at least 2 are required")]
    TooFewRows(usize),
    #[error("total score variance is zero")]
    DegenerateMatrix,
    #[error("criterion {0} is not a column of the matrix")]
    UnknownCriterion(String),
    #[error("criterion subset is empty")]
    EmptySubset,
    #[error("row {row} has {got} cells, expected {expected}")]
    ShapeMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("cell value {value} exceeds scale maximum {max}")]
    ValueOutOfRange { value: u32, max: u32 },
    #[error("duplicate row or column id {0}")]
    DuplicateId(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyMatrix => "EMPTY_MATRIX",
            Self::TooFewItems(_) => "TOO_FEW_ITEMS",
            Self::TooFewRows(_) => "TOO_FEW_ROWS",
            Self::DegenerateMatrix => "DEGENERATE_MATRIX",
            Self::UnknownCriterion(_) => "UNKNOWN_CRITERION",
            Self::EmptySubset => "EMPTY_SUBSET",
            Self::ShapeMismatch { .. } => "SHAPE_MISMATCH",
            Self::ValueOutOfRange { .. } => "VALUE_OUT_OF_RANGE",
            Self::DuplicateId(_) => "DUPLICATE_ID",
        }
    }
}

/// Respondents × items, complete rows only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    rows: Vec<String>,
    cols: Vec<ItemKey>,
    cells: Vec<u32>,
    scale_max: u32,
    excluded_rows: usize,
}

impl ResponseMatrix {
    pub fn new(
        rows: Vec<String>,
        cols: Vec<ItemKey>,
        cells: Vec<Vec<u32>>,
        scale_max: u32,
    ) -> Result<Self, StatsError> {
        if cells.len() != rows.len() {
            return Err(StatsError::ShapeMismatch {
                row: cells.len(),
                got: cells.len(),
                expected: rows.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert(r) {
                return Err(StatsError::DuplicateId(r.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &cols {
            if !seen.insert(c) {
                return Err(StatsError::DuplicateId(format!(
                    "{}@{}",
                    c.criterion, c.scenario
                )));
            }
        }
        let mut flat = Vec::with_capacity(rows.len() * cols.len());
        for (i, row) in cells.into_iter().enumerate() {
            if row.len() != cols.len() {
                return Err(StatsError::ShapeMismatch {
                    row: i,
                    got: row.len(),
                    expected: cols.len(),
                });
            }
            if let Some(&value) = row.iter().find(|&&v| v > scale_max) {
                return Err(StatsError::ValueOutOfRange {
                    value,
                    max: scale_max,
                });
            }
            flat.extend(row);
        }
        Ok(Self {
            rows,
            cols,
            cells: flat,
            scale_max,
            excluded_rows: 0,
        })
    }

    /// Build from possibly incomplete rows, keeping only rows that cover every
    /// column. The number of dropped rows is kept in [`Self::excluded_rows`].
    pub fn from_partial_rows<I>(
        cols: Vec<ItemKey>,
        scale_max: u32,
        rows: I,
    ) -> Result<Self, StatsError>
    where
        I: IntoIterator<Item = (String, BTreeMap<ItemKey, u32>)>,
    {
        let mut ids = Vec::new();
        let mut cells = Vec::new();
        let mut excluded = 0;
        for (id, answers) in rows {
            let row: Option<Vec<u32>> = cols.iter().map(|c| answers.get(c).copied()).collect();
            match row {
                Some(row) => {
                    ids.push(id);
                    cells.push(row);
                }
                None => excluded += 1,
            }
        }
        let mut m = Self::new(ids, cols, cells, scale_max)?;
        m.excluded_rows = excluded;
        Ok(m)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[ItemKey] {
        &self.cols
    }

    pub fn scale_max(&self) -> u32 {
        self.scale_max
    }

    pub fn excluded_rows(&self) -> usize {
        self.excluded_rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.cols.len() + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let k = self.cols.len();
        &self.cells[row * k..(row + 1) * k]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = u32> + '_ {
        (0..self.rows.len()).map(move |r| self.get(r, col))
    }

    /// Keep only the columns matching `keep`, in their existing order.
    pub fn select_columns(&self, keep: impl Fn(&ItemKey) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.cols.len())
            .filter(|&j| keep(&self.cols[j]))
            .collect();
        let cols = idx.iter().map(|&j| self.cols[j].clone()).collect();
        let cells = (0..self.rows.len())
            .flat_map(|r| idx.iter().map(move |&j| self.get(r, j)))
            .collect();
        Self {
            rows: self.rows.clone(),
            cols,
            cells,
            scale_max: self.scale_max,
            excluded_rows: self.excluded_rows,
        }
    }

    pub fn for_scenario(&self, scenario: &str) -> Self {
        self.select_columns(|c| c.scenario == scenario)
    }

    /// Replace row labels, e.g. respondent ids with display aliases.
    pub fn relabel_rows(mut self, relabel: impl Fn(&str) -> String) -> Self {
        self.rows = self.rows.iter().map(|r| relabel(r)).collect();
        self
    }
}

/// Exact `n·Σx² − (Σx)²` for a sequence of integers.
fn scatter(values: impl Iterator<Item = i128>) -> (i128, i128, usize) {
    let (mut sum, mut sq, mut n) = (0i128, 0i128, 0usize);
    for v in values {
        sum += v;
        sq += v * v;
        n += 1;
    }
    (n as i128 * sq - sum * sum, sum, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemVariance {
    pub criterion: String,
    pub scenario: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityReport {
    pub alpha: f64,
    pub k_items: usize,
    pub n_respondents: usize,
    pub convention: VarianceConvention,
    pub item_variances: Vec<ItemVariance>,
    pub total_variance: f64,
}

impl ReliabilityReport {
    /// Alpha from the stored variances alone.
    pub fn recompute_alpha(&self) -> f64 {
        let k = self.k_items as f64;
        let item_sum: f64 = self.item_variances.iter().map(|v| v.variance).sum();
        k / (k - 1.0) * (1.0 - item_sum / self.total_variance)
    }
}

pub fn cronbach_alpha(m: &ResponseMatrix) -> Result<ReliabilityReport, StatsError> {
    cronbach_alpha_with(m, VarianceConvention::Sample)
}

pub fn cronbach_alpha_with(
    m: &ResponseMatrix,
    convention: VarianceConvention,
) -> Result<ReliabilityReport, StatsError> {
    let (n, k) = (m.n_rows(), m.n_cols());
    if k < 2 {
        return Err(StatsError::TooFewItems(k));
    }
    if n < 2 {
        return Err(StatsError::TooFewRows(n));
    }

    let item_scatter: Vec<i128> = (0..k)
        .map(|j| scatter(m.column(j).map(i128::from)).0)
        .collect();
    let (total_scatter, _, _) =
        scatter((0..n).map(|r| m.row(r).iter().map(|&v| i128::from(v)).sum::<i128>()));
    if total_scatter == 0 {
        return Err(StatsError::DegenerateMatrix);
    }

    let item_scatter_sum: i128 = item_scatter.iter().sum();
    let k_wide = k as i128;
    let numerator = k_wide * (total_scatter - item_scatter_sum);
    let denominator = (k_wide - 1) * total_scatter;
    let alpha = numerator as f64 / denominator as f64;

    let item_variances = m
        .cols()
        .iter()
        .zip(&item_scatter)
        .map(|(c, &s)| ItemVariance {
            criterion: c.criterion.clone(),
            scenario: c.scenario.clone(),
            variance: convention.scale(s, n),
        })
        .collect();

    Ok(ReliabilityReport {
        alpha,
        k_items: k,
        n_respondents: n,
        convention,
        item_variances,
        total_variance: convention.scale(total_scatter, n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemStat {
    pub criterion: String,
    pub scenario: String,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemStats {
    pub convention: VarianceConvention,
    pub items: Vec<ItemStat>,
}

impl ItemStats {
    pub fn get(&self, criterion: &str, scenario: &str) -> Option<&ItemStat> {
        self.items
            .iter()
            .find(|s| s.criterion == criterion && s.scenario == scenario)
    }
}

/// Standard deviation from an exact scatter; a lone observation has sd 0.
fn sd_from_scatter(s: i128, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        VarianceConvention::Sample.scale(s, n).sqrt()
    }
}

pub fn item_stats(m: &ResponseMatrix) -> Result<ItemStats, StatsError> {
    let n = m.n_rows();
    if n == 0 {
        return Err(StatsError::EmptyMatrix);
    }
    let items = m
        .cols()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let (s, sum, _) = scatter(m.column(j).map(i128::from));
            ItemStat {
                criterion: c.criterion.clone(),
                scenario: c.scenario.clone(),
                mean: sum as f64 / n as f64,
                sd: sd_from_scatter(s, n),
                n,
            }
        })
        .collect();
    Ok(ItemStats {
        convention: VarianceConvention::Sample,
        items,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespondentSum {
    pub respondent: String,
    pub sum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespondentSumStats {
    pub criteria: Vec<String>,
    pub n_items: usize,
    /// Items summed × remapped scale maximum.
    pub theoretical_max: u64,
    pub sums: Vec<RespondentSum>,
    pub mean: f64,
    pub sd: f64,
    pub convention: VarianceConvention,
}

/// Per-respondent totals over the columns whose criterion is in `subset`.
pub fn respondent_sums(
    m: &ResponseMatrix,
    subset: &[String],
) -> Result<RespondentSumStats, StatsError> {
    if subset.is_empty() {
        return Err(StatsError::EmptySubset);
    }
    let wanted: BTreeSet<&str> = subset.iter().map(String::as_str).collect();
    let present: BTreeSet<&str> = m.cols().iter().map(|c| c.criterion.as_str()).collect();
    if let Some(missing) = wanted.iter().find(|c| !present.contains(*c)) {
        return Err(StatsError::UnknownCriterion(missing.to_string()));
    }
    let n = m.n_rows();
    if n == 0 {
        return Err(StatsError::EmptyMatrix);
    }

    let idx: Vec<usize> = (0..m.n_cols())
        .filter(|&j| wanted.contains(m.cols()[j].criterion.as_str()))
        .collect();
    let sums: Vec<RespondentSum> = m
        .rows()
        .iter()
        .enumerate()
        .map(|(r, id)| RespondentSum {
            respondent: id.clone(),
            sum: idx.iter().map(|&j| u64::from(m.get(r, j))).sum(),
        })
        .collect();
    let (s, total, _) = scatter(sums.iter().map(|s| i128::from(s.sum)));

    let criteria = m
        .cols()
        .iter()
        .map(|c| &c.criterion)
        .filter(|c| wanted.contains(c.as_str()))
        .fold(Vec::<String>::new(), |mut acc, c| {
            if !acc.contains(c) {
                acc.push(c.clone());
            }
            acc
        });

    Ok(RespondentSumStats {
        criteria,
        n_items: idx.len(),
        theoretical_max: idx.len() as u64 * u64::from(m.scale_max()),
        sums,
        mean: total as f64 / n as f64,
        sd: sd_from_scatter(s, n),
        convention: VarianceConvention::Sample,
    })
}
