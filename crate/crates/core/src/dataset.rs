//! River observation records: CSV ingestion, cleaning, IQR outlier
//! filtering and descriptive statistics.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("input is empty")]
    Empty,
    #[error("missing required column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One of the five observed quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Column {
    /// Channel width, m.
    W,
    /// Channel depth, m.
    D,
    /// Cross-sectional mean velocity, m/s.
    U,
    /// Shear velocity, m/s.
    Ustar,
    /// Longitudinal dispersion coefficient, m²/s.
    Dl,
}

impl Column {
    pub const ALL: [Column; 5] = [Column::W, Column::D, Column::U, Column::Ustar, Column::Dl];

    pub fn name(self) -> &'static str {
        match self {
            Column::W => "w",
            Column::D => "d",
            Column::U => "U",
            Column::Ustar => "Ustar",
            Column::Dl => "Dl",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::ALL.into_iter().find(|c| c.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed CSV row. Cells that were blank, `NA` or not a number are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub values: [Option<f64>; 5],
}

impl Record {
    pub fn get(&self, column: Column) -> Option<f64> {
        self.values[column.index()]
    }

    /// Converts to a [`Sample`] when every field is present, finite and positive.
    pub fn to_sample(&self) -> Option<Sample> {
        let mut v = [0.0; 5];
        for (slot, value) in v.iter_mut().zip(self.values) {
            match value {
                Some(x) if x.is_finite() && x > 0.0 => *slot = x,
                _ => return None,
            }
        }
        Some(Sample::new(v[0], v[1], v[2], v[3], v[4]))
    }
}

impl From<Sample> for Record {
    fn from(s: Sample) -> Self {
        Record {
            values: Column::ALL.map(|c| Some(s.get(c))),
        }
    }
}

/// One river observation. All fields are finite and strictly positive once
/// a sample has passed [`clean`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub w: f64,
    pub d: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "Ustar")]
    pub ustar: f64,
    #[serde(rename = "Dl")]
    pub dl: f64,
}

impl Sample {
    pub fn new(w: f64, d: f64, u: f64, ustar: f64, dl: f64) -> Self {
        Sample { w, d, u, ustar, dl }
    }

    pub fn get(&self, column: Column) -> f64 {
        match column {
            Column::W => self.w,
            Column::D => self.d,
            Column::U => self.u,
            Column::Ustar => self.ustar,
            Column::Dl => self.dl,
        }
    }

    pub fn set(&mut self, column: Column, value: f64) {
        match column {
            Column::W => self.w = value,
            Column::D => self.d = value,
            Column::U => self.u = value,
            Column::Ustar => self.ustar = value,
            Column::Dl => self.dl = value,
        }
    }

    /// Value of a named variable (`w`, `d`, `U`, `Ustar`, `Dl`).
    pub fn value_of(&self, name: &str) -> Option<f64> {
        Column::from_name(name).map(|c| self.get(c))
    }
}

/// Parses comma-delimited text with a header row. Column order is free;
/// `w`, `d`, `U` and `Ustar` are required, `Dl` may be absent.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<Record>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(DatasetError::Empty);
    }
    let mut positions = [None; 5];
    for (pos, name) in headers.iter().enumerate() {
        if let Some(col) = Column::from_name(name) {
            positions[col.index()].get_or_insert(pos);
        }
    }
    for col in [Column::W, Column::D, Column::U, Column::Ustar] {
        if positions[col.index()].is_none() {
            return Err(DatasetError::MissingColumn(col.name()));
        }
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        let values = positions.map(|pos| pos.and_then(|p| row.get(p)).and_then(parse_cell));
        out.push(Record { values });
    }
    Ok(out)
}

fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
        return None;
    }
    cell.parse().ok()
}

/// Drops records with any missing, non-finite or non-positive field, then
/// exact duplicates (bitwise equality of all five parsed values). The first
/// occurrence of each row is kept in order.
pub fn clean(records: &[Record]) -> Vec<Sample> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(Record::to_sample)
        .filter(|s| seen.insert(Column::ALL.map(|c| s.get(c).to_bits())))
        .collect()
}

/// Tukey fences computed from split-half quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub q1: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Fences {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// First and third quartiles as medians of the lower and upper halves.
/// For an odd count the overall median is left out of both halves; a single
/// value is its own quartiles.
pub fn quartiles(values: &[f64]) -> Result<(f64, f64), DatasetError> {
    if values.is_empty() {
        return Err(DatasetError::Empty);
    }
    let sorted = sorted_copy(values);
    let n = sorted.len();
    if n == 1 {
        return Ok((sorted[0], sorted[0]));
    }
    let half = n / 2;
    Ok((median_sorted(&sorted[..half]), median_sorted(&sorted[n - half..])))
}

pub fn iqr_fences(values: &[f64]) -> Result<Fences, DatasetError> {
    let (q1, q3) = quartiles(values)?;
    let iqr = q3 - q1;
    Ok(Fences {
        q1,
        q3,
        lo: q1 - 1.5 * iqr,
        hi: q3 + 1.5 * iqr,
    })
}

fn column_values(samples: &[Sample], column: Column) -> Vec<f64> {
    samples.iter().map(|s| s.get(column)).collect()
}

/// Single-pass IQR filter: fences for every selected column are computed on
/// the input set first, then a sample is kept iff it lies inside all of them.
///
/// Running the filter again on its output may remove more rows, since the
/// fences are recomputed on the smaller set.
pub fn filter_outliers(samples: &[Sample], columns: &[Column]) -> Vec<Sample> {
    if samples.is_empty() {
        return Vec::new();
    }
    let fences: Vec<(Column, Fences)> = columns
        .iter()
        .map(|&c| (c, iqr_fences(&column_values(samples, c)).expect("non-empty")))
        .collect();
    samples
        .iter()
        .filter(|s| fences.iter().all(|(c, f)| f.contains(s.get(*c))))
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub iqr: f64,
    pub std: f64,
    pub var: f64,
    pub kurtosis: f64,
    pub mad: f64,
    pub skewness: f64,
    /// Set when skewness or kurtosis is undefined (zero spread or too few
    /// values) and reported as 0.
    pub degenerate: bool,
}

/// Descriptive statistics keyed by column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub columns: IndexMap<String, ColumnStats>,
}

/// Statistics of one column. `std`/`var` use the n-1 denominator; skewness
/// and excess kurtosis are the bias-adjusted sample estimators (G1, G2).
pub fn column_stats(values: &[f64]) -> Result<ColumnStats, DatasetError> {
    if values.is_empty() {
        return Err(DatasetError::Empty);
    }
    let sorted = sorted_copy(values);
    let n = sorted.len();
    let nf = n as f64;
    let median = median_sorted(&sorted);
    let (q1, q3) = quartiles(&sorted)?;

    let mean = sorted.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in &sorted {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let var = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;

    let mut degenerate = false;
    let skewness = if m2 > 0.0 && n >= 3 {
        let g1 = m3 / m2.powf(1.5);
        (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1
    } else {
        degenerate = true;
        0.0
    };
    let kurtosis = if m2 > 0.0 && n >= 4 {
        let g2 = m4 / (m2 * m2) - 3.0;
        ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
    } else {
        degenerate = true;
        0.0
    };

    let deviations: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    let mad = median_sorted(&sorted_copy(&deviations));

    Ok(ColumnStats {
        count: n,
        min: sorted[0],
        median,
        max: sorted[n - 1],
        iqr: q3 - q1,
        std: var.sqrt(),
        var,
        kurtosis,
        mad,
        skewness,
        degenerate,
    })
}

pub fn summarize(samples: &[Sample]) -> Result<DatasetStats, DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut columns = IndexMap::new();
    for c in Column::ALL {
        columns.insert(c.name().to_string(), column_stats(&column_values(samples, c))?);
    }
    Ok(DatasetStats { columns })
}

/// Ranks starting at 1; tied values share the average of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Off-diagonal pairs whose correlation is undefined (a constant
    /// column); their entry is reported as 0.
    pub undefined: Vec<(String, String)>,
}

pub fn spearman_matrix(samples: &[Sample]) -> Result<SpearmanMatrix, DatasetError> {
    if samples.len() < 3 {
        return Err(DatasetError::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    let cols: Vec<Vec<f64>> = Column::ALL.iter().map(|&c| column_values(samples, c)).collect();
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    let mut undefined = Vec::new();
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let rho = match spearman(&cols[i], &cols[j]) {
                Some(r) => r,
                None => {
                    undefined.push((Column::ALL[i].to_string(), Column::ALL[j].to_string()));
                    0.0
                }
            };
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(SpearmanMatrix {
        columns: Column::ALL.iter().map(|c| c.to_string()).collect(),
        values,
        undefined,
    })
}
