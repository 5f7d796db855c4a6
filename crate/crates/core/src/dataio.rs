//! CSV ingestion and preprocessing for multi-site tabular data.
//!
//! Each site is one CSV file with the same schema. Rows with a missing value in
//! any selected column are dropped. Covariates are mapped affinely onto
//! `[0, 0.5]` with minima and maxima pooled over the training rows of every
//! site, and each site's label offset is its own prevalence.
//!
//! The default schema is the headerless 14-column layout of the processed UCI
//! heart-disease files, keeping age, sex, cp, exang, thalach, oldpeak and
//! trestbps and labelling a patient as diseased when `num > 0`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::PathBuf;

use rand::seq::index::sample;

use crate::classifier::ServerDataset;
use crate::{seed, Error, Result};

/// Column names of the processed UCI heart-disease files.
pub const HEART_COLUMNS: [&str; 14] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak", "slope", "ca", "thal",
    "num",
];

/// Default heart-disease covariates.
pub const HEART_COVARIATES: [&str; 7] = ["age", "sex", "cp", "exang", "thalach", "oldpeak", "trestbps"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    /// Label is 1 when the value is positive.
    Positive,
    /// Value must be exactly 0 or 1.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    /// Column names for headerless files; `None` reads them from the header.
    pub columns: Option<Vec<String>>,
    pub covariates: Vec<String>,
    pub label: String,
    pub label_rule: LabelRule,
}

impl Schema {
    pub fn heart() -> Self {
        Self {
            columns: Some(HEART_COLUMNS.iter().map(|s| s.to_string()).collect()),
            covariates: HEART_COVARIATES.iter().map(|s| s.to_string()).collect(),
            label: "num".into(),
            label_rule: LabelRule::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSource {
    pub path: PathBuf,
    pub server_label: String,
    pub schema: Schema,
    pub delimiter: u8,
    pub missing: String,
}

impl TabularSource {
    /// A processed UCI heart-disease file.
    pub fn heart(path: impl Into<PathBuf>, server_label: impl Into<String>) -> Self {
        Self { path: path.into(), server_label: server_label.into(), schema: Schema::heart(), delimiter: b',', missing: "?".into() }
    }
}

/// Typed rows of one site before scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub server_label: String,
    pub covariate_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    /// Rows dropped for missing values.
    pub dropped: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn prevalence(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.labels.len() as f64
    }

    fn subset(&self, idx: &[usize]) -> RawTable {
        RawTable {
            server_label: self.server_label.clone(),
            covariate_names: self.covariate_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dropped: self.dropped,
        }
    }
}

/// Reads one site from any reader.
pub fn read_table<R: Read>(reader: R, source: &TabularSource) -> Result<RawTable> {
    let schema = &source.schema;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(source.delimiter)
        .has_headers(schema.columns.is_none())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let ctx = |msg: String| Error::Data(format!("{}: {msg}", source.path.display()));
    let columns: Vec<String> = match &schema.columns {
        Some(c) => c.clone(),
        None => match rdr.headers() {
            Ok(h) => h.iter().map(|s| s.to_string()).collect(),
            Err(e) => return Err(ctx(e.to_string())),
        },
    };
    let position = |name: &str| {
        columns.iter().position(|c| c == name).ok_or_else(|| ctx(format!("column '{name}' not found")))
    };
    let cov_idx = schema.covariates.iter().map(|c| position(c)).collect::<Result<Vec<_>>>()?;
    let label_idx = position(&schema.label)?;
    let mut table = RawTable {
        server_label: source.server_label.clone(),
        covariate_names: schema.covariates.clone(),
        rows: Vec::new(),
        labels: Vec::new(),
        dropped: 0,
    };
    for (line, record) in rdr.records().enumerate() {
        let row_no = line + 1;
        let record = record.map_err(|e| ctx(format!("row {row_no}: {e}")))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != columns.len() {
            return Err(ctx(format!("row {row_no}: expected {} fields, found {}", columns.len(), record.len())));
        }
        let mut wanted = cov_idx.clone();
        wanted.push(label_idx);
        if wanted.iter().any(|&i| record[i] == source.missing || record[i].is_empty()) {
            table.dropped += 1;
            continue;
        }
        let parse = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| ctx(format!("row {row_no}, column '{}': cannot parse '{}'", columns[i], &record[i])))
        };
        let row = cov_idx.iter().map(|&i| parse(i)).collect::<Result<Vec<f64>>>()?;
        let y = parse(label_idx)?;
        let label = match schema.label_rule {
            LabelRule::Positive => u8::from(y > 0.0),
            LabelRule::Binary if y == 0.0 || y == 1.0 => y as u8,
            LabelRule::Binary => {
                return Err(ctx(format!("row {row_no}: label '{}' is not 0 or 1", &record[label_idx])));
            }
        };
        table.rows.push(row);
        table.labels.push(label);
    }
    Ok(table)
}

/// Loads every source; schemas must select the same covariates.
pub fn load_csv(sources: &[TabularSource]) -> Result<Vec<RawTable>> {
    if let Some(first) = sources.first() {
        if sources.iter().any(|s| s.schema.covariates != first.schema.covariates) {
            return Err(Error::Data("every source must select the same covariates".into()));
        }
    }
    sources
        .iter()
        .map(|s| {
            let f = File::open(&s.path).map_err(|e| Error::Data(format!("{}: {e}", s.path.display())))?;
            read_table(f, s)
        })
        .collect()
}

/// Seeded split into `(train, test)` with `test_size` rows drawn without replacement.
pub fn split(table: &RawTable, test_size: usize, seed: u64) -> Result<(RawTable, RawTable)> {
    let n = table.len();
    if test_size > n {
        return Err(Error::Data(format!(
            "{}: test size {test_size} exceeds the {n} available rows",
            table.server_label
        )));
    }
    let mut rng = seed::rng(seed);
    let mut test: Vec<usize> = sample(&mut rng, n, test_size).into_vec();
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok((table.subset(&train), table.subset(&test)))
}

/// Per-column affine map onto `[0, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub upper: f64,
}

impl ScalingRecord {
    /// Pooled minima and maxima over every row of every table.
    pub fn fit(tables: &[&RawTable], upper: f64) -> Result<Self> {
        let d = tables
            .iter()
            .find(|t| !t.is_empty())
            .map(|t| t.rows[0].len())
            .ok_or_else(|| Error::Data("cannot fit a scaling on empty data".into()))?;
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for row in tables.iter().flat_map(|t| &t.rows) {
            for k in 0..d {
                mins[k] = mins[k].min(row[k]);
                maxs[k] = maxs[k].max(row[k]);
            }
        }
        let names = &tables[0].covariate_names;
        if let Some(k) = (0..d).find(|&k| mins[k] >= maxs[k]) {
            return Err(Error::Data(format!(
                "column '{}' is constant; it cannot be scaled",
                names.get(k).map(String::as_str).unwrap_or("?")
            )));
        }
        Ok(Self { mins, maxs, upper })
    }

    /// Maps a row; values outside the fitted range are clamped.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, &v)| (self.upper * (v - self.mins[k]) / (self.maxs[k] - self.mins[k])).clamp(0.0, self.upper))
            .collect()
    }
}

/// Scaled, offset-adjusted server datasets ready for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub servers: Vec<ServerDataset>,
    pub scaling: ScalingRecord,
    pub label_offsets: Vec<f64>,
    pub dropped: Vec<usize>,
}

impl Preprocessed {
    /// Applies the fitted scaling to new rows, e.g. a held-out test set.
    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.scaling.apply(r)).collect()
    }
}

/// Scales every table onto `[0, 0.5]^d` and sets each server's offset to its prevalence.
///
/// The first table becomes server 0 (the target).
pub fn preprocess(tables: &[RawTable]) -> Result<Preprocessed> {
    if tables.is_empty() {
        return Err(Error::Data("no tables to preprocess".into()));
    }
    let refs: Vec<&RawTable> = tables.iter().collect();
    let scaling = ScalingRecord::fit(&refs, 0.5)?;
    let d = scaling.mins.len();
    let mut servers = Vec::with_capacity(tables.len());
    let mut label_offsets = Vec::with_capacity(tables.len());
    for (j, t) in tables.iter().enumerate() {
        if t.is_empty() {
            servers.push(ServerDataset::new(j, d, &[], vec![])?);
            label_offsets.push(0.5);
            continue;
        }
        let p = t.prevalence();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Data(format!(
                "{}: prevalence {p} leaves no contrast; both classes are needed",
                t.server_label
            )));
        }
        let rows: Vec<Vec<f64>> = t.rows.iter().map(|r| scaling.apply(r)).collect();
        servers.push(ServerDataset::new(j, d, &rows, t.labels.clone())?.with_label_offset(p)?);
        label_offsets.push(p);
    }
    Ok(Preprocessed { servers, scaling, label_offsets, dropped: tables.iter().map(|t| t.dropped).collect() })
}

/// Writes a table back to CSV (covariates then `label`), for auditing.
pub fn write_table_csv<W: Write>(out: W, table: &RawTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = table.covariate_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, y) in table.rows.iter().zip(&table.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
