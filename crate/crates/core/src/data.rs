//! Windowed datasets: schema, CSV ingestion and chronological partitioning.
//!
//! A dataset is a list of windows in chronological order. The first
//! `n_history` windows precede the deployment horizon and are only used for
//! initial training and as drift reference; the rest are evaluation windows.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category used for missing categorical values.
pub const MISSING_CATEGORY: &str = "__MISSING__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: Vec<Feature>) -> Self {
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn indices_of(&self, kind: FeatureKind) -> impl Iterator<Item = usize> + '_ {
        self.features.iter().enumerate().filter(move |(_, f)| f.kind == kind).map(|(i, _)| i)
    }
}

/// One feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) if v.is_finite() => Some(*v),
            _ => None,
        }
    }

    /// Category label, with missing values mapped to [`MISSING_CATEGORY`].
    pub fn category(&self) -> &str {
        match self {
            Cell::Cat(c) => c,
            _ => MISSING_CATEGORY,
        }
    }
}

pub type Row = Vec<Cell>;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Calendar year, or an integer index for undated data.
    pub id: i64,
    pub rows: Vec<Row>,
    pub labels: Vec<u8>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub schema: Schema,
    pub label_column: String,
    pub windows: Vec<Window>,
    pub n_history: usize,
}

impl WindowedDataset {
    pub fn new(
        schema: Schema,
        label_column: impl Into<String>,
        windows: Vec<Window>,
        n_history: usize,
    ) -> Result<Self> {
        if n_history > windows.len() {
            return Err(Error::invalid("more history windows than windows"));
        }
        for w in &windows {
            if w.rows.len() != w.labels.len() {
                return Err(Error::LengthMismatch { left: w.rows.len(), right: w.labels.len() });
            }
            if let Some(row) = w.rows.iter().find(|r| r.len() != schema.len()) {
                return Err(Error::invalid(format!(
                    "window {} has a row with {} cells, schema has {}",
                    w.id,
                    row.len(),
                    schema.len()
                )));
            }
            if w.labels.iter().any(|&y| y > 1) {
                return Err(Error::invalid(format!("window {} has non-binary labels", w.id)));
            }
        }
        Ok(Self { schema, label_column: label_column.into(), windows, n_history })
    }

    pub fn history(&self) -> &[Window] {
        &self.windows[..self.n_history]
    }

    pub fn evaluation(&self) -> &[Window] {
        &self.windows[self.n_history..]
    }

    /// Number of evaluation windows (the horizon T).
    pub fn n_eval(&self) -> usize {
        self.windows.len() - self.n_history
    }

    /// Absolute index of 1-based evaluation window `t`.
    pub fn eval_index(&self, t: usize) -> usize {
        self.n_history + t - 1
    }

    /// Copy keeping only the first `n_eval` evaluation windows.
    pub fn truncated(&self, n_eval: usize) -> Self {
        let keep = (self.n_history + n_eval).min(self.windows.len());
        Self {
            schema: self.schema.clone(),
            label_column: self.label_column.clone(),
            windows: self.windows[..keep].to_vec(),
            n_history: self.n_history,
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> WindowSlice<'_> {
        WindowSlice::new(self.windows[range].iter().collect())
    }

    /// Column types suitable for writing a sidecar schema file.
    pub fn column_types(&self, date_column: &str) -> ColumnTypes {
        let mut types = BTreeMap::new();
        types.insert(date_column.to_string(), ColumnType::Date);
        types.insert(self.label_column.clone(), ColumnType::Label);
        for f in &self.schema.features {
            let t = match f.kind {
                FeatureKind::Numeric => ColumnType::Numeric,
                FeatureKind::Categorical => ColumnType::Categorical,
            };
            types.insert(f.name.clone(), t);
        }
        ColumnTypes(types)
    }

    /// Last day of the final history year; reloading a written CSV with this
    /// cutoff reproduces the history/evaluation split.
    pub fn history_cutoff(&self) -> Option<NaiveDate> {
        let last = self.history().last()?;
        NaiveDate::from_ymd_opt(i32::try_from(last.id).ok()?, 12, 31)
    }
}

/// Read-only view over a run of consecutive windows.
#[derive(Debug, Clone)]
pub struct WindowSlice<'a> {
    windows: Vec<&'a Window>,
}

impl<'a> WindowSlice<'a> {
    pub fn new(windows: Vec<&'a Window>) -> Self {
        Self { windows }
    }

    pub fn windows(&self) -> &[&'a Window] {
        &self.windows
    }

    pub fn window_ids(&self) -> Vec<i64> {
        self.windows.iter().map(|w| w.id).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.windows.iter().map(|w| w.len()).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a Row> + '_ {
        self.windows.iter().flat_map(|w| w.rows.iter())
    }

    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.windows.iter().flat_map(|w| w.labels.iter().copied())
    }

    /// Observed values of a numeric feature; missing values are dropped.
    pub fn numeric_values(&self, feature: usize) -> Vec<f64> {
        self.rows().filter_map(|r| r[feature].as_num()).collect()
    }

    pub fn category_counts(&self, feature: usize) -> HashMap<String, u64> {
        let mut counts = HashMap::new();
        for row in self.rows() {
            *counts.entry(row[feature].category().to_string()).or_insert(0) += 1;
        }
        counts
    }
}

/// Reference period for 1-based evaluation window `t`: the `min(w, available)`
/// windows immediately before it, history windows included.
pub fn partition_reference(dataset: &WindowedDataset, t: usize, w: usize) -> Result<WindowSlice<'_>> {
    if t == 0 || t > dataset.n_eval() {
        return Err(Error::invalid(format!("evaluation window {t} out of range 1..={}", dataset.n_eval())));
    }
    if w == 0 {
        return Err(Error::invalid("reference length must be at least 1"));
    }
    let abs = dataset.eval_index(t);
    if abs == 0 {
        return Err(Error::invalid(format!("evaluation window {t} has no preceding data")));
    }
    Ok(dataset.slice(abs.saturating_sub(w)..abs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numeric,
    Categorical,
    Date,
    Label,
}

/// Sidecar schema: column name to type. Exactly one date and one label column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnTypes(pub BTreeMap<String, ColumnType>);

impl ColumnTypes {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(&file, self)?;
        writeln!(&file)?;
        Ok(())
    }

    /// Marks `column` as the date (or label) column, replacing any previous one.
    pub fn set_role(&mut self, column: &str, role: ColumnType) {
        self.0.retain(|_, t| *t != role);
        self.0.insert(column.to_string(), role);
    }

    fn single(&self, role: ColumnType) -> Result<&str> {
        let mut it = self.0.iter().filter(|(_, &t)| t == role).map(|(k, _)| k);
        match (it.next(), it.next()) {
            (Some(name), None) => Ok(name),
            (None, _) => Err(Error::invalid(format!("schema has no {role:?} column"))),
            _ => Err(Error::invalid(format!("schema has several {role:?} columns"))),
        }
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d"))
        .or_else(|_| {
            let prefix = s.get(..10).unwrap_or(s);
            NaiveDate::parse_from_str(prefix, "%Y-%m-%d")
        })
        .ok()
}

fn parse_label(s: &str) -> Option<u8> {
    match s.trim() {
        "0" | "0.0" | "false" | "False" => Some(0),
        "1" | "1.0" | "true" | "True" => Some(1),
        _ => None,
    }
}

/// Loads a CSV into annual windows. Rows dated on or before `cutoff` become
/// history windows; later rows form the evaluation windows.
pub fn load_csv(path: &Path, types: &ColumnTypes, cutoff: NaiveDate) -> Result<WindowedDataset> {
    let source_name = path.display().to_string();
    let file = File::open(path)?;
    load_csv_from_reader(file, &source_name, types, cutoff)
}

pub fn load_csv_from_reader<R: std::io::Read>(
    reader: R,
    source_name: &str,
    types: &ColumnTypes,
    cutoff: NaiveDate,
) -> Result<WindowedDataset> {
    let date_column = types.single(ColumnType::Date)?;
    let label_column = types.single(ColumnType::Label)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let parse_err = |line: usize, message: String| Error::Parse { source_name: source_name.to_string(), line, message };

    let mut date_idx = None;
    let mut label_idx = None;
    let mut features = Vec::new();
    let mut feature_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match types.0.get(h) {
            Some(ColumnType::Date) if h == date_column => date_idx = Some(i),
            Some(ColumnType::Label) if h == label_column => label_idx = Some(i),
            Some(ColumnType::Numeric) => {
                features.push(Feature { name: h.to_string(), kind: FeatureKind::Numeric });
                feature_cols.push(i);
            }
            Some(ColumnType::Categorical) => {
                features.push(Feature { name: h.to_string(), kind: FeatureKind::Categorical });
                feature_cols.push(i);
            }
            _ => return Err(parse_err(1, format!("column `{h}` is not typed by the schema"))),
        }
    }
    let date_idx = date_idx.ok_or_else(|| parse_err(1, format!("missing date column `{date_column}`")))?;
    let label_idx = label_idx.ok_or_else(|| parse_err(1, format!("missing label column `{label_column}`")))?;

    let mut dated: Vec<(NaiveDate, Row, u8)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| parse_err(line, format!("unparseable date `{raw_date}`")))?;
        let raw_label = record.get(label_idx).unwrap_or("");
        let label = parse_label(raw_label).ok_or_else(|| parse_err(line, format!("non-binary label `{raw_label}`")))?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for (f, &col) in features.iter().zip(&feature_cols) {
            let raw = record.get(col).unwrap_or("").trim();
            let cell = if raw.is_empty() {
                Cell::Missing
            } else {
                match f.kind {
                    FeatureKind::Numeric => match raw.parse::<f64>() {
                        Ok(v) if v.is_finite() => Cell::Num(v),
                        Ok(_) => Cell::Missing,
                        Err(_) => return Err(parse_err(line, format!("`{raw}` in numeric column `{}`", f.name))),
                    },
                    FeatureKind::Categorical => Cell::Cat(raw.to_string()),
                }
            };
            row.push(cell);
        }
        dated.push((date, row, label));
    }
    if dated.is_empty() {
        return Err(Error::Empty("CSV has no data rows"));
    }
    dated.sort_by_key(|(d, _, _)| *d);

    let mut history: BTreeMap<i64, Window> = BTreeMap::new();
    let mut evaluation: BTreeMap<i64, Window> = BTreeMap::new();
    for (date, row, label) in dated {
        let year = i64::from(date.year());
        let target = if date <= cutoff { &mut history } else { &mut evaluation };
        let w = target.entry(year).or_insert_with(|| Window { id: year, rows: Vec::new(), labels: Vec::new() });
        w.rows.push(row);
        w.labels.push(label);
    }
    if evaluation.is_empty() {
        return Err(Error::invalid(format!("no evaluation windows: every row is dated on or before {cutoff}")));
    }
    let n_history = history.len();
    let windows = history.into_values().chain(evaluation.into_values()).collect();
    WindowedDataset::new(Schema::new(features), label_column, windows, n_history)
}

/// Writes the dataset as CSV with one synthetic date per window (`<id>-07-01`).
pub fn write_csv(dataset: &WindowedDataset, path: &Path, date_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec![date_column.to_string(), dataset.label_column.clone()];
    header.extend(dataset.schema.features.iter().map(|f| f.name.clone()));
    wtr.write_record(&header)?;
    for w in &dataset.windows {
        let date = format!("{:04}-07-01", w.id);
        for (row, &y) in w.rows.iter().zip(&w.labels) {
            let mut rec = vec![date.clone(), y.to_string()];
            rec.extend(row.iter().map(|c| match c {
                Cell::Num(v) => v.to_string(),
                Cell::Cat(s) => s.clone(),
                Cell::Missing => String::new(),
            }));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
