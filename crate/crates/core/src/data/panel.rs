use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::data::schema::{FeatureKind, FeatureSchema, KEY_COLUMNS, LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One company-year observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub company_id: String,
    pub year: i32,
    pub industry_l2: String,
    pub industry_l3: String,
    pub values: Vec<Option<f64>>,
    pub label: Option<bool>,
}

impl Instance {
    pub fn key(&self) -> RowKey {
        RowKey {
            company_id: self.company_id.clone(),
            year: self.year,
        }
    }
}

/// Row identity: company plus snapshot year.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub company_id: String,
    pub year: i32,
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.company_id, self.year)
    }
}

/// Company-year table. Immutable once built; transformations return new panels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    schema: Arc<FeatureSchema>,
    rows: Vec<Instance>,
}

impl Panel {
    /// Validates row widths and (company, year) uniqueness.
    pub fn new(schema: Arc<FeatureSchema>, rows: Vec<Instance>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.values.len() != schema.len() {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, schema has {}",
                    r.values.len(),
                    schema.len()
                )));
            }
            if r.values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a non-finite value")));
            }
            if !seen.insert((r.company_id.as_str(), r.year)) {
                return Err(Error::invalid(format!(
                    "duplicate row for company `{}` year {}",
                    r.company_id, r.year
                )));
            }
        }
        Ok(Panel { schema, rows })
    }

    pub(crate) fn from_parts_unchecked(schema: Arc<FeatureSchema>, rows: Vec<Instance>) -> Self {
        Panel { schema, rows }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<FeatureSchema> {
        Arc::clone(&self.schema)
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Instance> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn keys(&self) -> Vec<RowKey> {
        self.rows.iter().map(Instance::key).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.values.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    /// Feature matrix with `NaN` for missing cells.
    pub fn to_matrix(&self) -> Matrix {
        let d = self.n_features();
        let mut data = Vec::with_capacity(self.len() * d);
        for r in &self.rows {
            data.extend(r.values.iter().map(|v| v.unwrap_or(f64::NAN)));
        }
        Matrix::from_vec(self.len(), d, data)
    }

    /// Same keys and labels, feature values replaced (`NaN` becomes missing).
    pub fn with_matrix(&self, m: &Matrix) -> Result<Panel> {
        if m.rows() != self.len() || m.cols() != self.n_features() {
            return Err(Error::invalid(format!(
                "matrix shape {}x{} does not match panel {}x{}",
                m.rows(),
                m.cols(),
                self.len(),
                self.n_features()
            )));
        }
        let rows = self
            .rows
            .iter()
            .zip(m.iter_rows())
            .map(|(r, vals)| Instance {
                values: vals.iter().map(|&v| (!v.is_nan()).then_some(v)).collect(),
                ..r.clone()
            })
            .collect();
        Ok(Panel::from_parts_unchecked(self.schema_arc(), rows))
    }

    /// Every row must carry a label.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| {
                r.label.ok_or_else(|| {
                    Error::invalid(format!("row {} is unlabeled", r.key()))
                })
            })
            .collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.rows.iter().filter(|r| r.label == Some(true)).count();
        let neg = self.rows.iter().filter(|r| r.label == Some(false)).count();
        (neg, pos)
    }

    pub fn select(&self, idx: &[usize]) -> Panel {
        let rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
        Panel::from_parts_unchecked(self.schema_arc(), rows)
    }

    pub fn distinct_years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.rows.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }
}

fn parse_cell(raw: &str, kind: FeatureKind, row: usize, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}`: `{s}` is not numeric"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column `{column}`: non-finite value `{s}`"),
        });
    }
    // imputed or interpolated indicator cells may hold fractions
    if kind == FeatureKind::Binary && !(0.0..=1.0).contains(&v) {
        return Err(Error::Parse {
            row,
            message: format!("binary column `{column}`: expected a value in [0, 1], got `{s}`"),
        });
    }
    Ok(Some(v))
}

fn parse_label(raw: &str, row: usize) -> Result<Option<bool>> {
    match raw.trim() {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::Parse {
            row,
            message: format!("label must be 0, 1 or empty, got `{other}`"),
        }),
    }
}

/// Load a panel CSV. Columns may appear in any order, but every key column and
/// schema feature must be present; `label` is optional. Row numbers in errors
/// are 1-based file lines (the header is line 1).
pub fn load_panel(path: impl AsRef<Path>, schema: Arc<FeatureSchema>) -> Result<Panel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel(file, schema)
}

pub fn read_panel<R: std::io::Read>(reader: R, schema: Arc<FeatureSchema>) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col_of: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        let known = KEY_COLUMNS.contains(&h) || h == LABEL_COLUMN || schema.index_of(h).is_some();
        if !known {
            return Err(Error::Schema(format!("unknown column `{h}`")));
        }
        if col_of.insert(h, i).is_some() {
            return Err(Error::Schema(format!("column `{h}` appears twice")));
        }
    }
    for k in KEY_COLUMNS {
        if !col_of.contains_key(k) {
            return Err(Error::Schema(format!("missing key column `{k}`")));
        }
    }
    let mut feature_cols = Vec::with_capacity(schema.len());
    for f in schema.features() {
        match col_of.get(f.name.as_str()) {
            Some(&c) => feature_cols.push(c),
            None => return Err(Error::Schema(format!("missing feature column `{}`", f.name))),
        }
    }
    let label_col = col_of.get(LABEL_COLUMN).copied();
    let width = headers.len();

    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let key = |name: &str| rec[col_of[name]].trim().to_string();
        let company_id = key("company_id");
        if company_id.is_empty() {
            return Err(Error::Parse {
                row: line,
                message: "empty company_id".into(),
            });
        }
        let year_raw = key("year");
        let year: i32 = year_raw.parse().map_err(|_| Error::Parse {
            row: line,
            message: format!("year `{year_raw}` is not an integer"),
        })?;
        let industry_l2 = key("industry_l2");
        let industry_l3 = key("industry_l3");
        if industry_l2.is_empty() || industry_l3.is_empty() {
            return Err(Error::Parse {
                row: line,
                message: "industry codes must not be empty".into(),
            });
        }
        let values = schema
            .features()
            .iter()
            .zip(&feature_cols)
            .map(|(f, &c)| parse_cell(&rec[c], f.kind, line, &f.name))
            .collect::<Result<Vec<_>>>()?;
        let label = match label_col {
            Some(c) => parse_label(&rec[c], line)?,
            None => None,
        };
        rows.push(Instance {
            company_id,
            year,
            industry_l2,
            industry_l3,
            values,
            label,
        });
    }
    Panel::new(schema, rows)
}

/// Write a panel in the canonical column order. The `label` column is emitted
/// when at least one row is labeled. Values use the shortest representation
/// that parses back to the identical `f64`.
pub fn write_panel(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_panel_to(panel, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_panel_to<W: Write>(panel: &Panel, writer: W) -> Result<()> {
    let with_label = panel.rows.iter().any(|r| r.label.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(panel.schema.names());
    if with_label {
        header.push(LABEL_COLUMN);
    }
    wtr.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for r in &panel.rows {
        rec.clear();
        rec.push(r.company_id.clone());
        rec.push(r.year.to_string());
        rec.push(r.industry_l2.clone());
        rec.push(r.industry_l3.clone());
        rec.extend(
            r.values
                .iter()
                .map(|v| v.map_or_else(String::new, |x| x.to_string())),
        );
        if with_label {
            rec.push(match r.label {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<panel writer>", e))?;
    Ok(())
}
