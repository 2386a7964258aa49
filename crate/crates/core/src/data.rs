//! Labeled datasets read from CSV (header = schema names plus `label`).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Label;
use crate::schema::{FeatureSchema, FeatureVector};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<FeatureVector>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(schema: &FeatureSchema, rows: Vec<FeatureVector>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (r, x) in rows.iter().enumerate() {
            schema.validate(x).map_err(|e| Error::Row {
                row: r + 1,
                column: String::from("*"),
                message: e.to_string(),
            })?;
        }
        Ok(Dataset { rows, labels })
    }

    /// Unlabeled reference data (labels default to negative).
    pub fn unlabeled(schema: &FeatureSchema, rows: Vec<FeatureVector>) -> Result<Self> {
        let labels = vec![Label::Negative; rows.len()];
        Dataset::new(schema, rows, labels)
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `i` across all rows.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(i)).collect()
    }

    pub fn load_csv(schema: &FeatureSchema, path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Dataset::read_csv(schema, file, true)
    }

    /// Reads CSV; the label column is required when `labeled` is set.
    /// Row numbers in errors are 1-based data rows (header excluded).
    pub fn read_csv<R: Read>(schema: &FeatureSchema, reader: R, labeled: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let position = |name: &str| header.iter().position(|h| h == name);
        let columns = schema
            .names()
            .map(|n| position(n).ok_or_else(|| Error::MissingColumn(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let label_col = match position(LABEL_COLUMN) {
            Some(c) => Some(c),
            None if labeled => return Err(Error::MissingColumn(LABEL_COLUMN.to_string())),
            None => None,
        };

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            let mut values = Vec::with_capacity(columns.len());
            for (i, &c) in columns.iter().enumerate() {
                let f = schema.feature(i);
                let cell = record.get(c).ok_or_else(|| Error::Row {
                    row,
                    column: f.name.clone(),
                    message: "missing cell".into(),
                })?;
                let v = schema.parse_cell(i, cell).map_err(|e| Error::Row {
                    row,
                    column: f.name.clone(),
                    message: e.to_string(),
                })?;
                if !f.in_domain(v) {
                    return Err(Error::Row {
                        row,
                        column: f.name.clone(),
                        message: format!("value {v} outside bounds [{}, {}] or domain", f.lo(), f.hi()),
                    });
                }
                values.push(v);
            }
            rows.push(FeatureVector::new(values));
            let label = match label_col {
                Some(c) => {
                    let cell = record.get(c).unwrap_or("");
                    Label::parse(cell).ok_or_else(|| Error::Row {
                        row,
                        column: LABEL_COLUMN.to_string(),
                        message: format!("label `{cell}` is not 0 or 1"),
                    })?
                }
                None => Label::Negative,
            };
            labels.push(label);
        }
        Ok(Dataset { rows, labels })
    }
}
