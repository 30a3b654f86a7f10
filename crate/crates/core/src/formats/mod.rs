//! Tabular dataset model and the exchange formats it can be read from and
//! written to: ARFF text, the MLD1 binary container and CSV export.

mod arff;
mod container;
mod csv_export;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::arff::{parse_arff, write_arff};
pub use self::container::{
    decode_container, encode_container, ArrayEntry, ContainerHeader, Dtype, CONTAINER_VERSION, MAGIC,
};
pub use self::csv_export::write_csv;

/// The type of values a column holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "labels")]
pub enum AttributeKind {
    Numeric,
    /// Ordered list of distinct category labels.
    Nominal(Vec<String>),
    String,
}

impl AttributeKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttributeKind::Numeric => "numeric",
            AttributeKind::Nominal(_) => "nominal",
            AttributeKind::String => "string",
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match self {
            AttributeKind::Nominal(labels) => Some(labels),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Nominal(labels.into_iter().map(Into::into).collect()),
        }
    }

    pub fn string(name: impl Into<String>) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::String,
        }
    }
}

/// A single value in a dataset row.
///
/// Numbers are always finite; absence is represented by [`Cell::Missing`]
/// rather than a NaN sentinel.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    /// Index into the column's nominal label list.
    Category(usize),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<usize> {
        match self {
            Cell::Category(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("attribute name must not be empty")]
    EmptyAttributeName,
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("nominal attribute `{0}` has no labels")]
    EmptyNominal(String),
    #[error("nominal attribute `{attribute}` declares label `{label}` twice")]
    DuplicateLabel { attribute: String, label: String },
    #[error("row {row} has {got} cells, expected {expected}")]
    RowArity { row: usize, expected: usize, got: usize },
    #[error("row {row}, column `{column}`: cell does not match the column kind")]
    CellKind { row: usize, column: String },
}

/// Parsed tabular data with typed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub relation: String,
    pub attributes: Vec<AttributeSpec>,
    pub rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Builds a dataset after checking every structural invariant.
    pub fn new(
        relation: impl Into<String>,
        attributes: Vec<AttributeSpec>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self, DatasetError> {
        let ds = Dataset {
            relation: relation.into(),
            attributes,
            rows,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        validate_attributes(&self.attributes)?;
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.attributes.len() {
                return Err(DatasetError::RowArity {
                    row: r,
                    expected: self.attributes.len(),
                    got: row.len(),
                });
            }
            for (cell, attr) in row.iter().zip(&self.attributes) {
                if !cell_matches(cell, &attr.kind) {
                    return Err(DatasetError::CellKind {
                        row: r,
                        column: attr.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |row| &row[index])
    }
}

pub(crate) fn validate_attributes(attributes: &[AttributeSpec]) -> Result<(), DatasetError> {
    let mut seen = std::collections::HashSet::new();
    for attr in attributes {
        if attr.name.is_empty() {
            return Err(DatasetError::EmptyAttributeName);
        }
        if !seen.insert(attr.name.as_str()) {
            return Err(DatasetError::DuplicateAttribute(attr.name.clone()));
        }
        if let AttributeKind::Nominal(labels) = &attr.kind {
            if labels.is_empty() {
                return Err(DatasetError::EmptyNominal(attr.name.clone()));
            }
            let mut seen_labels = std::collections::HashSet::new();
            for label in labels {
                if !seen_labels.insert(label.as_str()) {
                    return Err(DatasetError::DuplicateLabel {
                        attribute: attr.name.clone(),
                        label: label.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

fn cell_matches(cell: &Cell, kind: &AttributeKind) -> bool {
    match (cell, kind) {
        (Cell::Missing, _) => true,
        (Cell::Number(v), AttributeKind::Numeric) => v.is_finite(),
        (Cell::Category(i), AttributeKind::Nominal(labels)) => *i < labels.len(),
        (Cell::Text(_), AttributeKind::String) => true,
        _ => false,
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub(crate) fn format_number(value: f64) -> String {
    format!("{value:?}")
}

/// Identifier of a supported exchange format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatId {
    Arff,
    Mld,
    Csv,
}

impl FormatId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormatId::Arff => "arff",
            FormatId::Mld => "mld",
            FormatId::Csv => "csv",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            FormatId::Arff => "text/x-arff; charset=utf-8",
            FormatId::Mld => "application/octet-stream",
            FormatId::Csv => "text/csv; charset=utf-8",
        }
    }
}

impl fmt::Display for FormatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatId {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "arff" => Ok(FormatId::Arff),
            "mld" | "mld1" => Ok(FormatId::Mld),
            "csv" => Ok(FormatId::Csv),
            other => Err(FormatError::UnknownFormat(other.to_string())),
        }
    }
}

/// Failure while reading or converting a dataset file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: value `{token}` is not a label of nominal attribute `{column}`")]
    UnknownNominalValue { line: usize, column: String, token: String },
    #[error("line {line}: `{token}` is not a finite number (attribute `{column}`)")]
    InvalidNumber { line: usize, column: String, token: String },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("line {line}: expected {expected} values, got {got}")]
    ArityMismatch { line: usize, expected: usize, got: usize },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("not an MLD1 container (bad magic bytes)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u64),
    #[error("corrupt container header: {0}")]
    CorruptHeader(String),
    #[error("container arrays overlap or are out of order")]
    RangeOverlap,
    #[error("container payload truncated: need {expected} bytes, have {got}")]
    TruncatedPayload { expected: u64, got: u64 },
    #[error("corrupt container payload: {0}")]
    CorruptPayload(String),
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("cannot convert from {from} to {to}")]
    UnsupportedConversion { from: FormatId, to: FormatId },
}

/// Parses `blob` in the given format.
pub fn read_dataset(blob: &[u8], format: FormatId) -> Result<Dataset, FormatError> {
    match format {
        FormatId::Arff => {
            let text = std::str::from_utf8(blob).map_err(|_| FormatError::InvalidUtf8)?;
            parse_arff(text)
        }
        FormatId::Mld => decode_container(blob),
        FormatId::Csv => Err(FormatError::UnsupportedConversion {
            from: FormatId::Csv,
            to: FormatId::Csv,
        }),
    }
}

/// Serializes `ds` in the given format.
pub fn write_dataset(ds: &Dataset, format: FormatId) -> Vec<u8> {
    match format {
        FormatId::Arff => write_arff(ds).into_bytes(),
        FormatId::Mld => encode_container(ds),
        FormatId::Csv => write_csv(ds).into_bytes(),
    }
}

/// Re-encodes a dataset file from one format into another.
///
/// CSV is export-only and is rejected as a source format.
pub fn convert(blob: &[u8], from: FormatId, to: FormatId) -> Result<Vec<u8>, FormatError> {
    if from == FormatId::Csv {
        return Err(FormatError::UnsupportedConversion { from, to });
    }
    let ds = read_dataset(blob, from)?;
    Ok(write_dataset(&ds, to))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "@relation t\n@attribute a numeric\n@attribute c {x,y}\n@data\n1.0,x\n2.0,y\n";

    #[test]
    fn arff_to_csv() {
        let out = convert(EXAMPLE.as_bytes(), FormatId::Arff, FormatId::Csv).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,c\n1.0,x\n2.0,y\n");
    }

    #[test]
    fn arff_mld_arff_round_trip() {
        let mld = convert(EXAMPLE.as_bytes(), FormatId::Arff, FormatId::Mld).unwrap();
        let arff = convert(&mld, FormatId::Mld, FormatId::Arff).unwrap();
        let back = parse_arff(std::str::from_utf8(&arff).unwrap()).unwrap();
        assert_eq!(back, parse_arff(EXAMPLE).unwrap());
    }

    #[test]
    fn csv_is_not_a_source() {
        let err = convert(b"a,b\n", FormatId::Csv, FormatId::Arff).unwrap_err();
        assert_eq!(
            err,
            FormatError::UnsupportedConversion {
                from: FormatId::Csv,
                to: FormatId::Arff
            }
        );
    }

    #[test]
    fn dataset_rejects_bad_cells() {
        let attrs = vec![AttributeSpec::nominal("c", ["x"])];
        let err = Dataset::new("r", attrs.clone(), vec![vec![Cell::Category(1)]]).unwrap_err();
        assert!(matches!(err, DatasetError::CellKind { .. }));
        let err = Dataset::new(
            "r",
            vec![AttributeSpec::numeric("a")],
            vec![vec![Cell::Number(f64::NAN)]],
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::CellKind { .. }));
        let err = Dataset::new("r", vec![AttributeSpec::nominal("c", ["x", "x"])], vec![]).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateLabel { .. }));
    }

    #[test]
    fn number_format_is_shortest_round_trip() {
        for v in [1.0, 0.1, -0.0, 1e300, 5e-324, 123456.789, f64::MAX] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(1.0), "1.0");
    }
}
