//! MLD1: a small binary container giving named access to the numeric,
//! nominal and string matrices of a dataset.
//!
//! Layout: `MLD1` magic, a `u32le` header length `H`, `H` bytes of JSON
//! ([`ContainerHeader`]), then the payload. Array offsets are relative to
//! the payload start. Numeric and nominal matrices are row-major `f64le` /
//! `i64le`; a missing value is NaN (numeric) or `-1` (nominal). String
//! columns are stored one per array as a `u32le` count followed by
//! length-prefixed UTF-8 strings, with length `u32::MAX` marking a missing
//! value.

use serde::{Deserialize, Serialize};

use super::{validate_attributes, AttributeKind, AttributeSpec, Cell, Dataset, FormatError};

pub const MAGIC: &[u8; 4] = b"MLD1";
pub const CONTAINER_VERSION: u64 = 1;

const NUMERIC_ARRAY: &str = "numeric";
const NOMINAL_ARRAY: &str = "nominal";
const STRING_PREFIX: &str = "string:";
const MISSING_STRING: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f64le")]
    F64Le,
    #[serde(rename = "i64le")]
    I64Le,
    #[serde(rename = "utf8-catalog")]
    Utf8Catalog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub dtype: Dtype,
    pub shape: (u64, u64),
    pub byte_offset: u64,
    pub byte_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub format_version: u64,
    pub relation: String,
    pub arrays: Vec<ArrayEntry>,
    pub attributes: Vec<AttributeSpec>,
}

impl ContainerHeader {
    pub fn array(&self, name: &str) -> Option<&ArrayEntry> {
        self.arrays.iter().find(|a| a.name == name)
    }
}

/// Encodes `ds` as an MLD1 container.
pub fn encode_container(ds: &Dataset) -> Vec<u8> {
    let n_rows = ds.rows.len() as u64;
    let numeric: Vec<usize> = columns_of(ds, |k| matches!(k, AttributeKind::Numeric));
    let nominal: Vec<usize> = columns_of(ds, |k| matches!(k, AttributeKind::Nominal(_)));

    let mut payload = Vec::new();
    let mut arrays = Vec::new();

    if !numeric.is_empty() {
        let start = payload.len() as u64;
        for row in &ds.rows {
            for &c in &numeric {
                let v = row[c].as_number().unwrap_or(f64::NAN);
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        arrays.push(ArrayEntry {
            name: NUMERIC_ARRAY.into(),
            dtype: Dtype::F64Le,
            shape: (n_rows, numeric.len() as u64),
            byte_offset: start,
            byte_length: payload.len() as u64 - start,
        });
    }
    if !nominal.is_empty() {
        let start = payload.len() as u64;
        for row in &ds.rows {
            for &c in &nominal {
                let v = row[c].as_category().map_or(-1, |i| i as i64);
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        arrays.push(ArrayEntry {
            name: NOMINAL_ARRAY.into(),
            dtype: Dtype::I64Le,
            shape: (n_rows, nominal.len() as u64),
            byte_offset: start,
            byte_length: payload.len() as u64 - start,
        });
    }
    for c in columns_of(ds, |k| matches!(k, AttributeKind::String)) {
        let start = payload.len() as u64;
        payload.extend_from_slice(&(ds.rows.len() as u32).to_le_bytes());
        for row in &ds.rows {
            match &row[c] {
                Cell::Text(s) => {
                    payload.extend_from_slice(&(s.len() as u32).to_le_bytes());
                    payload.extend_from_slice(s.as_bytes());
                }
                _ => payload.extend_from_slice(&MISSING_STRING.to_le_bytes()),
            }
        }
        arrays.push(ArrayEntry {
            name: format!("{STRING_PREFIX}{}", ds.attributes[c].name),
            dtype: Dtype::Utf8Catalog,
            shape: (n_rows, 1),
            byte_offset: start,
            byte_length: payload.len() as u64 - start,
        });
    }

    let header = ContainerHeader {
        format_version: CONTAINER_VERSION,
        relation: ds.relation.clone(),
        arrays,
        attributes: ds.attributes.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

fn columns_of(ds: &Dataset, pred: impl Fn(&AttributeKind) -> bool) -> Vec<usize> {
    ds.attributes
        .iter()
        .enumerate()
        .filter(|(_, a)| pred(&a.kind))
        .map(|(i, _)| i)
        .collect()
}

/// Reads the header of an MLD1 container and returns it with the payload
/// slice. The header is fully validated against the payload bounds.
pub fn read_header(blob: &[u8]) -> Result<(ContainerHeader, &[u8]), FormatError> {
    if blob.len() < 4 || &blob[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if blob.len() < 8 {
        return Err(FormatError::CorruptHeader("missing header length".into()));
    }
    let header_len = u32::from_le_bytes(blob[4..8].try_into().expect("4 bytes")) as usize;
    let header_end = 8usize
        .checked_add(header_len)
        .filter(|&end| end <= blob.len())
        .ok_or_else(|| FormatError::CorruptHeader("header extends past end of input".into()))?;
    let value: serde_json::Value =
        serde_json::from_slice(&blob[8..header_end]).map_err(|e| FormatError::CorruptHeader(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| FormatError::CorruptHeader("missing format_version".into()))?;
    if version != CONTAINER_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let header: ContainerHeader =
        serde_json::from_value(value).map_err(|e| FormatError::CorruptHeader(e.to_string()))?;
    let payload = &blob[header_end..];
    validate_header(&header, payload.len() as u64)?;
    Ok((header, payload))
}

fn validate_header(header: &ContainerHeader, payload_len: u64) -> Result<(), FormatError> {
    validate_attributes(&header.attributes).map_err(|e| FormatError::CorruptHeader(e.to_string()))?;

    let mut cursor = 0u64;
    for array in &header.arrays {
        if array.byte_offset < cursor {
            return Err(FormatError::RangeOverlap);
        }
        let end = array
            .byte_offset
            .checked_add(array.byte_length)
            .ok_or_else(|| FormatError::CorruptHeader(format!("array `{}` range overflows", array.name)))?;
        if end > payload_len {
            return Err(FormatError::TruncatedPayload {
                expected: end,
                got: payload_len,
            });
        }
        cursor = end;
    }

    let n_numeric = header
        .attributes
        .iter()
        .filter(|a| a.kind == AttributeKind::Numeric)
        .count() as u64;
    let n_nominal = header
        .attributes
        .iter()
        .filter(|a| matches!(a.kind, AttributeKind::Nominal(_)))
        .count() as u64;
    let string_names: Vec<String> = header
        .attributes
        .iter()
        .filter(|a| a.kind == AttributeKind::String)
        .map(|a| format!("{STRING_PREFIX}{}", a.name))
        .collect();

    let expected_arrays = usize::from(n_numeric > 0) + usize::from(n_nominal > 0) + string_names.len();
    if header.arrays.len() != expected_arrays {
        return Err(FormatError::CorruptHeader(format!(
            "expected {expected_arrays} arrays, found {}",
            header.arrays.len()
        )));
    }

    let mut n_rows = None;
    let mut check_rows = |array: &ArrayEntry| -> Result<(), FormatError> {
        match n_rows {
            None => n_rows = Some(array.shape.0),
            Some(r) if r != array.shape.0 => {
                return Err(FormatError::CorruptHeader("arrays disagree on row count".into()))
            }
            Some(_) => {}
        }
        Ok(())
    };
    for (name, dtype, cols) in [
        (NUMERIC_ARRAY, Dtype::F64Le, n_numeric),
        (NOMINAL_ARRAY, Dtype::I64Le, n_nominal),
    ] {
        if cols == 0 {
            continue;
        }
        let array = header
            .array(name)
            .ok_or_else(|| FormatError::CorruptHeader(format!("missing `{name}` array")))?;
        if array.dtype != dtype || array.shape.1 != cols {
            return Err(FormatError::CorruptHeader(format!(
                "`{name}` array has the wrong type or shape"
            )));
        }
        let expected = array
            .shape
            .0
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| FormatError::CorruptHeader(format!("`{name}` array shape overflows")))?;
        if expected != array.byte_length {
            return Err(FormatError::CorruptHeader(format!(
                "`{name}` array should be {expected} bytes, header says {}",
                array.byte_length
            )));
        }
        check_rows(array)?;
    }
    for name in &string_names {
        let array = header
            .array(name)
            .ok_or_else(|| FormatError::CorruptHeader(format!("missing `{name}` array")))?;
        if array.dtype != Dtype::Utf8Catalog || array.shape.1 != 1 {
            return Err(FormatError::CorruptHeader(format!(
                "`{name}` array has the wrong type or shape"
            )));
        }
        check_rows(array)?;
    }
    Ok(())
}

/// Decodes an MLD1 container back into a dataset.
pub fn decode_container(blob: &[u8]) -> Result<Dataset, FormatError> {
    let (header, payload) = read_header(blob)?;
    let n_rows = header.arrays.first().map_or(0, |a| a.shape.0) as usize;
    let slice = |a: &ArrayEntry| &payload[a.byte_offset as usize..(a.byte_offset + a.byte_length) as usize];

    let mut columns: Vec<Vec<Cell>> = Vec::with_capacity(header.attributes.len());
    let mut numeric_col = 0usize;
    let mut nominal_col = 0usize;
    for attr in &header.attributes {
        let column = match &attr.kind {
            AttributeKind::Numeric => {
                let array = header.array(NUMERIC_ARRAY).expect("validated");
                let col = read_words(slice(array), array.shape.1 as usize, numeric_col)
                    .map(|bits| {
                        let v = f64::from_bits(bits);
                        if v.is_nan() {
                            Ok(Cell::Missing)
                        } else if v.is_infinite() {
                            Err(FormatError::CorruptPayload(format!(
                                "infinite value in `{}`",
                                attr.name
                            )))
                        } else {
                            Ok(Cell::Number(v))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                numeric_col += 1;
                col
            }
            AttributeKind::Nominal(labels) => {
                let array = header.array(NOMINAL_ARRAY).expect("validated");
                let col = read_words(slice(array), array.shape.1 as usize, nominal_col)
                    .map(|bits| match bits as i64 {
                        -1 => Ok(Cell::Missing),
                        i if i >= 0 && (i as u64) < labels.len() as u64 => Ok(Cell::Category(i as usize)),
                        i => Err(FormatError::CorruptPayload(format!(
                            "category index {i} out of range for `{}`",
                            attr.name
                        ))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                nominal_col += 1;
                col
            }
            AttributeKind::String => {
                let array = header
                    .array(&format!("{STRING_PREFIX}{}", attr.name))
                    .expect("validated");
                read_catalog(slice(array), n_rows)?
            }
        };
        columns.push(column);
    }

    let mut rows: Vec<Vec<Cell>> = (0..n_rows).map(|_| Vec::with_capacity(columns.len())).collect();
    for column in columns {
        for (row, cell) in rows.iter_mut().zip(column) {
            row.push(cell);
        }
    }
    Ok(Dataset {
        relation: header.relation,
        attributes: header.attributes,
        rows,
    })
}

fn read_words(bytes: &[u8], n_cols: usize, col: usize) -> impl Iterator<Item = u64> + '_ {
    bytes
        .chunks_exact(8 * n_cols)
        .map(move |row| u64::from_le_bytes(row[col * 8..col * 8 + 8].try_into().expect("8 bytes")))
}

fn read_catalog(bytes: &[u8], n_rows: usize) -> Result<Vec<Cell>, FormatError> {
    let corrupt = |msg: &str| FormatError::CorruptPayload(msg.to_string());
    let mut pos = 0usize;
    let next_u32 = |pos: &mut usize| -> Result<u32, FormatError> {
        let word = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| corrupt("string catalog truncated"))?;
        *pos += 4;
        Ok(u32::from_le_bytes(word.try_into().expect("4 bytes")))
    };
    let count = next_u32(&mut pos)? as usize;
    if count != n_rows {
        return Err(corrupt("string catalog count does not match row count"));
    }
    let mut cells = Vec::with_capacity(count.min(bytes.len() / 4));
    for _ in 0..count {
        let len = next_u32(&mut pos)?;
        if len == MISSING_STRING {
            cells.push(Cell::Missing);
            continue;
        }
        let end = pos
            .checked_add(len as usize)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| corrupt("string catalog truncated"))?;
        let s = std::str::from_utf8(&bytes[pos..end]).map_err(|_| corrupt("string catalog is not UTF-8"))?;
        cells.push(Cell::Text(s.to_string()));
        pos = end;
    }
    if pos != bytes.len() {
        return Err(corrupt("trailing bytes in string catalog"));
    }
    Ok(cells)
}
