//! Declarative source-to-table mappings.
//!
//! A [`MappingSpec`] binds source fields to attributes of one catalog table
//! through a left-to-right chain of transforms. Specs are checked against the
//! catalog once by [`compile_mapping`]; [`apply_mapping`] then turns raw rows
//! into typed rows or a single [`RejectRecord`].

use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use super::source::RawRow;
use super::synonym::SynonymRegistry;
use super::units::{convert_unit, is_known_unit, scale_exponent};
use super::{EtlError, ReasonCode, RejectRecord, SynonymTable};
use crate::catalog::{AttributeDef, AttributeKind, Catalog, TableDef};
use crate::number;
use crate::store::{Row, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSpec {
    pub target_table: String,
    pub bindings: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    /// Source field name; may be omitted when the chain supplies a constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub target: String,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Transform {
    /// The source-to-target renaming itself; accepted for explicitness.
    Rename,
    ParseNumber,
    ParseDate {
        pattern: String,
    },
    /// Rescales a number from `from` (or the unit named in the source field
    /// `from_field`) to `to`.
    UnitConvert {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from_field: Option<String>,
        to: String,
    },
    Synonym {
        table: String,
    },
    Constant {
        value: Json,
    },
    NullableDefault {
        value: Json,
    },
}

impl MappingSpec {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("mapping serializes");
        s.push('\n');
        s
    }
}

pub fn load_mapping(path: &Path) -> Result<MappingSpec, EtlError> {
    let text = std::fs::read_to_string(path).map_err(|source| EtlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    MappingSpec::parse(&text).map_err(|e| EtlError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("unknown target table {0:?}")]
    UnknownTable(String),
    #[error("table {table} has no attribute {attribute:?}")]
    UnknownAttribute { table: String, attribute: String },
    #[error("{0} is a surrogate key assigned by the store")]
    SurrogateKeyBound(String),
    #[error("{0} is bound more than once")]
    DuplicateTarget(String),
    #[error("required attribute {0} is not bound")]
    Unbound(String),
    #[error("{0}: at most one unit-convert per binding")]
    MultipleUnitConvert(String),
    #[error("{attribute}: unit-convert needs exactly one of from and from_field")]
    UnitSource { attribute: String },
    #[error("{attribute}: no conversion from {from:?} to {to:?}")]
    UnknownUnitPair {
        attribute: String,
        from: String,
        to: String,
    },
    #[error("{attribute}: converts to {to:?} but the attribute unit is {unit:?}")]
    UnitMismatch {
        attribute: String,
        to: String,
        unit: String,
    },
    #[error("{attribute}: unknown synonym table {table:?}")]
    UnknownSynonymTable { attribute: String, table: String },
    #[error("{0}: binding has no source field and no constant")]
    NoSource(String),
    #[error("{0}: constants must be strings or plain decimal numbers")]
    BadConstant(String),
    #[error("{0}: parse-date targets a non-temporal attribute")]
    DateOnNonTemporal(String),
}

/// A mapping checked against one catalog table.
#[derive(Debug, Clone)]
pub struct CompiledMapping {
    spec: MappingSpec,
    table: TableDef,
    targets: Vec<usize>,
    synonyms: Vec<Vec<Option<SynonymTable>>>,
    constants: Vec<Vec<Option<Cell>>>,
}

impl CompiledMapping {
    pub fn spec(&self) -> &MappingSpec {
        &self.spec
    }

    pub fn table(&self) -> &TableDef {
        &self.table
    }

    pub fn target_table(&self) -> &str {
        &self.table.name
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Text(String),
    Number(Decimal),
    Date(NaiveDate),
    Time(NaiveTime),
}

fn constant_cell(v: &Json) -> Option<Cell> {
    match v {
        Json::String(s) => Some(Cell::Text(s.clone())),
        Json::Number(n) => number::parse_decimal(&n.to_string()).ok().map(Cell::Number),
        _ => None,
    }
}

/// Validates `spec` against `catalog` and resolves its synonym tables.
pub fn compile_mapping(
    spec: &MappingSpec,
    catalog: &Catalog,
    synonyms: &SynonymRegistry,
) -> Result<CompiledMapping, MappingError> {
    let table = catalog
        .table(&spec.target_table)
        .ok_or_else(|| MappingError::UnknownTable(spec.target_table.clone()))?;
    let mut targets = Vec::with_capacity(spec.bindings.len());
    let mut syn_tables = Vec::with_capacity(spec.bindings.len());
    let mut constants = Vec::with_capacity(spec.bindings.len());
    for b in &spec.bindings {
        let idx = table
            .attribute_index(&b.target)
            .ok_or_else(|| MappingError::UnknownAttribute {
                table: table.name.clone(),
                attribute: b.target.clone(),
            })?;
        let attr = &table.attributes[idx];
        if attr.kind == AttributeKind::SurrogateKey {
            return Err(MappingError::SurrogateKeyBound(b.target.clone()));
        }
        if targets.contains(&idx) {
            return Err(MappingError::DuplicateTarget(b.target.clone()));
        }
        targets.push(idx);

        let mut converts = 0;
        let mut has_constant = false;
        let mut syns = Vec::with_capacity(b.transforms.len());
        let mut consts = Vec::with_capacity(b.transforms.len());
        for t in &b.transforms {
            let mut syn = None;
            let mut constant = None;
            match t {
                Transform::UnitConvert {
                    from,
                    from_field,
                    to,
                } => {
                    converts += 1;
                    if converts > 1 {
                        return Err(MappingError::MultipleUnitConvert(b.target.clone()));
                    }
                    let pair_err = |from: &str| MappingError::UnknownUnitPair {
                        attribute: b.target.clone(),
                        from: from.to_string(),
                        to: to.clone(),
                    };
                    match (from, from_field) {
                        (Some(f), None) => {
                            scale_exponent(f, to).ok_or_else(|| pair_err(f))?;
                        }
                        (None, Some(_)) if is_known_unit(to) => {}
                        (None, Some(_)) => return Err(pair_err("?")),
                        _ => {
                            return Err(MappingError::UnitSource {
                                attribute: b.target.clone(),
                            })
                        }
                    }
                    if let Some(unit) = &attr.unit {
                        if unit != to {
                            return Err(MappingError::UnitMismatch {
                                attribute: b.target.clone(),
                                to: to.clone(),
                                unit: unit.clone(),
                            });
                        }
                    }
                }
                Transform::Synonym { table: name } => {
                    let t = synonyms.get(name).ok_or_else(|| {
                        MappingError::UnknownSynonymTable {
                            attribute: b.target.clone(),
                            table: name.clone(),
                        }
                    })?;
                    syn = Some(t.clone());
                }
                Transform::Constant { value } | Transform::NullableDefault { value } => {
                    let c = constant_cell(value)
                        .ok_or_else(|| MappingError::BadConstant(b.target.clone()))?;
                    has_constant = true;
                    constant = Some(c);
                }
                Transform::ParseDate { .. } => {
                    if !matches!(attr.kind, AttributeKind::Date | AttributeKind::Time) {
                        return Err(MappingError::DateOnNonTemporal(b.target.clone()));
                    }
                }
                Transform::Rename | Transform::ParseNumber => {}
            }
            syns.push(syn);
            consts.push(constant);
        }
        if b.source.is_none() && !has_constant {
            return Err(MappingError::NoSource(b.target.clone()));
        }
        syn_tables.push(syns);
        constants.push(consts);
    }
    for (i, attr) in table.attributes.iter().enumerate() {
        if !attr.nullable && attr.kind != AttributeKind::SurrogateKey && !targets.contains(&i) {
            return Err(MappingError::Unbound(attr.name.clone()));
        }
    }
    Ok(CompiledMapping {
        spec: spec.clone(),
        table: table.clone(),
        targets,
        synonyms: syn_tables,
        constants,
    })
}

type Failure = (ReasonCode, String);

fn parse_number(s: &str) -> Result<Decimal, Failure> {
    number::parse_decimal(s.trim())
        .map_err(|e| (ReasonCode::TypeError, format!("{s:?} is not a number: {e}")))
}

fn cell_number(cell: Cell) -> Result<Decimal, Failure> {
    match cell {
        Cell::Number(d) => Ok(d),
        Cell::Text(s) => parse_number(&s),
        other => Err((ReasonCode::TypeError, format!("{other:?} is not a number"))),
    }
}

fn cell_text(cell: Cell) -> String {
    match cell {
        Cell::Text(s) => s.trim().to_string(),
        Cell::Number(d) => number::canonical_decimal(d).to_string(),
        Cell::Date(d) => d.format("%Y-%m-%d").to_string(),
        Cell::Time(t) => t.format("%H:%M:%S").to_string(),
    }
}

/// Defensive bounds keyed by unit.
fn check_range(unit: Option<&str>, x: Decimal) -> Result<(), Failure> {
    let (lo, lo_open, hi) = match unit {
        Some("pH") => (Decimal::new(3, 0), false, Decimal::new(10, 0)),
        Some("mg/l") => (Decimal::ZERO, false, Decimal::new(10000, 0)),
        Some("ton/ha" | "t/ha") => (Decimal::ZERO, true, Decimal::new(200, 0)),
        _ => return Ok(()),
    };
    let below = if lo_open { x <= lo } else { x < lo };
    if below || x > hi {
        let open = if lo_open { "(" } else { "[" };
        return Err((
            ReasonCode::RangeError,
            format!("{x} {} outside {open}{lo}, {hi}]", unit.unwrap_or_default()),
        ));
    }
    Ok(())
}

fn parse_geo_point(s: &str) -> Result<String, Failure> {
    let bad = || (ReasonCode::TypeError, format!("{s:?} is not a lat,lon point"));
    let (lat, lon) = s.split_once(',').ok_or_else(bad)?;
    let lat = number::parse_decimal(lat.trim()).map_err(|_| bad())?;
    let lon = number::parse_decimal(lon.trim()).map_err(|_| bad())?;
    if lat.abs() > Decimal::new(90, 0) || lon.abs() > Decimal::new(180, 0) {
        return Err((ReasonCode::RangeError, format!("{s:?} is not on the globe")));
    }
    Ok(format!(
        "{},{}",
        number::canonical_decimal(lat),
        number::canonical_decimal(lon)
    ))
}

/// Final coercion of a transformed cell to the attribute's kind.
fn coerce(attr: &AttributeDef, cell: Cell) -> Result<Value, Failure> {
    match attr.kind {
        AttributeKind::Number => {
            let d = number::canonical_decimal(cell_number(cell)?);
            check_range(attr.unit.as_deref(), d)?;
            Ok(Value::Num(number::decimal_to_f64(d)))
        }
        AttributeKind::Date => {
            let d = match cell {
                Cell::Date(d) => d,
                other => {
                    let s = cell_text(other);
                    NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(|_| {
                        (ReasonCode::TypeError, format!("{s:?} is not a YYYY-MM-DD date"))
                    })?
                }
            };
            Ok(Value::Text(d.format("%Y-%m-%d").to_string()))
        }
        AttributeKind::Time => {
            let t = match cell {
                Cell::Time(t) => t,
                other => {
                    let s = cell_text(other);
                    NaiveTime::parse_from_str(&s, "%H:%M:%S")
                        .or_else(|_| NaiveTime::parse_from_str(&s, "%H:%M"))
                        .map_err(|_| {
                            (ReasonCode::TypeError, format!("{s:?} is not an HH:MM:SS time"))
                        })?
                }
            };
            Ok(Value::Text(t.format("%H:%M:%S").to_string()))
        }
        AttributeKind::GeoPoint => parse_geo_point(&cell_text(cell)).map(Value::Text),
        _ => Ok(Value::Text(cell_text(cell))),
    }
}

fn apply_binding(
    row: &RawRow,
    mapping: &CompiledMapping,
    bi: usize,
) -> Result<Option<Value>, Failure> {
    let b = &mapping.spec.bindings[bi];
    let attr = &mapping.table.attributes[mapping.targets[bi]];
    let mut cell = b
        .source
        .as_deref()
        .and_then(|f| row.get(f))
        .map(|s| Cell::Text(s.to_string()));
    for (ti, t) in b.transforms.iter().enumerate() {
        cell = match (t, cell) {
            (Transform::Constant { .. }, _) | (Transform::NullableDefault { .. }, None) => {
                mapping.constants[bi][ti].clone()
            }
            (_, None) => None,
            (Transform::Rename | Transform::NullableDefault { .. }, c) => c,
            (Transform::ParseNumber, Some(c)) => Some(Cell::Number(cell_number(c)?)),
            (Transform::ParseDate { pattern }, Some(c)) => {
                let s = cell_text(c);
                let parsed = if attr.kind == AttributeKind::Time {
                    NaiveTime::parse_from_str(&s, pattern).map(Cell::Time)
                } else {
                    NaiveDate::parse_from_str(&s, pattern).map(Cell::Date)
                };
                Some(parsed.map_err(|_| {
                    (ReasonCode::TypeError, format!("{s:?} does not match {pattern:?}"))
                })?)
            }
            (
                Transform::UnitConvert {
                    from,
                    from_field,
                    to,
                },
                Some(c),
            ) => {
                let x = cell_number(c)?;
                let from = match (from, from_field) {
                    (Some(f), _) => f.as_str(),
                    (None, Some(field)) => row.get(field).map(str::trim).ok_or_else(|| {
                        (ReasonCode::UnitError, format!("unit field {field:?} is empty"))
                    })?,
                    (None, None) => unreachable!("rejected by compile_mapping"),
                };
                let y = convert_unit(x, from, to)
                    .map_err(|e| (ReasonCode::UnitError, e.to_string()))?;
                Some(Cell::Number(y))
            }
            (Transform::Synonym { table }, Some(c)) => {
                let s = cell_text(c);
                let syn = mapping.synonyms[bi][ti].as_ref().expect("resolved at compile");
                let canonical = syn.normalize(&s).ok_or_else(|| {
                    (ReasonCode::SynonymMiss, format!("{s:?} not in synonym table {table:?}"))
                })?;
                Some(Cell::Text(canonical.to_string()))
            }
        };
    }
    let cell = cell.filter(|c| !matches!(c, Cell::Text(s) if s.trim().is_empty()));
    match cell {
        None if !attr.nullable => Err((
            ReasonCode::MissingRequired,
            format!("{} is required", attr.name),
        )),
        None => Ok(None),
        Some(c) => coerce(attr, c).map(Some),
    }
}

/// Maps one raw row to a typed row of the mapping's target table.
///
/// Foreign-key attributes hold the referenced dimension's natural key as
/// text; the pipeline resolves them to surrogate keys.
pub fn apply_mapping(
    row: &RawRow,
    mapping: &CompiledMapping,
    source: &str,
) -> Result<Row, RejectRecord> {
    let mut out: Row = vec![None; mapping.table.attributes.len()];
    for (bi, &idx) in mapping.targets.iter().enumerate() {
        match apply_binding(row, mapping, bi) {
            Ok(v) => out[idx] = v,
            Err((reason, message)) => {
                return Err(RejectRecord {
                    source: source.to_string(),
                    row: row.row,
                    binding: mapping.spec.bindings[bi].target.clone(),
                    reason,
                    raw: row.raw.clone(),
                    message,
                })
            }
        }
    }
    Ok(out)
}
