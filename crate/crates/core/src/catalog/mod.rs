//! Constellation schema definitions.
//!
//! A [`Catalog`] is a set of fact and dimension tables. Fact tables reference
//! dimensions through foreign-key attributes; dimensions never reference
//! anything, which keeps the reference graph bipartite.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest;

pub use builtin::{builtin_catalog, BUILTIN_CATALOG_JSON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    SurrogateKey,
    NaturalKeyPart,
    ForeignKey,
    Text,
    Number,
    Date,
    Time,
    GeoPoint,
    GeoPolygon,
    Enum,
}

impl AttributeKind {
    pub fn token(self) -> &'static str {
        match self {
            Self::SurrogateKey => "surrogate-key",
            Self::NaturalKeyPart => "natural-key-part",
            Self::ForeignKey => "foreign-key",
            Self::Text => "text",
            Self::Number => "number",
            Self::Date => "date",
            Self::Time => "time",
            Self::GeoPoint => "geo-point",
            Self::GeoPolygon => "geo-polygon",
            Self::Enum => "enum",
        }
    }

    /// Kinds whose stored value is an integer key.
    pub fn is_key(self) -> bool {
        matches!(self, Self::SurrogateKey | Self::ForeignKey)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub nullable: bool,
    /// Referenced dimension table, for foreign-key attributes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<String>,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, kind: AttributeKind, nullable: bool) -> Self {
        Self {
            name: name.into(),
            kind,
            unit: None,
            nullable,
            references: None,
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn foreign_key(name: impl Into<String>, references: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::ForeignKey,
            unit: None,
            nullable: true,
            references: Some(references.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRole {
    Fact,
    Dimension,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub role: TableRole,
    pub attributes: Vec<AttributeDef>,
    #[serde(default)]
    pub natural_key: Vec<String>,
    #[serde(default)]
    pub measures: Vec<String>,
    #[serde(default)]
    pub dimension_refs: Vec<String>,
}

impl TableDef {
    pub fn is_fact(&self) -> bool {
        self.role == TableRole::Fact
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Positions of the natural-key attributes, in natural-key order.
    pub fn natural_key_indices(&self) -> Vec<usize> {
        self.natural_key
            .iter()
            .filter_map(|n| self.attribute_index(n))
            .collect()
    }

    /// The foreign-key attribute that references `dimension`.
    pub fn foreign_key_for(&self, dimension: &str) -> Option<usize> {
        self.attributes.iter().position(|a| {
            a.kind == AttributeKind::ForeignKey && a.references.as_deref() == Some(dimension)
        })
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("catalog parse error: duplicate table {0:?}")]
    DuplicateTable(String),
    #[error("catalog parse error: no tables")]
    NoTables,
}

/// A constellation schema. Immutable once built; tables are keyed by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub version: String,
    pub tables: BTreeMap<String, TableDef>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    version: String,
    tables: Vec<TableDef>,
}

impl Catalog {
    /// Builds a catalog from table definitions, rejecting duplicate names.
    pub fn from_tables(
        version: impl Into<String>,
        tables: impl IntoIterator<Item = TableDef>,
    ) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for t in tables {
            let name = t.name.clone();
            if map.insert(name.clone(), t).is_some() {
                return Err(CatalogError::DuplicateTable(name));
            }
        }
        if map.is_empty() {
            return Err(CatalogError::NoTables);
        }
        Ok(Self {
            version: version.into(),
            tables: map,
        })
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.get(name)
    }

    pub fn facts(&self) -> impl Iterator<Item = &TableDef> {
        self.tables.values().filter(|t| t.is_fact())
    }

    pub fn dimensions(&self) -> impl Iterator<Item = &TableDef> {
        self.tables.values().filter(|t| !t.is_fact())
    }

    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        if text.trim().is_empty() {
            return Err(CatalogError::NoTables);
        }
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_tables(file.version, file.tables)
    }

    /// Canonical serialization: pretty JSON with sorted object keys, tables
    /// ordered by name, LF line endings and a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let file = CatalogFile {
            version: self.version.clone(),
            tables: self.tables.values().cloned().collect(),
        };
        // serde_json::Value objects are BTreeMap-backed, so keys come out sorted.
        let value = serde_json::to_value(&file).expect("catalog serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("catalog serializes");
        s.push('\n');
        s
    }

    pub fn digest(&self) -> Digest {
        Digest::of(self.to_canonical_json().as_bytes())
    }
}

/// Reads a catalog file. The result is parsed but not validated.
pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Catalog::parse(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub table: String,
    pub attribute: Option<String>,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.attribute {
            Some(a) => write!(f, "[{}] {}.{}: {}", self.rule, self.table, a, self.message),
            None => write!(f, "[{}] {}: {}", self.rule, self.table, self.message),
        }
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks every structural rule of the catalog. Violations are returned
/// sorted, so the result does not depend on table insertion order.
pub fn validate_catalog(catalog: &Catalog) -> Vec<Violation> {
    let mut out = Vec::new();
    for table in catalog.tables.values() {
        validate_table(catalog, table, &mut out);
    }
    out.sort();
    out.dedup();
    out
}

fn validate_table(catalog: &Catalog, table: &TableDef, out: &mut Vec<Violation>) {
    let mut push = |attribute: Option<&str>, rule: &'static str, message: String| {
        out.push(Violation {
            table: table.name.clone(),
            attribute: attribute.map(str::to_string),
            rule,
            message,
        })
    };

    if !is_identifier(&table.name) {
        push(None, "invalid-identifier", format!("table name {:?} is not an identifier", table.name));
    }
    if table.attributes.is_empty() {
        push(None, "no-attributes", "table has no attributes".into());
    }

    let mut seen = BTreeSet::new();
    let mut surrogates = 0;
    for attr in &table.attributes {
        let a = Some(attr.name.as_str());
        if !is_identifier(&attr.name) {
            push(a, "invalid-identifier", format!("{:?} is not an identifier", attr.name));
        }
        if !seen.insert(attr.name.to_ascii_lowercase()) {
            push(a, "duplicate-attribute", "name repeats within the table (case-insensitive)".into());
        }
        if attr.unit.is_some() && attr.kind != AttributeKind::Number {
            push(a, "unit-on-non-number", format!("unit given on a {} attribute", attr.kind));
        }
        if attr.kind == AttributeKind::SurrogateKey {
            surrogates += 1;
        }
        match (attr.kind, &attr.references) {
            (AttributeKind::ForeignKey, None) => {
                push(a, "fk-missing-reference", "foreign key does not name its table".into())
            }
            (AttributeKind::ForeignKey, Some(r)) => {
                if !table.is_fact() {
                    push(a, "dimension-has-fk", "dimensions may not reference other tables".into());
                } else if !table.dimension_refs.contains(r) {
                    push(a, "fk-not-in-refs", format!("references {r:?} which is not a dimension_ref"));
                }
            }
            (_, Some(_)) => push(a, "reference-on-non-fk", "only foreign keys carry a reference".into()),
            _ => {}
        }
    }
    if surrogates > 1 {
        push(None, "multiple-surrogate-keys", format!("{surrogates} surrogate-key attributes"));
    }

    let known = |n: &str| table.attribute(n);
    match table.role {
        TableRole::Fact => {
            if table.measures.is_empty() {
                push(None, "fact-needs-measure", "fact table has no measures".into());
            }
            if table.dimension_refs.is_empty() {
                push(None, "fact-needs-dimension-ref", "fact table references no dimension".into());
            }
            if !table.natural_key.is_empty() {
                push(None, "fact-has-natural-key", "natural keys apply to dimensions only".into());
            }
            for m in &table.measures {
                match known(m) {
                    None => push(Some(m), "unknown-attribute", "measure is not an attribute".into()),
                    Some(def) if def.kind == AttributeKind::ForeignKey => {
                        push(Some(m), "measure-is-foreign-key", "a foreign key cannot be a measure".into())
                    }
                    Some(def) if def.kind != AttributeKind::Number => {
                        push(Some(m), "measure-not-number", format!("measure has kind {}", def.kind))
                    }
                    _ => {}
                }
            }
            let mut refs = BTreeSet::new();
            for r in &table.dimension_refs {
                if !refs.insert(r) {
                    push(None, "duplicate-ref", format!("dimension {r:?} referenced twice"));
                }
                match catalog.table(r) {
                    None => push(None, "dangling-ref", format!("references missing table {r:?}")),
                    Some(t) if t.is_fact() => {
                        push(None, "ref-to-fact", format!("references fact table {r:?}"))
                    }
                    Some(_) => {}
                }
                if table.foreign_key_for(r).is_none() {
                    push(None, "ref-without-fk", format!("no foreign-key attribute for {r:?}"));
                }
            }
        }
        TableRole::Dimension => {
            if table.natural_key.is_empty() {
                push(None, "dimension-needs-natural-key", "dimension has no natural key".into());
            }
            if !table.measures.is_empty() || !table.dimension_refs.is_empty() {
                push(None, "dimension-has-fact-fields", "dimensions carry no measures or refs".into());
            }
            for k in &table.natural_key {
                match known(k) {
                    None => push(Some(k), "unknown-attribute", "natural key part is not an attribute".into()),
                    Some(def) => {
                        if def.kind != AttributeKind::NaturalKeyPart {
                            push(Some(k), "natural-key-kind", format!("natural key part has kind {}", def.kind));
                        }
                        if def.nullable {
                            push(Some(k), "nullable-key", "natural key parts must be non-nullable".into());
                        }
                    }
                }
            }
        }
    }
}
