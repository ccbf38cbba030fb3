//! Variant-to-canonical lookup tables, used to harmonise inconsistent
//! spellings such as crop abbreviations.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::EtlError;

const BUILTIN_CROPS: &str = include_str!("../../data/synonyms/crops.csv");

/// Name of the builtin crop-name table.
pub const CROPS: &str = "crops";

#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: HashMap<String, String>,
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

impl SynonymTable {
    /// Parses a two-column delimited table with a `variant,canonical` header.
    /// Every canonical form also maps to itself.
    pub fn parse(text: &str, origin: &str) -> Result<Self, EtlError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let mut entries = HashMap::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| EtlError::Parse {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(EtlError::Parse {
                    path: origin.to_string(),
                    message: format!("row {} has {} fields, expected 2", i + 1, rec.len()),
                });
            }
            let canonical = rec[1].trim().to_string();
            entries.insert(fold(&rec[0]), canonical.clone());
            entries.entry(fold(&canonical)).or_insert(canonical);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, EtlError> {
        let text = std::fs::read_to_string(path).map_err(|source| EtlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Canonical form of `value`, matched case-insensitively after trimming.
    pub fn normalize(&self, value: &str) -> Option<&str> {
        self.entries.get(&fold(value)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Named synonym tables available to mappings. Starts with the builtin
/// `crops` table.
#[derive(Debug, Clone)]
pub struct SynonymRegistry {
    tables: BTreeMap<String, SynonymTable>,
}

impl Default for SynonymRegistry {
    fn default() -> Self {
        let crops = SynonymTable::parse(BUILTIN_CROPS, "builtin crops").expect("builtin table parses");
        Self {
            tables: BTreeMap::from([(CROPS.to_string(), crops)]),
        }
    }
}

impl SynonymRegistry {
    pub fn insert(&mut self, name: impl Into<String>, table: SynonymTable) {
        self.tables.insert(name.into(), table);
    }

    pub fn get(&self, name: &str) -> Option<&SynonymTable> {
        self.tables.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }
}

/// Looks `value` up in `table`. `None` signals a synonym miss.
pub fn normalize_synonym<'a>(value: &str, table: &'a SynonymTable) -> Option<&'a str> {
    table.normalize(value)
}
