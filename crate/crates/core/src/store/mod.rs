//! Persistent warehouse storage.
//!
//! On disk a store is a directory holding `manifest.json`, a copy of the
//! catalog it was created with, and one subdirectory per populated table
//! containing `data.csv`. Data files are RFC 4180 with an LF terminator, a
//! header row, and a leading `_key` column carrying the dense row key
//! (1..N in insertion order). Absent cells are empty fields.
//!
//! Digests are FNV-1a 64 over the exact data-file bytes. The snapshot digest
//! covers the catalog digest and every table's row count and digest, one
//! `name rows digest` line per table in name order.

mod query;
mod value;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AttributeKind, Catalog, TableDef};
use crate::digest::{Digest, Fnv1a64};
use crate::fsutil::atomic_write;
use crate::number;

pub use query::{
    star_query, AggFunc, Aggregate, ColumnRef, Filter, JoinSpec, Predicate, QueryError, QuerySpec,
    ResultTable,
};
pub use value::{Row, Value};

const MANIFEST: &str = "manifest.json";
const CATALOG_COPY: &str = "catalog.json";
const LOCK: &str = ".lock";
const DATA_FILE: &str = "data.csv";
const KEY_COLUMN: &str = "_key";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("store at {0} is locked by another writer")]
    Locked(String),
    #[error("catalog mismatch: store was created with catalog {stored}, supplied catalog is {supplied}")]
    CatalogMismatch { stored: String, supplied: String },
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("table {0:?} has the wrong role for this operation")]
    WrongRole(String),
    #[error("type error in {table}.{attribute}: {message}")]
    Type {
        table: String,
        attribute: String,
        message: String,
    },
    #[error("dangling key {key} in {table}.{attribute}")]
    DanglingKey {
        table: String,
        attribute: String,
        key: i64,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Rows of one table plus the lookup indices dimension upserts need.
#[derive(Debug, Clone)]
pub struct TableData {
    def: Arc<TableDef>,
    rows: Vec<Row>,
    natural_index: HashMap<Vec<String>, u64>,
    lead_index: HashMap<String, u64>,
}

impl TableData {
    fn new(def: Arc<TableDef>) -> Self {
        Self {
            def,
            rows: Vec::new(),
            natural_index: HashMap::new(),
            lead_index: HashMap::new(),
        }
    }

    pub fn def(&self) -> &TableDef {
        &self.def
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row with surrogate key `key`.
    pub fn get(&self, key: u64) -> Option<&Row> {
        usize::try_from(key).ok()?.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    pub fn value(&self, key: u64, attribute: usize) -> Option<&Value> {
        self.get(key)?.get(attribute)?.as_ref()
    }

    /// Key of the dimension row with exactly this natural-key tuple.
    pub fn lookup_natural(&self, tuple: &[String]) -> Option<u64> {
        self.natural_index.get(tuple).copied()
    }

    /// Key of the first dimension row whose leading natural-key part equals
    /// `value`. Facts reference dimensions by this leading part.
    pub fn lookup_lead(&self, value: &str) -> Option<u64> {
        self.lead_index.get(value).copied()
    }

    fn natural_tuple(&self, row: &Row) -> Vec<String> {
        self.def
            .natural_key_indices()
            .into_iter()
            .map(|i| row[i].as_ref().map(Value::render).unwrap_or_default())
            .collect()
    }

    fn index_row(&mut self, key: u64) {
        let row = &self.rows[key as usize - 1];
        let tuple = self.natural_tuple(row);
        if let Some(lead) = tuple.first() {
            self.lead_index.entry(lead.clone()).or_insert(key);
        }
        self.natural_index.entry(tuple).or_insert(key);
    }

    /// Canonical serialization; these bytes are the data file and the digest
    /// input.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec![KEY_COLUMN.to_string()];
        header.extend(self.def.attributes.iter().map(|a| a.name.clone()));
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(|v| v.as_ref().map(Value::render).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_csv())
    }

    fn from_csv(def: Arc<TableDef>, bytes: &[u8]) -> Result<Self, StoreError> {
        let name = def.name.clone();
        let corrupt = |msg: String| StoreError::Corrupt(format!("table {name}: {msg}"));
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = r.headers().map_err(|e| corrupt(e.to_string()))?.clone();
        let expected: Vec<&str> = std::iter::once(KEY_COLUMN)
            .chain(def.attributes.iter().map(|a| a.name.as_str()))
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(corrupt("header does not match catalog".into()));
        }
        let mut table = TableData::new(def.clone());
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| corrupt(e.to_string()))?;
            if rec.get(0) != Some((i + 1).to_string().as_str()) {
                return Err(corrupt(format!("row keys are not dense at row {}", i + 1)));
            }
            let mut row = Vec::with_capacity(def.attributes.len());
            for (attr, field) in def.attributes.iter().zip(rec.iter().skip(1)) {
                if field.is_empty() {
                    row.push(None);
                } else {
                    let v = Value::parse_stored(attr.kind, field)
                        .ok_or_else(|| corrupt(format!("bad value {field:?} in {}", attr.name)))?;
                    row.push(Some(v));
                }
            }
            table.rows.push(row);
            if !def.is_fact() {
                table.index_row((i + 1) as u64);
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TableEntry {
    rows: usize,
    digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    catalog_digest: String,
    tables: BTreeMap<String, TableEntry>,
}

/// An immutable view of every table at a load boundary. Cloning is cheap and
/// later writes to the originating [`Store`] never affect it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    catalog: Arc<Catalog>,
    tables: BTreeMap<String, Arc<TableData>>,
}

impl Snapshot {
    fn empty(catalog: Arc<Catalog>) -> Self {
        let tables = catalog
            .tables
            .values()
            .map(|t| (t.name.clone(), Arc::new(TableData::new(Arc::new(t.clone())))))
            .collect();
        Self { catalog, tables }
    }

    /// Loads a store directory read-only, without taking the writer lock.
    pub fn open(dir: &Path, catalog: &Catalog) -> Result<Self, StoreError> {
        let catalog = Arc::new(catalog.clone());
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Ok(Self::empty(catalog));
        }
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| StoreError::Corrupt(format!("manifest: {e}")))?;
        let supplied = catalog.digest().to_hex();
        if manifest.catalog_digest != supplied {
            return Err(StoreError::CatalogMismatch {
                stored: manifest.catalog_digest,
                supplied,
            });
        }
        let mut snap = Self::empty(catalog);
        for (name, entry) in &manifest.tables {
            let slot = snap
                .tables
                .get_mut(name)
                .ok_or_else(|| StoreError::Corrupt(format!("manifest lists unknown table {name}")))?;
            if entry.rows == 0 {
                continue;
            }
            let path = dir.join(name).join(DATA_FILE);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if Digest::of(&bytes).to_hex() != entry.digest {
                return Err(StoreError::Corrupt(format!("digest mismatch for table {name}")));
            }
            let data = TableData::from_csv(slot.def.clone(), &bytes)?;
            if data.len() != entry.rows {
                return Err(StoreError::Corrupt(format!("row count mismatch for table {name}")));
            }
            *slot = Arc::new(data);
        }
        Ok(snap)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.tables.get(name).map(|t| t.as_ref())
    }

    pub fn row_count(&self, name: &str) -> usize {
        self.table(name).map_or(0, TableData::len)
    }

    pub fn total_rows(&self) -> usize {
        self.tables.values().map(|t| t.len()).sum()
    }

    /// Per-table digests, in table-name order.
    pub fn table_digests(&self) -> BTreeMap<String, Digest> {
        self.tables
            .iter()
            .map(|(n, t)| (n.clone(), t.digest()))
            .collect()
    }

    pub fn digest(&self) -> Digest {
        let mut h = Fnv1a64::new();
        h.update(self.catalog.digest().to_hex().as_bytes());
        h.update(b"\n");
        for (name, t) in &self.tables {
            h.update(format!("{name} {} {}\n", t.len(), t.digest()).as_bytes());
        }
        h.finish()
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            catalog_digest: self.catalog.digest().to_hex(),
            tables: self
                .tables
                .iter()
                .map(|(n, t)| {
                    (
                        n.clone(),
                        TableEntry {
                            rows: t.len(),
                            digest: t.digest().to_hex(),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Outcome of a dimension upsert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upsert {
    Inserted(u64),
    /// Natural key already present. The stored row is kept; `identical`
    /// reports whether the offered attributes matched it.
    Existing { key: u64, identical: bool },
}

impl Upsert {
    pub fn key(self) -> u64 {
        match self {
            Upsert::Inserted(k) | Upsert::Existing { key: k, .. } => k,
        }
    }
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Exclusive writer handle over a store directory.
pub struct Store {
    root: PathBuf,
    current: Snapshot,
    dirty: Vec<String>,
    _lock: LockGuard,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

/// Opens (creating if needed) a store directory for exclusive writing.
pub fn open_store(dir: &Path, catalog: &Catalog) -> Result<Store, StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let lock_path = dir.join(LOCK);
    match fs::OpenOptions::new().write(true).create_new(true).open(&lock_path) {
        Ok(mut f) => {
            use std::io::Write;
            let _ = writeln!(f, "{}", std::process::id());
        }
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
            return Err(StoreError::Locked(dir.display().to_string()))
        }
        Err(e) => return Err(io_err(&lock_path)(e)),
    }
    let lock = LockGuard(lock_path);
    let current = Snapshot::open(dir, catalog)?;
    let mut store = Store {
        root: dir.to_path_buf(),
        current,
        dirty: Vec::new(),
        _lock: lock,
    };
    if !dir.join(MANIFEST).exists() {
        store.flush()?;
    }
    Ok(store)
}

impl Store {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn catalog(&self) -> &Catalog {
        &self.current.catalog
    }

    /// Immutable view of the current contents, including unflushed writes.
    pub fn snapshot(&self) -> Snapshot {
        self.current.clone()
    }

    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.current.table(name)
    }

    fn table_mut(&mut self, name: &str) -> Result<&mut TableData, StoreError> {
        let slot = self
            .current
            .tables
            .get_mut(name)
            .ok_or_else(|| StoreError::UnknownTable(name.to_string()))?;
        if !self.dirty.iter().any(|d| d == name) {
            self.dirty.push(name.to_string());
        }
        Ok(Arc::make_mut(slot))
    }

    /// Inserts a dimension row unless its natural key is already present, in
    /// which case the existing key is returned and the stored row is kept.
    pub fn upsert_dimension(&mut self, table: &str, row: Row) -> Result<Upsert, StoreError> {
        let def = self
            .table(table)
            .ok_or_else(|| StoreError::UnknownTable(table.to_string()))?
            .def
            .clone();
        if def.is_fact() {
            return Err(StoreError::WrongRole(table.to_string()));
        }
        let row = check_row(&def, row)?;
        let data = self.table(table).expect("checked above");
        let tuple = data.natural_tuple(&row);
        if let Some(key) = data.lookup_natural(&tuple) {
            let identical = data.get(key) == Some(&row);
            return Ok(Upsert::Existing { key, identical });
        }
        let data = self.table_mut(table)?;
        data.rows.push(row);
        let key = data.rows.len() as u64;
        data.index_row(key);
        Ok(Upsert::Inserted(key))
    }

    /// Appends a batch of fact rows atomically: either every row is inserted
    /// or none is. Surrogate-key attributes are assigned by the store.
    pub fn insert_facts(&mut self, table: &str, rows: Vec<Row>) -> Result<usize, StoreError> {
        let def = self
            .table(table)
            .ok_or_else(|| StoreError::UnknownTable(table.to_string()))?
            .def
            .clone();
        if !def.is_fact() {
            return Err(StoreError::WrongRole(table.to_string()));
        }
        let mut checked = Vec::with_capacity(rows.len());
        for row in rows {
            let row = check_row(&def, row)?;
            for (attr, v) in def.attributes.iter().zip(&row) {
                if attr.kind != AttributeKind::ForeignKey {
                    continue;
                }
                if let Some(Value::Int(k)) = v {
                    let dim = attr.references.as_deref().unwrap_or_default();
                    let n = self.current.row_count(dim) as i64;
                    if *k < 1 || *k > n {
                        return Err(StoreError::DanglingKey {
                            table: table.to_string(),
                            attribute: attr.name.clone(),
                            key: *k,
                        });
                    }
                }
            }
            checked.push(row);
        }
        let count = checked.len();
        if count == 0 {
            return Ok(0);
        }
        let surrogate = def
            .attributes
            .iter()
            .position(|a| a.kind == AttributeKind::SurrogateKey);
        let data = self.table_mut(table)?;
        for mut row in checked {
            let key = data.rows.len() as i64 + 1;
            if let Some(i) = surrogate {
                row[i] = Some(Value::Int(key));
            }
            data.rows.push(row);
        }
        Ok(count)
    }

    /// Persists every modified table and then the manifest. The manifest
    /// rename is the durability boundary.
    pub fn flush(&mut self) -> Result<(), StoreError> {
        let catalog_path = self.root.join(CATALOG_COPY);
        if !catalog_path.exists() {
            atomic_write(&catalog_path, self.current.catalog.to_canonical_json().as_bytes())
                .map_err(io_err(&catalog_path))?;
        }
        for name in std::mem::take(&mut self.dirty) {
            let t = &self.current.tables[&name];
            let path = self.root.join(&name).join(DATA_FILE);
            atomic_write(&path, &t.to_csv()).map_err(io_err(&path))?;
        }
        let manifest = self.current.manifest();
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join(MANIFEST);
        atomic_write(&path, text.as_bytes()).map_err(io_err(&path))
    }

    /// Flushes and releases the writer lock.
    pub fn close(mut self) -> Result<Snapshot, StoreError> {
        self.flush()?;
        Ok(self.current.clone())
    }
}

/// Checks a row against the table's attribute kinds and nullability, and
/// snaps numbers onto the stored decimal grid.
fn check_row(def: &TableDef, row: Row) -> Result<Row, StoreError> {
    let type_err = |attribute: &str, message: String| StoreError::Type {
        table: def.name.clone(),
        attribute: attribute.to_string(),
        message,
    };
    if row.len() != def.attributes.len() {
        return Err(type_err(
            "*",
            format!("expected {} values, got {}", def.attributes.len(), row.len()),
        ));
    }
    let mut out = Vec::with_capacity(row.len());
    for (attr, v) in def.attributes.iter().zip(row) {
        let v = match v {
            Some(Value::Text(s)) if s.is_empty() => None,
            other => other,
        };
        let v = match (attr.kind, v) {
            (AttributeKind::SurrogateKey, _) => None,
            (_, None) => None,
            (AttributeKind::ForeignKey, Some(Value::Int(i))) => Some(Value::Int(i)),
            (AttributeKind::Number, Some(Value::Num(x))) => match number::canonical_f64(x) {
                Some(x) => Some(Value::Num(x)),
                None => return Err(type_err(&attr.name, format!("unrepresentable number {x}"))),
            },
            (AttributeKind::Number, Some(Value::Int(i))) => Some(Value::Num(i as f64)),
            (k, Some(Value::Text(s))) if !k.is_key() && k != AttributeKind::Number => {
                Some(Value::Text(s))
            }
            (k, Some(other)) => {
                return Err(type_err(&attr.name, format!("{other:?} is not a valid {k} value")))
            }
        };
        if v.is_none() && !attr.nullable && attr.kind != AttributeKind::SurrogateKey {
            return Err(type_err(&attr.name, "required value is absent".into()));
        }
        out.push(v);
    }
    Ok(out)
}
