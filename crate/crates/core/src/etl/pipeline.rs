//! The load pipeline: read and map every source, then upsert dimensions and
//! insert facts into the store.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::json;

use super::mapping::{apply_mapping, compile_mapping, CompiledMapping, MappingSpec};
use super::source::{read_source, SourceDescriptor, SourceItem};
use super::synonym::SynonymRegistry;
use super::{EtlError, ReasonCode, RejectRecord, WHOLE_ROW};
use crate::catalog::{AttributeKind, Catalog};
use crate::fsutil::atomic_write;
use crate::store::{Row, Store, StoreError, Upsert, Value};

/// One source file and the mapping that loads it.
#[derive(Debug, Clone)]
pub struct PipelineSource {
    pub descriptor: SourceDescriptor,
    pub mapping: MappingSpec,
}

/// Per-table load counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableLoad {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    /// Dimension rows inserted under a new natural key.
    pub dims_new: usize,
    /// Dimension rows whose natural key was already present.
    pub dims_deduplicated: usize,
    /// Subset of `dims_deduplicated` whose other attributes differed from the
    /// stored row; the stored row was kept.
    pub dims_conflicting: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub tables: BTreeMap<String, TableLoad>,
    /// In source order, then row order.
    pub rejects: Vec<RejectRecord>,
    pub elapsed: Duration,
}

impl LoadReport {
    pub fn rows_read(&self) -> usize {
        self.tables.values().map(|t| t.rows_read).sum()
    }

    pub fn rows_accepted(&self) -> usize {
        self.tables.values().map(|t| t.rows_accepted).sum()
    }

    pub fn rows_rejected(&self) -> usize {
        self.tables.values().map(|t| t.rows_rejected).sum()
    }

    /// JSON summary. Wall times are included only when `timing` is set, so
    /// the untimed form is reproducible.
    pub fn to_json(&self, timing: bool) -> serde_json::Value {
        let tables: serde_json::Map<String, serde_json::Value> = self
            .tables
            .iter()
            .map(|(name, t)| {
                let mut v = json!({
                    "rows_read": t.rows_read,
                    "rows_accepted": t.rows_accepted,
                    "rows_rejected": t.rows_rejected,
                    "dimension_new": t.dims_new,
                    "dimension_deduplicated": t.dims_deduplicated,
                    "dimension_conflicting": t.dims_conflicting,
                });
                if timing {
                    v["elapsed_ms"] = json!(t.elapsed.as_secs_f64() * 1000.0);
                }
                (name.clone(), v)
            })
            .collect();
        let mut v = json!({
            "rows_read": self.rows_read(),
            "rows_accepted": self.rows_accepted(),
            "rows_rejected": self.rows_rejected(),
            "tables": tables,
        });
        if timing {
            v["elapsed_ms"] = json!(self.elapsed.as_secs_f64() * 1000.0);
        }
        v
    }
}

enum Mapped {
    Row(usize, String, Row),
    Reject(RejectRecord),
}

fn map_source(src: &PipelineSource, mapping: &CompiledMapping) -> Result<Vec<Mapped>, EtlError> {
    let name = src.descriptor.name();
    let mut out = Vec::new();
    for item in read_source(&src.descriptor)? {
        out.push(match item? {
            SourceItem::Malformed { row, raw, message } => Mapped::Reject(RejectRecord {
                source: name.clone(),
                row,
                binding: WHOLE_ROW.to_string(),
                reason: ReasonCode::TypeError,
                raw,
                message,
            }),
            SourceItem::Row(r) => match apply_mapping(&r, mapping, &name) {
                Ok(typed) => Mapped::Row(r.row, r.raw, typed),
                Err(rej) => Mapped::Reject(rej),
            },
        });
    }
    Ok(out)
}

/// Resolves foreign-key natural keys to dimension surrogate keys.
fn resolve_keys(store: &Store, mapping: &CompiledMapping, row: &mut Row) -> Result<(), String> {
    for (attr, cell) in mapping.table().attributes.iter().zip(row.iter_mut()) {
        if attr.kind != AttributeKind::ForeignKey {
            continue;
        }
        let Some(Value::Text(natural)) = cell.as_ref() else {
            continue;
        };
        let dim = attr.references.as_deref().unwrap_or_default();
        let key = store
            .table(dim)
            .and_then(|t| t.lookup_lead(natural))
            .ok_or_else(|| format!("{dim} {natural:?} is not loaded"))?;
        *cell = Some(Value::Int(key as i64));
    }
    Ok(())
}

/// Loads `sources` into `store`.
///
/// Sources targeting dimensions are loaded before sources targeting facts;
/// within each group the given order is kept. Reading and mapping run
/// concurrently, one thread per source. The store is flushed after each
/// source, so an error leaves it at the last completed source.
pub fn run_pipeline(
    sources: &[PipelineSource],
    catalog: &Catalog,
    store: &mut Store,
    synonyms: &SynonymRegistry,
) -> Result<LoadReport, EtlError> {
    let started = Instant::now();
    if store.catalog().digest() != catalog.digest() {
        return Err(StoreError::CatalogMismatch {
            stored: store.catalog().digest().to_hex(),
            supplied: catalog.digest().to_hex(),
        }
        .into());
    }
    let mut compiled = Vec::with_capacity(sources.len());
    for s in sources {
        let m = compile_mapping(&s.mapping, catalog, synonyms).map_err(|error| {
            EtlError::Mapping {
                source_name: s.descriptor.name(),
                error,
            }
        })?;
        compiled.push(m);
    }
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by_key(|&i| compiled[i].table().is_fact());

    let mapped: Vec<Result<Vec<Mapped>, EtlError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = order
            .iter()
            .map(|&i| {
                let (src, m) = (&sources[i], &compiled[i]);
                scope.spawn(move || map_source(src, m))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("mapping thread panicked"))
            .collect()
    });

    let mut report = LoadReport::default();
    for (&i, items) in order.iter().zip(mapped) {
        let table_started = Instant::now();
        let items = items?;
        let mapping = &compiled[i];
        let table = mapping.target_table().to_string();
        let is_fact = mapping.table().is_fact();
        let mut load = report.tables.remove(&table).unwrap_or_default();
        let mut facts = Vec::new();
        for item in items {
            load.rows_read += 1;
            let (row_no, raw, mut row) = match item {
                Mapped::Reject(r) => {
                    load.rows_rejected += 1;
                    report.rejects.push(r);
                    continue;
                }
                Mapped::Row(n, raw, row) => (n, raw, row),
            };
            if is_fact {
                if let Err(message) = resolve_keys(store, mapping, &mut row) {
                    let binding = mapping
                        .table()
                        .attributes
                        .iter()
                        .zip(&row)
                        .find(|(a, v)| {
                            a.kind == AttributeKind::ForeignKey
                                && matches!(v, Some(Value::Text(_)))
                        })
                        .map(|(a, _)| a.name.clone())
                        .unwrap_or_else(|| WHOLE_ROW.to_string());
                    load.rows_rejected += 1;
                    report.rejects.push(RejectRecord {
                        source: sources[i].descriptor.name(),
                        row: row_no,
                        binding,
                        reason: ReasonCode::MissingRequired,
                        raw,
                        message,
                    });
                    continue;
                }
                facts.push(row);
            } else {
                match store.upsert_dimension(&table, row)? {
                    Upsert::Inserted(_) => load.dims_new += 1,
                    Upsert::Existing { identical, .. } => {
                        load.dims_deduplicated += 1;
                        if !identical {
                            load.dims_conflicting += 1;
                        }
                    }
                }
            }
            load.rows_accepted += 1;
        }
        if is_fact {
            store.insert_facts(&table, facts)?;
        }
        store.flush()?;
        load.elapsed += table_started.elapsed();
        report.tables.insert(table, load);
    }
    report.elapsed = started.elapsed();
    Ok(report)
}

const LEDGER_HEADER: [&str; 5] = ["source", "row", "binding", "reason", "raw"];

/// Serialises rejects as delimited text with columns
/// `source,row,binding,reason,raw`.
pub fn reject_ledger_bytes(rejects: &[RejectRecord]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(LEDGER_HEADER).expect("in-memory write");
    for r in rejects {
        w.write_record([
            r.source.as_str(),
            &r.row.to_string(),
            &r.binding,
            r.reason.token(),
            &r.raw,
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn write_reject_ledger(path: &Path, rejects: &[RejectRecord]) -> Result<(), EtlError> {
    atomic_write(path, &reject_ledger_bytes(rejects)).map_err(|source| EtlError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_reject_ledger(path: &Path) -> Result<Vec<RejectRecord>, EtlError> {
    let bad = |message: String| EtlError::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(LEDGER_HEADER) {
        return Err(bad("unexpected reject ledger header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec[1].parse().map_err(|_| bad(format!("bad row number {:?}", &rec[1])))?;
        let reason = ReasonCode::from_token(&rec[3])
            .ok_or_else(|| bad(format!("unknown reason {:?}", &rec[3])))?;
        out.push(RejectRecord {
            source: rec[0].to_string(),
            row,
            binding: rec[2].to_string(),
            reason,
            raw: rec[4].to_string(),
            message: String::new(),
        });
    }
    Ok(out)
}
