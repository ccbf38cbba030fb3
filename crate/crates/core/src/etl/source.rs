//! Raw source readers.
//!
//! Delimited text follows RFC 4180 (double-quote escaping, CRLF or LF). Record
//! JSON is either a top-level array of flat objects or one object per line.
//! Empty fields are absent. Rows with the wrong shape are yielded as
//! [`SourceItem::Malformed`] so one bad line never aborts the stream.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde_json::Value as Json;

use super::EtlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Delimited { delimiter: char },
    RecordJson,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDescriptor {
    pub path: PathBuf,
    pub format: SourceFormat,
    pub has_header: bool,
}

impl SourceDescriptor {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: SourceFormat::Delimited { delimiter: ',' },
            has_header: true,
        }
    }

    /// Picks the format from the file extension: `.json`/`.jsonl`/`.ndjson`
    /// are record JSON, `.tsv` is tab-delimited, anything else is CSV.
    pub fn infer(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let format = match ext.as_deref() {
            Some("json" | "jsonl" | "ndjson") => SourceFormat::RecordJson,
            Some("tsv") => SourceFormat::Delimited { delimiter: '\t' },
            _ => SourceFormat::Delimited { delimiter: ',' },
        };
        Self {
            path,
            format,
            has_header: true,
        }
    }

    pub fn name(&self) -> String {
        self.path.display().to_string()
    }
}

/// One source row: field name to text, absent fields omitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    /// 1-based, header excluded.
    pub row: usize,
    pub fields: BTreeMap<String, String>,
    pub raw: String,
}

impl RawRow {
    pub fn get(&self, field: &str) -> Option<&str> {
        self.fields.get(field).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceItem {
    Row(RawRow),
    Malformed {
        row: usize,
        raw: String,
        message: String,
    },
}

/// Stream of rows from one source.
pub enum SourceRows {
    Delimited {
        reader: csv::Reader<File>,
        names: Vec<String>,
        delimiter: u8,
        row: usize,
        path: String,
    },
    Json(std::vec::IntoIter<SourceItem>),
}

fn io_error(path: &Path, source: std::io::Error) -> EtlError {
    EtlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Opens a source for reading.
pub fn read_source(src: &SourceDescriptor) -> Result<SourceRows, EtlError> {
    if src.path.as_os_str().is_empty() {
        return Err(EtlError::Parse {
            path: String::new(),
            message: "empty source path".into(),
        });
    }
    match src.format {
        SourceFormat::Delimited { delimiter } => open_delimited(src, delimiter),
        SourceFormat::RecordJson => read_json(src),
    }
}

fn open_delimited(src: &SourceDescriptor, delimiter: char) -> Result<SourceRows, EtlError> {
    let path = src.name();
    let delim = u8::try_from(delimiter)
        .ok()
        .filter(|b| b.is_ascii())
        .ok_or_else(|| EtlError::Parse {
            path: path.clone(),
            message: format!("delimiter {delimiter:?} is not a single ASCII character"),
        })?;
    let file = File::open(&src.path).map_err(|e| io_error(&src.path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(src.has_header)
        .flexible(true)
        .from_reader(file);
    let names = if src.has_header {
        let header = reader.headers().map_err(|e| EtlError::Parse {
            path: path.clone(),
            message: format!("header: {e}"),
        })?;
        let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(EtlError::Parse {
                path,
                message: format!("duplicate header field {dup:?}"),
            });
        }
        names
    } else {
        Vec::new()
    };
    Ok(SourceRows::Delimited {
        reader,
        names,
        delimiter: delim,
        row: 0,
        path,
    })
}

fn raw_text(fields: impl IntoIterator<Item = impl AsRef<[u8]>>, delimiter: u8) -> String {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = w.write_record(fields);
    let bytes = w.into_inner().unwrap_or_default();
    String::from_utf8_lossy(&bytes).trim_end_matches('\n').to_string()
}

impl Iterator for SourceRows {
    type Item = Result<SourceItem, EtlError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            SourceRows::Json(items) => items.next().map(Ok),
            SourceRows::Delimited {
                reader,
                names,
                delimiter,
                row,
                path,
            } => {
                let mut rec = csv::ByteRecord::new();
                match reader.read_byte_record(&mut rec) {
                    Ok(false) => None,
                    Err(e) if e.is_io_error() => Some(Err(EtlError::Parse {
                        path: path.clone(),
                        message: e.to_string(),
                    })),
                    Err(e) => {
                        *row += 1;
                        Some(Ok(SourceItem::Malformed {
                            row: *row,
                            raw: String::new(),
                            message: e.to_string(),
                        }))
                    }
                    Ok(true) => {
                        *row += 1;
                        let raw = raw_text(rec.iter(), *delimiter);
                        if names.is_empty() {
                            // Headerless: fields are named by 1-based position
                            // and the first row fixes the width.
                            *names = (1..=rec.len()).map(|i| i.to_string()).collect();
                        }
                        if rec.len() != names.len() {
                            return Some(Ok(SourceItem::Malformed {
                                row: *row,
                                raw,
                                message: format!(
                                    "expected {} fields, found {}",
                                    names.len(),
                                    rec.len()
                                ),
                            }));
                        }
                        let mut fields = BTreeMap::new();
                        for (name, bytes) in names.iter().zip(rec.iter()) {
                            let Ok(text) = std::str::from_utf8(bytes) else {
                                return Some(Ok(SourceItem::Malformed {
                                    row: *row,
                                    raw,
                                    message: format!("field {name:?} is not valid UTF-8"),
                                }));
                            };
                            if !text.is_empty() {
                                fields.insert(name.clone(), text.to_string());
                            }
                        }
                        Some(Ok(SourceItem::Row(RawRow {
                            row: *row,
                            fields,
                            raw,
                        })))
                    }
                }
            }
        }
    }
}

fn json_item(row: usize, value: Json, raw: String) -> SourceItem {
    let Json::Object(map) = value else {
        return SourceItem::Malformed {
            row,
            raw,
            message: "record is not a JSON object".into(),
        };
    };
    let mut fields = BTreeMap::new();
    for (k, v) in map {
        let text = match v {
            Json::Null => continue,
            Json::String(s) => s,
            Json::Bool(b) => b.to_string(),
            Json::Number(n) => n.to_string(),
            Json::Array(_) | Json::Object(_) => {
                return SourceItem::Malformed {
                    row,
                    raw,
                    message: format!("field {k:?} is not a scalar"),
                }
            }
        };
        if !text.is_empty() {
            fields.insert(k, text);
        }
    }
    SourceItem::Row(RawRow { row, fields, raw })
}

fn read_json(src: &SourceDescriptor) -> Result<SourceRows, EtlError> {
    let bytes = std::fs::read(&src.path).map_err(|e| io_error(&src.path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| EtlError::Parse {
        path: src.name(),
        message: "source is not valid UTF-8".into(),
    })?;
    let mut items = Vec::new();
    if text.trim_start().starts_with('[') {
        let values: Vec<Json> = serde_json::from_str(&text).map_err(|e| EtlError::Parse {
            path: src.name(),
            message: e.to_string(),
        })?;
        for (i, v) in values.into_iter().enumerate() {
            let raw = v.to_string();
            items.push(json_item(i + 1, v, raw));
        }
    } else {
        let lines = text.lines().filter(|l| !l.trim().is_empty());
        for (i, line) in lines.enumerate() {
            let item = match serde_json::from_str::<Json>(line) {
                Ok(v) => json_item(i + 1, v, line.to_string()),
                Err(e) => SourceItem::Malformed {
                    row: i + 1,
                    raw: line.to_string(),
                    message: e.to_string(),
                },
            };
            items.push(item);
        }
    }
    Ok(SourceRows::Json(items.into_iter()))
}
