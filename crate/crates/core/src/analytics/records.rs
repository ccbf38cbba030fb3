use crate::store::{Snapshot, TableData, Value};

use super::Factor;

/// One analysable FieldFact row.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldRecord {
    /// FieldFact surrogate key.
    pub id: u64,
    pub field_id: Option<String>,
    /// Canonical crop name.
    pub crop: String,
    pub year: Option<i32>,
    pub season: Option<String>,
    /// ton/ha
    pub yield_t: f64,
    /// Indexed by [`Factor::index`].
    pub factors: [Option<f64>; 6],
}

impl YieldRecord {
    pub fn new(id: u64, crop: impl Into<String>, yield_t: f64) -> Self {
        Self {
            id,
            field_id: None,
            crop: crop.into(),
            year: None,
            season: None,
            yield_t,
            factors: [None; 6],
        }
    }

    pub fn factor(&self, f: Factor) -> Option<f64> {
        self.factors[f.index()]
    }

    pub fn with_factor(mut self, f: Factor, value: f64) -> Self {
        self.factors[f.index()] = Some(value);
        self
    }
}

/// A foreign key of the fact table and the joined dimension table.
struct Join<'a> {
    fk: usize,
    dim: &'a TableData,
}

impl<'a> Join<'a> {
    fn new(snap: &'a Snapshot, fact: &TableData, dimension: &str) -> Option<Self> {
        Some(Self {
            fk: fact.def().foreign_key_for(dimension)?,
            dim: snap.table(dimension)?,
        })
    }

    fn value(&self, fact_row: &[Option<Value>], attribute: &str) -> Option<&'a Value> {
        let key = fact_row[self.fk].as_ref()?.as_key()?;
        let idx = self.dim.def().attribute_index(attribute)?;
        self.dim.value(key, idx)
    }
}

/// One record per FieldFact row that has a yield and a resolvable crop, in
/// fact-key order. Absent joins and measures become absent fields.
pub fn extract_yield_records(snap: &Snapshot) -> Vec<YieldRecord> {
    let Some(fact) = snap.table("FieldFact") else {
        return Vec::new();
    };
    let def = fact.def();
    let Some(crop) = Join::new(snap, fact, "Crop") else {
        return Vec::new();
    };
    let soil = Join::new(snap, fact, "Soil");
    let field = Join::new(snap, fact, "Field");
    let time = Join::new(snap, fact, "OperationTime");
    let Some(yield_idx) = def.attribute_index("YieldValue") else {
        return Vec::new();
    };
    let measure = |f: Factor| def.attribute_index(f.source().1);

    let mut out = Vec::new();
    for (i, row) in fact.rows().iter().enumerate() {
        let Some(yield_t) = row[yield_idx].as_ref().and_then(Value::as_f64) else {
            continue;
        };
        let Some(crop_name) = crop.value(row, "CropName").and_then(Value::as_text) else {
            continue;
        };
        let mut rec = YieldRecord::new(i as u64 + 1, crop_name, yield_t);
        for f in Factor::ALL {
            let (table, attr) = f.source();
            rec.factors[f.index()] = if table == "Soil" {
                soil.as_ref().and_then(|j| j.value(row, attr))
            } else {
                measure(f).and_then(|m| row[m].as_ref())
            }
            .and_then(Value::as_f64);
        }
        rec.field_id = field
            .as_ref()
            .and_then(|j| j.value(row, "FieldID"))
            .map(Value::render);
        if let Some(t) = &time {
            rec.season = t.value(row, "Season").map(Value::render);
            rec.year = t
                .value(row, "StartDate")
                .and_then(Value::as_text)
                .and_then(|d| d.get(..4))
                .and_then(|y| y.parse().ok());
        }
        out.push(rec);
    }
    out
}
