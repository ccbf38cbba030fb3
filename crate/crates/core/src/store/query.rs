//! Star-join queries over a snapshot.
//!
//! Semantics: filter each joined dimension, inner-join fact rows on their
//! foreign keys (a fact whose key for a joined dimension is absent drops out),
//! project, then group and aggregate. Aggregates skip absent values; `sum`,
//! `mean`, `min` and `max` over no values are absent, `count` is 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Snapshot, TableData, Value};
use crate::catalog::{AttributeKind, TableDef};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub attribute: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            attribute: attribute.into(),
        }
    }

    fn label(&self) -> String {
        format!("{}.{}", self.table, self.attribute)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Eq(Value),
    /// Inclusive numeric bounds; non-numeric values never match.
    Range { min: Option<f64>, max: Option<f64> },
}

impl Predicate {
    fn matches(&self, v: Option<&Value>) -> bool {
        let Some(v) = v else { return false };
        match self {
            Predicate::Eq(want) => v == want,
            Predicate::Range { min, max } => match v.as_f64() {
                Some(x) => min.is_none_or(|m| x >= m) && max.is_none_or(|m| x <= m),
                None => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub attribute: String,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JoinSpec {
    pub dimension: String,
    pub filters: Vec<Filter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Count,
    Sum,
    Mean,
    Min,
    Max,
}

impl AggFunc {
    fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Mean => "mean",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

/// `column: None` is only meaningful for `count` (counts rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub func: AggFunc,
    pub column: Option<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySpec {
    pub fact: String,
    pub joins: Vec<JoinSpec>,
    pub projections: Vec<ColumnRef>,
    pub group_by: Vec<ColumnRef>,
    pub aggregates: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("{0:?} is not a fact table")]
    NotAFact(String),
    #[error("fact {fact:?} does not reference dimension {dimension:?}")]
    NotReferenced { fact: String, dimension: String },
    #[error("dimension {0:?} joined twice")]
    DuplicateJoin(String),
    #[error("unknown attribute {table}.{attribute}")]
    UnknownAttribute { table: String, attribute: String },
    #[error("column {0} belongs to a table that is not joined")]
    NotJoined(String),
    #[error("group-by column {0} is not projected")]
    GroupByNotProjected(String),
    #[error("projected column {0} is neither grouped nor aggregated")]
    UngroupedProjection(String),
    #[error("{0} needs a column")]
    AggregateNeedsColumn(&'static str),
    #[error("cannot aggregate non-numeric column {0}")]
    NonNumericAggregate(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<Value>>>,
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Where a resolved column reads from: the fact row itself, or the row of
/// the `join`th joined dimension.
#[derive(Debug, Clone, Copy)]
enum Source {
    Fact(usize),
    Dim { join: usize, attribute: usize },
}

/// Fact foreign-key position, dimension data, filter positions.
type ResolvedJoin<'a> = (usize, &'a TableData, Vec<(usize, &'a Predicate)>);

struct Plan<'a> {
    fact: &'a TableData,
    joins: Vec<ResolvedJoin<'a>>,
    projections: Vec<Source>,
    aggregates: Vec<(AggFunc, Option<Source>)>,
}

fn attr_index(def: &TableDef, name: &str) -> Result<usize, QueryError> {
    def.attribute_index(name).ok_or_else(|| QueryError::UnknownAttribute {
        table: def.name.clone(),
        attribute: name.to_string(),
    })
}

fn plan<'a>(snap: &'a Snapshot, q: &'a QuerySpec) -> Result<Plan<'a>, QueryError> {
    let fact = snap
        .table(&q.fact)
        .ok_or_else(|| QueryError::UnknownTable(q.fact.clone()))?;
    if !fact.def().is_fact() {
        return Err(QueryError::NotAFact(q.fact.clone()));
    }
    let mut joins = Vec::with_capacity(q.joins.len());
    for (i, j) in q.joins.iter().enumerate() {
        if q.joins[..i].iter().any(|p| p.dimension == j.dimension) {
            return Err(QueryError::DuplicateJoin(j.dimension.clone()));
        }
        let fk = fact
            .def()
            .foreign_key_for(&j.dimension)
            .ok_or_else(|| QueryError::NotReferenced {
                fact: q.fact.clone(),
                dimension: j.dimension.clone(),
            })?;
        let dim = snap
            .table(&j.dimension)
            .ok_or_else(|| QueryError::UnknownTable(j.dimension.clone()))?;
        let filters = j
            .filters
            .iter()
            .map(|f| Ok((attr_index(dim.def(), &f.attribute)?, &f.predicate)))
            .collect::<Result<Vec<_>, QueryError>>()?;
        joins.push((fk, dim, filters));
    }

    let resolve = |c: &ColumnRef| -> Result<(Source, AttributeKind), QueryError> {
        if c.table == q.fact {
            let i = attr_index(fact.def(), &c.attribute)?;
            return Ok((Source::Fact(i), fact.def().attributes[i].kind));
        }
        let join = q
            .joins
            .iter()
            .position(|j| j.dimension == c.table)
            .ok_or_else(|| match snap.table(&c.table) {
                Some(_) => QueryError::NotJoined(c.label()),
                None => QueryError::UnknownTable(c.table.clone()),
            })?;
        let def = joins[join].1.def();
        let attribute = attr_index(def, &c.attribute)?;
        Ok((Source::Dim { join, attribute }, def.attributes[attribute].kind))
    };

    let projections = q
        .projections
        .iter()
        .map(|c| resolve(c).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    for g in &q.group_by {
        resolve(g)?;
        if !q.projections.contains(g) {
            return Err(QueryError::GroupByNotProjected(g.label()));
        }
    }
    let aggregating = !q.aggregates.is_empty() || !q.group_by.is_empty();
    if aggregating {
        if let Some(p) = q.projections.iter().find(|p| !q.group_by.contains(p)) {
            return Err(QueryError::UngroupedProjection(p.label()));
        }
    }
    let mut aggregates = Vec::with_capacity(q.aggregates.len());
    for a in &q.aggregates {
        let source = match (&a.column, a.func) {
            (None, AggFunc::Count) => None,
            (None, f) => return Err(QueryError::AggregateNeedsColumn(f.name())),
            (Some(c), f) => {
                let (s, kind) = resolve(c)?;
                if f != AggFunc::Count && kind != AttributeKind::Number {
                    return Err(QueryError::NonNumericAggregate(c.label()));
                }
                Some(s)
            }
        };
        aggregates.push((a.func, source));
    }
    Ok(Plan {
        fact,
        joins,
        projections,
        aggregates,
    })
}

#[derive(Debug, Clone, Default)]
struct Acc {
    count: i64,
    sum: f64,
    min: Option<f64>,
    max: Option<f64>,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.min = Some(self.min.map_or(x, |m| m.min(x)));
        self.max = Some(self.max.map_or(x, |m| m.max(x)));
    }

    fn finish(&self, f: AggFunc) -> Option<Value> {
        let nonempty = self.count > 0;
        match f {
            AggFunc::Count => Some(Value::Int(self.count)),
            AggFunc::Sum => nonempty.then_some(Value::Num(self.sum)),
            AggFunc::Mean => nonempty.then(|| Value::Num(self.sum / self.count as f64)),
            AggFunc::Min => self.min.map(Value::Num),
            AggFunc::Max => self.max.map(Value::Num),
        }
    }
}

/// Runs a star query. Aggregated results are ordered by group key;
/// plain projections keep fact-row order.
pub fn star_query(snap: &Snapshot, q: &QuerySpec) -> Result<ResultTable, QueryError> {
    let plan = plan(snap, q)?;

    // Dimension keys surviving the filters, per join, indexed by key.
    let passing: Vec<Vec<bool>> = plan
        .joins
        .iter()
        .map(|(_, dim, filters)| {
            std::iter::once(false)
                .chain(dim.rows().iter().map(|row| {
                    filters
                        .iter()
                        .all(|(i, p)| p.matches(row[*i].as_ref()))
                }))
                .collect()
        })
        .collect();

    let read = |fact_row: &[Option<Value>], keys: &[u64], s: Source| -> Option<Value> {
        match s {
            Source::Fact(i) => fact_row[i].clone(),
            Source::Dim { join, attribute } => {
                plan.joins[join].1.value(keys[join], attribute).cloned()
            }
        }
    };

    let mut columns: Vec<String> = q.projections.iter().map(ColumnRef::label).collect();
    columns.extend(q.aggregates.iter().map(|a| match &a.column {
        Some(c) => format!("{}({})", a.func.name(), c.label()),
        None => format!("{}(*)", a.func.name()),
    }));

    let aggregating = !q.aggregates.is_empty() || !q.group_by.is_empty();
    let mut rows = Vec::new();
    let mut groups: BTreeMap<Vec<Option<Value>>, Vec<Acc>> = BTreeMap::new();
    if aggregating && q.group_by.is_empty() {
        groups.insert(Vec::new(), vec![Acc::default(); plan.aggregates.len()]);
    }

    let mut keys = vec![0u64; plan.joins.len()];
    'facts: for fact_row in plan.fact.rows() {
        for (j, (fk, _, _)) in plan.joins.iter().enumerate() {
            match fact_row[*fk].as_ref().and_then(Value::as_key) {
                Some(k) if passing[j].get(k as usize).copied().unwrap_or(false) => keys[j] = k,
                _ => continue 'facts,
            }
        }
        let projected: Vec<Option<Value>> = plan
            .projections
            .iter()
            .map(|s| read(fact_row, &keys, *s))
            .collect();
        if !aggregating {
            rows.push(projected);
            continue;
        }
        let accs = groups
            .entry(projected)
            .or_insert_with(|| vec![Acc::default(); plan.aggregates.len()]);
        for ((func, source), acc) in plan.aggregates.iter().zip(accs.iter_mut()) {
            match source {
                None => acc.count += 1,
                Some(s) => match read(fact_row, &keys, *s) {
                    Some(_) if *func == AggFunc::Count => acc.count += 1,
                    Some(v) => {
                        if let Some(x) = v.as_f64() {
                            acc.push(x)
                        }
                    }
                    None => {}
                },
            }
        }
    }

    if aggregating {
        for (key, accs) in groups {
            let mut row = key;
            row.extend(
                plan.aggregates
                    .iter()
                    .zip(&accs)
                    .map(|((f, _), acc)| acc.finish(*f)),
            );
            rows.push(row);
        }
    }
    Ok(ResultTable { columns, rows })
}
