//! Fixtures and independent reference implementations shared by the
//! integration tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use agridw::analytics::{mine_records, Factor, OptimalFinding, SignificanceRule};
use agridw::catalog::{AttributeDef, AttributeKind, Catalog, TableDef, TableRole};
use agridw::etl::{run_pipeline, LoadReport, PipelineSource, SourceDescriptor, SynonymRegistry};
use agridw::store::{
    open_store, AggFunc, Aggregate, ColumnRef, Filter, JoinSpec, Predicate, QuerySpec,
    ResultTable, Row, Snapshot, Value,
};
use agridw::synth::{generate, CropPlan, FactorPlan, SynthConfig};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- published group yields

/// Mean crop yield per yield group as printed: group, crop, mean, percent
/// against group 3, in two side-by-side column blocks.
pub const PUBLISHED_GROUP_YIELDS: &str = "\
1\tBarley S.\t8.93\t+36.9\tBarley W.\t13.04\t+78.7
2\tBarley S.\t7.32\t+12.2\tBarley W.\t8.29\t+13.7
3\tBarley S.\t6.52\t0\tBarley W.\t7.30\t0
4\tBarley S.\t5.81\t-10.9\tBarley W.\t6.40\t-12.2
5\tBarley S.\t4.26\t-34.8\tBarley W.\t5.16\t-29.3
1\tBeans S.\t5.21\t+37.3\tBeans W.\t6.15\t+23.6
2\tBeans S.\t4.32\t+13.9\tBeans W.\t5.51\t+10.8
3\tBeans S.\t3.79\t0\tBeans W.\t4.97\t0
4\tBeans S.\t1.92\t-49.3\tBeans W.\t4.52\t-9.2
5\tBeans S.\t1.08\t-71.4\tBeans W.\t3.40\t-31.7
1\tGrass\t23.80\t+67.7\tLinseed S.\t2.28\t+75.5
2\tGrass\t21.73\t+53.1\tLinseed S.\t1.57\t+20.9
3\tGrass\t14.19\t0\tLinseed S.\t1.30\t0
4\tGrass\t9.01\t-36.5\tLinseed S.\t0.84\t-35.7
5\tGrass\t7.62\t-46.3\tLinseed S.\t0.43\t-67.1
1\tMaize F.\t47.00\t+16.7\tOats W.\t8.06\t+15.1
2\tMaize F.\t44.67\t+10.9\tOats W.\t7.50\t+7.1
3\tMaize F.\t40.27\t0\tOats W.\t7.00\t0
4\tMaize F.\t32.63\t-19\tOats W.\t6.93\t-1
5\tMaize F.\t21.62\t-46.3\tOats W.\t5.64\t-19.4
1\tRape W.\t4.59\t+27.7\tRye W.\t39.90\t+41.4
2\tRape W.\t4.00\t+11.4\tRye W.\t32.39\t+14.7
3\tRape W.\t3.59\t0\tRye W.\t28.23\t0
4\tRape W.\t3.15\t-12.5\tRye W.\t23.19\t-17.8
5\tRape W.\t2.36\t-34.3\tRye W.\t17.77\t-37
1\tWheat S.\t7.20\t+27.9\tWheat W.\t11.74\t+25.9
2\tWheat S.\t6.52\t+15.8\tWheat W.\t10.22\t+9.6
3\tWheat S.\t5.63\t0\tWheat W.\t9.32\t0
4\tWheat S.\t4.73\t-16\tWheat W.\t8.55\t-8.3
5\tWheat S.\t1.94\t-65.6\tWheat W.\t6.83\t-26.7
";

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedGroupYield {
    pub group: u8,
    pub crop: String,
    pub mean: f64,
    /// Printed text, kept for exact tenths comparison.
    pub pct: String,
}

pub fn published_group_yields() -> Vec<PublishedGroupYield> {
    let mut out = Vec::new();
    for line in PUBLISHED_GROUP_YIELDS.lines() {
        let p: Vec<&str> = line.split('\t').collect();
        for block in [&p[1..4], &p[4..7]] {
            out.push(PublishedGroupYield {
                group: p[0].parse().unwrap(),
                crop: block[0].to_string(),
                mean: block[1].parse().unwrap(),
                pct: block[2].to_string(),
            });
        }
    }
    out
}

/// A percentage in integer tenths ("+36.9" -> 369, "-19" -> -190).
pub fn tenths(text: &str) -> i64 {
    let d: rust_decimal::Decimal = text.trim_start_matches('+').parse().unwrap();
    (d * rust_decimal::Decimal::TEN).round().try_into().unwrap()
}

// ---------------------------------------------------------------- dimension attributes

/// Dimension tables and their attributes as printed.
pub const DIMENSION_ATTRIBUTES: &str = "\
Business\tBusinessID, Name, Address, Phone, Email
Crop\tCropID, CropName, VarietyID, VarietyName, EstYield, SeasonStart, SeasonEnd, BbchScale, ScienName, HarvestEquipment, Equ.Weight
Crop State\tCropStateID, CropID, StageScale, Height, MajorStage, MinStage, MaxStage, Diameter, AveHeight, CoveragePercent
Farmer\tFarmerID, Name, Address, Phone, Mobile, Email
Fertiliser\tFertiliserID, Name, Unit, Status, Description, GroupName
Field\tFieldID, FieldName, SiteID, Reference, Block, Area, AreaUnit, WorkingArea, WorkingAreaUnit, Latitude, Longitude, GeometricPoints, FieldImage, Notes
Inspection\tInspectionID, CropID, Description, ProblemType, Severity, AreaValue, AreaUnit, Order, Date, Notes, GrowthStage
Nutrient\tNutrientID, NutrientName, Date, Quantity
Operation Time\tOperationTimeID, StartDate, EndDate, Season
Pest\tPestID, CommonName, ScientificName, PestType, Description, Density, MinStage, MaxStage, Coverage, CoverageUnit
Plan\tPlanID, PlanName, RegisNo, ProductName, ProductRate, Date, WaterVolume
Product\tProductID, ProductName, GroupName
Spray\tSprayID, SprayProductName, ProductRate, Area, WaterVolume, ConfDuration, ConfWindSpeed, ConfDirection, ConfHumidity, ConfTemp, ActivityType
Site\tSiteID, FarmerID, SiteName, Reference, Address, GPS, CreatedBy
Soil\tSoilID, NutrientID, PH, Nitrogen, Phosphorus, Potassium, Magnesium, Calcium, CEC, Silt, Clay, Sand, SoilTexture, SoilType, OrganicMatter, TopSoil, SupSoil, TestDate, Unit
Supplier\tSupplierID, SupplierName, Address, Phone, Email
Task\tTaskID, Desc, Status, TaskDate, TaskInterval, CompDate, AppCode
TransTime\tTransTimeID, OrderDate, DeliverDate, ReceivedDate
Treatment\tTreatmentID, TreatmentName, FormType, LotCode, Rate, ApplCode, LevNo, Type, Description, ApplDesc, TreatmentComment
Weather Reading\tWeatherReadingID, WeatherStationID, ReadingDate, ReadingTime, AirTemper, Rainfall, SPLite, RelativeHumidity, WindSpeed, WindDirection, SoilTemper, LeafWetness
Weather Station\tWeatherStationID, Station Name, Latitude, Longitude, Region
Zone\tZoneID, ZoneName, FieldID, SoilID, ZoneType, Area, AreaUnit, Latitude, Longitude, GeometricPoints, YieldMap, SatellitePicture, Notes
";

/// Identifier form of a printed name: spaces and dots removed.
pub fn identifier(name: &str) -> String {
    name.chars().filter(|c| !c.is_whitespace() && *c != '.').collect()
}

pub fn dimension_attributes() -> Vec<(String, Vec<String>)> {
    DIMENSION_ATTRIBUTES
        .lines()
        .map(|l| {
            let (t, attrs) = l.split_once('\t').unwrap();
            (identifier(t), attrs.split(", ").map(identifier).collect())
        })
        .collect()
}

// ---------------------------------------------------------------- Welch

/// Two small samples and the t statistic, Welch–Satterthwaite degrees of
/// freedom and two-sided p-value from an external statistics package.
pub struct WelchFixture {
    pub a: &'static [f64],
    pub b: &'static [f64],
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub const WELCH_FIXTURES: [WelchFixture; 10] = [
    WelchFixture {
        a: &[6.1, 6.4, 5.9, 6.3, 6.0],
        b: &[5.2, 5.6, 5.1, 5.5, 5.3],
        t: 6.099942813304185,
        df: 8.0,
        p: 0.00028948921134461166,
    },
    WelchFixture {
        a: &[21.0, 25.0, 19.0, 23.0, 22.0],
        b: &[30.0, 34.0, 29.0, 41.0, 38.0],
        t: -4.956036755260075,
        df: 5.467859185979991,
        p: 0.003328458814032807,
    },
    WelchFixture {
        a: &[8.93, 9.1, 8.7, 9.4, 8.8],
        b: &[4.26, 4.9, 3.8, 4.4, 4.1],
        t: 21.367289120128014,
        df: 7.0355586149820235,
        p: 1.1673694883540622e-07,
    },
    WelchFixture {
        a: &[1.0, 2.0, 3.0, 4.0, 5.0],
        b: &[2.0, 4.0, 6.0, 8.0, 10.0],
        t: -1.8973665961010275,
        df: 5.882352941176471,
        p: 0.10753119493062718,
    },
    WelchFixture {
        a: &[736.0, 701.0, 760.0, 745.0, 690.0],
        b: &[512.0, 498.0, 530.0, 470.0, 505.0],
        t: 13.514349206946722,
        df: 7.361752474826521,
        p: 1.8361914158079415e-06,
    },
    WelchFixture {
        a: &[33.8, 35.1, 31.9, 34.4, 32.7],
        b: &[33.1, 36.0, 30.2, 35.5, 31.8],
        t: 0.2100054676691509,
        df: 6.050718808062838,
        p: 0.8405564751207126,
    },
    WelchFixture {
        a: &[7.2, 7.25, 7.18, 7.3, 7.22, 7.27],
        b: &[6.1, 6.9, 5.8, 7.4, 6.6],
        t: 2.3784780347508616,
        df: 4.033539909243876,
        p: 0.0755780194019109,
    },
    WelchFixture {
        a: &[0.5, 0.7],
        b: &[0.1, 0.2, 0.15, 0.4, 0.3, 0.25, 0.35],
        t: 3.2403703492039306,
        df: 1.3548387096774197,
        p: 0.1359027762494614,
    },
    WelchFixture {
        a: &[150.0, 162.0, 149.0, 171.0, 158.0, 160.0, 155.0],
        b: &[148.0, 140.0, 152.0, 139.0, 145.0],
        t: 3.4768689199020195,
        df: 9.981345177418216,
        p: 0.005968803636098014,
    },
    WelchFixture {
        a: &[79.0, 81.5, 77.2, 80.3, 78.8],
        b: &[110.4, 95.2, 120.9, 88.1, 101.7, 99.9, 130.3, 84.6],
        t: -4.354801022497177,
        df: 7.235611346396719,
        p: 0.003083565595066187,
    },
];

/// Textbook Welch statistic straight from the raw samples.
pub fn textbook_welch(a: &[f64], b: &[f64]) -> (f64, f64) {
    fn moments(x: &[f64]) -> (f64, f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    }
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let t = (ma - mb) / (va / na + vb / nb).sqrt();
    let df = (va / na + vb / nb).powi(2)
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    (t, df)
}

pub fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * y.abs().max(1.0)
}

// ---------------------------------------------------------------- randomness

/// Small deterministic helper over ChaCha8 for fixture generation.
pub struct Dice(ChaCha8Rng);

impl Dice {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.0.next_u64() % (hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.int(0, xs.len() as u64 - 1) as usize]
    }
}

// ---------------------------------------------------------------- star queries

pub const ORACLE_CATS: [&str; 3] = ["a", "b", "c"];

fn dim_name(i: usize) -> String {
    format!("D{}", i + 1)
}

/// A fact table `F` over `dims` dimensions `D1..`, each with a natural key
/// `Code`, a text `Cat` and a number `Val`; `F` has measures `M1`, `M2`.
pub fn oracle_catalog(dims: usize) -> Catalog {
    let mut tables = Vec::new();
    for i in 0..dims {
        let name = dim_name(i);
        tables.push(TableDef {
            name: name.clone(),
            role: TableRole::Dimension,
            attributes: vec![
                AttributeDef::new(format!("{name}Code"), AttributeKind::NaturalKeyPart, false),
                AttributeDef::new("Cat", AttributeKind::Text, true),
                AttributeDef::new("Val", AttributeKind::Number, true),
            ],
            natural_key: vec![format!("{name}Code")],
            measures: vec![],
            dimension_refs: vec![],
        });
    }
    let mut attrs = vec![AttributeDef::new("FID", AttributeKind::SurrogateKey, false)];
    for i in 0..dims {
        let name = dim_name(i);
        attrs.push(AttributeDef::foreign_key(format!("{name}Code"), name));
    }
    attrs.push(AttributeDef::new("M1", AttributeKind::Number, true));
    attrs.push(AttributeDef::new("M2", AttributeKind::Number, true));
    tables.push(TableDef {
        name: "F".into(),
        role: TableRole::Fact,
        attributes: attrs,
        natural_key: vec![],
        measures: vec!["M1".into(), "M2".into()],
        dimension_refs: (0..dims).map(dim_name).collect(),
    });
    Catalog::from_tables("oracle", tables).unwrap()
}

fn quarter(d: &mut Dice, max: u64) -> Value {
    Value::Num(d.int(0, max) as f64 / 4.0)
}

/// Builds a random snapshot in `dir`; returns it with its catalog.
pub fn random_snapshot(d: &mut Dice, dir: &Path, max_facts: u64) -> (Catalog, Snapshot) {
    let dims = d.int(1, 5) as usize;
    let catalog = oracle_catalog(dims);
    let mut store = open_store(dir, &catalog).unwrap();
    let mut sizes = Vec::new();
    for i in 0..dims {
        let n = if d.chance(0.1) { 0 } else { d.int(1, 30) };
        for k in 0..n {
            let cat = (!d.chance(0.15)).then(|| Value::from(*d.pick(&ORACLE_CATS)));
            let val = (!d.chance(0.15)).then(|| quarter(d, 40));
            let row: Row = vec![Some(Value::from(format!("c{k}").as_str())), cat, val];
            store.upsert_dimension(&dim_name(i), row).unwrap();
        }
        sizes.push(n);
    }
    let n_facts = d.int(0, max_facts);
    let mut facts = Vec::new();
    for _ in 0..n_facts {
        let mut row: Row = vec![None];
        for &n in &sizes {
            let fk = (n > 0 && !d.chance(0.1)).then(|| Value::Int(d.int(1, n) as i64));
            row.push(fk);
        }
        row.push((!d.chance(0.1)).then(|| quarter(d, 400)));
        row.push((!d.chance(0.3)).then(|| quarter(d, 40)));
        facts.push(row);
    }
    store.insert_facts("F", facts).unwrap();
    let snap = store.snapshot();
    (catalog, snap)
}

/// A random valid query over the oracle catalog.
pub fn random_query(d: &mut Dice, catalog: &Catalog) -> QuerySpec {
    let dims: Vec<String> = catalog.dimensions().map(|t| t.name.clone()).collect();
    let mut joins = Vec::new();
    for dim in &dims {
        if d.chance(0.6) {
            let mut filters = Vec::new();
            if d.chance(0.3) {
                filters.push(Filter {
                    attribute: "Cat".into(),
                    predicate: Predicate::Eq(Value::from(*d.pick(&ORACLE_CATS))),
                });
            }
            if d.chance(0.3) {
                let lo = d.int(0, 10) as f64 / 2.0;
                filters.push(Filter {
                    attribute: "Val".into(),
                    predicate: Predicate::Range {
                        min: d.chance(0.7).then_some(lo),
                        max: d.chance(0.7).then_some(lo + d.int(0, 10) as f64),
                    },
                });
            }
            joins.push(JoinSpec {
                dimension: dim.clone(),
                filters,
            });
        }
    }
    let mut columns = vec![ColumnRef::new("F", "M1"), ColumnRef::new("F", "M2")];
    for j in &joins {
        columns.push(ColumnRef::new(&j.dimension, "Cat"));
        columns.push(ColumnRef::new(&j.dimension, "Val"));
        columns.push(ColumnRef::new(&j.dimension, format!("{}Code", j.dimension)));
    }
    let mut q = QuerySpec {
        fact: "F".into(),
        joins,
        ..Default::default()
    };
    let numeric: Vec<&ColumnRef> = columns
        .iter()
        .filter(|c| c.attribute != "Cat" && !c.attribute.ends_with("Code"))
        .collect();
    if d.chance(0.3) {
        for c in &columns {
            if d.chance(0.5) {
                q.projections.push(c.clone());
            }
        }
        return q;
    }
    let groupable: Vec<&ColumnRef> = columns
        .iter()
        .filter(|c| c.attribute == "Cat" || c.table == "F" && c.attribute == "M2")
        .collect();
    for c in groupable {
        if d.chance(0.4) {
            q.projections.push(c.clone());
            q.group_by.push(c.clone());
        }
    }
    let funcs = [AggFunc::Count, AggFunc::Sum, AggFunc::Mean, AggFunc::Min, AggFunc::Max];
    for _ in 0..d.int(1, 3) {
        let func = *d.pick(&funcs);
        let column = if func == AggFunc::Count && d.chance(0.4) {
            None
        } else {
            Some((*d.pick(&numeric)).clone())
        };
        q.aggregates.push(Aggregate { func, column });
    }
    q
}

fn agg_name(f: AggFunc) -> &'static str {
    match f {
        AggFunc::Count => "count",
        AggFunc::Sum => "sum",
        AggFunc::Mean => "mean",
        AggFunc::Min => "min",
        AggFunc::Max => "max",
    }
}

/// Table name to the joined row of that table.
type Env = BTreeMap<String, Row>;

/// Nested-loop evaluation of `q`: for every fact row, scan each joined
/// dimension for the row whose position matches the foreign key.
pub fn naive_star_query(snap: &Snapshot, q: &QuerySpec) -> ResultTable {
    let fact = snap.table(&q.fact).unwrap();
    let fdef = fact.def();
    let label = |c: &ColumnRef| format!("{}.{}", c.table, c.attribute);
    let mut columns: Vec<String> = q.projections.iter().map(label).collect();
    for a in &q.aggregates {
        columns.push(match &a.column {
            Some(c) => format!("{}({})", agg_name(a.func), label(c)),
            None => format!("{}(*)", agg_name(a.func)),
        });
    }

    let mut matched: Vec<Env> = Vec::new();
    'facts: for frow in fact.rows() {
        let mut env = BTreeMap::new();
        env.insert(q.fact.clone(), frow.clone());
        for j in &q.joins {
            let dim = snap.table(&j.dimension).unwrap();
            let fk_idx = fdef
                .attributes
                .iter()
                .position(|a| a.references.as_deref() == Some(j.dimension.as_str()))
                .unwrap();
            let Some(Value::Int(fk)) = &frow[fk_idx] else {
                continue 'facts;
            };
            let mut found = None;
            for (pos, drow) in dim.rows().iter().enumerate() {
                if pos as i64 + 1 == *fk {
                    found = Some(drow.clone());
                }
            }
            let Some(drow) = found else { continue 'facts };
            for f in &j.filters {
                let v = drow[dim.def().attribute_index(&f.attribute).unwrap()].as_ref();
                let ok = match (&f.predicate, v) {
                    (_, None) => false,
                    (Predicate::Eq(want), Some(v)) => v == want,
                    (Predicate::Range { min, max }, Some(v)) => match v.as_f64() {
                        Some(x) => min.is_none_or(|m| x >= m) && max.is_none_or(|m| x <= m),
                        None => false,
                    },
                };
                if !ok {
                    continue 'facts;
                }
            }
            env.insert(j.dimension.clone(), drow);
        }
        matched.push(env);
    }
    let read = |env: &Env, c: &ColumnRef| -> Option<Value> {
        let def = snap.table(&c.table).unwrap().def();
        env[&c.table][def.attribute_index(&c.attribute).unwrap()].clone()
    };

    let aggregating = !q.aggregates.is_empty() || !q.group_by.is_empty();
    if !aggregating {
        let rows = matched
            .iter()
            .map(|env| q.projections.iter().map(|c| read(env, c)).collect())
            .collect();
        return ResultTable { columns, rows };
    }
    let mut groups: Vec<(Vec<Option<Value>>, Vec<&Env>)> = Vec::new();
    if q.group_by.is_empty() {
        groups.push((Vec::new(), Vec::new()));
    }
    for env in &matched {
        let key: Vec<Option<Value>> = q.projections.iter().map(|c| read(env, c)).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(env),
            None => groups.push((key, vec![env])),
        }
    }
    let mut rows = Vec::new();
    for (key, members) in groups {
        let mut row = key;
        for a in &q.aggregates {
            let values: Vec<Option<Value>> = members
                .iter()
                .map(|env| match &a.column {
                    Some(c) => read(env, c),
                    None => Some(Value::Int(1)),
                })
                .collect();
            let present: Vec<f64> = values.iter().flatten().filter_map(Value::as_f64).collect();
            row.push(match a.func {
                AggFunc::Count => Some(Value::Int(values.iter().flatten().count() as i64)),
                _ if present.is_empty() => None,
                AggFunc::Sum => Some(Value::Num(present.iter().sum())),
                AggFunc::Mean => Some(Value::Num(
                    present.iter().sum::<f64>() / present.len() as f64,
                )),
                AggFunc::Min => Some(Value::Num(present.iter().copied().fold(f64::INFINITY, f64::min))),
                AggFunc::Max => Some(Value::Num(
                    present.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )),
            });
        }
        rows.push(row);
    }
    ResultTable { columns, rows }
}

pub fn canonical(mut t: ResultTable) -> ResultTable {
    t.rows.sort();
    t
}

// ---------------------------------------------------------------- ETL corpus

/// Writes a small multi-source corpus in which every reject reason occurs,
/// and returns the pipeline sources in the order given on a command line.
pub fn write_etl_corpus(dir: &Path) -> Vec<PipelineSource> {
    let w = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let crops = w(
        "crops.csv",
        "crop,est_yield\nBarley S.,8.93\nGrass,23.80\nMoon Wheat,1\n,5\nWheat W.,abc\nGRASS,24\n",
    );
    let soil = w(
        "soil.csv",
        "soil_id,ph,k\r\nS1,6.5,150\r\nS2,12,100\r\nS3,7,\r\nS4,6.0,20000\r\n\"S5\",\"6,5\",10\r\n",
    );
    let fields = w(
        "fields.jsonl",
        concat!(
            "{\"id\":\"F1\",\"name\":\"North, upper\",\"gps\":\"52.1,-1.5\"}\n",
            "{\"id\":\"F2\",\"name\":\"South\",\"gps\":\"95,0\"}\n",
            "{\"id\":\"F3\",\"name\":\"East\",\"gps\":null}\n",
            "[1,2]\n",
        ),
    );
    let facts = w(
        "fieldfact.csv",
        concat!(
            "crop,field,soil,yield,herb,herb_unit\n",
            "Barley S.,F1,S1,8.93,33800,g/ha\n",
            "grass,F3,S3,23.8,2,kg/ha\n",
            "Grass,F1,S1,20,1,mg/l\n",
            " Moon Wheat ,F1,S1,5,,\n",
            "Grass,F1,S1,300,,\n",
            "Grass,F1\n",
            "rye w.,F1,S1,28.23,,\n",
            "Grass,F1,S2,19,,\n",
            "Barley S.,F2,S1,7.5,0.5,t/ha\n",
        ),
    );
    let spec = |json: &str| serde_json::from_str(json).unwrap();
    vec![
        PipelineSource {
            descriptor: SourceDescriptor::infer(&facts),
            mapping: spec(
                r#"{"target_table":"FieldFact","bindings":[
                {"source":"crop","target":"CropID","transforms":[{"op":"synonym","table":"crops"}]},
                {"source":"field","target":"FieldID"},
                {"source":"soil","target":"SoilID"},
                {"source":"yield","target":"YieldValue","transforms":[{"op":"parse-number"}]},
                {"source":"herb","target":"HerbicideQty","transforms":[
                    {"op":"parse-number"},{"op":"unit-convert","from_field":"herb_unit","to":"kg/ha"}]}]}"#,
            ),
        },
        PipelineSource {
            descriptor: SourceDescriptor::infer(&crops),
            mapping: spec(
                r#"{"target_table":"Crop","bindings":[
                {"source":"crop","target":"CropID","transforms":[{"op":"synonym","table":"crops"}]},
                {"source":"crop","target":"CropName","transforms":[{"op":"synonym","table":"crops"}]},
                {"source":"est_yield","target":"EstYield","transforms":[{"op":"parse-number"}]}]}"#,
            ),
        },
        PipelineSource {
            descriptor: SourceDescriptor::infer(&soil),
            mapping: spec(
                r#"{"target_table":"Soil","bindings":[
                {"source":"soil_id","target":"SoilID"},
                {"source":"ph","target":"PH","transforms":[{"op":"parse-number"}]},
                {"source":"k","target":"Potassium","transforms":[
                    {"op":"parse-number"},{"op":"unit-convert","from":"mg/l","to":"mg/l"}]}]}"#,
            ),
        },
        PipelineSource {
            descriptor: SourceDescriptor::infer(&fields),
            mapping: spec(
                r#"{"target_table":"Field","bindings":[
                {"source":"id","target":"FieldID"},
                {"source":"name","target":"FieldName"},
                {"source":"gps","target":"GeometricPoints"},
                {"target":"AreaUnit","transforms":[{"op":"constant","value":"ha"}]}]}"#,
            ),
        },
    ]
}

// ---------------------------------------------------------------- synth

/// Printed group-1 mean yield of each crop, used as its base yield.
pub const BASES: [(&str, f64); 12] = [
    ("Spring Barley", 8.93),
    ("Winter Barley", 13.04),
    ("Spring Dried Beans", 5.21),
    ("Winter Dried Beans", 6.15),
    ("Grass", 23.80),
    ("Spring Linseed", 2.28),
    ("Forage Maize", 47.00),
    ("Winter Oats", 8.06),
    ("Winter Rape", 4.59),
    ("Winter Rye", 39.90),
    ("Spring Wheat", 7.20),
    ("Winter Wheat", 11.74),
];

/// One active factor per crop: (factor, optimum, scale). Optima echo the
/// reported values where there are any.
pub const ACTIVE: [(Factor, f64, f64); 12] = [
    (Factor::Insecticide, 200.0, 200.0),
    (Factor::SoilK, 80.0, 80.0),
    (Factor::Insecticide, 736.0, 250.0),
    (Factor::Herbicide, 33.8, 12.0),
    (Factor::SoilPh, 6.0, 1.5),
    (Factor::SoilP, 27.0, 20.0),
    (Factor::SoilK, 237.0, 100.0),
    (Factor::SoilMg, 30.0, 30.0),
    (Factor::SoilP, 33.0, 20.0),
    (Factor::Insecticide, 79.0, 150.0),
    (Factor::SoilPh, 7.2, 1.2),
    (Factor::SoilMg, 85.0, 40.0),
];

/// Twelve crops with one planted factor each (weight 0.3) and noise sd of
/// 5% of the base yield.
pub fn recovery_config(seed: u64, records_per_crop: usize) -> SynthConfig {
    let crops = BASES
        .iter()
        .zip(ACTIVE)
        .map(|(&(name, base), (factor, optimum, scale))| CropPlan {
            name: name.to_string(),
            base_yield: base,
            noise_sd: Some(0.05 * base),
            factors: [(
                factor.token().to_string(),
                FactorPlan {
                    optimum,
                    weight: 0.3,
                    scale,
                },
            )]
            .into(),
        })
        .collect();
    SynthConfig {
        seed,
        records_per_crop,
        noise_sd: 0.0,
        missing_rate: BTreeMap::new(),
        crops,
    }
}

/// Generates `config` into `dir/src`, loads it into `dir/store`, and returns
/// the closed snapshot with the load report.
pub fn synth_and_load(config: &SynthConfig, dir: &Path) -> (Snapshot, LoadReport) {
    let out = generate(config, &dir.join("src")).unwrap();
    let catalog = agridw::builtin_catalog();
    let mut store = open_store(&dir.join("store"), &catalog).unwrap();
    let sources = out.pipeline_sources().unwrap();
    let report = run_pipeline(&sources, &catalog, &mut store, &SynonymRegistry::default()).unwrap();
    (store.close().unwrap(), report)
}

pub fn mine_in_memory(config: &SynthConfig, rule: &SignificanceRule) -> Vec<OptimalFinding> {
    let recs = agridw::synth::generate_records(config).unwrap();
    mine_records(&agridw::synth::yield_records(config, &recs), rule)
}

pub fn scratch_dir(root: &Path, name: &str) -> PathBuf {
    let p = root.join(name);
    std::fs::create_dir_all(&p).unwrap();
    p
}

/// Every analysis document the command line can produce for `snap`, keyed
/// by output file name.
pub fn analysis_outputs(snap: &Snapshot) -> BTreeMap<String, String> {
    use agridw::analytics::{assign_groups, extract_yield_records, factor_group_means, yield_group_stats};
    use agridw::report::{factor_series, findings_document, group_table, Format};

    let records = extract_yield_records(snap);
    let grouping = assign_groups(&records);
    let mut out = BTreeMap::new();
    let stats: Vec<_> = grouping
        .assignments
        .values()
        .map(|a| yield_group_stats(a, &records))
        .collect();
    for format in [Format::Delimited, Format::Json, Format::Markdown] {
        out.insert(
            format!("groups.{}", format.extension()),
            group_table(&stats, format).unwrap(),
        );
    }
    for factor in Factor::ALL {
        let stats: Vec<_> = grouping
            .assignments
            .values()
            .map(|a| factor_group_means(a, &records, factor))
            .collect();
        out.insert(
            format!("factor_{}.csv", factor.token()),
            factor_series(&stats, Format::Delimited).unwrap(),
        );
    }
    let findings = mine_records(&records, &SignificanceRule::default());
    for format in [Format::Json, Format::Markdown] {
        out.insert(
            format!("findings.{}", format.extension()),
            findings_document(&findings, format).unwrap(),
        );
    }
    out
}
