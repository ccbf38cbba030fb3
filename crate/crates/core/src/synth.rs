//! Seeded synthetic source datasets with planted optima.
//!
//! Each record draws every factor uniformly within its sampling bounds and
//! gets the yield
//!
//! ```text
//! yield = base * (1 - sum_f w_f * min(1, ((x_f - opt_f) / s_f)^2)) + noise
//! ```
//!
//! with Gaussian noise, clamped to stay positive. The output is a set of CSV
//! sources with ready-made mappings and a `truth.json` describing the planted
//! optima.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; crop `i`
//! (0-based, config order) uses stream `i`. Uniforms take the top 53 bits of
//! `next_u64`; normals use the cosine branch of Box–Muller on two uniforms.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::analytics::{Factor, OptimalFinding, Verdict, YieldRecord};
use crate::digest::Digest;
use crate::etl::{MappingSpec, SourceDescriptor};
use crate::fsutil::atomic_write;
use crate::number;

pub const PRNG_ALGORITHM: &str = "chacha8";

/// Sampling interval of each factor, in the factor's unit.
pub fn factor_bounds(f: Factor) -> (f64, f64) {
    match f {
        Factor::SoilPh => (4.5, 8.5),
        Factor::SoilP => (0.0, 60.0),
        Factor::SoilK => (0.0, 300.0),
        Factor::SoilMg => (0.0, 120.0),
        Factor::Herbicide => (0.0, 50.0),
        Factor::Insecticide => (0.0, 1000.0),
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Planted effect of one factor on one crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorPlan {
    pub optimum: f64,
    pub weight: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropPlan {
    pub name: String,
    /// ton/ha
    pub base_yield: f64,
    /// Overrides the config-wide noise sd for this crop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    /// Keyed by factor token; unlisted factors have no effect.
    #[serde(default)]
    pub factors: BTreeMap<String, FactorPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub records_per_crop: usize,
    /// ton/ha
    #[serde(default)]
    pub noise_sd: f64,
    /// Probability that a factor value is left empty, keyed by factor token.
    #[serde(default)]
    pub missing_rate: BTreeMap<String, f64>,
    pub crops: Vec<CropPlan>,
}

impl SynthConfig {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let c: Self = serde_json::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.records_per_crop == 0 {
            return bad("records_per_crop must be at least 1".into());
        }
        if self.crops.is_empty() {
            return bad("no crops".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be finite and >= 0", self.noise_sd));
        }
        for (token, rate) in &self.missing_rate {
            token.parse::<Factor>().map_err(SynthError::Config)?;
            if !(0.0..1.0).contains(rate) {
                return bad(format!("missing rate {rate} for {token} is not in [0, 1)"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.crops {
            if c.name.trim().is_empty() || c.name.trim() != c.name {
                return bad(format!("crop name {:?} is empty or padded", c.name));
            }
            if !names.insert(c.name.as_str()) {
                return bad(format!("crop {:?} listed twice", c.name));
            }
            if !(c.base_yield > 0.0 && c.base_yield <= 200.0) {
                return bad(format!("{}: base_yield must be in (0, 200]", c.name));
            }
            if let Some(sd) = c.noise_sd {
                if !(sd >= 0.0 && sd.is_finite()) {
                    return bad(format!("{}: noise_sd must be finite and >= 0", c.name));
                }
            }
            for (token, p) in &c.factors {
                token.parse::<Factor>().map_err(SynthError::Config)?;
                if !(p.weight >= 0.0 && p.weight.is_finite()) {
                    return bad(format!("{}/{token}: weight must be >= 0", c.name));
                }
                if !(p.scale > 0.0 && p.scale.is_finite()) {
                    return bad(format!("{}/{token}: scale must be > 0", c.name));
                }
                if !p.optimum.is_finite() {
                    return bad(format!("{}/{token}: optimum must be finite", c.name));
                }
            }
        }
        Ok(())
    }

    fn plan(&self, crop: &CropPlan, f: Factor) -> Option<FactorPlan> {
        crop.factors.get(f.token()).copied()
    }

    fn noise(&self, crop: &CropPlan) -> f64 {
        crop.noise_sd.unwrap_or(self.noise_sd)
    }

    fn missing(&self, f: Factor) -> f64 {
        self.missing_rate.get(f.token()).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFactor {
    pub factor: String,
    pub optimum: Option<f64>,
    pub weight: f64,
    pub scale: Option<f64>,
    pub expect_discriminative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCrop {
    pub crop: String,
    pub base_yield: f64,
    pub noise_sd: f64,
    pub records: usize,
    pub factors: Vec<TruthFactor>,
}

/// The planted optima of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub crops: Vec<TruthCrop>,
}

impl GroundTruth {
    pub fn of(config: &SynthConfig) -> Self {
        let crops = config
            .crops
            .iter()
            .map(|c| TruthCrop {
                crop: c.name.clone(),
                base_yield: c.base_yield,
                noise_sd: config.noise(c),
                records: config.records_per_crop,
                factors: Factor::ALL
                    .iter()
                    .map(|&f| {
                        let p = config.plan(c, f);
                        let weight = p.map_or(0.0, |p| p.weight);
                        TruthFactor {
                            factor: f.token().to_string(),
                            optimum: p.map(|p| p.optimum),
                            weight,
                            scale: p.map(|p| p.scale),
                            expect_discriminative: weight > 0.0,
                        }
                    })
                    .collect(),
            })
            .collect();
        Self {
            seed: config.seed,
            crops,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("truth serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    /// Optimal within `value ± tolerance`.
    Optimal { value: f64, tolerance: f64 },
    NotDiscriminative,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedFinding {
    pub crop: String,
    pub factor: Factor,
    pub expected: Expected,
}

/// Tolerance on a recovered optimum: `s/4 + 3 sigma s / (w base)`.
pub fn recovery_tolerance(scale: f64, weight: f64, sigma: f64, base: f64) -> f64 {
    scale / 4.0 + 3.0 * sigma * scale / (weight * base)
}

/// What mining a generated dataset should report, sorted like mined findings.
pub fn expected_findings(truth: &GroundTruth) -> Vec<ExpectedFinding> {
    let mut out = Vec::new();
    let mut crops: Vec<&TruthCrop> = truth.crops.iter().collect();
    crops.sort_by(|a, b| a.crop.cmp(&b.crop));
    for c in crops {
        for tf in &c.factors {
            let Ok(factor) = tf.factor.parse::<Factor>() else {
                continue;
            };
            let expected = if c.records < crate::analytics::GROUPS {
                Expected::InsufficientData
            } else if tf.weight > 0.0 {
                let (opt, s) = (tf.optimum.unwrap_or(0.0), tf.scale.unwrap_or(1.0));
                Expected::Optimal {
                    value: opt,
                    tolerance: recovery_tolerance(s, tf.weight, c.noise_sd, c.base_yield),
                }
            } else {
                Expected::NotDiscriminative
            };
            out.push(ExpectedFinding {
                crop: c.crop.clone(),
                factor,
                expected,
            });
        }
    }
    out
}

impl ExpectedFinding {
    pub fn matches(&self, f: &OptimalFinding) -> bool {
        if f.crop != self.crop || f.factor != self.factor {
            return false;
        }
        match (self.expected, f.verdict) {
            (Expected::Optimal { value, tolerance }, Verdict::Optimal(v)) => {
                (v - value).abs() <= tolerance
            }
            (Expected::NotDiscriminative, Verdict::NotDiscriminative)
            | (Expected::InsufficientData, Verdict::InsufficientData) => true,
            _ => false,
        }
    }
}

/// Expectations with no matching finding, described for diagnostics.
pub fn unmet_expectations(expected: &[ExpectedFinding], found: &[OptimalFinding]) -> Vec<String> {
    expected
        .iter()
        .filter_map(|e| {
            let f = found
                .iter()
                .find(|f| f.crop == e.crop && f.factor == e.factor);
            match f {
                Some(f) if e.matches(f) => None,
                Some(f) => Some(format!(
                    "{}/{}: expected {:?}, found {:?}",
                    e.crop, e.factor, e.expected, f.verdict
                )),
                None => Some(format!("{}/{}: no finding", e.crop, e.factor)),
            }
        })
        .collect()
}

struct Stream(ChaCha8Rng);

impl Stream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn snap(x: f64) -> f64 {
    number::canonical_f64(x).expect("finite synthetic value")
}

const MIN_YIELD: f64 = 0.001;

/// One generated record, with values already on the stored decimal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub crop_index: usize,
    pub index: usize,
    pub yield_t: f64,
    pub factors: [Option<f64>; 6],
}

impl SynthRecord {
    pub fn field_id(&self) -> String {
        format!("F{:02}-{:06}", self.crop_index + 1, self.index + 1)
    }

    pub fn soil_id(&self) -> String {
        format!("S{:02}-{:06}", self.crop_index + 1, self.index + 1)
    }
}

/// Draws every record of `config`, in output order.
pub fn generate_records(config: &SynthConfig) -> Result<Vec<SynthRecord>, SynthError> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.crops.len() * config.records_per_crop);
    for (ci, crop) in config.crops.iter().enumerate() {
        let mut rng = Stream::new(config.seed, ci as u64);
        let sigma = config.noise(crop);
        for i in 0..config.records_per_crop {
            let mut factors = [None; 6];
            let mut penalty = 0.0;
            for f in Factor::ALL {
                let (lo, hi) = factor_bounds(f);
                let x = snap(lo + (hi - lo) * rng.uniform());
                let missing = rng.uniform() < config.missing(f);
                if let Some(p) = config.plan(crop, f) {
                    let d = (x - p.optimum) / p.scale;
                    penalty += p.weight * (d * d).min(1.0);
                }
                factors[f.index()] = (!missing).then_some(x);
            }
            let eps = rng.normal() * sigma;
            let y = snap((crop.base_yield * (1.0 - penalty) + eps).max(MIN_YIELD));
            out.push(SynthRecord {
                crop_index: ci,
                index: i,
                yield_t: y.max(MIN_YIELD),
                factors,
            });
        }
    }
    Ok(out)
}

/// The records as the analytics layer sees them after a load: record ids
/// are 1-based positions, matching FieldFact keys.
pub fn yield_records(config: &SynthConfig, records: &[SynthRecord]) -> Vec<YieldRecord> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| YieldRecord {
            id: i as u64 + 1,
            field_id: Some(r.field_id()),
            crop: config.crops[r.crop_index].name.clone(),
            year: None,
            season: None,
            yield_t: r.yield_t,
            factors: r.factors,
        })
        .collect()
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn opt(x: Option<f64>) -> String {
    x.map(number::render).unwrap_or_default()
}

fn mapping(json: serde_json::Value) -> MappingSpec {
    serde_json::from_value(json).expect("builtin synth mapping")
}

/// The mappings that load the generated files, in load order.
pub fn synth_mappings() -> Vec<(&'static str, MappingSpec)> {
    vec![
        (
            "crops.csv",
            mapping(json!({"target_table": "Crop", "bindings": [
                {"source": "crop", "target": "CropID", "transforms": [{"op": "synonym", "table": "crops"}]},
                {"source": "crop", "target": "CropName", "transforms": [{"op": "synonym", "table": "crops"}]},
                {"source": "est_yield_t_ha", "target": "EstYield", "transforms": [{"op": "parse-number"}]}
            ]})),
        ),
        (
            "fields.csv",
            mapping(json!({"target_table": "Field", "bindings": [
                {"source": "field_id", "target": "FieldID"},
                {"source": "field_name", "target": "FieldName"},
                {"source": "area_ha", "target": "Area", "transforms": [{"op": "parse-number"}]},
                {"target": "AreaUnit", "transforms": [{"op": "constant", "value": "ha"}]}
            ]})),
        ),
        (
            "soil.csv",
            mapping(json!({"target_table": "Soil", "bindings": [
                {"source": "soil_id", "target": "SoilID"},
                {"source": "ph", "target": "PH", "transforms": [{"op": "parse-number"}]},
                {"source": "p_mg_l", "target": "Phosphorus", "transforms": [{"op": "parse-number"}]},
                {"source": "k_mg_l", "target": "Potassium", "transforms": [{"op": "parse-number"}]},
                {"source": "mg_mg_l", "target": "Magnesium", "transforms": [{"op": "parse-number"}]}
            ]})),
        ),
        (
            "fieldfact.csv",
            mapping(json!({"target_table": "FieldFact", "bindings": [
                {"source": "crop", "target": "CropID", "transforms": [{"op": "synonym", "table": "crops"}]},
                {"source": "field_id", "target": "FieldID"},
                {"source": "soil_id", "target": "SoilID"},
                {"source": "yield_t_ha", "target": "YieldValue", "transforms": [{"op": "parse-number"}]},
                {"source": "herbicide_g_ha", "target": "HerbicideQty", "transforms": [
                    {"op": "parse-number"}, {"op": "unit-convert", "from": "g/ha", "to": "kg/ha"}]},
                {"source": "insecticide_g_ha", "target": "InsecticideQty", "transforms": [{"op": "parse-number"}]}
            ]})),
        ),
    ]
}

/// Paths and contents of a generated dataset.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dir: PathBuf,
    pub truth: GroundTruth,
    /// (source file, mapping file), in load order.
    pub sources: Vec<(PathBuf, PathBuf)>,
}

impl SynthOutput {
    pub fn pipeline_sources(&self) -> Result<Vec<crate::etl::PipelineSource>, crate::etl::EtlError> {
        self.sources
            .iter()
            .map(|(src, map)| {
                Ok(crate::etl::PipelineSource {
                    descriptor: SourceDescriptor::csv(src),
                    mapping: crate::etl::load_mapping(map)?,
                })
            })
            .collect()
    }
}

/// Name of the load plan written next to the generated sources.
pub const PLAN_FILE: &str = "manifest.json";

/// Generates the dataset into `out`: `crops.csv`, `fields.csv`, `soil.csv`,
/// `fieldfact.csv`, one `*.mapping.json` per source, `truth.json` and
/// `manifest.json`.
///
/// Crop names are written as given and pass through the crop synonym table
/// on load, so they must be canonical crop names or known variants.
pub fn generate(config: &SynthConfig, out: &Path) -> Result<SynthOutput, SynthError> {
    let records = generate_records(config)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    files.push((
        "crops.csv".into(),
        csv_bytes(
            &["crop", "est_yield_t_ha"],
            config
                .crops
                .iter()
                .map(|c| vec![c.name.clone(), number::render(snap(c.base_yield))]),
        ),
    ));
    files.push((
        "fields.csv".into(),
        csv_bytes(
            &["field_id", "field_name", "area_ha"],
            records.iter().map(|r| {
                let area = 1.0 + ((r.index * 7919) % 400) as f64 / 10.0;
                vec![r.field_id(), format!("Field {}", r.field_id()), number::render(area)]
            }),
        ),
    ));
    files.push((
        "soil.csv".into(),
        csv_bytes(
            &["soil_id", "ph", "p_mg_l", "k_mg_l", "mg_mg_l"],
            records.iter().map(|r| {
                vec![
                    r.soil_id(),
                    opt(r.factors[Factor::SoilPh.index()]),
                    opt(r.factors[Factor::SoilP.index()]),
                    opt(r.factors[Factor::SoilK.index()]),
                    opt(r.factors[Factor::SoilMg.index()]),
                ]
            }),
        ),
    ));
    files.push((
        "fieldfact.csv".into(),
        csv_bytes(
            &[
                "crop",
                "field_id",
                "soil_id",
                "yield_t_ha",
                "herbicide_g_ha",
                "insecticide_g_ha",
            ],
            records.iter().map(|r| {
                let herb_g = r.factors[Factor::Herbicide.index()].map(|kg| snap(kg * 1000.0));
                vec![
                    config.crops[r.crop_index].name.clone(),
                    r.field_id(),
                    r.soil_id(),
                    number::render(r.yield_t),
                    opt(herb_g),
                    opt(r.factors[Factor::Insecticide.index()]),
                ]
            }),
        ),
    ));

    let mut sources = Vec::new();
    let mut plan = Vec::new();
    for (src, spec) in synth_mappings() {
        let map_name = src.replace(".csv", ".mapping.json");
        files.push((map_name.clone(), spec.to_json().into_bytes()));
        sources.push((out.join(src), out.join(&map_name)));
        plan.push(json!({"source": src, "mapping": map_name}));
    }
    let truth = GroundTruth::of(config);
    files.push(("truth.json".into(), truth.to_json().into_bytes()));

    let digests: BTreeMap<&str, String> = files
        .iter()
        .map(|(n, b)| (n.as_str(), Digest::of(b).to_hex()))
        .collect();
    let manifest = json!({
        "generator": "agridw-synth",
        "prng": {
            "algorithm": PRNG_ALGORITHM,
            "seeding": "seed_from_u64(seed); crop i uses stream i",
            "uniform": "top 53 bits of next_u64 scaled to [0, 1)",
            "normal": "Box-Muller, cosine branch",
        },
        "seed": config.seed,
        "records_per_crop": config.records_per_crop,
        "sources": plan,
        "files": digests,
    });
    let mut manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest.push('\n');
    files.push((PLAN_FILE.into(), manifest.into_bytes()));

    for (name, bytes) in &files {
        let path = out.join(name);
        atomic_write(&path, bytes).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(SynthOutput {
        dir: out.to_path_buf(),
        truth,
        sources,
    })
}

/// Reads the load plan of a generated dataset: (source, mapping) path pairs
/// resolved against the plan's directory.
pub fn read_plan(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = || SynthError::Config(format!("{}: not a load plan", path.display()));
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|_| bad())?;
    let base = path.parent().unwrap_or(Path::new(""));
    v["sources"]
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|s| {
            let src = s["source"].as_str().ok_or_else(bad)?;
            let map = s["mapping"].as_str().ok_or_else(bad)?;
            Ok((base.join(src), base.join(map)))
        })
        .collect()
}
