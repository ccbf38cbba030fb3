use serde_json::json;

use super::grouping::{assign_groups, factor_group_means, GROUPS};
use super::records::{extract_yield_records, YieldRecord};
use super::significance::{evaluate_rule, Discrimination, SignificanceRule, WelchResult};
use super::Factor;
use crate::number;
use crate::store::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Group-1 mean rounded to the factor's reporting precision.
    Optimal(f64),
    NotDiscriminative,
    InsufficientData,
}

impl Verdict {
    pub fn token(&self) -> &'static str {
        match self {
            Verdict::Optimal(_) => "optimal",
            Verdict::NotDiscriminative => "not-discriminative",
            Verdict::InsufficientData => "insufficient-data",
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Verdict::Optimal(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub group_means: [Option<f64>; GROUPS],
    pub group_counts: [usize; GROUPS],
    pub rule: SignificanceRule,
    pub statistic: Option<f64>,
    pub welch: Option<WelchResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalFinding {
    pub crop: String,
    pub factor: Factor,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

impl OptimalFinding {
    pub fn to_json(&self) -> serde_json::Value {
        let mut evidence = json!({
            "group_means": self.evidence.group_means,
            "group_counts": self.evidence.group_counts,
            "rule": self.evidence.rule.to_json(),
            "statistic": self.evidence.statistic,
        });
        if let Some(w) = &self.evidence.welch {
            evidence["df"] = json!(w.df);
            evidence["p_value"] = json!(w.p);
        }
        json!({
            "crop": self.crop,
            "factor": self.factor.token(),
            "verdict": self.verdict.token(),
            "value": self.verdict.value(),
            "unit": self.factor.unit(),
            "evidence": evidence,
        })
    }
}

impl OptimalFinding {
    /// Inverse of [`OptimalFinding::to_json`].
    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        let field = |k: &str| v.get(k).ok_or_else(|| format!("finding lacks {k:?}"));
        let text = |k: &str| {
            field(k)?
                .as_str()
                .ok_or_else(|| format!("{k:?} is not a string"))
        };
        let num = |x: &serde_json::Value| -> Result<Option<f64>, String> {
            match x {
                serde_json::Value::Null => Ok(None),
                x => x.as_f64().map(Some).ok_or_else(|| format!("{x} is not a number")),
            }
        };
        let factor: Factor = text("factor")?.parse()?;
        if text("unit")? != factor.unit() {
            return Err(format!("unit {:?} does not match {factor}", text("unit")?));
        }
        let verdict = match text("verdict")? {
            "optimal" => Verdict::Optimal(num(field("value")?)?.ok_or("optimal without value")?),
            "not-discriminative" => Verdict::NotDiscriminative,
            "insufficient-data" => Verdict::InsufficientData,
            other => return Err(format!("unknown verdict {other:?}")),
        };
        let ev = field("evidence")?;
        let array = |k: &str| {
            ev.get(k)
                .and_then(|a| a.as_array())
                .filter(|a| a.len() == GROUPS)
                .ok_or_else(|| format!("evidence.{k} is not a {GROUPS}-element array"))
        };
        let mut group_means = [None; GROUPS];
        for (slot, x) in group_means.iter_mut().zip(array("group_means")?) {
            *slot = num(x)?;
        }
        let mut group_counts = [0; GROUPS];
        for (slot, x) in group_counts.iter_mut().zip(array("group_counts")?) {
            *slot = x.as_u64().ok_or("group count is not an integer")? as usize;
        }
        let rule_v = ev.get("rule").ok_or("evidence lacks rule")?;
        let min_count = rule_v["min_count"].as_u64().ok_or("rule lacks min_count")? as usize;
        let rule = match rule_v["kind"].as_str() {
            Some("relative-gap") => SignificanceRule::RelativeGap {
                threshold: rule_v["threshold"].as_f64().ok_or("rule lacks threshold")?,
                min_count,
            },
            Some("welch-t") => SignificanceRule::WelchT {
                alpha: rule_v["alpha"].as_f64().ok_or("rule lacks alpha")?,
                min_count,
            },
            _ => return Err("unknown rule kind".into()),
        };
        let statistic = num(ev.get("statistic").unwrap_or(&serde_json::Value::Null))?;
        let welch = match (ev.get("df"), ev.get("p_value")) {
            (Some(df), Some(p)) => Some(WelchResult {
                t: statistic.ok_or("welch evidence without statistic")?,
                df: num(df)?.ok_or("df is null")?,
                p: num(p)?.ok_or("p_value is null")?,
            }),
            _ => None,
        };
        Ok(OptimalFinding {
            crop: text("crop")?.to_string(),
            factor,
            verdict,
            evidence: Evidence {
                group_means,
                group_counts,
                rule,
                statistic,
                welch,
            },
        })
    }
}

/// One finding per (crop, factor), sorted by crop name then factor.
pub fn mine_records(records: &[YieldRecord], rule: &SignificanceRule) -> Vec<OptimalFinding> {
    let grouping = assign_groups(records);
    let mut out = Vec::new();
    let mut crops: Vec<&str> = grouping
        .assignments
        .keys()
        .chain(grouping.insufficient.keys())
        .map(String::as_str)
        .collect();
    crops.sort_unstable();
    for crop in crops {
        let Some(a) = grouping.assignments.get(crop) else {
            for factor in Factor::ALL {
                out.push(OptimalFinding {
                    crop: crop.to_string(),
                    factor,
                    verdict: Verdict::InsufficientData,
                    evidence: Evidence {
                        group_means: [None; GROUPS],
                        group_counts: [0; GROUPS],
                        rule: *rule,
                        statistic: None,
                        welch: None,
                    },
                });
            }
            continue;
        };
        for factor in Factor::ALL {
            let stats = factor_group_means(a, records, factor);
            let outcome = evaluate_rule(&stats, rule);
            let verdict = match (outcome.verdict, stats.groups[0].mean) {
                (Discrimination::Discriminative, Some(m1)) => {
                    Verdict::Optimal(number::round_settled(m1, factor.decimals()))
                }
                (Discrimination::NotDiscriminative, _) => Verdict::NotDiscriminative,
                _ => Verdict::InsufficientData,
            };
            out.push(OptimalFinding {
                crop: crop.to_string(),
                factor,
                verdict,
                evidence: Evidence {
                    group_means: stats.means(),
                    group_counts: stats.counts(),
                    rule: *rule,
                    statistic: outcome.statistic,
                    welch: outcome.welch,
                },
            });
        }
    }
    out
}

pub fn mine_optima(snap: &Snapshot, rule: &SignificanceRule) -> Vec<OptimalFinding> {
    mine_records(&extract_yield_records(snap), rule)
}
