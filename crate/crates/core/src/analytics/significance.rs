use std::fmt;
use std::str::FromStr;

use serde_json::json;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use super::grouping::{FactorGroup, FactorGroupStats};

const EPSILON: f64 = 1e-9;

/// Decides whether a factor separates yield group 1 from group 5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignificanceRule {
    /// `|mean_1 - mean_5| / max(|mean_1|, 1e-9) >= threshold`.
    RelativeGap { threshold: f64, min_count: usize },
    /// Two-sided Welch t-test between groups 1 and 5 rejects at `alpha`.
    WelchT { alpha: f64, min_count: usize },
}

impl Default for SignificanceRule {
    fn default() -> Self {
        SignificanceRule::RelativeGap {
            threshold: 0.10,
            min_count: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid significance rule {text:?}: {reason}")]
pub struct RuleError {
    pub text: String,
    pub reason: String,
}

impl SignificanceRule {
    pub fn relative_gap(threshold: f64) -> Self {
        SignificanceRule::RelativeGap {
            threshold,
            min_count: 5,
        }
    }

    pub fn welch(alpha: f64) -> Self {
        SignificanceRule::WelchT {
            alpha,
            min_count: 5,
        }
    }

    pub fn min_count(&self) -> usize {
        match *self {
            SignificanceRule::RelativeGap { min_count, .. }
            | SignificanceRule::WelchT { min_count, .. } => min_count,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            SignificanceRule::RelativeGap {
                threshold,
                min_count,
            } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(format!("gap threshold {threshold} is not in (0, 1)"));
                }
                if min_count < 1 {
                    return Err("minimum count must be at least 1".into());
                }
            }
            SignificanceRule::WelchT { alpha, min_count } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(format!("alpha {alpha} is not in (0, 1)"));
                }
                if min_count < 2 {
                    return Err("the Welch rule needs a minimum count of at least 2".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        match *self {
            SignificanceRule::RelativeGap {
                threshold,
                min_count,
            } => json!({"kind": "relative-gap", "threshold": threshold, "min_count": min_count}),
            SignificanceRule::WelchT { alpha, min_count } => {
                json!({"kind": "welch-t", "alpha": alpha, "min_count": min_count})
            }
        }
    }
}

/// Text form `gap:<threshold>[:<min count>]` or `welch:<alpha>[:<min count>]`.
impl FromStr for SignificanceRule {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| RuleError {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(err("expected kind:param[:min_count]"));
        }
        let param: f64 = parts[1].parse().map_err(|_| err("parameter is not a number"))?;
        let min_count = match parts.get(2) {
            Some(m) => m.parse().map_err(|_| err("min_count is not an integer"))?,
            None => 5,
        };
        let rule = match parts[0] {
            "gap" | "relative-gap" => SignificanceRule::RelativeGap {
                threshold: param,
                min_count,
            },
            "welch" | "welch-t" => SignificanceRule::WelchT {
                alpha: param,
                min_count,
            },
            _ => return Err(err("kind must be gap or welch")),
        };
        rule.validate().map_err(|r| err(&r))?;
        Ok(rule)
    }
}

impl fmt::Display for SignificanceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignificanceRule::RelativeGap {
                threshold,
                min_count,
            } => write!(f, "gap:{threshold}:{min_count}"),
            SignificanceRule::WelchT { alpha, min_count } => {
                write!(f, "welch:{alpha}:{min_count}")
            }
        }
    }
}

/// Sufficient statistics of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
}

impl SampleStats {
    pub fn from_values(xs: &[f64]) -> Option<Self> {
        if xs.len() < 2 {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        Some(Self {
            count: xs.len(),
            mean,
            sd: (ss / (n - 1.0)).sqrt(),
        })
    }

    fn from_group(g: &FactorGroup) -> Option<Self> {
        Some(Self {
            count: g.count,
            mean: g.mean?,
            sd: g.sd?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `a` against `b`. `None` when either
/// sample has fewer than two values or both variances are zero.
pub fn welch_t(a: &SampleStats, b: &SampleStats) -> Option<WelchResult> {
    if a.count < 2 || b.count < 2 {
        return None;
    }
    let va = a.sd * a.sd / a.count as f64;
    let vb = b.sd * b.sd / b.count as f64;
    let se2 = va + vb;
    if se2 <= 0.0 || !se2.is_finite() {
        return None;
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.count - 1) as f64 + vb * vb / (b.count - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(WelchResult { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discrimination {
    Discriminative,
    NotDiscriminative,
    Insufficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOutcome {
    pub verdict: Discrimination,
    /// Relative gap, or Welch t.
    pub statistic: Option<f64>,
    pub welch: Option<WelchResult>,
}

/// Applies `rule` to groups 1 and 5 of `stats`.
pub fn evaluate_rule(stats: &FactorGroupStats, rule: &SignificanceRule) -> RuleOutcome {
    let (g1, g5) = (&stats.groups[0], &stats.groups[4]);
    let insufficient = RuleOutcome {
        verdict: Discrimination::Insufficient,
        statistic: None,
        welch: None,
    };
    if g1.count < rule.min_count() || g5.count < rule.min_count() {
        return insufficient;
    }
    let (Some(m1), Some(m5)) = (g1.mean, g5.mean) else {
        return insufficient;
    };
    let decide = |yes: bool| {
        if yes {
            Discrimination::Discriminative
        } else {
            Discrimination::NotDiscriminative
        }
    };
    match *rule {
        SignificanceRule::RelativeGap { threshold, .. } => {
            let gap = (m1 - m5).abs() / m1.abs().max(EPSILON);
            RuleOutcome {
                verdict: decide(gap >= threshold),
                statistic: Some(gap),
                welch: None,
            }
        }
        SignificanceRule::WelchT { alpha, .. } => {
            let (Some(a), Some(b)) = (SampleStats::from_group(g1), SampleStats::from_group(g5))
            else {
                return insufficient;
            };
            match welch_t(&a, &b) {
                Some(w) => RuleOutcome {
                    verdict: decide(w.p < alpha),
                    statistic: Some(w.t),
                    welch: Some(w),
                },
                // Both groups constant: any difference in means is exact.
                None => RuleOutcome {
                    verdict: decide(m1 != m5),
                    statistic: None,
                    welch: None,
                },
            }
        }
    }
}

pub fn is_discriminative(stats: &FactorGroupStats, rule: &SignificanceRule) -> Discrimination {
    evaluate_rule(stats, rule).verdict
}
