use std::collections::{BTreeMap, HashMap};

use super::records::YieldRecord;
use super::Factor;

pub const GROUPS: usize = 5;

/// Group label (1-based) for each sorted position of `n` records: position
/// `i` gets the `g` with `floor((g-1)n/5) <= i < floor(gn/5)`.
pub fn quintile_labels(n: usize) -> Vec<u8> {
    let mut labels = Vec::with_capacity(n);
    for g in 1..=GROUPS {
        let lo = (g - 1) * n / GROUPS;
        let hi = g * n / GROUPS;
        labels.extend(std::iter::repeat_n(g as u8, hi - lo));
    }
    labels
}

/// Yield groups of one crop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    pub crop: String,
    /// Record ids sorted by yield descending, then id ascending.
    pub ids: Vec<u64>,
    /// Group label of `ids[i]`.
    pub labels: Vec<u8>,
}

impl GroupAssignment {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn sizes(&self) -> [usize; GROUPS] {
        let mut s = [0; GROUPS];
        for &l in &self.labels {
            s[l as usize - 1] += 1;
        }
        s
    }

    pub fn label_map(&self) -> HashMap<u64, u8> {
        self.ids.iter().copied().zip(self.labels.iter().copied()).collect()
    }
}

/// Result of [`assign_groups`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grouping {
    pub assignments: BTreeMap<String, GroupAssignment>,
    /// Crops with fewer than five records, with their record counts.
    pub insufficient: BTreeMap<String, usize>,
}

/// Splits each crop's records into five yield groups.
pub fn assign_groups(records: &[YieldRecord]) -> Grouping {
    let mut by_crop: BTreeMap<&str, Vec<&YieldRecord>> = BTreeMap::new();
    for r in records {
        by_crop.entry(&r.crop).or_default().push(r);
    }
    let mut out = Grouping::default();
    for (crop, mut recs) in by_crop {
        if recs.len() < GROUPS {
            out.insufficient.insert(crop.to_string(), recs.len());
            continue;
        }
        recs.sort_by(|a, b| b.yield_t.total_cmp(&a.yield_t).then(a.id.cmp(&b.id)));
        out.assignments.insert(
            crop.to_string(),
            GroupAssignment {
                crop: crop.to_string(),
                ids: recs.iter().map(|r| r.id).collect(),
                labels: quintile_labels(recs.len()),
            },
        );
    }
    out
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator), two-pass.
fn sample_sd(xs: &[f64], mean: f64) -> Option<f64> {
    (xs.len() >= 2).then(|| {
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (xs.len() - 1) as f64).sqrt()
    })
}

/// Values of each group, in sorted record order.
fn grouped_values(
    a: &GroupAssignment,
    records: &[YieldRecord],
    value: impl Fn(&YieldRecord) -> Option<f64>,
) -> [Vec<f64>; GROUPS] {
    let by_id: HashMap<u64, &YieldRecord> = records
        .iter()
        .filter(|r| r.crop == a.crop)
        .map(|r| (r.id, r))
        .collect();
    let mut groups: [Vec<f64>; GROUPS] = Default::default();
    for (id, &label) in a.ids.iter().zip(&a.labels) {
        if let Some(x) = by_id.get(id).and_then(|r| value(r)) {
            groups[label as usize - 1].push(x);
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupYield {
    pub count: usize,
    /// ton/ha
    pub mean: f64,
    /// `100 * (mean / mean_of_group_3 - 1)`, unrounded.
    pub pct_vs_g3: f64,
}

impl GroupYield {
    pub fn pct_rounded(&self) -> f64 {
        crate::number::round_settled(self.pct_vs_g3, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupYieldStats {
    pub crop: String,
    pub groups: [GroupYield; GROUPS],
}

/// Percent difference of `mean` from the median-group mean.
pub fn pct_vs_median(mean: f64, median_mean: f64) -> f64 {
    100.0 * (mean / median_mean - 1.0)
}

/// Mean yield per group and its percentage difference from group 3.
pub fn yield_group_stats(a: &GroupAssignment, records: &[YieldRecord]) -> GroupYieldStats {
    let values = grouped_values(a, records, |r| Some(r.yield_t));
    let means = values.each_ref().map(|v| mean(v).unwrap_or(f64::NAN));
    let m3 = means[2];
    let mut groups = [GroupYield {
        count: 0,
        mean: 0.0,
        pct_vs_g3: 0.0,
    }; GROUPS];
    for g in 0..GROUPS {
        groups[g] = GroupYield {
            count: values[g].len(),
            mean: means[g],
            pct_vs_g3: pct_vs_median(means[g], m3),
        };
    }
    GroupYieldStats {
        crop: a.crop.clone(),
        groups,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FactorGroup {
    /// Records of the group with the factor present.
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGroupStats {
    pub crop: String,
    pub factor: Factor,
    pub groups: [FactorGroup; GROUPS],
}

impl FactorGroupStats {
    pub fn means(&self) -> [Option<f64>; GROUPS] {
        self.groups.map(|g| g.mean)
    }

    pub fn counts(&self) -> [usize; GROUPS] {
        self.groups.map(|g| g.count)
    }
}

/// Per-group count, mean and sample sd of `factor`, over records where it is
/// present.
pub fn factor_group_means(
    a: &GroupAssignment,
    records: &[YieldRecord],
    factor: Factor,
) -> FactorGroupStats {
    let values = grouped_values(a, records, |r| r.factor(factor));
    let groups = values.each_ref().map(|v| {
        let m = mean(v);
        FactorGroup {
            count: v.len(),
            mean: m,
            sd: m.and_then(|m| sample_sd(v, m)),
        }
    });
    FactorGroupStats {
        crop: a.crop.clone(),
        factor,
        groups,
    }
}
