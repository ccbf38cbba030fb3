//! Knowledge discovery over loaded yield data.
//!
//! Records of each crop are split into five yield groups (quintiles, group 1
//! highest). Per-group means of yield and of each factor are compared, and a
//! factor whose group-1 and group-5 means differ under a [`SignificanceRule`]
//! is reported with the group-1 mean as its optimal quantity.

mod grouping;
mod mining;
mod records;
mod significance;

use std::fmt;
use std::str::FromStr;

pub use grouping::{
    assign_groups, factor_group_means, quintile_labels, yield_group_stats, FactorGroup,
    FactorGroupStats, GroupAssignment, GroupYield, GroupYieldStats, Grouping, GROUPS,
};
pub use mining::{mine_optima, mine_records, Evidence, OptimalFinding, Verdict};
pub use records::{extract_yield_records, YieldRecord};
pub use significance::{
    evaluate_rule, is_discriminative, welch_t, Discrimination, RuleError, RuleOutcome,
    SampleStats, SignificanceRule, WelchResult,
};

/// An analysed factor. Soil values come from the joined Soil dimension,
/// sprays from FieldFact measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    SoilPh,
    SoilP,
    SoilK,
    SoilMg,
    Herbicide,
    Insecticide,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::SoilPh,
        Factor::SoilP,
        Factor::SoilK,
        Factor::SoilMg,
        Factor::Herbicide,
        Factor::Insecticide,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Factor::SoilPh => "soil_ph",
            Factor::SoilP => "soil_p",
            Factor::SoilK => "soil_k",
            Factor::SoilMg => "soil_mg",
            Factor::Herbicide => "herbicide",
            Factor::Insecticide => "insecticide",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Factor::SoilPh => "pH",
            Factor::SoilP | Factor::SoilK | Factor::SoilMg => "mg/l",
            Factor::Herbicide => "kg/ha",
            Factor::Insecticide => "g/ha",
        }
    }

    /// Decimal places an optimal value is reported with.
    pub fn decimals(self) -> u32 {
        match self {
            Factor::SoilPh | Factor::Herbicide => 1,
            _ => 0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The (table, attribute) the value is read from.
    pub fn source(self) -> (&'static str, &'static str) {
        match self {
            Factor::SoilPh => ("Soil", "PH"),
            Factor::SoilP => ("Soil", "Phosphorus"),
            Factor::SoilK => ("Soil", "Potassium"),
            Factor::SoilMg => ("Soil", "Magnesium"),
            Factor::Herbicide => ("FieldFact", "HerbicideQty"),
            Factor::Insecticide => ("FieldFact", "InsecticideQty"),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Factor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Factor::ALL
            .into_iter()
            .find(|f| f.token() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Factor::ALL.iter().map(|f| f.token()).collect();
                format!("unknown factor {s:?} (expected one of {})", known.join(", "))
            })
    }
}
