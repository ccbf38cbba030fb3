//! Embedded constellation-schema data warehouse for agricultural datasets,
//! with a knowledge-discovery layer that mines per-crop optimal factor
//! quantities from quintile yield groups.
//!
//! The crate is organised bottom-up:
//!
//! - [`catalog`]: schema definitions and the builtin agricultural catalog.
//! - [`etl`]: source readers, declarative mappings and the load pipeline.
//! - [`store`]: on-disk warehouse, immutable snapshots and star queries.
//! - [`analytics`]: yield grouping, factor statistics and optimum mining.
//! - [`synth`]: seeded synthetic sources with planted optima.
//! - [`report`]: group tables, factor series and findings documents.
//! - [`cli`]: the `agridw` command line.

pub mod analytics;
pub mod catalog;
pub mod cli;
pub mod digest;
pub mod etl;
mod fsutil;
pub mod number;
pub mod report;
pub mod store;
pub mod synth;

pub use analytics::{Factor, OptimalFinding, SignificanceRule, Verdict, YieldRecord};
pub use catalog::{builtin_catalog, AttributeDef, AttributeKind, Catalog, TableDef, TableRole};
pub use store::{Snapshot, Store};
