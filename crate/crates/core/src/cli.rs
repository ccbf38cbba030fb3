//! The `agridw` command line.
//!
//! Exit status is 0 on success, 1 when a load completed but rejected rows,
//! and 2 on usage or environment failures. Diagnostics go to standard error;
//! data goes to files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytics::{
    assign_groups, extract_yield_records, factor_group_means, mine_records, yield_group_stats,
    Factor, SignificanceRule,
};
use crate::catalog::{builtin_catalog, load_catalog, validate_catalog, Catalog};
use crate::etl::{
    load_mapping, run_pipeline, write_reject_ledger, PipelineSource, SourceDescriptor,
    SynonymRegistry, SynonymTable,
};
use crate::report::{
    emit_factor_series, emit_findings, emit_group_table, emit_run_metadata, Format, RunMetadata,
};
use crate::store::{open_store, Snapshot};
use crate::synth::{generate, read_plan, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTS: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "agridw", version, about = "Agricultural data warehouse and optimum miner")]
struct Cli {
    /// Print progress details to standard error.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catalog operations.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
    /// Load source files into a store.
    Ingest(IngestArgs),
    /// Analyse a loaded store.
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
    /// Generate a synthetic dataset with planted optima.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// Check a catalog for structural violations.
    Validate {
        /// Catalog JSON file; the builtin catalog when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Source file; pair each with a --mapping, in order.
    #[arg(long)]
    source: Vec<PathBuf>,
    /// Mapping JSON for the source at the same position.
    #[arg(long)]
    mapping: Vec<PathBuf>,
    /// Load plan listing source and mapping pairs, as written by `synth`.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Extra synonym table as NAME=PATH.
    #[arg(long = "synonyms")]
    synonyms: Vec<String>,
    /// Reject ledger path; defaults to rejects.csv in the store directory.
    #[arg(long)]
    rejects: Option<PathBuf>,
    /// Directory for the load report (load_report.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// csv, json or markdown.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Yield group table (groups.<ext>).
    Groups(AnalyzeArgs),
    /// Per-group means of one factor (factor_<name>.<ext>).
    Factor {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long)]
        factor: String,
    },
    /// Optimal quantities for every crop and factor (findings.<ext>).
    Mine {
        #[command(flatten)]
        common: AnalyzeArgs,
        /// gap:<threshold>[:<min count>] or welch:<alpha>[:<min count>].
        #[arg(long, default_value = "gap:0.10")]
        rule: String,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// A failure that ends the command with exit status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    let verbose = cli.verbose;
    let outcome = match cli.command {
        Command::Catalog {
            command: CatalogCommand::Validate { catalog },
        } => cmd_catalog_validate(catalog.as_deref()),
        Command::Ingest(a) => cmd_ingest(a, verbose),
        Command::Analyze { command } => cmd_analyze(command, verbose),
        Command::Synth(a) => cmd_synth(a, verbose),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure(message)) => {
            eprintln!("agridw: {message}");
            EXIT_FAILURE
        }
    }
}

fn catalog_from(path: Option<&Path>) -> Result<Catalog, Failure> {
    match path {
        Some(p) => Ok(load_catalog(p)?),
        None => Ok(builtin_catalog()),
    }
}

fn cmd_catalog_validate(path: Option<&Path>) -> Outcome {
    let catalog = catalog_from(path)?;
    let violations = validate_catalog(&catalog);
    for v in &violations {
        eprintln!("{v}");
    }
    if violations.is_empty() {
        eprintln!(
            "catalog {} is valid: {} tables",
            catalog.version,
            catalog.tables.len()
        );
        Ok(EXIT_OK)
    } else {
        eprintln!("{} violation(s)", violations.len());
        Ok(EXIT_REJECTS)
    }
}

fn cmd_ingest(a: IngestArgs, verbose: bool) -> Outcome {
    let catalog = catalog_from(a.catalog.as_deref())?;
    if a.source.len() != a.mapping.len() {
        return Err(Failure(format!(
            "{} --source but {} --mapping; give one mapping per source",
            a.source.len(),
            a.mapping.len()
        )));
    }
    let mut pairs: Vec<(PathBuf, PathBuf)> = Vec::new();
    if let Some(plan) = &a.plan {
        pairs.extend(read_plan(plan)?);
    }
    pairs.extend(a.source.into_iter().zip(a.mapping));
    if pairs.is_empty() {
        return Err(Failure("nothing to load: give --source/--mapping or --plan".into()));
    }
    let mut synonyms = SynonymRegistry::default();
    for spec in &a.synonyms {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure(format!("--synonyms {spec:?} is not NAME=PATH")))?;
        synonyms.insert(name, SynonymTable::load(Path::new(path))?);
    }
    let sources = pairs
        .iter()
        .map(|(src, map)| {
            Ok(PipelineSource {
                descriptor: SourceDescriptor::infer(src),
                mapping: load_mapping(map)?,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut store = open_store(&a.store, &catalog)?;
    let report = run_pipeline(&sources, &catalog, &mut store, &synonyms)?;
    let ledger = a.rejects.unwrap_or_else(|| a.store.join("rejects.csv"));
    write_reject_ledger(&ledger, &report.rejects)?;
    store.close()?;

    if let Some(out) = &a.out {
        let mut text = serde_json::to_string_pretty(&report.to_json(true))?;
        text.push('\n');
        let path = out.join("load_report.json");
        crate::fsutil::atomic_write(&path, text.as_bytes())
            .map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    for (table, t) in &report.tables {
        eprintln!(
            "{table}: read {} accepted {} rejected {} (dimension new {} deduplicated {})",
            t.rows_read, t.rows_accepted, t.rows_rejected, t.dims_new, t.dims_deduplicated
        );
    }
    if verbose {
        for r in &report.rejects {
            eprintln!("reject {}:{} {} {}: {}", r.source, r.row, r.binding, r.reason, r.message);
        }
    }
    eprintln!(
        "loaded {} of {} rows; {} rejected (ledger {})",
        report.rows_accepted(),
        report.rows_read(),
        report.rows_rejected(),
        ledger.display()
    );
    Ok(if report.rejects.is_empty() {
        EXIT_OK
    } else {
        EXIT_REJECTS
    })
}

fn open_snapshot(a: &AnalyzeArgs) -> Result<Snapshot, Failure> {
    let catalog = catalog_from(a.catalog.as_deref())?;
    if !a.store.join("manifest.json").is_file() {
        return Err(Failure(format!("{} is not a store", a.store.display())));
    }
    Ok(Snapshot::open(&a.store, &catalog)?)
}

fn format_of(a: &AnalyzeArgs, default: Format) -> Result<Format, Failure> {
    match &a.format {
        Some(f) => Ok(f.parse::<Format>()?),
        None => Ok(default),
    }
}

fn cmd_analyze(command: AnalyzeCommand, verbose: bool) -> Outcome {
    let (common, label) = match &command {
        AnalyzeCommand::Groups(c) => (c, "analyze groups"),
        AnalyzeCommand::Factor { common, .. } => (common, "analyze factor"),
        AnalyzeCommand::Mine { common, .. } => (common, "analyze mine"),
    };
    // Validate cheap arguments before touching the store.
    let factor = match &command {
        AnalyzeCommand::Factor { factor, .. } => Some(factor.parse::<Factor>()?),
        _ => None,
    };
    let rule = match &command {
        AnalyzeCommand::Mine { rule, .. } => Some(rule.parse::<SignificanceRule>()?),
        _ => None,
    };
    let snap = open_snapshot(common)?;
    let records = extract_yield_records(&snap);
    if records.is_empty() {
        return Err(Failure(format!(
            "{} has no FieldFact rows with a yield and crop",
            common.store.display()
        )));
    }
    let grouping = assign_groups(&records);
    for (crop, n) in &grouping.insufficient {
        eprintln!("{crop}: only {n} record(s), reported as insufficient data");
    }
    let out = &common.out;
    let path = match command {
        AnalyzeCommand::Groups(ref a) => {
            let format = format_of(a, Format::Delimited)?;
            let stats: Vec<_> = grouping
                .assignments
                .values()
                .map(|a| yield_group_stats(a, &records))
                .collect();
            let path = out.join(format!("groups.{}", format.extension()));
            emit_group_table(&stats, format, &path)?;
            path
        }
        AnalyzeCommand::Factor { ref common, .. } => {
            let factor = factor.expect("parsed above");
            let format = format_of(common, Format::Delimited)?;
            let stats: Vec<_> = grouping
                .assignments
                .values()
                .map(|a| factor_group_means(a, &records, factor))
                .collect();
            let path = out.join(format!("factor_{}.{}", factor.token(), format.extension()));
            emit_factor_series(&stats, format, &path)?;
            path
        }
        AnalyzeCommand::Mine { ref common, .. } => {
            let format = format_of(common, Format::Json)?;
            let findings = mine_records(&records, rule.as_ref().expect("parsed above"));
            let path = out.join(format!("findings.{}", format.extension()));
            emit_findings(&findings, format, &path)?;
            if verbose {
                for f in &findings {
                    eprintln!("{} {}: {:?}", f.crop, f.factor, f.verdict);
                }
            }
            path
        }
    };
    emit_run_metadata(&RunMetadata::new(&snap, rule, label), &out.join("run.json"))?;
    eprintln!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_synth(a: SynthArgs, verbose: bool) -> Outcome {
    let mut config = SynthConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let out = generate(&config, &a.out)?;
    if verbose {
        for (src, map) in &out.sources {
            eprintln!("{} <- {}", src.display(), map.display());
        }
    }
    eprintln!(
        "generated {} crop(s) x {} record(s) with seed {} in {}",
        config.crops.len(),
        config.records_per_crop,
        config.seed,
        a.out.display()
    );
    Ok(EXIT_OK)
}
