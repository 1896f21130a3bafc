//! `quasimed analyze | simulate | benchmark`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{
    aggregate, filter_genes, filter_subjects, load_expression, read_phenotype, ClampBounds, ExpressionSource,
    FilterReport, PhenotypeColumns,
};
use crate::output::write_atomic;
use crate::pipeline::{
    run_naive, run_quasimed, write_results_tsv, AnalysisReport, BhFamily, Method, PipelineConfig,
};
use crate::regression::{Covariance, LassoConfig};
use crate::sim::{gen_dataset, run_benchmark, write_dataset, write_metrics_tsv, MetricsReport, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "quasimed", version, about = "Mediation analysis for zero-inflated single-cell expression")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mediation pipeline on an expression matrix and phenotype table.
    Analyze(AnalyzeArgs),
    /// Generate ZINB datasets with known mediators.
    Simulate(SimulateArgs),
    /// Compare methods on generated datasets and report power and FDR.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// BH-adjusted significance level.
    #[arg(long, default_value_t = 0.05)]
    pub fdr: f64,

    /// Marginal screen size (default: ceil(n / ln n)).
    #[arg(long)]
    pub k_top: Option<usize>,

    /// Cross-validation folds for the lasso penalty.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,

    /// Number of penalty values on the lasso path.
    #[arg(long, default_value_t = 100)]
    pub n_lambda: usize,

    /// Adjust M and F records together instead of per pathway.
    #[arg(long)]
    pub joint_bh: bool,

    /// Heteroskedasticity-robust (HC0) standard errors.
    #[arg(long)]
    pub robust_se: bool,

    /// Minimum subjects required to run.
    #[arg(long, default_value_t = 20)]
    pub min_subjects: usize,
}

impl PipelineArgs {
    /// `seed` drives the lasso cross-validation folds.
    pub fn config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            fdr: self.fdr,
            lasso: LassoConfig {
                n_lambda: self.n_lambda,
                folds: self.folds,
                seed,
                ..LassoConfig::default()
            },
            k_top: self.k_top,
            bh_family: if self.joint_bh {
                BhFamily::Joint
            } else {
                BhFamily::PerPathway
            },
            covariance: if self.robust_se {
                Covariance::Sandwich
            } else {
                Covariance::Classical
            },
            min_subjects: self.min_subjects,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Expression file: Matrix Market with --features and --cells-map, dense
    /// genes × cells table with --cells-map only, or long table
    /// (subject_id, cell_id, gene_id, value) otherwise.
    #[arg(long)]
    pub expr: PathBuf,

    /// Gene ids, one per matrix row.
    #[arg(long)]
    pub features: Option<PathBuf>,

    /// Tab-separated cell_id and subject_id.
    #[arg(long)]
    pub cells_map: Option<PathBuf>,

    /// Tab-separated phenotype table with a header line.
    #[arg(long)]
    pub pheno: PathBuf,

    #[arg(long, default_value = "subject_id")]
    pub subject_col: String,

    #[arg(long, default_value = "y")]
    pub outcome_col: String,

    #[arg(long, default_value = "x")]
    pub exposure_col: String,

    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covar_cols: Vec<String>,

    /// Subjects with fewer cells are removed.
    #[arg(long, default_value_t = 30)]
    pub min_cells: usize,

    /// Genes must be expressed in at least this fraction of subjects.
    #[arg(long, default_value_t = 0.05)]
    pub min_subject_frac: f64,

    /// Genes with a larger cell-level zero fraction are removed.
    #[arg(long, default_value_t = 0.90)]
    pub max_zero_frac: f64,

    /// Lower bound for the expressed proportion before the logit.
    #[arg(long, default_value_t = 0.001)]
    pub clamp_lower: f64,

    /// Upper bound for the expressed proportion before the logit.
    #[arg(long, default_value_t = 0.999)]
    pub clamp_upper: f64,

    #[arg(long, default_value = "quasimed")]
    pub method: Method,

    /// Seed for lasso cross-validation folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineArgs,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,

    #[arg(long, default_value_t = 10_000)]
    pub genes: usize,

    /// Cells per subject.
    #[arg(long, default_value_t = 40)]
    pub cells: usize,

    #[arg(long, default_value_t = 1)]
    pub replicates: usize,

    #[arg(long)]
    pub seed: u64,

    /// Set every exposure and mediator effect to zero.
    #[arg(long)]
    pub null: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    /// Comma-separated subject counts.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub n: Vec<usize>,

    /// Comma-separated gene counts.
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    pub genes: Vec<usize>,

    #[arg(long, default_value_t = 40)]
    pub cells: usize,

    #[arg(long, default_value_t = 20)]
    pub replicates: usize,

    /// Seeds both the generator and the cross-validation folds.
    #[arg(long)]
    pub seed: u64,

    #[arg(long)]
    pub null: bool,

    /// Comma-separated methods to compare.
    #[arg(long, value_delimiter = ',', default_value = "quasimed,naive")]
    pub methods: Vec<Method>,

    #[command(flatten)]
    #[serde(flatten)]
    pub pipeline: PipelineArgs,

    #[arg(long)]
    pub out: PathBuf,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn check_range(name: &str, v: f64, low: f64, high: f64) -> Result<()> {
    if !(v > low && v <= high) {
        return Err(Error::ConfigInvalid(format!("--{name} must be in ({low}, {high}], got {v}")));
    }
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport> {
    check_range("fdr", args.pipeline.fdr, 0.0, 1.0)?;
    check_range("min-subject-frac", args.min_subject_frac, 0.0, 1.0)?;
    check_range("max-zero-frac", args.max_zero_frac, 0.0, 1.0)?;
    let clamp = ClampBounds {
        lower: args.clamp_lower,
        upper: args.clamp_upper,
    };
    clamp.validate()?;

    let source = match (&args.features, &args.cells_map) {
        (Some(features), Some(cells)) => ExpressionSource::Coordinate {
            matrix: args.expr.clone(),
            features: features.clone(),
            cells: cells.clone(),
        },
        (Some(_), None) => {
            return Err(Error::ConfigInvalid("--features requires --cells-map".into()));
        }
        (None, Some(cells)) => ExpressionSource::Dense {
            table: args.expr.clone(),
            cells: cells.clone(),
        },
        (None, None) => ExpressionSource::Long {
            table: args.expr.clone(),
        },
    };
    let columns = PhenotypeColumns {
        subject: args.subject_col.clone(),
        outcome: args.outcome_col.clone(),
        exposure: args.exposure_col.clone(),
        covariates: args.covar_cols.clone(),
    };
    let pheno = read_phenotype(&args.pheno, &columns)?;
    let expr = load_expression(&source)?;
    info!(
        "loaded {} genes × {} cells ({} nonzero), {} subjects",
        expr.n_genes(),
        expr.n_cells(),
        expr.nnz(),
        pheno.n()
    );

    let mut filters = FilterReport::default();
    let (expr, pheno_kept) = filter_subjects(&expr, &pheno, args.min_cells, &mut filters)?;
    let expr = filter_genes(&expr, &pheno_kept, args.min_subject_frac, args.max_zero_frac, &mut filters)?;
    let summaries = aggregate(&expr, &pheno_kept, clamp)?;

    let config = args.pipeline.config(args.seed);
    let report = match args.method {
        Method::QuasiMed => run_quasimed(&summaries, &pheno_kept, &config)?,
        Method::Naive => run_naive(&summaries, &pheno_kept, &config)?,
    };
    if !report.dropped_terms.is_empty() {
        warn!("dropped collinear terms: {}", report.dropped_terms.join(", "));
    }

    write_atomic(&args.out.join("results.tsv"), |w| write_results_tsv(&report, w))?;
    let mut summary = report.summary();
    summary["arguments"] = serde_json::to_value(args).expect("arguments serialize");
    summary["filters"] = serde_json::to_value(&filters).expect("filter report serializes");
    summary["phenotype_rows_dropped_missing"] = json!(pheno.dropped_missing);
    summary["duplicate_entries_summed"] = json!(expr.duplicate_entries);
    write_json(&args.out.join("summary.json"), &summary)?;
    write_json(
        &args.out.join("timings.json"),
        &serde_json::to_value(&report.timings).expect("timings serialize"),
    )?;
    Ok(report)
}

fn sim_config(n: usize, genes: usize, cells: usize, replicates: usize, seed: u64, null: bool) -> SimConfig {
    let config = SimConfig {
        n,
        genes,
        cells,
        replicates,
        seed,
        ..SimConfig::default()
    };
    let mut config = if null { config.null() } else { config };
    // Small layouts keep only the default mediators that exist.
    config.true_m.retain(|&g| g < genes);
    config.true_f.retain(|&g| g < genes);
    config
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let config = sim_config(args.n, args.genes, args.cells, args.replicates, args.seed, args.null);
    config.validate()?;
    let mut dirs = Vec::new();
    for r in 0..config.replicates {
        let data = gen_dataset(&config, r).map_err(|e| Error::Replicate {
            replicate: r,
            source: Box::new(e),
        })?;
        let dir = args.out.join(format!("rep_{r}"));
        write_dataset(&config, r, &data, &dir)?;
        info!(
            "replicate {r}: {} subjects, {} expressed genes written to {}",
            data.pheno.n(),
            data.summaries.n_genes(),
            dir.display()
        );
        dirs.push(dir);
    }
    write_json(
        &args.out.join("config.json"),
        &serde_json::to_value(&config).expect("config serializes"),
    )?;
    Ok(dirs)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<Vec<MetricsReport>> {
    check_range("fdr", args.pipeline.fdr, 0.0, 1.0)?;
    if args.methods.is_empty() {
        return Err(Error::ConfigInvalid("--methods must name at least one method".into()));
    }
    let pipeline = args.pipeline.config(args.seed);
    let mut reports = Vec::new();
    for &n in &args.n {
        for &genes in &args.genes {
            let config = sim_config(n, genes, args.cells, args.replicates, args.seed, args.null);
            reports.extend(run_benchmark(&config, &args.methods, &pipeline)?);
        }
    }
    write_atomic(&args.out.join("metrics.tsv"), |w| write_metrics_tsv(&reports, w))?;
    write_json(
        &args.out.join("metrics.json"),
        &json!({
            "arguments": args,
            "reports": reports,
        }),
    )?;
    Ok(reports)
}

/// Run a parsed command line and return the process exit code: 0 on success,
/// 2 for invalid input or configuration, 1 for anything else.
pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return 1;
        }
    }
    let outcome = match &cli.command {
        Command::Analyze(args) => cmd_analyze(args).map(|report| {
            println!("{}", report.significant().count());
        }),
        Command::Simulate(args) => cmd_simulate(args).map(|dirs| {
            for d in dirs {
                println!("{}", d.display());
            }
        }),
        Command::Benchmark(args) => cmd_benchmark(args).map(|reports| {
            let mut out = std::io::stdout().lock();
            let _ = write_metrics_tsv(&reports, &mut out);
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}
