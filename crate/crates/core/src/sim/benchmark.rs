use std::io::Write;
use std::time::Instant;

use log::info;
use serde::Serialize;

use super::generate::gen_dataset;
use super::score::{score, Score};
use super::SimConfig;
use crate::error::{Error, Result};
use crate::pipeline::{run_naive, run_quasimed, Method, PipelineConfig};

pub const METRICS_HEADER: &str = "n\tG\tmethod\tpower_M\tpower_F\tfdr_M\tfdr_F\tmean_seconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub score: Score,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub method: Method,
    pub n: usize,
    pub genes: usize,
    pub power_m: f64,
    pub power_f: f64,
    pub fdr_m: f64,
    pub fdr_f: f64,
    pub mean_seconds: f64,
    pub replicates: Vec<ReplicateRecord>,
}

impl MetricsReport {
    fn from_replicates(method: Method, config: &SimConfig, replicates: Vec<ReplicateRecord>) -> Self {
        let k = replicates.len() as f64;
        let mean = |f: &dyn Fn(&ReplicateRecord) -> f64| replicates.iter().map(f).sum::<f64>() / k;
        MetricsReport {
            method,
            n: config.n,
            genes: config.genes,
            power_m: mean(&|r| r.score.m.power()),
            power_f: mean(&|r| r.score.f.power()),
            fdr_m: mean(&|r| r.score.m.fdr()),
            fdr_f: mean(&|r| r.score.f.fdr()),
            mean_seconds: mean(&|r| r.seconds),
            replicates,
        }
    }

    /// Mean number of significant records per replicate, both families.
    pub fn mean_discoveries(&self) -> f64 {
        let total: usize = self.replicates.iter().map(|r| r.score.m.r + r.score.f.r).sum();
        total as f64 / self.replicates.len() as f64
    }
}

pub fn run_method(
    method: Method,
    data: &super::SimDataset,
    pipeline: &PipelineConfig,
) -> Result<crate::pipeline::AnalysisReport> {
    match method {
        Method::QuasiMed => run_quasimed(&data.summaries, &data.pheno, pipeline),
        Method::Naive => run_naive(&data.summaries, &data.pheno, pipeline),
    }
}

/// Generate `config.replicates` datasets and score each method on every one.
///
/// Replicates run one after another with parallelism inside each method, so
/// per-method wall-clock times are comparable.
pub fn run_benchmark(config: &SimConfig, methods: &[Method], pipeline: &PipelineConfig) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    let mut records: Vec<Vec<ReplicateRecord>> = vec![Vec::new(); methods.len()];
    for replicate in 0..config.replicates {
        let wrap = |e: Error| Error::Replicate {
            replicate,
            source: Box::new(e),
        };
        let data = gen_dataset(config, replicate).map_err(wrap)?;
        for (slot, &method) in methods.iter().enumerate() {
            let start = Instant::now();
            let report = run_method(method, &data, pipeline).map_err(wrap)?;
            let seconds = start.elapsed().as_secs_f64();
            let score = score(&report, &data.truth).map_err(wrap)?;
            info!(
                "replicate {replicate} {method}: M {}/{} called {}, F {}/{} called {}, {seconds:.2}s",
                score.m.tp, score.m.t, score.m.r, score.f.tp, score.f.t, score.f.r
            );
            records[slot].push(ReplicateRecord {
                replicate,
                score,
                seconds,
            });
        }
    }
    Ok(methods
        .iter()
        .zip(records)
        .map(|(&m, r)| MetricsReport::from_replicates(m, config, r))
        .collect())
}

pub fn write_metrics_tsv<W: Write + ?Sized>(reports: &[MetricsReport], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            r.n, r.genes, r.method, r.power_m, r.power_f, r.fdr_m, r.fdr_f, r.mean_seconds
        )?;
    }
    Ok(())
}
