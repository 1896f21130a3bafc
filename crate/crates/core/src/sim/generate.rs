use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use super::stream::{stream, Domain};
use super::{Range, SimConfig, TruthSet};
use crate::error::{Error, Result};
use crate::ingest::{summarize_cells, GeneSummaries, PhenotypeTable};
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub summaries: GeneSummaries,
    pub pheno: PhenotypeTable,
    pub truth: TruthSet,
}

/// 1-based gene label used throughout generated data.
pub fn gene_id(g: usize) -> String {
    format!("gene{}", g + 1)
}

fn subject_id(i: usize) -> String {
    format!("subject{}", i + 1)
}

fn draw(rng: &mut impl Rng, range: Range) -> f64 {
    range.low + (range.high - range.low) * rng.random::<f64>()
}

struct GeneParams {
    dispersion: f64,
    alpha: f64,
    gamma: f64,
    beta_m: f64,
    beta_f: f64,
}

fn gene_params(config: &SimConfig, replicate: u64, g: usize) -> GeneParams {
    let mut rng = stream(config.seed, replicate, Domain::Coefficients, 0, g as u32);
    // All five are always drawn so each value has a fixed stream position.
    let dispersion = draw(&mut rng, config.dispersion_range);
    let alpha = draw(&mut rng, config.alpha_range);
    let gamma = draw(&mut rng, config.gamma_range);
    let beta_m = draw(&mut rng, config.beta_m_range);
    let beta_f = draw(&mut rng, config.beta_f_range);
    let m = config.true_m.contains(&g);
    let f = config.true_f.contains(&g);
    GeneParams {
        dispersion,
        alpha: if f { alpha } else { 0.0 },
        gamma: if m { gamma } else { 0.0 },
        beta_m: if m { beta_m } else { 0.0 },
        beta_f: if f { beta_f } else { 0.0 },
    }
}

fn exposure(config: &SimConfig, replicate: u64, i: usize) -> f64 {
    let mut rng = stream(config.seed, replicate, Domain::Exposure, i as u32, 0);
    if rng.random_bool(0.5) {
        1.0
    } else {
        0.0
    }
}

/// ZINB counts for one (subject, gene) cell block: each cell is a structural
/// zero with probability `pi`, otherwise a negative-binomial draw with mean
/// `mu` and variance `mu + mu²/dispersion` (gamma–Poisson mixture).
#[allow(clippy::too_many_arguments)]
pub fn cell_counts(
    seed: u64,
    replicate: u64,
    subject: usize,
    gene: usize,
    cells: usize,
    mu: f64,
    pi: f64,
    dispersion: f64,
) -> Vec<f64> {
    let mut rng = stream(seed, replicate, Domain::Cells, subject as u32, gene as u32);
    let gamma = Gamma::new(dispersion, mu / dispersion).expect("positive dispersion and mean");
    (0..cells)
        .map(|_| {
            let zero = rng.random::<f64>() < pi;
            let rate: f64 = gamma.sample(&mut rng);
            if zero || rate <= 0.0 {
                return 0.0;
            }
            match Poisson::new(rate) {
                Ok(p) => p.sample(&mut rng),
                Err(_) => 0.0,
            }
        })
        .collect()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn block(config: &SimConfig, replicate: u64, params: &GeneParams, x: f64, i: usize, g: usize) -> Vec<f64> {
    cell_counts(
        config.seed,
        replicate,
        i,
        g,
        config.cells,
        (params.gamma * x).exp(),
        expit(params.alpha * x),
        params.dispersion,
    )
}

/// One replicate of the simulation design. Genes never expressed in any cell
/// are removed after the outcome is formed.
pub fn gen_dataset(config: &SimConfig, replicate: usize) -> Result<SimDataset> {
    config.validate()?;
    let rep = replicate as u64;
    let x: Vec<f64> = (0..config.n).map(|i| exposure(config, rep, i)).collect();
    let params: Vec<GeneParams> = (0..config.genes).map(|g| gene_params(config, rep, g)).collect();

    let per_gene: Vec<(Vec<u32>, Vec<f64>)> = params
        .par_iter()
        .enumerate()
        .map(|(g, p)| {
            (0..config.n)
                .map(|i| summarize_cells(&mut block(config, rep, p, x[i], i, g)))
                .unzip()
        })
        .collect();

    let subject_ids: Vec<String> = (0..config.n).map(subject_id).collect();
    let gene_ids: Vec<String> = (0..config.genes).map(gene_id).collect();
    let n_cells = vec![config.cells as u32; config.n];
    let all = GeneSummaries::from_parts(gene_ids, subject_ids.clone(), n_cells, per_gene, config.clamp)?;

    let mut y: Vec<f64> = (0..config.n)
        .map(|i| {
            let mut rng = stream(config.seed, rep, Domain::Noise, i as u32, 0);
            let eps: f64 = rng.sample(StandardNormal);
            config.beta_x * x[i] + eps
        })
        .collect();
    for &g in &config.true_m {
        for (yi, v) in y.iter_mut().zip(all.log_m(g)) {
            *yi += params[g].beta_m * v;
        }
    }
    for &g in &config.true_f {
        for (yi, v) in y.iter_mut().zip(all.logit_f(g)) {
            *yi += params[g].beta_f * v;
        }
    }

    let silent = all.never_expressed();
    let keep: Vec<usize> = (0..config.genes).filter(|g| silent.binary_search(g).is_err()).collect();
    if keep.is_empty() {
        return Err(Error::NoGenesRemain);
    }
    let summaries = all.select_genes(&keep);
    let pheno = PhenotypeTable::new(subject_ids, y, x, Vec::new(), Vec::new())?;
    let truth = TruthSet {
        true_m: config.true_m.iter().map(|&g| gene_id(g)).collect(),
        true_f: config.true_f.iter().map(|&g| gene_id(g)).collect(),
        dispersion: params.iter().map(|p| p.dispersion).collect(),
        alpha: params.iter().map(|p| p.alpha).collect(),
        gamma: params.iter().map(|p| p.gamma).collect(),
        beta_m: params.iter().map(|p| p.beta_m).collect(),
        beta_f: params.iter().map(|p| p.beta_f).collect(),
        gene_ids: summaries.gene_ids.clone(),
    };
    Ok(SimDataset { summaries, pheno, truth })
}

/// Write one generated replicate as a coordinate-format count matrix
/// (`matrix.mtx`, `features.tsv`, `cells.tsv`) plus `pheno.tsv` and
/// `truth.tsv`, readable by the ingest module. Cell counts are regenerated
/// from the same streams that produced the summaries.
pub fn write_dataset(config: &SimConfig, replicate: usize, data: &SimDataset, dir: &Path) -> Result<()> {
    let rep = replicate as u64;
    let n = config.n;
    let x = &data.pheno.exposure;
    let genes: Vec<usize> = data
        .summaries
        .gene_ids
        .iter()
        .map(|id| id[4..].parse::<usize>().expect("generated gene id") - 1)
        .collect();

    let entries: Vec<Vec<(u32, u32)>> = genes
        .par_iter()
        .map(|&g| {
            let p = gene_params(config, rep, g);
            let mut out = Vec::new();
            for (i, &xi) in x.iter().enumerate() {
                for (k, v) in block(config, rep, &p, xi, i, g).into_iter().enumerate() {
                    if v > 0.0 {
                        out.push(((i * config.cells + k) as u32, v as u32));
                    }
                }
            }
            out
        })
        .collect();
    let nnz: usize = entries.iter().map(Vec::len).sum();

    write_atomic(&dir.join("matrix.mtx"), |w| {
        writeln!(w, "%%MatrixMarket matrix coordinate integer general")?;
        writeln!(w, "{} {} {}", genes.len(), n * config.cells, nnz)?;
        for (row, list) in entries.iter().enumerate() {
            for &(cell, v) in list {
                writeln!(w, "{} {} {}", row + 1, cell + 1, v)?;
            }
        }
        Ok(())
    })?;
    write_atomic(&dir.join("features.tsv"), |w| {
        for id in &data.summaries.gene_ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("cells.tsv"), |w| {
        writeln!(w, "cell_id\tsubject_id")?;
        for (i, s) in data.pheno.subject_ids.iter().enumerate() {
            for k in 0..config.cells {
                writeln!(w, "{s}_cell{}\t{s}", i * config.cells + k + 1)?;
            }
        }
        Ok(())
    })?;
    write_atomic(&dir.join("pheno.tsv"), |w| {
        writeln!(w, "subject_id\ty\tx")?;
        for ((s, y), x) in data.pheno.subject_ids.iter().zip(&data.pheno.outcome).zip(x) {
            writeln!(w, "{s}\t{y}\t{x}")?;
        }
        Ok(())
    })?;
    write_atomic(&dir.join("truth.tsv"), |w| {
        writeln!(w, "gene_id\tpathway\tbeta_outcome\tcoef_exposure")?;
        let t = &data.truth;
        for &g in &config.true_m {
            writeln!(w, "{}\tM\t{}\t{}", gene_id(g), t.beta_m[g], t.gamma[g])?;
        }
        for &g in &config.true_f {
            writeln!(w, "{}\tF\t{}\t{}", gene_id(g), t.beta_f[g], t.alpha[g])?;
        }
        Ok(())
    })
}
