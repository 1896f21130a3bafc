mod common;

use std::collections::BTreeSet;

use quasimed::ingest::PhenotypeTable;
use quasimed::pipeline::{
    default_k_top, fit_final_models, run_naive, run_quasimed, screen, write_results_tsv, AnalysisReport, Pathway,
    PipelineConfig, ScreeningSets,
};
use quasimed::sim::{gen_dataset, SimConfig, SimDataset};
use rand::seq::SliceRandom;

fn sim(n: usize, genes: usize, seed: u64, null: bool) -> SimDataset {
    let config = SimConfig {
        n,
        genes,
        seed,
        ..SimConfig::default()
    };
    let config = if null { config.null() } else { config };
    gen_dataset(&config, 0).unwrap()
}

fn with_pheno(pheno: &PhenotypeTable, outcome: Vec<f64>, exposure: Vec<f64>) -> PhenotypeTable {
    PhenotypeTable::new(pheno.subject_ids.clone(), outcome, exposure, vec![], vec![]).unwrap()
}

fn significant(report: &AnalysisReport) -> BTreeSet<(String, Pathway)> {
    report.significant().map(|r| (r.gene.clone(), r.pathway)).collect()
}

fn tsv(report: &AnalysisReport) -> Vec<u8> {
    let mut out = Vec::new();
    write_results_tsv(report, &mut out).unwrap();
    out
}

#[test]
fn outcome_rescale_scales_effects_only() {
    let d = sim(200, 400, 11, false);
    let config = PipelineConfig::default();
    let base = run_quasimed(&d.summaries, &d.pheno, &config).unwrap();
    assert!(!base.records.is_empty());
    let c = 4.0;
    let scaled = with_pheno(&d.pheno, d.pheno.outcome.iter().map(|y| y * c).collect(), d.pheno.exposure.clone());
    let other = run_quasimed(&d.summaries, &scaled, &config).unwrap();
    assert_eq!(significant(&base), significant(&other));
    assert_eq!(base.records.len(), other.records.len());
    for (a, b) in base.records.iter().zip(&other.records) {
        assert_eq!((&a.gene, a.pathway), (&b.gene, b.pathway));
        assert!((a.p_max - b.p_max).abs() <= 1e-9 * a.p_max.max(1e-300), "{}: {} vs {}", a.gene, a.p_max, b.p_max);
        assert!((b.iie - c * a.iie).abs() <= 1e-9 * a.iie.abs().max(1e-12));
    }
    assert!((other.direct_effect.estimate - c * base.direct_effect.estimate).abs() < 1e-9);
}

#[test]
fn exposure_relabel_flips_effect_signs() {
    let d = sim(200, 400, 12, false);
    let config = PipelineConfig::default();
    let base = run_quasimed(&d.summaries, &d.pheno, &config).unwrap();
    let flipped = with_pheno(&d.pheno, d.pheno.outcome.clone(), d.pheno.exposure.iter().map(|x| 1.0 - x).collect());
    let other = run_quasimed(&d.summaries, &flipped, &config).unwrap();
    assert_eq!(significant(&base), significant(&other));
    assert_eq!(base.records.len(), other.records.len());
    for (a, b) in base.records.iter().zip(&other.records) {
        assert_eq!((&a.gene, a.pathway), (&b.gene, b.pathway));
        assert!((a.p_max - b.p_max).abs() <= 1e-8 * a.p_max.max(1e-300));
        assert!((a.iie + b.iie).abs() <= 1e-8 * a.iie.abs().max(1e-12), "{}: {} vs {}", a.gene, a.iie, b.iie);
    }
    assert!((base.direct_effect.estimate + other.direct_effect.estimate).abs() < 1e-8);
    let (a, b) = (base.screening.unwrap(), other.screening.unwrap());
    assert_eq!((a.g_y, a.g_m, a.g_f, a.s), (b.g_y, b.g_m, b.g_f, b.s));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let d = sim(150, 300, 13, false);
    let config = PipelineConfig::default();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                run_quasimed(&d.summaries, &d.pheno, &config).unwrap(),
                run_naive(&d.summaries, &d.pheno, &config).unwrap(),
            )
        })
    };
    let (q1, n1) = run(1);
    let (q4, n4) = run(4);
    assert_eq!(q1.records, q4.records);
    assert_eq!(q1.screening, q4.screening);
    assert_eq!(tsv(&q1), tsv(&q4));
    assert_eq!(n1.records, n4.records);
    assert_eq!(tsv(&n1), tsv(&n4));
}

/// One gene expressed in every cell: F is degenerate, so both methods test
/// only the M record and must fit the same two models.
#[test]
fn single_gene_naive_equals_quasimed() {
    let n = 60;
    let mut r = common::rng(4);
    let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let means: Vec<f64> = x.iter().map(|xi| (0.8 * xi + 0.2 * common::normal(&mut r)).exp() + 1.0).collect();
    let y: Vec<f64> = (0..n).map(|i| x[i] + 2.0 * means[i].ln() + 0.3 * common::normal(&mut r)).collect();
    let s = common::summaries(&["g"], vec![vec![30; n]], vec![means], 30);
    assert!(s.degenerate_f[0]);
    let pheno = common::phenotype(y, x);
    let config = PipelineConfig::default();
    let q = run_quasimed(&s, &pheno, &config).unwrap();
    let v = run_naive(&s, &pheno, &config).unwrap();
    assert_eq!(q.records.len(), 1);
    assert_eq!(v.records.len(), 1);
    let (a, b) = (&q.records[0], &v.records[0]);
    assert_eq!(a.pathway, Pathway::M);
    for (u, w) in [
        (a.beta_outcome.estimate, b.beta_outcome.estimate),
        (a.beta_outcome.std_error, b.beta_outcome.std_error),
        (a.coef_exposure.estimate, b.coef_exposure.estimate),
        (a.coef_exposure.std_error, b.coef_exposure.std_error),
        (a.iie, b.iie),
        (a.p_max, b.p_max),
        (a.q_bh, b.q_bh),
    ] {
        assert!((u - w).abs() <= 1e-10 * w.abs().max(1e-300), "{u} vs {w}");
    }
    assert_eq!(a.significant, b.significant);
}

#[test]
fn duplicated_mediator_column_is_dropped() {
    let n = 40;
    let mut r = common::rng(6);
    let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let m: Vec<f64> = (0..n).map(|_| common::normal(&mut r).exp() + 1.0).collect();
    let other: Vec<f64> = (0..n).map(|_| common::normal(&mut r).exp() + 1.0).collect();
    let s = common::summaries(
        &["a", "b", "c"],
        vec![vec![10; n], vec![10; n], vec![10; n]],
        vec![m.clone(), m, other],
        10,
    );
    let y: Vec<f64> = (0..n).map(|_| common::normal(&mut r)).collect();
    let pheno = common::phenotype(y, x);
    let all: BTreeSet<usize> = [0, 1, 2].into();
    // F is constant for every gene, so screening would never include it.
    let sets = ScreeningSets::from_screens(all.clone(), all, BTreeSet::new(), 3);
    let models = fit_final_models(&s, &pheno, &sets, &PipelineConfig::default()).unwrap();
    assert_eq!(models.dropped_terms, vec!["M:b".to_string()]);
    let terms: Vec<String> = models.mediators.iter().map(|(k, _)| k.term()).collect();
    assert_eq!(terms, vec!["M:a", "M:c"]);
    assert!(models.outcome.coefficient("M:b").is_none());
}

/// With ten thousand subjects the outcome-model mediator coefficients of the
/// true mediators sit within three standard errors of the generating values.
#[test]
fn large_sample_recovers_outcome_coefficients() {
    let config = SimConfig {
        n: 10_000,
        genes: 20,
        seed: 17,
        ..SimConfig::default()
    };
    let d = gen_dataset(&config, 0).unwrap();
    let report = run_quasimed(&d.summaries, &d.pheno, &PipelineConfig::default()).unwrap();
    let mut checked = 0;
    for (set, truth, pathway) in [
        (&config.true_m, &d.truth.beta_m, Pathway::M),
        (&config.true_f, &d.truth.beta_f, Pathway::F),
    ] {
        for &g in set {
            let id = quasimed::sim::gene_id(g);
            let rec = report
                .records
                .iter()
                .find(|r| r.gene == id && r.pathway == pathway)
                .unwrap_or_else(|| panic!("{pathway}:{id} not selected"));
            let z = (rec.beta_outcome.estimate - truth[g]) / rec.beta_outcome.std_error;
            assert!(z.abs() <= 3.0, "{pathway}:{id} estimate {} truth {} z {z}", rec.beta_outcome.estimate, truth[g]);
            checked += 1;
        }
    }
    assert_eq!(checked, 16);
}

#[test]
fn screening_sets_and_testing_invariants() {
    let d = sim(200, 400, 14, false);
    let config = PipelineConfig::default();
    let report = run_quasimed(&d.summaries, &d.pheno, &config).unwrap();
    let sets = report.screening.as_ref().unwrap();
    let want: BTreeSet<usize> = sets
        .g_y
        .iter()
        .filter(|g| sets.g_m.contains(g) || sets.g_f.contains(g))
        .copied()
        .collect();
    assert_eq!(sets.s, want);
    assert_eq!(sets.k_top, default_k_top(200));
    assert_eq!(sets.g_m.len(), sets.k_top);

    let listed: BTreeSet<(String, Pathway)> = report.records.iter().map(|r| (r.gene.clone(), r.pathway)).collect();
    let mut expected = BTreeSet::new();
    for (g, p) in sets.terms() {
        expected.insert((d.summaries.gene_ids[g].clone(), p));
    }
    let dropped: BTreeSet<(String, Pathway)> = report
        .dropped_terms
        .iter()
        .map(|t| {
            let (p, g) = t.split_once(':').unwrap();
            (g.to_string(), if p == "M" { Pathway::M } else { Pathway::F })
        })
        .collect();
    assert_eq!(listed, expected.difference(&dropped).cloned().collect());

    for pathway in [Pathway::M, Pathway::F] {
        let mut fam: Vec<_> = report.records.iter().filter(|r| r.pathway == pathway).collect();
        for r in &fam {
            assert!(r.p_max >= r.beta_outcome.p_value && r.p_max >= r.coef_exposure.p_value);
            assert_eq!(r.iie.signum(), r.beta_outcome.estimate.signum() * r.coef_exposure.estimate.signum());
            assert!(r.q_bh >= r.p_max && r.q_bh <= 1.0);
            assert_eq!(r.significant, r.q_bh <= config.fdr);
        }
        fam.sort_by(|a, b| a.p_max.total_cmp(&b.p_max));
        assert!(fam.windows(2).all(|w| w[0].q_bh <= w[1].q_bh));
    }
}

#[test]
fn null_exposure_screen_keeps_k_top_genes() {
    let d = sim(120, 200, 15, true);
    let config = PipelineConfig::default();
    let sets = screen(&d.summaries, &d.pheno, &config).unwrap();
    assert_eq!(sets.g_m.len(), default_k_top(120));
    let non_degenerate = d.summaries.degenerate_f.iter().filter(|x| !**x).count();
    assert_eq!(sets.g_f.len(), default_k_top(120).min(non_degenerate));
}

/// Two-sided Fisher exact p-value for the 2×2 table [[a, b], [c, d]].
fn fisher_exact(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let ln_fact = |k: usize| (1..=k).map(|v| (v as f64).ln()).sum::<f64>();
    let (row1, col1, total) = (a + b, a + c, a + b + c + d);
    let prob = |x: usize| {
        (ln_fact(row1) + ln_fact(total - row1) + ln_fact(col1) + ln_fact(total - col1)
            - ln_fact(x)
            - ln_fact(row1 - x)
            - ln_fact(col1 - x)
            - ln_fact(total - row1 - col1 + x)
            - ln_fact(total))
        .exp()
    };
    let observed = prob(a);
    let lo = (row1 + col1).saturating_sub(total);
    (lo..=row1.min(col1))
        .map(prob)
        .filter(|p| *p <= observed * (1.0 + 1e-9))
        .sum::<f64>()
        .min(1.0)
}

/// Permuting the exposure of a signal dataset breaks every exposure effect.
/// How often a permuted run calls anything should then match pure-null data.
#[test]
fn permuted_exposure_behaves_like_null() {
    let (n, genes, perms) = (100, 100, 50);
    let config = PipelineConfig::default();
    let signal = sim(n, genes, 16, false);
    let mut r = common::rng(16);
    let mut permuted_hits = Vec::new();
    for _ in 0..perms {
        let mut x = signal.pheno.exposure.clone();
        x.shuffle(&mut r);
        let pheno = with_pheno(&signal.pheno, signal.pheno.outcome.clone(), x);
        permuted_hits.push(run_quasimed(&signal.summaries, &pheno, &config).unwrap().significant().count());
    }
    let mut null_hits = Vec::new();
    for k in 0..perms {
        let d = sim(n, genes, 1000 + k as u64, true);
        null_hits.push(run_quasimed(&d.summaries, &d.pheno, &config).unwrap().significant().count());
    }
    let any = |h: &[usize]| h.iter().filter(|c| **c > 0).count();
    assert!(perms - any(&null_hits) >= perms * 95 / 100, "null hits {null_hits:?}");
    let (a, c) = (any(&permuted_hits), any(&null_hits));
    let p = fisher_exact(a, perms - a, c, perms - c);
    assert!(p > 0.01, "runs with calls: permuted {a}/{perms}, null {c}/{perms}, Fisher p {p}");
}

#[test]
fn fisher_exact_matches_tabulated_value() {
    // Tea-tasting table: two-sided p = 0.4857.
    assert!((fisher_exact(3, 1, 1, 3) - 0.485714).abs() < 1e-5);
    assert!((fisher_exact(5, 0, 0, 5) - 0.007937).abs() < 1e-5);
}
