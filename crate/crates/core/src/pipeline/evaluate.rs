//! Evaluation of a generated set: per-molecule table, Lipinski filter,
//! aggregates, set metrics, top-k and histogram plot data.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chem::{canonical_smiles, perceive_bonds, Molecule3D};
use crate::critic::{Critic, PocketGraph};
use crate::descriptors::{drug_likeness, set_metrics_from_canonical, SetMetrics};

pub const EVAL_METRICS: [&str; 5] = ["C_BP", "QED", "logS", "SA", "logP"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRow {
    pub id: String,
    pub smiles: Option<String>,
    pub valid: bool,
    pub lipinski_pass: bool,
    #[serde(rename = "C_BP")]
    pub c_bp: Option<f64>,
    #[serde(rename = "QED")]
    pub qed: Option<f64>,
    #[serde(rename = "logS")]
    pub esol: Option<f64>,
    #[serde(rename = "SA")]
    pub sa: Option<f64>,
    #[serde(rename = "logP")]
    pub logp: Option<f64>,
    pub heavy_atoms: usize,
}

impl MoleculeRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "C_BP" => self.c_bp,
            "QED" => self.qed,
            "logS" => self.esol,
            "SA" => self.sa,
            "logP" => self.logp,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `all` or `filtered`.
    pub set: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopRow {
    pub rank: usize,
    pub id: String,
    pub smiles: String,
    #[serde(rename = "C_BP")]
    pub c_bp: f64,
    #[serde(rename = "QED")]
    pub qed: f64,
    #[serde(rename = "logS")]
    pub esol: f64,
    #[serde(rename = "SA")]
    pub sa: f64,
    #[serde(rename = "logP")]
    pub logp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub metric: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub baseline_mean: f64,
    pub optimized_mean: f64,
    pub difference: f64,
    /// optimized / baseline; NaN when the baseline mean is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<MoleculeRow>,
    /// Aggregates over all rows, then over the rows that pass the filter.
    pub summary: Vec<SummaryRow>,
    pub set_metrics: SetMetrics,
    /// Drawn from the filtered rows when the filter is on, else from all.
    pub top_k: Vec<TopRow>,
    pub histograms: Vec<HistRow>,
    pub lipinski: bool,
}

impl EvaluationReport {
    pub fn filtered(&self) -> impl Iterator<Item = &MoleculeRow> {
        self.rows.iter().filter(|r| r.lipinski_pass)
    }

    /// Mean over the set that feeds top-k and the histograms.
    pub fn mean(&self, metric: &str) -> Option<f64> {
        let set = if self.lipinski { "filtered" } else { "all" };
        self.summary
            .iter()
            .find(|s| s.set == set && s.metric == metric)
            .map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub top_k: usize,
    pub bins: usize,
    /// Apply the modified Lipinski filter before ranking and plotting.
    pub lipinski: bool,
}

/// Population mean and standard deviation; NaN for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Normalized histogram over [lo, hi]: densities integrate to one.
/// Values outside the range are clamped into the edge bins.
pub fn histogram(metric: &str, xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistRow> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = (((x - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = xs.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| HistRow {
            metric: metric.to_string(),
            bin_lo: lo + i as f64 * w,
            bin_hi: lo + (i + 1) as f64 * w,
            density: c as f64 / (n * w),
        })
        .collect()
}

/// Fixed plotting ranges for bounded metrics; data range otherwise.
pub fn metric_range(metric: &str, xs: &[f64]) -> (f64, f64) {
    match metric {
        "C_BP" | "QED" => (0.0, 1.0),
        "SA" => (1.0, 10.0),
        _ => {
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo.floor(), hi.ceil())
            } else {
                (0.0, 1.0)
            }
        }
    }
}

/// Scores one molecule. Invalid molecules keep only C_BP.
pub fn molecule_row(id: &str, mol: &Molecule3D, critic: &dyn Critic, pocket: &PocketGraph) -> MoleculeRow {
    let c_bp = match critic.score(pocket, mol) {
        Ok(s) => Some(s.c_bp),
        Err(e) => {
            log::warn!("{id}: critic failed: {e}");
            None
        }
    };
    let p = perceive_bonds(mol);
    let smiles = if p.valid { canonical_smiles(&p.molecule) } else { None };
    let mut row = MoleculeRow {
        id: id.to_string(),
        valid: smiles.is_some(),
        smiles,
        lipinski_pass: false,
        c_bp,
        qed: None,
        esol: None,
        sa: None,
        logp: None,
        heavy_atoms: mol.heavy_atom_count(),
    };
    if row.valid {
        let d = drug_likeness(&p.molecule);
        row.lipinski_pass = d.lipinski.passed();
        row.qed = Some(d.qed);
        row.esol = Some(d.esol);
        row.sa = Some(d.sa);
        row.logp = Some(d.logp);
    }
    row
}

pub fn summarize(set: &str, rows: &[&MoleculeRow]) -> Vec<SummaryRow> {
    EVAL_METRICS
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = rows.iter().filter_map(|r| r.metric(m)).collect();
            let (mean, std) = mean_std(&xs);
            SummaryRow {
                set: set.to_string(),
                metric: m.to_string(),
                n: xs.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Distinct valid molecules ranked by C_BP, then QED (both descending),
/// then SMILES.
pub fn top_k(rows: &[&MoleculeRow], k: usize) -> Vec<TopRow> {
    let mut cand: Vec<&MoleculeRow> = rows.iter().copied().filter(|r| r.c_bp.is_some() && r.smiles.is_some()).collect();
    cand.sort_by(|a, b| {
        b.c_bp
            .unwrap()
            .total_cmp(&a.c_bp.unwrap())
            .then(b.qed.unwrap_or(0.0).total_cmp(&a.qed.unwrap_or(0.0)))
            .then(a.smiles.cmp(&b.smiles))
    });
    let mut seen = BTreeSet::new();
    cand.into_iter()
        .filter(|r| seen.insert(r.smiles.clone()))
        .take(k)
        .enumerate()
        .map(|(i, r)| TopRow {
            rank: i + 1,
            id: r.id.clone(),
            smiles: r.smiles.clone().unwrap_or_default(),
            c_bp: r.c_bp.unwrap_or(f64::NAN),
            qed: r.qed.unwrap_or(f64::NAN),
            esol: r.esol.unwrap_or(f64::NAN),
            sa: r.sa.unwrap_or(f64::NAN),
            logp: r.logp.unwrap_or(f64::NAN),
        })
        .collect()
}

pub fn evaluate(
    mols: &[(String, Molecule3D)],
    training: &BTreeSet<String>,
    critic: &dyn Critic,
    pocket: &PocketGraph,
    opts: &EvaluateOptions,
) -> EvaluationReport {
    let rows: Vec<MoleculeRow> = mols.iter().map(|(id, m)| molecule_row(id, m, critic, pocket)).collect();
    let smiles: Vec<Option<String>> = rows.iter().map(|r| r.smiles.clone()).collect();
    let all: Vec<&MoleculeRow> = rows.iter().collect();
    let filtered: Vec<&MoleculeRow> = rows.iter().filter(|r| r.lipinski_pass).collect();
    let chosen = if opts.lipinski { &filtered } else { &all };
    let histograms = EVAL_METRICS
        .iter()
        .flat_map(|&m| {
            let xs: Vec<f64> = chosen.iter().filter_map(|r| r.metric(m)).collect();
            let (lo, hi) = metric_range(m, &xs);
            histogram(m, &xs, lo, hi, opts.bins)
        })
        .collect();
    let mut summary = summarize("all", &all);
    summary.extend(summarize("filtered", &filtered));
    EvaluationReport {
        summary,
        set_metrics: set_metrics_from_canonical(&smiles, training),
        top_k: top_k(chosen, opts.top_k),
        histograms,
        lipinski: opts.lipinski,
        rows,
    }
}

/// Mean difference and ratio for each metric present in both reports.
pub fn compare(baseline: &EvaluationReport, optimized: &EvaluationReport) -> Vec<ComparisonRow> {
    EVAL_METRICS
        .iter()
        .filter_map(|&m| {
            let (b, o) = (baseline.mean(m)?, optimized.mean(m)?);
            Some(ComparisonRow {
                metric: m.to_string(),
                baseline_mean: b,
                optimized_mean: o,
                difference: o - b,
                ratio: if b == 0.0 { f64::NAN } else { o / b },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::{synth_pocket, SyntheticCritic, SyntheticMode};
    use crate::pipeline::synth::{synth_corpus, SynthOptions};
    use rand::SeedableRng;

    fn report(n: usize, k: usize) -> EvaluationReport {
        let mols: Vec<(String, Molecule3D)> = synth_corpus(5, n, &SynthOptions::default())
            .into_iter()
            .enumerate()
            .map(|(i, m)| (format!("m{i}"), m))
            .collect();
        let pocket = synth_pocket(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0), 2, 8.0);
        let critic = SyntheticCritic::new(SyntheticMode::Full);
        let opts = EvaluateOptions {
            top_k: k,
            bins: 10,
            lipinski: false,
        };
        evaluate(&mols, &BTreeSet::new(), &critic, &pocket, &opts)
    }

    #[test]
    fn aggregates_match_table() {
        let r = report(20, 3);
        assert_eq!(r.set_metrics.n_generated, 20);
        assert_eq!(r.set_metrics.validity, 1.0);
        assert_eq!(r.summary.len(), 2 * EVAL_METRICS.len());
        for s in &r.summary {
            let xs: Vec<f64> = r
                .rows
                .iter()
                .filter(|row| s.set == "all" || row.lipinski_pass)
                .filter_map(|row| row.metric(&s.metric))
                .collect();
            let (m, sd) = mean_std(&xs);
            assert_eq!(s.n, xs.len());
            // An empty Lipinski subset reports NaN for both.
            assert!(s.mean.to_bits() == m.to_bits() && s.std.to_bits() == sd.to_bits(), "{s:?}");
        }
        for m in EVAL_METRICS {
            let h: Vec<&HistRow> = r.histograms.iter().filter(|h| h.metric == m).collect();
            let area: f64 = h.iter().map(|h| h.density * (h.bin_hi - h.bin_lo)).sum();
            assert!((area - 1.0).abs() < 1e-9, "{m}: {area}");
        }
    }

    #[test]
    fn top_k_contract() {
        let r = report(20, 3);
        assert_eq!(r.top_k.len(), 3);
        for w in r.top_k.windows(2) {
            assert!(w[0].c_bp > w[1].c_bp || (w[0].c_bp == w[1].c_bp && w[0].qed >= w[1].qed));
        }
        let best = r.rows.iter().filter_map(|m| m.c_bp).fold(0.0, f64::max);
        assert_eq!(r.top_k[0].c_bp, best);
    }

    #[test]
    fn tie_breaks() {
        let row = |id: &str, smi: &str, c: f64, q: f64| MoleculeRow {
            id: id.into(),
            smiles: Some(smi.into()),
            valid: true,
            lipinski_pass: true,
            c_bp: Some(c),
            qed: Some(q),
            esol: Some(0.0),
            sa: Some(1.0),
            logp: Some(0.0),
            heavy_atoms: 1,
        };
        let rows = [row("a", "CC", 0.5, 0.2), row("b", "CN", 0.5, 0.4), row("c", "CO", 0.5, 0.4), row("d", "CO", 0.5, 0.4)];
        let refs: Vec<&MoleculeRow> = rows.iter().collect();
        let t = top_k(&refs, 5);
        let ids: Vec<&str> = t.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn histogram_edges() {
        let h = histogram("x", &[0.0, 0.5, 1.0, 2.0], 0.0, 1.0, 2);
        assert_eq!(h.len(), 2);
        assert_eq!((h[0].density, h[1].density), (0.5, 1.5));
        let flat = histogram("x", &[3.0, 3.0], 3.0, 3.0, 4);
        assert!((flat.iter().map(|r| r.density * (r.bin_hi - r.bin_lo)).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison() {
        let a = report(10, 1);
        let c = compare(&a, &a);
        assert_eq!(c.len(), EVAL_METRICS.len());
        assert!(c.iter().all(|r| r.difference == 0.0));
    }
}
