//! Scoring a solution against a known ground truth.
//!
//! Entropies and mutual information are in nats.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Partition;
use crate::linreg::Dataset;
use crate::solvers::{total_ssr, SolveResult};

/// Denominator used to normalize mutual information.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmiNormalization {
    /// `sqrt(H(a) H(b))`; identical partitions score 1.
    #[default]
    Sqrt,
    /// `H(a) H(b)`, the product form. Does not map identical partitions to 1
    /// and can exceed 1; kept for comparison with published figures.
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub total_ssr: f64,
    pub rand_index: f64,
    pub nmi: f64,
    /// Intercept first, then one entry per covariate.
    pub mae_per_coefficient: Vec<f64>,
    pub region_count: usize,
    pub runtime_secs: f64,
}

fn check_same_n(a: &Partition, b: &Partition) -> Result<()> {
    if a.n_units() != b.n_units() {
        return Err(Error::SizeMismatch {
            what: "estimated partition",
            got: b.n_units(),
            expected: a.n_units(),
        });
    }
    Ok(())
}

/// Counts `n_jk = |A_j ∩ B_k|`, row-major `a.n_regions() x b.n_regions()`.
fn contingency(a: &Partition, b: &Partition) -> Vec<usize> {
    let cols = b.n_regions();
    let mut table = vec![0; a.n_regions() * cols];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        table[la * cols + lb] += 1;
    }
    table
}

fn pairs(k: usize) -> f64 {
    (k as f64) * (k as f64 - 1.0) / 2.0
}

/// Fraction of unit pairs on which the two partitions agree (same region in
/// both, or different regions in both). 1 for fewer than two units.
pub fn rand_index(truth: &Partition, estimate: &Partition) -> Result<f64> {
    check_same_n(truth, estimate)?;
    let n = truth.n_units();
    if n < 2 {
        return Ok(1.0);
    }
    let together_both: f64 = contingency(truth, estimate).into_iter().map(pairs).sum();
    let together_truth: f64 = truth.sizes().into_iter().map(pairs).sum();
    let together_est: f64 = estimate.sizes().into_iter().map(pairs).sum();
    let total = pairs(n);
    let disagreements = together_truth + together_est - 2.0 * together_both;
    Ok((total - disagreements) / total)
}

/// `-sum (|R_j|/n) ln(|R_j|/n)`.
pub fn entropy(partition: &Partition) -> f64 {
    let n = partition.n_units() as f64;
    -partition
        .sizes()
        .into_iter()
        .map(|s| {
            let q = s as f64 / n;
            q * q.ln()
        })
        .sum::<f64>()
}

pub fn mutual_information(truth: &Partition, estimate: &Partition) -> Result<f64> {
    check_same_n(truth, estimate)?;
    let n = truth.n_units() as f64;
    let a = truth.sizes();
    let b = estimate.sizes();
    let cols = b.len();
    let mi: f64 = contingency(truth, estimate)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(idx, c)| {
            let c = c as f64;
            let (j, k) = (idx / cols, idx % cols);
            (c / n) * (n * c / (a[j] as f64 * b[k] as f64)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Normalized mutual information with the `sqrt` denominator.
pub fn nmi(truth: &Partition, estimate: &Partition) -> Result<f64> {
    nmi_with(truth, estimate, NmiNormalization::Sqrt)
}

/// When either partition has zero entropy, returns 1 if the partitions group
/// units identically and 0 otherwise.
pub fn nmi_with(truth: &Partition, estimate: &Partition, normalization: NmiNormalization) -> Result<f64> {
    let mi = mutual_information(truth, estimate)?;
    let (ha, hb) = (entropy(truth), entropy(estimate));
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(if truth.same_grouping(estimate) { 1.0 } else { 0.0 });
    }
    let value = match normalization {
        NmiNormalization::Sqrt => (mi / (ha * hb).sqrt()).min(1.0),
        NmiNormalization::Product => mi / (ha * hb),
    };
    Ok(value)
}

/// Mean over units of `|estimated - true|` for each parameter, given the
/// parameter vector in force at every unit on each side.
pub fn coefficient_mae<T, E>(truth_params: &[T], estimated_params: &[E]) -> Result<Vec<f64>>
where
    T: AsRef<[f64]>,
    E: AsRef<[f64]>,
{
    if truth_params.len() != estimated_params.len() {
        return Err(Error::SizeMismatch {
            what: "estimated units",
            got: estimated_params.len(),
            expected: truth_params.len(),
        });
    }
    let Some(first) = truth_params.first() else {
        return Ok(Vec::new());
    };
    let dim = first.as_ref().len();
    let mut sums = vec![0.0; dim];
    for (t, e) in truth_params.iter().zip(estimated_params) {
        let (t, e) = (t.as_ref(), e.as_ref());
        if t.len() != dim || e.len() != dim {
            return Err(Error::SizeMismatch {
                what: "parameter vector",
                got: e.len().min(t.len()),
                expected: dim,
            });
        }
        for c in 0..dim {
            sums[c] += (e[c] - t[c]).abs();
        }
    }
    let n = truth_params.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Per-unit parameter vectors from a partition and per-region parameters.
pub fn unit_params<'a>(partition: &Partition, region_params: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
    partition
        .labels()
        .iter()
        .map(|&l| region_params[l].as_slice())
        .collect()
}

/// Known regimes behind a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRef<'a> {
    pub partition: &'a Partition,
    /// `[b0, b1, .., bm]` per true region, on the scale of the dataset being
    /// evaluated.
    pub params: &'a [Vec<f64>],
}

/// All metrics for `result`; SSR is recomputed from its models on `dataset`.
pub fn evaluate(truth: TruthRef<'_>, result: &SolveResult, dataset: &Dataset) -> Result<EvaluationReport> {
    let estimate = &result.partition;
    check_same_n(truth.partition, estimate)?;
    if dataset.n() != estimate.n_units() {
        return Err(Error::SizeMismatch {
            what: "dataset",
            got: dataset.n(),
            expected: estimate.n_units(),
        });
    }
    let est_params: Vec<Vec<f64>> = result.models.iter().map(|m| m.params().to_vec()).collect();
    Ok(EvaluationReport {
        total_ssr: total_ssr(dataset, estimate.labels(), &result.models),
        rand_index: rand_index(truth.partition, estimate)?,
        nmi: nmi(truth.partition, estimate)?,
        mae_per_coefficient: coefficient_mae(
            &unit_params(truth.partition, truth.params),
            &unit_params(estimate, &est_params),
        )?,
        region_count: estimate.n_regions(),
        runtime_secs: duration_secs(result.wall_time),
    })
}

pub(crate) fn duration_secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_raw_labels(labels).unwrap()
    }

    #[test]
    fn rand_index_examples() {
        let a = part(&[0, 0, 1, 1]);
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        // u1 alone-ish: truth {u1,u2},{u3,u4}; estimate {u1},{u2,u3,u4}
        let truth = part(&[0, 0, 1, 1]);
        let est = part(&[0, 1, 1, 1]);
        assert_eq!(rand_index(&truth, &est).unwrap(), 0.5);
        let singletons = part(&[0, 1, 2, 3]);
        assert!((rand_index(&a, &singletons).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(rand_index(&a, &part(&[0, 0, 0])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&part(&[0, 0, 0])), 0.0);
        assert!((entropy(&part(&[0, 0, 1, 1])) - 2f64.ln()).abs() < 1e-15);
        let expected = -(0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((entropy(&part(&[0, 1, 1, 1])) - expected).abs() < 1e-15);
        assert!((expected - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn mutual_information_examples() {
        let a = part(&[0, 0, 1, 1]);
        assert!((mutual_information(&a, &a).unwrap() - entropy(&a)).abs() < 1e-15);
        assert_eq!(mutual_information(&a, &part(&[0, 0, 0, 0])).unwrap(), 0.0);
        assert!(mutual_information(&a, &part(&[0, 1, 0, 1])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn nmi_examples() {
        let a = part(&[0, 0, 1, 1]);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmi(&a, &part(&[0, 1, 0, 1])).unwrap().abs() < 1e-15);
        let b = part(&[0, 0, 1, 2]);
        let h2 = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((h2 - 1.0397).abs() < 1e-4);
        let expected = 2f64.ln() / (2f64.ln() * h2).sqrt();
        assert!((nmi(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.8165).abs() < 1e-4);
        // degenerate rule
        let one = part(&[0, 0, 0, 0]);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&one, &a).unwrap(), 0.0);
        // product form on identical partitions gives 1/H
        let lit = nmi_with(&a, &a, NmiNormalization::Product).unwrap();
        assert!((lit - 1.0 / 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mae_examples() {
        let truth: Vec<Vec<f64>> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&b| vec![0.0, b]).collect();
        let p = Partition::new((0..625).map(|u| u / 125).collect()).unwrap();
        let zero = vec![vec![0.0, 0.0]];
        let one = Partition::single(625).unwrap();
        let mae = coefficient_mae(&unit_params(&p, &truth), &unit_params(&one, &zero)).unwrap();
        assert_eq!(mae[0], 0.0);
        assert!((mae[1] - 1.2).abs() < 1e-12);

        let same = coefficient_mae(&unit_params(&p, &truth), &unit_params(&p, &truth)).unwrap();
        assert_eq!(same, vec![0.0, 0.0]);

        // one unit of the b1=-2 region assigned to the b1=2 model
        let mut labels: Vec<usize> = (0..625).map(|u| u / 125).collect();
        labels[0] = 4;
        let moved = Partition::new(labels).unwrap();
        let mae = coefficient_mae(&unit_params(&p, &truth), &unit_params(&moved, &truth)).unwrap();
        assert!((mae[1] - 4.0 / 625.0).abs() < 1e-15);
    }

    #[test]
    fn metrics_ignore_label_names() {
        let a = part(&[0, 0, 1, 1, 2, 2, 2]);
        let b = part(&[1, 0, 0, 2, 2, 1, 1]);
        let b_relabel = Partition::new(b.labels().iter().map(|&l| (l + 1) % 3).collect()).unwrap();
        assert_eq!(rand_index(&a, &b).unwrap(), rand_index(&a, &b_relabel).unwrap());
        assert!((nmi(&a, &b).unwrap() - nmi(&b_relabel, &a).unwrap()).abs() < 1e-14);
    }
}
