//! Regression and ranking metrics over predicted and measured affinities.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("prediction length {pred} differs from truth length {truth}")]
    Length { pred: usize, truth: usize },
    #[error("{metric} needs at least {min} values, got {found}")]
    TooShort {
        metric: &'static str,
        min: usize,
        found: usize,
    },
    #[error("{metric} is undefined: {reason}")]
    Undefined {
        metric: &'static str,
        reason: &'static str,
    },
    #[error("{metric} input contains a non-finite value")]
    NonFinite { metric: &'static str },
}

fn check(metric: &'static str, pred: &[f64], truth: &[f64], min: usize) -> Result<(), MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.len() < min {
        return Err(MetricError::TooShort {
            metric,
            min,
            found: pred.len(),
        });
    }
    if !pred.iter().chain(truth).all(|v| v.is_finite()) {
        return Err(MetricError::NonFinite { metric });
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check("MSE", pred, truth, 1)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    Ok(mse(pred, truth)?.sqrt())
}

/// Pearson correlation with population moments, computed from centered sums.
pub fn pearson(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check("Pearson", pred, truth, 2)?;
    pearson_unchecked(pred, truth).ok_or(MetricError::Undefined {
        metric: "Pearson",
        reason: "an input has zero variance",
    })
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Spearman rank correlation. Without ties this is the closed form over rank
/// differences; with ties it is the Pearson correlation of average ranks.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check("Spearman", pred, truth, 2)?;
    let rp = average_ranks(pred);
    let rt = average_ranks(truth);
    if !has_ties(pred) && !has_ties(truth) {
        let n = pred.len() as f64;
        let d2: f64 = rp.iter().zip(&rt).map(|(a, b)| (a - b) * (a - b)).sum();
        return Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)));
    }
    pearson_unchecked(&rp, &rt).ok_or(MetricError::Undefined {
        metric: "Spearman",
        reason: "an input is constant",
    })
}

/// Fenwick tree over counts.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted positions `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut total = 0;
        while i > 0 {
            total += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        total
    }
}

/// Concordance index: over pairs with strictly ordered truths, the fraction
/// whose predictions are ordered the same way, ties in prediction counting
/// one half. Runs in `O(n log n)`.
pub fn concordance_index(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check("CI", pred, truth, 2)?;
    let n = pred.len();

    // Dense ranks of the predictions, equal values sharing a slot.
    let mut by_pred: Vec<usize> = (0..n).collect();
    by_pred.sort_by(|&a, &b| pred[a].total_cmp(&pred[b]));
    let mut slot = vec![0usize; n];
    let mut next = 0;
    for (k, &i) in by_pred.iter().enumerate() {
        if k > 0 && pred[i] != pred[by_pred[k - 1]] {
            next += 1;
        }
        slot[i] = next;
    }

    let mut by_truth: Vec<usize> = (0..n).collect();
    by_truth.sort_by(|&a, &b| truth[a].partial_cmp(&truth[b]).unwrap_or(Ordering::Equal));

    // Walk truth groups in ascending order; everything already inserted has a
    // strictly smaller truth than the current group.
    let mut tree = Fenwick::new(next + 1);
    let (mut inserted, mut pairs, mut twice_score) = (0u64, 0u64, 0u64);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && truth[by_truth[end]] == truth[by_truth[start]] {
            end += 1;
        }
        for &i in &by_truth[start..end] {
            let below = tree.prefix(slot[i]);
            let equal = tree.prefix(slot[i] + 1) - below;
            pairs += inserted;
            twice_score += 2 * below + equal;
        }
        for &i in &by_truth[start..end] {
            tree.add(slot[i]);
        }
        inserted += (end - start) as u64;
        start = end;
    }
    if pairs == 0 {
        return Err(MetricError::Undefined {
            metric: "CI",
            reason: "all true affinities are equal",
        });
    }
    Ok(twice_score as f64 / (2 * pairs) as f64)
}

/// All five evaluation metrics on one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub rmse: f64,
    pub mse: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub ci: f64,
}

impl MetricSet {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self, MetricError> {
        Ok(Self {
            rmse: rmse(pred, truth)?,
            mse: mse(pred, truth)?,
            pearson: pearson(pred, truth)?,
            spearman: spearman(pred, truth)?,
            ci: concordance_index(pred, truth)?,
        })
    }

    pub const TSV_HEADER: &'static str = "rmse\tmse\tpearson\tspearman\tci";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.rmse, self.mse, self.pearson, self.spearman, self.ci
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_hand_arithmetic() {
        assert_eq!(mse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(MetricError::Length { .. })
        ));
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn ci_perfect_and_constant() {
        let truth = [1.0, 4.0, 2.0, 8.0, 5.0];
        assert_eq!(concordance_index(&truth, &truth).unwrap(), 1.0);
        assert_eq!(concordance_index(&[3.0; 5], &truth).unwrap(), 0.5);
        let reversed: Vec<f64> = truth.iter().map(|v| -v).collect();
        assert_eq!(concordance_index(&reversed, &truth).unwrap(), 0.0);
        assert!(matches!(
            concordance_index(&[1.0, 2.0], &[5.0, 5.0]),
            Err(MetricError::Undefined { .. })
        ));
    }

    #[test]
    fn ci_with_truth_ties_skips_tied_pairs() {
        // Pairs with strictly ordered truth: (0,2), (1,2) -> both concordant.
        assert_eq!(
            concordance_index(&[0.0, 9.0, 10.0], &[1.0, 1.0, 2.0]).unwrap(),
            1.0
        );
        // One concordant, one tied prediction.
        assert_eq!(
            concordance_index(&[0.0, 10.0, 10.0], &[1.0, 1.0, 2.0]).unwrap(),
            0.75
        );
    }

    #[test]
    fn correlations_of_linear_maps() {
        let x = [1.0, 2.5, -3.0, 4.0, 0.5];
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &twice).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 5]).is_err());
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert_eq!(spearman(&cubed, &x).unwrap(), 1.0);
        assert_eq!(spearman(&neg, &x).unwrap(), -1.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 5.0]),
            vec![2.5, 4.0, 2.5, 1.0]
        );
    }

    #[test]
    fn tsv_row_has_five_fields() {
        let m = MetricSet::compute(&[1.0, 2.0, 3.0], &[1.0, 2.5, 2.9]).unwrap();
        assert_eq!(m.tsv_row().split('\t').count(), 5);
    }
}
