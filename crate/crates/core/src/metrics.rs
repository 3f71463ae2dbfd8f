//! Clustering quality and set-distance measures.

use crate::error::{Error, Result};
use crate::geometry::{chord_distance, UnitVector};

/// Contingency table between estimated clusters and true components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// `counts[k][j]`: points in cluster `k` generated by component `j`.
    pub counts: Vec<Vec<usize>>,
    /// Points per true component that received no cluster label.
    pub unassigned: Vec<usize>,
    /// Component matched to each cluster, if any.
    pub matching: Vec<Option<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum::<usize>() + self.unassigned.iter().sum::<usize>()
    }

    pub fn correct(&self) -> usize {
        self.matching
            .iter()
            .enumerate()
            .filter_map(|(k, m)| m.map(|j| self.counts[k][j]))
            .sum()
    }

    pub fn misclassification_rate(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        1.0 - self.correct() as f64 / total as f64
    }

    /// Rows reordered by matched component: row `j` is the cluster matched to
    /// component `j` (zeros if none), followed by unmatched clusters.
    pub fn aligned(&self) -> Vec<Vec<usize>> {
        let n_truth = self.unassigned.len();
        let mut rows = vec![vec![0; n_truth]; n_truth];
        let mut extra = Vec::new();
        for (k, m) in self.matching.iter().enumerate() {
            match m {
                Some(j) => rows[*j] = self.counts[k].clone(),
                None => extra.push(self.counts[k].clone()),
            }
        }
        rows.extend(extra);
        rows
    }
}

/// Greedy maximum-overlap matching: clusters in decreasing size (ties to the
/// lower index) each take the unmatched component they overlap most (ties to
/// the lower component index).
pub fn greedy_matching(counts: &[Vec<usize>], n_truth: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let size = |k: usize| counts[k].iter().sum::<usize>();
    order.sort_by(|&a, &b| size(b).cmp(&size(a)).then(a.cmp(&b)));
    let mut taken = vec![false; n_truth];
    let mut matching = vec![None; counts.len()];
    for k in order {
        let best = (0..n_truth)
            .filter(|&j| !taken[j])
            .max_by(|&a, &b| counts[k][a].cmp(&counts[k][b]).then(b.cmp(&a)));
        if let Some(j) = best {
            taken[j] = true;
            matching[k] = Some(j);
        }
    }
    matching
}

/// Builds the contingency table and matching. Unlabeled points count as
/// errors.
pub fn confusion_matrix(labels: &[Option<usize>], truth: &[usize]) -> Result<ConfusionMatrix> {
    if labels.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels but {} truth entries",
            labels.len(),
            truth.len()
        )));
    }
    let n_truth = truth.iter().max().map_or(0, |m| m + 1);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0; n_truth]; n_clusters];
    let mut unassigned = vec![0; n_truth];
    for (l, &t) in labels.iter().zip(truth) {
        match l {
            Some(k) => counts[*k][t] += 1,
            None => unassigned[t] += 1,
        }
    }
    let matching = greedy_matching(&counts, n_truth);
    Ok(ConfusionMatrix {
        counts,
        unassigned,
        matching,
    })
}

/// Fraction of points whose matched cluster differs from their component.
pub fn misclassification_rate(labels: &[Option<usize>], truth: &[usize]) -> Result<f64> {
    Ok(confusion_matrix(labels, truth)?.misclassification_rate())
}

/// Hausdorff distance between two point sets under the chord metric.
pub fn hausdorff_distance(a: &[UnitVector], b: &[UnitVector]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |from: &[UnitVector], to: &[UnitVector]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| chord_distance(p.as_slice(), q.as_slice()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs two equal-length samples of size >= 2".into(),
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_swapped_labels() {
        let truth = vec![0, 0, 1, 1, 2];
        let same: Vec<_> = truth.iter().map(|&t| Some(t)).collect();
        assert_eq!(misclassification_rate(&same, &truth).unwrap(), 0.0);
        let truth = vec![0, 0, 0, 1, 1, 1];
        let swapped: Vec<_> = truth.iter().map(|&t| Some(1 - t)).collect();
        assert_eq!(misclassification_rate(&swapped, &truth).unwrap(), 0.0);
    }

    #[test]
    fn published_three_mode_table() {
        // rows: estimated clusters, columns: true components
        let counts = vec![vec![278, 0, 20], vec![0, 323, 8], vec![9, 1, 361]];
        let mut labels = Vec::new();
        let mut truth = Vec::new();
        for (k, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                labels.extend(std::iter::repeat_n(Some(k), c));
                truth.extend(std::iter::repeat_n(j, c));
            }
        }
        let cm = confusion_matrix(&labels, &truth).unwrap();
        assert_eq!(cm.total(), 1000);
        assert!((cm.misclassification_rate() - 0.038).abs() < 1e-15);
        assert_eq!(cm.aligned(), counts);
    }

    #[test]
    fn unassigned_points_are_errors() {
        let truth = vec![0, 0, 1, 1];
        let labels = vec![Some(0), None, Some(1), Some(1)];
        assert_eq!(misclassification_rate(&labels, &truth).unwrap(), 0.25);
        assert!(misclassification_rate(&labels, &truth[..3]).is_err());
    }

    #[test]
    fn extra_clusters_are_errors() {
        let truth = vec![0, 0, 0, 0];
        let labels = vec![Some(0), Some(0), Some(0), Some(1)];
        assert_eq!(misclassification_rate(&labels, &truth).unwrap(), 0.25);
    }

    #[test]
    fn hausdorff_examples() {
        let e1 = UnitVector::basis(3, 0);
        let e2 = UnitVector::basis(3, 1);
        assert_eq!(hausdorff_distance(&[e1.clone()], &[e1.clone()]).unwrap(), 0.0);
        let s2 = 2.0_f64.sqrt();
        assert!((hausdorff_distance(&[e1.clone()], &[e2.clone()]).unwrap() - s2).abs() < 1e-15);
        assert!((hausdorff_distance(&[e1.clone()], &[e1.clone(), e2]).unwrap() - s2).abs() < 1e-15);
        assert!(matches!(hausdorff_distance(&[], &[e1]), Err(Error::EmptySet)));
    }

    #[test]
    fn spearman_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // scipy.stats.spearmanr([1,2,3,4,5],[2,1,4,3,5]) = 0.8
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-14);
        // ties: spearmanr([1,2,2,3],[1,2,3,4]) = 0.9486832980505138
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 0.948_683_298_050_513_8).abs() < 1e-14);
    }
}
