//! Clustering evaluation: accuracy under the best label permutation
//! (Kuhn-Munkres assignment) and normalized mutual information.

use crate::matrix::DenseMatrix;
use crate::{Error, Result};

/// counts[pred][truth], padded to square when the label ranges differ.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} truth labels",
                pred.len(),
                truth.len()
            )));
        }
        let c_pred = pred.iter().max().map_or(0, |&m| m + 1);
        let c_true = truth.iter().max().map_or(0, |&m| m + 1);
        let side = c_pred.max(c_true).max(1);
        let mut counts = vec![vec![0u64; side]; side];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }
}

/// Minimum-cost perfect matching on a square cost matrix via the O(n³)
/// potentials-and-augmenting-paths form of the Hungarian algorithm. Among
/// cost-optimal assignments the lexicographically smallest one (by the column
/// chosen for row 0, then row 1, …) is returned.
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::InvalidInput(format!(
            "cost matrix must be square, got {}x{}; pad it upstream",
            n,
            cost.cols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !cost.all_finite() {
        return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
    }

    let rows: Vec<Vec<f64>> = (0..n).map(|i| cost.row(i).to_vec()).collect();
    let (best, _) = solve(&rows);
    let scale = 1.0_f64.max(best.abs());

    // Lexicographic refinement: fix each row in turn to the smallest column
    // that still allows a matching of optimal total cost.
    let mut used = vec![false; n];
    let mut fixed_cost = 0.0;
    let mut assignment = vec![usize::MAX; n];
    for row in 0..n {
        for col in 0..n {
            if used[col] {
                continue;
            }
            let candidate = fixed_cost + rows[row][col];
            let remainder = if row + 1 == n {
                0.0
            } else {
                let mut cols_left: Vec<usize> = (0..n).filter(|&c| !used[c] && c != col).collect();
                cols_left.sort_unstable();
                let sub: Vec<Vec<f64>> = (row + 1..n)
                    .map(|r| cols_left.iter().map(|&c| rows[r][c]).collect())
                    .collect();
                solve(&sub).0
            };
            if candidate + remainder <= best + 1e-9 * scale {
                assignment[row] = col;
                used[col] = true;
                fixed_cost += rows[row][col];
                break;
            }
        }
        debug_assert_ne!(assignment[row], usize::MAX, "no column preserved optimality");
    }
    Ok(assignment)
}

/// Classic Hungarian over a dense square matrix; returns (cost, row -> col).
fn solve(a: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = a.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    const INF: f64 = f64::INFINITY;
    // 1-based with a virtual column 0, following the standard formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| a[i][j])
        .sum();
    (total, assignment)
}

/// Clustering accuracy: the fraction of samples matched after the best
/// one-to-one relabeling of predicted clusters, found by Kuhn-Munkres on the
/// negated confusion matrix.
pub fn acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let confusion = ConfusionMatrix::from_labels(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::InvalidInput("no labels".into()));
    }
    let side = confusion.counts.len();
    let cost = DenseMatrix::from_fn(side, side, |i, j| -(confusion.counts[i][j] as f64));
    let assignment = hungarian(&cost)?;
    let matched: u64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| confusion.counts[i][j])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information MI/√(H_pred·H_truth) with natural-log
/// entropies. Identical single-cluster partitions score 1; when one side has
/// zero entropy and the partitions differ, the score is 0 by convention.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let confusion = ConfusionMatrix::from_labels(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::InvalidInput("no labels".into()));
    }
    let n = pred.len() as f64;
    let side = confusion.counts.len();
    let pred_counts: Vec<u64> = (0..side)
        .map(|i| confusion.counts[i].iter().sum())
        .collect();
    let true_counts: Vec<u64> = (0..side)
        .map(|j| (0..side).map(|i| confusion.counts[i][j]).sum())
        .collect();
    let h_pred = entropy(&pred_counts, n);
    let h_true = entropy(&true_counts, n);
    if h_pred == 0.0 && h_true == 0.0 {
        // both sides put everything in one cluster: identical partitions
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_true == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for i in 0..side {
        for j in 0..side {
            let nij = confusion.counts[i][j];
            if nij == 0 {
                continue;
            }
            let pij = nij as f64 / n;
            mi += pij * ((n * nij as f64) / (pred_counts[i] as f64 * true_counts[j] as f64)).ln();
        }
    }
    Ok((mi / (h_pred * h_true).sqrt()).clamp(0.0, 1.0))
}
