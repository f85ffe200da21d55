//! Circular layout of clusters and samples.
//!
//! Cluster probability columns are compared with Pearson correlation, the
//! correlations are turned into normalized dissimilarities, the clusters are
//! ordered on the minimum-cost Hamiltonian cycle (exact Held-Karp DP up to a
//! size cap, greedy edge selection beyond it), and anchors plus samples are
//! placed on/inside a circle. Arc lengths between consecutive anchors are
//! proportional to their dissimilarities.

use serde::{Deserialize, Serialize};

use crate::gldc::ProbabilityMatrix;
use crate::matrix::DenseMatrix;
use crate::{Error, Result};

/// Past this many clusters the exact DP is refused and `greedy_cycle` must be
/// used instead.
pub const DEFAULT_EXACT_CYCLE_MAX: usize = 16;

/// Hard cap for the brute-force oracle: (c-1)!/2 cycles.
pub const BRUTE_FORCE_MAX: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Exponent of the sign-preserving similarity weighting; 1 keeps the raw
    /// correlations.
    pub gamma_exponent: f64,
    pub radius: f64,
    pub exact_cycle_max: usize,
    /// A sample whose maximum probability is below this is an outlier.
    pub outlier_threshold: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            gamma_exponent: 1.0,
            radius: 1.0,
            exact_cycle_max: DEFAULT_EXACT_CYCLE_MAX,
            outlier_threshold: 0.5,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_exponent < 0.0 {
            return Err(Error::Config("gamma_exponent must be nonnegative".into()));
        }
        if self.radius <= 0.0 {
            return Err(Error::Config("radius must be positive".into()));
        }
        if !(self.outlier_threshold > 0.0 && self.outlier_threshold < 1.0) {
            return Err(Error::Config("outlier_threshold must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Symmetric c×c matrix of cluster-column similarities, diagonal 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: DenseMatrix,
}

impl SimilarityMatrix {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        let c = values.rows();
        if values.cols() != c {
            return Err(Error::DimensionMismatch(format!(
                "similarity matrix is {}x{}",
                c,
                values.cols()
            )));
        }
        for i in 0..c {
            if (values.get(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "similarity diagonal entry {i} is {}",
                    values.get(i, i)
                )));
            }
            for j in 0..c {
                let v = values.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "similarity ({i},{j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - values.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "similarity matrix is asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { values })
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }
}

/// A Hamiltonian cycle over cluster indices in canonical form: the order
/// starts at cluster 0 and the second element is smaller than the last, which
/// fixes rotation and reflection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleOrder {
    pub order: Vec<usize>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleSolver {
    Exact,
    Greedy,
}

/// Anchor angles/coordinates on the circle plus per-sample positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularLayout {
    pub radius: f64,
    pub anchor_angles: Vec<f64>,
    pub anchor_coords: Vec<[f64; 2]>,
    pub sample_coords: Vec<[f64; 2]>,
    pub outlier_flags: Vec<bool>,
}

/// Pearson correlation between every pair of probability columns.
///
/// A zero-variance column carries no correlation information; its similarity
/// to every other column is defined as 0 (diagonal stays 1) and a warning is
/// emitted.
pub fn pearson_similarity(p: &ProbabilityMatrix) -> Result<SimilarityMatrix> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 samples for column correlations".into(),
        ));
    }
    let c = p.clusters();
    let values = p.values();
    let mut means = vec![0.0; c];
    for j in 0..c {
        means[j] = (0..n).map(|i| values.get(i, j)).sum::<f64>() / n as f64;
    }
    let mut norms = vec![0.0; c];
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = (0..n)
            .map(|i| {
                let d = values.get(i, j) - means[j];
                d * d
            })
            .sum::<f64>()
            .sqrt();
    }
    for (j, &norm) in norms.iter().enumerate() {
        if norm == 0.0 {
            log::warn!("probability column {j} has zero variance; its similarities default to 0");
        }
    }
    let mut s = DenseMatrix::identity(c);
    for i in 0..c {
        for j in (i + 1)..c {
            let value = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let cov: f64 = (0..n)
                    .map(|l| (values.get(l, i) - means[i]) * (values.get(l, j) - means[j]))
                    .sum();
                (cov / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            s.set(i, j, value);
            s.set(j, i, value);
        }
    }
    SimilarityMatrix::new(s)
}

/// Sign-preserving power weighting t = sgn(s)·|s|^γ. γ = 1 returns the input
/// unchanged, bit for bit.
pub fn weight_similarity(s: &SimilarityMatrix, gamma_exponent: f64) -> Result<SimilarityMatrix> {
    if gamma_exponent < 0.0 {
        return Err(Error::InvalidInput("gamma_exponent must be nonnegative".into()));
    }
    if gamma_exponent == 1.0 {
        return Ok(s.clone());
    }
    let c = s.len();
    let mut t = DenseMatrix::identity(c);
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let v = s.values().get(i, j);
            let sign = if v > 0.0 { 1.0 } else { -1.0 };
            t.set(i, j, sign * v.abs().powf(gamma_exponent));
        }
    }
    SimilarityMatrix::new(t)
}

/// Normalized dissimilarities dis(i,j) = (1-s)/Σ_{i<j}(1-s); the diagonal is
/// zero and the upper triangle sums to 1.
pub fn dissimilarity(t: &SimilarityMatrix) -> Result<DenseMatrix> {
    let c = t.len();
    if c < 2 {
        return Err(Error::InvalidInput(
            "dissimilarity needs at least 2 clusters".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..c {
        for j in (i + 1)..c {
            total += 1.0 - t.values().get(i, j);
        }
    }
    if total <= 0.0 {
        return Err(Error::DegenerateDistance(
            "all pairwise similarities equal 1".into(),
        ));
    }
    let mut d = DenseMatrix::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            if i != j {
                d.set(i, j, (1.0 - t.values().get(i, j)) / total);
            }
        }
    }
    Ok(d)
}

/// Cycle cost under `d`: consecutive edges left to right plus the closing
/// edge. Both solvers and the oracle report costs through this one function
/// so equal cycles produce identical floats.
pub fn cycle_cost(d: &DenseMatrix, order: &[usize]) -> f64 {
    let c = order.len();
    let mut cost = 0.0;
    for i in 1..c {
        cost += d.get(order[i - 1], order[i]);
    }
    cost + d.get(order[c - 1], order[0])
}

fn canonicalize(mut order: Vec<usize>) -> Vec<usize> {
    let c = order.len();
    let start = order
        .iter()
        .position(|&v| v == *order.iter().min().unwrap())
        .unwrap();
    order.rotate_left(start);
    if c > 2 && order[1] > order[c - 1] {
        order[1..].reverse();
    }
    order
}

fn validate_cycle_input(d: &DenseMatrix, min_c: usize) -> Result<usize> {
    let c = d.rows();
    if d.cols() != c {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix is {}x{}",
            c,
            d.cols()
        )));
    }
    if c < min_c {
        return Err(Error::InvalidInput(format!(
            "need at least {min_c} clusters, got {c}"
        )));
    }
    Ok(c)
}

/// Exact minimum-cost Hamiltonian cycle by Held-Karp dynamic programming over
/// visited-set bitmasks, O(c²·2^c). Refuses c above `exact_cycle_max`; the
/// caller must fall back to `greedy_cycle` explicitly.
pub fn held_karp_cycle(d: &DenseMatrix, exact_cycle_max: usize) -> Result<CycleOrder> {
    let c = validate_cycle_input(d, 3)?;
    if c > exact_cycle_max {
        return Err(Error::InvalidInput(format!(
            "{c} clusters exceed the exact solver cap {exact_cycle_max}; use greedy_cycle"
        )));
    }
    let full: usize = (1 << c) - 1;
    // dp[mask][j]: cheapest path 0 -> … -> j visiting exactly `mask`
    // (mask always contains bit 0 and bit j).
    let mut dp = vec![f64::INFINITY; (full + 1) * c];
    let mut parent = vec![usize::MAX; (full + 1) * c];
    for j in 1..c {
        dp[((1 | (1 << j)) * c) + j] = d.get(0, j);
    }
    for mask in 0..=full {
        if mask & 1 == 0 {
            continue;
        }
        for j in 1..c {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * c + j];
            if !cur.is_finite() {
                continue;
            }
            for next in 1..c {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nmask = mask | (1 << next);
                let cand = cur + d.get(j, next);
                if cand < dp[nmask * c + next] {
                    dp[nmask * c + next] = cand;
                    parent[nmask * c + next] = j;
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut last = usize::MAX;
    for j in 1..c {
        let cand = dp[full * c + j] + d.get(j, 0);
        if cand < best {
            best = cand;
            last = j;
        }
    }
    if last == usize::MAX {
        return Err(Error::DegenerateDistance("no finite cycle".into()));
    }
    let mut order = Vec::with_capacity(c);
    let mut mask = full;
    let mut j = last;
    while j != usize::MAX {
        order.push(j);
        let p = parent[mask * c + j];
        mask ^= 1 << j;
        j = p;
    }
    order.push(0);
    order.reverse();
    debug_assert_eq!(order.len(), c);
    let order = canonicalize(order);
    let total_cost = cycle_cost(d, &order);
    Ok(CycleOrder { order, total_cost })
}

/// Greedy cycle construction: repeatedly take the cheapest unused edge that
/// keeps every degree at most 2 and closes no premature cycle, then join the
/// two path ends. Ties break on (cost, i, j).
pub fn greedy_cycle(d: &DenseMatrix) -> Result<CycleOrder> {
    let c = validate_cycle_input(d, 3)?;
    let mut edges = Vec::with_capacity(c * (c - 1) / 2);
    for i in 0..c {
        for j in (i + 1)..c {
            edges.push((d.get(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

    let mut degree = vec![0usize; c];
    let mut component: Vec<usize> = (0..c).collect();
    let mut adjacency = vec![Vec::with_capacity(2); c];
    let mut accepted = 0;
    for &(_, i, j) in &edges {
        if accepted == c - 1 {
            break;
        }
        if degree[i] == 2 || degree[j] == 2 {
            continue;
        }
        let (ci, cj) = (find(&mut component, i), find(&mut component, j));
        if ci == cj {
            continue;
        }
        component[ci] = cj;
        degree[i] += 1;
        degree[j] += 1;
        adjacency[i].push(j);
        adjacency[j].push(i);
        accepted += 1;
    }
    // The c-1 accepted edges form a single Hamiltonian path; close it.
    let ends: Vec<usize> = (0..c).filter(|&v| degree[v] < 2).collect();
    debug_assert_eq!(ends.len(), 2);
    adjacency[ends[0]].push(ends[1]);
    adjacency[ends[1]].push(ends[0]);

    let mut order = Vec::with_capacity(c);
    let mut prev = usize::MAX;
    let mut cur = 0;
    for _ in 0..c {
        order.push(cur);
        let next = if adjacency[cur][0] != prev {
            adjacency[cur][0]
        } else {
            adjacency[cur][1]
        };
        prev = cur;
        cur = next;
    }
    let order = canonicalize(order);
    let total_cost = cycle_cost(d, &order);
    Ok(CycleOrder { order, total_cost })
}

fn find(component: &mut [usize], mut v: usize) -> usize {
    while component[v] != v {
        component[v] = component[component[v]];
        v = component[v];
    }
    v
}

/// Exhaustive oracle: the optimum over all (c-1)!/2 distinct cycles.
pub fn brute_force_cycle(d: &DenseMatrix) -> Result<CycleOrder> {
    let c = validate_cycle_input(d, 3)?;
    if c > BRUTE_FORCE_MAX {
        return Err(Error::InvalidInput(format!(
            "brute force is capped at {BRUTE_FORCE_MAX} clusters, got {c}"
        )));
    }
    let mut best_cost = f64::INFINITY;
    let mut best: Vec<usize> = Vec::new();
    let mut rest: Vec<usize> = (1..c).collect();
    permute(&mut rest, 0, &mut |perm| {
        // skip reflections: require perm[0] < perm[last]
        if perm[0] > perm[perm.len() - 1] {
            return;
        }
        let mut cost = d.get(0, perm[0]);
        for i in 1..perm.len() {
            cost += d.get(perm[i - 1], perm[i]);
        }
        cost += d.get(perm[perm.len() - 1], 0);
        if cost < best_cost {
            best_cost = cost;
            best = perm.to_vec();
        }
    });
    let mut order = vec![0];
    order.extend(best);
    let order = canonicalize(order);
    let total_cost = cycle_cost(d, &order);
    Ok(CycleOrder { order, total_cost })
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Sum of similarities along the cycle's consecutive edges plus the closing
/// edge; the quantity the optimal cycle maximizes.
pub fn similarity_score(order: &CycleOrder, s: &SimilarityMatrix) -> f64 {
    let seq = &order.order;
    let c = seq.len();
    let mut score = 0.0;
    for i in 1..c {
        score += s.values().get(seq[i - 1], seq[i]);
    }
    score + s.values().get(seq[0], seq[c - 1])
}

/// Anchor angles along the cycle: the first anchor sits at angle 0 and each
/// arc is proportional to the dissimilarity between consecutive clusters; the
/// closing arc completes the full turn.
pub fn compute_angles(order: &CycleOrder, d: &DenseMatrix) -> Result<Vec<f64>> {
    let seq = &order.order;
    let c = seq.len();
    let mut arcs = Vec::with_capacity(c);
    for i in 1..c {
        arcs.push(d.get(seq[i], seq[i - 1]));
    }
    let closing = d.get(seq[c - 1], seq[0]);
    let denominator: f64 = arcs.iter().sum::<f64>() + closing;
    if denominator <= 0.0 {
        return Err(Error::DegenerateDistance(
            "cycle dissimilarities sum to zero".into(),
        ));
    }
    let mut angles = Vec::with_capacity(c);
    let mut angle = 0.0;
    angles.push(0.0);
    for (i, &arc) in arcs.iter().enumerate() {
        if arc == 0.0 {
            log::warn!(
                "clusters {} and {} have zero dissimilarity; their anchors coincide",
                seq[i],
                seq[i + 1]
            );
        }
        angle += 2.0 * std::f64::consts::PI * arc / denominator;
        angles.push(angle);
    }
    Ok(angles)
}

/// Anchor coordinates (r·cos α, r·sin α).
pub fn anchor_positions(angles: &[f64], radius: f64) -> Result<Vec<[f64; 2]>> {
    if radius <= 0.0 {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    Ok(angles
        .iter()
        .map(|&a| [radius * a.cos(), radius * a.sin()])
        .collect())
}

/// Maps each sample to the probability-weighted combination of the anchors.
/// `anchors[i]` belongs to cluster `order.order[i]`.
pub fn sample_positions(
    p: &ProbabilityMatrix,
    anchors: &[[f64; 2]],
    order: &CycleOrder,
) -> Result<Vec<[f64; 2]>> {
    let c = p.clusters();
    if anchors.len() != c || order.order.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "{} anchors / cycle of {} for {c} clusters",
            anchors.len(),
            order.order.len()
        )));
    }
    let mut positions = Vec::with_capacity(p.n());
    for i in 0..p.n() {
        let row = p.values().row(i);
        let mut x = 0.0;
        let mut y = 0.0;
        for (pos, &cluster) in order.order.iter().enumerate() {
            x += row[cluster] * anchors[pos][0];
            y += row[cluster] * anchors[pos][1];
        }
        positions.push([x, y]);
    }
    Ok(positions)
}

/// A sample is an outlier when its maximum cluster probability is below the
/// threshold. The threshold must lie strictly between 1/c and 1.
pub fn flag_outliers(p: &ProbabilityMatrix, threshold: f64) -> Result<Vec<bool>> {
    let c = p.clusters() as f64;
    if !(threshold > 1.0 / c && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "outlier threshold {threshold} must be in (1/{c}, 1)"
        )));
    }
    Ok((0..p.n())
        .map(|i| {
            p.values()
                .row(i)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
                < threshold
        })
        .collect())
}

/// Σᵢ‖μ_xᵢ‖² with coordinates normalized to the unit circle; large values
/// mean samples sit near their anchors rather than the center. Bounded by n.
pub fn layout_quality(p: &ProbabilityMatrix, anchors: &[[f64; 2]], order: &CycleOrder) -> Result<f64> {
    let radius = anchors
        .first()
        .map(|a| (a[0] * a[0] + a[1] * a[1]).sqrt())
        .unwrap_or(1.0);
    if radius <= 0.0 {
        return Err(Error::InvalidInput("anchors sit at the origin".into()));
    }
    let positions = sample_positions(p, anchors, order)?;
    Ok(positions
        .iter()
        .map(|&[x, y]| (x * x + y * y) / (radius * radius))
        .sum())
}

/// Everything the cycle stage produces for one probability matrix.
#[derive(Debug, Clone)]
pub struct LayoutResult {
    pub layout: CircularLayout,
    pub cycle: CycleOrder,
    pub solver: CycleSolver,
    pub similarity_score: f64,
    pub quality: f64,
}

/// Runs the full mapping stage: correlations, weighting, dissimilarities,
/// cycle (exact when c fits under the cap, greedy otherwise), angles, anchor
/// and sample positions, and outlier flags.
pub fn build_layout(p: &ProbabilityMatrix, params: &LayoutParams) -> Result<LayoutResult> {
    params.validate()?;
    let s = pearson_similarity(p)?;
    let t = weight_similarity(&s, params.gamma_exponent)?;
    let d = dissimilarity(&t)?;
    let (cycle, solver) = if p.clusters() == 2 {
        // two clusters admit exactly one cycle: 0 -> 1 -> 0
        let order = vec![0, 1];
        let total_cost = cycle_cost(&d, &order);
        (CycleOrder { order, total_cost }, CycleSolver::Exact)
    } else if p.clusters() <= params.exact_cycle_max {
        (held_karp_cycle(&d, params.exact_cycle_max)?, CycleSolver::Exact)
    } else {
        (greedy_cycle(&d)?, CycleSolver::Greedy)
    };
    let angles = compute_angles(&cycle, &d)?;
    let anchors = anchor_positions(&angles, params.radius)?;
    let samples = sample_positions(p, &anchors, &cycle)?;
    let outliers = if params.outlier_threshold <= 1.0 / p.clusters() as f64 {
        // a row's maximum is always >= 1/c, so such a threshold can never
        // fire; keep the run going with no outliers
        log::warn!(
            "outlier threshold {} is at or below 1/{}; no sample can qualify",
            params.outlier_threshold,
            p.clusters()
        );
        vec![false; p.n()]
    } else {
        flag_outliers(p, params.outlier_threshold)?
    };
    let score = similarity_score(&cycle, &t);
    let quality = layout_quality(p, &anchors, &cycle)?;
    Ok(LayoutResult {
        layout: CircularLayout {
            radius: params.radius,
            anchor_angles: angles,
            anchor_coords: anchors,
            sample_coords: samples,
            outlier_flags: outliers,
        },
        cycle,
        solver,
        similarity_score: score,
        quality,
    })
}
