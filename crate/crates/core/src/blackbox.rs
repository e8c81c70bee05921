//! The centralized k-means algorithm the coordinator calls: weighted k-means++
//! seeding followed by Lloyd iterations, best of several restarts.
//!
//! A brute-force optimum over centers drawn from the input is provided as a
//! test oracle for tiny instances.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{compensated_sum, nearest_raw, sq_dist_raw, CenterSet, Dataset};

/// A dataset where point `i` stands for `weights[i]` copies of itself.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDataset {
    base: Dataset,
    weights: Vec<f64>,
}

impl WeightedDataset {
    pub fn new(base: Dataset, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != base.len() {
            return Err(invalid("one weight per point is required"));
        }
        if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeight { index, weight });
        }
        Ok(Self { base, weights })
    }

    /// Every point with weight one.
    pub fn uniform(base: Dataset) -> Self {
        let weights = vec![1.0; base.len()];
        Self { base, weights }
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

impl From<Dataset> for WeightedDataset {
    fn from(base: Dataset) -> Self {
        Self::uniform(base)
    }
}

/// How the Lloyd update places a center.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Weighted mean of the cluster.
    #[default]
    Centroid,
    /// The cluster member with the smallest within-cluster cost; centers stay input points.
    Medoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlackBoxConfig {
    pub max_lloyd_iters: usize,
    pub n_init: usize,
    /// Lloyd stops once an iteration improves the cost by less than this fraction.
    pub convergence_tol: f64,
    pub mode: Mode,
}

impl Default for BlackBoxConfig {
    fn default() -> Self {
        Self {
            max_lloyd_iters: 100,
            n_init: 3,
            convergence_tol: 1e-6,
            mode: Mode::Centroid,
        }
    }
}

impl BlackBoxConfig {
    pub fn medoid() -> Self {
        Self {
            mode: Mode::Medoid,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_lloyd_iters == 0 || self.n_init == 0 {
            return Err(invalid("max_lloyd_iters and n_init must be positive"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(invalid("convergence_tol must be nonnegative"));
        }
        Ok(())
    }

    pub fn cluster<R: Rng + ?Sized>(&self, points: &WeightedDataset, k: usize, rng: &mut R) -> Result<Fit> {
        cluster(points, k, self, rng)
    }
}

/// Outcome of a Lloyd run: final centers, their weighted cost, and the cost after each accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub centers: CenterSet,
    pub cost: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

pub fn weighted_cost(points: &WeightedDataset, centers: &CenterSet) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if centers.dim() != points.base.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.base.dim(),
            found: centers.dim(),
        });
    }
    Ok(compensated_sum(
        points
            .base
            .iter()
            .zip(&points.weights)
            .map(|(x, w)| w * nearest_raw(x, centers).1),
    ))
}

/// Picks an index with probability proportional to `mass`, given their positive total.
fn draw_proportional<R: Rng + ?Sized>(mass: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Weighted k-means++ seeding. Returns `min(k, distinct points)` centers.
pub fn kmeanspp_seed<R: Rng + ?Sized>(points: &WeightedDataset, k: usize, rng: &mut R) -> Result<CenterSet> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let base = &points.base;
    let mut centers = CenterSet::new(base.dim())?;
    let first = draw_proportional(&points.weights, points.total_weight(), rng);
    centers.push_trusted(base.point(first));

    let mut nearest: Vec<f64> = base.iter().map(|x| sq_dist_raw(x, base.point(first))).collect();
    let mut mass: Vec<f64> = nearest.iter().zip(&points.weights).map(|(d, w)| d * w).collect();
    while centers.len() < k {
        let total = compensated_sum(mass.iter().copied());
        if !(total > 0.0) {
            // Every point coincides with a chosen center.
            break;
        }
        let pick = draw_proportional(&mass, total, rng);
        let c = base.point(pick);
        centers.push_trusted(c);
        for (i, x) in base.iter().enumerate() {
            let d = sq_dist_raw(x, c);
            if d < nearest[i] {
                nearest[i] = d;
                mass[i] = d * points.weights[i];
            }
        }
    }
    Ok(centers)
}

struct Assignment {
    labels: Vec<usize>,
    /// Weighted squared distance of each point to its center.
    contrib: Vec<f64>,
    cost: f64,
}

fn assign_weighted(points: &WeightedDataset, centers: &CenterSet) -> Assignment {
    let mut labels = Vec::with_capacity(points.len());
    let mut contrib = Vec::with_capacity(points.len());
    for (x, w) in points.base.iter().zip(&points.weights) {
        let (j, d) = nearest_raw(x, centers);
        labels.push(j);
        contrib.push(w * d);
    }
    let cost = compensated_sum(contrib.iter().copied());
    Assignment { labels, contrib, cost }
}

/// One Lloyd update. Centers of empty clusters move to the points with the
/// largest cost contribution; when no such point is left they are dropped.
fn update(points: &WeightedDataset, centers: &CenterSet, current: &Assignment, mode: Mode) -> CenterSet {
    let k = centers.len();
    let dim = points.base.dim();
    let mut next = centers.clone();
    let mut mass = vec![0.0; k];
    for (&j, &w) in current.labels.iter().zip(&points.weights) {
        mass[j] += w;
    }

    match mode {
        Mode::Centroid => {
            let mut sums = vec![0.0; k * dim];
            for ((x, &j), &w) in points.base.iter().zip(&current.labels).zip(&points.weights) {
                for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                    *s += w * v;
                }
            }
            for j in (0..k).filter(|&j| mass[j] > 0.0) {
                for (c, s) in next.point_mut(j).iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *c = s / mass[j];
                }
            }
        }
        Mode::Medoid => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (i, &j) in current.labels.iter().enumerate() {
                members[j].push(i);
            }
            for (j, cluster) in members.iter().enumerate().filter(|(_, m)| !m.is_empty()) {
                let within = |c: &[f64]| {
                    compensated_sum(
                        cluster
                            .iter()
                            .map(|&i| points.weights[i] * sq_dist_raw(points.base.point(i), c)),
                    )
                };
                let mut best = (None, within(centers.point(j)));
                for &candidate in cluster {
                    let cost = within(points.base.point(candidate));
                    if cost < best.1 {
                        best = (Some(candidate), cost);
                    }
                }
                if let Some(i) = best.0 {
                    next.point_mut(j).copy_from_slice(points.base.point(i));
                }
            }
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&j| mass[j] == 0.0).collect();
    if empty.is_empty() {
        return next;
    }
    let mut contrib = current.contrib.clone();
    let mut dropped = Vec::new();
    for j in empty {
        let (i, &c) = contrib
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty input");
        if c > 0.0 {
            next.point_mut(j).copy_from_slice(points.base.point(i));
            contrib[i] = 0.0;
        } else {
            dropped.push(j);
        }
    }
    if dropped.is_empty() {
        return next;
    }
    let mut kept = CenterSet::new(dim).expect("positive dimension");
    for (j, c) in next.iter().enumerate() {
        if !dropped.contains(&j) {
            kept.push_trusted(c);
        }
    }
    kept
}

/// Lloyd iterations from `init` until the relative improvement falls below the
/// tolerance or the iteration cap is hit. The cost never increases.
pub fn lloyd(points: &WeightedDataset, init: CenterSet, cfg: &BlackBoxConfig) -> Result<Fit> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if init.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if init.dim() != points.base.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.base.dim(),
            found: init.dim(),
        });
    }
    let mut centers = init;
    let mut current = assign_weighted(points, &centers);
    let mut trace = vec![current.cost];
    let mut iterations = 0;
    while iterations < cfg.max_lloyd_iters && current.cost > 0.0 {
        let candidate = update(points, &centers, &current, cfg.mode);
        let next = assign_weighted(points, &candidate);
        iterations += 1;
        if next.cost > current.cost {
            break;
        }
        let improvement = current.cost - next.cost;
        let converged = improvement <= cfg.convergence_tol * current.cost;
        centers = candidate;
        current = next;
        trace.push(current.cost);
        if converged {
            break;
        }
    }
    Ok(Fit {
        centers,
        cost: current.cost,
        iterations,
        trace,
    })
}

/// Best of `n_init` seeded Lloyd runs by weighted cost; the first run wins ties.
pub fn cluster<R: Rng + ?Sized>(points: &WeightedDataset, k: usize, cfg: &BlackBoxConfig, rng: &mut R) -> Result<Fit> {
    cfg.validate()?;
    let mut best: Option<Fit> = None;
    for _ in 0..cfg.n_init {
        let init = kmeanspp_seed(points, k, rng)?;
        let fit = lloyd(points, init, cfg)?;
        if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
            best = Some(fit);
        }
        if best.as_ref().is_some_and(|b| b.cost == 0.0) {
            break;
        }
    }
    Ok(best.expect("n_init >= 1"))
}

pub const BRUTE_FORCE_MAX: usize = 20;

/// Exact minimum cost over center sets of size at most `k` drawn from the input points.
pub fn brute_force_optimal(points: &Dataset, k: usize) -> Result<(CenterSet, f64)> {
    brute_force_optimal_weighted(&WeightedDataset::uniform(points.clone()), k)
}

pub fn brute_force_optimal_weighted(points: &WeightedDataset, k: usize) -> Result<(CenterSet, f64)> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            len: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    // Adding centers never raises the cost, so subsets of exactly min(k, n) suffice.
    let size = k.min(n);
    let base = &points.base;
    let pair: Vec<f64> = (0..n * n)
        .map(|ij| sq_dist_raw(base.point(ij / n), base.point(ij % n)))
        .collect();
    let mut chosen: Vec<usize> = (0..size).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let cost = compensated_sum((0..n).map(|i| {
            let d = chosen.iter().map(|&c| pair[i * n + c]).fold(f64::INFINITY, f64::min);
            points.weights[i] * d
        }));
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((chosen.clone(), cost));
        }
        // Next combination in lexicographic order.
        let Some(pos) = (0..size).rev().find(|&p| chosen[p] < n - size + p) else {
            break;
        };
        chosen[pos] += 1;
        for p in pos + 1..size {
            chosen[p] = chosen[p - 1] + 1;
        }
    }
    let (indices, cost) = best.expect("at least one subset");
    Ok((base.select(&indices).into(), cost))
}
