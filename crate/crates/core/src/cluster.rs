//! Unsupervised clustering demodulator: Lloyd k-means with deterministic
//! farthest-point seeding, and cluster-count selection by the jump of the
//! inverse distortion.

use crate::bits::BitWord;
use crate::error::{Error, Result};
use crate::modem::IQSymbol;
use crate::num::Real;

/// Default upper bound on the cluster count scanned by [`jump_select_k`].
pub const DEFAULT_MAX_CLUSTERS: usize = 20;

/// Default number of Lloyd rounds per k-means run.
pub const DEFAULT_KMEANS_ITERS: usize = 50;

/// A converged (or iteration-capped) k-means clustering.
#[derive(Clone, Debug)]
pub struct Clustering<R> {
    pub k: usize,
    pub means: Vec<IQSymbol<R>>,
    /// Sample index to cluster index; every sample is assigned to its nearest
    /// mean.
    pub assignment: Vec<usize>,
}

/// Distortion per cluster count and the derived jump values.
#[derive(Clone, Debug)]
pub struct DistortionCurve<R> {
    /// `distortion[k-1]` is the minimum average distortion of the k-clustering.
    pub distortion: Vec<R>,
    /// `jump[k-1] = d(k)^-1 - d(k-1)^-1`, with `d(0)^-1` taken as zero.
    pub jump: Vec<R>,
}

/// A clustering labeled with bit words, usable as a demodulator.
#[derive(Clone, Debug)]
pub struct LabeledDemod<R> {
    pub means: Vec<IQSymbol<R>>,
    pub labels: Vec<BitWord>,
}

fn nearest_mean<R: Real>(p: &IQSymbol<R>, means: &[IQSymbol<R>]) -> usize {
    let mut best = 0;
    let mut best_d = p.dist_sq(&means[0]);
    for (idx, m) in means.iter().enumerate().skip(1) {
        let d = p.dist_sq(m);
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    best
}

/// Deterministic farthest-point seeding.
///
/// The first mean is the sample of maximal energy; every further mean is the
/// point that maximizes the minimum distance to the already chosen ones.
pub fn farthest_point_init<R: Real>(points: &[IQSymbol<R>], k: usize) -> Result<Vec<IQSymbol<R>>> {
    if points.len() < k {
        return Err(Error::invalid(format!(
            "cannot seed {k} means from {} points",
            points.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    let mut chosen = Vec::with_capacity(k);
    let first = points
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.energy().partial_cmp(&b.energy()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    chosen.push(points[first]);
    let mut min_dist: Vec<R> = points.iter().map(|p| p.dist_sq(&points[first])).collect();
    while chosen.len() < k {
        let next = (0..points.len())
            .max_by(|&a, &b| min_dist[a].partial_cmp(&min_dist[b]).unwrap())
            .unwrap();
        chosen.push(points[next]);
        for (d, p) in min_dist.iter_mut().zip(points) {
            let nd = p.dist_sq(&points[next]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(chosen)
}

/// Runs Lloyd's algorithm from farthest-point seeds for up to `iters`
/// assign/update rounds, exiting early once assignments stop changing.
///
/// Empty clusters are re-seeded at the point currently farthest from its
/// assigned mean, keeping k constant.
pub fn kmeans_lloyd<R: Real>(
    points: &[IQSymbol<R>],
    k: usize,
    iters: usize,
) -> Result<Clustering<R>> {
    let (clustering, _) = kmeans_lloyd_trace(points, k, iters)?;
    Ok(clustering)
}

/// Like [`kmeans_lloyd`] but also returns the distortion after every round,
/// which is non-increasing over the run.
pub fn kmeans_lloyd_trace<R: Real>(
    points: &[IQSymbol<R>],
    k: usize,
    iters: usize,
) -> Result<(Clustering<R>, Vec<R>)> {
    let mut means = farthest_point_init(points, k)?;
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest_mean(p, &means)).collect();
    let mut trace = Vec::new();
    for _ in 0..iters {
        // Update step: means become centroids of their members.
        let mut sums = vec![(R::zero(), R::zero(), 0usize); k];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c].0 += p.i;
            sums[c].1 += p.q;
            sums[c].2 += 1;
        }
        for (c, sum) in sums.iter().enumerate() {
            if sum.2 > 0 {
                let count = R::from_f64_lossy(sum.2 as f64);
                means[c] = IQSymbol::new(sum.0 / count, sum.1 / count);
            }
        }
        // Re-seed empty clusters at the point farthest from its assigned mean.
        for c in 0..k {
            if sums[c].2 == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = points[a].dist_sq(&means[assignment[a]]);
                        let db = points[b].dist_sq(&means[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                means[c] = points[far];
                assignment[far] = c;
            }
        }
        let new_assignment: Vec<usize> =
            points.iter().map(|p| nearest_mean(p, &means)).collect();
        let changed = new_assignment != assignment;
        assignment = new_assignment;
        trace.push(distortion(points, &means, &assignment));
        if !changed {
            break;
        }
    }
    Ok((
        Clustering {
            k,
            means,
            assignment,
        },
        trace,
    ))
}

fn distortion<R: Real>(points: &[IQSymbol<R>], means: &[IQSymbol<R>], assignment: &[usize]) -> R {
    let sum: R = points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| p.dist_sq(&means[c]))
        .sum();
    sum / (R::from_f64_lossy(2.0) * R::from_f64_lossy(points.len() as f64))
}

/// Half the mean squared distance of each sample to its assigned mean.
pub fn min_avg_distortion<R: Real>(clustering: &Clustering<R>, points: &[IQSymbol<R>]) -> Result<R> {
    if points.is_empty() {
        return Err(Error::invalid("distortion of an empty sample set"));
    }
    if points.len() != clustering.assignment.len() {
        return Err(Error::invalid("assignment does not cover the sample set"));
    }
    Ok(distortion(points, &clustering.means, &clustering.assignment))
}

/// Computes the distortion curve for `k = 1..=n_max` and returns the cluster
/// count maximizing the jump `d(k)^-1 - d(k-1)^-1`.
///
/// Ties break towards the smallest k. A degenerate zero distortion before
/// `n_max` means the data is perfectly explained and that k is returned
/// immediately.
pub fn jump_select_k<R: Real>(
    points: &[IQSymbol<R>],
    n_max: usize,
    kmeans_iters: usize,
) -> Result<(usize, DistortionCurve<R>)> {
    if points.len() < n_max {
        return Err(Error::invalid(format!(
            "need at least {n_max} points, got {}",
            points.len()
        )));
    }
    let mut curve = DistortionCurve {
        distortion: Vec::with_capacity(n_max),
        jump: Vec::with_capacity(n_max),
    };
    let mut best_k = 1;
    let mut best_jump = R::neg_infinity();
    let mut prev_inv = R::zero(); // d(0)^-1 := 0
    for k in 1..=n_max {
        let clustering = kmeans_lloyd(points, k, kmeans_iters)?;
        let d = min_avg_distortion(&clustering, points)?;
        curve.distortion.push(d);
        if d == R::zero() {
            curve.jump.push(R::infinity());
            return Ok((k, curve));
        }
        let inv = d.recip();
        let jump = inv - prev_inv;
        curve.jump.push(jump);
        if jump > best_jump {
            best_jump = jump;
            best_k = k;
        }
        prev_inv = inv;
    }
    Ok((best_k, curve))
}

/// Labels every cluster with the modal bit word among its member samples.
///
/// Modal ties break towards the smallest word; a cluster with no members
/// takes the label of the nearest non-empty cluster.
pub fn label_clusters<R: Real>(
    clustering: &Clustering<R>,
    preamble_words: &[BitWord],
) -> Result<LabeledDemod<R>> {
    if preamble_words.len() != clustering.assignment.len() {
        return Err(Error::invalid(
            "clustering assignment does not cover the preamble",
        ));
    }
    let k = clustering.k;
    let n = preamble_words.first().map(|w| w.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::invalid("empty preamble"));
    }
    let mut counts = vec![vec![0usize; 1 << n]; k];
    for (&c, w) in clustering.assignment.iter().zip(preamble_words) {
        counts[c][w.index()] += 1;
    }
    let mut labels: Vec<Option<BitWord>> = counts
        .iter()
        .map(|hist| {
            let total: usize = hist.iter().sum();
            if total == 0 {
                return None;
            }
            let best = hist
                .iter()
                .enumerate()
                .max_by_key(|&(idx, &c)| (c, std::cmp::Reverse(idx)))
                .map(|(idx, _)| idx)
                .unwrap();
            Some(BitWord::new(best, n))
        })
        .collect();
    for c in 0..k {
        if labels[c].is_none() {
            let nearest = (0..k)
                .filter(|&other| labels[other].is_some())
                .min_by(|&a, &b| {
                    let da = clustering.means[c].dist_sq(&clustering.means[a]);
                    let db = clustering.means[c].dist_sq(&clustering.means[b]);
                    da.partial_cmp(&db).unwrap()
                })
                .ok_or_else(|| Error::invalid("all clusters empty"))?;
            labels[c] = labels[nearest];
        }
    }
    Ok(LabeledDemod {
        means: clustering.means.clone(),
        labels: labels.into_iter().map(|l| l.unwrap()).collect(),
    })
}

impl<R: Real> LabeledDemod<R> {
    /// Demodulates by nearest labeled mean.
    pub fn demod(&self, s: &IQSymbol<R>) -> BitWord {
        self.labels[nearest_mean(s, &self.means)]
    }

    /// Serializes in the constellation dump format (`word,i,q`, sorted by
    /// word). Several clusters may carry the same word.
    pub fn to_dump_string(&self) -> String {
        use std::fmt::Write as _;
        let mut rows: Vec<(BitWord, IQSymbol<R>)> = self
            .labels
            .iter()
            .copied()
            .zip(self.means.iter().copied())
            .collect();
        rows.sort_by_key(|(w, _)| *w);
        let mut out = String::new();
        for (w, p) in rows {
            let _ = writeln!(
                out,
                "{w},{:.12e},{:.12e}",
                p.i.to_f64_lossy(),
                p.q.to_f64_lossy()
            );
        }
        out
    }
}
