//! K-means over user profile embeddings and cross-cluster representative
//! selection.
//!
//! Determinism contract: identical (points, k, seed, max_iters, tol)
//! produce a bit-for-bit identical model. All reductions run in fixed
//! point order, distance ties resolve to the lowest index, and the only
//! randomness is a seeded SplitMix64 stream.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbeddingVector, UserProfileEmbedding};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need at least k={k} points, got {points}")]
    TooFewPoints { k: usize, points: usize },
    #[error("point {index} has dim {actual}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("user {0} is not assigned in the model")]
    UnknownUser(String),
    #[error("only {available} users outside the target's cluster, need {requested}")]
    InsufficientUsers { requested: usize, available: usize },
    #[error("no profile embedding supplied for assigned user {0}")]
    MissingPoint(String),
    #[error("k must be >= 1")]
    ZeroK,
}

/// Small deterministic PRNG (SplitMix64), stable across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Fitted k-means model.
///
/// `inertia_trace` records the objective after each assignment step of the
/// fit (diagnostic only, not serialized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<EmbeddingVector>,
    pub assignment: BTreeMap<String, usize>,
    pub inertia: f64,
    #[serde(skip)]
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// Fit parameters; `restarts` applies to [`kmeans_fit_restarts`] only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KmeansParams {
    fn default() -> Self {
        KmeansParams {
            k: 5,
            seed: 0,
            max_iters: 100,
            tol: 1e-9,
            restarts: 10,
        }
    }
}

fn validate(points: &[UserProfileEmbedding], k: usize) -> Result<usize, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints {
            k,
            points: points.len(),
        });
    }
    let dim = points[0].vector.dim();
    for (index, p) in points.iter().enumerate() {
        if p.vector.dim() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                actual: p.vector.dim(),
            });
        }
    }
    Ok(dim)
}

/// k-means++ seeding: D^2-weighted draws from a seeded stream.
fn plus_plus_init(
    points: &[UserProfileEmbedding],
    k: usize,
    rng: &mut SplitMix64,
) -> Vec<EmbeddingVector> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.next_range(n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| p.vector.squared_distance(&points[chosen[0]].vector))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target < 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Floating slack can leave target >= 0 after the loop.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1))
        } else {
            // All remaining distances zero (duplicate points): first unchosen.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = p.vector.squared_distance(&points[next].vector);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.iter().map(|&i| points[i].vector.clone()).collect()
}

/// Nearest centroid by squared Euclidean distance, ties to lowest index.
fn nearest(centroids: &[EmbeddingVector], point: &EmbeddingVector) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = centroid.squared_distance(point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign_all(points: &[UserProfileEmbedding], centroids: &[EmbeddingVector]) -> Vec<usize> {
    points
        .iter()
        .map(|p| nearest(centroids, &p.vector).0)
        .collect()
}

/// Reassign the point farthest from its centroid (among clusters that can
/// spare one) to each empty cluster, ascending cluster index.
fn repair_empty_clusters(
    points: &[UserProfileEmbedding],
    centroids: &[EmbeddingVector],
    assignment: &mut [usize],
) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut donor: Option<(usize, f64)> = None;
        for (i, &a) in assignment.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = centroids[a].squared_distance(&points[i].vector);
            let better = match donor {
                None => true,
                Some((_, best)) => d > best,
            };
            if better {
                donor = Some((i, d));
            }
        }
        if let Some((i, _)) = donor {
            sizes[assignment[i]] -= 1;
            assignment[i] = empty;
            sizes[empty] += 1;
        }
    }
}

fn total_inertia(
    points: &[UserProfileEmbedding],
    centroids: &[EmbeddingVector],
    assignment: &[usize],
) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| centroids[a].squared_distance(&p.vector))
        .sum()
}

fn recompute_centroids(
    points: &[UserProfileEmbedding],
    assignment: &[usize],
    k: usize,
    dim: usize,
    previous: &[EmbeddingVector],
) -> Vec<EmbeddingVector> {
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (acc, v) in sums[a].iter_mut().zip(&p.vector.values) {
            *acc += v;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(c, mut sum)| {
            if counts[c] == 0 {
                previous[c].clone()
            } else {
                for v in &mut sum {
                    *v /= counts[c] as f64;
                }
                EmbeddingVector { values: sum }
            }
        })
        .collect()
}

/// Lloyd's algorithm with k-means++ initialization.
///
/// Stops when the maximum centroid movement (L2) drops below `tol` or
/// after `max_iters` iterations, then runs a final assignment pass so the
/// stored assignment is nearest-centroid consistent.
pub fn kmeans_fit(
    points: &[UserProfileEmbedding],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel, ClusterError> {
    let dim = validate(points, k)?;
    let mut rng = SplitMix64::new(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut trace = Vec::new();

    for _ in 0..max_iters {
        let mut assignment = assign_all(points, &centroids);
        repair_empty_clusters(points, &centroids, &mut assignment);
        trace.push(total_inertia(points, &centroids, &assignment));
        let updated = recompute_centroids(points, &assignment, k, dim, &centroids);
        let movement = centroids
            .iter()
            .zip(&updated)
            .map(|(old, new)| old.squared_distance(new).sqrt())
            .fold(0.0f64, f64::max);
        centroids = updated;
        if movement < tol {
            break;
        }
    }

    // Final pass: the stored assignment must be a pure nearest-centroid
    // assignment. Empty clusters are filled by recentering them on the
    // farthest donatable point and reassigning; with exact-duplicate
    // points an empty cluster can be unfixable, so attempts are bounded.
    let mut assignment = assign_all(points, &centroids);
    for _ in 0..=2 * k {
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, &a) in assignment.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = centroids[a].squared_distance(&points[i].vector);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let Some((moved, _)) = donor else { break };
        centroids[empty] = points[moved].vector.clone();
        assignment = assign_all(points, &centroids);
    }
    let inertia = total_inertia(points, &centroids, &assignment);
    trace.push(inertia);

    let assignment_map = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| (p.user_id.clone(), a))
        .collect();
    Ok(ClusterModel {
        k,
        seed,
        centroids,
        assignment: assignment_map,
        inertia,
        inertia_trace: trace,
    })
}

/// Multi-restart wrapper: fits `restarts` times with seeds derived from
/// `params.seed` and keeps the lowest-inertia model (earliest on ties).
pub fn kmeans_fit_restarts(
    points: &[UserProfileEmbedding],
    params: &KmeansParams,
) -> Result<ClusterModel, ClusterError> {
    let restarts = params.restarts.max(1);
    let mut master = SplitMix64::new(params.seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..restarts {
        let restart_seed = master.next_u64();
        let model = kmeans_fit(points, params.k, restart_seed, params.max_iters, params.tol)?;
        let improves = match &best {
            None => true,
            Some(b) => model.inertia < b.inertia,
        };
        if improves {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// The comparison users selected for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub target_user: String,
    pub members: Vec<String>,
    pub m: usize,
}

/// Pick `m` representatives from clusters other than the target's.
///
/// Members are drawn round-robin across foreign clusters in ascending
/// cluster-index order; within each cluster the not-yet-chosen user whose
/// profile embedding is closest to that cluster's centroid goes first
/// (ties by user_id). The rule is fully deterministic; `seed` is accepted
/// for signature symmetry with sampling-based policies and is unused.
pub fn select_representatives(
    model: &ClusterModel,
    points: &[UserProfileEmbedding],
    target_user: &str,
    m: usize,
    _seed: u64,
) -> Result<RepresentativeSet, ClusterError> {
    let target_cluster = *model
        .assignment
        .get(target_user)
        .ok_or_else(|| ClusterError::UnknownUser(target_user.to_string()))?;

    let by_user: BTreeMap<&str, &EmbeddingVector> = points
        .iter()
        .map(|p| (p.user_id.as_str(), &p.vector))
        .collect();

    // Foreign-cluster queues ordered by centroid distance, then user_id.
    let mut queues: BTreeMap<usize, Vec<(f64, &str)>> = BTreeMap::new();
    for (user, &cluster) in &model.assignment {
        if cluster == target_cluster {
            continue;
        }
        let vector = by_user
            .get(user.as_str())
            .ok_or_else(|| ClusterError::MissingPoint(user.clone()))?;
        let d = model.centroids[cluster].squared_distance(vector);
        queues.entry(cluster).or_default().push((d, user.as_str()));
    }
    let available: usize = queues.values().map(Vec::len).sum();
    if available < m {
        return Err(ClusterError::InsufficientUsers {
            requested: m,
            available,
        });
    }
    for queue in queues.values_mut() {
        queue.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(b.1))
        });
    }

    let mut members = Vec::with_capacity(m);
    let mut cursors: BTreeMap<usize, usize> = queues.keys().map(|&c| (c, 0)).collect();
    while members.len() < m {
        let mut advanced = false;
        for (&cluster, queue) in &queues {
            if members.len() == m {
                break;
            }
            let cursor = cursors.get_mut(&cluster).expect("cursor exists");
            if *cursor < queue.len() {
                members.push(queue[*cursor].1.to_string());
                *cursor += 1;
                advanced = true;
            }
        }
        debug_assert!(advanced, "availability checked above");
    }

    Ok(RepresentativeSet {
        target_user: target_user.to_string(),
        members,
        m,
    })
}
