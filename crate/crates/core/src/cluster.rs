//! Embedding-based key-frame baseline: standardise, reduce with PCA, cluster
//! with K-means (optionally choosing K by the elbow rule) and keep the medoid
//! frame of every cluster.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    Precomputed,
    PixelBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEmbedding {
    pub frame_index: usize,
    pub vector: Vec<f64>,
    pub source: EmbeddingSource,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("frame {frame_index}: embedding has {got} dimensions, expected {expected}")]
    DimensionMismatch { frame_index: usize, expected: usize, got: usize },
    #[error("frame {frame_index}: embedding has a non-finite entry")]
    NonFinite { frame_index: usize },
    #[error("k={k} exceeds the {frames} available frames")]
    KTooLarge { k: usize, frames: usize },
    #[error("invalid cluster config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    AutoElbow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: KChoice,
    pub k_max: usize,
    pub iterations: usize,
    pub seed: u64,
    pub pca_variance: f64,
    /// k-means++ restarts per K; the lowest inertia wins.
    pub restarts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: KChoice::AutoElbow,
            k_max: 20,
            iterations: 100,
            seed: 0,
            pca_variance: 0.95,
            restarts: 5,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k_max < 2 {
            return Err(ClusterError::InvalidConfig("k_max must be at least 2"));
        }
        if let KChoice::Fixed(k) = self.k {
            if k == 0 || k > self.k_max {
                return Err(ClusterError::InvalidConfig("k must be in 1..=k_max"));
            }
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(ClusterError::InvalidConfig("iterations and restarts must be positive"));
        }
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return Err(ClusterError::InvalidConfig("pca_variance must be in (0, 1]"));
        }
        Ok(())
    }
}

fn check_shape(embs: &[FrameEmbedding]) -> Result<usize, ClusterError> {
    let dim = embs.first().map_or(0, |e| e.vector.len());
    for e in embs {
        if e.vector.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                frame_index: e.frame_index,
                expected: dim,
                got: e.vector.len(),
            });
        }
        if e.vector.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite {
                frame_index: e.frame_index,
            });
        }
    }
    Ok(dim)
}

/// Per-dimension standardisation with the population variance. Constant
/// dimensions become zero.
pub fn normalize_embeddings(embs: &[FrameEmbedding]) -> Result<Vec<FrameEmbedding>, ClusterError> {
    if embs.len() < 2 {
        return Err(ClusterError::TooFewFrames {
            needed: 2,
            got: embs.len(),
        });
    }
    let dim = check_shape(embs)?;
    let n = embs.len() as f64;
    let mut mean = vec![0.0; dim];
    for e in embs {
        for (m, v) in mean.iter_mut().zip(&e.vector) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for e in embs {
        for ((s, v), m) in var.iter_mut().zip(&e.vector).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd: Vec<f64> = var.iter().map(|s| libm::sqrt(s / n)).collect();
    Ok(embs
        .iter()
        .map(|e| FrameEmbedding {
            frame_index: e.frame_index,
            source: e.source,
            vector: e
                .vector
                .iter()
                .zip(&mean)
                .zip(&sd)
                .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
                .collect(),
        })
        .collect())
}

/// Fitted principal-component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm principal axes, strongest first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    /// Keeps the fewest leading components whose cumulative explained
    /// variance reaches `retained_variance`.
    pub fn fit(rows: &[Vec<f64>], retained_variance: f64) -> Result<Self, ClusterError> {
        if rows.is_empty() {
            return Err(ClusterError::TooFewFrames { needed: 1, got: 0 });
        }
        let n = rows.len();
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();

        // Eigen-decompose whichever of the d x d covariance or the n x n Gram
        // matrix is smaller; both share the non-zero spectrum.
        let (values, axes) = if n < d {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                    g[i * n + j] = dot / n as f64;
                    g[j * n + i] = dot / n as f64;
                }
            }
            let eig = symmetric_eigen(&g, n);
            let mut axes = Vec::new();
            for (j, &lambda) in eig.values.iter().enumerate() {
                let u = eig.vector(j);
                let mut v = vec![0.0; d];
                for (ui, row) in u.iter().zip(&centered) {
                    for (vk, x) in v.iter_mut().zip(row) {
                        *vk += ui * x;
                    }
                }
                let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
                if lambda > 0.0 && norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                axes.push(v);
            }
            (eig.values, axes)
        } else {
            let mut c = vec![0.0; d * d];
            for row in &centered {
                for i in 0..d {
                    for j in 0..=i {
                        c[i * d + j] += row[i] * row[j];
                    }
                }
            }
            for i in 0..d {
                for j in 0..=i {
                    let v = c[i * d + j] / n as f64;
                    c[i * d + j] = v;
                    c[j * d + i] = v;
                }
            }
            let eig = symmetric_eigen(&c, d);
            let axes = (0..d).map(|j| eig.vector(j)).collect();
            (eig.values, axes)
        };

        let positive: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = positive.iter().sum();
        let max_components = (n.saturating_sub(1)).min(d).max(1);
        let tiny = total * 1e-12;
        let mut keep = 1;
        if total > 0.0 {
            let mut cum = 0.0;
            keep = 0;
            for v in &positive {
                if keep >= max_components || *v <= tiny {
                    break;
                }
                cum += v;
                keep += 1;
                if cum / total >= retained_variance - 1e-12 {
                    break;
                }
            }
            keep = keep.max(1);
        }
        let mut components: Vec<Vec<f64>> = axes.into_iter().take(keep).collect();
        if total == 0.0 {
            // Degenerate input: one arbitrary axis, every projection is zero.
            let mut axis = vec![0.0; d];
            if d > 0 {
                axis[0] = 1.0;
            }
            components = vec![axis];
        }
        Ok(Self {
            mean,
            components,
            explained_variance: positive.into_iter().take(keep).collect(),
            total_variance: total,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(row).zip(&self.mean).map(|((a, x), m)| a * (x - m)).sum())
            .collect()
    }

    pub fn inverse_transform(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, z) in self.components.iter().zip(coords) {
            for (o, a) in out.iter_mut().zip(c) {
                *o += z * a;
            }
        }
        out
    }
}

pub fn pca_reduce(embs: &[FrameEmbedding], retained_variance: f64) -> Result<(Vec<FrameEmbedding>, Pca), ClusterError> {
    check_shape(embs)?;
    let rows: Vec<Vec<f64>> = embs.iter().map(|e| e.vector.clone()).collect();
    let pca = Pca::fit(&rows, retained_variance)?;
    let reduced = embs
        .iter()
        .map(|e| FrameEmbedding {
            frame_index: e.frame_index,
            source: e.source,
            vector: pca.transform(&e.vector),
        })
        .collect();
    Ok((reduced, pca))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn init_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (dd, p) in d2.iter_mut().zip(points) {
            *dd = dd.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn recompute(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// One k-means++ seeded Lloyd run.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iterations: usize, rng: &mut ChaCha8Rng) -> Result<KMeansFit, ClusterError> {
    let n = points.len();
    if n == 0 {
        return Err(ClusterError::TooFewFrames { needed: 1, got: 0 });
    }
    if k == 0 || k > n {
        return Err(ClusterError::KTooLarge { k, frames: n });
    }
    let dim = points[0].len();
    let mut centroids = init_plus_plus(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iterations.max(1) {
        iterations += 1;
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        let changed = next != assignments;
        assignments = next;
        let (mut c, mut counts) = recompute(points, &assignments, k, dim);
        // Refill empty clusters with the point farthest from its centroid,
        // taken from a cluster that can spare it.
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let donor = points
                .iter()
                .enumerate()
                .filter(|(i, _)| counts[assignments[*i]] > 1)
                .map(|(i, p)| (i, sq_dist(p, &c[assignments[i]])))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = donor {
                assignments[i] = empty;
                let recomputed = recompute(points, &assignments, k, dim);
                c = recomputed.0;
                counts = recomputed.1;
            }
        }
        centroids = c;
        let inertia: f64 = points.iter().zip(&assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
        if let Some(&prev) = history.last() {
            debug_assert!(inertia <= prev + 1e-9 * prev.max(1.0), "inertia rose: {prev} -> {inertia}");
        }
        history.push(inertia);
        if !changed {
            break;
        }
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        inertia: *history.last().unwrap_or(&0.0),
        inertia_history: history,
        iterations,
    })
}

/// Lowest-inertia fit over `restarts` seeded runs.
pub fn kmeans_best_of(
    points: &[Vec<f64>],
    k: usize,
    max_iterations: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KMeansFit, ClusterError> {
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let mut run_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let fit = kmeans(points, k, max_iterations, &mut run_rng)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Elbow of an inertia curve (`curve[i]` is the inertia at `k = i + 1`): the
/// point farthest from the chord joining the first and last points after
/// both axes are min-max normalised. Ties go to the smaller k.
pub fn elbow_k(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return 1;
    }
    let lo = curve.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return 1;
    }
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 / (n - 1) as f64, (v - lo) / (hi - lo)))
        .collect();
    let (x0, y0) = pts[0];
    let (x1, y1) = pts[n - 1];
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len = libm::hypot(dx, dy);
    let mut best = (0usize, 0.0f64);
    for (i, (x, y)) in pts.iter().enumerate() {
        let dist = (dy * (x - x0) - dx * (y - y0)).abs() / len;
        if dist > best.1 + 1e-12 {
            best = (i, dist);
        }
    }
    best.0 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k_used: usize,
    /// Medoid frame of every non-empty cluster, ascending.
    pub keyframes: Vec<usize>,
    pub assignments: Vec<usize>,
    /// Best-of-restarts inertia for k = 1..=k_max when K was chosen automatically.
    pub inertia_curve: Option<Vec<f64>>,
}

/// K-means over already prepared embeddings; each cluster is represented by
/// the member frame nearest its centroid.
pub fn kmeans_keyframes(embs: &[FrameEmbedding], cfg: &ClusterConfig) -> Result<ClusterResult, ClusterError> {
    cfg.validate()?;
    if embs.is_empty() {
        return Err(ClusterError::TooFewFrames { needed: 1, got: 0 });
    }
    check_shape(embs)?;
    let points: Vec<Vec<f64>> = embs.iter().map(|e| e.vector.clone()).collect();
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (fit, curve) = match cfg.k {
        KChoice::Fixed(k) => {
            if k > n {
                return Err(ClusterError::KTooLarge { k, frames: n });
            }
            (kmeans_best_of(&points, k, cfg.iterations, cfg.restarts, &mut rng)?, None)
        }
        KChoice::AutoElbow => {
            let k_max = cfg.k_max.min(n);
            let mut fits = Vec::with_capacity(k_max);
            let mut curve = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                let fit = kmeans_best_of(&points, k, cfg.iterations, cfg.restarts, &mut rng)?;
                // A larger k can always match a smaller one's inertia.
                let v = curve.last().map_or(fit.inertia, |&prev: &f64| fit.inertia.min(prev));
                curve.push(v);
                fits.push(fit);
            }
            let k = elbow_k(&curve);
            (fits.swap_remove(k - 1), Some(curve))
        }
    };
    let k_used = fit.centroids.len();
    let mut keyframes = Vec::with_capacity(k_used);
    for (c, centroid) in fit.centroids.iter().enumerate() {
        let medoid = points
            .iter()
            .enumerate()
            .filter(|(i, _)| fit.assignments[*i] == c)
            .map(|(i, p)| (i, sq_dist(p, centroid)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((i, _)) = medoid {
            keyframes.push(embs[i].frame_index);
        }
    }
    keyframes.sort_unstable();
    keyframes.dedup();
    Ok(ClusterResult {
        k_used,
        keyframes,
        assignments: fit.assignments,
        inertia_curve: curve,
    })
}

/// Full chain: standardise, PCA, K-means, medoids.
pub fn cluster_keyframes(embs: &[FrameEmbedding], cfg: &ClusterConfig) -> Result<ClusterResult, ClusterError> {
    cfg.validate()?;
    if embs.len() == 1 {
        return Ok(ClusterResult {
            k_used: 1,
            keyframes: vec![embs[0].frame_index],
            assignments: vec![0],
            inertia_curve: None,
        });
    }
    let normalized = normalize_embeddings(embs)?;
    let (reduced, _) = pca_reduce(&normalized, cfg.pca_variance)?;
    kmeans_keyframes(&reduced, cfg)
}

/// Cosine distance between consecutive frames; zero vectors count as distance 1
/// from anything but another zero vector.
pub fn consecutive_cosine_distances(embs: &[FrameEmbedding]) -> Vec<f64> {
    embs.windows(2)
        .map(|w| {
            let (a, b) = (&w[0].vector, &w[1].vector);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
            let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
            match (na > 0.0, nb > 0.0) {
                (true, true) => 1.0 - dot / (na * nb),
                (false, false) => 0.0,
                _ => 1.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn embs(rows: &[Vec<f64>]) -> Vec<FrameEmbedding> {
        rows.iter()
            .enumerate()
            .map(|(i, v)| FrameEmbedding {
                frame_index: i,
                vector: v.clone(),
                source: EmbeddingSource::Precomputed,
            })
            .collect()
    }

    #[test]
    fn two_point_standardisation() {
        let out = normalize_embeddings(&embs(&[vec![1.0, 5.0], vec![3.0, 5.0]])).unwrap();
        assert_eq!(out[0].vector, vec![-1.0, 0.0]);
        assert_eq!(out[1].vector, vec![1.0, 0.0]);
        assert!(matches!(
            normalize_embeddings(&embs(&[vec![1.0]])),
            Err(ClusterError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn normalised_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..4).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let out = normalize_embeddings(&embs(&rows)).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = out.iter().map(|e| e.vector[j]).collect();
            let mean = col.iter().sum::<f64>() / 10.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 10.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let e = embs(&[vec![1.0, 2.0], vec![1.0]]);
        assert!(matches!(
            normalize_embeddings(&e),
            Err(ClusterError::DimensionMismatch { frame_index: 1, .. })
        ));
    }

    #[test]
    fn pca_rank_one_line() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64;
                vec![1.0 + t, 2.0 - 2.0 * t, 0.5 * t]
            })
            .collect();
        let pca = Pca::fit(&rows, 0.95).unwrap();
        assert_eq!(pca.dim(), 1);
        assert!((pca.explained_variance[0] / pca.total_variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_isotropic_keeps_both_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
            .collect();
        // Oracle: covariance eigenvalues from nalgebra.
        let n = rows.len() as f64;
        let mx = rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let my = rows.iter().map(|r| r[1]).sum::<f64>() / n;
        let cxx = rows.iter().map(|r| (r[0] - mx) * (r[0] - mx)).sum::<f64>() / n;
        let cyy = rows.iter().map(|r| (r[1] - my) * (r[1] - my)).sum::<f64>() / n;
        let cxy = rows.iter().map(|r| (r[0] - mx) * (r[1] - my)).sum::<f64>() / n;
        let ev = DMatrix::from_row_slice(2, 2, &[cxx, cxy, cxy, cyy]).symmetric_eigen().eigenvalues;
        let top = ev[0].max(ev[1]);
        assert!(top / (ev[0] + ev[1]) < 0.95);
        let pca = Pca::fit(&rows, 0.95).unwrap();
        assert_eq!(pca.dim(), 2);
        assert!((pca.explained_variance[0] - top).abs() < 1e-9);
    }

    #[test]
    fn pca_full_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // More dimensions than frames exercises the Gram-matrix route.
        for (n, d) in [(12usize, 5usize), (6, 20)] {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let pca = Pca::fit(&rows, 1.0).unwrap();
            assert!(pca.dim() <= (n - 1).min(d));
            for r in &rows {
                let back = pca.inverse_transform(&pca.transform(r));
                for (a, b) in back.iter().zip(r) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn pca_degenerate_input() {
        let rows = vec![vec![2.0, 3.0]; 4];
        let pca = Pca::fit(&rows, 0.95).unwrap();
        assert_eq!(pca.dim(), 1);
        assert_eq!(pca.transform(&rows[0]), vec![0.0]);
    }

    #[test]
    fn elbow_examples() {
        // Chord distances after normalisation: k=2 gives (1 - 0.2 - 0.1199)/sqrt(2),
        // the largest of the curve.
        assert_eq!(elbow_k(&[100.0, 20.0, 10.0, 9.5, 9.2, 9.1]), 2);
        assert_eq!(elbow_k(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]), 1);
        assert_eq!(elbow_k(&[4.0; 6]), 1);
        assert_eq!(elbow_k(&[]), 1);
    }

    #[test]
    fn identical_frames_give_one_keyframe() {
        let e = embs(&vec![vec![1.0, 1.0, 1.0]; 15]);
        let r = kmeans_keyframes(&e, &ClusterConfig::default()).unwrap();
        assert_eq!(r.k_used, 1);
        assert_eq!(r.keyframes, vec![0]);
    }

    #[test]
    fn k_larger_than_frames() {
        let e = embs(&[vec![0.0], vec![1.0]]);
        let cfg = ClusterConfig {
            k: KChoice::Fixed(3),
            ..Default::default()
        };
        assert_eq!(kmeans_keyframes(&e, &cfg), Err(ClusterError::KTooLarge { k: 3, frames: 2 }));
    }

    /// Brute force over every 2-partition of the points.
    fn best_two_partition(points: &[Vec<f64>]) -> Vec<bool> {
        let n = points.len();
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1..(1u32 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<&Vec<f64>> = (0..n).filter(|i| ((mask >> i) & 1 == 1) == side).map(|i| &points[i]).collect();
                let dim = points[0].len();
                let mut c = vec![0.0; dim];
                for m in &members {
                    for (a, v) in c.iter_mut().zip(m.iter()) {
                        *a += v / members.len() as f64;
                    }
                }
                cost += members.iter().map(|m| sq_dist(m, &c)).sum::<f64>();
            }
            if cost < best.0 {
                best = (cost, mask);
            }
        }
        (0..n).map(|i| (best.1 >> i) & 1 == 1).collect()
    }

    #[test]
    fn two_groups_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::new();
        for g in 0..2 {
            for _ in 0..6 {
                let base = if g == 0 { 0.0 } else { 50.0 };
                rows.push(vec![base + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            }
        }
        let e = embs(&rows);
        let cfg = ClusterConfig {
            k: KChoice::Fixed(2),
            ..Default::default()
        };
        let r = kmeans_keyframes(&e, &cfg).unwrap();
        let oracle = best_two_partition(&rows);
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                assert_eq!(r.assignments[i] == r.assignments[j], oracle[i] == oracle[j]);
            }
        }
        assert_eq!(r.keyframes.len(), 2);
        assert!(r.keyframes[0] < 6 && r.keyframes[1] >= 6);
    }

    #[test]
    fn inertia_never_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..20 {
            let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            let mut r = ChaCha8Rng::seed_from_u64(trial);
            let fit = kmeans(&rows, 6, 100, &mut r).unwrap();
            for w in fit.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0]);
            }
        }
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let e = embs(&rows);
        let a = cluster_keyframes(&e, &ClusterConfig::default()).unwrap();
        let b = cluster_keyframes(&e, &ClusterConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_distances() {
        let e = embs(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0], vec![0.0, 0.0]]);
        let d = consecutive_cosine_distances(&e);
        assert!((d[0] - 1.0).abs() < 1e-12);
        assert!(d[1].abs() < 1e-12);
        assert_eq!(d[2], 1.0);
    }
}
