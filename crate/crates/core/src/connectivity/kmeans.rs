use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DenseMatrix};

/// Read access to a set of points for clustering. Implemented for dense rows
/// and for sparse rows (bag-of-words features stay sparse).
pub trait PointSet {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    /// Squared Euclidean distance from point `i` to `centroid`.
    fn sq_dist(&self, i: usize, centroid: &[f64]) -> f64;
    /// `acc += point_i`.
    fn add_into(&self, i: usize, acc: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PointSet for DenseMatrix {
    fn len(&self) -> usize {
        self.rows()
    }

    fn dim(&self) -> usize {
        self.cols()
    }

    fn sq_dist(&self, i: usize, centroid: &[f64]) -> f64 {
        self.row(i).iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn add_into(&self, i: usize, acc: &mut [f64]) {
        for (a, &v) in acc.iter_mut().zip(self.row(i)) {
            *a += v;
        }
    }
}

/// Sparse rows with their squared norms cached, so distances cost
/// `O(nnz(row) + dim)` through `‖x‖² − 2x·c + ‖c‖²`.
pub struct SparsePoints<'a> {
    matrix: &'a CsrMatrix,
    sq_norms: Vec<f64>,
}

impl<'a> SparsePoints<'a> {
    pub fn new(matrix: &'a CsrMatrix) -> Self {
        let sq_norms = (0..matrix.num_rows())
            .map(|i| matrix.row(i).1.iter().map(|v| v * v).sum())
            .collect();
        Self { matrix, sq_norms }
    }
}

impl PointSet for SparsePoints<'_> {
    fn len(&self) -> usize {
        self.matrix.num_rows()
    }

    fn dim(&self) -> usize {
        self.matrix.num_cols()
    }

    fn sq_dist(&self, i: usize, centroid: &[f64]) -> f64 {
        let (cols, vals) = self.matrix.row(i);
        let cross: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * centroid[j]).sum();
        let c2: f64 = centroid.iter().map(|c| c * c).sum();
        (self.sq_norms[i] - 2.0 * cross + c2).max(0.0)
    }

    fn add_into(&self, i: usize, acc: &mut [f64]) {
        let (cols, vals) = self.matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            acc[j] += v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansParams {
    pub max_iterations: usize,
    /// Stop once `(prev − loss) / prev` falls below this.
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { max_iterations: 100, tolerance: 1e-4 }
    }
}

/// Hard k-means result.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    pub num_clusters: usize,
    /// `Σ_i ‖z_i − μ_{assign(i)}‖²` for the returned assignments and centroids.
    pub loss: f64,
    /// Loss after every Lloyd iteration.
    pub loss_history: Vec<f64>,
    /// True when the final iteration left every assignment unchanged.
    pub converged: bool,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// k-means++ seeding followed by Lloyd iterations with default stopping rules.
pub fn kmeans<P: PointSet + ?Sized>(points: &P, k: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_with(points, k, seed, &KMeansParams::default())
}

pub fn kmeans_with<P: PointSet + ?Sized>(
    points: &P,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<ClusterModel> {
    validate(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = plus_plus_init(points, k, &mut rng);
    lloyd(points, centroids, params)
}

/// Lloyd iterations warm-started from existing centroids.
pub fn kmeans_from<P: PointSet + ?Sized>(
    points: &P,
    initial: &DenseMatrix,
    params: &KMeansParams,
) -> Result<ClusterModel> {
    validate(points, initial.rows())?;
    if initial.cols() != points.dim() {
        return Err(Error::DimensionMismatch {
            op: "kmeans_from",
            detail: format!("centroids have {} dims, points have {}", initial.cols(), points.dim()),
        });
    }
    lloyd(points, initial.clone(), params)
}

fn validate<P: PointSet + ?Sized>(points: &P, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs at least one cluster".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of points {}",
            points.len()
        )));
    }
    Ok(())
}

fn plus_plus_init<P: PointSet + ?Sized>(points: &P, k: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = points.len();
    let dim = points.dim();
    let mut centroids = DenseMatrix::zeros(k, dim);
    let mut chosen = vec![false; n];

    let first = rng.gen_range(0..n);
    points.add_into(first, centroids.row_mut(0));
    chosen[first] = true;

    let mut nearest: Vec<f64> = (0..n).map(|i| points.sq_dist(i, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every point coincides with a centroid; fall back to unused points.
            let unused = chosen.iter().filter(|&&c| !c).count();
            let nth = rng.gen_range(0..unused);
            chosen.iter().enumerate().filter(|(_, &c)| !c).nth(nth).unwrap().0
        };
        chosen[pick] = true;
        points.add_into(pick, centroids.row_mut(c));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(points.sq_dist(i, centroids.row(c)));
        }
    }
    centroids
}

fn nearest_centroid<P: PointSet + ?Sized>(points: &P, i: usize, centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, points.sq_dist(i, centroids.row(0)));
    for c in 1..centroids.rows() {
        let d = points.sq_dist(i, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd<P: PointSet + ?Sized>(
    points: &P,
    mut centroids: DenseMatrix,
    params: &KMeansParams,
) -> Result<ClusterModel> {
    let n = points.len();
    let k = centroids.rows();
    let dim = points.dim();
    let mut assignments = vec![usize::MAX; n];
    let mut loss_history = Vec::new();
    let mut converged = false;

    for _ in 0..params.max_iterations.max(1) {
        // Assignment step.
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest_centroid(points, i, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            dist[i] = d;
        }

        // Empty-cluster repair: move each empty centroid onto the point that
        // sits farthest from its own centroid, taken from a cluster that can
        // spare it.
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| sizes[assignments[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .expect("k <= n guarantees a cluster with more than one point");
            sizes[assignments[donor]] -= 1;
            assignments[donor] = empty;
            sizes[empty] = 1;
            dist[donor] = 0.0;
            let row = centroids.row_mut(empty);
            row.fill(0.0);
            points.add_into(donor, row);
            changed = true;
        }

        // Update step.
        let mut sums = DenseMatrix::zeros(k, dim);
        for (i, &a) in assignments.iter().enumerate() {
            points.add_into(i, sums.row_mut(a));
        }
        for c in 0..k {
            let inv = 1.0 / sizes[c] as f64;
            let row = sums.row_mut(c);
            row.iter_mut().for_each(|v| *v *= inv);
        }
        centroids = sums;

        let loss: f64 = (0..n).map(|i| points.sq_dist(i, centroids.row(assignments[i]))).sum();
        let prev = loss_history.last().copied();
        loss_history.push(loss);

        if !changed {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - loss) <= params.tolerance * prev {
                break;
            }
        }
    }

    let loss = *loss_history.last().unwrap();
    Ok(ClusterModel { assignments, centroids, num_clusters: k, loss, loss_history, converged })
}
