//! Euclidean metrics for Hamiltonian Monte Carlo.
//!
//! The inverse metric is `S (I + V diag(lambda - 1) V^T) S` where `S` holds
//! per-coordinate posterior standard deviations and the orthonormal columns
//! of `V` are the leading principal directions of the standardized warmup
//! draws. With no directions this is the usual diagonal metric. The low-rank
//! part captures the few strongly correlated directions (typically the ridge
//! between a hierarchical location and its standardized effects) at O(d k)
//! cost per leapfrog step.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    /// Per-coordinate scale: the square root of the diagonal inverse metric.
    pub scale: Vec<f64>,
    /// Orthonormal directions in standardized coordinates.
    pub directions: Vec<Vec<f64>>,
    /// Variance along each direction in standardized coordinates.
    pub eigenvalues: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Metric {
    pub fn unit(d: usize) -> Self {
        Metric {
            scale: vec![1.0; d],
            directions: Vec::new(),
            eigenvalues: Vec::new(),
        }
    }

    pub fn diagonal(variance: &[f64]) -> Self {
        Metric {
            scale: variance.iter().map(|v| v.sqrt()).collect(),
            directions: Vec::new(),
            eigenvalues: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    /// Diagonal of the inverse metric.
    pub fn diagonal_variance(&self) -> Vec<f64> {
        (0..self.scale.len())
            .map(|i| {
                let extra: f64 = self
                    .directions
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(v, l)| (l - 1.0) * v[i] * v[i])
                    .sum();
                self.scale[i] * self.scale[i] * (1.0 + extra)
            })
            .collect()
    }

    /// Applies `I + V diag(f) V^T` in place.
    fn apply_low_rank(&self, x: &mut [f64], f: impl Fn(f64) -> f64) {
        let coefs: Vec<f64> = self
            .directions
            .iter()
            .zip(&self.eigenvalues)
            .map(|(v, &l)| f(l) * dot(v, x))
            .collect();
        for (v, c) in self.directions.iter().zip(coefs) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += c * vi;
            }
        }
    }

    /// Velocity `M^{-1} p`.
    pub fn velocity(&self, p: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = p.iter().zip(&self.scale).map(|(p, s)| p * s).collect();
        self.apply_low_rank(&mut w, |l| l - 1.0);
        for (wi, s) in w.iter_mut().zip(&self.scale) {
            *wi *= s;
        }
        w
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * dot(p, &self.velocity(p))
    }

    /// Draws `p ~ N(0, M)`.
    pub fn sample_momentum<R: Rng>(&self, rng: &mut R, p: &mut [f64]) {
        for x in p.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        self.apply_low_rank(p, |l| 1.0 / l.sqrt() - 1.0);
        for (x, s) in p.iter_mut().zip(&self.scale) {
            *x /= s;
        }
    }
}

/// Accumulates warmup draws for one adaptation window.
#[derive(Debug, Clone)]
pub struct WindowEstimator {
    dim: usize,
    draws: Vec<Vec<f64>>,
}

impl WindowEstimator {
    pub fn new(dim: usize) -> Self {
        WindowEstimator {
            dim,
            draws: Vec::new(),
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.draws.push(x.to_vec());
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Shrunk diagonal estimate plus up to `max_rank` leading directions.
    pub fn estimate<R: Rng>(&self, max_rank: usize, rng: &mut R) -> Metric {
        let n = self.draws.len();
        let d = self.dim;
        let nf = n as f64;
        let mut mean = vec![0.0; d];
        for x in &self.draws {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / nf;
            }
        }
        let mut var = vec![0.0; d];
        for x in &self.draws {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / (nf - 1.0);
            }
        }
        let shrunk: Vec<f64> = var
            .iter()
            .map(|v| (nf / (nf + 5.0)) * v + 1e-3 * (5.0 / (nf + 5.0)))
            .collect();
        let mut metric = Metric::diagonal(&shrunk);
        if max_rank == 0 || n < 10 {
            return metric;
        }
        let sd: Vec<f64> = var.iter().map(|v| v.sqrt().max(1e-12)).collect();
        let y: Vec<Vec<f64>> = self
            .draws
            .iter()
            .map(|x| x.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect())
            .collect();
        // Noise eigenvalues of a standardized sample covariance reach about
        // (1 + sqrt(d / n))^2; only directions well above that are kept.
        let edge = (1.0 + (d as f64 / nf).sqrt()).powi(2);
        let cutoff = (1.5 * edge).max(3.0);
        for (l, v) in leading_eigenpairs(&y, max_rank, rng) {
            if l > cutoff {
                metric.eigenvalues.push(l);
                metric.directions.push(v);
            }
        }
        metric
    }
}

fn orthonormalize(cols: &mut [Vec<f64>]) {
    for i in 0..cols.len() {
        for j in 0..i {
            let c = dot(&cols[i], &cols[j]);
            let (head, tail) = cols.split_at_mut(i);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= c * b;
            }
        }
        let norm = dot(&cols[i], &cols[i]).sqrt();
        if norm > 0.0 {
            cols[i].iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Sample covariance of the rows `y` applied to `v`.
fn cov_apply(y: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mut out = vec![0.0; v.len()];
    for row in y {
        let t = dot(row, v) / (n - 1.0);
        for (o, r) in out.iter_mut().zip(row) {
            *o += t * r;
        }
    }
    out
}

/// Leading eigenpairs of the sample covariance of `y` (rows are draws) by
/// block subspace iteration with a final Rayleigh-Ritz step.
pub fn leading_eigenpairs<R: Rng>(y: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<(f64, Vec<f64>)> {
    let d = y.first().map_or(0, |r| r.len());
    let m = (k + 4).min(d).min(y.len().saturating_sub(1));
    if m == 0 {
        return Vec::new();
    }
    let mut q: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    orthonormalize(&mut q);
    for _ in 0..60 {
        let mut z: Vec<Vec<f64>> = q.iter().map(|v| cov_apply(y, v)).collect();
        orthonormalize(&mut z);
        q = z;
    }
    let cq: Vec<Vec<f64>> = q.iter().map(|v| cov_apply(y, v)).collect();
    let b: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| dot(&q[i], &cq[j])).collect()).collect();
    let (vals, vecs) = jacobi_eigen(b);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|c| {
            let mut v = vec![0.0; d];
            for (r, qr) in q.iter().enumerate() {
                for (vi, qi) in v.iter_mut().zip(qr) {
                    *vi += vecs[r][c] * qi;
                }
            }
            (vals[c], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(k);
    pairs
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the eigenvector matrix (columns).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (row_p, row_q) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}
