//! Normalized spectral clustering on a dense affinity matrix.

use rand::Rng as _;

use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::seed;

const JACOBI_TOL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;
const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_RESTARTS: usize = 8;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors
/// as columns of a row-major `n x n` matrix. Equal eigenvalues keep their
/// diagonal order.
pub fn symmetric_eigen(matrix: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = matrix.rows();
    if matrix.cols() != n {
        return Err(Error::shape("symmetric_eigen", format!("{:?}", matrix.shape())));
    }
    let mut a: Vec<f64> = matrix.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok((values, Tensor::new(n, n, vectors)?))
}

/// `I - D^{-1/2} W D^{-1/2}` for `W = (A + Aᵀ) / 2`.
pub fn normalized_laplacian(affinity: &Tensor) -> Result<Tensor> {
    let n = affinity.rows();
    if affinity.cols() != n {
        return Err(Error::shape("normalized_laplacian", format!("{:?}", affinity.shape())));
    }
    let w = |i: usize, j: usize| 0.5 * (affinity.get(i, j) + affinity.get(j, i));
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| w(i, j)).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            l[i * n + j] = delta - inv_sqrt_deg[i] * w(i, j) * inv_sqrt_deg[j];
        }
    }
    Tensor::new(n, n, l)
}

/// Partitions the nodes of a complete weighted graph into `num_segments`
/// groups: bottom eigenvectors of the normalized Laplacian, rows
/// L2-normalized, then seeded k-means++ (best of several restarts).
///
/// Labels are renumbered in order of first appearance, so node 0 is always
/// in segment 0.
pub fn spectral_segment(affinity: &Tensor, num_segments: usize, seed: u64) -> Result<Vec<usize>> {
    let n = affinity.rows();
    if num_segments == 0 || num_segments > n {
        return Err(Error::InvalidArgument(format!(
            "num_segments must be in 1..={n}, got {num_segments}"
        )));
    }
    if num_segments == 1 {
        return Ok(vec![0; n]);
    }
    let lap = normalized_laplacian(affinity)?;
    let (_, vectors) = symmetric_eigen(&lap)?;
    let k = num_segments;
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..k).map(|c| vectors.get(r, c)).collect())
        .collect();
    for p in &mut points {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            p.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let labels = kmeans(&points, k, seed);
    Ok(canonical_labels(&labels))
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means with k-means++ initialisation; returns the labelling with
/// the lowest inertia over [`KMEANS_RESTARTS`] runs.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = seed::rng(seed, &[0x4B4D, restart as u64]);
        let (inertia, labels) = kmeans_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut seed::Rng) -> (f64, Vec<usize>) {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    let mut dists: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        centers.push(points[next].clone());
        for (d, p) in dists.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let mut labels = vec![0; n];
    for iter in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (inertia, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = Tensor::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let v0 = [vecs.get(0, 0), vecs.get(1, 0)];
        assert!((v0[0] + v0[1]).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let m = Tensor::from_rows(&[
            vec![4.0, -1.0, 0.5, 0.0],
            vec![-1.0, 3.0, 0.2, 1.0],
            vec![0.5, 0.2, 1.0, -0.3],
            vec![0.0, 1.0, -0.3, 2.0],
        ])
        .unwrap();
        let (vals, v) = symmetric_eigen(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let r: f64 = (0..4).map(|k| v.get(i, k) * vals[k] * v.get(j, k)).sum();
                assert!((r - m.get(i, j)).abs() < 1e-9);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn block_diagonal_blocks_are_recovered() {
        let mut a = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                if (i < 3) == (j < 3) {
                    a[i * 6 + j] = 1.0;
                }
            }
        }
        let a = Tensor::new(6, 6, a).unwrap();
        let labels = spectral_segment(&a, 2, 5).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn one_segment_and_bounds() {
        let a = Tensor::full(4, 4, 0.25);
        assert_eq!(spectral_segment(&a, 1, 0).unwrap(), vec![0; 4]);
        assert!(spectral_segment(&a, 5, 0).is_err());
        assert!(spectral_segment(&a, 0, 0).is_err());
    }

    #[test]
    fn labels_are_canonical() {
        assert_eq!(canonical_labels(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }
}
