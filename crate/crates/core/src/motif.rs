//! K-slot motif table, motif-to-subgraph similarity, balanced assignment by
//! Sinkhorn-Knopp, and the motif classification loss.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::seed;

/// `K x D` table of motif vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifTable {
    pub motifs: Tensor,
}

impl MotifTable {
    /// `k` seeded random unit vectors of dimension `dim`.
    pub fn init(k: usize, dim: usize, seed: u64) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Config(format!("motif table needs K, D >= 1 (got {k}, {dim})")));
        }
        let mut rng = seed::rng(seed, &[0x307F]);
        let mut data: Vec<f64> = Vec::with_capacity(k * dim);
        for _ in 0..k {
            let row: Vec<f64> = loop {
                let r: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if r.iter().any(|v: &f64| *v != 0.0) {
                    break r;
                }
            };
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            data.extend(row.iter().map(|v| v / norm));
        }
        Ok(Self {
            motifs: Tensor::new(k, dim, data)?,
        })
    }

    pub fn num_motifs(&self) -> usize {
        self.motifs.rows()
    }

    pub fn dim(&self) -> usize {
        self.motifs.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.motifs.rows() == 0 {
            return Err(Error::Config("motif table is empty".into()));
        }
        if !self.motifs.is_finite() {
            return Err(Error::NonFinite("motif table".into()));
        }
        Ok(())
    }
}

/// `S = cos(motifs, e)` (`K x N`) and `S̃ = col_softmax(S / tau_g)`.
pub fn motif_similarity(tape: &mut Tape, motifs: Var, e: Var, tau_g: f64) -> Result<(Var, Var)> {
    let (k_dim, e_dim) = (tape.value(motifs).cols(), tape.value(e).cols());
    if k_dim != e_dim {
        return Err(Error::shape(
            "motif_similarity",
            format!("motif dim {k_dim} vs embedding dim {e_dim}"),
        ));
    }
    let m = tape.l2_normalize_rows(motifs)?;
    let u = tape.l2_normalize_rows(e)?;
    let s = tape.matmul_t(m, u)?;
    let s_tilde = tape.col_softmax(s, tau_g)?;
    Ok((s, s_tilde))
}

/// Result of [`sinkhorn_assign`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    /// `K x N` transport plan.
    pub q: Tensor,
    /// Row scaling of the max-shifted kernel `exp(lambda (S - max S))`.
    pub u: Vec<f64>,
    /// Column scaling of the same kernel.
    pub v: Vec<f64>,
    pub iterations: usize,
    /// Largest absolute deviation of any row or column sum from its target.
    pub marginal_error: f64,
    pub converged: bool,
}

const NEWTON_STEPS: usize = 50;

/// Damped Newton iterations on the log scalings `(ln u, ln v)`, solving the
/// marginal equations directly. Sinkhorn's linear rate degrades as
/// `lambda * range(S)` grows; this finishes such cases from the best
/// Sinkhorn iterate. `None` when a scaling is zero or the system is singular.
fn newton_polish(s: &Tensor, lambda: f64, max: f64, u: &[f64], v: &[f64], tol: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let (k, n) = (s.rows(), s.cols());
    if u.iter().chain(v).any(|&x| x <= 0.0 || !x.is_finite()) {
        return None;
    }
    let log_k: Vec<f64> = s.data().iter().map(|x| lambda * (x - max)).collect();
    let plan = |f: &[f64], g: &[f64]| -> Vec<f64> {
        (0..k * n).map(|i| (log_k[i] + f[i / n] + g[i % n]).exp()).collect()
    };
    // The last column potential is pinned, removing the (f + c, g - c) gauge.
    let pin = v[n - 1].ln();
    let mut f: Vec<f64> = u.iter().map(|x| x.ln() + pin).collect();
    let mut g: Vec<f64> = v.iter().map(|x| x.ln() - pin).collect();
    let mut q = plan(&f, &g);
    let mut err = marginal_error(&q, k, n);
    let d = k + n - 1;
    // Runs past `tol`: near a permutation the plan entries are far more
    // sensitive than the marginals, so stop only at round-off level.
    for _ in 0..NEWTON_STEPS {
        if err < tol * 1e-6 {
            break;
        }
        let mut jac = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for r in 0..k {
            let row: f64 = q[r * n..(r + 1) * n].iter().sum();
            jac[r * d + r] = row;
            for c in 0..n - 1 {
                jac[r * d + k + c] = q[r * n + c];
            }
            rhs[r] = 1.0 / k as f64 - row;
        }
        for c in 0..n - 1 {
            let col: f64 = (0..k).map(|r| q[r * n + c]).sum();
            let i = k + c;
            jac[i * d + i] = col;
            for r in 0..k {
                jac[i * d + r] = q[r * n + c];
            }
            rhs[i] = 1.0 / n as f64 - col;
        }
        let delta = solve(jac, rhs, d)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let nf: Vec<f64> = (0..k).map(|r| f[r] + step * delta[r]).collect();
            let ng: Vec<f64> = (0..n).map(|c| if c + 1 < n { g[c] + step * delta[k + c] } else { g[c] }).collect();
            let nq = plan(&nf, &ng);
            let nerr = marginal_error(&nq, k, n);
            if nerr < err {
                (f, g, q, err) = (nf, ng, nq, nerr);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((f.iter().map(|x| x.exp()).collect(), g.iter().map(|x| x.exp()).collect(), err))
}

/// Dense Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>, d: usize) -> Option<Vec<f64>> {
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[pivot * d + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..d {
                a.swap(col * d + j, pivot * d + j);
            }
            b.swap(col, pivot);
        }
        for i in col + 1..d {
            let factor = a[i * d + col] / a[col * d + col];
            if factor != 0.0 {
                for j in col..d {
                    a[i * d + j] -= factor * a[col * d + j];
                }
                b[i] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let tail: f64 = (i + 1..d).map(|j| a[i * d + j] * x[j]).sum();
        x[i] = (b[i] - tail) / a[i * d + i];
    }
    Some(x)
}

fn marginal_error(q: &[f64], k: usize, n: usize) -> f64 {
    let (rt, ct) = (1.0 / k as f64, 1.0 / n as f64);
    let mut err: f64 = 0.0;
    for r in 0..k {
        let s: f64 = q[r * n..(r + 1) * n].iter().sum();
        err = err.max((s - rt).abs());
    }
    for c in 0..n {
        let s: f64 = (0..k).map(|r| q[r * n + c]).sum();
        err = err.max((s - ct).abs());
    }
    err
}

/// Balanced soft assignment `Q = diag(u) exp(lambda S) diag(v)` with rows
/// summing to `1/K` and columns to `1/N`.
///
/// Alternates row and column scalings until the largest marginal violation
/// drops below `tol` or `max_iters` is reached. On non-convergence the
/// iterate with the smallest violation is returned with `converged = false`
/// and a warning is logged.
pub fn sinkhorn_assign(s: &Tensor, lambda: f64, max_iters: usize, tol: f64) -> Result<AssignmentMatrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("sinkhorn lambda must be > 0, got {lambda}")));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("sinkhorn similarity".into()));
    }
    let (k, n) = (s.rows(), s.cols());
    if k == 0 || n == 0 {
        return Err(Error::Empty(format!("sinkhorn on a {k}x{n} matrix")));
    }
    let max = s.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kernel: Vec<f64> = s.data().iter().map(|x| (lambda * (x - max)).exp()).collect();
    let (rt, ct) = (1.0 / k as f64, 1.0 / n as f64);
    let mut u = vec![1.0; k];
    let mut v = vec![1.0; n];
    let plan = |u: &[f64], v: &[f64]| -> Vec<f64> {
        let mut q = kernel.clone();
        for r in 0..k {
            for c in 0..n {
                q[r * n + c] *= u[r] * v[c];
            }
        }
        q
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, usize)> = None;
    let mut iterations = 0;
    for it in 1..=max_iters.max(1) {
        iterations = it;
        for r in 0..k {
            let kv: f64 = (0..n).map(|c| kernel[r * n + c] * v[c]).sum();
            u[r] = if kv > 0.0 { rt / kv } else { 0.0 };
        }
        for c in 0..n {
            let ku: f64 = (0..k).map(|r| kernel[r * n + c] * u[r]).sum();
            v[c] = if ku > 0.0 { ct / ku } else { 0.0 };
        }
        let err = marginal_error(&plan(&u, &v), k, n);
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, u.clone(), v.clone(), it));
        }
        if err < tol {
            break;
        }
    }
    let (mut err, mut u, mut v, _) = best.expect("at least one iteration");
    if err >= tol {
        if let Some((pu, pv, perr)) = newton_polish(s, lambda, max, &u, &v, tol) {
            if perr < err {
                (u, v, err) = (pu, pv, perr);
            }
        }
    }
    let converged = err < tol;
    if !converged {
        log::warn!("sinkhorn did not converge in {iterations} iterations (marginal error {err:.3e})");
    }
    let q = Tensor::new(k, n, plan(&u, &v))?;
    Ok(AssignmentMatrix {
        q,
        u,
        v,
        iterations,
        marginal_error: err,
        converged,
    })
}

/// `L_m = -(1/N) Σ_{k,j} Q[k,j] log S̃[k,j]`, with `Q` a constant target.
pub fn motif_loss(tape: &mut Tape, q: &Tensor, s_tilde: Var) -> Result<Var> {
    let st = tape.value(s_tilde);
    if st.shape() != q.shape() {
        return Err(Error::shape(
            "motif_loss",
            format!("Q {:?} vs S̃ {:?}", q.shape(), st.shape()),
        ));
    }
    let n = q.cols();
    if n == 0 {
        return Err(Error::Empty("motif_loss over zero subgraphs".into()));
    }
    let log_s = tape.log(s_tilde)?;
    let qv = tape.constant(q.clone());
    let ce = tape.trace_product(log_s, qv)?;
    tape.scale(ce, -1.0 / n as f64)
}

/// Per-graph mean of its subgraphs' `S̃` columns (`graphs x K`). Graphs with
/// no subgraph get the uniform vector `1/K`.
pub fn graph_motif_assignment(s_tilde: &Tensor, parents: &[usize], num_graphs: usize) -> Result<Tensor> {
    let (k, n) = (s_tilde.rows(), s_tilde.cols());
    if parents.len() != n {
        return Err(Error::shape(
            "graph_motif_assignment",
            format!("{} parents for {n} subgraphs", parents.len()),
        ));
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for (j, &p) in parents.iter().enumerate() {
        groups
            .get_mut(p)
            .ok_or_else(|| Error::InvalidArgument(format!("parent {p} outside {num_graphs} graphs")))?
            .push(j);
    }
    let mut out = Vec::with_capacity(num_graphs * k);
    let mut empty = 0;
    for g in &groups {
        if g.is_empty() {
            empty += 1;
            out.extend(std::iter::repeat_n(1.0 / k as f64, k));
        } else {
            for r in 0..k {
                out.push(g.iter().map(|&j| s_tilde.get(r, j)).sum::<f64>() / g.len() as f64);
            }
        }
    }
    if empty > 0 {
        log::debug!("{empty} graph(s) without subgraphs got a uniform motif assignment");
    }
    Tensor::new(num_graphs, k, out)
}

/// Motif index with the largest `S̃` in each column.
pub fn argmax_motifs(s_tilde: &Tensor) -> Vec<usize> {
    (0..s_tilde.cols())
        .map(|j| {
            (0..s_tilde.rows())
                .max_by(|&a, &b| s_tilde.get(a, j).total_cmp(&s_tilde.get(b, j)).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(motifs: Vec<Vec<f64>>, e: Vec<Vec<f64>>, tau: f64) -> (Tensor, Tensor) {
        let mut tape = Tape::new();
        let m = tape.leaf(Tensor::from_rows(&motifs).unwrap());
        let e = tape.leaf(Tensor::from_rows(&e).unwrap());
        let (s, st) = motif_similarity(&mut tape, m, e, tau).unwrap();
        (tape.value(s).clone(), tape.value(st).clone())
    }

    #[test]
    fn self_and_orthogonal_cosines() {
        let (s, _) = sim(vec![vec![0.3, 0.4]], vec![vec![0.3, 0.4], vec![-0.4, 0.3]], 0.2);
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(s.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn two_motif_softmax_column() {
        let (_, st) = sim(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![2.0, 0.0]], 1.0);
        let e = std::f64::consts::E;
        assert!((st.get(0, 0) - e / (e + 1.0)).abs() < 1e-15);
        assert!((st.get(0, 0) - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn zero_similarity_gives_uniform_plan() {
        let a = sinkhorn_assign(&Tensor::zeros(2, 4), 20.0, 300, 1e-6).unwrap();
        assert!(a.q.data().iter().all(|&x| (x - 0.125).abs() < 1e-15));
        assert!(a.converged);
    }

    #[test]
    fn single_motif_is_forced() {
        let s = Tensor::from_rows(&[vec![0.9, -0.3, 0.1]]).unwrap();
        let a = sinkhorn_assign(&s, 20.0, 300, 1e-6).unwrap();
        assert!(a.q.data().iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn identity_similarity_closed_form() {
        let s = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let a = sinkhorn_assign(&s, 10.0, 300, 1e-6).unwrap();
        let e10 = 10f64.exp();
        let diag = e10 / (2.0 * (e10 + 1.0));
        assert!((a.q.get(0, 0) - diag).abs() < 1e-12);
        assert!((a.q.get(1, 1) - diag).abs() < 1e-12);
        assert!((a.q.get(0, 1) - (0.5 - diag)).abs() < 1e-12);
        assert!((diag - 0.4999773).abs() < 1e-7);
    }

    #[test]
    fn sinkhorn_rejects_bad_input() {
        assert!(sinkhorn_assign(&Tensor::zeros(2, 2), 0.0, 10, 1e-6).is_err());
        assert!(sinkhorn_assign(&Tensor::zeros(0, 0), 1.0, 10, 1e-6).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let s = Tensor::from_rows(&[vec![1.0, -1.0, 0.5], vec![0.2, 0.9, -0.7]]).unwrap();
        let a = sinkhorn_assign(&s, 50.0, 1, 1e-15).unwrap();
        assert!(!a.converged);
        assert!(a.marginal_error > 0.0);
    }

    fn loss_value(q: Vec<Vec<f64>>, st: Vec<Vec<f64>>) -> f64 {
        let mut tape = Tape::new();
        let s = tape.leaf(Tensor::from_rows(&st).unwrap());
        let l = motif_loss(&mut tape, &Tensor::from_rows(&q).unwrap(), s).unwrap();
        tape.value(l).item()
    }

    #[test]
    fn motif_loss_examples() {
        assert_eq!(loss_value(vec![vec![1.0]], vec![vec![1.0]]), 0.0);
        let l = loss_value(vec![vec![0.5], vec![0.5]], vec![vec![0.7311], vec![0.2689]]);
        assert!((l - 0.8133).abs() < 1e-4, "{l}");
        let l = loss_value(vec![vec![1.0], vec![0.0]], vec![vec![0.7], vec![0.3]]);
        assert!((l + 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn graph_assignment_means() {
        let st = Tensor::from_rows(&[vec![0.8, 0.2, 0.6], vec![0.2, 0.8, 0.4]]).unwrap();
        let a = graph_motif_assignment(&st, &[0, 1, 1], 3).unwrap();
        assert_eq!(a.row(0), &[0.8, 0.2]);
        assert!((a.get(1, 0) - 0.4).abs() < 1e-15 && (a.get(1, 1) - 0.6).abs() < 1e-15);
        assert_eq!(a.row(2), &[0.5, 0.5]);
        assert!(graph_motif_assignment(&st, &[0, 3, 1], 3).is_err());
    }

    #[test]
    fn table_rows_are_unit() {
        let t = MotifTable::init(5, 7, 1).unwrap();
        for r in 0..5 {
            let n: f64 = t.motifs.row(r).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(t, MotifTable::init(5, 7, 1).unwrap());
        assert_eq!(argmax_motifs(&Tensor::from_rows(&[vec![0.1, 0.6], vec![0.9, 0.4]]).unwrap()), vec![1, 0]);
    }
}
