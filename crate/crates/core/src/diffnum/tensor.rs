use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Dense row-major matrix of `f64`. Scalars are `1 x 1`.
///
/// Construction through [`Tensor::new`] rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Norms at or below this are treated as zero by the row normaliser.
pub const ZERO_NORM: f64 = 1e-12;

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "tensor",
                format!("{} values for shape [{rows}, {cols}]", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor value {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Unchecked constructor for kernels whose outputs are finite by construction.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_raw(1, 1, vec![value])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("tensor", "ragged rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Tensor::from_raw(self.cols, self.rows, out)
    }

    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        let (k, n) = (self.cols, other.cols);
        let mut out = vec![0.0; self.rows * n];
        par::for_each_row_mut(&mut out, n, |i, orow| {
            let arow = &self.data[i * k..(i + 1) * k];
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        });
        Ok(Tensor::from_raw(self.rows, n, out))
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                format!("{:?} x {:?}ᵀ", self.shape(), other.shape()),
            ));
        }
        let (k, n) = (self.cols, other.rows);
        let mut out = vec![0.0; self.rows * n];
        par::for_each_row_mut(&mut out, n, |i, orow| {
            let arow = &self.data[i * k..(i + 1) * k];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &other.data[j * k..(j + 1) * k];
                *o = arow.iter().zip(brow).map(|(a, b)| a * b).sum();
            }
        });
        Ok(Tensor::from_raw(self.rows, n, out))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "mul")?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor::from_raw(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `Σ self ∘ other`, i.e. `Tr(selfᵀ · other)`.
    pub fn trace_product(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other, "trace_product")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Softmax of each row of `self / temperature`.
    pub fn row_softmax(&self, temperature: f64) -> Result<Tensor> {
        check_temperature(temperature)?;
        let mut out = self.data.clone();
        for row in out.chunks_mut(self.cols.max(1)) {
            softmax_in_place(row.iter_mut(), temperature);
        }
        Ok(Tensor::from_raw(self.rows, self.cols, out))
    }

    /// Softmax of each column of `self / temperature`.
    pub fn col_softmax(&self, temperature: f64) -> Result<Tensor> {
        check_temperature(temperature)?;
        let mut out = self.data.clone();
        let cols = self.cols;
        for c in 0..cols {
            softmax_in_place(out.iter_mut().skip(c).step_by(cols.max(1)), temperature);
        }
        Ok(Tensor::from_raw(self.rows, self.cols, out))
    }

    /// Each row divided by its L2 norm; zero rows stay zero. Also returns the
    /// row norms.
    pub fn l2_normalize_rows(&self) -> (Tensor, Vec<f64>) {
        let mut out = self.data.clone();
        let mut norms = Vec::with_capacity(self.rows);
        for row in out.chunks_mut(self.cols.max(1)).take(self.rows) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > ZERO_NORM {
                row.iter_mut().for_each(|v| *v /= norm);
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
            norms.push(norm);
        }
        (Tensor::from_raw(self.rows, self.cols, out), norms)
    }

    /// Pairwise cosine similarity of the rows of `self` against the rows of
    /// `other`; zero rows give similarity 0.
    pub fn cosine(&self, other: &Tensor) -> Result<Tensor> {
        self.l2_normalize_rows().0.matmul_t(&other.l2_normalize_rows().0)
    }

    /// One output row per group: the mean of the listed rows (each column
    /// reduced in canonical order).
    pub fn mean_rows(&self, groups: &[Vec<usize>]) -> Result<Tensor> {
        let c = self.cols;
        let mut out = vec![0.0; groups.len() * c];
        for (g, idx) in groups.iter().enumerate() {
            check_index_set(idx, self.rows, "mean_rows")?;
            let inv = 1.0 / idx.len() as f64;
            let mut terms = Vec::with_capacity(idx.len());
            for (col, o) in out[g * c..(g + 1) * c].iter_mut().enumerate() {
                terms.clear();
                terms.extend(idx.iter().map(|&r| self.get(r, col)));
                *o = canonical_sum(&mut terms) * inv;
            }
        }
        Ok(Tensor::from_raw(groups.len(), c, out))
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor> {
        if let Some(&bad) = idx.iter().find(|&&r| r >= self.rows) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {}", self.rows)));
        }
        let mut out = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            out.extend_from_slice(self.row(r));
        }
        Ok(Tensor::from_raw(idx.len(), self.cols, out))
    }
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "softmax temperature must be positive, got {t}"
        )));
    }
    Ok(())
}

pub(crate) fn check_index_set(idx: &[usize], rows: usize, op: &'static str) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!("{op}: empty index set")));
    }
    if let Some(&bad) = idx.iter().find(|&&r| r >= rows) {
        return Err(Error::shape(op, format!("row {bad} of {rows}")));
    }
    Ok(())
}

/// Sums in ascending value order, so the result depends only on the
/// multiset of terms. Node-set reductions use this to stay bitwise
/// invariant under node relabeling.
pub(crate) fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

fn softmax_in_place<'a>(values: impl Iterator<Item = &'a mut f64>, temperature: f64) {
    let mut vals: Vec<&'a mut f64> = values.collect();
    let max = vals.iter().map(|v| **v).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in vals.iter_mut() {
        **v = ((**v - max) / temperature).exp();
        total += **v;
    }
    for v in vals.iter_mut() {
        **v /= total;
    }
}

/// Sparse matrix in row-compressed form: row `i` holds `(column, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for row in &rows {
            if let Some(&(c, _)) = row.iter().find(|(c, _)| *c >= cols) {
                return Err(Error::shape("sparse", format!("column {c} of {cols}")));
            }
            if row.iter().any(|(_, w)| !w.is_finite()) {
                return Err(Error::NonFinite("sparse weight".into()));
            }
        }
        Ok(Self { cols, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `self · x`, each output entry reduced in canonical order.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.cols {
            return Err(Error::shape(
                "propagate",
                format!("[{}, {}] x {:?}", self.rows.len(), self.cols, x.shape()),
            ));
        }
        let c = x.cols();
        let mut out = vec![0.0; self.rows.len() * c];
        par::for_each_row_mut(&mut out, c, |i, orow| {
            let entries = &self.rows[i];
            let mut terms = Vec::with_capacity(entries.len());
            for (col, o) in orow.iter_mut().enumerate() {
                terms.clear();
                terms.extend(entries.iter().map(|&(j, w)| w * x.get(j, col)));
                *o = canonical_sum(&mut terms);
            }
        });
        Ok(Tensor::from_raw(self.rows.len(), c, out))
    }

    /// `selfᵀ · g`, accumulated in fixed row order.
    pub fn apply_transpose(&self, g: &Tensor) -> Tensor {
        let c = g.cols();
        let mut out = vec![0.0; self.cols * c];
        for (i, row) in self.rows.iter().enumerate() {
            let grow = g.row(i);
            for &(j, w) in row {
                for (o, v) in out[j * c..(j + 1) * c].iter_mut().zip(grow) {
                    *o += w * v;
                }
            }
        }
        Tensor::from_raw(self.cols, c, out)
    }
}
