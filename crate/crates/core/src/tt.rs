//! Tensor-train storage and contraction kernels.
//!
//! A tensor-train of order `d` is a chain of 3-way cores `G_k` of shape
//! `r_{k-1} × n_k × r_k` with `r_0 = r_d = 1`; an element is the product of
//! the mode-2 slices `G_1(i_1) ⋯ G_d(i_d)`. Cores are reference counted so
//! the repeated middle core of a meet tensor is stored once for any order.

use std::fmt;
use std::io::{BufRead, Write};
use std::iter::Sum;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

use crate::lattice::{incidence_matrix, meet_coefficients, ArithFn, LatticeError, LatticeSet};

/// Default cap on the number of elements a dense conversion may produce.
pub const DENSE_CAP: usize = 10_000_000;

/// Default relative threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Real scalar used by the tensor-train kernels.
///
/// `f64` is the default and the tested tier; any type meeting these bounds
/// (for example a double-double or multiprecision float) plugs into the
/// contraction kernels and the power method unchanged.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + FromStr + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("scalar conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + FromStr + Send + Sync + 'static
{
}

/// Error-free `a * b = p + e`.
#[inline]
fn two_prod<T: Float>(a: T, b: T) -> (T, T) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double addition.
#[inline]
fn dd_add<T: Float>(a: (T, T), b: (T, T)) -> (T, T) {
    let s = a.0 + b.0;
    let bb = s - a.0;
    let e = (a.0 - (s - bb)) + (b.0 - bb) + a.1 + b.1;
    let hi = s + e;
    (hi, e - (hi - s))
}

#[derive(Debug, Error)]
pub enum TTError {
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense size {size} exceeds cap {cap}")]
    DenseCapExceeded { size: usize, cap: usize },
    #[error("invalid tensor-train: {0}")]
    Invalid(String),
    #[error("order {0} not supported by this operation")]
    Order(usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Sparse core storage compressed by slice: entries of slice `i` occupy
/// `slice_ptr[i]..slice_ptr[i+1]`, sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
struct SparseSlices<T> {
    slice_ptr: Vec<usize>,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseSlices<T> {
    /// Builds from per-slice `(row, col, value)` triplets; duplicates are summed.
    fn from_triplets(slices: Vec<Vec<(usize, usize, T)>>) -> Self {
        let total = slices.iter().map(|s| s.len()).sum();
        let mut out = SparseSlices {
            slice_ptr: Vec::with_capacity(slices.len() + 1),
            rows: Vec::with_capacity(total),
            cols: Vec::with_capacity(total),
            vals: Vec::with_capacity(total),
        };
        out.slice_ptr.push(0);
        for mut entries in slices {
            entries.sort_by_key(|&(r, c, _)| (r, c));
            let start = out.vals.len();
            for (r, c, v) in entries {
                let len = out.vals.len();
                if len > start && out.rows[len - 1] == r as u32 && out.cols[len - 1] == c as u32 {
                    out.vals[len - 1] = out.vals[len - 1] + v;
                    continue;
                }
                out.rows.push(r as u32);
                out.cols.push(c as u32);
                out.vals.push(v);
            }
            out.slice_ptr.push(out.vals.len());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CoreData<T> {
    Sparse(SparseSlices<T>),
    /// Slice-major: entry `(a, i, b)` at `(i * left + a) * right + b`.
    Dense(Vec<T>),
}

/// A 3-way TT core of shape `left × n × right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core<T = f64> {
    left: usize,
    n: usize,
    right: usize,
    data: CoreData<T>,
}

impl<T: Scalar> Core<T> {
    /// Dense core from values laid out as `(a, i, b) -> (i * left + a) * right + b`.
    pub fn dense(left: usize, n: usize, right: usize, values: Vec<T>) -> Result<Self, TTError> {
        if values.len() != left * n * right {
            return Err(TTError::Invalid(format!(
                "dense core {left}x{n}x{right} given {} values",
                values.len()
            )));
        }
        Ok(Core {
            left,
            n,
            right,
            data: CoreData::Dense(values),
        })
    }

    /// Dense core from a function of `(a, i, b)`.
    pub fn from_fn(left: usize, n: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(left * n * right);
        for i in 0..n {
            for a in 0..left {
                for b in 0..right {
                    values.push(f(a, i, b));
                }
            }
        }
        Core {
            left,
            n,
            right,
            data: CoreData::Dense(values),
        }
    }

    /// Sparse core from per-slice `(row, col, value)` triplets.
    pub fn sparse(left: usize, right: usize, slices: Vec<Vec<(usize, usize, T)>>) -> Result<Self, TTError> {
        for (i, s) in slices.iter().enumerate() {
            if let Some(&(r, c, _)) = s.iter().find(|&&(r, c, _)| r >= left || c >= right) {
                return Err(TTError::Invalid(format!(
                    "slice {i} entry ({r},{c}) outside {left}x{right}"
                )));
            }
        }
        let n = slices.len();
        Ok(Core {
            left,
            n,
            right,
            data: CoreData::Sparse(SparseSlices::from_triplets(slices)),
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.n, self.right)
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.data, CoreData::Sparse(_))
    }

    /// Stored entries (structural nonzeros for sparse cores, nonzero values for dense).
    pub fn nnz(&self) -> usize {
        match &self.data {
            CoreData::Sparse(s) => s.vals.len(),
            CoreData::Dense(v) => v.iter().filter(|x| !x.is_zero()).count(),
        }
    }

    /// Bytes held by the core's buffers.
    pub fn bytes(&self) -> usize {
        let scalar = std::mem::size_of::<T>();
        match &self.data {
            CoreData::Sparse(s) => {
                s.slice_ptr.len() * std::mem::size_of::<usize>() + s.vals.len() * (8 + scalar)
            }
            CoreData::Dense(v) => v.len() * scalar,
        }
    }

    /// Visits the stored entries of slice `i` as `(row, col, value)`.
    #[inline]
    pub fn for_each_in_slice(&self, i: usize, mut f: impl FnMut(usize, usize, T)) {
        match &self.data {
            CoreData::Sparse(s) => {
                for p in s.slice_ptr[i]..s.slice_ptr[i + 1] {
                    f(s.rows[p] as usize, s.cols[p] as usize, s.vals[p]);
                }
            }
            CoreData::Dense(v) => {
                let base = i * self.left * self.right;
                for a in 0..self.left {
                    let row = &v[base + a * self.right..base + (a + 1) * self.right];
                    for (b, &val) in row.iter().enumerate() {
                        f(a, b, val);
                    }
                }
            }
        }
    }

    pub fn get(&self, a: usize, i: usize, b: usize) -> T {
        match &self.data {
            CoreData::Sparse(s) => {
                let key = (a as u32, b as u32);
                let (mut lo, mut hi) = (s.slice_ptr[i], s.slice_ptr[i + 1]);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    match (s.rows[mid], s.cols[mid]).cmp(&key) {
                        std::cmp::Ordering::Less => lo = mid + 1,
                        std::cmp::Ordering::Greater => hi = mid,
                        std::cmp::Ordering::Equal => return s.vals[mid],
                    }
                }
                T::zero()
            }
            CoreData::Dense(v) => v[(i * self.left + a) * self.right + b],
        }
    }

    /// `v^T G(i)`, accumulated into `out` with weight `w`.
    #[inline]
    fn row_times_slice(&self, v: &[T], i: usize, w: T, out: &mut [T]) {
        self.for_each_in_slice(i, |a, b, val| out[b] = out[b] + w * v[a] * val);
    }

    /// `G(i) u`, accumulated into `out` with weight `w`.
    #[inline]
    fn slice_times_col(&self, i: usize, u: &[T], w: T, out: &mut [T]) {
        self.for_each_in_slice(i, |a, b, val| out[a] = out[a] + w * val * u[b]);
    }

    /// `Σ_i x_i v^T G(i)` on a double-double running vector `(hi, lo)`.
    fn contract_left_dd(&self, v: &[(T, T)], x: &[T]) -> Vec<(T, T)> {
        let mut out = vec![(T::zero(), T::zero()); self.right];
        for (i, &xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            self.for_each_in_slice(i, |a, b, val| {
                let (p, q) = two_prod(xi, val);
                let (hi, lo) = v[a];
                let (th, tl) = two_prod(hi, p);
                let tl = tl + lo * p + hi * q;
                out[b] = dd_add(out[b], (th, tl));
            });
        }
        out
    }

    /// `Σ_i x_i G(i) u`.
    fn contract_right(&self, x: &[T], u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.left];
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_zero() {
                self.slice_times_col(i, u, xi, &mut out);
            }
        }
        out
    }

    /// The matrix `Σ_i x_i G(i)` as a dense `left × right` row-major buffer.
    fn mode_matrix(&self, x: &[T]) -> Vec<T> {
        let mut m = vec![T::zero(); self.left * self.right];
        for (i, &xi) in x.iter().enumerate() {
            self.for_each_in_slice(i, |a, b, val| {
                m[a * self.right + b] = m[a * self.right + b] + xi * val;
            });
        }
        m
    }
}

/// Tensor-train with shared, immutable cores.
#[derive(Debug, Clone)]
pub struct TTTensor<T = f64> {
    cores: Vec<Arc<Core<T>>>,
}

impl<T: Scalar> PartialEq for TTTensor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cores.len() == other.cores.len()
            && self.cores.iter().zip(&other.cores).all(|(a, b)| a == b)
    }
}

impl<T: Scalar> TTTensor<T> {
    pub fn from_cores(cores: Vec<Core<T>>) -> Result<Self, TTError> {
        Self::from_shared(cores.into_iter().map(Arc::new).collect())
    }

    /// Cores may alias one another; aliasing is preserved.
    pub fn from_shared(cores: Vec<Arc<Core<T>>>) -> Result<Self, TTError> {
        if cores.is_empty() {
            return Err(TTError::Invalid("no cores".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(TTError::Invalid("boundary ranks must be 1".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(TTError::Invalid(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    w[0].right,
                    k + 1,
                    w[1].left
                )));
            }
        }
        Ok(TTTensor { cores })
    }

    /// Rank-1 tensor `u_1 ⊗ ⋯ ⊗ u_d`.
    pub fn rank_one(factors: &[Vec<T>]) -> Result<Self, TTError> {
        let cores = factors
            .iter()
            .map(|u| Core::from_fn(1, u.len(), 1, |_, i, _| u[i]))
            .collect();
        Self::from_cores(cores)
    }

    /// All-ones tensor of shape `n^d`, rank 1.
    pub fn ones(n: usize, d: usize) -> Result<Self, TTError> {
        Self::rank_one(&vec![vec![T::one(); n]; d])
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// Common mode size, if all modes agree.
    pub fn uniform_dim(&self) -> Option<usize> {
        let n = self.cores[0].n;
        self.cores.iter().all(|c| c.n == n).then_some(n)
    }

    /// `[r_0, r_1, ..., r_d]`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.right))
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn core(&self, k: usize) -> &Core<T> {
        &self.cores[k]
    }

    pub fn cores(&self) -> &[Arc<Core<T>>] {
        &self.cores
    }

    /// Distinct core allocations, in first-appearance order.
    pub fn unique_cores(&self) -> Vec<&Core<T>> {
        let mut seen: Vec<*const Core<T>> = Vec::new();
        let mut out = Vec::new();
        for c in &self.cores {
            let p = Arc::as_ptr(c);
            if !seen.contains(&p) {
                seen.push(p);
                out.push(c.as_ref());
            }
        }
        out
    }

    /// Bytes held by distinct cores; independent of the order for aliased cores.
    pub fn storage_bytes(&self) -> usize {
        self.unique_cores().iter().map(|c| c.bytes()).sum()
    }

    pub fn nnz_per_core(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.nnz()).collect()
    }

    fn check_index(&self, idx: &[usize]) -> Result<(), TTError> {
        if idx.len() != self.order() || idx.iter().zip(&self.cores).any(|(&i, c)| i >= c.n) {
            return Err(TTError::IndexOutOfRange {
                index: idx.to_vec(),
                dims: self.dims(),
            });
        }
        Ok(())
    }

    fn check_vector(&self, x: &[T]) -> Result<usize, TTError> {
        for c in &self.cores {
            if c.n != x.len() {
                return Err(TTError::DimensionMismatch {
                    expected: c.n,
                    got: x.len(),
                });
            }
        }
        Ok(x.len())
    }

    /// `G_1(i_1) ⋯ G_d(i_d)`.
    pub fn element(&self, idx: &[usize]) -> Result<T, TTError> {
        self.check_index(idx)?;
        Ok(self.element_unchecked(idx))
    }

    pub(crate) fn element_unchecked(&self, idx: &[usize]) -> T {
        let mut v = vec![T::one()];
        for (c, &i) in self.cores.iter().zip(idx) {
            let mut next = vec![T::zero(); c.right];
            c.row_times_slice(&v, i, T::one(), &mut next);
            v = next;
        }
        v[0]
    }

    /// `A x^d`, accumulated left to right as a running row vector.
    ///
    /// The row vector is carried in double-double form, so the result is
    /// accurate even when `A x^d` is much smaller than its terms (the case
    /// near a minimal eigenvector).
    pub fn contract_scalar(&self, x: &[T]) -> Result<T, TTError> {
        self.check_vector(x)?;
        let mut v = vec![(T::one(), T::zero())];
        for c in &self.cores {
            v = c.contract_left_dd(&v, x);
        }
        Ok(v[0].0 + v[0].1)
    }

    /// Column vector `(x^T G_{from}^T) ⋯ (x^T G_d^T)` over the trailing cores.
    fn right_tail(&self, x: &[T], from: usize) -> Vec<T> {
        let mut u = vec![T::one()];
        for c in self.cores[from..].iter().rev() {
            u = c.contract_right(x, &u);
        }
        u
    }

    /// `A x^{d-1}`: mode 1 stays free, modes `2..d` are contracted.
    pub fn contract_vector(&self, x: &[T]) -> Result<Vec<T>, TTError> {
        let n = self.check_vector(x)?;
        let u = self.right_tail(x, 1);
        let first = &self.cores[0];
        let mut y = vec![T::zero(); n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = [T::zero()];
            first.slice_times_col(i, &u, T::one(), &mut acc);
            *yi = acc[0];
        }
        Ok(y)
    }

    /// `A x^{d-2}` as a row-major `n × n` buffer: modes 1 and 2 stay free.
    pub fn contract_matrix(&self, x: &[T]) -> Result<Vec<T>, TTError> {
        if self.order() < 2 {
            return Err(TTError::Order(self.order()));
        }
        let n = self.check_vector(x)?;
        let u = self.right_tail(x, 2);
        let (g1, g2) = (&self.cores[0], &self.cores[1]);
        // columns[j] = G_2(j) u, length r_1
        let columns: Vec<Vec<T>> = (0..n)
            .map(|j| {
                let mut col = vec![T::zero(); g2.left];
                g2.slice_times_col(j, &u, T::one(), &mut col);
                col
            })
            .collect();
        let mut m = vec![T::zero(); n * n];
        for i in 0..n {
            g1.for_each_in_slice(i, |_, b, val| {
                for (j, col) in columns.iter().enumerate() {
                    m[i * n + j] = m[i * n + j] + val * col[b];
                }
            });
        }
        Ok(m)
    }

    /// Mode-`k` contraction (0-based) against `x`: a tensor of order `d - 1`.
    ///
    /// The contracted core collapses to the matrix `Σ_i x_i G_k(i)`, which is
    /// absorbed into a neighbouring core.
    pub fn contract_mode(&self, k: usize, x: &[T]) -> Result<TTTensor<T>, TTError> {
        let d = self.order();
        if d < 2 {
            return Err(TTError::Order(d));
        }
        if k >= d {
            return Err(TTError::IndexOutOfRange {
                index: vec![k],
                dims: vec![d],
            });
        }
        let ck = &self.cores[k];
        if ck.n != x.len() {
            return Err(TTError::DimensionMismatch {
                expected: ck.n,
                got: x.len(),
            });
        }
        let m = ck.mode_matrix(x);
        let (ml, mr) = (ck.left, ck.right);
        let mut cores: Vec<Arc<Core<T>>> = Vec::with_capacity(d - 1);
        if k + 1 < d {
            // M · G_{k+1}(i)
            let next = &self.cores[k + 1];
            let merged = Core::from_fn(ml, next.n, next.right, |a, i, b| {
                (0..mr).fold(T::zero(), |s, c| s + m[a * mr + c] * next.get(c, i, b))
            });
            cores.extend(self.cores[..k].iter().cloned());
            cores.push(Arc::new(merged));
            cores.extend(self.cores[k + 2..].iter().cloned());
        } else {
            // G_{k-1}(i) · M
            let prev = &self.cores[k - 1];
            let merged = Core::from_fn(prev.left, prev.n, mr, |a, i, b| {
                (0..ml).fold(T::zero(), |s, c| s + prev.get(a, i, c) * m[c * mr + b])
            });
            cores.extend(self.cores[..k - 1].iter().cloned());
            cores.push(Arc::new(merged));
        }
        TTTensor::from_shared(cores)
    }

    pub fn to_dense(&self) -> Result<DenseTensor<T>, TTError> {
        self.to_dense_capped(DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseTensor<T>, TTError> {
        let dims = self.dims();
        let size = checked_size(&dims, cap)?;
        let mut values = Vec::with_capacity(size);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..size {
            values.push(self.element_unchecked(&idx));
            increment(&mut idx, &dims);
        }
        Ok(DenseTensor { dims, values })
    }

    /// Plain-text form: header `tt <d> <n> <r_0> .. <r_d>`, then one line
    /// `k i row col value` per stored nonzero (all indices 0-based).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), TTError> {
        let n = self
            .uniform_dim()
            .ok_or_else(|| TTError::Invalid("text format needs a uniform mode size".into()))?;
        let ranks: Vec<String> = self.ranks().iter().map(|r| r.to_string()).collect();
        writeln!(w, "tt {} {} {}", self.order(), n, ranks.join(" "))?;
        for (k, c) in self.cores.iter().enumerate() {
            for i in 0..c.n {
                let mut err = Ok(());
                c.for_each_in_slice(i, |a, b, v| {
                    if !v.is_zero() && err.is_ok() {
                        err = writeln!(w, "{k} {i} {a} {b} {v}");
                    }
                });
                err?;
            }
        }
        Ok(())
    }

    /// Reads the plain-text form; cores come back dense.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, TTError> {
        let mut lines = r.lines().enumerate();
        let (d, n, ranks) = loop {
            let (no, line) = lines.next().ok_or(TTError::Parse {
                line: 0,
                msg: "missing header".into(),
            })?;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| TTError::Parse {
                line: no + 1,
                msg: msg.to_string(),
            };
            if parts.first() != Some(&"tt") || parts.len() < 3 {
                return Err(bad("expected `tt <d> <n> <ranks..>`"));
            }
            let nums: Vec<usize> = parts[1..]
                .iter()
                .map(|p| p.parse().map_err(|_| bad("non-integer header field")))
                .collect::<Result<_, _>>()?;
            let (d, n) = (nums[0], nums[1]);
            let ranks = nums[2..].to_vec();
            if d == 0 || ranks.len() != d + 1 || ranks[0] != 1 || ranks[d] != 1 {
                return Err(bad("rank list must have d+1 entries with boundary ranks 1"));
            }
            break (d, n, ranks);
        };
        let mut values: Vec<Vec<T>> = (0..d)
            .map(|k| vec![T::zero(); ranks[k] * n * ranks[k + 1]])
            .collect();
        for (no, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| TTError::Parse { line: no + 1, msg };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", parts.len())));
            }
            let mut ix = [0usize; 4];
            for (slot, p) in ix.iter_mut().zip(&parts[..4]) {
                *slot = p.parse().map_err(|_| bad(format!("bad index `{p}`")))?;
            }
            let v: T = parts[4]
                .parse()
                .map_err(|_| bad(format!("bad value `{}`", parts[4])))?;
            let [k, i, a, b] = ix;
            if k >= d || i >= n || a >= ranks[k] || b >= ranks[k + 1] {
                return Err(bad("entry outside core shape".into()));
            }
            values[k][(i * ranks[k] + a) * ranks[k + 1] + b] = v;
        }
        let cores = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| Core::dense(ranks[k], n, ranks[k + 1], v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_cores(cores)
    }
}

/// Exact rank-`n` tensor-train of the meet (GCD) tensor of order `d`.
///
/// `G_1(i)_{1,j} = D_j E_{ij}`, `G(i)_{jk} = δ_{jk} E_{ik}`, `G_d(i)_{j,1} = E_{ij}`;
/// the middle core is allocated once and shared by positions `2..d-1`.
pub fn meet_tt<T: Scalar>(set: &LatticeSet, f: &ArithFn, d: usize) -> Result<TTTensor<T>, TTError> {
    if d < 2 {
        return Err(TTError::Order(d));
    }
    let coeffs = meet_coefficients(set, f)?;
    let e = incidence_matrix(set);
    let n = set.len();
    let slices = |entry: &dyn Fn(usize, usize) -> (usize, usize, T)| -> Vec<Vec<(usize, usize, T)>> {
        (0..n)
            .map(|i| e.row(i).iter().map(|&j| entry(i, j)).collect())
            .collect()
    };
    let first = Core::sparse(1, n, slices(&|_, j| (0, j, T::from_f64_lossy(coeffs.values[j]))))?;
    let last = Core::sparse(n, 1, slices(&|_, j| (j, 0, T::one())))?;
    let mut cores = vec![Arc::new(first)];
    if d > 2 {
        let middle = Arc::new(Core::sparse(n, n, slices(&|_, j| (j, j, T::one())))?);
        cores.extend(std::iter::repeat_n(middle, d - 2));
    }
    cores.push(Arc::new(last));
    TTTensor::from_shared(cores)
}

/// Full array in row-major multi-index order (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T = f64> {
    pub dims: Vec<usize>,
    pub values: Vec<T>,
}

fn checked_size(dims: &[usize], cap: usize) -> Result<usize, TTError> {
    let mut size = 1usize;
    for &n in dims {
        size = size.checked_mul(n).filter(|&s| s <= cap).ok_or(TTError::DenseCapExceeded {
            size: dims.iter().fold(1usize, |a, &b| a.saturating_mul(b)),
            cap,
        })?;
    }
    Ok(size)
}

/// Advances a row-major multi-index; wraps to all zeros after the last one.
pub fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

impl<T: Scalar> DenseTensor<T> {
    /// Fills every entry from `f(multi-index)`.
    pub fn from_fn(dims: Vec<usize>, cap: usize, mut f: impl FnMut(&[usize]) -> T) -> Result<Self, TTError> {
        let size = checked_size(&dims, cap)?;
        let mut values = Vec::with_capacity(size);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..size {
            values.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Ok(DenseTensor { dims, values })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.offset(idx)]
    }

    /// The `k`-th unfolding: rows enumerate `(i_1..i_k)`, columns the rest.
    pub fn unfolding(&self, k: usize) -> Result<DMatrix<f64>, TTError> {
        let d = self.order();
        if k == 0 || k >= d {
            return Err(TTError::Order(k));
        }
        let rows: usize = self.dims[..k].iter().product();
        let cols: usize = self.dims[k..].iter().product();
        Ok(DMatrix::from_fn(rows, cols, |r, c| self.values[r * cols + c].to_f64_lossy()))
    }

    /// True if every entry is unchanged under permuting the modes by `perm`.
    pub fn invariant_under(&self, perm: &[usize]) -> bool {
        let d = self.order();
        let mut idx = vec![0usize; d];
        let mut permuted = vec![0usize; d];
        for flat in 0..self.values.len() {
            for (slot, &p) in permuted.iter_mut().zip(perm) {
                *slot = idx[p];
            }
            if self.values[flat] != self.get(&permuted) {
                return false;
            }
            increment(&mut idx, &self.dims);
        }
        true
    }
}

/// Numerical rank of the `k`-th unfolding: singular values above `tol · σ_max`.
pub fn unfolding_rank<T: Scalar>(a: &DenseTensor<T>, k: usize, tol: f64) -> Result<usize, TTError> {
    let m = a.unfolding(k)?;
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

/// `max_k rank A_[k]`.
pub fn max_unfolding_rank<T: Scalar>(a: &DenseTensor<T>, tol: f64) -> Result<usize, TTError> {
    (1..a.order())
        .map(|k| unfolding_rank(a, k, tol))
        .try_fold(0, |m, r| r.map(|r| m.max(r)))
}
