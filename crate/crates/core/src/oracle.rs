//! Dense brute-force references.
//!
//! Everything here works entry by entry on a full array and shares no code
//! with the tensor-train kernels, so it can serve as an independent check.
//! Sizes are limited by [`DENSE_CAP`].

use nalgebra::DMatrix;

use crate::eigen::{ContractionProvider, EigenError, Eigenpair, Mode, SolverConfig, TraceRow};
use crate::lattice::{gcd, lcm, ArithFn, LatticeError, LatticeSet};
use crate::tt::{increment, DenseTensor, TTError, DENSE_CAP};

/// `f(x_{i_1} ∧ ⋯ ∧ x_{i_d})` for every index.
pub fn dense_meet(set: &LatticeSet, f: &ArithFn, d: usize) -> Result<DenseTensor<f64>, TTError> {
    let xs = set.elements();
    DenseTensor::from_fn(vec![xs.len(); d], DENSE_CAP, |idx| {
        let g = idx.iter().fold(0u64, |acc, &i| gcd(acc, xs[i]));
        f.eval(g)
    })
}

/// `f(x_{i_1} ∨ ⋯ ∨ x_{i_d})` for every index, with overflow-checked lcm.
pub fn dense_join(set: &LatticeSet, f: &ArithFn, d: usize) -> Result<DenseTensor<f64>, TTError> {
    let xs = set.elements();
    let mut overflow: Option<LatticeError> = None;
    let t = DenseTensor::from_fn(vec![xs.len(); d], DENSE_CAP, |idx| {
        match idx.iter().try_fold(1u64, |acc, &i| lcm(acc, xs[i])) {
            Ok(l) => f.eval(l),
            Err(e) => {
                overflow.get_or_insert(e);
                f64::NAN
            }
        }
    })?;
    match overflow {
        Some(e) => Err(e.into()),
        None => Ok(t),
    }
}

/// Contracts the last `times` modes of `a` with `x` by direct summation.
pub fn dense_contract(a: &DenseTensor<f64>, x: &[f64], times: usize) -> Result<DenseTensor<f64>, TTError> {
    let d = a.order();
    if times > d {
        return Err(TTError::Order(times));
    }
    let keep = d - times;
    for &n in &a.dims[keep..] {
        if n != x.len() {
            return Err(TTError::DimensionMismatch { expected: n, got: x.len() });
        }
    }
    let out_dims = a.dims[..keep].to_vec();
    let out_len: usize = out_dims.iter().product();
    let mut values = vec![0.0; out_len];
    let mut idx = vec![0usize; d];
    for &v in &a.values {
        let mut w = v;
        for &j in &idx[keep..] {
            w *= x[j];
        }
        let o = idx[..keep].iter().zip(&out_dims).fold(0, |acc, (&i, &n)| acc * n + i);
        values[o] += w;
        increment(&mut idx, &a.dims);
    }
    Ok(DenseTensor { dims: out_dims, values })
}

/// Power method on a dense tensor with the same iteration rule as
/// [`crate::eigen::shopm`].
pub fn dense_shopm(a: &DenseTensor<f64>, cfg: &SolverConfig, x0: &[f64]) -> Result<Eigenpair, EigenError> {
    cfg.validate()?;
    let d = a.order();
    let n = x0.len();
    if a.dims.iter().any(|&m| m != n) {
        return Err(EigenError::DimensionMismatch { expected: a.dims[0], got: n });
    }
    let m = match cfg.mode {
        Mode::H => d,
        Mode::Z => 2,
        Mode::B => return Err(EigenError::Mode(Mode::B)),
    };
    let unit = |v: &[f64]| -> Result<Vec<f64>, EigenError> {
        let s = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if s == 0.0 {
            return Err(EigenError::ZeroVector);
        }
        Ok(v.iter().map(|t| t / s).collect())
    };
    let value = |x: &[f64]| -> Result<f64, EigenError> {
        let ax = dense_contract(a, x, d)?.values[0];
        let mnorm: f64 = x.iter().map(|t| t.abs().powi(m as i32)).sum();
        Ok(ax / mnorm)
    };

    let mut x = unit(x0)?;
    let mut lambda = value(&x)?;
    let mut y = dense_contract(a, &x, d - 1)?.values;
    let mut done = false;
    let mut iterations = 0;
    let mut trace = Vec::new();
    for k in 1..=cfg.max_iters {
        let mut z = y.clone();
        if m > 2 {
            for (i, v) in z.iter_mut().enumerate() {
                if *v < 0.0 {
                    return Err(EigenError::NegativeEntry { index: i, value: *v });
                }
                *v = v.powf(1.0 / (m - 1) as f64);
            }
        }
        x = unit(&z)?;
        let prev = lambda;
        lambda = value(&x)?;
        y = dense_contract(a, &x, d - 1)?.values;
        iterations = k;
        trace.push(TraceRow {
            iter: k,
            lambda,
            alpha: None,
            residual: f64::NAN,
            x: None,
        });
        if (lambda - prev).abs() <= cfg.tol * lambda.abs().max(1.0) {
            done = true;
            break;
        }
    }
    let residual = x
        .iter()
        .zip(&y)
        .map(|(&xi, &yi)| {
            let b = if cfg.mode == Mode::H { xi.powi(d as i32 - 1) } else { xi };
            (yi - lambda * b).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(Eigenpair {
        lambda,
        x,
        iterations,
        converged: done,
        residual,
        trace,
    })
}

/// Dense provider for solver cross-checks. All modes must have equal size.
impl ContractionProvider for DenseTensor<f64> {
    fn dim(&self) -> usize {
        self.dims[0]
    }
    fn order(&self) -> usize {
        DenseTensor::order(self)
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        dense_contract(self, x, self.dims.len()).expect("vector length matches tensor").values[0]
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        dense_contract(self, x, self.dims.len() - 1).expect("vector length matches tensor").values
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dims[0];
        let m = dense_contract(self, x, self.dims.len() - 2).expect("vector length matches tensor");
        DMatrix::from_row_slice(n, n, &m.values)
    }
}
