//! Extremal tensor eigenvalues: the symmetric higher-order power method for
//! dominant H-/Z-eigenpairs and the adaptive-shift GEAP iteration for
//! minimal (and generalized B-) eigenpairs.
//!
//! Both solvers only touch a tensor through the three contractions
//! `Bx^d`, `Bx^{d-1}` and `Bx^{d-2}`, abstracted by [`ContractionProvider`].

mod bound;
mod geap;
mod provider;
mod shopm;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tt::{Scalar, TTError};

pub use bound::{eigen_bound, gershgorin_disks, Disk};
pub use geap::{geap, hessian, prescreen, shift_alpha};
pub use provider::{ContractionProvider, IdentityTensor, Kronecker, Negated};
pub use shopm::shopm;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("negative entry {value} at position {index} under a fractional power; use GEAP for mixed-sign iterates")]
    NegativeEntry { index: usize, value: f64 },
    #[error("Bx^d = {value} at iteration {iteration}; B is not positive definite along the iterate path")]
    NotPositiveDefinite { iteration: usize, value: f64 },
    #[error("Bx^d = 0: Hessian undefined")]
    SingularB,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("order mismatch: {a} vs {b}")]
    OrderMismatch { a: usize, b: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mode {0} is not supported by this solver")]
    Mode(Mode),
    #[error(transparent)]
    Tensor(#[from] TTError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Eigenproblem flavour: `H` uses the Kronecker tensor, `Z` the identity
/// tensor and `B` a user supplied right-hand tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    H,
    Z,
    B,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::H => "H",
            Mode::Z => "Z",
            Mode::B => "B",
        })
    }
}

impl FromStr for Mode {
    type Err = EigenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" => Ok(Mode::H),
            "Z" | "z" => Ok(Mode::Z),
            "B" | "b" => Ok(Mode::B),
            other => Err(EigenError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// How GEAP obtains `λ_min(βH)` for the shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumBound {
    /// Full symmetric eigendecomposition.
    #[default]
    Exact,
    /// Gershgorin lower bound; cheaper, more conservative shift.
    Gershgorin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    /// `+1` maximizes, `-1` minimizes.
    pub beta: f64,
    pub tau: f64,
    /// Stop once `|λ_k - λ_{k-1}| <= tol · max(1, |λ_k|)`.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub spectrum: SpectrumBound,
    /// Store every iterate in the trace (memory `O(iters · n)`).
    pub keep_iterates: bool,
}

impl SolverConfig {
    /// Power-method defaults: 20 iterations, tolerance 1e-14.
    pub fn shopm(mode: Mode) -> Self {
        SolverConfig {
            mode,
            beta: 1.0,
            tau: 10.0,
            tol: 1e-14,
            max_iters: 20,
            seed: 0,
            spectrum: SpectrumBound::Exact,
            keep_iterates: false,
        }
    }

    /// GEAP defaults: 500 iterations, τ = 10, tolerance 1e-14.
    pub fn geap(mode: Mode, beta: f64) -> Self {
        SolverConfig {
            beta,
            max_iters: 500,
            ..Self::shopm(mode)
        }
    }

    pub fn validate(&self) -> Result<(), EigenError> {
        if self.beta != 1.0 && self.beta != -1.0 {
            return Err(EigenError::Config(format!("beta must be +1 or -1, got {}", self.beta)));
        }
        if !(self.tau > 0.0) {
            return Err(EigenError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.tol > 0.0) {
            return Err(EigenError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One solver step for convergence plots. `alpha` is the shift applied
/// when leaving this iterate (absent for the power method and the final
/// GEAP iterate).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T = f64> {
    pub iter: usize,
    pub lambda: T,
    pub alpha: Option<f64>,
    pub residual: T,
    pub x: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair<T = f64> {
    pub lambda: T,
    pub x: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: T,
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> Eigenpair<T> {
    /// Trace as CSV with header `iter,lambda,alpha,residual`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<(), EigenError> {
        writeln!(w, "iter,lambda,alpha,residual")?;
        for r in &self.trace {
            let alpha = r.alpha.map(|a| a.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.iter, r.lambda, alpha, r.residual)?;
        }
        Ok(())
    }
}

/// `‖Ax^{d-1} - λ Bx^{d-1}‖` for a candidate pair.
pub fn residual<A, B>(a: &A, b: &B, pair: &Eigenpair) -> f64
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    let ax = a.vector(&pair.x);
    let bx = b.vector(&pair.x);
    ax.iter()
        .zip(&bx)
        .map(|(p, q)| (p - pair.lambda * q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Seeded random starting vector, unit Euclidean norm.
///
/// Entries are uniform in `[0,1]` when `nonnegative`, else in `[-1,1]`.
/// Each `trial` reads its own ChaCha stream, so guesses do not depend on
/// the order in which trials are drawn.
pub fn random_guess(n: usize, seed: u64, trial: u64, nonnegative: bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    loop {
        let x: Vec<f64> = (0..n)
            .map(|_| {
                if nonnegative {
                    rng.random_range(0.0..=1.0)
                } else {
                    rng.random_range(-1.0..=1.0)
                }
            })
            .collect();
        if let Some(u) = normalized(&x) {
            return u;
        }
    }
}

pub(crate) fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub(crate) fn normalized<T: Scalar>(x: &[T]) -> Option<Vec<T>> {
    let s = norm2(x);
    if s == T::zero() || !s.is_finite() {
        return None;
    }
    Some(x.iter().map(|&v| v / s).collect())
}

pub(crate) fn converged<T: Scalar>(prev: T, cur: T, tol: T) -> bool {
    (cur - prev).abs() <= tol * cur.abs().max(T::one())
}
