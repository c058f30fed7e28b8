use super::{converged, normalized, EigenError, Eigenpair, Mode, SolverConfig, TraceRow};
use crate::tt::{Scalar, TTTensor};

/// Symmetric higher-order power method in TT form.
///
/// Iterates `y = Ax^{d-1}`, `x ← y^{[1/(m-1)]}/‖·‖`, `λ = Ax^d/‖x‖_m^m` with
/// `m = d` for H-eigenpairs and `m = 2` for Z-eigenpairs. `Ax^d` is formed
/// as `xᵀ(Ax^{d-1})`, which reuses the vector contraction of the next step.
pub fn shopm<T: Scalar>(a: &TTTensor<T>, cfg: &SolverConfig, x0: &[T]) -> Result<Eigenpair<T>, EigenError> {
    cfg.validate()?;
    let d = a.order();
    let n = a.uniform_dim().ok_or_else(|| EigenError::Config("tensor modes differ in size".into()))?;
    if x0.len() != n {
        return Err(EigenError::DimensionMismatch { expected: n, got: x0.len() });
    }
    if d < 2 {
        return Err(EigenError::Config(format!("order {d} < 2")));
    }
    let m = match cfg.mode {
        Mode::H => d,
        Mode::Z => 2,
        Mode::B => return Err(EigenError::Mode(Mode::B)),
    };
    let tol = T::from_f64_lossy(cfg.tol);
    let root = T::one() / T::from_usize(m - 1).unwrap();

    let mut x = normalized(x0).ok_or(EigenError::ZeroVector)?;
    let mut y = a.contract_vector(&x)?;
    let mut lambda = rayleigh(&x, &y, m);
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut done = false;
    let mut iterations = 0;

    for k in 1..=cfg.max_iters {
        let z: Vec<T> = if m == 2 {
            y.clone()
        } else {
            let mut z = Vec::with_capacity(n);
            for (i, &v) in y.iter().enumerate() {
                if v < T::zero() {
                    return Err(EigenError::NegativeEntry { index: i, value: v.to_f64_lossy() });
                }
                z.push(v.powf(root));
            }
            z
        };
        x = normalized(&z).ok_or(EigenError::ZeroVector)?;
        y = a.contract_vector(&x)?;
        let prev = lambda;
        lambda = rayleigh(&x, &y, m);
        iterations = k;
        trace.push(TraceRow {
            iter: k,
            lambda,
            alpha: None,
            residual: defect(&x, &y, lambda, cfg.mode, d),
            x: cfg.keep_iterates.then(|| x.clone()),
        });
        if converged(prev, lambda, tol) {
            done = true;
            break;
        }
    }

    let residual = defect(&x, &y, lambda, cfg.mode, d);
    Ok(Eigenpair {
        lambda,
        x,
        iterations,
        converged: done,
        residual,
        trace,
    })
}

fn rayleigh<T: Scalar>(x: &[T], y: &[T], m: usize) -> T {
    let num: T = x.iter().zip(y).map(|(&p, &q)| p * q).sum();
    let den: T = if m == 2 {
        x.iter().map(|&v| v * v).sum()
    } else {
        x.iter().map(|&v| v.abs().powi(m as i32)).sum()
    };
    num / den
}

/// Defect against `δ` (H) or `ℰ` (Z) for a unit `x`.
fn defect<T: Scalar>(x: &[T], y: &[T], lambda: T, mode: Mode, d: usize) -> T {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let b = if mode == Mode::H { xi.powi(d as i32 - 1) } else { xi };
            let r = yi - lambda * b;
            r * r
        })
        .sum::<T>()
        .sqrt()
}
