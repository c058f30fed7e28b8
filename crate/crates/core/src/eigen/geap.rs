use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{
    converged, normalized, random_guess, ContractionProvider, EigenError, Eigenpair, SolverConfig, SpectrumBound,
    TraceRow,
};

/// The six contractions GEAP needs at one iterate.
struct Contractions {
    ax: f64,
    av: DVector<f64>,
    am: DMatrix<f64>,
    bx: f64,
    bv: DVector<f64>,
    bm: DMatrix<f64>,
}

impl Contractions {
    fn new<A, B>(a: &A, b: &B, x: &[f64]) -> Self
    where
        A: ContractionProvider + ?Sized,
        B: ContractionProvider + ?Sized,
    {
        Contractions {
            ax: a.scalar(x),
            av: DVector::from_vec(a.vector(x)),
            am: a.matrix(x),
            bx: b.scalar(x),
            bv: DVector::from_vec(b.vector(x)),
            bm: b.matrix(x),
        }
    }
}

fn check_pair<A, B>(a: &A, b: &B, n: usize) -> Result<usize, EigenError>
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    if a.order() != b.order() {
        return Err(EigenError::OrderMismatch { a: a.order(), b: b.order() });
    }
    if a.order() < 2 {
        return Err(EigenError::Config(format!("order {} < 2", a.order())));
    }
    for got in [a.dim(), b.dim()] {
        if got != n {
            return Err(EigenError::DimensionMismatch { expected: n, got });
        }
    }
    Ok(a.order())
}

/// Hessian of `f(x) = (Ax^d / Bx^d)·‖x‖^d` at a unit vector `x`.
pub fn hessian<A, B>(a: &A, b: &B, x: &[f64]) -> Result<DMatrix<f64>, EigenError>
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    let d = check_pair(a, b, x.len())?;
    let c = Contractions::new(a, b, x);
    if c.bx == 0.0 {
        return Err(EigenError::SingularB);
    }
    Ok(hessian_from(&c, x, d))
}

fn hessian_from(c: &Contractions, x: &[f64], d: usize) -> DMatrix<f64> {
    let n = x.len();
    let d = d as f64;
    let xv = DVector::from_column_slice(x);
    let sym = |p: &DVector<f64>, q: &DVector<f64>| p * q.transpose() + q * p.transpose();
    let (ax, bx) = (c.ax, c.bx);

    let mut h = &c.am * (d - 1.0) + (DMatrix::identity(n, n) + &xv * xv.transpose() * (d - 2.0)) * ax
        + sym(&c.av, &xv) * d;
    h *= d / bx;
    h += &c.bv * c.bv.transpose() * (2.0 * d * d * ax / (bx * bx * bx));
    let tail = &c.bm * ((d - 1.0) * ax) + sym(&c.av, &c.bv) * d + sym(&xv, &c.bv) * (d * ax);
    h -= tail * (d / (bx * bx));
    (&h + h.transpose()) * 0.5
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

fn gershgorin_min(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| {
            let off: f64 = (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            m[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// Adaptive shift `α = β·max(0, (τ - λ_min(βH))/d)`, which makes
/// `β(H + αd·I)` have smallest eigenvalue at least `τ`.
pub fn shift_alpha(h: &DMatrix<f64>, tau: f64, beta: f64, d: usize) -> f64 {
    alpha_from_min(min_eigenvalue(&(h * beta)), tau, beta, d)
}

fn alpha_from_min(lmin: f64, tau: f64, beta: f64, d: usize) -> f64 {
    beta * ((tau - lmin) / d as f64).max(0.0)
}

/// Generalized eigenproblem adaptive power method for `Ax^{d-1} = λBx^{d-1}`.
///
/// `cfg.beta = +1` climbs towards a maximal, `-1` descends towards a minimal
/// eigenvalue. `B` must stay positive definite along the iterate path.
pub fn geap<A, B>(a: &A, b: &B, cfg: &SolverConfig, x0: &[f64]) -> Result<Eigenpair, EigenError>
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    cfg.validate()?;
    let d = check_pair(a, b, x0.len())?;
    let beta = cfg.beta;
    let mut x = normalized(x0).ok_or(EigenError::ZeroVector)?;
    let mut prev: Option<f64> = None;
    let mut trace = Vec::new();

    for k in 0..=cfg.max_iters {
        let bx = b.scalar(&x);
        if !(bx > 0.0) {
            return Err(EigenError::NotPositiveDefinite { iteration: k, value: bx });
        }
        let ax = a.scalar(&x);
        let av = a.vector(&x);
        let bv = b.vector(&x);
        let lambda = ax / bx;
        let res = av.iter().zip(&bv).map(|(p, q)| (p - lambda * q).powi(2)).sum::<f64>().sqrt();
        let done = prev.is_some_and(|p| converged(p, lambda, cfg.tol));
        if done || k == cfg.max_iters {
            trace.push(TraceRow {
                iter: k,
                lambda,
                alpha: None,
                residual: res,
                x: cfg.keep_iterates.then(|| x.clone()),
            });
            return Ok(Eigenpair {
                lambda,
                x,
                iterations: k,
                converged: done,
                residual: res,
                trace,
            });
        }

        let c = Contractions {
            ax,
            av: DVector::from_vec(av),
            am: a.matrix(&x),
            bx,
            bv: DVector::from_vec(bv),
            bm: b.matrix(&x),
        };
        let h = hessian_from(&c, &x, d);
        let scaled = &h * beta;
        let lmin = match cfg.spectrum {
            SpectrumBound::Exact => min_eigenvalue(&scaled),
            SpectrumBound::Gershgorin => gershgorin_min(&scaled),
        };
        let alpha = alpha_from_min(lmin, cfg.tau, beta, d);
        trace.push(TraceRow {
            iter: k,
            lambda,
            alpha: Some(alpha),
            residual: res,
            x: cfg.keep_iterates.then(|| x.clone()),
        });

        let step = (alpha + lambda) * bx;
        let xhat: Vec<f64> = (0..x.len())
            .map(|i| beta * (c.av[i] - lambda * c.bv[i] + step * x[i]))
            .collect();
        x = normalized(&xhat).ok_or(EigenError::ZeroVector)?;
        prev = Some(lambda);
    }
    unreachable!("loop returns at k == max_iters")
}

/// Pick a starting vector for a full GEAP run: draw `num_guesses` seeded
/// random unit vectors in `[-1,1]^n`, run `pre_iters` GEAP steps from each
/// and keep the guess whose value is smallest in magnitude (lowest index on
/// ties). Guesses whose short run fails are skipped.
pub fn prescreen<A, B>(
    a: &A,
    b: &B,
    cfg: &SolverConfig,
    num_guesses: usize,
    pre_iters: usize,
) -> Result<Vec<f64>, EigenError>
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    if num_guesses == 0 {
        return Err(EigenError::Config("num_guesses must be at least 1".into()));
    }
    let n = a.dim();
    check_pair(a, b, n)?;
    let short = SolverConfig {
        max_iters: pre_iters,
        keep_iterates: false,
        ..cfg.clone()
    };
    let scores: Vec<Option<f64>> = (0..num_guesses)
        .into_par_iter()
        .map(|t| {
            let x0 = random_guess(n, cfg.seed, t as u64, false);
            geap(a, b, &short, &x0).ok().map(|p| p.lambda.abs()).filter(|v| v.is_finite())
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (t, s) in scores.into_iter().enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((t, v));
            }
        }
    }
    let pick = best.map_or(0, |(t, _)| t);
    Ok(random_guess(n, cfg.seed, pick as u64, false))
}
