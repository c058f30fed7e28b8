//! DMRG-style cross interpolation: build a tensor-train from an element
//! oracle without forming the full array.
//!
//! Each step samples the two-site supercore `W_k(α i_k, i_{k+1} β)` on the
//! current nested left/right index sets, truncates its SVD and picks new
//! interpolation indices with [`maxvol`]. A left-to-right plus a
//! right-to-left pass make one sweep.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{lcm_all, ArithFn, LatticeError};
use crate::tt::{Core, TTError, TTTensor};

#[derive(Debug, Error)]
pub enum CrossError {
    #[error("matrix is rank deficient (column {0})")]
    RankDeficient(usize),
    #[error("maxvol needs at least as many rows as columns, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("invalid cross configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TTError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A deterministic function of a multi-index.
pub struct ElementOracle<'a> {
    pub dims: Vec<usize>,
    eval: Box<dyn Fn(&[usize]) -> f64 + Send + Sync + 'a>,
}

impl<'a> ElementOracle<'a> {
    pub fn new(dims: Vec<usize>, eval: impl Fn(&[usize]) -> f64 + Send + Sync + 'a) -> Self {
        ElementOracle {
            dims,
            eval: Box::new(eval),
        }
    }

    pub fn eval(&self, idx: &[usize]) -> f64 {
        (self.eval)(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossConfig {
    /// Singular values below `eps · σ_max` of a supercore are dropped.
    pub eps: f64,
    pub max_sweeps: usize,
    pub initial_rank: usize,
    pub seed: u64,
    pub max_rank: Option<usize>,
    /// Random extra rows/columns added to each index set during sweeps so
    /// that weak rank components are sampled; dropped in the final sweep.
    pub kick_rank: usize,
    /// Multi-indices always present in the initial index sets, for
    /// functions with isolated features random sampling would miss.
    pub pivots: Vec<Vec<usize>>,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            eps: 1e-14,
            max_sweeps: 20,
            initial_rank: 2,
            seed: 0,
            max_rank: None,
            kick_rank: 4,
            pivots: Vec::new(),
        }
    }
}

impl CrossConfig {
    pub fn validate(&self) -> Result<(), CrossError> {
        if !(self.eps > 0.0) {
            return Err(CrossError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_sweeps == 0 {
            return Err(CrossError::Config("max_sweeps must be at least 1".into()));
        }
        if self.initial_rank == 0 {
            return Err(CrossError::Config("initial_rank must be at least 1".into()));
        }
        if self.max_rank == Some(0) {
            return Err(CrossError::Config("max_rank must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CrossResult {
    pub tt: TTTensor<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Some supercore of the last sweep had more significant singular
    /// values than `max_rank`.
    pub rank_capped: bool,
    /// Relative Frobenius error against the oracle on the control sample.
    pub sample_error: f64,
    /// Largest relative gap between an element and its index-reversed
    /// counterpart on the control sample (0 for symmetric output).
    pub symmetry_error: f64,
}

const MAXVOL_DELTA: f64 = 1e-2;
const MAXVOL_SWAPS: usize = 200;
const CONTROL_SAMPLES: usize = 1000;
/// Consecutive unchanged sweeps required before stopping.
const STABLE_SWEEPS: usize = 2;

/// `m · m[idx]⁻¹`, with the rows `idx` set to exact unit vectors.
fn interpolation_matrix(m: &DMatrix<f64>, idx: &[usize]) -> Result<DMatrix<f64>, CrossError> {
    let r = m.ncols();
    let sub = m.select_rows(idx);
    let lu = sub.transpose().lu();
    let mut b = lu
        .solve(&m.transpose())
        .ok_or(CrossError::RankDeficient(r))?
        .transpose();
    for (j, &i) in idx.iter().enumerate() {
        for c in 0..r {
            b[(i, c)] = if c == j { 1.0 } else { 0.0 };
        }
    }
    Ok(b)
}

/// Rows of a quasi-dominant `r × r` submatrix of a tall `m` (`N × r`).
///
/// Starts from the pivots of Gaussian elimination with partial pivoting,
/// then swaps in the row holding the largest entry of `m·m[idx]⁻¹` while
/// that entry exceeds `1 + 1e-2` (at most 200 swaps).
pub fn maxvol(m: &DMatrix<f64>) -> Result<Vec<usize>, CrossError> {
    let (rows, r) = m.shape();
    if rows < r {
        return Err(CrossError::Shape { rows, cols: r });
    }
    let scale = m.amax();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..rows).collect();
    for j in 0..r {
        let (p, piv) = (j..rows)
            .map(|i| (i, a[(i, j)].abs()))
            .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv > 1e-14 * scale) {
            return Err(CrossError::RankDeficient(j));
        }
        a.swap_rows(j, p);
        perm.swap(j, p);
        for i in j + 1..rows {
            let f = a[(i, j)] / a[(j, j)];
            if f != 0.0 {
                for c in j..r {
                    a[(i, c)] -= f * a[(j, c)];
                }
            }
        }
    }
    let mut idx: Vec<usize> = perm[..r].to_vec();

    for _ in 0..MAXVOL_SWAPS {
        let b = interpolation_matrix(m, &idx)?;
        let (i, j) = b.iamax_full();
        if b[(i, j)].abs() <= 1.0 + MAXVOL_DELTA {
            break;
        }
        idx[j] = i;
    }
    Ok(idx)
}

/// Kept rank: singular values above `eps · σ_max`, at least one.
fn truncation_rank(sv: &[f64], eps: f64) -> usize {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > eps * smax).count().max(1)
}

struct Sweeper<'o, 'a> {
    oracle: &'o ElementOracle<'a>,
    cfg: &'o CrossConfig,
    d: usize,
    /// `left[k]`: multi-indices over modes `0..k`.
    left: Vec<Vec<Vec<usize>>>,
    /// `right[k]`: multi-indices over modes `k..d`.
    right: Vec<Vec<Vec<usize>>>,
    cores: Vec<Option<Core<f64>>>,
    capped: bool,
    /// Kept rank per bond from the latest pass.
    revealed: Vec<usize>,
    kick: usize,
    rng: ChaCha8Rng,
}

impl Sweeper<'_, '_> {
    fn supercore(&self, k: usize) -> DMatrix<f64> {
        let (nl, nr) = (self.oracle.dims[k], self.oracle.dims[k + 1]);
        let (li, rj) = (&self.left[k], &self.right[k + 2]);
        let rows = li.len() * nl;
        let cols = nr * rj.len();
        let vals: Vec<f64> = (0..rows * cols)
            .into_par_iter()
            .map(|flat| {
                let (row, col) = (flat / cols, flat % cols);
                let (alpha, i) = (row / nl, row % nl);
                let (j, beta) = (col / rj.len(), col % rj.len());
                let mut idx = Vec::with_capacity(self.d);
                idx.extend_from_slice(&li[alpha]);
                idx.push(i);
                idx.push(j);
                idx.extend_from_slice(&rj[beta]);
                self.oracle.eval(&idx)
            })
            .collect();
        DMatrix::from_row_slice(rows, cols, &vals)
    }

    /// Truncated SVD factors `(U_r, V_r)` of a supercore.
    fn factor(&mut self, w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let svd = w.clone().svd(true, true);
        let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
        let mut r = truncation_rank(&sv, self.cfg.eps);
        if let Some(cap) = self.cfg.max_rank {
            if r > cap {
                self.capped = true;
                r = cap;
            }
        }
        // nalgebra does not sort singular values
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
        let keep = &order[..r];
        let u = svd.u.expect("requested U").select_columns(keep);
        let v = svd.v_t.expect("requested V").select_rows(keep).transpose();
        (u, v)
    }

    /// `idx` plus up to `kick` distinct random positions below `len`.
    fn enrich(&mut self, mut idx: Vec<usize>, len: usize) -> Vec<usize> {
        let extra = self.kick.min(len - idx.len());
        let target = idx.len() + extra;
        while idx.len() < target {
            let c = self.rng.random_range(0..len);
            if !idx.contains(&c) {
                idx.push(c);
            }
        }
        idx
    }

    fn left_step(&mut self, k: usize, last: bool) -> Result<(), CrossError> {
        let w = self.supercore(k);
        let (u, _) = self.factor(&w);
        let piv = maxvol(&u)?;
        let b = interpolation_matrix(&u, &piv)?;
        let r = piv.len();
        self.revealed[k] = r;
        let idx = self.enrich(piv, u.nrows());
        let (nl, nr) = (self.oracle.dims[k], self.oracle.dims[k + 1]);
        let rl = self.left[k].len();
        let rk = idx.len();
        // enrichment columns carry zeros: they only widen the sampling
        self.cores[k] = Some(Core::from_fn(rl, nl, rk, |a, i, c| if c < r { b[(a * nl + i, c)] } else { 0.0 }));
        let next: Vec<Vec<usize>> = idx
            .iter()
            .map(|&row| {
                let mut m = self.left[k][row / nl].clone();
                m.push(row % nl);
                m
            })
            .collect();
        self.left[k + 1] = next;
        if last {
            let rr = self.right[k + 2].len();
            self.cores[k + 1] = Some(Core::from_fn(rk, nr, rr, |a, j, beta| w[(idx[a], j * rr + beta)]));
        }
        Ok(())
    }

    fn right_step(&mut self, k: usize, last: bool) -> Result<(), CrossError> {
        let w = self.supercore(k);
        let (_, v) = self.factor(&w);
        let piv = maxvol(&v)?;
        let b = interpolation_matrix(&v, &piv)?;
        let r = piv.len();
        self.revealed[k] = r;
        let idx = self.enrich(piv, v.nrows());
        let (nl, nr) = (self.oracle.dims[k], self.oracle.dims[k + 1]);
        let rr = self.right[k + 2].len();
        let rk = idx.len();
        self.cores[k + 1] = Some(Core::from_fn(rk, nr, rr, |a, j, beta| if a < r { b[(j * rr + beta, a)] } else { 0.0 }));
        let next: Vec<Vec<usize>> = idx
            .iter()
            .map(|&col| {
                let mut m = vec![col / rr];
                m.extend_from_slice(&self.right[k + 2][col % rr]);
                m
            })
            .collect();
        self.right[k + 1] = next;
        if last {
            let rl = self.left[k].len();
            self.cores[k] = Some(Core::from_fn(rl, nl, rk, |alpha, i, c| w[(alpha * nl + i, idx[c])]));
        }
        Ok(())
    }

    /// Adds the suffixes of `idx` to the right index sets (keeps nesting).
    fn inject(&mut self, idx: &[usize]) {
        for k in 1..self.d {
            let suffix = idx[k..].to_vec();
            if !self.right[k].contains(&suffix) {
                self.right[k].push(suffix);
            }
        }
    }

    fn assemble(&self) -> Result<TTTensor<f64>, CrossError> {
        let cores = self.cores.iter().map(|c| c.clone().expect("core set by sweep")).collect();
        Ok(TTTensor::from_cores(cores)?)
    }
}

fn random_index(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<usize> {
    dims.iter().map(|&n| rng.random_range(0..n)).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// Cross-interpolates `oracle` as a tensor-train.
///
/// Stops once the ranks stop changing and the values on a fixed random
/// control sample move by less than `eps` (relative, Frobenius) between
/// sweeps; otherwise returns the last iterate with `converged = false`.
pub fn dmrg_cross(oracle: &ElementOracle<'_>, cfg: &CrossConfig) -> Result<CrossResult, CrossError> {
    cfg.validate()?;
    let dims = &oracle.dims;
    let d = dims.len();
    if d == 0 || dims.contains(&0) {
        return Err(CrossError::Config(format!("dims must be nonempty and positive, got {dims:?}")));
    }
    if let Some(p) = cfg.pivots.iter().find(|p| p.len() != d || p.iter().zip(dims).any(|(&i, &n)| i >= n)) {
        return Err(CrossError::Config(format!("pivot {p:?} does not fit dims {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let control: Vec<Vec<usize>> = (0..CONTROL_SAMPLES).map(|_| random_index(&mut rng, dims)).collect();
    let exact: Vec<f64> = control.iter().map(|idx| oracle.eval(idx)).collect();

    if d == 1 {
        let tt = TTTensor::from_cores(vec![Core::from_fn(1, dims[0], 1, |_, i, _| oracle.eval(&[i]))])?;
        let got: Vec<f64> = control.iter().map(|idx| tt.element_unchecked(idx)).collect();
        return Ok(CrossResult {
            tt,
            converged: true,
            sweeps: 0,
            rank_capped: false,
            sample_error: rel_diff(&got, &exact),
            symmetry_error: 0.0,
        });
    }

    // random nested right index sets
    let mut right: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    right[d] = vec![Vec::new()];
    for k in (1..d).rev() {
        let left_size = dims[..k].iter().try_fold(1usize, |p, &n| p.checked_mul(n)).unwrap_or(usize::MAX);
        let pool = dims[k] * right[k + 1].len();
        let rr = right[k + 1].len();
        let mut chosen: Vec<usize> = Vec::new();
        for p in &cfg.pivots {
            let beta = right[k + 1].iter().position(|m| m[..] == p[k + 1..]).expect("pivot suffixes are nested");
            let c = p[k] * rr + beta;
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        let r = cfg.initial_rank.max(chosen.len()).min(pool).min(left_size);
        while chosen.len() < r {
            let c = rng.random_range(0..pool);
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        right[k] = chosen
            .into_iter()
            .map(|c| {
                let mut m = vec![c / rr];
                m.extend_from_slice(&right[k + 1][c % rr]);
                m
            })
            .collect();
    }
    let mut left: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    left[0] = vec![Vec::new()];

    let mut sw = Sweeper {
        oracle,
        cfg,
        d,
        left,
        right,
        cores: vec![None; d],
        capped: false,
        revealed: vec![0; d - 1],
        kick: cfg.kick_rank,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    sw.rng.set_stream(1);
    let threshold = cfg.eps.max(64.0 * f64::EPSILON);
    let mut prev: Option<(Vec<usize>, Vec<f64>)> = None;
    let mut converged = false;
    let mut sweeps = 0;

    let sweep = |sw: &mut Sweeper| -> Result<(TTTensor<f64>, Vec<usize>, Vec<f64>), CrossError> {
        sw.capped = false;
        for k in 0..d - 1 {
            sw.left_step(k, k == d - 2)?;
        }
        for k in (0..d - 1).rev() {
            sw.right_step(k, k == 0)?;
        }
        let cur = sw.assemble()?;
        let vals: Vec<f64> = control.iter().map(|idx| cur.element_unchecked(idx)).collect();
        Ok((cur, sw.revealed.clone(), vals))
    };

    let accuracy = 10.0 * threshold;
    let mut stable = 0;

    // enriched sweeps until the revealed ranks and the control values settle
    // and the control sample is reproduced
    while sweeps < cfg.max_sweeps {
        let (_, ranks, vals) = sweep(&mut sw)?;
        sweeps += 1;
        let err = rel_diff(&vals, &exact);
        let settled = prev
            .as_ref()
            .is_some_and(|(pr, pv)| *pr == ranks && rel_diff(&vals, pv) <= threshold && err <= accuracy);
        stable = if settled { stable + 1 } else { 0 };
        converged = stable >= STABLE_SWEEPS;
        if converged {
            prev = Some((ranks, vals));
            break;
        }
        if err > accuracy {
            // steer the next sweep towards the worst reproduced control points
            let mut worst: Vec<usize> = (0..control.len()).collect();
            worst.sort_by(|&a, &b| (vals[b] - exact[b]).abs().total_cmp(&(vals[a] - exact[a]).abs()).then(a.cmp(&b)));
            for &c in worst.iter().take(cfg.kick_rank.max(1)) {
                sw.inject(&control[c]);
            }
        }
        prev = Some((ranks, vals));
    }
    // one plain sweep so the output carries exactly the revealed ranks
    sw.kick = 0;
    let (tt, ranks, vals) = sweep(&mut sw)?;
    sweeps += 1;
    if let Some((pr, pv)) = &prev {
        converged &= *pr == ranks && rel_diff(&vals, pv) <= threshold && rel_diff(&vals, &exact) <= accuracy;
    }

    let symmetry_error = if dims.iter().all(|&n| n == dims[0]) {
        control
            .iter()
            .zip(&vals)
            .map(|(idx, &v)| {
                let rev: Vec<usize> = idx.iter().rev().cloned().collect();
                let w = tt.element_unchecked(&rev);
                (v - w).abs() / v.abs().max(w.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    Ok(CrossResult {
        sample_error: rel_diff(&vals, &exact),
        tt,
        converged,
        sweeps,
        rank_capped: sw.capped,
        symmetry_error,
    })
}

/// Join (LCM) tensor of `{1, …, n}` under `f`, built by cross interpolation.
pub fn lcm_tt(n: usize, d: usize, f: &ArithFn, cfg: &CrossConfig) -> Result<CrossResult, CrossError> {
    if n == 0 {
        return Err(CrossError::Config("n must be at least 1".into()));
    }
    if d < 2 {
        return Err(CrossError::Config(format!("order {d} < 2")));
    }
    // every entry is at most min(n^d, lcm(1..n)); fail early if both overflow
    if (n as u64).checked_pow(d as u32).is_none() {
        lcm_all(&(1..=n as u64).collect::<Vec<_>>())?;
    }
    let oracle = ElementOracle::new(vec![n; d], |idx| {
        let l = idx
            .iter()
            .fold(1u64, |acc, &i| crate::lattice::lcm(acc, i as u64 + 1).expect("bounded by lcm(1..n)"));
        f.eval(l)
    });
    // the all-ones entry (lattice bottom) is isolated: anchor it
    let cfg = CrossConfig {
        pivots: std::iter::once(vec![0; d]).chain(cfg.pivots.iter().cloned()).collect(),
        ..cfg.clone()
    };
    dmrg_cross(&oracle, &cfg)
}
