//! The experiment commands. Each returns a [`Report`]: the CSV (or text)
//! body plus notes for stderr, such as skipped cells.

use anyhow::{bail, Context, Result};
use lattice_tt::eigen::{
    eigen_bound, geap, gershgorin_disks, prescreen, random_guess, shopm, ContractionProvider, Eigenpair,
    IdentityTensor, Kronecker, Mode, Negated, SolverConfig,
};
use lattice_tt::lattice::{coprime_product_count, LatticeSet};
use lattice_tt::tt::{meet_tt, TTTensor};
use rayon::prelude::*;

use crate::cache::load_or_build;
use crate::config::{ExperimentSpec, Kind};

/// Magnitudes beyond this are reported as skipped rather than emitted.
pub const MAGNITUDE_CAP: f64 = 1e300;
/// Default iteration cap of the full GEAP run after prescreening.
pub const GEAP_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub body: String,
    pub notes: Vec<String>,
}

impl Report {
    fn csv(header: &str) -> Report {
        Report {
            body: format!("{header}\n"),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.body.push_str(&fields.join(","));
        self.body.push('\n');
    }
}

/// Cell outcome: a CSV row, a skip reason, or both a row and a note.
enum Cell {
    Row(Vec<String>, Option<String>),
    Skip(String),
}

fn collect(mut report: Report, cells: Vec<Cell>) -> Report {
    for c in cells {
        match c {
            Cell::Row(r, note) => {
                report.row(&r);
                report.notes.extend(note);
            }
            Cell::Skip(why) => report.notes.push(format!("skipped {why}")),
        }
    }
    report
}

fn grid(spec: &ExperimentSpec) -> Vec<(u64, usize)> {
    spec.ns.iter().flat_map(|&n| spec.ds.iter().map(move |&d| (n, d))).collect()
}

fn smith(n: u64, spec: &ExperimentSpec, d: usize) -> Result<TTTensor> {
    Ok(meet_tt(&LatticeSet::range(n)?, &spec.f, d)?)
}

pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    match spec.kind {
        Kind::Storage => storage(spec),
        Kind::Ranks => ranks(spec),
        Kind::Dominant => dominant(spec),
        Kind::Minimal => minimal(spec),
        Kind::Generalized => generalized(spec),
        Kind::Bound => bound(spec),
        Kind::Selftest => crate::selftest::run(),
    }
}

pub fn storage(spec: &ExperimentSpec) -> Result<Report> {
    let report = Report::csv("n,nnz_per_core,bytes");
    let cells: Vec<Cell> = spec
        .ns
        .par_iter()
        .map(|&n| -> Result<Cell> {
            // the triplet (G1, G, Gd) is the whole tensor at d = 3
            let t = smith(n, spec, 3)?;
            let nnz = t.nnz_per_core();
            if nnz.iter().any(|&k| k != nnz[0]) {
                bail!("n={n}: cores differ in nnz: {nnz:?}");
            }
            Ok(Cell::Row(vec![n.to_string(), nnz[0].to_string(), t.storage_bytes().to_string()], None))
        })
        .collect::<Result<_>>()?;
    Ok(collect(report, cells))
}

/// Maximal TT rank of the order-`d` LCM tensor of `{1..n}` by the
/// coprime multiplication-table count.
pub fn theorem_rank(n: u64, d: usize) -> Result<usize> {
    if d <= 3 {
        return Ok(n as usize);
    }
    Ok(coprime_product_count(n, d / 2)?)
}

pub fn ranks(spec: &ExperimentSpec) -> Result<Report> {
    let report = Report::csv("n,d,theorem_rank,dmrg_rank,match");
    let cells: Vec<Cell> = grid(spec)
        .par_iter()
        .map(|&(n, d)| -> Result<Cell> {
            let theorem = theorem_rank(n, d)?;
            let lcm = load_or_build(n as usize, d, &spec.f, spec.eps, spec.seed, spec.cache_dir.as_deref())?;
            let dmrg = lcm.tt.max_rank();
            Ok(Cell::Row(
                vec![
                    n.to_string(),
                    d.to_string(),
                    theorem.to_string(),
                    dmrg.to_string(),
                    (theorem == dmrg).to_string(),
                ],
                lcm.note,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(collect(report, cells))
}

pub fn dominant(spec: &ExperimentSpec) -> Result<Report> {
    let report = Report::csv("n,d,mode,lambda,bound,ratio,iters,converged");
    let cells: Vec<Cell> = grid(spec)
        .par_iter()
        .map(|&(n, d)| -> Result<Cell> {
            let a = smith(n, spec, d)?;
            let bound = eigen_bound(&a)?;
            if !bound.is_finite() || bound > MAGNITUDE_CAP {
                return Ok(Cell::Skip(format!("n={n} d={d}: bound {bound:e} exceeds double range")));
            }
            let cfg = SolverConfig {
                tol: spec.tol,
                max_iters: spec.max_iters.unwrap_or(20),
                seed: spec.seed,
                ..SolverConfig::shopm(spec.mode)
            };
            let runs: Vec<Eigenpair> = (0..spec.trials as u64)
                .map(|t| {
                    let x0 = random_guess(n as usize, spec.seed, t, spec.mode == Mode::H);
                    shopm(&a, &cfg, &x0)
                })
                .collect::<Result<_, _>>()
                .with_context(|| format!("n={n} d={d}"))?;
            let conv: Vec<&Eigenpair> = runs.iter().filter(|p| p.converged).collect();
            let best = conv
                .iter()
                .copied()
                .reduce(|b, p| if p.lambda > b.lambda { p } else { b })
                .unwrap_or(&runs[0]);
            let note = (spec.trials > 1).then(|| {
                let (lo, hi) = conv
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.lambda), hi.max(p.lambda)));
                let spread = if conv.is_empty() { f64::NAN } else { (hi - lo) / hi.abs() };
                format!(
                    "n={n} d={d} {}: {}/{} trials converged, relative spread {spread:e}",
                    spec.mode,
                    conv.len(),
                    spec.trials
                )
            });
            Ok(Cell::Row(
                vec![
                    n.to_string(),
                    d.to_string(),
                    spec.mode.to_string(),
                    best.lambda.to_string(),
                    bound.to_string(),
                    (bound / best.lambda).to_string(),
                    best.iterations.to_string(),
                    best.converged.to_string(),
                ],
                note,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(collect(report, cells))
}

/// Prescreen then a full GEAP run with `β = -1`.
pub fn minimal_pair<A, B>(a: &A, b: &B, mode: Mode, tau: f64, spec: &ExperimentSpec) -> Result<Eigenpair>
where
    A: ContractionProvider + ?Sized,
    B: ContractionProvider + ?Sized,
{
    let mut cfg = SolverConfig {
        tau,
        tol: spec.tol,
        seed: spec.seed,
        spectrum: spec.spectrum,
        ..SolverConfig::geap(mode, -1.0)
    };
    let x0 = prescreen(a, b, &cfg, spec.guesses, spec.pre_iters)?;
    cfg.max_iters = spec.max_iters.unwrap_or(GEAP_MAX_ITERS);
    Ok(geap(a, b, &cfg, &x0)?)
}

pub fn minimal(spec: &ExperimentSpec) -> Result<Report> {
    let report = Report::csv("n,d,mode,lambda_min,iters,converged");
    let tau = spec.tau.unwrap_or(10.0);
    let cells: Vec<Cell> = grid(spec)
        .par_iter()
        .map(|&(n, d)| -> Result<Cell> {
            let a = smith(n, spec, d)?;
            let nn = n as usize;
            let p = match spec.mode {
                Mode::H => minimal_pair(&a, &Kronecker { n: nn, d }, Mode::H, tau, spec),
                _ => minimal_pair(&a, &IdentityTensor { n: nn, d }, Mode::Z, tau, spec),
            };
            let p = p.with_context(|| format!("n={n} d={d}"))?;
            Ok(Cell::Row(
                vec![
                    n.to_string(),
                    d.to_string(),
                    spec.mode.to_string(),
                    p.lambda.to_string(),
                    p.iterations.to_string(),
                    p.converged.to_string(),
                ],
                None,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(collect(report, cells))
}

/// τ used for the B-problem: 1 for the small cases n = 2 and
/// (d, n) ∈ {(4, 3), (6, 3)}, else 10.
pub fn generalized_tau(n: u64, d: usize) -> f64 {
    if n == 2 || (n == 3 && (d == 4 || d == 6)) {
        1.0
    } else {
        10.0
    }
}

/// Minimal generalized eigenpair: GEAP on `B` and on `-B`, keeping the
/// result of smaller magnitude. Returns the signed eigenvalue and whether
/// it came from the `-B` run.
pub fn generalized_pair(a: &TTTensor, b: &TTTensor, tau: f64, spec: &ExperimentSpec) -> Result<(f64, bool, Eigenpair)> {
    let plus = minimal_pair(a, b, Mode::B, tau, spec);
    let minus = minimal_pair(a, &Negated(b), Mode::B, tau, spec);
    match (plus, minus) {
        (Ok(p), Ok(m)) if m.lambda.abs() < p.lambda.abs() => Ok((-m.lambda, true, m)),
        (Ok(p), _) => Ok((p.lambda, false, p)),
        (Err(_), Ok(m)) => Ok((-m.lambda, true, m)),
        (Err(e), Err(_)) => Err(e),
    }
}

pub fn generalized(spec: &ExperimentSpec) -> Result<Report> {
    let report = Report::csv("n,d,lambda_min,sign_flipped,iters,converged");
    let cells: Vec<Cell> = grid(spec)
        .par_iter()
        .map(|&(n, d)| -> Result<Cell> {
            let a = smith(n, spec, d)?;
            let lcm = load_or_build(n as usize, d, &spec.f, spec.eps, spec.seed, spec.cache_dir.as_deref())?;
            let tau = spec.tau.unwrap_or_else(|| generalized_tau(n, d));
            match generalized_pair(&a, &lcm.tt, tau, spec) {
                Ok((lambda, flipped, p)) => Ok(Cell::Row(
                    vec![
                        n.to_string(),
                        d.to_string(),
                        lambda.to_string(),
                        flipped.to_string(),
                        p.iterations.to_string(),
                        p.converged.to_string(),
                    ],
                    lcm.note,
                )),
                Err(e) => Ok(Cell::Skip(format!("n={n} d={d}: neither B nor -B run succeeded: {e:#}"))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(collect(report, cells))
}

/// Disks are listed up to this dimension.
const DISK_LIST_MAX: u64 = 32;

pub fn bound(spec: &ExperimentSpec) -> Result<Report> {
    let mut report = Report::default();
    for (n, d) in grid(spec) {
        let set = LatticeSet::range(n)?;
        let disks = gershgorin_disks(&set, &spec.f, d)?;
        let b = if d >= 2 {
            eigen_bound(&smith(n, spec, d)?)?
        } else {
            disks.iter().map(|k| k.center).fold(f64::NEG_INFINITY, f64::max)
        };
        let reach = disks.iter().map(|k| k.center + k.radius).fold(f64::NEG_INFINITY, f64::max);
        if (reach - b).abs() > 1e-12 * b.abs().max(1.0) {
            bail!("n={n} d={d}: disk reach {reach} disagrees with bound {b}");
        }
        report.body.push_str(&format!("n={n} d={d} f={}\n", spec.f.name()));
        if n <= DISK_LIST_MAX {
            for (k, disk) in disks.iter().enumerate() {
                report
                    .body
                    .push_str(&format!("disk {} center={} radius={}\n", k + 1, disk.center, disk.radius));
            }
        }
        report.body.push_str(&format!("bound={b}\n"));
    }
    Ok(report)
}
