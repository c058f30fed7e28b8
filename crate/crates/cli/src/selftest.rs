//! Small-scale oracle-equivalence checks, runnable from the binary.

use anyhow::{ensure, Result};
use lattice_tt::cross::{lcm_tt, CrossConfig};
use lattice_tt::eigen::{hessian, random_guess, shopm, ContractionProvider, IdentityTensor, Kronecker, Mode, SolverConfig};
use lattice_tt::lattice::{coprime_product_set, lcm_value_set, ArithFn, LatticeSet};
use lattice_tt::oracle::{dense_contract, dense_join, dense_meet, dense_shopm};
use lattice_tt::tt::{meet_tt, TTTensor};
use nalgebra::DMatrix;

use crate::commands::Report;

fn lcm_sets() -> Result<()> {
    for n in 1..=8 {
        for k in 1..=4 {
            ensure!(lcm_value_set(n, k)? == coprime_product_set(n, k)?, "n={n} k={k}");
        }
    }
    Ok(())
}

fn meet_exact() -> Result<()> {
    for n in 1..=6 {
        let set = LatticeSet::range(n)?;
        for f in [ArithFn::Identity, ArithFn::Power(2.0), ArithFn::Reciprocal] {
            for d in 2..=4 {
                let t: TTTensor = meet_tt(&set, &f, d)?;
                let got = t.to_dense()?;
                let want = dense_meet(&set, &f, d)?;
                let tol = if matches!(f, ArithFn::Reciprocal) { 1e-12 } else { 0.0 };
                for (g, w) in got.values.iter().zip(&want.values) {
                    ensure!((g - w).abs() <= tol * w.abs(), "n={n} d={d} f={}: {g} vs {w}", f.name());
                }
            }
        }
    }
    Ok(())
}

fn contractions() -> Result<()> {
    for n in 1..=5usize {
        let set = LatticeSet::range(n as u64)?;
        for d in 2..=4 {
            let t: TTTensor = meet_tt(&set, &ArithFn::Identity, d)?;
            let a = dense_meet(&set, &ArithFn::Identity, d)?;
            for trial in 0..10 {
                let x = random_guess(n, 5, trial, false);
                let v = t.contract_vector(&x)?;
                let w = dense_contract(&a, &x, d - 1)?.values;
                let err = v.iter().zip(&w).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                let scale = w.iter().map(|q| q.abs()).fold(1e-300, f64::max);
                ensure!(err <= 1e-12 * scale, "n={n} d={d}: {err}");
            }
        }
    }
    Ok(())
}

fn power_method() -> Result<()> {
    for n in 1..=5usize {
        for d in [3, 4] {
            let t: TTTensor = meet_tt(&LatticeSet::range(n as u64)?, &ArithFn::Identity, d)?;
            let cfg = SolverConfig::shopm(Mode::H);
            let x0 = random_guess(n, 1, 0, true);
            let p = shopm(&t, &cfg, &x0)?;
            let q = dense_shopm(&t.to_dense()?, &cfg, &x0)?;
            ensure!((p.lambda - q.lambda).abs() <= 1e-10, "n={n} d={d}: {} vs {}", p.lambda, q.lambda);
        }
    }
    Ok(())
}

fn fd_hessian<B: ContractionProvider>(a: &TTTensor, b: &B, x: &[f64]) -> DMatrix<f64> {
    let d = a.order() as i32;
    let f = |y: &[f64]| a.scalar(y) / b.scalar(y) * y.iter().map(|v| v * v).sum::<f64>().sqrt().powi(d);
    let h = 1e-4;
    DMatrix::from_fn(x.len(), x.len(), |i, j| {
        let at = |si: f64, sj: f64| {
            let mut y = x.to_vec();
            y[i] += si;
            y[j] += sj;
            f(&y)
        };
        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
    })
}

fn hessians() -> Result<()> {
    let a: TTTensor = meet_tt(&LatticeSet::range(3)?, &ArithFn::Identity, 4)?;
    for trial in 0..5 {
        let x = random_guess(3, 2, trial, false);
        let pairs = [
            (hessian(&a, &Kronecker { n: 3, d: 4 }, &x)?, fd_hessian(&a, &Kronecker { n: 3, d: 4 }, &x)),
            (hessian(&a, &IdentityTensor { n: 3, d: 4 }, &x)?, fd_hessian(&a, &IdentityTensor { n: 3, d: 4 }, &x)),
        ];
        for (an, fd) in pairs {
            let rel = (&an - &fd).amax() / fd.amax();
            ensure!(rel <= 1e-5, "trial {trial}: {rel}");
        }
    }
    Ok(())
}

fn cross() -> Result<()> {
    let set = LatticeSet::range(4)?;
    let res = lcm_tt(4, 4, &ArithFn::Identity, &CrossConfig::default())?;
    let got = res.tt.to_dense()?;
    let want = dense_join(&set, &ArithFn::Identity, 4)?;
    for (g, w) in got.values.iter().zip(&want.values) {
        ensure!(g.round() == *w, "{g} vs {w}");
    }
    ensure!(res.tt.max_rank() == 6, "rank {}", res.tt.max_rank());
    Ok(())
}

fn storage() -> Result<()> {
    for (n, want) in [(10u64, 27usize), (100, 482)] {
        let t: TTTensor = meet_tt(&LatticeSet::range(n)?, &ArithFn::Identity, 3)?;
        ensure!(t.nnz_per_core()[1] == want, "n={n}: {:?}", t.nnz_per_core());
    }
    Ok(())
}

type Check = (&'static str, fn() -> Result<()>);

const CHECKS: [Check; 7] = [
    ("lcm sets equal coprime product sets", lcm_sets),
    ("meet tensor equals dense meet", meet_exact),
    ("TT contractions equal dense contractions", contractions),
    ("S-HOPM equals dense S-HOPM", power_method),
    ("GEAP Hessian equals finite differences", hessians),
    ("cross-built LCM tensor is exact", cross),
    ("meet core nnz", storage),
];

/// One `PASS`/`FAIL` line per check; failures are listed in the notes.
pub fn run() -> Result<Report> {
    let mut report = Report::default();
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => report.body.push_str(&format!("PASS {name}\n")),
            Err(e) => {
                report.body.push_str(&format!("FAIL {name}: {e:#}\n"));
                report.notes.push(format!("selftest failure: {name}"));
            }
        }
    }
    Ok(report)
}

/// True when every line of a selftest report passed.
pub fn passed(report: &Report) -> bool {
    report.body.lines().all(|l| l.starts_with("PASS"))
}
