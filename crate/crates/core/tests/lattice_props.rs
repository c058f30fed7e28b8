use lattice_tt::lattice::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn gcd_times_lcm(a in 1u64..1_000_000, b in 1u64..1_000_000) {
        prop_assert_eq!(gcd(a, b) as u128 * lcm(a, b).unwrap() as u128, a as u128 * b as u128);
    }

    #[test]
    fn nary_lcm_is_associative(a in 1u64..500, b in 1u64..500, c in 1u64..500) {
        let left = lcm(lcm(a, b).unwrap(), c).unwrap();
        prop_assert_eq!(left, lcm_all(&[a, b, c]).unwrap());
        prop_assert_eq!(left, lcm(a, lcm(b, c).unwrap()).unwrap());
    }
}

#[test]
fn lcm_value_sets_match() {
    for n in 1..=8 {
        for k in 1..=4 {
            assert_eq!(lcm_value_set(n, k).unwrap(), coprime_product_set(n, k).unwrap(), "n={n} k={k}");
        }
    }
}

/// Every meet-closed subset of {1..12} with at most 8 elements.
fn meet_closed_subsets() -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << 12) {
        if mask.count_ones() > 8 {
            continue;
        }
        let xs: Vec<u64> = (0..12).filter(|b| mask >> b & 1 == 1).map(|b| b as u64 + 1).collect();
        let closed = xs.iter().all(|&a| xs.iter().all(|&b| xs.contains(&gcd(a, b))));
        if closed {
            out.push(xs);
        }
    }
    out
}

/// Möbius function of the poset (S, |): `mu[j][i] = μ_S(x_j, x_i)`.
fn poset_mobius_table(xs: &[u64]) -> Vec<Vec<i64>> {
    let n = xs.len();
    let mut mu = vec![vec![0i64; n]; n];
    for j in 0..n {
        mu[j][j] = 1;
        for i in 0..n {
            if i == j || !xs[i].is_multiple_of(xs[j]) {
                continue;
            }
            // sum over x_j | x_k | x_i, x_k < x_i; xs is ascending, so those are already filled
            let s: i64 = (0..n)
                .filter(|&k| k != i && xs[k].is_multiple_of(xs[j]) && xs[i].is_multiple_of(xs[k]) && xs[k] < xs[i])
                .map(|k| mu[j][k])
                .sum();
            mu[j][i] = -s;
        }
    }
    mu
}

fn functions() -> Vec<ArithFn> {
    vec![ArithFn::Identity, ArithFn::Power(2.0), ArithFn::Reciprocal]
}

#[test]
fn coefficients_match_double_mobius_sum() {
    let subsets = meet_closed_subsets();
    assert!(subsets.len() > 100);
    for xs in &subsets {
        let set = LatticeSet::new(xs.clone()).unwrap();
        let mu = poset_mobius_table(xs);
        for f in functions() {
            let got = meet_coefficients(&set, &f).unwrap();
            for k in 0..xs.len() {
                let mut want = 0.0;
                for i in 0..xs.len() {
                    for j in 0..xs.len() {
                        let w = mu[i][k] * mu[j][k];
                        if w != 0 {
                            want += w as f64 * f.eval(gcd(xs[i], xs[j]));
                        }
                    }
                }
                let tol = if matches!(f, ArithFn::Reciprocal) { 1e-12 * want.abs().max(1.0) } else { 0.0 };
                assert!((got.values[k] - want).abs() <= tol, "S={xs:?} f={} k={k}: {} vs {want}", f.name(), got.values[k]);
            }
        }
    }
}

#[test]
fn coefficients_reconstruct_meet_tensor() {
    for xs in meet_closed_subsets() {
        let set = LatticeSet::new(xs.clone()).unwrap();
        let e = incidence_matrix(&set);
        let n = xs.len();
        for f in functions() {
            let dk = meet_coefficients(&set, &f).unwrap();
            for d in 2..=4usize {
                let mut idx = vec![0usize; d];
                for _ in 0..n.pow(d as u32) {
                    let rebuilt: f64 = (0..n)
                        .filter(|&k| idx.iter().all(|&i| e.get(i, k)))
                        .map(|k| dk.values[k])
                        .sum();
                    let g = idx.iter().fold(0, |acc, &i| gcd(acc, xs[i]));
                    let want = f.eval(g);
                    let tol = if matches!(f, ArithFn::Reciprocal) { 1e-12 * want.abs() } else { 0.0 };
                    assert!((rebuilt - want).abs() <= tol, "S={xs:?} f={} idx={idx:?}", f.name());
                    for k in (0..d).rev() {
                        idx[k] += 1;
                        if idx[k] < n {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
            }
        }
    }
}

#[test]
fn non_meet_closed_rejected() {
    let set = LatticeSet::new(vec![2, 3]).unwrap();
    assert!(!set.is_meet_closed());
    assert!(matches!(meet_coefficients(&set, &ArithFn::Identity), Err(LatticeError::NotMeetClosed { .. })));
}

#[test]
fn incidence_nnz_is_divisor_sum() {
    for n in [1u64, 10, 37, 100, 1000] {
        let e = incidence_matrix(&LatticeSet::range(n).unwrap());
        let want: usize = (1..=n).map(|k| divisors(k).len()).sum();
        assert_eq!(e.nnz(), want);
    }
}

#[test]
fn incidence_nnz_asymptotics() {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    for n in [1_000u64, 10_000, 100_000] {
        let nnz = incidence_matrix(&LatticeSet::range(n).unwrap()).nnz() as f64;
        let nf = n as f64;
        let model = nf * nf.ln() + (2.0 * EULER_GAMMA - 1.0) * nf;
        assert!((nnz / model - 1.0).abs() < 0.05, "n={n}: {nnz} vs {model}");
    }
}

#[test]
fn sieve_agrees_with_trial_division_on_large_values() {
    let s = Sieve::new(200_000);
    for k in (100_000..200_000).step_by(997) {
        assert_eq!(s.factorize(k), factorize(k));
        assert_eq!(s.totient(k), totient(k));
        assert_eq!(s.mobius(k), mobius(k));
    }
}
