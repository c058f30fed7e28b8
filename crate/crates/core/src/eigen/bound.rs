use super::EigenError;
use crate::lattice::{gcd, ArithFn, LatticeSet};
use crate::tt::{increment, meet_tt, TTError, TTTensor, DENSE_CAP};

/// Inclusion disk `{z : |z - center| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
}

/// Upper bound on the eigenvalues of a meet tensor with nonnegative `f`:
/// the largest entry of `A·1^{d-1}`.
pub fn eigen_bound(a: &TTTensor<f64>) -> Result<f64, EigenError> {
    let n = a.uniform_dim().ok_or_else(|| EigenError::Config("tensor modes differ in size".into()))?;
    let rows = a.contract_vector(&vec![1.0; n])?;
    Ok(rows.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Gershgorin-type disks of the meet tensor of `set` under `f`.
///
/// Disk `k` is centred at `f(x_k)` with radius the sum of `|f(x_k ∧ x_{i_2} ∧ ⋯)|`
/// over all off-diagonal index tuples. For a meet-closed set with `f >= 0`
/// the radius comes from one TT row contraction; otherwise the tuples are
/// enumerated, which needs `n^{d-1} <= DENSE_CAP`.
pub fn gershgorin_disks(set: &LatticeSet, f: &ArithFn, d: usize) -> Result<Vec<Disk>, EigenError> {
    let n = set.len();
    let centers: Vec<f64> = set.elements().iter().map(|&x| f.eval(x)).collect();
    if d < 2 {
        return Ok(centers.into_iter().map(|center| Disk { center, radius: 0.0 }).collect());
    }
    let nonneg = centers.iter().all(|&c| c >= 0.0);
    if set.is_meet_closed() && nonneg {
        let a: TTTensor = meet_tt(set, f, d)?;
        let rows = a.contract_vector(&vec![1.0; n])?;
        return Ok(centers
            .into_iter()
            .zip(rows)
            .map(|(center, row)| Disk { center, radius: row - center })
            .collect());
    }

    let size = n
        .checked_pow(d as u32 - 1)
        .filter(|&s| s <= DENSE_CAP)
        .ok_or(TTError::DenseCapExceeded {
            size: n.saturating_pow(d as u32 - 1),
            cap: DENSE_CAP,
        })?;
    let xs = set.elements();
    let dims = vec![n; d - 1];
    let mut disks = Vec::with_capacity(n);
    for k in 0..n {
        let mut idx = vec![0usize; d - 1];
        let mut radius = 0.0;
        for _ in 0..size {
            if idx.iter().any(|&i| i != k) {
                let g = idx.iter().fold(xs[k], |acc, &i| gcd(acc, xs[i]));
                radius += f.eval(g).abs();
            }
            increment(&mut idx, &dims);
        }
        disks.push(Disk { center: centers[k], radius });
    }
    Ok(disks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smith(n: usize, d: usize) -> TTTensor {
        meet_tt(&LatticeSet::range(n as u64).unwrap(), &ArithFn::Identity, d).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert_eq!(eigen_bound(&smith(2, 2)).unwrap(), 3.0);
        assert_eq!(eigen_bound(&smith(2, 3)).unwrap(), 5.0);
    }

    #[test]
    fn disks_small() {
        let s = LatticeSet::range(2).unwrap();
        let disks = gershgorin_disks(&s, &ArithFn::Identity, 3).unwrap();
        assert_eq!(disks, vec![Disk { center: 1.0, radius: 3.0 }, Disk { center: 2.0, radius: 3.0 }]);
        let one = gershgorin_disks(&LatticeSet::range(1).unwrap(), &ArithFn::Identity, 5).unwrap();
        assert_eq!(one, vec![Disk { center: 1.0, radius: 0.0 }]);
    }

    #[test]
    fn tt_and_enumerated_radii_agree() {
        let s = LatticeSet::range(4).unwrap();
        let fast = gershgorin_disks(&s, &ArithFn::Identity, 4).unwrap();
        // a negated f forces enumeration; radii use |f| so they match
        let neg = ArithFn::custom("neg", |x| -(x as f64));
        let slow = gershgorin_disks(&s, &neg, 4).unwrap();
        for (p, q) in fast.iter().zip(&slow) {
            assert_eq!(p.center, -q.center);
            assert_eq!(p.radius, q.radius);
        }
        let top = fast.iter().map(|k| k.center + k.radius).fold(f64::MIN, f64::max);
        assert_eq!(top, eigen_bound(&smith(4, 4)).unwrap());
    }
}
