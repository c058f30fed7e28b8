//! Arithmetic and lattice primitives over the divisibility lattice `(Z+, |)`.
//!
//! Meet is `gcd`, join is `lcm`. Everything here is pure and works on `u64`
//! with checked arithmetic wherever a product can grow.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Largest element for which a smallest-prime-factor table is built.
/// Beyond this, factorization falls back to trial division.
pub const SIEVE_CAP: u64 = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("lattice set is empty")]
    Empty,
    #[error("element at position {0} is zero; elements must be positive")]
    NonPositive(usize),
    #[error("element {0} appears more than once")]
    Duplicate(u64),
    #[error("ordering violates divisibility: {divisor} at position {i} divides {multiple} at position {j} < {i}")]
    Order {
        divisor: u64,
        multiple: u64,
        i: usize,
        j: usize,
    },
    #[error("set is not meet-closed: gcd({a}, {b}) = {g} is not an element")]
    NotMeetClosed { a: u64, b: u64, g: u64 },
    #[error("integer overflow while computing a least common multiple")]
    Overflow,
    #[error("argument must be positive")]
    ZeroArgument,
    #[error("unknown function name `{0}`")]
    UnknownFunction(String),
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Least common multiple; overflow of `u64` is an error.
pub fn lcm(a: u64, b: u64) -> Result<u64, LatticeError> {
    if a == 0 || b == 0 {
        return Err(LatticeError::ZeroArgument);
    }
    (a / gcd(a, b)).checked_mul(b).ok_or(LatticeError::Overflow)
}

/// n-ary gcd. Returns 0 for an empty slice.
pub fn gcd_all(values: &[u64]) -> u64 {
    values.iter().fold(0, |acc, &v| gcd(acc, v))
}

/// n-ary lcm. Returns 1 for an empty slice.
pub fn lcm_all(values: &[u64]) -> Result<u64, LatticeError> {
    values.iter().try_fold(1u64, |acc, &v| lcm(acc, v))
}

/// Prime factorization by trial division, `(prime, exponent)` ascending.
pub fn factorize(mut k: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= k {
        if k.is_multiple_of(p) {
            let mut e = 0;
            while k.is_multiple_of(p) {
                k /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if k > 1 {
        out.push((k, 1));
    }
    out
}

fn mobius_from_factors(factors: &[(u64, u32)]) -> i64 {
    if factors.iter().any(|&(_, e)| e > 1) {
        0
    } else if factors.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn totient_from_factors(k: u64, factors: &[(u64, u32)]) -> u64 {
    factors.iter().fold(k, |acc, &(p, _)| acc / p * (p - 1))
}

fn divisors_from_factors(factors: &[(u64, u32)]) -> Vec<u64> {
    let mut divs = vec![1u64];
    for &(p, e) in factors {
        let base = divs.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..base {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

/// Arithmetic Möbius function. `mobius(0)` is defined as 0.
pub fn mobius(k: u64) -> i64 {
    if k == 0 {
        return 0;
    }
    mobius_from_factors(&factorize(k))
}

/// Euler's totient. `totient(0)` is defined as 0.
pub fn totient(k: u64) -> u64 {
    if k == 0 {
        return 0;
    }
    totient_from_factors(k, &factorize(k))
}

/// All positive divisors of `k`, ascending. Empty for `k = 0`.
pub fn divisors(k: u64) -> Vec<u64> {
    if k == 0 {
        return Vec::new();
    }
    divisors_from_factors(&factorize(k))
}

/// Möbius function of the divisibility poset: `μ(y/x)` if `x | y`, else 0.
pub fn poset_mobius(x: u64, y: u64) -> i64 {
    if x == 0 || !y.is_multiple_of(x) {
        0
    } else {
        mobius(y / x)
    }
}

/// Smallest-prime-factor table. Built once, read-only afterwards.
#[derive(Debug, Clone)]
pub struct Sieve {
    spf: Vec<u32>,
}

impl Sieve {
    /// Table covering `0..=limit`, clamped at [`SIEVE_CAP`].
    pub fn new(limit: u64) -> Self {
        let limit = limit.min(SIEVE_CAP) as usize;
        let mut spf = vec![0u32; limit + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m > limit {
                    break;
                }
                spf[m] = p;
            }
        }
        Sieve { spf }
    }

    pub fn limit(&self) -> u64 {
        self.spf.len().saturating_sub(1) as u64
    }

    pub fn factorize(&self, k: u64) -> Vec<(u64, u32)> {
        if k as usize >= self.spf.len() {
            return factorize(k);
        }
        let mut k = k as usize;
        let mut out: Vec<(u64, u32)> = Vec::new();
        while k > 1 {
            let p = self.spf[k] as usize;
            let mut e = 0;
            while k.is_multiple_of(p) {
                k /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        out
    }

    pub fn mobius(&self, k: u64) -> i64 {
        if k == 0 {
            return 0;
        }
        mobius_from_factors(&self.factorize(k))
    }

    pub fn totient(&self, k: u64) -> u64 {
        if k == 0 {
            return 0;
        }
        totient_from_factors(k, &self.factorize(k))
    }

    pub fn divisors(&self, k: u64) -> Vec<u64> {
        if k == 0 {
            return Vec::new();
        }
        divisors_from_factors(&self.factorize(k))
    }
}

/// A real-valued function on the positive integers, used as the `f` of
/// meet and join tensors.
#[derive(Clone)]
pub enum ArithFn {
    Identity,
    /// `x ↦ x^α`
    Power(f64),
    /// `x ↦ 1/x`
    Reciprocal,
    Custom {
        name: String,
        func: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
    },
}

impl ArithFn {
    pub fn custom(name: impl Into<String>, func: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        ArithFn::Custom {
            name: name.into(),
            func: Arc::new(func),
        }
    }

    pub fn eval(&self, x: u64) -> f64 {
        match self {
            ArithFn::Identity => x as f64,
            ArithFn::Power(a) => {
                if a.fract() == 0.0 && a.abs() <= i32::MAX as f64 {
                    (x as f64).powi(*a as i32)
                } else {
                    (x as f64).powf(*a)
                }
            }
            ArithFn::Reciprocal => 1.0 / x as f64,
            ArithFn::Custom { func, .. } => func(x),
        }
    }

    /// Stable short name, used in CSV output and cache keys.
    pub fn name(&self) -> String {
        match self {
            ArithFn::Identity => "id".to_string(),
            ArithFn::Power(a) => format!("pow{a}"),
            ArithFn::Reciprocal => "recip".to_string(),
            ArithFn::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for ArithFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ArithFn({})", self.name())
    }
}

impl FromStr for ArithFn {
    type Err = LatticeError;

    /// Accepts `id`, `identity`, `recip`, `1/x`, `x^a`, `powA`, `pow:A`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "id" | "identity" | "x" => return Ok(ArithFn::Identity),
            "recip" | "reciprocal" | "1/x" => return Ok(ArithFn::Reciprocal),
            _ => {}
        }
        let exp = t
            .strip_prefix("x^")
            .or_else(|| t.strip_prefix("pow:"))
            .or_else(|| t.strip_prefix("pow"));
        match exp.and_then(|e| e.parse::<f64>().ok()) {
            Some(a) if a == 1.0 => Ok(ArithFn::Identity),
            Some(a) if a == -1.0 => Ok(ArithFn::Reciprocal),
            Some(a) => Ok(ArithFn::Power(a)),
            None => Err(LatticeError::UnknownFunction(s.to_string())),
        }
    }
}

/// A finite set of distinct positive integers ordered so that
/// `x_i | x_j` only if `i <= j`.
#[derive(Debug, Clone)]
pub struct LatticeSet {
    elements: Vec<u64>,
    position: HashMap<u64, usize>,
    meet_closed: bool,
}

impl LatticeSet {
    pub fn new(elements: Vec<u64>) -> Result<Self, LatticeError> {
        if elements.is_empty() {
            return Err(LatticeError::Empty);
        }
        let mut position = HashMap::with_capacity(elements.len());
        for (i, &x) in elements.iter().enumerate() {
            if x == 0 {
                return Err(LatticeError::NonPositive(i));
            }
            if position.insert(x, i).is_some() {
                return Err(LatticeError::Duplicate(x));
            }
        }
        // An ascending list always respects divisibility.
        if elements.windows(2).any(|w| w[0] > w[1]) {
            for (i, &a) in elements.iter().enumerate() {
                for (j, &b) in elements.iter().enumerate().take(i) {
                    if b % a == 0 {
                        return Err(LatticeError::Order {
                            divisor: a,
                            multiple: b,
                            i,
                            j,
                        });
                    }
                }
            }
        }
        let contiguous = elements.iter().enumerate().all(|(i, &x)| x == i as u64 + 1);
        let meet_closed = contiguous || Self::find_missing_meet(&elements, &position).is_none();
        Ok(LatticeSet {
            elements,
            position,
            meet_closed,
        })
    }

    /// `{1, ..., n}` in natural order.
    pub fn range(n: u64) -> Result<Self, LatticeError> {
        Self::new((1..=n).collect())
    }

    /// Sorts ascending before validating.
    pub fn from_unsorted(mut elements: Vec<u64>) -> Result<Self, LatticeError> {
        elements.sort_unstable();
        Self::new(elements)
    }

    fn find_missing_meet(elements: &[u64], position: &HashMap<u64, usize>) -> Option<(u64, u64, u64)> {
        for (i, &a) in elements.iter().enumerate() {
            for &b in &elements[i + 1..] {
                let g = gcd(a, b);
                if !position.contains_key(&g) {
                    return Some((a, b, g));
                }
            }
        }
        None
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, i: usize) -> u64 {
        self.elements[i]
    }

    pub fn position(&self, x: u64) -> Option<usize> {
        self.position.get(&x).copied()
    }

    pub fn max_element(&self) -> u64 {
        self.elements.iter().copied().max().unwrap_or(0)
    }

    pub fn is_meet_closed(&self) -> bool {
        self.meet_closed
    }

    /// Error describing the first missing meet, if any.
    pub fn require_meet_closed(&self) -> Result<(), LatticeError> {
        if self.meet_closed {
            return Ok(());
        }
        let (a, b, g) = Self::find_missing_meet(&self.elements, &self.position)
            .expect("flag and scan disagree");
        Err(LatticeError::NotMeetClosed { a, b, g })
    }

    fn sieve(&self) -> Sieve {
        let max = self.max_element();
        // A partial table does not help factor elements beyond it.
        Sieve::new(if max <= SIEVE_CAP { max } else { 0 })
    }
}

/// Sparse 0/1 divisibility matrix: entry `(i, j)` is 1 iff `x_j | x_i`.
/// Stored row-wise with ascending column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl IncidenceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices `j` with `x_j | x_i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }
}

pub fn incidence_matrix(set: &LatticeSet) -> IncidenceMatrix {
    incidence_with(set, &set.sieve())
}

fn incidence_with(set: &LatticeSet, sieve: &Sieve) -> IncidenceMatrix {
    let n = set.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    row_ptr.push(0);
    for &x in set.elements() {
        let start = cols.len();
        cols.extend(sieve.divisors(x).into_iter().filter_map(|z| set.position(z)));
        cols[start..].sort_unstable();
        row_ptr.push(cols.len());
    }
    IncidenceMatrix { n, row_ptr, cols }
}

/// Coefficients `D_1..D_n` of the canonical (diagonal) decomposition of a
/// meet tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `D_k = Σ_{z | x_k, z ∤ x_j (j<k)} Σ_{y | z} f(y) μ(z/y)`.
///
/// `z` ranges over the divisors of `x_k` in `Z+`, not only over `S`. For a
/// meet-closed `S`, `z` divides an earlier element iff it divides a proper
/// divisor of `x_k` that lies in `S`, which keeps the work per element
/// proportional to its divisor count.
pub fn meet_coefficients(set: &LatticeSet, f: &ArithFn) -> Result<CoefficientVector, LatticeError> {
    set.require_meet_closed()?;
    let sieve = set.sieve();
    let inc = incidence_with(set, &sieve);
    let mut values = Vec::with_capacity(set.len());
    for (k, &xk) in set.elements().iter().enumerate() {
        let divs = sieve.divisors(xk);
        let lower: Vec<u64> = inc
            .row(k)
            .iter()
            .filter(|&&j| j != k)
            .map(|&j| set.get(j))
            .collect();
        let mut dk = 0.0;
        for &z in &divs {
            if lower.iter().any(|&p| p % z == 0) {
                continue;
            }
            dk += divs
                .iter()
                .take_while(|&&y| y <= z)
                .filter(|&&y| z % y == 0)
                .map(|&y| f.eval(y) * sieve.mobius(z / y) as f64)
                .sum::<f64>();
        }
        values.push(dk);
    }
    Ok(CoefficientVector { values })
}

/// Products `i_1 ⋯ i_k` of pairwise coprime factors from `[1, n]`.
pub fn coprime_product_set(n: u64, k: usize) -> Result<BTreeSet<u64>, LatticeError> {
    fn extend(
        start: u64,
        n: u64,
        slots: usize,
        prod: u64,
        used: &mut Vec<u64>,
        out: &mut BTreeSet<u64>,
    ) -> Result<(), LatticeError> {
        out.insert(prod);
        if slots == 0 {
            return Ok(());
        }
        for v in start..=n {
            if used.iter().all(|&u| gcd(u, v) == 1) {
                let next = prod.checked_mul(v).ok_or(LatticeError::Overflow)?;
                used.push(v);
                extend(v + 1, n, slots - 1, next, used, out)?;
                used.pop();
            }
        }
        Ok(())
    }
    if n == 0 || k == 0 {
        return Err(LatticeError::ZeroArgument);
    }
    // Factors equal to 1 may repeat, so only the non-unit factors are chosen.
    let mut out = BTreeSet::new();
    extend(2, n, k, 1, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Cardinality of [`coprime_product_set`]; the maximal TT rank of the
/// order-`2k` and `2k+1` LCM tensors on `{1..n}`.
pub fn coprime_product_count(n: u64, k: usize) -> Result<usize, LatticeError> {
    coprime_product_set(n, k).map(|s| s.len())
}

/// `{[i_1, ..., i_k] : 1 <= i_j <= n}`.
pub fn lcm_value_set(n: u64, k: usize) -> Result<BTreeSet<u64>, LatticeError> {
    if n == 0 || k == 0 {
        return Err(LatticeError::ZeroArgument);
    }
    let mut current: HashSet<u64> = (1..=n).collect();
    for _ in 1..k {
        let mut next = HashSet::with_capacity(current.len() * 2);
        for &v in &current {
            for i in 1..=n {
                next.insert(lcm(v, i)?);
            }
        }
        current = next;
    }
    Ok(current.into_iter().collect())
}
