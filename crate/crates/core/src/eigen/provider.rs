use nalgebra::DMatrix;

use crate::tt::TTTensor;

/// A symmetric tensor seen only through its contractions with one vector.
///
/// Implementations must satisfy `∇(Bx^d) = d·Bx^{d-1}` and
/// `∇²(Bx^d) = d(d-1)·Bx^{d-2}`. Callers pass vectors of length `dim()`;
/// the solvers check this once up front.
pub trait ContractionProvider: Sync {
    fn dim(&self) -> usize;
    fn order(&self) -> usize;
    /// `Bx^d`
    fn scalar(&self, x: &[f64]) -> f64;
    /// `Bx^{d-1}`
    fn vector(&self, x: &[f64]) -> Vec<f64>;
    /// `Bx^{d-2}`
    fn matrix(&self, x: &[f64]) -> DMatrix<f64>;
}

impl<P: ContractionProvider + ?Sized> ContractionProvider for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn order(&self) -> usize {
        (**self).order()
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        (**self).scalar(x)
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        (**self).vector(x)
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).matrix(x)
    }
}

/// TT-backed provider. The tensor must have equal mode sizes.
impl ContractionProvider for TTTensor<f64> {
    fn dim(&self) -> usize {
        self.core(0).shape().1
    }
    fn order(&self) -> usize {
        TTTensor::order(self)
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        self.contract_scalar(x).expect("vector length matches tensor")
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        self.contract_vector(x).expect("vector length matches tensor")
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let m = self.contract_matrix(x).expect("vector length matches tensor");
        DMatrix::from_row_slice(n, n, &m)
    }
}

/// Kronecker tensor `δ`: unity on the superdiagonal, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kronecker {
    pub n: usize,
    pub d: usize,
}

impl ContractionProvider for Kronecker {
    fn dim(&self) -> usize {
        self.n
    }
    fn order(&self) -> usize {
        self.d
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.powi(self.d as i32)).sum()
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.powi(self.d as i32 - 1)).collect()
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.iter().map(|v| v.powi(self.d as i32 - 2)).collect::<Vec<_>>().into())
    }
}

/// Identity tensor `ℰ` with `ℰx^{d-1} = ‖x‖^{d-2} x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityTensor {
    pub n: usize,
    pub d: usize,
}

impl ContractionProvider for IdentityTensor {
    fn dim(&self) -> usize {
        self.n
    }
    fn order(&self) -> usize {
        self.d
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        super::norm2(x).powi(self.d as i32)
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        let s = super::norm2(x).powi(self.d as i32 - 2);
        x.iter().map(|v| s * v).collect()
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let d = self.d as i32;
        let r = super::norm2(x);
        let mut m = DMatrix::identity(n, n) * r.powi(d - 2);
        if d > 2 {
            let v = nalgebra::DVector::from_column_slice(x);
            m += (&v * v.transpose()) * ((d - 2) as f64 * r.powi(d - 4));
        }
        m / (d - 1) as f64
    }
}

/// `-B`, for generalized problems whose `B` is negative definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Negated<P>(pub P);

impl<P: ContractionProvider> ContractionProvider for Negated<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn order(&self) -> usize {
        self.0.order()
    }
    fn scalar(&self, x: &[f64]) -> f64 {
        -self.0.scalar(x)
    }
    fn vector(&self, x: &[f64]) -> Vec<f64> {
        self.0.vector(x).into_iter().map(|v| -v).collect()
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        -self.0.matrix(x)
    }
}
