//! Linear operators with cached spectral data and the matrix power `s^A`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// A Jordan block given as metadata: real part of its eigenvalue and its size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanBlock<T> {
    pub re: T,
    pub size: usize,
}

/// A square real matrix together with its spectral summary.
#[derive(Debug, Clone)]
pub struct OperatorSpec<T> {
    matrix: Matrix<T>,
    eigenvalues: Vec<Complex<T>>,
    lambda_min: T,
    lambda_max: T,
    trace: T,
    jordan_blocks: Option<Vec<JordanBlock<T>>>,
    diagonal: bool,
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: matrix.cols(),
            });
        }
        if matrix.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidOperator(
                "matrix has non-finite entries".into(),
            ));
        }
        let eigenvalues = matrix.eigenvalues()?;
        let lambda_min = eigenvalues.iter().map(|z| z.re).fold(T::infinity(), T::min);
        let lambda_max = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(T::neg_infinity(), T::max);
        Ok(Self {
            trace: matrix.trace(),
            diagonal: matrix.is_diagonal(),
            matrix,
            eigenvalues,
            lambda_min,
            lambda_max,
            jordan_blocks: None,
        })
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        Self::new(Matrix::from_diag(diag))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n]).expect("identity is valid")
    }

    pub fn scalar(a: T, n: usize) -> Result<Self> {
        Self::from_diag(&vec![a; n])
    }

    /// Attaches Jordan-block metadata; block sizes must add up to the dimension.
    pub fn with_jordan_blocks(mut self, blocks: Vec<JordanBlock<T>>) -> Result<Self> {
        let total: usize = blocks.iter().map(|b| b.size).sum();
        if total != self.dim() || blocks.iter().any(|b| b.size == 0) {
            return Err(Error::InvalidOperator(format!(
                "jordan block sizes sum to {total}, operator dimension is {}",
                self.dim()
            )));
        }
        self.jordan_blocks = Some(blocks);
        Ok(self)
    }

    /// Fails unless the spectrum lies in the open right half-plane.
    pub fn require_positive_spectrum(&self, name: &str) -> Result<()> {
        if self.lambda_min > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidOperator(format!(
                "{name} must have positive spectrum (min real part {} <= 0)",
                self.lambda_min
            )))
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    #[inline]
    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    #[inline]
    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.trace
    }

    pub fn jordan_blocks(&self) -> Option<&[JordanBlock<T>]> {
        self.jordan_blocks.as_deref()
    }

    #[inline]
    pub fn is_positive_spectrum(&self) -> bool {
        self.lambda_min > T::zero()
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Spectral radius.
    pub fn spectral_radius(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }

    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            eigenvalues: self.eigenvalues.clone(),
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            trace: self.trace,
            jordan_blocks: self.jordan_blocks.clone(),
            diagonal: self.diagonal,
        }
    }

    pub fn scale(&self, k: T) -> Result<Self> {
        Self::new(self.matrix.scale(k))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        Self::new(&self.matrix - &other.matrix)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        Self::new(&self.matrix + &other.matrix)
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        Self::new(self.matrix.direct_sum(&other.matrix))
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// `s^A = exp(ln(s) A)` for `s > 0`.
    pub fn mat_exp(&self, s: T) -> Result<Matrix<T>> {
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::Domain(format!("s^A needs s > 0, got {s}")));
        }
        Ok(self.exp_log(s.ln()))
    }

    /// `exp(w A)` for real `w`.
    pub fn exp_log(&self, w: T) -> Matrix<T> {
        if self.diagonal {
            return Matrix::from_diag(
                &self
                    .matrix
                    .diag()
                    .iter()
                    .map(|&a| (a * w).exp())
                    .collect::<Vec<_>>(),
            );
        }
        expm(&self.matrix.scale(w))
    }

    /// Power-law envelope `C s^{λ_A - δ}` (s ≤ s0) or `C s^{Λ_A + δ}` (s ≥ s0) for `‖s^A‖`.
    ///
    /// The constant is the largest ratio over 64 log-spaced points covering twelve
    /// e-folds on the relevant side of `s0` (plus `s` itself). It is a fitted
    /// heuristic, not a certified bound.
    pub fn norm_bound(&self, s: T, delta: T, s0: T) -> Result<T> {
        if !(delta > T::zero()) || !(s0 > T::zero()) || !(s > T::zero()) {
            return Err(Error::Domain("norm_bound needs s, delta, s0 > 0".into()));
        }
        let below = s <= s0;
        let expo = if below {
            self.lambda_min - delta
        } else {
            self.lambda_max + delta
        };
        let span = T::lit(12.0);
        let n = 64;
        let mut c = T::zero();
        let ratio = |x: T| -> T { self.exp_log(x.ln()).norm_2() / x.powf(expo) };
        for i in 0..n {
            let f = T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
            let w = if below { -span * f } else { span * f };
            c = c.max(ratio(s0 * w.exp()));
        }
        c = c.max(ratio(s));
        Ok(c * s.powf(expo))
    }

    /// `‖AB − BA‖ ≤ tol (‖A‖‖B‖ + 1)` in the spectral norm.
    pub fn commutes(&self, other: &Self, tol: T) -> Result<bool> {
        self.check_dims(other)?;
        let ab = self.matrix.matmul(&other.matrix);
        let ba = other.matrix.matmul(&self.matrix);
        let lhs = (&ab - &ba).norm_2();
        Ok(lhs <= tol * (self.matrix.norm_2() * other.matrix.norm_2() + T::one()))
    }
}

pub fn mat_exp<T: Real>(a: &OperatorSpec<T>, s: T) -> Result<Matrix<T>> {
    a.mat_exp(s)
}

pub fn norm_bound<T: Real>(a: &OperatorSpec<T>, s: T, delta: T, s0: T) -> Result<T> {
    a.norm_bound(s, delta, s0)
}

pub fn commutes<T: Real>(a: &OperatorSpec<T>, b: &OperatorSpec<T>, tol: T) -> Result<bool> {
    a.commutes(b, tol)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.rows();
    let norm = a.norm_one();
    if norm == T::zero() {
        return Matrix::identity(n);
    }
    let theta = if std::mem::size_of::<T>() == 4 {
        T::lit(3.925724783138660)
    } else {
        T::lit(5.371920351148152)
    };
    let mut squarings = 0i32;
    if norm > theta {
        squarings = (norm / theta).log2().ceil().to_i32().unwrap_or(0).max(0);
    }
    let a = a.scale(T::lit(2f64.powi(-squarings)));
    let b: Vec<T> = PADE13.iter().map(|&x| T::lit(x)).collect();
    let id = Matrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let lin = |c6: T, c4: T, c2: T, c0: T| -> Matrix<T> {
        let t = &(&a6.scale(c6) + &a4.scale(c4)) + &a2.scale(c2);
        &t + &id.scale(c0)
    };
    let u_inner = a6.matmul(&(&(&a6.scale(b[13]) + &a4.scale(b[11])) + &a2.scale(b[9])));
    let u = a.matmul(&(&u_inner + &lin(b[7], b[5], b[3], b[1])));
    let v_inner = a6.matmul(&(&(&a6.scale(b[12]) + &a4.scale(b[10])) + &a2.scale(b[8])));
    let v = &v_inner + &lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_exp(a: &Matrix<f64>, terms: usize) -> Matrix<f64> {
        let n = a.rows();
        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..terms {
            term = term.matmul(a).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn identity_at_one() {
        let a = OperatorSpec::new(
            Matrix::<f64>::from_rows(&[vec![0.3, 1.0], vec![-0.2, 2.0]]).unwrap(),
        )
        .unwrap();
        let e = a.mat_exp(1.0).unwrap();
        assert!((&e - &Matrix::identity(2)).norm_max() < 1e-15);
    }

    #[test]
    fn rotation_generator_matches_series() {
        let a = OperatorSpec::new(
            Matrix::<f64>::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        for &s in &[0.2, 1.7, 5.0, 40.0] {
            let w: f64 = f64::ln(s);
            let oracle = series_exp(&a.matrix().scale(w), 30);
            let got = a.mat_exp(s).unwrap();
            assert!((&got - &oracle).norm_max() < 1e-12, "s={s}");
            assert!((got[(0, 0)] - w.cos()).abs() < 1e-13);
            assert!((got[(1, 0)] - w.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn large_norm_uses_squaring() {
        let m = Matrix::<f64>::from_rows(&[vec![1.5, 1.0], vec![0.0, 1.5]]).unwrap();
        let a = OperatorSpec::new(m).unwrap();
        let w = 6.0f64;
        let e = a.exp_log(w);
        let ew = (1.5 * w).exp();
        assert!((e[(0, 0)] / ew - 1.0).abs() < 1e-13);
        assert!((e[(0, 1)] / (w * ew) - 1.0).abs() < 1e-13);
        assert!(e[(1, 0)].abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_s() {
        let a = OperatorSpec::<f64>::identity(2);
        assert!(matches!(a.mat_exp(0.0), Err(Error::Domain(_))));
        assert!(a.mat_exp(-1.0).is_err());
    }

    #[test]
    fn spectral_summary() {
        let a = OperatorSpec::<f64>::from_diag(&[0.5, 2.0, 1.0]).unwrap();
        assert_eq!(a.lambda_min(), 0.5);
        assert_eq!(a.lambda_max(), 2.0);
        assert_eq!(a.trace(), 3.5);
        let j = OperatorSpec::new(
            Matrix::<f64>::from_rows(&[vec![0.7, -2.0], vec![2.0, 0.7]]).unwrap(),
        )
        .unwrap();
        assert!((j.lambda_min() - 0.7).abs() < 1e-12 && (j.lambda_max() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn norm_bound_examples() {
        let id = OperatorSpec::<f64>::identity(2);
        assert!(id.norm_bound(2.0, 0.1, 1.0).unwrap() >= 2.0);
        let a = OperatorSpec::<f64>::from_diag(&[1.0, 2.0]).unwrap();
        assert!(a.norm_bound(4.0, 0.01, 1.0).unwrap() >= 16.0);
        let j =
            OperatorSpec::new(Matrix::<f64>::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap())
                .unwrap();
        for &s in &[3.0, 50.0, 1e3] {
            let exact = j.mat_exp(s).unwrap().norm_2();
            assert!(j.norm_bound(s, 0.05, 1.0).unwrap() >= exact);
        }
        for &s in &[0.5, 1e-2, 1e-4] {
            let exact = j.mat_exp(s).unwrap().norm_2();
            assert!(j.norm_bound(s, 0.05, 1.0).unwrap() >= exact);
        }
    }

    #[test]
    fn commutation() {
        let b =
            OperatorSpec::new(Matrix::<f64>::from_rows(&[vec![0.8, 0.1], vec![0.3, 0.6]]).unwrap())
                .unwrap();
        let d = b.scale(0.4).unwrap();
        assert!(d.commutes(&b, 1e-12).unwrap());
        let x = OperatorSpec::<f64>::from_diag(&[1.0, 3.0]).unwrap();
        let y = OperatorSpec::<f64>::from_diag(&[2.0, -1.0]).unwrap();
        assert!(x.commutes(&y, 1e-14).unwrap());
        assert!(!x.commutes(&b, 1e-8).unwrap());
        assert!(x.commutes(&OperatorSpec::identity(3), 1e-8).is_err());
    }

    #[test]
    fn jordan_metadata_validated() {
        let a = OperatorSpec::<f64>::identity(3);
        assert!(a
            .clone()
            .with_jordan_blocks(vec![JordanBlock { re: 1.0, size: 2 }])
            .is_err());
        assert!(a
            .with_jordan_blocks(vec![
                JordanBlock { re: 1.0, size: 2 },
                JordanBlock { re: 1.0, size: 1 }
            ])
            .is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let a = OperatorSpec::<f32>::new(
            Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let e = a.exp_log(0.5);
        assert!((e[(0, 0)] - 0.5f32.cos()).abs() < 1e-6);
    }
}
