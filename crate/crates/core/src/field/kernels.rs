//! Moving-average and harmonizable kernels.

use crate::error::{Error, Result};
use crate::homogeneous::HomogeneousFn;
use crate::integrability::KernelFamily;
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;

/// `φ(t−s)^{D−qB} − φ(−s)^{D−qB}` with the convention `0^A = 0`.
#[derive(Debug, Clone)]
pub struct MaKernel {
    e: OperatorSpec<f64>,
    exponent: OperatorSpec<f64>,
    phi: HomogeneousFn<f64>,
    m: usize,
}

impl MaKernel {
    pub fn new(
        e: &OperatorSpec<f64>,
        d: &OperatorSpec<f64>,
        b: &OperatorSpec<f64>,
        phi: &HomogeneousFn<f64>,
    ) -> Result<Self> {
        if d.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.dim(),
                got: d.dim(),
            });
        }
        if phi.dim() != e.dim() {
            return Err(Error::DimensionMismatch {
                expected: e.dim(),
                got: phi.dim(),
            });
        }
        let exponent = d.sub(&b.scale(e.trace())?)?;
        Ok(Self {
            e: e.clone(),
            exponent,
            phi: phi.clone(),
            m: d.dim(),
        })
    }

    /// `D − qB`.
    pub fn exponent(&self) -> &OperatorSpec<f64> {
        &self.exponent
    }

    pub fn phi(&self) -> &HomogeneousFn<f64> {
        &self.phi
    }

    pub fn time_operator(&self) -> &OperatorSpec<f64> {
        &self.e
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn power(&self, x: f64) -> Matrix<f64> {
        if x > 0.0 {
            self.exponent.exp_log(x.ln())
        } else {
            Matrix::zeros(self.m, self.m)
        }
    }

    pub fn eval(&self, t: &[f64], s: &[f64]) -> Matrix<f64> {
        let ts: Vec<f64> = t.iter().zip(s).map(|(a, b)| a - b).collect();
        let ms: Vec<f64> = s.iter().map(|x| -x).collect();
        let a = self.phi.eval(&ts);
        let b = self.phi.eval(&ms);
        if a == b {
            return Matrix::zeros(self.m, self.m);
        }
        &self.power(a) - &self.power(b)
    }

    /// The kernel at a fixed anchor `t`, as an integrability family.
    pub fn at(&self, t: &[f64]) -> MaKernelAt {
        MaKernelAt {
            kernel: self.clone(),
            t: t.to_vec(),
        }
    }
}

pub fn ma_kernel(
    t: &[f64],
    s: &[f64],
    e: &OperatorSpec<f64>,
    d: &OperatorSpec<f64>,
    b: &OperatorSpec<f64>,
    phi: &HomogeneousFn<f64>,
) -> Result<Matrix<f64>> {
    Ok(MaKernel::new(e, d, b, phi)?.eval(t, s))
}

#[derive(Debug, Clone)]
pub struct MaKernelAt {
    kernel: MaKernel,
    t: Vec<f64>,
}

impl KernelFamily for MaKernelAt {
    fn domain_dim(&self) -> usize {
        self.t.len()
    }
    fn rows(&self) -> usize {
        self.kernel.m
    }
    fn cols(&self) -> usize {
        self.kernel.m
    }
    fn eval(&self, s: &[f64]) -> Matrix<f64> {
        self.kernel.eval(&self.t, s)
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![vec![0.0; self.t.len()]];
        if self.t.iter().any(|&x| x != 0.0) {
            pts.push(self.t.clone());
        }
        pts
    }
    fn frame_operator(&self) -> OperatorSpec<f64> {
        self.kernel.e.clone()
    }
}

/// `(e^{i⟨t,s⟩} − 1) φ(s)^{−D} φ(s)^{−qB}` in real block form.
///
/// The two powers are kept as separate factors; they only merge into
/// `φ(s)^{−D−qB}` when `D` and `B` commute.
#[derive(Debug, Clone)]
pub struct HarmKernel {
    e: OperatorSpec<f64>,
    neg_d: OperatorSpec<f64>,
    neg_qb: OperatorSpec<f64>,
    phi: HomogeneousFn<f64>,
    m: usize,
}

impl HarmKernel {
    pub fn new(
        e: &OperatorSpec<f64>,
        d: &OperatorSpec<f64>,
        b: &OperatorSpec<f64>,
        phi: &HomogeneousFn<f64>,
    ) -> Result<Self> {
        if d.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.dim(),
                got: d.dim(),
            });
        }
        if phi.dim() != e.dim() {
            return Err(Error::DimensionMismatch {
                expected: e.dim(),
                got: phi.dim(),
            });
        }
        Ok(Self {
            e: e.clone(),
            neg_d: d.scale(-1.0)?,
            neg_qb: b.scale(-e.trace())?,
            phi: phi.clone(),
            m: d.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn phi(&self) -> &HomogeneousFn<f64> {
        &self.phi
    }

    pub fn time_operator(&self) -> &OperatorSpec<f64> {
        &self.e
    }

    /// `K(s) = φ(s)^{−D} φ(s)^{−qB}`.
    pub fn amplitude(&self, s: &[f64]) -> Result<Matrix<f64>> {
        let p = self.phi.eval(s);
        if !(p > 0.0) {
            return Err(Error::Domain(
                "harmonizable kernel is undefined at s = 0".into(),
            ));
        }
        let l = p.ln();
        Ok(self.neg_d.exp_log(l).matmul(&self.neg_qb.exp_log(l)))
    }

    pub fn eval(&self, t: &[f64], s: &[f64]) -> Result<Matrix<f64>> {
        let k = self.amplitude(s)?;
        let phase: f64 = t.iter().zip(s).map(|(a, b)| a * b).sum();
        Ok(block(&k, phase.cos() - 1.0, phase.sin()))
    }

    pub fn at(&self, t: &[f64]) -> HarmKernelAt {
        HarmKernelAt {
            kernel: self.clone(),
            t: t.to_vec(),
        }
    }
}

/// `[[c K, −s K], [s K, c K]]`.
pub(crate) fn block(k: &Matrix<f64>, c: f64, s: f64) -> Matrix<f64> {
    let m = k.rows();
    Matrix::from_fn(2 * m, 2 * m, |i, j| {
        let v = k[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => c * v,
            (true, false) => -s * v,
            (false, true) => s * v,
        }
    })
}

pub fn harm_kernel(
    t: &[f64],
    s: &[f64],
    e: &OperatorSpec<f64>,
    d: &OperatorSpec<f64>,
    b: &OperatorSpec<f64>,
    phi: &HomogeneousFn<f64>,
) -> Result<Matrix<f64>> {
    HarmKernel::new(e, d, b, phi)?.eval(t, s)
}

#[derive(Debug, Clone)]
pub struct HarmKernelAt {
    kernel: HarmKernel,
    t: Vec<f64>,
}

impl KernelFamily for HarmKernelAt {
    fn domain_dim(&self) -> usize {
        self.t.len()
    }
    fn rows(&self) -> usize {
        2 * self.kernel.m
    }
    fn cols(&self) -> usize {
        2 * self.kernel.m
    }
    fn eval(&self, s: &[f64]) -> Matrix<f64> {
        self.kernel
            .eval(&self.t, s)
            .unwrap_or_else(|_| Matrix::zeros(2 * self.kernel.m, 2 * self.kernel.m))
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.t.len()]]
    }
    fn frame_operator(&self) -> OperatorSpec<f64> {
        self.kernel.e.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_setup(
        alpha: f64,
        h: f64,
    ) -> (
        OperatorSpec<f64>,
        OperatorSpec<f64>,
        OperatorSpec<f64>,
        HomogeneousFn<f64>,
    ) {
        let e = OperatorSpec::identity(1);
        let d = OperatorSpec::scalar(h, 1).unwrap();
        let b = OperatorSpec::scalar(1.0 / alpha, 1).unwrap();
        let phi = HomogeneousFn::power_sum(&[1.0], 1.0).unwrap();
        (e, d, b, phi)
    }

    #[test]
    fn scalar_ma_kernel() {
        let (e, d, b, phi) = scalar_setup(1.5, 0.4);
        let k = MaKernel::new(&e, &d, &b, &phi).unwrap();
        let p = 0.4 - 1.0 / 1.5;
        for &s in &[-2.0, -0.3, 0.4, 0.9, 3.0] {
            let v = k.eval(&[1.0], &[s])[(0, 0)];
            let exact = (1.0f64 - s).abs().powf(p) - s.abs().powf(p);
            assert!((v - exact).abs() < 1e-12 * exact.abs().max(1.0));
        }
        assert_eq!(k.eval(&[0.0], &[0.7])[(0, 0)], 0.0);
        // symmetric point: φ(t−s) = φ(−s)
        assert_eq!(k.eval(&[1.0], &[0.5])[(0, 0)], 0.0);
    }

    #[test]
    fn harm_kernel_special_values() {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let b = OperatorSpec::from_diag(&[1.0 / 1.2, 1.0 / 1.8]).unwrap();
        let d = b.scale(0.5).unwrap();
        let phi = HomogeneousFn::power_sum(&[1.0, 2.0], 1.0).unwrap();
        let h = HarmKernel::new(&e, &d, &b, &phi).unwrap();
        let s = [0.7, -1.3];
        let z = h.eval(&[0.0, 0.0], &s).unwrap();
        assert_eq!(z.norm_max(), 0.0);
        // ⟨t, s⟩ = π
        let t = [std::f64::consts::PI / 0.7, 0.0];
        let k = h.amplitude(&s).unwrap();
        let v = h.eval(&t, &s).unwrap();
        let expect = block(&k, -2.0, 0.0);
        assert!((&v - &expect).norm_max() < 1e-12);
        // commuting factors merge
        let merged = d
            .add(&b.scale(e.trace()).unwrap())
            .unwrap()
            .exp_log(-phi.eval(&s).ln());
        assert!((&merged - &k).norm_max() < 1e-12);
        assert!(h.eval(&t, &[0.0, 0.0]).is_err());
    }
}
