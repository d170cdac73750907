//! Symmetric strictly operator-stable laws: samplers and log-characteristic
//! functions.
//!
//! All generators are symmetric, so `ψ` is real and the shift terms vanish.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;
use crate::polar::{euclid, PolarFrame};
use crate::quadrature::GaussLegendre;

/// `Γ(1−α) cos(πα/2)`, continued by `π/2` at `α = 1`.
///
/// For a symmetric measure `r^{-2} dr` along `r^{1/α} ζ` the radial integral is
/// `∫_0^∞ (cos(r^{1/α} a) − 1) r^{-2} dr = −sas_constant(α) |a|^α`.
pub fn sas_constant(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        FRAC_PI_2
    } else {
        libm::tgamma(1.0 - alpha) * (FRAC_PI_2 * alpha).cos()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidGenerator(format!(
            "stability index must lie in (0, 2], got {alpha}"
        )))
    }
}

/// One draw from the symmetric α-stable law with `ψ(u) = −|u|^α`.
pub fn sample_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(sas_unchecked(alpha, rng))
}

#[inline]
pub(crate) fn sas_unchecked<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 2.0 {
        let g: f64 = StandardNormal.sample(rng);
        return g * std::f64::consts::SQRT_2;
    }
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variable with Laplace transform `exp(−λ^β)`, `0 < β < 1`.
#[inline]
fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let w: f64 = Exp1.sample(rng);
    (beta * u).sin() / u.sin().powf(1.0 / beta)
        * (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta)
}

/// Planar isotropic α-stable pair with `ψ(u) = −‖u‖^α`.
#[inline]
fn isotropic_pair<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> (f64, f64) {
    let a = if alpha >= 2.0 {
        1.0
    } else {
        positive_stable(alpha / 2.0, rng)
    };
    let s = (2.0 * a).sqrt();
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    (s * g1, s * g2)
}

/// A point mass of the spectral measure; `zeta` lies on the unit sphere of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtom {
    pub zeta: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorMode {
    /// Independent symmetric `α_j`-stable coordinates, `B = diag(1/α_j)`.
    PerComponent { alphas: Vec<f64> },
    /// Discrete spectral measure on `S_B`, sampled by a truncated LePage series.
    Spectral { atoms: Vec<SpectralAtom> },
    /// Centered Gaussian with covariance `Q`.
    Gaussian { q: Matrix<f64> },
    /// `R^{2m}` law whose `(j, m+j)` coordinate pairs are independent planar
    /// isotropic `α_j`-stable vectors; exponent `B ⊕ B`.
    ComplexIsotropic { alphas: Vec<f64> },
}

pub const DEFAULT_LEPAGE_TERMS: usize = 1000;

#[derive(Debug)]
struct Spectral {
    cumulative: Vec<f64>,
    mass: f64,
    tail_warned: AtomicBool,
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    mode: GeneratorMode,
    exponent: OperatorSpec<f64>,
    isotropic: bool,
    n_terms: usize,
    chol: Option<Matrix<f64>>,
    spectral: Option<Arc<Spectral>>,
}

impl GeneratorSpec {
    pub fn per_component(alphas: &[f64]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidGenerator(
                "need at least one stability index".into(),
            ));
        }
        for &a in alphas {
            check_alpha(a)?;
        }
        let b: Vec<f64> = alphas.iter().map(|a| 1.0 / a).collect();
        Ok(Self {
            mode: GeneratorMode::PerComponent {
                alphas: alphas.to_vec(),
            },
            exponent: OperatorSpec::from_diag(&b)?,
            isotropic: false,
            n_terms: DEFAULT_LEPAGE_TERMS,
            chol: None,
            spectral: None,
        })
    }

    /// `R^{2m}` generator with isotropic complex components and exponent `B ⊕ B`.
    pub fn complex_isotropic(alphas: &[f64]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidGenerator(
                "need at least one stability index".into(),
            ));
        }
        for &a in alphas {
            check_alpha(a)?;
        }
        let b: Vec<f64> = alphas.iter().chain(alphas).map(|a| 1.0 / a).collect();
        Ok(Self {
            mode: GeneratorMode::ComplexIsotropic {
                alphas: alphas.to_vec(),
            },
            exponent: OperatorSpec::from_diag(&b)?,
            isotropic: true,
            n_terms: DEFAULT_LEPAGE_TERMS,
            chol: None,
            spectral: None,
        })
    }

    /// Gaussian law `N(0, Q)` with its natural exponent `I/2`.
    pub fn gaussian(q: Matrix<f64>) -> Result<Self> {
        let m = q.rows();
        Self::gaussian_with_exponent(q, OperatorSpec::scalar(0.5, m)?)
    }

    /// Gaussian law paired with an arbitrary exponent; only `I/2` is a true
    /// exponent, anything else shows up as a scaling defect.
    pub fn gaussian_with_exponent(q: Matrix<f64>, b: OperatorSpec<f64>) -> Result<Self> {
        if !q.is_symmetric(1e-12) {
            return Err(Error::InvalidGenerator(
                "covariance must be symmetric".into(),
            ));
        }
        if b.dim() != q.rows() {
            return Err(Error::DimensionMismatch {
                expected: q.rows(),
                got: b.dim(),
            });
        }
        let chol = q
            .cholesky()
            .map_err(|e| Error::InvalidGenerator(e.to_string()))?;
        if q.rank(1e-10) < q.rows() {
            return Err(Error::InvalidGenerator(
                "covariance is not full rank".into(),
            ));
        }
        Ok(Self {
            mode: GeneratorMode::Gaussian { q },
            exponent: b,
            isotropic: false,
            n_terms: DEFAULT_LEPAGE_TERMS,
            chol: Some(chol),
            spectral: None,
        })
    }

    /// Spectral-measure generator. Atoms must lie on `S_B`; use
    /// [`atoms_on_sphere`] to project arbitrary directions first.
    pub fn spectral(b: OperatorSpec<f64>, atoms: Vec<SpectralAtom>) -> Result<Self> {
        let m = b.dim();
        if atoms.is_empty() {
            return Err(Error::InvalidGenerator(
                "spectral measure needs at least one atom".into(),
            ));
        }
        if b.lambda_min() <= 0.5 {
            return Err(Error::InvalidGenerator(format!(
                "exponent needs lambda_B > 1/2 for a jump law, got {}",
                b.lambda_min()
            )));
        }
        let frame = PolarFrame::new(&b)?;
        for (i, a) in atoms.iter().enumerate() {
            if a.zeta.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: a.zeta.len(),
                });
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidGenerator(format!(
                    "atom {i} has non-positive weight"
                )));
            }
            let tau = frame.tau(&a.zeta)?;
            if (tau - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidGenerator(format!(
                    "atom {i} is off the unit sphere (tau = {tau})"
                )));
            }
        }
        let span = Matrix::from_fn(m, atoms.len(), |i, j| atoms[j].zeta[i]);
        if span.rank(1e-10) < m {
            return Err(Error::InvalidGenerator(
                "spectral atoms do not span the space (law is not full)".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.weight;
            cumulative.push(acc);
        }
        Ok(Self {
            mode: GeneratorMode::Spectral { atoms },
            exponent: b,
            isotropic: false,
            n_terms: DEFAULT_LEPAGE_TERMS,
            chol: None,
            spectral: Some(Arc::new(Spectral {
                cumulative,
                mass: acc,
                tail_warned: AtomicBool::new(false),
            })),
        })
    }

    /// Number of LePage terms used in spectral mode.
    pub fn with_terms(mut self, n_terms: usize) -> Self {
        if n_terms < 100 {
            log::warn!("LePage series truncated after {n_terms} terms (< 100)");
        }
        self.n_terms = n_terms.max(1);
        self
    }

    pub fn mode(&self) -> &GeneratorMode {
        &self.mode
    }

    pub fn exponent(&self) -> &OperatorSpec<f64> {
        &self.exponent
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.mode, GeneratorMode::Gaussian { .. })
    }

    /// Stability indices per coordinate for the per-component and complex modes.
    pub fn alphas(&self) -> Option<&[f64]> {
        match &self.mode {
            GeneratorMode::PerComponent { alphas } | GeneratorMode::ComplexIsotropic { alphas } => {
                Some(alphas)
            }
            _ => None,
        }
    }

    /// Draws one sample into `out` (length `dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.mode {
            GeneratorMode::PerComponent { alphas } => {
                for (o, &a) in out.iter_mut().zip(alphas) {
                    *o = sas_unchecked(a, rng);
                }
            }
            GeneratorMode::ComplexIsotropic { alphas } => {
                let m = alphas.len();
                for (j, &a) in alphas.iter().enumerate() {
                    let (re, im) = isotropic_pair(a, rng);
                    out[j] = re;
                    out[m + j] = im;
                }
            }
            GeneratorMode::Gaussian { .. } => {
                let z: Vec<f64> = (0..out.len()).map(|_| StandardNormal.sample(rng)).collect();
                self.chol
                    .as_ref()
                    .expect("gaussian has a factor")
                    .mul_vec_into(&z, out);
            }
            GeneratorMode::Spectral { atoms } => self.lepage(atoms, rng, out),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    fn lepage<R: Rng + ?Sized>(&self, atoms: &[SpectralAtom], rng: &mut R, out: &mut [f64]) {
        let sp = self.spectral.as_ref().expect("spectral cache");
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut gamma = 0.0;
        let diag = self
            .exponent
            .is_diagonal()
            .then(|| self.exponent.matrix().diag());
        let mut tmp = vec![0.0; out.len()];
        for _ in 0..self.n_terms {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            let r = sp.mass / gamma;
            let pick = rng.random::<f64>() * sp.mass;
            let k = sp
                .cumulative
                .partition_point(|&c| c < pick)
                .min(atoms.len() - 1);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let zeta = &atoms[k].zeta;
            match &diag {
                Some(b) => {
                    let lr = r.ln();
                    for ((o, &z), &bj) in out.iter_mut().zip(zeta).zip(b) {
                        *o += sign * (bj * lr).exp() * z;
                    }
                }
                None => {
                    self.exponent.exp_log(r.ln()).mul_vec_into(zeta, &mut tmp);
                    for (o, &t) in out.iter_mut().zip(&tmp) {
                        *o += sign * t;
                    }
                }
            }
        }
        let tail = (sp.mass / gamma).powf(self.exponent.lambda_min());
        if tail > 1e-3 * euclid(out) && !sp.tail_warned.swap(true, Ordering::Relaxed) {
            log::warn!("LePage tail estimate {tail:.3e} exceeds 1e-3 of the sample magnitude");
        }
    }

    /// `ψ(u)` in closed form where available, by radial quadrature otherwise.
    pub fn log_cf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(match &self.mode {
            GeneratorMode::PerComponent { alphas } => -u
                .iter()
                .zip(alphas)
                .map(|(x, a)| x.abs().powf(*a))
                .sum::<f64>(),
            GeneratorMode::ComplexIsotropic { alphas } => {
                let m = alphas.len();
                -alphas
                    .iter()
                    .enumerate()
                    .map(|(j, a)| (u[j] * u[j] + u[m + j] * u[m + j]).powf(a / 2.0))
                    .sum::<f64>()
            }
            GeneratorMode::Gaussian { q } => {
                let qu = q.mul_vec(u);
                -0.5 * qu.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
            }
            GeneratorMode::Spectral { atoms } => match self.scalar_exponent() {
                Some(b) => {
                    let alpha = 1.0 / b;
                    let c = sas_constant(alpha);
                    -c * atoms
                        .iter()
                        .map(|a| a.weight * dot(u, &a.zeta).abs().powf(alpha))
                        .sum::<f64>()
                }
                None => self.log_cf_quadrature(u)?,
            },
        })
    }

    fn scalar_exponent(&self) -> Option<f64> {
        let m = self.exponent.matrix();
        let b = m[(0, 0)];
        (m.is_diagonal() && m.diag().iter().all(|&x| (x - b).abs() <= 1e-15 * b.abs())).then_some(b)
    }

    /// Spectral-mode `ψ(u)` by direct quadrature of
    /// `Σ_i w_i ∫_0^∞ (cos⟨u, r^B ζ_i⟩ − 1) r^{-2} dr`.
    pub fn log_cf_quadrature(&self, u: &[f64]) -> Result<f64> {
        let atoms = match &self.mode {
            GeneratorMode::Spectral { atoms } => atoms,
            _ => {
                return Err(Error::Unsupported(
                    "radial quadrature needs a spectral-mode generator".into(),
                ))
            }
        };
        let mut total = 0.0;
        for a in atoms {
            total += a.weight * radial_cos_integral(&self.exponent, u, &a.zeta)?;
        }
        Ok(total)
    }

    /// Discrete spectral measure on `S_B` representing this law's Lévy measure.
    ///
    /// Per-component laws are exact (atoms `±l(e_j)`); complex isotropic laws
    /// discretize each planar circle with `ring` atoms.
    pub fn spectral_atoms(&self, ring: usize) -> Result<Vec<SpectralAtom>> {
        match &self.mode {
            GeneratorMode::Spectral { atoms } => Ok(atoms.clone()),
            GeneratorMode::Gaussian { .. } => Err(Error::Unsupported(
                "a Gaussian law has no Lévy measure".into(),
            )),
            GeneratorMode::PerComponent { alphas } => {
                let m = alphas.len();
                let mut out = Vec::with_capacity(2 * m);
                for (j, &alpha) in alphas.iter().enumerate() {
                    if alpha >= 2.0 {
                        return Err(Error::Unsupported(
                            "alpha = 2 component has no Lévy measure".into(),
                        ));
                    }
                    // On the j-th axis the exponent is 1/α_j, so l(e_j) = e_j / α_j.
                    let len = 1.0 / alpha;
                    let w = 1.0 / (2.0 * sas_constant(alpha) * len.powf(alpha));
                    for sign in [1.0, -1.0] {
                        let mut z = vec![0.0; m];
                        z[j] = sign * len;
                        out.push(SpectralAtom { zeta: z, weight: w });
                    }
                }
                Ok(out)
            }
            GeneratorMode::ComplexIsotropic { alphas } => {
                let m = alphas.len();
                let ring = ring.max(4);
                let mut out = Vec::with_capacity(ring * m);
                for (j, &alpha) in alphas.iter().enumerate() {
                    if alpha >= 2.0 {
                        return Err(Error::Unsupported(
                            "alpha = 2 component has no Lévy measure".into(),
                        ));
                    }
                    let len = 1.0 / alpha;
                    // mean of |cos θ|^α over the circle
                    let kappa = libm::tgamma((alpha + 1.0) / 2.0)
                        / (PI.sqrt() * libm::tgamma(alpha / 2.0 + 1.0));
                    let w = 1.0 / (ring as f64 * sas_constant(alpha) * kappa * len.powf(alpha));
                    for k in 0..ring {
                        let th = 2.0 * PI * (k as f64 + 0.5) / ring as f64;
                        let mut z = vec![0.0; 2 * m];
                        z[j] = len * th.cos();
                        z[m + j] = len * th.sin();
                        out.push(SpectralAtom { zeta: z, weight: w });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Projects directions onto `S_B`: `ζ = l_B(x)`. Weights are kept as given.
pub fn atoms_on_sphere(
    b: &OperatorSpec<f64>,
    dirs: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<SpectralAtom>> {
    if dirs.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: dirs.len(),
            got: weights.len(),
        });
    }
    let frame = PolarFrame::new(b)?;
    dirs.iter()
        .zip(weights)
        .map(|(x, &w)| {
            Ok(SpectralAtom {
                zeta: frame.polar(x)?.direction,
                weight: w,
            })
        })
        .collect()
}

/// `n` atoms equally spaced on the unit circle of `B = b I_2` with equal weights.
pub fn uniform_circle_atoms(b: f64, n: usize, total_weight: f64) -> Result<Vec<SpectralAtom>> {
    let op = OperatorSpec::scalar(b, 2)?;
    let dirs: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            vec![th.cos(), th.sin()]
        })
        .collect();
    atoms_on_sphere(&op, &dirs, &vec![total_weight / n as f64; n])
}

/// Free-function form of [`GeneratorSpec::sample`] with an explicit series length.
pub fn sample_operator_stable<R: Rng + ?Sized>(
    gen: &GeneratorSpec,
    rng: &mut R,
    n_terms: usize,
) -> Vec<f64> {
    if n_terms == gen.n_terms {
        gen.sample(rng)
    } else {
        gen.clone().with_terms(n_terms).sample(rng)
    }
}

/// Builds the `R^{2m}` generator with isotropic complex `α_j`-stable components.
pub fn make_complex_isotropic(alphas: &[f64]) -> Result<GeneratorSpec> {
    GeneratorSpec::complex_isotropic(alphas)
}

/// `max |s ψ(u) − ψ(s^{Bᵀ} u)|` over the grid; zero for strictly operator-stable laws.
pub fn verify_ops_scaling(
    gen: &GeneratorSpec,
    s_values: &[f64],
    u_values: &[Vec<f64>],
) -> Result<f64> {
    let bt = gen.exponent().transpose();
    let mut worst: f64 = 0.0;
    for &s in s_values {
        let m = bt.mat_exp(s)?;
        for u in u_values {
            let lhs = s * gen.log_cf(u)?;
            let rhs = gen.log_cf(&m.mul_vec(u))?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `∫_0^∞ (cos⟨u, r^B ζ⟩ − 1) r^{-2} dr` with `r = e^v`.
fn radial_cos_integral(b: &OperatorSpec<f64>, u: &[f64], zeta: &[f64]) -> Result<f64> {
    let nu = euclid(u);
    if nu == 0.0 {
        return Ok(0.0);
    }
    let bm = b.matrix();
    let phase = |v: f64| -> (f64, f64) {
        let x = b.exp_log(v).mul_vec(zeta);
        (dot(u, &x), dot(u, &bm.mul_vec(&x)))
    };
    let lam = b.lambda_min();
    if lam <= 0.5 {
        return Err(Error::Numerical(
            "radial integral diverges for lambda_B <= 1/2".into(),
        ));
    }
    // Lower cut: |phase| small enough for the quadratic approximation.
    let mut v_lo = 0.0;
    while nu * euclid(&b.exp_log(v_lo).mul_vec(zeta)) > 1e-6 {
        v_lo -= 1.0;
        if v_lo < -1e4 {
            return Err(Error::Numerical(
                "radial integral: lower cut not found".into(),
            ));
        }
    }
    // Below the cut cos(g) − 1 ≈ −g²/2, integrated exactly when B is diagonal.
    let mut total = if b.is_diagonal() {
        let d = bm.diag();
        let c: Vec<f64> = u.iter().zip(zeta).map(|(a, z)| a * z).collect();
        let mut acc = 0.0;
        for j in 0..d.len() {
            for k in 0..d.len() {
                let e = d[j] + d[k] - 1.0;
                acc += c[j] * c[k] * (e * v_lo).exp() / e;
            }
        }
        -0.5 * acc
    } else {
        let (g_lo, _) = phase(v_lo);
        -0.5 * g_lo * g_lo * (-v_lo).exp() / (2.0 * lam - 1.0)
    };

    let gl = GaussLegendre::<f64>::new(8);
    let mut v = v_lo;
    let bnorm = bm.norm_2();
    loop {
        let amp = nu * euclid(&b.exp_log(v).mul_vec(zeta));
        if amp > 2000.0 {
            break;
        }
        let rate = (amp * bnorm).max(1e-3);
        let h = (1.0 / rate).min(0.25);
        total += gl.integrate(v, v + h, |w| (phase(w).0.cos() - 1.0) * (-w).exp());
        v += h;
        if v > 1e4 {
            return Err(Error::Numerical(
                "radial integral: upper cut not found".into(),
            ));
        }
    }
    let (g, dg) = phase(v);
    let ev = (-v).exp();
    total -= ev;
    if dg.abs() > 1e-8 * nu {
        total -= g.sin() * ev / dg;
    } else {
        total += g.cos() * ev;
    }
    Ok(total)
}
