//! Numerical integrability checks for matrix-valued kernels against an
//! operator-stable random measure, and the parameter gates of the two field
//! constructions.
//!
//! Integrals over `R^d` are taken in pseudo-polar frames `s = a + ρ^E θ`
//! around each singular point `a`, with `θ` on the Euclidean sphere and
//! `ds = ρ^q ⟨Eθ, θ⟩ d(ln ρ) dS(θ)`. Frames are blended by a partition of unity.
//! The value is tracked over nested radii `R_j = R_0 2^j`; verdicts are
//! three-valued because a finite computation can only extrapolate.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{GeneratorSpec, SpectralAtom};
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;
use crate::polar::euclid;
use crate::quadrature::GaussLegendre;

/// A matrix-valued kernel `s ↦ f(s)` on `R^d`.
pub trait KernelFamily: Send + Sync {
    fn domain_dim(&self) -> usize;
    /// Output dimension (rows of `f(s)`).
    fn rows(&self) -> usize;
    /// Dimension of the random measure (columns of `f(s)`).
    fn cols(&self) -> usize;
    fn eval(&self, s: &[f64]) -> Matrix<f64>;
    /// Points near which `‖f(s)‖` may be unbounded.
    fn singular_points(&self) -> Vec<Vec<f64>>;
    /// Exponent whose pseudo-polar frames suit the kernel's scaling.
    fn frame_operator(&self) -> OperatorSpec<f64> {
        OperatorSpec::identity(self.domain_dim())
    }
}

pub type KernelFn = Arc<dyn Fn(&[f64]) -> Matrix<f64> + Send + Sync>;

/// Kernel given by a closure.
#[derive(Clone)]
pub struct FnKernel {
    pub d: usize,
    pub rows: usize,
    pub cols: usize,
    pub singular: Vec<Vec<f64>>,
    pub frame: Option<OperatorSpec<f64>>,
    pub f: KernelFn,
}

impl KernelFamily for FnKernel {
    fn domain_dim(&self) -> usize {
        self.d
    }
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn eval(&self, s: &[f64]) -> Matrix<f64> {
        (self.f)(s)
    }
    fn singular_points(&self) -> Vec<Vec<f64>> {
        self.singular.clone()
    }
    fn frame_operator(&self) -> OperatorSpec<f64> {
        self.frame
            .clone()
            .unwrap_or_else(|| OperatorSpec::identity(self.d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convergence {
    Converged,
    /// Value keeps growing; carries the fitted `d ln V / d ln R` (or the decay
    /// deficit near a singular point when `at_singularity`).
    Divergent {
        exponent: f64,
        at_singularity: bool,
    },
    Inconclusive,
}

impl Convergence {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convergence::Converged => "converged",
            Convergence::Divergent { .. } => "divergent",
            Convergence::Inconclusive => "inconclusive",
        }
    }

    pub fn verdict(&self) -> Verdict {
        match self {
            Convergence::Converged => Verdict::Pass,
            Convergence::Divergent { .. } => Verdict::Fail,
            Convergence::Inconclusive => Verdict::Inconclusive,
        }
    }
}

/// Truncation and mesh parameters of the nested-domain protocol.
#[derive(Debug, Clone)]
pub struct IntegrationDomain {
    pub r0: f64,
    pub max_doublings: usize,
    /// Gauss–Legendre panels per angular quarter (per half-axis in 3-d).
    pub angular_panels: usize,
    pub radial_panels_per_octave: usize,
    /// Lowest `ln ρ` explored near a singular point.
    pub v_floor: f64,
    pub tol: f64,
    pub partition_power: f64,
    /// Override of the kernel's singular points (frame centers).
    pub centers: Option<Vec<Vec<f64>>>,
}

impl Default for IntegrationDomain {
    fn default() -> Self {
        Self {
            r0: 1.0,
            max_doublings: 20,
            angular_panels: 4,
            radial_panels_per_octave: 2,
            v_floor: -200.0,
            tol: 1e-3,
            partition_power: 4.0,
            centers: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralEstimate {
    pub value: f64,
    pub convergence: Convergence,
    /// Outer radius reached.
    pub radius: f64,
    /// `(R_j, V(R_j))` for the nested radii.
    pub history: Vec<(f64, f64)>,
    /// Relative change under mesh halving.
    pub mesh_change: f64,
}

const GL_ORDER: usize = 8;

struct AngularRule {
    points: Vec<(Vec<f64>, f64)>,
}

fn smoothstep(t: f64) -> (f64, f64) {
    (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
}

impl AngularRule {
    fn new(d: usize, panels: usize) -> Result<Self> {
        let gl = GaussLegendre::<f64>::new(GL_ORDER);
        // Nodes on [0, 1] clustered at both ends, which is where the axis-aligned
        // cusps of power-sum kernels sit.
        let unit: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let lo = p as f64 / panels as f64;
                let hi = (p + 1) as f64 / panels as f64;
                gl.mapped(lo, hi).collect::<Vec<_>>()
            })
            .map(|(t, w)| {
                let (s, ds) = smoothstep(t);
                (s, w * ds)
            })
            .collect();
        let quarter = std::f64::consts::FRAC_PI_2;
        let points = match d {
            1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
            2 => (0..4)
                .flat_map(|k| {
                    unit.iter()
                        .map(move |&(s, w)| (quarter * (k as f64 + s), quarter * w))
                })
                .map(|(phi, w)| (vec![phi.cos(), phi.sin()], w))
                .collect(),
            3 => {
                let zs: Vec<(f64, f64)> = [-1.0, 1.0]
                    .iter()
                    .flat_map(|&sgn| unit.iter().map(move |&(s, w)| (sgn * s, w)))
                    .collect();
                let phis: Vec<(f64, f64)> = (0..4)
                    .flat_map(|k| {
                        unit.iter()
                            .map(move |&(s, w)| (quarter * (k as f64 + s), quarter * w))
                    })
                    .collect();
                let mut pts = Vec::with_capacity(zs.len() * phis.len());
                for &(z, wz) in &zs {
                    let rxy = (1.0 - z * z).max(0.0).sqrt();
                    for &(phi, wp) in &phis {
                        pts.push((vec![rxy * phi.cos(), rxy * phi.sin(), z], wz * wp));
                    }
                }
                pts
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "integration over R^{d} is limited to d <= 3"
                )))
            }
        };
        Ok(Self { points })
    }
}

struct Frames {
    centers: Vec<Vec<f64>>,
    frame: OperatorSpec<f64>,
    q: f64,
    /// `⟨Eθ, θ⟩` per angular node.
    jac: Vec<f64>,
    angular: AngularRule,
    power: f64,
}

impl Frames {
    fn new(
        centers: Vec<Vec<f64>>,
        frame: OperatorSpec<f64>,
        panels: usize,
        power: f64,
    ) -> Result<Self> {
        let d = frame.dim();
        let sym = &frame.matrix().transpose() + frame.matrix();
        if Matrix::from_fn(d, d, |i, j| sym[(i, j)])
            .cholesky()
            .is_err()
            || sym.min_singular_value() <= 1e-12
        {
            return Err(Error::Unsupported(
                "pseudo-polar frames need E + E^T positive definite".into(),
            ));
        }
        let angular = AngularRule::new(d, panels)?;
        let jac = angular
            .points
            .iter()
            .map(|(th, _)| {
                let et = frame.matrix().mul_vec(th);
                et.iter().zip(th).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Ok(Self {
            q: frame.trace(),
            centers,
            frame,
            jac,
            angular,
            power,
        })
    }

    fn weight(&self, k: usize, s: &[f64]) -> f64 {
        if self.centers.len() == 1 {
            return 1.0;
        }
        let dist = |c: &[f64]| -> f64 {
            s.iter()
                .zip(c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let dk = dist(&self.centers[k]);
        let mut denom = 0.0;
        for c in &self.centers {
            let dj = dist(c);
            if dj == 0.0 {
                return if dk == 0.0 { 1.0 } else { 0.0 };
            }
            denom += (dk / dj).powf(self.power);
        }
        1.0 / denom
    }

    /// `∫_{v_a}^{v_b} ∫ h ds` summed over all frames.
    fn shell(&self, h: &(dyn Fn(&[f64]) -> f64 + Sync), v_a: f64, v_b: f64, panels: usize) -> f64 {
        let gl = GaussLegendre::<f64>::new(GL_ORDER);
        let width = (v_b - v_a) / panels as f64;
        let vnodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let lo = v_a + width * p as f64;
                gl.mapped(lo, lo + width).collect::<Vec<_>>()
            })
            .collect();
        let maps: Vec<Matrix<f64>> = vnodes.iter().map(|&(v, _)| self.frame.exp_log(v)).collect();
        let d = self.frame.dim();
        let per_center: Vec<f64> = self
            .centers
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let parts: Vec<f64> = vnodes
                    .par_iter()
                    .zip(maps.par_iter())
                    .map(|(&(v, wv), m)| {
                        let mut s = vec![0.0; d];
                        let mut acc = 0.0;
                        for ((th, wt), &j) in self.angular.points.iter().zip(&self.jac) {
                            m.mul_vec_into(th, &mut s);
                            for (x, c) in s.iter_mut().zip(a) {
                                *x += c;
                            }
                            let w = self.weight(k, &s);
                            if w == 0.0 {
                                continue;
                            }
                            let val = h(&s);
                            if val != 0.0 {
                                acc += w * val * wt * j;
                            }
                        }
                        acc * wv * (self.q * v).exp()
                    })
                    .collect();
                parts.iter().sum::<f64>()
            })
            .collect();
        per_center.iter().sum()
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

struct Sweep {
    inner_divergent: Option<f64>,
    history: Vec<(f64, f64)>,
}

fn sweep(
    frames: &Frames,
    h: &(dyn Fn(&[f64]) -> f64 + Sync),
    dom: &IntegrationDomain,
    rad_panels: usize,
    fixed_outer: Option<usize>,
    fixed_inner: Option<usize>,
) -> (Sweep, usize, usize) {
    let ln2 = std::f64::consts::LN_2;
    let v0 = dom.r0.ln();

    // Shells below R_0, walked towards the singular points. Offsets from a
    // non-zero centre stop resolving once ρ^E falls below its round-off.
    let reach = frames
        .centers
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let v_precision = if reach > 0.0 {
        (1e-11 * reach).ln() / frames.frame.lambda_max()
    } else {
        f64::NEG_INFINITY
    };
    let mut inner = 0.0;
    let mut shells = Vec::new();
    let mut i = 0usize;
    let mut quiet = 0;
    loop {
        let hi = v0 - ln2 * i as f64;
        let lo = hi - ln2;
        let c = frames.shell(h, lo, hi, rad_panels);
        inner += c;
        shells.push(c);
        i += 1;
        if let Some(n) = fixed_inner {
            if i >= n {
                break;
            }
            continue;
        }
        if c <= 1e-3 * dom.tol * inner.abs() || inner == 0.0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if (quiet >= 3 && i >= 4) || lo <= dom.v_floor {
            break;
        }
        if lo - ln2 <= v_precision {
            // geometric remainder of the shells that cannot be resolved
            let n = shells.len();
            if n >= 2 && shells[n - 2] > 0.0 {
                let r = shells[n - 1] / shells[n - 2];
                if r < 1.0 {
                    inner += shells[n - 1] * r / (1.0 - r);
                    quiet = 3;
                }
            }
            break;
        }
    }
    let mut inner_divergent = None;
    if fixed_inner.is_none() && quiet < 3 && shells.len() >= 8 {
        let tail: Vec<(f64, f64)> = shells
            .iter()
            .enumerate()
            .rev()
            .take(8)
            .filter(|(_, &c)| c > 0.0)
            .map(|(k, &c)| (-(k as f64) * ln2, c.ln()))
            .collect();
        if tail.len() >= 4 {
            // shell mass ~ ρ^κ as ρ → 0; κ <= 0.05 means no decay
            let kappa = slope(&tail);
            if kappa <= 0.05 {
                inner_divergent = Some(kappa);
            }
        }
    }
    let inner_count = i;

    let mut history = vec![(dom.r0, inner)];
    let mut total = inner;
    let mut j = 0;
    loop {
        let lo = v0 + ln2 * j as f64;
        let c = frames.shell(h, lo, lo + ln2, rad_panels);
        let prev = total;
        total += c;
        j += 1;
        history.push((dom.r0 * 2f64.powi(j as i32), total));
        match fixed_outer {
            Some(n) if j >= n => break,
            Some(_) => continue,
            None => {}
        }
        let small = (total - prev).abs() <= dom.tol * total.abs() || total == 0.0;
        let prev_small = history.len() >= 3 && {
            let a = history[history.len() - 2].1;
            let b = history[history.len() - 3].1;
            (a - b).abs() <= dom.tol * a.abs() || a == 0.0
        };
        if (small && prev_small) || j >= dom.max_doublings {
            break;
        }
    }
    (
        Sweep {
            inner_divergent,
            history,
        },
        inner_count,
        j,
    )
}

/// Integrates a nonnegative function of `s` under the nested-domain protocol.
pub fn integrate_nonneg(
    kernel_dim: usize,
    centers: Vec<Vec<f64>>,
    frame: OperatorSpec<f64>,
    h: &(dyn Fn(&[f64]) -> f64 + Sync),
    dom: &IntegrationDomain,
) -> Result<IntegralEstimate> {
    if frame.dim() != kernel_dim {
        return Err(Error::DimensionMismatch {
            expected: kernel_dim,
            got: frame.dim(),
        });
    }
    let centers = if centers.is_empty() {
        vec![vec![0.0; kernel_dim]]
    } else {
        centers
    };
    let coarse = Frames::new(
        centers.clone(),
        frame.clone(),
        dom.angular_panels,
        dom.partition_power,
    )?;
    let (sw, n_in, n_out) = sweep(&coarse, h, dom, dom.radial_panels_per_octave, None, None);
    let value = sw.history.last().map(|p| p.1).unwrap_or(0.0);
    let radius = sw.history.last().map(|p| p.0).unwrap_or(dom.r0);

    let fine = Frames::new(centers, frame, dom.angular_panels * 2, dom.partition_power)?;
    let (sf, _, _) = sweep(
        &fine,
        h,
        dom,
        dom.radial_panels_per_octave * 2,
        Some(n_out),
        Some(n_in),
    );
    let fine_value = sf.history.last().map(|p| p.1).unwrap_or(0.0);
    let mesh_change = if value == 0.0 && fine_value == 0.0 {
        0.0
    } else {
        (fine_value - value).abs() / fine_value.abs().max(value.abs())
    };

    let n = sw.history.len();
    let last_change = if n >= 2 {
        let (a, b) = (sw.history[n - 1].1, sw.history[n - 2].1);
        if a == 0.0 {
            0.0
        } else {
            (a - b).abs() / a.abs()
        }
    } else {
        0.0
    };
    let convergence = if let Some(k) = sw.inner_divergent {
        Convergence::Divergent {
            exponent: k,
            at_singularity: true,
        }
    } else if last_change < dom.tol && mesh_change < dom.tol {
        Convergence::Converged
    } else {
        let pts: Vec<(f64, f64)> = sw
            .history
            .iter()
            .rev()
            .take(4)
            .filter(|p| p.1 > 0.0)
            .map(|p| (p.0.ln(), p.1.ln()))
            .collect();
        let k = if pts.len() >= 4 { slope(&pts) } else { 0.0 };
        if last_change >= dom.tol && k > 0.05 {
            Convergence::Divergent {
                exponent: k,
                at_singularity: false,
            }
        } else {
            Convergence::Inconclusive
        }
    };
    Ok(IntegralEstimate {
        value: fine_value.max(0.0),
        convergence,
        radius,
        history: sw.history,
        mesh_change,
    })
}

fn kernel_centers(f: &dyn KernelFamily, dom: &IntegrationDomain) -> Vec<Vec<f64>> {
    dom.centers.clone().unwrap_or_else(|| f.singular_points())
}

/// Integral of `h(f(s))` over `R^d`.
pub fn integrate_kernel(
    f: &dyn KernelFamily,
    h: &(dyn Fn(&Matrix<f64>) -> f64 + Sync),
    dom: &IntegrationDomain,
) -> Result<IntegralEstimate> {
    let g = |s: &[f64]| h(&f.eval(s));
    integrate_nonneg(
        f.domain_dim(),
        kernel_centers(f, dom),
        f.frame_operator(),
        &g,
        dom,
    )
}

/// `Σ_i w_i ∫_0^∞ min(1, ‖F r^B ζ_i‖²) r^{-2} dr`, the inner Lévy integral of `L_f`.
pub fn levy_inner(fm: &Matrix<f64>, b: &OperatorSpec<f64>, atoms: &[SpectralAtom]) -> f64 {
    atoms
        .iter()
        .map(|a| a.weight * radial_min_integral(fm, b, &a.zeta))
        .sum()
}

/// `∫_0^∞ min(1, g(r)²) r^{-2} dr` for `g(r) = ‖F r^B ζ‖`.
///
/// The crossing `r*` with `g(r*) = 1` is bracketed and bisected. Below it the
/// substitution `r = r* y^p`, `p = 1/(2λ_B − 1)`, flattens the leading
/// power-law behaviour so a fixed Gauss–Legendre rule on `y ∈ (0, 1]` suffices.
fn radial_min_integral(fm: &Matrix<f64>, b: &OperatorSpec<f64>, zeta: &[f64]) -> f64 {
    let fz = fm.mul_vec(zeta);
    if fz.iter().all(|&x| x == 0.0) && b.is_diagonal() {
        // Only the zeta direction is moved by a diagonal exponent.
        let any =
            (0..zeta.len()).any(|j| zeta[j] != 0.0 && (0..fm.rows()).any(|i| fm[(i, j)] != 0.0));
        if !any {
            return 0.0;
        }
    }
    let g = |v: f64| -> f64 {
        let x = b.exp_log(v).mul_vec(zeta);
        euclid(&fm.mul_vec(&x))
    };
    let lam = b.lambda_min();
    let mut lo = 0.0;
    let mut hi = 0.0;
    let g0 = g(0.0);
    if g0 == 0.0 {
        return 0.0;
    }
    if g0 < 1.0 {
        let mut k = 0;
        while g(hi) < 1.0 {
            lo = hi;
            hi += 4.0;
            k += 1;
            if k > 500 {
                return f64::INFINITY;
            }
        }
    } else {
        let mut k = 0;
        while g(lo) >= 1.0 {
            hi = lo;
            lo -= 4.0;
            k += 1;
            if k > 500 {
                return 0.0;
            }
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_star = 0.5 * (lo + hi);
    let r_star = v_star.exp();
    let p = 1.0 / (2.0 * lam - 1.0);
    let gl = GaussLegendre::<f64>::new(24);
    // r = r* y^p, dr = p r* y^{p-1} dy
    let left = gl.integrate(0.0, 1.0, |y| {
        if y <= 0.0 {
            return 0.0;
        }
        let r = r_star * y.powf(p);
        let gv = g(r.ln()).min(1.0);
        gv * gv / (r * r) * p * r_star * y.powf(p - 1.0)
    });
    left + 1.0 / r_star
}

#[derive(Debug, Clone)]
pub struct ThreeIntegralReport {
    /// Always zero for the symmetric generators implemented here.
    pub gamma_f: f64,
    pub q_f_trace: Option<f64>,
    pub l_f: Option<f64>,
    pub estimate: IntegralEstimate,
    pub verdict: Verdict,
}

/// Three-integral criterion: `γ_f` vanishes by symmetry; `Q_f` (Gaussian
/// generator) or `L_f` (jump generator) is evaluated numerically.
pub fn check_three_integrals(
    f: &dyn KernelFamily,
    gen: &GeneratorSpec,
    dom: &IntegrationDomain,
) -> Result<ThreeIntegralReport> {
    if f.cols() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: f.cols(),
        });
    }
    if let crate::generators::GeneratorMode::Gaussian { q } = gen.mode() {
        let q = q.clone();
        let h = move |fm: &Matrix<f64>| fm.matmul(&q).matmul(&fm.transpose()).trace().max(0.0);
        let est = integrate_kernel(f, &h, dom)?;
        return Ok(ThreeIntegralReport {
            gamma_f: 0.0,
            q_f_trace: Some(est.value),
            l_f: None,
            verdict: est.convergence.verdict(),
            estimate: est,
        });
    }
    let atoms = gen.spectral_atoms(64)?;
    let b = gen.exponent().clone();
    let h = move |fm: &Matrix<f64>| levy_inner(fm, &b, &atoms);
    let est = integrate_kernel(f, &h, dom)?;
    Ok(ThreeIntegralReport {
        gamma_f: 0.0,
        q_f_trace: None,
        l_f: Some(est.value),
        verdict: est.convergence.verdict(),
        estimate: est,
    })
}

/// `∫ Σ_i w_i ‖f(s) ζ_i‖^α ds`; equals `(2 − α)/2 · L_f` for SαS generators.
pub fn check_sas_closed_form(
    f: &dyn KernelFamily,
    alpha: f64,
    atoms: &[SpectralAtom],
    dom: &IntegrationDomain,
) -> Result<IntegralEstimate> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!(
            "closed form needs 0 < alpha < 2, got {alpha}"
        )));
    }
    let atoms = atoms.to_vec();
    let h = move |fm: &Matrix<f64>| {
        atoms
            .iter()
            .map(|a| a.weight * euclid(&fm.mul_vec(&a.zeta)).powf(alpha))
            .sum::<f64>()
    };
    integrate_kernel(f, &h, dom)
}

/// Sufficient condition
/// `∫_{‖f‖≤R} ‖f‖^{1/Λ_B − δ1} + ∫_{‖f‖>R} ‖f‖^{1/λ_B + δ2} < ∞`.
pub fn check_sufficient_condition(
    f: &dyn KernelFamily,
    b: &OperatorSpec<f64>,
    delta1: f64,
    delta2: f64,
    r: f64,
    dom: &IntegrationDomain,
) -> Result<IntegralEstimate> {
    let symmetric = b.matrix().is_symmetric(1e-12);
    let lmax = b.lambda_max();
    let lmin = b.lambda_min();
    let d1_ok = if symmetric {
        delta1 >= 0.0
    } else {
        delta1 > 0.0
    } && delta1 <= 1.0 / lmax;
    let d2_ok = if symmetric {
        delta2 >= 0.0
    } else {
        delta2 > 0.0
    };
    if !d1_ok || !d2_ok || !(r > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 < delta1 <= 1/Lambda_B = {}, delta2 > 0 (zero allowed for symmetric B), R > 0",
            1.0 / lmax
        )));
    }
    let p_small = 1.0 / lmax - delta1;
    let p_large = 1.0 / lmin + delta2;
    let h = move |fm: &Matrix<f64>| {
        let n = fm.norm_2();
        if n == 0.0 {
            0.0
        } else if n <= r {
            n.powf(p_small)
        } else {
            n.powf(p_large)
        }
    };
    integrate_kernel(f, &h, dom)
}

#[derive(Debug, Clone)]
pub struct MaGate {
    pub q: f64,
    pub lambda_dqb: f64,
    pub big_lambda_dqb: f64,
    pub lambda_qb: f64,
    pub big_lambda_qb: f64,
    /// `λ_{D−qB} + λ_{qB}`, must be positive.
    pub lower_margin: f64,
    /// `β − (Λ_{D−qB} + Λ_{qB})`, must be positive.
    pub upper_margin: f64,
    /// `D − qB` is the zero matrix.
    pub degenerate: bool,
    /// `D − qB` is invertible (fullness of the field).
    pub full: bool,
    pub pass: bool,
}

impl MaGate {
    pub fn violation(&self) -> Option<String> {
        if self.lower_margin <= 0.0 {
            Some(format!(
                "moving-average existence requires lambda_(D-qB) + lambda_(qB) > 0 (got {:.6})",
                self.lower_margin
            ))
        } else if self.upper_margin <= 0.0 {
            Some(format!(
                "moving-average existence requires Lambda_(D-qB) + Lambda_(qB) < beta (margin {:.6})",
                self.upper_margin
            ))
        } else {
            None
        }
    }
}

pub fn validate_ma_parameters(
    e: &OperatorSpec<f64>,
    d: &OperatorSpec<f64>,
    b: &OperatorSpec<f64>,
    beta: f64,
) -> Result<MaGate> {
    e.require_positive_spectrum("E")?;
    d.require_positive_spectrum("D")?;
    let q = e.trace();
    let qb = b.scale(q)?;
    let dqb = d.sub(&qb)?;
    let degenerate = dqb.matrix().norm_max() <= 1e-14 * (1.0 + d.matrix().norm_max());
    let (ld, bd) = if degenerate {
        (0.0, 0.0)
    } else {
        (dqb.lambda_min(), dqb.lambda_max())
    };
    let lower_margin = ld + qb.lambda_min();
    let upper_margin = beta - (bd + qb.lambda_max());
    let full = !degenerate && dqb.matrix().rank(1e-12) == dqb.dim();
    Ok(MaGate {
        q,
        lambda_dqb: ld,
        big_lambda_dqb: bd,
        lambda_qb: qb.lambda_min(),
        big_lambda_qb: qb.lambda_max(),
        lower_margin,
        upper_margin,
        degenerate,
        full,
        pass: lower_margin > 0.0 && upper_margin > 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct HarmGate {
    pub q: f64,
    /// `λ_E − Λ_D`, must be positive.
    pub margin: f64,
    pub pass: bool,
}

impl HarmGate {
    pub fn violation(&self) -> Option<String> {
        (!self.pass).then(|| {
            format!(
                "lambda_E > Lambda_D required by harmonizable existence (margin {:.6})",
                self.margin
            )
        })
    }
}

pub fn validate_harm_parameters(e: &OperatorSpec<f64>, d: &OperatorSpec<f64>) -> Result<HarmGate> {
    e.require_positive_spectrum("E")?;
    d.require_positive_spectrum("D")?;
    let margin = e.lambda_min() - d.lambda_max();
    Ok(HarmGate {
        q: e.trace(),
        margin,
        pass: margin > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_kernel(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        singular: Vec<f64>,
    ) -> FnKernel {
        FnKernel {
            d: 1,
            rows: 1,
            cols: 1,
            singular: singular.into_iter().map(|x| vec![x]).collect(),
            frame: None,
            f: Arc::new(move |s: &[f64]| Matrix::from_diag(&[f(s[0])])),
        }
    }

    #[test]
    fn zero_kernel_converges_to_zero() {
        let k = scalar_kernel(|_| 0.0, vec![]);
        let g = GeneratorSpec::per_component(&[1.5]).unwrap();
        let r = check_three_integrals(&k, &g, &IntegrationDomain::default()).unwrap();
        assert_eq!(r.l_f, Some(0.0));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn gaussian_square_integrable() {
        // ∫ e^{-2s²} ds = sqrt(π/2)
        let k = scalar_kernel(|s| (-s * s).exp(), vec![]);
        let g = GeneratorSpec::gaussian(Matrix::identity(1)).unwrap();
        let r = check_three_integrals(&k, &g, &IntegrationDomain::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let v = r.q_f_trace.unwrap();
        assert!(
            (v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-6,
            "{v}"
        );
    }

    #[test]
    fn logarithmic_divergence_detected() {
        let k = scalar_kernel(|s| if s.abs() >= 1.0 { 1.0 / s.abs() } else { 0.0 }, vec![]);
        let g = GeneratorSpec::per_component(&[1.0]).unwrap();
        let atoms = g.spectral_atoms(0).unwrap();
        let r = check_sas_closed_form(&k, 1.0, &atoms, &IntegrationDomain::default()).unwrap();
        assert!(
            matches!(r.convergence, Convergence::Divergent { .. }),
            "{:?}",
            r.convergence
        );
    }

    #[test]
    fn singularity_divergence_detected() {
        // |s|^{-1} near 0 with α = 1 is not integrable at the origin
        let k = scalar_kernel(
            |s| if s.abs() <= 1.0 { 1.0 / s.abs() } else { 0.0 },
            vec![0.0],
        );
        let g = GeneratorSpec::per_component(&[1.0]).unwrap();
        let r = check_sas_closed_form(
            &k,
            1.0,
            &g.spectral_atoms(0).unwrap(),
            &IntegrationDomain::default(),
        )
        .unwrap();
        assert!(
            matches!(
                r.convergence,
                Convergence::Divergent {
                    at_singularity: true,
                    ..
                }
            ),
            "{:?}",
            r.convergence
        );
    }

    #[test]
    fn levy_inner_matches_closed_form() {
        let alpha = 1.5;
        let g = GeneratorSpec::per_component(&[alpha, alpha]).unwrap();
        let atoms = g.spectral_atoms(0).unwrap();
        let fm = Matrix::from_rows(&[vec![0.7, -0.2], vec![0.1, 1.3]]).unwrap();
        let numeric = levy_inner(&fm, g.exponent(), &atoms);
        let closed: f64 = atoms
            .iter()
            .map(|a| a.weight * euclid(&fm.mul_vec(&a.zeta)).powf(alpha))
            .sum();
        assert!((numeric / (2.0 / (2.0 - alpha) * closed) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sufficient_condition_bounded_support() {
        let k = scalar_kernel(|s| if s.abs() < 2.0 { 3.0 } else { 0.0 }, vec![]);
        let b = OperatorSpec::scalar(1.0 / 1.5, 1).unwrap();
        let r = check_sufficient_condition(&k, &b, 0.1, 0.1, 1.0, &IntegrationDomain::default())
            .unwrap();
        assert_eq!(r.convergence, Convergence::Converged);
        assert!(
            check_sufficient_condition(&k, &b, 0.0, 0.0, 1.0, &IntegrationDomain::default())
                .is_ok()
        );
        assert!(
            check_sufficient_condition(&k, &b, 2.0, 0.1, 1.0, &IntegrationDomain::default())
                .is_err()
        );
    }

    #[test]
    fn ma_gate_examples() {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let b = OperatorSpec::from_diag(&[1.0 / 1.5, 1.0 / 1.5]).unwrap();
        let c_max = 1.0 / b.lambda_max();
        let ok = validate_ma_parameters(&e, &b.scale(0.5 * c_max).unwrap(), &b, 1.0).unwrap();
        assert!(ok.pass && ok.full);
        let edge = validate_ma_parameters(&e, &b.scale(c_max).unwrap(), &b, 1.0).unwrap();
        assert!(!edge.pass);
        assert!(edge.violation().unwrap().contains("< beta"));
        let q = e.trace();
        let deg = validate_ma_parameters(&e, &b.scale(q).unwrap(), &b, 10.0).unwrap();
        assert!(deg.degenerate && deg.lower_margin == deg.lambda_qb);
    }

    #[test]
    fn harm_gate_examples() {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let ok = validate_harm_parameters(&e, &OperatorSpec::scalar(0.5, 2).unwrap()).unwrap();
        assert!(ok.pass && (ok.margin - 0.5).abs() < 1e-15);
        let edge = validate_harm_parameters(&e, &OperatorSpec::scalar(1.0, 2).unwrap()).unwrap();
        assert!(!edge.pass && edge.margin == 0.0);
    }
}
