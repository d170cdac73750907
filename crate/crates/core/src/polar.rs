//! Generalized polar coordinates `x = τ(x)^A l(x)` with respect to an operator
//! `A` with positive spectrum.
//!
//! With `t = e^w` the adapted norm becomes `‖x‖_A = ∫_{-∞}^0 ‖e^{wA} x‖ dw`.
//! Writing `G_x(c) = ∫_{-∞}^c ‖e^{wA} x‖ dw` we get `‖r^{-A} x‖_A = G_x(-ln r)`,
//! so `τ(x)` is `e^{-c}` for the unique root of `G_x(c) = 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;

const GL_NODES: usize = 16;
const MAX_PANELS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition<T> {
    pub tau: T,
    pub direction: Vec<T>,
}

/// Precomputed quadrature for one operator; cheap to share between threads.
#[derive(Debug, Clone)]
pub struct PolarFrame<T> {
    op: OperatorSpec<T>,
    node_maps: Vec<Matrix<T>>,
    node_weights: Vec<T>,
    step: Matrix<T>,
    panels: usize,
}

impl<T: Real> PolarFrame<T> {
    pub fn new(op: &OperatorSpec<T>) -> Result<Self> {
        op.require_positive_spectrum("polar coordinate operator")?;
        let rho = op.spectral_radius().max(op.matrix().norm_2());
        let h = if rho > T::one() {
            T::one() / rho
        } else {
            T::one()
        };
        let half = h * T::lit(0.5);
        let gl = GaussLegendre::<T>::new(GL_NODES);
        let node_maps = gl
            .nodes
            .iter()
            .map(|&xi| op.exp_log(half * (xi - T::one())))
            .collect();
        let node_weights = gl.weights.iter().map(|&w| w * half).collect();
        let step = op.exp_log(-h);

        // Panels are added until the remaining tail is negligible relative to the
        // integral over the first panel.
        let mut power = Matrix::identity(op.dim());
        let mut mass = T::zero();
        let mut panels = 0;
        let tiny = T::lit(1e-17);
        loop {
            let nrm = power.norm_2();
            mass = mass + nrm * h;
            panels += 1;
            if nrm * h < tiny * mass || panels >= MAX_PANELS {
                break;
            }
            power = power.matmul(&step);
        }
        if panels >= MAX_PANELS {
            return Err(Error::Numerical(
                "adapted norm quadrature needs too many panels".into(),
            ));
        }
        Ok(Self {
            op: op.clone(),
            node_maps,
            node_weights,
            step,
            panels,
        })
    }

    pub fn operator(&self) -> &OperatorSpec<T> {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `∫_{-∞}^0 ‖e^{wA} y‖ dw`.
    fn integral(&self, y: &[T]) -> T {
        let d = y.len();
        let mut z = y.to_vec();
        let mut tmp = vec![T::zero(); d];
        let mut total = T::zero();
        for _ in 0..self.panels {
            for (m, &w) in self.node_maps.iter().zip(&self.node_weights) {
                m.mul_vec_into(&z, &mut tmp);
                total = total + w * euclid(&tmp);
            }
            self.step.mul_vec_into(&z, &mut tmp);
            std::mem::swap(&mut z, &mut tmp);
        }
        total
    }

    /// The adapted norm `‖x‖_A = ∫_0^1 ‖t^A x‖ dt/t`.
    pub fn a_norm(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        Ok(self.integral(x))
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Radial part, with the convention `τ(0) = 0`.
    pub fn tau(&self, x: &[T]) -> Result<T> {
        self.check(x)?;
        if x.iter().all(|&v| v == T::zero()) {
            return Ok(T::zero());
        }
        Ok(self.solve(x).0)
    }

    pub fn polar(&self, x: &[T]) -> Result<PolarDecomposition<T>> {
        self.check(x)?;
        if x.iter().all(|&v| v == T::zero()) {
            return Err(Error::Domain(
                "polar coordinates of the origin are undefined".into(),
            ));
        }
        let (tau, direction) = self.solve(x);
        Ok(PolarDecomposition { tau, direction })
    }

    /// Returns `(τ, e^{cA} x)` with `c = -ln τ`, so the second entry lies on `S_A`.
    fn solve(&self, x: &[T]) -> (T, Vec<T>) {
        let eval = |c: T| -> (T, T, Vec<T>) {
            let y = self.op.exp_log(c).mul_vec(x);
            let g = euclid(&y);
            let big_g = self.integral(&y);
            (big_g.ln(), g / big_g, y)
        };
        let lam = self.op.lambda_min();
        let nx = euclid(x);
        let mut c = -(nx.ln() / lam);
        if !c.is_finite() {
            c = T::zero();
        }
        let mut lo: Option<T> = None;
        let mut hi: Option<T> = None;
        let max_step = T::lit(4.0);
        let tol = T::epsilon() * T::lit(16.0);
        let mut last = eval(c);
        for _ in 0..200 {
            let (f, dlog, _) = &last;
            let (f, dlog) = (*f, *dlog);
            if f.is_nan() {
                break;
            }
            if f == T::zero() {
                break;
            }
            if f < T::zero() {
                lo = Some(c);
            } else {
                hi = Some(c);
            }
            let mut next = if dlog > T::zero() && dlog.is_finite() && f.is_finite() {
                c - f / dlog
            } else if f < T::zero() {
                c + max_step
            } else {
                c - max_step
            };
            next = next.max(c - max_step).min(c + max_step);
            if let (Some(l), Some(h)) = (lo, hi) {
                if !(next > l && next < h) {
                    next = (l + h) * T::lit(0.5);
                }
            }
            let done = (next - c).abs() <= tol * (T::one() + c.abs());
            c = next;
            last = eval(c);
            if done {
                break;
            }
            if let (Some(l), Some(h)) = (lo, hi) {
                if (h - l).abs() <= tol * (T::one() + c.abs()) {
                    break;
                }
            }
        }
        ((-c).exp(), last.2)
    }

    /// Fits the envelope constants `C1..C4` over a deterministic sample.
    pub fn fit_envelope(&self, delta: T, s0: T) -> Result<EnvelopeConstants<T>> {
        if !(delta > T::zero()) || !(s0 > T::zero()) {
            return Err(Error::Domain("envelope needs delta > 0 and s0 > 0".into()));
        }
        let lo_exp = T::one() / self.op.lambda_min() + delta;
        let hi_exp = T::one() / self.op.lambda_max() - delta;
        let mut k = EnvelopeConstants {
            c1: T::infinity(),
            c2: T::zero(),
            c3: T::infinity(),
            c4: T::zero(),
            lo_exp,
            hi_exp,
            s0,
        };
        let dirs = sphere_points::<T>(self.dim(), 48, 0x5eed_0001);
        for v in dirs {
            let theta = self.polar(&v)?.direction;
            for i in 0..=24 {
                let f = T::from_usize_lossy(i) / T::lit(24.0);
                for side in [-T::one(), T::one()] {
                    let r = s0 * (side * T::lit(8.0) * f).exp();
                    let xr = self.op.exp_log(r.ln()).mul_vec(&theta);
                    k.absorb(r, euclid(&xr));
                }
            }
        }
        Ok(k.with_margin(T::lit(0.05)))
    }

    /// Two-sided power-law envelope for `τ(x)` in terms of `‖x‖`.
    pub fn tau_envelope(&self, x: &[T], delta: T, s0: T) -> Result<(T, T)> {
        let mut k = self.fit_envelope(delta, s0)?;
        let tau = self.tau(x)?;
        let nx = euclid(x);
        if nx == T::zero() {
            return Ok((T::zero(), T::zero()));
        }
        k.absorb(tau, nx);
        Ok(k.bounds(tau, nx))
    }

    /// Fitted constant `C ≥ 1` with `τ(x+y) ≤ C (τ(x) + τ(y))` on random pairs.
    pub fn quasi_triangle_constant(&self, n: usize, seed: u64) -> Result<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = T::one();
        let d = self.dim();
        for _ in 0..n {
            let x: Vec<T> = (0..d)
                .map(|_| T::lit(StandardNormal.sample(&mut rng)))
                .collect();
            let sx: f64 = StandardNormal.sample(&mut rng);
            let y: Vec<T> = (0..d)
                .map(|_| T::lit(StandardNormal.sample(&mut rng)))
                .collect();
            let x: Vec<T> = x.iter().map(|&v| v * T::lit(sx.exp())).collect();
            let s: Vec<T> = x.iter().zip(&y).map(|(&a, &b)| a + b).collect();
            let denom = self.tau(&x)? + self.tau(&y)?;
            if denom > T::zero() {
                c = c.max(self.tau(&s)? / denom);
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnvelopeConstants<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub lo_exp: T,
    pub hi_exp: T,
    pub s0: T,
}

impl<T: Real> EnvelopeConstants<T> {
    fn absorb(&mut self, tau: T, nx: T) {
        let a = tau / nx.powf(self.lo_exp);
        let b = tau / nx.powf(self.hi_exp);
        if tau <= self.s0 {
            self.c1 = self.c1.min(a);
            self.c2 = self.c2.max(b);
        } else {
            self.c3 = self.c3.min(b);
            self.c4 = self.c4.max(a);
        }
    }

    fn with_margin(mut self, m: T) -> Self {
        self.c1 = self.c1 * (T::one() - m);
        self.c3 = self.c3 * (T::one() - m);
        self.c2 = self.c2 * (T::one() + m);
        self.c4 = self.c4 * (T::one() + m);
        self
    }

    /// `(lower, upper)` for a point with radial part `tau` and Euclidean norm `nx`.
    pub fn bounds(&self, tau: T, nx: T) -> (T, T) {
        if tau <= self.s0 {
            (
                self.c1 * nx.powf(self.lo_exp),
                self.c2 * nx.powf(self.hi_exp),
            )
        } else {
            (
                self.c3 * nx.powf(self.hi_exp),
                self.c4 * nx.powf(self.lo_exp),
            )
        }
    }
}

pub fn a_norm<T: Real>(a: &OperatorSpec<T>, x: &[T]) -> Result<T> {
    PolarFrame::new(a)?.a_norm(x)
}

pub fn polar<T: Real>(a: &OperatorSpec<T>, x: &[T]) -> Result<PolarDecomposition<T>> {
    PolarFrame::new(a)?.polar(x)
}

pub fn tau_envelope<T: Real>(a: &OperatorSpec<T>, x: &[T], delta: T, s0: T) -> Result<(T, T)> {
    PolarFrame::new(a)?.tau_envelope(x, delta, s0)
}

#[inline]
pub(crate) fn euclid<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Deterministic pseudo-random points on the Euclidean unit sphere.
pub(crate) fn sphere_points<T: Real>(d: usize, n: usize, seed: u64) -> Vec<Vec<T>> {
    if d == 1 {
        return vec![vec![T::one()], vec![-T::one()]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-12 {
            out.push(v.iter().map(|&x| T::lit(x / nv)).collect());
        }
    }
    out
}
