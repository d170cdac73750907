//! E-homogeneous kernel-shaping functions `φ(c^E x) = c φ(x)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::OperatorSpec;
use crate::polar::{euclid, sphere_points, PolarFrame};
use crate::scalar::Real;

pub type UserPhi<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
pub enum PhiKind<T> {
    /// `Σ |x_j|^{1/a_j}`, homogeneous for `diag(a_1, …, a_d)`.
    PowerSum {
        powers: Vec<T>,
    },
    /// The radial part `τ_E` itself.
    TauRadial,
    User(UserPhi<T>),
}

impl<T: fmt::Debug> fmt::Debug for PhiKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiKind::PowerSum { powers } => {
                f.debug_struct("PowerSum").field("powers", powers).finish()
            }
            PhiKind::TauRadial => write!(f, "TauRadial"),
            PhiKind::User(_) => write!(f, "User(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HomogeneousFn<T> {
    kind: PhiKind<T>,
    exponent: OperatorSpec<T>,
    frame: Arc<PolarFrame<T>>,
    beta: T,
    factor: T,
}

impl<T: Real> HomogeneousFn<T> {
    /// The canonical power sum. Powers below one evaluate fine but lose
    /// `(1, E)`-admissibility, which is logged.
    pub fn power_sum(powers: &[T], beta: T) -> Result<Self> {
        if powers.is_empty() || powers.iter().any(|&a| !(a > T::zero())) {
            return Err(Error::InvalidKernel(
                "power-sum powers must be positive".into(),
            ));
        }
        if powers.iter().any(|&a| a < T::one()) {
            log::warn!("power-sum phi with a power below 1 is not known to be (1,E)-admissible");
        }
        let exponent = OperatorSpec::from_diag(powers)?;
        Self::build(
            PhiKind::PowerSum {
                powers: powers.to_vec(),
            },
            exponent,
            beta,
        )
    }

    pub fn tau_radial(exponent: &OperatorSpec<T>, beta: T) -> Result<Self> {
        Self::build(PhiKind::TauRadial, exponent.clone(), beta)
    }

    /// A user-supplied function with its declared admissibility order.
    pub fn user(exponent: &OperatorSpec<T>, beta: T, f: UserPhi<T>) -> Result<Self> {
        Self::build(PhiKind::User(f), exponent.clone(), beta)
    }

    fn build(kind: PhiKind<T>, exponent: OperatorSpec<T>, beta: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "admissibility order beta must be positive, got {beta}"
            )));
        }
        let frame = Arc::new(PolarFrame::new(&exponent)?);
        Ok(Self {
            kind,
            exponent,
            frame,
            beta,
            factor: T::one(),
        })
    }

    /// `c φ`, still homogeneous for the same operator.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::InvalidKernel("scale factor must be positive".into()));
        }
        let mut out = self.clone();
        out.factor = out.factor * c;
        Ok(out)
    }

    pub fn kind(&self) -> &PhiKind<T> {
        &self.kind
    }

    pub fn exponent(&self) -> &OperatorSpec<T> {
        &self.exponent
    }

    pub fn frame(&self) -> &PolarFrame<T> {
        &self.frame
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Multiplier applied by [`HomogeneousFn::scaled`].
    pub fn factor(&self) -> T {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn eval(&self, x: &[T]) -> T {
        let v = match &self.kind {
            PhiKind::PowerSum { powers } => power_sum_raw(powers, x),
            PhiKind::TauRadial => self.frame.tau(x).unwrap_or(T::nan()),
            PhiKind::User(f) => f(x),
        };
        v * self.factor
    }

    /// `(m_φ, M_φ)`: extrema of `φ` over the unit sphere `S_E`.
    pub fn extrema(&self) -> Result<(T, T)> {
        phi_extrema(self, &self.exponent)
    }
}

#[inline]
fn power_sum_raw<T: Real>(powers: &[T], x: &[T]) -> T {
    x.iter()
        .zip(powers)
        .map(|(&v, &a)| v.abs().powf(T::one() / a))
        .sum()
}

/// `Σ_j |x_j|^{1/a_j}`.
pub fn phi_power_sum<T: Real>(powers: &[T], x: &[T]) -> Result<T> {
    if powers.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: powers.len(),
            got: x.len(),
        });
    }
    if powers.iter().any(|&a| a < T::one()) {
        log::warn!("power-sum phi with a power below 1 is not known to be (1,E)-admissible");
    }
    Ok(power_sum_raw(powers, x))
}

const EXTREMA_SAMPLES: usize = 10_000;
const EXTREMA_STARTS: usize = 10;

/// Minimum and maximum of `φ` on `S_E`: dense sampling of directions followed by
/// Nelder–Mead refinement of the ten best candidates on the degree-zero ratio `φ/τ_E`.
pub fn phi_extrema<T: Real>(phi: &HomogeneousFn<T>, e: &OperatorSpec<T>) -> Result<(T, T)> {
    let frame = if e.matrix() == phi.exponent.matrix() {
        (*phi.frame).clone()
    } else {
        PolarFrame::new(e)?
    };
    let d = e.dim();
    let ratio = |x: &[T]| -> Result<T> {
        let t = frame.tau(x)?;
        if t == T::zero() {
            return Ok(T::nan());
        }
        Ok(phi.eval(x) / t)
    };
    let dirs = sphere_points::<T>(d, EXTREMA_SAMPLES, 0x5eed_0002);
    let mut scored = Vec::with_capacity(dirs.len());
    for v in dirs {
        let r = ratio(&v)?;
        if !(r > T::zero()) || !r.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "phi is not positive on the sphere (value {r})"
            )));
        }
        scored.push((r, v));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite ratios"));
    let mut lo = scored[0].0;
    let mut hi = scored[scored.len() - 1].0;
    if d > 1 {
        let obj = |x: &[T]| ratio(x).unwrap_or(T::nan());
        for (r0, v) in scored.iter().take(EXTREMA_STARTS) {
            let (x, r) = nelder_mead(&obj, v, T::lit(0.05), 200);
            if r > T::zero() && r < *r0 && euclid(&x) > T::zero() {
                lo = lo.min(r);
            }
        }
        let neg = |x: &[T]| -ratio(x).unwrap_or(T::nan());
        for (_, v) in scored.iter().rev().take(EXTREMA_STARTS) {
            let (x, r) = nelder_mead(&neg, v, T::lit(0.05), 200);
            if r.is_finite() && euclid(&x) > T::zero() {
                hi = hi.max(-r);
            }
        }
    }
    Ok((lo, hi))
}

fn nelder_mead<T: Real>(f: &impl Fn(&[T]) -> T, x0: &[T], step: T, iters: usize) -> (Vec<T>, T) {
    let n = x0.len();
    let eval = |x: &[T]| {
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = x[i] + step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let centroid: Vec<T> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<T>() / T::from_usize_lossy(n))
            .collect();
        let worst = simplex[n].clone();
        let along = |t: T| -> Vec<T> {
            (0..n)
                .map(|j| centroid[j] + t * (worst.0[j] - centroid[j]))
                .collect()
        };
        let xr = along(-T::one());
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-two);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = along(half);
            let fc = eval(&xc);
            if fc < worst.1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = (0..n)
                        .map(|j| best[j] + half * (p.0[j] - best[j]))
                        .collect();
                    let v = eval(&x);
                    *p = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}

/// Largest observed `|φ(x+z) − φ(z)| / τ_E(x)^β` over random pairs with
/// `τ_E(x) ≤ 1` and `A ≤ ‖z‖ ≤ B`. A finite value is evidence, not proof.
pub fn admissibility_probe<T: Real>(
    phi: &HomogeneousFn<T>,
    e: &OperatorSpec<T>,
    beta: T,
    a_lo: T,
    b_hi: T,
    n: usize,
    seed: u64,
) -> Result<T> {
    if !(a_lo > T::zero()) || !(b_hi > a_lo) {
        return Err(Error::Domain("admissibility probe needs 0 < A < B".into()));
    }
    let frame = PolarFrame::new(e)?;
    let d = e.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas: Vec<Vec<T>> = sphere_points::<T>(d, 256, seed ^ 0x9e37_79b9)
        .into_iter()
        .map(|v| frame.polar(&v).map(|p| p.direction))
        .collect::<Result<_>>()?;
    let zdirs = sphere_points::<T>(d, 256, seed ^ 0x7f4a_7c15);
    let mut worst = T::zero();
    for _ in 0..n {
        let theta = &thetas[rng.random_range(0..thetas.len())];
        let tau = T::lit(10f64.powf(-4.0 * rng.random::<f64>()));
        let x = e.exp_log(tau.ln()).mul_vec(theta);
        let zn = a_lo + (b_hi - a_lo) * T::lit(rng.random::<f64>());
        let z: Vec<T> = zdirs[rng.random_range(0..zdirs.len())]
            .iter()
            .map(|&v| v * zn)
            .collect();
        let xz: Vec<T> = x.iter().zip(&z).map(|(&a, &b)| a + b).collect();
        let r = (phi.eval(&xz) - phi.eval(&z)).abs() / tau.powf(beta);
        if r.is_finite() {
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_sum_examples() {
        assert_eq!(phi_power_sum(&[1.0, 1.0], &[3.0, 4.0]).unwrap(), 7.0);
        assert_eq!(phi_power_sum(&[2.0], &[9.0]).unwrap(), 3.0);
        let p = [1.0f64, 2.0];
        let lhs = phi_power_sum(&p, &[4.0, 16.0]).unwrap();
        assert!((lhs - 4.0 * phi_power_sum(&p, &[1.0, 1.0]).unwrap()).abs() < 1e-15);
        assert!(phi_power_sum(&p, &[1.0]).is_err());
    }

    #[test]
    fn tau_radial_extrema_are_one() {
        let e = OperatorSpec::<f64>::from_diag(&[1.0, 2.0]).unwrap();
        let phi = HomogeneousFn::tau_radial(&e, 1.0).unwrap();
        let (lo, hi) = phi.extrema().unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        let (lo2, hi2) = phi.scaled(2.0).unwrap().extrema().unwrap();
        assert!((lo2 - 2.0).abs() < 1e-9 && (hi2 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn isotropic_one_norm_extrema() {
        // E = I: S_E is the Euclidean sphere, so m = 1 and M = sqrt(2) for the 1-norm.
        let phi = HomogeneousFn::<f64>::power_sum(&[1.0, 1.0], 1.0).unwrap();
        let (lo, hi) = phi.extrema().unwrap();
        assert!((lo - 1.0).abs() < 1e-6, "{lo}");
        assert!((hi - 2f64.sqrt()).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn probe_finite_for_canonical_phi() {
        let phi = HomogeneousFn::<f64>::power_sum(&[1.0, 2.0], 1.0).unwrap();
        let r = admissibility_probe(&phi, phi.exponent(), 1.0, 0.5, 2.0, 2000, 1).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn euclidean_norm_is_lipschitz() {
        let e = OperatorSpec::<f64>::identity(2);
        let phi = HomogeneousFn::tau_radial(&e, 1.0).unwrap();
        let r = admissibility_probe(&phi, &e, 1.0, 0.5, 2.0, 500, 7).unwrap();
        assert!(r <= 1.0 + 1e-8, "{r}");
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(HomogeneousFn::<f64>::power_sum(&[1.0], 0.0).is_err());
    }
}
