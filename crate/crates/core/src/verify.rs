//! Empirical characteristic-function checks of distributional identities.
//!
//! Every test compares `E exp(i⟨u, ·⟩)` between two samples (or a sample and a
//! closed form) at a set of probe vectors and passes when the largest modulus
//! difference stays below the noise floor `4/√N`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{simulate_ensemble, Ensemble, EvalGrid, FieldConfig, Representation};
use crate::linalg::Matrix;
use crate::operator::commutes;
use crate::polar::PolarFrame;
use crate::rng::{derive_seed, domain, stream};

/// Multiplier of `1/√N` in the pass threshold.
pub const NOISE_FLOOR: f64 = 4.0;

pub fn noise_floor(n: usize) -> f64 {
    NOISE_FLOOR / (n.max(1) as f64).sqrt()
}

/// `N⁻¹ Σ exp(i⟨u, x_k⟩)`.
pub fn ecf(samples: &[Vec<f64>], u: &[f64]) -> Complex64 {
    let n = samples.len().max(1) as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for x in samples {
        let p: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        let (sn, cs) = p.sin_cos();
        c += cs;
        s += sn;
    }
    Complex64::new(c / n, s / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub label: String,
    pub u: Vec<f64>,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub distance: f64,
}

/// Outcome of one characteristic-function comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CfDistanceReport {
    pub test: String,
    pub n_lhs: usize,
    pub n_rhs: usize,
    pub threshold: f64,
    pub max_distance: f64,
    pub pass: bool,
    pub params: Vec<(String, String)>,
    pub probes: Vec<ProbeResult>,
}

impl CfDistanceReport {
    fn new(
        test: &str,
        n_lhs: usize,
        n_rhs: usize,
        threshold: f64,
        probes: Vec<ProbeResult>,
    ) -> Self {
        let max_distance = probes.iter().map(|p| p.distance).fold(0.0, f64::max);
        Self {
            test: test.into(),
            n_lhs,
            n_rhs,
            threshold,
            max_distance,
            pass: max_distance <= threshold,
            params: Vec::new(),
            probes,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.into(), value.to_string()));
        self
    }

    /// Merges several reports into one verdict (all must pass).
    pub fn combine(test: &str, parts: Vec<CfDistanceReport>) -> Self {
        let threshold = parts
            .iter()
            .map(|p| p.threshold)
            .fold(f64::INFINITY, f64::min);
        let mut out = Self {
            test: test.into(),
            n_lhs: parts.iter().map(|p| p.n_lhs).min().unwrap_or(0),
            n_rhs: parts.iter().map(|p| p.n_rhs).min().unwrap_or(0),
            threshold,
            max_distance: parts.iter().map(|p| p.max_distance).fold(0.0, f64::max),
            pass: parts.iter().all(|p| p.pass),
            params: Vec::new(),
            probes: Vec::new(),
        };
        for p in parts {
            out.params.extend(p.params);
            out.probes.extend(p.probes);
        }
        out
    }

    /// `[report]` block of `key=value` lines followed by one `[probe.i]` block per probe.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[report]");
        let _ = writeln!(s, "test={}", self.test);
        let _ = writeln!(s, "verdict={}", if self.pass { "pass" } else { "fail" });
        let _ = writeln!(s, "n_lhs={}", self.n_lhs);
        let _ = writeln!(s, "n_rhs={}", self.n_rhs);
        let _ = writeln!(s, "threshold={:.6e}", self.threshold);
        let _ = writeln!(s, "max_distance={:.6e}", self.max_distance);
        let _ = writeln!(s, "probes={}", self.probes.len());
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k}={v}");
        }
        for (i, p) in self.probes.iter().enumerate() {
            let _ = writeln!(s, "\n[probe.{i}]");
            let _ = writeln!(s, "label={}", p.label);
            let _ = writeln!(s, "u={}", join(&p.u));
            let _ = writeln!(s, "lhs={:.6e},{:.6e}", p.lhs.re, p.lhs.im);
            let _ = writeln!(s, "rhs={:.6e},{:.6e}", p.rhs.re, p.rhs.im);
            let _ = writeln!(s, "distance={:.6e}", p.distance);
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// A probe: which coordinates of the stacked vector it touches, and a label.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub label: String,
    pub u: Vec<f64>,
}

/// Random probe directions on the given coordinate blocks, scaled so that
/// `|⟨u, X⟩|` is of order one on the sample (radii cycle through 0.3, 0.6, 1).
pub fn make_probes(
    samples: &[Vec<f64>],
    blocks: &[(String, Vec<usize>)],
    n_probes: usize,
    seed: u64,
) -> Vec<ProbeSpec> {
    let dim = samples.first().map_or(0, |x| x.len());
    let mut rng = stream(seed, domain::VERIFY, u64::MAX, 0);
    let radii = [0.3, 0.6, 1.0];
    (0..n_probes)
        .map(|i| {
            let (label, coords) = &blocks[i % blocks.len()];
            let mut u = vec![0.0; dim];
            let mut norm = 0.0;
            for &c in coords {
                let g: f64 = StandardNormal.sample(&mut rng);
                u[c] = g;
                norm += g * g;
            }
            let norm = norm.sqrt().max(1e-300);
            u.iter_mut().for_each(|x| *x /= norm);
            let mut proj: Vec<f64> = samples
                .iter()
                .map(|x| x.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>().abs())
                .collect();
            let mid = proj.len() / 2;
            let scale = if proj.is_empty() {
                1.0
            } else {
                *proj.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
            };
            let r = radii[(i / blocks.len()) % radii.len()] / scale.max(1e-300);
            // jitter keeps probes from lining up across blocks
            let r = r * (0.9 + 0.2 * rng.random::<f64>());
            u.iter_mut().for_each(|x| *x *= r);
            ProbeSpec {
                label: label.clone(),
                u,
            }
        })
        .collect()
}

/// Two-sample comparison; `map_rhs` transforms each probe before it is applied to `rhs`.
pub fn compare_samples(
    test: &str,
    lhs: &[Vec<f64>],
    rhs: &[Vec<f64>],
    probes: &[ProbeSpec],
    map_rhs: impl Fn(&[f64]) -> Vec<f64>,
) -> CfDistanceReport {
    let results = probes
        .iter()
        .map(|p| {
            let a = ecf(lhs, &p.u);
            let b = ecf(rhs, &map_rhs(&p.u));
            ProbeResult {
                label: p.label.clone(),
                u: p.u.clone(),
                lhs: a,
                rhs: b,
                distance: (a - b).norm(),
            }
        })
        .collect();
    let n = lhs.len().min(rhs.len());
    CfDistanceReport::new(test, lhs.len(), rhs.len(), noise_floor(n), results)
}

/// One-sample comparison with a known characteristic function.
pub fn compare_with_cf(
    test: &str,
    samples: &[Vec<f64>],
    probes: &[ProbeSpec],
    cf: impl Fn(&[f64]) -> Result<Complex64>,
) -> Result<CfDistanceReport> {
    let mut results = Vec::with_capacity(probes.len());
    for p in probes {
        let a = ecf(samples, &p.u);
        let b = cf(&p.u)?;
        results.push(ProbeResult {
            label: p.label.clone(),
            u: p.u.clone(),
            lhs: a,
            rhs: b,
            distance: (a - b).norm(),
        });
    }
    Ok(CfDistanceReport::new(
        test,
        samples.len(),
        0,
        noise_floor(samples.len()),
        results,
    ))
}

/// Marginal blocks for each point plus joint blocks for consecutive pairs.
fn point_blocks(n_points: usize, m: usize) -> Vec<(String, Vec<usize>)> {
    let mut blocks: Vec<(String, Vec<usize>)> = (0..n_points)
        .map(|p| (format!("marginal[{p}]"), (p * m..(p + 1) * m).collect()))
        .collect();
    for p in 0..n_points.saturating_sub(1) {
        blocks.push((
            format!("joint[{p},{}]", p + 1),
            (p * m..(p + 2) * m).collect(),
        ));
    }
    blocks
}

fn nonzero_points(cfg: &FieldConfig) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<Vec<f64>> = cfg
        .grid
        .points()
        .into_iter()
        .filter(|p| p.iter().any(|&x| x != 0.0))
        .collect();
    if pts.is_empty() {
        return Err(Error::Domain(
            "need at least one non-zero probe point".into(),
        ));
    }
    Ok(pts)
}

fn require_commuting(cfg: &FieldConfig, what: &str) -> Result<()> {
    if !commutes(&cfg.d, &cfg.b(), 1e-9)? {
        return Err(Error::HypothesisNotMet(format!(
            "{what} needs D and B to commute"
        )));
    }
    Ok(())
}

fn run_at(cfg: &FieldConfig, points: Vec<Vec<f64>>, seed: u64, n: usize) -> Result<Ensemble> {
    simulate_ensemble(&cfg.with_grid(EvalGrid::Points(points))?.with_seed(seed), n)
}

/// `{X(r^E t)} =d {r^D X(t)}` at the configured points, for each `r`.
pub fn test_oss(
    cfg: &FieldConfig,
    r_values: &[f64],
    n: usize,
    n_probes: usize,
) -> Result<CfDistanceReport> {
    require_commuting(cfg, "the operator-scaling test")?;
    let pts = nonzero_points(cfg)?;
    let m = cfg.field_dim();
    let k = pts.len();
    let base = run_at(cfg, pts.clone(), derive_seed(cfg.seed, 0x05_0000), n)?;
    let rhs = base.joint(&(0..k).collect::<Vec<_>>());
    let mut parts = Vec::new();
    for (i, &r) in r_values.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "scaling factor must be positive, got {r}"
            )));
        }
        let re = cfg.e.mat_exp(r)?;
        let rd_t = cfg.d.mat_exp(r)?.transpose();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|t| re.mul_vec(t)).collect();
        let ens = run_at(cfg, scaled, derive_seed(cfg.seed, 0x05_0001 + i as u64), n)?;
        let lhs = ens.joint(&(0..k).collect::<Vec<_>>());
        let probes = make_probes(
            &lhs,
            &point_blocks(k, m),
            n_probes,
            derive_seed(cfg.seed, i as u64),
        );
        let map = |u: &[f64]| block_apply(&rd_t, u, m);
        let rep =
            compare_samples("oss", &lhs, &rhs, &probes, map).with_param(&format!("r[{i}]"), r);
        parts.push(rep);
    }
    Ok(CfDistanceReport::combine("oss", parts)
        .with_param("representation", cfg.representation.as_str())
        .with_param("points", k))
}

/// Applies `a` to each length-`m` block of `u`.
fn block_apply(a: &Matrix<f64>, u: &[f64], m: usize) -> Vec<f64> {
    u.chunks(m).flat_map(|c| a.mul_vec(c)).collect()
}

/// `{X(t + h) − X(h)} =d {X(t)}` for each shift `h`.
pub fn test_stationary_increments(
    cfg: &FieldConfig,
    shifts: &[Vec<f64>],
    n: usize,
    n_probes: usize,
) -> Result<CfDistanceReport> {
    if cfg.representation == Representation::Harmonizable && !cfg.generator.is_isotropic() {
        return Err(Error::HypothesisNotMet(
            "stationary increments of a harmonizable field need an isotropic generator".into(),
        ));
    }
    let pts = nonzero_points(cfg)?;
    let m = cfg.field_dim();
    let k = pts.len();
    let base = run_at(cfg, pts.clone(), derive_seed(cfg.seed, 0x07_0000), n)?;
    let rhs = base.joint(&(0..k).collect::<Vec<_>>());
    let mut parts = Vec::new();
    for (i, h) in shifts.iter().enumerate() {
        if h.len() != cfg.space_dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.space_dim(),
                got: h.len(),
            });
        }
        let mut shifted: Vec<Vec<f64>> = pts
            .iter()
            .map(|t| t.iter().zip(h).map(|(a, b)| a + b).collect())
            .collect();
        shifted.push(h.clone());
        let ens = run_at(cfg, shifted, derive_seed(cfg.seed, 0x07_0001 + i as u64), n)?;
        let lhs: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                let rep = ens.replicate(r);
                let anchor = &rep[k * m..(k + 1) * m];
                (0..k)
                    .flat_map(|p| (0..m).map(move |j| rep[p * m + j] - anchor[j]))
                    .collect()
            })
            .collect();
        let probes = make_probes(
            &lhs,
            &point_blocks(k, m),
            n_probes,
            derive_seed(cfg.seed, 0x70 + i as u64),
        );
        parts.push(
            compare_samples("stationary-increments", &lhs, &rhs, &probes, |u| u.to_vec())
                .with_param(&format!("h[{i}]"), join(h)),
        );
    }
    Ok(CfDistanceReport::combine("stationary-increments", parts)
        .with_param("representation", cfg.representation.as_str())
        .with_param("points", k))
}

/// `n^{−B}(X_1 + … + X_n) =d X` for independent copies, for each `n`.
pub fn test_marginal_stability(
    cfg: &FieldConfig,
    n_fold: &[usize],
    n: usize,
    n_probes: usize,
) -> Result<CfDistanceReport> {
    require_commuting(cfg, "the stability test")?;
    let pts = nonzero_points(cfg)?;
    let m = cfg.field_dim();
    let k = pts.len();
    let b = cfg.b();
    let base = run_at(cfg, pts.clone(), derive_seed(cfg.seed, 0x09_0000), n)?;
    let rhs = base.joint(&(0..k).collect::<Vec<_>>());
    let mut parts = Vec::new();
    for (i, &nf) in n_fold.iter().enumerate() {
        if nf < 2 {
            return Err(Error::Domain(format!("n-fold sums need n >= 2, got {nf}")));
        }
        let inv = b.mat_exp(1.0 / nf as f64)?;
        let ens = run_at(
            cfg,
            pts.clone(),
            derive_seed(cfg.seed, 0x09_0001 + i as u64),
            n * nf,
        )?;
        let all = ens.joint(&(0..k).collect::<Vec<_>>());
        let lhs: Vec<Vec<f64>> = all
            .chunks(nf)
            .map(|g| {
                let mut s = vec![0.0; k * m];
                for x in g {
                    s.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                }
                block_apply(&inv, &s, m)
            })
            .collect();
        let probes = make_probes(
            &lhs,
            &point_blocks(k, m),
            n_probes,
            derive_seed(cfg.seed, 0x90 + i as u64),
        );
        parts.push(
            compare_samples("stability", &lhs, &rhs, &probes, |u| u.to_vec())
                .with_param(&format!("n[{i}]"), nf),
        );
    }
    Ok(CfDistanceReport::combine("stability", parts).with_param("points", k))
}

/// Counts how often a same-law two-sample comparison passes.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub runs: usize,
    pub passes: usize,
    pub max_distances: Vec<f64>,
    pub threshold: f64,
}

impl CalibrationReport {
    pub fn rate(&self) -> f64 {
        self.passes as f64 / self.runs.max(1) as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[report]\ntest=calibration\n");
        let _ = writeln!(s, "runs={}", self.runs);
        let _ = writeln!(s, "passes={}", self.passes);
        let _ = writeln!(s, "threshold={:.6e}", self.threshold);
        s
    }
}

/// Runs the OSS comparison machinery on pairs of independent ensembles of one law.
pub fn calibrate(
    cfg: &FieldConfig,
    runs: usize,
    n: usize,
    n_probes: usize,
) -> Result<CalibrationReport> {
    let pts = nonzero_points(cfg)?;
    let m = cfg.field_dim();
    let k = pts.len();
    let idx: Vec<usize> = (0..k).collect();
    let mut passes = 0;
    let mut max_distances = Vec::with_capacity(runs);
    for run in 0..runs {
        let s = derive_seed(cfg.seed ^ 0xca1, run as u64);
        let a = run_at(cfg, pts.clone(), derive_seed(s, 1), n)?.joint(&idx);
        let b = run_at(cfg, pts.clone(), derive_seed(s, 2), n)?.joint(&idx);
        let probes = make_probes(&a, &point_blocks(k, m), n_probes, s);
        let rep = compare_samples("calibration", &a, &b, &probes, |u| u.to_vec());
        passes += rep.pass as usize;
        max_distances.push(rep.max_distance);
    }
    Ok(CalibrationReport {
        runs,
        passes,
        max_distances,
        threshold: noise_floor(n),
    })
}

/// Stochastic continuity: `P(‖X(t + εv) − X(t)‖ > η)` over shrinking `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub eps: Vec<f64>,
    pub exceedance: Vec<f64>,
    pub eta: f64,
    pub pass: bool,
}

pub fn check_stochastic_continuity(
    cfg: &FieldConfig,
    t: &[f64],
    direction: &[f64],
    eps: &[f64],
    eta: f64,
    n: usize,
) -> Result<ContinuityReport> {
    let mut pts = vec![t.to_vec()];
    pts.extend(eps.iter().map(|e| {
        t.iter()
            .zip(direction)
            .map(|(a, v)| a + e * v)
            .collect::<Vec<f64>>()
    }));
    let ens = run_at(cfg, pts, derive_seed(cfg.seed, 0x0c_0000), n)?;
    let m = cfg.field_dim();
    let exceedance: Vec<f64> = (0..eps.len())
        .map(|i| {
            let hits = (0..n)
                .filter(|&r| {
                    let d2: f64 = (0..m)
                        .map(|j| (ens.value(r, i + 1, j) - ens.value(r, 0, j)).powi(2))
                        .sum();
                    d2.sqrt() > eta
                })
                .count();
            hits as f64 / n as f64
        })
        .collect();
    let slack = noise_floor(n);
    let pass = exceedance.windows(2).all(|w| w[1] <= w[0] + slack)
        && exceedance
            .last()
            .zip(exceedance.first())
            .is_some_and(|(l, f)| *l < *f || *l <= slack);
    Ok(ContinuityReport {
        eps: eps.to_vec(),
        exceedance,
        eta,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderComponent {
    pub component: usize,
    pub estimate: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    pub lags: Vec<usize>,
    pub log_tau: Vec<f64>,
    /// `ln median |increment|` per component and lag.
    pub log_median: Vec<Vec<f64>>,
    pub components: Vec<HolderComponent>,
    pub tolerance: f64,
    pub pass: bool,
}

impl HolderReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("[report]\ntest=holder\n");
        let _ = writeln!(s, "verdict={}", if self.pass { "pass" } else { "fail" });
        let _ = writeln!(s, "tolerance={}", self.tolerance);
        let _ = writeln!(
            s,
            "lags={}",
            self.lags
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        for c in &self.components {
            let _ = writeln!(s, "\n[component.{}]", c.component);
            let _ = writeln!(s, "estimate={:.6}", c.estimate);
            let _ = writeln!(s, "target={:.6}", c.target);
            let _ = writeln!(s, "error={:.6}", (c.estimate - c.target).abs());
        }
        s
    }
}

/// Directional regularity exponents for the `D`-eigen-directions.
///
/// For diagonal `D` these are the diagonal entries; otherwise every component
/// gets `λ_D`, the exponent the field is guaranteed along all directions.
pub fn holder_targets(cfg: &FieldConfig) -> Vec<f64> {
    if cfg.d.is_diagonal() {
        cfg.d.matrix().diag()
    } else {
        vec![cfg.d.lambda_min(); cfg.field_dim()]
    }
}

/// Regresses `ln median |X_j(t + ℓδ) − X_j(t)|` on `ln τ_E(ℓδ)` over dyadic lags.
pub fn estimate_holder(ens: &Ensemble, cfg: &FieldConfig, tolerance: f64) -> Result<HolderReport> {
    let n = ens.n_points();
    if n < 512 {
        return Err(Error::Resolution(format!(
            "Hölder estimation needs at least 512 transect points, got {n}"
        )));
    }
    let step: Vec<f64> = ens.points[1]
        .iter()
        .zip(&ens.points[0])
        .map(|(a, b)| a - b)
        .collect();
    for w in ens.points.windows(2) {
        let s: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        if s.iter()
            .zip(&step)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            return Err(Error::Domain(
                "Hölder estimation needs equally spaced transect points".into(),
            ));
        }
    }
    let frame = PolarFrame::new(&cfg.e)?;
    let mut lags = Vec::new();
    let mut l = 1;
    while l <= n / 8 {
        lags.push(l);
        l *= 2;
    }
    let log_tau: Vec<f64> = lags
        .iter()
        .map(|&l| {
            frame
                .tau(&step.iter().map(|x| x * l as f64).collect::<Vec<_>>())
                .map(f64::ln)
        })
        .collect::<Result<_>>()?;
    let m = ens.m;
    let mut log_median = vec![Vec::with_capacity(lags.len()); m];
    for &l in &lags {
        for (j, lm) in log_median.iter_mut().enumerate() {
            let mut inc: Vec<f64> = (0..ens.n_replicates)
                .flat_map(|r| (0..n - l).map(move |k| (r, k)))
                .map(|(r, k)| (ens.value(r, k + l, j) - ens.value(r, k, j)).abs())
                .collect();
            let mid = inc.len() / 2;
            let med = *inc.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1;
            lm.push(med.max(1e-300).ln());
        }
    }
    let targets = holder_targets(cfg);
    let components: Vec<HolderComponent> = (0..m)
        .map(|j| HolderComponent {
            component: j,
            estimate: slope(&log_tau, &log_median[j]),
            target: targets[j],
        })
        .collect();
    let pass = components
        .iter()
        .all(|c| (c.estimate - c.target).abs() <= tolerance);
    Ok(HolderReport {
        lags,
        log_tau,
        log_median,
        components,
        tolerance,
        pass,
    })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sas_samples(alpha: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let g = GeneratorSpec::per_component(&[alpha]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| g.sample(&mut rng)).collect()
    }

    #[test]
    fn ecf_of_constant() {
        let s = vec![vec![1.0, 2.0]; 5];
        let c = ecf(&s, &[0.3, 0.1]);
        assert!((c - Complex64::new(0.5f64.cos(), 0.5f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn one_sample_against_closed_form() {
        let s = sas_samples(1.3, 20_000, 4);
        let blocks = vec![("x".to_string(), vec![0])];
        let probes = make_probes(&s, &blocks, 6, 1);
        let rep = compare_with_cf("sas", &s, &probes, |u| {
            Ok(Complex64::new((-u[0].abs().powf(1.3)).exp(), 0.0))
        })
        .unwrap();
        assert!(rep.pass, "{}", rep.to_text());
        // a wrong scale is detected
        let bad = compare_with_cf("sas", &s, &probes, |u| {
            Ok(Complex64::new((-(1.5 * u[0].abs()).powf(1.3)).exp(), 0.0))
        })
        .unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn two_sample_and_report_format() {
        let a = sas_samples(1.7, 10_000, 1);
        let b = sas_samples(1.7, 10_000, 2);
        let blocks = vec![("x".to_string(), vec![0])];
        let probes = make_probes(&a, &blocks, 5, 3);
        let rep = compare_samples("same", &a, &b, &probes, |u| u.to_vec()).with_param("alpha", 1.7);
        assert!(rep.pass);
        let text = rep.to_text();
        assert!(text.starts_with("[report]\ntest=same\nverdict=pass\n"));
        assert!(text.contains("\n[probe.4]\n"));
        assert!(text.contains("alpha=1.7"));
        // scaling the right-hand side by 2 is equivalent to a probe map u ↦ 2u
        let rep = compare_samples("scaled", &a, &b, &probes, |u| {
            u.iter().map(|x| 2.0 * x).collect()
        });
        assert!(!rep.pass);
    }

    #[test]
    fn probe_scale_is_informative() {
        let a = sas_samples(1.5, 5000, 8);
        let probes = make_probes(&a, &[("x".to_string(), vec![0])], 3, 0);
        for p in &probes {
            let c = ecf(&a, &p.u).norm();
            assert!(c > 0.05 && c < 0.97, "{c}");
        }
    }
}
