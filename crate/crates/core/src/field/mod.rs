//! Discretized moving-average and harmonizable operator-scaling stable fields.
//!
//! The stochastic integral `∫ f_t(s) M(ds)` is replaced by `Σ_c f_t(s_c) M(Δ_c)`
//! over disjoint cells, using `M(Δ) =d |Δ|^B Z` for an operator-stable generator
//! `Z` with exponent `B`. Each `(replicate, cell)` pair owns its own block of a
//! counter-based random stream.

mod export;
mod grid;
mod kernels;

use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::homogeneous::HomogeneousFn;
use crate::integrability::{validate_harm_parameters, validate_ma_parameters};
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;
use crate::rng;

pub use export::{read_opfd, write_csv, write_opfd, OpfdData, OPFD_VERSION};
pub use grid::{Cell, CellGrid, GridSettings};
pub use kernels::{harm_kernel, ma_kernel, HarmKernel, HarmKernelAt, MaKernel, MaKernelAt};

use grid::{build_cells, index_range, FrameSpec, Gauge};

/// Largest `|v|` (log-radius) the truncation heuristics may request.
const MAX_LOG_RADIUS: f64 = 40.0;
/// Doubles per precomputed weight chunk.
const CHUNK_DOUBLES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    MovingAverage,
    Harmonizable,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Representation::MovingAverage => "moving-average",
            Representation::Harmonizable => "harmonizable",
        }
    }
}

/// Evaluation points. Lattices enumerate row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub enum EvalGrid {
    Lattice {
        origin: Vec<f64>,
        spacing: Vec<f64>,
        dims: Vec<usize>,
    },
    Points(Vec<Vec<f64>>),
}

impl EvalGrid {
    pub fn dim(&self) -> usize {
        match self {
            EvalGrid::Lattice { origin, .. } => origin.len(),
            EvalGrid::Points(p) => p.first().map_or(0, |x| x.len()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EvalGrid::Lattice { dims, .. } => dims.iter().product(),
            EvalGrid::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            EvalGrid::Points(p) => p.clone(),
            EvalGrid::Lattice {
                origin,
                spacing,
                dims,
            } => {
                let n = self.len();
                let d = dims.len();
                (0..n)
                    .map(|mut idx| {
                        let mut x = vec![0.0; d];
                        for j in (0..d).rev() {
                            let k = idx % dims[j];
                            idx /= dims[j];
                            x[j] = origin[j] + spacing[j] * k as f64;
                        }
                        x
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Domain("evaluation grid is empty".into()));
        }
        match self {
            EvalGrid::Lattice {
                origin,
                spacing,
                dims,
            } => {
                for len in [origin.len(), spacing.len(), dims.len()] {
                    if len != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: len,
                        });
                    }
                }
                if spacing.iter().chain(origin).any(|x| !x.is_finite()) {
                    return Err(Error::Domain(
                        "lattice origin and spacing must be finite".into(),
                    ));
                }
            }
            EvalGrid::Points(p) => {
                for x in p {
                    if x.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: x.len(),
                        });
                    }
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Domain("evaluation points must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything that determines a simulated ensemble.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub representation: Representation,
    pub e: OperatorSpec<f64>,
    pub d: OperatorSpec<f64>,
    /// Dimension `m` (moving average) or `2m` with exponent `B ⊕ B` (harmonizable).
    pub generator: GeneratorSpec,
    /// `E`-homogeneous (moving average) or `Eᵀ`-homogeneous (harmonizable).
    pub phi: HomogeneousFn<f64>,
    pub grid: EvalGrid,
    pub seed: u64,
    pub resolution: GridSettings,
    /// Upper bound on `cells × replicates`.
    pub max_draws: f64,
}

impl FieldConfig {
    pub fn new(
        representation: Representation,
        e: OperatorSpec<f64>,
        d: OperatorSpec<f64>,
        generator: GeneratorSpec,
        phi: HomogeneousFn<f64>,
        grid: EvalGrid,
        seed: u64,
    ) -> Result<Self> {
        let resolution = GridSettings::for_dim(e.dim());
        let cfg = Self {
            representation,
            e,
            d,
            generator,
            phi,
            grid,
            seed,
            resolution,
            max_draws: 2e10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_resolution(mut self, resolution: GridSettings) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_grid(&self, grid: EvalGrid) -> Result<Self> {
        grid.validate(self.e.dim())?;
        Ok(Self {
            grid,
            ..self.clone()
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Field dimension `m`.
    pub fn field_dim(&self) -> usize {
        self.d.dim()
    }

    pub fn space_dim(&self) -> usize {
        self.e.dim()
    }

    /// The `m × m` exponent `B` of the random measure.
    pub fn b(&self) -> OperatorSpec<f64> {
        let gb = self.generator.exponent();
        match self.representation {
            Representation::MovingAverage => gb.clone(),
            Representation::Harmonizable => {
                let m = self.field_dim();
                OperatorSpec::new(Matrix::from_fn(m, m, |i, j| gb.matrix()[(i, j)]))
                    .expect("diagonal block of a valid exponent")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.e.dim();
        let m = self.d.dim();
        self.e.require_positive_spectrum("E")?;
        self.d.require_positive_spectrum("D")?;
        if self.phi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.phi.dim(),
            });
        }
        self.grid.validate(d)?;
        let close =
            |a: &Matrix<f64>, b: &Matrix<f64>| (a - b).norm_max() <= 1e-9 * (1.0 + b.norm_max());
        match self.representation {
            Representation::MovingAverage => {
                if self.generator.dim() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: self.generator.dim(),
                    });
                }
                if !close(self.phi.exponent().matrix(), self.e.matrix()) {
                    return Err(Error::InvalidKernel(
                        "moving-average phi must be E-homogeneous".into(),
                    ));
                }
                let gate = validate_ma_parameters(
                    &self.e,
                    &self.d,
                    self.generator.exponent(),
                    self.phi.beta(),
                )?;
                if let Some(v) = gate.violation() {
                    return Err(Error::ParameterCondition(v));
                }
            }
            Representation::Harmonizable => {
                if self.generator.dim() != 2 * m {
                    return Err(Error::DimensionMismatch {
                        expected: 2 * m,
                        got: self.generator.dim(),
                    });
                }
                let gb = self.generator.exponent().matrix();
                let doubled = Matrix::from_fn(2 * m, 2 * m, |i, j| {
                    if (i < m) == (j < m) {
                        gb[(i % m, j % m)]
                    } else {
                        0.0
                    }
                });
                if !close(gb, &doubled) {
                    return Err(Error::InvalidGenerator(
                        "harmonizable generator must have exponent B ⊕ B on R^m × R^m".into(),
                    ));
                }
                if !close(self.phi.exponent().matrix(), &self.e.matrix().transpose()) {
                    return Err(Error::InvalidKernel(
                        "harmonizable phi must be E^T-homogeneous".into(),
                    ));
                }
                let gate = validate_harm_parameters(&self.e, &self.d)?;
                if let Some(v) = gate.violation() {
                    return Err(Error::ParameterCondition(v));
                }
            }
        }
        Ok(())
    }

    /// Stable textual form of every setting that affects the samples.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mat = |m: &Matrix<f64>| format!("{}x{}{:?}", m.rows(), m.cols(), m.as_slice());
        let _ = writeln!(s, "representation={}", self.representation.as_str());
        let _ = writeln!(s, "E={}", mat(self.e.matrix()));
        let _ = writeln!(s, "D={}", mat(self.d.matrix()));
        let _ = writeln!(
            s,
            "generator={:?};B={};terms={}",
            self.generator.mode(),
            mat(self.generator.exponent().matrix()),
            self.generator.n_terms()
        );
        let _ = writeln!(
            s,
            "phi={:?};exponent={};beta={:?};factor={:?}",
            self.phi.kind(),
            mat(self.phi.exponent().matrix()),
            self.phi.beta(),
            self.phi.factor()
        );
        let _ = writeln!(s, "grid={:?}", self.grid);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "resolution={:?}", self.resolution);
        s
    }

    /// First eight bytes (little endian) of the SHA-256 of [`FieldConfig::canonical`].
    pub fn config_hash(&self) -> u64 {
        hash_text(&self.canonical())
    }

    /// Smallest stability index of the generator (2 for Gaussian laws).
    pub(crate) fn alpha_eff(&self) -> f64 {
        if self.generator.is_gaussian() {
            return 2.0;
        }
        match self.generator.alphas() {
            Some(a) => a.iter().cloned().fold(2.0, f64::min),
            None => (1.0 / self.generator.exponent().lambda_max()).min(2.0),
        }
    }

    /// The integration cells for the current evaluation points.
    pub fn cells(&self) -> Result<CellGrid> {
        let pts = self.grid.points();
        let settings = &self.resolution;
        let dv = settings.dv();
        let tol = settings.tail_tol.clamp(1e-12, 0.5);
        let alpha = self.alpha_eff();
        let clamp = |v: f64, what: &str| {
            if v.abs() > MAX_LOG_RADIUS || !v.is_finite() {
                log::warn!("{what} truncation clamped to |ln radius| = {MAX_LOG_RADIUS}; tail decays slowly");
                MAX_LOG_RADIUS.copysign(v)
            } else {
                v
            }
        };
        match self.representation {
            Representation::MovingAverage => {
                let gate = validate_ma_parameters(
                    &self.e,
                    &self.d,
                    self.generator.exponent(),
                    self.phi.beta(),
                )?;
                let v_lo = clamp(tol.ln() / (alpha * gate.lower_margin), "inner");
                let v_hi = clamp(-tol.ln() / (alpha * gate.upper_margin), "outer");
                let gauge = Gauge::new(&self.e)?;
                let mut centers: Vec<(Vec<f64>, f64)> = Vec::new();
                for p in &pts {
                    let w = gauge.eval(p);
                    if w > 0.0 && !centers.iter().any(|(c, _)| c == p) {
                        centers.push((p.clone(), w));
                    }
                }
                let w0 = 2.0 * centers.iter().map(|c| c.1).fold(0.5, f64::max);
                let mut frames = Vec::with_capacity(centers.len() + 1);
                let (lo, hi) = index_range(w0.ln() + v_lo, w0.ln() + v_hi, dv);
                frames.push(FrameSpec {
                    center: vec![0.0; self.space_dim()],
                    weight: w0,
                    i_lo: lo,
                    i_hi: hi,
                    stop_when_empty: false,
                });
                for (c, w) in centers {
                    let (lo, hi) = index_range(w.ln() + v_lo, w.ln() + v_hi, dv);
                    frames.push(FrameSpec {
                        center: c,
                        weight: w,
                        i_lo: lo,
                        i_hi: hi,
                        stop_when_empty: true,
                    });
                }
                build_cells(&self.e, &frames, settings)
            }
            Representation::Harmonizable => {
                let gate = validate_harm_parameters(&self.e, &self.d)?;
                let v_lo = clamp(tol.ln() / (alpha * gate.margin), "low-frequency");
                let v_hi = clamp(-tol.ln() / (alpha * self.d.lambda_min()), "high-frequency");
                let gauge = Gauge::new(&self.e)?;
                let taus: Vec<f64> = pts
                    .iter()
                    .map(|p| gauge.eval(p))
                    .filter(|&w| w > 0.0)
                    .collect();
                let (t_min, t_max) = if taus.is_empty() {
                    (1.0, 1.0)
                } else {
                    (
                        taus.iter().cloned().fold(f64::INFINITY, f64::min),
                        taus.iter().cloned().fold(0.0, f64::max),
                    )
                };
                let (lo, hi) = index_range(v_lo - t_max.ln(), v_hi - t_min.ln(), dv);
                let frame = FrameSpec {
                    center: vec![0.0; self.space_dim()],
                    weight: 1.0,
                    i_lo: lo,
                    i_hi: hi,
                    stop_when_empty: false,
                };
                build_cells(&self.e.transpose(), &[frame], settings)
            }
        }
    }
}

/// First eight bytes (little endian) of the SHA-256 of `s`.
pub fn hash_text(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// One replicate of the field at every evaluation point, `[point][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub replicate: usize,
    pub config_hash: u64,
    pub m: usize,
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn at(&self, point: usize) -> &[f64] {
        &self.values[point * self.m..(point + 1) * self.m]
    }
}

/// Replicates stored contiguously as `[replicate][point][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub points: Vec<Vec<f64>>,
    pub m: usize,
    pub n_replicates: usize,
    pub config_hash: u64,
    pub n_cells: usize,
    pub values: Vec<f64>,
}

impl Ensemble {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn value(&self, replicate: usize, point: usize, component: usize) -> f64 {
        self.values[(replicate * self.points.len() + point) * self.m + component]
    }

    pub fn replicate(&self, r: usize) -> &[f64] {
        let w = self.points.len() * self.m;
        &self.values[r * w..(r + 1) * w]
    }

    /// Per replicate, the concatenated field vectors at `points`.
    pub fn joint(&self, points: &[usize]) -> Vec<Vec<f64>> {
        (0..self.n_replicates)
            .map(|r| {
                let rep = self.replicate(r);
                points
                    .iter()
                    .flat_map(|&p| rep[p * self.m..(p + 1) * self.m].iter().cloned())
                    .collect()
            })
            .collect()
    }

    pub fn into_samples(self) -> Vec<FieldSample> {
        let w = self.points.len() * self.m;
        (0..self.n_replicates)
            .map(|r| FieldSample {
                replicate: r,
                config_hash: self.config_hash,
                m: self.m,
                values: self.values[r * w..(r + 1) * w].to_vec(),
            })
            .collect()
    }
}

/// Sub-node geometry of every cell, used to correct the size of a kernel
/// evaluated only at the cell centre: column `j` is scaled by
/// `(Σ_n |Δ_n| ‖f(s_n) e_j‖^α_j / (Σ_n |Δ_n| ‖f(s_c) e_j‖^α_j))^{1/α_j}`,
/// where `α_j` is the index of generator component `j`.
struct Refinement {
    d: usize,
    alphas: Vec<f64>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl Refinement {
    fn new(grid: &CellGrid, cfg: &FieldConfig, columns: usize) -> Self {
        let alphas = match cfg.generator.alphas() {
            Some(a) if a.len() == columns && !cfg.generator.is_gaussian() => a.to_vec(),
            _ => vec![cfg.alpha_eff(); columns],
        };
        if !cfg.resolution.refine {
            return Self {
                d: cfg.space_dim(),
                alphas,
                offsets: vec![0; grid.len() + 1],
                data: Vec::new(),
            };
        }
        let per_cell: Vec<Vec<f64>> = grid
            .cells
            .par_iter()
            .map(|c| {
                grid.nodes(c)
                    .into_iter()
                    .flat_map(|(s, w)| s.into_iter().chain(std::iter::once(w)))
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(per_cell.len() + 1);
        offsets.push(0);
        let mut data = Vec::with_capacity(per_cell.iter().map(Vec::len).sum());
        for v in per_cell {
            data.extend(v);
            offsets.push(data.len());
        }
        Self {
            d: cfg.space_dim(),
            alphas,
            offsets,
            data,
        }
    }

    /// `f(s_c)` with its columns rescaled.
    fn apply(
        &self,
        c: usize,
        at_center: Matrix<f64>,
        f: impl Fn(&[f64]) -> Option<Matrix<f64>>,
    ) -> Matrix<f64> {
        let cols = at_center.cols();
        let col_norm = |m: &Matrix<f64>, j: usize| {
            (0..m.rows())
                .map(|i| m[(i, j)] * m[(i, j)])
                .sum::<f64>()
                .sqrt()
        };
        let base: Vec<f64> = (0..cols).map(|j| col_norm(&at_center, j)).collect();
        if base.iter().all(|&b| !(b > 0.0 && b.is_finite())) {
            return at_center;
        }
        if self.offsets[c] == self.offsets[c + 1] {
            return at_center;
        }
        let mut num = vec![0.0; cols];
        let mut den = vec![0.0; cols];
        for node in self.data[self.offsets[c]..self.offsets[c + 1]].chunks(self.d + 1) {
            let Some(fm) = f(&node[..self.d]) else {
                continue;
            };
            for j in 0..cols {
                let ratio = col_norm(&fm, j) / base[j];
                if ratio.is_finite() {
                    num[j] += node[self.d] * ratio.powf(self.alphas[j]);
                    den[j] += node[self.d];
                }
            }
        }
        let mut out = at_center;
        for j in 0..cols {
            if base[j] > 0.0 && base[j].is_finite() && den[j] > 0.0 && num[j] > 0.0 {
                let g = (num[j] / den[j]).powf(1.0 / self.alphas[j]);
                for i in 0..out.rows() {
                    out[(i, j)] *= g;
                }
            }
        }
        out
    }
}

/// Exact log-characteristic function of the discretized field at the
/// configured points: `Σ_c ψ_Z(W_cᵀ u)` with `W_c` the stacked cell weights.
///
/// `u` stacks one length-`m` block per evaluation point.
pub fn discrete_log_cf(cfg: &FieldConfig, u: &[f64]) -> Result<f64> {
    let points = cfg.grid.points();
    let m = cfg.field_dim();
    if u.len() != points.len() * m {
        return Err(Error::DimensionMismatch {
            expected: points.len() * m,
            got: u.len(),
        });
    }
    let cells = cfg.cells()?;
    let b = cfg.b();
    let gb = cfg.generator.exponent();
    let mg = gb.dim();
    let ma = match cfg.representation {
        Representation::MovingAverage => Some(MaKernel::new(&cfg.e, &cfg.d, &b, &cfg.phi)?),
        Representation::Harmonizable => None,
    };
    let harm = HarmKernel::new(&cfg.e, &cfg.d, &b, &cfg.phi)?;
    let refine = Refinement::new(&cells, cfg, b.dim());
    let parts: Vec<f64> = cells
        .cells
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            let factor = gb.exp_log(c.volume.ln());
            let amp = match &ma {
                Some(_) => None,
                None => {
                    Some(refine.apply(ci, harm.amplitude(&c.center)?, |s| harm.amplitude(s).ok()))
                }
            };
            let mut v = vec![0.0; mg];
            for (k, t) in points.iter().enumerate() {
                if t.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let w = match (&ma, &amp) {
                    (Some(k), _) => refine
                        .apply(ci, k.eval(t, &c.center), |s| Some(k.eval(t, s)))
                        .matmul(&factor),
                    (None, Some(a)) => {
                        let phase: f64 = t.iter().zip(&c.center).map(|(x, y)| x * y).sum();
                        let full =
                            kernels::block(a, phase.cos() - 1.0, phase.sin()).matmul(&factor);
                        Matrix::from_fn(m, mg, |i, j| full[(i, j)])
                    }
                    _ => unreachable!(),
                };
                let uk = &u[k * m..(k + 1) * m];
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj += (0..m).map(|i| w[(i, j)] * uk[i]).sum::<f64>();
                }
            }
            cfg.generator.log_cf(&v)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// A kernel `(t, s) ↦ f_t(s)` of shape `rows × cols` for custom syntheses.
pub trait FieldKernel: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn eval(&self, t: &[f64], s: &[f64]) -> Matrix<f64>;
}

impl FieldKernel for MaKernel {
    fn rows(&self) -> usize {
        self.dim()
    }
    fn cols(&self) -> usize {
        self.dim()
    }
    fn eval(&self, t: &[f64], s: &[f64]) -> Matrix<f64> {
        MaKernel::eval(self, t, s)
    }
}

/// Component profile `f_j(s) = |ψ̃((φ(s)^{−D*−qB*} e_j, 0))|^{1/α_j}` of a
/// harmonizable field with diagonal `B`, `DB = BD` and an isotropic complex
/// generator.
pub fn f_j_profile(cfg: &FieldConfig, j: usize, s: &[f64]) -> Result<f64> {
    let alphas = match (cfg.representation, cfg.generator.mode()) {
        (
            Representation::Harmonizable,
            crate::generators::GeneratorMode::ComplexIsotropic { alphas },
        ) => alphas,
        _ => {
            return Err(Error::Unsupported(
                "f_j profiles need a harmonizable field with an isotropic complex generator".into(),
            ))
        }
    };
    let b = cfg.b();
    if !b.is_diagonal() || !crate::operator::commutes(&cfg.d, &b, 1e-12)? {
        return Err(Error::Unsupported(
            "f_j profiles need a diagonal B commuting with D".into(),
        ));
    }
    let m = cfg.field_dim();
    if j >= m {
        return Err(Error::Domain(format!(
            "component {j} out of range for m = {m}"
        )));
    }
    let p = cfg.phi.eval(s);
    if !(p > 0.0) {
        return Err(Error::Domain("f_j is undefined at s = 0".into()));
    }
    let q = cfg.e.trace();
    let a = cfg.d.transpose().add(&b.transpose().scale(q)?)?;
    let mut e = vec![0.0; m];
    e[j] = 1.0;
    let mut z = a.exp_log(-p.ln()).mul_vec(&e);
    z.resize(2 * m, 0.0);
    Ok(cfg.generator.log_cf(&z)?.abs().powf(1.0 / alphas[j]))
}

pub fn simulate(cfg: &FieldConfig, n_replicates: usize) -> Result<Vec<FieldSample>> {
    Ok(simulate_ensemble(cfg, n_replicates)?.into_samples())
}

pub fn simulate_ensemble(cfg: &FieldConfig, n_replicates: usize) -> Result<Ensemble> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let m = cfg.field_dim();
    let b = cfg.b();
    let points = cfg.grid.points();
    match cfg.representation {
        Representation::MovingAverage => {
            let k = MaKernel::new(&cfg.e, &cfg.d, &b, &cfg.phi)?;
            synthesize(cfg, &cells, &points, &k, n_replicates)
        }
        Representation::Harmonizable => {
            let hk = HarmKernel::new(&cfg.e, &cfg.d, &b, &cfg.phi)?;
            let refine = Refinement::new(&cells, cfg, m);
            let amps: Vec<Matrix<f64>> = cells
                .cells
                .par_iter()
                .enumerate()
                .map(|(ci, c)| {
                    let a = refine.apply(ci, hk.amplitude(&c.center)?, |s| hk.amplitude(s).ok());
                    Ok(a.matmul(&b.exp_log(c.volume.ln())))
                })
                .collect::<Result<_>>()?;
            let weight = |t: &[f64], c: usize, out: &mut [f64]| {
                let phase: f64 = t
                    .iter()
                    .zip(&cells.cells[c].center)
                    .map(|(a, b)| a * b)
                    .sum();
                let (sn, cs) = phase.sin_cos();
                let a = &amps[c];
                for i in 0..m {
                    for j in 0..m {
                        out[i * 2 * m + j] = (cs - 1.0) * a[(i, j)];
                        out[i * 2 * m + m + j] = -sn * a[(i, j)];
                    }
                }
            };
            run(cfg, cells.len(), &points, m, 2 * m, &weight, n_replicates)
        }
    }
}

/// Simulates `Σ_c f_t(s_c) |Δ_c|^B Z_c` for an arbitrary kernel on the cells of `cfg`.
pub fn simulate_with_kernel(
    cfg: &FieldConfig,
    kernel: &dyn FieldKernel,
    n_replicates: usize,
) -> Result<Ensemble> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    synthesize(cfg, &cells, &cfg.grid.points(), kernel, n_replicates)
}

fn synthesize(
    cfg: &FieldConfig,
    cells: &CellGrid,
    points: &[Vec<f64>],
    kernel: &dyn FieldKernel,
    n_replicates: usize,
) -> Result<Ensemble> {
    let gb = cfg.generator.exponent();
    if kernel.cols() != gb.dim() {
        return Err(Error::DimensionMismatch {
            expected: gb.dim(),
            got: kernel.cols(),
        });
    }
    let factors: Vec<Matrix<f64>> = cells
        .cells
        .par_iter()
        .map(|c| gb.exp_log(c.volume.ln()))
        .collect();
    let refine = Refinement::new(cells, cfg, kernel.cols());
    let (rows, cols) = (kernel.rows(), kernel.cols());
    let weight = |t: &[f64], c: usize, out: &mut [f64]| {
        let f = refine.apply(c, kernel.eval(t, &cells.cells[c].center), |s| {
            Some(kernel.eval(t, s))
        });
        let w = f.matmul(&factors[c]);
        out.copy_from_slice(w.as_slice());
    };
    run(cfg, cells.len(), points, rows, cols, &weight, n_replicates)
}

type WeightFn<'a> = dyn Fn(&[f64], usize, &mut [f64]) + Sync + 'a;

fn run(
    cfg: &FieldConfig,
    n_cells: usize,
    points: &[Vec<f64>],
    m: usize,
    mg: usize,
    weight: &WeightFn<'_>,
    n_replicates: usize,
) -> Result<Ensemble> {
    if n_replicates == 0 {
        return Err(Error::Domain("need at least one replicate".into()));
    }
    let work = n_cells as f64 * n_replicates as f64;
    if work > cfg.max_draws {
        return Err(Error::ResourceLimit(format!(
            "{n_cells} cells x {n_replicates} replicates exceeds the limit of {:.3e} cell draws",
            cfg.max_draws
        )));
    }
    log::info!(
        "{} field: {} cells, {} points, {} replicates",
        cfg.representation.as_str(),
        n_cells,
        points.len(),
        n_replicates
    );
    let np = points.len();
    let block = m * mg;
    let chunk = (CHUNK_DOUBLES / (n_cells * block).max(1)).clamp(1, np.max(1));
    let mut values = vec![0.0; n_replicates * np * m];
    let gen = &cfg.generator;
    let seed = cfg.seed;
    for start in (0..np).step_by(chunk) {
        let end = (start + chunk).min(np);
        let mut w = vec![0.0; (end - start) * n_cells * block];
        w.par_chunks_mut(n_cells * block)
            .enumerate()
            .for_each(|(k, wk)| {
                let t = &points[start + k];
                if t.iter().all(|&x| x == 0.0) {
                    return;
                }
                for (c, out) in wk.chunks_mut(block).enumerate() {
                    weight(t, c, out);
                }
            });
        let chunk_vals: Vec<Vec<f64>> = (0..n_replicates)
            .into_par_iter()
            .map(|r| {
                let mut rs = rng::stream(seed, rng::domain::FIELD, r as u64, 0);
                let mut z = vec![0.0; n_cells * mg];
                for (c, zc) in z.chunks_mut(mg).enumerate() {
                    rng::seek(&mut rs, c as u64);
                    gen.sample_into(&mut rs, zc);
                }
                let mut out = vec![0.0; (end - start) * m];
                for k in 0..end - start {
                    let wk = &w[k * n_cells * block..(k + 1) * n_cells * block];
                    let xk = &mut out[k * m..(k + 1) * m];
                    for (wc, zc) in wk.chunks(block).zip(z.chunks(mg)) {
                        for i in 0..m {
                            let row = &wc[i * mg..(i + 1) * mg];
                            xk[i] += row.iter().zip(zc).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
                out
            })
            .collect();
        for (r, cv) in chunk_vals.into_iter().enumerate() {
            let base = r * np * m;
            values[base + start * m..base + end * m].copy_from_slice(&cv);
        }
    }
    Ok(Ensemble {
        points: points.to_vec(),
        m,
        n_replicates,
        config_hash: cfg.config_hash(),
        n_cells,
        values,
    })
}
