//! Spatial cells for the stochastic-integral discretization.
//!
//! Each singular point of the kernel gets a log-polar frame `a + e^{vA} θ`
//! (`θ` on the Euclidean sphere, `v` on a lattice anchored at zero). Space is
//! split between frames by a multiplicatively weighted nearest-centre rule in
//! an `A`-homogeneous gauge, so scaling every centre by `r^A` maps the cell set
//! onto itself whenever `ln r` is a multiple of the lattice step. Cells that
//! straddle a region boundary are clipped by sub-sampling.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operator::OperatorSpec;
use crate::polar::PolarFrame;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub center: Vec<f64>,
    pub volume: f64,
    pub(crate) frame: usize,
    pub(crate) v: [f64; 2],
    pub(crate) lo: [f64; 2],
    pub(crate) hi: [f64; 2],
    /// Clipped to its frame's region.
    pub(crate) partial: bool,
}

/// Resolution of the log-polar cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    /// Radial lattice step is `ln 2 / radial_per_octave`.
    pub radial_per_octave: usize,
    /// Angular cells: `2` sides in `d = 1`, this many sectors in `d = 2`
    /// (rounded up to a multiple of 4), this many azimuthal sectors times
    /// about half as many height bands in `d = 3`.
    pub angular: usize,
    /// Bisection depth when clipping a cell to its frame's region.
    pub clip_depth: usize,
    /// Target fraction of the scale functional left outside the truncated range.
    pub tail_tol: f64,
    pub max_cells: usize,
    /// Rescale each cell's kernel by its sub-node power mean; `false` is the
    /// plain midpoint rule, which is linear in the kernel.
    pub refine: bool,
}

impl GridSettings {
    pub fn for_dim(d: usize) -> Self {
        let (radial_per_octave, angular) = match d {
            1 => (16, 2),
            2 => (3, 24),
            _ => (2, 12),
        };
        Self {
            radial_per_octave,
            angular,
            clip_depth: 5,
            tail_tol: 1e-4,
            max_cells: 2_000_000,
            refine: true,
        }
    }

    pub fn dv(&self) -> f64 {
        std::f64::consts::LN_2 / self.radial_per_octave as f64
    }
}

/// A-homogeneous gauge used to split space between frames.
pub(crate) enum Gauge {
    Diagonal(Vec<f64>),
    Polar(PolarFrame<f64>),
}

impl Gauge {
    pub(crate) fn new(a: &OperatorSpec<f64>) -> Result<Self> {
        if a.is_diagonal() {
            Ok(Gauge::Diagonal(
                a.matrix().diag().iter().map(|x| 1.0 / x).collect(),
            ))
        } else {
            Ok(Gauge::Polar(PolarFrame::new(a)?))
        }
    }

    /// Constant `K` with `g(x + y) <= K (g(x) + g(y))`. Exact for the diagonal
    /// power-sum gauge, a conservative value otherwise.
    pub(crate) fn quasi_constant(&self) -> f64 {
        match self {
            Gauge::Diagonal(p) => p.iter().fold(1.0f64, |k, &p| k.max(2f64.powf(p - 1.0))),
            Gauge::Polar(_) => 4.0,
        }
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Gauge::Diagonal(p) => x.iter().zip(p).map(|(v, p)| v.abs().powf(*p)).sum(),
            Gauge::Polar(f) => f.tau(x).unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct AngularBox {
    lo: [f64; 2],
    hi: [f64; 2],
}

/// Smoothstep warp of a unit interval; clusters cells towards both ends.
fn warp(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

/// Cell parameters `p` live in `[0, 4)` (azimuth, one unit per quadrant) and
/// `[0, 2)` (height, one unit per hemisphere); each unit is warped so cells
/// cluster at the coordinate planes, where power-sum gauges have cusps.
fn azimuth(p: f64) -> f64 {
    let q = p.floor().clamp(0.0, 3.0);
    FRAC_PI_2 * (q + warp(p - q))
}

fn height(p: f64) -> f64 {
    if p < 1.0 {
        -1.0 + warp(p)
    } else {
        warp(p - 1.0)
    }
}

fn theta(d: usize, p: [f64; 2]) -> Vec<f64> {
    match d {
        1 => vec![p[0]],
        2 => {
            let a = azimuth(p[0]);
            vec![a.cos(), a.sin()]
        }
        _ => {
            let (a, z) = (azimuth(p[0]), height(p[1]));
            let r = (1.0 - z * z).max(0.0).sqrt();
            vec![r * a.cos(), r * a.sin(), z]
        }
    }
}

/// `∫ ⟨Aθ, θ⟩ dS` over an angular box.
fn angular_measure(
    a: &Matrix<f64>,
    d: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    gl: &GaussLegendre<f64>,
) -> f64 {
    match d {
        1 => a[(0, 0)],
        2 => {
            let prim = |p: f64| {
                a[(0, 0)] * (p / 2.0 + (2.0 * p).sin() / 4.0)
                    + (a[(0, 1)] + a[(1, 0)]) * p.sin().powi(2) / 2.0
                    + a[(1, 1)] * (p / 2.0 - (2.0 * p).sin() / 4.0)
            };
            prim(azimuth(hi[0])) - prim(azimuth(lo[0]))
        }
        _ => gl.integrate(height(lo[1]), height(hi[1]), |z| {
            gl.integrate(azimuth(lo[0]), azimuth(hi[0]), |p| {
                let r = (1.0 - z * z).max(0.0).sqrt();
                let t = [r * p.cos(), r * p.sin(), z];
                let at = a.mul_vec(&t);
                at.iter().zip(&t).map(|(x, y)| x * y).sum::<f64>()
            })
        }),
    }
}

fn angular_boxes(d: usize, n: usize) -> Vec<AngularBox> {
    // sectors per quadrant
    let k = n.div_ceil(4).max(1);
    let w = 1.0 / k as f64;
    match d {
        1 => vec![
            AngularBox {
                lo: [-1.0, 0.0],
                hi: [-1.0, 0.0],
            },
            AngularBox {
                lo: [1.0, 0.0],
                hi: [1.0, 0.0],
            },
        ],
        2 => (0..4 * k)
            .map(|i| AngularBox {
                lo: [i as f64 * w, 0.0],
                hi: [(i + 1) as f64 * w, 0.0],
            })
            .collect(),
        _ => {
            let kz = k.div_ceil(2).max(1);
            let wz = 1.0 / kz as f64;
            let mut out = Vec::with_capacity(8 * k * kz);
            for iz in 0..2 * kz {
                for ip in 0..4 * k {
                    out.push(AngularBox {
                        lo: [ip as f64 * w, iz as f64 * wz],
                        hi: [(ip + 1) as f64 * w, (iz + 1) as f64 * wz],
                    });
                }
            }
            out
        }
    }
}

fn mid(b: &AngularBox) -> [f64; 2] {
    [(b.lo[0] + b.hi[0]) / 2.0, (b.lo[1] + b.hi[1]) / 2.0]
}

/// One log-polar frame: centre, radial index range, and region weight.
#[derive(Debug, Clone)]
pub(crate) struct FrameSpec {
    pub center: Vec<f64>,
    pub weight: f64,
    pub i_lo: i64,
    pub i_hi: i64,
    /// Stop once two consecutive rings own nothing (bounded regions).
    pub stop_when_empty: bool,
}

/// Owned part of a parameter box: volume and volume-weighted parameter moments.
#[derive(Default)]
struct Owned {
    volume: f64,
    total: f64,
    v: f64,
    p: [f64; 2],
}

/// Cells of all frames together with the geometry needed to refine them.
pub struct CellGrid {
    pub cells: Vec<Cell>,
    a: OperatorSpec<f64>,
    d: usize,
    q: f64,
    gauge: Gauge,
    frames: Vec<FrameSpec>,
    // quasi-triangle constant of the gauge and a bound on each frame's region
    quasi: f64,
    region: Vec<f64>,
    gl: GaussLegendre<f64>,
    max_depth: usize,
}

impl CellGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn point(&self, k: usize, v: f64, p: [f64; 2]) -> Vec<f64> {
        let mut s = self.a.exp_log(v).mul_vec(&theta(self.d, p));
        for (x, o) in s.iter_mut().zip(&self.frames[k].center) {
            *x += o;
        }
        s
    }

    fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.gauge.eval(&diff)
    }

    fn owner(&self, s: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (k, f) in self.frames.iter().enumerate() {
            let val = self.dist(s, &f.center) / f.weight;
            if val < best_val {
                best_val = val;
                best = k;
            }
        }
        best
    }

    fn volume(&self, v: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let radial = ((self.q * v[1]).exp() - (self.q * v[0]).exp()) / self.q;
        radial * angular_measure(self.a.matrix(), self.d, lo, hi, &self.gl)
    }

    /// Sub-nodes of a cell with their volumes: two Gauss points in `v` times
    /// the halves of each angular parameter. Nodes of a clipped cell that fall
    /// outside its frame's region are dropped.
    pub(crate) fn nodes(&self, c: &Cell) -> Vec<(Vec<f64>, f64)> {
        self.nodes_n(c, 2)
    }

    fn nodes_n(&self, c: &Cell, n: usize) -> Vec<(Vec<f64>, f64)> {
        let (v0, v1) = (c.v[0], c.v[1]);
        let gl = GaussLegendre::<f64>::new(n);
        let split = |a: f64, b: f64| {
            (0..n)
                .map(|i| {
                    [
                        a + (b - a) * i as f64 / n as f64,
                        a + (b - a) * (i + 1) as f64 / n as f64,
                    ]
                })
                .collect::<Vec<_>>()
        };
        let active = self.d.min(3) - 1;
        let p0 = if active >= 1 {
            split(c.lo[0], c.hi[0])
        } else {
            vec![[c.lo[0], c.hi[0]]]
        };
        let p1 = if active >= 2 {
            split(c.lo[1], c.hi[1])
        } else {
            vec![[c.lo[1], c.hi[1]]]
        };
        let mut out = Vec::with_capacity(n * p0.len() * p1.len());
        for a0 in &p0 {
            for a1 in &p1 {
                let (lo, hi) = ([a0[0], a1[0]], [a0[1], a1[1]]);
                let meas = angular_measure(self.a.matrix(), self.d, lo, hi, &self.gl);
                let pm = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
                for (x, w) in gl.mapped(v0, v1) {
                    let s = self.point(c.frame, x, pm);
                    if c.partial && self.owner(&s) != c.frame {
                        continue;
                    }
                    out.push((s, w * (self.q * x).exp() * meas));
                }
            }
        }
        out
    }

    fn owner_among(&self, s: &[f64], cand: &[usize]) -> usize {
        let mut best = cand[0];
        let mut best_val = f64::INFINITY;
        for &k in cand {
            let f = &self.frames[k];
            let val = self.dist(s, &f.center) / f.weight;
            if val < best_val {
                best_val = val;
                best = k;
            }
        }
        best
    }

    /// Accumulates the part of the box owned by frame `k`, bisecting boxes
    /// whose samples disagree (or where another frame may hide). `cand` holds
    /// the frames that can own any point of the enclosing box.
    #[allow(clippy::too_many_arguments)]
    fn clip(
        &self,
        k: usize,
        v: [f64; 2],
        lo: [f64; 2],
        hi: [f64; 2],
        depth: usize,
        cand: &[usize],
        acc: &mut Owned,
    ) {
        let active = self.d.min(3);
        let axis = |j: usize, t: usize| -> f64 {
            let (a, b) = if j == 0 {
                (v[0], v[1])
            } else {
                (lo[j - 1], hi[j - 1])
            };
            a + (b - a) * t as f64 / 2.0
        };
        let vm = (v[0] + v[1]) / 2.0;
        let pm = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let center = self.point(k, vm, pm);
        let n_samples = 3usize.pow(active as u32);
        let mut samples = Vec::with_capacity(n_samples);
        let mut reach: f64 = 0.0;
        for idx in 0..n_samples {
            let (mut rest, mut c) = (idx, [0usize; 3]);
            for cj in c.iter_mut().take(active) {
                *cj = rest % 3;
                rest /= 3;
            }
            let vv = axis(0, c[0]);
            let pp = [
                if active > 1 { axis(1, c[1]) } else { lo[0] },
                if active > 2 { axis(2, c[2]) } else { lo[1] },
            ];
            let s = self.point(k, vv, pp);
            reach = reach.max(self.dist(&s, &center));
            samples.push(s);
        }
        // score bounds over the box via the quasi-triangle inequality around
        // the box centre; frames that cannot win anywhere in it are dropped
        let k_q = self.quasi;
        let reach = 1.25 * reach;
        let dcs: Vec<f64> = cand
            .iter()
            .map(|&j| self.dist(&self.frames[j].center, &center))
            .collect();
        let best_upper = cand
            .iter()
            .zip(&dcs)
            .map(|(&j, dc)| k_q * (reach + dc) / self.frames[j].weight)
            .fold(f64::INFINITY, f64::min);
        let mut near: Vec<usize> = cand
            .iter()
            .zip(&dcs)
            .filter(|&(&j, &dc)| {
                (dc / k_q - reach).max(0.0) / self.frames[j].weight <= best_upper
                    && (j == k || dc <= k_q * (reach + self.region[j]))
            })
            .map(|(&j, _)| j)
            .collect();
        if near.is_empty() {
            near.push(k);
        }
        let owners: Vec<usize> = samples.iter().map(|s| self.owner_among(s, &near)).collect();
        let uniform = owners.iter().all(|&o| o == owners[0]);
        let intruder = near.iter().any(|&j| j != owners[0]);
        let vol = self.volume(v, lo, hi);
        if (uniform && !intruder) || depth >= self.max_depth {
            acc.total += vol;
            let own = if uniform {
                owners[0] == k
            } else {
                self.owner_among(&center, &near) == k
            };
            if own {
                acc.volume += vol;
                acc.v += vol * vm;
                acc.p[0] += vol * pm[0];
                acc.p[1] += vol * pm[1];
            }
            return;
        }
        let halves = |a: f64, b: f64| [[a, (a + b) / 2.0], [(a + b) / 2.0, b]];
        let vs = halves(v[0], v[1]);
        let p0 = if active > 1 {
            halves(lo[0], hi[0]).to_vec()
        } else {
            vec![[lo[0], hi[0]]]
        };
        let p1 = if active > 2 {
            halves(lo[1], hi[1]).to_vec()
        } else {
            vec![[lo[1], hi[1]]]
        };
        for vv in vs {
            for a0 in &p0 {
                for a1 in &p1 {
                    self.clip(k, vv, [a0[0], a1[0]], [a0[1], a1[1]], depth + 1, &near, acc);
                }
            }
        }
    }
}

/// Builds the cells of all frames for the exponent `a`.
pub(crate) fn build_cells(
    a: &OperatorSpec<f64>,
    frames: &[FrameSpec],
    settings: &GridSettings,
) -> Result<CellGrid> {
    let d = a.dim();
    if d == 0 || d > 3 {
        return Err(Error::Unsupported(format!(
            "field simulation supports d = 1, 2, 3 (got {d})"
        )));
    }
    let mut grid = CellGrid {
        cells: Vec::new(),
        a: a.clone(),
        d,
        q: a.trace(),
        gauge: Gauge::new(a)?,
        frames: frames.to_vec(),
        quasi: 4.0,
        region: Vec::new(),
        gl: GaussLegendre::<f64>::new(4),
        max_depth: settings.clip_depth,
    };
    grid.quasi = grid.gauge.quasi_constant();
    grid.region = region_bounds(&grid);
    let dv = settings.dv();
    let boxes = angular_boxes(d, settings.angular.max(1));
    let measures: Vec<f64> = boxes
        .iter()
        .map(|b| angular_measure(a.matrix(), d, b.lo, b.hi, &grid.gl))
        .collect();
    let single = frames.len() == 1;

    let all: Vec<usize> = (0..frames.len()).collect();
    let mut cells = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let mut empty_run = 0;
        for i in f.i_lo..f.i_hi {
            let v0 = i as f64 * dv;
            let v1 = v0 + dv;
            let mut ring_kept = 0usize;
            let ex = a.exp_log(v0 + dv / 2.0);
            for (b, meas) in boxes.iter().zip(&measures) {
                let full = |c: &mut Vec<Cell>| {
                    let mut center = ex.mul_vec(&theta(d, mid(b)));
                    for (x, o) in center.iter_mut().zip(&f.center) {
                        *x += o;
                    }
                    let radial = ((grid.q * v1).exp() - (grid.q * v0).exp()) / grid.q;
                    c.push(Cell {
                        center,
                        volume: radial * meas,
                        frame: k,
                        v: [v0, v1],
                        lo: b.lo,
                        hi: b.hi,
                        partial: false,
                    });
                };
                if single {
                    full(&mut cells);
                    ring_kept += 1;
                    continue;
                }
                let mut acc = Owned::default();
                grid.clip(k, [v0, v1], b.lo, b.hi, 0, &all, &mut acc);
                if acc.volume <= 0.0 {
                    continue;
                }
                ring_kept += 1;
                if acc.volume >= acc.total * (1.0 - 1e-12) {
                    full(&mut cells);
                } else {
                    let pc = [acc.p[0] / acc.volume, acc.p[1] / acc.volume];
                    let center = grid.point(k, acc.v / acc.volume, pc);
                    cells.push(Cell {
                        center,
                        volume: acc.volume,
                        frame: k,
                        v: [v0, v1],
                        lo: b.lo,
                        hi: b.hi,
                        partial: true,
                    });
                }
            }
            if cells.len() > settings.max_cells {
                return Err(Error::ResourceLimit(format!(
                    "integration grid exceeds {} cells; coarsen the resolution or shrink the domain",
                    settings.max_cells
                )));
            }
            if ring_kept == 0 {
                empty_run += 1;
                if f.stop_when_empty && empty_run >= 2 && v0 > f.weight.ln() {
                    break;
                }
            } else {
                empty_run = 0;
            }
        }
    }
    grid.cells = cells;
    Ok(grid)
}

/// Gauge radius around each centre containing the frame's region, from the
/// comparison with the heaviest frame, whose own region is unbounded.
fn region_bounds(grid: &CellGrid) -> Vec<f64> {
    let frames = &grid.frames;
    let m = (0..frames.len())
        .max_by(|&i, &j| frames[i].weight.total_cmp(&frames[j].weight))
        .unwrap_or(0);
    let k = grid.quasi;
    frames
        .iter()
        .enumerate()
        .map(|(j, f)| {
            if j == m {
                return f64::INFINITY;
            }
            let wm = frames[m].weight;
            if wm <= k * f.weight {
                return f64::INFINITY;
            }
            k * f.weight * grid.dist(&f.center, &frames[m].center) / (wm - k * f.weight)
        })
        .collect()
}

/// Lattice index range `[floor(lo/dv), ceil(hi/dv))`.
pub(crate) fn index_range(lo: f64, hi: f64, dv: f64) -> (i64, i64) {
    // snap values that are lattice points up to round-off
    let snap = |x: f64| {
        let r = x / dv;
        if (r - r.round()).abs() < 1e-9 {
            r.round()
        } else {
            r
        }
    };
    (snap(lo).floor() as i64, snap(hi).ceil() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::f64::consts::PI;

    #[test]
    fn single_frame_volume_is_exact() {
        // cells of one frame over v ∈ [i_lo dv, i_hi dv) tile e^{vE}(ball) minus e^{v0 E}(ball)
        for e in [
            OperatorSpec::from_diag(&[1.0, 2.0]).unwrap(),
            OperatorSpec::new(Matrix::from_rows(&[vec![1.0, 0.4], vec![0.0, 1.5]]).unwrap())
                .unwrap(),
        ] {
            let s = GridSettings::for_dim(2);
            let dv = s.dv();
            let f = FrameSpec {
                center: vec![0.0, 0.0],
                weight: 1.0,
                i_lo: -6,
                i_hi: 9,
                stop_when_empty: false,
            };
            let cells = build_cells(&e, &[f], &s).unwrap().cells;
            let vol: f64 = cells.iter().map(|c| c.volume).sum();
            // Lebesgue measure of e^{vE}B is e^{qv} π
            let q = e.trace();
            let exact = PI * ((q * 9.0 * dv).exp() - (q * -6.0 * dv).exp());
            assert!((vol - exact).abs() < 1e-10 * exact, "{vol} vs {exact}");
        }
        let e = OperatorSpec::scalar(0.7, 1).unwrap();
        let s = GridSettings::for_dim(1);
        let f = FrameSpec {
            center: vec![0.5],
            weight: 1.0,
            i_lo: -32,
            i_hi: 16,
            stop_when_empty: false,
        };
        let cells = build_cells(&e, &[f], &s).unwrap().cells;
        let vol: f64 = cells.iter().map(|c| c.volume).sum();
        let exact = 2.0 * ((0.7 * 16.0 * s.dv()).exp() - (0.7 * -32.0 * s.dv()).exp());
        assert!((vol - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn clipped_frames_cover_without_double_counting() {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let s = GridSettings::for_dim(2);
        let dv = s.dv();
        let gauge = Gauge::new(&e).unwrap();
        let t = vec![1.0, 0.5];
        let wt = gauge.eval(&t);
        let hi = (2.0 * wt).ln() + 3.0;
        let (lo0, hi0) = index_range((2.0 * wt).ln() - 8.0, hi, dv);
        let (lo1, hi1) = index_range(wt.ln() - 8.0, hi, dv);
        let frames = vec![
            FrameSpec {
                center: vec![0.0, 0.0],
                weight: 2.0 * wt,
                i_lo: lo0,
                i_hi: hi0,
                stop_when_empty: false,
            },
            FrameSpec {
                center: t.clone(),
                weight: wt,
                i_lo: lo1,
                i_hi: hi1,
                stop_when_empty: true,
            },
        ];
        let cells = build_cells(&e, &frames, &s).unwrap().cells;
        // total volume ≈ volume of the outer ellipse-like region of frame 0
        let vol: f64 = cells.iter().map(|c| c.volume).sum();
        let exact = PI * (3.0 * hi0 as f64 * dv).exp();
        assert!((vol / exact - 1.0).abs() < 0.02, "{vol} vs {exact}");
        // the neighbourhood of t is resolved finely
        let near = cells
            .iter()
            .filter(|c| (c.center[0] - t[0]).abs() < 1e-3 && (c.center[1] - t[1]).abs() < 1e-3)
            .count();
        assert!(near > 10);
    }

    #[test]
    fn scaling_maps_cells_onto_cells() {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let s = GridSettings::for_dim(2);
        let dv = s.dv();
        let gauge = Gauge::new(&e).unwrap();
        let build = |t: &[f64]| {
            let wt = gauge.eval(t);
            let (lo0, hi0) = index_range((2.0 * wt).ln() - 4.0, (2.0 * wt).ln() + 2.0, dv);
            let (lo1, hi1) = index_range(wt.ln() - 4.0, wt.ln() + 2.0, dv);
            let frames = vec![
                FrameSpec {
                    center: vec![0.0, 0.0],
                    weight: 2.0 * wt,
                    i_lo: lo0,
                    i_hi: hi0,
                    stop_when_empty: false,
                },
                FrameSpec {
                    center: t.to_vec(),
                    weight: wt,
                    i_lo: lo1,
                    i_hi: hi1,
                    stop_when_empty: true,
                },
            ];
            build_cells(&e, &frames, &s).unwrap().cells
        };
        let t = [0.8, -0.6];
        let r: f64 = 2.0;
        let rt = [r * t[0], r * r * t[1]];
        let a = build(&t);
        let b = build(&rt);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((y.volume / x.volume - r.powi(3)).abs() < 1e-9 * r.powi(3));
            assert!((y.center[0] - r * x.center[0]).abs() < 1e-9 * (1.0 + y.center[0].abs()));
            assert!((y.center[1] - r * r * x.center[1]).abs() < 1e-9 * (1.0 + y.center[1].abs()));
        }
    }
}
