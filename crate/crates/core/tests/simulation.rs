use opfield_core::field::MaKernel;
use opfield_core::verify::noise_floor;
use opfield_core::*;

fn scalar_ma(points: Vec<Vec<f64>>) -> FieldConfig {
    FieldConfig::new(
        Representation::MovingAverage,
        OperatorSpec::scalar(1.0, 1).unwrap(),
        OperatorSpec::scalar(0.4, 1).unwrap(),
        GeneratorSpec::per_component(&[1.5]).unwrap(),
        HomogeneousFn::power_sum(&[1.0], 1.0).unwrap(),
        EvalGrid::Points(points),
        21,
    )
    .unwrap()
}

struct Bump(f64);

impl FieldKernel for Bump {
    fn rows(&self) -> usize {
        1
    }
    fn cols(&self) -> usize {
        1
    }
    fn eval(&self, t: &[f64], s: &[f64]) -> Matrix<f64> {
        let g = |x: f64| (-self.0 * x * x).exp();
        Matrix::from_diag(&[g(t[0] - s[0]) - g(s[0])])
    }
}

struct Sum<'a>(&'a dyn FieldKernel, &'a dyn FieldKernel);

impl FieldKernel for Sum<'_> {
    fn rows(&self) -> usize {
        self.0.rows()
    }
    fn cols(&self) -> usize {
        self.0.cols()
    }
    fn eval(&self, t: &[f64], s: &[f64]) -> Matrix<f64> {
        let (a, b) = (self.0.eval(t, s), self.1.eval(t, s));
        Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + b[(i, j)])
    }
}

#[test]
fn midpoint_synthesis_is_linear_in_the_kernel() {
    let mut cfg = scalar_ma(vec![vec![0.5], vec![1.0], vec![-2.0]]);
    cfg.resolution.refine = false;
    let f = MaKernel::new(&cfg.e, &cfg.d, &cfg.b(), &cfg.phi).unwrap();
    let g = Bump(0.7);
    let fg = Sum(&f, &g);
    let a = simulate_with_kernel(&cfg, &f, 40).unwrap();
    let b = simulate_with_kernel(&cfg, &g, 40).unwrap();
    let c = simulate_with_kernel(&cfg, &fg, 40).unwrap();
    for r in 0..40 {
        for p in 0..3 {
            let (x, y, z) = (a.value(r, p, 0), b.value(r, p, 0), c.value(r, p, 0));
            assert!(
                (z - (x + y)).abs() <= 1e-12 * (x.abs() + y.abs()).max(1.0),
                "{z} vs {x} + {y}"
            );
        }
    }
}

#[test]
fn origin_is_exactly_zero() {
    let cfg = scalar_ma(vec![vec![0.0], vec![0.5]]);
    let ens = simulate_ensemble(&cfg, 64).unwrap();
    assert!((0..64).all(|r| ens.value(r, 0, 0) == 0.0));
    assert!((0..64).any(|r| ens.value(r, 1, 0) != 0.0));
}

#[test]
fn halving_the_mesh_moves_the_law_below_the_noise_floor() {
    let base = scalar_ma(vec![vec![1.0], vec![-0.3]]);
    let ma2 = {
        let e = OperatorSpec::from_diag(&[1.0, 2.0]).unwrap();
        let mut c = FieldConfig::new(
            Representation::MovingAverage,
            e,
            OperatorSpec::scalar(0.5, 2).unwrap(),
            GeneratorSpec::per_component(&[1.5, 1.5]).unwrap(),
            HomogeneousFn::power_sum(&[1.0, 2.0], 1.0).unwrap(),
            EvalGrid::Points(vec![vec![1.0, 0.5]]),
            1,
        )
        .unwrap();
        c.resolution.radial_per_octave = 2;
        c.resolution.angular = 12;
        c
    };
    let floor = noise_floor(10_000);
    for (cfg, probes) in [
        (base, vec![vec![0.5, 0.0], vec![0.0, 1.0], vec![0.8, -0.8]]),
        (ma2, vec![vec![0.3, 0.0], vec![0.0, 0.4], vec![0.2, 0.2]]),
    ] {
        let mut fine = cfg.clone();
        fine.resolution.radial_per_octave *= 2;
        for u in &probes {
            let a = discrete_log_cf(&cfg, u).unwrap().exp();
            let b = discrete_log_cf(&fine, u).unwrap().exp();
            assert!((a - b).abs() < floor, "u={u:?}: {a} vs {b}");
        }
    }
}

#[test]
fn f_j_profile_matches_closed_form_on_a_line() {
    let alphas = [1.2, 1.8];
    let dd = [0.5 / 1.2, 0.5 / 1.8];
    let cfg = FieldConfig::new(
        Representation::Harmonizable,
        OperatorSpec::scalar(1.0, 1).unwrap(),
        OperatorSpec::from_diag(&dd).unwrap(),
        make_complex_isotropic(&alphas).unwrap(),
        HomogeneousFn::power_sum(&[1.0], 1.0).unwrap(),
        EvalGrid::Points(vec![vec![1.0]]),
        1,
    )
    .unwrap();
    for s in [-3.0, 0.2, 5.0f64] {
        for j in 0..2 {
            let want = s.abs().powf(-(dd[j] + 1.0 / alphas[j]));
            let got = f_j_profile(&cfg, j, &[s]).unwrap();
            assert!((got / want - 1.0).abs() < 1e-12);
        }
    }
}
