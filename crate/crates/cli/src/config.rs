//! The TOML experiment document and its validation.

use std::fmt::Write as _;

use clap::ValueEnum;
use opfield_core::field::hash_text;
use opfield_core::generators::atoms_on_sphere;
use opfield_core::{
    commutes, EvalGrid, FieldConfig, GeneratorSpec, GridSettings, HomogeneousFn, Matrix,
    OperatorSpec, Representation,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Check,
    VerifyOss,
    VerifyIncrements,
    VerifyStability,
    EstimateHolder,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Check => "check",
            Command::VerifyOss => "verify-oss",
            Command::VerifyIncrements => "verify-increments",
            Command::VerifyStability => "verify-stability",
            Command::EstimateHolder => "estimate-holder",
        }
    }
}

/// A matrix written as a scalar (times the identity), a diagonal, or rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn dim(&self) -> Option<usize> {
        match self {
            MatrixSpec::Scalar(_) => None,
            MatrixSpec::Diagonal(d) => Some(d.len()),
            MatrixSpec::Rows(r) => Some(r.len()),
        }
    }

    fn build(&self, n: usize, name: &str) -> Result<OperatorSpec<f64>, String> {
        let op = match self {
            MatrixSpec::Scalar(a) => OperatorSpec::scalar(*a, n),
            MatrixSpec::Diagonal(d) => OperatorSpec::from_diag(d),
            MatrixSpec::Rows(r) => Matrix::from_rows(r).and_then(OperatorSpec::new),
        }
        .map_err(|e| format!("{name}: {e}"))?;
        if op.dim() != n {
            return Err(format!(
                "{name}: expected a {n}x{n} matrix, got {0}x{0}",
                op.dim()
            ));
        }
        Ok(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepresentationName {
    MovingAverage,
    Harmonizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub representation: RepresentationName,
    /// Spatial dimension; needed only when `E` is a scalar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(rename = "E")]
    pub e: MatrixSpec,
    /// Either `D` or `c` (for `D = cB`).
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorModeName {
    PerComponent,
    ComplexIsotropic,
    Gaussian,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub mode: GeneratorModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Exponent `B` of a spectral or Gaussian generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<MatrixSpec>,
    /// Spectral directions, projected onto the unit sphere of `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKindName {
    PowerSum,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSection {
    #[serde(default = "default_phi_kind")]
    pub kind: PhiKindName,
    /// Power-sum exponents `a_j`; default is the diagonal of `E`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl Default for PhiSection {
    fn default() -> Self {
        Self {
            kind: PhiKindName::PowerSum,
            powers: None,
            beta: 1.0,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_per_octave: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Opfd,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    /// Shifts `h` for the increment test; default is the unit vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_n_fold")]
    pub n_fold: Vec<usize>,
    /// Slope tolerance of the Hölder estimate.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Same-law comparisons run alongside a two-sample test.
    #[serde(default)]
    pub calibration_runs: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            probes: default_probes(),
            r_values: default_r_values(),
            shifts: None,
            n_fold: default_n_fold(),
            tolerance: default_tolerance(),
            calibration_runs: 0,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Kernel parameter `t`; default `e_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

fn default_phi_kind() -> PhiKindName {
    PhiKindName::PowerSum
}
fn one() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    1000
}
fn default_probes() -> usize {
    10
}
fn default_r_values() -> Vec<f64> {
    vec![0.5, 2.0]
}
fn default_n_fold() -> Vec<usize> {
    vec![2, 16]
}
fn default_tolerance() -> f64 {
    0.1
}
fn default_formats() -> Vec<Format> {
    vec![Format::Opfd, Format::Csv]
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    pub field: FieldSection,
    pub generator: GeneratorSection,
    #[serde(default)]
    pub phi: PhiSection,
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<ResolutionSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub check: CheckSection,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub doc: ConfigDoc,
    pub field: FieldConfig,
}

impl ExperimentConfig {
    pub fn command(&self) -> Option<Command> {
        self.doc.command
    }

    pub fn run(&self) -> &RunSection {
        &self.doc.run
    }

    /// Increment shifts, defaulting to the unit vectors.
    pub fn shifts(&self) -> Vec<Vec<f64>> {
        self.doc.run.shifts.clone().unwrap_or_else(|| {
            let d = self.field.space_dim();
            (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        })
    }

    /// Applies a seed override.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.doc.seed = seed;
        self.field = self.field.with_seed(seed);
        self
    }

    /// Hash of everything that determines the outputs.
    pub fn hash(&self) -> u64 {
        let mut s = self.field.canonical();
        let r = &self.doc.run;
        let _ = writeln!(s, "command={:?}", self.doc.command.map(|c| c.as_str()));
        let _ = writeln!(
            s,
            "run=replicates:{};probes:{};r:{:?};shifts:{:?};n_fold:{:?};tol:{:?};calibration:{};formats:{:?}",
            r.replicates,
            r.probes,
            r.r_values,
            self.shifts(),
            r.n_fold,
            r.tolerance,
            r.calibration_runs,
            r.formats
        );
        let _ = writeln!(s, "check={:?}", self.doc.check);
        hash_text(&s)
    }
}

/// Parses and validates a TOML experiment document. Validation problems of
/// all sections are reported together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    from_doc(parse_doc(text)?)
}

/// Parses the document without validating it.
pub fn parse_doc(text: &str) -> Result<ConfigDoc, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Syntax("empty configuration document".into()));
    }
    toml::from_str(text).map_err(|e| CliError::Syntax(e.to_string()))
}

/// Canonical TOML form of the document.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(&cfg.doc).expect("config document serializes")
}

pub fn from_doc(doc: ConfigDoc) -> Result<ExperimentConfig, CliError> {
    let mut errors = Vec::new();
    let field = build_field(&doc, &mut errors);
    check_run(&doc, field.as_ref(), &mut errors);
    match field {
        Some(field) if errors.is_empty() => Ok(ExperimentConfig { doc, field }),
        _ => Err(CliError::Config(errors)),
    }
}

fn build_field(doc: &ConfigDoc, errors: &mut Vec<String>) -> Option<FieldConfig> {
    let f = &doc.field;
    let representation = match f.representation {
        RepresentationName::MovingAverage => Representation::MovingAverage,
        RepresentationName::Harmonizable => Representation::Harmonizable,
    };
    let d = match (f.e.dim(), f.dim) {
        (Some(n), Some(k)) if n != k => {
            errors.push(format!("field.dim = {k} disagrees with E ({n}x{n})"));
            return None;
        }
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => {
            errors.push("field.dim is required when E is a scalar".into());
            return None;
        }
    };
    let e = record(errors, f.e.build(d, "E"));
    let gen = record(errors, build_generator(&doc.generator, representation));
    let (e, gen) = (e?, gen?);
    let m = match representation {
        Representation::MovingAverage => gen.dim(),
        Representation::Harmonizable => gen.dim() / 2,
    };
    let b = OperatorSpec::new(Matrix::from_fn(m, m, |i, j| {
        gen.exponent().matrix()[(i, j)]
    }))
    .ok()?;
    let dop = match (&f.d, f.c) {
        (Some(_), Some(_)) => {
            errors.push("give either D or c (for D = cB), not both".into());
            None
        }
        (Some(spec), None) => record(errors, spec.build(m, "D")),
        (None, Some(c)) => record(errors, b.scale(c).map_err(|e| format!("D = cB: {e}"))),
        (None, None) => {
            errors.push("field.D or field.c is required".into());
            None
        }
    }?;
    let phi_exp = match representation {
        Representation::MovingAverage => e.clone(),
        Representation::Harmonizable => e.transpose(),
    };
    let phi = record(errors, build_phi(&doc.phi, &phi_exp))?;
    let grid = record(errors, build_grid(&doc.grid))?;
    let mut cfg = match FieldConfig::new(representation, e, dop, gen, phi, grid, doc.seed) {
        Ok(c) => c,
        Err(err) => {
            errors.push(err.to_string());
            return None;
        }
    };
    if let Some(r) = &doc.resolution {
        let mut s = GridSettings::for_dim(d);
        s.radial_per_octave = r.radial_per_octave.unwrap_or(s.radial_per_octave);
        s.angular = r.angular.unwrap_or(s.angular);
        s.clip_depth = r.clip_depth.unwrap_or(s.clip_depth);
        s.tail_tol = r.tail_tol.unwrap_or(s.tail_tol);
        s.max_cells = r.max_cells.unwrap_or(s.max_cells);
        s.refine = r.refine.unwrap_or(s.refine);
        if s.radial_per_octave == 0 || s.angular == 0 || !(s.tail_tol > 0.0 && s.tail_tol < 1.0) {
            errors.push(
                "resolution: radial_per_octave and angular must be positive, 0 < tail_tol < 1"
                    .into(),
            );
            return None;
        }
        cfg = cfg.with_resolution(s);
    }
    Some(cfg)
}

fn record<T>(errors: &mut Vec<String>, r: Result<T, String>) -> Option<T> {
    r.map_err(|e| errors.push(e)).ok()
}

fn build_generator(g: &GeneratorSection, rep: Representation) -> Result<GeneratorSpec, String> {
    let need_alphas = || {
        g.alphas
            .clone()
            .ok_or_else(|| "generator.alphas is required for this mode".to_string())
    };
    let err = |e: opfield_core::Error| format!("generator: {e}");
    let mut gen = match g.mode {
        GeneratorModeName::PerComponent => {
            GeneratorSpec::per_component(&need_alphas()?).map_err(err)?
        }
        GeneratorModeName::ComplexIsotropic => {
            GeneratorSpec::complex_isotropic(&need_alphas()?).map_err(err)?
        }
        GeneratorModeName::Gaussian => {
            let q = g
                .covariance
                .as_ref()
                .ok_or("generator.covariance is required for a Gaussian generator")?;
            let q = Matrix::from_rows(q).map_err(err)?;
            match &g.exponent {
                Some(b) => GeneratorSpec::gaussian_with_exponent(
                    q.clone(),
                    b.build(q.rows(), "generator.exponent")?,
                ),
                None => GeneratorSpec::gaussian(q),
            }
            .map_err(err)?
        }
        GeneratorModeName::Spectral => {
            let dirs = g
                .directions
                .as_ref()
                .ok_or("generator.directions is required for a spectral generator")?;
            let m = dirs.first().map_or(0, Vec::len);
            let b = g
                .exponent
                .as_ref()
                .ok_or("generator.exponent is required for a spectral generator")?;
            let b = b.build(m, "generator.exponent")?;
            let weights = g
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / dirs.len() as f64; dirs.len()]);
            let atoms = atoms_on_sphere(&b, dirs, &weights).map_err(err)?;
            GeneratorSpec::spectral(b, atoms).map_err(err)?
        }
    };
    if let Some(n) = g.terms {
        gen = gen.with_terms(n);
    }
    if rep == Representation::Harmonizable && g.mode != GeneratorModeName::ComplexIsotropic {
        log::warn!("harmonizable field with a generator that is not complex isotropic");
    }
    Ok(gen)
}

fn build_phi(p: &PhiSection, exponent: &OperatorSpec<f64>) -> Result<HomogeneousFn<f64>, String> {
    let err = |e: opfield_core::Error| format!("phi: {e}");
    let phi = match p.kind {
        PhiKindName::PowerSum => {
            let powers = match &p.powers {
                Some(pw) => pw.clone(),
                None if exponent.is_diagonal() => exponent.matrix().diag(),
                None => {
                    return Err(
                        "phi: power sums need a diagonal exponent; use kind = \"tau\"".into(),
                    )
                }
            };
            HomogeneousFn::power_sum(&powers, p.beta).map_err(err)?
        }
        PhiKindName::Tau => HomogeneousFn::tau_radial(exponent, p.beta).map_err(err)?,
    };
    match p.scale {
        Some(c) => phi.scaled(c).map_err(err),
        None => Ok(phi),
    }
}

fn build_grid(g: &GridSection) -> Result<EvalGrid, String> {
    match (&g.points, &g.origin, &g.spacing, &g.dims) {
        (Some(p), None, None, None) => Ok(EvalGrid::Points(p.clone())),
        (None, Some(o), Some(s), Some(d)) => Ok(EvalGrid::Lattice {
            origin: o.clone(),
            spacing: s.clone(),
            dims: d.clone(),
        }),
        _ => Err("grid: give either points, or origin + spacing + dims".into()),
    }
}

fn check_run(doc: &ConfigDoc, field: Option<&FieldConfig>, errors: &mut Vec<String>) {
    let r = &doc.run;
    if r.replicates == 0 {
        errors.push("run.replicates must be positive".into());
    }
    if r.r_values.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        errors.push("run.r_values must be positive".into());
    }
    if r.n_fold.iter().any(|&n| n < 2) {
        errors.push("run.n_fold entries must be at least 2".into());
    }
    if !(r.tolerance > 0.0) {
        errors.push("run.tolerance must be positive".into());
    }
    let Some(field) = field else { return };
    if let Some(shifts) = &r.shifts {
        if shifts.iter().any(|h| h.len() != field.space_dim()) {
            errors.push(format!("run.shifts must have length {}", field.space_dim()));
        }
    }
    if let Some(t) = &doc.check.t {
        if t.len() != field.space_dim() {
            errors.push(format!("check.t must have length {}", field.space_dim()));
        }
    }
    if matches!(
        doc.command,
        Some(Command::VerifyOss | Command::VerifyStability)
    ) {
        if let Some(msg) = commuting_violation(field) {
            errors.push(msg);
        }
    }
}

/// `DB = BD` is the hypothesis of the operator-scaling and stability tests.
pub fn commuting_violation(field: &FieldConfig) -> Option<String> {
    match commutes(&field.d, &field.b(), 1e-9) {
        Ok(true) => None,
        Ok(false) => Some("hypothesis not met: operator scaling needs DB = BD".into()),
        Err(e) => Some(e.to_string()),
    }
}
