//! Operator-scaling stable random fields: operator algebra, generalized polar
//! coordinates, operator-stable generators, integrability checks, field
//! synthesis and statistical verification.

pub mod error;
pub mod field;
pub mod generators;
pub mod homogeneous;
pub mod integrability;
pub mod linalg;
pub mod operator;
pub mod polar;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use field::{
    discrete_log_cf, f_j_profile, harm_kernel, ma_kernel, simulate, simulate_ensemble,
    simulate_with_kernel, Ensemble, EvalGrid, FieldConfig, FieldKernel, FieldSample, GridSettings,
    Representation,
};
pub use generators::{
    make_complex_isotropic, sample_operator_stable, sample_sas, verify_ops_scaling, GeneratorMode,
    GeneratorSpec, SpectralAtom,
};
pub use homogeneous::{admissibility_probe, phi_extrema, phi_power_sum, HomogeneousFn, PhiKind};
pub use integrability::{
    check_sas_closed_form, check_sufficient_condition, check_three_integrals,
    validate_harm_parameters, validate_ma_parameters, Convergence, IntegrationDomain, KernelFamily,
    Verdict,
};
pub use linalg::Matrix;
pub use operator::{commutes, mat_exp, norm_bound, JordanBlock, OperatorSpec};
pub use polar::{a_norm, polar, tau_envelope, PolarDecomposition, PolarFrame};
pub use scalar::Real;
pub use verify::{
    calibrate, check_stochastic_continuity, estimate_holder, test_marginal_stability, test_oss,
    test_stationary_increments, CfDistanceReport, HolderReport,
};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Operator64 = OperatorSpec<f64>;
pub type Operator32 = OperatorSpec<f32>;
pub type PolarFrame64 = PolarFrame<f64>;
