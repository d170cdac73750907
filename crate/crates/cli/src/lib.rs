//! Configuration, orchestration and export for the `opfield` command.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use opfield_core::field::{write_csv, write_opfd, HarmKernel, MaKernel};
use opfield_core::integrability::{
    check_sas_closed_form, check_sufficient_condition, check_three_integrals,
};
use opfield_core::verify::{calibrate, CfDistanceReport};
use opfield_core::{
    estimate_holder, simulate_ensemble, test_marginal_stability, test_oss,
    test_stationary_increments, EvalGrid, GeneratorMode, IntegrationDomain, KernelFamily,
    Representation, Verdict,
};
use thiserror::Error;

pub use config::{parse_config, serialize_config, Command, ExperimentConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] opfield_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(opfield_core::Error::Io(_)) => EXIT_IO,
            CliError::Core(opfield_core::Error::Numerical(_)) => EXIT_FAIL,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    /// One line per verdict.
    pub verdicts: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Reads and validates a config file for `command`, applying a seed override.
pub fn load(
    path: &Path,
    command: Command,
    seed: Option<u64>,
) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut doc = config::parse_doc(&text)?;
    match doc.command {
        Some(c) if c != command => {
            return Err(CliError::Config(vec![format!(
                "config is for `{}` but `{}` was requested",
                c.as_str(),
                command.as_str()
            )]))
        }
        _ => doc.command = Some(command),
    }
    if let Some(s) = seed {
        doc.seed = s;
    }
    config::from_doc(doc)
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let command = cfg.command().unwrap_or(Command::Simulate);
    match command {
        Command::Simulate => run_simulate(cfg, out),
        Command::Check => run_check(cfg, out),
        Command::VerifyOss | Command::VerifyIncrements | Command::VerifyStability => {
            run_verify(cfg, command, out)
        }
        Command::EstimateHolder => run_holder(cfg, out),
    }
}

fn write_file(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, text).map_err(io_err(&path))?;
    files.push(path);
    Ok(())
}

fn header(cfg: &ExperimentConfig, command: Command) -> String {
    let mut s = String::from("[run]\n");
    let _ = writeln!(s, "command={}", command.as_str());
    let _ = writeln!(s, "config_hash=0x{:016x}", cfg.field.config_hash());
    let _ = writeln!(s, "experiment_hash=0x{:016x}", cfg.hash());
    let _ = writeln!(s, "seed={}", cfg.field.seed);
    let _ = writeln!(s, "representation={}", cfg.field.representation.as_str());
    s.push('\n');
    s
}

fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let ens = simulate_ensemble(&cfg.field, cfg.run().replicates)?;
    let mut files = Vec::new();
    for f in &cfg.run().formats {
        match f {
            config::Format::Opfd => {
                if !matches!(cfg.field.grid, EvalGrid::Lattice { .. }) {
                    log::warn!("OPFD rasters need a lattice grid; skipping the raster");
                    continue;
                }
                let path = out.join("field.opfd");
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                let mut w = BufWriter::new(file);
                write_opfd(&mut w, &ens, &cfg.field.grid)?;
                w.flush().map_err(io_err(&path))?;
                files.push(path);
            }
            config::Format::Csv => {
                let path = out.join("field.csv");
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                let mut w = BufWriter::new(file);
                write_csv(&mut w, &ens)?;
                w.flush().map_err(io_err(&path))?;
                files.push(path);
            }
        }
    }
    let mut report = header(cfg, Command::Simulate);
    let _ = writeln!(report, "[report]\ntest=simulate\nverdict=pass");
    let _ = writeln!(report, "points={}", ens.n_points());
    let _ = writeln!(report, "components={}", ens.m);
    let _ = writeln!(report, "replicates={}", ens.n_replicates);
    let _ = writeln!(report, "cells={}", ens.n_cells);
    write_file(out.join("report.txt"), &report, &mut files)?;
    Ok(Outcome {
        pass: true,
        files,
        verdicts: vec![format!(
            "simulate: {} replicates x {} points",
            ens.n_replicates,
            ens.n_points()
        )],
    })
}

fn run_check(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let f = &cfg.field;
    let chk = &cfg.doc.check;
    let t = chk.t.clone().unwrap_or_else(|| {
        let mut v = vec![0.0; f.space_dim()];
        v[0] = 1.0;
        v
    });
    let mut dom = IntegrationDomain::default();
    if let Some(tol) = chk.tol {
        dom.tol = tol;
    }
    let b = f.b();
    let kernel: Box<dyn KernelFamily> = match f.representation {
        Representation::MovingAverage => Box::new(MaKernel::new(&f.e, &f.d, &b, &f.phi)?.at(&t)),
        Representation::Harmonizable => Box::new(HarmKernel::new(&f.e, &f.d, &b, &f.phi)?.at(&t)),
    };
    let gb = f.generator.exponent();
    let symmetric = gb.matrix().is_symmetric(1e-12);
    let delta1 = chk.delta1.unwrap_or(if symmetric {
        0.0
    } else {
        0.01 / gb.lambda_max()
    });
    let delta2 = chk.delta2.unwrap_or(if symmetric { 0.0 } else { 0.01 });
    let radius = chk.radius.unwrap_or(1.0);

    let mut report = header(cfg, Command::Check);
    let _ = writeln!(report, "[report]\ntest=check");
    let gate = match f.representation {
        Representation::MovingAverage => {
            let g = opfield_core::validate_ma_parameters(&f.e, &f.d, gb, f.phi.beta())?;
            format!(
                "lower_margin={:.6}\nupper_margin={:.6}\nfull={}\ngate={}",
                g.lower_margin,
                g.upper_margin,
                g.full,
                if g.pass { "pass" } else { "fail" }
            )
        }
        Representation::Harmonizable => {
            let g = opfield_core::validate_harm_parameters(&f.e, &f.d)?;
            format!(
                "margin={:.6}\ngate={}",
                g.margin,
                if g.pass { "pass" } else { "fail" }
            )
        }
    };
    let suff = check_sufficient_condition(kernel.as_ref(), gb, delta1, delta2, radius, &dom)?;
    let three = check_three_integrals(kernel.as_ref(), &f.generator, &dom)?;
    let suff_verdict = suff.convergence.verdict();
    let consistent = !(suff_verdict == Verdict::Pass && three.verdict == Verdict::Fail);
    let mut body = String::new();
    let _ = writeln!(body, "t={}", join(&t));
    let _ = writeln!(body, "{gate}");
    let _ = writeln!(body, "\n[sufficient_condition]");
    let _ = writeln!(body, "delta1={delta1}\ndelta2={delta2}\nradius={radius}");
    let _ = writeln!(body, "value={:.9e}", suff.value);
    let _ = writeln!(body, "convergence={}", suff.convergence.as_str());
    let _ = writeln!(body, "verdict={}", suff_verdict.as_str());
    let _ = writeln!(body, "\n[three_integrals]");
    let _ = writeln!(body, "gamma_f={:.9e}", three.gamma_f);
    if let Some(q) = three.q_f_trace {
        let _ = writeln!(body, "q_f_trace={q:.9e}");
    }
    if let Some(l) = three.l_f {
        let _ = writeln!(body, "l_f={l:.9e}");
    }
    let _ = writeln!(body, "convergence={}", three.estimate.convergence.as_str());
    let _ = writeln!(body, "verdict={}", three.verdict.as_str());
    // SαS laws: L_f = 2/(2 − α) times the closed form
    if let (GeneratorMode::PerComponent { alphas }, Some(l_f)) = (f.generator.mode(), three.l_f) {
        if alphas.windows(2).all(|w| w[0] == w[1]) {
            let alpha = alphas[0];
            let atoms = f.generator.spectral_atoms(64)?;
            let cf = check_sas_closed_form(kernel.as_ref(), alpha, &atoms, &dom)?;
            let scaled = 2.0 / (2.0 - alpha) * cf.value;
            let _ = writeln!(body, "\n[sas_closed_form]");
            let _ = writeln!(body, "value={:.9e}", cf.value);
            let _ = writeln!(body, "scaled={scaled:.9e}");
            let _ = writeln!(
                body,
                "relative_difference={:.6e}",
                (l_f - scaled).abs() / scaled.abs().max(f64::MIN_POSITIVE)
            );
        }
    }
    let pass = suff_verdict == Verdict::Pass && three.verdict == Verdict::Pass && consistent;
    let _ = writeln!(report, "verdict={}", if pass { "pass" } else { "fail" });
    report.push_str(&body);
    let mut files = Vec::new();
    write_file(out.join("report.txt"), &report, &mut files)?;
    Ok(Outcome {
        pass,
        files,
        verdicts: vec![
            format!("sufficient condition: {}", suff_verdict.as_str()),
            format!("three integrals: {}", three.verdict.as_str()),
        ],
    })
}

fn run_verify(cfg: &ExperimentConfig, command: Command, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.run();
    let f = &cfg.field;
    let rep: CfDistanceReport = match command {
        Command::VerifyOss => test_oss(f, &r.r_values, r.replicates, r.probes)?,
        Command::VerifyIncrements => {
            test_stationary_increments(f, &cfg.shifts(), r.replicates, r.probes)?
        }
        _ => test_marginal_stability(f, &r.n_fold, r.replicates, r.probes)?,
    };
    let mut pass = rep.pass;
    let mut verdicts = vec![format!(
        "{}: {} (max distance {:.4} vs threshold {:.4})",
        rep.test,
        if rep.pass { "pass" } else { "fail" },
        rep.max_distance,
        rep.threshold
    )];
    let mut report = header(cfg, command);
    report.push_str(&rep.to_text());
    if r.calibration_runs > 0 {
        let cal = calibrate(f, r.calibration_runs, r.replicates, r.probes)?;
        let ok = cal.rate() >= 0.95;
        pass &= ok;
        verdicts.push(format!(
            "calibration: {}/{} same-law runs passed",
            cal.passes, cal.runs
        ));
        report.push('\n');
        report.push_str(&cal.to_text());
        let _ = writeln!(report, "verdict={}", if ok { "pass" } else { "fail" });
    }
    let mut files = Vec::new();
    write_file(out.join("report.txt"), &report, &mut files)?;
    let mut csv = String::from("probe,label,u,lhs_re,lhs_im,rhs_re,rhs_im,distance\n");
    for (i, p) in rep.probes.iter().enumerate() {
        let u: Vec<String> = p.u.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(
            csv,
            "{i},{},{},{:?},{:?},{:?},{:?},{:?}",
            p.label,
            u.join(";"),
            p.lhs.re,
            p.lhs.im,
            p.rhs.re,
            p.rhs.im,
            p.distance
        );
    }
    write_file(out.join("probes.csv"), &csv, &mut files)?;
    Ok(Outcome {
        pass,
        files,
        verdicts,
    })
}

fn run_holder(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let ens = simulate_ensemble(&cfg.field, cfg.run().replicates)?;
    let rep = estimate_holder(&ens, &cfg.field, cfg.run().tolerance)?;
    let mut files = Vec::new();
    let mut report = header(cfg, Command::EstimateHolder);
    report.push_str(&rep.to_text());
    write_file(out.join("report.txt"), &report, &mut files)?;
    let mut csv = String::from("lag,log_tau");
    for j in 0..ens.m {
        let _ = write!(csv, ",log_median_{}", j + 1);
    }
    csv.push('\n');
    for (i, lag) in rep.lags.iter().enumerate() {
        let _ = write!(csv, "{lag},{:?}", rep.log_tau[i]);
        for lm in &rep.log_median {
            let _ = write!(csv, ",{:?}", lm[i]);
        }
        csv.push('\n');
    }
    write_file(out.join("holder.csv"), &csv, &mut files)?;
    let verdicts = rep
        .components
        .iter()
        .map(|c| {
            format!(
                "component {}: slope {:.4} (target {:.4})",
                c.component + 1,
                c.estimate,
                c.target
            )
        })
        .collect();
    Ok(Outcome {
        pass: rep.pass,
        files,
        verdicts,
    })
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}
