//! Command-line front end: `check-group`, `accuracy`, `cascade`, `lift`,
//! `extract`. Every report is a JSON object on stdout carrying
//! `schema_version`.
//!
//! Exit codes: 0 success, 1 malformed input or I/O failure, 2 invalid point
//! group, 3 inadmissible dilation, 4 multiplicity mismatch, 5 cascade did
//! not converge under `--strict`.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::accuracy::{
    max_accuracy_with, sufficient_check, AccuracyCertificate, AccuracyError, SufficientReport,
};
use crate::cascade::{
    assess_reproduction, cascade_iterate, refinement_residual, CascadeError, CascadeOptions,
};
use crate::crystal::{CrystalElement, CrystalTriple, Dilation};
use crate::linalg::{Float, Scalar};
use crate::mask::{check_gamma_a_symmetry, extract_scalar, lift_scalar_to_matrix, Mask, MaskError};
use crate::multiidx::VCollection;

use config::{mask_json, matrix_json, problem_json, JsonScalar};
pub use config::{parse_problem, AnyMask, ConfigError, Domain, Problem, SCHEMA_VERSION};

pub const SEED_ENV: &str = "CRYSTAL_ACCURACY_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("multiplicity mismatch: {0}")]
    Multiplicity(String),
    #[error("cascade did not converge (last difference {0:e})")]
    NotConverged(f64),
    #[error("{0}")]
    Failed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Failed(_) | CliError::Io(_) => 1,
            CliError::Config(ConfigError::Malformed { .. } | ConfigError::Mask { .. }) => 1,
            CliError::Config(ConfigError::Group(_)) => 2,
            CliError::Config(ConfigError::Dilation(_)) => 3,
            CliError::Multiplicity(_) => 4,
            CliError::NotConverged(_) => 5,
        }
    }
}

impl From<MaskError> for CliError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::Multiplicity { .. } | MaskError::NotTranslation => {
                CliError::Multiplicity(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<AccuracyError> for CliError {
    fn from(e: AccuracyError) -> Self {
        match e {
            AccuracyError::NotScalar(_) => CliError::Multiplicity(e.to_string()),
            AccuracyError::Mask(m) => m.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        match e {
            CascadeError::Accuracy(a) => a.into(),
            CascadeError::Io(io) => CliError::Io(io),
            other => CliError::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "crystal-accuracy",
    version,
    about = "Accuracy of refinable functions over crystal groups"
)]
pub struct Cli {
    /// Seed for randomized sampling; overrides the config.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ConditionD,
    Sufficient,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the crystal triple and the dilation; print m, digits, h and ρ.
    CheckGroup { config: PathBuf },
    /// Maximal accuracy of the mask.
    Accuracy {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "condition-d")]
        method: MethodArg,
        #[arg(long)]
        p_max: Option<usize>,
    },
    /// Run the cascade and test polynomial reproduction.
    Cascade {
        config: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        /// Grid spacing 2^-q.
        #[arg(long)]
        grid: Option<u32>,
        /// Test degrees s < p.
        #[arg(long)]
        verify_p: Option<usize>,
        /// Write the final field as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 5 when the cascade does not converge.
        #[arg(long)]
        strict: bool,
    },
    /// Scalar crystal mask to its symmetric matrix mask over the lattice.
    Lift { config: PathBuf },
    /// Symmetric matrix mask back to the scalar crystal mask.
    Extract { config: PathBuf },
}

/// Parses `args` and runs the command, writing the report to `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.clone(),
        source,
    })?;
    let mut problem = parse_problem(&text)?;
    if let Some(seed) = seed {
        problem.options.cascade.seed = seed;
    }
    Ok(problem)
}

fn emit(out: &mut dyn Write, value: &Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Failed(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::CheckGroup { config } => {
            let problem = load(config, cli.seed)?;
            emit(out, &check_group_report(&problem))?;
            Ok(0)
        }
        Command::Accuracy {
            config,
            method,
            p_max,
        } => {
            let mut problem = load(config, cli.seed)?;
            if let Some(p) = p_max {
                problem.options.p_max = *p;
            }
            let report = match &problem.mask {
                AnyMask::Exact(m) => accuracy_report(&problem, m, *method)?,
                AnyMask::Float(m) => accuracy_report(&problem, m, *method)?,
            };
            emit(out, &report)?;
            Ok(0)
        }
        Command::Cascade {
            config,
            iters,
            grid,
            verify_p,
            out: csv,
            strict,
        } => {
            let mut problem = load(config, cli.seed)?;
            if let Some(n) = iters {
                problem.options.cascade.iterations = *n;
            }
            if let Some(q) = grid {
                problem.options.cascade.grid_exponent = *q;
            }
            let p = verify_p.unwrap_or(problem.options.p_max);
            let (report, converged, last) = match &problem.mask {
                AnyMask::Exact(m) => cascade_report(&problem, m, p, csv.as_ref())?,
                AnyMask::Float(m) => cascade_report(&problem, m, p, csv.as_ref())?,
            };
            emit(out, &report)?;
            if *strict && !converged {
                return Err(CliError::NotConverged(last));
            }
            Ok(0)
        }
        Command::Lift { config } => {
            let problem = load(config, cli.seed)?;
            let text = match &problem.mask {
                AnyMask::Exact(m) => lift_text(&problem, m)?,
                AnyMask::Float(m) => lift_text(&problem, m)?,
            };
            out.write_all(text.as_bytes())?;
            Ok(0)
        }
        Command::Extract { config } => {
            let problem = load(config, cli.seed)?;
            let text = match &problem.mask {
                AnyMask::Exact(m) => extract_text(&problem, m)?,
                AnyMask::Float(m) => extract_text(&problem, m)?,
            };
            out.write_all(text.as_bytes())?;
            Ok(0)
        }
    }
}

fn element_json(gamma: &CrystalElement) -> Value {
    json!({"g": gamma.g, "k": gamma.k})
}

fn complex_json(z: &Float) -> Value {
    json!([z.re, z.im])
}

fn check_group_report(problem: &Problem) -> Value {
    let dil = &problem.dilation;
    let moduli: Vec<String> = dil
        .smith()
        .diagonal()
        .iter()
        .map(|x| x.to_string())
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": "check-group",
        "valid": true,
        "dimension": problem.dimension,
        "group_order": problem.triple.order(),
        "m": dil.m(),
        "smith_moduli": moduli,
        "digits": dil.digits().iter().map(element_json).collect::<Vec<_>>(),
        "h": dil.h(),
        "rho": dil.rho(),
        "lattice_map": dil.lattice_map().to_rows(),
        "min_eigen_modulus": dil.min_eigen_modulus(),
        "contraction_norm": dil.contraction_norm(),
    })
}

fn vcollection_json<S: Scalar + JsonScalar>(v: &VCollection<S>) -> Value {
    Value::Array(v.blocks().iter().map(matrix_json).collect())
}

fn interpretation(problem: &Problem) -> &'static str {
    if problem.independent {
        "equivalence"
    } else {
        "sufficient-direction"
    }
}

fn certificate_json<S: Scalar + JsonScalar>(cert: &AccuracyCertificate<S>) -> Value {
    json!({
        "p": cert.p,
        "p_max": cert.p_max,
        "method": cert.method,
        "witness": cert.witness.as_ref().map(vcollection_json),
        "gate": cert.gate.as_ref().map(complex_json),
        "gate_source": cert.gate_source,
        "kernel_dims": cert.kernel_dims,
        "projection_dims": cert.projection_dims,
        "first_failing_degree": cert.first_failing_degree,
    })
}

fn sufficient_json<S: Scalar + JsonScalar>(rep: &SufficientReport<S>) -> Value {
    let moments: Vec<Value> = rep
        .moments
        .iter()
        .map(|m| {
            json!({
                "b": m.b,
                "alpha": m.alpha.0,
                "coset_sums": m.coset_sums.iter().map(JsonScalar::to_json).collect::<Vec<_>>(),
                "beta": m.beta.as_ref().map(JsonScalar::to_json),
            })
        })
        .collect();
    let flags: Vec<Value> = rep
        .eigen_flags
        .iter()
        .map(|f| json!({"s": f.s, "has_eigenvalue_one": f.has_eigenvalue_one}))
        .collect();
    json!({
        "p": rep.p,
        "sum_total": rep.sum_total.to_json(),
        "sum_ok": rep.sum_ok,
        "moments": moments,
        "moments_ok": rep.moments_ok,
        "eigen_range": "1 <= s < p",
        "eigen_flags": flags,
        "eigen_ok": rep.eigen_ok,
        "reconciliation_ok": rep.reconciliation_ok,
        "v_chain": rep.v_chain.as_ref().map(vcollection_json),
        "chain_verified": rep.chain_verified,
        "pass": rep.pass,
    })
}

fn accuracy_report<S: Scalar + JsonScalar>(
    problem: &Problem,
    mask: &Mask<S>,
    method: MethodArg,
) -> Result<Value, CliError> {
    let (triple, dilation) = problem.refinement_setting()?;
    let p_max = problem.options.p_max;
    if method != MethodArg::ConditionD && mask.r() != 1 {
        return Err(AccuracyError::NotScalar(mask.r()).into());
    }
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "accuracy",
        "backend": problem.mask.backend(),
        "multiplicity": mask.r(),
        "interpretation": interpretation(problem),
    });
    if method != MethodArg::Sufficient {
        let cert = max_accuracy_with(mask, &triple, &dilation, p_max, &problem.options.cascade)?;
        report["certificate"] = certificate_json(&cert);
        report["p"] = json!(cert.p);
    }
    if method != MethodArg::ConditionD {
        report["sufficient"] = sufficient_scan(mask, &triple, &dilation, p_max)?;
    }
    Ok(report)
}

/// Sufficient test for every `p ≤ p_max`.
fn sufficient_scan<S: Scalar + JsonScalar>(
    mask: &Mask<S>,
    triple: &CrystalTriple,
    dilation: &Dilation,
    p_max: usize,
) -> Result<Value, CliError> {
    let mut reports = Vec::new();
    let mut largest = 0;
    for p in 1..=p_max {
        let rep = sufficient_check(mask, triple, dilation, p)?;
        if rep.pass {
            largest = p;
        }
        reports.push(sufficient_json(&rep));
    }
    Ok(json!({"largest_passing_p": largest, "reports": reports}))
}

fn cascade_report<S: Scalar>(
    problem: &Problem,
    mask: &Mask<S>,
    verify_p: usize,
    csv: Option<&PathBuf>,
) -> Result<(Value, bool, f64), CliError> {
    let (triple, dilation) = problem.refinement_setting()?;
    let options: &CascadeOptions = &problem.options.cascade;
    let witness = if verify_p >= 1 {
        max_accuracy_with(mask, &triple, &dilation, verify_p, options)?
            .witness
            .map(|w| w.convert(|x| x.to_c64()))
    } else {
        None
    };
    let result = cascade_iterate(mask, &triple, &dilation, options)?;
    if let Some(path) = csv {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        result.field.write_csv(&mut w)?;
        w.flush()?;
    }
    let empirical = assess_reproduction(&result, &triple, witness.as_ref(), verify_p, options);
    let residual = refinement_residual(&result.field, mask, &triple, &dilation);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "cascade",
        "iterations": result.iterations,
        "grid_exponent": options.grid_exponent,
        "seed": options.seed,
        "converged": result.converged,
        "degenerate": result.degenerate,
        "last_difference": result.last_difference,
        "refinement_residual": residual,
        "support": result.support,
        "integral": result.field.integral().iter().map(complex_json).collect::<Vec<_>>(),
        "empirical": empirical,
    });
    Ok((report, result.converged, result.last_difference))
}

fn render(value: &Value) -> Result<String, CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Canonical configuration text with the problem's own mask.
pub fn canonical_text(problem: &Problem) -> Result<String, CliError> {
    let mask = match &problem.mask {
        AnyMask::Exact(m) => mask_json(m, problem.domain),
        AnyMask::Float(m) => mask_json(m, problem.domain),
    };
    render(&problem_json(problem, mask))
}

fn lift_text<S: Scalar + JsonScalar>(
    problem: &Problem,
    mask: &Mask<S>,
) -> Result<String, CliError> {
    let lifted = lift_scalar_to_matrix(mask, &problem.triple, &problem.dilation)?;
    debug_assert!(
        check_gamma_a_symmetry(&lifted, &problem.triple, &problem.dilation).unwrap_or(false)
    );
    let domain = if problem.triple.order() == 1 {
        problem.domain
    } else {
        Domain::Lattice
    };
    render(&problem_json(problem, mask_json(&lifted, domain)))
}

fn extract_text<S: Scalar + JsonScalar>(
    problem: &Problem,
    mask: &Mask<S>,
) -> Result<String, CliError> {
    let scalar = extract_scalar(mask, &problem.triple)?;
    let domain = if problem.triple.order() == 1 {
        problem.domain
    } else {
        Domain::Crystal
    };
    render(&problem_json(problem, mask_json(&scalar, domain)))
}
