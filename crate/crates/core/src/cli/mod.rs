//! Command-line front end. Every subcommand loads and validates all of its
//! inputs before computing, writes a JSON report, and maps the verdict to the
//! exit code: 0 holds, 1 fails, 2 input error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freq::{fdi_check, FdiOptions, FdiReport};
use crate::harness::{self, DataField, Stability, SuiteConfig};
use crate::linalg::{CVector, C64};
use crate::lmi::{build_gkyp, gkyp_feasible, real_mode_applies, GkypOptions};
use crate::model::{
    self, Certificate, FrequencyBand, HermitianMatrix, StateSpace, SupplyRate, SCHEMA_VERSION,
};
use crate::sdp::{SdpOptions, SdpStatus};
use crate::sproc::{self, CertificateOptions, SprocProblem, SprocReport, SprocVerdict};
use crate::tdomain::{self, falsify_tdi, FalsifyOptions, TdiResult};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gkyp", version, about = "Finite-frequency KYP verification")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the frequency-domain inequality over the band.
    FdiCheck(FdiArgs),
    /// Solve the band LMI for a (P, Q) certificate.
    LmiCheck(LmiArgs),
    /// Evaluate the dissipation integral and IQC for an input signal.
    TdiCheck(TdiCheckArgs),
    /// Construct a trajectory violating the time-domain inequality.
    TdiFalsify(TdiFalsifyArgs),
    /// Search for S-procedure multipliers or a statement-(A) witness.
    SProc(SprocArgs),
    /// Run the randomized equivalence suite.
    EquivTest(EquivArgs),
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// System file {"A": matrix, "B": matrix}.
    #[arg(long = "sys")]
    pub sys: PathBuf,
    /// Supply rate file {"Pi": matrix}.
    #[arg(long = "pi")]
    pub pi: PathBuf,
    /// Band file {"w1": f, "w2": f}.
    #[arg(long = "band")]
    pub band: PathBuf,
}

#[derive(Debug, Args)]
pub struct FdiArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = FdiOptions::default().coarse_points)]
    pub points: usize,
    #[arg(long, default_value_t = FdiOptions::default().refine_depth)]
    pub refine_depth: usize,
    /// The FDI holds when the largest eigenvalue is at most this.
    #[arg(long, default_value_t = FdiOptions::default().tol)]
    pub tol: f64,
    /// CSV of (omega, lambda_max) samples.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LmiArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Tolerance when re-verifying the certificate.
    #[arg(long, default_value_t = GkypOptions::default().verify_tol)]
    pub verify_tol: f64,
    /// |t_star| below this is reported as marginal.
    #[arg(long, default_value_t = SdpOptions::default().strict_margin)]
    pub strict_margin: f64,
    #[arg(long, default_value_t = SdpOptions::default().tol)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = SdpOptions::default().max_iter)]
    pub max_iter: usize,
    /// Search over complex Hermitian (P, Q) even when real data allows real ones.
    #[arg(long)]
    pub complex: bool,
    /// Write the realified LMI as JSON.
    #[arg(long)]
    pub dump_realified: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TdiCheckArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// CSV with a header row and columns t, u1_re, u1_im, ..., on a uniform grid from t = 0.
    #[arg(long)]
    pub input: PathBuf,
    /// Tolerance on the IQC eigenvalues and on the dissipation integral.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TdiFalsifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = FalsifyOptions::default().max_steps)]
    pub max_steps: usize,
    #[arg(long, default_value_t = FalsifyOptions::default().step_scale)]
    pub step_scale: f64,
    #[arg(long, default_value_t = FalsifyOptions::default().min_margin)]
    pub min_margin: f64,
    /// CSV of (t, |x|, |u|, running j_pi).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub trace_rows: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SprocArgs {
    /// Problem file {"F": matrix, "constraints": [...], "regular": bool}.
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = sproc::FalsifyOptions::default().budget)]
    pub budget: usize,
    #[arg(long, default_value_t = sproc::FalsifyOptions::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = CertificateOptions::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    #[arg(long, default_value_t = SuiteConfig::default().count)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = SuiteConfig::default().n_max)]
    pub n_max: usize,
    #[arg(long, default_value_t = SuiteConfig::default().m_max)]
    pub m_max: usize,
    /// Fixed data field; alternates when absent.
    #[arg(long, value_enum)]
    pub field: Option<DataField>,
    #[arg(long, value_enum, default_value = "mixed")]
    pub stability: Stability,
    #[arg(long, default_value_t = SuiteConfig::default().marginal_band)]
    pub marginal_band: f64,
    #[arg(long, default_value_t = SuiteConfig::default().sufficiency_trials)]
    pub trials: usize,
    #[arg(long)]
    pub no_falsify: bool,
    /// Per-instance wall-clock budget in seconds.
    #[arg(long, default_value_t = SuiteConfig::default().timeout_secs)]
    pub timeout: f64,
    /// Scorecard path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    exit_code: i32,
}

#[derive(Serialize)]
struct ErrorReport {
    schema_version: &'static str,
    error: ErrorBody,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NonFinite => "non_finite",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::InvalidBand { .. } => "invalid_band",
        Error::SingularFrequency { .. } => "singular_frequency",
        Error::AllFrequenciesSingular => "all_frequencies_singular",
        Error::NotPsd { .. } => "not_psd",
        Error::StepTooLarge { .. } => "step_too_large",
        Error::HorizonExhausted { .. } => "horizon_exhausted",
        Error::SingularShift { .. } => "singular_shift",
        Error::Precondition(_) => "precondition",
        Error::Numerical(_) => "numerical",
        Error::GenerationFailed { .. } => "generation_failed",
        Error::Input(_) => "input",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Exit code for an error: malformed or inconsistent input is 2, anything
/// the computation itself could not resolve is 3.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch { .. }
        | Error::NonFinite
        | Error::NotHermitian { .. }
        | Error::InvalidBand { .. }
        | Error::StepTooLarge { .. }
        | Error::Precondition(_)
        | Error::Input(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_INPUT,
        Error::SingularFrequency { .. }
        | Error::AllFrequenciesSingular
        | Error::NotPsd { .. }
        | Error::HorizonExhausted { .. }
        | Error::SingularShift { .. }
        | Error::Numerical(_)
        | Error::GenerationFailed { .. } => EXIT_NUMERICAL,
    }
}

fn report_error(kind: &'static str, message: String, code: i32) -> i32 {
    let report = ErrorReport {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind,
            message,
            exit_code: code,
        },
    };
    let text = serde_json::to_string(&report).unwrap_or_else(|_| "{}".into());
    eprintln!("{text}");
    code
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_HOLDS;
            }
            return report_error("usage", e.to_string().trim().to_string(), EXIT_INPUT);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).try_init();
    match harness::with_thread_cap(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => report_error(error_kind(&e), e.to_string(), exit_code(&e)),
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::FdiCheck(a) => fdi_command(&a),
        Command::LmiCheck(a) => lmi_command(&a),
        Command::TdiCheck(a) => tdi_check_command(&a),
        Command::TdiFalsify(a) => tdi_falsify_command(&a),
        Command::SProc(a) => sproc_command(&a),
        Command::EquivTest(a) => equiv_command(&a),
    }
}

struct Loaded {
    sys: StateSpace,
    pi: HermitianMatrix,
    band: FrequencyBand,
}

fn load_instance(args: &InstanceArgs) -> Result<Loaded> {
    let sys: StateSpace = model::read_json(&args.sys)?;
    let supply: SupplyRate = model::read_json(&args.pi)?;
    let band: FrequencyBand = model::read_json(&args.band)?;
    model::check_supply_dims(&sys, &supply.pi)?;
    Ok(Loaded {
        sys,
        pi: supply.pi,
        band,
    })
}

/// Writes `text` to `out`, or to stdout; a closed stdout is not an error.
fn emit(text: String, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = writeln!(stdout, "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(body: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })?;
    emit(text, out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

fn fdi_command(a: &FdiArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let opts = FdiOptions {
        coarse_points: a.points,
        refine_depth: a.refine_depth,
        tol: a.tol,
    };
    let report = fdi_check(&inst.sys, &inst.pi, &inst.band, &opts)?;
    if let Some(path) = &a.csv {
        let mut w = csv_writer(path)?;
        w.write_record(["omega", "lambda_max"]).map_err(|e| csv_error(path, e))?;
        for (omega, lam) in &report.samples {
            w.serialize((omega, lam)).map_err(|e| csv_error(path, e))?;
        }
        w.flush()?;
    }
    write_json(&report, a.out.as_deref())?;
    Ok(if report.holds { EXIT_HOLDS } else { EXIT_FAILS })
}

#[derive(Serialize)]
struct LmiReport {
    status: SdpStatus,
    feasible: bool,
    t_star: f64,
    t_lower: f64,
    dual_lower: f64,
    real_mode: bool,
    iterations: usize,
    certificate: Option<Certificate>,
    message: Option<String>,
}

fn lmi_command(a: &LmiArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let opts = GkypOptions {
        sdp: SdpOptions {
            strict_margin: a.strict_margin,
            tol: a.gap_tol,
            max_iter: a.max_iter,
            ..SdpOptions::default()
        },
        verify_tol: a.verify_tol,
        real_mode: !a.complex,
    };
    if let Some(path) = &a.dump_realified {
        let real_mode = opts.real_mode && real_mode_applies(&inst.sys, &inst.pi, &inst.band);
        let problem = build_gkyp(&inst.sys, &inst.pi, &inst.band, real_mode)?;
        std::fs::write(path, serde_json::to_string_pretty(&problem.system.realified())?)?;
    }
    let out = gkyp_feasible(&inst.sys, &inst.pi, &inst.band, &opts)?;
    let status = out.status();
    let report = LmiReport {
        status,
        feasible: status.is_feasible(),
        t_star: out.outcome.t_star,
        t_lower: out.outcome.t_lower,
        dual_lower: out.outcome.dual_lower,
        real_mode: out.real_mode,
        iterations: out.outcome.iterations,
        certificate: out.certificate,
        message: out.outcome.message,
    };
    write_json(&report, a.out.as_deref())?;
    Ok(match status {
        SdpStatus::StrictlyFeasible | SdpStatus::MarginallyFeasible => EXIT_HOLDS,
        SdpStatus::Infeasible => EXIT_FAILS,
        SdpStatus::NumericalFailure => EXIT_NUMERICAL,
    })
}

/// Reads `t, u1_re, u1_im, ...` rows on a uniform grid starting at zero.
pub fn read_input_csv(path: &Path, m: usize) -> Result<(f64, Vec<CVector>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut times = Vec::new();
    let mut inputs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 1 + 2 * m {
            return Err(Error::Input(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                row + 1,
                record.len(),
                1 + 2 * m
            )));
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Input(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        times.push(values[0]);
        inputs.push(CVector::from_fn(m, |i, _| C64::new(values[1 + 2 * i], values[2 + 2 * i])));
    }
    if times.len() < 2 {
        return Err(Error::Input(format!("{}: need at least two samples", path.display())));
    }
    let dt = times[1] - times[0];
    let uniform = times
        .iter()
        .enumerate()
        .all(|(i, t)| (t - times[0] - i as f64 * dt).abs() <= 1e-9 * (1.0 + t.abs()));
    if times[0].abs() > 1e-12 || !(dt > 0.0) || !uniform {
        return Err(Error::Input(format!(
            "{}: time column must be a uniform grid starting at 0",
            path.display()
        )));
    }
    Ok((dt, inputs))
}

#[derive(Serialize)]
struct TdiCheckReport {
    result: TdiResult,
    /// The trajectory satisfies the IQC and has `j_pi > tol`.
    violates_tdi: bool,
}

fn tdi_check_command(a: &TdiCheckArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let (dt, inputs) = read_input_csv(&a.input, inst.sys.inputs())?;
    let traj = tdomain::simulate(&inst.sys, &inputs, dt)?;
    let result = TdiResult::evaluate(&traj, &inst.sys, &inst.pi, &inst.band, a.tol)?;
    let violates_tdi = result.constraint_satisfied && result.j_pi > a.tol;
    write_json(&TdiCheckReport { result, violates_tdi }, a.out.as_deref())?;
    Ok(if violates_tdi { EXIT_FAILS } else { EXIT_HOLDS })
}

#[derive(Serialize)]
struct TdiFalsifyReport {
    falsified: bool,
    fdi: FdiSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    falsification: Option<tdomain::Falsification>,
}

#[derive(Serialize)]
struct FdiSummary {
    holds: bool,
    worst_omega: f64,
    worst_eig: f64,
}

impl From<&FdiReport> for FdiSummary {
    fn from(r: &FdiReport) -> Self {
        Self {
            holds: r.holds,
            worst_omega: r.worst_omega,
            worst_eig: r.worst_eig,
        }
    }
}

fn tdi_falsify_command(a: &TdiFalsifyArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let fdi = fdi_check(&inst.sys, &inst.pi, &inst.band, &FdiOptions::default())?;
    if fdi.holds {
        let report = TdiFalsifyReport {
            falsified: false,
            fdi: (&fdi).into(),
            falsification: None,
        };
        write_json(&report, a.out.as_deref())?;
        return Ok(EXIT_HOLDS);
    }
    let opts = FalsifyOptions {
        max_steps: a.max_steps,
        min_margin: a.min_margin,
        step_scale: a.step_scale,
        trace_rows: if a.csv.is_some() { a.trace_rows } else { 0 },
        ..FalsifyOptions::default()
    };
    let f = falsify_tdi(&inst.sys, &inst.pi, &inst.band, &fdi, &opts)?;
    if let Some(path) = &a.csv {
        let mut w = csv_writer(path)?;
        w.write_record(["t", "x_norm", "u_norm", "j_pi"]).map_err(|e| csv_error(path, e))?;
        for row in &f.trace {
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush()?;
    }
    let report = TdiFalsifyReport {
        falsified: true,
        fdi: (&fdi).into(),
        falsification: Some(f),
    };
    write_json(&report, a.out.as_deref())?;
    Ok(EXIT_FAILS)
}

fn sproc_command(a: &SprocArgs) -> Result<i32> {
    let problem: SprocProblem = model::read_json(&a.problem)?;
    problem.maps()?;
    let cert_opts = CertificateOptions {
        tol: a.tol,
        ..CertificateOptions::default()
    };
    let falsify_opts = sproc::FalsifyOptions {
        budget: a.budget,
        restarts: a.restarts,
        seed: a.seed,
        ..sproc::FalsifyOptions::default()
    };
    let report = SprocReport::solve(&problem, &cert_opts, &falsify_opts)?;
    emit(serde_json::to_string_pretty(&report)?, a.out.as_deref())?;
    Ok(match report.verdict {
        SprocVerdict::Certified => EXIT_HOLDS,
        SprocVerdict::Falsified => EXIT_FAILS,
        SprocVerdict::Undecided => EXIT_NUMERICAL,
    })
}

fn equiv_command(a: &EquivArgs) -> Result<i32> {
    let config = SuiteConfig {
        count: a.count,
        seed: a.seed,
        n_max: a.n_max,
        m_max: a.m_max,
        field: a.field,
        stability: a.stability,
        marginal_band: a.marginal_band,
        sufficiency_trials: a.trials,
        falsify: !a.no_falsify,
        timeout_secs: a.timeout,
        pi_shift: None,
    };
    let card = harness::run_equivalence_suite(&config)?;
    emit(serde_json::to_string_pretty(&card)?, a.report.as_deref())?;
    eprintln!(
        "agree_holds {} agree_fails {} marginal_skipped {} anomalies {}",
        card.agree_holds, card.agree_fails, card.marginal_skipped, card.anomalies
    );
    Ok(if card.anomalies == 0 { EXIT_HOLDS } else { EXIT_FAILS })
}
