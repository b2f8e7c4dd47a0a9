//! Randomized cross-validation of the frequency, LMI and time-domain routes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{fdi_check, FdiOptions, FdiReport};
use crate::linalg::{self, CMatrix, C64};
use crate::lmi::{gkyp_feasible, GkypOptions};
use crate::model::{Certificate, FrequencyBand, HermitianMatrix, StateSpace};
use crate::sdp::SdpStatus;
use crate::sproc::dual_pairing;
use crate::tdomain::{
    falsify_tdi, in_band_multitone, run_tones, FalsifyOptions, TdiResult, ToneInput, TonePlan,
};

pub use crate::model::SCHEMA_VERSION;

const GENERATION_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataField {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Hurwitz,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub field: DataField,
    pub stability: Stability,
    /// Fixed shift on the input block of `Pi`; drawn from `[0, 1]` when absent.
    pub pi_shift: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub sys: StateSpace,
    pub pi: HermitianMatrix,
    pub band: FrequencyBand,
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, field: DataField) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| match field {
        DataField::Real => C64::new(rng.sample(StandardNormal), 0.0),
        DataField::Complex => C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
    })
}

/// Draws a controllable `(A, B)`, a band and a supply matrix from the seed.
///
/// `A` and `B` have standard normal entries (independent real and imaginary
/// parts in the complex field); a Hurwitz spec shifts `A` left by
/// `alpha_max + 0.5`. The band has `w1 ~ U(-3, 3)` and width `~ U(0.5, 3)`.
/// `Pi` is a random Hermitian matrix of unit spectral norm minus `c I` on the
/// input block.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    if spec.n == 0 || spec.m == 0 {
        return Err(Error::Input("instance dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, m) = (spec.n, spec.m);
    let mut sys = None;
    for _ in 0..GENERATION_RETRIES {
        let mut a = gaussian_matrix(&mut rng, n, n, spec.field);
        let b = gaussian_matrix(&mut rng, n, m, spec.field);
        if spec.stability == Stability::Hurwitz {
            let alpha = linalg::eigenvalues(&a).iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re));
            for i in 0..n {
                a[(i, i)] -= C64::new(alpha + 0.5, 0.0);
            }
        }
        if let Ok(s) = StateSpace::controllable(a, b) {
            sys = Some(s);
            break;
        }
    }
    let sys = sys.ok_or(Error::GenerationFailed {
        retries: GENERATION_RETRIES,
    })?;

    let w1 = rng.gen_range(-3.0..3.0);
    let width = rng.gen_range(0.5..3.0);
    let band = FrequencyBand::new(w1, w1 + width)?;

    let raw = gaussian_matrix(&mut rng, n + m, n + m, spec.field);
    let mut pi = linalg::hermitian_part(&raw);
    let norm = linalg::spectral_norm(&pi).max(f64::MIN_POSITIVE);
    pi /= C64::new(norm, 0.0);
    let shift = match spec.pi_shift {
        Some(c) => c,
        None => rng.gen_range(0.0..1.0),
    };
    for i in n..n + m {
        pi[(i, i)] -= C64::new(shift, 0.0);
    }
    Ok(Instance {
        sys,
        pi: HermitianMatrix::new(pi)?,
        band,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub count: usize,
    pub seed: u64,
    pub n_max: usize,
    pub m_max: usize,
    /// Fixed data field; alternates real and complex when absent.
    pub field: Option<DataField>,
    pub stability: Stability,
    /// Both margins at most this far from zero mark an instance marginal.
    pub marginal_band: f64,
    /// Random constrained inputs per LMI-feasible instance; 0 disables the check.
    pub sufficiency_trials: usize,
    /// Run the falsifier on every FDI-failing instance.
    pub falsify: bool,
    pub timeout_secs: f64,
    pub pi_shift: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 0,
            n_max: 4,
            m_max: 3,
            field: None,
            stability: Stability::Mixed,
            marginal_band: 1e-4,
            sufficiency_trials: 20,
            falsify: true,
            timeout_secs: 10.0,
            pi_shift: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AgreeHolds,
    AgreeFails,
    MarginalSkipped,
    Anomaly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifierSummary {
    pub omega: f64,
    pub window: f64,
    pub j_pi: f64,
    pub iqc_max_eig: f64,
    pub slack: f64,
    pub terminal_decay: f64,
    pub feedback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencySummary {
    pub trials: usize,
    pub violations: usize,
    /// Largest `j_pi - bound - tolerance` seen; negative when every trial passed.
    pub worst_excess: f64,
    /// Richardson estimate of the quadrature constant per unit time.
    pub quadrature_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub field: DataField,
    pub stability: Stability,
    pub fdi_worst_eig: f64,
    pub fdi_worst_omega: f64,
    pub lmi_status: SdpStatus,
    pub lmi_t_star: f64,
    pub outcome: Outcome,
    pub reason: Option<String>,
    pub falsifier: Option<FalsifierSummary>,
    pub sufficiency: Option<SufficiencySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub schema_version: String,
    pub count: usize,
    pub seed: u64,
    pub agree_holds: usize,
    pub agree_fails: usize,
    pub marginal_skipped: usize,
    pub anomalies: usize,
    pub falsified: usize,
    pub sufficiency_trials: usize,
    pub sufficiency_violations: usize,
    pub records: Vec<InstanceRecord>,
}

impl Scorecard {
    pub fn anomaly_records(&self) -> impl Iterator<Item = &InstanceRecord> {
        self.records.iter().filter(|r| r.outcome == Outcome::Anomaly)
    }
}

/// SplitMix64 finalizer of `(seed, index)`.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Instance spec for position `index` of a suite.
pub fn suite_spec(config: &SuiteConfig, index: usize) -> InstanceSpec {
    let seed = instance_seed(config.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.gen_range(1..=config.n_max.max(1));
    let m = rng.gen_range(1..=config.m_max.max(1));
    let field = config.field.unwrap_or(if index.is_multiple_of(2) {
        DataField::Real
    } else {
        DataField::Complex
    });
    InstanceSpec {
        seed,
        n,
        m,
        field,
        stability: config.stability,
        pi_shift: config.pi_shift,
    }
}

/// Worker count from `GKYP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("GKYP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` inside a pool capped by `GKYP_THREADS`, or the global pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Generates and checks `count` instances in parallel; the scorecard is
/// ordered by instance index and does not depend on the worker count.
pub fn run_equivalence_suite(config: &SuiteConfig) -> Result<Scorecard> {
    if config.count == 0 {
        return Err(Error::Input("count must be at least 1".into()));
    }
    if config.n_max == 0 || config.m_max == 0 {
        return Err(Error::Input("n_max and m_max must be positive".into()));
    }
    let records: Vec<InstanceRecord> = with_thread_cap(|| {
        (0..config.count)
            .into_par_iter()
            .map(|i| run_instance(config, i))
            .collect()
    });
    Ok(tally(config, records))
}

fn tally(config: &SuiteConfig, records: Vec<InstanceRecord>) -> Scorecard {
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let falsified = records.iter().filter(|r| r.falsifier.is_some()).count();
    let (trials, violations) = records
        .iter()
        .filter_map(|r| r.sufficiency.as_ref())
        .fold((0, 0), |(t, v), s| (t + s.trials, v + s.violations));
    Scorecard {
        schema_version: SCHEMA_VERSION.into(),
        count: records.len(),
        seed: config.seed,
        agree_holds: count(Outcome::AgreeHolds),
        agree_fails: count(Outcome::AgreeFails),
        marginal_skipped: count(Outcome::MarginalSkipped),
        anomalies: count(Outcome::Anomaly),
        falsified,
        sufficiency_trials: trials,
        sufficiency_violations: violations,
        records,
    }
}

/// Checks one explicit instance with the suite's rules.
pub fn check_instance(config: &SuiteConfig, instance: &Instance, seed: u64) -> (Outcome, InstanceRecordParts) {
    let deadline = Instant::now() + Duration::from_secs_f64(config.timeout_secs.max(0.0));
    classify(config, instance, seed, deadline)
}

/// Route values and verdict of one instance, without the spec metadata.
#[derive(Debug, Clone, Default)]
pub struct InstanceRecordParts {
    pub fdi_worst_eig: f64,
    pub fdi_worst_omega: f64,
    pub lmi_status: Option<SdpStatus>,
    pub lmi_t_star: f64,
    pub reason: Option<String>,
    pub falsifier: Option<FalsifierSummary>,
    pub sufficiency: Option<SufficiencySummary>,
}

fn run_instance(config: &SuiteConfig, index: usize) -> InstanceRecord {
    let spec = suite_spec(config, index);
    let (outcome, parts) = match generate_instance(&spec) {
        Ok(instance) => check_instance(config, &instance, spec.seed),
        Err(e) => (
            Outcome::Anomaly,
            InstanceRecordParts {
                reason: Some(format!("generation: {e}")),
                ..Default::default()
            },
        ),
    };
    if outcome == Outcome::Anomaly {
        log::warn!("instance {index} (seed {}): {:?}", spec.seed, parts.reason);
    }
    InstanceRecord {
        index,
        seed: spec.seed,
        n: spec.n,
        m: spec.m,
        field: spec.field,
        stability: spec.stability,
        fdi_worst_eig: parts.fdi_worst_eig,
        fdi_worst_omega: parts.fdi_worst_omega,
        lmi_status: parts.lmi_status.unwrap_or(SdpStatus::NumericalFailure),
        lmi_t_star: parts.lmi_t_star,
        outcome,
        reason: parts.reason,
        falsifier: parts.falsifier,
        sufficiency: parts.sufficiency,
    }
}

fn classify(
    config: &SuiteConfig,
    inst: &Instance,
    seed: u64,
    deadline: Instant,
) -> (Outcome, InstanceRecordParts) {
    let mut parts = InstanceRecordParts::default();
    let anomaly = |mut parts: InstanceRecordParts, reason: String| {
        parts.reason = Some(reason);
        (Outcome::Anomaly, parts)
    };
    let fdi = match fdi_check(&inst.sys, &inst.pi, &inst.band, &FdiOptions::default()) {
        Ok(r) => r,
        Err(e) => return anomaly(parts, format!("fdi: {e}")),
    };
    parts.fdi_worst_eig = fdi.worst_eig;
    parts.fdi_worst_omega = fdi.worst_omega;
    let lmi = match gkyp_feasible(&inst.sys, &inst.pi, &inst.band, &GkypOptions::default()) {
        Ok(r) => r,
        Err(e) => return anomaly(parts, format!("lmi: {e}")),
    };
    parts.lmi_status = Some(lmi.status());
    parts.lmi_t_star = lmi.outcome.t_star;

    let marginal = fdi.marginal
        || fdi.worst_eig.abs() <= config.marginal_band
        || lmi.status() == SdpStatus::MarginallyFeasible;
    if marginal {
        return (Outcome::MarginalSkipped, parts);
    }
    if Instant::now() > deadline {
        return anomaly(parts, "timeout".into());
    }
    match (fdi.holds, lmi.status()) {
        (_, SdpStatus::NumericalFailure) => {
            let msg = lmi.outcome.message.clone().unwrap_or_default();
            anomaly(parts, format!("lmi numerical failure: {msg}"))
        }
        (true, SdpStatus::StrictlyFeasible) => {
            if config.sufficiency_trials > 0 {
                let Some(cert) = lmi.certificate.as_ref() else {
                    return anomaly(parts, "feasible LMI without certificate".into());
                };
                match sufficiency_check(inst, cert, config.sufficiency_trials, seed, deadline) {
                    Ok(s) => {
                        let bad = s.violations;
                        parts.sufficiency = Some(s);
                        if bad > 0 {
                            return anomaly(parts, format!("{bad} sufficiency violations"));
                        }
                    }
                    Err(e) => return anomaly(parts, format!("sufficiency: {e}")),
                }
            }
            (Outcome::AgreeHolds, parts)
        }
        (false, SdpStatus::Infeasible) => {
            if config.falsify {
                match falsify(inst, &fdi) {
                    Ok(f) => parts.falsifier = Some(f),
                    Err(e) => return anomaly(parts, format!("falsifier: {e}")),
                }
            }
            if Instant::now() > deadline {
                return anomaly(parts, "timeout".into());
            }
            (Outcome::AgreeFails, parts)
        }
        (holds, status) => anomaly(
            parts,
            format!("verdict mismatch: fdi holds = {holds}, lmi {status:?}"),
        ),
    }
}

fn falsify(inst: &Instance, fdi: &FdiReport) -> Result<FalsifierSummary> {
    let f = falsify_tdi(&inst.sys, &inst.pi, &inst.band, fdi, &FalsifyOptions::default())?;
    Ok(FalsifierSummary {
        omega: f.omega,
        window: f.window,
        j_pi: f.result.j_pi,
        iqc_max_eig: f.result.iqc_max_eig,
        slack: f.result.slack,
        terminal_decay: f.result.terminal_decay,
        feedback: f.feedback,
    })
}

/// Step scale for sufficiency trajectories; quadrature error is estimated
/// by Richardson extrapolation rather than made negligible.
const SUFFICIENCY_STEP: f64 = 0.05;
const SUFFICIENCY_DECAY: f64 = 1e-3;
/// Eigenvalues of the IQC below this fraction of its norm count as zero.
const IQC_REL_TOL: f64 = 1e-6;
const MAX_WINDOW_DOUBLINGS: usize = 6;

/// `j_pi - <Q, IQC> + x_N^† P x_N`, which the certificate bounds by
/// `lmi_margin * energy`.
fn dissipation_gap(r: &TdiResult, cert: &Certificate) -> Result<f64> {
    let x = &r.terminal_state;
    let stored = x.dotc(&(cert.p.as_matrix() * x)).re;
    Ok(r.j_pi - dual_pairing(&cert.q, &r.iqc_matrix)? + stored)
}

/// Runs the multi-tone, doubling the window until the IQC holds and the
/// state has decayed. A positive IQC eigenvalue that grows with the window
/// is steady-state quadrature error, so the step is halved instead.
fn constrained_run(
    inst: &Instance,
    input: &mut ToneInput,
    plan: &mut TonePlan,
) -> Result<Option<TdiResult>> {
    let mut last_rate: Option<f64> = None;
    for _ in 0..=MAX_WINDOW_DOUBLINGS {
        let run = run_tones(&inst.sys, &inst.pi, &inst.band, input, plan)?;
        let r = run.result;
        let scale = r.iqc_matrix.eigenvalues().iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        if r.iqc_max_eig <= IQC_REL_TOL * scale && r.terminal_decay <= SUFFICIENCY_DECAY {
            return Ok(Some(r));
        }
        let rate = r.iqc_max_eig / input.window;
        match last_rate {
            Some(prev) if rate > 0.7 * prev && r.terminal_decay <= SUFFICIENCY_DECAY => {
                *plan = plan.halved();
                last_rate = None;
            }
            _ => {
                input.window *= 2.0;
                last_rate = Some(rate);
            }
        }
    }
    Ok(None)
}

/// Dissipation bound from a certificate on random in-band multi-tones that
/// satisfy the IQC exactly.
pub fn sufficiency_check(
    inst: &Instance,
    cert: &Certificate,
    trials: usize,
    seed: u64,
    deadline: Instant,
) -> Result<SufficiencySummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ff);
    let margin = cert.lmi_margin.max(0.0);
    let mut constant: Option<f64> = None;
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut done = 0;
    let mut draws = 0;
    while done < trials {
        if Instant::now() > deadline {
            return Err(Error::Numerical(format!("timeout after {done} trials")));
        }
        draws += 1;
        if draws > 3 * trials {
            return Err(Error::Numerical("could not draw constrained inputs".into()));
        }
        let mut input = in_band_multitone(&inst.sys, &inst.band, &mut rng);
        let mut plan = TonePlan::for_system(&inst.sys, &input.omegas, SUFFICIENCY_STEP)?;
        plan.tail *= 1.5;
        let Some(r) = constrained_run(inst, &mut input, &mut plan)? else {
            continue;
        };
        let gap = dissipation_gap(&r, cert)?;
        let c = match constant {
            Some(c) => c,
            None => {
                let half = run_tones(&inst.sys, &inst.pi, &inst.band, &input, &plan.halved())?.result;
                let quarter =
                    run_tones(&inst.sys, &inst.pi, &inst.band, &input, &plan.halved().halved())?.result;
                let (g2, g4) = (dissipation_gap(&half, cert)?, dissipation_gap(&quarter, cert)?);
                // Second-order error: e(dt) ~ 4/3 (g(dt) - g(dt/2)); take the
                // larger of the two successive estimates.
                let e1 = (gap - g2).abs() * 4.0 / 3.0;
                let e2 = (g2 - g4).abs() * 4.0 / 3.0 * 4.0;
                let c = e1.max(e2) / (plan.dt * plan.dt * r.horizon);
                constant = Some(c);
                c
            }
        };
        let tol = c * plan.dt * plan.dt * r.horizon + 1e-9 * r.energy.max(r.j_pi.abs()).max(1.0);
        let excess = gap - margin * r.energy - tol;
        worst_excess = worst_excess.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
        done += 1;
    }
    Ok(SufficiencySummary {
        trials: done,
        violations,
        worst_excess,
        quadrature_constant: constant.unwrap_or(0.0),
    })
}
