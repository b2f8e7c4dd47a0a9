//! Acceptance criteria. Every test writes one `PASS`/`FAIL` line straight to
//! stdout, so the lines show up even when libtest captures output.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gkyp::freq::{fdi_check, FdiOptions};
use gkyp::harness::{run_equivalence_suite, Outcome, Scorecard, Stability, SuiteConfig};
use gkyp::linalg::{self, CMatrix, CVector, C64};
use gkyp::lmi::{gkyp_feasible, GkypOptions};
use gkyp::sdp::{solve_feasibility, LmiSystem, SdpOptions, SdpStatus};
use gkyp::sproc::{
    dual_pairing, falsify_statement_a, find_certificate, shift_system_check, CertificateOptions,
    FalsifyOptions, QuadraticMap,
};
use gkyp::tdomain::{iqc_value, simulate, slowness_check};
use gkyp::{FrequencyBand, HermitianMatrix, StateSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {criterion} [PRIMARY] {name}: {verdict} ({detail})");
    let _ = out.flush();
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, complex: bool) -> HermitianMatrix {
    let raw = CMatrix::from_fn(d, d, |_, _| C64::new(gauss(rng), if complex { gauss(rng) } else { 0.0 }));
    HermitianMatrix::symmetrize(&raw)
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> HermitianMatrix {
    let rank = rng.gen_range(1..=d);
    let l = CMatrix::from_fn(d, rank, |_, _| C64::new(gauss(rng), gauss(rng)));
    HermitianMatrix::symmetrize(&(&l * l.adjoint()))
}

// ---------------------------------------------------------------------------
// Criteria 1-3: one equivalence run shared by three reports.

struct SuiteRun {
    cards: Vec<Scorecard>,
    elapsed: Duration,
}

impl SuiteRun {
    fn records(&self) -> impl Iterator<Item = &gkyp::harness::InstanceRecord> {
        self.cards.iter().flat_map(|c| c.records.iter())
    }

    fn reason_starts(&self, prefix: &str) -> usize {
        self.records()
            .filter(|r| r.reason.as_deref().is_some_and(|s| s.starts_with(prefix)))
            .count()
    }
}

fn suite() -> &'static SuiteRun {
    static RUN: OnceLock<SuiteRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        // 100 Hurwitz and 100 unconstrained instances, fields alternating.
        let cards = [(Stability::Hurwitz, 0), (Stability::Mixed, 1)]
            .into_iter()
            .map(|(stability, seed)| {
                let config = SuiteConfig {
                    count: 100,
                    seed,
                    n_max: 6,
                    m_max: 3,
                    stability,
                    timeout_secs: 60.0,
                    ..SuiteConfig::default()
                };
                run_equivalence_suite(&config).expect("suite runs")
            })
            .collect();
        SuiteRun {
            cards,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_1_equivalence_suite() {
    let run = suite();
    let total: usize = run.cards.iter().map(|c| c.count).sum();
    let holds: usize = run.cards.iter().map(|c| c.agree_holds).sum();
    let fails: usize = run.cards.iter().map(|c| c.agree_fails).sum();
    let marginal: usize = run.cards.iter().map(|c| c.marginal_skipped).sum();
    // Verdict anomalies: disagreement, or a route that could not decide.
    let undecided = ["verdict mismatch", "lmi", "fdi", "generation", "timeout"]
        .iter()
        .map(|p| run.reason_starts(p))
        .sum::<usize>();
    let threads = rayon::current_num_threads();
    let pass = total == 200 && undecided == 0 && holds >= 20 && fails >= 20;
    report(
        1,
        "equivalence suite",
        pass,
        &format!(
            "{total} instances, agree_holds {holds}, agree_fails {fails}, marginal {marginal}, \
             verdict anomalies {undecided}, {:.1} s on {threads} worker(s)",
            run.elapsed.as_secs_f64()
        ),
    );
    for r in run.records().filter(|r| r.outcome == Outcome::Anomaly) {
        eprintln!("anomaly: {r:?}");
    }
    assert!(pass);
}

#[test]
fn criterion_2_falsifier_success() {
    let run = suite();
    let mut ok = 0;
    let mut bad = 0;
    for r in run.records() {
        if let Some(f) = &r.falsifier {
            if f.j_pi > 0.0 && f.iqc_max_eig <= f.slack && f.terminal_decay <= 0.1 {
                ok += 1;
            } else {
                bad += 1;
            }
        }
    }
    let failed = run.reason_starts("falsifier") + bad;
    let pass = failed == 0 && ok > 0;
    report(
        2,
        "falsifier success",
        pass,
        &format!("{ok} falsified of {} fdi-failing non-marginal instances", ok + failed),
    );
    assert!(pass);
}

#[test]
fn criterion_3_sufficiency_bound() {
    let run = suite();
    let feasible = run.records().filter(|r| r.outcome == Outcome::AgreeHolds).count();
    let checked: Vec<_> = run.records().filter_map(|r| r.sufficiency.as_ref()).collect();
    let trials: usize = checked.iter().map(|s| s.trials).sum();
    let violations: usize = checked.iter().map(|s| s.violations).sum();
    let errors = run.reason_starts("sufficiency");
    let worst = checked.iter().map(|s| s.worst_excess).fold(f64::NEG_INFINITY, f64::max);
    let full = checked.iter().all(|s| s.trials == 20);
    let pass = violations == 0 && errors == 0 && full && checked.len() >= feasible && feasible > 0;
    report(
        3,
        "sufficiency bound",
        pass,
        &format!(
            "{} feasible instances, {trials} trajectories, {violations} violations, \
             {errors} errors, worst excess {worst:.3e}",
            checked.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn bisect(mut holds_at: impl FnMut(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.5, 1.0);
    assert!(!holds_at(lo) && holds_at(hi));
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if holds_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_4_worked_scalar_family() {
    let sys = StateSpace::from_real(1, 1, &[-1.0], &[1.0]).unwrap();
    let band = FrequencyBand::new(1.0, 2.0).unwrap();
    let pi = |g: f64| HermitianMatrix::from_diagonal(&[1.0, -g * g]);
    let fdi = bisect(|g| fdi_check(&sys, &pi(g), &band, &FdiOptions::default()).unwrap().holds);
    let lmi = bisect(|g| {
        gkyp_feasible(&sys, &pi(g), &band, &GkypOptions::default())
            .unwrap()
            .status()
            .is_feasible()
    });
    let target = 0.5f64.sqrt();
    let pass = (fdi - target).abs() < 1e-4 && (lmi - target).abs() < 1e-4;
    report(
        4,
        "worked scalar family",
        pass,
        &format!("gamma* = {target:.6}, fdi route {fdi:.6}, lmi route {lmi:.6}"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_slowness_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=3);
        let mut a = DMatrix::from_fn(n, n, |_, _| 0.5 * gauss(&mut rng));
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        let b = DMatrix::from_fn(n, m, |_, _| gauss(&mut rng));
        let sys = StateSpace::new(linalg::to_complex(&a), linalg::to_complex(&b)).unwrap();
        let dt = 0.02 / linalg::spectral_norm(sys.a()).max(1.0);
        let steps = rng.gen_range(100..600);
        let inputs: Vec<CVector> = (0..steps)
            .map(|_| CVector::from_fn(m, |_, _| C64::new(gauss(&mut rng), 0.0)))
            .collect();
        let traj = simulate(&sys, &inputs, dt).unwrap();
        let w = rng.gen_range(0.1..4.0);
        let iqc = iqc_value(&traj, &FrequencyBand::symmetric(w).unwrap());
        let slow = slowness_check(&traj, w, 0.0).unwrap();
        let form = slow.lhs.add(&slow.rhs.scale(-w * w)).unwrap();
        worst = worst.max(linalg::max_abs(&(iqc.as_matrix() - form.as_matrix())));
    }
    let pass = worst <= 1e-9;
    report(
        5,
        "slowness identity",
        pass,
        &format!("50 real trajectories, largest entry gap {worst:.2e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Criterion 6: the phase-I solver against a grid oracle.

struct Problem {
    vars: usize,
    /// `(constant, coefficients)` per block.
    blocks: Vec<(CMatrix, Vec<CMatrix>)>,
}

impl Problem {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let vars = rng.gen_range(1..=2);
        let complex = rng.gen_bool(0.5);
        let mut blocks = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let d = rng.gen_range(1..=3);
            let c = random_hermitian(rng, d, complex).into_inner();
            let coefs = (0..vars).map(|_| random_hermitian(rng, d, complex).into_inner()).collect();
            blocks.push((c, coefs));
        }
        // Box rows `1 +- y_i >= 0` keep the optimum bounded.
        for i in 0..vars {
            let mut coefs = vec![CMatrix::zeros(2, 2); vars];
            coefs[i] = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
            blocks.push((CMatrix::identity(2, 2), coefs));
        }
        Self { vars, blocks }
    }

    fn system(&self) -> LmiSystem {
        let mut sys = LmiSystem::new(self.vars);
        for (c, coefs) in &self.blocks {
            sys.add_block(
                HermitianMatrix::new(c.clone()).unwrap(),
                coefs.iter().map(|m| HermitianMatrix::new(m.clone()).unwrap()).collect(),
            )
            .unwrap();
        }
        sys
    }

    /// `max_k lambda_max(-F_k(y))` straight from nalgebra.
    fn slack(&self, y: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|(c, coefs)| {
                let mut f = c.clone();
                for (yi, a) in y.iter().zip(coefs) {
                    f += a * C64::new(*yi, 0.0);
                }
                let f = (&f + f.adjoint()) * C64::new(0.5, 0.0);
                -f.symmetric_eigenvalues().iter().fold(f64::INFINITY, |acc, v| acc.min(*v))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nested ternary search over the box. The slack is convex in `y`, and
    /// so is its partial minimum over the second variable.
    fn brute_force(&self) -> f64 {
        let radius = 1.0 + self.slack(&vec![0.0; self.vars]).max(0.0);
        match self.vars {
            1 => ternary(-radius, radius, |y| self.slack(&[y])),
            _ => ternary(-radius, radius, |y0| ternary(-radius, radius, |y1| self.slack(&[y0, y1]))),
        }
    }
}

/// Minimum of a convex function on `[lo, hi]`.
fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

#[test]
fn criterion_6_sdp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = SdpOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = Problem::random(&mut rng);
        let out = solve_feasibility(&p.system(), &opts).unwrap();
        let bf = p.brute_force();
        worst = worst.max((out.t_star - bf).abs());
    }

    let diag = |v: &[f64]| HermitianMatrix::from_diagonal(v);
    let mut single = LmiSystem::new(1);
    single.add_block(diag(&[0.0]), vec![diag(&[1.0])]).unwrap();
    let a = solve_feasibility(&single, &opts).unwrap();
    let mut constant = LmiSystem::new(0);
    constant.add_block(diag(&[-1.0, 2.0]), vec![]).unwrap();
    let b = solve_feasibility(&constant, &opts).unwrap();
    let mut interval = LmiSystem::new(1);
    interval.add_block(diag(&[0.0, 1.0]), vec![diag(&[1.0, -1.0])]).unwrap();
    let c = solve_feasibility(&interval, &opts).unwrap();
    let analytic = a.status == SdpStatus::StrictlyFeasible
        && a.y[0] > 0.0
        && a.t_star < 0.0
        && b.status == SdpStatus::Infeasible
        && (b.t_star - 1.0).abs() <= 1e-8
        && c.status == SdpStatus::StrictlyFeasible
        && (c.t_star + 0.5).abs() <= 1e-8;
    let pass = worst <= 1e-4 && analytic;
    report(
        6,
        "sdp oracle",
        pass,
        &format!(
            "100 random problems, largest t_star gap {worst:.2e}; analytic t_star {:.1e}, {:.10}, {:.10}",
            a.t_star, b.t_star, c.t_star
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// Criterion 7: S-procedure.

/// Unit vectors on a grid over the faces of the cube `[-1, 1]^d`.
fn sphere_grid(d: usize) -> Vec<Vec<f64>> {
    let k: usize = match d {
        2 => 2001,
        3 => 121,
        _ => 41,
    };
    let mut out = Vec::new();
    for face in 0..d {
        for sign in [-1.0, 1.0] {
            let free = d - 1;
            for p in 0..k.pow(free as u32) {
                let mut x = vec![0.0; d];
                let mut rest = p;
                for (i, xi) in x.iter_mut().enumerate() {
                    if i == face {
                        *xi = sign;
                        continue;
                    }
                    *xi = -1.0 + 2.0 * (rest % k) as f64 / (k - 1) as f64;
                    rest /= k;
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                out.push(x.iter().map(|v| v / norm).collect());
            }
        }
    }
    out
}

fn form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(x);
    v.dot(&(m * &v))
}

fn scalar_map(m: &DMatrix<f64>) -> QuadraticMap {
    QuadraticMap::scalar(&HermitianMatrix::new(linalg::to_complex(m)).unwrap())
}

#[test]
fn criterion_7_s_procedure() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grids: Vec<Vec<Vec<f64>>> = (2..=4).map(sphere_grid).collect();
    let falsify = FalsifyOptions::default();
    let mut certified = 0;
    let mut falsified_certified = 0;
    for _ in 0..100 {
        let d = rng.gen_range(2..=4);
        let sym = |rng: &mut ChaCha8Rng| {
            let r = DMatrix::from_fn(d, d, |_, _| gauss(rng));
            (&r + r.transpose()) * 0.5
        };
        let mut g = sym(&mut rng);
        if g.symmetric_eigenvalues().max() <= 0.1 {
            g += DMatrix::identity(d, d) * (0.5 - g.symmetric_eigenvalues().max());
        }
        let f0 = sym(&mut rng);
        // Shift F so that its minimum over the grid points with G >= 0 is 0.05.
        let grid = &grids[d - 2];
        let low = grid
            .iter()
            .filter(|x| form(&g, x) >= 0.0)
            .map(|x| form(&f0, x))
            .fold(f64::INFINITY, f64::min);
        let f = f0 + DMatrix::identity(d, d) * (0.05 - low);
        let verified = grid.iter().filter(|x| form(&g, x) >= 0.0).all(|x| form(&f, x) >= 0.04);
        assert!(verified);
        let (fm, gm) = (scalar_map(&f), scalar_map(&g));
        let cert = find_certificate(&fm, std::slice::from_ref(&gm), true, &CertificateOptions::default()).unwrap();
        if let Some(c) = cert {
            certified += 1;
            if c.tau0 > 0.0 && falsify_statement_a(&fm, std::slice::from_ref(&gm), &falsify).unwrap().is_some() {
                falsified_certified += 1;
            }
        }
    }

    // Lossy real triple on R^2: G1 = x1 x2 >= 0 and G2 = x1^2 - x2^2 >= 0 cut
    // out the sector [0, pi/4], where F = (0.1 x1 + x2)(x1 - 0.9 x2) > 0; any
    // certificate would need 0.1 tau0 >= tau2 >= 0.9 tau0.
    let f = DMatrix::from_row_slice(2, 2, &[0.1, 0.455, 0.455, -0.9]);
    let g1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
    let g2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let holds = grids[0]
        .iter()
        .filter(|x| form(&g1, x) >= 0.0 && form(&g2, x) >= 0.0)
        .all(|x| form(&f, x) > 0.05);
    let (fm, cons) = (scalar_map(&f), vec![scalar_map(&g1), scalar_map(&g2)]);
    let opts = CertificateOptions::default();
    let no_cert = find_certificate(&fm, &cons, false, &opts).unwrap().is_none()
        && find_certificate(&fm, &cons, true, &opts).unwrap().is_none();
    let no_witness = falsify_statement_a(&fm, &cons, &falsify).unwrap().is_none();

    // The diagonal triple F = diag(1, -1), G = (diag(1, 0), diag(0, 1)): the
    // constraints hold everywhere, so a statement-(A) witness exists as well.
    let fd = scalar_map(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0])));
    let gd = vec![
        scalar_map(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]))),
        scalar_map(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0]))),
    ];
    let diag_witness = falsify_statement_a(&fd, &gd, &falsify).unwrap().is_some();
    let diag_no_cert = find_certificate(&fd, &gd, false, &opts).unwrap().is_none();

    let pass = certified == 100 && falsified_certified == 0 && holds && no_cert && no_witness && diag_witness && diag_no_cert;
    report(
        7,
        "s-procedure",
        pass,
        &format!(
            "m=1: {certified}/100 certified, {falsified_certified} falsified at budget {}; \
             lossy triple: (A) on grid {holds}, no certificate {no_cert}, no witness {no_witness}; \
             diagonal triple: witness {diag_witness}, no certificate {diag_no_cert}",
            falsify.budget
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_shift_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut passed = 0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..20 {
        let dim = rng.gen_range(1..=3);
        let len = rng.gen_range(20..200);
        let dt = rng.gen_range(0.001..0.1);
        let mut z: Vec<CVector> = (0..len)
            .map(|_| CVector::from_fn(dim, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng))))
            .collect();
        z[0] = CVector::zeros(dim);
        let operators: Vec<(CMatrix, CMatrix)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let rows = rng.gen_range(1..=3);
                let mut f = || CMatrix::from_fn(rows, dim, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
                (f(), f())
            })
            .collect();
        let probes: Vec<Vec<CVector>> = (0..2)
            .map(|_| {
                (0..rng.gen_range(10..100))
                    .map(|_| CVector::from_fn(dim, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng))))
                    .collect()
            })
            .collect();
        let check = shift_system_check(&operators, &z, &probes, &[0, 5, 50, 500], dt, 0.0).unwrap();
        worst_gap = worst_gap.max(check.steps.iter().map(|s| s.operator_gap).fold(0.0, f64::max));
        if check.passed() {
            passed += 1;
        }
    }
    let pass = passed == 20 && worst_gap == 0.0;
    report(
        8,
        "shift system",
        pass,
        &format!("{passed}/20 signals pass (i)-(iii), largest operator gap {worst_gap:e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_realify_and_self_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut doubling_violations = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let h = random_hermitian(&mut rng, d, true);
        let mut expected: Vec<f64> = h.eigenvalues().into_iter().flat_map(|l| [l, l]).collect();
        let mut got: Vec<f64> = h.realify().symmetric_eigenvalues().iter().copied().collect();
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        let scale = expected.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
        if expected.iter().zip(&got).any(|(a, b)| (a - b).abs() > 1e-10 * scale) {
            doubling_violations += 1;
        }
    }
    let mut duality_violations = 0;
    let mut separation_failures = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let (s, m) = (random_psd(&mut rng, d), random_psd(&mut rng, d));
        if dual_pairing(&s, &m).unwrap() < -1e-12 {
            duality_violations += 1;
        }
        let h = random_hermitian(&mut rng, d, true);
        let (vals, vecs) = h.eigh();
        if vals[0] < 0.0 {
            let v = vecs.column(0).into_owned();
            let witness = HermitianMatrix::symmetrize(&linalg::outer(&v, &v));
            if dual_pairing(&witness, &h).unwrap() >= 0.0 {
                separation_failures += 1;
            }
        }
    }
    let pass = doubling_violations == 0 && duality_violations == 0 && separation_failures == 0;
    report(
        9,
        "realify and self-duality",
        pass,
        &format!(
            "1000 spectrum-doubling samples, {doubling_violations} violations; 1000 PSD pairs, \
             {duality_violations} negative pairings; {separation_failures} non-PSD matrices unseparated"
        ),
    );
    assert!(pass);
}
