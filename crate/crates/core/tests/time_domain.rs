use gkyp::linalg::{self, CVector};
use gkyp::tdomain::{
    iqc_value, run_tones, simulate, slowness_check, ToneInput, TonePlan, TdiResult,
};
use gkyp::{Error, FrequencyBand, HermitianMatrix, StateSpace, Trajectory};
use proptest::prelude::*;

fn real_system(n: usize, m: usize, a: &[f64], b: &[f64]) -> StateSpace {
    StateSpace::new(
        linalg::to_complex(&nalgebra::DMatrix::from_row_slice(n, n, a)),
        linalg::to_complex(&nalgebra::DMatrix::from_row_slice(n, m, b)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symmetric_band_iqc_is_the_slowness_form(
        n in 1usize..=4,
        m in 1usize..=2,
        entries in proptest::collection::vec(-1.0f64..1.0, 16 + 8 + 400),
        w in 0.1f64..3.0,
    ) {
        let a: Vec<f64> = entries[..n * n].iter().enumerate()
            .map(|(k, v)| if k % (n + 1) == 0 { v - 1.5 } else { *v })
            .collect();
        let b = &entries[16..16 + n * m];
        let sys = real_system(n, m, &a, b);
        let steps = 400 / m;
        let inputs: Vec<CVector> = (0..steps)
            .map(|i| CVector::from_fn(m, |r, _| linalg::c(entries[24 + i * m + r], 0.0)))
            .collect();
        let traj = simulate(&sys, &inputs, 0.01).unwrap();
        let iqc = iqc_value(&traj, &FrequencyBand::symmetric(w).unwrap());
        let slow = slowness_check(&traj, w, 0.0).unwrap();
        let form = slow.lhs.add(&slow.rhs.scale(-w * w)).unwrap();
        let scale = linalg::max_abs(form.as_matrix()).max(1.0);
        let gap = linalg::max_abs(&(iqc.as_matrix() - form.as_matrix()));
        prop_assert!(gap <= 1e-9 * scale, "gap {gap:e}");
    }
}

/// `x = sin^2(pi t / T) sin(w0 t) v` realized through `x' = u`.
fn windowed_sine(w0: f64, window: f64, dt: f64) -> Trajectory {
    let sys = real_system(2, 2, &[0.0; 4], &[1.0, 0.0, 0.0, 1.0]);
    let v = [0.6, -0.8];
    let steps = (window / dt).round() as usize;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let k = std::f64::consts::PI / window;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let env = (k * t).sin().powi(2);
        let denv = 2.0 * k * (k * t).sin() * (k * t).cos();
        let x = env * (w0 * t).sin();
        let dx = denv * (w0 * t).sin() + env * w0 * (w0 * t).cos();
        xs.push(CVector::from_fn(2, |r, _| linalg::c(v[r] * x, 0.0)));
        us.push(CVector::from_fn(2, |r, _| linalg::c(v[r] * dx, 0.0)));
    }
    Trajectory::from_samples(&sys, dt, xs, us).unwrap()
}

#[test]
fn slow_tone_satisfies_the_bound() {
    let r = slowness_check(&windowed_sine(1.0, 100.0, 1e-3), 1.2, 0.0).unwrap();
    assert!(r.satisfied, "max eig {}", r.max_eig);
}

#[test]
fn fast_tone_violates_the_bound() {
    let r = slowness_check(&windowed_sine(1.5, 100.0, 1e-3), 1.2, 0.0).unwrap();
    assert!(!r.satisfied, "max eig {}", r.max_eig);
    // Pure tone: int x'x'^T is w0^2 int x x^T up to the window correction.
    let ratio = r.lhs.trace() / r.rhs.trace();
    assert!((ratio - 2.25).abs() < 1e-2, "ratio {ratio}");
}

#[test]
fn rest_is_slow() {
    let sys = real_system(1, 1, &[-1.0], &[1.0]);
    let traj = simulate(&sys, &vec![CVector::zeros(1); 20], 0.01).unwrap();
    let r = slowness_check(&traj, 0.5, 0.0).unwrap();
    assert!(r.satisfied);
    assert_eq!(r.lhs.trace(), 0.0);
    assert_eq!(r.rhs.trace(), 0.0);
}

#[test]
fn complex_trajectory_is_refused() {
    let sys = real_system(1, 1, &[-1.0], &[1.0]);
    let traj = simulate(&sys, &vec![CVector::from_element(1, linalg::c(0.0, 1.0)); 20], 0.01).unwrap();
    assert!(matches!(slowness_check(&traj, 0.5, 0.0), Err(Error::Precondition(_))));
}

fn single_tone(sys: &StateSpace, band: &FrequencyBand, w: f64, window: f64, step: f64) -> TdiResult {
    let input = ToneInput {
        omegas: vec![w],
        inputs: vec![CVector::from_element(sys.inputs(), linalg::c(1.0, 0.0))],
        window,
    };
    let plan = TonePlan::for_system(sys, &input.omegas, step).unwrap();
    let pi = HermitianMatrix::zeros(sys.states() + sys.inputs());
    run_tones(sys, &pi, band, &input, &plan).unwrap().result
}

#[test]
fn pure_tone_iqc_scales_with_the_characteristic() {
    let sys = real_system(1, 1, &[-1.0], &[1.0]);
    let band = FrequencyBand::new(1.0, 2.0).unwrap();
    for w in [0.5, 1.5, 2.5] {
        // (1/T) IQC -> (w1 - w)(w2 - w) |x|^2 * 3/8 with |x|^2 = 1 / (1 + w^2).
        let limit = (1.0 - w) * (2.0 - w) / (1.0 + w * w) * 3.0 / 8.0;
        let windows = [50.0, 100.0, 200.0, 400.0];
        let errors: Vec<f64> = windows
            .iter()
            .map(|&t| {
                let r = single_tone(&sys, &band, w, t, 0.01);
                (r.iqc_matrix.as_matrix()[(0, 0)].re / t - limit).abs()
            })
            .collect();
        // Window edges cost O(1/T); the quadrature floor sits far below.
        for (e, t) in errors.iter().zip(windows) {
            assert!(e * t <= 1.2 * errors[0] * windows[0] + 1e-9 * t, "w = {w}: errors {errors:?}");
        }
        assert!(errors[3] <= 1e-3 * limit.abs(), "w = {w}: errors {errors:?}");
        let last = single_tone(&sys, &band, w, 400.0, 0.01).iqc_max_eig;
        assert_eq!(last < 0.0, band.contains_interior(w), "w = {w}");
    }
}

#[test]
fn tone_quadrature_is_second_order() {
    let sys = real_system(2, 1, &[-0.5, 1.0, -1.0, -0.7], &[0.0, 1.0]);
    let band = FrequencyBand::new(0.5, 1.5).unwrap();
    let pi = HermitianMatrix::from_diagonal(&[1.0, -0.5, -0.2]);
    let input = ToneInput {
        omegas: vec![0.8, 1.2],
        inputs: vec![
            CVector::from_element(1, linalg::c(1.0, 0.0)),
            CVector::from_element(1, linalg::c(0.3, -0.4)),
        ],
        window: 40.0,
    };
    let plan = TonePlan::for_system(&sys, &input.omegas, 0.2).unwrap();
    let runs: Vec<TdiResult> = [plan.clone(), plan.halved(), plan.halved().halved()]
        .iter()
        .map(|p| run_tones(&sys, &pi, &band, &input, p).unwrap().result)
        .collect();
    let d_j = [(runs[0].j_pi - runs[1].j_pi).abs(), (runs[1].j_pi - runs[2].j_pi).abs()];
    let iqc_gap = |a: &TdiResult, b: &TdiResult| (a.iqc_matrix.as_matrix() - b.iqc_matrix.as_matrix()).norm();
    let d_q = [iqc_gap(&runs[0], &runs[1]), iqc_gap(&runs[1], &runs[2])];
    for d in [d_j, d_q] {
        let ratio = d[0] / d[1];
        assert!((3.0..5.0).contains(&ratio), "successive differences {d:?}");
    }
}
