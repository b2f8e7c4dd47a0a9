use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::StateSpace;

/// Samples of a solution of `x' = A x + B u` on the grid `t_i = i dt`,
/// `i = 0..=N`, starting from `x_0 = 0`.
///
/// Derivatives always come from the state equation at the sample, never from
/// differencing.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dt: f64,
    states: Vec<CVector>,
    inputs: Vec<CVector>,
    derivs: Vec<CVector>,
    terminal_decay: f64,
}

impl Trajectory {
    /// Builds a trajectory from state and input samples of equal length.
    pub fn from_samples(
        sys: &StateSpace,
        dt: f64,
        states: Vec<CVector>,
        inputs: Vec<CVector>,
    ) -> Result<Self> {
        let traj = Self::with_initial_state(sys, dt, states, inputs)?;
        if traj.states[0].iter().any(|z| *z != num_complex::Complex64::new(0.0, 0.0)) {
            return Err(Error::Precondition("trajectory must start at x(0) = 0".into()));
        }
        Ok(traj)
    }

    /// Same as [`Trajectory::from_samples`] without the `x_0 = 0` requirement;
    /// used for free-response witnesses.
    pub fn with_initial_state(
        sys: &StateSpace,
        dt: f64,
        states: Vec<CVector>,
        inputs: Vec<CVector>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Input(format!("time step must be positive, got {dt}")));
        }
        if states.is_empty() || states.len() != inputs.len() {
            return Err(Error::dims("trajectory samples", states.len(), inputs.len()));
        }
        let n = sys.states();
        let m = sys.inputs();
        if states.iter().any(|x| x.len() != n) {
            return Err(Error::dims("state sample", n, "other"));
        }
        if inputs.iter().any(|u| u.len() != m) {
            return Err(Error::dims("input sample", m, "other"));
        }
        let derivs: Vec<CVector> = states
            .iter()
            .zip(&inputs)
            .map(|(x, u)| sys.a() * x + sys.b() * u)
            .collect();
        let peak = states.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let last = states.last().map(|x| x.norm()).unwrap_or(0.0);
        let terminal_decay = if peak > 0.0 { last / peak } else { 0.0 };
        Ok(Self {
            dt,
            states,
            inputs,
            derivs,
            terminal_decay,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of intervals `N`; there are `N + 1` samples.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn inputs(&self) -> &[CVector] {
        &self.inputs
    }

    pub fn derivs(&self) -> &[CVector] {
        &self.derivs
    }

    /// `|x_N| / max_i |x_i|`.
    pub fn terminal_decay(&self) -> f64 {
        self.terminal_decay
    }

    /// Trapezoid weight of sample `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.steps() {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    pub fn is_real(&self) -> bool {
        self.states
            .iter()
            .chain(&self.inputs)
            .all(|v| v.iter().all(|z| z.im == 0.0))
    }
}
