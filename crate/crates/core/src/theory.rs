//! Analytical predictors for NCLMAT: the mean and mean-square step-size
//! bounds, the MSD difference equation `MSD_{k+1} = f·MSD_k + g`, the
//! optimal step-size, steady-state MSD/MSE, and the recursive power
//! estimators for σ_e² and σ_x².
//!
//! The error standard deviation inside the model is closed through
//! `σ_{e,k}² = σ_ξ² + σ_x²·MSD_k`. Error moments use the Gaussian identities
//! `E|e| = √(2/π)σ`, `E|e|³ = 2√(2/π)σ³` and `E[e⁶] = 15σ⁶`.
//!
//! The recursion is parameterised by A(k) = 1 − (1−β)^k, B(k) = 1 + (1−β)^k
//! and the error-moment terms D(k), F(k). How D and F are accumulated along
//! a trajectory is selected by [`AccumulatorMode`].

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::RegressorWindow;
use crate::signals::InputSpec;

/// √(2/π).
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n_taps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub j_min: f64,
    /// Input power σ_x².
    pub sigma_x2: f64,
    /// Noise variance σ_ξ².
    pub sigma_xi2: f64,
    /// Fourth noise moment E[ξ⁴].
    pub xi4: f64,
    /// Largest eigenvalue of the regressor correlation matrix.
    pub rho_max: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_x2", self.sigma_x2),
            ("sigma_xi2", self.sigma_xi2),
            ("xi4", self.xi4),
            ("rho_max", self.rho_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if self.n_taps == 0 {
            return Err(Error::invalid("n_taps", "must be >= 1"));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 2), got {}", self.beta)));
        }
        if !(self.alpha >= 0.0 && self.gamma >= 0.0 && self.j_min >= 0.0) {
            return Err(Error::invalid("alpha/gamma/j_min", "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// σ_e implied by a given MSD.
    pub fn sigma_e(&self, msd: f64) -> f64 {
        (self.sigma_xi2 + self.sigma_x2 * msd).sqrt()
    }

    /// Per-sample constraint drift `E|e|³ − J_min`.
    fn d_term(&self, sigma_e: f64) -> f64 {
        2.0 * SQRT_2_OVER_PI * sigma_e.powi(3) - self.j_min
    }

    /// Per-sample `E[(|e|³ − J_min)²]`.
    fn f_term(&self, sigma_e: f64) -> f64 {
        let s3 = sigma_e.powi(3);
        15.0 * s3 * s3 - 4.0 * SQRT_2_OVER_PI * s3 * self.j_min + self.j_min * self.j_min
    }
}

pub fn geometric_a(beta: f64, k: usize) -> f64 {
    1.0 - (1.0 - beta).powi(k as i32)
}

pub fn geometric_b(beta: f64, k: usize) -> f64 {
    1.0 + (1.0 - beta).powi(k as i32)
}

/// A(k), B(k), D(k), F(k) at one point of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulators {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub f: f64,
}

impl Accumulators {
    /// The k → ∞ regime with 0 < β < 2: A = B = 1 and D, F at their
    /// per-sample values for the given σ_e.
    pub fn steady(tp: &TheoryParams, sigma_e: f64) -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            d: tp.d_term(sigma_e),
            f: tp.f_term(sigma_e),
        }
    }

    /// `1 + γAD + βγ²ABF / (4(2−β))`, the factor multiplying α² in f and g.
    pub fn quadratic_factor(&self, tp: &TheoryParams) -> f64 {
        let g = tp.gamma;
        1.0 + g * self.a * self.d + tp.beta * g * g * self.a * self.b * self.f / (4.0 * (2.0 - tp.beta))
    }

    /// `2 + γAD`, the factor multiplying α in f.
    pub fn linear_factor(&self, tp: &TheoryParams) -> f64 {
        2.0 + tp.gamma * self.a * self.d
    }
}

/// The coefficient f of `MSD_{k+1} = f·MSD_k + g`.
pub fn f_coeff(tp: &TheoryParams, acc: &Accumulators, sigma_e: f64) -> f64 {
    let a = tp.alpha;
    1.0 - 2.0 * SQRT_2_OVER_PI * a * acc.linear_factor(tp) * sigma_e * tp.sigma_x2
        + 6.0 * (tp.n_taps + 2) as f64 * a * a * tp.sigma_xi2 * tp.sigma_x2 * tp.sigma_x2 * acc.quadratic_factor(tp)
}

/// The coefficient g of `MSD_{k+1} = f·MSD_k + g`.
pub fn g_coeff(tp: &TheoryParams, acc: &Accumulators) -> f64 {
    tp.n_taps as f64 * tp.alpha * tp.alpha * tp.sigma_x2 * acc.quadratic_factor(tp) * tp.xi4
}

fn step_size_limit(tp: &TheoryParams, acc: &Accumulators, sigma_e: f64, what: &'static str, scale: f64) -> Result<f64> {
    let num = SQRT_2_OVER_PI * sigma_e * acc.linear_factor(tp);
    let den = scale * (tp.n_taps + 2) as f64 * tp.sigma_xi2 * tp.sigma_x2 * acc.quadratic_factor(tp);
    if !(den > 0.0) || !(num > 0.0) {
        return Err(Error::Undefined(what));
    }
    Ok(num / den)
}

/// Step-size minimising f: the fastest-converging α at this point.
pub fn optimal_alpha(tp: &TheoryParams, acc: &Accumulators, sigma_e: f64) -> Result<f64> {
    step_size_limit(tp, acc, sigma_e, "optimal step-size", 6.0)
}

/// Upper step-size limit for a monotonically decreasing MSD.
pub fn ms_stability_bound(tp: &TheoryParams, acc: &Accumulators, sigma_e: f64) -> Result<f64> {
    step_size_limit(tp, acc, sigma_e, "mean-square stability bound", 2.0)
}

/// How D(k) and F(k) are built from the error history σ_{e,0..k−1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulatorMode {
    /// D and F are the (1−β)- and (1−β)²-weighted averages of the per-sample
    /// terms, normalised so that A·D = β Σ(1−β)^{k−1−n} d_n and
    /// A·B·F = β(2−β) Σ(1−β)^{2(k−1−n)} φ_n. They tend to the per-sample
    /// values as the history becomes stationary.
    #[default]
    Discounted,
    /// D(k) = 2√(2/π) Σσ³ − k·J_min and
    /// F(k) = 15 Σσ⁶ + k·J_min² − 2 J_min C(k): plain running sums, which
    /// grow without bound in k.
    Literal,
}

#[derive(Debug, Clone)]
pub struct MsdTrajectory {
    pub mode: AccumulatorMode,
    /// MSD_0 ..= MSD_k, linear scale.
    pub msd: Vec<f64>,
    /// σ_{e,0} ..= σ_{e,k}.
    pub sigma_e: Vec<f64>,
    sum_sigma3: f64,
    sum_sigma6: f64,
    discounted_d: f64,
    discounted_f: f64,
    diverged_at: Option<usize>,
}

impl MsdTrajectory {
    pub fn new(tp: &TheoryParams, msd0: f64, mode: AccumulatorMode) -> Self {
        Self {
            mode,
            msd: vec![msd0],
            sigma_e: vec![tp.sigma_e(msd0)],
            sum_sigma3: 0.0,
            sum_sigma6: 0.0,
            discounted_d: 0.0,
            discounted_f: 0.0,
            diverged_at: None,
        }
    }

    /// Number of completed recursion steps.
    pub fn k(&self) -> usize {
        self.msd.len() - 1
    }

    pub fn current_msd(&self) -> f64 {
        *self.msd.last().expect("trajectory is never empty")
    }

    pub fn current_sigma_e(&self) -> f64 {
        *self.sigma_e.last().expect("trajectory is never empty")
    }

    /// Σ_{n<k} σ_{e,n}³.
    pub fn sum_sigma3(&self) -> f64 {
        self.sum_sigma3
    }

    /// Σ_{n<k} σ_{e,n}⁶.
    pub fn sum_sigma6(&self) -> f64 {
        self.sum_sigma6
    }

    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    pub fn accumulators(&self, tp: &TheoryParams) -> Accumulators {
        let k = self.k();
        let a = geometric_a(tp.beta, k);
        let b = geometric_b(tp.beta, k);
        let (d, f) = match self.mode {
            AccumulatorMode::Literal => {
                let kf = k as f64;
                let c = 2.0 * SQRT_2_OVER_PI * self.sum_sigma3;
                let d = c - kf * tp.j_min;
                let f = 15.0 * self.sum_sigma6 + kf * tp.j_min * tp.j_min - 2.0 * tp.j_min * c;
                (d, f)
            }
            AccumulatorMode::Discounted if k == 0 => (0.0, 0.0),
            AccumulatorMode::Discounted => {
                let d = tp.beta * self.discounted_d / a;
                let f = tp.beta * (2.0 - tp.beta) * self.discounted_f / (a * b);
                (d, f)
            }
        };
        Accumulators { a, b, d, f }
    }

    pub fn f(&self, tp: &TheoryParams) -> f64 {
        f_coeff(tp, &self.accumulators(tp), self.current_sigma_e())
    }

    pub fn g(&self, tp: &TheoryParams) -> f64 {
        g_coeff(tp, &self.accumulators(tp))
    }

    pub fn optimal_alpha(&self, tp: &TheoryParams) -> Result<f64> {
        optimal_alpha(tp, &self.accumulators(tp), self.current_sigma_e())
    }

    pub fn ms_stability_bound(&self, tp: &TheoryParams) -> Result<f64> {
        ms_stability_bound(tp, &self.accumulators(tp), self.current_sigma_e())
    }

    /// Upper α limit for a stable mean weight error. Uses the plain running
    /// sum Σσ³, the current σ_{e,k} and ρ_max.
    pub fn mean_stability_bound(&self, tp: &TheoryParams) -> Result<f64> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Undefined("mean stability bound at k = 0"));
        }
        let inner = 2.0 + tp.gamma * (2.0 * SQRT_2_OVER_PI * self.sum_sigma3 - tp.j_min) * geometric_a(tp.beta, k);
        let den = SQRT_2_OVER_PI * inner * self.current_sigma_e() * tp.rho_max;
        if !(den > 0.0) {
            return Err(Error::Undefined("mean stability bound"));
        }
        Ok(2.0 / den)
    }

    /// Advances the recursion by one step.
    pub fn step(&mut self, tp: &TheoryParams) -> Result<f64> {
        if let Some(iteration) = self.diverged_at {
            return Err(Error::ModelDiverged { iteration });
        }
        let sigma = self.current_sigma_e();
        let acc = self.accumulators(tp);
        let next = f_coeff(tp, &acc, sigma) * self.current_msd() + g_coeff(tp, &acc);

        let s3 = sigma.powi(3);
        self.sum_sigma3 += s3;
        self.sum_sigma6 += s3 * s3;
        let decay = 1.0 - tp.beta;
        self.discounted_d = decay * self.discounted_d + tp.d_term(sigma);
        self.discounted_f = decay * decay * self.discounted_f + tp.f_term(sigma);

        if !(next.is_finite() && next >= 0.0) {
            let iteration = self.k() + 1;
            self.diverged_at = Some(iteration);
            return Err(Error::ModelDiverged { iteration });
        }
        self.msd.push(next);
        self.sigma_e.push(tp.sigma_e(next));
        Ok(next)
    }
}

/// Free-function form of [`MsdTrajectory::step`].
pub fn msd_step(tp: &TheoryParams, traj: &mut MsdTrajectory) -> Result<f64> {
    traj.step(tp)
}

/// Runs the recursion for `iterations` steps from `msd0`. Stops early and
/// records the iteration if the model diverges.
pub fn msd_trajectory(tp: &TheoryParams, msd0: f64, iterations: usize, mode: AccumulatorMode) -> MsdTrajectory {
    let mut traj = MsdTrajectory::new(tp, msd0, mode);
    for _ in 0..iterations {
        if traj.step(tp).is_err() {
            break;
        }
    }
    traj
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub msd: f64,
    pub sigma_e: f64,
    pub mse: f64,
}

/// Solves `m = h(σ_e(m))` by fixed-point iteration from m = 0.
fn solve_self_consistent(tp: &TheoryParams, what: &'static str, h: impl Fn(f64) -> Result<f64>) -> Result<SteadyState> {
    let mut m = 0.0;
    for _ in 0..100_000 {
        let next = h(tp.sigma_e(m))?;
        if !(next.is_finite() && next >= 0.0) {
            return Err(Error::Undefined(what));
        }
        let converged = (next - m).abs() <= 1e-15 * next.max(f64::MIN_POSITIVE);
        m = next;
        if converged {
            break;
        }
    }
    let sigma_e = tp.sigma_e(m);
    if (h(sigma_e)? - m).abs() > 1e-12 * m.max(f64::MIN_POSITIVE) {
        return Err(Error::Undefined(what));
    }
    Ok(SteadyState {
        msd: m,
        sigma_e,
        mse: steady_state_mse(tp, m),
    })
}

/// `g/(1−f)` at steady accumulators for a fixed σ_e, with α cancelled so
/// that α = 0 gives 0 rather than 0/0.
pub fn fixed_point_msd_at(tp: &TheoryParams, sigma_e: f64) -> Result<f64> {
    let acc = Accumulators::steady(tp, sigma_e);
    let q = acc.quadratic_factor(tp);
    let n = tp.n_taps as f64;
    let num = n * tp.alpha * tp.sigma_x2 * q * tp.xi4;
    let den = 2.0 * SQRT_2_OVER_PI * acc.linear_factor(tp) * sigma_e * tp.sigma_x2
        - 6.0 * (n + 2.0) * tp.alpha * tp.sigma_xi2 * tp.sigma_x2 * tp.sigma_x2 * q;
    if !(den > 0.0) {
        return Err(Error::Undefined("steady-state MSD"));
    }
    Ok(num / den)
}

/// The closed-form steady state as printed in the original analysis. Its
/// numerator carries an extra N on γAD and drops the 1/4 on the F term
/// relative to [`fixed_point_msd_at`]; kept for comparison.
pub fn literal_closed_form_msd_at(tp: &TheoryParams, sigma_e: f64) -> Result<f64> {
    let acc = Accumulators::steady(tp, sigma_e);
    let n = tp.n_taps as f64;
    let g = tp.gamma;
    let num_bracket = n * g * acc.d + tp.beta * g * g * acc.f / (2.0 - tp.beta) + 1.0;
    let num = n * tp.alpha * num_bracket * tp.xi4;
    let den = 2.0 * SQRT_2_OVER_PI * acc.linear_factor(tp) * sigma_e
        - 6.0 * (n + 2.0) * tp.alpha * tp.sigma_xi2 * tp.sigma_x2 * acc.quadratic_factor(tp);
    if !(den > 0.0) {
        return Err(Error::Undefined("closed-form steady-state MSD"));
    }
    Ok(num / den)
}

/// Steady-state MSD as the fixed point of the recursion, with σ_e closed
/// through the MSE relation.
pub fn steady_state_msd(tp: &TheoryParams) -> Result<SteadyState> {
    solve_self_consistent(tp, "steady-state MSD", |s| fixed_point_msd_at(tp, s))
}

/// Steady state from the printed closed form, solved self-consistently.
pub fn steady_state_msd_literal(tp: &TheoryParams) -> Result<SteadyState> {
    solve_self_consistent(tp, "closed-form steady-state MSD", |s| {
        literal_closed_form_msd_at(tp, s)
    })
}

/// `MSE = σ_ξ² + σ_x²·MSD`.
pub fn steady_state_mse(tp: &TheoryParams, msd: f64) -> f64 {
    tp.sigma_xi2 + tp.sigma_x2 * msd
}

/// Largest eigenvalue of the `n`-tap regressor correlation matrix.
pub fn rho_max(input: &InputSpec, n: usize) -> f64 {
    match input {
        InputSpec::White { variance } => *variance,
        _ => SymmetricEigen::new(input.correlation_matrix(n))
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Exponentially smoothed estimates of σ_x² and σ_e², the latter through
/// the cross-correlation vector `p = E[e x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimator {
    pub p: Vec<f64>,
    pub sigma_x2_hat: f64,
    pub sigma_e2_hat: f64,
    pub chi: f64,
    pub theta: f64,
}

impl PowerEstimator {
    pub const DEFAULT_CHI: f64 = 0.97;
    pub const DEFAULT_THETA: f64 = 1e-6;

    pub fn new(n_taps: usize, chi: f64, theta: f64) -> Result<Self> {
        if !(chi > 0.0 && chi < 1.0) {
            return Err(Error::invalid("chi", format!("must lie in (0, 1), got {chi}")));
        }
        if !(theta > 0.0) {
            return Err(Error::invalid("theta", format!("must be > 0, got {theta}")));
        }
        Ok(Self {
            p: vec![0.0; n_taps],
            sigma_x2_hat: 0.0,
            sigma_e2_hat: 0.0,
            chi,
            theta,
        })
    }

    pub fn with_defaults(n_taps: usize) -> Self {
        Self::new(n_taps, Self::DEFAULT_CHI, Self::DEFAULT_THETA).expect("defaults are valid")
    }

    pub fn update(&mut self, e: f64, x: &RegressorWindow) {
        let chi = self.chi;
        for (p, &xi) in self.p.iter_mut().zip(x.as_slice()) {
            *p = chi * *p + (1.0 - chi) * e * xi;
        }
        self.sigma_x2_hat = chi * self.sigma_x2_hat + (1.0 - chi) * x.energy();
        let pp: f64 = self.p.iter().map(|p| p * p).sum();
        self.sigma_e2_hat = pp / (self.theta + self.sigma_x2_hat);
    }
}

pub fn update_power_estimates(st: &mut PowerEstimator, e: f64, x: &RegressorWindow) {
    st.update(e, x);
}
