//! Single-sample update rules for LMAT, NCLMAT, ZNCLMAT and the NCLMF
//! baseline.
//!
//! Every rule works on an explicit [`NcState`] and returns the a priori
//! error `e = d − wᵀx` of the step. Within a step the effective step-size
//! `α_k = α(1 + γλ_k)` is formed from the multiplier entering the step and
//! the multiplier is advanced afterwards.
//!
//! A step that produces a non-finite weight or multiplier marks the state
//! as diverged. Later steps on a diverged state are no-ops that return NaN.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{dot, sgn, RegressorWindow, TapWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcParams {
    /// Nominal step-size α.
    pub alpha: f64,
    /// Multiplier learning rate β, in (0, 2).
    pub beta: f64,
    /// Constraint gain γ. Zero disables the constraint (plain LMAT).
    pub gamma: f64,
    /// Constraint level the instantaneous cost is pulled toward.
    pub j_min: f64,
}

impl NcParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, j_min: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            j_min,
        };
        p.validate()?;
        Ok(p)
    }

    // α = 0 is accepted: it freezes the filter and is the reference point
    // of several theoretical limits.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 2), got {}", self.beta)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(self.j_min.is_finite() && self.j_min >= 0.0) {
            return Err(Error::invalid("j_min", format!("must be >= 0, got {}", self.j_min)));
        }
        Ok(())
    }

    pub fn with_j_min(self, j_min: f64) -> Self {
        Self { j_min, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcState {
    pub weights: TapWeights,
    /// Lagrange multiplier λ_k.
    pub lambda: f64,
    /// Effective step-size used by the most recent step.
    pub alpha_k: f64,
    diverged: bool,
}

impl NcState {
    /// Zero weights and λ₀ = 0.
    pub fn new(n_taps: usize) -> Self {
        Self::with_weights(TapWeights::zeros(n_taps))
    }

    pub fn with_weights(weights: TapWeights) -> Self {
        Self {
            weights,
            lambda: 0.0,
            alpha_k: 0.0,
            diverged: false,
        }
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    fn check(&mut self) {
        if !(self.weights.is_finite() && self.lambda.is_finite() && self.alpha_k.is_finite()) {
            self.diverged = true;
        }
    }

    fn a_priori_error(&self, x: &RegressorWindow, d: f64) -> f64 {
        assert_eq!(
            self.weights.len(),
            x.len(),
            "regressor length must match the filter length"
        );
        d - dot(self.weights.as_slice(), x.as_slice())
    }
}

/// NCLMAT: `w ← w + α_k e² sgn(e) x`, `λ ← (1−β)λ + β/2 (|e|³ − J_min)`.
pub fn nclmat_step(state: &mut NcState, x: &RegressorWindow, d: f64, p: &NcParams) -> f64 {
    if state.diverged {
        return f64::NAN;
    }
    let e = state.a_priori_error(x, d);
    let alpha_k = p.alpha * (1.0 + p.gamma * state.lambda);
    state.weights.add_scaled(alpha_k * e * e * sgn(e), x);
    state.lambda = (1.0 - p.beta) * state.lambda + 0.5 * p.beta * (e.abs().powi(3) - p.j_min);
    state.alpha_k = alpha_k;
    state.check();
    e
}

/// LMAT with a constant step `mu`; λ is left untouched.
pub fn lmat_step(state: &mut NcState, x: &RegressorWindow, d: f64, mu: f64) -> f64 {
    if state.diverged {
        return f64::NAN;
    }
    let e = state.a_priori_error(x, d);
    state.weights.add_scaled(mu * e * e * sgn(e), x);
    state.alpha_k = mu;
    state.check();
    e
}

/// NCLMAT with the constraint level forced to zero.
pub fn znclmat_step(state: &mut NcState, x: &RegressorWindow, d: f64, p: &NcParams) -> f64 {
    nclmat_step(state, x, d, &p.with_j_min(0.0))
}

/// Noise-constrained LMF: `w ← w + α_k e³ x`,
/// `λ ← (1−β)λ + β/2 (e⁴ − J_min)` with `J_min = E[ξ⁴]`.
pub fn nclmf_step(state: &mut NcState, x: &RegressorWindow, d: f64, p: &NcParams) -> f64 {
    if state.diverged {
        return f64::NAN;
    }
    let e = state.a_priori_error(x, d);
    let alpha_k = p.alpha * (1.0 + p.gamma * state.lambda);
    let e2 = e * e;
    state.weights.add_scaled(alpha_k * e2 * e, x);
    state.lambda = (1.0 - p.beta) * state.lambda + 0.5 * p.beta * (e2 * e2 - p.j_min);
    state.alpha_k = alpha_k;
    state.check();
    e
}

/// Which update rule a filter runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Lmat,
    Nclmat,
    Znclmat,
    Nclmf,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Lmat => "lmat",
            Rule::Nclmat => "nclmat",
            Rule::Znclmat => "znclmat",
            Rule::Nclmf => "nclmf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmat" => Some(Rule::Lmat),
            "nclmat" => Some(Rule::Nclmat),
            "znclmat" => Some(Rule::Znclmat),
            "nclmf" => Some(Rule::Nclmf),
            _ => None,
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A rule bound to its parameters. For [`Rule::Lmat`] only `alpha` (the
/// constant step μ) is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Algorithm {
    pub rule: Rule,
    pub params: NcParams,
}

impl Algorithm {
    pub fn lmat(mu: f64) -> Self {
        Self {
            rule: Rule::Lmat,
            params: NcParams {
                alpha: mu,
                beta: 1.0,
                gamma: 0.0,
                j_min: 0.0,
            },
        }
    }

    pub fn step(&self, state: &mut NcState, x: &RegressorWindow, d: f64) -> f64 {
        match self.rule {
            Rule::Lmat => lmat_step(state, x, d, self.params.alpha),
            Rule::Nclmat => nclmat_step(state, x, d, &self.params),
            Rule::Znclmat => znclmat_step(state, x, d, &self.params),
            Rule::Nclmf => nclmf_step(state, x, d, &self.params),
        }
    }
}
