use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{NcState, Rule};
use crate::error::{Error, Result};
use crate::filter::{squared_deviation, to_db, RegressorWindow, TapWeights};
use crate::harness::config::{AlgorithmEntry, ExperimentConfig, OutputKind};
use crate::signals::{gen_noise, substream, NoiseFamily, PlantDrift, Stream};
use crate::theory::{
    ms_stability_bound, msd_trajectory, optimal_alpha, rho_max, steady_state_msd, steady_state_msd_literal,
    Accumulators, SteadyState, TheoryParams,
};

/// Per-iteration values of one filter over one trial. Entry `k` is taken
/// after the `k+1`-th update. After divergence every entry is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// `‖w − w_opt‖²` against the plant as it stands after the update.
    pub msd: Vec<f64>,
    /// Squared a priori error `e²`.
    pub mse: Vec<f64>,
    /// Squared noise-free a priori error `(e − ξ)²`.
    pub excess: Vec<f64>,
    pub alpha_k: Vec<f64>,
    pub lambda_k: Vec<f64>,
    /// 1-based iteration at which the state went non-finite.
    pub diverged_at: Option<usize>,
}

impl TrialRecord {
    fn with_capacity(n: usize) -> Self {
        Self {
            msd: Vec::with_capacity(n),
            mse: Vec::with_capacity(n),
            excess: Vec::with_capacity(n),
            alpha_k: Vec::with_capacity(n),
            lambda_k: Vec::with_capacity(n),
            diverged_at: None,
        }
    }

    fn push_nan(&mut self) {
        for v in [
            &mut self.msd,
            &mut self.mse,
            &mut self.excess,
            &mut self.alpha_k,
            &mut self.lambda_k,
        ] {
            v.push(f64::NAN);
        }
    }
}

/// The signal realisation one trial shares across all of its filters.
struct Environment {
    x: Vec<f64>,
    /// Noiseless plant output per iteration.
    clean: Vec<f64>,
    /// Plant taps after each iteration's drift, flattened; empty when the
    /// plant is stationary.
    w_opt_path: Vec<f64>,
    noise: BTreeMap<NoiseFamily, Vec<f64>>,
}

impl Environment {
    fn build(cfg: &ExperimentConfig, trial: usize) -> Result<Self> {
        let n_iter = cfg.iterations;
        let n_taps = cfg.plant.n_taps();
        let trial = trial as u64;
        let x = cfg
            .input
            .generate(n_iter, &mut substream(cfg.seed, trial, Stream::Input));

        let mut plant = cfg.plant.clone();
        let mut drift_rng = substream(cfg.seed, trial, Stream::PlantDrift);
        let walking = matches!(plant.drift, PlantDrift::RandomWalk { .. });
        let mut window = RegressorWindow::zeros(n_taps);
        let mut clean = Vec::with_capacity(n_iter);
        let mut w_opt_path = Vec::with_capacity(if walking { n_iter * n_taps } else { 0 });
        for &xk in &x {
            window.push(xk);
            clean.push(plant.plant_output(&window, 0.0, &mut drift_rng)?);
            if walking {
                w_opt_path.extend_from_slice(plant.w_opt.as_slice());
            }
        }

        let variance = cfg.noise_variance()?;
        let mut noise = BTreeMap::new();
        for entry in &cfg.algorithms {
            let spec = cfg.noise_spec(entry)?;
            noise.entry(spec.family).or_insert_with(|| {
                let mut rng = substream(cfg.seed, trial, Stream::Noise);
                gen_noise(&spec, n_iter, &mut rng)
            });
            debug_assert_eq!(spec.variance, variance);
        }
        Ok(Self {
            x,
            clean,
            w_opt_path,
            noise,
        })
    }
}

/// Runs every configured filter over trial `trial`'s signals. All filters
/// see the same input, plant path and (per noise family) noise.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let env = Environment::build(cfg, trial)?;
    cfg.algorithms
        .iter()
        .map(|entry| run_filter(cfg, entry, &env))
        .collect()
}

fn run_filter(cfg: &ExperimentConfig, entry: &AlgorithmEntry, env: &Environment) -> Result<TrialRecord> {
    let algo = cfg.algorithm(entry)?;
    let noise = &env.noise[&entry.noise.unwrap_or(cfg.noise_family)];
    let n_taps = cfg.plant.n_taps();
    let mut state = NcState::new(n_taps);
    let mut window = RegressorWindow::zeros(n_taps);
    let mut rec = TrialRecord::with_capacity(cfg.iterations);
    let static_opt = &cfg.plant.w_opt;
    let mut w_opt = TapWeights::zeros(n_taps);

    for (k, (&xk, &xi)) in env.x.iter().zip(noise).enumerate() {
        window.push(xk);
        if rec.diverged_at.is_some() {
            rec.push_nan();
            continue;
        }
        let e = algo.step(&mut state, &window, env.clean[k] + xi);
        if state.is_diverged() {
            rec.diverged_at = Some(k + 1);
            rec.push_nan();
            continue;
        }
        let target = if env.w_opt_path.is_empty() {
            static_opt
        } else {
            w_opt
                .as_mut_slice()
                .copy_from_slice(&env.w_opt_path[k * n_taps..(k + 1) * n_taps]);
            &w_opt
        };
        let msd = squared_deviation(&state.weights, target)?;
        if !msd.is_finite() {
            rec.diverged_at = Some(k + 1);
            rec.push_nan();
            continue;
        }
        rec.msd.push(msd);
        rec.mse.push(e * e);
        rec.excess.push((e - xi) * (e - xi));
        rec.alpha_k.push(if algo.rule == Rule::Lmat {
            algo.params.alpha
        } else {
            state.alpha_k
        });
        rec.lambda_k.push(state.lambda);
    }
    Ok(rec)
}

/// Final-window statistics of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialSummary {
    pub diverged_at: Option<usize>,
    /// Mean linear MSD over the final 10% of iterations.
    pub steady_msd: f64,
    pub steady_mse: f64,
    pub steady_excess: f64,
    /// Largest linear MSD seen.
    pub peak_msd: f64,
}

/// Ensemble averages for one configured filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub label: String,
    pub rule: Rule,
    /// Linear-domain mean of the squared deviation.
    pub msd: Vec<f64>,
    pub msd_db: Vec<f64>,
    pub mse: Vec<f64>,
    pub excess_mse: Vec<f64>,
    pub alpha_k: Vec<f64>,
    pub lambda_k: Vec<f64>,
    pub trials: usize,
    pub diverged_trials: usize,
    pub per_trial: Vec<TrialSummary>,
}

/// Length of the trailing window used for steady-state figures.
pub fn steady_window(iterations: usize) -> usize {
    (iterations / 10).max(1)
}

fn tail_mean(v: &[f64]) -> f64 {
    let w = steady_window(v.len());
    v[v.len() - w..].iter().sum::<f64>() / w as f64
}

impl LearningCurve {
    /// False when every trial diverged.
    pub fn is_valid(&self) -> bool {
        self.diverged_trials < self.trials
    }

    pub fn steady_msd(&self) -> f64 {
        tail_mean(&self.msd)
    }

    pub fn steady_msd_db(&self) -> f64 {
        to_db(self.steady_msd())
    }

    pub fn steady_mse(&self) -> f64 {
        tail_mean(&self.mse)
    }

    pub fn steady_excess_mse(&self) -> f64 {
        tail_mean(&self.excess_mse)
    }

    /// Standard error of the steady-state MSD across surviving trials.
    pub fn steady_msd_stderr(&self) -> f64 {
        let xs: Vec<f64> = self
            .per_trial
            .iter()
            .filter(|t| t.diverged_at.is_none())
            .map(|t| t.steady_msd)
            .collect();
        let n = xs.len();
        if n < 2 {
            return f64::NAN;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    /// First 1-based iteration at which the curve is at or below `level`
    /// (linear MSD).
    pub fn first_reach(&self, level: f64) -> Option<usize> {
        self.msd.iter().position(|&m| m <= level).map(|i| i + 1)
    }

    fn from_records(entry: &AlgorithmEntry, records: &[&TrialRecord], iterations: usize) -> Self {
        let mut sums = [
            vec![0.0; iterations],
            vec![0.0; iterations],
            vec![0.0; iterations],
            vec![0.0; iterations],
            vec![0.0; iterations],
        ];
        let mut alive = 0usize;
        let mut per_trial = Vec::with_capacity(records.len());
        for rec in records {
            let summary = if rec.diverged_at.is_none() {
                TrialSummary {
                    diverged_at: None,
                    steady_msd: tail_mean(&rec.msd),
                    steady_mse: tail_mean(&rec.mse),
                    steady_excess: tail_mean(&rec.excess),
                    peak_msd: rec.msd.iter().cloned().fold(0.0, f64::max),
                }
            } else {
                TrialSummary {
                    diverged_at: rec.diverged_at,
                    steady_msd: f64::NAN,
                    steady_mse: f64::NAN,
                    steady_excess: f64::NAN,
                    peak_msd: f64::INFINITY,
                }
            };
            per_trial.push(summary);
            if rec.diverged_at.is_some() {
                continue;
            }
            alive += 1;
            let series = [&rec.msd, &rec.mse, &rec.excess, &rec.alpha_k, &rec.lambda_k];
            for (acc, s) in sums.iter_mut().zip(series) {
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
        }
        let scale = if alive == 0 { f64::NAN } else { 1.0 / alive as f64 };
        let [msd, mse, excess_mse, alpha_k, lambda_k] =
            sums.map(|v| v.into_iter().map(|s| s * scale).collect::<Vec<_>>());
        let msd_db = msd.iter().map(|&m| to_db(m)).collect();
        Self {
            label: entry.label.clone(),
            rule: entry.rule,
            msd,
            msd_db,
            mse,
            excess_mse,
            alpha_k,
            lambda_k,
            trials: records.len(),
            diverged_trials: records.len() - alive,
            per_trial,
        }
    }
}

/// Runs all trials (in parallel) and averages each filter's records in
/// trial order, so results do not depend on scheduling.
pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<LearningCurve>> {
    cfg.validate()?;
    let trials: Vec<Vec<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    Ok(cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let recs: Vec<&TrialRecord> = trials.iter().map(|t| &t[i]).collect();
            LearningCurve::from_records(entry, &recs, cfg.iterations)
        })
        .collect())
}

/// Model inputs for one NCLMAT entry of `cfg`.
pub fn theory_params(cfg: &ExperimentConfig, entry: &AlgorithmEntry) -> Result<TheoryParams> {
    let noise = cfg.noise_spec(entry)?;
    let algo = cfg.algorithm(entry)?;
    let n_taps = cfg.plant.n_taps();
    let tp = TheoryParams {
        n_taps,
        alpha: algo.params.alpha,
        beta: algo.params.beta,
        gamma: algo.params.gamma,
        j_min: algo.params.j_min,
        sigma_x2: cfg.input.power(),
        sigma_xi2: noise.variance,
        xi4: noise.fourth_moment(),
        rho_max: rho_max(&cfg.input, n_taps),
    };
    tp.validate()?;
    Ok(tp)
}

/// The step-size limits at steady accumulators, evaluated at the converged
/// point MSD → 0 (σ_e = σ_ξ). Neither depends on α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyBounds {
    pub ms_stability_bound: Option<f64>,
    pub optimal_alpha: Option<f64>,
}

pub fn steady_bounds(tp: &TheoryParams) -> SteadyBounds {
    let sigma = tp.sigma_xi2.sqrt();
    let acc = Accumulators::steady(tp, sigma);
    SteadyBounds {
        ms_stability_bound: ms_stability_bound(tp, &acc, sigma).ok(),
        optimal_alpha: optimal_alpha(tp, &acc, sigma).ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryOverlay {
    pub label: String,
    pub params: TheoryParams,
    /// MSD_0 ..= MSD_iterations (linear); NaN after model divergence.
    pub msd: Vec<f64>,
    pub diverged_at: Option<usize>,
    /// Fixed point of the recursion, g/(1−f).
    pub fixed_point: Option<SteadyState>,
    /// The printed closed form, solved self-consistently.
    pub closed_form: Option<SteadyState>,
    /// Mean-weight bound at the end of the trajectory.
    pub mean_bound: Option<f64>,
    pub bounds: SteadyBounds,
}

/// Runs the MSD model for the first NCLMAT entry of `cfg`.
pub fn theory_overlay(cfg: &ExperimentConfig) -> Result<TheoryOverlay> {
    let entry = cfg
        .algorithms
        .iter()
        .find(|a| a.rule == Rule::Nclmat)
        .ok_or_else(|| Error::invalid("theory_overlay", "needs an nclmat algorithm entry"))?;
    let tp = theory_params(cfg, entry)?;
    let msd0 = cfg.plant.w_opt.squared_norm();
    let traj = msd_trajectory(&tp, msd0, cfg.iterations, cfg.accumulators);
    let mut msd = traj.msd.clone();
    msd.resize(cfg.iterations + 1, f64::NAN);
    Ok(TheoryOverlay {
        label: entry.label.clone(),
        params: tp,
        msd,
        diverged_at: traj.diverged_at(),
        fixed_point: steady_state_msd(&tp).ok(),
        closed_form: steady_state_msd_literal(&tp).ok(),
        mean_bound: traj.mean_stability_bound(&tp).ok(),
        bounds: steady_bounds(&tp),
    })
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub noise_variance: f64,
    pub curves: Vec<LearningCurve>,
    pub overlay: Option<TheoryOverlay>,
}

/// Monte Carlo curves plus the model overlay when requested and an NCLMAT
/// entry exists.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let curves = monte_carlo(cfg)?;
    let wants_overlay = cfg.outputs.contains(&OutputKind::TheoryOverlay);
    let overlay = if wants_overlay && cfg.algorithms.iter().any(|a| a.rule == Rule::Nclmat) {
        Some(theory_overlay(cfg)?)
    } else {
        None
    };
    Ok(Experiment {
        noise_variance: cfg.noise_variance()?,
        config: cfg.clone(),
        curves,
        overlay,
    })
}

/// Parameter values to sweep; an empty list keeps the configured value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub experiment: Experiment,
}

impl SweepPoint {
    /// Steady-state MSD of the first valid curve, used for ranking.
    pub fn score(&self) -> f64 {
        self.experiment
            .curves
            .iter()
            .find(|c| c.is_valid())
            .map(|c| c.steady_msd())
            .unwrap_or(f64::INFINITY)
    }

    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if let Some(a) = self.alpha {
            parts.push(format!("a{a}"));
        }
        if let Some(b) = self.beta {
            parts.push(format!("b{b}"));
        }
        if let Some(g) = self.gamma {
            parts.push(format!("g{g}"));
        }
        if parts.is_empty() {
            "base".to_string()
        } else {
            parts.join("_")
        }
    }
}

fn axis(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().map(|&v| Some(v)).collect()
    }
}

/// Cartesian sweep over the grid. α applies to every entry (μ for LMAT),
/// β and γ to the constrained rules. Every point shares `cfg.seed`, and
/// every point is validated before any runs. Results come back ranked by
/// steady-state MSD, best first.
pub fn sweep(cfg: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for &alpha in &axis(&grid.alpha) {
        for &beta in &axis(&grid.beta) {
            for &gamma in &axis(&grid.gamma) {
                let mut c = cfg.clone();
                for e in &mut c.algorithms {
                    if let Some(a) = alpha {
                        e.alpha = a;
                    }
                    if e.rule != Rule::Lmat {
                        if let Some(b) = beta {
                            e.beta = b;
                        }
                        if let Some(g) = gamma {
                            e.gamma = g;
                        }
                    }
                }
                c.validate()?;
                points.push((alpha, beta, gamma, c));
            }
        }
    }
    let mut out = points
        .into_iter()
        .map(|(alpha, beta, gamma, c)| {
            Ok(SweepPoint {
                alpha,
                beta,
                gamma,
                experiment: run_experiment(&c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.score().total_cmp(&b.score()));
    Ok(out)
}
