//! Input, noise and plant generators for system-identification runs.
//!
//! All randomness flows from a [`Seed`] through [`substream`], which hands
//! each (trial, purpose) pair its own ChaCha8 stream. A trial therefore
//! sees the same samples no matter how trials are scheduled across threads.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{dot, RegressorWindow, TapWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// Independent random streams drawn within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Input = 0,
    Noise = 1,
    PlantDrift = 2,
}

pub fn substream(seed: Seed, trial: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(trial.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

pub fn gen_white_gaussian<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `y_k = ρ y_{k−1} + x_k` with `y_{−1} = 0`.
pub fn gen_ar1(x: &[f64], rho: f64) -> Vec<f64> {
    let mut prev = 0.0;
    x.iter()
        .map(|&xk| {
            prev = rho * prev + xk;
            prev
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Uniform,
    Binary,
    Rayleigh,
    Exponential,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 5] = [
        NoiseFamily::Gaussian,
        NoiseFamily::Uniform,
        NoiseFamily::Binary,
        NoiseFamily::Rayleigh,
        NoiseFamily::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Uniform => "uniform",
            NoiseFamily::Binary => "binary",
            NoiseFamily::Rayleigh => "rayleigh",
            NoiseFamily::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s))
    }

    /// One draw of the uncentered distribution at unit scale: unit variance
    /// for the symmetric families, scale 1 for Rayleigh, mean 1 for
    /// Exponential.
    pub fn sample_raw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseFamily::Gaussian => rng.sample(StandardNormal),
            NoiseFamily::Uniform => {
                let a = 3f64.sqrt();
                rng.random_range(-a..a)
            }
            NoiseFamily::Binary => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseFamily::Rayleigh => {
                let u: f64 = rng.random();
                (-2.0 * (1.0 - u).ln()).sqrt()
            }
            NoiseFamily::Exponential => rng.sample(Exp1),
        }
    }

    pub fn raw_mean(self) -> f64 {
        match self {
            NoiseFamily::Rayleigh => (PI / 2.0).sqrt(),
            NoiseFamily::Exponential => 1.0,
            _ => 0.0,
        }
    }

    pub fn raw_variance(self) -> f64 {
        match self {
            NoiseFamily::Rayleigh => (4.0 - PI) / 2.0,
            _ => 1.0,
        }
    }

    /// Zero-mean, unit-variance draw.
    pub fn sample_standard<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        (self.sample_raw(rng) - self.raw_mean()) / self.raw_variance().sqrt()
    }

    /// `E[ξ⁴]/σ⁴` as tabulated for the raw distributions (σ is the scale
    /// parameter for Rayleigh and Exponential).
    pub fn table_fourth_moment_ratio(self) -> f64 {
        match self {
            NoiseFamily::Gaussian => 3.0,
            NoiseFamily::Uniform => 9.0 / 5.0,
            NoiseFamily::Binary => 1.0,
            NoiseFamily::Rayleigh => 8.0,
            NoiseFamily::Exponential => 24.0,
        }
    }

    /// Kurtosis of the centered, unit-variance noise actually generated.
    pub fn centered_fourth_moment_ratio(self) -> f64 {
        match self {
            NoiseFamily::Rayleigh => {
                let d = 4.0 - PI;
                3.0 - (6.0 * PI * PI - 24.0 * PI + 16.0) / (d * d)
            }
            NoiseFamily::Exponential => 9.0,
            other => other.table_fourth_moment_ratio(),
        }
    }

    /// `E|ξ|³/σ³` of the centered, unit-variance noise.
    pub fn third_abs_moment_ratio(self) -> f64 {
        match self {
            NoiseFamily::Gaussian => 2.0 * (2.0 / PI).sqrt(),
            // Half-width √3: a³/4.
            NoiseFamily::Uniform => 3.0 * 3f64.sqrt() / 4.0,
            NoiseFamily::Binary => 1.0,
            NoiseFamily::Exponential => 12.0 / E - 2.0,
            NoiseFamily::Rayleigh => {
                static CACHE: OnceLock<f64> = OnceLock::new();
                *CACHE.get_or_init(rayleigh_centered_third_abs_moment)
            }
        }
    }
}

impl std::fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `E|R − m|³ / s³` for a unit-scale Rayleigh `R`, by composite Simpson
/// quadrature split at the mean.
fn rayleigh_centered_third_abs_moment() -> f64 {
    let m = (PI / 2.0).sqrt();
    let s = ((4.0 - PI) / 2.0).sqrt();
    let integrand = |r: f64| (r - m).abs().powi(3) * r * (-0.5 * r * r).exp();
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut acc = integrand(a) + integrand(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    (simpson(0.0, m, 20_000) + simpson(m, 40.0, 200_000)) / s.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    /// σ_ξ².
    pub variance: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid("noise variance", format!("must be > 0, got {variance}")));
        }
        Ok(Self { family, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Tabulated `E[ξ⁴]`, the value the MSD model consumes.
    pub fn fourth_moment(&self) -> f64 {
        self.family.table_fourth_moment_ratio() * self.variance * self.variance
    }

    /// `E[ξ⁴]` of the centered noise that [`gen_noise`] produces.
    pub fn centered_fourth_moment(&self) -> f64 {
        self.family.centered_fourth_moment_ratio() * self.variance * self.variance
    }

    pub fn third_abs_moment(&self) -> f64 {
        self.family.third_abs_moment_ratio() * self.variance.powf(1.5)
    }
}

/// `n` i.i.d. zero-mean samples with variance `spec.variance`.
pub fn gen_noise<R: Rng + ?Sized>(spec: &NoiseSpec, n: usize, rng: &mut R) -> Vec<f64> {
    let sd = spec.std_dev();
    (0..n).map(|_| sd * spec.family.sample_standard(rng)).collect()
}

pub fn third_abs_moment(spec: &NoiseSpec) -> f64 {
    spec.third_abs_moment()
}

/// `σ_ξ² = P / 10^(SNR/10)`.
pub fn scale_noise_for_snr(signal_power: f64, snr_db: f64) -> Result<f64> {
    if !(signal_power.is_finite() && signal_power > 0.0) {
        return Err(Error::invalid(
            "signal power",
            format!("must be > 0, got {signal_power}"),
        ));
    }
    Ok(signal_power / 10f64.powf(snr_db / 10.0))
}

/// The filter input: white Gaussian noise of variance `variance`, optionally
/// coloured by an AR(1) recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputSpec {
    White { variance: f64 },
    Ar1 { rho: f64, driving_variance: f64 },
}

impl InputSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InputSpec::White { variance }
            | InputSpec::Ar1 {
                driving_variance: variance,
                ..
            } if !(variance.is_finite() && variance > 0.0) => {
                Err(Error::invalid("input variance", format!("must be > 0, got {variance}")))
            }
            InputSpec::Ar1 { rho, .. } if !(rho.abs() < 1.0) => {
                Err(Error::invalid("rho", format!("|rho| must be < 1, got {rho}")))
            }
            _ => Ok(()),
        }
    }

    /// Stationary variance of a single input sample.
    pub fn power(&self) -> f64 {
        match *self {
            InputSpec::White { variance } => variance,
            InputSpec::Ar1 { rho, driving_variance } => driving_variance / (1.0 - rho * rho),
        }
    }

    pub fn autocorrelation(&self, lag: usize) -> f64 {
        match *self {
            InputSpec::White { variance } => {
                if lag == 0 {
                    variance
                } else {
                    0.0
                }
            }
            InputSpec::Ar1 { rho, .. } => self.power() * rho.powi(lag as i32),
        }
    }

    /// Toeplitz correlation matrix of an `n`-sample regressor.
    pub fn correlation_matrix(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| self.autocorrelation(i.abs_diff(j)))
    }

    /// Power of `wᵀx` for a stationary regressor `x`: `wᵀ R w`.
    pub fn output_power(&self, w: &TapWeights) -> f64 {
        let n = w.len();
        let r = self.correlation_matrix(n);
        let w = nalgebra::DVector::from_column_slice(w.as_slice());
        (w.transpose() * &r * &w)[(0, 0)]
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            InputSpec::White { variance } => gen_white_gaussian(n, variance, rng),
            InputSpec::Ar1 { rho, driving_variance } => gen_ar1(&gen_white_gaussian(n, driving_variance, rng), rho),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlantDrift {
    Stationary,
    /// Every tap takes an i.i.d. `N(0, variance)` step after each output.
    RandomWalk {
        variance: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub w_opt: TapWeights,
    pub drift: PlantDrift,
}

impl PlantSpec {
    pub fn stationary(w_opt: TapWeights) -> Self {
        Self {
            w_opt,
            drift: PlantDrift::Stationary,
        }
    }

    pub fn random_walk(w_opt: TapWeights, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid("walk variance", format!("must be > 0, got {variance}")));
        }
        Ok(Self {
            w_opt,
            drift: PlantDrift::RandomWalk { variance },
        })
    }

    pub fn n_taps(&self) -> usize {
        self.w_opt.len()
    }

    /// Produces `d = w_optᵀx + ξ`, then applies one step of drift.
    pub fn plant_output<R: Rng + ?Sized>(
        &mut self,
        x: &RegressorWindow,
        noise_sample: f64,
        rng: &mut R,
    ) -> Result<f64> {
        if x.len() != self.w_opt.len() {
            return Err(Error::LengthMismatch {
                expected: self.w_opt.len(),
                actual: x.len(),
            });
        }
        let d = dot(self.w_opt.as_slice(), x.as_slice()) + noise_sample;
        if let PlantDrift::RandomWalk { variance } = self.drift {
            let sd = variance.sqrt();
            for w in self.w_opt.as_mut_slice() {
                *w += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(d)
    }
}
