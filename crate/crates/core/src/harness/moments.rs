use serde::Serialize;

use crate::error::{Error, Result};
use crate::signals::{gen_noise, substream, NoiseFamily, NoiseSpec, Seed, Stream};

/// Empirical moments of generated noise next to their reference values.
/// Ratios are normalised by σ⁴ or σ³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub family: NoiseFamily,
    pub variance: f64,
    pub samples: usize,
    pub mean: f64,
    pub sample_variance: f64,
    /// E[ξ⁴]/σ⁴ of the centered noise the harness uses.
    pub fourth_ratio: f64,
    pub centered_fourth_ratio_analytic: f64,
    /// E[r⁴]/s⁴ of the uncentered distribution at scale s.
    pub raw_fourth_ratio: f64,
    pub table_fourth_ratio: f64,
    pub abs_third_ratio: f64,
    pub abs_third_ratio_analytic: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

impl MomentReport {
    pub fn raw_vs_table(&self) -> f64 {
        rel(self.raw_fourth_ratio, self.table_fourth_ratio)
    }

    pub fn centered_vs_analytic(&self) -> f64 {
        rel(self.fourth_ratio, self.centered_fourth_ratio_analytic)
    }

    pub fn abs_third_vs_analytic(&self) -> f64 {
        rel(self.abs_third_ratio, self.abs_third_ratio_analytic)
    }
}

pub fn moment_report(family: NoiseFamily, variance: f64, n: usize, seed: Seed) -> Result<MomentReport> {
    if n == 0 {
        return Err(Error::invalid("samples", "must be >= 1"));
    }
    let spec = NoiseSpec::new(family, variance)?;
    let xs = gen_noise(&spec, n, &mut substream(seed, 0, Stream::Noise));
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let sample_variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let s2 = variance * variance;
    let fourth_ratio = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf / s2;
    let abs_third_ratio = xs.iter().map(|x| x.abs().powi(3)).sum::<f64>() / nf / variance.powf(1.5);

    // Uncentered draws at the family's unit scale.
    let mut rng = substream(seed, 1, Stream::Noise);
    let raw_fourth_ratio = (0..n).map(|_| family.sample_raw(&mut rng).powi(4)).sum::<f64>() / nf;

    Ok(MomentReport {
        family,
        variance,
        samples: n,
        mean,
        sample_variance,
        fourth_ratio,
        centered_fourth_ratio_analytic: family.centered_fourth_moment_ratio(),
        raw_fourth_ratio,
        table_fourth_ratio: family.table_fourth_moment_ratio(),
        abs_third_ratio,
        abs_third_ratio_analytic: family.third_abs_moment_ratio(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_is_exact() {
        let r = moment_report(NoiseFamily::Binary, 1.0, 10_000, Seed(3)).unwrap();
        assert_eq!(r.fourth_ratio, 1.0);
        assert_eq!(r.raw_fourth_ratio, 1.0);
        assert_eq!(r.abs_third_ratio, 1.0);
    }

    #[test]
    fn gaussian_fourth_moment() {
        let r = moment_report(NoiseFamily::Gaussian, 1.0, 1_000_000, Seed(3)).unwrap();
        assert!(r.raw_vs_table() < 0.05);
        assert!(r.centered_vs_analytic() < 0.05);
        assert!(r.abs_third_vs_analytic() < 0.02);
    }

    #[test]
    fn rayleigh_reports_both_references() {
        let r = moment_report(NoiseFamily::Rayleigh, 2.0, 1_000_000, Seed(3)).unwrap();
        assert!(r.raw_vs_table() < 0.05, "{}", r.raw_fourth_ratio);
        assert!(r.centered_vs_analytic() < 0.05, "{}", r.fourth_ratio);
        assert!((r.fourth_ratio - 8.0).abs() > 1.0);
    }
}
