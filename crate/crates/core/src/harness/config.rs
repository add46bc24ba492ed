//! Experiment configuration: a flat `key = value` text format, one key per
//! line, `#` starting a comment. Algorithms are listed on repeated
//! `algorithm` lines:
//!
//! ```text
//! algorithm = nclmat label=NCLMAT alpha=0.003 beta=0.001 gamma=1000
//! algorithm = lmat mu=0.01
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::algorithms::{Algorithm, NcParams, Rule};
use crate::error::{Error, Result};
use crate::filter::TapWeights;
use crate::signals::{scale_noise_for_snr, InputSpec, NoiseFamily, NoiseSpec, PlantDrift, PlantSpec, Seed};
use crate::theory::AccumulatorMode;

/// Which noise statistic J_min is set to for NCLMAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JminMode {
    /// σ_ξ².
    #[default]
    Variance,
    /// E|ξ|³, the floor of the cost being constrained.
    ThirdAbsMoment,
    Zero,
}

impl JminMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "variance" => Some(JminMode::Variance),
            "third_abs_moment" => Some(JminMode::ThirdAbsMoment),
            "zero" => Some(JminMode::Zero),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JminMode::Variance => "variance",
            JminMode::ThirdAbsMoment => "third_abs_moment",
            JminMode::Zero => "zero",
        }
    }

    pub fn resolve(self, noise: &NoiseSpec) -> f64 {
        match self {
            JminMode::Variance => noise.variance,
            JminMode::ThirdAbsMoment => noise.third_abs_moment(),
            JminMode::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    SnrDb(f64),
    Variance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    MsdCurve,
    MseCurve,
    AlphaCurve,
    LambdaCurve,
    TheoryOverlay,
}

impl OutputKind {
    pub const ALL: [OutputKind; 5] = [
        OutputKind::MsdCurve,
        OutputKind::MseCurve,
        OutputKind::AlphaCurve,
        OutputKind::LambdaCurve,
        OutputKind::TheoryOverlay,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputKind::MsdCurve => "msd_curve",
            OutputKind::MseCurve => "mse_curve",
            OutputKind::AlphaCurve => "alpha_curve",
            OutputKind::LambdaCurve => "lambda_curve",
            OutputKind::TheoryOverlay => "theory_overlay",
        }
    }
}

/// One filter to run. `alpha` is μ for LMAT.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmEntry {
    pub label: String,
    pub rule: Rule,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Explicit constraint level; overrides any mode.
    pub j_min: Option<f64>,
    pub jmin_mode: Option<JminMode>,
    /// Noise family override for this entry only.
    pub noise: Option<NoiseFamily>,
}

impl AlgorithmEntry {
    fn new(rule: Rule) -> Self {
        Self {
            label: rule.name().to_ascii_uppercase(),
            rule,
            alpha: f64::NAN,
            beta: 1.0,
            gamma: 0.0,
            j_min: None,
            jmin_mode: None,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub description: String,
    pub plant: PlantSpec,
    pub input: InputSpec,
    pub noise_family: NoiseFamily,
    pub noise_level: NoiseLevel,
    pub jmin_mode: JminMode,
    pub algorithms: Vec<AlgorithmEntry>,
    pub iterations: usize,
    pub trials: usize,
    pub seed: Seed,
    pub outputs: BTreeSet<OutputKind>,
    pub accumulators: AccumulatorMode,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("experiment");
        let mut description = String::new();
        let mut taps: Option<Vec<f64>> = None;
        let mut input = InputSpec::White { variance: 1.0 };
        let mut input_variance: Option<f64> = None;
        let mut noise_family = None;
        let mut noise_level = None;
        let mut drift = PlantDrift::Stationary;
        let mut jmin_mode = JminMode::default();
        let mut algorithms = Vec::new();
        let mut iterations = 5000;
        let mut trials = 10;
        let mut seed = Seed(1);
        let mut outputs: Option<BTreeSet<OutputKind>> = None;
        let mut accumulators = AccumulatorMode::default();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::config(line_no, format!("expected `key = value`, got `{line}`")))?;
            let bad = |what: &str| Error::config(line_no, format!("invalid {what} `{value}`"));
            match key {
                "name" => name = value.to_string(),
                "description" => description = value.to_string(),
                "taps" => {
                    let v = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("taps"))?;
                    taps = Some(v);
                }
                "input" => {
                    input = match value.split_once(':') {
                        None if value == "white" => InputSpec::White { variance: 1.0 },
                        Some(("ar1", rho)) => InputSpec::Ar1 {
                            rho: rho.trim().parse().map_err(|_| bad("AR(1) coefficient"))?,
                            driving_variance: 1.0,
                        },
                        _ => return Err(bad("input (white | ar1:<rho>)")),
                    }
                }
                "input_variance" => input_variance = Some(parse_f64(value, line_no, key)?),
                "noise" => noise_family = Some(NoiseFamily::parse(value).ok_or_else(|| bad("noise family"))?),
                "snr_db" => noise_level = Some(NoiseLevel::SnrDb(parse_f64(value, line_no, key)?)),
                "noise_variance" => noise_level = Some(NoiseLevel::Variance(parse_f64(value, line_no, key)?)),
                "plant" => {
                    drift = match value.split_once(':') {
                        None if value == "stationary" => PlantDrift::Stationary,
                        Some(("random_walk", v)) => PlantDrift::RandomWalk {
                            variance: parse_f64(v.trim(), line_no, key)?,
                        },
                        _ => return Err(bad("plant (stationary | random_walk:<variance>)")),
                    }
                }
                "jmin_mode" => jmin_mode = JminMode::parse(value).ok_or_else(|| bad("jmin_mode"))?,
                "iterations" => iterations = value.parse().map_err(|_| bad("iterations"))?,
                "trials" => trials = value.parse().map_err(|_| bad("trials"))?,
                "seed" => seed = Seed(value.parse().map_err(|_| bad("seed"))?),
                "outputs" => {
                    let set = value
                        .split(',')
                        .map(|s| OutputKind::parse(s.trim()))
                        .collect::<Option<BTreeSet<_>>>()
                        .ok_or_else(|| bad("outputs"))?;
                    outputs = Some(set);
                }
                "theory_accumulators" => {
                    accumulators = match value {
                        "discounted" => AccumulatorMode::Discounted,
                        "literal" => AccumulatorMode::Literal,
                        _ => return Err(bad("theory_accumulators (discounted | literal)")),
                    }
                }
                "algorithm" => algorithms.push(parse_algorithm(value, line_no)?),
                _ => return Err(Error::config(line_no, format!("unknown key `{key}`"))),
            }
        }

        if let Some(v) = input_variance {
            input = match input {
                InputSpec::White { .. } => InputSpec::White { variance: v },
                InputSpec::Ar1 { rho, .. } => InputSpec::Ar1 {
                    rho,
                    driving_variance: v,
                },
            };
        }
        let taps = taps.unwrap_or_else(|| DEFAULT_PLANT.to_vec());
        let w_opt = TapWeights::new(taps)?;
        let plant = match drift {
            PlantDrift::Stationary => PlantSpec::stationary(w_opt),
            PlantDrift::RandomWalk { variance } => PlantSpec::random_walk(w_opt, variance)?,
        };
        let cfg = Self {
            name,
            description,
            plant,
            input,
            noise_family: noise_family.ok_or_else(|| Error::Usage("config: missing key `noise`".into()))?,
            noise_level: noise_level
                .ok_or_else(|| Error::Usage("config: missing `snr_db` or `noise_variance`".into()))?,
            jmin_mode,
            algorithms,
            iterations,
            trials,
            seed,
            outputs: outputs.unwrap_or_else(|| OutputKind::ALL.into_iter().collect()),
            accumulators,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Usage("config: no `algorithm` lines".into()));
        }
        self.input.validate()?;
        self.noise_variance()?;
        for entry in &self.algorithms {
            self.algorithm(entry)?;
        }
        Ok(())
    }

    /// Power of the noiseless plant output at the initial plant.
    pub fn signal_power(&self) -> f64 {
        self.input.output_power(&self.plant.w_opt)
    }

    pub fn noise_variance(&self) -> Result<f64> {
        match self.noise_level {
            NoiseLevel::SnrDb(db) => scale_noise_for_snr(self.signal_power(), db),
            NoiseLevel::Variance(v) if v.is_finite() && v > 0.0 => Ok(v),
            NoiseLevel::Variance(v) => Err(Error::invalid("noise_variance", format!("must be > 0, got {v}"))),
        }
    }

    pub fn noise_spec(&self, entry: &AlgorithmEntry) -> Result<NoiseSpec> {
        NoiseSpec::new(entry.noise.unwrap_or(self.noise_family), self.noise_variance()?)
    }

    /// The entry's constraint level. NCLMF constrains e⁴, so its default
    /// level is the tabulated E[ξ⁴]; ZNCLMAT ignores J_min.
    pub fn j_min(&self, entry: &AlgorithmEntry) -> Result<f64> {
        if let Some(j) = entry.j_min {
            return Ok(j);
        }
        let noise = self.noise_spec(entry)?;
        Ok(match entry.rule {
            Rule::Lmat | Rule::Znclmat => 0.0,
            Rule::Nclmf => noise.fourth_moment(),
            Rule::Nclmat => entry.jmin_mode.unwrap_or(self.jmin_mode).resolve(&noise),
        })
    }

    pub fn algorithm(&self, entry: &AlgorithmEntry) -> Result<Algorithm> {
        if entry.rule == Rule::Lmat {
            let a = Algorithm::lmat(entry.alpha);
            a.params.validate()?;
            return Ok(a);
        }
        let params = NcParams::new(entry.alpha, entry.beta, entry.gamma, self.j_min(entry)?)?;
        Ok(Algorithm {
            rule: entry.rule,
            params,
        })
    }

    pub fn with_overrides(
        mut self,
        trials: Option<usize>,
        iterations: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if let Some(t) = trials {
            self.trials = t;
        }
        if let Some(i) = iterations {
            self.iterations = i;
        }
        if let Some(s) = seed {
            self.seed = Seed(s);
        }
        self.validate()?;
        Ok(self)
    }

    /// Ten times fewer trials and iterations, for smoke runs.
    pub fn quick(mut self) -> Self {
        self.trials = (self.trials / 10).max(1);
        self.iterations = (self.iterations / 10).max(1);
        self
    }

    /// Serialises back to the text format; `parse` of the result yields an
    /// equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        if !self.description.is_empty() {
            let _ = writeln!(s, "description = {}", self.description.replace('#', ""));
        }
        let taps: Vec<String> = self.plant.w_opt.as_slice().iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "taps = {}", taps.join(", "));
        match self.input {
            InputSpec::White { variance } => {
                let _ = writeln!(s, "input = white\ninput_variance = {variance}");
            }
            InputSpec::Ar1 { rho, driving_variance } => {
                let _ = writeln!(s, "input = ar1:{rho}\ninput_variance = {driving_variance}");
            }
        }
        let _ = writeln!(s, "noise = {}", self.noise_family);
        match self.noise_level {
            NoiseLevel::SnrDb(db) => {
                let _ = writeln!(s, "snr_db = {db}");
            }
            NoiseLevel::Variance(v) => {
                let _ = writeln!(s, "noise_variance = {v}");
            }
        }
        match self.plant.drift {
            PlantDrift::Stationary => {
                let _ = writeln!(s, "plant = stationary");
            }
            PlantDrift::RandomWalk { variance } => {
                let _ = writeln!(s, "plant = random_walk:{variance}");
            }
        }
        let _ = writeln!(s, "jmin_mode = {}", self.jmin_mode.name());
        let _ = writeln!(
            s,
            "iterations = {}\ntrials = {}\nseed = {}",
            self.iterations, self.trials, self.seed.0
        );
        let outs: Vec<&str> = self.outputs.iter().map(|o| o.name()).collect();
        let _ = writeln!(s, "outputs = {}", outs.join(", "));
        let acc = match self.accumulators {
            AccumulatorMode::Discounted => "discounted",
            AccumulatorMode::Literal => "literal",
        };
        let _ = writeln!(s, "theory_accumulators = {acc}");
        for e in &self.algorithms {
            let _ = write!(s, "algorithm = {} label={}", e.rule, e.label);
            if e.rule == Rule::Lmat {
                let _ = write!(s, " mu={}", e.alpha);
            } else {
                let _ = write!(s, " alpha={} beta={} gamma={}", e.alpha, e.beta, e.gamma);
            }
            if let Some(j) = e.j_min {
                let _ = write!(s, " j_min={j}");
            }
            if let Some(m) = e.jmin_mode {
                let _ = write!(s, " jmin_mode={}", m.name());
            }
            if let Some(n) = e.noise {
                let _ = write!(s, " noise={n}");
            }
            s.push('\n');
        }
        s
    }
}

pub const DEFAULT_PLANT: [f64; 5] = [0.0227, 0.46, 0.688, 0.46, 0.227];

fn parse_f64(value: &str, line: usize, key: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::config(line, format!("`{key}` must be a finite number, got `{value}`")))
}

fn parse_algorithm(value: &str, line: usize) -> Result<AlgorithmEntry> {
    let mut tokens = value.split_whitespace();
    let rule_name = tokens
        .next()
        .ok_or_else(|| Error::config(line, "empty algorithm line"))?;
    let rule = Rule::parse(rule_name).ok_or_else(|| Error::config(line, format!("unknown algorithm `{rule_name}`")))?;
    let mut entry = AlgorithmEntry::new(rule);
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("expected `key=value`, got `{tok}`")))?;
        match k {
            "label" => entry.label = v.to_string(),
            "alpha" | "mu" => entry.alpha = parse_f64(v, line, k)?,
            "beta" => entry.beta = parse_f64(v, line, k)?,
            "gamma" => entry.gamma = parse_f64(v, line, k)?,
            "j_min" => entry.j_min = Some(parse_f64(v, line, k)?),
            "jmin_mode" => {
                entry.jmin_mode =
                    Some(JminMode::parse(v).ok_or_else(|| Error::config(line, format!("invalid jmin_mode `{v}`")))?)
            }
            "noise" => {
                entry.noise =
                    Some(NoiseFamily::parse(v).ok_or_else(|| Error::config(line, format!("invalid noise `{v}`")))?)
            }
            _ => return Err(Error::config(line, format!("unknown algorithm key `{k}`"))),
        }
    }
    if entry.alpha.is_nan() {
        return Err(Error::config(
            line,
            format!("algorithm `{rule_name}` needs a step-size"),
        ));
    }
    Ok(entry)
}

const PRESETS: [&str; 9] = [
    include_str!("presets/figure1.cfg"),
    include_str!("presets/figure2.cfg"),
    include_str!("presets/figure3.cfg"),
    include_str!("presets/figure4.cfg"),
    include_str!("presets/figure5.cfg"),
    include_str!("presets/figure6.cfg"),
    include_str!("presets/figure7.cfg"),
    include_str!("presets/figure8.cfg"),
    include_str!("presets/figure9.cfg"),
];

/// The embedded configuration for figure `id` (1..=9).
pub fn preset(id: u32) -> Result<ExperimentConfig> {
    let text = preset_text(id)?;
    ExperimentConfig::parse(text)
}

pub fn preset_text(id: u32) -> Result<&'static str> {
    match id {
        1..=9 => Ok(PRESETS[id as usize - 1]),
        _ => Err(Error::UnknownFigure(id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "noise = gaussian\nsnr_db = 20\nalgorithm = nclmat alpha=0.001 beta=0.01 gamma=10\n";

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.iterations, 5000);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.plant.w_opt.as_slice(), &DEFAULT_PLANT);
        assert_eq!(cfg.jmin_mode, JminMode::Variance);
        assert_eq!(cfg.outputs.len(), 5);
        let e = &cfg.algorithms[0];
        assert_eq!(cfg.j_min(e).unwrap(), cfg.noise_variance().unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "noise = gaussian\nsnr_db = 20\n",
            "noise = pink\nsnr_db = 20\nalgorithm = lmat mu=0.1\n",
            "noise = gaussian\nalgorithm = lmat mu=0.1\n",
            "noise = gaussian\nsnr_db = 20\nalgorithm = rls mu=0.1\n",
            "noise = gaussian\nsnr_db = 20\nalgorithm = nclmat alpha=0.1 beta=3 gamma=1\n",
            "noise = gaussian\nsnr_db = 20\niterations = 0\nalgorithm = lmat mu=0.1\n",
            "noise = gaussian\nsnr_db = 20\ncolour = red\nalgorithm = lmat mu=0.1\n",
            "noise = gaussian\nsnr_db = 20\nalgorithm = nclmat beta=0.1 gamma=1\n",
            "noise = gaussian\nsnr_db = 20\ninput = ar1:1.5\nalgorithm = lmat mu=0.1\n",
        ] {
            let err = ExperimentConfig::parse(bad).unwrap_err();
            assert!(err.is_config_error(), "{bad}: {err}");
        }
    }

    #[test]
    fn error_reports_line_number() {
        let err = ExperimentConfig::parse("noise = gaussian\n\nsnr_db = loud\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn jmin_resolution_per_rule() {
        let text = "noise = uniform\nnoise_variance = 0.01\njmin_mode = third_abs_moment\n\
                    algorithm = nclmat alpha=0.01 beta=0.01 gamma=1\n\
                    algorithm = znclmat alpha=0.01 beta=0.01 gamma=1\n\
                    algorithm = nclmf alpha=0.01 beta=0.01 gamma=1\n\
                    algorithm = nclmat alpha=0.01 beta=0.01 gamma=1 jmin_mode=variance\n\
                    algorithm = nclmat alpha=0.01 beta=0.01 gamma=1 j_min=0.5\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let j: Vec<f64> = cfg.algorithms.iter().map(|e| cfg.j_min(e).unwrap()).collect();
        assert!((j[0] - 3.0 * 3f64.sqrt() / 4.0 * 1e-3).abs() < 1e-15);
        assert_eq!(j[1], 0.0);
        assert!((j[2] - 1.8e-4).abs() < 1e-15);
        assert_eq!(j[3], 0.01);
        assert_eq!(j[4], 0.5);
    }

    #[test]
    fn snr_uses_analytic_output_power() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert!((cfg.noise_variance().unwrap() - 0.00948589).abs() < 1e-8);
    }

    #[test]
    fn all_presets_parse_and_round_trip() {
        for id in 1..=9 {
            let cfg = preset(id).unwrap();
            let again = ExperimentConfig::parse(&cfg.to_config_string()).unwrap();
            assert_eq!(cfg.algorithms, again.algorithms, "figure {id}");
            assert_eq!(cfg.iterations, again.iterations);
            assert_eq!(cfg.plant, again.plant);
            assert_eq!(cfg.noise_variance().unwrap(), again.noise_variance().unwrap());
        }
        assert!(matches!(preset(0), Err(Error::UnknownFigure(0))));
        assert!(matches!(preset(10), Err(Error::UnknownFigure(10))));
    }

    #[test]
    fn preset_contents() {
        let p1 = preset(1).unwrap();
        assert_eq!((p1.iterations, p1.trials), (5000, 10));
        assert_eq!(p1.noise_family, NoiseFamily::Uniform);
        assert_eq!(p1.noise_level, NoiseLevel::SnrDb(20.0));
        assert!(p1.outputs.contains(&OutputKind::TheoryOverlay));
        let a = &p1.algorithms[0];
        assert_eq!((a.rule, a.beta, a.gamma), (Rule::Nclmat, 0.001, 1000.0));

        let p5 = preset(5).unwrap();
        assert_eq!(p5.iterations, 10000);
        let grid: Vec<(f64, f64)> = p5.algorithms.iter().map(|a| (a.beta, a.gamma)).collect();
        assert!(grid.contains(&(0.001, 5000.0)) && grid.contains(&(0.01, 1000.0)));

        let p6 = preset(6).unwrap();
        let families: Vec<_> = p6.algorithms.iter().filter_map(|a| a.noise).collect();
        assert_eq!(families.len(), 4);

        let p7 = preset(7).unwrap();
        assert_eq!(p7.noise_level, NoiseLevel::Variance(1.0));
        assert!(matches!(p7.input, InputSpec::Ar1 { rho, .. } if rho == 0.8));
        let nclmf = p7.algorithms.iter().find(|a| a.rule == Rule::Nclmf).unwrap();
        assert_eq!((nclmf.alpha, nclmf.beta, nclmf.gamma), (0.001, 0.0001, 500.0));
    }

    #[test]
    fn quick_scales_down() {
        let q = preset(4).unwrap().quick();
        assert_eq!((q.trials, q.iterations), (3, 500));
    }
}
