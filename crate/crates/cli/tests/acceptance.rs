//! Acceptance suite. Every check runs at its fixed tolerance and prints one
//! PASS/FAIL line; the process exits non-zero if any check fails.
//!
//! Run with `cargo test -p nclmat-cli --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode};

use nclmat_core::algorithms::{lmat_step, nclmat_step, znclmat_step};
use nclmat_core::filter::to_db;
use nclmat_core::harness::{moment_report, run_experiment, steady_bounds, steady_window, theory_params, Experiment};
use nclmat_core::signals::{gen_white_gaussian, substream};
use nclmat_core::theory::SQRT_2_OVER_PI;
use nclmat_core::{
    preset, ExperimentConfig, LearningCurve, NcParams, NcState, NoiseFamily, RegressorWindow, Seed, Stream,
};

type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn tail_mean(v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let w = steady_window(v.len());
    v[v.len() - w..].iter().map(|&x| f(x)).sum::<f64>() / w as f64
}

fn curve<'a>(exp: &'a Experiment, label: &str) -> &'a LearningCurve {
    exp.curves.iter().find(|c| c.label == label).expect("preset label")
}

fn reduction_identity() -> Outcome {
    const ITERS: usize = 10_000;
    let x = gen_white_gaussian(ITERS, 1.0, &mut substream(Seed(11), 0, Stream::Input));
    let xi = gen_white_gaussian(ITERS, 0.01, &mut substream(Seed(11), 0, Stream::Noise));
    let plant = [0.0227, 0.46, 0.688, 0.46, 0.227];
    let p = NcParams::new(0.003, 0.001, 0.0, 0.01).unwrap();
    let pz = NcParams::new(0.003, 0.001, 1000.0, 0.4).unwrap();
    let (mut nc, mut lm) = (NcState::new(5), NcState::new(5));
    let (mut zn, mut nc0) = (NcState::new(5), NcState::new(5));
    let mut win = RegressorWindow::zeros(5);
    let mut max_diff = 0.0f64;
    let mut z_identical = true;
    for k in 0..ITERS {
        win.push(x[k]);
        let d = plant.iter().zip(win.as_slice()).map(|(w, x)| w * x).sum::<f64>() + xi[k];
        nclmat_step(&mut nc, &win, d, &p);
        lmat_step(&mut lm, &win, d, p.alpha);
        for (a, b) in nc.weights.as_slice().iter().zip(lm.weights.as_slice()) {
            max_diff = max_diff.max((a - b).abs());
        }
        znclmat_step(&mut zn, &win, d, &pz);
        nclmat_step(&mut nc0, &win, d, &pz.with_j_min(0.0));
        z_identical &= zn == nc0;
    }
    outcome(
        max_diff < 1e-12 && z_identical,
        format!("max |w_nclmat(γ=0) − w_lmat| = {max_diff:.3e}; ZNCLMAT ≡ NCLMAT(J_min=0): {z_identical}"),
    )
}

fn moment_table() -> Outcome {
    let cases = [
        (NoiseFamily::Gaussian, 1_000_000, 0.05),
        (NoiseFamily::Uniform, 1_000_000, 0.05),
        (NoiseFamily::Binary, 1_000_000, 0.05),
        (NoiseFamily::Rayleigh, 1_000_000, 0.05),
        (NoiseFamily::Exponential, 10_000_000, 0.08),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (family, n, tol) in cases {
        let r = moment_report(family, 1.0, n, Seed(2)).unwrap();
        let err = r.raw_vs_table();
        pass &= err < tol;
        parts.push(format!(
            "{family} raw {:.3}/{} ({:.2}%) centered {:.3}",
            r.raw_fourth_ratio,
            r.table_fourth_ratio,
            100.0 * err,
            r.fourth_ratio
        ));
    }
    outcome(pass, parts.join("; "))
}

fn theory_agreement(exp: &Experiment) -> Outcome {
    let sim = curve(exp, "NCLMAT").steady_msd_db();
    let o = exp.overlay.as_ref().expect("preset 1 carries the overlay");
    let Some(fp) = o.fixed_point.map(|s| to_db(s.msd)) else {
        return outcome(false, "fixed point undefined");
    };
    let closed = o.closed_form.map(|s| to_db(s.msd));
    let closed_note = match closed {
        Some(c) if (c - sim).abs() <= 6.0 => format!("closed form {c:.2} dB (within 6 dB)"),
        Some(c) => format!("closed form {c:.2} dB, {:.2} dB from simulation", (c - sim).abs()),
        None => "closed form undefined".into(),
    };
    outcome(
        (fp - sim).abs() <= 3.0,
        format!(
            "simulated {sim:.2} dB, fixed point {fp:.2} dB (|Δ| {:.2} dB); {closed_note}",
            (fp - sim).abs()
        ),
    )
}

fn multiplier_and_step_size(exp: &Experiment) -> Outcome {
    let c = curve(exp, "NCLMAT");
    let alpha = exp.config.algorithms[0].alpha;
    let n = c.lambda_k.len();
    let (peak_at, peak) = c
        .lambda_k
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let final_abs = tail_mean(&c.lambda_k, f64::abs);
    let alpha_max = c.alpha_k.iter().cloned().fold(f64::MIN, f64::max);
    let alpha_final = tail_mean(&c.alpha_k, |v| v);
    let lambda_ok = peak > 0.0 && (peak_at as f64) < 0.2 * n as f64 && final_abs < 0.1 * peak;
    let alpha_ok = alpha_max > alpha_final && rel(alpha_final, alpha) <= 0.2;
    outcome(
        lambda_ok && alpha_ok,
        format!(
            "λ peak {peak:.3e} at iteration {} of {n}, final |λ| {final_abs:.3e} ({:.1}% of peak); \
             α_k max {alpha_max:.3e}, final {alpha_final:.3e} ({:+.1}% from α)",
            peak_at + 1,
            100.0 * final_abs / peak,
            100.0 * (alpha_final / alpha - 1.0)
        ),
    )
}

fn tracking_ordering() -> Outcome {
    let exp = run_experiment(&preset(4).unwrap()).unwrap();
    let (nc, lm) = (curve(&exp, "NCLMAT"), curve(&exp, "LMAT"));
    if !lm.is_valid() || !nc.is_valid() {
        return outcome(
            false,
            format!(
                "not comparable: LMAT diverged in {}/{} trials, NCLMAT in {}/{}",
                lm.diverged_trials, lm.trials, nc.diverged_trials, nc.trials
            ),
        );
    }
    let level = *lm.msd.last().unwrap();
    let (reach_nc, reach_lm) = (nc.first_reach(level), lm.first_reach(level));
    let faster = matches!((reach_nc, reach_lm), (Some(a), Some(b)) if a < b);
    outcome(
        nc.steady_msd() < lm.steady_msd() && faster,
        format!(
            "steady NCLMAT {:.2} dB vs LMAT {:.2} dB; first reach of LMAT final level: NCLMAT {reach_nc:?}, LMAT {reach_lm:?}",
            nc.steady_msd_db(),
            lm.steady_msd_db()
        ),
    )
}

fn noise_family_ordering() -> Outcome {
    let exp = run_experiment(&preset(6).unwrap()).unwrap();
    let mut ranked: Vec<&LearningCurve> = exp.curves.iter().collect();
    ranked.sort_by(|a, b| a.steady_msd().total_cmp(&b.steady_msd()));
    let order: Vec<String> = ranked
        .iter()
        .map(|c| format!("{} {:.3} dB", c.label, c.steady_msd_db()))
        .collect();
    let (best, worst) = (ranked[0], ranked[ranked.len() - 1]);
    let (ray, uni) = (curve(&exp, "Rayleigh"), curve(&exp, "Uniform"));
    let gap = uni.steady_msd() - ray.steady_msd();
    let se = ray.steady_msd_stderr().max(uni.steady_msd_stderr());
    outcome(
        best.label == "Rayleigh" && worst.label == "Uniform" && gap > 2.0 * se,
        format!(
            "best to worst: {}; Uniform − Rayleigh {gap:.3e}, 2·SE {:.3e}",
            order.join(", "),
            2.0 * se
        ),
    )
}

fn stability_gate() -> Outcome {
    let base = preset(1).unwrap();
    let tp = theory_params(&base, &base.algorithms[0]).unwrap();
    let Some(bound) = steady_bounds(&tp).ms_stability_bound else {
        return outcome(false, "bound undefined");
    };
    let msd0 = base.plant.w_opt.squared_norm();
    let blowups = |scale: f64| {
        let mut cfg = base.clone();
        cfg.algorithms[0].alpha = scale * bound;
        let exp = run_experiment(&cfg).unwrap();
        let c = &exp.curves[0];
        let diverged = c.diverged_trials;
        let exceeded = c
            .per_trial
            .iter()
            .filter(|t| t.diverged_at.is_none() && t.peak_msd > 100.0 * msd0)
            .count();
        (diverged, exceeded, c.trials)
    };
    let (d_low, _, n_low) = blowups(0.5);
    let (d_high, e_high, n_high) = blowups(4.0);
    outcome(
        d_low == 0 && d_high + e_high >= 8,
        format!(
            "bound {bound:.4e}; 0.5x: {d_low}/{n_low} diverged; 4x: {}/{n_high} diverged or +20 dB",
            d_high + e_high
        ),
    )
}

fn gaussian_identities() -> Outcome {
    const N: usize = 10_000_000;
    let sigma: f64 = 1.3;
    let e = gen_white_gaussian(N, sigma * sigma, &mut substream(Seed(8), 0, Stream::Noise));
    let n = N as f64;
    let m1 = e.iter().map(|v| v.abs()).sum::<f64>() / n;
    let m3 = e.iter().map(|v| v.abs().powi(3)).sum::<f64>() / n;
    let m6 = e.iter().map(|v| v.powi(6)).sum::<f64>() / n;
    let errs = [
        rel(m1, SQRT_2_OVER_PI * sigma),
        rel(m3, 2.0 * SQRT_2_OVER_PI * sigma.powi(3)),
        rel(m6, 15.0 * sigma.powi(6)),
    ];
    outcome(
        errs.iter().all(|&r| r < 0.02),
        format!(
            "relative errors E|e| {:.3}%, E|e|³ {:.3}%, E e⁶ {:.3}%",
            100.0 * errs[0],
            100.0 * errs[1],
            100.0 * errs[2]
        ),
    )
}

fn mse_decomposition(exp: &Experiment) -> Outcome {
    let c = curve(exp, "NCLMAT");
    let predicted = exp.config.input.power() * c.steady_msd();
    let measured = c.steady_mse() - exp.noise_variance;
    let noise_free = c.steady_excess_mse();
    outcome(
        rel(measured, predicted) <= 0.15,
        format!(
            "MSE − σ_ξ² = {measured:.4e}, σ_x²·MSD = {predicted:.4e} ({:.1}% off); \
             noise-free error power (e − ξ)² = {noise_free:.4e} ({:.1}% off)",
            100.0 * rel(measured, predicted),
            100.0 * rel(noise_free, predicted)
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_nclmat"))
            .args(["figure", "1", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("exit {:?}", status.status.code()));
        }
        std::fs::read(Path::new(&out).join("figure1.csv")).map_err(|e| e.to_string())
    };
    match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => outcome(
            a == b,
            format!("{} and {} bytes, identical: {}", a.len(), b.len(), a == b),
        ),
        (a, b) => outcome(false, format!("run failed: {:?} / {:?}", a.err(), b.err())),
    }
}

fn main() -> ExitCode {
    let fig1: ExperimentConfig = preset(1).unwrap();
    let exp1 = run_experiment(&fig1).unwrap();

    let checks: Vec<Check> = vec![
        ("reduction identity", Box::new(reduction_identity)),
        ("fourth-moment table", Box::new(moment_table)),
        (
            "steady-state theory vs simulation",
            Box::new(|| theory_agreement(&exp1)),
        ),
        (
            "multiplier and step-size trajectories",
            Box::new(|| multiplier_and_step_size(&exp1)),
        ),
        ("tracking: NCLMAT vs LMAT", Box::new(tracking_ordering)),
        ("noise-family ordering", Box::new(noise_family_ordering)),
        ("mean-square stability gate", Box::new(stability_gate)),
        ("Gaussian error-moment identities", Box::new(gaussian_identities)),
        ("MSE decomposition", Box::new(|| mse_decomposition(&exp1))),
        ("CLI determinism", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("\n{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
