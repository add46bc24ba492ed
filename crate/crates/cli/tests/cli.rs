use std::path::Path;
use std::process::{Command, Output};

fn nclmat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nclmat"))
        .args(args)
        .env("NCLMAT_OUT", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn figure_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = nclmat(&["figure", "1", "--trials", "2", "--iters", "300"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("figure1.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "iteration,algorithm,msd_db,mse,alpha_k,lambda_k,theory_msd_db"
    );
    assert_eq!(csv.lines().count(), 301);
    let json = std::fs::read_to_string(dir.path().join("figure1.json")).unwrap();
    assert!(json.contains("\"steady_msd_db_fixed_point\""));
}

#[test]
fn run_accepts_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mini.cfg");
    std::fs::write(
        &cfg,
        "name = mini\nnoise = gaussian\nsnr_db = 30\niterations = 200\ntrials = 2\n\
         algorithm = nclmat alpha=0.003 beta=0.001 gamma=1000\nalgorithm = lmat mu=0.003\n",
    )
    .unwrap();
    let o = nclmat(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("mini.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 200);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = nclmat(&["figure", "12"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = nclmat(&["run", "--figure", "1", "--config", "x.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not both"));
    let o = nclmat(&["run", "--figure", "1", "--trials", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "name = bad\niterations = many\n").unwrap();
    let o = nclmat(&["run", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn all_trials_diverged_exits_with_three_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.cfg");
    std::fs::write(
        &cfg,
        "name = blowup\nnoise = gaussian\nsnr_db = 20\niterations = 500\ntrials = 3\nalgorithm = lmat mu=50\n",
    )
    .unwrap();
    let o = nclmat(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("blowup.csv").exists());
    assert!(dir.path().join("blowup.json").exists());
}

#[test]
fn theory_prints_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = nclmat(&["theory", "--figure", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("mean-square stability bound"));
    assert!(text.contains("steady-state MSD (fixed point)"));
}

#[test]
fn theory_without_nclmat_entry_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lmat.cfg");
    std::fs::write(&cfg, "name = lmat\nalgorithm = lmat mu=0.001\n").unwrap();
    let o = nclmat(&["theory", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn moments_reports_every_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = nclmat(&["moments", "--family", "rayleigh", "--n", "20000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("raw vs table"));
    assert!(text.contains("centered"));
    let o = nclmat(&["moments", "--family", "cauchy"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_result_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = nclmat(
        &[
            "sweep",
            "--figure",
            "1",
            "--trials",
            "1",
            "--iters",
            "100",
            "--alpha",
            "0.001,0.003",
            "--gamma",
            "100,1000",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csvs = std::fs::read_dir(dir.path().join("figure1_sweep"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
    let o = nclmat(&["sweep", "--figure", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
