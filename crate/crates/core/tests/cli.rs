use std::path::Path;
use std::process::{Command, Output};

use geninv::matrixlab::{sample_noise, write_matrix, DMatrix, Noise};

fn geninv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geninv"))
        .args(args)
        .output()
        .expect("run geninv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(name).filter(|r| r.starts_with(' ')))
        .unwrap_or_else(|| panic!("no `{name}` in:\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn asymptotic_figure1() {
    let o = geninv(&["asymptotic", "--c", "2", "--spectrum", "0.2:1,0.4:3,0.4:10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((field(&text, "nfl") - 1.196).abs() < 1e-3);
    assert_eq!(field(&text, "fro_minus"), 0.166644);
    assert_eq!(field(&text, "m0"), 0.253399);

    let csv = stdout(&geninv(&["asymptotic", "--c", "2", "--spectrum", "1:1", "--format", "csv"]));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("c,fro_plus,fro_minus,nfl,m0,trace_minus"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((values[1] - 1.0).abs() < 1e-12 && (values[5] - 0.5).abs() < 1e-15);
}

#[test]
fn asymptotic_rejects_small_c() {
    let o = geninv(&["asymptotic", "--c", "0.5", "--spectrum", "1:1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error kind=validation exit=1:") && err.contains("c > 1"), "{err}");
    assert!(o.stdout.is_empty());

    let o = geninv(&["asymptotic", "--c", "2", "--spectrum", "0.5:1,0.5:-2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = geninv(&["asymptotic", "--c", "two"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(geninv(&["--help"]).status.code(), Some(0));
    assert_eq!(geninv(&["--version"]).status.code(), Some(0));
    assert!(stdout(&geninv(&["figure1", "--help"])).contains("--threads"));
}

#[test]
fn stieltjes_subcommand() {
    let o = geninv(&["stieltjes", "--which", "mp", "--z-re", "1", "--z-im", "1", "--c", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("which       mp"));

    let o = geninv(&[
        "stieltjes", "--which", "minus", "--z-re", "1", "--z-im", "1", "--c", "2", "--spectrum",
        "0.2:1,0.4:3,0.4:10", "--format", "csv",
    ]);
    let csv = stdout(&o);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let (re, im): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
    assert!((re + 0.43760).abs() < 1e-4 && (im - 0.57953).abs() < 1e-4, "{re} {im}");

    // lower half-plane and unknown transform are input errors
    assert_eq!(geninv(&["stieltjes", "--z-re", "1", "--z-im", "-1", "--c", "2"]).status.code(), Some(1));
    assert_eq!(
        geninv(&["stieltjes", "--which", "nope", "--z-re", "1", "--z-im", "1", "--c", "2"]).status.code(),
        Some(1)
    );
    // an iteration budget that cannot converge is a numerical failure
    let o = geninv(&["stieltjes", "--z-re", "1", "--z-im", "1", "--c", "2", "--tol", "1e-300", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=numerical exit=2:"));
}

#[test]
fn density_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = geninv(&["density", "--c", "2", "--grid", "0:6:2000", "--epsilon", "1e-3", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((field(&stdout(&o), "mass") - 0.5).abs() < 0.02);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2001);
    assert_eq!(csv.lines().next(), Some("x,density"));

    let o = geninv(&["density", "--which", "mp", "--c", "2", "--grid", "0:6:10"]);
    assert_eq!(stdout(&o).lines().count(), 11);
    assert_eq!(geninv(&["density", "--c", "2", "--grid", "6:0:10"]).status.code(), Some(1));
    assert_eq!(geninv(&["density", "--c", "2", "--epsilon", "0"]).status.code(), Some(1));
}

#[test]
fn estimate_trivial_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("y.txt");
    std::fs::write(&file, "# p = 2, n = 1\n2\n0\n").unwrap();
    let o = geninv(&["estimate", "--file", path_str(&file)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    // S = diag(4, 0), S⁺ = diag(1/4, 0)
    assert_eq!(field(&text, "trace_plus"), 0.125);
    assert_eq!(field(&text, "fro_plus"), 0.03125);
    assert_eq!(field(&text, "c_eff"), 2.0);

    // p = 3 normalized by n = 2: S = diag(2, 0, 0), S⁺ = diag(1/2, 0, 0)
    std::fs::write(&file, "2\n0\n0\n").unwrap();
    let o = geninv(&["estimate", "--file", path_str(&file), "--n", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("p,n,c_eff,trace_plus,fro_plus"));
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[..3], [3.0, 2.0, 1.5]);
    assert!((row[3] - 1.0 / 6.0).abs() < 1e-15 && (row[4] - 1.0 / 12.0).abs() < 1e-15);
}

#[test]
fn estimate_simulated_identity() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("y.txt");
    let y = sample_noise(400, 200, Noise::Gaussian, 31).unwrap();
    write_matrix(&file, &y).unwrap();
    let o = geninv(&["estimate", "--file", path_str(&file), "--spectrum", "1:1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!((field(&text, "fro_plus") - 1.0).abs() < 0.1);
    assert_eq!(field(&text, "fro_plus_equiv"), 1.0);
    assert_eq!(field(&text, "m0"), 1.0);

    let sigma = dir.path().join("sigma.txt");
    write_matrix(&sigma, &DMatrix::identity(400, 400)).unwrap();
    let text = stdout(&geninv(&["estimate", "--file", path_str(&file), "--sigma", path_str(&sigma)]));
    assert!(field(&text, "nfl").abs() < 1e-6, "{text}");
    assert!((field(&text, "precision_estimate") - 1.0).abs() < 0.1);
}

#[test]
fn estimate_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 2\n3 4\n5 x\n").unwrap();
    let o = geninv(&["estimate", "--file", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.starts_with("error kind=io exit=3:") && err.contains("bad.txt:3:"), "{err}");

    let square = dir.path().join("square.txt");
    std::fs::write(&square, "1 0\n0 1\n").unwrap();
    assert_eq!(geninv(&["estimate", "--file", path_str(&square)]).status.code(), Some(1));
    assert_eq!(geninv(&["estimate", "--file", path_str(&dir.path().join("missing"))]).status.code(), Some(3));
}

#[test]
fn sweep_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    let from_file = dir.path().join("file.csv");
    std::fs::write(
        &config,
        format!(
            "c_list = [2.0, 4.0]\np_grid = [20, 40]\nreplications = 2\nspectrum = \"1:1\"\nnoise = \"rademacher\"\nseed = 3\nout = \"{}\"\n",
            path_str(&from_file)
        ),
    )
    .unwrap();
    let o = geninv(&["sweep", "--config", path_str(&config)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&from_file).unwrap().lines().count(), 1 + 2 * 2 * 2);

    // flags win over the file
    let flagged = dir.path().join("flag.csv");
    let o = geninv(&["sweep", "--config", path_str(&config), "--reps", "1", "--p-grid", "30", "--out", path_str(&flagged)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&flagged).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("30")));
    let summary = std::fs::read_to_string(dir.path().join("flag_summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("c_target,p,mean_nfl,sd_nfl,nfl_asym,n_ok,n_failed"));

    std::fs::write(&config, "c_list = [2.0]\nbogus = 1\n").unwrap();
    let o = geninv(&["sweep", "--config", path_str(&config)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failed_sweep_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = geninv(&["sweep", "--c-list", "2,0.9", "--p-grid", "20", "--reps", "1", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = geninv(&["sweep", "--c-list", "2", "--p-grid", "20", "--reps", "1", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn seeded_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = geninv(&["sweep", "--c-list", "2,10", "--p-grid", "50:100:50", "--reps", "3", "--seed", seed, "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(&out).unwrap(), o.stdout.clone())
    };
    let a = run("a.csv", "11");
    let b = run("b.csv", "11");
    let c = run("c.csv", "12");
    assert_eq!(a.0, b.0);
    assert_ne!(a.0, c.0);
    // stdout only differs in the output file name
    let strip = |s: &[u8]| String::from_utf8_lossy(s).lines().filter(|l| !l.starts_with("wrote")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a.1), strip(&b.1));
}

#[test]
fn figure1_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = geninv(&["figure1", "--reps", "2", "--seed", "42", "--out", path_str(&out), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 10 * 2);
    assert_eq!(
        csv.lines().next(),
        Some("c_target,c_eff,p,n,replicate,seed,fro_plus_emp,fro_minus_emp,nfl_emp,nfl_asym,trace_minus_emp,precision_estimate")
    );
    assert_eq!(geninv(&["figure1", "--reps", "0"]).status.code(), Some(1));
    assert_eq!(geninv(&["figure1", "--reps", "1", "--threads", "0", "--out", path_str(&out)]).status.code(), Some(1));
}
