use soccer_cli::cli::run_cli;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("soccer").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(": "))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn constants_prints_sample_size() {
    let (code, out, _) = call(&[
        "constants",
        "--k",
        "25",
        "--delta",
        "0.1",
        "--epsilon",
        "0.05",
        "--n",
        "10000000",
    ]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "p1_size"), "11316");
    let eta: f64 = field(&out, "eta").parse().unwrap();
    assert!((eta - 11316.0).abs() < 1.0);
}

#[test]
fn missing_k_is_a_usage_error() {
    let (code, _, err) = call(&["run", "--dataset", "gaussian"]);
    assert_ne!(code, 0);
    assert!(err.contains("--k"), "{err}");
    assert!(err.to_lowercase().contains("usage"), "{err}");
    let (code, _, _) = call(&["run", "--k", "3", "--bogus"]);
    assert_ne!(code, 0);
}

#[test]
fn invalid_values_fail_with_a_diagnostic() {
    let (code, _, err) = call(&["run", "--k", "3", "--epsilon", "1.5", "--n", "100", "--reps", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("epsilon"), "{err}");
    let (code, _, err) = call(&["run", "--k", "3", "--dataset", "/nonexistent/file.csv"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn gen_hard_instance_rows() {
    let (code, out, _) = call(&["gen", "--hard-instance", "--k", "10", "--z", "100"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1800);
    assert!(out.lines().all(|l| l.split(',').count() == 10));
}

#[test]
fn gen_then_run_on_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mix.csv");
    let data = data.to_str().unwrap();
    let (code, _, err) = call(&[
        "gen", "--k", "4", "--n", "3000", "--dim", "3", "--seed", "5", "--out", data,
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = call(&[
        "run",
        "--dataset",
        data,
        "--k",
        "4",
        "--epsilon",
        "0.05",
        "--machines",
        "5",
        "--reps",
        "2",
        "--no-timing",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().nth(1).unwrap().starts_with("mix,soccer,4,0.05,"));
}

#[test]
fn runs_are_byte_identical_without_timing() {
    let args = [
        "run",
        "--k",
        "5",
        "--n",
        "4000",
        "--dim",
        "4",
        "--epsilon",
        "0.05",
        "--machines",
        "8",
        "--reps",
        "3",
        "--seed",
        "12",
        "--no-timing",
    ];
    let (code, a, _) = call(&args);
    assert_eq!(code, 0);
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let mut serial = args.to_vec();
    serial.push("--serial");
    assert_eq!(call(&serial).1, a);
    assert!(!a.lines().next().unwrap().contains("time"));

    let mut other = args.to_vec();
    other[12] = "13";
    assert_ne!(call(&other).1, a);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# k-means|| on a small mixture\nalgo = kmeans-parallel\nk = 4\nrounds = 2\nn = 2000\ndim = 3\nreps = 2\nmachines = 4\nno_timing = true\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let (code, out, err) = call(&["run", "--config", cfg, "--rounds", "3", "--format", "markdown"]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2 + 3);
    assert!(lines[0].starts_with("| dataset"));
    // rounds = 3 from the command line, output size 1 + 3 * 2k
    let cells: Vec<&str> = lines[2].split('|').map(str::trim).collect();
    assert_eq!(cells[2], "kmeans_parallel");
    assert_eq!(cells[5], "3");
    assert_eq!(cells[7], "25");
}
