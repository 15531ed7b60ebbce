use std::path::Path;
use std::process::{Command, Output};

fn npd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npd")).args(args).current_dir(dir).output().expect("spawn npd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Ramanujan sum by its defining cosine sum, rounded to the integer it is.
fn ramanujan(q: i64, n: i64) -> i64 {
    let s: f64 = (1..=q)
        .filter(|&k| gcd(k, q) == 1)
        .map(|k| (2.0 * std::f64::consts::PI * (k * n) as f64 / q as f64).cos())
        .sum();
    s.round() as i64
}

fn totient(q: i64) -> i64 {
    (1..=q).filter(|&k| gcd(k, q) == 1).count() as i64
}

fn value(csv: &str, measure: &str) -> f64 {
    let line = csv.lines().find(|l| l.starts_with(&format!("{measure},"))).expect("measure row");
    line.rsplit(',').next().unwrap().parse().unwrap()
}

#[test]
fn small_rpt_dictionary_has_the_shifted_ramanujan_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        npd(&["dict", "--family", "rpt", "--pmax", "6", "--len", "8", "--no-normalize", "--out", "d.npd"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("d.npd")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("npd v1 family=rpt L=8 pmax=6"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);

    let mut expected_cols = Vec::new();
    for q in 1..=6 {
        for shift in 0..totient(q) {
            expected_cols.push((0..8).map(|n| ramanujan(q, n - shift)).collect::<Vec<_>>());
        }
    }
    assert_eq!(expected_cols.len(), 12);
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 12);
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, expected_cols[j][n] as f64, "row {n} column {}", j + 1);
        }
    }
    // the period-5 block sits in columns 7..=10 and starts with c_5 = 4, -1, -1, -1, -1
    let first: Vec<f64> = rows.iter().take(5).map(|r| r[6]).collect();
    assert_eq!(first, vec![4.0, -1.0, -1.0, -1.0, -1.0]);
}

#[test]
fn coherence_and_thm2_on_an_exported_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let o = npd(&["dict", "--family", "rpt", "--pmax", "20", "--len", "100", "--out", "d20.npd"], dir.path());
    assert!(o.status.success());

    let o = npd(&["coherence", "--dict", "d20.npd", "--measure", "mu"], dir.path());
    assert!(o.status.success());
    let mu = value(&stdout(&o), "mu");
    assert!((mu - 0.5285).abs() < 5e-5, "mu = {mu}");

    let o = npd(&["bounds", "--dict", "d20.npd", "--condition", "thm2", "--periods", "4"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let header: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    // the periods cell is quoted and contains commas; count fields from the end
    let from_end = |name: &str| row[row.len() - (header.len() - col(name))];
    assert_eq!(from_end("holds"), "true");
    assert!(from_end("lhs").parse::<f64>().unwrap() < 1.0);

    let o = npd(&["bounds", "--dict", "d20.npd", "--condition", "thm2", "--periods", "4", "--eps", "0.5"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let fields: Vec<&str> = out.lines().nth(1).unwrap().rsplitn(3, ',').collect();
    let threshold: f64 = fields[1].parse().unwrap();
    assert!((threshold - 1.2097).abs() < 1e-3, "threshold = {threshold}");
}

#[test]
fn exit_codes_separate_usage_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| npd(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["phase", "--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["coherence", "--family", "rpt", "--pmax", "20", "--len", "100", "--no-such-flag"]), 1);
    assert_eq!(code(&["coherence", "--family", "rpt"]), 1);
    assert_eq!(code(&["coherence", "--dict", "missing.npd"]), 2);
    // thm2 fails for {3,4} at 20/100, so the noise threshold is a runtime error
    let o = npd(
        &[
            "bounds",
            "--family",
            "rpt",
            "--pmax",
            "20",
            "--len",
            "100",
            "--condition",
            "thm2",
            "--periods",
            "3,4",
            "--eps",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).lines().any(|l| l.starts_with("error: ")));
    assert_eq!(code(&["sweep-bounded", "--levels", "1"]), 1);
}

#[test]
fn recover_reports_support_and_period() {
    let dir = tempfile::tempdir().unwrap();
    let samples: String = (0..100)
        .map(|n| {
            let t = 2.0 * std::f64::consts::PI * n as f64;
            format!("{}\n", (t / 4.0).cos() + 0.5 * (t / 3.0).cos())
        })
        .collect();
    std::fs::write(dir.path().join("y.txt"), samples).unwrap();
    for method in ["omp", "bp"] {
        let mut args =
            vec!["recover", "--family", "rpt", "--pmax", "20", "--len", "100", "--signal", "y.txt", "--method", method];
        if method == "omp" {
            args.extend(["--stop-eps", "1e-9"]);
        }
        let o = npd(&args, dir.path());
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert!(out.contains("periods: 3 4\n"), "{method}: {out}");
        assert!(out.contains("estimated_period: 12\n"), "{method}: {out}");
    }
}

#[test]
fn experiments_are_reproducible_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep-recovery",
        "--pmax",
        "12",
        "--len",
        "40",
        "--m",
        "2",
        "--k",
        "4..6",
        "--trials",
        "3",
        "--seed",
        "9",
        "--out",
        "run",
    ];
    let read_all = || ["run.csv", "run.svg", "run.config.json"].map(|f| std::fs::read(dir.path().join(f)).unwrap());
    let o = npd(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("seed: 9"));
    assert!(err.lines().any(|l| l.starts_with("config sha256: ") && l.len() == "config sha256: ".len() + 64));
    let first = read_all();
    let o = npd(&[&args[..], &["--jobs", "1"]].concat(), dir.path());
    assert!(o.status.success());
    assert_eq!(first, read_all());

    // stdout mode gives the same CSV
    let o = npd(&args[..args.len() - 2], dir.path());
    assert_eq!(o.stdout, first[0]);

    // flags override the config file
    let o = npd(&["sweep-recovery", "--config", "run.config.json", "--seed", "10"], dir.path());
    assert!(o.status.success());
    assert_ne!(o.stdout, first[0]);
}
