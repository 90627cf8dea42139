use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use joinpoint_cli::fit::FitsFile;
use joinpoint_cli::ingest::Store;
use joinpoint_cli::report::Report;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn joinpoint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_joinpoint"))
        .args(args)
        .output()
        .unwrap()
}

fn config() -> String {
    fixtures().join("config.toml").display().to_string()
}

fn run_pipeline(out: &Path, extra: &[&str]) -> Vec<i32> {
    let cfg = config();
    ["ingest", "fit", "report"]
        .iter()
        .map(|cmd| {
            let mut args = vec![*cmd, "--config", &cfg, "--out", out.to_str().unwrap()];
            args.extend_from_slice(extra);
            let o = joinpoint(&args);
            assert!(o.status.code().is_some(), "{cmd} was killed");
            o.status.code().unwrap()
        })
        .collect()
}

/// A config pointing at the fixture inputs with some keys replaced.
fn custom_config(dir: &Path, replace: &[(&str, &str)]) -> PathBuf {
    let fx = fixtures();
    let mut keys = vec![
        ("from", "\"2019-06-01\"".to_string()),
        ("to", "\"2019-08-29\"".to_string()),
        ("candidates", "[\"SANDERS\", \"WARREN\"]".to_string()),
        ("committee_map", format!("{:?}", fx.join("committees.csv"))),
        (
            "fec_files",
            format!(
                "[{:?}, {:?}]",
                fx.join("itcont_a.txt"),
                fx.join("itcont_b.txt")
            ),
        ),
        ("polls", format!("{:?}", fx.join("polls.csv"))),
        ("events", format!("{:?}", fx.join("events.csv"))),
    ];
    for (k, v) in replace {
        keys.retain(|(key, _)| key != k);
        if !v.is_empty() {
            keys.push((k, v.to_string()));
        }
    }
    let text: String = keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn fixture_pipeline_is_clean_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_pipeline(a.path(), &[]), vec![0, 0, 0]);
    assert_eq!(run_pipeline(b.path(), &[]), vec![0, 0, 0]);
    for file in ["store.json", "fits.json", "fits_long.csv", "report.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }

    let store = Store::load(&a.path().join("store.json")).unwrap();
    assert_eq!(store.donations.len(), 2);
    assert_eq!(store.polls.len(), 2);

    let fits = FitsFile::load(&a.path().join("fits.json")).unwrap();
    assert_eq!(fits.records.len(), 10);
    let keys: Vec<_> = fits
        .records
        .iter()
        .map(|r| (r.candidate.clone(), r.metric.clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for r in &fits.records {
        assert!(
            r.df.abs_diff(12) <= 2,
            "{}/{} df {}",
            r.candidate,
            r.metric,
            r.df
        );
    }

    let csv = std::fs::read_to_string(a.path().join("fits_long.csv")).unwrap();
    assert!(csv.starts_with("date,candidate,metric,observed,fitted\n"));
    assert_eq!(csv.lines().count(), 1 + 10 * 90);

    let text = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    let report = Report::load(&a.path().join("report.json")).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!(report.lead_lag.len(), 8);
}

#[test]
fn run_command_matches_steps() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path(), &[]);
    let o = joinpoint(&[
        "run",
        "--config",
        &config(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("report.json")).unwrap(),
        std::fs::read(b.path().join("report.json")).unwrap()
    );
}

#[test]
fn df_two_gives_lines() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_pipeline(out.path(), &["--df", "2"]), vec![0, 0, 0]);
    let fits = FitsFile::load(&out.path().join("fits.json")).unwrap();
    for r in &fits.records {
        assert_eq!((r.df, r.knots.len(), r.segments.len()), (2, 0, 1));
    }
    let report = Report::load(&out.path().join("report.json")).unwrap();
    assert!(report.series.iter().all(|s| s.changepoints.is_empty()));
    assert!(report.events.iter().all(|e| e.matches.is_empty()));
    let text = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    assert!(text.contains("\"matches\": []"));
}

#[test]
fn share_mode_sums_observed_to_one() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        run_pipeline(out.path(), &["--normalize", "share"]),
        vec![0, 0, 0]
    );
    let fits = FitsFile::load(&out.path().join("fits.json")).unwrap();
    let amounts: Vec<_> = fits
        .records
        .iter()
        .filter(|r| r.metric == "amount")
        .collect();
    assert_eq!(amounts.len(), 2);
    assert!(amounts.iter().all(|r| r.normalized));
    for i in 0..90 {
        let total: f64 = amounts.iter().map(|r| r.observed[i]).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn missing_committee_map_is_unusable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = custom_config(
        dir.path(),
        &[("committee_map", "\"/nonexistent/committees.csv\"")],
    );
    let o = joinpoint(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("committee map"));
}

#[test]
fn empty_contribution_file_warns() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let cfg = custom_config(
        dir.path(),
        &[
            ("fec_files", &format!("[{empty:?}]")),
            ("polls", ""),
            ("events", ""),
        ],
    );
    let out = dir.path().join("out");
    let o = joinpoint(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let store = Store::load(&out.join("store.json")).unwrap();
    assert!(store.donations.is_empty() && store.polls.is_empty());
    // nothing to fit
    let o = joinpoint(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_rows_only_warn() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    let good = std::fs::read_to_string(fixtures().join("itcont_a.txt")).unwrap();
    std::fs::write(&bad, format!("{good}C00696948|not|enough|fields\n")).unwrap();
    let cfg = custom_config(dir.path(), &[("fec_files", &format!("[{bad:?}]"))]);
    let out = dir.path().join("out");
    let o = joinpoint(&[
        "ingest",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 malformed line"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ingest_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["total"]["malformed"], 1);
}

#[test]
fn bad_flags_are_unusable() {
    let dir = tempfile::tempdir().unwrap();
    let o = joinpoint(&[
        "fit",
        "--config",
        &config(),
        "--out",
        dir.path().to_str().unwrap(),
        "--df",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = joinpoint(&["fit", "--out", dir.path().join("nothing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_output() {
    let args = [
        "synth", "--n-days", "61", "--knots", "30", "--slopes", "1,-1",
    ];
    let o = joinpoint(&args);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 61);
    assert_eq!(values[30], 30.0);
    assert_eq!((values[29], values[31]), (29.0, 29.0));

    let noisy = [&args[..], &["--noise-sd", "0.5", "--seed", "7"]].concat();
    assert_eq!(joinpoint(&noisy).stdout, joinpoint(&noisy).stdout);

    let bad = joinpoint(&["synth", "--n-days", "61", "--knots", "30", "--slopes", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = joinpoint(&[
        "synth", "--n-days", "61", "--knots", "60", "--slopes", "1,-1",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
