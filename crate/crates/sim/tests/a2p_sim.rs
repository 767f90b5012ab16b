use std::fs;
use std::process::Command;

use a2p_core::metrics::{DelayStats, DispositionCounts};
use a2p_core::{RunSummary, Scheme};
use a2p_sim::output::{self, SummaryRow};
use a2p_sim::{read_summary, run_sweep, run_sweep_to_dir, Error, RunConfig, SweepSpec};
use proptest::prelude::*;

fn short_base(duration: &str) -> RunConfig {
    let mut c = RunConfig::default();
    c.set("duration", duration).unwrap();
    c
}

fn arb_summary() -> impl Strategy<Value = RunSummary> {
    let e2e = prop::option::of(
        (any::<u64>(), any::<f64>(), prop::array::uniform7(any::<u64>())).prop_map(|(count, mean, v)| DelayStats {
            count,
            mean,
            median: v[0],
            q1: v[1],
            q3: v[2],
            whisker_low: v[3],
            whisker_high: v[4],
            outliers: v[5],
            max: v[6],
        }),
    );
    (
        0usize..4,
        any::<u32>(),
        any::<u64>(),
        prop::array::uniform5(any::<u64>()),
        any::<f64>(),
        e2e,
        any::<u64>(),
        prop::option::of(any::<f64>()),
        prop::array::uniform4(any::<u64>()),
    )
        .prop_filter("finite reals", |t| t.4.is_finite() && t.7.is_none_or(f64::is_finite))
        .prop_filter("finite mean", |t| t.5.is_none_or(|e| e.mean.is_finite()))
        .prop_map(
            |(s, active_count, seed, c, loss, e2e, wakeup_count, wakeup_mean, x)| RunSummary {
                scheme: Scheme::ALL[s],
                active_count,
                seed,
                counts: DispositionCounts {
                    generated: c[0],
                    on_time: c[1],
                    outdated: c[2],
                    dropped: c[3],
                    in_flight: c[4],
                },
                loss_ratio: loss,
                e2e,
                wakeup_count,
                wakeup_mean,
                ul_exchanges: x[0],
                max_ul_exchange: x[1],
                dl_broadcasts: x[2],
                collisions: x[3],
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_csv_round_trips_exactly(rows in prop::collection::vec(arb_summary(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let rows: Vec<SummaryRow> = rows
            .into_iter()
            .map(|summary| SummaryRow { summary, config_hash: "00ff00ff00ff00ff".into() })
            .collect();
        let mut f = output::create_summary(&path).unwrap();
        for r in &rows {
            f.write_row(r.fields()).unwrap();
        }
        drop(f);
        let back = read_summary(&path).unwrap();
        // Bitwise equality, so -0.0 and 0.0 would be told apart.
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!(a.fields(), b.fields());
            prop_assert_eq!(a.summary.loss_ratio.to_bits(), b.summary.loss_ratio.to_bits());
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn real_sweep_round_trips_and_is_sorted() {
    let spec = SweepSpec {
        schemes: Scheme::ALL.to_vec(),
        active_counts: vec![30, 8, 19],
        seeds: (1..=5).collect(),
    };
    let dir = tempfile::tempdir().unwrap();
    let rows = run_sweep_to_dir(&short_base("200ms"), &spec, dir.path()).unwrap();
    assert_eq!(rows.len(), 60);
    let keys: Vec<_> = rows
        .iter()
        .map(|r| (r.summary.scheme, r.summary.active_count, r.summary.seed))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    let back = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(back, rows);
    let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2 + 12);
    let echo = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(echo.contains("duration = 200ms  # set"));
}

#[test]
fn equal_hash_and_seed_means_identical_rows() {
    let spec = SweepSpec {
        schemes: vec![Scheme::A2p, Scheme::OfdmaPlusEdca],
        active_counts: vec![13],
        seeds: vec![4, 5],
    };
    let base = short_base("300ms");
    let mut first = Vec::new();
    run_sweep(&base, &spec, |r| {
        first.push(r.row.fields());
        Ok(())
    })
    .unwrap();
    let mut second = Vec::new();
    run_sweep(&base, &spec, |r| {
        second.push(r.row.fields());
        Ok(())
    })
    .unwrap();
    assert_eq!(first, second);
    // Different schemes hash differently; different seeds differ in the row.
    assert_ne!(first[0][3], first[2][3]);
    assert_eq!(first[0][3], first[1][3]);
    assert_ne!(first[0], first[1]);
}

#[test]
fn failure_aborts_and_keeps_completed_rows() {
    let spec = SweepSpec {
        schemes: vec![Scheme::A2p, Scheme::EdcaOnly],
        active_counts: vec![8, 13],
        seeds: (1..=4).collect(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    let mut f = output::create_summary(&path).unwrap();
    let mut written = 0;
    let result = run_sweep(&short_base("100ms"), &spec, |r| {
        if written == 5 {
            return Err(Error::Value {
                key: "disk".into(),
                msg: "full".into(),
            });
        }
        f.write_row(r.row.fields())?;
        written += 1;
        // Every prefix of the file is a valid summary.
        assert_eq!(read_summary(&path).unwrap().len(), written);
        Ok(())
    });
    assert!(matches!(result, Err(Error::Value { ref key, .. }) if key == "disk"));
    let rows = read_summary(&path).unwrap();
    assert_eq!(rows.len(), 5);
    let want: Vec<_> = spec.jobs().into_iter().take(5).collect();
    let got: Vec<_> = rows
        .iter()
        .map(|r| (r.summary.scheme, r.summary.active_count, r.summary.seed))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn truncated_row_is_reported_not_misread() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    let spec = SweepSpec {
        schemes: vec![Scheme::A2p],
        active_counts: vec![8],
        seeds: vec![1],
    };
    run_sweep_to_dir(&short_base("100ms"), &spec, dir.path()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() - 10]).unwrap();
    assert!(read_summary(&path).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_a2p-sim"))
}

#[test]
fn cli_single_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args([
            "--scheme",
            "a2p",
            "--active",
            "8",
            "--seed",
            "1",
            "--duration",
            "0.5",
            "--trace",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].summary.loss_ratio, 0.0);
    assert!(dir.path().join("packets.csv").exists());
    assert!(fs::read_to_string(dir.path().join("trace.log"))
        .unwrap()
        .contains(" ul_exchange ap "));
}

#[test]
fn cli_errors_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mcs = 13\n").unwrap();
    let out = cli().arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mcs"));

    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = cli().arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = cli().args(["--scheme", "token-ring"]).output().unwrap();
    assert!(!out.status.success());

    let out = cli().args(["--sweep", "default"]).output().unwrap();
    assert!(!out.status.success(), "a sweep without --out must fail");
}

#[test]
fn cli_sweep_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.txt");
    fs::write(&spec, "schemes = edca, a2p\nactive_counts = 8\nseeds = 1..2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cli()
        .args(["--duration", "100ms", "--sweep"])
        .arg(&spec)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary(&out_dir.join("summary.csv")).unwrap();
    let schemes: Vec<_> = rows.iter().map(|r| r.summary.scheme).collect();
    assert_eq!(schemes, [Scheme::A2p, Scheme::A2p, Scheme::EdcaOnly, Scheme::EdcaOnly]);
}
