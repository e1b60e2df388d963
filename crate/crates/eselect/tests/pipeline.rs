//! End-to-end behaviour of the library entry points.

mod common;

use eselect::commands;
use eselect::config::GridDefaults;
use eselect::report::{Metadata, ReportWriter};
use eselect::sweep::{run_sweep, SweepOutcome};
use eselect::ConfigLayer;
use eselect_core::{run_selection, Source, Strategy};

use common::{layer, snapshot, synthetic, write};

const N: usize = 900;
const H: usize = 4;

fn single(dir: &std::path::Path, strategy: &str, out: &str) -> eselect::RunConfig {
    let input = write(dir, "data.csv", &synthetic(N, H, 3));
    ConfigLayer {
        lambda: Some("0.3".into()),
        window: Some("1d".into()),
        strategy: Some(strategy.into()),
        ..layer(&input, &dir.join(out))
    }
    .resolve(&GridDefaults::single())
    .unwrap()
}

#[test]
fn run_outputs_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    for strategy in ["persistence", "sampling", "wavg"] {
        let a = single(dir.path(), strategy, &format!("{strategy}-a"));
        let b = single(dir.path(), strategy, &format!("{strategy}-b"));
        commands::run(&a).unwrap();
        commands::run(&b).unwrap();
        let strip = |mut files: Vec<(String, Vec<u8>)>| {
            // Runtimes are wall-clock; the output directory appears in metadata.
            files.retain(|(name, _)| name != "runtime.csv" && name != "metadata.json");
            files
        };
        let (sa, sb) = (strip(snapshot(&a.output_dir)), strip(snapshot(&b.output_dir)));
        assert_eq!(sa.len(), 2, "{strategy}");
        assert_eq!(sa, sb, "{strategy}");
    }
}

#[test]
fn metadata_is_identical_for_identical_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(dir.path(), "sampling", "out");
    commands::run(&cfg).unwrap();
    let first = std::fs::read(cfg.output_dir.join("metadata.json")).unwrap();
    commands::run(&cfg).unwrap();
    assert_eq!(first, std::fs::read(cfg.output_dir.join("metadata.json")).unwrap());
    let meta: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["calibration_length"], 96);
    assert!(meta["sigma"].as_f64().unwrap() > 0.0);
    assert_eq!(meta["input"]["steps"], N);
    assert_eq!(meta["input"]["horizon"], H);
    assert_eq!(meta["input"]["shift_consistency"], 1.0);
    assert!(meta["exclusion_rule"].is_string());
}

#[test]
fn steps_file_has_no_decisions_inside_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(dir.path(), "persistence", "out");
    let out = commands::run(&cfg).unwrap();
    assert!(out.run.records.iter().all(|r| r.evidence.t > 96));
    let mut reader = csv::Reader::from_path(cfg.output_dir.join("steps.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let source = headers.iter().position(|h| h == "source").unwrap();
    let lower = headers.iter().position(|h| h == "band_lower").unwrap();
    let watts = headers.iter().position(|h| h == "band_lower_watts").unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let t: u64 = rec[0].parse().unwrap();
        assert_eq!(rec[source].is_empty(), t <= 96, "t = {t}");
        // Watts bounds exist exactly where the band stays inside (-1/2, 1/2).
        if t >= 96 {
            let b: f64 = rec[lower].parse().unwrap();
            assert_eq!(rec[watts].is_empty(), b <= -0.5, "t = {t}");
        } else {
            assert!(rec[lower].is_empty());
        }
        rows += 1;
    }
    assert_eq!(rows, N);
}

#[test]
fn regime_changes_are_detected_and_followed() {
    let dir = tempfile::tempdir().unwrap();
    let out = commands::run(&single(dir.path(), "persistence", "out")).unwrap();
    let s = &out.run.summary;
    assert!(s.rejection_steps > 0);
    assert!(s.switches >= 1);
    assert!(s.average_score < s.baseline_p.min(s.baseline_q));
    assert!(s.average_score >= s.oracle);
    assert!(s.fraction_better_selected > 0.5);
    let q_chosen = out
        .run
        .records
        .iter()
        .filter(|r| r.decision.source == Source::Q)
        .count();
    assert!(q_chosen > 0);
}

#[test]
fn one_by_one_sweep_equals_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", &synthetic(N, H, 5));
    for strategy in Strategy::ALL {
        let cfg = ConfigLayer {
            lambda: Some("0.2".into()),
            window: Some("12h".into()),
            strategy: Some(strategy.name().into()),
            ..layer(&input, &dir.path().join("o"))
        }
        .resolve(&GridDefaults::sweep())
        .unwrap();
        let triples = eselect::read_dataset(&input).unwrap().triples;
        let sweep = run_sweep(&cfg, &triples).unwrap();
        let run = run_selection(&cfg.single().unwrap(), &triples).unwrap();
        assert_eq!(sweep.rows.len(), 1);
        assert_eq!(sweep.rows[0].summary, run.summary, "{strategy:?}");
        assert_eq!(sweep.sigma, run.transform.sigma());
    }
}

fn grid_config(dir: &std::path::Path, threads: usize) -> (eselect::RunConfig, Vec<eselect_core::ForecastTriple>) {
    let input = write(dir, "data.csv", &synthetic(N, H, 8));
    let cfg = ConfigLayer {
        lambda: Some("0.05:0.95:0.15,0.5,0.5".into()),
        window: Some("1h,2h,12h,1d,2d".into()),
        threads: Some(threads),
        ..layer(&input, &dir.join("o"))
    }
    .resolve(&GridDefaults::sweep())
    .unwrap();
    let triples = eselect::read_dataset(&input).unwrap().triples;
    (cfg, triples)
}

fn without_runtime(o: &SweepOutcome) -> Vec<eselect::sweep::SweepRow> {
    o.rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.runtime_seconds = 0.0;
            r
        })
        .collect()
}

#[test]
fn sweep_is_independent_of_parallelism_and_deduplicates() {
    let dir = tempfile::tempdir().unwrap();
    let (one, triples) = grid_config(dir.path(), 1);
    let (four, _) = grid_config(dir.path(), 4);
    let a = run_sweep(&one, &triples).unwrap();
    let b = run_sweep(&four, &triples).unwrap();
    assert_eq!(one.lambdas.len(), 7, "0.5 is already in the range");
    assert_eq!(a.rows.len(), 7 * 5 * 3);
    assert_eq!(without_runtime(&a), without_runtime(&b));
    let order: Vec<_> = a
        .rows
        .iter()
        .map(|r| (r.window, r.lambda.to_bits(), r.strategy))
        .collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted, "rows come in grid order");
}

#[test]
fn selection_never_beats_the_oracle_in_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, triples) = grid_config(dir.path(), 1);
    let sweep = run_sweep(&cfg, &triples).unwrap();
    for r in &sweep.rows {
        if r.strategy != Strategy::WeightedAverage {
            assert!(r.summary.average_score >= r.summary.oracle - 1e-9, "{r:?}");
        }
        assert!(r.runtime_seconds >= 0.0);
    }
}

#[test]
fn short_windows_that_cannot_decide_first_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, triples) = grid_config(dir.path(), 1);
    let sweep = run_sweep(&cfg, &triples).unwrap();
    for r in &sweep.rows {
        assert_eq!(r.excluded, !r.summary.first_decision_rejection_driven);
    }
    // A one-hour window holds at most 4 × 0.5 of evidence: never 2/α.
    assert!(sweep.rows.iter().filter(|r| r.window == 4).all(|r| r.excluded));
}

#[test]
fn sweep_writes_tables_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = grid_config(dir.path(), 1);
    let (outcome, out) = commands::sweep(&cfg).unwrap();
    let names: Vec<String> = snapshot(&out).into_iter().map(|f| f.0).collect();
    for want in [
        "heatmap_persistence.csv",
        "heatmap_sampling.csv",
        "heatmap_wavg.csv",
        "metadata.json",
        "runtime.csv",
        "sweep.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    let heat = std::fs::read_to_string(out.join("heatmap_persistence.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 1 + cfg.windows.len());
    assert_eq!(lines[0].split(',').count(), 1 + cfg.lambdas.len());
    assert!(lines[1].starts_with("4,"));
    assert!(lines[1].split(',').skip(1).all(str::is_empty), "1h row fully excluded");
    let sweep_rows = std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count();
    assert_eq!(sweep_rows, 1 + outcome.rows.len());

    let first = snapshot(&out);
    commands::sweep(&cfg).unwrap();
    let strip = |v: Vec<(String, Vec<u8>)>| -> Vec<_> { v.into_iter().filter(|f| f.0 != "runtime.csv").collect() };
    assert_eq!(strip(first), strip(snapshot(&out)));
}

#[test]
fn empty_results_write_metadata_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ConfigLayer::default().resolve(&GridDefaults::sweep()).unwrap();
    let writer = ReportWriter::create(dir.path(), Metadata::new("sweep", &cfg)).unwrap();
    let mut w = writer;
    let empty = SweepOutcome {
        rows: Vec::new(),
        benchmark: eselect_core::Benchmark {
            oracle: 0.0,
            baseline_p: 0.0,
            baseline_q: 0.0,
            steps: 0,
        },
        sigma: f64::NAN,
    };
    w.write_sweep(&empty, &cfg).unwrap();
    w.write_runtime(&[]).unwrap();
    w.finish().unwrap();
    let names: Vec<String> = snapshot(dir.path()).into_iter().map(|f| f.0).collect();
    assert_eq!(names, vec!["metadata.json".to_string()]);
}

#[test]
fn bench_on_identical_forecasts_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let triples: Vec<_> = synthetic(300, 2, 1)
        .into_iter()
        .map(|t| eselect_core::ForecastTriple::new(t.t, t.p.clone(), t.p, t.y).unwrap())
        .collect();
    let input = write(dir.path(), "same.csv", &triples);
    let cfg = layer(&input, &dir.path().join("o"))
        .resolve(&GridDefaults::single())
        .unwrap();
    let (b, _) = commands::bench(&cfg).unwrap();
    assert_eq!(b.oracle, b.baseline_p);
    assert_eq!(b.baseline_p, b.baseline_q);
    assert_eq!(b.steps, 300 - 96);
}

#[test]
fn too_short_input_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "short.csv", &synthetic(200, 2, 1));
    let cfg = ConfigLayer {
        window: Some("1d".into()),
        ..layer(&input, &dir.path().join("o"))
    }
    .resolve(&GridDefaults::single())
    .unwrap();
    let err = commands::run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), eselect::error::EXIT_USAGE, "{err}");
}

#[test]
fn small_validation_plan_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ConfigLayer {
        lambda: Some("0.5".into()),
        window: Some("1d".into()),
        replications: Some(200),
        length: Some(300),
        output_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    }
    .resolve(&GridDefaults::validation())
    .unwrap();
    let (report, out) = commands::validate(&cfg).unwrap();
    // 2 nulls × 2 sides + 2 coverage streams
    assert_eq!(report.checks.len(), 6);
    assert!(report.checks.iter().all(|c| c.replications == 200 && !c.low_power));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(json["checks"].as_array().unwrap().len(), 6);
    let again = commands::validate(
        &ConfigLayer {
            threads: Some(1),
            lambda: Some("0.5".into()),
            window: Some("1d".into()),
            replications: Some(200),
            length: Some(300),
            output_dir: Some(dir.path().join("again")),
            ..Default::default()
        }
        .resolve(&GridDefaults::validation())
        .unwrap(),
    )
    .unwrap()
    .0;
    assert_eq!(again.checks, report.checks);
}
