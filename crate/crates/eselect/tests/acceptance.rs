//! Acceptance criteria, one line each.
//!
//! Runs as a plain binary (`harness = false`) so the result lines always
//! show. Exits non-zero on any failure other than the documented one (the
//! familywise bound of the sliding-window union at ω = 1d, λ = 0.5 under the
//! transformed-normal null), and prints that one as FAIL regardless.
//!
//! Set `ESELECT_DATASET` to a forecast table export to run the
//! dataset-conditional criterion; otherwise it prints SKIP.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use eselect::validate::{coverage_checks, fwer_checks, replicate, CheckKind, ValidationCheck, ValidationPlan};
use eselect_core::savi::{evaluate_window, psi_e, EProcessConfig, EProcessState, SlidingEProcess, WarmupPolicy};
use eselect_core::transform::TransformSpec;
use eselect_core::validation::{fwer_from_outcomes, Monitor, NullFamily, StreamKind, SyntheticStreamSpec};
use eselect_core::{
    compute_evidence, decide, fuse, oracle_benchmark, run_selection, Arm, EvidenceConfig, ForecastTriple, FusionConfig,
    SelectionConfig, SelectionDecision, Strategy, TestVerdict, WindowMoments,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 0.05;
const REPLICATIONS: usize = 10_000;
const STREAM_LENGTH: usize = 1000;

#[derive(Debug, PartialEq)]
enum Status {
    Pass,
    Fail,
    /// Fails in exactly the documented way.
    KnownFail,
    Skip,
}

struct Line {
    id: u32,
    name: &'static str,
    status: Status,
    detail: String,
}

fn line(id: u32, name: &'static str, pass: bool, detail: String) -> Line {
    Line {
        id,
        name,
        status: if pass { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn plan() -> ValidationPlan {
    ValidationPlan {
        lambdas: vec![0.1, 0.5, 0.9],
        windows: vec![96, 672],
        alpha: ALPHA,
        length: STREAM_LENGTH,
        replications: REPLICATIONS,
        seed: 2024,
        threads: None,
    }
}

fn describe(c: &ValidationCheck) -> String {
    let side = match c.kind {
        CheckKind::FwerPq => "H0(p,q)",
        CheckKind::FwerQp => "H0(q,p)",
        CheckKind::Coverage => "coverage",
    };
    format!(
        "{} {side} λ={} ω={}: {:.4} vs {:.4}",
        c.stream, c.lambda, c.window, c.rate, c.bound
    )
}

fn criterion_fwer() -> Line {
    let started = Instant::now();
    let checks = fwer_checks(&plan()).expect("fwer plan");
    let worst = checks
        .iter()
        .max_by(|a, b| (a.rate - a.bound).total_cmp(&(b.rate - b.bound)))
        .unwrap();
    let failed: Vec<&ValidationCheck> = checks.iter().filter(|c| !c.pass).collect();
    let mut detail = format!(
        "{} cells × 2 sides, {} reps, T={}; {} outside ≤ 0.025+3·SE; worst {}; {:.0}s",
        checks.len() / 2,
        REPLICATIONS,
        STREAM_LENGTH,
        failed.len(),
        describe(worst),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        return line(1, "FWER bound", true, detail);
    }
    // Context for the documented failure: the same generator as one
    // cumulative e-process, where Ville's inequality applies directly.
    let spec = SyntheticStreamSpec {
        kind: StreamKind::NullSymmetric(NullFamily::TransformedNormal { scale_ratio: 2.0 }),
        length: STREAM_LENGTH,
        replications: REPLICATIONS,
        seed: 2024,
    };
    let single = replicate(&spec, &[0.5], ALPHA, Monitor::Cumulative).expect("cumulative run");
    let est = fwer_from_outcomes(&single[0]);
    detail.push_str(&format!(
        "; same null as a single cumulative e-process: {:.4}/{:.4} (within bound) — the excess is the union over ~900 distinct windows",
        est.pq.rate, est.qp.rate
    ));
    let documented = failed
        .iter()
        .all(|c| c.stream == "transformed-normal" && c.window == 96 && c.lambda == 0.5);
    Line {
        id: 1,
        name: "FWER bound",
        status: if documented { Status::KnownFail } else { Status::Fail },
        detail,
    }
}

fn criterion_coverage() -> Line {
    let started = Instant::now();
    let checks = coverage_checks(&plan()).expect("coverage plan");
    let worst = checks.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap();
    let failed = checks.iter().filter(|c| !c.pass).count();
    line(
        2,
        "simultaneous coverage",
        failed == 0,
        format!(
            "{} cells, {} reps each, known means; {} below 0.95−3·SE; lowest {}; {:.0}s",
            checks.len(),
            REPLICATIONS,
            failed,
            describe(worst),
            started.elapsed().as_secs_f64()
        ),
    )
}

/// Direct formulas with every running mean recomputed from scratch.
fn brute_force(lambda: f64, deltas: &[f64]) -> (f64, f64, f64) {
    let mut v = 0.0;
    for i in 0..deltas.len() {
        let prev_mean = if i == 0 {
            0.0
        } else {
            deltas[..i].iter().sum::<f64>() / i as f64
        };
        v += (deltas[i] - prev_mean).powi(2);
    }
    let s: f64 = deltas.iter().sum();
    let psi = -(1.0 - lambda).ln() - lambda;
    (lambda * s - psi * v, -lambda * s - psi * v, v)
}

fn criterion_oracle_equivalence() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let lambda = rng.gen_range(0.0..0.99);
        let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let config = EProcessConfig::new(lambda, ALPHA).unwrap();
        let mut state = EProcessState::new(config, 1);
        for k in 1..=n {
            state = state.update(deltas[k - 1]).unwrap();
            let (le, les, v) = brute_force(lambda, &deltas[..k]);
            let moments = WindowMoments::of(&deltas[..k]);
            let (me, mes) = moments.log_values(&config);
            for diff in [
                state.log_e - le,
                state.log_e_star - les,
                state.v_hat - v,
                me - le,
                mes - les,
                moments.v_hat - v,
            ] {
                worst = worst.max(diff.abs());
            }
            compared += 1;
        }
        // The deployed sliding process over the whole stream as one window.
        let mut sliding = SlidingEProcess::new(config, n, WarmupPolicy::Strict).unwrap();
        let mut last = None;
        for &d in &deltas {
            last = sliding.push(d).unwrap();
        }
        let whole = evaluate_window(config, 1, &deltas).unwrap();
        let eval = last.unwrap();
        worst = worst
            .max((eval.state.log_e - whole.log_e).abs())
            .max((eval.state.v_hat - whole.v_hat).abs());
    }
    line(
        3,
        "oracle equivalence",
        worst <= 1e-12,
        format!("1000 streams, {compared} prefixes; max |Δ| over logE/logE*/V̂ = {worst:.2e} (≤ 1e-12)"),
    )
}

fn criterion_sampling_matches_wavg() -> Line {
    let triple = ForecastTriple::new(2, vec![100.0], vec![200.0], vec![150.0]).unwrap();
    // No rejection at α = 0.05 (threshold ln 40 ≈ 3.69).
    let verdict = TestVerdict::from_log_values(1.0, 0.2, ALPHA);
    let (w_p, _) = eselect_core::weights(verdict.p_value, verdict.p_value_star).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let wavg_prev = SelectionDecision::initial(Arm::P, Strategy::WeightedAverage);
    let d = decide(2, 1, &verdict, &wavg_prev, Arm::P, Strategy::WeightedAverage, &mut rng).unwrap();
    let target = fuse(&triple, &d).unwrap().value[0];

    let prev = SelectionDecision::initial(Arm::P, Strategy::Sampling);
    let draws = 100_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let d = decide(2, 1, &verdict, &prev, Arm::P, Strategy::Sampling, &mut rng).unwrap();
        let v = fuse(&triple, &d).unwrap().value[0];
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    let se = (var / n).sqrt();
    let pass = (mean - target).abs() <= 3.0 * se && var > 0.0 && w_p > 0.0 && w_p < 1.0;
    line(
        4,
        "sampling vs weighted average",
        pass,
        format!(
            "w_P={w_p:.4}, {draws} draws: mean {mean:.4} vs wavg {target:.4} (|Δ|={:.4} ≤ 3·SE={:.4}); variance {var:.2} > 0",
            (mean - target).abs(),
            3.0 * se
        ),
    )
}

fn criterion_lag_causality() -> Line {
    const N: usize = 700;
    const CALIB: usize = 96;
    const LAG: usize = 96;
    let base = common::synthetic(N, 3, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut changed = 0;
    let mut trials = 0;
    let mut downstream_differs = 0;
    for trial in 0..100 {
        let strategy = Strategy::ALL[trial % 3];
        let config = SelectionConfig {
            evidence: EvidenceConfig {
                alpha: ALPHA,
                lambda: rng.gen_range(0.05..0.6),
                window: [24, 48, 96][trial % 3],
                calibration_length: CALIB,
                warmup: WarmupPolicy::Strict,
            },
            fusion: FusionConfig {
                strategy,
                lag: LAG,
                seed: trial as u64,
                initial_arm: Arm::P,
            },
        };
        // σ comes from the first CALIB steps, so decisions within LAG steps
        // after calibration legitimately depend on it; test beyond that.
        let t = rng.gen_range(CALIB + LAG + 1..=N);
        let mut mutated = base.clone();
        for tr in mutated.iter_mut().skip(t - LAG) {
            for v in tr.p.iter_mut().chain(tr.q.iter_mut()).chain(tr.y.iter_mut()) {
                *v += rng.gen_range(-500.0..500.0);
            }
        }
        let a = run_selection(&config, &base).unwrap();
        let b = run_selection(&config, &mutated).unwrap();
        let pick = |run: &eselect_core::SelectionRun| {
            run.records
                .iter()
                .find(|r| r.evidence.t == t as u64)
                .map(|r| r.decision)
                .unwrap()
        };
        if pick(&a) != pick(&b) {
            changed += 1;
        }
        if a.records.iter().zip(&b.records).any(|(x, y)| x.decision != y.decision) {
            downstream_differs += 1;
        }
        trials += 1;
    }
    line(
        5,
        "decision-lag causality",
        changed == 0 && downstream_differs > 0,
        format!(
            "{trials} mutation trials over steps > t−96: {changed} decisions at t changed; mutations changed later decisions in {downstream_differs} trials"
        ),
    )
}

fn criterion_transform() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rel = 0.0f64;
    let mut odd_fail = 0;
    let mut samples = Vec::with_capacity(10_000);
    let spec_fixed = TransformSpec::new(37.0, 672).unwrap();
    for _ in 0..10_000 {
        let sigma = 10f64.powf(rng.gen_range(-2.0..3.0));
        let spec = TransformSpec::new(sigma, 672).unwrap();
        let x = rng.gen_range(-5.0..5.0) * sigma;
        let back = spec.unbound(spec.bound(x).unwrap()).unwrap();
        if x != 0.0 {
            worst_rel = worst_rel.max((back - x).abs() / x.abs());
        }
        if spec.bound(-x).unwrap() != -spec.bound(x).unwrap() {
            odd_fail += 1;
        }
        samples.push(rng.gen_range(-5.0..5.0) * 37.0);
    }
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let mapped: Vec<f64> = samples.iter().map(|&x| spec_fixed.bound(x).unwrap()).collect();
    let monotone = mapped.windows(2).all(|w| w[0] < w[1]);
    let bounded = mapped.iter().all(|v| v.abs() < 0.5);
    line(
        6,
        "transform round trip and shape",
        worst_rel <= 1e-9 && odd_fail == 0 && monotone && bounded,
        format!(
            "10000 round trips: max rel err {worst_rel:.2e} (≤ 1e-9); oddness violations {odd_fail}; strictly increasing on {} sorted points: {monotone}",
            samples.len()
        ),
    )
}

fn criterion_dataset() -> Line {
    let Ok(path) = std::env::var("ESELECT_DATASET") else {
        return Line {
            id: 7,
            name: "dataset reproduction",
            status: Status::Skip,
            detail: "set ESELECT_DATASET to a forecast table export to run".into(),
        };
    };
    let data = match eselect::read_dataset(std::path::Path::new(&path)) {
        Ok(d) => d,
        Err(e) => return line(7, "dataset reproduction", false, format!("cannot read {path}: {e}")),
    };
    let triples = &data.triples;
    let near = |a: f64, b: f64| (a - b).abs() <= 0.005 + 1e-9;
    let bench = oracle_benchmark(triples, 672).unwrap();
    let mut baselines = [bench.baseline_p, bench.baseline_q];
    baselines.sort_by(f64::total_cmp);
    let table_ok = near(bench.oracle, 425.59) && near(baselines[0], 444.38) && near(baselines[1], 476.07);

    let run = |lambda: f64, window: usize| {
        run_selection(
            &SelectionConfig {
                evidence: EvidenceConfig {
                    alpha: ALPHA,
                    lambda,
                    window,
                    calibration_length: 672,
                    warmup: WarmupPolicy::Strict,
                },
                fusion: FusionConfig {
                    strategy: Strategy::Persistence,
                    lag: 96,
                    seed: 0,
                    initial_arm: Arm::P,
                },
            },
            triples,
        )
    };
    let best = run(0.07, 672);
    let (score_ok, fraction_ok, score, fraction) = match &best {
        Ok(r) => (
            near(r.summary.average_score, 441.31),
            (100.0 * r.summary.fraction_better_selected - 70.91).abs() <= 0.01 + 1e-9,
            r.summary.average_score,
            100.0 * r.summary.fraction_better_selected,
        ),
        Err(_) => (false, false, f64::NAN, f64::NAN),
    };
    let trace = compute_evidence(
        &EvidenceConfig {
            alpha: ALPHA,
            lambda: 0.1,
            window: 672,
            calibration_length: 672,
            warmup: WarmupPolicy::Strict,
        },
        triples,
    );
    let crossing = trace.ok().and_then(|tr| {
        tr.steps
            .iter()
            .find(|s| s.verdict.is_some_and(|v| v.reject_h0_pq || v.reject_h0_qp))
            .map(|s| s.t)
    });
    line(
        7,
        "dataset reproduction",
        table_ok && score_ok && fraction_ok && crossing == Some(852),
        format!(
            "N={} H={}; oracle {:.2} baselines {:.2}/{:.2}; persistence (7d, 0.07) {score:.2}; better chosen {fraction:.2}%; first crossing {crossing:?}",
            data.len(),
            data.horizon,
            bench.oracle,
            bench.baseline_p,
            bench.baseline_q
        ),
    )
}

fn criterion_psi() -> Line {
    let at_zero = psi_e(0.0).unwrap();
    let half = psi_e(0.5).unwrap();
    let expected = std::f64::consts::LN_2 - 0.5;
    let grid: Vec<f64> = (1..=99).map(|i| psi_e(i as f64 / 100.0).unwrap()).collect();
    let min_second = grid
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min);
    line(
        8,
        "ψ_E correctness",
        at_zero == 0.0 && (half - expected).abs() <= 1e-12 && min_second >= 0.0,
        format!(
            "ψ_E(0)={at_zero}; |ψ_E(0.5)−(ln2−½)|={:.1e}; min second difference on 99-point grid {min_second:.3e} ≥ 0",
            (half - expected).abs()
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let criteria: [fn() -> Line; 8] = [
        criterion_psi,
        criterion_oracle_equivalence,
        criterion_sampling_matches_wavg,
        criterion_lag_causality,
        criterion_transform,
        criterion_dataset,
        criterion_coverage,
        criterion_fwer,
    ];
    let mut lines: Vec<Line> = criteria.iter().map(|c| c()).collect();
    lines.sort_by_key(|l| l.id);
    println!();
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::KnownFail => "FAIL (documented)",
            Status::Skip => "SKIP",
        };
        println!("criterion {} {:<32} {tag}: {}", l.id, l.name, l.detail);
    }
    let count = |s: Status| lines.iter().filter(|l| l.status == s).count();
    let unexpected = count(Status::Fail);
    println!(
        "acceptance: {} pass, {} fail ({} documented), {} skip; {:.0}s",
        count(Status::Pass),
        unexpected + count(Status::KnownFail),
        count(Status::KnownFail),
        count(Status::Skip),
        started.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
