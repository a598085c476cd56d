//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;
use uvsdma_core::multiuser::{
    build_hypotheses, successive_elimination, InterferenceScenario, MultiMlDetector, PairwiseTable, ProbeOrder,
};
use uvsdma_core::pilot::{exact_mse_trace, expand_to_length, optimize_pattern, theoretical_mse, AbcCoefficients, BalancedPattern};
use uvsdma_core::rng::stream;
use uvsdma_core::sim::{run, Cell, ExperimentConfig, ExperimentReport};
use uvsdma_core::special::q_function;
use uvsdma_core::two_user::{
    pe_ml_pair, pe_threshold_closed_form, sensitivity_constant, Hypothesis, MlPairDetector, ThresholdDetector,
    TwoUserProblem,
};
use uvsdma_core::channel::NoiseVector;

const PMT: [[f64; 4]; 3] = [
    [1.0491, 3.2533, 9.6285, 20.8329],
    [9.7798, 3.1585, 37.3374, 22.3473],
    [37.1711, 43.1114, 1.0340, 1.0000],
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).expect("acceptance config is valid")
}

fn metric(r: &ExperimentReport, group: &str, name: &str) -> (f64, f64) {
    let m = r.metric(group, name).unwrap_or_else(|| panic!("missing metric {group}/{name}"));
    (m.value, m.std_error.unwrap_or(0.0))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = stream(101, 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in BalancedPattern::all(4) {
        let abc = AbcCoefficients::of_pattern(&p);
        if abc.is_singular() {
            continue;
        }
        for _ in 0..100 {
            let reps = rng.random_range(1..=12);
            let length = p.width() * reps;
            let x = expand_to_length(&p, length, 0).unwrap();
            let gains: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..50.0)).collect();
            let noise = rng.random_range(0.05..10.0);
            let closed = theoretical_mse(4, length, &abc, noise, gains.iter().sum()).unwrap();
            let trace = exact_mse_trace(&x, &gains, noise).unwrap();
            worst = worst.max((closed - trace).abs() / trace);
            checked += 1;
        }
    }
    outcome(checked == 1400 && worst <= 1e-9, format!("{checked} draws, worst relative gap {worst:.3e} (limit 1e-9)"))
}

fn pattern_ranking() -> Outcome {
    let target = "{1,4}";
    let mut firsts = Vec::new();
    let mut pass = true;
    for (i, g) in PMT.iter().enumerate() {
        let s = optimize_pattern(4, 100, 1.0, g.iter().sum()).unwrap();
        let top = &s.ranked[0];
        let pos = s.ranked.iter().position(|r| r.pattern.to_string() == target).unwrap();
        pass &= top.pattern.to_string() == target;
        firsts.push(format!(
            "PMT{} first {} (F={:.4}), {target} rank {} (F={:.4})",
            i + 1,
            top.pattern,
            top.aggregate,
            pos + 1,
            s.ranked[pos].aggregate
        ));
    }
    let r = run(&config(
        r#"{"schema_version":1,"seed":1,"experiment":{"kind":"pilot_search","length":100,
          "gains":[[1.0491,9.7798,37.1711],[3.2533,3.1585,43.1114],[9.6285,37.3374,1.034],[20.8329,22.3473,1.0]],
          "noise":[1,1,1]}}"#,
    ))
    .unwrap();
    let t = r.table("patterns").unwrap();
    let agg_first = match &t.rows[0][1] {
        Cell::Text(p) => p.clone(),
        other => format!("{other:?}"),
    };
    pass &= t.rows[0][1] == target.into();
    firsts.push(format!("aggregate first {agg_first}"));
    outcome(pass, firsts.join("; "))
}

fn estimator_statistics() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, g) in PMT.iter().enumerate() {
        let text = format!(
            r#"{{"schema_version":1,"seed":{},"experiment":{{"kind":"estimate","gains":[[{}],[{}],[{}],[{}]],
               "noise":[1],"patterns":[[1,4]],"lengths":[100],"trials":500}}}}"#,
            300 + i,
            g[0],
            g[1],
            g[2],
            g[3]
        );
        let r = run(&config(&text)).unwrap();
        let (emp, _) = metric(&r, "{1,4}/L=100", "empirical_mse");
        let (exact, _) = metric(&r, "{1,4}/L=100", "exact_mse");
        let (z, _) = metric(&r, "{1,4}/L=100", "max_bias_z");
        let rel = (emp - exact).abs() / exact;
        pass &= rel <= 0.10 && z <= 3.0;
        parts.push(format!("PMT{} mse {emp:.4} vs {exact:.4} ({:.1}%), max |bias|/SE {z:.2}", i + 1, 100.0 * rel));
    }
    outcome(pass, parts.join("; "))
}

fn gaussian_surrogate() -> Outcome {
    let r = run(&config(
        r#"{"schema_version":1,"seed":404,"experiment":{"kind":"gaussfit","lambda":[10,15,20],
          "weights":[[0.3,0.5,0.81],[0.8,-0.3,0.52],[0.45,0.55,0.7]],"samples":1000000}}"#,
    ))
    .unwrap();
    let ks: Vec<f64> = (0..3).map(|w| metric(&r, &format!("scale=1/w{w}"), "ks_distance").0).collect();
    let worst = ks.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 0.02, format!("KS distances {ks:.4?} over 10^6 samples each (limit 0.02)"))
}

fn two_user_quality() -> Outcome {
    let p = TwoUserProblem::new(vec![9.0], vec![4.0]).unwrap();
    let closed = pe_threshold_closed_form(&p);
    let plug_in = q_function(0.98058);
    let ml = pe_ml_pair(&p, 1e-10).unwrap().value;
    let r = run(&config(
        r#"{"schema_version":1,"seed":505,"experiment":{"kind":"detect2","symbols":1000000,
          "problems":[{"name":"p","lambda_a":[9],"lambda_b":[4]}]}}"#,
    ))
    .unwrap();
    let (ser, se) = metric(&r, "p", "ser_threshold");
    let c1 = (closed - plug_in).abs() < 1e-4;
    let gap = (ser - closed).abs();
    let c2 = gap <= 3.0 * se + 0.002;
    let c3 = ml <= closed;
    outcome(
        c1 && c2 && c3,
        format!(
            "closed form {closed:.5} (plug-in {plug_in:.5}: {}), empirical SER {ser:.5} ± {se:.5}, gap {gap:.5} vs allowance {:.5}: {}, ML {ml:.5} <= closed form: {}",
            ok(c1),
            3.0 * se + 0.002,
            ok(c2),
            ok(c3)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b { "ok" } else { "FAILS" }
}

fn theorem4_plug_in() -> Outcome {
    let r = run(&config(
        r#"{"schema_version":1,"seed":606,"experiment":{"kind":"multiuser","symbols":1000000,
          "scenarios":[{"name":"s","lambda_a":[5],"interferers":[[3]],"noise":[1]}]}}"#,
    ))
    .unwrap();
    let (bound, _) = metric(&r, "s", "pe_upper_bound");
    let (ml, _) = metric(&r, "s", "pe_ml_exact");
    let (test, se) = metric(&r, "s", "ser_elimination");
    let c1 = (bound - 0.30914).abs() < 1e-4;
    let c2 = ml <= test + 3.0 * se;
    let c3 = test <= bound + 3.0 * se;
    outcome(
        c1 && c2 && c3,
        format!(
            "bound {bound:.5} (≈0.30914: {}), ML {ml:.5} <= elimination {test:.5} ± {se:.5}: {}, elimination <= bound: {}",
            ok(c1),
            ok(c2),
            ok(c3)
        ),
    )
}

fn sensitivity() -> Outcome {
    let mut rng = stream(707, 0);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=4);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..40.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..40.0)).collect();
        let s = rng.random_range(0..m);
        let delta = rng.random_range(0.001..(0.5 * a[s]).min(3.0));
        // C and D must hold over the whole interval a[s] ± δ.
        let d = a.iter().chain(&b).copied().fold(0.0, f64::max).max(a[s] + delta);
        let others: f64 = (0..m).filter(|&k| k != s).map(|k| (a[k] - b[k]).powi(2)).sum();
        let (lo, hi) = (a[s] - delta, a[s] + delta);
        let nearest = b[s].clamp(lo, hi);
        let c = others + (nearest - b[s]).powi(2);
        if c <= 0.0 {
            continue;
        }
        let k = sensitivity_constant(c, d).unwrap();
        let p0 = pe_threshold_closed_form(&TwoUserProblem::new(a.clone(), b.clone()).unwrap());
        for step in 0..=20 {
            let u = -1.0 + step as f64 / 10.0;
            let mut a1 = a.clone();
            a1[s] += u * delta;
            let p1 = pe_threshold_closed_form(&TwoUserProblem::new(a1, b.clone()).unwrap());
            let change = (p1 - p0).abs();
            checks += 1;
            if change > k * delta {
                violations += 1;
            }
            if k * delta > 0.0 {
                tightest = tightest.max(change / (k * delta));
            }
        }
    }
    outcome(violations == 0, format!("{checks} perturbations, {violations} violations, largest |Δp|/(Kδ) = {tightest:.3}"))
}

fn timing_direction() -> Outcome {
    let r = run(&config(
        r#"{"schema_version":1,"seed":808,"experiment":{"kind":"timing","symbols":100000,"repetitions":10,"warmup":1,
          "scenarios":[{"name":"k3","lambda_a":[8,5,3],"interferers":[[2,1,3],[1,4,1],[3,2,2]],"noise":[1,1,1]}]}}"#,
    ))
    .unwrap();
    let ratio = r.timing.rows.iter().find(|t| t.name == "ratio_ml_over_elimination").unwrap();
    outcome(
        ratio.median > 1.0 && ratio.repetitions >= 10,
        format!(
            "t_ML/t_TH median {:.2} (min {:.2}, max {:.2}) over {} repetitions; the ≈20x figure is hardware dependent and not gated",
            ratio.median, ratio.min, ratio.max, ratio.repetitions
        ),
    )
}

fn reduction_and_determinism() -> Outcome {
    let s = InterferenceScenario::new(vec![5.0, 2.0], vec![], NoiseVector::new(vec![1.0, 0.5]).unwrap()).unwrap();
    let h = build_hypotheses(&s).unwrap();
    let table = PairwiseTable::build(&s).unwrap();
    let ml_multi = MultiMlDetector::new(&h);
    let pair = TwoUserProblem::from_signal(&[5.0, 2.0], &[0.0, 0.0], &[1.0, 0.5]).unwrap();
    let ml_pair = MlPairDetector::new(&pair);
    let det = ThresholdDetector::optimal(&pair).unwrap();
    let mut mismatches = 0;
    for n0 in 0..=60u64 {
        for n1 in 0..=60u64 {
            let n = [n0, n1];
            mismatches += usize::from(ml_multi.decide_counts(&n) != (ml_pair.decide_counts(&n) == Hypothesis::A));
            mismatches += usize::from(successive_elimination(&table, &n, ProbeOrder::Ascending) != (det.decide_counts(&n) == Hypothesis::A));
            mismatches += usize::from(table.u(0, 0, &n).unwrap().to_bits() != det.margin(&n).to_bits());
        }
    }
    let configs = [
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"gaussfit","lambda":[10,15,20],"weights":[[0.3,0.5,0.81]],"samples":100000}}"#,
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"estimate","gains":[[1,2],[3,4],[5,1]],"noise":[1,1],"lengths":[12,20],"trials":40,"detection":{"user_a":0,"user_b":1,"trials":2,"symbols":3000}}}"#,
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"pilot_search","length":100,"users":4,"sectors":[{"noise":1,"gain_l1":34.7638}]}}"#,
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"detect2","symbols":50000,"problems":[{"lambda_a":[9,3],"lambda_b":[4,5]}]}}"#,
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"multiuser","symbols":50000,"scenarios":[{"lambda_a":[5,3],"interferers":[[3,1],[1,2]],"noise":[1,1]}]}}"#,
        r#"{"schema_version":1,"seed":9,"experiment":{"kind":"timing","symbols":5000,"repetitions":2,"scenarios":[{"lambda_a":[5,3],"interferers":[[3,1]],"noise":[1,1]}]}}"#,
    ];
    let mut differing = Vec::new();
    for text in configs {
        let c = config(text);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        if a.csv_files() != b.csv_files() || a.deterministic_json() != b.deterministic_json() {
            differing.push(c.experiment.kind());
        }
    }
    outcome(
        mismatches == 0 && differing.is_empty(),
        format!(
            "{mismatches} mismatches over the 61x61 lattice; {} of {} experiment kinds rerun byte-identical{}",
            configs.len() - differing.len(),
            configs.len(),
            if differing.is_empty() { String::new() } else { format!(" (differ: {differing:?})") }
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "closed-form MSE equals trace oracle", Duration::from_secs(5), oracle_equivalence),
        (2, "pattern {1,4} ranks first", Duration::from_secs(1), pattern_ranking),
        (3, "estimator MSE and bias", Duration::from_secs(30), estimator_statistics),
        (4, "Gaussian surrogate KS", Duration::from_secs(10), gaussian_surrogate),
        (5, "two-user detector quality", Duration::from_secs(20), two_user_quality),
        (6, "closed-form multiuser bound and ordering", Duration::from_secs(60), theorem4_plug_in),
        (7, "sensitivity bound", Duration::from_secs(30), sensitivity),
        (8, "timing direction", Duration::from_secs(120), timing_direction),
        (9, "reduction and determinism", Duration::from_secs(10), reduction_and_determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = o.pass && in_time;
        println!(
            "criterion {id} ({name}): {} | {} | {:.2} s of {} s{}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " (over time limit)" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
