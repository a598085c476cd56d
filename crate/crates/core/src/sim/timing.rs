use std::hint::black_box;
use std::time::Instant;

use super::config::{Experiment, ExperimentConfig};
use super::multiuser::{draw_symbol, mixture_samplers};
use super::report::{ExperimentReport, Metric, Table, TimingRow};
use super::batched;
use crate::error::{contract, Result};
use crate::multiuser::{build_hypotheses, successive_elimination, MultiMlDetector, PairwiseTable};
use crate::rng::derive_seed;
use crate::stats::Proportion;

/// Wall-clock ML against successive elimination on one shared symbol stream.
///
/// Both detectors run single-threaded over the same stored counts. The
/// pairwise table is built before timing starts and reported separately.
pub fn run_timing_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::Timing(c) = &cfg.experiment else {
        return Err(contract("not a timing config"));
    };
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert(
        "protocol".into(),
        format!("{} warm-up passes, then {} timed passes per detector; table build excluded", c.warmup, c.repetitions),
    );
    let mut table = Table::new(
        "timing_decisions",
        &["scenario", "interferers", "symbols", "ser_ml", "ser_elimination", "agreement", "agreement_floor"],
    );
    for (i, spec) in c.scenarios.iter().enumerate() {
        let label = spec.label(i);
        let s = spec.scenario()?;
        let h = build_hypotheses(&s)?;
        let m = s.sectors();
        let k = s.interferer_count();
        let samplers = mixture_samplers(&h)?;
        let parts = batched(c.symbols, derive_seed(cfg.seed, &format!("symbols/{i}")), |rng, n| {
            let mut counts = vec![0u64; m];
            let mut flat = Vec::with_capacity(n as usize * m);
            let mut bits = Vec::with_capacity(n as usize);
            for _ in 0..n {
                bits.push(draw_symbol(rng, k, &samplers, &mut counts));
                flat.extend_from_slice(&counts);
            }
            (flat, bits)
        });
        let counts: Vec<u64> = parts.iter().flat_map(|p| p.0.iter().copied()).collect();
        let truth: Vec<bool> = parts.iter().flat_map(|p| p.1.iter().copied()).collect();

        let mut builds = Vec::with_capacity(c.repetitions);
        let mut t = None;
        for _ in 0..c.repetitions {
            let start = Instant::now();
            t = Some(black_box(PairwiseTable::build(&s)?));
            builds.push(start.elapsed().as_secs_f64());
        }
        let t = t.expect("at least one repetition");
        let ml = MultiMlDetector::new(&h);
        let run_ml = |out: &mut Vec<bool>| {
            out.clear();
            out.extend(counts.chunks_exact(m).map(|n| black_box(ml.decide_counts(black_box(n)))));
        };
        let run_el = |out: &mut Vec<bool>| {
            out.clear();
            out.extend(counts.chunks_exact(m).map(|n| black_box(successive_elimination(&t, black_box(n), c.probe_order))));
        };
        let mut d_ml = Vec::with_capacity(truth.len());
        let mut d_el = Vec::with_capacity(truth.len());
        for _ in 0..c.warmup {
            run_ml(&mut d_ml);
            run_el(&mut d_el);
        }
        let (mut t_ml, mut t_el, mut ratio) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..c.repetitions {
            let start = Instant::now();
            run_ml(&mut d_ml);
            let a = start.elapsed().as_secs_f64();
            let start = Instant::now();
            run_el(&mut d_el);
            let b = start.elapsed().as_secs_f64();
            t_ml.push(a);
            t_el.push(b);
            ratio.push(a / b);
        }
        report.timing.rows.push(TimingRow::from_samples(&label, "table_build", builds));
        report.timing.rows.push(TimingRow::from_samples(&label, "ml", t_ml));
        report.timing.rows.push(TimingRow::from_samples(&label, "elimination", t_el));
        report.timing.rows.push(TimingRow::from_samples(&label, "ratio_ml_over_elimination", ratio));

        let n = truth.len() as u64;
        let count = |d: &[bool]| d.iter().zip(&truth).filter(|(x, y)| x != y).count() as u64;
        let ser_ml = Proportion::new(count(&d_ml), n);
        let ser_el = Proportion::new(count(&d_el), n);
        let agree = Proportion::new(d_ml.iter().zip(&d_el).filter(|(x, y)| x == y).count() as u64, n);
        let floor = 1.0 - 2.0 * ser_el.value.max(ser_ml.value);
        report.metrics.push(Metric::proportion(&label, "ser_ml", &ser_ml));
        report.metrics.push(Metric::proportion(&label, "ser_elimination", &ser_el));
        report.metrics.push(Metric::proportion(&label, "agreement", &agree));
        report.metrics.push(Metric::exact(&label, "agreement_floor", floor));
        table.push(vec![
            label.as_str().into(),
            k.into(),
            n.into(),
            ser_ml.value.into(),
            ser_el.value.into(),
            agree.value.into(),
            floor.into(),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}
