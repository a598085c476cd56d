use std::time::Instant;

use rand::Rng;

use super::config::{Experiment, ExperimentConfig};
use super::report::{ExperimentReport, Metric, Table, TimingRow};
use super::batched;
use crate::channel::CountSampler;
use crate::error::{contract, Error, Result};
use crate::multiuser::{
    build_hypotheses, pe_ml_multi, pe_upper_bound, successive_elimination, successive_elimination_traced,
    HypothesisSets, MultiMlDetector, PairwiseTable,
};
use crate::rng::derive_seed;
use crate::stats::Proportion;

/// Samplers for `C_i` (first half) and `D_i` (second half).
pub(crate) fn mixture_samplers(h: &HypothesisSets) -> Result<Vec<CountSampler>> {
    h.c.iter().chain(&h.d).map(|x| CountSampler::new(x)).collect()
}

/// Draw the desired bit, then one bit per interferer, then the counts.
pub(crate) fn draw_symbol<R: Rng + ?Sized>(
    rng: &mut R,
    interferers: usize,
    samplers: &[CountSampler],
    counts: &mut [u64],
) -> bool {
    let a: bool = rng.random();
    let mut mode = 0usize;
    for k in 0..interferers {
        if rng.random::<bool>() {
            mode |= 1 << k;
        }
    }
    let modes = samplers.len() / 2;
    let s = if a { &samplers[mode] } else { &samplers[modes + mode] };
    s.sample_into(rng, counts);
    a
}

#[derive(Default, Clone, Copy)]
struct Tally {
    elimination: u64,
    ml: u64,
    agree: u64,
    skipped: u64,
}

/// Successive elimination against ML and the closed-form bound, per scenario.
pub fn run_multiuser_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::Multiuser(c) = &cfg.experiment else {
        return Err(contract("not a multiuser config"));
    };
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert(
        "symbols".into(),
        "seeded Bernoulli(1/2) desired bit and independent Bernoulli(1/2) interferer bits per slot".into(),
    );
    report.metadata.insert("probe_order".into(), format!("{:?}", c.probe_order).to_lowercase());
    let mut table = Table::new(
        "multiuser",
        &[
            "scenario", "interferers", "sectors", "pe_ml_exact", "ser_ml", "ser_ml_se", "ser_elimination",
            "ser_elimination_se", "pe_upper_bound", "agreement", "degenerate_pairs", "skipped_comparisons", "symbols",
        ],
    );
    for (i, spec) in c.scenarios.iter().enumerate() {
        let label = spec.label(i);
        let s = spec.scenario()?;
        let h = build_hypotheses(&s)?;
        let start = Instant::now();
        let t = PairwiseTable::build(&s)?;
        let build = start.elapsed().as_secs_f64();
        report.timing.rows.push(TimingRow::from_samples(&label, "table_build", vec![build]));
        let degenerate = (0..t.modes()).flat_map(|i| (0..t.modes()).map(move |j| (i, j))).filter(|&(i, j)| t.is_degenerate(i, j)).count();
        let ml = MultiMlDetector::new(&h);
        let samplers = mixture_samplers(&h)?;
        let k = s.interferer_count();
        let order = c.probe_order;
        let parts = batched(c.symbols, derive_seed(cfg.seed, &format!("symbols/{i}")), |rng, n| {
            let mut counts = vec![0u64; s.sectors()];
            let mut tally = Tally::default();
            for _ in 0..n {
                let a = draw_symbol(rng, k, &samplers, &mut counts);
                let d_el = if degenerate > 0 {
                    let tr = successive_elimination_traced(&t, &counts, order);
                    tally.skipped += tr.skipped_comparisons() as u64;
                    tr.decision
                } else {
                    successive_elimination(&t, &counts, order)
                };
                let d_ml = ml.decide_counts(&counts);
                tally.elimination += u64::from(d_el != a);
                tally.ml += u64::from(d_ml != a);
                tally.agree += u64::from(d_el == d_ml);
            }
            tally
        });
        let tally = parts.iter().fold(Tally::default(), |acc, x| Tally {
            elimination: acc.elimination + x.elimination,
            ml: acc.ml + x.ml,
            agree: acc.agree + x.agree,
            skipped: acc.skipped + x.skipped,
        });
        let n = c.symbols;
        let ser_el = Proportion::new(tally.elimination, n);
        let ser_ml = Proportion::new(tally.ml, n);
        let agreement = Proportion::new(tally.agree, n);
        let bound = pe_upper_bound(&s)?;
        let exact = if c.exact_ml {
            match pe_ml_multi(&h, c.tail_epsilon) {
                Ok(v) => Some(v),
                Err(e @ Error::Unsupported(_)) => {
                    report.events.push(format!("{label}: exact ML sum skipped, empirical ML only ({e})"));
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        if degenerate > 0 {
            report.events.push(format!(
                "{label}: {degenerate} degenerate (C_i, D_j) pairs; {} comparisons skipped",
                tally.skipped
            ));
        }
        if let Some(v) = exact {
            report.metrics.push(Metric::exact(&label, "pe_ml_exact", v.value));
            report.metrics.push(Metric::exact(&label, "pe_ml_exact_tail_bound", v.tail_bound));
        }
        report.metrics.push(Metric::proportion(&label, "ser_ml", &ser_ml));
        report.metrics.push(Metric::proportion(&label, "ser_elimination", &ser_el));
        report.metrics.push(Metric::exact(&label, "pe_upper_bound", bound));
        report.metrics.push(Metric::proportion(&label, "agreement", &agreement));
        table.push(vec![
            label.as_str().into(),
            k.into(),
            s.sectors().into(),
            exact.map(|v| v.value).into(),
            ser_ml.value.into(),
            ser_ml.std_error.into(),
            ser_el.value.into(),
            ser_el.std_error.into(),
            bound.into(),
            agreement.value.into(),
            degenerate.into(),
            tally.skipped.into(),
            n.into(),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}
