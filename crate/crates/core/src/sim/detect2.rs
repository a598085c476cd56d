use rand::Rng;

use super::config::{Experiment, ExperimentConfig};
use super::report::{ExperimentReport, Metric, Table};
use super::batched;
use crate::channel::CountSampler;
use crate::error::{contract, Error, Result};
use crate::rng::derive_seed;
use crate::stats::Proportion;
use crate::two_user::{
    pe_gaussian, pe_ml_pair, pe_threshold_closed_form, Hypothesis, MlPairDetector, ThresholdDetector,
};

#[derive(Default, Clone, Copy)]
struct Tally {
    optimal: u64,
    uniform: u64,
    ml: u64,
    agree: u64,
}

/// Two-user separation: optimal threshold, uniform-weight threshold and ML.
pub fn run_two_user_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::Detect2(c) = &cfg.experiment else {
        return Err(contract("not a detect2 config"));
    };
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert("symbols".into(), "seeded Bernoulli(1/2) choice of the active user per slot".into());
    report.metadata.insert("uniform".into(), "equal weights with their own optimal threshold".into());
    let mut table = Table::new(
        "detect2",
        &[
            "problem", "sectors", "separation", "orientation", "threshold", "pe_closed_form", "pe_gaussian",
            "pe_ml_exact", "ser_threshold", "ser_threshold_se", "ser_uniform", "ser_uniform_se", "ser_ml", "ser_ml_se",
            "agreement", "symbols",
        ],
    );
    for (i, spec) in c.problems.iter().enumerate() {
        let label = spec.name.clone().unwrap_or_else(|| format!("problem{i}"));
        let p = spec.problem()?;
        let optimal = ThresholdDetector::optimal(&p)?;
        let uniform = match ThresholdDetector::with_weights(&p, vec![1.0; p.sectors()]) {
            Ok(d) => Some(d),
            Err(e @ Error::Degenerate(_)) => {
                report.events.push(format!("{label}: uniform-weight detector undefined ({e})"));
                None
            }
            Err(e) => return Err(e),
        };
        let ml = MlPairDetector::new(&p);
        let sa = CountSampler::new(p.lambda_a())?;
        let sb = CountSampler::new(p.lambda_b())?;
        let parts = batched(c.symbols, derive_seed(cfg.seed, &format!("symbols/{i}")), |rng, n| {
            let mut counts = vec![0u64; p.sectors()];
            let mut t = Tally::default();
            for _ in 0..n {
                let a: bool = rng.random();
                if a { sa.sample_into(rng, &mut counts) } else { sb.sample_into(rng, &mut counts) }
                let d_opt = optimal.decide_counts(&counts) == Hypothesis::A;
                let d_ml = ml.decide_counts(&counts) == Hypothesis::A;
                t.optimal += u64::from(d_opt != a);
                t.ml += u64::from(d_ml != a);
                t.agree += u64::from(d_opt == d_ml);
                if let Some(u) = &uniform {
                    t.uniform += u64::from((u.decide_counts(&counts) == Hypothesis::A) != a);
                }
            }
            t
        });
        let t = parts.iter().fold(Tally::default(), |acc, x| Tally {
            optimal: acc.optimal + x.optimal,
            uniform: acc.uniform + x.uniform,
            ml: acc.ml + x.ml,
            agree: acc.agree + x.agree,
        });
        let n = c.symbols;
        let ser_opt = Proportion::new(t.optimal, n);
        let ser_uni = uniform.as_ref().map(|_| Proportion::new(t.uniform, n));
        let ser_ml = Proportion::new(t.ml, n);
        let agreement = Proportion::new(t.agree, n);
        let closed = pe_threshold_closed_form(&p);
        let gauss = pe_gaussian(&p, optimal.weights(), optimal.threshold())?;
        let exact = if c.exact_ml {
            match pe_ml_pair(&p, c.tail_epsilon) {
                Ok(s) => Some(s),
                Err(e @ Error::Unsupported(_)) => {
                    report.events.push(format!("{label}: exact ML sum skipped ({e})"));
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        report.metrics.push(Metric::exact(&label, "separation", p.separation()));
        report.metrics.push(Metric::exact(&label, "pe_closed_form", closed));
        report.metrics.push(Metric::exact(&label, "pe_gaussian", gauss));
        if let Some(s) = exact {
            report.metrics.push(Metric::exact(&label, "pe_ml_exact", s.value));
            report.metrics.push(Metric::exact(&label, "pe_ml_exact_tail_bound", s.tail_bound));
        }
        report.metrics.push(Metric::proportion(&label, "ser_threshold", &ser_opt));
        if let Some(u) = &ser_uni {
            report.metrics.push(Metric::proportion(&label, "ser_uniform", u));
        }
        report.metrics.push(Metric::proportion(&label, "ser_ml", &ser_ml));
        report.metrics.push(Metric::proportion(&label, "agreement", &agreement));
        table.push(vec![
            label.as_str().into(),
            p.sectors().into(),
            p.separation().into(),
            format!("{:?}", optimal.upper()).into(),
            optimal.threshold().into(),
            closed.into(),
            gauss.into(),
            exact.map(|s| s.value).into(),
            ser_opt.value.into(),
            ser_opt.std_error.into(),
            ser_uni.map(|s| s.value).into(),
            ser_uni.map(|s| s.std_error).into(),
            ser_ml.value.into(),
            ser_ml.std_error.into(),
            agreement.value.into(),
            n.into(),
        ]);
    }
    report.tables.push(table);
    Ok(report)
}
