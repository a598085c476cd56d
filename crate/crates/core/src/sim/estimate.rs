use rayon::prelude::*;

use super::config::{EstimateConfig, Experiment, ExperimentConfig};
use super::report::{Cell, ExperimentReport, Metric, Table};
use super::batched;
use crate::channel::CountSampler;
use crate::error::{contract, Error, Result};
use crate::pilot::{
    exact_mse_trace, expand_to_length, optimize_pattern_sectors, theoretical_mse, AbcCoefficients, BalancedPattern,
    LsEstimator, PilotMatrix,
};
use crate::poisson::Poisson;
use crate::rng::{derive_seed, stream};
use crate::stats::{mean_and_se, Proportion};
use crate::two_user::{Hypothesis, ThresholdDetector, TwoUserProblem};

/// Floor applied to estimated intensities before detector design.
const DESIGN_FLOOR: f64 = 1e-12;

/// Rank every balanced pattern by closed-form MSE.
pub fn run_pilot_search(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::PilotSearch(c) = &cfg.experiment else {
        return Err(contract("not a pilot_search config"));
    };
    let (users, loads) = c.resolve()?;
    let search = optimize_pattern_sectors(users, c.length, &loads)?;
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert("objective".into(), "closed-form LS estimation MSE summed over sectors".into());
    let mut cols: Vec<String> = ["rank", "pattern", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=loads.len()).map(|m| format!("mse_sector{m}")));
    cols.push("aggregate".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("patterns", &col_refs);
    for (r, s) in search.ranked.iter().enumerate() {
        let (a, b, cc) = s.abc.as_f64();
        let mut row: Vec<Cell> = vec![(r + 1).into(), s.pattern.to_string().into(), a.into(), b.into(), cc.into()];
        row.extend(s.per_sector.iter().map(|&f| Cell::from(f)));
        row.push(s.aggregate.into());
        table.push(row);
        report.metrics.push(Metric::exact(&s.pattern.to_string(), "aggregate_mse", s.aggregate));
    }
    for p in &search.excluded {
        report.events.push(format!("pattern {p} excluded: X Xᵀ is singular (a = b)"));
    }
    report.tables.push(table);
    Ok(report)
}

struct TrialOutcome {
    sq_error: f64,
    abs_error: f64,
    /// `errors[k * M + m]`.
    errors: Vec<f64>,
    /// `estimates[k * M + m]`, unclipped.
    estimates: Vec<f64>,
}

struct Point {
    theoretical: f64,
    exact: f64,
    removed: usize,
    method: &'static str,
    outcomes: Vec<TrialOutcome>,
}

fn simulate_point(
    c: &EstimateConfig,
    x: &PilotMatrix,
    abc: &AbcCoefficients,
    seed: u64,
) -> Result<Point> {
    let g = &c.gains;
    let (k, m_count) = (g.users(), g.sectors());
    let noise = c.noise.as_slice();
    let estimator = LsEstimator::new(x)?;
    let mut theoretical = 0.0;
    let mut exact = 0.0;
    let mut samplers: Vec<Vec<Poisson>> = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let col = g.sector_column(m);
        theoretical += theoretical_mse(k, x.length(), abc, noise[m], col.iter().sum())?;
        exact += exact_mse_trace(x, &col, noise[m])?;
        let per_slot = (0..x.length())
            .map(|l| {
                let mean: f64 = (0..k).filter(|&u| x.bit(u, l)).map(|u| col[u]).sum::<f64>() + noise[m];
                Poisson::new(mean).ok_or_else(|| contract(format!("bad pilot intensity {mean}")))
            })
            .collect::<Result<Vec<_>>>()?;
        samplers.push(per_slot);
    }
    let outcomes: Vec<TrialOutcome> = (0..c.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t);
            let mut errors = vec![0.0; k * m_count];
            let mut estimates = vec![0.0; k * m_count];
            let mut counts = vec![0.0; x.length()];
            for m in 0..m_count {
                for (slot, s) in counts.iter_mut().zip(&samplers[m]) {
                    *slot = s.sample(&mut rng) as f64;
                }
                let est = estimator.estimate(m, &counts, noise[m])?;
                for u in 0..k {
                    estimates[u * m_count + m] = est.values[u];
                    errors[u * m_count + m] = est.values[u] - g.get(u, m);
                }
            }
            Ok(TrialOutcome {
                sq_error: errors.iter().map(|e| e * e).sum(),
                abs_error: errors.iter().map(|e| e.abs()).sum(),
                errors,
                estimates,
            })
        })
        .collect::<Result<_>>()?;
    let removed = x.origin().map_or(0, |o| o.removed);
    let method = match estimator.method() {
        crate::pilot::InverseMethod::ClosedForm => "closed_form",
        crate::pilot::InverseMethod::Elimination => "elimination",
    };
    Ok(Point { theoretical, exact, removed, method, outcomes })
}

/// Symbol error rate of detectors designed from estimated gains.
fn downstream_ser(
    c: &EstimateConfig,
    outcomes: &[TrialOutcome],
    seed: u64,
    events: &mut Vec<String>,
    label: &str,
) -> Result<Option<Proportion>> {
    let Some(d) = &c.detection else { return Ok(None) };
    let g = &c.gains;
    let m_count = g.sectors();
    let noise = c.noise.as_slice();
    let truth = TwoUserProblem::from_signal(g.user_row(d.user_a), g.user_row(d.user_b), noise)?;
    let mut errors = 0u64;
    let mut total = 0u64;
    for (t, o) in outcomes.iter().take(d.trials as usize).enumerate() {
        let design = |u: usize| -> Vec<f64> {
            (0..m_count).map(|m| (o.estimates[u * m_count + m].max(0.0) + noise[m]).max(DESIGN_FLOOR)).collect()
        };
        let det = TwoUserProblem::new(design(d.user_a), design(d.user_b)).and_then(|p| ThresholdDetector::optimal(&p));
        let det = match det {
            Ok(det) => Some(det),
            Err(e) => {
                events.push(format!("{label} trial {t}: detector design failed ({e}); deciding A for every symbol"));
                None
            }
        };
        let err = symbol_errors(&truth, det.as_ref(), d.symbols, derive_seed(seed, &format!("{t}")))?;
        errors += err;
        total += d.symbols;
    }
    Ok(Some(Proportion::new(errors, total)))
}

/// Errors of `det` (or of always deciding `A`) on a separation stream.
pub(crate) fn symbol_errors(truth: &TwoUserProblem, det: Option<&ThresholdDetector>, symbols: u64, seed: u64) -> Result<u64> {
    use rand::Rng;
    let sa = CountSampler::new(truth.lambda_a())?;
    let sb = CountSampler::new(truth.lambda_b())?;
    let per_batch = batched(symbols, seed, |rng, n| {
        let mut counts = vec![0u64; truth.sectors()];
        let mut errors = 0u64;
        for _ in 0..n {
            let a: bool = rng.random();
            if a { sa.sample_into(rng, &mut counts) } else { sb.sample_into(rng, &mut counts) }
            let decided = det.map_or(Hypothesis::A, |d| d.decide_counts(&counts));
            if (decided == Hypothesis::A) != a {
                errors += 1;
            }
        }
        errors
    });
    Ok(per_batch.iter().sum())
}

/// Theoretical and empirical LS estimation error per pattern and pilot length.
pub fn run_estimation_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::Estimate(c) = &cfg.experiment else {
        return Err(contract("not an estimate config"));
    };
    let g = &c.gains;
    let k = g.users();
    let patterns: Vec<BalancedPattern> = match &c.patterns {
        Some(ps) => ps.iter().map(|p| BalancedPattern::new(k, p.clone())).collect::<Result<_>>()?,
        None => {
            if k > 12 {
                return Err(contract("list experiment.patterns explicitly for more than 12 users"));
            }
            BalancedPattern::all(k).collect()
        }
    };
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert("mse".into(), "sum over users and sectors of (estimate - gain)^2".into());
    report.metadata.insert("norm_mse".into(), "||estimate - gain||_2^2 / ||gain||_2^2 over the full K x M grid".into());
    report.metadata.insert("norm_mae".into(), "||estimate - gain||_1 / ||gain||_1 over the full K x M grid".into());
    report.metadata.insert("theoretical_mse".into(), "closed form for the repeated pattern, summed over sectors".into());
    report.metadata.insert("exact_mse".into(), "noise-variance trace for the actual (possibly truncated) pilot".into());
    if c.detection.is_some() {
        report.metadata.insert(
            "ser".into(),
            "two-user separation with detectors designed from clipped estimates, scored on the true gains".into(),
        );
    }
    let l2: f64 = (0..k).flat_map(|u| g.user_row(u).to_vec()).map(|x| x * x).sum();
    let l1: f64 = (0..k).flat_map(|u| g.user_row(u).to_vec()).sum();
    let mut table = Table::new(
        "estimation",
        &[
            "pattern", "length", "status", "rank", "removed_columns", "inverse", "theoretical_mse", "exact_mse",
            "empirical_mse", "empirical_mse_se", "relative_gap", "norm_mse", "norm_mse_se", "norm_mae", "norm_mae_se",
            "max_bias_z", "ser", "ser_se", "trials",
        ],
    );
    if let Some(d) = &c.detection {
        let truth = TwoUserProblem::from_signal(g.user_row(d.user_a), g.user_row(d.user_b), c.noise.as_slice())?;
        let det = ThresholdDetector::optimal(&truth)?;
        let symbols = d.symbols * d.trials;
        let errors = symbol_errors(&truth, Some(&det), symbols, derive_seed(cfg.seed, "detect/true"))?;
        report.metrics.push(Metric::proportion("true_gains", "ser", &Proportion::new(errors, symbols)));
    }
    for &length in &c.lengths {
        let mut rows: Vec<(f64, Vec<Cell>)> = Vec::new();
        let mut singular_rows = Vec::new();
        for p in &patterns {
            let abc = AbcCoefficients::of_pattern(p);
            let label = format!("{p}/L={length}");
            let singular = |rows: &mut Vec<Vec<Cell>>| {
                let mut row = vec![p.to_string().into(), length.into(), "singular".into()];
                row.extend(std::iter::repeat_n(Cell::Empty, 15));
                row.push(c.trials.into());
                rows.push(row);
            };
            if abc.is_singular() {
                report.events.push(format!("{label}: singular pattern (a = b), not simulated"));
                singular(&mut singular_rows);
                continue;
            }
            let x = expand_to_length(p, length, derive_seed(cfg.seed, &format!("pilot/{p}/{length}")))?;
            let point = match simulate_point(c, &x, &abc, derive_seed(cfg.seed, &format!("trials/{p}/{length}"))) {
                Ok(pt) => pt,
                Err(Error::Singular(e)) => {
                    report.events.push(format!("{label}: {e}"));
                    singular(&mut singular_rows);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let n = point.outcomes.len() as u64;
            let sq: Vec<f64> = point.outcomes.iter().map(|o| o.sq_error).collect();
            let (mse, mse_se) = mean_and_se(&sq);
            let nm: Vec<f64> = sq.iter().map(|s| s / l2).collect();
            let (norm_mse, norm_mse_se) = mean_and_se(&nm);
            let na: Vec<f64> = point.outcomes.iter().map(|o| o.abs_error / l1).collect();
            let (norm_mae, norm_mae_se) = mean_and_se(&na);
            let comps = k * g.sectors();
            let max_bias_z = (0..comps)
                .map(|i| {
                    let e: Vec<f64> = point.outcomes.iter().map(|o| o.errors[i]).collect();
                    let (mean, se) = mean_and_se(&e);
                    if se > 0.0 { (mean / se).abs() } else { 0.0 }
                })
                .fold(0.0, f64::max);
            let ser = downstream_ser(
                c,
                &point.outcomes,
                derive_seed(cfg.seed, &format!("detect/{p}/{length}")),
                &mut report.events,
                &label,
            )?;
            let gap = (mse - point.exact) / point.exact;
            report.metrics.push(Metric::exact(&label, "theoretical_mse", point.theoretical));
            report.metrics.push(Metric::exact(&label, "exact_mse", point.exact));
            report.metrics.push(Metric::estimate(&label, "empirical_mse", mse, mse_se, n));
            report.metrics.push(Metric::estimate(&label, "norm_mse", norm_mse, norm_mse_se, n));
            report.metrics.push(Metric::estimate(&label, "norm_mae", norm_mae, norm_mae_se, n));
            report.metrics.push(Metric { trials: Some(n), ..Metric::exact(&label, "max_bias_z", max_bias_z) });
            if let Some(s) = &ser {
                report.metrics.push(Metric::proportion(&label, "ser", s));
            }
            rows.push((
                point.theoretical,
                vec![
                    p.to_string().into(),
                    length.into(),
                    "ok".into(),
                    Cell::Empty,
                    point.removed.into(),
                    point.method.into(),
                    point.theoretical.into(),
                    point.exact.into(),
                    mse.into(),
                    mse_se.into(),
                    gap.into(),
                    norm_mse.into(),
                    norm_mse_se.into(),
                    norm_mae.into(),
                    norm_mae_se.into(),
                    max_bias_z.into(),
                    ser.map(|s| s.value).into(),
                    ser.map(|s| s.std_error).into(),
                    n.into(),
                ],
            ));
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&i, &j| rows[i].0.total_cmp(&rows[j].0));
        for (rank, &i) in order.iter().enumerate() {
            rows[i].1[3] = (rank + 1).into();
        }
        for (_, row) in rows {
            table.push(row);
        }
        for row in singular_rows {
            table.push(row);
        }
    }
    report.tables.push(table);
    Ok(report)
}
