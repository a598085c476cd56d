use super::config::{Experiment, ExperimentConfig};
use super::report::{ExperimentReport, Metric, Table};
use super::batched;
use crate::channel::{dot_counts, weighted_sum_moments, CountSampler};
use crate::error::{contract, Result};
use crate::rng::derive_seed;
use crate::special::normal_pdf;
use crate::stats::{ks_distance_normal, mean_and_se};

/// Asymptotic standard deviation of `sqrt(n)·D` under the null.
const KOLMOGOROV_SD: f64 = 0.2603;

/// Histogram of `W`, its Gaussian surrogate on the same grid, and the KS distance.
pub fn run_gaussian_fit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let Experiment::Gaussfit(c) = &cfg.experiment else {
        return Err(contract("not a gaussfit config"));
    };
    let mut report = ExperimentReport::new(cfg);
    report.metadata.insert("statistic".into(), "W = sum_m alpha_m N_m with unit-norm alpha".into());
    report.metadata.insert("surrogate".into(), "Normal(sum alpha*lambda, sum alpha^2*lambda)".into());
    let mut hist = Table::new(
        "histogram",
        &["scale", "weights", "bin_low", "bin_high", "count", "empirical_density", "surrogate_density"],
    );
    let mut summary = Table::new(
        "gaussfit",
        &["scale", "weights", "samples", "mean", "variance", "sample_mean", "sample_variance", "ks_distance"],
    );
    for (si, &scale) in c.scales.iter().enumerate() {
        let lambda: Vec<f64> = c.lambda.iter().map(|l| l * scale).collect();
        let sampler = CountSampler::new(&lambda)?;
        for (wi, raw) in c.weights.iter().enumerate() {
            let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
            let w: Vec<f64> = raw.iter().map(|x| x / norm).collect();
            let moments = weighted_sum_moments(&w, &lambda)?;
            let seed = derive_seed(cfg.seed, &format!("gaussfit/{si}/{wi}"));
            let samples: Vec<f64> = batched(c.samples, seed, |rng, n| {
                let mut counts = vec![0u64; lambda.len()];
                (0..n)
                    .map(|_| {
                        sampler.sample_into(rng, &mut counts);
                        dot_counts(&w, &counts)
                    })
                    .collect::<Vec<f64>>()
            })
            .concat();
            let n = samples.len() as u64;
            let (sample_mean, mean_se) = mean_and_se(&samples);
            let sq: Vec<f64> = samples.iter().map(|x| (x - sample_mean).powi(2)).collect();
            let (sample_var, var_se) = mean_and_se(&sq);
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / c.bins as f64 } else { 1.0 };
            let mut counts = vec![0u64; c.bins];
            for x in &samples {
                let b = (((x - lo) / width) as usize).min(c.bins - 1);
                counts[b] += 1;
            }
            let ks = ks_distance_normal(samples, moments.mean, moments.std_dev());
            let group = format!("scale={scale}/w{wi}");
            let wlabel = format!("w{wi}");
            for (b, &k) in counts.iter().enumerate() {
                let b_lo = lo + b as f64 * width;
                let b_hi = b_lo + width;
                let mid = 0.5 * (b_lo + b_hi);
                hist.push(vec![
                    scale.into(),
                    wlabel.as_str().into(),
                    b_lo.into(),
                    b_hi.into(),
                    k.into(),
                    (k as f64 / (n as f64 * width)).into(),
                    (normal_pdf((mid - moments.mean) / moments.std_dev()) / moments.std_dev()).into(),
                ]);
            }
            summary.push(vec![
                scale.into(),
                wlabel.as_str().into(),
                n.into(),
                moments.mean.into(),
                moments.variance.into(),
                sample_mean.into(),
                sample_var.into(),
                ks.into(),
            ]);
            report.metrics.push(Metric::estimate(&group, "ks_distance", ks, KOLMOGOROV_SD / (n as f64).sqrt(), n));
            report.metrics.push(Metric::exact(&group, "mean", moments.mean));
            report.metrics.push(Metric::exact(&group, "variance", moments.variance));
            report.metrics.push(Metric::estimate(&group, "sample_mean", sample_mean, mean_se, n));
            report.metrics.push(Metric::estimate(&group, "sample_variance", sample_var, var_se, n));
        }
    }
    report.tables.push(summary);
    report.tables.push(hist);
    Ok(report)
}
