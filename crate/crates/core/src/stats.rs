//! Correlation evaluation with surrogate-shuffle significance testing,
//! Bonferroni correction, and event-aligned curve analysis.
//!
//! Long series make even meaningless correlations look significant under a
//! naive test. The surrogate test rebuilds the null from the data itself:
//! shuffling the predicted series preserves its value distribution but
//! destroys temporal structure, and the observed coefficient is scored
//! against the shuffled population.

use crate::blink::BlinkRateSeries;
use crate::par::chunked_map;
use crate::rng::{derive_seed, seed_rng, shuffle};
use crate::train::PredictedSeries;
use crate::{Error, Result};

const STREAM_SURROGATE: u64 = 0x53555252; // "SURR"

/// Default number of surrogate shuffles.
pub const DEFAULT_N_SHUFFLES: usize = 1000;
/// Minimum series length accepted by the surrogate test.
pub const MIN_SURROGATE_LEN: usize = 10;

/// Outcome of one surrogate-corrected correlation test.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub series_id: String,
    pub r: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub z: f64,
    /// Two-sided normal tail probability of `z`.
    pub p: f64,
    /// Significance level after Bonferroni correction (alpha / comparisons).
    pub alpha_corrected: f64,
    /// Significant only for positive correlations: p below the corrected
    /// level and r above the null mean.
    pub significant: bool,
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(
            "correlation input",
            format!("length mismatch: {} vs {}", x.len(), y.len()),
        ));
    }
    if x.len() < 3 {
        return Err(Error::invalid(
            "correlation input",
            format!("need at least 3 points, got {}", x.len()),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in input series".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Complementary error function (Abramowitz & Stegun 7.1.26 rational
/// approximation, |error| < 1.5e-7).
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    poly * (-x * x).exp()
}

/// Two-sided normal tail probability of a z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Correlation coefficients between shuffled copies of `pred` and the fixed
/// `actual` series. Each shuffle has its own seed derived from
/// `(seed, shuffle index)`, so the null is reproducible and independent of
/// evaluation order.
pub fn surrogate_null(pred: &[f64], actual: &[f64], n_shuffles: usize, seed: u64) -> Result<Vec<f64>> {
    let n = pred.len() as f64;
    let mx = pred.iter().sum::<f64>() / n;
    let my = actual.iter().sum::<f64>() / n;
    let cx: Vec<f64> = pred.iter().map(|v| v - mx).collect();
    let cy: Vec<f64> = actual.iter().map(|v| v - my).collect();
    let sxx: f64 = cx.iter().map(|v| v * v).sum();
    let syy: f64 = cy.iter().map(|v| v * v).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in input series".into(),
        ));
    }
    let denom = (sxx * syy).sqrt();

    let chunks = chunked_map(n_shuffles, 16, |range| {
        let mut perm: Vec<usize> = Vec::new();
        range
            .map(|s| {
                let mut rng = seed_rng(derive_seed(seed, &[STREAM_SURROGATE, s as u64]));
                perm.clear();
                perm.extend(0..cx.len());
                shuffle(&mut rng, &mut perm);
                let sxy: f64 = perm.iter().zip(&cy).map(|(&pi, y)| cx[pi] * y).sum();
                sxy / denom
            })
            .collect::<Vec<f64>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Surrogate-shuffle significance test.
///
/// The observed coefficient is standardized against the mean and standard
/// deviation of `n_shuffles` shuffled-pred correlations; `p` is the
/// two-sided normal tail of that z-score, compared against
/// `alpha / n_comparisons` (Bonferroni). Only positive correlations count
/// as significant.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_test(
    series_id: &str,
    pred: &[f64],
    actual: &[f64],
    n_shuffles: usize,
    seed: u64,
    alpha: f64,
    n_comparisons: usize,
) -> Result<CorrelationReport> {
    if pred.len() != actual.len() {
        return Err(Error::invalid(
            "surrogate input",
            format!("length mismatch: {} vs {}", pred.len(), actual.len()),
        ));
    }
    if pred.len() < MIN_SURROGATE_LEN {
        return Err(Error::invalid(
            "surrogate input",
            format!("need at least {MIN_SURROGATE_LEN} frames, got {}", pred.len()),
        ));
    }
    if n_shuffles < 2 || n_comparisons == 0 {
        return Err(Error::invalid(
            "surrogate config",
            "need n_shuffles ≥ 2 and n_comparisons ≥ 1",
        ));
    }

    let r = pearson(pred, actual)?;
    let null = surrogate_null(pred, actual, n_shuffles, seed)?;
    let null_mean = null.iter().sum::<f64>() / null.len() as f64;
    let null_var = null
        .iter()
        .map(|v| (v - null_mean) * (v - null_mean))
        .sum::<f64>()
        / (null.len() - 1) as f64;
    let null_sd = null_var.sqrt();
    if null_sd == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "degenerate surrogate null (zero spread)".into(),
        ));
    }
    let z = (r - null_mean) / null_sd;
    let p = normal_two_sided_p(z);
    let alpha_corrected = alpha / n_comparisons as f64;
    Ok(CorrelationReport {
        series_id: series_id.to_string(),
        r,
        null_mean,
        null_sd,
        z,
        p,
        alpha_corrected,
        significant: p < alpha_corrected && z > 0.0,
    })
}

/// Frame-aligned pred/actual slices around one event.
#[derive(Debug, Clone)]
pub struct EventSlice {
    pub id: String,
    pub event_frame: usize,
    pub pred: Vec<f64>,
    pub actual: Vec<f64>,
}

/// Mean and standard-error curves around events, for the predicted and the
/// actual series. Offsets run from `-pre_window` to `+post_window` frames.
#[derive(Debug, Clone)]
pub struct AlignedCurves {
    pub event_count: usize,
    pub pre_window: usize,
    pub post_window: usize,
    pub pred_mean: Vec<f64>,
    pub pred_se: Vec<f64>,
    pub actual_mean: Vec<f64>,
    pub actual_se: Vec<f64>,
}

/// Cut per-event windows out of a clip's predicted and actual series.
///
/// Events whose window would leave either series' valid range are dropped;
/// the second return value counts them.
pub fn collect_event_slices(
    pred: &PredictedSeries,
    actual: &BlinkRateSeries,
    event_frames: &[usize],
    pre_window: usize,
    post_window: usize,
) -> (Vec<EventSlice>, usize) {
    let first = pred.first_valid_frame;
    let last = first + pred.values.len(); // exclusive
    let mut slices = Vec::new();
    let mut dropped = 0usize;
    for &e in event_frames {
        let lo = e.checked_sub(pre_window);
        let hi = e + post_window + 1; // exclusive
        match lo {
            Some(lo) if lo >= first && hi <= last && hi <= actual.values.len() => {
                slices.push(EventSlice {
                    id: format!("{}@{}", pred.clip_id, e),
                    event_frame: e,
                    pred: pred.values[lo - first..hi - first].to_vec(),
                    actual: actual.values[lo..hi].to_vec(),
                });
            }
            _ => dropped += 1,
        }
    }
    (slices, dropped)
}

/// Average the per-event slices into mean ± standard-error curves.
pub fn aligned_curves(
    slices: &[EventSlice],
    pre_window: usize,
    post_window: usize,
) -> Result<AlignedCurves> {
    if slices.is_empty() {
        return Err(Error::NoUsableEvents(
            "no event has a full window inside the series".into(),
        ));
    }
    let len = pre_window + post_window + 1;
    for s in slices {
        if s.pred.len() != len || s.actual.len() != len {
            return Err(Error::invalid(
                "event slices",
                format!("slice {} has wrong length", s.id),
            ));
        }
    }

    let n = slices.len();
    let mean_se = |pick: &dyn Fn(&EventSlice) -> &[f64]| {
        let mut mean = vec![0.0; len];
        let mut se = vec![0.0; len];
        for s in slices {
            for (m, v) in mean.iter_mut().zip(pick(s)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        if n > 1 {
            for s in slices {
                for ((e, v), m) in se.iter_mut().zip(pick(s)).zip(&mean) {
                    *e += (v - m) * (v - m);
                }
            }
            for e in se.iter_mut() {
                *e = (*e / (n - 1) as f64).sqrt() / (n as f64).sqrt();
            }
        }
        (mean, se)
    };

    let (pred_mean, pred_se) = mean_se(&|s: &EventSlice| s.pred.as_slice());
    let (actual_mean, actual_se) = mean_se(&|s: &EventSlice| s.actual.as_slice());
    Ok(AlignedCurves {
        event_count: n,
        pre_window,
        post_window,
        pred_mean,
        pred_se,
        actual_mean,
        actual_se,
    })
}

/// Event-aligned analysis for one clip: mean ± SE curves plus a per-event
/// surrogate test (Bonferroni-corrected by the usable event count).
#[allow(clippy::too_many_arguments)]
pub fn align_events(
    pred: &PredictedSeries,
    actual: &BlinkRateSeries,
    event_frames: &[usize],
    pre_window: usize,
    post_window: usize,
    n_shuffles: usize,
    seed: u64,
    alpha: f64,
) -> Result<(AlignedCurves, Vec<CorrelationReport>, usize)> {
    let (slices, dropped) = collect_event_slices(pred, actual, event_frames, pre_window, post_window);
    let curves = aligned_curves(&slices, pre_window, post_window)?;
    let reports = per_event_reports(&slices, slices.len(), n_shuffles, seed, alpha)?;
    Ok((curves, reports, dropped))
}

/// Surrogate tests for a pooled set of event slices (possibly from many
/// clips); `n_comparisons` is the total event count in the pool.
pub fn per_event_reports(
    slices: &[EventSlice],
    n_comparisons: usize,
    n_shuffles: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<CorrelationReport>> {
    slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            surrogate_test(
                &s.id,
                &s.pred,
                &s.actual,
                n_shuffles,
                derive_seed(seed, &[STREAM_SURROGATE, 0xa11a, i as u64]),
                alpha,
                n_comparisons,
            )
        })
        .collect()
}

/// CSV: `series_id,r,null_mean,null_sd,z,p,significant`.
pub fn write_reports_csv(reports: &[CorrelationReport]) -> String {
    let mut out = String::from("series_id,r,null_mean,null_sd,z,p,significant\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.series_id, r.r, r.null_mean, r.null_sd, r.z, r.p, r.significant
        ));
    }
    out
}

/// CSV: `offset_frame,pred_mean,pred_se,actual_mean,actual_se`.
pub fn write_curves_csv(curves: &AlignedCurves) -> String {
    let mut out = String::from("offset_frame,pred_mean,pred_se,actual_mean,actual_se\n");
    for i in 0..curves.pred_mean.len() {
        let offset = i as isize - curves.pre_window as isize;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            offset, curves.pred_mean[i], curves.pred_se[i], curves.actual_mean[i], curves.actual_se[i]
        ));
    }
    out
}
