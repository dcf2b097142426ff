//! Largest Lyapunov exponent of a scalar series from the mean logarithmic
//! divergence of nearest-neighbor pairs in delay space.

use serde::{Deserialize, Serialize};

use crate::complexity::embed;
use crate::series::autocorrelation;
use crate::stats::line_fit;
use crate::{Error, Result, TimeSeries};

/// The delay-selection threshold, `1 - 1/e`.
pub const DELAY_THRESHOLD: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Smallest lag whose autocorrelation falls below `1 - 1/e`, searched up to
/// `N/2`.
pub fn select_delay(series: &TimeSeries) -> Result<usize> {
    let max_lag = series.len() / 2;
    let acf = autocorrelation(series, max_lag)?;
    acf.iter()
        .position(|&r| r < DELAY_THRESHOLD)
        .ok_or(Error::DelayNotFound {
            threshold: DELAY_THRESHOLD,
            max_lag,
        })
}

/// `b[i] = ⟨ln d_j(i)⟩ / Δt` over the pairs still inside the trajectory at
/// offset `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurve {
    pub offsets: Vec<usize>,
    pub b: Vec<f64>,
    pub n_pairs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Per unit of `dt`.
    pub lambda: f64,
    /// Inclusive offsets of the fitted range.
    pub fit_range: (usize, usize),
    pub fit_r2: f64,
    pub fit_max_residual: f64,
    pub m: usize,
    pub delay: usize,
    /// Number of delay vectors.
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosensteinConfig {
    pub m: usize,
    pub delay: usize,
    pub max_offset: usize,
    /// Fixed inclusive fit range; auto-selected when `None`.
    pub fit_range: Option<(usize, usize)>,
    /// Neighbors must be more than this many samples apart; defaults to the delay.
    pub min_separation: Option<usize>,
    /// Residual bound for the automatic fit range, in nats.
    pub max_fit_residual: f64,
}

impl RosensteinConfig {
    pub fn new(m: usize, delay: usize, max_offset: usize) -> Self {
        Self {
            m,
            delay,
            max_offset,
            fit_range: None,
            min_separation: None,
            max_fit_residual: 0.1,
        }
    }
}

pub const MIN_ROWS: usize = 10;
pub const MIN_PAIRS: usize = 5;
/// Shortest automatic fit range, in offsets.
pub const MIN_FIT_POINTS: usize = 5;

/// Nearest-neighbor divergence estimate of the largest exponent.
///
/// The automatic fit range is the longest prefix `0..=k` of at least
/// [`MIN_FIT_POINTS`] offsets whose least-squares line stays within
/// `max_fit_residual` of every point.
pub fn rosenstein(
    series: &TimeSeries,
    cfg: &RosensteinConfig,
) -> Result<(DivergenceCurve, LyapunovEstimate)> {
    if cfg.max_offset < 2 {
        return Err(Error::InvalidArgument("max_offset must be at least 2".into()));
    }
    let traj = embed(series, cfg.m, cfg.delay)?;
    let rows = traj.len();
    if rows < MIN_ROWS {
        return Err(Error::TooShort {
            needed: (cfg.m - 1) * cfg.delay + MIN_ROWS,
            got: series.len(),
        });
    }
    let sep = cfg.min_separation.unwrap_or(cfg.delay);
    // Distances this small relative to the data spread are treated as exact
    // recurrences.
    let floor2 = (1e-10 * series.variance().sqrt()).powi(2) * cfg.m as f64;

    let pairs: Vec<(usize, usize)> = (0..rows)
        .filter_map(|j| {
            (0..rows)
                .filter(|&k| k.abs_diff(j) > sep)
                .map(|k| (k, traj.dist2(j, k)))
                .filter(|&(_, d2)| d2 > floor2)
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"))
                .map(|(k, _)| (j, k))
        })
        .collect();
    if pairs.len() < MIN_PAIRS {
        return Err(Error::TooFewPairs(pairs.len()));
    }

    let mut alive = vec![true; pairs.len()];
    let mut curve = DivergenceCurve {
        offsets: Vec::new(),
        b: Vec::new(),
        n_pairs: Vec::new(),
    };
    for i in 0..=cfg.max_offset {
        let mut sum = 0.0;
        let mut count = 0;
        for (p, &(j, k)) in pairs.iter().enumerate() {
            if !alive[p] {
                continue;
            }
            if j.max(k) + i >= rows {
                alive[p] = false;
                continue;
            }
            let d2 = traj.dist2(j + i, k + i);
            if d2 <= floor2 {
                alive[p] = false;
                continue;
            }
            sum += 0.5 * d2.ln();
            count += 1;
        }
        if count == 0 {
            break;
        }
        curve.offsets.push(i);
        curve.b.push(sum / count as f64 / series.dt());
        curve.n_pairs.push(count);
    }

    let x: Vec<f64> = curve.offsets.iter().map(|&i| i as f64).collect();
    let (lo, hi) = match cfg.fit_range {
        Some((lo, hi)) => {
            if lo >= hi || hi >= curve.offsets.len() {
                return Err(Error::InvalidArgument(format!(
                    "fit range ({lo}, {hi}) outside the divergence curve 0..{}",
                    curve.offsets.len()
                )));
            }
            (lo, hi)
        }
        None => auto_fit_range(&x, &curve.b, cfg.max_fit_residual)?,
    };
    let fit = line_fit(&x[lo..=hi], &curve.b[lo..=hi])
        .ok_or_else(|| Error::Degenerate("divergence fit range too short".into()))?;
    Ok((
        curve,
        LyapunovEstimate {
            lambda: fit.slope,
            fit_range: (lo, hi),
            fit_r2: fit.r2,
            fit_max_residual: fit.max_residual,
            m: cfg.m,
            delay: cfg.delay,
            rows,
        },
    ))
}

fn auto_fit_range(x: &[f64], y: &[f64], max_residual: f64) -> Result<(usize, usize)> {
    if y.len() < MIN_FIT_POINTS {
        return Err(Error::TooShort {
            needed: MIN_FIT_POINTS,
            got: y.len(),
        });
    }
    for end in (MIN_FIT_POINTS - 1..y.len()).rev() {
        if let Some(f) = line_fit(&x[..=end], &y[..=end]) {
            if f.max_residual <= max_residual {
                return Ok((0, end));
            }
        }
    }
    Ok((0, MIN_FIT_POINTS - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v).unwrap()
    }

    fn logistic(n: usize) -> Vec<f64> {
        let mut x = 0.3;
        (0..n)
            .map(|_| {
                x = 4.0 * x * (1.0 - x);
                x
            })
            .collect()
    }

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn delay_of_ar1() {
        assert_eq!(select_delay(&ts(ar1(0.9, 100_000, 1))).unwrap(), 5);
    }

    #[test]
    fn delay_of_white_noise() {
        assert_eq!(select_delay(&ts(ar1(0.0, 5000, 2))).unwrap(), 1);
    }

    #[test]
    fn delay_errors() {
        // A slow ramp decorrelates late but still within N/2.
        let ramp = ts((0..200).map(f64::from).collect());
        let j = select_delay(&ramp).unwrap();
        assert!(j > 20 && j < 100, "J = {j}");
        assert!(matches!(select_delay(&ts(vec![1.0; 20])), Err(Error::ConstantSeries)));
    }

    #[test]
    fn logistic_map_exponent() {
        let (_, est) = rosenstein(&ts(logistic(5000)), &RosensteinConfig::new(2, 1, 30)).unwrap();
        assert!((est.lambda - std::f64::consts::LN_2).abs() < 0.1, "λ = {}", est.lambda);
    }

    #[test]
    fn periodic_signal_is_flat() {
        let period = 10.0 * 3f64.sqrt();
        let v: Vec<f64> = (0..1000)
            .map(|t| (std::f64::consts::TAU * t as f64 / period).sin())
            .collect();
        let (_, est) = rosenstein(&ts(v), &RosensteinConfig::new(2, 4, 40)).unwrap();
        assert!(est.lambda.abs() < 0.02, "λ = {}", est.lambda);
    }

    #[test]
    fn curve_definition_and_invariances() {
        let v = logistic(800);
        let s = ts(v.clone());
        let cfg = RosensteinConfig::new(2, 1, 20);
        let (curve, est) = rosenstein(&s, &cfg).unwrap();
        assert!(curve.n_pairs.windows(2).all(|w| w[1] <= w[0]));

        // b(0) is the mean log initial neighbor distance.
        let traj = embed(&s, 2, 1).unwrap();
        let mut logs = Vec::new();
        for j in 0..traj.len() {
            let d = (0..traj.len())
                .filter(|&k| k.abs_diff(j) > 1)
                .map(|k| traj.dist2(j, k).sqrt())
                .fold(f64::INFINITY, f64::min);
            logs.push(d.ln());
        }
        let b0 = logs.iter().sum::<f64>() / logs.len() as f64;
        assert!((curve.b[0] - b0).abs() < 1e-12);

        let scaled = ts(v.iter().map(|x| 7.0 * x + 3.0).collect());
        let (_, est2) = rosenstein(&scaled, &cfg).unwrap();
        assert!((est.lambda - est2.lambda).abs() < 1e-9);
        assert_eq!(est.fit_range, est2.fit_range);

        let slow = s.clone().with_dt(2.0).unwrap();
        let fixed = RosensteinConfig {
            fit_range: Some(est.fit_range),
            ..cfg
        };
        let (_, est3) = rosenstein(&slow, &fixed).unwrap();
        assert!((est3.lambda - est.lambda / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_and_bad_ranges() {
        let s = ts(logistic(30));
        assert!(rosenstein(&s, &RosensteinConfig::new(3, 10, 5)).is_err());
        let cfg = RosensteinConfig {
            fit_range: Some((3, 2)),
            ..RosensteinConfig::new(2, 1, 5)
        };
        assert!(rosenstein(&s, &cfg).is_err());
        assert!(rosenstein(&s, &RosensteinConfig::new(2, 1, 1)).is_err());
    }

    #[test]
    fn exact_repeats_do_not_count_as_pairs() {
        assert!(matches!(
            rosenstein(&ts(vec![0.5; 60]), &RosensteinConfig::new(2, 1, 5)),
            Err(Error::TooFewPairs(0))
        ));
        // A period-3 cycle: every neighbor is another phase of the cycle.
        let v: Vec<f64> = (0..60).map(|t| [0.0, 1.0, 0.5][t % 3]).collect();
        let (curve, _) = rosenstein(&ts(v), &RosensteinConfig::new(2, 1, 5)).unwrap();
        assert!(curve.b.iter().all(|b| b.is_finite()));
        assert_eq!(curve.n_pairs[0], 59);
    }
}
