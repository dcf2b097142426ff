//! Delay embedding, Grassberger–Procaccia correlation dimension and the
//! phase-randomized surrogate test for nonlinearity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::spectral::{dft, idft};
use crate::stats::{line_fit, mean, percentile_sorted, sample_sd};
use crate::{Error, Result, TimeSeries};

/// Delay vectors `A_i = [x_i, x_{i+J}, ..., x_{i+(m-1)J}]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedTrajectory {
    points: Vec<f64>,
    dim: usize,
    delay: usize,
    rows: usize,
}

impl EmbeddedTrajectory {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of state vectors, `M = N - (m-1)J`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub(crate) fn dist2(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

pub fn embed(series: &TimeSeries, m: usize, delay: usize) -> Result<EmbeddedTrajectory> {
    if m == 0 || delay == 0 {
        return Err(Error::InvalidArgument(
            "embedding dimension and delay must be at least 1".into(),
        ));
    }
    let n = series.len();
    let span = (m - 1) * delay;
    if n < span + 2 {
        return Err(Error::TooShort {
            needed: span + 2,
            got: n,
        });
    }
    let rows = n - span;
    let v = series.values();
    let mut points = Vec::with_capacity(rows * m);
    for i in 0..rows {
        for k in 0..m {
            points.push(v[i + k * delay]);
        }
    }
    Ok(EmbeddedTrajectory {
        points,
        dim: m,
        delay,
        rows,
    })
}

/// Number of admissible pairs `(i, j)` with `j > i + theiler`.
fn pair_count(rows: usize, theiler: usize) -> u64 {
    if rows <= theiler + 1 {
        return 0;
    }
    let k = (rows - theiler - 1) as u64;
    k * (k + 1) / 2
}

/// Fraction of admissible pairs closer than `r`.
pub fn correlation_sum(traj: &EmbeddedTrajectory, r: f64, theiler: usize) -> f64 {
    correlation_sums(traj, &[r], theiler)[0]
}

/// Correlation sums at ascending radii in one pass over the pairs.
pub fn correlation_sums(traj: &EmbeddedTrajectory, radii: &[f64], theiler: usize) -> Vec<f64> {
    let total = pair_count(traj.len(), theiler);
    if total == 0 {
        return vec![0.0; radii.len()];
    }
    debug_assert!(radii.windows(2).all(|w| w[0] <= w[1]));
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let rows = traj.len();
    let hist = (0..rows)
        .into_par_iter()
        .fold(
            || vec![0u64; r2.len() + 1],
            |mut h, i| {
                for j in (i + theiler + 1)..rows {
                    let d2 = traj.dist2(i, j);
                    // First radius strictly larger than the distance.
                    let k = r2.partition_point(|&r| r <= d2);
                    h[k] += 1;
                }
                h
            },
        )
        .reduce(
            || vec![0u64; r2.len() + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut acc = 0u64;
    hist[..r2.len()]
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect()
}

/// Controls radius sampling and scaling-range selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrDimOptions {
    pub n_radii: usize,
    pub lower_percentile: f64,
    pub upper_percentile: f64,
    pub min_points: usize,
    pub min_r2: f64,
    /// Every local slope inside the scaling range must lie within this
    /// fraction of the fitted slope.
    pub slope_tolerance: f64,
    /// Distances used to place the radii are subsampled above this many pairs.
    pub max_percentile_pairs: usize,
}

impl Default for CorrDimOptions {
    fn default() -> Self {
        Self {
            n_radii: 40,
            lower_percentile: 1.0,
            upper_percentile: 90.0,
            min_points: 8,
            min_r2: 0.98,
            slope_tolerance: 0.1,
            max_percentile_pairs: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDimensionResult {
    pub m: usize,
    pub delay: usize,
    pub theiler: usize,
    pub radii: Vec<f64>,
    /// Natural log of C(r); `-inf` where no pair is inside r.
    pub log_c: Vec<f64>,
    pub cd: f64,
    pub fit_range: (f64, f64),
    /// Inclusive indices into `radii` of the fitted range.
    pub fit_indices: (usize, usize),
    pub fit_r2: f64,
    pub reliable: bool,
}

/// Pairwise distances at the requested percentiles; pairs are subsampled
/// with a fixed stride on large trajectories so the result depends only on
/// the trajectory.
fn distance_percentiles(
    traj: &EmbeddedTrajectory,
    theiler: usize,
    qs: [f64; 2],
    max_pairs: usize,
) -> Result<(f64, f64)> {
    let total = pair_count(traj.len(), theiler);
    if total < 2 {
        return Err(Error::TooShort {
            needed: theiler + 3,
            got: traj.len(),
        });
    }
    let stride = total.div_ceil(max_pairs as u64).max(1);
    let rows = traj.len();
    let mut offsets = Vec::with_capacity(rows);
    let mut acc = 0u64;
    for i in 0..rows {
        offsets.push(acc);
        acc += rows.saturating_sub(i + theiler + 1) as u64;
    }
    let mut d: Vec<f64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|i| {
            let first = i + theiler + 1;
            let off = offsets[i];
            // Smallest j-offset whose global pair index is a multiple of stride.
            let skip = (stride - off % stride) % stride;
            (first + skip as usize..rows)
                .step_by(stride as usize)
                .map(move |j| traj.dist2(i, j).sqrt())
        })
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mut lo = percentile_sorted(&d, qs[0]);
    let hi = percentile_sorted(&d, qs[1]);
    if lo <= 0.0 {
        lo = d.iter().copied().find(|&x| x > 0.0).unwrap_or(0.0);
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Degenerate(
            "pairwise distances have no spread".into(),
        ));
    }
    Ok((lo, hi))
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct RangeFit {
    start: usize,
    end: usize,
    slope: f64,
    r2: f64,
}

fn fit_range(log_r: &[f64], log_c: &[f64], start: usize, end: usize) -> Option<RangeFit> {
    let ys = &log_c[start..=end];
    if ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let f = line_fit(&log_r[start..=end], ys)?;
    Some(RangeFit {
        start,
        end,
        slope: f.slope,
        r2: f.r2,
    })
}

/// Widest window of at least `min_points` radii with r² ≥ `min_r2` whose
/// local slopes all stay within `slope_tolerance` of the fitted slope; ties
/// go to the higher r². Falls back to the best-r² minimal window, flagged
/// unreliable.
fn select_scaling_range(log_r: &[f64], log_c: &[f64], opts: &CorrDimOptions) -> Option<(RangeFit, bool)> {
    let n = log_r.len();
    for width in (opts.min_points..=n).rev() {
        let mut best: Option<RangeFit> = None;
        for start in 0..=(n - width) {
            let end = start + width - 1;
            let Some(f) = fit_range(log_r, log_c, start, end) else {
                continue;
            };
            if f.r2 < opts.min_r2 {
                continue;
            }
            let tol = opts.slope_tolerance * f.slope.abs();
            let steady = (start..end).all(|k| {
                let local = (log_c[k + 1] - log_c[k]) / (log_r[k + 1] - log_r[k]);
                (local - f.slope).abs() <= tol
            });
            if steady && best.as_ref().is_none_or(|b| f.r2 > b.r2) {
                best = Some(f);
            }
        }
        if let Some(b) = best {
            return Some((b, true));
        }
    }
    let width = opts.min_points.min(n);
    (0..=(n - width))
        .filter_map(|s| fit_range(log_r, log_c, s, s + width - 1))
        .max_by(|a, b| a.r2.partial_cmp(&b.r2).unwrap_or(std::cmp::Ordering::Equal))
        .map(|f| (f, false))
}

/// Correlation dimension with the default options.
pub fn correlation_dimension(
    series: &TimeSeries,
    m: usize,
    delay: usize,
    theiler: usize,
) -> Result<CorrelationDimensionResult> {
    correlation_dimension_with(series, m, delay, theiler, &CorrDimOptions::default())
}

pub fn correlation_dimension_with(
    series: &TimeSeries,
    m: usize,
    delay: usize,
    theiler: usize,
    opts: &CorrDimOptions,
) -> Result<CorrelationDimensionResult> {
    if series.is_constant() {
        return Err(Error::ConstantSeries);
    }
    if opts.n_radii < opts.min_points || opts.min_points < 2 {
        return Err(Error::InvalidArgument(
            "need at least min_points ≥ 2 radii".into(),
        ));
    }
    let traj = embed(series, m, delay)?;
    let (lo, hi) = distance_percentiles(
        &traj,
        theiler,
        [opts.lower_percentile, opts.upper_percentile],
        opts.max_percentile_pairs,
    )?;
    let radii = log_spaced(lo, hi, opts.n_radii);
    let log_c: Vec<f64> = correlation_sums(&traj, &radii, theiler)
        .into_iter()
        .map(f64::ln)
        .collect();
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let (fit, reliable) = select_scaling_range(&log_r, &log_c, opts)
        .ok_or_else(|| Error::Degenerate("no finite correlation sums to fit".into()))?;
    Ok(CorrelationDimensionResult {
        m,
        delay,
        theiler,
        fit_range: (radii[fit.start], radii[fit.end]),
        fit_indices: (fit.start, fit.end),
        radii,
        log_c,
        cd: fit.slope,
        fit_r2: fit.r2,
        reliable,
    })
}

/// Correlation dimension over a fixed set of radii and fit indices, as used
/// for surrogates so that they share the original's scaling range.
pub fn correlation_dimension_on(
    series: &TimeSeries,
    reference: &CorrelationDimensionResult,
    min_r2: f64,
) -> Result<CorrelationDimensionResult> {
    let traj = embed(series, reference.m, reference.delay)?;
    let log_c: Vec<f64> = correlation_sums(&traj, &reference.radii, reference.theiler)
        .into_iter()
        .map(f64::ln)
        .collect();
    let log_r: Vec<f64> = reference.radii.iter().map(|r| r.ln()).collect();
    let (s, e) = reference.fit_indices;
    let (cd, fit_r2, reliable) = match fit_range(&log_r, &log_c, s, e) {
        Some(f) => (f.slope, f.r2, f.r2 >= min_r2),
        None => (f64::NAN, f64::NAN, false),
    };
    Ok(CorrelationDimensionResult {
        log_c,
        cd,
        fit_r2,
        reliable,
        ..reference.clone()
    })
}

/// Multiplies bins `1..⌈N/2⌉` by `e^{iφ_k}` (and their mirrors by the
/// conjugate), keeping the mean and Nyquist terms real.
fn rotate_phases(series: &TimeSeries, mut phase: impl FnMut(usize) -> f64) -> Vec<f64> {
    let n = series.len();
    let mut f = dft(series.values());
    for k in 1..n.div_ceil(2) {
        let rot = Complex64::from_polar(1.0, phase(k));
        f[k] *= rot;
        f[n - k] = f[k].conj();
    }
    idft(&f).into_iter().map(|c| c.re).collect()
}

/// Surrogate number `index` of the stream seeded by `seed`.
pub fn phase_randomized_surrogate(series: &TimeSeries, seed: u64, index: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let values = rotate_phases(series, |_| rng.random_range(0.0..std::f64::consts::TAU));
    series
        .with_values(values)
        .expect("inverse transform of a finite spectrum is finite")
}

/// Surrogates with the original's amplitude spectrum and uniform random
/// phases. Surrogate `i` depends only on `(seed, i)`.
pub fn phase_randomized_surrogates(series: &TimeSeries, count: usize, seed: u64) -> Vec<TimeSeries> {
    (0..count as u64)
        .map(|i| phase_randomized_surrogate(series, seed, i))
        .collect()
}

/// `|q0 - mean| / sd`, with 0 when the observed value equals the mean.
pub fn z_score(q0: f64, surrogate_values: &[f64]) -> f64 {
    let m = mean(surrogate_values);
    let diff = (q0 - m).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / sample_sd(surrogate_values)
}

/// Two-sided standard normal critical value at level `rho`.
pub fn two_sided_critical_z(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance level must be in (0, 1), got {rho}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - rho / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTestConfig {
    pub m: usize,
    pub delay: usize,
    pub theiler: usize,
    pub count: usize,
    pub rho: f64,
    pub seed: u64,
}

impl SurrogateTestConfig {
    /// 100 surrogates at ρ = 0.1, Theiler window equal to the delay.
    pub fn new(m: usize, delay: usize, seed: u64) -> Self {
        Self {
            m,
            delay,
            theiler: delay,
            count: 100,
            rho: 0.1,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTestResult {
    pub m: usize,
    pub q0: f64,
    pub q_mean: f64,
    pub q_sd: f64,
    pub z: f64,
    pub critical_z: f64,
    pub n_surrogates: usize,
    pub n_excluded: usize,
    pub rho: f64,
    /// True when the null of linearly correlated noise is rejected.
    pub rejected: bool,
    pub original: CorrelationDimensionResult,
}

/// Maximum fraction of surrogates that may be excluded as unreliable.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;

pub fn surrogate_test(series: &TimeSeries, cfg: &SurrogateTestConfig) -> Result<SurrogateTestResult> {
    surrogate_test_with(series, cfg, &CorrDimOptions::default())
}

pub fn surrogate_test_with(
    series: &TimeSeries,
    cfg: &SurrogateTestConfig,
    opts: &CorrDimOptions,
) -> Result<SurrogateTestResult> {
    if cfg.count < 2 {
        return Err(Error::InvalidArgument("need at least 2 surrogates".into()));
    }
    let critical_z = two_sided_critical_z(cfg.rho)?;
    let original = correlation_dimension_with(series, cfg.m, cfg.delay, cfg.theiler, opts)?;
    let cds: Vec<Option<f64>> = (0..cfg.count as u64)
        .into_par_iter()
        .map(|i| {
            let s = phase_randomized_surrogate(series, cfg.seed, i);
            correlation_dimension_on(&s, &original, opts.min_r2)
                .ok()
                .filter(|r| r.reliable)
                .map(|r| r.cd)
        })
        .collect();
    let qs: Vec<f64> = cds.iter().flatten().copied().collect();
    let excluded = cfg.count - qs.len();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.count as f64 || qs.len() < 2 {
        return Err(Error::TooManyUnreliable {
            excluded,
            total: cfg.count,
        });
    }
    let z = z_score(original.cd, &qs);
    Ok(SurrogateTestResult {
        m: cfg.m,
        q0: original.cd,
        q_mean: mean(&qs),
        q_sd: sample_sd(&qs),
        z,
        critical_z,
        n_surrogates: qs.len(),
        n_excluded: excluded,
        rho: cfg.rho,
        rejected: z > critical_z,
        original,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::autocorrelation;
    use crate::spectral::periodogram;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v).unwrap()
    }

    fn brute_force_sum(traj: &EmbeddedTrajectory, r: f64, theiler: usize) -> f64 {
        let mut inside = 0usize;
        let mut total = 0usize;
        for i in 0..traj.len() {
            for j in (i + theiler + 1)..traj.len() {
                total += 1;
                if traj.dist2(i, j).sqrt() < r {
                    inside += 1;
                }
            }
        }
        inside as f64 / total as f64
    }

    #[test]
    fn embed_shapes() {
        let s = ts((1..=10).map(f64::from).collect());
        let e = embed(&s, 2, 3).unwrap();
        assert_eq!(e.len(), 7);
        assert_eq!(e.row(0), &[1.0, 4.0]);
        assert_eq!(e.row(6), &[7.0, 10.0]);
        let id = embed(&s, 1, 5).unwrap();
        assert_eq!(id.len(), 10);
        let long = ts(vec![0.5; 131]);
        assert_eq!(embed(&long, 3, 44).unwrap().len(), 43);
        assert!(embed(&s, 4, 3).is_err());
        assert!(embed(&s, 0, 1).is_err());
    }

    #[test]
    fn correlation_sum_examples() {
        let e = embed(&ts(vec![0.0, 1.0, 2.0]), 1, 1).unwrap();
        assert!((correlation_sum(&e, 1.5, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(correlation_sum(&e, 10.0, 0), 1.0);
        assert_eq!(correlation_sum(&e, 0.5, 0), 0.0);
        // Theiler window 1 leaves only the pair (0, 2).
        assert_eq!(correlation_sum(&e, 1.5, 1), 0.0);
        assert_eq!(correlation_sum(&e, 2.5, 1), 1.0);
        assert_eq!(correlation_sum(&e, 2.5, 2), 0.0);
    }

    #[test]
    fn correlation_sums_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let e = embed(&ts(v), 3, 2).unwrap();
        let radii = log_spaced(0.05, 1.2, 12);
        for theiler in [0, 2, 7] {
            let fast = correlation_sums(&e, &radii, theiler);
            for (r, c) in radii.iter().zip(&fast) {
                assert!((c - brute_force_sum(&e, *r, theiler)).abs() < 1e-15);
            }
            assert!(fast.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn percentile_subsampling_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        let e = embed(&ts(v), 2, 1).unwrap();
        let exact = distance_percentiles(&e, 1, [1.0, 90.0], usize::MAX).unwrap();
        let sub = distance_percentiles(&e, 1, [1.0, 90.0], 50_000).unwrap();
        assert!((exact.0 / sub.0 - 1.0).abs() < 0.05);
        assert!((exact.1 / sub.1 - 1.0).abs() < 0.01);
    }

    #[test]
    fn constant_series_rejected() {
        assert!(matches!(
            correlation_dimension(&ts(vec![1.0; 50]), 2, 1, 1),
            Err(Error::ConstantSeries)
        ));
    }

    #[test]
    fn sine_has_dimension_one() {
        let v: Vec<f64> = (0..4000)
            .map(|t| (std::f64::consts::TAU * t as f64 / 37.3).sin())
            .collect();
        let r = correlation_dimension(&ts(v), 3, 1, 1).unwrap();
        assert!(r.reliable);
        assert!((r.cd - 1.0).abs() < 0.1, "cd = {}", r.cd);
    }

    #[test]
    fn affine_rescaling_keeps_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..800).map(|_| rng.random_range(0.0..1.0)).collect();
        let s = ts(v.clone());
        let scaled = ts(v.iter().map(|x| -3.5 * x + 12.0).collect());
        let a = correlation_dimension(&s, 2, 1, 1).unwrap();
        let b = correlation_dimension(&scaled, 2, 1, 1).unwrap();
        assert!((a.cd - b.cd).abs() < 1e-6, "{} vs {}", a.cd, b.cd);
        assert_eq!(a.fit_indices, b.fit_indices);
    }

    #[test]
    fn surrogates_preserve_periodogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [131usize, 128] {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = ts(v);
            let p0 = periodogram(&s).unwrap();
            for sur in phase_randomized_surrogates(&s, 10, 99) {
                let p = periodogram(&sur).unwrap();
                for (a, b) in p0.power.iter().zip(&p.power) {
                    assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
                }
                assert!((sur.mean() - s.mean()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn surrogates_are_seeded() {
        let s = ts((0..64).map(|t| (t as f64 * 0.3).sin() + 0.1 * t as f64).collect());
        let a = phase_randomized_surrogates(&s, 3, 7);
        let b = phase_randomized_surrogates(&s, 3, 7);
        let c = phase_randomized_surrogates(&s, 3, 8);
        assert_eq!(a, b);
        assert_ne!(a[0], c[0]);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn surrogate_acf_matches_original() {
        // AR(1) so the ACF has structure to preserve.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut x = 0.0;
        let v: Vec<f64> = (0..2048)
            .map(|_| {
                x = 0.8 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let s = ts(v);
        let acf0 = autocorrelation(&s, 10).unwrap();
        let surs = phase_randomized_surrogates(&s, 100, 5);
        for lag in 1..=10 {
            let vals: Vec<f64> = surs
                .iter()
                .map(|x| autocorrelation(x, lag).unwrap()[lag])
                .collect();
            // The circular ACF is preserved exactly; the linear ACF differs
            // only by the wrap-around terms.
            assert!(
                (mean(&vals) - acf0[lag]).abs() < 0.02,
                "lag {lag}: {} vs {}",
                mean(&vals),
                acf0[lag]
            );
        }
    }

    #[test]
    fn unrandomized_phases_give_zero_z() {
        let s = ts((0..300).map(|t| (t as f64 * 0.37).sin() * (t as f64 * 0.05).cos()).collect());
        let original = correlation_dimension(&s, 2, 1, 1).unwrap();
        let same = ts(rotate_phases(&s, |_| 0.0));
        let q: Vec<f64> = (0..5)
            .map(|_| correlation_dimension_on(&same, &original, 0.98).unwrap().cd)
            .collect();
        let z = z_score(original.cd, &q);
        assert!(z.abs() < 1e-6, "z = {z}");
        assert_eq!(z_score(1.5, &[1.5, 1.5, 1.5]), 0.0);
    }

    #[test]
    fn critical_z_values() {
        assert!((two_sided_critical_z(0.1).unwrap() - 1.6448536).abs() < 1e-6);
        assert!((two_sided_critical_z(0.05).unwrap() - 1.959964).abs() < 1e-6);
        assert!(two_sided_critical_z(0.0).is_err());
    }

    #[test]
    fn logistic_map_rejects_null() {
        let mut x = 0.3;
        let v: Vec<f64> = (0..2000)
            .map(|_| {
                x = 4.0 * x * (1.0 - x);
                x
            })
            .collect();
        let cfg = SurrogateTestConfig {
            count: 40,
            ..SurrogateTestConfig::new(2, 1, 1)
        };
        let r = surrogate_test(&ts(v), &cfg).unwrap();
        assert!(r.rejected, "z = {}", r.z);
        assert!(r.q0 < r.q_mean);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn correlation_sum_monotone_in_r(
            v in proptest::collection::vec(-5.0f64..5.0, 10..80),
            mut radii in proptest::collection::vec(0.01f64..10.0, 2..10),
        ) {
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let e = embed(&ts(v), 2, 1).unwrap();
            let c = correlation_sums(&e, &radii, 0);
            prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(c.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn surrogate_amplitudes_preserved(
            v in proptest::collection::vec(-100.0f64..100.0, 8..200),
            seed in any::<u64>(),
        ) {
            let s = ts(v);
            let f0 = dft(s.values());
            let f1 = dft(phase_randomized_surrogate(&s, seed, 0).values());
            let scale = f0.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
            for (a, b) in f0.iter().zip(&f1) {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-9 * scale);
            }
        }
    }
}
