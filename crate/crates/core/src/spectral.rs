//! Discrete Fourier analysis of a window: coefficients, periodogram, the
//! cumulative-periodogram white-noise test and the two-harmonic signal model.
//!
//! Time is measured in samples from the start of the series, `t_n = n` for
//! `n = 0..N`. With `F(k) = Σ x_n e^{-iω_k n}` and `ω_k = 2πk/N`,
//!
//! ```text
//! x(t) = a0 + Σ_{k=1}^{⌊N/2⌋} a_k cos(ω_k t) + b_k sin(ω_k t)
//! a_k = 2 Re F(k) / N,  b_k = -2 Im F(k) / N
//! ```
//!
//! except for the Nyquist term of an even-length series, which has
//! `a_{N/2} = Re F(N/2) / N` and no sine part.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, TimeSeries};

/// Shortest series accepted by [`decompose`] and [`periodogram`].
pub const MIN_SPECTRAL_LEN: usize = 4;

/// Forward DFT, `F(k) = Σ x_n e^{-2πikn/N}`.
pub(crate) fn dft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT including the `1/N` factor.
pub(crate) fn idft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len() as f64;
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf.iter_mut().for_each(|c| *c /= n);
    buf
}

fn check_len(series: &TimeSeries) -> Result<()> {
    if series.len() < MIN_SPECTRAL_LEN {
        return Err(Error::TooShort {
            needed: MIN_SPECTRAL_LEN,
            got: series.len(),
        });
    }
    Ok(())
}

/// Real Fourier coefficients of a series. Vectors are indexed from bin 1:
/// `a[k - 1]` is `a_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub n: usize,
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub omega: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn n_bins(&self) -> usize {
        self.a.len()
    }

    /// Evaluates the full trigonometric sum at (possibly fractional) time `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.a0
            + self
                .a
                .iter()
                .zip(&self.b)
                .zip(&self.omega)
                .map(|((a, b), w)| a * (w * t).cos() + b * (w * t).sin())
                .sum::<f64>()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.n).map(|t| self.evaluate(t as f64)).collect()
    }

    /// Bin index `k` (1-based) of an angular frequency on this grid.
    pub fn bin_of(&self, omega: f64) -> Result<usize> {
        bin_of(self.n, omega)
    }
}

pub fn bin_of(n: usize, omega: f64) -> Result<usize> {
    let k = omega * n as f64 / (2.0 * PI);
    let kr = k.round();
    if !k.is_finite() || (k - kr).abs() > 1e-9 * kr.max(1.0) || kr < 1.0 || kr as usize > n / 2 {
        return Err(Error::OffGrid(omega));
    }
    Ok(kr as usize)
}

pub fn angular(n: usize, bin: usize) -> f64 {
    2.0 * PI * bin as f64 / n as f64
}

pub fn decompose(series: &TimeSeries) -> Result<SpectralDecomposition> {
    check_len(series)?;
    let n = series.len();
    let f = dft(series.values());
    let nf = n as f64;
    let half = n / 2;
    let mut a = Vec::with_capacity(half);
    let mut b = Vec::with_capacity(half);
    for (k, fk) in f.iter().enumerate().take(half + 1).skip(1) {
        if 2 * k == n {
            a.push(fk.re / nf);
            b.push(0.0);
        } else {
            a.push(2.0 * fk.re / nf);
            b.push(-2.0 * fk.im / nf);
        }
    }
    Ok(SpectralDecomposition {
        n,
        a0: f[0].re / nf,
        a,
        b,
        omega: (1..=half).map(|k| angular(n, k)).collect(),
    })
}

/// Periodogram ordinates `p_j = |F(j)|² / N` for `j = 1..=⌊N/2⌋` of the
/// demeaned series. `power[j - 1]` is `p_j`; `freq` is cyclic, `j / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub n: usize,
    pub power: Vec<f64>,
    pub freq: Vec<f64>,
}

impl Periodogram {
    pub fn n_bins(&self) -> usize {
        self.power.len()
    }

    /// Sum over the full two-sided spectrum `j = 1..N-1`; equals
    /// `N × variance` by Parseval.
    pub fn two_sided_total(&self) -> f64 {
        let mut total = 0.0;
        for (i, p) in self.power.iter().enumerate() {
            let j = i + 1;
            total += if 2 * j == self.n { *p } else { 2.0 * p };
        }
        total
    }

    pub fn omega(&self, bin: usize) -> f64 {
        angular(self.n, bin)
    }
}

pub fn periodogram(series: &TimeSeries) -> Result<Periodogram> {
    check_len(series)?;
    let n = series.len();
    let f = dft(series.demeaned().values());
    let half = n / 2;
    Ok(Periodogram {
        n,
        power: f[1..=half].iter().map(|c| c.norm_sqr() / n as f64).collect(),
        freq: (1..=half).map(|j| j as f64 / n as f64).collect(),
    })
}

/// Upper quantiles of `max_k |s_k - k/n|` under Gaussian white noise, as
/// `(series length, c0 at ρ = 0.05, c0 at ρ = 0.1)`.
///
/// Regenerate with `cargo run --release -p nlts --example durbin_table`.
const DURBIN_TABLE: &[(usize, f64, f64)] = &[
    (16, 0.4027, 0.3550),
    (18, 0.3852, 0.3402),
    (20, 0.3686, 0.3266),
    (22, 0.3550, 0.3139),
    (24, 0.3433, 0.3037),
    (26, 0.3309, 0.2932),
    (28, 0.3210, 0.2847),
    (30, 0.3116, 0.2760),
    (34, 0.2955, 0.2620),
    (40, 0.2742, 0.2435),
    (46, 0.2573, 0.2293),
    (50, 0.2477, 0.2207),
    (60, 0.2282, 0.2037),
    (70, 0.2121, 0.1895),
    (80, 0.1994, 0.1782),
    (90, 0.1889, 0.1689),
    (100, 0.1796, 0.1608),
    (110, 0.1723, 0.1540),
    (120, 0.1653, 0.1478),
    (125, 0.1611, 0.1442),
    (130, 0.1590, 0.1423),
    (131, 0.1577, 0.1412),
    (135, 0.1554, 0.1389),
    (140, 0.1534, 0.1372),
    (150, 0.1485, 0.1330),
    (155, 0.1457, 0.1305),
    (160, 0.1442, 0.1293),
    (180, 0.1362, 0.1220),
    (200, 0.1295, 0.1161),
    (250, 0.1164, 0.1045),
    (300, 0.1067, 0.0957),
    (400, 0.0929, 0.0834),
    (500, 0.0833, 0.0747),
    (600, 0.0764, 0.0686),
    (800, 0.0663, 0.0596),
    (1000, 0.0593, 0.0534),
    (1024, 0.0587, 0.0528),
];

/// Minimum number of periodogram ordinates for [`durbin_test`].
pub const MIN_DURBIN_BINS: usize = 8;

/// Critical value `c0` for a series of length `n` at two-sided size `rho`.
///
/// Rows are linearly interpolated in `n`; beyond the last row the value is
/// extrapolated with the `1/√(n/2)` asymptotic scaling.
pub fn durbin_critical_value(n: usize, rho: f64) -> Result<f64> {
    let col = rho_column(rho)?;
    if n / 2 < MIN_DURBIN_BINS {
        return Err(Error::TooShort {
            needed: 2 * MIN_DURBIN_BINS,
            got: n,
        });
    }
    let pick = |row: &(usize, f64, f64)| if col == 0 { row.1 } else { row.2 };
    let first = DURBIN_TABLE[0];
    let last = DURBIN_TABLE[DURBIN_TABLE.len() - 1];
    if n <= first.0 {
        return Ok(pick(&first));
    }
    if n >= last.0 {
        let scale = ((last.0 / 2) as f64 / (n / 2) as f64).sqrt();
        return Ok(pick(&last) * scale);
    }
    let hi = DURBIN_TABLE
        .iter()
        .position(|r| r.0 >= n)
        .expect("n is inside the table range");
    let (r0, r1) = (DURBIN_TABLE[hi - 1], DURBIN_TABLE[hi]);
    let w = (n - r0.0) as f64 / (r1.0 - r0.0) as f64;
    Ok(pick(&r0) * (1.0 - w) + pick(&r1) * w)
}

fn rho_column(rho: f64) -> Result<usize> {
    if (rho - 0.05).abs() < 1e-12 {
        Ok(0)
    } else if (rho - 0.1).abs() < 1e-12 {
        Ok(1)
    } else {
        Err(Error::UnsupportedRho(rho))
    }
}

/// Outcome of the cumulative-periodogram white-noise test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurbinResult {
    pub rho: f64,
    /// Cumulative fractions, `s[k - 1]` is `s_k`.
    pub s: Vec<f64>,
    pub max_deviation: f64,
    pub c0: f64,
    pub reject_white_noise: bool,
    /// Bins where the cumulative periodogram lies outside `k/n ± c0` and the
    /// bin itself carries more than the white-noise share `1/n` of the power.
    pub noise_free_bins: Vec<usize>,
}

impl DurbinResult {
    /// Lower and upper band at bin `k`.
    pub fn band(&self, k: usize) -> (f64, f64) {
        let line = k as f64 / self.s.len() as f64;
        (line - self.c0, line + self.c0)
    }
}

/// Cumulative fractions `s_k` and `max_k |s_k - k/n|`.
pub fn cumulative_periodogram(pg: &Periodogram) -> Result<(Vec<f64>, f64)> {
    let total: f64 = pg.power.iter().sum();
    if total <= 0.0 {
        return Err(Error::ConstantSeries);
    }
    let n = pg.n_bins();
    let mut acc = 0.0;
    let mut s: Vec<f64> = pg
        .power
        .iter()
        .map(|p| {
            acc += p;
            acc / total
        })
        .collect();
    s[n - 1] = 1.0;
    let max_dev = s
        .iter()
        .enumerate()
        .map(|(i, sk)| (sk - (i + 1) as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    Ok((s, max_dev))
}

pub fn durbin_test(pg: &Periodogram, rho: f64) -> Result<DurbinResult> {
    rho_column(rho)?;
    let nb = pg.n_bins();
    if nb < MIN_DURBIN_BINS {
        return Err(Error::TooShort {
            needed: 2 * MIN_DURBIN_BINS,
            got: pg.n,
        });
    }
    let c0 = durbin_critical_value(pg.n, rho)?;
    let (s, max_deviation) = cumulative_periodogram(pg)?;
    let total: f64 = pg.power.iter().sum();
    let noise_free_bins = (1..=nb)
        .filter(|&k| {
            let dev = (s[k - 1] - k as f64 / nb as f64).abs();
            dev > c0 && pg.power[k - 1] / total > 1.0 / nb as f64
        })
        .collect();
    Ok(DurbinResult {
        rho,
        s,
        max_deviation,
        c0,
        reject_white_noise: max_deviation > c0,
        noise_free_bins,
    })
}

/// One selected spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantBin {
    pub bin: usize,
    pub omega: f64,
    /// Cyclic frequency per sample.
    pub freq: f64,
    /// Period in samples.
    pub period: f64,
    pub power: f64,
}

/// The `count` strongest noise-free bins, strongest first; ties go to the
/// lower bin.
pub fn dominant_frequencies(
    pg: &Periodogram,
    dr: &DurbinResult,
    count: usize,
) -> Result<Vec<DominantBin>> {
    if dr.noise_free_bins.len() < count {
        return Err(Error::NotEnoughNoiseFree {
            requested: count,
            bins: dr.noise_free_bins.clone(),
        });
    }
    let mut bins = dr.noise_free_bins.clone();
    bins.sort_by(|&x, &y| {
        pg.power[y - 1]
            .partial_cmp(&pg.power[x - 1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    Ok(bins
        .into_iter()
        .take(count)
        .map(|bin| DominantBin {
            bin,
            omega: pg.omega(bin),
            freq: bin as f64 / pg.n as f64,
            period: pg.n as f64 / bin as f64,
            power: pg.power[bin - 1],
        })
        .collect())
}

/// Two-frequency truncation of the Fourier series,
/// `x(t) = a0 + a1 cos ω1t + b1 sin ω1t + a2 cos ω2t + b2 sin ω2t`.
///
/// `n` is the length of the window whose DFT grid both frequencies lie on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPair {
    pub n: usize,
    pub omega1: f64,
    pub omega2: f64,
    pub a0: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl HarmonicPair {
    pub fn evaluate(&self, t: f64) -> f64 {
        let (w1, w2) = (self.omega1 * t, self.omega2 * t);
        self.a0 + self.a1 * w1.cos() + self.b1 * w1.sin() + self.a2 * w2.cos() + self.b2 * w2.sin()
    }

    pub fn amplitude1(&self) -> f64 {
        self.a1.hypot(self.b1)
    }

    pub fn amplitude2(&self) -> f64 {
        self.a2.hypot(self.b2)
    }

    pub fn periods(&self) -> (f64, f64) {
        (2.0 * PI / self.omega1, 2.0 * PI / self.omega2)
    }
}

/// Copies `a0` and the coefficients at the two requested bins.
pub fn harmonic_pair_fit(sd: &SpectralDecomposition, freqs: [f64; 2]) -> Result<HarmonicPair> {
    let k1 = sd.bin_of(freqs[0])?;
    let k2 = sd.bin_of(freqs[1])?;
    if k1 == k2 {
        return Err(Error::Degenerate("the two frequencies coincide".into()));
    }
    Ok(HarmonicPair {
        n: sd.n,
        omega1: sd.omega[k1 - 1],
        omega2: sd.omega[k2 - 1],
        a0: sd.a0,
        a1: sd.a[k1 - 1],
        b1: sd.b[k1 - 1],
        a2: sd.a[k2 - 1],
        b2: sd.b[k2 - 1],
    })
}

/// Projection of `x³(t)` onto `{1, cos ω1t, sin ω1t, cos ω2t, sin ω2t}`.
///
/// `cos1, sin1, cos2, sin2` are the coefficients A, B, C, D of the
/// harmonic-balance equations. `c0` is the projected constant, which also
/// contains cross terms such as `3/2 a0 (a1² + b1²)`; `a0_cubed` is the bare
/// `a0³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicHarmonics {
    pub c0: f64,
    pub a0_cubed: f64,
    pub cos1: f64,
    pub sin1: f64,
    pub cos2: f64,
    pub sin2: f64,
}

/// Minimum grid samples per period of the faster harmonic.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 8.0;

/// Least-squares projection of the cubed two-harmonic signal sampled on
/// `n_samples` equispaced points spanning `hp.n` time units, one common
/// period of every bin frequency of the window.
pub fn cubic_harmonics(hp: &HarmonicPair, n_samples: usize) -> Result<CubicHarmonics> {
    if (hp.omega1 - hp.omega2).abs() < 1e-12 {
        return Err(Error::Degenerate("ω1 = ω2".into()));
    }
    let span = hp.n as f64;
    let w_max = hp.omega1.abs().max(hp.omega2.abs());
    let per_period = n_samples as f64 * (2.0 * PI / w_max) / span;
    if per_period < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "{n_samples} samples give {per_period:.2} per period of the faster harmonic; \
             need at least {MIN_SAMPLES_PER_PERIOD}"
        )));
    }
    let h = span / n_samples as f64;
    let basis = DMatrix::from_fn(n_samples, 5, |i, j| {
        let t = i as f64 * h;
        match j {
            0 => 1.0,
            1 => (hp.omega1 * t).cos(),
            2 => (hp.omega1 * t).sin(),
            3 => (hp.omega2 * t).cos(),
            _ => (hp.omega2 * t).sin(),
        }
    });
    let rhs = DVector::from_fn(n_samples, |i, _| hp.evaluate(i as f64 * h).powi(3));
    let coef = least_squares(&basis, &rhs)
        .ok_or_else(|| Error::Degenerate("cubic projection basis is singular".into()))?;
    Ok(CubicHarmonics {
        c0: coef[0],
        a0_cubed: hp.a0.powi(3),
        cos1: coef[1],
        sin1: coef[2],
        cos2: coef[3],
        sin2: coef[4],
    })
}

/// Minimum-residual solution via SVD; `None` when the matrix is rank deficient.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 || svd.singular_values.min() <= smax * 1e-12 {
        return None;
    }
    svd.solve(b, 0.0).ok()
}
