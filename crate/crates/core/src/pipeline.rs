//! Sliding-window analysis: each window is identified as a forced Duffing
//! oscillator and the model's largest Lyapunov exponent is compared with the
//! one estimated directly from the data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{surrogate_test, SurrogateTestConfig};
use crate::duffing::{
    classify, harmonic_balance_fit_with, lyapunov_spectrum, BalanceOptions, DuffingParams,
    LyapunovSpectrum, Regime, SpectrumConfig, DEFAULT_CLASSIFY_TOL,
};
use crate::lyapunov::{rosenstein, select_delay, RosensteinConfig};
use crate::market::{fit_cubic_price_stock_with, CubicFitOptions, CubicPriceModel};
use crate::series::{difference, sliding_windows};
use crate::spectral::{
    cubic_harmonics, decompose, dominant_frequencies, durbin_test, harmonic_pair_fit, periodogram,
    HarmonicPair,
};
use crate::stats::{line_fit, pearson};
use crate::{Error, Result, TimeSeries, WindowSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub t_total: f64,
    /// Time between reorthonormalizations.
    pub renorm_time: f64,
    pub transient: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            t_total: 5000.0,
            renorm_time: 1.0,
            transient: 0.1,
            x0: 0.1,
            y0: 0.0,
        }
    }
}

/// Where `t = 0` of the forcing term `γ cos ωt` sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOrigin {
    /// At the first sample of each window.
    #[default]
    Window,
    /// At the first sample of the whole series.
    Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub window: WindowSpec,
    pub m: usize,
    pub rho: f64,
    /// Surrogates for the per-window correlation-dimension test; 0 skips it.
    pub n_surrogates: usize,
    pub seed: u64,
    /// Longest divergence offset for the Rosenstein estimate.
    pub max_offset: usize,
    pub classify_tol: f64,
    pub balance: BalanceOptions,
    pub time_origin: TimeOrigin,
    pub model: ModelConfig,
    pub annualize: bool,
    /// Applied to the whole series before windowing, in this order.
    pub difference: bool,
    pub demean: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::new(131, 1),
            m: 3,
            rho: 0.1,
            n_surrogates: 100,
            seed: 42,
            max_offset: 20,
            classify_tol: DEFAULT_CLASSIFY_TOL,
            balance: BalanceOptions::default(),
            time_origin: TimeOrigin::default(),
            model: ModelConfig::default(),
            annualize: false,
            difference: false,
            demean: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window.length == 0 || self.window.step == 0 {
            return Err(Error::InvalidArgument("window length and step must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be at least 1".into()));
        }
        if self.max_offset < 2 {
            return Err(Error::InvalidArgument("max_offset must be at least 2".into()));
        }
        crate::spectral::durbin_critical_value(self.window.length, self.rho)?;
        if self.n_surrogates == 1 {
            return Err(Error::InvalidArgument("need 0 or at least 2 surrogates".into()));
        }
        let mc = &self.model;
        if !(mc.t_total > 0.0 && mc.renorm_time > 0.0 && (0.0..1.0).contains(&mc.transient)) {
            return Err(Error::InvalidArgument("invalid model integration settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurbinSummary {
    pub reject_white_noise: bool,
    pub max_deviation: f64,
    pub c0: f64,
    pub noise_free_bins: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedFit {
    pub delay: usize,
    pub fit_range: (usize, usize),
    pub fit_r2: f64,
    pub fit_max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub cd: f64,
    pub z: f64,
    pub critical_z: f64,
    pub rejected: bool,
    pub n_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub durbin: Option<DurbinSummary>,
    pub balance_residual: Option<f64>,
    pub spectrum: Option<LyapunovSpectrum>,
    pub observed_fit: Option<ObservedFit>,
    pub surrogate: Option<SurrogateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: usize,
    pub window_start: usize,
    /// One past the last sample.
    pub window_end: usize,
    pub frequencies: Option<HarmonicPair>,
    pub params: Option<DuffingParams>,
    pub lambda_observed: Option<f64>,
    pub lambda_model: Option<f64>,
    pub lambda_model_scaled: Option<f64>,
    pub observed_class: Option<Regime>,
    pub model_class: Option<Regime>,
    pub diagnostics: Diagnostics,
    /// `"stage: message"` for each failed stage.
    pub errors: Vec<String>,
}

impl WindowReport {
    pub fn failed(&self) -> bool {
        self.lambda_observed.is_none() || self.lambda_model.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub n_windows: usize,
    pub n_failed: usize,
    /// Windows with both exponents.
    pub n_compared: usize,
    pub sign_agreement: Option<f64>,
    pub class_agreement: Option<f64>,
    /// Fraction of all windows classified chaotic by both paths.
    pub both_chaotic: f64,
    pub correlation: Option<f64>,
    /// Slope of scaled model on observed.
    pub slope: Option<f64>,
    /// Scaled model minus observed, per compared window.
    pub deltas: Vec<f64>,
    pub price_stock: Option<CubicPriceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub schema_version: u32,
    pub config: RunConfig,
    pub windows: Vec<WindowReport>,
    pub scale_factor: Option<f64>,
    pub summary: AgreementSummary,
}

impl RunOutput {
    pub fn failed_fraction(&self) -> f64 {
        if self.windows.is_empty() {
            0.0
        } else {
            self.summary.n_failed as f64 / self.windows.len() as f64
        }
    }
}

/// Per-window seed for the surrogate generator.
pub fn window_seed(base: u64, index: usize) -> u64 {
    // SplitMix64 finalizer.
    let mut z = base ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn preprocess(series: &TimeSeries, cfg: &RunConfig) -> Result<TimeSeries> {
    let mut s = series.clone();
    if cfg.difference {
        s = difference(&s, 1)?;
    }
    if cfg.demean {
        s = s.demeaned();
    }
    Ok(s)
}

/// Runs every window, fits the global scale factor and summarizes agreement.
/// `prices`, when given, are price changes aligned with the preprocessed
/// stock series and feed the cubic price–stock fit.
pub fn run_pipeline(
    series: &TimeSeries,
    prices: Option<&TimeSeries>,
    cfg: &RunConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    let s = preprocess(series, cfg)?;
    let windows = sliding_windows(&s, cfg.window)?;
    let mut reports: Vec<WindowReport> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| analyze_window(i, w, s.start_index(), cfg))
        .collect();

    let (obs, model): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter_map(|r| Some((r.lambda_observed?, r.lambda_model?)))
        .unzip();
    let scale_factor = if obs.is_empty() {
        None
    } else {
        fit_scale_factor(&obs, &model).ok()
    };
    if let Some(c) = scale_factor {
        for r in &mut reports {
            r.lambda_model_scaled = r.lambda_model.map(|l| l / c);
        }
    }
    let mut summary = agreement_summary(&reports);
    if let Some(p) = prices {
        let stocks = align_stock_changes(series, cfg)?;
        let opts = CubicFitOptions {
            intercept: false,
            annualize: cfg.annualize,
        };
        summary.price_stock = Some(fit_cubic_price_stock_with(p, &stocks, opts)?);
    }
    Ok(RunOutput {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        windows: reports,
        scale_factor,
        summary,
    })
}

fn align_stock_changes(series: &TimeSeries, cfg: &RunConfig) -> Result<TimeSeries> {
    if cfg.difference {
        difference(series, 1)
    } else {
        Ok(series.clone())
    }
}

fn analyze_window(index: usize, w: &TimeSeries, origin: usize, cfg: &RunConfig) -> WindowReport {
    let mut r = WindowReport {
        index,
        window_start: w.start_index(),
        window_end: w.end_index(),
        frequencies: None,
        params: None,
        lambda_observed: None,
        lambda_model: None,
        lambda_model_scaled: None,
        observed_class: None,
        model_class: None,
        diagnostics: Diagnostics::default(),
        errors: Vec::new(),
    };
    if let Err(e) = model_path(w, origin, cfg, &mut r) {
        r.errors.push(format!("model: {e}"));
    }
    match observed_path(w, cfg, &mut r) {
        Ok(delay) => {
            if cfg.n_surrogates > 0 {
                let sc = SurrogateTestConfig {
                    count: cfg.n_surrogates,
                    rho: cfg.rho,
                    ..SurrogateTestConfig::new(cfg.m, delay, window_seed(cfg.seed, index))
                };
                match surrogate_test(w, &sc) {
                    Ok(t) => {
                        r.diagnostics.surrogate = Some(SurrogateSummary {
                            cd: t.q0,
                            z: t.z,
                            critical_z: t.critical_z,
                            rejected: t.rejected,
                            n_excluded: t.n_excluded,
                        })
                    }
                    Err(e) => r.errors.push(format!("surrogates: {e}")),
                }
            }
        }
        Err(e) => r.errors.push(format!("observed: {e}")),
    }
    r
}

fn model_path(w: &TimeSeries, origin: usize, cfg: &RunConfig, r: &mut WindowReport) -> Result<()> {
    let sd = decompose(w)?;
    let pg = periodogram(w)?;
    let dr = durbin_test(&pg, cfg.rho)?;
    r.diagnostics.durbin = Some(DurbinSummary {
        reject_white_noise: dr.reject_white_noise,
        max_deviation: dr.max_deviation,
        c0: dr.c0,
        noise_free_bins: dr.noise_free_bins.clone(),
    });
    let dom = dominant_frequencies(&pg, &dr, 2)?;
    let mut hp = harmonic_pair_fit(&sd, [dom[0].omega, dom[1].omega])?;
    if cfg.time_origin == TimeOrigin::Series {
        hp = shift_origin(&hp, (r.window_start - origin) as f64);
    }
    r.frequencies = Some(hp);
    let ch = cubic_harmonics(&hp, 8 * w.len())?;
    let fit = harmonic_balance_fit_with(&hp, &ch, cfg.balance)?;
    r.params = Some(fit.params);
    r.diagnostics.balance_residual = Some(fit.residual_norm);
    let spec = model_spectrum(&fit.params, &cfg.model)?;
    r.lambda_model = Some(spec.leading());
    r.model_class = Some(classify(&spec, cfg.classify_tol));
    r.diagnostics.spectrum = Some(spec);
    Ok(())
}

/// Re-expresses the harmonics with the time origin `shift` samples earlier.
pub fn shift_origin(hp: &HarmonicPair, shift: f64) -> HarmonicPair {
    let rot = |a: f64, b: f64, w: f64| {
        let (s, c) = (w * shift).sin_cos();
        (a * c - b * s, a * s + b * c)
    };
    let (a1, b1) = rot(hp.a1, hp.b1, hp.omega1);
    let (a2, b2) = rot(hp.a2, hp.b2, hp.omega2);
    HarmonicPair { a1, b1, a2, b2, ..*hp }
}

pub fn model_spectrum(p: &DuffingParams, mc: &ModelConfig) -> Result<LyapunovSpectrum> {
    let base = SpectrumConfig::new(p, mc.t_total);
    let cfg = SpectrumConfig {
        renorm_every: ((mc.renorm_time / base.dt).round() as usize).max(1),
        transient: mc.transient,
        x0: mc.x0,
        y0: mc.y0,
        ..base
    };
    lyapunov_spectrum(p, &cfg)
}

fn observed_path(w: &TimeSeries, cfg: &RunConfig, r: &mut WindowReport) -> Result<usize> {
    let delay = select_delay(w)?;
    let rc = RosensteinConfig::new(cfg.m, delay, cfg.max_offset);
    let (_, est) = rosenstein(w, &rc)?;
    r.lambda_observed = Some(est.lambda);
    r.observed_class = Some(Regime::of_exponent(est.lambda, cfg.classify_tol));
    r.diagnostics.observed_fit = Some(ObservedFit {
        delay,
        fit_range: est.fit_range,
        fit_r2: est.fit_r2,
        fit_max_residual: est.fit_max_residual,
    });
    Ok(delay)
}

/// `c = Σ model² / Σ model·observed`, the least-squares constant for
/// `model / c ≈ observed`.
pub fn fit_scale_factor(observed: &[f64], model: &[f64]) -> Result<f64> {
    if observed.len() != model.len() || observed.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need equal nonzero lengths, got {} and {}",
            observed.len(),
            model.len()
        )));
    }
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let mo: f64 = model.iter().zip(observed).map(|(m, o)| m * o).sum();
    if mm == 0.0 {
        return Err(Error::Degenerate("model exponents are all zero".into()));
    }
    if mo.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "model and observed exponents are orthogonal (Σ m·o = {mo:e})"
        )));
    }
    Ok(mm / mo)
}

/// Compares observed exponents with the scaled model ones, falling back to
/// the unscaled model when no scale factor was fitted.
pub fn agreement_summary(reports: &[WindowReport]) -> AgreementSummary {
    let pairs: Vec<(&WindowReport, f64, f64)> = reports
        .iter()
        .filter_map(|r| {
            let o = r.lambda_observed?;
            let m = r.lambda_model_scaled.or(r.lambda_model)?;
            Some((r, o, m))
        })
        .collect();
    let n = pairs.len();
    let frac = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let signs = pairs.iter().filter(|(_, o, m)| o.signum() == m.signum()).count();
    let classes = pairs
        .iter()
        .filter(|(r, _, _)| r.observed_class.is_some() && r.observed_class == r.model_class)
        .count();
    let both = reports
        .iter()
        .filter(|r| r.observed_class == Some(Regime::Chaotic) && r.model_class == Some(Regime::Chaotic))
        .count();
    let obs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let model: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    AgreementSummary {
        n_windows: reports.len(),
        n_failed: reports.iter().filter(|r| r.failed()).count(),
        n_compared: n,
        sign_agreement: frac(signs),
        class_agreement: frac(classes),
        both_chaotic: if reports.is_empty() {
            0.0
        } else {
            both as f64 / reports.len() as f64
        },
        correlation: pearson(&obs, &model),
        slope: line_fit(&obs, &model).map(|f| f.slope),
        deltas: pairs.iter().map(|(_, o, m)| m - o).collect(),
        price_stock: None,
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const COMPARISON_FILE: &str = "lambda_comparison.csv";
pub const AGREEMENT_FILE: &str = "agreement.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the JSON report and the two plot CSVs into `dir`.
pub fn emit_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report = dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(out)
        .map_err(|e| Error::InvalidArgument(format!("serializing report: {e}")))?;
    fs::write(&report, json + "\n").map_err(io_err(&report))?;

    let comparison = dir.join(COMPARISON_FILE);
    let mut f = fs::File::create(&comparison).map_err(io_err(&comparison))?;
    let mut text = String::from("window_index,lambda_observed,lambda_model,lambda_model_scaled\n");
    for r in &out.windows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.index,
            opt(r.lambda_observed),
            opt(r.lambda_model),
            opt(r.lambda_model_scaled)
        ));
    }
    f.write_all(text.as_bytes()).map_err(io_err(&comparison))?;

    let agreement = dir.join(AGREEMENT_FILE);
    let mut text = String::from("lambda_observed,lambda_model_scaled\n");
    for r in &out.windows {
        if let (Some(o), Some(m)) = (r.lambda_observed, r.lambda_model_scaled) {
            text.push_str(&format!("{o},{m}\n"));
        }
    }
    fs::write(&agreement, text).map_err(io_err(&agreement))?;
    Ok(vec![report, comparison, agreement])
}
