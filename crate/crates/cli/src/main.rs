use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use nlts::complexity::{
    correlation_dimension, surrogate_test, CorrelationDimensionResult, SurrogateTestConfig,
    SurrogateTestResult,
};
use nlts::duffing::{
    classify, harmonic_balance_fit_with, lyapunov_spectrum, simulate, BalanceOptions, ConstantTerm,
    DuffingParams, ForcingFrequency, LyapunovSpectrum, Regime, SpectrumConfig,
};
use nlts::lyapunov::{rosenstein, select_delay, DivergenceCurve, LyapunovEstimate, RosensteinConfig};
use nlts::market::{
    fit_cubic_price_stock_with, fit_mean_reversion, CubicFitOptions, CubicPriceModel,
    MeanReversionFit,
};
use nlts::pipeline::{emit_outputs, run_pipeline, ModelConfig, RunConfig, TimeOrigin};
use nlts::series::{difference, load_csv, Column};
use nlts::spectral::{
    cubic_harmonics, cumulative_periodogram, decompose, dominant_frequencies, durbin_test,
    harmonic_pair_fit, periodogram, DominantBin, DurbinResult, HarmonicPair,
};
use nlts::{TimeSeries, WindowSpec};

#[derive(Parser)]
#[command(name = "nlts", version, about = "Nonlinear time-series analysis and Duffing identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Periodogram, Durbin white-noise test and dominant frequencies.
    Spectrum(SpectrumArgs),
    /// Correlation dimension with an optional phase-randomized surrogate test.
    Corrdim(CorrdimArgs),
    /// Largest Lyapunov exponent by nearest-neighbor divergence.
    Lyap(LyapArgs),
    /// Cubic price–stock regression and stock mean reversion.
    PriceStock(PriceStockArgs),
    /// Duffing oscillator identification, simulation and Lyapunov spectrum.
    Duffing {
        #[command(subcommand)]
        command: DuffingCommand,
    },
    /// Sliding-window comparison of observed and model exponents.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column name or 0-based index.
    #[arg(long, default_value = "0")]
    column: Column,
    /// Sampling interval.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Difference the series once before analysis.
    #[arg(long)]
    difference: bool,
}

impl InputArgs {
    fn load(&self) -> Result<TimeSeries> {
        let s = load_csv(&self.input, &self.column, self.dt)?;
        Ok(if self.difference { difference(&s, 1)? } else { s })
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 2)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CorrdimArgs {
    #[command(flatten)]
    input: InputArgs,
    /// A dimension `3` or an inclusive range `1..5`.
    #[arg(long, default_value = "1..5")]
    m: DimRange,
    #[arg(long, default_value_t = 1)]
    delay: usize,
    /// Theiler window; defaults to the delay.
    #[arg(long)]
    theiler: Option<usize>,
    #[arg(long, default_value_t = 0)]
    surrogates: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Args)]
struct LyapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// An integer or `auto` for the autocorrelation rule.
    #[arg(long, default_value = "auto")]
    delay: String,
    #[arg(long, default_value_t = 40)]
    max_i: usize,
    /// Fixed inclusive fit range `lo,hi`.
    #[arg(long)]
    fit_range: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PriceStockArgs {
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, default_value = "0")]
    price_column: Column,
    #[arg(long)]
    stocks: PathBuf,
    #[arg(long, default_value = "0")]
    stock_column: Column,
    /// Difference both inputs once (for level data).
    #[arg(long)]
    difference: bool,
    /// Scale quarterly price changes to per-year.
    #[arg(long)]
    annualize: bool,
    #[arg(long)]
    intercept: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DuffingCommand {
    /// Harmonic-balance fit from a `spectrum` report.
    Fit(FitArgs),
    /// Integrate the oscillator and write t, x, y.
    Simulate(SimulateArgs),
    /// Lyapunov spectrum of the extended flow.
    Lyapunov(SpectrumRunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ForcingArg {
    Omega1,
    Omega2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstantArg {
    Projected,
    A0Cubed,
}

#[derive(Clone, Copy, ValueEnum)]
enum OriginArg {
    Window,
    Series,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long, value_enum, default_value = "omega1")]
    forcing: ForcingArg,
    #[arg(long, value_enum, default_value = "projected")]
    constant: ConstantArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 2000.0)]
    t_end: f64,
    /// Defaults to the largest admissible step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 0.1)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumRunArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 20000.0)]
    t_total: f64,
    #[arg(long)]
    dt: Option<f64>,
    /// Steps between reorthonormalizations; defaults to one time unit.
    #[arg(long)]
    renorm_every: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    transient: f64,
    #[arg(long, default_value_t = 0.1)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Price changes for the cubic price–stock fit.
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    price_column: Column,
    #[arg(long, default_value_t = 131)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 100)]
    surrogates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    max_offset: usize,
    #[arg(long)]
    demean: bool,
    #[arg(long)]
    annualize: bool,
    #[arg(long, value_enum, default_value = "window")]
    time_origin: OriginArg,
    #[arg(long, value_enum, default_value = "omega1")]
    forcing: ForcingArg,
    #[arg(long, default_value_t = 5000.0)]
    model_t_total: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy)]
struct DimRange(usize, usize);

impl std::str::FromStr for DimRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let m = parse(s)?;
                (m, m)
            }
        };
        if lo == 0 || hi < lo {
            return Err(format!("invalid dimension range {s:?}"));
        }
        Ok(DimRange(lo, hi))
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct SpectrumReport {
    n: usize,
    durbin: DurbinResult,
    dominant: Vec<DominantBin>,
    /// The two strongest noise-free harmonics, when there are two.
    harmonic_pair: Option<HarmonicPair>,
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let s = a.input.load()?;
    let sd = decompose(&s)?;
    let pg = periodogram(&s)?;
    let dr = durbin_test(&pg, a.rho)?;
    let top = a.top.min(dr.noise_free_bins.len());
    let dominant = dominant_frequencies(&pg, &dr, top)?;
    let harmonic_pair = if dominant.len() >= 2 {
        Some(harmonic_pair_fit(&sd, [dominant[0].omega, dominant[1].omega])?)
    } else {
        None
    };
    if let Some(p) = &a.plot_csv {
        let (s_k, _) = cumulative_periodogram(&pg)?;
        let mut text = String::from("freq,power,cumulative_s,band_low,band_high\n");
        for k in 1..=pg.n_bins() {
            let (lo, hi) = dr.band(k);
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                pg.freq[k - 1],
                pg.power[k - 1],
                s_k[k - 1],
                lo,
                hi
            ));
        }
        write_text(p, &text)?;
    }
    let report = SpectrumReport {
        n: s.len(),
        durbin: dr,
        dominant,
        harmonic_pair,
    };
    write_json(&report, a.out.as_deref())
}

#[derive(Serialize)]
#[serde(untagged)]
enum CorrdimEntry {
    Plain(CorrelationDimensionResult),
    Tested(SurrogateTestResult),
}

fn cmd_corrdim(a: &CorrdimArgs) -> Result<()> {
    let s = a.input.load()?;
    let theiler = a.theiler.unwrap_or(a.delay);
    let mut entries = Vec::new();
    let mut curves = String::from("m,log_r,log_c\n");
    for m in a.m.0..=a.m.1 {
        let entry = if a.surrogates > 0 {
            let cfg = SurrogateTestConfig {
                theiler,
                count: a.surrogates,
                rho: a.rho,
                ..SurrogateTestConfig::new(m, a.delay, a.seed)
            };
            CorrdimEntry::Tested(surrogate_test(&s, &cfg)?)
        } else {
            CorrdimEntry::Plain(correlation_dimension(&s, m, a.delay, theiler)?)
        };
        let cd = match &entry {
            CorrdimEntry::Plain(r) => r,
            CorrdimEntry::Tested(t) => &t.original,
        };
        for (r, lc) in cd.radii.iter().zip(&cd.log_c) {
            if lc.is_finite() {
                curves.push_str(&format!("{m},{},{lc}\n", r.ln()));
            }
        }
        entries.push(entry);
    }
    if let Some(p) = &a.plot_csv {
        write_text(p, &curves)?;
    }
    write_json(&entries, a.out.as_deref())
}

#[derive(Serialize)]
struct LyapReport {
    estimate: LyapunovEstimate,
    curve: DivergenceCurve,
}

fn cmd_lyap(a: &LyapArgs) -> Result<()> {
    let s = a.input.load()?;
    let delay = if a.delay == "auto" {
        select_delay(&s)?
    } else {
        a.delay.parse().context("--delay must be an integer or `auto`")?
    };
    let fit_range = a
        .fit_range
        .as_deref()
        .map(|r| -> Result<(usize, usize)> {
            let (lo, hi) = r.split_once(',').context("--fit-range must be `lo,hi`")?;
            Ok((lo.trim().parse()?, hi.trim().parse()?))
        })
        .transpose()?;
    let cfg = RosensteinConfig {
        fit_range,
        ..RosensteinConfig::new(a.m, delay, a.max_i)
    };
    let (curve, estimate) = rosenstein(&s, &cfg)?;
    if let Some(p) = &a.plot_csv {
        let mut text = String::from("offset,b,n_pairs\n");
        for ((i, b), n) in curve.offsets.iter().zip(&curve.b).zip(&curve.n_pairs) {
            text.push_str(&format!("{i},{b},{n}\n"));
        }
        write_text(p, &text)?;
    }
    write_json(&LyapReport { estimate, curve }, a.out.as_deref())
}

#[derive(Serialize)]
struct PriceStockReport {
    cubic: CubicPriceModel,
    mean_reversion: MeanReversionFit,
}

fn cmd_price_stock(a: &PriceStockArgs) -> Result<()> {
    let mut prices = load_csv(&a.prices, &a.price_column, 1.0)?;
    let mut stocks = load_csv(&a.stocks, &a.stock_column, 1.0)?;
    if a.difference {
        prices = difference(&prices, 1)?;
        stocks = difference(&stocks, 1)?;
    }
    let opts = CubicFitOptions {
        intercept: a.intercept,
        annualize: a.annualize,
    };
    let cubic = fit_cubic_price_stock_with(&prices, &stocks, opts)?;
    let mean_reversion = fit_mean_reversion(&stocks)?;
    if let Some(p) = &a.plot_csv {
        let mut text = String::from("stock_change,observed,predicted\n");
        for ((x, o), m) in stocks.values().iter().zip(&cubic.observed).zip(&cubic.predicted) {
            text.push_str(&format!("{x},{o},{m}\n"));
        }
        write_text(p, &text)?;
    }
    write_json(&PriceStockReport { cubic, mean_reversion }, a.out.as_deref())
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    #[serde(flatten)]
    params: DuffingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residual_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    equations: Option<usize>,
}

fn load_params(path: &Path) -> Result<DuffingParams> {
    let f: ParamsFile = read_json(path)?;
    f.params.validate()?;
    Ok(f.params)
}

fn cmd_duffing_fit(a: &FitArgs) -> Result<()> {
    let report: SpectrumReport = read_json(&a.spectrum)?;
    let Some(hp) = report.harmonic_pair else {
        bail!(
            "{} has fewer than two noise-free frequencies; nothing to fit",
            a.spectrum.display()
        );
    };
    let ch = cubic_harmonics(&hp, 8 * hp.n)?;
    let opts = BalanceOptions {
        forcing: match a.forcing {
            ForcingArg::Omega1 => ForcingFrequency::Omega1,
            ForcingArg::Omega2 => ForcingFrequency::Omega2,
        },
        constant: match a.constant {
            ConstantArg::Projected => ConstantTerm::Projected,
            ConstantArg::A0Cubed => ConstantTerm::A0Cubed,
        },
    };
    let fit = harmonic_balance_fit_with(&hp, &ch, opts)?;
    let out = ParamsFile {
        params: fit.params,
        residual_norm: Some(fit.residual_norm),
        equations: Some(fit.equations),
    };
    write_json(&out, a.out.as_deref())
}

fn cmd_duffing_simulate(a: &SimulateArgs) -> Result<()> {
    let p = load_params(&a.params)?;
    let dt = a.dt.unwrap_or_else(|| p.max_step());
    let tr = simulate(&p, a.x0, a.y0, a.t_end, dt, a.stride)?;
    if let Some(t) = tr.diverged_at {
        eprintln!("warning: trajectory diverged at t = {t}; output truncated");
    }
    let mut text = String::from("t,x,y\n");
    for i in 0..tr.len() {
        text.push_str(&format!("{},{},{}\n", tr.t[i], tr.x[i], tr.y[i]));
    }
    match &a.out {
        Some(path) => write_text(path, &text),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

#[derive(Serialize)]
struct SpectrumRunReport {
    params: DuffingParams,
    spectrum: LyapunovSpectrum,
    leading: f64,
    class: Regime,
}

fn cmd_duffing_lyapunov(a: &SpectrumRunArgs) -> Result<()> {
    let p = load_params(&a.params)?;
    let base = SpectrumConfig::new(&p, a.t_total);
    let dt = a.dt.unwrap_or(base.dt);
    let cfg = SpectrumConfig {
        dt,
        renorm_every: a
            .renorm_every
            .unwrap_or_else(|| ((1.0 / dt).round() as usize).max(1)),
        transient: a.transient,
        x0: a.x0,
        y0: a.y0,
        ..base
    };
    let spectrum = lyapunov_spectrum(&p, &cfg)?;
    let report = SpectrumRunReport {
        params: p,
        leading: spectrum.leading(),
        class: classify(&spectrum, a.tol),
        spectrum,
    };
    write_json(&report, a.out.as_deref())
}

/// Exit code when more than half of the windows failed.
const PARTIAL_FAILURE: u8 = 2;

fn cmd_pipeline(a: &PipelineArgs) -> Result<ExitCode> {
    // Differencing is handled by the pipeline so stocks and prices stay aligned.
    let series = load_csv(&a.input.input, &a.input.column, a.input.dt)?;
    let prices = match &a.prices {
        Some(p) => {
            let raw = load_csv(p, &a.price_column, a.input.dt)?;
            Some(if a.input.difference { difference(&raw, 1)? } else { raw })
        }
        None => None,
    };
    let cfg = RunConfig {
        window: WindowSpec::new(a.window, a.step),
        m: a.m,
        rho: a.rho,
        n_surrogates: a.surrogates,
        seed: a.seed,
        max_offset: a.max_offset,
        balance: BalanceOptions {
            forcing: match a.forcing {
                ForcingArg::Omega1 => ForcingFrequency::Omega1,
                ForcingArg::Omega2 => ForcingFrequency::Omega2,
            },
            ..BalanceOptions::default()
        },
        time_origin: match a.time_origin {
            OriginArg::Window => TimeOrigin::Window,
            OriginArg::Series => TimeOrigin::Series,
        },
        model: ModelConfig {
            t_total: a.model_t_total,
            ..ModelConfig::default()
        },
        annualize: a.annualize,
        difference: a.input.difference,
        demean: a.demean,
        ..RunConfig::default()
    };
    let out = run_pipeline(&series, prices.as_ref(), &cfg)?;
    let files = emit_outputs(&out, &a.out_dir)?;
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    let s = &out.summary;
    eprintln!(
        "{} windows, {} failed, scale factor {}",
        s.n_windows,
        s.n_failed,
        out.scale_factor.map_or("n/a".into(), |c| format!("{c:.4}"))
    );
    if out.failed_fraction() > 0.5 {
        eprintln!("more than half of the windows failed");
        return Ok(ExitCode::from(PARTIAL_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a)?,
        Command::Corrdim(a) => cmd_corrdim(a)?,
        Command::Lyap(a) => cmd_lyap(a)?,
        Command::PriceStock(a) => cmd_price_stock(a)?,
        Command::Duffing { command } => match command {
            DuffingCommand::Fit(a) => cmd_duffing_fit(a)?,
            DuffingCommand::Simulate(a) => cmd_duffing_simulate(a)?,
            DuffingCommand::Lyapunov(a) => cmd_duffing_lyapunov(a)?,
        },
        Command::Pipeline(a) => return cmd_pipeline(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
