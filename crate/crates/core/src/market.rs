//! Empirical market relations fitted by ordinary least squares: the cubic
//! price–stock law `ṗ = α1 x + α2 x³` and the linear mean reversion of
//! stock changes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats::line_fit;
use crate::{Error, Result, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rss: f64,
}

/// OLS of `y` on the columns of `x` via QR, with classical standard errors.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::TooShort {
            needed: p + 1,
            got: n,
        });
    }
    let xtx = x.transpose() * x;
    let scale = xtx.diagonal().max();
    let svd = xtx.clone().svd(false, false);
    if scale <= 0.0 || svd.singular_values.min() <= scale * 1e-13 {
        return Err(Error::RankDeficient(
            "regressors are collinear or constant".into(),
        ));
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let coef = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("singular R factor".into()))?;
    let fitted = x * &coef;
    let residuals = y - &fitted;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("singular normal matrix".into()))?;
    let se = (0..p).map(|i| (sigma2 * inv[(i, i)]).max(0.0).sqrt()).collect();
    Ok(OlsFit {
        coef: coef.iter().copied().collect(),
        se,
        residuals: residuals.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        rss,
    })
}

/// Regression line of predicted against observed price change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedVsObserved {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicPriceModel {
    pub alpha1: f64,
    pub alpha2: f64,
    pub se1: f64,
    pub se2: f64,
    /// Present only when the fit included an intercept.
    pub intercept: Option<f64>,
    pub r2: f64,
    /// `alpha1 * alpha2 < 0`.
    pub sign_ok: bool,
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    pub predicted_vs_observed: Option<PredictedVsObserved>,
}

impl CubicPriceModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept.unwrap_or(0.0) + self.alpha1 * x + self.alpha2 * x.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicFitOptions {
    pub intercept: bool,
    /// Multiply price changes by 4 to express quarterly differences per year.
    pub annualize: bool,
}

impl Default for CubicFitOptions {
    fn default() -> Self {
        Self {
            intercept: false,
            annualize: false,
        }
    }
}

pub const MIN_MARKET_LEN: usize = 10;

pub fn fit_cubic_price_stock(
    price_changes: &TimeSeries,
    stock_changes: &TimeSeries,
) -> Result<CubicPriceModel> {
    fit_cubic_price_stock_with(price_changes, stock_changes, CubicFitOptions::default())
}

/// OLS of `ṗ` on `{x, x³}`; without intercept unless requested. `r2` is the
/// uncentered R² for the no-intercept model and the centered one otherwise.
pub fn fit_cubic_price_stock_with(
    price_changes: &TimeSeries,
    stock_changes: &TimeSeries,
    opts: CubicFitOptions,
) -> Result<CubicPriceModel> {
    let n = price_changes.len();
    if n != stock_changes.len() {
        return Err(Error::InvalidArgument(format!(
            "price and stock series differ in length ({n} vs {})",
            stock_changes.len()
        )));
    }
    if n < MIN_MARKET_LEN {
        return Err(Error::TooShort {
            needed: MIN_MARKET_LEN,
            got: n,
        });
    }
    if stock_changes.is_constant() {
        return Err(Error::RankDeficient("stock changes are constant".into()));
    }
    let factor = if opts.annualize { 4.0 } else { 1.0 };
    let y: Vec<f64> = price_changes.values().iter().map(|p| p * factor).collect();
    let xs = stock_changes.values();
    let p = if opts.intercept { 3 } else { 2 };
    let design = DMatrix::from_fn(n, p, |i, j| {
        let x = xs[i];
        match (opts.intercept, j) {
            (true, 0) => 1.0,
            (true, 1) | (false, 0) => x,
            _ => x.powi(3),
        }
    });
    let fit = ols(&design, &DVector::from_vec(y.clone()))?;
    let off = usize::from(opts.intercept);
    let (alpha1, alpha2) = (fit.coef[off], fit.coef[off + 1]);
    let tss = if opts.intercept {
        let m = crate::stats::mean(&y);
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.iter().map(|v| v * v).sum::<f64>()
    };
    let r2 = if tss > 0.0 { 1.0 - fit.rss / tss } else { 1.0 };
    let pvo = line_fit(&y, &fit.fitted).map(|f| PredictedVsObserved {
        slope: f.slope,
        intercept: f.intercept,
        se_slope: f.se_slope,
        r2: f.r2,
    });
    Ok(CubicPriceModel {
        alpha1,
        alpha2,
        se1: fit.se[off],
        se2: fit.se[off + 1],
        intercept: opts.intercept.then(|| fit.coef[0]),
        r2,
        sign_ok: alpha1 * alpha2 < 0.0,
        predicted: fit.fitted,
        observed: y,
        predicted_vs_observed: pvo,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanReversionFit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub r2: f64,
}

/// OLS of `x[t+1] - x[t]` on `x[t]` with intercept.
pub fn fit_mean_reversion(stock_changes: &TimeSeries) -> Result<MeanReversionFit> {
    let v = stock_changes.values();
    if v.len() < MIN_MARKET_LEN {
        return Err(Error::TooShort {
            needed: MIN_MARKET_LEN,
            got: v.len(),
        });
    }
    let x = &v[..v.len() - 1];
    if x.iter().all(|&a| a == x[0]) {
        return Err(Error::ConstantSeries);
    }
    let dx: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let f = line_fit(x, &dx).ok_or(Error::ConstantSeries)?;
    Ok(MeanReversionFit {
        slope: f.slope,
        intercept: f.intercept,
        se_slope: f.se_slope,
        r2: f.r2,
    })
}

/// `V(x) = βx²/2 + αx⁴/4`.
pub fn quartic_potential(beta: f64, alpha: f64, x: f64) -> f64 {
    beta * x * x / 2.0 + alpha * x.powi(4) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialShape {
    /// β < 0 < α.
    DoubleWell,
    /// α < 0: the restoring force weakens at large |x|.
    SoftSpring,
    /// β ≥ 0, α ≥ 0.
    SingleWell,
}

pub fn potential_shape(beta: f64, alpha: f64) -> PotentialShape {
    if alpha < 0.0 {
        PotentialShape::SoftSpring
    } else if beta < 0.0 && alpha > 0.0 {
        PotentialShape::DoubleWell
    } else {
        PotentialShape::SingleWell
    }
}
