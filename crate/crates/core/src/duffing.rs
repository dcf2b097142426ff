//! The forced Duffing oscillator `ẍ + δẋ + βx + αx³ = γ cos ωt`.
//!
//! Parameters are identified from a two-frequency signal by harmonic
//! balance: substituting the truncated Fourier series and its cube into the
//! equation and equating the coefficients of `1`, `cos ωᵢt` and `sin ωᵢt`
//! gives an overdetermined linear system in `(δ, β, α, γ)`. Simulation and
//! the Lyapunov spectrum use the autonomous form `(x, y, t)` with `ṫ = 1`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::spectral::{least_squares, CubicHarmonics, HarmonicPair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl DuffingParams {
    pub fn new(delta: f64, beta: f64, alpha: f64, gamma: f64, omega: f64) -> Result<Self> {
        let p = Self {
            delta,
            beta,
            alpha,
            gamma,
            omega,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.delta, self.beta, self.alpha, self.gamma, self.omega];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Duffing parameters must be finite".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "forcing frequency must be positive, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    pub fn forcing_period(&self) -> f64 {
        TAU / self.omega
    }

    /// Largest step accepted by [`simulate`] and [`lyapunov_spectrum`].
    pub fn max_step(&self) -> f64 {
        0.01f64.min(self.forcing_period() / 100.0)
    }

    fn accel(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.delta * y - self.beta * x - self.alpha * x * x * x + self.gamma * (self.omega * t).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

// ---------------------------------------------------------------------------
// Harmonic balance

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingFrequency {
    /// The frequency of maximum power.
    #[default]
    Omega1,
    Omega2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantTerm {
    /// The full projected constant of `x³`.
    #[default]
    Projected,
    /// The bare `a0³`.
    A0Cubed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BalanceOptions {
    pub forcing: ForcingFrequency,
    pub constant: ConstantTerm,
}

/// Below this `|a0|` the constant equation is `0 = 0` and is dropped.
pub const A0_ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBalanceFit {
    pub params: DuffingParams,
    pub residual_norm: f64,
    /// Number of equations used, 4 or 5.
    pub equations: usize,
}

pub fn harmonic_balance_fit(hp: &HarmonicPair, ch: &CubicHarmonics) -> Result<HarmonicBalanceFit> {
    harmonic_balance_fit_with(hp, ch, BalanceOptions::default())
}

/// Least-squares solution of the balance equations for `(δ, β, α, γ)`.
///
/// For each harmonic `(ω, a, b)` with cube coefficients `(C, S)`:
///
/// ```text
///  b ω δ + a β + C α − [forced] γ = a ω²
/// −a ω δ + b β + S α             = b ω²
/// ```
///
/// and, unless `|a0|` is negligible, `a0 β + c0 α = 0`.
pub fn harmonic_balance_fit_with(
    hp: &HarmonicPair,
    ch: &CubicHarmonics,
    opts: BalanceOptions,
) -> Result<HarmonicBalanceFit> {
    let forced_first = opts.forcing == ForcingFrequency::Omega1;
    let (w_f, a_f, b_f) = if forced_first {
        (hp.omega1, hp.a1, hp.b1)
    } else {
        (hp.omega2, hp.a2, hp.b2)
    };
    if a_f == 0.0 && b_f == 0.0 {
        return Err(Error::RankDeficient(
            "the forcing harmonic has zero amplitude".into(),
        ));
    }
    if w_f <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "forcing frequency must be positive, got {w_f}"
        )));
    }
    let harmonics = [
        (hp.omega1, hp.a1, hp.b1, ch.cos1, ch.sin1, forced_first),
        (hp.omega2, hp.a2, hp.b2, ch.cos2, ch.sin2, !forced_first),
    ];
    let mut rows: Vec<[f64; 5]> = Vec::with_capacity(5);
    for (w, a, b, c, s, forced) in harmonics {
        let g = if forced { -1.0 } else { 0.0 };
        rows.push([b * w, a, c, g, a * w * w]);
        rows.push([-a * w, b, s, 0.0, b * w * w]);
    }
    if hp.a0.abs() >= A0_ZERO {
        let c0 = match opts.constant {
            ConstantTerm::Projected => ch.c0,
            ConstantTerm::A0Cubed => ch.a0_cubed,
        };
        rows.push([0.0, hp.a0, c0, 0.0, 0.0]);
    }
    let m = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let rhs = DVector::from_fn(rows.len(), |i, _| rows[i][4]);
    let sol = least_squares(&m, &rhs).ok_or_else(|| {
        Error::RankDeficient("harmonic-balance system does not determine (δ, β, α, γ)".into())
    })?;
    let residual_norm = (&m * &sol - &rhs).norm();
    let params = DuffingParams::new(sol[0], sol[1], sol[2], sol[3], w_f)?;
    Ok(HarmonicBalanceFit {
        params,
        residual_norm,
        equations: rows.len(),
    })
}

// ---------------------------------------------------------------------------
// Integration

fn rk4<const N: usize>(f: impl Fn(&[f64; N], f64) -> [f64; N], s: &[f64; N], t: f64, h: f64) -> [f64; N] {
    let add = |a: &[f64; N], k: &[f64; N], c: f64| std::array::from_fn(|i| a[i] + c * k[i]);
    let k1 = f(s, t);
    let k2 = f(&add(s, &k1, h / 2.0), t + h / 2.0);
    let k3 = f(&add(s, &k2, h / 2.0), t + h / 2.0);
    let k4 = f(&add(s, &k3, h), t + h);
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn flow(p: &DuffingParams, s: &[f64; 2], t: f64) -> [f64; 2] {
    [s[1], p.accel(s[0], s[1], t)]
}

/// Flow plus three tangent vectors laid out as `[x, y, (v_x, v_y, v_t) × 3]`.
fn flow_with_tangents(p: &DuffingParams, s: &[f64; 11], t: f64) -> [f64; 11] {
    let (x, y) = (s[0], s[1]);
    let dfdx = -p.beta - 3.0 * p.alpha * x * x;
    let dfdt = -p.gamma * p.omega * (p.omega * t).sin();
    let mut d = [0.0; 11];
    d[0] = y;
    d[1] = p.accel(x, y, t);
    for k in 0..3 {
        let v = &s[2 + 3 * k..5 + 3 * k];
        d[2 + 3 * k] = v[1];
        d[3 + 3 * k] = dfdx * v[0] - p.delta * v[1] + dfdt * v[2];
    }
    d
}

/// Trajectories beyond this magnitude are treated as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Time at which the state blew up; the samples stop before it.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn check_step(p: &DuffingParams, dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > p.max_step() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "step {dt} must lie in (0, {}]",
            p.max_step()
        )));
    }
    Ok(())
}

/// Fixed-step RK4 from `(x0, y0)` at `t = 0`, keeping every `stride`-th step.
pub fn simulate(
    p: &DuffingParams,
    x0: f64,
    y0: f64,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    p.validate()?;
    check_step(p, dt)?;
    if !(t_end > 0.0) || stride == 0 || !x0.is_finite() || !y0.is_finite() {
        return Err(Error::InvalidArgument(
            "need t_end > 0, stride ≥ 1 and a finite initial state".into(),
        ));
    }
    Ok(integrate(p, [x0, y0], t_end, dt, stride))
}

fn integrate(p: &DuffingParams, s0: [f64; 2], t_end: f64, dt: f64, stride: usize) -> Trajectory {
    let steps = (t_end / dt).round() as usize;
    let cap = steps / stride + 1;
    let mut tr = Trajectory {
        t: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        y: Vec::with_capacity(cap),
        diverged_at: None,
    };
    let mut s = s0;
    tr.t.push(0.0);
    tr.x.push(s[0]);
    tr.y.push(s[1]);
    for i in 0..steps {
        let t = i as f64 * dt;
        s = rk4(|s, t| flow(p, s, t), &s, t, dt);
        let t_next = (i + 1) as f64 * dt;
        if !s.iter().all(|v| v.is_finite() && v.abs() < DIVERGENCE_BOUND) {
            tr.diverged_at = Some(t_next);
            break;
        }
        if (i + 1) % stride == 0 {
            tr.t.push(t_next);
            tr.x.push(s[0]);
            tr.y.push(s[1]);
        }
    }
    tr
}

// ---------------------------------------------------------------------------
// Lyapunov spectrum

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub t_total: f64,
    pub dt: f64,
    /// Steps between reorthonormalizations.
    pub renorm_every: usize,
    /// Leading fraction of `t_total` excluded from the averages.
    pub transient: f64,
    pub x0: f64,
    pub y0: f64,
}

impl SpectrumConfig {
    /// Largest admissible step, renormalization every time unit, 10% burn-in.
    pub fn new(p: &DuffingParams, t_total: f64) -> Self {
        let dt = p.max_step();
        Self {
            t_total,
            dt,
            renorm_every: ((1.0 / dt).round() as usize).max(1),
            transient: 0.1,
            x0: 0.1,
            y0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// Descending.
    pub lambdas: [f64; 3],
    pub t_total: f64,
    /// Time between orthonormalizations.
    pub renorm_interval: f64,
    /// Largest `|⟨eᵢ, eⱼ⟩ − δᵢⱼ|` seen after any renormalization.
    pub max_orthonormality_error: f64,
}

impl LyapunovSpectrum {
    pub fn sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Index of the exponent closest to zero, the time direction.
    pub fn neutral_index(&self) -> usize {
        (0..3)
            .min_by(|&i, &j| self.lambdas[i].abs().total_cmp(&self.lambdas[j].abs()))
            .expect("three exponents")
    }

    /// Largest exponent once the neutral time-direction exponent is removed.
    pub fn leading(&self) -> f64 {
        let skip = self.neutral_index();
        (0..3)
            .filter(|&i| i != skip)
            .map(|i| self.lambdas[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Modified Gram–Schmidt in place; returns the norms before normalization.
pub fn gram_schmidt(vs: &mut [[f64; 3]; 3]) -> Result<[f64; 3]> {
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut norms = [0.0; 3];
    for i in 0..3 {
        for j in 0..i {
            let (head, tail) = vs.split_at_mut(i);
            let proj = dot(&tail[0], &head[j]);
            for c in 0..3 {
                tail[0][c] -= proj * head[j][c];
            }
        }
        let n = dot(&vs[i], &vs[i]).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate(format!("tangent vector {i} has norm {n}")));
        }
        vs[i].iter_mut().for_each(|c| *c /= n);
        norms[i] = n;
    }
    Ok(norms)
}

fn orthonormality_error(vs: &[[f64; 3]; 3]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d: f64 = (0..3).map(|c| vs[i][c] * vs[j][c]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d - target).abs());
        }
    }
    worst
}

/// Tangent norms above this between renormalizations are an overflow.
pub const TANGENT_BOUND: f64 = 1e150;

/// Exponents of the extended flow from three tangent vectors evolved under
/// the Jacobian and reorthonormalized every `renorm_every` steps.
pub fn lyapunov_spectrum(p: &DuffingParams, cfg: &SpectrumConfig) -> Result<LyapunovSpectrum> {
    p.validate()?;
    check_step(p, cfg.dt)?;
    if !(cfg.t_total > 0.0) || cfg.renorm_every == 0 || !(0.0..1.0).contains(&cfg.transient) {
        return Err(Error::InvalidArgument(
            "need t_total > 0, renorm_every ≥ 1 and transient in [0, 1)".into(),
        ));
    }
    let steps = (cfg.t_total / cfg.dt).round() as usize;
    let blocks = steps / cfg.renorm_every;
    let burn = (cfg.transient * blocks as f64).floor() as usize;
    if blocks <= burn {
        return Err(Error::InvalidArgument(
            "t_total too short for one renormalization after the transient".into(),
        ));
    }
    let mut s = [0.0; 11];
    s[0] = cfg.x0;
    s[1] = cfg.y0;
    for k in 0..3 {
        s[2 + 3 * k + k] = 1.0;
    }
    let mut sums = [0.0; 3];
    let mut worst: f64 = 0.0;
    let mut step = 0usize;
    for block in 0..blocks {
        for _ in 0..cfg.renorm_every {
            let t = step as f64 * cfg.dt;
            s = rk4(|s, t| flow_with_tangents(p, s, t), &s, t, cfg.dt);
            step += 1;
            if !(s[0].abs() < DIVERGENCE_BOUND && s[1].abs() < DIVERGENCE_BOUND) {
                return Err(Error::Diverged { t: step as f64 * cfg.dt });
            }
        }
        let t = step as f64 * cfg.dt;
        let mut vs: [[f64; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|c| s[2 + 3 * k + c]));
        if vs.iter().flatten().any(|v| !v.is_finite() || v.abs() > TANGENT_BOUND) {
            return Err(Error::TangentOverflow { t });
        }
        let norms = gram_schmidt(&mut vs).map_err(|_| Error::TangentOverflow { t })?;
        worst = worst.max(orthonormality_error(&vs));
        if block >= burn {
            for i in 0..3 {
                sums[i] += norms[i].ln();
            }
        }
        for k in 0..3 {
            s[2 + 3 * k..5 + 3 * k].copy_from_slice(&vs[k]);
        }
    }
    let renorm_interval = cfg.renorm_every as f64 * cfg.dt;
    let span = (blocks - burn) as f64 * renorm_interval;
    let mut lambdas = sums.map(|v| v / span);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        lambdas,
        t_total: cfg.t_total,
        renorm_interval,
        max_orthonormality_error: worst,
    })
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Chaotic,
    NonChaotic,
    Marginal,
}

impl Regime {
    pub fn of_exponent(lambda: f64, tol: f64) -> Self {
        if lambda > tol {
            Regime::Chaotic
        } else if lambda < -tol {
            Regime::NonChaotic
        } else {
            Regime::Marginal
        }
    }
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 0.01;

/// Classifies by [`LyapunovSpectrum::leading`].
pub fn classify(spec: &LyapunovSpectrum, tol: f64) -> Regime {
    Regime::of_exponent(spec.leading(), tol)
}
