//! Data-driven Thiele model of a vortex spin-torque oscillator.
//!
//! The reduced core position `s` obeys the Bernoulli equation
//! `ds/dt = alpha * s + beta * s^(n+1)` whose parameters are polynomials of the
//! injected current density `j`. Holding `j` constant over one sampling interval
//! gives a closed-form propagator, so a time-multiplexed reservoir is a chain of
//! exact one-step updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to every propagated state.
pub const S_FLOOR: f64 = 1e-12;
/// Upper clamp applied to every propagated state.
pub const S_CEIL: f64 = 1.0 - 1e-12;

/// Polynomial fits of the model parameters in the drive current density.
///
/// Coefficients are stored lowest order first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub n: [f64; 5],
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            alpha: [-39.97, 6.64],
            beta: [-25.92, -0.43],
            n: [157.14, -95.97, 25.54, -2.87, 0.18],
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl Coefficients {
    pub fn alpha(&self, j: f64) -> f64 {
        horner(&self.alpha, j)
    }

    pub fn beta(&self, j: f64) -> f64 {
        horner(&self.beta, j)
    }

    pub fn n_exponent(&self, j: f64) -> f64 {
        horner(&self.n, j)
    }

    pub fn params(&self, j: f64) -> StepParams {
        StepParams {
            alpha: self.alpha(j),
            beta: self.beta(j),
            n: self.n_exponent(j),
        }
    }

    /// Asymptotic core position under a constant drive `j`.
    pub fn steady_state(&self, j: f64) -> Result<CoreState> {
        let p = self.params(j);
        if !(p.alpha > 0.0) {
            return Err(Error::Subcritical { j, alpha: p.alpha });
        }
        if !(p.n > 0.0) {
            return Err(Error::NonPositiveExponent { j, n: p.n });
        }
        if !(p.beta < 0.0) {
            return Err(Error::NumericalFailure(format!(
                "beta = {} >= 0 at j = {j}: no saturating steady state",
                p.beta
            )));
        }
        let s = ((p.alpha / -p.beta).ln() / p.n).exp();
        Ok(CoreState::clamped(s))
    }

    /// Advances `s_prev` by `d_t` under constant drive `j`.
    pub fn step(&self, s_prev: CoreState, j: f64, d_t: f64) -> Result<CoreState> {
        let p = self.params(j);
        if !(p.n > 0.0) {
            return Err(Error::NonPositiveExponent { j, n: p.n });
        }
        p.propagate(s_prev.value(), d_t)
            .map(CoreState::clamped)
            .ok_or(Error::Domain {
                index: 0,
                j,
                s: s_prev.value(),
            })
    }
}

/// Model parameters at one input sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: f64,
}

impl StepParams {
    /// Exact flow of the Bernoulli equation over `d_t`, unclamped.
    ///
    /// The bracket `(1 + (beta/alpha) s^n) e^{-x} - (beta/alpha) s^n` with
    /// `x = n alpha d_t` is rewritten as `e^{-x} - beta s^n n d_t exprel(-x)`,
    /// which stays finite as `alpha -> 0`, and evaluated in log space so that
    /// `s^n` may underflow and `e^{-x}` may overflow. Returns `None` when the
    /// bracket is not a positive number.
    #[inline]
    pub fn propagate(&self, s: f64, d_t: f64) -> Option<f64> {
        let StepParams { alpha, beta, n } = *self;
        if !(n > 0.0) || !(s > 0.0) {
            return None;
        }
        let ln_s = s.ln();
        let z = -n * alpha * d_t;
        let c = -beta * n * d_t;
        let ln_bracket = if c == 0.0 {
            z
        } else {
            let ln_term = c.abs().ln() + n * ln_s + ln_exprel(z);
            if c > 0.0 {
                log_add_exp(z, ln_term)
            } else if ln_term < z {
                z + (-(ln_term - z).exp()).ln_1p()
            } else {
                return None;
            }
        };
        if !ln_bracket.is_finite() {
            return None;
        }
        if ln_bracket == 0.0 {
            return Some(s);
        }
        Some((ln_s - ln_bracket / n).exp())
    }
}

/// `ln((e^z - 1) / z)`, continuous at zero and free of overflow for large `z`.
#[inline]
fn ln_exprel(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        0.5 * z
    } else if z > 30.0 {
        z + (-(-z).exp()).ln_1p() - z.ln()
    } else {
        (z.exp_m1() / z).ln()
    }
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn alpha(j: f64) -> f64 {
    Coefficients::default().alpha(j)
}

pub fn beta(j: f64) -> f64 {
    Coefficients::default().beta(j)
}

pub fn n_exponent(j: f64) -> f64 {
    Coefficients::default().n_exponent(j)
}

pub fn step(s_prev: CoreState, j: f64, d_t: f64) -> Result<CoreState> {
    Coefficients::default().step(s_prev, j, d_t)
}

pub fn steady_state(j: f64) -> Result<CoreState> {
    Coefficients::default().steady_state(j)
}

/// Reduced vortex-core position, kept inside `[S_FLOOR, S_CEIL]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoreState(f64);

impl CoreState {
    /// Wraps a value, rejecting anything outside the open unit interval.
    pub fn new(s: f64) -> Option<Self> {
        (s > 0.0 && s < 1.0).then(|| Self::clamped(s))
    }

    pub fn clamped(s: f64) -> Self {
        if s.is_nan() {
            return Self(S_FLOOR);
        }
        Self(s.clamp(S_FLOOR, S_CEIL))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for CoreState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Oscillator operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StvoConfig {
    pub j_dc: f64,
    pub d_t: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub coefficients: Coefficients,
    #[serde(default = "default_reset")]
    pub reset_per_sample_block: bool,
}

fn default_reset() -> bool {
    true
}

impl Default for StvoConfig {
    fn default() -> Self {
        Self::with_default_interval(7.0, 0.5)
    }
}

impl StvoConfig {
    /// Operating point whose sampling interval equals the linear relaxation
    /// time `1 / (n alpha)` at the bias current.
    pub fn with_default_interval(j_dc: f64, amplitude: f64) -> Self {
        let coefficients = Coefficients::default();
        Self {
            j_dc,
            d_t: default_interval(&coefficients, j_dc),
            amplitude,
            coefficients,
            reset_per_sample_block: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_t > 0.0) || !self.d_t.is_finite() {
            return Err(Error::InvalidConfig(format!("d_t must be > 0, got {}", self.d_t)));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        self.coefficients.steady_state(self.j_dc).map(|_| ())
    }

    /// Initial state `s_inf(j_dc)`.
    pub fn initial_state(&self) -> Result<CoreState> {
        self.coefficients.steady_state(self.j_dc)
    }

    /// Iterates the propagator over `signal`, writing the state after each
    /// sample into `out`. Returns the final state.
    pub fn drive(&self, start: CoreState, signal: &[f64], out: &mut [f64]) -> Result<CoreState> {
        debug_assert_eq!(signal.len(), out.len());
        let mut s = start.value();
        for (index, (&j, o)) in signal.iter().zip(out.iter_mut()).enumerate() {
            let p = self.coefficients.params(j);
            s = match p.propagate(s, self.d_t) {
                Some(next) => next.clamp(S_FLOOR, S_CEIL),
                None => return Err(Error::Domain { index, j, s }),
            };
            *o = s;
        }
        Ok(CoreState(s))
    }
}

/// `1 / (n(j) alpha(j))`; falls back to 1 for subcritical biases.
pub fn default_interval(coefficients: &Coefficients, j_dc: f64) -> f64 {
    let rate = coefficients.n_exponent(j_dc) * coefficients.alpha(j_dc);
    if rate > 0.0 {
        1.0 / rate
    } else {
        1.0
    }
}

/// Node nonlinearity used in the reservoir layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Stvo,
    Relu,
    Sigmoid,
    Identity,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Stvo,
        ActivationKind::Relu,
        ActivationKind::Sigmoid,
        ActivationKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Stvo => "stvo",
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Identity => "identity",
        }
    }

    /// Pointwise map for the conventional activations. Not defined for STVO,
    /// which carries state between samples.
    #[inline]
    pub fn pointwise(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Identity => x,
            ActivationKind::Stvo => unreachable!("stvo is not a pointwise activation"),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stvo" => Ok(ActivationKind::Stvo),
            "relu" => Ok(ActivationKind::Relu),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "identity" | "linear" => Ok(ActivationKind::Identity),
            other => Err(Error::InvalidConfig(format!("unknown activation '{other}'"))),
        }
    }
}

/// Runs one sample block through the reservoir layer.
///
/// For [`ActivationKind::Stvo`] the signal is a current-density sequence and the
/// propagator is chained from `s_inf(j_dc)`. For the other kinds the signal holds
/// masked input values and the activation is applied elementwise.
pub fn run_reservoir(signal: &[f64], config: &StvoConfig, activation: ActivationKind) -> Result<Vec<f64>> {
    let mut out = vec![0.0; signal.len()];
    match activation {
        ActivationKind::Stvo => {
            config.drive(config.initial_state()?, signal, &mut out)?;
        }
        kind => {
            for (o, &x) in out.iter_mut().zip(signal) {
                *o = kind.pointwise(x);
            }
        }
    }
    Ok(out)
}
