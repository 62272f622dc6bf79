//! Steady-state electrical model of the two-converter DC bus.
//!
//! Each voltage-source converter holds the droop law `v = v_ref - r_d * i`.
//! With both converters in parallel on a purely resistive load `r`, nodal
//! analysis gives the bus voltage as
//!
//! ```text
//! v* = alpha / (beta + 1/r),   alpha = v_a/r_da + v_b/r_db,
//!                              beta  = 1/r_da + 1/r_db.
//! ```
//!
//! Everything downstream (signaling regions, detection thresholds, error
//! integrals) is built on this rational response.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::Error;

/// Droop parameters and current rating of one converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitParams {
    /// Nominal reference voltage, volts.
    pub v_ref: f64,
    /// Virtual (droop) resistance, ohms.
    pub r_d: f64,
    /// Current rating, amps.
    pub i_max: f64,
}

impl UnitParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.v_ref > 0.0) {
            return Err(Error::domain("v_ref must be positive"));
        }
        if !(self.r_d > 0.0) {
            return Err(Error::domain("r_d must be positive"));
        }
        if !(self.i_max > 0.0) {
            return Err(Error::domain("i_max must be positive"));
        }
        Ok(())
    }
}

/// The two-converter microgrid seen from the transmitter.
///
/// Unit B is the fixed receiver-side converter; the transmitter's own
/// droop pair is the channel input and lives in [`Symbol`]. Limits apply
/// over the whole admissible load range `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Receiver-side converter (fixed during signaling).
    pub unit_b: UnitParams,
    /// Lowest admissible bus voltage, volts.
    pub v_min: f64,
    /// Highest admissible bus voltage, volts.
    pub v_max: f64,
    /// Transmitter current rating, amps.
    pub i_a_max: f64,
    /// Smallest admissible load, ohms.
    pub r_min: f64,
    /// Largest admissible load, ohms.
    pub r_max: f64,
    /// Observation-noise standard deviation, volts.
    pub sigma: f64,
}

impl Default for GridConfig {
    /// The reference two-unit grid used throughout the test suite:
    /// 390-400 V bus window, 6 A / 4 A ratings, 50-250 ohm load range,
    /// noiseless observations.
    fn default() -> Self {
        let v_b = 400.0;
        let v_min = 390.0;
        let i_b_max = 4.0;
        GridConfig {
            unit_b: UnitParams {
                v_ref: v_b,
                r_d: (v_b - v_min) / i_b_max,
                i_max: i_b_max,
            },
            v_min,
            v_max: 400.0,
            i_a_max: 6.0,
            r_min: 50.0,
            r_max: 250.0,
            sigma: 0.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.unit_b.validate()?;
        if !(self.v_min > 0.0 && self.v_min < self.v_max) {
            return Err(Error::domain("voltage limits must satisfy 0 < v_min < v_max"));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::domain("load range must satisfy 0 < r_min < r_max"));
        }
        if !(self.i_a_max > 0.0) {
            return Err(Error::domain("i_a_max must be positive"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::domain("sigma must be non-negative"));
        }
        Ok(())
    }
}

/// A channel input: the droop pair the transmitter applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symbol {
    /// Reference voltage, volts.
    pub v_a: f64,
    /// Virtual resistance, ohms.
    pub r_da: f64,
}

impl Symbol {
    pub fn new(v_a: f64, r_da: f64) -> Result<Self, Error> {
        let s = Symbol { v_a, r_da };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.v_a > 0.0) {
            return Err(Error::domain("symbol v_a must be positive"));
        }
        if !(self.r_da > 0.0) {
            return Err(Error::domain("symbol r_da must be positive"));
        }
        Ok(())
    }

    /// Precomputed nodal coefficients of this symbol against a grid.
    pub fn response(&self, g: &GridConfig) -> BusResponse {
        let (alpha, beta) = alpha_beta(self, g);
        BusResponse { alpha, beta }
    }
}

/// Nodal coefficients `(alpha, beta)` of a symbol; evaluates the bus
/// voltage cheaply in inner loops. `voltage_at` assumes `r > 0`.
#[derive(Debug, Clone, Copy)]
pub struct BusResponse {
    pub alpha: f64,
    pub beta: f64,
}

impl BusResponse {
    #[inline]
    pub fn voltage_at(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        self.alpha / (self.beta + 1.0 / r)
    }

    /// Supremum of the voltage over all finite loads (`r -> infinity`).
    #[inline]
    pub fn voltage_sup(&self) -> f64 {
        self.alpha / self.beta
    }

    /// Load at which the voltage equals `v`, or `None` when `v` is outside
    /// the open range `(0, alpha/beta)` reachable by finite positive loads.
    #[inline]
    pub fn load_for_voltage(&self, v: f64) -> Option<f64> {
        if v <= 0.0 || v >= self.voltage_sup() {
            return None;
        }
        Some(1.0 / (self.alpha / v - self.beta))
    }
}

/// Full steady-state operating point for one symbol and load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusState {
    /// Bus voltage, volts.
    pub v_star: f64,
    /// Transmitter output current, amps.
    pub i_a: f64,
    /// Receiver-side output current, amps.
    pub i_b: f64,
    /// Load, ohms.
    pub r: f64,
}

/// Droop slope for proportional power sharing: the slope that drops the
/// output from `v_ref` to `v_min` at rated current.
pub fn droop_slope(v_ref: f64, v_min: f64, i_max: f64) -> Result<f64, Error> {
    if !(v_ref > v_min) {
        return Err(Error::domain("droop slope requires v_ref > v_min"));
    }
    if !(i_max > 0.0) {
        return Err(Error::domain("droop slope requires i_max > 0"));
    }
    Ok((v_ref - v_min) / i_max)
}

/// Nodal coefficients of the bus equation for symbol `x` on grid `g`.
pub fn alpha_beta(x: &Symbol, g: &GridConfig) -> (f64, f64) {
    let alpha = x.v_a / x.r_da + g.unit_b.v_ref / g.unit_b.r_d;
    let beta = 1.0 / x.r_da + 1.0 / g.unit_b.r_d;
    (alpha, beta)
}

/// Steady-state bus voltage for symbol `x` and load `r`.
pub fn bus_voltage(x: &Symbol, g: &GridConfig, r: f64) -> Result<f64, Error> {
    if !(r > 0.0) {
        return Err(Error::domain("load resistance must be positive"));
    }
    Ok(x.response(g).voltage_at(r))
}

/// Transmitter output current for symbol `x` and load `r`.
///
/// Negative values indicate the converter would sink current; that is a
/// constraint violation for the signaling-space layer to flag, not an
/// arithmetic error.
pub fn output_current_a(x: &Symbol, g: &GridConfig, r: f64) -> Result<f64, Error> {
    let v_star = bus_voltage(x, g, r)?;
    Ok((x.v_a - v_star) / x.r_da)
}

/// Complete operating point: bus voltage plus both unit currents.
pub fn bus_state(x: &Symbol, g: &GridConfig, r: f64) -> Result<BusState, Error> {
    let v_star = bus_voltage(x, g, r)?;
    let i_a = (x.v_a - v_star) / x.r_da;
    let i_b = (g.unit_b.v_ref - v_star) / g.unit_b.r_d;
    Ok(BusState { v_star, i_a, i_b, r })
}

/// One noisy voltage observation: `v_star` plus zero-mean Gaussian noise of
/// standard deviation `sigma`. A zero `sigma` returns `v_star` exactly and
/// consumes no randomness.
pub fn observe<R: Rng + ?Sized>(v_star: f64, sigma: f64, rng: &mut R) -> f64 {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return v_star;
    }
    let noise = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    v_star + noise.sample(rng)
}
