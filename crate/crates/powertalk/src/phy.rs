//! Physical-layer signal path.
//!
//! Time is slotted into bit intervals of duration `T`, each carrying one
//! symbol (simple binary) or two (Manchester). Within a symbol interval the
//! bus is sampled at `fs`; the receiver averages the window and compares
//! the mean against a pilot-derived threshold. Converter transients are
//! ignored: the symbol interval is assumed long enough for the bus to
//! settle, so a load step appears as an ideal step in the samples.

use rand::Rng;

use crate::grid::{observe, GridConfig, Symbol};
use crate::load::LoadTrajectory;
use crate::Error;

/// Slot timing: bit interval, symbol interval and sampling rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotConfig {
    /// Bit interval, seconds.
    pub t_bit: f64,
    /// Symbol interval, seconds.
    pub t_symbol: f64,
    /// Sampling rate, hertz.
    pub fs: f64,
}

impl SlotConfig {
    /// One symbol per bit (`T = Ts`).
    pub fn simple(t_symbol: f64, fs: f64) -> Result<Self, Error> {
        let slot = SlotConfig { t_bit: t_symbol, t_symbol, fs };
        slot.validate()?;
        Ok(slot)
    }

    /// Two symbols per bit (`T = 2 Ts`), as used by Manchester coding.
    pub fn manchester(t_symbol: f64, fs: f64) -> Result<Self, Error> {
        let slot = SlotConfig { t_bit: 2.0 * t_symbol, t_symbol, fs };
        slot.validate()?;
        Ok(slot)
    }

    /// Default timing: 10 ms symbols sampled at 10 kHz (100 samples per
    /// symbol interval).
    pub fn default_simple() -> Self {
        SlotConfig::simple(0.01, 10_000.0).unwrap()
    }

    pub fn default_manchester() -> Self {
        SlotConfig::manchester(0.01, 10_000.0).unwrap()
    }

    /// Samples per symbol interval, `N = round(Ts * fs)`.
    pub fn samples_per_symbol(&self) -> usize {
        (self.t_symbol * self.fs).round() as usize
    }

    /// Symbol intervals per bit interval (1 or 2).
    pub fn symbols_per_bit(&self) -> usize {
        (self.t_bit / self.t_symbol).round() as usize
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.t_symbol > 0.0) || !(self.fs > 0.0) {
            return Err(Error::domain("slot timing must be positive"));
        }
        if self.samples_per_symbol() < 1 {
            return Err(Error::domain("at least one sample per symbol interval"));
        }
        let ratio = self.t_bit / self.t_symbol;
        if !((ratio - 1.0).abs() < 1e-9 || (ratio - 2.0).abs() < 1e-9) {
            return Err(Error::domain("bit interval must be one or two symbol intervals"));
        }
        Ok(())
    }
}

/// Detection threshold held by one side of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdState {
    /// Referent bus level acquired from the pilot, volts.
    pub v0: f64,
    pub valid: bool,
}

/// Outcome of the per-symbol hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    High,
    Low,
}

/// Noiseless bus samples for one symbol interval starting at `seg_start`
/// within the bit interval. Midpoint sampling keeps the effective change
/// instant unbiased at sample resolution.
pub fn bus_samples(
    x: &Symbol,
    traj: &LoadTrajectory,
    seg_start: f64,
    g: &GridConfig,
    slot: &SlotConfig,
) -> Vec<f64> {
    let resp = x.response(g);
    let n = slot.samples_per_symbol();
    let dt = 1.0 / slot.fs;
    (0..n)
        .map(|k| {
            let t = seg_start + (k as f64 + 0.5) * dt;
            resp.voltage_at(traj.value_at(t))
        })
        .collect()
}

/// Noisy observation of one symbol interval: steady-state bus voltage per
/// sample plus i.i.d. Gaussian observation noise of deviation `g.sigma`.
pub fn synthesize_symbol_samples<R: Rng + ?Sized>(
    x: &Symbol,
    traj: &LoadTrajectory,
    seg_start: f64,
    g: &GridConfig,
    slot: &SlotConfig,
    rng: &mut R,
) -> Vec<f64> {
    let mut samples = bus_samples(x, traj, seg_start, g, slot);
    if g.sigma > 0.0 {
        for s in &mut samples {
            *s = observe(*s, g.sigma, rng);
        }
    }
    samples
}

/// Arithmetic mean of a symbol window.
pub fn average_window(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Transmit the pilot for one symbol interval and average it into a
/// detection threshold.
pub fn acquire_threshold<R: Rng + ?Sized>(
    pilot: &Symbol,
    g: &GridConfig,
    slot: &SlotConfig,
    traj: &LoadTrajectory,
    rng: &mut R,
) -> ThresholdState {
    let samples = synthesize_symbol_samples(pilot, traj, 0.0, g, slot, rng);
    ThresholdState { v0: average_window(&samples), valid: true }
}

/// Threshold test on a window average. Exact ties resolve to `Low`; under
/// noise they have probability zero, and a fixed rule keeps runs
/// reproducible.
pub fn detect(avg: f64, th: &ThresholdState) -> Result<Level, Error> {
    if !th.valid {
        return Err(Error::domain("detection threshold has not been acquired"));
    }
    if avg > th.v0 {
        Ok(Level::High)
    } else {
        Ok(Level::Low)
    }
}
