//! Power-talk signaling over a DC microgrid bus.
//!
//! Two droop-controlled voltage-source converters share a resistive load.
//! The transmitter signals by perturbing its droop parameters
//! `(v_a, r_da)`, which shifts the steady-state bus voltage; the receiver
//! decodes by averaging bus samples against a pilot-derived threshold.
//! Random load steps are the dominant impairment: depending on the line
//! code they turn the bus into a binary asymmetric channel (simple binary
//! signaling) or a binary asymmetric erasure channel (Manchester coding).
//!
//! The crate is organized along the signal path:
//!
//! * [`grid`] — steady-state electrical model of the two-converter bus.
//! * [`space`] — admissible-symbol geometry and the power-deviation metric.
//! * [`load`] — stochastic load process (value, change instant, trajectory).
//! * [`phy`] — slot timing, sample synthesis, averaging and threshold
//!   detection.
//! * [`protocol`] — bit-level schemes, pilot policies and link statistics.
//! * [`analysis`] — flip/erasure probability integrals, channel matrices
//!   and Arimoto-Blahut capacity.
//! * [`quad`] — Gauss-Legendre quadrature used by the analysis layer.
//! * [`parallel`] — deterministic trial fan-out (rayon behind the
//!   `parallel` feature, sequential otherwise).

use std::fmt;

pub mod analysis;
pub mod grid;
pub mod load;
pub mod parallel;
pub mod phy;
pub mod protocol;
pub mod quad;
pub mod space;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a domain precondition.
    Domain(String),
    /// A symbol constellation failed validation against the grid.
    InvalidConstellation(String),
    /// A channel matrix row does not sum to one.
    NonStochasticRow { row: usize, sum: f64 },
    /// The capacity iteration did not bracket the optimum tightly enough.
    NoConvergence { iterations: usize, gap_bits: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InvalidConstellation(msg) => write!(f, "invalid constellation: {msg}"),
            Error::NonStochasticRow { row, sum } => {
                write!(f, "transition matrix row {row} sums to {sum}, expected 1")
            }
            Error::NoConvergence { iterations, gap_bits } => write!(
                f,
                "capacity iteration stopped after {iterations} iterations with bound gap {gap_bits} bits"
            ),
        }
    }
}

impl std::error::Error for Error {}

pub use analysis::{
    arimoto_blahut, average_capacity, cond_erasure_0to_e, cond_erasure_1to_e, cond_flip_0to1,
    cond_flip_1to0, delta_sweep, erasure_probs, flip_probs, to_matrix, CapacityResult,
    ChannelParams, QuadratureSpec, SweepPoint, ThetaDist, TransitionMatrix,
};
pub use grid::{
    alpha_beta, bus_state, bus_voltage, droop_slope, observe, output_current_a, BusState,
    GridConfig, Symbol, UnitParams,
};
pub use load::{
    sample_trajectory, theta_pdf, ChangeProcess, LoadChange, LoadDistribution, LoadTrajectory,
};
pub use phy::{
    acquire_threshold, average_window, detect, synthesize_symbol_samples, Level, SlotConfig,
    ThresholdState,
};
pub use protocol::{
    decode_bit_manchester, encode, run_link, tx_feedback_check, Constellation, Decision, Family,
    FrameTrace, LinkStats, LoadSequence, Policy, Scheme, TraceEntry,
};
pub use space::{
    boundary_curves, in_current_region, in_region_high, in_region_low, in_space,
    in_voltage_region, power_deviation, BoundaryKind, BoundaryLine, DeviationMethod,
    DeviationSpec, Region, RegionKind,
};
