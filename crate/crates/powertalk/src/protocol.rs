//! Bit-level signaling over the physical layer.
//!
//! Simple binary signaling sends one symbol per bit and turns the bus into
//! a binary asymmetric channel; Manchester coding sends a symbol pair per
//! bit, letting both ends spot an error-inducing load change as two
//! half-bit averages on the same side of the threshold (an erasure).
//! Because the transmitter observes the same bus, it mirrors the
//! receiver's detection and drives the pilot re-insertion policy.

use rand::Rng;

use crate::grid::{GridConfig, Symbol};
use crate::load::{ChangeProcess, LoadChange, LoadDistribution, LoadTrajectory};
use crate::phy::{average_window, bus_samples, detect, Level, SlotConfig, ThresholdState};
use crate::space::{in_region_high, in_region_low, in_space};
use crate::Error;

/// Line-coding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// One symbol per bit: `1 -> x_H`, `0 -> x_L`.
    Simple,
    /// Two symbols per bit: `1 -> [x_H, x_L]`, `0 -> [x_L, x_H]`.
    Manchester,
}

/// Error-recovery policy of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// No recovery: a stale threshold stays stale.
    None,
    /// Simple-binary recovery: a run of identical decisions longer than
    /// `limit` is treated as an error burst and answered with a pilot.
    /// Assumes the transmitted stream itself avoids such runs.
    RunLimit { limit: usize },
    /// Manchester recovery: a detected erasure is followed by a pilot in
    /// the next symbol interval, resetting the receiver threshold.
    PilotReset,
}

/// Which constellation family the symbol pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Both information symbols share the pilot's reference voltage.
    FixedVa,
    /// Both information symbols share the pilot's droop slope.
    FixedRd,
    Custom,
}

/// A validated pilot + high/low symbol triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pilot: Symbol,
    x_h: Symbol,
    x_l: Symbol,
    family: Family,
}

impl Constellation {
    pub fn new(
        pilot: Symbol,
        x_h: Symbol,
        x_l: Symbol,
        family: Family,
        g: &GridConfig,
    ) -> Result<Self, Error> {
        let c = Constellation { pilot, x_h, x_l, family };
        c.validate(g)?;
        Ok(c)
    }

    /// Fixed-slope constellation: both symbols keep the pilot's `r_da`.
    pub fn fixed_rd(pilot: Symbol, v_ah: f64, v_al: f64, g: &GridConfig) -> Result<Self, Error> {
        Constellation::new(
            pilot,
            Symbol::new(v_ah, pilot.r_da)?,
            Symbol::new(v_al, pilot.r_da)?,
            Family::FixedRd,
            g,
        )
    }

    /// Fixed-voltage constellation: both symbols keep the pilot's `v_a`.
    pub fn fixed_va(pilot: Symbol, r_dah: f64, r_dal: f64, g: &GridConfig) -> Result<Self, Error> {
        Constellation::new(
            pilot,
            Symbol::new(pilot.v_a, r_dah)?,
            Symbol::new(pilot.v_a, r_dal)?,
            Family::FixedVa,
            g,
        )
    }

    pub fn validate(&self, g: &GridConfig) -> Result<(), Error> {
        if !in_space(&self.pilot, g) {
            return Err(Error::InvalidConstellation(
                "pilot is outside the signaling space".into(),
            ));
        }
        if !in_space(&self.x_h, g) || !in_region_high(&self.x_h, &self.pilot, g) {
            return Err(Error::InvalidConstellation(
                "x_h must lie in the signaling space strictly above the pilot level".into(),
            ));
        }
        if !in_space(&self.x_l, g) || !in_region_low(&self.x_l, &self.pilot, g) {
            return Err(Error::InvalidConstellation(
                "x_l must lie in the signaling space strictly below the pilot level".into(),
            ));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        match self.family {
            Family::FixedVa => {
                if !(close(self.x_h.v_a, self.pilot.v_a) && close(self.x_l.v_a, self.pilot.v_a)) {
                    return Err(Error::InvalidConstellation(
                        "fixed-v_a family requires matching reference voltages".into(),
                    ));
                }
            }
            Family::FixedRd => {
                if !(close(self.x_h.r_da, self.pilot.r_da) && close(self.x_l.r_da, self.pilot.r_da))
                {
                    return Err(Error::InvalidConstellation(
                        "fixed-r_d family requires matching droop slopes".into(),
                    ));
                }
            }
            Family::Custom => {}
        }
        Ok(())
    }

    pub fn pilot(&self) -> &Symbol {
        &self.pilot
    }

    pub fn high(&self) -> &Symbol {
        &self.x_h
    }

    pub fn low(&self) -> &Symbol {
        &self.x_l
    }

    pub fn family(&self) -> Family {
        self.family
    }
}

/// Receiver output for one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Zero,
    One,
    Erased,
}

impl Decision {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Decision::One
        } else {
            Decision::Zero
        }
    }

    /// The decided bit, unless erased.
    pub fn bit(&self) -> Option<bool> {
        match self {
            Decision::Zero => Some(false),
            Decision::One => Some(true),
            Decision::Erased => None,
        }
    }
}

/// Map bits to the symbol sequence of the chosen scheme.
pub fn encode(bits: &[bool], c: &Constellation, scheme: Scheme) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(bits.len() * scheme_symbols(scheme));
    for &bit in bits {
        match (scheme, bit) {
            (Scheme::Simple, true) => out.push(c.x_h),
            (Scheme::Simple, false) => out.push(c.x_l),
            (Scheme::Manchester, true) => out.extend([c.x_h, c.x_l]),
            (Scheme::Manchester, false) => out.extend([c.x_l, c.x_h]),
        }
    }
    out
}

fn scheme_symbols(scheme: Scheme) -> usize {
    match scheme {
        Scheme::Simple => 1,
        Scheme::Manchester => 2,
    }
}

/// Manchester bit decision from the two half-bit averages: opposite sides
/// of the threshold in the sent order decode a bit, the same side on both
/// halves is an erasure.
pub fn decode_bit_manchester(
    avg1: f64,
    avg2: f64,
    th: &ThresholdState,
) -> Result<Decision, Error> {
    let first = detect(avg1, th)?;
    let second = detect(avg2, th)?;
    Ok(match (first, second) {
        (Level::High, Level::Low) => Decision::One,
        (Level::Low, Level::High) => Decision::Zero,
        _ => Decision::Erased,
    })
}

/// Load behavior over a link run.
#[derive(Debug, Clone)]
pub enum LoadSequence {
    /// Fresh initial load, then an independent change draw per bit.
    Stochastic {
        dist: LoadDistribution,
        change: ChangeProcess,
    },
    /// Fully scripted: fixed initial load and a per-bit change list.
    Scripted {
        initial: f64,
        changes: Vec<Option<LoadChange>>,
    },
}

impl LoadSequence {
    fn initial_load<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LoadSequence::Stochastic { dist, .. } => dist.sample(rng),
            LoadSequence::Scripted { initial, .. } => *initial,
        }
    }

    fn change_for_bit<R: Rng + ?Sized>(
        &self,
        bit: usize,
        t_bit: f64,
        rng: &mut R,
    ) -> Result<Option<LoadChange>, Error> {
        match self {
            LoadSequence::Stochastic { dist, change } => change.sample_change(dist, t_bit, rng),
            LoadSequence::Scripted { changes, .. } => {
                Ok(changes.get(bit).copied().flatten())
            }
        }
    }
}

/// Aggregate counters of one link run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    /// Data bits transmitted (pilot intervals excluded).
    pub bits_sent: u64,
    /// Non-erased decisions that differ from the sent bit.
    pub bit_errors: u64,
    /// Erased decisions (Manchester only).
    pub erasures: u64,
    /// Bits where a load change produced a wrong or erased decision.
    pub change_events: u64,
    /// Pilot symbol intervals re-inserted by the policy.
    pub pilots_inserted: u64,
    /// Fraction of change events detected by both ends at the event bit;
    /// NaN when no event occurred.
    pub p_e_hat: f64,
    /// Fraction of change events followed by further (non-erased) bit
    /// errors before the next threshold reset; NaN when no event occurred.
    pub p_burst_hat: f64,
}

/// One interval of the link trace: a data bit or a pilot insertion.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    /// Data-bit index; `None` for pilot intervals.
    pub bit_index: Option<u64>,
    pub sent: Option<bool>,
    /// Receiver window averages, one per symbol interval.
    pub rx_averages: Vec<f64>,
    pub decision: Option<Decision>,
    /// Transmitter-mirrored decision from its own observations.
    pub tx_decision: Option<Decision>,
    pub change: Option<LoadChange>,
    /// Load at the start of the interval, ohms.
    pub r_start: f64,
    /// Receiver threshold in force during the interval, volts.
    pub threshold: f64,
    pub pilot: bool,
}

/// Full per-interval record of a link run.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub scheme: Scheme,
    pub entries: Vec<TraceEntry>,
}

struct Side {
    threshold: ThresholdState,
}

/// Simulate the full link: initial pilot acquisition, per-bit trajectory,
/// transmitter-mirrored detection and the chosen recovery policy.
#[allow(clippy::too_many_arguments)]
pub fn run_link<R: Rng + ?Sized>(
    bits: &[bool],
    c: &Constellation,
    scheme: Scheme,
    g: &GridConfig,
    slot: &SlotConfig,
    load: &LoadSequence,
    policy: Policy,
    rng: &mut R,
) -> Result<(FrameTrace, LinkStats), Error> {
    c.validate(g)?;
    slot.validate()?;
    g.validate()?;
    if slot.symbols_per_bit() != scheme_symbols(scheme) {
        return Err(Error::domain(
            "slot bit interval does not match the scheme's symbols per bit",
        ));
    }

    let mut entries: Vec<TraceEntry> = Vec::with_capacity(bits.len() + 1);
    let mut r_cur = load.initial_load(rng);
    if !(r_cur > 0.0) {
        return Err(Error::domain("initial load must be positive"));
    }

    // Window average with per-receiver observation noise.
    let noisy_avg = |base: &[f64], rng: &mut R| -> f64 {
        if g.sigma == 0.0 {
            average_window(base)
        } else {
            let sum: f64 = base
                .iter()
                .map(|&v| crate::grid::observe(v, g.sigma, rng))
                .sum();
            sum / base.len() as f64
        }
    };

    let mut tx = Side { threshold: ThresholdState { v0: 0.0, valid: false } };
    let mut rx = Side { threshold: ThresholdState { v0: 0.0, valid: false } };

    let acquire = |r: f64, entries: &mut Vec<TraceEntry>, tx: &mut Side, rx: &mut Side, rng: &mut R| {
        let traj = LoadTrajectory::constant(r);
        let base = bus_samples(c.pilot(), &traj, 0.0, g, slot);
        let avg_tx = noisy_avg(&base, rng);
        let avg_rx = noisy_avg(&base, rng);
        tx.threshold = ThresholdState { v0: avg_tx, valid: true };
        rx.threshold = ThresholdState { v0: avg_rx, valid: true };
        entries.push(TraceEntry {
            bit_index: None,
            sent: None,
            rx_averages: vec![avg_rx],
            decision: None,
            tx_decision: None,
            change: None,
            r_start: r,
            threshold: avg_rx,
            pilot: true,
        });
    };

    acquire(r_cur, &mut entries, &mut tx, &mut rx, rng);

    let mut stats = LinkStats {
        bits_sent: bits.len() as u64,
        bit_errors: 0,
        erasures: 0,
        change_events: 0,
        pilots_inserted: 0,
        p_e_hat: f64::NAN,
        p_burst_hat: f64::NAN,
    };
    let mut joint_detections = 0u64;
    // Per-event burst flags; `open` holds events whose recovery window is
    // still running (no threshold reset since).
    let mut event_bursts: Vec<bool> = Vec::new();
    let mut open_events: Vec<usize> = Vec::new();
    let mut run_len = 0usize;
    let mut last_decision: Option<Decision> = None;

    for (i, &bit) in bits.iter().enumerate() {
        let change = load.change_for_bit(i, slot.t_bit, rng)?;
        if let Some(ch) = change {
            if !(0.0..slot.t_bit).contains(&ch.theta) {
                return Err(Error::domain("scripted change instant outside the bit interval"));
            }
            if !(ch.r1 > 0.0) {
                return Err(Error::domain("scripted load must be positive"));
            }
        }
        let traj = LoadTrajectory { r0: r_cur, change };
        let symbols = encode(&[bit], c, scheme);

        let mut tx_avgs = Vec::with_capacity(symbols.len());
        let mut rx_avgs = Vec::with_capacity(symbols.len());
        for (j, sym) in symbols.iter().enumerate() {
            let base = bus_samples(sym, &traj, j as f64 * slot.t_symbol, g, slot);
            tx_avgs.push(noisy_avg(&base, rng));
            rx_avgs.push(noisy_avg(&base, rng));
        }

        let decide = |avgs: &[f64], th: &ThresholdState| -> Result<Decision, Error> {
            match scheme {
                Scheme::Simple => Ok(match detect(avgs[0], th)? {
                    Level::High => Decision::One,
                    Level::Low => Decision::Zero,
                }),
                Scheme::Manchester => decode_bit_manchester(avgs[0], avgs[1], th),
            }
        };
        let rx_decision = decide(&rx_avgs, &rx.threshold)?;
        let tx_decision = decide(&tx_avgs, &tx.threshold)?;
        let sent = Decision::from_bit(bit);

        let wrong = rx_decision != Decision::Erased && rx_decision != sent;
        if rx_decision == Decision::Erased {
            stats.erasures += 1;
        } else if wrong {
            stats.bit_errors += 1;
        }

        // A wrong decision extends the burst of every event still waiting
        // for a threshold reset.
        if wrong {
            for &idx in &open_events {
                event_bursts[idx] = true;
            }
        }

        // An error-inducing change: the load moved this bit and the
        // receiver decision came out wrong or erased.
        if change.is_some() && (wrong || rx_decision == Decision::Erased) {
            stats.change_events += 1;
            let tx_detected = tx_decision != sent;
            let rx_detected = rx_decision == Decision::Erased;
            if tx_detected && rx_detected {
                joint_detections += 1;
            }
            event_bursts.push(false);
            open_events.push(event_bursts.len() - 1);
        }

        entries.push(TraceEntry {
            bit_index: Some(i as u64),
            sent: Some(bit),
            rx_averages: rx_avgs,
            decision: Some(rx_decision),
            tx_decision: Some(tx_decision),
            change,
            r_start: r_cur,
            threshold: rx.threshold.v0,
            pilot: false,
        });

        r_cur = traj.final_load();

        // Recovery policies act on what the transmitter can observe.
        let reset = match policy {
            Policy::None => false,
            Policy::PilotReset => tx_decision == Decision::Erased,
            Policy::RunLimit { limit } => {
                if last_decision == Some(tx_decision) {
                    run_len += 1;
                } else {
                    run_len = 1;
                }
                last_decision = Some(tx_decision);
                run_len > limit
            }
        };
        if reset {
            stats.pilots_inserted += 1;
            acquire(r_cur, &mut entries, &mut tx, &mut rx, rng);
            open_events.clear();
            run_len = 0;
            last_decision = None;
        }
    }

    if stats.change_events > 0 {
        stats.p_e_hat = joint_detections as f64 / stats.change_events as f64;
        let bursts = event_bursts.iter().filter(|&&b| b).count() as u64;
        stats.p_burst_hat = bursts as f64 / stats.change_events as f64;
    }

    Ok((FrameTrace { scheme, entries }, stats))
}

/// Per-bit agreement between the transmitter-mirrored decision and the
/// receiver decision (pilot intervals excluded).
pub fn tx_feedback_check(trace: &FrameTrace) -> Vec<bool> {
    trace
        .entries
        .iter()
        .filter(|e| !e.pilot)
        .map(|e| e.tx_decision == e.decision)
        .collect()
}
