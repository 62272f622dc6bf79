//! Analytical channel characterization.
//!
//! Conditioned on a single load step per bit interval, the averaged
//! receiver admits closed-form conditional error probabilities: the bus
//! voltage is strictly increasing in the load, so "the window average
//! crosses the threshold" becomes "the new load falls below/above a
//! solvable boundary load", i.e. one cdf evaluation. Averaging those over
//! the initial load and the change instant gives the flip probabilities of
//! the induced binary asymmetric channel (simple signaling) and the
//! erasure probabilities of the erasure channel (Manchester), which feed
//! the Arimoto-Blahut capacity solver.
//!
//! The nested integrals are evaluated piecewise: integrands are smooth
//! between analytically known switch points (where the boundary load
//! leaves the load support), so Gauss-Legendre quadrature converges fast
//! and node-doubling checks stay well below 1e-8.

use crate::grid::{BusResponse, GridConfig, Symbol};
use crate::load::{theta_pdf, ChangeProcess, LoadDistribution};
use crate::parallel::{run_trials, trial_rng};
use crate::phy::{acquire_threshold, average_window, detect, synthesize_symbol_samples, Level, SlotConfig};
use crate::protocol::{decode_bit_manchester, encode, Constellation, Decision, Family};
use crate::quad::GaussLegendre;
use crate::space::{power_deviation, DeviationSpec};
use crate::{load::LoadChange, load::LoadTrajectory, Error};

/// Node counts for the nested load/change-instant quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub nodes_r0: usize,
    pub nodes_theta: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes_r0: 64, nodes_theta: 64 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.nodes_r0 < 16 || self.nodes_theta < 16 {
            return Err(Error::domain("quadrature needs at least 16 nodes per dimension"));
        }
        Ok(())
    }
}

/// Distribution of the change instant within a bit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaDist {
    /// Exponential with rate `1/T`, conditioned on landing in `[0, T)`.
    TruncatedExp,
    /// Uniform on `[lo_frac * T, hi_frac * T]`.
    Window { lo_frac: f64, hi_frac: f64 },
}

impl ThetaDist {
    pub fn validate(&self) -> Result<(), Error> {
        if let ThetaDist::Window { lo_frac, hi_frac } = self {
            if !(0.0 <= *lo_frac && lo_frac < hi_frac && *hi_frac <= 1.0) {
                return Err(Error::domain("theta window must satisfy 0 <= lo < hi <= 1"));
            }
        }
        Ok(())
    }

    pub fn support(&self, t_bit: f64) -> (f64, f64) {
        match *self {
            ThetaDist::TruncatedExp => (0.0, t_bit),
            ThetaDist::Window { lo_frac, hi_frac } => (lo_frac * t_bit, hi_frac * t_bit),
        }
    }

    pub fn pdf(&self, theta: f64, t_bit: f64) -> f64 {
        match *self {
            ThetaDist::TruncatedExp => theta_pdf(theta, t_bit),
            ThetaDist::Window { lo_frac, hi_frac } => {
                let (lo, hi) = (lo_frac * t_bit, hi_frac * t_bit);
                if theta < lo || theta > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
        }
    }
}

/// Flip or erasure probabilities of the induced channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelParams {
    /// Binary asymmetric channel of simple signaling.
    Bac { p10: f64, p01: f64 },
    /// Binary asymmetric erasure channel of Manchester coding.
    Baec { q1e: f64, q0e: f64 },
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        let valid = match *self {
            ChannelParams::Bac { p10, p01 } => ok(p10) && ok(p01),
            ChannelParams::Baec { q1e, q0e } => ok(q1e) && ok(q0e),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::domain("channel probabilities must lie in [0, 1]"))
        }
    }
}

/// Row-stochastic channel matrix; rows are inputs, columns outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::domain("transition matrix must be non-empty"));
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::domain("transition matrix rows must have equal length"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&w| w < 0.0) {
                return Err(Error::NonStochasticRow { row: i, sum });
            }
            data.extend_from_slice(row);
        }
        Ok(TransitionMatrix { data, rows: n_rows, cols: n_cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Channel matrix of the given parameters. BAC outputs are `(0, 1)`; BAEC
/// outputs are `(0, 1, e)` with zero cross-flip mass in the noiseless
/// single-change model.
pub fn to_matrix(params: &ChannelParams) -> Result<TransitionMatrix, Error> {
    params.validate()?;
    match *params {
        ChannelParams::Bac { p10, p01 } => TransitionMatrix::new(vec![
            vec![1.0 - p01, p01],
            vec![p10, 1.0 - p10],
        ]),
        ChannelParams::Baec { q1e, q0e } => TransitionMatrix::new(vec![
            vec![1.0 - q0e, 0.0, q0e],
            vec![0.0, 1.0 - q1e, q1e],
        ]),
    }
}

/// Capacity and maximizing input distribution of a discrete memoryless
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Channel capacity, bits per channel use.
    pub capacity_bits: f64,
    pub input_dist: Vec<f64>,
    pub iterations: usize,
}

/// Alternating-maximization capacity solver. Terminates once the standard
/// upper/lower capacity bounds close to within `tol` bits.
pub fn arimoto_blahut(
    m: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult, Error> {
    if !(tol > 0.0) {
        return Err(Error::domain("capacity tolerance must be positive"));
    }
    let (n_in, n_out) = (m.rows(), m.cols());
    let tol_nats = tol * std::f64::consts::LN_2;
    let mut p = vec![1.0 / n_in as f64; n_in];
    let mut d = vec![0.0; n_in];
    let mut q = vec![0.0; n_out];
    let mut gap_nats = f64::INFINITY;
    for it in 1..=max_iter {
        for y in 0..n_out {
            q[y] = (0..n_in).map(|x| p[x] * m.row(x)[y]).sum();
        }
        for x in 0..n_in {
            d[x] = m.row(x)
                .iter()
                .zip(&q)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, &qy)| w * (w / qy).ln())
                .sum();
        }
        let lower: f64 = p.iter().zip(&d).map(|(&px, &dx)| px * dx).sum();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap_nats = upper - lower;
        if gap_nats < tol_nats {
            return Ok(CapacityResult {
                capacity_bits: lower / std::f64::consts::LN_2,
                input_dist: p,
                iterations: it,
            });
        }
        let z: f64 = p.iter().zip(&d).map(|(&px, &dx)| px * dx.exp()).sum();
        for x in 0..n_in {
            p[x] *= d[x].exp() / z;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        gap_bits: gap_nats / std::f64::consts::LN_2,
    })
}

/// Capacity averaged over the change occurrence: a bit interval without a
/// load change carries one bit, one with a change carries `c_cond`.
pub fn average_capacity(c_cond: f64, p_c: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_c));
    c_cond * p_c + (1.0 - p_c)
}

/// `Pr(v(x, R) < c)` for `R ~ dist`, using monotonicity of the bus voltage
/// in the load.
fn prob_below(resp: &BusResponse, dist: &LoadDistribution, c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    if c >= resp.voltage_sup() {
        return 1.0;
    }
    dist.cdf(1.0 / (resp.alpha / c - resp.beta))
}

fn prob_above(resp: &BusResponse, dist: &LoadDistribution, c: f64) -> f64 {
    1.0 - prob_below(resp, dist, c)
}

/// Post-change level that flips the window average across `v0`: the
/// average over a symbol interval of duration `s` with pre-change level
/// `v_r0` held for `theta` equals `v0` when the post-change level is `c`.
#[inline]
fn crossing_level(s: f64, v0: f64, v_r0: f64, theta: f64) -> f64 {
    (s * v0 - theta * v_r0) / (s - theta)
}

fn validate_r0_theta(g: &GridConfig, r0: f64, theta: f64, t_bit: f64) -> Result<(), Error> {
    if !(t_bit > 0.0) {
        return Err(Error::domain("bit interval must be positive"));
    }
    if !(0.0..t_bit).contains(&theta) {
        return Err(Error::domain("change instant must lie in [0, T)"));
    }
    if !(g.r_min <= r0 && r0 <= g.r_max) {
        return Err(Error::domain("initial load must lie in [r_min, r_max]"));
    }
    Ok(())
}

fn grid_dist(g: &GridConfig) -> LoadDistribution {
    LoadDistribution::Uniform { r_min: g.r_min, r_max: g.r_max }
}

/// Conditional `1 -> 0` flip probability of simple signaling given the
/// initial load and change instant, with the new load drawn from the
/// grid's uniform prior.
pub fn cond_flip_1to0(
    c: &Constellation,
    g: &GridConfig,
    r0: f64,
    theta: f64,
    t_bit: f64,
) -> Result<f64, Error> {
    validate_r0_theta(g, r0, theta, t_bit)?;
    let dist = grid_dist(g);
    let v0 = c.pilot().response(g).voltage_at(r0);
    let resp_h = c.high().response(g);
    let cross = crossing_level(t_bit, v0, resp_h.voltage_at(r0), theta);
    Ok(prob_below(&resp_h, &dist, cross))
}

/// Conditional `0 -> 1` flip probability, mirror of [`cond_flip_1to0`].
pub fn cond_flip_0to1(
    c: &Constellation,
    g: &GridConfig,
    r0: f64,
    theta: f64,
    t_bit: f64,
) -> Result<f64, Error> {
    validate_r0_theta(g, r0, theta, t_bit)?;
    let dist = grid_dist(g);
    let v0 = c.pilot().response(g).voltage_at(r0);
    let resp_l = c.low().response(g);
    let cross = crossing_level(t_bit, v0, resp_l.voltage_at(r0), theta);
    Ok(prob_above(&resp_l, &dist, cross))
}

/// Conditional `1 -> erasure` probability of Manchester coding: both
/// half-bit averages on the same side of the threshold.
pub fn cond_erasure_1to_e(
    c: &Constellation,
    g: &GridConfig,
    r0: f64,
    theta: f64,
    t_bit: f64,
) -> Result<f64, Error> {
    validate_r0_theta(g, r0, theta, t_bit)?;
    let dist = grid_dist(g);
    let v0 = c.pilot().response(g).voltage_at(r0);
    let resp_h = c.high().response(g);
    let resp_l = c.low().response(g);
    let s = t_bit / 2.0;
    if theta < s {
        // Change in the first symbol interval: the second interval sits
        // entirely at the new load, and "both above" reduces to its second
        // event while "both below" reduces to its first.
        let both_above = prob_above(&resp_l, &dist, v0);
        let cross = crossing_level(s, v0, resp_h.voltage_at(r0), theta);
        let both_below = prob_below(&resp_h, &dist, cross);
        Ok(both_above + both_below)
    } else {
        // Change in the second symbol interval: the first interval stayed
        // above the threshold for sure, so only "both above" survives.
        let cross = crossing_level(s, v0, resp_l.voltage_at(r0), theta - s);
        Ok(prob_above(&resp_l, &dist, cross))
    }
}

/// Conditional `0 -> erasure` probability, mirror of
/// [`cond_erasure_1to_e`].
pub fn cond_erasure_0to_e(
    c: &Constellation,
    g: &GridConfig,
    r0: f64,
    theta: f64,
    t_bit: f64,
) -> Result<f64, Error> {
    validate_r0_theta(g, r0, theta, t_bit)?;
    let dist = grid_dist(g);
    let v0 = c.pilot().response(g).voltage_at(r0);
    let resp_h = c.high().response(g);
    let resp_l = c.low().response(g);
    let s = t_bit / 2.0;
    if theta < s {
        let both_below = prob_below(&resp_h, &dist, v0);
        let cross = crossing_level(s, v0, resp_l.voltage_at(r0), theta);
        let both_above = prob_above(&resp_l, &dist, cross);
        Ok(both_above + both_below)
    } else {
        let cross = crossing_level(s, v0, resp_h.voltage_at(r0), theta - s);
        Ok(prob_below(&resp_h, &dist, cross))
    }
}

/// Integral over the change instant of `Pr(v_x(R) < crossing(theta))`,
/// restricted to the stretch where the crossing load stays inside the
/// support (the integrand is smooth there and identically zero beyond).
/// `v_r0 > v0` is the high-symbol case.
#[allow(clippy::too_many_arguments)]
fn inner_below(
    resp: &BusResponse,
    dist: &LoadDistribution,
    v0: f64,
    v_r0: f64,
    s: f64,
    piece_start: f64,
    theta: &ThetaDist,
    t_bit: f64,
    gl: &GaussLegendre,
) -> f64 {
    debug_assert!(v_r0 > v0);
    let (r_lo, _) = dist.bounds();
    let floor_level = resp.voltage_at(r_lo);
    if v0 <= floor_level {
        return 0.0;
    }
    let theta_end = s * (v0 - floor_level) / (v_r0 - floor_level);
    let (sup_lo, sup_hi) = theta.support(t_bit);
    let lo = piece_start.max(sup_lo);
    let hi = (piece_start + theta_end.min(s)).min(sup_hi);
    gl.integrate(lo, hi, |th_abs| {
        let cross = crossing_level(s, v0, v_r0, th_abs - piece_start);
        prob_below(resp, dist, cross) * theta.pdf(th_abs, t_bit)
    })
}

/// Mirror of [`inner_below`] for the low symbol (`v_r0 < v0`): integral of
/// `Pr(v_x(R) > crossing(theta))`.
#[allow(clippy::too_many_arguments)]
fn inner_above(
    resp: &BusResponse,
    dist: &LoadDistribution,
    v0: f64,
    v_r0: f64,
    s: f64,
    piece_start: f64,
    theta: &ThetaDist,
    t_bit: f64,
    gl: &GaussLegendre,
) -> f64 {
    debug_assert!(v_r0 < v0);
    let (_, r_hi) = dist.bounds();
    let ceil_level = resp.voltage_at(r_hi);
    if v0 >= ceil_level {
        return 0.0;
    }
    let theta_end = s * (ceil_level - v0) / (ceil_level - v_r0);
    let (sup_lo, sup_hi) = theta.support(t_bit);
    let lo = piece_start.max(sup_lo);
    let hi = (piece_start + theta_end.min(s)).min(sup_hi);
    gl.integrate(lo, hi, |th_abs| {
        let cross = crossing_level(s, v0, v_r0, th_abs - piece_start);
        prob_above(resp, dist, cross) * theta.pdf(th_abs, t_bit)
    })
}

/// Initial loads at which some inner integral switches on or off: where
/// the pilot level meets the high symbol's floor voltage or the low
/// symbol's ceiling voltage. The outer integrand is smooth between them.
fn outer_splits(c: &Constellation, g: &GridConfig, dist: &LoadDistribution) -> Vec<f64> {
    let (r_lo, r_hi) = dist.bounds();
    let resp0 = c.pilot().response(g);
    let resp_h = c.high().response(g);
    let resp_l = c.low().response(g);
    let mut splits = vec![r_lo, r_hi];
    for level in [resp_h.voltage_at(r_lo), resp_l.voltage_at(r_hi)] {
        if let Some(r) = resp0.load_for_voltage(level) {
            if r > r_lo && r < r_hi {
                splits.push(r);
            }
        }
    }
    splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    splits
}

fn check_analysis_inputs(
    c: &Constellation,
    g: &GridConfig,
    theta: &ThetaDist,
    t_bit: f64,
    quad: &QuadratureSpec,
) -> Result<(), Error> {
    c.validate(g)?;
    theta.validate()?;
    quad.validate()?;
    if !(t_bit > 0.0) {
        return Err(Error::domain("bit interval must be positive"));
    }
    Ok(())
}

/// Averaged flip probabilities `(p10, p01)` of the simple-signaling
/// channel: nested expectation of the conditional probabilities over the
/// initial load and the change instant.
pub fn flip_probs(
    c: &Constellation,
    g: &GridConfig,
    dist: &LoadDistribution,
    theta: &ThetaDist,
    t_bit: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64), Error> {
    check_analysis_inputs(c, g, theta, t_bit, quad)?;
    if dist.is_degenerate() {
        // The load can only "change" to its single value; no flip.
        return Ok((0.0, 0.0));
    }
    let gl_r = GaussLegendre::new(quad.nodes_r0);
    let gl_th = GaussLegendre::new(quad.nodes_theta);
    let resp0 = c.pilot().response(g);
    let resp_h = c.high().response(g);
    let resp_l = c.low().response(g);
    let (mut p10, mut p01) = (0.0, 0.0);
    let splits = outer_splits(c, g, dist);
    for seg in splits.windows(2) {
        for (r0, w) in gl_r.scaled(seg[0], seg[1]) {
            let weight = w * dist.pdf(r0);
            let v0 = resp0.voltage_at(r0);
            p10 += weight
                * inner_below(&resp_h, dist, v0, resp_h.voltage_at(r0), t_bit, 0.0, theta, t_bit, &gl_th);
            p01 += weight
                * inner_above(&resp_l, dist, v0, resp_l.voltage_at(r0), t_bit, 0.0, theta, t_bit, &gl_th);
        }
    }
    Ok((p10, p01))
}

/// Averaged erasure probabilities `(q1e, q0e)` of the Manchester channel.
/// The change lands in either symbol interval; both cases reduce to one
/// surviving joint event each (see the conditional functions).
pub fn erasure_probs(
    c: &Constellation,
    g: &GridConfig,
    dist: &LoadDistribution,
    theta: &ThetaDist,
    t_bit: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64), Error> {
    check_analysis_inputs(c, g, theta, t_bit, quad)?;
    if dist.is_degenerate() {
        return Ok((0.0, 0.0));
    }
    let gl_r = GaussLegendre::new(quad.nodes_r0);
    let gl_th = GaussLegendre::new(quad.nodes_theta);
    let resp0 = c.pilot().response(g);
    let resp_h = c.high().response(g);
    let resp_l = c.low().response(g);
    let s = t_bit / 2.0;
    // Probability mass of the change instant landing in the first symbol
    // interval; scales the theta-independent joint terms.
    let (sup_lo, sup_hi) = theta.support(t_bit);
    let first_half_mass = gl_th.integrate(sup_lo.max(0.0), sup_hi.min(s), |th| theta.pdf(th, t_bit));
    let (mut q1e, mut q0e) = (0.0, 0.0);
    let splits = outer_splits(c, g, dist);
    for seg in splits.windows(2) {
        for (r0, w) in gl_r.scaled(seg[0], seg[1]) {
            let weight = w * dist.pdf(r0);
            let v0 = resp0.voltage_at(r0);
            let vh0 = resp_h.voltage_at(r0);
            let vl0 = resp_l.voltage_at(r0);
            q1e += weight
                * (prob_above(&resp_l, dist, v0) * first_half_mass
                    + inner_below(&resp_h, dist, v0, vh0, s, 0.0, theta, t_bit, &gl_th)
                    + inner_above(&resp_l, dist, v0, vl0, s, s, theta, t_bit, &gl_th));
            q0e += weight
                * (prob_below(&resp_h, dist, v0) * first_half_mass
                    + inner_above(&resp_l, dist, v0, vl0, s, 0.0, theta, t_bit, &gl_th)
                    + inner_below(&resp_h, dist, v0, vh0, s, s, theta, t_bit, &gl_th));
        }
    }
    Ok((q1e, q0e))
}

/// A Monte Carlo probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p: f64,
    pub std_err: f64,
    pub trials: u64,
}

fn mc_estimate(hits: u64, trials: u64) -> McEstimate {
    let p = hits as f64 / trials as f64;
    McEstimate {
        p,
        std_err: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    }
}

/// Conditioned end-to-end Monte Carlo estimate of the simple-signaling
/// flip probabilities: every trial acquires a fresh pilot threshold at the
/// initial load, applies exactly one load change and runs the full
/// sample-average-detect path.
pub fn mc_flip_probs(
    c: &Constellation,
    g: &GridConfig,
    dist: &LoadDistribution,
    slot: &SlotConfig,
    trials: u64,
    seed: u64,
) -> Result<(McEstimate, McEstimate), Error> {
    c.validate(g)?;
    slot.validate()?;
    if slot.symbols_per_bit() != 1 {
        return Err(Error::domain("simple signaling uses one symbol per bit"));
    }
    let flip = |bit: bool, stream_base: u64| -> u64 {
        let outcomes = run_trials(trials, |t| {
            let mut rng = trial_rng(seed, stream_base + 2 * t);
            let sent = Decision::from_bit(bit);
            let decided = conditioned_bit_trial(c, g, dist, slot, Scheme::Simple, bit, &mut rng);
            decided != sent
        });
        outcomes.into_iter().filter(|&f| f).count() as u64
    };
    let flips_1 = flip(true, 0);
    let flips_0 = flip(false, 1);
    Ok((mc_estimate(flips_1, trials), mc_estimate(flips_0, trials)))
}

/// Conditioned end-to-end Monte Carlo estimate of the Manchester erasure
/// probabilities.
pub fn mc_erasure_probs(
    c: &Constellation,
    g: &GridConfig,
    dist: &LoadDistribution,
    slot: &SlotConfig,
    trials: u64,
    seed: u64,
) -> Result<(McEstimate, McEstimate), Error> {
    c.validate(g)?;
    slot.validate()?;
    if slot.symbols_per_bit() != 2 {
        return Err(Error::domain("Manchester coding uses two symbols per bit"));
    }
    let erase = |bit: bool, stream_base: u64| -> u64 {
        let outcomes = run_trials(trials, |t| {
            let mut rng = trial_rng(seed, stream_base + 2 * t);
            conditioned_bit_trial(c, g, dist, slot, Scheme::Manchester, bit, &mut rng)
                == Decision::Erased
        });
        outcomes.into_iter().filter(|&e| e).count() as u64
    };
    let erased_1 = erase(true, 0);
    let erased_0 = erase(false, 1);
    Ok((mc_estimate(erased_1, trials), mc_estimate(erased_0, trials)))
}

use crate::protocol::Scheme;

/// One conditioned bit interval: threshold from a pilot at `r0`, exactly
/// one change at a truncated-exponential instant, full phy path.
fn conditioned_bit_trial<R: rand::Rng + ?Sized>(
    c: &Constellation,
    g: &GridConfig,
    dist: &LoadDistribution,
    slot: &SlotConfig,
    scheme: Scheme,
    bit: bool,
    rng: &mut R,
) -> Decision {
    let proc = ChangeProcess { p_change: 1.0 };
    let r0 = dist.sample(rng);
    let theta = proc.sample_theta(slot.t_bit, rng).expect("validated slot");
    let r1 = dist.sample(rng);
    let th = acquire_threshold(c.pilot(), g, slot, &LoadTrajectory::constant(r0), rng);
    let traj = LoadTrajectory { r0, change: Some(LoadChange { theta, r1 }) };
    let symbols = encode(&[bit], c, scheme);
    let avgs: Vec<f64> = symbols
        .iter()
        .enumerate()
        .map(|(j, sym)| {
            average_window(&synthesize_symbol_samples(
                sym,
                &traj,
                j as f64 * slot.t_symbol,
                g,
                slot,
                rng,
            ))
        })
        .collect();
    match scheme {
        Scheme::Simple => match detect(avgs[0], &th).expect("valid threshold") {
            Level::High => Decision::One,
            Level::Low => Decision::Zero,
        },
        Scheme::Manchester => {
            decode_bit_manchester(avgs[0], avgs[1], &th).expect("valid threshold")
        }
    }
}

/// One row of a constellation sweep: a matched-deviation symbol pair with
/// its channel probabilities and capacities.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    /// Matched per-symbol power deviation (dimensionless).
    pub delta: f64,
    pub x_h: Symbol,
    pub x_l: Symbol,
    pub delta_h: f64,
    pub delta_l: f64,
    pub p10: f64,
    pub p01: f64,
    pub q1e: f64,
    pub q0e: f64,
    pub c_bac_bits: f64,
    pub c_baec_bits: f64,
}

#[derive(Clone, Copy)]
enum BranchSide {
    High,
    Low,
}

fn branch_symbol(family: Family, side: BranchSide, pilot: &Symbol, s: f64) -> Symbol {
    match (family, side) {
        (Family::FixedRd, BranchSide::High) => Symbol { v_a: pilot.v_a + s, r_da: pilot.r_da },
        (Family::FixedRd, BranchSide::Low) => Symbol { v_a: pilot.v_a - s, r_da: pilot.r_da },
        (Family::FixedVa, BranchSide::High) => Symbol { v_a: pilot.v_a, r_da: pilot.r_da - s },
        (Family::FixedVa, BranchSide::Low) => Symbol { v_a: pilot.v_a, r_da: pilot.r_da + s },
        (Family::Custom, _) => unreachable!("sweeps are defined for the line families"),
    }
}

/// Default sweep extents along each branch, expressed relative to the
/// pilot so the reference grid reproduces the usual plotting ranges
/// (voltage offsets +2/-4 V, slope span 0.48x to 1.5x the pilot slope).
fn branch_extent(family: Family, side: BranchSide, pilot: &Symbol) -> f64 {
    match (family, side) {
        (Family::FixedRd, BranchSide::High) => 2.0,
        (Family::FixedRd, BranchSide::Low) => 4.0,
        (Family::FixedVa, BranchSide::High) => 0.52 * pilot.r_da,
        (Family::FixedVa, BranchSide::Low) => 0.50 * pilot.r_da,
        (Family::Custom, _) => 0.0,
    }
}

fn branch_member(family: Family, side: BranchSide, pilot: &Symbol, g: &GridConfig, s: f64) -> bool {
    let x = branch_symbol(family, side, pilot, s);
    if !(x.v_a > 0.0 && x.r_da > 0.0) {
        return false;
    }
    if !crate::space::in_space(&x, g) {
        return false;
    }
    match side {
        BranchSide::High => crate::space::in_region_high(&x, pilot, g),
        BranchSide::Low => crate::space::in_region_low(&x, pilot, g),
    }
}

/// Largest admissible offset along a branch: the default extent, clipped
/// back to the signaling space by bisection when it pokes outside.
fn branch_limit(family: Family, side: BranchSide, pilot: &Symbol, g: &GridConfig) -> Result<f64, Error> {
    let extent = branch_extent(family, side, pilot);
    if !(extent > 0.0) {
        return Err(Error::domain("sweeps are defined for the fixed-v_a and fixed-r_d families"));
    }
    if branch_member(family, side, pilot, g, extent) {
        return Ok(extent);
    }
    let (mut lo, mut hi) = (0.0, extent);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if branch_member(family, side, pilot, g, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::domain("no admissible symbols along the sweep branch"));
    }
    Ok(lo)
}

fn branch_delta(
    family: Family,
    side: BranchSide,
    pilot: &Symbol,
    g: &GridConfig,
    dist: &LoadDistribution,
    s: f64,
) -> Result<f64, Error> {
    let x = branch_symbol(family, side, pilot, s);
    power_deviation(&x, &DeviationSpec::quadrature(*pilot, *dist), g)
}

/// Largest deviation reachable by both branches of a family; sweeps cover
/// `(0, family_delta_max]`.
pub fn family_delta_max(family: Family, g: &GridConfig, pilot: &Symbol) -> Result<f64, Error> {
    let dist = grid_dist(g);
    let s_h = branch_limit(family, BranchSide::High, pilot, g)?;
    let s_l = branch_limit(family, BranchSide::Low, pilot, g)?;
    let d_h = branch_delta(family, BranchSide::High, pilot, g, &dist, s_h)?;
    let d_l = branch_delta(family, BranchSide::Low, pilot, g, &dist, s_l)?;
    Ok(d_h.min(d_l))
}

/// Sweep a family over `points` equally spaced deviation targets up to the
/// family's feasible maximum.
pub fn delta_sweep(
    family: Family,
    g: &GridConfig,
    pilot: &Symbol,
    points: usize,
    quad: &QuadratureSpec,
) -> Result<Vec<SweepPoint>, Error> {
    if points == 0 {
        return Err(Error::domain("sweep needs at least one point"));
    }
    let d_max = family_delta_max(family, g, pilot)?;
    let targets: Vec<f64> = (1..=points).map(|j| d_max * j as f64 / points as f64).collect();
    delta_sweep_targets(family, g, pilot, &targets, quad)
}

/// Sweep a family over explicit deviation targets. Both branch symbols of
/// a point are matched to the target deviation by bisection along the
/// family's line, so high and low symbols carry equal per-symbol cost.
/// Points evaluate independently (in parallel) and come back in target
/// order.
pub fn delta_sweep_targets(
    family: Family,
    g: &GridConfig,
    pilot: &Symbol,
    targets: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<SweepPoint>, Error> {
    g.validate()?;
    quad.validate()?;
    let dist = grid_dist(g);
    let s_h_max = branch_limit(family, BranchSide::High, pilot, g)?;
    let s_l_max = branch_limit(family, BranchSide::Low, pilot, g)?;
    let d_h_max = branch_delta(family, BranchSide::High, pilot, g, &dist, s_h_max)?;
    let d_l_max = branch_delta(family, BranchSide::Low, pilot, g, &dist, s_l_max)?;
    let feasible = d_h_max.min(d_l_max) * (1.0 + 1e-9);
    for &t in targets {
        if !(t > 0.0 && t <= feasible) {
            return Err(Error::domain(format!(
                "sweep target {t} outside the feasible deviation range (0, {feasible}]"
            )));
        }
    }

    let solve = |side: BranchSide, s_max: f64, target: f64| -> Result<Symbol, Error> {
        let (mut lo, mut hi) = (0.0, s_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if branch_delta(family, side, pilot, g, &dist, mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(branch_symbol(family, side, pilot, 0.5 * (lo + hi)))
    };

    let results = run_trials(targets.len() as u64, |i| -> Result<SweepPoint, Error> {
        let target = targets[i as usize];
        let x_h = solve(BranchSide::High, s_h_max, target)?;
        let x_l = solve(BranchSide::Low, s_l_max, target)?;
        let c = Constellation::new(*pilot, x_h, x_l, family, g)?;
        let spec = DeviationSpec::quadrature(*pilot, dist);
        let delta_h = power_deviation(&x_h, &spec, g)?;
        let delta_l = power_deviation(&x_l, &spec, g)?;
        let (p10, p01) = flip_probs(&c, g, &dist, &ThetaDist::TruncatedExp, 1.0, quad)?;
        let (q1e, q0e) = erasure_probs(&c, g, &dist, &ThetaDist::TruncatedExp, 2.0, quad)?;
        let c_bac = arimoto_blahut(&to_matrix(&ChannelParams::Bac { p10, p01 })?, 1e-9, 100_000)?;
        let c_baec = arimoto_blahut(&to_matrix(&ChannelParams::Baec { q1e, q0e })?, 1e-9, 100_000)?;
        Ok(SweepPoint {
            index: i as usize,
            delta: target,
            x_h,
            x_l,
            delta_h,
            delta_l,
            p10,
            p01,
            q1e,
            q0e,
            c_bac_bits: c_bac.capacity_bits,
            c_baec_bits: c_baec.capacity_bits,
        })
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::droop_slope;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (GridConfig, Symbol) {
        let g = GridConfig::default();
        let pilot = Symbol::new(400.0, droop_slope(400.0, g.v_min, g.i_a_max).unwrap()).unwrap();
        (g, pilot)
    }

    fn fixed_rd(g: &GridConfig, pilot: Symbol, v_ah: f64, v_al: f64) -> Constellation {
        Constellation::fixed_rd(pilot, v_ah, v_al, g).unwrap()
    }

    #[test]
    fn cond_flip_vanishes_as_theta_approaches_the_interval_end() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 400.5, 399.5);
        let t = 1.0;
        let theta = t - 1e-12 * t;
        assert_eq!(cond_flip_1to0(&c, &g, 150.0, theta, t).unwrap(), 0.0);
        assert_eq!(cond_flip_0to1(&c, &g, 150.0, theta, t).unwrap(), 0.0);
    }

    #[test]
    fn cond_flip_vanishes_deep_in_the_regions() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 402.0, 396.5);
        // At a small initial load the high symbol's floor voltage exceeds
        // the threshold, so no new load can flip a '1'.
        assert_eq!(cond_flip_1to0(&c, &g, 55.0, 0.0, 1.0).unwrap(), 0.0);
        // At a large initial load the low symbol's ceiling stays below the
        // threshold, so no new load can flip a '0'.
        assert_eq!(cond_flip_0to1(&c, &g, 240.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn cond_flip_rejects_bad_arguments() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 400.5, 399.5);
        assert!(cond_flip_1to0(&c, &g, 150.0, 1.0, 1.0).is_err());
        assert!(cond_flip_1to0(&c, &g, 150.0, -0.1, 1.0).is_err());
        assert!(cond_flip_1to0(&c, &g, 20.0, 0.5, 1.0).is_err());
    }

    // Direct Monte Carlo of the conditional flip event.
    #[test]
    fn cond_flip_matches_monte_carlo_oracle() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 400.5, 399.5);
        let (t, r0, theta_frac) = (1.0, 150.0, 0.5);
        let theta = theta_frac * t;
        let analytic = cond_flip_1to0(&c, &g, r0, theta, t).unwrap();
        let v0 = pilot.response(&g).voltage_at(r0);
        let resp_h = c.high().response(&g);
        let vh0 = resp_h.voltage_at(r0);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let n = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let r = rng.random_range(g.r_min..g.r_max);
            let avg = theta_frac * vh0 + (1.0 - theta_frac) * resp_h.voltage_at(r);
            if avg < v0 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
        assert!(
            (analytic - p_hat).abs() <= 3.0 * se,
            "analytic {analytic} vs mc {p_hat} (se {se})"
        );
    }

    // The robust crossing-load evaluation must reproduce the literal
    // nested-reciprocal expression wherever the latter is well defined.
    #[test]
    fn cond_flip_matches_literal_expression() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let t = 1.0;
        let dist = LoadDistribution::uniform(g.r_min, g.r_max).unwrap();
        let resp0 = pilot.response(&g);
        for side in [true, false] {
            let resp = if side { c.high().response(&g) } else { c.low().response(&g) };
            for i in 0..20 {
                let r0 = 55.0 + 10.0 * i as f64;
                for j in 0..10 {
                    let theta = t * j as f64 / 10.0;
                    let v0 = resp0.voltage_at(r0);
                    // Literal form: the crossing load written as nested
                    // reciprocals of the averaged-threshold identity.
                    let inner = t * v0 / (resp.alpha * (t - theta))
                        - theta / ((resp.beta + 1.0 / r0) * (t - theta));
                    if inner <= 0.0 {
                        continue;
                    }
                    let denom = 1.0 / inner - resp.beta;
                    if denom <= 0.0 {
                        continue;
                    }
                    let literal_r = 1.0 / denom;
                    if side {
                        let p = cond_flip_1to0(&c, &g, r0, theta, t).unwrap();
                        assert_abs_diff_eq!(p, dist.cdf(literal_r), epsilon = 1e-12);
                    } else {
                        let p = cond_flip_0to1(&c, &g, r0, theta, t).unwrap();
                        assert_abs_diff_eq!(p, 1.0 - dist.cdf(literal_r), epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn flip_probs_degenerate_load_cannot_flip() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let dist = LoadDistribution::uniform(120.0, 120.0).unwrap();
        let quad = QuadratureSpec::default();
        assert_eq!(
            flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &quad).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 2.0, &quad).unwrap(),
            (0.0, 0.0)
        );
    }

    // The bus response is nonlinear in the input, so even a symbol pair
    // placed symmetrically around the pilot sees unequal flip
    // probabilities. The gap is small but far above the sub-1e-8
    // quadrature error.
    #[test]
    fn channel_is_asymmetric_even_for_symmetric_constellations() {
        let (g, pilot) = setup();
        let dist = grid_dist(&g);
        let quad = QuadratureSpec::default();
        for (v_ah, v_al) in [(401.0, 399.0), (402.0, 398.0)] {
            let c = fixed_rd(&g, pilot, v_ah, v_al);
            let (p10, p01) =
                flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &quad).unwrap();
            assert!((p10 - p01).abs() > 1e-5, "p10 {p10} vs p01 {p01}");
        }
    }

    // The probabilities are scale-free in the bit interval: only the ratio
    // theta/T enters the integrands.
    #[test]
    fn probabilities_do_not_depend_on_the_time_scale() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let dist = grid_dist(&g);
        let quad = QuadratureSpec::default();
        let a = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 0.01, &quad).unwrap();
        let b = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &quad).unwrap();
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-12);
        let a = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 0.02, &quad).unwrap();
        let b = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 2.0, &quad).unwrap();
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-12);
    }

    #[test]
    fn doubling_quadrature_nodes_is_converged() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let dist = grid_dist(&g);
        let base = QuadratureSpec::default();
        let fine = QuadratureSpec { nodes_r0: 128, nodes_theta: 128 };
        let (p10a, p01a) = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &base).unwrap();
        let (p10b, p01b) = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 1.0, &fine).unwrap();
        assert!((p10a - p10b).abs() < 1e-8, "p10 drift {}", (p10a - p10b).abs());
        assert!((p01a - p01b).abs() < 1e-8, "p01 drift {}", (p01a - p01b).abs());
        let (q1a, q0a) = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 2.0, &base).unwrap();
        let (q1b, q0b) = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 2.0, &fine).unwrap();
        assert!((q1a - q1b).abs() < 1e-8, "q1e drift {}", (q1a - q1b).abs());
        assert!((q0a - q0b).abs() < 1e-8, "q0e drift {}", (q0a - q0b).abs());
    }

    #[test]
    fn quadrature_matches_conditioned_link_simulation() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let dist = grid_dist(&g);
        let quad = QuadratureSpec::default();
        let trials = 40_000u64;
        let (p10, p01) = flip_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 0.01, &quad).unwrap();
        let (mc10, mc01) =
            mc_flip_probs(&c, &g, &dist, &SlotConfig::default_simple(), trials, 62).unwrap();
        for (analytic, mc) in [(p10, mc10), (p01, mc01)] {
            let tol = (3.0 * mc.std_err).max(0.005);
            assert!(
                (analytic - mc.p).abs() <= tol,
                "analytic {analytic} vs mc {} (tol {tol})",
                mc.p
            );
        }
        let (q1e, q0e) = erasure_probs(&c, &g, &dist, &ThetaDist::TruncatedExp, 0.02, &quad).unwrap();
        let (mc1e, mc0e) =
            mc_erasure_probs(&c, &g, &dist, &SlotConfig::default_manchester(), trials, 63).unwrap();
        for (analytic, mc) in [(q1e, mc1e), (q0e, mc0e)] {
            let tol = (3.0 * mc.std_err).max(0.005);
            assert!(
                (analytic - mc.p).abs() <= tol,
                "analytic {analytic} vs mc {} (tol {tol})",
                mc.p
            );
        }
    }

    // A change-instant window straddling the symbol split exercises both
    // erasure pieces; compare against a direct Monte Carlo of the same
    // conditioned experiment.
    #[test]
    fn windowed_erasure_matches_monte_carlo() {
        let (g, pilot) = setup();
        let c = fixed_rd(&g, pilot, 401.0, 398.5);
        let dist = grid_dist(&g);
        let quad = QuadratureSpec::default();
        let theta = ThetaDist::Window { lo_frac: 0.4, hi_frac: 0.6 };
        let t = 2.0;
        let (q1e, q0e) = erasure_probs(&c, &g, &dist, &theta, t, &quad).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let n = 60_000u64;
        let resp0 = pilot.response(&g);
        let resp_h = c.high().response(&g);
        let resp_l = c.low().response(&g);
        let mut erased = [0u64; 2];
        for _ in 0..n {
            let r0 = dist.sample(&mut rng);
            let th: f64 = rng.random_range(0.4 * t..0.6 * t);
            let r1 = dist.sample(&mut rng);
            let v0 = resp0.voltage_at(r0);
            let s = t / 2.0;
            for (idx, (first, second)) in [(&resp_h, &resp_l), (&resp_l, &resp_h)]
                .into_iter()
                .enumerate()
            {
                let avg1 = if th < s {
                    (th * first.voltage_at(r0) + (s - th) * first.voltage_at(r1)) / s
                } else {
                    first.voltage_at(r0)
                };
                let avg2 = if th < s {
                    second.voltage_at(r1)
                } else {
                    ((th - s) * second.voltage_at(r0) + (t - th) * second.voltage_at(r1)) / s
                };
                if (avg1 > v0) == (avg2 > v0) {
                    erased[idx] += 1;
                }
            }
        }
        for (analytic, hits) in [(q1e, erased[0]), (q0e, erased[1])] {
            let p_hat = hits as f64 / n as f64;
            let se = (p_hat * (1.0 - p_hat) / n as f64).sqrt();
            let tol = (3.0 * se).max(0.005);
            assert!(
                (analytic - p_hat).abs() <= tol,
                "analytic {analytic} vs mc {p_hat} (tol {tol})"
            );
        }
    }

    #[test]
    fn matrices_are_row_stochastic() {
        let bac = to_matrix(&ChannelParams::Bac { p10: 0.2, p01: 0.05 }).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(bac.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let baec = to_matrix(&ChannelParams::Baec { q1e: 0.3, q0e: 0.4 }).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(baec.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        // Cross-flip entries are exactly zero.
        assert_eq!(baec.row(0)[1], 0.0);
        assert_eq!(baec.row(1)[0], 0.0);
        // Zero parameters pass bits through untouched.
        let clean = to_matrix(&ChannelParams::Bac { p10: 0.0, p01: 0.0 }).unwrap();
        assert_eq!(clean.row(0), &[1.0, 0.0]);
        assert_eq!(clean.row(1), &[0.0, 1.0]);
        // Equal flips reduce to the symmetric channel.
        let bsc = to_matrix(&ChannelParams::Bac { p10: 0.1, p01: 0.1 }).unwrap();
        assert_eq!(bsc.row(0)[1], bsc.row(1)[0]);
        assert!(to_matrix(&ChannelParams::Bac { p10: 1.2, p01: 0.0 }).is_err());
    }

    #[test]
    fn capacity_of_the_noiseless_binary_channel() {
        let m = TransitionMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let res = arimoto_blahut(&m, 1e-9, 1000).unwrap();
        assert_abs_diff_eq!(res.capacity_bits, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn capacity_of_the_symmetric_channel_matches_closed_form() {
        let p = 0.11f64;
        let m = to_matrix(&ChannelParams::Bac { p10: p, p01: p }).unwrap();
        let res = arimoto_blahut(&m, 1e-9, 100_000).unwrap();
        let h2 = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        assert_abs_diff_eq!(res.capacity_bits, 1.0 - h2, epsilon = 1e-5);
        assert_abs_diff_eq!(res.capacity_bits, 0.5000839957760556, epsilon = 1e-5);
        // The optimum of a symmetric channel is the uniform input.
        assert_abs_diff_eq!(res.input_dist[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn capacity_of_the_erasure_channel_matches_closed_form() {
        let eps = 0.3;
        let m = to_matrix(&ChannelParams::Baec { q1e: eps, q0e: eps }).unwrap();
        let res = arimoto_blahut(&m, 1e-9, 100_000).unwrap();
        assert_abs_diff_eq!(res.capacity_bits, 1.0 - eps, epsilon = 1e-6);
    }

    #[test]
    fn capacity_is_invariant_under_relabeling() {
        let m = TransitionMatrix::new(vec![
            vec![0.7, 0.1, 0.2],
            vec![0.05, 0.85, 0.1],
        ])
        .unwrap();
        let base = arimoto_blahut(&m, 1e-10, 100_000).unwrap();
        // Permute output columns.
        let cols = TransitionMatrix::new(vec![
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.05, 0.85],
        ])
        .unwrap();
        let permuted = arimoto_blahut(&cols, 1e-10, 100_000).unwrap();
        assert_abs_diff_eq!(base.capacity_bits, permuted.capacity_bits, epsilon = 1e-9);
        // Swap input rows; the maximizing distribution swaps with them.
        let rows = TransitionMatrix::new(vec![
            vec![0.05, 0.85, 0.1],
            vec![0.7, 0.1, 0.2],
        ])
        .unwrap();
        let swapped = arimoto_blahut(&rows, 1e-10, 100_000).unwrap();
        assert_abs_diff_eq!(base.capacity_bits, swapped.capacity_bits, epsilon = 1e-9);
        assert_abs_diff_eq!(base.input_dist[0], swapped.input_dist[1], epsilon = 1e-6);
    }

    #[test]
    fn capacity_solver_error_paths() {
        assert!(TransitionMatrix::new(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        let m = to_matrix(&ChannelParams::Bac { p10: 0.11, p01: 0.04 }).unwrap();
        let err = arimoto_blahut(&m, 1e-12, 2).unwrap_err();
        match err {
            Error::NoConvergence { iterations, gap_bits } => {
                assert_eq!(iterations, 2);
                assert!(gap_bits > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn average_capacity_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        for _ in 0..100 {
            let c: f64 = rng.random();
            assert_eq!(average_capacity(c, 0.0), 1.0);
            assert_eq!(average_capacity(c, 1.0), c);
        }
        assert_eq!(average_capacity(1.0, 0.37), 1.0);
    }

    #[test]
    fn sweep_respects_ranges_and_orderings() {
        let (g, pilot) = setup();
        let quad = QuadratureSpec { nodes_r0: 32, nodes_theta: 32 };
        for family in [Family::FixedRd, Family::FixedVa] {
            let points = delta_sweep(family, &g, &pilot, 4, &quad).unwrap();
            assert_eq!(points.len(), 4);
            let mut prev_delta = 0.0;
            for p in &points {
                assert!(p.delta > prev_delta);
                prev_delta = p.delta;
                assert_relative_eq!(p.delta_h, p.delta, max_relative = 1e-6);
                assert_relative_eq!(p.delta_l, p.delta, max_relative = 1e-6);
                assert!(crate::space::in_space(&p.x_h, &g));
                assert!(crate::space::in_space(&p.x_l, &g));
                assert!(crate::space::in_region_high(&p.x_h, &pilot, &g));
                assert!(crate::space::in_region_low(&p.x_l, &pilot, &g));
                match family {
                    Family::FixedRd => {
                        assert!(p.x_h.v_a > 400.0 && p.x_h.v_a <= 402.0 + 1e-9);
                        assert!(p.x_l.v_a < 400.0 && p.x_l.v_a >= 396.0);
                    }
                    Family::FixedVa => {
                        assert!(p.x_h.r_da < pilot.r_da && p.x_h.r_da >= 0.8 - 1e-9);
                        assert!(p.x_l.r_da > pilot.r_da && p.x_l.r_da <= 2.5 + 1e-9);
                    }
                    Family::Custom => unreachable!(),
                }
                assert!(p.c_baec_bits > p.c_bac_bits);
                for prob in [p.p10, p.p01, p.q1e, p.q0e] {
                    assert!((0.0..=1.0).contains(&prob));
                }
            }
        }
    }
}
