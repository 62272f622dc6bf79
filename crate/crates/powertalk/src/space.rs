//! Signaling-space geometry.
//!
//! A droop pair is admissible when the bus voltage and the transmitter
//! current stay inside their limits for every load in `[r_min, r_max]`.
//! Because the bus voltage is monotone in the load, each constraint binds
//! at an extreme load and the admissible set is cut out by four straight
//! lines in the `(r_da, v_a)` plane. On top of the region tests this
//! module provides the boundary polylines for plotting, the high/low
//! sub-regions relative to a pilot, and the average relative power
//! deviation that prices a symbol against the nominal operating point.

use crate::grid::{GridConfig, Symbol};
use crate::load::LoadDistribution;
use crate::parallel::{run_trials, trial_rng};
use crate::quad::GaussLegendre;
use crate::Error;

/// Default number of load-grid points for the high/low region tests.
const REGION_GRID_POINTS: usize = 1001;

/// Voltage-constraint bounds on `v_a` for a given `r_da`: the bus voltage
/// touches `v_min` at the smallest load and `v_max` at the largest.
pub fn voltage_bounds(r_da: f64, g: &GridConfig) -> (f64, f64) {
    let rdb = g.unit_b.r_d;
    let v_b = g.unit_b.v_ref;
    let lo = r_da * (g.v_min / g.r_min + (g.v_min - v_b) / rdb) + g.v_min;
    let hi = r_da * (g.v_max / g.r_max + (g.v_max - v_b) / rdb) + g.v_max;
    (lo, hi)
}

/// Current-constraint bounds on `v_a` for a given `r_da`: the output
/// current reaches its maximum at the smallest load and its minimum at the
/// largest.
pub fn current_bounds(r_da: f64, g: &GridConfig) -> (f64, f64) {
    let rdb = g.unit_b.r_d;
    let v_b = g.unit_b.v_ref;
    let lo = (v_b / rdb) / (1.0 / rdb + 1.0 / g.r_max);
    let hi = r_da * g.i_a_max + (g.i_a_max + v_b / rdb) / (1.0 / g.r_min + 1.0 / rdb);
    (lo, hi)
}

/// Whether the bus voltage stays within `[v_min, v_max]` for every
/// admissible load. Boundaries are inclusive.
pub fn in_voltage_region(x: &Symbol, g: &GridConfig) -> bool {
    let (lo, hi) = voltage_bounds(x.r_da, g);
    lo <= x.v_a && x.v_a <= hi
}

/// Whether the transmitter current stays within `[0, i_a_max]` for every
/// admissible load. Boundaries are inclusive.
pub fn in_current_region(x: &Symbol, g: &GridConfig) -> bool {
    let (lo, hi) = current_bounds(x.r_da, g);
    lo <= x.v_a && x.v_a <= hi
}

/// Full signaling-space membership: both constraints at once.
pub fn in_space(x: &Symbol, g: &GridConfig) -> bool {
    in_voltage_region(x, g) && in_current_region(x, g)
}

/// Whether `x` drives the bus strictly above the pilot level for every
/// load on a dense grid over `[r_min, r_max]` (1001 points).
pub fn in_region_high(x: &Symbol, pilot: &Symbol, g: &GridConfig) -> bool {
    in_region_high_with(x, pilot, g, REGION_GRID_POINTS)
}

/// Like [`in_region_high`] with an explicit grid density.
pub fn in_region_high_with(x: &Symbol, pilot: &Symbol, g: &GridConfig, n: usize) -> bool {
    ordered_on_grid(x, pilot, g, n, |vx, vp| vx > vp)
}

/// Whether `x` drives the bus strictly below the pilot level for every
/// load on a dense grid over `[r_min, r_max]` (1001 points).
pub fn in_region_low(x: &Symbol, pilot: &Symbol, g: &GridConfig) -> bool {
    in_region_low_with(x, pilot, g, REGION_GRID_POINTS)
}

/// Like [`in_region_low`] with an explicit grid density.
pub fn in_region_low_with(x: &Symbol, pilot: &Symbol, g: &GridConfig, n: usize) -> bool {
    ordered_on_grid(x, pilot, g, n, |vx, vp| vx < vp)
}

fn ordered_on_grid(
    x: &Symbol,
    pilot: &Symbol,
    g: &GridConfig,
    n: usize,
    cmp: impl Fn(f64, f64) -> bool,
) -> bool {
    let rx = x.response(g);
    let rp = pilot.response(g);
    if g.r_min == g.r_max {
        return cmp(rx.voltage_at(g.r_min), rp.voltage_at(g.r_min));
    }
    let n = n.max(2);
    (0..n).all(|i| {
        let r = g.r_min + (g.r_max - g.r_min) * i as f64 / (n - 1) as f64;
        cmp(rx.voltage_at(r), rp.voltage_at(r))
    })
}

/// Region selector for [`Region`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    /// Voltage constraint only.
    Voltage,
    /// Current constraint only.
    Current,
    /// Intersection of both constraints.
    Full,
    /// Strictly above the pilot level for every admissible load.
    High,
    /// Strictly below the pilot level for every admissible load.
    Low,
}

/// A membership test bundled with its grid (and pilot, for the high/low
/// kinds).
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub kind: RegionKind,
    pub grid: GridConfig,
    pub pilot: Option<Symbol>,
}

impl Region {
    pub fn new(kind: RegionKind, grid: GridConfig, pilot: Option<Symbol>) -> Result<Self, Error> {
        if matches!(kind, RegionKind::High | RegionKind::Low) && pilot.is_none() {
            return Err(Error::domain("high/low regions require a pilot symbol"));
        }
        Ok(Region { kind, grid, pilot })
    }

    pub fn contains(&self, x: &Symbol) -> bool {
        match self.kind {
            RegionKind::Voltage => in_voltage_region(x, &self.grid),
            RegionKind::Current => in_current_region(x, &self.grid),
            RegionKind::Full => in_space(x, &self.grid),
            RegionKind::High => in_region_high(x, &self.pilot.unwrap(), &self.grid),
            RegionKind::Low => in_region_low(x, &self.pilot.unwrap(), &self.grid),
        }
    }
}

/// Which bounding line of the signaling space a polyline belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Bus voltage equals `v_min` at the smallest load.
    VoltageLower,
    /// Bus voltage equals `v_max` at the largest load.
    VoltageUpper,
    /// Output current is zero at the largest load.
    CurrentLower,
    /// Output current equals `i_a_max` at the smallest load.
    CurrentUpper,
}

/// One bounding line sampled where it actually bounds the region.
#[derive(Debug, Clone)]
pub struct BoundaryLine {
    pub kind: BoundaryKind,
    /// `(r_da, v_a)` points, all inside the closed signaling space.
    pub points: Vec<(f64, f64)>,
}

/// `v_a = slope * r_da + intercept` for one bounding line.
fn line_coeffs(kind: BoundaryKind, g: &GridConfig) -> (f64, f64) {
    match kind {
        BoundaryKind::VoltageLower => {
            let (lo, _) = voltage_bounds(1.0, g);
            let (lo0, _) = voltage_bounds(0.0, g);
            (lo - lo0, lo0)
        }
        BoundaryKind::VoltageUpper => {
            let (_, hi) = voltage_bounds(1.0, g);
            let (_, hi0) = voltage_bounds(0.0, g);
            (hi - hi0, hi0)
        }
        BoundaryKind::CurrentLower => {
            let (lo, _) = current_bounds(0.0, g);
            (0.0, lo)
        }
        BoundaryKind::CurrentUpper => {
            let (_, hi) = current_bounds(1.0, g);
            let (_, hi0) = current_bounds(0.0, g);
            (hi - hi0, hi0)
        }
    }
}

/// Boundary value through the same expressions the membership tests use,
/// so sampled points stay inside the closed region bit for bit.
fn line_value(kind: BoundaryKind, g: &GridConfig, r_da: f64) -> f64 {
    match kind {
        BoundaryKind::VoltageLower => voltage_bounds(r_da, g).0,
        BoundaryKind::VoltageUpper => voltage_bounds(r_da, g).1,
        BoundaryKind::CurrentLower => current_bounds(r_da, g).0,
        BoundaryKind::CurrentUpper => current_bounds(r_da, g).1,
    }
}

/// Intersect `interval` with `{ r : slope * r + intercept >= 0 }`.
fn clip_halfline(interval: (f64, f64), slope: f64, intercept: f64) -> (f64, f64) {
    let (lo, hi) = interval;
    if slope == 0.0 {
        if intercept >= 0.0 {
            (lo, hi)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        }
    } else {
        let root = -intercept / slope;
        if slope > 0.0 {
            (lo.max(root), hi)
        } else {
            (lo, hi.min(root))
        }
    }
}

/// The four bounding lines of the signaling space, each sampled at
/// `n_points` values of `r_da` over the stretch where it is the active
/// boundary. Lines that never bound the region come back empty.
pub fn boundary_curves(g: &GridConfig, n_points: usize) -> Result<Vec<BoundaryLine>, Error> {
    if n_points < 2 {
        return Err(Error::domain("boundary sampling needs at least 2 points"));
    }
    g.validate()?;
    let kinds = [
        BoundaryKind::VoltageLower,
        BoundaryKind::VoltageUpper,
        BoundaryKind::CurrentLower,
        BoundaryKind::CurrentUpper,
    ];
    let mut lines = Vec::with_capacity(4);
    for kind in kinds {
        let (s, t) = line_coeffs(kind, g);
        let mut interval = (1e-12, f64::INFINITY);
        for other in kinds {
            if other == kind {
                continue;
            }
            let (so, to) = line_coeffs(other, g);
            let is_lower = matches!(
                other,
                BoundaryKind::VoltageLower | BoundaryKind::CurrentLower
            );
            // Stay above the other lower bounds and below the other uppers.
            interval = if is_lower {
                clip_halfline(interval, s - so, t - to)
            } else {
                clip_halfline(interval, so - s, to - t)
            };
        }
        let (lo, hi) = interval;
        let mut points = Vec::new();
        if hi.is_finite() && hi > lo {
            // Pull the endpoints marginally inside so corner points survive
            // floating-point comparison against the neighboring lines.
            let margin = (hi - lo) * 1e-9;
            let (lo, hi) = (lo + margin, hi - margin);
            for i in 0..n_points {
                let r = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
                points.push((r, line_value(kind, g, r)));
            }
        }
        lines.push(BoundaryLine { kind, points });
    }
    Ok(lines)
}

/// How the expectation over the load is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviationMethod {
    /// Gauss-Legendre quadrature over the load support.
    Quadrature,
    /// Seeded Monte Carlo; deterministic for a fixed seed regardless of
    /// thread count.
    MonteCarlo { seed: u64 },
}

/// Inputs of the power-deviation metric.
#[derive(Debug, Clone, Copy)]
pub struct DeviationSpec {
    /// Nominal operating point.
    pub pilot: Symbol,
    pub load_dist: LoadDistribution,
    pub method: DeviationMethod,
    /// Quadrature nodes or Monte Carlo samples, at least 16.
    pub samples_or_nodes: usize,
}

impl DeviationSpec {
    /// Quadrature evaluation with the default 64 nodes.
    pub fn quadrature(pilot: Symbol, load_dist: LoadDistribution) -> Self {
        DeviationSpec {
            pilot,
            load_dist,
            method: DeviationMethod::Quadrature,
            samples_or_nodes: 64,
        }
    }

    pub fn monte_carlo(pilot: Symbol, load_dist: LoadDistribution, samples: usize, seed: u64) -> Self {
        DeviationSpec {
            pilot,
            load_dist,
            method: DeviationMethod::MonteCarlo { seed },
            samples_or_nodes: samples,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.samples_or_nodes < 16 {
            return Err(Error::domain("deviation evaluation needs at least 16 nodes/samples"));
        }
        Ok(())
    }
}

/// Average relative power deviation of `x` against the pilot:
/// `sqrt(E[(P(x,r) - P(x0,r))^2]) / E[P(x0,r)]` with `P = v*^2 / r`,
/// averaged over the load distribution. Dimensionless; multiply by 100 for
/// percent.
pub fn power_deviation(x: &Symbol, spec: &DeviationSpec, g: &GridConfig) -> Result<f64, Error> {
    spec.validate()?;
    x.validate()?;
    if !in_space(&spec.pilot, g) {
        return Err(Error::domain("pilot symbol is outside the signaling space"));
    }
    let rx = x.response(g);
    let r0 = spec.pilot.response(g);
    let power = |resp: &crate::grid::BusResponse, r: f64| {
        let v = resp.voltage_at(r);
        v * v / r
    };
    let (lo, hi) = spec.load_dist.bounds();
    if spec.load_dist.is_degenerate() {
        let dp = power(&rx, lo) - power(&r0, lo);
        return Ok(dp.abs() / power(&r0, lo));
    }
    let (mean_sq, mean_p0) = match spec.method {
        DeviationMethod::Quadrature => {
            let gl = GaussLegendre::new(spec.samples_or_nodes);
            let mean_sq = gl.integrate(lo, hi, |r| {
                let dp = power(&rx, r) - power(&r0, r);
                spec.load_dist.pdf(r) * dp * dp
            });
            let mean_p0 = gl.integrate(lo, hi, |r| spec.load_dist.pdf(r) * power(&r0, r));
            (mean_sq, mean_p0)
        }
        DeviationMethod::MonteCarlo { seed } => {
            const BATCH: usize = 4096;
            let n = spec.samples_or_nodes;
            let batches = n.div_ceil(BATCH) as u64;
            let dist = spec.load_dist;
            let partials = run_trials(batches, |b| {
                let mut rng = trial_rng(seed, b);
                let count = BATCH.min(n - (b as usize) * BATCH);
                let (mut sq, mut p0) = (0.0, 0.0);
                for _ in 0..count {
                    let r = dist.sample(&mut rng);
                    let dp = power(&rx, r) - power(&r0, r);
                    sq += dp * dp;
                    p0 += power(&r0, r);
                }
                (sq, p0)
            });
            let (sq, p0) = partials
                .into_iter()
                .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
            (sq / n as f64, p0 / n as f64)
        }
    };
    Ok(mean_sq.sqrt() / mean_p0)
}
