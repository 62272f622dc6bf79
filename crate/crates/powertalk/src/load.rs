//! Stochastic load model.
//!
//! The load value is drawn from a finite-support distribution, at most one
//! step change happens per bit interval, and the change instant within the
//! interval follows a truncated exponential law.

use rand::Rng;

use crate::Error;

/// Distribution of the load resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadDistribution {
    Uniform { r_min: f64, r_max: f64 },
}

impl LoadDistribution {
    /// Uniform distribution on `[r_min, r_max]`. A degenerate point mass
    /// (`r_min == r_max`) is allowed; it models a load that never moves.
    pub fn uniform(r_min: f64, r_max: f64) -> Result<Self, Error> {
        if !(r_min > 0.0) || !(r_max >= r_min) {
            return Err(Error::domain("uniform load support requires 0 < r_min <= r_max"));
        }
        Ok(LoadDistribution::Uniform { r_min, r_max })
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            LoadDistribution::Uniform { r_min, r_max } => (r_min, r_max),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo == hi
    }

    /// Cumulative distribution, clamped outside the support.
    pub fn cdf(&self, r: f64) -> f64 {
        match *self {
            LoadDistribution::Uniform { r_min, r_max } => {
                if r <= r_min {
                    if r_min == r_max && r >= r_max {
                        1.0
                    } else {
                        0.0
                    }
                } else if r >= r_max {
                    1.0
                } else {
                    (r - r_min) / (r_max - r_min)
                }
            }
        }
    }

    /// Density; zero outside the support. Degenerate supports have no
    /// density and return zero everywhere.
    pub fn pdf(&self, r: f64) -> f64 {
        match *self {
            LoadDistribution::Uniform { r_min, r_max } => {
                if r_min == r_max || r < r_min || r > r_max {
                    0.0
                } else {
                    1.0 / (r_max - r_min)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LoadDistribution::Uniform { r_min, r_max } => {
                if r_min == r_max {
                    r_min
                } else {
                    rng.random_range(r_min..r_max)
                }
            }
        }
    }
}

/// Per-bit-interval change occurrence. The change instant is truncated
/// exponential with rate `1/T`, conditioned on landing inside the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeProcess {
    /// Probability that the load changes within a bit interval.
    pub p_change: f64,
}

impl ChangeProcess {
    pub fn new(p_change: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&p_change) {
            return Err(Error::domain("p_change must lie in [0, 1]"));
        }
        Ok(ChangeProcess { p_change })
    }

    /// Inverse-cdf draw of the change instant on `[0, t_bit)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, t_bit: f64, rng: &mut R) -> Result<f64, Error> {
        if !(t_bit > 0.0) {
            return Err(Error::domain("bit interval must be positive"));
        }
        let u: f64 = rng.random();
        Ok(-t_bit * (1.0 - u * (1.0 - (-1.0f64).exp())).ln())
    }

    /// Draw the change event for one bit interval: with probability
    /// `p_change` a change at `theta` to a fresh load from `dist`.
    pub fn sample_change<R: Rng + ?Sized>(
        &self,
        dist: &LoadDistribution,
        t_bit: f64,
        rng: &mut R,
    ) -> Result<Option<LoadChange>, Error> {
        let u: f64 = rng.random();
        if u < self.p_change {
            let theta = self.sample_theta(t_bit, rng)?;
            let r1 = dist.sample(rng);
            Ok(Some(LoadChange { theta, r1 }))
        } else {
            Ok(None)
        }
    }
}

/// Conditional density of the change instant given that it falls in
/// `[0, t_bit)`: `(1/T) exp(-theta/T) / (1 - e^{-1})`.
pub fn theta_pdf(theta: f64, t_bit: f64) -> f64 {
    if theta < 0.0 || theta >= t_bit {
        return 0.0;
    }
    (1.0 / t_bit) * (-theta / t_bit).exp() / (1.0 - (-1.0f64).exp())
}

/// A single step change inside a bit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadChange {
    /// Change instant, seconds from the start of the bit interval.
    pub theta: f64,
    /// Load after the change, ohms.
    pub r1: f64,
}

/// Piecewise-constant load over one bit interval: at most one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadTrajectory {
    /// Load at the start of the interval, ohms.
    pub r0: f64,
    pub change: Option<LoadChange>,
}

impl LoadTrajectory {
    pub fn constant(r0: f64) -> Self {
        LoadTrajectory { r0, change: None }
    }

    /// Load value at time `t` from the start of the bit interval.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        match self.change {
            Some(c) if t >= c.theta => c.r1,
            _ => self.r0,
        }
    }

    /// Load at the end of the interval.
    pub fn final_load(&self) -> f64 {
        self.change.map_or(self.r0, |c| c.r1)
    }
}

/// Draw one bit interval's trajectory: fresh `r0`, then an optional change.
pub fn sample_trajectory<R: Rng + ?Sized>(
    proc: &ChangeProcess,
    dist: &LoadDistribution,
    t_bit: f64,
    rng: &mut R,
) -> Result<LoadTrajectory, Error> {
    let r0 = dist.sample(rng);
    let change = proc.sample_change(dist, t_bit, rng)?;
    Ok(LoadTrajectory { r0, change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_cdf_values() {
        let d = LoadDistribution::uniform(50.0, 250.0).unwrap();
        assert_eq!(d.cdf(50.0), 0.0);
        assert_eq!(d.cdf(150.0), 0.5);
        assert_eq!(d.cdf(300.0), 1.0);
        assert_eq!(d.cdf(10.0), 0.0);
    }

    #[test]
    fn degenerate_support() {
        let d = LoadDistribution::uniform(100.0, 100.0).unwrap();
        assert!(d.is_degenerate());
        assert_eq!(d.cdf(99.9), 0.0);
        assert_eq!(d.cdf(100.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(d.sample(&mut rng), 100.0);
    }

    #[test]
    fn theta_samples_stay_in_interval() {
        let proc = ChangeProcess::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = 0.02;
        for _ in 0..10_000 {
            let th = proc.sample_theta(t, &mut rng).unwrap();
            assert!((0.0..t).contains(&th));
        }
        assert!(proc.sample_theta(0.0, &mut rng).is_err());
    }

    #[test]
    fn theta_pdf_normalizes() {
        let t = 0.02;
        let gl = GaussLegendre::new(64);
        let mass = gl.integrate(0.0, t, |th| theta_pdf(th, t));
        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
    }

    // Two-sample Kolmogorov-Smirnov distance between the inverse-cdf sampler
    // and an independent rejection sampler (draw Exp(1/T), reject >= T).
    #[test]
    fn theta_sampler_matches_rejection_oracle() {
        let t = 0.02;
        let n = 1_000_000usize;
        let proc = ChangeProcess::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut inverse: Vec<f64> = (0..n)
            .map(|_| proc.sample_theta(t, &mut rng).unwrap())
            .collect();
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(23);
        let mut rejection: Vec<f64> = Vec::with_capacity(n);
        while rejection.len() < n {
            let u: f64 = oracle_rng.random();
            let x = -t * (1.0 - u).ln();
            if x < t {
                rejection.push(x);
            }
        }
        inverse.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        rejection.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < n {
            if inverse[i] <= rejection[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        assert!(ks < 0.002, "KS distance {ks}");
    }

    #[test]
    fn trajectory_change_fractions() {
        let dist = LoadDistribution::uniform(50.0, 250.0).unwrap();
        let t = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let never = ChangeProcess::new(0.0).unwrap();
        let always = ChangeProcess::new(1.0).unwrap();
        for _ in 0..10_000 {
            assert!(sample_trajectory(&never, &dist, t, &mut rng)
                .unwrap()
                .change
                .is_none());
        }
        let mut changed = 0usize;
        for _ in 0..100_000 {
            let traj = sample_trajectory(&always, &dist, t, &mut rng).unwrap();
            if traj.change.is_some() {
                changed += 1;
            }
        }
        assert_eq!(changed, 100_000);
    }

    // One-sample KS of the r0 and r1 marginals against the uniform cdf.
    #[test]
    fn trajectory_marginals_are_uniform() {
        let dist = LoadDistribution::uniform(50.0, 250.0).unwrap();
        let proc = ChangeProcess::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let n = 1_000_000usize;
        let mut r0s = Vec::with_capacity(n);
        let mut r1s = Vec::with_capacity(n);
        for _ in 0..n {
            let traj = sample_trajectory(&proc, &dist, 0.01, &mut rng).unwrap();
            r0s.push(traj.r0);
            r1s.push(traj.change.unwrap().r1);
        }
        for samples in [&mut r0s, &mut r1s] {
            samples.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ks: f64 = 0.0;
            for (i, &r) in samples.iter().enumerate() {
                let f = dist.cdf(r);
                ks = ks.max((f - i as f64 / n as f64).abs());
                ks = ks.max(((i + 1) as f64 / n as f64 - f).abs());
            }
            assert!(ks < 0.002, "KS distance {ks}");
        }
    }

    #[test]
    fn trajectory_values_follow_step() {
        let traj = LoadTrajectory {
            r0: 100.0,
            change: Some(LoadChange { theta: 0.005, r1: 200.0 }),
        };
        assert_eq!(traj.value_at(0.0), 100.0);
        assert_eq!(traj.value_at(0.0049), 100.0);
        assert_eq!(traj.value_at(0.005), 200.0);
        assert_eq!(traj.final_load(), 200.0);
        assert_eq!(LoadTrajectory::constant(80.0).value_at(1.0), 80.0);
    }

    #[test]
    fn change_process_validation() {
        assert!(ChangeProcess::new(-0.1).is_err());
        assert!(ChangeProcess::new(1.1).is_err());
        assert!(LoadDistribution::uniform(0.0, 10.0).is_err());
        assert!(LoadDistribution::uniform(20.0, 10.0).is_err());
    }
}
