//! Seeded sampling of Brownian bridges and information processes.
//!
//! Every path draws from its own counter-based substream keyed by
//! `(seed, lane, path index)`, so a bundle is identical however the paths
//! are batched or spread across threads.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain_err, Result};

/// Substream lanes. Distinct lanes give independent streams for the same
/// path index.
pub mod lanes {
    pub const BRIDGE: u64 = 1;
    pub const BRIDGE_PARTNER: u64 = 2;
    pub const FACTOR: u64 = 3;
    pub const AUX: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream for path `index` in `lane` under `seed`.
///
/// ChaCha keyed by `(seed, lane)` with the path index as its stream id.
pub fn substream(seed: u64, lane: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ lane.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// One standard normal draw.
#[inline]
pub fn std_normal_sample<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// A strictly increasing time grid from 0 to the horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return domain_err("a time grid needs at least two points");
        }
        if points[0] != 0.0 {
            return domain_err(format!("a time grid starts at 0, got {}", points[0]));
        }
        if !points.iter().all(|t| t.is_finite()) || !points.windows(2).all(|w| w[0] < w[1]) {
            return domain_err("grid points must be finite and strictly increasing");
        }
        Ok(Self { points })
    }

    /// `steps` equal steps over `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
            return domain_err(format!(
                "uniform grid needs T > 0 and steps ≥ 1, got T={horizon}, steps={steps}"
            ));
        }
        let mut points: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        points[steps] = horizon;
        Self::new(points)
    }

    /// A uniform grid with extra points merged in (for example payment
    /// dates or an option maturity).
    pub fn uniform_with(horizon: f64, steps: usize, extra: &[f64]) -> Result<Self> {
        let mut points = Self::uniform(horizon, steps)?.points;
        for &e in extra {
            if e > 0.0 && e < horizon {
                points.push(e);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Self::new(points)
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid has points")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == t)
    }
}

/// Parameters of an information process `ξ_t = σ t X + β_t` on `[0, T]`.
///
/// `sigma` is the information flow rate, in units of time^(-1/2) for a
/// dimensionless factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoProcessSpec {
    sigma: f64,
    horizon: f64,
}

impl InfoProcessSpec {
    pub fn new(sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return domain_err(format!("information flow rate must be finite and ≥ 0, got {sigma}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain_err(format!("horizon must be finite and > 0, got {horizon}"));
        }
        Ok(Self { sigma, horizon })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Variance `t(T − t)/T` of the bridge noise at time `t`.
    pub fn bridge_variance(&self, t: f64) -> f64 {
        t * (self.horizon - t) / self.horizon
    }

    /// Rough revelation timescale `1/(σ² Var[X])`.
    pub fn revelation_timescale(&self, factor_variance: f64) -> f64 {
        1.0 / (self.sigma * self.sigma * factor_variance)
    }
}

/// Sample paths on a common grid, with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
    seed: u64,
}

impl PathBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_count(&self) -> usize {
        self.values.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Values of every path at grid index `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|p| p[k]).collect()
    }

    /// Writes `time,path_0,…,path_{n-1}` with one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "time")?;
        for i in 0..self.values.len() {
            write!(out, ",path_{i}")?;
        }
        writeln!(out)?;
        for (k, t) in self.grid.points().iter().enumerate() {
            write!(out, "{t}")?;
            for p in &self.values {
                write!(out, ",{}", p[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One Brownian bridge path on `grid`, pinned to zero at both ends, drawn by
/// the exact forward transition of the pinned process:
/// `β_{t'} | β_t = b ~ N(b (T−t')/(T−t), (t'−t)(T−t')/(T−t))`.
pub fn bridge_path<R: rand::Rng + ?Sized>(grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let horizon = grid.horizon();
    let pts = grid.points();
    let mut out = Vec::with_capacity(pts.len());
    out.push(0.0);
    let mut b = 0.0;
    for w in pts.windows(2) {
        let (s, t) = (w[0], w[1]);
        if t >= horizon {
            b = 0.0;
        } else {
            let remaining = horizon - s;
            let mean = b * (horizon - t) / remaining;
            let var = (t - s) * (horizon - t) / remaining;
            b = mean + var.sqrt() * std_normal_sample(rng);
        }
        out.push(b);
    }
    out
}

fn bridge_for(grid: &TimeGrid, seed: u64, lane: u64, index: usize) -> Vec<f64> {
    bridge_path(grid, &mut substream(seed, lane, index as u64))
}

/// `n` independent Brownian bridges on `grid`.
pub fn sample_bridge_paths(grid: &TimeGrid, n: usize, seed: u64) -> Result<PathBundle> {
    if n == 0 {
        return domain_err("need at least one path");
    }
    let values = (0..n)
        .into_par_iter()
        .map(|i| bridge_for(grid, seed, lanes::BRIDGE, i))
        .collect();
    Ok(PathBundle {
        grid: grid.clone(),
        values,
        seed,
    })
}

/// Pairs of bridges with cross-correlation `rho` at every time.
///
/// The first bundle equals `sample_bridge_paths(grid, n, seed)`; the second
/// is `rho·first + √(1−rho²)·independent`.
pub fn sample_correlated_bridge_pairs(
    grid: &TimeGrid,
    rho: f64,
    n: usize,
    seed: u64,
) -> Result<(PathBundle, PathBundle)> {
    if !(-1.0..=1.0).contains(&rho) {
        return domain_err(format!("correlation must lie in [-1, 1], got {rho}"));
    }
    if n == 0 {
        return domain_err("need at least one path");
    }
    let mix = (1.0 - rho * rho).sqrt();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let first = bridge_for(grid, seed, lanes::BRIDGE, i);
            let other = bridge_for(grid, seed, lanes::BRIDGE_PARTNER, i);
            let second = first.iter().zip(&other).map(|(a, b)| rho * a + mix * b).collect();
            (first, second)
        })
        .collect();
    let (a, b) = pairs.into_iter().unzip();
    Ok((
        PathBundle {
            grid: grid.clone(),
            values: a,
            seed,
        },
        PathBundle {
            grid: grid.clone(),
            values: b,
            seed,
        },
    ))
}

/// Information-process paths `σ t x_i + β_t`, one per factor draw.
pub fn sample_information_paths(
    spec: &InfoProcessSpec,
    factor_draws: &[f64],
    grid: &TimeGrid,
    seed: u64,
) -> Result<PathBundle> {
    if factor_draws.is_empty() {
        return domain_err("need at least one factor draw");
    }
    if grid.horizon() != spec.horizon() {
        return domain_err(format!(
            "grid horizon {} differs from the process horizon {}",
            grid.horizon(),
            spec.horizon()
        ));
    }
    let sigma = spec.sigma();
    let values = factor_draws
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let bridge = bridge_for(grid, seed, lanes::BRIDGE, i);
            grid.points()
                .iter()
                .zip(bridge)
                .map(|(&t, b)| sigma * t * x + b)
                .collect()
        })
        .collect();
    Ok(PathBundle {
        grid: grid.clone(),
        values,
        seed,
    })
}

/// Sample mean and the standard error of that mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
