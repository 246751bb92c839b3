//! Boltzmann-rational transition kernel toward a single goal.
//!
//! A move from `c` to a successor `c'` is penalized by its progress cost
//! `step_cost(c, c') + dist(c') - dist(c)`, which is zero exactly on
//! shortest-path moves (and on the stay move). The kernel assigns each
//! successor a weight `exp(-alpha * progress_cost)` and normalizes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, DistanceField, GridMap, Successors};

/// Inverse-temperature of the kernel; larger is more goal-directed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Alpha(value))
        } else {
            Err(Error::Input(format!("alpha must be finite and non-negative, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Progress cost of moving `from -> to` relative to the field's goal.
///
/// Returns `Ok(None)` when either endpoint cannot reach the goal.
pub fn dbar(map: &GridMap, field: &DistanceField, from: Cell, to: Cell) -> Result<Option<f64>> {
    let cost = map.step_cost(from, to)?;
    let d0 = field.get(map, from);
    let d1 = field.get(map, to);
    if !d0.is_finite() || !d1.is_finite() {
        return Ok(None);
    }
    Ok(Some((cost + d1) - d0))
}

/// Progress costs of every successor of `c`, `INFINITY` where unreachable.
#[inline]
pub(crate) fn progress_costs(map: &GridMap, field: &DistanceField, c: Cell) -> (Successors, [f64; 9]) {
    let succ = map.successors_unchecked(c);
    let d0 = field.get(map, c);
    let mut costs = [f64::INFINITY; 9];
    for (k, &n) in succ.iter().enumerate() {
        let d1 = field.get(map, n);
        if d1.is_finite() {
            costs[k] = (map.move_cost(c, n) + d1) - d0;
        }
    }
    (succ, costs)
}

/// Fills `out[..costs.len()]` with normalized Boltzmann weights.
///
/// Returns `false` if every successor is unreachable.
#[inline]
pub(crate) fn boltzmann(costs: &[f64], alpha: f64, out: &mut [f64]) -> bool {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return false;
    }
    let mut total = 0.0;
    for (w, &c) in out.iter_mut().zip(costs) {
        *w = if c.is_finite() { (-alpha * (c - min)).exp() } else { 0.0 };
        total += *w;
    }
    for w in out.iter_mut().take(costs.len()) {
        *w /= total;
    }
    true
}

/// One-step transition distribution from `base` toward one goal.
#[derive(Debug, Clone, Copy)]
pub struct StepDistribution {
    pub base: Cell,
    pub goal_id: usize,
    support: Successors,
    probs: [f64; 9],
}

impl StepDistribution {
    pub fn support(&self) -> &[Cell] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs[..self.support.len()]
    }

    pub fn prob_of(&self, c: Cell) -> f64 {
        self.support
            .iter()
            .position(|&s| s == c)
            .map_or(0.0, |k| self.probs[k])
    }
}

pub fn step_distribution(
    map: &GridMap,
    field: &DistanceField,
    goal_id: usize,
    c: Cell,
    alpha: Alpha,
) -> Result<StepDistribution> {
    map.check_free(c)?;
    if !field.get(map, c).is_finite() {
        return Err(Error::Model(format!("{:?} cannot reach goal {goal_id}", c.xy())));
    }
    let (support, costs) = progress_costs(map, field, c);
    let mut probs = [0.0; 9];
    if !boltzmann(&costs[..support.len()], alpha.value(), &mut probs) {
        return Err(Error::Model(format!("no successor of {:?} reaches goal {goal_id}", c.xy())));
    }
    Ok(StepDistribution {
        base: c,
        goal_id,
        support,
        probs,
    })
}

/// Inverse-CDF draw over a probability vector.
#[inline]
pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

pub fn sample_step<R: Rng + ?Sized>(rng: &mut R, dist: &StepDistribution) -> Cell {
    dist.support[sample_index(rng, dist.probs())]
}
