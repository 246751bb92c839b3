//! Recursive joint posterior over the target's current goal and its
//! intention parameter.
//!
//! The goal follows a Markov chain with transition matrix `H`; alpha is a
//! static unknown represented, per goal, by weights on a fixed grid. Each
//! non-stationary observation runs the forward recursion on the joint
//! (goal, alpha-gridpoint) state:
//!
//! 1. goal prior: `prior[i] = sum_j H[j][i] * post[j]`
//! 2. alpha rows conditioned on the new goal: `row_i = sum_j row_j * H[j][i] * post[j] / prior[i]`
//! 3. likelihood: `L_i = sum_g row_i[g] * P(x_new | x_prev, goal_i, alpha_g)`
//! 4. `post[i] ∝ prior[i] * L_i`, `row_i[g] ∝ row_i[g] * P(x_new | .., alpha_g)`
//!
//! The four ablation variants differ only in the configuration: `B` and
//! `G` pin alpha to a single gridpoint, `B` and `A` use `H = I`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, DistanceField, GridMap};
use crate::kinematics::{progress_costs, Alpha};
use crate::parallel::{self, Execution};

/// Below this evolved goal prior the conditional alpha mixture is replaced
/// by the unconditional one.
pub const PRIOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct GoalSet {
    goals: Vec<Cell>,
}

impl GoalSet {
    pub fn new(map: &GridMap, goals: Vec<Cell>) -> Result<Self> {
        if goals.len() < 2 {
            return Err(Error::Input(format!("need at least 2 goals, got {}", goals.len())));
        }
        for (i, &g) in goals.iter().enumerate() {
            map.check_free(g)?;
            if goals[..i].contains(&g) {
                return Err(Error::Input(format!("duplicate goal {:?}", g.xy())));
            }
        }
        Ok(GoalSet { goals })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn get(&self, i: usize) -> Cell {
        self.goals[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.goals
    }
}

/// Map, candidate goals and one precomputed distance field per goal.
#[derive(Debug, Clone)]
pub struct World {
    pub map: GridMap,
    pub goals: GoalSet,
    pub fields: Vec<DistanceField>,
}

impl World {
    pub fn new(map: GridMap, goals: GoalSet) -> Result<Self> {
        let fields = parallel::map_slice(Execution::Parallel, goals.cells(), |&g| map.distance_field(g))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(World { map, goals, fields })
    }

    pub fn n_goals(&self) -> usize {
        self.goals.len()
    }
}

/// Row-stochastic goal transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalTransition {
    n: usize,
    h: Vec<f64>,
    identity: bool,
}

impl GoalTransition {
    pub fn identity(n: usize) -> Self {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        GoalTransition { n, h, identity: true }
    }

    /// `p_stay` on the diagonal, the remainder spread over the other goals.
    pub fn sticky(n: usize, p_stay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_stay) || n < 2 {
            return Err(Error::Input(format!("invalid p_stay {p_stay} for {n} goals")));
        }
        let off = (1.0 - p_stay) / (n - 1) as f64;
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { p_stay } else { off }).collect())
            .collect::<Vec<Vec<f64>>>();
        Self::from_rows(&rows)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut h = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Input(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Input(format!("row {i} sums to {s}")));
            }
            h.extend_from_slice(row);
        }
        let identity = (0..n).all(|i| (0..n).all(|j| h[i * n + j] == if i == j { 1.0 } else { 0.0 }));
        Ok(GoalTransition { n, h, identity })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Probability of switching from goal `from` to goal `to`.
    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.h[from * self.n + to]
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

/// Gridpoints carrying the discretized alpha density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    points: Vec<f64>,
    log_spaced: bool,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid::log_spaced(0.05, 200.0, 128).expect("valid default grid")
    }
}

impl AlphaGrid {
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::check_range(lo, hi, n)?;
        let (a, b) = (lo.ln(), hi.ln());
        let points = (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect();
        Self::from_points(points, true)
    }

    pub fn linear(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::check_range(lo, hi, n)?;
        let points = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        Self::from_points(points, false)
    }

    /// Degenerate single-point grid.
    pub fn point(alpha: Alpha) -> Self {
        AlphaGrid {
            points: vec![alpha.value()],
            log_spaced: false,
        }
    }

    pub fn from_points(points: Vec<f64>, log_spaced: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("alpha grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Input("alpha gridpoints must be finite and non-negative".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("alpha gridpoints must be strictly increasing".into()));
        }
        Ok(AlphaGrid { points, log_spaced })
    }

    fn check_range(lo: f64, hi: f64, n: usize) -> Result<()> {
        if n < 2 || !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Input(format!("invalid alpha grid [{lo}, {hi}] with {n} points")));
        }
        Ok(())
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

    pub fn is_log_spaced(&self) -> bool {
        self.log_spaced
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Fixed goal, fixed alpha.
    B,
    /// Fixed goal, adaptive alpha.
    A,
    /// Switching goal, fixed alpha.
    G,
    /// Switching goal, adaptive alpha.
    P,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::B, Variant::A, Variant::G, Variant::P];

    pub fn adapts_alpha(self) -> bool {
        matches!(self, Variant::A | Variant::P)
    }

    pub fn switches_goal(self) -> bool {
        matches!(self, Variant::G | Variant::P)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::B => "B",
            Variant::A => "A",
            Variant::G => "G",
            Variant::P => "P",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "B" | "b" => Ok(Variant::B),
            "A" | "a" => Ok(Variant::A),
            "G" | "g" => Ok(Variant::G),
            "P" | "p" => Ok(Variant::P),
            other => Err(Error::Config(format!("unknown method '{other}' (expected B, A, G or P)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior { shape: 3.0, scale: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Expectation,
    Mode,
}

pub const DEFAULT_P_STAY: f64 = 0.9975;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub variant: Variant,
    /// Used by `B` and `G`.
    pub fixed_alpha: Alpha,
    /// Used by `A` and `P`.
    pub alpha_prior: GammaPrior,
    /// Diagonal of `H`, used by `G` and `P`.
    pub p_stay: f64,
    /// Used by `A` and `P`.
    pub alpha_grid: AlphaGrid,
    pub estimator: Estimator,
}

impl MethodConfig {
    pub fn new(variant: Variant, fixed_alpha: f64) -> Result<Self> {
        Ok(MethodConfig {
            variant,
            fixed_alpha: Alpha::new(fixed_alpha)?,
            alpha_prior: GammaPrior::default(),
            p_stay: DEFAULT_P_STAY,
            alpha_grid: AlphaGrid::default(),
            estimator: Estimator::default(),
        })
    }

    /// Grid actually carried by the belief.
    pub fn effective_grid(&self) -> AlphaGrid {
        if self.variant.adapts_alpha() {
            self.alpha_grid.clone()
        } else {
            AlphaGrid::point(self.fixed_alpha)
        }
    }

    pub fn transition(&self, n_goals: usize) -> Result<GoalTransition> {
        if self.variant.switches_goal() {
            GoalTransition::sticky(n_goals, self.p_stay)
        } else {
            Ok(GoalTransition::identity(n_goals))
        }
    }
}

/// Posterior over goals plus per-goal alpha weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    goal_post: Vec<f64>,
    alpha_w: Vec<f64>,
    n_points: usize,
    pub last_state: Cell,
    pub step: u64,
    /// Set when the last observation had zero likelihood under every goal.
    pub degenerate: bool,
}

impl Belief {
    pub fn from_parts(goal_post: Vec<f64>, alpha_w: Vec<Vec<f64>>, last_state: Cell) -> Result<Self> {
        let n = goal_post.len();
        if alpha_w.len() != n || n == 0 {
            return Err(Error::Input("alpha rows must match the goal count".into()));
        }
        let g = alpha_w[0].len();
        if alpha_w.iter().any(|r| r.len() != g) || g == 0 {
            return Err(Error::Input("alpha rows must share one length".into()));
        }
        Ok(Belief {
            goal_post,
            alpha_w: alpha_w.concat(),
            n_points: g,
            last_state,
            step: 0,
            degenerate: false,
        })
    }

    pub fn goal_post(&self) -> &[f64] {
        &self.goal_post
    }

    pub fn n_goals(&self) -> usize {
        self.goal_post.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn alpha_row(&self, goal: usize) -> &[f64] {
        &self.alpha_w[goal * self.n_points..(goal + 1) * self.n_points]
    }

    pub fn alpha_weights(&self) -> &[f64] {
        &self.alpha_w
    }
}

/// Prior belief: uniform over goals, discretized Gamma (or a point mass) over alpha.
pub fn init_belief(cfg: &MethodConfig, goals: &GoalSet, x0: Cell) -> Result<Belief> {
    prior_belief(&cfg.effective_grid(), cfg.alpha_prior, goals.len(), x0)
}

fn prior_belief(grid: &AlphaGrid, prior: GammaPrior, n: usize, x0: Cell) -> Result<Belief> {
    let row = if grid.len() == 1 {
        vec![1.0]
    } else {
        gamma_weights(prior, grid)?
    };
    Ok(Belief {
        goal_post: vec![1.0 / n as f64; n],
        alpha_w: row.repeat(n),
        n_points: grid.len(),
        last_state: x0,
        step: 0,
        degenerate: false,
    })
}

fn gamma_weights(prior: GammaPrior, grid: &AlphaGrid) -> Result<Vec<f64>> {
    let gamma = Gamma::new(prior.shape, 1.0 / prior.scale)
        .map_err(|e| Error::Input(format!("invalid gamma prior: {e}")))?;
    let mut w: Vec<f64> = grid.points().iter().map(|&a| gamma.pdf(a)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 && s.is_finite() {
        w.iter_mut().for_each(|v| *v /= s);
    } else {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|v| *v = u);
    }
    Ok(w)
}

/// One-step goal prediction `prior[i] = sum_j H[j][i] post[j]`.
pub fn evolve_goal_prior(b: &Belief, h: &GoalTransition) -> Vec<f64> {
    if h.is_identity() {
        return b.goal_post.clone();
    }
    let n = b.n_goals();
    (0..n)
        .map(|i| (0..n).map(|j| h.get(j, i) * b.goal_post[j]).sum())
        .collect()
}

/// Alpha rows conditioned on the evolved goal, row-major `N x G`.
pub fn evolve_alpha(b: &Belief, h: &GoalTransition, prior: &[f64]) -> Vec<f64> {
    if h.is_identity() {
        return b.alpha_w.clone();
    }
    let n = b.n_goals();
    let g = b.n_points;
    let mut out = vec![0.0; n * g];
    for i in 0..n {
        let row = &mut out[i * g..(i + 1) * g];
        let conditional = prior[i] >= PRIOR_FLOOR;
        for j in 0..n {
            let c = if conditional {
                h.get(j, i) * b.goal_post[j] / prior[i]
            } else {
                b.goal_post[j]
            };
            if c == 0.0 {
                continue;
            }
            for (o, &w) in row.iter_mut().zip(b.alpha_row(j)) {
                *o += c * w;
            }
        }
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    out
}

/// Per-gridpoint probabilities of the observed move toward one goal.
///
/// Writes `P(x_new | x_prev, goal, alpha_g)` into `out` and returns `false`
/// if `x_new` is not a successor of `x_prev`.
fn move_likelihoods(
    map: &GridMap,
    field: &DistanceField,
    x_prev: Cell,
    x_new: Cell,
    points: &[f64],
    out: &mut [f64],
) -> bool {
    let (succ, costs) = progress_costs(map, field, x_prev);
    let Some(sel) = succ.iter().position(|&c| c == x_new) else {
        return false;
    };
    let costs = &costs[..succ.len()];
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || !costs[sel].is_finite() {
        out.iter_mut().for_each(|v| *v = 0.0);
        return true;
    }
    let sel_cost = costs[sel] - min;
    for (o, &a) in out.iter_mut().zip(points) {
        let mut k = 0.0;
        for &c in costs {
            if c.is_finite() {
                k += (-a * (c - min)).exp();
            }
        }
        *o = (-a * sel_cost).exp() / k;
    }
    true
}

/// Grid quadrature of the observation likelihood for one goal.
///
/// Returns the scalar likelihood and the per-gridpoint move probabilities.
pub fn observation_likelihood(
    world: &World,
    x_prev: Cell,
    x_new: Cell,
    goal_id: usize,
    grid: &AlphaGrid,
    alpha_row: &[f64],
) -> Result<(f64, Vec<f64>)> {
    world.map.check_free(x_prev)?;
    let mut per_point = vec![0.0; grid.len()];
    if !move_likelihoods(&world.map, &world.fields[goal_id], x_prev, x_new, grid.points(), &mut per_point) {
        return Err(Error::ObservationGap {
            from: x_prev.xy(),
            to: x_new.xy(),
        });
    }
    let l = per_point.iter().zip(alpha_row).map(|(p, w)| p * w).sum();
    Ok((l, per_point))
}

/// A method configuration resolved against a world: the concrete grid and `H`.
#[derive(Debug, Clone)]
pub struct Method {
    pub cfg: MethodConfig,
    pub grid: AlphaGrid,
    pub h: GoalTransition,
    pub exec: Execution,
}

impl Method {
    pub fn new(cfg: MethodConfig, n_goals: usize) -> Result<Self> {
        let grid = cfg.effective_grid();
        let h = cfg.transition(n_goals)?;
        Ok(Method {
            cfg,
            grid,
            h,
            exec: Execution::Serial,
        })
    }

    /// Overrides the goal transition matrix.
    pub fn with_transition(mut self, h: GoalTransition) -> Self {
        self.h = h;
        self
    }

    /// Overrides the alpha grid (the belief is then initialized on it).
    pub fn with_grid(mut self, grid: AlphaGrid) -> Self {
        self.cfg.alpha_grid = grid.clone();
        self.grid = grid;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn variant(&self) -> Variant {
        self.cfg.variant
    }

    pub fn init_belief(&self, world: &World, x0: Cell) -> Result<Belief> {
        world.map.check_free(x0)?;
        prior_belief(&self.grid, self.cfg.alpha_prior, world.n_goals(), x0)
    }

    /// Incorporates one observation; a stationary observation only bumps the step.
    pub fn update(&self, world: &World, b: &Belief, x_new: Cell) -> Result<Belief> {
        world.map.check_free(x_new)?;
        if b.n_points != self.grid.len() || b.n_goals() != world.n_goals() {
            return Err(Error::Input("belief does not match the method configuration".into()));
        }
        if x_new == b.last_state {
            let mut next = b.clone();
            next.step += 1;
            return Ok(next);
        }
        let x_prev = b.last_state;
        if !world.map.successors_unchecked(x_prev).contains(&x_new) {
            return Err(Error::ObservationGap {
                from: x_prev.xy(),
                to: x_new.xy(),
            });
        }
        let n = b.n_goals();
        let g = b.n_points;
        let prior = evolve_goal_prior(b, &self.h);
        let evolved = evolve_alpha(b, &self.h, &prior);
        let points = self.grid.points();

        // per goal: (likelihood, updated alpha row)
        let per_goal = parallel::map_indexed(self.exec, n, |i| {
            let row = &evolved[i * g..(i + 1) * g];
            let mut p = vec![0.0; g];
            move_likelihoods(&world.map, &world.fields[i], x_prev, x_new, points, &mut p);
            let mut l = 0.0;
            for (pg, &w) in p.iter_mut().zip(row) {
                *pg *= w;
                l += *pg;
            }
            if l > 0.0 {
                p.iter_mut().for_each(|v| *v /= l);
            } else {
                p.copy_from_slice(row);
            }
            (l, p)
        });

        let mut post: Vec<f64> = prior.iter().zip(&per_goal).map(|(pr, (l, _))| pr * l).collect();
        let z: f64 = post.iter().sum();
        let mut next = Belief {
            goal_post: Vec::new(),
            alpha_w: Vec::with_capacity(n * g),
            n_points: g,
            last_state: x_new,
            step: b.step + 1,
            degenerate: false,
        };
        if z > 0.0 && z.is_finite() {
            post.iter_mut().for_each(|v| *v /= z);
            next.goal_post = post;
            for (_, row) in &per_goal {
                next.alpha_w.extend_from_slice(row);
            }
        } else {
            log::warn!("observation {:?} has zero likelihood under every goal", x_new.xy());
            next.goal_post = prior;
            next.alpha_w = evolved;
            next.degenerate = true;
        }
        Ok(next)
    }

    /// Point estimate of alpha for one goal.
    pub fn alpha_hat(&self, b: &Belief, goal: usize) -> Alpha {
        alpha_hat(b, &self.grid, goal, self.cfg.estimator)
    }

    pub fn alpha_hat_overall(&self, b: &Belief) -> Alpha {
        alpha_hat_overall(b, &self.grid, self.cfg.estimator)
    }
}

pub fn alpha_hat(b: &Belief, grid: &AlphaGrid, goal: usize, estimator: Estimator) -> Alpha {
    let row = b.alpha_row(goal);
    let v = match estimator {
        Estimator::Expectation => row.iter().zip(grid.points()).map(|(w, a)| w * a).sum(),
        Estimator::Mode => {
            let mut best = 0;
            for (k, &w) in row.iter().enumerate() {
                if w > row[best] {
                    best = k;
                }
            }
            grid.points()[best]
        }
    };
    Alpha::new(v.max(0.0)).unwrap_or(Alpha::new(0.0).unwrap())
}

/// Posterior-weighted average of the per-goal estimates.
pub fn alpha_hat_overall(b: &Belief, grid: &AlphaGrid, estimator: Estimator) -> Alpha {
    let v: f64 = (0..b.n_goals())
        .map(|i| alpha_hat(b, grid, i, estimator).value() * b.goal_post[i])
        .sum();
    Alpha::new(v.max(0.0)).unwrap_or(Alpha::new(0.0).unwrap())
}
