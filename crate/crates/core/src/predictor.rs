//! Sampling-based T-step forecast.
//!
//! Samples are split across goals in proportion to the goal posterior; each
//! rollout follows the kernel of one goal under that goal's alpha estimate.
//! The per-step sample mean and covariance summarize the forecast. Every
//! rollout draws from its own ChaCha stream keyed by `(seed, goal, sample)`,
//! so the result does not depend on how the rollouts are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::Cell;
use crate::inference::{AlphaGrid, Belief, Method, World};
use crate::kinematics::{boltzmann, progress_costs, sample_index, Alpha};
use crate::parallel::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    /// Total number of rollouts `M`.
    #[serde(rename = "M")]
    pub samples: usize,
    /// Horizon `T` in steps.
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_n_sigma")]
    pub n_sigma: f64,
    #[serde(skip)]
    pub exec: Execution,
    #[serde(skip)]
    pub keep_samples: bool,
}

fn default_n_sigma() -> f64 {
    2.0
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            samples: 500,
            horizon: 20,
            n_sigma: default_n_sigma(),
            exec: Execution::Parallel,
            keep_samples: false,
        }
    }
}

/// Symmetric 2x2 covariance `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mid + rad, mid - rad)
    }

    /// Serialized as `[c00, c01, c11]`.
    pub fn to_array(&self) -> [f64; 3] {
        [self.xx, self.xy, self.yy]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub horizon: usize,
    pub means: Vec<[f64; 2]>,
    pub covs: Vec<Cov2>,
    pub counts: Vec<usize>,
    pub samples: Option<Vec<Vec<Cell>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Radians from the horizontal axis, in `(-pi/2, pi/2]`.
    pub angle: f64,
    pub n_sigma: f64,
}

/// Largest-remainder split of `total` samples; ties go to the lower goal index.
pub fn allocate_samples(goal_post: &[f64], total: usize) -> Vec<usize> {
    let scaled: Vec<f64> = goal_post.iter().map(|p| p.max(0.0) * total as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned > total {
        // only reachable with an unnormalized posterior
        return allocate_samples(&normalized(goal_post), total);
    }
    let mut order: Vec<usize> = (0..goal_post.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = total - assigned;
    while left > 0 {
        for &i in &order {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let s: f64 = p.iter().map(|v| v.max(0.0)).sum();
    p.iter().map(|v| v.max(0.0) / s).collect()
}

/// Simulates `horizon` steps toward one goal under a fixed alpha.
pub fn rollout<R: Rng + ?Sized>(
    rng: &mut R,
    world: &World,
    start: Cell,
    goal_id: usize,
    alpha: Alpha,
    horizon: usize,
) -> Vec<Cell> {
    let field = &world.fields[goal_id];
    let mut out = Vec::with_capacity(horizon);
    let mut cur = start;
    let mut probs = [0.0; 9];
    for _ in 0..horizon {
        let (succ, costs) = progress_costs(&world.map, field, cur);
        let n = succ.len();
        if boltzmann(&costs[..n], alpha.value(), &mut probs[..n]) {
            cur = succ[sample_index(rng, &probs[..n])];
        }
        out.push(cur);
    }
    out
}

/// RNG stream of one rollout.
pub fn rollout_rng(seed: u64, goal_id: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((goal_id as u64) << 32) | sample as u64);
    rng
}

/// Monte Carlo forecast from the belief's current state.
pub fn predict(world: &World, method: &Method, b: &Belief, cfg: &PredictConfig, seed: u64) -> Result<PredictionResult> {
    if cfg.samples == 0 {
        return Err(Error::Input("prediction needs at least one sample".into()));
    }
    if cfg.horizon == 0 {
        return Err(Error::Input("prediction horizon must be at least 1".into()));
    }
    let start = b.last_state;
    world.map.check_free(start)?;
    let counts = allocate_samples(b.goal_post(), cfg.samples);
    let alphas: Vec<Alpha> = (0..b.n_goals()).map(|i| method.alpha_hat(b, i)).collect();
    let jobs: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(g, &m)| (0..m).map(move |s| (g, s)))
        .collect();
    let trajectories = parallel::map_slice(cfg.exec, &jobs, |&(g, s)| {
        let mut rng = rollout_rng(seed, g, s);
        rollout(&mut rng, world, start, g, alphas[g], cfg.horizon)
    });
    let stats = parallel::map_indexed(cfg.exec, cfg.horizon, |q| {
        let pts: Vec<[f64; 2]> = trajectories.iter().map(|t| world.map.position(t[q])).collect();
        mean_cov(&pts)
    });
    let (means, covs) = stats.into_iter().unzip();
    Ok(PredictionResult {
        horizon: cfg.horizon,
        means,
        covs,
        counts,
        samples: cfg.keep_samples.then_some(trajectories),
    })
}

/// Sample mean and population covariance.
pub fn mean_cov(pts: &[[f64; 2]]) -> ([f64; 2], Cov2) {
    let n = pts.len() as f64;
    let mut m = [0.0; 2];
    for p in pts {
        m[0] += p[0];
        m[1] += p[1];
    }
    m[0] /= n;
    m[1] /= n;
    let mut c = Cov2::default();
    for p in pts {
        let dx = p[0] - m[0];
        let dy = p[1] - m[1];
        c.xx += dx * dx;
        c.xy += dx * dy;
        c.yy += dy * dy;
    }
    c.xx /= n;
    c.xy /= n;
    c.yy /= n;
    (m, c)
}

/// How the exact one-step mixture treats alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMix {
    /// Integrate over the per-goal alpha weights.
    Marginal,
    /// Use the per-goal point estimate, as the rollouts do.
    PlugIn,
}

/// Exact one-step predictive distribution over the successors of `x`.
pub fn one_step_exact(
    world: &World,
    method: &Method,
    b: &Belief,
    x: Cell,
    mix: AlphaMix,
) -> Result<Vec<(Cell, f64)>> {
    one_step_mixture(world, &method.grid, b, x, mix, |i| method.alpha_hat(b, i))
}

fn one_step_mixture(
    world: &World,
    grid: &AlphaGrid,
    b: &Belief,
    x: Cell,
    mix: AlphaMix,
    alpha_hat: impl Fn(usize) -> Alpha,
) -> Result<Vec<(Cell, f64)>> {
    let succ = world.map.successors(x)?;
    let n = succ.len();
    let mut total = vec![0.0; n];
    let mut probs = [0.0; 9];
    for i in 0..b.n_goals() {
        let wi = b.goal_post()[i];
        if wi == 0.0 {
            continue;
        }
        let (_, costs) = progress_costs(&world.map, &world.fields[i], x);
        let terms: Vec<(f64, f64)> = match mix {
            AlphaMix::Marginal => grid.points().iter().copied().zip(b.alpha_row(i).iter().copied()).collect(),
            AlphaMix::PlugIn => vec![(alpha_hat(i).value(), 1.0)],
        };
        for (a, w) in terms {
            if w == 0.0 {
                continue;
            }
            if !boltzmann(&costs[..n], a, &mut probs[..n]) {
                return Err(Error::Model(format!("goal {i} is unreachable from {:?}", x.xy())));
            }
            for k in 0..n {
                total[k] += wi * w * probs[k];
            }
        }
    }
    Ok(succ.iter().copied().zip(total).collect())
}

/// Confidence ellipse of a 2x2 covariance at `n_sigma` Mahalanobis radius.
pub fn ellipse_from_cov(center: [f64; 2], cov: Cov2, n_sigma: f64) -> Result<Ellipse> {
    let (l1, l2) = cov.eigenvalues();
    if l2 < -1e-9 || !l1.is_finite() {
        return Err(Error::Numerical(format!(
            "covariance is not positive semi-definite (eigenvalues {l1}, {l2})"
        )));
    }
    let mut angle = 0.5 * (2.0 * cov.xy).atan2(cov.xx - cov.yy);
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    Ok(Ellipse {
        center,
        semi_major: n_sigma * l1.max(0.0).sqrt(),
        semi_minor: n_sigma * l2.max(0.0).sqrt(),
        angle,
        n_sigma,
    })
}

impl PredictionResult {
    pub fn ellipses(&self, n_sigma: f64) -> Result<Vec<Ellipse>> {
        self.means
            .iter()
            .zip(&self.covs)
            .map(|(&m, &c)| ellipse_from_cov(m, c, n_sigma))
            .collect()
    }
}
