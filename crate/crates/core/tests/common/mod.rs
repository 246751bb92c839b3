//! Reference implementations used as test oracles. They share no code with
//! the library: distances come from Bellman-Ford relaxation, the kernel is
//! evaluated straight from its definition, and filtering is done by
//! enumerating every goal path.

#![allow(dead_code)]

use intent_core::{Cell, Connectivity, GridMap};
use rand::Rng;

pub struct RefGrid {
    pub w: usize,
    pub h: usize,
    pub cell: f64,
    pub blocked: Vec<bool>,
    pub eight: bool,
    pub stay: bool,
}

impl RefGrid {
    pub fn from_map(map: &GridMap) -> Self {
        let mut blocked = vec![false; map.width() * map.height()];
        for y in 0..map.height() {
            for x in 0..map.width() {
                blocked[y * map.width() + x] = map.is_blocked(Cell::new(x, y));
            }
        }
        RefGrid {
            w: map.width(),
            h: map.height(),
            cell: map.cell_size(),
            blocked,
            eight: map.connectivity() == Connectivity::Eight,
            stay: map.allow_stay(),
        }
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.w + x
    }

    fn free(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h && !self.blocked[self.idx(x as usize, y as usize)]
    }

    /// Admissible moves out of (x, y) with their lengths.
    pub fn moves(&self, x: usize, y: usize) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        if self.stay {
            out.push(((x, y), 0.0));
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag && !self.eight {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !self.free(nx, ny) {
                    continue;
                }
                if diag && !self.free(x as i64 + dx, y as i64) && !self.free(x as i64, y as i64 + dy) {
                    continue;
                }
                let len = if diag { self.cell * 2f64.sqrt() } else { self.cell };
                out.push(((nx as usize, ny as usize), len));
            }
        }
        out
    }

    /// Shortest-path cost to `goal` from every cell, by repeated relaxation.
    pub fn bellman_ford(&self, goal: (usize, usize)) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; self.w * self.h];
        d[self.idx(goal.0, goal.1)] = 0.0;
        loop {
            let mut changed = false;
            for y in 0..self.h {
                for x in 0..self.w {
                    if self.blocked[self.idx(x, y)] {
                        continue;
                    }
                    for ((nx, ny), len) in self.moves(x, y) {
                        let cand = d[self.idx(nx, ny)] + len;
                        if cand < d[self.idx(x, y)] - 1e-15 {
                            d[self.idx(x, y)] = cand;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }

    /// Kernel probability of every admissible move from (x, y).
    pub fn kernel(&self, dist: &[f64], x: usize, y: usize, alpha: f64) -> Vec<((usize, usize), f64)> {
        let d0 = dist[self.idx(x, y)];
        let raw: Vec<((usize, usize), f64)> = self
            .moves(x, y)
            .into_iter()
            .map(|(n, len)| {
                let d1 = dist[self.idx(n.0, n.1)];
                let w = if d1.is_finite() { (-alpha * (len + d1 - d0)).exp() } else { 0.0 };
                (n, w)
            })
            .collect();
        let z: f64 = raw.iter().map(|r| r.1).sum();
        raw.into_iter().map(|(n, w)| (n, w / z)).collect()
    }

    pub fn prob(&self, dist: &[f64], from: (usize, usize), to: (usize, usize), alpha: f64) -> f64 {
        self.kernel(dist, from.0, from.1, alpha)
            .into_iter()
            .find(|(n, _)| *n == to)
            .map_or(0.0, |(_, p)| p)
    }
}

/// Gamma(shape, scale) weights at the given points, normalized.
pub fn gamma_weights(points: &[f64], shape: f64, scale: f64) -> Vec<f64> {
    let w: Vec<f64> = points.iter().map(|&a| a.powf(shape - 1.0) * (-a / scale).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub struct Enumerated {
    pub goal_post: Vec<f64>,
    /// `alpha_rows[i][g] = P(alpha_g | goal i, path)`.
    pub alpha_rows: Vec<Vec<f64>>,
}

/// Posterior of the final goal and of alpha after observing `path`.
///
/// Hypotheses are (alpha gridpoint, goal at every step); alpha is constant
/// along a hypothesis, the goal follows the chain `h`. Stationary
/// observations carry no information and are skipped.
pub fn enumerate_posterior(
    grid: &RefGrid,
    dists: &[Vec<f64>],
    h: &[Vec<f64>],
    points: &[f64],
    alpha_prior: &[f64],
    path: &[(usize, usize)],
) -> Enumerated {
    let n = dists.len();
    let moves: Vec<((usize, usize), (usize, usize))> = path
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| (w[0], w[1]))
        .collect();
    let steps = moves.len();
    let mut joint = vec![vec![0.0; points.len()]; n];
    let total_paths = n.pow(steps as u32 + 1);
    for (g, &a) in points.iter().enumerate() {
        for code in 0..total_paths {
            let mut c = code;
            let mut goals = Vec::with_capacity(steps + 1);
            for _ in 0..=steps {
                goals.push(c % n);
                c /= n;
            }
            let mut p = alpha_prior[g] / n as f64;
            for (k, &(from, to)) in moves.iter().enumerate() {
                p *= h[goals[k]][goals[k + 1]];
                if p == 0.0 {
                    break;
                }
                p *= grid.prob(&dists[goals[k + 1]], from, to, a);
            }
            joint[goals[steps]][g] += p;
        }
    }
    let z: f64 = joint.iter().flatten().sum();
    let goal_post = joint.iter().map(|r| r.iter().sum::<f64>() / z).collect();
    let alpha_rows = joint
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    Enumerated { goal_post, alpha_rows }
}

/// Random walk of admissible non-stay moves inside the free component of `start`.
pub fn random_walk(grid: &RefGrid, rng: &mut impl Rng, start: (usize, usize), steps: usize) -> Vec<(usize, usize)> {
    let mut path = vec![start];
    let mut cur = start;
    for _ in 0..steps {
        let opts: Vec<(usize, usize)> = grid.moves(cur.0, cur.1).into_iter().map(|m| m.0).filter(|&c| c != cur).collect();
        if opts.is_empty() {
            break;
        }
        cur = opts[rng.random_range(0..opts.len())];
        path.push(cur);
    }
    path
}

/// Random row-stochastic matrix with a heavier diagonal.
pub fn random_transition(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| rng.random::<f64>() + if i == j { 2.0 } else { 0.0 }).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect()
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Ranks with midranks for ties, over one pooled sample.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}
