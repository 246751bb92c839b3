//! Ground-truth scenarios: map, candidate goals, a scripted goal schedule and
//! the methods under test, plus the trajectory generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Cell, Connectivity, GridMap};
use crate::inference::{
    AlphaGrid, Estimator, GammaPrior, GoalSet, MethodConfig, Variant, World, DEFAULT_P_STAY,
};
use crate::kinematics::{sample_step, step_distribution, Alpha};
use crate::predictor::PredictConfig;

/// Obstacle as a single cell `[x, y]` or a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Obstacle {
    Cell([usize; 2]),
    Rect { x: usize, y: usize, w: usize, h: usize },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default = "default_true")]
    pub allow_stay: bool,
}

impl MapSpec {
    pub fn build(&self) -> Result<GridMap> {
        let mut map = GridMap::new(self.width, self.height, self.cell_size, self.connectivity, self.allow_stay)?;
        for o in &self.obstacles {
            match *o {
                Obstacle::Cell([x, y]) => map.set_blocked(Cell::new(x, y), true)?,
                Obstacle::Rect { x, y, w, h } => map.block_rect(x, y, w, h),
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub goal: usize,
    pub alpha: f64,
    pub duration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default = "default_true")]
    pub log: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: 0.05,
            hi: 200.0,
            points: 128,
            log: true,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<AlphaGrid> {
        if self.log {
            AlphaGrid::log_spaced(self.lo, self.hi, self.points)
        } else {
            AlphaGrid::linear(self.lo, self.hi, self.points)
        }
    }
}

fn default_fixed_alpha() -> f64 {
    10.0
}

fn default_p_stay() -> f64 {
    DEFAULT_P_STAY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub variant: Variant,
    #[serde(default = "default_fixed_alpha")]
    pub fixed_alpha: f64,
    #[serde(default = "default_p_stay")]
    pub p_stay: f64,
    #[serde(default)]
    pub alpha_grid: GridSpec,
    #[serde(default)]
    pub prior: GammaPrior,
    #[serde(default)]
    pub estimator: Estimator,
}

impl MethodSpec {
    pub fn new(variant: Variant, fixed_alpha: f64) -> Self {
        MethodSpec {
            variant,
            fixed_alpha,
            p_stay: DEFAULT_P_STAY,
            alpha_grid: GridSpec::default(),
            prior: GammaPrior::default(),
            estimator: Estimator::default(),
        }
    }

    pub fn config(&self) -> Result<MethodConfig> {
        Ok(MethodConfig {
            variant: self.variant,
            fixed_alpha: Alpha::new(self.fixed_alpha)?,
            alpha_prior: self.prior,
            p_stay: self.p_stay,
            alpha_grid: self.alpha_grid.build()?,
            estimator: self.estimator,
        })
    }
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub map: MapSpec,
    pub goals: Vec<[usize; 2]>,
    pub start: [usize; 2],
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub prediction: PredictConfig,
}

/// Ground-truth trajectory with per-position labels.
///
/// `goals[k]` and `alphas[k]` are those governing the move out of
/// `cells[k]`; the last position carries the last segment's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cells: Vec<Cell>,
    pub goals: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("scenario parse error at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let map = self.map.build().map_err(|e| Error::Config(e.to_string()))?;
        self.goal_set(&map).map_err(|e| Error::Config(e.to_string()))?;
        map.check_free(Cell::from(self.start))
            .map_err(|e| Error::Config(format!("start: {e}")))?;
        if self.segments.is_empty() {
            return Err(Error::Config("scenario needs at least one segment".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration == 0 {
                return Err(Error::Config(format!("segment {i}: duration must be at least 1")));
            }
            if seg.goal >= self.goals.len() {
                return Err(Error::Config(format!("segment {i}: unknown goal {}", seg.goal)));
            }
            Alpha::new(seg.alpha).map_err(|e| Error::Config(format!("segment {i}: {e}")))?;
        }
        for (i, m) in self.methods.iter().enumerate() {
            m.config().map_err(|e| Error::Config(format!("method {i}: {e}")))?;
            if !(0.0..=1.0).contains(&m.p_stay) {
                return Err(Error::Config(format!("method {i}: p_stay must lie in [0, 1]")));
            }
        }
        if self.prediction.samples == 0 || self.prediction.horizon == 0 {
            return Err(Error::Config("prediction M and T must be at least 1".into()));
        }
        Ok(())
    }

    fn goal_set(&self, map: &GridMap) -> Result<GoalSet> {
        GoalSet::new(map, self.goals.iter().map(|&g| Cell::from(g)).collect())
    }

    pub fn world(&self) -> Result<World> {
        let map = self.map.build()?;
        let goals = self.goal_set(&map)?;
        World::new(map, goals)
    }

    pub fn start(&self) -> Cell {
        Cell::from(self.start)
    }

    pub fn method_spec(&self, v: Variant) -> Option<&MethodSpec> {
        self.methods.iter().find(|m| m.variant == v)
    }

    /// Samples the ground-truth trajectory. The final segment stops early
    /// once its goal is reached.
    pub fn generate_trajectory(&self, world: &World, rng: &mut impl Rng) -> Result<Trajectory> {
        let mut cur = self.start();
        let mut traj = Trajectory {
            cells: vec![cur],
            goals: Vec::new(),
            alphas: Vec::new(),
        };
        let last = self.segments.len() - 1;
        'segments: for (si, seg) in self.segments.iter().enumerate() {
            let alpha = Alpha::new(seg.alpha)?;
            let goal_cell = world.goals.get(seg.goal);
            for _ in 0..seg.duration {
                if si == last && cur == goal_cell {
                    break 'segments;
                }
                let dist = step_distribution(&world.map, &world.fields[seg.goal], seg.goal, cur, alpha)?;
                traj.goals.push(seg.goal);
                traj.alphas.push(seg.alpha);
                cur = sample_step(rng, &dist);
                traj.cells.push(cur);
            }
        }
        let tail = self.segments[last];
        traj.goals.push(tail.goal);
        traj.alphas.push(tail.alpha);
        Ok(traj)
    }
}

// Preset geometry: 101 x 81 nodes spanning 10 x 8 world units.
pub const PRESET_WIDTH: usize = 101;
pub const PRESET_HEIGHT: usize = 81;
pub const PRESET_CELL_SIZE: f64 = 0.1;
pub const PRESET_GOALS: usize = 12;
pub const PRESET_START: [usize; 2] = [50, 40];
pub const MC_TRIALS: usize = 500;

/// `n` cells evenly spaced along the boundary of a `width x height` grid.
pub fn boundary_goals(width: usize, height: usize, n: usize) -> Vec<[usize; 2]> {
    let (w, h) = (width - 1, height - 1);
    let perimeter = 2 * (w + h);
    let spacing = perimeter as f64 / n as f64;
    (0..n)
        .map(|i| {
            let s = ((i as f64 + 0.5) * spacing).floor() as usize % perimeter;
            if s < w {
                [s, 0]
            } else if s < w + h {
                [w, s - w]
            } else if s < 2 * w + h {
                [w - (s - w - h), h]
            } else {
                [0, h - (s - 2 * w - h)]
            }
        })
        .collect()
}

fn preset(segments: Vec<Segment>, fixed_alpha: f64, seed: u64) -> Scenario {
    Scenario {
        map: MapSpec {
            width: PRESET_WIDTH,
            height: PRESET_HEIGHT,
            cell_size: PRESET_CELL_SIZE,
            obstacles: Vec::new(),
            connectivity: Connectivity::Eight,
            allow_stay: true,
        },
        goals: boundary_goals(PRESET_WIDTH, PRESET_HEIGHT, PRESET_GOALS),
        start: PRESET_START,
        segments,
        seed,
        methods: Variant::ALL.iter().map(|&v| MethodSpec::new(v, fixed_alpha)).collect(),
        prediction: PredictConfig::default(),
    }
}

/// Three 50-step segments at alpha* = 50; B and G assume alpha = 10.
pub fn make_case1() -> Scenario {
    let seg = |goal| Segment {
        goal,
        alpha: 50.0,
        duration: 50,
    };
    preset(vec![seg(7), seg(2), seg(4)], 10.0, 1)
}

/// alpha* = 20 with one switch after step 100; B and G assume alpha = 80.
pub fn make_case2() -> Scenario {
    preset(
        vec![
            Segment {
                goal: 10,
                alpha: 20.0,
                duration: 100,
            },
            Segment {
                goal: 4,
                alpha: 20.0,
                duration: 150,
            },
        ],
        80.0,
        2,
    )
}

/// Random trial: switches at steps 50 and 100 to uniformly drawn new goals,
/// alpha* ~ U[0, 100] per segment; B and G assume alpha = 20.
pub fn make_mc_trial(rng: &mut impl Rng) -> Scenario {
    let mut goal = rng.random_range(0..PRESET_GOALS);
    let mut segments = Vec::with_capacity(3);
    for k in 0..3 {
        if k > 0 {
            let shift = rng.random_range(1..PRESET_GOALS);
            goal = (goal + shift) % PRESET_GOALS;
        }
        segments.push(Segment {
            goal,
            alpha: rng.random_range(0.0..=100.0),
            duration: 50,
        });
    }
    let seed = rng.random();
    preset(segments, 20.0, seed)
}

/// Monte Carlo trial `index` derived from a base seed.
pub fn mc_trial(base_seed: u64, index: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index as u64));
    rng.set_stream(1);
    make_mc_trial(&mut rng)
}
