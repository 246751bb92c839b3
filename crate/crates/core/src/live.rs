//! Live steering session: a simulated target driven by operator commands,
//! with every method's inference and forecast streamed as JSON events.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::Cell;
use crate::inference::{Belief, Method, Variant, World};
use crate::kinematics::{sample_step, step_distribution, Alpha};
use crate::predictor::{predict, Ellipse, PredictConfig, PredictionResult};
use crate::runner::{observe, step_seed, Preset};
use crate::scenario::{make_case1, make_case2, mc_trial, MethodSpec, Scenario};

pub const DEFAULT_RATE_HZ: f64 = 10.0;
pub const MAX_RATE_HZ: f64 = 100.0;

/// Scenario reference in a `reset` command: a preset name or a full object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Name(String),
    Inline(Box<Scenario>),
}

impl ScenarioRef {
    pub fn resolve(&self) -> Result<Scenario> {
        match self {
            ScenarioRef::Name(name) => Ok(match name.parse::<Preset>()? {
                Preset::Case1 => make_case1(),
                Preset::Case2 => make_case2(),
                Preset::Mc => mc_trial(0, 0),
            }),
            ScenarioRef::Inline(s) => {
                s.validate()?;
                Ok((**s).clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    SetGoal {
        goal: usize,
    },
    SetAlpha {
        value: f64,
    },
    Pause,
    Resume,
    Step,
    Reset {
        scenario: ScenarioRef,
        #[serde(default)]
        seed: Option<u64>,
    },
    SetRate {
        hz: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredView {
    pub means: Vec<[f64; 2]>,
    /// `[c00, c01, c11]` per horizon step.
    pub covs: Vec<[f64; 3]>,
    pub ellipses: Vec<Ellipse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodView {
    pub goal_post: Vec<f64>,
    pub alpha_hat: f64,
    pub pred: Option<PredView>,
    pub timing_ms: f64,
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEvent {
    pub k: usize,
    /// World coordinates of the target.
    pub pos: [f64; 2],
    pub cell: [usize; 2],
    pub true_goal: usize,
    pub alpha_star: f64,
    pub paused: bool,
    pub methods: BTreeMap<String, MethodView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Hello { scenario: Box<Scenario> },
    State(Box<StateEvent>),
    Error { detail: String },
}

impl Event {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }

    fn error(detail: impl Into<String>) -> Self {
        Event::Error { detail: detail.into() }
    }
}

struct MethodState {
    method: Method,
    belief: Belief,
    prediction: Option<PredictionResult>,
    timing_ms: f64,
    error: Option<String>,
}

pub struct Session {
    scenario: Scenario,
    world: World,
    predict_cfg: PredictConfig,
    methods: Vec<MethodState>,
    seed: u64,
    rng: ChaCha8Rng,
    step: usize,
    pos: Cell,
    goal: usize,
    alpha_star: Alpha,
    paused: bool,
    rate_hz: f64,
}

fn method_specs(s: &Scenario) -> Vec<MethodSpec> {
    if s.methods.is_empty() {
        Variant::ALL.iter().map(|&v| MethodSpec::new(v, 10.0)).collect()
    } else {
        s.methods.clone()
    }
}

impl Session {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let world = scenario.world()?;
        let start = scenario.start();
        let mut methods = Vec::new();
        for spec in method_specs(&scenario) {
            let method = Method::new(spec.config()?, world.n_goals())?;
            let belief = method.init_belief(&world, start)?;
            methods.push(MethodState {
                method,
                belief,
                prediction: None,
                timing_ms: 0.0,
                error: None,
            });
        }
        let first = scenario.segments[0];
        Ok(Session {
            predict_cfg: scenario.prediction,
            world,
            methods,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            pos: start,
            goal: first.goal,
            alpha_star: Alpha::new(first.alpha)?,
            paused: false,
            rate_hz: DEFAULT_RATE_HZ,
            scenario,
        })
    }

    pub fn preset(preset: Preset, seed: u64) -> Result<Self> {
        let name = match preset {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::Mc => "mc",
        };
        Self::new(ScenarioRef::Name(name.into()).resolve()?, seed)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn position(&self) -> Cell {
        self.pos
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star.value()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn tick_interval(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.rate_hz)
    }

    pub fn belief(&self, v: Variant) -> Option<&Belief> {
        self.methods.iter().find(|m| m.method.variant() == v).map(|m| &m.belief)
    }

    pub fn hello(&self) -> Event {
        Event::Hello {
            scenario: Box::new(self.scenario.clone()),
        }
    }

    /// Snapshot of the current session state.
    pub fn state(&self) -> Event {
        let methods = self
            .methods
            .iter()
            .map(|m| {
                let pred = m.prediction.as_ref().map(|p| PredView {
                    means: p.means.clone(),
                    covs: p.covs.iter().map(|c| c.to_array()).collect(),
                    ellipses: p.ellipses(self.predict_cfg.n_sigma).unwrap_or_default(),
                });
                let view = MethodView {
                    goal_post: m.belief.goal_post().to_vec(),
                    alpha_hat: m.method.alpha_hat_overall(&m.belief).value(),
                    pred,
                    timing_ms: m.timing_ms,
                    degenerate: m.belief.degenerate,
                    error: m.error.clone(),
                };
                (m.method.variant().to_string(), view)
            })
            .collect();
        Event::State(Box::new(StateEvent {
            k: self.step,
            pos: self.world.map.position(self.pos),
            cell: self.pos.into(),
            true_goal: self.goal,
            alpha_star: self.alpha_star.value(),
            paused: self.paused,
            methods,
        }))
    }

    /// Advances the target one step and refreshes every method.
    pub fn tick(&mut self) -> Event {
        let dist = step_distribution(
            &self.world.map,
            &self.world.fields[self.goal],
            self.goal,
            self.pos,
            self.alpha_star,
        );
        match dist {
            Ok(d) => self.pos = sample_step(&mut self.rng, &d),
            Err(e) => return Event::error(format!("ground truth step failed: {e}")),
        }
        self.step += 1;
        for (i, m) in self.methods.iter_mut().enumerate() {
            let t0 = Instant::now();
            let seed = step_seed(self.seed.wrapping_add(i as u64), m.method.variant(), self.step);
            let res = observe(&m.method, &self.world, &m.belief, self.pos).and_then(|b| {
                let p = predict(&self.world, &m.method, &b, &self.predict_cfg, seed)?;
                Ok((b, p))
            });
            match res {
                Ok((b, p)) => {
                    m.belief = b;
                    m.prediction = Some(p);
                    m.error = None;
                }
                Err(e) => {
                    m.belief.last_state = self.pos;
                    m.belief.step += 1;
                    m.error = Some(e.to_string());
                }
            }
            m.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
        }
        self.state()
    }

    /// Scheduled tick: advances only while running.
    pub fn poll(&mut self) -> Option<Event> {
        (!self.paused).then(|| self.tick())
    }

    pub fn apply(&mut self, cmd: Command) -> Result<Vec<Event>> {
        match cmd {
            Command::SetGoal { goal } => {
                if goal >= self.world.n_goals() {
                    return Err(Error::Input(format!(
                        "unknown goal {goal} (scenario has {})",
                        self.world.n_goals()
                    )));
                }
                self.goal = goal;
                Ok(Vec::new())
            }
            Command::SetAlpha { value } => {
                self.alpha_star = Alpha::new(value)?;
                Ok(Vec::new())
            }
            Command::Pause => {
                self.paused = true;
                Ok(Vec::new())
            }
            Command::Resume => {
                self.paused = false;
                Ok(Vec::new())
            }
            Command::Step => Ok(vec![self.tick()]),
            Command::Reset { scenario, seed } => {
                let s = scenario.resolve()?;
                let rate = self.rate_hz;
                let paused = self.paused;
                *self = Session::new(s, seed.unwrap_or(self.seed))?;
                self.rate_hz = rate;
                self.paused = paused;
                Ok(vec![self.hello(), self.state()])
            }
            Command::SetRate { hz } => {
                if !(hz > 0.0 && hz <= MAX_RATE_HZ) {
                    return Err(Error::Input(format!("rate must lie in (0, {MAX_RATE_HZ}] Hz, got {hz}")));
                }
                self.rate_hz = hz;
                Ok(Vec::new())
            }
        }
    }

    /// Parses and applies one client frame. Failures leave the session
    /// unchanged and come back as a single error event.
    pub fn handle_command(&mut self, text: &str) -> Vec<Event> {
        let cmd: Command = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return vec![Event::error(format!("malformed command: {e}"))],
        };
        match self.apply(cmd) {
            Ok(events) => events,
            Err(e) => vec![Event::error(e.to_string())],
        }
    }
}
