//! Tabular semi-Markov Q-learning over a skill library in the maze.
//!
//! The state is the grid cell of the point mass; the action set is the index
//! of a skill, executed open loop as its fixed primitive action sequence.
//! A macro of length L that collects rewards r_0..r_{L-1} and lands in cell
//! s' backs up the target
//!
//!   G + gamma^L * max_b Q(s', b)        with G = sum_i gamma^i * r_i,
//!
//! where the bootstrap term is dropped when the episode ended inside the
//! macro. Exploration is epsilon-greedy with a linear anneal over the first
//! half of the step budget, and budgets are counted in primitive steps with
//! exact truncation, so runs over different skill lengths are comparable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maze::{ActionLift, EnvState, Maze};
use crate::tokenizer::SkillLibrary;

/// Learning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the step budget over which epsilon anneals linearly.
    pub anneal_fraction: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            alpha: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            anneal_fraction: 0.5,
        }
    }
}

impl AgentConfig {
    fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !in_unit(self.gamma)
            || !in_unit(self.alpha)
            || !in_unit(self.epsilon_start)
            || !in_unit(self.epsilon_end)
            || !in_unit(self.anneal_fraction)
        {
            return Err(Error::InvalidConfig(
                "agent hyperparameters must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Exploration rate after `steps_used` of `budget` primitive steps.
    pub fn epsilon_at(&self, steps_used: usize, budget: usize) -> f64 {
        let window = self.anneal_fraction * budget as f64;
        if window <= 0.0 {
            return self.epsilon_end;
        }
        let t = (steps_used as f64 / window).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Greedy tabular policy over (grid cell, skill index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPolicy {
    pub rows: usize,
    pub cols: usize,
    pub n_skills: usize,
    pub seed: u64,
    /// Row-major by cell, inner index by skill.
    pub q_values: Vec<Vec<f64>>,
}

impl MacroPolicy {
    pub fn zeros(rows: usize, cols: usize, n_skills: usize, seed: u64) -> Self {
        MacroPolicy {
            rows,
            cols,
            n_skills,
            seed,
            q_values: vec![vec![0.0; n_skills]; rows * cols],
        }
    }

    pub fn cell_index(&self, cell: (usize, usize)) -> usize {
        cell.0 * self.cols + cell.1
    }

    /// Highest-valued skill in a cell, lowest index on ties.
    pub fn greedy(&self, cell: (usize, usize)) -> usize {
        let row = &self.q_values[self.cell_index(cell)];
        let mut best = 0;
        for (i, &q) in row.iter().enumerate() {
            if q > row[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_q(&self, cell: (usize, usize)) -> f64 {
        self.q_values[self.cell_index(cell)]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("policy serialization failed: {e}")))?;
        std::fs::write(path, body).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&body).map_err(|e| Error::MalformedLibrary {
            path: path.to_path_buf(),
            reason: format!("not a valid policy file: {e}"),
        })
    }
}

/// Positions and rewards of one episode, one entry per primitive step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub positions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
}

impl EpisodeLog {
    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Every primitive step of a run, grouped by episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutLog {
    pub episodes: Vec<EpisodeLog>,
}

impl RolloutLog {
    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.positions.len()).sum()
    }

    /// CSV with one row per primitive step: episode, t, x, y, reward.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut body = String::from("episode,t,x,y,reward\n");
        for (episode, log) in self.episodes.iter().enumerate() {
            for (t, (pos, reward)) in log.positions.iter().zip(&log.rewards).enumerate() {
                body.push_str(&format!(
                    "{episode},{t},{},{},{}\n",
                    pos[0], pos[1], reward
                ));
            }
        }
        std::fs::write(path, body).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Result of running one macro open loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillOutcome {
    pub steps: usize,
    pub positions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
    pub done: bool,
}

/// Plays a skill's action sequence step by step, stopping early when the
/// episode ends or `max_steps` primitive steps have been taken.
pub fn execute_skill(
    maze: &Maze,
    state: &mut EnvState,
    actions: &[Vec<f64>],
    lift: Option<&ActionLift>,
    max_steps: usize,
) -> Result<SkillOutcome> {
    let mut outcome = SkillOutcome {
        steps: 0,
        positions: Vec::new(),
        rewards: Vec::new(),
        done: state.done,
    };
    for action in actions {
        if state.done || outcome.steps >= max_steps {
            break;
        }
        let planar;
        let command: &[f64] = match lift {
            Some(l) => {
                planar = l.readout(action)?;
                &planar
            }
            None => action.as_slice(),
        };
        let result = maze.step(state, command)?;
        outcome.steps += 1;
        outcome.positions.push(result.observation);
        outcome.rewards.push(result.reward);
        outcome.done = result.done;
    }
    Ok(outcome)
}

/// Discounted semi-Markov backup target for a finished macro: the in-macro
/// discounted return plus `gamma^L` times the bootstrap, unless the episode
/// ended inside the macro.
pub fn macro_backup(gamma: f64, rewards: &[f64], bootstrap: f64, done: bool) -> f64 {
    let mut ret = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        ret += discount * r;
        discount *= gamma;
    }
    if done {
        ret
    } else {
        ret + discount * bootstrap
    }
}

fn skill_actions(library: &SkillLibrary) -> Result<Vec<&[Vec<f64>]>> {
    if library.skills.is_empty() {
        return Err(Error::InvalidConfig("skill library has no skills".into()));
    }
    library
        .skills
        .iter()
        .map(|s| {
            if s.actions.is_empty() {
                Err(Error::InvalidConfig(format!(
                    "skill {} has an empty action sequence",
                    s.id
                )))
            } else {
                Ok(s.actions.as_slice())
            }
        })
        .collect()
}

fn check_action_dim(library: &SkillLibrary, lift: Option<&ActionLift>) -> Result<()> {
    let expected = lift.map(|l| l.dim()).unwrap_or(2);
    let got = library.codebook.act_dim();
    if got != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got,
            context: "skill action dimension for the maze".into(),
        });
    }
    Ok(())
}

/// Trains an epsilon-greedy tabular agent for exactly `budget` primitive
/// steps, truncating the final macro (and episode) mid-flight if needed.
pub fn train(
    maze: &Maze,
    library: &SkillLibrary,
    budget: usize,
    config: &AgentConfig,
    seed: u64,
) -> Result<(MacroPolicy, RolloutLog)> {
    train_lifted(maze, library, budget, config, seed, None)
}

/// `train` with an optional action lift mapping skill actions to the plane.
pub fn train_lifted(
    maze: &Maze,
    library: &SkillLibrary,
    budget: usize,
    config: &AgentConfig,
    seed: u64,
    lift: Option<&ActionLift>,
) -> Result<(MacroPolicy, RolloutLog)> {
    config.validate()?;
    check_action_dim(library, lift)?;
    let skills = skill_actions(library)?;
    if budget < maze.spec().horizon {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is below one episode horizon {}",
            maze.spec().horizon
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = MacroPolicy::zeros(maze.rows(), maze.cols(), skills.len(), seed);
    let mut log = RolloutLog::default();
    let mut steps_used = 0;
    while steps_used < budget {
        let mut state = maze.reset(rng.gen());
        let mut episode = EpisodeLog {
            positions: Vec::new(),
            rewards: Vec::new(),
        };
        while !state.done && steps_used < budget {
            let cell = maze.cell_of(state.position);
            let epsilon = config.epsilon_at(steps_used, budget);
            let choice = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..skills.len())
            } else {
                policy.greedy(cell)
            };
            let outcome = execute_skill(
                maze,
                &mut state,
                skills[choice],
                lift,
                budget - steps_used,
            )?;
            steps_used += outcome.steps;
            let bootstrap = policy.max_q(maze.cell_of(state.position));
            let target = macro_backup(config.gamma, &outcome.rewards, bootstrap, state.done);
            let cell_index = policy.cell_index(cell);
            let q = &mut policy.q_values[cell_index][choice];
            *q += config.alpha * (target - *q);
            episode.positions.extend(outcome.positions);
            episode.rewards.extend(outcome.rewards);
        }
        log.episodes.push(episode);
    }
    Ok((policy, log))
}

/// Greedy success rate over fresh episodes: the fraction that reach the goal.
pub fn evaluate(
    maze: &Maze,
    library: &SkillLibrary,
    policy: &MacroPolicy,
    episodes: usize,
    seed: u64,
    lift: Option<&ActionLift>,
) -> Result<(f64, RolloutLog)> {
    check_action_dim(library, lift)?;
    let skills = skill_actions(library)?;
    if episodes == 0 {
        return Err(Error::InvalidConfig(
            "evaluation needs at least one episode".into(),
        ));
    }
    if policy.rows != maze.rows() || policy.cols != maze.cols() || policy.n_skills != skills.len()
    {
        return Err(Error::InvalidConfig(
            "policy shape does not match the maze and skill library".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = RolloutLog::default();
    let mut successes = 0;
    for _ in 0..episodes {
        let mut state = maze.reset(rng.gen());
        let mut episode = EpisodeLog {
            positions: Vec::new(),
            rewards: Vec::new(),
        };
        while !state.done {
            let skill = policy.greedy(maze.cell_of(state.position));
            let outcome = execute_skill(maze, &mut state, skills[skill], lift, usize::MAX)?;
            episode.positions.extend(outcome.positions);
            episode.rewards.extend(outcome.rewards);
        }
        if episode.episode_return() > 0.0 {
            successes += 1;
        }
        log.episodes.push(episode);
    }
    Ok((successes as f64 / episodes as f64, log))
}
