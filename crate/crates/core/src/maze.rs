//! Sparse-reward 2-D point-mass maze and scripted demonstrations.
//!
//! The world is a grid of square cells parsed from an ASCII map (`#` wall,
//! `.` free, `S` start, `G` goal). The agent is a point with per-axis
//! velocity commands clamped to `max_action`. Movement resolves collisions by
//! axis: the x displacement is applied first, stopping a hair short of the
//! first wall in its way, then the y displacement, so pushing diagonally into
//! a wall slides along it. Reward is 1 exactly when the position is within
//! `goal_radius` of the goal-cell center, which also ends the episode;
//! otherwise reward is 0 and the episode ends at `horizon` steps.
//!
//! Demonstrations are scripted: pick two random free cells, walk the
//! shortest cell path between them at full speed with Gaussian action noise,
//! and record every (observation, action) pair, noise, collisions and all.
//! The recorded action is the unclamped noisy command; the environment clamps
//! on execution. An optional fixed linear lift embeds the 2-D commands in a
//! higher-dimensional action space.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, Trajectory};
use crate::error::{Error, Result};

/// Static description of a maze. `grid[row][col]` is true for walls; row 0
/// is the top line of the ASCII map and y grows downward, so "bottom left"
/// means high row, low column.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    pub grid: Vec<Vec<bool>>,
    pub cell_size: f64,
    pub start_cell: (usize, usize),
    pub goal_cell: (usize, usize),
    pub goal_radius: f64,
    pub max_action: f64,
    pub horizon: usize,
    pub seed: u64,
}

const U_MAP: &str = "\
#####
#..G#
###.#
#S..#
#####";

const MEDIUM_MAP: &str = "\
##########
#.......G#
#.######.#
#........#
#.######.#
#........#
#.######.#
#........#
#S.......#
##########";

const LARGE_MAP: &str = "\
##############
#...........G#
#.##########.#
#............#
#.##########.#
#............#
#.##########.#
#............#
#.##########.#
#............#
#.##########.#
#............#
#S...........#
##############";

impl MazeSpec {
    /// Parses an ASCII map: `#` wall, `.` free, `S` start, `G` goal, one row
    /// per line, exactly one start and one goal.
    pub fn from_ascii(
        map: &str,
        cell_size: f64,
        goal_radius: f64,
        max_action: f64,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut grid = Vec::new();
        let mut start = None;
        let mut goal = None;
        for (row, line) in map.lines().enumerate() {
            let mut cells = Vec::new();
            for (col, ch) in line.chars().enumerate() {
                let wall = match ch {
                    '#' => true,
                    '.' => false,
                    'S' => {
                        if start.replace((row, col)).is_some() {
                            return Err(Error::InvalidConfig(
                                "maze map has more than one start cell".into(),
                            ));
                        }
                        false
                    }
                    'G' => {
                        if goal.replace((row, col)).is_some() {
                            return Err(Error::InvalidConfig(
                                "maze map has more than one goal cell".into(),
                            ));
                        }
                        false
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown maze map character {other:?} at row {row}, column {col}"
                        )));
                    }
                };
                cells.push(wall);
            }
            grid.push(cells);
        }
        let start_cell = start
            .ok_or_else(|| Error::InvalidConfig("maze map has no start cell".into()))?;
        let goal_cell =
            goal.ok_or_else(|| Error::InvalidConfig("maze map has no goal cell".into()))?;
        Ok(MazeSpec {
            grid,
            cell_size,
            start_cell,
            goal_cell,
            goal_radius,
            max_action,
            horizon,
            seed,
        })
    }

    /// One of the built-in layouts: "u", "medium", or "large". Start is at
    /// the bottom left, goal at the top right. Defaults: cell size 1, goal
    /// radius 0.5, per-axis action bound 0.2, horizon 600.
    pub fn builtin(name: &str) -> Result<Self> {
        let map = match name {
            "u" => U_MAP,
            "medium" => MEDIUM_MAP,
            "large" => LARGE_MAP,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown maze {other:?}, expected \"u\", \"medium\", or \"large\""
                )));
            }
        };
        Self::from_ascii(map, 1.0, 0.5, 0.2, 600, 0)
    }
}

/// Dynamic episode state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub position: [f64; 2],
    pub steps_elapsed: usize,
    pub done: bool,
}

/// Outcome of one primitive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: [f64; 2],
    pub reward: f64,
    pub done: bool,
    pub collision: bool,
}

/// A validated maze ready to simulate.
#[derive(Debug, Clone)]
pub struct Maze {
    spec: MazeSpec,
    rows: usize,
    cols: usize,
    free_cells: Vec<(usize, usize)>,
}

impl Maze {
    /// Validates the spec: rectangular non-empty grid, positive geometry,
    /// free start and goal, and fully connected free space (every free cell
    /// reachable from the start), so scripted demonstrations can route
    /// between any two free cells and coverage is attainable everywhere.
    pub fn new(spec: MazeSpec) -> Result<Self> {
        let rows = spec.grid.len();
        if rows == 0 {
            return Err(Error::InvalidConfig("maze grid is empty".into()));
        }
        let cols = spec.grid[0].len();
        if cols == 0 || spec.grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig(
                "maze grid rows must be non-empty and equal length".into(),
            ));
        }
        if !(spec.cell_size > 0.0
            && spec.goal_radius > 0.0
            && spec.max_action > 0.0
            && spec.cell_size.is_finite()
            && spec.goal_radius.is_finite()
            && spec.max_action.is_finite())
        {
            return Err(Error::InvalidConfig(
                "cell_size, goal_radius, and max_action must be positive and finite".into(),
            ));
        }
        if spec.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        for (name, (r, c)) in [("start", spec.start_cell), ("goal", spec.goal_cell)] {
            if r >= rows || c >= cols || spec.grid[r][c] {
                return Err(Error::InvalidConfig(format!(
                    "{name} cell ({r}, {c}) is not a free cell"
                )));
            }
        }
        let free_cells: Vec<(usize, usize)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .filter(|&(r, c)| !spec.grid[r][c])
            .collect();
        let reached = flood_fill(&spec.grid, spec.start_cell);
        if reached != free_cells.len() {
            return Err(Error::InvalidConfig(format!(
                "maze free space is disconnected: {} of {} free cells reachable from start",
                reached,
                free_cells.len()
            )));
        }
        Ok(Maze {
            spec,
            rows,
            cols,
            free_cells,
        })
    }

    pub fn spec(&self) -> &MazeSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free_cells
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        row >= self.rows || col >= self.cols || self.spec.grid[row][col]
    }

    /// Grid cell containing a position.
    pub fn cell_of(&self, position: [f64; 2]) -> (usize, usize) {
        let cs = self.spec.cell_size;
        let col = ((position[0] / cs).floor().max(0.0) as usize).min(self.cols - 1);
        let row = ((position[1] / cs).floor().max(0.0) as usize).min(self.rows - 1);
        (row, col)
    }

    pub fn cell_center(&self, cell: (usize, usize)) -> [f64; 2] {
        let cs = self.spec.cell_size;
        [
            (cell.1 as f64 + 0.5) * cs,
            (cell.0 as f64 + 0.5) * cs,
        ]
    }

    pub fn goal_center(&self) -> [f64; 2] {
        self.cell_center(self.spec.goal_cell)
    }

    /// Fresh episode at the start-cell center plus a seeded uniform jitter of
    /// at most a tenth of a cell per axis.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = self.cell_center(self.spec.start_cell);
        let j = 0.1 * self.spec.cell_size;
        EnvState {
            position: [
                center[0] + rng.gen_range(-j..=j),
                center[1] + rng.gen_range(-j..=j),
            ],
            steps_elapsed: 0,
            done: false,
        }
    }

    /// Episode state at an explicit position, which must lie in a free cell.
    pub fn state_at(&self, position: [f64; 2]) -> Result<EnvState> {
        let (r, c) = self.cell_of(position);
        if self.is_wall(r, c)
            || position[0] < 0.0
            || position[1] < 0.0
            || position[0] > self.cols as f64 * self.spec.cell_size
            || position[1] > self.rows as f64 * self.spec.cell_size
        {
            return Err(Error::InvalidConfig(format!(
                "position ({}, {}) is not inside a free cell",
                position[0], position[1]
            )));
        }
        Ok(EnvState {
            position,
            steps_elapsed: 0,
            done: false,
        })
    }

    /// Applies one clamped action with axis-separated sliding collision.
    pub fn step(&self, state: &mut EnvState, action: &[f64]) -> Result<StepResult> {
        if state.done {
            return Err(Error::Internal(
                "step called on a finished episode".into(),
            ));
        }
        if action.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: action.len(),
                context: "maze action".into(),
            });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("non-finite maze action".into()));
        }
        let m = self.spec.max_action;
        let (new_pos, collision) = self.move_point(
            state.position,
            [action[0].clamp(-m, m), action[1].clamp(-m, m)],
        );
        state.position = new_pos;
        state.steps_elapsed += 1;
        let goal = self.goal_center();
        let dx = new_pos[0] - goal[0];
        let dy = new_pos[1] - goal[1];
        let at_goal = (dx * dx + dy * dy).sqrt() <= self.spec.goal_radius;
        let reward = if at_goal { 1.0 } else { 0.0 };
        state.done = at_goal || state.steps_elapsed >= self.spec.horizon;
        Ok(StepResult {
            observation: new_pos,
            reward,
            done: state.done,
            collision,
        })
    }

    /// Pure collision physics: x displacement first, then y.
    pub fn move_point(&self, position: [f64; 2], delta: [f64; 2]) -> ([f64; 2], bool) {
        let (x, cx) = self.slide_axis(position, 0, delta[0]);
        let moved = [x, position[1]];
        let (y, cy) = self.slide_axis(moved, 1, delta[1]);
        ([x, y], cx || cy)
    }

    /// Moves one coordinate, stopping a hair short of the first wall cell or
    /// grid edge crossed. Returns the new coordinate and a collision flag.
    fn slide_axis(&self, position: [f64; 2], axis: usize, delta: f64) -> (f64, bool) {
        let cs = self.spec.cell_size;
        let margin = 1e-9 * cs;
        let target = position[axis] + delta;
        if delta == 0.0 {
            return (position[axis], false);
        }
        let fixed = (position[1 - axis] / cs).floor() as i64;
        let from = (position[axis] / cs).floor() as i64;
        let to = (target / cs).floor() as i64;
        let dir: i64 = if delta > 0.0 { 1 } else { -1 };
        let mut cell = from;
        while cell != to {
            let next = cell + dir;
            let (row, col) = if axis == 0 {
                (fixed, next)
            } else {
                (next, fixed)
            };
            let blocked = row < 0
                || col < 0
                || self.is_wall(row as usize, col as usize);
            if blocked {
                let boundary = if dir > 0 {
                    next as f64 * cs - margin
                } else {
                    (next + 1) as f64 * cs + margin
                };
                return (boundary, true);
            }
            cell = next;
        }
        (target, false)
    }

    /// Shortest cell path between two free cells (inclusive of both ends),
    /// guaranteed to exist by the connectivity check.
    fn cell_path(&self, from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.rows * self.cols];
        let index = |(r, c): (usize, usize)| r * self.cols + c;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(from);
        parent[index(from)] = Some(from);
        while let Some(cell) = queue.pop_front() {
            if cell == to {
                break;
            }
            let (r, c) = cell;
            let neighbors = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for next in neighbors {
                if !self.is_wall(next.0, next.1) && parent[index(next)].is_none() {
                    parent[index(next)] = Some(cell);
                    queue.push_back(next);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[index(cur)].expect("free space is connected");
            path.push(cur);
        }
        path.reverse();
        path
    }
}

fn flood_fill(grid: &[Vec<bool>], start: (usize, usize)) -> usize {
    let rows = grid.len();
    let cols = grid[0].len();
    let mut seen = vec![false; rows * cols];
    let mut queue = std::collections::VecDeque::new();
    seen[start.0 * cols + start.1] = true;
    queue.push_back(start);
    let mut count = 0;
    while let Some((r, c)) = queue.pop_front() {
        count += 1;
        let neighbors = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in neighbors {
            if nr < rows && nc < cols && !grid[nr][nc] && !seen[nr * cols + nc] {
                seen[nr * cols + nc] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    count
}

/// Fixed random linear embedding of 2-D actions into a higher-dimensional
/// space, with a least-squares readout back. `readout(lift(a)) = a` up to
/// floating-point error, so demonstrations can be recorded in the lifted
/// space and lifted skills can still drive the 2-D maze.
#[derive(Debug, Clone)]
pub struct ActionLift {
    matrix: Vec<[f64; 2]>,
    pinv: Vec<[f64; 2]>,
}

impl ActionLift {
    /// Standard-normal lift matrix of shape `dim x 2`, deterministic in the
    /// seed. `dim` must be at least 2.
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "action lift dimension must be at least 2, got {dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix: Vec<[f64; 2]> = (0..dim)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        // Gram matrix LᵀL and its inverse; singular draws have probability
        // zero but are rejected for safety.
        let mut g = [[0.0f64; 2]; 2];
        for row in &matrix {
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += row[i] * row[j];
                }
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::Internal(
                "action lift draw is numerically singular".into(),
            ));
        }
        let ginv = [
            [g[1][1] / det, -g[0][1] / det],
            [-g[1][0] / det, g[0][0] / det],
        ];
        // pinv row r of Lᵀ scaled: pinv = (LᵀL)⁻¹ Lᵀ, stored column-wise per
        // lifted dimension so readout is a single pass.
        let pinv: Vec<[f64; 2]> = matrix
            .iter()
            .map(|row| {
                [
                    ginv[0][0] * row[0] + ginv[0][1] * row[1],
                    ginv[1][0] * row[0] + ginv[1][1] * row[1],
                ]
            })
            .collect();
        Ok(ActionLift { matrix, pinv })
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn lift(&self, action: [f64; 2]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row[0] * action[0] + row[1] * action[1])
            .collect()
    }

    pub fn readout(&self, lifted: &[f64]) -> Result<[f64; 2]> {
        if lifted.len() != self.matrix.len() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.len(),
                got: lifted.len(),
                context: "lifted action".into(),
            });
        }
        let mut out = [0.0; 2];
        for (coeffs, v) in self.pinv.iter().zip(lifted) {
            out[0] += coeffs[0] * v;
            out[1] += coeffs[1] * v;
        }
        Ok(out)
    }
}

/// Scripted demonstrations: waypoint-following runs between random pairs of
/// free cells with Gaussian action noise of standard deviation `noise`. The
/// recorded action is the noisy, unclamped command; movement applies the
/// clamped version, so the data includes wall crashes and dithering.
pub fn generate_demos(
    maze: &Maze,
    n_trajectories: usize,
    seed: u64,
    noise: f64,
    lift: Option<&ActionLift>,
) -> Result<Dataset> {
    if n_trajectories == 0 {
        return Err(Error::InvalidConfig(
            "demo generation needs at least one trajectory".into(),
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise must be finite and non-negative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cs = maze.spec.cell_size;
    let reach = 0.3 * cs;
    let mut trajectories = Vec::with_capacity(n_trajectories);
    for _ in 0..n_trajectories {
        let from = maze.free_cells[rng.gen_range(0..maze.free_cells.len())];
        let to = loop {
            let cell = maze.free_cells[rng.gen_range(0..maze.free_cells.len())];
            if cell != from {
                break cell;
            }
        };
        let path = maze.cell_path(from, to);
        let start = maze.cell_center(from);
        let j = 0.1 * cs;
        let mut pos = [
            start[0] + rng.gen_range(-j..=j),
            start[1] + rng.gen_range(-j..=j),
        ];
        let mut waypoint = 0;
        let mut observations = Vec::new();
        let mut actions = Vec::new();
        for _ in 0..maze.spec.horizon {
            let target = maze.cell_center(path[waypoint]);
            let near = (pos[0] - target[0]).hypot(pos[1] - target[1]) <= reach;
            if near {
                if waypoint + 1 == path.len() {
                    break;
                }
                waypoint += 1;
            }
            let target = maze.cell_center(path[waypoint]);
            let m = maze.spec.max_action;
            let desired = [
                (target[0] - pos[0]).clamp(-m, m),
                (target[1] - pos[1]).clamp(-m, m),
            ];
            let noisy = [
                desired[0] + noise * rng.sample::<f64, _>(StandardNormal),
                desired[1] + noise * rng.sample::<f64, _>(StandardNormal),
            ];
            observations.push(pos.to_vec());
            actions.push(match lift {
                Some(l) => l.lift(noisy),
                None => noisy.to_vec(),
            });
            let clamped = [noisy[0].clamp(-m, m), noisy[1].clamp(-m, m)];
            (pos, _) = maze.move_point(pos, clamped);
        }
        if actions.is_empty() {
            // Start jitter can land within reach of a directly adjacent
            // endpoint; record a single stand-still step so the trajectory
            // is non-empty.
            observations.push(pos.to_vec());
            let idle = [0.0, 0.0];
            actions.push(match lift {
                Some(l) => l.lift(idle),
                None => idle.to_vec(),
            });
        }
        trajectories.push(Trajectory {
            observations,
            actions,
        });
    }
    Dataset::new(trajectories)
}
