//! Point-mass navigation in the plane.
//!
//! The agent moves by bounded displacements toward a goal. Reward is the
//! negative Euclidean distance to the goal after the move; an episode ends
//! when the agent is within `GOAL_RADIUS` of the goal or at the horizon.
//!
//! Start states are uniform over a configurable rectangle (resampled if a
//! draw lands within twice the goal radius, so episodes never begin
//! solved). The `left`/`right` constructors restrict starts and the goal to
//! one half-plane, each with its own fixed goal; policies trained on one
//! half are competent on a disjoint slice of the state space. The default
//! environment mixes both halves: each episode starts on a random side with
//! that side's goal.

use rand::Rng;

use crate::error::Result;
use crate::rng::Prng;

use super::{check_action, Env, EnvSpec, Step};

pub const STEP_LIMIT: f64 = 0.1;
pub const GOAL_RADIUS: f64 = 0.05;
/// Distance of the per-side goals from the origin.
pub const SIDE_GOAL: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct PointNav {
    spec: EnvSpec,
    start_lo: [f64; 2],
    start_hi: [f64; 2],
    goal: [f64; 2],
    /// Each reset picks a random side: start in that half, goal on it.
    side_matched: bool,
    pos: [f64; 2],
    elapsed: usize,
    steps: u64,
}

impl PointNav {
    pub fn new(start_lo: [f64; 2], start_hi: [f64; 2], goal: [f64; 2], horizon: usize) -> Self {
        assert!(start_lo[0] <= start_hi[0] && start_lo[1] <= start_hi[1]);
        PointNav {
            spec: EnvSpec {
                obs_dim: 4,
                act_dim: 2,
                action_low: vec![-STEP_LIMIT; 2],
                action_high: vec![STEP_LIMIT; 2],
                horizon,
            },
            start_lo,
            start_hi,
            goal,
            side_matched: false,
            pos: [0.0; 2],
            elapsed: 0,
            steps: 0,
        }
    }

    /// Mixture of both halves: each episode starts uniformly in a random
    /// half of the unit box and navigates to that half's goal.
    pub fn full(horizon: usize) -> Self {
        let mut env = PointNav::new([-1.0, -1.0], [1.0, 1.0], [SIDE_GOAL, 0.0], horizon);
        env.side_matched = true;
        env
    }

    /// Starts and goal restricted to the left half-plane.
    pub fn left(horizon: usize) -> Self {
        PointNav::new([-1.0, -1.0], [0.0, 1.0], [-SIDE_GOAL, 0.0], horizon)
    }

    /// Starts and goal restricted to the right half-plane.
    pub fn right(horizon: usize) -> Self {
        PointNav::new([0.0, -1.0], [1.0, 1.0], [SIDE_GOAL, 0.0], horizon)
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn distance(&self) -> f64 {
        let dx = self.pos[0] - self.goal[0];
        let dy = self.pos[1] - self.goal[1];
        (dx * dx + dy * dy).sqrt()
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.goal[0] - self.pos[0],
            self.goal[1] - self.pos[1],
        ]
    }
}

impl Env for PointNav {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut Prng) -> Vec<f64> {
        if self.side_matched {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            self.goal = [sign * SIDE_GOAL, 0.0];
            loop {
                self.pos[0] = sign * rng.random_range(0.0..=1.0);
                self.pos[1] = rng.random_range(-1.0..=1.0);
                if self.distance() > 2.0 * GOAL_RADIUS {
                    break;
                }
            }
        } else {
            loop {
                for d in 0..2 {
                    self.pos[d] = rng.random_range(self.start_lo[d]..=self.start_hi[d]);
                }
                if self.distance() > 2.0 * GOAL_RADIUS {
                    break;
                }
                // Degenerate zero-width regions never loop: the configured
                // point is taken as-is even if it sits near the goal.
                if self.start_lo == self.start_hi {
                    break;
                }
            }
        }
        self.elapsed = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        check_action(&self.spec, action)?;
        for d in 0..2 {
            self.pos[d] += action[d].clamp(-STEP_LIMIT, STEP_LIMIT);
        }
        self.elapsed += 1;
        self.steps += 1;
        let dist = self.distance();
        let terminal = dist <= GOAL_RADIUS;
        let done = terminal || self.elapsed >= self.spec.horizon;
        Ok(Step {
            obs: self.observe(),
            reward: -dist,
            done,
            terminal,
        })
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1]]
    }

    fn elapsed(&self) -> usize {
        self.elapsed
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }
}
