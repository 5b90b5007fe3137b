//! Viewpoint-planning episode: fixed three-view bootstrap, step semantics,
//! the 43-value observation vector, reward and termination.
//!
//! Any driver (the scripted planners in [`crate::bench`] or an external
//! learner) calls [`Episode::step`] with a 5D pose and receives the next
//! observation, the reward and the done flag.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mapping::{information_gain, motion_cost, HeightMap, MapParams};
use crate::scene::SceneState;
use crate::sensor::{depth_to_pointcloud, pose_valid, render_unchecked, CameraIntrinsics, CameraPose, Workspace};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub alpha: f64,
    pub beta: f64,
    pub collision_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 10.0, collision_penalty: -25.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationCriteria {
    pub tau_single: f64,
    pub tau_sum: f64,
    pub window: usize,
}

impl Default for TerminationCriteria {
    fn default() -> Self {
        Self { tau_single: 0.01, tau_sum: 0.05, window: 3 }
    }
}

impl TerminationCriteria {
    /// True once the last `window` entropy changes are each below
    /// `tau_single` and their sum is below `tau_sum`.
    pub fn reached(&self, recent: &VecDeque<f64>) -> bool {
        recent.len() >= self.window
            && recent.iter().rev().take(self.window).all(|d| d.abs() < self.tau_single)
            && recent.iter().rev().take(self.window).map(|d| d.abs()).sum::<f64>() < self.tau_sum
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub intrinsics: CameraIntrinsics,
    pub workspace: Workspace,
    pub map: MapParams,
    pub reward: RewardParams,
    pub termination: TerminationCriteria,
    /// Step cap per planning phase; `None` runs until termination.
    pub max_steps: Option<usize>,
    /// Chance that a valid step still ends in a simulated arm collision.
    /// Drawn from a stream seeded by the scene seed; 0 disables it.
    #[serde(default)]
    pub collision_rate: f64,
}

impl EpisodeConfig {
    pub fn for_scene(scene: &SceneState) -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            workspace: Workspace::for_shelf(&scene.shelf),
            map: MapParams::default(),
            reward: RewardParams::default(),
            termination: TerminationCriteria::default(),
            max_steps: None,
            collision_rate: 0.0,
        }
    }
}

/// Observation layout: pooled map features, last action, information gain,
/// motion cost, collision/drop flag, largest-unknown center.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub [f64; Observation::LEN]);

impl Observation {
    pub const LEN: usize = 43;
    pub const FEATURES: std::ops::Range<usize> = 0..32;
    pub const LAST_ACTION: std::ops::Range<usize> = 32..37;
    pub const INFORMATION_GAIN: usize = 37;
    pub const MOTION_COST: usize = 38;
    pub const FLAG: usize = 39;
    pub const UNKNOWN_CENTER: std::ops::Range<usize> = 40..43;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Concatenates the observation parts in their fixed order.
pub fn build_observation(
    map: &HeightMap,
    last_action: &CameraPose,
    information_gain: f64,
    motion_cost: f64,
    flag: bool,
) -> Observation {
    let mut v = [0.0; Observation::LEN];
    v[Observation::FEATURES].copy_from_slice(&map.pooled_features());
    v[Observation::LAST_ACTION].copy_from_slice(&last_action.to_array());
    v[Observation::INFORMATION_GAIN] = information_gain;
    v[Observation::MOTION_COST] = motion_cost;
    v[Observation::FLAG] = if flag { 1.0 } else { 0.0 };
    let c = map.largest_unknown_center().center;
    v[Observation::UNKNOWN_CENTER].copy_from_slice(&[c.x, c.y, c.z]);
    Observation(v)
}

/// The three fixed opening views: one high above the front edge facing the
/// shelf center, and one just inside each front corner under the top panel,
/// yawed diagonally towards the opposite back corner.
pub fn bootstrap_poses(scene: &SceneState, ws: &Workspace) -> [CameraPose; 3] {
    let s = &scene.shelf;
    let top = s.top_z();
    let center = CameraPose::new(-0.18, s.width_m / 2.0, top + 0.09, (-42f64).to_radians(), 0.0);
    let corner_pitch = (-45f64).to_radians();
    let corner_yaw = 44f64.to_radians();
    let left = CameraPose::new(0.02, 0.08, top - 0.01, corner_pitch, corner_yaw);
    let right = CameraPose::new(0.02, s.width_m - 0.08, top - 0.01, corner_pitch, -corner_yaw);
    [ws.clamp(&center), ws.clamp(&left), ws.clamp(&right)]
}

/// Renders `pose` and fuses the returns into `map`.
pub fn observe(scene: &SceneState, map: &mut HeightMap, pose: &CameraPose, intr: &CameraIntrinsics) {
    let img = render_unchecked(scene, pose, intr);
    map.integrate(&depth_to_pointcloud(&img, pose, intr));
}

/// Executes the three opening views on `map` and returns them.
pub fn bootstrap(
    scene: &SceneState,
    map: &mut HeightMap,
    intr: &CameraIntrinsics,
    ws: &Workspace,
) -> [CameraPose; 3] {
    let poses = bootstrap_poses(scene, ws);
    for p in &poses {
        observe(scene, map, p, intr);
    }
    poses
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: usize,
    pub pose: CameraPose,
    pub valid: bool,
    pub unknown_before: usize,
    pub unknown_after: usize,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub information_gain: f64,
    pub motion_cost: f64,
    pub reward: f64,
    pub collision: bool,
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub bootstrap: Vec<CameraPose>,
    pub unknown_bootstrap: usize,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    /// One JSON object per step, newline separated.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(seed: u64, text: &str) -> Result<Self> {
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<StepRecord>, _>>()?;
        Ok(Self { seed, steps, ..Self::default() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct Episode {
    config: EpisodeConfig,
    scene: SceneState,
    map: HeightMap,
    bootstrap: [CameraPose; 3],
    last_pose: CameraPose,
    last_ig: f64,
    last_cost: f64,
    flag: bool,
    recent: VecDeque<f64>,
    done: bool,
    phase: usize,
    phase_steps: usize,
    events: ChaCha8Rng,
    trace: EpisodeTrace,
}

impl Episode {
    /// Fresh map plus the bootstrap views. The post-bootstrap state is the
    /// initial observation.
    pub fn new(scene: SceneState, config: EpisodeConfig) -> Result<Self> {
        config.intrinsics.validate()?;
        if !(0.0..=1.0).contains(&config.collision_rate) {
            return Err(Error::InvalidArgument(format!("collision rate {} outside [0, 1]", config.collision_rate)));
        }
        let mut map = HeightMap::new(&scene.shelf, &config.map)?;
        let bootstrap = bootstrap(&scene, &mut map, &config.intrinsics, &config.workspace);
        let scene_seed = scene.seed;
        let trace = EpisodeTrace {
            seed: scene.seed,
            bootstrap: bootstrap.to_vec(),
            unknown_bootstrap: map.unknown_count(),
            steps: Vec::new(),
        };
        Ok(Self {
            last_pose: bootstrap[2],
            config,
            scene,
            map,
            bootstrap,
            last_ig: 0.0,
            last_cost: 0.0,
            flag: false,
            recent: VecDeque::new(),
            done: false,
            phase: 0,
            phase_steps: 0,
            events: ChaCha8Rng::seed_from_u64(scene_seed ^ 0xc011_1de5),
            trace,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn map(&self) -> &HeightMap {
        &self.map
    }

    pub fn bootstrap_poses(&self) -> &[CameraPose; 3] {
        &self.bootstrap
    }

    pub fn last_pose(&self) -> &CameraPose {
        &self.last_pose
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EpisodeTrace {
        self.trace
    }

    pub fn observation(&self) -> Observation {
        build_observation(&self.map, &self.last_pose, self.last_ig, self.last_cost, self.flag)
    }

    pub fn step(&mut self, pose: CameraPose) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let unknown_before = self.map.unknown_count();
        let entropy_before = self.map.entropy();
        let cost = motion_cost(&self.last_pose, &pose);
        let valid = pose_valid(&pose, &self.config.workspace);
        let event = valid && self.config.collision_rate > 0.0 && self.events.gen_bool(self.config.collision_rate);
        if valid && !event {
            observe(&self.scene, &mut self.map, &pose, &self.config.intrinsics);
        }
        let unknown_after = self.map.unknown_count();
        let entropy_after = self.map.entropy();
        let ig = information_gain(unknown_before, unknown_after);
        let collision = !valid || event;
        let rp = &self.config.reward;
        let r_sparse = if collision { rp.collision_penalty } else { 0.0 };
        let r_cont = -rp.alpha * cost + rp.beta * ig;
        let reward = r_sparse + r_cont;

        self.recent.push_back(entropy_before - entropy_after);
        while self.recent.len() > self.config.termination.window {
            self.recent.pop_front();
        }
        self.phase_steps += 1;
        self.done = collision
            || self.config.termination.reached(&self.recent)
            || self.config.max_steps.is_some_and(|m| self.phase_steps >= m);

        self.last_pose = pose;
        self.last_ig = ig;
        self.last_cost = cost;
        self.flag = collision;
        self.trace.steps.push(StepRecord {
            step: self.trace.steps.len(),
            phase: self.phase,
            pose,
            valid,
            unknown_before,
            unknown_after,
            entropy_before,
            entropy_after,
            information_gain: ig,
            motion_cost: cost,
            reward,
            collision,
            done: self.done,
        });
        Ok(StepResult { observation: self.observation(), reward, done: self.done })
    }

    /// Swaps in the scene produced by a push. Dropped objects raise the
    /// collision/drop flag of the next observation.
    pub fn replace_scene(&mut self, scene: SceneState, dropped: bool) {
        self.scene = scene;
        self.flag = dropped;
    }

    /// Starts a new planning phase on the same map: the termination window
    /// and step cap reset, the map and camera position carry over.
    pub fn begin_phase(&mut self) {
        self.phase += 1;
        self.phase_steps = 0;
        self.recent.clear();
        self.done = false;
    }
}
