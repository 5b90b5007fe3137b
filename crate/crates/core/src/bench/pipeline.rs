//! The interleaved viewpoint-planning / push pipeline for one scene.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::planner::{Planner, PlannerConfig, PlannerKind};
use crate::episode::{Episode, EpisodeConfig, EpisodeTrace};
use crate::mapping::MapParams;
use crate::push::{sample_candidates, select_best_push, select_random_push, execute_push, PushCandidate, PushConfig, RolloutView};
use crate::scene::{displacement, sample_scene, DimRanges, SceneState, ShelfSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushSelection {
    /// Rollout-scored, highest score wins.
    Scored,
    /// Uniform among candidates that touch an object.
    Random,
}

impl PushSelection {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Scored => "scored",
            Self::Random => "random",
        }
    }
}

impl std::str::FromStr for PushSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scored" => Ok(Self::Scored),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidArgument(format!("unknown push selection {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    /// A push whose follow-up (push plus re-planning) lowers the entropy by
    /// no more than this ends the pipeline.
    pub tau_push: f64,
    /// Upper bound on executed pushes.
    pub max_iterations: usize,
    /// Planner steps allowed per viewpoint-planning phase.
    pub max_vpp_steps: usize,
    /// `None` runs viewpoint planning only.
    pub push_selection: Option<PushSelection>,
    pub push: PushConfig,
    pub planner: PlannerConfig,
    pub map: MapParams,
    pub shelf: ShelfSpec,
    pub dims: DimRanges,
    /// Inclusive range of objects per scene.
    pub objects: (usize, usize),
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            tau_push: 0.01,
            max_iterations: 8,
            max_vpp_steps: 10,
            push_selection: Some(PushSelection::Scored),
            push: PushConfig::default(),
            planner: PlannerConfig::new(PlannerKind::Greedy),
            map: MapParams::default(),
            shelf: ShelfSpec::default(),
            dims: DimRanges::default(),
            objects: (8, 10),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_push > 0.0) {
            return Err(Error::InvalidArgument(format!("tau_push must be > 0, got {}", self.tau_push)));
        }
        if self.max_vpp_steps == 0 {
            return Err(Error::InvalidArgument("max_vpp_steps must be >= 1".into()));
        }
        if self.objects.0 > self.objects.1 {
            return Err(Error::InvalidArgument(format!("bad object range {:?}", self.objects)));
        }
        if !(self.push.length > 0.0) || !(self.push.lambda >= 0.0) {
            return Err(Error::InvalidArgument("push length must be > 0 and lambda >= 0".into()));
        }
        self.map.validate()?;
        self.shelf.validate()
    }

    /// The scene every configuration sees for `seed`.
    pub fn scene(&self, seed: u64) -> Result<SceneState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b1e_c75e_ed00);
        let n = rng.gen_range(self.objects.0..=self.objects.1);
        sample_scene(seed, n, &self.shelf, &self.dims)
    }
}

/// One executed push.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushRecord {
    pub iteration: usize,
    pub candidate: PushCandidate,
    pub contacted: u32,
    /// Sum of object center displacements (meters).
    pub displacement: f64,
    pub dropped: Vec<u32>,
    pub wall_collision: bool,
    /// Entropy before the push and after the re-planning that followed it.
    pub entropy_before: f64,
    pub entropy_after: f64,
}

/// Per-scene report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub seed: u64,
    pub planner: PlannerKind,
    pub push_selection: Option<PushSelection>,
    pub push_length: f64,
    pub n_objects: usize,
    pub vpp_steps: usize,
    pub entropy_bootstrap: f64,
    pub entropy_post_vpp: f64,
    pub entropy_final: f64,
    /// Percent reduction of the final map relative to the post-bootstrap map.
    pub vpp_reduction_pct: f64,
    /// Percent reduction of the final map relative to the post-VPP map.
    pub push_reduction_pct: f64,
    pub iterations: usize,
    pub displacement_total_cm: f64,
    /// Mean total displacement per executed push; zero without pushes.
    pub displacement_mean_cm: f64,
    /// Mean net center shift per remaining object, first scene to final.
    pub displacement_object_cm: f64,
    pub drops: usize,
    pub error: Option<String>,
    pub plan_ms_per_step: f64,
    pub push_ms_per_iteration: f64,
}

impl SceneRow {
    fn failed(seed: u64, params: &PipelineParams, err: &Error) -> Self {
        Self {
            seed,
            planner: params.planner.kind,
            push_selection: params.push_selection,
            push_length: params.push.length,
            n_objects: 0,
            vpp_steps: 0,
            entropy_bootstrap: f64::NAN,
            entropy_post_vpp: f64::NAN,
            entropy_final: f64::NAN,
            vpp_reduction_pct: f64::NAN,
            push_reduction_pct: f64::NAN,
            iterations: 0,
            displacement_total_cm: 0.0,
            displacement_mean_cm: 0.0,
            displacement_object_cm: 0.0,
            drops: 0,
            error: Some(err.to_string()),
            plan_ms_per_step: 0.0,
            push_ms_per_iteration: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub row: SceneRow,
    pub trace: EpisodeTrace,
    pub pushes: Vec<PushRecord>,
    pub final_scene: SceneState,
}

fn pct(from: f64, to: f64) -> f64 {
    if from > 0.0 {
        100.0 * (from - to) / from
    } else {
        0.0
    }
}

fn vpp_phase(ep: &mut Episode, planner: &mut Planner, params: &PipelineParams, plan_ns: &mut u128) -> Result<usize> {
    let mut steps = 0;
    while !ep.is_done() && steps < params.max_vpp_steps {
        let t = Instant::now();
        let pose = planner.next_view(ep.map(), &ep.config().workspace, ep.last_pose())?;
        *plan_ns += t.elapsed().as_nanos();
        ep.step(pose)?;
        steps += 1;
    }
    Ok(steps)
}

/// Bootstrap, then alternate viewpoint planning and pushes. The pipeline
/// stops when a push and the re-planning after it lower the entropy by at
/// most `tau_push`, when no candidate is left, after `max_iterations`
/// pushes, or once nothing is unknown.
pub fn run_pipeline(seed: u64, params: &PipelineParams) -> Result<PipelineResult> {
    params.validate()?;
    run_pipeline_on(params.scene(seed)?, seed, params)
}

/// `run_pipeline` on a given scene; `seed` drives the planner and push RNGs.
pub fn run_pipeline_on(scene: SceneState, seed: u64, params: &PipelineParams) -> Result<PipelineResult> {
    params.validate()?;
    let n_objects = scene.objects.len();
    let initial = scene.clone();
    let mut cfg = EpisodeConfig::for_scene(&scene);
    cfg.map = params.map.clone();
    let mut ep = Episode::new(scene, cfg)?;
    let mut planner = Planner::new(params.planner.clone(), seed, ep.bootstrap_poses());
    let mut push_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x7075_7368));
    let view = RolloutView { pose: ep.bootstrap_poses()[0], intrinsics: ep.config().intrinsics.clone() };

    let h_boot = ep.map().entropy();
    let mut plan_ns = 0u128;
    let mut push_ns = 0u128;
    let mut vpp_steps = vpp_phase(&mut ep, &mut planner, params, &mut plan_ns)?;
    let h_post_vpp = ep.map().entropy();
    let mut pushes: Vec<PushRecord> = Vec::new();

    if let Some(selection) = params.push_selection {
        loop {
            let h_now = ep.map().entropy();
            if let Some(last) = pushes.last_mut() {
                last.entropy_after = h_now;
                if last.entropy_before - h_now <= params.tau_push {
                    break;
                }
            }
            if pushes.len() >= params.max_iterations || ep.map().unknown_count() == 0 {
                break;
            }
            let t = Instant::now();
            let candidates = sample_candidates(ep.map(), &params.push);
            let chosen = match selection {
                PushSelection::Scored => {
                    select_best_push(ep.scene(), ep.map(), &candidates, &params.push, &view).map(|s| s.candidate)
                }
                PushSelection::Random => {
                    select_random_push(ep.scene(), &candidates, &params.push, &mut push_rng).map(|(_, c)| c)
                }
            };
            let Some(candidate) = chosen else { break };
            let outcome = execute_push(ep.scene(), &candidate, &params.push)?;
            push_ns += t.elapsed().as_nanos();
            pushes.push(PushRecord {
                iteration: pushes.len() + 1,
                candidate,
                contacted: outcome.contacted,
                displacement: outcome.total_displacement(),
                dropped: outcome.dropped.clone(),
                wall_collision: outcome.wall_collision,
                entropy_before: h_now,
                entropy_after: h_now,
            });
            let dropped = !outcome.dropped.is_empty();
            ep.replace_scene(outcome.scene_after, dropped);
            ep.begin_phase();
            vpp_steps += vpp_phase(&mut ep, &mut planner, params, &mut plan_ns)?;
        }
    }

    let h_final = ep.map().entropy();
    let iterations = pushes.len();
    let displacement_total_cm = pushes.iter().map(|p| p.displacement).sum::<f64>() * 100.0;
    let row = SceneRow {
        seed,
        planner: params.planner.kind,
        push_selection: params.push_selection,
        push_length: params.push.length,
        n_objects,
        vpp_steps,
        entropy_bootstrap: h_boot,
        entropy_post_vpp: h_post_vpp,
        entropy_final: h_final,
        vpp_reduction_pct: pct(h_boot, h_final),
        push_reduction_pct: pct(h_post_vpp, h_final),
        iterations,
        displacement_total_cm,
        displacement_mean_cm: if iterations > 0 { displacement_total_cm / iterations as f64 } else { 0.0 },
        displacement_object_cm: displacement(&initial, ep.scene())?.mean * 100.0,
        drops: pushes.iter().map(|p| p.dropped.len()).sum(),
        error: None,
        plan_ms_per_step: if vpp_steps > 0 { plan_ns as f64 / 1e6 / vpp_steps as f64 } else { 0.0 },
        push_ms_per_iteration: if iterations > 0 { push_ns as f64 / 1e6 / iterations as f64 } else { 0.0 },
    };
    let final_scene = ep.scene().clone();
    Ok(PipelineResult { row, trace: ep.into_trace(), pushes, final_scene })
}

/// `run_pipeline`, with failures folded into the row.
pub fn run_scene(seed: u64, params: &PipelineParams) -> SceneRow {
    match run_pipeline(seed, params) {
        Ok(r) => r.row,
        Err(e) => SceneRow::failed(seed, params, &e),
    }
}
