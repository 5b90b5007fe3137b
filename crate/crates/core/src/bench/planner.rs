//! Scripted viewpoint planners used as baselines.
//!
//! `Greedy` and `Global` are sampling-based analogs of a greedy next-best-view
//! planner and a global-coverage sampling planner. They predict visibility by
//! casting rays into the believed map, where unknown cells are transparent
//! and only known occupied columns block a ray. That prediction is
//! optimistic by construction.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::RewardParams;
use crate::geometry::Vec3;
use crate::mapping::{motion_cost, CellState, HeightMap};
use crate::sensor::{CameraIntrinsics, CameraPose, Workspace};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Fixed3P,
    Random,
    Greedy,
    Global,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [Self::Fixed3P, Self::Random, Self::Greedy, Self::Global];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Fixed3P => "fixed3p",
            Self::Random => "random",
            Self::Greedy => "greedy",
            Self::Global => "global",
        }
    }

    /// Human-readable description for reports.
    pub fn description(&self) -> &'static str {
        match self {
            Self::Fixed3P => "three fixed bootstrap views only",
            Self::Random => "uniform random valid pose",
            Self::Greedy => "greedy sampled next-best-view (analog, not a reimplementation)",
            Self::Global => "global sampled max-coverage sequence (analog, not a reimplementation)",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed3p" | "3p" => Ok(Self::Fixed3P),
            "random" => Ok(Self::Random),
            "greedy" | "greedynbv" => Ok(Self::Greedy),
            "global" | "globalsampling" => Ok(Self::Global),
            other => Err(Error::InvalidArgument(format!("unknown planner {other:?}"))),
        }
    }
}

/// Unknown cells (row-major indices, sorted) whose board surface a pose is
/// predicted to see.
pub fn predicted_unknown_cells(map: &HeightMap, pose: &CameraPose, intr: &CameraIntrinsics) -> Vec<u32> {
    let mut hit = vec![false; map.len()];
    let origin = pose.position();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = intr.pixel_ray(pose, u as f64, v as f64);
            if let Some(i) = landing_cell(map, origin, d, intr.max_range) {
                if map.state_at(i) == CellState::Unknown {
                    hit[i] = true;
                }
            }
        }
    }
    (0..map.len() as u32).filter(|&i| hit[i as usize]).collect()
}

/// Cell where the ray `o + t d` reaches the board inside the believed map,
/// or `None` if a wall, the top, a known object column or the range limit
/// stops it first. `d` has unit forward component so `t` is planar depth.
pub fn landing_cell(map: &HeightMap, o: Vec3, d: Vec3, max_t: f64) -> Option<usize> {
    let cell = map.params.cell_size;
    let (depth, width) = (map.depth(), map.width());
    let board = map.board_z;
    let top = board + map.interior_height;

    // Interval of t inside the footprint prism.
    let mut t0: f64 = 0.0;
    let mut t1 = max_t;
    for (oi, di, hi) in [(o.x, d.x, depth), (o.y, d.y, width)] {
        if di.abs() < 1e-300 {
            if oi < 0.0 || oi >= hi {
                return None;
            }
        } else {
            let a = (0.0 - oi) / di;
            let b = (hi - oi) / di;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    if t0 >= t1 {
        return None;
    }
    let z_entry = o.z + d.z * t0;
    if z_entry <= board || z_entry >= top {
        return None;
    }
    // Never reaching the board within the prism: lands nowhere.
    if d.z >= 0.0 {
        return None;
    }
    let t_board = (board - o.z) / d.z;

    let p = o + d * t0;
    let n_r = map.rows as i64;
    let n_c = map.cols as i64;
    let mut r = ((p.x / cell).floor() as i64).clamp(0, n_r - 1);
    let mut c = ((p.y / cell).floor() as i64).clamp(0, n_c - 1);
    let step_r: i64 = if d.x > 0.0 { 1 } else { -1 };
    let step_c: i64 = if d.y > 0.0 { 1 } else { -1 };
    let bound = |i: i64, s: i64| if s > 0 { (i + 1) as f64 * cell } else { i as f64 * cell };
    let mut tr = if d.x.abs() < 1e-300 { f64::INFINITY } else { (bound(r, step_r) - o.x) / d.x };
    let mut tc = if d.y.abs() < 1e-300 { f64::INFINITY } else { (bound(c, step_c) - o.y) / d.y };
    let dr = if d.x.abs() < 1e-300 { f64::INFINITY } else { cell / d.x.abs() };
    let dc = if d.y.abs() < 1e-300 { f64::INFINITY } else { cell / d.y.abs() };
    let mut t_in = t0;
    loop {
        let t_out = tr.min(tc).min(t1);
        let i = (r * n_c + c) as usize;
        if map.state_at(i) == CellState::Occupied {
            // Descending ray: lowest point in the cell is at t_out.
            let z_low = o.z + d.z * t_out.min(t_board);
            if z_low <= board + map.height[i] {
                return None;
            }
        }
        if t_board <= t_out {
            return (t_board >= t_in && t_board <= t1).then_some(i);
        }
        if t_out >= t1 {
            return None;
        }
        t_in = t_out;
        if tr < tc {
            r += step_r;
            tr += dr;
        } else {
            c += step_c;
            tc += dc;
        }
        if r < 0 || c < 0 || r >= n_r || c >= n_c {
            return None;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// Sampled poses per decision (greedy) or pool size (global).
    pub n_candidates: usize,
    /// Ray grid used for visibility prediction.
    pub prediction: CameraIntrinsics,
    pub reward: RewardParams,
}

impl PlannerConfig {
    pub fn new(kind: PlannerKind) -> Self {
        Self {
            kind,
            n_candidates: 64,
            prediction: CameraIntrinsics::default().scaled(32, 24),
            reward: RewardParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Planner {
    config: PlannerConfig,
    rng: ChaCha8Rng,
    fixed: Vec<CameraPose>,
    fixed_next: usize,
    pool: Vec<CameraPose>,
    plan: VecDeque<CameraPose>,
    last_plan: Option<CameraPose>,
}

impl Planner {
    /// `fixed` holds the bootstrap views cycled by the fixed planner.
    pub fn new(config: PlannerConfig, seed: u64, fixed: &[CameraPose]) -> Self {
        let salt = match config.kind {
            PlannerKind::Fixed3P => 0x3b,
            PlannerKind::Random => 0x5a,
            PlannerKind::Greedy => 0x9e,
            PlannerKind::Global => 0xc1,
        };
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt),
            config,
            fixed: fixed.to_vec(),
            fixed_next: 0,
            pool: Vec::new(),
            plan: VecDeque::new(),
            last_plan: None,
        }
    }

    pub fn kind(&self) -> PlannerKind {
        self.config.kind
    }

    pub fn next_view(&mut self, map: &HeightMap, ws: &Workspace, last: &CameraPose) -> Result<CameraPose> {
        match self.config.kind {
            PlannerKind::Fixed3P => {
                if self.fixed.is_empty() {
                    return Err(Error::NoCandidates);
                }
                let p = self.fixed[self.fixed_next % self.fixed.len()];
                self.fixed_next += 1;
                Ok(p)
            }
            PlannerKind::Random => Ok(ws.sample(&mut self.rng)),
            PlannerKind::Greedy => {
                let candidates: Vec<CameraPose> = (0..self.config.n_candidates).map(|_| ws.sample(&mut self.rng)).collect();
                greedy_choice(map, &candidates, last, &self.config)
            }
            PlannerKind::Global => {
                if self.pool.is_empty() {
                    if self.config.n_candidates == 0 {
                        return Err(Error::NoCandidates);
                    }
                    self.pool = (0..self.config.n_candidates).map(|_| ws.sample(&mut self.rng)).collect();
                }
                if self.plan.is_empty() {
                    self.plan = coverage_sequence(map, &self.pool, &self.config.prediction).into();
                }
                let next = match self.plan.pop_front() {
                    Some(p) => p,
                    None => self.last_plan.unwrap_or(self.pool[0]),
                };
                self.last_plan = Some(next);
                Ok(next)
            }
        }
    }
}

/// Best expected reward `β · predicted IG − α · cost`; ties go to the first.
pub fn greedy_choice(
    map: &HeightMap,
    candidates: &[CameraPose],
    last: &CameraPose,
    cfg: &PlannerConfig,
) -> Result<CameraPose> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let unknown = map.unknown_count().max(1) as f64;
    let scores = par::map(candidates, |p| {
        let seen = predicted_unknown_cells(map, p, &cfg.prediction).len() as f64;
        cfg.reward.beta * seen / unknown - cfg.reward.alpha * motion_cost(last, p)
    });
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(candidates[best])
}

/// Greedy maximum-coverage ordering of `pool` over predicted visible unknown
/// cells. Poses adding nothing are left out.
pub fn coverage_sequence(map: &HeightMap, pool: &[CameraPose], intr: &CameraIntrinsics) -> Vec<CameraPose> {
    let sets = par::map(pool, |p| predicted_unknown_cells(map, p, intr));
    let mut covered = vec![false; map.len()];
    let mut used = vec![false; pool.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, set) in sets.iter().enumerate() {
            if used[i] {
                continue;
            }
            let gain = set.iter().filter(|&&c| !covered[c as usize]).count();
            if gain > 0 && best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        used[i] = true;
        for &c in &sets[i] {
            covered[c as usize] = true;
        }
        out.push(pool[i]);
    }
    out
}
