//! Push candidates, push maps, quasi-static push execution and rollout
//! scoring.
//!
//! Pushes are translation-only. The contacted object travels the push length
//! along the push direction; anything in its way is carried ahead by the
//! overlap it would otherwise create, recursively. Side walls and the back
//! panel stop the whole chain. The front edge is open, and an object whose
//! center ends up in front of it falls off the shelf.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::episode::observe;
use crate::geometry::{contact_distance, Footprint, Vec2, Vec3};
use crate::mapping::{log_odds, CellState, HeightMap};
use crate::scene::SceneState;
use crate::sensor::{CameraIntrinsics, CameraPose};
use crate::{par, Error, Result};

/// Push lengths swept by the length study (meters).
pub const PUSH_LENGTHS: [f64; 4] = [0.02, 0.05, 0.07, 0.10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushConfig {
    pub length: f64,
    pub rays_per_origin: usize,
    /// Ray origins sit this far in front of the shelf, at board height.
    pub origin_setback: f64,
    pub max_contact_height: f64,
    /// Displacement weight of the rollout score, per meter.
    pub lambda: f64,
    pub drop_penalty: f64,
    /// Largest distance between a push start and the object it contacts.
    pub contact_tolerance: f64,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self {
            length: 0.05,
            rays_per_origin: 25,
            origin_setback: 0.10,
            max_contact_height: 0.10,
            lambda: 0.5,
            drop_penalty: 1.0,
            contact_tolerance: 0.0075,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushCandidate {
    /// Contact point in the shelf frame.
    pub start: Vec3,
    pub row: usize,
    pub col: usize,
    /// Push angle is `direction * 45°`, measured from +x towards +y.
    pub direction: u8,
    pub length: f64,
}

impl PushCandidate {
    pub fn angle(&self) -> f64 {
        self.direction as f64 * FRAC_PI_4
    }

    pub fn unit(&self) -> Vec2 {
        Vec2::from_angle(self.angle())
    }
}

/// Cells crossed by the segment `from → to`, in order, restricted to the map.
pub fn grid_traversal(map: &HeightMap, from: Vec2, to: Vec2) -> Vec<(usize, usize)> {
    let cell = map.params.cell_size;
    let (depth, width) = (map.depth(), map.width());
    let d = to - from;
    // Clip to the grid rectangle.
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (o, di, hi) in [(from.x, d.x, depth), (from.y, d.y, width)] {
        if di.abs() < 1e-300 {
            if o < 0.0 || o >= hi {
                return Vec::new();
            }
        } else {
            let a = (0.0 - o) / di;
            let b = (hi - o) / di;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    if t0 > t1 {
        return Vec::new();
    }
    let start = from + d * t0;
    let clampi = |v: f64, n: usize| ((v / cell).floor().max(0.0) as usize).min(n - 1);
    let mut r = clampi(start.x, map.rows) as i64;
    let mut c = clampi(start.y, map.cols) as i64;
    let step_r: i64 = if d.x > 0.0 { 1 } else { -1 };
    let step_c: i64 = if d.y > 0.0 { 1 } else { -1 };
    let next_boundary = |i: i64, step: i64| if step > 0 { (i + 1) as f64 * cell } else { i as f64 * cell };
    let mut t_max_r = if d.x.abs() < 1e-300 { f64::INFINITY } else { (next_boundary(r, step_r) - from.x) / d.x };
    let mut t_max_c = if d.y.abs() < 1e-300 { f64::INFINITY } else { (next_boundary(c, step_c) - from.y) / d.y };
    let t_delta_r = if d.x.abs() < 1e-300 { f64::INFINITY } else { cell / d.x.abs() };
    let t_delta_c = if d.y.abs() < 1e-300 { f64::INFINITY } else { cell / d.y.abs() };
    let mut out = Vec::new();
    loop {
        if r < 0 || c < 0 || r >= map.rows as i64 || c >= map.cols as i64 {
            break;
        }
        out.push((r as usize, c as usize));
        let t_next = t_max_r.min(t_max_c);
        if t_next >= t1 {
            break;
        }
        // Through a corner: step diagonally, the side cells are only touched
        // at a point.
        let corner = (t_max_r - t_max_c).abs() <= 1e-12;
        if corner {
            r += step_r;
            c += step_c;
            t_max_r += t_delta_r;
            t_max_c += t_delta_c;
        } else if t_max_r < t_max_c {
            r += step_r;
            t_max_r += t_delta_r;
        } else {
            c += step_c;
            t_max_c += t_delta_c;
        }
    }
    out
}

/// Ray origins (front-left, front-center, front-right) and their fan targets
/// on the back panel.
pub fn candidate_rays(map: &HeightMap, cfg: &PushConfig) -> Vec<(Vec2, Vec2)> {
    let (depth, width) = (map.depth(), map.width());
    let origins = [
        Vec2::new(-cfg.origin_setback, 0.0),
        Vec2::new(-cfg.origin_setback, width / 2.0),
        Vec2::new(-cfg.origin_setback, width),
    ];
    let n = cfg.rays_per_origin.max(1);
    let mut rays = Vec::with_capacity(3 * n);
    for o in origins {
        for k in 0..n {
            let y = if n == 1 { width / 2.0 } else { width * k as f64 / (n - 1) as f64 };
            rays.push((o, Vec2::new(depth, y)));
        }
    }
    rays
}

/// Casts the candidate fans over the map. Every distinct first-occupied
/// cell becomes a contact point with eight push directions.
pub fn sample_candidates(map: &HeightMap, cfg: &PushConfig) -> Vec<PushCandidate> {
    let mut seen = vec![false; map.len()];
    let mut out = Vec::new();
    for (from, to) in candidate_rays(map, cfg) {
        let hit = grid_traversal(map, from, to)
            .into_iter()
            .find(|&(r, c)| map.state(r, c) == CellState::Occupied);
        let Some((r, c)) = hit else { continue };
        let i = map.index(r, c);
        if seen[i] {
            continue;
        }
        seen[i] = true;
        let (x, y) = map.cell_center(r, c);
        let z = map.board_z + (map.height[i] / 2.0).min(cfg.max_contact_height);
        for direction in 0..8u8 {
            out.push(PushCandidate { start: Vec3::new(x, y, z), row: r, col: c, direction, length: cfg.length });
        }
    }
    out
}

/// Map patch re-centred on a push start and rotated so the push direction
/// runs along +x (increasing row index).
#[derive(Clone, Debug, PartialEq)]
pub struct PushMap {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub probability: Vec<f64>,
    pub height: Vec<f64>,
}

impl PushMap {
    pub fn from_map(map: &HeightMap) -> Self {
        Self {
            rows: map.rows,
            cols: map.cols,
            cell_size: map.params.cell_size,
            probability: (0..map.len()).map(|i| map.probability_at(i)).collect(),
            height: map.height.clone(),
        }
    }

    fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = x / self.cell_size - 0.5;
        let fy = y / self.cell_size - 0.5;
        let (r0, c0) = (fx.floor(), fy.floor());
        let (wr, wc) = (fx - r0, fy - c0);
        let mut p = 0.0;
        let mut h = 0.0;
        for (dr, w_r) in [(0, 1.0 - wr), (1, wr)] {
            for (dc, w_c) in [(0, 1.0 - wc), (1, wc)] {
                let w = w_r * w_c;
                if w == 0.0 {
                    continue;
                }
                let (r, c) = (r0 as i64 + dr, c0 as i64 + dc);
                let (vp, vh) = if r < 0 || c < 0 || r >= self.rows as i64 || c >= self.cols as i64 {
                    (0.5, 0.0)
                } else {
                    let i = r as usize * self.cols + c as usize;
                    (self.probability[i], self.height[i])
                };
                p += w * vp;
                h += w * vh;
            }
        }
        (p, h)
    }

    /// Bilinear resample: output offset `q` from the center cell
    /// `(rows / 2, cols / 2)` reads the source at `start + R(angle) q`.
    /// Outside the source reads as unknown.
    pub fn transformed(&self, start: Vec2, angle: f64) -> Self {
        let center = Vec2::new((self.rows / 2) as f64 * self.cell_size, (self.cols / 2) as f64 * self.cell_size);
        let n = self.rows * self.cols;
        let mut probability = Vec::with_capacity(n);
        let mut height = Vec::with_capacity(n);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let q = Vec2::new(r as f64 * self.cell_size, c as f64 * self.cell_size) - center;
                let src = start + q.rotate(angle);
                let (p, h) = self.sample(src.x, src.y);
                probability.push(p);
                height.push(h);
            }
        }
        Self { probability, height, ..*self }
    }

    /// Back to a height map with the given parameters template.
    pub fn to_height_map(&self, template: &HeightMap) -> HeightMap {
        let mut m = template.clone();
        m.log_odds = self.probability.iter().map(|&p| log_odds(p.clamp(1e-12, 1.0 - 1e-12))).collect();
        m.height = self.height.clone();
        m
    }

    pub fn probability_pgm(&self) -> Vec<u8> {
        let px: Vec<u8> = self.probability.iter().map(|p| (p * 255.0).round() as u8).collect();
        crate::export::pgm8(self.cols, self.rows, &px)
    }
}

pub fn make_push_map(map: &HeightMap, c: &PushCandidate) -> Result<PushMap> {
    let (x, y) = (c.start.x, c.start.y);
    if !(0.0..=map.depth()).contains(&x) || !(0.0..=map.width()).contains(&y) {
        return Err(Error::StartOutsideMap { x, y });
    }
    Ok(PushMap::from_map(map).transformed(Vec2::new(x, y), c.angle()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushOutcome {
    pub contacted: u32,
    /// Translation length of every object, zero for untouched ones.
    pub displacements: BTreeMap<u32, f64>,
    pub dropped: Vec<u32>,
    /// The chain was stopped short by a wall or the back panel.
    pub wall_collision: bool,
    /// Entropy decrease after re-observing; filled in by rollouts.
    pub entropy_delta: Option<f64>,
    pub scene_after: SceneState,
}

impl PushOutcome {
    pub fn total_displacement(&self) -> f64 {
        self.displacements.values().sum()
    }
}

/// Furthest translation along `dir` before `fp` meets a side wall or the
/// back panel. The open front imposes no limit.
pub fn wall_limit(fp: &Footprint, dir: Vec2, depth: f64, width: f64) -> f64 {
    let mut limit = f64::INFINITY;
    for v in &fp.vertices {
        if dir.x > 1e-12 {
            limit = limit.min((depth - fp.radius - v.x) / dir.x);
        }
        if dir.y > 1e-12 {
            limit = limit.min((width - fp.radius - v.y) / dir.y);
        } else if dir.y < -1e-12 {
            limit = limit.min((v.y - fp.radius) / -dir.y);
        }
    }
    limit.max(0.0)
}

/// Chain translations for pushing `pushed` by `length` along `dir`.
/// Returns per-object translations and whether a wall cut the push short.
pub fn solve_chain(footprints: &[Footprint], walls: &[f64], pushed: usize, dir: Vec2, length: f64) -> (Vec<f64>, bool) {
    let n = footprints.len();
    let contact: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { None } else { contact_distance(&footprints[i], &footprints[j], dir) }).collect())
        .collect();

    // Upper bounds: an object can move no further than its wall limit, nor
    // further than what the objects it would push can absorb.
    let mut upper = walls.to_vec();
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if let Some(s) = contact[i][j] {
                    let cap = upper[j] + s;
                    if cap < upper[i] {
                        upper[i] = cap;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut t = vec![0.0; n];
    t[pushed] = length.min(upper[pushed]);
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            if t[i] <= 0.0 {
                continue;
            }
            for j in 0..n {
                if j == pushed {
                    continue;
                }
                if let Some(s) = contact[i][j] {
                    let need = t[i] - s;
                    if need > t[j] {
                        t[j] = need;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let jammed = t[pushed] < length - 1e-12;
    (t, jammed)
}

fn contacted_object(scene: &SceneState, c: &PushCandidate, tolerance: f64) -> Result<usize> {
    let p = c.start.xy();
    scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o.footprint().distance_to(p)))
        .filter(|&(_, d)| d <= tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or(Error::NoContact { x: p.x, y: p.y })
}

/// Simulates a push on the ground-truth scene.
pub fn execute_push(scene: &SceneState, c: &PushCandidate, cfg: &PushConfig) -> Result<PushOutcome> {
    let pushed = contacted_object(scene, c, cfg.contact_tolerance)?;
    let dir = c.unit();
    let footprints: Vec<Footprint> = scene.objects.iter().map(|o| o.footprint()).collect();
    let walls: Vec<f64> = footprints
        .iter()
        .map(|fp| wall_limit(fp, dir, scene.shelf.depth_m, scene.shelf.width_m))
        .collect();
    let (t, wall_collision) = solve_chain(&footprints, &walls, pushed, dir, c.length);

    let mut after = scene.clone();
    after.objects.clear();
    let mut displacements = BTreeMap::new();
    let mut dropped = Vec::new();
    for (o, &ti) in scene.objects.iter().zip(&t) {
        let mut moved = o.clone();
        moved.pose.x += dir.x * ti;
        moved.pose.y += dir.y * ti;
        displacements.insert(o.id, ti);
        if moved.pose.x < 0.0 {
            dropped.push(o.id);
        } else {
            after.objects.push(moved);
        }
    }
    Ok(PushOutcome {
        contacted: scene.objects[pushed].id,
        displacements,
        dropped,
        wall_collision,
        entropy_delta: None,
        scene_after: after,
    })
}

/// What a rollout re-observes after a simulated push.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutView {
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushScore {
    pub score: f64,
    /// Unknown cells resolved by the re-observation.
    pub revealed: i64,
    pub outcome: PushOutcome,
}

/// Executes the push on a clone of the scene, re-observes the view on a
/// clone of the map and trades revealed area against disturbance:
/// `revealed / cells − λ · total displacement − drop_penalty · drops`.
pub fn score_push(
    scene: &SceneState,
    map: &HeightMap,
    c: &PushCandidate,
    cfg: &PushConfig,
    view: &RolloutView,
) -> Result<PushScore> {
    let mut outcome = execute_push(scene, c, cfg)?;
    let mut rollout = map.clone();
    let before = rollout.unknown_count();
    observe(&outcome.scene_after, &mut rollout, &view.pose, &view.intrinsics);
    let after = rollout.unknown_count();
    let revealed = before as i64 - after as i64;
    let cells = map.len() as f64;
    outcome.entropy_delta = Some(revealed as f64 / cells);
    let score = revealed as f64 / cells
        - cfg.lambda * outcome.total_displacement()
        - cfg.drop_penalty * outcome.dropped.len() as f64;
    Ok(PushScore { score, revealed, outcome })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub candidate: PushCandidate,
    pub score: PushScore,
}

/// A push that contacts an object and actually moves something.
pub fn is_effective(scene: &SceneState, c: &PushCandidate, cfg: &PushConfig) -> bool {
    execute_push(scene, c, cfg).is_ok_and(|o| o.total_displacement() > 1e-9 || !o.dropped.is_empty())
}

/// Highest-scoring candidate; ties go to the lowest index. Candidates that
/// contact no object or move nothing are skipped.
///
/// A push outcome only depends on the contacted object, the direction and
/// the length, so each such group is rolled out once.
pub fn select_best_push(
    scene: &SceneState,
    map: &HeightMap,
    candidates: &[PushCandidate],
    cfg: &PushConfig,
    view: &RolloutView,
) -> Option<Selection> {
    let mut groups: Vec<usize> = Vec::new();
    let mut key_of: Vec<Option<usize>> = Vec::with_capacity(candidates.len());
    let mut seen: BTreeMap<(usize, u8, u64), usize> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        let Ok(obj) = contacted_object(scene, c, cfg.contact_tolerance) else {
            key_of.push(None);
            continue;
        };
        let g = *seen.entry((obj, c.direction, c.length.to_bits())).or_insert_with(|| {
            groups.push(i);
            groups.len() - 1
        });
        key_of.push(Some(g));
    }
    let scored = par::map(&groups, |&i| {
        score_push(scene, map, &candidates[i], cfg, view)
            .ok()
            .filter(|s| s.outcome.total_displacement() > 1e-9 || !s.outcome.dropped.is_empty())
    });
    let mut best: Option<(usize, &PushScore)> = None;
    for (i, g) in key_of.iter().enumerate() {
        let Some(s) = g.and_then(|g| scored[g].as_ref()) else { continue };
        if best.map_or(true, |(_, b)| s.score > b.score) {
            best = Some((i, s));
        }
    }
    best.map(|(index, score)| Selection { index, candidate: candidates[index], score: score.clone() })
}

/// Uniform choice among the effective candidates.
pub fn select_random_push<R: Rng + ?Sized>(
    scene: &SceneState,
    candidates: &[PushCandidate],
    cfg: &PushConfig,
    rng: &mut R,
) -> Option<(usize, PushCandidate)> {
    let live: Vec<usize> = (0..candidates.len()).filter(|&i| is_effective(scene, &candidates[i], cfg)).collect();
    if live.is_empty() {
        return None;
    }
    let i = live[rng.gen_range(0..live.len())];
    Some((i, candidates[i]))
}
