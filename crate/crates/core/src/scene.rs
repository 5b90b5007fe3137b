//! Ground-truth shelf world: shelf geometry, upright object primitives,
//! seeded scenario sampling and displacement accounting.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Footprint, Vec2, Vec3};
use crate::{Error, Result};

/// Shelf compartment in its own frame: x points into the shelf from the open
/// front (x = 0) to the back panel (x = depth), y spans the width from the
/// left wall (y = 0), z is up with the board surface at `board_height_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShelfSpec {
    pub depth_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub wall_thickness_m: f64,
    pub board_height_m: f64,
}

impl Default for ShelfSpec {
    fn default() -> Self {
        Self {
            depth_m: 0.40,
            width_m: 0.80,
            height_m: 0.40,
            wall_thickness_m: 0.02,
            board_height_m: 0.0,
        }
    }
}

impl ShelfSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.depth_m, self.width_m, self.height_m, self.wall_thickness_m]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.board_height_m.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShelf(format!("{self:?}")))
        }
    }

    pub fn top_z(&self) -> f64 {
        self.board_height_m + self.height_m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { dx: f64, dy: f64, dz: f64 },
    Cylinder { radius: f64, height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassClass {
    Light,
    Heavy,
}

/// Planar pose of an upright object resting on the board.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPrimitive {
    pub id: u32,
    pub shape: Shape,
    pub pose: PlanarPose,
    pub mass: MassClass,
}

impl ObjectPrimitive {
    pub fn height(&self) -> f64 {
        match self.shape {
            Shape::Box { dz, .. } => dz,
            Shape::Cylinder { height, .. } => height,
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.pose.x, self.pose.y)
    }

    pub fn footprint(&self) -> Footprint {
        let c = self.center();
        match self.shape {
            Shape::Box { dx, dy, .. } => {
                let (hx, hy) = (dx / 2.0, dy / 2.0);
                let corners = [
                    Vec2::new(-hx, -hy),
                    Vec2::new(hx, -hy),
                    Vec2::new(hx, hy),
                    Vec2::new(-hx, hy),
                ];
                Footprint {
                    vertices: corners.iter().map(|v| c + v.rotate(self.pose.yaw)).collect(),
                    radius: 0.0,
                }
            }
            Shape::Cylinder { radius, .. } => Footprint { vertices: vec![c], radius },
        }
    }

    /// Solid membership for a point in the shelf frame.
    pub fn contains(&self, p: Vec3, board_z: f64) -> bool {
        if p.z < board_z || p.z > board_z + self.height() {
            return false;
        }
        let local = (p.xy() - self.center()).rotate(-self.pose.yaw);
        match self.shape {
            Shape::Box { dx, dy, .. } => local.x.abs() <= dx / 2.0 && local.y.abs() <= dy / 2.0,
            Shape::Cylinder { radius, .. } => local.norm() <= radius,
        }
    }
}

/// Ranges the sampler draws object dimensions from (meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimRanges {
    pub box_edge: (f64, f64),
    pub cylinder_radius: (f64, f64),
    pub cylinder_height: (f64, f64),
    pub cylinder_fraction: f64,
    pub heavy_fraction: f64,
    /// Minimum clearance to the walls, back panel and front edge.
    pub wall_clearance: f64,
    /// Minimum clearance between two sampled objects.
    pub min_separation: f64,
    pub max_attempts: usize,
}

impl Default for DimRanges {
    fn default() -> Self {
        Self {
            box_edge: (0.04, 0.15),
            cylinder_radius: (0.02, 0.05),
            cylinder_height: (0.08, 0.25),
            cylinder_fraction: 0.5,
            heavy_fraction: 0.3,
            wall_clearance: 0.005,
            min_separation: 0.005,
            max_attempts: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub shelf: ShelfSpec,
    pub objects: Vec<ObjectPrimitive>,
    pub seed: u64,
}

impl SceneState {
    pub fn empty(shelf: ShelfSpec, seed: u64) -> Self {
        Self { shelf, objects: Vec::new(), seed }
    }

    pub fn object(&self, id: u32) -> Option<&ObjectPrimitive> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Footprint lies inside the shelf footprint with at least `margin`.
    pub fn footprint_inside(&self, fp: &Footprint, margin: f64) -> bool {
        let (lo, hi) = fp.bounds();
        lo.x >= margin
            && lo.y >= margin
            && hi.x <= self.shelf.depth_m - margin
            && hi.y <= self.shelf.width_m - margin
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(s)?;
        scene.shelf.validate()?;
        Ok(scene)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a collision-free scene by rejection sampling. Pure in
/// `(seed, n_objects, shelf, dims)`.
pub fn sample_scene(
    seed: u64,
    n_objects: usize,
    shelf: &ShelfSpec,
    dims: &DimRanges,
) -> Result<SceneState> {
    shelf.validate()?;
    if n_objects == 0 {
        return Err(Error::InvalidArgument("n_objects must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SceneState::empty(shelf.clone(), seed);
    let mut footprints: Vec<Footprint> = Vec::with_capacity(n_objects);

    for id in 0..n_objects as u32 {
        let shape = if rng.gen_bool(dims.cylinder_fraction.clamp(0.0, 1.0)) {
            Shape::Cylinder {
                radius: uniform(&mut rng, dims.cylinder_radius),
                height: uniform(&mut rng, dims.cylinder_height).min(shelf.height_m),
            }
        } else {
            Shape::Box {
                dx: uniform(&mut rng, dims.box_edge),
                dy: uniform(&mut rng, dims.box_edge),
                dz: uniform(&mut rng, dims.box_edge).min(shelf.height_m),
            }
        };
        let mass = if rng.gen_bool(dims.heavy_fraction.clamp(0.0, 1.0)) {
            MassClass::Heavy
        } else {
            MassClass::Light
        };
        let yaw = match shape {
            Shape::Box { .. } => rng.gen_range(0.0..std::f64::consts::PI),
            Shape::Cylinder { .. } => 0.0,
        };

        let mut placed = None;
        for _ in 0..dims.max_attempts {
            let candidate = ObjectPrimitive {
                id,
                shape,
                pose: PlanarPose {
                    x: rng.gen_range(0.0..shelf.depth_m),
                    y: rng.gen_range(0.0..shelf.width_m),
                    yaw,
                },
                mass,
            };
            let fp = candidate.footprint();
            if !scene.footprint_inside(&fp, dims.wall_clearance) {
                continue;
            }
            if footprints.iter().all(|other| fp.clearance(other) > dims.min_separation) {
                placed = Some((candidate, fp));
                break;
            }
        }
        let (obj, fp) = placed.ok_or(Error::PlacementFailed {
            placed: id as usize,
            requested: n_objects,
        })?;
        scene.objects.push(obj);
        footprints.push(fp);
    }
    Ok(scene)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    /// Center displacement (meters) of every object present in both scenes.
    pub per_object: BTreeMap<u32, f64>,
    /// Mean over `per_object`; zero when it is empty.
    pub mean: f64,
    pub total: f64,
    /// Ids present before but missing after.
    pub dropped: Vec<u32>,
}

/// Per-object planar center displacement between two configurations of the
/// same scene. Objects missing from `after` count as dropped.
pub fn displacement(before: &SceneState, after: &SceneState) -> Result<DisplacementReport> {
    let before_ids: BTreeMap<u32, &ObjectPrimitive> =
        before.objects.iter().map(|o| (o.id, o)).collect();
    let after_ids: BTreeMap<u32, &ObjectPrimitive> =
        after.objects.iter().map(|o| (o.id, o)).collect();
    if before_ids.len() != before.objects.len() || after_ids.len() != after.objects.len() {
        return Err(Error::IdMismatch("duplicate object id".into()));
    }
    if let Some(extra) = after_ids.keys().find(|id| !before_ids.contains_key(id)) {
        return Err(Error::IdMismatch(format!("object {extra} appears only after")));
    }
    let mut per_object = BTreeMap::new();
    let mut dropped = Vec::new();
    for (id, b) in &before_ids {
        match after_ids.get(id) {
            Some(a) => {
                per_object.insert(*id, (a.center() - b.center()).norm());
            }
            None => dropped.push(*id),
        }
    }
    let total: f64 = per_object.values().sum();
    let mean = if per_object.is_empty() { 0.0 } else { total / per_object.len() as f64 };
    Ok(DisplacementReport { per_object, mean, total, dropped })
}
