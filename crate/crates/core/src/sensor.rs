//! Synthetic pinhole depth camera.
//!
//! Rays are cast against the shelf panels and every object primitive; the
//! image stores planar depth (distance along the optical axis) per pixel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::{SceneState, Shape, ShelfSpec};
use crate::{par, Error, Result};

/// 5D camera pose in the shelf frame. Roll is fixed at zero. Yaw zero looks
/// along +x into the shelf, positive pitch tilts the view upwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl CameraPose {
    pub fn new(x: f64, y: f64, z: f64, pitch: f64, yaw: f64) -> Self {
        Self { x, y, z, pitch, yaw }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn forward(&self) -> Vec3 {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(cp * cy, cp * sy, sp)
    }

    /// Image-right axis.
    pub fn right(&self) -> Vec3 {
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(sy, -cy, 0.0)
    }

    /// Image-up axis.
    pub fn up(&self) -> Vec3 {
        self.right().cross(self.forward())
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.pitch, self.yaw]
    }

    /// Pose at `position` looking at `target`.
    pub fn looking_at(position: Vec3, target: Vec3) -> Self {
        let d = target - position;
        let yaw = d.y.atan2(d.x);
        let pitch = d.z.atan2((d.x * d.x + d.y * d.y).sqrt());
        Self::new(position.x, position.y, position.z, pitch, yaw)
    }
}

/// Reachable camera region: an axis-aligned box in front of the shelf with a
/// small overlap inside, plus pitch/yaw limits. All bounds are closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub pitch: (f64, f64),
    pub yaw: (f64, f64),
}

impl Workspace {
    pub fn for_shelf(shelf: &ShelfSpec) -> Self {
        Self {
            min: [-0.45, -0.10, shelf.board_height_m],
            max: [0.05, shelf.width_m + 0.10, shelf.top_z() + 0.10],
            pitch: ((-45f64).to_radians(), 30f64.to_radians()),
            yaw: ((-60f64).to_radians(), 60f64.to_radians()),
        }
    }

    pub fn contains(&self, pose: &CameraPose) -> bool {
        let p = [pose.x, pose.y, pose.z];
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
            && pose.pitch >= self.pitch.0
            && pose.pitch <= self.pitch.1
            && pose.yaw >= self.yaw.0
            && pose.yaw <= self.yaw.1
    }

    pub fn center(&self) -> CameraPose {
        CameraPose::new(
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
            (self.pitch.0 + self.pitch.1) / 2.0,
            (self.yaw.0 + self.yaw.1) / 2.0,
        )
    }

    /// Uniform sample over the closed box and angle limits.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CameraPose {
        let mut u = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        CameraPose::new(
            u(self.min[0], self.max[0]),
            u(self.min[1], self.max[1]),
            u(self.min[2], self.max[2]),
            u(self.pitch.0, self.pitch.1),
            u(self.yaw.0, self.yaw.1),
        )
    }

    /// Closest valid pose (componentwise clamp).
    pub fn clamp(&self, pose: &CameraPose) -> CameraPose {
        CameraPose::new(
            pose.x.clamp(self.min[0], self.max[0]),
            pose.y.clamp(self.min[1], self.max[1]),
            pose.z.clamp(self.min[2], self.max[2]),
            pose.pitch.clamp(self.pitch.0, self.pitch.1),
            pose.yaw.clamp(self.yaw.0, self.yaw.1),
        )
    }
}

pub fn pose_valid(pose: &CameraPose, ws: &Workspace) -> bool {
    ws.contains(pose)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    /// Vertical field of view in radians.
    pub vfov: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            vfov: 58f64.to_radians(),
            min_range: 0.07,
            max_range: 1.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.vfov > 0.0
            && self.vfov < std::f64::consts::PI
            && self.min_range >= 0.0
            && self.min_range < self.max_range;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad intrinsics {self:?}")))
        }
    }

    /// Focal length in pixels (square pixels).
    pub fn focal(&self) -> f64 {
        self.height as f64 / 2.0 / (self.vfov / 2.0).tan()
    }

    /// Same field of view at a different resolution.
    pub fn scaled(&self, width: usize, height: usize) -> Self {
        Self { width, height, ..self.clone() }
    }

    /// Ray direction through the center of pixel `(u, v)` with unit
    /// component along the optical axis, so that the ray parameter equals
    /// planar depth.
    pub fn pixel_ray(&self, pose: &CameraPose, u: f64, v: f64) -> Vec3 {
        let f = self.focal();
        let a = (u + 0.5 - self.width as f64 / 2.0) / f;
        let b = (v + 0.5 - self.height as f64 / 2.0) / f;
        pose.forward() + pose.right() * a - pose.up() * b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Row-major planar depth in meters; [`DepthImage::NO_RETURN`] where the
    /// ray hit nothing within range.
    pub data: Vec<f64>,
}

impl DepthImage {
    pub const NO_RETURN: f64 = f64::INFINITY;

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn returns(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }
}

#[derive(Clone, Copy, Debug)]
enum Solid {
    Aabb { lo: Vec3, hi: Vec3 },
    OrientedBox { cx: f64, cy: f64, cos: f64, sin: f64, hx: f64, hy: f64, z0: f64, z1: f64 },
    Cylinder { cx: f64, cy: f64, r: f64, z0: f64, z1: f64 },
}

fn slab(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (oi, di, l, h) in [(o.x, d.x, lo.x, hi.x), (o.y, d.y, lo.y, hi.y), (o.z, d.z, lo.z, hi.z)] {
        if di.abs() < 1e-300 {
            if oi < l || oi > h {
                return None;
            }
        } else {
            let a = (l - oi) / di;
            let b = (h - oi) / di;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

impl Solid {
    /// Entry/exit parameters along `o + t d`.
    fn interval(&self, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
        match *self {
            Solid::Aabb { lo, hi } => slab(o, d, lo, hi),
            Solid::OrientedBox { cx, cy, cos, sin, hx, hy, z0, z1 } => {
                let (px, py) = (o.x - cx, o.y - cy);
                let lo = Vec3::new(cos * px + sin * py, -sin * px + cos * py, o.z);
                let ld = Vec3::new(cos * d.x + sin * d.y, -sin * d.x + cos * d.y, d.z);
                slab(lo, ld, Vec3::new(-hx, -hy, z0), Vec3::new(hx, hy, z1))
            }
            Solid::Cylinder { cx, cy, r, z0, z1 } => {
                let (px, py) = (o.x - cx, o.y - cy);
                let a = d.x * d.x + d.y * d.y;
                let (mut t0, mut t1);
                if a < 1e-300 {
                    if px * px + py * py > r * r {
                        return None;
                    }
                    t0 = f64::NEG_INFINITY;
                    t1 = f64::INFINITY;
                } else {
                    let b = 2.0 * (px * d.x + py * d.y);
                    let c = px * px + py * py - r * r;
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let s = disc.sqrt();
                    t0 = (-b - s) / (2.0 * a);
                    t1 = (-b + s) / (2.0 * a);
                }
                if d.z.abs() < 1e-300 {
                    if o.z < z0 || o.z > z1 {
                        return None;
                    }
                } else {
                    let a = (z0 - o.z) / d.z;
                    let b = (z1 - o.z) / d.z;
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                }
                (t0 <= t1).then_some((t0, t1))
            }
        }
    }

    fn contains(&self, p: Vec3) -> bool {
        match *self {
            Solid::Aabb { lo, hi } => {
                p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z
            }
            Solid::OrientedBox { cx, cy, cos, sin, hx, hy, z0, z1 } => {
                let (px, py) = (p.x - cx, p.y - cy);
                let lx = cos * px + sin * py;
                let ly = -sin * px + cos * py;
                lx.abs() <= hx && ly.abs() <= hy && p.z >= z0 && p.z <= z1
            }
            Solid::Cylinder { cx, cy, r, z0, z1 } => {
                let (px, py) = (p.x - cx, p.y - cy);
                px * px + py * py <= r * r && p.z >= z0 && p.z <= z1
            }
        }
    }
}

/// Ray-castable solids of a scene: board, side walls, top, back panel and
/// every object.
#[derive(Clone, Debug)]
pub struct SceneGeometry {
    solids: Vec<Solid>,
}

impl SceneGeometry {
    pub fn new(scene: &SceneState) -> Self {
        let s = &scene.shelf;
        let (d, w, t, b, top) = (s.depth_m, s.width_m, s.wall_thickness_m, s.board_height_m, s.top_z());
        let mut solids = vec![
            // board
            Solid::Aabb { lo: Vec3::new(0.0, -t, b - t), hi: Vec3::new(d + t, w + t, b) },
            // left and right walls
            Solid::Aabb { lo: Vec3::new(0.0, -t, b - t), hi: Vec3::new(d + t, 0.0, top + t) },
            Solid::Aabb { lo: Vec3::new(0.0, w, b - t), hi: Vec3::new(d + t, w + t, top + t) },
            // top
            Solid::Aabb { lo: Vec3::new(0.0, -t, top), hi: Vec3::new(d + t, w + t, top + t) },
            // back panel
            Solid::Aabb { lo: Vec3::new(d, -t, b - t), hi: Vec3::new(d + t, w + t, top + t) },
        ];
        for o in &scene.objects {
            let z1 = b + o.height();
            solids.push(match o.shape {
                Shape::Box { dx, dy, .. } => Solid::OrientedBox {
                    cx: o.pose.x,
                    cy: o.pose.y,
                    cos: o.pose.yaw.cos(),
                    sin: o.pose.yaw.sin(),
                    hx: dx / 2.0,
                    hy: dy / 2.0,
                    z0: b,
                    z1,
                },
                Shape::Cylinder { radius, .. } => {
                    Solid::Cylinder { cx: o.pose.x, cy: o.pose.y, r: radius, z0: b, z1 }
                }
            });
        }
        Self { solids }
    }

    /// First surface parameter `t >= 0` along `o + t d`. A ray starting
    /// inside a solid reports `Some(0.0)`.
    pub fn first_hit(&self, o: Vec3, d: Vec3) -> Option<f64> {
        let mut best = f64::INFINITY;
        for s in &self.solids {
            if let Some((t0, t1)) = s.interval(o, d) {
                if t1 < 0.0 {
                    continue;
                }
                best = best.min(t0.max(0.0));
            }
        }
        best.is_finite().then_some(best)
    }

    /// Point membership in any solid.
    pub fn occupied(&self, p: Vec3) -> bool {
        self.solids.iter().any(|s| s.contains(p))
    }
}

/// Renders without checking the pose against a workspace.
pub fn render_unchecked(scene: &SceneState, pose: &CameraPose, intr: &CameraIntrinsics) -> DepthImage {
    let geom = SceneGeometry::new(scene);
    let mut img = DepthImage::filled(intr.width, intr.height, DepthImage::NO_RETURN);
    let origin = pose.position();
    par::for_each_row(&mut img.data, intr.width, |v, row| {
        for (u, px) in row.iter_mut().enumerate() {
            let d = intr.pixel_ray(pose, u as f64, v as f64);
            if let Some(t) = geom.first_hit(origin, d) {
                if t >= intr.min_range && t <= intr.max_range {
                    *px = t;
                }
            }
        }
    });
    img
}

pub fn render_depth(
    scene: &SceneState,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    ws: &Workspace,
) -> Result<DepthImage> {
    if !pose_valid(pose, ws) {
        return Err(Error::InvalidPose(format!("{pose:?}")));
    }
    Ok(render_unchecked(scene, pose, intr))
}

/// Back-projects every finite pixel into the shelf frame.
pub fn depth_to_pointcloud(img: &DepthImage, pose: &CameraPose, intr: &CameraIntrinsics) -> Vec<Vec3> {
    let origin = pose.position();
    let mut cloud = Vec::with_capacity(img.returns());
    for v in 0..img.height {
        for u in 0..img.width {
            let depth = img.get(u, v);
            if depth.is_finite() {
                cloud.push(origin + intr.pixel_ray(pose, u as f64, v as f64) * depth);
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{MassClass, ObjectPrimitive, PlanarPose};

    fn shelf() -> ShelfSpec {
        ShelfSpec::default()
    }

    fn single_box(x: f64, y: f64, dx: f64, dy: f64, dz: f64) -> SceneState {
        let mut s = SceneState::empty(shelf(), 0);
        s.objects.push(ObjectPrimitive {
            id: 0,
            shape: Shape::Box { dx, dy, dz },
            pose: PlanarPose { x, y, yaw: 0.0 },
            mass: MassClass::Light,
        });
        s
    }

    #[test]
    fn empty_shelf_back_panel_at_half_meter() {
        let scene = SceneState::empty(shelf(), 0);
        let pose = CameraPose::new(-0.10, 0.40, 0.20, 0.0, 0.0);
        let img = render_depth(&scene, &pose, &CameraIntrinsics::default(), &Workspace::for_shelf(&shelf()))
            .unwrap();
        let c = img.get(64, 48);
        assert!((c - 0.5).abs() < 1e-9, "{c}");
    }

    #[test]
    fn box_face_matches_slab_distance() {
        // Front face at x = 0.15 - 0.05 = 0.10; camera at x = -0.2.
        let scene = single_box(0.15, 0.40, 0.10, 0.10, 0.3);
        let pose = CameraPose::new(-0.20, 0.40, 0.15, 0.0, 0.0);
        let img = render_unchecked(&scene, &pose, &CameraIntrinsics::default());
        assert!((img.get(64, 48) - 0.30).abs() < 1e-9);
        assert!((img.get(63, 47) - 0.30).abs() < 1e-9);
    }

    #[test]
    fn pose_outside_workspace_is_rejected() {
        let ws = Workspace::for_shelf(&shelf());
        let scene = SceneState::empty(shelf(), 0);
        let behind = CameraPose::new(1.4, 0.4, 0.2, 0.0, 0.0);
        assert!(!pose_valid(&behind, &ws));
        assert!(matches!(
            render_depth(&scene, &behind, &CameraIntrinsics::default(), &ws),
            Err(Error::InvalidPose(_))
        ));
    }

    #[test]
    fn workspace_bounds_are_closed() {
        let ws = Workspace::for_shelf(&shelf());
        assert!(pose_valid(&ws.center(), &ws));
        let on_face = CameraPose::new(ws.max[0], ws.min[1], ws.max[2], ws.pitch.0, ws.yaw.1);
        assert!(pose_valid(&on_face, &ws));
        let nan = CameraPose::new(f64::NAN, 0.4, 0.2, 0.0, 0.0);
        assert!(!pose_valid(&nan, &ws));
    }

    #[test]
    fn all_sentinel_image_gives_empty_cloud() {
        let img = DepthImage::filled(8, 6, DepthImage::NO_RETURN);
        let pose = CameraPose::new(0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(depth_to_pointcloud(&img, &pose, &CameraIntrinsics::default().scaled(8, 6)).is_empty());
    }

    #[test]
    fn center_ray_point_lies_on_axis() {
        // Odd resolution puts a pixel center exactly on the optical axis.
        let intr = CameraIntrinsics::default().scaled(5, 5);
        let mut img = DepthImage::filled(5, 5, DepthImage::NO_RETURN);
        img.data[2 * 5 + 2] = 0.4;
        let pose = CameraPose::new(0.1, 0.2, 0.3, 0.0, 0.0);
        let cloud = depth_to_pointcloud(&img, &pose, &intr);
        assert_eq!(cloud.len(), 1);
        let p = cloud[0];
        assert!((p.x - 0.5).abs() < 1e-12 && (p.y - 0.2).abs() < 1e-12 && (p.z - 0.3).abs() < 1e-12);
    }

    #[test]
    fn camera_axes_are_orthonormal() {
        let pose = CameraPose::new(0.0, 0.0, 0.0, -0.4, 0.7);
        let (f, r, u) = (pose.forward(), pose.right(), pose.up());
        for (a, b) in [(f, r), (f, u), (r, u)] {
            assert!(a.dot(b).abs() < 1e-12);
        }
        for a in [f, r, u] {
            assert!((a.norm() - 1.0).abs() < 1e-12);
        }
        assert!(u.z > 0.0);
    }

    #[test]
    fn out_of_range_returns_are_dropped() {
        let scene = SceneState::empty(shelf(), 0);
        let intr = CameraIntrinsics { max_range: 0.3, ..CameraIntrinsics::default() };
        let pose = CameraPose::new(-0.10, 0.40, 0.20, 0.0, 0.0);
        let img = render_unchecked(&scene, &pose, &intr);
        assert!(!img.get(64, 48).is_finite());
        assert!(img.data.iter().all(|d| !d.is_finite() || (*d >= intr.min_range && *d <= intr.max_range)));
    }
}
