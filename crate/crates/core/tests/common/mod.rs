//! Brute-force references shared by the oracle and acceptance tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use viewpush::episode::observe;
use viewpush::geometry::{Vec2, Vec3};
use viewpush::mapping::{CellState, HeightMap, MapParams};
use viewpush::scene::{sample_scene, DimRanges, SceneState, ShelfSpec};
use viewpush::sensor::{render_unchecked, CameraIntrinsics, CameraPose, SceneGeometry, Workspace};

pub fn scene(seed: u64, n: usize) -> SceneState {
    sample_scene(seed, n, &ShelfSpec::default(), &DimRanges::default()).unwrap()
}

/// Marches `o + t d` in 0.5 mm steps (Euclidean) and returns the first `t`
/// inside any solid.
pub fn march(geom: &SceneGeometry, o: Vec3, d: Vec3, t_max: f64) -> Option<f64> {
    let dt = 0.0005 / d.norm();
    let mut t = 0.0;
    while t <= t_max + dt {
        if geom.occupied(o + d * t) {
            return Some(t);
        }
        t += dt;
    }
    None
}

/// Renders random views of small scenes and compares every pixel with the
/// marcher. Returns the number of pixels compared.
pub fn render_vs_marcher(seeds: std::ops::Range<u64>) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let intr = CameraIntrinsics::default().scaled(32, 24);
    let mut checked = 0;
    for seed in seeds {
        let s = scene(seed, 1 + (seed as usize % 3));
        let ws = Workspace::for_shelf(&s.shelf);
        let geom = SceneGeometry::new(&s);
        let pose = ws.sample(&mut rng);
        if geom.occupied(pose.position()) {
            continue;
        }
        let img = render_unchecked(&s, &pose, &intr);
        for v in 0..intr.height {
            for u in 0..intr.width {
                let d = intr.pixel_ray(&pose, u as f64, v as f64);
                let marched = march(&geom, pose.position(), d, intr.max_range + 0.01);
                let got = img.get(u, v);
                match marched {
                    // Too close to a range limit to decide at 1 mm.
                    Some(t) if (t - intr.min_range).abs() < 1e-3 || (t - intr.max_range).abs() < 1e-3 => {}
                    Some(t) if t >= intr.min_range && t <= intr.max_range => {
                        assert!((got - t).abs() <= 1e-3, "pixel ({u},{v}) render {got} march {t}");
                        checked += 1;
                    }
                    _ => assert!(got.is_infinite(), "pixel ({u},{v}) render {got}, marcher saw nothing in range"),
                }
            }
        }
    }
    checked
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Truth {
    Full(f64),
    Empty,
    Mixed,
}

pub fn classify(s: &SceneState, m: &HeightMap, r: usize, c: usize) -> Truth {
    let cell = m.params.cell_size;
    let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(a, b)| Vec2::new((r as f64 + a) * cell, (c as f64 + b) * cell));
    let center = Vec2::new((r as f64 + 0.5) * cell, (c as f64 + 0.5) * cell);
    for o in &s.objects {
        let fp = o.footprint();
        if corners.iter().all(|&p| fp.contains(p)) {
            return Truth::Full(o.height());
        }
    }
    let half_diag = cell * std::f64::consts::FRAC_1_SQRT_2 + 1e-9;
    if s.objects.iter().all(|o| o.footprint().distance_to(center) > half_diag) {
        Truth::Empty
    } else {
        Truth::Mixed
    }
}

/// Whether the straight segment from the camera to `p` is free, `p` is in
/// the image and within range. Obstruction is tested by point sampling.
pub fn sees(geom: &SceneGeometry, pose: &CameraPose, intr: &CameraIntrinsics, p: Vec3) -> bool {
    let o = pose.position();
    let rel = p - o;
    let z = rel.dot(pose.forward());
    if z < intr.min_range + 1e-3 || z > intr.max_range - 1e-3 {
        return false;
    }
    let f = intr.focal();
    let u = rel.dot(pose.right()) / z * f + intr.width as f64 / 2.0;
    let v = -rel.dot(pose.up()) / z * f + intr.height as f64 / 2.0;
    if u < 1.0 || v < 1.0 || u > intr.width as f64 - 1.0 || v > intr.height as f64 - 1.0 {
        return false;
    }
    let len = rel.norm();
    let n = (len / 0.0005).ceil() as usize;
    (0..n).all(|k| !geom.occupied(o + rel * (k as f64 / n as f64 * (1.0 - 1e-3 / len))))
}

/// Observes each scene once at high resolution and checks every cell against
/// point-sampled column visibility. Returns the number of cells decided
/// as occupied, free and hidden.
pub fn integrate_vs_columns(seeds: std::ops::Range<u64>) -> [usize; 3] {
    let intr = CameraIntrinsics::default().scaled(480, 360);
    let mut decided = [0usize; 3];
    for seed in seeds {
        let s = scene(seed, 3);
        let geom = SceneGeometry::new(&s);
        let pose = CameraPose::new(-0.15, 0.2 + 0.2 * (seed % 3) as f64, 0.42, -0.7, 0.1 * (seed % 3) as f64 - 0.1);
        let mut m = HeightMap::new(&s.shelf, &MapParams::default()).unwrap();
        observe(&s, &mut m, &pose, &intr);
        let cell = m.params.cell_size;
        for r in 0..m.rows {
            for c in 0..m.cols {
                let state = m.state(r, c);
                let truth = classify(&s, &m, r, c);
                // Never contradicts ground truth.
                match truth {
                    Truth::Empty => assert_ne!(state, CellState::Occupied, "({r},{c}) seed {seed}"),
                    Truth::Full(_) => assert_ne!(state, CellState::Free, "({r},{c}) seed {seed}"),
                    Truth::Mixed => {}
                }
                // Away from the walls the 1 mm band filter does not matter.
                if r + 1 >= m.rows || c == 0 || c + 1 >= m.cols {
                    continue;
                }
                let z = match truth {
                    Truth::Full(h) => m.board_z + h,
                    Truth::Empty => m.board_z,
                    Truth::Mixed => continue,
                };
                let visible = (0..5)
                    .flat_map(|a| (0..5).map(move |b| (a, b)))
                    .filter(|&(a, b)| {
                        let p = Vec3::new((r as f64 + 0.1 + 0.2 * a as f64) * cell, (c as f64 + 0.1 + 0.2 * b as f64) * cell, z);
                        sees(&geom, &pose, &intr, p)
                    })
                    .count();
                match (truth, visible) {
                    (Truth::Full(_), 25) => {
                        assert_eq!(state, CellState::Occupied, "({r},{c}) seed {seed}");
                        decided[0] += 1;
                    }
                    (Truth::Empty, 25) => {
                        assert_eq!(state, CellState::Free, "({r},{c}) seed {seed}");
                        decided[1] += 1;
                    }
                    // Fully hidden board: nothing can land there.
                    (Truth::Empty, 0) if hidden_cell(&geom, &pose, &intr, r, c, cell, m.board_z) => {
                        assert_eq!(state, CellState::Unknown, "({r},{c}) seed {seed}");
                        decided[2] += 1;
                    }
                    _ => {}
                }
            }
        }
    }
    decided
}

/// Dense 21×21 check that no part of an empty cell's board is visible.
pub fn hidden_cell(geom: &SceneGeometry, pose: &CameraPose, intr: &CameraIntrinsics, r: usize, c: usize, cell: f64, z: f64) -> bool {
    (0..=20).all(|a| {
        (0..=20).all(|b| {
            let p = Vec3::new((r as f64 + a as f64 / 20.0) * cell, (c as f64 + b as f64 / 20.0) * cell, z);
            let o = pose.position();
            let rel = p - o;
            let depth = rel.dot(pose.forward());
            if depth <= 0.0 {
                return true;
            }
            // Hidden if the segment is blocked well before the board.
            let n = (rel.norm() / 0.0005).ceil() as usize;
            (0..n.saturating_sub(6)).any(|k| geom.occupied(o + rel * (k as f64 / n as f64)))
                || depth > intr.max_range
        })
    })
}
