//! File writers: PGM/PPM rasters, CSV grids and XYZ point clouds.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::geometry::Vec3;
use crate::mapping::HeightMap;
use crate::scene::SceneState;
use crate::sensor::DepthImage;
use crate::Result;

/// Binary 8-bit PGM.
pub fn pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Binary 16-bit PGM (big-endian samples).
pub fn pgm16(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

/// Binary PPM.
pub fn ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for p in rgb {
        out.extend_from_slice(p);
    }
    out
}

/// Depth in millimeters; no-return pixels become 0.
pub fn depth_pgm(img: &DepthImage) -> Vec<u8> {
    let px: Vec<u16> = img
        .data
        .iter()
        .map(|d| if d.is_finite() { (d * 1000.0).round().clamp(0.0, 65535.0) as u16 } else { 0 })
        .collect();
    pgm16(img.width, img.height, &px)
}

pub fn xyz(cloud: &[Vec3]) -> String {
    let mut s = String::with_capacity(cloud.len() * 24);
    for p in cloud {
        let _ = writeln!(s, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    s
}

/// Occupancy probability scaled to 0..255. Image rows run along the shelf
/// depth (row 0 at the open front), columns along the width.
pub fn occupancy_pgm(map: &HeightMap) -> Vec<u8> {
    let px: Vec<u8> = (0..map.len()).map(|i| (map.probability_at(i) * 255.0).round() as u8).collect();
    pgm8(map.cols, map.rows, &px)
}

/// Height scaled linearly from the board (0) to the interior height (255).
pub fn height_pgm(map: &HeightMap) -> Vec<u8> {
    let px: Vec<u8> = map
        .height
        .iter()
        .map(|h| (h / map.interior_height * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    pgm8(map.cols, map.rows, &px)
}

fn grid_csv(rows: usize, cols: usize, value: impl Fn(usize) -> f64) -> String {
    let mut s = String::new();
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| format!("{:.6}", value(r * cols + c))).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn occupancy_csv(map: &HeightMap) -> String {
    grid_csv(map.rows, map.cols, |i| map.probability_at(i))
}

pub fn height_csv(map: &HeightMap) -> String {
    grid_csv(map.rows, map.cols, |i| map.height[i])
}

/// Top-down ground-truth raster of the scene at `cell` resolution: board in
/// gray, each object in a color derived from its id.
pub fn scene_ppm(scene: &SceneState, cell: f64) -> (usize, usize, Vec<u8>) {
    let rows = (scene.shelf.depth_m / cell).round() as usize;
    let cols = (scene.shelf.width_m / cell).round() as usize;
    let fps: Vec<_> = scene.objects.iter().map(|o| (o.id, o.footprint())).collect();
    let mut rgb = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let p = crate::geometry::Vec2::new((r as f64 + 0.5) * cell, (c as f64 + 0.5) * cell);
            let color = fps
                .iter()
                .find(|(_, f)| f.contains(p))
                .map(|(id, _)| {
                    let h = id.wrapping_mul(2_654_435_761);
                    [(h >> 24) as u8 | 0x40, (h >> 16) as u8 | 0x40, (h >> 8) as u8 | 0x40]
                })
                .unwrap_or([96, 96, 96]);
            rgb.push(color);
        }
    }
    (cols, rows, ppm(cols, rows, &rgb))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
