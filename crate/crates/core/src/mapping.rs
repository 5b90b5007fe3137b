//! 2.5D occupancy height map over the shelf footprint and the metrics derived
//! from it.
//!
//! Each cell keeps an occupancy log-odds value, the maximum observed height
//! above the board and an observed flag. Returns above the occupied-height
//! threshold are hits; returns on the board are misses. A cell whose height
//! channel shows an object surface is an object column: board returns inside
//! it no longer count as free evidence, and the first hit discards any free
//! evidence gathered before. Classification therefore only ever moves from
//! unknown to known, or from free to occupied, so the unknown count never
//! grows.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::ShelfSpec;
use crate::sensor::CameraPose;
use crate::{Error, Result};

/// Points within this distance of a wall, back panel or top are not mapped.
const WALL_BAND: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub cell_size: f64,
    pub tau_unknown: f64,
    pub hit: f64,
    pub miss: f64,
    pub clamp: f64,
    /// Returns higher than this above the board count as object surface.
    pub occupied_height: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            cell_size: 0.01,
            tau_unknown: 0.2,
            hit: 0.85,
            miss: -0.4,
            clamp: 3.5,
            occupied_height: 0.015,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cell_size > 0.0
            && self.tau_unknown > 0.0
            && self.tau_unknown < 0.5
            && self.hit > 0.0
            && self.miss < 0.0
            && self.clamp > 0.0
            && self.occupied_height >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad map params {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

impl CellState {
    /// Strict thresholds: `p == 0.5 ± tau` is still unknown.
    pub fn from_probability(p: f64, tau_unknown: f64) -> Self {
        if p > 0.5 + tau_unknown {
            CellState::Occupied
        } else if p < 0.5 - tau_unknown {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeightMap {
    /// Cells along x (shelf depth), row 0 at the open front.
    pub rows: usize,
    /// Cells along y (shelf width).
    pub cols: usize,
    pub params: MapParams,
    pub board_z: f64,
    pub interior_height: f64,
    pub log_odds: Vec<f64>,
    /// Maximum observed height above the board, meters.
    pub height: Vec<f64>,
    pub observed: Vec<bool>,
}

impl HeightMap {
    pub fn new(shelf: &ShelfSpec, params: &MapParams) -> Result<Self> {
        shelf.validate()?;
        params.validate()?;
        let dim = |extent: f64| -> Result<usize> {
            let n = (extent / params.cell_size).round();
            if n < 1.0 || (n * params.cell_size - extent).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "cell size {} does not divide {extent}",
                    params.cell_size
                )));
            }
            Ok(n as usize)
        };
        let rows = dim(shelf.depth_m)?;
        let cols = dim(shelf.width_m)?;
        let n = rows * cols;
        Ok(Self {
            rows,
            cols,
            params: params.clone(),
            board_z: shelf.board_height_m,
            interior_height: shelf.height_m,
            log_odds: vec![0.0; n],
            height: vec![0.0; n],
            observed: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn depth(&self) -> f64 {
        self.rows as f64 * self.params.cell_size
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.params.cell_size
    }

    /// Cell containing the planar point, if inside the footprint.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = self.params.cell_size;
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (r, k) = ((x / c).floor() as usize, (y / c).floor() as usize);
        (r < self.rows && k < self.cols).then_some((r, k))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let c = self.params.cell_size;
        ((row as f64 + 0.5) * c, (col as f64 + 0.5) * c)
    }

    pub fn probability_at(&self, i: usize) -> f64 {
        probability(self.log_odds[i])
    }

    pub fn state_at(&self, i: usize) -> CellState {
        CellState::from_probability(self.probability_at(i), self.params.tau_unknown)
    }

    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.state_at(self.index(row, col))
    }

    pub fn unknown_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.state_at(i) == CellState::Unknown).count()
    }

    pub fn count(&self, state: CellState) -> usize {
        (0..self.len()).filter(|&i| self.state_at(i) == state).count()
    }

    /// Fraction of unknown cells.
    pub fn entropy(&self) -> f64 {
        self.unknown_count() as f64 / self.len() as f64
    }

    fn is_object_column(&self, i: usize) -> bool {
        self.height[i] > self.params.occupied_height
    }

    /// Fuses one point cloud (shelf frame). Updates are aggregated per cell
    /// first, so the order of points does not matter.
    pub fn integrate(&mut self, cloud: &[Vec3]) {
        if cloud.is_empty() {
            return;
        }
        let n = self.len();
        let mut hits = vec![0u32; n];
        let mut misses = vec![0u32; n];
        let mut peak = vec![f64::NEG_INFINITY; n];
        let (depth, width, top) = (self.depth(), self.width(), self.interior_height);
        for p in cloud {
            let h = p.z - self.board_z;
            if p.x >= depth - WALL_BAND
                || p.y <= WALL_BAND
                || p.y >= width - WALL_BAND
                || h >= top - WALL_BAND
            {
                continue;
            }
            let Some((r, c)) = self.cell_of(p.x, p.y) else { continue };
            let i = self.index(r, c);
            peak[i] = peak[i].max(h.max(0.0));
            if h > self.params.occupied_height {
                hits[i] += 1;
            } else {
                misses[i] += 1;
            }
        }
        let clamp = self.params.clamp;
        for i in 0..n {
            if hits[i] == 0 && misses[i] == 0 {
                continue;
            }
            self.observed[i] = true;
            self.height[i] = self.height[i].max(peak[i]);
            if self.is_object_column(i) {
                let base = self.log_odds[i].max(0.0);
                self.log_odds[i] = (base + hits[i] as f64 * self.params.hit).min(clamp);
            } else {
                self.log_odds[i] = (self.log_odds[i] + misses[i] as f64 * self.params.miss).max(-clamp);
            }
        }
    }

    /// Largest 4-connected unknown region. Ties go to the component reached
    /// first in a row-major scan. With no unknown cells the map center is
    /// returned with zero area.
    pub fn largest_unknown_center(&self) -> UnknownRegion {
        let z = self.board_z + self.interior_height / 2.0;
        let unknown: Vec<bool> = (0..self.len()).map(|i| self.state_at(i) == CellState::Unknown).collect();
        let mut seen = vec![false; self.len()];
        let mut best: Option<(usize, f64, f64)> = None;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if !unknown[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let (mut count, mut sx, mut sy) = (0usize, 0.0, 0.0);
            while let Some(i) = queue.pop_front() {
                let (r, c) = (i / self.cols, i % self.cols);
                let (x, y) = self.cell_center(r, c);
                count += 1;
                sx += x;
                sy += y;
                let mut visit = |j: usize| {
                    if unknown[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if r > 0 {
                    visit(i - self.cols);
                }
                if r + 1 < self.rows {
                    visit(i + self.cols);
                }
                if c > 0 {
                    visit(i - 1);
                }
                if c + 1 < self.cols {
                    visit(i + 1);
                }
            }
            if best.map_or(true, |(n, _, _)| count > n) {
                best = Some((count, sx / count as f64, sy / count as f64));
            }
        }
        match best {
            Some((area, x, y)) => UnknownRegion { center: Vec3::new(x, y, z), area },
            None => UnknownRegion { center: Vec3::new(self.depth() / 2.0, self.width() / 2.0, z), area: 0 },
        }
    }

    /// Mean occupancy probability over a 4×8 block partition (4 blocks along
    /// the depth, 8 along the width), row-major.
    pub fn pooled_features(&self) -> [f64; 32] {
        let mut out = [0.0; 32];
        for br in 0..4 {
            let (r0, r1) = (br * self.rows / 4, (br + 1) * self.rows / 4);
            for bc in 0..8 {
                let (c0, c1) = (bc * self.cols / 8, (bc + 1) * self.cols / 8);
                let mut sum = 0.0;
                let mut n = 0usize;
                for r in r0..r1 {
                    for c in c0..c1 {
                        sum += self.probability_at(self.index(r, c));
                        n += 1;
                    }
                }
                out[br * 8 + bc] = if n > 0 { sum / n as f64 } else { 0.5 };
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownRegion {
    pub center: Vec3,
    /// Cell count.
    pub area: usize,
}

/// Fractional decrease of unknown cells; zero when there was nothing
/// unknown, never below −1.
pub fn information_gain(unknown_prev: usize, unknown_now: usize) -> f64 {
    if unknown_prev == 0 {
        return 0.0;
    }
    ((unknown_prev as f64 - unknown_now as f64) / unknown_prev as f64).max(-1.0)
}

/// Euclidean distance between camera positions; angles are ignored.
pub fn motion_cost(prev: &CameraPose, now: &CameraPose) -> f64 {
    (now.position() - prev.position()).norm()
}
