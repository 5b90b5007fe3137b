//! Small vector type and planar convex-shape routines shared by the scene,
//! sensor and push modules.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn perp_dot(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// A convex polygon dilated by a radius. Boxes are four corners with radius
/// zero, cylinders a single point with the cylinder radius.
///
/// Vertices are stored counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Footprint {
    pub vertices: Vec<Vec2>,
    pub radius: f64,
}

impl Footprint {
    pub fn translated(&self, by: Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + by).collect(),
            radius: self.radius,
        }
    }

    /// Axis-aligned bounds `(min, max)` including the radius.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        let r = Vec2::new(self.radius, self.radius);
        (lo - r, hi + r)
    }

    /// Euclidean distance from `p` to the footprint, zero inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        (polygon_distance(&self.vertices, p) - self.radius).max(0.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        polygon_distance(&self.vertices, p) <= self.radius
    }

    /// Signed clearance between two footprints: positive when separated
    /// (the true distance), non-positive when they touch or interpenetrate.
    pub fn clearance(&self, other: &Footprint) -> f64 {
        polygon_gap(&self.vertices, &other.vertices) - self.radius - other.radius
    }

    /// Positive-area intersection; touching footprints do not overlap.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        self.clearance(other) < -1e-12
    }
}

/// Distance from `p` to a convex polygon (point or segment allowed), zero
/// inside.
pub fn polygon_distance(poly: &[Vec2], p: Vec2) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p - poly[0]).norm(),
        2 => segment_distance(poly[0], poly[1], p),
        n => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for i in 0..n {
                let a = poly[i];
                let b = poly[(i + 1) % n];
                if (b - a).perp_dot(p - a) < 0.0 {
                    inside = false;
                }
                best = best.min(segment_distance(a, b, p));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

fn segment_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn edge_normals(poly: &[Vec2]) -> impl Iterator<Item = Vec2> + '_ {
    let n = poly.len();
    (0..n).filter_map(move |i| {
        let e = poly[(i + 1) % n] - poly[i];
        let len = e.norm();
        (len > 0.0).then(|| Vec2::new(e.y / len, -e.x / len))
    })
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Distance between two convex polygons when disjoint; otherwise the
/// (non-positive) largest separating-axis gap.
pub fn polygon_gap(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.len() < 3 || b.len() < 3 {
        // Point/segment against anything: plain distance, or negative depth
        // when a point sits inside a polygon.
        let (small, big) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        if big.len() >= 3 {
            let d = small
                .iter()
                .map(|&p| polygon_distance(big, p))
                .fold(f64::INFINITY, f64::min);
            if d > 0.0 {
                return d;
            }
            let depth = small
                .iter()
                .map(|&p| {
                    edge_normals(big)
                        .zip(big.iter())
                        .map(|(n, &v)| (p - v).dot(n))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            return depth;
        }
        let mut best = f64::INFINITY;
        for &p in small {
            best = best.min(polygon_distance(big, p));
        }
        if small.len() == 2 {
            for &p in big {
                best = best.min(polygon_distance(small, p));
            }
        }
        return best;
    }
    let mut sep = f64::NEG_INFINITY;
    for axis in edge_normals(a).chain(edge_normals(b)) {
        let (alo, ahi) = project(a, axis);
        let (blo, bhi) = project(b, axis);
        sep = sep.max((blo - ahi).max(alo - bhi));
    }
    if sep <= 0.0 {
        return sep;
    }
    let mut best = f64::INFINITY;
    for &p in a {
        best = best.min(polygon_distance(b, p));
    }
    for &p in b {
        best = best.min(polygon_distance(a, p));
    }
    best
}

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).perp_dot(p - lower[lower.len() - 2])
                <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).perp_dot(p - upper[upper.len() - 2])
                <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Entry/exit parameters of the ray `t * dir` (origin at zero) against a
/// convex polygon, or `None` on a miss.
fn ray_convex_polygon(poly: &[Vec2], dir: Vec2) -> Option<(f64, f64)> {
    let mut t_in = f64::NEG_INFINITY;
    let mut t_out = f64::INFINITY;
    for (n, &v) in edge_normals(poly).zip(poly.iter()) {
        // inside ⇔ (x - v)·n <= 0
        let denom = dir.dot(n);
        let num = v.dot(n);
        if denom.abs() < 1e-12 {
            // Parallel: travelling along the boundary is not an overlap.
            if num < 1e-12 {
                return None;
            }
            continue;
        }
        let t = num / denom;
        if denom < 0.0 {
            t_in = t_in.max(t);
        } else {
            t_out = t_out.min(t);
        }
    }
    (t_in <= t_out).then_some((t_in, t_out))
}

fn ray_disc(center: Vec2, radius: f64, dir: Vec2) -> Option<(f64, f64)> {
    let a = dir.dot(dir);
    let b = -2.0 * dir.dot(center);
    let c = center.dot(center) - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / (2.0 * a), (-b + s) / (2.0 * a)))
}

/// Translation distance along the unit direction `dir` that `moving` can
/// travel before it starts to overlap `fixed` with positive area. `None` when
/// the two never overlap along that line or when `moving` is travelling away.
pub fn contact_distance(moving: &Footprint, fixed: &Footprint, dir: Vec2) -> Option<f64> {
    // Minkowski difference fixed ⊕ (−moving), dilated by both radii.
    let mut pts = Vec::with_capacity(moving.vertices.len() * fixed.vertices.len());
    for &b in &fixed.vertices {
        for &a in &moving.vertices {
            pts.push(b - a);
        }
    }
    let hull = convex_hull(&pts);
    let radius = moving.radius + fixed.radius;

    let mut enter = f64::INFINITY;
    let mut exit = f64::NEG_INFINITY;
    let mut merge = |iv: Option<(f64, f64)>| {
        if let Some((a, b)) = iv {
            enter = enter.min(a);
            exit = exit.max(b);
        }
    };
    if hull.len() >= 3 {
        merge(ray_convex_polygon(&hull, dir));
    }
    if radius > 0.0 {
        for &v in &hull {
            merge(ray_disc(v, radius, dir));
        }
        if hull.len() >= 2 {
            let n = hull.len();
            let edges = if n == 2 { 1 } else { n };
            for i in 0..edges {
                let p = hull[i];
                let q = hull[(i + 1) % n];
                let e = q - p;
                let len = e.norm();
                if len == 0.0 {
                    continue;
                }
                let nrm = Vec2::new(e.y / len, -e.x / len) * radius;
                let rect = [p - nrm, q - nrm, q + nrm, p + nrm];
                // orientation of rect depends on hull winding; normalise
                let rect = if (rect[1] - rect[0]).perp_dot(rect[2] - rect[0]) < 0.0 {
                    [rect[3], rect[2], rect[1], rect[0]]
                } else {
                    rect
                };
                merge(ray_convex_polygon(&rect, dir));
            }
        }
    } else if hull.len() < 3 {
        // Degenerate zero-area shapes cannot overlap with positive area.
        return None;
    }
    if !enter.is_finite() || exit - enter <= 1e-12 || exit <= 1e-12 {
        return None;
    }
    Some(enter.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cx: f64, cy: f64, h: f64) -> Footprint {
        Footprint {
            vertices: vec![
                Vec2::new(cx - h, cy - h),
                Vec2::new(cx + h, cy - h),
                Vec2::new(cx + h, cy + h),
                Vec2::new(cx - h, cy + h),
            ],
            radius: 0.0,
        }
    }

    fn disc(cx: f64, cy: f64, r: f64) -> Footprint {
        Footprint { vertices: vec![Vec2::new(cx, cy)], radius: r }
    }

    #[test]
    fn square_contact_along_x() {
        let a = square(0.0, 0.0, 0.05);
        let b = square(0.12, 0.0, 0.05);
        let s = contact_distance(&a, &b, Vec2::new(1.0, 0.0)).unwrap();
        assert!((s - 0.02).abs() < 1e-12);
        assert!(contact_distance(&a, &b, Vec2::new(-1.0, 0.0)).is_none());
        assert!(contact_distance(&a, &b, Vec2::new(0.0, 1.0)).is_none());
    }

    #[test]
    fn disc_contact_is_analytic() {
        let a = disc(0.0, 0.0, 0.03);
        let b = disc(0.1, 0.02, 0.03);
        let s = contact_distance(&a, &b, Vec2::new(1.0, 0.0)).unwrap();
        // |(s,0) - (0.1,0.02)| = 0.06
        let expect = 0.1 - (0.06f64 * 0.06 - 0.02 * 0.02).sqrt();
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn disc_against_square_corner() {
        let a = disc(0.0, 0.0, 0.02);
        let b = square(0.1, 0.06, 0.05);
        // Corner at (0.05, 0.01): hit when |(s,0)-(0.05,0.01)| = 0.02.
        let s = contact_distance(&a, &b, Vec2::new(1.0, 0.0)).unwrap();
        let expect = 0.05 - (0.02f64 * 0.02 - 0.01 * 0.01).sqrt();
        assert!((s - expect).abs() < 1e-12, "{s} vs {expect}");
    }

    #[test]
    fn grazing_contact_is_not_overlap() {
        let a = square(0.0, 0.0, 0.05);
        let b = square(0.2, 0.1, 0.05);
        assert!(contact_distance(&a, &b, Vec2::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn clearance_and_overlap() {
        let a = square(0.0, 0.0, 0.05);
        assert!((a.clearance(&square(0.13, 0.0, 0.05)) - 0.03).abs() < 1e-12);
        assert!(!a.overlaps(&square(0.10, 0.0, 0.05)));
        assert!(a.overlaps(&square(0.09, 0.0, 0.05)));
        assert!((a.clearance(&disc(0.1, 0.0, 0.02)) - 0.03).abs() < 1e-12);
        assert!(a.overlaps(&disc(0.0, 0.0, 0.01)));
        assert!((disc(0.0, 0.0, 0.01).clearance(&disc(0.05, 0.0, 0.01)) - 0.03).abs() < 1e-12);
    }

    #[test]
    fn hull_of_square_points() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
    }
}
