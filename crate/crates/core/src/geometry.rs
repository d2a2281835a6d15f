//! Planar primitives: vectors, rigid poses, axis-aligned boxes and convex polygons.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, a: f64) -> Vec2 {
        self + (o - self) * a
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Normalize an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Planar rigid pose (position + heading).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub pos: Vec2,
    pub heading: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { pos: Vec2::ZERO, heading: 0.0 };

    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { pos: Vec2::new(x, y), heading }
    }

    /// Map a point from this pose's local frame to the parent frame.
    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.pos + p.rotate(self.heading)
    }

    /// Map a parent-frame point into this pose's local frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.pos).rotate(-self.heading)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose { pos: self.to_world(other.pos), heading: wrap_angle(self.heading + other.heading) }
    }

    pub fn inverse(&self) -> Pose {
        Pose { pos: (-self.pos).rotate(-self.heading), heading: wrap_angle(-self.heading) }
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Aabb {
    pub fn new(lo: Vec2, hi: Vec2) -> Self {
        Self { lo, hi }
    }

    pub fn point(p: Vec2) -> Self {
        Self { lo: p, hi: p }
    }

    pub fn empty() -> Self {
        Self {
            lo: Vec2::new(f64::INFINITY, f64::INFINITY),
            hi: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x > self.hi.x || self.lo.y > self.hi.y
    }

    pub fn from_points(pts: &[Vec2]) -> Self {
        pts.iter().fold(Self::empty(), |b, &p| b.union(&Self::point(p)))
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            lo: Vec2::new(self.lo.x.min(o.lo.x), self.lo.y.min(o.lo.y)),
            hi: Vec2::new(self.hi.x.max(o.hi.x), self.hi.y.max(o.hi.y)),
        }
    }

    pub fn inflate(&self, dx: f64, dy: f64) -> Aabb {
        Aabb { lo: Vec2::new(self.lo.x - dx, self.lo.y - dy), hi: Vec2::new(self.hi.x + dx, self.hi.y + dy) }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        o.lo.x >= self.lo.x && o.hi.x <= self.hi.x && o.lo.y >= self.lo.y && o.hi.y <= self.hi.y
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.lo.x <= o.hi.x && o.lo.x <= self.hi.x && self.lo.y <= o.hi.y && o.lo.y <= self.hi.y
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.lo.x - p.x).max(0.0).max(p.x - self.hi.x);
        let dy = (self.lo.y - p.y).max(0.0).max(p.y - self.hi.y);
        dx.hypot(dy)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.lo.x, self.hi.x), p.y.clamp(self.lo.y, self.hi.y))
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.hi.x - self.lo.x) * (self.hi.y - self.lo.y)
        }
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [self.lo, Vec2::new(self.hi.x, self.lo.y), self.hi, Vec2::new(self.lo.x, self.hi.y)]
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_vertices_unchecked(self.corners().to_vec())
    }

    /// Upper bound on the Hausdorff distance between two boxes.
    pub fn face_displacement(&self, o: &Aabb) -> f64 {
        let dx = (self.lo.x - o.lo.x).abs().max((self.hi.x - o.hi.x).abs());
        let dy = (self.lo.y - o.lo.y).abs().max((self.hi.y - o.hi.y).abs());
        dx.hypot(dy)
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    verts: Vec<Vec2>,
}

impl Polygon {
    /// Builds the convex hull of the given points.
    pub fn convex_hull(points: &[Vec2]) -> Polygon {
        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Polygon { verts: pts };
        }
        let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Vec2>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    if (b - a).cross(p - a) <= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(p);
            }
            hull.pop();
        }
        Polygon { verts: hull }
    }

    /// Accepts vertices as given; caller guarantees convexity and CCW order.
    pub fn from_vertices_unchecked(verts: Vec<Vec2>) -> Polygon {
        Polygon { verts }
    }

    pub fn rectangle(center: Vec2, width: f64, height: f64) -> Polygon {
        let (hw, hh) = (width / 2.0, height / 2.0);
        Polygon {
            verts: vec![
                center + Vec2::new(-hw, -hh),
                center + Vec2::new(hw, -hh),
                center + Vec2::new(hw, hh),
                center + Vec2::new(-hw, hh),
            ],
        }
    }

    /// Regular n-gon whose inscribed circle has radius `apothem`.
    pub fn circumscribed_ngon(center: Vec2, apothem: f64, n: usize) -> Polygon {
        let rad = apothem / (std::f64::consts::PI / n as f64).cos();
        let verts = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
                center + Vec2::new(rad * a.cos(), rad * a.sin())
            })
            .collect();
        Polygon { verts }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.verts.len();
        (0..n).map(move |i| (self.verts[i], self.verts[(i + 1) % n]))
    }

    pub fn translate(&self, d: Vec2) -> Polygon {
        Polygon { verts: self.verts.iter().map(|&v| v + d).collect() }
    }

    pub fn transform(&self, pose: &Pose) -> Polygon {
        Polygon { verts: self.verts.iter().map(|&v| pose.to_world(v)).collect() }
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.verts)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    /// Area centroid; falls back to the vertex mean for degenerate polygons.
    pub fn centroid(&self) -> Vec2 {
        let a = self.area();
        if a.abs() < 1e-14 {
            let n = self.verts.len().max(1) as f64;
            return self.verts.iter().fold(Vec2::ZERO, |s, &v| s + v) * (1.0 / n);
        }
        let mut c = Vec2::ZERO;
        for (p, q) in self.edges() {
            c = c + (p + q) * p.cross(q);
        }
        c * (1.0 / (6.0 * a))
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        match self.verts.len() {
            0 => false,
            1 => self.verts[0] == p,
            2 => point_segment_distance(p, self.verts[0], self.verts[1]) == 0.0,
            _ => self.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0),
        }
    }

    /// Strict interior test with a small tolerance; boundary points are outside.
    pub fn contains_strict(&self, p: Vec2, tol: f64) -> bool {
        self.verts.len() >= 3
            && self.edges().all(|(a, b)| {
                let e = b - a;
                let len = e.norm();
                len > 0.0 && e.cross(p - a) / len > tol
            })
    }

    /// Distance from a point to the polygon (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.boundary_distance(p)
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Separating-axis test for two convex polygons (touching counts as intersecting).
    pub fn intersects(&self, o: &Polygon) -> bool {
        if self.is_empty() || o.is_empty() {
            return false;
        }
        !(separated_along_edges(self, o) || separated_along_edges(o, self))
    }

    pub fn intersects_aabb(&self, b: &Aabb) -> bool {
        self.intersects(&b.to_polygon())
    }

    /// Distance between two convex polygons (0 when they intersect).
    pub fn distance_to_polygon(&self, o: &Polygon) -> f64 {
        if self.intersects(o) {
            return 0.0;
        }
        let a = self.verts.iter().map(|&v| o.boundary_distance(v)).fold(f64::INFINITY, f64::min);
        let b = o.verts.iter().map(|&v| self.boundary_distance(v)).fold(f64::INFINITY, f64::min);
        a.min(b)
    }

    /// Minkowski sum of two convex polygons.
    pub fn minkowski_sum(&self, o: &Polygon) -> Polygon {
        let mut pts = Vec::with_capacity(self.len() * o.len());
        for &a in &self.verts {
            for &b in &o.verts {
                pts.push(a + b);
            }
        }
        Polygon::convex_hull(&pts)
    }

    /// Support value of the polygon along direction `d`.
    pub fn support(&self, d: Vec2) -> f64 {
        self.verts.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn separated_along_edges(a: &Polygon, b: &Polygon) -> bool {
    if a.len() < 2 {
        return false;
    }
    for (p, q) in a.edges() {
        let e = q - p;
        if e.norm_sq() == 0.0 {
            continue;
        }
        let n = Vec2::new(e.y, -e.x);
        let amax = a.verts.iter().map(|v| v.dot(n)).fold(f64::NEG_INFINITY, f64::max);
        let amin = a.verts.iter().map(|v| v.dot(n)).fold(f64::INFINITY, f64::min);
        let bmax = b.verts.iter().map(|v| v.dot(n)).fold(f64::NEG_INFINITY, f64::max);
        let bmin = b.verts.iter().map(|v| v.dot(n)).fold(f64::INFINITY, f64::min);
        if amax < bmin || bmax < amin {
            return true;
        }
    }
    false
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Groups polygons into connected components of their intersection graph.
pub fn connected_components(polys: &[Polygon]) -> Vec<Vec<usize>> {
    let n = polys.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                if comp[j] == usize::MAX && polys[i].intersects(&polys[j]) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}
