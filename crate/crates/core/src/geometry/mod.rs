//! Hair strand geometry: strands as chains of cubic curve segments with a
//! linear radius taper, a bounding-volume hierarchy over flattened curve
//! pieces, procedural swatches and the binary hair-model loader.
//!
//! Curve segments are subdivided at build time until each piece deviates
//! from its chord by less than the flatness threshold; each piece is then
//! intersected as a short tube around its chord. Distances are in
//! millimeters.

mod bvh;
mod curve;
pub mod hair_file;
pub mod swatch;

pub use bvh::{Bvh, BvhNode};
pub use curve::{subdivide, CubicBezier};
pub use hair_file::{load_hair_model, HairModelFile};
pub use swatch::{generate_straight_hair, generate_swatch, StraightHairConfig, SwatchConfig};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Default maximum deviation of a curve piece from its chord, in mm.
pub const DEFAULT_FLATNESS: f64 = 1e-3;
const MAX_SUBDIVISION_DEPTH: u32 = 16;
/// Hits closer than this to the ray origin are ignored.
pub const T_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_point(p: Vec3) -> Self {
        Aabb { min: p, max: p }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        self.union(Aabb::from_point(p))
    }

    pub fn inflate(self, r: f64) -> Aabb {
        let d = Vec3::new(r, r, r);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        self.min.x <= o.min.x
            && self.min.y <= o.min.y
            && self.min.z <= o.min.z
            && self.max.x >= o.max.x
            && self.max.y >= o.max.y
            && self.max.z >= o.max.z
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        self.contains(&Aabb::from_point(p))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        if e.x < 0.0 {
            return 0.0;
        }
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    /// Slab test; returns the entry distance when the box overlaps
    /// `[0, t_max]` along the ray.
    pub fn hit(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let o = origin.axis(axis);
            let inv = inv_dir.axis(axis);
            let mut near = (self.min.axis(axis) - o) * inv;
            let mut far = (self.max.axis(axis) - o) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN arises for a zero direction component on a slab boundary.
            if near.is_nan() || far.is_nan() {
                if o < self.min.axis(axis) || o > self.max.axis(axis) {
                    return None;
                }
                continue;
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray { origin, dir }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// A hair fiber: control points interpolated by a Catmull-Rom spline, one
/// cubic segment per consecutive pair, radius tapering linearly from root to
/// tip.
#[derive(Debug, Clone, PartialEq)]
pub struct Strand {
    control_points: Vec<Vec3>,
    radius_root: f64,
    radius_tip: f64,
}

impl Strand {
    pub fn new(control_points: Vec<Vec3>, radius_root: f64, radius_tip: f64) -> Result<Self> {
        if control_points.len() < 4 {
            return Err(Error::Config(format!(
                "a strand needs at least 4 control points, got {}",
                control_points.len()
            )));
        }
        if !(radius_root > 0.0 && radius_tip > 0.0 && radius_tip <= radius_root) {
            return Err(Error::Config(format!(
                "invalid strand radii root={radius_root} tip={radius_tip}"
            )));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite control point".into()));
        }
        Ok(Strand {
            control_points,
            radius_root,
            radius_tip,
        })
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn radius_root(&self) -> f64 {
        self.radius_root
    }

    pub fn radius_tip(&self) -> f64 {
        self.radius_tip
    }

    pub fn segment_count(&self) -> usize {
        self.control_points.len() - 1
    }

    /// Cubic segment `i`, spanning control points `i` and `i + 1`. End
    /// tangents come from mirrored phantom points.
    pub fn segment(&self, i: usize) -> CubicBezier {
        let pts = &self.control_points;
        let n = pts.len();
        let p1 = pts[i];
        let p2 = pts[i + 1];
        let p0 = if i == 0 { p1 * 2.0 - p2 } else { pts[i - 1] };
        let p3 = if i + 2 >= n { p2 * 2.0 - p1 } else { pts[i + 2] };
        CubicBezier::catmull_rom(p0, p1, p2, p3)
    }

    /// Radius at parameter `u` of segment `segment`.
    pub fn radius_at(&self, segment: usize, u: f64) -> f64 {
        let s = (segment as f64 + u) / self.segment_count() as f64;
        self.radius_root + (self.radius_tip - self.radius_root) * s
    }
}

/// A near-straight piece of a curve segment, intersected as a tube around
/// its chord.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub p0: Vec3,
    pub p1: Vec3,
    pub r0: f64,
    pub r1: f64,
    pub strand: u32,
    pub segment: u32,
    pub u0: f64,
    pub u1: f64,
}

impl Piece {
    pub fn bounds(&self) -> Aabb {
        let r = self.r0.max(self.r1);
        Aabb::from_point(self.p0).grow(self.p1).inflate(r)
    }

    pub fn centroid(&self) -> Vec3 {
        self.p0.lerp(self.p1, 0.5)
    }
}

/// Orthonormal fiber-local frame: `tangent` runs root to tip, `normal`
/// points toward the viewer of the hit and `binormal = normal x tangent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

impl Frame {
    /// World direction expressed as `(tangent, binormal, normal)`
    /// coordinates, the axis order the fiber scattering code expects.
    pub fn to_local(&self, w: Vec3) -> Vec3 {
        Vec3::new(w.dot(self.tangent), w.dot(self.binormal), w.dot(self.normal))
    }

    pub fn to_world(&self, l: Vec3) -> Vec3 {
        self.tangent * l.x + self.binormal * l.y + self.normal * l.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveHit {
    pub t: f64,
    /// Parameter along the hit curve segment.
    pub u: f64,
    /// Signed offset across the fiber width, in `[-1, 1]`.
    pub h: f64,
    pub frame: Frame,
    pub point: Vec3,
    pub piece: u32,
    pub strand: u32,
    pub segment: u32,
}

/// Pieces of one strand that a ray must ignore, used when a path leaves a
/// fiber it has just scattered from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkipRange {
    pub strand: u32,
    pub first: u32,
    pub last: u32,
}

impl SkipRange {
    fn skips(&self, index: u32, piece: &Piece) -> bool {
        piece.strand == self.strand && index >= self.first && index <= self.last
    }
}

/// Ray versus the tube around one piece. Only entry hits count: a ray
/// starting inside the tube does not hit it.
pub fn intersect_piece(piece: &Piece, index: u32, ray: &Ray, t_max: f64) -> Option<CurveHit> {
    let axis_vec = piece.p1 - piece.p0;
    let len = axis_vec.length();
    if len <= 0.0 {
        return None;
    }
    let axis = axis_vec / len;
    let w0 = ray.origin - piece.p0;
    let b = ray.dir.dot(axis);
    let denom = 1.0 - b * b;
    if denom < 1e-12 {
        return None;
    }
    let d = ray.dir.dot(w0);
    let e = axis.dot(w0);
    let t_c = (b * e - d) / denom;
    let s_c = (e - b * d) / denom;
    let offset = ray.at(t_c) - (piece.p0 + axis * s_c);
    let dist2 = offset.length_squared();

    let w_c = (s_c / len).clamp(0.0, 1.0);
    let r = piece.r0 + (piece.r1 - piece.r0) * w_c;
    if dist2 >= r * r {
        return None;
    }
    let t = t_c - ((r * r - dist2) / denom).sqrt();
    if !(t > T_EPSILON && t < t_max) {
        return None;
    }
    let point = ray.at(t);
    let s_hit = (point - piece.p0).dot(axis);
    if !(0.0..=len).contains(&s_hit) {
        return None;
    }

    let wo = -ray.dir;
    let normal = (wo - axis * wo.dot(axis)).normalized();
    let binormal = normal.cross(axis);
    let h = (offset.dot(binormal) / r).clamp(-1.0, 1.0);
    let w = s_hit / len;
    Some(CurveHit {
        t,
        u: piece.u0 + (piece.u1 - piece.u0) * w,
        h,
        frame: Frame {
            tangent: axis,
            normal,
            binormal,
        },
        point,
        piece: index,
        strand: piece.strand,
        segment: piece.segment,
    })
}

/// Whether `a` is nearer than `b`, with ties broken by piece index so that
/// every traversal order selects the same hit.
fn closer(a: &CurveHit, b: &CurveHit) -> bool {
    a.t < b.t || (a.t == b.t && a.piece < b.piece)
}

/// Strands plus their flattened pieces and acceleration structure.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct StrandSet {
    strands: Vec<Strand>,
    pieces: Vec<Piece>,
    bvh: Bvh,
    bounds: Aabb,
    flatness: f64,
}

impl StrandSet {
    pub fn new(strands: Vec<Strand>) -> Result<Self> {
        Self::with_flatness(strands, DEFAULT_FLATNESS)
    }

    pub fn with_flatness(strands: Vec<Strand>, flatness: f64) -> Result<Self> {
        if strands.is_empty() {
            return Err(Error::Config("strand set is empty".into()));
        }
        if !(flatness > 0.0) {
            return Err(Error::Config(format!("flatness must be positive, got {flatness}")));
        }
        let pieces = build_pieces(&strands, flatness);
        let bvh = Bvh::build(&pieces);
        let max_radius = strands.iter().map(|s| s.radius_root).fold(0.0, f64::max);
        let mut bounds = Aabb::EMPTY;
        for s in &strands {
            for &p in &s.control_points {
                bounds = bounds.grow(p);
            }
        }
        bounds = bounds.inflate(max_radius);
        for p in &pieces {
            bounds = bounds.union(p.bounds());
        }
        Ok(StrandSet {
            strands,
            pieces,
            bvh,
            bounds,
            flatness,
        })
    }

    pub fn strands(&self) -> &[Strand] {
        &self.strands
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn flatness(&self) -> f64 {
        self.flatness
    }

    /// Pieces adjacent to `hit` on the same strand, for spawning rays off
    /// the fiber without re-hitting it.
    pub fn skip_for(&self, hit: &CurveHit) -> SkipRange {
        SkipRange {
            strand: hit.strand,
            first: hit.piece.saturating_sub(1),
            last: hit.piece + 1,
        }
    }

    /// Nearest hit with `t < t_max`.
    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<CurveHit> {
        self.intersect_skipping(ray, t_max, None)
    }

    pub fn intersect_skipping(&self, ray: &Ray, t_max: f64, skip: Option<SkipRange>) -> Option<CurveHit> {
        let mut best: Option<CurveHit> = None;
        let mut limit = t_max;
        self.bvh.traverse(ray, &mut limit, |index, limit| {
            let piece = &self.pieces[index as usize];
            if skip.is_some_and(|s| s.skips(index, piece)) {
                return;
            }
            // Probe slightly past the current best so equal-t ties are seen.
            if let Some(hit) = intersect_piece(piece, index, ray, f64::min(*limit * (1.0 + 1e-12), t_max)) {
                if best.as_ref().map_or(true, |b| closer(&hit, b)) {
                    *limit = hit.t;
                    best = Some(hit);
                }
            }
        });
        best
    }

    /// Whether anything blocks the ray before `t_max`.
    pub fn occluded(&self, ray: &Ray, t_max: f64, skip: Option<SkipRange>) -> bool {
        let mut found = false;
        let mut limit = t_max;
        self.bvh.traverse(ray, &mut limit, |index, limit| {
            if found {
                return;
            }
            let piece = &self.pieces[index as usize];
            if skip.is_some_and(|s| s.skips(index, piece)) {
                return;
            }
            if intersect_piece(piece, index, ray, t_max).is_some() {
                found = true;
                *limit = -1.0;
            }
        });
        found
    }

    /// Reference intersection by testing every piece.
    pub fn intersect_brute_force(&self, ray: &Ray, t_max: f64) -> Option<CurveHit> {
        let mut best: Option<CurveHit> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            if let Some(hit) = intersect_piece(piece, i as u32, ray, t_max) {
                if best.as_ref().map_or(true, |b| closer(&hit, b)) {
                    best = Some(hit);
                }
            }
        }
        best
    }
}

fn build_pieces(strands: &[Strand], flatness: f64) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut chords = Vec::new();
    for (si, strand) in strands.iter().enumerate() {
        for seg in 0..strand.segment_count() {
            chords.clear();
            subdivide(&strand.segment(seg), flatness, MAX_SUBDIVISION_DEPTH, &mut chords);
            for &(p0, p1, u0, u1) in &chords {
                pieces.push(Piece {
                    p0,
                    p1,
                    r0: strand.radius_at(seg, u0),
                    r1: strand.radius_at(seg, u1),
                    strand: si as u32,
                    segment: seg as u32,
                    u0,
                    u1,
                });
            }
        }
    }
    pieces
}
