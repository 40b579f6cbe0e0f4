use crate::math::Vec3;

/// Cubic Bezier segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub p: [Vec3; 4],
}

impl CubicBezier {
    /// Span between `p1` and `p2` of a uniform Catmull-Rom spline through
    /// `p0..p3`, converted to Bezier form.
    pub fn catmull_rom(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> Self {
        CubicBezier {
            p: [p1, p1 + (p2 - p0) / 6.0, p2 - (p3 - p1) / 6.0, p2],
        }
    }

    pub fn eval(&self, u: f64) -> Vec3 {
        let [a, b, c, d] = self.p;
        let s = 1.0 - u;
        a * (s * s * s) + b * (3.0 * s * s * u) + c * (3.0 * s * u * u) + d * (u * u * u)
    }

    pub fn split(&self) -> (CubicBezier, CubicBezier) {
        let [a, b, c, d] = self.p;
        let ab = a.lerp(b, 0.5);
        let bc = b.lerp(c, 0.5);
        let cd = c.lerp(d, 0.5);
        let abc = ab.lerp(bc, 0.5);
        let bcd = bc.lerp(cd, 0.5);
        let mid = abc.lerp(bcd, 0.5);
        (
            CubicBezier { p: [a, ab, abc, mid] },
            CubicBezier { p: [mid, bcd, cd, d] },
        )
    }

    /// Largest distance of the inner control points from the chord. The
    /// curve lies within this distance of its chord.
    pub fn flatness(&self) -> f64 {
        let [a, b, c, d] = self.p;
        let chord = d - a;
        let len2 = chord.length_squared();
        let dist = |q: Vec3| {
            if len2 <= 0.0 {
                (q - a).length()
            } else {
                let t = ((q - a).dot(chord) / len2).clamp(0.0, 1.0);
                (q - (a + chord * t)).length()
            }
        };
        dist(b).max(dist(c))
    }
}

/// Recursively halves `curve` until every piece is flatter than
/// `flatness`. Emits `(start, end, u0, u1)` chords in curve order.
pub fn subdivide(
    curve: &CubicBezier,
    flatness: f64,
    max_depth: u32,
    out: &mut Vec<(Vec3, Vec3, f64, f64)>,
) {
    fn rec(
        c: &CubicBezier,
        u0: f64,
        u1: f64,
        flatness: f64,
        depth: u32,
        out: &mut Vec<(Vec3, Vec3, f64, f64)>,
    ) {
        if depth == 0 || c.flatness() < flatness {
            out.push((c.p[0], c.p[3], u0, u1));
            return;
        }
        let (l, r) = c.split();
        let um = 0.5 * (u0 + u1);
        rec(&l, u0, um, flatness, depth - 1, out);
        rec(&r, um, u1, flatness, depth - 1, out);
    }
    rec(curve, 0.0, 1.0, flatness, max_depth, out);
}
