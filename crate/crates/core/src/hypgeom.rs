//! Upper half-plane hyperbolic geometry.
//!
//! Points live in the upper half-plane, boundary points are projective pairs
//! on RP^1, and crossing computations are carried out in the Minkowski
//! hyperboloid model where side functions are linear and the crossing
//! parameter of a geodesic segment with a complete geodesic has a closed
//! form.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Mat2 = Matrix2<f64>;

/// Tangency tolerance on the crossing discriminant.
pub const TANGENCY_TOL: f64 = 1e-10;

/// A point of the boundary circle RP^1, stored as a normalized projective
/// representative: unit vector with the first nonzero coordinate positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub a: f64,
    pub b: f64,
}

impl BoundaryPoint {
    pub fn from_projective(a: f64, b: f64) -> Self {
        let norm = a.hypot(b);
        assert!(norm > 0.0, "zero projective vector");
        let (mut a, mut b) = (a / norm, b / norm);
        let lead = if a.abs() > 1e-14 { a } else { b };
        if lead < 0.0 {
            a = -a;
            b = -b;
        }
        Self { a, b }
    }

    pub fn from_real(x: f64) -> Self {
        Self::from_projective(x, 1.0)
    }

    pub fn infinity() -> Self {
        Self::from_projective(1.0, 0.0)
    }

    /// Real coordinate, or None for the point at infinity.
    pub fn real(&self) -> Option<f64> {
        if self.b.abs() < 1e-300 {
            None
        } else {
            Some(self.a / self.b)
        }
    }

    /// Null vector in the Minkowski model, quadratic in the projective pair.
    pub fn null_vector(&self) -> [f64; 3] {
        let (a, b) = (self.a, self.b);
        [(a * a + b * b) / 2.0, (a * a - b * b) / 2.0, a * b]
    }

    /// Angle of the double cover map RP^1 -> S^1; equal representatives get
    /// equal angles.
    pub fn circle_angle(&self) -> f64 {
        (2.0 * self.a * self.b).atan2(self.a * self.a - self.b * self.b)
    }

    /// Projective distance |a1 b2 - a2 b1| between normalized representatives.
    pub fn dist(&self, other: &Self) -> f64 {
        (self.a * other.b - other.a * self.b).abs()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dist(other) <= tol
    }
}

/// An oriented complete geodesic, stored by its ordered endpoint pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicLine {
    pub neg: BoundaryPoint,
    pub pos: BoundaryPoint,
}

impl GeodesicLine {
    pub fn new(neg: BoundaryPoint, pos: BoundaryPoint) -> Result<Self> {
        if neg.approx_eq(&pos, 1e-12) {
            return Err(Error::Invalid("geodesic endpoints coincide".into()));
        }
        Ok(Self { neg, pos })
    }

    pub fn reversed(&self) -> Self {
        Self {
            neg: self.pos,
            pos: self.neg,
        }
    }

    /// Spacelike polar vector of the geodesic plane: Minkowski-orthogonal to
    /// both endpoint null vectors.
    pub fn polar(&self) -> [f64; 3] {
        let n1 = self.neg.null_vector();
        let n2 = self.pos.null_vector();
        // Euclidean cross product, then flip the timelike coordinate.
        let w = [
            n1[1] * n2[2] - n1[2] * n2[1],
            n1[2] * n2[0] - n1[0] * n2[2],
            n1[0] * n2[1] - n1[1] * n2[0],
        ];
        [-w[0], w[1], w[2]]
    }

    /// True when both endpoint pairs agree as unoriented geodesics.
    pub fn same_unoriented(&self, other: &Self, tol: f64) -> bool {
        (self.neg.approx_eq(&other.neg, tol) && self.pos.approx_eq(&other.pos, tol))
            || (self.neg.approx_eq(&other.pos, tol) && self.pos.approx_eq(&other.neg, tol))
    }
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::Invalid(format!("plane point needs y > 0, got {y}")));
        }
        Ok(Self { x, y })
    }

    /// Timelike unit vector in the Minkowski model.
    pub fn minkowski(&self) -> [f64; 3] {
        let (x, y) = (self.x, self.y);
        let s = x * x + y * y;
        [(s + 1.0) / (2.0 * y), (s - 1.0) / (2.0 * y), x / y]
    }

    fn from_minkowski(z: [f64; 3]) -> Self {
        let inv_y = z[0] - z[1];
        Self {
            x: z[2] / inv_y,
            y: 1.0 / inv_y,
        }
    }
}

fn mink(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Hyperbolic distance between two points.
pub fn distance(p: &PlanePoint, q: &PlanePoint) -> f64 {
    let c = -mink(&p.minkowski(), &q.minkowski());
    c.max(1.0).acosh()
}

/// Distance from a point to a complete geodesic.
pub fn distance_to_line(p: &PlanePoint, line: &GeodesicLine) -> f64 {
    let e = line.polar();
    let s = mink(&p.minkowski(), &e) / mink(&e, &e).sqrt();
    s.abs().asinh()
}

/// Möbius action of an SL(2,R) matrix on a plane point.
pub fn moebius_point(g: &Mat2, p: &PlanePoint) -> PlanePoint {
    let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    // (a z + b) / (c z + d) on z = x + i y
    let (x, y) = (p.x, p.y);
    let re_num = a * x + b;
    let im_num = a * y;
    let re_den = c * x + d;
    let im_den = c * y;
    let den = re_den * re_den + im_den * im_den;
    PlanePoint {
        x: (re_num * re_den + im_num * im_den) / den,
        y: (im_num * re_den - re_num * im_den) / den,
    }
}

/// Möbius action on a boundary point: matrix times projective vector.
pub fn moebius_boundary(g: &Mat2, p: &BoundaryPoint) -> BoundaryPoint {
    BoundaryPoint::from_projective(
        g[(0, 0)] * p.a + g[(0, 1)] * p.b,
        g[(1, 0)] * p.a + g[(1, 1)] * p.b,
    )
}

pub fn moebius_line(g: &Mat2, line: &GeodesicLine) -> GeodesicLine {
    GeodesicLine {
        neg: moebius_boundary(g, &line.neg),
        pos: moebius_boundary(g, &line.pos),
    }
}

/// Axis of a hyperbolic element, oriented from the repelling to the
/// attracting fixed point.
pub fn axis(g: &Mat2) -> Result<GeodesicLine> {
    let t = g.trace();
    if t.abs() <= 2.0 {
        return Err(Error::NotHyperbolic { trace: t });
    }
    let disc = (t * t - 4.0).sqrt();
    let lambda_att = if t > 0.0 {
        (t + disc) / 2.0
    } else {
        (t - disc) / 2.0
    };
    let lambda_rep = if t > 0.0 {
        (t - disc) / 2.0
    } else {
        (t + disc) / 2.0
    };
    Ok(GeodesicLine {
        neg: eigen_boundary(g, lambda_rep),
        pos: eigen_boundary(g, lambda_att),
    })
}

fn eigen_boundary(g: &Mat2, lambda: f64) -> BoundaryPoint {
    let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    // (g - lambda) v = 0; pick the better conditioned row.
    let v1 = (b, lambda - a);
    let v2 = (lambda - d, c);
    let n1 = v1.0.hypot(v1.1);
    let n2 = v2.0.hypot(v2.1);
    if n1 >= n2 && n1 > 1e-14 {
        BoundaryPoint::from_projective(v1.0, v1.1)
    } else if n2 > 1e-14 {
        BoundaryPoint::from_projective(v2.0, v2.1)
    } else {
        // diagonal matrix
        if a.abs() > d.abs() {
            BoundaryPoint::from_projective(1.0, 0.0)
        } else {
            BoundaryPoint::from_projective(0.0, 1.0)
        }
    }
}

/// Translation length of a hyperbolic element.
pub fn translation_length(g: &Mat2) -> Result<f64> {
    let t = g.trace().abs();
    if t <= 2.0 {
        return Err(Error::NotHyperbolic { trace: g.trace() });
    }
    Ok(2.0 * (t / 2.0).acosh())
}

/// A transverse crossing of an arc with a complete geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcCrossing {
    /// Arclength fraction of the crossing along the segment, in (0,1).
    pub t: f64,
    /// +1 when the arc orientation induces the stored orientation of the
    /// geodesic, -1 otherwise.
    pub sign: i8,
}

/// An oriented geodesic segment between two plane points.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: PlanePoint,
    pub end: PlanePoint,
    z0: [f64; 3],
    z1: [f64; 3],
    len: f64,
}

impl Segment {
    pub fn new(start: PlanePoint, end: PlanePoint) -> Result<Self> {
        let z0 = start.minkowski();
        let z1 = end.minkowski();
        let len = distance(&start, &end);
        if len < 1e-13 {
            return Err(Error::Invalid("segment endpoints coincide".into()));
        }
        Ok(Self {
            start,
            end,
            z0,
            z1,
            len,
        })
    }

    pub fn length(&self) -> f64 {
        self.len
    }

    fn minkowski_at(&self, t: f64) -> [f64; 3] {
        let d = self.len;
        let (c0, c1) = (((1.0 - t) * d).sinh() / d.sinh(), (t * d).sinh() / d.sinh());
        [
            c0 * self.z0[0] + c1 * self.z1[0],
            c0 * self.z0[1] + c1 * self.z1[1],
            c0 * self.z0[2] + c1 * self.z1[2],
        ]
    }

    /// Point at arclength fraction `t` in [0,1].
    pub fn point_at(&self, t: f64) -> PlanePoint {
        PlanePoint::from_minkowski(self.minkowski_at(t))
    }

    /// Hyperbolic distance between the points at two parameters.
    pub fn arc_distance(&self, t0: f64, t1: f64) -> f64 {
        (t1 - t0).abs() * self.len
    }

    /// Transverse crossing with a complete geodesic, if any.
    ///
    /// Errors with [`Error::Tangent`] when an endpoint sits on the geodesic
    /// within the tangency tolerance; callers regenerate the arc in that
    /// case.
    pub fn crossing(&self, line: &GeodesicLine) -> Result<Option<ArcCrossing>> {
        let e = line.polar();
        let e_norm = mink(&e, &e).sqrt();
        // sinh of the signed distances of the endpoints to the line
        let s0 = mink(&self.z0, &e) / e_norm;
        let s1 = mink(&self.z1, &e) / e_norm;
        if s0.abs() <= TANGENCY_TOL || s1.abs() <= TANGENCY_TOL {
            return Err(Error::Tangent {
                margin: s0.abs().min(s1.abs()),
            });
        }
        if s0.signum() == s1.signum() {
            return Ok(None);
        }
        let d = self.len;
        // solve s0 sinh((1-t) d) + s1 sinh(t d) = 0
        let tau = (s0 * d.sinh() / (s0 * d.cosh() - s1)).atanh();
        let t = (tau / d).clamp(1e-12, 1.0 - 1e-12);

        // orientation: compare the arc tangent with the leaf tangent toward
        // its positive endpoint
        let z = self.minkowski_at(t);
        let u = [
            (-((1.0 - t) * d).cosh() * self.z0[0] + (t * d).cosh() * self.z1[0]),
            (-((1.0 - t) * d).cosh() * self.z0[1] + (t * d).cosh() * self.z1[1]),
            (-((1.0 - t) * d).cosh() * self.z0[2] + (t * d).cosh() * self.z1[2]),
        ];
        let np = line.pos.null_vector();
        let c = mink(&np, &z);
        let v = [
            -np[0] / c - z[0],
            -np[1] / c - z[1],
            -np[2] / c - z[2],
        ];
        let det = det3(&z, &u, &v);
        let sign = if det < 0.0 { 1 } else { -1 };
        Ok(Some(ArcCrossing { t, sign }))
    }

    /// Coarse distance from a point to the segment, for enumeration pruning.
    pub fn coarse_distance(&self, p: &PlanePoint, samples: usize) -> f64 {
        let zp = p.minkowski();
        let mut best = f64::INFINITY;
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            let z = self.minkowski_at(t);
            let c = -mink(&zp, &z);
            best = best.min(c.max(1.0).acosh());
        }
        best
    }
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// The isometry sending `p` to `i` and the direction of `q` to the upward
/// vertical, so that `q` lands at `exp(d) i`.
pub fn to_normal_position(p: &PlanePoint, q: &PlanePoint) -> Mat2 {
    let sqrt_y = p.y.sqrt();
    // z -> (z - x)/y
    let n = Mat2::new(1.0 / sqrt_y, -p.x / sqrt_y, 0.0, sqrt_y);
    let w = moebius_point(&n, q);
    // disk angle of w relative to i
    let (re, im) = (w.x, w.y);
    // (w - i)/(w + i)
    let den = re * re + (im + 1.0) * (im + 1.0);
    let cr = (re * re + im * im - 1.0) / den;
    let ci = -2.0 * re / den;
    let chi = ci.atan2(cr);
    rotation_about_i(-chi) * n
}

/// Elliptic rotation about `i` by angle `phi` (counterclockwise on tangent
/// vectors).
pub fn rotation_about_i(phi: f64) -> Mat2 {
    let (s, c) = (phi / 2.0).sin_cos();
    Mat2::new(c, s, -s, c)
}

/// The unique orientation-preserving isometry carrying the directed segment
/// `(p, q)` onto `(p2, q2)`; the segments must have equal length.
pub fn segment_mapper(
    p: &PlanePoint,
    q: &PlanePoint,
    p2: &PlanePoint,
    q2: &PlanePoint,
) -> Result<Mat2> {
    let d1 = distance(p, q);
    let d2 = distance(p2, q2);
    if (d1 - d2).abs() > 1e-9 * (1.0 + d1.abs()) {
        return Err(Error::Invalid(format!(
            "segment lengths differ: {d1} vs {d2}"
        )));
    }
    let t1 = to_normal_position(p, q);
    let t2 = to_normal_position(p2, q2);
    let inv = t2
        .try_inverse()
        .ok_or(Error::Singular { pivot: 0.0 })?;
    Ok(inv * t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pp(x: f64, y: f64) -> PlanePoint {
        PlanePoint::new(x, y).unwrap()
    }

    fn random_sl2(rng: &mut ChaCha8Rng) -> Mat2 {
        loop {
            let m = Mat2::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let det = m.determinant();
            if det > 0.05 {
                return m / det.sqrt();
            }
        }
    }

    #[test]
    fn moebius_identity_and_fixed_points() {
        let id = Mat2::identity();
        let p = pp(0.3, 1.7);
        assert_eq!(moebius_point(&id, &p), p);

        let e = 1.0f64.exp();
        let g = Mat2::new(e.sqrt(), 0.0, 0.0, 1.0 / e.sqrt());
        let zero = BoundaryPoint::from_real(0.0);
        let inf = BoundaryPoint::infinity();
        assert!(moebius_boundary(&g, &zero).approx_eq(&zero, 1e-12));
        assert!(moebius_boundary(&g, &inf).approx_eq(&inf, 1e-12));
    }

    #[test]
    fn moebius_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let g = random_sl2(&mut rng);
            let h = random_sl2(&mut rng);
            let p = pp(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let lhs = moebius_point(&(g * h), &p);
            let rhs = moebius_point(&g, &moebius_point(&h, &p));
            assert_relative_eq!(lhs.x, rhs.x, epsilon = 1e-10);
            assert_relative_eq!(lhs.y, rhs.y, epsilon = 1e-10);
        }
    }

    #[test]
    fn moebius_preserves_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let g = random_sl2(&mut rng);
            let p = pp(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let q = pp(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let d0 = distance(&p, &q);
            let d1 = distance(&moebius_point(&g, &p), &moebius_point(&g, &q));
            assert_relative_eq!(d0, d1, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn axis_of_diagonal() {
        let e = 1.0f64.exp();
        let g = Mat2::new(e, 0.0, 0.0, 1.0 / e);
        let ax = axis(&g).unwrap();
        assert!(ax.neg.approx_eq(&BoundaryPoint::from_real(0.0), 1e-12));
        assert!(ax.pos.approx_eq(&BoundaryPoint::infinity(), 1e-12));

        let rev = axis(&g.try_inverse().unwrap()).unwrap();
        assert!(rev.neg.approx_eq(&ax.pos, 1e-12));
        assert!(rev.pos.approx_eq(&ax.neg, 1e-12));
    }

    #[test]
    fn axis_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = 1.3f64.exp();
        let g = Mat2::new(e, 0.0, 0.0, 1.0 / e);
        for _ in 0..20 {
            let h = random_sl2(&mut rng);
            let conj = h * g * h.try_inverse().unwrap();
            let ax = axis(&conj).unwrap();
            let expected = moebius_line(&h, &axis(&g).unwrap());
            assert!(ax.neg.approx_eq(&expected.neg, 1e-9));
            assert!(ax.pos.approx_eq(&expected.pos, 1e-9));
        }
    }

    #[test]
    fn axis_endpoints_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let g = loop {
                let cand = random_sl2(&mut rng);
                if cand.trace().abs() > 2.1 {
                    break cand;
                }
            };
            let ax = axis(&g).unwrap();
            assert!(moebius_boundary(&g, &ax.pos).approx_eq(&ax.pos, 1e-10));
            assert!(moebius_boundary(&g, &ax.neg).approx_eq(&ax.neg, 1e-10));
        }
    }

    #[test]
    fn crossing_symmetric_configuration() {
        let seg = Segment::new(pp(-1.0, 1.0), pp(1.0, 1.0)).unwrap();
        let leaf = GeodesicLine::new(BoundaryPoint::from_real(0.0), BoundaryPoint::infinity())
            .unwrap();
        let c = seg.crossing(&leaf).unwrap().unwrap();
        assert_relative_eq!(c.t, 0.5, epsilon = 1e-12);
        assert_eq!(c.sign, 1);

        // reversed arc: mirrored parameter, flipped sign
        let rev = Segment::new(pp(1.0, 1.0), pp(-1.0, 1.0)).unwrap();
        let cr = rev.crossing(&leaf).unwrap().unwrap();
        assert_relative_eq!(cr.t, 0.5, epsilon = 1e-12);
        assert_eq!(cr.sign, -1);

        // reversed leaf: flipped sign
        let cl = seg.crossing(&leaf.reversed()).unwrap().unwrap();
        assert_eq!(cl.sign, -1);
    }

    #[test]
    fn crossing_disjoint() {
        let seg = Segment::new(pp(1.0, 0.5), pp(1.0, 2.0)).unwrap();
        let leaf = GeodesicLine::new(BoundaryPoint::from_real(0.0), BoundaryPoint::infinity())
            .unwrap();
        assert!(seg.crossing(&leaf).unwrap().is_none());
    }

    #[test]
    fn crossing_point_lies_on_leaf() {
        let seg = Segment::new(pp(0.2, 0.3), pp(2.0, 1.4)).unwrap();
        let leaf = GeodesicLine::new(
            BoundaryPoint::from_real(-0.5),
            BoundaryPoint::from_real(0.9),
        )
        .unwrap();
        if let Some(c) = seg.crossing(&leaf).unwrap() {
            let z = seg.point_at(c.t);
            assert!(distance_to_line(&z, &leaf) < 1e-10);
        } else {
            panic!("expected a crossing");
        }
    }

    #[test]
    fn segment_mapper_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let p = pp(rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
            let q = pp(rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
            if distance(&p, &q) < 0.1 {
                continue;
            }
            let g = random_sl2(&mut rng);
            let p2 = moebius_point(&g, &p);
            let q2 = moebius_point(&g, &q);
            let m = segment_mapper(&p, &q, &p2, &q2).unwrap();
            // m agrees with g up to the PSL sign
            assert!((m - g).amax().min((m + g).amax()) < 1e-12);
            let mp = moebius_point(&m, &p);
            let mq = moebius_point(&m, &q);
            assert!(distance(&mp, &p2) < 1e-6);
            assert!(distance(&mq, &q2) < 1e-6);
        }
    }

    #[test]
    fn point_at_endpoints() {
        let seg = Segment::new(pp(-0.4, 0.7), pp(1.1, 1.9)).unwrap();
        let s = seg.point_at(0.0);
        let e = seg.point_at(1.0);
        assert!(distance(&s, &seg.start) < 1e-10);
        assert!(distance(&e, &seg.end) < 1e-10);
        // midpoint is equidistant
        let m = seg.point_at(0.5);
        assert_relative_eq!(
            distance(&m, &seg.start),
            distance(&m, &seg.end),
            epsilon = 1e-10
        );
    }

    proptest! {
        #[test]
        fn boundary_normalization_is_projective(a in -5.0f64..5.0, b in -5.0f64..5.0, s in 0.1f64..4.0) {
            prop_assume!(a.abs() + b.abs() > 0.1);
            let p = BoundaryPoint::from_projective(a, b);
            let q = BoundaryPoint::from_projective(-s * a, -s * b);
            prop_assert!(p.approx_eq(&q, 1e-12));
        }
    }
}
