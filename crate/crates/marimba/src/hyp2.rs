//! Hyperbolic plane kernel in the upper half-plane model.
//!
//! Geodesics are stored by their ordered ideal endpoints with an explicit
//! point-at-infinity tag; a geodesic is either a Euclidean half-circle
//! centered on the real axis or a vertical half-line. Orientation-preserving
//! isometries are 2x2 real matrices acting by Mobius transformations, with
//! the determinant renormalized periodically by the callers that compose
//! long products.

use crate::numeric::{DET_BAND, GEOM_TOL, MATRIX_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum Hyp2Error {
    #[error("degenerate geodesic: ideal endpoints coincide")]
    DegenerateGeodesic,
    #[error("point not in the open upper half-plane")]
    NotInUpperHalfPlane,
    #[error("determinant {0} drifted outside the renormalization band")]
    NonUnitDeterminant(f64),
    #[error("geodesics cross; no common perpendicular")]
    Crossing,
    #[error("geodesics share an ideal endpoint; perpendicular distance is zero at infinity")]
    SharedEndpoint,
}

/// A point x + iy with y > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointH2 {
    pub re: f64,
    pub im: f64,
}

impl PointH2 {
    pub fn new(re: f64, im: f64) -> Result<Self, Hyp2Error> {
        if !(im > 0.0) || !im.is_finite() || !re.is_finite() {
            return Err(Hyp2Error::NotInUpperHalfPlane);
        }
        Ok(Self { re, im })
    }
}

/// An ideal boundary point: a real number or the point at infinity.
/// Infinity is a tag, never a large float stand-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ideal {
    Real(f64),
    Infinity,
}

/// An oriented geodesic, stored by its ordered ideal endpoints (from `a`
/// toward `b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicH2 {
    pub a: Ideal,
    pub b: Ideal,
}

/// Concrete Euclidean shape of a geodesic, cached by hot paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Half-circle centered at `c` with radius `r`; `rightward` is true when
    /// the orientation runs from c - r to c + r.
    Arc { c: f64, r: f64, rightward: bool },
    /// Vertical half-line at abscissa `x`.
    Vertical { x: f64, upward: bool },
}

impl GeodesicH2 {
    pub fn new(a: Ideal, b: Ideal) -> Result<Self, Hyp2Error> {
        match (a, b) {
            (Ideal::Infinity, Ideal::Infinity) => Err(Hyp2Error::DegenerateGeodesic),
            (Ideal::Real(x), Ideal::Real(y)) if (x - y).abs() < f64::EPSILON * x.abs().max(1.0) => {
                Err(Hyp2Error::DegenerateGeodesic)
            }
            _ => Ok(Self { a, b }),
        }
    }

    pub fn shape(&self) -> Shape {
        match (self.a, self.b) {
            (Ideal::Real(p), Ideal::Real(q)) => Shape::Arc {
                c: 0.5 * (p + q),
                r: 0.5 * (q - p).abs(),
                rightward: q > p,
            },
            (Ideal::Real(p), Ideal::Infinity) => Shape::Vertical { x: p, upward: true },
            (Ideal::Infinity, Ideal::Real(q)) => Shape::Vertical { x: q, upward: false },
            (Ideal::Infinity, Ideal::Infinity) => unreachable!("degenerate geodesic"),
        }
    }

    /// Reverse orientation.
    pub fn reversed(&self) -> Self {
        Self { a: self.b, b: self.a }
    }
}

impl Shape {
    /// Point at oriented arclength coordinate `u`. The origin is the apex
    /// (c, r) for arcs and (x, 1) for verticals.
    pub fn point_at(&self, u: f64) -> PointH2 {
        match *self {
            Shape::Arc { c, r, rightward } => {
                let s = if rightward { u } else { -u };
                PointH2 { re: c + r * s.tanh(), im: r / s.cosh() }
            }
            Shape::Vertical { x, upward } => {
                let s = if upward { u } else { -u };
                PointH2 { re: x, im: s.exp() }
            }
        }
    }

    /// Oriented arclength coordinate of a point assumed to lie on the
    /// geodesic.
    pub fn coord_of(&self, p: PointH2) -> f64 {
        match *self {
            Shape::Arc { c, r, rightward } => {
                let t = ((p.re - c) / r).clamp(-1.0, 1.0);
                let s = t.atanh();
                if rightward {
                    s
                } else {
                    -s
                }
            }
            Shape::Vertical { upward, .. } => {
                let s = p.im.ln();
                if upward {
                    s
                } else {
                    -s
                }
            }
        }
    }

    /// Angle of the oriented unit tangent at coordinate `u`.
    pub fn direction_at(&self, u: f64) -> f64 {
        match *self {
            Shape::Arc { rightward, .. } => {
                let s = if rightward { u } else { -u };
                let ang = (-s.tanh()).atan2(1.0 / s.cosh());
                if rightward {
                    ang
                } else {
                    normalize_angle(ang + std::f64::consts::PI)
                }
            }
            Shape::Vertical { upward, .. } => {
                if upward {
                    std::f64::consts::FRAC_PI_2
                } else {
                    -std::f64::consts::FRAC_PI_2
                }
            }
        }
    }
}

/// Reduce an angle to [0, 2 pi).
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// A unit tangent vector: base point plus direction angle in chart
/// coordinates (the model is conformal, so Euclidean angles are hyperbolic
/// angles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangentH2 {
    pub base: PointH2,
    pub dir: f64,
}

impl UnitTangentH2 {
    /// The oriented geodesic this vector rides: backward ideal endpoint
    /// first, forward second.
    pub fn geodesic(&self) -> GeodesicH2 {
        let (x, y) = (self.base.re, self.base.im);
        let (s, c) = self.dir.sin_cos();
        if c.abs() * 1e14 <= s.abs().max(1e-300) {
            // Vertical within representable slope.
            if s > 0.0 {
                GeodesicH2 { a: Ideal::Real(x), b: Ideal::Infinity }
            } else {
                GeodesicH2 { a: Ideal::Infinity, b: Ideal::Real(x) }
            }
        } else {
            let center = x + y * s / c;
            let r = y / c.abs();
            if c > 0.0 {
                GeodesicH2 { a: Ideal::Real(center - r), b: Ideal::Real(center + r) }
            } else {
                GeodesicH2 { a: Ideal::Real(center + r), b: Ideal::Real(center - r) }
            }
        }
    }

    pub fn reversed(&self) -> Self {
        Self { base: self.base, dir: normalize_angle(self.dir + std::f64::consts::PI) }
    }
}

/// Orientation-preserving isometry of the upper half-plane: a real 2x2
/// matrix of positive determinant acting as z -> (az + b)/(cz + d).
/// Also used as a *frame*: the image of the standard frame (base i,
/// direction straight up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isometry2 {
    pub m: [[f64; 2]; 2],
}

impl Isometry2 {
    pub const IDENTITY: Isometry2 = Isometry2 { m: [[1.0, 0.0], [0.0, 1.0]] };

    pub fn new(m: [[f64; 2]; 2]) -> Self {
        Self { m }
    }

    /// Hyperbolic translation by length `l` along the standard frame's
    /// geodesic (the imaginary axis, upward).
    pub fn translation(l: f64) -> Self {
        let e = (0.5 * l).exp();
        Self { m: [[e, 0.0], [0.0, 1.0 / e]] }
    }

    /// Rotation by `phi` (counterclockwise) about the standard base point i.
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = (0.5 * phi).sin_cos();
        Self { m: [[c, s], [-s, c]] }
    }

    /// The frame carrying the standard frame to the given unit tangent.
    pub fn from_tangent(v: &UnitTangentH2) -> Self {
        let sy = v.base.im.sqrt();
        let a = Self { m: [[sy, v.base.re / sy], [0.0, 1.0 / sy]] };
        a.compose(&Self::rotation(v.dir - std::f64::consts::FRAC_PI_2))
    }

    /// The unit tangent this frame represents.
    pub fn tangent(&self) -> UnitTangentH2 {
        let [[a, b], [c, d]] = self.m;
        let den = c * c + d * d;
        let det = a * d - b * c;
        UnitTangentH2 {
            base: PointH2 { re: (a * c + b * d) / den, im: det / den },
            dir: normalize_angle(std::f64::consts::FRAC_PI_2 - 2.0 * c.atan2(d)),
        }
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        a * d - b * c
    }

    /// Rescale so the determinant returns to 1. Fails when drift left the
    /// configured band, which signals an upstream bug rather than rounding.
    pub fn renormalize(&mut self) -> Result<(), Hyp2Error> {
        let det = self.det();
        if !(det > DET_BAND.0 && det < DET_BAND.1) {
            return Err(Hyp2Error::NonUnitDeterminant(det));
        }
        let s = det.sqrt();
        for row in &mut self.m {
            row[0] /= s;
            row[1] /= s;
        }
        Ok(())
    }

    pub fn compose(&self, other: &Isometry2) -> Isometry2 {
        let a = self.m;
        let b = other.m;
        Isometry2 {
            m: [
                [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
                [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
            ],
        }
    }

    pub fn inverse(&self) -> Isometry2 {
        let [[a, b], [c, d]] = self.m;
        let det = a * d - b * c;
        Isometry2 { m: [[d / det, -b / det], [-c / det, a / det]] }
    }

    pub fn apply_point(&self, p: PointH2) -> PointH2 {
        let [[a, b], [c, d]] = self.m;
        // (a z + b) / (c z + d) with z = x + iy.
        let nr = a * p.re + b;
        let ni = a * p.im;
        let dr = c * p.re + d;
        let di = c * p.im;
        let den = dr * dr + di * di;
        let det = a * d - b * c;
        PointH2 { re: (nr * dr + ni * di) / den, im: det * p.im / den }
    }

    pub fn apply_ideal(&self, q: Ideal) -> Ideal {
        let [[a, b], [c, d]] = self.m;
        match q {
            Ideal::Infinity => {
                if c == 0.0 {
                    Ideal::Infinity
                } else {
                    Ideal::Real(a / c)
                }
            }
            Ideal::Real(x) => {
                let den = c * x + d;
                if den == 0.0 {
                    Ideal::Infinity
                } else {
                    Ideal::Real((a * x + b) / den)
                }
            }
        }
    }

    pub fn apply_geodesic(&self, g: &GeodesicH2) -> GeodesicH2 {
        GeodesicH2 { a: self.apply_ideal(g.a), b: self.apply_ideal(g.b) }
    }

    pub fn apply_tangent(&self, v: &UnitTangentH2) -> UnitTangentH2 {
        // Base moves by Mobius; direction rotates by the argument of the
        // derivative 1/(cz+d)^2.
        let [[_, _], [c, d]] = self.m;
        let base = self.apply_point(v.base);
        let wr = c * v.base.re + d;
        let wi = c * v.base.im;
        let dir = normalize_angle(v.dir - 2.0 * wi.atan2(wr));
        UnitTangentH2 { base, dir }
    }

    /// Frobenius distance to another matrix, used by closure checks.
    pub fn max_abs_diff(&self, other: &Isometry2) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        d
    }

    /// Distance to +/- identity (frames are projective).
    pub fn deviation_from_identity(&self) -> f64 {
        let neg = Isometry2 { m: [[-1.0, 0.0], [0.0, -1.0]] };
        self.max_abs_diff(&Isometry2::IDENTITY).min(self.max_abs_diff(&neg))
    }
}

/// Hyperbolic distance. Uses the asinh form, which stays accurate for
/// nearby points where the acosh form loses digits.
pub fn dist(p: PointH2, q: PointH2) -> f64 {
    let dx = p.re - q.re;
    let dy = p.im - q.im;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (p.im * q.im).sqrt())).asinh()
}

/// Signed distance from a point to a geodesic (unsigned value; callers that
/// need the side use `side_of`).
pub fn dist_point_geodesic(p: PointH2, g: &GeodesicH2) -> f64 {
    match g.shape() {
        Shape::Arc { c, r, .. } => {
            let dx = p.re - c;
            let q = (dx * dx + p.im * p.im - r * r) / (2.0 * r * p.im);
            q.abs().asinh()
        }
        Shape::Vertical { x, .. } => ((p.re - x) / p.im).abs().asinh(),
    }
}

/// Inversive product of two geodesics: |I| > 1 disjoint, = 1 tangent or
/// sharing an ideal endpoint, < 1 crossing. Infinite when both are
/// vertical (shared endpoint at infinity).
pub fn inversive_product(g: &GeodesicH2, h: &GeodesicH2) -> f64 {
    inversive_product_shapes(&g.shape(), &h.shape())
}

/// Shape-level form of [`inversive_product`].
pub fn inversive_product_shapes(g: &Shape, h: &Shape) -> f64 {
    match (g, h) {
        (Shape::Arc { c: c1, r: r1, .. }, Shape::Arc { c: c2, r: r2, .. }) => {
            let d = c1 - c2;
            ((d * d - r1 * r1 - r2 * r2) / (2.0 * r1 * r2)).abs()
        }
        (Shape::Arc { c, r, .. }, Shape::Vertical { x, .. })
        | (Shape::Vertical { x, .. }, Shape::Arc { c, r, .. }) => ((c - x) / r).abs(),
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => f64::INFINITY,
    }
}

/// Intersection point of two crossing geodesics, None when disjoint or
/// equal.
pub fn geodesic_intersection(g: &GeodesicH2, h: &GeodesicH2) -> Option<PointH2> {
    let (x, other) = match (g.shape(), h.shape()) {
        (Shape::Arc { c: c1, r: r1, .. }, Shape::Arc { c: c2, r: r2, .. }) => {
            if (c1 - c2).abs() < 1e-300 {
                return None;
            }
            let x = (c2 * c2 - c1 * c1 + r1 * r1 - r2 * r2) / (2.0 * (c2 - c1));
            if (x - c1).abs() >= r1 || (x - c2).abs() >= r2 {
                return None;
            }
            (x, Shape::Arc { c: c1, r: r1, rightward: true })
        }
        (Shape::Arc { c, r, rightward }, Shape::Vertical { x, .. })
        | (Shape::Vertical { x, .. }, Shape::Arc { c, r, rightward }) => {
            if (x - c).abs() >= r {
                return None;
            }
            (x, Shape::Arc { c, r, rightward })
        }
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => return None,
    };
    let Shape::Arc { c, r, .. } = other else { unreachable!() };
    let y = (r * r - (x - c) * (x - c)).max(0.0).sqrt();
    Some(PointH2 { re: x, im: y })
}

/// Result of `common_perpendicular`.
#[derive(Debug, Clone, Copy)]
pub struct Perpendicular {
    pub length: f64,
    pub foot_a: PointH2,
    pub foot_b: PointH2,
    /// Oriented from the foot on the first geodesic to the foot on the
    /// second.
    pub geodesic: GeodesicH2,
}

/// The common perpendicular of two disjoint geodesics.
pub fn common_perpendicular(g: &GeodesicH2, h: &GeodesicH2) -> Result<Perpendicular, Hyp2Error> {
    let inv = inversive_product(g, h);
    if inv < 1.0 - GEOM_TOL {
        return Err(Hyp2Error::Crossing);
    }
    if inv < 1.0 + GEOM_TOL || !inv.is_finite() {
        return Err(Hyp2Error::SharedEndpoint);
    }
    let (foot_a, foot_b, geodesic) = match (g.shape(), h.shape()) {
        (Shape::Arc { c: c1, r: r1, .. }, Shape::Arc { c: c2, r: r2, .. }) => {
            if (c1 - c2).abs() * 1e14 < (r1 + r2) {
                // Concentric arcs: the perpendicular is the vertical line.
                let lo = PointH2 { re: c1, im: r1 };
                let hi = PointH2 { re: c2, im: r2 };
                let geo = if r2 > r1 {
                    GeodesicH2 { a: Ideal::Real(c1), b: Ideal::Infinity }
                } else {
                    GeodesicH2 { a: Ideal::Infinity, b: Ideal::Real(c1) }
                };
                (lo, hi, geo)
            } else {
                let cc = (c2 * c2 - c1 * c1 + r1 * r1 - r2 * r2) / (2.0 * (c2 - c1));
                let rr2 = (cc - c1) * (cc - c1) - r1 * r1;
                if rr2 <= 0.0 {
                    // Barely disjoint arcs can lose the radical circle to
                    // cancellation; indistinguishable from tangency.
                    return Err(Hyp2Error::SharedEndpoint);
                }
                let rr = rr2.sqrt();
                let fa = circle_circle_point(cc, rr, c1, r1);
                let fb = circle_circle_point(cc, rr, c2, r2);
                let geo = if fb.re > fa.re {
                    GeodesicH2 { a: Ideal::Real(cc - rr), b: Ideal::Real(cc + rr) }
                } else {
                    GeodesicH2 { a: Ideal::Real(cc + rr), b: Ideal::Real(cc - rr) }
                };
                (fa, fb, geo)
            }
        }
        (Shape::Arc { c, r, .. }, Shape::Vertical { x, .. }) => {
            let rr = ((x - c) * (x - c) - r * r).sqrt();
            let fa = circle_circle_point(x, rr, c, r);
            let fb = PointH2 { re: x, im: rr };
            let geo = if x > fa.re {
                GeodesicH2 { a: Ideal::Real(x - rr), b: Ideal::Real(x + rr) }
            } else {
                GeodesicH2 { a: Ideal::Real(x + rr), b: Ideal::Real(x - rr) }
            };
            (fa, fb, geo)
        }
        (Shape::Vertical { x, .. }, Shape::Arc { c, r, .. }) => {
            let rr = ((x - c) * (x - c) - r * r).sqrt();
            let fa = PointH2 { re: x, im: rr };
            let fb = circle_circle_point(x, rr, c, r);
            let geo = if fb.re > x {
                GeodesicH2 { a: Ideal::Real(x - rr), b: Ideal::Real(x + rr) }
            } else {
                GeodesicH2 { a: Ideal::Real(x + rr), b: Ideal::Real(x - rr) }
            };
            (fa, fb, geo)
        }
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => unreachable!("caught above"),
    };
    Ok(Perpendicular { length: dist(foot_a, foot_b), foot_a, foot_b, geodesic })
}

/// Upper half-plane intersection of two circles centered on the real axis.
fn circle_circle_point(c1: f64, r1: f64, c2: f64, r2: f64) -> PointH2 {
    let x = (c1 * c1 - c2 * c2 - r1 * r1 + r2 * r2) / (2.0 * (c1 - c2));
    let y2 = r1 * r1 - (x - c1) * (x - c1);
    PointH2 { re: x, im: y2.max(0.0).sqrt() }
}

/// A transversal intersection of a ray with a geodesic.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Signed arclength along the ray from its base (positive = forward).
    pub time: f64,
    pub point: PointH2,
    /// Oriented arclength coordinate of the hit on the target geodesic
    /// (origin at the apex).
    pub coord: f64,
    /// Angle in [0, 2 pi) of the ray direction measured against the
    /// target's oriented tangent at the hit point; 0 and pi are tangencies.
    pub theta: f64,
}

/// Intersection of the full geodesic carrying `v` with `g`, any sign of
/// time. Returns `None` for disjoint or asymptotic geodesics.
pub fn hit_geodesic_any(v: &UnitTangentH2, g: &GeodesicH2) -> Option<Hit> {
    let ray = v.geodesic();
    let rs = ray.shape();
    let gs = g.shape();
    let point = match (rs, gs) {
        (Shape::Arc { c: c1, r: r1, .. }, Shape::Arc { c: c2, r: r2, .. }) => {
            if c1 == c2 {
                return None;
            }
            let x = (c1 * c1 - c2 * c2 - r1 * r1 + r2 * r2) / (2.0 * (c1 - c2));
            let y2 = r1 * r1 - (x - c1) * (x - c1);
            if y2 <= 0.0 {
                return None;
            }
            PointH2 { re: x, im: y2.sqrt() }
        }
        (Shape::Arc { c, r, .. }, Shape::Vertical { x, .. })
        | (Shape::Vertical { x, .. }, Shape::Arc { c, r, .. }) => {
            let y2 = r * r - (x - c) * (x - c);
            if y2 <= 0.0 {
                return None;
            }
            PointH2 { re: x, im: y2.sqrt() }
        }
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => return None,
    };
    let time = rs.coord_of(point) - rs.coord_of(v.base);
    let coord = gs.coord_of(point);
    let theta = normalize_angle(rs.direction_at(rs.coord_of(point)) - gs.direction_at(coord));
    Some(Hit { time, point, coord, theta })
}

/// First forward crossing of the ray `v` with `g` (strictly positive time).
pub fn hit_geodesic(v: &UnitTangentH2, g: &GeodesicH2) -> Option<Hit> {
    hit_geodesic_any(v, g).filter(|h| h.time > 0.0)
}

/// Geodesic flow for time `t`.
pub fn flow(v: &UnitTangentH2, t: f64) -> UnitTangentH2 {
    let g = v.geodesic();
    let s = g.shape();
    let u = s.coord_of(v.base) + t;
    UnitTangentH2 { base: s.point_at(u), dir: s.direction_at(u) }
}

/// Which side of `g` the point lies on: positive on the left of the
/// orientation, negative on the right, ~0 on the geodesic.
pub fn side_of(g: &GeodesicH2, p: PointH2) -> f64 {
    match g.shape() {
        Shape::Arc { c, r, rightward } => {
            let f = (p.re - c) * (p.re - c) + p.im * p.im - r * r;
            // Traveling rightward over the top of the arc, the region above
            // the circle (f > 0) is on the left.
            if rightward {
                f
            } else {
                -f
            }
        }
        Shape::Vertical { x, upward } => {
            let f = x - p.re;
            if upward {
                f
            } else {
                -f
            }
        }
    }
}

/// Debug check that a frame is still close to SL(2, R).
pub fn assert_unit_det(g: &Isometry2) {
    debug_assert!((g.det() - 1.0).abs() < 1e-6, "determinant drifted: {}", g.det());
    let _ = MATRIX_TOL;
}
