//! Geodesic flow on a surface, recording crossings of the labeled
//! multicurve.
//!
//! A flow state is a cell index plus a frame in that cell's chart; the
//! trajectory runs along the frame direction. Each step intersects the
//! ray with the six full side geodesics of the current cell, exits through
//! the nearest one ahead, and applies the matching branch isometry. All
//! candidate comparisons use only the real coordinate of the candidate
//! intersection point, which is monotone along the ray; the only
//! per-step transcendentals are for the step length, the branch lookup,
//! and the matrix update.

use crate::hyp2::{normalize_angle, Hyp2Error, Isometry2, Shape};
use crate::numeric::{Kahan, TANGENCY_TOL};
use crate::surface::{SideKind, Surface};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trajectory tangent to a wall at time {t:.6} (|sin theta| = {sin_theta:.3e})")]
    TangencyStall { t: f64, sin_theta: f64 },
    #[error("no exit side found at time {0:.6}")]
    NoExit(f64),
    #[error(transparent)]
    Numerical(#[from] Hyp2Error),
}

/// A point of the unit tangent bundle in chart coordinates.
#[derive(Debug, Clone, Copy)]
pub struct InteriorState {
    pub cell: usize,
    pub frame: Isometry2,
}

impl InteriorState {
    /// Same point, opposite direction.
    pub fn reversed(&self) -> InteriorState {
        InteriorState {
            cell: self.cell,
            frame: self.frame.compose(&Isometry2::rotation(std::f64::consts::PI)),
        }
    }
}

/// A point of the cross section over the labeled multicurve: curve index,
/// canonical arclength coordinate, and angle against the canonical curve
/// direction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossSectionState {
    pub gluing: usize,
    pub x: f64,
    pub theta: f64,
}

/// One crossing of a labeled curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Crossing {
    pub label: String,
    pub gluing: usize,
    /// Time (arclength) along the trajectory.
    pub t: f64,
    /// Canonical coordinate on the curve.
    pub x: f64,
    /// Angle against the canonical curve direction, in (0, 2 pi).
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceConfig {
    pub max_time: f64,
    pub max_crossings: Option<usize>,
}

impl TraceConfig {
    pub fn for_time(max_time: f64) -> Self {
        TraceConfig { max_time, max_crossings: None }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub crossings: Vec<Crossing>,
    pub end: InteriorState,
    pub elapsed: f64,
}

/// Real coordinate of the intersection of two geodesics given as circles
/// or lines orthogonal to the boundary. Returns None when they do not
/// cross.
#[inline]
fn crossing_x(ray: &Shape, side: &Shape) -> Option<f64> {
    match (ray, side) {
        (Shape::Arc { c: c1, r: r1, .. }, Shape::Arc { c: c2, r: r2, .. }) => {
            if (c1 - c2).abs() < 1e-300 {
                return None;
            }
            let x = (c2 * c2 - c1 * c1 + r1 * r1 - r2 * r2) / (2.0 * (c2 - c1));
            let d1 = x - c1;
            let d2 = x - c2;
            if d1.abs() < *r1 && d2.abs() < *r2 {
                Some(x)
            } else {
                None
            }
        }
        (Shape::Arc { c, r, .. }, Shape::Vertical { x, .. })
        | (Shape::Vertical { x, .. }, Shape::Arc { c, r, .. }) => {
            if (x - c).abs() < *r {
                Some(*x)
            } else {
                None
            }
        }
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => None,
    }
}

/// Height of the intersection point at real coordinate x on an arc or
/// vertical ray; used for ordering along vertical rays.
#[inline]
fn crossing_y(side: &Shape, x: f64, ray: &Shape) -> f64 {
    match side {
        Shape::Arc { c, r, .. } => (r * r - (x - c) * (x - c)).max(0.0).sqrt(),
        Shape::Vertical { .. } => match ray {
            // vertical side hit by an arc ray
            Shape::Arc { c, r, .. } => (r * r - (x - c) * (x - c)).max(0.0).sqrt(),
            Shape::Vertical { .. } => unreachable!(),
        },
    }
}

/// The wall a ray exits through, with step data.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Exit {
    pub side: usize,
    pub dt: f64,
    pub hit_point: crate::hyp2::PointH2,
    /// Unoriented ray coordinate of the hit (for the crossing angle).
    pub u_hit: f64,
    pub ray: Shape,
}

/// Find the nearest wall strictly ahead of the frame, skipping the entry
/// side. Candidates are ordered by the real (or height) coordinate of the
/// intersection point, which is monotone along the ray.
pub(crate) fn next_exit(
    surface: &Surface,
    cell: usize,
    frame: &Isometry2,
    entry_side: Option<usize>,
    t_now: f64,
) -> Result<Exit, TraceError> {
    let tang = frame.tangent();
    let ray = frame
        .apply_geodesic(&crate::hyp2::GeodesicH2 {
            a: crate::hyp2::Ideal::Real(0.0),
            b: crate::hyp2::Ideal::Infinity,
        })
        .shape();
    let u_cur = ray.coord_of(tang.base);
    let (forward_x, base_x, base_y) = match ray {
        Shape::Arc { rightward, .. } => (rightward, tang.base.re, tang.base.im),
        Shape::Vertical { x, upward } => (upward, x, tang.base.im),
    };

    let mut best: Option<(usize, f64, f64)> = None; // (side, metric, x*)
    let sides = &surface.cells[cell].sides;
    for (si, side) in sides.iter().enumerate() {
        if Some(si) == entry_side {
            continue;
        }
        let Some(xstar) = crossing_x(&ray, &side.shape) else { continue };
        let ahead_metric = match ray {
            Shape::Vertical { upward, .. } => {
                let y = crossing_y(&side.shape, xstar, &ray);
                let ahead = if upward { y > base_y } else { y < base_y };
                if !ahead {
                    continue;
                }
                if upward {
                    y
                } else {
                    -y
                }
            }
            Shape::Arc { .. } => {
                let ahead = if forward_x { xstar > base_x } else { xstar < base_x };
                if !ahead {
                    continue;
                }
                if forward_x {
                    xstar
                } else {
                    -xstar
                }
            }
        };
        let better = match best {
            None => true,
            Some((_, bm, _)) => ahead_metric < bm,
        };
        if better {
            best = Some((si, ahead_metric, xstar));
        }
    }
    let Some((si, _, xstar)) = best else {
        return Err(TraceError::NoExit(t_now));
    };
    let side = &sides[si];

    // Tangency guard: the inversive product of the ray and the wall is the
    // cosine of the crossing angle.
    let ip = crate::hyp2::inversive_product_shapes(&ray, &side.shape);
    let sin2 = 1.0 - ip * ip;
    if sin2 < TANGENCY_TOL * TANGENCY_TOL {
        return Err(TraceError::TangencyStall { t: t_now, sin_theta: sin2.max(0.0).sqrt() });
    }

    let hit_point = crate::hyp2::PointH2 { re: xstar, im: crossing_y(&side.shape, xstar, &ray) };
    let u_hit = ray.coord_of(hit_point);
    Ok(Exit { side: si, dt: u_hit - u_cur, hit_point, u_hit, ray })
}

/// Trace a trajectory, logging one crossing per labeled-curve transit.
pub fn trace(surface: &Surface, start: InteriorState, config: &TraceConfig) -> Result<Trace, TraceError> {
    trace_from(surface, start, None, config)
}

/// Like [`trace`], for a start point sitting on a wall: `entry_side` is
/// skipped on the first step.
pub fn trace_from(
    surface: &Surface,
    start: InteriorState,
    mut entry_side: Option<usize>,
    config: &TraceConfig,
) -> Result<Trace, TraceError> {
    let mut cell = start.cell;
    let mut frame = start.frame;
    let mut clock = Kahan::new();
    let mut crossings = Vec::new();

    loop {
        let Exit { side: si, dt, hit_point, u_hit, ray } =
            next_exit(surface, cell, &frame, entry_side, clock.value())?;
        let side = &surface.cells[cell].sides[si];
        debug_assert!(dt > -1e-9, "negative step {dt}");
        let t_here = clock.value() + dt;
        if t_here > config.max_time {
            let rest = config.max_time - clock.value();
            let end = InteriorState {
                cell,
                frame: frame.compose(&Isometry2::translation(rest.max(0.0))),
            };
            return Ok(Trace { crossings, end, elapsed: config.max_time });
        }
        clock.add(dt);

        // Locate the hit on the side and pick the branch.
        let s = side.shape.coord_of(hit_point) - side.start_coord;
        let branch = side
            .branches
            .iter()
            .find(|b| b.s_lo - 1e-9 <= s && s <= b.s_hi + 1e-9)
            .ok_or(TraceError::NoExit(clock.value()))?;

        // Log labeled-curve transits.
        if let SideKind::Cuff { gluing, .. } = side.kind {
            if let Some(label) = surface.gluings[gluing].label.as_deref() {
                let ray_dir = ray.direction_at(u_hit);
                let side_dir = side.shape.direction_at(s + side.start_coord);
                let theta_side = normalize_angle(ray_dir - side_dir);
                let (x, theta) = surface.crossing_coords(cell, si, s, theta_side);
                crossings.push(Crossing {
                    label: label.to_string(),
                    gluing,
                    t: clock.value(),
                    x,
                    theta,
                });
                if let Some(maxc) = config.max_crossings {
                    if crossings.len() >= maxc {
                        let end_frame = branch
                            .iso
                            .compose(&frame)
                            .compose(&Isometry2::translation(dt));
                        let end = InteriorState { cell: branch.target_cell, frame: end_frame };
                        return Ok(Trace { crossings, end, elapsed: clock.value() });
                    }
                }
            }
        }

        // Advance into the next cell.
        frame = branch
            .iso
            .compose(&frame)
            .compose(&Isometry2::translation(dt));
        frame.renormalize()?;
        cell = branch.target_cell;
        entry_side = Some(branch.target_side);
    }
}

/// Sample a state from the Liouville measure (normalized volume of the
/// unit tangent bundle): uniform cell, hyperbolic-area point by rejection
/// in the chart bounding box, uniform direction.
pub fn sample_liouville(surface: &Surface, rng: &mut ChaCha8Rng) -> InteriorState {
    loop {
        let ci = rng.gen_range(0..surface.cells.len());
        let cell = &surface.cells[ci];
        let (xmin, xmax, ymin, ymax) = cell.bbox;
        let x = rng.gen_range(xmin..xmax);
        // Density 1/y^2 on (ymin, ymax) by inverse transform.
        let u: f64 = rng.gen();
        let y = 1.0 / (1.0 / ymin - u * (1.0 / ymin - 1.0 / ymax));
        let p = crate::hyp2::PointH2 { re: x, im: y };
        if !cell.contains(p) {
            continue;
        }
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = crate::hyp2::UnitTangentH2 { base: p, dir: phi };
        return InteriorState { cell: ci, frame: Isometry2::from_tangent(&v) };
    }
}

/// Sample from the return measure of the cross section over the labeled
/// multicurve: curve weighted by length, uniform position, angle with
/// density |sin theta| / 4 on (0, 2 pi).
pub fn sample_cross_section(surface: &Surface, rng: &mut ChaCha8Rng) -> CrossSectionState {
    let gamma = surface.gamma();
    assert!(!gamma.is_empty(), "surface has no labeled curves");
    let total: f64 = gamma.iter().map(|&(i, _)| surface.gluings[i].length).sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut gi = gamma[0].0;
    for &(i, _) in &gamma {
        let l = surface.gluings[i].length;
        if pick < l {
            gi = i;
            break;
        }
        pick -= l;
    }
    let l = surface.gluings[gi].length;
    let x = rng.gen_range(0.0..l);
    let u: f64 = rng.gen();
    let theta = if u < 0.5 {
        (1.0 - 4.0 * u).acos()
    } else {
        std::f64::consts::TAU - (1.0 - 4.0 * (u - 0.5)).acos()
    };
    CrossSectionState { gluing: gi, x, theta }
}

/// Materialize a cross-section state as a state on the wall of the cell
/// the trajectory is entering, together with the side index it sits on.
pub fn cross_section_to_interior(surface: &Surface, cs: &CrossSectionState) -> (InteriorState, usize) {
    let g = &surface.gluings[cs.gluing];
    let (seg_idx, f) = g.minus.frame_at(cs.x);
    let seg = &g.minus.segments[seg_idx];
    let frame = f.compose(&Isometry2::rotation(cs.theta));
    let side = &surface.cells[seg.cell].sides[seg.side];
    let cell_left_of_chart = side.interior_left != seg.reversed;
    let heading_left = cs.theta.sin() > 0.0;
    if heading_left == cell_left_of_chart {
        return (InteriorState { cell: seg.cell, frame }, seg.side);
    }
    // Pointing into the neighboring cell: push through the branch at x.
    let x_in_seg = (cs.x.rem_euclid(g.length) - seg.x0).rem_euclid(g.length);
    let s = if seg.reversed { seg.len - x_in_seg } else { x_in_seg };
    let br = side
        .branches
        .iter()
        .find(|b| b.s_lo - 1e-9 <= s && s <= b.s_hi + 1e-9)
        .expect("branch covering the cross-section point");
    (
        InteriorState { cell: br.target_cell, frame: br.iso.compose(&frame) },
        br.target_side,
    )
}

/// First return to the cross section: trace until the next labeled-curve
/// crossing and report it together with the return time.
pub fn first_return(
    surface: &Surface,
    cs: &CrossSectionState,
    max_time: f64,
) -> Result<(CrossSectionState, f64), TraceError> {
    let (start, on_side) = cross_section_to_interior(surface, cs);
    let tr = trace_from(
        surface,
        start,
        Some(on_side),
        &TraceConfig { max_time, max_crossings: Some(1) },
    )?;
    let c = tr
        .crossings
        .first()
        .ok_or(TraceError::NoExit(max_time))?;
    Ok((CrossSectionState { gluing: c.gluing, x: c.x, theta: c.theta }, c.t))
}

impl Surface {
    /// Times of labeled crossings only; convenience for melodies.
    pub fn crossing_times(crossings: &[Crossing]) -> Vec<f64> {
        crossings.iter().map(|c| c.t).collect()
    }

    /// Mean return time to the cross section predicted by ergodicity:
    /// pi^2 |chi| / (2 L) where L is the total labeled length.
    pub fn mean_return_time(&self) -> f64 {
        std::f64::consts::PI * self.area() / (2.0 * self.gamma_length())
    }
}
