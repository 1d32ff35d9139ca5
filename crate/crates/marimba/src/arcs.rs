//! Exact enumeration of orthogeodesic arcs between labeled curves.
//!
//! A k-step arc meets the labeled multicurve k+1 times: once at each end
//! and k-1 times in between. Classes are encoded combinatorially as a
//! starting side plus a word of (side, branch) crossings through the cell
//! complex; each class carries at most one geodesic representative, the
//! common perpendicular of the developed end geodesics. Enumeration walks
//! the branch tables breadth-first, developing isometries as it goes, and
//! prunes a state as soon as the distance from the start geodesic to the
//! last crossed wall already exceeds the length cap.

use crate::hyp2::{
    common_perpendicular, dist_point_geodesic, geodesic_intersection, inversive_product, side_of,
    GeodesicH2, Ideal, Isometry2, Perpendicular, PointH2, Shape,
};
use crate::surface::{SideKind, Surface};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArcsError {
    #[error("search exceeded the state budget of {budget}")]
    BudgetExceeded { budget: usize },
    #[error("class has no geodesic representative crossing its own word: {reason}")]
    InvalidRealization { reason: &'static str },
    #[error("k must be at least 1")]
    ZeroSteps,
    #[error("operation needs a {expected}-step arc, got {got}")]
    WrongStepCount { expected: usize, got: usize },
    #[error("seed side {side} of cell {cell} is not on a labeled curve")]
    UnlabeledSeed { cell: usize, side: usize },
}

/// Combinatorial class of an oriented arc: start side, interior crossing
/// word, and the side carrying the far endpoint. Cells along the word are
/// implied by the branch targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcClass {
    pub seed_cell: usize,
    pub seed_side: usize,
    /// Crossings in order: (side index in the current cell, branch index).
    pub word: Vec<(usize, usize)>,
    /// Side index in the final cell where the arc ends.
    pub end_side: usize,
}

/// A realized arc class: the orthogeodesic data of its representative.
#[derive(Debug, Clone)]
pub struct OrthoArc {
    pub class: ArcClass,
    /// Number of labeled-curve incidences minus one.
    pub k: usize,
    pub length: f64,
    /// (gluing index, canonical circle coordinate, angle) at the start.
    pub foot_start: (usize, f64, f64),
    pub foot_end: (usize, f64, f64),
    /// Developed lifts of the labeled geodesics the arc meets, in order:
    /// index 0 is the start lift, the last is the end lift (k+1 entries).
    pub dev_gammas: Vec<GeodesicH2>,
    pub perp: Perpendicular,
}

/// Hyperbolic distance between two disjoint geodesics, zero if they meet.
fn geodesic_gap(g: &GeodesicH2, h: &GeodesicH2) -> f64 {
    let inv = inversive_product(g, h);
    if inv > 1.0 {
        inv.acosh()
    } else {
        0.0
    }
}

/// Hyperboloid-model coordinates of an upper half-plane point, with
/// inner product <A,B> = A0 B0 - A1 B1 - A2 B2 and cosh dist = <X,Y>.
fn embed(p: PointH2) -> [f64; 3] {
    let n = p.re * p.re + p.im * p.im;
    [(n + 1.0) / (2.0 * p.im), p.re / p.im, (n - 1.0) / (2.0 * p.im)]
}

fn mdot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2]
}

/// Unit point/tangent pair of a geodesic at its apex coordinate 0, in the
/// hyperboloid model, so that the point at arclength u is
/// P cosh u + T sinh u.
fn frame_of(sh: &Shape) -> ([f64; 3], [f64; 3]) {
    let p = embed(sh.point_at(0.0));
    let q = embed(sh.point_at(1.0));
    let (c, s) = (1f64.cosh(), 1f64.sinh());
    let t = [(q[0] - p[0] * c) / s, (q[1] - p[1] * c) / s, (q[2] - p[2] * c) / s];
    (p, t)
}

/// Distance from a point to the sub-segment [w_lo, w_hi] of a geodesic
/// (window in the shape's arclength coordinates).
fn dist_point_segment(x: PointH2, sh: &Shape, w_lo: f64, w_hi: f64) -> f64 {
    let (p, t) = frame_of(sh);
    let xe = embed(x);
    let xp = mdot(xe, p);
    let xt = mdot(xe, t);
    // cosh dist(u) = xp cosh u + xt sinh u is convex; the free minimum is
    // at tanh u = -xt / xp, clamped into the window.
    let u = (-xt / xp).clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh().clamp(w_lo, w_hi);
    let v = xp * u.cosh() + xt * u.sinh();
    if !v.is_finite() {
        // Overflowing coordinates mean a point pushed past the precision
        // horizon; report it as unreachable rather than close.
        return f64::INFINITY;
    }
    v.max(1.0).acosh()
}

/// Exact distance between two geodesic segments, each a window in its
/// shape's arclength coordinates. Zero when they intersect; otherwise the
/// minimum sits on the common perpendicular when both feet are interior,
/// and at a segment endpoint otherwise.
fn segment_distance(
    ga: &GeodesicH2,
    a_lo: f64,
    a_hi: f64,
    gb: &GeodesicH2,
    b_lo: f64,
    b_hi: f64,
) -> f64 {
    let sa = ga.shape();
    let sb = gb.shape();
    if let Some(ip) = geodesic_intersection(ga, gb) {
        if (a_lo..=a_hi).contains(&sa.coord_of(ip)) && (b_lo..=b_hi).contains(&sb.coord_of(ip)) {
            return 0.0;
        }
    }
    if let Ok(perp) = common_perpendicular(ga, gb) {
        if (a_lo..=a_hi).contains(&sa.coord_of(perp.foot_a))
            && (b_lo..=b_hi).contains(&sb.coord_of(perp.foot_b))
        {
            return perp.length;
        }
    }
    dist_point_segment(sa.point_at(a_lo), &sb, b_lo, b_hi)
        .min(dist_point_segment(sa.point_at(a_hi), &sb, b_lo, b_hi))
        .min(dist_point_segment(sb.point_at(b_lo), &sa, a_lo, a_hi))
        .min(dist_point_segment(sb.point_at(b_hi), &sa, a_lo, a_hi))
}

fn is_labeled(surface: &Surface, cell: usize, side: usize) -> Option<usize> {
    match surface.cells[cell].sides[side].kind {
        SideKind::Cuff { gluing, .. } if surface.gluings[gluing].label.is_some() => Some(gluing),
        _ => None,
    }
}

/// Realize an arc class: develop its word, take the common perpendicular
/// of the end lifts, and verify the perpendicular actually crosses every
/// wall of the word inside the stated branch window with both feet inside
/// their side segments. Rejected classes get `InvalidRealization`.
pub fn orthogeodesic_length(surface: &Surface, class: &ArcClass) -> Result<OrthoArc, ArcsError> {
    const WIN_TOL: f64 = 1e-9;
    let seed = &surface.cells[class.seed_cell].sides[class.seed_side];
    if is_labeled(surface, class.seed_cell, class.seed_side).is_none() {
        return Err(ArcsError::UnlabeledSeed { cell: class.seed_cell, side: class.seed_side });
    }
    let gamma0 = seed.geodesic;
    let mut dev = Isometry2::new([[1.0, 0.0], [0.0, 1.0]]);
    let mut cell = class.seed_cell;
    let mut dev_gammas = vec![gamma0];
    // Developed wall of each interior crossing with its branch window as a
    // coordinate interval on the developed shape.
    let mut walls: Vec<(GeodesicH2, f64, f64)> = Vec::with_capacity(class.word.len());
    let mut k = 1usize;
    for &(side, branch) in &class.word {
        let cs = &surface.cells[cell].sides[side];
        let br = &cs.branches[branch];
        let g_dev = dev.apply_geodesic(&cs.geodesic);
        let p_lo = dev.apply_point(cs.shape.point_at(cs.start_coord + br.s_lo));
        let p_hi = dev.apply_point(cs.shape.point_at(cs.start_coord + br.s_hi));
        let sh = g_dev.shape();
        walls.push((g_dev, sh.coord_of(p_lo), sh.coord_of(p_hi)));
        if is_labeled(surface, cell, side).is_some() {
            dev_gammas.push(g_dev);
            k += 1;
        }
        dev = dev.compose(&br.iso.inverse());
        dev.renormalize().map_err(|_| ArcsError::InvalidRealization { reason: "development lost precision" })?;
        cell = br.target_cell;
    }
    let end = &surface.cells[cell].sides[class.end_side];
    if is_labeled(surface, cell, class.end_side).is_none() {
        return Err(ArcsError::InvalidRealization { reason: "end side is not labeled" });
    }
    let gamma1 = dev.apply_geodesic(&end.geodesic);
    dev_gammas.push(gamma1);
    let perp = common_perpendicular(&gamma0, &gamma1)
        .map_err(|_| ArcsError::InvalidRealization { reason: "end lifts have no common perpendicular" })?;

    // Feet must sit inside their side segments. Windows are closed with a
    // tolerance: a foot landing exactly on a shared hexagon vertex (the
    // generic picture for seam perpendiculars) is accepted from every side
    // meeting it, and the search dedups those by canonical coordinates.
    let sh0 = gamma0.shape();
    let s0 = sh0.coord_of(perp.foot_a) - seed.start_coord;
    if !(-WIN_TOL..=seed.length + WIN_TOL).contains(&s0) {
        return Err(ArcsError::InvalidRealization { reason: "start foot outside the seed segment" });
    }
    let sh1 = gamma1.shape();
    let end_lo = sh1.coord_of(dev.apply_point(end.shape.point_at(end.start_coord)));
    let s1 = sh1.coord_of(perp.foot_b) - end_lo;
    if !(-WIN_TOL..=end.length + WIN_TOL).contains(&s1) {
        return Err(ArcsError::InvalidRealization { reason: "end foot outside the end segment" });
    }
    // Every interior wall must be crossed inside its branch window, in
    // order, strictly between the feet.
    let psh = perp.geodesic.shape();
    let t_a = psh.coord_of(perp.foot_a);
    let t_b = psh.coord_of(perp.foot_b);
    let mut t_prev = t_a;
    for (wall, w_lo, w_hi) in &walls {
        let Some(ip) = geodesic_intersection(&perp.geodesic, wall) else {
            return Err(ArcsError::InvalidRealization { reason: "perpendicular misses a wall of the word" });
        };
        let c = wall.shape().coord_of(ip);
        if c < w_lo - WIN_TOL || c > w_hi + WIN_TOL {
            return Err(ArcsError::InvalidRealization { reason: "wall crossing outside its branch window" });
        }
        let t = psh.coord_of(ip);
        if t <= t_prev || t >= t_b {
            return Err(ArcsError::InvalidRealization { reason: "wall crossings out of order" });
        }
        t_prev = t;
    }

    let gl0 = is_labeled(surface, class.seed_cell, class.seed_side).unwrap();
    let gl1 = is_labeled(surface, cell, class.end_side).unwrap();
    let th0 =
        crate::hyp2::normalize_angle(psh.direction_at(t_a) - sh0.direction_at(sh0.coord_of(perp.foot_a)));
    let (x0, theta0) =
        surface.crossing_coords(class.seed_cell, class.seed_side, s0.clamp(0.0, seed.length), th0);
    let th1 = crate::hyp2::normalize_angle(psh.direction_at(t_b) - sh1.direction_at(sh1.coord_of(perp.foot_b)));
    // The end side lives in the developed plane; angles against the side
    // direction are chart-invariant, so the canonical coordinates still
    // come from the undeveloped chart data.
    let (x1, theta1) =
        surface.crossing_coords(cell, class.end_side, s1.clamp(0.0, end.length), th1);

    Ok(OrthoArc {
        class: class.clone(),
        k,
        length: perp.length,
        foot_start: (gl0, x0, theta0),
        foot_end: (gl1, x1, theta1),
        dev_gammas,
        perp,
    })
}

struct SearchState {
    cell: usize,
    dev: Isometry2,
    depth: usize,
}

/// Geodesics equal as point sets with matching orientation, up to roundoff.
fn same_geodesic(g: &GeodesicH2, h: &GeodesicH2) -> bool {
    match (g.shape(), h.shape()) {
        (Shape::Arc { c: c1, r: r1, rightward: o1 }, Shape::Arc { c: c2, r: r2, rightward: o2 }) => {
            let scale = r1.abs().max(1.0);
            o1 == o2 && (c1 - c2).abs() < 1e-7 * scale && (r1 - r2).abs() < 1e-7 * scale
        }
        (Shape::Vertical { x: x1, upward: u1 }, Shape::Vertical { x: x2, upward: u2 }) => {
            u1 == u2 && (x1 - x2).abs() < 1e-7 * x1.abs().max(1.0)
        }
        _ => false,
    }
}

/// Sign-normalized matrix entries for the visited-state table.
fn dev_key(iso: &Isometry2) -> [f64; 4] {
    let m = iso.m;
    let mut k = [m[0][0], m[0][1], m[1][0], m[1][1]];
    let lead = k.iter().copied().find(|v| v.abs() > 1e-9).unwrap_or(1.0);
    if lead < 0.0 {
        for v in &mut k {
            *v = -*v;
        }
    }
    k
}

/// Word-free realization: develop the common perpendicular of the seed
/// geodesic and `gamma1` cell by cell, recording the crossing word as it
/// goes. Returns the arc only when the walk uses exactly k-1 interior
/// labeled crossings and both feet land inside their side segments.
/// Forward step used to disambiguate vertex crossings; small against every
/// cell, large against the crossing tolerances.
const EXIT_DELTA: f64 = 1e-6;

/// The point lies in the closed cell (boundary within tolerance counts).
fn cell_contains(surface: &Surface, cell: usize, p: PointH2) -> bool {
    surface.cells[cell].sides.iter().all(|cs| {
        (side_of(&cs.geodesic, p) > 0.0) == cs.interior_left
            || dist_point_geodesic(p, &cs.geodesic) < 1e-9
    })
}

fn walk_realize(
    surface: &Surface,
    seed_cell: usize,
    seed_side: usize,
    norm: &Isometry2,
    gamma1: &GeodesicH2,
    k: usize,
    l_max: f64,
) -> Option<OrthoArc> {
    const WIN_TOL: f64 = 1e-9;
    let seed = &surface.cells[seed_cell].sides[seed_side];
    // Work in the chart where the seed lift is the imaginary axis; `norm`
    // carries the seed cell there and `gamma1` is already expressed there.
    let gamma0 = GeodesicH2::new(Ideal::Real(0.0), Ideal::Infinity).unwrap();
    let perp = common_perpendicular(&gamma0, gamma1).ok()?;
    if perp.length > l_max {
        return None;
    }
    let sh0 = gamma0.shape();
    let seed_lo = sh0.coord_of(norm.apply_point(seed.shape.point_at(seed.start_coord)));
    let s0 = sh0.coord_of(perp.foot_a) - seed_lo;
    if !(-WIN_TOL..=seed.length + WIN_TOL).contains(&s0) {
        return None;
    }
    let psh = perp.geodesic.shape();
    let t_a = psh.coord_of(perp.foot_a);
    let t_b = psh.coord_of(perp.foot_b);

    let mut cell = seed_cell;
    let mut dev = Isometry2::new(norm.m);
    let mut entry = Some(seed_side);
    let mut t = t_a;
    let mut word = Vec::new();
    let mut dev_gammas = vec![gamma0];
    for _ in 0..100_000 {
        let perp_local = dev.inverse().apply_geodesic(&perp.geodesic);
        let pls = perp_local.shape();
        let mut best: Option<(f64, usize, f64, PointH2)> = None;
        for side in 0..surface.cells[cell].sides.len() {
            if entry == Some(side) {
                continue;
            }
            let cs = &surface.cells[cell].sides[side];
            let Some(ip) = geodesic_intersection(&perp_local, &cs.geodesic) else {
                continue;
            };
            let s = cs.shape.coord_of(ip) - cs.start_coord;
            if !(-WIN_TOL..=cs.length + WIN_TOL).contains(&s) {
                continue;
            }
            let tc = psh.coord_of(dev.apply_point(ip));
            if tc <= t - WIN_TOL {
                continue;
            }
            // The perpendicular may pass exactly through a cell vertex
            // (e.g. at a half twist); tc then ties with t for every side
            // through the vertex. Only sides the forward direction
            // genuinely leaves through count as crossings.
            let p_after = pls.point_at(pls.coord_of(ip) + EXIT_DELTA);
            if (side_of(&cs.geodesic, p_after) > 0.0) == cs.interior_left {
                continue;
            }
            if best.is_none_or(|b| tc < b.0) {
                best = Some((tc, side, s, p_after));
            }
        }
        let (tc, side, s, p_after) = best?;
        let cs = &surface.cells[cell].sides[side];
        if tc >= t_b - WIN_TOL {
            if (tc - t_b).abs() > WIN_TOL {
                // The perpendicular ends strictly inside this cell without
                // meeting gamma1's side: not an arc of this complex.
                return None;
            }
            let g_dev = dev.apply_geodesic(&cs.geodesic);
            if !same_geodesic(&g_dev, gamma1) || is_labeled(surface, cell, side).is_none() {
                return None;
            }
            if dev_gammas.len() != k {
                return None;
            }
            dev_gammas.push(g_dev);
            let gl0 = is_labeled(surface, seed_cell, seed_side).unwrap();
            let gl1 = is_labeled(surface, cell, side).unwrap();
            let th0 = crate::hyp2::normalize_angle(
                psh.direction_at(t_a) - sh0.direction_at(sh0.coord_of(perp.foot_a)),
            );
            let (x0, theta0) =
                surface.crossing_coords(seed_cell, seed_side, s0.clamp(0.0, seed.length), th0);
            let sh1 = g_dev.shape();
            let th1 = crate::hyp2::normalize_angle(
                psh.direction_at(t_b) - sh1.direction_at(sh1.coord_of(perp.foot_b)),
            );
            let (x1, theta1) = surface.crossing_coords(cell, side, s.clamp(0.0, cs.length), th1);
            return Some(OrthoArc {
                class: ArcClass { seed_cell, seed_side, word, end_side: side },
                k,
                length: perp.length,
                foot_start: (gl0, x0, theta0),
                foot_end: (gl1, x1, theta1),
                dev_gammas,
                perp,
            });
        }
        if is_labeled(surface, cell, side).is_some() {
            if dev_gammas.len() >= k {
                return None;
            }
            dev_gammas.push(dev.apply_geodesic(&cs.geodesic));
        }
        // A crossing on a branch boundary (a vertex shared by two wraps)
        // matches several branch windows; pick the one whose target cell
        // actually contains the forward direction.
        let cands: Vec<usize> = (0..cs.branches.len())
            .filter(|&i| {
                let b = &cs.branches[i];
                s >= b.s_lo - WIN_TOL && s <= b.s_hi + WIN_TOL
            })
            .collect();
        let bi = match cands.len() {
            0 => return None,
            1 => cands[0],
            _ => *cands
                .iter()
                .find(|&&i| {
                    let b = &cs.branches[i];
                    cell_contains(surface, b.target_cell, b.iso.apply_point(p_after))
                })
                .unwrap_or(&cands[0]),
        };
        let br = &cs.branches[bi];
        word.push((side, bi));
        dev = dev.compose(&br.iso.inverse());
        dev.renormalize().ok()?;
        entry = Some(br.target_side);
        cell = br.target_cell;
        t = tc;
    }
    None
}

/// Enumerate every realized k-step arc class of length at most `l_max`.
///
/// `budget` caps the number of expanded search states across all seeds.
/// The result is complete: an arc class with a representative of length
/// <= l_max is always found, because a state is only pruned when the
/// distance from the start geodesic to the wall just crossed (a lower
/// bound for every arc extending the word) already exceeds the cap.
pub fn enumerate_arc_classes(
    surface: &Surface,
    k: usize,
    l_max: f64,
    budget: usize,
) -> Result<Vec<OrthoArc>, ArcsError> {
    search(surface, k, l_max, budget, true, usize::MAX)
}

/// Reference enumerator with no geometric pruning, bounded only by word
/// length. Exponentially slow; used to certify completeness of the pruned
/// search on small instances.
pub fn enumerate_arc_classes_unpruned(
    surface: &Surface,
    k: usize,
    l_max: f64,
    max_word: usize,
    budget: usize,
) -> Result<Vec<OrthoArc>, ArcsError> {
    search(surface, k, l_max, budget, false, max_word)
}

fn search(
    surface: &Surface,
    k: usize,
    l_max: f64,
    budget: usize,
    prune: bool,
    max_word: usize,
) -> Result<Vec<OrthoArc>, ArcsError> {
    if k == 0 {
        return Err(ArcsError::ZeroSteps);
    }
    let mut out = Vec::new();
    let mut expanded = 0usize;
    for seed_cell in 0..surface.cells.len() {
        for seed_side in 0..surface.cells[seed_cell].sides.len() {
            if is_labeled(surface, seed_cell, seed_side).is_none() {
                continue;
            }
            let seed_cs = &surface.cells[seed_cell].sides[seed_side];
            // Develop in the chart where the seed lift is the imaginary
            // axis. Elsewhere in the chart, far lifts acquire one huge
            // ideal endpoint and every quantity computed from their
            // Euclidean shape loses its precision to cancellation, which
            // first corrupts the distance pruning and then the results.
            let norm = axis_normalizer(&seed_cs.geodesic);
            let gamma0 = GeodesicH2::new(Ideal::Real(0.0), Ideal::Infinity).unwrap();
            let seed_w0 = gamma0
                .shape()
                .coord_of(norm.apply_point(seed_cs.shape.point_at(seed_cs.start_coord)));
            let seed_w1 = seed_w0 + seed_cs.length;
            // Distinct cell lifts already reached, bucketed per cell; a
            // lift is identified by its development matrix up to sign.
            let mut visited: Vec<Vec<[f64; 4]>> = vec![Vec::new(); surface.cells.len()];
            let mut queue = VecDeque::new();
            let start = Isometry2::new(norm.m);
            visited[seed_cell].push(dev_key(&start));
            queue.push_back(SearchState { cell: seed_cell, dev: start, depth: 0 });
            while let Some(st) = queue.pop_front() {
                expanded += 1;
                if expanded > budget {
                    return Err(ArcsError::BudgetExceeded { budget });
                }
                let nsides = surface.cells[st.cell].sides.len();
                for side in 0..nsides {
                    let cs = &surface.cells[st.cell].sides[side];
                    let g_dev = st.dev.apply_geodesic(&cs.geodesic);
                    if is_labeled(surface, st.cell, side).is_some()
                        && geodesic_gap(&gamma0, &g_dev) <= l_max
                    {
                        if let Some(arc) =
                            walk_realize(surface, seed_cell, seed_side, &norm, &g_dev, k, l_max)
                        {
                            out.push(arc);
                        }
                    }
                    if st.depth >= max_word {
                        continue;
                    }
                    if prune && geodesic_gap(&gamma0, &g_dev) > l_max {
                        continue;
                    }
                    for br in cs.branches.iter() {
                        if prune {
                            // Any arc reaching material beyond this branch
                            // starts inside the seed segment and crosses
                            // the wall inside the branch window, so the
                            // segment distance bounds its length below.
                            let dsh = g_dev.shape();
                            let w0 = dsh.coord_of(
                                st.dev.apply_point(cs.shape.point_at(cs.start_coord + br.s_lo)),
                            );
                            let w1 = dsh.coord_of(
                                st.dev.apply_point(cs.shape.point_at(cs.start_coord + br.s_hi)),
                            );
                            let gap = segment_distance(
                                &gamma0,
                                seed_w0,
                                seed_w1,
                                &g_dev,
                                w0.min(w1),
                                w0.max(w1),
                            );
                            if gap > l_max {
                                continue;
                            }
                        }
                        let mut dev = st.dev.compose(&br.iso.inverse());
                        if dev.renormalize().is_err() {
                            continue;
                        }
                        let key = dev_key(&dev);
                        let bucket = &mut visited[br.target_cell];
                        if bucket
                            .iter()
                            .any(|v| v.iter().zip(&key).all(|(a, b)| (a - b).abs() < 1e-8))
                        {
                            continue;
                        }
                        bucket.push(key);
                        queue.push_back(SearchState {
                            cell: br.target_cell,
                            dev,
                            depth: st.depth + 1,
                        });
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length));
    // A foot on a hexagon vertex is claimed by both sides meeting it, so
    // the same geometric arc can be realized from several seed charts.
    // Two oriented orthogeodesics coincide exactly when both canonical
    // feet (circle, position, departure side) agree.
    let mut kept: Vec<OrthoArc> = Vec::with_capacity(out.len());
    for arc in out {
        let dup = kept
            .iter()
            .rev()
            .take_while(|b| (arc.length - b.length).abs() <= 1e-9)
            .any(|b| same_foot(surface, arc.foot_start, b.foot_start) && same_foot(surface, arc.foot_end, b.foot_end));
        if !dup {
            kept.push(arc);
        }
    }
    Ok(kept)
}

fn same_foot(surface: &Surface, a: (usize, f64, f64), b: (usize, f64, f64)) -> bool {
    use std::f64::consts::TAU;
    if a.0 != b.0 {
        return false;
    }
    let l = surface.gluings[a.0].length;
    let dx = (a.1 - b.1).rem_euclid(l).min((b.1 - a.1).rem_euclid(l));
    let dt = (a.2 - b.2).rem_euclid(TAU).min((b.2 - a.2).rem_euclid(TAU));
    dx < 1e-7 && dt < 1e-7
}

/// Sorted (length, oriented multiplicity) pairs of the k-step arcs up to
/// `l_max`, grouping lengths that agree to 1e-9. Every arc is counted with
/// its orientation, so a class and its reversal contribute two.
pub fn orthospectrum_oracle(
    surface: &Surface,
    k: usize,
    l_max: f64,
    budget: usize,
) -> Result<Vec<(f64, usize)>, ArcsError> {
    let arcs = enumerate_arc_classes(surface, k, l_max, budget)?;
    let mut grouped: Vec<(f64, usize)> = Vec::new();
    for arc in &arcs {
        match grouped.last_mut() {
            Some((l, m)) if (arc.length - *l).abs() <= 1e-9 => *m += 1,
            _ => grouped.push((arc.length, 1)),
        }
    }
    Ok(grouped)
}

/// The two half-arcs and signed foot offset of a 2-step arc: lengths of
/// the perpendiculars from each end lift to the middle lift, and the
/// oriented distance between their feet along the middle lift.
#[derive(Debug, Clone, Copy)]
pub struct TwoStepSplit {
    pub l1: f64,
    pub l2: f64,
    pub offset: f64,
}

/// Isometry sending `g` to the upward imaginary axis (a to 0, b to
/// infinity), orientation included.
fn axis_normalizer(g: &GeodesicH2) -> Isometry2 {
    let mut m = match (g.a, g.b) {
        (Ideal::Real(p), Ideal::Real(q)) if q > p => [[1.0, -p], [-1.0, q]],
        (Ideal::Real(p), Ideal::Real(q)) => [[1.0, -p], [1.0, -q]],
        (Ideal::Real(p), Ideal::Infinity) => [[1.0, -p], [0.0, 1.0]],
        (Ideal::Infinity, Ideal::Real(q)) => [[0.0, 1.0], [-1.0, q]],
        (Ideal::Infinity, Ideal::Infinity) => unreachable!("degenerate geodesic"),
    };
    let s = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).sqrt();
    for row in &mut m {
        row[0] /= s;
        row[1] /= s;
    }
    Isometry2::new(m)
}

pub fn two_step_split(arc: &OrthoArc) -> Result<TwoStepSplit, ArcsError> {
    if arc.k != 2 {
        return Err(ArcsError::WrongStepCount { expected: 2, got: arc.k });
    }
    // Move the middle lift onto the imaginary axis first: developed lifts
    // can have an ideal endpoint far out on the real line, and the
    // perpendicular feet are then lost to cancellation in that chart.
    let n = axis_normalizer(&arc.dev_gammas[1]);
    let g0 = n.apply_geodesic(&arc.dev_gammas[0]);
    let mid = GeodesicH2::new(Ideal::Real(0.0), Ideal::Infinity).unwrap();
    let g1 = n.apply_geodesic(&arc.dev_gammas[2]);
    let p1 = common_perpendicular(&g0, &mid)
        .map_err(|_| ArcsError::InvalidRealization { reason: "first half degenerate" })?;
    let p2 = common_perpendicular(&mid, &g1)
        .map_err(|_| ArcsError::InvalidRealization { reason: "second half degenerate" })?;
    let sh = mid.shape();
    let offset = sh.coord_of(p2.foot_a) - sh.coord_of(p1.foot_b);
    Ok(TwoStepSplit { l1: p1.length, l2: p2.length, offset })
}
