//! Isomelodic pair constructions: the half-twist partner inside the
//! symmetric genus-2 family, Z/n cyclic covers, and exact melody transport
//! between the members of a pair.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::arcs::{enumerate_arc_classes, ArcsError};
use crate::flow::InteriorState;
use crate::hyp2::dist_point_geodesic;
use crate::spec::{GluingDecl, MarimbaSpec, SpecError, SymmetricFamilyParams};
use crate::surface::{pants_hexagon, ComplexBuilder, SideKind, Surface, SurfaceError};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("spec was not produced by symmetric_family_marimba")]
    NotInFamily,
    #[error("specs do not differ by exactly half a twist along alpha")]
    NotAPartner,
    #[error("gluing {gluing} carries a label but its weight {weight} is not a unit mod {n}")]
    CocycleOrderViolation { gluing: usize, weight: i64, n: usize },
    #[error("cocycle has {got} weights for {expected} gluings")]
    WeightCountMismatch { got: usize, expected: usize },
    #[error("sheet {sheet} out of range for a {n}-sheet cover")]
    SheetOutOfRange { sheet: usize, n: usize },
    #[error("cell {cell} does not belong to the base surface")]
    CellOutOfRange { cell: usize },
    #[error("state is based on a labeled curve; transport is undefined there")]
    OnGamma,
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Arcs(#[from] ArcsError),
}

/// Spec of the genus-2 surface obtained by gluing the two alpha boundaries
/// and the two beta boundaries of the symmetric piece W. The spec carries
/// only the family parameters; the cell complex is produced by
/// [`symmetric_family_surface`].
pub fn symmetric_family_marimba(
    p: SymmetricFamilyParams,
) -> Result<MarimbaSpec, ConstructionError> {
    p.validate()?;
    let spec = MarimbaSpec {
        pants: Vec::new(),
        gluings: Vec::new(),
        gamma: BTreeMap::new(),
        allow_shared_labels: false,
        symmetric_family: Some(p),
    };
    spec.validate()?;
    Ok(spec)
}

/// Build the surface of a symmetric-family spec.
///
/// W is assembled as a cell-level double cover of the pants with boundary
/// lengths (l_alpha/2, l_alpha/2, l_beta): two copies each of the ccw and
/// mirror hexagons, with seam 1 staying on its sheet and seams 3 and 5
/// swapping sheets. The two short boundary circles of the quotient pants
/// (each adjacent to exactly one swapping seam) then lift to single
/// circles of length l_alpha, while the long one lifts to two circles of
/// length l_beta. The deck involution is cell index XOR 2 with the chart
/// untouched, so the symmetry is exact, not numerical.
///
/// The alpha twist is reduced by whole half-twists before the complex is
/// built, and an odd residue is realized by retargeting the alpha branches
/// through the involution. Specs whose twists differ by k half-twists
/// therefore build complexes with identical branch isometries, so the
/// traced melodies of a half-twist pair agree crossing by crossing instead
/// of drifting apart at the flow's exponential rate.
pub fn symmetric_family_surface(spec: &MarimbaSpec) -> Result<Surface, ConstructionError> {
    let p = spec.symmetric_family.as_ref().ok_or(ConstructionError::NotInFamily)?;
    if !spec.pants.is_empty() || !spec.gluings.is_empty() {
        return Err(ConstructionError::NotInFamily);
    }
    spec.validate()?;
    let half = p.l_alpha / 2.0;
    let k = (p.twist_alpha / half).round();
    let twist_reduced = p.twist_alpha - k * half;
    let cuffs = [p.l_alpha / 2.0, p.l_alpha / 2.0, p.l_beta];
    let mut b = ComplexBuilder::new();
    let a0 = b.add_hexagon(pants_hexagon(cuffs, true)?);
    let b0 = b.add_hexagon(pants_hexagon(cuffs, false)?);
    let a1 = b.add_hexagon(pants_hexagon(cuffs, true)?);
    let b1 = b.add_hexagon(pants_hexagon(cuffs, false)?);
    b.add_seam((a0, 1), (b0, 1));
    b.add_seam((a1, 1), (b1, 1));
    b.add_seam((a0, 3), (b1, 3));
    b.add_seam((a1, 3), (b0, 3));
    b.add_seam((a0, 5), (b1, 5));
    b.add_seam((a1, 5), (b0, 5));
    // Boundary circles in boundary orientation, alternating a reversed ccw
    // half with a forward mirror half exactly as in the base builder. The
    // alpha circles pass through all four cells; the involution shifts
    // their segment lists by two, i.e. acts by x -> x + l_alpha/2, and
    // swaps the two beta circles segment by segment.
    b.add_cuff_gluing(
        vec![(a0, 0, true), (b1, 0, false), (a1, 0, true), (b0, 0, false)],
        vec![(a0, 2, true), (b0, 2, false), (a1, 2, true), (b1, 2, false)],
        p.l_alpha,
        twist_reduced,
        Some(p.label_alpha.clone()),
    );
    b.add_cuff_gluing(
        vec![(a0, 4, true), (b1, 4, false)],
        vec![(a1, 4, true), (b0, 4, false)],
        p.l_beta,
        p.twist_beta,
        Some(p.label_beta.clone()),
    );
    let mut surface = b.build(-2)?;
    // Make the involution exact on the branch data: each cuff side's
    // branches are the bit-for-bit copies of its image side's, with the
    // targets mapped through tau. Without this the two computations of the
    // same isometry differ in the last ulp and tau-related trajectories
    // decorrelate.
    for (src, dst) in [
        ((a0, 0), (a1, 0)),
        ((b1, 0), (b0, 0)),
        ((a0, 2), (a1, 2)),
        ((b0, 2), (b1, 2)),
        ((a0, 4), (a1, 4)),
        ((b1, 4), (b0, 4)),
    ] {
        let mut branches = surface.cells[src.0].sides[src.1].branches.clone();
        for br in &mut branches {
            br.target_cell ^= 2;
        }
        surface.cells[dst.0].sides[dst.1].branches = branches;
    }
    if (k as i64).rem_euclid(2) == 1 {
        for cell in &mut surface.cells {
            for s in [0, 2] {
                for br in &mut cell.sides[s].branches {
                    br.target_cell ^= 2;
                }
            }
        }
    }
    surface.gluings[0].twist = p.twist_alpha;
    Ok(surface)
}

/// Build a surface from any spec, routing symmetric-family specs through
/// the double-cover construction.
pub fn build_surface(spec: &MarimbaSpec) -> Result<Surface, ConstructionError> {
    if spec.symmetric_family.is_some() {
        symmetric_family_surface(spec)
    } else {
        Ok(crate::surface::build_surface(spec)?)
    }
}

/// The partner spec: identical except for an extra half-length twist along
/// alpha. Applying it twice gives a full twist, an isometric surface.
pub fn half_twist_partner(spec: &MarimbaSpec) -> Result<MarimbaSpec, ConstructionError> {
    let p = spec.symmetric_family.as_ref().ok_or(ConstructionError::NotInFamily)?;
    let mut q = p.clone();
    q.twist_alpha += q.l_alpha / 2.0;
    let mut out = spec.clone();
    out.symmetric_family = Some(q);
    Ok(out)
}

/// A Z/n cover prescription: one integer weight per gluing of the base
/// spec. Crossing gluing g moves the sheet index by weights[g] mod n.
#[derive(Debug, Clone)]
pub struct CoverCocycle {
    pub weights: Vec<i64>,
    pub n: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl CoverCocycle {
    /// Sheet weight of a gluing, reduced to 0..n.
    fn reduced(&self, g: usize) -> usize {
        self.weights[g].rem_euclid(self.n as i64) as usize
    }
}

/// The Z/n cyclic cover of a pants spec: n copies of every pants, with the
/// copy-j side of gluing g attached to copy j + weights[g] mod n. Every
/// labeled gluing must have unit weight, so that its n lifts form a single
/// cycle through all sheets; the lifts share the base label, and the
/// labeled preimage has total length n times the base length.
pub fn cyclic_cover(
    base: &MarimbaSpec,
    c: &CoverCocycle,
) -> Result<MarimbaSpec, ConstructionError> {
    base.validate()?;
    if base.pants.is_empty() {
        return Err(SpecError::Empty.into());
    }
    if c.n == 0 {
        return Err(ConstructionError::SheetOutOfRange { sheet: 0, n: 0 });
    }
    if c.weights.len() != base.gluings.len() {
        return Err(ConstructionError::WeightCountMismatch {
            got: c.weights.len(),
            expected: base.gluings.len(),
        });
    }
    for (gi, _) in base.gamma_entries()? {
        if gcd(c.reduced(gi), c.n) != 1 {
            return Err(ConstructionError::CocycleOrderViolation {
                gluing: gi,
                weight: c.weights[gi],
                n: c.n,
            });
        }
    }
    let n = c.n;
    // Copy j of base pants p gets index p*n + j; the lift of gluing g on
    // sheet j gets index g*n + j, so projection is division by n.
    let mut pants = Vec::with_capacity(base.pants.len() * n);
    for p in &base.pants {
        for _ in 0..n {
            pants.push(p.clone());
        }
    }
    let mut gluings = Vec::with_capacity(base.gluings.len() * n);
    for (gi, g) in base.gluings.iter().enumerate() {
        let w = c.reduced(gi);
        for j in 0..n {
            gluings.push(GluingDecl {
                a: (g.a.0 * n + j, g.a.1),
                b: (g.b.0 * n + (j + w) % n, g.b.1),
                length: g.length,
                twist: g.twist,
            });
        }
    }
    let mut gamma = BTreeMap::new();
    for (gi, label) in base.gamma_entries()? {
        for j in 0..n {
            gamma.insert((gi * n + j).to_string(), label.clone());
        }
    }
    let cover = MarimbaSpec {
        pants,
        gluings,
        gamma,
        allow_shared_labels: base.allow_shared_labels || n > 1,
        symmetric_family: None,
    };
    cover.validate()?;
    Ok(cover)
}

/// Lift a base state to the chosen sheet of a cyclic cover: the same chart
/// coordinates in the sheet's copy of the cell. Sheet n wraps to sheet 0.
pub fn lift_state(
    base: &MarimbaSpec,
    c: &CoverCocycle,
    state: &InteriorState,
    sheet: usize,
) -> Result<InteriorState, ConstructionError> {
    if c.n == 0 || sheet > c.n {
        return Err(ConstructionError::SheetOutOfRange { sheet, n: c.n });
    }
    let j = sheet % c.n;
    let p = state.cell / 2;
    if p >= base.pants.len() {
        return Err(ConstructionError::CellOutOfRange { cell: state.cell });
    }
    Ok(InteriorState { cell: 2 * (p * c.n + j) + state.cell % 2, frame: state.frame })
}

/// Project a cover state back down: the base state and the sheet it came
/// from. Inverse of [`lift_state`].
pub fn project_state(
    base: &MarimbaSpec,
    c: &CoverCocycle,
    state: &InteriorState,
) -> Result<(InteriorState, usize), ConstructionError> {
    if c.n == 0 {
        return Err(ConstructionError::SheetOutOfRange { sheet: 0, n: 0 });
    }
    let q = state.cell / 2;
    let (p, j) = (q / c.n, q % c.n);
    if p >= base.pants.len() {
        return Err(ConstructionError::CellOutOfRange { cell: state.cell });
    }
    Ok((InteriorState { cell: 2 * p + state.cell % 2, frame: state.frame }, j))
}

/// Base gluing index of a cover gluing.
pub fn project_gluing(c: &CoverCocycle, cover_gluing: usize) -> usize {
    cover_gluing / c.n.max(1)
}

/// Lengths of closed geodesics crossing the given labeled curve exactly
/// once, sorted and deduplicated: one candidate per 1-step arc class with
/// both feet on the curve on opposite sides, closed up the shorter way
/// around. An arc of length m whose feet are a gap s apart along the curve
/// closes to a geodesic of length 2 acosh(cosh(m/2) cosh(s/2)).
///
/// These lengths are not determined by the melody: the arc lengths are,
/// but the foot gaps are not, so isomelodic partners can differ here. A
/// differing shortest entry certifies that a half-twist pair is
/// non-isometric.
pub fn crossing_curve_lengths(
    surface: &Surface,
    gluing: usize,
    l_max: f64,
    budget: usize,
) -> Result<Vec<f64>, ConstructionError> {
    let arcs = enumerate_arc_classes(surface, 1, l_max, budget)?;
    let l = surface.gluings[gluing].length;
    let mut out = Vec::new();
    for arc in &arcs {
        if arc.foot_start.0 != gluing || arc.foot_end.0 != gluing {
            continue;
        }
        // Arcs meeting the curve from opposite sides close up into curves
        // crossing it once; they are the ones with equal canonical foot
        // angles, and their foot gaps slide with the twist.
        if (arc.foot_start.2 - arc.foot_end.2).abs() > 1e-6 {
            continue;
        }
        let gap = (arc.foot_start.1 - arc.foot_end.1).rem_euclid(l);
        let sigma = gap.min(l - gap);
        out.push(2.0 * ((0.5 * arc.length).cosh() * (0.5 * sigma).cosh()).acosh());
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(out)
}

/// Transport a state from a symmetric-family surface to its half-twist
/// partner. The two surfaces share the cells of W, so the transported
/// state has the identical chart coordinates; it is only undefined on the
/// labeled curves themselves, where the two gluings disagree.
pub fn transport_half_twist(
    spec_x: &MarimbaSpec,
    spec_x2: &MarimbaSpec,
    start: &InteriorState,
) -> Result<InteriorState, ConstructionError> {
    let p = spec_x.symmetric_family.as_ref().ok_or(ConstructionError::NotInFamily)?;
    let q = spec_x2.symmetric_family.as_ref().ok_or(ConstructionError::NotInFamily)?;
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let half = (q.twist_alpha - p.twist_alpha).abs();
    if !(same(p.l_alpha, q.l_alpha)
        && same(p.l_beta, q.l_beta)
        && same(p.twist_beta, q.twist_beta)
        && same(half, p.l_alpha / 2.0)
        && p.label_alpha == q.label_alpha
        && p.label_beta == q.label_beta)
    {
        return Err(ConstructionError::NotAPartner);
    }
    let surface = symmetric_family_surface(spec_x)?;
    if start.cell >= surface.cells.len() {
        return Err(ConstructionError::CellOutOfRange { cell: start.cell });
    }
    let base_point = start.frame.tangent().base;
    for side in &surface.cells[start.cell].sides {
        if matches!(side.kind, SideKind::Cuff { .. })
            && dist_point_geodesic(base_point, &side.geodesic) < 1e-12
        {
            return Err(ConstructionError::OnGamma);
        }
    }
    Ok(*start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{sample_cross_section, sample_liouville, trace, TraceConfig};
    use crate::hyp2::Isometry2;
    use crate::melody::{default_battery, isomelody_report, Melody, Verdict};
    use crate::spec::genus2_theta;
    use crate::surface::CircleChart;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family() -> SymmetricFamilyParams {
        SymmetricFamilyParams {
            // Dyadic twists: adding half of l_alpha is then exact, so a
            // spec and its half-twist partner build bit-identical
            // complexes and the transport tests compare like with like.
            l_alpha: 3.2,
            l_beta: 2.6,
            twist_alpha: 0.375,
            twist_beta: -0.25,
            label_alpha: "A4".into(),
            label_beta: "D5".into(),
        }
    }

    /// Translation length of the holonomy around a cuff circle, measured
    /// by composing the chart's joint isometries: an oracle for the cuff
    /// length that goes through the glued hexagon geometry instead of
    /// reading back the declared length.
    fn circle_holonomy_length(surface: &Surface, chart: &CircleChart) -> f64 {
        let n = chart.segments.len();
        let mut holonomy = Isometry2::IDENTITY;
        for i in 0..n {
            let a = &chart.segments[i];
            let b = &chart.segments[(i + 1) % n];
            let end = a.frame.compose(&Isometry2::translation(a.len));
            // The seam branch carrying the joint: minimal deviation from
            // the next segment's frame among branches into its cell.
            let mut best: Option<(f64, Isometry2)> = None;
            for side in &surface.cells[a.cell].sides {
                if !matches!(side.kind, SideKind::Seam) {
                    continue;
                }
                for br in &side.branches {
                    if br.target_cell != b.cell {
                        continue;
                    }
                    let dev = br
                        .iso
                        .compose(&end)
                        .compose(&b.frame.inverse())
                        .deviation_from_identity();
                    if best.map_or(true, |(d, _)| dev < d) {
                        best = Some((dev, br.iso));
                    }
                }
            }
            // The joint isos telescope to f0 T(L) f0^{-1}: the deck
            // element of the closed-up circle.
            holonomy = holonomy.compose(&best.unwrap().1.inverse());
        }
        let m = holonomy.m;
        let tr = (m[0][0] + m[1][1]).abs();
        2.0 * (tr / 2.0).acosh()
    }

    #[test]
    fn family_spec_shape() {
        let spec = symmetric_family_marimba(family()).unwrap();
        assert_eq!(spec.euler_characteristic(), -2);
        let surface = symmetric_family_surface(&spec).unwrap();
        assert_eq!(surface.chi, -2);
        assert_eq!(surface.cells.len(), 4);
        assert_eq!(surface.gamma().len(), 2);
        assert!((surface.area() - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn cuff_lengths_match_family_parameters() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let surface = symmetric_family_surface(&spec).unwrap();
        let la = circle_holonomy_length(&surface, &surface.gluings[0].minus);
        let lb = circle_holonomy_length(&surface, &surface.gluings[1].minus);
        assert!((la - 3.2).abs() < 1e-9, "alpha holonomy {la}");
        assert!((lb - 2.6).abs() < 1e-9, "beta holonomy {lb}");
    }

    #[test]
    fn deck_involution_preserves_cell_structure() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let surface = symmetric_family_surface(&spec).unwrap();
        let tau = |c: usize| c ^ 2;
        for c in 0..4 {
            for (s, side) in surface.cells[c].sides.iter().enumerate() {
                let image = &surface.cells[tau(c)].sides[s];
                assert_eq!(side.length, image.length);
                match (side.kind, image.kind) {
                    (SideKind::Seam, SideKind::Seam) => {
                        // Seam targets commute with the involution.
                        assert_eq!(tau(side.branches[0].target_cell), image.branches[0].target_cell);
                    }
                    (
                        SideKind::Cuff { gluing: g, is_minus: m, segment: i },
                        SideKind::Cuff { gluing: g2, is_minus: m2, segment: i2 },
                    ) => {
                        assert_eq!(g, g2);
                        if g == 0 {
                            // alpha: same circle, segments shifted by two.
                            assert_eq!(m, m2);
                            assert_eq!((i + 2) % 4, i2);
                        } else {
                            // beta: the two circles swap; the stored plus
                            // chart runs backwards, reversing segments.
                            assert_eq!(m, !m2);
                            assert_eq!(1 - i, i2);
                        }
                    }
                    _ => panic!("side kinds differ under the involution"),
                }
            }
        }
    }

    #[test]
    fn half_twist_partner_requires_family_spec() {
        let spec = genus2_theta([0.8, 1.0, 1.3], [0.0; 3], &[(0, "C4")]);
        assert!(matches!(half_twist_partner(&spec), Err(ConstructionError::NotInFamily)));
    }

    #[test]
    fn double_half_twist_is_isometric() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let twice = half_twist_partner(&half_twist_partner(&spec).unwrap()).unwrap();
        let sa = symmetric_family_surface(&spec).unwrap();
        let sb = symmetric_family_surface(&twice).unwrap();
        let oa = crate::arcs::orthospectrum_oracle(&sa, 1, 6.0, 10_000_000).unwrap();
        let ob = crate::arcs::orthospectrum_oracle(&sb, 1, 6.0, 10_000_000).unwrap();
        assert_eq!(oa.len(), ob.len());
        for ((la, ma), (lb, mb)) in oa.iter().zip(&ob) {
            assert!((la - lb).abs() < 1e-9);
            assert_eq!(ma, mb);
        }
        // Same start, same melody: a full twist only relabels the gluing
        // coordinates mod the cuff length.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let start = sample_liouville(&sa, &mut rng);
        let config = TraceConfig { max_time: 2.0e4, max_crossings: Some(4000) };
        let ta = trace(&sa, start, &config).unwrap();
        let tb = trace(&sb, start, &config).unwrap();
        assert_eq!(ta.crossings.len(), tb.crossings.len());
        for (i, (a, b)) in ta.crossings.iter().zip(&tb.crossings).enumerate() {
            assert_eq!(a.label, b.label);
            assert!((a.t - b.t).abs() <= 1e-8 * (i + 1) as f64);
        }
    }

    #[test]
    fn half_twist_pair_is_isomelodic_by_transport() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let partner = half_twist_partner(&spec).unwrap();
        let sa = symmetric_family_surface(&spec).unwrap();
        let sb = symmetric_family_surface(&partner).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let start = sample_liouville(&sa, &mut rng);
        let moved = transport_half_twist(&spec, &partner, &start).unwrap();
        let back = transport_half_twist(&partner, &spec, &moved).unwrap();
        assert_eq!(back.cell, start.cell);
        assert!(moved
            .frame
            .compose(&start.frame.inverse())
            .deviation_from_identity()
            < 1e-15);
        let config = TraceConfig { max_time: 6.0e4, max_crossings: Some(10_000) };
        let ta = trace(&sa, start, &config).unwrap();
        let tb = trace(&sb, moved, &config).unwrap();
        assert_eq!(ta.crossings.len(), 10_000);
        assert_eq!(tb.crossings.len(), 10_000);
        for (i, (a, b)) in ta.crossings.iter().zip(&tb.crossings).enumerate() {
            assert_eq!(a.label, b.label, "label mismatch at crossing {i}");
            assert!(
                (a.t - b.t).abs() <= 1e-8 * (i + 1) as f64,
                "crossing {i}: dt = {:e}",
                a.t - b.t
            );
        }
        // Statistical cross-check on independent seeds.
        let horizon = 3.0e4;
        let run = |s: &Surface, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = sample_liouville(s, &mut rng);
            let t = trace(s, v, &TraceConfig::for_time(horizon)).unwrap();
            Melody::from_crossings(&t.crossings, horizon, s.gamma().iter().map(|(_, l)| l.to_string()))
                .unwrap()
        };
        let ma = run(&sa, 101);
        let mb = run(&sb, 202);
        let report = isomelody_report(&ma, &mb, &default_battery(&ma), 0.01).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent, "\n{}", report.table());
    }

    #[test]
    fn half_twist_pair_same_arcs_but_different_crossing_curves() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let partner = half_twist_partner(&spec).unwrap();
        let sa = symmetric_family_surface(&spec).unwrap();
        let sb = symmetric_family_surface(&partner).unwrap();
        // Isomelodic partners share every k-step orthospectrum: the
        // sheet-swapping involution matches arcs of equal length.
        for k in [1, 2] {
            let l_max = if k == 1 { 4.5 } else { 5.6 };
            let oa = crate::arcs::orthospectrum_oracle(&sa, k, l_max, 40_000_000).unwrap();
            let ob = crate::arcs::orthospectrum_oracle(&sb, k, l_max, 40_000_000).unwrap();
            assert_eq!(oa.len(), ob.len());
            for ((la, ma), (lb, mb)) in oa.iter().zip(&ob) {
                assert!((la - lb).abs() < 1e-9);
                assert_eq!(ma, mb);
            }
        }
        // What the melody cannot hear: the feet of the arcs moved by half
        // the cuff, so the shortest closed geodesic through alpha differs
        // and the surfaces are not isometric.
        let ca = crossing_curve_lengths(&sa, 0, 4.5, 10_000_000).unwrap();
        let cb = crossing_curve_lengths(&sb, 0, 4.5, 10_000_000).unwrap();
        assert!(
            (ca[0] - cb[0]).abs() > 1e-3,
            "shortest crossing curves coincide: {} vs {}",
            ca[0],
            cb[0]
        );
    }

    #[test]
    fn crossing_arc_feet_slide_with_the_twist() {
        // Oracle for the foot-gap data behind crossing_curve_lengths:
        // twisting alpha by delta shifts the gap of every opposite-side
        // arc by exactly +-delta mod l, and leaves the lengths alone.
        let delta = 0.1;
        let mut q = family();
        q.twist_alpha += delta;
        let sa = symmetric_family_surface(&symmetric_family_marimba(family()).unwrap()).unwrap();
        let sb = symmetric_family_surface(&symmetric_family_marimba(q).unwrap()).unwrap();
        let l = 3.2;
        let feet = |s: &Surface| -> Vec<(f64, f64)> {
            enumerate_arc_classes(s, 1, 4.5, 10_000_000)
                .unwrap()
                .iter()
                .filter(|a| {
                    a.foot_start.0 == 0
                        && a.foot_end.0 == 0
                        && (a.foot_start.2 - a.foot_end.2).abs() < 1e-6
                })
                .map(|a| (a.length, (a.foot_start.1 - a.foot_end.1).rem_euclid(l)))
                .collect()
        };
        let fa = feet(&sa);
        let fb = feet(&sb);
        assert_eq!(fa.len(), fb.len());
        assert!(!fa.is_empty());
        let mut used = vec![false; fb.len()];
        for (la, ga) in &fa {
            let hit = fb.iter().enumerate().position(|(i, (lb, gb))| {
                !used[i]
                    && (la - lb).abs() < 1e-9
                    && [delta, -delta]
                        .iter()
                        .any(|d| ((ga + d - gb).rem_euclid(l)).min(l - (ga + d - gb).rem_euclid(l)) < 1e-9)
            });
            let hit = hit.expect("no twisted partner arc");
            used[hit] = true;
        }
    }

    #[test]
    fn transport_rejects_on_gamma_and_non_partners() {
        let spec = symmetric_family_marimba(family()).unwrap();
        let partner = half_twist_partner(&spec).unwrap();
        let surface = symmetric_family_surface(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = sample_cross_section(&surface, &mut rng);
        let (on_curve, _) = crate::flow::cross_section_to_interior(&surface, &cs);
        assert!(matches!(
            transport_half_twist(&spec, &partner, &on_curve),
            Err(ConstructionError::OnGamma)
        ));
        assert!(matches!(
            transport_half_twist(&spec, &spec, &sample_liouville(&surface, &mut rng)),
            Err(ConstructionError::NotAPartner)
        ));
    }

    #[test]
    fn trivial_cover_is_the_base_spec() {
        let base = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4"), (1, "E4")]);
        let cover = cyclic_cover(&base, &CoverCocycle { weights: vec![1, 1, 0], n: 1 }).unwrap();
        assert_eq!(cover, base);
    }

    #[test]
    fn cover_scales_euler_characteristic_and_gamma() {
        let base = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4"), (1, "E4")]);
        let c = CoverCocycle { weights: vec![1, 1, 0], n: 3 };
        let cover = cyclic_cover(&base, &c).unwrap();
        assert_eq!(cover.euler_characteristic(), -6);
        let sb = crate::surface::build_surface(&base).unwrap();
        let sc = crate::surface::build_surface(&cover).unwrap();
        assert_eq!(sc.cells.len(), 3 * sb.cells.len());
        assert!((sc.area() - 3.0 * sb.area()).abs() < 1e-9);
        assert!((sc.gamma_length() - 3.0 * sb.gamma_length()).abs() < 1e-12);
        // Each label marks one cycle of three lifted cuffs.
        assert_eq!(sc.gamma().len(), 6);
    }

    #[test]
    fn cover_rejects_bad_cocycles() {
        let base = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4")]);
        assert!(matches!(
            cyclic_cover(&base, &CoverCocycle { weights: vec![3, 1, 0], n: 3 }),
            Err(ConstructionError::CocycleOrderViolation { gluing: 0, .. })
        ));
        assert!(matches!(
            cyclic_cover(&base, &CoverCocycle { weights: vec![1, 1], n: 3 }),
            Err(ConstructionError::WeightCountMismatch { .. })
        ));
    }

    #[test]
    fn lifted_melody_projects_bit_exactly() {
        let base = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4"), (1, "E4")]);
        let c = CoverCocycle { weights: vec![1, 1, 0], n: 3 };
        let cover = cyclic_cover(&base, &c).unwrap();
        let sb = crate::surface::build_surface(&base).unwrap();
        let sc = crate::surface::build_surface(&cover).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = sample_liouville(&sb, &mut rng);
        let lifted = lift_state(&base, &c, &start, 1).unwrap();
        let config = TraceConfig { max_time: 5.0e3, max_crossings: None };
        let tb = trace(&sb, start, &config).unwrap();
        let tc = trace(&sc, lifted, &config).unwrap();
        assert_eq!(tb.crossings.len(), tc.crossings.len());
        for (a, b) in tb.crossings.iter().zip(&tc.crossings) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.t, b.t, "crossing times must project bit-exactly");
            assert_eq!(a.x, b.x);
            assert_eq!(a.gluing, project_gluing(&c, b.gluing));
        }
        let (projected, sheet) = project_state(&base, &c, &tc.end).unwrap();
        assert!(sheet < 3);
        assert_eq!(projected.cell, tb.end.cell);
        assert!(projected
            .frame
            .compose(&tb.end.frame.inverse())
            .deviation_from_identity()
            < 1e-15);
    }

    #[test]
    fn lift_sheet_wraps_and_rejects_out_of_range() {
        let base = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4")]);
        let c = CoverCocycle { weights: vec![1, 1, 0], n: 3 };
        let sb = crate::surface::build_surface(&base).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = sample_liouville(&sb, &mut rng);
        let at0 = lift_state(&base, &c, &start, 0).unwrap();
        let atn = lift_state(&base, &c, &start, 3).unwrap();
        assert_eq!(at0.cell, atn.cell);
        assert!(matches!(
            lift_state(&base, &c, &start, 4),
            Err(ConstructionError::SheetOutOfRange { sheet: 4, n: 3 })
        ));
    }
}
