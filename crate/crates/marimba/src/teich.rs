//! Twist deformations of a single cuff and their effect on 2-step arcs.
//!
//! For a 2-step arc crossing a cuff once, the two halves are rigid under
//! twisting and only the along-cuff displacement d between their feet
//! changes, linearly in the twist. The arc length therefore obeys
//! cosh l(theta) = a cosh(d + theta) + b with a, b built from the half
//! lengths. Several such arcs pin the surface to an analytic subvariety:
//! eliminating theta from r >= 2 of these relations leaves r - 1 residual
//! equations that vanish exactly along the twist family.

use crate::arcs::{enumerate_arc_classes, two_step_split, ArcClass, ArcsError, OrthoArc};
use crate::spec::{MarimbaSpec, SpecError};
use crate::surface::{build_surface, SideKind, Surface, SurfaceError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TeichError {
    #[error("twist family needs at least two arcs, got {got}")]
    TooFewArcs { got: usize },
    #[error("arc does not cross the distinguished cuff exactly once")]
    NotCrossingOnce,
    #[error("cosh-length {value} is at most the floor {floor} of arc {index}")]
    OutOfRange { index: usize, value: f64, floor: f64 },
    #[error("gluing {0} does not exist or carries no label")]
    BadCuff(usize),
    #[error(transparent)]
    Arcs(#[from] ArcsError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

/// Half lengths and signed foot offset of a 2-step arc crossing the
/// distinguished cuff. `d` is measured along the canonical cuff
/// orientation and signed so that adding `theta` to the spec twist of the
/// cuff replaces d by d + theta.
pub fn two_step_components(
    surface: &Surface,
    cuff: usize,
    arc: &OrthoArc,
) -> Result<(f64, f64, f64), TeichError> {
    let split = two_step_split(arc)?;
    // Locate the middle crossing in the word and orient its offset.
    let mut cell = arc.class.seed_cell;
    let mut hit = None;
    for &(side, branch) in &arc.class.word {
        let cs = &surface.cells[cell].sides[side];
        if let SideKind::Cuff { gluing, is_minus, segment } = cs.kind {
            if surface.gluings[gluing].label.is_some() {
                if gluing != cuff || hit.is_some() {
                    return Err(TeichError::NotCrossingOnce);
                }
                hit = Some((is_minus, segment));
            }
        }
        cell = cs.branches[branch].target_cell;
    }
    let Some((is_minus, segment)) = hit else {
        return Err(TeichError::NotCrossingOnce);
    };
    let g = &surface.gluings[cuff];
    let chart = if is_minus { &g.minus } else { &g.plus };
    let reversed = chart.segments[segment].reversed;
    let mut sign = if reversed { -1.0 } else { 1.0 };
    if is_minus {
        // Crossing from the minus chart into the plus material: extra
        // twist moves the far foot the other way in canonical coordinates.
        sign = -sign;
    }
    Ok((split.l1, split.l2, sign * split.offset))
}

/// A one-parameter twist deformation pinned by r 2-step arcs through one
/// labeled cuff. Caches the twist-invariant data of each arc at theta = 0.
#[derive(Debug, Clone)]
pub struct TwistFamily {
    pub spec: MarimbaSpec,
    pub cuff: usize,
    pub classes: Vec<ArcClass>,
    /// a_i = sinh l(alpha_i) sinh l(beta_i) for the halves of arc i.
    pub a: Vec<f64>,
    /// b_i = cosh l(alpha_i) cosh l(beta_i).
    pub b: Vec<f64>,
    /// Signed foot offsets at theta = 0.
    pub d: Vec<f64>,
    /// delta_i = d_i - d_1.
    pub delta: Vec<f64>,
}

impl TwistFamily {
    pub fn new(spec: &MarimbaSpec, cuff: usize, arcs: &[OrthoArc]) -> Result<Self, TeichError> {
        if arcs.len() < 2 {
            return Err(TeichError::TooFewArcs { got: arcs.len() });
        }
        let surface = build_surface(spec)?;
        if surface.gluings.get(cuff).is_none_or(|g| g.label.is_none()) {
            return Err(TeichError::BadCuff(cuff));
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut d = Vec::new();
        for arc in arcs {
            let (l1, l2, di) = two_step_components(&surface, cuff, arc)?;
            a.push(l1.sinh() * l2.sinh());
            b.push(l1.cosh() * l2.cosh());
            d.push(di);
        }
        let delta = d.iter().map(|di| di - d[0]).collect();
        Ok(Self {
            spec: spec.clone(),
            cuff,
            classes: arcs.iter().map(|a| a.class.clone()).collect(),
            a,
            b,
            d,
            delta,
        })
    }

    /// Length of arc i after twisting the cuff by theta.
    pub fn two_step_length(&self, i: usize, theta: f64) -> f64 {
        (self.a[i] * (self.d[i] + theta).cosh() + self.b[i]).acosh()
    }

    /// Derivative of `two_step_length` in theta, closed form.
    pub fn two_step_length_derivative(&self, i: usize, theta: f64) -> f64 {
        let x = self.a[i] * (self.d[i] + theta).cosh() + self.b[i];
        self.a[i] * (self.d[i] + theta).sinh() / (x * x - 1.0).sqrt()
    }

    /// The spec of the surface twisted by theta along the cuff.
    pub fn twisted_spec(&self, theta: f64) -> MarimbaSpec {
        let mut spec = self.spec.clone();
        spec.gluings[self.cuff].twist += theta;
        spec
    }

    /// Residual of the twist-variety equations at a vector of
    /// cosh-lengths, one per arc. Zero (to roundoff) exactly when the x_i
    /// are the cosh-lengths of the family arcs at a common twist.
    pub fn twist_variety_residual(&self, x: &[f64]) -> Result<Vec<f64>, TeichError> {
        assert_eq!(x.len(), self.a.len(), "one cosh-length per family arc");
        for (i, &xi) in x.iter().enumerate() {
            // y_i = cosh(d_i + theta) must exceed 1 for a real theta.
            if xi <= self.b[i] {
                return Err(TeichError::OutOfRange { index: i, value: xi, floor: self.b[i] });
            }
        }
        let y1 = (x[0] - self.b[0]) / self.a[0];
        let mut res = Vec::with_capacity(x.len() - 1);
        for i in 1..x.len() {
            let t = self.delta[i].tanh();
            let yi = (x[i] - self.b[i]) / (self.a[i] * self.delta[i].cosh());
            res.push(t * t * y1 * y1 - (yi - y1) * (yi - y1) - t * t);
        }
        Ok(res)
    }
}

/// Convenience: the shortest `r` 2-step arcs through `cuff` on the spec's
/// surface, suitable as a twist family.
pub fn shortest_two_step_arcs(
    spec: &MarimbaSpec,
    cuff: usize,
    r: usize,
    l_max: f64,
    budget: usize,
) -> Result<Vec<OrthoArc>, TeichError> {
    let surface = build_surface(spec)?;
    let mut arcs = enumerate_arc_classes(&surface, 2, l_max, budget)?;
    arcs.retain(|a| a.foot_start.0 == cuff && a.foot_end.0 == cuff);
    arcs.truncate(r);
    Ok(arcs)
}
