//! Inverse hearing: statistics of return gaps.
//!
//! The k-step gaps of a single-note melody converge in distribution to a
//! mixture of per-arc model CDFs, one per homotopy class of k-step arcs,
//! each depending only on the total labeled length and the arc's
//! orthogeodesic length. Peeling the empirical CDF against the model
//! recovers the k-step orthospectrum from sound alone.

use crate::melody::Melody;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("need more than {0} notes")]
    TooFewNotes(usize),
    #[error("quadrature schemes disagree by {0:.3e} (> 1e-6)")]
    QuadratureNotConverged(f64),
    #[error("residual dips to {0:.3e}, below -3x noise: model mismatch (wrong total length or k?)")]
    NegativeResidual(f64),
    #[error("no arc detected above the noise threshold")]
    NoDetection,
    #[error("operation needs a single-note melody")]
    MultiLabel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalCDF {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n: usize,
}

impl EmpiricalCDF {
    pub fn from_samples(samples: &[f64], grid: Vec<f64>) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let values = grid
            .iter()
            .map(|&t| sorted.partition_point(|&s| s <= t) as f64 / n as f64)
            .collect();
        EmpiricalCDF { grid, values, n }
    }

    /// Sup distance on the common refinement of two CDFs sharing a grid.
    pub fn sup_distance(&self, other: &EmpiricalCDF) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Uniform grid on [0, hi] with `points` entries.
pub fn uniform_grid(hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect()
}

/// Empirical CDF of the k-step gaps t_{i+k} - t_i of a melody.
pub fn gap_cdf(m: &Melody, k: usize, grid: Vec<f64>) -> Result<EmpiricalCDF, SpectraError> {
    assert!(k >= 1);
    if m.notes.len() <= k {
        return Err(SpectraError::TooFewNotes(k));
    }
    let gaps: Vec<f64> = m
        .notes
        .windows(k + 1)
        .map(|w| w[k].1 - w[0].1)
        .collect();
    Ok(EmpiricalCDF::from_samples(&gaps, grid))
}

/// Model CDF of the gap contributed by one arc class of orthogeodesic
/// length `l_arc` on a marimba of total labeled length `l_gamma`.
///
/// Computed in the half-plane model with the arc's two boundary lifts in
/// standard position: the unit half-circle and the concentric half-circle
/// of radius e^{l_arc}. For a start point at arclength u from the apex of
/// the unit circle, the directions reaching the outer circle within time T
/// form an interval whose |sin|-weighted measure has a closed form; one
/// numerical integral over u remains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcCDFModel {
    pub l_gamma: f64,
    pub l_arc: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// |sin|-weighted measure of directions at the point of gamma_0 with
/// arclength coordinate u that reach the circle of radius big_r within
/// time T. Zero when the distance to the outer circle exceeds T.
fn direction_measure(u: f64, t_ball: f64, big_r: f64) -> f64 {
    let x0 = u.tanh();
    let y = 1.0 / u.cosh();
    // Endpoints at hyperbolic distance exactly T form the Euclidean circle
    // centered at (x0, y cosh T) with radius y sinh in T; intersect it with
    // |w| = big_r.
    let a = 2.0 * x0 * big_r;
    let b = 2.0 * y * t_ball.cosh() * big_r;
    let c = big_r * big_r + 1.0;
    let h = a.hypot(b);
    if c >= h {
        // Ball strictly inside the outer circle: nothing reaches it.
        return 0.0;
    }
    let mid = b.atan2(a);
    let half = (c / h).acos();
    let mut coses = [0.0f64; 2];
    for (slot, alpha) in [mid - half, mid + half].into_iter().enumerate() {
        let px = big_r * alpha.cos();
        let py = big_r * alpha.sin();
        // Tangent at z of the geodesic through z=(x0,y) and P, oriented
        // toward P; x is monotone along a half-circle geodesic.
        let dir = if (px - x0).abs() < 1e-14 {
            // Vertical geodesic, pointing up (P is farther out).
            (0.0, if py > y { 1.0 } else { -1.0 })
        } else {
            let cc = (big_r * big_r - 1.0) / (2.0 * (px - x0));
            let tx = -y;
            let ty = x0 - cc;
            let norm = tx.hypot(ty);
            if px > x0 {
                (-tx / norm, -ty / norm)
            } else {
                (tx / norm, ty / norm)
            }
        };
        // Angle against the tangent of gamma_0 at z.
        let t0 = (-y, x0);
        coses[slot] = t0.0 * dir.0 + t0.1 * dir.1;
    }
    (coses[0] - coses[1]).abs()
}

/// Half-width of the support in u at gap bound T: beyond it even the
/// nearest point of the outer circle is out of reach.
fn support_halfwidth(t: f64, l_arc: f64) -> f64 {
    // sinh d(u) = sinh(l_arc) cosh(u); solve d(U) = T.
    let r = t.sinh() / l_arc.sinh();
    if r <= 1.0 {
        0.0
    } else {
        r.acosh()
    }
}

fn model_value_gauss(t: f64, l_arc: f64, l_gamma: f64) -> f64 {
    let u_max = support_halfwidth(t, l_arc);
    if u_max == 0.0 {
        return 0.0;
    }
    let big_r = l_arc.exp();
    // Substitute u = U sin(pi s / 2) to regularize the square-root edge,
    // then composite 5-point Gauss-Legendre in s.
    const NODES: [(f64, f64); 5] = [
        (-0.906179845938664, 0.236926885056189),
        (-0.538469310105683, 0.478628670499366),
        (0.0, 0.568888888888889),
        (0.538469310105683, 0.478628670499366),
        (0.906179845938664, 0.236926885056189),
    ];
    let panels = 48;
    let mut total = 0.0;
    for p in 0..panels {
        let s0 = p as f64 / panels as f64;
        let s1 = (p + 1) as f64 / panels as f64;
        let hw = 0.5 * (s1 - s0);
        let mid = 0.5 * (s0 + s1);
        for (xi, w) in NODES {
            let s = mid + hw * xi;
            let arg = std::f64::consts::FRAC_PI_2 * s;
            let u = u_max * arg.sin();
            let jac = u_max * std::f64::consts::FRAC_PI_2 * arg.cos();
            total += w * hw * direction_measure(u, t, big_r) * jac;
        }
    }
    // Both halves u and -u contribute equally; density |sin|/(4 l_gamma).
    2.0 * total / (4.0 * l_gamma)
}

fn model_value_simpson(t: f64, l_arc: f64, l_gamma: f64) -> f64 {
    let u_max = support_halfwidth(t, l_arc);
    if u_max == 0.0 {
        return 0.0;
    }
    let big_r = l_arc.exp();
    let n = 2000; // even
    let h = 1.0 / n as f64;
    let f = |s: f64| {
        let arg = std::f64::consts::FRAC_PI_2 * s;
        let u = u_max * arg.sin();
        let jac = u_max * std::f64::consts::FRAC_PI_2 * arg.cos();
        direction_measure(u, t, big_r) * jac
    };
    let mut total = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(i as f64 * h);
    }
    total *= h / 3.0;
    2.0 * total / (4.0 * l_gamma)
}

/// Evaluate the model on a grid, cross-checking two quadrature schemes.
pub fn arc_cdf_model(l_gamma: f64, l_arc: f64, grid: Vec<f64>) -> Result<ArcCDFModel, SpectraError> {
    assert!(l_gamma > 0.0 && l_arc > 0.0);
    let mut values = Vec::with_capacity(grid.len());
    let mut worst: f64 = 0.0;
    for (i, &t) in grid.iter().enumerate() {
        let g = model_value_gauss(t, l_arc, l_gamma);
        // Cross-check a spread of grid points with an unrelated scheme.
        if i % 97 == 0 || i + 1 == grid.len() {
            let s = model_value_simpson(t, l_arc, l_gamma);
            worst = worst.max((g - s).abs());
        }
        values.push(g);
    }
    if worst > 1e-6 {
        return Err(SpectraError::QuadratureNotConverged(worst));
    }
    Ok(ArcCDFModel { l_gamma, l_arc, grid, values })
}

/// Least-squares fit of one component to the residual near a coarse
/// bottom index: scan lengths at quarter-step resolution, pick the integer
/// multiplicity by projection. Returns (length, multiplicity, score).
fn scan_fit(
    residual: &[f64],
    grid: &[f64],
    bottom: usize,
    window: usize,
    extent: usize,
    l_gamma: f64,
) -> (f64, usize, f64) {
    let step = grid[1] - grid[0];
    let w_lo = bottom.saturating_sub(6);
    let w_hi = (bottom + extent).min(window);
    let mut best = (f64::INFINITY, grid[bottom], 1usize);
    for j in -48i32..=12 {
        let l = grid[bottom] + j as f64 * step / 4.0;
        if l <= 0.0 {
            continue;
        }
        let vals: Vec<f64> = (w_lo..=w_hi).map(|i| model_value_gauss(grid[i], l, l_gamma)).collect();
        let rv: f64 = (w_lo..=w_hi).map(|i| residual[i] * vals[i - w_lo]).sum();
        let vv: f64 = vals.iter().map(|v| v * v).sum();
        if vv == 0.0 {
            continue;
        }
        let m = ((rv / vv).round() as i64).max(1) as usize;
        let score: f64 = (w_lo..=w_hi)
            .map(|i| {
                let d = residual[i] - m as f64 * vals[i - w_lo];
                d * d
            })
            .sum();
        if score < best.0 {
            best = (score, l, m);
        }
    }
    (best.1.max(grid[1] * 0.5), best.2, best.0)
}

/// Subtract (or with negative `count`, restore) `count` copies of the
/// model for one arc from the residual, tracking the subtracted total.
fn apply_component(
    residual: &mut [f64],
    subtracted: &mut [f64],
    grid: &[f64],
    l_gamma: f64,
    l_arc: f64,
    count: f64,
) -> Result<(), SpectraError> {
    let model = arc_cdf_model(l_gamma, l_arc, grid.to_vec())?;
    for ((r, s), v) in residual.iter_mut().zip(subtracted.iter_mut()).zip(&model.values) {
        *r -= count * v;
        *s += count * v;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub length: f64,
    pub multiplicity: usize,
    /// Detection excess over the noise floor, in sigmas.
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthospectrumEstimate {
    pub entries: Vec<SpectrumEntry>,
    pub k: usize,
    /// Largest |residual| left on the trusted window after peeling.
    pub max_residual: f64,
    /// Upper end of the trusted window.
    pub window_end: f64,
}

/// Peel an empirical k-step gap CDF into arc detections: repeatedly find
/// where the residual leaves the noise band, read off the arc length at
/// the bottom of the rise, subtract that arc's model, and repeat. Repeat
/// detections at an existing length are multiplicity increments.
pub fn peel_orthospectrum(
    cdf: &EmpiricalCDF,
    l_gamma: f64,
    k: usize,
    max_entries: usize,
    detect_sigma: f64,
) -> Result<OrthospectrumEstimate, SpectraError> {
    let n = cdf.n as f64;
    let grid = &cdf.grid;
    let mut residual = cdf.values.clone();
    // Trusted window: up to the 90th percentile of observed gaps; the tail
    // is under-sampled and models pile up there.
    let top = cdf.values.last().copied().unwrap_or(0.0);
    let window = cdf
        .values
        .iter()
        .position(|&v| v >= 0.9 * top)
        .unwrap_or(grid.len() - 1);
    let noise = |phi: f64| ((phi.clamp(0.0, 1.0) * (1.0 - phi.clamp(0.0, 1.0)) / n).sqrt()).max(1.0 / n);
    // Bottom locations are only known to grid resolution; a misplaced
    // subtraction leaves behind residue of size (local slope) x (step).
    // Track the already-subtracted total and use its local increment as a
    // discretization guard so that residue is not re-detected as an arc.
    let mut subtracted = vec![0.0f64; grid.len()];
    // Refined lengths are good to a quarter step, so the leftover is about
    // (local subtracted slope) x (step/4); half the two-step increment
    // covers it with a 4x margin without drowning later detections.
    let guard = |sub: &[f64], i: usize| {
        let hi = sub[(i + 1).min(sub.len() - 1)];
        let lo = sub[i.saturating_sub(1)];
        0.5 * (hi - lo)
    };

    let mut entries: Vec<SpectrumEntry> = Vec::new();
    let mut total_mult = 0;
    while total_mult < max_entries {
        // Detection: first trusted grid point where the residual exceeds
        // the noise plus discretization floor.
        let mut detect = None;
        for i in 0..=window {
            let sigma = noise(cdf.values[i]);
            if residual[i] > detect_sigma * sigma + guard(&subtracted, i) {
                detect = Some((i, residual[i] / sigma));
                break;
            }
        }
        let Some((i_det, conf)) = detect else { break };
        #[cfg(feature = "peel-debug")]
        eprintln!(
            "detect at grid[{i_det}]={:.5}, residual {:.3e}",
            grid[i_det], residual[i_det]
        );
        // Walk back to the bottom of the rise: the last index (going down)
        // still above one noise unit.
        let mut bottom = i_det;
        while bottom > 0
            && residual[bottom - 1] > noise(cdf.values[bottom - 1]) + guard(&subtracted, bottom - 1)
        {
            bottom -= 1;
        }
        let step = grid[1] - grid[0];
        // Sub-grid refinement: fit (length, integer multiplicity) to the
        // residual by least squares, scanning quarter-step shifts around
        // the coarse estimate. Oriented arcs come in mirror pairs, so
        // integer amplitudes are the model.
        // Undiscovered neighbors above can contaminate a long window, so
        // the first fit stays short; back-fitting widens it once the
        // neighborhood is known.
        let (l_arc, mult, _) = scan_fit(&residual, grid, bottom, window, 16, l_gamma);
        // A repeat detection within a grid step of a known entry raises its
        // multiplicity instead of adding an entry.
        let mut use_length = l_arc;
        let mut merged = false;
        for e in &mut entries {
            if (e.length - l_arc).abs() <= step {
                e.multiplicity += mult;
                use_length = e.length;
                merged = true;
                break;
            }
        }
        apply_component(&mut residual, &mut subtracted, grid, l_gamma, use_length, mult as f64)?;
        if !merged {
            entries.push(SpectrumEntry { length: l_arc, multiplicity: mult, confidence: conf });
        }
        total_mult += mult;

        // Back-fitting sweep: neighbors bias each other's first fit when
        // they sit close on the grid, so re-fit every entry against the
        // residual with only the others subtracted.
        for _ in 0..2 {
            for idx in 0..entries.len() {
                let (l_old, m_old) = (entries[idx].length, entries[idx].multiplicity);
                apply_component(&mut residual, &mut subtracted, grid, l_gamma, l_old, -(m_old as f64))?;
                let b = grid.partition_point(|&t| t < l_old).min(window);
                // Cap the window just below the nearest entry above; that
                // one is subtracted, but its own fit error lives there.
                let next_above = entries
                    .iter()
                    .filter(|e| e.length > l_old + step)
                    .map(|e| e.length)
                    .fold(f64::INFINITY, f64::min);
                // Keep the window short even with no known entry above:
                // undiscovered components may lurk there.
                let extent = if next_above.is_finite() {
                    let cap = grid.partition_point(|&t| t < next_above);
                    cap.saturating_sub(b + 3).clamp(8, 16)
                } else {
                    16
                };
                let (l_new, m_new, _) = scan_fit(&residual, grid, b, window, extent, l_gamma);
                apply_component(&mut residual, &mut subtracted, grid, l_gamma, l_new, m_new as f64)?;
                entries[idx].length = l_new;
                total_mult = total_mult + m_new - m_old;
                entries[idx].multiplicity = m_new;
            }
        }
        // Entries that drifted together are one arc with multiplicity.
        entries.sort_by(|a, b| a.length.partial_cmp(&b.length).unwrap());
        let mut i = 1;
        while i < entries.len() {
            if entries[i].length - entries[i - 1].length <= step {
                entries[i - 1].multiplicity += entries[i].multiplicity;
                entries.remove(i);
            } else {
                i += 1;
            }
        }
        #[cfg(feature = "peel-debug")]
        eprintln!("  bottom {:.5}, merged {merged}, use_length {use_length:.5}", grid[bottom]);
        // Model mismatch guard.
        let bad = residual[..=window]
            .iter()
            .enumerate()
            .map(|(i, &r)| r + 3.0 * detect_sigma * noise(cdf.values[i]) + guard(&subtracted, i))
            .fold(f64::INFINITY, f64::min);
        if bad < 0.0 {
            let min_res = residual[..=window].iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(SpectraError::NegativeResidual(min_res));
        }
    }
    if entries.is_empty() {
        return Err(SpectraError::NoDetection);
    }
    let max_residual = residual[..=window].iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(OrthospectrumEstimate { entries, k, max_residual, window_end: grid[window] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparatingVerdict {
    Separating,
    NonseparatingOrNongeneric,
}

/// Gap minima split by parity. On a separating curve the trajectory
/// alternates sides, so even and odd gaps sample the two sides' arc
/// spectra and their minima differ; on a non-separating curve both
/// parities see every arc.
pub fn classify_separating(m: &Melody, threshold: f64) -> Result<(SeparatingVerdict, f64, f64), SpectraError> {
    let times = single_note_times(m)?;
    let mut m_even = f64::INFINITY;
    let mut m_odd = f64::INFINITY;
    for (j, w) in times.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if j % 2 == 0 {
            m_even = m_even.min(gap);
        } else {
            m_odd = m_odd.min(gap);
        }
    }
    let verdict = if (m_even - m_odd).abs() > threshold {
        SeparatingVerdict::Separating
    } else {
        SeparatingVerdict::NonseparatingOrNongeneric
    };
    Ok((verdict, m_even, m_odd))
}

fn single_note_times(m: &Melody) -> Result<Vec<f64>, SpectraError> {
    let first = &m.notes.first().ok_or(SpectraError::TooFewNotes(1))?.0;
    if m.notes.iter().any(|(l, _)| l != first) {
        return Err(SpectraError::MultiLabel);
    }
    Ok(m.notes.iter().map(|(_, t)| *t).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SideReport {
    /// Fraction of trajectory time spent on this side.
    pub time_fraction: f64,
    /// area(side) = area(total) x time fraction.
    pub area: f64,
    /// Gaps spent on this side (the side's 1-step return gaps).
    pub gaps: Vec<f64>,
}

/// Split a single-note melody over a separating curve into its two sides
/// by gap parity and recover each side's area from its time share.
pub fn single_note_sides(m: &Melody, area_total: f64) -> Result<[SideReport; 2], SpectraError> {
    let times = single_note_times(m)?;
    if times.len() < 3 {
        return Err(SpectraError::TooFewNotes(2));
    }
    let mut sums = [0.0f64; 2];
    let mut gaps: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (j, w) in times.windows(2).enumerate() {
        let gap = w[1] - w[0];
        sums[j % 2] += gap;
        gaps[j % 2].push(gap);
    }
    let total = sums[0] + sums[1];
    let report = |i: usize, gaps: Vec<f64>| SideReport {
        time_fraction: sums[i] / total,
        area: area_total * sums[i] / total,
        gaps,
    };
    let [g0, g1] = gaps;
    Ok([report(0, g0), report(1, g1)])
}
