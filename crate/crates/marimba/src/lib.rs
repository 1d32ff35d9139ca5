//! Hyperbolic marimbas: closed hyperbolic surfaces decorated with labeled
//! multicurves, long geodesic traces recorded as melodies, and procedures
//! that hear geometry back out of the melodies.

pub mod hyp2;
pub mod io;
pub mod melody;
pub mod midi;
pub mod numeric;
pub mod arcs;
pub mod constructions;
pub mod flow;
pub mod spec;
pub mod spectra;
pub mod surface;
pub mod teich;
