//! The explicit flux carrier `g`: cutoffs, evaluators, verification and the
//! quantitative layer estimates that make the perturbation problem coercive.

pub mod cutoff;
mod field;
pub mod lemmas;
mod verify;

pub use cutoff::{mu_cutoff, pi_cutoff, HopfCutoff, TransitionCutoff, TransitionKind};
pub use field::{Branch, CarrierField, CarrierParams, CarrierSample, CutoffParams, StreamSample};
pub use lemmas::{
    certify_smallness, hardy_ratio, smallness_ratio, stream_smallness_ratio, Certification,
    CertificationPoint, LayerProfile, SweepOptions,
};
pub use verify::{
    carrier_energy, station_flux, verify_carrier, CarrierReport, Check, FluxStation, SamplingGrid,
};

use crate::fields::{VectorField, VectorSample};
use crate::geometry::ChannelGeometry;

impl VectorField for CarrierField {
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        let s = self.eval_unchecked(x);
        VectorSample { value: s.g, grad: s.grad }
    }
}

/// Largest layer thickness used by the default policy.
pub const MAX_AUTO_EPSILON: f64 = 0.45;

/// Cutoffs chosen by the default policy, with a note when the layer cannot
/// be resolved by eight cells.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyChoice {
    pub cutoffs: CutoffParams,
    pub warning: Option<String>,
}

/// Default `(ε, 𝔡)` for a mesh of size `h`.
///
/// `ε` starts at `8h`, is capped by [`MAX_AUTO_EPSILON`] and `0.45·m`, and is
/// raised until the plateau `μ = 1` is at least twice the sagitta of a wall
/// chord, so that the faceted wall stays inside the plateau where `g`
/// vanishes (bump region) or is exactly tangent. `𝔡 = 2L`.
pub fn default_cutoffs(geom: &ChannelGeometry, h: f64) -> PolicyChoice {
    let cap = MAX_AUTO_EPSILON.min(0.45 * geom.min_width);
    let mut eps = (8.0 * h).min(cap);
    let mut warning = None;
    if 8.0 * h > cap {
        warning = Some(format!(
            "layer capped at ε = {cap}; it is resolved by {:.1} cells instead of 8",
            cap / h
        ));
    }
    let sagitta = h * h * geom.max_curvature() / 8.0;
    while eps < cap {
        let plateau = HopfCutoff::new(eps).map(|m| m.plateau).unwrap_or(0.0);
        if plateau >= 2.0 * sagitta {
            break;
        }
        eps = (eps + 0.01).min(cap);
    }
    let l = geom.straight_from;
    let dist = if l > 0.0 { 2.0 * l } else { 1.0 };
    PolicyChoice { cutoffs: CutoffParams { epsilon: eps, dist }, warning }
}
