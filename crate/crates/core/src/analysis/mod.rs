//! Estimates of the functional-inequality constants and diagnostics of
//! computed solutions: exponential decay, slab growth and uniqueness.
//!
//! Discrete constants are computed on finite-dimensional spaces and are
//! reported as surrogates, not certified bounds for the continuous ones.

mod constants;
mod decay;
mod eigen;
mod uniqueness;

pub use constants::{
    bogovskii_battery, bogovskii_bound, bogovskii_solve, embedding_bound, embedding_ratio, korn_constant, mean_free,
    poincare_constant, section_flux_rows, unit_slab_layout, BogovskiiReport, BogovskiiSolution, EmbeddingEstimate,
    EmbeddingWindow, KornEstimate, MeanFree, PoincareEstimate,
};
pub use decay::{
    decay_profile, growth_profile, log_linear_fit, y_minus, y_plus, DecayReport, DecayVerdict, GrowthReport,
    GrowthRow, LogLinearFit, ZERO_ENERGY,
};
pub use eigen::{lanczos_largest, EigenEstimate};
pub use uniqueness::{
    bracket_phi0, probe_at, saint_venant_check, truncated_energy, uniqueness_probe, BracketSetup, Phi0Bracket,
    ProbeReport, ProbeRun, ProbeStart, ProbeVerdict, SaintVenantReport, SaintVenantVerdict, GROWTH_SLOPE_TOL,
    TRIVIAL_TOL,
};

use crate::error::{Error, Result};

/// A surrogate for one of the implicit constants.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalConstant {
    pub name: String,
    pub value: Option<f64>,
    pub provenance: String,
}

/// Constants of the functional inequalities with their surrogates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsReport {
    /// Poincaré constant of the zero-flux slip space.
    pub m1: f64,
    /// Lower estimate of the L⁴ embedding constant.
    pub m4: f64,
    /// Bogovskii bound on the unit slab.
    pub m5: f64,
    /// Korn constant `𝔠 ∈ (0, 2]`.
    pub korn_c: f64,
    /// `𝔠/2` minus the certified smallness ratio, when one was supplied.
    pub coercivity_margin: Option<f64>,
    pub empirical: Vec<EmpiricalConstant>,
}

impl ConstantsReport {
    /// `2(1 + M1²)/𝔠`, the constant of the a-priori bound.
    pub fn apriori_constant(&self) -> f64 {
        2.0 * (1.0 + self.m1 * self.m1) / self.korn_c
    }

    pub fn push_empirical(&mut self, name: &str, value: Option<f64>, provenance: &str) {
        self.empirical.push(EmpiricalConstant { name: name.into(), value, provenance: provenance.into() });
    }

    /// Checks `𝔠 ∈ (0, 2]` and positivity of the other constants.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.korn_c > 0.0 && self.korn_c <= 2.0 + 1e-12) {
            problems.push(format!("korn_c = {} outside (0, 2]", self.korn_c));
        }
        for (name, v) in [("M1", self.m1), ("M4", self.m4), ("M5", self.m5)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} = {v} is not positive"));
            }
        }
        for e in &self.empirical {
            if e.value.is_some_and(|v| !(v > 0.0)) {
                problems.push(format!("{} = {:?} is not positive", e.name, e.value));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}
