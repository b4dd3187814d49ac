//! Taylor-Hood P2/P1 spaces on the truncated mesh, operator assembly and
//! the saddle-point solver.

mod assembly;
mod element;
mod layout;
mod mms;
mod norms;
mod saddle;
mod sparse;

pub use assembly::{
    assemble, body_force_load, carrier_load, cell_points, convection_vector, pressure_mass, Advector, CarrierQuadrature,
    CellPoint, Form, POLY_ORDER,
};
pub use element::{lambda_gradients, map_point, p2_gradients, p2_values, triangle_rule, RefPoint, NODE_LAMBDA};
pub use layout::{
    build_spaces, EndCondition, FunctionSpaceLayout, LocalDof, MixedField, NodeDofs, NormalMode, SpaceOptions,
    WallCondition,
};
pub use mms::{manufactured_errors, mms_convergence, solve_manufactured, Manufactured, MmsLevel, MmsStudy, MMS_HALF_LENGTH};
pub use norms::{column_fluxes, evaluate_norms, integrate_cells, station_flux, FieldSource, NormTable};
pub use saddle::{solve_saddle, Gauge, SaddleSystem, RESIDUAL_TOL};
pub use sparse::{OperatorRole, SparseOperator};
pub(crate) use norms::vertical_section;
pub(crate) use sparse::dot;
