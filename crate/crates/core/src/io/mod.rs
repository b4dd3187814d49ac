//! Legacy ASCII VTK writers and CSV report tables.

mod tables;
mod vtk;

pub use tables::{
    carrier_table, certification_table, constants_table, decay_table, growth_table, history_table, mms_table,
    norms_table, probe_table, Table,
};
pub use vtk::{write_boundary_vtk, write_carrier_vtk, write_mesh_vtk, write_solution_vtk};
