//! Manufactured solutions, convergence studies and fine-grid reference runs.

mod convergence;
mod mms;
mod reference;

pub use convergence::{
    convergence_study, fitted_order, manufactured_errors, pairwise_orders, FieldErrors, FieldOrders, Order,
    OrderReport, StudyConfig, ROUNDOFF_ERROR,
};
pub use mms::{mms_sources, Jet, ManufacturedCase, ManufacturedForcing};
pub use reference::{fine_grid_reference, restrict, self_convergence, state_distance, Profile, SelfConvergenceReport};
