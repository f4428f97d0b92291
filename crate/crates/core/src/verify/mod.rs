//! Manufactured solutions, convergence tables and reference bands.

mod convergence;
mod exact;
mod reference;

pub use convergence::{
    convergence_csv, error_vs_dofs, run_convergence, run_convergence_with, ConvergenceRow, ConvergenceSetup,
    RefinementMode,
};
pub use exact::{CaseKind, ExactValues, ManufacturedCase, ManufacturedForcing};
pub use reference::{check_bands, reference_table, Bands, ReferenceRow};

#[cfg(test)]
mod tests;
