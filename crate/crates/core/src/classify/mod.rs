//! Shooting from infinity, scans of the `(f₁, g₁)` plane and the boundary
//! between complete and incomplete instantons.

mod scan;
mod shoot;

pub use scan::{
    boundary_anchor, boundary_curve, classify_cell, comparison_order, complete_side, on_boundary,
    scan_region, BoundaryPoint, Cell, ClassificationMap, ComparisonReport, ScanOptions,
};
pub use shoot::{
    asymptotic_remainders, default_end_time, end_seed, end_system_jacobian, shoot_backward,
    EndConditions, EndState, Shot, CLOSURE_TOL,
};
