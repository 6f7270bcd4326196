//! Sample-quality metrics and toy figure data.

mod energy;
mod figure;
mod modes;

pub use energy::energy_distance;
pub use figure::{emit_toy_figure, potential_grid, FigureFiles, GRID_HALF_WIDTH, GRID_SPACING};
pub use modes::{mode_coverage, ModeReport, DEFAULT_RADIUS};
