//! Desk-scale experiments: oscillatory integrals with decay fits, and voxelized tube unions.

mod oscillatory;
mod tubes;

pub use oscillatory::{
    decay_fit, osc_evaluate, quartic_bump, Amplitude, DecayFit, DecayMode, DecayOptions, Density, OscField, OscOptions,
    XGrid, DECAY_Y_RADIUS, MAX_FREQUENCY, MAX_Y_POINTS,
};
pub use tubes::{
    tube_rasterize, union_sweep, union_volume, write_sweep_csv, Tube, TubeFamily, TubeSource, TubeSpec, BOX_HALF,
};
