//! Kicked cesium vapour magnetometer in the spin-exchange-relaxation-free
//! regime.

mod angular;
mod constants;
mod model;
mod propagate;

pub use angular::{clebsch_gordan, wigner_6j};
pub use constants::CesiumConstants;
pub use model::{c2_coefficient, o_coefficient, HyperfineBasis, SerfModel, SerfParams};
pub use propagate::{
    doppler_nodes, effective_kick_strength, improvement, sensitivity_report, thermal_initial_state, Readout, SensitivityPoint, SerfPropagator,
    SerfSample, SerfSchedule, SerfState,
};
