//! Model identification from measured records: closed-form least squares
//! for the static combined model, extended Kalman filtering for the
//! filter-state weights, Kalman training for the radial-basis network, and
//! per-bin scheduling on top of the weight filter.

pub mod ekf;
pub mod least_squares;
pub mod rbf_train;
pub mod schedule;

pub use ekf::{
    ekf_identify, kalman_gain, output_sensitivities, output_state_jacobian,
    output_weight_jacobian, step_weight_jacobian, weight_ekf_step, StateSensitivity,
    WeightCovariance, WeightEkfConfig, WeightEkfFit, WeightEkfState, WeightVector,
};
pub use least_squares::{
    build_regressor, fit_combined, solve_regressor, CombinedFit, Regressor, RANK_REL_TOL,
    REGRESSOR_COLUMNS,
};
pub use rbf_train::{init_rbf, train_rbf, train_rbf_from, RbfTrainConfig, RbfTrainResult};
pub use schedule::{fit_scheduled, ScheduleFit, ScheduleFitConfig};
