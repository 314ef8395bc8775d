//! Simulation and training of a linear-optical quantum autoencoder.
//!
//! A single photon spread over `d` optical modes (a qudit) is sent through a
//! mesh of wave-plate two-mode gates. Training drives the photon's
//! probability of leaving in the last `d - n` "junk" modes to zero across a
//! set of training states, so that the remaining `n` modes carry the
//! compressed state.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below are the double-precision instantiations used by the experiments.

pub mod autoencoder;
pub mod error;
pub mod optics;
pub mod qudit;
pub mod scalar;
pub mod trainer;

pub use autoencoder::{cost, decode, encode, junk_probability, success_probability, EncodedState, TrainingSet};
pub use error::{QaeError, Result};
pub use optics::{
    build_mesh, drift_family, jones_matrix, mesh_unitary, prepare_state, sample_prep_settings, GateSlot, Generation,
    MeshLayout, ParameterVector, PrepSetting, PreparationFamily, WavePlate, WavePlateKind,
};
pub use qudit::{
    apply_unitary, embed_two_mode, haar_random_isometry, haar_random_state, haar_random_unitary, inner_product, Matrix,
    PureState, TwoModeGate, UnitaryMatrix,
};
pub use scalar::{wrap_degrees, Real};
pub use trainer::{
    evaluate_generalization, measure_cost, probe_gradient, train, train_from, AngleUnit, Backend, CostMeter,
    DriftSchedule, Events, GradientEstimate, Phase, StopReason, TraceRecord, TrainerConfig, TrainingSource,
    TrainingTrace,
};

pub type Complex64 = num_complex::Complex<f64>;
pub type PureState64 = PureState<f64>;
pub type UnitaryMatrix64 = UnitaryMatrix<f64>;
pub type Matrix64 = Matrix<f64>;
pub type ParameterVector64 = ParameterVector<f64>;
pub type PreparationFamily64 = PreparationFamily<f64>;
pub type PrepSetting64 = PrepSetting<f64>;
pub type TrainingSet64 = TrainingSet<f64>;
pub type TrainerConfig64 = TrainerConfig<f64>;
pub type TrainingTrace64 = TrainingTrace<f64>;
pub type DriftSchedule64 = DriftSchedule<f64>;

pub type PureState32 = PureState<f32>;
pub type UnitaryMatrix32 = UnitaryMatrix<f32>;
