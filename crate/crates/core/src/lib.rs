//! Deep feedforward network training with pluggable weight initialization,
//! TinyDigits dataset synthesis, and an experiment harness comparing
//! initialization schemes across seeds.
//!
//! ```
//! use tinynet::{init_network, Activation, CostKind, InitScheme, Matrix, Network, Orientation, RngState};
//!
//! let mut rng = RngState::new(10, 1);
//! let inits = init_network(&mut rng, &[4, 8, 3], InitScheme::sparse3(), &[]).unwrap();
//! let net = Network::from_init(inits, Activation::Tanh, CostKind::Nll).unwrap();
//! let x = Matrix::filled(0.5, 2, 4, Orientation::Row).unwrap();
//! assert_eq!(net.predict(&x).unwrap().shape(), (2, 3));
//! ```

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod init;
pub mod matrix;
pub mod nn;
pub mod rng;

pub use dataset::{generate_tinydigits, Dataset, DeformParams, DigitPattern, Samples};
pub use error::{Error, Result};
pub use experiment::{execute, ExperimentOutput, ExperimentSpec, Mode, RunRecord};
pub use init::{init_network, InitScheme, LayerInit};
pub use matrix::{Matrix, Orientation};
pub use nn::{
    compute_cost, momentum_schedule, train_best, train_epochs, Activation, CostKind, DecayKind, Layer, Network,
    TrainConfig, TrainOutcome, UpdateClock, WeightDecay,
};
pub use rng::RngState;
