//! Fixed-architecture perceptron: `input -> ReLU(h) -> ReLU(h) -> output`,
//! with manual backprop, Adam and Polyak averaging. All arithmetic is `f64`.

pub mod adam;
pub mod mlp;
pub mod snapshot;

pub use adam::AdamState;
pub use mlp::{init_params, soft_update, GradBundle, Layer, MlpParams, OutputActivation, ParamGrads};
pub use snapshot::{read_snapshot, write_snapshot};
