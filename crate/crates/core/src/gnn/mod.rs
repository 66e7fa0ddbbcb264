//! GraphSAGE-style expressibility regressor.
//!
//! Node pipeline: three mean-aggregation message-passing layers followed by
//! mean pooling. Global pipeline: three dense layers. The two are
//! concatenated and passed through a hidden dense layer and a scalar
//! regression output. All activations are ReLU except the output.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::CHECKPOINT_SCHEMA_VERSION;
pub use loss::{huber_grad, huber_loss, rmse};
pub use model::{Batch, Dense, ForwardCache, GnnModel, ModelConfig, Neighborhood, SageLayer, Weights};
pub use optim::{Adam, AdamConfig, PlateauConfig, ReduceOnPlateau};
pub use train::{split_indices, train, EpochRecord, TrainConfig, TrainHistory};

use crate::circuit::ParameterizedCircuit;
use crate::error::Result;
use crate::graph::{apply_normalizer, encode};

/// Encode, normalize with the model's statistics, and run the model.
pub fn predict(model: &GnnModel, circuit: &ParameterizedCircuit) -> Result<f64> {
    let graph = apply_normalizer(&encode(circuit, "")?, &model.norm_stats)?;
    let batch = Batch::new(&[&graph], model.config.neighborhood)?;
    Ok(model.forward(&batch)?[0])
}
