//! From-scratch numeric core: the gated recurrent cell, the stacked
//! forecasting model, BPTT, and SGD/Adam updates.

mod cell;
mod checkpoint;
mod model;
mod optim;
mod params;

pub use cell::{lstm_cell_backward, lstm_cell_forward, CellCache, LayerGrads};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use model::{model_backward, model_forward, mse_loss, ForwardCaches};
pub use optim::{adam_step, sgd_step, AdamState};
pub use params::{
    init_params, Gradients, LstmLayerParams, ModelParams, GATE_CANDIDATE, GATE_FORGET, GATE_INPUT,
    GATE_OUTPUT,
};
