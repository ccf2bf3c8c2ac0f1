pub mod baseline;
pub mod cli;
pub mod dataset;
pub mod edf;
pub mod hyperopt;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod service;
pub mod synth;
