use candle_core::{DType, Device, Tensor};

use super::params::ParamStore;
use super::SegModel;
use crate::data::InputSpec;
use crate::error::Result;

/// Predicts the same logit everywhere; a floor for evaluation sanity checks.
#[derive(Debug)]
pub struct ConstantModel {
    pub logit: f64,
    input: InputSpec,
    side: usize,
    params: ParamStore,
}

impl ConstantModel {
    pub fn new(logit: f64, input: InputSpec, side: usize) -> Self {
        Self {
            logit,
            input,
            side,
            params: ParamStore::new(DType::F32, Device::Cpu),
        }
    }
}

impl SegModel for ConstantModel {
    fn name(&self) -> String {
        format!("constant({})", self.logit)
    }

    fn input_spec(&self) -> &InputSpec {
        &self.input
    }

    fn output_side(&self) -> usize {
        self.side
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward(&self, images: &Tensor, _prompts: &[String]) -> Result<Tensor> {
        let b = images.dim(0)?;
        Ok(Tensor::full(self.logit as f32, (b, 1, self.side, self.side), images.device())?)
    }

    fn uses_prompts(&self) -> bool {
        false
    }
}
