use std::collections::{BTreeMap, BTreeSet};

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prompt::stable_seed;

/// Named trainable parameters. The first dotted segment of a name is its
/// component (`text_encoder`, `image_encoder`, `aggregator`, `decoder`, ...).
#[derive(Debug, Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    frozen: BTreeSet<String>,
    dtype: DType,
    device: Device,
}

pub fn component_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

impl ParamStore {
    pub fn new(dtype: DType, device: Device) -> Self {
        Self {
            vars: BTreeMap::new(),
            frozen: BTreeSet::new(),
            dtype,
            device,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn insert(&mut self, name: String, tensor: Tensor) -> Result<Tensor> {
        let var = Var::from_tensor(&tensor.to_dtype(self.dtype)?)?;
        let t = var.as_tensor().clone();
        self.vars.insert(name, var);
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn components(&self) -> BTreeSet<&str> {
        self.vars.keys().map(|k| component_of(k)).collect()
    }

    pub fn freeze(&mut self, component: &str) {
        self.frozen.insert(component.to_string());
    }

    pub fn unfreeze(&mut self, component: &str) {
        self.frozen.remove(component);
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(component_of(name))
    }

    /// Parameters the optimizer may update.
    pub fn trainable(&self) -> Vec<(String, Var)> {
        self.vars
            .iter()
            .filter(|(k, _)| !self.is_frozen(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Parameters of one component, flattened to f64 in name order.
    pub fn flatten(&self, component: Option<&str>) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (name, var) in &self.vars {
            if component.is_none_or(|c| component_of(name) == c) {
                out.extend(var.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?);
            }
        }
        Ok(out)
    }

    /// Overwrite a parameter, checking its shape.
    pub fn assign(&self, name: &str, value: &Tensor) -> Result<()> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter `{name}`")))?;
        if var.dims() != value.dims() {
            return Err(Error::DimMismatch {
                layer: name.to_string(),
                expected: var.dims().to_vec(),
                got: value.dims().to_vec(),
            });
        }
        var.set(&value.to_dtype(self.dtype)?.to_device(&self.device)?)?;
        Ok(())
    }

    /// Copy every parameter of `component` from `other`.
    pub fn copy_component(&self, other: &ParamStore, component: &str) -> Result<()> {
        for (name, var) in other.iter().filter(|(n, _)| component_of(n) == component) {
            self.assign(name, var.as_tensor())?;
        }
        Ok(())
    }

    /// Add seeded uniform noise of half-width `scale` to every parameter.
    pub fn perturb(&self, seed: u64, scale: f64) -> Result<()> {
        for (name, var) in &self.vars {
            let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(name, seed));
            let noise: Vec<f64> = (0..var.elem_count()).map(|_| rng.random_range(-scale..scale)).collect();
            let noise = Tensor::from_vec(noise, var.shape(), &self.device)?.to_dtype(self.dtype)?;
            var.set(&(var.as_tensor() + noise)?)?;
        }
        Ok(())
    }

    pub fn tensors(&self) -> BTreeMap<String, Tensor> {
        self.vars.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect()
    }
}

/// Creates parameters under a name prefix. Each parameter draws from its
/// own generator keyed by its full name, so initial values do not depend
/// on construction order.
pub struct ParamBuilder<'a> {
    store: &'a mut ParamStore,
    prefix: String,
    seed: u64,
}

impl<'a> ParamBuilder<'a> {
    pub fn new(store: &'a mut ParamStore, prefix: &str, seed: u64) -> Self {
        Self {
            store,
            prefix: prefix.to_string(),
            seed,
        }
    }

    pub fn sub(&mut self, name: impl std::fmt::Display) -> ParamBuilder<'_> {
        ParamBuilder {
            store: self.store,
            prefix: format!("{}.{name}", self.prefix),
            seed: self.seed,
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    fn full(&self, name: &str) -> String {
        format!("{}.{name}", self.prefix)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let full = self.full(name);
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(&full, self.seed));
        let n: usize = shape.iter().product();
        let data: Vec<f64> = if bound > 0.0 {
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        } else {
            vec![0.0; n]
        };
        let t = Tensor::from_vec(data, shape, &self.store.device)?;
        self.store.insert(full, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let t = Tensor::full(value, shape, &self.store.device)?;
        self.store.insert(self.full(name), t)
    }
}
