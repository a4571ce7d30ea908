use std::collections::BTreeMap;
use std::str::FromStr;

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// L2 penalty folded into the gradient.
    Adam,
    /// Decoupled weight decay.
    Adamw,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamw" => Ok(OptimizerKind::Adamw),
            _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam / AdamW over a fixed list of named variables.
#[derive(Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    hp: AdamParams,
    vars: Vec<(String, Var)>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, hp: AdamParams, vars: Vec<(String, Var)>) -> Result<Self> {
        let m = vars.iter().map(|(_, v)| v.zeros_like()).collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Self {
            kind,
            hp,
            vars,
            m,
            v,
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }

    /// One update at learning rate `lr`. Variables without a gradient are
    /// left untouched.
    pub fn step(&mut self, grads: &GradStore, lr: f64) -> Result<()> {
        self.step_scaled(grads, lr, 1.0)
    }

    /// Global L2 norm of the gradients of the optimised variables.
    pub fn grad_norm(&self, grads: &GradStore) -> Result<f64> {
        let mut total = 0.0;
        for (_, var) in &self.vars {
            if let Some(g) = grads.get(var.as_tensor()) {
                total += g.sqr()?.sum_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
            }
        }
        Ok(total.sqrt())
    }

    /// As `step`, with every gradient multiplied by `scale` first.
    pub fn step_scaled(&mut self, grads: &GradStore, lr: f64, scale: f64) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let AdamParams {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.hp;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, (_, var)) in self.vars.iter().enumerate() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let theta = var.as_tensor().detach();
            let g = if scale == 1.0 { g.clone() } else { (g * scale)? };
            let g = match self.kind {
                OptimizerKind::Adam if weight_decay > 0.0 => (g + (&theta * weight_decay)?)?,
                _ => g,
            };
            let m = ((&self.m[i] * beta1)? + (&g * (1.0 - beta1))?)?;
            let v = ((&self.v[i] * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            let update = ((&m / c1)? / ((&v / c2)?.sqrt()? + eps)?)?;
            let mut next = (&theta - (update * lr)?)?;
            if self.kind == OptimizerKind::Adamw && weight_decay > 0.0 {
                next = (next - (&theta * (lr * weight_decay))?)?;
            }
            var.set(&next)?;
            self.m[i] = m;
            self.v[i] = v;
        }
        Ok(())
    }

    /// Moment estimates keyed `m.<name>` / `v.<name>`, for resuming.
    pub fn state_tensors(&self) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for (i, (name, _)) in self.vars.iter().enumerate() {
            out.insert(format!("m.{name}"), self.m[i].clone());
            out.insert(format!("v.{name}"), self.v[i].clone());
        }
        out
    }

    pub fn load_state(&mut self, tensors: &BTreeMap<String, Tensor>, step: u64) -> Result<()> {
        for (i, (name, var)) in self.vars.iter().enumerate() {
            for (prefix, slot) in [("m", &mut self.m[i]), ("v", &mut self.v[i])] {
                let t = tensors
                    .get(&format!("{prefix}.{name}"))
                    .ok_or_else(|| Error::Checkpoint(format!("optimizer state lacks {prefix}.{name}")))?;
                *slot = t.to_dtype(var.dtype())?;
            }
        }
        self.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn var(v: f64) -> Var {
        Var::new(&[v], &Device::Cpu).unwrap()
    }

    fn value(v: &Var) -> f64 {
        v.as_tensor().to_vec1::<f64>().unwrap()[0]
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        // with bias correction the first step is lr * sign(g)
        let x = var(3.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, AdamParams::default(), vec![("x".into(), x.clone())]).unwrap();
        let loss = x.as_tensor().sqr().unwrap().sum_all().unwrap();
        opt.step(&loss.backward().unwrap(), 0.1).unwrap();
        assert!((value(&x) - 2.9).abs() < 1e-6);
    }

    #[test]
    fn adamw_decays_independently_of_gradient() {
        let hp = AdamParams {
            weight_decay: 0.5,
            ..AdamParams::default()
        };
        let x = var(2.0);
        let mut opt = Optimizer::new(OptimizerKind::Adamw, hp, vec![("x".into(), x.clone())]).unwrap();
        let loss = x.as_tensor().sum_all().unwrap();
        opt.step(&loss.backward().unwrap(), 0.1).unwrap();
        // 2 - 0.1 * 1 - 0.1 * 0.5 * 2
        assert!((value(&x) - 1.8).abs() < 1e-6);
    }

    #[test]
    fn converges_on_quadratic() {
        let x = var(5.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, AdamParams::default(), vec![("x".into(), x.clone())]).unwrap();
        for _ in 0..2000 {
            let loss = (x.as_tensor() - 1.5).unwrap().sqr().unwrap().sum_all().unwrap();
            opt.step(&loss.backward().unwrap(), 0.01).unwrap();
        }
        assert!((value(&x) - 1.5).abs() < 1e-3);
    }
}
