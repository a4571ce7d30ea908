use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{dice_score, mean_std};
use super::predict::predict_masks;
use crate::data::SampleTriplet;
use crate::error::{Error, Result};
use crate::model::SegModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub key: String,
    pub prompt: String,
    pub dice: f64,
}

/// Dice statistics of one (model, train data, test data, prompt type,
/// perturbation) cell. `dice_mean` and `dice_std` are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub train_data: String,
    pub test_data: String,
    pub ptype: String,
    pub perturbation: String,
    pub n: usize,
    pub dice_mean: f64,
    pub dice_std: f64,
    pub samples: Vec<SampleScore>,
}

impl EvalReport {
    pub fn with_train_data(mut self, train_data: impl Into<String>) -> Self {
        self.train_data = train_data.into();
        self
    }

    pub fn with_perturbation(mut self, perturbation: impl Into<String>) -> Self {
        self.perturbation = perturbation.into();
        self
    }

    /// Per-sample Dice in [0, 1], in triplet order.
    pub fn dice_values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.dice).collect()
    }
}

fn ptype_label(triplets: &[SampleTriplet]) -> String {
    match triplets.first().and_then(|t| t.plan.as_ref()) {
        Some(plan) => plan.ptype.to_string(),
        None => "custom".into(),
    }
}

/// Score a model on a set of triplets with their own prompts.
pub fn evaluate(model: &dyn SegModel, triplets: &[SampleTriplet], batch_size: usize) -> Result<EvalReport> {
    let prompts: Vec<String> = triplets.iter().map(|t| t.prompt.clone()).collect();
    evaluate_with_prompts(model, triplets, &prompts, batch_size)
}

/// Score a model on a set of triplets, substituting `prompts`.
pub fn evaluate_with_prompts(
    model: &dyn SegModel,
    triplets: &[SampleTriplet],
    prompts: &[String],
    batch_size: usize,
) -> Result<EvalReport> {
    if triplets.is_empty() {
        return Err(Error::EmptySplit);
    }
    if prompts.len() != triplets.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![triplets.len()],
            got: vec![prompts.len()],
        });
    }
    let masks = predict_masks(model, triplets, prompts, batch_size)?;
    score_masks(&model.name(), triplets, prompts, &masks)
}

/// Report from predicted masks already at original resolution.
pub fn score_masks(
    model: &str,
    triplets: &[SampleTriplet],
    prompts: &[String],
    masks: &[ndarray::Array2<u8>],
) -> Result<EvalReport> {
    if triplets.is_empty() {
        return Err(Error::EmptySplit);
    }
    if masks.len() != triplets.len() || prompts.len() != triplets.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![triplets.len()],
            got: vec![masks.len(), prompts.len()],
        });
    }
    let mut samples = Vec::with_capacity(triplets.len());
    for ((t, pred), prompt) in triplets.iter().zip(masks).zip(prompts) {
        samples.push(SampleScore {
            key: t.key(),
            prompt: prompt.clone(),
            dice: dice_score(pred.view(), t.mask.view())?,
        });
    }
    let (mean, std) = mean_std(&samples.iter().map(|s| s.dice).collect::<Vec<_>>())?;
    Ok(EvalReport {
        model: model.to_string(),
        train_data: String::new(),
        test_data: triplets[0].dataset.clone(),
        ptype: ptype_label(triplets),
        perturbation: "none".into(),
        n: samples.len(),
        dice_mean: mean * 100.0,
        dice_std: std * 100.0,
        samples,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRow<'a> {
    model: &'a str,
    train_data: &'a str,
    test_data: &'a str,
    ptype: &'a str,
    perturbation: &'a str,
    n: usize,
    dice_mean: f64,
    dice_std: f64,
}

/// One summary row per report.
pub fn write_summary_csv(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(SummaryRow {
            model: &r.model,
            train_data: &r.train_data,
            test_data: &r.test_data,
            ptype: &r.ptype,
            perturbation: &r.perturbation,
            n: r.n,
            dice_mean: r.dice_mean,
            dice_std: r.dice_std,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sample scores of one report.
pub fn write_samples_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in &report.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports_json(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(reports)?)?;
    Ok(())
}

pub fn read_reports_json(path: impl AsRef<Path>) -> Result<Vec<EvalReport>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{blob_samples, synthetic_triplets};
    use crate::data::{InputSpec, TripletOptions};
    use crate::model::{ConstantModel, ParamStore};
    use crate::prompt::PromptType;
    use candle_core::{DType, Device, Tensor};

    /// Thresholds the red channel, which separates synthetic blobs from
    /// their dark background exactly.
    struct Brightness {
        input: InputSpec,
        params: ParamStore,
    }

    impl SegModel for Brightness {
        fn name(&self) -> String {
            "brightness".into()
        }
        fn input_spec(&self) -> &InputSpec {
            &self.input
        }
        fn output_side(&self) -> usize {
            self.input.side
        }
        fn params(&self) -> &ParamStore {
            &self.params
        }
        fn params_mut(&mut self) -> &mut ParamStore {
            &mut self.params
        }
        fn forward(&self, images: &Tensor, _: &[String]) -> Result<Tensor> {
            let cut = ((130.0 / 255.0 - self.input.mean[0]) / self.input.std[0]) as f64;
            Ok((images.narrow(1, 0, 1)? - cut)?)
        }
    }

    fn blobs() -> Vec<SampleTriplet> {
        synthetic_triplets("blobs", &blob_samples(5, 32, 8), &TripletOptions::new(PromptType::P3)).unwrap()
    }

    #[test]
    fn oracle_scores_one_hundred() {
        let m = Brightness {
            input: InputSpec::clip(32),
            params: ParamStore::new(DType::F32, Device::Cpu),
        };
        let r = evaluate(&m, &blobs(), 2).unwrap();
        assert_eq!((r.dice_mean, r.dice_std, r.n), (100.0, 0.0, 5));
        assert_eq!(r.ptype, "P3");
        assert_eq!(r.test_data, "blobs");
    }

    #[test]
    fn constant_predictors() {
        let data = blobs();
        let zero = ConstantModel::new(0.0, InputSpec::clip(32), 8);
        assert_eq!(evaluate(&zero, &data, 4).unwrap().dice_mean, 0.0);
        let masks = predict_masks(&zero, &data, &vec![String::new(); data.len()], 4).unwrap();
        assert!(masks.iter().all(|m| m.iter().all(|v| *v == 0)));
        let hot = ConstantModel::new(10.0, InputSpec::clip(32), 8);
        let masks = predict_masks(&hot, &data, &vec![String::new(); data.len()], 4).unwrap();
        assert!(masks.iter().all(|m| m.dim() == (32, 32) && m.iter().all(|v| *v == 1)));
    }

    #[test]
    fn mean_is_per_image_average() {
        let data = blobs();
        let hot = ConstantModel::new(10.0, InputSpec::clip(32), 8);
        let r = evaluate(&hot, &data, 3).unwrap();
        let mean = r.dice_values().iter().sum::<f64>() / r.n as f64 * 100.0;
        assert!((r.dice_mean - mean).abs() < 1e-9);
    }

    #[test]
    fn empty_split_is_an_error() {
        let zero = ConstantModel::new(0.0, InputSpec::clip(32), 8);
        assert!(matches!(evaluate(&zero, &[], 4), Err(Error::EmptySplit)));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let zero = ConstantModel::new(0.0, InputSpec::clip(32), 8);
        let r = evaluate(&zero, &blobs(), 4).unwrap().with_train_data("blobs");
        let dir = tempfile::tempdir().unwrap();
        write_summary_csv(dir.path().join("s.csv"), &[r.clone()]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert!(text.starts_with("model,train_data,test_data,ptype,perturbation,n,dice_mean,dice_std\n"));
        write_reports_json(dir.path().join("r.json"), &[r.clone()]).unwrap();
        assert_eq!(read_reports_json(dir.path().join("r.json")).unwrap(), vec![r]);
    }
}
