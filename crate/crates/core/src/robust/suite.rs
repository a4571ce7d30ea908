use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::perturb::{perturb_prompt, PerturbContext, PerturbationSpec};
use crate::data::{resize_nearest_mask, resize_bilinear_hwc, SampleTriplet};
use crate::error::{Error, Result};
use crate::eval::{grouped_bar_chart, predict_masks, score_masks, EvalReport};
use crate::model::SegModel;

/// Suite configuration file: `{"specs": [{"mode": "opposite", "target": "size"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub specs: Vec<PerturbationSpec>,
}

impl SuiteConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub spec: PerturbationSpec,
    pub base_mean: f64,
    pub perturbed_mean: f64,
    /// `(perturbed - base) / base * 100`, or `perturbed - base` when the
    /// base mean is zero (then `absolute` is set).
    pub change: f64,
    pub absolute: bool,
    /// `perturbed - base` in Dice points.
    pub points: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub base: EvalReport,
    pub results: Vec<PerturbationResult>,
    #[serde(skip)]
    base_masks: Vec<Array2<u8>>,
    #[serde(skip)]
    perturbed_masks: Vec<Vec<Array2<u8>>>,
}

impl SuiteReport {
    pub fn get(&self, label: &str) -> Option<&PerturbationResult> {
        self.results.iter().find(|r| r.spec.label() == label)
    }

    /// Every report, base first, for the evaluation CSV.
    pub fn reports(&self) -> Vec<EvalReport> {
        std::iter::once(self.base.clone())
            .chain(self.results.iter().map(|r| r.report.clone()))
            .collect()
    }

    /// Grouped chart of relative change: one group per target attribute,
    /// one series per mode.
    pub fn write_chart(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut groups: Vec<String> = Vec::new();
        let mut modes: Vec<String> = Vec::new();
        for r in &self.results {
            let g = r.spec.target.map_or_else(|| "prompt".to_string(), |t| t.to_string());
            if !groups.contains(&g) {
                groups.push(g);
            }
            let m = r.spec.mode.as_str().to_string();
            if !modes.contains(&m) {
                modes.push(m);
            }
        }
        let series: Vec<(String, Vec<Option<f64>>)> = modes
            .iter()
            .map(|m| {
                let values = groups
                    .iter()
                    .map(|g| {
                        self.results
                            .iter()
                            .find(|r| {
                                r.spec.mode.as_str() == m
                                    && r.spec.target.map_or_else(|| "prompt".to_string(), |t| t.to_string()) == *g
                            })
                            .map(|r| r.change)
                    })
                    .collect();
                (m.clone(), values)
            })
            .collect();
        grouped_bar_chart(path, "Relative change in Dice", "change (%)", &groups, &series)
    }

    /// PNG rows of (input, ground truth, base prediction, perturbed
    /// prediction) for the `k` samples whose Dice dropped most under the
    /// result at `index`.
    pub fn write_gallery(
        &self,
        path: impl AsRef<Path>,
        triplets: &[SampleTriplet],
        index: usize,
        k: usize,
        tile: usize,
    ) -> Result<()> {
        let result = self
            .results
            .get(index)
            .ok_or_else(|| Error::Config(format!("no perturbation result at index {index}")))?;
        let perturbed = &self.perturbed_masks[index];
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        let drop = |i: usize| self.base.samples[i].dice - result.report.samples[i].dice;
        order.sort_by(|&a, &b| drop(b).total_cmp(&drop(a)).then(a.cmp(&b)));
        order.truncate(k.max(1));
        let mut canvas = RgbImage::new((4 * tile) as u32, (order.len() * tile) as u32);
        for (row, &i) in order.iter().enumerate() {
            let t = &triplets[i];
            let img = resize_bilinear_hwc(t.image.view(), tile, tile);
            let masks = [&t.mask, &self.base_masks[i], &perturbed[i]];
            for y in 0..tile {
                for x in 0..tile {
                    let px = |c: usize| img[[y, x, c]].round().clamp(0.0, 255.0) as u8;
                    canvas.put_pixel(x as u32, (row * tile + y) as u32, Rgb([px(0), px(1), px(2)]));
                }
            }
            for (col, mask) in masks.iter().enumerate() {
                let m = resize_nearest_mask(mask.view(), tile, tile);
                for ((y, x), v) in m.indexed_iter() {
                    let c = if *v > 0 { 255 } else { 0 };
                    canvas.put_pixel(((col + 1) * tile + x) as u32, (row * tile + y) as u32, Rgb([c, c, c]));
                }
            }
        }
        if let Some(dir) = path.as_ref().parent() {
            std::fs::create_dir_all(dir)?;
        }
        canvas.save(path)?;
        Ok(())
    }
}

/// Evaluate the model on the base prompts and under each spec.
pub fn run_perturbation_suite(
    model: &dyn SegModel,
    triplets: &[SampleTriplet],
    specs: &[PerturbationSpec],
    ctx: &PerturbContext,
    batch_size: usize,
) -> Result<SuiteReport> {
    if triplets.is_empty() {
        return Err(Error::EmptySplit);
    }
    for spec in specs {
        spec.validate(&ctx.opposites)?;
    }
    let name = model.name();
    let base_prompts: Vec<String> = triplets.iter().map(|t| t.prompt.clone()).collect();
    let base_masks = predict_masks(model, triplets, &base_prompts, batch_size)?;
    let base = score_masks(&name, triplets, &base_prompts, &base_masks)?;
    let mut results = Vec::with_capacity(specs.len());
    let mut perturbed_masks = Vec::with_capacity(specs.len());
    for spec in specs {
        let prompts: Vec<String> = triplets
            .iter()
            .map(|t| perturb_prompt(t, spec, ctx))
            .collect::<Result<_>>()?;
        let masks = predict_masks(model, triplets, &prompts, batch_size)?;
        let report = score_masks(&name, triplets, &prompts, &masks)?.with_perturbation(spec.label());
        let points = report.dice_mean - base.dice_mean;
        let absolute = base.dice_mean == 0.0;
        let change = if absolute { points } else { points / base.dice_mean * 100.0 };
        results.push(PerturbationResult {
            spec: spec.clone(),
            base_mean: base.dice_mean,
            perturbed_mean: report.dice_mean,
            change,
            absolute,
            points,
            report,
        });
        perturbed_masks.push(masks);
    }
    Ok(SuiteReport {
        base,
        results,
        base_masks,
        perturbed_masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{blob_samples, synthetic_triplets};
    use crate::data::TripletOptions;
    use crate::model::{build_variant, CnnConfig, UNet, Variant, VlsmConfig};
    use crate::prompt::PromptType;
    use crate::robust::{default_specs, OppositeMap};
    use candle_core::{DType, Device};

    fn p6() -> Vec<SampleTriplet> {
        synthetic_triplets("blobs", &blob_samples(4, 32, 12), &TripletOptions::new(PromptType::P6)).unwrap()
    }

    #[test]
    fn image_only_model_is_invariant_to_every_spec() {
        let data = p6();
        let unet = UNet::new(&CnnConfig::toy(3), &Device::Cpu, DType::F32).unwrap();
        let ctx = PerturbContext::new(&data, 0);
        let specs = default_specs(&data, &ctx.opposites);
        assert!(specs.len() > 5);
        let suite = run_perturbation_suite(&unet, &data, &specs, &ctx, 2).unwrap();
        for r in &suite.results {
            assert_eq!(r.points, 0.0, "{}", r.spec.label());
            assert_eq!(r.change, 0.0);
        }
    }

    #[test]
    fn identity_is_exactly_zero_and_outputs_are_written() {
        let data = p6();
        let m = build_variant(&VlsmConfig::toy(Variant::Cris, 2), &Device::Cpu, DType::F32).unwrap();
        let ctx = PerturbContext::new(&data, 0);
        let specs = vec![
            PerturbationSpec::identity(),
            crate::robust::PerturbationSpec::new(
                crate::robust::PerturbationMode::Opposite,
                crate::prompt::AttributeKey::Location,
            ),
        ];
        let suite = run_perturbation_suite(&m, &data, &specs, &ctx, 2).unwrap();
        let id = suite.get("identity").unwrap();
        assert_eq!((id.change, id.points), (0.0, 0.0));
        assert_eq!(id.report.dice_values(), suite.base.dice_values());
        assert_eq!(suite.reports().len(), 3);
        let dir = tempfile::tempdir().unwrap();
        suite.write_chart(dir.path().join("chart.svg")).unwrap();
        suite.write_gallery(dir.path().join("worst.png"), &data, 1, 2, 16).unwrap();
        let img = image::open(dir.path().join("worst.png")).unwrap();
        assert_eq!((img.width(), img.height()), (64, 32));
        assert!(OppositeMap::default().supports(crate::prompt::AttributeKey::Location));
    }

    #[test]
    fn zero_base_reports_absolute_change() {
        let data = p6();
        let zero = crate::model::ConstantModel::new(-5.0, crate::data::InputSpec::clip(32), 8);
        let ctx = PerturbContext::new(&data, 0);
        let suite = run_perturbation_suite(&zero, &data, &[PerturbationSpec::class_name_only()], &ctx, 4).unwrap();
        assert!(suite.results[0].absolute);
    }
}
