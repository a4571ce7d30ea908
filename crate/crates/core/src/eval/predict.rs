use candle_core::{DType, Device, Tensor};
use ndarray::{Array2, Array3, ArrayView2};

use crate::data::{preprocess, resize_nearest_mask, restore, InputSpec, SampleTriplet};
use crate::error::Result;
use crate::model::SegModel;

/// Stack preprocessed `3 x S x S` arrays into a `B x 3 x S x S` tensor.
pub fn stack_images(images: &[&Array3<f32>], dtype: DType, device: &Device) -> Result<Tensor> {
    let (c, h, w) = images.first().map(|a| a.dim()).unwrap_or((3, 0, 0));
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        data.extend(img.iter().copied());
    }
    Ok(Tensor::from_vec(data, (images.len(), c, h, w), device)?.to_dtype(dtype)?)
}

/// Stack `O x O` float targets into a `B x 1 x O x O` tensor.
pub fn stack_targets(targets: &[&Array2<f32>], dtype: DType, device: &Device) -> Result<Tensor> {
    let (h, w) = targets.first().map(|a| a.dim()).unwrap_or((0, 0));
    let mut data = Vec::with_capacity(targets.len() * h * w);
    for t in targets {
        data.extend(t.iter().copied());
    }
    Ok(Tensor::from_vec(data, (targets.len(), 1, h, w), device)?.to_dtype(dtype)?)
}

/// Binary mask resized (nearest) to the model's output side, as floats.
pub fn target_at(mask: ArrayView2<'_, u8>, side: usize) -> Array2<f32> {
    resize_nearest_mask(mask, side, side).mapv(|v| (v > 0) as u8 as f32)
}

/// Preprocessed inputs of a set of triplets.
pub fn preprocess_all(triplets: &[SampleTriplet], spec: &InputSpec) -> Result<Vec<Array3<f32>>> {
    triplets.iter().map(|t| preprocess(t.image.view(), spec)).collect()
}

/// `B x 1 x O x O` logits to per-sample `O x O` arrays.
pub fn unstack_logits(logits: &Tensor) -> Result<Vec<Array2<f32>>> {
    let (b, _, h, w) = logits.dims4()?;
    let flat = logits.detach().to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    Ok((0..b)
        .map(|i| Array2::from_shape_vec((h, w), flat[i * h * w..(i + 1) * h * w].to_vec()).expect("logit block"))
        .collect())
}

/// Restore a logit map to the original size and threshold at probability 0.5.
pub fn logits_to_mask(logits: ArrayView2<'_, f32>, original: (usize, usize)) -> Array2<u8> {
    restore(logits, original).mapv(|v| (v > 0.0) as u8)
}

/// Model-resolution logits for preprocessed images, in batches.
pub fn predict_logits(
    model: &dyn SegModel,
    images: &[Array3<f32>],
    prompts: &[String],
    batch_size: usize,
) -> Result<Vec<Array2<f32>>> {
    let params = model.params();
    let mut out = Vec::with_capacity(images.len());
    let idx: Vec<usize> = (0..images.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch: Vec<&Array3<f32>> = chunk.iter().map(|&i| &images[i]).collect();
        let x = stack_images(&batch, params.dtype(), params.device())?;
        let p: Vec<String> = chunk.iter().map(|&i| prompts[i].clone()).collect();
        out.extend(unstack_logits(&model.forward(&x, &p)?)?);
    }
    Ok(out)
}

/// Binary masks at each triplet's original resolution, under `prompts`.
pub fn predict_masks(
    model: &dyn SegModel,
    triplets: &[SampleTriplet],
    prompts: &[String],
    batch_size: usize,
) -> Result<Vec<Array2<u8>>> {
    let images = preprocess_all(triplets, model.input_spec())?;
    let logits = predict_logits(model, &images, prompts, batch_size)?;
    Ok(logits
        .iter()
        .zip(triplets)
        .map(|(l, t)| logits_to_mask(l.view(), t.original_size()))
        .collect())
}
