//! Bilinear resampling (half-pixel centres, no antialiasing) and the
//! model-input preprocessing built on it.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interpolation taps for one output coordinate: `(lo, hi, weight_hi)`.
pub fn bilinear_taps(input: usize, output: usize) -> Vec<(usize, usize, f32)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            let w = if hi == lo { 0.0 } else { (src - lo as f64) as f32 };
            (lo, hi, w)
        })
        .collect()
}

/// Dense `output x input` interpolation matrix; `R_h * X * R_w^T` resizes `X`.
pub fn bilinear_matrix(input: usize, output: usize) -> Array2<f32> {
    let mut m = Array2::zeros((output, input));
    for (o, (lo, hi, w)) in bilinear_taps(input, output).into_iter().enumerate() {
        m[[o, lo]] += 1.0 - w;
        m[[o, hi]] += w;
    }
    m
}

pub fn resize_bilinear_2d(input: ArrayView2<'_, f32>, out_h: usize, out_w: usize) -> Array2<f32> {
    let (h, w) = input.dim();
    let rows = bilinear_taps(h, out_h);
    let cols = bilinear_taps(w, out_w);
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let (y0, y1, wy) = rows[y];
        let (x0, x1, wx) = cols[x];
        let top = input[[y0, x0]] * (1.0 - wx) + input[[y0, x1]] * wx;
        let bottom = input[[y1, x0]] * (1.0 - wx) + input[[y1, x1]] * wx;
        top * (1.0 - wy) + bottom * wy
    })
}

/// Resize an `H x W x C` image.
pub fn resize_bilinear_hwc(input: ArrayView3<'_, f32>, out_h: usize, out_w: usize) -> Array3<f32> {
    let (h, w, c) = input.dim();
    let rows = bilinear_taps(h, out_h);
    let cols = bilinear_taps(w, out_w);
    Array3::from_shape_fn((out_h, out_w, c), |(y, x, ch)| {
        let (y0, y1, wy) = rows[y];
        let (x0, x1, wx) = cols[x];
        let top = input[[y0, x0, ch]] * (1.0 - wx) + input[[y0, x1, ch]] * wx;
        let bottom = input[[y1, x0, ch]] * (1.0 - wx) + input[[y1, x1, ch]] * wx;
        top * (1.0 - wy) + bottom * wy
    })
}

/// Nearest-neighbour resize for label masks.
pub fn resize_nearest_mask(mask: ArrayView2<'_, u8>, out_h: usize, out_w: usize) -> Array2<u8> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((out_h, out_w), |(y, x)| {
        let sy = (((y as f64 + 0.5) * h as f64 / out_h as f64).floor() as usize).min(h - 1);
        let sx = (((x as f64 + 0.5) * w as f64 / out_w as f64).floor() as usize).min(w - 1);
        mask[[sy, sx]]
    })
}

/// Square input resolution and per-channel normalisation of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub side: usize,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl InputSpec {
    pub const CLIP_MEAN: [f32; 3] = [0.481_454_66, 0.457_827_5, 0.408_210_73];
    pub const CLIP_STD: [f32; 3] = [0.268_629_54, 0.261_302_6, 0.275_777_1];

    pub fn clip(side: usize) -> Self {
        Self {
            side,
            mean: Self::CLIP_MEAN,
            std: Self::CLIP_STD,
        }
    }

    /// CLIPSeg-style input: 352 x 352.
    pub fn clipseg() -> Self {
        Self::clip(352)
    }

    /// CRIS-style input: 416 x 416.
    pub fn cris() -> Self {
        Self::clip(416)
    }
}

/// Resize to the model side and standardise; returns `3 x side x side`.
pub fn preprocess(image: ArrayView3<'_, f32>, spec: &InputSpec) -> Result<Array3<f32>> {
    let (h, w, c) = image.dim();
    if c != 3 {
        return Err(Error::NotRgb(c));
    }
    if h == 0 || w == 0 {
        return Err(Error::ShapeMismatch {
            expected: vec![spec.side, spec.side, 3],
            got: vec![h, w, c],
        });
    }
    let resized = resize_bilinear_hwc(image, spec.side, spec.side);
    let mut out = Array3::zeros((3, spec.side, spec.side));
    for ch in 0..3 {
        let (m, s) = (spec.mean[ch], spec.std[ch]);
        for y in 0..spec.side {
            for x in 0..spec.side {
                out[[ch, y, x]] = (resized[[y, x, ch]] / 255.0 - m) / s;
            }
        }
    }
    Ok(out)
}

/// Bring a model-resolution logit map back to the original image size.
pub fn restore(logits: ArrayView2<'_, f32>, original: (usize, usize)) -> Array2<f32> {
    resize_bilinear_2d(logits, original.0, original.1)
}
