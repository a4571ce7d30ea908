//! Procedural datasets for smoke tests and conditioning probes.
//!
//! Shapes are drawn on a 4-pixel lattice so a model emitting logits at a
//! quarter of the input resolution can represent the masks exactly.

use std::path::Path;
use std::sync::Arc;

use image::{GrayImage, RgbImage};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::handle::{write_split_manifest, Sample};
use super::registry::{Category, ClassEntry, DatasetDescriptor, Split, SplitSizes};
use super::triplet::{sample_triplets, SampleTriplet, TripletOptions};
use crate::error::Result;
use crate::prompt::{AttributeKey, AttributeSet, DatasetFamily, Provenance, Sidecar};

const CELL: usize = 4;

/// Descriptor of a synthetic single-class dataset using the endoscopy templates.
pub fn synthetic_descriptor(name: &str, sizes: SplitSizes) -> DatasetDescriptor {
    DatasetDescriptor {
        name: name.to_string(),
        display_name: name.to_string(),
        category: Category::NonRadiology,
        modality: "synthetic".into(),
        organ: "none".into(),
        classes: vec![ClassEntry {
            name: "polyp".into(),
            label: 1,
            keyword: "polyp".into(),
        }],
        splits: sizes,
        family: DatasetFamily::Endoscopy,
        test_only: false,
    }
}

fn background<R: Rng>(side: usize, rng: &mut R) -> Array3<f32> {
    let base: f32 = rng.random_range(30.0..70.0);
    Array3::from_shape_fn((side, side, 3), |_| base + rng.random_range(-8.0f32..8.0))
}

/// Fill lattice cells `[r0, r0+h) x [c0, c0+w)` (in cell units) with a colour
/// and mark them in `labels` when given.
fn paint(image: &mut Array3<f32>, labels: Option<&mut Array2<u8>>, cells: (usize, usize, usize, usize), color: [f32; 3]) {
    let (r0, c0, h, w) = cells;
    let ys = r0 * CELL..(r0 + h) * CELL;
    let xs = c0 * CELL..(c0 + w) * CELL;
    for y in ys.clone() {
        for x in xs.clone() {
            for (ch, v) in color.iter().enumerate() {
                image[[y, x, ch]] = *v;
            }
        }
    }
    if let Some(labels) = labels {
        labels.slice_mut(ndarray::s![ys, xs]).fill(1);
    }
}

fn blob_color<R: Rng>(rng: &mut R) -> [f32; 3] {
    [
        rng.random_range(190.0..240.0),
        rng.random_range(90.0..140.0),
        rng.random_range(110.0..160.0),
    ]
}

/// `n` images of side `side` (a multiple of 8), each with one rectangular
/// blob and its binary mask.
pub fn blob_samples(n: usize, side: usize, seed: u64) -> Vec<Sample> {
    assert!(side % (2 * CELL) == 0 && side >= 16, "side must be a multiple of 8, at least 16");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = side / CELL;
    (0..n)
        .map(|i| {
            let mut image = background(side, &mut rng);
            let mut labels = Array2::zeros((side, side));
            let h = rng.random_range(2..=cells / 2);
            let w = rng.random_range(2..=cells / 2);
            let r0 = rng.random_range(0..=cells - h);
            let c0 = rng.random_range(0..=cells - w);
            paint(&mut image, Some(&mut labels), (r0, c0, h, w), blob_color(&mut rng));
            Sample {
                id: format!("blob_{i:04}"),
                image: Arc::new(image),
                labels,
            }
        })
        .collect()
}

/// Quadrants in reading order with their location words under the default
/// 3 x 3 grid.
pub const QUADRANTS: [&str; 4] = ["top left", "top right", "bottom left", "bottom right"];

/// Images carrying four identical blobs, one centred in each quadrant. The
/// mask holds a single one of them, so only the prompt's location word
/// identifies the target. Returns the samples and the chosen quadrant index.
pub fn quadrant_samples(n: usize, side: usize, seed: u64) -> Vec<(Sample, usize)> {
    assert!(side % (4 * CELL) == 0 && side >= 32, "side must be a multiple of 16, at least 32");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = side / CELL / 2;
    (0..n)
        .map(|i| {
            let mut image = background(side, &mut rng);
            let mut labels = Array2::zeros((side, side));
            let target = rng.random_range(0..4);
            // blob size in cells; centred so the centroid sits in a corner cell
            let h = rng.random_range(1..=half / 2).max(1);
            let w = rng.random_range(1..=half / 2).max(1);
            let color = blob_color(&mut rng);
            for q in 0..4 {
                let r0 = (q / 2) * half + (half - h) / 2;
                let c0 = (q % 2) * half + (half - w) / 2;
                let mask = if q == target { Some(&mut labels) } else { None };
                paint(&mut image, mask, (r0, c0, h, w), color);
            }
            let sample = Sample {
                id: format!("quad_{i:04}"),
                image: Arc::new(image),
                labels,
            };
            (sample, target)
        })
        .collect()
}

/// Sidecar giving every sample the colour and shape attributes the
/// endoscopy templates need.
pub fn synthetic_sidecar<'a>(ids: impl IntoIterator<Item = &'a str>) -> Sidecar {
    ids.into_iter()
        .map(|id| {
            let attrs = AttributeSet::new()
                .with(AttributeKey::Color, "pink", Provenance::Sidecar)
                .with(AttributeKey::Shape, "round", Provenance::Sidecar);
            (id.to_string(), attrs)
        })
        .collect()
}

/// Prompted triplets of synthetic samples, built in memory with the
/// synthetic sidecar attributes.
pub fn synthetic_triplets(name: &str, samples: &[Sample], options: &TripletOptions) -> Result<Vec<SampleTriplet>> {
    let descriptor = synthetic_descriptor(
        name,
        SplitSizes {
            train: samples.len(),
            val: 0,
            test: 0,
        },
    );
    let sidecar = synthetic_sidecar(samples.iter().map(|s| s.id.as_str()));
    let mut out = Vec::new();
    for s in samples {
        out.extend(sample_triplets(s, &descriptor, sidecar.get(&s.id), None, options)?);
    }
    Ok(out)
}

/// Write samples in the on-disk dataset layout, with split manifests,
/// `classes.json`, `descriptor.json` and an attribute sidecar.
pub fn write_dataset(root: impl AsRef<Path>, descriptor: &DatasetDescriptor, splits: &[(Split, &[Sample])]) -> Result<()> {
    let root = root.as_ref();
    let mut all_ids = Vec::new();
    for (split, samples) in splits {
        let image_dir = root.join("images").join(split.as_str());
        let mask_dir = root.join("masks").join(split.as_str());
        std::fs::create_dir_all(&image_dir)?;
        std::fs::create_dir_all(&mask_dir)?;
        for s in *samples {
            let (h, w, _) = s.image.dim();
            let raw: Vec<u8> = s.image.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            RgbImage::from_raw(w as u32, h as u32, raw)
                .expect("buffer matches dimensions")
                .save(image_dir.join(format!("{}.png", s.id)))?;
            let mask: Vec<u8> = s.labels.iter().copied().collect();
            GrayImage::from_raw(w as u32, h as u32, mask)
                .expect("buffer matches dimensions")
                .save(mask_dir.join(format!("{}.png", s.id)))?;
        }
        let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
        write_split_manifest(root, *split, &ids)?;
        all_ids.extend(ids);
    }
    let classes: std::collections::BTreeMap<&str, u8> =
        descriptor.classes.iter().map(|c| (c.name.as_str(), c.label)).collect();
    std::fs::write(root.join("classes.json"), serde_json::to_string_pretty(&classes)?)?;
    std::fs::write(root.join("descriptor.json"), serde_json::to_string_pretty(descriptor)?)?;
    let sidecar: serde_json::Map<String, serde_json::Value> = all_ids
        .iter()
        .map(|id| (id.clone(), serde_json::json!({"color": "pink", "shape": "round"})))
        .collect();
    std::fs::write(root.join("attributes.json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
