//! Dataset registry, loading, pooling and preprocessing.

mod handle;
mod pool;
mod registry;
mod resize;
pub mod synthetic;
mod triplet;

pub use handle::{open_dataset, register_dataset, write_split_manifest, DatasetHandle, Sample, SampleRef};
pub use pool::{pool, PoolKind, PooledDataset, PooledEntry};
pub use registry::{
    builtin, builtin_datasets, Category, ClassEntry, DatasetDescriptor, Split, SplitSizes, ENDOSCOPY_TEST_SETS,
    NON_RADIOLOGY_TRAIN_SETS, RADIOLOGY_TRAIN_SETS,
};
pub use resize::{
    bilinear_matrix, bilinear_taps, preprocess, resize_bilinear_2d, resize_bilinear_hwc, resize_nearest_mask, restore,
    InputSpec,
};
pub use triplet::{
    expand_multiclass, load_triplets, sample_triplets, split_classes, ClassMask, PromptPlan, SampleTriplet,
    TripletOptions,
};
