use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::handle::DatasetHandle;
use super::registry::{Split, SplitSizes};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolKind {
    All,
    EndoscopyOnly,
}

/// A sample of a pooled dataset, tagged with its source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledEntry {
    pub member: usize,
    pub sample_index: usize,
}

#[derive(Debug, Clone)]
pub struct PooledDataset {
    pub kind: PoolKind,
    pub members: Vec<DatasetHandle>,
    entries: [Vec<PooledEntry>; 3],
}

fn split_slot(split: Split) -> usize {
    match split {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    }
}

impl PooledDataset {
    pub fn entries(&self, split: Split) -> &[PooledEntry] {
        &self.entries[split_slot(split)]
    }

    pub fn sizes(&self) -> SplitSizes {
        SplitSizes::new(
            self.entries(Split::Train).len(),
            self.entries(Split::Val).len(),
            self.entries(Split::Test).len(),
        )
    }

    pub fn member_name(&self, entry: &PooledEntry) -> &str {
        self.members[entry.member].name()
    }

    pub fn sample_id(&self, entry: &PooledEntry, split: Split) -> &str {
        &self.members[entry.member].samples(split)[entry.sample_index].id
    }

    /// Entry order for one epoch; a pure function of `(seed, epoch)`.
    pub fn shuffled(&self, split: Split, seed: u64, epoch: u64) -> Vec<PooledEntry> {
        let mut order = self.entries(split).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.shuffle(&mut rng);
        order
    }
}

/// Concatenate datasets into one training pool. Test-only members are
/// rejected because the pool provides train and validation splits.
pub fn pool(handles: Vec<DatasetHandle>, kind: PoolKind) -> Result<PooledDataset> {
    if handles.is_empty() {
        return Err(Error::Config("cannot pool zero datasets".into()));
    }
    for h in &handles {
        if h.descriptor.test_only {
            return Err(Error::TestOnlyInTraining(h.name().to_string()));
        }
        if kind == PoolKind::EndoscopyOnly && !h.descriptor.is_endoscopy() {
            return Err(Error::NotEndoscopy(h.name().to_string()));
        }
    }
    let mut entries: [Vec<PooledEntry>; 3] = Default::default();
    for split in Split::ALL {
        let slot = &mut entries[split_slot(split)];
        for (member, h) in handles.iter().enumerate() {
            slot.extend((0..h.samples(split).len()).map(|sample_index| PooledEntry { member, sample_index }));
        }
    }
    Ok(PooledDataset {
        kind,
        members: handles,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::registry::builtin;

    fn declared(name: &str) -> DatasetHandle {
        DatasetHandle::declared(builtin(name).unwrap())
    }

    #[test]
    fn endoscopy_pool_train_size() {
        let p = pool(
            vec![declared("kvasir_seg"), declared("clinicdb"), declared("bkai")],
            PoolKind::EndoscopyOnly,
        )
        .unwrap();
        assert_eq!(p.sizes().train, 2090);
        assert_eq!(p.sizes().val, 261);
        assert_eq!(p.sizes().test, 261);
    }

    #[test]
    fn pool_of_one_is_identity() {
        let h = declared("clinicdb");
        let p = pool(vec![h.clone()], PoolKind::All).unwrap();
        assert_eq!(p.sizes(), h.observed_sizes());
        for split in Split::ALL {
            let ids: Vec<&str> = p.entries(split).iter().map(|e| p.sample_id(e, split)).collect();
            assert_eq!(ids, h.ids(split).collect::<Vec<_>>());
        }
    }

    #[test]
    fn test_only_and_family_guards() {
        let err = pool(vec![declared("kvasir_seg"), declared("etis")], PoolKind::All).unwrap_err();
        assert!(matches!(err, Error::TestOnlyInTraining(ref n) if n == "etis"));
        let err = pool(vec![declared("kvasir_seg"), declared("isic2016")], PoolKind::EndoscopyOnly).unwrap_err();
        assert!(matches!(err, Error::NotEndoscopy(_)));
    }

    #[test]
    fn shuffle_is_deterministic_permutation() {
        let p = pool(vec![declared("kvasir_seg"), declared("bkai")], PoolKind::All).unwrap();
        let a = p.shuffled(Split::Train, 7, 3);
        let b = p.shuffled(Split::Train, 7, 3);
        let c = p.shuffled(Split::Train, 7, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut sorted = a.clone();
        sorted.sort_by_key(|e| (e.member, e.sample_index));
        assert_eq!(sorted, p.entries(Split::Train));
    }
}
