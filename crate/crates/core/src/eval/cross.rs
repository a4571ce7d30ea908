use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalReport};
use crate::data::SampleTriplet;
use crate::error::{Error, Result};
use crate::model::SegModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCell {
    pub train_data: String,
    pub test_data: String,
    /// Test set is the held-out split of the training dataset.
    pub in_distribution: bool,
    pub report: EvalReport,
}

/// Every (training dataset, test dataset) pairing of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDatasetMatrix {
    pub model: String,
    pub train_sets: Vec<String>,
    pub test_sets: Vec<String>,
    pub cells: Vec<CrossCell>,
}

impl CrossDatasetMatrix {
    pub fn get(&self, train: &str, test: &str) -> Option<&CrossCell> {
        self.cells.iter().find(|c| c.train_data == train && c.test_data == test)
    }

    pub fn in_distribution_count(&self) -> usize {
        self.cells.iter().filter(|c| c.in_distribution).count()
    }

    /// `train_data,test_data,in_distribution,n,dice_mean,dice_std` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["train_data", "test_data", "in_distribution", "n", "dice_mean", "dice_std"])?;
        for c in &self.cells {
            w.write_record([
                c.train_data.clone(),
                c.test_data.clone(),
                c.in_distribution.to_string(),
                c.report.n.to_string(),
                format!("{:.4}", c.report.dice_mean),
                format!("{:.4}", c.report.dice_std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Evaluate the model trained on each of `train_sets` on every test set.
/// `load` returns `None` when no checkpoint exists for a training set.
pub fn cross_dataset_eval<F>(
    train_sets: &[String],
    test_sets: &[(String, Vec<SampleTriplet>)],
    batch_size: usize,
    mut load: F,
) -> Result<CrossDatasetMatrix>
where
    F: FnMut(&str) -> Result<Option<Box<dyn SegModel>>>,
{
    let families: BTreeSet<_> = test_sets
        .iter()
        .flat_map(|(_, ts)| ts.iter().filter_map(|t| t.plan.as_ref().map(|p| p.family)))
        .collect();
    if families.len() > 1 {
        return Err(Error::Config(format!(
            "cross-dataset test sets span several families: {families:?}"
        )));
    }
    let mut cells = Vec::new();
    let mut model_name = String::new();
    for train in train_sets {
        let model = load(train)?.ok_or_else(|| Error::MissingCell {
            train: train.clone(),
            test: test_sets.first().map(|(n, _)| n.clone()).unwrap_or_default(),
        })?;
        model_name = model.name();
        for (test, triplets) in test_sets {
            let report = evaluate(model.as_ref(), triplets, batch_size)?.with_train_data(train.clone());
            cells.push(CrossCell {
                train_data: train.clone(),
                test_data: test.clone(),
                in_distribution: train == test,
                report,
            });
        }
    }
    Ok(CrossDatasetMatrix {
        model: model_name,
        train_sets: train_sets.to_vec(),
        test_sets: test_sets.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}
