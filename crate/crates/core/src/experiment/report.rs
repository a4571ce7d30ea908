use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::plan::ENDOSCOPY_TRAIN_SETS;
use super::run::{EVAL_DIR, REPORTS_FILE, RUNS_DIR};
use crate::data::ENDOSCOPY_TEST_SETS;
use crate::error::Result;
use crate::eval::{grouped_bar_chart, read_reports_json, EvalReport};

/// Row x column grid of Dice means; absent cells render as "-".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub title: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: BTreeMap<(String, String), f64>,
}

impl Table {
    pub fn new(title: impl Into<String>, rows: Vec<String>, cols: Vec<String>) -> Self {
        Self {
            title: title.into(),
            rows,
            cols,
            cells: BTreeMap::new(),
        }
    }

    /// Keep the larger value when a cell is set twice.
    pub fn set_max(&mut self, row: &str, col: &str, value: f64) {
        let slot = self.cells.entry((row.to_string(), col.to_string())).or_insert(value);
        *slot = slot.max(value);
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        self.cells.get(&(row.to_string(), col.to_string())).copied()
    }

    fn cell(&self, row: &str, col: &str) -> String {
        self.get(row, col).map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {}\n\n|  | {} |\n", self.title, self.cols.join(" | "));
        out.push_str(&format!("|---|{}\n", "---|".repeat(self.cols.len())));
        for r in &self.rows {
            let cells: Vec<String> = self.cols.iter().map(|c| self.cell(r, c)).collect();
            out.push_str(&format!("| {r} | {} |\n", cells.join(" | ")));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::new()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.clone()];
            rec.extend(self.cols.iter().map(|c| self.cell(r, c)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ordered<I: IntoIterator<Item = String>>(preferred: &[&str], items: I) -> Vec<String> {
    let set: BTreeSet<String> = items.into_iter().collect();
    let mut out: Vec<String> = preferred.iter().filter(|p| set.contains(**p)).map(|p| p.to_string()).collect();
    out.extend(set.into_iter().filter(|s| !preferred.contains(&s.as_str())));
    out
}

/// Finetuning regime of a report: zero-shot, individual, pooled or cross.
pub fn regime(report: &EvalReport) -> &'static str {
    match report.train_data.as_str() {
        "" | "none" => "zero-shot",
        "pool-all" => "pooled (all)",
        "pool-endoscopy" => "pooled (endoscopy)",
        t if t == report.test_data => "individual",
        _ => "cross-dataset",
    }
}

const REGIMES: [&str; 4] = ["zero-shot", "individual", "pooled (endoscopy)", "pooled (all)"];

/// Rows: regime x model; columns: test dataset; value: best prompt type.
pub fn regime_table(reports: &[EvalReport]) -> Table {
    let kept: Vec<&EvalReport> = reports
        .iter()
        .filter(|r| regime(r) != "cross-dataset" && r.perturbation == "none")
        .collect();
    let models = ordered(&[], kept.iter().map(|r| r.model.clone()));
    let mut rows = Vec::new();
    for g in REGIMES {
        for m in &models {
            if kept.iter().any(|r| regime(r) == g && &r.model == m) {
                rows.push(format!("{g} / {m}"));
            }
        }
    }
    let cols = ordered(&[], kept.iter().map(|r| r.test_data.clone()));
    let mut t = Table::new("Dice by finetuning regime", rows, cols);
    for r in kept {
        t.set_max(&format!("{} / {}", regime(r), r.model), &r.test_data, r.dice_mean);
    }
    t
}

/// One matrix per model: rows are endoscopy training sets, columns the
/// endoscopy test sets; value: best prompt type.
pub fn cross_tables(reports: &[EvalReport]) -> Vec<Table> {
    let kept: Vec<&EvalReport> = reports
        .iter()
        .filter(|r| {
            ENDOSCOPY_TRAIN_SETS.contains(&r.train_data.as_str())
                && ENDOSCOPY_TEST_SETS.contains(&r.test_data.as_str())
                && r.perturbation == "none"
        })
        .collect();
    let models = ordered(&[], kept.iter().map(|r| r.model.clone()));
    models
        .into_iter()
        .map(|m| {
            let mine: Vec<&&EvalReport> = kept.iter().filter(|r| r.model == m).collect();
            let rows = ordered(&ENDOSCOPY_TRAIN_SETS, mine.iter().map(|r| r.train_data.clone()));
            let cols = ordered(&ENDOSCOPY_TEST_SETS, mine.iter().map(|r| r.test_data.clone()));
            let mut t = Table::new(format!("Cross-dataset Dice: {m}"), rows, cols);
            for r in mine {
                t.set_max(&r.train_data, &r.test_data, r.dice_mean);
            }
            t
        })
        .collect()
}

/// Every report stored under `<root>/runs/*/eval/`.
pub fn collect_reports(root: impl AsRef<Path>) -> Result<Vec<EvalReport>> {
    let runs = root.as_ref().join(RUNS_DIR);
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(&runs) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    let mut out = Vec::new();
    for d in dirs {
        let f = d.join(EVAL_DIR).join(REPORTS_FILE);
        if f.is_file() {
            out.extend(read_reports_json(f)?);
        }
    }
    Ok(out)
}

/// Written outputs of `write_report`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub markdown: PathBuf,
    pub csv: Vec<PathBuf>,
    pub figures: Vec<PathBuf>,
}

/// Tables as markdown and CSV plus one grouped chart per test dataset
/// (prompt types x models) under `<root>/report/`.
pub fn write_report(root: impl AsRef<Path>) -> Result<ReportFiles> {
    let root = root.as_ref();
    let reports = collect_reports(root)?;
    let out = root.join("report");
    std::fs::create_dir_all(&out)?;
    let mut files = ReportFiles {
        markdown: out.join("tables.md"),
        ..ReportFiles::default()
    };
    let regime = regime_table(&reports);
    let crosses = cross_tables(&reports);
    let mut md = regime.to_markdown();
    let path = out.join("regimes.csv");
    regime.write_csv(&path)?;
    files.csv.push(path);
    for t in &crosses {
        md.push('\n');
        md.push_str(&t.to_markdown());
        let name = t.title.rsplit(": ").next().unwrap_or("model");
        let path = out.join(format!("cross_{name}.csv"));
        t.write_csv(&path)?;
        files.csv.push(path);
    }
    std::fs::write(&files.markdown, md)?;

    let individual: Vec<&EvalReport> = reports
        .iter()
        .filter(|r| r.train_data == r.test_data && r.perturbation == "none")
        .collect();
    let datasets = ordered(&[], individual.iter().map(|r| r.test_data.clone()));
    for d in datasets {
        let mine: Vec<&&EvalReport> = individual.iter().filter(|r| r.test_data == d).collect();
        let mut groups: Vec<String> = mine.iter().map(|r| r.ptype.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        groups.sort_by_key(|g| g.trim_start_matches('P').parse::<usize>().unwrap_or(usize::MAX));
        let models = ordered(&[], mine.iter().map(|r| r.model.clone()));
        let series: Vec<(String, Vec<Option<f64>>)> = models
            .iter()
            .map(|m| {
                let values = groups
                    .iter()
                    .map(|g| mine.iter().find(|r| &r.model == m && &r.ptype == g).map(|r| r.dice_mean))
                    .collect();
                (m.clone(), values)
            })
            .collect();
        let path = out.join(format!("{d}_prompts.svg"));
        grouped_bar_chart(&path, &d, "Dice (%)", &groups, &series)?;
        files.figures.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(model: &str, train: &str, test: &str, ptype: &str, mean: f64) -> EvalReport {
        EvalReport {
            model: model.into(),
            train_data: train.into(),
            test_data: test.into(),
            ptype: ptype.into(),
            perturbation: "none".into(),
            n: 1,
            dice_mean: mean,
            dice_std: 0.0,
            samples: Vec::new(),
        }
    }

    #[test]
    fn cross_matrix_has_six_columns() {
        let mut reports = Vec::new();
        for train in ENDOSCOPY_TRAIN_SETS {
            for test in ENDOSCOPY_TEST_SETS {
                reports.push(report("cris", train, test, "P1", 50.0));
            }
        }
        let tables = cross_tables(&reports);
        assert_eq!(tables.len(), 1);
        assert_eq!((tables[0].rows.len(), tables[0].cols.len()), (3, 6));
        let md = tables[0].to_markdown();
        assert!(md.lines().nth(2).unwrap().matches('|').count() == 8);
    }

    #[test]
    fn single_run_gives_single_cell_and_dashes_elsewhere() {
        let reports = vec![report("clipseg", "kvasir_seg", "kvasir_seg", "P2", 81.234)];
        let t = regime_table(&reports);
        assert_eq!((t.rows.len(), t.cols.len()), (1, 1));
        assert!(t.to_markdown().contains("| individual / clipseg | 81.23 |"));
        let mut wider = t.clone();
        wider.cols.push("busi".into());
        assert!(wider.to_markdown().contains("| 81.23 | - |"));
    }

    #[test]
    fn best_prompt_is_reported() {
        let reports = vec![
            report("cris", "busi", "busi", "P1", 40.0),
            report("cris", "busi", "busi", "P4", 60.0),
        ];
        assert_eq!(regime_table(&reports).get("individual / cris", "busi"), Some(60.0));
    }
}
