//! Mask-derived prompt attributes: component count, relative size and
//! coarse location of the foreground.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        // Only neighbours that precede the current pixel in raster order.
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
        }
    }
}

impl Default for Connectivity {
    fn default() -> Self {
        Connectivity::Eight
    }
}

/// One maximal connected foreground region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub area: usize,
    /// Centroid in pixel-centre coordinates `(row, col)`.
    pub centroid: (f64, f64),
    /// First pixel in raster order; components are sorted by it.
    pub anchor: (usize, usize),
}

/// Label foreground regions. Components come back in raster order of their
/// first pixel. Any nonzero value counts as foreground.
pub fn label_components(mask: ArrayView2<'_, u8>, connectivity: Connectivity) -> Result<Vec<Component>> {
    let (rows, cols) = mask.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::DegenerateMask { rows, cols });
    }
    let mut labels = vec![0usize; rows * cols];
    let mut parent: Vec<usize> = vec![0];

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for r in 0..rows {
        for c in 0..cols {
            if mask[[r, c]] == 0 {
                continue;
            }
            let mut current = 0usize;
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nc >= cols as isize {
                    continue;
                }
                let l = labels[nr as usize * cols + nc as usize];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = find(&mut parent, l);
                } else {
                    let (a, b) = (find(&mut parent, current), find(&mut parent, l));
                    if a != b {
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        parent[hi] = lo;
                        current = lo;
                    }
                }
            }
            if current == 0 {
                current = parent.len();
                parent.push(current);
            }
            labels[r * cols + c] = current;
        }
    }

    // Roots are always the smallest label of their set, and labels are issued
    // in raster order, so sorting by root reproduces first-pixel order.
    let mut by_root: std::collections::BTreeMap<usize, (usize, f64, f64, (usize, usize))> = Default::default();
    for r in 0..rows {
        for c in 0..cols {
            let l = labels[r * cols + c];
            if l == 0 {
                continue;
            }
            let root = find(&mut parent, l);
            let e = by_root.entry(root).or_insert((0, 0.0, 0.0, (r, c)));
            e.0 += 1;
            e.1 += r as f64 + 0.5;
            e.2 += c as f64 + 0.5;
        }
    }
    let mut comps: Vec<Component> = by_root
        .into_values()
        .map(|(area, sr, sc, anchor)| Component {
            area,
            centroid: (sr / area as f64, sc / area as f64),
            anchor,
        })
        .collect();
    comps.sort_by_key(|c| c.anchor);
    Ok(comps)
}

/// Number of maximal connected foreground regions.
pub fn count_components(mask: ArrayView2<'_, u8>, connectivity: Connectivity) -> Result<usize> {
    Ok(label_components(mask, connectivity)?.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationGrid {
    /// 3x3 cells: top left, top, top right, left, center, right, bottom left, bottom, bottom right.
    ThreeByThree,
    /// Quadrants: top left, top right, bottom left, bottom right.
    TwoByTwo,
}

impl LocationGrid {
    pub fn side(self) -> usize {
        match self {
            LocationGrid::ThreeByThree => 3,
            LocationGrid::TwoByTwo => 2,
        }
    }

    pub fn cell_name(self, row: usize, col: usize) -> &'static str {
        const NINE: [[&str; 3]; 3] = [
            ["top left", "top", "top right"],
            ["left", "center", "right"],
            ["bottom left", "bottom", "bottom right"],
        ];
        const FOUR: [[&str; 2]; 2] = [["top left", "top right"], ["bottom left", "bottom right"]];
        match self {
            LocationGrid::ThreeByThree => NINE[row][col],
            LocationGrid::TwoByTwo => FOUR[row][col],
        }
    }

    /// Grid cell containing a point given in pixel-centre coordinates.
    pub fn locate(self, point: (f64, f64), shape: (usize, usize)) -> &'static str {
        let n = self.side();
        let cell = |v: f64, extent: usize| ((v / extent as f64 * n as f64).floor() as usize).min(n - 1);
        self.cell_name(cell(point.0, shape.0), cell(point.1, shape.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// `area_ratio` below the first bound is "small", below the second "medium",
    /// otherwise "large".
    pub size_bins: (f64, f64),
    pub grid: LocationGrid,
    pub connectivity: Connectivity,
    /// Components smaller than this fraction of the image are ignored for
    /// counting and location.
    pub min_component_fraction: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            size_bins: (0.10, 0.30),
            grid: LocationGrid::ThreeByThree,
            connectivity: Connectivity::Eight,
            min_component_fraction: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDerivedAttributes {
    pub component_count: usize,
    pub number_word: String,
    pub size_word: String,
    pub location_words: Vec<String>,
    pub area_ratio: f64,
    /// Components that passed the minimum-area filter, in raster order.
    pub components: Vec<Component>,
}

pub fn number_word(n: usize) -> &'static str {
    const WORDS: [&str; 11] = [
        "no", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n).copied().unwrap_or("many")
}

pub fn size_word(area_ratio: f64, bins: (f64, f64)) -> &'static str {
    if area_ratio <= 0.0 {
        "none"
    } else if area_ratio < bins.0 {
        "small"
    } else if area_ratio < bins.1 {
        "medium"
    } else {
        "large"
    }
}

pub fn extract_mask_attributes(mask: ArrayView2<'_, u8>, config: &ExtractionConfig) -> Result<MaskDerivedAttributes> {
    let shape = mask.dim();
    let total = (shape.0 * shape.1) as f64;
    let all = label_components(mask, config.connectivity)?;
    let foreground: usize = all.iter().map(|c| c.area).sum();
    let min_area = config.min_component_fraction * total;
    let components: Vec<Component> = all.into_iter().filter(|c| c.area as f64 >= min_area).collect();

    let mut location_words: Vec<String> = Vec::new();
    for comp in &components {
        let name = config.grid.locate(comp.centroid, shape);
        if !location_words.iter().any(|w| w == name) {
            location_words.push(name.to_string());
        }
    }
    let area_ratio = foreground as f64 / total;
    Ok(MaskDerivedAttributes {
        component_count: components.len(),
        number_word: number_word(components.len()).to_string(),
        size_word: size_word(if components.is_empty() { 0.0 } else { area_ratio }, config.size_bins).to_string(),
        location_words,
        area_ratio,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn empty_and_full_masks() {
        let zeros = Array2::<u8>::zeros((8, 8));
        let ones = Array2::<u8>::ones((8, 8));
        for conn in [Connectivity::Four, Connectivity::Eight] {
            assert_eq!(count_components(zeros.view(), conn).unwrap(), 0);
            assert_eq!(count_components(ones.view(), conn).unwrap(), 1);
        }
    }

    #[test]
    fn diagonal_adjacency() {
        let m = array![[1u8, 0], [0, 1]];
        assert_eq!(count_components(m.view(), Connectivity::Four).unwrap(), 2);
        assert_eq!(count_components(m.view(), Connectivity::Eight).unwrap(), 1);
    }

    #[test]
    fn degenerate_mask_is_an_error() {
        let m = Array2::<u8>::zeros((0, 0));
        let err = count_components(m.view(), Connectivity::Eight).unwrap_err();
        assert!(err.to_string().contains("degenerate mask"));
    }

    #[test]
    fn merging_labels_keeps_raster_order() {
        // A "U" shape merges two provisional labels; the separate dot comes later.
        let m = array![
            [1u8, 0, 1, 0, 0],
            [1, 0, 1, 0, 0],
            [1, 1, 1, 0, 1],
        ];
        let comps = label_components(m.view(), Connectivity::Four).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].area, 7);
        assert_eq!(comps[0].anchor, (0, 0));
        assert_eq!(comps[1].anchor, (2, 4));
    }

    #[test]
    fn small_top_left_blob() {
        let mut m = Array2::<u8>::zeros((30, 30));
        m.slice_mut(ndarray::s![0..3, 0..3]).fill(1);
        let a = extract_mask_attributes(m.view(), &ExtractionConfig::default()).unwrap();
        assert_eq!(a.number_word, "one");
        assert_eq!(a.size_word, "small");
        assert_eq!(a.location_words, vec!["top left"]);
        assert!((a.area_ratio - 0.01).abs() < 1e-12);
    }

    #[test]
    fn center_then_left_in_reading_order() {
        let mut m = Array2::<u8>::zeros((30, 30));
        // center blob starts on an earlier row than the left blob
        m.slice_mut(ndarray::s![12..18, 12..18]).fill(1);
        m.slice_mut(ndarray::s![13..17, 1..6]).fill(1);
        let a = extract_mask_attributes(m.view(), &ExtractionConfig::default()).unwrap();
        assert_eq!(a.component_count, 2);
        assert_eq!(a.number_word, "two");
        assert_eq!(a.location_words, vec!["center", "left"]);
    }

    #[test]
    fn half_covered_mask_is_large() {
        let mut m = Array2::<u8>::zeros((10, 10));
        m.slice_mut(ndarray::s![0..5, ..]).fill(1);
        let a = extract_mask_attributes(m.view(), &ExtractionConfig::default()).unwrap();
        assert_eq!(a.size_word, "large");
    }

    #[test]
    fn all_zero_mask_yields_none() {
        let m = Array2::<u8>::zeros((10, 10));
        let a = extract_mask_attributes(m.view(), &ExtractionConfig::default()).unwrap();
        assert_eq!(a.component_count, 0);
        assert_eq!(a.size_word, "none");
        assert!(a.location_words.is_empty());
    }

    #[test]
    fn speckle_is_ignored_for_counting() {
        let mut m = Array2::<u8>::zeros((100, 100));
        m.slice_mut(ndarray::s![40..60, 40..60]).fill(1);
        m[[0, 99]] = 1; // 1 px < 0.1% of 10k px
        let a = extract_mask_attributes(m.view(), &ExtractionConfig::default()).unwrap();
        assert_eq!(a.component_count, 1);
        assert_eq!(a.location_words, vec!["center"]);
        assert!((a.area_ratio - 401.0 / 10000.0).abs() < 1e-12);
    }

    #[test]
    fn number_words() {
        assert_eq!(number_word(0), "no");
        assert_eq!(number_word(1), "one");
        assert_eq!(number_word(10), "ten");
        assert_eq!(number_word(11), "many");
    }
}
