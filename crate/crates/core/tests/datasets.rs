use std::sync::Arc;

use ndarray::{array, Array2, Array3};
use vlseg_core::data::{builtin, sample_triplets, InputSpec, Sample, TripletOptions};
use vlseg_core::eval::evaluate;
use vlseg_core::model::ConstantModel;
use vlseg_core::prompt::PromptType;

fn sample(id: &str, labels: Array2<u8>) -> Sample {
    let (h, w) = labels.dim();
    Sample {
        id: id.into(),
        image: Arc::new(Array3::zeros((h, w, 3))),
        labels,
    }
}

/// Three hand-annotated chest x-ray label masks (label = 1-based class index).
fn annotated() -> Vec<(Sample, Vec<u8>)> {
    vec![
        // Cardiomegaly (2) and Pleural Effusion (8)
        (
            sample("a", array![[0, 2, 2, 0], [0, 2, 2, 0], [8, 0, 0, 0], [8, 8, 0, 0]]),
            vec![2, 8],
        ),
        // nothing present
        (sample("b", Array2::zeros((4, 4))), vec![]),
        // Atelectasis (1), Edema (4) and Airspace Opacity (7)
        (
            sample("c", array![[1, 1, 0, 0], [0, 0, 0, 4], [7, 0, 0, 4], [7, 7, 0, 0]]),
            vec![1, 4, 7],
        ),
    ]
}

#[test]
fn chexlocalize_triplets_match_hand_counts() {
    let d = builtin("chexlocalize").unwrap();
    let options = TripletOptions::new(PromptType::P1);
    let mut all = Vec::new();
    for (s, present) in annotated() {
        let t = sample_triplets(&s, &d, None, None, &options).unwrap();
        assert_eq!(t.len(), 10, "{}", s.id);
        let non_empty: Vec<&str> = t.iter().filter(|x| x.mask.iter().any(|&v| v > 0)).map(|x| x.class_name.as_str()).collect();
        let expected: Vec<&str> = present.iter().map(|&l| d.classes[usize::from(l) - 1].name.as_str()).collect();
        assert_eq!(non_empty, expected, "{}", s.id);
        // per-class masks reconstruct the foreground exactly
        let mut union = Array2::<u8>::zeros(s.labels.dim());
        for x in &t {
            union = union + &x.mask;
        }
        assert_eq!(union, s.labels.mapv(|v| u8::from(v > 0)));
        assert!(t.iter().all(|x| x.prompt == format!("{} in a chest Xray.", x.class_name)));
        all.extend(t);
    }
    // 8 + 10 + 7 empty triplets out of 30
    let empty = all.iter().filter(|x| x.mask.iter().all(|&v| v == 0)).count();
    assert_eq!((all.len(), empty), (30, 25));

    // An all-background predictor scores 100 on empty triplets and 0 elsewhere.
    let model = ConstantModel::new(-1.0, InputSpec::clip(8), 8);
    let report = evaluate(&model, &all, 7).unwrap();
    assert!((report.dice_mean - 100.0 * 25.0 / 30.0).abs() < 1e-9, "{}", report.dice_mean);
}
