mod common;

use std::collections::BTreeMap;

use ndarray::Array2;
use proptest::prelude::*;
use vlseg_core::eval::dice_score;
use vlseg_core::prompt::{
    count_components, eval_rng, extract_mask_attributes, label_components, AttributeKey, AttributeSet, Connectivity,
    DatasetFamily, ExtractionConfig, PromptComposer, PromptType, Provenance,
};
use vlseg_core::robust::{perturb_prompt, PerturbContext, PerturbationMode, PerturbationSpec};
use vlseg_core::train::LrScheduler;

/// Component count by depth-first flood fill from every unvisited foreground pixel.
fn flood_fill_count(mask: &Array2<u8>, connectivity: Connectivity) -> usize {
    let (rows, cols) = mask.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut count = 0;
    for r in 0..rows {
        for c in 0..cols {
            if mask[[r, c]] == 0 || seen[[r, c]] {
                continue;
            }
            count += 1;
            let mut stack = vec![(r, c)];
            seen[[r, c]] = true;
            while let Some((y, x)) = stack.pop() {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if (dy, dx) == (0, 0) || (connectivity == Connectivity::Four && dy != 0 && dx != 0) {
                            continue;
                        }
                        let (ny, nx) = (y as isize + dy, x as isize + dx);
                        if ny < 0 || nx < 0 || ny >= rows as isize || nx >= cols as isize {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if mask[[ny, nx]] != 0 && !seen[[ny, nx]] {
                            seen[[ny, nx]] = true;
                            stack.push((ny, nx));
                        }
                    }
                }
            }
        }
    }
    count
}

fn mask_from_bits(bits: u32, side: usize) -> Array2<u8> {
    Array2::from_shape_fn((side, side), |(r, c)| ((bits >> (r * side + c)) & 1) as u8)
}

#[test]
fn component_count_matches_flood_fill_on_every_4x4_mask() {
    for bits in 0..(1u32 << 16) {
        let mask = mask_from_bits(bits, 4);
        for conn in [Connectivity::Four, Connectivity::Eight] {
            assert_eq!(
                count_components(mask.view(), conn).unwrap(),
                flood_fill_count(&mask, conn),
                "mask {bits:#06x} {conn:?}"
            );
        }
    }
}

/// Dice from explicit pixel-coordinate sets.
fn set_dice(a: &Array2<u8>, b: &Array2<u8>) -> f64 {
    use std::collections::BTreeSet;
    let set = |m: &Array2<u8>| -> BTreeSet<(usize, usize)> {
        m.indexed_iter().filter(|(_, &v)| v > 0).map(|(i, _)| i).collect()
    };
    let (sa, sb) = (set(a), set(b));
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    2.0 * sa.intersection(&sb).count() as f64 / (sa.len() + sb.len()) as f64
}

fn mask_8x8() -> impl Strategy<Value = Array2<u8>> {
    any::<u64>().prop_map(|bits| Array2::from_shape_fn((8, 8), |(r, c)| ((bits >> (r * 8 + c)) & 1) as u8))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dice_matches_set_overlap_and_is_symmetric(a in mask_8x8(), b in mask_8x8()) {
        let d = dice_score(a.view(), b.view()).unwrap();
        prop_assert!((d - set_dice(&a, &b)).abs() < 1e-12);
        prop_assert_eq!(d.to_bits(), dice_score(b.view(), a.view()).unwrap().to_bits());
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

proptest! {
    #[test]
    fn component_areas_sum_to_foreground(bits in any::<u64>(), eight in any::<bool>()) {
        let mask = mask_from_bits((bits & 0xffff_ffff) as u32, 4);
        let big = Array2::from_shape_fn((8, 8), |(r, c)| ((bits >> (r * 8 + c)) & 1) as u8);
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        for m in [mask, big] {
            let total: usize = m.iter().filter(|&&v| v > 0).count();
            let comps = label_components(m.view(), conn).unwrap();
            prop_assert_eq!(comps.iter().map(|c| c.area).sum::<usize>(), total);
            let config = ExtractionConfig { connectivity: conn, ..ExtractionConfig::default() };
            let attrs = extract_mask_attributes(m.view(), &config).unwrap();
            prop_assert!((0.0..=1.0).contains(&attrs.area_ratio));
        }
    }

    #[test]
    fn plateau_lr_is_non_increasing_powers_of_the_factor(losses in prop::collection::vec(0.0f64..2.0, 1..60)) {
        let initial = 2e-3;
        let mut s = LrScheduler::plateau(initial, 0.1, 5);
        let mut prev = s.lr();
        for loss in losses {
            let lr = s.end_epoch(loss);
            prop_assert!(lr <= prev);
            let k = (initial / lr).log10().round();
            prop_assert!((lr - initial * 0.1f64.powi(k as i32)).abs() <= 1e-12 * initial);
            prev = lr;
        }
    }
}

const SIZES: [&str; 3] = ["small", "medium", "large"];
const COLORS: [&str; 4] = ["pink", "red", "white", "yellow"];
const SHAPES: [&str; 3] = ["round", "oval", "irregular"];
const NUMBERS: [&str; 3] = ["one", "two", "three"];
const LOCATIONS: [&str; 5] = ["top left", "center", "bottom right", "left", "top"];

fn endoscopy_attrs() -> impl Strategy<Value = AttributeSet> {
    (0..3usize, 0..4usize, 0..3usize, 0..3usize, 0..5usize).prop_map(|(s, c, sh, n, l)| {
        AttributeSet::new()
            .with(AttributeKey::ClassKeyword, "polyp", Provenance::Literal)
            .with(AttributeKey::Size, SIZES[s], Provenance::MaskDerived)
            .with(AttributeKey::Color, COLORS[c], Provenance::Sidecar)
            .with(AttributeKey::Shape, SHAPES[sh], Provenance::Sidecar)
            .with(AttributeKey::Number, NUMBERS[n], Provenance::MaskDerived)
            .with(AttributeKey::Location, vec![LOCATIONS[l]], Provenance::MaskDerived)
    })
}

fn tokens(s: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for t in s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        *out.entry(t.to_string()).or_insert(0) += 1;
    }
    out
}

proptest! {
    #[test]
    fn later_endoscopy_prompts_contain_the_class_name_tokens(attrs in endoscopy_attrs(), seed in any::<u64>()) {
        let composer = PromptComposer::default();
        let p1 = composer.compose(DatasetFamily::Endoscopy, PromptType::P1, &attrs, &mut eval_rng("s", "c", seed)).unwrap();
        let base = tokens(&p1);
        for ptype in [PromptType::P2, PromptType::P3, PromptType::P4, PromptType::P5, PromptType::P6] {
            let pk = composer.compose(DatasetFamily::Endoscopy, ptype, &attrs, &mut eval_rng("s", "c", seed)).unwrap();
            let have = tokens(&pk);
            for (tok, n) in &base {
                prop_assert!(have.get(tok).copied().unwrap_or(0) >= *n, "{ptype}: {pk:?} lacks {tok:?}");
            }
        }
    }

    #[test]
    fn prompts_are_deterministic(attrs in endoscopy_attrs(), seed in any::<u64>(), p in 0usize..10) {
        let ptype = PromptType::from_index(p).unwrap();
        let composer = PromptComposer::default();
        let a = composer.compose(DatasetFamily::Endoscopy, ptype, &attrs, &mut eval_rng("id", "polyp", seed)).unwrap();
        let b = composer.compose(DatasetFamily::Endoscopy, ptype, &attrs, &mut eval_rng("id", "polyp", seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

const MARK: &str = "\u{7}SLOT\u{7}";

fn perturb_modes() -> impl Strategy<Value = PerturbationSpec> {
    let keys = prop::sample::select(vec![
        AttributeKey::Size,
        AttributeKey::Color,
        AttributeKey::Shape,
        AttributeKey::Number,
        AttributeKey::Location,
    ]);
    let modes = prop::sample::select(vec![
        PerturbationMode::RandomWord,
        PerturbationMode::Opposite,
        PerturbationMode::SwapWithinDataset,
    ]);
    (modes, keys, any::<u64>()).prop_map(|(mode, key, seed)| PerturbationSpec {
        mode,
        target: Some(key),
        seed,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbation_edits_only_the_target_slot(data_seed in 0u64..1000, spec in perturb_modes(), ptype_i in 5usize..10) {
        let ptype = PromptType::from_index(ptype_i).unwrap();
        let triplets = common::blob_triplets(4, 32, data_seed, ptype);
        let ctx = PerturbContext::new(&triplets, 0);
        let key = spec.target.unwrap();
        for t in &triplets {
            let plan = t.plan.as_ref().unwrap();
            let perturbed = match perturb_prompt(t, &spec, &ctx) {
                Ok(p) => p,
                Err(_) => {
                    // only opposite may lack a mapping
                    prop_assert_eq!(spec.mode, PerturbationMode::Opposite);
                    continue;
                }
            };
            let mut wild = plan.attributes.clone();
            if key.is_multi_valued() {
                wild.set(key, vec![MARK], Provenance::Sidecar);
            } else {
                wild.set(key, MARK, Provenance::Sidecar);
            }
            let mut rng = eval_rng(&t.sample_id, &t.class_name, ctx.prompt_seed);
            let choice = ctx.composer.draw_choice(plan.family, plan.ptype, &mut rng);
            let template = ctx.composer.compose_with(plan.family, plan.ptype, &wild, choice).unwrap();
            let parts: Vec<&str> = template.split(MARK).collect();
            if parts.len() == 1 {
                // the template has no slot for the target
                prop_assert_eq!(&perturbed, &t.prompt);
                continue;
            }
            prop_assert_eq!(parts.len(), 2, "{}", template);
            for text in [&t.prompt, &perturbed] {
                prop_assert!(text.starts_with(parts[0]) && text.ends_with(parts[1]), "{text:?} vs {template:?}");
                prop_assert!(text.len() > parts[0].len() + parts[1].len());
            }
        }
    }

    #[test]
    fn seeded_random_words_are_reproducible(data_seed in 0u64..1000, seed in any::<u64>()) {
        let triplets = common::blob_triplets(3, 32, data_seed, PromptType::P6);
        let ctx = PerturbContext::new(&triplets, 0);
        let spec = PerturbationSpec { mode: PerturbationMode::RandomWord, target: Some(AttributeKey::Color), seed };
        for t in &triplets {
            prop_assert_eq!(perturb_prompt(t, &spec, &ctx).unwrap(), perturb_prompt(t, &spec, &ctx).unwrap());
        }
    }

    #[test]
    fn identity_perturbation_is_byte_identical(data_seed in 0u64..1000, p in 1usize..10) {
        let triplets = common::blob_triplets(3, 32, data_seed, PromptType::from_index(p).unwrap());
        let ctx = PerturbContext::new(&triplets, 0);
        for t in &triplets {
            prop_assert_eq!(perturb_prompt(t, &PerturbationSpec::identity(), &ctx).unwrap(), t.prompt.clone());
        }
    }
}
