mod common;

use common::{corpus_mismatches, prompt_corpus};

#[test]
fn published_examples_reproduce_byte_exactly() {
    let cases = prompt_corpus();
    assert!(cases.len() >= 20, "only {} cases", cases.len());
    let bad = corpus_mismatches(&cases);
    assert!(bad.is_empty(), "{bad:#?}");
}
