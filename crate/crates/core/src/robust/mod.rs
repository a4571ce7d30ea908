//! Prompt-perturbation probes: attribute swaps, antonyms, nonsense words and
//! class-name-only prompts.

mod opposite;
mod perturb;
mod suite;
mod words;

pub use opposite::OppositeMap;
pub use perturb::{
    default_specs, observed_values, perturb_prompt, PerturbContext, PerturbationMode, PerturbationSpec,
};
pub use suite::{run_perturbation_suite, PerturbationResult, SuiteConfig, SuiteReport};
pub use words::UNCOMMON_WORDS;
