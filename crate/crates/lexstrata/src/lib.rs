//! Detect the etymological stratum of Hindi near-synonyms from
//! distributional context alone.
//!
//! The pipeline: normalize a Devanagari corpus and build a frequency-filtered
//! vocabulary ([`textnorm`]), load a Sanskrit/Perso-Arabic synonym-pair list
//! ([`lexicon`]), train skip-gram embeddings ([`embed`]), classify word
//! origin with a from-scratch random forest ([`forest`]), attribute
//! predictions to embedding dimensions with exact TreeSHAP ([`explain`]),
//! and run the repeated-evaluation experiment battery ([`lab`]). A synthetic
//! corpus generator with planted strata ([`syngen`]) makes every step
//! verifiable at desk scale with known ground truth.
//!
//! Everything stochastic is seeded: the same configuration and seed produce
//! byte-identical outputs.

pub mod embed;
pub mod error;
pub mod explain;
pub mod forest;
pub mod lab;
pub mod lexicon;
pub mod pipeline;
pub mod rng;
pub mod syngen;
pub mod textnorm;

pub use error::{Error, Result};
pub use lexicon::Origin;

// Run every code snippet in the guide as a doctest so the book can never
// drift from the library.
#[cfg(doctest)]
mod booktest {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(normalization, "../../../book/src/normalization.md");
    chapter!(lexicon, "../../../book/src/lexicon.md");
    chapter!(embeddings, "../../../book/src/embeddings.md");
    chapter!(forests, "../../../book/src/forests.md");
    chapter!(shap, "../../../book/src/shap.md");
    chapter!(experiments, "../../../book/src/experiments.md");
    chapter!(synthetic, "../../../book/src/synthetic.md");
    chapter!(cli, "../../../book/src/cli.md");
}
