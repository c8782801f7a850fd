//! Synthetic corpora with two planted lexical strata and known ground truth.
//!
//! Every synthetic synonym pair has one member per stratum and a shared
//! "meaning": a small set of topic words from a common pool that both members
//! co-occur with. A context token is drawn from the member's own stratum pool
//! with probability `separation`; otherwise it comes from the shared pool:
//! half from the member's own "quirk" words, a quarter from the pair's topic
//! words, a quarter uniformly from the whole pool.
//!
//! The quirk component mirrors the idiosyncratic collocations real
//! near-synonyms keep, and it is load-bearing: without it the two members of
//! a pair become duplicate points in embedding space with opposite labels,
//! and any sufficiently flexible classifier then memorizes the training
//! member and systematically *inverts* the held-out member, an artifact of
//! degenerate geometry rather than a stratum signal. Quirk words are drawn by an
//! identical stratum-blind procedure for both members, so with
//! `separation = 0` the two strata stay statistically identical and the
//! pipeline scores at chance (the oracle this generator exists for), while
//! `separation → 1` plants a fully stratum-marked context.
//!
//! Output is deterministic byte-for-byte for a fixed seed and uses the same
//! file formats the normalizer and lexicon loader consume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Dataset;
use crate::lexicon::Origin;
use crate::rng::{split_mix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_pairs: usize,
    /// Stratum-marked context words per stratum; the shared topic pool has
    /// the same size.
    pub n_context_words: usize,
    /// Probability that a context token is drawn from the target word's own
    /// stratum pool rather than the pair's shared topic words.
    pub separation: f64,
    pub sentences_per_word: usize,
    pub sentence_length: usize,
    /// Within-pair frequency skew; 0 = balanced. The majority member of pair
    /// `i` receives a share `1 / (1 + 2^-zipf_exponent)` of the pair's
    /// sentences.
    pub zipf_exponent: f64,
    pub seed: u64,
    /// Fraction of pairs generated at `weak_separation` instead of
    /// `separation` (the first ceil(fraction * n_pairs) pairs).
    pub weak_pair_fraction: f64,
    pub weak_separation: f64,
    /// Emit Devanagari surfaces (including precomposed nuqta letters) so the
    /// generated corpus exercises the normalizer end to end.
    pub devanagari: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_pairs: 20,
            n_context_words: 100,
            separation: 0.9,
            sentences_per_word: 100,
            sentence_length: 10,
            zipf_exponent: 0.0,
            seed: 42,
            weak_pair_fraction: 0.0,
            weak_separation: 0.2,
            devanagari: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 1 || self.n_context_words < 1 || self.sentences_per_word < 1 {
            return Err(Error::config("all synthetic counts must be at least 1"));
        }
        if self.sentence_length < 2 {
            return Err(Error::config(
                "sentences need at least the target word plus one context token",
            ));
        }
        for (name, p) in [
            ("separation", self.separation),
            ("weak_pair_fraction", self.weak_pair_fraction),
            ("weak_separation", self.weak_separation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.zipf_exponent < 0.0 {
            return Err(Error::config("zipf_exponent must be >= 0"));
        }
        Ok(())
    }
}

/// Topic words shared by both members of a pair.
const TOPICS_PER_PAIR: usize = 3;
/// Idiosyncratic context words private to one pair member.
const QUIRKS_PER_WORD: usize = 3;

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// One sentence per line, in the corpus input format.
    pub corpus_text: String,
    /// The matching ground-truth lexicon in the loader's TSV format.
    pub lexicon_tsv: String,
}

fn devanagari_fold(token: &str) -> String {
    // ASCII -> Devanagari-ish surfaces. `p` maps to the precomposed nuqta
    // letter U+095E so normalization has real work to do.
    token
        .chars()
        .map(|c| match c {
            's' => 'स',
            'p' => '\u{095E}',
            'c' => 'च',
            'h' => 'श',
            't' => 'त',
            '0'..='9' => char::from_u32('\u{0966}' as u32 + (c as u32 - '0' as u32)).unwrap(),
            other => other,
        })
        .collect()
}

struct Words {
    sanskrit: Vec<String>,
    perso: Vec<String>,
    pool_sanskrit: Vec<String>,
    pool_perso: Vec<String>,
    shared: Vec<String>,
}

fn make_words(config: &SynthConfig) -> Words {
    let fold: fn(&str) -> String = if config.devanagari {
        |t| devanagari_fold(t)
    } else {
        |t| t.to_string()
    };
    Words {
        sanskrit: (0..config.n_pairs)
            .map(|i| fold(&format!("s{i:03}")))
            .collect(),
        perso: (0..config.n_pairs)
            .map(|i| fold(&format!("p{i:03}")))
            .collect(),
        pool_sanskrit: (0..config.n_context_words)
            .map(|j| fold(&format!("cs{j:03}")))
            .collect(),
        pool_perso: (0..config.n_context_words)
            .map(|j| fold(&format!("cp{j:03}")))
            .collect(),
        shared: (0..config.n_context_words)
            .map(|j| fold(&format!("sh{j:03}")))
            .collect(),
    }
}

/// Generate `(corpus, lexicon)` text. Deterministic for a fixed config.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let words = make_words(config);
    let mut rng = Rng::from_seed(split_mix(config.seed, 0));

    let weak_pairs =
        ((config.weak_pair_fraction * config.n_pairs as f64).ceil() as usize).min(config.n_pairs);
    // Majority share of the pair's sentence budget under the skew exponent.
    let major_share = 1.0 / (1.0 + (-config.zipf_exponent).exp2());

    let mut sentences: Vec<String> = Vec::new();
    let mut lexicon = String::new();
    for pair in 0..config.n_pairs {
        let separation = if pair < weak_pairs {
            config.weak_separation
        } else {
            config.separation
        };
        // The pair's shared meaning: consecutive topic words off a ring, so
        // neighboring pairs overlap in 2 of 3 topics. Overlap keeps every
        // embedding neighborhood class-balanced; disjoint topic triples
        // would isolate each pair as a point cluster (see module docs).
        let topics: Vec<&str> = (0..TOPICS_PER_PAIR)
            .map(|t| words.shared[(pair + t) % words.shared.len()].as_str())
            .collect();

        // Stratum-blind idiosyncrasies, one draw per member.
        let quirks_sanskrit: Vec<usize> =
            rng.sample_indices(words.shared.len(), QUIRKS_PER_WORD.min(words.shared.len()));
        let quirks_perso: Vec<usize> =
            rng.sample_indices(words.shared.len(), QUIRKS_PER_WORD.min(words.shared.len()));

        let total_sentences = 2 * config.sentences_per_word;
        let major_count = ((total_sentences as f64) * major_share).round() as usize;
        let major_count = major_count.clamp(1, total_sentences - 1);
        let sanskrit_is_major = rng.gen_range(2) == 0;
        let (sanskrit_count, perso_count) = if sanskrit_is_major {
            (major_count, total_sentences - major_count)
        } else {
            (total_sentences - major_count, major_count)
        };

        for (member, origin, count, quirks) in [
            (
                &words.sanskrit[pair],
                Origin::Sanskrit,
                sanskrit_count,
                &quirks_sanskrit,
            ),
            (
                &words.perso[pair],
                Origin::PersoArabic,
                perso_count,
                &quirks_perso,
            ),
        ] {
            let pool = match origin {
                Origin::Sanskrit => &words.pool_sanskrit,
                Origin::PersoArabic => &words.pool_perso,
            };
            for _ in 0..count {
                let mut sentence = String::new();
                let target_pos = rng.gen_range(config.sentence_length);
                for pos in 0..config.sentence_length {
                    if pos > 0 {
                        sentence.push(' ');
                    }
                    if pos == target_pos {
                        sentence.push_str(member);
                    } else if rng.next_f64() < separation {
                        sentence.push_str(&pool[rng.gen_range(pool.len())]);
                    } else {
                        match rng.gen_range(4) {
                            0 => sentence.push_str(topics[rng.gen_range(topics.len())]),
                            1 | 2 => sentence
                                .push_str(&words.shared[quirks[rng.gen_range(quirks.len())]]),
                            _ => {
                                sentence.push_str(&words.shared[rng.gen_range(words.shared.len())])
                            }
                        }
                    }
                }
                sentences.push(sentence);
            }
        }

        lexicon.push_str(&format!(
            "{}\tSANSKRIT\t{}\tmeaning-{pair:03}\t\n",
            words.sanskrit[pair],
            pair + 1
        ));
        lexicon.push_str(&format!(
            "{}\tPERSO_ARABIC\t{}\tmeaning-{pair:03}\t\n",
            words.perso[pair],
            pair + 1
        ));
    }
    // Shuffle the emission order: grouped-by-pair output would let
    // training-schedule effects (learning-rate decay) correlate with pair
    // and stratum identity.
    rng.shuffle(&mut sentences);
    let mut corpus = String::with_capacity(sentences.iter().map(|s| s.len() + 1).sum());
    for s in &sentences {
        corpus.push_str(s);
        corpus.push('\n');
    }
    Ok(SynthCorpus {
        corpus_text: corpus,
        lexicon_tsv: lexicon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub n_samples: usize,
    pub n_features: usize,
    /// The one feature carrying label signal.
    pub informative_dim: usize,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            n_samples: 200,
            n_features: 50,
            informative_dim: 10,
            seed: 42,
        }
    }
}

/// A labeled vector dataset where the label depends only on the sign of one
/// dimension; every other dimension is standard-normal noise. The first half
/// of the samples is forced negative on that dimension (SANSKRIT), the
/// second half positive (PERSO_ARABIC), so classes are balanced exactly.
pub fn plant_single_dimension(config: &PlantConfig) -> Result<Dataset> {
    if config.n_samples < 4 {
        return Err(Error::config("planted dataset needs at least 4 samples"));
    }
    if config.informative_dim >= config.n_features {
        return Err(Error::config(format!(
            "informative dim {} out of range ({} features)",
            config.informative_dim, config.n_features
        )));
    }
    let mut rng = Rng::from_seed(split_mix(config.seed, 1));
    let half = config.n_samples / 2;
    let mut features = Vec::with_capacity(config.n_samples * config.n_features);
    let mut labels = Vec::with_capacity(config.n_samples);
    let mut surfaces = Vec::with_capacity(config.n_samples);
    for i in 0..config.n_samples {
        let negative = i < half;
        for d in 0..config.n_features {
            let mut x = rng.next_normal();
            if d == config.informative_dim {
                // Keep a margin away from zero so the signal is clean.
                x = x.abs().max(0.05);
                if negative {
                    x = -x;
                }
            }
            features.push(x);
        }
        labels.push(if negative {
            Origin::Sanskrit
        } else {
            Origin::PersoArabic
        });
        surfaces.push(format!("w{i:03}"));
    }
    Dataset::new(features, config.n_features, labels, surfaces, None)
}
