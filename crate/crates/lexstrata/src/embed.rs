//! Skip-gram-with-negative-sampling word embeddings.
//!
//! For every (center, window-word) pair the trainer maximizes
//! `log σ(u·v) + Σ_j log σ(-u·n_j)` where `u` is the center word's row of the
//! input matrix, `v` the window word's row of the context matrix and `n_j`
//! are rows of `k` noise words drawn with probability proportional to
//! `count^noise_power`. The window is a fixed five words (configurable) to
//! each side, not the randomly shrunk window of other implementations.
//!
//! Training is deterministic with `workers = 1` and a fixed seed. With more
//! workers the corpus is partitioned and parameters are updated without
//! coordination; lost updates are tolerated and results are not reproducible
//! bit-for-bit. Single-worker mode is what the test suites use.

use std::cell::Cell;
use std::collections::HashMap;
use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{split_mix, Rng};
use crate::textnorm::{TokenStream, Vocabulary};

/// Step-size floor the linear decay stops at.
const MIN_STEP_SIZE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    /// Vector length.
    pub dim: usize,
    /// Context window, in words to each side.
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Starting SGD step size, decayed linearly to 1e-4 over training.
    pub initial_step_size: f64,
    /// Frequent-word subsampling threshold; 0 disables.
    pub subsample_threshold: f64,
    /// Exponent on counts in the negative-sampling noise distribution.
    pub noise_power: f64,
    pub seed: u64,
    /// Training workers; 1 (the default) is the deterministic mode.
    pub workers: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_step_size: 0.025,
            subsample_threshold: 1e-3,
            noise_power: 0.75,
            seed: 42,
            workers: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config("embedding dim must be at least 1"));
        }
        if self.window < 1 {
            return Err(Error::config("context window must be at least 1"));
        }
        if self.negatives < 1 {
            return Err(Error::config("negative sample count must be at least 1"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.initial_step_size <= 0.0 || self.initial_step_size.is_nan() {
            return Err(Error::config("initial step size must be positive"));
        }
        if self.subsample_threshold < 0.0 {
            return Err(Error::config("subsample threshold must be >= 0"));
        }
        Ok(())
    }
}

/// Discrete sampler over vocabulary ids with `P(i) ∝ count(i)^power`.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Build the negative-sampling distribution. Needs at least two words, or
/// negatives could never differ from the positive.
pub fn build_noise_table(vocab: &Vocabulary, noise_power: f64) -> Result<NoiseTable> {
    if vocab.len() < 2 {
        return Err(Error::validation(format!(
            "noise table needs a vocabulary of at least 2 words, got {}",
            vocab.len()
        )));
    }
    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(noise_power))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let probs = weights.iter().map(|w| w / total).collect();
    Ok(NoiseTable { probs, cumulative })
}

impl NoiseTable {
    pub fn probability(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    pub fn sample(&self, rng: &mut Rng) -> u32 {
        let total = *self.cumulative.last().unwrap();
        let r = rng.next_f64() * total;
        let idx = self.cumulative.partition_point(|&c| c <= r);
        idx.min(self.cumulative.len() - 1) as u32
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Loss and exact gradients of the SGNS objective for one positive pair and
/// its negatives. The slow, allocating sibling of the trainer's inner loop,
/// kept public for inspection and gradient checking.
#[derive(Debug, Clone)]
pub struct SgnsGradients {
    pub loss: f64,
    pub d_center: Vec<f64>,
    pub d_context: Vec<f64>,
    pub d_negatives: Vec<Vec<f64>>,
}

pub fn sgns_loss_grad(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> Result<SgnsGradients> {
    let dim = center.len();
    if context.len() != dim || negatives.iter().any(|n| n.len() != dim) {
        return Err(Error::config("all vectors must share one length"));
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(center) || !finite(context) || !negatives.iter().all(|n| finite(n)) {
        return Err(Error::validation("non-finite input vector"));
    }

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let s = dot(center, context);
    let sig_pos = sigmoid(s);
    let mut loss = -sig_pos.ln();
    let mut d_center: Vec<f64> = context.iter().map(|&v| -(1.0 - sig_pos) * v).collect();
    let d_context: Vec<f64> = center.iter().map(|&u| -(1.0 - sig_pos) * u).collect();
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for n in negatives {
        let t = dot(center, n);
        let sig_neg = sigmoid(t);
        loss -= sigmoid(-t).ln();
        for (dc, &nv) in d_center.iter_mut().zip(*n) {
            *dc += sig_neg * nv;
        }
        d_negatives.push(center.iter().map(|&u| sig_neg * u).collect());
    }
    Ok(SgnsGradients {
        loss,
        d_center,
        d_context,
        d_negatives,
    })
}

/// Cosine similarity, `u·v / (‖u‖‖v‖)`, clamped into [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::config("cosine needs vectors of one length"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu2: f64 = u.iter().map(|a| a * a).sum();
    let nv2: f64 = v.iter().map(|b| b * b).sum();
    if nu2 == 0.0 || nv2 == 0.0 {
        return Err(Error::validation(
            "cosine similarity is undefined for a zero vector",
        ));
    }
    // A single square root of the product keeps cosine(v, v) exactly 1.
    Ok((dot / (nu2 * nv2).sqrt()).clamp(-1.0, 1.0))
}

/// Trained embeddings: one input (word) vector and one context vector per
/// vocabulary id, plus the surface ↔ row mapping.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    dim: usize,
    surfaces: Vec<String>,
    index: HashMap<String, usize>,
    input: Vec<f64>,
    context: Vec<f64>,
    pub config: EmbedConfig,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    /// The word vector (input-matrix row) for a canonical surface.
    pub fn vector(&self, surface: &str) -> Option<&[f64]> {
        self.index
            .get(surface)
            .map(|&row| &self.input[row * self.dim..(row + 1) * self.dim])
    }

    /// Context-matrix row; a training-time artifact, zeroed in loaded models.
    pub fn context_vector(&self, surface: &str) -> Option<&[f64]> {
        self.index
            .get(surface)
            .map(|&row| &self.context[row * self.dim..(row + 1) * self.dim])
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().all(|x| x.is_finite()) && self.context.iter().all(|x| x.is_finite())
    }

    /// Text format: header `dim<TAB>|V|`, then one `surface<TAB>v1...vdim`
    /// row per word. Floats are written in shortest round-trip form, so a
    /// load restores the input matrix exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\t{}\n", self.dim, self.surfaces.len()));
        for (row, surface) in self.surfaces.iter().enumerate() {
            out.push_str(surface);
            for x in self.row(row) {
                out.push('\t');
                out.push_str(&format!("{x}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_reader(reader: impl BufRead) -> Result<EmbeddingModel> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::validation("empty model file"))??;
        let mut parts = header.split('\t');
        let bad_header = || Error::validation("model header must be `dim<TAB>vocab_size`");
        let dim: usize = parts
            .next()
            .ok_or_else(bad_header)?
            .parse()
            .map_err(|_| bad_header())?;
        let vocab_size: usize = parts
            .next()
            .ok_or_else(bad_header)?
            .parse()
            .map_err(|_| bad_header())?;
        let mut surfaces = Vec::with_capacity(vocab_size);
        let mut index = HashMap::with_capacity(vocab_size);
        let mut input = Vec::with_capacity(vocab_size * dim);
        for (rowno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let surface = fields
                .next()
                .ok_or_else(|| Error::validation(format!("model row {}: empty", rowno + 1)))?
                .to_string();
            let mut count = 0;
            for f in fields {
                let x: f64 = f.parse().map_err(|_| {
                    Error::validation(format!("model row {}: bad float `{f}`", rowno + 1))
                })?;
                input.push(x);
                count += 1;
            }
            if count != dim {
                return Err(Error::validation(format!(
                    "model row {}: expected {dim} components, found {count}",
                    rowno + 1
                )));
            }
            index.insert(surface.clone(), surfaces.len());
            surfaces.push(surface);
        }
        if surfaces.len() != vocab_size {
            return Err(Error::validation(format!(
                "model header promises {vocab_size} rows, found {}",
                surfaces.len()
            )));
        }
        let context = vec![0.0; surfaces.len() * dim];
        Ok(EmbeddingModel {
            dim,
            surfaces,
            index,
            input,
            context,
            config: EmbedConfig {
                dim,
                ..EmbedConfig::default()
            },
        })
    }
}

/// Parameter storage the inner loop reads and writes through. One
/// implementation is plain cells (single worker, deterministic), the other
/// shares the matrices across threads hogwild-style.
trait Store {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

struct CellStore<'a>(&'a [Cell<f64>]);

impl Store for CellStore<'_> {
    #[inline(always)]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }

    #[inline(always)]
    fn add(&self, i: usize, delta: f64) {
        let c = &self.0[i];
        c.set(c.get() + delta);
    }
}

struct AtomicStore<'a>(&'a [AtomicU64]);

impl Store for AtomicStore<'_> {
    #[inline(always)]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline(always)]
    fn add(&self, i: usize, delta: f64) {
        // Plain read-modify-write; concurrent lost updates are tolerated.
        let a = &self.0[i];
        let v = f64::from_bits(a.load(Ordering::Relaxed)) + delta;
        a.store(v.to_bits(), Ordering::Relaxed);
    }
}

/// Incremental SGNS trainer; [`train`] is the convenience wrapper that runs
/// all configured epochs. Exposing epochs lets tests watch quantities evolve.
pub struct SgnsTrainer<'a> {
    stream: &'a TokenStream,
    vocab: &'a Vocabulary,
    pub config: EmbedConfig,
    noise: NoiseTable,
    keep_prob: Option<Vec<f64>>,
    input: Vec<f64>,
    context: Vec<f64>,
    /// Raw token positions consumed so far, across epochs (drives step decay).
    processed: u64,
    total_positions: u64,
    epoch: usize,
}

impl<'a> SgnsTrainer<'a> {
    pub fn new(
        stream: &'a TokenStream,
        vocab: &'a Vocabulary,
        config: EmbedConfig,
    ) -> Result<Self> {
        config.validate()?;
        if stream.sentences.is_empty() {
            return Err(Error::validation("cannot train on an empty token stream"));
        }
        for s in &stream.sentences {
            if let Some(&id) = s.iter().find(|&&id| id as usize >= vocab.len()) {
                return Err(Error::validation(format!(
                    "token id {id} out of range for vocabulary of {}",
                    vocab.len()
                )));
            }
        }
        let noise = build_noise_table(vocab, config.noise_power)?;
        let keep_prob = if config.subsample_threshold > 0.0 {
            let total: u64 = vocab.counts().iter().sum();
            let tt = config.subsample_threshold * total as f64;
            Some(
                vocab
                    .counts()
                    .iter()
                    .map(|&c| {
                        let f = c as f64;
                        ((tt / f).sqrt() + tt / f).min(1.0)
                    })
                    .collect(),
            )
        } else {
            None
        };

        // Input rows uniform in [-0.5/dim, +0.5/dim], context rows zero.
        let dim = config.dim;
        let mut init_rng = Rng::from_seed(split_mix(config.seed, 0));
        let input: Vec<f64> = (0..vocab.len() * dim)
            .map(|_| (init_rng.next_f64() - 0.5) / dim as f64)
            .collect();
        let context = vec![0.0; vocab.len() * dim];
        let total_positions = stream.token_count() as u64 * config.epochs as u64;
        Ok(SgnsTrainer {
            stream,
            vocab,
            config,
            noise,
            keep_prob,
            input,
            context,
            processed: 0,
            total_positions,
            epoch: 0,
        })
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    /// Train one pass over the corpus.
    pub fn run_epoch(&mut self) {
        let workers = self.config.workers.max(1);
        let n_sentences = self.stream.sentences.len();
        let processed = AtomicU64::new(self.processed);

        if workers == 1 {
            let input = Cell::from_mut(self.input.as_mut_slice()).as_slice_of_cells();
            let context = Cell::from_mut(self.context.as_mut_slice()).as_slice_of_cells();
            let mut rng =
                Rng::from_seed(split_mix(split_mix(self.config.seed, 1), self.epoch as u64));
            train_chunk(
                &CellStore(input),
                &CellStore(context),
                &self.stream.sentences,
                &self.config,
                &self.noise,
                self.keep_prob.as_deref(),
                &mut rng,
                &processed,
                self.total_positions,
            );
        } else {
            let input_bits: Vec<AtomicU64> = self
                .input
                .iter()
                .map(|x| AtomicU64::new(x.to_bits()))
                .collect();
            let context_bits: Vec<AtomicU64> = self
                .context
                .iter()
                .map(|x| AtomicU64::new(x.to_bits()))
                .collect();
            std::thread::scope(|scope| {
                for w in 0..workers {
                    let start = n_sentences * w / workers;
                    let stop = n_sentences * (w + 1) / workers;
                    let chunk = &self.stream.sentences[start..stop];
                    let input_ref = &input_bits;
                    let context_ref = &context_bits;
                    let processed_ref = &processed;
                    let config = &self.config;
                    let noise = &self.noise;
                    let keep = self.keep_prob.as_deref();
                    let seed = split_mix(split_mix(config.seed, 1 + w as u64), self.epoch as u64);
                    let total = self.total_positions;
                    scope.spawn(move || {
                        let mut rng = Rng::from_seed(seed);
                        train_chunk(
                            &AtomicStore(input_ref),
                            &AtomicStore(context_ref),
                            chunk,
                            config,
                            noise,
                            keep,
                            &mut rng,
                            processed_ref,
                            total,
                        );
                    });
                }
            });
            for (dst, src) in self.input.iter_mut().zip(&input_bits) {
                *dst = f64::from_bits(src.load(Ordering::Relaxed));
            }
            for (dst, src) in self.context.iter_mut().zip(&context_bits) {
                *dst = f64::from_bits(src.load(Ordering::Relaxed));
            }
        }

        self.processed = processed.load(Ordering::Relaxed);
        self.epoch += 1;
    }

    pub fn into_model(self) -> EmbeddingModel {
        let surfaces: Vec<String> = (0..self.vocab.len())
            .map(|id| self.vocab.surface(id as u32).to_string())
            .collect();
        let index = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        EmbeddingModel {
            dim: self.config.dim,
            surfaces,
            index,
            input: self.input,
            context: self.context,
            config: self.config,
        }
    }

    /// Snapshot accessor for tests that watch training evolve.
    pub fn current_vectors(&self, id: u32) -> (&[f64], &[f64]) {
        let dim = self.config.dim;
        let off = id as usize * dim;
        (&self.input[off..off + dim], &self.context[off..off + dim])
    }
}

/// Train embeddings over a token stream. Deterministic for `workers = 1`.
pub fn train(
    stream: &TokenStream,
    vocab: &Vocabulary,
    config: EmbedConfig,
) -> Result<EmbeddingModel> {
    let mut trainer = SgnsTrainer::new(stream, vocab, config)?;
    for _ in 0..trainer.config.epochs {
        trainer.run_epoch();
    }
    Ok(trainer.into_model())
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
fn train_chunk<S: Store>(
    input: &S,
    context: &S,
    sentences: &[Vec<u32>],
    config: &EmbedConfig,
    noise: &NoiseTable,
    keep_prob: Option<&[f64]>,
    rng: &mut Rng,
    processed: &AtomicU64,
    total_positions: u64,
) {
    let dim = config.dim;
    let window = config.window;
    let mut kept: Vec<u32> = Vec::new();
    let mut center_buf = vec![0.0f64; dim];
    let mut center_delta = vec![0.0f64; dim];

    for sentence in sentences {
        // Frequent-word subsampling compacts the sentence before windows
        // are applied, so surviving words see slightly wider raw spans.
        kept.clear();
        match keep_prob {
            Some(kp) => {
                for &id in sentence {
                    if rng.next_f64() < kp[id as usize] {
                        kept.push(id);
                    }
                }
            }
            None => kept.extend_from_slice(sentence),
        }

        let done =
            processed.fetch_add(sentence.len() as u64, Ordering::Relaxed) + sentence.len() as u64;
        let remaining = 1.0 - done as f64 / total_positions as f64;
        let alpha = (config.initial_step_size * remaining).max(MIN_STEP_SIZE);

        for i in 0..kept.len() {
            let center = kept[i] as usize;
            let center_off = center * dim;
            for d in 0..dim {
                center_buf[d] = input.get(center_off + d);
                center_delta[d] = 0.0;
            }
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(kept.len());
            let mut touched = false;
            for j in lo..hi {
                if j == i {
                    continue;
                }
                touched = true;
                let ctx = kept[j];
                let ctx_off = ctx as usize * dim;

                // Positive pair: push σ(u·v) toward 1.
                let mut s = 0.0;
                for d in 0..dim {
                    s += center_buf[d] * context.get(ctx_off + d);
                }
                let g = (1.0 - sigmoid(s)) * alpha;
                for d in 0..dim {
                    let v = context.get(ctx_off + d);
                    center_delta[d] += g * v;
                    context.add(ctx_off + d, g * center_buf[d]);
                }

                // Negatives: push σ(u·n) toward 0. A draw equal to the
                // positive context word is skipped, not redrawn.
                for _ in 0..config.negatives {
                    let neg = noise.sample(rng);
                    if neg == ctx {
                        continue;
                    }
                    let neg_off = neg as usize * dim;
                    let mut t = 0.0;
                    for d in 0..dim {
                        t += center_buf[d] * context.get(neg_off + d);
                    }
                    let g = -sigmoid(t) * alpha;
                    for d in 0..dim {
                        let n = context.get(neg_off + d);
                        center_delta[d] += g * n;
                        context.add(neg_off + d, g * center_buf[d]);
                    }
                }
            }
            if touched {
                for d in 0..dim {
                    input.add(center_off + d, center_delta[d]);
                }
            }
        }
    }
}
