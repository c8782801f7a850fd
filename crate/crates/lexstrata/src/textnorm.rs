//! Orthographic normalization of Devanagari text, frequency-filtered
//! vocabularies, and token-id streams.
//!
//! Hindi spelling is inconsistent around the nuqta (U+093C), the subscript
//! dot that marks Perso-Arabic sounds like /q/ and /z/: the same word shows
//! up with a precomposed nuqta letter (U+0958..U+095F), with the base
//! consonant plus a combining nuqta, or with no nuqta at all. The default
//! [`NormalizationTable`] rewrites every precomposed nuqta letter to its
//! decomposed base + U+093C form so the remaining variation is a single
//! codepoint, and `fold_nuqta` optionally erases the dot entirely for
//! sensitivity analysis.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Combining nuqta mark.
pub const NUQTA: char = '\u{093C}';

/// An ordered rewrite table applied before tokenization.
///
/// Rules are tried in order at each position; the first whose source matches
/// is applied and scanning resumes after the replaced span. The table must be
/// idempotent on its own output (targets must not re-trigger rules); the
/// default table and any table of decompositions has this property.
#[derive(Debug, Clone)]
pub struct NormalizationTable {
    rules: Vec<(Vec<char>, Vec<char>)>,
    /// Erase U+093C entirely after rule application.
    pub fold_nuqta: bool,
}

impl Default for NormalizationTable {
    /// Decomposes the precomposed nuqta letters U+0958..U+095F and keeps the
    /// nuqta. Extend via [`NormalizationTable::from_rules_text`] when a corpus
    /// needs more standardization.
    fn default() -> Self {
        let pairs: [(char, char); 8] = [
            ('\u{0958}', '\u{0915}'), // क़ -> क + nuqta
            ('\u{0959}', '\u{0916}'), // ख़ -> ख + nuqta
            ('\u{095A}', '\u{0917}'), // ग़ -> ग + nuqta
            ('\u{095B}', '\u{091C}'), // ज़ -> ज + nuqta
            ('\u{095C}', '\u{0921}'), // ड़ -> ड + nuqta
            ('\u{095D}', '\u{0922}'), // ढ़ -> ढ + nuqta
            ('\u{095E}', '\u{092B}'), // फ़ -> फ + nuqta
            ('\u{095F}', '\u{092F}'), // य़ -> य + nuqta
        ];
        NormalizationTable {
            rules: pairs
                .iter()
                .map(|&(src, base)| (vec![src], vec![base, NUQTA]))
                .collect(),
            fold_nuqta: false,
        }
    }
}

impl NormalizationTable {
    /// Parse a rule file: one rule per line, `SOURCE<TAB>TARGET`, each side a
    /// space-separated list of hexadecimal codepoints. The target may be
    /// empty (deletion rule). `#` starts a comment line.
    ///
    /// ```text
    /// 0958<TAB>0915 093C
    /// 200C<TAB>
    /// ```
    pub fn from_rules_text(text: &str, fold_nuqta: bool) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut halves = line.splitn(2, '\t');
            let src_field = halves.next().unwrap_or("");
            let dst_field = halves.next().ok_or_else(|| {
                Error::config(format!(
                    "rule table line {}: missing TAB separator",
                    lineno + 1
                ))
            })?;
            let src = parse_codepoints(src_field, lineno + 1)?;
            if src.is_empty() {
                return Err(Error::config(format!(
                    "rule table line {}: empty source sequence",
                    lineno + 1
                )));
            }
            let dst = parse_codepoints(dst_field, lineno + 1)?;
            rules.push((src, dst));
        }
        Ok(NormalizationTable { rules, fold_nuqta })
    }

    /// Apply the table (and nuqta folding, if enabled) to raw text.
    pub fn apply(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            for (src, dst) in &self.rules {
                if chars[i..].starts_with(src) {
                    out.extend(dst.iter().filter(|&&c| !(self.fold_nuqta && c == NUQTA)));
                    i += src.len();
                    continue 'outer;
                }
            }
            let c = chars[i];
            if !(self.fold_nuqta && c == NUQTA) {
                out.push(c);
            }
            i += 1;
        }
        out
    }

    /// Serialize back to the rule-file syntax.
    pub fn to_rules_text(&self) -> String {
        let mut out = String::new();
        for (src, dst) in &self.rules {
            let hex = |cs: &[char]| {
                cs.iter()
                    .map(|c| format!("{:04X}", *c as u32))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(out, "{}\t{}", hex(src), hex(dst));
        }
        out
    }
}

fn parse_codepoints(field: &str, lineno: usize) -> Result<Vec<char>> {
    field
        .split_whitespace()
        .map(|tok| {
            let v = u32::from_str_radix(tok, 16).map_err(|_| {
                Error::config(format!(
                    "rule table line {lineno}: `{tok}` is not a hexadecimal codepoint"
                ))
            })?;
            char::from_u32(v).ok_or_else(|| {
                Error::config(format!(
                    "rule table line {lineno}: U+{v:04X} is not a Unicode scalar value"
                ))
            })
        })
        .collect()
}

fn is_sentence_terminator(c: char) -> bool {
    matches!(c, '\u{0964}' | '\u{0965}' | '\n' | '.' | '!' | '?')
}

/// Punctuation stripped from token edges and discarded when standalone.
fn is_strippable_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{0964}' | '\u{0965}' | '\u{0970}'            // danda, double danda, abbreviation sign
            | '\u{2018}'
                ..='\u{201F}'                        // curly quotes
            | '\u{2013}' | '\u{2014}' | '\u{2026}'            // dashes, ellipsis
            | '\u{00AB}' | '\u{00BB}' // guillemets
        )
}

/// Normalize raw text into sentences of canonical tokens.
///
/// Sentence boundaries are the danda, double danda, newline, and ASCII
/// terminal punctuation; tokens are whitespace-separated with edge
/// punctuation stripped, and tokens that are nothing but punctuation are
/// discarded. Digits and Latin-script tokens pass through as opaque tokens.
pub fn normalize(raw: &str, table: &NormalizationTable) -> Vec<Vec<String>> {
    let rewritten = table.apply(raw);
    let mut sentences = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut word = String::new();

    let flush_word = |word: &mut String, current: &mut Vec<String>| {
        if word.is_empty() {
            return;
        }
        let trimmed: &str = word
            .trim_start_matches(is_strippable_punct)
            .trim_end_matches(is_strippable_punct);
        if !trimmed.is_empty() {
            current.push(trimmed.to_string());
        }
        word.clear();
    };

    for c in rewritten.chars() {
        if is_sentence_terminator(c) {
            flush_word(&mut word, &mut current);
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
        } else if c.is_whitespace() {
            flush_word(&mut word, &mut current);
        } else {
            word.push(c);
        }
    }
    flush_word(&mut word, &mut current);
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Normalize a single lookup key with the same table as the corpus, so
/// spelling variants unify at query time. Returns `None` when nothing but
/// punctuation remains.
pub fn normalize_query(query: &str, table: &NormalizationTable) -> Option<String> {
    normalize(query, table).into_iter().flatten().next()
}

/// Canonical surface form <-> dense id <-> corpus frequency.
///
/// Ids are assigned by descending frequency, ties broken by codepoint order,
/// so construction is deterministic for a fixed input stream.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Count tokens, drop everything below `min_count`, assign ids.
    pub fn build<I, S>(tokens: I, min_count: u64) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::config("min_count must be at least 1"));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for tok in tokens {
            total += 1;
            *counts.entry(tok.as_ref().to_string()).or_insert(0) += 1;
        }
        Ok(Self::from_counts(counts, total, min_count))
    }

    /// Assemble from pre-merged counts. Sharded counting feeds this: partial
    /// `HashMap` merges are associative and order-independent.
    pub fn from_counts(
        counts: HashMap<String, u64>,
        total_tokens: u64,
        min_count: u64,
    ) -> Vocabulary {
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut surfaces = Vec::with_capacity(kept.len());
        let mut cvec = Vec::with_capacity(kept.len());
        let mut index = HashMap::with_capacity(kept.len());
        for (id, (surface, count)) in kept.into_iter().enumerate() {
            index.insert(surface.clone(), id as u32);
            surfaces.push(surface);
            cvec.push(count);
        }
        Vocabulary {
            surfaces,
            counts: cvec,
            index,
            total_tokens,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> &str {
        &self.surfaces[id as usize]
    }

    /// Frequency of an exact canonical surface.
    pub fn count(&self, surface: &str) -> Option<u64> {
        self.index.get(surface).map(|&id| self.counts[id as usize])
    }

    pub fn count_by_id(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Raw token count before frequency filtering.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// `(surface, id, count)` in id order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u32, u64)> {
        self.surfaces
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(id, (s, &c))| (s.as_str(), id as u32, c))
    }

    /// TSV rows `surface<TAB>id<TAB>count`, sorted by id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (surface, id, count) in self.entries() {
            let _ = writeln!(out, "{surface}\t{id}\t{count}");
        }
        out
    }

    /// Read the TSV format back. `total_tokens` is not stored in the file and
    /// is restored as the sum of the kept counts (a lower bound); `min_count`
    /// as the smallest stored count.
    pub fn from_tsv(reader: impl BufRead) -> Result<Vocabulary> {
        let mut rows: Vec<(String, u32, u64)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let bad = || {
                Error::validation(format!(
                    "vocabulary line {}: expected surface<TAB>id<TAB>count",
                    lineno + 1
                ))
            };
            let surface = fields.next().ok_or_else(bad)?.to_string();
            let id: u32 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let count: u64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            rows.push((surface, id, count));
        }
        rows.sort_by_key(|&(_, id, _)| id);
        let mut surfaces = Vec::with_capacity(rows.len());
        let mut counts = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (want, (surface, id, count)) in rows.into_iter().enumerate() {
            if id as usize != want {
                return Err(Error::validation(format!(
                    "vocabulary ids are not contiguous: expected {want}, found {id}"
                )));
            }
            if index.insert(surface.clone(), id).is_some() {
                return Err(Error::validation(format!("duplicate surface `{surface}`")));
            }
            surfaces.push(surface);
            counts.push(count);
        }
        let total: u64 = counts.iter().sum();
        let min_count = counts.iter().copied().min().unwrap_or(1).max(1);
        Ok(Vocabulary {
            surfaces,
            counts,
            index,
            total_tokens: total,
            min_count,
        })
    }
}

/// Frequency of `query` after normalizing it with the same table used for
/// the corpus; `None` when the word is absent or was filtered out.
pub fn frequency(vocab: &Vocabulary, table: &NormalizationTable, query: &str) -> Option<u64> {
    let canonical = normalize_query(query, table)?;
    vocab.count(&canonical)
}

/// Sentences of in-vocabulary token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub sentences: Vec<Vec<u32>>,
}

impl TokenStream {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Map token sentences to id sentences, silently dropping out-of-vocabulary
/// tokens and then any sentences left empty.
pub fn encode(sentences: &[Vec<String>], vocab: &Vocabulary) -> TokenStream {
    let sentences = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect::<Vec<u32>>())
        .filter(|s| !s.is_empty())
        .collect();
    TokenStream { sentences }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> NormalizationTable {
        NormalizationTable::default()
    }

    #[test]
    fn precomposed_qa_decomposes() {
        let out = normalize("\u{0958}", &t());
        assert_eq!(out, vec![vec!["\u{0915}\u{093C}".to_string()]]);
    }

    #[test]
    fn danda_splits_sentences() {
        let out = normalize("राम। श्याम", &t());
        assert_eq!(out, vec![vec!["राम".to_string()], vec!["श्याम".to_string()]]);
    }

    #[test]
    fn empty_input_empty_output() {
        assert!(normalize("", &t()).is_empty());
    }

    #[test]
    fn fold_nuqta_erases_the_dot() {
        let table = NormalizationTable {
            fold_nuqta: true,
            ..NormalizationTable::default()
        };
        // Both the precomposed and the decomposed spelling of zilā end up
        // identical with the dot removed.
        let a = normalize("\u{095B}िला", &table);
        let b = normalize("\u{091C}\u{093C}िला", &table);
        assert_eq!(a, b);
        assert_eq!(a, vec![vec!["जिला".to_string()]]);
    }

    #[test]
    fn punctuation_is_stripped_and_standalone_punct_dropped() {
        let out = normalize("«राम», — (श्याम)", &t());
        assert_eq!(out, vec![vec!["राम".to_string(), "श्याम".to_string()]]);
    }

    #[test]
    fn ascii_terminators_split() {
        let out = normalize("ek do! tīn? cār", &t());
        assert_eq!(out.len(), 3);
        assert_eq!(out[2], vec!["cār".to_string()]);
    }

    #[test]
    fn normalization_is_idempotent_on_default_table() {
        let raw = "क़ौम ज़रूर। फ़ौज, य़ x9 «abc»!";
        let once = normalize(raw, &t());
        let rejoined = once
            .iter()
            .map(|s| s.join(" "))
            .collect::<Vec<_>>()
            .join("\u{0964} ");
        let twice = normalize(&rejoined, &t());
        assert_eq!(once, twice);
    }

    #[test]
    fn rule_table_parses_and_applies() {
        let table =
            NormalizationTable::from_rules_text("0958\t0915 093C\n# comment\n200C\t\n", false)
                .unwrap();
        assert_eq!(table.apply("क\u{200C}\u{0958}"), "क\u{0915}\u{093C}");
    }

    #[test]
    fn rule_table_round_trips_through_text() {
        let orig = t();
        let reparsed = NormalizationTable::from_rules_text(&orig.to_rules_text(), false).unwrap();
        assert_eq!(orig.apply("क़ ख़ य़"), reparsed.apply("क़ ख़ य़"));
    }

    #[test]
    fn malformed_rule_table_names_the_line() {
        let err =
            NormalizationTable::from_rules_text("0958\t0915\nZZZZ\t0915\n", false).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = NormalizationTable::from_rules_text("0958 0915\n", false).unwrap_err();
        assert!(err.to_string().contains("TAB"), "{err}");
        // Surrogate codepoint is not a scalar value.
        let err = NormalizationTable::from_rules_text("D800\t0915\n", false).unwrap_err();
        assert!(err.to_string().contains("scalar"), "{err}");
    }

    #[test]
    fn vocabulary_min_count_filters() {
        let v = Vocabulary::build(["a", "a", "b"], 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.count("a"), Some(2));
        assert_eq!(v.count("b"), None);
    }

    #[test]
    fn vocabulary_ids_by_descending_frequency_then_codepoint() {
        let v = Vocabulary::build(["a", "a", "b"], 1).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
        let tied = Vocabulary::build(["z", "y", "z", "y"], 1).unwrap();
        assert_eq!(tied.id("y"), Some(0), "codepoint order breaks count ties");
        assert_eq!(tied.id("z"), Some(1));
    }

    #[test]
    fn alternate_min_counts_are_plain_configuration() {
        for mc in [10u64, 100, 150] {
            let v = Vocabulary::build(std::iter::repeat_n("w", 200), mc).unwrap();
            assert_eq!(v.count("w"), Some(200));
            assert_eq!(v.min_count(), mc);
        }
    }

    #[test]
    fn empty_stream_is_an_empty_vocabulary() {
        let v = Vocabulary::build(std::iter::empty::<&str>(), 5).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.total_tokens(), 0);
    }

    #[test]
    fn count_conservation() {
        let toks = ["a", "a", "a", "b", "b", "c"];
        let v1 = Vocabulary::build(toks, 1).unwrap();
        assert_eq!(v1.counts().iter().sum::<u64>(), v1.total_tokens());
        let v2 = Vocabulary::build(toks, 2).unwrap();
        assert!(v2.counts().iter().sum::<u64>() < v2.total_tokens());
    }

    #[test]
    fn sharded_counts_merge_to_the_same_vocabulary() {
        let toks = ["a", "b", "a", "c", "a", "b", "d", "a"];
        let whole = Vocabulary::build(toks, 2).unwrap();
        // Count the two halves independently and merge; merge order must not
        // matter.
        let count = |slice: &[&str]| {
            let mut m = HashMap::new();
            for t in slice {
                *m.entry(t.to_string()).or_insert(0u64) += 1;
            }
            m
        };
        let (first, second) = toks.split_at(3);
        for (a, b) in [(count(first), count(second)), (count(second), count(first))] {
            let mut merged = a;
            for (k, v) in b {
                *merged.entry(k).or_insert(0) += v;
            }
            let sharded = Vocabulary::from_counts(merged, toks.len() as u64, 2);
            assert_eq!(sharded.to_tsv(), whole.to_tsv());
        }
    }

    #[test]
    fn encode_drops_oov_and_empty_sentences() {
        let v = Vocabulary::build(["a", "a", "b"], 1).unwrap();
        let sents = vec![
            vec!["a".to_string(), "b".to_string(), "x".to_string()],
            vec!["x".to_string()],
        ];
        let stream = encode(&sents, &v);
        assert_eq!(stream.sentences, vec![vec![0, 1]]);
        // Re-encoding the decoded stream is the identity given a fixed vocab.
        let decoded: Vec<Vec<String>> = stream
            .sentences
            .iter()
            .map(|s| s.iter().map(|&id| v.surface(id).to_string()).collect())
            .collect();
        assert_eq!(encode(&decoded, &v), stream);
    }

    #[test]
    fn frequency_normalizes_queries() {
        let table = t();
        let sents = normalize("क़ौम क़ौम क़ौम राम", &table);
        let v = Vocabulary::build(sents.iter().flatten(), 1).unwrap();
        // Precomposed query finds the decomposed entry.
        assert_eq!(frequency(&v, &table, "\u{0958}ौम"), Some(3));
        assert_eq!(frequency(&v, &table, "राम"), Some(1));
        assert_eq!(frequency(&v, &table, "श्याम"), None);
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = Vocabulary::build(["से", "से", "का", "का", "का", "और"], 1).unwrap();
        let tsv = v.to_tsv();
        let back = Vocabulary::from_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(back.len(), v.len());
        for (s, id, c) in v.entries() {
            assert_eq!(back.id(s), Some(id));
            assert_eq!(back.count(s), Some(c));
        }
    }

    #[test]
    fn vocab_tsv_rejects_gaps_and_duplicates() {
        assert!(Vocabulary::from_tsv("a\t0\t5\nb\t2\t4\n".as_bytes()).is_err());
        assert!(Vocabulary::from_tsv("a\t0\t5\na\t1\t4\n".as_bytes()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn devanagari_text() -> impl Strategy<Value = String> {
            // Mix of Devanagari letters, precomposed nuqta forms, the nuqta
            // itself, whitespace, terminators and ASCII punctuation.
            let ch = prop_oneof![
                (0x0904u32..0x0940).prop_map(|c| char::from_u32(c).unwrap()),
                (0x0958u32..=0x095F).prop_map(|c| char::from_u32(c).unwrap()),
                Just(NUQTA),
                Just(' '),
                Just('\u{0964}'),
                Just('.'),
                Just(','),
                Just('a'),
                Just('1'),
            ];
            proptest::collection::vec(ch, 0..60).prop_map(String::from_iter)
        }

        proptest! {
            #[test]
            fn normalize_is_idempotent(raw in devanagari_text()) {
                let table = NormalizationTable::default();
                let once = normalize(&raw, &table);
                let rejoined = once
                    .iter()
                    .map(|s| s.join(" "))
                    .collect::<Vec<_>>()
                    .join("\u{0964}");
                let twice = normalize(&rejoined, &table);
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn vocabulary_build_is_deterministic(
                toks in proptest::collection::vec("[a-e]{1,3}", 0..100),
                min_count in 1u64..4,
            ) {
                let v1 = Vocabulary::build(toks.iter(), min_count).unwrap();
                let v2 = Vocabulary::build(toks.iter(), min_count).unwrap();
                prop_assert_eq!(v1.to_tsv(), v2.to_tsv());
                let kept: u64 = v1.counts().iter().sum();
                prop_assert!(kept <= v1.total_tokens());
                if min_count == 1 {
                    prop_assert_eq!(kept, v1.total_tokens());
                }
                for (_, _, c) in v1.entries() {
                    prop_assert!(c >= min_count);
                }
            }
        }
    }
}
