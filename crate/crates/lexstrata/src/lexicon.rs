//! The synonym-pair wordlist: loading, validation, frequency statistics.
//!
//! A lexicon is a flat TSV, one word per line:
//!
//! ```text
//! surface<TAB>origin<TAB>pair_id<TAB>gloss<TAB>variant1,variant2
//! ```
//!
//! `origin` is `SANSKRIT` or `PERSO_ARABIC`; every `pair_id` must occur
//! exactly twice, once per origin, and no surface (or variant) may appear in
//! two entries (homonyms are excluded from the study design). Surfaces and
//! variants are normalized with the same table as the corpus so spelling
//! variants unify at lookup time.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{normalize_query, NormalizationTable, Vocabulary};

/// Etymological stratum of a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "SANSKRIT")]
    Sanskrit,
    #[serde(rename = "PERSO_ARABIC")]
    PersoArabic,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Sanskrit => "SANSKRIT",
            Origin::PersoArabic => "PERSO_ARABIC",
        })
    }
}

impl FromStr for Origin {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "SANSKRIT" => Ok(Origin::Sanskrit),
            "PERSO_ARABIC" => Ok(Origin::PersoArabic),
            _ => Err(()),
        }
    }
}

impl Origin {
    pub fn other(self) -> Origin {
        match self {
            Origin::Sanskrit => Origin::PersoArabic,
            Origin::PersoArabic => Origin::Sanskrit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub origin: Origin,
    pub pair_id: u32,
    pub gloss: String,
    pub variants: Vec<String>,
}

/// A validated pair list.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    /// Any surface or variant -> entry index.
    by_surface: HashMap<String, usize>,
    /// pair_id -> (sanskrit entry index, perso-arabic entry index).
    pairs: HashMap<u32, (usize, usize)>,
}

impl Lexicon {
    /// Parse and validate lexicon TSV. Surfaces and variants are first run
    /// through `table` so the lexicon and the corpus share one orthography.
    pub fn parse(text: &str, table: &NormalizationTable) -> Result<Lexicon> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(Error::validation(format!(
                    "lexicon line {}: expected surface<TAB>origin<TAB>pair_id[<TAB>gloss[<TAB>variants]]",
                    lineno + 1
                )));
            }
            let surface = normalize_query(fields[0], table).ok_or_else(|| {
                Error::validation(format!("lexicon line {}: empty surface", lineno + 1))
            })?;
            let origin = Origin::from_str(fields[1]).map_err(|_| {
                Error::validation(format!(
                    "lexicon line {}: unknown origin tag `{}` (expected SANSKRIT or PERSO_ARABIC)",
                    lineno + 1,
                    fields[1]
                ))
            })?;
            let pair_id: u32 = fields[2].parse().map_err(|_| {
                Error::validation(format!(
                    "lexicon line {}: pair id `{}` is not an integer",
                    lineno + 1,
                    fields[2]
                ))
            })?;
            let gloss = fields.get(3).unwrap_or(&"").to_string();
            let variants: Vec<String> = fields
                .get(4)
                .unwrap_or(&"")
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| {
                    normalize_query(v, table).ok_or_else(|| {
                        Error::validation(format!(
                            "lexicon line {}: variant `{v}` is empty after normalization",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            entries.push(LexiconEntry {
                surface,
                origin,
                pair_id,
                gloss,
                variants,
            });
        }
        Lexicon::from_entries(entries)
    }

    /// Validate pre-built entries (homonym exclusion, pair completeness).
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Lexicon> {
        let mut by_surface: HashMap<String, usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            for s in std::iter::once(&e.surface).chain(&e.variants) {
                if by_surface.insert(s.clone(), i).is_some() {
                    return Err(Error::validation(format!(
                        "surface `{s}` occurs in two entries (homonyms are excluded)"
                    )));
                }
            }
        }
        let mut members: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            members.entry(e.pair_id).or_default().push(i);
        }
        let mut pairs = HashMap::new();
        for (pair_id, idxs) in members {
            if idxs.len() != 2 {
                return Err(Error::validation(format!(
                    "pair {pair_id} has {} member(s), expected exactly 2",
                    idxs.len()
                )));
            }
            let (a, b) = (idxs[0], idxs[1]);
            match (entries[a].origin, entries[b].origin) {
                (Origin::Sanskrit, Origin::PersoArabic) => {
                    pairs.insert(pair_id, (a, b));
                }
                (Origin::PersoArabic, Origin::Sanskrit) => {
                    pairs.insert(pair_id, (b, a));
                }
                (o, _) => {
                    return Err(Error::validation(format!(
                        "pair {pair_id} has two {o} members; each pair needs one of each origin"
                    )));
                }
            }
        }
        Ok(Lexicon {
            entries,
            by_surface,
            pairs,
        })
    }

    pub fn load(path: impl AsRef<Path>, table: &NormalizationTable) -> Result<Lexicon> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(&text, table)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Resolve a surface or variant to its entry.
    pub fn entry_for(&self, surface: &str) -> Option<&LexiconEntry> {
        self.by_surface.get(surface).map(|&i| &self.entries[i])
    }

    /// Map any spelling variant to the entry's main surface.
    pub fn canonical_surface(&self, surface: &str) -> Option<&str> {
        self.entry_for(surface).map(|e| e.surface.as_str())
    }

    /// The other member of the entry's pair.
    pub fn partner(&self, surface: &str) -> Option<&LexiconEntry> {
        let e = self.entry_for(surface)?;
        let &(s, p) = self.pairs.get(&e.pair_id)?;
        let partner_idx = if self.entries[s].surface == e.surface {
            p
        } else {
            s
        };
        Some(&self.entries[partner_idx])
    }

    /// Corpus frequency of an entry: the main surface's count plus all
    /// variant counts (orthographic variants are one word).
    pub fn entry_count(&self, entry: &LexiconEntry, vocab: &Vocabulary) -> u64 {
        std::iter::once(&entry.surface)
            .chain(&entry.variants)
            .filter_map(|s| vocab.count(s))
            .sum()
    }

    /// List entries whose main surface is missing from the vocabulary, and
    /// entries whose total count falls below `warn_below`.
    pub fn validate_against_vocab(&self, vocab: &Vocabulary, warn_below: u64) -> VocabReport {
        let mut report = VocabReport::default();
        for e in &self.entries {
            if vocab.count(&e.surface).is_none() {
                report.missing.push(e.surface.clone());
            } else {
                let c = self.entry_count(e, vocab);
                if c < warn_below {
                    report.low_count.push((e.surface.clone(), c));
                }
            }
        }
        report
    }

    /// Enforce the vocabulary policy. Strict mode aborts on the first missing
    /// word; lenient mode drops the *whole pair* of every missing word (never
    /// one member alone) and reports what was dropped.
    pub fn apply_vocab_policy(
        &self,
        vocab: &Vocabulary,
        mode: VocabMode,
        warn_below: u64,
    ) -> Result<(Lexicon, VocabReport)> {
        let mut report = self.validate_against_vocab(vocab, warn_below);
        if report.missing.is_empty() {
            return Ok((self.clone(), report));
        }
        match mode {
            VocabMode::Strict => Err(Error::validation(format!(
                "word `{}` is not in the vocabulary (strict mode; {} missing in total)",
                report.missing[0],
                report.missing.len()
            ))),
            VocabMode::Lenient => {
                let mut dropped: Vec<u32> = report
                    .missing
                    .iter()
                    .filter_map(|s| self.entry_for(s).map(|e| e.pair_id))
                    .collect();
                dropped.sort_unstable();
                dropped.dedup();
                let kept: Vec<LexiconEntry> = self
                    .entries
                    .iter()
                    .filter(|e| !dropped.contains(&e.pair_id))
                    .cloned()
                    .collect();
                report.dropped_pairs = dropped;
                Ok((Lexicon::from_entries(kept)?, report))
            }
        }
    }

    /// Per-word frequency shares within each pair.
    ///
    /// `rel_share(w) + rel_share(partner(w)) = 1` exactly: the second share
    /// is computed as `1 - first`, not re-divided.
    pub fn pair_stats(&self, vocab: &Vocabulary) -> Result<Vec<PairStats>> {
        let mut out = Vec::with_capacity(self.entries.len());
        let mut shares: HashMap<u32, (f64, u64, u64)> = HashMap::new();
        let mut ids: Vec<&u32> = self.pairs.keys().collect();
        ids.sort_unstable();
        for &pair_id in ids {
            let &(s, p) = &self.pairs[&pair_id];
            let cs = self.entry_count(&self.entries[s], vocab);
            let cp = self.entry_count(&self.entries[p], vocab);
            let total = cs + cp;
            if total == 0 {
                return Err(Error::validation(format!(
                    "pair {pair_id}: zero total count, share is undefined"
                )));
            }
            shares.insert(pair_id, (cs as f64 / total as f64, cs, cp));
        }
        for e in &self.entries {
            let &(sanskrit_share, cs, cp) = &shares[&e.pair_id];
            let (raw_count, rel_share) = match e.origin {
                Origin::Sanskrit => (cs, sanskrit_share),
                Origin::PersoArabic => (cp, 1.0 - sanskrit_share),
            };
            out.push(PairStats {
                surface: e.surface.clone(),
                origin: e.origin,
                pair_id: e.pair_id,
                raw_count,
                rel_share,
                signed_diff: rel_share - 0.5,
            });
        }
        Ok(out)
    }

    /// Serialize back to the TSV format (line order preserved).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.surface,
                e.origin,
                e.pair_id,
                e.gloss,
                e.variants.join(",")
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VocabReport {
    pub missing: Vec<String>,
    pub low_count: Vec<(String, u64)>,
    pub dropped_pairs: Vec<u32>,
}

impl VocabReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.low_count.is_empty()
    }
}

/// Frequency statistics for one pair member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStats {
    pub surface: String,
    pub origin: Origin,
    pub pair_id: u32,
    pub raw_count: u64,
    /// count / (count + partner count), in [0, 1].
    pub rel_share: f64,
    /// rel_share - 0.5, in [-0.5, +0.5].
    pub signed_diff: f64,
}

/// The wordlist bundled for tests and demos (24 pairs).
pub const SAMPLE_LEXICON_TSV: &str = include_str!("../data/sample_lexicon.tsv");

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> NormalizationTable {
        NormalizationTable::default()
    }

    #[test]
    fn well_formed_pair_loads() {
        let lex = Lexicon::parse(
            "देश\tSANSKRIT\t1\tcountry\t\nमुल्क\tPERSO_ARABIC\t1\tcountry\t\n",
            &table(),
        )
        .unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.entries()[0].pair_id, lex.entries()[1].pair_id);
        assert_eq!(lex.partner("देश").unwrap().surface, "मुल्क");
    }

    #[test]
    fn two_sanskrit_members_rejected() {
        let err = Lexicon::parse(
            "देश\tSANSKRIT\t1\tcountry\nदेस\tSANSKRIT\t1\tcountry\n",
            &table(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("two SANSKRIT members"), "{err}");
    }

    #[test]
    fn odd_pair_rejected() {
        let err = Lexicon::parse("देश\tSANSKRIT\t1\tcountry\n", &table()).unwrap_err();
        assert!(err.to_string().contains("expected exactly 2"), "{err}");
    }

    #[test]
    fn duplicate_surface_rejected() {
        let err = Lexicon::parse(
            "देश\tSANSKRIT\t1\tc\nमुल्क\tPERSO_ARABIC\t1\tc\nदेश\tSANSKRIT\t2\tc\nवतन\tPERSO_ARABIC\t2\tc\n",
            &table(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("occurs in two entries"), "{err}");
    }

    #[test]
    fn unknown_origin_names_line() {
        let err = Lexicon::parse("देश\tSKT\t1\tcountry\n", &table()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(err.to_string().contains("SKT"), "{err}");
    }

    #[test]
    fn bundled_sample_is_valid_and_contains_named_pairs() {
        let lex = Lexicon::parse(SAMPLE_LEXICON_TSV, &table()).unwrap();
        assert!(lex.pair_count() >= 20, "{} pairs", lex.pair_count());
        for (sans, perso) in [
            ("राष्ट्र", "क़ौम"),
            ("धर्म", "मज़हब"),
            ("सेना", "फ़ौज"),
            ("देश", "मुल्क"),
        ] {
            let e = lex
                .entry_for(&normalize_query(sans, &table()).unwrap())
                .unwrap_or_else(|| panic!("{sans} missing"));
            assert_eq!(e.origin, Origin::Sanskrit);
            let p = lex.partner(&e.surface).unwrap();
            assert_eq!(p.surface, normalize_query(perso, &table()).unwrap());
            assert_eq!(p.origin, Origin::PersoArabic);
        }
    }

    #[test]
    fn a_full_replication_list_has_270_entries() {
        // The real study list is 135 pairs; any syntactically valid list of
        // that size must load to 270 entries.
        let mut text = String::new();
        for i in 0..135 {
            text.push_str(&format!("s{i}\tSANSKRIT\t{i}\tgloss\n"));
            text.push_str(&format!("p{i}\tPERSO_ARABIC\t{i}\tgloss\n"));
        }
        let lex = Lexicon::parse(&text, &table()).unwrap();
        assert_eq!(lex.len(), 270);
        assert_eq!(lex.pair_count(), 135);
    }

    #[test]
    fn variants_resolve_and_sum_counts() {
        let lex = Lexicon::parse(
            "क़ौम\tPERSO_ARABIC\t1\tnation\tकौम\nराष्ट्र\tSANSKRIT\t1\tnation\t\n",
            &table(),
        )
        .unwrap();
        let sents = crate::textnorm::normalize("क़ौम कौम कौम राष्ट्र", &table());
        let vocab = Vocabulary::build(sents.iter().flatten(), 1).unwrap();
        let canon = lex.canonical_surface("कौम").unwrap().to_string();
        assert_eq!(canon, normalize_query("क़ौम", &table()).unwrap());
        let entry = lex.entry_for(&canon).unwrap();
        assert_eq!(lex.entry_count(entry, &vocab), 3);
    }

    fn two_pair_lexicon() -> Lexicon {
        Lexicon::parse(
            "a\tSANSKRIT\t1\tg\nb\tPERSO_ARABIC\t1\tg\nc\tSANSKRIT\t2\tg\nd\tPERSO_ARABIC\t2\tg\n",
            &table(),
        )
        .unwrap()
    }

    #[test]
    fn vocab_policy_all_present() {
        let lex = two_pair_lexicon();
        let vocab = Vocabulary::build(["a", "b", "c", "d"], 1).unwrap();
        let (kept, report) = lex
            .apply_vocab_policy(&vocab, VocabMode::Strict, 0)
            .unwrap();
        assert!(report.is_clean());
        assert_eq!(kept.len(), 4);
    }

    #[test]
    fn vocab_policy_lenient_drops_whole_pair() {
        let lex = two_pair_lexicon();
        let vocab = Vocabulary::build(["a", "c", "d"], 1).unwrap(); // b missing
        let (kept, report) = lex
            .apply_vocab_policy(&vocab, VocabMode::Lenient, 0)
            .unwrap();
        assert_eq!(report.missing, vec!["b".to_string()]);
        assert_eq!(report.dropped_pairs, vec![1]);
        assert_eq!(kept.len(), 2);
        assert!(kept.entry_for("a").is_none(), "a's pair must go with b");
        assert!(kept.entry_for("c").is_some());
    }

    #[test]
    fn vocab_policy_strict_names_the_word() {
        let lex = two_pair_lexicon();
        let vocab = Vocabulary::build(["a", "c", "d"], 1).unwrap();
        let err = lex
            .apply_vocab_policy(&vocab, VocabMode::Strict, 0)
            .unwrap_err();
        assert!(err.to_string().contains('b'), "{err}");
    }

    #[test]
    fn pair_stats_match_reference_ratio() {
        let lex = two_pair_lexicon();
        let mut toks: Vec<&str> = Vec::new();
        toks.extend(std::iter::repeat_n("a", 9778));
        toks.extend(std::iter::repeat_n("b", 221));
        toks.extend(std::iter::repeat_n("c", 3));
        toks.extend(std::iter::repeat_n("d", 1));
        let vocab = Vocabulary::build(toks, 1).unwrap();
        let stats = lex.pair_stats(&vocab).unwrap();
        let by_surface: HashMap<&str, &PairStats> =
            stats.iter().map(|s| (s.surface.as_str(), s)).collect();
        assert!((by_surface["a"].rel_share - 0.9779).abs() < 1e-4);
        assert!((by_surface["b"].rel_share - 0.0221).abs() < 1e-4);
        assert_eq!(by_surface["c"].rel_share, 0.75);
        assert_eq!(by_surface["d"].rel_share, 0.25);
        // Exact complementarity within every pair.
        for s in &stats {
            let partner = lex.partner(&s.surface).unwrap();
            let p = by_surface[partner.surface.as_str()];
            assert_eq!(s.rel_share + p.rel_share, 1.0);
        }
    }

    #[test]
    fn equal_counts_give_zero_signed_diff() {
        let lex = two_pair_lexicon();
        let vocab = Vocabulary::build(["a", "b", "c", "c", "d", "d"], 1).unwrap();
        let stats = lex.pair_stats(&vocab).unwrap();
        for s in stats {
            assert_eq!(s.signed_diff, 0.0, "{}", s.surface);
        }
    }

    #[test]
    fn zero_total_count_is_an_error() {
        let lex = two_pair_lexicon();
        let vocab = Vocabulary::build(["a", "b"], 1).unwrap(); // pair 2 absent
        assert!(lex.pair_stats(&vocab).is_err());
    }

    #[test]
    fn tsv_round_trip_is_identity() {
        let lex = Lexicon::parse(SAMPLE_LEXICON_TSV, &table()).unwrap();
        let back = Lexicon::parse(&lex.to_tsv(), &table()).unwrap();
        assert_eq!(lex.entries(), back.entries());
    }
}
