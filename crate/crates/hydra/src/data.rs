//! Synthetic parallel corpora with controllable, enumerable translation
//! ambiguity, plus tokenization and vocabulary handling.
//!
//! The generator is the ground truth for diversity experiments: for any
//! source sentence the exact set of valid translations can be enumerated
//! (synonym choices times an optional clause swap), so decoder outputs can
//! be scored for both validity and diversity against an oracle.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Frequency-sorted vocabulary with the four reserved specials at ids 0-3.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds from sentences: specials first, then words by descending
    /// frequency, ties broken lexicographically.
    pub fn build<'a>(sentences: impl Iterator<Item = &'a [String]>) -> Result<Self> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut any = false;
        for sent in sentences {
            any = true;
            for w in sent {
                *counts.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(Error::invalid_argument(
                "cannot build vocabulary from empty corpus",
            ));
        }
        let mut entries: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|(w, _)| !SPECIAL_TOKENS.contains(w))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(entries.into_iter().map(|(w, _)| w.to_string()))
            .collect();
        Vocab::from_id_list(words)
    }

    /// Rebuilds from a full id-ordered word list (checkpoint loading).
    pub fn from_id_list(words: Vec<String>) -> Result<Self> {
        if words.len() < 4 || words[..4] != SPECIAL_TOKENS.map(String::from) {
            return Err(Error::format(
                "vocabulary must start with the four special tokens",
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::format(format!("duplicate vocabulary entry {w}")));
            }
        }
        Ok(Vocab { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Source-side encoding: token ids followed by EOS.
    pub fn encode_source(&self, words: &[String]) -> Vec<u32> {
        let mut ids: Vec<u32> = words.iter().map(|w| self.id(w)).collect();
        ids.push(EOS_ID);
        ids
    }

    /// Target-side encoding: raw token ids; BOS/EOS handling belongs to the
    /// model.
    pub fn encode_target(&self, words: &[String]) -> Vec<u32> {
        words.iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.words[i as usize].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Original,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub split: Split,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelCorpus {
    pub pairs: Vec<CorpusPair>,
}

impl ParallelCorpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusPair> {
        self.pairs.iter().filter(move |p| p.split == split)
    }
}

/// Optional clause-swap rule: a marker token splits the sentence into two
/// blocks, and a valid translation may emit them in either order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderRule {
    /// Probability that a generated sentence contains the marker.
    pub marker_prob: f64,
}

pub const MARKER_WORD: &str = "swp";

/// Parameters of a synthetic translation task. The lexicon is derived
/// deterministically from these fields, so the spec is the task.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTaskSpec {
    /// Number of regular source words (marker excluded).
    pub src_vocab_size: usize,
    /// Synonym count for ambiguous words.
    pub synonyms: usize,
    /// Fraction of source words that are ambiguous.
    pub ambiguous_fraction: f64,
    pub reorder: Option<ReorderRule>,
    pub len_range: (usize, usize),
    pub corpus_size: usize,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        ToyTaskSpec {
            src_vocab_size: 60,
            synonyms: 1,
            ambiguous_fraction: 0.0,
            reorder: None,
            len_range: (3, 8),
            corpus_size: 2000,
            seed: 1,
        }
    }
}

const TAG_AMBIGUITY: u64 = 0x616d62; // "amb"
const TAG_SENTENCE: u64 = 0x73656e; // "sen"

impl ToyTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.src_vocab_size == 0 {
            return Err(Error::invalid_argument("src_vocab_size must be positive"));
        }
        if self.synonyms == 0 || self.synonyms > 26 {
            return Err(Error::invalid_argument("synonyms must be in 1..=26"));
        }
        if !(0.0..=1.0).contains(&self.ambiguous_fraction) {
            return Err(Error::invalid_argument(
                "ambiguous_fraction must be in [0,1]",
            ));
        }
        if let Some(r) = &self.reorder {
            if !(0.0..=1.0).contains(&r.marker_prob) {
                return Err(Error::invalid_argument("marker_prob must be in [0,1]"));
            }
        }
        if self.len_range.0 == 0 || self.len_range.0 > self.len_range.1 {
            return Err(Error::invalid_argument(format!(
                "bad length range {:?}",
                self.len_range
            )));
        }
        if self.corpus_size == 0 {
            return Err(Error::invalid_argument("corpus_size must be positive"));
        }
        Ok(())
    }

    pub fn source_word(&self, i: usize) -> String {
        format!("w{i}")
    }

    /// Key-value text form of the task (the task file format).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("vocab = {}\n", self.src_vocab_size));
        s.push_str(&format!("synonyms = {}\n", self.synonyms));
        s.push_str(&format!("ambiguous = {}\n", self.ambiguous_fraction));
        if let Some(r) = &self.reorder {
            s.push_str(&format!("marker = {}\n", r.marker_prob));
        }
        s.push_str(&format!("min_len = {}\n", self.len_range.0));
        s.push_str(&format!("max_len = {}\n", self.len_range.1));
        s.push_str(&format!("size = {}\n", self.corpus_size));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = ToyTaskSpec {
            synonyms: 1,
            ambiguous_fraction: 0.0,
            reorder: None,
            ..ToyTaskSpec::default()
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(format!("task file: expected key = value, got `{line}`"))
            })?;
            let v = v.trim();
            let bad = || Error::format(format!("task file: bad value `{v}` for {}", k.trim()));
            match k.trim() {
                "vocab" => spec.src_vocab_size = v.parse().map_err(|_| bad())?,
                "synonyms" => spec.synonyms = v.parse().map_err(|_| bad())?,
                "ambiguous" => spec.ambiguous_fraction = v.parse().map_err(|_| bad())?,
                "marker" => {
                    spec.reorder = Some(ReorderRule {
                        marker_prob: v.parse().map_err(|_| bad())?,
                    })
                }
                "min_len" => spec.len_range.0 = v.parse().map_err(|_| bad())?,
                "max_len" => spec.len_range.1 = v.parse().map_err(|_| bad())?,
                "size" => spec.corpus_size = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                other => return Err(Error::format(format!("task file: unknown key {other}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Whether source word `i` is ambiguous under this spec.
    pub fn is_ambiguous(&self, i: usize) -> bool {
        if self.synonyms <= 1 {
            return false;
        }
        let mut s = RngStream::new(self.seed, &[TAG_AMBIGUITY, i as u64]);
        s.next_f64() < self.ambiguous_fraction
    }

    /// Ordered synonym list for source word `i`.
    pub fn translations_of(&self, i: usize) -> Vec<String> {
        let n = if self.is_ambiguous(i) {
            self.synonyms
        } else {
            1
        };
        (0..n)
            .map(|j| format!("x{i}{}", (b'a' + j as u8) as char))
            .collect()
    }

    fn word_index(&self, word: &str) -> Option<usize> {
        word.strip_prefix('w')
            .and_then(|rest| rest.parse::<usize>().ok())
            .filter(|&i| i < self.src_vocab_size)
    }
}

/// Generates a reproducible corpus: unique source sentences, each target a
/// uniformly chosen valid translation.
pub fn gen_corpus(spec: &ToyTaskSpec) -> Result<ParallelCorpus> {
    spec.validate()?;
    let n = spec.corpus_size;
    let n_test = (n / 20).max(1);
    let n_dev = (n / 20).max(1);
    if n_test + n_dev >= n {
        return Err(Error::invalid_argument(
            "corpus_size too small for train/dev/test split",
        ));
    }
    let mut seen: HashSet<Vec<String>> = HashSet::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let mut sentence = None;
        for attempt in 0..1000u64 {
            let mut stream = RngStream::new(spec.seed, &[TAG_SENTENCE, i as u64, attempt]);
            let cand = gen_source(spec, &mut stream);
            if !seen.contains(&cand) {
                seen.insert(cand.clone());
                let tgt = sample_translation(spec, &cand, &mut stream);
                sentence = Some((cand, tgt));
                break;
            }
        }
        let (src, tgt) = sentence.ok_or_else(|| {
            Error::invalid_argument(
                "could not generate enough unique sentences; vocabulary or length range too small",
            )
        })?;
        let split = if i < n - n_dev - n_test {
            Split::Train
        } else if i < n - n_test {
            Split::Dev
        } else {
            Split::Test
        };
        pairs.push(CorpusPair {
            src,
            tgt,
            split,
            origin: Origin::Original,
        });
    }
    Ok(ParallelCorpus { pairs })
}

fn gen_source(spec: &ToyTaskSpec, stream: &mut RngStream) -> Vec<String> {
    let (lo, hi) = spec.len_range;
    let len = lo + stream.uniform_index(hi - lo + 1);
    let mut words: Vec<String> = (0..len)
        .map(|_| spec.source_word(stream.uniform_index(spec.src_vocab_size)))
        .collect();
    if let Some(rule) = &spec.reorder {
        if len >= 2 && stream.next_f64() < rule.marker_prob {
            let pos = 1 + stream.uniform_index(len - 1);
            words.insert(pos, MARKER_WORD.to_string());
        }
    }
    words
}

/// One uniformly chosen valid translation of `src`.
pub fn sample_translation(
    spec: &ToyTaskSpec,
    src: &[String],
    stream: &mut RngStream,
) -> Vec<String> {
    let translate_block = |block: &[String], stream: &mut RngStream| -> Vec<String> {
        block
            .iter()
            .map(|w| {
                let i = spec.word_index(w).unwrap_or(0);
                let opts = spec.translations_of(i);
                if opts.len() == 1 {
                    opts.into_iter().next().unwrap()
                } else {
                    let k = stream.uniform_index(opts.len());
                    opts.into_iter().nth(k).unwrap()
                }
            })
            .collect()
    };
    match marker_split(src) {
        Some((a, b)) => {
            let ta = translate_block(a, stream);
            let tb = translate_block(b, stream);
            let swap = stream.next_f64() < 0.5;
            let mut out = Vec::with_capacity(src.len());
            if swap {
                out.extend(tb);
                out.push(MARKER_WORD.to_string());
                out.extend(ta);
            } else {
                out.extend(ta);
                out.push(MARKER_WORD.to_string());
                out.extend(tb);
            }
            out
        }
        None => translate_block(src, stream),
    }
}

/// Splits at the marker when both blocks are non-empty.
fn marker_split(words: &[String]) -> Option<(&[String], &[String])> {
    let pos = words.iter().position(|w| w == MARKER_WORD)?;
    if pos == 0 || pos + 1 == words.len() {
        return None;
    }
    Some((&words[..pos], &words[pos + 1..]))
}

/// Exact valid-translation set, or just its size when it exceeds `cap`.
#[derive(Debug, Clone, PartialEq)]
pub enum TranslationSet {
    Enumerated(Vec<Vec<String>>),
    CountOnly(u128),
}

impl TranslationSet {
    pub fn count(&self) -> u128 {
        match self {
            TranslationSet::Enumerated(v) => v.len() as u128,
            TranslationSet::CountOnly(c) => *c,
        }
    }
}

/// Enumerates every grammar-valid translation of `src` (synonym choices,
/// plus both block orders when a marker applies).
pub fn valid_translations(
    src: &[String],
    spec: &ToyTaskSpec,
    cap: usize,
) -> Result<TranslationSet> {
    spec.validate()?;
    let mut count: u128 = 1;
    for w in src {
        if w == MARKER_WORD {
            continue;
        }
        let i = spec.word_index(w).ok_or_else(|| {
            Error::invalid_argument(format!("word {w} is not in the task vocabulary"))
        })?;
        count = count.saturating_mul(spec.translations_of(i).len() as u128);
    }
    let swappable = marker_split(src).is_some();
    if swappable {
        count = count.saturating_mul(2);
    }
    if count > cap as u128 {
        return Ok(TranslationSet::CountOnly(count));
    }

    let expand = |block: &[String]| -> Vec<Vec<String>> {
        let mut acc: Vec<Vec<String>> = vec![Vec::new()];
        for w in block {
            let opts = spec.translations_of(spec.word_index(w).unwrap());
            let mut next = Vec::with_capacity(acc.len() * opts.len());
            for prefix in &acc {
                for o in &opts {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    next.push(p);
                }
            }
            acc = next;
        }
        acc
    };

    let mut out = Vec::new();
    match marker_split(src) {
        Some((a, b)) => {
            let ta = expand(a);
            let tb = expand(b);
            for x in &ta {
                for y in &tb {
                    let mut s = x.clone();
                    s.push(MARKER_WORD.to_string());
                    s.extend(y.iter().cloned());
                    out.push(s);
                }
            }
            for y in &tb {
                for x in &ta {
                    let mut s = y.clone();
                    s.push(MARKER_WORD.to_string());
                    s.extend(x.iter().cloned());
                    out.push(s);
                }
            }
        }
        None => out = expand(src),
    }
    Ok(TranslationSet::Enumerated(out))
}

/// Membership test equivalent to enumeration, without building the set.
pub fn is_valid_translation(src: &[String], tgt: &[String], spec: &ToyTaskSpec) -> bool {
    let block_matches = |s: &[String], t: &[String]| -> bool {
        s.len() == t.len()
            && s.iter().zip(t).all(|(sw, tw)| {
                spec.word_index(sw)
                    .map(|i| spec.translations_of(i).iter().any(|o| o == tw))
                    .unwrap_or(false)
            })
    };
    match (marker_split(src), tgt.iter().position(|w| w == MARKER_WORD)) {
        (Some((a, b)), Some(tpos)) => {
            let (ta, tb) = (&tgt[..tpos], &tgt[tpos + 1..]);
            (block_matches(a, ta) && block_matches(b, tb))
                || (block_matches(b, ta) && block_matches(a, tb))
        }
        (None, None) => block_matches(src, tgt),
        _ => false,
    }
}

/// Builds the source and target vocabularies of a corpus.
pub fn build_vocab(pairs: &[CorpusPair]) -> Result<(Vocab, Vocab)> {
    let src = Vocab::build(pairs.iter().map(|p| p.src.as_slice()))?;
    let tgt = Vocab::build(pairs.iter().map(|p| p.tgt.as_slice()))?;
    Ok((src, tgt))
}

/// Token-id training pairs: source ids with EOS, raw target ids.
pub fn prepare_pairs(
    pairs: &[CorpusPair],
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
) -> Vec<(Vec<u32>, Vec<u32>)> {
    pairs
        .iter()
        .map(|p| {
            (
                vocab_src.encode_source(&p.src),
                vocab_tgt.encode_target(&p.tgt),
            )
        })
        .collect()
}

const MAX_SENTENCE_WORDS: usize = 100;

/// Writes pairs as tab-separated lines. The header line (starting with `#`)
/// records provenance; readers skip it.
pub fn write_corpus(
    path: &Path,
    pairs: &[CorpusPair],
    header: &str,
    with_origin: bool,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for p in pairs {
        if with_origin {
            let tag = match p.origin {
                Origin::Original => "orig",
                Origin::Synthetic => "synth",
            };
            writeln!(f, "{}\t{}\t{}", p.src.join(" "), p.tgt.join(" "), tag)?;
        } else {
            writeln!(f, "{}\t{}", p.src.join(" "), p.tgt.join(" "))?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Reads a corpus file; drops pairs longer than 100 words on either side.
pub fn read_corpus(path: &Path, split: Split) -> Result<Vec<CorpusPair>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut pairs = Vec::new();
    for (ln, line) in f.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(Error::format(format!(
                "{}:{}: expected 2 or 3 tab-separated columns",
                path.display(),
                ln + 1
            )));
        }
        let src: Vec<String> = cols[0].split_whitespace().map(String::from).collect();
        let tgt: Vec<String> = cols[1].split_whitespace().map(String::from).collect();
        if src.is_empty() || tgt.is_empty() {
            return Err(Error::format(format!(
                "{}:{}: empty sentence",
                path.display(),
                ln + 1
            )));
        }
        if src.len() > MAX_SENTENCE_WORDS || tgt.len() > MAX_SENTENCE_WORDS {
            continue;
        }
        let origin = match cols.get(2) {
            Some(&"synth") => Origin::Synthetic,
            _ => Origin::Original,
        };
        pairs.push(CorpusPair {
            src,
            tgt,
            split,
            origin,
        });
    }
    Ok(pairs)
}
