//! Command-line surface: gen-data / train / translate / diverse-decode /
//! eval / analyze / backtranslate.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 runtime failure.
//! All commands are deterministic given identical inputs and seeds; output
//! files carry a header with the tool version, config digest, and seed.

use crate::analysis::{alignment_stats, length_diversity_curve};
use crate::backtrans::{synthesize_pairs, AugmentationPlan};
use crate::config::{fnv1a, RunConfig};
use crate::data::{
    build_vocab, gen_corpus, prepare_pairs, read_corpus, write_corpus, CorpusPair, ReorderRule,
    Split, ToyTaskSpec, Vocab,
};
use crate::decoding::{decode_corpus, DecodeMode, DecodePolicy};
use crate::error::{Error, Result};
use crate::metrics::{pairwise_bleu, reference_bleu, MetricsReport, ReferenceBleuMode};
use crate::model::checkpoint::{load_checkpoint, save_checkpoint};
use crate::model::ModelParams;
use crate::report::{
    artifact_header, format_report_table, read_groups, read_report, write_attention_dump,
    write_groups, write_length_curve, write_loss_log, write_nll_table, write_rank_histogram,
    write_report,
};
use crate::train::{greedy_corpus_bleu, train_with};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

const USAGE: &str = "\
hydra — transformer translation lab with head-sampling diverse decoding

USAGE: hydra <command> [flags]

COMMANDS:
  gen-data        generate a synthetic parallel corpus
  train           train a model from a run config
  translate       decode one best translation per input line
  diverse-decode  decode M outputs per input line
  eval            score a groups file (rfb, pwb, DEQ)
  analyze         head-alignment statistics and length curve
  backtranslate   synthesize training pairs with a reverse model
  help            show this message (or `hydra <command> --help`)
";

pub fn run(args: Vec<String>) -> i32 {
    let (cmd, rest) = match args.split_first() {
        Some((c, r)) => (c.clone(), r.to_vec()),
        None => {
            eprint!("{USAGE}");
            return 2;
        }
    };
    let result = match cmd.as_str() {
        "gen-data" => cmd_gen_data(rest),
        "train" => cmd_train(rest),
        "translate" => cmd_translate(rest),
        "diverse-decode" => cmd_diverse_decode(rest),
        "eval" => cmd_eval(rest),
        "analyze" => cmd_analyze(rest),
        "backtranslate" => cmd_backtranslate(rest),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            Ok(())
        }
        other => {
            eprintln!("unknown command `{other}`\n");
            eprint!("{USAGE}");
            return 2;
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Format(_) | Error::UndefinedDeq { .. } => 2,
        Error::InvalidState(_) | Error::Io(_) => 3,
    }
}

/// `--flag value` parser; `bools` take no value and repeatable flags
/// accumulate. A flag given twice keeps the last value.
struct Flags {
    values: HashMap<String, Vec<String>>,
}

impl Flags {
    fn parse(args: &[String], known: &[&str], bools: &[&str], usage: &str) -> Result<Self> {
        let mut values: HashMap<String, Vec<String>> = HashMap::new();
        let mut i = 0;
        while i < args.len() {
            let a = &args[i];
            if a == "--help" || a == "-h" {
                print!("{usage}");
                std::process::exit(0);
            }
            let name = a
                .strip_prefix("--")
                .ok_or_else(|| Error::invalid_argument(format!("unexpected argument `{a}`")))?;
            if bools.contains(&name) {
                values
                    .entry(name.to_string())
                    .or_default()
                    .push("true".into());
                i += 1;
                continue;
            }
            if !known.contains(&name) {
                return Err(Error::invalid_argument(format!("unknown flag --{name}")));
            }
            let v = args
                .get(i + 1)
                .ok_or_else(|| Error::invalid_argument(format!("--{name} needs a value")))?;
            values.entry(name.to_string()).or_default().push(v.clone());
            i += 2;
        }
        Ok(Flags { values })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.values
            .get(name)
            .and_then(|v| v.last())
            .map(|s| s.as_str())
    }

    fn get_all(&self, name: &str) -> impl Iterator<Item = &str> {
        self.values
            .get(name)
            .into_iter()
            .flatten()
            .map(|s| s.as_str())
    }

    fn has(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    fn parse_num<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T> {
        match self.get(name) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid_argument(format!("bad value `{v}` for --{name}"))),
            None => Ok(default),
        }
    }

    fn require(&self, name: &str) -> Result<&str> {
        self.get(name)
            .ok_or_else(|| Error::invalid_argument(format!("--{name} is required")))
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::invalid_argument(format!(
            "no such file: {}",
            path.display()
        )));
    }
    Ok(())
}

fn policy_from_flags(f: &Flags, default_seed: u64) -> Result<DecodePolicy> {
    let mut policy = DecodePolicy {
        mode: match f.get("mode") {
            Some(m) => DecodeMode::parse(m)?,
            None => DecodeMode::Beam,
        },
        beam_size: f.parse_num("beam", 5usize)?,
        k: f.parse_num("K", 0usize)?,
        m: f.parse_num("M", 5usize)?,
        penalty_strength: f.parse_num("strength", 0.0f64)?,
        max_len: f.parse_num("max-len", 64usize)?,
        seed: f.parse_num("seed", default_seed)?,
        override_layer: None,
        shared_sample: f.has("shared-sample"),
        length_alpha: f.parse_num("alpha", 0.6f64)?,
    };
    if let Some(l) = f.get("override-layer") {
        policy.override_layer = Some(
            l.parse()
                .map_err(|_| Error::invalid_argument(format!("bad --override-layer `{l}`")))?,
        );
    }
    Ok(policy)
}

/// Reads one whitespace-tokenized sentence per line; `#` lines are skipped.
/// Lines with tabs contribute the named column (0-based).
fn read_sentences(path: &Path, column: usize) -> Result<Vec<Vec<String>>> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let field = if line.contains('\t') {
            line.split('\t').nth(column).unwrap_or("")
        } else {
            line
        };
        let words: Vec<String> = field.split_whitespace().map(String::from).collect();
        if !words.is_empty() {
            out.push(words);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid_argument(format!(
            "{} contains no sentences",
            path.display()
        )));
    }
    Ok(out)
}

fn encode_inputs(sentences: &[Vec<String>], vocab: &Vocab) -> Result<Vec<Vec<u32>>> {
    let known = sentences
        .iter()
        .flatten()
        .filter(|w| vocab.contains(w))
        .count();
    if known == 0 {
        return Err(Error::invalid_argument(
            "input shares no vocabulary with the checkpoint (wrong model or language side?)",
        ));
    }
    Ok(sentences.iter().map(|s| vocab.encode_source(s)).collect())
}

// ---------------------------------------------------------------- gen-data

const GEN_DATA_USAGE: &str = "\
hydra gen-data — generate a synthetic parallel corpus

USAGE: hydra gen-data --out DIR [flags]

FLAGS:
  --out DIR         output directory (train.tsv, dev.tsv, test.tsv, task.cfg)
  --vocab N         source vocabulary size            [60]
  --synonyms S      target synonyms per ambiguous word [1]
  --ambiguous F     fraction of ambiguous source words [0]
  --marker P        clause-swap marker probability; omit to disable
  --min-len N       minimum sentence length            [3]
  --max-len N       maximum sentence length            [8]
  --size N          number of sentence pairs           [2000]
  --seed N          generation seed                    [1]
";

fn cmd_gen_data(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &[
            "out",
            "vocab",
            "synonyms",
            "ambiguous",
            "marker",
            "min-len",
            "max-len",
            "size",
            "seed",
        ],
        &[],
        GEN_DATA_USAGE,
    )?;
    let out = PathBuf::from(f.require("out")?);
    let spec = ToyTaskSpec {
        src_vocab_size: f.parse_num("vocab", 60usize)?,
        synonyms: f.parse_num("synonyms", 1usize)?,
        ambiguous_fraction: f.parse_num("ambiguous", 0.0f64)?,
        reorder: match f.get("marker") {
            Some(p) => Some(ReorderRule {
                marker_prob: p
                    .parse()
                    .map_err(|_| Error::invalid_argument(format!("bad --marker `{p}`")))?,
            }),
            None => None,
        },
        len_range: (
            f.parse_num("min-len", 3usize)?,
            f.parse_num("max-len", 8usize)?,
        ),
        corpus_size: f.parse_num("size", 2000usize)?,
        seed: f.parse_num("seed", 1u64)?,
    };
    let corpus = gen_corpus(&spec)?;
    std::fs::create_dir_all(&out)?;
    let header = artifact_header(fnv1a(spec.to_text().as_bytes()), spec.seed);
    for (split, name) in [
        (Split::Train, "train.tsv"),
        (Split::Dev, "dev.tsv"),
        (Split::Test, "test.tsv"),
    ] {
        let pairs: Vec<CorpusPair> = corpus.split(split).cloned().collect();
        write_corpus(&out.join(name), &pairs, &header, false)?;
    }
    std::fs::write(
        out.join("task.cfg"),
        format!("{header}\n{}", spec.to_text()),
    )?;
    println!(
        "wrote {} train / {} dev / {} test pairs to {}",
        corpus.split(Split::Train).count(),
        corpus.split(Split::Dev).count(),
        corpus.split(Split::Test).count(),
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- train

const TRAIN_USAGE: &str = "\
hydra train — train a model from a run config

USAGE: hydra train --config FILE [--set key=value ...]

FLAGS:
  --config FILE     run config (key = value lines)
  --set key=value   override a config key (repeatable, wins over the file)

The run directory (config key run_dir, env HYDRA_RUN_DIR overrides) receives
config.cfg, loss.csv, model.ckpt, and periodic model_step*.ckpt files.
Prints the final greedy dev BLEU when data.dev is configured.
";

fn cmd_train(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(&args, &["config", "set"], &[], TRAIN_USAGE)?;
    let mut cfg = match f.get("config") {
        Some(path) => {
            let p = PathBuf::from(path);
            require_file(&p)?;
            RunConfig::from_file(&p)?
        }
        None => RunConfig::default(),
    };
    for kv in f.get_all("set") {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid_argument(format!("--set wants key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Ok(dir) = std::env::var("HYDRA_RUN_DIR") {
        cfg.run_dir = PathBuf::from(dir);
    }

    let train_path = cfg
        .data_train
        .clone()
        .ok_or_else(|| Error::invalid_argument("config key data.train is required"))?;
    require_file(&train_path)?;
    let train_pairs = read_corpus(&train_path, Split::Train)?;
    let dev_pairs = match &cfg.data_dev {
        Some(p) => {
            require_file(p)?;
            read_corpus(p, Split::Dev)?
        }
        None => Vec::new(),
    };
    let test_pairs = match &cfg.data_test {
        Some(p) => {
            require_file(p)?;
            read_corpus(p, Split::Test)?
        }
        None => Vec::new(),
    };

    // vocabularies come from the original parallel data only
    let mut vocab_pairs = train_pairs.clone();
    vocab_pairs.extend(dev_pairs.iter().cloned());
    vocab_pairs.extend(test_pairs.iter().cloned());
    let (vocab_src, vocab_tgt) = build_vocab(&vocab_pairs)?;
    cfg.model.vocab_src = vocab_src.len();
    cfg.model.vocab_tgt = vocab_tgt.len();
    cfg.model.validate()?;

    let mixed = match &cfg.data_synthetic {
        Some(p) => {
            require_file(p)?;
            let synthetic = read_corpus(p, Split::Train)?;
            crate::backtrans::mix_corpora(&train_pairs, &synthetic, cfg.mixing_ratio, cfg.seed)?
        }
        None => train_pairs,
    };
    let encoded = prepare_pairs(&mixed, &vocab_src, &vocab_tgt);

    std::fs::create_dir_all(&cfg.run_dir)?;
    let digest = cfg.digest();
    let header = artifact_header(digest, cfg.seed);
    std::fs::write(
        cfg.run_dir.join("config.cfg"),
        format!("{header}\n{}", cfg.to_text()),
    )?;

    let mut params: ModelParams<f32> = ModelParams::init(cfg.model.clone(), cfg.seed)?;
    let run_dir = cfg.run_dir.clone();
    let (vs, vt) = (vocab_src.clone(), vocab_tgt.clone());
    let log = train_with(
        &mut params,
        &encoded,
        &cfg.train_config(),
        cfg.checkpoint_every,
        |step, p| save_checkpoint(&run_dir.join(format!("model_step{step}.ckpt")), p, &vs, &vt),
    )?;
    write_loss_log(&cfg.run_dir.join("loss.csv"), &log, &header)?;
    save_checkpoint(
        &cfg.run_dir.join("model.ckpt"),
        &params,
        &vocab_src,
        &vocab_tgt,
    )?;
    println!("trained {} steps on {} pairs", cfg.max_steps, encoded.len());
    println!("checkpoint: {}", cfg.run_dir.join("model.ckpt").display());
    if !dev_pairs.is_empty() {
        let refs: Vec<&CorpusPair> = dev_pairs.iter().collect();
        let bleu = greedy_corpus_bleu(&params, &refs, &vocab_src, &vocab_tgt, cfg.model.max_len)?;
        println!("dev_bleu = {bleu:.2}");
    }
    Ok(())
}

// --------------------------------------------------------------- translate

const TRANSLATE_USAGE: &str = "\
hydra translate — one best translation per input line

USAGE: hydra translate --checkpoint FILE --input FILE [flags]

FLAGS:
  --checkpoint FILE  model checkpoint
  --input FILE       source sentences, one per line (tab: first column)
  --output FILE      write translations here instead of stdout
  --beam N           beam size                       [5]
  --max-len N        decode length limit             [64]
  --alpha F          length-normalization exponent   [0.6]
";

fn cmd_translate(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &["checkpoint", "input", "output", "beam", "max-len", "alpha"],
        &[],
        TRANSLATE_USAGE,
    )?;
    let ckpt = PathBuf::from(f.require("checkpoint")?);
    require_file(&ckpt)?;
    let (params, vocab_src, vocab_tgt) = load_checkpoint(&ckpt)?;
    let sentences = read_sentences(&PathBuf::from(f.require("input")?), 0)?;
    let sources = encode_inputs(&sentences, &vocab_src)?;
    let policy = DecodePolicy {
        beam_size: f.parse_num("beam", 5usize)?,
        m: 1,
        max_len: f.parse_num("max-len", 64usize)?,
        length_alpha: f.parse_num("alpha", 0.6f64)?,
        ..DecodePolicy::default()
    };
    let groups = decode_corpus(&params, &sources, &policy, 1, false)?;
    let lines: Vec<String> = groups
        .iter()
        .map(|g| vocab_tgt.decode(&g.outputs[0].tokens).join(" "))
        .collect();
    match f.get("output") {
        Some(path) => {
            let digest = fnv1a(policy.describe().as_bytes());
            let mut text = format!("{}\n", artifact_header(digest, policy.seed));
            for l in &lines {
                text.push_str(l);
                text.push('\n');
            }
            std::fs::write(path, text)?;
        }
        None => {
            for l in &lines {
                println!("{l}");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------- diverse-decode

const DIVERSE_USAGE: &str = "\
hydra diverse-decode — M decodes per input line

USAGE: hydra diverse-decode --checkpoint FILE --input FILE --output FILE [flags]

FLAGS:
  --checkpoint FILE      model checkpoint
  --input FILE           source sentences, one per line
  --output FILE          groups file to write
  --mode NAME            beam | multinomial | head_sample | sibling_penalty |
                         hamming_penalty                  [beam]
  --K N                  confusing-condition threshold    [0]
  --M N                  decodes per sentence             [5]
  --beam N               beam size                        [5]
  --strength F           penalty strength                 [0]
  --seed N               decode seed                      [1]
  --max-len N            decode length limit              [64]
  --alpha F              length-normalization exponent    [0.6]
  --override-layer N     decoder layer to override        [final]
  --shared-sample        one sampled head per step shared across the beam
  --workers N            decode threads                   [1]
  --dump-attention FILE  also write per-step attention records
";

fn cmd_diverse_decode(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &[
            "checkpoint",
            "input",
            "output",
            "mode",
            "K",
            "M",
            "beam",
            "strength",
            "seed",
            "max-len",
            "alpha",
            "override-layer",
            "workers",
            "dump-attention",
        ],
        &["shared-sample"],
        DIVERSE_USAGE,
    )?;
    let ckpt = PathBuf::from(f.require("checkpoint")?);
    require_file(&ckpt)?;
    let (params, vocab_src, vocab_tgt) = load_checkpoint(&ckpt)?;
    let sentences = read_sentences(&PathBuf::from(f.require("input")?), 0)?;
    let sources = encode_inputs(&sentences, &vocab_src)?;
    let out_path = PathBuf::from(f.require("output")?);
    let policy = policy_from_flags(&f, 1)?;
    policy.validate(params.config.n_heads, params.dec_layers.len())?;
    let workers = f.parse_num("workers", 1usize)?;
    let dump = f.get("dump-attention").map(PathBuf::from);
    let groups = decode_corpus(&params, &sources, &policy, workers, dump.is_some())?;
    let digest = fnv1a(policy.describe().as_bytes());
    let header = artifact_header(digest, policy.seed);
    write_groups(&out_path, &groups, &vocab_tgt, &header)?;
    if let Some(dump_path) = dump {
        write_attention_dump(&dump_path, &groups, &header)?;
    }
    println!("wrote {} groups to {}", groups.len(), out_path.display());
    Ok(())
}

// -------------------------------------------------------------------- eval

const EVAL_USAGE: &str = "\
hydra eval — score a groups file

USAGE: hydra eval --groups FILE --references FILE [flags]

FLAGS:
  --groups FILE           groups file from diverse-decode
  --references FILE       references, one line per sentence (tabs separate
                          multiple references)
  --baseline-report FILE  earlier report; enables the DEQ column
  --rfb-mode MODE         average_of_m | baseline_top      [average_of_m]
  --output FILE           also write the report record here
";

fn cmd_eval(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &[
            "groups",
            "references",
            "baseline-report",
            "rfb-mode",
            "output",
        ],
        &[],
        EVAL_USAGE,
    )?;
    let groups_path = PathBuf::from(f.require("groups")?);
    require_file(&groups_path)?;
    let records = read_groups(&groups_path)?;
    let refs_path = PathBuf::from(f.require("references")?);
    require_file(&refs_path)?;
    let text = std::fs::read_to_string(&refs_path)?;
    let references: Vec<Vec<Vec<String>>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split('\t')
                .map(|r| r.split_whitespace().map(String::from).collect())
                .collect()
        })
        .collect();
    if references.len() != records.len() {
        return Err(Error::invalid_argument(format!(
            "{} groups but {} reference lines",
            records.len(),
            references.len()
        )));
    }
    let groups: Vec<Vec<Vec<String>>> = records
        .iter()
        .map(|(_, _, outs)| outs.iter().map(|(_, words)| words.clone()).collect())
        .collect();
    let mode = match f.get("rfb-mode").unwrap_or("average_of_m") {
        "average_of_m" => ReferenceBleuMode::AverageOfM,
        "baseline_top" => ReferenceBleuMode::BaselineTop,
        other => {
            return Err(Error::invalid_argument(format!(
                "unknown --rfb-mode `{other}`"
            )));
        }
    };
    let rfb = reference_bleu(&groups, &references, mode)?;
    let pwb = pairwise_bleu(&groups)?;
    let baseline = match f.get("baseline-report") {
        Some(p) => {
            let p = PathBuf::from(p);
            require_file(&p)?;
            Some(read_report(&p)?)
        }
        None => None,
    };
    let report = MetricsReport::new(rfb, pwb, baseline, records[0].1.clone());
    print!("{}", format_report_table(&report));
    if let Some(out) = f.get("output") {
        let digest = fnv1a(report.meta.as_bytes());
        write_report(&PathBuf::from(out), &report, &artifact_header(digest, 0))?;
    }
    Ok(())
}

// ----------------------------------------------------------------- analyze

const ANALYZE_USAGE: &str = "\
hydra analyze — head-alignment statistics

USAGE: hydra analyze --checkpoint FILE --corpus FILE --out DIR [flags]

FLAGS:
  --checkpoint FILE   model to analyze
  --corpus FILE       parallel corpus (sources drive the analysis)
  --out DIR           directory for rank_histogram.csv and nll_table.csv
  --baseline FILE     baseline checkpoint for referred-word translation
                      (defaults to --checkpoint)
  --groups FILE       groups file; adds length_curve.csv
  --bucket-width N    source-length bucket width       [2]
  --max-len N         greedy decode length limit       [64]
";

fn cmd_analyze(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &[
            "checkpoint",
            "corpus",
            "out",
            "baseline",
            "groups",
            "bucket-width",
            "max-len",
        ],
        &[],
        ANALYZE_USAGE,
    )?;
    let ckpt = PathBuf::from(f.require("checkpoint")?);
    require_file(&ckpt)?;
    let (params, vocab_src, _) = load_checkpoint(&ckpt)?;
    let corpus_path = PathBuf::from(f.require("corpus")?);
    let sources = read_sentences(&corpus_path, 0)?;
    let out_dir = PathBuf::from(f.require("out")?);
    let max_len = f.parse_num("max-len", 64usize)?;

    let digest = fnv1a(format!("analyze {} {}", ckpt.display(), corpus_path.display()).as_bytes());
    let header = artifact_header(digest, 0);

    let stats = match f.get("baseline") {
        Some(b) => {
            let bp = PathBuf::from(b);
            require_file(&bp)?;
            let (baseline, _, _) = load_checkpoint(&bp)?;
            alignment_stats(&sources, &params, &baseline, &vocab_src, max_len)?
        }
        None => alignment_stats(&sources, &params, &params, &vocab_src, max_len)?,
    };
    std::fs::create_dir_all(&out_dir)?;
    write_rank_histogram(&out_dir.join("rank_histogram.csv"), &stats, &header)?;
    write_nll_table(&out_dir.join("nll_table.csv"), &stats, &header)?;
    println!(
        "analyzed {} steps; head-average NLL {:.4}",
        stats.steps, stats.head_average_nll
    );

    if let Some(groups_file) = f.get("groups") {
        let gp = PathBuf::from(groups_file);
        require_file(&gp)?;
        let records = read_groups(&gp)?;
        let groups: Vec<Vec<Vec<String>>> = records
            .iter()
            .map(|(_, _, outs)| outs.iter().map(|(_, w)| w.clone()).collect())
            .collect();
        let lengths: Vec<usize> = records
            .iter()
            .map(|(id, _, _)| {
                sources
                    .get(*id as usize)
                    .map(|s| s.len())
                    .ok_or_else(|| Error::invalid_argument(format!("group id {id} not in corpus")))
            })
            .collect::<Result<_>>()?;
        let width = f.parse_num("bucket-width", 2usize)?;
        let curve = length_diversity_curve(&groups, &lengths, width)?;
        write_length_curve(&out_dir.join("length_curve.csv"), &curve, &header)?;
    }
    Ok(())
}

// ----------------------------------------------------------- backtranslate

const BACKTRANS_USAGE: &str = "\
hydra backtranslate — synthesize pairs with a reverse model

USAGE: hydra backtranslate --reverse-checkpoint FILE --targets FILE \
--output FILE [flags]

FLAGS:
  --plan FILE                plan file with the same keys (flags win)
  --reverse-checkpoint FILE  reverse-direction model
  --targets FILE             target sentences (plain lines, or the second
                             column of a tab-separated corpus)
  --output FILE              synthetic corpus (source<TAB>target<TAB>synth)
  --mode NAME                decode mode                  [beam]
  --K N                      confusing threshold          [0]
  --M N                      synthetic sources per target [5]
  --beam N                   beam size                    [5]
  --strength F               penalty strength             [0]
  --seed N                   decode seed                  [1]
  --max-len N                decode length limit          [64]
  --alpha F                  length-normalization exponent [0.6]
  --workers N                decode threads               [1]
";

fn cmd_backtranslate(args: Vec<String>) -> Result<()> {
    let f = Flags::parse(
        &args,
        &[
            "plan",
            "reverse-checkpoint",
            "targets",
            "output",
            "mode",
            "K",
            "M",
            "beam",
            "strength",
            "seed",
            "max-len",
            "alpha",
            "workers",
        ],
        &[],
        BACKTRANS_USAGE,
    )?;
    // a plan file provides the defaults; flags win
    let mut plan = match f.get("plan") {
        Some(path) => {
            let p = PathBuf::from(path);
            require_file(&p)?;
            AugmentationPlan::from_file(&p)?
        }
        None => AugmentationPlan {
            reverse_checkpoint: PathBuf::new(),
            targets: PathBuf::new(),
            output: PathBuf::new(),
            policy: DecodePolicy::default(),
            mixing_ratio: 1.0,
            workers: 1,
        },
    };
    if let Some(v) = f.get("reverse-checkpoint") {
        plan.reverse_checkpoint = PathBuf::from(v);
    }
    if let Some(v) = f.get("targets") {
        plan.targets = PathBuf::from(v);
    }
    if let Some(v) = f.get("output") {
        plan.output = PathBuf::from(v);
    }
    if f.has("mode")
        || f.has("K")
        || f.has("M")
        || f.has("beam")
        || f.has("strength")
        || f.has("seed")
        || f.has("max-len")
        || f.has("alpha")
    {
        let defaults = plan.policy.clone();
        let mut merged = policy_from_flags(&f, defaults.seed)?;
        if !f.has("mode") {
            merged.mode = defaults.mode;
        }
        if !f.has("K") {
            merged.k = defaults.k;
        }
        if !f.has("M") {
            merged.m = defaults.m;
        }
        if !f.has("beam") {
            merged.beam_size = defaults.beam_size;
        }
        if !f.has("strength") {
            merged.penalty_strength = defaults.penalty_strength;
        }
        if !f.has("max-len") {
            merged.max_len = defaults.max_len;
        }
        if !f.has("alpha") {
            merged.length_alpha = defaults.length_alpha;
        }
        plan.policy = merged;
    }
    if let Some(w) = f.get("workers") {
        plan.workers = w
            .parse()
            .map_err(|_| Error::invalid_argument("bad value for --workers"))?;
    }
    if plan.reverse_checkpoint.as_os_str().is_empty() {
        return Err(Error::invalid_argument(
            "--reverse-checkpoint (or a plan file) is required",
        ));
    }
    if plan.targets.as_os_str().is_empty() {
        return Err(Error::invalid_argument(
            "--targets (or a plan file) is required",
        ));
    }
    if plan.output.as_os_str().is_empty() {
        return Err(Error::invalid_argument(
            "--output (or a plan file) is required",
        ));
    }
    plan.validate()?;
    require_file(&plan.reverse_checkpoint)?;
    let (reverse, rev_src, rev_tgt) = load_checkpoint(&plan.reverse_checkpoint)?;
    let targets = read_sentences(&plan.targets, 1)?;
    let synthetic = synthesize_pairs(
        &reverse,
        &rev_src,
        &rev_tgt,
        &targets,
        &plan.policy,
        plan.workers,
    )?;
    let digest = fnv1a(plan.digest_text().as_bytes());
    write_corpus(
        &plan.output,
        &synthetic.pairs,
        &artifact_header(digest, plan.policy.seed),
        true,
    )?;
    println!(
        "wrote {} synthetic pairs to {}",
        synthetic.pairs.len(),
        plan.output.display()
    );
    Ok(())
}
