//! Artifact files: hypothesis-group records, attention dumps, metrics
//! reports, and the CSV emitters for training curves and analysis tables.
//! Every file starts with a header line carrying the tool version, the
//! config digest, and the seed, so reruns are byte-comparable.

use crate::analysis::{HeadAlignmentStats, LengthBucket};
use crate::data::Vocab;
use crate::decoding::HypothesisGroup;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use std::io::Write;
use std::path::Path;

/// ASCII unit separator: joins the M outputs inside one group record.
pub const UNIT_SEP: char = '\u{1f}';

pub fn artifact_header(digest: u64, seed: u64) -> String {
    format!(
        "# hydra {} config={digest:016x} seed={seed}",
        crate::VERSION
    )
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// One line per group: sentence id, policy description, and the M scored
/// outputs joined by the unit separator.
pub fn write_groups(
    path: &Path,
    groups: &[HypothesisGroup],
    vocab_tgt: &Vocab,
    header: &str,
) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    for g in groups {
        let outputs: Vec<String> = g
            .outputs
            .iter()
            .map(|o| format!("{:.6} {}", o.score, vocab_tgt.decode(&o.tokens).join(" ")))
            .collect();
        writeln!(
            f,
            "{}\t{}\t{}",
            g.sentence_id,
            g.policy,
            outputs.join(&UNIT_SEP.to_string())
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Parsed group record: (sentence id, policy, scored word sequences).
pub type GroupRecord = (u64, String, Vec<(f64, Vec<String>)>);

pub fn read_groups(path: &Path) -> Result<Vec<GroupRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let id: u64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| {
            Error::format(format!("{}:{}: bad sentence id", path.display(), ln + 1))
        })?;
        let policy = cols
            .next()
            .ok_or_else(|| Error::format(format!("{}:{}: missing policy", path.display(), ln + 1)))?
            .to_string();
        let rest = cols.next().ok_or_else(|| {
            Error::format(format!("{}:{}: missing outputs", path.display(), ln + 1))
        })?;
        let mut outputs = Vec::new();
        for unit in rest.split(UNIT_SEP) {
            let (score, words) = match unit.split_once(' ') {
                Some((s, w)) => (s, w),
                None => (unit, ""),
            };
            let score: f64 = score.parse().map_err(|_| {
                Error::format(format!(
                    "{}:{}: bad score `{score}`",
                    path.display(),
                    ln + 1
                ))
            })?;
            outputs.push((score, words.split_whitespace().map(String::from).collect()));
        }
        out.push((id, policy, outputs));
    }
    if out.is_empty() {
        return Err(Error::format(format!(
            "{} contains no group records",
            path.display()
        )));
    }
    Ok(out)
}

/// Line-delimited attention dump: sentence id, decode index, step, layer,
/// head, then the weights.
pub fn write_attention_dump(path: &Path, groups: &[HypothesisGroup], header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    for g in groups {
        for (decode_index, out) in g.outputs.iter().enumerate() {
            for att in &out.attention {
                let weights: Vec<String> = att.weights.iter().map(|w| format!("{w:.6}")).collect();
                writeln!(
                    f,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    g.sentence_id,
                    decode_index,
                    att.step,
                    att.layer,
                    att.head,
                    weights.join(" ")
                )?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

/// Structured one-line record plus a readable table.
pub fn format_report_record(r: &MetricsReport) -> String {
    let mut s = format!("rfb={:.4} pwb={:.4}", r.rfb, r.pwb);
    if let (Some(br), Some(bp)) = (r.baseline_rfb, r.baseline_pwb) {
        s.push_str(&format!(" rfb*={br:.4} pwb*={bp:.4}"));
    }
    match (r.deq, r.deq_undefined) {
        (Some(d), _) => s.push_str(&format!(" deq={d:.4}")),
        (None, true) => s.push_str(" deq=undefined"),
        _ => {}
    }
    if !r.meta.is_empty() {
        s.push_str(&format!(" meta={}", r.meta));
    }
    s
}

pub fn format_report_table(r: &MetricsReport) -> String {
    let mut t = String::new();
    t.push_str(&format!("{:<18} {:>10}\n", "metric", "value"));
    t.push_str(&format!("{:<18} {:>10.2}\n", "reference BLEU", r.rfb));
    t.push_str(&format!("{:<18} {:>10.2}\n", "pair-wise BLEU", r.pwb));
    if let (Some(br), Some(bp)) = (r.baseline_rfb, r.baseline_pwb) {
        t.push_str(&format!("{:<18} {:>10.2}\n", "baseline rfb", br));
        t.push_str(&format!("{:<18} {:>10.2}\n", "baseline pwb", bp));
    }
    match (r.deq, r.deq_undefined) {
        (Some(d), _) => t.push_str(&format!("{:<18} {:>10.2}\n", "DEQ", d)),
        (None, true) => t.push_str(&format!("{:<18} {:>10}\n", "DEQ", "undefined")),
        _ => {}
    }
    t
}

pub fn write_report(path: &Path, r: &MetricsReport, header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "{}", format_report_record(r))?;
    f.flush()?;
    Ok(())
}

/// Reads rfb/pwb back out of a report file (for `--baseline-report`).
pub fn read_report(path: &Path) -> Result<(f64, f64)> {
    let text = std::fs::read_to_string(path)?;
    let mut rfb = None;
    let mut pwb = None;
    for line in text.lines() {
        if line.starts_with('#') {
            continue;
        }
        for field in line.split_whitespace() {
            if let Some(v) = field.strip_prefix("rfb=") {
                rfb = v.parse().ok();
            } else if let Some(v) = field.strip_prefix("pwb=") {
                pwb = v.parse().ok();
            }
        }
    }
    match (rfb, pwb) {
        (Some(r), Some(p)) => Ok((r, p)),
        _ => Err(Error::format(format!(
            "{} is not a metrics report",
            path.display()
        ))),
    }
}

pub fn write_loss_log(path: &Path, log: &[(u64, f64, f64)], header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "step,lr,loss")?;
    for (step, lr, loss) in log {
        writeln!(f, "{step},{lr:.8},{loss:.6}")?;
    }
    f.flush()?;
    Ok(())
}

/// K-sweep rows (Fig. 4 style curve data): one row per K.
pub fn write_k_sweep(path: &Path, rows: &[(usize, f64, f64)], header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "k,rfb,pwb")?;
    for (k, rfb, pwb) in rows {
        writeln!(f, "{k},{rfb:.4},{pwb:.4}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_rank_histogram(path: &Path, stats: &HeadAlignmentStats, header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "rank,count")?;
    for (i, c) in stats.rank_histogram.iter().enumerate() {
        if i < crate::analysis::RANK_BUCKETS {
            writeln!(f, "{},{c}", i + 1)?;
        } else {
            writeln!(f, "overflow,{c}")?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_nll_table(path: &Path, stats: &HeadAlignmentStats, header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "entry,nll")?;
    for (rank, nll) in stats.per_rank_nll.iter().enumerate() {
        writeln!(f, "rank_{},{nll:.4}", rank + 1)?;
    }
    for (h, nll) in stats.per_head_nll.iter().enumerate() {
        writeln!(f, "head_{h},{nll:.4}")?;
    }
    writeln!(f, "head_average,{:.4}", stats.head_average_nll)?;
    f.flush()?;
    Ok(())
}

pub fn write_length_curve(path: &Path, buckets: &[LengthBucket], header: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    writeln!(f, "len_lo,len_hi,sentences,pwb,low_support")?;
    for b in buckets {
        let pwb = b.pwb.map_or(String::new(), |v| format!("{v:.4}"));
        writeln!(
            f,
            "{},{},{},{},{}",
            b.len_lo, b.len_hi, b.sentences, pwb, b.low_support
        )?;
    }
    f.flush()?;
    Ok(())
}
