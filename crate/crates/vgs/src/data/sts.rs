//! Semantic textual similarity pairs: the subtask inventory, the pair
//! manifest format, and grouping helpers.
//!
//! # Manifest format
//!
//! TSV with header `vgs-sts<TAB>v1`; `#` comments and blank lines ignored.
//! One pair per line:
//!
//! ```text
//! pair_id<TAB>subtask<TAB>score<TAB>sentence_a<TAB>sentence_b<TAB>voices_a<TAB>voices_b
//! ```
//!
//! `subtask` is a canonical `year.Name` label from [`SUBTASK_INVENTORY`];
//! `score` is the human similarity in `[0, 5]`; `voices_a`/`voices_b` are
//! `;`-joined utterance paths, one per voice, in voice order. Every pair in
//! a manifest must use the same voice count.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Evaluation subtasks by year with their pair counts: 12,544 pairs total
/// across 2012-2016.
pub const SUBTASK_INVENTORY: &[(&str, usize)] = &[
    ("2012.MSRpar", 750),
    ("2012.MSRvid", 750),
    ("2012.SMTeuroparl", 459),
    ("2012.OnWN", 750),
    ("2012.SMTnews", 399),
    ("2013.FNWN", 189),
    ("2013.HDL", 750),
    ("2013.OnWN", 561),
    ("2014.Deft-forum", 450),
    ("2014.Deft-news", 300),
    ("2014.HDL", 750),
    ("2014.Images", 750),
    ("2014.OnWN", 750),
    ("2014.Tweet-news", 750),
    ("2015.Answers-forum", 375),
    ("2015.Answers-students", 750),
    ("2015.Belief", 375),
    ("2015.HDL", 750),
    ("2015.Images", 750),
    ("2016.Answer-Answer", 254),
    ("2016.HDL", 249),
    ("2016.Plagiarism", 230),
    ("2016.Postediting", 244),
    ("2016.Question-Question", 209),
];

pub fn is_known_subtask(label: &str) -> bool {
    SUBTASK_INVENTORY.iter().any(|&(name, _)| name == label)
}

/// Published pair count for a subtask label, if known.
pub fn expected_pairs(label: &str) -> Option<usize> {
    SUBTASK_INVENTORY
        .iter()
        .find(|&&(name, _)| name == label)
        .map(|&(_, n)| n)
}

/// Total pairs across the full inventory.
pub fn total_inventory_pairs() -> usize {
    SUBTASK_INVENTORY.iter().map(|&(_, n)| n).sum()
}

/// One sentence pair with a human similarity judgment and the recorded
/// utterances of each sentence, one path per voice.
#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub pair_id: String,
    pub subtask: String,
    pub human_score: f64,
    pub sentence_a: String,
    pub sentence_b: String,
    pub voices_a: Vec<PathBuf>,
    pub voices_b: Vec<PathBuf>,
}

impl StsPair {
    pub fn voice_count(&self) -> usize {
        self.voices_a.len()
    }
}

/// Reads a pair manifest; all invariants (score range, known subtask,
/// uniform voice count, unique pair ids) are enforced with line numbers.
pub fn load_sts_manifest(path: &Path) -> Result<Vec<StsPair>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::manifest(path, 0, format!("cannot open: {e}")))?;
    let reader = BufReader::new(file);

    let mut pairs: Vec<StsPair> = Vec::new();
    let mut seen_ids: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut voice_count: Option<(usize, usize)> = None; // (count, first line)
    let mut saw_header = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::manifest(&display, lineno, format!("read error: {e}")))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if !saw_header {
            if fields != ["vgs-sts", "v1"] {
                return Err(Error::manifest(
                    &display,
                    lineno,
                    "expected header 'vgs-sts\\tv1'".to_string(),
                ));
            }
            saw_header = true;
            continue;
        }
        let [pair_id, subtask, score, sent_a, sent_b, voices_a, voices_b] = fields.as_slice()
        else {
            return Err(Error::manifest(
                &display,
                lineno,
                format!("expected 7 fields, got {}", fields.len()),
            ));
        };

        if let Some(prev) = seen_ids.insert(pair_id.to_string(), lineno) {
            return Err(Error::manifest(
                &display,
                lineno,
                format!("duplicate pair id '{pair_id}' (first on line {prev})"),
            ));
        }
        if !is_known_subtask(subtask) {
            return Err(Error::manifest(
                &display,
                lineno,
                format!("unknown subtask label '{subtask}'"),
            ));
        }
        let score: f64 = score.parse().map_err(|_| {
            Error::manifest(&display, lineno, format!("bad score '{score}'"))
        })?;
        if !(0.0..=5.0).contains(&score) {
            return Err(Error::manifest(
                &display,
                lineno,
                format!("score {score} outside [0, 5]"),
            ));
        }

        let split_paths = |s: &str| -> Vec<PathBuf> {
            s.split(';').filter(|p| !p.is_empty()).map(PathBuf::from).collect()
        };
        let va = split_paths(voices_a);
        let vb = split_paths(voices_b);
        if va.is_empty() || va.len() != vb.len() {
            return Err(Error::manifest(
                &display,
                lineno,
                format!(
                    "pair '{pair_id}' has {} voice paths for sentence A and {} for sentence B",
                    va.len(),
                    vb.len()
                ),
            ));
        }
        match voice_count {
            None => voice_count = Some((va.len(), lineno)),
            Some((v, first)) if v != va.len() => {
                return Err(Error::manifest(
                    &display,
                    lineno,
                    format!(
                        "pair '{pair_id}' has {} voices but line {first} established {v}",
                        va.len()
                    ),
                ));
            }
            Some(_) => {}
        }

        pairs.push(StsPair {
            pair_id: pair_id.to_string(),
            subtask: subtask.to_string(),
            human_score: score,
            sentence_a: sent_a.to_string(),
            sentence_b: sent_b.to_string(),
            voices_a: va,
            voices_b: vb,
        });
    }
    if !saw_header {
        return Err(Error::manifest(&display, 0, "empty manifest".to_string()));
    }
    Ok(pairs)
}

/// Writes pairs in the format [`load_sts_manifest`] reads.
pub fn save_sts_manifest(pairs: &[StsPair], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# pairs: {}", pairs.len())?;
    writeln!(out, "vgs-sts\tv1")?;
    let join = |paths: &[PathBuf]| {
        paths
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    for p in pairs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.pair_id,
            p.subtask,
            p.human_score,
            p.sentence_a,
            p.sentence_b,
            join(&p.voices_a),
            join(&p.voices_b)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Groups pairs by subtask label, labels in lexicographic (year-major)
/// order, pairs in manifest order.
pub fn group_by_subtask(pairs: &[StsPair]) -> BTreeMap<&str, Vec<&StsPair>> {
    let mut groups: BTreeMap<&str, Vec<&StsPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.subtask.as_str()).or_default().push(p);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_pair(id: &str, subtask: &str, score: f64, voices: usize) -> StsPair {
        StsPair {
            pair_id: id.to_string(),
            subtask: subtask.to_string(),
            human_score: score,
            sentence_a: format!("sentence a for {id}"),
            sentence_b: format!("sentence b for {id}"),
            voices_a: (0..voices).map(|v| PathBuf::from(format!("{id}_a_v{v}.wav"))).collect(),
            voices_b: (0..voices).map(|v| PathBuf::from(format!("{id}_b_v{v}.wav"))).collect(),
        }
    }

    #[test]
    fn inventory_totals_12544_pairs_across_24_subtasks() {
        assert_eq!(SUBTASK_INVENTORY.len(), 24);
        assert_eq!(total_inventory_pairs(), 12_544);
    }

    #[test]
    fn six_voices_give_75264_single_voice_utterance_pairs() {
        // Every sentence pair is rendered by each of the 6 voices.
        assert_eq!(total_inventory_pairs() * 6, 75_264);
    }

    #[test]
    fn manifest_roundtrip() {
        let pairs = vec![
            toy_pair("p1", "2012.MSRvid", 4.2, 3),
            toy_pair("p2", "2016.Plagiarism", 0.0, 3),
            toy_pair("p3", "2014.Images", 5.0, 3),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_sts_manifest(&pairs, f.path()).unwrap();
        let back = load_sts_manifest(f.path()).unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn score_out_of_range_is_rejected() {
        let mut pairs = vec![toy_pair("p1", "2012.MSRvid", 4.0, 2)];
        pairs[0].human_score = 5.5;
        let f = tempfile::NamedTempFile::new().unwrap();
        save_sts_manifest(&pairs, f.path()).unwrap();
        let err = load_sts_manifest(f.path()).unwrap_err();
        assert!(err.to_string().contains("5.5"), "{err}");
    }

    #[test]
    fn unknown_subtask_is_rejected() {
        let pairs = vec![toy_pair("p1", "2019.Bogus", 4.0, 2)];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_sts_manifest(&pairs, f.path()).unwrap();
        let err = load_sts_manifest(f.path()).unwrap_err();
        assert!(err.to_string().contains("2019.Bogus"), "{err}");
    }

    #[test]
    fn mixed_voice_counts_are_rejected() {
        let pairs = vec![
            toy_pair("p1", "2012.MSRvid", 4.0, 2),
            toy_pair("p2", "2012.MSRvid", 3.0, 4),
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_sts_manifest(&pairs, f.path()).unwrap();
        assert!(load_sts_manifest(f.path()).is_err());
    }

    #[test]
    fn grouping_is_deterministic_and_complete() {
        let pairs = vec![
            toy_pair("p1", "2013.HDL", 1.0, 2),
            toy_pair("p2", "2012.MSRpar", 2.0, 2),
            toy_pair("p3", "2013.HDL", 3.0, 2),
        ];
        let groups = group_by_subtask(&pairs);
        let labels: Vec<&str> = groups.keys().copied().collect();
        assert_eq!(labels, vec!["2012.MSRpar", "2013.HDL"]);
        assert_eq!(groups["2013.HDL"].len(), 2);
    }
}
