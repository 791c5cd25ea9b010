//! Corpus loading, validation, cross-validation folds and statistics.
//!
//! The on-disk format is JSON Lines, one conversation thread per line:
//!
//! ```text
//! {"thread_id": str, "event": str, "veracity": "true"|"false"|"unverified"|null,
//!  "tweets": [{"id": str, "parent_id": str|null, "ts": int, "text": str,
//!              "stance": "support"|"deny"|"query"|"comment"|null}]}
//! ```
//!
//! Timestamps are epoch milliseconds and files are UTF-8.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{ConversationThread, Stance, TreeError, Tweet, Veracity};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: schema error: {msg}")]
    Schema { line: usize, msg: String },
    #[error("line {line}: label error: {msg}")]
    Label { line: usize, msg: String },
    #[error("line {line}: thread {thread_id:?}: {source}")]
    Tree {
        line: usize,
        thread_id: String,
        source: TreeError,
    },
    #[error("duplicate thread id {0:?}")]
    DuplicateThreadId(String),
    #[error("thread {0:?} has no event tag")]
    MissingEventTag(String),
    #[error("leave-one-event-out needs at least 2 events, found {0}")]
    InsufficientEvents(usize),
    #[error("unknown thread id {0:?} in fold plan")]
    UnknownThreadId(String),
    #[error("fold {0:?} has overlapping train and test sets")]
    OverlappingFold(String),
    #[error("fold {0:?} has an empty train or test set")]
    EmptyFold(String),
    #[error("unsupported corpus format version {0:?}")]
    UnsupportedVersion(String),
}

/// Supported on-disk schema versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatVersion {
    #[default]
    V1,
}

impl std::str::FromStr for FormatVersion {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "v1" => Ok(FormatVersion::V1),
            other => Err(DataError::UnsupportedVersion(other.to_string())),
        }
    }
}

/// A named collection of validated conversation threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub threads: Vec<ConversationThread>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, threads: Vec<ConversationThread>) -> Corpus {
        Corpus {
            name: name.into(),
            threads,
        }
    }

    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn thread(&self, thread_id: &str) -> Option<&ConversationThread> {
        self.threads.iter().find(|t| t.thread_id == thread_id)
    }

    /// Thread ids that carry at least one stance-labeled tweet.
    pub fn stance_labeled_ids(&self) -> BTreeSet<String> {
        self.threads
            .iter()
            .filter(|t| t.tweets.iter().any(|tw| tw.stance.is_some()))
            .map(|t| t.thread_id.clone())
            .collect()
    }

    pub fn events(&self) -> BTreeSet<String> {
        self.threads.iter().map(|t| t.event.clone()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct RawTweet {
    id: String,
    parent_id: Option<String>,
    ts: i64,
    text: String,
    stance: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawThread {
    thread_id: String,
    event: String,
    veracity: Option<String>,
    tweets: Vec<RawTweet>,
}

/// Load and validate a JSONL corpus. Every thread must parse, carry known
/// labels and form a single reply tree.
pub fn load_corpus(path: &Path, version: FormatVersion) -> Result<Corpus, DataError> {
    let FormatVersion::V1 = version;
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut threads = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawThread = serde_json::from_str(&line).map_err(|e| DataError::Schema {
            line: lineno,
            msg: e.to_string(),
        })?;
        let veracity = raw
            .veracity
            .as_deref()
            .map(|v| {
                v.parse::<Veracity>().map_err(|msg| DataError::Label {
                    line: lineno,
                    msg,
                })
            })
            .transpose()?;
        let tweets = raw
            .tweets
            .into_iter()
            .map(|t| {
                let stance = t
                    .stance
                    .as_deref()
                    .map(|s| {
                        s.parse::<Stance>().map_err(|msg| DataError::Label {
                            line: lineno,
                            msg,
                        })
                    })
                    .transpose()?;
                Ok(Tweet {
                    id: t.id,
                    parent_id: t.parent_id,
                    ts: t.ts,
                    text: t.text,
                    stance,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        let thread = ConversationThread {
            thread_id: raw.thread_id,
            event: raw.event,
            veracity,
            tweets,
        };
        thread.tree().map_err(|source| DataError::Tree {
            line: lineno,
            thread_id: thread.thread_id.clone(),
            source,
        })?;
        if !seen_ids.insert(thread.thread_id.clone()) {
            return Err(DataError::DuplicateThreadId(thread.thread_id));
        }
        threads.push(thread);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    Ok(Corpus { name, threads })
}

/// Write a corpus in the canonical JSONL schema.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), DataError> {
    let mut file = std::fs::File::create(path)?;
    for thread in &corpus.threads {
        let line = serde_json::to_string(thread).expect("thread serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// How to derive train/test folds from a corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldScheme {
    /// A caller-provided partition (e.g. an official train/test split).
    FixedSplit {
        train: Vec<String>,
        test: Vec<String>,
    },
    /// One fold per event: that event's threads are the test set and all
    /// remaining threads train.
    LeaveOneEventOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Build a fold plan and check its integrity (disjoint train/test per fold,
/// known ids, non-degenerate folds).
pub fn make_folds(corpus: &Corpus, scheme: &FoldScheme) -> Result<FoldPlan, DataError> {
    let ids: BTreeSet<&str> = corpus.threads.iter().map(|t| t.thread_id.as_str()).collect();
    let folds = match scheme {
        FoldScheme::FixedSplit { train, test } => {
            for id in train.iter().chain(test) {
                if !ids.contains(id.as_str()) {
                    return Err(DataError::UnknownThreadId(id.clone()));
                }
            }
            vec![Fold {
                name: "fixed".to_string(),
                train: train.clone(),
                test: test.clone(),
            }]
        }
        FoldScheme::LeaveOneEventOut => {
            let mut by_event: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for thread in &corpus.threads {
                if thread.event.is_empty() {
                    return Err(DataError::MissingEventTag(thread.thread_id.clone()));
                }
                by_event
                    .entry(thread.event.as_str())
                    .or_default()
                    .push(thread.thread_id.as_str());
            }
            if by_event.len() < 2 {
                return Err(DataError::InsufficientEvents(by_event.len()));
            }
            by_event
                .iter()
                .map(|(event, test_ids)| {
                    let train = corpus
                        .threads
                        .iter()
                        .filter(|t| t.event != *event)
                        .map(|t| t.thread_id.clone())
                        .collect();
                    Fold {
                        name: (*event).to_string(),
                        train,
                        test: test_ids.iter().map(|s| s.to_string()).collect(),
                    }
                })
                .collect()
        }
    };
    for fold in &folds {
        let train: BTreeSet<&str> = fold.train.iter().map(|s| s.as_str()).collect();
        if fold.test.iter().any(|id| train.contains(id.as_str())) {
            return Err(DataError::OverlappingFold(fold.name.clone()));
        }
        if fold.train.is_empty() || fold.test.is_empty() {
            return Err(DataError::EmptyFold(fold.name.clone()));
        }
    }
    Ok(FoldPlan { folds })
}

/// Resolve a fold's id lists into thread references.
pub fn materialize_fold<'c>(
    corpus: &'c Corpus,
    fold: &Fold,
) -> Result<(Vec<&'c ConversationThread>, Vec<&'c ConversationThread>), DataError> {
    let lookup: BTreeMap<&str, &ConversationThread> = corpus
        .threads
        .iter()
        .map(|t| (t.thread_id.as_str(), t))
        .collect();
    let resolve = |ids: &[String]| {
        ids.iter()
            .map(|id| {
                lookup
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| DataError::UnknownThreadId(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    Ok((resolve(&fold.train)?, resolve(&fold.test)?))
}

/// Table-style corpus summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub corpus: String,
    pub threads: usize,
    pub tweets: usize,
    /// Mean over threads of the maximum tweet depth.
    pub avg_depth: f64,
    pub stance_counts: [usize; 4],
    pub veracity_counts: [usize; 3],
}

pub fn corpus_statistics(corpus: &Corpus) -> Result<CorpusStats, DataError> {
    let mut tweets = 0;
    let mut depth_sum = 0.0;
    let mut stance_counts = [0usize; 4];
    let mut veracity_counts = [0usize; 3];
    for thread in &corpus.threads {
        tweets += thread.tweets.len();
        let tree = thread.tree().map_err(|source| DataError::Tree {
            line: 0,
            thread_id: thread.thread_id.clone(),
            source,
        })?;
        depth_sum += tree.depth.iter().copied().max().unwrap_or(0) as f64;
        for tweet in &thread.tweets {
            if let Some(s) = tweet.stance {
                stance_counts[s.index()] += 1;
            }
        }
        if let Some(v) = thread.veracity {
            veracity_counts[v.index()] += 1;
        }
    }
    let avg_depth = if corpus.threads.is_empty() {
        0.0
    } else {
        depth_sum / corpus.threads.len() as f64
    };
    Ok(CorpusStats {
        corpus: corpus.name.clone(),
        threads: corpus.threads.len(),
        tweets,
        avg_depth,
        stance_counts,
        veracity_counts,
    })
}

impl CorpusStats {
    pub const CSV_HEADER: &'static str =
        "corpus,threads,tweets,avg_depth,support,deny,query,comment,true,false,unverified";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{},{},{},{},{},{},{}",
            self.corpus,
            self.threads,
            self.tweets,
            self.avg_depth,
            self.stance_counts[0],
            self.stance_counts[1],
            self.stance_counts[2],
            self.stance_counts[3],
            self.veracity_counts[0],
            self.veracity_counts[1],
            self.veracity_counts[2],
        )
    }

    pub fn write_csv(stats: &[CorpusStats], path: &Path) -> Result<(), DataError> {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in stats {
            out.push_str(&s.to_csv_row());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
