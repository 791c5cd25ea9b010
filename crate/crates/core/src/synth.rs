//! Synthetic corpora with planted, veracity-conditioned stance dynamics.
//!
//! Threads are random reply trees whose tweet stances are drawn from a
//! time-varying distribution conditioned on the thread's veracity class.
//! Tweet texts mix stance-indicative cue tokens with noise tokens, so both
//! tasks are learnable from the generated data alone: stance from content
//! and structure, veracity from how the stance mixture shifts over time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{ConversationThread, Stance, Tweet, Veracity};
use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Per-veracity-class stance mixtures over consecutive time phases.
/// Each row is `[p_support, p_deny, p_query, p_comment]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceDynamics {
    pub true_rumor: Vec<[f64; 4]>,
    pub false_rumor: Vec<[f64; 4]>,
    pub unverified: Vec<[f64; 4]>,
}

impl StanceDynamics {
    /// Dynamics shaped like observed rumor discussions: support dominates
    /// early everywhere; denial overtakes false rumors, querying rises on
    /// unverified ones, and true rumors drift from support to comment.
    pub fn planted() -> StanceDynamics {
        StanceDynamics {
            true_rumor: vec![
                [0.75, 0.05, 0.05, 0.15],
                [0.65, 0.05, 0.05, 0.25],
                [0.60, 0.05, 0.05, 0.30],
            ],
            false_rumor: vec![
                [0.60, 0.15, 0.10, 0.15],
                [0.25, 0.50, 0.10, 0.15],
                [0.10, 0.75, 0.05, 0.10],
            ],
            unverified: vec![
                [0.55, 0.05, 0.25, 0.15],
                [0.25, 0.05, 0.55, 0.15],
                [0.15, 0.05, 0.70, 0.10],
            ],
        }
    }

    pub fn for_class(&self, veracity: Veracity) -> &[[f64; 4]] {
        match veracity {
            Veracity::True => &self.true_rumor,
            Veracity::False => &self.false_rumor,
            Veracity::Unverified => &self.unverified,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        for (class, phases) in [
            ("true", &self.true_rumor),
            ("false", &self.false_rumor),
            ("unverified", &self.unverified),
        ] {
            if phases.is_empty() {
                return Err(SynthError::InvalidSpec(format!(
                    "{class} dynamics have no phases"
                )));
            }
            for (i, p) in phases.iter().enumerate() {
                if p.iter().any(|&v| v < 0.0) {
                    return Err(SynthError::InvalidSpec(format!(
                        "{class} phase {i} has a negative probability"
                    )));
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(SynthError::InvalidSpec(format!(
                        "{class} phase {i} sums to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Recipe for one synthetic corpus; the seed fully determines the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_threads: usize,
    pub tweets_min: usize,
    pub tweets_max: usize,
    /// Number of distinct noise tokens.
    pub vocab_size: usize,
    /// Event tags are assigned round-robin over this many events.
    pub n_events: usize,
    pub seed: u64,
    /// Probability that a generated token is a stance cue.
    pub cue_rate: f64,
    pub dynamics: StanceDynamics,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_threads: 20,
            tweets_min: 3,
            tweets_max: 8,
            vocab_size: 40,
            n_events: 4,
            seed: 7,
            cue_rate: 0.75,
            dynamics: StanceDynamics::planted(),
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.tweets_min == 0 || self.tweets_min > self.tweets_max {
            return Err(SynthError::InvalidSpec(format!(
                "tweet count range {}..={} is empty",
                self.tweets_min, self.tweets_max
            )));
        }
        if self.vocab_size == 0 {
            return Err(SynthError::InvalidSpec("vocab_size must be positive".into()));
        }
        if self.n_events == 0 {
            return Err(SynthError::InvalidSpec("n_events must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.cue_rate) {
            return Err(SynthError::InvalidSpec(format!(
                "cue_rate {} outside [0,1]",
                self.cue_rate
            )));
        }
        self.dynamics.validate()
    }
}

const CUE_WORDS: [[&str; 3]; 4] = [
    ["confirmed", "exactly", "agreed"],
    ["hoax", "nonsense", "untrue"],
    ["really", "source", "evidence"],
    ["wow", "hmm", "interesting"],
];

fn sample_stance(dist: &[f64; 4], rng: &mut ChaCha8Rng) -> Stance {
    let roll: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if roll < acc {
            return Stance::from_index(i).expect("stance index");
        }
    }
    Stance::Comment
}

fn tweet_text(stance: Stance, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> String {
    let n_tokens = 4 + rng.random_range(0..4);
    let mut words = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        if rng.random::<f64>() < spec.cue_rate {
            let cue = CUE_WORDS[stance.index()][rng.random_range(0..3)];
            words.push(cue.to_string());
        } else {
            words.push(format!("w{}", rng.random_range(0..spec.vocab_size)));
        }
    }
    words.join(" ")
}

/// Generate a corpus from a spec. Identical specs produce byte-identical
/// corpora.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut threads = Vec::with_capacity(spec.n_threads);
    for t in 0..spec.n_threads {
        let veracity = Veracity::ALL[t % 3];
        let phases = spec.dynamics.for_class(veracity);
        let n = rng.random_range(spec.tweets_min..=spec.tweets_max);
        let base_ts = 1_500_000_000_000_i64 + t as i64 * 10_000_000;
        let mut tweets: Vec<Tweet> = Vec::with_capacity(n);
        for j in 0..n {
            let phase = if n <= 1 {
                0
            } else {
                (j * phases.len() / n).min(phases.len() - 1)
            };
            let stance = sample_stance(&phases[phase], &mut rng);
            let parent = if j == 0 {
                None
            } else {
                Some(tweets[rng.random_range(0..j)].id.clone())
            };
            let ts = base_ts + j as i64 * 60_000 + rng.random_range(0..30_000);
            tweets.push(Tweet {
                id: format!("s{seed:x}-{t:04}-t{j:02}", seed = spec.seed),
                parent_id: parent,
                ts,
                text: tweet_text(stance, spec, &mut rng),
                stance: Some(stance),
            });
        }
        threads.push(ConversationThread {
            thread_id: format!("s{seed:x}-{t:04}", seed = spec.seed),
            event: format!("event-{}", t % spec.n_events),
            veracity: Some(veracity),
            tweets,
        });
    }
    Ok(Corpus::new(format!("synthetic-{}", spec.seed), threads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_specs_give_identical_corpora() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let a_json = serde_json::to_string(&a.threads).unwrap();
        let b_json = serde_json::to_string(&b.threads).unwrap();
        assert_eq!(a_json, b_json);
    }

    #[test]
    fn empty_spec_gives_empty_corpus() {
        let spec = SyntheticSpec {
            n_threads: 0,
            ..SyntheticSpec::default()
        };
        let corpus = generate_synthetic(&spec).unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn invalid_distribution_is_rejected() {
        let mut spec = SyntheticSpec::default();
        spec.dynamics.false_rumor[0] = [0.5, 0.5, 0.5, 0.5];
        assert!(matches!(
            generate_synthetic(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
        let bad_range = SyntheticSpec {
            tweets_min: 5,
            tweets_max: 3,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&bad_range).is_err());
    }

    #[test]
    fn false_rumors_deny_more_late_than_early() {
        // Count the generator's emitted labels per phase position.
        let spec = SyntheticSpec {
            n_threads: 60,
            ..SyntheticSpec::default()
        };
        let corpus = generate_synthetic(&spec).unwrap();
        let mut first = [0usize; 2]; // [deny, total] in first third
        let mut last = [0usize; 2];
        for thread in corpus
            .threads
            .iter()
            .filter(|t| t.veracity == Some(Veracity::False))
        {
            let n = thread.tweets.len();
            for (j, tweet) in thread.tweets.iter().enumerate() {
                let phase = (j * 3 / n).min(2);
                let deny = tweet.stance == Some(Stance::Deny);
                if phase == 0 {
                    first[0] += deny as usize;
                    first[1] += 1;
                } else if phase == 2 {
                    last[0] += deny as usize;
                    last[1] += 1;
                }
            }
        }
        let first_rate = first[0] as f64 / first[1] as f64;
        let last_rate = last[0] as f64 / last[1] as f64;
        assert!(
            last_rate > first_rate,
            "deny rate should rise: {first_rate} -> {last_rate}"
        );
    }

    #[test]
    fn generated_threads_are_valid_trees() {
        let spec = SyntheticSpec::default();
        let corpus = generate_synthetic(&spec).unwrap();
        assert_eq!(corpus.len(), 20);
        for thread in &corpus.threads {
            thread.tree().unwrap();
            assert!(thread.tweets.iter().all(|t| t.stance.is_some()));
        }
    }
}
