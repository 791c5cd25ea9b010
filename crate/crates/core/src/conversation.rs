//! Conversation threads as rooted reply trees.
//!
//! A thread is one source tweet plus every reply reaching it directly or
//! indirectly. The reply relation forms a tree rooted at the source tweet;
//! all downstream structure (adjacency matrices, depth buckets, temporal
//! ordering) derives from the types here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stance of a tweet towards the rumor it discusses.
///
/// The discriminant order is the canonical class order used for one-hot
/// encodings, confusion matrices and argmax tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Support,
    Deny,
    Query,
    Comment,
}

impl Stance {
    pub const ALL: [Stance; 4] = [Stance::Support, Stance::Deny, Stance::Query, Stance::Comment];

    pub fn index(self) -> usize {
        match self {
            Stance::Support => 0,
            Stance::Deny => 1,
            Stance::Query => 2,
            Stance::Comment => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Stance> {
        Stance::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Support => "support",
            Stance::Deny => "deny",
            Stance::Query => "query",
            Stance::Comment => "comment",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "support" => Ok(Stance::Support),
            "deny" => Ok(Stance::Deny),
            "query" => Ok(Stance::Query),
            "comment" => Ok(Stance::Comment),
            other => Err(format!("unknown stance label {other:?}")),
        }
    }
}

/// Ground-truth rumor status of a whole thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Veracity {
    True,
    False,
    Unverified,
}

impl Veracity {
    pub const ALL: [Veracity; 3] = [Veracity::True, Veracity::False, Veracity::Unverified];

    pub fn index(self) -> usize {
        match self {
            Veracity::True => 0,
            Veracity::False => 1,
            Veracity::Unverified => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Veracity> {
        Veracity::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Veracity::True => "true",
            Veracity::False => "false",
            Veracity::Unverified => "unverified",
        }
    }
}

impl fmt::Display for Veracity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Veracity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true" => Ok(Veracity::True),
            "false" => Ok(Veracity::False),
            "unverified" => Ok(Veracity::Unverified),
            other => Err(format!("unknown veracity label {other:?}")),
        }
    }
}

/// One tweet in a conversation thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    /// None iff this is the source tweet.
    pub parent_id: Option<String>,
    /// Epoch milliseconds.
    pub ts: i64,
    pub text: String,
    pub stance: Option<Stance>,
}

/// A source tweet plus all replies, with an optional veracity label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationThread {
    pub thread_id: String,
    pub event: String,
    pub veracity: Option<Veracity>,
    pub tweets: Vec<Tweet>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("thread has no tweets")]
    EmptyThread,
    #[error("duplicate tweet id {0:?}")]
    DuplicateTweetId(String),
    #[error("multiple root tweets: {0:?} and {1:?}")]
    MultipleRoots(String, String),
    #[error("no root tweet (every tweet has a parent)")]
    NoRoot,
    #[error("tweet {child:?} replies to unknown tweet {parent:?}")]
    OrphanTweet { child: String, parent: String },
    #[error("reply cycle involving tweet {0:?}")]
    CycleDetected(String),
    #[error("unknown tweet id {0:?}")]
    UnknownTweet(String),
}

/// Parent/children index over one thread, in chronological index space.
///
/// Index `i` everywhere refers to the i-th tweet of [`ThreadTree::order`],
/// the total order by `(timestamp, id, input position)`. Adjacency rows,
/// feature-matrix rows and recurrent inputs all share this index space.
#[derive(Debug, Clone)]
pub struct ThreadTree {
    /// Chronological permutation: `order[i]` is the position of tweet i in
    /// the original tweet list.
    pub order: Vec<usize>,
    /// Tweet ids in chronological order.
    pub ids: Vec<String>,
    /// `parent[i]` is the chronological index of tweet i's parent, None for
    /// the root.
    pub parent: Vec<Option<usize>>,
    /// Children (chronological indices) per tweet.
    pub children: Vec<Vec<usize>>,
    /// Root position in chronological index space.
    pub root: usize,
    /// Depth of each tweet; the source tweet has depth 0.
    pub depth: Vec<usize>,
}

impl ThreadTree {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, tweet_id: &str) -> Option<usize> {
        self.ids.iter().position(|id| id == tweet_id)
    }
}

/// Chronological permutation of tweet positions, by `(ts, id, position)`.
pub fn chronological_order(tweets: &[Tweet]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tweets.len()).collect();
    order.sort_by(|&a, &b| {
        let ta = &tweets[a];
        let tb = &tweets[b];
        ta.ts
            .cmp(&tb.ts)
            .then_with(|| ta.id.cmp(&tb.id))
            .then(a.cmp(&b))
    });
    order
}

/// Validate the reply relation of a thread and build its tree index.
pub fn build_tree(tweets: &[Tweet]) -> Result<ThreadTree, TreeError> {
    if tweets.is_empty() {
        return Err(TreeError::EmptyThread);
    }
    let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
    for (pos, tweet) in tweets.iter().enumerate() {
        if by_id.insert(tweet.id.as_str(), pos).is_some() {
            return Err(TreeError::DuplicateTweetId(tweet.id.clone()));
        }
    }

    let order = chronological_order(tweets);
    let chrono_of_pos = {
        let mut map = vec![0usize; tweets.len()];
        for (chrono, &pos) in order.iter().enumerate() {
            map[pos] = chrono;
        }
        map
    };

    let mut root: Option<usize> = None;
    let mut parent: Vec<Option<usize>> = vec![None; tweets.len()];
    for (chrono, &pos) in order.iter().enumerate() {
        let tweet = &tweets[pos];
        match &tweet.parent_id {
            None => {
                if let Some(prev) = root {
                    return Err(TreeError::MultipleRoots(
                        tweets[order[prev]].id.clone(),
                        tweet.id.clone(),
                    ));
                }
                root = Some(chrono);
            }
            Some(pid) => {
                let parent_pos = *by_id.get(pid.as_str()).ok_or(TreeError::OrphanTweet {
                    child: tweet.id.clone(),
                    parent: pid.clone(),
                })?;
                parent[chrono] = Some(chrono_of_pos[parent_pos]);
            }
        }
    }
    let root = root.ok_or(TreeError::NoRoot)?;

    // Depth by walking parent chains; a chain longer than the thread means
    // the parent pointers loop somewhere.
    let n = tweets.len();
    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    for i in 0..n {
        let mut chain = Vec::new();
        let mut cur = i;
        while depth[cur] == usize::MAX {
            chain.push(cur);
            match parent[cur] {
                Some(p) => cur = p,
                None => return Err(TreeError::CycleDetected(tweets[order[i]].id.clone())),
            }
            if chain.len() > n {
                return Err(TreeError::CycleDetected(tweets[order[i]].id.clone()));
            }
        }
        let base = depth[cur];
        for (k, &node) in chain.iter().rev().enumerate() {
            depth[node] = base + k + 1;
        }
    }

    let mut children = vec![Vec::new(); n];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }

    let ids = order.iter().map(|&pos| tweets[pos].id.clone()).collect();
    Ok(ThreadTree {
        order,
        ids,
        parent,
        children,
        root,
        depth,
    })
}

/// Depth of one tweet in the thread (source tweet is 0).
pub fn depth_of(tree: &ThreadTree, tweet_id: &str) -> Result<usize, TreeError> {
    let idx = tree
        .index_of(tweet_id)
        .ok_or_else(|| TreeError::UnknownTweet(tweet_id.to_string()))?;
    Ok(tree.depth[idx])
}

impl ConversationThread {
    pub fn tree(&self) -> Result<ThreadTree, TreeError> {
        build_tree(&self.tweets)
    }

    /// Tweets in chronological order, paired with their depths.
    pub fn chronological_tweets(&self) -> Result<Vec<(&Tweet, usize)>, TreeError> {
        let tree = self.tree()?;
        Ok(tree
            .order
            .iter()
            .zip(tree.depth.iter())
            .map(|(&pos, &d)| (&self.tweets[pos], d))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(id: &str, parent: Option<&str>, ts: i64) -> Tweet {
        Tweet {
            id: id.to_string(),
            parent_id: parent.map(|s| s.to_string()),
            ts,
            text: String::new(),
            stance: None,
        }
    }

    #[test]
    fn single_tweet_is_depth_zero_root() {
        let tweets = vec![tweet("a", None, 10)];
        let tree = build_tree(&tweets).unwrap();
        assert_eq!(tree.root, 0);
        assert_eq!(tree.depth, vec![0]);
        assert_eq!(depth_of(&tree, "a").unwrap(), 0);
    }

    #[test]
    fn reply_structure_with_two_hop_neighbor() {
        // 2 and 3 reply to 1; 4 and 5 reply to 2. Tweet 3 is two hops from 2.
        let tweets = vec![
            tweet("1", None, 0),
            tweet("2", Some("1"), 1),
            tweet("3", Some("1"), 2),
            tweet("4", Some("2"), 3),
            tweet("5", Some("2"), 4),
        ];
        let tree = build_tree(&tweets).unwrap();
        let i2 = tree.index_of("2").unwrap();
        let i3 = tree.index_of("3").unwrap();
        // distance(2, 3) = 2 via the root
        assert_eq!(tree.parent[i2], Some(tree.root));
        assert_eq!(tree.parent[i3], Some(tree.root));
        assert_eq!(tree.depth[i2], 1);
        assert_eq!(depth_of(&tree, "4").unwrap(), 2);
    }

    #[test]
    fn multiple_roots_rejected() {
        let tweets = vec![
            tweet("a", None, 0),
            tweet("b", None, 1),
            tweet("c", Some("a"), 2),
            tweet("d", Some("a"), 3),
            tweet("e", Some("b"), 4),
        ];
        assert!(matches!(
            build_tree(&tweets),
            Err(TreeError::MultipleRoots(_, _))
        ));
    }

    #[test]
    fn orphan_rejected() {
        let tweets = vec![tweet("a", None, 0), tweet("b", Some("zzz"), 1)];
        assert!(matches!(
            build_tree(&tweets),
            Err(TreeError::OrphanTweet { .. })
        ));
    }

    #[test]
    fn cycle_rejected() {
        let tweets = vec![
            tweet("a", Some("b"), 0),
            tweet("b", Some("a"), 1),
            tweet("r", None, 2),
        ];
        assert!(matches!(
            build_tree(&tweets),
            Err(TreeError::CycleDetected(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let tweets = vec![tweet("a", None, 0), tweet("a", Some("a"), 1)];
        assert!(matches!(
            build_tree(&tweets),
            Err(TreeError::DuplicateTweetId(_))
        ));
    }

    #[test]
    fn depth_of_reply_chain() {
        let mut tweets = vec![tweet("t0", None, 0)];
        for i in 1..=7 {
            tweets.push(tweet(&format!("t{i}"), Some(&format!("t{}", i - 1)), i));
        }
        let tree = build_tree(&tweets).unwrap();
        assert_eq!(depth_of(&tree, "t1").unwrap(), 1);
        assert_eq!(depth_of(&tree, "t7").unwrap(), 7);
        assert!(matches!(
            depth_of(&tree, "nope"),
            Err(TreeError::UnknownTweet(_))
        ));
    }

    #[test]
    fn chronological_order_sorts_by_timestamp() {
        let tweets = vec![
            tweet("a", None, 30),
            tweet("b", Some("a"), 10),
            tweet("c", Some("a"), 20),
        ];
        assert_eq!(chronological_order(&tweets), vec![1, 2, 0]);
    }

    #[test]
    fn chronological_order_ties_break_by_id() {
        let tweets = vec![
            tweet("z", None, 5),
            tweet("a", Some("z"), 5),
            tweet("m", Some("z"), 5),
        ];
        assert_eq!(chronological_order(&tweets), vec![1, 2, 0]);
    }

    #[test]
    fn chronological_order_single_tweet_identity() {
        let tweets = vec![tweet("only", None, 123)];
        assert_eq!(chronological_order(&tweets), vec![0]);
    }

    #[test]
    fn root_need_not_be_chronologically_first() {
        let tweets = vec![tweet("root", None, 100), tweet("early", Some("root"), 50)];
        let tree = build_tree(&tweets).unwrap();
        assert_eq!(tree.ids, vec!["early".to_string(), "root".to_string()]);
        assert_eq!(tree.root, 1);
        assert_eq!(tree.depth, vec![1, 0]);
    }

    #[test]
    fn stance_label_round_trip() {
        for s in Stance::ALL {
            assert_eq!(s.as_str().parse::<Stance>().unwrap(), s);
            assert_eq!(Stance::from_index(s.index()), Some(s));
        }
        assert!("agree".parse::<Stance>().is_err());
    }
}
