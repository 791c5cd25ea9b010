//! The two-component model: a graph-convolutional stance classifier over
//! the conversation structure, feeding a stance-aware recurrent veracity
//! predictor over the chronological tweet sequence.
//!
//! The bottom component encodes each tweet's tokens with a bidirectional
//! GRU, runs L graph-convolution layers over the normalized adjacency and
//! emits per-tweet stance logits. The top component consumes `[c_i; s_i]`
//! (content feature concatenated with unnormalized stance logits) in
//! chronological order, max-pools the recurrent states per dimension and
//! maps the pooled vector to a veracity distribution.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjacency::{normalize, AdjacencyError, AdjacencyMatrix, GcnVariant, NormalizedAdjacency};
use crate::autodiff::{NnError, Tape, Var};
use crate::conversation::{ConversationThread, Stance, TreeError, Veracity};
use crate::nn::{
    bigru_final, glorot_uniform, gru_sequence, init_gru, BoundParams, Direction, GruVars,
    ParameterSet,
};
use crate::tensor::Tensor;
use crate::text::{TextError, Vocab};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Adjacency(#[from] AdjacencyError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("thread has no tweets")]
    EmptyThread,
}

/// Graph convolution stack configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    /// Output size per layer; the last entry must be 4 (stance classes).
    pub layer_sizes: Vec<usize>,
    pub variant: GcnVariant,
    /// Dropout used on the stack input and all non-final layer outputs when
    /// no training-time override applies.
    pub dropout: f64,
    /// Apply tanh after the final layer too. Off by default: bounded stance
    /// logits cap the reachable confidence, which blocks loss targets that
    /// overfit runs are expected to hit.
    pub final_tanh: bool,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layer_sizes: vec![200, 4],
            variant: GcnVariant::Customized,
            dropout: 0.5,
            final_tanh: false,
        }
    }
}

/// Temporal head variant for veracity prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RnnVariant {
    Gru,
    Cnn,
    None,
}

impl std::str::FromStr for RnnVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gru" => Ok(RnnVariant::Gru),
            "cnn" => Ok(RnnVariant::Cnn),
            "none" => Ok(RnnVariant::None),
            other => Err(format!("unknown rnn variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeracityConfig {
    pub rnn_variant: RnnVariant,
    /// Concatenate stance logits onto content features as recurrent input.
    pub use_stance_features: bool,
    pub hidden_size: usize,
    pub cnn_windows: Vec<usize>,
    pub cnn_feature_maps: usize,
}

impl Default for VeracityConfig {
    fn default() -> Self {
        VeracityConfig {
            rnn_variant: RnnVariant::Gru,
            use_stance_features: true,
            hidden_size: 100,
            cnn_windows: vec![2, 3, 4],
            cnn_feature_maps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Hidden size per BGRU direction; the content feature size is twice
    /// this.
    pub bgru_hidden: usize,
    pub gcn: GcnConfig,
    pub veracity: VeracityConfig,
    pub train_embeddings: bool,
    /// Optional pretrained embedding file (`token v1 ... vD` per line);
    /// tokens missing from it keep seeded random vectors.
    pub embedding_file: Option<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 200,
            bgru_hidden: 100,
            gcn: GcnConfig::default(),
            veracity: VeracityConfig::default(),
            train_embeddings: false,
            embedding_file: None,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for synthetic-corpus runs and tests.
    pub fn small() -> ModelConfig {
        ModelConfig {
            embed_dim: 16,
            bgru_hidden: 8,
            gcn: GcnConfig {
                layer_sizes: vec![16, 4],
                ..GcnConfig::default()
            },
            veracity: VeracityConfig {
                hidden_size: 16,
                cnn_feature_maps: 10,
                ..VeracityConfig::default()
            },
            train_embeddings: false,
            embedding_file: None,
        }
    }

    pub fn content_dim(&self) -> usize {
        2 * self.bgru_hidden
    }

    fn rnn_input_dim(&self) -> usize {
        if self.veracity.use_stance_features {
            self.content_dim() + 4
        } else {
            self.content_dim()
        }
    }

    fn fnn_input_dim(&self) -> usize {
        match self.veracity.rnn_variant {
            RnnVariant::Gru => self.veracity.hidden_size,
            RnnVariant::Cnn => self.veracity.cnn_windows.len() * self.veracity.cnn_feature_maps,
            RnnVariant::None => self.rnn_input_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim == 0 || self.bgru_hidden == 0 {
            return Err(ModelError::Config("zero embedding or BGRU size".into()));
        }
        match self.gcn.layer_sizes.last() {
            Some(4) => {}
            other => {
                return Err(ModelError::Config(format!(
                    "last GCN layer must have size 4 (stance classes), got {other:?}"
                )))
            }
        }
        if self.gcn.layer_sizes.iter().any(|&s| s == 0) {
            return Err(ModelError::Config("zero-size GCN layer".into()));
        }
        if !(0.0..1.0).contains(&self.gcn.dropout) {
            return Err(ModelError::Config(format!(
                "dropout {} outside [0,1)",
                self.gcn.dropout
            )));
        }
        if self.veracity.hidden_size == 0 && self.veracity.rnn_variant == RnnVariant::Gru {
            return Err(ModelError::Config("zero veracity hidden size".into()));
        }
        if self.veracity.rnn_variant == RnnVariant::Cnn
            && (self.veracity.cnn_windows.is_empty()
                || self.veracity.cnn_windows.iter().any(|&w| w == 0)
                || self.veracity.cnn_feature_maps == 0)
        {
            return Err(ModelError::Config("bad CNN window configuration".into()));
        }
        Ok(())
    }
}

/// A thread prepared for the model: chronological ids, depths, token ids,
/// normalized adjacency and labels, all in one shared index space.
#[derive(Debug, Clone)]
pub struct ThreadEncoding {
    pub thread_id: String,
    pub tweet_ids: Vec<String>,
    pub depths: Vec<usize>,
    pub token_ids: Vec<Vec<usize>>,
    pub adjacency: NormalizedAdjacency,
    pub stances: Vec<Option<Stance>>,
    pub veracity: Option<Veracity>,
}

impl ThreadEncoding {
    pub fn len(&self) -> usize {
        self.tweet_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweet_ids.is_empty()
    }
}

pub fn encode_thread(
    thread: &ConversationThread,
    vocab: &Vocab,
    variant: GcnVariant,
) -> Result<ThreadEncoding, ModelError> {
    if thread.tweets.is_empty() {
        return Err(ModelError::EmptyThread);
    }
    let tree = thread.tree()?;
    let adjacency = normalize(&AdjacencyMatrix::from_tree(&tree), variant)?;
    let mut tweet_ids = Vec::with_capacity(tree.len());
    let mut token_ids = Vec::with_capacity(tree.len());
    let mut stances = Vec::with_capacity(tree.len());
    for &pos in &tree.order {
        let tweet = &thread.tweets[pos];
        tweet_ids.push(tweet.id.clone());
        token_ids.push(vocab.encode(&tweet.text)?);
        stances.push(tweet.stance);
    }
    Ok(ThreadEncoding {
        thread_id: thread.thread_id.clone(),
        tweet_ids,
        depths: tree.depth.clone(),
        token_ids,
        adjacency,
        stances,
        veracity: thread.veracity,
    })
}

/// Dropout context for a forward pass.
pub enum Mode<'r> {
    Train {
        rng: &'r mut ChaCha8Rng,
        dropout: f64,
    },
    Eval,
}

impl Mode<'_> {
    fn apply_dropout(&mut self, tape: &mut Tape, x: Var) -> Result<Var, NnError> {
        match self {
            Mode::Eval => Ok(x),
            Mode::Train { rng, dropout } => tape.dropout(x, *dropout, Some(rng)),
        }
    }
}

/// Everything one forward pass produces for a single thread.
pub struct ForwardPass {
    /// Unnormalized stance outputs, `[n x 4]`.
    pub stance_logits: Var,
    /// Row-softmax of the logits.
    pub stance_probs: Var,
    /// Sum over labeled tweets of per-tweet cross-entropy, if any.
    pub stance_nll_sum: Option<Var>,
    pub labeled_count: usize,
    /// Veracity distribution, `[3]`.
    pub veracity_probs: Var,
    /// Cross-entropy against the thread label, if present.
    pub veracity_nll: Option<Var>,
    /// Recurrent states per tweet (gru variant only).
    pub veracity_states: Option<Vec<Var>>,
    /// For each pooled dimension, the tweet index that won the max.
    pub pooled_argmax: Vec<usize>,
}

/// Model parameters plus the vocabulary they were built against.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ParameterSet,
}

impl Model {
    /// Initialize parameters from a seed; `pretrained` overrides the seeded
    /// random embedding table.
    pub fn new(
        config: ModelConfig,
        vocab: Vocab,
        seed: u64,
        pretrained: Option<Tensor>,
    ) -> Result<Model, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();

        let table = match pretrained {
            Some(t) => {
                if t.shape() != [vocab.len(), config.embed_dim] {
                    return Err(ModelError::Config(format!(
                        "embedding table {:?} does not match vocab {} x dim {}",
                        t.shape(),
                        vocab.len(),
                        config.embed_dim
                    )));
                }
                t
            }
            None => crate::text::random_embeddings(&vocab, config.embed_dim, &mut rng),
        };
        params.insert("embedding.table", table, config.train_embeddings);

        init_gru(
            &mut params,
            "bgru.fwd",
            config.embed_dim,
            config.bgru_hidden,
            &mut rng,
        );
        init_gru(
            &mut params,
            "bgru.bwd",
            config.embed_dim,
            config.bgru_hidden,
            &mut rng,
        );

        let mut in_dim = config.content_dim();
        for (l, &out_dim) in config.gcn.layer_sizes.iter().enumerate() {
            params.insert(
                &format!("gcn.{l}.weight"),
                glorot_uniform(in_dim, out_dim, &mut rng),
                true,
            );
            params.insert(&format!("gcn.{l}.bias"), Tensor::zeros(vec![out_dim]), true);
            in_dim = out_dim;
        }

        match config.veracity.rnn_variant {
            RnnVariant::Gru => {
                init_gru(
                    &mut params,
                    "veracity.gru",
                    config.rnn_input_dim(),
                    config.veracity.hidden_size,
                    &mut rng,
                );
            }
            RnnVariant::Cnn => {
                let d = config.rnn_input_dim();
                for &w in &config.veracity.cnn_windows {
                    params.insert(
                        &format!("veracity.cnn.{w}.weight"),
                        glorot_uniform(w * d, config.veracity.cnn_feature_maps, &mut rng),
                        true,
                    );
                    params.insert(
                        &format!("veracity.cnn.{w}.bias"),
                        Tensor::zeros(vec![config.veracity.cnn_feature_maps]),
                        true,
                    );
                }
            }
            RnnVariant::None => {}
        }

        params.insert(
            "fnn.weight",
            glorot_uniform(config.fnn_input_dim(), 3, &mut rng),
            true,
        );
        params.insert("fnn.bias", Tensor::zeros(vec![3]), true);

        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    /// BGRU content features, one per tweet in chronological order.
    ///
    /// A frozen embedding table never enters the tape; its rows are gathered
    /// up front as constants, which keeps per-batch costs proportional to
    /// the text actually seen rather than the vocabulary size.
    pub fn content_features(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        enc: &ThreadEncoding,
    ) -> Result<Vec<Var>, ModelError> {
        let table_var = if self.config.train_embeddings {
            Some(bound.var("embedding.table"))
        } else {
            None
        };
        let fwd = GruVars::bind(bound, "bgru.fwd");
        let bwd = GruVars::bind(bound, "bgru.bwd");
        let mut contents = Vec::with_capacity(enc.len());
        for tokens in &enc.token_ids {
            let embedded = match table_var {
                Some(table) => tape.gather_rows(table, tokens)?,
                None => {
                    let table = self.params.value("embedding.table");
                    let dim = self.config.embed_dim;
                    let mut data = Vec::with_capacity(tokens.len() * dim);
                    for &id in tokens {
                        data.extend_from_slice(table.row(id));
                    }
                    tape.constant(
                        Tensor::new(vec![tokens.len(), dim], data).expect("gathered rows"),
                    )
                }
            };
            let inputs: Vec<Var> = (0..tokens.len())
                .map(|p| tape.row_of(embedded, p))
                .collect::<Result<_, _>>()?;
            let c = bigru_final(tape, &inputs, &fwd, &bwd, self.config.bgru_hidden)?;
            contents.push(c);
        }
        Ok(contents)
    }

    /// Run the graph-convolution stack over a content matrix, returning the
    /// stance logits `[n x 4]`.
    pub fn gcn_logits(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        content: Var,
        adjacency: &NormalizedAdjacency,
        mode: &mut Mode,
    ) -> Result<Var, ModelError> {
        let n = adjacency.size();
        let a_hat = tape.constant(
            Tensor::new(vec![n, n], adjacency.entries().to_vec()).expect("adjacency tensor"),
        );
        let layers = self.config.gcn.layer_sizes.len();
        let mut h = mode.apply_dropout(tape, content)?;
        for l in 0..layers {
            let w = bound.var(&format!("gcn.{l}.weight"));
            let b = bound.var(&format!("gcn.{l}.bias"));
            let ah = tape.matmul(a_hat, h)?;
            let pre = tape.affine(ah, w, b)?;
            let last = l + 1 == layers;
            h = if last && !self.config.gcn.final_tanh {
                pre
            } else {
                tape.tanh(pre)
            };
            if !last {
                h = mode.apply_dropout(tape, h)?;
            }
        }
        Ok(h)
    }

    /// Full forward pass over one encoded thread.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        enc: &ThreadEncoding,
        mode: &mut Mode,
    ) -> Result<ForwardPass, ModelError> {
        if enc.is_empty() {
            return Err(ModelError::EmptyThread);
        }
        let n = enc.len();
        let contents = self.content_features(tape, bound, enc)?;
        let content_matrix = tape.stack_rows(&contents)?;
        let stance_logits = self.gcn_logits(tape, bound, content_matrix, &enc.adjacency, mode)?;
        let stance_probs = tape.softmax(stance_logits)?;

        let classes: Vec<usize> = enc
            .stances
            .iter()
            .map(|s| s.map(Stance::index).unwrap_or(0))
            .collect();
        let mask: Vec<bool> = enc.stances.iter().map(Option::is_some).collect();
        let labeled_count = mask.iter().filter(|&&m| m).count();
        let stance_nll_sum = if labeled_count > 0 {
            Some(tape.masked_nll_sum(stance_probs, &classes, &mask)?)
        } else {
            None
        };

        // Top component input: [c_i; s_i] in chronological order.
        let mut rnn_inputs = Vec::with_capacity(n);
        for (i, c) in contents.iter().enumerate() {
            let input = if self.config.veracity.use_stance_features {
                let s = tape.row_of(stance_logits, i)?;
                tape.concat(&[*c, s])?
            } else {
                *c
            };
            rnn_inputs.push(input);
        }

        let (pooled, pooled_argmax, veracity_states) = match self.config.veracity.rnn_variant {
            RnnVariant::Gru => {
                let g = GruVars::bind(bound, "veracity.gru");
                let states = gru_sequence(
                    tape,
                    &rnn_inputs,
                    Direction::Forward,
                    &g,
                    self.config.veracity.hidden_size,
                )?;
                let stacked = tape.stack_rows(&states)?;
                let (pooled, argmax) = tape.max_pool_rows(stacked)?;
                (pooled, argmax, Some(states))
            }
            RnnVariant::Cnn => {
                let stacked = tape.stack_rows(&rnn_inputs)?;
                let max_window = *self
                    .config
                    .veracity
                    .cnn_windows
                    .iter()
                    .max()
                    .expect("validated non-empty");
                let padded = tape.pad_rows(stacked, max_window.max(n))?;
                let mut pooled_parts = Vec::new();
                let mut argmax_all = Vec::new();
                for &w in &self.config.veracity.cnn_windows {
                    let weight = bound.var(&format!("veracity.cnn.{w}.weight"));
                    let bias = bound.var(&format!("veracity.cnn.{w}.bias"));
                    let conv = tape.conv1d(padded, weight, bias, w)?;
                    let act = tape.tanh(conv);
                    let (part, argmax) = tape.max_pool_rows(act)?;
                    pooled_parts.push(part);
                    // Conv positions index window starts; padded positions
                    // clamp back onto the last real tweet.
                    argmax_all.extend(argmax.into_iter().map(|t| t.min(n - 1)));
                }
                let pooled = tape.concat(&pooled_parts)?;
                (pooled, argmax_all, None)
            }
            RnnVariant::None => {
                let stacked = tape.stack_rows(&rnn_inputs)?;
                let (pooled, argmax) = tape.max_pool_rows(stacked)?;
                (pooled, argmax, None)
            }
        };

        let pooled = mode.apply_dropout(tape, pooled)?;
        let fw = bound.var("fnn.weight");
        let fb = bound.var("fnn.bias");
        let fnn = tape.vecmat(pooled, fw)?;
        let veracity_logits = tape.add(fnn, fb)?;
        let veracity_probs = tape.softmax(veracity_logits)?;
        let veracity_nll = match enc.veracity {
            Some(v) => {
                let mut one_hot = [0.0; 3];
                one_hot[v.index()] = 1.0;
                Some(tape.cross_entropy(veracity_probs, &one_hot)?)
            }
            None => None,
        };

        Ok(ForwardPass {
            stance_logits,
            stance_probs,
            stance_nll_sum,
            labeled_count,
            veracity_probs,
            veracity_nll,
            veracity_states,
            pooled_argmax,
        })
    }

    /// Evaluate one thread, producing per-tweet stance predictions, the
    /// thread-level veracity prediction and max-pooling attribution.
    pub fn predict(&self, thread: &ConversationThread) -> Result<ThreadPrediction, ModelError> {
        let enc = encode_thread(thread, &self.vocab, self.config.gcn.variant)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let pass = self.forward(&mut tape, &bound, &enc, &mut Mode::Eval)?;

        let probs = tape.value(pass.stance_probs);
        let stance = (0..enc.len())
            .map(|i| {
                let row: [f64; 4] = probs.row(i).try_into().expect("4 stance classes");
                StancePrediction {
                    thread_id: enc.thread_id.clone(),
                    tweet_id: enc.tweet_ids[i].clone(),
                    depth: enc.depths[i],
                    gold: enc.stances[i],
                    pred: Stance::from_index(argmax(&row)).expect("stance index"),
                    probs: row,
                }
            })
            .collect();

        let vprobs: [f64; 3] = tape
            .value(pass.veracity_probs)
            .data()
            .try_into()
            .expect("3 veracity classes");
        let veracity = VeracityPrediction {
            thread_id: enc.thread_id.clone(),
            gold: enc.veracity,
            pred: Veracity::from_index(argmax(&vprobs)).expect("veracity index"),
            probs: vprobs,
        };

        let mut dims_won = vec![0usize; enc.len()];
        for &winner in &pass.pooled_argmax {
            dims_won[winner] += 1;
        }
        let attribution = enc
            .tweet_ids
            .iter()
            .cloned()
            .zip(dims_won)
            .collect();

        Ok(ThreadPrediction {
            thread_id: enc.thread_id,
            stance,
            veracity,
            attribution,
        })
    }
}

/// Index of the strictly largest entry; ties go to the earliest class.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over the masked rows of a stance distribution matrix,
/// or None when nothing is labeled.
pub fn stance_loss(
    tape: &mut Tape,
    stance_probs: Var,
    classes: &[usize],
    mask: &[bool],
) -> Result<Option<Var>, NnError> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok(None);
    }
    let sum = tape.masked_nll_sum(stance_probs, classes, mask)?;
    Ok(Some(tape.scale(sum, 1.0 / count as f64)))
}

/// Cross-entropy of a veracity distribution against a single gold class.
pub fn veracity_loss(tape: &mut Tape, probs: Var, gold: Veracity) -> Result<Var, NnError> {
    let mut one_hot = [0.0; 3];
    one_hot[gold.index()] = 1.0;
    tape.cross_entropy(probs, &one_hot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StancePrediction {
    pub thread_id: String,
    pub tweet_id: String,
    pub depth: usize,
    pub gold: Option<Stance>,
    pub pred: Stance,
    pub probs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeracityPrediction {
    pub thread_id: String,
    pub gold: Option<Veracity>,
    pub pred: Veracity,
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadPrediction {
    pub thread_id: String,
    pub stance: Vec<StancePrediction>,
    pub veracity: VeracityPrediction,
    /// Per tweet (chronological order), pooled dimensions won.
    pub attribution: Vec<(String, usize)>,
}
