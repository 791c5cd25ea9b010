//! Independent forward-path oracle: the whole two-component computation is
//! re-derived here with plain loops over the parameter tensors (no tape),
//! then compared against the model's own forward pass. Catches wiring
//! mistakes that per-op tests cannot see.

use converse_core::conversation::{ConversationThread, Stance, Tweet, Veracity};
use converse_core::model::{Model, ModelConfig};
use converse_core::nn::ParameterSet;
use converse_core::tensor::Tensor;
use converse_core::text::Vocab;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn vec_mat(v: &[f64], m: &Tensor) -> Vec<f64> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    assert_eq!(v.len(), rows);
    let mut out = vec![0.0; cols];
    for (k, &x) in v.iter().enumerate() {
        for j in 0..cols {
            out[j] += x * m.data()[k * cols + j];
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// One GRU step straight from the parameter set.
fn gru_step(params: &ParameterSet, prefix: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
    let gate = |w: &str, u: &str, b: &str| -> Vec<f64> {
        let wx = vec_mat(x, params.value(&format!("{prefix}.{w}")));
        let uh = vec_mat(h, params.value(&format!("{prefix}.{u}")));
        add(
            &add(&wx, &uh),
            params.value(&format!("{prefix}.{b}")).data(),
        )
    };
    let z: Vec<f64> = gate("w_update", "u_update", "b_update")
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate("w_reset", "u_reset", "b_reset")
        .into_iter()
        .map(sigmoid)
        .collect();
    let gated: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
    let wx = vec_mat(x, params.value(&format!("{prefix}.w_cand")));
    let uh = vec_mat(&gated, params.value(&format!("{prefix}.u_cand")));
    let cand: Vec<f64> = add(
        &add(&wx, &uh),
        params.value(&format!("{prefix}.b_cand")).data(),
    )
    .into_iter()
    .map(f64::tanh)
    .collect();
    (0..h.len())
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
        .collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

#[test]
fn model_forward_matches_scalar_reimplementation() {
    // Star thread: b and c reply to a; chronological order a, b, c.
    let thread = ConversationThread {
        thread_id: "t".into(),
        event: "e".into(),
        veracity: Some(Veracity::False),
        tweets: vec![
            Tweet {
                id: "a".into(),
                parent_id: None,
                ts: 0,
                text: "breaking news story".into(),
                stance: Some(Stance::Support),
            },
            Tweet {
                id: "b".into(),
                parent_id: Some("a".into()),
                ts: 10,
                text: "total nonsense".into(),
                stance: Some(Stance::Deny),
            },
            Tweet {
                id: "c".into(),
                parent_id: Some("a".into()),
                ts: 20,
                text: "any source for this".into(),
                stance: Some(Stance::Query),
            },
        ],
    };
    let vocab = Vocab::build(thread.tweets.iter().map(|t| t.text.as_str()));
    let mut config = ModelConfig::small();
    config.embed_dim = 3;
    config.bgru_hidden = 2; // content dim 4
    config.gcn.layer_sizes = vec![5, 4];
    config.veracity.hidden_size = 3;
    let model = Model::new(config, vocab, 99, None).unwrap();
    let params = &model.params;

    // Content features: BGRU over the embedded tokens of each tweet.
    let table = params.value("embedding.table");
    let embed = |text: &str| -> Vec<Vec<f64>> {
        model
            .vocab
            .encode(text)
            .unwrap()
            .into_iter()
            .map(|id| table.row(id).to_vec())
            .collect()
    };
    let content: Vec<Vec<f64>> = thread
        .tweets
        .iter()
        .map(|tweet| {
            let tokens = embed(&tweet.text);
            let mut hf = vec![0.0; 2];
            for tok in &tokens {
                hf = gru_step(params, "bgru.fwd", tok, &hf);
            }
            let mut hb = vec![0.0; 2];
            for tok in tokens.iter().rev() {
                hb = gru_step(params, "bgru.bwd", tok, &hb);
            }
            let mut c = hf;
            c.extend(hb);
            c
        })
        .collect();

    // Customized adjacency of the 3-star, derived by hand: degrees 3, 2, 2.
    let s6 = 1.0 / 6.0_f64.sqrt();
    let sym = [
        [1.0 / 3.0, s6, s6],
        [s6, 0.5, 0.0],
        [s6, 0.0, 0.5],
    ];
    let mut a_hat = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                a_hat[i][j] += sym[i][k] * sym[k][j];
            }
        }
        a_hat[i][i] += 1.0;
    }

    // Two graph-convolution layers; tanh on the first, linear last.
    let mut h: Vec<Vec<f64>> = content.clone();
    for (l, final_layer) in [(0usize, false), (1usize, true)] {
        let mixed: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut row = vec![0.0; h[0].len()];
                for k in 0..3 {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v += a_hat[i][k] * h[k][j];
                    }
                }
                row
            })
            .collect();
        let w = params.value(&format!("gcn.{l}.weight"));
        let b = params.value(&format!("gcn.{l}.bias"));
        h = mixed
            .iter()
            .map(|row| {
                let pre = add(&vec_mat(row, w), b.data());
                if final_layer {
                    pre
                } else {
                    pre.into_iter().map(f64::tanh).collect()
                }
            })
            .collect();
    }
    let logits = h;
    let stance_probs: Vec<Vec<f64>> = logits.iter().map(|r| softmax(r)).collect();

    // Veracity head: GRU over [c_i; s_i], max-pool, affine, softmax.
    let mut v = vec![0.0; 3];
    let mut states = Vec::new();
    for i in 0..3 {
        let mut input = content[i].clone();
        input.extend(logits[i].iter());
        v = gru_step(params, "veracity.gru", &input, &v);
        states.push(v.clone());
    }
    let pooled: Vec<f64> = (0..3)
        .map(|j| states.iter().map(|s| s[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let fnn = add(
        &vec_mat(&pooled, params.value("fnn.weight")),
        params.value("fnn.bias").data(),
    );
    let veracity_probs = softmax(&fnn);

    // Compare with the model's own forward pass.
    let pred = model.predict(&thread).unwrap();
    for (i, sp) in pred.stance.iter().enumerate() {
        for (got, want) in sp.probs.iter().zip(&stance_probs[i]) {
            assert!(
                (got - want).abs() < 1e-12,
                "stance prob mismatch at tweet {i}: {got} vs {want}"
            );
        }
    }
    for (got, want) in pred.veracity.probs.iter().zip(&veracity_probs) {
        assert!(
            (got - want).abs() < 1e-12,
            "veracity prob mismatch: {got} vs {want}"
        );
    }
}
