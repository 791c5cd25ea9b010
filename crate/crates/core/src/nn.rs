//! Parameter registry, recurrent cells, the Adam optimizer and the
//! finite-difference gradient checker.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NnError, Tape, Var};
use crate::tensor::Tensor;

/// One named learnable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Tensor,
    pub trainable: bool,
}

/// Named map of parameters. Iteration order is the BTreeMap name order, so
/// runs are reproducible regardless of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    entries: BTreeMap<String, Parameter>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) {
        let prev = self
            .entries
            .insert(name.to_string(), Parameter { value, trainable });
        assert!(prev.is_none(), "duplicate parameter name {name:?}");
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.entries.get(name)
    }

    pub fn value(&self, name: &str) -> &Tensor {
        &self
            .entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
            .value
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) {
        let p = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        assert_eq!(p.value.shape(), value.shape(), "shape change for {name:?}");
        p.value = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Parameter)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Parameter)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|p| p.value.all_finite())
    }

    /// Register the trainable parameters as gradient-tracking tape leaves.
    /// Frozen parameters stay outside the tape; readers take their values
    /// straight from the set.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut vars = BTreeMap::new();
        for (name, param) in &self.entries {
            if !param.trainable {
                continue;
            }
            let var = tape.leaf(param.value.clone(), true);
            vars.insert(name.clone(), var);
        }
        BoundParams { vars }
    }
}

/// Tape handles for one bound parameter set.
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("unbound parameter {name:?}"))
    }

    /// Pull gradients off the tape after a backward pass. Parameters that
    /// did not participate in the graph get zero gradients.
    pub fn gradients(&self, tape: &Tape, params: &ParameterSet) -> Gradients {
        let mut map = BTreeMap::new();
        for (name, var) in &self.vars {
            let param = params.get(name).expect("bound param exists");
            let grad = match tape.grad(*var) {
                Some(g) => g.clone(),
                None => Tensor::zeros(param.value.shape().to_vec()),
            };
            map.insert(name.clone(), grad);
        }
        Gradients { map }
    }
}

/// Gradients per trainable parameter name.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    map: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn global_norm(&self) -> f64 {
        self.map
            .values()
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Scale every gradient so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for t in self.map.values_mut() {
                for v in t.data_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// Glorot-uniform matrix initialization; biases are zeros.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
        .collect();
    Tensor::new(vec![rows, cols], data).expect("glorot shape")
}

/// Register the nine tensors of one GRU cell under `prefix`.
pub fn init_gru(
    params: &mut ParameterSet,
    prefix: &str,
    input_dim: usize,
    hidden_dim: usize,
    rng: &mut ChaCha8Rng,
) {
    for gate in ["update", "reset", "cand"] {
        params.insert(
            &format!("{prefix}.w_{gate}"),
            glorot_uniform(input_dim, hidden_dim, rng),
            true,
        );
        params.insert(
            &format!("{prefix}.u_{gate}"),
            glorot_uniform(hidden_dim, hidden_dim, rng),
            true,
        );
        params.insert(
            &format!("{prefix}.b_{gate}"),
            Tensor::zeros(vec![hidden_dim]),
            true,
        );
    }
}

/// Tape handles for one GRU cell's parameters.
#[derive(Clone, Copy)]
pub struct GruVars {
    pub w_update: Var,
    pub u_update: Var,
    pub b_update: Var,
    pub w_reset: Var,
    pub u_reset: Var,
    pub b_reset: Var,
    pub w_cand: Var,
    pub u_cand: Var,
    pub b_cand: Var,
}

impl GruVars {
    pub fn bind(bound: &BoundParams, prefix: &str) -> GruVars {
        GruVars {
            w_update: bound.var(&format!("{prefix}.w_update")),
            u_update: bound.var(&format!("{prefix}.u_update")),
            b_update: bound.var(&format!("{prefix}.b_update")),
            w_reset: bound.var(&format!("{prefix}.w_reset")),
            u_reset: bound.var(&format!("{prefix}.u_reset")),
            b_reset: bound.var(&format!("{prefix}.b_reset")),
            w_cand: bound.var(&format!("{prefix}.w_cand")),
            u_cand: bound.var(&format!("{prefix}.u_cand")),
            b_cand: bound.var(&format!("{prefix}.b_cand")),
        }
    }
}

/// One GRU step:
/// z = sigma(W_z x + U_z h + b_z), r = sigma(W_r x + U_r h + b_r),
/// cand = tanh(W_h x + U_h (r . h) + b_h), h' = (1 - z) . h + z . cand.
pub fn gru_cell(tape: &mut Tape, x: Var, h_prev: Var, g: &GruVars) -> Result<Var, NnError> {
    let zx = tape.vecmat(x, g.w_update)?;
    let zh = tape.vecmat(h_prev, g.u_update)?;
    let z_sum = tape.add(zx, zh)?;
    let z_pre = tape.add(z_sum, g.b_update)?;
    let z = tape.sigmoid(z_pre);

    let rx = tape.vecmat(x, g.w_reset)?;
    let rh = tape.vecmat(h_prev, g.u_reset)?;
    let r_sum = tape.add(rx, rh)?;
    let r_pre = tape.add(r_sum, g.b_reset)?;
    let r = tape.sigmoid(r_pre);

    let gated = tape.mul(r, h_prev)?;
    let cx = tape.vecmat(x, g.w_cand)?;
    let ch = tape.vecmat(gated, g.u_cand)?;
    let c_sum = tape.add(cx, ch)?;
    let c_pre = tape.add(c_sum, g.b_cand)?;
    let cand = tape.tanh(c_pre);

    let keep = tape.one_minus(z);
    let kept = tape.mul(keep, h_prev)?;
    let new = tape.mul(z, cand)?;
    tape.add(kept, new)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Run a GRU over a sequence from a zero initial state, returning the hidden
/// state after each step in input order.
pub fn gru_sequence(
    tape: &mut Tape,
    inputs: &[Var],
    direction: Direction,
    g: &GruVars,
    hidden_dim: usize,
) -> Result<Vec<Var>, NnError> {
    if inputs.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let mut h = tape.constant(Tensor::zeros(vec![hidden_dim]));
    let mut states = vec![h; inputs.len()];
    match direction {
        Direction::Forward => {
            for (i, x) in inputs.iter().enumerate() {
                h = gru_cell(tape, *x, h, g)?;
                states[i] = h;
            }
        }
        Direction::Backward => {
            for (i, x) in inputs.iter().enumerate().rev() {
                h = gru_cell(tape, *x, h, g)?;
                states[i] = h;
            }
        }
    }
    Ok(states)
}

/// Bidirectional encoding: concatenation of the forward pass's final state
/// and the backward pass's final state (its state at the first input).
pub fn bigru_final(
    tape: &mut Tape,
    inputs: &[Var],
    fwd: &GruVars,
    bwd: &GruVars,
    hidden_dim: usize,
) -> Result<Var, NnError> {
    let f = gru_sequence(tape, inputs, Direction::Forward, fwd, hidden_dim)?;
    let b = gru_sequence(tape, inputs, Direction::Backward, bwd, hidden_dim)?;
    tape.concat(&[*f.last().expect("nonempty"), b[0]])
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: BTreeMap<String, Tensor>,
    second_moment: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }
}

/// One Adam update over every trainable parameter that has a gradient.
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<(), NnError> {
    for (name, grad) in grads.iter() {
        if !grad.all_finite() {
            return Err(NnError::NonFiniteGradient(name.clone()));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (name, param) in params.iter_mut() {
        if !param.trainable {
            continue;
        }
        let grad = match grads.get(name) {
            Some(g) => g,
            None => continue,
        };
        debug_assert_eq!(grad.shape(), param.value.shape());
        let m = state
            .first_moment
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.value.shape().to_vec()));
        let v = state
            .second_moment
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(param.value.shape().to_vec()));
        let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);
        let pdata = param.value.data_mut();
        for i in 0..pdata.len() {
            let g = grad.data()[i];
            let mi = b1 * m.data()[i] + (1.0 - b1) * g;
            let vi = b2 * v.data()[i] + (1.0 - b2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            pdata[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |acc, e| acc.max(e.max_rel_err))
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err() <= tolerance
    }
}

/// Below this magnitude a gradient coordinate is compared absolutely: the
/// relative form `|a - n| / max(|a|, |n|, 1e-8)` is noise-limited there.
/// Central differences on a loss of size f carry rounding noise of roughly
/// `eps_machine * |f| / epsilon` (about 2e-9 for f near 1 and epsilon 1e-6),
/// so coordinates smaller than noise / tolerance cannot meet a relative
/// bound no matter how epsilon is chosen.
const ZERO_GRADIENT_GUARD: f64 = 1e-4;

/// Compare `analytic` gradients with central finite differences of
/// `loss_value`, which must be a deterministic function of the parameters
/// (run dropout in eval mode). Never panics on disagreement; the report
/// carries the worst error per parameter: relative where the gradient is
/// meaningfully sized, absolute where both sides are near zero.
pub fn gradient_check<F>(
    params: &ParameterSet,
    analytic: &Gradients,
    epsilon: f64,
    mut loss_value: F,
) -> GradCheckReport
where
    F: FnMut(&ParameterSet) -> f64,
{
    let mut entries = Vec::new();
    for (name, param) in params.iter() {
        if !param.trainable {
            continue;
        }
        let grad = match analytic.get(name) {
            Some(g) => g.clone(),
            None => Tensor::zeros(param.value.shape().to_vec()),
        };
        let mut max_rel = 0.0f64;
        for i in 0..param.value.len() {
            let mut perturbed = params.clone();
            {
                let p = perturbed.entries.get_mut(name).unwrap();
                p.value.data_mut()[i] += epsilon;
            }
            let up = loss_value(&perturbed);
            {
                let p = perturbed.entries.get_mut(name).unwrap();
                p.value.data_mut()[i] -= 2.0 * epsilon;
            }
            let down = loss_value(&perturbed);
            let numeric = (up - down) / (2.0 * epsilon);
            let a = grad.data()[i];
            let magnitude = a.abs().max(numeric.abs());
            let err = if magnitude < ZERO_GRADIENT_GUARD {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / magnitude.max(1e-8)
            };
            max_rel = max_rel.max(err);
        }
        entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_err: max_rel,
        });
    }
    GradCheckReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn zero_gru(params: &mut ParameterSet, prefix: &str, input: usize, hidden: usize) {
        for gate in ["update", "reset", "cand"] {
            params.insert(
                &format!("{prefix}.w_{gate}"),
                Tensor::zeros(vec![input, hidden]),
                true,
            );
            params.insert(
                &format!("{prefix}.u_{gate}"),
                Tensor::zeros(vec![hidden, hidden]),
                true,
            );
            params.insert(
                &format!("{prefix}.b_{gate}"),
                Tensor::zeros(vec![hidden]),
                true,
            );
        }
    }

    #[test]
    fn gru_zero_weights_halve_previous_state() {
        let mut params = ParameterSet::new();
        zero_gru(&mut params, "g", 2, 2);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let x = tape.constant(Tensor::vector(vec![1.0, -1.0]));
        let h = tape.constant(Tensor::vector(vec![0.8, -0.4]));
        let out = gru_cell(&mut tape, x, h, &g).unwrap();
        assert_eq!(tape.value(out).data(), &[0.4, -0.2]);
    }

    #[test]
    fn gru_zero_everything_stays_zero() {
        let mut params = ParameterSet::new();
        zero_gru(&mut params, "g", 2, 3);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let x = tape.constant(Tensor::zeros(vec![2]));
        let h = tape.constant(Tensor::zeros(vec![3]));
        let out = gru_cell(&mut tape, x, h, &g).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        // 2-in 1-out cell evaluated by hand with scalar arithmetic.
        let mut params = ParameterSet::new();
        params.insert("g.w_update", Tensor::matrix(&[vec![0.1], vec![0.2]]), true);
        params.insert("g.u_update", Tensor::matrix(&[vec![0.3]]), true);
        params.insert("g.b_update", Tensor::vector(vec![0.05]), true);
        params.insert("g.w_reset", Tensor::matrix(&[vec![-0.2], vec![0.4]]), true);
        params.insert("g.u_reset", Tensor::matrix(&[vec![0.1]]), true);
        params.insert("g.b_reset", Tensor::vector(vec![-0.1]), true);
        params.insert("g.w_cand", Tensor::matrix(&[vec![0.5], vec![-0.3]]), true);
        params.insert("g.u_cand", Tensor::matrix(&[vec![0.2]]), true);
        params.insert("g.b_cand", Tensor::vector(vec![0.0]), true);

        let (x1, x2, h0) = (1.0f64, 0.0f64, 0.6f64);
        let sigma = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z = sigma(0.1 * x1 + 0.2 * x2 + 0.3 * h0 + 0.05);
        let r = sigma(-0.2 * x1 + 0.4 * x2 + 0.1 * h0 - 0.1);
        let cand = (0.5 * x1 - 0.3 * x2 + 0.2 * (r * h0)).tanh();
        let expected = (1.0 - z) * h0 + z * cand;

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let x = tape.constant(Tensor::vector(vec![x1, x2]));
        let h = tape.constant(Tensor::vector(vec![h0]));
        let out = gru_cell(&mut tape, x, h, &g).unwrap();
        assert!((tape.value(out).item() - expected).abs() < 1e-14);
    }

    #[test]
    fn gru_sequence_matches_stepwise_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParameterSet::new();
        init_gru(&mut params, "g", 3, 2, &mut rng);
        let inputs: Vec<Tensor> = (0..3)
            .map(|_| Tensor::vector((0..3).map(|_| rng.random::<f64>() - 0.5).collect()))
            .collect();

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let states = gru_sequence(&mut tape, &vars, Direction::Forward, &g, 2).unwrap();

        // Oracle: apply the cell step by step on a second tape.
        let mut tape2 = Tape::new();
        let bound2 = params.bind(&mut tape2);
        let g2 = GruVars::bind(&bound2, "g");
        let mut h = tape2.constant(Tensor::zeros(vec![2]));
        for (i, t) in inputs.iter().enumerate() {
            let x = tape2.constant(t.clone());
            h = gru_cell(&mut tape2, x, h, &g2).unwrap();
            let got = tape.value(states[i]).data();
            let want = tape2.value(h).data();
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_step_sequence_equals_cell_from_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ParameterSet::new();
        init_gru(&mut params, "g", 2, 2, &mut rng);
        let x = Tensor::vector(vec![0.3, -0.7]);

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let xv = tape.constant(x.clone());
        let seq = gru_sequence(&mut tape, &[xv], Direction::Forward, &g, 2).unwrap();

        let mut tape2 = Tape::new();
        let bound2 = params.bind(&mut tape2);
        let g2 = GruVars::bind(&bound2, "g");
        let xv2 = tape2.constant(x);
        let h0 = tape2.constant(Tensor::zeros(vec![2]));
        let cell = gru_cell(&mut tape2, xv2, h0, &g2).unwrap();
        assert_eq!(tape.value(seq[0]).data(), tape2.value(cell).data());
    }

    #[test]
    fn bigru_palindrome_has_equal_halves_under_shared_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ParameterSet::new();
        init_gru(&mut params, "g", 2, 3, &mut rng);
        let a = Tensor::vector(vec![0.2, -0.1]);
        let b = Tensor::vector(vec![-0.4, 0.9]);

        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let g = GruVars::bind(&bound, "g");
        let seq: Vec<Var> = [a.clone(), b.clone(), a.clone()]
            .iter()
            .map(|t| tape.constant(t.clone()))
            .collect();
        // Same weights for both directions: palindromic input makes the
        // forward and backward finals identical.
        let enc = bigru_final(&mut tape, &seq, &g, &g, 3).unwrap();
        let v = tape.value(enc);
        assert_eq!(v.len(), 6);
        for i in 0..3 {
            assert!((v.data()[i] - v.data()[3 + i]).abs() < 1e-14);
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop_from_fresh_state() {
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![1.0, -2.0]), true);
        let before = params.value("w").clone();
        let mut state = AdamState::new(0.01);
        let mut grads = Gradients::default();
        grads.map.insert("w".into(), Tensor::zeros(vec![2]));
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.value("w"), &before);
    }

    #[test]
    fn adam_descends_on_quadratic() {
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![1.0]), true);
        let mut state = AdamState::new(0.001);
        let mut grads = Gradients::default();
        grads.map.insert("w".into(), Tensor::vector(vec![2.0])); // d(w^2)/dw at w=1
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert!(params.value("w").item() < 1.0);
    }

    #[test]
    fn adam_three_steps_match_handrolled_recurrence() {
        // Oracle: explicit Adam recurrence on a scalar quadratic f(w) = w^2.
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let mut w_oracle = 1.5f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * w_oracle;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            w_oracle -= lr * m_hat / (v_hat.sqrt() + eps);
            expected.push(w_oracle);
        }

        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![1.5]), true);
        let mut state = AdamState::new(lr);
        for want in expected {
            let g = 2.0 * params.value("w").item();
            let mut grads = Gradients::default();
            grads.map.insert("w".into(), Tensor::vector(vec![g]));
            adam_step(&mut params, &grads, &mut state).unwrap();
            assert!((params.value("w").item() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![1.0]), true);
        let mut state = AdamState::new(0.001);
        let mut grads = Gradients::default();
        grads.map.insert("w".into(), Tensor::vector(vec![f64::NAN]));
        assert!(matches!(
            adam_step(&mut params, &grads, &mut state),
            Err(NnError::NonFiniteGradient(_))
        ));
    }

    #[test]
    fn frozen_parameters_are_never_updated() {
        let mut params = ParameterSet::new();
        params.insert("frozen", Tensor::vector(vec![3.0]), false);
        params.insert("live", Tensor::vector(vec![3.0]), true);
        let mut state = AdamState::new(0.5);
        let mut grads = Gradients::default();
        grads.map.insert("live".into(), Tensor::vector(vec![1.0]));
        grads.map.insert("frozen".into(), Tensor::vector(vec![1.0]));
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.value("frozen").item(), 3.0);
        assert!(params.value("live").item() < 3.0);
    }

    #[test]
    fn gradient_check_linear_loss_is_exact() {
        let mut params = ParameterSet::new();
        params.insert("w", Tensor::vector(vec![0.3, -1.2, 4.0]), true);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let w = bound.var("w");
        let loss = tape.sum_all(w);
        tape.backward(loss).unwrap();
        let analytic = bound.gradients(&tape, &params);
        let report = gradient_check(&params, &analytic, 1e-6, |p| {
            p.value("w").data().iter().sum()
        });
        assert!(report.max_rel_err() < 1e-10, "{}", report.max_rel_err());
    }

    #[test]
    fn clip_global_norm_scales_down_large_gradients() {
        let mut grads = Gradients::default();
        grads.map.insert("a".into(), Tensor::vector(vec![3.0, 4.0]));
        grads.clip_global_norm(1.0);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
        let mut small = Gradients::default();
        small.map.insert("a".into(), Tensor::vector(vec![0.3]));
        small.clip_global_norm(1.0);
        assert_eq!(small.get("a").unwrap().item(), 0.3);
    }
}
