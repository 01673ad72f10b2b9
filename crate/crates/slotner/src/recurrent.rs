//! Recurrent cells and runners: Elman RNN, GRU and LSTM steps, a stacked
//! bidirectional runner over them, and the unidirectional context encoder
//! that folds the previous system utterance into a fixed-size state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::{concat, stack_rows, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Gru,
    Lstm,
}

impl CellKind {
    pub fn parse(s: &str) -> Result<CellKind> {
        match s.to_lowercase().as_str() {
            "rnn" => Ok(CellKind::Rnn),
            "gru" => Ok(CellKind::Gru),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(Error::Config(format!(
                "unknown cell kind {other:?} (expected rnn, gru or lstm)"
            ))),
        }
    }

    /// Gate blocks per cell kind, in parameter order.
    pub fn block_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Rnn => &["cell"],
            CellKind::Gru => &["update", "reset", "candidate"],
            CellKind::Lstm => &["input", "forget", "cell", "output"],
        }
    }
}

/// One gate: an affine map from the concatenated `[x; h]` to the hidden size.
#[derive(Clone, Debug)]
pub struct GateBlock {
    pub weight: Tensor, // [(input_dim + hidden_dim), hidden_dim]
    pub bias: Tensor,   // [hidden_dim]
}

/// Weights of one recurrent cell.
#[derive(Clone, Debug)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub blocks: Vec<GateBlock>,
}

impl CellParams {
    /// Uniform(+-sqrt(6/(fan_in+fan_out))) weights; biases zero except the
    /// LSTM forget gate, which starts at 1.0.
    pub fn new(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let fan_in = input_dim + hidden_dim;
        let bound = (6.0 / (fan_in + hidden_dim) as f64).sqrt();
        let blocks = kind
            .block_names()
            .iter()
            .map(|&name| {
                let bias_init = if kind == CellKind::Lstm && name == "forget" {
                    1.0
                } else {
                    0.0
                };
                GateBlock {
                    weight: Tensor::uniform_param(&[fan_in, hidden_dim], -bound, bound, rng),
                    bias: Tensor::param(vec![bias_init; hidden_dim], &[hidden_dim])
                        .expect("bias shape"),
                }
            })
            .collect();
        CellParams {
            kind,
            input_dim,
            hidden_dim,
            blocks,
        }
    }

    /// All-zero parameters; handy for analytic tests.
    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        let fan_in = input_dim + hidden_dim;
        let blocks = kind
            .block_names()
            .iter()
            .map(|_| GateBlock {
                weight: Tensor::param(vec![0.0; fan_in * hidden_dim], &[fan_in, hidden_dim])
                    .expect("weight shape"),
                bias: Tensor::param(vec![0.0; hidden_dim], &[hidden_dim]).expect("bias shape"),
            })
            .collect();
        CellParams {
            kind,
            input_dim,
            hidden_dim,
            blocks,
        }
    }
}

/// Hidden state; the cell slot is populated for LSTM only.
#[derive(Clone, Debug)]
pub struct RecurrentState {
    pub h: Tensor, // [hidden_dim]
    pub c: Option<Tensor>,
}

impl RecurrentState {
    pub fn zeros(kind: CellKind, hidden_dim: usize) -> RecurrentState {
        RecurrentState {
            h: Tensor::zeros(&[hidden_dim]),
            c: match kind {
                CellKind::Lstm => Some(Tensor::zeros(&[hidden_dim])),
                _ => None,
            },
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.h.numel()
    }
}

fn gate_pre(block: &GateBlock, xh: &Tensor) -> Result<Tensor> {
    xh.vecmat(&block.weight)?.add(&block.bias)
}

/// One step of the published update rule for the cell kind.
pub fn cell_step(params: &CellParams, x: &Tensor, state: &RecurrentState) -> Result<RecurrentState> {
    if x.shape() != vec![params.input_dim] {
        return Err(Error::Dimension(format!(
            "cell_step: input shape {:?}, expected [{}]",
            x.shape(),
            params.input_dim
        )));
    }
    if state.hidden_dim() != params.hidden_dim {
        return Err(Error::Dimension(format!(
            "cell_step: state width {} does not match hidden_dim {}",
            state.hidden_dim(),
            params.hidden_dim
        )));
    }
    match params.kind {
        CellKind::Rnn => {
            let xh = concat(&[x.clone(), state.h.clone()])?;
            let h = gate_pre(&params.blocks[0], &xh)?.tanh();
            Ok(RecurrentState { h, c: None })
        }
        CellKind::Gru => {
            let xh = concat(&[x.clone(), state.h.clone()])?;
            let update = gate_pre(&params.blocks[0], &xh)?.sigmoid();
            let reset = gate_pre(&params.blocks[1], &xh)?.sigmoid();
            let xrh = concat(&[x.clone(), reset.mul(&state.h)?])?;
            let candidate = gate_pre(&params.blocks[2], &xrh)?.tanh();
            // h' = z*h + (1-z)*candidate
            let ones = Tensor::new(vec![1.0; params.hidden_dim], &[params.hidden_dim])?;
            let keep = update.mul(&state.h)?;
            let renew = ones.sub(&update)?.mul(&candidate)?;
            Ok(RecurrentState {
                h: keep.add(&renew)?,
                c: None,
            })
        }
        CellKind::Lstm => {
            let c_prev = state.c.clone().ok_or_else(|| {
                Error::Dimension("cell_step: LSTM state is missing its cell slot".into())
            })?;
            let xh = concat(&[x.clone(), state.h.clone()])?;
            let input = gate_pre(&params.blocks[0], &xh)?.sigmoid();
            let forget = gate_pre(&params.blocks[1], &xh)?.sigmoid();
            let cell = gate_pre(&params.blocks[2], &xh)?.tanh();
            let output = gate_pre(&params.blocks[3], &xh)?.sigmoid();
            let c = forget.mul(&c_prev)?.add(&input.mul(&cell)?)?;
            let h = output.mul(&c.tanh())?;
            Ok(RecurrentState { h, c: Some(c) })
        }
    }
}

/// Where an externally provided initial forward state is injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextInjection {
    /// Layer 1's forward direction only; everything else starts from zeros.
    FirstLayer,
    /// Every layer's forward direction.
    AllLayers,
}

/// Shape of the stacked bidirectional tagger network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackedBiConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub cell: CellKind,
}

impl Default for StackedBiConfig {
    fn default() -> Self {
        StackedBiConfig {
            layers: 2,
            hidden_dim: 64,
            cell: CellKind::Lstm,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BiLayer {
    pub forward: CellParams,
    pub backward: CellParams,
}

/// Stacked bidirectional runner. Layer 1 consumes the input sequence; every
/// deeper layer consumes the previous layer's concatenated outputs.
#[derive(Clone, Debug)]
pub struct StackedBiRnn {
    pub config: StackedBiConfig,
    pub layers: Vec<BiLayer>,
}

impl StackedBiRnn {
    pub fn new(config: StackedBiConfig, input_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if config.layers == 0 || config.hidden_dim == 0 {
            return Err(Error::Config(
                "stacked runner needs at least 1 layer and a positive hidden size".into(),
            ));
        }
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let in_dim = if l == 0 { input_dim } else { 2 * config.hidden_dim };
            layers.push(BiLayer {
                forward: CellParams::new(config.cell, in_dim, config.hidden_dim, rng),
                backward: CellParams::new(config.cell, in_dim, config.hidden_dim, rng),
            });
        }
        Ok(StackedBiRnn { config, layers })
    }

    /// Run over `[T, D]` inputs, producing `[T, 2*hidden_dim]` top-layer
    /// outputs. `init_forward` seeds the forward direction per `injection`;
    /// all backward passes start from zeros. A `None` init is identical to a
    /// zero state.
    pub fn run(
        &self,
        inputs: &Tensor,
        init_forward: Option<&RecurrentState>,
        injection: ContextInjection,
    ) -> Result<Tensor> {
        let shape = inputs.shape();
        if shape.len() != 2 {
            return Err(Error::Dimension(format!(
                "run_bidirectional: inputs must be [T,D], got {shape:?}"
            )));
        }
        let t_len = shape[0];
        if t_len == 0 {
            return Err(Error::EmptyInput("run_bidirectional: empty sequence".into()));
        }
        if let Some(init) = init_forward {
            if init.hidden_dim() != self.config.hidden_dim {
                return Err(Error::Dimension(format!(
                    "run_bidirectional: init state width {} does not match hidden_dim {}",
                    init.hidden_dim(),
                    self.config.hidden_dim
                )));
            }
        }

        let mut current = inputs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let inject_here = match injection {
                ContextInjection::FirstLayer => l == 0,
                ContextInjection::AllLayers => true,
            };
            let mut state = match (inject_here, init_forward) {
                (true, Some(init)) => init.clone(),
                _ => RecurrentState::zeros(self.config.cell, self.config.hidden_dim),
            };
            let mut forward_h = Vec::with_capacity(t_len);
            for t in 0..t_len {
                state = cell_step(&layer.forward, &current.row(t)?, &state)?;
                forward_h.push(state.h.clone());
            }
            let mut state = RecurrentState::zeros(self.config.cell, self.config.hidden_dim);
            let mut backward_h = vec![Tensor::zeros(&[0]); t_len];
            for t in (0..t_len).rev() {
                state = cell_step(&layer.backward, &current.row(t)?, &state)?;
                backward_h[t] = state.h.clone();
            }
            let rows: Result<Vec<Tensor>> = (0..t_len)
                .map(|t| concat(&[forward_h[t].clone(), backward_h[t].clone()]))
                .collect();
            current = stack_rows(&rows?)?;
        }
        Ok(current)
    }
}

/// Fold an embedded system utterance `[M, D]` into a fixed-size state from a
/// zero start. An empty utterance (M = 0) returns the zero state, which is
/// interchangeable with running without any context at all.
pub fn encode_context(encoder: &CellParams, embedded: &Tensor) -> Result<RecurrentState> {
    let shape = embedded.shape();
    if shape.len() != 2 {
        return Err(Error::Dimension(format!(
            "encode_context: inputs must be [M,D], got {shape:?}"
        )));
    }
    if shape[1] != encoder.input_dim && shape[0] > 0 {
        return Err(Error::Dimension(format!(
            "encode_context: embedding width {} does not match encoder input {}",
            shape[1], encoder.input_dim
        )));
    }
    let mut state = RecurrentState::zeros(encoder.kind, encoder.hidden_dim);
    for t in 0..shape[0] {
        state = cell_step(encoder, &embedded.row(t)?, &state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::numeric::check_gradients;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_lstm_step_gives_zero_hidden() {
        let params = CellParams::zeros(CellKind::Lstm, 3, 4);
        let x = Tensor::new(vec![0.3, -0.7, 1.1], &[3]).unwrap();
        let state = RecurrentState::zeros(CellKind::Lstm, 4);
        let next = cell_step(&params, &x, &state).unwrap();
        assert_eq!(next.h.to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn zero_weight_rnn_step_is_tanh_of_bias() {
        let params = CellParams::zeros(CellKind::Rnn, 2, 3);
        params.blocks[0].bias.set_data(&[0.5, -0.5, 2.0]);
        let x = Tensor::new(vec![4.0, -4.0], &[2]).unwrap();
        let state = RecurrentState::zeros(CellKind::Rnn, 3);
        let next = cell_step(&params, &x, &state).unwrap();
        let expected: Vec<f64> = [0.5f64, -0.5, 2.0].iter().map(|b| b.tanh()).collect();
        assert_eq!(next.h.to_vec(), expected);
    }

    #[test]
    fn hidden_state_stays_in_tanh_range() {
        for kind in [CellKind::Rnn, CellKind::Gru, CellKind::Lstm] {
            let params = CellParams::new(kind, 3, 5, &mut rng(2));
            let mut state = RecurrentState::zeros(kind, 5);
            for step in 0..20 {
                let x = Tensor::new(vec![step as f64, -1.0, 2.5], &[3]).unwrap();
                state = cell_step(&params, &x, &state).unwrap();
                assert!(state.h.to_vec().iter().all(|v| v.abs() < 1.0));
            }
        }
    }

    #[test]
    fn cell_step_gradients_match_finite_differences() {
        for kind in [CellKind::Rnn, CellKind::Gru, CellKind::Lstm] {
            let params = CellParams::new(kind, 3, 3, &mut rng(5));
            let x = Tensor::new(vec![0.2, -0.4, 0.9], &[3]).unwrap();
            let named: Vec<(String, Tensor)> = params
                .blocks
                .iter()
                .zip(kind.block_names())
                .flat_map(|(b, name)| {
                    [
                        (format!("{name}.weight"), b.weight.clone()),
                        (format!("{name}.bias"), b.bias.clone()),
                    ]
                })
                .collect();
            let failures = check_gradients(
                &named,
                || {
                    let state = RecurrentState::zeros(kind, 3);
                    let s1 = cell_step(&params, &x, &state).unwrap();
                    let s2 = cell_step(&params, &x, &s1).unwrap();
                    s2.h.sum()
                },
                1e-5,
                1e-4,
                1e-6,
            );
            assert!(failures.is_empty(), "{kind:?}: {failures:?}");
        }
    }

    #[test]
    fn forget_gate_bias_starts_at_one() {
        let params = CellParams::new(CellKind::Lstm, 2, 3, &mut rng(1));
        assert_eq!(params.blocks[1].bias.to_vec(), vec![1.0; 3]);
        assert_eq!(params.blocks[0].bias.to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn single_step_output_shape_with_defaults() {
        let net = StackedBiRnn::new(StackedBiConfig::default(), 10, &mut rng(3)).unwrap();
        let inputs = Tensor::new(vec![0.1; 10], &[1, 10]).unwrap();
        let out = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
        assert_eq!(out.shape(), vec![1, 128]);
    }

    #[test]
    fn direction_symmetry_on_palindromes() {
        // Shared weights in both directions + palindromic input: the forward
        // hidden sequence reversed must equal the backward hidden sequence.
        let mut net = StackedBiRnn::new(
            StackedBiConfig {
                layers: 1,
                hidden_dim: 4,
                cell: CellKind::Lstm,
            },
            3,
            &mut rng(8),
        )
        .unwrap();
        net.layers[0].backward = net.layers[0].forward.clone();
        let row: Vec<f64> = vec![0.3, -0.2, 0.8];
        let mid: Vec<f64> = vec![-0.5, 0.1, 0.4];
        let mut data = Vec::new();
        data.extend(&row);
        data.extend(&mid);
        data.extend(&row);
        let inputs = Tensor::new(data, &[3, 3]).unwrap();
        let out = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
        let d = out.to_vec();
        let h = 4;
        for t in 0..3 {
            let fwd = &d[t * 2 * h..t * 2 * h + h];
            let bwd = &d[(2 - t) * 2 * h + h..(2 - t) * 2 * h + 2 * h];
            for (a, b) in fwd.iter().zip(bwd) {
                assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_init_state_equals_no_init() {
        let net = StackedBiRnn::new(
            StackedBiConfig {
                layers: 2,
                hidden_dim: 4,
                cell: CellKind::Lstm,
            },
            3,
            &mut rng(21),
        )
        .unwrap();
        let inputs = Tensor::new(vec![0.2; 6], &[2, 3]).unwrap();
        let without = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
        let zeros = RecurrentState::zeros(CellKind::Lstm, 4);
        let with = net
            .run(&inputs, Some(&zeros), ContextInjection::FirstLayer)
            .unwrap();
        assert_eq!(without.to_vec(), with.to_vec());
    }

    #[test]
    fn init_state_width_is_checked() {
        let net = StackedBiRnn::new(StackedBiConfig::default(), 3, &mut rng(4)).unwrap();
        let inputs = Tensor::new(vec![0.0; 3], &[1, 3]).unwrap();
        let bad = RecurrentState::zeros(CellKind::Lstm, 5);
        assert!(net
            .run(&inputs, Some(&bad), ContextInjection::FirstLayer)
            .is_err());
    }

    #[test]
    fn output_length_matches_input_length() {
        let net = StackedBiRnn::new(
            StackedBiConfig {
                layers: 2,
                hidden_dim: 3,
                cell: CellKind::Gru,
            },
            2,
            &mut rng(6),
        )
        .unwrap();
        for t in 1..=5 {
            let inputs = Tensor::new(vec![0.1; 2 * t], &[t, 2]).unwrap();
            let out = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
            assert_eq!(out.shape(), vec![t, 6]);
        }
    }

    #[test]
    fn unrolled_lstm_gradients_through_time() {
        let net = StackedBiRnn::new(
            StackedBiConfig {
                layers: 1,
                hidden_dim: 3,
                cell: CellKind::Lstm,
            },
            2,
            &mut rng(14),
        )
        .unwrap();
        let inputs = Tensor::new(
            vec![0.5, -0.3, 0.2, 0.8, -0.9, 0.1, 0.4, 0.6, -0.2, 0.7],
            &[5, 2],
        )
        .unwrap();
        let named: Vec<(String, Tensor)> = net.layers[0]
            .forward
            .blocks
            .iter()
            .chain(net.layers[0].backward.blocks.iter())
            .enumerate()
            .flat_map(|(i, b)| {
                [
                    (format!("block{i}.weight"), b.weight.clone()),
                    (format!("block{i}.bias"), b.bias.clone()),
                ]
            })
            .collect();
        let failures = check_gradients(
            &named,
            || {
                net.run(&inputs, None, ContextInjection::FirstLayer)
                    .unwrap()
                    .sum()
            },
            1e-5,
            1e-4,
            1e-6,
        );
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn empty_context_returns_the_zero_state() {
        let encoder = CellParams::new(CellKind::Lstm, 4, 3, &mut rng(10));
        let empty = Tensor::new(vec![], &[0, 4]).unwrap();
        let state = encode_context(&encoder, &empty).unwrap();
        assert_eq!(state.h.to_vec(), vec![0.0; 3]);
        assert_eq!(state.c.unwrap().to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn single_step_context_equals_one_cell_step() {
        let encoder = CellParams::new(CellKind::Lstm, 4, 3, &mut rng(10));
        let x = Tensor::new(vec![0.1, -0.2, 0.3, 0.4], &[1, 4]).unwrap();
        let folded = encode_context(&encoder, &x).unwrap();
        let direct = cell_step(
            &encoder,
            &x.row(0).unwrap(),
            &RecurrentState::zeros(CellKind::Lstm, 3),
        )
        .unwrap();
        assert_eq!(folded.h.to_vec(), direct.h.to_vec());
    }

    #[test]
    fn different_utterances_give_different_states() {
        let encoder = CellParams::new(CellKind::Lstm, 2, 3, &mut rng(10));
        let a = Tensor::new(vec![0.1, 0.2, 0.3, 0.4], &[2, 2]).unwrap();
        let b = Tensor::new(vec![-0.5, 0.9, 0.0, 0.2], &[2, 2]).unwrap();
        let sa = encode_context(&encoder, &a).unwrap();
        let sb = encode_context(&encoder, &b).unwrap();
        assert_ne!(sa.h.to_vec(), sb.h.to_vec());
    }

    #[test]
    fn runs_are_deterministic() {
        let net = StackedBiRnn::new(StackedBiConfig::default(), 4, &mut rng(31)).unwrap();
        let inputs = Tensor::new(vec![0.25; 12], &[3, 4]).unwrap();
        let a = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
        let b = net.run(&inputs, None, ContextInjection::FirstLayer).unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
    }
}
