use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::sigmoid;
use super::mlp::{MlpCache, MlpConfig, MlpHead, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use super::{Head, HeadError, OutputKind, ParamVisitor};

pub const DEFAULT_RNN_HIDDEN: usize = 256;
pub const RNN_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrentConfig {
    pub cell: CellKind,
    pub input: usize,
    /// Hidden size per direction.
    pub hidden: usize,
    pub mlp_hidden: [usize; 3],
    pub dropout: f64,
}

impl RecurrentConfig {
    pub fn new(cell: CellKind, input: usize) -> RecurrentConfig {
        RecurrentConfig {
            cell,
            input,
            hidden: DEFAULT_RNN_HIDDEN,
            mlp_hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn with_hidden(mut self, hidden: usize, mlp_hidden: [usize; 3]) -> Self {
        self.hidden = hidden;
        self.mlp_hidden = mlp_hidden;
        self
    }
}

/// One direction of one recurrent layer. Gate blocks are stacked row-wise:
/// LSTM `[i, f, g, o]`, GRU `[r, z, n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    cell: CellKind,
    hidden: usize,
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub bx: Array1<f64>,
    pub bh: Array1<f64>,
    gwx: Array2<f64>,
    gwh: Array2<f64>,
    gbx: Array1<f64>,
    gbh: Array1<f64>,
}

struct StepCache {
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    /// Post-activation gates.
    gates: Array1<f64>,
    /// LSTM: new cell state. GRU: hidden-side candidate term `W_hn h + b_hn`.
    aux: Array1<f64>,
}

impl Direction {
    fn new(cell: CellKind, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Direction {
        let g = cell.gates() * hidden;
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |r, c| Array2::from_shape_fn((r, c), |_| rng.gen_range(-bound..bound));
        let wx = uniform(g, input);
        let wh = uniform(g, hidden);
        Direction::from_weights(cell, wx, wh, Array1::zeros(g), Array1::zeros(g))
    }

    pub fn from_weights(
        cell: CellKind,
        wx: Array2<f64>,
        wh: Array2<f64>,
        bx: Array1<f64>,
        bh: Array1<f64>,
    ) -> Direction {
        let hidden = wh.ncols();
        Direction {
            cell,
            hidden,
            gwx: Array2::zeros(wx.raw_dim()),
            gwh: Array2::zeros(wh.raw_dim()),
            gbx: Array1::zeros(bx.raw_dim()),
            gbh: Array1::zeros(bh.raw_dim()),
            wx,
            wh,
            bx,
            bh,
        }
    }

    fn step(
        &self,
        x: ArrayView1<f64>,
        h: &Array1<f64>,
        c: &Array1<f64>,
    ) -> (Array1<f64>, StepCache) {
        let hs = self.hidden;
        let a = self.wx.dot(&x) + &self.bx;
        let b = self.wh.dot(h) + &self.bh;
        match self.cell {
            CellKind::Lstm => {
                let z = a + b;
                let mut gates = Array1::zeros(4 * hs);
                for j in 0..hs {
                    gates[j] = sigmoid(z[j]);
                    gates[hs + j] = sigmoid(z[hs + j]);
                    gates[2 * hs + j] = z[2 * hs + j].tanh();
                    gates[3 * hs + j] = sigmoid(z[3 * hs + j]);
                }
                let c_new = Array1::from_shape_fn(hs, |j| {
                    gates[hs + j] * c[j] + gates[j] * gates[2 * hs + j]
                });
                let h_new = Array1::from_shape_fn(hs, |j| gates[3 * hs + j] * c_new[j].tanh());
                let cache = StepCache {
                    h_prev: h.clone(),
                    c_prev: c.clone(),
                    gates,
                    aux: c_new,
                };
                (h_new, cache)
            }
            CellKind::Gru => {
                let mut gates = Array1::zeros(3 * hs);
                for j in 0..hs {
                    gates[j] = sigmoid(a[j] + b[j]);
                    gates[hs + j] = sigmoid(a[hs + j] + b[hs + j]);
                }
                let bn = b.slice(s![2 * hs..]).to_owned();
                for j in 0..hs {
                    gates[2 * hs + j] = (a[2 * hs + j] + gates[j] * bn[j]).tanh();
                }
                let h_new = Array1::from_shape_fn(hs, |j| {
                    let z = gates[hs + j];
                    (1.0 - z) * gates[2 * hs + j] + z * h[j]
                });
                let cache = StepCache {
                    h_prev: h.clone(),
                    c_prev: Array1::zeros(0),
                    gates,
                    aux: bn,
                };
                (h_new, cache)
            }
        }
    }

    /// Runs over `inputs` in the given order from zero state.
    fn run(&self, inputs: &[Array1<f64>]) -> (Vec<Array1<f64>>, Vec<StepCache>) {
        let mut h = Array1::zeros(self.hidden);
        let mut c = Array1::zeros(self.hidden);
        let mut hs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (h_new, cache) = self.step(x.view(), &h, &c);
            if self.cell == CellKind::Lstm {
                c = cache.aux.clone();
            }
            h = h_new;
            hs.push(h.clone());
            caches.push(cache);
        }
        (hs, caches)
    }

    /// Backpropagation through time. `dh_out[t]` is the external gradient on
    /// the hidden state emitted at step `t`; returns dL/dx per step.
    fn backprop(
        &mut self,
        inputs: &[Array1<f64>],
        caches: &[StepCache],
        dh_out: &[Array1<f64>],
    ) -> Vec<Array1<f64>> {
        let hs = self.hidden;
        let steps = inputs.len();
        let mut dxs = vec![Array1::zeros(0); steps];
        let mut dh_next = Array1::<f64>::zeros(hs);
        let mut dc_next = Array1::<f64>::zeros(hs);
        for t in (0..steps).rev() {
            let cache = &caches[t];
            let dh = &dh_out[t] + &dh_next;
            let gates = &cache.gates;
            let (da, db) = match self.cell {
                CellKind::Lstm => {
                    let c_new = &cache.aux;
                    let mut dz = Array1::zeros(4 * hs);
                    let mut dc_prev = Array1::zeros(hs);
                    for j in 0..hs {
                        let (i, f, g, o) = (
                            gates[j],
                            gates[hs + j],
                            gates[2 * hs + j],
                            gates[3 * hs + j],
                        );
                        let tc = c_new[j].tanh();
                        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
                        dz[j] = dc * g * i * (1.0 - i);
                        dz[hs + j] = dc * cache.c_prev[j] * f * (1.0 - f);
                        dz[2 * hs + j] = dc * i * (1.0 - g * g);
                        dz[3 * hs + j] = dh[j] * tc * o * (1.0 - o);
                        dc_prev[j] = dc * f;
                    }
                    dc_next = dc_prev;
                    (dz.clone(), dz)
                }
                CellKind::Gru => {
                    let bn = &cache.aux;
                    let mut da = Array1::zeros(3 * hs);
                    let mut db = Array1::zeros(3 * hs);
                    for j in 0..hs {
                        let (r, z, n) = (gates[j], gates[hs + j], gates[2 * hs + j]);
                        let dn_pre = dh[j] * (1.0 - z) * (1.0 - n * n);
                        let dz_pre = dh[j] * (cache.h_prev[j] - n) * z * (1.0 - z);
                        let dr_pre = dn_pre * bn[j] * r * (1.0 - r);
                        da[j] = dr_pre;
                        db[j] = dr_pre;
                        da[hs + j] = dz_pre;
                        db[hs + j] = dz_pre;
                        da[2 * hs + j] = dn_pre;
                        db[2 * hs + j] = dn_pre * r;
                    }
                    (da, db)
                }
            };
            let x = &inputs[t];
            self.gwx += &da
                .view()
                .insert_axis(Axis(1))
                .dot(&x.view().insert_axis(Axis(0)));
            self.gwh += &db
                .view()
                .insert_axis(Axis(1))
                .dot(&cache.h_prev.view().insert_axis(Axis(0)));
            self.gbx += &da;
            self.gbh += &db;
            dxs[t] = self.wx.t().dot(&da);
            let mut dh_prev = self.wh.t().dot(&db);
            if self.cell == CellKind::Gru {
                for j in 0..hs {
                    dh_prev[j] += dh[j] * gates[hs + j];
                }
            }
            dh_next = dh_prev;
        }
        dxs
    }

    fn zero_grad(&mut self) {
        self.gwx.fill(0.0);
        self.gwh.fill(0.0);
        self.gbx.fill(0.0);
        self.gbh.fill(0.0);
    }

    fn visit(&mut self, prefix: &str, f: &mut ParamVisitor) {
        let slices: [(&str, &mut [f64], &[f64], bool); 4] = [
            (
                "wx",
                self.wx.as_slice_mut().expect("std"),
                self.gwx.as_slice().expect("std"),
                true,
            ),
            (
                "wh",
                self.wh.as_slice_mut().expect("std"),
                self.gwh.as_slice().expect("std"),
                true,
            ),
            (
                "bx",
                self.bx.as_slice_mut().expect("std"),
                self.gbx.as_slice().expect("std"),
                false,
            ),
            (
                "bh",
                self.bh.as_slice_mut().expect("std"),
                self.gbh.as_slice().expect("std"),
                false,
            ),
        ];
        for (name, v, g, decay) in slices {
            f(&format!("{prefix}.{name}"), v, g, decay);
        }
    }
}

/// Two stacked bidirectional recurrent layers over the subword sequence; the
/// last forward state and last backward state are concatenated and passed to
/// a three-layer MLP with a two-way softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentHead {
    config: RecurrentConfig,
    /// `[forward, backward]` per layer.
    layers: Vec<[Direction; 2]>,
    mlp: MlpHead,
}

struct LayerCache {
    inputs: Vec<Array1<f64>>,
    reversed: Vec<Array1<f64>>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
}

pub struct RecurrentCache {
    layers: Vec<LayerCache>,
    mlp: MlpCache,
}

impl RecurrentHead {
    pub fn new(config: RecurrentConfig, rng: &mut ChaCha8Rng) -> RecurrentHead {
        let mut layers = Vec::with_capacity(RNN_LAYERS);
        for l in 0..RNN_LAYERS {
            let input = if l == 0 {
                config.input
            } else {
                2 * config.hidden
            };
            layers.push([
                Direction::new(config.cell, input, config.hidden, rng),
                Direction::new(config.cell, input, config.hidden, rng),
            ]);
        }
        let mlp = MlpHead::new(
            MlpConfig {
                input: 2 * config.hidden,
                hidden: config.mlp_hidden,
                output: 2,
                output_kind: OutputKind::Softmax,
                dropout: config.dropout,
            },
            rng,
        );
        RecurrentHead {
            config,
            layers,
            mlp,
        }
    }

    pub fn config(&self) -> &RecurrentConfig {
        &self.config
    }

    pub fn layer_mut(&mut self, layer: usize) -> &mut [Direction; 2] {
        &mut self.layers[layer]
    }

    pub fn mlp_mut(&mut self) -> &mut MlpHead {
        &mut self.mlp
    }

    /// Final summary vector `[h_fwd(last), h_bwd(first)]` of the top layer.
    fn encode(&self, sequence: &Array2<f64>) -> Result<(Array1<f64>, Vec<LayerCache>), HeadError> {
        if sequence.nrows() == 0 {
            return Err(HeadError::EmptySequence);
        }
        if sequence.ncols() != self.config.input {
            return Err(HeadError::Dimension {
                expected: self.config.input,
                got: sequence.ncols(),
            });
        }
        let m = sequence.nrows();
        let hs = self.config.hidden;
        let mut inputs: Vec<Array1<f64>> = sequence.outer_iter().map(|r| r.to_owned()).collect();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut summary = Array1::zeros(2 * hs);
        for [fwd, bwd] in &self.layers {
            let reversed: Vec<Array1<f64>> = inputs.iter().rev().cloned().collect();
            let (hf, cf) = fwd.run(&inputs);
            let (hb, cb) = bwd.run(&reversed);
            let outputs: Vec<Array1<f64>> = (0..m)
                .map(|t| {
                    let mut o = Array1::zeros(2 * hs);
                    o.slice_mut(s![..hs]).assign(&hf[t]);
                    o.slice_mut(s![hs..]).assign(&hb[m - 1 - t]);
                    o
                })
                .collect();
            summary.slice_mut(s![..hs]).assign(&hf[m - 1]);
            summary.slice_mut(s![hs..]).assign(&hb[m - 1]);
            caches.push(LayerCache {
                inputs,
                reversed,
                fwd: cf,
                bwd: cb,
            });
            inputs = outputs;
        }
        Ok((summary, caches))
    }
}

impl Head for RecurrentHead {
    type Input = Array2<f64>;
    type Cache = RecurrentCache;

    fn output_kind(&self) -> OutputKind {
        OutputKind::Softmax
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn forward(
        &self,
        input: &Array2<f64>,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array1<f64>, RecurrentCache), HeadError> {
        let (summary, layers) = self.encode(input)?;
        let (logits, mlp) = self.mlp.forward_vec(summary.view(), dropout)?;
        Ok((logits, RecurrentCache { layers, mlp }))
    }

    fn backward(&mut self, input: &Array2<f64>, cache: &RecurrentCache, dlogits: ArrayView1<f64>) {
        let m = input.nrows();
        let hs = self.config.hidden;
        let dsummary = self.mlp.backward_vec(&cache.mlp, dlogits);

        let zeros = || vec![Array1::<f64>::zeros(hs); m];
        let mut dh_f = zeros();
        let mut dh_b = zeros();
        dh_f[m - 1] = dsummary.slice(s![..hs]).to_owned();
        dh_b[m - 1] = dsummary.slice(s![hs..]).to_owned();

        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers).rev() {
            let [fwd, bwd] = layer;
            let dx_f = fwd.backprop(&lc.inputs, &lc.fwd, &dh_f);
            let dx_b = bwd.backprop(&lc.reversed, &lc.bwd, &dh_b);
            // gradient w.r.t. this layer's inputs, split for the layer below
            let mut next_f = zeros();
            let mut next_b = zeros();
            for t in 0..m {
                let dx = &dx_f[t] + &dx_b[m - 1 - t];
                if dx.len() == 2 * hs {
                    next_f[t] = dx.slice(s![..hs]).to_owned();
                    next_b[m - 1 - t] = dx.slice(s![hs..]).to_owned();
                }
            }
            dh_f = next_f;
            dh_b = next_b;
        }
    }

    fn zero_grad(&mut self) {
        for [f, b] in &mut self.layers {
            f.zero_grad();
            b.zero_grad();
        }
        Head::zero_grad(&mut self.mlp);
    }

    fn visit_params(&mut self, f: &mut ParamVisitor) {
        for (l, [fwd, bwd]) in self.layers.iter_mut().enumerate() {
            fwd.visit(&format!("rnn.{l}.fwd"), f);
            bwd.visit(&format!("rnn.{l}.bwd"), f);
        }
        self.mlp.visit_layers("mlp", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn small(cell: CellKind) -> RecurrentHead {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        RecurrentHead::new(
            RecurrentConfig::new(cell, 3).with_hidden(4, [6, 5, 4]),
            &mut rng,
        )
    }

    #[test]
    fn single_row_reads_same_row_both_ways() {
        for cell in [CellKind::Lstm, CellKind::Gru] {
            let head = small(cell);
            let x = array![[0.2, -0.1, 0.5]];
            let (_, caches) = head.encode(&x).unwrap();
            assert_eq!(caches[0].inputs, caches[0].reversed);
            let p = head.predict(&x).unwrap();
            assert!((p.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let head = small(CellKind::Gru);
        assert!(matches!(
            head.predict(&Array2::zeros((0, 3))),
            Err(HeadError::EmptySequence)
        ));
    }

    #[test]
    fn gru_two_steps_match_hand_unroll() {
        // 1-d input, hidden size 1, weights chosen by hand.
        // r = s(0.5x + 0.1 + 0.3h), z = s(-0.4x + 0.2h), n = tanh(0.8x + r(0.6h + 0.05))
        let dir = Direction::from_weights(
            CellKind::Gru,
            array![[0.5], [-0.4], [0.8]],
            array![[0.3], [0.2], [0.6]],
            array![0.1, 0.0, 0.0],
            array![0.0, 0.0, 0.05],
        );
        let xs = vec![array![1.0], array![-0.5]];
        let (hs, _) = dir.run(&xs);
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = 0.0f64;
        let mut hand = Vec::new();
        for x in [1.0f64, -0.5] {
            let r = s(0.5 * x + 0.1 + 0.3 * h);
            let z = s(-0.4 * x + 0.2 * h);
            let n = (0.8 * x + r * (0.6 * h + 0.05)).tanh();
            h = (1.0 - z) * n + z * h;
            hand.push(h);
        }
        // step 1: r = s(0.6) = 0.645656, z = s(-0.4) = 0.401312,
        // n = tanh(0.8 + 0.032283) = 0.681700, h1 = 0.408125; h2 = 0.125425
        assert!((hand[0] - 0.408_125_3).abs() < 1e-6);
        assert!((hand[1] - 0.125_425_1).abs() < 1e-6);
        assert!((hs[0][0] - hand[0]).abs() < 1e-12);
        assert!((hs[1][0] - hand[1]).abs() < 1e-12);
    }

    #[test]
    fn lstm_two_steps_match_hand_unroll() {
        let dir = Direction::from_weights(
            CellKind::Lstm,
            array![[0.5], [-0.3], [0.7], [0.2]],
            array![[0.1], [0.4], [-0.2], [0.3]],
            array![0.0, 1.0, 0.0, 0.0],
            array![0.0, 0.0, 0.1, 0.0],
        );
        let xs = vec![array![0.8], array![-1.2]];
        let (hs, _) = dir.run(&xs);
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for (t, x) in [0.8f64, -1.2].into_iter().enumerate() {
            let i = s(0.5 * x + 0.1 * h);
            let f = s(-0.3 * x + 1.0 + 0.4 * h);
            let g = (0.7 * x - 0.2 * h + 0.1).tanh();
            let o = s(0.2 * x + 0.3 * h);
            c = f * c + i * g;
            h = o * c.tanh();
            assert!((hs[t][0] - h).abs() < 1e-12);
        }
    }
}
