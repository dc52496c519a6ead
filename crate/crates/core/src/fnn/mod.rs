//! Feedforward network mapping a normalized spectrum to its normalized BFS.
//!
//! Hidden layers use the logistic sigmoid, the output layer is a plain
//! weighted sum. All parameters of one network live in a single flat
//! vector, layer by layer, each layer's row-major weight matrix followed by
//! its bias vector (when biases are enabled).

mod model_io;
mod train;

pub use model_io::{load_model, save_model};
pub use train::{
    train, train_lm, train_steepest_descent, training_provenance, Algorithm, IterationRecord,
    TrainConfig, TrainLog,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::spectra::{normalize_spectrum, Spectrum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    pub(crate) fn id(self) -> u8 {
        match self {
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    pub(crate) fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Layer widths `[M, I1, ..., J]` and activation choices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkLayout {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    bias: bool,
}

impl NetworkLayout {
    /// Sigmoid hidden layers, linear output, with biases.
    pub fn new(sizes: &[usize]) -> Result<Self> {
        Self::with_options(sizes, Activation::Sigmoid, Activation::Linear, true)
    }

    pub fn with_options(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        bias: bool,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layout needs at least 2 layers of width >= 1, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            bias,
        })
    }

    /// 157-40-15-1.
    pub fn large() -> Self {
        Self::new(&[157, 40, 15, 1]).expect("static layout")
    }

    /// 157-20-8-1, for quick training runs.
    pub fn small() -> Self {
        Self::new(&[157, 20, 8, 1]).expect("static layout")
    }

    /// Drop the bias terms (plain weighted sums in every layer).
    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn has_bias(&self) -> bool {
        self.bias
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Offset of each layer's block in the flat parameter vector, plus the
    /// total length as the final entry.
    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut at = 0;
        for w in self.sizes.windows(2) {
            out.push(at);
            at += w[1] * w[0] + if self.bias { w[1] } else { 0 };
        }
        out.push(at);
        out
    }

    pub fn parameter_count(&self) -> usize {
        *self.offsets().last().unwrap()
    }
}

/// Trained (or freshly initialised) network together with the scan
/// geometry its targets were normalized against.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layout: NetworkLayout,
    offsets: Vec<usize>,
    params: Vec<f64>,
    scan_range_mhz: f64,
    step_mhz: f64,
    provenance: String,
}

impl Network {
    /// Zero-parameter network for the given window geometry.
    pub fn zeros(layout: NetworkLayout, scan_range_mhz: f64, step_mhz: f64) -> Self {
        let offsets = layout.offsets();
        let n = *offsets.last().unwrap();
        Self {
            layout,
            offsets,
            params: vec![0.0; n],
            scan_range_mhz,
            step_mhz,
            provenance: String::new(),
        }
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn scan_range_mhz(&self) -> f64 {
        self.scan_range_mhz
    }

    pub fn step_mhz(&self) -> f64 {
        self.step_mhz
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, p: impl Into<String>) {
        self.provenance = p.into();
    }

    /// All parameters, layer by layer (weights row-major, then biases).
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weight_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start = self.offsets[layer];
        start..start + self.layout.sizes[layer + 1] * self.layout.sizes[layer]
    }

    fn bias_range(&self, layer: usize) -> Option<std::ops::Range<usize>> {
        self.layout.bias.then(|| {
            let w = self.weight_range(layer);
            w.end..w.end + self.layout.sizes[layer + 1]
        })
    }

    /// Row-major `(sizes[l+1] × sizes[l])` weight matrix of layer `l`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params[self.weight_range(layer)]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.weight_range(layer);
        &mut self.params[r]
    }

    pub fn biases(&self, layer: usize) -> Option<&[f64]> {
        self.bias_range(layer).map(|r| &self.params[r])
    }

    pub fn biases_mut(&mut self, layer: usize) -> Option<&mut [f64]> {
        self.bias_range(layer).map(|r| &mut self.params[r])
    }

    /// Output vector for one input.
    pub fn forward_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut scratch = Scratch::new(&self.layout);
        self.forward_into(x, &mut scratch);
        Ok(scratch.acts.last().unwrap().clone())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layout.inputs() {
            return Err(Error::Shape {
                expected: self.layout.inputs(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("network input contains non-finite values"));
        }
        Ok(())
    }

    /// First output unit for `n` inputs stored back to back in `x`. Four
    /// inputs share each pass over a weight row.
    fn forward_columns(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut a = x[..self.layout.inputs() * n].to_vec();
        for l in 0..self.layout.layers() {
            let (n_in, n_out) = (self.layout.sizes[l], self.layout.sizes[l + 1]);
            let act = self.layout.activation(l);
            let w = self.weights(l);
            let b = self.biases(l);
            let mut z = vec![0.0; n_out * n];
            let mut c = 0;
            while c < n {
                let k = (n - c).min(4);
                let cols: [&[f64]; 4] =
                    std::array::from_fn(|q| &a[(c + q.min(k - 1)) * n_in..][..n_in]);
                for o in 0..n_out {
                    let d = dot4(&w[o * n_in..(o + 1) * n_in], cols);
                    let bias = b.map_or(0.0, |b| b[o]);
                    for q in 0..k {
                        z[(c + q) * n_out + o] = act.apply(bias + d[q]);
                    }
                }
                c += k;
            }
            a = z;
        }
        a.iter().step_by(self.layout.outputs()).copied().collect()
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        s.acts[0].copy_from_slice(x);
        for l in 0..self.layout.layers() {
            let (n_in, n_out) = (self.layout.sizes[l], self.layout.sizes[l + 1]);
            let act = self.layout.activation(l);
            let w = self.weights(l);
            let b = self.biases(l);
            let (prev, next) = s.acts.split_at_mut(l + 1);
            let input = &prev[l];
            for (o, out) in next[0].iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *out = act.apply(b.map_or(0.0, |b| b[o]) + dot(row, input));
            }
            debug_assert_eq!(next[0].len(), n_out);
        }
    }

    /// Backpropagate `out_delta` (∂cost/∂output) through the activations
    /// left in `s` by the last forward pass, adding `∂cost/∂θ` into `grad`.
    fn backward_into(&self, out_delta: &[f64], s: &mut Scratch, grad: &mut [f64]) {
        let layers = self.layout.layers();
        let out_act = self.layout.activation(layers - 1);
        for (d, (g, a)) in s.deltas[layers - 1]
            .iter_mut()
            .zip(out_delta.iter().zip(&s.acts[layers]))
        {
            *d = g * out_act.slope_from_output(*a);
        }
        for l in (0..layers).rev() {
            let n_in = self.layout.sizes[l];
            let w_range = self.weight_range(l);
            {
                let delta = &s.deltas[l];
                let input = &s.acts[l];
                let gw = &mut grad[w_range.clone()];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
                if let Some(br) = self.bias_range(l) {
                    for (g, d) in grad[br].iter_mut().zip(delta) {
                        *g += d;
                    }
                }
            }
            if l > 0 {
                let act = self.layout.activation(l - 1);
                let w = &self.params[w_range];
                let (lower, upper) = s.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.iter_mut().for_each(|p| *p = 0.0);
                for (o, d) in upper[0].iter().enumerate() {
                    for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wi;
                    }
                }
                for (p, a) in prev.iter_mut().zip(&s.acts[l]) {
                    *p *= act.slope_from_output(*a);
                }
            }
        }
    }
}

/// Per-layer activation and delta buffers reused across samples.
pub(crate) struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    pub(crate) fn new(layout: &NetworkLayout) -> Self {
        Self {
            acts: layout.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: layout.sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Fan-based uniform initialisation: weights in `±sqrt(6 / (fan_in + fan_out))`,
/// biases zero.
pub fn init_network(layout: &NetworkLayout, seed: u64) -> Network {
    init_network_for(layout, seed, 156.0, 1.0)
}

pub fn init_network_for(
    layout: &NetworkLayout,
    seed: u64,
    scan_range_mhz: f64,
    step_mhz: f64,
) -> Network {
    let mut net = Network::zeros(layout.clone(), scan_range_mhz, step_mhz);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..layout.layers() {
        let (fan_in, fan_out) = (layout.sizes[l], layout.sizes[l + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in net.weights_mut(l) {
            *w = rng.random_range(-bound..=bound);
        }
    }
    net
}

/// Eight independent partial sums so the loop vectorizes instead of
/// waiting on one serial add chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// `row · x` for four inputs at once.
fn dot4(row: &[f64], x: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0; 4]; 4];
    let n = row.len() / 4 * 4;
    for i in (0..n).step_by(4) {
        let r = &row[i..i + 4];
        for (q, xq) in x.iter().enumerate() {
            let xq = &xq[i..i + 4];
            for k in 0..4 {
                acc[q][k] += r[k] * xq[k];
            }
        }
    }
    std::array::from_fn(|q| {
        let tail: f64 = (n..row.len()).map(|i| row[i] * x[q][i]).sum();
        (acc[q][0] + acc[q][2]) + (acc[q][1] + acc[q][3]) + tail
    })
}

/// Scalar network output for one input (the first output unit).
pub fn forward(net: &Network, x: &[f64]) -> Result<f64> {
    Ok(net.forward_all(x)?[0])
}

fn check_dataset(net: &Network, d: &Dataset) -> Result<()> {
    if d.rows() != net.layout.inputs() {
        return Err(Error::Shape {
            expected: net.layout.inputs(),
            actual: d.rows(),
        });
    }
    if net.layout.outputs() != 1 {
        return Err(Error::Config("datasets carry scalar targets; network needs J = 1".into()));
    }
    Ok(())
}

/// Mean over samples of `(1 / 2J) Σ_j e_j²` with `e_j = h_j - y_j`.
pub fn batch_mse(net: &Network, d: &Dataset) -> Result<f64> {
    check_dataset(net, d)?;
    if d.is_empty() {
        return Err(Error::domain("cannot score an empty dataset"));
    }
    let mut s = Scratch::new(&net.layout);
    let mut total = 0.0;
    for (x, h) in d.columns().zip(d.targets()) {
        net.forward_into(x, &mut s);
        let e = h - s.output()[0];
        total += 0.5 * e * e;
    }
    Ok(total / d.len() as f64)
}

/// Gradient of the per-sample cost `(1 / 2J) Σ_j e_j²`, summed over the
/// batch, laid out like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn backprop_gradient(net: &Network, batch: &Dataset) -> Result<Gradient> {
    check_dataset(net, batch)?;
    if batch.is_empty() {
        return Err(Error::domain("gradient of an empty batch"));
    }
    let mut grad = vec![0.0; net.params.len()];
    let mut s = Scratch::new(&net.layout);
    for (x, h) in batch.columns().zip(batch.targets()) {
        net.forward_into(x, &mut s);
        let e = h - s.output()[0];
        net.backward_into(&[-e], &mut s, &mut grad);
    }
    Ok(Gradient(grad))
}

/// Fills `row` with `∂y/∂θ` for one input and returns `y` (J = 1).
pub(crate) fn output_jacobian_row(
    net: &Network,
    x: &[f64],
    s: &mut Scratch,
    row: &mut [f64],
) -> f64 {
    net.forward_into(x, s);
    let y = s.output()[0];
    row.iter_mut().for_each(|v| *v = 0.0);
    net.backward_into(&[1.0], s, row);
    y
}

/// BFS in the spectrum's own frequency coordinates. The spectrum must match
/// the network's input length and scan step; resample first otherwise.
pub fn predict_bfs(net: &Network, s: &Spectrum) -> Result<f64> {
    check_window(net, s)?;
    let x = normalize_spectrum(s)?;
    let h = forward(net, x.gains())?;
    Ok(s.grid().start_mhz() + h * net.scan_range_mhz)
}

fn check_window(net: &Network, s: &Spectrum) -> Result<()> {
    let m = net.layout.inputs();
    if s.len() != m {
        return Err(Error::GridContract(format!(
            "network expects {m} samples, spectrum has {}",
            s.len()
        )));
    }
    if (s.grid().step_mhz() - net.step_mhz).abs() > 1e-9 {
        return Err(Error::GridContract(format!(
            "network expects a {} MHz step, spectrum has {} MHz",
            net.step_mhz,
            s.grid().step_mhz()
        )));
    }
    if s.gains().iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("network input contains non-finite values"));
    }
    Ok(())
}

/// `predict_bfs` over many windows, evaluated layer by layer as one matrix
/// product per block of spectra (single-threaded). Each entry fails or
/// succeeds on its own.
pub fn predict_bfs_batch(net: &Network, spectra: &[Spectrum]) -> Vec<Result<f64>> {
    const BLOCK: usize = 1024;
    let m = net.layout.inputs();
    let mut out = Vec::with_capacity(spectra.len());
    let mut x = Vec::with_capacity(m * BLOCK);
    for chunk in spectra.chunks(BLOCK) {
        x.clear();
        let mut ok = Vec::with_capacity(chunk.len());
        let mut slots: Vec<Result<f64>> = chunk
            .iter()
            .map(|s| {
                check_window(net, s)?;
                let start = x.len();
                x.extend_from_slice(s.gains());
                if let Err(e) = crate::spectra::normalize_in_place(&mut x[start..]) {
                    x.truncate(start);
                    return Err(e);
                }
                ok.push(s.grid().start_mhz());
                Ok(0.0)
            })
            .collect();
        if !ok.is_empty() {
            let h = net.forward_columns(&x, ok.len());
            let mut h = h.into_iter().zip(ok);
            for slot in slots.iter_mut().filter(|r| r.is_ok()) {
                let (h, start) = h.next().expect("one output per accepted column");
                *slot = Ok(start + h * net.scan_range_mhz);
            }
        }
        out.append(&mut slots);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GridSpec;

    fn data(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Dataset {
        let rows = inputs[0].len();
        Dataset::from_parts(rows, inputs.concat(), targets, GridSpec::reduced()).unwrap()
    }

    #[test]
    fn batch_prediction_matches_single() {
        use crate::spectra::{synth_spectrum, FrequencyGrid, LorentzianParams};
        let net = init_network(&NetworkLayout::large(), 5);
        let grid = FrequencyGrid::new(3.0, 1.0, 157).unwrap();
        let mut spectra: Vec<Spectrum> = (0..1500)
            .map(|i| synth_spectrum(&LorentzianParams::new(1.0, 20.0 + 0.07 * i as f64, 30.0).unwrap(), &grid))
            .collect();
        spectra[7] = Spectrum::new(grid, vec![0.5; 157]).unwrap();
        spectra[1200] = Spectrum::new(FrequencyGrid::new(0.0, 1.0, 100).unwrap(), vec![0.0; 100]).unwrap();
        let batch = predict_bfs_batch(&net, &spectra);
        assert_eq!(batch.len(), spectra.len());
        for (s, b) in spectra.iter().zip(&batch) {
            match (predict_bfs(&net, s), b) {
                (Ok(a), Ok(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("disagree: {a:?} vs {b:?}"),
            }
        }
        assert!(batch[7].is_err() && batch[1200].is_err());
    }

    #[test]
    fn large_layout_shapes() {
        let net = init_network(&NetworkLayout::large(), 1);
        assert_eq!(net.weights(0).len(), 40 * 157);
        assert_eq!(net.weights(1).len(), 15 * 40);
        assert_eq!(net.weights(2).len(), 15);
        assert_eq!(net.biases(2).unwrap().len(), 1);
        assert_eq!(NetworkLayout::large().parameter_count(), 6951);
        assert!(NetworkLayout::new(&[157]).is_err());
        assert!(NetworkLayout::new(&[157, 0, 1]).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let layout = NetworkLayout::small();
        assert_eq!(init_network(&layout, 9), init_network(&layout, 9));
        assert_ne!(init_network(&layout, 9), init_network(&layout, 10));
        let small = NetworkLayout::new(&[2, 1]).unwrap();
        let bound = (6.0f64 / 3.0).sqrt();
        let mut max_seen = 0.0f64;
        for seed in 0..5000 {
            let net = init_network(&small, seed);
            for w in net.weights(0) {
                assert!(w.abs() <= bound);
                max_seen = max_seen.max(w.abs());
            }
            assert_eq!(net.biases(0).unwrap(), &[0.0]);
        }
        assert!(max_seen > 0.99 * bound);
    }

    #[test]
    fn zero_network_outputs() {
        let net = Network::zeros(NetworkLayout::new(&[4, 3, 1]).unwrap(), 156.0, 1.0);
        let mut s = Scratch::new(net.layout());
        net.forward_into(&[0.3, -2.0, 5.0, 1.0], &mut s);
        assert_eq!(s.acts[1], vec![0.5; 3]);
        assert_eq!(forward(&net, &[0.3, -2.0, 5.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(forward(&net, &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn one_one_one_closed_form() {
        let mut net = Network::zeros(NetworkLayout::new(&[1, 1, 1]).unwrap(), 156.0, 1.0);
        net.weights_mut(0)[0] = 0.7;
        net.weights_mut(1)[0] = -1.9;
        let y = forward(&net, &[0.4]).unwrap();
        assert!((y - (-1.9 * sigmoid(0.7 * 0.4))).abs() < 1e-15);
        net.weights_mut(0)[0] = 0.0;
        assert_eq!(forward(&net, &[0.4]).unwrap(), 0.5 * -1.9);
    }

    #[test]
    fn mse_examples() {
        let net = Network::zeros(NetworkLayout::new(&[2, 1]).unwrap(), 156.0, 1.0);
        // zero net outputs 0
        let d = data(vec![vec![1.0, 2.0]], vec![1.0]);
        assert_eq!(batch_mse(&net, &d).unwrap(), 0.5);
        let d = data(vec![vec![1.0, 2.0], vec![0.0, 0.0]], vec![0.0, 0.0]);
        assert_eq!(batch_mse(&net, &d).unwrap(), 0.0);
        let d = data(vec![vec![1.0, 2.0], vec![0.5, 0.5], vec![3.0, 1.0]], vec![0.2, -0.4, 1.5]);
        let manual = (0.5 * 0.04 + 0.5 * 0.16 + 0.5 * 2.25) / 3.0;
        assert!((batch_mse(&net, &d).unwrap() - manual).abs() < 1e-15);
        let empty = Dataset::from_parts(2, vec![], vec![], GridSpec::reduced());
        assert!(empty.is_err() || batch_mse(&net, &empty.unwrap()).is_err());
    }

    #[test]
    fn gradient_basics() {
        let net = init_network(&NetworkLayout::new(&[3, 4, 1]).unwrap(), 3);
        let x = vec![0.2, 0.9, 0.4];
        let y = forward(&net, &x).unwrap();
        let perfect = data(vec![x.clone()], vec![y]);
        assert!(backprop_gradient(&net, &perfect).unwrap().0.iter().all(|g| *g == 0.0));

        let one = data(vec![x.clone()], vec![0.3]);
        let two = data(vec![x.clone(), x], vec![0.3, 0.3]);
        let g1 = backprop_gradient(&net, &one).unwrap();
        let g2 = backprop_gradient(&net, &two).unwrap();
        for (a, b) in g1.0.iter().zip(&g2.0) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_refuses_wrong_grid() {
        use crate::spectra::{synth_spectrum, FrequencyGrid, LorentzianParams};
        let net = init_network(&NetworkLayout::small(), 1);
        let p = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
        let s40 = synth_spectrum(&p, &FrequencyGrid::new(0.0, 4.0, 40).unwrap());
        assert!(matches!(predict_bfs(&net, &s40), Err(Error::GridContract(_))));
        let s_half = synth_spectrum(&p, &FrequencyGrid::new(0.0, 0.5, 157).unwrap());
        assert!(matches!(predict_bfs(&net, &s_half), Err(Error::GridContract(_))));
    }

    #[test]
    fn predictions_ignore_gain_scale() {
        use crate::spectra::{synth_spectrum, FrequencyGrid, LorentzianParams};
        let net = init_network(&NetworkLayout::small(), 4);
        let grid = FrequencyGrid::new(0.0, 1.0, 157).unwrap();
        let a = synth_spectrum(&LorentzianParams::new(1.0, 60.0, 30.0).unwrap(), &grid);
        let b = synth_spectrum(&LorentzianParams::new(4.0, 60.0, 30.0).unwrap(), &grid);
        let na = normalize_spectrum(&a).unwrap();
        let nb = normalize_spectrum(&b).unwrap();
        assert!(na.gains().iter().zip(nb.gains()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(predict_bfs(&net, &a).unwrap(), predict_bfs(&net, &b).unwrap());
    }
}
