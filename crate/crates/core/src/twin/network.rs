//! Fully connected tanh network with a linear head and hand-written backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One training example in normalized units. `mask[k] == false` removes
/// output `k` from the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.outputs, 0.0);
        self.apply_into(x, out);
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().enumerate().take(self.outputs) {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o];
        }
    }
}

/// Multilayer perceptron: tanh on every hidden layer, identity on the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists every layer width from input to output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Mlp { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    /// Adds `delta` to the flattened parameters.
    pub fn add_to_params(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.param_count());
        let mut at = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w += delta[at];
                at += 1;
            }
        }
    }

    /// Forward pass without heap allocation; `out` must hold
    /// [`Mlp::output_size`] values. Falls back to [`Mlp::forward`] for layers
    /// wider than the stack buffers.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        const WIDTH: usize = 128;
        if self.layers.iter().any(|l| l.outputs > WIDTH) {
            out.copy_from_slice(&self.forward(x));
            return;
        }
        let mut a = [0.0; WIDTH];
        let mut b = [0.0; WIDTH];
        let n = x.len();
        a[..n].copy_from_slice(x);
        let mut width = n;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply_into(&a[..width], &mut b[..layer.outputs]);
            if i != last {
                b[..layer.outputs].iter_mut().for_each(|z| *z = z.tanh());
            }
            width = layer.outputs;
            std::mem::swap(&mut a, &mut b);
        }
        out.copy_from_slice(&a[..width]);
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&current, &mut next);
            if i != last {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Post-activation values of every layer, starting with the input.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.apply(&acts[i], &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Mean over samples of the masked squared error summed across outputs.
    pub fn loss(&self, batch: &[Sample]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let total: f64 = batch
            .iter()
            .map(|s| {
                let out = self.forward(&s.x);
                squared_error(&out, s)
            })
            .sum();
        total / batch.len() as f64
    }

    /// Loss and its gradient with respect to [`Mlp::params`].
    pub fn loss_and_gradient(&self, batch: &[Sample]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        if batch.is_empty() {
            return (0.0, grad);
        }
        let n = batch.len() as f64;
        // offset of each layer's weights inside the flat vector
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.weights.len() + l.biases.len();
        }

        let mut total = 0.0;
        for sample in batch {
            let acts = self.activations(&sample.x);
            let out = acts.last().unwrap();
            total += squared_error(out, sample);

            let mut delta: Vec<f64> = out
                .iter()
                .zip(&sample.y)
                .zip(&sample.mask)
                .map(|((o, y), &m)| if m { 2.0 * (o - y) / n } else { 0.0 })
                .collect();

            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let base = offsets[li];
                let bias_base = base + layer.weights.len();
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                    grad[bias_base + o] += d;
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for (row, &d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                        if d == 0.0 {
                            continue;
                        }
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                    // input to this layer is a tanh output
                    for (p, a) in prev.iter_mut().zip(input) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        (total / n, grad)
    }
}

fn squared_error(out: &[f64], sample: &Sample) -> f64 {
    out.iter()
        .zip(&sample.y)
        .zip(&sample.mask)
        .filter(|(_, &m)| m)
        .map(|((o, y), _)| (o - y) * (o - y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, inputs: usize, outputs: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| Sample {
                x: (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                y: (0..outputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                mask: (0..outputs).map(|_| rng.gen_bool(0.8)).collect(),
            })
            .collect()
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[4, 5, 3, 2], &mut rng);
        let p = net.params();
        assert_eq!(p.len(), net.param_count());
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        net.set_params(&shifted);
        assert_eq!(net.params(), shifted);
        net.add_to_params(&vec![-1.0; p.len()]);
        for (a, b) in net.params().iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_output_bias_when_hidden_biases_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[3, 4, 4, 4, 2], &mut rng);
        net.layers[3].biases = vec![0.25, -0.5];
        assert_eq!(net.forward(&[0.0, 0.0, 0.0]), vec![0.25, -0.5]);
    }

    #[test]
    fn forward_into_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[9, 32, 32, 16, 3], &mut rng);
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut out = [0.0; 3];
        net.forward_into(&x, &mut out);
        assert_eq!(out.to_vec(), net.forward(&x));
    }

    #[test]
    fn masked_outputs_have_no_gradient_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[2, 3, 2], &mut rng);
        let mut s = Sample {
            x: vec![0.3, -0.7],
            y: vec![0.1, 0.2],
            mask: vec![true, false],
        };
        let (l1, g1) = net.loss_and_gradient(&[s.clone()]);
        s.y[1] = 100.0;
        let (l2, g2) = net.loss_and_gradient(&[s]);
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 4, 4, 3, 2], &mut rng);
        let batch = random_batch(&mut rng, 5, 3, 2);
        let (_, analytic) = net.loss_and_gradient(&batch);
        let base = net.params();
        let h = 1e-6;
        let mut probe = net.clone();
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p);
            let up = probe.loss(&batch);
            p[i] -= 2.0 * h;
            probe.set_params(&p);
            let down = probe.loss(&batch);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            assert!((analytic[i] - numeric).abs() / scale < 1e-4, "param {i}");
        }
    }
}
