//! Toy split model: a client-side embedding table with parameter-free layer
//! normalization and a server-side two-layer classifier head over
//! mean-pooled token embeddings.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bounds::DifferentiableLoss;
use crate::config::TrainingParams;
use crate::error::{dim_err, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub vocab: usize,
    pub dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub seq_len: usize,
    /// `vocab × dim`, row-major.
    pub table: Vec<f64>,
    /// `hidden × dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `classes × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Parameter gradients with the same layout as [`ToyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub table: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(m: &ToyModel) -> Self {
        Self {
            table: vec![0.0; m.table.len()],
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.table, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn norm(&self) -> f64 {
        [&self.table, &self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for part in self.parts_mut() {
            part.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Global-norm clipping to `tau`; returns the pre-clipping norm.
    pub fn clip(&mut self, tau: f64) -> f64 {
        let n = self.norm();
        if n > tau {
            self.scale(tau / n);
        }
        n
    }
}

/// Forward activations of the head for one sample.
#[derive(Debug, Clone)]
pub struct HeadForward {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ToyModel {
    pub fn new<R: Rng + ?Sized>(p: &TrainingParams, rng: &mut R) -> Self {
        let (v, e, h, c) = (p.vocab, p.embed_dim, p.hidden, p.classes);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut draw = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| s * unit.sample(rng)).collect() };
        Self {
            vocab: v,
            dim: e,
            hidden: h,
            classes: c,
            seq_len: p.seq_len,
            table: draw(v * e, 1.0),
            w1: draw(h * e, (1.0 / e as f64).sqrt()),
            b1: vec![0.0; h],
            w2: draw(c * h, (1.0 / h as f64).sqrt()),
            b2: vec![0.0; c],
        }
    }

    /// Length of one sample's transmitted embedding, `seq_len · dim`.
    pub fn sample_dim(&self) -> usize {
        self.seq_len * self.dim
    }

    fn parts(&self) -> [&Vec<f64>; 5] {
        [&self.table, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.table, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|p| p.iter().all(|x| x.is_finite()))
    }

    /// `θ ← θ − lr · g`.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        let g = [&grads.table, &grads.w1, &grads.b1, &grads.w2, &grads.b2];
        for (part, gp) in self.parts_mut().into_iter().zip(g) {
            for (x, d) in part.iter_mut().zip(gp) {
                *x -= lr * d;
            }
        }
    }

    /// Normalized token embedding `LN(row) / √2`; each token carries unit
    /// average power per complex symbol pair.
    pub fn embed_token(&self, token: usize) -> Vec<f64> {
        let row = &self.table[token * self.dim..(token + 1) * self.dim];
        let (xhat, _) = layer_norm(row);
        xhat.into_iter().map(|x| x * std::f64::consts::FRAC_1_SQRT_2).collect()
    }

    /// Concatenated embeddings of a token sequence.
    pub fn embed(&self, tokens: &[usize]) -> Vec<f64> {
        tokens.iter().flat_map(|&t| self.embed_token(t)).collect()
    }

    pub fn head_forward(&self, e: &[f64]) -> HeadForward {
        let (d, h, c) = (self.dim, self.hidden, self.classes);
        let t = e.len() / d;
        let mut pooled = vec![0.0; d];
        for chunk in e.chunks(d) {
            for (p, x) in pooled.iter_mut().zip(chunk) {
                *p += x / t as f64;
            }
        }
        let hidden: Vec<f64> = (0..h)
            .map(|i| {
                let row = &self.w1[i * d..(i + 1) * d];
                (dot(row, &pooled) + self.b1[i]).tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..c)
            .map(|k| dot(&self.w2[k * h..(k + 1) * h], &hidden) + self.b2[k])
            .collect();
        HeadForward {
            pooled,
            hidden,
            probs: softmax(&logits),
        }
    }

    pub fn loss(&self, e: &[f64], label: usize) -> f64 {
        -self.head_forward(e).probs[label].max(f64::MIN_POSITIVE).ln()
    }

    pub fn predict(&self, e: &[f64]) -> usize {
        let f = self.head_forward(e);
        argmax(&f.probs)
    }

    /// Cross-entropy, head gradients (accumulated into `grads`) and the
    /// gradient with respect to the input embedding.
    pub fn head_backward(&self, e: &[f64], label: usize, grads: &mut Gradients) -> (f64, Vec<f64>) {
        let (d, h, c) = (self.dim, self.hidden, self.classes);
        let f = self.head_forward(e);
        let loss = -f.probs[label].max(f64::MIN_POSITIVE).ln();
        let mut dz = f.probs.clone();
        dz[label] -= 1.0;
        let mut dh = vec![0.0; h];
        for k in 0..c {
            grads.b2[k] += dz[k];
            for i in 0..h {
                grads.w2[k * h + i] += dz[k] * f.hidden[i];
                dh[i] += self.w2[k * h + i] * dz[k];
            }
        }
        let da: Vec<f64> = dh.iter().zip(&f.hidden).map(|(g, a)| g * (1.0 - a * a)).collect();
        let mut dx = vec![0.0; d];
        for i in 0..h {
            grads.b1[i] += da[i];
            for j in 0..d {
                grads.w1[i * d + j] += da[i] * f.pooled[j];
                dx[j] += self.w1[i * d + j] * da[i];
            }
        }
        let t = (e.len() / d) as f64;
        let grad_e = (0..e.len()).map(|i| dx[i % d] / t).collect();
        (loss, grad_e)
    }

    /// Backpropagates an embedding gradient through the normalization into
    /// the table rows of `tokens`.
    pub fn embed_backward(&self, tokens: &[usize], grad_e: &[f64], grads: &mut Gradients) {
        let d = self.dim;
        for (pos, &tok) in tokens.iter().enumerate() {
            let row = &self.table[tok * d..(tok + 1) * d];
            let (xhat, inv_std) = layer_norm(row);
            let dy = &grad_e[pos * d..(pos + 1) * d];
            let dxhat: Vec<f64> = dy.iter().map(|g| g * std::f64::consts::FRAC_1_SQRT_2).collect();
            let mean_g = dxhat.iter().sum::<f64>() / d as f64;
            let mean_gx = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            for j in 0..d {
                grads.table[tok * d + j] += inv_std * (dxhat[j] - mean_g - xhat[j] * mean_gx);
            }
        }
    }

    /// Global Lipschitz constant of the per-sample loss with respect to the
    /// concatenated embedding: `√2 ‖W1‖_F ‖W2‖_F / √seq_len`.
    pub fn lipschitz_bound(&self) -> f64 {
        let f1 = self.w1.iter().map(|x| x * x).sum::<f64>().sqrt();
        let f2 = self.w2.iter().map(|x| x * x).sum::<f64>().sqrt();
        std::f64::consts::SQRT_2 * f1 * f2 / (self.seq_len as f64).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = ex.iter().sum();
    ex.into_iter().map(|v| v / s).collect()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `(x − mean) / √(var + eps)` and the inverse standard deviation.
fn layer_norm(row: &[f64]) -> (Vec<f64>, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    (row.iter().map(|x| (x - mean) * inv_std).collect(), inv_std)
}

/// Parameter-wise arithmetic mean of identically shaped models.
pub fn fedavg(models: &[ToyModel]) -> Result<ToyModel> {
    let first = models.first().ok_or_else(|| dim_err("FedAvg", "at least one model", 0))?;
    let mut out = first.clone();
    for m in &models[1..] {
        let shapes = |x: &ToyModel| x.parts().map(|p| p.len());
        if shapes(m) != shapes(first) {
            return Err(dim_err("FedAvg", format!("{:?}", shapes(first)), format!("{:?}", shapes(m))));
        }
    }
    let n = models.len() as f64;
    for (idx, part) in out.parts_mut().into_iter().enumerate() {
        for (i, x) in part.iter_mut().enumerate() {
            *x = models.iter().map(|m| m.parts()[idx][i]).sum::<f64>() / n;
        }
    }
    Ok(out)
}

/// Per-sample server loss as a field over the received embedding.
pub struct HeadLoss<'a> {
    pub model: &'a ToyModel,
    pub label: usize,
}

impl DifferentiableLoss for HeadLoss<'_> {
    fn dim(&self) -> usize {
        self.model.sample_dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.model.loss(x, self.label)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Gradients::zeros_like(self.model);
        self.model.head_backward(x, self.label, &mut scratch).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> TrainingParams {
        TrainingParams {
            vocab: 10,
            embed_dim: 4,
            hidden: 5,
            classes: 3,
            seq_len: 3,
            ..TrainingParams::default()
        }
    }

    /// Total loss of a token sequence as a function of all parameters.
    fn seq_loss(m: &ToyModel, tokens: &[usize], label: usize) -> f64 {
        m.loss(&m.embed(tokens), label)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ToyModel::new(&small(), &mut rng);
        let tokens = [1, 7, 1];
        let label = 2;
        let mut g = Gradients::zeros_like(&m);
        let (_, grad_e) = m.head_backward(&m.embed(&tokens), label, &mut g);
        m.embed_backward(&tokens, &grad_e, &mut g);
        let analytic = [g.table.clone(), g.w1.clone(), g.b1.clone(), g.w2.clone(), g.b2.clone()];
        let h = 1e-6;
        for part in 0..5 {
            for i in 0..analytic[part].len() {
                let mut plus = m.clone();
                plus.parts_mut()[part][i] += h;
                let mut minus = m.clone();
                minus.parts_mut()[part][i] -= h;
                let fd = (seq_loss(&plus, &tokens, label) - seq_loss(&minus, &tokens, label)) / (2.0 * h);
                assert!((fd - analytic[part][i]).abs() < 1e-6, "part {part} index {i}: {fd} vs {}", analytic[part][i]);
            }
        }
    }

    #[test]
    fn embeddings_carry_unit_symbol_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ToyModel::new(&TrainingParams::default(), &mut rng);
        for t in 0..m.vocab {
            let e = m.embed_token(t);
            let power = e.iter().map(|x| x * x).sum::<f64>() / (m.dim / 2) as f64;
            assert!((power - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn lipschitz_bound_dominates_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = ToyModel::new(&small(), &mut rng);
        let lip = m.lipschitz_bound();
        for label in 0..m.classes {
            let loss = HeadLoss { model: &m, label };
            for _ in 0..200 {
                let x: Vec<f64> = (0..m.sample_dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
                let g = loss.gradient(&x);
                assert!(crate::bounds::norm(&g) <= lip);
            }
        }
    }

    #[test]
    fn fedavg_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = ToyModel::new(&small(), &mut rng);
        assert_eq!(fedavg(&[a.clone(), a.clone()]).unwrap(), a);

        let mut neg = a.clone();
        for p in neg.parts_mut() {
            p.iter_mut().for_each(|x| *x = -*x);
        }
        let zero = fedavg(&[a.clone(), neg]).unwrap();
        assert!(zero.parts().iter().all(|p| p.iter().all(|x| *x == 0.0)));

        let b = ToyModel::new(&small(), &mut rng);
        let c = ToyModel::new(&small(), &mut rng);
        let avg = fedavg(&[a.clone(), b.clone(), c.clone()]).unwrap();
        for part in 0..5 {
            for i in 0..avg.parts()[part].len() {
                let mean = (a.parts()[part][i] + b.parts()[part][i] + c.parts()[part][i]) / 3.0;
                assert!((avg.parts()[part][i] - mean).abs() < 1e-15);
            }
        }
        assert!(fedavg(&[]).is_err());
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = ToyModel::new(&small(), &mut rng);
        let mut g = Gradients::zeros_like(&m);
        g.w1.iter_mut().for_each(|x| *x = 3.0);
        g.clip(0.5);
        assert!((g.norm() - 0.5).abs() < 1e-12);
    }
}
