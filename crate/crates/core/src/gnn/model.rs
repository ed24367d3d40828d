use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::NodeDataset;
use crate::error::{input, Result};
use crate::linalg::DenseMatrix;

/// `x·sigmoid(x)`.
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Swish,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Activation::Relu => f64::from(u8::from(x > 0.0)),
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swish" => Ok(Self::Swish),
            "relu" => Ok(Self::Relu),
            "identity" => Ok(Self::Identity),
            other => input(format!("unknown activation {other:?}")),
        }
    }
}

/// One propagation layer: `d_in×d_out` weights and a `d_out` bias.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl GnnLayer {
    pub fn d_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Stack of graph convolution layers.
///
/// Layer `t` maps `X ↦ φ(Â·X·Wᵗ) + bᵗ` with the bias added outside the
/// activation and broadcast over rows. The last layer skips `φ` and its
/// output is read as class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    layers: Vec<GnnLayer>,
    activation: Activation,
}

/// Hidden states of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `states[0]` is the input; `states[t + 1]` is the output of layer `t`.
    pub states: Vec<DenseMatrix>,
    /// `Â·Xᵗ·Wᵗ` before activation and bias, per layer.
    pub pre_activations: Vec<DenseMatrix>,
}

impl ForwardPass {
    pub fn logits(&self) -> &DenseMatrix {
        self.states.last().expect("at least one layer")
    }

    /// Outputs of every layer, excluding the input.
    pub fn hidden_states(&self) -> &[DenseMatrix] {
        &self.states[1..]
    }
}

/// Per-layer `(∂W, ∂b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(DenseMatrix, Vec<f64>)>,
}

/// Penalties added to the cross-entropy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Regularization {
    /// Coefficient of `½·Σ‖Wᵗ‖_F²`.
    pub weight_decay: f64,
    /// Coefficient of `Σ|Wᵗ|`; the sparsity-penalised pruning comparison.
    pub l1: f64,
}

impl GnnModel {
    pub fn new(layers: Vec<GnnLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return input("model needs at least one layer");
        }
        for (t, l) in layers.iter().enumerate() {
            if l.bias.len() != l.d_out() {
                return input(format!(
                    "layer {t}: bias length {} != {}",
                    l.bias.len(),
                    l.d_out()
                ));
            }
            if !l.weight.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return input(format!("layer {t} has non-finite parameters"));
            }
        }
        for (t, pair) in layers.windows(2).enumerate() {
            if pair[0].d_out() != pair[1].d_in() {
                return input(format!(
                    "layer {t} outputs {} features but layer {} expects {}",
                    pair[0].d_out(),
                    t + 1,
                    pair[1].d_in()
                ));
            }
        }
        Ok(Self { layers, activation })
    }

    /// Uniform `±√(6/(d_in+d_out))` weights, zero biases. `dims` lists the
    /// input width, hidden widths and class count.
    pub fn init(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return input("need at least input and output widths, all positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|d| {
                let bound = (6.0 / (d[0] + d[1]) as f64).sqrt();
                GnnLayer {
                    weight: DenseMatrix::from_fn(d[0], d[1], |_, _| rng.gen_range(-bound..=bound)),
                    bias: vec![0.0; d[1]],
                }
            })
            .collect();
        Self::new(layers, activation)
    }

    pub fn layers(&self) -> &[GnnLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Input width followed by each layer's output width.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].d_in())
            .chain(self.layers.iter().map(|l| l.d_out()))
            .collect()
    }

    /// Mutable weights of layer `t`; the shape must not change.
    pub fn weight_mut(&mut self, t: usize) -> &mut DenseMatrix {
        &mut self.layers[t].weight
    }

    pub fn bias_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.layers[t].bias
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, data: &NodeDataset) -> Result<ForwardPass> {
        if data.feature_dim() != self.layers[0].d_in() {
            return input(format!(
                "model expects {} input features, dataset has {}",
                self.layers[0].d_in(),
                data.feature_dim()
            ));
        }
        let last = self.layers.len() - 1;
        let mut states = vec![data.features.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (t, layer) in self.layers.iter().enumerate() {
            let xw = states[t].matmul_unchecked(&layer.weight);
            let z = data.propagation.mul_dense(&xw);
            let mut h = if t == last {
                z.clone()
            } else {
                z.map(|v| self.activation.apply(v))
            };
            for i in 0..h.rows() {
                for (v, b) in h.row_mut(i).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            pre.push(z);
            states.push(h);
        }
        Ok(ForwardPass {
            states,
            pre_activations: pre,
        })
    }

    /// Mean training cross-entropy plus penalties.
    pub fn loss(&self, data: &NodeDataset, reg: Regularization) -> Result<f64> {
        let pass = self.forward(data)?;
        let ce = cross_entropy(pass.logits(), &data.labels, &data.train_mask)?;
        Ok(ce + self.penalty(reg))
    }

    pub fn penalty(&self, reg: Regularization) -> f64 {
        let mut p = 0.0;
        for l in &self.layers {
            let w = l.weight.as_slice();
            if reg.weight_decay != 0.0 {
                p += 0.5 * reg.weight_decay * w.iter().map(|x| x * x).sum::<f64>();
            }
            if reg.l1 != 0.0 {
                p += reg.l1 * w.iter().map(|x| x.abs()).sum::<f64>();
            }
        }
        p
    }

    /// Loss and exact gradients by reverse-mode differentiation.
    pub fn backward(&self, data: &NodeDataset, reg: Regularization) -> Result<(f64, Gradients)> {
        let pass = self.forward(data)?;
        self.backward_from(data, &pass, reg)
    }

    pub(crate) fn backward_from(
        &self,
        data: &NodeDataset,
        pass: &ForwardPass,
        reg: Regularization,
    ) -> Result<(f64, Gradients)> {
        let logits = pass.logits();
        let n_train = NodeDataset::count(&data.train_mask);
        if n_train == 0 {
            return input("empty training mask");
        }
        // ∂CE/∂logits = (softmax − onehot)/n_train on training rows.
        let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
        let mut ce = 0.0;
        for i in (0..logits.rows()).filter(|&i| data.train_mask[i]) {
            let (probs, lse) = softmax_row(logits.row(i));
            ce += lse - logits.row(i)[data.labels[i]];
            let g = grad.row_mut(i);
            for (gj, pj) in g.iter_mut().zip(&probs) {
                *gj = pj / n_train as f64;
            }
            g[data.labels[i]] -= 1.0 / n_train as f64;
        }
        let loss = ce / n_train as f64 + self.penalty(reg);

        let last = self.layers.len() - 1;
        let mut out = Vec::with_capacity(self.layers.len());
        for t in (0..=last).rev() {
            let layer = &self.layers[t];
            let db: Vec<f64> = (0..grad.cols())
                .map(|j| (0..grad.rows()).map(|i| grad[(i, j)]).sum())
                .collect();
            let dz = if t == last {
                grad
            } else {
                let z = &pass.pre_activations[t];
                let mut d = grad;
                for (g, &zv) in d.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *g *= self.activation.derivative(zv);
                }
                d
            };
            let dxw = data.propagation.tr_mul_dense(&dz);
            let mut dw = pass.states[t].tr_matmul(&dxw);
            if reg.weight_decay != 0.0 || reg.l1 != 0.0 {
                for (g, &w) in dw.as_mut_slice().iter_mut().zip(layer.weight.as_slice()) {
                    *g += reg.weight_decay * w + reg.l1 * sign(w);
                }
            }
            grad = if t > 0 {
                dxw.matmul_tr(&layer.weight)
            } else {
                DenseMatrix::zeros(0, 0)
            };
            out.push((dw, db));
        }
        out.reverse();
        Ok((loss, Gradients { layers: out }))
    }

    /// Row-wise softmax of the logits.
    pub fn predict_proba(&self, data: &NodeDataset) -> Result<DenseMatrix> {
        let pass = self.forward(data)?;
        let logits = pass.logits();
        let mut probs = logits.clone();
        for i in 0..logits.rows() {
            let (p, _) = softmax_row(logits.row(i));
            probs.row_mut(i).copy_from_slice(&p);
        }
        Ok(probs)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Softmax probabilities and log-sum-exp of one row.
pub(crate) fn softmax_row(row: &[f64]) -> (Vec<f64>, f64) {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    (exps.iter().map(|e| e / s).collect(), m + s.ln())
}

/// Mean softmax cross-entropy over the rows selected by `mask`.
pub fn cross_entropy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let rows: Vec<usize> = (0..logits.rows()).filter(|&i| mask[i]).collect();
    if rows.is_empty() {
        return input("cross-entropy over an empty mask");
    }
    let total: f64 = rows
        .iter()
        .map(|&i| {
            let (_, lse) = softmax_row(logits.row(i));
            lse - logits.row(i)[labels[i]]
        })
        .sum();
    Ok(total / rows.len() as f64)
}

/// Fraction of masked rows whose arg-max logit is the label. An empty mask
/// scores 0.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        total += 1;
        let row = logits.row(i);
        let best = (0..row.len())
            .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        hit += usize::from(best == labels[i]);
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;

    fn tiny_dataset(
        propagation: DenseMatrix,
        features: DenseMatrix,
        labels: Vec<usize>,
    ) -> NodeDataset {
        let n = labels.len();
        let classes = labels.iter().max().unwrap() + 1;
        NodeDataset::new(
            CsrMatrix::from_dense(&propagation),
            features,
            labels,
            classes,
            vec![true; n],
            vec![false; n],
            vec![false; n],
        )
        .unwrap()
    }

    #[test]
    fn swish_values() {
        assert_eq!(swish(0.0), 0.0);
        assert!((swish(20.0) - 20.0).abs() < 1e-6);
        let h = 1e-6;
        let fd = (swish(h) - swish(-h)) / (2.0 * h);
        assert!((fd - 0.5).abs() < 1e-9);
        assert!((Activation::Swish.derivative(0.0) - 0.5).abs() < 1e-15);
        assert!(swish(-800.0).is_finite());
    }

    #[test]
    fn identity_everything_passes_features_through() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]).unwrap();
        let d = tiny_dataset(DenseMatrix::identity(2), x.clone(), vec![0, 1]);
        let m = GnnModel::new(
            vec![GnnLayer {
                weight: DenseMatrix::identity(2),
                bias: vec![0.0; 2],
            }],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(*m.forward(&d).unwrap().logits(), x);
    }

    #[test]
    fn zero_parameters_give_zero_states() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]).unwrap();
        let d = tiny_dataset(DenseMatrix::identity(2), x, vec![0, 1]);
        let zero = |i, o| GnnLayer {
            weight: DenseMatrix::zeros(i, o),
            bias: vec![0.0; o],
        };
        let m = GnnModel::new(vec![zero(2, 3), zero(3, 2)], Activation::Swish).unwrap();
        let pass = m.forward(&d).unwrap();
        assert!(pass.hidden_states().iter().all(|h| h.max_abs() == 0.0));
        // uniform logits: loss is ln C
        let loss = m.loss(&d, Regularization::default()).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn chain_and_shape_checks() {
        let l = |i, o| GnnLayer {
            weight: DenseMatrix::zeros(i, o),
            bias: vec![0.0; o],
        };
        assert!(GnnModel::new(vec![l(2, 3), l(4, 2)], Activation::Relu).is_err());
        assert!(GnnModel::new(vec![], Activation::Relu).is_err());
        let m = GnnModel::new(vec![l(3, 2)], Activation::Relu).unwrap();
        let d = tiny_dataset(
            DenseMatrix::identity(2),
            DenseMatrix::zeros(2, 2),
            vec![0, 1],
        );
        assert!(m.forward(&d).is_err());
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let logits = DenseMatrix::from_rows(&[[500.0, 0.0], [0.0, 500.0]]).unwrap();
        let ce = cross_entropy(&logits, &[0, 1], &[true, true]).unwrap();
        assert!(ce < 1e-100);
        assert!(cross_entropy(&logits, &[0, 1], &[false, false]).is_err());
        assert_eq!(accuracy(&logits, &[0, 0], &[true, true]), 0.5);
    }

    #[test]
    fn init_respects_glorot_bound() {
        let m = GnnModel::init(&[10, 6, 3], Activation::Swish, 3).unwrap();
        assert_eq!(m.dims(), vec![10, 6, 3]);
        let bound = (6.0f64 / 16.0).sqrt();
        assert!(m.layers()[0].weight.max_abs() <= bound);
        assert_eq!(
            m,
            GnnModel::init(&[10, 6, 3], Activation::Swish, 3).unwrap()
        );
    }
}
