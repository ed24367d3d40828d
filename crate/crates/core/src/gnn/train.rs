use std::fmt::Write as _;

use crate::data::NodeDataset;
use crate::error::{input, Error, Result};
use crate::gnn::model::{accuracy, cross_entropy, GnnModel, Gradients, Regularization};
use crate::linalg::{format_f64, singular_values, DenseMatrix};

/// How many leading singular values of each hidden state are logged.
pub const SPECTRA_TOP_K: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// L1 penalty on weights; zero except for the sparsity-pruning comparison.
    pub l1: f64,
    pub seed: u64,
    /// Record per-layer singular values every epoch.
    pub track_spectra: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.2,
            momentum: 0.9,
            weight_decay: 5e-4,
            l1: 0.0,
            seed: 0,
            track_spectra: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return input(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return input(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0) || !(self.l1 >= 0.0) {
            return input("penalties must be non-negative");
        }
        Ok(())
    }

    pub fn regularization(&self) -> Regularization {
        Regularization {
            weight_decay: self.weight_decay,
            l1: self.l1,
        }
    }
}

/// Momentum buffers, shaped like the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity {
    layers: Vec<(DenseMatrix, Vec<f64>)>,
}

impl Velocity {
    pub fn zeros_like(model: &GnnModel) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| {
                    (
                        DenseMatrix::zeros(l.d_in(), l.d_out()),
                        vec![0.0; l.d_out()],
                    )
                })
                .collect(),
        }
    }
}

/// `v ← μ·v − lr·g; θ ← θ + v`, applied to every weight and bias.
pub fn sgd_step(
    model: &mut GnnModel,
    grads: &Gradients,
    velocity: &mut Velocity,
    config: &TrainConfig,
) {
    let (mu, lr) = (config.momentum, config.lr);
    for (t, ((gw, gb), (vw, vb))) in grads
        .layers
        .iter()
        .zip(velocity.layers.iter_mut())
        .enumerate()
    {
        let w = model.weight_mut(t).as_mut_slice();
        for ((p, v), g) in w.iter_mut().zip(vw.as_mut_slice()).zip(gw.as_slice()) {
            *v = mu * *v - lr * g;
            *p += *v;
        }
        let b = model.bias_mut(t);
        for ((p, v), g) in b.iter_mut().zip(vb.iter_mut()).zip(gb) {
            *v = mu * *v - lr * g;
            *p += *v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl MetricHistory {
    /// `epoch,train_loss,val_loss,val_acc`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for m in &self.epochs {
            writeln!(
                s,
                "{},{},{},{}",
                m.epoch,
                format_f64(m.train_loss),
                format_f64(m.val_loss),
                format_f64(m.val_acc)
            )
            .unwrap();
        }
        s
    }

    pub fn best_val_acc(&self) -> Option<f64> {
        self.epochs.iter().map(|m| m.val_acc).reduce(f64::max)
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

/// Leading singular values of one layer's hidden state at one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectraRecord {
    pub epoch: usize,
    /// 1-based layer index (the output of layer `t` is hidden state `t + 1`).
    pub layer: usize,
    /// Descending; shorter than [`SPECTRA_TOP_K`] when the state is narrower.
    pub values: Vec<f64>,
}

/// Hidden-state singular value trajectories.
///
/// These are singular values, not eigenvalues: hidden states are
/// rectangular (nodes × width), so singular values are the well-defined
/// spectral summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectraLog {
    pub records: Vec<SpectraRecord>,
}

impl SpectraLog {
    /// `epoch,layer,s1,s2,s3,s4,s5`; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,layer,s1,s2,s3,s4,s5\n");
        for r in &self.records {
            let mut cells: Vec<String> = r.values.iter().map(|&v| format_f64(v)).collect();
            cells.resize(SPECTRA_TOP_K, String::new());
            writeln!(s, "{},{},{}", r.epoch, r.layer, cells.join(",")).unwrap();
        }
        s
    }

    /// Appends the leading singular values of each state, labelled `epoch`.
    pub fn record(&mut self, epoch: usize, states: &[DenseMatrix]) -> Result<()> {
        for (t, h) in states.iter().enumerate() {
            let mut values = singular_values(h)?;
            values.truncate(SPECTRA_TOP_K);
            self.records.push(SpectraRecord {
                epoch,
                layer: t + 1,
                values,
            });
        }
        Ok(())
    }
}

/// Called after every optimiser step. Returning `true` signals that the
/// model was edited, which resets the momentum buffers.
pub trait EpochHook {
    fn after_epoch(
        &mut self,
        epoch: usize,
        model: &mut GnnModel,
        data: &NodeDataset,
    ) -> Result<bool>;
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub history: MetricHistory,
    pub spectra: SpectraLog,
}

/// Evaluates the model on every split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

pub fn evaluate(model: &GnnModel, data: &NodeDataset, reg: Regularization) -> Result<Evaluation> {
    let pass = model.forward(data)?;
    evaluate_pass(model, data, pass.logits(), reg)
}

fn evaluate_pass(
    model: &GnnModel,
    data: &NodeDataset,
    logits: &DenseMatrix,
    reg: Regularization,
) -> Result<Evaluation> {
    let train_loss = cross_entropy(logits, &data.labels, &data.train_mask)? + model.penalty(reg);
    let val_loss = if NodeDataset::count(&data.val_mask) > 0 {
        cross_entropy(logits, &data.labels, &data.val_mask)?
    } else {
        f64::NAN
    };
    Ok(Evaluation {
        train_loss,
        val_loss,
        train_acc: accuracy(logits, &data.labels, &data.train_mask),
        val_acc: accuracy(logits, &data.labels, &data.val_mask),
        test_acc: accuracy(logits, &data.labels, &data.test_mask),
    })
}

/// Full-batch SGD with momentum for `config.epochs` epochs.
pub fn train(model: GnnModel, data: &NodeDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_hooks(model, data, config, &mut [])
}

/// [`train`] with callbacks run after each epoch's update, in order.
///
/// Each epoch computes gradients on the current model, takes one step, then
/// evaluates the updated model; the recorded metrics and spectra describe
/// the model at the end of the epoch.
pub fn train_with_hooks(
    mut model: GnnModel,
    data: &NodeDataset,
    config: &TrainConfig,
    hooks: &mut [&mut dyn EpochHook],
) -> Result<TrainOutcome> {
    config.validate()?;
    let reg = config.regularization();
    let mut velocity = Velocity::zeros_like(&model);
    let mut history = MetricHistory::default();
    let mut spectra = SpectraLog::default();
    for epoch in 1..=config.epochs {
        let (loss, grads) = model.backward(data, reg)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "loss became {loss} at epoch {epoch}"
            )));
        }
        sgd_step(&mut model, &grads, &mut velocity, config);

        let mut edited = false;
        for hook in hooks.iter_mut() {
            edited |= hook.after_epoch(epoch, &mut model, data)?;
        }
        if edited {
            velocity = Velocity::zeros_like(&model);
        }

        let pass = model.forward(data)?;
        let eval = evaluate_pass(&model, data, pass.logits(), reg)?;
        if !eval.train_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "loss became {} after the update at epoch {epoch}",
                eval.train_loss
            )));
        }
        history.epochs.push(EpochMetrics {
            epoch,
            train_loss: eval.train_loss,
            val_loss: eval.val_loss,
            val_acc: eval.val_acc,
            test_acc: eval.test_acc,
        });
        if config.track_spectra {
            spectra.record(epoch, pass.hidden_states())?;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        spectra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sbm, split, Propagation, SbmParams, SplitSizes};
    use crate::gnn::model::{Activation, GnnLayer};

    fn sbm_dataset(seed: u64) -> NodeDataset {
        let raw = generate_sbm(&SbmParams {
            seed,
            ..Default::default()
        })
        .unwrap();
        split(
            &raw,
            SplitSizes {
                per_class_train: 20,
                val: 40,
                test: 120,
            },
            seed,
            Propagation::Renormalized,
        )
        .unwrap()
    }

    fn scalar_model(w: f64) -> GnnModel {
        GnnModel::new(
            vec![GnnLayer {
                weight: DenseMatrix::new(1, 1, vec![w]).unwrap(),
                bias: vec![0.0],
            }],
            Activation::Identity,
        )
        .unwrap()
    }

    fn scalar_grads(g: f64) -> Gradients {
        Gradients {
            layers: vec![(DenseMatrix::new(1, 1, vec![g]).unwrap(), vec![0.0])],
        }
    }

    #[test]
    fn plain_sgd_step() {
        let mut m = scalar_model(3.0);
        let mut v = Velocity::zeros_like(&m);
        let cfg = TrainConfig {
            lr: 1.0,
            momentum: 0.0,
            ..Default::default()
        };
        sgd_step(&mut m, &scalar_grads(1.0), &mut v, &cfg);
        assert_eq!(m.layers()[0].weight[(0, 0)], 2.0);
        let mut fresh = Velocity::zeros_like(&m);
        sgd_step(&mut m, &scalar_grads(0.0), &mut fresh, &cfg);
        assert_eq!(m.layers()[0].weight[(0, 0)], 2.0);
    }

    #[test]
    fn momentum_matches_unrolled_recurrence() {
        let (mu, lr, g1, g2, w0) = (0.9, 0.1, 0.7, -0.3, 1.5);
        let mut m = scalar_model(w0);
        let mut v = Velocity::zeros_like(&m);
        let cfg = TrainConfig {
            lr,
            momentum: mu,
            ..Default::default()
        };
        sgd_step(&mut m, &scalar_grads(g1), &mut v, &cfg);
        sgd_step(&mut m, &scalar_grads(g2), &mut v, &cfg);
        let v1 = -lr * g1;
        let v2 = mu * v1 - lr * g2;
        let want = w0 + v1 + v2;
        assert!((m.layers()[0].weight[(0, 0)] - want).abs() <= 1e-12);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let data = sbm_dataset(3);
        let model = GnnModel::init(&[16, 8, 2], Activation::Swish, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            lr: 0.0,
            ..Default::default()
        };
        let out = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(out.model, model);
        let losses: Vec<f64> = out.history.epochs.iter().map(|m| m.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn training_is_deterministic_and_spectra_descend() {
        let data = sbm_dataset(5);
        let cfg = TrainConfig {
            epochs: 15,
            ..Default::default()
        };
        let run = || {
            train(
                GnnModel::init(&[16, 8, 2], Activation::Swish, 9).unwrap(),
                &data,
                &cfg,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.history, b.history);
        assert_eq!(a.spectra, b.spectra);
        assert_eq!(a.spectra.records.len(), 30);
        for r in &a.spectra.records {
            assert!(r.values.iter().all(|&v| v >= 0.0));
            assert!(r.values.windows(2).all(|w| w[0] >= w[1]));
        }
        let csv = a.spectra.to_csv();
        assert!(csv.starts_with("epoch,layer,s1,s2,s3,s4,s5\n1,1,"));
        // the output layer has only two columns, so three cells stay empty
        assert!(csv.lines().nth(2).unwrap().ends_with(",,,"));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let data = sbm_dataset(1);
        let m = GnnModel::init(&[16, 2], Activation::Swish, 0).unwrap();
        for cfg in [
            TrainConfig {
                lr: -1.0,
                ..Default::default()
            },
            TrainConfig {
                momentum: 1.0,
                ..Default::default()
            },
            TrainConfig {
                weight_decay: -1.0,
                ..Default::default()
            },
        ] {
            assert!(train(m.clone(), &data, &cfg).is_err());
        }
    }

    #[test]
    fn divergence_is_reported() {
        let data = sbm_dataset(2);
        let m = GnnModel::init(&[16, 8, 2], Activation::Identity, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            lr: 1e6,
            momentum: 0.0,
            ..Default::default()
        };
        assert!(matches!(train(m, &data, &cfg), Err(Error::Diverged(_))));
    }

    #[test]
    fn metric_csv_header() {
        let h = MetricHistory {
            epochs: vec![EpochMetrics {
                epoch: 1,
                train_loss: 0.5,
                val_loss: 0.25,
                val_acc: 1.0,
                test_acc: 1.0,
            }],
        };
        assert_eq!(
            h.to_csv(),
            "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,1\n"
        );
    }
}
