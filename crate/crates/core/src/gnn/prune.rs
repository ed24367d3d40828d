//! Train, shrink to a planned width, fine-tune.

use std::str::FromStr;

use crate::data::NodeDataset;
use crate::error::{input, Error, Result};
use crate::gnn::model::{Activation, GnnLayer, GnnModel};
use crate::gnn::train::{
    evaluate, train, train_with_hooks, EpochHook, Evaluation, TrainConfig, TrainOutcome,
};
use crate::linalg::{complete_orthonormal, singular_values, svd, DenseMatrix};
use crate::lowrank::{estimate_rank, plan_from_ranks, WidthPlan, DEFAULT_ENERGY_THRESHOLD};

/// Which matrices the width plan is estimated from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlanSource {
    /// Each hidden layer's activations after stage-one training.
    #[default]
    Hidden,
    /// The input feature matrix, applied to every hidden layer.
    Features,
    /// The smaller of the two, per layer.
    Both,
}

impl FromStr for PlanSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hidden" => Ok(Self::Hidden),
            "features" => Ok(Self::Features),
            "both" => Ok(Self::Both),
            _ => input(format!(
                "unknown plan source {s:?} (hidden, features, both)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneConfig {
    pub energy_threshold: f64,
    pub finetune_epochs: usize,
    pub source: PlanSource,
    /// Defaults to the class count; lower values are raised to it.
    pub min_width: Option<usize>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            energy_threshold: DEFAULT_ENERGY_THRESHOLD,
            finetune_epochs: 50,
            source: PlanSource::Hidden,
            min_width: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PruneOutcome {
    /// Stage one: the over-parameterised model.
    pub unpruned: TrainOutcome,
    pub unpruned_eval: Evaluation,
    pub plan: WidthPlan,
    /// Stage two output, before fine-tuning.
    pub shrunk: GnnModel,
    /// Stage three.
    pub pruned: TrainOutcome,
    pub pruned_eval: Evaluation,
}

/// Runs all three stages. `hidden_widths` excludes the input and class
/// dimensions; at least one hidden layer is required.
pub fn prune_pipeline(
    data: &NodeDataset,
    hidden_widths: &[usize],
    activation: Activation,
    config: &TrainConfig,
    prune: &PruneConfig,
) -> Result<PruneOutcome> {
    prune_pipeline_with_hooks(data, hidden_widths, activation, config, prune, &mut [])
}

/// [`prune_pipeline`] with hooks active during fine-tuning only.
pub fn prune_pipeline_with_hooks(
    data: &NodeDataset,
    hidden_widths: &[usize],
    activation: Activation,
    config: &TrainConfig,
    prune: &PruneConfig,
    finetune_hooks: &mut [&mut dyn EpochHook],
) -> Result<PruneOutcome> {
    if hidden_widths.is_empty() {
        return input("pruning needs at least one hidden layer");
    }
    let mut dims = vec![data.feature_dim()];
    dims.extend_from_slice(hidden_widths);
    dims.push(data.class_count);

    let unpruned = train(
        GnnModel::init(&dims, activation, config.seed)?,
        data,
        config,
    )?;
    let reg = config.regularization();
    let unpruned_eval = evaluate(&unpruned.model, data, reg)?;

    let plan = plan_for(&unpruned.model, data, prune)?;
    let shrunk = shrink_model(&unpruned.model, &plan.widths)?;
    let finetune = TrainConfig {
        epochs: prune.finetune_epochs,
        ..config.clone()
    };
    let pruned = train_with_hooks(shrunk.clone(), data, &finetune, finetune_hooks)?;
    let pruned_eval = evaluate(&pruned.model, data, reg)?;
    log::info!(
        "pruned widths {:?} -> {:?}; test acc {:.4} -> {:.4}",
        hidden_widths,
        plan.widths,
        unpruned_eval.test_acc,
        pruned_eval.test_acc
    );
    Ok(PruneOutcome {
        unpruned,
        unpruned_eval,
        plan,
        shrunk,
        pruned,
        pruned_eval,
    })
}

/// Width plan for the hidden layers of a trained model. Planned widths never
/// exceed the current ones; `source_ranks` keeps the raw estimates.
pub fn plan_for(model: &GnnModel, data: &NodeDataset, prune: &PruneConfig) -> Result<WidthPlan> {
    let classes = data.class_count;
    let min_width = match prune.min_width {
        Some(m) if m < classes => {
            log::warn!("min width {m} is below the class count; using {classes}");
            classes
        }
        Some(m) => m,
        None => classes,
    };
    let current = &model.dims()[1..model.depth()];
    if current.is_empty() {
        return input("model has no hidden layer to plan");
    }
    let rank_of = |m: &DenseMatrix| estimate_rank(&singular_values(m)?, prune.energy_threshold);
    let feature_rank = match prune.source {
        PlanSource::Hidden => None,
        _ => Some(rank_of(&data.features)?),
    };
    let hidden_ranks = match prune.source {
        PlanSource::Features => None,
        _ => {
            let pass = model.forward(data)?;
            let hidden = &pass.hidden_states()[..current.len()];
            Some(hidden.iter().map(rank_of).collect::<Result<Vec<_>>>()?)
        }
    };
    let raw: Vec<usize> = (0..current.len())
        .map(|t| match (feature_rank, &hidden_ranks) {
            (Some(f), Some(h)) => f.min(h[t]),
            (Some(f), None) => f,
            (None, Some(h)) => h[t],
            (None, None) => unreachable!(),
        })
        .collect();
    let capped: Vec<usize> = raw.iter().zip(current).map(|(&r, &c)| r.min(c)).collect();
    let mut plan = plan_from_ranks(capped, prune.energy_threshold, min_width);
    for (w, &c) in plan.widths.iter_mut().zip(current) {
        // the class floor may exceed a deliberately narrow layer
        *w = (*w).min(c.max(min_width));
    }
    plan.source_ranks = raw;
    log::info!(
        "raw ranks {:?}, planned widths {:?}",
        plan.source_ranks,
        plan.widths
    );
    Ok(plan)
}

/// Projects hidden layer `t`'s output onto the top-`k_t` right singular
/// directions `V_k` of `Wᵗ`: `Wᵗ ← Wᵗ·V_k`, `bᵗ ← V_kᵀ·bᵗ`,
/// `Wᵗ⁺¹ ← V_kᵀ·Wᵗ⁺¹`. Widths not smaller than the current ones are kept.
pub fn shrink_model(model: &GnnModel, hidden_widths: &[usize]) -> Result<GnnModel> {
    let depth = model.depth();
    if hidden_widths.len() + 1 != depth {
        return input(format!(
            "{} widths for a model with {} hidden layers",
            hidden_widths.len(),
            depth - 1
        ));
    }
    let mut layers: Vec<GnnLayer> = model.layers().to_vec();
    for (t, &k) in hidden_widths.iter().enumerate() {
        let d = layers[t].d_out();
        if k == 0 {
            return input("hidden width must be positive");
        }
        if k >= d {
            continue;
        }
        let vk = top_right_singular_vectors(&layers[t].weight, k)?;
        let w = layers[t].weight.matmul_unchecked(&vk);
        let b = vk.tr_matmul(&DenseMatrix::from_vec_unchecked(
            d,
            1,
            layers[t].bias.clone(),
        ));
        layers[t] = GnnLayer {
            weight: w,
            bias: b.into_vec(),
        };
        let next = vk.tr_matmul(&layers[t + 1].weight);
        layers[t + 1].weight = next;
    }
    GnnModel::new(layers, model.activation())
}

/// `d_out × k` orthonormal columns: the leading right singular vectors of
/// `w`, completed when `k` exceeds `min(d_in, d_out)`.
fn top_right_singular_vectors(w: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let s = svd(w)?;
    let d = w.cols();
    let mut basis: Vec<Vec<f64>> = (0..k.min(s.v.cols())).map(|j| s.v.column(j)).collect();
    complete_orthonormal(&mut basis, d, k);
    Ok(DenseMatrix::from_columns(d, &basis))
}
