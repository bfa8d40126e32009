use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    metrics, AdamConfig, AdamState, PlateauSchedule, PreparedData, Regime, Split, TrainError,
};
use crate::fusion::AffinityModel;
use crate::gnn::ParamStore;
use crate::numcore::{Tape, Tensor};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub lr_decay: f64,
    pub patience: usize,
    /// Seeds the per-epoch shuffle of training pairs.
    pub seed: u64,
    pub execution: Execution,
}

impl TrainConfig {
    /// Learning rate used by default for a split regime.
    pub fn default_learning_rate(regime: Regime) -> f64 {
        if regime.is_cold() {
            1e-3
        } else {
            5e-4
        }
    }

    pub fn for_regime(regime: Regime, seed: u64) -> Self {
        Self {
            learning_rate: Self::default_learning_rate(regime),
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::Config(what.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning-rate decay must lie in (0, 1]");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 128,
            learning_rate: 5e-4,
            adam: AdamConfig::default(),
            lr_decay: 0.8,
            patience: 40,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean squared error over the epoch's mini-batches, as seen before each update.
    pub train_mse: f64,
    pub val_mse: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Parameters at the best validation epoch; also left in the model.
    pub best_params: ParamStore,
    pub steps: u64,
}

/// Squared-error loss and parameter gradients of one pair.
fn sample_gradient<M: AffinityModel + ?Sized>(
    model: &M,
    data: &PreparedData,
    index: usize,
) -> Result<(f64, Vec<Tensor>), TrainError> {
    let s = data.samples[index];
    let tape = Tape::new();
    let p = model.params().bind(&tape);
    let pred = model.forward(&tape, &p, &data.drugs[s.drug], &data.proteins[s.target])?;
    let loss = pred.mse_loss(tape.constant(Tensor::scalar(s.affinity)))?;
    let grads = tape.backward(loss)?;
    Ok((loss.value().item(), p.gradients(&grads)))
}

/// Mean loss and mean gradient over `batch`. Per-pair work may run in
/// parallel, but the sum is always taken in batch order.
pub fn batch_gradient<M: AffinityModel + ?Sized>(
    model: &M,
    data: &PreparedData,
    batch: &[usize],
    execution: Execution,
) -> Result<(f64, Vec<Tensor>), TrainError> {
    assert!(!batch.is_empty(), "empty batch");
    let results = par::map(execution, batch, |&i| sample_gradient(model, data, i));
    let mut iter = results.into_iter();
    let (mut loss, mut total) = iter.next().expect("non-empty")?;
    for r in iter {
        let (l, grads) = r?;
        loss += l;
        for (acc, g) in total.iter_mut().zip(&grads) {
            for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += v;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut total {
        g.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss * scale, total))
}

/// Predictions for the given pairs, in order.
pub fn predict_pairs<M: AffinityModel + ?Sized>(
    model: &M,
    data: &PreparedData,
    indices: &[usize],
    execution: Execution,
) -> Result<Vec<f64>, TrainError> {
    par::map(execution, indices, |&i| {
        let s = data.samples[i];
        model
            .predict(&data.drugs[s.drug], &data.proteins[s.target])
            .map_err(TrainError::from)
    })
    .into_iter()
    .collect()
}

/// Mean squared error of the model over the given pairs.
pub fn evaluate_mse<M: AffinityModel + ?Sized>(
    model: &M,
    data: &PreparedData,
    indices: &[usize],
    execution: Execution,
) -> Result<f64, TrainError> {
    let pred = predict_pairs(model, data, indices, execution)?;
    Ok(metrics::mse(&pred, &data.truths(indices))?)
}

/// Mini-batch Adam on the training pairs with plateau learning-rate decay on
/// validation MSE. The model ends up holding its best-validation parameters.
pub fn train<M: AffinityModel + ?Sized>(
    model: &mut M,
    data: &PreparedData,
    split: &Split,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(model, data, split, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<M, F>(
    model: &mut M,
    data: &PreparedData,
    split: &Split,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    M: AffinityModel + ?Sized,
    F: FnMut(&EpochRecord),
{
    config.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if split.val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params(), config.adam);
    let mut schedule = PlateauSchedule::new(config.learning_rate, config.lr_decay, config.patience);
    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;

    for epoch in 1..=config.epochs {
        let lr = schedule.lr();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grads) = batch_gradient(&*model, data, batch, config.execution)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(model.params_mut(), &grads, lr)?;
        }
        let train_mse = loss_sum / order.len() as f64;
        let val_mse = evaluate_mse(&*model, data, &split.val, config.execution)?;
        if !val_mse.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        if best.as_ref().is_none_or(|(_, b, _)| val_mse < *b) {
            best = Some((epoch, val_mse, model.params().clone()));
        }
        schedule.observe(val_mse);
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
        };
        log::debug!("epoch {epoch}: train mse {train_mse:.6}, val mse {val_mse:.6}, lr {lr:e}");
        on_epoch(&record);
        history.push(record);
    }

    let (best_epoch, best_val_mse, best_params) = best.expect("at least one epoch");
    *model.params_mut() = best_params.clone();
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_mse,
        best_params,
        steps: adam.step,
    })
}
