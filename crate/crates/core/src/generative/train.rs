use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{exact_distribution, forward, gradient_weighted, RnnParams};
use crate::error::{Error, Result};
use crate::povm::OutcomeDataset;
use crate::scalar::Real;

/// Optimizer and stopping settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the training loss (mean NLL) is at or below this value.
    pub loss_threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub hidden_size: usize,
    /// Share of shots held out to select the returned parameters (0 disables).
    pub validation_fraction: f64,
    /// Stop after this many epochs without improvement of the monitored loss (0 disables).
    pub patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            loss_threshold: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden_size: 32,
            validation_fraction: 0.0,
            patience: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 || self.hidden_size == 0 {
            return bad("batch_size and hidden_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

/// Why training ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    LossThreshold,
    Patience,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    /// Values returned by the per-epoch observer, if any.
    pub metrics: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub optimizer: String,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stop: StopReason,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct TrainedModel<T> {
    pub params: RnnParams<T>,
    pub trace: TrainingTrace,
}

/// Mean negative log-likelihood of `(sequence, count)` pairs.
pub fn mean_nll<T: Real>(params: &RnnParams<T>, counts: &[(Vec<u8>, usize)]) -> Result<T> {
    let total: usize = counts.iter().map(|c| c.1).sum();
    if total == 0 {
        return Err(Error::Validation("mean NLL of an empty dataset".into()));
    }
    let n = counts[0].0.len();
    let k = params.alphabet();
    let space = u32::try_from(n).ok().and_then(|n| k.checked_pow(n));
    let mut acc = T::zero();
    match space {
        // enumerating every prefix once is cheaper than running each sequence
        Some(s) if s <= counts.len() * n => {
            let dist = exact_distribution(params, n)?;
            for (seq, c) in counts {
                acc -= T::lit(*c as f64) * dist.prob(seq)?.ln();
            }
        }
        _ => {
            for (seq, c) in counts {
                acc += T::lit(*c as f64) * forward(params, seq)?.1;
            }
        }
    }
    Ok(acc / T::lit(total as f64))
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    lr: T,
    b1: T,
    b2: T,
    eps: T,
}

impl<T: Real> Adam<T> {
    fn new(len: usize, cfg: &TrainingConfig) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
            lr: T::lit(cfg.learning_rate),
            b1: T::lit(cfg.beta1),
            b2: T::lit(cfg.beta2),
            eps: T::lit(cfg.epsilon),
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let c1 = T::one() - self.b1.powi(self.t);
        let c2 = T::one() - self.b2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.b1 * self.m[i] + (T::one() - self.b1) * g;
            self.v[i] = self.b2 * self.v[i] + (T::one() - self.b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn counts_of(d: &OutcomeDataset, idx: &[usize]) -> Vec<(Vec<u8>, usize)> {
    d.select(idx).unique_counts()
}

/// Fits an [`RnnParams`] to the shots of `data` with Adam on mini-batches.
pub fn train<T: Real>(data: &OutcomeDataset, cfg: &TrainingConfig) -> Result<TrainedModel<T>> {
    train_observed(data, cfg, |_, _: &RnnParams<T>| Vec::new())
}

/// [`train`] with an observer called after every epoch; the name/value pairs
/// it returns are stored in that epoch's record.
pub fn train_observed<T: Real, F>(
    data: &OutcomeDataset,
    cfg: &TrainingConfig,
    mut observer: F,
) -> Result<TrainedModel<T>>
where
    F: FnMut(usize, &RnnParams<T>) -> Vec<(String, f64)>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    let mut params = RnnParams::<T>::init(cfg.hidden_size, data.alphabet(), cfg.seed)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    split_rng.set_stream(2);
    let n_val = (data.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (train_idx, val_idx) = if n_val > 0 && n_val < data.len() {
        order.shuffle(&mut split_rng);
        let (v, t) = order.split_at(n_val);
        (t.to_vec(), v.to_vec())
    } else {
        (order, Vec::new())
    };
    let train_counts = counts_of(data, &train_idx);
    let val_counts = if val_idx.is_empty() {
        None
    } else {
        Some(counts_of(data, &val_idx))
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut adam = Adam::new(params.len(), cfg);
    let mut epochs = Vec::new();
    let mut best: Option<(T, usize, RnnParams<T>)> = None;
    let mut since_best = 0;
    let mut stop = StopReason::MaxEpochs;
    let mut steps = 0;
    let mut batch_order = train_idx.clone();

    for epoch in 1..=cfg.max_epochs {
        batch_order.shuffle(&mut shuffle_rng);
        for chunk in batch_order.chunks(cfg.batch_size) {
            // identical shots in a batch share one backward pass
            let mut keys: Vec<(usize, usize)> =
                chunk.iter().map(|&i| (data.outcome_index(i), i)).collect();
            keys.sort_unstable();
            let w = T::one() / T::lit(chunk.len() as f64);
            let mut batch: Vec<(&[u8], T)> = Vec::new();
            let mut last = None;
            for (key, i) in keys {
                if last == Some(key) {
                    batch.last_mut().expect("nonempty").1 += w;
                } else {
                    batch.push((data.shot(i), w));
                    last = Some(key);
                }
            }
            let (_, grad) = gradient_weighted(&params, &batch)?;
            adam.step(params.as_flat_mut(), &grad);
            steps += 1;
        }

        let train_loss = mean_nll(&params, &train_counts)?;
        let val_loss = match &val_counts {
            Some(v) => Some(mean_nll(&params, v)?),
            None => None,
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() || !train_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss.as_f64(),
            });
        }
        let metrics = observer(epoch, &params);
        epochs.push(EpochRecord {
            epoch,
            train_loss: train_loss.as_f64(),
            validation_loss: val_loss.map(|v| v.as_f64()),
            metrics,
        });
        match &best {
            Some((b, _, _)) if monitored >= *b => since_best += 1,
            _ => {
                best = Some((monitored, epoch, params.clone()));
                since_best = 0;
            }
        }
        if train_loss <= T::lit(cfg.loss_threshold) {
            stop = StopReason::LossThreshold;
            break;
        }
        if cfg.patience > 0 && since_best >= cfg.patience {
            stop = StopReason::Patience;
            break;
        }
    }

    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params),
    };
    Ok(TrainedModel {
        params,
        trace: TrainingTrace {
            optimizer: format!(
                "adam(lr={}, beta1={}, beta2={}, eps={})",
                cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon
            ),
            epochs,
            best_epoch,
            stop,
            steps,
        },
    })
}
