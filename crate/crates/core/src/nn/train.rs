use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::argmax;
use super::{Gradients, Model, NetError, Real, Sgd, Tensor3};

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<R> {
    pub input: Tensor3<R>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub seconds: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {:>4}  lr {:.3e}  loss {:.6}  train_acc {:.4}",
            self.epoch, self.lr, self.loss, self.train_accuracy
        )?;
        if let Some(e) = self.eval_accuracy {
            write!(f, "  eval_acc {e:.4}")?;
        }
        write!(f, "  time {:.2}s", self.seconds)
    }
}

/// Sample order for `epoch`, a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    order.shuffle(&mut rng);
    order
}

/// One pass over `data` in mini-batches. Per-sample gradients may be computed
/// in parallel but are always summed in batch order, so the result does not
/// depend on the thread count.
pub fn train_epoch<R: Real>(
    model: &mut Model<R>,
    opt: &mut Sgd<R>,
    data: &[Example<R>],
    batch_size: usize,
    epoch: usize,
    seed: u64,
) -> Result<EpochLog, NetError> {
    if data.is_empty() {
        return Err(NetError::ShapeMismatch("empty training set".into()));
    }
    let start = Instant::now();
    let lr = opt.config.lr_at(epoch);
    let order = epoch_order(data.len(), seed, epoch);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for batch in order.chunks(batch_size.max(1)) {
        let results: Vec<(R, Vec<R>, Gradients<R>)> = batch
            .par_iter()
            .map(|&i| model.loss_and_gradients(&data[i].input, data[i].label))
            .collect::<Result<_, _>>()?;
        let mut total = Gradients::zeros_like(model);
        for (&i, (loss, logits, g)) in batch.iter().zip(&results) {
            if !loss.is_finite() {
                return Err(NetError::NonFinite(format!("loss at epoch {epoch}")));
            }
            loss_sum += loss.as_f64();
            correct += usize::from(argmax(logits) == data[i].label);
            total.add_assign(g);
        }
        total.scale(R::one() / R::of(batch.len() as f64));
        opt.step(model, &total, lr)?;
    }
    Ok(EpochLog {
        epoch,
        lr,
        loss: loss_sum / data.len() as f64,
        train_accuracy: correct as f64 / data.len() as f64,
        eval_accuracy: None,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Top-1 predictions, in input order.
pub fn predict<R: Real>(model: &Model<R>, data: &[Example<R>]) -> Result<Vec<usize>, NetError> {
    data.par_iter()
        .map(|e| model.forward(&e.input).map(|l| argmax(&l)))
        .collect()
}

pub fn accuracy<R: Real>(model: &Model<R>, data: &[Example<R>]) -> Result<f64, NetError> {
    if data.is_empty() {
        return Err(NetError::ShapeMismatch("empty evaluation set".into()));
    }
    let pred = predict(model, data)?;
    let hits = pred.iter().zip(data).filter(|(p, e)| **p == e.label).count();
    Ok(hits as f64 / data.len() as f64)
}
