use super::{NetError, Real};

pub fn softmax<R: Real>(logits: &[R]) -> Vec<R> {
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    let exp: Vec<R> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: R = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, stabilized by subtracting the max logit.
pub fn cross_entropy<R: Real>(logits: &[R], label: usize) -> Result<R, NetError> {
    if label >= logits.len() {
        return Err(NetError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<R>().ln() + max;
    Ok(lse - logits[label])
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad<R: Real>(logits: &[R], label: usize) -> Result<Vec<R>, NetError> {
    if label >= logits.len() {
        return Err(NetError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let mut g = softmax(logits);
    g[label] -= R::one();
    Ok(g)
}

/// Index of the largest logit; ties go to the lower class index.
pub fn argmax<R: Real>(logits: &[R]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}
