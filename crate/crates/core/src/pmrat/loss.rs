//! Attack-aware loss: hard-example selection, adaptive weighting and the
//! perturbation-budget schedule.

use crate::error::{Error, Result};
use crate::model::{DenseNet, LossGrads};

/// `beta * difficulty / max_difficulty`, clamped to `[0, beta]`.
pub fn adaptive_lambda(attack_difficulty: f64, max_difficulty: f64, beta: f64) -> Result<f64> {
    if !(max_difficulty > 0.0) {
        return Err(Error::domain(format!(
            "max difficulty must be positive, got {max_difficulty}"
        )));
    }
    Ok((beta * attack_difficulty / max_difficulty).clamp(0.0, beta))
}

/// Indices of the `ceil(frac * n)` largest losses, returned in ascending
/// index order. Equal losses prefer the lower index.
pub fn ohem_select(per_sample_losses: &[f64], frac: f64) -> Result<Vec<usize>> {
    if per_sample_losses.is_empty() {
        return Err(Error::domain("hard-example selection on an empty batch"));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::domain(format!("OHEM fraction {frac} not in (0, 1]")));
    }
    let n = per_sample_losses.len();
    let k = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        per_sample_losses[b]
            .total_cmp(&per_sample_losses[a])
            .then(a.cmp(&b))
    });
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Per-sample weights realising `mean CE + lambda * mean CE over hard_set`.
pub fn ohem_weights(n: usize, hard_set: &[usize], lambda: f64) -> Result<Vec<f64>> {
    let mut w = vec![1.0; n];
    if hard_set.is_empty() || lambda == 0.0 {
        return Ok(w);
    }
    let boost = lambda * n as f64 / hard_set.len() as f64;
    for &i in hard_set {
        *w.get_mut(i)
            .ok_or_else(|| Error::domain(format!("hard index {i} outside batch of {n}")))? += boost;
    }
    Ok(w)
}

/// Batch-mean cross-entropy plus `lambda` times the mean over `hard_set`,
/// with gradients.
pub fn total_loss(
    net: &DenseNet,
    inputs: &[&[f64]],
    targets: &[usize],
    hard_set: &[usize],
    lambda: f64,
) -> Result<LossGrads> {
    let weights = ohem_weights(inputs.len(), hard_set, lambda)?;
    net.loss_and_grads(inputs, targets, &weights)
}

/// Linear budget schedule from `eps_start` at epoch 0 to `eps_end` at epoch
/// `total_epochs - 1`. A one-epoch schedule stays at `eps_start`.
pub fn epsilon_schedule(epoch: usize, total_epochs: usize, eps_start: f64, eps_end: f64) -> Result<f64> {
    if total_epochs == 0 {
        return Err(Error::domain("epsilon schedule needs at least one epoch"));
    }
    if total_epochs == 1 {
        return Ok(eps_start);
    }
    let t = (epoch.min(total_epochs - 1)) as f64 / (total_epochs - 1) as f64;
    Ok(eps_start * (1.0 - t) + eps_end * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;

    #[test]
    fn lambda_examples() {
        assert_eq!(adaptive_lambda(0.9, 1.0, 0.5).unwrap(), 0.45);
        assert_eq!(adaptive_lambda(0.0, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(adaptive_lambda(1.0, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(adaptive_lambda(2.0, 1.0, 0.5).unwrap(), 0.5);
        assert!(adaptive_lambda(0.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn ohem_examples() {
        assert_eq!(ohem_select(&[1.0, 4.0, 2.0, 9.0, 3.0], 0.2).unwrap(), vec![3]);
        assert_eq!(ohem_select(&[1.0, 4.0, 2.0], 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(ohem_select(&[2.0; 5], 0.4).unwrap(), vec![0, 1]);
        assert!(ohem_select(&[], 0.2).is_err());
        assert!(ohem_select(&[1.0], 0.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(epsilon_schedule(0, 100, 0.02, 0.15).unwrap(), 0.02);
        assert_eq!(epsilon_schedule(99, 100, 0.02, 0.15).unwrap(), 0.15);
        assert!((epsilon_schedule(2, 5, 0.02, 0.15).unwrap() - 0.085).abs() < 1e-15);
        assert_eq!(epsilon_schedule(0, 1, 0.02, 0.15).unwrap(), 0.02);
        assert!(epsilon_schedule(0, 0, 0.02, 0.15).is_err());
    }

    fn batch() -> (DenseNet, Vec<Vec<f64>>, Vec<usize>) {
        let net = DenseNet::new(4, 6, 3, Activation::Tanh, 11);
        let xs = (0..10)
            .map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0).collect())
            .collect();
        let ys = (0..10).map(|i| i % 3).collect();
        (net, xs, ys)
    }

    #[test]
    fn total_loss_matches_definition() {
        let (net, xs, ys) = batch();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let plain = total_loss(&net, &refs, &ys, &[], 0.45).unwrap();
        let ce = net.per_sample_loss(&refs, &ys).unwrap();
        let mean: f64 = ce.iter().sum::<f64>() / 10.0;
        assert!((plain.loss - mean).abs() < 1e-12);

        let zero = total_loss(&net, &refs, &ys, &[1, 2], 0.0).unwrap();
        assert!((zero.loss - mean).abs() < 1e-12);

        let all: Vec<usize> = (0..10).collect();
        let full = total_loss(&net, &refs, &ys, &all, 0.45).unwrap();
        assert!((full.loss - 1.45 * mean).abs() < 1e-12);

        let hard = ohem_select(&ce, 0.2).unwrap();
        let hard_mean = hard.iter().map(|&i| ce[i]).sum::<f64>() / hard.len() as f64;
        let t = total_loss(&net, &refs, &ys, &hard, 0.45).unwrap();
        assert!((t.loss - (mean + 0.45 * hard_mean)).abs() < 1e-12);
    }

    #[test]
    fn spot_value() {
        // batch CE 1.0, hard CE 2.5, lambda 0.45
        let value: f64 = 1.0 + 0.45 * 2.5;
        assert!((value - 2.125).abs() < 1e-15);
        let w = ohem_weights(4, &[0], 0.45).unwrap();
        let ce = [2.5, 0.5, 0.5, 0.5];
        let loss: f64 = w.iter().zip(ce).map(|(w, c)| w * c).sum::<f64>() / 4.0;
        assert!((loss - 2.125).abs() < 1e-12);
    }
}
