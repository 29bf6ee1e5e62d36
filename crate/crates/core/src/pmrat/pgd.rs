//! L-infinity projected gradient ascent on classifier inputs.

use crate::error::{Error, Result};
use crate::model::DenseNet;

fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `x + delta` with `delta` built by `steps` signed-gradient ascent steps, each
/// followed by projection onto the `eps` ball. `delta` starts at zero and
/// `sign(0) = 0`. Every output coordinate satisfies `|x_adv - x| <= eps` as
/// evaluated in floating point.
pub fn pgd_attack(
    net: &DenseNet,
    x: &[f64],
    target: usize,
    eps: f64,
    steps: usize,
    step_size: f64,
) -> Result<Vec<f64>> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("PGD budget {eps} must be non-negative")));
    }
    if steps == 0 {
        return Err(Error::domain("PGD needs at least one step"));
    }
    if eps == 0.0 {
        return Ok(x.to_vec());
    }
    let mut delta = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for _ in 0..steps {
        let (_, grad) = net.loss_and_input_grad(&probe, target)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training("non-finite input gradient during PGD".into()));
        }
        for ((d, g), (p, xi)) in delta.iter_mut().zip(&grad).zip(probe.iter_mut().zip(x)) {
            *d = (*d + step_size * sign(*g)).clamp(-eps, eps);
            *p = xi + *d;
        }
    }
    for (p, xi) in probe.iter_mut().zip(x) {
        while (*p - xi).abs() > eps {
            *p = if *p > *xi { p.next_down() } else { p.next_up() };
        }
    }
    Ok(probe)
}

/// Default step size `2.5 * eps / steps`.
pub fn default_step_size(eps: f64, steps: usize) -> f64 {
    2.5 * eps / steps.max(1) as f64
}
