//! Discrete fractional-order differentiation of uniformly sampled signals.
//!
//! Two operators are provided:
//!
//! * the Caputo derivative, discretised with the L1 scheme, which weights
//!   recent first differences most heavily and acts as a high-pass filter;
//! * the Grünwald–Letnikov (GL) derivative, a weighted sum of past samples
//!   with binomial weights, which keeps a long memory of slow drifts.
//!
//! Both are truncated to a short-memory kernel of `K` samples. Samples whose
//! history is shorter than `K` use only the samples that exist, so the output
//! always has the same length as the input.
//!
//! Orders are accepted in `(0, 1]`. At exactly 1 both operators reduce to the
//! first backward difference divided by the step.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default Caputo order.
pub const DEFAULT_CAPUTO_ORDER: f64 = 0.7;
/// Default GL order.
pub const DEFAULT_GL_ORDER: f64 = 0.3;
/// Default short-memory kernel length in samples.
pub const DEFAULT_KERNEL_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Caputo,
    Gl,
}

/// Precomputed convolution weights for one operator at a fixed order,
/// kernel length and step.
///
/// For [`OperatorKind::Gl`] the weights are `h^-order * w_k`; for
/// [`OperatorKind::Caputo`] they are `h^-order / Γ(2 - order) * b_j`, applied to
/// first differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalKernel {
    kind: OperatorKind,
    order: f64,
    step: f64,
    raw: Vec<f64>,
    scaled: Vec<f64>,
}

impl FractionalKernel {
    pub fn new(kind: OperatorKind, order: f64, kernel_len: usize, step: f64) -> Result<Self> {
        check_step(step)?;
        let raw = match kind {
            OperatorKind::Gl => gl_weights(order, kernel_len)?,
            OperatorKind::Caputo => caputo_l1_coeffs(order, kernel_len)?,
        };
        let scale = match kind {
            OperatorKind::Gl => step.powf(-order),
            OperatorKind::Caputo => step.powf(-order) / gamma(2.0 - order),
        };
        let scaled = raw.iter().map(|w| w * scale).collect();
        Ok(Self {
            kind,
            order,
            step,
            raw,
            scaled,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn kernel_len(&self) -> usize {
        self.raw.len()
    }

    /// Unscaled weights (`w_k` for GL, `b_j` for Caputo).
    pub fn weights(&self) -> &[f64] {
        &self.raw
    }

    /// Apply the operator to a whole signal.
    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            OperatorKind::Gl => {
                if signal.is_empty() {
                    return Err(Error::domain("GL derivative of an empty signal"));
                }
                Ok((0..signal.len()).map(|n| self.gl_at(signal, n)).collect())
            }
            OperatorKind::Caputo => {
                if signal.len() < 2 {
                    return Err(Error::domain(format!(
                        "Caputo derivative needs at least 2 samples, got {}",
                        signal.len()
                    )));
                }
                Ok((0..signal.len()).map(|n| self.caputo_at(signal, n)).collect())
            }
        }
    }

    /// Operator output at index `n`, using `signal[..=n]` only.
    ///
    /// Panics if `n` is out of bounds.
    pub fn output_at(&self, signal: &[f64], n: usize) -> f64 {
        match self.kind {
            OperatorKind::Gl => self.gl_at(signal, n),
            OperatorKind::Caputo => self.caputo_at(signal, n),
        }
    }

    fn gl_at(&self, signal: &[f64], n: usize) -> f64 {
        let terms = self.scaled.len().min(n + 1);
        self.scaled[..terms]
            .iter()
            .enumerate()
            .map(|(k, w)| w * signal[n - k])
            .sum()
    }

    fn caputo_at(&self, signal: &[f64], n: usize) -> f64 {
        let terms = self.scaled.len().min(n);
        self.scaled[..terms]
            .iter()
            .enumerate()
            .map(|(j, b)| b * (signal[n - j] - signal[n - j - 1]))
            .sum()
    }

    /// Dump as `k,weight` CSV rows (unscaled weights).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,weight\n");
        for (k, w) in self.raw.iter().enumerate() {
            out.push_str(&format!("{k},{w}\n"));
        }
        out
    }
}

fn check_order(order: f64) -> Result<()> {
    if order.is_finite() && order > 0.0 && order <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "fractional order must lie in (0, 1], got {order}"
        )))
    }
}

fn check_len(kernel_len: usize) -> Result<()> {
    if kernel_len == 0 {
        Err(Error::domain("kernel length must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("step must be positive, got {step}")))
    }
}

/// GL weights `w_k = (-1)^k C(order, k)` for `k < kernel_len`, by the
/// recurrence `w_k = w_{k-1} (1 - (order + 1) / k)`.
pub fn gl_weights(order: f64, kernel_len: usize) -> Result<Vec<f64>> {
    check_order(order)?;
    check_len(kernel_len)?;
    let mut w = Vec::with_capacity(kernel_len);
    w.push(1.0);
    for k in 1..kernel_len {
        let prev = w[k - 1];
        w.push(prev * (1.0 - (order + 1.0) / k as f64));
    }
    Ok(w)
}

/// Caputo L1 coefficients `b_j = (j + 1)^(1 - order) - j^(1 - order)`.
pub fn caputo_l1_coeffs(order: f64, kernel_len: usize) -> Result<Vec<f64>> {
    check_order(order)?;
    check_len(kernel_len)?;
    let p = 1.0 - order;
    Ok((0..kernel_len)
        .map(|j| {
            if j == 0 {
                // 0^0 would make b_0 vanish at order 1
                return 1.0;
            }
            let j = j as f64;
            (j + 1.0).powf(p) - j.powf(p)
        })
        .collect())
}

/// Truncated GL derivative, `h^-order * sum_{k <= min(n, K-1)} w_k f[n-k]`.
pub fn gl_derivative(signal: &[f64], order: f64, kernel_len: usize, step: f64) -> Result<Vec<f64>> {
    FractionalKernel::new(OperatorKind::Gl, order, kernel_len, step)?.apply(signal)
}

/// Caputo derivative by the L1 scheme; `output[0]` is always 0.
pub fn caputo_derivative(
    signal: &[f64],
    order: f64,
    kernel_len: usize,
    step: f64,
) -> Result<Vec<f64>> {
    FractionalKernel::new(OperatorKind::Caputo, order, kernel_len, step)?.apply(signal)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, n = 9), with the
/// reflection formula below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_weights_small_cases() {
        let w = gl_weights(0.3, 3).unwrap();
        assert_relative_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], -0.3, epsilon = 1e-15);
        assert_relative_eq!(w[2], -0.105, epsilon = 1e-15);
        let w = gl_weights(0.3, 4).unwrap();
        assert_relative_eq!(w[3], -0.0595, epsilon = 1e-15);
        assert_eq!(gl_weights(0.42, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn caputo_coeffs_small_cases() {
        let b = caputo_l1_coeffs(0.7, 3).unwrap();
        assert_relative_eq!(b[0], 1.0);
        assert_relative_eq!(b[1], 0.231144, epsilon = 1e-6);
        assert_relative_eq!(b[2], 0.159245, epsilon = 1e-6);
        assert_eq!(caputo_l1_coeffs(0.5, 1).unwrap(), vec![1.0]);
        let b = caputo_l1_coeffs(0.7, 10).unwrap();
        assert!(b.iter().all(|&x| x > 0.0));
        assert!(b.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn bad_arguments_are_domain_errors() {
        for order in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(gl_weights(order, 5), Err(Error::Domain(_))));
            assert!(matches!(caputo_l1_coeffs(order, 5), Err(Error::Domain(_))));
        }
        assert!(matches!(gl_weights(0.3, 0), Err(Error::Domain(_))));
        assert!(gl_derivative(&[], 0.3, 10, 1e-3).is_err());
        assert!(caputo_derivative(&[1.0], 0.7, 10, 1e-3).is_err());
        assert!(caputo_derivative(&[1.0, 2.0], 0.7, 10, 0.0).is_err());
    }

    #[test]
    fn unit_order_is_backward_difference() {
        let f = [0.0, 1.0, 4.0, 9.0];
        let c = caputo_derivative(&f, 1.0, 5, 0.5).unwrap();
        let g = gl_derivative(&f, 1.0, 5, 0.5).unwrap();
        for (out, expect) in [(&c[..], &[0.0, 2.0, 6.0, 10.0][..]), (&g[1..], &[2.0, 6.0, 10.0][..])] {
            for (a, b) in out.iter().zip(expect) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_and_constant_signals() {
        let zeros = vec![0.0; 400];
        assert!(gl_derivative(&zeros, 0.3, 10, 5e-4)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let c = vec![2.5; 50];
        assert!(caputo_derivative(&c, 0.7, 10, 5e-4)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn gl_constant_residual() {
        // Truncated GL of a constant is not zero: c * h^-b * sum(w_k).
        let (beta, k, h, c) = (0.3, 10, 5e-4, 3.0);
        let sum_w: f64 = gl_weights(beta, k).unwrap().iter().sum();
        // sum_{k<10} w_k for beta = 0.3, frozen from direct summation
        assert_relative_eq!(sum_w, 0.393_918_983_751_562_5, epsilon = 1e-12);
        let out = gl_derivative(&vec![c; 40], beta, k, h).unwrap();
        let expect = c * h.powf(-beta) * sum_w;
        for &v in &out[k - 1..] {
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn caputo_step_is_transient() {
        let mut f = vec![0.0; 60];
        for v in &mut f[30..] {
            *v = 1.0;
        }
        let k = 10;
        let d = caputo_derivative(&f, 0.7, k, 5e-4).unwrap();
        assert!(d[30] > d[30 + k]);
        assert!(d[30] > 0.0);
        assert_eq!(d[30 + k], 0.0);
    }

    #[test]
    fn kernel_csv_dump() {
        let k = FractionalKernel::new(OperatorKind::Gl, 0.3, 3, 1.0).unwrap();
        let csv = k.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "k,weight");
        assert_eq!(rows.len(), 4);
        let w2: f64 = rows[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(w2, k.weights()[2]);
    }

    #[test]
    fn gamma_reference_values() {
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gamma(1.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(1.3), 0.897_470_696_306_277_2, max_relative = 1e-10);
        assert_relative_eq!(gamma(1.7), 0.908_638_732_853_290_3, max_relative = 1e-10);
    }
}
