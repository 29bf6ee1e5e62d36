use approx::assert_relative_eq;
use fomads::fracdiff::{caputo_derivative, gl_derivative, gl_weights, FractionalKernel, OperatorKind};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn ramp(h: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 * h).collect()
}

/// D^q t = t^(1-q) / Γ(2-q).
fn ramp_derivative(q: f64, t: f64) -> f64 {
    t.powf(1.0 - q) / gamma(2.0 - q)
}

/// (-1)^k * binom(q, k) through the gamma function.
fn binomial_weight(q: f64, k: usize) -> f64 {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * gamma(q + 1.0) / (gamma(k as f64 + 1.0) * gamma(q - k as f64 + 1.0))
}

#[test]
fn caputo_ramp_matches_closed_form() {
    let h = 1e-3;
    let f = ramp(h, 1000);
    let d = caputo_derivative(&f, 0.7, f.len(), h).unwrap();
    let exact = ramp_derivative(0.7, 1.0);
    assert!((exact - 1.11424).abs() < 1e-5);
    assert!((d[1000] - exact).abs() / exact < 0.02);
}

#[test]
fn gl_ramp_matches_closed_form() {
    let h = 1e-3;
    let f = ramp(h, 1000);
    let d = gl_derivative(&f, 0.3, f.len(), h).unwrap();
    let exact = ramp_derivative(0.3, 1.0);
    assert!((exact - 1.1005).abs() < 1e-4);
    assert!((d[1000] - exact).abs() / exact < 0.02);
}

#[test]
fn gl_recurrence_matches_binomial() {
    for q in [0.1, 0.3, 0.5, 0.9] {
        for k_len in 1..=20 {
            let w = gl_weights(q, k_len).unwrap();
            assert_eq!(w.len(), k_len);
            for (k, wk) in w.iter().enumerate() {
                assert!((wk - binomial_weight(q, k)).abs() < 1e-12, "q={q} k={k}");
            }
        }
    }
}

#[test]
fn caputo_l1_converges_at_rate_two_minus_order_on_square() {
    // D^q t^2 = 2 t^(2-q) / Γ(3-q); the L1 error is O(h^(2-q)).
    let q = 0.5;
    let exact = 2.0 / gamma(3.0 - q);
    let err = |n: usize| {
        let h = 1.0 / n as f64;
        let f: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(2)).collect();
        (caputo_derivative(&f, q, f.len(), h).unwrap()[n] - exact).abs()
    };
    let rate = (err(200) / err(400)).log2();
    assert!((rate - (2.0 - q)).abs() < 0.1, "observed rate {rate}");
}

#[test]
fn gl_converges_at_first_order_on_ramp() {
    let q = 0.3;
    let exact = ramp_derivative(q, 1.0);
    let err = |n: usize| {
        let h = 1.0 / n as f64;
        (gl_derivative(&ramp(h, n), q, n + 1, h).unwrap()[n] - exact).abs()
    };
    let rate = (err(500) / err(1000)).log2();
    assert!((rate - 1.0).abs() < 0.1, "observed rate {rate}");
}

#[test]
fn constant_signal_has_zero_caputo_derivative() {
    let d = caputo_derivative(&[3.5; 50], 0.7, 10, 1e-3).unwrap();
    assert!(d.iter().all(|&x| x == 0.0));
}

proptest! {
    #[test]
    fn operators_are_linear(
        xs in prop::collection::vec(-10.0f64..10.0, 2..60),
        ys in prop::collection::vec(-10.0f64..10.0, 60),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        q in 0.05f64..1.0,
        k in 1usize..20,
        caputo in any::<bool>(),
    ) {
        let kind = if caputo { OperatorKind::Caputo } else { OperatorKind::Gl };
        let kernel = FractionalKernel::new(kind, q, k, 0.01).unwrap();
        let ys = &ys[..xs.len()];
        let mix: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| a * x + b * y).collect();
        let (dx, dy, dm) = (kernel.apply(&xs).unwrap(), kernel.apply(ys).unwrap(), kernel.apply(&mix).unwrap());
        for i in 0..xs.len() {
            let expect = a * dx[i] + b * dy[i];
            prop_assert!((dm[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn streaming_equals_batch(
        xs in prop::collection::vec(-5.0f64..5.0, 2..80),
        q in 0.05f64..1.0,
        k in 1usize..25,
    ) {
        for kind in [OperatorKind::Caputo, OperatorKind::Gl] {
            let kernel = FractionalKernel::new(kind, q, k, 1e-3).unwrap();
            let batch = kernel.apply(&xs).unwrap();
            for n in 0..xs.len() {
                // Only the prefix is visible when streaming.
                prop_assert_eq!(kernel.output_at(&xs[..=n], n), batch[n]);
            }
        }
    }
}

#[test]
fn gamma_oracle_agrees_with_crate_gamma() {
    for x in [0.3, 1.3, 1.7, 2.5, 7.25] {
        assert_relative_eq!(fomads::fracdiff::gamma(x), gamma(x), max_relative = 1e-12);
    }
}
