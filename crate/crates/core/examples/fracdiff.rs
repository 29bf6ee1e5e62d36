//! Caputo (L1) and Grünwald–Letnikov derivatives of a ramp, compared with the
//! closed form t^(1-q) / Γ(2-q).
//!
//! `cargo run --example fracdiff`

use fomads::fracdiff::{caputo_derivative, gamma, gl_derivative, gl_weights};

fn main() -> fomads::Result<()> {
    let h = 1e-3;
    let ramp: Vec<f64> = (0..=1000).map(|k| k as f64 * h).collect();
    let full = ramp.len();

    let caputo = caputo_derivative(&ramp, 0.7, full, h)?;
    let gl = gl_derivative(&ramp, 0.3, full, h)?;
    println!("order  operator  at t=1      exact");
    println!("0.7    Caputo    {:.6}  {:.6}", caputo[1000], 1.0 / gamma(1.3));
    println!("0.3    GL        {:.6}  {:.6}", gl[1000], 1.0 / gamma(1.7));

    // The feature extractor uses a 10-sample short-memory kernel instead.
    let short = caputo_derivative(&ramp, 0.7, 10, h)?;
    println!("0.7    Caputo K=10 at t=1: {:.6}", short[1000]);
    println!("GL weights (0.3, K=6): {:?}", gl_weights(0.3, 6)?);
    Ok(())
}
