//! Batch residual variance of a scalar chain: the closed-form lower bound
//! R/b against the exact minimum. The two agree for sign-symmetric labels
//! and part ways when x² and y·x covary.

use support_lab::oracle::{min_batch_residual_variance, residual_variance_bound};

fn main() {
    let cases: [(&str, Vec<f64>, Vec<f64>); 2] = [
        ("paired labels", vec![1.0, 2.0, 1.0, 2.0], vec![0.5, -1.0, -0.5, 1.0]),
        ("y = x", vec![1.0, 2.0], vec![1.0, 2.0]),
    ];
    for (name, x, y) in cases {
        for b in [1, 2] {
            println!(
                "{name:<14} b={b}: bound {:.4}, exact minimum {:.4}",
                residual_variance_bound(&x, &y, b),
                min_batch_residual_variance(&x, &y, b)
            );
        }
    }
}
