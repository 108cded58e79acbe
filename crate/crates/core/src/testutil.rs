//! Finite-difference oracle shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor, Value};

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Random probability rows.
pub fn random_probs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|v| v / total));
    }
    Tensor::new(rows, cols, data).unwrap()
}

/// Central finite-difference check of `f` at every coordinate of every input.
pub fn check_grads<F>(inputs: &[Tensor], f: F, tol: f64)
where
    F: Fn(&mut Tape, &[Value]) -> Value,
{
    let mut tape = Tape::new();
    let vars: Vec<Value> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let eval = |inputs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Value> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };

    let h = 1e-6;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k]);
        for idx in 0..input.data().len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[idx] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[idx] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            assert!(err < tol, "input {k} coord {idx}: analytic {a} numeric {numeric} rel err {err}");
        }
    }
}

/// Fixed random projection plus a kink turns any output into a non-trivial scalar.
pub fn weighted_sum(tape: &mut Tape, v: Value, seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random_tensor(&mut rng, v.cols(), 2));
    let u = tape.constant(random_tensor(&mut rng, 1, v.rows()));
    let proj = tape.matmul(v, w).unwrap();
    let act = tape.leaky_relu(proj, 0.3).unwrap();
    let s = tape.matmul(u, act).unwrap();
    tape.sum(s)
}

/// Dense row-major product of square `n x n` with `n x f`.
pub fn dense_mul(a: &[f64], n: usize, x: &[f64], f: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * f];
    for i in 0..n {
        for j in 0..n {
            for c in 0..f {
                out[i * f + c] += a[i * n + j] * x[j * f + c];
            }
        }
    }
    out
}
