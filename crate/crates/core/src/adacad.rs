//! Per-node adaptive interpolation between a node's own feature and its
//! diffused feature.
//!
//! The control variable `c_i` is the mean agreement `p_i . p_j` between a
//! node's class likelihoods and those of its neighbors. The blend weight is
//! `gamma_i = (1 - beta) c_i + beta`, so `gamma_i` lies in `[beta, 1]`.

use std::sync::Arc;

use crate::autodiff::{Tape, Value};
use crate::graph::SparseGraph;
use crate::{Error, Result};

/// Upper end of the blend weight range.
pub const GAMMA_UPPER: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
pub struct ControlVector {
    pub c: Value,
}

#[derive(Debug, Clone, Copy)]
pub struct GammaVector {
    pub gamma: Value,
    pub beta: f64,
}

/// Mean neighbor agreement. Isolated nodes get `c_i = 0`.
pub fn control_variable(tape: &mut Tape, g: &Arc<SparseGraph>, p: Value) -> Result<ControlVector> {
    if p.rows() != g.n_nodes() {
        return Err(Error::shape("control_variable", (g.n_nodes(), p.cols()), p.shape()));
    }
    let agreement = tape.edge_dot(g, p)?;
    let c = tape.segment_mean(&agreement);
    Ok(ControlVector { c })
}

pub fn gamma_vector(tape: &mut Tape, c: ControlVector, beta: f64) -> Result<GammaVector> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta {beta} outside [0, 1]")));
    }
    let gamma = tape.affine(c.c, 1.0 - beta, beta * GAMMA_UPPER);
    Ok(GammaVector { gamma, beta })
}

/// Row-wise `(1 - gamma_i) z_i + gamma_i z_cad_i`.
pub fn adaptive_blend(tape: &mut Tape, z: Value, z_cad: Value, gamma: &GammaVector) -> Result<Value> {
    tape.blend(z, z_cad, gamma.gamma)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::Tensor;
    use crate::graph::build_graph;
    use crate::testutil::{check_grads, random_probs, random_tensor, weighted_sum};

    fn star() -> Arc<SparseGraph> {
        Arc::new(build_graph(&[(0, 1), (0, 2)], 3, false).unwrap())
    }

    fn c_of(tape: &mut Tape, g: &Arc<SparseGraph>, rows: &[&[f64]]) -> Vec<f64> {
        let p = tape.constant(Tensor::from_rows(rows).unwrap());
        let c = control_variable(tape, g, p).unwrap();
        tape.value(c.c).data().to_vec()
    }

    #[test]
    fn control_variable_hand_cases() {
        let g = star();
        let mut tape = Tape::new();
        let same = c_of(&mut tape, &g, &[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(same[0], 1.0);
        let other = c_of(&mut tape, &g, &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(other[0], 0.0);
        let mixed = c_of(&mut tape, &g, &[&[0.5, 0.5], &[1.0, 0.0], &[0.0, 1.0]]);
        assert!((mixed[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_has_zero_control() {
        let g = Arc::new(build_graph(&[(0, 1)], 3, false).unwrap());
        let mut tape = Tape::new();
        let c = c_of(&mut tape, &g, &[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(c, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn control_variable_row_mismatch() {
        let g = star();
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::filled(2, 2, 0.5));
        assert!(control_variable(&mut tape, &g, p).is_err());
    }

    #[test]
    fn gamma_endpoints_and_hand_case() {
        let mut tape = Tape::new();
        let c = ControlVector { c: tape.constant(Tensor::from_rows(&[&[0.0], &[0.5], &[1.0]]).unwrap()) };
        let g1 = gamma_vector(&mut tape, c, 1.0).unwrap();
        assert_eq!(tape.value(g1.gamma).data(), &[1.0, 1.0, 1.0]);
        let g0 = gamma_vector(&mut tape, c, 0.0).unwrap();
        assert_eq!(tape.value(g0.gamma).data(), tape.value(c.c).data());
        let g8 = gamma_vector(&mut tape, c, 0.8).unwrap();
        assert!((tape.value(g8.gamma).data()[1] - 0.9).abs() < 1e-15);
        assert!(gamma_vector(&mut tape, c, 1.2).is_err());
        assert!(gamma_vector(&mut tape, c, -0.1).is_err());
    }

    #[test]
    fn blend_endpoints_and_hand_case() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::from_rows(&[&[4.0, 0.0], &[1.0, 2.0]]).unwrap());
        let zc = tape.constant(Tensor::from_rows(&[&[0.0, 4.0], &[3.0, -1.0]]).unwrap());
        let ones = GammaVector { gamma: tape.constant(Tensor::filled(2, 1, 1.0)), beta: 1.0 };
        let out = adaptive_blend(&mut tape, z, zc, &ones).unwrap();
        assert_eq!(tape.value(out), tape.value(zc));
        let zeros = GammaVector { gamma: tape.constant(Tensor::filled(2, 1, 0.0)), beta: 0.0 };
        let out = adaptive_blend(&mut tape, z, zc, &zeros).unwrap();
        assert_eq!(tape.value(out), tape.value(z));
        let quarter = GammaVector { gamma: tape.constant(Tensor::filled(2, 1, 0.25)), beta: 0.0 };
        let out = adaptive_blend(&mut tape, z, zc, &quarter).unwrap();
        assert_eq!(tape.value(out).row(0), &[3.0, 1.0]);

        let bad = tape.constant(Tensor::filled(3, 2, 0.0));
        assert!(adaptive_blend(&mut tape, z, bad, &quarter).is_err());
    }

    #[test]
    fn gradient_through_gamma() {
        let g = Arc::new(build_graph(&[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (1, 4)], 7, false).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let logits = random_tensor(&mut rng, 7, 3);
        let z = random_tensor(&mut rng, 7, 3);
        let zc = random_tensor(&mut rng, 7, 3);
        check_grads(
            &[logits, z, zc],
            |tape, v| {
                let p = tape.row_softmax(v[0]);
                let c = control_variable(tape, &g, p).unwrap();
                let gamma = gamma_vector(tape, c, 0.7).unwrap();
                let out = adaptive_blend(tape, v[1], v[2], &gamma).unwrap();
                weighted_sum(tape, out, 42)
            },
            1e-4,
        );
    }

    proptest! {
        #[test]
        fn ranges_hold(seed in any::<u64>(), beta in 0.0f64..=1.0, n in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i * 3 + 1) % n)).collect();
            let g = Arc::new(build_graph(&edges, n, seed % 2 == 0).unwrap());
            let mut tape = Tape::new();
            let p = tape.constant(random_probs(&mut rng, n, 3));
            let c = control_variable(&mut tape, &g, p).unwrap();
            let gamma = gamma_vector(&mut tape, c, beta).unwrap();
            for &ci in tape.value(c.c).data() {
                prop_assert!((0.0..=1.0).contains(&ci));
            }
            for &gi in tape.value(gamma.gamma).data() {
                prop_assert!(gi >= beta - 1e-15 && gi <= 1.0 + 1e-15);
            }

            let z = random_tensor(&mut rng, n, 2);
            let zc = random_tensor(&mut rng, n, 2);
            let zv = tape.constant(z.clone());
            let zcv = tape.constant(zc.clone());
            let out = adaptive_blend(&mut tape, zv, zcv, &gamma).unwrap();
            for ((o, a), b) in tape.value(out).data().iter().zip(z.data()).zip(zc.data()) {
                prop_assert!(*o >= a.min(*b) - 1e-12 && *o <= a.max(*b) + 1e-12);
            }
        }
    }
}
