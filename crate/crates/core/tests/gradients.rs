mod common;

use std::sync::Arc;

use common::{composed_gradcheck, gradcheck, toy_input, uniform};
use micrograph::diffnum::{SparseRows, Tape, Tensor, Var};
use micrograph::encoder::{encode_nodes, EncoderVars};
use micrograph::graph::Graph;
use micrograph::seed;

const TOL: f64 = 1e-4;

/// Scalar probe `sum(x ⊙ r)` with fixed random weights, so every output
/// entry gets a distinct upstream gradient.
fn probe(tape: &mut Tape, x: Var, salt: u64) -> micrograph::Result<Var> {
    let shape = tape.value(x).shape();
    let r = uniform(&mut seed::rng(99, &[salt]), shape[0], shape[1]);
    let r = tape.constant(r);
    let p = tape.mul(x, r)?;
    tape.sum(p)
}

fn check(name: &str, inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> micrograph::Result<Var>) {
    let err = gradcheck(inputs, f);
    assert!(err < TOL, "{name}: relative error {err:.3e}");
}

fn inputs(salt: u64, shapes: &[(usize, usize)]) -> Vec<Tensor> {
    let mut rng = seed::rng(5, &[salt]);
    shapes.iter().map(|&(r, c)| uniform(&mut rng, r, c)).collect()
}

#[test]
fn matmul_and_matmul_t() {
    for salt in 0..5 {
        check("matmul", &inputs(salt, &[(3, 4), (4, 2)]), |t, v| {
            let y = t.matmul(v[0], v[1])?;
            probe(t, y, 1)
        });
        check("matmul_t", &inputs(salt, &[(3, 4), (5, 4)]), |t, v| {
            let y = t.matmul_t(v[0], v[1])?;
            probe(t, y, 2)
        });
    }
}

#[test]
fn elementwise_ops() {
    for salt in 0..5 {
        check("add", &inputs(salt, &[(3, 4), (3, 4)]), |t, v| {
            let y = t.add(v[0], v[1])?;
            probe(t, y, 3)
        });
        check("add_row", &inputs(salt, &[(3, 4), (1, 4)]), |t, v| {
            let y = t.add_row(v[0], v[1])?;
            probe(t, y, 4)
        });
        check("mul", &inputs(salt, &[(3, 4), (3, 4)]), |t, v| {
            let y = t.mul(v[0], v[1])?;
            probe(t, y, 5)
        });
        check("scale", &inputs(salt, &[(2, 3)]), |t, v| {
            let y = t.scale(v[0], -1.7)?;
            probe(t, y, 6)
        });
        check("trace_product", &inputs(salt, &[(3, 3), (3, 3)]), |t, v| t.trace_product(v[0], v[1]));
    }
}

#[test]
fn relu_away_from_the_kink() {
    for salt in 0..5 {
        let x: Vec<Tensor> = inputs(salt, &[(4, 4)])
            .into_iter()
            .map(|t| t.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v }))
            .collect();
        check("relu", &x, |t, v| {
            let y = t.relu(v[0])?;
            probe(t, y, 7)
        });
    }
}

#[test]
fn softmaxes_log_and_normalization() {
    for salt in 0..5 {
        for tau in [0.2, 1.0] {
            check("row_softmax", &inputs(salt, &[(3, 5)]), |t, v| {
                let y = t.row_softmax(v[0], tau)?;
                probe(t, y, 8)
            });
            check("col_softmax", &inputs(salt, &[(4, 3)]), |t, v| {
                let y = t.col_softmax(v[0], tau)?;
                probe(t, y, 9)
            });
        }
        let positive: Vec<Tensor> = inputs(salt, &[(3, 3)]).into_iter().map(|t| t.map(|v| v.abs() + 0.5)).collect();
        check("log", &positive, |t, v| {
            let y = t.log(v[0])?;
            probe(t, y, 10)
        });
        check("l2_normalize_rows", &inputs(salt, &[(4, 3)]), |t, v| {
            let y = t.l2_normalize_rows(v[0])?;
            probe(t, y, 11)
        });
    }
}

#[test]
fn gathers_means_and_propagation() {
    let op = Arc::new(
        SparseRows::new(4, vec![
            vec![(0, 0.5), (1, 0.5)],
            vec![(0, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)],
            vec![(1, 0.5), (2, 0.25), (3, 0.25)],
            vec![(3, 1.0)],
        ])
        .unwrap(),
    );
    for salt in 0..5 {
        check("mean_rows", &inputs(salt, &[(5, 3)]), |t, v| {
            let y = t.mean_rows(v[0], Arc::new(vec![vec![0, 2, 4], vec![1, 2], vec![3]]))?;
            probe(t, y, 12)
        });
        check("gather_rows", &inputs(salt, &[(5, 3)]), |t, v| {
            let y = t.gather_rows(v[0], vec![4, 0, 0, 2])?;
            probe(t, y, 13)
        });
        check("propagate", &inputs(salt, &[(4, 2)]), |t, v| {
            let y = t.propagate(v[0], op.clone())?;
            probe(t, y, 14)
        });
    }
}

#[test]
fn composite_expression() {
    for salt in 0..5 {
        check("composite", &inputs(salt, &[(4, 3), (3, 3), (1, 3)]), |t, v| {
            let a = t.matmul(v[0], v[1])?;
            let b = t.add_row(a, v[2])?;
            let n = t.l2_normalize_rows(b)?;
            let c = t.matmul_t(n, n)?;
            let s = t.col_softmax(c, 0.3)?;
            let l = t.log(s)?;
            let m = t.mul(l, s)?;
            t.sum(m)
        });
    }
}

#[test]
fn encoder_matches_finite_differences() {
    let g = Graph::new(
        0,
        2,
        vec![0.3, -0.2, 0.9, 0.1, -0.5, 0.4, 0.7, -0.8, 0.2, 0.6, -0.3, -0.9],
        vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)],
        None,
    )
    .unwrap();
    let input = toy_input(std::slice::from_ref(&g));
    for layers in 1..=2 {
        for salt in 0..3 {
            let mut shapes = vec![(2, 4), (1, 4)];
            if layers == 2 {
                shapes.extend([(4, 4), (1, 4)]);
            }
            check("encode_nodes", &inputs(100 + salt, &shapes), |t, v| {
                let enc = EncoderVars {
                    weights: v.iter().step_by(2).copied().collect(),
                    biases: v.iter().skip(1).step_by(2).copied().collect(),
                };
                let h = encode_nodes(t, &input, &enc)?;
                probe(t, h, 15)
            });
        }
    }
}

#[test]
fn composed_losses_match_finite_differences() {
    for seed in 0..3 {
        for (part, err) in composed_gradcheck(seed) {
            assert!(err < TOL, "{part:?} (seed {seed}): relative error {err:.3e}");
        }
    }
}

#[test]
fn toy_losses_are_not_degenerate() {
    use common::{toy_frozen, toy_graphs, toy_loss, toy_params, Part};
    let graphs = toy_graphs();
    let input = toy_input(&graphs);
    for seed in 0..3 {
        let params = toy_params(seed);
        let frozen = toy_frozen(&params, &input);
        for part in [Part::Motif, Part::Segmenter, Part::Contrastive] {
            let mut tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
            let loss = toy_loss(&mut tape, &vars, &input, part, &frozen).unwrap();
            assert!(tape.value(loss).item().abs() > 1e-3, "{part:?} loss vanishes");
            let grads = tape.backward(loss).unwrap();
            let encoder_grad: f64 = vars[..4].iter().filter_map(|&v| grads.get(v)).map(|g| g.data().iter().map(|x| x.abs()).sum::<f64>()).sum();
            assert!(encoder_grad > 1e-6, "{part:?} leaves the encoder without gradient");
        }
    }
}
