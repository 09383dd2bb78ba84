use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etcoref::neural::layers::{bilstm, declare_bilstm};
use etcoref::neural::{Matrix, Parameters};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One direction written out scalar by scalar, gates in order i, f, g, o.
fn reference_direction(params: &Parameters, prefix: &str, x: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let w_ih = params.get(&format!("{prefix}.w_ih")).unwrap().to_matrix();
    let w_hh = params.get(&format!("{prefix}.w_hh")).unwrap().to_matrix();
    let b = params.get(&format!("{prefix}.b")).unwrap().to_matrix();
    let hidden = w_hh.rows();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![Vec::new(); x.len()];
    let steps: Vec<usize> = if reverse { (0..x.len()).rev().collect() } else { (0..x.len()).collect() };
    for t in steps {
        let pre = |gate: usize, j: usize| {
            let col = gate * hidden + j;
            let mut z = b.data()[col];
            for (d, xv) in x[t].iter().enumerate() {
                z += xv * w_ih.data()[d * 4 * hidden + col];
            }
            for (k, hv) in h.iter().enumerate() {
                z += hv * w_hh.data()[k * 4 * hidden + col];
            }
            z
        };
        let mut next_h = vec![0.0; hidden];
        for j in 0..hidden {
            let i = sigmoid(pre(0, j));
            let f = sigmoid(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sigmoid(pre(3, j));
            c[j] = f * c[j] + i * g;
            next_h[j] = o * c[j].tanh();
        }
        h = next_h;
        out[t] = h.clone();
    }
    out
}

#[test]
fn bilstm_matches_hand_computation() {
    let (steps, input, hidden) = (6, 5, 4);
    let mut params = Parameters::new();
    declare_bilstm(&mut params, "lstm", input, hidden);
    params.init_uniform(11);
    // push the weights past the init range so saturation regions are exercised
    for (_, t) in params.iter_mut() {
        t.data.iter_mut().for_each(|v| *v *= 8.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let got = bilstm(&Matrix::from_rows(&x), &params, "lstm").unwrap();
    assert_eq!(got.shape(), (steps, 2 * hidden));
    let fwd = reference_direction(&params, "lstm.fwd", &x, false);
    let bwd = reference_direction(&params, "lstm.bwd", &x, true);
    for t in 0..steps {
        let row = &got.data()[t * 2 * hidden..(t + 1) * 2 * hidden];
        for j in 0..hidden {
            assert_abs_diff_eq!(row[j], fwd[t][j], epsilon = 1e-12);
            assert_abs_diff_eq!(row[hidden + j], bwd[t][j], epsilon = 1e-12);
        }
    }
}

#[test]
fn directions_see_opposite_context() {
    let mut params = Parameters::new();
    declare_bilstm(&mut params, "l", 2, 3);
    params.init_uniform(0);
    let x = vec![vec![0.3, -0.2], vec![0.9, 0.1], vec![-0.5, 0.4]];
    let full = bilstm(&Matrix::from_rows(&x), &params, "l").unwrap();
    let prefix = bilstm(&Matrix::from_rows(&x[..2]), &params, "l").unwrap();
    // forward halves of the shared prefix agree, backward halves do not
    for t in 0..2 {
        for j in 0..3 {
            assert_abs_diff_eq!(full.data()[t * 6 + j], prefix.data()[t * 6 + j], epsilon = 1e-15);
        }
    }
    assert!((full.data()[3] - prefix.data()[3]).abs() > 1e-9);
}

#[test]
fn empty_and_mismatched_inputs() {
    let mut params = Parameters::new();
    declare_bilstm(&mut params, "l", 2, 3);
    assert_eq!(bilstm(&Matrix::zeros(0, 2), &params, "l").unwrap().shape(), (0, 6));
    assert!(bilstm(&Matrix::zeros(2, 3), &params, "l").is_err());
}
