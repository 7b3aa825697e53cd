#![allow(dead_code)]

use fourier_qcnn::rng::{substream, StreamRng};
use fourier_qcnn::sim::{Circuit, GateOp, Param};
use rand::Rng;

/// A random circuit on `n` qubits using every gate kind, with data slots,
/// fixed angles and weight slots that may be shared between gates.
pub fn random_circuit(n: usize, n_gates: usize, rng: &mut StreamRng) -> (Circuit, Vec<f64>, Vec<f64>) {
    let n_data = 2;
    let n_weights = 1 + n_gates / 2;
    let param = |rng: &mut StreamRng| match rng.random_range(0..10) {
        0 => Param::Fixed(rng.random_range(-3.0..3.0)),
        1 | 2 => Param::Data(rng.random_range(0..n_data)),
        _ => Param::Weight(rng.random_range(0..n_weights)),
    };
    let mut gates = Vec::with_capacity(n_gates);
    for _ in 0..n_gates {
        let q = rng.random_range(0..n);
        let g = match rng.random_range(0..6) {
            0 => GateOp::Rx { qubit: q, angle: param(rng) },
            1 => GateOp::Ry { qubit: q, angle: param(rng) },
            2 => GateOp::Rz { qubit: q, angle: param(rng) },
            3 => GateOp::Rot { qubit: q, phi: param(rng), theta: param(rng), omega: param(rng) },
            4 => GateOp::H { qubit: q },
            _ => {
                let t = (q + rng.random_range(1..n)) % n;
                GateOp::Cnot { control: q, target: t }
            }
        };
        gates.push(g);
    }
    let circuit = Circuit::new(n, n_data, n_weights, gates).unwrap();
    let data = (0..n_data).map(|_| rng.random_range(-3.0..3.0)).collect();
    let weights = (0..n_weights).map(|_| rng.random_range(-3.0..3.0)).collect();
    (circuit, data, weights)
}

/// The `i`-th circuit of the fixed oracle suite: 2 to 8 qubits.
pub fn suite_circuit(i: u64) -> (Circuit, Vec<f64>, Vec<f64>) {
    let mut rng = substream(0x5eed, i);
    let n = 2 + (i as usize % 7);
    let gates = rng.random_range(6..30);
    random_circuit(n, gates, &mut rng)
}

/// Central finite difference of `<Z_qubit>` in every weight.
pub fn fd_gradient(c: &Circuit, data: &[f64], weights: &[f64], qubit: usize, h: f64) -> Vec<f64> {
    (0..weights.len())
        .map(|k| {
            let mut w = weights.to_vec();
            w[k] += h;
            let p = c.expval_z(data, &w, qubit).unwrap();
            w[k] -= 2.0 * h;
            let m = c.expval_z(data, &w, qubit).unwrap();
            (p - m) / (2.0 * h)
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
