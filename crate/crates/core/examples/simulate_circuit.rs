//! Build a small parameterized circuit, run it and compare gradient paths.

use fourier_qcnn::sim::{Circuit, GateOp, Param};

fn main() -> fourier_qcnn::Result<()> {
    let circuit = Circuit::new(
        2,
        1,
        4,
        vec![
            GateOp::Ry { qubit: 0, angle: Param::Data(0) },
            GateOp::Rot { qubit: 0, phi: Param::Weight(0), theta: Param::Weight(1), omega: Param::Weight(2) },
            GateOp::Cnot { control: 0, target: 1 },
            GateOp::Rx { qubit: 1, angle: Param::Weight(3) },
            GateOp::Ry { qubit: 1, angle: Param::Data(0) },
        ],
    )?;
    let x = [0.7];
    let w = [0.1, 1.2, -0.4, 0.9];

    let state = circuit.run(&x, &w)?;
    for (i, a) in state.amplitudes().iter().enumerate() {
        println!("|{i:02b}>  {:+.6} {:+.6}i", a.re, a.im);
    }
    println!("<Z> per qubit: {:?}", circuit.expvals_all(&x, &w)?);

    let shift = circuit.grad_parameter_shift(&x, &w, 1)?;
    let adjoint = circuit.grad_adjoint(&x, &w, 1)?;
    for (k, (s, a)) in shift.iter().zip(&adjoint).enumerate() {
        println!("d<Z_1>/dw{k}: shift {s:+.12} adjoint {a:+.12}");
    }
    Ok(())
}
