//! Derivative variance as the register grows.

use fourier_qcnn::ansatz::{AnsatzKind, ArchitectureKind, ModelDescriptor};
use fourier_qcnn::diagnostics::{gradient_variance, DataPolicy, DEFAULT_VARIANCE_PARAMETER};

fn main() -> fourier_qcnn::Result<()> {
    for ansatz in [AnsatzKind::StronglyEntangling, AnsatzKind::BasicEntangler] {
        for layers in 2..=4 {
            let desc = ModelDescriptor::new(ansatz, ArchitectureKind::SuperParallel, 2, layers);
            let r = gradient_variance(&desc, 200, 0, DEFAULT_VARIANCE_PARAMETER, DataPolicy::Zeros)?;
            println!("{ansatz:>8} {} qubits: Var = {:.5}", desc.n_qubits(), r.variance);
        }
    }
    Ok(())
}
