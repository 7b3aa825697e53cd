//! KL divergence between sampled state fidelities and the Haar distribution.

use fourier_qcnn::ansatz::{AnsatzKind, ArchitectureKind, ModelDescriptor};
use fourier_qcnn::diagnostics::{expressibility, DataPolicy, DEFAULT_BINS, DEFAULT_PAIRS};

fn main() -> fourier_qcnn::Result<()> {
    for ansatz in [
        AnsatzKind::StronglyEntangling,
        AnsatzKind::BasicEntangler,
        AnsatzKind::CustomLayers,
        AnsatzKind::random(),
    ] {
        let desc = ModelDescriptor::new(ansatz, ArchitectureKind::SuperParallel, 2, 2);
        let r = expressibility(&desc, DEFAULT_PAIRS, DEFAULT_BINS, 0, DataPolicy::Zeros)?;
        println!("{ansatz:>8}: KL {:.5}  (upper bound {:.1})", r.kl, r.upper_bound);
    }
    Ok(())
}
