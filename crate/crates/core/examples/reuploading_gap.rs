//! Uploading the data once versus before every block.

use fourier_qcnn::ansatz::{AnsatzKind, ArchitectureKind, ModelDescriptor};
use fourier_qcnn::spectra::sample_spectrum;

fn main() -> fourier_qcnn::Result<()> {
    for ansatz in [AnsatzKind::StronglyEntangling, AnsatzKind::BasicEntangler] {
        for arch in [ArchitectureKind::NonReuploading, ArchitectureKind::Parallel] {
            let desc = ModelDescriptor::new(ansatz, arch, 2, 3);
            let r = sample_spectrum(&desc, 50, 0, 32, 1e-5)?;
            println!(
                "{ansatz:>8} {arch:>8}: degree {}, {:>3} accessible frequencies",
                r.degree,
                r.accessible.len()
            );
        }
    }
    Ok(())
}
