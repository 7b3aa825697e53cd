//! Accessible Fourier frequencies of a reuploading model.
//!
//! Usage: `cargo run --release --example fourier_spectrum [ansatz] [arch] [layers]`

use fourier_qcnn::ansatz::{dof, expected_degree, ModelDescriptor};
use fourier_qcnn::spectra::{band_limit, sample_spectrum, DEFAULT_GRID, DEFAULT_THRESHOLD};

fn main() -> fourier_qcnn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ansatz = args.first().map_or("strongly", String::as_str).parse()?;
    let arch = args.get(1).map_or("super", String::as_str).parse()?;
    let layers = args.get(2).map_or(Ok(2), |s| s.parse()).expect("layers must be an integer");

    let desc = ModelDescriptor::new(ansatz, arch, 2, layers);
    let report = sample_spectrum(&desc, 100, 0, DEFAULT_GRID, DEFAULT_THRESHOLD)?;
    println!(
        "{ansatz} / {arch}, {} qubits, {} weights",
        desc.n_qubits(),
        desc.n_weights()
    );
    if let Ok(d) = expected_degree(&desc) {
        println!("expected degree {d}, needs {} free parameters", dof(d as u32, 2)?);
    }
    println!(
        "obtained degree {} ({} accessible frequencies), needs {} free parameters",
        report.degree,
        report.accessible.len(),
        dof(report.degree as u32, 2)?
    );
    println!("largest |c| beyond the band limit: {:.2e}", report.max_beyond(&band_limit(&desc)?));

    let path = std::env::temp_dir().join("fourier_spectrum.svg");
    std::fs::write(&path, report.to_svg()).expect("write svg");
    println!("coefficient scatter written to {}", path.display());
    Ok(())
}
