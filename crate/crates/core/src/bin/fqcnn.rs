fn main() {
    std::process::exit(fourier_qcnn::cli::run(std::env::args_os()));
}
