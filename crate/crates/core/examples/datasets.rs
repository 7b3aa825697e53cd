//! The three benchmark series and their window layouts.

use fourier_qcnn::data::*;

fn main() -> fourier_qcnn::Result<()> {
    let legendre = gen_legendre(LEGENDRE_POINTS, LEGENDRE_SIGMA, 7)?;
    let w = make_windows(&legendre.values, &LEGENDRE_LAGS, 1, LEGENDRE_SPLIT)?;
    println!("legendre: {} points, {} windows of {}", legendre.len(), w.len(), w.window());

    let mg = gen_mackey_glass(&MackeyGlassParams::default())?;
    let w = make_windows(&mg.values, &MACKEY_GLASS_LAGS, MACKEY_GLASS_HORIZON, MACKEY_GLASS_SPLIT)?;
    println!("mackey-glass: {} points, {} windows, first {:?} -> {:.4}", mg.len(), w.len(), w.inputs[0], w.targets[0]);

    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/eurusd_synthetic.csv");
    let fx = load_csv(fixture)?;
    let w = make_windows(&fx.values, &EURO_LAGS, 1, EURO_SPLIT)?;
    let scaler = w.fit_scaler()?;
    println!(
        "exchange rate: {} rows, {} windows, train range [{:.4}, {:.4}] -> [0, pi]",
        fx.len(),
        w.len(),
        scaler.data_min,
        scaler.data_max
    );
    Ok(())
}
