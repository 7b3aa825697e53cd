//! Train the quantum-convolution forecaster on Mackey-Glass.

use fourier_qcnn::ansatz::{AnsatzKind, ArchitectureKind, ModelDescriptor};
use fourier_qcnn::data::*;
use fourier_qcnn::qconv::{evaluate, persistence_metrics, train, ConvConfig, QConvModel, TrainConfig};

fn main() -> fourier_qcnn::Result<()> {
    let series = gen_mackey_glass(&MackeyGlassParams::default())?;
    let ds = make_windows(&series.values, &MACKEY_GLASS_LAGS, MACKEY_GLASS_HORIZON, MACKEY_GLASS_SPLIT)?;

    let desc = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 2);
    let model = QConvModel::new(ConvConfig::new(ds.window(), desc)?, ds.fit_scaler()?, 0)?;
    let out = train(model, &ds, &TrainConfig::default())?;
    for r in out.history.iter().step_by(5) {
        println!("epoch {:>2}  train mse {:.5}  test rmse {:.5}", r.epoch, r.train_loss, r.test_rmse.unwrap_or(f64::NAN));
    }

    let (x, y) = ds.test();
    let m = evaluate(&out.model, x, y)?;
    let p = persistence_metrics(&ds)?;
    println!("model:       rmse {:.5} mae {:.5} mape {:.5}", m.rmse, m.mae, m.mape.unwrap_or(f64::NAN));
    println!("persistence: rmse {:.5} mae {:.5} mape {:.5}", p.rmse, p.mae, p.mape.unwrap_or(f64::NAN));

    let path = std::env::temp_dir().join("mackey_glass_model.json");
    out.model.save(&path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
