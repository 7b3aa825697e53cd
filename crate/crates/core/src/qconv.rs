//! Hybrid 1D quantum-convolution forecaster.
//!
//! A window of `c` lags is scaled to `[0, pi]`, zero-padded by `p` at both
//! edges and swept by a `k`-wide kernel with stride `s`. Each kernel position
//! runs the variational circuit with the `k` values as encoding angles and
//! yields one `<Z_q>` per qubit, giving an `(n_qubits, o)` feature map with
//! `o = (c + 2p - k)/s + 1`. The map goes through ReLU, a max-pool over `o`
//! and a linear head.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_architecture, ModelDescriptor};
use crate::data::{Scaler, WindowedDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};
use crate::sim::Circuit;
use crate::spectra::sample_weights;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvConfig {
    /// Window length (number of lags).
    pub c: usize,
    pub k: usize,
    pub p: usize,
    pub s: usize,
    pub descriptor: ModelDescriptor,
}

impl ConvConfig {
    /// Kernel 2, padding 1, stride 1.
    pub fn new(c: usize, descriptor: ModelDescriptor) -> Result<Self> {
        let cfg = Self {
            c,
            k: 2,
            p: 1,
            s: 1,
            descriptor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        if self.descriptor.kernel != self.k {
            return Err(Error::Descriptor(format!(
                "kernel size {} but descriptor encodes {} features",
                self.k, self.descriptor.kernel
            )));
        }
        if self.k == 0 || self.s == 0 || self.k >= self.c {
            return Err(Error::Domain(format!(
                "need 0 < k < c and s > 0 (c={}, k={}, s={})",
                self.c, self.k, self.s
            )));
        }
        if (self.c + 2 * self.p - self.k) % self.s != 0 {
            return Err(Error::Domain(format!(
                "stride {} does not tile the padded window of {}",
                self.s,
                self.c + 2 * self.p
            )));
        }
        Ok(())
    }

    /// Number of kernel positions.
    pub fn o(&self) -> usize {
        (self.c + 2 * self.p - self.k) / self.s + 1
    }

    /// Scaled, zero-padded kernel windows.
    pub fn windows(&self, scaled: &[f64]) -> Vec<Vec<f64>> {
        let mut padded = vec![0.0; self.c + 2 * self.p];
        padded[self.p..self.p + self.c].copy_from_slice(scaled);
        (0..self.o())
            .map(|j| padded[j * self.s..j * self.s + self.k].to_vec())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QConvModel {
    pub conv: ConvConfig,
    pub quantum_weights: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    pub scaler: Scaler,
    circuit: Circuit,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub windows: Vec<Vec<f64>>,
    /// `features[j][q]` = `<Z_q>` at kernel position `j`.
    pub features: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    /// Kernel position selected by the max-pool for each qubit.
    pub argmax: Vec<usize>,
    pub pred_scaled: f64,
}

impl QConvModel {
    /// Quantum weights uniform on `[0, 2pi)`, head uniform on `+-1/sqrt(n)`.
    pub fn new(conv: ConvConfig, scaler: Scaler, seed: u64) -> Result<Self> {
        conv.validate()?;
        let circuit = build_architecture(&conv.descriptor)?;
        let n = circuit.n_qubits();
        let quantum_weights = sample_weights(circuit.n_weights(), derive_seed(seed, "quantum-init"), 0);
        let bound = 1.0 / (n as f64).sqrt();
        let mut rng = substream(derive_seed(seed, "head-init"), 0);
        let head_weights = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        let head_bias = rng.random_range(-bound..bound);
        Ok(Self {
            conv,
            quantum_weights,
            head_weights,
            head_bias,
            scaler,
            circuit,
        })
    }

    /// Assemble a model from explicit parameters.
    pub fn from_parts(
        conv: ConvConfig,
        quantum_weights: Vec<f64>,
        head_weights: Vec<f64>,
        head_bias: f64,
        scaler: Scaler,
    ) -> Result<Self> {
        conv.validate()?;
        let circuit = build_architecture(&conv.descriptor)?;
        if quantum_weights.len() != circuit.n_weights() {
            return Err(Error::Arity {
                what: "quantum weights",
                expected: circuit.n_weights(),
                got: quantum_weights.len(),
            });
        }
        if head_weights.len() != circuit.n_qubits() {
            return Err(Error::Arity {
                what: "head weights",
                expected: circuit.n_qubits(),
                got: head_weights.len(),
            });
        }
        Ok(Self {
            conv,
            quantum_weights,
            head_weights,
            head_bias,
            scaler,
            circuit,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    pub fn n_params(&self) -> usize {
        self.quantum_weights.len() + self.head_weights.len() + 1
    }

    /// Flat parameter vector: quantum weights, head weights, bias.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.quantum_weights.clone();
        v.extend_from_slice(&self.head_weights);
        v.push(self.head_bias);
        v
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Arity {
                what: "parameters",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let nq = self.quantum_weights.len();
        let nh = self.head_weights.len();
        self.quantum_weights.copy_from_slice(&params[..nq]);
        self.head_weights.copy_from_slice(&params[nq..nq + nh]);
        self.head_bias = params[nq + nh];
        Ok(())
    }

    /// Per-qubit `<Z>` for one already-scaled kernel window.
    pub fn forward_window(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.circuit.expvals_all(window, &self.quantum_weights)
    }

    fn check_sample(&self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.conv.c {
            return Err(Error::Arity {
                what: "lags",
                expected: self.conv.c,
                got: sample.len(),
            });
        }
        Ok(())
    }

    /// Forward pass on a sample in original units.
    pub fn trace(&self, sample: &[f64]) -> Result<ForwardTrace> {
        self.check_sample(sample)?;
        let scaled: Vec<f64> = sample.iter().map(|&v| self.scaler.apply(v)).collect();
        let windows = self.conv.windows(&scaled);
        let features = windows
            .iter()
            .map(|w| self.forward_window(w))
            .collect::<Result<Vec<_>>>()?;
        let n = self.n_qubits();
        let mut pooled = vec![0.0; n];
        let mut argmax = vec![0; n];
        for q in 0..n {
            let mut best = f64::NEG_INFINITY;
            for (j, f) in features.iter().enumerate() {
                let v = f[q].max(0.0);
                if v > best {
                    best = v;
                    argmax[q] = j;
                }
            }
            pooled[q] = best;
        }
        let pred_scaled = self.head_bias
            + self.head_weights.iter().zip(&pooled).map(|(w, p)| w * p).sum::<f64>();
        Ok(ForwardTrace {
            windows,
            features,
            pooled,
            argmax,
            pred_scaled,
        })
    }

    /// Prediction in original units.
    pub fn forward(&self, sample: &[f64]) -> Result<f64> {
        Ok(self.scaler.invert(self.trace(sample)?.pred_scaled))
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        inputs.par_iter().map(|x| self.forward(x)).collect()
    }

    /// Squared error on the scaled target and its gradient over [`Self::params`].
    pub fn loss_and_gradient(&self, sample: &[f64], target: f64) -> Result<(f64, Vec<f64>)> {
        let tr = self.trace(sample)?;
        let err = tr.pred_scaled - self.scaler.apply(target);
        let g = 2.0 * err;
        let nq = self.quantum_weights.len();
        let n = self.n_qubits();
        let mut grad = vec![0.0; self.n_params()];
        for q in 0..n {
            grad[nq + q] = g * tr.pooled[q];
        }
        grad[nq + n] = g;
        // route dL/d<Z_q> to the selected kernel position, ReLU'(0) = 0
        let mut coeffs = vec![vec![0.0; n]; tr.windows.len()];
        let mut used = vec![false; tr.windows.len()];
        for q in 0..n {
            let j = tr.argmax[q];
            if tr.features[j][q] > 0.0 && self.head_weights[q] != 0.0 {
                coeffs[j][q] = g * self.head_weights[q];
                used[j] = true;
            }
        }
        for (j, c) in coeffs.iter().enumerate() {
            if !used[j] {
                continue;
            }
            let gq = self.circuit.grad_adjoint_weighted(&tr.windows[j], &self.quantum_weights, c)?;
            for (a, b) in grad[..nq].iter_mut().zip(gq) {
                *a += b;
            }
        }
        Ok((err * err, grad))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            descriptor: self.conv.descriptor,
            conv: ConvShape {
                c: self.conv.c,
                k: self.conv.k,
                p: self.conv.p,
                s: self.conv.s,
            },
            quantum_weights: self.quantum_weights.clone(),
            head_weights: self.head_weights.clone(),
            head_bias: self.head_bias,
            scaler: ScalerRecord {
                min: self.scaler.data_min,
                max: self.scaler.data_max,
                lo: 0.0,
                hi: Scaler::RANGE_HI,
            },
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.checkpoint())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: format!("{e}"),
        })?;
        ck.into_model()
    }

    /// Load a checkpoint and require it to match `expected`.
    pub fn load_for(path: impl AsRef<Path>, expected: &ModelDescriptor) -> Result<Self> {
        let m = Self::load(path)?;
        if m.conv.descriptor != *expected {
            return Err(Error::DescriptorMismatch(format!(
                "checkpoint holds {:?}, config asks for {:?}",
                m.conv.descriptor, expected
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvShape {
    pub c: usize,
    pub k: usize,
    pub p: usize,
    pub s: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerRecord {
    pub min: f64,
    pub max: f64,
    pub lo: f64,
    pub hi: f64,
}

/// On-disk model. Floats use shortest round-trip formatting, so reloads are bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub descriptor: ModelDescriptor,
    pub conv: ConvShape,
    pub quantum_weights: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    pub scaler: ScalerRecord,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<QConvModel> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::DescriptorMismatch(format!(
                "checkpoint format {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        if self.scaler.lo != 0.0 || self.scaler.hi != Scaler::RANGE_HI {
            return Err(Error::Scaler(format!(
                "unsupported target range [{}, {}]",
                self.scaler.lo, self.scaler.hi
            )));
        }
        let conv = ConvConfig {
            c: self.conv.c,
            k: self.conv.k,
            p: self.conv.p,
            s: self.conv.s,
            descriptor: self.descriptor,
        };
        QConvModel::from_parts(
            conv,
            self.quantum_weights,
            self.head_weights,
            self.head_bias,
            Scaler::new(self.scaler.min, self.scaler.max)?,
        )
    }
}

/// Error metrics on the original scale. `mape` is `None` when a target is 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
}

impl Metrics {
    pub fn compute(preds: &[f64], targets: &[f64]) -> Result<Self> {
        if preds.len() != targets.len() || preds.is_empty() {
            return Err(Error::Size(format!(
                "{} predictions for {} targets",
                preds.len(),
                targets.len()
            )));
        }
        let n = preds.len() as f64;
        let (mut se, mut ae, mut pe) = (0.0, 0.0, 0.0);
        let mut mape_defined = true;
        for (p, y) in preds.iter().zip(targets) {
            let e = p - y;
            se += e * e;
            ae += e.abs();
            if *y == 0.0 {
                mape_defined = false;
            } else {
                pe += (e / y).abs();
            }
        }
        Ok(Self {
            rmse: (se / n).sqrt(),
            mae: ae / n,
            mape: mape_defined.then_some(pe / n),
        })
    }
}

pub fn evaluate(model: &QConvModel, inputs: &[Vec<f64>], targets: &[f64]) -> Result<Metrics> {
    Metrics::compute(&model.predict(inputs)?, targets)
}

/// Forecast `x(t + h)` as `x(t)`, the last lag, on the test split.
pub fn persistence_metrics(dataset: &WindowedDataset) -> Result<Metrics> {
    let (x, y) = dataset.test();
    let preds: Vec<f64> = x.iter().map(|row| *row.last().unwrap()).collect();
    Metrics::compute(&preds, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.01,
            batch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_rmse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Snapshot with the lowest end-of-epoch training loss.
    pub model: QConvModel,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// `epoch,train_loss,test_rmse` rows.
    pub fn write_history_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["epoch", "train_loss", "test_rmse"]).map_err(err)?;
        for r in &self.history {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.test_rmse.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

/// Mean scaled squared error over a set of rows.
pub fn scaled_mse(model: &QConvModel, inputs: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let errs = inputs
        .par_iter()
        .zip(targets)
        .map(|(x, &y)| {
            let e = model.trace(x)?.pred_scaled - model.scaler.apply(y);
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mini-batch Adam on the training split. Batches are evaluated in
/// parallel and reduced in sample order, so results do not depend on the
/// number of worker threads.
pub fn train(model: QConvModel, dataset: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Domain("epochs and batch size must be positive".into()));
    }
    let (x, y) = dataset.train();
    if x.is_empty() {
        return Err(Error::Size("empty training split".into()));
    }
    let (xt, yt) = dataset.test();
    let mut model = model;
    let mut params = model.params();
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..x.len()).collect();
    let shuffle_seed = derive_seed(cfg.seed, "shuffle");
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, QConvModel)> = None;
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut substream(shuffle_seed, epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let parts = batch
                .par_iter()
                .map(|&i| model.loss_and_gradient(&x[i], y[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; params.len()];
            for (loss, g) in &parts {
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        msg: format!("non-finite batch loss {loss}"),
                    });
                }
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grad, cfg);
            model.set_params(&params)?;
        }
        let train_loss = scaled_mse(&model, x, y)?;
        if !train_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: format!("non-finite training loss {train_loss}"),
            });
        }
        let test_rmse = if xt.is_empty() {
            None
        } else {
            Some(evaluate(&model, xt, yt)?.rmse)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            test_rmse,
        });
        if best.as_ref().is_none_or(|b| train_loss < b.0) {
            best = Some((train_loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{AnsatzKind, ArchitectureKind};
    use crate::data::make_windows;

    fn model(ansatz: AnsatzKind, arch: ArchitectureKind, layers: usize, c: usize, seed: u64) -> QConvModel {
        let d = ModelDescriptor::new(ansatz, arch, 2, layers);
        QConvModel::new(ConvConfig::new(c, d).unwrap(), Scaler::new(-1.0, 2.0).unwrap(), seed).unwrap()
    }

    #[test]
    fn window_counts() {
        let d = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 1);
        assert_eq!(ConvConfig::new(5, d).unwrap().o(), 6);
        assert_eq!(ConvConfig::new(4, d).unwrap().o(), 5);
        assert!(ConvConfig::new(2, d).is_err());
        let cfg = ConvConfig::new(4, d).unwrap();
        let w = cfg.windows(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w, vec![vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0], vec![4.0, 0.0]]);
    }

    #[test]
    fn feature_map_shape() {
        let m = model(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 4, 1);
        let tr = m.trace(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(tr.features.len(), 5);
        assert!(tr.features.iter().all(|f| f.len() == 4));
        assert!(tr.features.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn identity_circuit_window() {
        let mut m = model(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 4, 1);
        m.quantum_weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.forward_window(&[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_head_predicts_bias() {
        let mut m = model(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 4, 3);
        m.head_weights.iter_mut().for_each(|w| *w = 0.0);
        m.head_bias = 0.7;
        for s in [[0.0, 0.5, 1.0, 1.5], [1.9, -0.8, 0.2, 0.0]] {
            assert!((m.forward(&s).unwrap() - m.scaler.invert(0.7)).abs() < 1e-15);
        }
    }

    fn fd_check(m: &QConvModel, sample: &[f64], target: f64) -> f64 {
        let (_, g) = m.loss_and_gradient(sample, target).unwrap();
        let p0 = m.params();
        let h = 1e-4;
        let mut mm = m.clone();
        let mut worst: f64 = 0.0;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            mm.set_params(&p).unwrap();
            let lp = mm.loss_and_gradient(sample, target).unwrap().0;
            p[i] -= 2.0 * h;
            mm.set_params(&p).unwrap();
            let lm = mm.loss_and_gradient(sample, target).unwrap().0;
            worst = worst.max(((lp - lm) / (2.0 * h) - g[i]).abs());
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for kind in [
            AnsatzKind::StronglyEntangling,
            AnsatzKind::BasicEntangler,
            AnsatzKind::CustomLayers,
            AnsatzKind::random(),
        ] {
            for (arch, layers) in [(ArchitectureKind::SuperParallel, 2), (ArchitectureKind::SuperParallel, 3)] {
                let m = model(kind, arch, layers, 4, 11);
                let err = fd_check(&m, &[0.3, -0.2, 1.1, 0.6], 0.9);
                assert!(err < 1e-5, "{kind} L={layers}: {err}");
            }
        }
    }

    #[test]
    fn perfect_prediction_has_zero_head_gradient() {
        let m = model(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 4, 5);
        let s = [0.3, -0.2, 1.1, 0.6];
        let target = m.forward(&s).unwrap();
        let (loss, g) = m.loss_and_gradient(&s, target).unwrap();
        assert!(loss < 1e-24);
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn dead_relu_blocks_quantum_gradient() {
        // RX(pi) on both qubits flips to |11>, so every <Z_q> is -1
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::NonReuploading, 2, 1);
        let conv = ConvConfig::new(4, d).unwrap();
        let nw = build_architecture(&d).unwrap().n_weights();
        let mut qw = vec![0.0; nw];
        qw[0] = std::f64::consts::PI;
        qw[1] = std::f64::consts::PI;
        let m = QConvModel::from_parts(conv, qw, vec![0.5, -0.3], 0.1, Scaler::new(10.0, 11.0).unwrap()).unwrap();
        let tr = m.trace(&[10.0; 4]).unwrap();
        assert!(tr.features.iter().flatten().all(|&v| v <= 0.0), "{:?}", tr.features);
        let (_, g) = m.loss_and_gradient(&[10.0; 4], 10.9).unwrap();
        assert!(g[..nw].iter().all(|&v| v == 0.0));
        assert!(g[nw + 2] != 0.0);
    }

    #[test]
    fn metrics_examples() {
        let m = Metrics::compute(&[3.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!((m.rmse, m.mae, m.mape), (1.0, 1.0, Some(0.5)));
        let m = Metrics::compute(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.rmse, m.mae, m.mape), (0.0, 0.0, Some(0.0)));
        assert_eq!(Metrics::compute(&[1.0], &[0.0]).unwrap().mape, None);
        assert!(Metrics::compute(&[], &[]).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let m = model(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 4, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = QConvModel::load(&path).unwrap();
        assert_eq!(back, m);
        let mut rng = substream(5, 5);
        for _ in 0..100 {
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..2.0)).collect();
            assert_eq!(m.forward(&s).unwrap().to_bits(), back.forward(&s).unwrap().to_bits());
        }
    }

    #[test]
    fn checkpoint_errors() {
        let m = model(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 4, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = dir.path().join("cut.json");
        std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
        assert!(matches!(QConvModel::load(&cut), Err(Error::Parse { .. })));
        let other = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 2);
        assert!(matches!(QConvModel::load_for(&path, &other), Err(Error::DescriptorMismatch(_))));
        assert!(QConvModel::load_for(&path, &m.conv.descriptor).is_ok());
    }

    fn toy_dataset(n: usize, split: usize, f: impl Fn(usize) -> f64) -> WindowedDataset {
        let s: Vec<f64> = (0..n).map(f).collect();
        make_windows(&s, &[-3, -2, -1, 0], 1, split).unwrap()
    }

    #[test]
    fn constant_target_is_fitted() {
        let mut ds = toy_dataset(600, 500, |i| 0.5 + 0.3 * ((i as f64) * 0.4).sin());
        ds.targets.iter_mut().for_each(|t| *t = 0.5);
        let scaler = ds.fit_scaler().unwrap();
        let d = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 1);
        let m = QConvModel::new(ConvConfig::new(4, d).unwrap(), scaler, 2).unwrap();
        let out = train(m, &ds, &TrainConfig::default()).unwrap();
        assert_eq!(out.history.len(), 30);
        let best = out.history.iter().map(|r| r.train_loss).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-4, "{best}");
        assert_eq!(out.history[out.best_epoch - 1].train_loss, best);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset(120, 80, |i| ((i as f64) * 0.3).sin());
        let scaler = ds.fit_scaler().unwrap();
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 1);
        let cfg = TrainConfig {
            epochs: 3,
            seed: 4,
            ..Default::default()
        };
        let run = || train(QConvModel::new(ConvConfig::new(4, d).unwrap(), scaler, 4).unwrap(), &ds, &cfg).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn divergence_is_reported() {
        let ds = toy_dataset(120, 80, |i| ((i as f64) * 0.3).sin());
        let scaler = ds.fit_scaler().unwrap();
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 1);
        let m = QConvModel::new(ConvConfig::new(4, d).unwrap(), scaler, 4).unwrap();
        let cfg = TrainConfig {
            learning_rate: f64::INFINITY,
            epochs: 2,
            ..Default::default()
        };
        assert!(matches!(train(m, &ds, &cfg), Err(Error::Training { epoch: 1, .. })));
    }
}
