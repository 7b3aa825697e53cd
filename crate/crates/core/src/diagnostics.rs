//! Expressibility and gradient-variance probes.
//!
//! Expressibility compares the distribution of pairwise state fidelities a
//! circuit produces under random weights against the Haar fidelity density
//! `(N - 1)(1 - F)^(N - 2)` through a binned Kullback-Leibler divergence.
//! The gradient probe estimates `Var[d<Z_0>/d w_k]` over random weights.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_architecture, ModelDescriptor};
use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};
use crate::sim::{fidelity, StateVector};
use crate::spectra::sample_weights;

pub const DEFAULT_PAIRS: usize = 5000;
pub const DEFAULT_BINS: usize = 75;
pub const DEFAULT_VARIANCE_SAMPLES: usize = 200;
/// Slot 1 is the `theta` of the first `ROT`; slot 0 is an `RZ` acting on `|0>`
/// in the ROT-based ansatz and has an identically zero derivative.
pub const DEFAULT_VARIANCE_PARAMETER: usize = 1;

/// Data fed to the encoding gates while sampling weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataPolicy {
    /// All features zero, so `RY(0)` encodings act as the identity.
    #[default]
    Zeros,
    /// One uniform `[0, 2pi)` feature vector per sample, shared by both
    /// states of a fidelity pair.
    Random,
}

/// Haar density of the fidelity between two random states in dimension `dim`.
pub fn haar_pdf(fid: f64, dim: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fid) {
        return Err(Error::Domain(format!("fidelity {fid} outside [0, 1]")));
    }
    if dim < 2 {
        return Err(Error::Domain(format!("Hilbert-space dimension {dim} < 2")));
    }
    let n = dim as f64;
    Ok((n - 1.0) * (1.0 - fid).powf(n - 2.0))
}

/// Haar probability mass of `[bin / n_bins, (bin + 1) / n_bins)`.
pub fn haar_bin_probability(bin: usize, n_bins: usize, dim: u64) -> f64 {
    let lo = bin as f64 / n_bins as f64;
    let hi = (bin + 1) as f64 / n_bins as f64;
    let e = dim as f64 - 1.0;
    (1.0 - lo).powf(e) - (1.0 - hi).powf(e)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FidelityHistogram {
    pub n_bins: usize,
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

impl FidelityHistogram {
    /// Bin fidelities on `[0, 1]`; `F = 1` lands in the last bin.
    pub fn from_samples(fids: &[f64], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Domain("histogram needs at least one bin".into()));
        }
        let mut counts = vec![0u64; n_bins];
        for &f in fids {
            if !(0.0..=1.0 + 1e-12).contains(&f) {
                return Err(Error::Domain(format!("fidelity {f} outside [0, 1]")));
            }
            let b = ((f * n_bins as f64) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
        Ok(Self {
            n_bins,
            counts,
            n_samples: fids.len(),
        })
    }

    /// `sum_b p_b ln(p_b / q_b)` against the Haar bin masses; empty bins add 0.
    pub fn kl_to_haar(&self, dim: u64) -> Result<f64> {
        let total = self.n_samples as f64;
        let mut kl = 0.0;
        for (b, &count) in self.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p = count as f64 / total;
            let q = haar_bin_probability(b, self.n_bins, dim);
            if q <= 0.0 {
                return Err(Error::NumericalGuard(format!(
                    "bin {b} holds {count} samples but has zero Haar mass"
                )));
            }
            kl += p * (p / q).ln();
        }
        Ok(kl.max(0.0))
    }

    /// `bin_lo, bin_hi, count, haar_prob` rows.
    pub fn write_csv<W: Write>(&self, out: W, dim: u64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["bin_lo", "bin_hi", "count", "haar_prob"]).map_err(io)?;
        for (b, count) in self.counts.iter().enumerate() {
            w.write_record([
                (b as f64 / self.n_bins as f64).to_string(),
                ((b + 1) as f64 / self.n_bins as f64).to_string(),
                count.to_string(),
                format!("{:e}", haar_bin_probability(b, self.n_bins, dim)),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

fn policy_data(policy: DataPolicy, features: usize, rng: &mut StreamRng) -> Vec<f64> {
    match policy {
        DataPolicy::Zeros => vec![0.0; features],
        DataPolicy::Random => (0..features).map(|_| rng.random_range(0.0..TAU)).collect(),
    }
}

/// Fidelities of `n_pairs` state pairs from independent uniform weight draws.
pub fn sample_fidelities(
    desc: &ModelDescriptor,
    n_pairs: usize,
    seed: u64,
    policy: DataPolicy,
) -> Result<Vec<f64>> {
    let circuit = build_architecture(desc)?;
    let nw = circuit.n_weights();
    (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let theta = sample_weights(nw, seed, 2 * i);
            let phi = sample_weights(nw, seed, 2 * i + 1);
            // data stream lives far above the weight streams
            let mut drng = substream(seed, (1 << 62) + i);
            let x = policy_data(policy, desc.kernel, &mut drng);
            fidelity(&circuit.run(&x, &theta)?, &circuit.run(&x, &phi)?)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpressibilityResult {
    pub kind: &'static str,
    pub descriptor: ModelDescriptor,
    pub n_qubits: usize,
    pub kl: f64,
    /// `(N - 1) ln(b)`, reported for reference.
    pub upper_bound: f64,
    pub n_pairs: usize,
    pub n_bins: usize,
    pub seed: u64,
    pub data_policy: DataPolicy,
    #[serde(skip)]
    pub histogram: FidelityHistogram,
}

pub fn expressibility(
    desc: &ModelDescriptor,
    n_pairs: usize,
    n_bins: usize,
    seed: u64,
    policy: DataPolicy,
) -> Result<ExpressibilityResult> {
    let fids = sample_fidelities(desc, n_pairs, seed, policy)?;
    let histogram = FidelityHistogram::from_samples(&fids, n_bins)?;
    let dim = 1u64 << desc.n_qubits();
    let kl = histogram.kl_to_haar(dim)?;
    Ok(ExpressibilityResult {
        kind: "expressibility",
        descriptor: *desc,
        n_qubits: desc.n_qubits(),
        kl,
        upper_bound: (dim as f64 - 1.0) * (n_bins as f64).ln(),
        n_pairs,
        n_bins,
        seed,
        data_policy: policy,
        histogram,
    })
}

/// Haar-random state: normalized vector of complex standard normals.
pub fn haar_random_state(n_qubits: usize, rng: &mut StreamRng) -> Result<StateVector> {
    let dim = 1usize << n_qubits;
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceResult {
    pub kind: &'static str,
    pub descriptor: ModelDescriptor,
    pub n_qubits: usize,
    pub variance: f64,
    pub mean: f64,
    pub n_samples: usize,
    pub parameter_index: usize,
    pub seed: u64,
    pub data_policy: DataPolicy,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Unbiased sample mean and variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (n - 1.0))
}

/// Sample variance of `d<Z_0>/d w_k` over uniform weight draws, with the
/// derivative taken by the shift rule.
pub fn gradient_variance(
    desc: &ModelDescriptor,
    n_samples: usize,
    seed: u64,
    parameter_index: usize,
    policy: DataPolicy,
) -> Result<VarianceResult> {
    let circuit = build_architecture(desc)?;
    let nw = circuit.n_weights();
    if parameter_index >= nw {
        return Err(Error::Index(format!(
            "parameter {parameter_index} out of range ({nw} weights)"
        )));
    }
    let grads = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let w = sample_weights(nw, seed, i);
            let mut drng = substream(seed, (1 << 62) + i);
            let x = policy_data(policy, desc.kernel, &mut drng);
            circuit.shift_derivative(&x, &w, 0, parameter_index)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, variance) = mean_and_variance(&grads);
    Ok(VarianceResult {
        kind: "variance",
        descriptor: *desc,
        n_qubits: desc.n_qubits(),
        variance,
        mean,
        n_samples,
        parameter_index,
        seed,
        data_policy: policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{AnsatzKind, ArchitectureKind};
    use crate::sim::{Circuit, GateOp, Param};

    /// Composite Simpson's rule.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn haar_pdf_values() {
        assert_eq!(haar_pdf(0.0, 2).unwrap(), 1.0);
        assert_eq!(haar_pdf(1.0, 4).unwrap(), 0.0);
        assert!(haar_pdf(1.5, 4).is_err());
        assert!(haar_pdf(-0.1, 4).is_err());
        for dim in [2u64, 4, 16, 64, 256] {
            let integral = simpson(|f| haar_pdf(f, dim).unwrap(), 0.0, 1.0, 20_000);
            assert!((integral - 1.0).abs() < 1e-8, "N={dim}: {integral}");
        }
    }

    #[test]
    fn haar_bins() {
        assert!((haar_bin_probability(0, 1, 16) - 1.0).abs() < 1e-15);
        let total: f64 = (0..75).map(|b| haar_bin_probability(b, 75, 16)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for b in 0..75 {
            assert!((haar_bin_probability(b, 75, 2) - 1.0 / 75.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_counts_and_edges() {
        let h = FidelityHistogram::from_samples(&[0.0, 0.5, 1.0, 0.999], 4).unwrap();
        assert_eq!(h.counts, vec![1, 0, 1, 2]);
        assert_eq!(h.counts.iter().sum::<u64>(), 4);
        assert!(FidelityHistogram::from_samples(&[1.2], 4).is_err());
    }

    #[test]
    fn sampled_fidelities_in_unit_interval() {
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 1);
        let fids = sample_fidelities(&d, 50, 1, DataPolicy::Zeros).unwrap();
        assert_eq!(fids.len(), 50);
        assert!(fids.iter().all(|f| (0.0..=1.0 + 1e-12).contains(f)));
        assert_eq!(fids, sample_fidelities(&d, 50, 1, DataPolicy::Zeros).unwrap());
    }

    #[test]
    fn single_ry_fidelity_distribution() {
        // F = cos^2((t - p)/2) with t, p uniform: P(F <= f) = 2 acos(sqrt f)... derived below
        let circuit = Circuit::new(1, 0, 1, vec![GateOp::Ry { qubit: 0, angle: Param::Weight(0) }]).unwrap();
        let n = 5000;
        let mut fids: Vec<f64> = (0..n as u64)
            .map(|i| {
                let a = sample_weights(1, 9, 2 * i);
                let b = sample_weights(1, 9, 2 * i + 1);
                fidelity(&circuit.run(&[], &a).unwrap(), &circuit.run(&[], &b).unwrap()).unwrap()
            })
            .collect();
        fids.sort_by(f64::total_cmp);
        // d = t - p mod 2pi is uniform, F = cos^2(d/2) = (1 + cos d)/2, so
        // P(F <= f) = 1 - acos(2f - 1)/pi.
        let cdf = |f: f64| 1.0 - (2.0 * f - 1.0).clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
        let ks = fids
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let emp_hi = (i + 1) as f64 / n as f64;
                let emp_lo = i as f64 / n as f64;
                (emp_hi - cdf(f)).abs().max((cdf(f) - emp_lo).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS distance {ks}");
    }

    #[test]
    fn haar_oracle_has_small_kl() {
        let n = 5000u64;
        let fids: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = substream(17, i);
                let a = haar_random_state(4, &mut rng).unwrap();
                let b = haar_random_state(4, &mut rng).unwrap();
                fidelity(&a, &b).unwrap()
            })
            .collect();
        let h = FidelityHistogram::from_samples(&fids, 75).unwrap();
        let kl = h.kl_to_haar(16).unwrap();
        assert!((0.0..0.01).contains(&kl), "kl={kl}");
    }

    #[test]
    fn kl_nonnegative_and_guarded() {
        let h = FidelityHistogram::from_samples(&[0.99; 10], 10).unwrap();
        assert!(h.kl_to_haar(16).unwrap() > 0.0);
        // N = 2^40 makes the last bin's Haar mass underflow to 0
        let err = h.kl_to_haar(1 << 40).unwrap_err();
        assert!(matches!(err, Error::NumericalGuard(_)));
    }

    #[test]
    fn variance_zero_outside_light_cone() {
        // RX on qubit 1 never reaches <Z_0> without an entangler
        let iso = Circuit::new(2, 0, 2, vec![
            GateOp::Ry { qubit: 0, angle: Param::Weight(0) },
            GateOp::Rx { qubit: 1, angle: Param::Weight(1) },
        ])
        .unwrap();
        let g: Vec<f64> = (0..50)
            .map(|i| iso.shift_derivative(&[], &sample_weights(2, 3, i), 0, 1).unwrap())
            .collect();
        assert!(mean_and_variance(&g).1 < 1e-28);
    }

    #[test]
    fn variance_is_deterministic_and_nonnegative() {
        let d = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 2);
        let a = gradient_variance(&d, 40, 5, 1, DataPolicy::Zeros).unwrap();
        let b = gradient_variance(&d, 40, 5, 1, DataPolicy::Zeros).unwrap();
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
        assert!(a.variance >= 0.0);
        assert!(gradient_variance(&d, 4, 5, 10_000, DataPolicy::Zeros).is_err());
    }

    #[test]
    fn compensated_variance_matches_naive() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let (m, var) = mean_and_variance(&v);
        let nm = v.iter().sum::<f64>() / 100.0;
        let nv = v.iter().map(|x| (x - nm).powi(2)).sum::<f64>() / 99.0;
        assert!((m - nm).abs() < 1e-14 && (var - nv).abs() < 1e-14);
    }
}
