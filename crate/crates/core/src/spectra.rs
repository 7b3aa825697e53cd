//! Accessible Fourier coefficients of a model.
//!
//! The model output `f(x) = <Z_0>` is sampled on a regular `G^M` grid over
//! `[0, 2pi)^M` and transformed with a multidimensional DFT. Repeating this
//! for many random weight draws shows which frequencies the trainable part
//! can switch on; the largest such frequency is the degree of the series.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::ansatz::{build_architecture, expected_degree, ModelDescriptor};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sim::Circuit;

/// Grid points per axis used for all reproductions.
pub const DEFAULT_GRID: usize = 64;
/// `|c_w|` above which a frequency counts as accessible.
pub const DEFAULT_THRESHOLD: f64 = 1e-5;
pub const DEFAULT_SAMPLES: usize = 100;

/// Integer frequency vector, one component per encoded feature.
pub type Frequency = Vec<i32>;

/// Inverse of the row-major flat index; axis 0 varies slowest.
fn unflatten(mut idx: usize, features: usize, grid: usize) -> Vec<usize> {
    let mut out = vec![0; features];
    for m in (0..features).rev() {
        out[m] = idx % grid;
        idx /= grid;
    }
    out
}

fn check_grid(desc: &ModelDescriptor, grid: usize) -> Result<()> {
    let degree = expected_degree(desc).unwrap_or(0);
    let needed = (2 * degree + 2).max(2);
    if grid < needed {
        return Err(Error::Aliasing {
            grid,
            degree,
            needed,
        });
    }
    Ok(())
}

/// `<Z_0>` of the model at every grid point `x_m = 2 pi g_m / G`.
pub fn evaluate_grid(desc: &ModelDescriptor, weights: &[f64], grid: usize) -> Result<Vec<f64>> {
    check_grid(desc, grid)?;
    let circuit = build_architecture(desc)?;
    grid_values(&circuit, weights, grid)
}

fn grid_values(circuit: &Circuit, weights: &[f64], grid: usize) -> Result<Vec<f64>> {
    let features = circuit.n_data();
    let total = grid.pow(features as u32);
    let mut x = vec![0.0; features];
    (0..total)
        .map(|idx| {
            for (xm, g) in x.iter_mut().zip(unflatten(idx, features, grid)) {
                *xm = TAU * g as f64 / grid as f64;
            }
            circuit.expval_z(&x, weights, 0)
        })
        .collect()
}

/// Dense DFT coefficients of a real grid, addressable by centered frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    features: usize,
    grid: usize,
    /// FFT order: axis index `k` holds frequency `k` for `k < G/2`, else `k - G`.
    values: Vec<Complex64>,
}

impl Coefficients {
    pub fn features(&self) -> usize {
        self.features
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    fn slot(&self, k: i32) -> Option<usize> {
        let half = (self.grid / 2) as i32;
        if k < -half || k >= self.grid as i32 - half {
            return None;
        }
        Some(k.rem_euclid(self.grid as i32) as usize)
    }

    fn freq_of(&self, axis_index: usize) -> i32 {
        if axis_index < self.grid.div_ceil(2) {
            axis_index as i32
        } else {
            axis_index as i32 - self.grid as i32
        }
    }

    /// `c_w`, or zero for frequencies outside the grid's range.
    pub fn get(&self, freq: &[i32]) -> Complex64 {
        if freq.len() != self.features {
            return Complex64::new(0.0, 0.0);
        }
        let mut idx = 0;
        for &k in freq {
            match self.slot(k) {
                Some(s) => idx = idx * self.grid + s,
                None => return Complex64::new(0.0, 0.0),
            }
        }
        self.values[idx]
    }

    /// All `(frequency, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Frequency, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(idx, c)| {
            let f = unflatten(idx, self.features, self.grid)
                .into_iter()
                .map(|k| self.freq_of(k))
                .collect();
            (f, *c)
        })
    }

    /// Largest `|c_w - conj(c_-w)|` over all `w` whose negation is on the grid.
    pub fn conjugate_asymmetry(&self) -> f64 {
        self.iter()
            .filter(|(f, _)| f.iter().all(|&k| self.slot(-k).is_some()))
            .map(|(f, c)| {
                let neg: Vec<i32> = f.iter().map(|k| -k).collect();
                (c - self.get(&neg).conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// `c_w = G^-M sum_g f(g) exp(-i 2pi w.g / G)`, computed axis by axis.
pub fn dft_coefficients(grid_values: &[f64], features: usize, grid: usize) -> Result<Coefficients> {
    let total = grid
        .checked_pow(features as u32)
        .ok_or_else(|| Error::Size("grid too large".into()))?;
    if features == 0 || grid_values.len() != total {
        return Err(Error::Size(format!(
            "grid has {} values, expected {grid}^{features} = {total}",
            grid_values.len()
        )));
    }
    let mut values: Vec<Complex64> = grid_values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(grid);
    let mut line = vec![Complex64::new(0.0, 0.0); grid];
    for axis in 0..features {
        let stride = grid.pow((features - 1 - axis) as u32);
        for start in 0..total {
            // each line is identified by its first element (axis coordinate 0)
            if (start / stride) % grid != 0 {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = values[start + k * stride];
            }
            fft.process(&mut line);
            for (k, v) in line.iter().enumerate() {
                values[start + k * stride] = *v;
            }
        }
    }
    let scale = 1.0 / total as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(Coefficients {
        features,
        grid,
        values,
    })
}

/// Per-feature count of encoding gates: a hard cap on `|w_m|`.
pub fn band_limit(desc: &ModelDescriptor) -> Result<Vec<usize>> {
    let circuit = build_architecture(desc)?;
    Ok((0..desc.kernel).map(|m| circuit.data_slot_uses(m)).collect())
}

/// Uniform `[0, 2pi)` weights for sample `index` of the stream `seed`.
pub fn sample_weights(n_weights: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = substream(seed, index);
    (0..n_weights).map(|_| rng.random_range(0.0..TAU)).collect()
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub descriptor: ModelDescriptor,
    pub grid: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub threshold: f64,
    /// One coefficient set per weight draw.
    pub samples: Vec<Coefficients>,
    /// Frequencies whose largest `|c_w|` over all draws exceeds `threshold`.
    pub accessible: Vec<Frequency>,
    pub degree: usize,
}

/// Spectrum of `desc` over `n_samples` random weight draws.
pub fn sample_spectrum(
    desc: &ModelDescriptor,
    n_samples: usize,
    seed: u64,
    grid: usize,
    threshold: f64,
) -> Result<SpectrumReport> {
    check_grid(desc, grid)?;
    let circuit = build_architecture(desc)?;
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let w = sample_weights(circuit.n_weights(), seed, i as u64);
            let values = grid_values(&circuit, &w, grid)?;
            dft_coefficients(&values, desc.kernel, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let (accessible, degree) = accessible_set(&samples, threshold);
    Ok(SpectrumReport {
        descriptor: *desc,
        grid,
        n_samples,
        seed,
        threshold,
        samples,
        accessible,
        degree,
    })
}

fn accessible_set(samples: &[Coefficients], threshold: f64) -> (Vec<Frequency>, usize) {
    let mut set = BTreeSet::new();
    if let Some(first) = samples.first() {
        let n = first.values.len();
        for idx in 0..n {
            if samples.iter().any(|s| s.values[idx].norm() > threshold) {
                let f: Frequency = unflatten(idx, first.features, first.grid)
                    .into_iter()
                    .map(|k| first.freq_of(k))
                    .collect();
                set.insert(f);
            }
        }
    }
    let degree = set
        .iter()
        .map(|f| f.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    (set.into_iter().collect(), degree)
}

impl SpectrumReport {
    /// Largest `max_w |c_w|` over draws, for `w` with some `|w_m|` beyond `limit[m]`.
    pub fn max_beyond(&self, limit: &[usize]) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.iter())
            .filter(|(f, _)| f.iter().zip(limit).any(|(k, &l)| k.unsigned_abs() as usize > l))
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_conjugate_asymmetry(&self) -> f64 {
        self.samples
            .iter()
            .map(Coefficients::conjugate_asymmetry)
            .fold(0.0, f64::max)
    }

    /// Summary record: descriptor, grid, threshold, degree and accessible set.
    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            kind: "spectrum",
            descriptor: self.descriptor,
            n_qubits: self.descriptor.n_qubits(),
            trainable_parameters: self.descriptor.n_weights(),
            expected_degree: expected_degree(&self.descriptor).ok(),
            grid: self.grid,
            n_samples: self.n_samples,
            seed: self.seed,
            threshold: self.threshold,
            degree: self.degree,
            accessible: self.accessible.clone(),
        }
    }

    /// Per-sample `(sample, w_1..w_M, re, im)` rows for accessible frequencies.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.descriptor.kernel;
        let mut header = vec!["sample".to_string()];
        header.extend((1..=m).map(|i| format!("w{i}")));
        header.extend(["re".to_string(), "im".to_string()]);
        w.write_record(&header).map_err(csv_err)?;
        for (i, s) in self.samples.iter().enumerate() {
            for f in &self.accessible {
                let c = s.get(f);
                let mut row = vec![i.to_string()];
                row.extend(f.iter().map(|k| k.to_string()));
                row.push(format!("{:e}", c.re));
                row.push(format!("{:e}", c.im));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Scatter of `c_w` in the complex plane, one panel per accessible
    /// frequency with `w >= 0` lexicographically (the rest are conjugates).
    pub fn to_svg(&self) -> String {
        let half: Vec<&Frequency> = self
            .accessible
            .iter()
            .filter(|f| f.iter().find(|&&k| k != 0).is_none_or(|&k| k > 0))
            .collect();
        let cols = (half.len() as f64).sqrt().ceil().max(1.0) as usize;
        let rows = half.len().div_ceil(cols).max(1);
        let cell = 90.0;
        let (width, height) = (cols as f64 * cell + 20.0, rows as f64 * cell + 50.0);
        let scale = self
            .samples
            .iter()
            .flat_map(|s| half.iter().map(move |f| s.get(f).norm()))
            .fold(1e-12, f64::max);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="10" y="20" font-size="13">{} / {} / M={} L={} : degree {} ({} draws)</text>"#,
            self.descriptor.ansatz,
            self.descriptor.architecture,
            self.descriptor.kernel,
            self.descriptor.layers,
            self.degree,
            self.n_samples
        );
        for (p, f) in half.iter().enumerate() {
            let (x0, y0) = (10.0 + (p % cols) as f64 * cell, 35.0 + (p / cols) as f64 * cell);
            let (cx, cy, r) = (x0 + cell / 2.0, y0 + cell / 2.0 + 4.0, cell / 2.0 - 10.0);
            let _ = writeln!(
                svg,
                r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#ccc"/><text x="{}" y="{}">{:?}</text>"##,
                cell - 4.0,
                cell - 4.0,
                x0 + 3.0,
                y0 + 10.0,
                f
            );
            for s in &self.samples {
                let c = s.get(f) / scale;
                let _ = writeln!(
                    svg,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="#1f77b4"/>"##,
                    cx + c.re * r,
                    cy - c.im * r
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub kind: &'static str,
    pub descriptor: ModelDescriptor,
    pub n_qubits: usize,
    pub trainable_parameters: usize,
    pub expected_degree: Option<usize>,
    #[serde(rename = "G")]
    pub grid: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub threshold: f64,
    pub degree: usize,
    pub accessible: Vec<Frequency>,
}
