//! Dataset generation, CSV ingestion, windowing and scaling.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

pub const LEGENDRE_POINTS: usize = 1000;
pub const LEGENDRE_SIGMA: f64 = 0.05;
/// 1024 points give exactly 1000 windows with the Mackey-Glass lag layout.
pub const MACKEY_GLASS_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Legendre { sigma: f64, seed: u64 },
    MackeyGlass(MackeyGlassParams),
    CsvFile { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub origin: Origin,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Two-column `t,value` CSV with a header, readable by [`load_csv`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"]).map_err(csv_err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([(i + 1).to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// `(3x^2 - 1)/2` on equispaced `x` in `[-1, 1]` plus seeded Gaussian noise.
pub fn gen_legendre(n_points: usize, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if n_points < 6 {
        return Err(Error::Size(format!("need at least 6 points, got {n_points}")));
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| Error::Domain(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = substream(seed, 0);
    let values = (0..n_points)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (n_points - 1) as f64;
            0.5 * (3.0 * x * x - 1.0) + rng.sample(noise)
        })
        .collect();
    Ok(TimeSeries {
        values,
        origin: Origin::Legendre { sigma, seed },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassParams {
    pub n_points: usize,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub exponent: f64,
    pub x0: f64,
    pub dt: f64,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            n_points: MACKEY_GLASS_POINTS,
            tau: 17.0,
            a: 0.2,
            b: 0.1,
            exponent: 10.0,
            x0: 1.2,
            dt: 0.1,
        }
    }
}

/// RK4 integration of `dx/dt = a x(t-tau)/(1 + x(t-tau)^n) - b x(t)`,
/// sampled at `t = 1..=n_points`.
pub fn gen_mackey_glass(p: &MackeyGlassParams) -> Result<TimeSeries> {
    if !(p.tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {}", p.tau)));
    }
    let steps_per_unit = (1.0 / p.dt).round();
    if !(p.dt > 0.0) || (steps_per_unit * p.dt - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("dt {} must divide 1", p.dt)));
    }
    let spu = steps_per_unit as usize;
    let total = p.n_points * spu;
    // hist[i] = x(i * dt)
    let mut hist = Vec::with_capacity(total + 1);
    hist.push(p.x0);
    let delayed = |hist: &[f64], t: f64| -> f64 {
        let s = (t - p.tau) / p.dt;
        if s <= 0.0 {
            return p.x0;
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        if i + 1 >= hist.len() {
            return hist[hist.len() - 1];
        }
        hist[i] * (1.0 - frac) + hist[i + 1] * frac
    };
    let f = |x: f64, xd: f64| p.a * xd / (1.0 + xd.powf(p.exponent)) - p.b * x;
    let mut values = Vec::with_capacity(p.n_points);
    for step in 0..total {
        let t = step as f64 * p.dt;
        let x = hist[step];
        let d0 = delayed(&hist, t);
        let dh = delayed(&hist, t + 0.5 * p.dt);
        let d1 = delayed(&hist, t + p.dt);
        let k1 = f(x, d0);
        let k2 = f(x + 0.5 * p.dt * k1, dh);
        let k3 = f(x + 0.5 * p.dt * k2, dh);
        let k4 = f(x + p.dt * k3, d1);
        let next = x + p.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Integration {
                time: t + p.dt,
                msg: format!("state became {next}"),
            });
        }
        hist.push(next);
        if (step + 1) % spu == 0 {
            values.push(next);
        }
    }
    Ok(TimeSeries {
        values,
        origin: Origin::MackeyGlass(*p),
    })
}

/// Read a `date,value` CSV. A first row whose value column is not numeric
/// is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 columns, found {}", rec.len())));
        }
        match rec[1].parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(parse_err(line, format!("non-finite value {v}"))),
            Err(_) if line == 1 => continue,
            Err(_) => return Err(parse_err(line, format!("non-numeric value {:?}", &rec[1]))),
        }
    }
    if values.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }
    Ok(TimeSeries {
        values,
        origin: Origin::CsvFile {
            path: path.to_path_buf(),
        },
    })
}

/// Lagged inputs and horizon targets, split into train and test at `split_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub lag_offsets: Vec<i64>,
    pub horizon: usize,
    pub split_index: usize,
}

pub const MACKEY_GLASS_LAGS: [i64; 4] = [-18, -12, -6, 0];
pub const MACKEY_GLASS_HORIZON: usize = 6;
pub const MACKEY_GLASS_SPLIT: usize = 500;
pub const EURO_LAGS: [i64; 5] = [-4, -3, -2, -1, 0];
pub const EURO_SPLIT: usize = 300;
pub const LEGENDRE_LAGS: [i64; 5] = [-4, -3, -2, -1, 0];
pub const LEGENDRE_SPLIT: usize = 750;

pub fn make_windows(
    series: &[f64],
    lag_offsets: &[i64],
    horizon: usize,
    split_index: usize,
) -> Result<WindowedDataset> {
    if lag_offsets.is_empty() || lag_offsets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("lag offsets must be non-empty and strictly ascending".into()));
    }
    if *lag_offsets.last().unwrap() > 0 {
        return Err(Error::Domain("lag offsets must be <= 0".into()));
    }
    let back = (-lag_offsets[0]) as usize;
    let n = series.len();
    if back + horizon >= n {
        return Err(Error::Range(format!(
            "lags reach back {back} and horizon {horizon} but series has {n} points"
        )));
    }
    let rows = n - back - horizon;
    if split_index == 0 || split_index >= rows {
        return Err(Error::Range(format!("split {split_index} outside 1..{rows}")));
    }
    let mut inputs = Vec::with_capacity(rows);
    let mut targets = Vec::with_capacity(rows);
    for t in back..back + rows {
        inputs.push(lag_offsets.iter().map(|&o| series[(t as i64 + o) as usize]).collect());
        targets.push(series[t + horizon]);
    }
    Ok(WindowedDataset {
        inputs,
        targets,
        lag_offsets: lag_offsets.to_vec(),
        horizon,
        split_index,
    })
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self) -> usize {
        self.lag_offsets.len()
    }

    pub fn train(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.inputs[..self.split_index], &self.targets[..self.split_index])
    }

    pub fn test(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.inputs[self.split_index..], &self.targets[self.split_index..])
    }

    /// Scaler fitted on the training rows only.
    pub fn fit_scaler(&self) -> Result<Scaler> {
        let (x, y) = self.train();
        Scaler::fit(x.iter().flatten().chain(y.iter()).copied())
    }
}

/// Affine map of `[data_min, data_max]` onto `[0, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub data_min: f64,
    pub data_max: f64,
}

impl Scaler {
    pub const RANGE_HI: f64 = PI;

    pub fn new(data_min: f64, data_max: f64) -> Result<Self> {
        if !(data_max > data_min) || !data_min.is_finite() || !data_max.is_finite() {
            return Err(Error::Scaler(format!("degenerate range [{data_min}, {data_max}]")));
        }
        Ok(Self { data_min, data_max })
    }

    pub fn fit(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self::new(lo, hi)
    }

    fn span(&self) -> f64 {
        self.data_max - self.data_min
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.data_min) / self.span() * Self::RANGE_HI
    }

    pub fn invert(&self, s: f64) -> f64 {
        s / Self::RANGE_HI * self.span() + self.data_min
    }

    /// d(original)/d(scaled).
    pub fn invert_slope(&self) -> f64 {
        self.span() / Self::RANGE_HI
    }
}
