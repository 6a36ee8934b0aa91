//! Per-client load-series preprocessing: scaling, windowing, chronological
//! splitting, eligibility statistics, plus synthetic data generation.

mod csv;
mod synth;

pub use csv::{load_client_csv, write_client_csv};
pub use synth::{synth_generate, SynthConfig};

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One client's hourly load series. No gaps: `values[i]` is the reading at
/// `start + i * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub client_id: String,
    pub start: DateTime<Utc>,
    pub step: Duration,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn timestamp_at(&self, index: usize) -> DateTime<Utc> {
        self.start + self.step * index as i32
    }
}

/// Min-max scaling to [0, 1], fit on the training portion only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("cannot fit scaler on empty data".into()));
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::DegenerateSeries(format!(
                "constant series (min == max == {})",
                min
            )));
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, scaled: f64) -> f64 {
        scaled * (self.max - self.min) + self.min
    }
}

/// Sliding windows: row t of X is `values[t .. t+look_back)` and
/// `y[t] = values[t + look_back + look_ahead - 1]`.
pub fn make_windows(values: &[f64], look_back: usize, look_ahead: usize) -> Result<(Matrix, Vec<f64>)> {
    assert!(look_back >= 1 && look_ahead >= 1);
    let needed = look_back + look_ahead;
    if values.len() < needed {
        return Err(Error::InsufficientData(format!(
            "series of length {} cannot produce windows (need at least {})",
            values.len(),
            needed
        )));
    }
    let count = values.len() - look_back - look_ahead + 1;
    let mut x = Vec::with_capacity(count * look_back);
    let mut y = Vec::with_capacity(count);
    for t in 0..count {
        x.extend_from_slice(&values[t..t + look_back]);
        y.push(values[t + look_back + look_ahead - 1]);
    }
    Ok((Matrix::from_vec(count, look_back, x)?, y))
}

/// Chronological split: first floor(frac * n) windows train, rest test.
pub fn split_train_test(
    x: &Matrix,
    y: &[f64],
    train_frac: f64,
) -> Result<((Matrix, Vec<f64>), (Matrix, Vec<f64>))> {
    let n = x.rows();
    let n_train = (train_frac * n as f64).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InsufficientData(format!(
            "{} windows cannot be split {}:{} with at least one window per side",
            n,
            n_train,
            n - n_train
        )));
    }
    let lb = x.cols();
    let take_rows = |from: usize, to: usize| {
        Matrix::from_vec(to - from, lb, x.values()[from * lb..to * lb].to_vec())
    };
    Ok((
        (take_rows(0, n_train)?, y[..n_train].to_vec()),
        (take_rows(n_train, n)?, y[n_train..].to_vec()),
    ))
}

/// Disjoint seeded random split of client ids into participants and holdout.
pub fn partition_clients(
    ids: &[String],
    n_participants: usize,
    n_holdout: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if ids.len() < n_participants + n_holdout {
        return Err(Error::Config(format!(
            "need at least {} clients for a {}/{} partition, got {}",
            n_participants + n_holdout,
            n_participants,
            n_holdout,
            ids.len()
        )));
    }
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let mut participants = sorted[..n_participants].to_vec();
    let mut holdout = sorted[n_participants..n_participants + n_holdout].to_vec();
    participants.sort();
    holdout.sort();
    Ok((participants, holdout))
}

/// Population standard deviation of raw kW readings.
pub fn load_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(
            "standard deviation needs at least 2 readings".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// One client's scaled, windowed train/test data plus eligibility statistics.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    pub client_id: String,
    pub scaler: MinMaxScaler,
    pub train_x: Matrix,
    pub train_y: Vec<f64>,
    pub test_x: Matrix,
    pub test_y: Vec<f64>,
    pub train_target_times: Vec<DateTime<Utc>>,
    pub test_target_times: Vec<DateTime<Utc>>,
    /// Local sample count n_k (number of training windows).
    pub n_k: usize,
    /// Eligibility statistic: population std of raw kW over the training period.
    pub load_std: f64,
}

/// Full preprocessing pipeline for one client. The scaler and the
/// eligibility statistic see only the raw readings that feed training
/// windows (including their targets); test data never leaks in.
pub fn build_client_dataset(
    series: &TimeSeries,
    look_back: usize,
    look_ahead: usize,
    train_frac: f64,
) -> Result<ClientDataset> {
    let len = series.values.len();
    if len < look_back + look_ahead + 1 {
        return Err(Error::InsufficientData(format!(
            "client {}: {} readings are too few for windowing",
            series.client_id, len
        )));
    }
    let n_windows = len - look_back - look_ahead + 1;
    let n_train = (train_frac * n_windows as f64).floor() as usize;
    if n_train == 0 || n_train >= n_windows {
        return Err(Error::InsufficientData(format!(
            "client {}: {} windows cannot yield a non-empty train/test split",
            series.client_id, n_windows
        )));
    }

    // Raw readings covered by training windows and their targets.
    let train_raw = &series.values[..n_train + look_back + look_ahead - 1];
    let scaler = MinMaxScaler::fit(train_raw)?;
    let std = load_std(train_raw)?;

    let scaled: Vec<f64> = series.values.iter().map(|v| scaler.transform(*v)).collect();
    let (x, y) = make_windows(&scaled, look_back, look_ahead)?;
    let ((train_x, train_y), (test_x, test_y)) = split_train_test(&x, &y, train_frac)?;

    let target_time = |t: usize| series.timestamp_at(t + look_back + look_ahead - 1);
    let train_target_times = (0..n_train).map(target_time).collect();
    let test_target_times = (n_train..n_windows).map(target_time).collect();

    Ok(ClientDataset {
        client_id: series.client_id.clone(),
        scaler,
        train_x,
        train_y,
        test_x,
        test_y,
        train_target_times,
        test_target_times,
        n_k: n_train,
        load_std: std,
    })
}
