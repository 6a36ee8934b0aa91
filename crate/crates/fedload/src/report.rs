//! Scenario report file and per-client prediction traces.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::ClientDataset;
use crate::error::{Error, Result};
use crate::fedsim::{predict_client, EvalSummary, RoundReport};
use crate::nn::ModelParams;

/// One client's metrics before and after personalization, in kW / percent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonalizationRow {
    pub client_id: String,
    pub rmse_before: f64,
    pub rmse_after: f64,
    pub mape_before: f64,
    pub mape_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonalizationTable {
    pub rows: Vec<PersonalizationRow>,
    pub rmse_mean_before: f64,
    pub rmse_mean_after: f64,
    pub mape_mean_before: f64,
    pub mape_mean_after: f64,
}

impl PersonalizationTable {
    pub fn new(before: &EvalSummary, after: &EvalSummary) -> Self {
        let rows: Vec<PersonalizationRow> = before
            .per_client
            .iter()
            .zip(&after.per_client)
            .map(|(b, a)| PersonalizationRow {
                client_id: b.client_id.clone(),
                rmse_before: b.rmse_kw,
                rmse_after: a.rmse_kw,
                mape_before: b.mape_pct,
                mape_after: a.mape_pct,
            })
            .collect();
        PersonalizationTable {
            rows,
            rmse_mean_before: before.rmse_mean,
            rmse_mean_after: after.rmse_mean,
            mape_mean_before: before.mape_mean,
            mape_mean_after: after.mape_mean,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkLoadSection {
    pub centralized_kb: f64,
    pub federated_kb: f64,
    pub gain: f64,
}

/// The full scenario report. Serialized as TOML; evaluation uses each
/// client's chronological test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReportFile {
    pub evaluation_split: String,
    pub config: RunConfig,
    pub participants_eval: EvalSummary,
    pub holdout_eval: EvalSummary,
    pub participants_personalization: Option<PersonalizationTable>,
    pub holdout_personalization: Option<PersonalizationTable>,
    pub network_load: NetworkLoadSection,
    pub rounds: Vec<RoundReport>,
}

impl ScenarioReportFile {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Usage(format!("report serialization failed: {}", e)))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// Plot-ready trace: `timestamp,actual_kw,predicted_kw`, one row per test
/// window, predictions inverse-scaled to kW.
pub fn emit_predictions(model: &ModelParams, client: &ClientDataset, out_path: &Path) -> Result<()> {
    if client.test_y.is_empty() {
        return Err(Error::InsufficientData(format!(
            "client {} has no test windows",
            client.client_id
        )));
    }
    let predicted = predict_client(model, client, true)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out_path)?);
    writeln!(f, "timestamp,actual_kw,predicted_kw")?;
    for ((ts, scaled_actual), pred) in client
        .test_target_times
        .iter()
        .zip(&client.test_y)
        .zip(&predicted)
    {
        writeln!(
            f,
            "{},{},{}",
            ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            client.scaler.inverse(*scaled_actual),
            pred
        )?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_client_dataset, synth_generate, SynthConfig};
    use crate::nn::init_params;

    #[test]
    fn trace_has_one_row_per_test_window() {
        let series = synth_generate(&SynthConfig::new(1, 6, 5)).unwrap();
        let data = build_client_dataset(&series[0], 12, 1, 0.9).unwrap();
        let model = init_params(&[1, 4], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        emit_predictions(&model, &data, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines[0], "timestamp,actual_kw,predicted_kw");
        assert_eq!(lines.len(), 1 + data.test_y.len());
    }

    #[test]
    fn perfect_predictor_emits_equal_columns() {
        let series = synth_generate(&SynthConfig::new(1, 6, 8)).unwrap();
        let mut data = build_client_dataset(&series[0], 12, 1, 0.9).unwrap();
        // A "model" is irrelevant if every test target equals the prediction
        // of the zero model with bias tuned per window; instead force the
        // test targets to the zero-model output.
        let model = crate::nn::ModelParams::zeros(&[1, 4]).unwrap();
        for y in &mut data.test_y {
            // zero model predicts 0 scaled; inverse-scaled then clamps at 0.
            *y = data.scaler.transform(data.scaler.inverse(0.0).max(0.0));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        emit_predictions(&model, &data, &path).unwrap();
        for line in std::fs::read_to_string(&path).unwrap().lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let actual: f64 = cols[1].parse().unwrap();
            let predicted: f64 = cols[2].parse().unwrap();
            assert!((actual - predicted).abs() < 1e-9);
        }
    }
}
