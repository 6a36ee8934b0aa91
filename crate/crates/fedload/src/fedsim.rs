//! FederatedAveraging orchestration: eligibility gating, per-round subset
//! selection, local training, n_k-weighted aggregation, and per-client
//! personalization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ClientDataset;
use crate::error::{Error, Result};
use crate::metrics::{self, NetLoadParams, Topology};
use crate::nn::{
    adam_step, init_params, model_backward, model_forward, mse_loss, sgd_step, AdamState,
    Gradients, ModelParams,
};
use crate::seedmix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// One experiment's knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub rounds: usize,
    pub subset_size: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Minimum load standard deviation (kW) a client must show.
    pub eligibility_threshold: f64,
    /// Minimum number of training windows a client must hold.
    pub min_records: usize,
    pub look_back: usize,
    pub look_ahead: usize,
    pub layer_widths: Vec<usize>,
    pub batch_size: usize,
    pub seed: u64,
    /// Literal-algorithm mode: select from all clients, then apply the
    /// eligibility guard inside the round (may yield fewer updates).
    pub guard_after_select: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            rounds: 20,
            subset_size: 5,
            local_epochs: 1,
            learning_rate: 0.001,
            optimizer: Optimizer::Adam,
            eligibility_threshold: 0.05,
            min_records: 24,
            look_back: 12,
            look_ahead: 1,
            layer_widths: vec![1, 200, 200],
            batch_size: 32,
            seed: 42,
            guard_after_select: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.subset_size < 1 {
            return Err(Error::Config("subset_size must be >= 1".into()));
        }
        if self.local_epochs < 1 {
            return Err(Error::Config("local_epochs must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.look_back < 1 || self.look_ahead < 1 {
            return Err(Error::Config("look_back and look_ahead must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exactly the clients with load_std > threshold and n_k >= min_records,
/// in client-id order.
pub fn eligible_clients<'a>(
    clients: &'a [ClientDataset],
    threshold: f64,
    min_records: usize,
) -> Vec<&'a ClientDataset> {
    let mut out: Vec<&ClientDataset> = clients
        .iter()
        .filter(|c| c.load_std > threshold && c.n_k >= min_records)
        .collect();
    out.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    out
}

fn is_eligible(c: &ClientDataset, threshold: f64, min_records: usize) -> bool {
    c.load_std > threshold && c.n_k >= min_records
}

/// Uniform draw of min(K, |pool|) client ids without replacement.
pub fn select_subset(pool: &[String], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    if pool.is_empty() {
        return Err(Error::NoEligibleClients);
    }
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    shuffled.truncate(k.min(pool.len()));
    shuffled.sort();
    Ok(shuffled)
}

fn batch_gradient(m: &ModelParams, data: &ClientDataset, batch: &[usize]) -> Result<Gradients> {
    let lb = data.train_x.cols();
    let mut acc: Option<Vec<f64>> = None;
    for &idx in batch {
        let window = &data.train_x.values()[idx * lb..(idx + 1) * lb];
        let (pred, caches) = model_forward(m, window)?;
        let (_, dpred) = mse_loss(pred, data.train_y[idx]);
        let g = model_backward(m, &caches, dpred)?.flatten();
        match &mut acc {
            None => acc = Some(g),
            Some(a) => {
                for (av, gv) in a.iter_mut().zip(&g) {
                    *av += gv;
                }
            }
        }
    }
    let mut flat = acc.expect("batch is non-empty");
    let scale = 1.0 / batch.len() as f64;
    for v in &mut flat {
        *v *= scale;
    }
    ModelParams::unflatten(&m.widths(), &flat)
}

/// Mean training-set MSE of a model on one client (scaled units).
pub fn train_mse(m: &ModelParams, data: &ClientDataset) -> Result<f64> {
    let lb = data.train_x.cols();
    let mut total = 0.0;
    for idx in 0..data.n_k {
        let window = &data.train_x.values()[idx * lb..(idx + 1) * lb];
        let (pred, _) = model_forward(m, window)?;
        total += mse_loss(pred, data.train_y[idx]).0;
    }
    Ok(total / data.n_k as f64)
}

/// Local update: copy the global model, then run `epochs` passes of
/// mini-batch gradient descent over the client's train windows in seeded
/// shuffled order. Adam state is fresh for the call and never leaves it.
pub fn local_train(
    global: &ModelParams,
    data: &ClientDataset,
    epochs: usize,
    learning_rate: f64,
    optimizer: Optimizer,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, usize)> {
    if data.n_k == 0 {
        return Err(Error::InsufficientData(format!(
            "client {} has no training windows",
            data.client_id
        )));
    }
    let mut params = global.clone();
    let mut adam = match optimizer {
        Optimizer::Adam => Some(AdamState::new(&params.widths())?),
        Optimizer::Sgd => None,
    };
    let mut order: Vec<usize> = (0..data.n_k).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let grad = batch_gradient(&params, data, batch)?;
            params = match &mut adam {
                Some(state) => {
                    let (p, s) = adam_step(&params, &grad, state, learning_rate)?;
                    *state = s;
                    p
                }
                None => sgd_step(&params, &grad, learning_rate)?,
            };
        }
    }
    Ok((params, data.n_k))
}

/// n_k-weighted coordinate-wise mean over the round's participating subset,
/// summed in ascending client-id order.
pub fn aggregate(updates: &[(String, ModelParams, usize)]) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::Aggregation("no client updates to aggregate".into()));
    }
    let widths = updates[0].1.widths();
    for (id, params, _) in updates {
        if params.widths() != widths {
            return Err(Error::Shape(format!(
                "client {} update has widths {:?}, expected {:?}",
                id,
                params.widths(),
                widths
            )));
        }
    }
    let mut ordered: Vec<&(String, ModelParams, usize)> = updates.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    let total: usize = ordered.iter().map(|(_, _, n)| n).sum();
    if total == 0 {
        return Err(Error::Aggregation("total sample count is zero".into()));
    }
    let mut acc = vec![0.0; ModelParams::param_count(&widths)];
    for (_, params, n_k) in ordered {
        let weight = *n_k as f64 / total as f64;
        for (a, p) in acc.iter_mut().zip(params.flatten()) {
            *a += weight * p;
        }
    }
    ModelParams::unflatten(&widths, &acc)
}

/// Per-client evaluation of one model, in kW.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientEval {
    pub client_id: String,
    pub rmse_kw: f64,
    pub mape_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_client: Vec<ClientEval>,
    pub rmse_min: f64,
    pub rmse_max: f64,
    pub rmse_mean: f64,
    pub mape_min: f64,
    pub mape_max: f64,
    pub mape_mean: f64,
}

impl EvalSummary {
    fn from_per_client(per_client: Vec<ClientEval>) -> Self {
        let n = per_client.len() as f64;
        let fold = |f: fn(&ClientEval) -> f64| {
            let vals: Vec<f64> = per_client.iter().map(f).collect();
            (
                vals.iter().cloned().fold(f64::INFINITY, f64::min),
                vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                vals.iter().sum::<f64>() / n,
            )
        };
        let (rmse_min, rmse_max, rmse_mean) = fold(|c| c.rmse_kw);
        let (mape_min, mape_max, mape_mean) = fold(|c| c.mape_pct);
        EvalSummary {
            per_client,
            rmse_min,
            rmse_max,
            rmse_mean,
            mape_min,
            mape_max,
            mape_mean,
        }
    }
}

/// Inverse-scaled predictions of `m` for one client's windows, in kW,
/// clamped at zero (reporting-time clamp only).
pub fn predict_client(m: &ModelParams, data: &ClientDataset, use_test: bool) -> Result<Vec<f64>> {
    let (x, n) = if use_test {
        (&data.test_x, data.test_x.rows())
    } else {
        (&data.train_x, data.n_k)
    };
    let lb = x.cols();
    let mut preds = Vec::with_capacity(n);
    for idx in 0..n {
        let window = &x.values()[idx * lb..(idx + 1) * lb];
        let (pred, _) = model_forward(m, window)?;
        preds.push(data.scaler.inverse(pred).max(0.0));
    }
    Ok(preds)
}

/// Per-client RMSE/MAPE of a model over the clients' test (or train) sets,
/// with min/max/mean aggregates. Metrics are computed in kW.
pub fn evaluate_global(
    m: &ModelParams,
    clients: &[&ClientDataset],
    use_test: bool,
) -> Result<EvalSummary> {
    if clients.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let mut per_client = Vec::with_capacity(clients.len());
    for data in clients {
        let (scaled_actual, n) = if use_test {
            (&data.test_y, data.test_y.len())
        } else {
            (&data.train_y, data.train_y.len())
        };
        if n == 0 {
            return Err(Error::InsufficientData(format!(
                "client {} has no evaluation windows",
                data.client_id
            )));
        }
        let actual_kw: Vec<f64> = scaled_actual.iter().map(|v| data.scaler.inverse(*v)).collect();
        let predicted_kw = predict_client(m, data, use_test)?;
        per_client.push(ClientEval {
            client_id: data.client_id.clone(),
            rmse_kw: metrics::rmse(&actual_kw, &predicted_kw)?,
            mape_pct: metrics::mape(&actual_kw, &predicted_kw)?,
        });
    }
    per_client.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    Ok(EvalSummary::from_per_client(per_client))
}

/// Sample count of one aggregated client update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientSample {
    pub client_id: String,
    pub n_k: usize,
}

/// Record of one completed round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub selected_client_ids: Vec<String>,
    pub client_samples: Vec<ClientSample>,
    pub global_params_checksum: String,
    pub eval: EvalSummary,
    pub cumulative_federated_load_kb: f64,
}

/// FNV-1a over the little-endian bytes of the flat parameter vector.
pub fn params_checksum(m: &ModelParams) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.flatten() {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{:016x}", h)
}

/// Runs the full federated loop: initialize once, then per round select a
/// subset, train locally in parallel, and aggregate. Deterministic given
/// the config seed, independent of worker count.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    clients: &[ClientDataset],
    net: &NetLoadParams,
    topo: &Topology,
) -> Result<(ModelParams, Vec<RoundReport>)> {
    cfg.validate()?;
    let eligible = eligible_clients(clients, cfg.eligibility_threshold, cfg.min_records);
    if eligible.is_empty() {
        return Err(Error::NoEligibleClients);
    }
    let eligible_ids: Vec<String> = eligible.iter().map(|c| c.client_id.clone()).collect();
    let all_ids: Vec<String> = {
        let mut ids: Vec<String> = clients.iter().map(|c| c.client_id.clone()).collect();
        ids.sort();
        ids
    };
    let by_id = |id: &str| {
        clients
            .iter()
            .find(|c| c.client_id == id)
            .expect("selected id comes from the client list")
    };

    let eval_refs: Vec<&ClientDataset> = eligible.clone();
    let mut params = init_params(&cfg.layer_widths, cfg.seed)?;
    let mut reports = Vec::with_capacity(cfg.rounds);
    let mut participation_hops: Vec<Vec<String>> = Vec::new();

    for round in 0..cfg.rounds {
        let mut round_rng =
            ChaCha8Rng::seed_from_u64(seedmix::round_seed(cfg.seed, round as u64));
        let pool = if cfg.guard_after_select {
            &all_ids
        } else {
            &eligible_ids
        };
        let selected = select_subset(pool, cfg.subset_size, &mut round_rng)?;

        // In-loop eligibility guard; a no-op when selection is pre-filtered.
        let participating: Vec<&ClientDataset> = selected
            .iter()
            .map(|id| by_id(id))
            .filter(|c| is_eligible(c, cfg.eligibility_threshold, cfg.min_records))
            .collect();

        let updates: Vec<(String, ModelParams, usize)> = participating
            .par_iter()
            .map(|data| {
                let mut rng = ChaCha8Rng::seed_from_u64(seedmix::client_seed(
                    cfg.seed,
                    round as u64,
                    &data.client_id,
                ));
                let (p, n_k) = local_train(
                    &params,
                    data,
                    cfg.local_epochs,
                    cfg.learning_rate,
                    cfg.optimizer,
                    cfg.batch_size,
                    &mut rng,
                )?;
                Ok((data.client_id.clone(), p, n_k))
            })
            .collect::<Result<Vec<_>>>()?;

        if !updates.is_empty() {
            params = aggregate(&updates)?;
        }
        debug_assert!(params.is_finite());

        participation_hops.push(participating.iter().map(|c| c.client_id.clone()).collect());
        let cumulative = metrics::federated_load(net, topo, &participation_hops)?;

        reports.push(RoundReport {
            round,
            selected_client_ids: selected,
            client_samples: updates
                .iter()
                .map(|(id, _, n)| ClientSample {
                    client_id: id.clone(),
                    n_k: *n,
                })
                .collect(),
            global_params_checksum: params_checksum(&params),
            eval: evaluate_global(&params, &eval_refs, true)?,
            cumulative_federated_load_kb: cumulative,
        });
    }
    Ok((params, reports))
}

/// Post-hoc local retraining of the (unchanged) global model on one
/// client's own training data.
pub fn personalize(
    global: &ModelParams,
    client: &ClientDataset,
    epochs: usize,
    learning_rate: f64,
    optimizer: Optimizer,
    batch_size: usize,
    seed: u64,
) -> Result<ModelParams> {
    if epochs == 0 {
        return Ok(global.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seedmix::client_seed(seed, u64::MAX, &client.client_id));
    let (p, _) = local_train(
        global,
        client,
        epochs,
        learning_rate,
        optimizer,
        batch_size,
        &mut rng,
    )?;
    Ok(p)
}
