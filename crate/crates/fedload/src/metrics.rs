//! Forecast-accuracy metrics and the analytic network-load model comparing
//! federated training traffic against centralized raw-data shipping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Root-mean-square error in kW.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Usage(format!(
            "rmse needs equal non-empty vectors, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Mean absolute percentage error. Zero actuals are discarded from both the
/// sum and the averaging count.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::Usage(format!(
            "mape needs equal non-empty vectors, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (y, p) in actual.iter().zip(predicted) {
        if *y != 0.0 {
            sum += ((y - p) / y).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "all actual values are zero; MAPE is undefined".into(),
        ));
    }
    Ok(100.0 * sum / count as f64)
}

/// Hop counts between each client and the server.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub hops: BTreeMap<String, u32>,
}

impl Topology {
    pub fn uniform<I: IntoIterator<Item = String>>(ids: I, hops: u32) -> Self {
        assert!(hops >= 1);
        Topology {
            hops: ids.into_iter().map(|id| (id, hops)).collect(),
        }
    }

    fn hops_for(&self, id: &str) -> Result<u32> {
        self.hops
            .get(id)
            .copied()
            .ok_or_else(|| Error::Config(format!("no hop count configured for client {}", id)))
    }
}

/// Traffic-model sizes, in kilobits.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLoadParams {
    pub model_size_kb: f64,
    pub client_data_kb: BTreeMap<String, f64>,
    /// 2 counts the model both server->client and client->server per
    /// participation; 1 is the one-directional reading.
    pub direction_multiplier: u32,
}

/// Centralized training ships each client's raw data once:
/// sum over clients of data size times hop count.
pub fn centralized_load(params: &NetLoadParams, topo: &Topology, clients: &[String]) -> Result<f64> {
    let mut total = 0.0;
    for id in clients {
        let size = params
            .client_data_kb
            .get(id)
            .ok_or_else(|| Error::Config(format!("no data size configured for client {}", id)))?;
        total += size * f64::from(topo.hops_for(id)?);
    }
    Ok(total)
}

/// Federated training ships the model to and from every selected client in
/// every round: model size x direction multiplier x total selected hops.
pub fn federated_load(
    params: &NetLoadParams,
    topo: &Topology,
    selections: &[Vec<String>],
) -> Result<f64> {
    let mut hop_sum = 0u64;
    for round in selections {
        for id in round {
            hop_sum += u64::from(topo.hops_for(id)?);
        }
    }
    Ok(params.model_size_kb * f64::from(params.direction_multiplier) * hop_sum as f64)
}

/// Gain in network load: 1 - L_sF / L_sC. Negative when federated traffic
/// exceeds raw-data shipping; never clamped.
pub fn network_gain(federated: f64, centralized: f64) -> Result<f64> {
    if centralized <= 0.0 {
        return Err(Error::UndefinedMetric(
            "network gain undefined for zero centralized load".into(),
        ));
    }
    Ok(1.0 - federated / centralized)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{}", i)).collect()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap() - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_is_symmetric_mape_is_not() {
        let y = vec![2.0, 4.0];
        let p = vec![1.0, 5.0];
        assert_eq!(rmse(&y, &p).unwrap(), rmse(&p, &y).unwrap());
        assert_ne!(mape(&y, &p).unwrap(), mape(&p, &y).unwrap());
    }

    #[test]
    fn mape_examples() {
        assert!((mape(&[2.0, 4.0], &[1.0, 5.0]).unwrap() - 37.5).abs() < 1e-12);
        // zero actual discarded from sum and count
        assert_eq!(mape(&[0.0, 2.0], &[9.0, 1.0]).unwrap(), 50.0);
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            mape(&[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn centralized_load_examples() {
        let clients = ids(3);
        let params = NetLoadParams {
            model_size_kb: 1.9,
            client_data_kb: clients.iter().map(|c| (c.clone(), 16000.0)).collect(),
            direction_multiplier: 2,
        };
        let topo = Topology::uniform(clients.clone(), 1);
        assert_eq!(centralized_load(&params, &topo, &clients).unwrap(), 48000.0);
        assert_eq!(centralized_load(&params, &topo, &[]).unwrap(), 0.0);

        let one = vec!["c0".to_string()];
        let p1 = NetLoadParams {
            model_size_kb: 1.9,
            client_data_kb: [("c0".to_string(), 10.0)].into(),
            direction_multiplier: 2,
        };
        let t3 = Topology::uniform(one.clone(), 3);
        assert_eq!(centralized_load(&p1, &t3, &one).unwrap(), 30.0);
    }

    #[test]
    fn centralized_load_missing_client_is_config_error() {
        let params = NetLoadParams {
            model_size_kb: 1.9,
            client_data_kb: BTreeMap::new(),
            direction_multiplier: 2,
        };
        let topo = Topology::uniform(ids(1), 1);
        assert!(matches!(
            centralized_load(&params, &topo, &ids(1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn federated_load_examples() {
        let clients = ids(5);
        let params = NetLoadParams {
            model_size_kb: 1.9,
            client_data_kb: BTreeMap::new(),
            direction_multiplier: 2,
        };
        let topo = Topology::uniform(clients.clone(), 1);
        let selections: Vec<Vec<String>> = (0..20).map(|_| clients.clone()).collect();
        assert!((federated_load(&params, &topo, &selections).unwrap() - 380.0).abs() < 1e-12);
        assert_eq!(federated_load(&params, &topo, &[]).unwrap(), 0.0);

        let p = NetLoadParams {
            model_size_kb: 2.0,
            client_data_kb: BTreeMap::new(),
            direction_multiplier: 1,
        };
        let t = Topology::uniform(ids(1), 4);
        assert_eq!(federated_load(&p, &t, &[ids(1)]).unwrap(), 8.0);
    }

    #[test]
    fn gain_examples() {
        // Scenario 1/3: K=5, 20 rounds, 1 hop, mult 2, S_m=1.9, data 16000.
        assert!((network_gain(380.0, 16000.0).unwrap() - 0.97625).abs() < 1e-12);
        // Scenario 2/4: K=20.
        assert!((network_gain(1520.0, 16000.0).unwrap() - 0.905).abs() < 1e-12);
        assert_eq!(network_gain(5.0, 5.0).unwrap(), 0.0);
        // More federated traffic than raw data: negative, not clamped.
        assert!(network_gain(20.0, 10.0).unwrap() < 0.0);
        assert!(network_gain(1.0, 0.0).is_err());
    }
}
