use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedload::config::{parse_config, DataSource, RunConfig};
use fedload::dataset::{
    build_client_dataset, load_client_csv, partition_clients, synth_generate, write_client_csv,
    ClientDataset, SynthConfig, TimeSeries,
};
use fedload::error::{Error, Result};
use fedload::fedsim::{evaluate_global, personalize, run_scenario, EvalSummary};
use fedload::metrics::{centralized_load, network_gain, NetLoadParams, Topology};
use fedload::nn::{load_checkpoint, save_checkpoint, ModelParams};
use fedload::report::{
    emit_predictions, NetworkLoadSection, PersonalizationTable, ScenarioReportFile,
};

#[derive(Parser)]
#[command(name = "fedload", about = "Federated short-term load forecasting simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full federated scenario and write report plus prediction traces.
    Run { config: PathBuf },
    /// Print the analytic network-load comparison without training.
    Netload { config: PathBuf },
    /// Generate synthetic client CSV fixtures.
    Synth { config: PathBuf },
    /// Predict a client's test windows with a saved model checkpoint.
    Predict {
        checkpoint: PathBuf,
        client_csv: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        look_back: usize,
        #[arg(long, default_value_t = 1)]
        look_ahead: usize,
        #[arg(long, default_value_t = 0.9)]
        train_frac: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => parse_config(&config).and_then(cmd_run),
        Command::Netload { config } => parse_config(&config).and_then(cmd_netload),
        Command::Synth { config } => parse_config(&config).and_then(cmd_synth),
        Command::Predict {
            checkpoint,
            client_csv,
            out,
            look_back,
            look_ahead,
            train_frac,
        } => cmd_predict(&checkpoint, &client_csv, &out, look_back, look_ahead, train_frac),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            let code = match e {
                Error::Config(_) => 1,
                Error::Data(_)
                | Error::InsufficientData(_)
                | Error::DegenerateSeries(_)
                | Error::NoEligibleClients => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn load_series(cfg: &RunConfig) -> Result<Vec<TimeSeries>> {
    match &cfg.data {
        DataSource::Synthetic(s) => synth_generate(&SynthConfig {
            n_clients: s.n_clients,
            n_days: s.n_days,
            seed: cfg.scenario.seed,
            flat_fraction: s.flat_fraction,
        }),
        DataSource::CsvDir(dir) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::Data(format!("{}: {}", dir.display(), e)))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            if paths.is_empty() {
                return Err(Error::Data(format!(
                    "{}: no client CSV files found",
                    dir.display()
                )));
            }
            paths.sort();
            paths.iter().map(|p| load_client_csv(p)).collect()
        }
    }
}

fn build_topology(cfg: &RunConfig, ids: &[String]) -> Topology {
    let hops: BTreeMap<String, u32> = ids
        .iter()
        .map(|id| {
            let h = cfg
                .topology
                .hops
                .get(id)
                .copied()
                .unwrap_or(cfg.topology.default_hops);
            (id.clone(), h)
        })
        .collect();
    Topology { hops }
}

fn build_netload(cfg: &RunConfig, participant_ids: &[String]) -> NetLoadParams {
    let share = cfg.netload.total_data_kb / participant_ids.len() as f64;
    NetLoadParams {
        model_size_kb: cfg.netload.model_size_kb,
        client_data_kb: participant_ids.iter().map(|id| (id.clone(), share)).collect(),
        direction_multiplier: cfg.netload.direction_multiplier,
    }
}

fn personalization_table(
    cfg: &RunConfig,
    global: &ModelParams,
    clients: &[ClientDataset],
    before: &EvalSummary,
    trace_dir: &Path,
) -> Result<PersonalizationTable> {
    std::fs::create_dir_all(trace_dir)?;
    let mut personalized_evals = Vec::with_capacity(clients.len());
    for data in clients {
        let model = personalize(
            global,
            data,
            cfg.personalize_epochs,
            cfg.personalize_learning_rate,
            cfg.scenario.optimizer,
            cfg.scenario.batch_size,
            cfg.scenario.seed,
        )?;
        emit_predictions(&model, data, &trace_dir.join(format!("{}.csv", data.client_id)))?;
        let eval = evaluate_global(&model, &[data], true)?;
        personalized_evals.push(eval.per_client.into_iter().next().unwrap());
    }
    personalized_evals.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    // Rebuild a summary over the per-client personalized models.
    let n = personalized_evals.len() as f64;
    let rmse_mean = personalized_evals.iter().map(|c| c.rmse_kw).sum::<f64>() / n;
    let mape_mean = personalized_evals.iter().map(|c| c.mape_pct).sum::<f64>() / n;
    let after = EvalSummary {
        rmse_min: personalized_evals.iter().map(|c| c.rmse_kw).fold(f64::INFINITY, f64::min),
        rmse_max: personalized_evals.iter().map(|c| c.rmse_kw).fold(f64::NEG_INFINITY, f64::max),
        rmse_mean,
        mape_min: personalized_evals.iter().map(|c| c.mape_pct).fold(f64::INFINITY, f64::min),
        mape_max: personalized_evals.iter().map(|c| c.mape_pct).fold(f64::NEG_INFINITY, f64::max),
        mape_mean,
        per_client: personalized_evals,
    };
    Ok(PersonalizationTable::new(before, &after))
}

fn cmd_run(cfg: RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let series = load_series(&cfg)?;
        let ids: Vec<String> = series.iter().map(|s| s.client_id.clone()).collect();
        let (participant_ids, holdout_ids) =
            partition_clients(&ids, cfg.n_participants, cfg.n_holdout, cfg.scenario.seed)?;

        let mut datasets: BTreeMap<String, ClientDataset> = BTreeMap::new();
        for s in &series {
            if participant_ids.contains(&s.client_id) || holdout_ids.contains(&s.client_id) {
                datasets.insert(
                    s.client_id.clone(),
                    build_client_dataset(s, cfg.scenario.look_back, cfg.scenario.look_ahead, cfg.train_frac)?,
                );
            }
        }
        let participants: Vec<ClientDataset> = participant_ids
            .iter()
            .map(|id| datasets[id].clone())
            .collect();
        let holdout: Vec<ClientDataset> = holdout_ids.iter().map(|id| datasets[id].clone()).collect();

        let topo = build_topology(&cfg, &ids);
        let net = build_netload(&cfg, &participant_ids);

        let (global, reports) = run_scenario(&cfg.scenario, &participants, &net, &topo)?;

        let participant_refs: Vec<&ClientDataset> = participants.iter().collect();
        let holdout_refs: Vec<&ClientDataset> = holdout.iter().collect();
        let participants_eval = evaluate_global(&global, &participant_refs, true)?;
        let holdout_eval = evaluate_global(&global, &holdout_refs, true)?;

        std::fs::create_dir_all(&cfg.out_dir)?;
        let global_trace_dir = cfg.out_dir.join("predictions_global");
        std::fs::create_dir_all(&global_trace_dir)?;
        for data in participants.iter().chain(holdout.iter()) {
            emit_predictions(
                &global,
                data,
                &global_trace_dir.join(format!("{}.csv", data.client_id)),
            )?;
        }

        let (participants_personalization, holdout_personalization) = if cfg.personalize {
            let dir = cfg.out_dir.join("predictions_personalized");
            (
                Some(personalization_table(&cfg, &global, &participants, &participants_eval, &dir)?),
                Some(personalization_table(&cfg, &global, &holdout, &holdout_eval, &dir)?),
            )
        } else {
            (None, None)
        };

        let federated_kb = reports
            .last()
            .map(|r| r.cumulative_federated_load_kb)
            .unwrap_or(0.0);
        let centralized_kb = centralized_load(&net, &topo, &participant_ids)?;
        let network_load = NetworkLoadSection {
            centralized_kb,
            federated_kb,
            gain: network_gain(federated_kb, centralized_kb)?,
        };

        let report = ScenarioReportFile {
            evaluation_split: "per-client chronological test split".to_string(),
            config: cfg.clone(),
            participants_eval,
            holdout_eval,
            participants_personalization,
            holdout_personalization,
            network_load,
            rounds: reports,
        };
        report.write(&cfg.out_dir.join("report.toml"))?;
        save_checkpoint(&cfg.out_dir.join("model.flsm"), &global)?;

        println!(
            "completed {} rounds; participant mean RMSE {:.4} kW, mean MAPE {:.2}%; network gain {:.4}",
            report.rounds.len(),
            report.participants_eval.rmse_mean,
            report.participants_eval.mape_mean,
            report.network_load.gain
        );
        Ok(())
    };

    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("run.workers: {}", e)))?;
        pool.install(run)
    } else {
        run()
    }
}

fn cmd_netload(cfg: RunConfig) -> Result<()> {
    // Analytic mode: selection counts follow from K and rounds, every
    // selected client sits at the default hop distance.
    let hops = f64::from(cfg.topology.default_hops);
    let centralized = cfg.netload.total_data_kb * hops;
    let federated = cfg.netload.model_size_kb
        * f64::from(cfg.netload.direction_multiplier)
        * (cfg.scenario.rounds * cfg.scenario.subset_size) as f64
        * hops;
    let gain = network_gain(federated, centralized)?;
    println!("L_sC = {:.3} Kb", centralized);
    println!("L_sF = {:.3} Kb", federated);
    println!("G_s = {:.6}", gain);
    Ok(())
}

fn cmd_synth(cfg: RunConfig) -> Result<()> {
    let DataSource::Synthetic(_) = &cfg.data else {
        return Err(Error::Config(
            "synth requires a [data] synthetic source".into(),
        ));
    };
    let series = load_series(&cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    for s in &series {
        write_client_csv(s, &cfg.out_dir.join(format!("{}.csv", s.client_id)))?;
    }
    println!("wrote {} client files to {}", series.len(), cfg.out_dir.display());
    Ok(())
}

fn cmd_predict(
    checkpoint: &Path,
    client_csv: &Path,
    out: &Path,
    look_back: usize,
    look_ahead: usize,
    train_frac: f64,
) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let series = load_client_csv(client_csv)?;
    let data = build_client_dataset(&series, look_back, look_ahead, train_frac)?;
    emit_predictions(&model, &data, out)?;
    println!("wrote {} predictions to {}", data.test_y.len(), out.display());
    Ok(())
}
