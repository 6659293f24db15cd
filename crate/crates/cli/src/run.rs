//! `roundtable run`: execute a batch of simulations and export the
//! transcript file plus metric summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use roundtable_core::agents::llm::LlmPolicy;
use roundtable_core::agents::scripted::{ScriptedPolicy, ScriptedPolicyKind, ScriptedUtility};
use roundtable_core::agents::wire::{ChatClient, ChatClientConfig};
use roundtable_core::agents::AgentPolicy;
use roundtable_core::config::{load_config, AgentSection, ValidatedConfig};
use roundtable_core::engine::{run_collaboration, AgentId, EngineConfig, Transcript};
use roundtable_core::environments::economy::EconomyEnv;
use roundtable_core::environments::optimize::{u_max, OptimizerConfig};
use roundtable_core::environments::rating::{
    ingest_tables, standing_predictions, RatingEnv, RatingTask, TablePaths,
};
use roundtable_core::environments::{Environment, EnvironmentId};
use roundtable_core::persist::{read_transcripts, write_transcripts};
use roundtable_core::report::{csv_float, mean_stderr, MeanStderr};
use roundtable_core::social_choice::Mechanism;

use crate::CliError;

/// Everything `roundtable run` needs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub simulations: usize,
    pub seed_base: u64,
    pub parallelism: usize,
    pub mechanism_override: Option<Mechanism>,
    pub no_llm: bool,
}

pub struct RunOutput {
    pub transcripts_path: PathBuf,
    pub written: usize,
    pub skipped: usize,
}

/// Runs the batch. Simulation `i` uses seed `seed_base + i`; completed
/// seeds found in an existing transcript file are not re-run.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunOutput, CliError> {
    let config = load_config(&manifest.config_path)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if manifest.no_llm && config.uses_llm() {
        return Err(CliError::Validation(
            "--no-llm was given but the config names an llm policy".to_string(),
        ));
    }
    if manifest.simulations == 0 {
        return Err(CliError::Validation("--sims must be at least 1".to_string()));
    }
    let mechanism = manifest.mechanism_override.unwrap_or(config.mechanism);

    std::fs::create_dir_all(&manifest.out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create output dir: {e}")))?;
    let transcripts_path = manifest.out_dir.join("transcripts.jsonl");

    let tasks = load_rating_tasks(&config)?;
    let wanted: Vec<u64> = (0..manifest.simulations as u64)
        .map(|i| manifest.seed_base + i)
        .collect();

    // Resume: keep transcripts whose seed is still wanted and whose
    // mechanism matches this invocation.
    let mut existing: BTreeMap<u64, Transcript> = BTreeMap::new();
    if transcripts_path.exists() {
        for transcript in
            read_transcripts(&transcripts_path).map_err(CliError::runtime)?
        {
            if wanted.contains(&transcript.seed) && transcript.config.mechanism == mechanism {
                existing.insert(transcript.seed, transcript);
            }
        }
    }
    let missing: Vec<u64> = wanted
        .iter()
        .copied()
        .filter(|seed| !existing.contains_key(seed))
        .collect();
    let skipped = wanted.len() - missing.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallelism.max(1))
        .build()
        .map_err(CliError::runtime)?;
    let fresh: Vec<Transcript> = pool.install(|| {
        missing
            .par_iter()
            .map(|seed| {
                run_one(&config, mechanism, *seed, manifest.seed_base, &tasks)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let mut transcripts: Vec<Transcript> = existing.into_values().collect();
    transcripts.extend(fresh);
    transcripts.sort_by_key(|t| t.seed);
    write_transcripts(&transcripts_path, &transcripts).map_err(CliError::runtime)?;

    export_metrics(&manifest.out_dir, &config, &transcripts, &tasks)?;

    Ok(RunOutput {
        transcripts_path,
        written: transcripts.len(),
        skipped,
    })
}

fn load_rating_tasks(config: &ValidatedConfig) -> Result<Vec<RatingTask>, CliError> {
    if config.environment != EnvironmentId::Rating {
        return Ok(Vec::new());
    }
    let dir = config
        .tables_dir
        .as_ref()
        .expect("validated rating config has tables_dir");
    let tasks = ingest_tables(&TablePaths::in_dir(Path::new(dir)))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if tasks.is_empty() {
        return Err(CliError::Validation(format!(
            "no rating examples found under {dir}"
        )));
    }
    Ok(tasks)
}

/// Task index for a rating simulation: examples cycle with the seed offset.
fn task_index(seed: u64, seed_base: u64, tasks: usize) -> usize {
    ((seed - seed_base) % tasks as u64) as usize
}

fn run_one(
    config: &ValidatedConfig,
    mechanism: Mechanism,
    seed: u64,
    seed_base: u64,
    tasks: &[RatingTask],
) -> Result<Transcript, CliError> {
    let (env, scenario): (Box<dyn Environment>, String) = match config.environment {
        EnvironmentId::Economy => {
            let preset = config.preset.expect("validated economy config has preset");
            (
                Box::new(EconomyEnv::new(config.agents.len(), preset)),
                preset.name().to_string(),
            )
        }
        EnvironmentId::Rating => {
            let task = tasks[task_index(seed, seed_base, tasks.len())].clone();
            let scenario = format!("example-{}", task.example_id);
            (Box::new(RatingEnv::new(task)), scenario)
        }
    };
    let engine_config = EngineConfig {
        rounds: config.rounds,
        agents: config.agents.len() as u32,
        mechanism,
        environment: config.environment,
        scenario,
        seed,
    };
    let policies = build_policies(config, env.as_ref(), seed)?;
    run_collaboration(&engine_config, &policies, env.as_ref()).map_err(CliError::runtime)
}

fn build_policies<'e>(
    config: &ValidatedConfig,
    env: &'e dyn Environment,
    seed: u64,
) -> Result<Vec<Box<dyn AgentPolicy + 'e>>, CliError> {
    config
        .agents
        .iter()
        .enumerate()
        .map(|(index, agent)| build_policy(config, env, agent, index as u32, seed))
        .collect()
}

fn build_policy<'e>(
    config: &ValidatedConfig,
    env: &'e dyn Environment,
    agent: &AgentSection,
    index: u32,
    seed: u64,
) -> Result<Box<dyn AgentPolicy + 'e>, CliError> {
    let me = AgentId(index);
    if agent.policy == "llm" {
        let mut wire = ChatClientConfig::default();
        if let Some(model) = &config.llm.model {
            wire.model = model.clone();
        }
        if let Some(base_url) = &config.llm.base_url {
            wire.base_url = base_url.clone();
        }
        if let Some(timeout) = config.llm.timeout_secs {
            wire.timeout_secs = timeout;
        }
        let client = ChatClient::new(wire).map_err(CliError::runtime)?;
        return Ok(Box::new(LlmPolicy::new(me, client, env)));
    }
    let kind = match agent.policy.as_str() {
        "selfish" => ScriptedPolicyKind::Selfish,
        "even-split" => ScriptedPolicyKind::EvenSplit,
        "concessive" => ScriptedPolicyKind::Concessive {
            rate: agent.rate.expect("validated concessive rate"),
        },
        "random" => ScriptedPolicyKind::RandomSeeded,
        other => return Err(CliError::Validation(format!("unknown policy {other}"))),
    };
    let utility = scripted_utility(env, index);
    Ok(Box::new(ScriptedPolicy::new(
        kind,
        me,
        seed ^ (index as u64).wrapping_mul(0x9e3779b97f4a7c15),
        utility,
    )))
}

/// Scripted agents evaluate candidates through the environment's lens.
fn scripted_utility(env: &dyn Environment, index: u32) -> ScriptedUtility {
    match env.id() {
        EnvironmentId::Economy => {
            let economy = env
                .as_any()
                .downcast_ref::<EconomyEnv>()
                .expect("economy environment");
            ScriptedUtility::Economy {
                theta: economy.utilities[index as usize].clone(),
                agents: economy.agents,
                goods: economy.goods,
            }
        }
        EnvironmentId::Rating => {
            // Anchors spread scripted opinions across the scale.
            let anchor = match index % 3 {
                0 => 3.0,
                1 => 4.0,
                _ => 2.0,
            };
            ScriptedUtility::Rating { anchor }
        }
    }
}

/// One row per (simulation, round) plus a Table-1-shaped summary with
/// means and standard errors.
fn export_metrics(
    out_dir: &Path,
    config: &ValidatedConfig,
    transcripts: &[Transcript],
    tasks: &[RatingTask],
) -> Result<(), CliError> {
    match config.environment {
        EnvironmentId::Economy => export_economy_metrics(out_dir, config, transcripts),
        EnvironmentId::Rating => export_rating_metrics(out_dir, transcripts, tasks),
    }
}

fn export_economy_metrics(
    out_dir: &Path,
    config: &ValidatedConfig,
    transcripts: &[Transcript],
) -> Result<(), CliError> {
    let preset = config.preset.expect("economy preset");
    let env = EconomyEnv::new(config.agents.len(), preset);
    let bound = u_max(preset, config.agents.len(), &OptimizerConfig::default())
        .map_err(CliError::runtime)?;

    let mut rows = String::from("seed,round,u_r\n");
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for transcript in transcripts {
        let metrics =
            roundtable_core::environments::economy::econ_metrics(transcript, &env, bound.value)
                .map_err(CliError::runtime)?;
        for (index, u) in metrics.u_series.iter().enumerate() {
            rows.push_str(&format!(
                "{},{},{}\n",
                transcript.seed,
                index + 1,
                csv_float(*u)
            ));
        }
        for n in [3usize, 5, 10] {
            if metrics.u_series.len() >= n {
                per_metric
                    .entry(format!("gtu@{n}"))
                    .or_default()
                    .push(metrics.u_series[n - 1]);
            }
            if let Some(auc) = metrics.auc.get(&(n as u32)) {
                per_metric
                    .entry(format!("auc@{n}"))
                    .or_default()
                    .push(*auc);
            }
        }
        per_metric
            .entry("rationality".to_string())
            .or_default()
            .push(metrics.rationality);
        per_metric
            .entry("minmax".to_string())
            .or_default()
            .push(metrics.minmax);
        per_metric
            .entry("rigidity".to_string())
            .or_default()
            .push(metrics.rigidity);
    }
    std::fs::write(out_dir.join("metrics.csv"), rows).map_err(CliError::runtime)?;
    write_summary(out_dir, &per_metric, Some(bound.value))
}

fn export_rating_metrics(
    out_dir: &Path,
    transcripts: &[Transcript],
    tasks: &[RatingTask],
) -> Result<(), CliError> {
    let gold_of = |transcript: &Transcript| -> Result<f64, CliError> {
        let scenario = &transcript.config.scenario;
        let id: u32 = scenario
            .strip_prefix("example-")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::runtime(format!("bad rating scenario `{scenario}`")))?;
        tasks
            .iter()
            .find(|t| t.example_id == id)
            .map(|t| t.gold_rating as f64)
            .ok_or_else(|| CliError::runtime(format!("no table rows for example {id}")))
    };

    let mut rows = String::from("seed,round,prediction,imputed,abs_error\n");
    let mut predictions: Vec<Vec<f64>> = Vec::new();
    let mut golds: Vec<f64> = Vec::new();
    for transcript in transcripts {
        let gold = gold_of(transcript)?;
        let standing = standing_predictions(transcript);
        for (index, (prediction, imputed)) in standing.iter().enumerate() {
            rows.push_str(&format!(
                "{},{},{},{},{}\n",
                transcript.seed,
                index + 1,
                csv_float(*prediction),
                imputed,
                csv_float((prediction - gold).abs())
            ));
        }
        predictions.push(standing.iter().map(|(p, _)| *p).collect());
        golds.push(gold);
    }
    std::fs::write(out_dir.join("metrics.csv"), rows).map_err(CliError::runtime)?;

    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let rounds = predictions.first().map(Vec::len).unwrap_or(0);
    for round in 0..rounds {
        let abs: Vec<f64> = predictions
            .iter()
            .zip(&golds)
            .map(|(series, gold)| (series[round] - gold).abs())
            .collect();
        let sq: Vec<f64> = predictions
            .iter()
            .zip(&golds)
            .map(|(series, gold)| (series[round] - gold).powi(2))
            .collect();
        per_metric.insert(format!("mae@{}", round + 1), abs);
        // RMSE has no per-sim decomposition; store the point value.
        let rmse = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        per_metric.insert(format!("rmse@{}", round + 1), vec![rmse]);
    }
    write_summary(out_dir, &per_metric, None)
}

fn write_summary(
    out_dir: &Path,
    per_metric: &BTreeMap<String, Vec<f64>>,
    u_max: Option<f64>,
) -> Result<(), CliError> {
    let mut csv = String::from("metric,mean,stderr,n\n");
    let mut json: BTreeMap<String, MeanStderr> = BTreeMap::new();
    for (metric, values) in per_metric {
        let stats = mean_stderr(values);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            metric,
            csv_float(stats.mean),
            csv_float(stats.stderr),
            stats.n
        ));
        json.insert(metric.clone(), stats);
    }
    std::fs::write(out_dir.join("summary.csv"), csv).map_err(CliError::runtime)?;
    let mut document = serde_json::Map::new();
    document.insert(
        "metrics".to_string(),
        serde_json::to_value(&json).map_err(CliError::runtime)?,
    );
    if let Some(bound) = u_max {
        document.insert("u_max".to_string(), serde_json::json!(bound));
    }
    let pretty = serde_json::to_string_pretty(&serde_json::Value::Object(document))
        .map_err(CliError::runtime)?;
    std::fs::write(out_dir.join("summary.json"), pretty + "\n").map_err(CliError::runtime)
}
