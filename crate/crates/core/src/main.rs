use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use coview::data::{self, ViewId};
use coview::error::{Error, Result};
use coview::metrics::{encode_labels, knn_probe};
use coview::synth::{self, SynthConfig};
use coview::train::{self, EvalSource, RunReport, TrainConfig};

#[derive(Parser)]
#[command(name = "coview", version, about = "Two-view co-training for type discovery")]
struct Cli {
    /// Overrides the seed of any config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-view dataset.
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-draw the train/test split, holding out a fraction of every type.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.15)]
        fraction: f64,
        /// Output directory (defaults to rewriting `--data` in place).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Warm up projections on labeled data and save the checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Co-train and evaluate; writes checkpoint/, log.jsonl and report.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Start from this checkpoint instead of pretraining.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the unlabeled test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_source)]
        source: Option<EvalSource>,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-out cosine k-NN accuracy per type for one view.
    ProbeKnn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_view)]
        view: ViewId,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full runs for several cluster counts.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_view(s: &str) -> std::result::Result<ViewId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_source(s: &str) -> std::result::Result<EvalSource, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown source `{s}` (expected unknown_head or kmeans)"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn train_config(path: &Path, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = read_json(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct ProbeRow {
    #[serde(rename = "type")]
    name: String,
    count: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct ProbeReport {
    view: ViewId,
    k: usize,
    per_type: Vec<ProbeRow>,
    average: f64,
    had_ties: bool,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynth { config, out } => {
            let mut cfg: SynthConfig = read_json(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let d = synth::generate(&cfg)?;
            data::write_dataset(&d, &out)?;
            log::info!("wrote {} instances to {}", d.len(), out.display());
        }
        Command::Split { data: dir, fraction, out } => {
            let mut d = data::load_dir(&dir)?;
            data::split_instances(&mut d.instances, fraction, cli.seed.unwrap_or(0))?;
            let out = out.unwrap_or(dir);
            data::write_dataset(&d, &out)?;
        }
        Command::Pretrain { config, data: dir, out } => {
            let cfg = train_config(&config, cli.seed)?;
            let d = data::load_dir(&dir)?;
            let (params, records) = train::pretrain(&d, &cfg)?;
            mkdir(&out)?;
            train::save_params(&params, &out.join("checkpoint"))?;
            let mut lines = String::new();
            for r in &records {
                lines.push_str(&serde_json::to_string(r).expect("serializable"));
                lines.push('\n');
            }
            let path = out.join("pretrain.jsonl");
            fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
        }
        Command::Train { config, data: dir, out, init } => {
            let cfg = train_config(&config, cli.seed)?;
            let d = data::load_dir(&dir)?;
            let (params, pre) = match init {
                Some(ckpt) => (train::load_params(&ckpt)?, Vec::new()),
                None => train::pretrain(&d, &cfg)?,
            };
            let (params, mut log) = train::train(&d, params, &cfg)?;
            log.pretrain = pre;
            let report = train::evaluate(&d, &params, &cfg, cfg.eval_source)?;
            mkdir(&out)?;
            train::save_params(&params, &out.join("checkpoint"))?;
            let log_path = out.join("log.jsonl");
            fs::write(&log_path, log.to_jsonl()).map_err(|e| Error::io(&log_path, e))?;
            write_json(&out.join("report.json"), &RunReport::new(report, cfg.eval_source, &cfg))?;
        }
        Command::Eval { config, data: dir, checkpoint, source, out } => {
            let cfg = train_config(&config, cli.seed)?;
            let d = data::load_dir(&dir)?;
            let params = train::load_params(&checkpoint)?;
            let source = source.unwrap_or(cfg.eval_source);
            let report = RunReport::new(train::evaluate(&d, &params, &cfg, source)?, source, &cfg);
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::ProbeKnn { data: dir, view, k, out } => {
            let d = data::load_dir(&dir)?;
            let typed: Vec<(usize, String)> = d
                .instances
                .iter()
                .enumerate()
                .filter_map(|(i, inst)| inst.label.clone().or_else(|| inst.gold.clone()).map(|t| (i, t)))
                .collect();
            let rows: Vec<usize> = typed.iter().map(|(i, _)| *i).collect();
            let names: Vec<String> = typed.into_iter().map(|(_, t)| t).collect();
            let (gold, types) = encode_labels(&names);
            let probe = knn_probe(d.view(view).gather(&rows).view(), &gold, k)?;
            let report = ProbeReport {
                view,
                k,
                per_type: probe
                    .per_type
                    .iter()
                    .map(|t| ProbeRow {
                        name: types[t.type_id].clone(),
                        count: t.count,
                        accuracy: t.accuracy,
                    })
                    .collect(),
                average: probe.macro_avg,
                had_ties: probe.had_ties,
            };
            let width = report.per_type.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
            println!("{:<width$}  {:>6}  {:>8}", "Type", "Count", view.name());
            for r in &report.per_type {
                println!("{:<width$}  {:>6}  {:>8.4}", r.name, r.count, r.accuracy);
            }
            println!("{:<width$}  {:>6}  {:>8.4}", "Avg", rows.len(), report.average);
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::SweepK { config, data: dir, k, out } => {
            let cfg = train_config(&config, cli.seed)?;
            let d = data::load_dir(&dir)?;
            let results = train::sweep_k(&d, &cfg, &k, train::thread_budget())?;
            mkdir(&out)?;
            let mut table = Vec::new();
            for (kv, report) in results {
                let c = TrainConfig { k: kv, ..cfg.clone() };
                let rr = RunReport::new(report, cfg.eval_source, &c);
                let sub = out.join(format!("k{kv}"));
                mkdir(&sub)?;
                write_json(&sub.join("report.json"), &rr)?;
                println!("K={kv:<4} acc {:.4}  v {:.4}  ari {:.4}", rr.report.accuracy, rr.report.v_measure, rr.report.ari);
                table.push(rr);
            }
            write_json(&out.join("sweep.json"), &table)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let line = serde_json::json!({ "error": "usage", "message": e.to_string().trim() });
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
