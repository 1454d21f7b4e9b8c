use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use micrograph::diagnostics::{diagnostics, write_diagnostics, DEFAULT_MAX_GRAPHS};
use micrograph::graph::{load_dataset, write_dataset, Graph};
use micrograph::segmenter::Sampler;
use micrograph::synth::{self, SynthSpec};
use micrograph::trainer::{self, Checkpoint, TrainConfig, TrainState};
use micrograph::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "micrograph", version, about = "Motif-driven self-supervised graph representation learning")]
struct Cli {
    /// Overrides the seed of the config, spec or checkpoint.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loads a dataset and prints a summary.
    Validate { dataset: PathBuf },
    /// Writes the planted-motif benchmark and its ground truth.
    GenerateSynth {
        /// JSON spec; the built-in default when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Trains encoder and motif table; writes checkpoints and metrics.
    Pretrain {
        #[arg(long)]
        dataset: PathBuf,
        /// Flat key = value file; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Total epochs; for a resumed run, the epoch to stop at.
        #[arg(long)]
        epochs: Option<usize>,
        /// Extra `key=value` overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Emits one JSON line per sampled subgraph.
    Segment {
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "motif")]
        sampler: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emits, per motif slot, its nearest subgraphs.
    DumpMotifs {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 3)]
        topk: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear probe (and motif purity when ground truth is given).
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Writes similarity and cluster-size diagnostics as CSV.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_GRAPHS)]
        max_graphs: usize,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json_line(out: &mut String, value: serde_json::Value) {
    let _ = writeln!(out, "{value}");
}

fn load_checkpoint(path: &Path, seed: Option<u64>) -> Result<Checkpoint> {
    let mut ckpt = Checkpoint::load(path)?;
    if let Some(s) = seed {
        ckpt.config.seed = s;
    }
    Ok(ckpt)
}

fn validate(dataset: &Path) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let nodes: usize = graphs.iter().map(Graph::num_nodes).sum();
    let edges: usize = graphs.iter().map(|g| g.edges().len()).sum();
    let labelled = graphs.iter().filter(|g| g.label().is_some()).count();
    let f = graphs.first().map_or(0, Graph::num_features);
    println!(
        "graphs={} features={f} nodes={nodes} edges={edges} labelled={labelled}",
        graphs.len()
    );
    Ok(())
}

fn generate_synth(spec: Option<&Path>, seed: Option<u64>, out: &Path, truth: &Path) -> Result<()> {
    let mut spec = match spec {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let generated = synth::generate(&spec)?;
    write_dataset(out, &generated.graphs)?;
    synth::write_truth(truth, &generated.truth)?;
    log::info!(
        "wrote {} graphs ({} template nodes, {} deleted, {} added)",
        generated.graphs.len(),
        generated.stats.template_nodes,
        generated.stats.nodes_deleted,
        generated.stats.nodes_added
    );
    Ok(())
}

fn pretrain(
    dataset: &Path,
    config: Option<&Path>,
    out: &Path,
    resume: Option<&Path>,
    epochs: Option<usize>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let state = if let Some(p) = resume {
        if config.is_some() || !overrides.is_empty() || seed.is_some() {
            return Err(Error::Config("a resumed run keeps the checkpoint config; only --epochs may change".into()));
        }
        let ckpt = Checkpoint::load(p)?;
        let epochs = epochs.unwrap_or(ckpt.config.epochs);
        trainer::resume(&graphs, ckpt, epochs, Some(out))?
    } else {
        let mut cfg = match config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        for kv in overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(e) = epochs {
            cfg.epochs = e;
        }
        cfg.validate()?;
        trainer::pretrain(&graphs, &cfg, Some(out))?
    };
    log::info!("finished at epoch {} after {} steps", state.epoch, state.step);
    Ok(())
}

fn heuristic_rate(graphs: &[Graph], ckpt: &Checkpoint) -> Result<f64> {
    match ckpt.state.heuristic_rate {
        Some(r) => Ok(r),
        None => trainer::motif_subgraph_rate(graphs, &ckpt.state, &ckpt.config),
    }
}

fn segment(dataset: &Path, checkpoint: &Path, sampler: &str, out: &Path, seed: Option<u64>) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let ckpt = load_checkpoint(checkpoint, seed)?;
    let sampler: Sampler = sampler.parse()?;
    let rate = if sampler == Sampler::Motif { 1.0 } else { heuristic_rate(&graphs, &ckpt)? };
    let subs = trainer::segment_dataset(&graphs, &ckpt.state.encoder, &ckpt.config, sampler, rate, ckpt.config.seed)?;
    let mut text = String::new();
    for (g, list) in graphs.iter().zip(&subs) {
        for s in list {
            json_line(
                &mut text,
                serde_json::json!({"parent_id": g.id(), "nodes": s.nodes(), "sampler": sampler.as_str()}),
            );
        }
    }
    write(out, &text)
}

fn dump_motifs(checkpoint: &Path, dataset: &Path, topk: usize, out: &Path, seed: Option<u64>) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let ckpt = load_checkpoint(checkpoint, seed)?;
    let seg = trainer::segment_and_embed(&graphs, &ckpt.state.encoder, &ckpt.config, Sampler::Motif, 1.0, ckpt.config.seed)?;
    let mut text = String::new();
    if seg.is_empty() {
        log::warn!("no subgraphs; every motif gets an empty neighbour list");
    }
    let s = if seg.is_empty() { None } else { Some(seg.similarity(&ckpt.state.motifs)?) };
    for k in 0..ckpt.state.motifs.num_motifs() {
        let mut order: Vec<usize> = (0..seg.len()).collect();
        if let Some(s) = &s {
            order.sort_by(|&a, &b| s.get(k, b).total_cmp(&s.get(k, a)).then(a.cmp(&b)));
        }
        let nearest: Vec<serde_json::Value> = order
            .into_iter()
            .take(topk)
            .map(|j| {
                serde_json::json!({
                    "parent_id": graphs[seg.parents[j]].id(),
                    "nodes": seg.subgraphs[j].nodes(),
                    "similarity": s.as_ref().map_or(0.0, |s| s.get(k, j)),
                })
            })
            .collect();
        json_line(&mut text, serde_json::json!({"motif": k, "nearest": nearest}));
    }
    write(out, &text)
}

fn probe(checkpoint: &Path, dataset: &Path, truth: Option<&Path>, report: &Path, folds: usize, seed: Option<u64>) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let ckpt = load_checkpoint(checkpoint, seed)?;
    let truth = truth.map(synth::load_truth).transpose()?;
    let labels: Vec<i64> = match &truth {
        Some(t) => {
            synth::check_truth(&graphs, t)?;
            t.iter().map(|r| r.label).collect()
        }
        None => graphs
            .iter()
            .map(|g| g.label().ok_or_else(|| Error::InvalidArgument(format!("graph {} has no label", g.id()))))
            .collect::<Result<_>>()?,
    };
    let seed = ckpt.config.seed;
    let untrained = TrainState::init(ckpt.state.encoder.input_dim(), &ckpt.config)?;
    let rows = [
        ("probe_pretrained", trainer::extract_features(&graphs, &ckpt.state.encoder)?),
        ("probe_untrained", trainer::extract_features(&graphs, &untrained.encoder)?),
        ("probe_raw_mean", synth::raw_mean_features(&graphs)?),
    ];
    let mut text = String::from("metric,value,std\n");
    for (name, features) in rows {
        let r = synth::linear_probe(&features, &labels, folds, seed)?;
        let _ = writeln!(text, "{name},{},{}", r.mean, r.std);
    }
    if let Some(t) = &truth {
        let templates = t
            .iter()
            .flat_map(|r| r.node_templates.iter())
            .copied()
            .max()
            .map_or(0, |m| (m + 1).max(0) as usize);
        let p = synth::motif_purity(&graphs, t, &ckpt.state, &ckpt.config, templates)?;
        let _ = writeln!(text, "motif_purity,{},", p.purity);
        let u = synth::motif_purity(&graphs, t, &untrained, &ckpt.config, templates)?;
        let _ = writeln!(text, "motif_purity_untrained,{},", u.purity);
    }
    for line in text.lines().skip(1) {
        log::info!("{line}");
    }
    write(report, &text)
}

fn diagnose(checkpoint: &Path, dataset: &Path, out: &Path, max_graphs: usize, seed: Option<u64>) -> Result<()> {
    let graphs = load_dataset(dataset)?;
    let ckpt = load_checkpoint(checkpoint, seed)?;
    let tables = diagnostics(&graphs, &ckpt.state, &ckpt.config, max_graphs)?;
    write_diagnostics(out, &tables)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { dataset } => validate(&dataset),
        Command::GenerateSynth { spec, out, truth } => generate_synth(spec.as_deref(), cli.seed, &out, &truth),
        Command::Pretrain {
            dataset,
            config,
            out,
            resume,
            epochs,
            overrides,
        } => pretrain(&dataset, config.as_deref(), &out, resume.as_deref(), epochs, &overrides, cli.seed),
        Command::Segment {
            dataset,
            checkpoint,
            sampler,
            out,
        } => segment(&dataset, &checkpoint, &sampler, &out, cli.seed),
        Command::DumpMotifs {
            checkpoint,
            dataset,
            topk,
            out,
        } => dump_motifs(&checkpoint, &dataset, topk, &out, cli.seed),
        Command::Probe {
            checkpoint,
            dataset,
            truth,
            report,
            folds,
        } => probe(&checkpoint, &dataset, truth.as_deref(), &report, folds, cli.seed),
        Command::Diagnose {
            checkpoint,
            dataset,
            out,
            max_graphs,
        } => diagnose(&checkpoint, &dataset, &out, max_graphs, cli.seed),
    }
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        log::warn!("built without the parallel feature; --threads {threads} ignored");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    configure_threads(cli.threads);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
