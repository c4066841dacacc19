use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context, Result};
use axum::routing::post;
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use tracing::info;

use sdi_core::catalog::{load_catalog, Catalog};
use sdi_core::classifier::convert::{convert_dir, ConvertOptions, Preset};
use sdi_core::classifier::report::{ablation_row_sources, report_ablation, report_detection, ABLATION_ROWS};
use sdi_core::classifier::scorer::{serve_http_batch, serve_lines};
use sdi_core::classifier::{
    by_split, load_labeled_instances, metrics_at, score_instances, train_baseline, write_instances, BaselineModel,
    DetectionMetrics, LabeledInstance, Scorer, Split, TrainConfig,
};
use sdi_core::config::Config;
use sdi_core::engine;
use sdi_core::evidence::{copy_snapshot, read_snapshot};
use sdi_core::service::{router, SearchService};
use sdi_core::synth::{write_synthetic_corpus, SynthSpec};

use crate::{CatalogArgs, Cli, Command, ScorerArgs};

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => Config::default(),
    };
    config.apply_env(|k| std::env::var(k).ok());

    match cli.command {
        Command::Ingest { corpus, out, catalog } => {
            let catalog = open_catalog(&config, &catalog)?;
            let summary = engine::ingest(&corpus, &catalog, &out)?;
            info!(candidates = summary.candidates, "wrote {}", out.display());
            emit(&summary)
        }
        Command::Train { instances, out, seed, max_epochs, hash_bits } => {
            let all = load_labeled_instances(&instances)?;
            let train = by_split(&all, Split::Train);
            let dev = by_split(&all, Split::Dev);
            let cfg = TrainConfig { seed, max_epochs, hash_bits, ..TrainConfig::default() };
            let model = train_baseline(&train, &dev, &cfg)?;
            model.save(&out)?;
            info!("wrote {}", out.display());
            emit(&json!({
                "train_instances": train.len(),
                "dev_instances": dev.len(),
                "selected_epoch": model.epochs,
                "dev_f1": model.dev_f1,
                "threshold": model.threshold,
                "nonzero_weights": model.nonzero_weights(),
            }))
        }
        Command::Eval { instances, split, threshold, ablation, scorer } => {
            let all = load_labeled_instances(&instances)?;
            let set = by_split(&all, split);
            if set.is_empty() {
                bail!("no {split} instances in {}", instances.display());
            }
            if ablation.is_empty() {
                let mut s = open_scorer(&config, &scorer)?;
                let tau = threshold.unwrap_or(config.tau);
                print!("{}", detection_report(s.as_mut(), &set, tau)?);
            } else {
                print!("{}", ablation_report(&ablation, &set, threshold)?);
            }
            Ok(())
        }
        Command::Classify { candidates, out, tau, catalog, scorer } => {
            let catalog = open_catalog(&config, &catalog)?;
            let tau = check_tau(tau.unwrap_or(config.tau))?;
            let blocklist = config.load_blocklist()?;
            let pairs = engine::load_candidates(&candidates, &catalog)?;
            let mut s = open_scorer(&config, &scorer)?;
            let (evidence, summary) = engine::classify(&pairs, s.as_mut(), tau, &blocklist, &catalog)?;
            engine::write_evidence(&out, &evidence)?;
            info!(admitted = summary.admitted, "wrote {}", out.display());
            emit(&summary)
        }
        Command::Build { evidence, corpus, out, tau, catalog } => {
            let catalog = open_catalog(&config, &catalog)?;
            let tau = check_tau(tau.unwrap_or(config.tau))?;
            let blocklist = config.load_blocklist()?;
            let (manifest, stats) = engine::build_snapshot(&evidence, &corpus, catalog, tau, &blocklist, &out)?;
            info!(interactions = manifest.counts.interactions, "wrote snapshot {}", out.display());
            emit(&json!({ "manifest": manifest, "stats": stats }))
        }
        Command::Serve { snapshot, bind } => {
            let snapshot = snapshot
                .or_else(|| config.server.snapshot.clone())
                .ok_or_else(|| anyhow!("no snapshot given (--snapshot, SDI_SNAPSHOT or [server].snapshot)"))?;
            let bind = bind.unwrap_or_else(|| config.bind().to_string());
            serve(&snapshot, &bind)
        }
        Command::Export { snapshot, out } => {
            let manifest = copy_snapshot(&snapshot, &out)?;
            info!("verified and copied {} to {}", snapshot.display(), out.display());
            emit(&manifest)
        }
        Command::Convert { preset, input, out, seed, dev_size } => {
            let opts = ConvertOptions { seed, dev_size, ..ConvertOptions::new(preset) };
            let (instances, report) = convert_dir(&input, &opts)?;
            write_instances(&out, &instances)?;
            info!(instances = instances.len(), "wrote {}", out.display());
            emit(&report)
        }
        Command::Synth { preset, out, seed } => {
            let spec = match preset {
                Preset::Ddi2013 => SynthSpec::ddi2013(),
                Preset::NlmDailyMed => SynthSpec::nlm_dailymed(),
            };
            let summary =
                write_synthetic_corpus(&out, &spec, seed).with_context(|| format!("writing {}", out.display()))?;
            emit(&json!({
                "files": summary.files.len(),
                "documents": summary.documents,
                "sentences": summary.sentences,
                "kept_pairs": summary.kept_pairs,
                "kept_positives": summary.kept_positives,
                "oversize_pairs": summary.oversize_pairs,
            }))
        }
        Command::ServeScorer { model, http } => {
            let model = BaselineModel::load(&model)?;
            match http {
                Some(addr) => serve_scorer_http(model, &addr),
                None => {
                    let mut model = model;
                    let served = serve_lines(&mut model, std::io::stdin().lock(), std::io::stdout().lock())?;
                    info!(served, "input closed");
                    Ok(())
                }
            }
        }
    }
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn check_tau(tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        bail!("tau {tau} outside [0, 1]");
    }
    Ok(tau)
}

fn open_catalog(config: &Config, args: &CatalogArgs) -> Result<Catalog> {
    match &args.agents {
        Some(agents) => Ok(load_catalog(agents, args.clusters.as_deref())?),
        None if args.clusters.is_some() => bail!("--clusters needs --agents"),
        None => Ok(config.load_catalog().context("no catalog (--agents or [catalog] in the config)")?),
    }
}

fn open_scorer(config: &Config, args: &ScorerArgs) -> Result<Box<dyn Scorer + Send>> {
    if let Some(model) = &args.model {
        return Ok(Box::new(BaselineModel::load(model)?));
    }
    let cfg = config.scorer.as_ref().ok_or_else(|| anyhow!("no scorer (--model or [scorer] in the config)"))?;
    Ok(cfg.open()?)
}

/// Evaluation rows present in `set`: the standard source groupings, then
/// any source outside them.
fn evaluation_rows(set: &[LabeledInstance]) -> Vec<(String, Vec<usize>)> {
    let mut rows = Vec::new();
    for row in ABLATION_ROWS {
        let sources = ablation_row_sources(row).unwrap_or(&[]);
        let idx: Vec<usize> = (0..set.len()).filter(|&i| sources.contains(&set[i].source.as_str())).collect();
        if !idx.is_empty() {
            rows.push((row.to_string(), idx));
        }
    }
    let known = ablation_row_sources("All").unwrap_or(&[]);
    let mut other: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in set.iter().enumerate() {
        if !known.contains(&inst.source.as_str()) {
            other.entry(inst.source.as_str()).or_default().push(i);
        }
    }
    rows.extend(other.into_iter().map(|(s, idx)| (s.to_string(), idx)));
    rows
}

fn subset_metrics(set: &[LabeledInstance], scores: &[f64], idx: &[usize], tau: f64) -> Result<DetectionMetrics> {
    let inst: Vec<LabeledInstance> = idx.iter().map(|&i| set[i].clone()).collect();
    let sc: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    Ok(metrics_at(&inst, &sc, tau)?)
}

fn detection_report(scorer: &mut dyn Scorer, set: &[LabeledInstance], tau: f64) -> Result<String> {
    let scores = score_instances(scorer, set)?;
    let mut rows = Vec::new();
    for (name, idx) in evaluation_rows(set) {
        rows.push((name, subset_metrics(set, &scores, &idx, tau)?));
    }
    let borrowed: Vec<(&str, DetectionMetrics)> = rows.iter().map(|(n, m)| (n.as_str(), *m)).collect();
    Ok(report_detection(&borrowed))
}

fn ablation_report(columns: &[String], set: &[LabeledInstance], threshold: Option<f64>) -> Result<String> {
    let rows = evaluation_rows(set);
    let mut names = Vec::new();
    let mut cells = BTreeMap::new();
    for spec in columns {
        let (name, path) =
            spec.split_once('=').ok_or_else(|| anyhow!("--ablation expects NAME=MODEL, got {spec:?}"))?;
        let mut model = BaselineModel::load(Path::new(path))?;
        let tau = threshold.unwrap_or(model.threshold);
        let scores = score_instances(&mut model, set)?;
        for (row, idx) in &rows {
            cells.insert((name.to_string(), row.clone()), subset_metrics(set, &scores, idx, tau)?);
        }
        names.push(name.to_string());
    }
    let row_names: Vec<&str> = rows.iter().map(|(r, _)| r.as_str()).collect();
    let col_names: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(report_ablation(&row_names, &col_names, &cells)?)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn bind_listener(bind: &str) -> Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    std::io::stdout().flush()?;
    Ok((listener, addr))
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

fn serve(snapshot: &Path, bind: &str) -> Result<()> {
    let (store, manifest) =
        read_snapshot(snapshot).with_context(|| format!("loading snapshot {}", snapshot.display()))?;
    info!(
        interactions = manifest.counts.interactions,
        evidence = manifest.counts.evidence,
        "loaded snapshot {}",
        snapshot.display()
    );
    let app = router(Arc::new(SearchService::new(store, Some(manifest))));
    runtime()?.block_on(async move {
        let (listener, _) = bind_listener(bind).await?;
        axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
        Ok(())
    })
}

fn serve_scorer_http(model: BaselineModel, bind: &str) -> Result<()> {
    let model = Arc::new(Mutex::new(model));
    let handler = move |Json(body): Json<Vec<Value>>| {
        let model = model.clone();
        async move {
            let mut guard = model.lock().expect("scorer lock");
            Json(serve_http_batch(&mut *guard, &body))
        }
    };
    let app = Router::new().route("/", post(handler.clone())).route("/score", post(handler));
    runtime()?.block_on(async move {
        let (listener, _) = bind_listener(bind).await?;
        axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
        Ok(())
    })
}
