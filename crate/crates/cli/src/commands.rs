use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use zssl_core::eval::{
    ablation_suite, evaluate_model, make_split, reports_to_csv, run_protocol, select_rows, AblationRow,
};
use zssl_core::features::{extract_batch, Aggregation, FeatureConfig};
use zssl_core::io::synth::{synth_dataset, SynthSpec};
use zssl_core::io::{load_dataset, load_embeddings, read_manifest, save_dataset, LoadOptions};
use zssl_core::neural::checkpoint::Checkpoint;
use zssl_core::neural::gradcheck::{run_all, GradCheckConfig};
use zssl_core::pipeline::train as train_model;
use zssl_core::{Dataset, Protocol, ProtocolReport, ZslModel};

use crate::run_manifest::{sidecar, Recorder};
use crate::settings::{families, read_config_file, Settings};
use crate::{
    AblateArgs, EvalArgs, ExperimentArgs, ExtractArgs, GradcheckArgs, SynthArgs, TrainArgs, EXIT_INPUT,
    EXIT_NUMERIC, EXIT_USAGE,
};

/// A malformed command line that clap could not catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
pub struct NumericFailure(pub String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<NumericFailure>() {
            return EXIT_NUMERIC;
        }
        if let Some(core) = cause.downcast_ref::<zssl_core::Error>() {
            return if core.is_numeric() { EXIT_NUMERIC } else { EXIT_INPUT };
        }
    }
    EXIT_INPUT
}

/// Config file, then `--set` pairs, then dedicated flags.
fn settings(exp: &ExperimentArgs, extra: &[(&str, Option<String>)]) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &exp.config {
        for (k, v) in read_config_file(path)? {
            s.apply(&k, &v).with_context(|| format!("{}", path.display()))?;
        }
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    for pair in &exp.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    let named = [
        ("features", exp.features.clone()),
        ("epochs", exp.epochs.map(|v| v.to_string())),
        ("lr", exp.lr.map(|v| v.to_string())),
        ("batch", exp.batch.map(|v| v.to_string())),
        ("loss", exp.loss.clone()),
        ("lambda_recon", exp.lambda_recon.map(|v| v.to_string())),
        ("projection_hidden", exp.hidden.map(|v| v.to_string())),
        ("seed", exp.seed.map(|v| v.to_string())),
    ];
    for (k, v) in named.into_iter().chain(extra.iter().map(|(k, v)| (*k, v.clone()))) {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    }
    for (k, v) in &flags {
        s.apply(k, v).map_err(|e| usage(format!("{e:#}")))?;
    }
    s.eval.features.validate().map_err(|e| usage(e.to_string()))?;
    s.eval.train.validate().map_err(|e| usage(e.to_string()))?;
    Ok(s)
}

fn load(manifest: &Path, exp: &ExperimentArgs, opts: &LoadOptions, rec: &mut Recorder) -> Result<Dataset> {
    let mut data = load_dataset(manifest, opts)?;
    rec.hash_dataset(manifest, opts.deep_channel)?;
    if let Some(path) = &exp.embeddings {
        data.embeddings = load_embeddings(path)?;
        rec.hash_file(path)?;
        if let Some(s) = data.samples.iter().find(|s| !data.embeddings.contains(s.label())) {
            bail!(
                "{}: no embedding for label {:?} of sample {}",
                path.display(),
                s.label(),
                s.id()
            );
        }
    }
    log::info!(
        "loaded {} samples, {} classes from {}",
        data.samples.len(),
        data.class_labels().len(),
        manifest.display()
    );
    Ok(data)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("{}: cannot write", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn settings_json(s: &Settings) -> serde_json::Value {
    json!({
        "eval": s.eval,
        "short_videos": format!("{:?}", s.short_videos).to_lowercase(),
        "assignments": s.assignments,
    })
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let mut rec = Recorder::start();
    let [d, an, sv, deep] = families(&a.features).map_err(|e| usage(e.to_string()))?;
    if deep {
        return Err(usage("extract writes skeleton features only; drop `deep` from --features"));
    }
    let aggregation = match a.aggregation.as_str() {
        "mean" => Aggregation::Mean,
        "max" => Aggregation::Max,
        other => return Err(usage(format!("--aggregation must be mean or max, got {other:?}"))),
    };
    let cfg = FeatureConfig {
        aggregation,
        normalize: a.normalize,
        ..FeatureConfig::families(d, an, sv, false)
    };
    let data = load_dataset(&a.manifest, &LoadOptions::default())?;
    rec.hash_dataset(&a.manifest, false)?;
    let feats = extract_batch(&data.samples, &cfg)?;
    let mut out = String::new();
    for (s, f) in data.samples.iter().zip(&feats) {
        out.push_str(s.id());
        out.push('\t');
        out.push_str(s.label());
        for v in f.values() {
            write!(out, "\t{v}")?;
        }
        out.push('\n');
    }
    write(&a.out, &out)?;
    println!(
        "{} samples x {} features -> {}",
        feats.len(),
        cfg.skeleton_dim(),
        a.out.display()
    );
    rec.finish(json!({ "features": cfg }), vec![], &[&a.out], &sidecar(&a.out))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut rec = Recorder::start();
    let mut s = settings(&a.exp, &[])?;
    let opts = s.load_options(s.eval.features.use_deep);
    let mut data = load(&a.manifest, &a.exp, &opts, &mut rec)?;
    s.resolve_deep_dim(data.deep_dim())?;
    if let Some(p) = a.split {
        let split = make_split(&data.class_labels(), p.into(), s.eval.train.seed)?;
        data.samples.retain(|x| split.seen().contains(x.label()));
        data.embeddings = data.embeddings.filter(|l| split.seen().contains(l))?;
        log::info!("training on {} seen classes of the {} split", split.seen().len(), split.protocol());
    }
    let e = &s.eval;
    let outcome = train_model(&data.samples, &data.embeddings, &e.features, &e.deep, &e.train)?;

    let ck = outcome.model.to_checkpoint();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    ck.write(&a.out)?;
    let log_path = a.loss_log.clone().unwrap_or_else(|| with_suffix(&a.out, ".loss.csv"));
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1)?;
    }
    write(&log_path, &csv)?;
    println!(
        "trained {} epochs on {} samples; final loss {:.6} -> {}",
        outcome.losses.len(),
        data.samples.len(),
        outcome.losses.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    rec.finish(
        settings_json(&s),
        vec![s.eval.train.seed],
        &[&a.out, &log_path],
        &sidecar(&a.out),
    )
}

fn write_reports(prefix: &Path, reports: &[ProtocolReport], csv: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let json_path = with_suffix(prefix, ".json");
    let csv_path = with_suffix(prefix, ".csv");
    write(&json_path, &(serde_json::to_string_pretty(reports)? + "\n"))?;
    write(&csv_path, csv)?;
    Ok((json_path, csv_path))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut rec = Recorder::start();
    let protocol: Protocol = a.protocol.into();
    let (report, config, seeds) = if let Some(ck_path) = &a.checkpoint {
        let model = ZslModel::from_checkpoint(&Checkpoint::read(ck_path)?)?;
        rec.hash_file(ck_path)?;
        let opts = LoadOptions {
            deep_channel: model.features.use_deep,
            snippet_len: model.deep_config.snippet_len,
            ..LoadOptions::default()
        };
        let data = load(&a.manifest, &a.exp, &opts, &mut rec)?;
        let name = ck_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "checkpoint".into());
        let report = evaluate_model(&data, &model, &name, protocol)?;
        let config = json!({ "checkpoint": ck_path.display().to_string(), "features": model.features,
            "deep": model.deep_config, "train": model.train_config });
        (report, config, vec![model.train_config.seed])
    } else {
        let mut s = settings(&a.exp, &[("runs", a.runs.map(|r| r.to_string()))])?;
        let opts = s.load_options(s.eval.features.use_deep);
        let data = load(&a.manifest, &a.exp, &opts, &mut rec)?;
        s.resolve_deep_dim(data.deep_dim())?;
        let report = run_protocol(&data, protocol, &s.eval)?;
        let seeds = report.runs.iter().map(|r| r.seed).collect();
        (report, settings_json(&s), seeds)
    };
    let reports = [report];
    let (json_path, csv_path) = write_reports(&a.out, &reports, &reports_to_csv(&reports))?;
    let r = &reports[0];
    println!(
        "{} top-1 {:.4} ± {:.4} over {} run(s)",
        r.protocol,
        r.mean_top1,
        r.std_top1,
        r.runs.len()
    );
    rec.finish(config, seeds, &[&json_path, &csv_path], &with_suffix(&a.out, ".run.json"))
}

fn ablation_csv(rows: &[AblationRow], protocols: &[Protocol], reports: &[ProtocolReport]) -> String {
    let mut out = String::from("row,modality,method");
    for p in protocols {
        write!(out, ",{p}_mean_top1,{p}_std_top1").expect("string write");
    }
    out.push('\n');
    for (row, chunk) in rows.iter().zip(reports.chunks(protocols.len())) {
        write!(out, "{},{},\"{}\"", row.key, row.modality, row.method).expect("string write");
        for r in chunk {
            write!(out, ",{:.6},{:.6}", r.mean_top1, r.std_top1).expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let mut rec = Recorder::start();
    let rows = select_rows(a.rows.as_deref()).map_err(|e| usage(e.to_string()))?;
    let mut protocols: Vec<Protocol> = Vec::new();
    for p in &a.protocols {
        let p = Protocol::from(*p);
        if !protocols.contains(&p) {
            protocols.push(p);
        }
    }
    let mut s = settings(&a.exp, &[("runs", a.runs.map(|r| r.to_string()))])?;
    let deep_rows: Vec<&str> = rows.iter().filter(|r| r.deep).map(|r| r.key).collect();
    if !deep_rows.is_empty() && read_manifest(&a.manifest)?.deep_features.is_none() {
        bail!(
            "rows {} need deep snippet features, but {} has no deep_features directory",
            deep_rows.join(", "),
            a.manifest.display()
        );
    }
    let opts = s.load_options(!deep_rows.is_empty());
    let data = load(&a.manifest, &a.exp, &opts, &mut rec)?;
    s.resolve_deep_dim(data.deep_dim())?;
    let reports = ablation_suite(&data, &protocols, &rows, &s.eval)?;
    let csv = ablation_csv(&rows, &protocols, &reports);
    let (json_path, csv_path) = write_reports(&a.out, &reports, &csv)?;
    print!("{csv}");
    let seeds = reports
        .first()
        .map(|r| r.runs.iter().map(|x| x.seed).collect())
        .unwrap_or_default();
    rec.finish(settings_json(&s), seeds, &[&json_path, &csv_path], &with_suffix(&a.out, ".run.json"))
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let rec = Recorder::start();
    let cfg = GradCheckConfig {
        eps: a.eps,
        tolerance: a.tolerance,
        ..GradCheckConfig::default()
    };
    let reports = run_all(a.instances, a.seed, &cfg)?;
    for r in &reports {
        println!(
            "{:<16} {:>4} instances {:>7} coords  max rel error {:.3e}  {}",
            r.component,
            r.instances,
            r.coords,
            r.max_rel_error,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    if let Some(out) = &a.out {
        write(out, &(serde_json::to_string_pretty(&reports)? + "\n"))?;
        let config = json!({ "instances": a.instances, "eps": a.eps, "tolerance": a.tolerance,
            "max_coords": cfg.max_coords });
        rec.finish(config, vec![a.seed], &[out.as_path()], &sidecar(out))?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.component.as_str()).collect();
    if !failed.is_empty() {
        return Err(NumericFailure(format!("gradient check failed for {}", failed.join(", "))).into());
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let rec = Recorder::start();
    let spec = SynthSpec {
        num_classes: a.classes,
        samples_per_class: a.per_class,
        embed_dim: a.embed_dim,
        noise: a.noise,
        frames: a.frames,
        seed: a.seed,
        deep_dim: a.deep_dim,
        latent_rank: a.latent_rank,
        signal_scale: a.signal_scale,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let data = synth_dataset(&spec)?;
    let manifest = save_dataset(&a.out, &data)?;
    println!(
        "{} samples, {} classes -> {}",
        data.samples.len(),
        data.embeddings.len(),
        manifest.display()
    );
    rec.finish(json!(spec), vec![a.seed], &[manifest.as_path()], &a.out.join("run.json"))
}
