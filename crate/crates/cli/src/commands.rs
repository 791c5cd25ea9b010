//! Command implementations.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use converse_core::conversation::ConversationThread;
use converse_core::corpus::{
    corpus_statistics, load_corpus, make_folds, write_corpus, Corpus, CorpusStats, FoldScheme,
    FormatVersion,
};
use converse_core::eval::{
    depth_bucket_eval, lambda_sweep, stance_over_time, stance_scores, sweep_csv_row, sweep_svg,
    time_series_svg, veracity_scores, write_attribution_csv, write_depth_csv,
    write_stance_predictions_csv, write_stance_results_csv, write_sweep_csv,
    write_time_series_csv, write_veracity_predictions_csv, write_veracity_results_csv,
    DepthBucketReport, StanceScores, VeracityScores, SWEEP_CSV_HEADER,
};
use converse_core::model::{
    ModelConfig, RnnVariant, StancePrediction, ThreadPrediction, VeracityPrediction,
};
use converse_core::svg;
use converse_core::synth::{generate_synthetic, StanceDynamics, SyntheticSpec};
use converse_core::train::{
    load_checkpoint, predict_threads, run_fold_plan, save_checkpoint, train, TrainConfig,
    TrainMode,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    AblateArgs, EvaluateArgs, IngestArgs, ReportArgs, SweepArgs, SynthArgs, TrainArgs, TrainOpts,
};
use crate::config::{resolve, SEED_ENV};
use crate::error::CliError;
use crate::manifest::{fingerprint, Manifest};

fn ensure_exists(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn load(path: &Path) -> Result<Corpus, CliError> {
    ensure_exists(path)?;
    Ok(load_corpus(path, FormatVersion::V1)?)
}

fn print_stats(stats: &CorpusStats) {
    println!("corpus: {}", stats.corpus);
    println!("threads: {}", stats.threads);
    println!("tweets: {}", stats.tweets);
    println!("avg depth: {:.2}", stats.avg_depth);
    println!(
        "stance: support={} deny={} query={} comment={}",
        stats.stance_counts[0], stats.stance_counts[1], stats.stance_counts[2],
        stats.stance_counts[3]
    );
    println!(
        "veracity: true={} false={} unverified={}",
        stats.veracity_counts[0], stats.veracity_counts[1], stats.veracity_counts[2]
    );
}

fn env_seed_or(default: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::usage(format!("bad {SEED_ENV} value {v:?}"))),
        Err(_) => Ok(default),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed_or(7)?,
    };
    let spec = SyntheticSpec {
        n_threads: args.threads,
        tweets_min: args.min_tweets,
        tweets_max: args.max_tweets,
        vocab_size: args.vocab,
        n_events: args.events,
        seed,
        cue_rate: args.cue_rate,
        dynamics: StanceDynamics::planted(),
    };
    let corpus = generate_synthetic(&spec)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_corpus(&corpus, &args.out)?;
    let stats = corpus_statistics(&corpus)?;
    print_stats(&stats);
    let stats_path = args
        .stats
        .clone()
        .unwrap_or_else(|| args.out.with_extension("stats.csv"));
    CorpusStats::write_csv(std::slice::from_ref(&stats), &stats_path)?;

    let mut manifest = Manifest::new("synth", seed, fingerprint(&args.out)?, &args.out);
    manifest.outdir = args.out.display().to_string();
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(manifest_path_for(&args.out), json)?;
    Ok(())
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| format!("{}.manifest.json", n.to_string_lossy()))
        .unwrap_or_else(|| "manifest.json".to_string());
    output.with_file_name(name)
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    let version: FormatVersion = args
        .format_version
        .parse()
        .map_err(|e: converse_core::corpus::DataError| CliError::usage(e.to_string()))?;
    ensure_exists(&args.input)?;
    let corpus = load_corpus(&args.input, version)?;
    write_corpus(&corpus, &args.output)?;
    let stats = corpus_statistics(&corpus)?;
    print_stats(&stats);
    if let Some(stats_path) = &args.stats {
        CorpusStats::write_csv(std::slice::from_ref(&stats), stats_path)?;
    }
    let manifest = Manifest::new("ingest", 0, fingerprint(&args.input)?, &args.output);
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(manifest_path_for(&args.output), json)?;
    Ok(())
}

/// Scores and configuration facts for one run directory; the report command
/// merges these across runs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    pub dataset: String,
    pub mode: String,
    pub lambda: Option<f64>,
    pub gcn_variant: String,
    pub rnn_variant: String,
    pub use_stance_features: bool,
    pub stance: Option<StanceScores>,
    pub veracity: Option<VeracityScores>,
    pub depth: Option<DepthBucketReport>,
}

fn method_label(model: &ModelConfig, config: &TrainConfig) -> String {
    let mut label = match config.mode {
        TrainMode::StanceOnly => "conversational-gcn".to_string(),
        TrainMode::SingleTaskVeracity => "hierarchical-gcn-rnn".to_string(),
        TrainMode::Joint => "hierarchical-psv".to_string(),
    };
    if config.mode == TrainMode::Joint && config.lambda != 1.0 {
        label.push_str(&format!("-lambda{}", config.lambda));
    }
    if model.gcn.variant == converse_core::adjacency::GcnVariant::Original {
        label.push_str("+original-gcn");
    }
    match model.veracity.rnn_variant {
        RnnVariant::Gru => {}
        RnnVariant::Cnn => label.push_str("+cnn"),
        RnnVariant::None => label.push_str("+no-rnn"),
    }
    if !model.veracity.use_stance_features {
        label.push_str("+no-stance-features");
    }
    label
}

struct PredictionBundle {
    stance: Vec<StancePrediction>,
    veracity: Vec<VeracityPrediction>,
    threads: Vec<ThreadPrediction>,
}

impl PredictionBundle {
    fn from_threads(threads: Vec<ThreadPrediction>) -> PredictionBundle {
        let stance = threads
            .iter()
            .flat_map(|t| t.stance.iter().cloned())
            .collect();
        let veracity = threads.iter().map(|t| t.veracity.clone()).collect();
        PredictionBundle {
            stance,
            veracity,
            threads,
        }
    }
}

/// Write predictions, metrics and plots for one evaluated split.
fn write_eval_outputs(
    outdir: &Path,
    corpus: &Corpus,
    bundle: &PredictionBundle,
    method: &str,
    mode_label: &str,
    model: &ModelConfig,
    lambda: Option<f64>,
) -> Result<RunMetrics, CliError> {
    write_stance_predictions_csv(&bundle.stance, &outdir.join("stance_predictions.csv"))?;
    write_veracity_predictions_csv(&bundle.veracity, &outdir.join("veracity_predictions.csv"))?;
    write_attribution_csv(&bundle.threads, &outdir.join("attribution.csv"))?;

    let stance = stance_scores(&bundle.stance).ok();
    let veracity = veracity_scores(&bundle.veracity).ok();
    let depth = {
        let report = depth_bucket_eval(&bundle.stance);
        if report.buckets.is_empty() {
            None
        } else {
            write_depth_csv(&report, &outdir.join("depth_buckets.csv"))?;
            std::fs::write(
                outdir.join("depth_buckets.svg"),
                converse_core::eval::depth_svg(&[(method.to_string(), report.clone())]),
            )?;
            Some(report)
        }
    };

    if let Some(s) = &stance {
        write_stance_results_csv(
            &[(method.to_string(), s.clone())],
            true,
            &outdir.join("stance_results.csv"),
        )?;
    }
    if let Some(v) = &veracity {
        write_veracity_results_csv(
            &[(method.to_string(), corpus.name.clone(), v.clone())],
            true,
            &outdir.join("veracity_results.csv"),
        )?;
    }

    // Stance-over-time curves from the corpus gold labels, when present.
    let series = stance_over_time(corpus, 8);
    if !series.rows.is_empty() {
        write_time_series_csv(&series, &outdir.join("stance_over_time.csv"))?;
        for (veracity_class, chart) in time_series_svg(&series) {
            std::fs::write(
                outdir.join(format!("stance_over_time_{veracity_class}.svg")),
                chart,
            )?;
        }
    }

    // Attribution rendering for the largest evaluated thread.
    if let Some(best) = bundle
        .threads
        .iter()
        .max_by_key(|t| t.attribution.len())
    {
        if let Some(thread) = corpus.thread(&best.thread_id) {
            let rows: Vec<(String, usize, String)> = best
                .attribution
                .iter()
                .map(|(tweet_id, dims)| {
                    let text = thread
                        .tweets
                        .iter()
                        .find(|tw| &tw.id == tweet_id)
                        .map(|tw| tw.text.clone())
                        .unwrap_or_default();
                    (tweet_id.clone(), *dims, text)
                })
                .collect();
            std::fs::write(
                outdir.join("attribution.svg"),
                svg::attribution_chart(
                    &format!("max-pooling attribution ({})", best.thread_id),
                    &rows,
                ),
            )?;
        }
    }

    let metrics = RunMetrics {
        method: method.to_string(),
        dataset: corpus.name.clone(),
        mode: mode_label.to_string(),
        lambda,
        gcn_variant: model.gcn.variant.as_str().to_string(),
        rnn_variant: format!("{:?}", model.veracity.rnn_variant).to_lowercase(),
        use_stance_features: model.veracity.use_stance_features,
        stance,
        veracity,
        depth,
    };
    let json =
        serde_json::to_string_pretty(&metrics).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(outdir.join("metrics.json"), json)?;
    Ok(metrics)
}

fn mode_label(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Joint => "joint",
        TrainMode::SingleTaskVeracity => "single-task",
        TrainMode::StanceOnly => "stance-only",
    }
}

/// Shared setup for train/sweep/ablate: resolved configs, loaded corpora and
/// the manifest skeleton.
struct TrainSetup {
    model: ModelConfig,
    config: TrainConfig,
    corpus: Corpus,
    test: Option<Corpus>,
    dev: Option<Corpus>,
    manifest: Manifest,
}

fn setup(opts: &TrainOpts, command: &str) -> Result<TrainSetup, CliError> {
    let (model, config) = resolve(opts)?;
    std::fs::create_dir_all(&opts.outdir)?;
    let corpus = load(&opts.corpus)?;
    let test = opts.test_corpus.as_deref().map(load).transpose()?;
    let dev = opts.dev_corpus.as_deref().map(load).transpose()?;

    let mut manifest = Manifest::new(
        command,
        config.seed,
        fingerprint(&opts.corpus)?,
        &opts.outdir,
    );
    if let Some(p) = &opts.test_corpus {
        manifest
            .input_fingerprints
            .insert("test_corpus".into(), fingerprint(p)?);
    }
    if let Some(p) = &opts.dev_corpus {
        manifest
            .input_fingerprints
            .insert("dev_corpus".into(), fingerprint(p)?);
    }
    manifest.model_config = Some(model.clone());
    manifest.train_config = Some(config.clone());
    Ok(TrainSetup {
        model,
        config,
        corpus,
        test,
        dev,
        manifest,
    })
}

/// Combine train and test corpora into one corpus plus a fixed-split fold
/// plan, so fold-based runners can drive fixed splits too.
fn fixed_plan(
    corpus: &Corpus,
    test: &Corpus,
) -> Result<(Corpus, converse_core::corpus::FoldPlan), CliError> {
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for t in corpus.threads.iter().chain(test.threads.iter()) {
        if !ids.insert(t.thread_id.as_str()) {
            return Err(CliError::usage(format!(
                "thread id {:?} appears in both corpora",
                t.thread_id
            )));
        }
    }
    let train_ids: Vec<String> = corpus.threads.iter().map(|t| t.thread_id.clone()).collect();
    let test_ids: Vec<String> = test.threads.iter().map(|t| t.thread_id.clone()).collect();
    let mut threads = corpus.threads.clone();
    threads.extend(test.threads.iter().cloned());
    let combined = Corpus::new(corpus.name.clone(), threads);
    let plan = make_folds(
        &combined,
        &FoldScheme::FixedSplit {
            train: train_ids,
            test: test_ids,
        },
    )?;
    Ok((combined, plan))
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let opts = &args.opts;
    let setup = setup(opts, "train")?;
    setup.manifest.write(&opts.outdir)?;

    match opts.scheme.as_str() {
        "fixed" => {
            let mut train_threads: Vec<&ConversationThread> =
                setup.corpus.threads.iter().collect();
            let dev_threads: Option<Vec<&ConversationThread>> = match (&setup.dev, opts.merge_dev)
            {
                (Some(dev), true) => {
                    train_threads.extend(dev.threads.iter());
                    None
                }
                (Some(dev), false) => Some(dev.threads.iter().collect()),
                (None, _) => None,
            };
            let outcome = train(
                &train_threads,
                dev_threads.as_deref(),
                &setup.model,
                &setup.config,
                Some(&opts.outdir),
            )?;
            outcome.log.write_jsonl(&opts.outdir.join("trainlog.jsonl"))?;
            save_checkpoint(
                &outcome.model,
                setup.config.seed,
                outcome.steps,
                &opts.outdir.join("checkpoint.json"),
            )?;
            if let Some(test) = &setup.test {
                let threads: Vec<&ConversationThread> = test.threads.iter().collect();
                let preds = predict_threads(&outcome.model, &threads)?;
                let bundle = PredictionBundle::from_threads(preds);
                let method = method_label(&setup.model, &setup.config);
                write_eval_outputs(
                    &opts.outdir,
                    test,
                    &bundle,
                    &method,
                    mode_label(setup.config.mode),
                    &setup.model,
                    Some(setup.config.effective_lambda()),
                )?;
            }
        }
        "loeo" => {
            let plan = make_folds(&setup.corpus, &FoldScheme::LeaveOneEventOut)?;
            let runs = run_fold_plan(
                &setup.corpus,
                &plan,
                &setup.model,
                &setup.config,
                opts.jobs,
                Some(&opts.outdir.join("checkpoints")),
            )?;
            let mut all = Vec::new();
            let mut fold_rows = String::from("fold,test_threads,veracity_macro_f1,veracity_acc\n");
            for run in &runs {
                run.log.write_jsonl(
                    &opts
                        .outdir
                        .join(format!("trainlog-fold-{}.jsonl", run.fold.name)),
                )?;
                let fold_veracity: Vec<VeracityPrediction> =
                    run.predictions.iter().map(|p| p.veracity.clone()).collect();
                match veracity_scores(&fold_veracity) {
                    Ok(s) => fold_rows.push_str(&format!(
                        "{},{},{:.6},{:.6}\n",
                        run.fold.name,
                        fold_veracity.len(),
                        s.macro_f1,
                        s.accuracy
                    )),
                    Err(_) => fold_rows.push_str(&format!(
                        "{},{},,\n",
                        run.fold.name,
                        fold_veracity.len()
                    )),
                }
                all.extend(run.predictions.iter().cloned());
            }
            std::fs::write(opts.outdir.join("fold_scores.csv"), fold_rows)?;
            let bundle = PredictionBundle::from_threads(all);
            let method = method_label(&setup.model, &setup.config);
            write_eval_outputs(
                &opts.outdir,
                &setup.corpus,
                &bundle,
                &method,
                mode_label(setup.config.mode),
                &setup.model,
                Some(setup.config.effective_lambda()),
            )?;
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown scheme {other:?} (expected fixed or loeo)"
            )))
        }
    }
    println!("run complete: {}", opts.outdir.display());
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    ensure_exists(&args.checkpoint)?;
    std::fs::create_dir_all(&args.outdir)?;
    let (model, seed, _step) = load_checkpoint(&args.checkpoint)?;
    let corpus = load(&args.corpus)?;
    let mut manifest = Manifest::new("evaluate", seed, fingerprint(&args.corpus)?, &args.outdir);
    manifest
        .input_fingerprints
        .insert("checkpoint".into(), fingerprint(&args.checkpoint)?);
    manifest.model_config = Some(model.config.clone());
    manifest.write(&args.outdir)?;

    let threads: Vec<&ConversationThread> = corpus.threads.iter().collect();
    let preds = predict_threads(&model, &threads)?;
    let bundle = PredictionBundle::from_threads(preds);
    let metrics = write_eval_outputs(
        &args.outdir,
        &corpus,
        &bundle,
        "checkpoint",
        "evaluate",
        &model.config,
        None,
    );
    let metrics = metrics?;
    if let Some(v) = &metrics.veracity {
        println!(
            "veracity: macro_f1={:.4} acc={:.4} ({} threads)",
            v.macro_f1, v.accuracy, v.evaluated
        );
    }
    if let Some(s) = &metrics.stance {
        println!(
            "stance: macro_f1={:.4} acc={:.4} ({} tweets)",
            s.macro_f1, s.accuracy, s.evaluated
        );
    }
    println!("run complete: {}", args.outdir.display());
    Ok(())
}

fn parse_lambdas(s: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| CliError::usage(format!("bad lambda list {s:?}: {e}")))?;
    if values.is_empty() {
        return Err(CliError::usage("empty lambda list"));
    }
    if values.iter().any(|&l| l < 0.0) {
        return Err(CliError::usage("lambda values must be >= 0"));
    }
    Ok(values)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let opts = &args.opts;
    let lambdas = parse_lambdas(&args.lambdas)?;
    let setup = setup(opts, "sweep")?;
    setup.manifest.write(&opts.outdir)?;

    let (combined, plan) = match opts.scheme.as_str() {
        "fixed" => {
            let test = setup.test.as_ref().ok_or_else(|| {
                CliError::usage("sweep with --scheme fixed needs --test-corpus")
            })?;
            fixed_plan(&setup.corpus, test)?
        }
        "loeo" => {
            let plan = make_folds(&setup.corpus, &FoldScheme::LeaveOneEventOut)?;
            (setup.corpus.clone(), plan)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown scheme {other:?} (expected fixed or loeo)"
            )))
        }
    };

    // Rows stream into the CSV as each lambda finishes.
    let csv_path = opts.outdir.join("sweep.csv");
    let mut csv = std::fs::File::create(&csv_path)?;
    writeln!(csv, "{SWEEP_CSV_HEADER}")?;
    let curve = lambda_sweep(
        &combined,
        &plan,
        &setup.model,
        &setup.config,
        &lambdas,
        opts.jobs,
        |point| {
            let _ = writeln!(csv, "{}", sweep_csv_row(point));
            let _ = csv.flush();
            println!(
                "lambda={} macro_f1={:.4} f_false={:.4} f_unverified={:.4}",
                point.lambda, point.veracity_macro_f1, point.f_false, point.f_unverified
            );
        },
    )?;
    drop(csv);
    write_sweep_csv(&curve, &csv_path)?;
    std::fs::write(opts.outdir.join("sweep.svg"), sweep_svg(&curve))?;
    let json = serde_json::to_string_pretty(&curve).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(opts.outdir.join("sweep.json"), json)?;
    println!("run complete: {}", opts.outdir.display());
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<(), CliError> {
    let opts = &args.opts;
    // Apply the named variant on top of the resolved options, then run the
    // ordinary training path.
    let mut patched = opts.clone();
    match args.variant.as_str() {
        "no-stance-features" => patched.no_stance_features = true,
        "cnn" => patched.rnn = Some("cnn".into()),
        "no-rnn" => patched.rnn = Some("none".into()),
        "original-gcn" => patched.gcn_variant = Some("original".into()),
        other => {
            return Err(CliError::usage(format!(
                "unknown ablation variant {other:?} (expected no-stance-features, cnn, no-rnn or original-gcn)"
            )))
        }
    }
    cmd_train(&TrainArgs { opts: patched })
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    if args.runs.is_empty() {
        return Err(CliError::usage("no run directories given"));
    }
    std::fs::create_dir_all(&args.outdir)?;
    let mut all = Vec::new();
    for dir in &args.runs {
        let path = dir.join("metrics.json");
        ensure_exists(&path)?;
        let text = std::fs::read_to_string(&path)?;
        let metrics: RunMetrics = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        all.push(metrics);
    }

    let stance_rows: Vec<(String, StanceScores)> = all
        .iter()
        .filter_map(|m| m.stance.clone().map(|s| (m.method.clone(), s)))
        .collect();
    write_stance_results_csv(&stance_rows, true, &args.outdir.join("stance_results.csv"))?;

    let veracity_rows: Vec<(String, String, VeracityScores)> = all
        .iter()
        .filter_map(|m| {
            m.veracity
                .clone()
                .map(|v| (m.method.clone(), m.dataset.clone(), v))
        })
        .collect();
    write_veracity_results_csv(&veracity_rows, true, &args.outdir.join("veracity_results.csv"))?;

    let depth_reports: Vec<(String, DepthBucketReport)> = all
        .iter()
        .filter_map(|m| m.depth.clone().map(|d| (m.method.clone(), d)))
        .collect();
    if !depth_reports.is_empty() {
        std::fs::write(
            args.outdir.join("depth_comparison.svg"),
            converse_core::eval::depth_svg(&depth_reports),
        )?;
    }

    let manifest = Manifest::new("report", 0, String::new(), &args.outdir);
    manifest.write(&args.outdir)?;
    println!(
        "report over {} runs written to {}",
        all.len(),
        args.outdir.display()
    );
    Ok(())
}

