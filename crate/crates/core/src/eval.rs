//! Evaluation: scoring predictions, depth-bucketed analysis, lambda sweeps,
//! stance-over-time curves and report/plot emission.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{Stance, Veracity};
use crate::corpus::{Corpus, FoldPlan};
use crate::metrics::{accuracy, macro_f1, per_class_f1, ConfusionMatrix, MetricsError};
use crate::model::{ModelConfig, StancePrediction, ThreadPrediction, VeracityPrediction};
use crate::svg;
use crate::train::{run_fold_plan, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Stance confusion over the gold-labeled predictions, in class order
/// support, deny, query, comment.
pub fn stance_confusion(preds: &[StancePrediction]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(4);
    for p in preds {
        if let Some(gold) = p.gold {
            cm.add(gold.index(), p.pred.index()).expect("stance class");
        }
    }
    cm
}

/// Veracity confusion over gold-labeled predictions (true, false,
/// unverified).
pub fn veracity_confusion(preds: &[VeracityPrediction]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(3);
    for p in preds {
        if let Some(gold) = p.gold {
            cm.add(gold.index(), p.pred.index()).expect("veracity class");
        }
    }
    cm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceScores {
    pub macro_f1: f64,
    pub per_class: [f64; 4],
    pub accuracy: f64,
    pub evaluated: usize,
}

pub fn stance_scores(preds: &[StancePrediction]) -> Result<StanceScores, MetricsError> {
    let cm = stance_confusion(preds);
    let f1 = per_class_f1(&cm)?;
    Ok(StanceScores {
        macro_f1: macro_f1(&cm)?,
        per_class: [f1[0], f1[1], f1[2], f1[3]],
        accuracy: accuracy(&cm)?,
        evaluated: cm.total(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VeracityScores {
    pub macro_f1: f64,
    pub per_class: [f64; 3],
    pub accuracy: f64,
    pub evaluated: usize,
}

pub fn veracity_scores(preds: &[VeracityPrediction]) -> Result<VeracityScores, MetricsError> {
    let cm = veracity_confusion(preds);
    let f1 = per_class_f1(&cm)?;
    Ok(VeracityScores {
        macro_f1: macro_f1(&cm)?,
        per_class: [f1[0], f1[1], f1[2]],
        accuracy: accuracy(&cm)?,
        evaluated: cm.total(),
    })
}

/// Macro-F1 per conversation depth, with depths of 6 and beyond pooled into
/// one `6+` bucket. Buckets with no gold-labeled tweets are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBucketReport {
    pub buckets: Vec<DepthBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBucket {
    pub label: String,
    pub macro_f1: f64,
    pub tweets: usize,
}

pub fn depth_bucket_label(depth: usize) -> String {
    if depth >= 6 {
        "6+".to_string()
    } else {
        depth.to_string()
    }
}

pub fn depth_bucket_eval(preds: &[StancePrediction]) -> DepthBucketReport {
    let mut buckets = Vec::new();
    for b in 0..=6 {
        let label = depth_bucket_label(b);
        let members: Vec<&StancePrediction> = preds
            .iter()
            .filter(|p| p.gold.is_some() && p.depth.min(6) == b)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut cm = ConfusionMatrix::new(4);
        for p in &members {
            cm.add(p.gold.unwrap().index(), p.pred.index())
                .expect("stance class");
        }
        buckets.push(DepthBucket {
            label,
            macro_f1: macro_f1(&cm).expect("non-empty bucket"),
            tweets: members.len(),
        });
    }
    DepthBucketReport { buckets }
}

/// One evaluated lambda setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub veracity_macro_f1: f64,
    pub f_false: f64,
    pub f_unverified: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

/// Train a full fold plan per lambda value and score the concatenated test
/// predictions. `on_point` fires as each lambda finishes so callers can
/// stream rows out.
pub fn lambda_sweep(
    corpus: &Corpus,
    plan: &FoldPlan,
    model_config: &ModelConfig,
    base: &TrainConfig,
    lambdas: &[f64],
    jobs: usize,
    mut on_point: impl FnMut(&SweepPoint),
) -> Result<SweepCurve, TrainError> {
    let mut curve = SweepCurve::default();
    for &lambda in lambdas {
        let config = TrainConfig {
            lambda,
            ..base.clone()
        };
        let runs = run_fold_plan(corpus, plan, model_config, &config, jobs, None)?;
        let veracity: Vec<VeracityPrediction> = runs
            .iter()
            .flat_map(|r| r.predictions.iter().map(|p| p.veracity.clone()))
            .collect();
        let scores = veracity_scores(&veracity).map_err(|e| TrainError::Data(e.to_string()))?;
        let point = SweepPoint {
            lambda,
            veracity_macro_f1: scores.macro_f1,
            f_false: scores.per_class[Veracity::False.index()],
            f_unverified: scores.per_class[Veracity::Unverified.index()],
            accuracy: scores.accuracy,
        };
        on_point(&point);
        curve.points.push(point);
    }
    Ok(curve)
}

/// Stance proportions per time bucket, relative to each thread's source
/// tweet and normalized by the thread's lifespan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceTimeSeries {
    pub n_buckets: usize,
    pub rows: Vec<TimeBucketRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBucketRow {
    pub veracity: Veracity,
    pub bucket: usize,
    pub proportions: [f64; 4],
    pub tweets: usize,
}

pub fn stance_over_time(corpus: &Corpus, n_buckets: usize) -> StanceTimeSeries {
    let n_buckets = n_buckets.max(1);
    // counts[class][bucket][stance]
    let mut counts = vec![vec![[0usize; 4]; n_buckets]; 3];
    for thread in &corpus.threads {
        let veracity = match thread.veracity {
            Some(v) => v,
            None => continue,
        };
        let tree = match thread.tree() {
            Ok(t) => t,
            Err(_) => continue,
        };
        let source_ts = thread.tweets[tree.order[tree.root]].ts;
        let max_ts = thread.tweets.iter().map(|t| t.ts).max().unwrap_or(source_ts);
        let lifespan = (max_ts - source_ts).max(0);
        for tweet in &thread.tweets {
            let stance = match tweet.stance {
                Some(s) => s,
                None => continue,
            };
            let offset = (tweet.ts - source_ts).max(0);
            let bucket = if lifespan == 0 {
                0
            } else {
                ((offset as f64 / lifespan as f64) * n_buckets as f64) as usize
            }
            .min(n_buckets - 1);
            counts[veracity.index()][bucket][stance.index()] += 1;
        }
    }
    let mut rows = Vec::new();
    for v in Veracity::ALL {
        for b in 0..n_buckets {
            let c = counts[v.index()][b];
            let total: usize = c.iter().sum();
            if total == 0 {
                continue;
            }
            let mut proportions = [0.0; 4];
            for (i, &n) in c.iter().enumerate() {
                proportions[i] = n as f64 / total as f64;
            }
            rows.push(TimeBucketRow {
                veracity: v,
                bucket: b,
                proportions,
                tweets: total,
            });
        }
    }
    StanceTimeSeries {
        n_buckets,
        rows,
    }
}

/// Published benchmark numbers kept as fixed reference rows for comparison
/// tables. These are prior reported results, not outputs of this artifact.
#[allow(clippy::approx_constant)] // 0.318 is a reported score, not 1/pi
pub mod published {
    /// Stance classification on the SemEval-2017 task 8 test set:
    /// (method, macro-F1, F_support, F_deny, F_query, F_comment, accuracy).
    pub const STANCE_SEMEVAL: &[(&str, f64, f64, f64, f64, f64, f64)] = &[
        ("affective-svm (published)", 0.470, 0.410, 0.000, 0.580, 0.880, 0.795),
        ("branch-lstm (published)", 0.434, 0.403, 0.000, 0.462, 0.873, 0.784),
        ("conversational-gcn (published)", 0.499, 0.311, 0.194, 0.646, 0.847, 0.751),
    ];

    /// Veracity prediction: (method, dataset, macro-F1, accuracy).
    pub const VERACITY: &[(&str, &str, f64, f64)] = &[
        ("td-rvnn (published)", "semeval", 0.509, 0.536),
        ("td-rvnn (published)", "pheme", 0.264, 0.341),
        ("hierarchical-gcn-rnn (published)", "semeval", 0.540, 0.536),
        ("hierarchical-gcn-rnn (published)", "pheme", 0.317, 0.356),
        ("branch-lstm+niletmrg (published)", "semeval", 0.539, 0.570),
        ("branch-lstm+niletmrg (published)", "pheme", 0.297, 0.360),
        ("mtl2 (published)", "semeval", 0.558, 0.571),
        ("mtl2 (published)", "pheme", 0.318, 0.357),
        ("hierarchical-psv (published)", "semeval", 0.588, 0.643),
        ("hierarchical-psv (published)", "pheme", 0.333, 0.361),
    ];

    /// Stance macro-F1 per depth bucket on SemEval:
    /// (depth label, branch-lstm, one-hop convolution, two-hop convolution).
    pub const DEPTH_MACRO_F1: &[(&str, f64, f64, f64)] = &[
        ("0", 0.481, 0.481, 0.381),
        ("1", 0.348, 0.363, 0.468),
        ("2", 0.233, 0.297, 0.467),
        ("3", 0.232, 0.300, 0.480),
        ("4", 0.481, 0.548, 0.672),
        ("5", 0.321, 0.292, 0.321),
        ("6+", 0.223, 0.337, 0.438),
    ];
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, EvalError> {
    Ok(csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_path(path)?)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_stance_predictions_csv(
    preds: &[StancePrediction],
    path: &Path,
) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "thread_id",
        "tweet_id",
        "depth",
        "gold",
        "pred",
        "p_support",
        "p_deny",
        "p_query",
        "p_comment",
    ])?;
    for p in preds {
        w.write_record([
            p.thread_id.as_str(),
            p.tweet_id.as_str(),
            &p.depth.to_string(),
            p.gold.map(Stance::as_str).unwrap_or(""),
            p.pred.as_str(),
            &f6(p.probs[0]),
            &f6(p.probs[1]),
            &f6(p.probs[2]),
            &f6(p.probs[3]),
        ])?;
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

pub fn write_veracity_predictions_csv(
    preds: &[VeracityPrediction],
    path: &Path,
) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["thread_id", "gold", "pred", "p_true", "p_false", "p_unverified"])?;
    for p in preds {
        w.write_record([
            p.thread_id.as_str(),
            p.gold.map(Veracity::as_str).unwrap_or(""),
            p.pred.as_str(),
            &f6(p.probs[0]),
            &f6(p.probs[1]),
            &f6(p.probs[2]),
        ])?;
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

pub fn write_attribution_csv(preds: &[ThreadPrediction], path: &Path) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["thread_id", "tweet_id", "dims_won"])?;
    for t in preds {
        for (tweet_id, dims) in &t.attribution {
            w.write_record([t.thread_id.as_str(), tweet_id.as_str(), &dims.to_string()])?;
        }
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

/// Stance comparison table (`method,macro_f1,f_s,f_d,f_q,f_c,acc`), with
/// published reference rows appended when requested.
pub fn write_stance_results_csv(
    rows: &[(String, StanceScores)],
    include_published: bool,
    path: &Path,
) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["method", "macro_f1", "f_s", "f_d", "f_q", "f_c", "acc"])?;
    for (method, s) in rows {
        w.write_record([
            method.as_str(),
            &f6(s.macro_f1),
            &f6(s.per_class[0]),
            &f6(s.per_class[1]),
            &f6(s.per_class[2]),
            &f6(s.per_class[3]),
            &f6(s.accuracy),
        ])?;
    }
    if include_published {
        for &(method, m, fs, fd, fq, fc, acc) in published::STANCE_SEMEVAL {
            w.write_record([
                method,
                &f6(m),
                &f6(fs),
                &f6(fd),
                &f6(fq),
                &f6(fc),
                &f6(acc),
            ])?;
        }
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

/// Veracity comparison table (`method,dataset,macro_f1,acc`).
pub fn write_veracity_results_csv(
    rows: &[(String, String, VeracityScores)],
    include_published: bool,
    path: &Path,
) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["method", "dataset", "macro_f1", "acc"])?;
    for (method, dataset, s) in rows {
        w.write_record([
            method.as_str(),
            dataset.as_str(),
            &f6(s.macro_f1),
            &f6(s.accuracy),
        ])?;
    }
    if include_published {
        for &(method, dataset, m, acc) in published::VERACITY {
            w.write_record([method, dataset, &f6(m), &f6(acc)])?;
        }
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

pub fn write_depth_csv(report: &DepthBucketReport, path: &Path) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["depth", "macro_f1", "tweets"])?;
    for b in &report.buckets {
        w.write_record([b.label.as_str(), &f6(b.macro_f1), &b.tweets.to_string()])?;
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

pub const SWEEP_CSV_HEADER: &str = "lambda,veracity_macro_f1,f_false,f_unverified,acc";

pub fn sweep_csv_row(p: &SweepPoint) -> String {
    format!(
        "{},{},{},{},{}",
        p.lambda,
        f6(p.veracity_macro_f1),
        f6(p.f_false),
        f6(p.f_unverified),
        f6(p.accuracy)
    )
}

pub fn write_sweep_csv(curve: &SweepCurve, path: &Path) -> Result<(), EvalError> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{SWEEP_CSV_HEADER}")?;
    for p in &curve.points {
        writeln!(file, "{}", sweep_csv_row(p))?;
    }
    Ok(())
}

pub fn write_time_series_csv(series: &StanceTimeSeries, path: &Path) -> Result<(), EvalError> {
    let mut w = csv_writer(path)?;
    w.write_record(["veracity", "bucket", "support", "deny", "query", "comment", "tweets"])?;
    for row in &series.rows {
        w.write_record([
            row.veracity.as_str(),
            &row.bucket.to_string(),
            &f6(row.proportions[0]),
            &f6(row.proportions[1]),
            &f6(row.proportions[2]),
            &f6(row.proportions[3]),
            &row.tweets.to_string(),
        ])?;
    }
    w.flush().map_err(EvalError::Io)?;
    Ok(())
}

pub fn sweep_svg(curve: &SweepCurve) -> String {
    let series = vec![
        svg::Series {
            name: "macro-F1".into(),
            points: curve
                .points
                .iter()
                .map(|p| (p.lambda, p.veracity_macro_f1))
                .collect(),
        },
        svg::Series {
            name: "F_false".into(),
            points: curve.points.iter().map(|p| (p.lambda, p.f_false)).collect(),
        },
        svg::Series {
            name: "F_unverified".into(),
            points: curve
                .points
                .iter()
                .map(|p| (p.lambda, p.f_unverified))
                .collect(),
        },
    ];
    svg::line_chart("veracity vs lambda", "lambda", "score", &series)
}

pub fn depth_svg(reports: &[(String, DepthBucketReport)]) -> String {
    let mut labels: Vec<String> = Vec::new();
    for (_, r) in reports {
        for b in &r.buckets {
            if !labels.contains(&b.label) {
                labels.push(b.label.clone());
            }
        }
    }
    let names: Vec<String> = reports.iter().map(|(n, _)| n.clone()).collect();
    let values: Vec<Vec<f64>> = reports
        .iter()
        .map(|(_, r)| {
            labels
                .iter()
                .map(|l| {
                    r.buckets
                        .iter()
                        .find(|b| &b.label == l)
                        .map(|b| b.macro_f1)
                        .unwrap_or(0.0)
                })
                .collect()
        })
        .collect();
    svg::grouped_bar_chart("stance macro-F1 by depth", &labels, &names, &values)
}

pub fn time_series_svg(series: &StanceTimeSeries) -> Vec<(Veracity, String)> {
    Veracity::ALL
        .iter()
        .map(|&v| {
            let lines: Vec<svg::Series> = Stance::ALL
                .iter()
                .map(|&s| svg::Series {
                    name: s.as_str().to_string(),
                    points: series
                        .rows
                        .iter()
                        .filter(|r| r.veracity == v)
                        .map(|r| (r.bucket as f64, r.proportions[s.index()]))
                        .collect(),
                })
                .collect();
            (
                v,
                svg::line_chart(
                    &format!("stance share over time ({v} rumors)"),
                    "time bucket",
                    "proportion",
                    &lines,
                ),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(
        thread: &str,
        tweet: &str,
        depth: usize,
        gold: Option<Stance>,
        pred: Stance,
    ) -> StancePrediction {
        StancePrediction {
            thread_id: thread.into(),
            tweet_id: tweet.into(),
            depth,
            gold,
            pred,
            probs: [0.25; 4],
        }
    }

    fn vp(thread: &str, gold: Veracity, pred: Veracity) -> VeracityPrediction {
        VeracityPrediction {
            thread_id: thread.into(),
            gold: Some(gold),
            pred,
            probs: [1.0 / 3.0; 3],
        }
    }

    #[test]
    fn depth_buckets_partition_and_match_naive_grouping() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let preds: Vec<StancePrediction> = (0..200)
            .map(|i| {
                sp(
                    "t",
                    &format!("tw{i}"),
                    rng.random_range(0..10),
                    Some(Stance::ALL[rng.random_range(0..4)]),
                    Stance::ALL[rng.random_range(0..4)],
                )
            })
            .collect();
        let report = depth_bucket_eval(&preds);
        let total: usize = report.buckets.iter().map(|b| b.tweets).sum();
        assert_eq!(total, preds.len());

        // Naive per-tweet loop oracle.
        for bucket in &report.buckets {
            let members: Vec<&StancePrediction> = preds
                .iter()
                .filter(|p| depth_bucket_label(p.depth.min(6)) == bucket.label)
                .collect();
            assert_eq!(members.len(), bucket.tweets);
            let mut cm = ConfusionMatrix::new(4);
            for m in &members {
                cm.add(m.gold.unwrap().index(), m.pred.index()).unwrap();
            }
            assert_eq!(macro_f1(&cm).unwrap(), bucket.macro_f1);
        }
    }

    #[test]
    fn single_bucket_when_all_at_depth_zero() {
        let preds = vec![
            sp("t", "a", 0, Some(Stance::Support), Stance::Support),
            sp("t", "b", 0, Some(Stance::Deny), Stance::Deny),
        ];
        let report = depth_bucket_eval(&preds);
        assert_eq!(report.buckets.len(), 1);
        assert_eq!(report.buckets[0].label, "0");
        assert_eq!(report.buckets[0].macro_f1, 0.5); // two perfect classes of four
    }

    #[test]
    fn concatenated_folds_differ_from_mean_of_folds() {
        // Fold A: one true thread predicted correctly.
        // Fold B: skewed errors. Macro-F1 of the union differs from the
        // mean of per-fold macro-F1 scores.
        let fold_a = vec![vp("a1", Veracity::True, Veracity::True)];
        let fold_b = vec![
            vp("b1", Veracity::False, Veracity::True),
            vp("b2", Veracity::True, Veracity::True),
            vp("b3", Veracity::Unverified, Veracity::Unverified),
        ];
        let union: Vec<VeracityPrediction> =
            fold_a.iter().chain(fold_b.iter()).cloned().collect();
        let union_f1 = veracity_scores(&union).unwrap().macro_f1;
        let mean_f1 = (veracity_scores(&fold_a).unwrap().macro_f1
            + veracity_scores(&fold_b).unwrap().macro_f1)
            / 2.0;
        assert!((union_f1 - mean_f1).abs() > 1e-3);

        // The integration rule is: score the union once.
        let cm = veracity_confusion(&union);
        assert_eq!(macro_f1(&cm).unwrap(), union_f1);
    }

    #[test]
    fn stance_over_time_proportions() {
        use crate::conversation::{ConversationThread, Tweet};
        let thread = ConversationThread {
            thread_id: "t".into(),
            event: "e".into(),
            veracity: Some(Veracity::False),
            tweets: vec![
                Tweet {
                    id: "a".into(),
                    parent_id: None,
                    ts: 0,
                    text: String::new(),
                    stance: Some(Stance::Support),
                },
                Tweet {
                    id: "b".into(),
                    parent_id: Some("a".into()),
                    ts: 10,
                    text: String::new(),
                    stance: Some(Stance::Support),
                },
                Tweet {
                    id: "c".into(),
                    parent_id: Some("a".into()),
                    ts: 20,
                    text: String::new(),
                    stance: Some(Stance::Deny),
                },
                Tweet {
                    id: "d".into(),
                    parent_id: Some("a".into()),
                    ts: 30,
                    text: String::new(),
                    stance: Some(Stance::Comment),
                },
            ],
        };
        let corpus = Corpus::new("c", vec![thread]);
        let series = stance_over_time(&corpus, 1);
        assert_eq!(series.rows.len(), 1);
        assert_eq!(series.rows[0].proportions, [0.5, 0.25, 0.0, 0.25]);

        // With more buckets than distinct timestamps, empty buckets are
        // simply not reported.
        let fine = stance_over_time(&corpus, 8);
        assert!(fine.rows.iter().all(|r| r.tweets > 0));
        let t: usize = fine.rows.iter().map(|r| r.tweets).sum();
        assert_eq!(t, 4);
    }

    #[test]
    fn empty_results_emit_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stance.csv");
        write_stance_results_csv(&[], false, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.trim(), "method,macro_f1,f_s,f_d,f_q,f_c,acc");
    }

    #[test]
    fn prediction_csv_quotes_embedded_commas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let preds = vec![sp("th,read", "tw\"eet", 1, Some(Stance::Query), Stance::Query)];
        write_stance_predictions_csv(&preds, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.contains("\"th,read\""));
        assert!(content.contains("\"tw\"\"eet\""));
    }

    #[test]
    fn sweep_csv_round_trip_shape() {
        let curve = SweepCurve {
            points: vec![SweepPoint {
                lambda: 0.5,
                veracity_macro_f1: 0.8,
                f_false: 0.7,
                f_unverified: 0.6,
                accuracy: 0.9,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&curve, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let mut lines = content.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "0.5,0.800000,0.700000,0.600000,0.900000");
    }
}
