//! Cross-validated evaluation: train on k-1 folds, score the held-out
//! fold, pool predictions, and report correlations per distortion group.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ablate::AblationConfig;
use crate::audio::AudioFeatureMatrix;
use crate::error::{AvqError, Result};
use crate::eval::kfold::kfold_split;
use crate::eval::metrics::{pearson, rmse, spearman};
use crate::media::{AudioDistortion, SequenceRecord, VideoDistortion};
use crate::model::{merge_features, predict_sequence, train_model};
use crate::video::VideoFeatureMatrix;

/// Smallest group size for which correlations are reported.
pub const MIN_GROUP_SIZE: usize = 3;

/// One sequence ready for evaluation: its manifest row and both extracted
/// feature matrices.
#[derive(Debug, Clone)]
pub struct SequenceFeatures {
    pub record: SequenceRecord,
    pub video: VideoFeatureMatrix,
    pub audio: AudioFeatureMatrix,
}

/// Correlations of one pooled prediction group; metrics are absent when the
/// group is too small or a correlation is undefined on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub count: usize,
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
    pub rmse: Option<f64>,
}

/// One held-out prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredPair {
    pub id: String,
    pub predicted: f64,
    pub mos: f64,
}

/// Predictions and overall metrics of a single fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub pairs: Vec<PredPair>,
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
    pub rmse: Option<f64>,
}

/// Full evaluation result of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_id: String,
    /// Keyed by distortion label plus "overall".
    pub per_group: BTreeMap<String, GroupReport>,
    pub per_fold: Vec<FoldReport>,
}

impl EvalReport {
    pub fn overall(&self) -> &GroupReport {
        self.per_group
            .get("overall")
            .expect("reports always carry an overall group")
    }
}

fn group_report(label: &str, config_id: &str, pred: &[f64], mos: &[f64]) -> GroupReport {
    let count = pred.len();
    if count < MIN_GROUP_SIZE {
        log::warn!(
            "config `{}`: group `{}` has only {} sequences, reporting null metrics",
            config_id,
            label,
            count
        );
        return GroupReport {
            count,
            pcc: None,
            scc: None,
            rmse: None,
        };
    }
    let relaxed = |metric: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!(
                "config `{}`: {} undefined on group `{}`: {}",
                config_id,
                metric,
                label,
                e
            );
            None
        }
    };
    GroupReport {
        count,
        pcc: relaxed("pcc", pearson(pred, mos)),
        scc: relaxed("scc", spearman(pred, mos)),
        rmse: relaxed("rmse", rmse(pred, mos)),
    }
}

/// Assembles the grouped report from per-fold predictions. `labels` pairs
/// each sequence id with its distortion labels and MOS.
fn report_from_folds(
    config_id: &str,
    labels: &BTreeMap<String, (AudioDistortion, VideoDistortion)>,
    folds: Vec<Vec<PredPair>>,
) -> EvalReport {
    let per_fold: Vec<FoldReport> = folds
        .into_iter()
        .enumerate()
        .map(|(fold, pairs)| {
            let pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
            let mos: Vec<f64> = pairs.iter().map(|p| p.mos).collect();
            let label = format!("fold {}", fold);
            let report = group_report(&label, config_id, &pred, &mos);
            FoldReport {
                fold,
                pairs,
                pcc: report.pcc,
                scc: report.scc,
                rmse: report.rmse,
            }
        })
        .collect();

    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for fold in &per_fold {
        for pair in &fold.pairs {
            let (audio, video) = &labels[&pair.id];
            let mut push = |key: String| {
                let entry = groups.entry(key).or_default();
                entry.0.push(pair.predicted);
                entry.1.push(pair.mos);
            };
            push("overall".to_string());
            if *audio != AudioDistortion::None {
                push(audio.to_string());
            }
            if *video != VideoDistortion::None {
                push(video.to_string());
            }
        }
    }

    let per_group = groups
        .into_iter()
        .map(|(label, (pred, mos))| {
            let report = group_report(&label, config_id, &pred, &mos);
            (label, report)
        })
        .collect();

    EvalReport {
        config_id: config_id.to_string(),
        per_group,
        per_fold,
    }
}

/// Runs k-fold cross-validation of one configuration. The fold split is
/// seeded by `seed` (so suites sharing a seed share folds); training inside
/// fold f is seeded by the config seed plus f+1.
pub fn evaluate(
    config: &AblationConfig,
    data: &[SequenceFeatures],
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(AvqError::Validation("no sequences to evaluate".into()));
    }

    let merged: Vec<Array2<f64>> = data
        .iter()
        .map(|seq| merge_features(Some(&seq.video), Some(&seq.audio), config.feature_selection))
        .collect::<Result<_>>()?;
    let labels: BTreeMap<String, (AudioDistortion, VideoDistortion)> = data
        .iter()
        .map(|seq| {
            (
                seq.record.id.clone(),
                (seq.record.audio_distortion, seq.record.video_distortion),
            )
        })
        .collect();

    let folds = kfold_split(data.len(), k, seed)?;
    let mut fold_pairs = Vec::with_capacity(folds.len());
    for (f, test_idx) in folds.iter().enumerate() {
        let in_test = |i: &usize| test_idx.contains(i);
        let train_set: Vec<(Array2<f64>, f64)> = (0..data.len())
            .filter(|i| !in_test(i))
            .map(|i| (merged[i].clone(), data[i].record.mos))
            .collect();
        let fold_config = AblationConfig {
            seed: config.seed.wrapping_add(f as u64 + 1),
            ..config.clone()
        };
        let model = train_model(&train_set, &fold_config)?;

        let mut pairs = Vec::with_capacity(test_idx.len());
        for &i in test_idx {
            let (score, _) = predict_sequence(&model, &merged[i])?;
            pairs.push(PredPair {
                id: data[i].record.id.clone(),
                predicted: score,
                mos: data[i].record.mos,
            });
        }
        fold_pairs.push(pairs);
    }

    Ok(report_from_folds(&config.name, &labels, fold_pairs))
}
