//! The deployable quality model: feature merging and scaling, the encoder
//! chain, and a quality head, trained end to end from one configuration.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::ablate::{AblationConfig, HeadKind};
use crate::audio::{AudioFeatureMatrix, NUM_BANDS};
use crate::error::{AvqError, Result};
use crate::heads::{
    mos_to_class, one_hot, predict_head, train_softmax, train_svr, QualityHead, SoftmaxHead,
    SoftmaxTrainConfig, SvrParams,
};
use crate::model::io::MODEL_FORMAT_VERSION;
use crate::model::scaler::{FeatureScaler, ScalerMode};
use crate::nn::{greedy_stack, Adam, EncoderChain, TrainingHyperparams};
use crate::video::{VideoFeatureMatrix, VIDEO_DIM};

/// Upper bound on joint refinement passes after greedy stacking.
pub const FINE_TUNE_MAX_EPOCHS: usize = 100;

/// Which feature rows feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelection {
    /// Video stacked above audio.
    #[default]
    Av,
    VideoOnly,
    AudioOnly,
}

impl FeatureSelection {
    pub fn input_dim(self) -> usize {
        match self {
            FeatureSelection::Av => VIDEO_DIM + NUM_BANDS,
            FeatureSelection::VideoOnly => VIDEO_DIM,
            FeatureSelection::AudioOnly => NUM_BANDS,
        }
    }
}

impl fmt::Display for FeatureSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSelection::Av => "av",
            FeatureSelection::VideoOnly => "video_only",
            FeatureSelection::AudioOnly => "audio_only",
        })
    }
}

impl FromStr for FeatureSelection {
    type Err = AvqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "av" => Ok(FeatureSelection::Av),
            "video_only" => Ok(FeatureSelection::VideoOnly),
            "audio_only" => Ok(FeatureSelection::AudioOnly),
            other => Err(AvqError::Config(format!(
                "unknown feature selection `{}`",
                other
            ))),
        }
    }
}

/// How per-frame scores collapse into one sequence score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// Row-concatenates the selected modalities: video (90) above audio (25)
/// for `av`, otherwise the single modality's matrix.
pub fn merge_features(
    video: Option<&VideoFeatureMatrix>,
    audio: Option<&AudioFeatureMatrix>,
    selection: FeatureSelection,
) -> Result<Array2<f64>> {
    let want_video = selection != FeatureSelection::AudioOnly;
    let want_audio = selection != FeatureSelection::VideoOnly;

    let v = if want_video {
        let v = video.ok_or_else(|| {
            AvqError::Validation(format!("selection `{}` needs video features", selection))
        })?;
        if v.data.nrows() != VIDEO_DIM {
            return Err(AvqError::dimension("video feature rows", VIDEO_DIM, v.data.nrows()));
        }
        Some(&v.data)
    } else {
        None
    };
    let a = if want_audio {
        let a = audio.ok_or_else(|| {
            AvqError::Validation(format!("selection `{}` needs audio features", selection))
        })?;
        if a.data.nrows() != NUM_BANDS {
            return Err(AvqError::dimension("audio feature rows", NUM_BANDS, a.data.nrows()));
        }
        Some(&a.data)
    } else {
        None
    };

    match (v, a) {
        (Some(v), Some(a)) => {
            if v.ncols() != a.ncols() {
                return Err(AvqError::dimension(
                    "audio columns vs video columns",
                    v.ncols(),
                    a.ncols(),
                ));
            }
            let mut merged = Array2::zeros((VIDEO_DIM + NUM_BANDS, v.ncols()));
            merged.slice_mut(s![..VIDEO_DIM, ..]).assign(v);
            merged.slice_mut(s![VIDEO_DIM.., ..]).assign(a);
            Ok(merged)
        }
        (Some(v), None) => Ok(v.clone()),
        (None, Some(a)) => Ok(a.clone()),
        (None, None) => unreachable!("every selection wants at least one modality"),
    }
}

/// Merges the selected modalities and scales rows: a provided scaler is
/// applied, otherwise a min-max scaler is fitted on the merged data and
/// returned with it.
pub fn merge_and_scale(
    video: Option<&VideoFeatureMatrix>,
    audio: Option<&AudioFeatureMatrix>,
    selection: FeatureSelection,
    scaler: Option<&FeatureScaler>,
) -> Result<(Array2<f64>, FeatureScaler)> {
    let merged = merge_features(video, audio, selection)?;
    match scaler {
        Some(s) => Ok((s.apply(&merged)?, s.clone())),
        None => {
            let fitted = FeatureScaler::fit(ScalerMode::Minmax01, &merged)?;
            let scaled = fitted.apply(&merged)?;
            Ok((scaled, fitted))
        }
    }
}

/// A trained quality metric: scaler, encoder chain, and head.
#[derive(Debug, Clone)]
pub struct StackedQualityModel {
    pub scaler: FeatureScaler,
    pub chain: EncoderChain,
    pub head: QualityHead,
    pub selection: FeatureSelection,
    pub aggregation: Aggregation,
    pub format_version: u32,
}

impl StackedQualityModel {
    pub fn input_dim(&self) -> usize {
        self.chain.input_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.selection.input_dim();
        if self.scaler.rows() != d {
            return Err(AvqError::dimension("model scaler rows", d, self.scaler.rows()));
        }
        if self.chain.input_dim() != d {
            return Err(AvqError::dimension("model chain input", d, self.chain.input_dim()));
        }
        if self.head.input_dim() != self.chain.output_dim() {
            return Err(AvqError::dimension(
                "model head input",
                self.chain.output_dim(),
                self.head.input_dim(),
            ));
        }
        Ok(())
    }
}

/// Trains a model from per-sequence feature matrices and their MOS values.
/// Every frame column inherits its sequence MOS as target; the scaler is
/// fitted on the pooled training columns only.
pub fn train_model(
    train_set: &[(Array2<f64>, f64)],
    config: &AblationConfig,
) -> Result<StackedQualityModel> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(AvqError::Validation("empty training set".into()));
    }
    let d = config.feature_selection.input_dim();
    let mut total = 0;
    for (i, (features, mos)) in train_set.iter().enumerate() {
        if features.nrows() != d {
            return Err(AvqError::dimension(
                format!("training sequence {} rows", i),
                d,
                features.nrows(),
            ));
        }
        if features.ncols() == 0 {
            return Err(AvqError::Validation(format!(
                "training sequence {} has no frames",
                i
            )));
        }
        if !mos.is_finite() || !(1.0..=5.0).contains(mos) {
            return Err(AvqError::Validation(format!(
                "training sequence {} has MOS {} outside [1, 5]",
                i, mos
            )));
        }
        total += features.ncols();
    }

    let mut pooled = Array2::zeros((d, total));
    let mut targets = Vec::with_capacity(total);
    let mut offset = 0;
    for (features, mos) in train_set {
        let m = features.ncols();
        pooled.slice_mut(s![.., offset..offset + m]).assign(features);
        targets.extend(std::iter::repeat(*mos).take(m));
        offset += m;
    }

    let scaler = FeatureScaler::fit(ScalerMode::Minmax01, &pooled)?;
    let scaled = scaler.apply(&pooled)?;

    let hyper = TrainingHyperparams {
        seed: config.seed,
        ..config.training.clone()
    };
    let mut chain = greedy_stack(&scaled, &config.dims, &hyper)?;
    let codes = chain.encode(&scaled)?;
    let head_seed = config.seed.wrapping_add(config.dims.len() as u64);

    let head = match config.head {
        HeadKind::Softmax => {
            let q = config.head_params.num_classes;
            let classes = targets
                .iter()
                .map(|mos| mos_to_class(*mos, q))
                .collect::<Result<Vec<usize>>>()?;
            let onehot = one_hot(&classes, q)?;
            let softmax_cfg = SoftmaxTrainConfig {
                l2_weight: config.head_params.l2_weight,
                learning_rate: hyper.learning_rate,
                max_epochs: hyper.max_epochs,
                tolerance: hyper.tolerance,
                seed: head_seed,
                score_mode: config.head_params.score_mode,
            };
            let mut head = train_softmax(&codes, &onehot, &softmax_cfg)?;
            if config.fine_tune {
                fine_tune(
                    &mut chain,
                    &mut head,
                    &scaled,
                    &onehot,
                    hyper.learning_rate,
                    hyper.tolerance,
                )?;
            }
            QualityHead::Softmax(head)
        }
        HeadKind::Svr => {
            if config.fine_tune {
                log::warn!(
                    "config `{}`: fine-tuning applies to softmax heads only, skipping",
                    config.name
                );
            }
            let mut params = SvrParams {
                c: config.head_params.svr_c,
                epsilon: config.head_params.svr_epsilon,
                gamma: config.head_params.svr_gamma,
                ..SvrParams::default()
            };
            if let Some(cap) = config.head_params.svr_max_pair_updates {
                params.max_pair_updates = cap;
            }
            QualityHead::Svr(train_svr(&codes, &targets, &params)?)
        }
    };

    let model = StackedQualityModel {
        scaler,
        chain,
        head,
        selection: config.feature_selection,
        aggregation: config.aggregation,
        format_version: MODEL_FORMAT_VERSION,
    };
    model.validate()?;
    Ok(model)
}

/// Scores one sequence: per-frame scores from the head plus their aggregate.
pub fn predict_sequence(
    model: &StackedQualityModel,
    features: &Array2<f64>,
) -> Result<(f64, Vec<f64>)> {
    if features.nrows() != model.input_dim() {
        return Err(AvqError::dimension(
            "prediction input rows",
            model.input_dim(),
            features.nrows(),
        ));
    }
    if features.ncols() == 0 {
        return Err(AvqError::Validation("prediction needs at least one frame".into()));
    }
    let scaled = model.scaler.apply(features)?;
    let codes = model.chain.encode(&scaled)?;
    let per_frame = predict_head(&model.head, &codes)?;
    Ok((aggregate(model.aggregation, &per_frame), per_frame))
}

fn aggregate(mode: Aggregation, scores: &[f64]) -> f64 {
    match mode {
        Aggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        Aggregation::Median => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                0.5 * (sorted[mid - 1] + sorted[mid])
            }
        }
    }
}

fn joint_flatten(chain: &EncoderChain, head: &SoftmaxHead) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in &chain.layers {
        flat.extend(layer.w_enc.iter());
        flat.extend(layer.b_enc.iter());
    }
    flat.extend(head.w.iter());
    flat.extend(head.b.iter());
    flat
}

fn joint_unflatten(chain: &mut EncoderChain, head: &mut SoftmaxHead, flat: &[f64]) {
    let mut at = 0;
    let mut take = |len: usize| {
        let slice = &flat[at..at + len];
        at += len;
        slice
    };
    for layer in &mut chain.layers {
        let (w_len, b_len) = (layer.w_enc.len(), layer.b_enc.len());
        for (dst, src) in layer.w_enc.iter_mut().zip(take(w_len).iter()) {
            *dst = *src;
        }
        for (dst, src) in layer.b_enc.iter_mut().zip(take(b_len).iter()) {
            *dst = *src;
        }
    }
    let (w_len, b_len) = (head.w.len(), head.b.len());
    for (dst, src) in head.w.iter_mut().zip(take(w_len).iter()) {
        *dst = *src;
    }
    for (dst, src) in head.b.iter_mut().zip(take(b_len).iter()) {
        *dst = *src;
    }
    debug_assert_eq!(at, flat.len());
}

/// Mean cross-entropy of the chain+softmax composition and its gradient
/// with respect to every encoder weight/bias and the head parameters,
/// in `joint_flatten` order.
fn joint_loss_grad(
    chain: &EncoderChain,
    head: &SoftmaxHead,
    x: &Array2<f64>,
    targets: &Array2<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = x.ncols() as f64;
    let mut activations = vec![x.clone()];
    for layer in &chain.layers {
        let next = layer.encode(activations.last().unwrap())?;
        activations.push(next);
    }
    let codes = activations.last().unwrap();

    let mut logits = head.w.dot(codes);
    logits += &head.b.view().insert_axis(Axis(1));

    let mut loss = 0.0;
    let mut probs = logits.clone();
    for (j, mut col) in probs.axis_iter_mut(Axis(1)).enumerate() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + col.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for (z, t) in col.iter_mut().zip(targets.column(j).iter()) {
            loss += t * (lse - *z);
            *z = (*z - lse).exp();
        }
    }
    loss /= n;

    let d_logits = (&probs - targets) / n;
    let g_head_w = d_logits.dot(&codes.t());
    let g_head_b = d_logits.sum_axis(Axis(1));

    let mut layer_grads = Vec::with_capacity(chain.layers.len());
    let mut delta = head.w.t().dot(&d_logits) * codes * &(1.0 - codes);
    for (l, layer) in chain.layers.iter().enumerate().rev() {
        let below = &activations[l];
        let g_w = delta.dot(&below.t());
        let g_b = delta.sum_axis(Axis(1));
        if l > 0 {
            delta = layer.w_enc.t().dot(&delta) * below * &(1.0 - below);
        }
        layer_grads.push((g_w, g_b));
    }
    layer_grads.reverse();

    let mut grad = Vec::new();
    for (g_w, g_b) in &layer_grads {
        grad.extend(g_w.iter());
        grad.extend(g_b.iter());
    }
    grad.extend(g_head_w.iter());
    grad.extend(g_head_b.iter());
    Ok((loss, grad))
}

/// Joint refinement of the encoder chain and softmax head by cross-entropy,
/// capped at 100 epochs. Returns the final objective value.
fn fine_tune(
    chain: &mut EncoderChain,
    head: &mut SoftmaxHead,
    x: &Array2<f64>,
    targets: &Array2<f64>,
    learning_rate: f64,
    tolerance: f64,
) -> Result<f64> {
    let mut params = joint_flatten(chain, head);
    let mut opt = Adam::new(params.len(), learning_rate);
    let mut prev = f64::INFINITY;
    let mut last = prev;
    for epoch in 0..FINE_TUNE_MAX_EPOCHS {
        let (loss, grad) = joint_loss_grad(chain, head, x, targets)?;
        if !loss.is_finite() {
            return Err(AvqError::Training {
                epoch,
                message: "fine-tune objective became non-finite".into(),
            });
        }
        last = loss;
        if (prev - loss).abs() < tolerance * loss {
            break;
        }
        prev = loss;
        opt.step(&mut params, &grad);
        joint_unflatten(chain, head, &params);
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablate::HeadParams;
    use crate::heads::ScoreMode;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn video_matrix(cols: usize, seed: u64) -> VideoFeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VideoFeatureMatrix {
            data: Array2::from_shape_simple_fn((VIDEO_DIM, cols), || rng.random::<f64>() * 3.0),
            feature_names: crate::video::video_feature_names(),
        }
    }

    fn audio_matrix(cols: usize, seed: u64) -> AudioFeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioFeatureMatrix {
            data: Array2::from_shape_simple_fn((NUM_BANDS, cols), || {
                rng.random::<f64>() * 40.0 - 60.0
            }),
            band_centers_hz: (0..NUM_BANDS).map(|i| 50.0 + 100.0 * i as f64).collect(),
        }
    }

    fn quick_config(name: &str, selection: FeatureSelection, dims: &[usize]) -> AblationConfig {
        let mut config = AblationConfig::preset(name, selection, dims, HeadKind::Softmax);
        config.training.max_epochs = 15;
        config
    }

    fn synthetic_train_set(
        selection: FeatureSelection,
        sequences: usize,
        frames: usize,
    ) -> Vec<(Array2<f64>, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let d = selection.input_dim();
        (0..sequences)
            .map(|_| {
                let mos = 1.0 + rng.random::<f64>() * 4.0;
                let features =
                    Array2::from_shape_simple_fn((d, frames), || rng.random::<f64>() + mos);
                (features, mos)
            })
            .collect()
    }

    #[test]
    fn av_merge_stacks_video_above_audio() {
        let v = video_matrix(6, 1);
        let a = audio_matrix(6, 2);
        let merged = merge_features(Some(&v), Some(&a), FeatureSelection::Av).unwrap();
        assert_eq!(merged.dim(), (115, 6));
        assert_eq!(merged[(0, 3)], v.data[(0, 3)]);
        assert_eq!(merged[(VIDEO_DIM - 1, 5)], v.data[(VIDEO_DIM - 1, 5)]);
        assert_eq!(merged[(VIDEO_DIM, 2)], a.data[(0, 2)]);
        assert_eq!(merged[(114, 0)], a.data[(NUM_BANDS - 1, 0)]);
    }

    #[test]
    fn single_modality_merges_ignore_the_other() {
        let v = video_matrix(4, 3);
        let a = audio_matrix(9, 4);
        let video_only = merge_features(Some(&v), Some(&a), FeatureSelection::VideoOnly).unwrap();
        assert_eq!(video_only.dim(), (90, 4));
        let audio_only = merge_features(None, Some(&a), FeatureSelection::AudioOnly).unwrap();
        assert_eq!(audio_only.dim(), (25, 9));
    }

    #[test]
    fn merge_rejects_mismatch_and_missing_modality() {
        let v = video_matrix(4, 5);
        let a = audio_matrix(5, 6);
        assert!(matches!(
            merge_features(Some(&v), Some(&a), FeatureSelection::Av),
            Err(AvqError::Dimension { .. })
        ));
        assert!(matches!(
            merge_features(Some(&v), None, FeatureSelection::Av),
            Err(AvqError::Validation(_))
        ));
        assert!(matches!(
            merge_features(None, Some(&a), FeatureSelection::VideoOnly),
            Err(AvqError::Validation(_))
        ));
    }

    #[test]
    fn merge_and_scale_fits_rows_to_unit_interval() {
        let v = video_matrix(8, 7);
        let a = audio_matrix(8, 8);
        let (scaled, scaler) = merge_and_scale(Some(&v), Some(&a), FeatureSelection::Av, None).unwrap();
        assert_eq!(scaled.dim(), (115, 8));
        assert_eq!(scaler.rows(), 115);
        for row in scaled.rows() {
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(min, 0.0);
            assert_eq!(max, 1.0);
        }

        let (rescaled, reused) =
            merge_and_scale(Some(&v), Some(&a), FeatureSelection::Av, Some(&scaler)).unwrap();
        assert_eq!(reused, scaler);
        assert_eq!(rescaled, scaled);

        let wrong = FeatureScaler::fit(ScalerMode::Minmax01, &Array2::zeros((3, 2))).unwrap();
        assert!(merge_and_scale(Some(&v), Some(&a), FeatureSelection::Av, Some(&wrong)).is_err());
    }

    #[test]
    fn trained_model_follows_the_configured_chain() {
        let train = synthetic_train_set(FeatureSelection::Av, 6, 4);
        let config = quick_config("chain", FeatureSelection::Av, &[12, 5]);
        let model = train_model(&train, &config).unwrap();
        assert_eq!(model.chain.dims(), vec![115, 12, 5]);
        assert_eq!(model.head.input_dim(), 5);
        model.validate().unwrap();

        let (score, per_frame) = predict_sequence(&model, &train[0].0).unwrap();
        assert_eq!(per_frame.len(), 4);
        assert!((1.0..=5.0).contains(&score));
        assert!(per_frame.iter().all(|s| (1.0..=5.0).contains(s)));
    }

    #[test]
    fn empty_dims_feed_features_straight_to_the_head() {
        let train = synthetic_train_set(FeatureSelection::Av, 5, 3);
        let config = quick_config("identity", FeatureSelection::Av, &[]);
        let model = train_model(&train, &config).unwrap();
        assert_eq!(model.chain.dims(), vec![115]);
        assert_eq!(model.head.input_dim(), 115);
    }

    #[test]
    fn audio_only_chain_runs_25_18_10() {
        let train = synthetic_train_set(FeatureSelection::AudioOnly, 5, 3);
        let mut config = quick_config("af", FeatureSelection::AudioOnly, &[18, 10]);
        config.training.max_epochs = 8;
        let model = train_model(&train, &config).unwrap();
        assert_eq!(model.chain.dims(), vec![25, 18, 10]);
    }

    #[test]
    fn sequence_score_aggregates_per_frame_scores() {
        let train = synthetic_train_set(FeatureSelection::AudioOnly, 5, 3);
        let config = quick_config("agg", FeatureSelection::AudioOnly, &[6]);
        let model = train_model(&train, &config).unwrap();

        let column = train[1].0.column(0).insert_axis(Axis(1)).to_owned();
        let (single, per_frame) = predict_sequence(&model, &column).unwrap();
        assert_eq!(per_frame.len(), 1);
        assert_eq!(single, per_frame[0]);

        let repeated = ndarray::concatenate(
            Axis(1),
            &[column.view(), column.view(), column.view()],
        )
        .unwrap();
        let (score, frames) = predict_sequence(&model, &repeated).unwrap();
        assert_eq!(frames.len(), 3);
        assert!((score - single).abs() < 1e-12);

        let mixed = &train[2].0;
        let (base_score, _) = predict_sequence(&model, mixed).unwrap();
        let mut permuted = mixed.clone();
        let first = permuted.column(0).to_owned();
        let third = permuted.column(2).to_owned();
        permuted.column_mut(0).assign(&third);
        permuted.column_mut(2).assign(&first);
        let (perm_score, _) = predict_sequence(&model, &permuted).unwrap();
        assert!((base_score - perm_score).abs() < 1e-12);
    }

    #[test]
    fn median_aggregation_takes_the_middle_frame() {
        assert_eq!(aggregate(Aggregation::Median, &[5.0, 1.0, 2.0]), 2.0);
        assert_eq!(aggregate(Aggregation::Median, &[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(aggregate(Aggregation::Mean, &[1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn prediction_rejects_wrong_dimension_and_empty_input() {
        let train = synthetic_train_set(FeatureSelection::AudioOnly, 4, 3);
        let config = quick_config("dims", FeatureSelection::AudioOnly, &[6]);
        let model = train_model(&train, &config).unwrap();
        assert!(predict_sequence(&model, &Array2::zeros((24, 3))).is_err());
        assert!(predict_sequence(&model, &Array2::zeros((25, 0))).is_err());
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let config = quick_config("bad", FeatureSelection::AudioOnly, &[6]);
        assert!(train_model(&[], &config).is_err());

        let mut train = synthetic_train_set(FeatureSelection::AudioOnly, 3, 2);
        train[1].1 = 7.5;
        assert!(train_model(&train, &config).is_err());

        let mut train = synthetic_train_set(FeatureSelection::AudioOnly, 3, 2);
        train[0].0 = Array2::zeros((11, 2));
        assert!(train_model(&train, &config).is_err());
    }

    #[test]
    fn svr_head_trains_and_predicts_in_range() {
        let train = synthetic_train_set(FeatureSelection::AudioOnly, 6, 3);
        let mut config = quick_config("svr", FeatureSelection::AudioOnly, &[6]);
        config.head = HeadKind::Svr;
        config.head_params = HeadParams {
            svr_c: 10.0,
            ..HeadParams::default()
        };
        let model = train_model(&train, &config).unwrap();
        assert!(matches!(model.head, QualityHead::Svr(_)));
        let (score, _) = predict_sequence(&model, &train[0].0).unwrap();
        assert!((1.0..=5.0).contains(&score));
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_simple_fn((6, 9), || rng.random::<f64>());
        let classes: Vec<usize> = (0..9).map(|j| j % 3).collect();
        let targets = one_hot(&classes, 3).unwrap();

        let config = quick_config("gc", FeatureSelection::Av, &[]);
        let hyper = TrainingHyperparams {
            seed: 5,
            ..config.training.clone()
        };
        let layer_a = crate::nn::AutoencoderLayer::init(6, 5, hyper.clone()).unwrap();
        let layer_b = crate::nn::AutoencoderLayer::init(
            5,
            4,
            TrainingHyperparams { seed: 6, ..hyper },
        )
        .unwrap();
        let mut chain = EncoderChain::new(6, vec![layer_a, layer_b]).unwrap();
        let mut head = SoftmaxHead::zeros(4, 3).unwrap();
        let mut head_rng = ChaCha8Rng::seed_from_u64(7);
        for v in head.w.iter_mut() {
            *v = head_rng.random::<f64>() - 0.5;
        }

        let params = joint_flatten(&chain, &head);
        let (_, grad) = joint_loss_grad(&chain, &head, &x, &targets).unwrap();
        assert_eq!(grad.len(), params.len());

        let step = 1e-5;
        let mut probe_rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let i = probe_rng.random_range(0..params.len());
            let mut plus = params.clone();
            plus[i] += step;
            joint_unflatten(&mut chain, &mut head, &plus);
            let (jp, _) = joint_loss_grad(&chain, &head, &x, &targets).unwrap();
            let mut minus = params.clone();
            minus[i] -= step;
            joint_unflatten(&mut chain, &mut head, &minus);
            let (jm, _) = joint_loss_grad(&chain, &head, &x, &targets).unwrap();
            let numeric = (jp - jm) / (2.0 * step);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-4);
            assert!(
                ((numeric - grad[i]) / denom).abs() < 1e-6,
                "param {}: analytic {} vs numeric {}",
                i,
                grad[i],
                numeric
            );
            joint_unflatten(&mut chain, &mut head, &params);
        }
    }

    #[test]
    fn fine_tune_lowers_the_joint_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Array2::from_shape_simple_fn((8, 30), || rng.random::<f64>());
        let classes: Vec<usize> = (0..30).map(|j| j % 4).collect();
        let targets = one_hot(&classes, 4).unwrap();

        let hyper = TrainingHyperparams {
            seed: 2,
            max_epochs: 5,
            ..TrainingHyperparams::default()
        };
        let layer = crate::nn::AutoencoderLayer::init(8, 6, hyper).unwrap();
        let mut chain = EncoderChain::new(8, vec![layer]).unwrap();
        let mut head = SoftmaxHead::zeros(6, 4).unwrap();

        let (before, _) = joint_loss_grad(&chain, &head, &x, &targets).unwrap();
        let after = fine_tune(&mut chain, &mut head, &x, &targets, 1e-2, 1e-12).unwrap();
        assert!(after < before, "{} should drop below {}", after, before);
    }

    #[test]
    fn fine_tune_flag_changes_the_trained_model() {
        let train = synthetic_train_set(FeatureSelection::AudioOnly, 6, 3);
        let mut plain_cfg = quick_config("ft", FeatureSelection::AudioOnly, &[8]);
        plain_cfg.head_params.score_mode = ScoreMode::Expectation;
        let mut tuned_cfg = plain_cfg.clone();
        tuned_cfg.fine_tune = true;

        let plain = train_model(&train, &plain_cfg).unwrap();
        let tuned = train_model(&train, &tuned_cfg).unwrap();
        let (plain_head, tuned_head) = match (&plain.head, &tuned.head) {
            (QualityHead::Softmax(a), QualityHead::Softmax(b)) => (a, b),
            other => panic!("unexpected heads {:?}", other),
        };
        assert!(plain_head.w != tuned_head.w);
        let (score, _) = predict_sequence(&tuned, &train[0].0).unwrap();
        assert!((1.0..=5.0).contains(&score));
    }
}
