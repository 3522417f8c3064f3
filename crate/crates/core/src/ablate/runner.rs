//! Suite execution: evaluates every config against one dataset with shared
//! folds, isolates failures, and writes resumable, atomically-updated
//! reports plus a merged comparison CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ablate::config::{AblationConfig, AblationSuite};
use crate::error::{AvqError, Result};
use crate::eval::evaluate::{evaluate, EvalReport, SequenceFeatures};

/// Progress file name inside the output directory.
pub const STATE_FILE: &str = "state.json";
/// Merged comparison table name inside the output directory.
pub const MERGED_CSV: &str = "merged.csv";

/// Column order of the merged CSV, after the model and measure columns.
pub const MERGED_COLUMNS: [(&str, &str); 7] = [
    ("noise", "Noise"),
    ("chop", "Chop"),
    ("clip", "Clip"),
    ("echo", "Echo"),
    ("packet_loss", "Packet-Loss"),
    ("frame_freezing", "Frame-Freezing"),
    ("overall", "Overall"),
];

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Configs evaluated concurrently; 1 runs them in order.
    pub workers: usize,
    /// Skip configs already completed by a previous run over the same data.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SuiteState {
    completed: BTreeMap<String, CompletedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CompletedEntry {
    checksum: String,
    report: String,
}

/// Result of one config inside a suite run.
#[derive(Debug, Clone)]
pub struct ConfigOutcome {
    pub name: String,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    /// True when the report was reused from a previous run's state.
    pub reused: bool,
}

/// Result of a whole suite run.
#[derive(Debug)]
pub struct SuiteOutcome {
    /// One entry per config, in suite order.
    pub outcomes: Vec<ConfigOutcome>,
    pub merged_csv: PathBuf,
}

impl SuiteOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.outcomes.iter().all(|o| o.error.is_none())
    }
}

/// Replaces characters that are awkward in file names.
fn safe_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes a file via a temporary sibling plus rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| AvqError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AvqError::io(path, e))
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{:02x}", b))
        .collect()
}

/// Digest over every sequence's identity, target, and feature bytes; any
/// change to the dataset invalidates completed state entries.
fn dataset_fingerprint(data: &[SequenceFeatures]) -> String {
    let mut hasher = Sha256::new();
    for seq in data {
        hasher.update(seq.record.id.as_bytes());
        hasher.update(seq.record.mos.to_le_bytes());
        for dim in [
            seq.video.data.nrows(),
            seq.video.data.ncols(),
            seq.audio.data.nrows(),
            seq.audio.data.ncols(),
        ] {
            hasher.update((dim as u64).to_le_bytes());
        }
        for v in seq.video.data.iter().chain(seq.audio.data.iter()) {
            hasher.update(v.to_le_bytes());
        }
    }
    hex_digest(hasher)
}

fn config_checksum(
    config: &AblationConfig,
    cv_k: usize,
    seed: u64,
    dataset_fp: &str,
) -> Result<String> {
    let config_text = toml::to_string(config)
        .map_err(|e| AvqError::Serialization(format!("config `{}`: {}", config.name, e)))?;
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    hasher.update((cv_k as u64).to_le_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(dataset_fp.as_bytes());
    Ok(hex_digest(hasher))
}

fn load_state(out_dir: &Path) -> SuiteState {
    let path = out_dir.join(STATE_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_else(|e| {
            log::warn!("ignoring unreadable state file {}: {}", path.display(), e);
            SuiteState::default()
        }),
        Err(_) => SuiteState::default(),
    }
}

fn save_state(out_dir: &Path, state: &SuiteState) -> Result<()> {
    write_atomic(
        &out_dir.join(STATE_FILE),
        serde_json::to_string_pretty(state)?.as_bytes(),
    )
}

fn metric_cell(value: Option<f64>) -> String {
    value.map(|v| format!("{:.4}", v)).unwrap_or_default()
}

/// Per-fold overall metrics as CSV, for boxplot tooling.
fn fold_csv(report: &EvalReport) -> String {
    let mut out = String::from("fold,count,pcc,scc,rmse\n");
    for fold in &report.per_fold {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fold.fold,
            fold.pairs.len(),
            metric_cell(fold.pcc),
            metric_cell(fold.scc),
            metric_cell(fold.rmse),
        ));
    }
    out
}

/// The comparison table: one block of PCC/SCC/RMSE rows per config, one
/// column per distortion group plus the overall column.
fn merged_csv_text(outcomes: &[ConfigOutcome]) -> String {
    let mut out = String::from("Model,Measure");
    for (_, label) in MERGED_COLUMNS {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');

    for outcome in outcomes {
        let measures: [(&str, fn(&crate::eval::GroupReport) -> Option<f64>); 3] = [
            ("PCC", |g| g.pcc),
            ("SCC", |g| g.scc),
            ("RMSE", |g| g.rmse),
        ];
        for (measure, pick) in measures {
            out.push_str(&outcome.name);
            out.push(',');
            out.push_str(measure);
            for (key, _) in MERGED_COLUMNS {
                out.push(',');
                if let Some(report) = &outcome.report {
                    if let Some(group) = report.per_group.get(key) {
                        out.push_str(&metric_cell(pick(group)));
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

fn run_one(
    config: &AblationConfig,
    data: &[SequenceFeatures],
    cv_k: usize,
    seed: u64,
    out_dir: &Path,
    checksum: &str,
    state: &Mutex<SuiteState>,
) -> Result<EvalReport> {
    let report = evaluate(config, data, cv_k, seed)?;

    let stem = safe_file_stem(&config.name);
    let report_rel = format!("reports/{}.json", stem);
    write_atomic(
        &out_dir.join(&report_rel),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    write_atomic(
        &out_dir.join(format!("folds/{}.csv", stem)),
        fold_csv(&report).as_bytes(),
    )?;

    let mut state = state.lock().expect("state lock poisoned");
    state.completed.insert(
        config.name.clone(),
        CompletedEntry {
            checksum: checksum.to_string(),
            report: report_rel,
        },
    );
    save_state(out_dir, &state)?;
    Ok(report)
}

/// Tries to reuse a completed config from a previous run: the checksum must
/// match and the stored report must parse.
fn reuse_completed(
    out_dir: &Path,
    state: &SuiteState,
    name: &str,
    checksum: &str,
) -> Option<EvalReport> {
    let entry = state.completed.get(name)?;
    if entry.checksum != checksum {
        log::info!("config `{}` changed since the last run, re-evaluating", name);
        return None;
    }
    let path = out_dir.join(&entry.report);
    match fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|text| {
        serde_json::from_str::<EvalReport>(&text).map_err(|e| e.to_string())
    }) {
        Ok(report) => Some(report),
        Err(e) => {
            log::warn!("stored report {} unusable ({}), re-evaluating", path.display(), e);
            None
        }
    }
}

/// Evaluates every config in the suite against `data`, sharing the fold
/// split (`suite.cv_k`, `suite.seed`) across configs. Failures are recorded
/// per config and do not stop the suite; the merged CSV is written last.
pub fn run_suite(
    suite: &AblationSuite,
    data: &[SequenceFeatures],
    out_dir: &Path,
    options: &RunOptions,
) -> Result<SuiteOutcome> {
    suite.validate()?;
    if data.is_empty() {
        return Err(AvqError::Validation("no sequences to evaluate".into()));
    }
    for sub in ["reports", "folds"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| AvqError::io(&dir, e))?;
    }

    let dataset_fp = dataset_fingerprint(data);
    let prior = if options.resume {
        load_state(out_dir)
    } else {
        SuiteState::default()
    };

    let mut checksums = Vec::with_capacity(suite.configs.len());
    for config in &suite.configs {
        checksums.push(config_checksum(config, suite.cv_k, suite.seed, &dataset_fp)?);
    }

    enum Plan {
        Reuse(EvalReport),
        Run,
    }
    let plans: Vec<Plan> = suite
        .configs
        .iter()
        .zip(&checksums)
        .map(|(config, checksum)| {
            match reuse_completed(out_dir, &prior, &config.name, checksum) {
                Some(report) => {
                    log::info!("config `{}` already completed, reusing its report", config.name);
                    Plan::Reuse(report)
                }
                None => Plan::Run,
            }
        })
        .collect();

    let state = Mutex::new(prior);
    let jobs: Vec<usize> = plans
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Plan::Run))
        .map(|(i, _)| i)
        .collect();

    let execute = |i: &usize| -> (usize, std::result::Result<EvalReport, String>) {
        let config = &suite.configs[*i];
        log::info!("evaluating config `{}`", config.name);
        let result = run_one(
            config,
            data,
            suite.cv_k,
            suite.seed,
            out_dir,
            &checksums[*i],
            &state,
        )
        .map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::error!("config `{}` failed: {}", config.name, e);
        }
        (*i, result)
    };

    let mut fresh: BTreeMap<usize, std::result::Result<EvalReport, String>> =
        if options.workers > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| AvqError::Config(format!("worker pool: {}", e)))?;
            pool.install(|| jobs.par_iter().map(execute).collect())
        } else {
            jobs.iter().map(execute).collect()
        };

    let outcomes: Vec<ConfigOutcome> = suite
        .configs
        .iter()
        .zip(plans)
        .enumerate()
        .map(|(i, (config, plan))| match plan {
            Plan::Reuse(report) => ConfigOutcome {
                name: config.name.clone(),
                report: Some(report),
                error: None,
                reused: true,
            },
            Plan::Run => {
                let result = fresh.remove(&i).expect("every planned job ran");
                let (report, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e)),
                };
                ConfigOutcome {
                    name: config.name.clone(),
                    report,
                    error,
                    reused: false,
                }
            }
        })
        .collect();

    let merged_csv = out_dir.join(MERGED_CSV);
    write_atomic(&merged_csv, merged_csv_text(&outcomes).as_bytes())?;

    Ok(SuiteOutcome {
        outcomes,
        merged_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablate::config::HeadKind;
    use crate::audio::{AudioFeatureMatrix, NUM_BANDS};
    use crate::media::{AudioDistortion, SequenceRecord, VideoDistortion};
    use crate::model::FeatureSelection;
    use crate::video::{video_feature_names, VideoFeatureMatrix, VIDEO_DIM};
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dataset(n: usize) -> Vec<SequenceFeatures> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let audio_kinds = [
            AudioDistortion::Noise,
            AudioDistortion::Chop,
            AudioDistortion::Clip,
            AudioDistortion::Echo,
        ];
        let video_kinds = [VideoDistortion::PacketLoss, VideoDistortion::FrameFreezing];
        (0..n)
            .map(|i| {
                let mos = 1.0 + 4.0 * (i as f64 / (n - 1) as f64);
                let record = SequenceRecord {
                    id: format!("s{:02}", i),
                    video_path: format!("s{:02}.y4m", i).into(),
                    audio_path: format!("s{:02}.wav", i).into(),
                    fps: 10.0,
                    mos,
                    audio_distortion: audio_kinds[i % 4],
                    video_distortion: video_kinds[i % 2],
                    severity: None,
                };
                let video = VideoFeatureMatrix {
                    data: Array2::from_shape_simple_fn((VIDEO_DIM, 2), || {
                        mos + 0.1 * rng.random::<f64>()
                    }),
                    feature_names: video_feature_names(),
                };
                let audio = AudioFeatureMatrix {
                    data: Array2::from_shape_simple_fn((NUM_BANDS, 2), || {
                        -50.0 + 6.0 * mos + rng.random::<f64>()
                    }),
                    band_centers_hz: (0..NUM_BANDS).map(|b| 50.0 + 40.0 * b as f64).collect(),
                };
                SequenceFeatures {
                    record,
                    video,
                    audio,
                }
            })
            .collect()
    }

    fn tiny_suite() -> AblationSuite {
        let mut a =
            AblationConfig::preset("quick-av", FeatureSelection::Av, &[8], HeadKind::Softmax);
        a.training.max_epochs = 6;
        let mut b = AblationConfig::preset(
            "quick-audio",
            FeatureSelection::AudioOnly,
            &[],
            HeadKind::Softmax,
        );
        b.training.max_epochs = 6;
        AblationSuite {
            cv_k: 3,
            seed: 5,
            configs: vec![a, b],
        }
    }

    #[test]
    fn suite_writes_reports_folds_and_merged_csv() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_dataset(12);
        let suite = tiny_suite();
        let outcome = run_suite(&suite, &data, dir.path(), &RunOptions::default()).unwrap();

        assert!(outcome.all_succeeded());
        assert_eq!(outcome.outcomes.len(), 2);
        assert!(dir.path().join("reports/quick-av.json").exists());
        assert!(dir.path().join("reports/quick-audio.json").exists());
        assert!(dir.path().join("folds/quick-av.csv").exists());
        assert!(dir.path().join(STATE_FILE).exists());

        let merged = fs::read_to_string(&outcome.merged_csv).unwrap();
        let lines: Vec<&str> = merged.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert_eq!(
            lines[0],
            "Model,Measure,Noise,Chop,Clip,Echo,Packet-Loss,Frame-Freezing,Overall"
        );
        assert!(lines[1].starts_with("quick-av,PCC,"));
        assert!(lines[4].starts_with("quick-audio,PCC,"));
        assert!(lines[6].starts_with("quick-audio,RMSE,"));
    }

    #[test]
    fn identical_runs_produce_identical_merged_bytes() {
        let data = tiny_dataset(12);
        let suite = tiny_suite();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_suite(&suite, &data, dir_a.path(), &RunOptions::default()).unwrap();
        let b = run_suite(&suite, &data, dir_b.path(), &RunOptions::default()).unwrap();
        assert_eq!(
            fs::read(&a.merged_csv).unwrap(),
            fs::read(&b.merged_csv).unwrap()
        );
    }

    #[test]
    fn resume_skips_completed_configs() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_dataset(12);
        let suite = tiny_suite();
        let first = run_suite(&suite, &data, dir.path(), &RunOptions::default()).unwrap();
        assert!(first.outcomes.iter().all(|o| !o.reused));

        let resume = RunOptions {
            resume: true,
            ..RunOptions::default()
        };
        let second = run_suite(&suite, &data, dir.path(), &resume).unwrap();
        assert!(second.outcomes.iter().all(|o| o.reused));
        assert_eq!(
            fs::read(&first.merged_csv).unwrap(),
            fs::read(&second.merged_csv).unwrap()
        );

        let mut changed = suite.clone();
        changed.configs[0].dims = vec![6];
        let third = run_suite(&changed, &data, dir.path(), &resume).unwrap();
        assert!(!third.outcomes[0].reused);
        assert!(third.outcomes[1].reused);
    }

    #[test]
    fn a_failing_config_does_not_stop_the_suite() {
        let dir = tempfile::tempdir().unwrap();
        let data = tiny_dataset(12);
        let mut suite = tiny_suite();
        suite.configs[0].head = HeadKind::Svr;
        suite.configs[0].head_params.svr_epsilon = 0.0;
        suite.configs[0].head_params.svr_c = 1000.0;
        // A solver budget of one pair update cannot fit spread-out targets.
        suite.configs[0].head_params.svr_max_pair_updates = Some(1);
        let outcome = run_suite(&suite, &data, dir.path(), &RunOptions::default()).unwrap();
        assert_eq!(outcome.outcomes.len(), 2);
        assert!(!outcome.all_succeeded());
        assert!(outcome.outcomes[0].error.is_some());
        assert!(outcome.outcomes[1].error.is_none());

        let merged = fs::read_to_string(&outcome.merged_csv).unwrap();
        assert_eq!(merged.lines().count(), 7);
    }

    #[test]
    fn worker_pool_matches_sequential_output() {
        let data = tiny_dataset(12);
        let suite = tiny_suite();
        let dir_seq = tempfile::tempdir().unwrap();
        let dir_par = tempfile::tempdir().unwrap();
        let seq = run_suite(&suite, &data, dir_seq.path(), &RunOptions::default()).unwrap();
        let par = run_suite(
            &suite,
            &data,
            dir_par.path(),
            &RunOptions {
                workers: 2,
                resume: false,
            },
        )
        .unwrap();
        assert_eq!(
            fs::read(&seq.merged_csv).unwrap(),
            fs::read(&par.merged_csv).unwrap()
        );
    }
}
