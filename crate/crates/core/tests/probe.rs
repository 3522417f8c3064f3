use avq_core::eval::prepare_features;
use avq_core::media::load_manifest;
use avq_core::model::{merge_features, FeatureScaler, FeatureSelection, ScalerMode};
use avq_core::nn::{train_layer, TrainingHyperparams};
use ndarray::Array2;
use std::path::Path;

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
#[ignore]
fn feature_mos_correlations() {
    let manifest = Path::new("/tmp/bench/data/manifest.csv");
    let records = load_manifest(manifest).unwrap();
    let data = prepare_features(&records, Path::new("/tmp/bench/data/features")).unwrap();

    let mos: Vec<f64> = data.iter().map(|s| s.record.mos).collect();

    let merged: Vec<Array2<f64>> = data
        .iter()
        .map(|s| merge_features(Some(&s.video), Some(&s.audio), FeatureSelection::Av).unwrap())
        .collect();
    let d = merged[0].nrows();

    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
    for r in 0..d {
        let means: Vec<f64> = merged
            .iter()
            .map(|m| m.row(r).sum() / m.ncols() as f64)
            .collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut within = 0.0;
        for m in &merged {
            let n = m.ncols() as f64;
            let mean = m.row(r).sum() / n;
            within += m.row(r).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            for v in m.row(r) {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        within /= merged.len() as f64;
        let gm = means.iter().sum::<f64>() / means.len() as f64;
        let between = means.iter().map(|v| (v - gm) * (v - gm)).sum::<f64>() / means.len() as f64;
        let ratio = if within > 0.0 { between / within } else { f64::INFINITY };
        rows.push((r, pearson(&means, &mos), hi - lo, ratio));
    }

    let mut by_corr = rows.clone();
    by_corr.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap());
    println!("top 25 rows by |corr(mean_feature, mos)|  (row, corr, range, between/within)");
    for (r, c, range, ratio) in by_corr.iter().take(25) {
        let kind = if *r < 90 { "video" } else { "audio" };
        println!("  {kind} row {r:3}  corr {c:+.3}  range {range:10.3}  b/w {ratio:8.2}");
    }
    let strong_v = rows.iter().filter(|t| t.0 < 90 && t.1.abs() > 0.5).count();
    let strong_a = rows.iter().filter(|t| t.0 >= 90 && t.1.abs() > 0.5).count();
    println!("rows with |corr|>0.5: video {strong_v}/90, audio {strong_a}/25");

    // Pool all columns, fit the min-max scaler, and inspect what survives.
    let total_cols: usize = merged.iter().map(|m| m.ncols()).sum();
    let mut pooled = Array2::<f64>::zeros((d, total_cols));
    let mut col = 0;
    for m in &merged {
        for c in 0..m.ncols() {
            for r in 0..d {
                pooled[(r, col)] = m[(r, c)];
            }
            col += 1;
        }
    }
    let scaler = FeatureScaler::fit(ScalerMode::Minmax01, &pooled).unwrap();
    let scaled = scaler.apply(&pooled).unwrap();

    let mut small = 0;
    for r in 0..d {
        let n = total_cols as f64;
        let mean = scaled.row(r).sum() / n;
        let var = scaled.row(r).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var.sqrt() < 0.05 {
            small += 1;
        }
    }
    println!("scaled rows with std < 0.05: {small}/{d} (outlier squashing indicator)");

    let hyper = TrainingHyperparams {
        seed: 7,
        ..TrainingHyperparams::default()
    };
    let (layer, loss) = train_layer(&scaled, 60, &hyper).unwrap();
    let code = layer.encode(&scaled).unwrap();
    let mut unit_std = Vec::new();
    for r in 0..60 {
        let n = total_cols as f64;
        let mean = code.row(r).sum() / n;
        let var = code.row(r).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        unit_std.push((var.sqrt(), mean));
    }
    unit_std.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let live = unit_std.iter().filter(|(s, _)| *s > 0.01).count();
    println!(
        "layer1 loss {loss:.4}  units with std > 0.01: {live}/60  top: {:?}",
        unit_std
            .iter()
            .take(5)
            .map(|(s, m)| format!("{s:.3}@{m:.3}"))
            .collect::<Vec<_>>()
    );

    let seq_cols: Vec<usize> = merged.iter().map(|m| m.ncols()).collect();
    let mut best_code_corr: f64 = 0.0;
    for r in 0..60 {
        let mut means = Vec::new();
        let mut start = 0;
        for cols in &seq_cols {
            let mean = (start..start + cols).map(|c| code[(r, c)]).sum::<f64>() / *cols as f64;
            means.push(mean);
            start += cols;
        }
        let c = pearson(&means, &mos);
        if c.abs() > best_code_corr.abs() {
            best_code_corr = c;
        }
    }
    println!("best |corr(code unit mean, mos)|: {best_code_corr:+.3}");

    // Replay the generator's draws to recover the per-channel severities.
    use rand::Rng;
    use rand::SeedableRng;
    let grid: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut sev_a = Vec::new();
    let mut sev_v = Vec::new();
    let mut kind_a = Vec::new();
    let mut kind_v = Vec::new();
    for i in 0..records.len() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240);
        rng.set_stream(i as u64 + 1);
        let ka = rng.random_range(0..4usize);
        let sa = grid[rng.random_range(0..5usize)];
        let kv = rng.random_range(0..3usize);
        let sv = grid[rng.random_range(0..5usize)];
        kind_a.push(ka);
        sev_a.push(sa);
        kind_v.push(kv);
        sev_v.push(sv);
    }
    // sanity: combined severity must match the manifest
    for (i, r) in records.iter().enumerate() {
        let combined = (0.6 * sev_a[i]).max(sev_v[i]);
        assert!((r.severity.unwrap() - combined).abs() < 1e-12, "replay drift at {i}");
    }
    {
        let mut out = String::from("seq,kind_a,sev_a,kind_v,sev_v,mos\n");
        for i in 0..records.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i, kind_a[i], sev_a[i], kind_v[i], sev_v[i], mos[i]
            ));
        }
        std::fs::write("/tmp/bench/sev.csv", out).unwrap();
    }

    let seq_means: Vec<Vec<f64>> = (0..merged.len())
        .map(|s| {
            (0..d)
                .map(|r| merged[s].row(r).sum() / merged[s].ncols() as f64)
                .collect()
        })
        .collect();

    for (label, kinds) in [("video", &kind_v), ("audio", &kind_a)] {
        let (rows, sev) = if label == "video" {
            (0..90, &sev_v)
        } else {
            (90..115, &sev_a)
        };
        let n_kinds = if label == "video" { 3 } else { 4 };
        for k in 0..n_kinds {
            let idx: Vec<usize> = (0..merged.len()).filter(|&s| kinds[s] == k).collect();
            let sv: Vec<f64> = idx.iter().map(|&s| sev[s]).collect();
            let mut best = (0usize, 0.0f64);
            for r in rows.clone() {
                let xs: Vec<f64> = idx.iter().map(|&s| seq_means[s][r]).collect();
                let c = pearson(&xs, &sv);
                if c.abs() > best.1.abs() {
                    best = (r, c);
                }
            }
            println!(
                "{label} kind {k}: n={:3}  best row {:3} corr(row, severity) {:+.3}",
                idx.len(),
                best.0,
                best.1
            );
        }
    }

    // Ridge regression of MOS on per-sequence mean features: the linear
    // ceiling for any head working on these features.
    let n = seq_means.len();
    let dd = d + 1;
    let mut xtx = vec![vec![0.0f64; dd]; dd];
    let mut xty = vec![0.0f64; dd];
    let xrow = |s: usize| -> Vec<f64> {
        let mut v = seq_means[s].clone();
        v.push(1.0);
        v
    };
    for s in 0..n {
        let x = xrow(s);
        for a in 0..dd {
            xty[a] += x[a] * mos[s];
            for b in 0..dd {
                xtx[a][b] += x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        xtx[a][a] += 1e-3;
    }
    // Gaussian elimination.
    let mut aug = xtx.clone();
    for a in 0..dd {
        aug[a].push(xty[a]);
    }
    for col in 0..dd {
        let piv = (col..dd)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        for r2 in 0..dd {
            if r2 != col && aug[r2][col].abs() > 0.0 {
                let f = aug[r2][col] / p;
                for c2 in col..=dd {
                    let v = aug[col][c2];
                    aug[r2][c2] -= f * v;
                }
            }
        }
    }
    let beta: Vec<f64> = (0..dd).map(|a| aug[a][dd] / aug[a][a]).collect();
    let fitted: Vec<f64> = (0..n)
        .map(|s| xrow(s).iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();
    println!("ridge in-sample corr(fitted, mos): {:+.3}", pearson(&fitted, &mos));
}

#[test]
#[ignore]
fn code_spread_vs_cluster_separation() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let d = 115;
    let n = 3000;
    let levels = 9;

    for (k_rows, amp) in [(20usize, 0.4), (40, 0.4), (40, 0.8), (80, 0.8), (115, 1.0)] {
        // base point plus a severity direction touching k_rows rows
        let base: Vec<f64> = (0..d).map(|_| 0.2 + 0.4 * rng.random::<f64>()).collect();
        let mut dir = vec![0.0; d];
        let mut picked: Vec<usize> = (0..d).collect();
        for i in 0..d {
            let j = rng.random_range(0..d);
            picked.swap(i, j);
        }
        for &r in picked.iter().take(k_rows) {
            dir[r] = amp * if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        }
        let mut x = Array2::<f64>::zeros((d, n));
        let mut sev = Vec::with_capacity(n);
        for c in 0..n {
            let s = (c % levels) as f64 / (levels - 1) as f64;
            sev.push(s);
            for r in 0..d {
                let v = base[r] + s * dir[r] + 0.02 * (rng.random::<f64>() - 0.5);
                x[(r, c)] = v.clamp(0.0, 1.0);
            }
        }
        let sep = (dir.iter().map(|v| v * v).sum::<f64>()).sqrt();

        for epochs in [400usize, 4000] {
            let hyper = TrainingHyperparams {
                seed: 3,
                max_epochs: epochs,
                ..TrainingHyperparams::default()
            };
            let (layer, _) = train_layer(&x, 60, &hyper).unwrap();
            let code = layer.encode(&x).unwrap();
            let mut stds: Vec<f64> = (0..60)
                .map(|r| {
                    let m = code.row(r).sum() / n as f64;
                    (code.row(r).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64)
                        .sqrt()
                })
                .collect();
            stds.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let best_corr = (0..60)
                .map(|r| {
                    let vals: Vec<f64> = code.row(r).iter().cloned().collect();
                    pearson(&vals, &sev).abs()
                })
                .fold(0.0f64, f64::max);
            println!(
                "rows {k_rows:3} amp {amp:.1} |dir| {sep:4.1} epochs {epochs:4}: code stds top/median {:.3}/{:.3}  best |corr(unit, sev)| {best_corr:.3}",
                stds[0], stds[30]
            );
        }
    }
}

#[test]
#[ignore]
fn stagewise_baseline_breakdown() {
    use avq_core::ablate::AblationConfig;
    use avq_core::heads::QualityHead;
    use avq_core::model::{predict_sequence, train_model};

    let manifest = Path::new("/tmp/bench/data/manifest.csv");
    let records = load_manifest(manifest).unwrap();
    let data = prepare_features(&records, Path::new("/tmp/bench/data/features")).unwrap();
    let mos: Vec<f64> = data.iter().map(|s| s.record.mos).collect();

    let train_set: Vec<_> = data
        .iter()
        .map(|s| {
            (
                merge_features(Some(&s.video), Some(&s.audio), FeatureSelection::Av).unwrap(),
                s.record.mos,
            )
        })
        .collect();

    for (name, dims) in [("Layers-0", vec![]), ("Baseline", vec![60usize, 25])] {
        let config = AblationConfig::preset(
            name,
            FeatureSelection::Av,
            &dims,
            avq_core::ablate::HeadKind::Softmax,
        );
        let model = train_model(&train_set, &config).unwrap();

        for (li, layer) in model.chain.layers.iter().enumerate() {
            let mut all = Vec::new();
            for (f, _) in &train_set {
                let scaled = model.scaler.apply(f).unwrap();
                let mut x = scaled;
                for l in &model.chain.layers[..li] {
                    x = l.encode(&x).unwrap();
                }
                let code = layer.encode(&x).unwrap();
                all.push(code);
            }
            let h = all[0].nrows();
            let cols: usize = all.iter().map(|c| c.ncols()).sum();
            let mut unit_mean = vec![0.0; h];
            let mut unit_m2 = vec![0.0; h];
            let mut hi = vec![0.0f64; h];
            for c in &all {
                for r in 0..h {
                    for v in c.row(r) {
                        unit_mean[r] += v;
                        unit_m2[r] += v * v;
                        hi[r] = hi[r].max(*v);
                    }
                }
            }
            let mut stds: Vec<f64> = (0..h)
                .map(|r| {
                    let m = unit_mean[r] / cols as f64;
                    (unit_m2[r] / cols as f64 - m * m).max(0.0).sqrt()
                })
                .collect();
            stds.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let maxfire = hi.iter().cloned().fold(0.0f64, f64::max);
            println!(
                "{name} layer{li}: top unit stds {:.3}/{:.3}/{:.3}  max activation {maxfire:.3}",
                stds[0],
                stds[h / 2],
                stds[h - 1]
            );
        }

        if let QualityHead::Softmax(s) = &model.head {
            let wmax = s.w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let bmax = s.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            println!("{name} head: |W|max {wmax:.3}  |b|max {bmax:.3}");
        }

        let preds: Vec<f64> = train_set
            .iter()
            .map(|(f, _)| predict_sequence(&model, f).unwrap().0)
            .collect();
        let rmse = (preds
            .iter()
            .zip(&mos)
            .map(|(p, m)| (p - m) * (p - m))
            .sum::<f64>()
            / preds.len() as f64)
            .sqrt();
        let lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{name} in-sample: pcc {:+.3}  rmse {rmse:.3}  pred range [{lo:.2}, {hi:.2}]",
            pearson(&preds, &mos)
        );
    }
}
