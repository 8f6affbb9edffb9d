use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use qtn_core::baselines::cross_validate;
use qtn_core::config::RunConfig;
use qtn_core::data::{load_csv, metrics, split, write_spectrum_csv, Dataset};
use qtn_core::experiments::{
    load_dataset, predict_raw, prepare, run_benchmark, run_spectrum, run_train, write_benchmark_csv, Scaling,
};
use qtn_core::{CpdWeights, Error, Result, Weights};
use serde_json::json;

pub const MODEL_FILE: &str = "model.qtnw";
pub const SCALING_FILE: &str = "scaling.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let outcome = run_train(cfg)?;
    std::fs::write(out.join(MODEL_FILE), Weights::Cpd(outcome.weights.clone()).to_bytes())?;
    write_json(&out.join(SCALING_FILE), &serde_json::to_value(&outcome.scaling)?)?;
    let mut updates = create(&out.join("train_updates.jsonl"))?;
    outcome.report.write_jsonl(&mut updates)?;
    updates.flush()?;
    write_json(
        &out.join("train_report.json"),
        &json!({
            "report": outcome.report,
            "train_metrics": outcome.train_metrics,
            "test_metrics": outcome.test_metrics,
            "max_test_imag": outcome.max_test_imag,
        }),
    )?;
    println!(
        "trained rank {} in {} epochs: train MSE {:.6}, test MSE {:.6}",
        outcome.weights.rank(),
        outcome.report.epoch_count,
        outcome.train_metrics.mse,
        outcome.test_metrics.mse
    );
    Ok(())
}

fn load_model(cfg: &RunConfig, out: &Path) -> Result<(CpdWeights, Scaling)> {
    let model_path = cfg.predict.model.clone().unwrap_or_else(|| out.join(MODEL_FILE));
    let scaling_path = cfg.predict.scaling.clone().unwrap_or_else(|| out.join(SCALING_FILE));
    let weights = match Weights::read_binary(File::open(&model_path)?)? {
        Weights::Cpd(w) => w,
        Weights::Tt(_) => {
            return Err(Error::Format(format!("{} holds a TT model; only CPD models predict", model_path.display())))
        }
    };
    let scaling: Scaling = serde_json::from_reader(File::open(&scaling_path)?)?;
    Ok((weights, scaling))
}

/// Input rows of `predict.input`, with the target column split off when the
/// file has one.
fn load_input(cfg: &RunConfig) -> Result<(PathBuf, Array2<f64>, Option<Vec<f64>>)> {
    let path = cfg
        .predict
        .input
        .clone()
        .ok_or_else(|| Error::InvalidConfig("predict.input must name a CSV file".into()))?;
    let table = load_csv(&path, None)?;
    let target = cfg
        .data
        .target
        .as_deref()
        .and_then(|name| table.feature_names.iter().position(|h| h == name));
    Ok(match target {
        Some(t) => {
            let keep: Vec<usize> = (0..table.x.ncols()).filter(|&i| i != t).collect();
            let y = table.x.column(t).to_vec();
            (path, table.x.select(Axis(1), &keep), Some(y))
        }
        None => (path, table.x, None),
    })
}

pub fn predict(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (weights, scaling) = load_model(cfg, out)?;
    let (path, x, _) = load_input(cfg)?;
    let pred = predict_raw(&weights, &scaling, &x)?;
    let mut w = create(&out.join("predictions.csv"))?;
    writeln!(w, "prediction")?;
    for v in &pred {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    println!("wrote {} predictions for {}", pred.len(), path.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (weights, scaling) = load_model(cfg, out)?;
    let (source, x, y) = if cfg.predict.input.is_some() {
        let (path, x, y) = load_input(cfg)?;
        let y = y.ok_or_else(|| Error::Data(format!("{} has no target column to score against", path.display())))?;
        (path.display().to_string(), x, y)
    } else {
        let dataset = load_dataset(&cfg.data)?;
        let parts = split(&dataset, cfg.data.train_fraction, cfg.data.split_seed)?;
        let test: Dataset = dataset.select(&parts.test_indices);
        (format!("held-out split of {}", dataset.provenance), test.x, test.y)
    };
    let pred = predict_raw(&weights, &scaling, &x)?;
    let reference = scaling.target.inverse(&[0.0])[0];
    let raw = metrics(&y, &pred, reference)?;
    let standardized = metrics(&scaling.target.transform(&y), &scaling.target.transform(&pred), 0.0)?;
    write_json(
        &out.join("eval.json"),
        &json!({
            "source": source,
            "rows": y.len(),
            "metrics": raw,
            "standardized_metrics": standardized,
        }),
    )?;
    println!(
        "{} rows from {source}: MSE {:.6} (standardized {:.6})",
        y.len(),
        raw.mse,
        standardized.mse
    );
    Ok(())
}

pub fn cv(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dataset = load_dataset(&cfg.data)?;
    let prep = prepare(&dataset, &cfg.data, cfg.data.split_seed)?;
    let c = &cfg.cv;
    let result = cross_validate(
        &prep.train.x,
        &prep.train.y,
        &cfg.features,
        &c.lambda_grid,
        &c.period_grid,
        c.folds,
        c.seed,
    )?;
    write_json(
        &out.join("cv.json"),
        &json!({
            "lambda_grid": c.lambda_grid,
            "period_grid": c.period_grid,
            "folds": c.folds,
            "result": result,
        }),
    )?;
    let mut tuned = cfg.clone();
    tuned.train.lambda = result.lambda;
    tuned.features = cfg.features.with_period(result.period)?;
    std::fs::write(out.join("tuned.toml"), tuned.to_toml_string())?;
    println!("selected lambda {:e}, period {}", result.lambda, result.period);
    Ok(())
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<()> {
    let outcome = run_spectrum(cfg)?;
    write_json(&out.join("spectrum_report.json"), &serde_json::to_value(&outcome.report)?)?;
    write_spectrum_csv(&outcome.dense_bins, create(&out.join("spectrum_dense.csv"))?)?;
    for (row, bins) in outcome.report.rows.iter().zip(&outcome.bins) {
        write_spectrum_csv(bins, create(&out.join(format!("spectrum_rank{}.csv", row.rank)))?)?;
    }
    println!("{:>6} {:>8} {:>8} {:>10}  top bins", "rank", "params", "ratio", "rel.error");
    for row in &outcome.report.rows {
        println!(
            "{:>6} {:>8} {:>8.1} {:>10.4}  {:?}",
            row.rank, row.params, row.compression_ratio, row.rel_weight_error, row.top_frequencies
        );
    }
    Ok(())
}

pub fn benchmark(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dataset = load_dataset(&cfg.data)?;
    let report = run_benchmark(cfg, &dataset)?;
    write_benchmark_csv(&report.rows, create(&out.join("benchmark.csv"))?)?;
    write_json(&out.join("benchmark.json"), &serde_json::to_value(&report)?)?;
    println!("{:<6} {:>6} {:>6} {:>8}  test MSE", "method", "M", "rank", "params");
    for r in &report.rows {
        let rank = r.rank.map_or_else(|| "-".to_string(), |k| k.to_string());
        println!(
            "{:<6} {:>6} {:>6} {:>8}  {:.4} ± {:.4}{}",
            r.method.to_string(),
            r.basis_size,
            rank,
            r.params,
            r.mse_mean,
            r.mse_sd,
            if r.failures.is_empty() {
                String::new()
            } else {
                format!("  ({} failed)", r.failures.len())
            }
        );
    }
    Ok(())
}
