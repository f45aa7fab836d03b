// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde_json::{json, Value};

use lagxai_core::data::{
    l2_normalize, load_operator, load_pairs, save_operator, save_pairs, PairFormat,
    DEFAULT_BINARIZE_THRESHOLD,
};
use lagxai_core::eval::{
    calibrate_threshold, corridor_export, detect_anomalies, evaluate, grid_search, residual_errors,
    scenario_eval, write_corridor_csv, write_grid_csv, GridSpec, ScenarioOptions,
};
use lagxai_core::fit::{fit_cluster_operators, fit_operator};
use lagxai_core::xai::{profile_operator, profile_pairs};
use lagxai_core::{AffineOperator, EmbeddingPairSet, Error};

use crate::{Cli, CliError, Command, InputArgs, SUMMARY_SCHEMA};

type Result<T> = std::result::Result<T, CliError>;

/// Reserved operator name for `(I, 0)`.
pub const IDENTITY_OP: &str = "identity";

pub fn run(cli: &Cli) -> Result<Value> {
    let (name, mut body) = match &cli.command {
        Command::Normalize { input, out } => ("normalize", normalize(input, out)?),
        Command::Fit { input, out, fit } => {
            let set = load(input)?;
            let op = fit_operator(&set, &fit.config())?;
            save_operator(&op, out)?;
            let m = &op.meta;
            (
                "fit",
                json!({
                    "out": out,
                    "dim": op.dim(),
                    "n_pairs": m.n_pairs,
                    "rank": m.rank,
                    "condition_estimate": m.condition_estimate,
                    "flags": m.degenerate_flags,
                }),
            )
        }
        Command::Profile { op, dim, out } => {
            let op = resolve_op(op, *dim)?;
            let profile = profile_operator(&op)?;
            let value = serde_json::to_value(&profile).expect("profile serializes");
            if let Some(out) = out {
                write_json(out, &value)?;
            }
            ("profile", value)
        }
        Command::PairProfiles {
            op,
            input,
            indices,
            k_neighbors,
            out,
        } => {
            let set = load(input)?;
            let op = resolve_op(op, Some(set.dim()))?;
            let indices: Vec<usize> = indices.clone().unwrap_or_else(|| (0..set.len()).collect());
            let profiles = profile_pairs(&set, &indices, &op, &op.meta.config, *k_neighbors)?;
            write_json(
                out,
                &serde_json::to_value(&profiles).expect("profiles serialize"),
            )?;
            let mean = |f: &dyn Fn(&lagxai_core::PairProfile) -> f64| {
                (!profiles.is_empty())
                    .then(|| profiles.iter().map(f).sum::<f64>() / profiles.len() as f64)
            };
            (
                "pair-profiles",
                json!({
                    "out": out,
                    "pairs": profiles.len(),
                    "mean_theta_pair_deg": mean(&|p| p.theta_pair_deg),
                    "mean_residual_error": mean(&|p| p.residual_error),
                }),
            )
        }
        Command::Eval {
            op,
            input,
            baseline,
            n_boot,
            out,
        } => {
            let set = load(input)?;
            let op = resolve_op(op, Some(set.dim()))?;
            let report = evaluate(&op, &set, *n_boot, cli.seed, *baseline)?;
            let value = serde_json::to_value(&report).expect("report serializes");
            if let Some(out) = out {
                write_json(out, &value)?;
            }
            ("eval", value)
        }
        Command::Grid {
            train,
            eval,
            lambda_ortho,
            lambda_equiv,
            r,
            tau,
            no_normalize,
            binarize,
            out,
        } => {
            let train = load_path(train, *binarize)?;
            let eval = load_path(eval, *binarize)?;
            let grid = GridSpec {
                lambda_ortho: lambda_ortho.clone(),
                lambda_equiv: lambda_equiv.clone(),
                r: r.clone(),
                tau: *tau,
                normalize_input: !no_normalize,
            };
            let rows = grid_search(&train, &eval, &grid)?;
            write_grid_csv(out, &rows)?;
            let best = rows
                .iter()
                .filter(|r| r.auc.is_some())
                .max_by(|a, b| a.auc.unwrap().total_cmp(&b.auc.unwrap()));
            (
                "grid",
                json!({
                    "out": out,
                    "cells": rows.len(),
                    "failed_cells": rows.iter().filter(|r| r.error.is_some()).count(),
                    "best": best,
                }),
            )
        }
        Command::Calibrate {
            op,
            input,
            percentile,
            out,
        } => {
            let set = load(input)?;
            let op = resolve_op(op, Some(set.dim()))?;
            let errors = residual_errors(&op, &set)?;
            let positives: Vec<f64> = set
                .positive_indices()
                .into_iter()
                .map(|i| errors[i])
                .collect();
            if positives.is_empty() {
                return Err(Error::TooFewPositives {
                    required: 1,
                    found: 0,
                }
                .into());
            }
            let threshold = calibrate_threshold(&positives, *percentile)?;
            let value = json!({
                "threshold": threshold,
                "percentile": percentile,
                "n_positives": positives.len(),
            });
            if let Some(out) = out {
                write_json(out, &value)?;
            }
            ("calibrate", value)
        }
        Command::Detect {
            op,
            input,
            threshold,
            out,
        } => {
            let set = load(input)?;
            let op = resolve_op(op, Some(set.dim()))?;
            let metrics = detect_anomalies(&op, &set, *threshold)?;
            let value = serde_json::to_value(&metrics).expect("metrics serialize");
            if let Some(out) = out {
                write_json(out, &value)?;
            }
            ("detect", value)
        }
        Command::Scenarios {
            train,
            eval,
            k,
            n_boot,
            baseline_auc,
            binarize,
            fit,
            out,
        } => {
            let train = load_path(train, *binarize)?;
            let eval = load_path(eval, *binarize)?;
            let cfg = fit.config();
            let global = fit_operator(&train, &cfg)?;
            let clusters = fit_cluster_operators(&train, *k, cli.seed, &cfg)?;
            let opts = ScenarioOptions {
                n_boot: *n_boot,
                seed: cli.seed,
                baseline_auc: *baseline_auc,
            };
            let report = scenario_eval(&global, &clusters, &train, &eval, &opts)?;
            let value = serde_json::to_value(&report).expect("report serializes");
            if let Some(out) = out {
                write_json(out, &value)?;
            }
            (
                "scenarios",
                json!({
                    "auc_a": report.a.auc,
                    "auc_b": report.b.auc,
                    "auc_a1": report.a1.auc,
                    "auc_b1": report.b1.auc,
                    "baseline_auc": report.baseline_auc,
                    "k": report.k,
                    "fallback_clusters": report.fallback_clusters,
                }),
            )
        }
        Command::Corridor {
            op,
            input,
            threshold,
            out,
        } => {
            let set = load(input)?;
            let op = resolve_op(op, Some(set.dim()))?;
            let rows = corridor_export(&set, &op)?;
            write_corridor_csv(out, &rows, *threshold)?;
            ("corridor", json!({ "out": out, "rows": rows.len() }))
        }
    };
    if let Value::Object(map) = &mut body {
        map.insert("schema".into(), json!(SUMMARY_SCHEMA));
        map.insert("command".into(), json!(name));
    }
    Ok(body)
}

fn normalize(input: &InputArgs, out: &Path) -> Result<Value> {
    let set = load(input)?;
    let normalized = l2_normalize(&set);
    save_pairs(&normalized.set, out, PairFormat::from_path(out))?;
    Ok(json!({
        "out": out,
        "pairs": normalized.set.len(),
        "dim": normalized.set.dim(),
        "degenerate": normalized.degenerate,
    }))
}

fn load(input: &InputArgs) -> Result<EmbeddingPairSet> {
    load_path(&input.input, input.binarize)
}

fn load_path(path: &Path, binarize: Option<f32>) -> Result<EmbeddingPairSet> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        }
        .into());
    }
    let set = load_pairs(path, PairFormat::from_path(path))?;
    Ok(match binarize {
        Some(t) => set.binarize(t),
        None if set.has_scores() && !set.has_labels() => set.binarize(DEFAULT_BINARIZE_THRESHOLD),
        None => set,
    })
}

fn resolve_op(spec: &str, dim: Option<usize>) -> Result<AffineOperator> {
    if spec == IDENTITY_OP {
        return match dim {
            Some(n) if n > 0 => Ok(AffineOperator::identity(n)),
            _ => Err(CliError::Usage(
                "the identity operator needs a dimension (--dim)".into(),
            )),
        };
    }
    let op = load_operator(Path::new(spec))?;
    if let Some(n) = dim {
        if n != op.dim() {
            return Err(CliError::Usage(format!(
                "operator {spec} is {}-dimensional but the pairs are {n}-dimensional",
                op.dim()
            )));
        }
    }
    Ok(op)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}
