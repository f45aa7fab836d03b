// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hybrid_scores, roc_auc};
use crate::data::{io_err, EmbeddingPairSet};
use crate::error::{Error, Result};
use crate::fit::{fit_operator, FitConfig};
use crate::xai::profile_operator;

/// Hyperparameter lattice; `tau` and `normalize_input` are shared by all cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda_ortho: Vec<f64>,
    pub lambda_equiv: Vec<f64>,
    pub r: Vec<usize>,
    pub tau: f64,
    pub normalize_input: bool,
}

impl GridSpec {
    /// Cells in output order: `λ_ortho` outermost, then `λ_equiv`, then `r`.
    pub fn cells(&self) -> Vec<FitConfig> {
        let mut out = Vec::new();
        for &lo in &self.lambda_ortho {
            for &le in &self.lambda_equiv {
                for &r in &self.r {
                    out.push(FitConfig {
                        lambda_ortho: lo,
                        lambda_equiv: le,
                        r,
                        tau: self.tau,
                        normalize_input: self.normalize_input,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub lambda_ortho: f64,
    pub lambda_equiv: f64,
    pub r: usize,
    pub auc: Option<f64>,
    pub theta_deg: Option<f64>,
    pub def_index: Option<f64>,
    /// Why the cell produced no numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Fits every cell on `train` positives and scores `eval`. A failing cell
/// keeps its row with the error message; the search continues.
pub fn grid_search(
    train: &EmbeddingPairSet,
    eval: &EmbeddingPairSet,
    grid: &GridSpec,
) -> Result<Vec<GridRow>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let found = train.positive_indices().len();
    if found < 2 {
        return Err(Error::TooFewPositives { required: 2, found });
    }
    if train.dim() != eval.dim() {
        return Err(Error::shape(
            "grid_search",
            format!(
                "train is {}-dimensional, eval is {}",
                train.dim(),
                eval.dim()
            ),
        ));
    }
    Ok(cells
        .par_iter()
        .map(|cfg| run_cell(train, eval, cfg))
        .collect())
}

fn run_cell(train: &EmbeddingPairSet, eval: &EmbeddingPairSet, cfg: &FitConfig) -> GridRow {
    let mut row = GridRow {
        lambda_ortho: cfg.lambda_ortho,
        lambda_equiv: cfg.lambda_equiv,
        r: cfg.r,
        auc: None,
        theta_deg: None,
        def_index: None,
        error: None,
    };
    let outcome = fit_operator(train, cfg).and_then(|op| {
        let profile = profile_operator(&op)?;
        let (scores, _) = hybrid_scores(&op, eval)?;
        Ok((roc_auc(&scores)?, profile))
    });
    match outcome {
        Ok((auc, p)) => {
            row.auc = Some(auc);
            row.theta_deg = Some(p.theta_deg);
            row.def_index = Some(p.def_index);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut body = String::from("lambda_ortho,lambda_equiv,r,auc,theta_deg,def_index,error\n");
    for row in rows {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.lambda_ortho,
            row.lambda_equiv,
            row.r,
            opt(row.auc),
            opt(row.theta_deg),
            opt(row.def_index),
            row.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        ));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
