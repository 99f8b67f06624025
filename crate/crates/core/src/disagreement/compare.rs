use serde::Serialize;

use super::SweepSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub tau: f64,
    pub fdi_a: Option<f64>,
    pub fdi_b: Option<f64>,
    /// `fdi_a - fdi_b` when both are defined.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRange {
    pub model: String,
    pub fdi_max: f64,
    pub fdi_min: f64,
}

impl ModelRange {
    /// `"1.14 – 1.10"`: maximum first, two decimals.
    pub fn range_string(&self) -> String {
        format!("{:.2} – {:.2}", self.fdi_max, self.fdi_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison {
    pub partition_name: String,
    pub rows: Vec<ComparisonRow>,
    pub ranges: Vec<ModelRange>,
}

fn range_of(model: &str, s: &SweepSeries) -> Result<ModelRange> {
    let vals: Vec<f64> = s.valid_points().map(|(_, a)| a.fdi()).collect();
    if vals.is_empty() {
        return Err(Error::SeriesMismatch(format!(
            "model `{model}` has no valid threshold"
        )));
    }
    Ok(ModelRange {
        model: model.to_string(),
        fdi_max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        fdi_min: vals.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Lines up two sweeps over the same grid and partition.
pub fn compare_models(
    label_a: &str,
    a: &SweepSeries,
    label_b: &str,
    b: &SweepSeries,
) -> Result<ModelComparison> {
    if a.grid() != b.grid() {
        return Err(Error::SeriesMismatch(format!(
            "threshold grids differ: {:?} vs {:?}",
            a.grid(),
            b.grid()
        )));
    }
    if a.partition_name != b.partition_name || a.group_labels != b.group_labels {
        return Err(Error::SeriesMismatch(format!(
            "partitions differ: `{}` {:?} vs `{}` {:?}",
            a.partition_name, a.group_labels, b.partition_name, b.group_labels
        )));
    }
    let rows = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(pa, pb)| {
            let (fa, fb) = (pa.fdi(), pb.fdi());
            ComparisonRow {
                tau: pa.tau,
                fdi_a: fa,
                fdi_b: fb,
                difference: fa.zip(fb).map(|(x, y)| x - y),
            }
        })
        .collect();
    Ok(ModelComparison {
        partition_name: a.partition_name.clone(),
        rows,
        ranges: vec![range_of(label_a, a)?, range_of(label_b, b)?],
    })
}
