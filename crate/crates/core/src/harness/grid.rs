use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{parameter_count, train_cnn_encoded, CnnConfig, EncodedExample};

/// Candidate values for each searched axis. `conv_layers` counts
/// convolution layers, so every entry must be even (layers come in pairs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub conv_layers: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            filters: vec![64, 128, 256],
            kernels: vec![3, 5, 7],
            conv_layers: vec![2, 4, 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GridPoint {
    pub filters: usize,
    pub kernel: usize,
    pub conv_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    #[serde(flatten)]
    pub point: GridPoint,
    pub parameters: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    #[serde(flatten)]
    pub point: GridPoint,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    /// Ranked best first.
    pub results: Vec<GridResult>,
    pub skipped: Vec<SkippedPoint>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.filters.is_empty() || self.kernels.is_empty() || self.conv_layers.is_empty() {
            return Err(Error::InvalidArgument("every grid axis needs at least one value".into()));
        }
        if let Some(k) = self.kernels.iter().find(|&&k| k % 2 == 0) {
            return Err(Error::InvalidArgument(format!("grid kernel {k} must be odd")));
        }
        if let Some(d) = self.conv_layers.iter().find(|&&d| d == 0 || d % 2 == 1) {
            return Err(Error::InvalidArgument(format!("conv layer count {d} must be a positive even number")));
        }
        if let Some(f) = self.filters.iter().find(|&&f| f == 0) {
            return Err(Error::InvalidArgument(format!("filter count {f} must be positive")));
        }
        Ok(())
    }

    /// Cartesian product in filters-major, then kernel, then depth order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &filters in &self.filters {
            for &kernel in &self.kernels {
                for &conv_layers in &self.conv_layers {
                    out.push(GridPoint { filters, kernel, conv_layers });
                }
            }
        }
        out
    }
}

/// Accuracy descending, then fewer parameters, then the point itself.
fn rank(a: &GridResult, b: &GridResult) -> Ordering {
    b.accuracy
        .total_cmp(&a.accuracy)
        .then(a.parameters.cmp(&b.parameters))
        .then(a.point.cmp(&b.point))
}

/// Trains one CNN per grid point from `base`, all with `base.seed`, and
/// ranks them by final validation accuracy. With `parallel`, points train
/// concurrently; the outcome is identical either way.
pub fn grid_search(
    train: &[EncodedExample],
    valid: &[EncodedExample],
    base: &CnnConfig,
    spec: &GridSpec,
    parallel: bool,
) -> Result<GridOutcome> {
    spec.validate()?;
    let run = |p: &GridPoint| -> Result<std::result::Result<GridResult, SkippedPoint>> {
        let mut cfg = *base;
        cfg.arch.filters = p.filters;
        cfg.arch.kernel = p.kernel;
        cfg.arch.conv_pairs = p.conv_layers / 2;
        if let Err(e) = cfg.validate() {
            return Ok(Err(SkippedPoint { point: *p, reason: e.to_string() }));
        }
        let (_, report) = train_cnn_encoded(train, valid, &cfg)?;
        Ok(Ok(GridResult {
            point: *p,
            parameters: parameter_count(&cfg),
            accuracy: *report.valid_accuracy.last().expect("at least one epoch"),
        }))
    };
    let points = spec.points();
    let outcomes: Vec<_> = if parallel {
        points.par_iter().map(run).collect::<Result<_>>()?
    } else {
        points.iter().map(run).collect::<Result<_>>()?
    };
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(s) => skipped.push(s),
        }
    }
    results.sort_by(rank);
    Ok(GridOutcome { results, skipped })
}

impl GridOutcome {
    pub fn best(&self) -> Option<&GridResult> {
        self.results.first()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\tfilters\tkernel\tconv_layers\tparameters\taccuracy\n");
        for (i, r) in self.results.iter().enumerate() {
            let p = r.point;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.4}\n",
                i + 1,
                p.filters,
                p.kernel,
                p.conv_layers,
                r.parameters,
                r.accuracy
            ));
        }
        out
    }
}
