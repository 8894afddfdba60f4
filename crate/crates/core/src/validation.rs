//! Monte-Carlo validation against a known ground truth.
//!
//! Anchors are sampled inside the ground truth, a model is derived from them,
//! and validation points drawn from the doubled taxonomy box are scored. Each
//! threshold of the grid yields a confusion matrix twice: once against the
//! true ODD and once against the convex hull of the anchors. The agreement of
//! the two precision-recall curves is summarized by R².
//!
//! All random draws happen up front on a single thread. Validation points use
//! stream 0 and the anchors for count `c` use stream `c + 1`, so a run is
//! fully determined by the seed and independent of the schedule order.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::derivation::{derive, DerivationConfig, DerivationReport};
use crate::error::{Error, Result};
use crate::geometry::{build_convex_hull, Bounds, ConvexHull, GroundTruthOdd, GroundTruthSpec};
use crate::ingestion::{format_real, write_table};
use crate::kernel::Dataset;
use crate::rng::SampleRng;

const VALIDATION_STREAM: u64 = 0;
const PROBE_BATCH: u64 = 100_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

pub const RESULTS_COLUMNS: [&str; 10] = [
    "anchor_count",
    "zeta",
    "precision_odd",
    "recall_odd",
    "precision_hull",
    "recall_hull",
    "precision_odd_std",
    "recall_odd_std",
    "precision_hull_std",
    "recall_hull_std",
];

pub const SUMMARY_COLUMNS: [&str; 3] = ["anchor_count", "r2_precision", "r2_recall"];

/// `0.00, 0.01, ..., 1.00`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub ground_truth: GroundTruthOdd,
    /// Taxonomy box; anchors are sampled from it by rejection.
    pub taxonomy_box: Bounds,
    /// Dimensions whose anchors take integer values.
    pub integer_dimensions: Vec<usize>,
    pub anchor_counts: Vec<usize>,
    pub n_validation: usize,
    pub seed: u64,
    pub threshold_grid: Vec<f64>,
    pub derivation: DerivationConfig,
}

impl McConfig {
    pub fn new(
        ground_truth: GroundTruthOdd,
        taxonomy_box: Bounds,
        anchor_counts: Vec<usize>,
        n_validation: usize,
        seed: u64,
        derivation: DerivationConfig,
    ) -> Self {
        Self {
            ground_truth,
            taxonomy_box,
            integer_dimensions: Vec::new(),
            anchor_counts,
            n_validation,
            seed,
            threshold_grid: default_grid(),
            derivation,
        }
    }

    pub fn from_spec(
        spec: &GroundTruthSpec,
        anchor_counts: Vec<usize>,
        n_validation: usize,
        seed: u64,
        derivation: DerivationConfig,
    ) -> Result<Self> {
        let mut cfg = Self::new(
            spec.ground_truth()?,
            spec.sampling_box()?,
            anchor_counts,
            n_validation,
            seed,
            derivation,
        );
        cfg.integer_dimensions = spec.integer_dimensions.clone();
        Ok(cfg)
    }

    pub fn dimension(&self) -> usize {
        self.taxonomy_box.dimension()
    }

    pub fn validation_box(&self) -> Bounds {
        self.taxonomy_box.scaled(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if self.ground_truth.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.ground_truth.dimension(),
            });
        }
        Bounds::new(self.taxonomy_box.lower.clone(), self.taxonomy_box.upper.clone())?;
        if self.anchor_counts.is_empty() {
            return Err(Error::InvalidConfig("anchor_counts is empty".into()));
        }
        for (i, &c) in self.anchor_counts.iter().enumerate() {
            if c < n + 1 {
                return Err(Error::InvalidConfig(format!(
                    "anchor count {c} is below n + 1 = {} (the hull needs a full-dimensional point set)",
                    n + 1
                )));
            }
            if self.anchor_counts[..i].contains(&c) {
                return Err(Error::InvalidConfig(format!("anchor count {c} is listed twice")));
            }
        }
        if self.n_validation == 0 {
            return Err(Error::InvalidConfig("n_validation must be >= 1".into()));
        }
        validate_grid(&self.threshold_grid)?;
        for (i, &k) in self.integer_dimensions.iter().enumerate() {
            if k >= n {
                return Err(Error::InvalidConfig(format!("integer dimension {k} is out of range")));
            }
            if self.integer_dimensions[..i].contains(&k) {
                return Err(Error::InvalidConfig(format!("integer dimension {k} is listed twice")));
            }
            if self.taxonomy_box.lower[k].ceil() > self.taxonomy_box.upper[k].floor() {
                return Err(Error::InvalidConfig(format!(
                    "integer dimension {k} has no integer inside the box"
                )));
            }
        }
        self.derivation.validate()
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("threshold grid is empty".into()));
    }
    if grid.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return Err(Error::InvalidConfig("thresholds must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("threshold grid must be non-decreasing".into()));
    }
    Ok(())
}

fn draw_point(rng: &mut SampleRng, b: &Bounds, integer_dimensions: &[usize]) -> Vec<f64> {
    (0..b.dimension())
        .map(|k| {
            let (lo, hi) = (b.lower[k], b.upper[k]);
            if integer_dimensions.contains(&k) {
                let (lo, hi) = (lo.ceil(), hi.floor());
                (lo + (rng.next_f64() * (hi - lo + 1.0)).floor()).min(hi)
            } else {
                rng.uniform(lo, hi)
            }
        })
        .collect()
}

/// `count` points uniform over the ground truth, by rejection from
/// `sampling_box`. Fails once the acceptance rate drops below 1e-4 at a
/// multiple of 100000 draws.
pub fn sample_anchors(
    gt: &GroundTruthOdd,
    sampling_box: &Bounds,
    integer_dimensions: &[usize],
    count: usize,
    rng: &mut SampleRng,
) -> Result<Vec<Vec<f64>>> {
    if gt.dimension() != sampling_box.dimension() {
        return Err(Error::DimensionMismatch {
            expected: gt.dimension(),
            actual: sampling_box.dimension(),
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        let p = draw_point(rng, sampling_box, integer_dimensions);
        draws += 1;
        if gt.contains(&p)? {
            out.push(p);
        }
        if draws.is_multiple_of(PROBE_BATCH) {
            let rate = out.len() as f64 / draws as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::InfeasibleRegion { rate, draws });
            }
        }
    }
    Ok(out)
}

/// `cfg.n_validation` uniform points over the doubled taxonomy box.
pub fn sample_validation(cfg: &McConfig, rng: &mut SampleRng) -> Vec<Vec<f64>> {
    let b = cfg.validation_box();
    (0..cfg.n_validation).map(|_| rng.point_in(&b)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `None` when nothing is predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the truth has no positives.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

fn check_lengths(affinities: &[f64], truth: &[bool]) -> Result<()> {
    if affinities.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} affinities but {} truth labels",
            affinities.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Confusion matrix of the prediction `affinity >= zeta` against `truth`.
pub fn confusion_at(affinities: &[f64], truth: &[bool], zeta: f64) -> Result<ConfusionCounts> {
    check_lengths(affinities, truth)?;
    let mut c = ConfusionCounts::default();
    for (&a, &t) in affinities.iter().zip(truth) {
        match (a >= zeta, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// What the truth labels of a curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    GroundTruth,
    Hull,
    Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub thresholds: Vec<f64>,
    /// Absent where nothing is predicted positive.
    pub precision: Vec<Option<f64>>,
    /// Zero everywhere when the truth has no positives.
    pub recall: Vec<f64>,
    pub reference: Reference,
    /// Set when the truth has no positives.
    pub degenerate_truth: bool,
}

pub fn pr_sweep(affinities: &[f64], truth: &[bool], grid: &[f64], reference: Reference) -> Result<PrCurve> {
    check_lengths(affinities, truth)?;
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty truth labels".into()));
    }
    validate_grid(grid)?;
    let mut precision = Vec::with_capacity(grid.len());
    let mut recall = Vec::with_capacity(grid.len());
    let mut degenerate_truth = false;
    for &z in grid {
        let c = confusion_at(affinities, truth, z)?;
        precision.push(c.precision());
        recall.push(c.recall().unwrap_or_else(|| {
            degenerate_truth = true;
            0.0
        }));
    }
    Ok(PrCurve {
        thresholds: grid.to_vec(),
        precision,
        recall,
        reference,
        degenerate_truth,
    })
}

/// Coefficient of determination of `other` against `reference`, over the
/// grid points where both values are present.
pub fn r_squared(reference: &[Option<f64>], other: &[Option<f64>]) -> Result<f64> {
    if reference.len() != other.len() {
        return Err(Error::InvalidInput(format!(
            "curves have {} and {} points",
            reference.len(),
            other.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = reference
        .iter()
        .zip(other)
        .filter_map(|(y, f)| Some(((*y)?, (*f)?)))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::UndefinedRSquared(format!(
            "{} comparable points, need at least 2",
            pairs.len()
        )));
    }
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let ss_tot: f64 = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedRSquared("reference curve is constant".into()));
    }
    let ss_res: f64 = pairs.iter().map(|p| (p.0 - p.1).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn present(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().copied().map(Some).collect()
}

/// Convex hull over the dimensions where the taxonomy box has positive
/// width. Points must match the fixed value on every zero-width dimension.
#[derive(Debug, Clone)]
pub struct ReferenceHull {
    hull: ConvexHull,
    active: Vec<usize>,
    fixed: Vec<(usize, f64)>,
}

impl ReferenceHull {
    pub fn build(points: &[Vec<f64>], taxonomy_box: &Bounds) -> Result<Self> {
        let n = taxonomy_box.dimension();
        let (active, fixed_dims): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&k| taxonomy_box.upper[k] > taxonomy_box.lower[k]);
        let fixed = fixed_dims.into_iter().map(|k| (k, taxonomy_box.lower[k])).collect();
        let projected: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                crate::error::check_dim(n, p)?;
                Ok(active.iter().map(|&k| p[k]).collect())
            })
            .collect::<Result<_>>()?;
        let hull = build_convex_hull(&projected)?;
        Ok(Self { hull, active, fixed })
    }

    pub fn hull(&self) -> &ConvexHull {
        &self.hull
    }

    /// Dimensions the hull is built over.
    pub fn active_dimensions(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        crate::error::check_dim(self.active.len() + self.fixed.len(), x)?;
        if self.fixed.iter().any(|&(k, v)| x[k] != v) {
            return Ok(false);
        }
        let y: Vec<f64> = self.active.iter().map(|&k| x[k]).collect();
        self.hull.contains(&y)
    }
}

#[derive(Debug, Clone)]
pub struct CountResult {
    pub anchor_count: usize,
    /// Model predictions against the ground truth.
    pub odd: PrCurve,
    /// Model predictions against hull membership.
    pub hull: PrCurve,
    pub r2_precision: Option<f64>,
    pub r2_recall: Option<f64>,
    pub hull_vertices: usize,
    pub report: DerivationReport,
    pub runtime: Duration,
}

/// Pointwise mean and population standard deviation over anchor counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<Option<f64>>,
    pub precision_std: Vec<Option<f64>>,
    pub recall: Vec<f64>,
    pub recall_std: Vec<f64>,
}

fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    Some((mean, var.sqrt()))
}

impl MeanCurve {
    fn of(curves: &[&PrCurve]) -> Self {
        let thresholds = curves[0].thresholds.clone();
        let mut out = MeanCurve {
            thresholds,
            precision: Vec::new(),
            precision_std: Vec::new(),
            recall: Vec::new(),
            recall_std: Vec::new(),
        };
        for j in 0..out.thresholds.len() {
            let p: Vec<f64> = curves.iter().filter_map(|c| c.precision[j]).collect();
            let p = mean_std(&p);
            out.precision.push(p.map(|s| s.0));
            out.precision_std.push(p.map(|s| s.1));
            let r: Vec<f64> = curves.iter().map(|c| c.recall[j]).collect();
            let (m, s) = mean_std(&r).expect("at least one curve");
            out.recall.push(m);
            out.recall_std.push(s);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub counts: Vec<CountResult>,
    pub mean_odd: MeanCurve,
    pub mean_hull: MeanCurve,
    /// R² between the averaged curves.
    pub r2_precision: Option<f64>,
    pub r2_recall: Option<f64>,
    /// Fraction of validation points inside the ground truth.
    pub truth_rate: f64,
    pub runtime: Duration,
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

impl McResult {
    pub fn results_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for c in &self.counts {
            for j in 0..c.odd.thresholds.len() {
                let mut row = vec![
                    c.anchor_count.to_string(),
                    format_real(c.odd.thresholds[j]),
                    opt(c.odd.precision[j]),
                    format_real(c.odd.recall[j]),
                    opt(c.hull.precision[j]),
                    format_real(c.hull.recall[j]),
                ];
                row.resize(RESULTS_COLUMNS.len(), String::new());
                rows.push(row);
            }
        }
        let (o, h) = (&self.mean_odd, &self.mean_hull);
        for j in 0..o.thresholds.len() {
            rows.push(vec![
                "mean".into(),
                format_real(o.thresholds[j]),
                opt(o.precision[j]),
                format_real(o.recall[j]),
                opt(h.precision[j]),
                format_real(h.recall[j]),
                opt(o.precision_std[j]),
                format_real(o.recall_std[j]),
                opt(h.precision_std[j]),
                format_real(h.recall_std[j]),
            ]);
        }
        rows
    }

    pub fn summary_rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .counts
            .iter()
            .map(|c| vec![c.anchor_count.to_string(), opt(c.r2_precision), opt(c.r2_recall)])
            .collect();
        rows.push(vec!["mean".into(), opt(self.r2_precision), opt(self.r2_recall)]);
        rows
    }

    /// Writes `results.csv` and `summary.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_table(&self.results_rows(), &RESULTS_COLUMNS, dir.join("results.csv"))?;
        write_table(&self.summary_rows(), &SUMMARY_COLUMNS, dir.join("summary.csv"))
    }
}

pub fn run_monte_carlo(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let start = Instant::now();
    let n = cfg.dimension();
    let grid = &cfg.threshold_grid;

    let probes = sample_validation(cfg, &mut SampleRng::new(cfg.seed, VALIDATION_STREAM));
    let anchor_sets = cfg
        .anchor_counts
        .iter()
        .map(|&c| {
            let mut rng = SampleRng::new(cfg.seed, c as u64 + 1);
            sample_anchors(&cfg.ground_truth, &cfg.taxonomy_box, &cfg.integer_dimensions, c, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let truth: Vec<bool> = probes
        .par_iter()
        .map(|p| cfg.ground_truth.contains(p))
        .collect::<Result<_>>()?;
    let truth_rate = truth.iter().filter(|&&t| t).count() as f64 / truth.len() as f64;

    let mut counts = Vec::with_capacity(anchor_sets.len());
    for (anchors, &count) in anchor_sets.into_iter().zip(&cfg.anchor_counts) {
        let t0 = Instant::now();
        let hull = ReferenceHull::build(&anchors, &cfg.taxonomy_box)?;
        let (model, report) = derive(&Dataset::new(n, anchors, Vec::new())?, &cfg.derivation)?;
        let affinities = model.affinities(&probes)?;
        let in_hull: Vec<bool> = probes
            .par_iter()
            .map(|p| hull.contains(p))
            .collect::<Result<_>>()?;
        let odd = pr_sweep(&affinities, &truth, grid, Reference::GroundTruth)?;
        let vs_hull = pr_sweep(&affinities, &in_hull, grid, Reference::Hull)?;
        counts.push(CountResult {
            anchor_count: count,
            r2_precision: r_squared(&odd.precision, &vs_hull.precision).ok(),
            r2_recall: r_squared(&present(&odd.recall), &present(&vs_hull.recall)).ok(),
            odd,
            hull: vs_hull,
            hull_vertices: hull.hull().vertices().len(),
            report,
            runtime: t0.elapsed(),
        });
    }

    let mean_odd = MeanCurve::of(&counts.iter().map(|c| &c.odd).collect::<Vec<_>>());
    let mean_hull = MeanCurve::of(&counts.iter().map(|c| &c.hull).collect::<Vec<_>>());
    Ok(McResult {
        r2_precision: r_squared(&mean_odd.precision, &mean_hull.precision).ok(),
        r2_recall: r_squared(&present(&mean_odd.recall), &present(&mean_hull.recall)).ok(),
        counts,
        mean_odd,
        mean_hull,
        truth_rate,
        runtime: start.elapsed(),
    })
}
