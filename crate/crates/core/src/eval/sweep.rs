use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{corpus_accuracy, EvalContext, Scenario, SceneSet};
use crate::disambiguation::{BaselineOptions, BaselineResolver};
use crate::targeting::AngleConfig;

/// Coarse phase walks `gaze = point` from `min` to `max`; the fine phase evaluates the full 2-D
/// grid (same step) over the box spanned by the best `fine_peaks` coarse points, widened by
/// `fine_margin` on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub fine_peaks: usize,
    pub fine_margin: f64,
    pub top_k: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { min: 2.0, max: 32.0, step: 3.0, fine_peaks: 2, fine_margin: 3.0, top_k: 5 }
    }
}

impl SweepSpec {
    /// Grid values `min, min+step, ...` not exceeding `max`.
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.max < self.min {
            return Vec::new();
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPhase {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gaze_range: f64,
    pub point_range: f64,
    pub accuracy: f64,
    pub matched: usize,
    pub total: usize,
    pub phase: SweepPhase,
}

impl GridPoint {
    fn rank_cmp(&self, other: &GridPoint) -> std::cmp::Ordering {
        other
            .accuracy
            .total_cmp(&self.accuracy)
            .then((self.gaze_range + self.point_range).total_cmp(&(other.gaze_range + other.point_range)))
            .then(self.gaze_range.total_cmp(&other.gaze_range))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub coarse: Vec<GridPoint>,
    pub fine: Vec<GridPoint>,
    /// Best first: higher accuracy, then smaller range sum, then smaller gaze range.
    pub peaks: Vec<GridPoint>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&GridPoint> {
        self.peaks.first()
    }

    /// Long-form CSV of every evaluated point.
    pub fn heatmap_csv(&self) -> String {
        let mut out = String::from("phase,gaze_range,point_range,accuracy,matched,total\n");
        for p in self.coarse.iter().chain(&self.fine) {
            let phase = if p.phase == SweepPhase::Coarse { "coarse" } else { "fine" };
            let _ = writeln!(out, "{phase},{},{},{:.6},{},{}", p.gaze_range, p.point_range, p.accuracy, p.matched, p.total);
        }
        out
    }
}

fn grid_key(g: f64, p: f64) -> (i64, i64) {
    ((g * 1e6).round() as i64, (p * 1e6).round() as i64)
}

/// Evaluate the corpus at each (gaze, point) pair with the baseline resolver, in parallel.
fn evaluate(
    points: &[(f64, f64)],
    phase: SweepPhase,
    scenarios: &[Scenario],
    scenes: &SceneSet,
    base: &AngleConfig,
    options: &BaselineOptions,
) -> Vec<GridPoint> {
    let resolver = BaselineResolver { options: options.clone() };
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(points.len().max(1));
    let mut results: Vec<Option<GridPoint>> = vec![None; points.len()];
    std::thread::scope(|scope| {
        for (w, chunk) in results.chunks_mut(points.len().div_ceil(workers).max(1)).enumerate() {
            let resolver = &resolver;
            let offset = w * points.len().div_ceil(workers).max(1);
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let (g, p) = points[offset + i];
                    let mut ctx = EvalContext::new(base.with_ranges(g, p), resolver);
                    ctx.lexicon = options.lexicon.clone();
                    let report = corpus_accuracy(scenarios, scenes, &ctx);
                    *slot = Some(GridPoint {
                        gaze_range: g,
                        point_range: p,
                        accuracy: report.overall.accuracy,
                        matched: report.overall.matched,
                        total: report.overall.total,
                        phase,
                    });
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every point evaluated")).collect()
}

pub fn sweep(
    scenarios: &[Scenario],
    scenes: &SceneSet,
    base: &AngleConfig,
    spec: &SweepSpec,
    options: &BaselineOptions,
) -> SweepResult {
    let values = spec.values();
    let diagonal: Vec<(f64, f64)> = values.iter().map(|&v| (v, v)).collect();
    let coarse = evaluate(&diagonal, SweepPhase::Coarse, scenarios, scenes, base, options);

    let mut ranked = coarse.clone();
    ranked.sort_by(GridPoint::rank_cmp);
    let leaders = &ranked[..spec.fine_peaks.min(ranked.len())];
    let mut fine = Vec::new();
    if !leaders.is_empty() {
        let lo = leaders.iter().map(|p| p.gaze_range).fold(f64::INFINITY, f64::min) - spec.fine_margin - 1e-9;
        let hi = leaders.iter().map(|p| p.gaze_range).fold(f64::NEG_INFINITY, f64::max) + spec.fine_margin + 1e-9;
        let window: Vec<f64> = values.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
        let known: BTreeMap<(i64, i64), &GridPoint> = coarse.iter().map(|p| (grid_key(p.gaze_range, p.point_range), p)).collect();
        let mut todo = Vec::new();
        for &g in &window {
            for &p in &window {
                if !known.contains_key(&grid_key(g, p)) {
                    todo.push((g, p));
                }
            }
        }
        fine = evaluate(&todo, SweepPhase::Fine, scenarios, scenes, base, options);
    }

    let mut peaks: Vec<GridPoint> = coarse.iter().chain(&fine).cloned().collect();
    peaks.sort_by(GridPoint::rank_cmp);
    peaks.truncate(spec.top_k.max(1));
    SweepResult { coarse, fine, peaks }
}
