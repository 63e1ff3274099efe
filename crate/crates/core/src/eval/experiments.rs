//! Stage agreement, robustness-vs-view-count and timing experiments.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::{compute_metrics, Matching, SegMetrics};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::ViewSet;
use crate::labeler::{aggregate_labels, label_agreement, AgreementScope};
use crate::mask::InstanceMask2D;
use crate::raster::render_instance_mask;
use crate::refine::{refine_assignment_outputs, refine_mask};
use crate::rng::FixtureRng;
use crate::scene::{GaussianScene, LabelAssignment};

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewAgreement {
    pub view: String,
    pub miou: f64,
    pub macc: f64,
    pub gt_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAgreementReport {
    /// Mean pixel accuracy over views.
    pub macc: f64,
    /// Mean mIoU over views whose input mask has an instance.
    pub miou: f64,
    /// No view had any instance; `miou` is then 1.0 only if Stage 2 is empty too.
    pub empty: bool,
    pub per_view: Vec<ViewAgreement>,
}

/// Treats `masks` as ground truth and scores the aggregate -> render ->
/// refine path against them, view by view.
pub fn stage_agreement_experiment(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    config: &PipelineConfig,
) -> Result<StageAgreementReport> {
    let labels = aggregate_labels(scene, views, masks, &config.aggregation, &config.raster)?;
    let mut per_view = Vec::with_capacity(views.len());
    let mut metrics: Vec<SegMetrics> = Vec::with_capacity(views.len());
    for (t, cam) in views.cameras.iter().enumerate() {
        let (_, refined) = refine_assignment_outputs(scene, &labels, cam, &config.raster, &config.refine)?;
        let m = compute_metrics(&refined, &masks[t], Matching::Identity)?;
        per_view.push(ViewAgreement {
            view: views.ids[t].clone(),
            miou: m.miou,
            macc: m.macc,
            gt_empty: m.gt_empty,
        });
        metrics.push(m);
    }
    let macc = metrics.iter().map(|m| m.macc).sum::<f64>() / metrics.len() as f64;
    let scored: Vec<f64> = metrics.iter().filter(|m| !m.gt_empty).map(|m| m.miou).collect();
    let empty = scored.is_empty();
    let miou = if empty {
        metrics.iter().map(|m| m.miou).fold(1.0, f64::min)
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(StageAgreementReport {
        macc,
        miou,
        empty,
        per_view,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub subset_size: usize,
    /// Agreement with the all-views labels over all Gaussians.
    pub agreement: f64,
    /// Median aggregation wall time.
    pub ms: f64,
    pub views: Vec<String>,
}

/// For each size, draws that many views (one seeded sampler, sizes in the
/// given order), aggregates `reps` times and compares against the labels
/// from all views.
pub fn robustness_experiment(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    subset_sizes: &[usize],
    seed: u64,
    reps: usize,
    config: &PipelineConfig,
) -> Result<Vec<RobustnessRow>> {
    if let Some(&bad) = subset_sizes.iter().find(|&&s| s == 0 || s > views.len()) {
        return Err(Error::Contract(format!(
            "subset size {bad} is outside 1..={}",
            views.len()
        )));
    }
    let reps = reps.max(1);
    let full = aggregate_labels(scene, views, masks, &config.aggregation, &config.raster)?;
    let mut rng = FixtureRng::new(seed);
    let mut rows = Vec::with_capacity(subset_sizes.len());
    for &size in subset_sizes {
        let mut picked = rng.sample_indices(views.len(), size);
        picked.sort_unstable();
        let sub_views = views.subset(&picked)?;
        let sub_masks: Vec<InstanceMask2D> = picked.iter().map(|&i| masks[i].clone()).collect();
        let mut times = Vec::with_capacity(reps);
        let mut labels: Option<LabelAssignment> = None;
        for _ in 0..reps {
            let start = Instant::now();
            let l = aggregate_labels(scene, &sub_views, &sub_masks, &config.aggregation, &config.raster)?;
            times.push(elapsed_ms(start));
            labels = Some(l);
        }
        let labels = labels.expect("at least one rep");
        rows.push(RobustnessRow {
            subset_size: size,
            agreement: label_agreement(&full, &labels, AgreementScope::All)?,
            ms: Summary::of(&times).median_ms,
            views: sub_views.ids.clone(),
        });
    }
    Ok(rows)
}

/// Median and nearest-rank 95th percentile of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples: usize,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Summary {
        if samples.is_empty() {
            return Summary {
                median_ms: 0.0,
                p95_ms: 0.0,
                samples: 0,
            };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Summary {
            median_ms: median,
            p95_ms: s[rank - 1].max(median),
            samples: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub gaussians: usize,
    pub reps: usize,
    /// All-view label aggregation, one sample per rep.
    pub aggregation: Summary,
    /// Per-frame label rendering.
    pub render: Summary,
    /// Per-frame refinement.
    pub refine: Summary,
    /// Per-frame render plus refine.
    pub frame: Summary,
}

pub fn bench_pipeline(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    config: &PipelineConfig,
    reps: usize,
) -> Result<BenchReport> {
    if reps < 3 {
        return Err(Error::Config(format!("bench needs at least 3 repetitions, got {reps}")));
    }
    let mut agg = Vec::with_capacity(reps);
    let mut render = Vec::new();
    let mut refine = Vec::new();
    let mut frame = Vec::new();
    for _ in 0..reps {
        let start = Instant::now();
        let labels = aggregate_labels(scene, views, masks, &config.aggregation, &config.raster)?;
        agg.push(elapsed_ms(start));
        for cam in &views.cameras {
            let start = Instant::now();
            let coarse = render_instance_mask(scene, &labels, cam, &config.raster)?;
            let r = elapsed_ms(start);
            let start = Instant::now();
            let refined = refine_mask(&coarse, None, &config.refine);
            let f = elapsed_ms(start);
            std::hint::black_box(refined);
            render.push(r);
            refine.push(f);
            frame.push(r + f);
        }
    }
    let (width, height) = views.resolution();
    Ok(BenchReport {
        views: views.len(),
        width,
        height,
        gaussians: scene.len(),
        reps,
        aggregation: Summary::of(&agg),
        render: Summary::of(&render),
        refine: Summary::of(&refine),
        frame: Summary::of(&frame),
    })
}

/// Machine-readable experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub scene: String,
    pub rows: Vec<Value>,
}

impl ExperimentReport {
    pub fn new<T: Serialize>(experiment: &str, seed: u64, scene: &str, rows: &[T]) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            seed,
            scene: scene.into(),
            rows: rows
                .iter()
                .map(|r| serde_json::to_value(r).expect("row serializes"))
                .collect(),
        }
    }

    /// Scalar columns of the rows as CSV, columns in key order of the first row.
    pub fn to_csv(&self) -> String {
        let Some(Value::Object(first)) = self.rows.first() else {
            return String::new();
        };
        let keys: Vec<&String> = first
            .iter()
            .filter(|(_, v)| !v.is_array() && !v.is_object())
            .map(|(k, _)| k)
            .collect();
        let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = keys
                .iter()
                .map(|k| match row.get(k.as_str()) {
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                    None => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_nearest_rank() {
        let s = Summary::of(&[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(s.median_ms, 3.0);
        assert_eq!(s.p95_ms, 5.0);
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.median_ms, 2.5);
        assert!(s.median_ms <= s.p95_ms);
    }

    #[test]
    fn csv_skips_nested_columns() {
        let rows = vec![RobustnessRow {
            subset_size: 2,
            agreement: 0.5,
            ms: 1.25,
            views: vec!["a".into()],
        }];
        let r = ExperimentReport::new("robustness", 7, "standard", &rows);
        assert_eq!(r.to_csv(), "agreement,ms,subset_size\n0.5,1.25,2\n");
    }
}
