use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use splatseg::eval::{
    bench_pipeline, compute_metrics, robustness_experiment, stage_agreement_experiment, ExperimentReport, Matching,
    Summary,
};
use splatseg::io::{self, ViewSet};
use splatseg::labeler::{build_histogram, labels_from_histogram};
use splatseg::raster::render_instance_mask;
use splatseg::refine::refine_mask;
use splatseg::synth::{corrupt_masks, generate_bundle, Corruption, SynthSpec};
use splatseg::{Error, InstanceMask2D};

use crate::{Context, Failure};

type CmdResult = Result<(), Failure>;

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// A closed stdout (`| head`) is not an error.
fn emit<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn create_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `dir/{prefix}{id}.pgm`, or the `.png` sibling when only that exists.
fn mask_path(dir: &Path, prefix: &str, id: &str) -> PathBuf {
    let pgm = dir.join(format!("{prefix}{id}.pgm"));
    let png = dir.join(format!("{prefix}{id}.png"));
    if !pgm.exists() && png.exists() {
        png
    } else {
        pgm
    }
}

fn load_views(cameras: &Path, masks_dir: &Path) -> Result<(ViewSet, Vec<InstanceMask2D>), Error> {
    let views = io::load_cameras(cameras)?;
    let masks = views
        .ids
        .iter()
        .map(|id| io::load_mask(mask_path(masks_dir, "mask_", id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((views, masks))
}

fn provenance_timestamp(now: bool) -> Result<Option<u64>, Error> {
    if now {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        return Ok(Some(secs));
    }
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("SOURCE_DATE_EPOCH `{v}` is not an integer"))),
        Err(_) => Ok(None),
    }
}

pub fn label(ctx: &Context, scene: &Path, cameras: &Path, masks_dir: &Path, output: &Path, stamp: bool) -> CmdResult {
    let scene_data = io::load_scene(scene)?;
    let (views, masks) = load_views(cameras, masks_dir)?;
    let cfg = &ctx.config;
    let start = Instant::now();
    let hist = build_histogram(&scene_data, &views, &masks, &cfg.aggregation, &cfg.raster)?;
    let mut labels = labels_from_histogram(&hist, views.len(), &cfg.aggregation);
    let ms = ms_since(start);
    labels.provenance.timestamp = provenance_timestamp(stamp)?;
    io::save_labels(&labels, &scene_data, output)?;

    let labeled = labels.labels.iter().filter(|&&l| l != 0).count();
    emit(&json!({
        "gaussians": scene_data.len(),
        "instances": labels.num_instances,
        "views": views.len(),
        "votes": hist.total_votes(),
        "labeled": labeled,
        "mode": cfg.aggregation.mode.name(),
        "ms": ms,
        "output": output.display().to_string(),
    }));
    ctx.summary(format!(
        "labeled {labeled}/{} Gaussians with {} instances from {} views in {ms:.1} ms",
        scene_data.len(),
        labels.num_instances,
        views.len()
    ));
    Ok(())
}

#[derive(Serialize)]
struct FrameTiming {
    id: String,
    render_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine_ms: Option<f64>,
}

pub fn render_mask(ctx: &Context, scene: &Path, cameras: &Path, out_dir: &Path, refine: bool) -> CmdResult {
    let (scene_data, labels) = io::load_labeled_scene(scene)?;
    let Some(labels) = labels else {
        return Err(Error::Data(format!(
            "{} has no `{}` property; run `splatseg label` first",
            scene.display(),
            io::INSTANCE_ID_PROPERTY
        ))
        .into());
    };
    let views = io::load_cameras(cameras)?;
    create_dir(out_dir)?;
    let cfg = &ctx.config;
    let mut frames = Vec::with_capacity(views.len());
    for (id, cam) in views.ids.iter().zip(&views.cameras) {
        let start = Instant::now();
        let coarse = render_instance_mask(&scene_data, &labels, cam, &cfg.raster)?;
        let render_ms = ms_since(start);
        io::save_mask(&coarse, out_dir.join(format!("coarse_{id}.pgm")))?;
        let refine_ms = if refine {
            let start = Instant::now();
            let refined = refine_mask(&coarse, None, &cfg.refine);
            let ms = ms_since(start);
            io::save_mask(&refined, out_dir.join(format!("refined_{id}.pgm")))?;
            Some(ms)
        } else {
            None
        };
        frames.push(FrameTiming {
            id: id.clone(),
            render_ms,
            refine_ms,
        });
    }
    let render = Summary::of(&frames.iter().map(|f| f.render_ms).collect::<Vec<_>>());
    let frame = Summary::of(
        &frames
            .iter()
            .map(|f| f.render_ms + f.refine_ms.unwrap_or(0.0))
            .collect::<Vec<_>>(),
    );
    emit(&json!({ "views": frames.len(), "refine": refine, "render": render, "frame": frame, "frames": frames }));
    ctx.summary(format!(
        "rendered {} masks into {} (median {:.1} ms/frame)",
        frames.len(),
        out_dir.display(),
        frame.median_ms
    ));
    Ok(())
}

fn is_mask_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("pgm" | "png")
    )
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

pub fn refine(ctx: &Context, input: &Path, output: &Path) -> CmdResult {
    let pairs: Vec<(PathBuf, PathBuf)> = if input.is_dir() {
        create_dir(output)?;
        list_dir(input)?
            .into_iter()
            .filter(|p| p.is_file() && is_mask_file(p))
            .map(|p| {
                let out = output.join(p.file_name().expect("listed file has a name"));
                (p, out)
            })
            .collect()
    } else {
        vec![(input.to_path_buf(), output.to_path_buf())]
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (src, dst) in &pairs {
        let coarse = io::load_mask(src)?;
        let start = Instant::now();
        let refined = refine_mask(&coarse, None, &ctx.config.refine);
        let ms = ms_since(start);
        io::save_mask(&refined, dst)?;
        let changed = coarse.ids().iter().zip(refined.ids()).filter(|(a, b)| a != b).count();
        rows.push(json!({ "input": src.display().to_string(), "output": dst.display().to_string(), "changed_pixels": changed, "ms": ms }));
    }
    emit(&json!({ "masks": rows }));
    ctx.summary(format!("refined {} masks", pairs.len()));
    Ok(())
}

#[derive(Serialize)]
struct ViewScore {
    id: String,
    miou: f64,
    macc: f64,
    gt_empty: bool,
}

/// Camera ids of `mask_{id}.{pgm,png}` files, numeric ids in numeric order.
fn gt_ids(dir: &Path) -> Result<Vec<(String, PathBuf)>, Error> {
    let mut ids: Vec<(String, PathBuf)> = list_dir(dir)?
        .into_iter()
        .filter(|p| is_mask_file(p))
        .filter_map(|p| {
            let id = p.file_stem()?.to_str()?.strip_prefix("mask_")?.to_string();
            Some((id, p))
        })
        .collect();
    ids.sort_by(|a, b| match (a.0.parse::<u64>(), b.0.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.1.cmp(&b.1)),
        _ => a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)),
    });
    ids.dedup_by(|a, b| a.0 == b.0);
    Ok(ids)
}

pub fn eval(
    ctx: &Context,
    pred_dir: &Path,
    gt_dir: &Path,
    pred_prefix: &str,
    matching: Matching,
    csv: Option<&Path>,
) -> CmdResult {
    let gts = gt_ids(gt_dir)?;
    if gts.is_empty() {
        return Err(Error::Contract(format!("no mask_{{id}}.pgm or .png files in {}", gt_dir.display())).into());
    }
    let mut scores = Vec::with_capacity(gts.len());
    for (id, gt_path) in &gts {
        let gt = io::load_mask(gt_path)?;
        let pred = io::load_mask(mask_path(pred_dir, pred_prefix, id))?;
        let m = compute_metrics(&pred, &gt, matching)?;
        scores.push(ViewScore {
            id: id.clone(),
            miou: m.miou,
            macc: m.macc,
            gt_empty: m.gt_empty,
        });
    }
    let macc = scores.iter().map(|s| s.macc).sum::<f64>() / scores.len() as f64;
    let scored: Vec<f64> = scores.iter().filter(|s| !s.gt_empty).map(|s| s.miou).collect();
    let miou = if scored.is_empty() {
        scores.iter().map(|s| s.miou).fold(1.0, f64::min)
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    if let Some(path) = csv {
        write_text(
            path,
            &ExperimentReport::new("eval", 0, &gt_dir.display().to_string(), &scores).to_csv(),
        )?;
    }
    emit(&json!({ "views": scores.len(), "miou": miou, "macc": macc, "matching": matching, "per_view": scores }));
    ctx.summary(format!("{} views: mIoU {miou:.4}, mAcc {macc:.4}", scores.len()));
    Ok(())
}

pub fn bench(ctx: &Context, scene: &Path, cameras: &Path, masks_dir: &Path, reps: usize) -> CmdResult {
    let scene_data = io::load_scene(scene)?;
    let (views, masks) = load_views(cameras, masks_dir)?;
    let report = bench_pipeline(&scene_data, &views, &masks, &ctx.config, reps)?;
    emit(&report);
    ctx.summary(format!(
        "aggregation {:.1} ms, render {:.2} ms/frame, refine {:.2} ms/frame (medians over {reps} reps)",
        report.aggregation.median_ms, report.render.median_ms, report.refine.median_ms
    ));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn robust(
    ctx: &Context,
    scene: &Path,
    cameras: &Path,
    masks_dir: &Path,
    sizes: &[usize],
    seed: u64,
    reps: usize,
    csv: Option<&Path>,
) -> CmdResult {
    if sizes.is_empty() {
        return Err(Failure::usage("--sizes needs at least one value"));
    }
    let scene_data = io::load_scene(scene)?;
    let (views, masks) = load_views(cameras, masks_dir)?;
    let rows = robustness_experiment(&scene_data, &views, &masks, sizes, seed, reps, &ctx.config)?;
    let report = ExperimentReport::new("robustness", seed, &scene.display().to_string(), &rows);
    if let Some(path) = csv {
        write_text(path, &report.to_csv())?;
    }
    emit(&report);
    for r in &rows {
        ctx.summary(format!(
            "{:>4} views: agreement {:.4}, {:.1} ms",
            r.subset_size, r.agreement, r.ms
        ));
    }
    Ok(())
}

pub fn stage(ctx: &Context, scene: &Path, cameras: &Path, masks_dir: &Path, csv: Option<&Path>) -> CmdResult {
    let scene_data = io::load_scene(scene)?;
    let (views, masks) = load_views(cameras, masks_dir)?;
    let report = stage_agreement_experiment(&scene_data, &views, &masks, &ctx.config)?;
    if let Some(path) = csv {
        let rows = ExperimentReport::new("stage_agreement", 0, &scene.display().to_string(), &report.per_view);
        write_text(path, &rows.to_csv())?;
    }
    emit(&report);
    ctx.summary(format!(
        "stage agreement: mAcc {:.4}, mIoU {:.4}",
        report.macc, report.miou
    ));
    Ok(())
}

pub fn synth(ctx: &Context, spec: Option<&Path>, out: &Path, corrupt: Option<&str>, corrupt_seed: u64) -> CmdResult {
    let spec = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SynthSpec::from_json(&text)?
        }
        None => SynthSpec::standard(),
    };
    let corruption: Option<Corruption> = corrupt
        .map(|c| serde_json::from_str(c).map_err(|e| Error::Config(format!("--corrupt: {e}"))))
        .transpose()?;
    let bundle = generate_bundle(&spec, &ctx.config.raster)?;
    let masks = match corruption {
        Some(model) => corrupt_masks(&bundle.masks, model, corrupt_seed)?,
        None => bundle.masks.clone(),
    };

    let mask_dir = out.join("masks");
    create_dir(&mask_dir)?;
    io::save_scene(&bundle.scene, out.join("scene.ply"))?;
    io::save_labels(&bundle.gt, &bundle.scene, out.join("gt.ply"))?;
    io::save_cameras(&bundle.views, out.join("cameras.json"))?;
    write_text(
        &out.join("spec.json"),
        &serde_json::to_string_pretty(&spec).expect("spec serializes"),
    )?;
    for (id, mask) in bundle.views.ids.iter().zip(&masks) {
        io::save_mask(mask, mask_dir.join(format!("mask_{id}.pgm")))?;
    }
    emit(&json!({
        "gaussians": bundle.scene.len(),
        "instances": bundle.gt.num_instances,
        "views": bundle.views.len(),
        "resolution": spec.resolution,
        "seed": spec.seed,
        "corruption": corruption,
        "out": out.display().to_string(),
    }));
    ctx.summary(format!(
        "wrote {} Gaussians, {} cameras and masks to {}",
        bundle.scene.len(),
        bundle.views.len(),
        out.display()
    ));
    Ok(())
}
