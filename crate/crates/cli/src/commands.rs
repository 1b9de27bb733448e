use std::path::{Path, PathBuf};

use cpf::anchors::{assign_subregions, build_control_points};
use cpf::cpf::{recover_springs, ContactLabels};
use cpf::hand::{synth_hand, HandParams, SkinnedHand, TsbFrame};
use cpf::io::{read_json, to_json_string, write_json, write_text};
use cpf::labels::{annotate, AffinityAnnotation};
use cpf::metrics::{evaluate, EvalInput, MetricsReport, SampleMetrics};
use cpf::optim::{refine, RefineScene};
use cpf::scene::{load_scene, save_scene, sphere_grasp_with, HandAssets, LoadedScene, PoseRecord, SphereGraspSpec};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::Failure;

pub const FRAMES_SCHEMA: &str = "cpf.tsb_frames/1";
pub const REFINED_POSE: &str = "refined_pose.json";

#[derive(Serialize)]
struct FrameRow {
    joint: usize,
    #[serde(flatten)]
    frame: TsbFrame,
}

#[derive(Serialize)]
struct FrameTable {
    schema: &'static str,
    up: Vector3<f64>,
    frames: Vec<FrameRow>,
}

fn load_hand(cfg: &PipelineConfig) -> Result<SkinnedHand, Failure> {
    Ok(match &cfg.hand_model {
        Some(p) => cpf::hand::load_hand_model(p)?,
        None => synth_hand(&HandParams::default())?,
    })
}

/// Writes `text` to `out/name`, or prints it when no output directory is set.
fn emit(cfg: &PipelineConfig, name: &str, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(dir) => Ok(write_text(&dir.join(name), text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_out(cfg: &PipelineConfig) -> Result<&Path, Failure> {
    cfg.out
        .as_deref()
        .ok_or_else(|| Failure::Usage("--out is required for this command".into()))
}

pub fn frames(cfg: &PipelineConfig) -> Result<(), Failure> {
    let hand = load_hand(cfg)?;
    let table = FrameTable {
        schema: FRAMES_SCHEMA,
        up: hand.up,
        frames: hand
            .frames()
            .iter()
            .enumerate()
            .map(|(joint, f)| FrameRow { joint, frame: *f })
            .collect(),
    };
    emit(cfg, "frames.json", &to_json_string(&table)?)
}

pub fn anchors(cfg: &PipelineConfig) -> Result<(), Failure> {
    let assets = HandAssets::new(load_hand(cfg)?)?;
    emit(cfg, "anchors.json", &assets.anchors.to_json()?)
}

/// Scene directory name; outputs of `refine` and predictions for `eval` are keyed by it.
fn scene_name(manifest: &Path) -> Result<String, Failure> {
    if !manifest.is_file() {
        return Err(Failure::Data(format!("{}: no such scene manifest", manifest.display())));
    }
    let dir = manifest
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::canonicalize(dir)
        .ok()
        .and_then(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()))
        .ok_or_else(|| Failure::Usage(format!("cannot name scene {}", manifest.display())))
}

fn names(scenes: &[PathBuf]) -> Result<Vec<String>, Failure> {
    if scenes.is_empty() {
        return Err(Failure::Usage("no scene manifests given".into()));
    }
    let names = scenes.iter().map(|p| scene_name(p)).collect::<Result<Vec<_>, _>>()?;
    let mut sorted = names.clone();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Failure::Usage(format!(
            "two scenes share the directory name `{}`",
            w[0]
        )));
    }
    Ok(names)
}

fn posed(scene: &LoadedScene, pose: &PoseRecord) -> Result<(cpf::geom::Mesh, cpf::geom::Mesh), Failure> {
    let hand = scene.hand.forward(&pose.hand)?.mesh(&scene.hand);
    Ok((hand, scene.object.transformed(&pose.object)))
}

fn annotate_scene(scene: &LoadedScene, s: f64) -> Result<AffinityAnnotation, Failure> {
    let (hand, object) = posed(scene, &scene.gt)?;
    Ok(annotate(&hand, &object, &scene.anchors, s)?)
}

/// Writes the annotation and its labels next to the manifest and records them in it.
fn store_annotation(manifest_path: &Path, scene: &LoadedScene, ann: &AffinityAnnotation) -> Result<(), Failure> {
    let mut m = scene.manifest.clone();
    let ann_name = "annotation.json";
    let labels_name = "labels.json";
    write_json(&scene.path(ann_name), ann)?;
    write_json(&scene.path(labels_name), &ann.to_labels()?)?;
    m.annotation = Some(ann_name.into());
    m.labels = Some(labels_name.into());
    write_json(manifest_path, &m)?;
    Ok(())
}

pub fn synth(cfg: &PipelineConfig) -> Result<(), Failure> {
    let out = require_out(cfg)?;
    let hand = load_hand(cfg)?;
    let seeds: Vec<u64> = (0..cfg.count as u64).map(|i| cfg.seed + i).collect();
    let lines = seeds
        .par_iter()
        .map(|&seed| {
            let spec = SphereGraspSpec { seed, ..cfg.synth };
            let scene = sphere_grasp_with(HandAssets::new(hand.clone())?, &spec)?;
            let dir = out.join(format!("scene_{seed:04}"));
            let manifest = save_scene(&dir, &scene, Some(spec))?;
            let loaded = load_scene(&manifest)?;
            let ann = annotate_scene(&loaded, cfg.annotation_scale)?;
            store_annotation(&manifest, &loaded, &ann)?;
            Ok(format!(
                "{}: {} contact vertices",
                manifest.display(),
                ann.contact_count()
            ))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    lines.iter().for_each(|l| println!("{l}"));
    Ok(())
}

pub fn annotate_cmd(cfg: &PipelineConfig, scenes: &[PathBuf]) -> Result<(), Failure> {
    let names = names(scenes)?;
    let counts = scenes
        .par_iter()
        .map(|p| {
            let scene = load_scene(p)?;
            let ann = annotate_scene(&scene, cfg.annotation_scale)?;
            store_annotation(p, &scene, &ann)?;
            Ok(ann.contact_count())
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    for (n, c) in names.iter().zip(counts) {
        println!("{n}: {c} contact vertices");
    }
    Ok(())
}

pub fn refine_cmd(cfg: &PipelineConfig, scenes: &[PathBuf]) -> Result<(), Failure> {
    let out = require_out(cfg)?;
    let names = names(scenes)?;
    let lines = scenes
        .par_iter()
        .zip(&names)
        .map(|(p, name)| {
            let scene = load_scene(p)?;
            let labels_name =
                scene.manifest.labels.clone().ok_or_else(|| {
                    Failure::Data(format!("{}: scene has no contact labels; run annotate", p.display()))
                })?;
            let labels: ContactLabels = read_json(&scene.path(&labels_name))?;
            labels.validate()?;
            let (hand0, object0) = posed(&scene, &scene.initial)?;
            let springs = recover_springs(&object0, &hand0, &scene.anchors, &labels, &cfg.cpf)?;
            let geo = cpf::optim::GeoConfig {
                seed: cfg.seed,
                ..cfg.geo
            };
            let r = refine(
                RefineScene {
                    hand: &scene.hand,
                    anchors: &scene.anchors,
                    object: &scene.object,
                    object_pose: &scene.initial.object,
                    hand_pose: &scene.initial.hand,
                },
                &springs,
                &geo,
                cfg.mode,
            )?;
            let dir = out.join(name);
            PoseRecord::new(r.variables.object_pose, r.variables.hand_pose).save(&dir.join(REFINED_POSE))?;
            cpf::geom::write_obj(dir.join("hand.obj"), &r.hand_mesh)?;
            cpf::geom::write_obj(dir.join("object.obj"), &r.object_mesh)?;
            write_json(&dir.join("trace.json"), &r.trace)?;
            Ok(format!(
                "{name}: cost {:.6e} -> {:.6e}",
                r.trace.initial_cost(),
                r.trace.best_cost()
            ))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    lines.iter().for_each(|l| println!("{l}"));
    Ok(())
}

/// Scores `pred/<scene>/refined_pose.json` against each scene's ground truth,
/// or the scene's initial pose when no prediction directory is given.
pub fn eval(cfg: &PipelineConfig, scenes: &[PathBuf], pred: Option<&Path>) -> Result<(), Failure> {
    let names = names(scenes)?;
    let samples = scenes
        .par_iter()
        .zip(&names)
        .map(|(p, name)| {
            let scene = load_scene(p)?;
            let pose = match pred {
                Some(dir) => PoseRecord::load(&dir.join(name).join(REFINED_POSE))?,
                None => scene.initial.clone(),
            };
            let (hand, object) = posed(&scene, &pose)?;
            let (gt_hand, gt_object) = posed(&scene, &scene.gt)?;
            let subregions = assign_subregions(&scene.hand, &build_control_points(&scene.hand)?);
            let metrics = evaluate(
                &EvalInput {
                    hand: &hand,
                    object: &object,
                    gt_hand: &gt_hand,
                    gt_object: &gt_object,
                    subregions: &subregions,
                },
                cfg.siv_resolution,
            )?;
            Ok(SampleMetrics {
                name: name.clone(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let report = MetricsReport::new(samples);
    match &cfg.out {
        Some(dir) => {
            write_json(&dir.join("metrics.json"), &report)?;
            write_text(&dir.join("metrics.csv"), &report.to_csv())?;
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}
