//! The three subcommands as library functions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cpn_core::eval::{build_report, EvalDet, EvalGt, EvalReport};
use cpn_core::synth::CorpusConfig;
use cpn_core::{detect, ImageOutput, PipelineConfig};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::formats::{
    bbox_of, xywh, Annotation, Category, DetectionRecord, GroundTruthFile, ImageInfo, Manifest,
    ManifestEntry, PipelineConfigFile, SceneBox, SceneGt, SynthConfigFile,
};
use crate::io::{self, read_json, write_json};
use crate::report::{report_json, report_text};

pub fn load_pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let file: PipelineConfigFile = match path {
        Some(p) => read_json(p)?,
        None => PipelineConfigFile::default(),
    };
    let cfg = file.resolve();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_synth_config(path: Option<&Path>) -> Result<CorpusConfig> {
    let file: SynthConfigFile = match path {
        Some(p) => read_json(p)?,
        None => SynthConfigFile::default(),
    };
    let cfg = file.resolve();
    cfg.scene.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub image_id: u64,
    pub output: ImageOutput,
    pub seconds: f64,
}

/// Run the pipeline over every scene of a corpus on `workers` threads.
/// Results come back in corpus order whatever the worker count.
pub fn run_corpus(corpus: &Path, cfg: &PipelineConfig, workers: usize) -> Result<Vec<ImageResult>> {
    let scenes = io::list_scenes(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let results: Vec<Result<ImageResult>> = pool.install(|| {
        scenes
            .par_iter()
            .map(|(image_id, dir)| {
                let inputs = io::read_scene(dir)?;
                let start = Instant::now();
                let output = detect(&inputs.heatmaps, &inputs.features, &inputs.weights, cfg)
                    .map_err(|source| CliError::File {
                        path: dir.clone(),
                        source,
                    })?;
                Ok(ImageResult {
                    image_id: *image_id,
                    output,
                    seconds: start.elapsed().as_secs_f64(),
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

pub fn detection_records(results: &[ImageResult]) -> Vec<DetectionRecord> {
    results
        .iter()
        .flat_map(|r| {
            r.output.detections.iter().map(move |d| DetectionRecord {
                image_id: r.image_id,
                category_id: d.class_id as u64,
                bbox: xywh(&d.bbox),
                score: d.score,
            })
        })
        .collect()
}

/// Every enumerated proposal, scored by objectness, labelled with its
/// corner class.
pub fn proposal_records(results: &[ImageResult]) -> Vec<DetectionRecord> {
    results
        .iter()
        .flat_map(|r| {
            r.output.proposals.iter().map(move |p| DetectionRecord {
                image_id: r.image_id,
                category_id: p.proposal.class_id as u64,
                bbox: xywh(&p.proposal.bbox),
                score: p.objectness,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DetectArgs {
    pub corpus: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub proposals: Option<PathBuf>,
    pub workers: usize,
}

pub fn cmd_detect(args: &DetectArgs) -> Result<Vec<ImageResult>> {
    let cfg = load_pipeline_config(args.config.as_deref())?;
    let results = run_corpus(&args.corpus, &cfg, args.workers)?;
    write_json(&args.out, &detection_records(&results))?;
    if let Some(path) = &args.proposals {
        write_json(path, &proposal_records(&results))?;
    }
    Ok(results)
}

/// Generate `count` verified scenes under `out`. The manifest is removed
/// first and written last, so its presence marks a complete corpus.
pub fn cmd_synth(config: Option<&Path>, out: &Path, count: usize, seed: u64) -> Result<Manifest> {
    let cfg = load_synth_config(config)?;
    io::create_dir(out)?;
    let manifest_path = out.join(io::MANIFEST);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|source| CliError::Io {
            path: manifest_path.clone(),
            source,
        })?;
    }
    let (height, width) = cfg.scene.image_size;
    let scenes: Vec<Result<SceneGt>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (scene, bundle) = cfg.scene(seed, i)?;
            let dir = out.join(io::scene_dir_name(i));
            io::write_scene(&dir, &bundle)?;
            let gt = SceneGt {
                image_id: i as u64,
                seed: scene.seed,
                width,
                height,
                boxes: scene
                    .gts
                    .iter()
                    .map(|g| SceneBox {
                        class_id: g.class_id,
                        bbox: xywh(&g.bbox),
                    })
                    .collect(),
            };
            write_json(&dir.join(io::SCENE_GT), &gt)?;
            Ok(gt)
        })
        .collect();
    let scenes = scenes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut gt_file = GroundTruthFile {
        categories: (0..cfg.scene.num_classes)
            .map(|c| Category {
                id: c as u64,
                name: format!("class_{c}"),
            })
            .collect(),
        ..GroundTruthFile::default()
    };
    for s in &scenes {
        gt_file.images.push(ImageInfo {
            id: s.image_id,
            width,
            height,
            file_name: Some(io::scene_dir_name(s.image_id as usize)),
        });
        for b in &s.boxes {
            gt_file.annotations.push(Annotation {
                id: gt_file.annotations.len() as u64 + 1,
                image_id: s.image_id,
                category_id: b.class_id as u64,
                bbox: b.bbox,
                area: b.bbox[2] * b.bbox[3],
            });
        }
    }
    write_json(&out.join(io::GROUND_TRUTH), &gt_file)?;

    let manifest = Manifest {
        seed,
        num_classes: cfg.scene.num_classes,
        image_size: [height, width],
        scenes: scenes
            .iter()
            .map(|s| ManifestEntry {
                image_id: s.image_id,
                dir: io::scene_dir_name(s.image_id as usize),
                seed: s.seed,
                boxes: s.boxes.len(),
            })
            .collect(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}

fn eval_dets(records: &[DetectionRecord], path: &Path) -> Result<Vec<EvalDet>> {
    records
        .iter()
        .map(|r| {
            if !r.score.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: non-finite score for image {}",
                    path.display(),
                    r.image_id
                )));
            }
            Ok(EvalDet {
                image_id: r.image_id,
                category_id: r.category_id,
                bbox: bbox_of(&r.bbox).map_err(|source| CliError::File {
                    path: path.to_path_buf(),
                    source,
                })?,
                score: r.score,
            })
        })
        .collect()
}

/// Library-level evaluation of parsed documents.
pub fn evaluate(
    dets: &[DetectionRecord],
    proposals: Option<&[DetectionRecord]>,
    gt: &GroundTruthFile,
) -> Result<EvalReport> {
    let images: Vec<u64> = gt.images.iter().map(|i| i.id).collect();
    let gts = gt
        .annotations
        .iter()
        .map(|a| {
            Ok(EvalGt {
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: bbox_of(&a.bbox)?,
            })
        })
        .collect::<cpn_core::Result<Vec<_>>>()?;
    let dets = eval_dets(dets, Path::new("detections"))?;
    let props = proposals
        .map(|p| eval_dets(p, Path::new("proposals")))
        .transpose()?;
    Ok(build_report(&images, &dets, props.as_deref(), &gts)?)
}

/// Text-table path that accompanies a JSON report path.
pub fn text_report_path(report: &Path) -> PathBuf {
    let txt = report.with_extension("txt");
    if txt == report {
        report.with_extension("table.txt")
    } else {
        txt
    }
}

pub fn cmd_eval(dets: &Path, gt: &Path, report: &Path, proposals: Option<&Path>) -> Result<EvalReport> {
    let records: Vec<DetectionRecord> = read_json(dets)?;
    let props: Option<Vec<DetectionRecord>> = proposals.map(read_json).transpose()?;
    let gt_file: GroundTruthFile = read_json(gt)?;
    let r = evaluate(&records, props.as_deref(), &gt_file)?;
    let write = |path: &Path, text: String| {
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write(report, report_json(&r))?;
    write(&text_report_path(report), report_text(&r))?;
    Ok(r)
}
