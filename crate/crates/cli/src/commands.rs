use std::path::{Path, PathBuf};

use pdc_core::autodiff::ParamVector;
use pdc_core::fields::{shape_mesh, template_mesh, Model, ShapeField};
use pdc_core::geometry::{chamfer, Family, ShapeSample};
use pdc_core::io::{fmt_g9, format_keypoints, format_labels, load_shape, read_text, write_atomic, Checkpoint};
use pdc_core::losses::LossWeights;
use pdc_core::training::{fit_latent, train_resume, AdamConfig, AdamState, FitConfig, TrainLog, TrainStatus};
use pdc_core::transfer::{transfer_keypoints, transfer_labels, DeformedSurface, KeypointSet, TransferReport};
use pdc_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{generate, keypoint_path, shape_keypoints, Dataset};

pub const CHECKPOINT_FILE: &str = "model.pdck";
pub const LOG_FILE: &str = "log.csv";
pub const PCK_THRESHOLDS: [f64; 2] = [0.05, 0.1];

pub fn cmd_gen(family: Family, count: usize, seed: u64, n_surface: usize, n_query: usize, out: &Path) -> Result<()> {
    let paths = generate(family, count, seed, n_surface, n_query, out)?;
    println!("wrote {} {} shapes to {}", paths.len(), family, out.display());
    Ok(())
}

pub fn cmd_train(config: &Path, resume: bool) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    print!("{}", cfg.echo_text());
    let data = Dataset::load(&cfg.data)?;
    let k = data.parts();
    if cfg.parts.is_some_and(|p| p != k) {
        return Err(Error::domain(format!("config asks for {} parts but the dataset has k={k}", cfg.parts.unwrap())));
    }
    let model_cfg = pdc_core::fields::ModelConfig {
        parts: k,
        shapes: data.shapes.len(),
        ..cfg.model.clone()
    };
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let ckpt_path = cfg.out.join(CHECKPOINT_FILE);
    let log_path = cfg.out.join(LOG_FILE);

    let (model, mut params, mut adam, mut log) = if resume {
        let ck = Checkpoint::load(&ckpt_path)?;
        if ck.config != model_cfg {
            return Err(Error::config(format!(
                "checkpoint {} was trained with a different model or dataset",
                ckpt_path.display()
            )));
        }
        let adam = ck
            .adam
            .clone()
            .ok_or_else(|| Error::Checkpoint("no optimizer state to resume from".into()))?;
        let log = resume_log(&log_path, adam.step as usize)?;
        (ck.model()?, ck.params, adam, log)
    } else {
        let model = Model::new(model_cfg)?;
        let params = model.init(cfg.train.seed);
        let adam = AdamState::new(params.len());
        (model, params, adam, TrainLog::header() + "\n")
    };

    let total = cfg.train.total_steps(data.shapes.len());
    println!("training {} shapes, {} parameters, steps {}..{total}", data.shapes.len(), params.len(), adam.step);
    if adam.step as usize >= total {
        println!("nothing to do: checkpoint is at step {}", adam.step);
    }
    let every = if cfg.checkpoint_every == 0 { total } else { cfg.checkpoint_every };
    while (adam.step as usize) < total {
        let start = adam.step as usize;
        let end = ((start / every + 1) * every).min(total);
        let chunk = pdc_core::training::TrainConfig {
            max_steps: Some(end),
            ..cfg.train
        };
        let out = train_resume(&model, params, adam, &data.shapes, &chunk)?;
        for r in &out.log.rows {
            log.push_str(&TrainLog::csv_row(r));
            log.push('\n');
        }
        params = out.params;
        adam = out.adam;
        save_run(&model, &params, &adam, &log, &ckpt_path, &log_path)?;
        if let Some(last) = out.log.rows.last() {
            println!(
                "step {} total {} rec {} r {}",
                last.step + 1,
                fmt_g9(last.loss.total),
                fmt_g9(last.loss.rec),
                fmt_g9(last.loss.r_mean)
            );
        }
        if let TrainStatus::Aborted { step, reason, .. } = out.status {
            return Err(Error::numerical(format!(
                "training aborted at step {step}: {reason}; last good state saved to {}",
                ckpt_path.display()
            )));
        }
    }
    println!("checkpoint {}\nlog {}", ckpt_path.display(), log_path.display());
    Ok(())
}

fn save_run(model: &Model, params: &ParamVector, adam: &AdamState, log: &str, ckpt: &Path, log_path: &Path) -> Result<()> {
    Checkpoint {
        config: model.config.clone(),
        params: params.clone(),
        adam: Some(adam.clone()),
    }
    .save(ckpt)?;
    write_atomic(log_path, log.as_bytes())
}

/// Log rows of steps before `step`; later rows came from work the checkpoint
/// does not hold.
fn resume_log(path: &Path, step: usize) -> Result<String> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != TrainLog::header() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "not a training log".into(),
        });
    }
    let mut out = format!("{header}\n");
    for (i, line) in lines.enumerate() {
        let s: usize = line.split(',').next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: i + 2,
            msg: "bad step column".into(),
        })?;
        if s < step {
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn cmd_template(checkpoint: &Path, resolution: usize, out: &Path) -> Result<()> {
    if resolution < 2 {
        return Err(Error::config("resolution must be at least 2"));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let mesh = template_mesh(&model, &ck.params, resolution);
    write_atomic(out, mesh.to_obj().as_bytes())?;
    println!(
        "vertices {} faces {} euler {}",
        mesh.vertices.len(),
        mesh.faces.len(),
        mesh.euler_characteristic()
    );
    Ok(())
}

/// Options shared by commands that may fit latent codes.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl FitOptions {
    fn config(&self) -> FitConfig {
        FitConfig {
            steps: self.steps,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            seed: self.seed,
            weights: LossWeights::default(),
            ..FitConfig::default()
        }
    }
}

/// The trained code of shape `index`, or a code fitted to `shape`.
fn shape_code(model: &Model, params: &ParamVector, shape: &ShapeSample, index: Option<usize>, fit: FitOptions) -> Result<Vec<f64>> {
    match index {
        Some(i) if i >= model.config.shapes => Err(Error::config(format!(
            "shape index {i} out of range: the checkpoint holds {} codes",
            model.config.shapes
        ))),
        Some(i) => Ok(model.code(params, i).to_vec()),
        None => {
            let r = fit_latent(model, params, shape, &fit.config())?;
            if r.diverged {
                return Err(Error::numerical("latent fitting produced a non-finite loss"));
            }
            Ok(r.z)
        }
    }
}

fn check_parts(model: &Model, shape: &ShapeSample, path: &Path) -> Result<()> {
    if shape.parts != model.config.parts {
        return Err(Error::domain(format!(
            "{} has k={} but the model expects k={}",
            path.display(),
            shape.parts,
            model.config.parts
        )));
    }
    Ok(())
}

pub fn cmd_fit(checkpoint: &Path, shape_path: &Path, fit: FitOptions, out: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let shape = load_shape(shape_path)?;
    check_parts(&model, &shape, shape_path)?;
    let r = fit_latent(&model, &ck.params, &shape, &fit.config())?;
    if r.diverged {
        return Err(Error::numerical("latent fitting produced a non-finite loss"));
    }
    let text: String = r.z.iter().map(|v| fmt_g9(*v) + "\n").collect();
    write_atomic(out, text.as_bytes())?;
    let (first, best) = (&r.log[0].1, &r.log[r.best_step.min(r.log.len() - 1)].1);
    println!(
        "rec {} -> {} (best at step {})",
        fmt_g9(first.rec),
        fmt_g9(best.rec),
        r.best_step
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttributeKind {
    Keypoints,
    Labels,
}

pub struct TransferArgs<'a> {
    pub checkpoint: &'a Path,
    pub source: &'a Path,
    pub target: &'a Path,
    pub kind: AttributeKind,
    pub n: usize,
    pub source_index: Option<usize>,
    pub target_index: Option<usize>,
    pub source_keypoints: Option<PathBuf>,
    pub target_keypoints: Option<PathBuf>,
    pub fit: FitOptions,
    pub out: Option<PathBuf>,
    pub predicted: Option<PathBuf>,
}

pub fn cmd_transfer(a: &TransferArgs<'_>) -> Result<()> {
    let ck = Checkpoint::load(a.checkpoint)?;
    let model = ck.model()?;
    let src = load_shape(a.source)?;
    let tgt = load_shape(a.target)?;
    check_parts(&model, &src, a.source)?;
    check_parts(&model, &tgt, a.target)?;
    // Fail on missing inputs before spending time on fitting.
    let src_kp = match a.kind {
        AttributeKind::Keypoints => Some(load_kp(a.source, a.source_keypoints.as_deref())?),
        AttributeKind::Labels => None,
    };
    if a.kind == AttributeKind::Labels && src.labels.is_none() {
        return Err(Error::domain(format!("{} carries no part labels", a.source.display())));
    }
    let field = |s: &ShapeSample, i| -> Result<ShapeField> {
        model.shape_field(&ck.params, &shape_code(&model, &ck.params, s, i, a.fit)?)
    };
    let src_field = field(&src, a.source_index)?;
    let tgt_field = field(&tgt, a.target_index)?;
    let tgt_surface = DeformedSurface::new(&tgt, &tgt_field);

    let (report, predicted) = match a.kind {
        AttributeKind::Keypoints => {
            let kp = transfer_keypoints(src_kp.as_ref().expect("loaded"), &src, &src_field, &tgt_surface)?;
            let truth = match &a.target_keypoints {
                Some(p) => Some(pdc_core::io::load_keypoints(p)?),
                None => shape_keypoints(a.target).ok(),
            };
            let report = match truth {
                Some(t) => TransferReport::keypoints(&kp, &t, &PCK_THRESHOLDS)?,
                None => TransferReport::default(),
            };
            (report, format_keypoints(&kp))
        }
        AttributeKind::Labels => {
            let src_surface = DeformedSurface::new(&src, &src_field);
            let labels = src.labels.as_deref().expect("checked");
            let t = transfer_labels(
                &[(&src_surface, labels)],
                &tgt_surface,
                model.config.parts,
                a.n,
                LossWeights::default().uncertainty_gamma,
            )?;
            let report = match &tgt.labels {
                Some(truth) => TransferReport::labels(&t, truth, model.config.parts)?,
                None => TransferReport {
                    uncertainty: t.uncertainty.clone(),
                    ..TransferReport::default()
                },
            };
            (report, format_labels(&t.labels))
        }
    };
    if let Some(p) = &a.predicted {
        write_atomic(p, predicted.as_bytes())?;
    }
    emit(&report.to_csv(), a.out.as_deref())
}

fn load_kp(shape: &Path, explicit: Option<&Path>) -> Result<KeypointSet> {
    let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| keypoint_path(shape));
    pdc_core::io::load_keypoints(&path)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalMetrics {
    pub chamfer: bool,
    pub pck: bool,
    pub miou: bool,
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub data: &'a Path,
    pub metrics: EvalMetrics,
    pub resolution: usize,
    /// Fit fresh codes even when the dataset matches the trained codes.
    pub refit: bool,
    pub n: usize,
    pub fit: FitOptions,
    pub out: Option<PathBuf>,
}

/// Per-shape report. Shape 0 is the transfer source for PCK and mIoU.
pub fn cmd_eval(a: &EvalArgs<'_>) -> Result<()> {
    let ck = Checkpoint::load(a.checkpoint)?;
    let model = ck.model()?;
    let data = Dataset::load(a.data)?;
    for (p, s) in data.paths.iter().zip(&data.shapes) {
        check_parts(&model, s, p)?;
    }
    let trained = !a.refit && data.shapes.len() == model.config.shapes;
    let fields = data
        .shapes
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.shape_field(&ck.params, &shape_code(&model, &ck.params, s, trained.then_some(i), a.fit)?))
        .collect::<Result<Vec<_>>>()?;
    let surfaces: Vec<DeformedSurface> = data.shapes.iter().zip(&fields).map(|(s, f)| DeformedSurface::new(s, f)).collect();
    let src_kp = if a.metrics.pck { Some(shape_keypoints(&data.paths[0])?) } else { None };
    if a.metrics.miou && data.shapes[0].labels.is_none() {
        return Err(Error::domain(format!("{} carries no part labels", data.paths[0].display())));
    }

    let rows = (0..data.shapes.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let s = &data.shapes[i];
            let mut row = Vec::new();
            if a.metrics.chamfer {
                let mesh = shape_mesh(&fields[i], s, a.resolution)?;
                row.push(if mesh.is_empty() {
                    f64::NAN
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                    chamfer(&mesh.sample_points(s.surface.len(), &mut rng), &s.surface)? * 1e3
                });
            }
            if let Some(kp) = &src_kp {
                let pred = transfer_keypoints(kp, &data.shapes[0], &fields[0], &surfaces[i])?;
                let truth = shape_keypoints(&data.paths[i])?;
                row.extend(TransferReport::keypoints(&pred, &truth, &PCK_THRESHOLDS)?.pck.iter().map(|p| p.1));
            }
            if a.metrics.miou {
                let labels = data.shapes[0].labels.as_deref().expect("checked");
                let truth = s
                    .labels
                    .as_deref()
                    .ok_or_else(|| Error::domain(format!("{} carries no part labels", data.paths[i].display())))?;
                let t = transfer_labels(&[(&surfaces[0], labels)], &surfaces[i], model.config.parts, a.n, LossWeights::default().uncertainty_gamma)?;
                row.push(TransferReport::labels(&t, truth, model.config.parts)?.miou.unwrap_or(f64::NAN));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut header = vec!["shape".to_string()];
    if a.metrics.chamfer {
        header.push("chamfer_x1e3".into());
    }
    if a.metrics.pck {
        header.extend(PCK_THRESHOLDS.iter().map(|t| format!("pck@{}", fmt_g9(*t))));
    }
    if a.metrics.miou {
        header.push("miou".into());
    }
    let mut text = header.join(",") + "\n";
    for (p, row) in data.paths.iter().zip(&rows) {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        text.push_str(&name);
        for v in row {
            text.push(',');
            text.push_str(&fmt_g9(*v));
        }
        text.push('\n');
    }
    text.push_str("mean");
    for c in 0..header.len() - 1 {
        let vals: Vec<f64> = rows.iter().map(|r| r[c]).filter(|v| v.is_finite()).collect();
        let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        text.push(',');
        text.push_str(&fmt_g9(mean));
    }
    text.push('\n');
    emit(&text, a.out.as_deref())
}
