use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use seglep::calibrate::{grid_search, SearchSpace};
use seglep::hierarchy::{extract_semantic, quantile_levels};
use seglep::pipeline::{full_hierarchy, segment as run_segment, PipelineConfig};
use seglep::raster::{
    load_image, load_label_map, write_category_map, write_label_map, write_overlay, write_ucm,
};
use serde::{Deserialize, Serialize};

use crate::inputs::{input_error, load_config, load_train_set, Inputs};
use crate::{CalibrateArgs, HierarchyArgs, OverlayArgs, SegmentArgs};

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Timings {
    cues_ms: f64,
    merge_ms: f64,
}

#[derive(Serialize)]
struct SegmentSummary {
    regions: usize,
    lambda: Option<f64>,
    merges: usize,
    monotonicity_violations: usize,
    /// Regions per category.
    groups: BTreeMap<String, usize>,
    timings: Timings,
}

pub fn segment(args: SegmentArgs) -> Result<()> {
    let mut cfg = load_config(args.input.config.as_deref())?;
    if let Some(l) = args.lambda {
        cfg.engine.lambda_stop = Some(l);
    }
    cfg.engine.validate()?;
    if cfg.engine.lambda_stop.is_none() {
        eprintln!("note: no stop threshold given, merging down to one region");
    }
    let inputs = Inputs::load(
        &args.input.image,
        &args.input.semmap,
        args.input.contour.as_deref(),
    )?;
    let t0 = Instant::now();
    let cues = inputs.cues(&cfg)?;
    let cues_ms = ms(t0);
    let t1 = Instant::now();
    let out = run_segment(&cues, &cfg.engine)?;
    let merge_ms = ms(t1);

    let dir = &args.input.out_dir;
    prepare_out_dir(dir)?;
    write_label_map(&out.labels, dir.join("labels.pgm"))?;
    if args.emit_semantic {
        let sem = extract_semantic(&out.labels, &cues.semantic)
            .map_err(seglep::pipeline::PipelineError::from)?;
        write_category_map(&sem.to_label_map(), dir.join("semantic.pgm"))?;
    }
    if args.emit_overlay {
        write_overlay(&inputs.image, &out.labels, dir.join("overlay.ppm"))?;
    }
    let summary = SegmentSummary {
        regions: out.labels.region_count(),
        lambda: cfg.engine.lambda_stop,
        merges: out.events.len(),
        monotonicity_violations: out
            .events
            .iter()
            .filter(|e| e.lambda_raw < e.lambda_star)
            .count(),
        groups: inputs
            .semantic
            .categories()
            .iter()
            .zip(&out.groups)
            .map(|(name, ids)| (name.clone(), ids.len()))
            .collect(),
        timings: Timings { cues_ms, merge_ms },
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub lambda: f64,
    /// Label map path relative to the index file.
    pub file: String,
    pub regions: usize,
}

/// `sweep.json`, written by `hierarchy` and read by `eval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepIndex {
    pub levels: Vec<SweepEntry>,
}

pub fn hierarchy(args: HierarchyArgs) -> Result<()> {
    let cfg = load_config(args.input.config.as_deref())?;
    if let Some(l) = &args.lambdas {
        if l.is_empty() || l.iter().any(|v| !v.is_finite()) || l.windows(2).any(|w| w[0] >= w[1]) {
            return Err(input_error(
                "--lambdas must be finite and strictly increasing",
            ));
        }
    }
    let inputs = Inputs::load(
        &args.input.image,
        &args.input.semmap,
        args.input.contour.as_deref(),
    )?;
    let cues = inputs.cues(&cfg)?;
    let (out, hier) = full_hierarchy(&cues, &cfg.engine)?;
    let lambdas = match args.lambdas {
        Some(l) => l,
        None => quantile_levels(&hier.levels(), args.levels),
    };

    let dir = &args.input.out_dir;
    prepare_out_dir(dir)?;
    write_ucm(
        &hier
            .build_ucm()
            .map_err(seglep::pipeline::PipelineError::from)?,
        dir.join("ucm.bin"),
    )?;
    let events_path = dir.join("events.jsonl");
    let mut events = std::io::BufWriter::new(
        fs::File::create(&events_path)
            .with_context(|| format!("writing {}", events_path.display()))?,
    );
    for e in &out.events {
        serde_json::to_writer(&mut events, e)?;
        events.write_all(b"\n")?;
    }
    events.flush()?;

    let mut index = SweepIndex { levels: Vec::new() };
    for (i, (&lambda, seg)) in lambdas.iter().zip(hier.sweep(&lambdas)).enumerate() {
        let file = format!("level_{i:03}.pgm");
        write_label_map(&seg, dir.join(&file))?;
        index.levels.push(SweepEntry {
            index: i,
            lambda,
            file,
            regions: seg.region_count(),
        });
    }
    write_json(&dir.join("sweep.json"), &index)?;
    println!(
        "{}",
        serde_json::json!({ "merges": out.events.len(), "levels": index.levels.len() })
    );
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let start = load_config(args.config.as_deref())?;
    let space = match &args.space {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| input_error(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<SearchSpace>(&text)
                .map_err(|e| input_error(format!("{}: {e}", p.display())))?
        }
        None => SearchSpace::default(),
    };
    let train = load_train_set(&args.train, &start)?;
    let cal = grid_search(&train, &start.engine, &space, args.objective, args.levels)?;
    let fitted = PipelineConfig {
        engine: cal.config,
        cues: start.cues,
    };
    fitted.save(&args.out)?;
    if let Some(trace) = &args.trace {
        fs::write(trace, cal.trace_csv())
            .with_context(|| format!("writing {}", trace.display()))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "objective": args.objective.name(),
            "score": cal.score,
            "lambda": cal.config.lambda_stop,
            "evaluations": cal.evaluations,
            "samples": train.len(),
        })
    );
    Ok(())
}

pub fn overlay(args: OverlayArgs) -> Result<()> {
    let img =
        load_image(&args.image).with_context(|| format!("reading {}", args.image.display()))?;
    let seg = load_label_map(&args.labels)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    write_overlay(&img, &seg, &args.out)?;
    Ok(())
}
