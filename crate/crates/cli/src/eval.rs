//! Scoring predictions against annotators.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use seglep::metrics::{score_partition, Metric, OdsOis, PartitionScores, ScoreSweep};
use seglep::raster::{load_label_map, LabelMap};
use serde::Serialize;

use crate::commands::SweepIndex;
use crate::inputs::{input_error, load_truths};
use crate::{EvalArgs, Format};

/// A single label map counts as a one-level sweep at threshold 0.
fn load_prediction(path: &Path) -> Result<Vec<(f64, LabelMap)>> {
    let read = |p: &Path| load_label_map(p).with_context(|| format!("reading {}", p.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path)
            .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
        let index: SweepIndex = serde_json::from_str(&text)
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        index
            .levels
            .iter()
            .map(|l| Ok((l.lambda, read(&base.join(&l.file))?)))
            .collect()
    } else {
        Ok(vec![(0.0, read(path)?)])
    }
}

#[derive(Serialize)]
struct ImageReport {
    pred: PathBuf,
    annotators: usize,
    scores: Vec<PartitionScores>,
}

#[derive(Serialize)]
struct Summary {
    covering: OdsOis,
    pri: OdsOis,
    voi: OdsOis,
    boundary_f: OdsOis,
}

#[derive(Serialize)]
struct Report {
    thresholds: Vec<f64>,
    images: Vec<ImageReport>,
    summary: Summary,
}

fn score_image(pred: &Path, gt_dir: &Path, tol: Option<f64>) -> Result<(Vec<f64>, ImageReport)> {
    let levels = load_prediction(pred)?;
    let truths = load_truths(gt_dir)?;
    let mut thresholds = Vec::with_capacity(levels.len());
    let mut scores = Vec::with_capacity(levels.len());
    for (t, seg) in &levels {
        thresholds.push(*t);
        scores.push(
            score_partition(seg, &truths, tol)
                .with_context(|| format!("scoring {}", pred.display()))?,
        );
    }
    Ok((
        thresholds,
        ImageReport {
            pred: pred.to_path_buf(),
            annotators: truths.len(),
            scores,
        },
    ))
}

pub fn run(args: EvalArgs) -> Result<()> {
    if args.pred.len() != args.gt_dir.len() {
        return Err(input_error(format!(
            "{} --pred values but {} --gt-dir values",
            args.pred.len(),
            args.gt_dir.len()
        )));
    }
    let scored: Vec<(Vec<f64>, ImageReport)> = args
        .pred
        .par_iter()
        .zip(&args.gt_dir)
        .map(|(p, g)| score_image(p, g, args.tolerance))
        .collect::<Result<_>>()?;
    let thresholds = scored[0].0.clone();
    for (t, img) in &scored {
        let same = t.len() == thresholds.len()
            && t.iter()
                .zip(&thresholds)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(seglep::metrics::MetricError::RaggedSweep(format!(
                "{} uses a different threshold grid than {}",
                img.pred.display(),
                scored[0].1.pred.display()
            ))
            .into());
        }
    }
    let images: Vec<ImageReport> = scored.into_iter().map(|(_, r)| r).collect();
    let summarize = |m: Metric| -> Result<OdsOis> {
        let sweep = ScoreSweep {
            thresholds: thresholds.clone(),
            scores: images
                .iter()
                .map(|r| r.scores.iter().map(|s| s.get(m)).collect())
                .collect(),
        };
        Ok(sweep.ods_ois(m.better())?)
    };
    let summary = Summary {
        covering: summarize(Metric::Covering)?,
        pri: summarize(Metric::Pri)?,
        voi: summarize(Metric::Voi)?,
        boundary_f: summarize(Metric::BoundaryF)?,
    };
    let report = Report {
        thresholds,
        images,
        summary,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => csv(&report),
    };
    match &args.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn csv(report: &Report) -> String {
    let mut out = String::from("pred,threshold,covering,pri,voi,precision,recall,f\n");
    for img in &report.images {
        for (t, s) in report.thresholds.iter().zip(&img.scores) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                img.pred.display(),
                t,
                s.covering,
                s.pri,
                s.voi,
                s.boundary.precision,
                s.boundary.recall,
                s.boundary.f
            )
            .expect("string write");
        }
    }
    out
}
