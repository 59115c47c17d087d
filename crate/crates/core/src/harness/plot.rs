use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::Serialize;

use super::config::{DatasetSource, ExperimentConfig};
use super::experiment::{load_replicates, replicate_model_seed, resolve_lambda, with_pool};
use crate::ensemble::{fit_potatoes, score_max, train_seeded, Execution, Method};
use crate::error::{Error, Result};
use crate::Autoencoder;

/// Latent grid points on each decoder curve.
pub const CURVE_POINTS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Inlier,
    Outlier,
    Reconstruction,
    /// Decoder image of the latent grid; consecutive points form a polyline.
    Curve,
    /// Marker on one of the three highest-scored inputs.
    Top3,
    /// Marker on an input the member was trained on.
    InTrain,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotPoint {
    pub series: Series,
    /// Data row, if the point belongs to one.
    pub row: Option<usize>,
    /// Separates the curves of several decoders in one panel.
    pub curve: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Panel {
    pub title: String,
    /// Outlier score of every row; empty for panels of single ensemble members.
    pub scores: Vec<f64>,
    /// Rows with the three highest scores, highest first.
    pub top3: Vec<usize>,
    pub points: Vec<PlotPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SineDemo {
    pub labels: Vec<u8>,
    pub panels: Vec<Panel>,
}

fn top3(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(3);
    idx
}

fn inputs(data: &Array2<f64>, labels: &[u8]) -> Vec<PlotPoint> {
    (0..data.nrows())
        .map(|i| PlotPoint {
            series: if labels[i] == 1 { Series::Outlier } else { Series::Inlier },
            row: Some(i),
            curve: 0,
            x: data[[i, 0]],
            y: data[[i, 1]],
        })
        .collect()
}

fn markers(data: &Array2<f64>, rows: &[usize], series: Series) -> Vec<PlotPoint> {
    rows.iter()
        .map(|&i| PlotPoint { series, row: Some(i), curve: 0, x: data[[i, 0]], y: data[[i, 1]] })
        .collect()
}

fn reconstructions(model: &Autoencoder, data: &Array2<f64>) -> Result<Vec<PlotPoint>> {
    let rec = model.forward(data.view())?;
    Ok((0..rec.nrows())
        .map(|i| PlotPoint {
            series: Series::Reconstruction,
            row: Some(i),
            curve: 0,
            x: rec[[i, 0]],
            y: rec[[i, 1]],
        })
        .collect())
}

/// Decoder evaluated on an even grid spanning the encoded data, widened by
/// 10% on each side.
fn curve(model: &Autoencoder, data: &Array2<f64>, id: usize) -> Result<Vec<PlotPoint>> {
    let codes = model.encode(data.view())?;
    let lo = codes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = codes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1e-9);
    let grid = Array2::from_shape_fn((CURVE_POINTS, 1), |(i, _)| {
        lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (CURVE_POINTS - 1) as f64
    });
    let out = model.decode(grid.view())?;
    Ok(out
        .axis_iter(Axis(0))
        .map(|p| PlotPoint { series: Series::Curve, row: None, curve: id, x: p[0], y: p[1] })
        .collect())
}

/// Trains the regularized AE, AE_r0 and a POTATOES model on replicate 0 of
/// a sine experiment and collects everything needed to plot them.
///
/// Seeds match replicate 0 of [`super::run_experiment`] with the same
/// config, so the top-3 markers agree with the scores behind its report.
/// Requires 2-D data and a latent dimension of 1.
pub fn sine_demo(cfg: &ExperimentConfig) -> Result<SineDemo> {
    if !matches!(cfg.dataset, DatasetSource::Sine(_)) {
        return Err(Error::config("the sine demo needs a sine dataset"));
    }
    cfg.validate()?;
    with_pool(cfg.worker_count()?, || demo_in_pool(cfg))?
}

fn demo_in_pool(cfg: &ExperimentConfig) -> Result<SineDemo> {
    let exec = Execution::Parallel;
    let mut one = cfg.clone();
    one.replicates = 1;
    if let Some(super::config::Regularization::Tuned { replicate, .. }) = &mut one.regularization {
        *replicate = 0;
    }
    let ds = load_replicates(&one)?.remove(0);
    if ds.data.ncols() != 2 {
        return Err(Error::config(format!("the sine demo needs 2-D data, got d = {}", ds.data.ncols())));
    }
    if cfg.model.latent != 1 {
        return Err(Error::config("the sine demo needs a latent dimension of 1"));
    }
    let data = &ds.data;
    let spec = cfg.model.spec(2);
    let seed = replicate_model_seed(cfg.seed, 0);
    let mut panels = Vec::new();

    let (lambda, _) = resolve_lambda(&one, std::slice::from_ref(&ds), exec)?;
    let mut singles = vec![(Method::AeR0, 0.0)];
    if let Some(l) = lambda {
        singles.insert(0, (Method::Ae, l));
    }
    for (method, l) in singles {
        let model = train_seeded(data.view(), &spec.clone().with_l2(l), &cfg.train_for(method), seed, 0)?;
        let scores = model.reconstruction_errors(data.view())?;
        let top = top3(&scores);
        let mut points = inputs(data, &ds.labels);
        points.extend(reconstructions(&model, data)?);
        points.extend(curve(&model, data, 0)?);
        points.extend(markers(data, &top, Series::Top3));
        let title = if l > 0.0 { format!("{method} (l2 = {l})") } else { method.to_string() };
        panels.push(Panel { title, scores, top3: top, points });
    }

    let shape = cfg.shape()?;
    let k = if shape.k >= 2 { shape.k } else { 2 };
    let model = fit_potatoes(data.view(), k, &spec, &cfg.train_for(Method::Pot), seed, exec)?;
    let mut errors = Vec::new();
    let mut all_curves = Vec::new();
    for (i, member) in model.members.iter().enumerate() {
        errors.push(member.reconstruction_errors(data.view())?);
        let mut points = inputs(data, &ds.labels);
        points.extend(reconstructions(member, data)?);
        let c = curve(member, data, i)?;
        all_curves.extend(c.iter().cloned());
        points.extend(c);
        points.extend(markers(data, &model.partition.parts()[i], Series::InTrain));
        panels.push(Panel { title: format!("POT member {} of {k}", i + 1), scores: Vec::new(), top3: Vec::new(), points });
    }
    let scores = score_max(&errors)?;
    let top = top3(&scores);
    let mut points = inputs(data, &ds.labels);
    points.extend(all_curves);
    points.extend(markers(data, &top, Series::Top3));
    panels.push(Panel { title: format!("POT (k = {k})"), scores, top3: top, points });

    Ok(SineDemo { labels: ds.labels, panels })
}

impl SineDemo {
    pub fn panel(&self, title_prefix: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.title.starts_with(title_prefix))
    }

    /// One row per plotted point: `panel,series,row,curve,x,y`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(["panel", "series", "row", "curve", "x", "y"]).map_err(err)?;
        for p in &self.panels {
            for q in &p.points {
                let series = serde_json::to_value(q.series).map_err(|e| Error::Serde(e.to_string()))?;
                w.write_record([
                    p.title.clone(),
                    series.as_str().unwrap_or_default().to_string(),
                    q.row.map_or(String::new(), |r| r.to_string()),
                    q.curve.to_string(),
                    q.x.to_string(),
                    q.y.to_string(),
                ])
                .map_err(err)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
            .map_err(|e| Error::Serde(e.to_string()))
    }

    /// Grid of scatter panels. Every non-curve point is one `<circle>`,
    /// every curve one `<polyline>` with one vertex per point.
    pub fn to_svg(&self) -> String {
        const W: f64 = 360.0;
        const H: f64 = 270.0;
        const PAD: f64 = 24.0;
        const COLS: usize = 3;
        let all = self.panels.iter().flat_map(|p| &p.points);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for q in all {
            x0 = x0.min(q.x);
            x1 = x1.max(q.x);
            y0 = y0.min(q.y);
            y1 = y1.max(q.y);
        }
        let (sx, sy) = ((W - 2.0 * PAD) / (x1 - x0).max(1e-9), (H - 2.0 * PAD) / (y1 - y0).max(1e-9));
        let rows = self.panels.len().div_ceil(COLS);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
            W * COLS as f64,
            H * rows as f64
        );
        for (n, p) in self.panels.iter().enumerate() {
            let (ox, oy) = ((n % COLS) as f64 * W, (n / COLS) as f64 * H);
            let px = |x: f64| ox + PAD + (x - x0) * sx;
            let py = |y: f64| oy + H - PAD - (y - y0) * sy;
            let _ = writeln!(s, r##"<g><rect x="{ox}" y="{oy}" width="{W}" height="{H}" fill="white" stroke="#ccc"/>"##);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ox + 6.0, oy + 15.0, p.title);
            let mut curve_ids: Vec<usize> = p.points.iter().filter(|q| q.series == Series::Curve).map(|q| q.curve).collect();
            curve_ids.dedup();
            for id in curve_ids {
                let pts: Vec<String> = p
                    .points
                    .iter()
                    .filter(|q| q.series == Series::Curve && q.curve == id)
                    .map(|q| format!("{:.2},{:.2}", px(q.x), py(q.y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r##"<polyline fill="none" stroke="#2a7" stroke-width="1.5" points="{}"/>"##,
                    pts.join(" ")
                );
            }
            for q in p.points.iter().filter(|q| q.series != Series::Curve) {
                let (r, style) = match q.series {
                    Series::Inlier => (2.5, r##"fill="#37c""##),
                    Series::Outlier => (3.5, r##"fill="#d33""##),
                    Series::Reconstruction => (1.5, r##"fill="#999""##),
                    Series::InTrain => (4.0, r##"fill="none" stroke="#e90""##),
                    Series::Top3 => (7.0, r##"fill="none" stroke="#000" stroke-width="1.5""##),
                    Series::Curve => unreachable!(),
                };
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" {style}/>"#, px(q.x), py(q.y));
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `sine_demo.svg`, `sine_demo.csv` and `sine_demo.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        for (file, body) in [("sine_demo.svg", self.to_svg()), ("sine_demo.csv", self.to_csv()?), ("sine_demo.json", json)] {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
