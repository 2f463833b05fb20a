//! File formats: geometry and result JSON, observation and bound CSV,
//! experiment outputs.
//!
//! Floats are written in Rust's shortest round-trip form, so every file
//! reloads to bit-identical values.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::crlb::CrlbReport;
use crate::engine::{CalibrationResult, TraceRecord};
use crate::error::{GardeError, Result};
use crate::geometry::{Geometry, ObservationSet, Point2};
use crate::montecarlo::ExperimentTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryDoc {
    nodes: Vec<PointRecord>,
    sources: Vec<PointRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultDoc {
    nodes: Vec<PointRecord>,
    sources: Vec<PointRecord>,
    selected_sources: Vec<usize>,
    fit_score: f64,
    trace: Vec<TraceRecord>,
}

fn to_records(points: &[Point2]) -> Vec<PointRecord> {
    points
        .iter()
        .enumerate()
        .map(|(id, p)| PointRecord { id, x: p.x, y: p.y })
        .collect()
}

fn from_records(records: &[PointRecord], what: &str) -> Result<Vec<Point2>> {
    let mut out = vec![None; records.len()];
    for r in records {
        let p = Point2::try_new(r.x, r.y)
            .map_err(|_| GardeError::Parse(format!("{what} {}: non-finite coordinate", r.id)))?;
        match out.get_mut(r.id) {
            Some(slot @ None) => *slot = Some(p),
            Some(Some(_)) => return Err(GardeError::Parse(format!("{what}: duplicate id {}", r.id))),
            None => {
                return Err(GardeError::Parse(format!(
                    "{what}: id {} out of range, ids must be 0..{}",
                    r.id,
                    records.len()
                )))
            }
        }
    }
    Ok(out.into_iter().flatten().collect())
}

/// Parses JSON into `T`, reporting the field path of the first violation.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            GardeError::Parse(e.inner().to_string())
        } else {
            GardeError::Parse(format!("{path}: {}", e.inner()))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse_json(&text).map_err(|e| match e {
        GardeError::Parse(m) => GardeError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn geometry_to_json(g: &Geometry) -> String {
    let doc = GeometryDoc {
        nodes: to_records(&g.nodes),
        sources: to_records(&g.sources),
    };
    serde_json::to_string_pretty(&doc).expect("geometry serializes")
}

pub fn geometry_from_json(text: &str) -> Result<Geometry> {
    let doc: GeometryDoc = parse_json(text)?;
    Ok(Geometry::new(
        from_records(&doc.nodes, "nodes")?,
        from_records(&doc.sources, "sources")?,
    ))
}

pub fn result_to_json(r: &CalibrationResult) -> String {
    let doc = ResultDoc {
        nodes: to_records(&r.geometry.nodes),
        sources: to_records(&r.geometry.sources),
        selected_sources: r.selected_sources.clone(),
        fit_score: r.fit_score,
        trace: r.trace.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("result serializes")
}

/// Reads either a plain geometry document or a calibration result; extra
/// result fields are ignored.
pub fn geometry_from_any_json(text: &str) -> Result<Geometry> {
    #[derive(Deserialize)]
    struct Loose {
        nodes: Vec<PointRecord>,
        sources: Vec<PointRecord>,
    }
    let doc: Loose = parse_json(text)?;
    Ok(Geometry::new(
        from_records(&doc.nodes, "nodes")?,
        from_records(&doc.sources, "sources")?,
    ))
}

pub fn result_from_json(text: &str) -> Result<CalibrationResult> {
    let doc: ResultDoc = parse_json(text)?;
    Ok(CalibrationResult {
        geometry: Geometry::new(
            from_records(&doc.nodes, "nodes")?,
            from_records(&doc.sources, "sources")?,
        ),
        selected_sources: doc.selected_sources,
        fit_score: doc.fit_score,
        trace: doc.trace,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow {
    node_id: usize,
    source_id: usize,
    distance_m: f64,
}

/// `node_id,source_id,distance_m`, one row per valid entry in row-major order.
pub fn write_observations<W: Write>(obs: &ObservationSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (n, k, d) in obs.iter_valid() {
        w.serialize(ObservationRow {
            node_id: n,
            source_id: k,
            distance_m: d,
        })
        .map_err(csv_err)?;
    }
    // A set with no valid entries still gets its header.
    if obs.valid_count() == 0 {
        w.write_record(["node_id", "source_id", "distance_m"])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> GardeError {
    GardeError::Parse(e.to_string())
}

/// Reads an observation CSV. Matrix size is taken from the largest ids
/// unless `dims` fixes it; absent pairs are masked.
pub fn read_observations<R: Read>(input: R, dims: Option<(usize, usize)>) -> Result<ObservationSet> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node_id", "source_id", "distance_m"] {
        return Err(GardeError::Parse(format!(
            "expected header node_id,source_id,distance_m, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.deserialize::<ObservationRow>().enumerate() {
        let row = rec.map_err(|e| GardeError::Parse(format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    let (n, k) = match dims {
        Some(d) => d,
        None => (
            rows.iter().map(|r| r.node_id + 1).max().unwrap_or(0),
            rows.iter().map(|r| r.source_id + 1).max().unwrap_or(0),
        ),
    };
    let mut distances = vec![0.0; n * k];
    let mut valid = vec![false; n * k];
    let mut seen = HashSet::new();
    for (i, r) in rows.iter().enumerate() {
        if r.node_id >= n || r.source_id >= k {
            return Err(GardeError::Parse(format!(
                "row {}: pair ({}, {}) outside {n}x{k}",
                i + 2,
                r.node_id,
                r.source_id
            )));
        }
        if !seen.insert((r.node_id, r.source_id)) {
            return Err(GardeError::Parse(format!(
                "row {}: duplicate pair ({}, {})",
                i + 2,
                r.node_id,
                r.source_id
            )));
        }
        distances[r.node_id * k + r.source_id] = r.distance_m;
        valid[r.node_id * k + r.source_id] = true;
    }
    ObservationSet::with_mask(n, k, distances, valid)
}

/// `kind,index,gamma_xx,gamma_yy,gamma_xy,rmse_bound_m`. Positions whose
/// bound failed keep empty gamma fields and an `error:` marker as bound.
pub fn write_crlb<W: Write>(reports: &[&CrlbReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "index", "gamma_xx", "gamma_yy", "gamma_xy", "rmse_bound_m"])
        .map_err(csv_err)?;
    for rep in reports {
        let kind = rep.kind.to_string();
        for entry in &rep.per_position {
            let row = match entry {
                Ok(b) => [
                    kind.clone(),
                    b.index.to_string(),
                    b.gammas.xx.to_string(),
                    b.gammas.yy.to_string(),
                    b.gammas.xy.to_string(),
                    b.rmse_bound.to_string(),
                ],
                Err((i, e)) => [
                    kind.clone(),
                    i.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("error:{}", error_tag(e)),
                ],
            };
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn error_tag(e: &GardeError) -> &'static str {
    match e.root() {
        GardeError::Coincident { .. } => "coincident",
        GardeError::SingularInformation { .. } => "singular",
        _ => "failed",
    }
}

fn write_pairs<A: ToString, B: ToString>(path: &Path, header: [&str; 2], rows: &[(A, B)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for (a, b) in rows {
        w.write_record([a.to_string(), b.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Names of the files [`write_experiment`] creates.
pub const EXPERIMENT_FILES: &[&str] = &[
    "runs.csv",
    "summary.json",
    "cdf_max_error_full.csv",
    "cdf_max_error_subset.csv",
    "error_vs_iterations.csv",
    "error_vs_iterations_annealing.csv",
    "rmse_vs_crlb_nodes.csv",
    "rmse_vs_crlb_sources.csv",
];

/// Writes the run table, the summary and the plot-ready curves into `dir`,
/// which must exist.
pub fn write_experiment(dir: &Path, table: &ExperimentTable) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("runs.csv")).map_err(csv_err)?;
    for r in &table.records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;

    let summary = serde_json::to_string_pretty(&table.summary()).expect("summary serializes");
    fs::write(dir.join("summary.json"), summary + "\n")?;

    let (full, subset) = table.max_error_cdfs();
    write_pairs(&dir.join("cdf_max_error_full.csv"), ["max_error_m", "cdf"], &full)?;
    write_pairs(&dir.join("cdf_max_error_subset.csv"), ["max_error_m", "cdf"], &subset)?;
    write_pairs(
        &dir.join("error_vs_iterations.csv"),
        ["iterations", "mean_calibration_error_m"],
        &table.error_vs_iterations("sweep"),
    )?;
    write_pairs(
        &dir.join("error_vs_iterations_annealing.csv"),
        ["iterations", "mean_calibration_error_m"],
        &table.error_vs_iterations("sweep_annealing"),
    )?;
    let (nodes, sources) = table.rmse_vs_crlb();
    write_pairs(&dir.join("rmse_vs_crlb_nodes.csv"), ["crlb_m", "rmse_m"], &nodes)?;
    write_pairs(&dir.join("rmse_vs_crlb_sources.csv"), ["crlb_m", "rmse_m"], &sources)?;
    Ok(())
}
