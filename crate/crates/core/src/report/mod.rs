//! Run artifacts: canonical JSON ledgers, stage archives, OBJ meshes and CSV
//! field samples.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::complex::{QuadratureOptions, C};
use crate::lemma::{ErrorRecord, LemmaReport, PropertyLedger, RunStatus};
use crate::planar::{Membership, PlanarRegion};
use crate::theorem::{CauchyPair, LemmaCall, PropernessRow, StepData, TheoremRun};
use crate::weierstrass::{metric, FieldArchive, Immersion, WeierstrassError, WeierstrassField};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error("resolution must be at least 8, got {0}")]
    Resolution(usize),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with every float written to 17 significant digits and keys
/// in sorted order, so equal values give equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn format_float(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign of negative zero out of the ledger.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(item, indent + 1, out);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    fs::write(path, canonical_json(value)?).map_err(io(path))
}

pub fn read_field_archive(path: &Path) -> Result<WeierstrassField, ReportError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let archive: FieldArchive = serde_json::from_str(&text)?;
    Ok(archive.to_field()?)
}

pub fn read_region(path: &Path) -> Result<PlanarRegion, ReportError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Provenance of one command invocation. The ledgers it lists do not
/// contain the wall-clock time, so identical manifests give identical
/// ledger bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub rng_seed: u64,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

/// One stage of a theorem archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFile {
    pub index: usize,
    pub radius: f64,
    pub alpha: f64,
    pub flag: String,
    pub polygon: Vec<C>,
    pub lemma: Option<LemmaCall>,
    pub ledger: PropertyLedger,
    /// Name of the field file next to this one.
    pub field: String,
}

/// Summary of a theorem run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub r1: f64,
    pub planned_stages: usize,
    pub finished_stages: usize,
    pub flag: String,
    pub status: RunStatus,
    pub error: Option<ErrorRecord>,
    pub steps: Vec<StepData>,
    pub properness: Vec<PropernessRow>,
    pub limit_metric: PropertyLedger,
    pub cauchy: Vec<CauchyPair>,
}

impl TheoremSummary {
    pub fn new(run: &TheoremRun) -> Self {
        TheoremSummary {
            r1: run.config.r1,
            planned_stages: run.config.stages,
            finished_stages: run.stages.len(),
            flag: run.flag.to_string(),
            status: run.status,
            error: run.error.clone(),
            steps: run.steps.clone(),
            properness: run.properness.clone(),
            limit_metric: run.limit_metric.clone(),
            cauchy: run.cauchy.clone(),
        }
    }
}

/// Write `stage_<n>.json`, `stage_<n>_field.json` per finished stage and
/// `theorem.json`. Returns the paths written.
pub fn write_stage_archive(dir: &Path, run: &TheoremRun) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for st in &run.stages {
        let field_name = format!("stage_{}_field.json", st.index);
        let file = StageFile {
            index: st.index,
            radius: st.radius,
            alpha: st.alpha,
            flag: run.flag.to_string(),
            polygon: st.polygon.vertices().to_vec(),
            lemma: st.lemma.clone(),
            ledger: st.ledger.clone(),
            field: field_name.clone(),
        };
        let p = dir.join(format!("stage_{}.json", st.index));
        write_json(&p, &file)?;
        written.push(p);
        let f = dir.join(field_name);
        write_json(&f, &FieldArchive::from_field(&st.field))?;
        written.push(f);
    }
    let p = dir.join("theorem.json");
    write_json(&p, &TheoremSummary::new(run))?;
    written.push(p);
    Ok(written)
}

/// Ledger file of a lemma run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaLedgerFile {
    pub report: LemmaReport,
    pub q: Option<Vec<C>>,
}

/// Which scalar is attached to mesh vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Norm,
    Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshOutput {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub scalar: Vec<f64>,
}

/// One grid sample of an exported field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub z: C,
    pub x: Vector3<f64>,
    pub lambda: f64,
}

/// Triangles smaller than this area are dropped.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// Sample the field on a `resolution × resolution` grid over the bounding
/// box of `region`, keeping interior grid points, and triangulate the cells
/// whose triangles lie inside the region.
pub fn sample_grid(
    field: &WeierstrassField,
    region: &PlanarRegion,
    resolution: usize,
    tol: f64,
) -> Result<(Vec<FieldSample>, Vec<[usize; 3]>), ReportError> {
    if resolution < 8 {
        return Err(ReportError::Resolution(resolution));
    }
    let Some((lo, hi)) = region.bbox() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let im = Immersion::new(field, QuadratureOptions::with_tol(tol));
    let step = |k: usize, a: f64, b: f64| a + (b - a) * k as f64 / (resolution - 1) as f64;
    let mut index = vec![None; resolution * resolution];
    let mut samples = Vec::new();
    for j in 0..resolution {
        for i in 0..resolution {
            let z = C::new(step(i, lo.re, hi.re), step(j, lo.im, hi.im));
            if region.contains(z) != Membership::Inside || field.domain.contains(z) != Membership::Inside {
                continue;
            }
            let x = im.at(z)?;
            index[j * resolution + i] = Some(samples.len());
            samples.push(FieldSample {
                z,
                x,
                lambda: metric(field, z)?,
            });
        }
    }
    let mut tris = Vec::new();
    for j in 0..resolution - 1 {
        for i in 0..resolution - 1 {
            let at = |i: usize, j: usize| index[j * resolution + i];
            let cell = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            for t in [[0, 1, 2], [0, 2, 3]] {
                let (Some(a), Some(b), Some(c)) = (cell[t[0]], cell[t[1]], cell[t[2]]) else {
                    continue;
                };
                let (za, zb, zc) = (samples[a].z, samples[b].z, samples[c].z);
                if !(region.contains_segment(za, zb) && region.contains_segment(zb, zc) && region.contains_segment(zc, za)) {
                    continue;
                }
                let area = 0.5 * (samples[b].x - samples[a].x).cross(&(samples[c].x - samples[a].x)).norm();
                if area > DEGENERATE_AREA {
                    tris.push([a, b, c]);
                }
            }
        }
    }
    Ok((samples, tris))
}

pub fn mesh_from_samples(samples: &[FieldSample], triangles: Vec<[usize; 3]>, channel: Channel) -> MeshOutput {
    MeshOutput {
        vertices: samples.iter().map(|s| s.x).collect(),
        triangles,
        scalar: samples
            .iter()
            .map(|s| match channel {
                Channel::Norm => s.x.norm(),
                Channel::Metric => s.lambda,
            })
            .collect(),
    }
}

/// Wavefront OBJ text; the scalar channel is written as a comment per
/// vertex so that standard loaders ignore it.
pub fn to_obj(mesh: &MeshOutput, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# wforge mesh: {} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    let _ = writeln!(out, "o {name}");
    for (v, s) in mesh.vertices.iter().zip(&mesh.scalar) {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        let _ = writeln!(out, "# s {s}");
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// Parse the `v` and `f` lines of an OBJ file written by [`to_obj`].
pub fn parse_obj(text: &str) -> Option<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    let mut vs = Vec::new();
    let mut fs = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.map(|t| t.parse().ok()).collect::<Option<_>>()?;
                if c.len() != 3 {
                    return None;
                }
                vs.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let c: Vec<usize> = it.map(|t| t.parse().ok()).collect::<Option<_>>()?;
                if c.len() != 3 || c.iter().any(|&k| k == 0 || k > vs.len()) {
                    return None;
                }
                fs.push([c[0] - 1, c[1] - 1, c[2] - 1]);
            }
            _ => {}
        }
    }
    Some((vs, fs))
}

pub const CSV_HEADER: &str = "u,v,X1,X2,X3,normX,lambda";

/// CSV with the header [`CSV_HEADER`]; floats use the shortest text that
/// reads back to the same value.
pub fn to_csv(samples: &[FieldSample]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.z.re,
            s.z.im,
            s.x.x,
            s.x.y,
            s.x.z,
            s.x.norm(),
            s.lambda
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::Disk;

    #[test]
    fn canonical_floats_and_sorted_keys() {
        let v = serde_json::json!({"b": 0.1, "a": [1, 2.5, -0.0, null], "c": "x"});
        let s = canonical_json(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.5000000000000000e0"));
        assert!(s.contains("0.0000000000000000e0"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn grid_on_a_disk() {
        let region = PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), 1.0).unwrap());
        let field = WeierstrassField::enneper(region.clone());
        let (samples, tris) = sample_grid(&field, &region, 16, 1e-12).unwrap();
        assert!(samples.len() <= 256 && !samples.is_empty());
        assert!(tris.iter().all(|t| t.iter().all(|&k| k < samples.len())));
        let obj = to_obj(&mesh_from_samples(&samples, tris.clone(), Channel::Norm), "x");
        let (vs, fs) = parse_obj(&obj).unwrap();
        assert_eq!((vs.len(), fs.len()), (samples.len(), tris.len()));
        assert!(matches!(sample_grid(&field, &region, 4, 1e-12), Err(ReportError::Resolution(4))));
    }
}
