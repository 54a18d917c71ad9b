//! On-disk view format.
//!
//! Each matrix file is `PACCVIEW`, u32 version, u64 rows, u64 cols,
//! u32 layer code, then rows × cols little-endian f32 values in row-major
//! order. A directory also holds `labels.csv` and `schema.json`.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncodingInfo, FlowRef, LayerId, LayerSchema, MultiviewDataset, ViewError, ViewMatrix};

pub const VIEW_MAGIC: &[u8; 8] = b"PACCVIEW";
pub const VIEW_VERSION: u32 = 1;
/// Layer code for matrices that are not a protocol view (fused embeddings, weights).
pub const OTHER_LAYER_CODE: u32 = u32::MAX;

const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 4;

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub layer_code: u32,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

pub fn write_matrix(path: &Path, m: &MatrixFile) -> Result<(), ViewError> {
    let file = fs::File::create(path).map_err(|e| ViewError::File { path: path.display().to_string(), source: e })?;
    let mut w = BufWriter::new(file);
    w.write_all(VIEW_MAGIC)?;
    w.write_all(&VIEW_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.cols as u64).to_le_bytes())?;
    w.write_all(&m.layer_code.to_le_bytes())?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile, ViewError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| ViewError::File { path: path.display().to_string(), source: e })?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != VIEW_MAGIC {
        return Err(ViewError::FormatVersionMismatch(format!("{}: not a view file", path.display())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VIEW_VERSION {
        return Err(ViewError::FormatVersionMismatch(format!("{}: version {version}", path.display())));
    }
    let rows = u64_at(12) as usize;
    let cols = u64_at(20) as usize;
    let layer_code = u32_at(28);
    let body = &bytes[HEADER_LEN..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) {
        return Err(ViewError::InvalidData(format!(
            "{}: {rows}x{cols} header but {} body bytes",
            path.display(),
            body.len()
        )));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(MatrixFile { layer_code, rows, cols, data })
}

#[derive(Serialize, Deserialize)]
struct ViewEntry {
    layer: LayerId,
    file: String,
    rows: usize,
    d_f: usize,
    schema: Option<LayerSchema>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    format_version: u32,
    class_count: usize,
    label_names: Vec<String>,
    encoding: Option<EncodingInfo>,
    views: Vec<ViewEntry>,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    row: usize,
    label: usize,
    source: String,
    flow: String,
}

fn view_file_name(i: usize, layer: LayerId) -> String {
    format!("view_{i}_{}.bin", layer.tag())
}

pub fn export_views(ds: &MultiviewDataset, dir: &Path) -> Result<(), ViewError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(ds.m());
    for (i, v) in ds.views.iter().enumerate() {
        let file = view_file_name(i, v.layer);
        write_matrix(
            &dir.join(&file),
            &MatrixFile { layer_code: v.layer.code(), rows: v.rows(), cols: v.cols(), data: v.data().to_vec() },
        )?;
        entries.push(ViewEntry { layer: v.layer, file, rows: v.rows(), d_f: v.cols(), schema: ds.schemas.get(i).cloned() });
    }
    let mut w = csv::Writer::from_path(dir.join("labels.csv")).map_err(csv_err)?;
    for (row, (&label, r)) in ds.labels.iter().zip(&ds.flow_index).enumerate() {
        w.serialize(LabelRow { row, label, source: r.source.clone(), flow: r.flow.clone() }).map_err(csv_err)?;
    }
    w.flush()?;
    let meta = SchemaFile {
        format_version: VIEW_VERSION,
        class_count: ds.class_count,
        label_names: ds.label_names.clone(),
        encoding: ds.encoding.clone(),
        views: entries,
    };
    fs::write(dir.join("schema.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> ViewError {
    ViewError::InvalidData(format!("labels.csv: {e}"))
}

pub fn import_views(dir: &Path) -> Result<MultiviewDataset, ViewError> {
    let schema_path = dir.join("schema.json");
    let text = fs::read_to_string(&schema_path)
        .map_err(|e| ViewError::File { path: schema_path.display().to_string(), source: e })?;
    let meta: SchemaFile = serde_json::from_str(&text)?;
    if meta.format_version != VIEW_VERSION {
        return Err(ViewError::FormatVersionMismatch(format!("schema.json version {}", meta.format_version)));
    }
    let mut views = Vec::with_capacity(meta.views.len());
    let mut schemas = Vec::new();
    for e in &meta.views {
        let m = read_matrix(&dir.join(&e.file))?;
        if m.layer_code != e.layer.code() || m.rows != e.rows || m.cols != e.d_f {
            return Err(ViewError::InvalidData(format!("{} disagrees with schema.json", e.file)));
        }
        views.push(ViewMatrix::new(e.layer, m.rows, m.cols, m.data)?);
        if let Some(s) = &e.schema {
            schemas.push(s.clone());
        }
    }
    let mut labels = Vec::new();
    let mut flow_index = Vec::new();
    let mut r = csv::Reader::from_path(dir.join("labels.csv")).map_err(csv_err)?;
    for (i, rec) in r.deserialize::<LabelRow>().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.row != i {
            return Err(ViewError::InvalidData(format!("labels.csv row {} out of order", rec.row)));
        }
        labels.push(rec.label);
        flow_index.push(FlowRef { source: rec.source, flow: rec.flow });
    }
    let ds = MultiviewDataset {
        views,
        labels,
        class_count: meta.class_count,
        label_names: meta.label_names,
        flow_index,
        schemas,
        encoding: meta.encoding,
    };
    ds.validate()?;
    Ok(ds)
}
