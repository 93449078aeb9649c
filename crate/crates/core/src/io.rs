//! File formats: grid functions (binary or JSON), kernel tables with a JSON
//! sidecar, and decomposition directories with a manifest.
//!
//! Binary grid-function layout: the 8-byte magic `CZGRID01`, a little-endian
//! `u32` header length, the JSON header `{n, K, m, hermitian, psd}`, then
//! `f64` little-endian `(re, im)` pairs with cells in row-major order and each
//! matrix row-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::czdecomp::CZParts;
use crate::dyadic::TorusGrid;
use crate::error::{CzError, Result};
use crate::matfun::GridFunction;
use crate::singint::{KernelOperator, KernelTable};
use crate::{Mat, C64};

pub const GRID_MAGIC: &[u8; 8] = b"CZGRID01";

/// Header shared by both grid-function encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    #[serde(rename = "K")]
    pub depth: u32,
    pub m: usize,
    pub hermitian: bool,
    pub psd: bool,
}

/// JSON encoding: header fields plus a flat list of `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridJson {
    #[serde(flatten)]
    pub header: GridHeader,
    pub values: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Binary,
    Json,
}

impl Encoding {
    /// `.json` selects JSON; everything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Encoding::Json,
            _ => Encoding::Binary,
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CzError::Format(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn header_of(f: &GridFunction) -> GridHeader {
    GridHeader { n: f.grid().n(), depth: f.grid().depth(), m: f.m(), hermitian: f.is_hermitian(), psd: f.is_psd() }
}

fn flat_values(f: &GridFunction) -> impl Iterator<Item = C64> + '_ {
    let m = f.m();
    f.values().iter().flat_map(move |v| (0..m * m).map(move |e| v[(e / m, e % m)]))
}

fn rebuild(header: GridHeader, flat: Vec<C64>) -> Result<GridFunction> {
    let grid = TorusGrid::new(header.n, header.depth)?;
    let m = header.m;
    if m == 0 {
        return Err(CzError::Format("matrix size 0 in header".into()));
    }
    let want = grid.cell_count() * m * m;
    if flat.len() != want {
        return Err(CzError::Format(format!("expected {want} complex entries, found {}", flat.len())));
    }
    let vals = flat.chunks(m * m).map(|c| Mat::from_row_slice(m, m, c)).collect();
    let f = GridFunction::new(grid, m, vals)?;
    if header.psd {
        f.with_psd()
    } else if header.hermitian {
        f.with_hermitian()
    } else {
        Ok(f)
    }
}

pub fn encode_binary(f: &GridFunction) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&header_of(f))?;
    let mut out = Vec::with_capacity(12 + header.len() + 16 * f.grid().cell_count() * f.m() * f.m());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for z in flat_values(f) {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<GridFunction> {
    if bytes.len() < 12 || &bytes[..8] != GRID_MAGIC {
        return Err(CzError::Format("missing grid-function magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12 + hlen..).ok_or_else(|| CzError::Format("truncated header".into()))?;
    let header: GridHeader = serde_json::from_slice(&bytes[12..12 + hlen])?;
    if body.len() % 16 != 0 {
        return Err(CzError::Format("payload is not a whole number of complex entries".into()));
    }
    let flat = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    rebuild(header, flat)
}

pub fn encode_json(f: &GridFunction) -> Result<Vec<u8>> {
    let doc = GridJson { header: header_of(f), values: flat_values(f).map(|z| [z.re, z.im]).collect() };
    Ok(serde_json::to_vec(&doc)?)
}

pub fn decode_json(bytes: &[u8]) -> Result<GridFunction> {
    let doc: GridJson = serde_json::from_slice(bytes)?;
    rebuild(doc.header, doc.values.into_iter().map(|[re, im]| C64::new(re, im)).collect())
}

pub fn write_grid_function(path: &Path, f: &GridFunction, encoding: Encoding) -> Result<()> {
    let bytes = match encoding {
        Encoding::Binary => encode_binary(f)?,
        Encoding::Json => encode_json(f)?,
    };
    atomic_write(path, &bytes)
}

/// Reads either encoding, recognized by the magic bytes.
pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(GRID_MAGIC) {
        decode_binary(&bytes)
    } else {
        decode_json(&bytes)
    }
}

/// Kernel table storage layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelForm {
    /// One value per offset cell.
    Convolution,
    /// Full `N × N` matrix, row-major.
    Dense,
}

/// JSON sidecar of a kernel table file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub n: usize,
    #[serde(rename = "K")]
    pub depth: u32,
    pub form: KernelForm,
    pub gamma: f64,
    pub epsilon: f64,
}

/// Sidecar path: the table path with `.json` appended.
pub fn sidecar_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the table as `f64` little-endian `(re, im)` pairs plus its sidecar.
pub fn write_kernel(path: &Path, op: &KernelOperator) -> Result<()> {
    let table = op.table().ok_or_else(|| CzError::Unsupported("multiplier operators have no kernel table".into()))?;
    let (form, vals) = match table {
        KernelTable::Convolution(v) => (KernelForm::Convolution, v),
        KernelTable::Dense(v) => (KernelForm::Dense, v),
    };
    let mut bytes = Vec::with_capacity(16 * vals.len());
    for z in vals {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    let side = KernelSidecar {
        n: op.grid().n(),
        depth: op.grid().depth(),
        form,
        gamma: op.gamma(),
        epsilon: op.epsilon().unwrap_or(0.0),
    };
    atomic_write(path, &bytes)?;
    atomic_write(&sidecar_path(path), &serde_json::to_vec_pretty(&side)?)
}

pub fn read_kernel(path: &Path) -> Result<KernelOperator> {
    let side: KernelSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(CzError::Format("kernel payload is not a whole number of complex entries".into()));
    }
    let vals: Vec<C64> = bytes
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    let grid = TorusGrid::new(side.n, side.depth)?;
    let table = match side.form {
        KernelForm::Convolution => KernelTable::Convolution(vals),
        KernelForm::Dense => KernelTable::Dense(vals),
    };
    KernelOperator::explicit(&grid, table, side.gamma, side.epsilon)
}

/// One entry of a decomposition manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceEntry {
    pub k: u32,
    pub s: u32,
    pub file: String,
}

/// `manifest.json` of a decomposition directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzManifest {
    pub n: usize,
    #[serde(rename = "K")]
    pub depth: u32,
    pub m: usize,
    pub lambda: f64,
    pub f: String,
    pub g: String,
    pub b: String,
    pub g_d: String,
    pub b_d: String,
    pub q: Vec<String>,
    pub gks: Vec<PieceEntry>,
    pub bks: Vec<PieceEntry>,
}

/// Writes every piece of `parts` as a binary grid function under `dir`
/// together with `manifest.json`.
pub fn write_cz_parts(dir: &Path, parts: &CZParts) -> Result<CzManifest> {
    fs::create_dir_all(dir)?;
    let put = |name: String, f: &GridFunction| -> Result<String> {
        write_grid_function(&dir.join(&name), f, Encoding::Binary)?;
        Ok(name)
    };
    let grid = parts.grid();
    let q = parts
        .cuculescu()
        .qs()
        .iter()
        .enumerate()
        .map(|(k, q)| put(format!("q_{k}.czg"), q.function()))
        .collect::<Result<_>>()?;
    let pieces = |map: &std::collections::BTreeMap<(u32, u32), GridFunction>, tag: &str| -> Result<Vec<PieceEntry>> {
        map.iter().map(|(&(k, s), f)| Ok(PieceEntry { k, s, file: put(format!("{tag}_{k}_{s}.czg"), f)? })).collect()
    };
    let manifest = CzManifest {
        n: grid.n(),
        depth: grid.depth(),
        m: parts.f().m(),
        lambda: parts.lambda(),
        f: put("f.czg".into(), parts.f())?,
        g: put("g.czg".into(), parts.g())?,
        b: put("b.czg".into(), parts.b())?,
        g_d: put("g_d.czg".into(), parts.g_d())?,
        b_d: put("b_d.czg".into(), parts.b_d())?,
        q,
        gks: pieces(parts.gks(), "gks")?,
        bks: pieces(parts.bks(), "bks")?,
    };
    atomic_write(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CzManifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?)
}
