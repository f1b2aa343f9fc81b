//! Binary and CSV formats for grid functions and projectors.
//!
//! Binary layout (little endian): 8-byte magic, `u32` version, a `u32`-prefixed
//! JSON header, `u64` sample count, then `(f64 re, f64 im)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::csalg::{AlgebraDescriptor, CStarAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::sobolev::{Domain, Fiber, GridFunction, GridSpec};

pub const GRID_MAGIC: &[u8; 8] = b"CLDGRID\0";
pub const MATRIX_MAGIC: &[u8; 8] = b"CLDMATX\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridHeader {
    algebra: AlgebraDescriptor,
    n_u: usize,
    n_y: usize,
    rank: usize,
    spinor: usize,
    half: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixHeader {
    algebra: AlgebraDescriptor,
    rows: usize,
    cols: usize,
}

fn write_blob(w: &mut impl Write, magic: &[u8; 8], header: &impl Serialize, samples: impl ExactSizeIterator<Item = C64>) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    for z in samples {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(b)
}

fn read_blob<H: for<'de> Deserialize<'de>>(r: &mut impl Read, magic: &[u8; 8]) -> Result<(H, Vec<C64>)> {
    if &read_exact::<8>(r)? != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let len = u32::from_le_bytes(read_exact(r)?) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    let header: H = serde_json::from_slice(&json)?;
    let count = u64::from_le_bytes(read_exact(r)?) as usize;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(read_exact(r)?);
        let im = f64::from_le_bytes(read_exact(r)?);
        data.push(C64::new(re, im));
    }
    Ok((header, data))
}

pub fn encode_grid_function(f: &GridFunction) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let header = GridHeader {
        algebra: f.fiber().algebra.descriptor(),
        n_u: f.grid().n_u,
        n_y: f.grid().n_y,
        rank: f.fiber().rank,
        spinor: f.fiber().spinor,
        half: f.domain() == Domain::Half,
    };
    write_blob(&mut out, GRID_MAGIC, &header, f.data().iter().copied())?;
    Ok(out)
}

pub fn decode_grid_function(mut bytes: &[u8]) -> Result<GridFunction> {
    let (h, data): (GridHeader, _) = read_blob(&mut bytes, GRID_MAGIC)?;
    let algebra = CStarAlgebra::from_descriptor(&h.algebra)?;
    let grid = GridSpec::new(h.n_u, h.n_y)?;
    let domain = if h.half { Domain::Half } else { Domain::Torus };
    GridFunction::from_parts(grid, Fiber::new(&algebra, h.rank, h.spinor), domain, data)
}

pub fn write_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_grid_function(f)?)?;
    Ok(w.flush()?)
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_grid_function(&bytes)
}

pub fn encode_matrix(algebra: &CStarAlgebra, m: &CMat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let header = MatrixHeader { algebra: algebra.descriptor(), rows: m.nrows(), cols: m.ncols() };
    let rows = m.nrows();
    let cols = m.ncols();
    let it = (0..rows * cols).map(|k| m[(k / cols, k % cols)]);
    write_blob(&mut out, MATRIX_MAGIC, &header, it)?;
    Ok(out)
}

pub fn decode_matrix(mut bytes: &[u8]) -> Result<(Arc<CStarAlgebra>, CMat)> {
    let (h, data): (MatrixHeader, Vec<C64>) = read_blob(&mut bytes, MATRIX_MAGIC)?;
    if data.len() != h.rows * h.cols {
        return Err(Error::Format("sample count does not match the matrix shape".into()));
    }
    Ok((CStarAlgebra::from_descriptor(&h.algebra)?, CMat::from_row_slice(h.rows, h.cols, &data)))
}

pub fn write_matrix(path: &Path, algebra: &CStarAlgebra, m: &CMat) -> Result<()> {
    std::fs::write(path, encode_matrix(algebra, m)?)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(Arc<CStarAlgebra>, CMat)> {
    decode_matrix(&std::fs::read(path)?)
}

/// `row,col,re,im` for every entry.
pub fn matrix_csv(m: &CMat) -> String {
    let mut s = String::from("row,col,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            s.push_str(&format!("{i},{j},{:.17e},{:.17e}\n", z.re, z.im));
        }
    }
    s
}

/// `u,y,component,re,im` for the samples at y-node `iy`.
pub fn grid_slice_csv(f: &GridFunction, iy: usize) -> Result<String> {
    if iy >= f.grid().n_y {
        return Err(Error::Shape(format!("y index {iy} out of range")));
    }
    let mut s = String::from("u,y,component,re,im\n");
    let y = f.grid().y(iy);
    for iu in 0..f.nu() {
        let u = f.grid().u(iu);
        for (c, z) in f.point(iu, iy).iter().enumerate() {
            s.push_str(&format!("{u:.17e},{y:.17e},{c},{:.17e},{:.17e}\n", z.re, z.im));
        }
    }
    Ok(s)
}

/// Writes rows of numbers with a header line.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}
