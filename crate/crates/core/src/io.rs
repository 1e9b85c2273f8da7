//! Readers and writers for vector files, id sidecars, qrels, TREC runs and
//! PCA model files. All binary integers are little-endian; text is UTF-8
//! with `\n` line endings.
//!
//! Vector files are a sequence of records `(dim: i32, dim values)`. Values are
//! `f32` unless the path ends in `.f64`, in which case they are `f64`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::{Ranking, ScoredHit};
use crate::matrix::DenseMatrix;
use crate::pca::PcaModel;

pub const MODEL_MAGIC: &[u8; 4] = b"PCAM";
pub const MODEL_VERSION: u32 = 1;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| {
        Error::format(path, format!("byte {}", e.utf8_error().valid_up_to()), "invalid UTF-8")
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Whether `path` uses the 64-bit vector layout.
pub fn is_f64_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "f64")
}

/// Bytes a vector file with `n` records of dimension `dim` occupies.
pub fn vector_file_len(n: usize, dim: usize, f64_values: bool) -> usize {
    let width = if f64_values { 8 } else { 4 };
    n * (4 + width * dim)
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_vectors(path, &bytes, is_f64_path(path))
}

fn parse_vectors(path: &Path, bytes: &[u8], wide: bool) -> Result<DenseMatrix> {
    let width = if wide { 8 } else { 4 };
    let mut values = Vec::new();
    let mut dim: Option<usize> = None;
    let mut offset = 0;
    let mut record = 0;
    while offset < bytes.len() {
        record += 1;
        let header = bytes.get(offset..offset + 4).ok_or_else(|| {
            Error::format(path, format!("byte offset {offset}"), "truncated record header")
        })?;
        let raw = i32::from_le_bytes(header.try_into().unwrap());
        if raw <= 0 {
            return Err(Error::format(
                path,
                format!("record {record}"),
                format!("invalid dimension {raw}"),
            ));
        }
        let rec_dim = raw as usize;
        match dim {
            None => dim = Some(rec_dim),
            Some(d) if d != rec_dim => {
                return Err(Error::format(
                    path,
                    format!("record {record}"),
                    format!("dimension {rec_dim} differs from first record's {d}"),
                ));
            }
            Some(_) => {}
        }
        offset += 4;
        let body_len = rec_dim * width;
        let body = bytes.get(offset..offset + body_len).ok_or_else(|| {
            Error::format(
                path,
                format!("byte offset {}", bytes.len()),
                format!("truncated record {record}: needs {body_len} value bytes at offset {offset}"),
            )
        })?;
        let before = values.len();
        if wide {
            values.extend(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        } else {
            values.extend(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64),
            );
        }
        if values[before..].iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("record {record}"), "non-finite value"));
        }
        offset += body_len;
    }
    let d = dim.unwrap_or(0);
    DenseMatrix::new(record, d, values)
}

/// Writes one record per row. Values are narrowed to `f32` unless the path
/// ends in `.f64`.
pub fn write_vectors(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let wide = is_f64_path(path);
    let d = m.n_cols();
    if m.n_rows() > 0 && (d == 0 || d > i32::MAX as usize) {
        return Err(Error::InvalidArgument(format!("cannot write vectors of dimension {d}")));
    }
    let mut out = Vec::with_capacity(vector_file_len(m.n_rows(), d, wide));
    for row in m.rows() {
        out.extend_from_slice(&(d as i32).to_le_bytes());
        for &v in row {
            if wide {
                out.extend_from_slice(&v.to_le_bytes());
            } else {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "value {v} overflows 32-bit storage"
                    )));
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
    }
    write_file(path, &out)
}

/// Newline-delimited ids: no empty lines, no duplicates, no whitespace.
pub fn read_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let line_no = format!("line {}", i + 1);
        if line.is_empty() {
            return Err(Error::format(path, line_no, "empty id"));
        }
        if line.chars().any(char::is_whitespace) {
            return Err(Error::format(path, line_no, format!("id {line:?} contains whitespace")));
        }
        if !seen.insert(line) {
            return Err(Error::format(path, line_no, format!("duplicate id {line:?}")));
        }
        ids.push(line.to_string());
    }
    Ok(ids)
}

pub fn write_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let mut out = String::new();
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Reads an id sidecar and checks it has one id per vector record.
pub fn read_ids_for(path: impl AsRef<Path>, expected: usize) -> Result<Vec<String>> {
    let path = path.as_ref();
    let ids = read_ids(path)?;
    if ids.len() != expected {
        return Err(Error::format(
            path,
            format!("line {}", ids.len()),
            format!("{} ids for {expected} vectors", ids.len()),
        ));
    }
    Ok(ids)
}

/// TREC qrels: `query_id iteration doc_id grade`. Blank lines are skipped.
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = format!("line {}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let grade: u32 = fields[3].parse().map_err(|_| {
            Error::format(
                path,
                line_no.clone(),
                format!("grade {:?} is not a non-negative integer", fields[3]),
            )
        })?;
        qrels
            .insert(fields[0], fields[2], grade)
            .map_err(|e| Error::format(path, line_no, e.to_string()))?;
    }
    Ok(qrels)
}

pub fn write_qrels(path: impl AsRef<Path>, qrels: &Qrels) -> Result<()> {
    let mut out = String::new();
    for (q, d, g) in qrels.iter() {
        out.push_str(&format!("{q} 0 {d} {g}\n"));
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// TREC run: `query_id Q0 doc_id rank score tag`. Hits are re-sorted by
/// score (ties by doc id); a rank column that disagrees with that order is
/// accepted with a warning. Rankings come back in order of first appearance.
pub fn read_run(path: impl AsRef<Path>) -> Result<Vec<Ranking>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut hits: BTreeMap<String, Vec<(usize, ScoredHit)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = format!("line {}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(Error::format(
                path,
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let rank: usize = fields[3].parse().map_err(|_| {
            Error::format(path, line_no.clone(), format!("bad rank {:?}", fields[3]))
        })?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::format(path, line_no.clone(), format!("bad score {:?}", fields[4])))?;
        let (q, d) = (fields[0].to_string(), fields[2].to_string());
        if !seen.insert((q.clone(), d.clone())) {
            return Err(Error::format(
                path,
                line_no,
                format!("document {d:?} listed twice for query {q:?}"),
            ));
        }
        if !hits.contains_key(&q) {
            order.push(q.clone());
        }
        hits.entry(q).or_default().push((rank, ScoredHit { doc_id: d, score }));
    }
    let mut rankings = Vec::with_capacity(order.len());
    for q in order {
        let mut entries = hits.remove(&q).unwrap_or_default();
        let ranks_ok = entries.windows(2).all(|w| w[0].0 < w[1].0);
        let ranking = Ranking::from_unsorted(q.clone(), entries.iter().map(|(_, h)| h.clone()).collect());
        entries.sort_by_key(|(r, _)| *r);
        let rank_order_matches = ranks_ok
            && entries
                .iter()
                .zip(&ranking.hits)
                .all(|((_, a), b)| a.doc_id == b.doc_id);
        if !rank_order_matches {
            warn!("{}: query {q}: rank field disagrees with score order; re-ranked by score", path.display());
        }
        rankings.push(ranking);
    }
    Ok(rankings)
}

/// Formats one ranking as TREC run lines, ranks starting at 1.
pub fn format_run_lines(r: &Ranking, tag: &str, out: &mut String) {
    use std::fmt::Write as _;
    for (i, h) in r.hits.iter().enumerate() {
        let _ = writeln!(out, "{} Q0 {} {} {:.6} {}", r.query_id, h.doc_id, i + 1, h.score, tag);
    }
}

pub fn write_run(path: impl AsRef<Path>, rankings: &[Ranking], tag: &str) -> Result<()> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("run tag {tag:?} must be a non-empty token")));
    }
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = String::new();
    for r in rankings {
        buf.clear();
        format_run_lines(r, tag, &mut buf);
        w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_pca(model: &PcaModel) -> Vec<u8> {
    let d = model.dim();
    let tag = model.source_tag().as_bytes();
    let mut out = Vec::with_capacity(24 + tag.len() + 8 * d * (d + 1));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&model.fitted_on().to_le_bytes());
    out.extend_from_slice(&(tag.len() as u32).to_le_bytes());
    out.extend_from_slice(tag);
    for v in model.eigenvalues() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    // column-major basis
    let basis = model.basis();
    for col in 0..d {
        for row in 0..d {
            out.extend_from_slice(&basis.get(row, col).to_le_bytes());
        }
    }
    out
}

pub fn save_pca(path: impl AsRef<Path>, model: &PcaModel) -> Result<()> {
    write_file(path.as_ref(), &encode_pca(model))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let slice = self.bytes.get(self.pos..self.pos.saturating_add(n)).ok_or_else(|| {
            Error::format(self.path, format!("byte offset {}", self.pos), format!("truncated {what}"))
        })?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| {
            Error::format(self.path, format!("byte offset {}", self.pos), format!("{what} too large"))
        })?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_pca(path: &Path, bytes: &[u8]) -> Result<PcaModel> {
    let mut c = Cursor { path, bytes, pos: 0 };
    if c.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::format(path, "byte offset 0", "unknown magic, expected PCAM"));
    }
    let version = c.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(path, "byte offset 4", format!("unsupported model version {version}")));
    }
    let d = c.u32("dimension")? as usize;
    let fitted_on = c.u64("fitted_on")?;
    let tag_len = c.u32("tag length")? as usize;
    let tag_at = c.pos;
    let tag = std::str::from_utf8(c.take(tag_len, "source tag")?)
        .map_err(|_| Error::format(path, format!("byte offset {tag_at}"), "source tag is not UTF-8"))?
        .to_string();
    let eigenvalues = c.f64s(d, "eigenvalues")?;
    let column_major = c.f64s(d * d, "basis")?;
    if c.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("byte offset {}", c.pos),
            format!("{} trailing bytes", bytes.len() - c.pos),
        ));
    }
    let mut row_major = vec![0.0; d * d];
    for col in 0..d {
        for row in 0..d {
            row_major[row * d + col] = column_major[col * d + row];
        }
    }
    let basis = DenseMatrix::new(d, d, row_major)
        .map_err(|e| Error::format(path, "basis", e.to_string()))?;
    PcaModel::from_parts(eigenvalues, basis, fitted_on, tag)
        .map_err(|e| Error::format(path, "model", e.to_string()))
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    decode_pca(path, &bytes)
}
