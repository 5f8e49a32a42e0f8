//! `CHFIELD v1` snapshot blocks.
//!
//! One ASCII header line
//!
//! ```text
//! CHFIELD v1 dim=<d> n=<n,...> length=<L,...> [key=value ...] [TAG ...]
//! ```
//!
//! followed by the nodal values as raw little-endian `f64` in row-major
//! order (last axis fastest). Several blocks may be concatenated in one file.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField};

pub const MAGIC: &str = "CHFIELD";
pub const VERSION: &str = "v1";

/// Parsed header of one snapshot block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SnapshotHeader {
    pub n: Vec<usize>,
    pub length: Vec<f64>,
    /// Extra `key=value` tokens in file order.
    pub attrs: Vec<(String, String)>,
    /// Bare tokens such as `STEADY`.
    pub tags: Vec<String>,
}

impl SnapshotHeader {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn attr_f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .attr(key)
            .ok_or_else(|| Error::Format(format!("snapshot header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad number `{raw}` for `{key}`")))
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

/// Formats a float so that parsing it back yields the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

pub fn write_field<W: Write>(
    mut out: W,
    field: &ScalarField,
    attrs: &[(&str, String)],
    tags: &[&str],
) -> Result<()> {
    let grid = field.grid();
    let mut header = format!(
        "{MAGIC} {VERSION} dim={} n={} length={}",
        grid.dim(),
        join(grid.n(), |k| k.to_string()),
        join(grid.length(), |&l| fmt_f64(l)),
    );
    for (key, value) in attrs {
        if key.contains(['=', ' ', '\n']) || value.contains([' ', '\n']) {
            return Err(Error::Format(format!("attribute `{key}` is not a single token")));
        }
        header.push_str(&format!(" {key}={value}"));
    }
    for tag in tags {
        header.push(' ');
        header.push_str(tag);
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;

    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn parse_header(line: &str) -> Result<SnapshotHeader> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(Error::Format(format!("expected `{MAGIC}` header")));
    }
    match tokens.next() {
        Some(VERSION) => {}
        other => {
            return Err(Error::Format(format!("unsupported snapshot version {other:?}")));
        }
    }
    let mut dim = None;
    let mut header = SnapshotHeader::default();
    for token in tokens {
        match token.split_once('=') {
            Some(("dim", d)) => {
                dim = Some(d.parse::<usize>().map_err(|_| Error::Format(format!("bad dim `{d}`")))?)
            }
            Some(("n", list)) => {
                header.n = list
                    .split(',')
                    .map(|x| x.parse().map_err(|_| Error::Format(format!("bad n `{list}`"))))
                    .collect::<Result<_>>()?
            }
            Some(("length", list)) => {
                header.length = list
                    .split(',')
                    .map(|x| x.parse().map_err(|_| Error::Format(format!("bad length `{list}`"))))
                    .collect::<Result<_>>()?
            }
            Some((k, v)) => header.attrs.push((k.to_string(), v.to_string())),
            None => header.tags.push(token.to_string()),
        }
    }
    let dim = dim.ok_or_else(|| Error::Format("snapshot header lacks dim".into()))?;
    if header.n.len() != dim || header.length.len() != dim {
        return Err(Error::Format(format!(
            "dim={dim} disagrees with n={:?} length={:?}",
            header.n, header.length
        )));
    }
    Ok(header)
}

/// Reads one block. Returns `Ok(None)` at a clean end of input.
pub fn read_field<R: BufRead>(mut input: R) -> Result<Option<(ScalarField, SnapshotHeader)>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    let header = parse_header(line.trim_end_matches('\n'))?;
    let grid = Grid::new(&header.n, &header.length)?;
    let mut bytes = vec![0u8; grid.len() * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated snapshot payload: {e}")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Some((ScalarField::new(&grid, values)?, header)))
}

/// Reads every block of a file.
pub fn read_all<R: BufRead>(mut input: R) -> Result<Vec<(ScalarField, SnapshotHeader)>> {
    let mut blocks = Vec::new();
    while let Some(block) = read_field(&mut input)? {
        blocks.push(block);
    }
    Ok(blocks)
}
