//! Pattern corpus files.
//!
//! CSV with header `pattern,label,category,seed,chunk,row,col`, one record per
//! error position. Records of one pattern are contiguous and share `pattern`,
//! `label`, `category` and `seed`; `chunk` is relative to the pattern's oldest
//! chunk.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ErrorPattern;
use crate::error::{Error, Result};
use crate::geometry::{ChunkAddress, Geometry};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    pattern: usize,
    label: String,
    category: u8,
    seed: u64,
    chunk: i64,
    row: usize,
    col: usize,
}

pub fn write_corpus_to(w: impl Write, patterns: &[ErrorPattern]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["pattern", "label", "category", "seed", "chunk", "row", "col"])?;
    for (id, p) in patterns.iter().enumerate() {
        for a in &p.positions {
            out.serialize(Record {
                pattern: id,
                label: p.label.clone(),
                category: p.category,
                seed: p.seed,
                chunk: a.chunk,
                row: a.row,
                col: a.col,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_corpus(path: impl AsRef<Path>, patterns: &[ErrorPattern]) -> Result<()> {
    write_corpus_to(std::fs::File::create(path)?, patterns)
}

/// Parses a corpus and checks every position against `geom`.
pub fn read_corpus_from(r: impl Read, geom: &Geometry) -> Result<Vec<ErrorPattern>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut out: Vec<ErrorPattern> = Vec::new();
    let mut current: Option<(usize, ErrorPattern)> = None;
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if line == 0 && rec.get(0) == Some("pattern") {
            continue;
        }
        let rec: Record = rec.deserialize(None).map_err(|e| Error::Corpus(format!("record {}: {e}", line + 1)))?;
        if !(1..=2).contains(&rec.category) {
            return Err(Error::Corpus(format!("record {}: category {} not 1 or 2", line + 1, rec.category)));
        }
        if rec.row >= geom.rows() || rec.col >= geom.cols() || rec.chunk < 0 {
            return Err(Error::Corpus(format!(
                "record {}: position ({}, {}, {}) outside the geometry",
                line + 1,
                rec.chunk,
                rec.row,
                rec.col
            )));
        }
        let addr = ChunkAddress::new(rec.chunk, rec.row, rec.col);
        match &mut current {
            Some((id, p)) if *id == rec.pattern => {
                if p.category != rec.category || p.seed != rec.seed || p.label != rec.label {
                    return Err(Error::Corpus(format!("record {}: metadata differs within pattern {id}", line + 1)));
                }
                p.positions.push(addr);
            }
            _ => {
                if let Some((_, p)) = current.take() {
                    out.push(ErrorPattern::new(p.positions, p.category, p.seed, p.label));
                }
                let p = ErrorPattern { positions: vec![addr], category: rec.category, seed: rec.seed, label: rec.label };
                current = Some((rec.pattern, p));
            }
        }
    }
    if let Some((_, p)) = current {
        out.push(ErrorPattern::new(p.positions, p.category, p.seed, p.label));
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>, geom: &Geometry) -> Result<Vec<ErrorPattern>> {
    read_corpus_from(std::fs::File::open(path)?, geom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stall::ofec::{gen_cat1, Cat1Size};

    #[test]
    fn roundtrip() {
        let g = Geometry::default();
        let pats = vec![
            gen_cat1(&g, Cat1Size::Minimal, 1).unwrap(),
            gen_cat1(&g, Cat1Size::Enlarged, 2).unwrap(),
            ErrorPattern::new(vec![ChunkAddress::new(4, 0, 31)], 2, 77, "hand"),
        ];
        let mut buf = Vec::new();
        write_corpus_to(&mut buf, &pats).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pattern,label,category,seed,chunk,row,col\n"));
        assert_eq!(read_corpus_from(&buf[..], &g).unwrap(), pats);
    }

    #[test]
    fn empty_corpus() {
        let g = Geometry::default();
        assert!(read_corpus_from(&b""[..], &g).unwrap().is_empty());
        assert!(read_corpus_from(&b"pattern,label,category,seed,chunk,row,col\n"[..], &g).unwrap().is_empty());
    }

    #[test]
    fn malformed_entries_rejected() {
        let g = Geometry::default();
        for bad in [
            "0,x,3,1,0,0,0\n",
            "0,x,1,1,0,128,0\n",
            "0,x,1,1,0,0,32\n",
            "0,x,1,1,-1,0,0\n",
            "0,x,1,1,zero,0,0\n",
            "0,x,1,1,0,0,0\n0,x,2,1,0,1,0\n",
        ] {
            assert!(matches!(read_corpus_from(bad.as_bytes(), &g), Err(Error::Corpus(_))), "{bad}");
        }
    }
}
