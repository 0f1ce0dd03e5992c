use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMBT";
const VERSION: u32 = 1;

/// Segment id to fixed-length embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        Ok(EmbeddingTable { dim, entries: BTreeMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f32>) -> Result<()> {
        let id = id.into();
        if v.len() != self.dim {
            return Err(Error::Validation(format!("{id}: vector length {} != dim {}", v.len(), self.dim)));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("{id}: non-finite value at position {}", i + 1)));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateKey(id));
        }
        self.entries.insert(id, v);
        Ok(())
    }

    /// Merge another table of the same dim; keys must not collide.
    pub fn extend(&mut self, other: EmbeddingTable) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Validation(format!("dim mismatch {} vs {}", self.dim, other.dim)));
        }
        for (k, v) in other.entries {
            self.insert(k, v)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<embedding writer>", e);
        writeln!(w, "#dim={}", self.dim).map_err(io)?;
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let mut header = vec!["segment_id".to_string()];
        header.extend((1..=self.dim).map(|i| format!("v{i}")));
        wtr.write_record(&header).map_err(|e| Error::csv("embeddings", e))?;
        for (k, v) in &self.entries {
            let mut rec = Vec::with_capacity(self.dim + 1);
            rec.push(k.clone());
            // Shortest repr that round-trips f32 exactly
            rec.extend(v.iter().map(|x| x.to_string()));
            wtr.write_record(&rec).map_err(|e| Error::csv("embeddings", e))?;
        }
        wtr.flush().map_err(io)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<embedding writer>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
        w.write_u32::<LittleEndian>(self.dim as u32).map_err(io)?;
        w.write_u64::<LittleEndian>(self.entries.len() as u64).map_err(io)?;
        for (k, v) in &self.entries {
            w.write_u32::<LittleEndian>(k.len() as u32).map_err(io)?;
            w.write_all(k.as_bytes()).map_err(io)?;
            for &x in v {
                w.write_f32::<LittleEndian>(x).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: String| Error::Format { what: "embedding table".into(), line: 0, msg };
        let io = |e: std::io::Error| bad(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let count = r.read_u64::<LittleEndian>().map_err(io)?;
        let mut table = EmbeddingTable::new(dim)?;
        for _ in 0..count {
            let klen = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut key = vec![0u8; klen];
            r.read_exact(&mut key).map_err(io)?;
            let key = String::from_utf8(key).map_err(|e| bad(e.to_string()))?;
            let mut v = vec![0f32; dim];
            r.read_f32_into::<LittleEndian>(&mut v).map_err(io)?;
            table.insert(key, v)?;
        }
        Ok(table)
    }
}

/// Parse the CSV form: `#dim=D`, a header line, then `segment_id,v1..vD`.
pub fn parse_embedding_csv<R: Read>(reader: R) -> Result<EmbeddingTable> {
    let fmt = |line: u64, msg: String| Error::Format { what: "embedding table".into(), line, msg };
    let mut br = BufReader::new(reader);
    let mut first = String::new();
    br.read_line(&mut first).map_err(|e| fmt(1, e.to_string()))?;
    let dim: usize = first
        .trim()
        .strip_prefix("#dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| fmt(1, format!("expected `#dim=<D>`, got {:?}", first.trim())))?;
    let mut table = EmbeddingTable::new(dim)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(br);
    let headers = rdr.headers().map_err(|e| Error::csv("embedding table", e))?;
    if headers.len() != dim + 1 || headers.get(0) != Some("segment_id") {
        return Err(fmt(2, format!("header must be segment_id followed by {dim} columns")));
    }
    for (i, rec) in rdr.records().enumerate() {
        // line 1 is the dim marker, line 2 the header
        let line = i as u64 + 3;
        let rec = rec.map_err(|e| fmt(line, e.to_string()))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        if rec.len() != dim + 1 {
            return Err(Error::Validation(format!("row {line} ({id}): {} values, expected {dim}", rec.len() - 1)));
        }
        let v = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, s)| s.trim().parse::<f32>().map_err(|_| fmt(line, format!("column {}: not a number: {s:?}", j + 2))))
            .collect::<Result<Vec<f32>>>()?;
        table.insert(id, v)?;
    }
    Ok(table)
}

/// Load a table in either CSV or binary form (detected by magic bytes).
pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let is_binary = f.fill_buf().map_err(|e| Error::io(path, e))?.starts_with(MAGIC);
    if is_binary {
        EmbeddingTable::read_binary(f)
    } else {
        parse_embedding_csv(f)
    }
}

impl EmbeddingTable {
    pub fn save(&self, path: impl AsRef<Path>, binary: bool) -> Result<()> {
        let path = path.as_ref();
        let f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        if binary {
            self.write_binary(f)
        } else {
            self.write_csv(f)
        }
    }
}
