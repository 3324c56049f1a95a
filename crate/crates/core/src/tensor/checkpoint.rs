//! Named-tensor checkpoint files.
//!
//! Layout: the line `EPVX1`, then per tensor a header line `name d0 d1 ... ;`
//! followed by the values as little-endian f64.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &str = "EPVX1";

/// Ordered list of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn to_writer(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        for (name, t) in &self.tensors {
            if name.is_empty() || name.contains(char::is_whitespace) || name.contains(';') {
                return Err(Error::InvalidParams(format!("checkpoint name {name:?} must be non-empty without whitespace or ';'")));
            }
            write!(w, "{name}")?;
            for d in t.shape() {
                write!(w, " {d}")?;
            }
            writeln!(w, " ;")?;
            let mut buf = Vec::with_capacity(t.numel() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.to_writer(&mut out)?;
        Ok(out)
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Parse(format!("bad checkpoint header {:?}", line.trim_end())));
        }
        let mut ck = Checkpoint::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                break;
            }
            let mut parts = line.split_whitespace();
            let name = parts.next().ok_or_else(|| Error::Parse("empty checkpoint record".into()))?.to_string();
            let mut shape = Vec::new();
            let mut closed = false;
            for p in parts {
                if p == ";" {
                    closed = true;
                    break;
                }
                shape.push(p.parse::<usize>().map_err(|e| Error::Parse(format!("record {name}: {e}")))?);
            }
            if !closed {
                return Err(Error::Parse(format!("record {name}: missing ';'")));
            }
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(|_| Error::Parse(format!("record {name}: truncated data")))?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
            ck.push(name, Tensor::new(shape, data)?);
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}
