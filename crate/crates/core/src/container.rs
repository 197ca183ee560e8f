//! Self-describing artifact container: a plain-text header of `key=value`
//! lines followed by row-major little-endian `f64` payloads.
//!
//! ```text
//! HOTT-CONTAINER 1
//! kind=topic_model
//! num_topics=70
//! array=topic_word 70 15000
//! array=doc_topic 300 70
//! end
//! <70 * 15000 f64> <300 * 70 f64>
//! ```
//!
//! Values escape `\` and newlines; arrays appear in the payload in header
//! order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const MAGIC: &str = "HOTT-CONTAINER 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<(String, Array2<f64>)>,
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Container {
            kind: kind.to_string(),
            meta: Vec::new(),
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        debug_assert!(!key.is_empty() && !key.contains(['=', '\n']));
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_array(&mut self, name: &str, data: Array2<f64>) -> &mut Self {
        self.arrays.push((name.to_string(), data));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.meta
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| bad(format!("missing header key {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?
            .parse()
            .map_err(|_| bad(format!("unparsable value for {key:?}")))
    }

    pub fn array(&self, name: &str) -> Result<&Array2<f64>> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| bad(format!("missing array {name:?}")))
    }

    pub fn take_array(&mut self, name: &str) -> Result<Array2<f64>> {
        let pos = self
            .arrays
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| bad(format!("missing array {name:?}")))?;
        Ok(self.arrays.remove(pos).1)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(bad(format!("expected a {kind} artifact, found {}", self.kind)))
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind={}", escape(&self.kind))?;
        for (k, v) in &self.meta {
            writeln!(w, "{k}={}", escape(v))?;
        }
        for (name, a) in &self.arrays {
            writeln!(w, "array={name} {} {}", a.nrows(), a.ncols())?;
        }
        writeln!(w, "end")?;
        for (_, a) in &self.arrays {
            // iter() walks logical row-major order regardless of layout
            for x in a.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let next_line = |r: &mut BufReader<R>, line: &mut String| -> Result<()> {
            line.clear();
            if r.read_line(line)? == 0 {
                return Err(bad("truncated header"));
            }
            if line.ends_with('\n') {
                line.pop();
            }
            Ok(())
        };
        next_line(&mut r, &mut line)?;
        if line != MAGIC {
            return Err(bad("not a container file"));
        }
        let mut kind = None;
        let mut meta = Vec::new();
        let mut shapes = Vec::new();
        loop {
            next_line(&mut r, &mut line)?;
            if line == "end" {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
            match k {
                "kind" => kind = Some(unescape(v)),
                "array" => {
                    let parts: Vec<&str> = v.split(' ').collect();
                    let [name, rows, cols] = parts[..] else {
                        return Err(bad(format!("malformed array line {line:?}")));
                    };
                    let rows: usize = rows.parse().map_err(|_| bad("bad row count"))?;
                    let cols: usize = cols.parse().map_err(|_| bad("bad column count"))?;
                    shapes.push((name.to_string(), rows, cols));
                }
                _ => meta.push((k.to_string(), unescape(v))),
            }
        }
        let kind = kind.ok_or_else(|| bad("missing kind"))?;
        let mut arrays = Vec::with_capacity(shapes.len());
        let mut buf = [0u8; 8];
        for (name, rows, cols) in shapes {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                r.read_exact(&mut buf).map_err(|_| bad("truncated payload"))?;
                data.push(f64::from_le_bytes(buf));
            }
            let a = Array2::from_shape_vec((rows, cols), data).map_err(|e| bad(e.to_string()))?;
            arrays.push((name, a));
        }
        if r.read(&mut buf)? != 0 {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Container { kind, meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}
