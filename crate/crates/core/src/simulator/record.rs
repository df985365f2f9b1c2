//! Session records and their on-disk forms.
//!
//! Text form (`csv`): one header comment line with `key=value` fields, one
//! column line, then one pulse per line:
//!
//! ```text
//! # cvqkd-record v1 protocol=squeezed n=2 l=3 seed=7 v=20 t=0.5 eps=0 shape=gaussian block_correlation=0 sifting=random_basis
//! block,pulse,a,b,label_a,label_b,kept
//! 0,0,1.73,0.98,q,q,1
//! ```
//!
//! JSON-lines form: a `{"header": {...}}` object followed by one pulse object
//! per line. Floats are written in shortest round-trip form in both.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{NoiseShape, Quadrature, SiftingMode};
use crate::error::{Error, Result};
use crate::estimators::SampleSet;
use crate::info::ProtocolKind;

const MAGIC: &str = "# cvqkd-record v1";
const COLUMNS: &str = "block,pulse,a,b,label_a,label_b,kept";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFormat {
    Csv,
    JsonLines,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "json-lines" | "jsonl" => Ok(RecordFormat::JsonLines),
            other => Err(Error::Parse(format!("unknown format '{other}' (csv|json-lines)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub l: usize,
    pub seed: u64,
    pub v: f64,
    pub t: f64,
    pub eps: f64,
    pub shape: NoiseShape,
    pub block_correlation: f64,
    pub sifting: SiftingMode,
}

impl RecordHeader {
    fn header_line(&self) -> String {
        format!(
            "{MAGIC} protocol={} n={} l={} seed={} v={} t={} eps={} shape={} block_correlation={} sifting={}",
            self.protocol,
            self.n,
            self.l,
            self.seed,
            self.v,
            self.t,
            self.eps,
            self.shape,
            self.block_correlation,
            self.sifting.as_str()
        )
    }

    fn from_line(line: &str) -> Result<Self> {
        let rest = line
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Parse(format!("missing record header '{MAGIC}'")))?;
        let mut fields = std::collections::HashMap::new();
        for token in rest.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field '{token}'")))?;
            fields.insert(k, v);
        }
        fn get<'a>(f: &std::collections::HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
            f.get(key)
                .copied()
                .ok_or_else(|| Error::Parse(format!("header lacks '{key}'")))
        }
        fn num<T: FromStr>(f: &std::collections::HashMap<&str, &str>, key: &str) -> Result<T> {
            get(f, key)?
                .parse()
                .map_err(|_| Error::Parse(format!("header field '{key}' is not a number")))
        }
        Ok(RecordHeader {
            protocol: get(&fields, "protocol")?.parse()?,
            n: num(&fields, "n")?,
            l: num(&fields, "l")?,
            seed: num(&fields, "seed")?,
            v: num(&fields, "v")?,
            t: num(&fields, "t")?,
            eps: num(&fields, "eps")?,
            shape: get(&fields, "shape")?.parse()?,
            block_correlation: num(&fields, "block_correlation")?,
            sifting: get(&fields, "sifting")?.parse()?,
        })
    }
}

/// One pulse: Alice's and Bob's outcomes, their bases, and whether sifting kept it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEntry {
    pub a: f64,
    pub b: f64,
    pub label_a: Quadrature,
    pub label_b: Quadrature,
    pub kept: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonPulse {
    block: usize,
    pulse: usize,
    #[serde(flatten)]
    entry: PulseEntry,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonHeader {
    header: RecordHeader,
}

/// `l` blocks of `n` pulses, stored block-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    header: RecordHeader,
    entries: Vec<PulseEntry>,
}

impl BlockRecord {
    pub(crate) fn new(header: RecordHeader, entries: Vec<PulseEntry>) -> Self {
        debug_assert_eq!(entries.len(), header.n * header.l);
        BlockRecord { header, entries }
    }

    pub fn header(&self) -> &RecordHeader {
        &self.header
    }

    pub fn entries(&self) -> &[PulseEntry] {
        &self.entries
    }

    pub fn block(&self, index: usize) -> &[PulseEntry] {
        let n = self.header.n;
        &self.entries[index * n..(index + 1) * n]
    }

    pub fn kept_count(&self) -> usize {
        self.entries.iter().filter(|e| e.kept).count()
    }

    /// Kept pulses measured in quadrature `label`.
    pub fn samples(&self, label: Quadrature) -> Result<SampleSet> {
        let (a, b) = self
            .entries
            .iter()
            .filter(|e| e.kept && e.label_b == label)
            .map(|e| (e.a, e.b))
            .unzip();
        SampleSet::new(a, b, Some(label))
    }

    /// All kept pulses, with Alice's p outcomes negated so that both
    /// quadratures share the sign of the q correlation.
    pub fn pooled_samples(&self) -> Result<SampleSet> {
        let (a, b) = self
            .entries
            .iter()
            .filter(|e| e.kept)
            .map(|e| match e.label_b {
                Quadrature::Q => (e.a, e.b),
                Quadrature::P => (-e.a, e.b),
            })
            .unzip();
        SampleSet::new(a, b, None)
    }

    pub fn write<W: Write>(&self, w: &mut W, format: RecordFormat) -> Result<()> {
        let mut writer = RecordWriter::new(w, &self.header, format)?;
        writer.write_entries(&self.entries)?;
        writer.finish()
    }

    /// Reads either format, detected from the first line.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty record".into()))??;
        let (header, json) = if first.starts_with('{') {
            let h: JsonHeader = serde_json::from_str(&first)
                .map_err(|e| Error::Parse(format!("record header: {e}")))?;
            (h.header, true)
        } else {
            let h = RecordHeader::from_line(&first)?;
            let cols = lines
                .next()
                .ok_or_else(|| Error::Parse("missing column line".into()))??;
            if cols.trim() != COLUMNS {
                return Err(Error::Parse(format!("unexpected column line '{cols}'")));
            }
            (h, false)
        };
        let expected = header
            .n
            .checked_mul(header.l)
            .ok_or_else(|| Error::Parse("n * l overflows".into()))?;
        let mut entries = Vec::with_capacity(expected.min(1 << 24));
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 2;
            let (block, pulse, entry) = if json {
                let p: JsonPulse = serde_json::from_str(&line)
                    .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
                (p.block, p.pulse, p.entry)
            } else {
                parse_csv_line(&line).map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?
            };
            let idx = entries.len();
            if header.n == 0 || block != idx / header.n || pulse != idx % header.n {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected block {} pulse {}, found {block} {pulse}",
                    idx / header.n.max(1),
                    idx % header.n.max(1)
                )));
            }
            entries.push(entry);
        }
        if entries.len() != expected {
            return Err(Error::Parse(format!(
                "record declares {expected} pulses but holds {}",
                entries.len()
            )));
        }
        Ok(BlockRecord { header, entries })
    }
}

/// Writes a record incrementally: header on creation, then pulses in order.
pub struct RecordWriter<'a, W: Write> {
    w: &'a mut W,
    format: RecordFormat,
    n: usize,
    expected: usize,
    written: usize,
}

impl<'a, W: Write> RecordWriter<'a, W> {
    pub fn new(w: &'a mut W, header: &RecordHeader, format: RecordFormat) -> Result<Self> {
        match format {
            RecordFormat::Csv => {
                writeln!(w, "{}", header.header_line())?;
                writeln!(w, "{COLUMNS}")?;
            }
            RecordFormat::JsonLines => {
                serde_json::to_writer(&mut *w, &JsonHeader { header: *header }).map_err(json_err)?;
                writeln!(w)?;
            }
        }
        Ok(RecordWriter {
            w,
            format,
            n: header.n,
            expected: header.n * header.l,
            written: 0,
        })
    }

    pub fn write_entries(&mut self, entries: &[PulseEntry]) -> Result<()> {
        for e in entries {
            let (block, pulse) = (self.written / self.n, self.written % self.n);
            match self.format {
                RecordFormat::Csv => writeln!(
                    self.w,
                    "{block},{pulse},{},{},{},{},{}",
                    e.a,
                    e.b,
                    e.label_a.as_str(),
                    e.label_b.as_str(),
                    u8::from(e.kept)
                )?,
                RecordFormat::JsonLines => {
                    let line = JsonPulse {
                        block,
                        pulse,
                        entry: *e,
                    };
                    serde_json::to_writer(&mut *self.w, &line).map_err(json_err)?;
                    writeln!(self.w)?;
                }
            }
            self.written += 1;
        }
        Ok(())
    }

    /// Flushes and checks that exactly `n * l` pulses were written.
    pub fn finish(self) -> Result<()> {
        self.w.flush()?;
        if self.written != self.expected {
            return Err(Error::Configuration(format!(
                "wrote {} pulses, header declares {}",
                self.written, self.expected
            )));
        }
        Ok(())
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_csv_line(line: &str) -> std::result::Result<(usize, usize, PulseEntry), String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad index '{s}'"));
    let float = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("bad value '{s}'"))
    };
    let label = |s: &str| s.parse::<Quadrature>().map_err(|e| e.to_string());
    let kept = match f[6] {
        "0" => false,
        "1" => true,
        other => return Err(format!("kept must be 0 or 1, got '{other}'")),
    };
    Ok((
        int(f[0])?,
        int(f[1])?,
        PulseEntry {
            a: float(f[2])?,
            b: float(f[3])?,
            label_a: label(f[4])?,
            label_b: label(f[5])?,
            kept,
        },
    ))
}
