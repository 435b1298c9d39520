//! Text format for instances.
//!
//! ```text
//! version = 1
//! dim = 2
//! seed = 7
//! bin = [10, 10, 1]
//! items = [[4, 10, 1], [6, 10, 1]]
//! optimal_layout = [[0, 0, 0, 0, 0], [1, 4, 0, 0, 0]]
//! ```
//!
//! Fields appear in exactly this order, one per line, integers only. Layout
//! rows are `[item_id, x, y, z, orient]`. 2D instances carry a third extent
//! of 1 and a zero `z`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::env::{oriented_dims, overlaps, Dim, Orientation, Placement, Vec3};
use crate::generator::Instance;

pub const FORMAT_VERSION: i64 = 1;

const FIELDS: [&str; 6] = ["version", "dim", "seed", "bin", "items", "optimal_layout"];

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, field `{field}`: {msg}")]
    Parse {
        line: usize,
        field: String,
        msg: String,
    },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, InstanceIoError>;

fn fmt_row(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_rows(rows: impl Iterator<Item = Vec<i64>>) -> String {
    let parts: Vec<String> = rows.map(|r| fmt_row(&r)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn to_text(inst: &Instance) -> String {
    let mut s = String::new();
    s.push_str(&format!("version = {FORMAT_VERSION}\n"));
    s.push_str(&format!("dim = {}\n", inst.dim.number()));
    s.push_str(&format!("seed = {}\n", inst.seed));
    s.push_str(&format!("bin = {}\n", fmt_row(&inst.origin_bin)));
    s.push_str(&format!("items = {}\n", fmt_rows(inst.items.iter().map(|d| d.to_vec()))));
    s.push_str(&format!(
        "optimal_layout = {}\n",
        fmt_rows(inst.optimal_layout.iter().map(|p| {
            vec![
                p.item_id as i64,
                p.pos[0],
                p.pos[1],
                p.pos[2],
                p.orient.code() as i64,
            ]
        }))
    ));
    s
}

#[derive(Debug)]
enum Value {
    Int(i128),
    List(Vec<Value>),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.at < self.bytes.len() && self.bytes[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
    }

    fn value(&mut self) -> std::result::Result<Value, String> {
        self.skip_ws();
        match self.bytes.get(self.at) {
            Some(b'[') => {
                self.at += 1;
                let mut out = Vec::new();
                self.skip_ws();
                if self.bytes.get(self.at) == Some(&b']') {
                    self.at += 1;
                    return Ok(Value::List(out));
                }
                loop {
                    out.push(self.value()?);
                    self.skip_ws();
                    match self.bytes.get(self.at) {
                        Some(b',') => self.at += 1,
                        Some(b']') => {
                            self.at += 1;
                            return Ok(Value::List(out));
                        }
                        other => {
                            return Err(format!(
                                "expected `,` or `]` at column {}, found {}",
                                self.at + 1,
                                other.map_or("end of line".into(), |c| format!("`{}`", *c as char))
                            ))
                        }
                    }
                }
            }
            Some(_) => {
                let start = self.at;
                if self.bytes[self.at] == b'-' {
                    self.at += 1;
                }
                while self.at < self.bytes.len() && self.bytes[self.at].is_ascii_digit() {
                    self.at += 1;
                }
                let tok = std::str::from_utf8(&self.bytes[start..self.at]).unwrap_or("");
                tok.parse::<i128>()
                    .map(Value::Int)
                    .map_err(|_| format!("expected an integer at column {}", start + 1))
            }
            None => Err("missing value".into()),
        }
    }
}

fn parse_value(text: &str) -> std::result::Result<Value, String> {
    let mut c = Cursor {
        bytes: text.as_bytes(),
        at: 0,
    };
    let v = c.value()?;
    c.skip_ws();
    if c.at != c.bytes.len() {
        return Err(format!("trailing characters at column {}", c.at + 1));
    }
    Ok(v)
}

struct Field {
    line: usize,
    name: &'static str,
    value: Value,
}

impl Field {
    fn err(&self, msg: impl Into<String>) -> InstanceIoError {
        InstanceIoError::Parse {
            line: self.line,
            field: self.name.to_string(),
            msg: msg.into(),
        }
    }

    fn int(&self) -> Result<i128> {
        match self.value {
            Value::Int(v) => Ok(v),
            Value::List(_) => Err(self.err("expected an integer, found a list")),
        }
    }

    fn row(&self, v: &Value, len: usize) -> Result<Vec<i64>> {
        let Value::List(xs) = v else {
            return Err(self.err("expected a list"));
        };
        if xs.len() != len {
            return Err(self.err(format!("expected {len} entries, found {}", xs.len())));
        }
        xs.iter()
            .map(|x| match x {
                Value::Int(i) => i64::try_from(*i).map_err(|_| self.err("integer out of range")),
                Value::List(_) => Err(self.err("nested list where an integer was expected")),
            })
            .collect()
    }

    fn rows(&self, len: usize) -> Result<Vec<Vec<i64>>> {
        let Value::List(rows) = &self.value else {
            return Err(self.err("expected a list of lists"));
        };
        rows.iter().map(|r| self.row(r, len)).collect()
    }
}

pub fn from_text(text: &str) -> Result<Instance> {
    let mut fields: Vec<Field> = Vec::with_capacity(FIELDS.len());
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    for &name in FIELDS.iter() {
        let Some((idx, line)) = lines.next() else {
            return Err(InstanceIoError::Parse {
                line: text.lines().count() + 1,
                field: name.into(),
                msg: "missing field".into(),
            });
        };
        let lineno = idx + 1;
        let perr = |msg: String| InstanceIoError::Parse {
            line: lineno,
            field: name.into(),
            msg,
        };
        let (key, rest) = line
            .split_once('=')
            .ok_or_else(|| perr("expected `key = value`".into()))?;
        let key = key.trim();
        if key != name {
            return Err(perr(format!("expected field `{name}`, found `{key}`")));
        }
        let value = parse_value(rest).map_err(perr)?;
        fields.push(Field {
            line: lineno,
            name,
            value,
        });
    }
    if let Some((idx, _)) = lines.next() {
        return Err(InstanceIoError::Parse {
            line: idx + 1,
            field: "-".into(),
            msg: "unexpected trailing content".into(),
        });
    }

    let version = fields[0].int()?;
    if version != FORMAT_VERSION as i128 {
        return Err(fields[0].err(format!("unsupported version {version}")));
    }
    let dim = u8::try_from(fields[1].int()?)
        .ok()
        .and_then(Dim::from_number)
        .ok_or_else(|| fields[1].err("dim must be 2 or 3"))?;
    let seed = u64::try_from(fields[2].int()?).map_err(|_| fields[2].err("seed must be a u64"))?;
    let bin_row = fields[3].row(&fields[3].value, 3)?;
    let bin: Vec3 = [bin_row[0], bin_row[1], bin_row[2]];
    if bin.iter().any(|&d| d < 1) {
        return Err(fields[3].err("bin dimensions must be positive"));
    }
    let mut items = Vec::new();
    for r in fields[4].rows(3)? {
        if r.iter().any(|&d| d < 1) {
            return Err(fields[4].err(format!("item {} has non-positive dimensions {r:?}", items.len())));
        }
        if dim == Dim::Two && r[2] != 1 {
            return Err(fields[4].err(format!("2D item {} must have third extent 1", items.len())));
        }
        items.push([r[0], r[1], r[2]]);
    }
    if items.is_empty() {
        return Err(fields[4].err("no items"));
    }
    let mut layout = Vec::new();
    for r in fields[5].rows(5)? {
        let id = usize::try_from(r[0])
            .ok()
            .filter(|&i| i < items.len())
            .ok_or_else(|| fields[5].err(format!("unknown item id {}", r[0])))?;
        let orient = u8::try_from(r[4])
            .ok()
            .and_then(|c| Orientation::new(c, dim).ok())
            .ok_or_else(|| fields[5].err(format!("bad orientation {}", r[4])))?;
        let size = oriented_dims(items[id], orient, dim).map_err(|e| fields[5].err(e.to_string()))?;
        layout.push(Placement {
            item_id: id,
            pos: [r[1], r[2], r[3]],
            orient,
            size,
        });
    }
    let inst = Instance {
        dim,
        seed,
        origin_bin: bin,
        items,
        optimal_layout: layout,
    };
    validate(&inst)?;
    Ok(inst)
}

/// Checks the instance invariants: conservation of area/volume and, when a
/// layout is present, that it tiles the origin bin.
pub fn validate(inst: &Instance) -> Result<()> {
    if inst.dim == Dim::Two && inst.origin_bin[2] != 1 {
        return Err(InstanceIoError::Invalid("2D bin must have third extent 1".into()));
    }
    let total: i64 = inst.items.iter().map(|d| d.iter().product::<i64>()).sum();
    if total != inst.origin_volume() {
        return Err(InstanceIoError::Invalid(format!(
            "volume conservation: items sum to {total}, origin bin holds {}",
            inst.origin_volume()
        )));
    }
    if inst.optimal_layout.is_empty() {
        return Ok(());
    }
    if inst.optimal_layout.len() != inst.items.len() {
        return Err(InstanceIoError::Invalid(format!(
            "layout tiling: {} placements for {} items",
            inst.optimal_layout.len(),
            inst.items.len()
        )));
    }
    let mut seen = vec![false; inst.items.len()];
    for (i, p) in inst.optimal_layout.iter().enumerate() {
        if std::mem::replace(&mut seen[p.item_id], true) {
            return Err(InstanceIoError::Invalid(format!(
                "layout tiling: item {} placed twice",
                p.item_id
            )));
        }
        let hi = p.aabb().max();
        if (0..3).any(|k| p.pos[k] < 0 || hi[k] > inst.origin_bin[k]) {
            return Err(InstanceIoError::Invalid(format!(
                "layout tiling: item {} leaves the origin bin",
                p.item_id
            )));
        }
        for q in &inst.optimal_layout[..i] {
            if overlaps(&p.aabb(), &q.aabb()) {
                return Err(InstanceIoError::Invalid(format!(
                    "layout tiling: items {} and {} overlap",
                    p.item_id, q.item_id
                )));
            }
        }
    }
    // disjoint, inside the bin, and volumes sum to the bin: no gaps
    Ok(())
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    fs::write(path, to_text(inst)).map_err(|source| InstanceIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|source| InstanceIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_text(&text)
}
