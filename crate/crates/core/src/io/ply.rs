//! Binary little-endian PLY vertex tables.
//!
//! Only the `vertex` element is retained. Scalar elements that precede it are
//! skipped; anything after it is ignored. Raw record bytes are kept verbatim
//! so a table can be rewritten bit-exactly with extra columns appended.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub ty: ScalarType,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexTable {
    properties: Vec<Property>,
    stride: usize,
    count: usize,
    data: Vec<u8>,
    pub comments: Vec<String>,
}

impl VertexTable {
    pub fn new(layout: &[(&str, ScalarType)]) -> Self {
        let mut t = VertexTable {
            properties: Vec::new(),
            stride: 0,
            count: 0,
            data: Vec::new(),
            comments: Vec::new(),
        };
        for (name, ty) in layout {
            t.properties.push(Property {
                name: (*name).to_string(),
                ty: *ty,
                offset: t.stride,
            });
            t.stride += ty.size();
        }
        t
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn has(&self, name: &str) -> bool {
        self.property(name).is_some()
    }

    fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// Appends one record given as little-endian bytes in layout order.
    pub fn push_raw(&mut self, record: &[u8]) {
        assert_eq!(record.len(), self.stride, "record size mismatch");
        self.data.extend_from_slice(record);
        self.count += 1;
    }

    pub fn record(&self, i: usize) -> &[u8] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        let p = self.property(name)?;
        let start = i * self.stride + p.offset;
        Some(p.ty.decode(&self.data[start..start + p.ty.size()]))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let p = self
            .property(name)
            .ok_or_else(|| Error::Format(format!("missing vertex property `{name}`")))?;
        let size = p.ty.size();
        Ok((0..self.count)
            .map(|i| {
                let start = i * self.stride + p.offset;
                p.ty.decode(&self.data[start..start + size])
            })
            .collect())
    }

    /// Copy of the table with one column dropped.
    pub fn without(&self, name: &str) -> VertexTable {
        let Some(drop) = self.property(name).cloned() else {
            return self.clone();
        };
        let layout: Vec<(&str, ScalarType)> = self
            .properties
            .iter()
            .filter(|p| p.name != name)
            .map(|p| (p.name.as_str(), p.ty))
            .collect();
        let mut out = VertexTable::new(&layout);
        out.comments = self.comments.clone();
        out.data.reserve(self.count * out.stride);
        for i in 0..self.count {
            let rec = self.record(i);
            out.data.extend_from_slice(&rec[..drop.offset]);
            out.data.extend_from_slice(&rec[drop.offset + drop.ty.size()..]);
        }
        out.count = self.count;
        out
    }

    /// Copy holding only the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> VertexTable {
        let mut out = VertexTable {
            properties: self.properties.clone(),
            stride: self.stride,
            count: 0,
            data: Vec::with_capacity(rows.len() * self.stride),
            comments: self.comments.clone(),
        };
        for &r in rows {
            out.data.extend_from_slice(self.record(r));
            out.count += 1;
        }
        out
    }

    /// Serializes the table, optionally appending a `uint` column.
    pub fn to_bytes(&self, extra: Option<(&str, &[u32])>) -> Result<Vec<u8>> {
        if let Some((name, values)) = extra {
            if values.len() != self.count {
                return Err(Error::Contract(format!(
                    "column `{name}` has {} values for {} vertices",
                    values.len(),
                    self.count
                )));
            }
            if self.has(name) {
                return Err(Error::Contract(format!("column `{name}` already present")));
            }
        }
        let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
        for c in &self.comments {
            let _ = writeln!(header, "comment {c}");
        }
        let _ = writeln!(header, "element vertex {}", self.count);
        for p in &self.properties {
            let _ = writeln!(header, "property {} {}", p.ty.name(), p.name);
        }
        if let Some((name, _)) = extra {
            let _ = writeln!(header, "property uint {name}");
        }
        header.push_str("end_header\n");

        let extra_size = if extra.is_some() { 4 } else { 0 };
        let mut out = Vec::with_capacity(header.len() + self.count * (self.stride + extra_size));
        out.extend_from_slice(header.as_bytes());
        for i in 0..self.count {
            out.extend_from_slice(self.record(i));
            if let Some((_, values)) = extra {
                out.extend_from_slice(&values[i].to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VertexTable> {
        let (header, body_start) = split_header(bytes)?;
        let mut lines = header.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("ply") {
            return Err(Error::Format("missing `ply` magic".into()));
        }

        struct Element {
            name: String,
            count: usize,
            props: Vec<(String, ScalarType)>,
            has_list: bool,
        }
        let mut elements: Vec<Element> = Vec::new();
        let mut comments = Vec::new();
        let mut format_ok = false;
        for line in lines {
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("format") => {
                    let fmt = tok.next().unwrap_or("");
                    if fmt != "binary_little_endian" {
                        return Err(Error::Format(format!(
                            "unsupported PLY format `{fmt}` (binary_little_endian required)"
                        )));
                    }
                    format_ok = true;
                }
                Some("comment") => {
                    comments.push(line["comment".len()..].trim().to_string());
                }
                Some("obj_info") => {}
                Some("element") => {
                    let name = tok.next().unwrap_or("").to_string();
                    let count = tok
                        .next()
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| Error::Format(format!("bad element line `{line}`")))?;
                    elements.push(Element {
                        name,
                        count,
                        props: Vec::new(),
                        has_list: false,
                    });
                }
                Some("property") => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| Error::Format("property before element".into()))?;
                    let ty = tok.next().unwrap_or("");
                    if ty == "list" {
                        el.has_list = true;
                        continue;
                    }
                    let ty =
                        ScalarType::parse(ty).ok_or_else(|| Error::Format(format!("unknown property type `{ty}`")))?;
                    let name = tok
                        .next()
                        .ok_or_else(|| Error::Format(format!("bad property line `{line}`")))?;
                    el.props.push((name.to_string(), ty));
                }
                Some(other) => {
                    return Err(Error::Format(format!("unexpected header keyword `{other}`")));
                }
                None => {}
            }
        }
        if !format_ok {
            return Err(Error::Format("missing `format` line".into()));
        }

        let mut offset = body_start;
        for el in &elements {
            if el.has_list {
                return Err(Error::Format(format!(
                    "list properties are not supported in element `{}`",
                    el.name
                )));
            }
            let layout: Vec<(&str, ScalarType)> = el.props.iter().map(|(n, t)| (n.as_str(), *t)).collect();
            let mut table = VertexTable::new(&layout);
            let len = table.stride * el.count;
            if el.name != "vertex" {
                offset += len;
                continue;
            }
            let end = offset.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| {
                Error::Format(format!(
                    "truncated vertex data: expected {} records of {} bytes",
                    el.count, table.stride
                ))
            })?;
            table.data = bytes[offset..end].to_vec();
            table.count = el.count;
            table.comments = comments;
            return Ok(table);
        }
        Err(Error::Format("no `vertex` element".into()))
    }
}

fn split_header(bytes: &[u8]) -> Result<(&str, usize)> {
    const END: &[u8] = b"end_header";
    let pos = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Format("missing `end_header`".into()))?;
    let mut body = pos + END.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) != Some(&b'\n') {
        return Err(Error::Format("`end_header` not followed by newline".into()));
    }
    let header =
        std::str::from_utf8(&bytes[..pos]).map_err(|_| Error::Format("PLY header is not valid UTF-8".into()))?;
    Ok((header, body + 1))
}
