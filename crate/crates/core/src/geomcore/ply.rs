//! Minimal PLY reader/writer (ASCII and binary little-endian).

use std::io::{BufRead, Read, Write};

use super::{GeomError, Result};

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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::I8 => "char",
            Self::U8 => "uchar",
            Self::I16 => "short",
            Self::U16 => "ushort",
            Self::I32 => "int",
            Self::U32 => "uint",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    pub fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Self::I8 => out.push(v as i8 as u8),
            Self::U8 => out.push(v as u8),
            Self::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            Self::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            Self::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            Self::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            Self::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Self::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
    pub columns: Vec<Column>,
}

impl Element {
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        let i = self.properties.iter().position(|p| p.name == name)?;
        match &self.columns[i] {
            Column::Scalar(v) => Some(v),
            Column::List(_) => None,
        }
    }

    pub fn list(&self, names: &[&str]) -> Option<&[Vec<f64>]> {
        let i = self
            .properties
            .iter()
            .position(|p| names.contains(&p.name.as_str()))?;
        match &self.columns[i] {
            Column::List(v) => Some(v),
            Column::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyData {
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

fn perr(line: usize, msg: impl Into<String>) -> GeomError {
    GeomError::Parse { line, msg: msg.into() }
}

pub fn read_ply(reader: &mut impl BufRead) -> Result<PlyData> {
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| perr(line_no + 1, e.to_string()))?;
        line_no += 1;
        if n == 0 {
            return Err(perr(line_no, "unexpected end of header"));
        }
        let toks: Vec<&str> = buf.split_whitespace().collect();
        if line_no == 1 {
            if toks != ["ply"] {
                return Err(perr(1, "missing 'ply' magic"));
            }
            continue;
        }
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    other => return Err(perr(line_no, format!("unsupported format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| perr(line_no, "bad element count"))?,
                properties: Vec::new(),
                columns: Vec::new(),
            }),
            ["property", "list", c, i, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before element"))?;
                let count = ScalarType::parse(c).ok_or_else(|| perr(line_no, "bad list type"))?;
                let item = ScalarType::parse(i).ok_or_else(|| perr(line_no, "bad list type"))?;
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List { count, item },
                });
            }
            ["property", t, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "property before element"))?;
                let t = ScalarType::parse(t).ok_or_else(|| perr(line_no, "bad property type"))?;
                el.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(t),
                });
            }
            ["end_header"] => break,
            _ => return Err(perr(line_no, format!("unrecognized header line {:?}", buf.trim()))),
        }
    }
    let format = format.ok_or_else(|| perr(line_no, "missing format line"))?;
    for el in &mut elements {
        el.columns = el
            .properties
            .iter()
            .map(|p| match p.kind {
                PropertyKind::Scalar(_) => Column::Scalar(Vec::with_capacity(el.count)),
                PropertyKind::List { .. } => Column::List(Vec::with_capacity(el.count)),
            })
            .collect();
    }
    match format {
        Format::Ascii => read_ascii_body(reader, &mut elements, line_no)?,
        Format::BinaryLe => read_binary_body(reader, &mut elements, line_no)?,
    }
    Ok(PlyData { elements })
}

fn read_ascii_body(reader: &mut impl BufRead, elements: &mut [Element], mut line_no: usize) -> Result<()> {
    let mut buf = String::new();
    for el in elements.iter_mut() {
        for _ in 0..el.count {
            // Skip blank lines between records.
            let toks: Vec<f64> = loop {
                buf.clear();
                let n = reader
                    .read_line(&mut buf)
                    .map_err(|e| perr(line_no + 1, e.to_string()))?;
                line_no += 1;
                if n == 0 {
                    return Err(perr(line_no, format!("unexpected end of file in element '{}'", el.name)));
                }
                if !buf.trim().is_empty() {
                    break buf
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| perr(line_no, format!("bad number {t:?}"))))
                        .collect::<Result<_>>()?;
                }
            };
            let mut it = toks.into_iter();
            for (p, col) in el.properties.iter().zip(el.columns.iter_mut()) {
                let mut next = || it.next().ok_or_else(|| perr(line_no, "too few values"));
                match (&p.kind, col) {
                    (PropertyKind::Scalar(_), Column::Scalar(v)) => v.push(next()?),
                    (PropertyKind::List { .. }, Column::List(v)) => {
                        let n = next()? as usize;
                        let items = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
                        v.push(items);
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    Ok(())
}

fn read_binary_body(reader: &mut impl Read, elements: &mut [Element], line_no: usize) -> Result<()> {
    let mut body = Vec::new();
    reader
        .read_to_end(&mut body)
        .map_err(|e| perr(line_no, e.to_string()))?;
    let mut pos = 0usize;
    let truncated = |name: &str| perr(line_no, format!("binary body truncated in element '{name}'"));
    let mut take = |n: usize| -> Option<&[u8]> {
        let s = body.get(pos..pos + n)?;
        pos += n;
        Some(s)
    };
    for el in elements.iter_mut() {
        for _ in 0..el.count {
            for (p, col) in el.properties.iter().zip(el.columns.iter_mut()) {
                match (&p.kind, col) {
                    (PropertyKind::Scalar(t), Column::Scalar(v)) => {
                        let b = take(t.size()).ok_or_else(|| truncated(&el.name))?;
                        v.push(t.decode(b));
                    }
                    (PropertyKind::List { count, item }, Column::List(v)) => {
                        let b = take(count.size()).ok_or_else(|| truncated(&el.name))?;
                        let n = count.decode(b) as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            let b = take(item.size()).ok_or_else(|| truncated(&el.name))?;
                            items.push(item.decode(b));
                        }
                        v.push(items);
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    Ok(())
}

/// Header description for a binary little-endian element written with [`write_binary_ply`].
pub struct ElementSpec<'a> {
    pub name: &'a str,
    pub count: usize,
    pub properties: Vec<(&'a str, PropertyKind)>,
}

/// Write a binary little-endian PLY. `body` must append exactly the declared records.
pub fn write_binary_ply(
    w: &mut impl Write,
    comments: &[String],
    elements: &[ElementSpec<'_>],
    body: &[u8],
) -> std::io::Result<()> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for c in comments {
        header.push_str(&format!("comment {c}\n"));
    }
    for el in elements {
        header.push_str(&format!("element {} {}\n", el.name, el.count));
        for (name, kind) in &el.properties {
            match kind {
                PropertyKind::Scalar(t) => header.push_str(&format!("property {} {name}\n", t.name())),
                PropertyKind::List { count, item } => header.push_str(&format!(
                    "property list {} {} {name}\n",
                    count.name(),
                    item.name()
                )),
            }
        }
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    w.write_all(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_with_lists() {
        let src = "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float x\nproperty uchar red\n\
                   element face 1\nproperty list uchar int vertex_indices\nend_header\n1.5 7\n-2 255\n3 0 1 1\n";
        let ply = read_ply(&mut src.as_bytes()).unwrap();
        let v = ply.element("vertex").unwrap();
        assert_eq!(v.scalar("x").unwrap(), &[1.5, -2.0]);
        assert_eq!(v.scalar("red").unwrap(), &[7.0, 255.0]);
        let f = ply.element("face").unwrap();
        assert_eq!(f.list(&["vertex_indices"]).unwrap()[0], vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn binary_round_trip() {
        let mut body = Vec::new();
        for &(x, id) in &[(0.25f64, 3u16), (-1e-3, 65535)] {
            ScalarType::F64.encode(x, &mut body);
            ScalarType::U16.encode(id as f64, &mut body);
        }
        let spec = ElementSpec {
            name: "vertex",
            count: 2,
            properties: vec![
                ("x", PropertyKind::Scalar(ScalarType::F64)),
                ("id", PropertyKind::Scalar(ScalarType::U16)),
            ],
        };
        let mut out = Vec::new();
        write_binary_ply(&mut out, &[], &[spec], &body).unwrap();
        let ply = read_ply(&mut out.as_slice()).unwrap();
        let v = ply.element("vertex").unwrap();
        assert_eq!(v.scalar("x").unwrap(), &[0.25, -1e-3]);
        assert_eq!(v.scalar("id").unwrap(), &[3.0, 65535.0]);
    }

    #[test]
    fn truncated_ascii_reports_line() {
        let src = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nend_header\n1\n2\n";
        match read_ply(&mut src.as_bytes()) {
            Err(GeomError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }
}
