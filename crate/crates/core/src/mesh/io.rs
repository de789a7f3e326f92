//! OBJ and PLY readers plus the canonical ASCII PLY writer.

use std::io::Write;
use std::path::Path;

use super::{MeshError, TexturedMesh, DEFAULT_COLOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TexturedMesh, MeshError> {
    let bytes = std::fs::read(path)?;
    match format {
        MeshFormat::Obj => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| MeshError::parse(0, "OBJ file is not valid UTF-8"))?;
            read_obj(text)
        }
        MeshFormat::Ply => read_ply(&bytes),
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, MeshError> {
    tok.parse::<f64>()
        .map_err(|_| MeshError::parse(line, format!("invalid number `{tok}`")))
}

/// Converts a 1-based OBJ index. Range checks against the vertex count happen
/// in validation so that out-of-range faces surface as invariant errors.
fn parse_obj_index(tok: &str, line: usize) -> Result<usize, MeshError> {
    let i: i64 = tok
        .parse()
        .map_err(|_| MeshError::parse(line, format!("invalid index `{tok}`")))?;
    if i < 1 {
        return Err(MeshError::parse(line, format!("index {i} is not 1-based positive")));
    }
    Ok((i - 1) as usize)
}

/// Parses the OBJ subset: `v x y z [r g b]`, `vt u v`, `f i j k` and
/// `f i/ti j/tj k/tk`.
pub fn read_obj(text: &str) -> Result<TexturedMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut has_color: Option<bool> = None;
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut faces = Vec::new();
    let mut face_tex: Vec<[usize; 3]> = Vec::new();
    let mut faces_textured: Option<bool> = None;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let tag = toks.next().unwrap();
        let rest: Vec<&str> = toks.collect();
        match tag {
            "v" => {
                let colored = match rest.len() {
                    3 => false,
                    6 => true,
                    n => return Err(MeshError::parse(line, format!("`v` expects 3 or 6 values, got {n}"))),
                };
                if *has_color.get_or_insert(colored) != colored {
                    return Err(MeshError::parse(line, "mixed colored and uncolored vertices"));
                }
                let mut vals = [0.0; 6];
                for (slot, tok) in vals.iter_mut().zip(&rest) {
                    *slot = parse_f64(tok, line)?;
                }
                vertices.push([vals[0], vals[1], vals[2]]);
                if colored {
                    colors.push([vals[3], vals[4], vals[5]]);
                }
            }
            "vt" => {
                if rest.len() != 2 {
                    return Err(MeshError::parse(line, "`vt` expects exactly 2 values"));
                }
                texcoords.push([parse_f64(rest[0], line)?, parse_f64(rest[1], line)?]);
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(MeshError::parse(line, "only triangular faces are supported"));
                }
                let mut idx = [0usize; 3];
                let mut tex = [0usize; 3];
                let mut textured = None;
                for (k, tok) in rest.iter().enumerate() {
                    let parts: Vec<&str> = tok.split('/').collect();
                    let this_textured = match parts.len() {
                        1 => false,
                        2 => true,
                        _ => return Err(MeshError::parse(line, format!("unsupported face token `{tok}`"))),
                    };
                    if *textured.get_or_insert(this_textured) != this_textured {
                        return Err(MeshError::parse(line, "mixed face token styles"));
                    }
                    idx[k] = parse_obj_index(parts[0], line)?;
                    if this_textured {
                        tex[k] = parse_obj_index(parts[1], line)?;
                        if tex[k] >= texcoords.len() {
                            return Err(MeshError::parse(line, "texture index out of range"));
                        }
                    }
                }
                let textured = textured.unwrap();
                if *faces_textured.get_or_insert(textured) != textured {
                    return Err(MeshError::parse(line, "mixed textured and untextured faces"));
                }
                faces.push(idx);
                face_tex.push(tex);
            }
            other => return Err(MeshError::parse(line, format!("unsupported record `{other}`"))),
        }
    }

    let n = vertices.len();
    let uv = if faces_textured == Some(true) {
        let mut uv: Vec<Option<[f64; 2]>> = vec![None; n];
        for (f, t) in faces.iter().zip(&face_tex) {
            for k in 0..3 {
                if f[k] < n && uv[f[k]].is_none() {
                    uv[f[k]] = Some(texcoords[t[k]]);
                }
            }
        }
        let mut out = Vec::with_capacity(n);
        for (i, t) in uv.into_iter().enumerate() {
            match t {
                Some(t) => out.push(t),
                None => {
                    return Err(MeshError::parse(
                        text.lines().count(),
                        format!("vertex {} has no texture coordinate", i + 1),
                    ))
                }
            }
        }
        Some(out)
    } else {
        None
    };
    let colors = if has_color == Some(true) { Some(colors) } else { None };
    TexturedMesh::new(vertices, faces, colors, uv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    /// Parses a text token with the precision of the declared type, so that
    /// `float` values round-trip through `f32`.
    fn parse_text(self, tok: &str) -> Option<f64> {
        match self {
            Scalar::F32 => tok.parse::<f32>().ok().map(f64::from),
            Scalar::F64 => tok.parse::<f64>().ok(),
            _ => tok.parse::<i64>().ok().map(|v| v as f64),
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VertexField {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    U,
    V,
    Ignored,
}

struct PlyHeader {
    binary: bool,
    vertex_count: usize,
    face_count: usize,
    vertex_props: Vec<(VertexField, Scalar)>,
    face_list: (Scalar, Scalar),
    lines: usize,
    body_offset: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<PlyHeader, MeshError> {
    let mut offset = 0;
    let mut line_no = 0;
    let next_line = |offset: &mut usize| -> Option<String> {
        if *offset >= bytes.len() {
            return None;
        }
        let end = bytes[*offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| *offset + p)
            .unwrap_or(bytes.len());
        let s = String::from_utf8_lossy(&bytes[*offset..end]).trim_end_matches('\r').to_string();
        *offset = (end + 1).min(bytes.len() + 1);
        Some(s)
    };

    let mut binary = None;
    let mut vertex_count = None;
    let mut face_count = None;
    let mut current: Option<&'static str> = None;
    let mut vertex_props = Vec::new();
    let mut face_list = None;

    loop {
        let line = next_line(&mut offset).ok_or_else(|| MeshError::parse(line_no, "missing end_header"))?;
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if toks != ["ply"] {
                return Err(MeshError::parse(1, "missing `ply` magic"));
            }
            continue;
        }
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                binary = Some(match toks.get(1..) {
                    Some(["ascii", "1.0"]) => false,
                    Some(["binary_little_endian", "1.0"]) => true,
                    _ => return Err(MeshError::parse(line_no, format!("unsupported format `{line}`"))),
                });
            }
            Some("element") => {
                let count: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| MeshError::parse(line_no, "bad element count"))?;
                match toks.get(1).copied() {
                    Some("vertex") if vertex_count.is_none() && face_count.is_none() => {
                        vertex_count = Some(count);
                        current = Some("vertex");
                    }
                    Some("face") if vertex_count.is_some() && face_count.is_none() => {
                        face_count = Some(count);
                        current = Some("face");
                    }
                    _ => return Err(MeshError::parse(line_no, format!("unsupported element `{line}`"))),
                }
            }
            Some("property") => match current {
                Some("vertex") => {
                    if toks.len() != 3 {
                        return Err(MeshError::parse(line_no, "vertex properties must be scalars"));
                    }
                    let ty = Scalar::parse(toks[1])
                        .ok_or_else(|| MeshError::parse(line_no, format!("unknown type `{}`", toks[1])))?;
                    let field = match toks[2] {
                        "x" => VertexField::X,
                        "y" => VertexField::Y,
                        "z" => VertexField::Z,
                        "red" => VertexField::Red,
                        "green" => VertexField::Green,
                        "blue" => VertexField::Blue,
                        "u" => VertexField::U,
                        "v" => VertexField::V,
                        _ => VertexField::Ignored,
                    };
                    if field != VertexField::Ignored && vertex_props.iter().any(|(f, _)| *f == field) {
                        return Err(MeshError::parse(line_no, format!("duplicate property `{}`", toks[2])));
                    }
                    vertex_props.push((field, ty));
                }
                Some("face") => {
                    let ok_name = matches!(toks.get(4).copied(), Some("vertex_indices") | Some("vertex_index"));
                    if toks.len() != 5 || toks[1] != "list" || !ok_name || face_list.is_some() {
                        return Err(MeshError::parse(line_no, format!("unsupported face property `{line}`")));
                    }
                    let count_ty = Scalar::parse(toks[2]).filter(|t| !t.is_float());
                    let index_ty = Scalar::parse(toks[3]).filter(|t| !t.is_float());
                    match (count_ty, index_ty) {
                        (Some(c), Some(i)) => face_list = Some((c, i)),
                        _ => return Err(MeshError::parse(line_no, "face list types must be integral")),
                    }
                }
                _ => return Err(MeshError::parse(line_no, "property before element")),
            },
            Some("end_header") => break,
            Some(other) => return Err(MeshError::parse(line_no, format!("unexpected header keyword `{other}`"))),
        }
    }

    let binary = binary.ok_or_else(|| MeshError::parse(line_no, "missing format line"))?;
    let vertex_count = vertex_count.ok_or_else(|| MeshError::parse(line_no, "missing vertex element"))?;
    let face_count = face_count.unwrap_or(0);
    let has = |f: VertexField| vertex_props.iter().any(|(g, _)| *g == f);
    if !(has(VertexField::X) && has(VertexField::Y) && has(VertexField::Z)) {
        return Err(MeshError::parse(line_no, "vertex element needs x, y, z"));
    }
    let color_n = [VertexField::Red, VertexField::Green, VertexField::Blue]
        .iter()
        .filter(|f| has(**f))
        .count();
    if color_n != 0 && color_n != 3 {
        return Err(MeshError::parse(line_no, "partial color properties"));
    }
    if has(VertexField::U) != has(VertexField::V) {
        return Err(MeshError::parse(line_no, "partial uv properties"));
    }
    if face_count > 0 && face_list.is_none() {
        return Err(MeshError::parse(line_no, "face element without vertex_indices"));
    }
    Ok(PlyHeader {
        binary,
        vertex_count,
        face_count,
        vertex_props,
        face_list: face_list.unwrap_or((Scalar::U8, Scalar::I32)),
        lines: line_no,
        body_offset: offset.min(bytes.len()),
    })
}

struct VertexSink {
    vertices: Vec<[f64; 3]>,
    colors: Vec<[f64; 3]>,
    uv: Vec<[f64; 2]>,
}

impl VertexSink {
    fn push(&mut self, props: &[(VertexField, Scalar)], values: &[f64]) {
        let mut p = [0.0; 3];
        let mut c = [0.0; 3];
        let mut t = [0.0; 2];
        for (&(field, ty), &v) in props.iter().zip(values) {
            let col = if ty == Scalar::U8 { v / 255.0 } else { v };
            match field {
                VertexField::X => p[0] = v,
                VertexField::Y => p[1] = v,
                VertexField::Z => p[2] = v,
                VertexField::Red => c[0] = col,
                VertexField::Green => c[1] = col,
                VertexField::Blue => c[2] = col,
                VertexField::U => t[0] = v,
                VertexField::V => t[1] = v,
                VertexField::Ignored => {}
            }
        }
        self.vertices.push(p);
        self.colors.push(c);
        self.uv.push(t);
    }
}

fn face_from(count: f64, idx: &[f64], line: usize) -> Result<[usize; 3], MeshError> {
    if count != 3.0 {
        return Err(MeshError::parse(line, format!("face has {count} vertices; only triangles are supported")));
    }
    let mut f = [0usize; 3];
    for (slot, &v) in f.iter_mut().zip(idx) {
        if v < 0.0 {
            return Err(MeshError::parse(line, "negative face index"));
        }
        *slot = v as usize;
    }
    Ok(f)
}

/// Parses an ASCII or binary little-endian PLY file.
pub fn read_ply(bytes: &[u8]) -> Result<TexturedMesh, MeshError> {
    let h = parse_ply_header(bytes)?;
    let body = &bytes[h.body_offset..];
    let mut sink = VertexSink {
        vertices: Vec::with_capacity(h.vertex_count),
        colors: Vec::with_capacity(h.vertex_count),
        uv: Vec::with_capacity(h.vertex_count),
    };
    let mut faces = Vec::with_capacity(h.face_count);
    let nprops = h.vertex_props.len();

    if h.binary {
        let stride: usize = h.vertex_props.iter().map(|(_, t)| t.size()).sum();
        let mut pos = 0;
        let mut values = vec![0.0; nprops];
        let record = h.lines;
        for i in 0..h.vertex_count {
            if pos + stride > body.len() {
                return Err(MeshError::parse(record, format!("truncated binary body at vertex {i}")));
            }
            for (slot, (_, ty)) in values.iter_mut().zip(&h.vertex_props) {
                *slot = ty.read_le(&body[pos..]);
                pos += ty.size();
            }
            sink.push(&h.vertex_props, &values);
        }
        let (cty, ity) = h.face_list;
        for i in 0..h.face_count {
            if pos + cty.size() > body.len() {
                return Err(MeshError::parse(record, format!("truncated binary body at face {i}")));
            }
            let count = cty.read_le(&body[pos..]);
            pos += cty.size();
            let n = count as usize;
            if pos + n * ity.size() > body.len() {
                return Err(MeshError::parse(record, format!("truncated binary body at face {i}")));
            }
            let idx: Vec<f64> = (0..n).map(|k| ity.read_le(&body[pos + k * ity.size()..])).collect();
            pos += n * ity.size();
            faces.push(face_from(count, &idx, record)?);
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| MeshError::parse(h.lines, "ASCII body is not UTF-8"))?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (h.lines + 1 + i, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut values = vec![0.0; nprops];
        for i in 0..h.vertex_count {
            let (line, l) = lines
                .next()
                .ok_or_else(|| MeshError::parse(h.lines, format!("missing vertex record {i}")))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != nprops {
                return Err(MeshError::parse(line, format!("expected {nprops} values, got {}", toks.len())));
            }
            for ((slot, tok), (_, ty)) in values.iter_mut().zip(&toks).zip(&h.vertex_props) {
                *slot = ty
                    .parse_text(tok)
                    .ok_or_else(|| MeshError::parse(line, format!("invalid value `{tok}`")))?;
            }
            sink.push(&h.vertex_props, &values);
        }
        let (cty, ity) = h.face_list;
        for i in 0..h.face_count {
            let (line, l) = lines
                .next()
                .ok_or_else(|| MeshError::parse(h.lines, format!("missing face record {i}")))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            let count = toks
                .first()
                .and_then(|t| cty.parse_text(t))
                .ok_or_else(|| MeshError::parse(line, "invalid face count"))?;
            if toks.len() != count as usize + 1 {
                return Err(MeshError::parse(line, "face record length does not match its count"));
            }
            let idx = toks[1..]
                .iter()
                .map(|t| ity.parse_text(t).ok_or_else(|| MeshError::parse(line, format!("invalid index `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            faces.push(face_from(count, &idx, line)?);
        }
        if let Some((line, _)) = lines.next() {
            return Err(MeshError::parse(line, "trailing data after last element"));
        }
    }

    let has = |f: VertexField| h.vertex_props.iter().any(|(g, _)| *g == f);
    let colors = has(VertexField::Red).then_some(sink.colors);
    let uv = has(VertexField::U).then_some(sink.uv);
    TexturedMesh::new(sink.vertices, faces, colors, uv)
}

fn sig9(x: f64) -> String {
    format!("{:.8e}", x as f32)
}

/// Writes the canonical ASCII PLY form: `float` positions and uv with nine
/// significant digits, `uchar` colors. Color properties are omitted when every
/// vertex carries the default gray, so that such meshes read back unchanged.
pub fn write_ply_to<W: Write>(mesh: &TexturedMesh, mut w: W) -> std::io::Result<()> {
    let with_color = mesh.colors.iter().any(|c| *c != DEFAULT_COLOR);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property float {p}")?;
    }
    if with_color {
        for p in ["red", "green", "blue"] {
            writeln!(w, "property uchar {p}")?;
        }
    }
    if mesh.uv.is_some() {
        writeln!(w, "property float u")?;
        writeln!(w, "property float v")?;
    }
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(w, "{} {} {}", sig9(v[0]), sig9(v[1]), sig9(v[2]))?;
        if with_color {
            let c = mesh.colors[i];
            let q = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
            write!(w, " {} {} {}", q(c[0]), q(c[1]), q(c[2]))?;
        }
        if let Some(uv) = &mesh.uv {
            write!(w, " {} {}", sig9(uv[i][0]), sig9(uv[i][1]))?;
        }
        writeln!(w)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// Writes the OBJ subset read by [`read_obj`]. Values use the shortest
/// decimal form that parses back to the same `f64`, so the round trip is exact.
/// Texture coordinates are written one per vertex and referenced as `i/i`.
pub fn write_obj_to<W: Write>(mesh: &TexturedMesh, mut w: W) -> std::io::Result<()> {
    let with_color = mesh.colors.iter().any(|c| *c != DEFAULT_COLOR);
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(w, "v {:?} {:?} {:?}", v[0], v[1], v[2])?;
        if with_color {
            let c = mesh.colors[i];
            write!(w, " {:?} {:?} {:?}", c[0], c[1], c[2])?;
        }
        writeln!(w)?;
    }
    if let Some(uv) = &mesh.uv {
        for t in uv {
            writeln!(w, "vt {:?} {:?}", t[0], t[1])?;
        }
    }
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| i + 1);
        if mesh.uv.is_some() {
            writeln!(w, "f {a}/{a} {b}/{b} {c}/{c}")?;
        } else {
            writeln!(w, "f {a} {b} {c}")?;
        }
    }
    Ok(())
}

pub fn write_obj(mesh: &TexturedMesh, path: impl AsRef<Path>) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_obj_to(mesh, &mut w)?;
    w.flush()
}

pub fn write_ply(mesh: &TexturedMesh, path: impl AsRef<Path>) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_ply_to(mesh, &mut w)?;
    w.flush()
}
