use std::collections::HashMap;
use std::fmt::Write as _;

use super::{BoxRoom, GeometryError};

/// Indexed triangle mesh, vertices in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        for (i, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&v| v >= vertices.len()) {
                return Err(GeometryError::Parse {
                    line: 0,
                    message: format!(
                        "face {i} references vertex {bad} but only {} exist",
                        vertices.len()
                    ),
                });
            }
        }
        if let Some(v) = vertices.iter().flatten().find(|c| !c.is_finite()) {
            return Err(GeometryError::Parse {
                line: 0,
                message: format!("non-finite vertex coordinate {v}"),
            });
        }
        Ok(Self { vertices, faces })
    }

    /// Closed box spanning `[0, L]` on each axis with outward-facing
    /// triangles.
    pub fn from_box(room: &BoxRoom) -> Self {
        let [lx, ly, lz] = room.dims();
        let vertices = (0..8)
            .map(|i| {
                [
                    if i & 1 != 0 { lx } else { 0.0 },
                    if i & 2 != 0 { ly } else { 0.0 },
                    if i & 4 != 0 { lz } else { 0.0 },
                ]
            })
            .collect();
        let faces = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Self { vertices, faces }
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(mut lo, mut hi), v| {
                    for k in 0..3 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                    (lo, hi)
                }),
        )
    }

    /// Every undirected edge must be shared by exactly two faces.
    pub fn check_watertight(&self) -> Result<(), GeometryError> {
        if self.faces.is_empty() {
            return Err(GeometryError::NotWatertight(0, 0, 0));
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *edges.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        let mut bad: Vec<_> = edges.into_iter().filter(|&(_, n)| n != 2).collect();
        bad.sort_unstable();
        match bad.first() {
            Some(&((u, v), n)) => Err(GeometryError::NotWatertight(u, v, n)),
            None => Ok(()),
        }
    }

    /// Enclosed volume by the divergence theorem (absolute value, so
    /// either winding works).
    pub fn volume(&self) -> f64 {
        let six_v: f64 = (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0])
            })
            .sum();
        (six_v / 6.0).abs()
    }

    /// Canonical OBJ text. Coordinates use the shortest representation
    /// that parses back to the same `f64`.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }
}

/// Parse ASCII STL or the vertex/face subset of OBJ. The format is chosen
/// by the first keyword: `solid` means STL.
pub fn parse_mesh(text: &str) -> Result<TriangleMesh, GeometryError> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    match first {
        Some(l) if l.split_whitespace().next() == Some("solid") => parse_stl(text),
        _ => parse_obj(text),
    }
}

fn perr(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_coords<'a>(
    line: usize,
    mut tokens: impl Iterator<Item = &'a str>,
) -> Result<[f64; 3], GeometryError> {
    let mut out = [0.0; 3];
    for slot in &mut out {
        let tok = tokens
            .next()
            .ok_or_else(|| perr(line, "expected 3 coordinates"))?;
        *slot = tok
            .parse::<f64>()
            .map_err(|_| perr(line, format!("invalid number '{tok}'")))?;
        if !slot.is_finite() {
            return Err(perr(line, format!("non-finite coordinate '{tok}'")));
        }
    }
    Ok(out)
}

fn parse_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, [usize; 3])> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => {}
            Some("v") => {
                vertices.push(parse_coords(line_no, &mut tokens)?);
                // an optional homogeneous weight is tolerated only if it is 1
                if let Some(w) = tokens.next() {
                    if w.parse::<f64>().ok() != Some(1.0) {
                        return Err(perr(line_no, "unexpected extra vertex component"));
                    }
                }
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(perr(
                        line_no,
                        format!("only triangles are supported, got {} vertices", idx.len()),
                    ));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let n: usize = head
                        .parse()
                        .map_err(|_| perr(line_no, format!("invalid face index '{tok}'")))?;
                    if n == 0 {
                        return Err(perr(line_no, "face indices are 1-based"));
                    }
                    *slot = n - 1;
                }
                faces.push((line_no, face));
            }
            Some("vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib") => {}
            Some(other) => return Err(perr(line_no, format!("unsupported record '{other}'"))),
        }
    }
    for (line_no, face) in &faces {
        if let Some(&bad) = face.iter().find(|&&v| v >= vertices.len()) {
            return Err(perr(
                *line_no,
                format!(
                    "face references vertex {} but only {} are defined",
                    bad + 1,
                    vertices.len()
                ),
            ));
        }
    }
    TriangleMesh::new(vertices, faces.into_iter().map(|(_, f)| f).collect())
}

fn parse_stl(text: &str) -> Result<TriangleMesh, GeometryError> {
    #[derive(PartialEq)]
    enum State {
        Start,
        Solid,
        Facet,
        Loop(usize),
        EndLoop,
        Done,
    }

    let mut state = State::Start;
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut current = [0usize; 3];

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut tokens = raw.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        state = match (state, keyword) {
            (State::Start, "solid") => State::Solid,
            (State::Solid, "facet") => {
                if tokens.next() != Some("normal") {
                    return Err(perr(line_no, "expected 'facet normal'"));
                }
                parse_coords(line_no, tokens)?;
                State::Facet
            }
            (State::Solid, "endsolid") => State::Done,
            (State::Facet, "outer") => {
                if tokens.next() != Some("loop") {
                    return Err(perr(line_no, "expected 'outer loop'"));
                }
                State::Loop(0)
            }
            (State::Loop(n), "vertex") if n < 3 => {
                let v = parse_coords(line_no, tokens)?;
                let key = [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()];
                current[n] = *lookup.entry(key).or_insert_with(|| {
                    vertices.push(v);
                    vertices.len() - 1
                });
                State::Loop(n + 1)
            }
            (State::Loop(3), "endloop") => State::EndLoop,
            (State::Loop(_), "endloop") => {
                return Err(perr(line_no, "only triangles are supported"));
            }
            (State::EndLoop, "endfacet") => {
                faces.push(current);
                State::Solid
            }
            (State::Done, _) => return Err(perr(line_no, "content after endsolid")),
            (_, other) => return Err(perr(line_no, format!("unexpected '{other}'"))),
        };
    }
    if state != State::Done {
        return Err(perr(text.lines().count(), "missing endsolid"));
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FACET: &str = "solid t
  facet normal 0 0 1
    outer loop
      vertex 0 0 0
      vertex 1 0 0
      vertex 0 1 0
    endloop
  endfacet
endsolid t
";

    fn unit_cube_obj() -> String {
        let room = BoxRoom::new("u", 1.0, 1.0, 1.0).unwrap();
        TriangleMesh::from_box(&room).to_obj()
    }

    #[test]
    fn single_facet_stl() {
        let m = parse_mesh(FACET).unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert!(m.check_watertight().is_err());
    }

    #[test]
    fn cube_obj_is_watertight() {
        let m = parse_mesh(&unit_cube_obj()).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.faces().len(), 12);
        m.check_watertight().unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_face() {
        let mut text = unit_cube_obj();
        text.push_str("f 1 2 9\n");
        let err = parse_mesh(&text).unwrap_err();
        assert_eq!(
            err,
            GeometryError::Parse {
                line: 21,
                message: "face references vertex 9 but only 8 are defined".into()
            }
        );
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(
            parse_mesh("v 0 0 0\nv 1 0\n"),
            Err(GeometryError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_mesh("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"),
            Err(GeometryError::Parse { line: 5, .. })
        ));
        assert!(matches!(
            parse_mesh("v 0 0 0\nf 0 1 1\n"),
            Err(GeometryError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_mesh("curve 1 2\n"),
            Err(GeometryError::Parse { line: 1, .. })
        ));
        let quad = FACET.replace(
            "      vertex 0 1 0\n",
            "      vertex 0 1 0\n      vertex 1 1 0\n",
        );
        assert!(matches!(
            parse_mesh(&quad),
            Err(GeometryError::Parse { .. })
        ));
        let truncated = FACET.replace("endsolid t\n", "");
        assert!(parse_mesh(&truncated).is_err());
    }

    #[test]
    fn obj_slash_indices_and_comments() {
        let text = "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn stl_merges_shared_vertices() {
        let room = BoxRoom::new("b", 2.0, 1.0, 0.5).unwrap();
        let cube = TriangleMesh::from_box(&room);
        let mut stl = String::from("solid box\n");
        for f in 0..cube.faces().len() {
            stl.push_str("facet normal 0 0 0\nouter loop\n");
            for v in cube.triangle(f) {
                stl.push_str(&format!("vertex {} {} {}\n", v[0], v[1], v[2]));
            }
            stl.push_str("endloop\nendfacet\n");
        }
        stl.push_str("endsolid box\n");
        let m = parse_mesh(&stl).unwrap();
        assert_eq!(m.vertices().len(), 8);
        m.check_watertight().unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }
}
