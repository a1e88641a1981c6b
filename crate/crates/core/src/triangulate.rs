//! Triangulations at the level of edge classes, and the `tvtri` text format.
//!
//! ```text
//! tvtri 1
//! name fig8
//! vertices 0
//! edges 2
//! face 1 0 0
//! tet 0 1 1 0 0 1      # e12 e13 e23 e34 e24 e14
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions of the four faces of a tetrahedron inside its 6-tuple of edges.
pub const TET_FACES: [[usize; 3]; 4] = [[0, 1, 2], [2, 3, 4], [0, 4, 5], [1, 3, 5]];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangulation {
    name: String,
    vertices: usize,
    edges: usize,
    faces: Vec<[usize; 3]>,
    tetrahedra: Vec<[usize; 6]>,
}

fn sorted<const N: usize>(mut a: [usize; N]) -> [usize; N] {
    a.sort_unstable();
    a
}

impl Triangulation {
    /// Builds and validates a triangulation.
    pub fn new(
        name: impl Into<String>,
        vertices: usize,
        edges: usize,
        faces: Vec<[usize; 3]>,
        tetrahedra: Vec<[usize; 6]>,
    ) -> Result<Self> {
        let tri = Self { name: name.into(), vertices, edges, faces, tetrahedra };
        tri.validate()?;
        Ok(tri)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_triangulation(text)
    }

    fn validate(&self) -> Result<()> {
        if self.tetrahedra.is_empty() {
            return Err(Error::Validation("no tetrahedra".into()));
        }
        for (f, face) in self.faces.iter().enumerate() {
            if let Some(&e) = face.iter().find(|&&e| e >= self.edges) {
                return Err(Error::Validation(format!("face {f} uses edge {e}, only {} edges", self.edges)));
            }
        }
        let face_keys: Vec<[usize; 3]> = self.faces.iter().copied().map(sorted).collect();
        for (t, tet) in self.tetrahedra.iter().enumerate() {
            if let Some(&e) = tet.iter().find(|&&e| e >= self.edges) {
                return Err(Error::Validation(format!("tet {t} uses edge {e}, only {} edges", self.edges)));
            }
            for pos in TET_FACES {
                let key = sorted(pos.map(|p| tet[p]));
                if !face_keys.contains(&key) {
                    return Err(Error::Validation(format!(
                        "tet {t} face {key:?} matches no listed face"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of interior vertices (0 for ideal triangulations).
    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_tetrahedra(&self) -> usize {
        self.tetrahedra.len()
    }

    /// Edge triple of every face, indexed by face.
    pub fn face_edge_incidence(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn tetrahedra(&self) -> &[[usize; 6]] {
        &self.tetrahedra
    }

    /// `(e12, e13, e23, e34, e24, e14)` of tetrahedron `tet`.
    pub fn tetra_edge_labels(&self, tet: usize) -> Option<[usize; 6]> {
        self.tetrahedra.get(tet).copied()
    }

    /// Number of tetrahedron edge slots carrying each edge class.
    pub fn valence(&self) -> Vec<usize> {
        let mut v = vec![0; self.edges];
        for tet in &self.tetrahedra {
            for &e in tet {
                v[e] += 1;
            }
        }
        v
    }

    /// `V - E + F - T`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces.len() as i64
            - self.tetrahedra.len() as i64
    }
}

impl FromStr for Triangulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_triangulation(s)
    }
}

impl fmt::Display for Triangulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tvtri 1")?;
        writeln!(f, "name {}", self.name)?;
        writeln!(f, "vertices {}", self.vertices)?;
        writeln!(f, "edges {}", self.edges)?;
        for [a, b, c] in &self.faces {
            writeln!(f, "face {a} {b} {c}")?;
        }
        for t in &self.tetrahedra {
            writeln!(f, "tet {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5])?;
        }
        Ok(())
    }
}

fn parse_indices<const N: usize>(line: usize, args: &[&str]) -> Result<[usize; N]> {
    if args.len() != N {
        return Err(Error::Parse { line, message: format!("expected {N} indices, got {}", args.len()) });
    }
    let mut out = [0; N];
    for (slot, a) in out.iter_mut().zip(args) {
        *slot = a
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad index {a:?}") })?;
    }
    Ok(out)
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<()> {
    if slot.is_some() {
        return Err(Error::Parse { line, message: format!("duplicate {key}") });
    }
    *slot = Some(value);
    Ok(())
}

/// Parses and validates `tvtri 1` text.
pub fn parse_triangulation(text: &str) -> Result<Triangulation> {
    let mut header = false;
    let mut name = None;
    let mut vertices = None;
    let mut edges = None;
    let mut faces = Vec::new();
    let mut tets = Vec::new();
    let mut last = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let key = words.next().unwrap_or_default();
        let args: Vec<&str> = words.collect();
        if !header {
            if key == "tvtri" && args == ["1"] {
                header = true;
                continue;
            }
            return Err(Error::Parse { line, message: "expected header `tvtri 1`".into() });
        }
        let count = |what: &str| -> Result<usize> {
            match args.as_slice() {
                [n] => n
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad {what} count {n:?}") }),
                _ => Err(Error::Parse { line, message: format!("`{what}` takes one number") }),
            }
        };
        match key {
            "name" => {
                let rest = content["name".len()..].trim();
                if rest.is_empty() {
                    return Err(Error::Parse { line, message: "empty name".into() });
                }
                set_once(&mut name, rest.to_string(), "name", line)?;
            }
            "vertices" => set_once(&mut vertices, count("vertices")?, "vertices", line)?,
            "edges" => set_once(&mut edges, count("edges")?, "edges", line)?,
            "face" => faces.push(parse_indices::<3>(line, &args)?),
            "tet" => tets.push(parse_indices::<6>(line, &args)?),
            "tvtri" => return Err(Error::Parse { line, message: "duplicate header".into() }),
            other => {
                return Err(Error::Parse { line, message: format!("unknown keyword {other:?}") })
            }
        }
    }
    if !header {
        return Err(Error::Parse { line: last.max(1), message: "missing header `tvtri 1`".into() });
    }
    let missing = |what: &str| Error::Parse { line: last, message: format!("missing `{what}` line") };
    Triangulation::new(
        name.ok_or_else(|| missing("name"))?,
        vertices.ok_or_else(|| missing("vertices"))?,
        edges.ok_or_else(|| missing("edges"))?,
        faces,
        tets,
    )
}

/// Shipped triangulations with their mod-2 Betti numbers.
pub mod fixtures {
    use super::Triangulation;

    pub const FIG8_TVTRI: &str = include_str!("../../../fixtures/fig8.tvtri");
    pub const S3_TVTRI: &str = include_str!("../../../fixtures/s3.tvtri");

    #[derive(Debug, Clone, Copy)]
    pub struct Fixture {
        pub name: &'static str,
        pub text: &'static str,
        /// Closed manifold (as opposed to an ideal triangulation of a link complement).
        pub closed: bool,
        pub b0: u32,
        pub b2: u32,
    }

    impl Fixture {
        pub fn triangulation(&self) -> Triangulation {
            Triangulation::parse(self.text).expect("shipped fixture parses")
        }

        /// Level-3 invariant: `2^{b2-b0}` when closed, `2^{b2}` for a link complement.
        pub fn expected_tv3(&self) -> f64 {
            let e = if self.closed { self.b2 as i32 - self.b0 as i32 } else { self.b2 as i32 };
            2f64.powi(e)
        }
    }

    pub const FIG8: Fixture = Fixture { name: "fig8", text: FIG8_TVTRI, closed: false, b0: 1, b2: 0 };
    pub const S3: Fixture = Fixture { name: "s3", text: S3_TVTRI, closed: true, b0: 1, b2: 0 };
    pub const ALL: [Fixture; 2] = [FIG8, S3];

    pub fn fig8() -> Triangulation {
        FIG8.triangulation()
    }

    pub fn s3() -> Triangulation {
        S3.triangulation()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse_and_have_expected_shape() {
        let f = fixtures::fig8();
        assert_eq!((f.num_vertices(), f.num_edges(), f.num_faces(), f.num_tetrahedra()), (0, 2, 4, 2));
        assert_eq!(f.valence(), vec![6, 6]);
        assert_eq!(f.euler_characteristic(), 0);
        let s = fixtures::s3();
        assert_eq!((s.num_vertices(), s.num_edges(), s.num_tetrahedra()), (1, 3, 2));
        assert_eq!(s.euler_characteristic(), 0);
        for fx in fixtures::ALL {
            let t = fx.triangulation();
            assert_eq!(t.num_faces(), 2 * t.num_tetrahedra());
            assert_eq!(t.name(), fx.name);
        }
    }

    #[test]
    fn round_trip() {
        for fx in fixtures::ALL {
            let t = fx.triangulation();
            let again: Triangulation = t.to_string().parse().unwrap();
            assert_eq!(t, again);
        }
    }

    #[test]
    fn accessors() {
        let f = fixtures::fig8();
        assert_eq!(f.tetra_edge_labels(0), Some([0, 1, 1, 0, 0, 1]));
        assert_eq!(f.tetra_edge_labels(2), None);
        assert_eq!(f.face_edge_incidence()[0], [1, 0, 0]);
    }

    #[test]
    fn empty_tetrahedra_rejected() {
        let text = "tvtri 1\nname x\nvertices 0\nedges 1\nface 0 0 0\n";
        assert!(matches!(parse_triangulation(text), Err(Error::Validation(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "tvtri 1\nname x\nvertices 0\nedges 2\nface 0 1\n";
        assert_eq!(parse_triangulation(bad).unwrap_err(), Error::Parse {
            line: 5,
            message: "expected 3 indices, got 2".into()
        });
        let bad = "# comment\n\ntvtri 2\n";
        assert!(matches!(parse_triangulation(bad), Err(Error::Parse { line: 3, .. })));
        let bad = "tvtri 1\nname x\nvertices 0\nedges 2\nfase 0 1 1\n";
        assert!(matches!(parse_triangulation(bad), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(parse_triangulation(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_names_the_simplex() {
        let text = "tvtri 1\nname x\nvertices 0\nedges 2\nface 0 0 0\ntet 0 0 0 0 0 1\n";
        let err = parse_triangulation(text).unwrap_err();
        assert!(err.to_string().contains("tet 0"), "{err}");
        let text = "tvtri 1\nname x\nvertices 0\nedges 1\nface 0 0 3\ntet 0 0 0 0 0 0\n";
        assert!(parse_triangulation(text).unwrap_err().to_string().contains("face 0"));
    }
}
