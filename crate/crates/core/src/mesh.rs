//! Conforming triangular meshes of rectangles and boundary treatment.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::MeshError;
use crate::pde::Vars;

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Side of the rectangular domain a boundary face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `x = x0`
    Left,
    /// `x = x1`
    Right,
    /// `y = y0`
    Bottom,
    /// `y = y1`
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }
}

/// Exact state as a function of position and time.
pub type StateFn = Arc<dyn Fn(Point, f64) -> Vars + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    Periodic,
    /// Reflective wall; scalar systems copy the interior trace.
    Wall,
    Dirichlet(StateFn),
    Transmissive,
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Periodic => write!(f, "Periodic"),
            BoundaryCondition::Wall => write!(f, "Wall"),
            BoundaryCondition::Dirichlet(_) => write!(f, "Dirichlet(..)"),
            BoundaryCondition::Transmissive => write!(f, "Transmissive"),
        }
    }
}

/// Boundary condition per domain side.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    sides: [BoundaryCondition; 4],
}

impl BoundarySpec {
    pub fn new(
        left: BoundaryCondition,
        right: BoundaryCondition,
        bottom: BoundaryCondition,
        top: BoundaryCondition,
    ) -> Result<Self, MeshError> {
        let periodic = |bc: &BoundaryCondition| matches!(bc, BoundaryCondition::Periodic);
        if periodic(&left) != periodic(&right) || periodic(&bottom) != periodic(&top) {
            return Err(MeshError::InvalidArgument(
                "periodic sides must come in opposing pairs".into(),
            ));
        }
        Ok(Self {
            sides: [left, right, bottom, top],
        })
    }

    pub fn uniform(bc: BoundaryCondition) -> Result<Self, MeshError> {
        Self::new(bc.clone(), bc.clone(), bc.clone(), bc)
    }

    pub fn periodic() -> Self {
        Self::uniform(BoundaryCondition::Periodic).expect("periodic on all sides is paired")
    }

    pub fn side(&self, side: Side) -> &BoundaryCondition {
        &self.sides[side.index()]
    }

    pub fn is_periodic(&self, side: Side) -> bool {
        matches!(self.side(side), BoundaryCondition::Periodic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    Interior { right: usize },
    Boundary { side: Side },
}

#[derive(Debug, Clone)]
pub struct Face {
    pub vertices: [usize; 2],
    pub left: usize,
    pub kind: FaceKind,
    /// Unit normal pointing out of the left cell.
    pub normal: Point,
    pub length: f64,
    /// For boundary faces: the matching face on the opposite side, if any.
    pub partner: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Counter-clockwise vertex ids.
    pub vertices: [usize; 3],
    /// Face ids; local face `k` joins vertices `k` and `k + 1`.
    pub faces: [usize; 3],
    pub barycenter: Point,
    pub area: f64,
    /// Circumradius, the cell size used by the modal basis.
    pub circumradius: f64,
    pub inradius: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub domain: Rect,
    /// Mean circumradius.
    pub mean_h: f64,
}

/// What lies across a cell face once boundary conditions are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Across {
    /// A neighbor cell; a point `p` on the face maps to `p + offset` in that cell's frame.
    Cell { cell: usize, offset: Point },
    Ghost { side: Side, rule: GhostRule },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostRule {
    Reflect,
    Dirichlet,
    Transmissive,
}

impl Mesh {
    /// Structured mesh: each of the `nx × ny` rectangles is split along its
    /// lower-left to upper-right diagonal.
    pub fn structured(nx: usize, ny: usize, domain: Rect) -> Result<Mesh, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidArgument(format!(
                "cell counts must be positive, got {nx} x {ny}"
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(MeshError::InvalidArgument(format!("degenerate domain {domain:?}")));
        }
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * dy };
            for i in 0..=nx {
                let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * dx };
                vertices.push([x, y]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (ll, lr, ur, ul) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([ll, lr, ur]);
                cells.push([ll, ur, ul]);
            }
        }
        Self::from_cells(vertices, cells, Some(domain))
    }

    /// Reads the plain-text format: `NV NC`, then `NV` lines `x y`, then `NC`
    /// lines `v0 v1 v2` (0-based).
    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, message: String| MeshError::Parse { line, message };
        let (line, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(line, format!("bad header: {e}")))?;
        let [nv, nc] = counts[..] else {
            return Err(parse_err(line, "header must be `NV NC`".into()));
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file in vertex list".into()))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(line, format!("bad vertex: {e}")))?;
            let [x, y] = xy[..] else {
                return Err(parse_err(line, "vertex line must be `x y`".into()));
            };
            vertices.push([x, y]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file in cell list".into()))?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(line, format!("bad cell: {e}")))?;
            let [a, b, c] = ids[..] else {
                return Err(parse_err(line, "cell line must be `v0 v1 v2`".into()));
            };
            if a.max(b).max(c) >= nv {
                return Err(parse_err(line, format!("vertex id out of range (NV = {nv})")));
            }
            cells.push([a, b, c]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "trailing data after cell list".into()));
        }
        Self::from_cells(vertices, cells, None)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.vertices.len(), self.cells.len());
        for v in &self.vertices {
            s.push_str(&format!("{:.17e} {:.17e}\n", v[0], v[1]));
        }
        for c in &self.cells {
            s.push_str(&format!("{} {} {}\n", c.vertices[0], c.vertices[1], c.vertices[2]));
        }
        s
    }

    fn from_cells(
        vertices: Vec<Point>,
        cell_vertices: Vec<[usize; 3]>,
        domain: Option<Rect>,
    ) -> Result<Mesh, MeshError> {
        if cell_vertices.is_empty() {
            return Err(MeshError::InvalidArgument("mesh has no cells".into()));
        }
        let domain = domain.unwrap_or_else(|| bounding_box(&vertices));
        let mut cells = Vec::with_capacity(cell_vertices.len());
        for (ci, mut vs) in cell_vertices.into_iter().enumerate() {
            let mut area = signed_area(&vertices, vs);
            if area < 0.0 {
                vs.swap(1, 2);
                area = -area;
            }
            if !(area > 0.0) {
                return Err(MeshError::DegenerateCell { cell: ci, area });
            }
            let [a, b, c] = vs.map(|v| vertices[v]);
            let la = dist(b, c);
            let lb = dist(a, c);
            let lc = dist(a, b);
            cells.push(Cell {
                vertices: vs,
                faces: [usize::MAX; 3],
                barycenter: [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
                area,
                circumradius: la * lb * lc / (4.0 * area),
                inradius: 2.0 * area / (la + lb + lc),
            });
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        for ci in 0..cells.len() {
            for k in 0..3 {
                let a = cells[ci].vertices[k];
                let b = cells[ci].vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    Some(&fi) => {
                        let face = &mut faces[fi];
                        if !matches!(face.kind, FaceKind::Boundary { .. }) || face.partner.is_some()
                        {
                            return Err(MeshError::Topology(format!(
                                "edge ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        // Mark as interior; left is the lower id since cells are visited in order.
                        face.kind = FaceKind::Interior { right: ci };
                        cells[ci].faces[k] = fi;
                    }
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let length = dist(pa, pb);
                        let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                        edge_map.insert(key, faces.len());
                        cells[ci].faces[k] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            left: ci,
                            // Provisional; resolved below.
                            kind: FaceKind::Boundary { side: Side::Left },
                            normal,
                            length,
                            partner: None,
                        });
                    }
                }
            }
        }
        let mut interior_seen = vec![false; faces.len()];
        for (fi, face) in faces.iter().enumerate() {
            if let FaceKind::Interior { .. } = face.kind {
                interior_seen[fi] = true;
            }
        }

        let scale = domain.width().max(domain.height());
        let tol = 1e-10 * scale;
        let mut by_side: [Vec<usize>; 4] = Default::default();
        for (fi, face) in faces.iter_mut().enumerate() {
            if interior_seen[fi] {
                continue;
            }
            let [pa, pb] = face.vertices.map(|v| vertices[v]);
            let side = if (pa[0] - domain.x0).abs() < tol && (pb[0] - domain.x0).abs() < tol {
                Side::Left
            } else if (pa[0] - domain.x1).abs() < tol && (pb[0] - domain.x1).abs() < tol {
                Side::Right
            } else if (pa[1] - domain.y0).abs() < tol && (pb[1] - domain.y0).abs() < tol {
                Side::Bottom
            } else if (pa[1] - domain.y1).abs() < tol && (pb[1] - domain.y1).abs() < tol {
                Side::Top
            } else {
                return Err(MeshError::Topology(format!(
                    "boundary face {fi} ({pa:?} - {pb:?}) does not lie on the domain boundary"
                )));
            };
            face.kind = FaceKind::Boundary { side };
            by_side[side.index()].push(fi);
        }

        // Periodic partners: match midpoints along the shared coordinate.
        for (a_side, b_side, axis) in [(Side::Left, Side::Right, 1), (Side::Bottom, Side::Top, 0)] {
            let mid = |fi: usize| {
                let f = &faces[fi];
                let [pa, pb] = f.vertices.map(|v| vertices[v]);
                0.5 * (pa[axis] + pb[axis])
            };
            let mut b_sorted: Vec<(f64, usize)> =
                by_side[b_side.index()].iter().map(|&f| (mid(f), f)).collect();
            b_sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut matches = Vec::new();
            for &fa in &by_side[a_side.index()] {
                let m = mid(fa);
                let pos = b_sorted.partition_point(|x| x.0 < m - tol);
                if let Some(&(mb, fb)) = b_sorted.get(pos) {
                    if (mb - m).abs() < tol && (faces[fb].length - faces[fa].length).abs() < tol {
                        matches.push((fa, fb));
                    }
                }
            }
            for (fa, fb) in matches {
                faces[fa].partner = Some(fb);
                faces[fb].partner = Some(fa);
            }
        }

        let mean_h = cells.iter().map(|c| c.circumradius).sum::<f64>() / cells.len() as f64;
        Ok(Mesh {
            vertices,
            cells,
            faces,
            domain,
            mean_h,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn face_points(&self, face: usize) -> [Point; 2] {
        self.faces[face].vertices.map(|v| self.vertices[v])
    }

    /// Translation from the side a periodic face lies on to its partner side.
    pub fn periodic_offset(&self, side: Side) -> Point {
        let d = &self.domain;
        match side {
            Side::Left => [d.width(), 0.0],
            Side::Right => [-d.width(), 0.0],
            Side::Bottom => [0.0, d.height()],
            Side::Top => [0.0, -d.height()],
        }
    }

    /// Resolves what lies across local face `local_face` of `cell`.
    pub fn neighbor_across(
        &self,
        cell: usize,
        local_face: usize,
        bc: &BoundarySpec,
    ) -> Result<Across, MeshError> {
        let c = self
            .cells
            .get(cell)
            .ok_or_else(|| MeshError::InvalidArgument(format!("no cell {cell}")))?;
        if local_face > 2 {
            return Err(MeshError::InvalidArgument(format!("local face {local_face} > 2")));
        }
        let fi = c.faces[local_face];
        let face = &self.faces[fi];
        match face.kind {
            FaceKind::Interior { right } => {
                let other = if face.left == cell { right } else { face.left };
                Ok(Across::Cell {
                    cell: other,
                    offset: [0.0, 0.0],
                })
            }
            FaceKind::Boundary { side } => match bc.side(side) {
                BoundaryCondition::Periodic => {
                    let partner = face.partner.ok_or_else(|| {
                        MeshError::Topology(format!(
                            "periodic face {fi} on {side:?} has no partner on {:?}",
                            side.opposite()
                        ))
                    })?;
                    Ok(Across::Cell {
                        cell: self.faces[partner].left,
                        offset: self.periodic_offset(side),
                    })
                }
                BoundaryCondition::Wall => Ok(Across::Ghost {
                    side,
                    rule: GhostRule::Reflect,
                }),
                BoundaryCondition::Dirichlet(_) => Ok(Across::Ghost {
                    side,
                    rule: GhostRule::Dirichlet,
                }),
                BoundaryCondition::Transmissive => Ok(Across::Ghost {
                    side,
                    rule: GhostRule::Transmissive,
                }),
            },
        }
    }

    /// Checks that every face on a periodic side has a partner.
    pub fn check_periodic(&self, bc: &BoundarySpec) -> Result<(), MeshError> {
        for (fi, face) in self.faces.iter().enumerate() {
            if let FaceKind::Boundary { side } = face.kind {
                if bc.is_periodic(side) && face.partner.is_none() {
                    return Err(MeshError::Topology(format!(
                        "periodic face {fi} on {side:?} has no partner"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn signed_area(vertices: &[Point], vs: [usize; 3]) -> f64 {
    let [a, b, c] = vs.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn bounding_box(vertices: &[Point]) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        r.x0 = r.x0.min(v[0]);
        r.x1 = r.x1.max(v[0]);
        r.y0 = r.y0.min(v[1]);
        r.y1 = r.y1.max(v[1]);
    }
    r
}
