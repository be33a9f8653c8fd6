//! 2D unstructured triangular meshes with tagged boundaries, material
//! regions and named probe points.

mod delaunay;
mod generator;

pub use generator::{
    generate, revolved_volume, structured_rectangle, CavernLayout, CavernShape, DomainSpec,
    GeneratedDomain,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Two nodes within this distance are considered duplicates.
pub const DUPLICATE_NODE_TOL: f64 = 1e-9;
/// Elements below this area are degenerate.
pub const DEGENERATE_AREA_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("degenerate element {element} (area {area:.3e} m^2)")]
    DegenerateElement { element: usize, area: f64 },
    #[error("point ({x}, {y}) not inside the domain")]
    PointNotFound { x: f64, y: f64 },
    #[error("infeasible mesh spec: {0}")]
    InfeasibleSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    /// Counter-clockwise node indices.
    pub node_ids: [usize; 3],
    /// Key into the material catalog.
    pub material_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    CavernWall,
    Bottom,
    SymmetryAxis,
    Top,
    FarField,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::CavernWall => "CavernWall",
            BoundaryTag::Bottom => "Bottom",
            BoundaryTag::SymmetryAxis => "SymmetryAxis",
            BoundaryTag::Top => "Top",
            BoundaryTag::FarField => "FarField",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "CavernWall" => Ok(BoundaryTag::CavernWall),
            "Bottom" => Ok(BoundaryTag::Bottom),
            "SymmetryAxis" => Ok(BoundaryTag::SymmetryAxis),
            "Top" => Ok(BoundaryTag::Top),
            "FarField" => Ok(BoundaryTag::FarField),
            other => Err(format!("unknown boundary tag `{other}`")),
        }
    }
}

/// Boundary edge, oriented so the domain interior lies on its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySegment {
    pub node_ids: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbePoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// Immutable validated triangular mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Node>,
    elements: Vec<Element>,
    boundary: Vec<BoundarySegment>,
    probes: Vec<ProbePoint>,
}

/// Per-element geometry: area and the strain-displacement operator.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// 3x6 matrix mapping the six nodal displacements (u1,v1,u2,v2,u3,v3)
    /// to (eps_xx, eps_yy, gamma_xy). Constant over the element.
    pub b: [[f64; 6]; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeLocation {
    pub element: usize,
    pub barycentric: [f64; 3],
}

impl Mesh {
    /// Validate and build a mesh. Element orientation is normalized to CCW.
    pub fn new(
        nodes: Vec<Node>,
        mut elements: Vec<Element>,
        boundary: Vec<BoundarySegment>,
        probes: Vec<ProbePoint>,
    ) -> Result<Self, MeshError> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(MeshError::Topology(format!(
                    "node ids must be dense 0..N-1 (node {} has id {})",
                    i, n.id
                )));
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(MeshError::Topology(format!(
                    "node {} has non-finite coordinates",
                    i
                )));
            }
        }
        check_duplicate_nodes(&nodes)?;

        for (eid, el) in elements.iter_mut().enumerate() {
            let [a, b, c] = el.node_ids;
            if a == b || b == c || a == c {
                return Err(MeshError::Topology(format!(
                    "element {} has repeated nodes {:?}",
                    eid, el.node_ids
                )));
            }
            for &nid in &el.node_ids {
                if nid >= nodes.len() {
                    return Err(MeshError::Topology(format!(
                        "element {} references node {} of a {}-node mesh",
                        eid,
                        nid,
                        nodes.len()
                    )));
                }
            }
            let area2 = signed_area2(&nodes, el.node_ids);
            if area2 < 0.0 {
                el.node_ids.swap(1, 2);
            }
            let area = signed_area2(&nodes, el.node_ids) * 0.5;
            if area < DEGENERATE_AREA_TOL {
                return Err(MeshError::DegenerateElement {
                    element: eid,
                    area,
                });
            }
        }

        let mesh = Mesh {
            nodes,
            elements,
            boundary,
            probes,
        };
        mesh.check_boundary()?;
        Ok(mesh)
    }

    /// Edges belonging to exactly one element must each carry exactly one tag.
    fn check_boundary(&self) -> Result<(), MeshError> {
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for el in &self.elements {
            let [a, b, c] = el.node_ids;
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *edge_count.entry(sorted(p, q)).or_insert(0) += 1;
            }
        }
        for (&(p, q), &cnt) in &edge_count {
            if cnt > 2 {
                return Err(MeshError::Topology(format!(
                    "edge ({p}, {q}) shared by {cnt} elements"
                )));
            }
        }
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for seg in &self.boundary {
            let key = sorted(seg.node_ids[0], seg.node_ids[1]);
            *tagged.entry(key).or_insert(0) += 1;
            match edge_count.get(&key) {
                Some(1) => {}
                Some(_) => {
                    return Err(MeshError::Topology(format!(
                        "tagged edge {:?} is interior",
                        seg.node_ids
                    )))
                }
                None => {
                    return Err(MeshError::Topology(format!(
                        "tagged edge {:?} does not exist in the mesh",
                        seg.node_ids
                    )))
                }
            }
        }
        for (&key, &cnt) in &edge_count {
            if cnt == 1 {
                match tagged.get(&key) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(MeshError::Topology(format!(
                            "boundary edge {:?} has {} tags",
                            key, n
                        )))
                    }
                    None => {
                        return Err(MeshError::Topology(format!(
                            "untagged boundary edge {:?}",
                            key
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }
    pub fn boundary(&self) -> &[BoundarySegment] {
        &self.boundary
    }
    pub fn probes(&self) -> &[ProbePoint] {
        &self.probes
    }
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Rebuild with different per-element material ids (region assignment
    /// happens before the mesh is frozen into a scene).
    pub fn with_materials(mut self, ids: Vec<usize>) -> Result<Self, MeshError> {
        if ids.len() != self.elements.len() {
            return Err(MeshError::Topology(
                "material id list length mismatch".into(),
            ));
        }
        for (el, id) in self.elements.iter_mut().zip(ids) {
            el.material_id = id;
        }
        Ok(self)
    }

    /// Rebuild with probe points replaced.
    pub fn with_probes(mut self, probes: Vec<ProbePoint>) -> Self {
        self.probes = probes;
        self
    }

    /// Return a copy with node coordinates displaced by `u` (2N vector).
    /// Used by the updated-geometry integration mode.
    pub fn displaced(&self, u: &[f64]) -> Result<Self, MeshError> {
        assert_eq!(u.len(), 2 * self.nodes.len());
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id,
                x: n.x + u[2 * n.id],
                y: n.y + u[2 * n.id + 1],
            })
            .collect();
        Mesh::new(
            nodes,
            self.elements.clone(),
            self.boundary.clone(),
            self.probes.clone(),
        )
    }

    /// Area and strain-displacement operator of one element.
    pub fn element_geometry(&self, eid: usize) -> Result<ElementGeometry, MeshError> {
        let el = &self.elements[eid];
        let [i, j, k] = el.node_ids;
        let (x1, y1) = (self.nodes[i].x, self.nodes[i].y);
        let (x2, y2) = (self.nodes[j].x, self.nodes[j].y);
        let (x3, y3) = (self.nodes[k].x, self.nodes[k].y);
        let area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
        let area = 0.5 * area2;
        if area < DEGENERATE_AREA_TOL {
            return Err(MeshError::DegenerateElement {
                element: eid,
                area,
            });
        }
        let inv = 1.0 / area2;
        let b1 = (y2 - y3) * inv;
        let b2 = (y3 - y1) * inv;
        let b3 = (y1 - y2) * inv;
        let c1 = (x3 - x2) * inv;
        let c2 = (x1 - x3) * inv;
        let c3 = (x2 - x1) * inv;
        let b = [
            [b1, 0.0, b2, 0.0, b3, 0.0],
            [0.0, c1, 0.0, c2, 0.0, c3],
            [c1, b1, c2, b2, c3, b3],
        ];
        Ok(ElementGeometry { area, b })
    }

    pub fn element_centroid(&self, eid: usize) -> (f64, f64) {
        let [i, j, k] = self.elements[eid].node_ids;
        (
            (self.nodes[i].x + self.nodes[j].x + self.nodes[k].x) / 3.0,
            (self.nodes[i].y + self.nodes[j].y + self.nodes[k].y) / 3.0,
        )
    }

    /// Characteristic element diameter (longest edge).
    pub fn element_diameter(&self, eid: usize) -> f64 {
        let [i, j, k] = self.elements[eid].node_ids;
        let d = |a: usize, b: usize| {
            let dx = self.nodes[a].x - self.nodes[b].x;
            let dy = self.nodes[a].y - self.nodes[b].y;
            (dx * dx + dy * dy).sqrt()
        };
        d(i, j).max(d(j, k)).max(d(k, i))
    }

    /// Locate the element containing (x, y) and its barycentric coordinates.
    pub fn locate_probe(&self, x: f64, y: f64) -> Result<ProbeLocation, MeshError> {
        const TOL: f64 = 1e-9;
        for eid in 0..self.elements.len() {
            let [i, j, k] = self.elements[eid].node_ids;
            let (x1, y1) = (self.nodes[i].x, self.nodes[i].y);
            let (x2, y2) = (self.nodes[j].x, self.nodes[j].y);
            let (x3, y3) = (self.nodes[k].x, self.nodes[k].y);
            let area2 = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
            let l1 = ((x2 - x) * (y3 - y) - (x3 - x) * (y2 - y)) / area2;
            let l2 = ((x3 - x) * (y1 - y) - (x1 - x) * (y3 - y)) / area2;
            let l3 = 1.0 - l1 - l2;
            let scale_tol = TOL.max(1e-12 * area2.abs().sqrt());
            if l1 >= -scale_tol && l2 >= -scale_tol && l3 >= -scale_tol {
                let clamp = |v: f64| v.clamp(0.0, 1.0);
                let (mut a, mut b, mut c) = (clamp(l1), clamp(l2), clamp(l3));
                let s = a + b + c;
                a /= s;
                b /= s;
                c /= s;
                return Ok(ProbeLocation {
                    element: eid,
                    barycentric: [a, b, c],
                });
            }
        }
        Err(MeshError::PointNotFound { x, y })
    }

    /// Boundary segments carrying the given tag.
    pub fn segments_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundarySegment> {
        self.boundary.iter().filter(move |s| s.tag == tag)
    }

    /// Closed loops of CavernWall segments, each as an ordered node path.
    /// A loop that starts and ends on the symmetry axis is returned open
    /// (first and last node differ); a full interior loop is returned with
    /// first node repeated at the end.
    pub fn cavern_wall_loops(&self) -> Vec<Vec<usize>> {
        use std::collections::HashMap;
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut starts: Vec<usize> = Vec::new();
        let mut has_pred: HashMap<usize, bool> = HashMap::new();
        for seg in self.segments_with_tag(BoundaryTag::CavernWall) {
            next.insert(seg.node_ids[0], seg.node_ids[1]);
            has_pred.entry(seg.node_ids[0]).or_insert(false);
            *has_pred.entry(seg.node_ids[1]).or_insert(true) = true;
        }
        for (&n, &hp) in &has_pred {
            if !hp {
                starts.push(n);
            }
        }
        starts.sort_unstable();
        let mut loops = Vec::new();
        let mut used = std::collections::HashSet::new();
        // open chains first (endpoints on other boundary tags)
        for &s in &starts {
            let mut path = vec![s];
            let mut cur = s;
            while let Some(&n) = next.get(&cur) {
                used.insert(cur);
                path.push(n);
                cur = n;
                if cur == s {
                    break;
                }
            }
            used.insert(cur);
            loops.push(path);
        }
        // remaining closed loops
        let mut keys: Vec<usize> = next.keys().copied().filter(|k| !used.contains(k)).collect();
        keys.sort_unstable();
        for s in keys {
            if used.contains(&s) {
                continue;
            }
            let mut path = vec![s];
            let mut cur = s;
            loop {
                used.insert(cur);
                let n = next[&cur];
                path.push(n);
                cur = n;
                if cur == s {
                    break;
                }
            }
            loops.push(path);
        }
        loops
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| self.element_geometry(e).map(|g| g.area).unwrap_or(0.0))
            .sum()
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for n in &self.nodes {
            xmin = xmin.min(n.x);
            xmax = xmax.max(n.x);
            ymin = ymin.min(n.y);
            ymax = ymax.max(n.y);
        }
        (xmin, xmax, ymin, ymax)
    }
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area2(nodes: &[Node], [i, j, k]: [usize; 3]) -> f64 {
    let (x1, y1) = (nodes[i].x, nodes[i].y);
    let (x2, y2) = (nodes[j].x, nodes[j].y);
    let (x3, y3) = (nodes[k].x, nodes[k].y);
    (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
}

fn check_duplicate_nodes(nodes: &[Node]) -> Result<(), MeshError> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[a]
            .x
            .partial_cmp(&nodes[b].x)
            .unwrap()
            .then(nodes[a].y.partial_cmp(&nodes[b].y).unwrap())
    });
    for w in 0..order.len() {
        let i = order[w];
        for &j in order[w + 1..].iter() {
            if nodes[j].x - nodes[i].x > DUPLICATE_NODE_TOL {
                break;
            }
            let dy = (nodes[j].y - nodes[i].y).abs();
            let dx = (nodes[j].x - nodes[i].x).abs();
            if dx <= DUPLICATE_NODE_TOL && dy <= DUPLICATE_NODE_TOL {
                return Err(MeshError::Topology(format!(
                    "duplicate nodes {} and {} within {:.0e} m",
                    i, j, DUPLICATE_NODE_TOL
                )));
            }
        }
    }
    Ok(())
}

/// Parse the sectioned plain-text mesh format.
pub fn load_mesh<R: BufRead>(reader: R) -> Result<Mesh, MeshError> {
    let mut nodes = Vec::new();
    let mut elements = Vec::new();
    let mut boundary = Vec::new();
    let mut probes = Vec::new();

    #[derive(PartialEq)]
    enum Section {
        None,
        Nodes,
        Elements,
        Boundary,
        Probes,
    }
    let mut section = Section::None;
    let mut remaining = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| MeshError::Parse { line: lineno, msg };
        if let Some(rest) = line.strip_prefix('$') {
            let mut it = rest.split_whitespace();
            let name = it.next().unwrap_or("");
            let count: usize = it
                .next()
                .ok_or_else(|| parse_err(format!("missing count after ${name}")))?
                .parse()
                .map_err(|e| parse_err(format!("bad count: {e}")))?;
            section = match name {
                "Nodes" => Section::Nodes,
                "Elements" => Section::Elements,
                "Boundary" => Section::Boundary,
                "Probes" => Section::Probes,
                other => return Err(parse_err(format!("unknown section `${other}`"))),
            };
            remaining = count;
            continue;
        }
        if remaining == 0 {
            return Err(parse_err("unexpected data line outside a section".into()));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Nodes => {
                if fields.len() != 3 {
                    return Err(parse_err("expected `<id> <x> <y>`".into()));
                }
                let id: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(format!("bad node id: {e}")))?;
                let x: f64 = fields[1]
                    .parse()
                    .map_err(|e| parse_err(format!("bad x coordinate: {e}")))?;
                let y: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(format!("bad y coordinate: {e}")))?;
                nodes.push(Node { id, x, y });
            }
            Section::Elements => {
                if fields.len() != 5 {
                    return Err(parse_err("expected `<id> <n1> <n2> <n3> <material>`".into()));
                }
                let ids: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse()).collect();
                let ids = ids.map_err(|e| parse_err(format!("bad element field: {e}")))?;
                elements.push(Element {
                    node_ids: [ids[1], ids[2], ids[3]],
                    material_id: ids[4],
                });
            }
            Section::Boundary => {
                if fields.len() != 3 {
                    return Err(parse_err("expected `<n1> <n2> <tag>`".into()));
                }
                let a: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(format!("bad node id: {e}")))?;
                let b: usize = fields[1]
                    .parse()
                    .map_err(|e| parse_err(format!("bad node id: {e}")))?;
                let tag: BoundaryTag = fields[2].parse().map_err(|e| parse_err(e))?;
                boundary.push(BoundarySegment {
                    node_ids: [a, b],
                    tag,
                });
            }
            Section::Probes => {
                if fields.len() != 3 {
                    return Err(parse_err("expected `<label> <x> <y>`".into()));
                }
                let x: f64 = fields[1]
                    .parse()
                    .map_err(|e| parse_err(format!("bad x coordinate: {e}")))?;
                let y: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(format!("bad y coordinate: {e}")))?;
                probes.push(ProbePoint {
                    label: fields[0].to_string(),
                    x,
                    y,
                });
            }
            Section::None => unreachable!(),
        }
        remaining -= 1;
    }
    Mesh::new(nodes, elements, boundary, probes)
}

/// Write the sectioned mesh format. Coordinates use shortest round-trip
/// formatting, so reloading reproduces them bit-identically.
pub fn save_mesh<W: Write>(mesh: &Mesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "$Nodes {}", mesh.nodes.len())?;
    for n in &mesh.nodes {
        writeln!(w, "{} {} {}", n.id, n.x, n.y)?;
    }
    writeln!(w, "$Elements {}", mesh.elements.len())?;
    for (i, e) in mesh.elements.iter().enumerate() {
        writeln!(
            w,
            "{} {} {} {} {}",
            i, e.node_ids[0], e.node_ids[1], e.node_ids[2], e.material_id
        )?;
    }
    writeln!(w, "$Boundary {}", mesh.boundary.len())?;
    for s in &mesh.boundary {
        writeln!(w, "{} {} {}", s.node_ids[0], s.node_ids[1], s.tag)?;
    }
    writeln!(w, "$Probes {}", mesh.probes.len())?;
    for p in &mesh.probes {
        writeln!(w, "{} {} {}", p.label, p.x, p.y)?;
    }
    Ok(())
}
