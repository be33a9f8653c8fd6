//! Mesh generation: graded unstructured triangulations of a rectangular
//! rock domain with one or two cavern-shaped holes, plus a structured
//! rectangle generator for verification problems.
//!
//! The domain is meshed in a y-up frame with y = 0 at the bottom of the
//! model and y = height at the ground surface, x = 0 on the left edge.
//! For a single cavern the left edge is the cavern symmetry axis and the
//! cavern half-profile is cut into it; for a periodic cavern pair both
//! side edges are symmetry planes of the array.

use super::delaunay::triangulate;
use super::{
    BoundarySegment, BoundaryTag, Element, Mesh, MeshError, Node, ProbePoint,
};

/// Cavern geometry, described in a frame local to the cavern: x is the
/// radius offset (x >= 0), y is the distance measured *down* from the
/// roof apex.
#[derive(Debug, Clone)]
pub enum CavernShape {
    /// Cylinder with hemispherical-cap roof and floor. If `target_volume`
    /// is set, the radius profile is scaled so the revolved volume matches
    /// it (the height is kept).
    Capsule {
        radius: f64,
        height: f64,
        target_volume: Option<f64>,
    },
    /// Arbitrary half profile from the roof apex (0, 0) to the floor apex
    /// (0, height), x >= 0.
    Profile(Vec<(f64, f64)>),
}

impl CavernShape {
    pub fn height(&self) -> f64 {
        match self {
            CavernShape::Capsule { height, .. } => *height,
            CavernShape::Profile(p) => p.last().map(|q| q.1).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CavernLayout {
    /// One cavern whose axis of symmetry is the left domain edge.
    SingleOnAxis(CavernShape),
    /// Two identical caverns from a periodic array; both side edges are
    /// symmetry planes. `center_to_center` is the axis spacing in meters.
    PairPeriodic {
        shape: CavernShape,
        center_to_center: f64,
    },
}

#[derive(Debug, Clone)]
pub struct DomainSpec {
    /// Lateral extent of the model in meters.
    pub width: f64,
    /// Overburden thickness above the salt body.
    pub depth_to_salt_top: f64,
    /// Salt above the cavern roof.
    pub roof_thickness: f64,
    /// Salt below the cavern floor.
    pub floor_thickness: f64,
    /// Target element size far from the cavern.
    pub far_size: f64,
    /// Ratio of far-field to near-wall element size (>= 1).
    pub refinement: f64,
    pub layout: CavernLayout,
    /// Optional horizontal interface lines (y values) to resolve, e.g.
    /// interlayer band boundaries.
    pub internal_interfaces: Vec<f64>,
}

#[derive(Debug)]
pub struct GeneratedDomain {
    pub mesh: Mesh,
    pub width: f64,
    pub height: f64,
    /// y of the cavern roof apex.
    pub y_roof: f64,
    /// y of the cavern floor apex.
    pub y_floor: f64,
    /// Near-wall target edge length actually used.
    pub wall_spacing: f64,
    /// Revolved cavern volume in m^3 for the on-axis layout; cross-section
    /// area times 1 m for the periodic pair.
    pub cavern_volume: f64,
}

impl DomainSpec {
    pub fn cavern_height(&self) -> f64 {
        match &self.layout {
            CavernLayout::SingleOnAxis(s) => s.height(),
            CavernLayout::PairPeriodic { shape, .. } => shape.height(),
        }
    }

    pub fn height(&self) -> f64 {
        self.floor_thickness + self.cavern_height() + self.roof_thickness + self.depth_to_salt_top
    }

    pub fn y_roof(&self) -> f64 {
        self.floor_thickness + self.cavern_height()
    }

    pub fn y_floor(&self) -> f64 {
        self.floor_thickness
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let bad = |msg: String| Err(MeshError::InfeasibleSpec(msg));
        if !(self.width > 0.0 && self.far_size > 0.0) {
            return bad("width and far_size must be positive".into());
        }
        if self.refinement < 1.0 {
            return bad(format!("refinement {} must be >= 1", self.refinement));
        }
        if self.floor_thickness <= 0.0 || self.roof_thickness <= 0.0 {
            return bad("roof and floor thickness must be positive".into());
        }
        if self.depth_to_salt_top < 0.0 {
            return bad("depth to salt top must be non-negative".into());
        }
        if self.cavern_height() <= 0.0 {
            return bad("cavern height must be positive".into());
        }
        match &self.layout {
            CavernLayout::SingleOnAxis(shape) => {
                let rmax = shape_max_radius(shape)?;
                if rmax >= self.width {
                    return bad(format!(
                        "cavern radius {rmax} m does not fit inside width {} m",
                        self.width
                    ));
                }
            }
            CavernLayout::PairPeriodic {
                shape,
                center_to_center,
            } => {
                let rmax = shape_max_radius(shape)?;
                if *center_to_center <= 2.0 * rmax {
                    return bad(format!(
                        "center-to-center {center_to_center} m leaves no pillar between caverns of radius {rmax} m"
                    ));
                }
                if self.width < *center_to_center + 2.0 * rmax {
                    return bad(format!(
                        "width {} m too small for two caverns {center_to_center} m apart",
                        self.width
                    ));
                }
            }
        }
        for &y in &self.internal_interfaces {
            if y <= 0.0 || y >= self.height() {
                return bad(format!("internal interface y = {y} outside the domain"));
            }
        }
        Ok(())
    }
}

fn shape_max_radius(shape: &CavernShape) -> Result<f64, MeshError> {
    match shape {
        CavernShape::Capsule {
            radius,
            height,
            target_volume,
        } => {
            if *radius <= 0.0 || *height <= 0.0 {
                return Err(MeshError::InfeasibleSpec(
                    "capsule radius and height must be positive".into(),
                ));
            }
            let scale = capsule_scale(*radius, *height, *target_volume);
            Ok(radius * scale)
        }
        CavernShape::Profile(p) => {
            if p.len() < 3 {
                return Err(MeshError::InfeasibleSpec(
                    "profile needs at least 3 points".into(),
                ));
            }
            if p[0].0.abs() > 1e-9 || p.last().unwrap().0.abs() > 1e-9 {
                return Err(MeshError::InfeasibleSpec(
                    "profile must start and end on the cavern axis".into(),
                ));
            }
            if p.iter().any(|q| q.0 < 0.0) {
                return Err(MeshError::InfeasibleSpec(
                    "profile radius offsets must be non-negative".into(),
                ));
            }
            Ok(p.iter().map(|q| q.0).fold(0.0, f64::max))
        }
    }
}

/// Radial scale factor applied to a capsule profile to match a target
/// revolved volume (revolved volume scales with the square of the radius).
fn capsule_scale(radius: f64, height: f64, target_volume: Option<f64>) -> f64 {
    match target_volume {
        None => 1.0,
        Some(v) => {
            // cylinder plus two ellipsoidal half-caps of semi-axes (r, rc)
            let rc = radius.min(0.5 * height);
            let v0 = std::f64::consts::PI * radius * radius * (height - 2.0 * rc)
                + 4.0 / 3.0 * std::f64::consts::PI * radius * radius * rc;
            (v / v0).sqrt()
        }
    }
}

/// Half-profile polyline of a shape in local (x, y-down-from-roof) coords,
/// resampled at `spacing` along the arc. First and last points lie on the
/// axis (x = 0).
fn shape_polyline(shape: &CavernShape, spacing: f64) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> = match shape {
        CavernShape::Capsule {
            radius,
            height,
            target_volume,
        } => {
            let r = *radius;
            let h = *height;
            let rc = r.min(0.5 * h);
            let s = capsule_scale(r, h, *target_volume);
            let mut pts = Vec::new();
            // roof cap: quarter ellipse from apex (0,0) to flank (s*r, rc)
            let narc = ((0.5 * std::f64::consts::PI * r / spacing).ceil() as usize).max(8);
            for k in 0..=narc {
                let phi = 0.5 * std::f64::consts::PI * k as f64 / narc as f64;
                pts.push((s * r * phi.sin(), rc * (1.0 - phi.cos())));
            }
            // straight flank
            pts.push((s * r, h - rc));
            // floor cap
            for k in 1..=narc {
                let phi = 0.5 * std::f64::consts::PI * k as f64 / narc as f64;
                pts.push((s * r * phi.cos(), h - rc * (1.0 - phi.sin())));
            }
            pts
        }
        CavernShape::Profile(p) => p.clone(),
    };
    resample_polyline(&raw, spacing)
}

/// Resample a polyline at uniform arc-length spacing, keeping endpoints.
fn resample_polyline(pts: &[(f64, f64)], spacing: f64) -> Vec<(f64, f64)> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let nseg = ((total / spacing).round() as usize).max(2);
    let mut out = Vec::with_capacity(nseg + 1);
    let mut seg = 0usize;
    for k in 0..=nseg {
        let s = total * k as f64 / nseg as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let t = if cum[seg + 1] > cum[seg] {
            (s - cum[seg]) / (cum[seg + 1] - cum[seg])
        } else {
            0.0
        };
        out.push((
            pts[seg].0 + t * (pts[seg + 1].0 - pts[seg].0),
            pts[seg].1 + t * (pts[seg + 1].1 - pts[seg].1),
        ));
    }
    out
}

/// Even-odd point-in-polygon test for a closed polygon (first point not
/// repeated).
fn point_in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) {
            let xc = xi + (y - yi) / (yj - yi) * (xj - xi);
            if x < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn dist_point_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = a;
    let (bx, by) = b;
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Deterministic hash-based jitter in [-1, 1).
fn jitter(seed: u64) -> f64 {
    let mut h = seed.wrapping_mul(0x9e3779b97f4a7c15);
    h ^= h >> 29;
    h = h.wrapping_mul(0xbf58476d1ce4e5b9);
    h ^= h >> 32;
    ((h >> 11) as f64) / ((1u64 << 52) as f64) - 1.0
}

/// Spatial hash for variable-radius minimum-distance rejection.
struct PointSet {
    cell: f64,
    pts: Vec<(f64, f64)>,
    grid: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl PointSet {
    fn new(cell: f64) -> Self {
        PointSet {
            cell,
            pts: Vec::new(),
            grid: std::collections::HashMap::new(),
        }
    }

    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64)
    }

    fn too_close(&self, x: f64, y: f64, min_dist: f64) -> bool {
        let r = (min_dist / self.cell).ceil() as i64;
        let (kx, ky) = self.key(x, y);
        for ix in -r..=r {
            for iy in -r..=r {
                if let Some(bucket) = self.grid.get(&(kx + ix, ky + iy)) {
                    for &p in bucket {
                        let (px, py) = self.pts[p];
                        if (px - x).powi(2) + (py - y).powi(2) < min_dist * min_dist {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn push(&mut self, x: f64, y: f64) {
        let k = self.key(x, y);
        self.grid.entry(k).or_default().push(self.pts.len());
        self.pts.push((x, y));
    }

    /// Insert if no existing point lies within `min_dist`.
    fn try_push(&mut self, x: f64, y: f64, min_dist: f64) -> bool {
        if self.too_close(x, y, min_dist) {
            false
        } else {
            self.push(x, y);
            true
        }
    }
}

/// Generate a graded unstructured mesh of the domain.
pub fn generate(spec: &DomainSpec) -> Result<GeneratedDomain, MeshError> {
    spec.validate()?;
    let w = spec.width;
    let h = spec.height();
    let y_roof = spec.y_roof();
    let y_floor = spec.y_floor();
    let h_wall = spec.far_size / spec.refinement;

    // cavern wall polylines in domain coordinates, ordered roof -> floor
    // (for the on-axis half profile) or as closed CCW loops (pair layout)
    let mut wall_chains: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut hole_polys: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut cavern_volume = 0.0;

    match &spec.layout {
        CavernLayout::SingleOnAxis(shape) => {
            let local = shape_polyline(shape, h_wall);
            let chain: Vec<(f64, f64)> =
                local.iter().map(|&(x, yd)| (x, y_roof - yd)).collect();
            cavern_volume = revolved_volume(&chain);
            // hole polygon = chain mirrored across the axis
            let mut poly = chain.clone();
            for &(x, y) in chain.iter().rev().skip(1) {
                if x > 0.0 {
                    poly.push((-x, y));
                }
            }
            hole_polys.push(poly);
            wall_chains.push(chain);
        }
        CavernLayout::PairPeriodic {
            shape,
            center_to_center,
        } => {
            let local = shape_polyline(shape, h_wall);
            let xc1 = 0.5 * (w - center_to_center);
            let xc2 = 0.5 * (w + center_to_center);
            for xc in [xc1, xc2] {
                // closed loop: down the right flank, back up the left
                let mut loop_pts: Vec<(f64, f64)> = local
                    .iter()
                    .map(|&(x, yd)| (xc + x, y_roof - yd))
                    .collect();
                for &(x, yd) in local.iter().rev().skip(1) {
                    if x > 0.0 {
                        loop_pts.push((xc - x, y_roof - yd));
                    }
                }
                cavern_volume += polygon_area(&loop_pts).abs();
                hole_polys.push(loop_pts.clone());
                wall_chains.push(loop_pts);
            }
        }
    }

    let wall_segments: Vec<((f64, f64), (f64, f64))> = wall_chains
        .iter()
        .flat_map(|c| {
            let closed = c.first() == c.last();
            let pairs: Vec<_> = c.windows(2).map(|p| (p[0], p[1])).collect();
            let _ = closed;
            pairs
        })
        .collect();
    let dist_wall = |x: f64, y: f64| -> f64 {
        wall_segments
            .iter()
            .map(|&(a, b)| dist_point_segment(x, y, a, b))
            .fold(f64::INFINITY, f64::min)
    };
    let in_hole = |x: f64, y: f64| hole_polys.iter().any(|p| point_in_polygon(p, x, y));
    // local target spacing: h_wall at the wall, grading up to far_size
    let spacing_at =
        |x: f64, y: f64| (h_wall + 0.5 * dist_wall(x, y)).clamp(h_wall, spec.far_size);

    let mut ps = PointSet::new(2.0 * h_wall);
    let mut n_wall_pts = vec![0usize; 0];

    // 1. wall points (with a tiny radial jitter to break the exact
    //    cocircularity of sampled arcs; axis endpoints stay exact)
    let mut wall_index_chains: Vec<Vec<usize>> = Vec::new();
    for chain in &wall_chains {
        let mut idxs = Vec::new();
        let closed = chain.first() == chain.last();
        let last = chain.len() - 1;
        for (k, &(x, y)) in chain.iter().enumerate() {
            if closed && k == last {
                idxs.push(idxs[0]);
                break;
            }
            let on_axis = x.abs() < 1e-9;
            let (jx, jy) = if on_axis {
                (0.0, 0.0)
            } else {
                let seed = (ps.pts.len() as u64) << 8 | k as u64 & 0xff;
                (
                    1e-7 * h_wall * jitter(seed),
                    1e-7 * h_wall * jitter(seed ^ 0xabcdef),
                )
            };
            let px = (x + jx).max(0.0);
            let py = y + jy;
            idxs.push(ps.pts.len());
            ps.push(px, py);
        }
        n_wall_pts.push(idxs.len());
        wall_index_chains.push(idxs);
    }
    let n_wall_total = ps.pts.len();

    // 2. rectangle corners
    for (x, y) in [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)] {
        ps.try_push(x, y, 0.5 * h_wall);
    }

    // 3. rectangle edges, walked with graded spacing; the left edge is
    //    split around the cavern opening for the on-axis layout
    let mut edge_runs: Vec<((f64, f64), (f64, f64))> = vec![
        ((0.0, 0.0), (w, 0.0)),
        ((w, 0.0), (w, h)),
        ((w, h), (0.0, h)),
    ];
    if matches!(spec.layout, CavernLayout::SingleOnAxis(_)) {
        edge_runs.push(((0.0, h), (0.0, y_roof)));
        edge_runs.push(((0.0, y_floor), (0.0, 0.0)));
    } else {
        edge_runs.push(((0.0, h), (0.0, 0.0)));
    }
    for (a, b) in edge_runs {
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let (tx, ty) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        let mut s = 0.0;
        loop {
            let x = a.0 + s * tx;
            let y = a.1 + s * ty;
            let step = spacing_at(x, y);
            s += step;
            if s >= len - 0.45 * step {
                break;
            }
            let px = a.0 + s * tx;
            let py = a.1 + s * ty;
            ps.try_push(px, py, 0.45 * spacing_at(px, py));
        }
    }

    // 4. internal interface lines (resolved so element edges roughly
    //    follow material band boundaries)
    for &yline in &spec.internal_interfaces {
        let mut s = 0.0;
        loop {
            let step = spacing_at(s, yline);
            s += step;
            if s >= w - 0.45 * step {
                break;
            }
            if in_hole(s, yline) || dist_wall(s, yline) < 0.7 * h_wall {
                continue;
            }
            ps.try_push(s, yline, 0.6 * spacing_at(s, yline));
        }
    }

    // 5. interior fill: jittered candidate grid with variable-radius
    //    rejection
    let g = h_wall;
    let nx = (w / g).ceil() as i64;
    let ny = (h / g).ceil() as i64;
    for iy in 0..=ny {
        for ix in 0..=nx {
            let seed = (ix as u64) << 32 | iy as u64;
            let x = ix as f64 * g + 0.25 * g * jitter(seed);
            let y = iy as f64 * g + 0.25 * g * jitter(seed ^ 0x5555);
            let sp = spacing_at(x, y);
            let margin = 0.4 * sp;
            if x < margin || x > w - margin || y < margin || y > h - margin {
                continue;
            }
            if in_hole(x, y) || dist_wall(x, y) < 0.8 * h_wall {
                continue;
            }
            ps.try_push(x, y, 0.72 * sp);
        }
    }

    // triangulate in a shuffled order for insertion robustness, then
    // remap indices back
    let npts = ps.pts.len();
    let mut order: Vec<usize> = (0..npts).collect();
    // deterministic shuffle (Fisher-Yates with the same hash)
    for i in (1..npts).rev() {
        let j = (jitter(i as u64 ^ 0xc0ffee).abs() * (i as f64 + 1.0)) as usize % (i + 1);
        order.swap(i, j);
    }
    let shuffled: Vec<(f64, f64)> = order.iter().map(|&i| ps.pts[i]).collect();
    let tris = triangulate(&shuffled);

    // filter to the domain: centroid inside the rectangle and outside all
    // cavern holes
    let mut elements = Vec::new();
    for t in tris {
        let t = [order[t[0]], order[t[1]], order[t[2]]];
        let c = centroid(&ps.pts, t);
        if c.0 <= 0.0 || c.0 >= w || c.1 <= 0.0 || c.1 >= h {
            continue;
        }
        if in_hole(c.0, c.1) {
            continue;
        }
        elements.push(Element {
            node_ids: t,
            material_id: 0,
        });
    }

    let nodes: Vec<Node> = ps
        .pts
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| Node { id, x, y })
        .collect();

    // boundary extraction: edges used by exactly one element, oriented as
    // in their (CCW) element so the interior is on the left
    let boundary = extract_boundary(&nodes, &elements, w, h, n_wall_total)?;

    // probes A..G on the (first) cavern wall
    let probes = place_probes(&wall_chains[0], h_wall, &spec.layout);

    let mesh = Mesh::new(nodes, elements, boundary, probes)?;
    Ok(GeneratedDomain {
        mesh,
        width: w,
        height: h,
        y_roof,
        y_floor,
        wall_spacing: h_wall,
        cavern_volume,
    })
}

fn centroid(pts: &[(f64, f64)], [a, b, c]: [usize; 3]) -> (f64, f64) {
    (
        (pts[a].0 + pts[b].0 + pts[c].0) / 3.0,
        (pts[a].1 + pts[b].1 + pts[c].1) / 3.0,
    )
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let mut a = 0.0;
    let n = poly.len();
    for i in 0..n {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % n];
        a += x1 * y2 - x2 * y1;
    }
    0.5 * a
}

/// Revolved volume (about x = 0) of a half profile ordered top to bottom.
pub fn revolved_volume(chain: &[(f64, f64)]) -> f64 {
    let mut v = 0.0;
    for wnd in chain.windows(2) {
        let (x1, y1) = wnd[0];
        let (x2, y2) = wnd[1];
        // pi * integral of x(y)^2 dy over the segment (x linear in y)
        v += std::f64::consts::PI / 3.0 * (x1 * x1 + x1 * x2 + x2 * x2) * (y1 - y2);
    }
    v.abs()
}

fn extract_boundary(
    nodes: &[Node],
    elements: &[Element],
    w: f64,
    h: f64,
    _n_wall: usize,
) -> Result<Vec<BoundarySegment>, MeshError> {
    use std::collections::HashMap;
    let mut edges: HashMap<(usize, usize), (usize, (usize, usize))> = HashMap::new();
    for el in elements {
        let [a, b, c] = el.node_ids;
        for (p, q) in [(a, b), (b, c), (c, a)] {
            let key = if p < q { (p, q) } else { (q, p) };
            let e = edges.entry(key).or_insert((0, (p, q)));
            e.0 += 1;
        }
    }
    let tol = 1e-6 * w.max(h);
    let mut boundary = Vec::new();
    for (_, &(count, (p, q))) in edges.iter() {
        if count != 1 {
            continue;
        }
        let (px, py) = (nodes[p].x, nodes[p].y);
        let (qx, qy) = (nodes[q].x, nodes[q].y);
        let tag = if py < tol && qy < tol {
            BoundaryTag::Bottom
        } else if py > h - tol && qy > h - tol {
            BoundaryTag::Top
        } else if px < tol && qx < tol {
            BoundaryTag::SymmetryAxis
        } else if px > w - tol && qx > w - tol {
            BoundaryTag::FarField
        } else {
            BoundaryTag::CavernWall
        };
        boundary.push(BoundarySegment {
            node_ids: [p, q],
            tag,
        });
    }
    boundary.sort_by_key(|s| s.node_ids);
    Ok(boundary)
}

/// Probes A..G distributed by arc length along the cavern wall: A at the
/// roof apex, G at the floor apex, D at the maximum-radius point nearest
/// mid-height, B/C evenly between A and D, E/F between D and G. Points are
/// nudged a fraction of the wall spacing into the rock so they land inside
/// elements.
fn place_probes(chain: &[(f64, f64)], h_wall: f64, layout: &CavernLayout) -> Vec<ProbePoint> {
    // reference center to push probes away from the cavern interior
    let (cx, cy) = match layout {
        CavernLayout::SingleOnAxis(_) => {
            let ymid = chain.iter().map(|p| p.1).sum::<f64>() / chain.len() as f64;
            (0.0, ymid)
        }
        CavernLayout::PairPeriodic { .. } => {
            let n = chain.len() as f64;
            (
                chain.iter().map(|p| p.0).sum::<f64>() / n,
                chain.iter().map(|p| p.1).sum::<f64>() / n,
            )
        }
    };
    // arc-length parametrization of the roof-apex -> floor-apex path
    let path: Vec<(f64, f64)> = match layout {
        CavernLayout::SingleOnAxis(_) => chain.to_vec(),
        CavernLayout::PairPeriodic { .. } => {
            // walk the closed loop from the topmost to the bottommost point
            // along the flank facing away from the center line
            let top = chain
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
                .unwrap()
                .0;
            let bottom = chain
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
                .unwrap()
                .0;
            let n = chain.len() - 1; // closed: last == first
            let mut path = Vec::new();
            let mut k = top;
            loop {
                path.push(chain[k % n]);
                if k % n == bottom {
                    break;
                }
                k += 1;
            }
            path
        }
    };
    let mut cum = vec![0.0];
    for wnd in path.windows(2) {
        let d = ((wnd[1].0 - wnd[0].0).powi(2) + (wnd[1].1 - wnd[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let ymid = 0.5 * (path.first().unwrap().1 + path.last().unwrap().1);
    // D: maximum distance from the center axis, ties broken toward
    // mid-height
    let mut s_d = 0.5 * total;
    let mut best = f64::NEG_INFINITY;
    for (k, &(x, y)) in path.iter().enumerate() {
        let r = (x - cx).abs();
        let score = r - 1e-6 * (y - ymid).abs();
        if score > best {
            best = score;
            s_d = cum[k];
        }
    }
    let targets = [
        ("A", 0.0),
        ("B", s_d / 3.0),
        ("C", 2.0 * s_d / 3.0),
        ("D", s_d),
        ("E", s_d + (total - s_d) / 3.0),
        ("F", s_d + 2.0 * (total - s_d) / 3.0),
        ("G", total),
    ];
    let mut probes = Vec::new();
    for (label, s) in targets {
        let (x, y) = point_at_arc(&path, &cum, s);
        let dx = x - cx;
        let dy = y - cy;
        let len = (dx * dx + dy * dy).sqrt().max(1e-12);
        let push = 0.6 * h_wall;
        let px = (x + push * dx / len).max(0.0);
        let py = y + push * dy / len;
        probes.push(ProbePoint {
            label: label.to_string(),
            x: px,
            y: py,
        });
    }
    probes
}

fn point_at_arc(path: &[(f64, f64)], cum: &[f64], s: f64) -> (f64, f64) {
    let s = s.clamp(0.0, *cum.last().unwrap());
    let mut seg = 0;
    while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
        seg += 1;
    }
    let t = if cum[seg + 1] > cum[seg] {
        (s - cum[seg]) / (cum[seg + 1] - cum[seg])
    } else {
        0.0
    };
    (
        path[seg].0 + t * (path[seg + 1].0 - path[seg].0),
        path[seg].1 + t * (path[seg + 1].1 - path[seg].1),
    )
}

/// Structured triangulation of the rectangle [0, w] x [0, h] with an
/// (nx x ny) grid of quads, each split along alternating diagonals. Tags:
/// bottom edge Bottom, top edge Top, left SymmetryAxis, right FarField.
pub fn structured_rectangle(nx: usize, ny: usize, w: f64, h: f64) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 || w <= 0.0 || h <= 0.0 {
        return Err(MeshError::InfeasibleSpec(
            "structured rectangle needs positive dimensions and cell counts".into(),
        ));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Node {
                id: id(i, j),
                x: w * i as f64 / nx as f64,
                y: h * j as f64 / ny as f64,
            });
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                elements.push(Element {
                    node_ids: [a, b, c],
                    material_id: 0,
                });
                elements.push(Element {
                    node_ids: [a, c, d],
                    material_id: 0,
                });
            } else {
                elements.push(Element {
                    node_ids: [a, b, d],
                    material_id: 0,
                });
                elements.push(Element {
                    node_ids: [b, c, d],
                    material_id: 0,
                });
            }
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundarySegment {
            node_ids: [id(i, 0), id(i + 1, 0)],
            tag: BoundaryTag::Bottom,
        });
        boundary.push(BoundarySegment {
            node_ids: [id(i + 1, ny), id(i, ny)],
            tag: BoundaryTag::Top,
        });
    }
    for j in 0..ny {
        boundary.push(BoundarySegment {
            node_ids: [id(nx, j), id(nx, j + 1)],
            tag: BoundaryTag::FarField,
        });
        boundary.push(BoundarySegment {
            node_ids: [id(0, j + 1), id(0, j)],
            tag: BoundaryTag::SymmetryAxis,
        });
    }
    Mesh::new(nodes, elements, boundary, Vec::new())
}
