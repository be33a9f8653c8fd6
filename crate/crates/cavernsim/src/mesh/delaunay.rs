//! Bowyer-Watson Delaunay triangulation of a planar point set.
//!
//! The implementation is the textbook incremental algorithm with a
//! super-triangle and brute-force cavity search. For the mesh sizes used
//! here (a few thousand points) this is fast enough and has no tuning
//! knobs. Robustness against cocircular quadruples is handled upstream:
//! the mesh generator jitters regularly spaced interior points.

/// Triangulate a point set. Returns CCW triangles indexing into `points`.
/// Triangles covering the convex hull are produced; the caller filters
/// out those outside the intended domain.
pub fn triangulate(points: &[(f64, f64)]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }

    // bounding box and a super-triangle comfortably containing it
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for &(x, y) in points {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let dx = (xmax - xmin).max(1.0);
    let dy = (ymax - ymin).max(1.0);
    let d = dx.max(dy) * 20.0;
    let cx = 0.5 * (xmin + xmax);
    let cy = 0.5 * (ymin + ymax);

    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.push((cx - d, cy - d));
    pts.push((cx + d, cy - d));
    pts.push((cx, cy + d));
    let s0 = n;
    let s1 = n + 1;
    let s2 = n + 2;

    let mut tris: Vec<[usize; 3]> = vec![[s0, s1, s2]];
    let mut bad: Vec<usize> = Vec::new();
    let mut cavity: Vec<(usize, usize)> = Vec::new();

    for p in 0..n {
        bad.clear();
        cavity.clear();
        for (t, tri) in tris.iter().enumerate() {
            if in_circumcircle(&pts, *tri, pts[p]) {
                bad.push(t);
            }
        }
        // cavity boundary: edges of bad triangles not shared by two of them
        for &t in &bad {
            let [a, b, c] = tris[t];
            for e in [(a, b), (b, c), (c, a)] {
                if let Some(k) = cavity
                    .iter()
                    .position(|&(p0, q0)| (q0, p0) == e || (p0, q0) == e)
                {
                    cavity.swap_remove(k);
                } else {
                    cavity.push(e);
                }
            }
        }
        // remove bad triangles (descending so indices stay valid)
        bad.sort_unstable_by(|a, b| b.cmp(a));
        for &t in &bad {
            tris.swap_remove(t);
        }
        // retriangulate the cavity as a fan around p
        for &(a, b) in &cavity {
            let tri = [a, b, p];
            if orient2d(&pts, tri) > 0.0 {
                tris.push(tri);
            } else {
                tris.push([b, a, p]);
            }
        }
    }

    tris.retain(|t| t.iter().all(|&v| v < n));
    tris
}

fn orient2d(pts: &[(f64, f64)], [a, b, c]: [usize; 3]) -> f64 {
    let (ax, ay) = pts[a];
    let (bx, by) = pts[b];
    let (cx, cy) = pts[c];
    (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
}

/// True if `p` is strictly inside the circumcircle of the CCW triangle.
fn in_circumcircle(pts: &[(f64, f64)], tri: [usize; 3], p: (f64, f64)) -> bool {
    let tri = if orient2d(pts, tri) > 0.0 {
        tri
    } else {
        [tri[0], tri[2], tri[1]]
    };
    let (ax, ay) = pts[tri[0]];
    let (bx, by) = pts[tri[1]];
    let (cx, cy) = pts[tri[2]];
    let (dx, dy) = p;
    let adx = ax - dx;
    let ady = ay - dy;
    let bdx = bx - dx;
    let bdy = by - dy;
    let cdx = cx - dx;
    let cdy = cy - dy;
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx);
    det > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic pseudo-random points in the unit square.
    fn scatter(n: usize) -> Vec<(f64, f64)> {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        (0..n).map(|_| (next(), next())).collect()
    }

    #[test]
    fn square_gives_two_triangles() {
        let pts = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.013, 1.0)];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 2);
        let area: f64 = tris.iter().map(|&t| 0.5 * orient2d(&pts, t)).sum();
        // shoelace area of the quadrilateral
        let mut hull = 0.0;
        for i in 0..4 {
            let (x1, y1) = pts[i];
            let (x2, y2) = pts[(i + 1) % 4];
            hull += x1 * y2 - x2 * y1;
        }
        hull *= 0.5;
        assert!((area - hull).abs() < 1e-12);
    }

    #[test]
    fn delaunay_empty_circle_property_holds() {
        let pts = scatter(200);
        let tris = triangulate(&pts);
        // covered area equals the convex hull area (Euler sanity implied)
        let area: f64 = tris.iter().map(|&t| 0.5 * orient2d(&pts, t)).sum();
        assert!(area > 0.8, "hull area of 200 uniform points should be near 1");
        // no input point strictly inside any circumcircle (with slack for
        // floating-point circumcircle evaluation)
        for &t in &tris {
            for (i, &p) in pts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                if in_circumcircle(&pts, t, p) {
                    // re-check with a margin: compute circumcenter distance
                    let (cxy, r2) = circumcircle(&pts, t);
                    let d2 = (p.0 - cxy.0).powi(2) + (p.1 - cxy.1).powi(2);
                    assert!(
                        d2 > r2 * (1.0 - 1e-9),
                        "point {i} violates empty-circle for {t:?}"
                    );
                }
            }
        }
    }

    fn circumcircle(pts: &[(f64, f64)], [a, b, c]: [usize; 3]) -> ((f64, f64), f64) {
        let (ax, ay) = pts[a];
        let (bx, by) = pts[b];
        let (cx, cy) = pts[c];
        let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
        let ux = ((ax * ax + ay * ay) * (by - cy)
            + (bx * bx + by * by) * (cy - ay)
            + (cx * cx + cy * cy) * (ay - by))
            / d;
        let uy = ((ax * ax + ay * ay) * (cx - bx)
            + (bx * bx + by * by) * (ax - cx)
            + (cx * cx + cy * cy) * (bx - ax))
            / d;
        let r2 = (ax - ux).powi(2) + (ay - uy).powi(2);
        ((ux, uy), r2)
    }

    #[test]
    fn all_triangles_are_ccw() {
        let pts = scatter(100);
        for t in triangulate(&pts) {
            assert!(orient2d(&pts, t) > 0.0);
        }
    }
}
