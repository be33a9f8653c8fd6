//! Discretization-order verification with a manufactured solution.
//!
//! The manufactured displacement field is
//! `u = v = U0 sin(pi x / L) sin(pi y / L)` on an L x L square, imposed
//! through the analytically derived body force with the whole boundary
//! clamped (the field vanishes there). L2 errors of displacement, strain
//! and stress are measured on a sequence of uniformly refined structured
//! meshes, and convergence orders are fitted by least squares on the
//! log-log error curve.

use super::ScenarioError;
use crate::assembly::{clamped_boundary_dofs, recover_fields, ConstrainedSystem};
use crate::constitutive::StrainState;
use crate::materials::{lame_from, Material};
use crate::mesh::structured_rectangle;
use std::f64::consts::PI;

/// Errors at one refinement level.
#[derive(Debug, Clone)]
pub struct MmsLevel {
    /// Subdivisions per side.
    pub n: usize,
    /// Element size [m].
    pub h: f64,
    pub err_u: f64,
    pub err_stress: f64,
    pub err_strain: f64,
}

#[derive(Debug, Clone)]
pub struct MmsReport {
    /// Description of the manufactured field.
    pub field: String,
    pub levels: Vec<MmsLevel>,
    pub order_u: f64,
    pub order_stress: f64,
    pub order_strain: f64,
    pub pass: bool,
}

impl MmsReport {
    pub fn render(&self) -> String {
        let mut s = format!("MMS convergence report\nfield: {}\n", self.field);
        s.push_str("   n        h        |u-uh|_L2     |s-sh|_L2     |e-eh|_L2\n");
        for l in &self.levels {
            s.push_str(&format!(
                "{:>4}  {:>8.3}  {:>12.5e}  {:>12.5e}  {:>12.5e}\n",
                l.n, l.h, l.err_u, l.err_stress, l.err_strain
            ));
        }
        s.push_str(&format!(
            "fitted orders: displacement {:.3}, stress {:.3}, strain {:.3}\n",
            self.order_u, self.order_stress, self.order_strain
        ));
        s.push_str(if self.pass {
            "gate: PASS (displacement >= 1.9, stress/strain >= 0.9)\n"
        } else {
            "gate: FAIL (displacement >= 1.9, stress/strain >= 0.9)\n"
        });
        s
    }
}

const L: f64 = 1000.0;
const U0: f64 = 0.05;

fn exact_displacement(x: f64, y: f64) -> (f64, f64) {
    let w = PI / L;
    let phi = U0 * (w * x).sin() * (w * y).sin();
    (phi, phi)
}

fn exact_strain(x: f64, y: f64) -> StrainState {
    let w = PI / L;
    let sx = (w * x).sin();
    let sy = (w * y).sin();
    let cx = (w * x).cos();
    let cy = (w * y).cos();
    StrainState {
        exx: U0 * w * cx * sy,
        eyy: U0 * w * sx * cy,
        gxy: U0 * w * (sx * cy + cx * sy),
    }
}

fn exact_stress(x: f64, y: f64, lambda: f64, mu: f64) -> [f64; 3] {
    let e = exact_strain(x, y);
    [
        (lambda + 2.0 * mu) * e.exx + lambda * e.eyy,
        lambda * e.exx + (lambda + 2.0 * mu) * e.eyy,
        mu * e.gxy,
    ]
}

/// Body force that manufactures the displacement field: b = -div(sigma).
fn body_force(x: f64, y: f64, lambda: f64, mu: f64) -> (f64, f64) {
    let w = PI / L;
    let phi = (w * x).sin() * (w * y).sin();
    let cc = (w * x).cos() * (w * y).cos();
    let b_x = U0 * ((lambda + 2.0 * mu) * w * w * phi + mu * w * w * phi
        - (lambda + mu) * w * w * cc);
    let b_y = U0 * ((lambda + 2.0 * mu) * w * w * phi + mu * w * w * phi
        - (lambda + mu) * w * w * cc);
    (b_x, b_y)
}

fn solve_level(n: usize, material: &Material) -> Result<MmsLevel, ScenarioError> {
    let mesh = structured_rectangle(n, n, L, L)?;
    let lame = lame_from(material.elastic)?;
    let (lambda, mu) = (lame.lambda, lame.mu);
    let materials = std::slice::from_ref(material);

    let fixed = clamped_boundary_dofs(&mesh);
    let system = ConstrainedSystem::build(&mesh, materials, &fixed)
        .map_err(crate::solver::SolverError::from)?;

    // consistent load by one-point (centroid) quadrature
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for eid in 0..mesh.num_elements() {
        let area = mesh.element_geometry(eid)?.area;
        let (xc, yc) = mesh.element_centroid(eid);
        let (bx, by) = body_force(xc, yc, lambda, mu);
        for &nid in &mesh.elements()[eid].node_ids {
            f[2 * nid] += area / 3.0 * bx;
            f[2 * nid + 1] += area / 3.0 * by;
        }
    }
    let u = system.solve(&f);

    let eps_cr = vec![StrainState::default(); mesh.num_elements()];
    let fields = recover_fields(&mesh, &u, &eps_cr, materials)
        .map_err(crate::solver::SolverError::from)?;

    // nodal (lumped) L2 displacement error
    let mut err_u2 = 0.0;
    let mut err_s2 = 0.0;
    let mut err_e2 = 0.0;
    for eid in 0..mesh.num_elements() {
        let area = mesh.element_geometry(eid)?.area;
        for &nid in &mesh.elements()[eid].node_ids {
            let node = &mesh.nodes()[nid];
            let (ux, uy) = exact_displacement(node.x, node.y);
            let dx = u[2 * nid] - ux;
            let dy = u[2 * nid + 1] - uy;
            err_u2 += area / 3.0 * (dx * dx + dy * dy);
        }
        let (xc, yc) = mesh.element_centroid(eid);
        let s_ex = exact_stress(xc, yc, lambda, mu);
        let s = &fields[eid].stress;
        let ds = [s.sxx - s_ex[0], s.syy - s_ex[1], s.sxy - s_ex[2]];
        err_s2 += area * ds.iter().map(|v| v * v).sum::<f64>();
        let e_ex = exact_strain(xc, yc);
        let e = &fields[eid].strain;
        let de = [e.exx - e_ex.exx, e.eyy - e_ex.eyy, e.gxy - e_ex.gxy];
        err_e2 += area * de.iter().map(|v| v * v).sum::<f64>();
    }

    Ok(MmsLevel {
        n,
        h: L / n as f64,
        err_u: err_u2.sqrt(),
        err_stress: err_s2.sqrt(),
        err_strain: err_e2.sqrt(),
    })
}

/// Least-squares slope of ln(err) against ln(h); positive = converging.
fn fitted_order(levels: &[MmsLevel], pick: impl Fn(&MmsLevel) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| (l.h.ln(), pick(l).max(1e-300).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

/// Run the MMS convergence study on three uniform refinements and fit
/// the convergence orders. Passing requires displacement order >= 1.9
/// and stress/strain orders >= 0.9.
pub fn run_mms_convergence() -> Result<MmsReport, ScenarioError> {
    let catalog = crate::materials::builtin_catalog();
    let mut halite = crate::materials::find(&catalog, "halite")?.clone();
    halite.creep = None;
    halite.damage = None;

    let mut levels = Vec::new();
    for n in [16, 32, 64] {
        levels.push(solve_level(n, &halite)?);
    }
    let order_u = fitted_order(&levels, |l| l.err_u);
    let order_stress = fitted_order(&levels, |l| l.err_stress);
    let order_strain = fitted_order(&levels, |l| l.err_strain);
    let pass = order_u >= 1.9 && order_stress >= 0.9 && order_strain >= 0.9;
    Ok(MmsReport {
        field: format!(
            "u = v = {U0} sin(pi x / {L}) sin(pi y / {L}) on a {L} x {L} m square, clamped boundary"
        ),
        levels,
        order_u,
        order_stress,
        order_strain,
        pass,
    })
}
