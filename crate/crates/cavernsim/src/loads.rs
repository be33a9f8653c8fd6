//! Loading: lithostatic stress and temperature with depth, cavern fluid
//! pressure schedules, gravity body forces, and equivalent nodal forces
//! from boundary tractions.

use crate::materials::Material;
use crate::mesh::{BoundaryTag, Mesh};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gravitational acceleration [m/s^2].
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("invalid pressure schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid geostatic model: {0}")]
    InvalidGeostatic(String),
    #[error("element {element} references unknown material id {id}")]
    UnknownMaterial { element: usize, id: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeostaticModel {
    /// [kg/m^3]
    pub overburden_density: f64,
    /// [kg/m^3]
    pub salt_density: f64,
    /// Depth from the ground surface to the top of the salt body [m].
    pub depth_to_salt_top: f64,
    /// [K]
    pub surface_temperature: f64,
    /// [K/m]
    pub temp_gradient: f64,
}

impl Default for GeostaticModel {
    fn default() -> Self {
        GeostaticModel {
            overburden_density: 2200.0,
            salt_density: 2200.0,
            depth_to_salt_top: 500.0,
            surface_temperature: 283.15,
            temp_gradient: 31.3e-3,
        }
    }
}

impl GeostaticModel {
    pub fn validate(&self) -> Result<(), LoadError> {
        if !(self.overburden_density > 0.0 && self.salt_density > 0.0) {
            return Err(LoadError::InvalidGeostatic(
                "densities must be positive".into(),
            ));
        }
        if self.depth_to_salt_top < 0.0 {
            return Err(LoadError::InvalidGeostatic(
                "depth to salt top must be non-negative".into(),
            ));
        }
        if self.temp_gradient < 0.0 || self.surface_temperature <= 0.0 {
            return Err(LoadError::InvalidGeostatic(
                "temperature model must have T_surface > 0 and gradient >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Cavern operating pressure as a fraction of lithostatic pressure at the
/// reference depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PressureSchedule {
    Constant { fraction: f64 },
    CyclicStep {
        p_min_fraction: f64,
        p_max_fraction: f64,
        /// [day]
        period: f64,
        /// Fraction of the period spent at the high-pressure branch.
        duty: f64,
    },
}

impl PressureSchedule {
    /// Validate; returns admissibility warnings for fractions outside the
    /// recommended operating window.
    pub fn validate(&self) -> Result<Vec<String>, LoadError> {
        let mut warnings = Vec::new();
        let mut check = |name: &str, f: f64| -> Result<(), LoadError> {
            if !(f > 0.0 && f <= 1.0) {
                return Err(LoadError::InvalidSchedule(format!(
                    "{name} fraction {f} outside (0, 1]"
                )));
            }
            if !(0.20..=0.80).contains(&f) {
                warnings.push(format!(
                    "{name} fraction {f} outside the admissible 24%-80% lithostatic window"
                ));
            }
            Ok(())
        };
        match *self {
            PressureSchedule::Constant { fraction } => check("constant", fraction)?,
            PressureSchedule::CyclicStep {
                p_min_fraction,
                p_max_fraction,
                period,
                duty,
            } => {
                check("minimum", p_min_fraction)?;
                check("maximum", p_max_fraction)?;
                if p_min_fraction > p_max_fraction {
                    return Err(LoadError::InvalidSchedule(format!(
                        "minimum fraction {p_min_fraction} exceeds maximum {p_max_fraction}"
                    )));
                }
                if period <= 0.0 {
                    return Err(LoadError::InvalidSchedule(format!(
                        "period {period} days must be positive"
                    )));
                }
                if !(duty > 0.0 && duty < 1.0) {
                    return Err(LoadError::InvalidSchedule(format!(
                        "duty {duty} must be in (0, 1)"
                    )));
                }
            }
        }
        Ok(warnings)
    }

    /// Lithostatic fraction at time `t` [day]. Cycles start on the
    /// high-pressure branch.
    pub fn fraction(&self, t: f64) -> f64 {
        match *self {
            PressureSchedule::Constant { fraction } => fraction,
            PressureSchedule::CyclicStep {
                p_min_fraction,
                p_max_fraction,
                period,
                duty,
            } => {
                let phase = t.rem_euclid(period);
                if phase < duty * period {
                    p_max_fraction
                } else {
                    p_min_fraction
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidModel {
    /// Effective density of the stored gas column [kg/m^3].
    pub fluid_density: f64,
}

impl Default for FluidModel {
    fn default() -> Self {
        // hydrogen at storage conditions
        FluidModel { fluid_density: 8.0 }
    }
}

/// Lithostatic pressure [Pa] at `depth` [m] below the surface, piecewise
/// over the overburden and salt layers.
pub fn lithostatic_pressure(model: &GeostaticModel, depth: f64) -> f64 {
    debug_assert!(depth >= 0.0);
    GRAVITY
        * (model.overburden_density * depth.min(model.depth_to_salt_top)
            + model.salt_density * (depth - model.depth_to_salt_top).max(0.0))
}

/// Temperature [K] at `depth` [m].
pub fn temperature_at(model: &GeostaticModel, depth: f64) -> f64 {
    model.surface_temperature + model.temp_gradient * depth
}

/// Cavern fluid pressure [Pa] at time `t` [day] and `depth` [m]. The
/// schedule fraction scales lithostatic pressure at the reference depth
/// (the cavern roof); below it the fluid column adds hydrostatic weight.
pub fn cavern_pressure(
    schedule: &PressureSchedule,
    model: &GeostaticModel,
    fluid: &FluidModel,
    t: f64,
    depth: f64,
    reference_depth: f64,
) -> f64 {
    schedule.fraction(t) * lithostatic_pressure(model, reference_depth)
        + fluid.fluid_density * GRAVITY * (depth - reference_depth)
}

/// Nodal force contribution of a constant pressure `p` acting on the edge
/// from `a` to `b` (domain interior on the left of a->b): the total force
/// p * length * inward-normal, split half-half between the two nodes.
pub fn pressure_edge_force(p: f64, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let ex = b.0 - a.0;
    let ey = b.1 - a.1;
    // left normal times edge length
    (0.5 * p * -ey, 0.5 * p * ex)
}

/// Equivalent nodal forces from a pressure field on the cavern wall.
/// `pressure` is evaluated at each wall-edge midpoint; the result is a
/// 2N global force vector.
pub fn traction_nodal_forces(
    mesh: &Mesh,
    pressure: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for seg in mesh.segments_with_tag(BoundaryTag::CavernWall) {
        let [i, j] = seg.node_ids;
        let a = (mesh.nodes()[i].x, mesh.nodes()[i].y);
        let b = (mesh.nodes()[j].x, mesh.nodes()[j].y);
        let p = pressure(0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        let (fx, fy) = pressure_edge_force(p, a, b);
        f[2 * i] += fx;
        f[2 * i + 1] += fy;
        f[2 * j] += fx;
        f[2 * j + 1] += fy;
    }
    f
}

/// Equivalent nodal forces from a constant traction vector on every
/// boundary segment with the given tag.
pub fn edge_traction_forces(mesh: &Mesh, tag: BoundaryTag, traction: (f64, f64)) -> Vec<f64> {
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for seg in mesh.segments_with_tag(tag) {
        let [i, j] = seg.node_ids;
        let dx = mesh.nodes()[j].x - mesh.nodes()[i].x;
        let dy = mesh.nodes()[j].y - mesh.nodes()[i].y;
        let len = (dx * dx + dy * dy).sqrt();
        for n in [i, j] {
            f[2 * n] += 0.5 * len * traction.0;
            f[2 * n + 1] += 0.5 * len * traction.1;
        }
    }
    f
}

/// Gravity body force vector: per element a downward force rho g A split
/// equally over its three nodes.
pub fn body_force(mesh: &Mesh, materials: &[Material]) -> Result<Vec<f64>, LoadError> {
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for (eid, el) in mesh.elements().iter().enumerate() {
        let m = materials
            .get(el.material_id)
            .ok_or(LoadError::UnknownMaterial {
                element: eid,
                id: el.material_id,
            })?;
        let area = mesh
            .element_geometry(eid)
            .map(|g| g.area)
            .unwrap_or(0.0);
        let fy = -m.density * GRAVITY * area / 3.0;
        for &n in &el.node_ids {
            f[2 * n + 1] += fy;
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lithostatic_examples() {
        let m = GeostaticModel::default();
        assert_eq!(lithostatic_pressure(&m, 0.0), 0.0);
        // equal densities: single-layer formula at 1000 m
        assert_relative_eq!(
            lithostatic_pressure(&m, 1000.0),
            2200.0 * 9.81 * 1000.0,
            max_relative = 1e-12
        );
        assert!((lithostatic_pressure(&m, 1000.0) - 21.58e6).abs() < 0.01e6);
        // piecewise continuity across the salt top
        let mut layered = m;
        layered.overburden_density = 2000.0;
        let eps = 1e-6;
        let below = lithostatic_pressure(&layered, 500.0 + eps);
        let above = lithostatic_pressure(&layered, 500.0 - eps);
        assert!((below - above).abs() < 1.0);
        // monotone in depth
        assert!(lithostatic_pressure(&layered, 800.0) > lithostatic_pressure(&layered, 600.0));
    }

    #[test]
    fn temperature_examples() {
        let m = GeostaticModel::default();
        assert_eq!(temperature_at(&m, 0.0), 283.15);
        assert_relative_eq!(temperature_at(&m, 1000.0), 314.45, max_relative = 1e-12);
        let flat = GeostaticModel {
            temp_gradient: 0.0,
            ..m
        };
        assert_eq!(temperature_at(&flat, 2000.0), 283.15);
    }

    #[test]
    fn cyclic_schedule_branches_and_periodicity() {
        let s = PressureSchedule::CyclicStep {
            p_min_fraction: 0.2,
            p_max_fraction: 0.8,
            period: 6.0,
            duty: 0.5,
        };
        assert_eq!(s.fraction(1e-9), 0.8);
        assert_eq!(s.fraction(3.0 + 1e-9), 0.2);
        for t in [0.4, 1.7, 2.9, 3.3, 4.8, 5.9] {
            assert_eq!(s.fraction(t), s.fraction(t + 6.0), "t = {t}");
            assert_eq!(s.fraction(t), s.fraction(t + 60.0), "t = {t}");
        }
    }

    #[test]
    fn cavern_pressure_composition() {
        let m = GeostaticModel::default();
        let fluid = FluidModel::default();
        let s = PressureSchedule::Constant { fraction: 0.2 };
        let roof = 700.0;
        let p_roof = cavern_pressure(&s, &m, &fluid, 10.0, roof, roof);
        assert_relative_eq!(
            p_roof,
            0.2 * lithostatic_pressure(&m, roof),
            max_relative = 1e-12
        );
        // 100 m below the roof the fluid column adds rho g h
        let p_low = cavern_pressure(&s, &m, &fluid, 10.0, roof + 100.0, roof);
        assert_relative_eq!(p_low - p_roof, 8.0 * 9.81 * 100.0, max_relative = 1e-12);
        // massless fluid: depth-independent
        let vac = FluidModel { fluid_density: 0.0 };
        assert_eq!(
            cavern_pressure(&s, &m, &vac, 0.0, roof + 200.0, roof),
            cavern_pressure(&s, &m, &vac, 0.0, roof, roof)
        );
    }

    #[test]
    fn schedule_validation_errors_and_warnings() {
        assert!(PressureSchedule::Constant { fraction: 1.2 }.validate().is_err());
        assert!(PressureSchedule::Constant { fraction: 0.0 }.validate().is_err());
        let warn = PressureSchedule::Constant { fraction: 0.9 }
            .validate()
            .unwrap();
        assert_eq!(warn.len(), 1);
        assert!(warn[0].contains("24%-80%"));
        assert!(PressureSchedule::Constant { fraction: 0.5 }
            .validate()
            .unwrap()
            .is_empty());
        assert!(PressureSchedule::CyclicStep {
            p_min_fraction: 0.8,
            p_max_fraction: 0.2,
            period: 6.0,
            duty: 0.5,
        }
        .validate()
        .is_err());
    }

    #[test]
    fn edge_force_vertical_edge() {
        // unit pressure on a vertical edge of length 2, interior to the
        // left of a->b: total horizontal force 2, split (1, 1)
        let (fx, fy) = pressure_edge_force(1.0, (0.0, 0.0), (0.0, 2.0));
        assert_relative_eq!(fx, -1.0);
        assert_eq!(fy, 0.0);
    }

    #[test]
    fn closed_loop_pressure_has_zero_net_force() {
        // closed polygon approximating a circle
        let n = 200;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        let mut net = (0.0, 0.0);
        for w in pts.windows(2) {
            let (fx, fy) = pressure_edge_force(5.0e6, w[0], w[1]);
            net.0 += 2.0 * fx;
            net.1 += 2.0 * fy;
        }
        let scale = 5.0e6 * 2.0 * std::f64::consts::PI * 10.0;
        assert!(net.0.abs() < 1e-9 * scale, "net x {}", net.0);
        assert!(net.1.abs() < 1e-9 * scale, "net y {}", net.1);
    }

    #[test]
    fn half_cylinder_net_force_is_projected_area() {
        // half circle of radius R from (0, -R) to (0, R): net horizontal
        // force under uniform p equals p * chord = p * 2R
        let r = 25.0;
        let p = 3.0e6;
        let n = 500;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let a = -std::f64::consts::FRAC_PI_2
                    + std::f64::consts::PI * k as f64 / n as f64;
                (r * a.cos(), r * a.sin())
            })
            .collect();
        let mut net = (0.0, 0.0);
        for w in pts.windows(2) {
            let (fx, fy) = pressure_edge_force(p, w[0], w[1]);
            net.0 += 2.0 * fx;
            net.1 += 2.0 * fy;
        }
        assert_relative_eq!(net.0, -p * 2.0 * r, max_relative = 1e-4);
        assert!(net.1.abs() < 1e-6 * p * r);
    }

    #[test]
    fn body_force_totals() {
        use crate::mesh::load_mesh;
        use std::io::Cursor;
        let text = "$Nodes 3\n0 0 0\n1 1 0\n2 0 2\n$Elements 1\n0 0 1 2 0\n$Boundary 3\n0 1 Bottom\n1 2 FarField\n2 0 SymmetryAxis\n";
        let mesh = load_mesh(Cursor::new(text)).unwrap();
        let cat = crate::materials::builtin_catalog();
        let f = body_force(&mesh, &cat).unwrap();
        let total_y: f64 = f.iter().skip(1).step_by(2).sum();
        // area = 1.0
        assert_relative_eq!(total_y, -2200.0 * 9.81, max_relative = 1e-12);
        let total_x: f64 = f.iter().step_by(2).sum();
        assert_eq!(total_x, 0.0);
        // unknown material id is an error
        let bad = mesh.clone().with_materials(vec![999]).unwrap();
        assert!(body_force(&bad, &cat).is_err());
    }

    proptest! {
        #[test]
        fn traction_is_linear_in_pressure(
            p in 0.1f64..1e7,
            k in 0.1f64..10.0,
            ax in -5.0f64..5.0, ay in -5.0f64..5.0,
            bx in -5.0f64..5.0, by in -5.0f64..5.0,
        ) {
            let f1 = pressure_edge_force(p, (ax, ay), (bx, by));
            let fk = pressure_edge_force(k * p, (ax, ay), (bx, by));
            prop_assert!((fk.0 - k * f1.0).abs() <= 1e-9 * f1.0.abs().max(1.0));
            prop_assert!((fk.1 - k * f1.1).abs() <= 1e-9 * f1.1.abs().max(1.0));
        }

        #[test]
        fn cyclic_fraction_is_periodic(
            t in 0.0f64..100.0,
            period in 1.0f64..20.0,
        ) {
            let s = PressureSchedule::CyclicStep {
                p_min_fraction: 0.2,
                p_max_fraction: 0.8,
                period,
                duty: 0.5,
            };
            // avoid switching instants
            let phase = t.rem_euclid(period);
            prop_assume!((phase - 0.5 * period).abs() > 1e-6 && phase > 1e-6 && period - phase > 1e-6);
            prop_assert_eq!(s.fraction(t), s.fraction(t + period));
        }
    }
}
