//! Post-processing of simulation results: dilatancy-based permeability,
//! cavern volume / convergence tracking, VTK field export and probe CSV
//! export.

use crate::constitutive::{permeability, volumetric_strain, StrainState};
use crate::mesh::{revolved_volume, Mesh, MeshError};
use crate::solver::{ProbeRow, Snapshot};
use std::io::{self, Write};

/// Permeability of intact rock salt [m^2]; the dilatancy cubic law is
/// floored at this value.
pub const INTACT_PERMEABILITY: f64 = 1e-21;

/// Per-element dilatancy quantities derived from a snapshot.
#[derive(Debug, Clone)]
pub struct DilatancyFields {
    /// Volumetric strain magnitude of the elastic part of the strain.
    pub eps_vol: Vec<f64>,
    /// Permeability [m^2], floored at the intact value.
    pub permeability: Vec<f64>,
}

/// Volumetric strain and permeability per element. The dilatant volume
/// change is carried by the elastic strain (creep flow is isochoric), so
/// the creep part is subtracted before taking the trace; the out-of-plane
/// elastic strain under plane strain is minus the accumulated out-of-plane
/// creep strain.
pub fn dilatancy_fields(snap: &Snapshot) -> DilatancyFields {
    let n = snap.fields.len();
    let mut eps_vol = Vec::with_capacity(n);
    let mut perm = Vec::with_capacity(n);
    for eid in 0..n {
        let total = snap.fields[eid].strain;
        let cr = snap.eps_cr[eid];
        let elastic = StrainState {
            exx: total.exx - cr.exx,
            eyy: total.eyy - cr.eyy,
            gxy: total.gxy - cr.gxy,
        };
        let ezz_elastic = -snap.eps_cr_zz[eid];
        let ev = volumetric_strain(elastic, ezz_elastic);
        eps_vol.push(ev);
        perm.push(permeability(ev).max(INTACT_PERMEABILITY));
    }
    DilatancyFields {
        eps_vol,
        permeability: perm,
    }
}

/// Cavern volume on the geometry displaced by `u`.
///
/// An open wall chain (both ends on the symmetry axis) is revolved about
/// x = 0 and gives a volume in m^3; closed loops give the cross-section
/// area, i.e. volume per meter of out-of-plane depth. Layouts do not mix
/// the two kinds.
pub fn cavern_volume(mesh: &Mesh, u: &[f64]) -> Result<f64, MeshError> {
    let mut v = 0.0;
    for path in mesh.cavern_wall_loops() {
        let pts: Vec<(f64, f64)> = path
            .iter()
            .map(|&nid| {
                let n = &mesh.nodes()[nid];
                (n.x + u[2 * nid], n.y + u[2 * nid + 1])
            })
            .collect();
        if path.first() == path.last() && path.len() > 1 {
            // closed loop: shoelace area (drop the repeated node)
            let m = pts.len() - 1;
            let mut a = 0.0;
            for i in 0..m {
                let (x1, y1) = pts[i];
                let (x2, y2) = pts[(i + 1) % m];
                a += x1 * y2 - x2 * y1;
            }
            v += 0.5 * a.abs();
        } else {
            v += revolved_volume(&pts);
        }
    }
    Ok(v)
}

/// Relative volume loss (closure) against the initial volume.
pub fn convergence(v_initial: f64, v_current: f64) -> f64 {
    (v_initial - v_current) / v_initial
}

/// Write a snapshot as a legacy ASCII VTK unstructured grid: nodal
/// displacement vectors and element scalars (von Mises stress, damage,
/// volumetric strain, permeability, material id).
pub fn export_vtk<W: Write>(mut w: W, mesh: &Mesh, snap: &Snapshot) -> io::Result<()> {
    let dil = dilatancy_fields(snap);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "cavernsim snapshot t={:.6} day", snap.t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;

    let nn = mesh.num_nodes();
    writeln!(w, "POINTS {nn} double")?;
    for n in mesh.nodes() {
        writeln!(w, "{:.9e} {:.9e} 0.0", n.x, n.y)?;
    }

    let ne = mesh.num_elements();
    writeln!(w, "CELLS {ne} {}", 4 * ne)?;
    for el in mesh.elements() {
        writeln!(w, "3 {} {} {}", el.node_ids[0], el.node_ids[1], el.node_ids[2])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "5")?;
    }

    writeln!(w, "POINT_DATA {nn}")?;
    writeln!(w, "VECTORS displacement double")?;
    for i in 0..nn {
        writeln!(w, "{:.9e} {:.9e} 0.0", snap.u[2 * i], snap.u[2 * i + 1])?;
    }

    writeln!(w, "CELL_DATA {ne}")?;
    let scalar = |w: &mut W, name: &str, vals: &dyn Fn(usize) -> f64| -> io::Result<()> {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for e in 0..ne {
            writeln!(w, "{:.9e}", vals(e))?;
        }
        Ok(())
    };
    scalar(&mut w, "von_mises", &|e| snap.fields[e].svm)?;
    scalar(&mut w, "sigma_xx", &|e| snap.fields[e].stress.sxx)?;
    scalar(&mut w, "sigma_yy", &|e| snap.fields[e].stress.syy)?;
    scalar(&mut w, "sigma_xy", &|e| snap.fields[e].stress.sxy)?;
    scalar(&mut w, "damage", &|e| snap.damage[e])?;
    scalar(&mut w, "eps_vol", &|e| dil.eps_vol[e])?;
    scalar(&mut w, "permeability", &|e| dil.permeability[e])?;
    scalar(&mut w, "material", &|e| mesh.elements()[e].material_id as f64)?;
    Ok(())
}

/// Write the probe time series as CSV. Rows arrive from the solver in
/// time-major order with a fixed probe order, so the output is
/// deterministic.
pub fn export_probe_csv<W: Write>(mut w: W, rows: &[ProbeRow]) -> io::Result<()> {
    writeln!(w, "t_day,probe,u_x,u_y,s_vm,D")?;
    for r in rows {
        writeln!(
            w,
            "{:.6},{},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.t, r.label, r.u_x, r.u_y, r.s_vm, r.damage
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::ElementFields;
    use crate::constitutive::StressState;
    use crate::mesh::structured_rectangle;
    use approx::assert_relative_eq;

    fn toy_snapshot() -> (Mesh, Snapshot) {
        let mesh = structured_rectangle(1, 1, 1.0, 1.0).unwrap();
        let ne = mesh.num_elements();
        let nn = mesh.num_nodes();
        let fields = (0..ne)
            .map(|e| ElementFields {
                strain: StrainState {
                    exx: 1e-4 * (e as f64 + 1.0),
                    eyy: -2e-4,
                    gxy: 0.0,
                },
                stress: StressState {
                    sxx: 1.0e6,
                    syy: -3.0e6,
                    sxy: 0.5e6,
                    szz: 0.0,
                },
                svm: 4.0e6,
            })
            .collect::<Vec<_>>();
        let snap = Snapshot {
            t: 12.5,
            u: vec![1e-3; 2 * nn],
            fields,
            eps_cr: vec![StrainState::default(); ne],
            eps_cr_zz: vec![0.0; ne],
            damage: vec![0.25; ne],
            strain_energy: 1.0,
        };
        (mesh, snap)
    }

    #[test]
    fn dilatancy_uses_elastic_trace_and_floors_permeability() {
        let (_, mut snap) = toy_snapshot();
        let dil = dilatancy_fields(&snap);
        // element 0: trace = 1e-4 - 2e-4 = -1e-4 -> |.| = 1e-4
        assert_relative_eq!(dil.eps_vol[0], 1e-4, max_relative = 1e-12);
        assert_relative_eq!(
            dil.permeability[0],
            2.13e-8 * 1e-12,
            max_relative = 1e-12
        );
        // tiny strain floors at intact permeability
        snap.fields[0].strain = StrainState {
            exx: 1e-6,
            eyy: 0.0,
            gxy: 0.0,
        };
        let dil = dilatancy_fields(&snap);
        assert_eq!(dil.permeability[0], INTACT_PERMEABILITY);
        // creep part is excluded: shifting total and creep by the same
        // amount leaves the elastic trace (2e-4 - 2e-4 = 0) unchanged
        snap.fields[1].strain.exx += 5e-3;
        snap.eps_cr[1].exx += 5e-3;
        let dil2 = dilatancy_fields(&snap);
        assert!(dil2.eps_vol[1].abs() < 1e-15);
    }

    #[test]
    fn out_of_plane_creep_contributes_to_dilatancy() {
        let (_, mut snap) = toy_snapshot();
        snap.fields[0].strain = StrainState {
            exx: 0.0,
            eyy: 0.0,
            gxy: 0.0,
        };
        snap.eps_cr_zz[0] = 2e-4;
        let dil = dilatancy_fields(&snap);
        assert_relative_eq!(dil.eps_vol[0], 2e-4, max_relative = 1e-12);
    }

    #[test]
    fn convergence_is_relative_volume_loss() {
        assert_relative_eq!(convergence(100.0, 88.0), 0.12, max_relative = 1e-12);
        assert_eq!(convergence(50.0, 50.0), 0.0);
    }

    #[test]
    fn vtk_export_has_expected_structure() {
        let (mesh, snap) = toy_snapshot();
        let mut buf = Vec::new();
        export_vtk(&mut buf, &mesh, &snap).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert!(text.contains(&format!("POINTS {} double", mesh.num_nodes())));
        assert!(text.contains(&format!(
            "CELLS {} {}",
            mesh.num_elements(),
            4 * mesh.num_elements()
        )));
        assert!(text.contains(&format!("CELL_TYPES {}", mesh.num_elements())));
        assert!(text.contains("VECTORS displacement double"));
        for name in [
            "von_mises",
            "sigma_xx",
            "damage",
            "eps_vol",
            "permeability",
            "material",
        ] {
            assert!(
                text.contains(&format!("SCALARS {name} double 1")),
                "missing scalar {name}"
            );
        }
        // every cell line references valid nodes
        let cells: Vec<&str> = lines
            .iter()
            .skip_while(|l| !l.starts_with("CELLS"))
            .skip(1)
            .take(mesh.num_elements())
            .copied()
            .collect();
        for c in cells {
            let ids: Vec<usize> = c
                .split_whitespace()
                .map(|v| v.parse().unwrap())
                .collect();
            assert_eq!(ids[0], 3);
            assert!(ids[1..].iter().all(|&i| i < mesh.num_nodes()));
        }
    }

    #[test]
    fn probe_csv_is_deterministic_and_well_formed() {
        let rows = vec![
            ProbeRow {
                t: 0.0,
                label: "A".into(),
                u_x: 1e-3,
                u_y: -2e-3,
                s_vm: 1.5e7,
                damage: 0.0,
            },
            ProbeRow {
                t: 1.5,
                label: "A".into(),
                u_x: 2e-3,
                u_y: -3e-3,
                s_vm: 1.6e7,
                damage: 0.1,
            },
        ];
        let mut buf = Vec::new();
        export_probe_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t_day,probe,u_x,u_y,s_vm,D");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.000000,A,"));
        let mut buf2 = Vec::new();
        export_probe_csv(&mut buf2, &rows).unwrap();
        assert_eq!(text.as_bytes(), buf2.as_slice());
    }

    #[test]
    fn revolved_cavern_volume_matches_generator() {
        use crate::mesh::{generate, CavernLayout, CavernShape, DomainSpec};
        let spec = DomainSpec {
            width: 400.0,
            depth_to_salt_top: 200.0,
            roof_thickness: 80.0,
            floor_thickness: 80.0,
            far_size: 60.0,
            refinement: 4.0,
            layout: CavernLayout::SingleOnAxis(CavernShape::Capsule {
                radius: 30.0,
                height: 120.0,
                target_volume: None,
            }),
            internal_interfaces: Vec::new(),
        };
        let dom = generate(&spec).unwrap();
        let u = vec![0.0; 2 * dom.mesh.num_nodes()];
        let v = cavern_volume(&dom.mesh, &u).unwrap();
        // wall nodes carry a tiny anti-cocircularity jitter, so the match
        // is close but not exact
        assert_relative_eq!(v, dom.cavern_volume, max_relative = 1e-5);
        // uniform inward wall motion shrinks the cavern
        let (cx, cy) = (0.0, dom.y_floor + 60.0);
        let mut u2 = u.clone();
        for path in dom.mesh.cavern_wall_loops() {
            for &nid in &path {
                let n = &dom.mesh.nodes()[nid];
                let (dx, dy) = (cx - n.x, cy - n.y);
                let len = (dx * dx + dy * dy).sqrt().max(1e-9);
                u2[2 * nid] = 0.5 * dx / len;
                u2[2 * nid + 1] = 0.5 * dy / len;
            }
        }
        let v2 = cavern_volume(&dom.mesh, &u2).unwrap();
        assert!(v2 < v, "inward motion must shrink the volume: {v2} vs {v}");
    }
}
