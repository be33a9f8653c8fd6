//! Global finite-element assembly: stiffness matrix, creep fictitious
//! forces, boundary constraints, and element field recovery.
//!
//! Constant-strain triangles with one-point quadrature (exact). Dirichlet
//! constraints are homogeneous rollers (and full clamps for verification
//! problems), applied by eliminating constrained rows and columns so the
//! reduced matrix stays symmetric positive definite.

use crate::constitutive::{von_mises, StrainState, StressState};
use crate::linalg::{rcm_order, SkylineCholesky, SymSkyline};
use crate::materials::{lame_from, stiffness_c, Material};
use crate::mesh::{BoundaryTag, ElementGeometry, Mesh};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("element {element} references unknown material id {id}")]
    UnknownMaterial { element: usize, id: usize },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Material(#[from] crate::materials::MaterialError),
    #[error("singular system: {0}")]
    Singular(String),
}

/// 6x6 element stiffness area * B^T C B.
pub fn element_stiffness(geom: &ElementGeometry, c: &[[f64; 3]; 3]) -> [[f64; 6]; 6] {
    // cb = C * B (3x6)
    let mut cb = [[0.0; 6]; 3];
    for r in 0..3 {
        for k in 0..6 {
            for m in 0..3 {
                cb[r][k] += c[r][m] * geom.b[m][k];
            }
        }
    }
    let mut ke = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            let mut s = 0.0;
            for r in 0..3 {
                s += geom.b[r][a] * cb[r][b];
            }
            ke[a][b] = geom.area * s;
        }
    }
    ke
}

fn material_c(mesh: &Mesh, materials: &[Material], eid: usize) -> Result<[[f64; 3]; 3], AssemblyError> {
    let id = mesh.elements()[eid].material_id;
    let m = materials.get(id).ok_or(AssemblyError::UnknownMaterial {
        element: eid,
        id,
    })?;
    Ok(stiffness_c(lame_from(m.elastic)?))
}

/// Assemble the full (unconstrained) 2N x 2N stiffness matrix in skyline
/// storage. Singular by construction (rigid modes); used for products and
/// property checks, not factorization.
pub fn assemble_stiffness(mesh: &Mesh, materials: &[Material]) -> Result<SymSkyline, AssemblyError> {
    let n = mesh.num_nodes();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    for el in mesh.elements() {
        for &a in &el.node_ids {
            for &b in &el.node_ids {
                for (da, db) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = 2 * a + da;
                    let j = 2 * b + db;
                    if i < j {
                        neighbors[j].push(i);
                    }
                }
            }
        }
    }
    let mut k = SymSkyline::from_pattern(&neighbors);
    for eid in 0..mesh.num_elements() {
        let geom = mesh.element_geometry(eid)?;
        let c = material_c(mesh, materials, eid)?;
        let ke = element_stiffness(&geom, &c);
        let el = &mesh.elements()[eid];
        for a in 0..6 {
            let i = 2 * el.node_ids[a / 2] + a % 2;
            for b in 0..6 {
                let j = 2 * el.node_ids[b / 2] + b % 2;
                if i >= j {
                    k.add(i, j, ke[a][b]);
                }
            }
        }
    }
    Ok(k)
}

/// Standard roller constraints: u_y = 0 on Bottom, u_x = 0 on
/// SymmetryAxis; Top and FarField stay natural. Returns a 2N flag array.
pub fn standard_fixed_dofs(mesh: &Mesh) -> Vec<bool> {
    let mut fixed = vec![false; 2 * mesh.num_nodes()];
    for seg in mesh.boundary() {
        match seg.tag {
            BoundaryTag::Bottom => {
                for &n in &seg.node_ids {
                    fixed[2 * n + 1] = true;
                }
            }
            BoundaryTag::SymmetryAxis => {
                for &n in &seg.node_ids {
                    fixed[2 * n] = true;
                }
            }
            _ => {}
        }
    }
    fixed
}

/// Clamp both displacement components on every boundary node (used by
/// manufactured-solution verification with a field vanishing on the
/// boundary).
pub fn clamped_boundary_dofs(mesh: &Mesh) -> Vec<bool> {
    let mut fixed = vec![false; 2 * mesh.num_nodes()];
    for seg in mesh.boundary() {
        for &n in &seg.node_ids {
            fixed[2 * n] = true;
            fixed[2 * n + 1] = true;
        }
    }
    fixed
}

/// Constrained, reordered, factorized stiffness system. Built once per
/// run (the elastic stiffness is constant) and reused for every
/// right-hand side.
pub struct ConstrainedSystem {
    n_dofs: usize,
    /// full dof -> reduced index (None when constrained)
    full_to_red: Vec<Option<usize>>,
    /// reduced index -> full dof
    red_to_full: Vec<usize>,
    k_red: SymSkyline,
    chol: SkylineCholesky,
}

impl ConstrainedSystem {
    pub fn build(
        mesh: &Mesh,
        materials: &[Material],
        fixed: &[bool],
    ) -> Result<Self, AssemblyError> {
        Self::build_with(mesh, fixed, |eid| material_c(mesh, materials, eid))
    }

    /// Build with an explicit per-element stiffness matrix, for solvers
    /// that soften elements (e.g. a creep-consistent tangent).
    pub fn build_with_stiffness(
        mesh: &Mesh,
        element_c: &[[[f64; 3]; 3]],
        fixed: &[bool],
    ) -> Result<Self, AssemblyError> {
        assert_eq!(element_c.len(), mesh.num_elements());
        Self::build_with(mesh, fixed, |eid| Ok(element_c[eid]))
    }

    fn build_with(
        mesh: &Mesh,
        fixed: &[bool],
        element_c: impl Fn(usize) -> Result<[[f64; 3]; 3], AssemblyError>,
    ) -> Result<Self, AssemblyError> {
        let n_dofs = 2 * mesh.num_nodes();
        assert_eq!(fixed.len(), n_dofs);
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        if n_fixed < 3 {
            return Err(AssemblyError::Singular(format!(
                "only {n_fixed} constrained DOFs; rigid-body modes remain free"
            )));
        }
        // compact numbering of free dofs
        let mut compact = vec![None; n_dofs];
        let mut free = Vec::new();
        for i in 0..n_dofs {
            if !fixed[i] {
                compact[i] = Some(free.len());
                free.push(i);
            }
        }
        let n_free = free.len();
        // adjacency among free dofs
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for el in mesh.elements() {
            for &a in &el.node_ids {
                for &b in &el.node_ids {
                    for (da, db) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        if let (Some(i), Some(j)) =
                            (compact[2 * a + da], compact[2 * b + db])
                        {
                            if i != j {
                                neighbors[i].push(j);
                            }
                        }
                    }
                }
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        // bandwidth reduction
        let perm = rcm_order(&neighbors); // perm[new] = old compact index
        let mut inv = vec![0usize; n_free];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut neighbors_p: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for (old, nb) in neighbors.iter().enumerate() {
            let i = inv[old];
            neighbors_p[i] = nb.iter().map(|&j| inv[j]).collect();
        }
        let mut k_red = SymSkyline::from_pattern(&neighbors_p);
        let mut full_to_red = vec![None; n_dofs];
        let mut red_to_full = vec![0usize; n_free];
        for i in 0..n_dofs {
            if let Some(c) = compact[i] {
                full_to_red[i] = Some(inv[c]);
                red_to_full[inv[c]] = i;
            }
        }
        // assemble directly into the reduced pattern
        for eid in 0..mesh.num_elements() {
            let geom = mesh.element_geometry(eid)?;
            let c = element_c(eid)?;
            let ke = element_stiffness(&geom, &c);
            let el = &mesh.elements()[eid];
            for a in 0..6 {
                let fa = 2 * el.node_ids[a / 2] + a % 2;
                let Some(i) = full_to_red[fa] else { continue };
                for b in 0..6 {
                    let fb = 2 * el.node_ids[b / 2] + b % 2;
                    let Some(j) = full_to_red[fb] else { continue };
                    if i >= j {
                        k_red.add(i, j, ke[a][b]);
                    }
                }
            }
        }
        let chol = k_red
            .clone()
            .factorize()
            .map_err(|e| AssemblyError::Singular(e.to_string()))?;
        Ok(ConstrainedSystem {
            n_dofs,
            full_to_red,
            red_to_full,
            k_red,
            chol,
        })
    }

    pub fn n_free(&self) -> usize {
        self.red_to_full.len()
    }

    fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.red_to_full.iter().map(|&i| full[i]).collect()
    }

    /// Solve K u = f for a full-size force vector; constrained entries of
    /// the returned displacement are zero.
    pub fn solve(&self, f_full: &[f64]) -> Vec<f64> {
        assert_eq!(f_full.len(), self.n_dofs);
        let f = self.reduce(f_full);
        let u_red = self.chol.solve(&f);
        let mut u = vec![0.0; self.n_dofs];
        for (r, &i) in self.red_to_full.iter().enumerate() {
            u[i] = u_red[r];
        }
        u
    }

    /// Full-size residual vector f - K u; constrained entries are zero.
    pub fn residual_vector(&self, u_full: &[f64], f_full: &[f64]) -> Vec<f64> {
        let u = self.reduce(u_full);
        let f = self.reduce(f_full);
        let mut ku = vec![0.0; u.len()];
        self.k_red.mul_vec(&u, &mut ku);
        let mut r = vec![0.0; self.n_dofs];
        for (red, &full) in self.red_to_full.iter().enumerate() {
            r[full] = f[red] - ku[red];
        }
        r
    }

    /// Euclidean norm of the free-DOF residual f - K u.
    pub fn residual_norm(&self, u_full: &[f64], f_full: &[f64]) -> f64 {
        let u = self.reduce(u_full);
        let f = self.reduce(f_full);
        let mut ku = vec![0.0; u.len()];
        self.k_red.mul_vec(&u, &mut ku);
        f.iter()
            .zip(&ku)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean norm of the free part of a full-size vector.
    pub fn free_norm(&self, v_full: &[f64]) -> f64 {
        self.red_to_full
            .iter()
            .map(|&i| v_full[i] * v_full[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Whether the given full DOF index is constrained.
    pub fn is_fixed(&self, dof: usize) -> bool {
        self.full_to_red[dof].is_none()
    }
}

/// Fictitious creep force vector F_cr = sum_e B_e^T C_e eps_cr,e area_e.
pub fn assemble_creep_forces(
    mesh: &Mesh,
    eps_cr: &[StrainState],
    materials: &[Material],
) -> Result<Vec<f64>, AssemblyError> {
    assert_eq!(eps_cr.len(), mesh.num_elements());
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for eid in 0..mesh.num_elements() {
        let geom = mesh.element_geometry(eid)?;
        let c = material_c(mesh, materials, eid)?;
        let e = eps_cr[eid];
        let ev = [e.exx, e.eyy, e.gxy];
        // sigma_cr = C eps_cr
        let mut s = [0.0; 3];
        for r in 0..3 {
            for m in 0..3 {
                s[r] += c[r][m] * ev[m];
            }
        }
        let el = &mesh.elements()[eid];
        for a in 0..6 {
            let mut v = 0.0;
            for r in 0..3 {
                v += geom.b[r][a] * s[r];
            }
            f[2 * el.node_ids[a / 2] + a % 2] += geom.area * v;
        }
    }
    Ok(f)
}

/// Recovered per-element fields.
#[derive(Debug, Clone, Copy)]
pub struct ElementFields {
    pub strain: StrainState,
    pub stress: StressState,
    pub svm: f64,
}

/// Recover element strain and stress from nodal displacements and
/// accumulated creep strain: eps = B u, sigma = C (eps - eps_cr), with
/// the plane-strain out-of-plane component szz = nu (sxx + syy).
pub fn recover_fields(
    mesh: &Mesh,
    u: &[f64],
    eps_cr: &[StrainState],
    materials: &[Material],
) -> Result<Vec<ElementFields>, AssemblyError> {
    assert_eq!(u.len(), 2 * mesh.num_nodes());
    assert_eq!(eps_cr.len(), mesh.num_elements());
    let mut out = Vec::with_capacity(mesh.num_elements());
    for eid in 0..mesh.num_elements() {
        let geom = mesh.element_geometry(eid)?;
        let el = &mesh.elements()[eid];
        let mut ue = [0.0; 6];
        for (k, &nid) in el.node_ids.iter().enumerate() {
            ue[2 * k] = u[2 * nid];
            ue[2 * k + 1] = u[2 * nid + 1];
        }
        let mut strain = [0.0; 3];
        for r in 0..3 {
            for k in 0..6 {
                strain[r] += geom.b[r][k] * ue[k];
            }
        }
        let c = material_c(mesh, materials, eid)?;
        let cr = eps_cr[eid];
        let el_strain = [strain[0] - cr.exx, strain[1] - cr.eyy, strain[2] - cr.gxy];
        let mut sv = [0.0; 3];
        for r in 0..3 {
            for m in 0..3 {
                sv[r] += c[r][m] * el_strain[m];
            }
        }
        let nu = materials[el.material_id].elastic.nu;
        let stress = StressState {
            sxx: sv[0],
            syy: sv[1],
            sxy: sv[2],
            szz: nu * (sv[0] + sv[1]),
        };
        out.push(ElementFields {
            strain: StrainState {
                exx: strain[0],
                eyy: strain[1],
                gxy: strain[2],
            },
            stress,
            svm: von_mises(stress),
        });
    }
    Ok(out)
}
