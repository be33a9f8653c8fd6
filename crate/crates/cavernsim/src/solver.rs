//! Time integration: explicit and implicit (Newton-Raphson with lagged
//! creep) stepping of the coupled elasticity + creep + damage problem.
//!
//! The elastic stiffness is constant over a run, so it is factorized once
//! and every step / Newton iteration reuses the factorization with a new
//! right-hand side built from the external loads and the fictitious creep
//! forces.

use crate::assembly::{
    assemble_creep_forces, recover_fields, AssemblyError, ConstrainedSystem, ElementFields,
};
use crate::constitutive::{
    creep_strain_rate, damage_rate, equivalent_creep_rate, ConstitutiveError, DamageState,
    StrainState,
};
use crate::materials::Material;
use crate::mesh::{Mesh, ProbeLocation};
use std::sync::Arc;
use thiserror::Error;

/// Seconds per day; creep laws run in SI seconds, the stepper in days.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error(
        "Newton iteration did not converge at t = {t} day: residual {residual:.3e} after {iterations} iterations (trace: {trace:?})"
    )]
    NonConvergence {
        t: f64,
        residual: f64,
        iterations: usize,
        trace: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Time step [day].
    pub dt: f64,
    /// Simulation horizon [day].
    pub t_end: f64,
    /// Relative residual tolerance for the Newton loop.
    pub residual_tolerance: f64,
    pub max_newton_iterations: usize,
    pub damage_enabled: bool,
    /// Update node coordinates with the displacement each step (Eulerian
    /// mode); default small-strain fixed geometry.
    pub update_geometry: bool,
    /// Store a full field snapshot every this many steps (the initial and
    /// final states are always stored).
    pub snapshot_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Implicit,
            dt: 1.5,
            t_end: 275.0,
            residual_tolerance: 1e-6,
            max_newton_iterations: 1000,
            damage_enabled: false,
            update_geometry: false,
            snapshot_every: 20,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "dt {} must be positive",
                self.dt
            )));
        }
        if self.t_end < 0.0 {
            return Err(SolverError::InvalidConfig(format!(
                "t_end {} must be non-negative",
                self.t_end
            )));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(SolverError::InvalidConfig(
                "residual tolerance must be positive".into(),
            ));
        }
        if self.max_newton_iterations == 0 {
            return Err(SolverError::InvalidConfig(
                "max Newton iterations must be >= 1".into(),
            ));
        }
        if self.snapshot_every == 0 {
            return Err(SolverError::InvalidConfig(
                "snapshot cadence must be >= 1 step".into(),
            ));
        }
        Ok(())
    }
}

/// A fully resolved simulation problem: mesh, materials, constraints,
/// per-element temperature, and the time-dependent external load.
pub struct Scene {
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    /// [K] per element.
    pub element_temperature: Vec<f64>,
    /// Fixed-DOF flags (length 2N).
    pub fixed: Vec<bool>,
    /// External force vector at time t [day] on the given mesh.
    pub external_force: Arc<dyn Fn(f64, &Mesh) -> Vec<f64> + Send + Sync>,
}

/// Mutable state advanced by the steppers.
#[derive(Debug, Clone)]
pub struct SimulationState {
    /// [day]
    pub t: f64,
    pub u: Vec<f64>,
    /// In-plane accumulated creep strain per element.
    pub eps_cr: Vec<StrainState>,
    /// Out-of-plane accumulated creep strain per element.
    pub eps_cr_zz: Vec<f64>,
    /// Kachanov damage per element.
    pub damage: Vec<f64>,
    /// Fields recovered for the current `u` (kept consistent by the
    /// steppers).
    pub fields: Vec<ElementFields>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub fields: Vec<ElementFields>,
    pub eps_cr: Vec<StrainState>,
    pub eps_cr_zz: Vec<f64>,
    pub damage: Vec<f64>,
    /// Total elastic strain energy [J per meter of thickness].
    pub strain_energy: f64,
}

/// One probe reading; probes are sampled every step.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub t: f64,
    pub label: String,
    pub u_x: f64,
    pub u_y: f64,
    pub s_vm: f64,
    pub damage: f64,
}

#[derive(Debug, Clone)]
pub enum Event {
    /// Element damage reached the critical level; the run halts.
    ElementFailed { t: f64, element: usize, damage: f64 },
    /// Explicit per-step creep increment exceeded 10% of the elastic
    /// strain (stability heuristic); reported once per run.
    ExplicitIncrementWarning { t: f64, element: usize, ratio: f64 },
    /// Newton iteration count for an implicit step.
    NewtonIterations { t: f64, iterations: usize },
    /// A step failed to converge and was bisected to the given size [day].
    StepBisected { t: f64, dt: f64 },
}

#[derive(Debug)]
pub struct RunArtifact {
    pub snapshots: Vec<Snapshot>,
    pub probe_rows: Vec<ProbeRow>,
    pub events: Vec<Event>,
    pub final_state: SimulationState,
    /// Set when the run halted early on element failure.
    pub failure: Option<(f64, usize)>,
}

struct Stepper<'a> {
    scene: &'a Scene,
    config: &'a IntegratorConfig,
    system: ConstrainedSystem,
    /// Current geometry (differs from scene.mesh in updated-geometry
    /// mode).
    mesh: Mesh,
    /// Plane-strain stiffness matrix per material, for the local implicit
    /// creep update.
    stiffness: Vec<[[f64; 3]; 3]>,
    /// Inverse of `stiffness` per material.
    compliance: Vec<[[f64; 3]; 3]>,
    /// Reduced von Mises quadratic form per material ([`von_mises_form`]).
    vm_form: Vec<[[f64; 3]; 3]>,
    /// Current step size [day]; equals `config.dt` except while a step is
    /// being bisected after a convergence failure.
    dt: f64,
    warned_increment: bool,
}

/// Quadratic form of the von Mises stress in the reduced plane-strain
/// stress space (sxx, syy, sxy) with the szz = nu (sxx + syy) recovery
/// convention chained in: svm^2 = sigma^T P sigma. Positive definite for
/// nu < 1/2, so within-step creep along the associated flow direction
/// P sigma / svm can always relax the driving stress (the unreduced
/// three-dimensional flow direction can be nearly orthogonal to the
/// in-plane space when the deviator is dominated by szz, leaving an
/// irreducible equivalent stress that makes fast-creeping elements
/// produce unbounded increments).
fn von_mises_form(nu: f64) -> [[f64; 3]; 3] {
    let a = (1.0 - 2.0 * nu).powi(2) / 4.0;
    let b = 0.75;
    [[a + b, a - b, 0.0], [a - b, a + b, 0.0], [0.0, 0.0, 3.0]]
}

fn mat3_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat3_inverse(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    Some([
        [
            c00 * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            c01 * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            c02 * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ])
}

/// Outcome of the per-element implicit creep solve at the trial state.
struct LocalReturn {
    /// In-plane creep strain increment over the step.
    de: StrainState,
    /// Creep multiplier mu = dt * rate(svm_end) / svm_end; the consistent
    /// element tangent is (C^-1 + mu P)^-1.
    mu: f64,
}

impl<'a> Stepper<'a> {
    fn new(scene: &'a Scene, config: &'a IntegratorConfig) -> Result<Self, SolverError> {
        let system = ConstrainedSystem::build(&scene.mesh, &scene.materials, &scene.fixed)?;
        let stiffness = scene
            .materials
            .iter()
            .map(|m| {
                crate::materials::lame_from(m.elastic)
                    .map(|l| crate::materials::stiffness_c(l))
                    .map_err(AssemblyError::from)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let compliance = stiffness
            .iter()
            .map(|c| {
                mat3_inverse(c).ok_or_else(|| {
                    SolverError::InvalidConfig("singular material stiffness".to_string())
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vm_form = scene
            .materials
            .iter()
            .map(|m| von_mises_form(m.elastic.nu))
            .collect();
        Ok(Stepper {
            scene,
            config,
            system,
            mesh: scene.mesh.clone(),
            stiffness,
            compliance,
            vm_form,
            dt: config.dt,
            warned_increment: false,
        })
    }

    /// Per-element backward-Euler radial-return solve at the trial state.
    ///
    /// `fields` must be recovered with the creep strain frozen at step n,
    /// so `fields[e].stress` is the trial stress. With the reduced von
    /// Mises form svm^2 = sigma^T P sigma and the associated flow
    /// d(eps_cr) = mu P sigma_end (mu = dt * rate(svm_end) / svm_end,
    /// direction taken at the *end* stress), the update has the closed
    /// form
    ///
    ///   sigma_end = (C^-1 + mu P)^-1 C^-1 sigma_trial,
    ///
    /// leaving a single scalar equation mu * svm(mu) = dt * rate(svm(mu))
    /// solved by bracketed bisection in mu. The multiplier is unbounded:
    /// an arbitrarily fast-creeping element can relax its entire reduced
    /// deviator within one step (svm -> 0 as mu -> infinity since P is
    /// positive definite), which keeps the increment finite and the step
    /// size physically meaningful even for very soft interlayers. The
    /// creep increment follows directly as C^-1 (sigma_trial - sigma_end).
    ///
    /// Damage used for the stress intensification is capped at the
    /// material's critical level: damage can overshoot to saturation
    /// within the step that triggers the halt, and the mechanical solve
    /// of that final step must stay finite.
    fn creep_damage(&self, material_id: usize, d: f64) -> f64 {
        if !self.config.damage_enabled {
            return 0.0;
        }
        match &self.scene.materials[material_id].damage {
            Some(dp) => d.min(dp.d_star).min(1.0 - 1e-6),
            None => d.min(1.0 - 1e-6),
        }
    }

    fn local_returns(
        &self,
        fields: &[ElementFields],
        damage: &[f64],
    ) -> Result<Vec<LocalReturn>, SolverError> {
        let dt_s = self.dt * SECONDS_PER_DAY;
        let mut out = Vec::with_capacity(fields.len());
        for (eid, el) in self.mesh.elements().iter().enumerate() {
            let passive = LocalReturn {
                de: StrainState::default(),
                mu: 0.0,
            };
            let Some(law) = &self.scene.materials[el.material_id].creep else {
                out.push(passive);
                continue;
            };
            let temperature = self.scene.element_temperature[eid];
            let d = if self.config.damage_enabled {
                damage[eid].min(1.0 - 1e-9)
            } else {
                0.0
            };
            let damage_state = DamageState { d };

            let trial = fields[eid].stress;
            let svm_tr = fields[eid].svm;
            if svm_tr <= 1e-9 {
                out.push(passive);
                continue;
            }
            let rate_tr = equivalent_creep_rate(svm_tr, law, temperature, damage_state)?;
            if rate_tr <= 0.0 {
                out.push(passive);
                continue;
            }

            let cinv = &self.compliance[el.material_id];
            let p = &self.vm_form[el.material_id];
            let s_tr = [trial.sxx, trial.syy, trial.sxy];
            let e_tr = mat3_vec(cinv, s_tr);
            // end stress and reduced equivalent stress as functions of mu
            let stress_at = |mu: f64| -> Option<([f64; 3], f64)> {
                let mut m = *cinv;
                for r in 0..3 {
                    for s in 0..3 {
                        m[r][s] += mu * p[r][s];
                    }
                }
                let s_end = mat3_vec(&mat3_inverse(&m)?, e_tr);
                let ps = mat3_vec(p, s_end);
                let x = (s_end[0] * ps[0] + s_end[1] * ps[1] + s_end[2] * ps[2])
                    .max(0.0)
                    .sqrt();
                Some((s_end, x))
            };
            let f = |mu: f64| -> Result<Option<f64>, SolverError> {
                let Some((_, x)) = stress_at(mu) else {
                    return Ok(None);
                };
                Ok(Some(
                    mu * x - dt_s * equivalent_creep_rate(x, law, temperature, damage_state)?,
                ))
            };

            // bracket the root: f(0) < 0, and f -> const > 0 as mu grows
            let mut hi = (dt_s * rate_tr / svm_tr).max(1e-30);
            let mut bracketed = false;
            for _ in 0..200 {
                match f(hi)? {
                    Some(v) if v > 0.0 => {
                        bracketed = true;
                        break;
                    }
                    Some(_) => hi *= 2.0,
                    None => break,
                }
            }
            if !bracketed {
                out.push(passive);
                continue;
            }
            let mut lo = 0.0_f64;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                match f(mid)? {
                    Some(v) if v > 0.0 => hi = mid,
                    Some(_) => lo = mid,
                    None => break,
                }
            }
            let mu = 0.5 * (lo + hi);
            let Some((s_end, _)) = stress_at(mu) else {
                out.push(passive);
                continue;
            };
            let de = [
                e_tr[0] - (cinv[0][0] * s_end[0] + cinv[0][1] * s_end[1] + cinv[0][2] * s_end[2]),
                e_tr[1] - (cinv[1][0] * s_end[0] + cinv[1][1] * s_end[1] + cinv[1][2] * s_end[2]),
                e_tr[2] - (cinv[2][0] * s_end[0] + cinv[2][1] * s_end[1] + cinv[2][2] * s_end[2]),
            ];
            out.push(LocalReturn {
                de: StrainState {
                    exx: de[0],
                    eyy: de[1],
                    gxy: de[2],
                },
                mu,
            });
        }
        Ok(out)
    }

    fn external(&self, t: f64) -> Vec<f64> {
        (self.scene.external_force)(t, &self.mesh)
    }

    fn solve_displacement(
        &self,
        t: f64,
        eps_cr: &[StrainState],
    ) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let mut f = self.external(t);
        let f_cr = assemble_creep_forces(&self.mesh, eps_cr, &self.scene.materials)?;
        for (a, b) in f.iter_mut().zip(&f_cr) {
            *a += b;
        }
        let u = self.system.solve(&f);
        Ok((u, f))
    }

    fn recover(
        &self,
        u: &[f64],
        eps_cr: &[StrainState],
    ) -> Result<Vec<ElementFields>, SolverError> {
        Ok(recover_fields(&self.mesh, u, eps_cr, &self.scene.materials)?)
    }

    /// Advance damage with the current stress; returns a failed element if
    /// any reaches its critical level.
    fn advance_damage(
        &self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
    ) -> Result<Option<usize>, SolverError> {
        if !self.config.damage_enabled {
            return Ok(None);
        }
        let mut failed = None;
        for (eid, el) in self.mesh.elements().iter().enumerate() {
            let Some(dp) = self.scene.materials[el.material_id].damage else {
                continue;
            };
            let d = state.damage[eid];
            if d >= 1.0 {
                continue;
            }
            let svm_mpa = state.fields[eid].svm / 1e6;
            let rate = damage_rate(svm_mpa, DamageState { d }, &dp)?;
            let d_new = (d + rate * self.dt).min(1.0);
            state.damage[eid] = d_new;
            if d_new >= dp.d_star && failed.is_none() {
                failed = Some(eid);
                events.push(Event::ElementFailed {
                    t: state.t + self.dt,
                    element: eid,
                    damage: d_new,
                });
            }
        }
        Ok(failed)
    }

    /// Creep strain increment over dt from the given per-element fields.
    fn creep_increments(
        &self,
        fields: &[ElementFields],
        damage: &[f64],
    ) -> Result<Vec<(StrainState, f64)>, SolverError> {
        let dt_s = self.dt * SECONDS_PER_DAY;
        let mut incr = Vec::with_capacity(fields.len());
        for (eid, el) in self.mesh.elements().iter().enumerate() {
            let Some(law) = &self.scene.materials[el.material_id].creep else {
                incr.push((StrainState::default(), 0.0));
                continue;
            };
            let d = if self.config.damage_enabled {
                damage[eid].min(1.0 - 1e-9)
            } else {
                0.0
            };
            let rate = creep_strain_rate(
                fields[eid].stress,
                law,
                self.scene.element_temperature[eid],
                DamageState { d },
            )?;
            incr.push((
                StrainState {
                    exx: rate.exx * dt_s,
                    eyy: rate.eyy * dt_s,
                    gxy: rate.gxy * dt_s,
                },
                rate.ezz * dt_s,
            ));
        }
        Ok(incr)
    }

    /// Creep strain increment over dt from the forward rate at the given
    /// (end-of-step) fields, along the reduced-space flow direction
    /// P sigma / svm. Commits the implicit step: at a converged fixed
    /// point the forward rate at the end-of-step stress is the exact
    /// backward-Euler increment.
    fn forward_increments(
        &self,
        fields: &[ElementFields],
        damage: &[f64],
    ) -> Result<Vec<(StrainState, f64)>, SolverError> {
        let dt_s = self.dt * SECONDS_PER_DAY;
        let mut incr = Vec::with_capacity(fields.len());
        for (eid, el) in self.mesh.elements().iter().enumerate() {
            let Some(law) = &self.scene.materials[el.material_id].creep else {
                incr.push((StrainState::default(), 0.0));
                continue;
            };
            let d = if self.config.damage_enabled {
                damage[eid].min(1.0 - 1e-9)
            } else {
                0.0
            };
            let svm = fields[eid].svm;
            if svm <= 1e-9 {
                incr.push((StrainState::default(), 0.0));
                continue;
            }
            let rate = equivalent_creep_rate(
                svm,
                law,
                self.scene.element_temperature[eid],
                DamageState { d },
            )?;
            let p = &self.vm_form[el.material_id];
            let stress = fields[eid].stress;
            let ps = mat3_vec(p, [stress.sxx, stress.syy, stress.sxy]);
            let mu = dt_s * rate / svm;
            incr.push((
                StrainState {
                    exx: mu * ps[0],
                    eyy: mu * ps[1],
                    gxy: mu * ps[2],
                },
                -mu * (ps[0] + ps[1]),
            ));
        }
        Ok(incr)
    }

    fn check_explicit_increment(
        &mut self,
        state: &SimulationState,
        incr: &[(StrainState, f64)],
        events: &mut Vec<Event>,
    ) {
        if self.warned_increment {
            return;
        }
        for (eid, (de, dezz)) in incr.iter().enumerate() {
            let cr = state.eps_cr[eid];
            let f = &state.fields[eid];
            let el_strain = [
                f.strain.exx - cr.exx,
                f.strain.eyy - cr.eyy,
                0.5 * (f.strain.gxy - cr.gxy),
            ];
            let el_norm = (el_strain.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let d_norm = (de.exx * de.exx
                + de.eyy * de.eyy
                + 0.5 * de.gxy * de.gxy
                + dezz * dezz)
                .sqrt();
            if el_norm > 1e-12 && d_norm > 0.1 * el_norm {
                events.push(Event::ExplicitIncrementWarning {
                    t: state.t,
                    element: eid,
                    ratio: d_norm / el_norm,
                });
                self.warned_increment = true;
                return;
            }
        }
    }

    /// Explicit step: creep and damage advanced with the stress at step n,
    /// then one linear solve.
    fn step_explicit(
        &mut self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
    ) -> Result<Option<usize>, SolverError> {
        let failed = self.advance_damage(state, events)?;
        let incr = self.creep_increments(&state.fields, &state.damage)?;
        self.check_explicit_increment(state, &incr, events);
        for (eid, (de, dezz)) in incr.iter().enumerate() {
            state.eps_cr[eid].exx += de.exx;
            state.eps_cr[eid].eyy += de.eyy;
            state.eps_cr[eid].gxy += de.gxy;
            state.eps_cr_zz[eid] += dezz;
        }
        let t_next = state.t + self.dt;
        let (u, _) = self.solve_displacement(t_next, &state.eps_cr)?;
        state.fields = self.recover(&u, &state.eps_cr)?;
        state.u = u;
        state.t = t_next;
        Ok(failed)
    }

    /// Implicit step: quasi-Newton solve of the end-of-step equilibrium
    /// with backward-Euler creep.
    ///
    /// Each iteration recovers the trial fields (creep frozen at step n),
    /// performs the per-element radial-return solve, and evaluates the
    /// out-of-balance force of the updated creep state. The displacement
    /// correction is solved with the consistent viscoplastic tangent
    /// (C^-1 + mu P)^-1 per element, which softens fast-relaxing regions
    /// (soft interlayers, heavily damaged elements) down to near-zero
    /// deviatoric stiffness and so captures the load redistribution that
    /// makes plain lagged-creep iteration diverge through strain
    /// localization. A halving line search on the
    /// force residual guards the update; if it cannot make progress the
    /// step is abandoned and bisected by the caller.
    fn step_implicit(
        &mut self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
    ) -> Result<Option<usize>, SolverError> {
        let failed = self.advance_damage(state, events)?;
        let t_next = state.t + self.dt;
        let eps_cr_n = state.eps_cr.clone();
        let eps_cr_zz_n = state.eps_cr_zz.clone();
        let f_ext = self.external(t_next);

        // evaluate the official residual of a displacement iterate: local
        // returns at its trial fields, the implied creep state, and the
        // out-of-balance force f_ext + F_cr - K u
        let eval = |stepper: &Self,
                    u: &[f64]|
         -> Result<(Vec<LocalReturn>, Vec<StrainState>, Vec<f64>, f64), SolverError> {
            let fields = stepper.recover(u, &eps_cr_n)?;
            let loc = stepper.local_returns(&fields, &state.damage)?;
            let eps_cr: Vec<StrainState> = loc
                .iter()
                .zip(&eps_cr_n)
                .map(|(l, n)| StrainState {
                    exx: n.exx + l.de.exx,
                    eyy: n.eyy + l.de.eyy,
                    gxy: n.gxy + l.de.gxy,
                })
                .collect();
            let mut f_new = f_ext.clone();
            let f_cr = assemble_creep_forces(&stepper.mesh, &eps_cr, &stepper.scene.materials)?;
            for (a, b) in f_new.iter_mut().zip(&f_cr) {
                *a += b;
            }
            let res = stepper.system.residual_norm(u, &f_new);
            Ok((loc, eps_cr, f_new, res))
        };

        // start from elastic equilibrium with the step-n creep state
        let (mut u, f_start) = self.solve_displacement(t_next, &eps_cr_n)?;
        let scale0 = self.system.free_norm(&f_start);
        let (mut loc, mut eps_cr, mut f_new, mut res) = eval(self, &u)?;

        let mut trace = Vec::new();
        for iter in 1..=self.config.max_newton_iterations {
            trace.push(res);
            let scale = self.system.free_norm(&f_new).max(scale0);
            if res <= self.config.residual_tolerance * scale.max(1e-30) {
                events.push(Event::NewtonIterations {
                    t: t_next,
                    iterations: iter,
                });
                // commit the forward rate at the converged stress (the
                // exact backward value at the fixed point), polishing the
                // creep/displacement pair well below the Newton tolerance;
                // the polish stops as soon as it ceases to contract
                let mut eps_cr_zz = eps_cr_zz_n.clone();
                let mut change_prev = f64::INFINITY;
                for _ in 0..30 {
                    let (u_new, _) = self.solve_displacement(t_next, &eps_cr)?;
                    let fields = self.recover(&u_new, &eps_cr)?;
                    let incr = self.forward_increments(&fields, &state.damage)?;
                    let mut change = 0.0_f64;
                    let mut norm = 0.0_f64;
                    for (eid, (de, _)) in incr.iter().enumerate() {
                        let new = StrainState {
                            exx: eps_cr_n[eid].exx + de.exx,
                            eyy: eps_cr_n[eid].eyy + de.eyy,
                            gxy: eps_cr_n[eid].gxy + de.gxy,
                        };
                        let old = eps_cr[eid];
                        change += (new.exx - old.exx).powi(2)
                            + (new.eyy - old.eyy).powi(2)
                            + (new.gxy - old.gxy).powi(2);
                        norm += new.exx * new.exx + new.eyy * new.eyy + new.gxy * new.gxy;
                    }
                    let (change, norm) = (change.sqrt(), norm.sqrt());
                    if change >= change_prev {
                        break;
                    }
                    change_prev = change;
                    for (eid, (de, dezz)) in incr.iter().enumerate() {
                        eps_cr[eid] = StrainState {
                            exx: eps_cr_n[eid].exx + de.exx,
                            eyy: eps_cr_n[eid].eyy + de.eyy,
                            gxy: eps_cr_n[eid].gxy + de.gxy,
                        };
                        eps_cr_zz[eid] = eps_cr_zz_n[eid] + dezz;
                    }
                    if change <= 1e-12 * norm.max(1e-30) {
                        break;
                    }
                }
                let (u_final, _) = self.solve_displacement(t_next, &eps_cr)?;
                state.fields = self.recover(&u_final, &eps_cr)?;
                state.u = u_final;
                state.eps_cr = eps_cr;
                state.eps_cr_zz = eps_cr_zz;
                state.t = t_next;
                return Ok(failed);
            }

            // consistent tangent: each creeping element gets the
            // viscoplastic compliance (C^-1 + mu P)^-1, which degenerates
            // to near-zero deviatoric stiffness for fully relaxing
            // elements; this captures the load redistribution around fast
            // regions (soft interlayers, heavily damaged elements) that
            // makes plain lagged-creep iteration diverge
            let tangent: Vec<[[f64; 3]; 3]> = (0..self.mesh.num_elements())
                .map(|eid| {
                    let mid = self.mesh.elements()[eid].material_id;
                    let mu = loc[eid].mu;
                    if mu <= 0.0 {
                        return self.stiffness[mid];
                    }
                    let mut m = self.compliance[mid];
                    let p = &self.vm_form[mid];
                    for r in 0..3 {
                        for s in 0..3 {
                            m[r][s] += mu * p[r][s];
                        }
                    }
                    mat3_inverse(&m).unwrap_or(self.stiffness[mid])
                })
                .collect();
            let newton =
                ConstrainedSystem::build_with_stiffness(&self.mesh, &tangent, &self.scene.fixed)?;
            let r_vec = self.system.residual_vector(&u, &f_new);
            let du = newton.solve(&r_vec);

            // halving line search on the official residual
            let mut alpha = 1.0_f64;
            let mut accepted = false;
            for _ in 0..10 {
                let u_try: Vec<f64> =
                    u.iter().zip(&du).map(|(a, b)| a + alpha * b).collect();
                let (loc_try, eps_try, f_try, res_try) = eval(self, &u_try)?;
                if res_try.is_finite() && res_try < res {
                    u = u_try;
                    loc = loc_try;
                    eps_cr = eps_try;
                    f_new = f_try;
                    res = res_try;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let iterations = trace.len();
        Err(SolverError::NonConvergence {
            t: t_next,
            residual: *trace.last().unwrap(),
            iterations,
            trace,
        })
    }


    /// One attempt at advancing the state by the current `self.dt`.
    fn step_once(
        &mut self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
    ) -> Result<Option<usize>, SolverError> {
        match self.config.scheme {
            Scheme::Explicit => self.step_explicit(state, events),
            Scheme::Implicit => self.step_implicit(state, events),
        }
    }

    /// Advance by `self.dt`, bisecting the step on convergence failure.
    /// Very fast creep (soft interlayers) can make the implicit fixed
    /// point non-contractive at the nominal step size; halving the step
    /// restores contraction, and the two halves sum to the full step.
    fn substep(
        &mut self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
        depth: usize,
    ) -> Result<Option<usize>, SolverError> {
        const MAX_BISECTIONS: usize = 8;
        match self.step_once(state, events) {
            Err(SolverError::NonConvergence { .. }) if depth < MAX_BISECTIONS => {
                self.dt *= 0.5;
                events.push(Event::StepBisected {
                    t: state.t,
                    dt: self.dt,
                });
                let first = self.substep(state, events, depth + 1);
                let result = match first {
                    // element failure halts the run mid-step
                    Ok(Some(eid)) => Ok(Some(eid)),
                    Ok(None) => self.substep(state, events, depth + 1),
                    Err(e) => Err(e),
                };
                self.dt *= 2.0;
                result
            }
            other => other,
        }
    }

    fn step(
        &mut self,
        state: &mut SimulationState,
        events: &mut Vec<Event>,
    ) -> Result<Option<usize>, SolverError> {
        let result = self.substep(state, events, 0)?;
        if self.config.update_geometry {
            self.mesh = self.scene.mesh.displaced(&state.u)?;
            self.system =
                ConstrainedSystem::build(&self.mesh, &self.scene.materials, &self.scene.fixed)?;
        }
        Ok(result)
    }
}


fn strain_energy(mesh: &Mesh, fields: &[ElementFields], eps_cr: &[StrainState]) -> f64 {
    let mut e = 0.0;
    for (eid, f) in fields.iter().enumerate() {
        let area = mesh.element_geometry(eid).map(|g| g.area).unwrap_or(0.0);
        let el = [
            f.strain.exx - eps_cr[eid].exx,
            f.strain.eyy - eps_cr[eid].eyy,
            f.strain.gxy - eps_cr[eid].gxy,
        ];
        e += 0.5 * area * (f.stress.sxx * el[0] + f.stress.syy * el[1] + f.stress.sxy * el[2]);
    }
    e
}

fn sample_probes(
    mesh: &Mesh,
    locations: &[(String, ProbeLocation)],
    state: &SimulationState,
    rows: &mut Vec<ProbeRow>,
) {
    for (label, loc) in locations {
        let el = &mesh.elements()[loc.element];
        let mut u_x = 0.0;
        let mut u_y = 0.0;
        for (k, &nid) in el.node_ids.iter().enumerate() {
            u_x += loc.barycentric[k] * state.u[2 * nid];
            u_y += loc.barycentric[k] * state.u[2 * nid + 1];
        }
        rows.push(ProbeRow {
            t: state.t,
            label: label.clone(),
            u_x,
            u_y,
            s_vm: state.fields[loc.element].svm,
            damage: state.damage[loc.element],
        });
    }
}

/// Run a simulation: geostatic elastic solve at t = 0, then time stepping
/// to `t_end` with snapshots at the configured cadence and probe samples
/// every step.
pub fn run_simulation(
    scene: &Scene,
    config: &IntegratorConfig,
) -> Result<RunArtifact, SolverError> {
    config.validate()?;
    assert_eq!(scene.element_temperature.len(), scene.mesh.num_elements());
    let mut stepper = Stepper::new(scene, config)?;

    // probes resolved once on the initial geometry
    let mut probe_locations = Vec::new();
    for p in scene.mesh.probes() {
        let loc = scene.mesh.locate_probe(p.x, p.y)?;
        probe_locations.push((p.label.clone(), loc));
    }

    let ne = scene.mesh.num_elements();
    // initial elastic response (F_cr = 0)
    let eps0 = vec![StrainState::default(); ne];
    let (u0, _) = stepper.solve_displacement(0.0, &eps0)?;
    let fields0 = stepper.recover(&u0, &eps0)?;
    let mut state = SimulationState {
        t: 0.0,
        u: u0,
        eps_cr: eps0,
        eps_cr_zz: vec![0.0; ne],
        damage: vec![0.0; ne],
        fields: fields0,
    };

    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut probe_rows = Vec::new();
    let mut failure = None;

    let take_snapshot = |state: &SimulationState, mesh: &Mesh| Snapshot {
        t: state.t,
        u: state.u.clone(),
        fields: state.fields.clone(),
        eps_cr: state.eps_cr.clone(),
        eps_cr_zz: state.eps_cr_zz.clone(),
        damage: state.damage.clone(),
        strain_energy: strain_energy(mesh, &state.fields, &state.eps_cr),
    };

    snapshots.push(take_snapshot(&state, &stepper.mesh));
    sample_probes(&scene.mesh, &probe_locations, &state, &mut probe_rows);

    let n_steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    for step in 1..=n_steps {
        let failed = stepper.step(&mut state, &mut events)?;
        sample_probes(&scene.mesh, &probe_locations, &state, &mut probe_rows);
        let last = step == n_steps || failed.is_some();
        if step % config.snapshot_every == 0 || last {
            snapshots.push(take_snapshot(&state, &stepper.mesh));
        }
        if let Some(eid) = failed {
            failure = Some((state.t, eid));
            break;
        }
    }

    Ok(RunArtifact {
        snapshots,
        probe_rows,
        events,
        final_state: state,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::standard_fixed_dofs;
    use crate::constitutive::equivalent_creep_rate;
    use crate::loads::edge_traction_forces;
    use crate::materials::{CreepLaw, DamageParams, ElasticParams};
    use crate::mesh::{structured_rectangle, BoundaryTag};
    use approx::assert_relative_eq;

    /// Uniaxial creep patch: zero-Poisson elastic so plane strain carries
    /// no out-of-plane stress and the 20 MPa top load is the von Mises
    /// stress exactly.
    fn patch_scene(a: f64, damage: Option<DamageParams>) -> Scene {
        let mesh = structured_rectangle(2, 2, 1.0, 1.0).unwrap();
        let materials = vec![Material {
            name: "patch".into(),
            density: 0.0,
            elastic: ElasticParams { e: 35.0e9, nu: 0.0 },
            creep: Some(CreepLaw {
                a,
                n: 3.5,
                q: 51_600.0,
            }),
            damage,
        }];
        let fixed = standard_fixed_dofs(&mesh);
        let ne = mesh.num_elements();
        let force_mesh = mesh.clone();
        Scene {
            mesh,
            materials,
            element_temperature: vec![313.15; ne],
            fixed,
            external_force: Arc::new(move |_t, _m| {
                edge_traction_forces(&force_mesh, BoundaryTag::Top, (0.0, -20.0e6))
            }),
        }
    }

    fn config(scheme: Scheme, dt: f64, t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            scheme,
            dt,
            t_end,
            ..Default::default()
        }
    }

    #[test]
    fn zero_horizon_returns_elastic_solution_only() {
        let scene = patch_scene(8.10e-27, None);
        let art = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 0.0)).unwrap();
        assert_eq!(art.snapshots.len(), 1);
        // uniform sigma_yy = -20 MPa
        for f in &art.snapshots[0].fields {
            assert_relative_eq!(f.stress.syy, -20.0e6, max_relative = 1e-9);
            assert_relative_eq!(f.svm, 20.0e6, max_relative = 1e-9);
        }
        assert!(art.snapshots[0].strain_energy > 0.0);
    }

    #[test]
    fn zero_creep_constant_displacement() {
        let scene = patch_scene(0.0, None);
        for scheme in [Scheme::Explicit, Scheme::Implicit] {
            let art = run_simulation(&scene, &config(scheme, 1.5, 7.5)).unwrap();
            let u0 = &art.snapshots.first().unwrap().u;
            let uf = &art.final_state.u;
            for (a, b) in u0.iter().zip(uf) {
                assert_relative_eq!(a, b, epsilon = 1e-15);
            }
        }
        // a = 0 implicit converges in one iteration
        let art = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 1.5)).unwrap();
        for e in &art.events {
            if let Event::NewtonIterations { iterations, .. } = e {
                assert_eq!(*iterations, 1);
            }
        }
    }

    #[test]
    fn explicit_accumulates_rate_times_dt_per_step() {
        let scene = patch_scene(8.10e-27, None);
        let dt = 1.5;
        let steps = 10;
        let art =
            run_simulation(&scene, &config(Scheme::Explicit, dt, dt * steps as f64)).unwrap();
        let law = scene.materials[0].creep.unwrap();
        let rate = equivalent_creep_rate(20.0e6, &law, 313.15, DamageState::default()).unwrap();
        // axial (yy) creep component: magnitude rate per unit equivalent
        let expected = -rate * dt * SECONDS_PER_DAY * steps as f64;
        for e in &art.final_state.eps_cr {
            assert_relative_eq!(e.eyy, expected, max_relative = 1e-9);
            // lateral split of the deviatoric flow
            assert_relative_eq!(e.exx, -0.5 * expected, max_relative = 1e-9);
        }
        // halving dt halves the per-step increment (first order)
        let art2 = run_simulation(&scene, &config(Scheme::Explicit, dt / 2.0, dt)).unwrap();
        let per_step_1 = art.final_state.eps_cr[0].eyy / steps as f64;
        let per_step_2 = art2.final_state.eps_cr[0].eyy / 2.0;
        assert_relative_eq!(per_step_2, per_step_1 / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn implicit_matches_classical_creep_accumulation() {
        // constant-stress element: eps_cr after m steps = m dt rate(sigma)
        let scene = patch_scene(8.10e-27, None);
        let dt = 1.5;
        let m = 20;
        let art =
            run_simulation(&scene, &config(Scheme::Implicit, dt, dt * m as f64)).unwrap();
        let law = scene.materials[0].creep.unwrap();
        let rate = equivalent_creep_rate(20.0e6, &law, 313.15, DamageState::default()).unwrap();
        let expected = -rate * dt * SECONDS_PER_DAY * m as f64;
        for e in &art.final_state.eps_cr {
            assert_relative_eq!(e.eyy, expected, max_relative = 1e-6);
        }
        // stress stays constant (statically determinate patch)
        for f in &art.final_state.fields {
            assert_relative_eq!(f.svm, 20.0e6, max_relative = 1e-6);
        }
    }

    #[test]
    fn explicit_and_implicit_agree_on_the_patch() {
        let scene = patch_scene(8.10e-27, None);
        let t_end = 30.0;
        let ue = run_simulation(&scene, &config(Scheme::Explicit, 1.5, t_end))
            .unwrap()
            .final_state
            .u;
        let ui = run_simulation(&scene, &config(Scheme::Implicit, 1.5, t_end))
            .unwrap()
            .final_state
            .u;
        let norm: f64 = ui.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = ue
            .iter()
            .zip(&ui)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 0.02 * norm, "diff {diff} vs norm {norm}");
    }

    #[test]
    fn creep_displacement_grows_monotonically() {
        let scene = patch_scene(8.10e-27, None);
        let art = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 30.0)).unwrap();
        // track |u_y| of the top-right corner node across probe-free
        // snapshots: use per-step creep magnitude instead
        let mut last = -1.0;
        for s in &art.snapshots {
            let mag: f64 = s.u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(mag >= last - 1e-15, "displacement magnitude decreased");
            last = mag;
        }
        // energy sanity
        for s in &art.snapshots {
            assert!(s.strain_energy.is_finite() && s.strain_energy >= 0.0);
        }
    }

    #[test]
    fn damage_run_fails_near_closed_form_time() {
        // crank the stress sensitivity: at svm = 20 MPa with B = 4e4,
        // r = 2.5, t_f = 4e4 / (3.5 * 20^2.5) ~ 6.39 day
        let dp = DamageParams {
            b: 4.0e4,
            r: 2.5,
            d_star: 0.95,
        };
        let scene = patch_scene(0.0, Some(dp));
        let mut cfg = config(Scheme::Explicit, 0.005, 20.0);
        cfg.damage_enabled = true;
        let art = run_simulation(&scene, &cfg).unwrap();
        let (t_fail, _) = art.failure.expect("expected element failure");
        let tf = crate::constitutive::failure_time_constant_stress(20.0, &dp).unwrap();
        // D* = 0.95 lands near (forward Euler lags slightly) the rupture
        assert!(
            t_fail < 1.05 * tf && t_fail > 0.8 * tf,
            "failed at {t_fail}, closed-form rupture {tf}"
        );
        assert!(art
            .events
            .iter()
            .any(|e| matches!(e, Event::ElementFailed { .. })));
    }

    #[test]
    fn runs_are_deterministic() {
        let scene = patch_scene(8.10e-27, None);
        let a1 = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 15.0)).unwrap();
        let a2 = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 15.0)).unwrap();
        for (x, y) in a1.final_state.u.iter().zip(&a2.final_state.u) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = IntegratorConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            residual_tolerance: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            max_newton_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn updated_geometry_mode_runs() {
        let scene = patch_scene(8.10e-27, None);
        let mut cfg = config(Scheme::Implicit, 1.5, 7.5);
        cfg.update_geometry = true;
        let art = run_simulation(&scene, &cfg).unwrap();
        // small-strain problem: updated geometry stays close to fixed
        let fixed = run_simulation(&scene, &config(Scheme::Implicit, 1.5, 7.5)).unwrap();
        let norm: f64 = fixed.final_state.u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = art
            .final_state
            .u
            .iter()
            .zip(&fixed.final_state.u)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 0.05 * norm.max(1e-12));
    }
}
