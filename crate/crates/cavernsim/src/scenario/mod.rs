//! Scenario configuration: TOML schema with base-case defaults, built-in
//! scenarios, scene construction, sensitivity sweeps and the MMS
//! verification gate.

mod mms;

pub use mms::{run_mms_convergence, MmsLevel, MmsReport};

use crate::loads::{
    self, FluidModel, GeostaticModel, LoadError, PressureSchedule,
};
use crate::materials::{self, Material, MaterialError};
use crate::mesh::{
    self, generate, structured_rectangle, CavernLayout, CavernShape, DomainSpec, MeshError,
};
use crate::solver::{
    run_simulation, IntegratorConfig, ProbeRow, RunArtifact, Scene, SolverError,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario ({path}): {msg}")]
    Validation { path: String, msg: String },
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What running the scenario means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Time-dependent cavern (or specimen) simulation.
    #[default]
    Simulate,
    /// Discretization-order verification on a manufactured solution.
    MmsConvergence,
}

/// Cavern half profile or capsule, in local coordinates (x >= 0, y down
/// from the roof apex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CavernConfig {
    #[serde(rename_all = "kebab-case")]
    Capsule {
        radius: f64,
        height: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_volume: Option<f64>,
    },
    Profile { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LayoutConfig {
    Single,
    #[serde(rename_all = "kebab-case")]
    Pair { center_to_center: f64 },
}

fn d_width() -> f64 {
    500.0
}
fn d_depth_to_salt_top() -> f64 {
    500.0
}
fn d_thickness() -> f64 {
    200.0
}
fn d_far_size() -> f64 {
    60.0
}
fn d_refinement() -> f64 {
    6.0
}
fn d_cavern() -> CavernConfig {
    CavernConfig::Capsule {
        radius: 25.0,
        height: 250.0,
        target_volume: Some(670_000.0),
    }
}
fn d_layout() -> LayoutConfig {
    LayoutConfig::Single
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshConfig {
    /// Cavern domain generated from geometric parameters.
    #[serde(rename_all = "kebab-case")]
    Generated {
        #[serde(default = "d_width")]
        width: f64,
        #[serde(default = "d_depth_to_salt_top")]
        depth_to_salt_top: f64,
        #[serde(default = "d_thickness")]
        roof_thickness: f64,
        #[serde(default = "d_thickness")]
        floor_thickness: f64,
        /// Far-field target element size [m].
        #[serde(default = "d_far_size")]
        far_size: f64,
        /// Near-wall refinement factor.
        #[serde(default = "d_refinement")]
        refinement: f64,
        #[serde(default = "d_cavern")]
        cavern: CavernConfig,
        #[serde(default = "d_layout")]
        layout: LayoutConfig,
    },
    /// Structured rectangle (benchmark specimens, MMS).
    #[serde(rename_all = "kebab-case")]
    Rectangle {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    /// Mesh loaded from a file in the native mesh format.
    File { path: String },
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig::Generated {
            width: d_width(),
            depth_to_salt_top: d_depth_to_salt_top(),
            roof_thickness: d_thickness(),
            floor_thickness: d_thickness(),
            far_size: d_far_size(),
            refinement: d_refinement(),
            cavern: d_cavern(),
            layout: d_layout(),
        }
    }
}

/// Optional numeric overrides on the base rock material; used by the
/// sensitivity sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaterialOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creep_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creep_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creep_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damage_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damage_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BandPlacement {
    /// Centered at the cavern mid-height.
    #[default]
    Mid,
    /// Centered at the cavern floor level.
    Floor,
}

fn d_band_width() -> f64 {
    30.0
}

/// A horizontal interlayer band across the whole domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct InterlayerConfig {
    pub material: String,
    #[serde(default)]
    pub placement: BandPlacement,
    /// Band thickness [m].
    #[serde(default = "d_band_width")]
    pub width: f64,
}

fn d_rock() -> String {
    "halite".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MaterialsConfig {
    /// Catalog name of the base rock.
    pub rock: String,
    pub overrides: MaterialOverrides,
    pub interlayers: Vec<InterlayerConfig>,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        MaterialsConfig {
            rock: d_rock(),
            overrides: MaterialOverrides::default(),
            interlayers: Vec::new(),
        }
    }
}

/// External loading mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadingConfig {
    /// Net (fluid minus lithostatic) pressure on the cavern walls.
    CavernPressure,
    /// Uniform compressive traction on the top edge [Pa] (specimen
    /// benchmarks).
    TopTraction { pressure: f64 },
}

impl Default for LoadingConfig {
    fn default() -> Self {
        LoadingConfig::CavernPressure
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GeostaticConfig {
    pub overburden_density: f64,
    pub salt_density: f64,
    pub surface_temperature: f64,
    /// [K/m]
    pub temp_gradient: f64,
    /// Override: uniform temperature everywhere [K] (specimen
    /// benchmarks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_temperature: Option<f64>,
}

impl Default for GeostaticConfig {
    fn default() -> Self {
        let g = GeostaticModel::default();
        GeostaticConfig {
            overburden_density: g.overburden_density,
            salt_density: g.salt_density,
            surface_temperature: g.surface_temperature,
            temp_gradient: g.temp_gradient,
            uniform_temperature: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputConfig {
    pub vtk: bool,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { vtk: true, csv: true }
    }
}

fn d_schedule() -> PressureSchedule {
    PressureSchedule::Constant { fraction: 0.2 }
}
fn d_fluid() -> FluidModel {
    FluidModel::default()
}

/// A full simulation configuration. An empty TOML document parses to the
/// base case: a single capsule cavern, constant 20% lithostatic fluid
/// pressure, implicit integration at dt = 1.5 day for 275 days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub mesh: MeshConfig,
    pub materials: MaterialsConfig,
    pub geostatic: GeostaticConfig,
    #[serde(default = "d_schedule")]
    pub schedule: PressureSchedule,
    #[serde(default = "d_fluid")]
    pub fluid: FluidModel,
    pub loading: LoadingConfig,
    pub integrator: IntegratorConfig,
    pub output: OutputConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            kind: ScenarioKind::default(),
            mesh: MeshConfig::default(),
            materials: MaterialsConfig::default(),
            geostatic: GeostaticConfig::default(),
            schedule: d_schedule(),
            fluid: d_fluid(),
            loading: LoadingConfig::default(),
            integrator: IntegratorConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Parse and validate a scenario; returns admissibility warnings.
pub fn parse_scenario(text: &str) -> Result<(Scenario, Vec<String>), ScenarioError> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let warnings = scenario.validate()?;
    Ok((scenario, warnings))
}

/// Serialize a scenario back to TOML. `parse_scenario(serialize(s))`
/// returns a scenario equal to `s`.
pub fn serialize_scenario(s: &Scenario) -> Result<String, ScenarioError> {
    toml::to_string_pretty(s).map_err(|e| ScenarioError::Internal(e.to_string()))
}

impl Scenario {
    /// Validate the configuration; returns warnings (e.g. pressure
    /// fractions outside the admissible operating window).
    pub fn validate(&self) -> Result<Vec<String>, ScenarioError> {
        let mut warnings = Vec::new();
        // geostatic
        self.geostatic_model().validate()?;
        // schedule admissibility
        warnings.extend(self.schedule.validate()?);
        // integrator
        self.integrator
            .validate()
            .map_err(|e| ScenarioError::Validation {
                path: "integrator".into(),
                msg: e.to_string(),
            })?;
        // materials exist in the catalog
        let catalog = materials::builtin_catalog();
        materials::find(&catalog, &self.materials.rock).map_err(|_| {
            ScenarioError::Validation {
                path: "materials.rock".into(),
                msg: format!("unknown material `{}`", self.materials.rock),
            }
        })?;
        for (i, il) in self.materials.interlayers.iter().enumerate() {
            materials::find(&catalog, &il.material).map_err(|_| {
                ScenarioError::Validation {
                    path: format!("materials.interlayers[{i}].material"),
                    msg: format!("unknown material `{}`", il.material),
                }
            })?;
            if !(il.width > 0.0) {
                return Err(ScenarioError::Validation {
                    path: format!("materials.interlayers[{i}].width"),
                    msg: format!("band width {} must be positive", il.width),
                });
            }
        }
        // mesh geometry
        match &self.mesh {
            MeshConfig::Generated { .. } => {
                let spec = self.domain_spec()?;
                spec.validate()?;
                // interlayer bands inside the domain
                for (i, il) in self.materials.interlayers.iter().enumerate() {
                    let (y0, y1) = band_range(il, &spec);
                    if y0 < 0.0 || y1 > spec.height() {
                        return Err(ScenarioError::Validation {
                            path: format!("materials.interlayers[{i}]"),
                            msg: format!(
                                "band [{y0}, {y1}] m outside the domain [0, {}] m",
                                spec.height()
                            ),
                        });
                    }
                }
                if matches!(self.loading, LoadingConfig::TopTraction { .. }) {
                    return Err(ScenarioError::Validation {
                        path: "loading".into(),
                        msg: "top-traction loading requires a rectangle mesh".into(),
                    });
                }
            }
            MeshConfig::Rectangle {
                width,
                height,
                nx,
                ny,
            } => {
                if !(*width > 0.0 && *height > 0.0) || *nx == 0 || *ny == 0 {
                    return Err(ScenarioError::Validation {
                        path: "mesh".into(),
                        msg: "rectangle dimensions and subdivisions must be positive".into(),
                    });
                }
                if !self.materials.interlayers.is_empty() {
                    return Err(ScenarioError::Validation {
                        path: "materials.interlayers".into(),
                        msg: "interlayer bands require a generated cavern mesh".into(),
                    });
                }
            }
            MeshConfig::File { path } => {
                if path.is_empty() {
                    return Err(ScenarioError::Validation {
                        path: "mesh.path".into(),
                        msg: "empty mesh path".into(),
                    });
                }
            }
        }
        Ok(warnings)
    }

    pub fn geostatic_model(&self) -> GeostaticModel {
        GeostaticModel {
            overburden_density: self.geostatic.overburden_density,
            salt_density: self.geostatic.salt_density,
            depth_to_salt_top: match &self.mesh {
                MeshConfig::Generated {
                    depth_to_salt_top, ..
                } => *depth_to_salt_top,
                _ => GeostaticModel::default().depth_to_salt_top,
            },
            surface_temperature: self.geostatic.surface_temperature,
            temp_gradient: self.geostatic.temp_gradient,
        }
    }

    fn domain_spec(&self) -> Result<DomainSpec, ScenarioError> {
        let MeshConfig::Generated {
            width,
            depth_to_salt_top,
            roof_thickness,
            floor_thickness,
            far_size,
            refinement,
            cavern,
            layout,
        } = &self.mesh
        else {
            return Err(ScenarioError::Validation {
                path: "mesh".into(),
                msg: "not a generated cavern mesh".into(),
            });
        };
        let shape = match cavern {
            CavernConfig::Capsule {
                radius,
                height,
                target_volume,
            } => CavernShape::Capsule {
                radius: *radius,
                height: *height,
                target_volume: *target_volume,
            },
            CavernConfig::Profile { points } => {
                CavernShape::Profile(points.iter().map(|p| (p[0], p[1])).collect())
            }
        };
        let layout = match layout {
            LayoutConfig::Single => CavernLayout::SingleOnAxis(shape),
            LayoutConfig::Pair { center_to_center } => CavernLayout::PairPeriodic {
                shape,
                center_to_center: *center_to_center,
            },
        };
        let mut spec = DomainSpec {
            width: *width,
            depth_to_salt_top: *depth_to_salt_top,
            roof_thickness: *roof_thickness,
            floor_thickness: *floor_thickness,
            far_size: *far_size,
            refinement: *refinement,
            layout,
            internal_interfaces: Vec::new(),
        };
        // resolve interlayer band edges so the mesh honors them
        for il in &self.materials.interlayers {
            let (y0, y1) = band_range(il, &spec);
            spec.internal_interfaces.push(y0);
            spec.internal_interfaces.push(y1);
        }
        Ok(spec)
    }
}

/// Band y-range in domain coordinates.
fn band_range(il: &InterlayerConfig, spec: &DomainSpec) -> (f64, f64) {
    let center = match il.placement {
        BandPlacement::Mid => 0.5 * (spec.y_roof() + spec.y_floor()),
        BandPlacement::Floor => spec.y_floor(),
    };
    (center - 0.5 * il.width, center + 0.5 * il.width)
}

/// A scenario resolved into a runnable scene plus domain metadata.
pub struct BuiltScene {
    pub scene: Scene,
    pub width: f64,
    pub height: f64,
    pub y_roof: f64,
    pub y_floor: f64,
    /// Undeformed cavern volume (m^3 revolved, or m^2 cross-section for
    /// pair layouts); zero for non-cavern meshes.
    pub initial_cavern_volume: f64,
    /// True when the layout models a periodic cavern array (both side
    /// edges are symmetry planes).
    pub periodic_sides: bool,
}

/// Resolve the material stack: index 0 is the base rock (with overrides
/// applied), then one entry per interlayer.
fn resolve_materials(cfg: &MaterialsConfig) -> Result<Vec<Material>, ScenarioError> {
    let catalog = materials::builtin_catalog();
    let mut rock = materials::find(&catalog, &cfg.rock)?.clone();
    let o = &cfg.overrides;
    if let Some(e) = o.e {
        rock.elastic.e = e;
    }
    if let Some(nu) = o.nu {
        rock.elastic.nu = nu;
    }
    if let Some(creep) = rock.creep.as_mut() {
        if let Some(a) = o.creep_a {
            creep.a = a;
        }
        if let Some(n) = o.creep_n {
            creep.n = n;
        }
        if let Some(q) = o.creep_q {
            creep.q = q;
        }
    }
    if let Some(damage) = rock.damage.as_mut() {
        if let Some(b) = o.damage_b {
            damage.b = b;
        }
        if let Some(r) = o.damage_r {
            damage.r = r;
        }
    }
    rock.validate()?;
    let mut out = vec![rock];
    for il in &cfg.interlayers {
        out.push(materials::find(&catalog, &il.material)?.clone());
    }
    Ok(out)
}

/// Build the runnable scene for a scenario.
pub fn build_scene(scenario: &Scenario) -> Result<BuiltScene, ScenarioError> {
    scenario.validate()?;
    let materials = resolve_materials(&scenario.materials)?;
    let geo = scenario.geostatic_model();

    let (mut mesh, width, height, y_roof, y_floor, initial_cavern_volume, periodic_sides) =
        match &scenario.mesh {
            MeshConfig::Generated { .. } => {
                let spec = scenario.domain_spec()?;
                let dom = generate(&spec)?;
                let periodic = matches!(spec.layout, CavernLayout::PairPeriodic { .. });
                (
                    dom.mesh,
                    dom.width,
                    dom.height,
                    dom.y_roof,
                    dom.y_floor,
                    dom.cavern_volume,
                    periodic,
                )
            }
            MeshConfig::Rectangle {
                width,
                height,
                nx,
                ny,
            } => {
                let m = structured_rectangle(*nx, *ny, *width, *height)?.with_probes(vec![
                    mesh::ProbePoint {
                        label: "top".into(),
                        x: 0.5 * width,
                        y: 0.999 * height,
                    },
                ]);
                (m, *width, *height, *height, 0.0, 0.0, false)
            }
            MeshConfig::File { path } => {
                let file = std::fs::File::open(path)?;
                let m = mesh::load_mesh(std::io::BufReader::new(file))?;
                let (x0, x1, _y0, y1) = m.bounding_box();
                (m, x1 - x0, y1, y1, 0.0, 0.0, false)
            }
        };

    // interlayer material assignment by element centroid
    if !scenario.materials.interlayers.is_empty() {
        let spec = scenario.domain_spec()?;
        let mut ids = vec![0usize; mesh.num_elements()];
        for (k, il) in scenario.materials.interlayers.iter().enumerate() {
            let (b0, b1) = band_range(il, &spec);
            for (eid, id) in ids.iter_mut().enumerate() {
                let (_, yc) = mesh.element_centroid(eid);
                if yc >= b0 && yc <= b1 {
                    *id = k + 1;
                }
            }
        }
        mesh = mesh.with_materials(ids)?;
    }

    // per-element temperature from centroid depth (surface at y = height)
    let element_temperature: Vec<f64> = (0..mesh.num_elements())
        .map(|eid| {
            if let Some(t) = scenario.geostatic.uniform_temperature {
                t
            } else {
                let (_, yc) = mesh.element_centroid(eid);
                loads::temperature_at(&geo, height - yc)
            }
        })
        .collect();

    // constraints: rollers on bottom and symmetry axis; for a periodic
    // pair both side edges are symmetry planes
    let mut fixed = crate::assembly::standard_fixed_dofs(&mesh);
    if periodic_sides {
        for seg in mesh.segments_with_tag(mesh::BoundaryTag::FarField) {
            for &n in &seg.node_ids {
                fixed[2 * n] = true;
            }
        }
    }

    // time-dependent external force
    let external_force: Arc<dyn Fn(f64, &crate::mesh::Mesh) -> Vec<f64> + Send + Sync> =
        match &scenario.loading {
            LoadingConfig::TopTraction { pressure } => {
                let p = *pressure;
                Arc::new(move |_t, m| {
                    loads::edge_traction_forces(m, mesh::BoundaryTag::Top, (0.0, -p))
                })
            }
            LoadingConfig::CavernPressure => {
                let schedule = scenario.schedule.clone();
                let fluid = scenario.fluid;
                let geo = geo;
                let reference_depth = height - y_roof;
                Arc::new(move |t, m| {
                    loads::traction_nodal_forces(m, |_x, y| {
                        let depth = height - y;
                        loads::cavern_pressure(&schedule, &geo, &fluid, t, depth, reference_depth)
                            - loads::lithostatic_pressure(&geo, depth)
                    })
                })
            }
        };

    Ok(BuiltScene {
        scene: Scene {
            mesh,
            materials,
            element_temperature,
            fixed,
            external_force,
        },
        width,
        height,
        y_roof,
        y_floor,
        initial_cavern_volume,
        periodic_sides,
    })
}

/// Result of running one scenario.
pub struct ScenarioRun {
    pub built: BuiltScene,
    pub artifact: RunArtifact,
}

/// Build and run a scenario end to end.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let built = build_scene(scenario)?;
    let artifact = run_simulation(&built.scene, &scenario.integrator)?;
    Ok(ScenarioRun { built, artifact })
}

/// The built-in scenario names.
pub const BUILTIN_NAMES: [&str; 16] = [
    "uniaxial-benchmark",
    "monotonic-cylinder",
    "cyclic-cylinder",
    "irregular-homogeneous",
    "irregular-potash",
    "interlayer-carnallite-mid",
    "interlayer-carnallite-floor",
    "interlayer-bischofite-mid",
    "interlayer-bischofite-floor",
    "field-profile",
    "damage-tertiary",
    "multi-cavern-regular-320",
    "multi-cavern-regular-200",
    "multi-cavern-irregular-200",
    "multi-cavern-irregular-140",
    "mms-convergence",
];

/// An irregular cavern half profile (wavy flank, ~250 m tall).
fn irregular_profile() -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [14.0, 8.0],
        [26.0, 30.0],
        [20.0, 62.0],
        [34.0, 95.0],
        [42.0, 128.0],
        [28.0, 160.0],
        [33.0, 192.0],
        [19.0, 222.0],
        [10.0, 240.0],
        [0.0, 250.0],
    ]
}

/// A taller sonar-style field profile (~300 m tall).
fn field_profile() -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [10.0, 6.0],
        [22.0, 25.0],
        [30.0, 55.0],
        [24.0, 85.0],
        [36.0, 115.0],
        [31.0, 150.0],
        [40.0, 180.0],
        [26.0, 215.0],
        [32.0, 245.0],
        [18.0, 275.0],
        [8.0, 292.0],
        [0.0, 300.0],
    ]
}

/// Base generated mesh with a different cavern shape.
fn generated_with_cavern(cavern: CavernConfig) -> MeshConfig {
    MeshConfig::Generated {
        width: d_width(),
        depth_to_salt_top: d_depth_to_salt_top(),
        roof_thickness: d_thickness(),
        floor_thickness: d_thickness(),
        far_size: d_far_size(),
        refinement: d_refinement(),
        cavern,
        layout: d_layout(),
    }
}

fn interlayer_scenario(material: &str, placement: BandPlacement) -> Scenario {
    let mut s = Scenario::default();
    s.materials.interlayers.push(InterlayerConfig {
        material: material.to_string(),
        placement,
        width: 30.0,
    });
    s.integrator.t_end = 50.0;
    s
}

fn pair_scenario(cavern: CavernConfig, ctc: f64) -> Scenario {
    let mut s = Scenario::default();
    s.mesh = MeshConfig::Generated {
        width: ctc + 300.0,
        depth_to_salt_top: d_depth_to_salt_top(),
        roof_thickness: d_thickness(),
        floor_thickness: d_thickness(),
        far_size: d_far_size(),
        refinement: 5.0,
        cavern,
        layout: LayoutConfig::Pair {
            center_to_center: ctc,
        },
    };
    s
}

/// A scenario reproducing one of the built-in test cases.
pub fn builtin_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let mut s = Scenario::default();
    match name {
        "uniaxial-benchmark" => {
            // rectangular specimen under a constant 20 MPa top load
            s.mesh = MeshConfig::Rectangle {
                width: 1.0,
                height: 2.0,
                nx: 4,
                ny: 8,
            };
            s.loading = LoadingConfig::TopTraction { pressure: 20.0e6 };
            s.geostatic.uniform_temperature = Some(313.15);
            s.integrator.t_end = 275.0;
        }
        "monotonic-cylinder" => {}
        "cyclic-cylinder" => {
            s.schedule = PressureSchedule::CyclicStep {
                p_min_fraction: 0.2,
                p_max_fraction: 0.8,
                period: 6.0,
                duty: 0.5,
            };
        }
        "irregular-homogeneous" => {
            s.mesh = generated_with_cavern(CavernConfig::Profile {
                points: irregular_profile(),
            });
        }
        "irregular-potash" => {
            s.mesh = generated_with_cavern(CavernConfig::Profile {
                points: irregular_profile(),
            });
            s.materials.interlayers.push(InterlayerConfig {
                material: "potash".to_string(),
                placement: BandPlacement::Mid,
                width: 30.0,
            });
        }
        // carnallite uses the raw published constants: the temperature
        // reduction applied to bischofite would make a carnallite band
        // creep slower than the surrounding halite, which contradicts the
        // published deformation increases for carnallite interlayers
        "interlayer-carnallite-mid" => {
            s = interlayer_scenario("carnallite", BandPlacement::Mid)
        }
        "interlayer-carnallite-floor" => {
            s = interlayer_scenario("carnallite", BandPlacement::Floor)
        }
        "interlayer-bischofite-mid" => {
            s = interlayer_scenario("bischofite-scaled", BandPlacement::Mid)
        }
        "interlayer-bischofite-floor" => {
            s = interlayer_scenario("bischofite-scaled", BandPlacement::Floor)
        }
        "field-profile" => {
            s.mesh = generated_with_cavern(CavernConfig::Profile {
                points: field_profile(),
            });
            s.integrator.t_end = 730.0;
        }
        "damage-tertiary" => {
            s.integrator.damage_enabled = true;
            s.integrator.dt = 0.5;
        }
        "multi-cavern-regular-320" => {
            s = pair_scenario(d_cavern(), 320.0);
        }
        "multi-cavern-regular-200" => {
            s = pair_scenario(d_cavern(), 200.0);
        }
        "multi-cavern-irregular-200" => {
            s = pair_scenario(
                CavernConfig::Profile {
                    points: irregular_profile(),
                },
                200.0,
            );
        }
        "multi-cavern-irregular-140" => {
            s = pair_scenario(
                CavernConfig::Profile {
                    points: irregular_profile(),
                },
                140.0,
            );
        }
        "mms-convergence" => {
            s.kind = ScenarioKind::MmsConvergence;
            s.mesh = MeshConfig::Rectangle {
                width: 1000.0,
                height: 1000.0,
                nx: 16,
                ny: 16,
            };
            s.loading = LoadingConfig::TopTraction { pressure: 0.0 };
        }
        _ => return Err(ScenarioError::UnknownBuiltin(name.to_string())),
    }
    Ok(s)
}

/// A one-at-a-time sweep axis: a config path and the values to try.
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

/// Apply a single axis value to a scenario. Supported paths:
/// `rock.e`, `rock.nu`, `rock.creep-a`, `rock.creep-n`, `rock.creep-q`,
/// `rock.damage-b`, `rock.damage-r`, `geostatic.surface-temperature`,
/// `geostatic.temp-gradient`, `mesh.depth-to-salt-top`,
/// `schedule.fraction`, `fluid.density`, `integrator.dt`.
pub fn apply_axis(s: &mut Scenario, path: &str, value: f64) -> Result<(), ScenarioError> {
    let o = &mut s.materials.overrides;
    match path {
        "rock.e" => o.e = Some(value),
        "rock.nu" => o.nu = Some(value),
        "rock.creep-a" => o.creep_a = Some(value),
        "rock.creep-n" => o.creep_n = Some(value),
        "rock.creep-q" => o.creep_q = Some(value),
        "rock.damage-b" => o.damage_b = Some(value),
        "rock.damage-r" => o.damage_r = Some(value),
        "geostatic.surface-temperature" => s.geostatic.surface_temperature = value,
        "geostatic.temp-gradient" => s.geostatic.temp_gradient = value,
        "mesh.depth-to-salt-top" => match &mut s.mesh {
            MeshConfig::Generated {
                depth_to_salt_top, ..
            } => *depth_to_salt_top = value,
            _ => {
                return Err(ScenarioError::Validation {
                    path: path.into(),
                    msg: "depth axis requires a generated cavern mesh".into(),
                })
            }
        },
        "schedule.fraction" => match &mut s.schedule {
            PressureSchedule::Constant { fraction } => *fraction = value,
            _ => {
                return Err(ScenarioError::Validation {
                    path: path.into(),
                    msg: "fraction axis requires a constant schedule".into(),
                })
            }
        },
        "fluid.density" => s.fluid.fluid_density = value,
        "integrator.dt" => s.integrator.dt = value,
        _ => return Err(ScenarioError::UnknownAxis(path.to_string())),
    }
    Ok(())
}

/// One completed sweep variant.
pub struct SweepResult {
    pub axis: String,
    pub value: f64,
    pub scenario: Scenario,
    pub artifact: RunArtifact,
}

/// Run a one-at-a-time sensitivity sweep: for each axis, each value is
/// applied to a copy of the base scenario and run independently (in
/// parallel; `CAVERNSIM_THREADS` caps the worker count). An empty axis
/// list runs the base scenario once.
pub fn run_sweep(base: &Scenario, axes: &[SweepAxis]) -> Result<Vec<SweepResult>, ScenarioError> {
    use rayon::prelude::*;

    let mut points: Vec<(String, f64, Scenario)> = Vec::new();
    if axes.is_empty() {
        points.push(("base".to_string(), 0.0, base.clone()));
    }
    for axis in axes {
        for &v in &axis.values {
            let mut s = base.clone();
            apply_axis(&mut s, &axis.path, v)?;
            points.push((axis.path.clone(), v, s));
        }
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("CAVERNSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ScenarioError::Internal(e.to_string()))?;

    pool.install(|| {
        points
            .into_par_iter()
            .map(|(axis, value, scenario)| {
                let run = run_scenario(&scenario)?;
                Ok(SweepResult {
                    axis,
                    value,
                    scenario,
                    artifact: run.artifact,
                })
            })
            .collect()
    })
}

/// Merge sweep probe series into one CSV with variant columns.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = String::from("axis,value,t_day,probe,u_x,u_y,s_vm,D\n");
    for r in results {
        for row in &r.artifact.probe_rows {
            let ProbeRow {
                t,
                label,
                u_x,
                u_y,
                s_vm,
                damage,
            } = row;
            out.push_str(&format!(
                "{},{:.6e},{:.6},{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                r.axis, r.value, t, label, u_x, u_y, s_vm, damage
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_base_case() {
        let (s, warnings) = parse_scenario("").unwrap();
        assert_eq!(s, Scenario::default());
        assert!(warnings.is_empty());
        match &s.mesh {
            MeshConfig::Generated { cavern, .. } => match cavern {
                CavernConfig::Capsule {
                    radius,
                    height,
                    target_volume,
                } => {
                    assert_eq!(*radius, 25.0);
                    assert_eq!(*height, 250.0);
                    assert_eq!(*target_volume, Some(670_000.0));
                }
                _ => panic!("base cavern should be a capsule"),
            },
            _ => panic!("base mesh should be generated"),
        }
        assert_eq!(s.schedule, PressureSchedule::Constant { fraction: 0.2 });
        assert_eq!(s.integrator.dt, 1.5);
        assert_eq!(s.integrator.t_end, 275.0);
    }

    #[test]
    fn round_trip_is_idempotent() {
        for name in BUILTIN_NAMES {
            let s = builtin_scenario(name).unwrap();
            let text = serialize_scenario(&s).unwrap();
            let (s2, _) = parse_scenario(&text).unwrap();
            assert_eq!(s, s2, "round trip changed `{name}`");
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_context() {
        let err = parse_scenario("[integrator]\nfoo = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("foo"), "message should name the key: {msg}");
    }

    #[test]
    fn out_of_range_fraction_is_an_error_and_high_fraction_warns() {
        let mut s = Scenario::default();
        s.schedule = PressureSchedule::Constant { fraction: 1.2 };
        assert!(s.validate().is_err());
        s.schedule = PressureSchedule::Constant { fraction: 0.9 };
        let warnings = s.validate().unwrap();
        assert!(!warnings.is_empty(), "0.9 should warn");
    }

    #[test]
    fn interlayer_band_is_resolved_at_the_floor() {
        let s = builtin_scenario("interlayer-carnallite-floor").unwrap();
        let spec = s.domain_spec().unwrap();
        let (y0, y1) = band_range(&s.materials.interlayers[0], &spec);
        assert_eq!(y1 - y0, 30.0);
        assert_eq!(0.5 * (y0 + y1), spec.y_floor());
        // mid placement centers between roof and floor
        let sm = builtin_scenario("interlayer-bischofite-mid").unwrap();
        let (m0, m1) = band_range(&sm.materials.interlayers[0], &spec);
        assert_eq!(0.5 * (m0 + m1), 0.5 * (spec.y_roof() + spec.y_floor()));
    }

    #[test]
    fn all_builtins_validate() {
        for name in BUILTIN_NAMES {
            let s = builtin_scenario(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(builtin_scenario("no-such-case").is_err());
    }

    #[test]
    fn base_scene_builds_with_cavern_loading() {
        let s = Scenario::default();
        let built = build_scene(&s).unwrap();
        assert!(built.initial_cavern_volume > 0.0);
        // 670,000 m^3 target within 10%
        assert!(
            (built.initial_cavern_volume - 670_000.0).abs() < 67_000.0,
            "volume {}",
            built.initial_cavern_volume
        );
        // net wall force at t = 0 is nonzero and the net pressure is
        // negative (fluid below lithostatic -> inward pull)
        let f = (built.scene.external_force)(0.0, &built.scene.mesh);
        let norm: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 0.0);
        // temperatures increase with depth
        let temps = &built.scene.element_temperature;
        let tmin = temps.iter().cloned().fold(f64::INFINITY, f64::min);
        let tmax = temps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(tmax > tmin && tmin > 283.0);
    }

    #[test]
    fn interlayer_band_gets_its_own_material() {
        let s = builtin_scenario("interlayer-bischofite-floor").unwrap();
        let built = build_scene(&s).unwrap();
        let n_band = built
            .scene
            .mesh
            .elements()
            .iter()
            .filter(|e| e.material_id == 1)
            .count();
        assert!(n_band > 0, "no elements assigned to the interlayer band");
        assert_eq!(built.scene.materials.len(), 2);
        assert_eq!(built.scene.materials[1].name, "bischofite-scaled");
    }

    #[test]
    fn pair_layout_fixes_both_side_edges() {
        let s = builtin_scenario("multi-cavern-regular-320").unwrap();
        let built = build_scene(&s).unwrap();
        assert!(built.periodic_sides);
        for seg in built
            .scene
            .mesh
            .segments_with_tag(mesh::BoundaryTag::FarField)
        {
            for &n in &seg.node_ids {
                assert!(built.scene.fixed[2 * n], "right edge u_x must be fixed");
            }
        }
    }

    #[test]
    fn sweep_applies_axes_one_at_a_time() {
        let base = Scenario::default();
        let mut s = base.clone();
        apply_axis(&mut s, "rock.creep-n", 3.0).unwrap();
        assert_eq!(s.materials.overrides.creep_n, Some(3.0));
        assert!(apply_axis(&mut s, "bogus.path", 1.0).is_err());
        // point expansion: 2 axes x 2 values = 4 variants
        let axes = vec![
            SweepAxis {
                path: "rock.creep-n".into(),
                values: vec![3.0, 3.5],
            },
            SweepAxis {
                path: "geostatic.surface-temperature".into(),
                values: vec![283.15, 293.15],
            },
        ];
        let mut count = 0;
        for axis in &axes {
            for &v in &axis.values {
                let mut variant = base.clone();
                apply_axis(&mut variant, &axis.path, v).unwrap();
                variant.validate().unwrap();
                count += 1;
            }
        }
        assert_eq!(count, 4);
    }

    #[test]
    fn uniaxial_benchmark_runs_briefly() {
        let mut s = builtin_scenario("uniaxial-benchmark").unwrap();
        s.integrator.t_end = 4.5;
        let run = run_scenario(&s).unwrap();
        // settlement: top probe moves down monotonically (creep under
        // constant load)
        let rows: Vec<&ProbeRow> = run
            .artifact
            .probe_rows
            .iter()
            .filter(|r| r.label == "top")
            .collect();
        assert!(rows.len() >= 3);
        for w in rows.windows(2) {
            assert!(w[1].u_y <= w[0].u_y + 1e-12, "settlement must not reverse");
        }
    }
}

#[cfg(test)]
mod diag {
    use super::*;
    use crate::solver::SECONDS_PER_DAY;

    #[test]
    #[ignore]
    fn initial_stress_stats() {
        let s = Scenario::default();
        let built = build_scene(&s).unwrap();
        let mut cfg = s.integrator.clone();
        cfg.t_end = 0.0;
        let art = run_simulation(&built.scene, &cfg).unwrap();
        let snap = &art.snapshots[0];
        let mesh = &built.scene.mesh;
        let mut svm: Vec<(f64, usize)> = snap
            .fields
            .iter()
            .enumerate()
            .map(|(i, f)| (f.svm, i))
            .collect();
        svm.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        println!("elements: {}", mesh.num_elements());
        for (v, eid) in svm.iter().take(12) {
            let (x, y) = mesh.element_centroid(*eid);
            let area = mesh.element_geometry(*eid).unwrap().area;
            println!(
                "svm {:.3e} Pa at element {eid} ({x:.1},{y:.1}) area {area:.3e} T {:.1}",
                v, built.scene.element_temperature[*eid]
            );
        }
        let law = built.scene.materials[0].creep.unwrap();
        let top = svm[0];
        let rate = crate::constitutive::equivalent_creep_rate(
            top.0,
            &law,
            built.scene.element_temperature[top.1],
            Default::default(),
        )
        .unwrap();
        println!("max rate {:.3e}/s -> increment {:.3e} per 1.5 day", rate, rate * 1.5 * SECONDS_PER_DAY);
        let umax = snap.u.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        println!("max |u| {umax:.3e} m, energy {:.3e}", snap.strain_energy);
    }
}
