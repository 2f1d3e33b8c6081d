//! Scene configuration: TOML schema and on-demand construction of models.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use serde::Deserialize;

use rems_core::beamform::{BeamformProblem, CoPolarization};
use rems_core::network::touchstone;
use rems_core::network::ReconfigurableNetwork;
use rems_core::radiating::{dipole_array, io::parse_bundle, isotropic_radiator, ArrayModel, DipoleElement};
use rems_core::{synth, CMatrix, Direction, DirectionGrid, RadiatingStructure, RemsModel, RfFrontend, TuningNetwork, C64};

use crate::error::{CliError, CliResult};

/// Complex number written as `[re, im]`.
pub type Complex = [f64; 2];

fn c(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

fn default_r0() -> f64 {
    50.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub frequency_hz: f64,
    #[serde(default = "default_r0")]
    pub r0_ohms: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub structures: Vec<StructureSpec>,
    #[serde(default)]
    pub frontends: Vec<FrontendSpec>,
    #[serde(default)]
    pub networks: Vec<NetworkSpec>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StructureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: StructureKind,
    /// Origin of the structure in the scene, metres.
    #[serde(default)]
    pub position_m: [f64; 3],
    /// Roll, pitch and yaw about x, y and z, degrees.
    #[serde(default)]
    pub rotation_deg: [f64; 3],
    #[serde(default = "default_true")]
    pub extrinsic_noise: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureKind {
    Isotropic,
    Dipole {
        orientation: [f64; 3],
    },
    DipoleArray {
        elements: Vec<ElementSpec>,
        #[serde(default)]
        model: ArrayModelSpec,
    },
    /// Feed dipoles in front of a square reflector-dipole array.
    ReflectorArray {
        side: usize,
        n_feeds: usize,
    },
    FromFiles {
        bundle: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub orientation: [f64; 3],
    #[serde(default)]
    pub position_m: [f64; 3],
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayModelSpec {
    #[default]
    Idealized,
    Lossless,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontendSpec {
    pub name: String,
    #[serde(default)]
    pub z_tx: Vec<Complex>,
    #[serde(default)]
    pub z_rx: Vec<Complex>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: NetworkKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkKind {
    Through {
        ports: usize,
    },
    Inline {
        frontend_ports: usize,
        /// Row-major scattering matrix.
        s: Vec<Vec<Complex>>,
    },
    Touchstone {
        file: PathBuf,
        frontend_ports: usize,
    },
    /// Fixed network with tunable loads on its last ports. Without `fixed_s`
    /// or `fixed_touchstone` the wiring is direct.
    Reconfigurable {
        frontend_ports: usize,
        structure_ports: usize,
        z_set: ZSetSpec,
        #[serde(default)]
        fixed_s: Option<Vec<Vec<Complex>>>,
        #[serde(default)]
        fixed_touchstone: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ZSetSpec {
    List(Vec<Complex>),
    /// `count` values `re + jX` with `X` uniform over `[x_min, x_max]`.
    Uniform { re: f64, x_min: f64, x_max: f64, count: usize },
}

impl ZSetSpec {
    pub fn values(&self) -> Vec<C64> {
        match self {
            ZSetSpec::List(v) => v.iter().copied().map(c).collect(),
            ZSetSpec::Uniform { re, x_min, x_max, count } => (0..*count)
                .map(|i| {
                    let steps = count.saturating_sub(1).max(1) as f64;
                    C64::new(*re, x_min + (x_max - x_min) * i as f64 / steps)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub structure: String,
    pub frontend: String,
    pub network: String,
    /// PA source voltages; defaults to 1 V on every PA.
    #[serde(default)]
    pub v_tx: Option<Vec<Complex>>,
    /// Indices into the impedance set of a reconfigurable network; a single
    /// value applies to every load.
    #[serde(default)]
    pub loads: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub model: String,
    /// `[theta, phi]` pairs, degrees.
    pub primary_deg: Vec<[f64; 2]>,
    #[serde(default)]
    pub secondary_deg: Vec<[f64; 2]>,
    pub z_init: usize,
    pub sigma_schedule: SigmaSpec,
    pub q_co: QcoSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    List(Vec<f64>),
    /// `start * ratio^i` for `i = 0..count`.
    Geometric { start: f64, ratio: f64, count: usize },
}

impl SigmaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SigmaSpec::List(v) => v.clone(),
            SigmaSpec::Geometric { start, ratio, count } => {
                (0..*count).map(|i| start * ratio.powi(i as i32)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum QcoSpec {
    /// `"azimuthal"`: `(cos phi, -sin phi)`.
    Named(String),
    Fixed([Complex; 2]),
}

/// A tuning network before the reconfigurable loads are chosen.
#[derive(Debug, Clone)]
pub enum Network {
    Fixed(TuningNetwork),
    Reconfigurable(ReconfigurableNetwork),
}

/// Structure with its scene placement.
#[derive(Debug, Clone)]
pub struct Placed {
    pub structure: Arc<RadiatingStructure>,
    pub position: Vector3<f64>,
}

/// Model ready for evaluation together with its PA drive.
pub struct ResolvedModel {
    pub model: RemsModel,
    pub v_tx: rems_core::CVector,
}

pub struct Scene {
    pub config: SceneConfig,
    base_dir: PathBuf,
    pub grid: Arc<DirectionGrid>,
}

fn user(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn find<'a, T>(items: &'a [T], name: &str, what: &str, key: impl Fn(&T) -> &str) -> CliResult<&'a T> {
    items
        .iter()
        .find(|i| key(i) == name)
        .ok_or_else(|| user(format!("unknown {what} '{name}'")))
}

fn matrix(rows: &[Vec<Complex>], what: &str) -> CliResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(user(format!("{what} must be a square matrix")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j])))
}

impl Scene {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| user(format!("cannot read scene {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir)
    }

    pub fn from_str(text: &str, base_dir: PathBuf) -> CliResult<Self> {
        let config: SceneConfig = toml::from_str(text).map_err(|e| user(format!("scene: {e}")))?;
        if !(config.frequency_hz > 0.0 && config.frequency_hz.is_finite()) {
            return Err(user("frequency_hz must be positive"));
        }
        if !(config.r0_ohms > 0.0) {
            return Err(user("r0_ohms must be positive"));
        }
        let names: [(&str, Vec<&str>); 5] = [
            ("structure", config.structures.iter().map(|s| s.name.as_str()).collect()),
            ("frontend", config.frontends.iter().map(|s| s.name.as_str()).collect()),
            ("network", config.networks.iter().map(|s| s.name.as_str()).collect()),
            ("model", config.models.iter().map(|s| s.name.as_str()).collect()),
            ("problem", config.problems.iter().map(|s| s.name.as_str()).collect()),
        ];
        for (what, list) in names {
            let mut seen = HashSet::new();
            if let Some(dup) = list.into_iter().find(|n| !seen.insert(*n)) {
                return Err(user(format!("duplicate {what} name '{dup}'")));
            }
        }
        let grid = DirectionGrid::latlon(config.grid.n_theta, config.grid.n_phi)?.shared();
        Ok(Scene {
            config,
            base_dir,
            grid,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read(&self, p: &Path) -> CliResult<(PathBuf, String)> {
        let path = self.resolve(p);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| user(format!("cannot read {}: {e}", path.display())))?;
        Ok((path, text))
    }

    fn frequency(&self) -> f64 {
        self.config.frequency_hz
    }

    pub fn structure(&self, name: &str) -> CliResult<Placed> {
        let spec = find(&self.config.structures, name, "structure", |s| &s.name)?;
        let f = self.frequency();
        let g = self.grid.clone();
        let mut s = match &spec.kind {
            StructureKind::Isotropic => isotropic_radiator(g, f)?,
            StructureKind::Dipole { orientation } => dipole_array(
                &[DipoleElement::new(Vector3::from(*orientation), Vector3::zeros())],
                g,
                f,
                ArrayModel::Idealized,
            )?,
            StructureKind::DipoleArray { elements, model } => {
                let els: Vec<_> = elements
                    .iter()
                    .map(|e| DipoleElement::new(Vector3::from(e.orientation), Vector3::from(e.position_m)))
                    .collect();
                let model = match model {
                    ArrayModelSpec::Idealized => ArrayModel::Idealized,
                    ArrayModelSpec::Lossless => ArrayModel::Lossless,
                };
                dipole_array(&els, g, f, model)?
            }
            StructureKind::ReflectorArray { side, n_feeds } => {
                let rra = synth::synthetic_rra(g, f, *side, *n_feeds, self.config.r0_ohms, Vec::new())?;
                Arc::unwrap_or_clone(rra.radiating)
            }
            StructureKind::FromFiles { bundle } => {
                let (path, text) = self.read(bundle)?;
                let s = parse_bundle(&text)?;
                if s.grid().n_theta() != self.grid.n_theta() || s.grid().n_phi() != self.grid.n_phi() {
                    return Err(user(format!(
                        "{}: bundle grid {}x{} differs from the scene grid {}x{}",
                        path.display(),
                        s.grid().n_theta(),
                        s.grid().n_phi(),
                        self.grid.n_theta(),
                        self.grid.n_phi()
                    )));
                }
                if ((s.frequency() - f) / f).abs() > 1e-9 {
                    return Err(user(format!(
                        "{}: bundle frequency {} Hz differs from the scene frequency {f} Hz",
                        path.display(),
                        s.frequency()
                    )));
                }
                // Rebuild on the scene's grid instance so patterns compare.
                RadiatingStructure::new(
                    self.grid.clone(),
                    f,
                    s.coupling().clone(),
                    s.tx_kernel().clone(),
                    s.rx_kernel().clone(),
                    s.scatter_kernel().clone(),
                )?
            }
        };
        let [roll, pitch, yaw] = spec.rotation_deg.map(f64::to_radians);
        if roll != 0.0 || pitch != 0.0 || yaw != 0.0 {
            s = s.rotated(&Rotation3::from_euler_angles(roll, pitch, yaw));
        }
        Ok(Placed {
            structure: Arc::new(s.with_extrinsic_noise(spec.extrinsic_noise)),
            position: Vector3::from(spec.position_m),
        })
    }

    pub fn frontend(&self, name: &str) -> CliResult<RfFrontend> {
        let spec = find(&self.config.frontends, name, "frontend", |s| &s.name)?;
        Ok(RfFrontend::new(
            spec.z_tx.iter().copied().map(c).collect(),
            spec.z_rx.iter().copied().map(c).collect(),
            self.config.r0_ohms,
        )?)
    }

    fn touchstone_matrix(&self, file: &Path) -> CliResult<CMatrix> {
        let (path, text) = self.read(file)?;
        let shown = path.display().to_string();
        let ports = touchstone::ports_from_extension(&shown)
            .ok_or_else(|| user(format!("{shown}: cannot infer the port count from the extension")))?;
        let ts = touchstone::parse(&text, ports).map_err(|e| user(format!("{shown}: {e}")))?;
        if (ts.r0 - self.config.r0_ohms).abs() > 1e-12 * self.config.r0_ohms {
            return Err(user(format!(
                "{shown}: reference impedance {} differs from r0_ohms {}",
                ts.r0, self.config.r0_ohms
            )));
        }
        ts.matrix_at(self.frequency(), 1e-9).map_err(|e| user(format!("{shown}: {e}")))
    }

    pub fn network(&self, name: &str) -> CliResult<Network> {
        let spec = find(&self.config.networks, name, "network", |s| &s.name)?;
        Ok(match &spec.kind {
            NetworkKind::Through { ports } => Network::Fixed(TuningNetwork::through(*ports)),
            NetworkKind::Inline { frontend_ports, s } => {
                Network::Fixed(TuningNetwork::new(matrix(s, "inline network")?, *frontend_ports)?)
            }
            NetworkKind::Touchstone { file, frontend_ports } => {
                Network::Fixed(TuningNetwork::new(self.touchstone_matrix(file)?, *frontend_ports)?)
            }
            NetworkKind::Reconfigurable {
                frontend_ports,
                structure_ports,
                z_set,
                fixed_s,
                fixed_touchstone,
            } => {
                let r0 = self.config.r0_ohms;
                let z = z_set.values();
                let net = match (fixed_s, fixed_touchstone) {
                    (None, None) => ReconfigurableNetwork::direct(*frontend_ports, *structure_ports, r0, z)?,
                    (Some(s), None) => ReconfigurableNetwork::new(
                        matrix(s, "fixed network")?,
                        *frontend_ports,
                        *structure_ports,
                        r0,
                        z,
                    )?,
                    (None, Some(file)) => ReconfigurableNetwork::new(
                        self.touchstone_matrix(file)?,
                        *frontend_ports,
                        *structure_ports,
                        r0,
                        z,
                    )?,
                    (Some(_), Some(_)) => {
                        return Err(user(format!(
                            "network '{name}': give either fixed_s or fixed_touchstone, not both"
                        )))
                    }
                };
                Network::Reconfigurable(net)
            }
        })
    }

    fn model_spec(&self, name: &str) -> CliResult<&ModelSpec> {
        find(&self.config.models, name, "model", |s| &s.name)
    }

    /// Model with loads taken from `loads_override` or the model block.
    pub fn model(&self, name: &str, loads_override: Option<&[usize]>) -> CliResult<ResolvedModel> {
        let spec = self.model_spec(name)?;
        let placed = self.structure(&spec.structure)?;
        let frontend = self.frontend(&spec.frontend)?;
        let tuning = match self.network(&spec.network)? {
            Network::Fixed(t) => t,
            Network::Reconfigurable(net) => {
                let loads = loads_override.unwrap_or(&spec.loads);
                let loads = match loads.len() {
                    0 => {
                        return Err(user(format!(
                            "model '{name}' uses a reconfigurable network and needs `loads`"
                        )))
                    }
                    1 => vec![loads[0]; net.r()],
                    _ => loads.to_vec(),
                };
                if loads.len() != net.r() {
                    return Err(user(format!(
                        "model '{name}': {} loads given for {} reconfigurable ports",
                        loads.len(),
                        net.r()
                    )));
                }
                net.reduce_indices(&loads)?
            }
        };
        let n_tx = frontend.n_tx();
        let v_tx = match &spec.v_tx {
            Some(v) if v.len() != n_tx => {
                return Err(user(format!("model '{name}': {} voltages for {n_tx} PAs", v.len())))
            }
            Some(v) => v.iter().copied().map(c).collect::<Vec<_>>(),
            None => vec![C64::new(1.0, 0.0); n_tx],
        };
        Ok(ResolvedModel {
            model: RemsModel::new(frontend, tuning, placed.structure)?,
            v_tx: rems_core::CVector::from_vec(v_tx),
        })
    }

    /// Problem together with the pieces needed to rebuild its model for any
    /// load tuple.
    pub fn problem(&self, name: &str) -> CliResult<ProblemSetup> {
        let spec = find(&self.config.problems, name, "problem", |s| &s.name)?;
        let mspec = self.model_spec(&spec.model)?;
        let Network::Reconfigurable(network) = self.network(&mspec.network)? else {
            return Err(user(format!(
                "problem '{name}': model '{}' has no reconfigurable network",
                spec.model
            )));
        };
        let q_co = match &spec.q_co {
            QcoSpec::Named(s) if s == "azimuthal" => CoPolarization::Azimuthal,
            QcoSpec::Named(s) => return Err(user(format!("unknown co-polarization '{s}'"))),
            QcoSpec::Fixed([a, b]) => CoPolarization::Fixed([c(*a), c(*b)]),
        };
        let dirs = |v: &[[f64; 2]]| v.iter().map(|d| Direction::from_degrees(d[0], d[1])).collect();
        let problem = BeamformProblem {
            primary: dirs(&spec.primary_deg),
            secondary: dirs(&spec.secondary_deg),
            z_set: network.z_set().to_vec(),
            z_init: spec.z_init,
            sigma_schedule: spec.sigma_schedule.values(),
            q_co,
            seed: spec.seed,
        };
        Ok(ProblemSetup {
            problem,
            frontend: self.frontend(&mspec.frontend)?,
            structure: self.structure(&mspec.structure)?.structure,
            network,
        })
    }
}

pub struct ProblemSetup {
    pub problem: BeamformProblem,
    pub frontend: RfFrontend,
    pub structure: Arc<RadiatingStructure>,
    pub network: ReconfigurableNetwork,
}

impl ProblemSetup {
    pub fn build(&self, z: &[usize]) -> rems_core::Result<RemsModel> {
        RemsModel::new(self.frontend.clone(), self.network.reduce_indices(z)?, self.structure.clone())
    }
}
