//! Run configuration in TOML.
//!
//! ```toml
//! [mesh]
//! cells = [8, 8, 8]              # hexahedra per direction
//! lengths = [1.0, 1.0, 1.0]      # optional, default unit cube
//! [[mesh.inclusions]]
//! center = [0.5, 0.5, 0.5]
//! radius = 0.2
//!
//! [materials.matrix]             # omitted fields take the matrix defaults
//! [materials.particle]           # required when inclusions exist
//! model = "neo_hookean"
//! young_modulus = 5.6e7
//! poisson_ratio = 0.4
//!
//! [load]                         # optional, defaults to 10 combined steps
//! kind = "combined"              # mechanical | magnetic | combined |
//!                                # stress_relaxed_magnetic | uniaxial_isochoric_plus_magnetic
//! steps = 10
//!
//! [solver]
//! rtol = 1e-8
//! linear_solver = "direct"
//!
//! [output]
//! csv = "results.csv"
//! vtk = false
//! ```

use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constitutive::{MaterialParams, MechanicalModel};
use crate::constraints::{AnchorGaugeOptions, GaugeKind};
use crate::driver::{LoadKind, LoadPath, OuterJacobian};
use crate::error::{Error, Result};
use crate::linear::LinearBackend;
use crate::mesh::{Inclusion, Mesh};
use crate::solver::{Materials, NewtonSettings};

/// Validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cells: [usize; 3],
    pub lengths: [f64; 3],
    pub inclusions: Vec<Inclusion>,
    pub materials: Materials,
    pub path: LoadPath,
    pub newton: NewtonSettings,
    pub gauge: AnchorGaugeOptions,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: PathBuf,
    pub vtk: bool,
    pub vtk_stride: usize,
    pub vtk_dir: PathBuf,
    pub verbose: bool,
    /// Optional text dump of the resolved constraints at F_M = I.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints_dump: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: PathBuf::from("results.csv"),
            vtk: false,
            vtk_stride: 1,
            vtk_dir: PathBuf::from("vtk"),
            verbose: false,
            constraints_dump: None,
        }
    }
}

// Raw, optional-everything mirror of the file layout.

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mesh: RawMesh,
    #[serde(default)]
    materials: RawMaterials,
    #[serde(default)]
    load: RawLoad,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: OutputConfig,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    cells: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengths: Option<[f64; 3]>,
    #[serde(default)]
    inclusions: Vec<Inclusion>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterials {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<RawMaterial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    particle: Option<RawMaterial>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<MechanicalModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bulk_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ms_leg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_leg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_nh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_nh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    young_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poisson_ratio: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    kind: Option<LoadKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_final: Option<[[f64; 3]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b_final: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    isochoric_zz: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relaxed: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stress_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_jacobian: Option<OuterJacobian>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(skip_serializing_if = "Option::is_none")]
    rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line_search: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    backtrack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_cuts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_halvings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    linear_solver: Option<LinearBackend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gauge: Option<GaugeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor_vertex: Option<usize>,
}

// Accepted keys per table, for unknown-key diagnostics.
fn schema(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &["mesh", "materials", "load", "solver", "output"],
        "mesh" => &["cells", "lengths", "inclusions"],
        "mesh.inclusions" => &["center", "radius"],
        "materials" => &["matrix", "particle"],
        "materials.matrix" | "materials.particle" => &[
            "model",
            "bulk_modulus",
            "c1",
            "c2",
            "c3",
            "mu0",
            "ms_leg",
            "alpha_leg",
            "eta",
            "mu_nh",
            "kappa_nh",
            "young_modulus",
            "poisson_ratio",
        ],
        "load" => &[
            "kind",
            "f_final",
            "b_final",
            "steps",
            "isochoric_zz",
            "relaxed",
            "stress_tol",
            "outer_jacobian",
        ],
        "solver" => &[
            "rtol",
            "atol",
            "max_iter",
            "line_search",
            "backtrack",
            "max_cuts",
            "max_halvings",
            "linear_solver",
            "gauge",
            "anchor_vertex",
        ],
        "output" => &["csv", "vtk", "vtk_stride", "vtk_dir", "verbose", "constraints_dump"],
        _ => return None,
    })
}

// Line of `key = ...` inside the table `path`, found by scanning headers.
fn key_line(text: &str, path: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (no, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[') {
            current = h.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            continue;
        }
        let Some((k, _)) = l.split_once('=') else { continue };
        let k = k.trim().trim_matches('"');
        let (prefix, last) = match k.rsplit_once('.') {
            Some((p, last)) => (format!("{current}.{p}").trim_start_matches('.').to_string(), last),
            None => (current.clone(), k),
        };
        if prefix == path && last == key {
            return Some(no + 1);
        }
    }
    None
}

fn check_keys(text: &str, table: &toml::Table, path: &str, errs: &mut Vec<String>) {
    let Some(known) = schema(path) else { return };
    for (key, value) in table {
        if !known.contains(&key.as_str()) {
            let at = key_line(text, path, key).map(|l| format!(" at line {l}")).unwrap_or_default();
            let section = if path.is_empty() { "top level".to_string() } else { format!("[{path}]") };
            let hint = known
                .iter()
                .map(|k| (strsim::jaro_winkler(key, k), *k))
                .filter(|(s, _)| *s > 0.8)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, k)| format!(" (did you mean `{k}`?)"))
                .unwrap_or_default();
            errs.push(format!("unknown key `{key}` in {section}{at}{hint}"));
            continue;
        }
        let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match value {
            toml::Value::Table(t) => check_keys(text, t, &child, errs),
            toml::Value::Array(items) => {
                for item in items {
                    if let toml::Value::Table(t) = item {
                        check_keys(text, t, &child, errs);
                    }
                }
            }
            _ => {}
        }
    }
}

fn component(name: &str) -> Option<(usize, usize)> {
    let axis = |c: char| "xyz".find(c);
    let mut chars = name.chars();
    let (a, b) = (axis(chars.next()?)?, axis(chars.next()?)?);
    chars.next().is_none().then_some((a.min(b), a.max(b)))
}

fn component_name((i, j): (usize, usize)) -> String {
    let c = ['x', 'y', 'z'];
    format!("{}{}", c[i], c[j])
}

fn material(raw: &RawMaterial, preset: MaterialParams, label: &str, errs: &mut Vec<String>) -> MaterialParams {
    let mut p = preset;
    if let Some(m) = raw.model {
        p.model = m;
    }
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut p.k, raw.bulk_modulus);
    set(&mut p.c1, raw.c1);
    set(&mut p.c2, raw.c2);
    set(&mut p.c3, raw.c3);
    set(&mut p.mu0, raw.mu0);
    set(&mut p.ms_leg, raw.ms_leg);
    set(&mut p.alpha_leg, raw.alpha_leg);
    set(&mut p.eta, raw.eta);
    match (raw.young_modulus, raw.poisson_ratio) {
        (Some(e), Some(nu)) => {
            if raw.mu_nh.is_some() || raw.kappa_nh.is_some() {
                errs.push(format!("[materials.{label}] give either young_modulus/poisson_ratio or mu_nh/kappa_nh"));
            }
            if !(nu > -1.0 && nu < 0.5) {
                errs.push(format!("[materials.{label}] poisson_ratio must lie in (-1, 0.5) (got {nu})"));
            }
            p.mu_nh = e / (2.0 * (1.0 + nu));
            p.kappa_nh = e / (3.0 * (1.0 - 2.0 * nu));
        }
        (None, None) => {
            set(&mut p.mu_nh, raw.mu_nh);
            set(&mut p.kappa_nh, raw.kappa_nh);
        }
        _ => errs.push(format!("[materials.{label}] young_modulus and poisson_ratio must be given together")),
    }
    if let Err(e) = p.validate() {
        errs.extend(e.into_iter().map(|m| format!("[materials.{label}] {m}")));
    }
    p
}

fn default_path(kind: LoadKind, steps: usize) -> LoadPath {
    match kind {
        LoadKind::Mechanical => LoadPath::mechanical(steps),
        LoadKind::Magnetic => LoadPath::magnetic(steps),
        LoadKind::Combined => LoadPath::combined(steps),
        LoadKind::StressRelaxedMagnetic => LoadPath::stress_relaxed_magnetic(Vector3::new(0.0, 0.0, 0.045), steps),
        LoadKind::UniaxialIsochoricPlusMagnetic => {
            LoadPath::uniaxial_isochoric_plus_magnetic(1.15, crate::driver::axial_induction(), steps)
        }
    }
}

/// Parses and validates a configuration. Syntax errors carry the line;
/// unknown keys and semantic errors are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut errs = Vec::new();
    check_keys(text, &table, "", &mut errs);
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("\n")));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let m = &raw.mesh;
    let lengths = m.lengths.unwrap_or([1.0; 3]);
    if m.cells.iter().any(|&n| n < 2) {
        errs.push(format!("[mesh] cells must be at least 2 per direction (got {:?})", m.cells));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) {
        errs.push(format!("[mesh] lengths must be positive (got {lengths:?})"));
    }
    for (i, inc) in m.inclusions.iter().enumerate() {
        if !(inc.radius > 0.0) {
            errs.push(format!("[[mesh.inclusions]] #{}: radius must be positive (got {})", i + 1, inc.radius));
        }
    }

    let matrix = match &raw.materials.matrix {
        Some(r) => material(r, MaterialParams::matrix(), "matrix", &mut errs),
        None => {
            errs.push("missing [materials.matrix] block".into());
            MaterialParams::matrix()
        }
    };
    let particle = match &raw.materials.particle {
        Some(r) => material(r, MaterialParams::particle(), "particle", &mut errs),
        None => {
            if !m.inclusions.is_empty() {
                errs.push("inclusions are present but [materials.particle] is missing".into());
            }
            MaterialParams::particle()
        }
    };

    let l = &raw.load;
    let kind = l.kind.unwrap_or(LoadKind::Combined);
    let mut path = default_path(kind, l.steps.unwrap_or(10));
    if let Some(f) = l.f_final {
        path.f_final = Matrix3::from_fn(|i, j| f[i][j]);
    }
    if let Some(b) = l.b_final {
        path.b_final = Vector3::from(b);
    }
    if let Some(v) = l.isochoric_zz {
        path.isochoric_zz = v;
    }
    if let Some(v) = l.stress_tol {
        path.stress_tol = v;
    }
    if let Some(v) = l.outer_jacobian {
        path.outer_jacobian = v;
    }
    if let Some(names) = &l.relaxed {
        path.relaxed.clear();
        for n in names {
            match component(n) {
                Some(c) => path.relaxed.push(c),
                None => errs.push(format!("[load] relaxed: unknown stress component `{n}` (use xx, yy, zz, yz, xz, xy)")),
            }
        }
    }
    if let Err(e) = path.validate() {
        errs.extend(e.into_iter().map(|m| format!("[load] {m}")));
    }

    let s = &raw.solver;
    let d = NewtonSettings::default();
    let newton = NewtonSettings {
        rtol: s.rtol.unwrap_or(d.rtol),
        atol: s.atol.unwrap_or(d.atol),
        max_iter: s.max_iter.unwrap_or(d.max_iter),
        line_search: s.line_search.unwrap_or(d.line_search),
        backtrack: s.backtrack.unwrap_or(d.backtrack),
        max_cuts: s.max_cuts.unwrap_or(d.max_cuts),
        max_halvings: s.max_halvings.unwrap_or(d.max_halvings),
        linear_solver: s.linear_solver.unwrap_or(d.linear_solver),
        verbose: raw.output.verbose,
    };
    if let Err(e) = newton.validate() {
        errs.extend(e.into_iter().map(|m| format!("[solver] {m}")));
    }
    if raw.output.vtk_stride == 0 {
        errs.push("[output] vtk_stride must be at least 1".into());
    }

    // Geometric checks need a valid grid.
    if errs.is_empty() {
        if let Err(e) = Mesh::build(m.cells, lengths, m.inclusions.clone()) {
            errs.push(format!("[mesh] {e}"));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs.join("\n")));
    }
    Ok(RunConfig {
        cells: m.cells,
        lengths,
        inclusions: m.inclusions.clone(),
        materials: Materials { matrix, particle },
        path,
        newton,
        gauge: AnchorGaugeOptions {
            anchor_vertex: s.anchor_vertex,
            gauge: s.gauge.unwrap_or_default(),
        },
        output: raw.output,
    })
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn raw_material(p: &MaterialParams) -> RawMaterial {
    let nh = p.model == MechanicalModel::NeoHookean;
    RawMaterial {
        model: Some(p.model),
        bulk_modulus: Some(p.k),
        c1: Some(p.c1),
        c2: Some(p.c2),
        c3: Some(p.c3),
        mu0: Some(p.mu0),
        ms_leg: Some(p.ms_leg),
        alpha_leg: Some(p.alpha_leg),
        eta: Some(p.eta),
        mu_nh: nh.then_some(p.mu_nh),
        kappa_nh: nh.then_some(p.kappa_nh),
        young_modulus: None,
        poisson_ratio: None,
    }
}

impl RunConfig {
    /// Fully explicit TOML that parses back to an equal configuration.
    pub fn to_toml(&self) -> String {
        let p = &self.path;
        let raw = RawConfig {
            mesh: RawMesh {
                cells: self.cells,
                lengths: Some(self.lengths),
                inclusions: self.inclusions.clone(),
            },
            materials: RawMaterials {
                matrix: Some(raw_material(&self.materials.matrix)),
                particle: Some(raw_material(&self.materials.particle)),
            },
            load: RawLoad {
                kind: Some(p.kind),
                f_final: Some(std::array::from_fn(|i| std::array::from_fn(|j| p.f_final[(i, j)]))),
                b_final: Some([p.b_final[0], p.b_final[1], p.b_final[2]]),
                steps: Some(p.steps),
                isochoric_zz: Some(p.isochoric_zz),
                relaxed: Some(p.relaxed.iter().map(|&c| component_name(c)).collect()),
                stress_tol: Some(p.stress_tol),
                outer_jacobian: Some(p.outer_jacobian),
            },
            solver: RawSolver {
                rtol: Some(self.newton.rtol),
                atol: Some(self.newton.atol),
                max_iter: Some(self.newton.max_iter),
                line_search: Some(self.newton.line_search),
                backtrack: Some(self.newton.backtrack),
                max_cuts: Some(self.newton.max_cuts),
                max_halvings: Some(self.newton.max_halvings),
                linear_solver: Some(self.newton.linear_solver),
                gauge: Some(self.gauge.gauge),
                anchor_vertex: self.gauge.anchor_vertex,
            },
            output: self.output.clone(),
        };
        toml::to_string_pretty(&raw).expect("configuration serializes")
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::build(self.cells, self.lengths, self.inclusions.clone())
    }

    /// Stress components relaxed, by name.
    pub fn relaxed_names(&self) -> Vec<String> {
        self.path.relaxed.iter().map(|&c| component_name(c)).collect()
    }
}
