//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cases::{self, TestCase};
use crate::discretization::Discretization;
use crate::error::{Result, SolverError};
use crate::mesh::Mesh;
use crate::pde::Pde;
use crate::predictor::DEFAULT_TOLERANCE;
use crate::solver::{RelaxationMode, SchemeOptions};

pub const DEFAULT_NX: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pde: PdeSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub relaxation: RelaxationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    /// One of [`cases::CASE_NAMES`].
    pub case: String,
    /// Defaults to the case's final time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Defaults to `nx` scaled by the domain aspect ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    /// Mesh file in the text format of [`Mesh::from_text`]; excludes `nx`/`ny`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub degree: usize,
    pub cfl: f64,
    pub correction: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_max_iter: Option<usize>,
    pub picard_tol: f64,
    pub max_retries: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let o = SchemeOptions::default();
        Self {
            degree: 2,
            cfl: o.cfl,
            correction: o.correction,
            picard_max_iter: None,
            picard_tol: DEFAULT_TOLERANCE,
            max_retries: o.max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationSection {
    /// Defaults to the case's mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<RelaxationMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    pub newton_max_iter: usize,
}

impl Default for RelaxationSection {
    fn default() -> Self {
        Self {
            mode: None,
            newton_tol: None,
            newton_max_iter: SchemeOptions::default().newton_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// VTK snapshot every this many steps; 0 disables periodic snapshots.
    pub vtk_every: usize,
    /// Write the final state as VTK.
    pub vtk_final: bool,
    /// Sub-triangles per cell edge in VTK output; defaults to the degree.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vtk_subdivisions: Option<usize>,
    /// Single worker thread.
    pub reproducible: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("output"),
            vtk_every: 0,
            vtk_final: true,
            vtk_subdivisions: None,
            reproducible: false,
        }
    }
}

impl RunConfig {
    pub fn for_case(case: &str) -> Self {
        Self {
            pde: PdeSection {
                case: case.to_string(),
                final_time: None,
            },
            mesh: MeshSection::default(),
            scheme: SchemeSection::default(),
            relaxation: RelaxationSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SolverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SolverError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SolverError::Config(msg) => SolverError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SolverError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SolverError::Config(msg));
        if !cases::CASE_NAMES.contains(&self.pde.case.as_str()) {
            return bad(format!(
                "pde.case: unknown case '{}', expected one of {}",
                self.pde.case,
                cases::CASE_NAMES.join(", ")
            ));
        }
        if let Some(tf) = self.pde.final_time {
            if !(tf > 0.0 && tf.is_finite()) {
                return bad(format!("pde.final_time: must be positive, got {tf}"));
            }
        }
        if self.mesh.file.is_some() && (self.mesh.nx.is_some() || self.mesh.ny.is_some()) {
            return bad("mesh: 'file' excludes 'nx' and 'ny'".into());
        }
        if self.mesh.nx == Some(0) || self.mesh.ny == Some(0) {
            return bad("mesh: nx and ny must be positive".into());
        }
        if !(1..=3).contains(&self.scheme.degree) {
            return bad(format!("scheme.degree: must be 1, 2 or 3, got {}", self.scheme.degree));
        }
        self.scheme_options(RelaxationMode::default())?.validate()
    }

    pub fn case(&self) -> Result<TestCase> {
        // The contact smoothing width depends on the mesh; a unit width is a placeholder.
        cases::by_name(&self.pde.case, 1.0)
    }

    pub fn final_time(&self, case: &TestCase) -> f64 {
        self.pde.final_time.unwrap_or(case.final_time)
    }

    pub fn relaxation_mode(&self, case: &TestCase) -> RelaxationMode {
        self.relaxation.mode.unwrap_or(case.default_relaxation)
    }

    pub fn scheme_options(&self, mode: RelaxationMode) -> Result<SchemeOptions> {
        let o = SchemeOptions {
            cfl: self.scheme.cfl,
            correction: self.scheme.correction,
            relaxation: mode,
            picard_max_iter: self.scheme.picard_max_iter,
            picard_tol: self.scheme.picard_tol,
            newton_tol: self.relaxation.newton_tol,
            newton_max_iter: self.relaxation.newton_max_iter,
            max_retries: self.scheme.max_retries,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn build_mesh(&self, case: &TestCase) -> Result<Mesh> {
        if let Some(path) = &self.mesh.file {
            return Ok(Mesh::read(path)?);
        }
        let nx = self.mesh.nx.unwrap_or(DEFAULT_NX);
        let ny = self.mesh.ny.unwrap_or_else(|| default_ny(case, nx));
        case.structured_mesh(nx, ny)
    }

    /// Case with mesh-dependent parameters resolved, and its discretization.
    pub fn build(&self) -> Result<(TestCase, Discretization<Pde>)> {
        let probe = self.case()?;
        let mesh = self.build_mesh(&probe)?;
        let case = cases::by_name(&self.pde.case, mesh.mean_h)?;
        let disc = case.discretize(mesh, self.scheme.degree)?;
        Ok((case, disc))
    }
}

/// `nx` scaled by the domain's aspect ratio.
pub fn default_ny(case: &TestCase, nx: usize) -> usize {
    ((nx as f64 * case.domain.height() / case.domain.width()).round() as usize).max(1)
}
