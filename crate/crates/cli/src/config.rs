//! Run configuration: one TOML document with a schema version and one
//! optional section per command. Unknown keys are rejected everywhere.

use fbp_core::geometry::ChartKind;
use fbp_core::gluing::GluingConfig;
use fbp_core::kernels::DEFAULT_ZERO_MARGIN;
use fbp_core::minimizer::{MinimizeConfig, DEFAULT_SCHEDULE};
use fbp_core::norms::DEFAULT_ALPHA;
use fbp_core::reduced_solver::{PolePolicy, ReducedForm};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Subdirectory of the output root; defaults to the command name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub catenoid_profile: CatenoidProfileConfig,
    #[serde(default)]
    pub simons_leaf: SimonsLeafConfig,
    #[serde(default)]
    pub kernels_table: KernelsTableConfig,
    #[serde(default)]
    pub reduce_solve: ReduceSolveConfig,
    #[serde(default)]
    pub glue: GlueConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub minimize: MinimizeSection,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output_dir: None,
            catenoid_profile: Default::default(),
            simons_leaf: Default::default(),
            kernels_table: Default::default(),
            reduce_solve: Default::default(),
            glue: Default::default(),
            verify: Default::default(),
            minimize: Default::default(),
            sweep: Default::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Catenoid,
    SimonsLeaf,
}

impl SurfaceKind {
    pub fn chart_kind(self) -> ChartKind {
        match self {
            SurfaceKind::Catenoid => ChartKind::Catenoid,
            SurfaceKind::SimonsLeaf => ChartKind::SimonsLeaf,
        }
    }
}

/// `n ∈ [3, 8]`, `eps ∈ (0, 1]`, `0 < step < r_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatenoidProfileConfig {
    pub n: usize,
    pub eps: f64,
    pub r_max: f64,
    pub step: f64,
}

impl Default for CatenoidProfileConfig {
    fn default() -> Self {
        Self { n: 3, eps: 1.0, r_max: 12.0, step: 0.01 }
    }
}

/// `x0 > 0`, `0 < step ≤ 0.005` (relative to `x0`), `r_max > x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimonsLeafConfig {
    pub x0: f64,
    pub step: f64,
    pub r_max: f64,
}

impl Default for SimonsLeafConfig {
    fn default() -> Self {
        Self { x0: 1.0, step: 1e-3, r_max: 120.0 }
    }
}

/// `k_max > 0`, `points ≥ 2`, `margin ∈ [0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsTableConfig {
    pub k_max: f64,
    pub points: usize,
    pub margin: f64,
}

impl Default for KernelsTableConfig {
    fn default() -> Self {
        Self { k_max: 40.0, points: 4001, margin: DEFAULT_ZERO_MARGIN }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceSolveConfig {
    pub kind: SurfaceKind,
    pub n: usize,
    pub eps: f64,
    /// Defaults to the standard choice for the surface.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    pub l_step: f64,
    pub l_extent: f64,
    pub form: ReducedForm,
    pub policy: PolePolicy,
}

impl Default for ReduceSolveConfig {
    fn default() -> Self {
        Self {
            kind: SurfaceKind::Catenoid,
            n: 3,
            eps: 0.2,
            beta0: None,
            l_step: 0.05,
            l_extent: 40.0,
            form: ReducedForm::default(),
            policy: PolePolicy::default(),
        }
    }
}

/// Ranges: `n ∈ [3, 8]`, `eps ∈ (0, 1]`, `alpha ∈ (0, 1)`, `nt` odd and
/// `≥ 7`, positive tolerances and grid steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlueConfig {
    pub kind: SurfaceKind,
    pub n: usize,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    pub alpha: f64,
    pub nt: usize,
    pub l_step: f64,
    pub l_extent: f64,
    /// Defaults to `eps⁴`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub ball_c0: f64,
    pub project: bool,
    pub form: ReducedForm,
    pub policy: PolePolicy,
}

impl Default for GlueConfig {
    fn default() -> Self {
        Self {
            kind: SurfaceKind::Catenoid,
            n: 3,
            eps: 0.2,
            beta0: None,
            alpha: DEFAULT_ALPHA,
            nt: 81,
            l_step: 0.05,
            l_extent: 40.0,
            tol: None,
            max_iter: 25,
            inner_tol: 1e-10,
            inner_max_iter: 40,
            ball_c0: 10.0,
            project: true,
            form: ReducedForm::default(),
            policy: PolePolicy::default(),
        }
    }
}

impl GlueConfig {
    pub fn to_core(&self) -> GluingConfig {
        let mut cfg = GluingConfig::standard(self.kind.chart_kind(), self.n, self.eps);
        if let Some(b) = self.beta0 {
            cfg.beta0 = b;
        }
        cfg.alpha = self.alpha;
        cfg.nt = self.nt;
        cfg.l_step = self.l_step;
        cfg.l_extent = self.l_extent;
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        cfg.max_iter = self.max_iter;
        cfg.inner_tol = self.inner_tol;
        cfg.inner_max_iter = self.inner_max_iter;
        cfg.ball_c0 = self.ball_c0;
        cfg.project = self.project;
        cfg.spectral.form = self.form;
        cfg.spectral.policy = self.policy;
        cfg
    }
}

/// Re-verifies the fields written by a `glue` run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

/// `a > 0`, `h > 0` with at least four cells across, `eps0 > 0`,
/// decreasing positive schedule, `omega ∈ (0, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeSection {
    pub a: f64,
    pub h: f64,
    /// Barrier parameter fixing the default boundary data.
    pub eps0: f64,
    pub schedule: Vec<f64>,
    pub omega: f64,
    pub level_tol: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    /// CSV with columns `x,y,b` for the boundary nodes; default is the
    /// mean of the two barriers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
}

impl Default for MinimizeSection {
    fn default() -> Self {
        let core = MinimizeConfig::default();
        Self {
            a: 6.0,
            h: 0.05,
            eps0: 0.4,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            omega: core.omega,
            level_tol: core.level_tol,
            tol: core.tol,
            max_sweeps: core.max_sweeps,
            boundary: None,
        }
    }
}

impl MinimizeSection {
    pub fn to_core(&self) -> MinimizeConfig {
        MinimizeConfig {
            schedule: self.schedule.clone(),
            omega: self.omega,
            level_tol: self.level_tol,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

/// Barrier parameters `linspace(eps_start, eps_stop, eps_count)`, walked in
/// that order; the minimizer comes from the `minimize` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_start: f64,
    pub eps_stop: f64,
    pub eps_count: usize,
    pub tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps_start: 0.2, eps_stop: 1.0, eps_count: 41, tol: 1e-9 }
    }
}

impl SweepConfig {
    pub fn eps_list(&self) -> Vec<f64> {
        fbp_core::numerics::linspace(self.eps_start, self.eps_stop, self.eps_count)
    }
}

fn check(ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("out of range: {what}")))
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks for the section used by `command`.
    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        if let Some(dir) = &self.output_dir {
            check(!dir.is_empty() && !dir.contains(".."), "output_dir must be a plain relative name")?;
        }
        match command {
            "catenoid-profile" => {
                let c = &self.catenoid_profile;
                check((3..=8).contains(&c.n), "catenoid_profile.n in [3, 8]")?;
                check(positive(c.eps) && c.eps <= 1.0, "catenoid_profile.eps in (0, 1]")?;
                check(positive(c.step) && c.r_max > c.step, "catenoid_profile: 0 < step < r_max")?;
            }
            "simons-leaf" => {
                let c = &self.simons_leaf;
                check(positive(c.x0), "simons_leaf.x0 > 0")?;
                check(positive(c.step) && c.step <= 0.005, "simons_leaf.step in (0, 0.005]")?;
                check(c.r_max > c.x0, "simons_leaf.r_max > x0")?;
            }
            "kernels-table" => {
                let c = &self.kernels_table;
                check(positive(c.k_max), "kernels_table.k_max > 0")?;
                check(c.points >= 2, "kernels_table.points >= 2")?;
                check((0.0..1.0).contains(&c.margin), "kernels_table.margin in [0, 1)")?;
            }
            "reduce-solve" => {
                let c = &self.reduce_solve;
                check((3..=8).contains(&c.n), "reduce_solve.n in [3, 8]")?;
                check(positive(c.eps) && c.eps <= 1.0, "reduce_solve.eps in (0, 1]")?;
                check(positive(c.l_step) && c.l_extent > 4.0 * c.l_step, "reduce_solve: 0 < 4 l_step < l_extent")?;
                if let Some(b) = c.beta0 {
                    check(b.is_finite() && b >= 0.0, "reduce_solve.beta0 >= 0")?;
                }
            }
            "glue" => self.validate_glue()?,
            "verify" => check(self.verify.manifest.is_some(), "verify.manifest is required")?,
            "minimize" => self.validate_minimize()?,
            "sweep" => {
                self.validate_minimize()?;
                let c = &self.sweep;
                check(positive(c.eps_start) && positive(c.eps_stop), "sweep eps range positive")?;
                check(c.eps_count >= 2, "sweep.eps_count >= 2")?;
                check(c.tol.is_finite() && c.tol >= 0.0, "sweep.tol >= 0")?;
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_glue(&self) -> Result<(), CliError> {
        let c = &self.glue;
        check((3..=8).contains(&c.n), "glue.n in [3, 8]")?;
        check(positive(c.eps) && c.eps <= 1.0, "glue.eps in (0, 1]")?;
        check(c.alpha > 0.0 && c.alpha < 1.0, "glue.alpha in (0, 1)")?;
        check(c.nt >= 7 && c.nt % 2 == 1, "glue.nt odd and >= 7")?;
        check(positive(c.l_step) && c.l_extent > 4.0 * c.l_step, "glue: 0 < 4 l_step < l_extent")?;
        check(c.tol.map_or(true, positive), "glue.tol > 0")?;
        check(positive(c.inner_tol), "glue.inner_tol > 0")?;
        check(c.max_iter >= 1 && c.inner_max_iter >= 1, "glue iteration caps >= 1")?;
        check(positive(c.ball_c0), "glue.ball_c0 > 0")?;
        if let Some(b) = c.beta0 {
            check(b.is_finite() && b >= 0.0, "glue.beta0 >= 0")?;
        }
        Ok(())
    }

    fn validate_minimize(&self) -> Result<(), CliError> {
        let c = &self.minimize;
        check(positive(c.a) && positive(c.h) && c.a / c.h >= 4.0, "minimize: a, h > 0 with a/h >= 4")?;
        check(positive(c.eps0), "minimize.eps0 > 0")?;
        check(
            !c.schedule.is_empty() && c.schedule.iter().all(|k| positive(*k)) && c.schedule.windows(2).all(|w| w[1] < w[0]),
            "minimize.schedule positive and decreasing",
        )?;
        check(c.omega > 0.0 && c.omega < 2.0, "minimize.omega in (0, 2)")?;
        check(positive(c.tol) && positive(c.level_tol), "minimize tolerances > 0")?;
        check(c.max_sweeps >= 1, "minimize.max_sweeps >= 1")?;
        Ok(())
    }
}
