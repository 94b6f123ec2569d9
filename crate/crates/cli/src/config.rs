//! Experiment configuration: TOML sections with `section.key=value`
//! overrides from the command line.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ucp_core::{MaterialModel, MaterialVariant, Rect, RhoSign, StabilizationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sweep,
    Convergence,
    Pollution,
    Split,
    Jump,
    Inclusion,
    Condition,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::Convergence => "convergence",
            Experiment::Pollution => "pollution",
            Experiment::Split => "split",
            Experiment::Jump => "jump",
            Experiment::Inclusion => "inclusion",
            Experiment::Condition => "condition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Convex,
    Split,
    Inclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Height of the split between ω and B for the split geometry.
    pub xi: f64,
    /// Inclusion rectangle `[x0, x1, y0, y1]`.
    pub target: [f64; 4],
    /// Line dividing the inclusion target into B₋ and B₊.
    pub y_split: f64,
    /// Target spacing of the coarse mesh.
    pub spacing: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            kind: GeometryKind::Convex,
            xi: 0.6,
            target: [0.25, 0.75, 0.25, 0.9],
            y_split: 0.6,
            spacing: 0.25,
        }
    }
}

impl GeometryConfig {
    pub fn target_rect(&self) -> Rect {
        let [x0, x1, y0, y1] = self.target;
        Rect::new(x0, x1, y0, y1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Constant,
    Smooth,
    PlaneJump,
    Inclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub variant: MaterialKind,
    pub mu: f64,
    pub lambda: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub eta: f64,
    pub mu_inside: f64,
    pub mu_outside: f64,
    pub rho_sign: RhoSignConfig,
    /// Coefficient pairs `(μ₊, μ₋)` or `(μ_i, μ_e)` run in turn by the
    /// jump and inclusion experiments. Empty means the single pair above.
    pub pairs: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RhoSignConfig {
    #[default]
    Negative,
    Positive,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            variant: MaterialKind::Smooth,
            mu: 1.0,
            lambda: 1.25,
            mu_plus: 2.0,
            mu_minus: 1.0,
            eta: 0.6,
            mu_inside: 2.0,
            mu_outside: 1.0,
            rho_sign: RhoSignConfig::Negative,
            pairs: Vec::new(),
        }
    }
}

impl MaterialConfig {
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        if !self.pairs.is_empty() {
            return self.pairs.clone();
        }
        match self.variant {
            MaterialKind::Inclusion => vec![[self.mu_inside, self.mu_outside]],
            _ => vec![[self.mu_plus, self.mu_minus]],
        }
    }

    /// Material for wavenumber `k` with the given coefficient pair.
    pub fn model(&self, k: f64, pair: [f64; 2], rect: Rect) -> Result<MaterialModel> {
        let variant = match self.variant {
            MaterialKind::Constant => MaterialVariant::Constant { mu: self.mu, lambda: self.lambda },
            MaterialKind::Smooth => MaterialVariant::SmoothTrig,
            MaterialKind::PlaneJump => {
                MaterialVariant::PlaneJump { mu_plus: pair[0], mu_minus: pair[1], eta: self.eta, lambda: self.lambda }
            }
            MaterialKind::Inclusion => {
                MaterialVariant::Inclusion { mu_inside: pair[0], mu_outside: pair[1], rect, lambda: self.lambda }
            }
        };
        let sign = match self.rho_sign {
            RhoSignConfig::Negative => RhoSign::Negative,
            RhoSignConfig::Positive => RhoSign::Positive,
        };
        Ok(MaterialModel::new(variant, k, sign)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: f64,
    pub degrees: Vec<usize>,
    pub min_level: usize,
    pub max_level: usize,
    pub well_posed: bool,
    pub divergence: bool,
    /// Estimate κ on every level.
    pub condition: bool,
    pub seed: u64,
    /// Stop refining a series once the saddle system exceeds this size.
    pub max_unknowns: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 1.0,
            degrees: vec![1, 2, 3],
            min_level: 0,
            max_level: 3,
            well_posed: false,
            divergence: false,
            condition: false,
            seed: 0,
            max_unknowns: 500_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizationConfig {
    /// `None` selects 10⁻⁵/p^3.5.
    pub gamma1: Option<f64>,
    pub gamma_gls: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma2: f64,
    pub beta2: f64,
    pub gamma3: f64,
    pub beta3: f64,
}

impl StabilizationConfig {
    pub fn params(&self, p: usize) -> StabilizationParams {
        let mut s = StabilizationParams::defaults(p);
        if let Some(g) = self.gamma1 {
            s.gamma[0] = g;
        }
        if let Some(g) = self.gamma_gls {
            s.gamma_gls = g;
        }
        if let Some(a) = self.alpha {
            s.alpha = a;
        }
        if p >= 2 {
            s.gamma[1] = self.gamma2;
            s.beta[1] = self.beta2;
        }
        if p >= 3 {
            s.gamma[2] = self.gamma3;
            s.beta[2] = self.beta3;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Perturbation strengths θ; empty runs with exact data only.
    pub thetas: Vec<u32>,
    pub c0: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { thetas: Vec::new(), c0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Gamma1,
    GammaGls,
    Alpha,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Gamma1 => "gamma1",
            SweepParameter::GammaGls => "gamma_gls",
            SweepParameter::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            parameter: SweepParameter::Gamma1,
            values: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PollutionConfig {
    /// Wavenumber on `run.min_level`; doubled with every refinement.
    pub k0: f64,
    /// β₂ values tried in turn; γ₂ is raised to |β₂| when smaller.
    pub beta2: Vec<f64>,
    pub kinds: Vec<KindConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindConfig {
    IllPosed,
    WellPosed,
}

impl Default for PollutionConfig {
    fn default() -> Self {
        PollutionConfig { k0: 1.0, beta2: vec![0.0], kinds: vec![KindConfig::IllPosed, KindConfig::WellPosed] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub run: RunConfig,
    pub stabilization: StabilizationConfig,
    pub noise: NoiseConfig,
    pub sweep: SweepConfig,
    pub pollution: PollutionConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The preset of `experiment` with the sections of `text` laid on top.
    pub fn layered(experiment: Experiment, text: &str) -> Result<Self> {
        let mut base = toml::Table::try_from(Self::preset(experiment)).context("serializing preset")?;
        let file: toml::Table = text.parse().context("invalid config")?;
        merge(&mut base, file);
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into().context("invalid config")?;
        Ok(cfg)
    }

    /// Applies `section.key=value` overrides, values in TOML syntax.
    /// Bare words are taken as strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = toml::Table::try_from(self).context("serializing config")?;
        for o in overrides {
            let Some((path, raw)) = o.split_once('=') else {
                bail!("override `{o}` is not of the form section.key=value");
            };
            let value = parse_value(raw.trim());
            let keys: Vec<&str> = path.trim().split('.').collect();
            let (last, parents) = keys.split_last().expect("split yields one item");
            let mut table = &mut doc;
            for k in parents {
                table = table
                    .entry(k.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .with_context(|| format!("`{k}` in `{path}` is not a section"))?;
            }
            table.insert(last.to_string(), value);
        }
        let cfg: ExperimentConfig =
            toml::Value::Table(doc).try_into().context("override produced an invalid config")?;
        Ok(cfg)
    }

    /// Built-in settings for each study.
    pub fn preset(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig { experiment: Some(experiment), ..Default::default() };
        match experiment {
            Experiment::Sweep => {
                c.run.k = 6.0;
                c.run.min_level = 2;
                c.run.max_level = 2;
                c.run.condition = true;
                c.stabilization.gamma_gls = Some(1e-12);
            }
            Experiment::Convergence => {
                c.noise.thetas = vec![0, 1, 2];
            }
            Experiment::Pollution => {
                c.run.max_level = 3;
                c.pollution.beta2 = vec![0.0, 1e-4];
            }
            Experiment::Split => {
                c.geometry.kind = GeometryKind::Split;
                c.material.variant = MaterialKind::Constant;
            }
            Experiment::Jump => {
                c.geometry.kind = GeometryKind::Split;
                c.run.k = 4.0;
                c.material.variant = MaterialKind::PlaneJump;
                c.material.pairs = vec![[1.0, 2.0], [2.0, 1.0]];
            }
            Experiment::Inclusion => {
                c.geometry.kind = GeometryKind::Inclusion;
                c.material.variant = MaterialKind::Inclusion;
                c.material.pairs = vec![[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [2.0, 2.0]];
            }
            Experiment::Condition => {
                c.run.k = 6.0;
                c.run.degrees = vec![1, 2];
                c.run.condition = true;
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.degrees.is_empty() || r.degrees.iter().any(|&p| !(1..=3).contains(&p)) {
            bail!("run.degrees must be a non-empty subset of 1..=3");
        }
        if r.min_level > r.max_level {
            bail!("run.min_level exceeds run.max_level");
        }
        if !(self.geometry.spacing > 0.0) {
            bail!("geometry.spacing must be positive");
        }
        if !(r.k >= 0.0) || !(self.pollution.k0 >= 0.0) {
            bail!("wavenumbers must be non-negative");
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // parse through a one-line document so arrays and numbers keep their type
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
