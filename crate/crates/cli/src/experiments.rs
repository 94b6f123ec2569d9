//! Drivers for the individual studies. Each returns a [`Report`] that is a
//! pure function of the configuration.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use ucp_core::manufactured::verify_interface_conditions;
use ucp_core::mesh::{build_for_geometry, refine_uniform};
use ucp_core::metrics::{loglog_slope, region_gradient_error, region_l2_error, solution_fields};
use ucp_core::{
    build_system, ConvergenceRow, ConvergenceTable, DataMode, FeSpace, Geometry, MaterialModel, NoiseSpec,
    ProblemKind, ReferenceSolution, Region, StabilizationParams, SystemOptions,
};

use crate::config::{
    Experiment, ExperimentConfig, GeometryKind, KindConfig, MaterialKind, SweepParameter,
};
use crate::report::{Report, Series, Slope, SweepRow, SweepSeries};

/// Largest admissible interface violation of the plane-jump solution.
pub const INTERFACE_GATE: f64 = 1e-8;
/// Largest admissible relative residual of a direct solve.
pub const RESIDUAL_GATE: f64 = 1e-6;

/// An invariant check that failed before or during a run.
#[derive(Debug)]
pub struct GateFailure(pub String);

impl std::fmt::Display for GateFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "gate failed: {}", self.0)
    }
}

impl std::error::Error for GateFailure {}

/// One sequence of refinement levels with fixed degree and data.
#[derive(Clone)]
pub struct SeriesSpec {
    pub name: String,
    pub p: usize,
    pub geometry: Geometry,
    pub spacing: f64,
    pub min_level: usize,
    pub max_level: usize,
    /// Wavenumber `k₀ · growth^(level - min_level)`.
    pub k0: f64,
    pub k_growth: f64,
    pub material: MaterialSpec,
    pub params: StabilizationParams,
    pub kind: ProblemKind,
    pub divergence: bool,
    pub noise: Option<(u32, f64, u64)>,
    pub regions: Vec<Region>,
    pub condition: bool,
    pub max_unknowns: usize,
}

/// Material and matching reference solution, rebuilt for each `k`.
#[derive(Clone)]
pub struct MaterialSpec {
    pub config: crate::config::MaterialConfig,
    pub pair: [f64; 2],
    pub target: ucp_core::Rect,
}

impl MaterialSpec {
    fn build(&self, k: f64) -> Result<(MaterialModel, ReferenceSolution)> {
        let material = self.config.model(k, self.pair, self.target)?;
        let solution = match self.config.variant {
            MaterialKind::Constant | MaterialKind::Smooth => ReferenceSolution::oscillatory(k),
            MaterialKind::PlaneJump => ReferenceSolution::plane_jump(self.pair[0], self.pair[1], self.config.eta, k)?,
            MaterialKind::Inclusion => ReferenceSolution::inclusion(self.target, k),
        };
        Ok((material, solution))
    }
}

/// Per-level noise seed, so that levels draw independent streams.
fn level_seed(seed: u64, p: usize, theta: u32, level: usize) -> u64 {
    seed ^ ((p as u64) << 40) ^ ((theta as u64) << 32) ^ level as u64
}

pub fn run_series(spec: &SeriesSpec) -> Result<Series> {
    let names: Vec<&str> = spec.regions.iter().map(|r| r.name()).collect();
    let mut table = ConvergenceTable::new(&names);
    let mut mesh = build_for_geometry(&spec.geometry, spec.spacing)?;
    for level in 0..=spec.max_level {
        if level > 0 {
            mesh = refine_uniform(&mesh);
        }
        if level < spec.min_level {
            continue;
        }
        let space = FeSpace::new(mesh.clone(), spec.p)?;
        if 2 * space.num_vector_dofs() > spec.max_unknowns {
            log::warn!("{}: stopping before level {level}, system too large", spec.name);
            break;
        }
        let k = spec.k0 * spec.k_growth.powi((level - spec.min_level) as i32);
        let (material, solution) = spec.material.build(k)?;
        let data = match spec.noise {
            None => DataMode::Unperturbed,
            Some((theta, c0, seed)) => {
                DataMode::Perturbed(Some(NoiseSpec { theta, c0, seed: level_seed(seed, spec.p, theta, level) }))
            }
        };
        let options = SystemOptions { kind: spec.kind, data, divergence: spec.divergence };
        let system = build_system(&space, &material, &spec.params, &solution, &options)
            .with_context(|| format!("{} level {level}", spec.name))?;
        let out = system.solve()?;
        if !(out.residual <= RESIDUAL_GATE) {
            bail!(GateFailure(format!("{} level {level}: residual {:.3e}", spec.name, out.residual)));
        }
        let (value, grad) = solution_fields(&space, &solution);
        let mut errors = Vec::new();
        let mut seminorm = Vec::new();
        for &r in &spec.regions {
            errors.push(region_l2_error(&space, &out.u, &value, r)?);
            seminorm.push(region_gradient_error(&space, &out.u, &grad, r)?);
        }
        let weighted = Some(k * errors[0].absolute + seminorm[0].absolute);
        let condition = if spec.condition { Some(system.condition_estimate()?.kappa) } else { None };
        log::info!("{} level {level}: rel {:.3e}", spec.name, errors[0].relative);
        table.push(ConvergenceRow {
            level,
            h: space.h(),
            dofs: space.num_vector_dofs(),
            k,
            errors,
            seminorm,
            weighted,
            condition,
        });
    }
    Ok(Series { name: spec.name.clone(), p: spec.p, table })
}

fn geometry(cfg: &ExperimentConfig) -> Geometry {
    let g = &cfg.geometry;
    let geo = match g.kind {
        GeometryKind::Convex => Geometry::convex(),
        GeometryKind::Split => Geometry::split(g.xi),
        GeometryKind::Inclusion => Geometry::inclusion(g.target_rect(), g.y_split),
    };
    if cfg.material.variant == MaterialKind::PlaneJump {
        geo.with_interface(cfg.material.eta)
    } else {
        geo
    }
}

fn regions(cfg: &ExperimentConfig) -> Vec<Region> {
    match cfg.geometry.kind {
        GeometryKind::Convex => vec![Region::Target, Region::Domain],
        _ => vec![Region::TargetMinus, Region::TargetPlus, Region::Target],
    }
}

fn kind(well_posed: bool) -> ProblemKind {
    if well_posed {
        ProblemKind::WellPosed
    } else {
        ProblemKind::IllPosed
    }
}

/// Base series for degree `p` with everything taken from `cfg`.
fn base_spec(cfg: &ExperimentConfig, p: usize, name: String) -> SeriesSpec {
    let r = &cfg.run;
    SeriesSpec {
        name,
        p,
        geometry: geometry(cfg),
        spacing: cfg.geometry.spacing,
        min_level: r.min_level,
        max_level: r.max_level,
        k0: r.k,
        k_growth: 1.0,
        material: MaterialSpec {
            config: cfg.material.clone(),
            pair: cfg.material.pairs()[0],
            target: cfg.geometry.target_rect(),
        },
        params: cfg.stabilization.params(p),
        kind: kind(r.well_posed),
        divergence: r.divergence,
        noise: None,
        regions: regions(cfg),
        condition: r.condition,
        max_unknowns: r.max_unknowns,
    }
}

fn run_all(specs: &[SeriesSpec]) -> Result<Vec<Series>> {
    specs.par_iter().map(run_series).collect()
}

fn pair_tag(pair: [f64; 2]) -> String {
    format!("{}_{}", pair[0], pair[1]).replace('.', "p")
}

pub fn run(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Report> {
    cfg.validate()?;
    match experiment {
        Experiment::Sweep => run_sweep(cfg),
        Experiment::Convergence => run_convergence(cfg),
        Experiment::Pollution => run_pollution(cfg),
        Experiment::Split => run_split(cfg),
        Experiment::Jump => run_jump(cfg),
        Experiment::Inclusion => run_inclusion(cfg),
        Experiment::Condition => run_condition(cfg),
    }
}

/// Varies one penalty on the finest configured level and records the
/// relative error in B and κ.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let param = cfg.sweep.parameter;
    let mut jobs = Vec::new();
    for &p in &cfg.run.degrees {
        for &v in &cfg.sweep.values {
            let mut spec = base_spec(cfg, p, format!("sweep_{}_p{p}", param.name()));
            spec.min_level = cfg.run.max_level;
            spec.condition = true;
            match param {
                SweepParameter::Gamma1 => spec.params.gamma[0] = v,
                SweepParameter::GammaGls => spec.params.gamma_gls = v,
                SweepParameter::Alpha => spec.params.alpha = v,
            }
            jobs.push((p, v, spec));
        }
    }
    let rows: Vec<Result<(usize, SweepRow)>> = jobs
        .par_iter()
        .map(|(p, v, spec)| {
            let s = run_series(spec)?;
            let row = s.table.rows.first().context("sweep level exceeds the size cap")?;
            Ok((*p, SweepRow { value: *v, relative: row.errors[0].relative, kappa: row.condition }))
        })
        .collect();
    let mut sweeps: Vec<SweepSeries> = Vec::new();
    for r in rows {
        let (p, row) = r?;
        match sweeps.iter_mut().find(|s| s.p == p) {
            Some(s) => s.rows.push(row),
            None => sweeps.push(SweepSeries {
                name: format!("sweep_{}_p{p}", param.name()),
                parameter: param.name().to_string(),
                p,
                rows: vec![row],
            }),
        }
    }
    Ok(Report { experiment: Experiment::Sweep, sweeps, ..Report::new(Experiment::Sweep) })
}

/// Refinement studies per degree and perturbation strength θ.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let mut specs = Vec::new();
    for &p in &cfg.run.degrees {
        if cfg.noise.thetas.is_empty() {
            specs.push(base_spec(cfg, p, format!("convergence_p{p}_exact")));
        }
        for &theta in &cfg.noise.thetas {
            let mut s = base_spec(cfg, p, format!("convergence_p{p}_theta{theta}"));
            s.noise = Some((theta, cfg.noise.c0, cfg.run.seed));
            specs.push(s);
        }
    }
    Ok(Report { series: run_all(&specs)?, ..Report::new(Experiment::Convergence) })
}

/// Weighted error in B with `k` doubling on each halving of `h`.
pub fn run_pollution(cfg: &ExperimentConfig) -> Result<Report> {
    let mut specs = Vec::new();
    for &p in &cfg.run.degrees {
        for &kc in &cfg.pollution.kinds {
            let tag = match kc {
                KindConfig::IllPosed => "ill",
                KindConfig::WellPosed => "well",
            };
            let betas: &[f64] = if p >= 2 { &cfg.pollution.beta2 } else { &[0.0] };
            for (i, &b) in betas.iter().enumerate() {
                let mut s = base_spec(cfg, p, format!("pollution_p{p}_{tag}_beta{i}"));
                s.kind = kind(kc == KindConfig::WellPosed);
                s.k0 = cfg.pollution.k0;
                s.k_growth = 2.0;
                s.regions = vec![Region::Target];
                if p >= 2 {
                    s.params.beta[1] = b;
                    s.params.gamma[1] = s.params.gamma[1].max(b.abs());
                }
                specs.push(s);
            }
        }
    }
    let series = run_all(&specs)?;
    let slopes = series
        .iter()
        .map(|s| {
            let k: Vec<f64> = s.table.rows.iter().map(|r| r.k).collect();
            let w: Vec<f64> = s.table.rows.iter().filter_map(|r| r.weighted).collect();
            Slope { name: s.name.clone(), p: s.p, value: loglog_slope(&k, &w) }
        })
        .collect();
    Ok(Report { series, slopes, ..Report::new(Experiment::Pollution) })
}

/// Split geometry with and without the divergence data.
pub fn run_split(cfg: &ExperimentConfig) -> Result<Report> {
    let mut specs = Vec::new();
    for &p in &cfg.run.degrees {
        for div in [false, true] {
            if div && !cfg.run.divergence {
                continue;
            }
            let tag = if div { "div" } else { "plain" };
            let mut s = base_spec(cfg, p, format!("split_p{p}_{tag}"));
            s.divergence = div;
            specs.push(s);
        }
    }
    Ok(Report { series: run_all(&specs)?, ..Report::new(Experiment::Split) })
}

/// Plane-jump shear modulus; the interface conditions of the reference
/// solution are checked before anything is assembled.
pub fn run_jump(cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.material.variant != MaterialKind::PlaneJump {
        bail!("the jump experiment needs material.variant = \"plane_jump\"");
    }
    let pairs = cfg.material.pairs();
    for &[mp, mm] in &pairs {
        let coeffs = ucp_core::manufactured::jump_coefficients(mp, mm, cfg.material.eta, cfg.run.k)?;
        let rep = verify_interface_conditions(&coeffs, cfg.material.eta, mp, mm, cfg.material.lambda, cfg.run.k, 100);
        let worst = rep.displacement.max(rep.traction);
        if !(worst <= INTERFACE_GATE) {
            bail!(GateFailure(format!("interface conditions violated by {worst:.3e} for μ = ({mp}, {mm})")));
        }
    }
    let mut specs = Vec::new();
    for &p in &cfg.run.degrees {
        for &pair in &pairs {
            let mut s = base_spec(cfg, p, format!("jump_p{p}_mu{}", pair_tag(pair)));
            s.material.pair = pair;
            specs.push(s);
        }
    }
    Ok(Report { series: run_all(&specs)?, ..Report::new(Experiment::Jump) })
}

/// Inclusion target with data only along the bottom.
pub fn run_inclusion(cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.material.variant != MaterialKind::Inclusion {
        bail!("the inclusion experiment needs material.variant = \"inclusion\"");
    }
    let mut specs = Vec::new();
    for &p in &cfg.run.degrees {
        for pair in cfg.material.pairs() {
            let mut s = base_spec(cfg, p, format!("inclusion_p{p}_mu{}", pair_tag(pair)));
            s.material.pair = pair;
            specs.push(s);
        }
    }
    Ok(Report { series: run_all(&specs)?, ..Report::new(Experiment::Inclusion) })
}

/// κ per level and its log-log slope against h.
pub fn run_condition(cfg: &ExperimentConfig) -> Result<Report> {
    let specs: Vec<SeriesSpec> = cfg
        .run
        .degrees
        .iter()
        .map(|&p| {
            let mut s = base_spec(cfg, p, format!("condition_p{p}"));
            s.condition = true;
            s
        })
        .collect();
    let series = run_all(&specs)?;
    let slopes = series
        .iter()
        .map(|s| {
            let h: Vec<f64> = s.table.rows.iter().map(|r| r.h).collect();
            let kappa: Vec<f64> = s.table.rows.iter().filter_map(|r| r.condition).collect();
            let value = if h.len() >= 2 { loglog_slope(&h, &kappa) } else { None };
            Slope { name: s.name.clone(), p: s.p, value }
        })
        .collect();
    Ok(Report { series, slopes, ..Report::new(Experiment::Condition) })
}
