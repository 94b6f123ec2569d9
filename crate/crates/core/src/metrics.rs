//! Error norms over tagged regions and convergence tables.

use std::fmt::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::forms::FeSpace;
use crate::manufactured::ReferenceSolution;
use crate::mesh::{Point, Region};

pub type Field<'a> = &'a (dyn Fn(usize, Point) -> [f64; 2] + Sync);
pub type GradField<'a> = &'a (dyn Fn(usize, Point) -> [[f64; 2]; 2] + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionError {
    pub absolute: f64,
    pub relative: f64,
    /// `‖u‖` over the region.
    pub reference_norm: f64,
}

/// Sums `integrand(cell, point)` times quadrature weights over `cells`,
/// chunk by chunk in cell order.
fn integrate(space: &FeSpace, cells: &[usize], integrand: impl Fn(usize, &crate::forms::CellData, usize) -> [f64; 2] + Sync) -> [f64; 2] {
    let parts: Vec<[f64; 2]> = cells
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = [0.0; 2];
            for &c in chunk {
                let data = space.cell(c);
                for q in 0..data.points.len() {
                    let v = integrand(c, &data, q);
                    acc[0] += data.weights[q] * v[0];
                    acc[1] += data.weights[q] * v[1];
                }
            }
            acc
        })
        .collect();
    parts.iter().fold([0.0; 2], |a, b| [a[0] + b[0], a[1] + b[1]])
}

/// `‖u_h - u‖` and `‖u_h - u‖ / ‖u‖` over the cells of `region`.
pub fn region_l2_error(space: &FeSpace, u_h: &[f64], reference: Field<'_>, region: Region) -> Result<RegionError> {
    let cells = space.mesh().region_cells(region)?;
    let [err2, ref2] = integrate(space, &cells, |c, data, q| {
        let x = data.points[q];
        let uh = space.eval_in_cell(u_h, c, &data.basis, x);
        let u = reference(c, x);
        let e = [uh[0] - u[0], uh[1] - u[1]];
        [e[0] * e[0] + e[1] * e[1], u[0] * u[0] + u[1] * u[1]]
    });
    let (absolute, reference_norm) = (err2.sqrt(), ref2.sqrt());
    let relative = if reference_norm > 0.0 { absolute / reference_norm } else { absolute };
    Ok(RegionError { absolute, relative, reference_norm })
}

/// `‖∇u_h - ∇u‖` over the cells of `region`, relative to `‖∇u‖`.
pub fn region_gradient_error(
    space: &FeSpace,
    u_h: &[f64],
    reference: GradField<'_>,
    region: Region,
) -> Result<RegionError> {
    let cells = space.mesh().region_cells(region)?;
    let [err2, ref2] = integrate(space, &cells, |c, data, q| {
        let x = data.points[q];
        let g = space.grad_in_cell(u_h, c, &data.basis, x);
        let r = reference(c, x);
        let mut s = [0.0; 2];
        for a in 0..2 {
            for b in 0..2 {
                s[0] += (g[a][b] - r[a][b]).powi(2);
                s[1] += r[a][b].powi(2);
            }
        }
        s
    });
    let (absolute, reference_norm) = (err2.sqrt(), ref2.sqrt());
    let relative = if reference_norm > 0.0 { absolute / reference_norm } else { absolute };
    Ok(RegionError { absolute, relative, reference_norm })
}

/// `k ‖u - u_h‖ + ‖∇u - ∇u_h‖` over `region`.
pub fn weighted_error(
    space: &FeSpace,
    u_h: &[f64],
    value: Field<'_>,
    grad: GradField<'_>,
    region: Region,
    k: f64,
) -> Result<f64> {
    let l2 = region_l2_error(space, u_h, value, region)?.absolute;
    Ok(k * l2 + region_gradient_error(space, u_h, grad, region)?.absolute)
}

/// Value and gradient closures of a reference solution on `space`, with
/// the branch chosen by cell centroid.
pub fn solution_fields<'a>(
    space: &'a FeSpace,
    sol: &'a ReferenceSolution,
) -> (impl Fn(usize, Point) -> [f64; 2] + Sync + 'a, impl Fn(usize, Point) -> [[f64; 2]; 2] + Sync + 'a) {
    let side = move |c: usize| sol.phase_at(space.mesh().centroid(c));
    (
        move |c, x| sol.eval_u(side(c), x).expect("side resolved per cell"),
        move |c, x| sol.eval_grad_u(side(c), x).expect("side resolved per cell"),
    )
}

/// `log₂(e_{i-1} / e_i)` for consecutive halvings; the first entry is `None`.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len()).map(|i| if i == 0 { None } else { Some((errors[i - 1] / errors[i]).log2()) }).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    /// Wavenumber used on this level.
    pub k: f64,
    /// One entry per region of the table.
    pub errors: Vec<RegionError>,
    /// Gradient errors per region, or empty.
    pub seminorm: Vec<RegionError>,
    pub weighted: Option<f64>,
    pub condition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub regions: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(regions: &[&str]) -> Self {
        ConvergenceTable { regions: regions.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: ConvergenceRow) {
        self.rows.push(row);
    }

    fn region_index(&self, region: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == region)
    }

    pub fn relative(&self, region: &str) -> Vec<f64> {
        let i = self.region_index(region).expect("unknown table region");
        self.rows.iter().map(|r| r.errors[i].relative).collect()
    }

    pub fn absolute(&self, region: &str) -> Vec<f64> {
        let i = self.region_index(region).expect("unknown table region");
        self.rows.iter().map(|r| r.errors[i].absolute).collect()
    }

    /// EOC of the relative errors of `region`.
    pub fn eoc(&self, region: &str) -> Vec<Option<f64>> {
        eoc(&self.relative(region))
    }

    pub fn last_eoc(&self, region: &str) -> Option<f64> {
        self.eoc(region).last().copied().flatten()
    }

    /// Relative gradient errors of `region`; empty if not recorded.
    pub fn seminorm(&self, region: &str) -> Vec<f64> {
        let i = self.region_index(region).expect("unknown table region");
        self.rows.iter().filter_map(|r| r.seminorm.get(i).map(|e| e.relative)).collect()
    }

    fn has_seminorm(&self) -> bool {
        self.rows.first().is_some_and(|r| !r.seminorm.is_empty())
    }

    /// Header plus one row per level.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,dofs,k");
        for r in &self.regions {
            write!(s, ",{r}_abs,{r}_rel,{r}_eoc").unwrap();
        }
        let h1 = self.has_seminorm();
        if h1 {
            for r in &self.regions {
                write!(s, ",{r}_h1_rel,{r}_h1_eoc").unwrap();
            }
        }
        s.push_str(",weighted,kappa\n");
        let eocs: Vec<Vec<Option<f64>>> = self.regions.iter().map(|r| self.eoc(r)).collect();
        let h1_eocs: Vec<Vec<Option<f64>>> = self.regions.iter().map(|r| eoc(&self.seminorm(r))).collect();
        for (i, row) in self.rows.iter().enumerate() {
            write!(s, "{},{:.6e},{},{:.6e}", row.level, row.h, row.dofs, row.k).unwrap();
            for (j, e) in row.errors.iter().enumerate() {
                write!(s, ",{:.10e},{:.10e},{}", e.absolute, e.relative, fmt_opt(eocs[j][i])).unwrap();
            }
            if h1 {
                for (j, e) in row.seminorm.iter().enumerate() {
                    write!(s, ",{:.10e},{}", e.relative, fmt_opt(h1_eocs[j].get(i).copied().flatten())).unwrap();
                }
            }
            writeln!(s, ",{},{}", fmt_opt(row.weighted), fmt_opt(row.condition)).unwrap();
        }
        s
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6e}"))
}
