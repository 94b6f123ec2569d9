//! Structured, fitted triangulations of the unit square.
//!
//! Meshes are built from a tensor grid of breakpoints. Every rectangle of the
//! grid is cut along its lower-left to upper-right diagonal, so any line passed
//! as a breakpoint is a union of facets. Uniform red refinement keeps this
//! structure: the refined mesh is the diagonal-split grid on the halved
//! breakpoints.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const LINE_TOL: f64 = 1e-12;

/// Named subsets of the unit square used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    /// The whole domain.
    Domain,
    /// Measurement set ω.
    Data,
    /// Target set B.
    Target,
    /// Lower part B₋ of a split target.
    TargetMinus,
    /// Upper part B₊ of a split target.
    TargetPlus,
    /// Ω₊, the side above a coefficient interface.
    Upper,
    /// Ω₋, the side below a coefficient interface.
    Lower,
}

impl Region {
    pub const ALL: [Region; 7] = [
        Region::Domain,
        Region::Data,
        Region::Target,
        Region::TargetMinus,
        Region::TargetPlus,
        Region::Upper,
        Region::Lower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::Domain => "Omega",
            Region::Data => "omega",
            Region::Target => "B",
            Region::TargetMinus => "B_minus",
            Region::TargetPlus => "B_plus",
            Region::Upper => "Omega_plus",
            Region::Lower => "Omega_minus",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Per-cell region membership flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RegionSet(u8);

impl RegionSet {
    pub fn contains(self, region: Region) -> bool {
        self.0 & region.bit() != 0
    }

    pub fn insert(&mut self, region: Region) {
        self.0 |= region.bit();
    }

    pub fn iter(self) -> impl Iterator<Item = Region> {
        Region::ALL.into_iter().filter(move |r| self.contains(*r))
    }
}

/// Closed axis-aligned rectangle `[x0,x1] × [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    /// Strict interior test; centroids of fitted cells never lie on an edge.
    pub fn contains(&self, p: Point) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// A region described as a union of rectangles minus another union.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionShape {
    pub include: Vec<Rect>,
    pub exclude: Vec<Rect>,
}

impl RegionShape {
    pub fn rect(r: Rect) -> Self {
        RegionShape { include: vec![r], exclude: vec![] }
    }

    pub fn union(rects: Vec<Rect>) -> Self {
        RegionShape { include: rects, exclude: vec![] }
    }

    /// Unit square with `hole` removed.
    pub fn complement(hole: Rect) -> Self {
        RegionShape { include: vec![Rect::UNIT], exclude: vec![hole] }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.include.iter().any(|r| r.contains(p)) && !self.exclude.iter().any(|r| r.contains(p))
    }

    fn rects(&self) -> impl Iterator<Item = &Rect> {
        self.include.iter().chain(self.exclude.iter())
    }
}

/// Set of named regions a mesh must be fitted to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Geometry {
    pub regions: Vec<(Region, RegionShape)>,
}

impl Geometry {
    pub fn new() -> Self {
        Geometry::default()
    }

    pub fn with(mut self, region: Region, shape: RegionShape) -> Self {
        self.regions.retain(|(r, _)| *r != region);
        self.regions.push((region, shape));
        self
    }

    /// Data set ω = Ω \ [0.1,0.9]×[0.25,1], target B = Ω \ [0.1,0.9]×[0.95,1].
    pub fn convex() -> Self {
        Geometry::new()
            .with(Region::Data, RegionShape::complement(Rect::new(0.1, 0.9, 0.25, 1.0)))
            .with(Region::Target, RegionShape::complement(Rect::new(0.1, 0.9, 0.95, 1.0)))
    }

    /// Data set reduced to two side strips of height `xi` plus the bottom band;
    /// the target splits into B₋ = [0,1]×[0,ξ] and B₊ = [0.1,0.9]×[ξ,0.95].
    pub fn split(xi: f64) -> Self {
        let minus = Rect::new(0.0, 1.0, 0.0, xi);
        let plus = Rect::new(0.1, 0.9, xi, 0.95);
        Geometry::new()
            .with(
                Region::Data,
                RegionShape::union(vec![
                    Rect::new(0.0, 0.1, 0.0, xi),
                    Rect::new(0.9, 1.0, 0.0, xi),
                    Rect::new(0.1, 0.9, 0.0, 0.25),
                ]),
            )
            .with(Region::Target, RegionShape::union(vec![minus, plus]))
            .with(Region::TargetMinus, RegionShape::rect(minus))
            .with(Region::TargetPlus, RegionShape::rect(plus))
    }

    /// Bottom-only data ω = [0,1]×[0,0.25]; the target rectangle is cut at
    /// `y_split` into B₋ and B₊.
    pub fn inclusion(target: Rect, y_split: f64) -> Self {
        let minus = Rect::new(target.x0, target.x1, target.y0, y_split);
        let plus = Rect::new(target.x0, target.x1, y_split, target.y1);
        Geometry::new()
            .with(Region::Data, RegionShape::rect(Rect::new(0.0, 1.0, 0.0, 0.25)))
            .with(Region::Target, RegionShape::rect(target))
            .with(Region::TargetMinus, RegionShape::rect(minus))
            .with(Region::TargetPlus, RegionShape::rect(plus))
    }

    /// Adds Ω₊ / Ω₋ for a horizontal coefficient interface at height `eta`.
    pub fn with_interface(self, eta: f64) -> Self {
        self.with(Region::Upper, RegionShape::rect(Rect::new(0.0, 1.0, eta, 1.0)))
            .with(Region::Lower, RegionShape::rect(Rect::new(0.0, 1.0, 0.0, eta)))
    }

    pub fn shape(&self, region: Region) -> Option<&RegionShape> {
        self.regions.iter().find(|(r, _)| *r == region).map(|(_, s)| s)
    }

    /// All rectangle edge coordinates, clipped to the unit interval.
    pub fn lines(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = vec![0.0, 1.0];
        let mut ys = vec![0.0, 1.0];
        for (_, shape) in &self.regions {
            for r in shape.rects() {
                xs.extend([r.x0.clamp(0.0, 1.0), r.x1.clamp(0.0, 1.0)]);
                ys.extend([r.y0.clamp(0.0, 1.0), r.y1.clamp(0.0, 1.0)]);
            }
        }
        (dedup_sorted(xs), dedup_sorted(ys))
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < LINE_TOL);
    v
}

/// Subdivides every gap between consecutive required lines into equal pieces
/// no longer than `spacing`.
pub fn quasi_uniform_breakpoints(required: &[f64], spacing: f64) -> Vec<f64> {
    let lines = dedup_sorted(required.to_vec());
    let mut out = vec![lines[0]];
    for w in lines.windows(2) {
        let n = ((w[1] - w[0]) / spacing - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=n {
            out.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFacet {
    pub vertices: [usize; 2],
    /// `cells[0]` is the first cell, `cells[1]` the second.
    pub cells: [usize; 2],
    /// Unit normal pointing from the first cell into the second.
    pub normal: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub cell: usize,
    /// Outward unit normal.
    pub normal: Point,
}

/// Conforming triangulation of the unit square with region tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    /// Undirected edges, indexed as in `cell_edges`.
    edges: Vec<[usize; 2]>,
    /// Local edge `i` of a cell joins local vertices `i` and `(i+1)%3`.
    cell_edges: Vec<[usize; 3]>,
    interior_facets: Vec<InteriorFacet>,
    boundary_facets: Vec<BoundaryFacet>,
    cell_tags: Vec<RegionSet>,
    geometry: Geometry,
    lines_x: Vec<f64>,
    lines_y: Vec<f64>,
    h: f64,
    level: usize,
}

fn check_breakpoints(b: &[f64], axis: &str) -> Result<()> {
    if b.len() < 2 {
        return Err(Error::Breakpoints(format!("{axis}: need at least two breakpoints")));
    }
    if b[0] != 0.0 || b[b.len() - 1] != 1.0 {
        return Err(Error::Breakpoints(format!("{axis}: must start at 0 and end at 1")));
    }
    if b.iter().any(|v| !v.is_finite()) || b.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Breakpoints(format!("{axis}: must be strictly increasing")));
    }
    Ok(())
}

/// Tensor grid of rectangles, each split into two triangles along the
/// lower-left to upper-right diagonal.
pub fn build_fitted_mesh(breakpoints_x: &[f64], breakpoints_y: &[f64]) -> Result<Mesh> {
    check_breakpoints(breakpoints_x, "x")?;
    check_breakpoints(breakpoints_y, "y")?;
    let nx = breakpoints_x.len();
    let ny = breakpoints_y.len();
    let mut vertices = Vec::with_capacity(nx * ny);
    for &y in breakpoints_y {
        for &x in breakpoints_x {
            vertices.push([x, y]);
        }
    }
    let mut cells = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v00 = j * nx + i;
            let v10 = v00 + 1;
            let v01 = v00 + nx;
            let v11 = v01 + 1;
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    Ok(Mesh::from_parts(
        vertices,
        cells,
        Geometry::new(),
        breakpoints_x.to_vec(),
        breakpoints_y.to_vec(),
        0,
    ))
}

/// Builds a mesh fitted to every line of `geometry` with grid spacing at most
/// `spacing`, and tags it.
pub fn build_for_geometry(geometry: &Geometry, spacing: f64) -> Result<Mesh> {
    let (lx, ly) = geometry.lines();
    let mesh = build_fitted_mesh(
        &quasi_uniform_breakpoints(&lx, spacing),
        &quasi_uniform_breakpoints(&ly, spacing),
    )?;
    tag_regions(mesh, geometry)
}

/// Red refinement: each triangle is split into four congruent children
/// through its edge midpoints. Region tags are re-evaluated on the children.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let nv = vertices.len();
    for e in &mesh.edges {
        let a = mesh.vertices[e[0]];
        let b = mesh.vertices[e[1]];
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut cells = Vec::with_capacity(4 * mesh.cells.len());
    for (c, tri) in mesh.cells.iter().enumerate() {
        let [e0, e1, e2] = mesh.cell_edges[c];
        // e0 = (v0,v1), e1 = (v1,v2), e2 = (v2,v0)
        let (m01, m12, m20) = (nv + e0, nv + e1, nv + e2);
        cells.push([tri[0], m01, m20]);
        cells.push([m01, tri[1], m12]);
        cells.push([m20, m12, tri[2]]);
        cells.push([m01, m12, m20]);
    }
    let halve = |lines: &[f64]| {
        let mut out = Vec::with_capacity(2 * lines.len() - 1);
        for w in lines.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(lines[lines.len() - 1]);
        out
    };
    Mesh::from_parts(
        vertices,
        cells,
        mesh.geometry.clone(),
        halve(&mesh.lines_x),
        halve(&mesh.lines_y),
        mesh.level + 1,
    )
}

/// Tags every cell with the regions of `geometry` containing its centroid.
/// Fails if a rectangle edge is not a grid line of the mesh.
pub fn tag_regions(mut mesh: Mesh, geometry: &Geometry) -> Result<Mesh> {
    for (region, shape) in &geometry.regions {
        for r in shape.rects() {
            for x in [r.x0, r.x1] {
                if (0.0..=1.0).contains(&x) && !on_line(&mesh.lines_x, x) {
                    return Err(Error::NotFitted { what: region.name().into(), coord: x });
                }
            }
            for y in [r.y0, r.y1] {
                if (0.0..=1.0).contains(&y) && !on_line(&mesh.lines_y, y) {
                    return Err(Error::NotFitted { what: region.name().into(), coord: y });
                }
            }
        }
    }
    let mut merged = mesh.geometry.clone();
    for (region, shape) in &geometry.regions {
        merged = merged.with(*region, shape.clone());
    }
    mesh.geometry = merged;
    mesh.retag();
    Ok(mesh)
}

fn on_line(lines: &[f64], v: f64) -> bool {
    lines.iter().any(|l| (l - v).abs() < LINE_TOL)
}

impl Mesh {
    fn from_parts(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        geometry: Geometry,
        lines_x: Vec<f64>,
        lines_y: Vec<f64>,
        level: usize,
    ) -> Mesh {
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::new();
        let mut edge_cells: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for (l, slot) in ce.iter_mut().enumerate() {
                let a = tri[l];
                let b = tri[(l + 1) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                edge_cells[id].push((c, l));
                *slot = id;
            }
            cell_edges.push(ce);
        }
        let outward = |c: usize, l: usize| -> Point {
            let a = vertices[cells[c][l]];
            let b = vertices[cells[c][(l + 1) % 3]];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            [dy / len, -dx / len]
        };
        let mut interior_facets = Vec::new();
        let mut boundary_facets = Vec::new();
        for (id, owners) in edge_cells.iter().enumerate() {
            match owners.as_slice() {
                [(c, l)] => boundary_facets.push(BoundaryFacet {
                    vertices: edges[id],
                    cell: *c,
                    normal: outward(*c, *l),
                }),
                [(c0, l0), (c1, _)] => interior_facets.push(InteriorFacet {
                    vertices: edges[id],
                    cells: [*c0, *c1],
                    normal: outward(*c0, *l0),
                }),
                _ => unreachable!("non-manifold edge in a tensor-grid triangulation"),
            }
        }
        let h = edges
            .iter()
            .map(|e| {
                let a = vertices[e[0]];
                let b = vertices[e[1]];
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max);
        let mut mesh = Mesh {
            cell_tags: vec![RegionSet::default(); cells.len()],
            vertices,
            cells,
            edges,
            cell_edges,
            interior_facets,
            boundary_facets,
            geometry,
            lines_x,
            lines_y,
            h,
            level,
        };
        mesh.retag();
        mesh
    }

    fn retag(&mut self) {
        for c in 0..self.cells.len() {
            let p = self.centroid(c);
            let mut tags = RegionSet::default();
            tags.insert(Region::Domain);
            for (region, shape) in &self.geometry.regions {
                if *region == Region::Domain || shape.contains(p) {
                    tags.insert(*region);
                }
            }
            self.cell_tags[c] = tags;
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior_facets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn cell_tags(&self) -> &[RegionSet] {
        &self.cell_tags
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn refinement_level(&self) -> usize {
        self.level
    }

    pub fn grid_lines(&self) -> (&[f64], &[f64]) {
        (&self.lines_x, &self.lines_y)
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let t = self.cells[c];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn centroid(&self, c: usize) -> Point {
        let [a, b, d] = self.cell_vertices(c);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    /// Signed area (positive for counterclockwise cells).
    pub fn signed_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_vertices(c);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn has_region(&self, region: Region) -> bool {
        region == Region::Domain || self.geometry.shape(region).is_some()
    }

    pub fn in_region(&self, c: usize, region: Region) -> bool {
        self.cell_tags[c].contains(region)
    }

    /// Cells tagged with `region`; errors if the region is unknown or empty.
    pub fn region_cells(&self, region: Region) -> Result<Vec<usize>> {
        if !self.has_region(region) {
            return Err(Error::MissingRegion(region.name()));
        }
        let cells: Vec<usize> = (0..self.cells.len()).filter(|&c| self.in_region(c, region)).collect();
        if cells.is_empty() {
            return Err(Error::EmptyRegion(region.name()));
        }
        Ok(cells)
    }

    /// Plain-text dump: `v x y`, `c a b c`, and `t cell region...` records.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {}", v[0], v[1]);
        }
        for c in &self.cells {
            let _ = writeln!(out, "c {} {} {}", c[0], c[1], c[2]);
        }
        for (c, tags) in self.cell_tags.iter().enumerate() {
            let _ = write!(out, "t {c}");
            for r in tags.iter() {
                let _ = write!(out, " {}", r.name());
            }
            out.push('\n');
        }
        out
    }
}
