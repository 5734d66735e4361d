use std::path::Path;

use qg_core::grid::GridChart;
use qg_core::surface::{graph_chart, revolution, sphere, sphere_chart, torus, torus_chart, Ellipsoid, Graph, Profile, SurfaceGrid};

use crate::config::{GridSpec, RunConfig, SurfaceKind};
use crate::error::{CliError, Result};

fn bounds(c: &GridChart) -> ((f64, f64), (f64, f64)) {
    ((c.u0, c.u0 + c.hu * (c.nu - 1) as f64), (c.v0, c.v0 + c.hv * (c.nv - 1) as f64))
}

fn chart(grid: &GridSpec, default: GridChart) -> Result<GridChart> {
    let (u, v) = bounds(&default);
    Ok(GridChart::window(grid.nu, grid.nv, grid.u.unwrap_or(u), grid.v.unwrap_or(v))?)
}

pub fn generate(kind: &SurfaceKind, grid: &GridSpec) -> Result<SurfaceGrid> {
    let n = grid.nu;
    let s = match *kind {
        SurfaceKind::Torus { r, big_r } => torus(r, big_r, chart(grid, torus_chart(n)?)?)?,
        SurfaceKind::Ellipsoid { a, b, c } => {
            let e = Ellipsoid::new(a, b, c)?;
            e.surface(chart(grid, e.chart(n)?)?)?
        }
        SurfaceKind::Sphere { r } => sphere(r, chart(grid, sphere_chart(n)?)?)?,
        SurfaceKind::QuadricGraph => Graph::quadric().surface(chart(grid, graph_chart(n)?)?)?,
        SurfaceKind::PerturbedGraph { eps, delta } => Graph::perturbed(eps, delta).surface(chart(grid, graph_chart(n)?)?)?,
        SurfaceKind::Revolution(p) => {
            let default = match p {
                Profile::Circle { big_r, .. } if big_r > 0.0 => torus_chart(n)?,
                Profile::Circle { .. } => sphere_chart(n)?,
                Profile::Catenoid { .. } => GridChart::window(n, n, (-0.5, 0.5), (0.0, 1.0))?,
                Profile::Paraboloid | Profile::Cone => GridChart::window(n, n, (0.5, 1.5), (0.0, 1.0))?,
            };
            revolution(p, chart(grid, default)?)?
        }
    };
    Ok(s)
}

pub fn load_surface(path: &Path) -> Result<SurfaceGrid> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    SurfaceGrid::from_json(&text).map_err(|e| CliError::Schema { path: path.to_path_buf(), message: e.to_string() })
}

/// The configured input file, else the configured generator, else
/// `default` on the configured grid.
pub fn surface(cfg: &RunConfig, default: SurfaceKind) -> Result<SurfaceGrid> {
    match &cfg.input {
        Some(p) => load_surface(p),
        None => generate(&cfg.kind.unwrap_or(default), &cfg.grid),
    }
}

/// Node counts of the refinement ladder ending at the configured grid,
/// coarsest first.
pub fn ladder(grid: &GridSpec, levels: usize) -> Vec<GridSpec> {
    (0..levels)
        .rev()
        .map(|k| GridSpec { nu: ((grid.nu - 1) >> k) + 1, nv: ((grid.nv - 1) >> k) + 1, ..grid.clone() })
        .filter(|g| g.nu >= 5 && g.nv >= 5)
        .collect()
}
