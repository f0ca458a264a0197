//! Config-driven condition-number experiments: diffusion-jump robustness,
//! H/h scaling on nested agglomerated hierarchies, non-nested Voronoi pairs,
//! p-scaling, and unpreconditioned growth, with CSV/SVG reporting.

mod runners;

pub use runners::{
    run_example1, run_example2, run_example4, run_example5, run_unpreconditioned,
    solve_poisson, SolveOutcome,
};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Declarative experiment description (TOML on disk).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "1" | "2" | "4" | "5" | "unprec"
    pub experiment: String,
    pub seed: u64,
    pub p: usize,
    pub q: usize,
    pub c_sigma: f64,
    /// PCG convergence tolerance for the reported iteration counts.
    pub tol: f64,
    /// Tightened tolerance for the Lanczos condition estimate rerun.
    pub estimate_tol: f64,
    /// "uniform" | "coarse_checkerboard" | "fine_checkerboard"
    pub rho_layout: String,
    /// Jump magnitudes for the example-1 sweeps.
    pub rho_e: Vec<f64>,
    /// Fine mesh sizes (cell counts) per experiment family.
    pub fine_cells: Vec<usize>,
    /// Cells-per-coarse-cell ratios for nested hierarchies (4 => H = 2h).
    pub coarse_ratios: Vec<usize>,
    /// Coarse mesh sizes for non-nested pairs.
    pub coarse_cells: Vec<usize>,
    /// Polynomial degrees for the p sweep (q = p there).
    pub p_sweep: Vec<usize>,
    pub lloyd_iters: usize,
    /// Fine cells per coarse cell in the example-1 nested refinement.
    pub seeds_per_cell: usize,
    pub nested: bool,
    /// Optional mesh/partition inputs overriding generation.
    pub mesh_file: Option<String>,
    pub partition_file: Option<String>,
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn default_for(experiment: &str) -> Result<Self> {
        let base = ExperimentConfig {
            experiment: experiment.to_string(),
            seed: 42,
            p: 1,
            q: 1,
            c_sigma: 10.0,
            tol: 1e-8,
            estimate_tol: 1e-14,
            rho_layout: "uniform".into(),
            rho_e: vec![],
            fine_cells: vec![],
            coarse_ratios: vec![],
            coarse_cells: vec![],
            p_sweep: vec![],
            lloyd_iters: 5,
            seeds_per_cell: 64,
            nested: true,
            mesh_file: None,
            partition_file: None,
            out_dir: None,
        };
        Ok(match experiment {
            "1" => ExperimentConfig {
                rho_e: vec![1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
                ..base
            },
            "2" => ExperimentConfig {
                fine_cells: vec![256, 1024, 4096],
                coarse_ratios: vec![4, 16, 64, 256],
                ..base
            },
            "4" => ExperimentConfig {
                fine_cells: vec![64, 256, 1024],
                coarse_cells: vec![16, 64, 256],
                nested: false,
                ..base
            },
            "5" => ExperimentConfig {
                fine_cells: vec![256, 262],
                coarse_cells: vec![16],
                p_sweep: (1..=6).collect(),
                ..base
            },
            "unprec" => ExperimentConfig {
                fine_cells: vec![64, 256, 1024],
                p_sweep: (1..=5).collect(),
                ..base
            },
            other => {
                return Err(Error::Config(format!("unknown experiment id {other:?}")));
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.q > self.p {
            return Err(Error::Config(format!(
                "coarse degree q = {} exceeds p = {}",
                self.q, self.p
            )));
        }
        if !(self.tol > 0.0 && self.estimate_tol > 0.0 && self.c_sigma > 0.0) {
            return Err(Error::Config("tolerances and C_sigma must be positive".into()));
        }
        match self.rho_layout.as_str() {
            "uniform" | "coarse_checkerboard" | "fine_checkerboard" => {}
            other => {
                return Err(Error::Config(format!("unknown rho layout {other:?}")));
            }
        }
        for file in [&self.mesh_file, &self.partition_file].into_iter().flatten() {
            if !Path::new(file).exists() {
                return Err(Error::Config(format!("referenced file {file} does not exist")));
            }
        }
        Ok(())
    }
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let body = std::fs::read_to_string(path)?;
    let config: ExperimentConfig = toml::from_str(&body)
        .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn write_config(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let body = toml::to_string(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(path, body)?;
    Ok(())
}

/// One experiment outcome row.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub n_h: usize,
    pub n_coarse: usize,
    pub h: f64,
    pub coarse_h: f64,
    pub p: usize,
    pub q: usize,
    pub rho_e: f64,
    pub k_estimate: f64,
    pub iterations: usize,
    pub bound_factor: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub const CSV_HEADER: &'static str = "experiment,Nh,NH,h,H,p,q,rho_e,K,iters,bound_factor";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{},{},{:.4e},{:.6e},{},{:.6e}\n",
                r.experiment,
                r.n_h,
                r.n_coarse,
                r.h,
                r.coarse_h,
                r.p,
                r.q,
                r.rho_e,
                r.k_estimate,
                r.iterations,
                r.bound_factor
            ));
        }
        out
    }

    /// Rows sorted by (experiment, Nh, NH, p, rho_e) for byte-stable output.
    pub fn sorted(mut self) -> Self {
        self.rows.sort_by(|a, b| {
            (&a.experiment, a.n_h, a.n_coarse, a.p, a.rho_e)
                .partial_cmp(&(&b.experiment, b.n_h, b.n_coarse, b.p, b.rho_e))
                .unwrap()
        });
        self
    }
}

pub fn write_results(table: &ResultsTable, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_csv())?;
    Ok(())
}

/// Least-squares slope of log y against log x.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Config("slope fit needs at least 3 points".into()));
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::Config("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Minimal log-log scatter/line SVG, one polyline per series.
pub fn write_svg_loglog(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> Result<()> {
    let (w, h) = (640.0f64, 480.0f64);
    let margin = 60.0;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (_, pts) in series {
        for &(x, y) in pts {
            if x > 0.0 && y > 0.0 {
                lo[0] = lo[0].min(x.log10());
                lo[1] = lo[1].min(y.log10());
                hi[0] = hi[0].max(x.log10());
                hi[1] = hi[1].max(y.log10());
            }
        }
    }
    if !lo[0].is_finite() {
        return Err(Error::Config("no positive data to plot".into()));
    }
    for d in 0..2 {
        if hi[d] - lo[d] < 1e-12 {
            hi[d] += 0.5;
            lo[d] -= 0.5;
        }
    }
    let sx = |x: f64| margin + (x.log10() - lo[0]) / (hi[0] - lo[0]) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y.log10() - lo[1]) / (hi[1] - lo[1]) * (h - 2.0 * margin);
    let palette = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{xlabel}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{ylabel}</text>\n",
        w / 2.0,
        w / 2.0,
        h - 16.0,
        h / 2.0,
        h / 2.0
    );
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        w - 2.0 * margin,
        h - 2.0 * margin
    ));
    for (si, (label, pts)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let path_d: Vec<String> = pts
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path_d.len() > 1 {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                path_d.join(" ")
            ));
        }
        for &(x, y) in pts.iter().filter(|&&(x, y)| x > 0.0 && y > 0.0) {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            w - margin - 180.0,
            margin + 18.0 * (si as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
