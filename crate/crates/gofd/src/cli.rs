//! Experiment harness behind the `gofd` binary. Flags and an optional
//! `key=value` file are merged into an [`ExperimentConfig`], and each command
//! writes CSV and `key=value` lines to a writer.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, convergence_study_parallel, impact_study, kernel_error_1d,
    precond_comparison,
};
use crate::grid::FractionalOrder;
use crate::mesh::{generate_ball_mesh, load_mesh, SimplicialMesh};
use crate::solver::{solve_bvp, BvpConfig, PreconditionerKind};
use crate::stiffness::{decay_profile, KernelSpec, Scheme};

/// Largest `n_fd` accepted in 3D without `--large`.
pub const DESK_NFD_CAP_3D: usize = 128;

/// Largest 3D mesh (vertices) accepted without `--large`.
pub const DESK_VERTEX_CAP_3D: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Kernel,
    Decay,
    Impact,
    Solve,
    Convergence,
    Precond,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kernel => "kernel",
            Self::Decay => "decay",
            Self::Impact => "impact",
            Self::Solve => "solve",
            Self::Convergence => "convergence",
            Self::Precond => "precond",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line flags. Every value is optional so that a config file can
/// supply it; flags win over the file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "gofd", version, about = "Grid-overlay finite differences for the fractional Laplacian")]
pub struct Flags {
    /// kernel | decay | impact | solve | convergence | precond
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// `key=value` file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    /// analytic | fft | nufft | spectral | modspec
    #[arg(long)]
    pub scheme: Option<String>,
    /// Overlay half-width in grid steps; chosen from the mesh when omitted.
    #[arg(long)]
    pub nfd: Option<usize>,
    /// Trapezoidal samples per axis.
    #[arg(long)]
    pub m: Option<usize>,
    /// Gauss-Legendre order.
    #[arg(long)]
    pub ng: Option<usize>,
    #[arg(long)]
    pub rfd: Option<f64>,
    /// Mesh files, comma separated (one per level for `convergence`).
    #[arg(long, value_delimiter = ',')]
    pub mesh: Vec<PathBuf>,
    /// Target element sizes of generated unit-ball meshes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ball: Vec<f64>,
    /// none | sparse | circulant
    #[arg(long)]
    pub precond: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Kernel accuracy exponent for `impact`.
    #[arg(long)]
    pub delta: Option<u32>,
    /// Largest `n_fd` tabulated by `impact`.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lift the desk-scale 3D caps.
    #[arg(long)]
    pub large: bool,
    /// Solve convergence levels concurrently.
    #[arg(long)]
    pub parallel: bool,
}

/// Where a solve gets its meshes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Files(Vec<PathBuf>),
    Ball(Vec<f64>),
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Files(p) => {
                let names: Vec<String> = p.iter().map(|p| p.display().to_string()).collect();
                write!(f, "mesh={}", names.join(","))
            }
            Self::Ball(h) => {
                let hs: Vec<String> = h.iter().map(|h| h.to_string()).collect();
                write!(f, "ball={}", hs.join(","))
            }
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dim: usize,
    pub s: FractionalOrder,
    pub scheme: Scheme,
    pub n_fd: Option<usize>,
    pub m: usize,
    pub n_g: usize,
    pub r_fd: f64,
    pub mesh: MeshSource,
    pub precond: PreconditionerKind,
    pub tol: f64,
    pub max_iter: usize,
    pub delta: u32,
    pub n_max: usize,
    pub out: Option<PathBuf>,
    pub large: bool,
    pub parallel: bool,
}

/// Default trapezoidal sample count: `2^10` in 3D, `2^14` otherwise.
pub fn default_m(dim: usize) -> usize {
    if dim >= 3 {
        1 << 10
    } else {
        1 << 14
    }
}

fn default_nfd(command: Command) -> Option<usize> {
    match command {
        Command::Kernel => Some(81),
        Command::Decay => Some(64),
        _ => None,
    }
}

fn default_ball(command: Command) -> Vec<f64> {
    match command {
        Command::Convergence => vec![0.2, 0.1, 0.05, 0.025],
        _ => vec![0.1],
    }
}

fn parse_value<T: FromStr>(key: &'static str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| Error::invalid(key, format!("cannot parse `{raw}`: {e}")))
}

fn parse_list<T: FromStr>(key: &'static str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    raw.split(',').filter(|p| !p.trim().is_empty()).map(|p| parse_value(key, p)).collect()
}

fn parse_bool(key: &'static str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::invalid(key, format!("expected a boolean, got `{other}`"))),
    }
}

/// Reads a `key=value` file. Blank lines and lines starting with `#` are
/// skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected key=value, got `{line}`"),
            });
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl Flags {
    /// Fills unset flags from a parsed config file.
    pub fn merge_file(mut self, file: &BTreeMap<String, String>) -> Result<Self> {
        for (key, raw) in file {
            match key.as_str() {
                "command" => {
                    if self.command.is_none() {
                        self.command = Some(
                            Command::from_str(raw, false).map_err(|e| Error::invalid("command", e))?,
                        );
                    }
                }
                "dim" => fill(&mut self.dim, "dim", raw)?,
                "s" => fill(&mut self.s, "s", raw)?,
                "scheme" => fill(&mut self.scheme, "scheme", raw)?,
                "nfd" => fill(&mut self.nfd, "nfd", raw)?,
                "m" => fill(&mut self.m, "m", raw)?,
                "ng" => fill(&mut self.ng, "ng", raw)?,
                "rfd" => fill(&mut self.rfd, "rfd", raw)?,
                "precond" => fill(&mut self.precond, "precond", raw)?,
                "tol" => fill(&mut self.tol, "tol", raw)?,
                "max_iter" => fill(&mut self.max_iter, "max_iter", raw)?,
                "delta" => fill(&mut self.delta, "delta", raw)?,
                "nmax" => fill(&mut self.nmax, "nmax", raw)?,
                "out" => fill(&mut self.out, "out", raw)?,
                "mesh" => {
                    if self.mesh.is_empty() {
                        self.mesh = parse_list("mesh", raw)?;
                    }
                }
                "ball" => {
                    if self.ball.is_empty() {
                        self.ball = parse_list("ball", raw)?;
                    }
                }
                "large" => self.large |= parse_bool("large", raw)?,
                "parallel" => self.parallel |= parse_bool("parallel", raw)?,
                other => return Err(Error::invalid("config", format!("unknown key `{other}`"))),
            }
        }
        Ok(self)
    }

    /// Applies the config file named by `--config`, then defaults, and
    /// validates the result.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let flags = match &self.config {
            Some(path) => {
                let file = read_config_file(path)?;
                self.clone().merge_file(&file)?
            }
            None => self,
        };
        flags.into_config()
    }

    fn into_config(self) -> Result<ExperimentConfig> {
        let command = self
            .command
            .ok_or_else(|| Error::invalid("command", "missing (kernel|decay|impact|solve|convergence|precond)"))?;
        let dim = self.dim.unwrap_or(if command == Command::Kernel { 1 } else { 2 });
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid("dim", format!("must be 1, 2 or 3, got {dim}")));
        }
        let s = FractionalOrder::new(self.s.unwrap_or(0.5)).map_err(|e| Error::invalid("s", e.to_string()))?;
        let scheme: Scheme = self.scheme.as_deref().unwrap_or("fft").parse()?;
        let precond: PreconditionerKind = self.precond.as_deref().unwrap_or("circulant").parse()?;
        let n_fd = self.nfd.or(default_nfd(command));
        if n_fd == Some(0) {
            return Err(Error::invalid("nfd", "must be at least 1"));
        }
        let m = self.m.unwrap_or(default_m(dim));
        let n_g = self.ng.unwrap_or(64);
        let r_fd = self.rfd.unwrap_or(1.2);
        if !(r_fd > 0.0) || !r_fd.is_finite() {
            return Err(Error::invalid("rfd", format!("must be positive, got {r_fd}")));
        }
        let tol = self.tol.unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::invalid("tol", format!("must lie in (0, 1), got {tol}")));
        }
        let max_iter = self.max_iter.unwrap_or(5000);
        if max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        let delta = self.delta.unwrap_or(12);
        if delta < 1 {
            return Err(Error::invalid("delta", "must be at least 1"));
        }
        let n_max = self.nmax.unwrap_or(2000);
        if n_max < 2 {
            return Err(Error::invalid("nmax", "must be at least 2"));
        }
        if !self.mesh.is_empty() && !self.ball.is_empty() {
            return Err(Error::invalid("mesh", "give either --mesh or --ball, not both"));
        }
        let mesh = if !self.mesh.is_empty() {
            MeshSource::Files(self.mesh)
        } else {
            let hs = if self.ball.is_empty() { default_ball(command) } else { self.ball };
            if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
                return Err(Error::invalid("ball", format!("target sizes must lie in (0, 1), got {h}")));
            }
            MeshSource::Ball(hs)
        };
        if dim == 3 && !self.large {
            if let Some(n) = n_fd.filter(|&n| n > DESK_NFD_CAP_3D) {
                return Err(Error::invalid(
                    "nfd",
                    format!("{n} exceeds the 3D cap {DESK_NFD_CAP_3D}; pass --large to lift it"),
                ));
            }
        }
        Ok(ExperimentConfig {
            command,
            dim,
            s,
            scheme,
            n_fd,
            m,
            n_g,
            r_fd,
            mesh,
            precond,
            tol,
            max_iter,
            delta,
            n_max,
            out: self.out,
            large: self.large,
            parallel: self.parallel,
        })
    }
}

fn fill<T: FromStr>(slot: &mut Option<T>, key: &'static str, raw: &str) -> Result<()>
where
    T::Err: fmt::Display,
{
    if slot.is_none() {
        *slot = Some(parse_value(key, raw)?);
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec::new(self.scheme, self.m, self.n_g)
    }

    /// Solve settings; in 3D the automatic grid is capped unless `--large`
    /// is set.
    pub fn bvp_config(&self) -> BvpConfig {
        BvpConfig {
            r_fd: self.r_fd,
            n_fd: self.n_fd,
            n_fd_cap: (self.dim == 3 && !self.large).then_some(DESK_NFD_CAP_3D),
            precond: self.precond,
            tol: self.tol,
            max_iter: self.max_iter,
            ..BvpConfig::new(self.s, self.kernel_spec())
        }
    }

    /// One-line echo of every setting, written as a `# config:` comment.
    pub fn echo(&self) -> String {
        let nfd = self.n_fd.map_or("auto".to_string(), |n| n.to_string());
        let out = self.out.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        format!(
            "command={} dim={} s={} scheme={} nfd={nfd} m={} ng={} rfd={} {} precond={} tol={:e} max_iter={} delta={} nmax={} out={out} large={} parallel={}",
            self.command,
            self.dim,
            self.s.value(),
            self.scheme,
            self.m,
            self.n_g,
            self.r_fd,
            self.mesh,
            self.precond,
            self.tol,
            self.max_iter,
            self.delta,
            self.n_max,
            self.large,
            self.parallel,
        )
    }

    /// Meshes with their labels. Loading errors stay attached to their
    /// level so that the caller can name it.
    fn meshes(&self) -> Vec<(String, Result<SimplicialMesh>)> {
        match &self.mesh {
            MeshSource::Files(paths) => paths
                .iter()
                .map(|p| (p.display().to_string(), load_mesh(p).and_then(|m| self.check_mesh(m))))
                .collect(),
            MeshSource::Ball(hs) => hs
                .iter()
                .map(|&h| (format!("h={h}"), generate_ball_mesh(self.dim, h).and_then(|m| self.check_mesh(m))))
                .collect(),
        }
    }

    fn check_mesh(&self, mesh: SimplicialMesh) -> Result<SimplicialMesh> {
        if mesh.dim() == 3 && !self.large && mesh.n_vertices() > DESK_VERTEX_CAP_3D {
            return Err(Error::invalid(
                "mesh",
                format!(
                    "{} vertices exceed the 3D cap {DESK_VERTEX_CAP_3D}; pass --large to lift it",
                    mesh.n_vertices()
                ),
            ));
        }
        Ok(mesh)
    }

}

/// Runs one command, writing its output to `out`. Returns whether every
/// requested run converged or completed.
pub fn run<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    writeln!(out, "# config: {}", config.echo())?;
    match config.command {
        Command::Kernel => cmd_kernel(config, out),
        Command::Decay => cmd_decay(config, out),
        Command::Impact => cmd_impact(config, out),
        Command::Solve => cmd_solve(config, out),
        Command::Convergence => cmd_convergence(config, out),
        Command::Precond => cmd_precond(config, out),
    }
}

fn require_nfd(config: &ExperimentConfig) -> Result<usize> {
    config
        .n_fd
        .ok_or_else(|| Error::invalid("nfd", format!("required by `{}`", config.command)))
}

fn cmd_kernel<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let n_fd = require_nfd(config)?;
    let spec = config.kernel_spec();
    let kernel = spec.build(config.s, config.dim, n_fd)?;
    kernel.write_csv(&mut out)?;
    if config.dim == 1 {
        writeln!(out, "max_error={:e}", kernel_error_1d(&spec, config.s, n_fd)?)?;
    }
    Ok(true)
}

fn cmd_decay<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let n_fd = require_nfd(config)?;
    if n_fd < 32 {
        return Err(Error::invalid("nfd", format!("decay needs at least 32, got {n_fd}")));
    }
    let profile = decay_profile(&config.kernel_spec().build(config.s, config.dim, n_fd)?)?;
    profile.write_csv(&mut out)?;
    writeln!(out, "slope={}", profile.fitted_slope)?;
    Ok(true)
}

fn cmd_impact<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let study = impact_study(config.dim, config.s, config.delta, config.r_fd, config.n_max)?;
    writeln!(out, "n_fd,bound,err1,err2")?;
    for r in &study.rows {
        writeln!(out, "{},{:e},{:e},{:e}", r.n_fd, r.bound, r.first_order, r.second_order)?;
    }
    for (name, c) in [("first", study.first_crossing), ("second", study.second_crossing)] {
        match c {
            Some((n, e)) => writeln!(out, "{name}_crossing_n={n:.3}\n{name}_crossing_error={e:e}")?,
            None => writeln!(out, "{name}_crossing_n=none")?,
        }
    }
    Ok(true)
}

fn single_mesh(config: &ExperimentConfig) -> Result<SimplicialMesh> {
    let mut meshes = config.meshes();
    if meshes.len() != 1 {
        return Err(Error::invalid(
            "mesh",
            format!("`{}` takes one mesh, got {}", config.command, meshes.len()),
        ));
    }
    meshes.remove(0).1
}

fn cmd_solve<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let mesh = single_mesh(config)?;
    let solution = solve_bvp(&mesh, &config.bvp_config())?;
    solution.report.write_summary(&mut out, true)?;
    solution.report.write_history_csv(&mut out)?;
    Ok(solution.report.converged)
}

fn cmd_convergence<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let levels = config.meshes();
    let cfg = config.bvp_config();
    let study = if config.parallel {
        convergence_study_parallel(levels, &cfg)?
    } else {
        convergence_study(levels, &cfg)?
    };
    writeln!(out, "level,label,n_vertices,n_interior,n_elements,n_fd,h_bar,iterations,converged,l2_error")?;
    for (i, row) in study.rows.iter().enumerate() {
        let r = &row.report;
        writeln!(
            out,
            "{i},{},{},{},{},{},{:e},{},{},{:e}",
            row.label, r.n_vertices, r.n_interior, r.n_elements, r.n_fd, r.h_bar, r.iterations, r.converged, r.l2_error
        )?;
    }
    writeln!(out, "order={}", study.order)?;
    Ok(study.rows.iter().all(|r| r.report.converged))
}

fn cmd_precond<W: Write>(config: &ExperimentConfig, mut out: W) -> Result<bool> {
    let mesh = single_mesh(config)?;
    let cfg = config.bvp_config();
    let runs = precond_comparison(&mesh, &cfg, &PreconditionerKind::ALL);
    let names: Vec<&str> = runs.iter().map(|r| r.kind.name()).collect();
    writeln!(out, "iteration,{}", names.join(","))?;
    let longest = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|r| r.residual_history.len())
        .max()
        .unwrap_or(0);
    for i in 0..longest {
        let cells: Vec<String> = runs
            .iter()
            .map(|r| match &r.outcome {
                Ok(rep) => rep.residual_history.get(i).map_or(String::new(), |v| format!("{v:e}")),
                Err(_) => String::new(),
            })
            .collect();
        writeln!(out, "{},{}", i + 1, cells.join(","))?;
    }
    let mut all = true;
    for r in &runs {
        match &r.outcome {
            Ok(rep) => {
                writeln!(out, "iterations_{}={}", r.kind, rep.iterations)?;
                writeln!(out, "converged_{}={}", r.kind, rep.converged)?;
                all &= rep.converged;
            }
            Err(e) => {
                writeln!(out, "failed_{}={e}", r.kind)?;
                all = false;
            }
        }
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> Flags {
        Flags::try_parse_from(std::iter::once("gofd").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_follow_the_experiment_captions() {
        let c = flags(&["solve"]).resolve().unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.m, 1 << 14);
        assert_eq!(c.n_g, 64);
        assert_eq!(c.r_fd, 1.2);
        assert_eq!(c.tol, 1e-10);
        assert_eq!(default_m(3), 1 << 10);
        assert_eq!(flags(&["kernel"]).resolve().unwrap().n_fd, Some(81));
    }

    #[test]
    fn file_values_yield_to_flags() {
        let mut file = BTreeMap::new();
        file.insert("s".to_string(), "0.25".to_string());
        file.insert("dim".to_string(), "1".to_string());
        file.insert("command".to_string(), "decay".to_string());
        let c = flags(&["kernel", "--s", "0.75"]).merge_file(&file).unwrap().into_config().unwrap();
        assert_eq!(c.s.value(), 0.75);
        assert_eq!(c.dim, 1);
        assert_eq!(c.command, Command::Kernel);
    }

    #[test]
    fn validation_names_the_field() {
        let cases: [(&[&str], &str); 6] = [
            (&["solve", "--s", "1.5"], "s"),
            (&["solve", "--scheme", "fd"], "scheme"),
            (&["solve", "--precond", "ilu"], "precond"),
            (&["solve", "--rfd", "0"], "rfd"),
            (&["kernel", "--dim", "3", "--nfd", "200"], "nfd"),
            (&["solve", "--ball", "1.5"], "ball"),
        ];
        for (args, field) in cases {
            let err = flags(args).resolve().unwrap_err().to_string();
            assert!(err.contains(field), "{args:?}: {err}");
        }
        let mut file = BTreeMap::new();
        file.insert("colour".to_string(), "red".to_string());
        assert!(flags(&["solve"]).merge_file(&file).is_err());
    }

    #[test]
    fn echo_lists_every_setting() {
        let c = flags(&["impact", "--delta", "9"]).resolve().unwrap();
        let e = c.echo();
        for key in ["command=impact", "dim=", "s=", "scheme=", "nfd=auto", "m=", "ng=", "rfd=", "ball=", "precond=", "tol=", "delta=9", "out=-"] {
            assert!(e.contains(key), "{key} missing from {e}");
        }
    }
}
