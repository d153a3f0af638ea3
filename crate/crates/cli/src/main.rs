use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use neckfield::asymptotics::Envelope;
use neckfield::config::Format;
use neckfield::geometry::{build_geometry, BoundaryData};
use neckfield::harness::{self, plot, read_records_csv, write_records_csv, SweepRecord};
use neckfield::mesh::{check_quality, generate_mesh, Mesh};
use neckfield::solver::{
    assemble_system, capacity_matrix, flux_residuals, gradient_stats, reconstruct_u, solve_constants,
    solve_subproblems,
};
use neckfield::{load_config, Error, Result, RunConfig, SolverBackend, VERSION};

/// Gap-conductivity laboratory: geometry, meshing, solves and ε-sweeps.
#[derive(Parser, Debug)]
#[command(name = "neckfield", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "neckfield.toml")]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Gap width (overrides `geometry.eps`).
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Boundary data: `xn`, `x1`, `const:V` or `poly:c0,c1,...`.
    #[arg(long, global = true)]
    phi: Option<String>,
    /// Relative residual tolerance of the linear solves.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Linear solver backend: `cholesky` or `cg`.
    #[arg(long, visible_alias = "solve", global = true)]
    solver: Option<String>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Boundary polylines of the configured geometry.
    Geom,
    /// Mesh the domain and report its quality.
    Mesh {
        /// Mesh file path (default `<out>/mesh.txt`).
        #[arg(long)]
        mesh_out: Option<PathBuf>,
    },
    /// Solve at the configured ε.
    Solve {
        /// Solve on this mesh file instead of generating one.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Run the ε-sweep.
    Sweep,
    /// Log-log fit of one record column against another.
    Fit {
        /// Records file (default `<out>/records.csv`).
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, default_value = "eps")]
        x: String,
        #[arg(long, default_value = "max_grad_neck")]
        y: String,
    },
    /// Run the configured checks on a sweep; exits 4 if any fails.
    Report {
        /// Records file (default `<out>/records.csv`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn parse_phi(s: &str) -> Result<BoundaryData> {
    let bad = || Error::Config(format!("--phi {s:?}: expected xn, x1, const:V or poly:c0,c1,..."));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    match s.split_once(':') {
        None => match s {
            "xn" => Ok(BoundaryData::LinearXn),
            "x1" => Ok(BoundaryData::LinearX1),
            _ => Err(bad()),
        },
        Some(("const", v)) => Ok(BoundaryData::Constant { value: num(v)? }),
        Some(("poly", cs)) => Ok(BoundaryData::Polynomial {
            coeffs: cs.split(',').map(num).collect::<Result<_>>()?,
        }),
        Some(_) => Err(bad()),
    }
}

fn parse_backend(s: &str) -> Result<SolverBackend> {
    match s {
        "cholesky" => Ok(SolverBackend::Cholesky),
        "cg" => Ok(SolverBackend::Cg),
        _ => Err(Error::Config(format!("--solver {s:?}: expected cholesky or cg"))),
    }
}

/// Flags over file over defaults.
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(eps) = cli.eps {
        cfg.geometry.eps = eps;
    }
    if let Some(phi) = &cli.phi {
        cfg.solve.phi = parse_phi(phi)?;
    }
    if let Some(tol) = cli.tol {
        cfg.solve.tol = tol;
    }
    if let Some(b) = &cli.solver {
        cfg.solve.backend = parse_backend(b)?;
    }
    cfg.output.plot |= cli.plot;
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("NECKFIELD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("NECKFIELD_THREADS = {v:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

struct Output {
    dir: PathBuf,
    hash: String,
    formats: Vec<Format>,
    plot: bool,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Output> {
        let dir = cfg.output.dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Output {
            dir,
            hash: cfg.hash(),
            formats: cfg.output.formats.clone(),
            plot: cfg.output.plot,
            written: Vec::new(),
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn stamp(&self) -> String {
        format!("neckfield {VERSION} config={}", self.hash)
    }

    /// Writes to a sibling temp file, then renames over the target.
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
        let res = std::fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
            .and_then(|_| std::fs::rename(&tmp, path));
        if let Err(e) = res {
            let _ = std::fs::remove_file(&tmp);
            return Err(io_error(path, e));
        }
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut buf = format!("# {}\n", self.stamp()).into_bytes();
        body(&mut buf)?;
        self.write(&self.dir.join(name), &buf)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut v {
            map.insert(
                "provenance".into(),
                serde_json::json!({ "version": VERSION, "config_hash": self.hash }),
            );
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write(&self.dir.join(name), text.as_bytes())
    }

    fn svg(&mut self, name: &str, svg: &str) -> Result<()> {
        if !self.plot {
            return Ok(());
        }
        let text = format!("<!-- {} -->\n{svg}", self.stamp());
        self.write(&self.dir.join(name), text.as_bytes())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_mesh(out: &mut Output, path: &Path, mesh: &Mesh) -> Result<()> {
    let mut body = Vec::new();
    mesh.write_text(&mut body).map_err(|e| io_error(path, e))?;
    let split = body.iter().position(|&b| b == b'\n').map_or(body.len(), |i| i + 1);
    let mut buf = body[..split].to_vec();
    buf.extend_from_slice(format!("# {}\n", out.stamp()).as_bytes());
    buf.extend_from_slice(&body[split..]);
    out.write(path, &buf)
}

fn load_records(out: &Output, path: &Option<PathBuf>) -> Result<Vec<SweepRecord>> {
    let path = path.clone().unwrap_or_else(|| out.dir.join("records.csv"));
    let mut f = std::fs::File::open(&path).map_err(|e| io_error(&path, e))?;
    read_records_csv(&mut f)
}

fn run(cli: &Cli) -> Result<i32> {
    configure_threads()?;
    let cfg = resolve(cli)?;
    let geom = cfg.geometry()?;
    let mut out = Output::new(&cfg)?;
    let mut code = 0;
    match &cli.command {
        Command::Geom => {
            let curves = build_geometry(&geom)?;
            out.csv("curves.csv", |buf| curves.write_csv(buf))?;
            let svg = plot::curves_svg(&format!("eps = {:e}", geom.eps), &curves);
            out.svg("geometry.svg", &svg)?;
        }
        Command::Mesh { mesh_out } => {
            let mesh = generate_mesh(&geom, &cfg.mesh)?;
            let path = mesh_out.clone().unwrap_or_else(|| out.dir.join("mesh.txt"));
            write_mesh(&mut out, &path, &mesh)?;
            out.json("quality.json", &check_quality(&mesh))?;
        }
        Command::Solve { mesh } => {
            let mesh = match mesh {
                Some(p) => Mesh::load(p)?,
                None => generate_mesh(&geom, &cfg.mesh)?,
            };
            let sys = assemble_system(&mesh, cfg.solve_options())?;
            let (v0, v1, v2) = solve_subproblems(&sys, &cfg.solve.phi)?;
            let cap = solve_constants(&capacity_matrix(&sys, &v0, &v1, &v2))?;
            let u = reconstruct_u(&v0, &v1, &v2, cap.c1, cap.c2);
            out.csv("solution.csv", |buf| {
                writeln!(buf, "x,y,u,v0,v1,v2").map_err(|e| io_error(Path::new("solution.csv"), e))?;
                for (i, p) in mesh.nodes.iter().enumerate() {
                    writeln!(
                        buf,
                        "{:e},{:e},{:e},{:e},{:e},{:e}",
                        p[0], p[1], u.values[i], v0.values[i], v1.values[i], v2.values[i]
                    )
                    .map_err(|e| io_error(Path::new("solution.csv"), e))?;
                }
                Ok(())
            })?;
            out.csv("gradients.csv", |buf| {
                let werr = |e| io_error(Path::new("gradients.csv"), e);
                writeln!(buf, "triangle,cx,cy,gx,gy,norm,neck").map_err(werr)?;
                for (t, g) in u.gradients().iter().enumerate() {
                    let c = mesh.centroid(t);
                    writeln!(
                        buf,
                        "{t},{:e},{:e},{:e},{:e},{:e},{}",
                        c[0],
                        c[1],
                        g[0],
                        g[1],
                        g[0].hypot(g[1]),
                        u8::from(mesh.neck[t])
                    )
                    .map_err(werr)?;
                }
                Ok(())
            })?;
            let stats = gradient_stats(&u, &geom)?;
            let [r1, r2] = flux_residuals(&cap);
            let mut doc = serde_json::to_value(&cap)?;
            if let Value::Object(map) = &mut doc {
                map.insert("flux_residuals".into(), serde_json::json!([r1, r2]));
                map.insert("gradients".into(), serde_json::to_value(&stats)?);
                map.insert("eps".into(), geom.eps.into());
                map.insert("node_count".into(), mesh.node_count().into());
            }
            out.json("capacity.json", &doc)?;
        }
        Command::Sweep => {
            let recs = harness::sweep(&cfg.sweep_config()?)?;
            out.csv("records.csv", |buf| write_records_csv(&recs, buf))?;
            if out.plot {
                plot_records(&mut out, &recs)?;
            }
        }
        Command::Fit { records, x, y } => {
            let recs = load_records(&out, records)?;
            let fit = harness::fit_exponent(&recs, x, y)?;
            out.json(
                "fit.json",
                &serde_json::json!({ "x": x, "y": y, "fit": fit }),
            )?;
        }
        Command::Report { records } => {
            let recs = load_records(&out, records)?;
            let env = Envelope::for_geometry(&geom);
            let rep = harness::report(&recs, &env, &cfg.sweep.checks)?;
            out.json("report.json", &rep)?;
            if out.plot {
                plot_records(&mut out, &recs)?;
            }
            if !rep.passed {
                eprintln!("{}", error_line("check", 4, "one or more checks failed, see report.json"));
                code = 4;
            }
        }
    }
    for p in &out.written {
        println!("wrote {}", p.display());
    }
    Ok(code)
}

fn plot_records(out: &mut Output, recs: &[SweepRecord]) -> Result<()> {
    let eps: Vec<f64> = recs.iter().map(|r| r.eps).collect();
    for (name, field) in [
        ("grad.svg", "max_grad_neck"),
        ("a11.svg", "a11"),
        ("cdiff.svg", "cdiff"),
    ] {
        let ys: Vec<f64> = recs.iter().filter_map(|r| r.get(field)).map(f64::abs).collect();
        let fit = harness::fit_loglog(&eps, &ys).ok();
        out.svg(name, &plot::loglog_svg(field, &eps, &ys, fit.as_ref()))?;
    }
    Ok(())
}

fn error_line(kind: &str, code: i32, message: &str) -> String {
    serde_json::json!({ "error": kind, "code": code, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", error_line(e.kind(), code, &e.to_string()));
            ExitCode::from(code as u8)
        }
    }
}
