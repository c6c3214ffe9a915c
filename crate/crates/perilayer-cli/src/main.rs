//! `perilayer` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use perilayer::config::RunConfig;
use perilayer::expansion::{evaluate_composite, Level};
use perilayer::fem::subdomain_norms;
use perilayer::geometry::Corner;
use perilayer::mesh::{mesh_sector, write_vtk, SectorSpec};
use perilayer::study::{
    build_artifacts, compute_rows, limit_coefficients, report_from_artifacts, StageTiming, Timings,
};
use perilayer::{cell, macroscopic, nearfield, Error};

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_ACCEPTANCE: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "perilayer", version, about = "Asymptotics of a periodic layer of holes meeting two corners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent stages.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Accepted for reproducibility scripts; the pipeline uses no randomness.
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmission constants and band profiles.
    Cell(Common),
    /// Limit field u00 and its corner coefficients.
    Limit(Common),
    /// Singular harmonic functions s_{-1}^±.
    Singularity(Common),
    /// First-order macroscopic correction u01.
    Correct(Common),
    /// Near-field singularity S1 at both corners.
    Nearfield(Common),
    /// Direct solves of the perforated problem.
    Direct(Common),
    /// Composite samples and error table.
    Expand(Common),
    /// Full convergence study with order fits and acceptance checks.
    Study(Common),
    /// ASCII VTK export of every computed field.
    Export(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Cell(c) => ("cell", c),
            Command::Limit(c) => ("limit", c),
            Command::Singularity(c) => ("singularity", c),
            Command::Correct(c) => ("correct", c),
            Command::Nearfield(c) => ("nearfield", c),
            Command::Direct(c) => ("direct", c),
            Command::Expand(c) => ("expand", c),
            Command::Study(c) => ("study", c),
            Command::Export(c) => ("export", c),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config_path: String,
    config_sha256: String,
    schema_version: u32,
    perilayer_version: &'static str,
    cli_version: &'static str,
    threads: usize,
    seedless: bool,
    exit_code: u8,
    error: Option<String>,
    stage_timings: Vec<StageTiming>,
    total_seconds: f64,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Done,
    AcceptanceViolated,
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    timings: Timings,
}

impl Run {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn exit_code_of(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_input_error() => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (name, common) = cli.command.parts();
    perilayer::configure_parallelism(common.threads);
    let start = Instant::now();
    let text = std::fs::read(&common.config).ok();
    let hash = text
        .as_ref()
        .map(|t| format!("{:x}", Sha256::digest(t)))
        .unwrap_or_default();
    let loaded = RunConfig::from_path(&common.config);
    let out = common.out.clone().unwrap_or_else(|| match &loaded {
        Ok(cfg) => PathBuf::from(&cfg.output.dir),
        Err(_) => PathBuf::from("perilayer-out"),
    });
    let (code, error, timings) = match loaded {
        Err(e) => {
            eprintln!("error: {}", e);
            (EXIT_CONFIG, Some(e.to_string()), Vec::new())
        }
        Ok(cfg) => {
            let mut run = Run {
                cfg,
                out: out.clone(),
                timings: Timings::default(),
            };
            let result = std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))
                .and_then(|_| dispatch(&cli.command, &mut run));
            match result {
                Ok(Outcome::Done) => (0, None, run.timings.0),
                Ok(Outcome::AcceptanceViolated) => {
                    eprintln!("acceptance thresholds violated; see summary.txt");
                    (EXIT_ACCEPTANCE, Some("acceptance thresholds violated".into()), run.timings.0)
                }
                Err(e) => {
                    eprintln!("error: {:#}", e);
                    (exit_code_of(&e), Some(format!("{:#}", e)), run.timings.0)
                }
            }
        }
    };
    let manifest = Manifest {
        subcommand: name,
        config_path: common.config.display().to_string(),
        config_sha256: hash,
        schema_version: perilayer::config::SCHEMA_VERSION,
        perilayer_version: env!("CARGO_PKG_VERSION"),
        cli_version: env!("CARGO_PKG_VERSION"),
        threads: common.threads,
        seedless: common.seedless,
        exit_code: code,
        error,
        stage_timings: timings,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    if std::fs::create_dir_all(&out).is_ok() {
        if let Ok(mut text) = serde_json::to_string_pretty(&manifest) {
            text.push('\n');
            if let Err(e) = std::fs::write(out.join("manifest.json"), text) {
                eprintln!("warning: cannot write manifest: {}", e);
            }
        }
    }
    ExitCode::from(code)
}

fn dispatch(command: &Command, run: &mut Run) -> Result<Outcome> {
    match command {
        Command::Cell(_) => cmd_cell(run),
        Command::Limit(_) => cmd_limit(run),
        Command::Singularity(_) => cmd_singularity(run),
        Command::Correct(_) => cmd_correct(run),
        Command::Nearfield(_) => cmd_nearfield(run),
        Command::Direct(_) => cmd_direct(run),
        Command::Expand(_) => cmd_expand(run),
        Command::Study(_) => cmd_study(run),
        Command::Export(_) => cmd_export(run),
    }
}

#[derive(Serialize)]
struct CellReport<'a> {
    constants: &'a cell::TransmissionConstants,
    lemma_integrals: [f64; 8],
    decay: Vec<(String, f64)>,
}

fn cmd_cell(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.cell.clone();
    let sol = run.timings.time("cell", || cell::transmission_constants(&cfg))?;
    run.write_json("constants.json", &sol.constants)?;
    let decay = std::iter::once(&sol.d_tilde)
        .chain(&sol.w_t)
        .chain(&sol.w_n)
        .map(|p| (format!("{}{}", p.kind.id(), p.p), p.decay_report))
        .collect();
    run.write_json(
        "cell_report.json",
        &CellReport {
            constants: &sol.constants,
            lemma_integrals: cell::lemma_integrals(&sol),
            decay,
        },
    )?;
    if run.cfg.output.vtk {
        let fields: Vec<(String, &[f64])> = std::iter::once(("D".to_string(), sol.d.values.as_slice()))
            .chain(std::iter::once(("Dtilde".to_string(), sol.d_tilde.field.values.as_slice())))
            .chain(sol.w_t.iter().map(|p| (format!("W{}t", p.p), p.field.values.as_slice())))
            .chain(sol.w_n.iter().map(|p| (format!("W{}n", p.p), p.field.values.as_slice())))
            .collect();
        let named: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        write_vtk(&run.out.join("band.vtk"), &sol.band, &named)?;
    }
    println!("D_inf = {:.10}", sol.constants.d_infinity);
    Ok(Outcome::Done)
}

fn limit_problem(run: &mut Run) -> Result<macroscopic::LimitProblem> {
    let (domain, h, profile) = (run.cfg.domain, run.cfg.study.h_limit, run.cfg.cell.profile);
    Ok(run
        .timings
        .time("limit-mesh", || macroscopic::LimitProblem::new(&domain, h, profile))?)
}

fn cmd_limit(run: &mut Run) -> Result<Outcome> {
    let p = limit_problem(run)?;
    let u00 = run.timings.time("limit", || macroscopic::solve_limit(&p))?;
    let coeffs = run.timings.time("extract", || limit_coefficients(&p, &u00))?;
    run.write_json("limit_coefficients.json", &coeffs)?;
    if run.cfg.output.vtk {
        write_vtk(&run.out.join("u00.vtk"), &p.mesh, &[("u00", &u00.field.values)])?;
    }
    for c in &coeffs {
        println!("{:?}: l1 = {:.8e}, l2 = {:.8e}", c.corner, c.get(1), c.get(2));
    }
    Ok(Outcome::Done)
}

fn cmd_singularity(run: &mut Run) -> Result<Outcome> {
    let p = limit_problem(run)?;
    let radii = macroscopic::default_radii(p.domain.l);
    let mut all = Vec::new();
    for corner in Corner::BOTH {
        let s = run
            .timings
            .time(&format!("singularity {}", corner.id()), || macroscopic::solve_singularity(&p, corner))?;
        let coeffs = Corner::BOTH
            .iter()
            .map(|&c| macroscopic::extract_field_coeffs(&p, &s, c, &[-1, 1, 2], &radii))
            .collect::<perilayer::Result<Vec<_>>>()?;
        println!("s_-1 at {:?}: own l_-1 = {:.6}", corner, coeffs[if corner == Corner::Plus { 0 } else { 1 }].get(-1));
        if run.cfg.output.vtk {
            write_vtk(
                &run.out.join(format!("s_minus1_{}.vtk", corner.id())),
                &p.mesh,
                &[("s", &s.nodal_total())],
            )?;
        }
        all.push((corner, coeffs));
    }
    run.write_json("singularity_coefficients.json", &all)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct CorrectionReport<'a> {
    limit_coefficients: &'a [macroscopic::CornerCoeffs],
    amplitudes: &'a [(Corner, i32, f64, f64)],
    traces: &'a macroscopic::GammaTraces,
}

fn cmd_correct(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.cell.clone();
    let sol = run.timings.time("cell", || cell::transmission_constants(&cfg))?;
    let p = limit_problem(run)?;
    let u00 = run.timings.time("limit", || macroscopic::solve_limit(&p))?;
    let coeffs = run.timings.time("extract", || limit_coefficients(&p, &u00))?;
    let corr = run.timings.time("correct", || {
        macroscopic::solve_macro_correction(&p, &u00, &coeffs, &sol.constants)
    })?;
    run.write_json(
        "correction.json",
        &CorrectionReport {
            limit_coefficients: &coeffs,
            amplitudes: &corr.amplitudes,
            traces: &corr.traces,
        },
    )?;
    if run.cfg.output.vtk {
        write_vtk(&run.out.join("u01.vtk"), &p.mesh, &[("u01", &corr.u01.nodal_total())])?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct NearFieldReport<'a> {
    corner: Corner,
    l_minus1: f64,
    uncertainty: f64,
    fits: &'a [nearfield::ArcFit],
    lift: &'a macroscopic::ConeLift,
}

fn cmd_nearfield(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.cell.clone();
    let sol = run.timings.time("cell", || cell::transmission_constants(&cfg))?;
    let mut reports = Vec::new();
    let nf = run.cfg.nearfield.clone();
    for corner in Corner::BOTH {
        let r = run.timings.time(&format!("nearfield {}", corner.id()), || {
            nearfield::solve_s1(corner, &cfg.cell, &sol.constants, &nf)
        })?;
        println!("L_-1(S1) at {:?} = {:.6} +- {:.1e}", corner, r.l_minus1, r.uncertainty);
        if run.cfg.output.vtk {
            write_vtk(
                &run.out.join(format!("s1_{}.vtk", corner.id())),
                &r.field.mesh,
                &[("S1", &r.field.values)],
            )?;
        }
        reports.push(r);
    }
    let out: Vec<NearFieldReport> = reports
        .iter()
        .map(|r| NearFieldReport {
            corner: r.corner,
            l_minus1: r.l_minus1,
            uncertainty: r.uncertainty,
            fits: &r.fits,
            lift: &r.lift,
        })
        .collect();
    run.write_json("nearfield.json", &out)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct DirectReport {
    delta: f64,
    h: f64,
    nodes: usize,
    energy_gap: f64,
    l2: f64,
    h1: f64,
}

fn cmd_direct(run: &mut Run) -> Result<Outcome> {
    let mut reports = Vec::new();
    for &delta in &run.cfg.study.deltas.clone() {
        let h = run.cfg.study.mesh_size(delta);
        let (domain, cell) = (run.cfg.domain, run.cfg.cell.cell.clone());
        let d = run
            .timings
            .time(&format!("direct delta={}", delta), || nearfield::solve_direct(&domain, &cell, delta, h))?;
        let n = subdomain_norms(d.mesh(), &d.field.values, &|_| true)?;
        if run.cfg.output.vtk {
            write_vtk(&run.out.join(format!("direct_{}.vtk", delta)), d.mesh(), &[("u", &d.field.values)])?;
        }
        reports.push(DirectReport {
            delta,
            h,
            nodes: d.mesh().vertices.len(),
            energy_gap: d.energy_gap,
            l2: n.l2,
            h1: n.h1,
        });
    }
    run.write_json("direct.json", &reports)?;
    Ok(Outcome::Done)
}

fn cmd_expand(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.clone();
    let art = build_artifacts(&cfg, &mut run.timings)?;
    let mut w = String::from("delta,level,x1,x2,value\n");
    for &delta in &cfg.study.deltas {
        for &level in &cfg.study.levels {
            for i in 0..=40 {
                let x = [0.5 * cfg.domain.l, -cfg.domain.h_b + (cfg.domain.h_b + cfg.domain.h_t) * i as f64 / 40.0];
                let v = evaluate_composite(&art.composite, level, delta, x)?;
                w.push_str(&format!("{},{},{},{},{:.12e}\n", delta, level.id(), x[0], x[1], v));
            }
        }
    }
    run.write("composite_samples.csv", &w)?;
    let (rows, _) = compute_rows(&cfg, &art.composite, &mut run.timings).map_err(|(e, _)| e)?;
    let mut csv = String::from("delta,level,l2,h1\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{:.9e},{:.9e}\n", r.delta, r.level.id(), r.l2, r.h1));
    }
    run.write("errors.csv", &csv)?;
    Ok(Outcome::Done)
}

fn cmd_study(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.clone();
    let art = build_artifacts(&cfg, &mut run.timings)?;
    let report = match report_from_artifacts(&cfg, &art, run.timings.clone()) {
        Ok(r) => r,
        Err((e, rows)) => {
            let mut csv = String::from("delta,level,l2,h1\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{:.9e},{:.9e}\n", r.delta, r.level.id(), r.l2, r.h1));
            }
            run.write("report.csv", &csv)?;
            return Err(e.into());
        }
    };
    run.timings = report.metadata.timings.clone();
    run.write_json("constants.json", &art.cell.constants)?;
    run.write("report.csv", &report.csv()?)?;
    run.write("summary.txt", &report.summary())?;
    run.write_json("report.json", &report)?;
    print!("{}", report.summary());
    Ok(if report.accepted() {
        Outcome::Done
    } else {
        Outcome::AcceptanceViolated
    })
}

fn cmd_export(run: &mut Run) -> Result<Outcome> {
    let cfg = run.cfg.clone();
    let art = build_artifacts(&cfg, &mut run.timings)?;
    let dir: &Path = &run.out;
    write_vtk(
        &dir.join("limit_fields.vtk"),
        &art.problem.mesh,
        &[
            ("u00", &art.composite.u00.nodal_total()),
            ("u01", &art.composite.u01.nodal_total()),
            ("u20", &art.composite.u20.nodal_total()),
            ("s_minus1_plus", &art.s_minus1[0].nodal_total()),
            ("s_minus1_minus", &art.s_minus1[1].nodal_total()),
        ],
    )?;
    write_vtk(
        &dir.join("band_profiles.vtk"),
        &art.cell.band,
        &[
            ("Dtilde", &art.cell.d_tilde.field.values),
            ("W0t", &art.cell.w_t[0].field.values),
            ("W1n", &art.cell.w_n[1].field.values),
        ],
    )?;
    for r in &art.nearfield {
        write_vtk(&dir.join(format!("s1_{}.vtk", r.corner.id())), &r.field.mesh, &[("S1", &r.field.values)])?;
    }
    let spec = SectorSpec {
        corner: Corner::Plus,
        r_max: cfg.nearfield.r_max,
        cell: cfg.cell.cell.clone(),
        h_near: cfg.nearfield.h_near,
        h_far: cfg.nearfield.h_far,
    };
    let sector = mesh_sector(&spec)?;
    write_vtk(&dir.join("sector_mesh.vtk"), &sector, &[])?;
    for &delta in &cfg.study.deltas {
        let d = nearfield::solve_direct(&cfg.domain, &cfg.cell.cell, delta, cfg.study.mesh_size(delta))?;
        let comp: Vec<f64> = d
            .mesh()
            .vertices
            .iter()
            .map(|&x| evaluate_composite(&art.composite, Level::FourThirds, delta, x))
            .collect::<perilayer::Result<_>>()?;
        write_vtk(
            &dir.join(format!("direct_{}.vtk", delta)),
            d.mesh(),
            &[("direct", &d.field.values), ("composite", &comp)],
        )?;
    }
    Ok(Outcome::Done)
}
