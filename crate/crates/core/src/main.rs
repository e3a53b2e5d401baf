use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use movmesh::config::{load_config, serialise_config};
use movmesh::experiments::{
    build_mesh, convergence_order, convergence_study, initial_mesh, run_scenario_with, MeshMode, RunOutput,
    ScenarioConfig, Snapshot,
};
use movmesh::output::{diagnostics_csv, trace_csv, OutputDir};
use movmesh::Error;

#[derive(Parser)]
#[command(name = "movmesh", version, about = "Moving-mesh tracer advection over orography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and solver traces.
    Run(Common),
    /// Generate the initial adapted mesh only.
    Mesh(Common),
    /// Run one revolution at several resolutions and fit the order of accuracy.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Comma-separated resolutions; time steps scale as 1/N from the configured pair.
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        resolutions: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Disable the volume-adjustment field A.
    #[arg(long)]
    no_volume_adjust: bool,
    /// Keep the uniform mesh fixed.
    #[arg(long)]
    fixed_mesh: bool,
    #[arg(long, value_parser = ["flat", "smooth", "steep"])]
    orography: Option<String>,
    #[arg(long)]
    revolutions: Option<f64>,
    /// Number of cells per side (N).
    #[arg(long, value_name = "N")]
    seed_scale: Option<usize>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut overrides = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, found `{kv}`")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: String| overrides.push((k.to_string(), v));
        if self.no_volume_adjust {
            push("domain.use_a", "false".into());
        }
        if self.fixed_mesh {
            push("domain.mesh", MeshMode::FixedUniform.as_str().into());
        }
        if let Some(o) = &self.orography {
            push("orography.kind", o.clone());
        }
        if let Some(r) = self.revolutions {
            push("domain.revolutions", format!("{r:?}"));
        }
        if let Some(n) = self.seed_scale {
            push("domain.n", n.to_string());
        }
        load_config(self.config.as_deref(), &overrides)
    }
}

fn write_run(out: &mut OutputDir, config: &ScenarioConfig, run: &RunOutput) -> Result<(), Error> {
    let name = &config.output.name;
    out.write(&format!("{name}_diagnostics.csv"), &diagnostics_csv(&run.diagnostics))?;
    let traces = std::iter::once((0, &run.initial_trace)).chain(run.step_traces.iter().map(|(k, t)| (*k, t)));
    out.write(&format!("{name}_newton.csv"), &trace_csv(traces))?;
    for snap in &run.snapshots {
        out.write_snapshot(name, snap)?;
    }
    Ok(())
}

fn run(common: &Common) -> Result<(), Error> {
    let config = common.load()?;
    let mut out = OutputDir::create(&common.out_dir)?;
    let steps = config.steps();
    let report = (steps / 10).max(1);
    let result = run_scenario_with(&config, |v| {
        if v.step % report == 0 {
            eprintln!(
                "step {:>6}/{steps}  t = {:8.2} s  min A = {:.6}",
                v.step,
                v.time,
                v.state.a.iter().cloned().fold(f64::INFINITY, f64::min)
            );
        }
    });
    let serialised = serialise_config(&config);
    match result {
        Ok(run) => {
            write_run(&mut out, &config, &run)?;
            if let Ok(e) = run.l2_error() {
                println!("relative L2 error after {} steps: {e:.6e}", run.steps_completed);
            }
            out.finish("run", &serialised, "completed")?;
            Ok(())
        }
        Err(failure) => {
            if let Some(partial) = &failure.partial {
                write_run(&mut out, &config, partial)?;
            }
            out.finish("run", &serialised, &format!("failed: {failure}"))?;
            Err(failure.error)
        }
    }
}

fn mesh(common: &Common) -> Result<(), Error> {
    let mut config = common.load()?;
    config.mesh_mode = MeshMode::Moving;
    let mut out = OutputDir::create(&common.out_dir)?;
    let uniform = build_mesh(&config)?;
    let (mesh, _, trace) = initial_mesh(&config, &uniform)?;
    let name = &config.output.name;
    for e in &trace.entries {
        println!(
            "outer {:>2}  residual {:.6e}  inner {:>2}",
            e.outer_iter, e.initial_residual, e.inner_iters
        );
    }
    out.write(&format!("{name}_newton.csv"), &trace_csv([(0, &trace)]))?;
    let rho = movmesh::experiments::init_tracer(&mesh, &config.tracer);
    let a = vec![1.0; rho.len()];
    out.write_snapshot(
        name,
        &Snapshot {
            step: 0,
            time: 0.0,
            rho,
            a,
            mesh,
        },
    )?;
    out.finish("mesh", &serialise_config(&config), "completed")?;
    Ok(())
}

fn convergence(common: &Common, resolutions: &[usize]) -> Result<(), Error> {
    let config = common.load()?;
    let mut out = OutputDir::create(&common.out_dir)?;
    let points = convergence_study(&config, resolutions).map_err(|f| f.error)?;
    let mut table = String::from("n,dt,dx,l2_error\n");
    println!("{:>6} {:>10} {:>10} {:>14}", "N", "dt", "dx", "L2 error");
    for p in &points {
        println!("{:>6} {:>10} {:>10} {:>14.6e}", p.n, p.dt, p.dx, p.error);
        table.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", p.n, p.dt, p.dx, p.error));
    }
    if points.len() >= 2 {
        let order = convergence_order(&points);
        println!("least-squares order: {order:.3}");
        table.push_str(&format!("# order {order:.16e}\n"));
    }
    let name = &config.output.name;
    out.write(&format!("{name}_convergence.csv"), &table)?;
    out.finish("convergence", &serialise_config(&config), "completed")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Mesh(c) => mesh(c),
        Command::Convergence { common, resolutions } => convergence(common, resolutions),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
