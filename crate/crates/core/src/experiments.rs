//! Solid-body rotation of a tracer over a hill and a valley.
//!
//! The velocity comes from a stream function that rotates rigidly inside
//! `R_i`, decays linearly to rest at `R_o`, and is constant beyond. One
//! revolution of the rigid core takes `pi / Omega` seconds, after which the
//! exact solution equals the initial condition.

use std::f64::consts::PI;

use crate::advection::{face_fluxes_from_stream, step, AdjustedState, StepSettings};
use crate::error::{Error, Result};
use crate::geometry::{ColumnMesh, CourantField, OrographyKind, OrographySpec, Point2};
use crate::monge_ampere::{
    cell_centres, mesh_from_potential, solve_monge_ampere, Grid, MeshPotential, MonitorField, NewtonSettings,
    NewtonTrace,
};
use crate::sparse_linear::SolverControls;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialCondition {
    CosineBubble,
    Uniform,
}

impl InitialCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialCondition::CosineBubble => "cosine_bubble",
            InitialCondition::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for InitialCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cosine_bubble" | "cosine" | "bubble" => Ok(InitialCondition::CosineBubble),
            "uniform" => Ok(InitialCondition::Uniform),
            other => Err(format!("unknown initial condition `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshMode {
    FixedUniform,
    Moving,
}

impl MeshMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MeshMode::FixedUniform => "fixed",
            MeshMode::Moving => "moving",
        }
    }
}

impl std::str::FromStr for MeshMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" | "fixed_uniform" => Ok(MeshMode::FixedUniform),
            "moving" => Ok(MeshMode::Moving),
            other => Err(format!("unknown mesh mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    /// Omega (s^-1); the rigid core turns at twice this rate.
    pub omega: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl FlowSpec {
    pub fn for_domain(half_length: f64) -> Self {
        Self {
            omega: PI / 600.0,
            inner_radius: 0.76 * half_length,
            outer_radius: half_length,
        }
    }

    /// Time for the rigid core to complete one revolution.
    pub fn period(&self) -> f64 {
        PI / self.omega
    }

    pub fn stream_function(&self, p: Point2) -> f64 {
        stream_function(p, self.omega, self.inner_radius, self.outer_radius)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracerSpec {
    pub initial: InitialCondition,
    pub centre: Point2,
    pub radius: f64,
}

impl TracerSpec {
    pub fn for_domain(initial: InitialCondition, half_length: f64) -> Self {
        Self {
            initial,
            centre: [0.0, half_length / 2.0],
            radius: half_length / 5.0,
        }
    }

    /// The cosine bubble, whatever `initial` says.
    pub fn bubble(&self, p: Point2) -> f64 {
        let r = (p[0] - self.centre[0]).hypot(p[1] - self.centre[1]);
        if r <= self.radius {
            0.5 * (1.0 + (PI * r / self.radius).cos())
        } else {
            0.0
        }
    }

    pub fn density(&self, p: Point2) -> f64 {
        match self.initial {
            InitialCondition::CosineBubble => self.bubble(p),
            InitialCondition::Uniform => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSettings {
    pub r_max: f64,
    /// Number of equivalent (1, -2, 1) filter passes.
    pub smoothing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub initial_outer: usize,
    pub step_outer: usize,
    pub inner_max_iter: usize,
    pub inner_rel_tol: f64,
    pub inner_abs_tol: f64,
    pub regularisation: f64,
    pub early_exit: f64,
}

impl SolverSettings {
    pub fn newton(&self, max_outer: usize) -> NewtonSettings {
        NewtonSettings {
            max_outer,
            inner: SolverControls::new(self.inner_rel_tol, self.inner_abs_tol, self.inner_max_iter),
            delta: self.regularisation,
            early_exit: self.early_exit,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSettings {
    pub name: String,
    /// Steps between diagnostics rows and snapshots; the final step is always kept.
    pub cadence: usize,
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub dt: f64,
    pub half_length: f64,
    pub height: f64,
    pub revolutions: f64,
    pub mesh_mode: MeshMode,
    pub volume_adjustment: bool,
    pub alpha: f64,
    pub orography: OrographySpec,
    pub tracer: TracerSpec,
    pub flow: FlowSpec,
    pub monitor: MonitorSettings,
    pub solver: SolverSettings,
    pub output: OutputSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::control()
    }
}

impl ScenarioConfig {
    /// The control run: N = 100, dt = 0.5 s, smooth orography, moving mesh.
    pub fn control() -> Self {
        Self::for_domain(5000.0, 1000.0)
    }

    /// Control-run settings with geometry scaled to the half-length.
    pub fn for_domain(half_length: f64, height: f64) -> Self {
        Self {
            n: 100,
            dt: 0.5,
            half_length,
            height,
            revolutions: 1.0,
            mesh_mode: MeshMode::Moving,
            volume_adjustment: true,
            alpha: 0.5,
            orography: OrographySpec::for_domain(OrographyKind::SmoothCosine, half_length),
            tracer: TracerSpec::for_domain(InitialCondition::CosineBubble, half_length),
            flow: FlowSpec::for_domain(half_length),
            monitor: MonitorSettings {
                r_max: 4.0,
                smoothing: 20.0,
            },
            solver: SolverSettings {
                initial_outer: 9,
                step_outer: 4,
                inner_max_iter: 10,
                inner_rel_tol: 0.01,
                inner_abs_tol: 1e-4,
                regularisation: 1e-5,
                early_exit: 1e-10,
            },
            output: OutputSettings {
                name: "control".into(),
                cadence: 50,
                snapshots: true,
            },
        }
    }

    pub fn steps(&self) -> usize {
        (self.revolutions * self.flow.period() / self.dt).round() as usize
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n, self.half_length)
    }

    /// Largest advective Courant number: rigid-core speed, amplified by the
    /// thinnest column over the hill.
    pub fn advective_courant(&self) -> f64 {
        let speed = 2.0 * self.flow.omega * self.flow.inner_radius;
        let thinning = self.height / (self.height - self.orography.max_abs_height());
        speed * thinning * self.dt / (2.0 * self.half_length / self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return fail("N must be ≥ 2".into());
        }
        if !(self.dt > 0.0) {
            return fail("domain.dt must be positive".into());
        }
        if !(self.half_length > 0.0) {
            return fail("domain.half_length must be positive".into());
        }
        if !(self.height > self.orography.max_abs_height()) {
            return fail("domain.height must exceed the orography height".into());
        }
        if !(self.revolutions > 0.0) {
            return fail("domain.revolutions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("domain.alpha must lie in [0, 1]".into());
        }
        let flow = &self.flow;
        if !(flow.inner_radius > 0.0 && flow.inner_radius < flow.outer_radius && flow.outer_radius <= self.half_length)
        {
            return fail("flow radii must satisfy 0 < inner_radius < outer_radius ≤ half_length".into());
        }
        if !(flow.omega > 0.0) {
            return fail("flow.omega must be positive".into());
        }
        if self.advective_courant() >= 1.0 {
            return fail(format!(
                "domain.dt gives an advective Courant number of {:.3}, which must stay below 1",
                self.advective_courant()
            ));
        }
        if !(self.monitor.r_max >= 1.0) {
            return fail("monitor.r_max must be at least 1".into());
        }
        if !(self.monitor.smoothing >= 0.0) {
            return fail("monitor.smoothing must be non-negative".into());
        }
        if self.solver.inner_max_iter == 0 || self.solver.initial_outer == 0 || self.solver.step_outer == 0 {
            return fail("solver iteration limits must be positive".into());
        }
        if self.output.cadence == 0 {
            return fail("output.cadence must be positive".into());
        }
        Ok(())
    }
}

/// Stream function about the domain centre: `Omega r^2` in the rigid core,
/// then a quadratic blend reaching the constant `Omega R_i R_o` at `R_o`.
pub fn stream_function(p: Point2, omega: f64, inner: f64, outer: f64) -> f64 {
    let r = p[0].hypot(p[1]);
    if r <= inner {
        omega * r * r
    } else if r <= outer {
        omega * inner * (inner + (r - inner) * ((outer - r) / (outer - inner) + 1.0))
    } else {
        omega * inner * outer
    }
}

pub fn build_mesh(config: &ScenarioConfig) -> Result<ColumnMesh> {
    ColumnMesh::uniform(config.n, config.half_length, config.height, config.orography.clone())
}

fn horizontal_centroids(mesh: &ColumnMesh) -> impl Iterator<Item = Point2> + '_ {
    mesh.centroids().iter().map(|c| [c.x, c.y])
}

/// Initial density at the cell centroids.
pub fn init_tracer(mesh: &ColumnMesh, tracer: &TracerSpec) -> Vec<f64> {
    horizontal_centroids(mesh).map(|p| tracer.density(p)).collect()
}

/// Relative L2 error weighted by the adjusted cell volume.
pub fn l2_error(rho: &[f64], exact: &[f64], mesh: &ColumnMesh, a: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..rho.len() {
        let w = a[c] * mesh.volumes()[c];
        num += w * (rho[c] - exact[c]).powi(2);
        den += w * exact[c].powi(2);
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num / den).sqrt())
}

/// Conservation and positivity summary at one output time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub total_v: f64,
    pub total_av: f64,
    pub total_rho_v: f64,
    pub total_rho_av: f64,
    pub min_a: f64,
    pub max_a: f64,
    pub max_courant: f64,
    pub min_cell_volume: f64,
}

impl DiagnosticsRecord {
    pub fn measure(time: f64, state: &AdjustedState, mesh: &ColumnMesh, courant: Option<&CourantField>) -> Self {
        let v = mesh.volumes();
        let mut r = DiagnosticsRecord {
            time,
            total_v: 0.0,
            total_av: 0.0,
            total_rho_v: 0.0,
            total_rho_av: 0.0,
            min_a: f64::INFINITY,
            max_a: f64::NEG_INFINITY,
            max_courant: courant.map_or(0.0, |c| c.max_abs()),
            min_cell_volume: mesh.min_volume(),
        };
        for c in 0..v.len() {
            let a = state.a[c];
            let rho = state.rho[c];
            r.total_v += v[c];
            r.total_av += a * v[c];
            r.total_rho_v += rho * v[c];
            r.total_rho_av += rho * a * v[c];
            r.min_a = r.min_a.min(a);
            r.max_a = r.max_a.max(a);
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: Vec<f64>,
    pub a: Vec<f64>,
    pub mesh: ColumnMesh,
}

/// What an observer sees after each step (and once before the first).
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a AdjustedState,
    pub mesh: &'a ColumnMesh,
    pub courant: Option<&'a CourantField>,
    pub trace: Option<&'a NewtonTrace>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Newton trace of the initial mesh generation (empty on fixed meshes).
    pub initial_trace: NewtonTrace,
    /// Newton trace of every time step's mesh solve, keyed by step number.
    pub step_traces: Vec<(usize, NewtonTrace)>,
    pub steps_completed: usize,
    pub state: AdjustedState,
    pub mesh: ColumnMesh,
    /// Initial density sampled on the final mesh, the exact solution after
    /// whole revolutions.
    pub exact: Vec<f64>,
}

impl RunOutput {
    pub fn l2_error(&self) -> Result<f64> {
        l2_error(&self.state.rho, &self.exact, &self.mesh, &self.state.a)
    }
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<Box<RunOutput>>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.partial {
            Some(p) => write!(f, "{} (after {} steps)", self.error, p.steps_completed),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, partial: None }
    }
}

/// Generates the initial adapted mesh for the analytic initial tracer.
///
/// Every outer iteration samples the tracer at the current cell centres and
/// rebuilds the monitor from it, the same pipeline used on every time step.
pub fn initial_mesh(config: &ScenarioConfig, uniform: &ColumnMesh) -> Result<(ColumnMesh, MeshPotential, NewtonTrace)> {
    let grid = config.grid();
    let settings = config.solver.newton(config.solver.initial_outer);
    let (phi, trace) = solve_monge_ampere(
        MeshPotential::zeros(grid),
        |phi| {
            let centres = cell_centres(&mesh_from_potential(phi), grid.n);
            let rho: Vec<f64> = centres.iter().map(|p| config.tracer.bubble(*p)).collect();
            Ok(MonitorField::from_density(&rho, grid, config.monitor.r_max, config.monitor.smoothing)?.m3)
        },
        &settings,
    )?;
    let mesh = uniform.with_vertices(mesh_from_potential(&phi))?;
    Ok((mesh, phi, trace))
}

fn stream_at_vertices(mesh: &ColumnMesh, flow: &FlowSpec) -> Vec<f64> {
    mesh.vertices().iter().map(|p| flow.stream_function(*p)).collect()
}

pub fn run_scenario(config: &ScenarioConfig) -> std::result::Result<RunOutput, RunFailure> {
    run_scenario_with(config, |_| {})
}

/// Runs a scenario, calling `observer` before the first step and after every step.
pub fn run_scenario_with<F>(config: &ScenarioConfig, mut observer: F) -> std::result::Result<RunOutput, RunFailure>
where
    F: FnMut(&StepView),
{
    config.validate()?;
    let grid = config.grid();
    let uniform = build_mesh(config)?;
    let moving = config.mesh_mode == MeshMode::Moving;
    let (mut mesh, mut phi, initial_trace) = if moving {
        initial_mesh(config, &uniform)?
    } else {
        (uniform, MeshPotential::zeros(grid), NewtonTrace::default())
    };

    let mut state = AdjustedState::new(init_tracer(&mesh, &config.tracer));
    // a uniform tracer carries no curvature, so the bubble steers the mesh
    let driver_is_companion = moving && config.tracer.initial == InitialCondition::Uniform;
    if driver_is_companion {
        let bubble = horizontal_centroids(&mesh).map(|p| config.tracer.bubble(p)).collect();
        state.companions.push(bubble);
    }

    let steps = config.steps();
    let settings = StepSettings {
        dt: config.dt,
        alpha: config.alpha,
        volume_adjustment: config.volume_adjustment,
    };
    let newton = config.solver.newton(config.solver.step_outer);
    let mut out = RunOutput {
        diagnostics: vec![DiagnosticsRecord::measure(0.0, &state, &mesh, None)],
        snapshots: Vec::new(),
        initial_trace,
        step_traces: Vec::new(),
        steps_completed: 0,
        state: state.clone(),
        mesh: mesh.clone(),
        exact: Vec::new(),
    };
    if config.output.snapshots {
        out.snapshots.push(Snapshot {
            step: 0,
            time: 0.0,
            rho: state.rho.clone(),
            a: state.a.clone(),
            mesh: mesh.clone(),
        });
    }
    observer(&StepView {
        step: 0,
        time: 0.0,
        state: &state,
        mesh: &mesh,
        courant: None,
        trace: None,
    });

    let mut flux_old = face_fluxes_from_stream(&stream_at_vertices(&mesh, &config.flow), &mesh);
    let fail = |error: Error, mut out: RunOutput, state: AdjustedState, mesh: ColumnMesh| {
        out.state = state;
        out.mesh = mesh;
        RunFailure {
            error,
            partial: Some(Box::new(out)),
        }
    };

    for k in 1..=steps {
        let time = k as f64 * config.dt;
        let (new_mesh, trace) = if moving {
            let driver = if driver_is_companion {
                &state.companions[0]
            } else {
                &state.rho
            };
            let adapted = MonitorField::from_density(driver, grid, config.monitor.r_max, config.monitor.smoothing)
                .and_then(|m| solve_monge_ampere(phi.clone(), |_| Ok(m.m3.clone()), &newton))
                .and_then(|(p, t)| mesh.with_vertices(mesh_from_potential(&p)).map(|m| (m, p, t)));
            match adapted {
                Ok((m, p, t)) => {
                    phi = p;
                    (Some(m), Some(t))
                }
                Err(e) => return Err(fail(e, out, state, mesh)),
            }
        } else {
            (None, None)
        };
        let target = new_mesh.as_ref().unwrap_or(&mesh);
        let flux_new = if moving {
            face_fluxes_from_stream(&stream_at_vertices(target, &config.flow), target)
        } else {
            flux_old.clone()
        };
        let advanced = match step(&state, &mesh, target, &flux_old, &flux_new, &settings) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, out, state, mesh)),
        };
        state = advanced.state;
        if let Some(m) = new_mesh {
            mesh = m;
        }
        flux_old = flux_new;
        out.steps_completed = k;
        let record_now = k % config.output.cadence == 0 || k == steps;
        if record_now {
            out.diagnostics
                .push(DiagnosticsRecord::measure(time, &state, &mesh, Some(&advanced.courant)));
            if config.output.snapshots {
                out.snapshots.push(Snapshot {
                    step: k,
                    time,
                    rho: state.rho.clone(),
                    a: state.a.clone(),
                    mesh: mesh.clone(),
                });
            }
        }
        observer(&StepView {
            step: k,
            time,
            state: &state,
            mesh: &mesh,
            courant: Some(&advanced.courant),
            trace: trace.as_ref(),
        });
        if let Some(t) = trace {
            out.step_traces.push((k, t));
        }
    }
    out.exact = init_tracer(&mesh, &config.tracer);
    out.state = state;
    out.mesh = mesh;
    Ok(out)
}

/// One resolution of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    pub dt: f64,
    pub dx: f64,
    pub error: f64,
}

/// Time step paired with a resolution at fixed Courant number, anchored at the
/// base configuration (N = 100 with 0.5 s pairs N = 50 with 1 s).
pub fn paired_time_step(base: &ScenarioConfig, n: usize) -> f64 {
    base.dt * base.n as f64 / n as f64
}

/// Runs `base` for one revolution at each resolution and measures the L2 error.
pub fn convergence_study(
    base: &ScenarioConfig,
    resolutions: &[usize],
) -> std::result::Result<Vec<ConvergencePoint>, RunFailure> {
    let mut points = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let mut config = base.clone();
        config.n = n;
        config.dt = paired_time_step(base, n);
        config.revolutions = 1.0;
        config.output.snapshots = false;
        let out = run_scenario(&config)?;
        points.push(ConvergencePoint {
            n,
            dt: config.dt,
            dx: 2.0 * config.half_length / n as f64,
            error: out.l2_error()?,
        });
    }
    Ok(points)
}

/// Least-squares slope of `log(error)` against `log(dx)`.
pub fn convergence_order(points: &[ConvergencePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.dx.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stream_function_branches() {
        let f = FlowSpec::for_domain(5000.0);
        assert_eq!(f.stream_function([0.0, 0.0]), 0.0);
        let outside = f.stream_function([5000.0, 10.0]);
        assert_relative_eq!(outside, f.omega * f.inner_radius * f.outer_radius, max_relative = 1e-15);
        assert_relative_eq!(f.period(), 600.0, max_relative = 1e-15);
    }

    #[test]
    fn tracer_initial_values() {
        let t = TracerSpec::for_domain(InitialCondition::CosineBubble, 5000.0);
        assert_eq!(t.density([0.0, 2500.0]), 1.0);
        assert_eq!(t.density([0.0, 2500.0 + 1001.0]), 0.0);
        let u = TracerSpec::for_domain(InitialCondition::Uniform, 5000.0);
        assert_eq!(u.density([123.0, -40.0]), 1.0);
    }

    #[test]
    fn l2_error_cases() {
        let mesh = ColumnMesh::uniform(4, 1.0, 1.0, OrographySpec::for_domain(OrographyKind::Flat, 1.0)).unwrap();
        let exact: Vec<f64> = (0..16).map(|k| 1.0 + k as f64).collect();
        let a = vec![1.0; 16];
        assert_eq!(l2_error(&exact, &exact, &mesh, &a).unwrap(), 0.0);
        let doubled: Vec<f64> = exact.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(
            l2_error(&doubled, &exact, &mesh, &a).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert!(matches!(l2_error(&exact, &[0.0; 16], &mesh, &a), Err(Error::ZeroNorm)));
    }

    #[test]
    fn control_defaults_validate() {
        let c = ScenarioConfig::control();
        c.validate().unwrap();
        assert_eq!(c.steps(), 1200);
        let mut bad = c.clone();
        bad.n = 0;
        assert!(matches!(bad.validate(), Err(Error::Config(m)) if m == "N must be ≥ 2"));
        let mut fast = c;
        fast.dt = 10.0;
        assert!(fast.validate().is_err());
    }

    #[test]
    fn convergence_order_of_exact_power_law() {
        let pts: Vec<ConvergencePoint> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let dx = 1.0 / n as f64;
                ConvergencePoint {
                    n,
                    dt: dx,
                    dx,
                    error: 3.0 * dx.powf(1.7),
                }
            })
            .collect();
        assert_relative_eq!(convergence_order(&pts), 1.7, max_relative = 1e-12);
    }
}
