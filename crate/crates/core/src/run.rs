//! Time loop: stepping, sampling, monitors, output and checkpoint/resume.
//!
//! Samples are taken at `t_k = min(k · interval, t_end)`; the step before a
//! sample is shortened to land on it exactly. Step sizes depend only on the
//! current state, so a run resumed from a checkpoint repeats the unbroken
//! run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use crate::base::{eval_metric, MetricField};
use crate::config::{Fault, RunConfig};
use crate::diagnostics::{
    evolution_crosschecks, Baseline, Breach, CrossChecks, DiagnosticsRecord, Monitor, MonitorState, Severity,
};
use crate::error::{FlowError, Result};
use crate::flow::{rescale, FlowOperator, Stepper};
use crate::graph::{graph_quantities, GraphGeometry, GraphState};
use crate::grid::Stencil;
use crate::io::{append_csv, grid_hash, read_csv, write_csv, Checkpoint, Snapshot};

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    ReachedEnd,
    MonitorBreach(Breach),
    Numerical(String),
    /// Stopped by the configured step limit.
    UserStop,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub breaches: Vec<Breach>,
    pub checkpoints: Vec<PathBuf>,
    pub status: Termination,
    pub final_state: GraphState,
    /// Checkpoint of the last valid state, also kept when nothing is written.
    pub last_checkpoint: Checkpoint,
}

/// A configured problem ready to integrate.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: RunConfig,
    pub metric: MetricField,
    pub op: FlowOperator,
    pub hash: u64,
    pub u0: Vec<f64>,
    pub baseline: Baseline,
}

impl Simulation {
    /// Build the grid, metric and initial data. Refuses data whose mean
    /// curvature is not strictly positive.
    pub fn new(config: &RunConfig) -> Result<Self> {
        let grid = config.preset.grid(&config.nodes)?;
        let metric = eval_metric(config.preset, &grid, config.metric_source)?;
        let u0 = config.initial.sample(&config.preset, &grid)?;
        let state = GraphState::from_u(&u0)?;
        let geom = graph_quantities(&state.phi, &metric, &Stencil::new(&grid))?;
        if let Some((node, p)) = geom.points.iter().enumerate().find(|(_, p)| !(p.mean_curvature > 0.0)) {
            return Err(FlowError::NonPositiveMeanCurvature { node, value: p.mean_curvature });
        }
        let baseline = Baseline::capture(&state.phi, &geom, &metric)?;
        let op = FlowOperator::new(&metric);
        let hash = grid_hash(&config.preset, &grid);
        Ok(Simulation { config: config.clone(), metric, op, hash, u0, baseline })
    }

    pub fn initial_state(&self) -> GraphState {
        GraphState::from_u(&self.u0).expect("validated in Simulation::new")
    }

    pub fn monitor(&self) -> Monitor {
        Monitor::new(self.baseline.clone(), &self.config.tolerances, &self.metric)
    }

    fn sample_time(&self, k: u64) -> f64 {
        let s = &self.config.stepping;
        (k as f64 * s.diag_interval).min(s.t_end)
    }

    /// Step size for the current state from the first-stage eigenvalue.
    fn step_size(&self, lambda_max: f64) -> Result<f64> {
        let s = &self.config.stepping;
        let bound = self.op.dt_from_lambda(s.c_cfl, lambda_max)?;
        match s.dt {
            None => Ok(bound),
            Some(dt) if dt <= self.op.dt_from_lambda(1.0, lambda_max)? => Ok(dt),
            Some(dt) => Err(FlowError::UnstableStep { dt, bound }),
        }
    }

    /// Residuals of the evolution equations from two uncommitted probe steps.
    pub fn crosschecks(&self, phi: &[f64], t: f64) -> Result<CrossChecks> {
        let mut st = Stepper::new(self.config.stepping.integrator, phi.len());
        let info = st.begin(&self.op, phi)?;
        let dt = self.step_size(info.lambda_max)?;
        let mut p1 = phi.to_vec();
        st.finish(&self.op, &mut p1, dt)?;
        let mut p2 = p1.clone();
        st.step(&self.op, &mut p2, dt)?;
        evolution_crosschecks([t, t + dt, t + 2.0 * dt], [phi, &p1, &p2], 0, &self.metric)
    }

    fn observe(
        &self,
        monitor: &mut Monitor,
        state: &GraphState,
        dt: f64,
    ) -> Result<(DiagnosticsRecord, Vec<Breach>, GraphGeometry)> {
        let geom = graph_quantities(&state.phi, &self.metric, &Stencil::new(&self.metric.grid))?;
        let nan = f64::NAN;
        let xc = self.crosschecks(&state.phi, state.t).unwrap_or(CrossChecks {
            metric: nan,
            measure: nan,
            rescaled_measure: nan,
            mean_curvature: nan,
            rescaled_phi: nan,
        });
        let (rec, breaches) = monitor.observe(state.t, state.step, dt, &state.phi, &geom, &self.metric, xc);
        Ok((rec, breaches, geom))
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.integrate(self.initial_state(), 0, MonitorState::default(), true)
    }

    pub fn resume(&self, ck: &Checkpoint) -> Result<Trajectory> {
        if ck.grid_hash != self.hash {
            return Err(FlowError::GridMismatch { expected: self.hash, found: ck.grid_hash });
        }
        if ck.phi.len() != self.metric.grid.len() {
            return Err(FlowError::ConfigGeneral("checkpoint/config mismatch: node count differs".into()));
        }
        let mut state = GraphState::new(ck.phi.clone())?;
        state.t = ck.t;
        state.step = ck.step;
        self.integrate(state, ck.sample, ck.monitor, false)
    }

    fn checkpoint_of(&self, state: &GraphState, sample: u64, m: &Monitor) -> Checkpoint {
        Checkpoint {
            grid_hash: self.hash,
            t: state.t,
            step: state.step,
            phi: state.phi.clone(),
            sample,
            monitor: m.state,
        }
    }

    fn integrate(
        &self,
        mut state: GraphState,
        mut k: u64,
        acc: MonitorState,
        emit_initial: bool,
    ) -> Result<Trajectory> {
        let cfg = &self.config;
        let s = &cfg.stepping;
        let out_dir = cfg.output.dir.as_deref();
        if let Some(d) = out_dir {
            fs::create_dir_all(d).map_err(|e| FlowError::io(d, e))?;
        }
        let csv_path = out_dir.map(|d| d.join(&cfg.output.diagnostics));
        if let Some(p) = csv_path.as_deref().filter(|p| p.exists()) {
            if emit_initial {
                fs::remove_file(p).map_err(|e| FlowError::io(p, e))?;
            } else {
                // drop rows an earlier, longer run wrote past the resume point
                let kept: Vec<DiagnosticsRecord> = read_csv(p)?.into_iter().filter(|r| r.t <= state.t).collect();
                write_csv(p, &kept)?;
            }
        }
        let mut monitor = self.monitor();
        monitor.state = acc;
        let mut stepper = Stepper::new(s.integrator, state.phi.len());
        let mut records = Vec::new();
        let mut breaches = Vec::new();
        let mut checkpoints = Vec::new();
        let mut last_good = state.clone();
        let mut last_dt;

        let mut status = None;
        if emit_initial {
            let (rec, br, _) = self.observe(&mut monitor, &state, 0.0)?;
            self.emit(&rec, &state, k, csv_path.as_deref(), true)?;
            records.push(rec);
            breaches.extend(br);
        }

        while status.is_none() && state.t < s.t_end {
            let target = self.sample_time(k + 1);
            let stepped = (|| -> Result<f64> {
                let info = stepper.begin(&self.op, &state.phi)?;
                let mut dt = self.step_size(info.lambda_max)?;
                let landing = state.t + dt >= target;
                if landing {
                    dt = target - state.t;
                }
                stepper.finish(&self.op, &mut state.phi, dt)?;
                state.step += 1;
                state.t = if landing { target } else { state.t + dt };
                Ok(dt)
            })();
            match stepped {
                Ok(dt) => last_dt = dt,
                Err(e) => {
                    status = Some(Termination::Numerical(e.to_string()));
                    state = last_good.clone();
                    break;
                }
            }
            if s.fault_step != 0 && state.step == s.fault_step {
                match s.fault {
                    Fault::None => {}
                    Fault::Nan => state.phi[0] = f64::NAN,
                    Fault::Breach => {
                        // Far enough past the monitor tolerance to be fatal on any grid.
                        let shift = (20.0 * monitor.tolerance).max(1.0);
                        state.phi.iter_mut().for_each(|p| *p += shift);
                    }
                }
            }
            if let Some(node) = state.phi.iter().position(|p| !p.is_finite()) {
                status =
                    Some(Termination::Numerical(format!("non-finite phi at node {node} after step {}", state.step)));
                state = last_good.clone();
                break;
            }
            if state.t >= target {
                k += 1;
                let (rec, br, _) = match self.observe(&mut monitor, &state, last_dt) {
                    Ok(x) => x,
                    Err(e) => {
                        status = Some(Termination::Numerical(e.to_string()));
                        break;
                    }
                };
                let fatal = br.iter().find(|b| b.severity == Severity::Fatal).cloned();
                self.emit(&rec, &state, k, csv_path.as_deref(), false)?;
                records.push(rec);
                breaches.extend(br);
                if s.checkpoint_every > 0 && k.is_multiple_of(u64::from(s.checkpoint_every)) && state.t < s.t_end {
                    if let Some(p) = self.write_checkpoint(&state, k, &monitor)? {
                        checkpoints.push(p);
                    }
                }
                if let Some(b) = fatal {
                    status = Some(Termination::MonitorBreach(b));
                }
            }
            if status.is_none() {
                if let Some(max) = s.max_steps {
                    if state.step >= max && state.t < s.t_end {
                        status = Some(Termination::UserStop);
                    }
                }
            }
            last_good.clone_from(&state);
        }

        let status = status.unwrap_or(Termination::ReachedEnd);
        let ck = self.checkpoint_of(&state, k, &monitor);
        if let Some(p) = self.write_checkpoint(&state, k, &monitor)? {
            checkpoints.push(p);
        }
        if let Some(d) = out_dir {
            for field in &cfg.output.snapshot_fields {
                self.snapshot(field, &state)?.write(&d.join(format!("snapshot_{field}_final.txt")))?;
            }
        }
        Ok(Trajectory { records, breaches, checkpoints, status, final_state: state, last_checkpoint: ck })
    }

    fn write_checkpoint(&self, state: &GraphState, k: u64, m: &Monitor) -> Result<Option<PathBuf>> {
        let Some(d) = self.config.output.dir.as_deref() else { return Ok(None) };
        let path = d.join(format!("checkpoint_{k:05}.wfc"));
        self.checkpoint_of(state, k, m).write(&path)?;
        Ok(Some(path))
    }

    fn emit(
        &self,
        rec: &DiagnosticsRecord,
        state: &GraphState,
        k: u64,
        csv: Option<&Path>,
        initial: bool,
    ) -> Result<()> {
        if let Some(p) = csv {
            append_csv(p, std::slice::from_ref(rec))?;
        }
        let every = self.config.output.snapshot_every;
        if let Some(d) = self.config.output.dir.as_deref() {
            if every > 0 && (initial || k.is_multiple_of(u64::from(every))) {
                for field in &self.config.output.snapshot_fields {
                    self.snapshot(field, state)?.write(&d.join(format!("snapshot_{field}_{k:05}.txt")))?;
                }
            }
        }
        Ok(())
    }

    /// A named field of `state` as a snapshot.
    pub fn snapshot(&self, field: &str, state: &GraphState) -> Result<Snapshot> {
        let n = self.metric.dim();
        let values = match field {
            "phi" => state.phi.clone(),
            "u" => state.u(),
            "u_rescaled" => rescale(&state.phi, state.t, n).u,
            "mean_curvature" => graph_quantities(&state.phi, &self.metric, &Stencil::new(&self.metric.grid))?
                .points
                .iter()
                .map(|p| p.mean_curvature)
                .collect(),
            other => return Err(FlowError::ConfigGeneral(format!("unknown snapshot field `{other}`"))),
        };
        Ok(Snapshot {
            t: state.t,
            dims: self.metric.grid.counts().to_vec(),
            preset: self.config.preset.name().to_string(),
            field: field.to_string(),
            values,
        })
    }
}

pub fn run(config: &RunConfig) -> Result<Trajectory> {
    Simulation::new(config)?.run()
}

pub fn resume(config: &RunConfig, checkpoint: &Path) -> Result<Trajectory> {
    let ck = Checkpoint::read(checkpoint)?;
    Simulation::new(config)?.resume(&ck)
}
