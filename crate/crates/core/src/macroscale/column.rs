//! Confined compression column: boundary conditions, time marching and records.
//!
//! Bottom fixed, lateral normal displacements zero, drainage through the top face only.
//! The top traction `(0, P, 0)` is ramped over `ramp_increments` steps of `Δt/ramp`
//! and then held while the column drains.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::hex;
use crate::fem::{assemble, assemble_raw_residual, assemble_residual, newton_solve, CsrMatrix, DofMap, ElementKernel, NewtonOptions};
use crate::mesh::{generate_column_mesh, tags, Mesh};
use crate::tensor::Vec3;

/// Dofs per node: three displacements then pressure.
pub const NODE_DOFS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnOptions {
    pub height: f64,
    pub breadth: f64,
    pub divisions: [usize; 3],
    /// Top traction along the column axis; negative compresses.
    pub traction: f64,
    pub dt: f64,
    pub ramp_increments: usize,
    pub total_time: f64,
    pub max_steps: usize,
    /// Steady state once the settlement changes by less than this over a step.
    pub steady_tol: f64,
    /// Pressure stabilization coefficient; the element term is `c h²/(C Δt)`.
    pub stabilization: f64,
    pub max_halvings: usize,
    pub newton: NewtonOptions,
    /// Store spatial profiles every this many steps (and at the end); 0 keeps only the end.
    pub profile_every: usize,
}

impl Default for ColumnOptions {
    fn default() -> Self {
        Self {
            height: 7.5,
            breadth: 0.1,
            divisions: [1, 30, 1],
            traction: -0.2,
            dt: 1.5,
            ramp_increments: 10,
            total_time: 3000.0,
            max_steps: 4000,
            steady_tol: 1e-8,
            stabilization: 0.1,
            max_halvings: 6,
            newton: NewtonOptions {
                rel_tol: 1e-10,
                abs_tol: 1e-15,
                max_iter: 25,
                max_halvings: 8,
            },
            profile_every: 0,
        }
    }
}

impl ColumnOptions {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.height > 0.0 && self.breadth > 0.0) {
            bad.push(format!("column dimensions must be positive ({} x {})", self.height, self.breadth));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            bad.push(format!("time step must be positive, got {}", self.dt));
        }
        if self.ramp_increments == 0 {
            bad.push("at least one ramp increment is required".into());
        }
        if !self.traction.is_finite() {
            bad.push("traction must be finite".into());
        }
        if !(self.stabilization >= 0.0) {
            bad.push(format!("stabilization must be non-negative, got {}", self.stabilization));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(bad.join("; ")))
        }
    }
}

/// Mesh, constrained dofs and boundary sets of the column.
pub struct Column {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub height: f64,
    top_faces: Vec<Vec<usize>>,
    pub top_nodes: Vec<usize>,
    pub bottom_nodes: Vec<usize>,
}

impl Column {
    pub fn new(height: f64, breadth: f64, divisions: [usize; 3]) -> Result<Self> {
        let mesh = generate_column_mesh(height, breadth, divisions)?;
        let tol = 1e-9 * height.max(breadth);
        let top_nodes = mesh.nodes_with_tag(tags::TOP);
        let bottom_nodes = mesh.nodes_with_tag(tags::BOTTOM);
        let on = |v: f64, t: f64| (v - t).abs() <= tol;
        let x_side: Vec<usize> = (0..mesh.n_nodes())
            .filter(|&n| on(mesh.nodes[n][0], 0.0) || on(mesh.nodes[n][0], breadth))
            .collect();
        let z_side: Vec<usize> = (0..mesh.n_nodes())
            .filter(|&n| on(mesh.nodes[n][2], 0.0) || on(mesh.nodes[n][2], breadth))
            .collect();
        let mut b = DofMap::builder(mesh.n_nodes(), NODE_DOFS);
        for c in 0..3 {
            b = b.fix_nodes(&bottom_nodes, c, 0.0);
        }
        b = b
            .fix_nodes(&x_side, 0, 0.0)
            .fix_nodes(&z_side, 2, 0.0)
            .fix_nodes(&top_nodes, 3, 0.0);
        let dofmap = b.build()?;
        let mut top_faces = vec![Vec::new(); mesh.n_cells()];
        for f in mesh.faces_with_tag(tags::TOP) {
            top_faces[f.cell].push(f.face);
        }
        Ok(Self {
            mesh,
            dofmap,
            height,
            top_faces,
            top_nodes,
            bottom_nodes,
        })
    }

    pub fn local_dofs(&self, cell: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(8 * NODE_DOFS);
        for &n in &self.mesh.cells[cell] {
            for c in 0..NODE_DOFS {
                d.push(self.dofmap.raw(n, c));
            }
        }
        d
    }

    /// Subtracts `∫_top t Nₐ dA` with `t = (0, traction, 0)` from the local residual.
    pub fn add_traction(&self, cell: usize, traction: f64, r: &mut [f64]) {
        if traction == 0.0 {
            return;
        }
        let x = self.mesh.cell_coords(cell);
        for &face in &self.top_faces[cell] {
            let nodes = hex::FACES[face];
            let xf = nodes.map(|a| Vec3::from(x[a]));
            for fq in hex::face_points() {
                let area = hex::face_area_vector(&xf, fq).norm();
                for (c, &a) in nodes.iter().enumerate() {
                    r[NODE_DOFS * a + 1] -= traction * fq.n[c] * area;
                }
            }
        }
    }

    /// Pressure-stabilization length of a cell.
    pub fn cell_size(&self, cell: usize) -> f64 {
        self.mesh.cell_volume(cell).cbrt()
    }

    pub fn settlement(&self, raw: &[f64]) -> f64 {
        self.top_nodes
            .iter()
            .map(|&n| -raw[self.dofmap.raw(n, 1)])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest nodal pressure, its ordinate, and the largest bottom pressure.
    pub fn pressure_extremes(&self, raw: &[f64]) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for n in 0..self.mesh.n_nodes() {
            let p = raw[self.dofmap.raw(n, 3)];
            if p > best.0 {
                best = (p, self.mesh.nodes[n][1]);
            }
        }
        let bottom = self
            .bottom_nodes
            .iter()
            .map(|&n| raw[self.dofmap.raw(n, 3)])
            .fold(f64::NEG_INFINITY, f64::max);
        (best.0, best.1, bottom)
    }

    /// Nodes on the `x = z = 0` edge, sorted by ordinate.
    pub fn axis_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.mesh.n_nodes())
            .filter(|&n| self.mesh.nodes[n][0].abs() < 1e-12 && self.mesh.nodes[n][2].abs() < 1e-12)
            .collect();
        v.sort_by(|&a, &b| self.mesh.nodes[a][1].total_cmp(&self.mesh.nodes[b][1]));
        v
    }
}

/// Cell-averaged constitutive quantities for spatial profiles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellValues {
    pub y: f64,
    pub k11: f64,
    pub k22: f64,
    pub f11: f64,
    pub f22: f64,
    pub f33: f64,
    pub h22: f64,
    pub m2222: f64,
    pub q22: f64,
    /// Relative fluid velocity along the column axis.
    pub w2: f64,
}

/// A macroscale constitutive model marched by [`march`].
pub trait ColumnModel: Sync {
    type Kernel<'a>: ElementKernel
    where
        Self: 'a;

    fn column(&self) -> &Column;

    /// Kernel for the step from `prev` (raw) with top traction `traction` over `dt`.
    fn kernel<'a>(&'a self, prev: &'a [f64], traction: f64, dt: f64) -> Self::Kernel<'a>;

    /// `∫ s dV`, the pore-volume decrease rate of the step ending at `raw`.
    fn storage_rate(&self, raw: &[f64], prev: &[f64], dt: f64) -> Result<f64>;

    /// Accepts the converged state `raw` as the start of the next step.
    fn commit(&mut self, raw: &[f64]) -> Result<()>;

    fn cell_values(&self, raw: &[f64]) -> Result<Vec<CellValues>>;

    /// Quadrature points where `F̄₂₂` leaves `[1 + ∇u₀₂₂, 1]` (compression diagnostic).
    fn bracket_violations(&self) -> usize {
        0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub traction: f64,
    pub settlement: f64,
    pub p_max: f64,
    pub p_max_y: f64,
    pub p_bottom: f64,
    /// Cumulative fluid volume leaving through the top face.
    pub drained_volume: f64,
    /// Cumulative pore-volume decrease from the storage terms.
    pub pore_volume_change: f64,
    pub iterations: usize,
    pub bracket_violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeValues {
    pub y: f64,
    pub p: f64,
    pub settlement: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub step: usize,
    pub time: f64,
    pub nodes: Vec<NodeValues>,
    pub cells: Vec<CellValues>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<StepRecord>,
    pub profiles: Vec<Profile>,
    /// True when the run reached steady state; false when it stopped at the time or
    /// step limit.
    pub steady: bool,
}

const HISTORY_HEADER: &str =
    "time\ttraction\tsettlement\tp_max\tp_max_y\tp_bottom\tdrained_volume\tpore_volume_change\titerations\tbracket_violations";

impl TimeSeries {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn history_tsv(&self) -> String {
        let mut s = format!("{HISTORY_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}\t{}",
                r.time,
                r.traction,
                r.settlement,
                r.p_max,
                r.p_max_y,
                r.p_bottom,
                r.drained_volume,
                r.pore_volume_change,
                r.iterations,
                r.bracket_violations
            );
        }
        s
    }

    pub fn parse_history(text: &str) -> Result<Vec<StepRecord>> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == HISTORY_HEADER => {}
            _ => return Err(Error::parse(1, "missing time-series header")),
        }
        let mut out = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 10 {
                return Err(Error::parse(i + 1, format!("expected 10 fields, found {}", f.len())));
            }
            let num = |k: usize| -> Result<f64> { f[k].parse().map_err(|_| Error::parse(i + 1, format!("bad number {:?}", f[k]))) };
            let int = |k: usize| -> Result<usize> { f[k].parse().map_err(|_| Error::parse(i + 1, format!("bad count {:?}", f[k]))) };
            out.push(StepRecord {
                time: num(0)?,
                traction: num(1)?,
                settlement: num(2)?,
                p_max: num(3)?,
                p_max_y: num(4)?,
                p_bottom: num(5)?,
                drained_volume: num(6)?,
                pore_volume_change: num(7)?,
                iterations: int(8)?,
                bracket_violations: int(9)?,
            });
        }
        Ok(out)
    }

    pub fn nodal_profiles_tsv(&self) -> String {
        let mut s = String::from("step\ttime\ty\tp\tsettlement\n");
        for pr in &self.profiles {
            for n in &pr.nodes {
                let _ = writeln!(
                    s,
                    "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
                    pr.step, pr.time, n.y, n.p, n.settlement
                );
            }
        }
        s
    }

    pub fn cell_profiles_tsv(&self) -> String {
        let mut s = String::from("step\ttime\ty\tK_11\tK_22\tFbar_11\tFbar_22\tFbar_33\tgrad_u0_22\tM_2222\tQ_22\tw_2\n");
        for pr in &self.profiles {
            for c in &pr.cells {
                let _ = writeln!(
                    s,
                    "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
                    pr.step, pr.time, c.y, c.k11, c.k22, c.f11, c.f22, c.f33, c.h22, c.m2222, c.q22, c.w2
                );
            }
        }
        s
    }

    /// First time the bottom pressure falls to `fraction` of its peak after the peak.
    pub fn decay_time(&self, fraction: f64) -> Option<f64> {
        let (peak_i, peak) = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.p_bottom))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if !(peak > 0.0) {
            return None;
        }
        self.records[peak_i..]
            .iter()
            .find(|r| r.p_bottom <= fraction * peak)
            .map(|r| r.time)
    }
}

fn solve_step<M: ColumnModel>(model: &M, prev: &[f64], traction: f64, dt: f64, opts: &NewtonOptions) -> Result<(Vec<f64>, usize)> {
    let col = model.column();
    let kernel = model.kernel(prev, traction, dt);
    let n_cells = col.mesh.n_cells();
    let mut problem = |x: &[f64], with_jac: bool| -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        let raw = col.dofmap.expand(x);
        if with_jac {
            let s = assemble(n_cells, &col.dofmap, &kernel, &raw)?;
            Ok((s.rhs.iter().map(|v| -v).collect(), Some(s.matrix)))
        } else {
            Ok((assemble_residual(n_cells, &col.dofmap, &kernel, &raw)?, None))
        }
    };
    let rep = newton_solve(&mut problem, col.dofmap.restrict(prev), opts)?;
    Ok((col.dofmap.expand(&rep.x), rep.iterations))
}

struct Marcher {
    raw: Vec<f64>,
    time: f64,
    drained: f64,
    pore: f64,
}

impl Marcher {
    /// Advances by `dt`, splitting the step in halves on failure up to `depth` times.
    fn advance<M: ColumnModel>(
        &mut self,
        model: &mut M,
        dt: f64,
        traction_at: &dyn Fn(f64) -> f64,
        opts: &ColumnOptions,
        depth: usize,
    ) -> Result<usize> {
        let t = self.time + dt;
        let traction = traction_at(t);
        match solve_step(model, &self.raw, traction, dt, &opts.newton) {
            Ok((raw, its)) => {
                let outflow: f64 = {
                    let kernel = model.kernel(&self.raw, traction, dt);
                    let col = model.column();
                    let reactions = assemble_raw_residual(col.mesh.n_cells(), &col.dofmap, &kernel, &raw)?;
                    col.top_nodes.iter().map(|&n| reactions[col.dofmap.raw(n, 3)]).sum()
                };
                let storage = model.storage_rate(&raw, &self.raw, dt)?;
                model.commit(&raw)?;
                self.drained += outflow * dt;
                self.pore += storage * dt;
                self.raw = raw;
                self.time = t;
                Ok(its)
            }
            Err(e) if depth < opts.max_halvings => {
                let _ = e;
                let a = self.advance(model, 0.5 * dt, traction_at, opts, depth + 1)?;
                let b = self.advance(model, 0.5 * dt, traction_at, opts, depth + 1)?;
                Ok(a + b)
            }
            Err(e) => Err(Error::Run {
                time: t,
                reason: format!("step of {dt:.3e} failed after {depth} halvings: {e}"),
            }),
        }
    }
}

fn profile<M: ColumnModel>(model: &M, raw: &[f64], step: usize, time: f64) -> Result<Profile> {
    let col = model.column();
    let nodes = col
        .axis_nodes()
        .into_iter()
        .map(|n| NodeValues {
            y: col.mesh.nodes[n][1],
            p: raw[col.dofmap.raw(n, 3)],
            settlement: -raw[col.dofmap.raw(n, 1)],
        })
        .collect();
    Ok(Profile {
        step,
        time,
        nodes,
        cells: model.cell_values(raw)?,
    })
}

/// Marches `model` through the ramp and the drainage phase. On a step failure the
/// series recorded so far is returned with the error.
pub fn march<M: ColumnModel>(model: &mut M, opts: &ColumnOptions) -> (TimeSeries, Option<Error>) {
    let mut series = TimeSeries::default();
    if let Err(e) = opts.validate() {
        return (series, Some(e));
    }
    let n_raw = model.column().dofmap.n_raw();
    let ramp_time = opts.dt;
    let p = opts.traction;
    let traction_at = move |t: f64| p * (t / ramp_time).min(1.0);
    let mut m = Marcher {
        raw: model.column().dofmap.expand(&model.column().dofmap.zero_free()),
        time: 0.0,
        drained: 0.0,
        pore: 0.0,
    };
    debug_assert_eq!(m.raw.len(), n_raw);
    let ramp_dt = opts.dt / opts.ramp_increments as f64;
    let mut step = 0;
    let mut last_settlement = 0.0;
    loop {
        let ramping = step < opts.ramp_increments;
        let dt = if ramping { ramp_dt } else { opts.dt };
        if !ramping && (m.time >= opts.total_time - 1e-12 || step >= opts.max_steps) {
            break;
        }
        let its = match m.advance(model, dt, &traction_at, opts, 0) {
            Ok(i) => i,
            Err(e) => {
                if let Ok(pr) = profile(model, &m.raw, step, m.time) {
                    series.profiles.push(pr);
                }
                return (series, Some(e));
            }
        };
        step += 1;
        let col = model.column();
        let settlement = col.settlement(&m.raw);
        let (p_max, p_max_y, p_bottom) = col.pressure_extremes(&m.raw);
        series.records.push(StepRecord {
            time: m.time,
            traction: traction_at(m.time),
            settlement,
            p_max,
            p_max_y,
            p_bottom,
            drained_volume: m.drained,
            pore_volume_change: m.pore,
            iterations: its,
            bracket_violations: model.bracket_violations(),
        });
        if opts.profile_every > 0 && step % opts.profile_every == 0 {
            match profile(model, &m.raw, step, m.time) {
                Ok(pr) => series.profiles.push(pr),
                Err(e) => return (series, Some(e)),
            }
        }
        let change = (settlement - last_settlement).abs();
        last_settlement = settlement;
        if !ramping && step > opts.ramp_increments && change < opts.steady_tol {
            series.steady = true;
            break;
        }
    }
    if series.profiles.last().map(|p| p.step) != Some(step) {
        match profile(model, &m.raw, step, m.time) {
            Ok(pr) => series.profiles.push(pr),
            Err(e) => return (series, Some(e)),
        }
    }
    (series, None)
}

/// Cell centre ordinate.
pub(crate) fn cell_centre_y(mesh: &Mesh, cell: usize) -> f64 {
    mesh.cells[cell].iter().map(|&n| mesh.nodes[n][1]).sum::<f64>() / 8.0
}

/// Displacement gradient, pressure and pressure gradient at a quadrature point from a
/// local vector in the `4a + c` layout.
pub(crate) fn point_fields(local: &[f64], n: &[f64; 8], g: &[[f64; 3]; 8]) -> (crate::tensor::Mat3, f64, Vec3) {
    let mut h = crate::tensor::Mat3::zeros();
    let mut p = 0.0;
    let mut gp = Vec3::zeros();
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] += local[NODE_DOFS * a + i] * g[a][j];
            }
            gp[i] += local[NODE_DOFS * a + 3] * g[a][i];
        }
        p += local[NODE_DOFS * a + 3] * n[a];
    }
    (h, p, gp)
}
