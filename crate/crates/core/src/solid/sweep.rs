use std::fmt::Write as _;

use super::{MacroState, MicroResponse, SolidCell, SolveOptions};
use crate::error::{Error, Result};
use crate::macroscale::constitutive::transformed_conductivity;
use crate::tensor::{component_label, parse_component, Mat3};

/// Input varied by a one-factor-at-a-time sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepInput {
    Gradient(usize, usize),
    Pressure,
}

impl SweepInput {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "p0" {
            return Ok(SweepInput::Pressure);
        }
        parse_component(s, "grad_u0")
            .map(|(i, j)| SweepInput::Gradient(i, j))
            .ok_or_else(|| Error::Argument(format!("unknown sweep input {s:?}; use grad_u0_ij or p0")))
    }

    pub fn label(&self) -> String {
        match *self {
            SweepInput::Gradient(i, j) => component_label("grad_u0", i, j),
            SweepInput::Pressure => "p0".into(),
        }
    }

    pub fn state(&self, v: f64) -> MacroState {
        let mut s = MacroState::zero();
        match *self {
            SweepInput::Gradient(i, j) => s.grad_u0[(i, j)] = v,
            SweepInput::Pressure => s.p0 = v,
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub input: f64,
    pub avg_grad_u1: Mat3,
    pub psi_avg: f64,
    pub psi_max: f64,
    /// Diagonal of the transformed conductivity, when a reference conductivity is given.
    pub conductivity: Option<[f64; 3]>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub input: SweepInput,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_tsv(&self) -> String {
        let mut s = self.input.label();
        for i in 0..3 {
            for j in 0..3 {
                let _ = write!(s, "\t{}", component_label("avg_grad_u1", i, j));
            }
        }
        s.push_str("\tpsi_avg\tpsi_max\tK_11\tK_22\tK_33\tstatus\n");
        for r in &self.rows {
            let _ = write!(s, "{:.16e}", r.input);
            for i in 0..3 {
                for j in 0..3 {
                    let _ = write!(s, "\t{:.16e}", r.avg_grad_u1[(i, j)]);
                }
            }
            let _ = write!(s, "\t{:.16e}\t{:.16e}", r.psi_avg, r.psi_max);
            match r.conductivity {
                Some(k) => {
                    let _ = write!(s, "\t{:.16e}\t{:.16e}\t{:.16e}", k[0], k[1], k[2]);
                }
                None => s.push_str("\tnan\tnan\tnan"),
            }
            let status = r
                .error
                .as_deref()
                .map(|e| e.replace(['\t', '\n'], " "))
                .unwrap_or_else(|| "ok".into());
            let _ = writeln!(s, "\t{status}");
        }
        s
    }
}

/// Values `start + k (end - start)/n_steps`, `k = 0..=n_steps`; a single value when the
/// range is empty or `n_steps` is zero.
pub fn sweep_values(start: f64, end: f64, n_steps: usize) -> Vec<f64> {
    if n_steps == 0 || start == end {
        return vec![start];
    }
    (0..=n_steps)
        .map(|k| {
            if k == n_steps {
                end
            } else {
                start + (end - start) * k as f64 / n_steps as f64
            }
        })
        .collect()
}

/// One-factor-at-a-time sweep, warm-starting each point from the previous converged one.
/// Failed points are recorded and the sweep continues from the last converged state.
pub fn oat_sweep(
    cell: &SolidCell<'_>,
    input: SweepInput,
    range: (f64, f64),
    n_steps: usize,
    reference_conductivity: Option<&Mat3>,
    opts: &SolveOptions,
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    let mut last: Option<MicroResponse> = None;
    for v in sweep_values(range.0, range.1, n_steps) {
        let target = input.state(v);
        let result = match &last {
            Some(prev) => {
                let warm = SolveOptions { increments: 2, ..*opts };
                cell.solve_from(&prev.state, cell.free_of(prev), &target, &warm)
            }
            None => cell.solve(&target, opts),
        };
        match result {
            Ok(resp) => {
                let f = Mat3::identity() + target.grad_u0 + resp.avg_grad_u1;
                let conductivity = match reference_conductivity {
                    Some(k) => {
                        let t = transformed_conductivity(&f, k)?;
                        Some([t[(0, 0)], t[(1, 1)], t[(2, 2)]])
                    }
                    None => None,
                };
                rows.push(SweepRow {
                    input: v,
                    avg_grad_u1: resp.avg_grad_u1,
                    psi_avg: resp.psi_avg,
                    psi_max: resp.psi_max,
                    conductivity,
                    error: None,
                });
                last = Some(resp);
            }
            Err(e) => rows.push(SweepRow {
                input: v,
                avg_grad_u1: Mat3::from_element(f64::NAN),
                psi_avg: f64::NAN,
                psi_max: f64::NAN,
                conductivity: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepTable { input, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_cover_range() {
        assert_eq!(sweep_values(0.0, 0.0, 5), vec![0.0]);
        assert_eq!(sweep_values(0.0, 0.2, 0), vec![0.0]);
        let v = sweep_values(0.0, 0.2, 4);
        assert_eq!(v.len(), 5);
        assert_eq!(v[4], 0.2);
    }

    #[test]
    fn input_labels_parse() {
        assert_eq!(SweepInput::parse("grad_u0_12").unwrap(), SweepInput::Gradient(0, 1));
        assert_eq!(SweepInput::parse("p0").unwrap(), SweepInput::Pressure);
        assert!(SweepInput::parse("q").is_err());
        assert_eq!(SweepInput::Gradient(1, 1).label(), "grad_u0_22");
    }
}
