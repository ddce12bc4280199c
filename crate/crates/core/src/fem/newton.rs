use super::linsolve::LinearSolver;
use super::sparse::{norm, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_iter: 25,
            max_halvings: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Residual norms, starting with the initial guess.
    pub history: Vec<f64>,
}

pub trait NewtonProblem {
    /// Residual at `x` and, when `with_jacobian`, its Jacobian.
    fn evaluate(&mut self, x: &[f64], with_jacobian: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)>;
}

impl<F> NewtonProblem for F
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)>,
{
    fn evaluate(&mut self, x: &[f64], with_jacobian: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        self(x, with_jacobian)
    }
}

fn jacobian(j: Option<CsrMatrix>) -> Result<CsrMatrix> {
    j.ok_or_else(|| Error::Argument("residual routine returned no Jacobian".into()))
}

/// Damped Newton iteration. Returns the first iterate with
/// `‖R‖ ≤ max(rel_tol ‖R₀‖, abs_tol)`. When a full step increases the residual norm (or
/// leaves the admissible set) the step is halved up to `max_halvings` times.
pub fn newton_solve<P: NewtonProblem>(problem: &mut P, x0: Vec<f64>, opts: &NewtonOptions) -> Result<NewtonReport> {
    let mut solver = LinearSolver::new();
    let mut x = x0;
    let (mut r, j) = problem.evaluate(&x, true)?;
    let mut jac = jacobian(j)?;
    let mut rn = norm(&r);
    let mut history = vec![rn];
    let target = (opts.rel_tol * rn).max(opts.abs_tol);
    if rn <= target {
        return Ok(NewtonReport { x, iterations: 0, history });
    }
    for it in 1..=opts.max_iter {
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = solver.factorize(&jac)?.solve(&neg)?;
        let trial = |s: f64| -> Vec<f64> { x.iter().zip(&dx).map(|(a, d)| a + s * d).collect() };

        let mut accepted = None;
        let full = trial(1.0);
        match problem.evaluate(&full, true) {
            Ok((rt, jt)) if norm(&rt) <= rn => accepted = Some((full, rt, jacobian(jt)?)),
            _ => {
                let mut step = 1.0;
                let mut last_ok = None;
                for _ in 0..opts.max_halvings {
                    step *= 0.5;
                    let xt = trial(step);
                    if let Ok((rt, _)) = problem.evaluate(&xt, false) {
                        let tn = norm(&rt);
                        if tn.is_finite() {
                            if tn <= rn {
                                last_ok = Some(xt);
                                break;
                            }
                            last_ok = Some(xt);
                        }
                    }
                }
                if let Some(xt) = last_ok {
                    let (rt, jt) = problem.evaluate(&xt, true)?;
                    accepted = Some((xt, rt, jacobian(jt)?));
                }
            }
        }
        let Some((xn, rt, jt)) = accepted else {
            history.push(f64::NAN);
            return Err(Error::NonConvergence { iterations: it, history });
        };
        x = xn;
        r = rt;
        jac = jt;
        rn = norm(&r);
        history.push(rn);
        if !rn.is_finite() {
            return Err(Error::NonConvergence { iterations: it, history });
        }
        if rn <= target {
            return Ok(NewtonReport {
                x,
                iterations: it,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(f: impl Fn(f64) -> (f64, f64)) -> impl FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        move |x: &[f64], _| {
            let (r, d) = f(x[0]);
            Ok((vec![r], Some(CsrMatrix::from_triplets(1, &[(0, 0, d)]))))
        }
    }

    #[test]
    fn square_root_of_four() {
        let mut p = scalar(|x| (x * x - 4.0, 2.0 * x));
        let rep = newton_solve(&mut p, vec![3.0], &NewtonOptions::default()).unwrap();
        assert!((rep.x[0] - 2.0).abs() < 1e-10);
        assert!(rep.iterations <= 8);
    }

    #[test]
    fn linear_residual_needs_one_iteration() {
        let mut p = scalar(|x| (x, 1.0));
        let rep = newton_solve(&mut p, vec![5.0], &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.x[0], 0.0);
    }

    #[test]
    fn overshooting_steps_are_damped() {
        // atan has a Newton iteration that diverges from x0 = 2 without damping.
        let mut p = scalar(|x| (x.atan(), 1.0 / (1.0 + x * x)));
        let rep = newton_solve(&mut p, vec![2.0], &NewtonOptions::default()).unwrap();
        assert!(rep.x[0].abs() < 1e-10);
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn failure_carries_history() {
        let mut p = scalar(|x| (x * x + 1.0, 2.0 * x + 1e-3));
        let opts = NewtonOptions {
            max_iter: 4,
            ..Default::default()
        };
        match newton_solve(&mut p, vec![1.0], &opts) {
            Err(Error::NonConvergence { iterations, history }) => {
                assert_eq!(iterations, 4);
                assert_eq!(history.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
