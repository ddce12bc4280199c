//! Adaptive sampling along traversal lines with an extrapolation-residual density check.
//!
//! Along each line the first two default-step samples are accepted unconditionally.
//! Every later candidate is compared against the linear extrapolation of the previous
//! two accepted samples, `Res = max|y - ŷ| / max(‖y‖_F, floor)`. A candidate with
//! `Res > tol` is replaced by the midpoint between it and the last accepted input, down
//! to `max_depth` halvings; at that depth it is accepted and flagged.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, step: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            step,
        }
    }

    /// Default-step grid from `lo` to `hi`, ending exactly on `hi`.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step - 1e-9).ceil().max(0.0) as usize;
        (0..=n)
            .map(|k| if k == n { self.hi } else { self.lo + self.step * k as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub tol: f64,
    pub max_depth: usize,
    pub floor: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_depth: 6,
            floor: 1e-8,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.floor > 0.0) {
            return Err(Error::Argument(format!(
                "sampler tolerance and floor must be positive (tol = {}, floor = {})",
                self.tol, self.floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// Traversal line the sample belongs to.
    pub line: usize,
    /// Residual at acceptance; NaN for the two bootstrap samples of a line.
    pub residual: f64,
    /// Accepted at maximum depth with `residual > tol`.
    pub flagged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub samples: Vec<Sample>,
    /// Inputs where the oracle failed, with the reason.
    pub skipped: Vec<(Vec<f64>, String)>,
    /// Hash of whatever produced the outputs (empty when unknown).
    pub provenance: String,
}

impl Dataset {
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.input.clone()).collect()
    }

    pub fn outputs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.output.clone()).collect()
    }

    pub fn check(&self) -> Result<()> {
        let (ni, no) = (self.input_names.len(), self.output_names.len());
        for (k, s) in self.samples.iter().enumerate() {
            if s.input.len() != ni || s.output.len() != no {
                return Err(Error::Argument(format!("sample {k} has inconsistent dimensions")));
            }
        }
        let mut sorted: Vec<&Vec<f64>> = self.samples.iter().map(|s| &s.input).collect();
        sorted.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in sorted.windows(2) {
            if w[0].iter().zip(w[1].iter()).all(|(a, b)| (a - b).abs() <= 1e-12) {
                return Err(Error::Argument(format!("duplicate input {:?}", w[0])));
            }
        }
        Ok(())
    }
}

pub fn residual(actual: &[f64], extrapolated: &[f64], floor: f64) -> f64 {
    let num = actual.iter().zip(extrapolated).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max);
    let den = actual.iter().map(|a| a * a).sum::<f64>().sqrt().max(floor);
    num / den
}

fn extrapolate(x0: f64, y0: &[f64], x1: f64, y1: &[f64], x: f64) -> Vec<f64> {
    let s = (x - x1) / (x1 - x0);
    y0.iter().zip(y1).map(|(a, b)| b + (b - a) * s).collect()
}

/// Samples one line of the moving coordinate `axis`; `point` builds the full input.
fn sample_line<O>(
    axis: &Axis,
    line: usize,
    point: &dyn Fn(f64) -> Vec<f64>,
    oracle: &mut O,
    cfg: &SamplerConfig,
) -> (Vec<Sample>, Vec<(Vec<f64>, String)>)
where
    O: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut accepted: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for target in axis.grid() {
        let mut depth = 0;
        loop {
            let last = accepted.last().map(|a| a.0);
            let x = match last {
                Some(l) if depth > 0 => l + (target - l) / 2f64.powi(depth as i32),
                _ => target,
            };
            let input = point(x);
            let y = match oracle(&input) {
                Ok(y) => y,
                Err(e) => {
                    skipped.push((input, e.to_string()));
                    break;
                }
            };
            let n = accepted.len();
            let res = if n >= 2 {
                let (x0, y0) = &accepted[n - 2];
                let (x1, y1) = &accepted[n - 1];
                residual(&y, &extrapolate(*x0, y0, *x1, y1, x), cfg.floor)
            } else {
                f64::NAN
            };
            if n < 2 || res <= cfg.tol || depth == cfg.max_depth {
                samples.push(Sample {
                    input,
                    output: y.clone(),
                    line,
                    residual: res,
                    flagged: n >= 2 && res > cfg.tol,
                });
                accepted.push((x, y));
                if x == target {
                    break;
                }
                depth = 0;
            } else {
                depth += 1;
            }
        }
    }
    (samples, skipped)
}

/// Samples `moving` along every default-step grid value of each axis in `fixed`
/// (one line when `fixed` is empty). Inputs are ordered `[moving, fixed...]`.
/// `make_oracle` builds one oracle per line; lines run in parallel.
pub fn adaptive_sample<F, O>(moving: &Axis, fixed: &[Axis], output_names: &[&str], cfg: &SamplerConfig, make_oracle: F) -> Result<Dataset>
where
    F: Fn() -> O + Sync,
    O: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    for a in std::iter::once(moving).chain(fixed) {
        if !(a.step > 0.0) || !(a.hi >= a.lo) {
            return Err(Error::Argument(format!("axis {} needs a positive step and lo <= hi", a.name)));
        }
    }
    let mut lines: Vec<Vec<f64>> = vec![Vec::new()];
    for a in fixed {
        lines = lines
            .into_iter()
            .flat_map(|l| {
                a.grid().into_iter().map(move |v| {
                    let mut l = l.clone();
                    l.push(v);
                    l
                })
            })
            .collect();
    }
    let results: Vec<_> = lines
        .par_iter()
        .enumerate()
        .map(|(i, fixed_values)| {
            let mut oracle = make_oracle();
            let point = |x: f64| {
                let mut v = vec![x];
                v.extend_from_slice(fixed_values);
                v
            };
            sample_line(moving, i, &point, &mut oracle, cfg)
        })
        .collect();
    let mut ds = Dataset {
        input_names: std::iter::once(moving).chain(fixed).map(|a| a.name.clone()).collect(),
        output_names: output_names.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    for (s, k) in results {
        ds.samples.extend(s);
        ds.skipped.extend(k);
    }
    if ds.samples.is_empty() {
        return Err(Error::Argument("the oracle failed at every sample".into()));
    }
    ds.check()?;
    Ok(ds)
}

/// Re-evaluates the residual of every accepted sample from its two predecessors on the
/// same line. Returns the unflagged samples whose residual exceeds `tol`.
pub fn replay(ds: &Dataset, cfg: &SamplerConfig) -> Vec<usize> {
    let mut bad = Vec::new();
    let mut by_line: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (k, s) in ds.samples.iter().enumerate() {
        by_line.entry(s.line).or_default().push(k);
    }
    for idx in by_line.values() {
        for w in idx.windows(3) {
            let (a, b, c) = (&ds.samples[w[0]], &ds.samples[w[1]], &ds.samples[w[2]]);
            let res = residual(
                &c.output,
                &extrapolate(a.input[0], &a.output, b.input[0], &b.output, c.input[0]),
                cfg.floor,
            );
            if !c.flagged && res > cfg.tol {
                bad.push(w[2]);
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(f: fn(f64) -> f64) -> impl Fn() -> Box<dyn FnMut(&[f64]) -> Result<Vec<f64>>> + Sync {
        move || Box::new(move |x: &[f64]| Ok(vec![f(x[0])]))
    }

    #[test]
    fn grid_ends_on_bounds() {
        let g = Axis::new("x", -0.35, 0.05, 0.02).grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 0.05);
        let g = Axis::new("x", 0.0, 1.0, 0.3).grid();
        assert_eq!(g.len(), 5);
        assert_eq!(g[4], 1.0);
    }

    #[test]
    fn linear_oracle_is_not_refined() {
        let ds = adaptive_sample(
            &Axis::new("x", 0.0, 1.0, 0.25),
            &[],
            &["y"],
            &SamplerConfig::default(),
            scalar(|x| 2.0 * x),
        )
        .unwrap();
        let xs: Vec<f64> = ds.samples.iter().map(|s| s.input[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(ds.samples.iter().all(|s| !s.flagged));
    }

    #[test]
    fn cubic_oracle_replays_clean() {
        let cfg = SamplerConfig::default();
        let ds = adaptive_sample(&Axis::new("x", 0.0, 1.0, 0.25), &[], &["y"], &cfg, scalar(|x| x * x * x)).unwrap();
        assert!(ds.samples.len() > 5);
        assert!(replay(&ds, &cfg).is_empty());
        let xs: Vec<f64> = ds.samples.iter().map(|s| s.input[0]).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn failures_are_skipped() {
        let make = || {
            |x: &[f64]| {
                if (x[0] - 0.5).abs() < 1e-12 {
                    Err(Error::Argument("boom".into()))
                } else {
                    Ok(vec![x[0]])
                }
            }
        };
        let ds = adaptive_sample(&Axis::new("x", 0.0, 1.0, 0.25), &[], &["y"], &SamplerConfig::default(), make).unwrap();
        assert_eq!(ds.skipped.len(), 1);
        assert_eq!(ds.samples.len(), 4);
    }
}
