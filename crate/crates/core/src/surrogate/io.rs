//! Plain-text persistence for datasets and trained networks.
//!
//! Every number is written with 17 significant digits so reloading is bit-exact.
//! Fields are tab-separated; the first line names the format and its version.

use std::fmt::Write as _;

use super::mlp::{Mlp, Normalizer, TrainingRecord};
use super::sampler::{Dataset, Sample};
use crate::error::{Error, Result};

pub const DATASET_HEADER: &str = "porohyper-dataset\t1";
pub const MODEL_HEADER: &str = "porohyper-mlp\t1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join("\t")
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            it: text.lines().enumerate(),
            line: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.it.next() {
            Some((k, l)) => {
                self.line = k + 1;
                Ok(l)
            }
            None => Err(Error::parse(self.line + 1, "unexpected end of file")),
        }
    }

    /// Next line split on tabs, with its first field checked against `key`.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut f = l.split('\t');
        if f.next() != Some(key) {
            return Err(Error::parse(self.line, format!("expected `{key}`")));
        }
        Ok(f.collect())
    }

    fn floats(&self, fields: &[&str]) -> Result<Vec<f64>> {
        fields
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(self.line, format!("bad number `{s}`: {e}")))
            })
            .collect()
    }

    fn count(&self, fields: &[&str]) -> Result<usize> {
        fields
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(self.line, "expected a count"))
    }
}

pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{DATASET_HEADER}");
    let _ = writeln!(s, "provenance\t{}", ds.provenance);
    let _ = writeln!(s, "inputs\t{}", ds.input_names.join("\t"));
    let _ = writeln!(s, "outputs\t{}", ds.output_names.join("\t"));
    let _ = writeln!(s, "samples\t{}", ds.samples.len());
    for x in &ds.samples {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            x.line,
            u8::from(x.flagged),
            num(x.residual),
            nums(&x.input),
            nums(&x.output)
        );
    }
    let _ = writeln!(s, "skipped\t{}", ds.skipped.len());
    for (input, reason) in &ds.skipped {
        let _ = writeln!(s, "{}\t{}", nums(input), reason.replace(['\t', '\n'], " "));
    }
    s
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let mut l = Lines::new(text);
    if l.next()? != DATASET_HEADER {
        return Err(Error::parse(1, "not a dataset file (header mismatch)"));
    }
    let provenance = l.keyed("provenance")?.join("\t");
    let input_names: Vec<String> = l.keyed("inputs")?.iter().map(|s| s.to_string()).collect();
    let output_names: Vec<String> = l.keyed("outputs")?.iter().map(|s| s.to_string()).collect();
    let (ni, no) = (input_names.len(), output_names.len());
    let n = {
        let f = l.keyed("samples")?;
        l.count(&f)?
    };
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let f: Vec<&str> = l.next()?.split('\t').collect();
        if f.len() != 3 + ni + no {
            return Err(Error::parse(l.line, format!("expected {} fields, got {}", 3 + ni + no, f.len())));
        }
        let line = f[0].parse().map_err(|_| Error::parse(l.line, "bad line index"))?;
        let flagged = match f[1] {
            "0" => false,
            "1" => true,
            _ => return Err(Error::parse(l.line, "flag must be 0 or 1")),
        };
        let v = l.floats(&f[2..])?;
        samples.push(Sample {
            input: v[1..1 + ni].to_vec(),
            output: v[1 + ni..].to_vec(),
            line,
            residual: v[0],
            flagged,
        });
    }
    let m = {
        let f = l.keyed("skipped")?;
        l.count(&f)?
    };
    let mut skipped = Vec::with_capacity(m);
    for _ in 0..m {
        let f: Vec<&str> = l.next()?.split('\t').collect();
        if f.len() < ni + 1 {
            return Err(Error::parse(l.line, "truncated skipped entry"));
        }
        skipped.push((l.floats(&f[..ni])?, f[ni..].join("\t")));
    }
    let ds = Dataset {
        input_names,
        output_names,
        samples,
        skipped,
        provenance,
    };
    ds.check()?;
    Ok(ds)
}

pub fn model_to_string(m: &Mlp) -> String {
    let mut s = String::new();
    let sizes: Vec<String> = m.sizes.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "{MODEL_HEADER}");
    let _ = writeln!(s, "layers\t{}", sizes.join("\t"));
    let _ = writeln!(s, "activation\ttanh\tlinear");
    let _ = writeln!(s, "input_mean\t{}", nums(&m.input_norm.mean));
    let _ = writeln!(s, "input_scale\t{}", nums(&m.input_norm.scale));
    let _ = writeln!(s, "output_mean\t{}", nums(&m.output_norm.mean));
    let _ = writeln!(s, "output_scale\t{}", nums(&m.output_norm.scale));
    let _ = writeln!(s, "input_lo\t{}", nums(&m.input_lo));
    let _ = writeln!(s, "input_hi\t{}", nums(&m.input_hi));
    let r = &m.record;
    let _ = writeln!(
        s,
        "training\t{}\t{}\t{}\t{}",
        r.epochs,
        num(r.final_cost),
        num(r.held_out_error),
        r.held_out
    );
    let mut off = 0;
    for (l, w) in m.sizes.windows(2).enumerate() {
        let (ni, no) = (w[0], w[1]);
        let _ = writeln!(s, "layer\t{l}\t{no}\t{ni}");
        for o in 0..no {
            let row = &m.params[off + o * ni..off + (o + 1) * ni];
            let _ = writeln!(s, "{}\t{}", nums(row), num(m.params[off + no * ni + o]));
        }
        off += no * (ni + 1);
    }
    s
}

pub fn model_from_str(text: &str) -> Result<Mlp> {
    let mut l = Lines::new(text);
    if l.next()? != MODEL_HEADER {
        return Err(Error::parse(1, "not a model file (header mismatch)"));
    }
    let sizes: Vec<usize> = l
        .keyed("layers")?
        .iter()
        .map(|s| s.parse().map_err(|_| Error::parse(l.line, "bad layer size")))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::parse(l.line, "need at least two positive layer sizes"));
    }
    if l.keyed("activation")? != ["tanh", "linear"] {
        return Err(Error::parse(l.line, "unsupported activation"));
    }
    let (ni, no) = (sizes[0], sizes[sizes.len() - 1]);
    let mut vec_of = |key: &str, len: usize| -> Result<Vec<f64>> {
        let f = l.keyed(key)?;
        let v = l.floats(&f)?;
        if v.len() != len {
            return Err(Error::parse(l.line, format!("`{key}` needs {len} values")));
        }
        Ok(v)
    };
    let input_norm = Normalizer {
        mean: vec_of("input_mean", ni)?,
        scale: vec_of("input_scale", ni)?,
    };
    let output_norm = Normalizer {
        mean: vec_of("output_mean", no)?,
        scale: vec_of("output_scale", no)?,
    };
    let input_lo = vec_of("input_lo", ni)?;
    let input_hi = vec_of("input_hi", ni)?;
    let f = l.keyed("training")?;
    if f.len() != 4 {
        return Err(Error::parse(l.line, "training record needs 4 fields"));
    }
    let t = l.floats(&f[1..3])?;
    let record = TrainingRecord {
        epochs: l.count(&f[0..1])?,
        final_cost: t[0],
        held_out_error: t[1],
        held_out: l.count(&f[3..4])?,
    };
    let mut params = Vec::new();
    for (k, w) in sizes.windows(2).enumerate() {
        let f = l.keyed("layer")?;
        if f != [k.to_string(), w[1].to_string(), w[0].to_string()] {
            return Err(Error::parse(l.line, format!("layer {k} header mismatch")));
        }
        let mut biases = Vec::with_capacity(w[1]);
        for _ in 0..w[1] {
            let f: Vec<&str> = l.next()?.split('\t').collect();
            let v = l.floats(&f)?;
            if v.len() != w[0] + 1 {
                return Err(Error::parse(l.line, format!("layer row needs {} values", w[0] + 1)));
            }
            params.extend_from_slice(&v[..w[0]]);
            biases.push(v[w[0]]);
        }
        params.extend(biases);
    }
    Ok(Mlp {
        sizes,
        params,
        input_norm,
        output_norm,
        input_lo,
        input_hi,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::mlp::{train, TrainConfig};

    #[test]
    fn model_round_trip_is_bit_exact() {
        let xs: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 * 0.1, (k as f64).sin()]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[1], x[1], -x[0]]).collect();
        let cfg = TrainConfig {
            max_epochs: 50,
            ..Default::default()
        };
        let m = train(&xs, &ys, &cfg).unwrap();
        let back = model_from_str(&model_to_string(&m)).unwrap();
        assert_eq!(
            back.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            m.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let x = [0.37, -0.2];
        assert_eq!(m.predict(&x).unwrap().values, back.predict(&x).unwrap().values);
        assert_eq!(back.record.epochs, 50);
    }

    #[test]
    fn dataset_round_trip() {
        let ds = Dataset {
            input_names: vec!["a".into(), "b".into()],
            output_names: vec!["y".into()],
            samples: vec![
                Sample {
                    input: vec![0.1, 0.2],
                    output: vec![1.0 / 3.0],
                    line: 0,
                    residual: f64::NAN,
                    flagged: false,
                },
                Sample {
                    input: vec![0.3, 0.2],
                    output: vec![-2e-17],
                    line: 0,
                    residual: 0.5,
                    flagged: true,
                },
            ],
            skipped: vec![(vec![0.2, 0.2], "no convergence".into())],
            provenance: "abc123".into(),
        };
        let back = dataset_from_str(&dataset_to_string(&ds)).unwrap();
        assert_eq!(back.samples[1], ds.samples[1]);
        assert!(back.samples[0].residual.is_nan());
        assert_eq!(back.samples[0].output, ds.samples[0].output);
        assert_eq!(back.skipped, ds.skipped);
        assert_eq!(back.provenance, "abc123");
    }

    #[test]
    fn truncated_files_are_rejected() {
        let text = model_to_string(&Mlp::init(&[2, 3, 1], 0));
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(matches!(model_from_str(&cut), Err(Error::Parse { .. })));
        assert!(dataset_from_str("porohyper-dataset\t2\n").is_err());
    }
}
