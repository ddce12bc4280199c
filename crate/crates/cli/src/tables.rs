use std::fmt::Write as _;

use porohyper::macroscale::{StepRecord, TimeSeries};
use porohyper::{Error, Result};

pub fn key_values(rows: &[(&str, String)]) -> String {
    let mut s = String::from("quantity\tvalue\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s
}

pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "quantity\tvalue")) => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected a `quantity\tvalue` header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(k, l)| {
            l.split_once('\t')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::Parse {
                    line: k + 1,
                    message: "expected two tab-separated fields".into(),
                })
        })
        .collect()
}

/// Series value at `t`, linear between records and held after the last one.
fn at(records: &[StepRecord], t: f64, f: impl Fn(&StepRecord) -> f64) -> f64 {
    match records.iter().position(|r| r.time >= t) {
        None => records.last().map(&f).unwrap_or(f64::NAN),
        Some(0) => {
            let r = &records[0];
            if r.time == t {
                f(r)
            } else {
                f(r) * t / r.time
            }
        }
        Some(k) => {
            let (a, b) = (&records[k - 1], &records[k]);
            let s = (t - a.time) / (b.time - a.time);
            f(a) + s * (f(b) - f(a))
        }
    }
}

/// Both runs on the union of their output times.
pub fn compare_tsv(ale: &TimeSeries, lin: &TimeSeries) -> String {
    let mut times: Vec<f64> = ale.records.iter().chain(&lin.records).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let mut s = String::from(
        "time\tale_settlement\tlinear_settlement\tale_p_bottom\tlinear_p_bottom\tale_p_max\tlinear_p_max\tale_drained_volume\tlinear_drained_volume\n",
    );
    let fields: [fn(&StepRecord) -> f64; 4] = [|r| r.settlement, |r| r.p_bottom, |r| r.p_max, |r| r.drained_volume];
    for t in times {
        let _ = write!(s, "{t:.16e}");
        for f in fields {
            let _ = write!(s, "\t{:.16e}\t{:.16e}", at(&ale.records, t, f), at(&lin.records, t, f));
        }
        s.push('\n');
    }
    s
}

pub fn summary(ale: &TimeSeries, lin: &TimeSeries, height: f64, traction: f64) -> String {
    let num = |v: f64| format!("{v:.16e}");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "nan".into());
    let mut rows: Vec<(String, String)> = vec![("height".into(), num(height)), ("traction".into(), num(traction))];
    for (name, s) in [("ale", ale), ("linear", lin)] {
        let Some(l) = s.last() else { continue };
        let balance = (l.drained_volume - l.pore_volume_change).abs() / l.pore_volume_change.abs().max(f64::MIN_POSITIVE);
        rows.extend([
            (format!("{name}_final_time"), num(l.time)),
            (format!("{name}_final_settlement"), num(l.settlement)),
            (format!("{name}_settlement_fraction"), num(l.settlement / height)),
            (format!("{name}_decay_time_5pct"), opt(s.decay_time(0.05))),
            (format!("{name}_drained_volume"), num(l.drained_volume)),
            (format!("{name}_pore_volume_change"), num(l.pore_volume_change)),
            (format!("{name}_balance_error"), num(balance)),
            (format!("{name}_final_p_max"), num(l.p_max)),
            (format!("{name}_steady"), s.steady.to_string()),
        ]);
    }
    if let (Some(a), Some(l)) = (ale.last(), lin.last()) {
        rows.push(("settlement_reduction".into(), num(1.0 - a.settlement / l.settlement)));
    }
    let rows: Vec<(&str, String)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    key_values(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: f64, settlement: f64) -> StepRecord {
        StepRecord {
            time,
            traction: -0.1,
            settlement,
            p_max: 0.0,
            p_max_y: 0.0,
            p_bottom: 0.0,
            drained_volume: 0.0,
            pore_volume_change: 0.0,
            iterations: 1,
            bracket_violations: 0,
        }
    }

    #[test]
    fn interpolation_and_hold() {
        let r = vec![rec(1.0, 2.0), rec(3.0, 4.0)];
        assert_eq!(at(&r, 2.0, |r| r.settlement), 3.0);
        assert_eq!(at(&r, 0.5, |r| r.settlement), 1.0);
        assert_eq!(at(&r, 9.0, |r| r.settlement), 4.0);
    }

    #[test]
    fn key_value_round_trip() {
        let text = key_values(&[("a", "1".into()), ("b", "x y".into())]);
        assert_eq!(
            parse_key_values(&text).unwrap(),
            vec![("a".into(), "1".into()), ("b".into(), "x y".into())]
        );
        assert!(parse_key_values("nope\n").is_err());
    }
}
