use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use porohyper::artifact::{hash_file, sha256_hex, ArtifactWriter, Manifest};
use porohyper::config::{ProviderKind, RunConfig};
use porohyper::fluid::solve_stokes_cell;
use porohyper::macroscale::{
    derive_linear_params, march, AleModel, DnsProvider, LinearModel, LinearProvider, MicroProvider, TimeSeries, ZeroProvider,
};
use porohyper::mesh::gmsh::{read_mesh, write_mesh_string};
use porohyper::mesh::{generate_voxel_rve, interface_correspondence, periodic_pairs, RvePair};
use porohyper::scaling::{CharacteristicSet, Quantity};
use porohyper::solid::{biot_modulus, oat_sweep, MacroState, SolidCell, SweepInput, TangentPair};
use porohyper::surrogate::{
    adaptive_sample, cell_oracle, dataset_from_str, dataset_to_string, model_from_str, model_to_string, train, Mlp, SurrogateProvider,
    OUTPUT_NAMES,
};
use porohyper::tensor::Mat3;
use porohyper::{Error, Result};

use crate::tables::{compare_tsv, key_values, parse_key_values, summary};
use crate::{CellSource, Cli, Command, Common, RunArgs};

pub fn dispatch(cmd: Command, args: Vec<String>) -> Result<()> {
    match cmd {
        Command::RveGen {
            common,
            resolution,
            radius,
        } => stage(&common, "rve-gen", args, |w, cfg| {
            if let Some(n) = resolution {
                cfg.geometry.resolution = n;
            }
            if let Some(r) = radius {
                cfg.geometry.channel_radius = r;
            }
            cfg.validate()?;
            snapshot(w, cfg)?;
            let rve = generate_voxel_rve(cfg.geometry.resolution, cfg.geometry.channel_radius)?;
            w.write("solid.msh", write_mesh_string(&rve.solid).as_bytes())?;
            w.write("fluid.msh", write_mesh_string(&rve.fluid).as_bytes())?;
            let rows = [
                ("resolution", cfg.geometry.resolution.to_string()),
                ("channel_radius", num(cfg.geometry.channel_radius)),
                ("porosity", num(rve.porosity)),
                ("solid_nodes", rve.solid.nodes.len().to_string()),
                ("solid_cells", rve.solid.cells.len().to_string()),
                ("fluid_nodes", rve.fluid.nodes.len().to_string()),
                ("fluid_cells", rve.fluid.cells.len().to_string()),
                ("interface_pairs", rve.interface.len().to_string()),
            ];
            w.write("rve.tsv", key_values(&rows).as_bytes())?;
            w.note("porosity", num(rve.porosity));
            println!("porosity {}", rve.porosity);
            Ok(())
        }),
        Command::CellFluid { common, cell, viscosity } => stage(&common, "cell-fluid", args, |w, cfg| {
            if let Some(v) = viscosity {
                cfg.fluid.viscosity = v;
            }
            cfg.validate()?;
            snapshot(w, cfg)?;
            let rve = load_rve(w, &cell, cfg)?;
            let fp = periodic_pairs(&rve.fluid, &[0, 1, 2])?;
            let s = solve_stokes_cell(&rve.fluid, &fp, cfg.fluid.viscosity)?;
            let mut rows = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    rows.push((format!("K_{}{}", i + 1, j + 1), num(s.conductivity[(i, j)])));
                }
            }
            rows.push(("porosity".into(), num(rve.porosity)));
            rows.push(("viscosity".into(), num(cfg.fluid.viscosity)));
            rows.push(("fluid_volume".into(), num(s.fluid_volume)));
            rows.push(("interface_velocity_max".into(), num(s.interface_velocity_max)));
            let rows: Vec<(&str, String)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            w.write("conductivity.tsv", key_values(&rows).as_bytes())?;
            for i in 0..3 {
                w.note(&format!("K_{0}{0}", i + 1), num(s.conductivity[(i, i)]));
            }
            println!(
                "K diagonal {} {} {}",
                s.conductivity[(0, 0)],
                s.conductivity[(1, 1)],
                s.conductivity[(2, 2)]
            );
            Ok(())
        }),
        Command::CellSolid {
            common,
            cell,
            grad,
            pressure,
        } => stage(&common, "cell-solid", args, |w, cfg| {
            snapshot(w, cfg)?;
            let mut h = Mat3::zeros();
            for g in &grad {
                let (ij, v) = parse_grad(g)?;
                h[ij] = v;
            }
            let state = MacroState::new(h, pressure);
            state.check()?;
            let rve = load_rve(w, &cell, cfg)?;
            let sp = periodic_pairs(&rve.solid, &[0, 1, 2])?;
            let sc = SolidCell::new(&rve.solid, &sp, cfg.material_params()?)?;
            let resp = sc.solve(&state, &cfg.solve_options())?;
            let t = sc.tangents(&resp, &cfg.tangent_options())?;
            let mut rows = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    rows.push((format!("avg_grad_u1_{}{}", i + 1, j + 1), num(resp.avg_grad_u1[(i, j)])));
                }
            }
            rows.push(("psi_avg".into(), num(resp.psi_avg)));
            rows.push(("psi_max".into(), num(resp.psi_max)));
            rows.push(("increments".into(), resp.converged_increments.to_string()));
            let rows: Vec<(&str, String)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            w.write("response.tsv", key_values(&rows).as_bytes())?;
            w.write("tangents.tsv", tangents_tsv(&t, rve.solid_fraction()).as_bytes())?;
            println!("M2222 {} M2211 {} Q22 {}", t.m.get(1, 1, 1, 1), t.m.get(1, 1, 0, 0), t.q[(1, 1)]);
            Ok(())
        }),
        Command::RveSweep {
            common,
            cell,
            input,
            start,
            end,
            steps,
        } => stage(&common, "rve-sweep", args, |w, cfg| {
            snapshot(w, cfg)?;
            let input = SweepInput::parse(&input)?;
            let rve = load_rve(w, &cell, cfg)?;
            let sp = periodic_pairs(&rve.solid, &[0, 1, 2])?;
            let sc = SolidCell::new(&rve.solid, &sp, cfg.material_params()?)?;
            let table = oat_sweep(&sc, input, (start, end), steps, None, &cfg.solve_options())?;
            w.write("sweep.tsv", table.to_tsv().as_bytes())?;
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            w.note("failed_points", failed);
            println!("{} points, {} failed", table.rows.len(), failed);
            Ok(())
        }),
        Command::Dataset { common, cell } => stage(&common, "dataset", args, |w, cfg| {
            snapshot(w, cfg)?;
            let rve = load_rve(w, &cell, cfg)?;
            let sp = periodic_pairs(&rve.solid, &[0, 1, 2])?;
            let sc = SolidCell::new(&rve.solid, &sp, cfg.material_params()?)?;
            let so = cfg.solve_options();
            let (moving, fixed) = cfg.sampler_axes();
            let mut ds = adaptive_sample(&moving, &fixed, &OUTPUT_NAMES, &cfg.sampler_config(), || cell_oracle(&sc, &so))?;
            ds.provenance = micro_hash(cfg, &rve);
            for (x, reason) in &ds.skipped {
                eprintln!("warning: oracle failed at {x:?}: {reason}");
            }
            w.write("dataset.txt", dataset_to_string(&ds).as_bytes())?;
            let flagged = ds.samples.iter().filter(|s| s.flagged).count();
            w.note("samples", ds.samples.len());
            w.note("flagged", flagged);
            w.note("skipped", ds.skipped.len());
            w.note("provenance", &ds.provenance);
            println!("{} samples, {} flagged, {} skipped", ds.samples.len(), flagged, ds.skipped.len());
            Ok(())
        }),
        Command::Train { common, dataset } => stage(&common, "train", args, |w, cfg| {
            snapshot(w, cfg)?;
            w.input(&dataset)?;
            let ds = dataset_from_str(&fs::read_to_string(&dataset)?)?;
            let m = train(&ds.inputs(), &ds.outputs(), &cfg.train_config())?;
            w.write("model.txt", model_to_string(&m).as_bytes())?;
            let gate = cfg.training.accuracy_gate;
            let pass = m.record.held_out_error <= gate;
            let rows = [
                ("epochs", m.record.epochs.to_string()),
                ("final_cost", num(m.record.final_cost)),
                ("held_out", m.record.held_out.to_string()),
                ("held_out_max_error", num(m.record.held_out_error)),
                ("accuracy_gate", num(gate)),
                ("gate_passed", pass.to_string()),
                ("dataset_provenance", ds.provenance.clone()),
            ];
            w.write("training.tsv", key_values(&rows).as_bytes())?;
            w.note("held_out_max_error", num(m.record.held_out_error));
            w.note("accuracy_gate", num(gate));
            w.note("gate_passed", pass);
            println!(
                "held-out max error {} (gate {gate}, {})",
                m.record.held_out_error,
                if pass { "passed" } else { "failed" }
            );
            Ok(())
        }),
        Command::Consolidate { common, cell, run } => stage(&common, "consolidate", args, |w, cfg| {
            apply_run_args(cfg, &run)?;
            snapshot(w, cfg)?;
            let ctx = MacroContext::load(w, &cell, &run, cfg)?;
            let series = ctx.run_ale(w, cfg)?;
            write_series(w, "", &series)?;
            if let Some(l) = series.last() {
                println!("settlement {} at t = {} (steady: {})", l.settlement, l.time, series.steady);
            }
            Ok(())
        }),
        Command::Compare { common, cell, run } => stage(&common, "compare", args, |w, cfg| {
            apply_run_args(cfg, &run)?;
            snapshot(w, cfg)?;
            let ctx = MacroContext::load(w, &cell, &run, cfg)?;
            let ale = ctx.run_ale(w, cfg)?;
            write_series(w, "ale_", &ale)?;
            let lp = derive_linear_params(&ctx.origin, &cfg.material_params()?, ctx.vf, ctx.k)?;
            let opts = cfg.column_options();
            let mut model = LinearModel::new(&opts, lp)?;
            let (lin, err) = march(&mut model, &opts);
            write_series(w, "linear_", &lin)?;
            if let Some(e) = err {
                return Err(e);
            }
            w.write("compare.tsv", compare_tsv(&ale, &lin).as_bytes())?;
            let s = summary(&ale, &lin, opts.height, opts.traction);
            w.write("summary.tsv", s.as_bytes())?;
            print!("{s}");
            Ok(())
        }),
        Command::Dimensionalize {
            preset,
            config,
            quantity,
            value,
            inverse,
        } => {
            let set = match config {
                Some(p) => {
                    let cfg = RunConfig::load(&p)?;
                    cfg.characteristic_set()?
                }
                None => CharacteristicSet::preset(&preset)?,
            };
            if let Some(warn) = set.validate()? {
                eprintln!("warning: {warn}");
            }
            let q = Quantity::parse(&quantity)?;
            if inverse {
                println!("{}", round_display(set.nondimensionalize(q, value)));
            } else {
                println!("{} {}", round_display(set.dimensionalize(q, value)), q.unit());
            }
            Ok(())
        }
        Command::Rerun { from, out } => rerun(&from, &out),
    }
}

/// Runs one stage inside an artifact directory; on failure the directory is marked
/// incomplete.
fn stage<F>(common: &Common, name: &str, args: Vec<String>, f: F) -> Result<()>
where
    F: FnOnce(&mut ArtifactWriter, &mut RunConfig) -> Result<()>,
{
    let mut w = ArtifactWriter::create(&common.out, name, args)?;
    let result = (|| {
        let mut cfg = match &common.config {
            Some(p) => {
                w.input(p)?;
                RunConfig::load(p)?
            }
            None => RunConfig::default(),
        };
        f(&mut w, &mut cfg)
    })();
    match result {
        Ok(()) => {
            w.finish()?;
            Ok(())
        }
        Err(e) => {
            let _ = w.abort(&e.to_string());
            Err(e)
        }
    }
}

fn snapshot(w: &mut ArtifactWriter, cfg: &RunConfig) -> Result<()> {
    w.write("config.toml", cfg.to_toml().as_bytes())?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Shortest decimal of the value rounded to 12 significant digits.
fn round_display(v: f64) -> String {
    let r: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{r}")
}

fn parse_grad(s: &str) -> Result<((usize, usize), f64)> {
    let bad = || Error::Argument(format!("expected `ij=value` with i, j in 1..=3, got `{s}`"));
    let (ij, v) = s.split_once('=').ok_or_else(bad)?;
    let b = ij.as_bytes();
    if b.len() != 2 || !(b'1'..=b'3').contains(&b[0]) || !(b'1'..=b'3').contains(&b[1]) {
        return Err(bad());
    }
    let v: f64 = v.trim().parse().map_err(|_| bad())?;
    Ok((((b[0] - b'1') as usize, (b[1] - b'1') as usize), v))
}

fn load_rve(w: &mut ArtifactWriter, src: &CellSource, cfg: &RunConfig) -> Result<RvePair> {
    match &src.rve {
        None => generate_voxel_rve(cfg.geometry.resolution, cfg.geometry.channel_radius),
        Some(dir) => {
            let (sp, fp, tp) = (dir.join("solid.msh"), dir.join("fluid.msh"), dir.join("rve.tsv"));
            for p in [&sp, &fp, &tp] {
                w.input(p)?;
            }
            let solid = read_mesh(&sp)?;
            let fluid = read_mesh(&fp)?;
            let kv = parse_key_values(&fs::read_to_string(&tp)?)?;
            let porosity = lookup(&kv, "porosity", &tp)?;
            let interface = interface_correspondence(&solid, &fluid)?;
            Ok(RvePair {
                solid,
                fluid,
                porosity,
                interface,
            })
        }
    }
}

fn lookup(kv: &[(String, String)], key: &str, path: &Path) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::Artifact {
            path: path.to_path_buf(),
            message: format!("missing or invalid `{key}`"),
        })
}

/// Hash of everything that determines the solid cell response.
fn micro_hash(cfg: &RunConfig, rve: &RvePair) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", toml::to_string(&cfg.material).unwrap_or_default());
    let _ = writeln!(s, "{}", toml::to_string(&cfg.solid).unwrap_or_default());
    let _ = writeln!(s, "{}", toml::to_string(&cfg.sampler).unwrap_or_default());
    s.push_str(&write_mesh_string(&rve.solid));
    sha256_hex(s.as_bytes())
}

fn tangents_tsv(t: &TangentPair, solid_fraction: f64) -> String {
    let mut s = String::from("tensor\ti\tj\tk\tl\tvalue\n");
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let _ = writeln!(s, "M\t{}\t{}\t{}\t{}\t{}", i + 1, j + 1, k + 1, l + 1, num(t.m.get(i, j, k, l)));
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let _ = writeln!(s, "Q\t{}\t{}\t-\t-\t{}", i + 1, j + 1, num(t.q[(i, j)]));
        }
    }
    match biot_modulus(&t.q, solid_fraction) {
        Ok(m) => {
            let _ = writeln!(s, "biot_modulus\t-\t-\t-\t-\t{}", num(m));
        }
        Err(e) => eprintln!("warning: {e}"),
    }
    s
}

fn apply_run_args(cfg: &mut RunConfig, run: &RunArgs) -> Result<()> {
    if let Some(p) = &run.provider {
        cfg.column.provider = match p.as_str() {
            "surrogate" => ProviderKind::Surrogate,
            "linear" => ProviderKind::Linear,
            "dns" => ProviderKind::Dns,
            "zero" => ProviderKind::Zero,
            other => {
                return Err(Error::Argument(format!(
                    "unknown provider `{other}` (expected surrogate, linear, dns or zero)"
                )))
            }
        };
    }
    if let Some(t) = run.traction {
        cfg.column.traction = t;
    }
    cfg.validate()
}

/// Micro inputs of a column run: cell, fluid conductivity and origin tangents.
struct MacroContext {
    rve: RvePair,
    k: Mat3,
    vf: f64,
    origin: TangentPair,
    model: Option<Mlp>,
}

impl MacroContext {
    fn load(w: &mut ArtifactWriter, cell: &CellSource, run: &RunArgs, cfg: &RunConfig) -> Result<Self> {
        let rve = load_rve(w, cell, cfg)?;
        let (k, vf) = match &run.fluid {
            Some(dir) => {
                let p = dir.join("conductivity.tsv");
                w.input(&p)?;
                let kv = parse_key_values(&fs::read_to_string(&p)?)?;
                let mut k = Mat3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        k[(i, j)] = lookup(&kv, &format!("K_{}{}", i + 1, j + 1), &p)?;
                    }
                }
                (k, lookup(&kv, "porosity", &p)?)
            }
            None => {
                let fp = periodic_pairs(&rve.fluid, &[0, 1, 2])?;
                (solve_stokes_cell(&rve.fluid, &fp, cfg.fluid.viscosity)?.conductivity, rve.porosity)
            }
        };
        let sp = periodic_pairs(&rve.solid, &[0, 1, 2])?;
        let sc = SolidCell::new(&rve.solid, &sp, cfg.material_params()?)?;
        let base = sc.solve(&MacroState::zero(), &cfg.solve_options())?;
        let origin = sc.tangents(&base, &cfg.tangent_options())?;
        let model = match (&run.model, cfg.column.provider) {
            (Some(p), _) => {
                w.input(p)?;
                Some(model_from_str(&fs::read_to_string(p)?)?)
            }
            (None, ProviderKind::Surrogate) => {
                return Err(Error::Argument("the surrogate provider needs --model".into()));
            }
            (None, _) => None,
        };
        w.note("conductivity_22", num(k[(1, 1)]));
        w.note("fluid_fraction", num(vf));
        Ok(Self { rve, k, vf, origin, model })
    }

    fn run_ale(&self, w: &mut ArtifactWriter, cfg: &RunConfig) -> Result<TimeSeries> {
        let opts = cfg.column_options();
        let params = cfg.material_params()?;
        let sp = periodic_pairs(&self.rve.solid, &[0, 1, 2])?;
        let surrogate = match cfg.column.provider {
            ProviderKind::Surrogate => {
                let m = self
                    .model
                    .clone()
                    .ok_or_else(|| Error::Argument("the surrogate provider needs --model".into()))?;
                let gate = cfg.training.accuracy_gate;
                let err = m.record.held_out_error;
                w.note("surrogate_held_out_max_error", num(err));
                w.note("accuracy_gate", num(gate));
                if !(err <= gate) {
                    return Err(Error::Argument(format!(
                        "surrogate held-out max error {err} exceeds the accuracy gate {gate}"
                    )));
                }
                Some(SurrogateProvider::new(m)?)
            }
            _ => None,
        };
        let linear = LinearProvider {
            m: self.origin.m,
            q: self.origin.q,
        };
        let dns;
        let provider: &dyn MicroProvider = match (cfg.column.provider, &surrogate) {
            (_, Some(s)) => s,
            (ProviderKind::Dns, _) => {
                dns = DnsProvider::new(
                    SolidCell::new(&self.rve.solid, &sp, params)?,
                    cfg.solve_options(),
                    cfg.tangent_options(),
                );
                &dns
            }
            (ProviderKind::Zero, _) => &ZeroProvider,
            _ => &linear,
        };
        w.note("provider", provider.name());
        let mut model = AleModel::new(&opts, provider, params, self.vf, self.k)?;
        model.refresh_each_iteration = cfg.column.refresh_each_iteration;
        let (series, err) = march(&mut model, &opts);
        if let Some(s) = &surrogate {
            w.note("surrogate_extrapolations", s.extrapolations());
        }
        match err {
            None => Ok(series),
            Some(e) => {
                write_series(w, "partial_", &series)?;
                Err(e)
            }
        }
    }
}

fn write_series(w: &mut ArtifactWriter, prefix: &str, s: &TimeSeries) -> Result<()> {
    w.write(&format!("{prefix}history.tsv"), s.history_tsv().as_bytes())?;
    w.write(&format!("{prefix}nodal_profiles.tsv"), s.nodal_profiles_tsv().as_bytes())?;
    w.write(&format!("{prefix}cell_profiles.tsv"), s.cell_profiles_tsv().as_bytes())?;
    if let Some(l) = s.last() {
        w.note(&format!("{prefix}final_settlement"), num(l.settlement));
        w.note(&format!("{prefix}steady"), s.steady);
    }
    Ok(())
}

/// Repeats a stage with the arguments recorded in its manifest, after checking that
/// every recorded input still has the same hash.
fn rerun(from: &Path, out: &Path) -> Result<()> {
    let m = Manifest::read(from)?;
    if m.status != "complete" {
        return Err(Error::Argument(format!("{} holds an incomplete stage", from.display())));
    }
    for f in &m.inputs {
        let h = hash_file(Path::new(&f.path))?;
        if h != f.sha256 {
            return Err(Error::Artifact {
                path: PathBuf::from(&f.path),
                message: "input changed since the recorded run".into(),
            });
        }
    }
    let mut args = vec!["porohyper".to_string()];
    let mut it = m.arguments.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            args.extend(["--out".into(), out.display().to_string()]);
        } else if a.starts_with("--out=") {
            args.push(format!("--out={}", out.display()));
        } else {
            args.push(a.clone());
        }
    }
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Argument(e.to_string()))?;
    dispatch(cli.command, args[1..].to_vec())
}
