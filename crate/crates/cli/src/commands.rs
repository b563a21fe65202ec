use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rpqst::config::RunConfig;
use rpqst::fit::{fit_trace, SinusoidFit};
use rpqst::rabi::RotationAxis;
use rpqst::readout::{synthesize_trace, Channel, RabiTrace};
use rpqst::study::{alpha_perturbation_study, batch_tomography, calibrate_noise, write_study_outputs};
use rpqst::tomography::{
    actual_state, analyze_traces, channel_seed, reconstructors, tomograph_channel, write_reconstructions,
    ChannelOutcome, Reconstruction,
};
use rpqst::{Error, PureState, Result};
use serde_json::{json, Value};

use crate::{AxisArg, ChannelArg, GlobalArgs, StudyKind};

const DEFAULT_OUT: &str = "rpqst-out";

pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub hash: String,
}

pub fn load_config(args: &GlobalArgs) -> Result<Context> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let mut cfg = RunConfig::default();
            cfg.validate()?;
            cfg
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let hash = cfg.hash();
    Ok(Context {
        seed: cfg.seed,
        cfg,
        out,
        hash,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_metadata(ctx: &Context, command: &str, extra: Value) -> Result<()> {
    let mut meta = json!({
        "command": command,
        "seed": ctx.seed,
        "config_hash": ctx.hash,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    write_json(&ctx.out.join("metadata.json"), &meta)
}

fn trace_file(channel: Channel, axis: RotationAxis) -> String {
    format!("trace_{channel}_{axis}.csv")
}

fn write_trace(dir: &Path, trace: &RabiTrace) -> Result<PathBuf> {
    let path = dir.join(trace_file(trace.channel, trace.axis));
    trace.write_csv(BufWriter::new(File::create(&path)?))?;
    Ok(path)
}

fn state_json(s: &PureState) -> Value {
    json!({ "theta_deg": s.theta_deg(), "phi_deg": s.phi_deg() })
}

fn fit_record(source: &str, trace: &RabiTrace, fit: &SinusoidFit) -> Value {
    json!({
        "source": source,
        "channel": trace.channel.as_str(),
        "axis": trace.axis.as_str(),
        "seed": trace.seed,
        "fit": fit,
        "amplitude_sigma": fit.amplitude_sigma(),
        "phase_sigma": fit.phase_sigma(),
    })
}

fn warn_flags(channel: Channel, r: &Reconstruction) {
    for flag in &r.flags {
        eprintln!("warning: {channel}: {}", flag.message());
    }
}

pub fn synthesize(ctx: &Context, state: &PureState, axis: Option<AxisArg>, channel: ChannelArg) -> Result<()> {
    let exp = &ctx.cfg.experiment;
    let axes = match axis {
        Some(a) => vec![a.into()],
        None => RotationAxis::BOTH.to_vec(),
    };
    let actual = actual_state(exp, state);
    let mut traces = Vec::new();
    for ch in channel.channels() {
        let noise = exp.noise.get(ch).with_seed(channel_seed(ctx.seed, ch));
        for &ax in &axes {
            let plan = exp.plan_for(state, ax).map_err(|e| e.at("plan"))?;
            traces
                .push(synthesize_trace(&exp.model, &actual, state, ax, &plan, &noise).map_err(|e| e.at("synthesize"))?);
        }
    }
    prepare_out(&ctx.out)?;
    let mut files = Vec::new();
    for t in &traces {
        let path = write_trace(&ctx.out, t)?;
        println!("wrote {}", path.display());
        files.push(path.file_name().unwrap().to_string_lossy().into_owned());
    }
    write_metadata(ctx, "synthesize", json!({ "state": state_json(state), "files": files }))
}

pub fn fit(ctx: &Context, paths: &[PathBuf]) -> Result<()> {
    let exp = &ctx.cfg.experiment;
    let mut traces = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path)?;
        let mut trace = RabiTrace::read_csv(file).inspect_err(|_| eprintln!("error in {}", path.display()))?;
        // Trace files carry no drive settings; the configured model supplies them.
        trace.nominal_frequency = Some(exp.model.frequency_hz());
        traces.push(trace);
    }

    // Pair x and y traces that belong to the same measurement.
    let mut partner: Vec<Option<usize>> = vec![None; traces.len()];
    for i in 0..traces.len() {
        for j in 0..traces.len() {
            let (a, b) = (&traces[i], &traces[j]);
            if a.axis == RotationAxis::X
                && b.axis == RotationAxis::Y
                && partner[i].is_none()
                && partner[j].is_none()
                && a.channel == b.channel
                && a.seed == b.seed
                && a.prepared == b.prepared
            {
                partner[i] = Some(j);
                partner[j] = Some(i);
            }
        }
    }

    prepare_out(&ctx.out)?;
    let reconstructor = reconstructors().create(&exp.reconstructor, &())?;
    let source = |i: usize| paths[i].display().to_string();
    let stem = |i: usize| {
        paths[i]
            .file_stem()
            .map_or("trace".into(), |s| s.to_string_lossy().into_owned())
    };
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut first_error: Option<Error> = None;
    for i in 0..traces.len() {
        match partner[i] {
            Some(j) if traces[i].axis == RotationAxis::X => {
                let outcome = analyze_traces(&traces[i], &traces[j], &exp.fit, reconstructor.as_ref());
                for (k, fit) in [(i, &outcome.fit_x), (j, &outcome.fit_y)] {
                    match fit {
                        Ok(f) => {
                            report_fit(&source(k), f);
                            let rec = fit_record(&source(k), &traces[k], f);
                            write_json(&ctx.out.join(format!("fit_{}.json", stem(k))), &rec)?;
                            records.push(rec);
                        }
                        Err(e) => eprintln!("warning: {}: {e}", source(k)),
                    }
                }
                match outcome.reconstruction {
                    Ok(r) => {
                        warn_flags(r.channel, &r);
                        println!(
                            "{}: theta = {:.4} deg, phi = {:.4} deg, F = {:.6}",
                            r.channel,
                            r.state_exp.theta_deg(),
                            r.state_exp.phi_deg(),
                            r.fidelity
                        );
                        rows.push(r);
                    }
                    Err(e) => {
                        eprintln!("error: {}: {e}", traces[i].channel);
                        first_error.get_or_insert(e);
                    }
                }
            }
            Some(_) => {}
            None => match fit_trace(&traces[i], &exp.fit) {
                Ok(f) => {
                    report_fit(&source(i), &f);
                    let rec = fit_record(&source(i), &traces[i], &f);
                    write_json(&ctx.out.join(format!("fit_{}.json", stem(i))), &rec)?;
                    records.push(rec);
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", source(i));
                    first_error.get_or_insert(e);
                }
            },
        }
    }
    if !rows.is_empty() {
        write_reconstructions(BufWriter::new(File::create(ctx.out.join("reconstruction.csv"))?), &rows)?;
    }
    write_metadata(
        ctx,
        "fit",
        json!({ "inputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() }),
    )?;
    first_error.map_or(Ok(()), Err)
}

fn report_fit(source: &str, f: &SinusoidFit) {
    let sigma = f.phase_sigma().unwrap_or(f64::NAN);
    println!(
        "{source}: amplitude = {:.6e}, frequency = {:.6e} Hz, phase = {:.6} +/- {:.6} rad, offset = {:.6e}",
        f.amplitude, f.frequency, f.phase, sigma, f.offset
    );
}

pub fn tomograph(ctx: &Context, state: &PureState, channel: ChannelArg) -> Result<()> {
    let exp = &ctx.cfg.experiment;
    let mut outcomes: Vec<(RabiTrace, RabiTrace, ChannelOutcome)> = Vec::new();
    for ch in channel.channels() {
        outcomes.push(tomograph_channel(exp, state, ctx.seed, ch)?);
    }
    prepare_out(&ctx.out)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut first_error: Option<Error> = None;
    for (x, y, outcome) in outcomes {
        for t in [&x, &y] {
            write_trace(&ctx.out, t)?;
            match outcome.fit(t.axis) {
                Ok(f) => fits.push(fit_record(&trace_file(t.channel, t.axis), t, f)),
                Err(e) => eprintln!("warning: {} {}-axis fit: {e}", t.channel, t.axis),
            }
        }
        match outcome.reconstruction {
            Ok(r) => {
                warn_flags(r.channel, &r);
                println!(
                    "{}: F = {:.6} (theta = {:.4} deg, phi = {:.4} deg)",
                    r.channel,
                    r.fidelity,
                    r.state_exp.theta_deg(),
                    r.state_exp.phi_deg()
                );
                rows.push(r);
            }
            Err(e) => {
                eprintln!("error: {}: {e}", outcome.channel);
                first_error.get_or_insert(e);
            }
        }
    }
    write_reconstructions(BufWriter::new(File::create(ctx.out.join("reconstruction.csv"))?), &rows)?;
    write_json(&ctx.out.join("fits.json"), &Value::Array(fits))?;
    write_metadata(ctx, "tomograph", json!({ "state": state_json(state) }))?;
    first_error.map_or(Ok(()), Err)
}

pub fn study(ctx: &Context, which: StudyKind, calibrate: bool) -> Result<()> {
    match which {
        StudyKind::Batch => batch(ctx, calibrate),
        StudyKind::Fig5 => {
            let result = alpha_perturbation_study(&ctx.cfg.study, ctx.seed)?;
            let written = write_study_outputs(&result, &ctx.out, &ctx.hash)?;
            println!("error model: {}", result.error_description);
            println!("phi policy: {}", result.phi_policy);
            println!("theta_T_deg  mean_F      std_F      |dtheta|_deg  |dphi|_deg  trials");
            for p in &result.points {
                println!(
                    "{:>10.1}  {:.6}  {:.6}  {:>12.4}  {:>10.4}  {}",
                    p.theta_t_deg,
                    p.fidelity.mean,
                    p.fidelity.std,
                    p.abs_delta_theta_deg.mean,
                    p.abs_delta_phi_deg.mean,
                    p.trials
                );
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn batch(ctx: &Context, calibrate: bool) -> Result<()> {
    let mut exp = ctx.cfg.experiment.clone();
    prepare_out(&ctx.out)?;
    let mut calibration = Value::Null;
    if calibrate {
        let c = calibrate_noise(&exp, &ctx.cfg.suite, &ctx.cfg.calibration, ctx.seed)?;
        println!(
            "calibrated: pc_noise_rms = {:.4e} A (F = {:.5}), pl_count_rate = {:.4e} /s (F = {:.5})",
            c.pc.pc_noise_rms, c.pc_mean_fidelity, c.pl.pl_count_rate, c.pl_mean_fidelity
        );
        calibration = serde_json::to_value(&c)?;
        write_json(&ctx.out.join("calibration.json"), &calibration)?;
        exp = c.apply(&exp);
    }
    // Calibration and the batch draw from disjoint seed streams.
    let summary = batch_tomography(&ctx.cfg.suite, &exp, ctx.seed)?;
    for f in &summary.failures {
        eprintln!("warning: measurement {} failed: {}", f.index, f.error);
    }
    for s in [summary.pl.as_ref(), summary.pc.as_ref()].into_iter().flatten() {
        println!(
            "{}: F = {:.6} +/- {:.6} over {}, optimized F = {:.6} +/- {:.6}, dtheta = {:.3} +/- {:.3} deg, dphi = {:.3} +/- {:.3} deg",
            s.channel,
            s.fidelity.mean,
            s.fidelity.std,
            s.count,
            s.optimized_fidelity.mean,
            s.optimized_fidelity.std,
            s.delta_theta_deg.mean,
            s.delta_theta_deg.std,
            s.delta_phi_deg.mean,
            s.delta_phi_deg.std
        );
    }
    write_json(&ctx.out.join("batch_summary.json"), &serde_json::to_value(&summary)?)?;
    write_reconstructions(
        BufWriter::new(File::create(ctx.out.join("reconstructions.csv"))?),
        &summary.records,
    )?;
    write_metadata(
        ctx,
        "study batch",
        json!({ "calibrated": calibrate, "calibration": calibration }),
    )
}
