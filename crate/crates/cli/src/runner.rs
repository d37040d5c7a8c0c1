//! Command execution: each pipeline writes its CSV artifacts through a
//! shared run context that records a content hash per file and emits the
//! manifest at the end.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use impactlab::diffusivity::{
    acf, long_memory_report, simulate_stationary_flow, FlowSource, StationaryFlowParams,
};
use impactlab::irf::{
    impact_metrics, trajectory_closed, trajectory_iter, KappaMode, MetaorderSpec, Trajectory,
};
use impactlab::linmodels::{
    companion, fit, read_model, simulate_model, stationarity_report, LinearModel, ModelKind,
};
use impactlab::marketdata::{
    clip_session, merge_same_timestamp, parse_lobster, price_changes, ParseOptions,
    PriceConvention, RegressionDataset,
};
use impactlab::propagator::{
    asymptote, price_closed, simulate, simulate_ensemble, skeleton_metrics, volume_closed,
    ContinuousParams, DiscreteParams, KernelSpec,
};

use crate::config::{
    CalibrateBlock, Command, ContinuousBlock, Convention, DiffusivityBlock, DiscreteBlock,
    IngestBlock, KappaTag, KernelTag, ModelKindTag, SourceTag, SyntheticData, TrajectoryBlock,
};
use crate::sweep::run_sweep;
use crate::CliError;

/// Shared state of one run: output directory, master seed, and the list of
/// files written so far (name + content hash).
pub struct RunContext {
    out_dir: PathBuf,
    pub seed: u64,
    quiet: bool,
    files: Vec<(String, String)>,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, seed: u64, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Config(format!("output_dir {}: {e}", out_dir.display())))?;
        Ok(RunContext {
            out_dir,
            seed,
            quiet,
            files: Vec::new(),
        })
    }

    /// Writes one artifact file and records its hash for the manifest.
    pub fn write_file(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, content)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        let digest = Sha256::digest(content.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("hex formatting");
        }
        self.files.push((name.to_string(), hex));
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    /// Writes `manifest.txt`: one `<sha256>  <name>` line per artifact,
    /// sorted by name.
    fn write_manifest(&self) -> Result<(), CliError> {
        let mut entries = self.files.clone();
        entries.sort();
        let mut content = String::new();
        for (name, hash) in &entries {
            content.push_str(&format!("{hash}  {name}\n"));
        }
        let path = self.out_dir.join("manifest.txt");
        fs::write(&path, &content)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// Executes the command block and finishes with the manifest.
pub fn execute(command: Command, ctx: &mut RunContext) -> Result<(), CliError> {
    match command {
        Command::Ingest(block) => run_ingest(&block, ctx)?,
        Command::Calibrate(block) => run_calibrate(&block, ctx)?,
        Command::Trajectory(block) => run_trajectory(&block, ctx)?,
        Command::Continuous(block) => run_continuous(&block, ctx)?,
        Command::Discrete(block) => run_discrete(&block, ctx)?,
        Command::Diffusivity(block) => run_diffusivity(&block, ctx)?,
        Command::Sweep(block) => run_sweep(&block, ctx)?,
    }
    ctx.write_manifest()
}

// ---------------------------------------------------------------------------
// ingest

fn run_ingest(block: &IngestBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    let open = |path: &PathBuf| -> Result<BufReader<fs::File>, CliError> {
        fs::File::open(path)
            .map(BufReader::new)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    };
    let report = parse_lobster(
        block.asset_id.clone(),
        open(&block.messages)?,
        open(&block.orderbook)?,
        ParseOptions {
            include_hidden: block.include_hidden,
        },
    )
    .map_err(|e| CliError::Runtime(format!("marketdata: {e}")))?;
    let parsed = report.series.len();

    let merged = if block.merge_same_timestamp {
        merge_same_timestamp(&report.series)
    } else {
        report.series
    };
    let after_merge = merged.len();

    let clipped = clip_session(
        &merged,
        (block.clip_head_secs * 1e9).round() as i64,
        (block.clip_tail_secs * 1e9).round() as i64,
    );
    let series = clipped.series;

    let mut events = String::new();
    events.push_str(&format!("# asset_id={}\n", series.asset_id));
    events.push_str(&format!("# session_start_ns={}\n", series.session_start_ns));
    events.push_str(&format!("# session_end_ns={}\n", series.session_end_ns));
    events.push_str("timestamp_ns,direction,size,trade_price,mid_before,mid_after\n");
    for t in &series.ticks {
        events.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.timestamp_ns, t.direction, t.size, t.trade_price, t.mid_before, t.mid_after
        ));
    }
    ctx.write_file("events.csv", &events)?;

    let convention = match block.convention {
        Convention::PostTrade => PriceConvention::PostTrade,
        Convention::PreTrade => PriceConvention::PreTrade,
    };
    let (samples, n_samples) = match price_changes(&series, convention) {
        Ok(ds) => {
            let mut out = String::new();
            out.push_str(&format!("# convention={}\n", ds.convention.as_str()));
            out.push_str("dp,v\n");
            for i in 0..ds.len() {
                out.push_str(&format!("{},{}\n", ds.dp[i], ds.v[i]));
            }
            let n = ds.len();
            (out, n)
        }
        Err(e) => return Err(CliError::Runtime(format!("marketdata: {e}"))),
    };
    ctx.write_file("samples.csv", &samples)?;

    let summary = format!(
        "parsed,rejected,after_merge,after_clip,samples,empty_window\n{},{},{},{},{},{}\n",
        parsed, report.rejected, after_merge, series.len(), n_samples, clipped.empty_window
    );
    ctx.write_file("ingest_summary.csv", &summary)
}

// ---------------------------------------------------------------------------
// calibrate

/// Builds the synthetic ground truth: power-law flow lags summing to
/// `flow_sum` under a decaying lagged price response.
fn synthetic_truth(s: &SyntheticData) -> Result<LinearModel, CliError> {
    if s.p == 0 {
        return Err(CliError::Config("synthetic: p must be at least 1".into()));
    }
    if !(s.flow_sum.is_finite() && s.flow_sum.abs() < 1.0) {
        return Err(CliError::Config(format!(
            "synthetic: flow_sum must lie in (-1, 1) for a stationary truth, got {}",
            s.flow_sum
        )));
    }
    let tail: f64 = (1..=s.p).map(|i| (i as f64).powf(-s.flow_exponent)).sum();
    let d: Vec<f64> = (1..=s.p)
        .map(|i| s.flow_sum / tail * (i as f64).powf(-s.flow_exponent))
        .collect();
    let curve = |l: usize| s.impact_scale * (1.0 + l as f64).powf(-s.impact_exponent);
    let mut b = vec![curve(0)];
    for l in 1..=s.p {
        b.push(curve(l) - curve(l - 1));
    }
    Ok(LinearModel::tim(b, d))
}

fn synthetic_dataset(s: &SyntheticData, seed: u64) -> Result<RegressionDataset, CliError> {
    let truth = synthetic_truth(s)?;
    Ok(simulate_model(&truth, s.n, s.burn_in, seed, s.noise))
}

fn read_samples(path: &PathBuf) -> Result<RegressionDataset, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut dp = Vec::new();
    let mut v = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "dp,v" {
                return Err(CliError::Config(format!(
                    "{}: line {}: expected header \"dp,v\", got {line:?}",
                    path.display(),
                    idx + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            CliError::Config(format!(
                "{}: line {}: expected two comma-separated values",
                path.display(),
                idx + 1
            ))
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                CliError::Config(format!("{}: line {}: {e}", path.display(), idx + 1))
            })
        };
        dp.push(parse(a)?);
        v.push(parse(b)?);
    }
    Ok(RegressionDataset {
        dp,
        v,
        convention: PriceConvention::PostTrade,
    })
}

fn run_calibrate(block: &CalibrateBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    let ds = match (&block.data_file, &block.synthetic) {
        (Some(path), None) => read_samples(path)?,
        (None, Some(synth)) => synthetic_dataset(synth, ctx.seed)?,
        _ => {
            return Err(CliError::Config(
                "calibrate: exactly one of data_file and synthetic must be given".into(),
            ))
        }
    };
    let kind = match block.kind {
        ModelKindTag::Tim => ModelKind::Tim,
        ModelKindTag::Hasbrouck => ModelKind::Hasbrouck,
    };
    let model =
        fit(&ds, kind, block.p).map_err(|e| CliError::Runtime(format!("linmodels: {e}")))?;

    let mut model_csv = Vec::new();
    impactlab::linmodels::write_model(&mut model_csv, &model)
        .map_err(|e| CliError::Runtime(format!("linmodels: {e}")))?;
    let model_csv = String::from_utf8(model_csv).expect("model CSV is UTF-8");
    ctx.write_file("model.csv", &model_csv)?;

    let cs = companion(&model);
    let report = stationarity_report(&cs);
    let summary = format!(
        "kind,p,n_obs,resid_var_dp,resid_var_v,spectral_radius,sum_d,is_stationary\n{},{},{},{},{},{},{},{}\n",
        model.kind.as_str(),
        model.p,
        model.n_obs,
        model.resid_var_dp,
        model.resid_var_v,
        report.spectral_radius,
        report.sum_d,
        report.is_stationary
    );
    ctx.write_file("calibration_summary.csv", &summary)
}

// ---------------------------------------------------------------------------
// trajectory

fn run_trajectory(block: &TrajectoryBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    if block.cases.is_empty() {
        return Err(CliError::Config(
            "trajectory: at least one [[trajectory.case]] is required".into(),
        ));
    }
    let mut metrics = String::from("label,kappa,peak,long_term,reversion_ratio\n");
    for case in &block.cases {
        let model = match (&case.model_file, &case.synthetic) {
            (Some(path), None) => {
                let file = fs::File::open(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                read_model(BufReader::new(file))
                    .map_err(|e| CliError::Runtime(format!("linmodels: {e}")))?
            }
            (None, Some(synth)) => {
                let ds = synthetic_dataset(synth, ctx.seed)?;
                fit(&ds, ModelKind::Tim, synth.p)
                    .map_err(|e| CliError::Runtime(format!("linmodels: {e}")))?
            }
            _ => {
                return Err(CliError::Config(format!(
                    "trajectory case {:?}: exactly one of model_file and synthetic must be given",
                    case.label
                )))
            }
        };
        if case.kappas.is_empty() {
            return Err(CliError::Config(format!(
                "trajectory case {:?}: kappas must not be empty",
                case.label
            )));
        }
        for &kappa in &case.kappas {
            let spec = MetaorderSpec {
                child_size: case.child_size,
                duration: block.duration,
                horizon: block.horizon,
                kappa: match kappa {
                    KappaTag::VolumeCoupled => KappaMode::VolumeCoupled,
                    KappaTag::PriceOnly => KappaMode::PriceOnly,
                },
            };
            let traj = match spec.kappa {
                KappaMode::VolumeCoupled => trajectory_closed(&companion(&model), &spec),
                KappaMode::PriceOnly => trajectory_iter(&model, &spec),
            }
            .map_err(|e| CliError::Runtime(format!("irf: {e}")))?;

            let name = format!("trajectory_{}_{}.csv", case.label, spec.kappa.as_str());
            write_trajectory_file(ctx, &name, &traj, &[("label", case.label.clone())])?;

            let m = impact_metrics(&traj);
            metrics.push_str(&format!(
                "{},{},{},{},{}\n",
                case.label,
                spec.kappa.as_str(),
                m.peak,
                m.long_term,
                m.reversion_ratio.map_or(String::new(), |r| r.to_string())
            ));
        }
    }
    ctx.write_file("trajectory_metrics.csv", &metrics)
}

fn write_trajectory_file(
    ctx: &mut RunContext,
    name: &str,
    traj: &Trajectory,
    metadata: &[(&str, String)],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    impactlab::irf::write_trajectory(&mut buf, traj, metadata)
        .map_err(|e| CliError::Runtime(format!("irf: {e}")))?;
    let content = String::from_utf8(buf).expect("trajectory CSV is UTF-8");
    ctx.write_file(name, &content)
}

// ---------------------------------------------------------------------------
// continuous

fn run_continuous(block: &ContinuousBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    if block.alphas.is_empty() {
        return Err(CliError::Config(
            "continuous: alphas must not be empty".into(),
        ));
    }
    if !(block.dt.is_finite() && block.dt > 0.0 && block.t_max >= block.dt) {
        return Err(CliError::Config(format!(
            "continuous: need 0 < dt <= t_max, got dt={} t_max={}",
            block.dt, block.t_max
        )));
    }
    let n = (block.t_max / block.dt).floor() as usize;
    let mut summary = String::from("alpha,asymptote,price_at_end,price_at_t_max\n");
    for (i, &alpha) in block.alphas.iter().enumerate() {
        let cp = ContinuousParams {
            alpha,
            v_rate: block.v_rate,
            lam: block.lam,
            beta: block.beta,
            rho: block.rho,
            duration: block.duration,
        };
        let mut out = String::new();
        out.push_str(&format!("# alpha={alpha}\n"));
        out.push_str(&format!("# lam={}\n", block.lam));
        out.push_str(&format!("# beta={}\n", block.beta));
        out.push_str(&format!("# rho={}\n", block.rho));
        out.push_str(&format!("# v_rate={}\n", block.v_rate));
        out.push_str(&format!("# duration={}\n", block.duration));
        out.push_str("t,flow,price\n");
        for k in 0..=n {
            let t = block.dt * k as f64;
            let flow =
                volume_closed(&cp, t).map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
            let price =
                price_closed(&cp, t).map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
            out.push_str(&format!("{t},{flow},{price}\n"));
        }
        ctx.write_file(&format!("continuous_{i:02}.csv", i = i), &out)?;

        let asym =
            asymptote(&cp).map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
        let peak = price_closed(&cp, block.duration)
            .map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
        let end = price_closed(&cp, block.t_max)
            .map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
        summary.push_str(&format!("{alpha},{asym},{peak},{end}\n"));
    }
    ctx.write_file("continuous_summary.csv", &summary)
}

// ---------------------------------------------------------------------------
// discrete

pub fn kernel_from_tag(tag: KernelTag) -> KernelSpec {
    match tag {
        KernelTag::Exponential { rate } => KernelSpec::Exponential { rate },
        KernelTag::PowerLaw { exponent } => KernelSpec::PowerLaw { exponent },
    }
}

pub fn discrete_params(block: &DiscreteBlock, seed: u64) -> DiscreteParams {
    DiscreteParams {
        kernel_d: kernel_from_tag(block.flow_kernel),
        kernel_g: kernel_from_tag(block.impact_kernel),
        lam: block.lam,
        alpha: block.alpha,
        v_rate: block.v_rate,
        duration: block.duration,
        horizon: block.horizon,
        noise: block.noise,
        seed,
    }
}

fn run_discrete(block: &DiscreteBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    let params = discrete_params(block, ctx.seed);
    let path =
        simulate(&params).map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
    write_trajectory_file(
        ctx,
        "discrete_path.csv",
        &path,
        &[
            ("model", "mtim-discrete".to_string()),
            ("lam", block.lam.to_string()),
            ("alpha", block.alpha.to_string()),
            ("seed", ctx.seed.to_string()),
        ],
    )?;

    let margin = impactlab::propagator::criticality_margin(&params)
        .map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
    let skeleton = skeleton_metrics(&params)
        .map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
    let metrics = format!(
        "criticality_margin,peak,long_term,reversion_ratio\n{},{},{},{}\n",
        margin,
        skeleton.peak,
        skeleton.long_term,
        skeleton
            .reversion_ratio
            .map_or(String::new(), |r| r.to_string())
    );
    ctx.write_file("discrete_metrics.csv", &metrics)?;

    if block.n_paths > 1 {
        let ensemble = simulate_ensemble(&params, block.n_paths)
            .map_err(|e| CliError::Runtime(format!("propagator: {e}")))?;
        let mut out = String::new();
        out.push_str("# model=mtim-discrete\n");
        out.push_str(&format!("# n_paths={}\n", ensemble.n_paths));
        out.push_str("k,mean_price,mean_flow,std_err_price\n");
        for k in 0..ensemble.mean.price.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                ensemble.mean.times[k],
                ensemble.mean.price[k],
                ensemble.mean.volume[k],
                ensemble.std_err_price[k]
            ));
        }
        ctx.write_file("discrete_ensemble.csv", &out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// diffusivity

pub fn flow_params(block: &DiffusivityBlock, seed: u64) -> StationaryFlowParams {
    StationaryFlowParams {
        source: match block.source {
            SourceTag::Iid => FlowSource::Iid,
            SourceTag::LongMemory {
                tail_exponent,
                n_metaorders,
            } => FlowSource::LongMemory {
                tail_exponent,
                n_metaorders,
            },
        },
        ar_coefficients: block.ar_coefficients.clone(),
        length: block.length,
        seed,
    }
}

fn run_diffusivity(block: &DiffusivityBlock, ctx: &mut RunContext) -> Result<(), CliError> {
    let windows = impactlab::diffusivity::log_spaced_windows(
        block.windows.lo,
        block.windows.hi,
        block.windows.count,
    )
    .map_err(|e| CliError::Config(format!("diffusivity windows: {e}")))?;
    let flow = simulate_stationary_flow(&flow_params(block, ctx.seed))
        .map_err(|e| CliError::Runtime(format!("diffusivity: {e}")))?;
    let report = long_memory_report(&flow, block.delta, block.acf_range, &windows)
        .map_err(|e| CliError::Runtime(format!("diffusivity: {e}")))?;

    let out = format!(
        "gamma,gamma_se,spectral_slope,amplification,variance_exponent,variance_se\n{},{},{},{},{},{}\n",
        report.gamma.value,
        report.gamma.std_err,
        report.spectral_slope,
        report.amplification,
        report.variance_exponent.value,
        report.variance_exponent.std_err
    );
    ctx.write_file("diffusivity_report.csv", &out)?;

    let r = acf(&flow.filtered, block.acf_range.1)
        .map_err(|e| CliError::Runtime(format!("diffusivity: {e}")))?;
    let mut curve = String::from("lag,autocorrelation\n");
    for (lag, value) in r.iter().enumerate() {
        curve.push_str(&format!("{lag},{value}\n"));
    }
    ctx.write_file("diffusivity_acf.csv", &curve)
}
