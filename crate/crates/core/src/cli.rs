//! The `reprocs` command line. Exit codes: 0 success, 1 internal failure,
//! 2 usage or format error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::datagen::{simulate, Scenario, TABLE1_POST};
use crate::engine::{EngineParams, SubspaceMode};
use crate::error::{Error, Result};
use crate::eval::{
    frame_errors, run_benchmark, verify_denseness_windows, verify_slow_subspace_change, verify_support_dynamics,
    window_bases, write_reports_csv, BenchConfig,
};
use crate::io::{
    ingest_pgm_dir, read_sequence, read_supports_csv, write_sequence, Checkpoint, RunConfig,
    RunMode, SequenceReader, SequenceWriter, SupportCsvWriter,
};
use crate::operator::DenseOperator;

#[derive(Debug, Parser)]
#[command(name = "reprocs", version, about = "Online sparse + low-rank separation of frame sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the initial background subspace from sparse-free frames.
    Train(TrainArgs),
    /// Separate a sequence frame by frame using a trained checkpoint.
    Separate(SeparateArgs),
    /// Write a synthetic scenario with ground truth.
    Simulate(SimulateArgs),
    /// Model-verification series (subspace change, denseness, support dynamics).
    Verify(VerifyArgs),
    /// Monte-Carlo benchmark over simulated realizations.
    Bench(BenchArgs),
    /// Convert a directory of P5 PGM frames into a sequence file.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Percentage of training energy the basis must capture.
    #[arg(long, default_value_t = 95.0)]
    pub b: f64,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip subtracting the per-pixel training mean.
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// key=value run config; explicit flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// ppca, rpca or compressive.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Measurement matrix (sequence file with one column per signal entry).
    #[arg(long)]
    pub operator: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<usize>,
    #[arg(long)]
    pub kmin: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Deletion threshold rule: energy or residual-max.
    #[arg(long)]
    pub threshold: Option<String>,
    /// True sparse frames; adds per-frame NMSE to metrics.csv.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of table1-9-large, table1-9-small, table1-27-large, table1-27-small,
    /// lake-like-motion.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Frames after training.
    #[arg(long, default_value_t = TABLE1_POST)]
    pub post: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Background frames.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 725)]
    pub tau: usize,
    #[arg(long, default_value_t = 95.0)]
    pub b: f64,
    /// Foreground supports (t,size,indices) for the denseness and support-change series.
    #[arg(long)]
    pub supports: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario name, as for `simulate`.
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 10)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TABLE1_POST)]
    pub post: usize,
    /// ppca or rpca.
    #[arg(long, default_value = "ppca")]
    pub mode: String,
    /// Run compressively with a Gaussian operator of m = ratio * n rows.
    #[arg(long)]
    pub compressive: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Per-realization table; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-frame NMSE and beta for every realization.
    #[arg(long)]
    pub frames_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render().ansi());
            return e.exit_code();
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Separate(a) => cmd_separate(&a, out).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Ingest(a) => {
            let s = ingest_pgm_dir(&a.dir, &a.out)?;
            writeln!(out, "frames={} rows={} cols={} n={}", s.frames, s.rows, s.cols, s.rows * s.cols)?;
            Ok(())
        }
    }
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let training = read_sequence(&a.input)?;
    let ck = Checkpoint::train(&training, a.b, !a.no_center)?;
    ck.save(&a.out)?;
    writeln!(
        out,
        "n={} t_train={} r_hat={} sigma_min={}",
        ck.n(),
        ck.t_train,
        ck.r_hat(),
        ck.sigma_min()
    )?;
    Ok(())
}

/// Totals reported by `separate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparateSummary {
    pub frames: usize,
    pub changes: usize,
    pub final_rank: usize,
    /// Pooled NMSE when ground truth was supplied.
    pub nmse: Option<f64>,
}

fn resolve_run(a: &SeparateArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &a.mode {
        cfg.mode = m.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
    }
    macro_rules! set {
        ($field:ident, $dst:expr) => {
            if let Some(v) = a.$field.clone() {
                $dst = v;
            }
        };
    }
    set!(alpha, cfg.params.alpha);
    set!(kmin, cfg.params.k_min);
    set!(kmax, cfg.params.k_max);
    set!(q, cfg.params.q);
    if let Some(rule) = &a.threshold {
        cfg.params.threshold = rule.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
    }
    if a.ckpt.is_some() {
        cfg.checkpoint = a.ckpt.clone();
    }
    if a.input.is_some() {
        cfg.input = a.input.clone();
    }
    if a.out_dir.is_some() {
        cfg.out_dir = a.out_dir.clone();
    }
    if a.operator.is_some() {
        cfg.operator = a.operator.clone();
    }
    cfg.params.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required (or set it in --config)")))
}

/// Stream `input` through the engine, writing each frame's results before the
/// next frame is read.
pub fn cmd_separate(a: &SeparateArgs, out: &mut dyn Write) -> Result<SeparateSummary> {
    let cfg = resolve_run(a)?;
    let ckpt_path = required(&cfg.checkpoint, "ckpt")?;
    let input_path = required(&cfg.input, "input")?;
    let out_dir = required(&cfg.out_dir, "out-dir")?;
    let operator = match (cfg.mode, &cfg.operator) {
        (RunMode::Compressive, None) => {
            return Err(Error::Usage("compressive mode requires --operator".into()))
        }
        (RunMode::Compressive, Some(p)) => Some(DenseOperator::new(read_sequence(p)?.into_matrix())),
        (_, Some(_)) => {
            return Err(Error::Usage("--operator is only valid with --mode compressive".into()))
        }
        (_, None) => None,
    };

    let ck = Checkpoint::load(ckpt_path)?;
    let mut reader = SequenceReader::open(input_path)?;
    if reader.n() != ck.n() {
        return Err(Error::dims(ck.n(), reader.n()));
    }
    let params = EngineParams {
        b_percent: ck.b_percent,
        ..cfg.params
    };
    let mut engine = ck.engine(params, cfg.mode.subspace_mode())?;
    if let Some(op) = operator {
        engine.set_compressive(op)?;
    }
    let signal_len = engine.signal_len();
    let mut truth = match &a.truth {
        Some(p) => {
            let r = SequenceReader::open(p)?;
            if r.n() != signal_len || r.len() != reader.len() {
                return Err(Error::Usage(format!(
                    "truth is {}x{}, expected {signal_len}x{}",
                    r.n(),
                    r.len(),
                    reader.len()
                )));
            }
            Some(r)
        }
        None => None,
    };

    fs::create_dir_all(out_dir)?;
    let mut s_out = SequenceWriter::create(out_dir.join("S_hat.seq"), signal_len)?;
    let mut l_out = SequenceWriter::create(out_dir.join("L_hat.seq"), ck.n())?;
    let mut supports = SupportCsvWriter::new(BufWriter::new(File::create(out_dir.join("supports.csv"))?))?;
    let mut metrics = csv::Writer::from_writer(BufWriter::new(File::create(out_dir.join("metrics.csv"))?));
    let mut header = vec![
        "t", "support_size", "s_norm", "l_norm", "weighted", "solver_converged", "phase",
        "subspace_updated", "rank",
    ];
    if truth.is_some() {
        header.push("nmse");
    }
    metrics.write_record(&header)?;

    let (mut err_total, mut energy_total) = (0.0, 0.0);
    let mut frames = 0;
    while let Some(mut m) = reader.next_frame()? {
        m -= &ck.mean;
        let r = engine.process_frame(m.view())?;
        let l_hat = &r.l_hat + &ck.mean;
        s_out.push(r.s_hat.view())?;
        l_out.push(l_hat.view())?;
        supports.write(r.t, &r.support)?;
        let mut row = vec![
            r.t.to_string(),
            r.support.len().to_string(),
            r.s_hat.dot(&r.s_hat).sqrt().to_string(),
            l_hat.dot(&l_hat).sqrt().to_string(),
            r.weighted.to_string(),
            r.solver_converged.to_string(),
            r.phase.to_string(),
            r.subspace_updated.to_string(),
            engine.basis().rank().to_string(),
        ];
        if let Some(tr) = truth.as_mut() {
            let s = tr.next_frame()?.ok_or_else(|| Error::Format("truth ended early".into()))?;
            let (e, p) = frame_errors(s.view(), r.s_hat.view());
            err_total += e;
            energy_total += p;
            row.push(if e == 0.0 { 0.0 } else { e / p }.to_string());
        }
        metrics.write_record(&row)?;
        frames += 1;
    }
    s_out.finish()?;
    l_out.finish()?;
    supports.flush()?;
    metrics.flush()?;

    let mut events = csv::Writer::from_path(out_dir.join("events.csv"))?;
    events.write_record(["j", "t_hat", "detected_at", "completed_at", "steps", "new_dims"])?;
    for ev in engine.events() {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        events.write_record([
            ev.j.to_string(),
            ev.t_hat.to_string(),
            ev.detected_at.to_string(),
            opt(ev.completed_at),
            opt(ev.steps),
            ev.new_dims.to_string(),
        ])?;
    }
    events.flush()?;

    let nmse = match truth {
        Some(_) if energy_total > 0.0 => Some(err_total / energy_total),
        _ => None,
    };
    let summary = SeparateSummary {
        frames,
        changes: engine.changes(),
        final_rank: engine.basis().rank(),
        nmse,
    };
    write!(
        out,
        "frames={} changes={} rank={}",
        summary.frames, summary.changes, summary.final_rank
    )?;
    match summary.nmse {
        Some(v) => writeln!(out, " nmse={v:e}")?,
        None => writeln!(out)?,
    }
    Ok(summary)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let scenario: Scenario = a.scenario.parse()?;
    if a.post == 0 {
        return Err(Error::Usage("--post must be at least 1".into()));
    }
    let data = simulate(scenario, a.seed, a.post)?;
    let dir = &a.out_dir;
    fs::create_dir_all(dir)?;
    write_sequence(dir.join("train.seq"), &data.train)?;
    write_sequence(dir.join("measurements.seq"), &data.measurements)?;
    write_sequence(dir.join("l_true.seq"), &data.l_true)?;
    write_sequence(dir.join("s_true.seq"), &data.s_true)?;
    write_sequence(dir.join("p0.seq"), &crate::FrameSequence::new(data.p0.matrix().to_owned()))?;
    write_sequence(dir.join("p_new.seq"), &crate::FrameSequence::new(data.p_new.matrix().to_owned()))?;
    let mut sup = SupportCsvWriter::new(BufWriter::new(File::create(dir.join("supports.csv"))?))?;
    for (i, s) in data.supports.iter().enumerate() {
        sup.write(data.t_train + 1 + i, s)?;
    }
    sup.flush()?;

    let (b_percent, q) = scenario.engine_hints();
    let (rows, cols) = data.image_dims.unwrap_or((data.n(), 1));
    let manifest = format!(
        "scenario={scenario}\nseed={}\nn={}\nt_train={}\nt_change={}\npost_frames={}\nimage_rows={rows}\nimage_cols={cols}\nb_percent={b_percent}\nq={q}\nfiles=train.seq measurements.seq l_true.seq s_true.seq p0.seq p_new.seq supports.csv run.cfg\n",
        a.seed,
        data.n(),
        data.t_train,
        data.t_change,
        a.post,
    );
    fs::write(dir.join("manifest.txt"), manifest)?;
    let run = RunConfig {
        seed: a.seed,
        params: EngineParams {
            b_percent,
            q,
            ..EngineParams::default()
        },
        ..RunConfig::default()
    };
    fs::write(dir.join("run.cfg"), run.to_string())?;
    writeln!(
        out,
        "scenario={scenario} n={} t_train={} frames={} dir={}",
        data.n(),
        data.t_train,
        a.post,
        dir.display()
    )?;
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let l = read_sequence(&a.input)?;
    let ratio = verify_slow_subspace_change(&l, a.tau, a.b)?;
    fs::create_dir_all(&a.out_dir)?;
    ratio.write_csv(BufWriter::new(File::create(a.out_dir.join("subspace_change.csv"))?))?;
    write!(out, "subspace_change_mean={}", ratio.aggregate)?;
    if let Some(path) = &a.supports {
        let supports: Vec<_> = read_supports_csv(File::open(path)?, l.n())?
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        let bases = window_bases(&l, a.tau, a.b)?;
        let dense = verify_denseness_windows(&bases, a.tau, &supports)?;
        dense.write_csv(BufWriter::new(File::create(a.out_dir.join("denseness.csv"))?))?;
        let dyn_ = verify_support_dynamics(&supports, l.n())?;
        write_reports_csv(
            BufWriter::new(File::create(a.out_dir.join("support_dynamics.csv"))?),
            &[&dyn_.size, &dyn_.added, &dyn_.removed],
        )?;
        write!(
            out,
            " denseness_mean={} support_size_mean={} added_mean={} removed_mean={}",
            dense.aggregate, dyn_.size.aggregate, dyn_.added.aggregate, dyn_.removed.aggregate
        )?;
    }
    writeln!(out)?;
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let scenario: Scenario = a.case.parse()?;
    let mode: SubspaceMode = a.mode.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
    let mut cfg = BenchConfig::new(scenario);
    cfg.realizations = a.realizations;
    cfg.seed = a.seed;
    cfg.post_frames = a.post;
    cfg.mode = mode;
    cfg.compression = a.compressive;
    cfg.threads = a.threads;
    if a.q.is_some() || a.b.is_some() {
        let mut p = cfg.engine_params();
        p.q = a.q.unwrap_or(p.q);
        p.b_percent = a.b.unwrap_or(p.b_percent);
        cfg.params = Some(p);
    }
    let report = run_benchmark(&cfg)?;
    match &a.out {
        Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
        None => report.write_csv(&mut *out)?,
    }
    if let Some(p) = &a.frames_out {
        report.write_frames_csv(BufWriter::new(File::create(p)?))?;
    }
    writeln!(out, "{}", report.table_row())?;
    Ok(())
}
