//! The `dynres` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dynres_core::choi::{random_channel, validate_channel, ChannelChoi, SystemPair};
use dynres_core::comb::{comb_apply, random_comb, validate_comb};
use dynres_core::conic::IpmSettings;
use dynres_core::problems::{
    conversion_distance, diamond_distance, extract_witness, g_value, monotone_f, shifted_monotone, witness_channel,
    Form, ZERO_TOL,
};
use dynres_core::protocols::{
    adaptive_cost, adaptive_distill, cost_single_shot, distill_single_shot, GoldenFamily, ScanOptions,
};
use dynres_core::supermap::{
    align_realizations, apply_superchannel, random_realization, random_superchannel, realize, rep_convert,
    validate_superchannel, Rep,
};
use dynres_core::theory::{
    is_free_channel, is_free_comb, is_free_superchannel, sample_free_channel, sample_free_comb,
    sample_free_superchannel, Parties, Side, TheoryKind, TheorySpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::format::*;
use crate::table::render;
use crate::CliError;

/// Environment variable overriding the solver iteration cap.
pub const ITERS_ENV: &str = "DYNRES_SOLVER_ITERS";

#[derive(Debug, Parser)]
#[command(name = "dynres", version, about = "Superchannels, combs and dynamical resource theories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Free theory.
    #[arg(long, global = true, value_enum)]
    pub theory: Option<TheoryArg>,
    /// Bipartition as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub bipartition: Option<String>,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, global = true, default_value_t = 4)]
    pub dmax: usize,
    /// Number of resources for adaptive protocols.
    #[arg(long, global = true, default_value_t = 1)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Solver feasibility and gap tolerance; for cost and distill, the
    /// slack added to ε instead.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the JSON report here and print a summary table on stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormArg::Both)]
    pub form: FormArg,
    /// Include solver variable values in reports.
    #[arg(long, global = true)]
    pub with_values: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryArg {
    All,
    Ppt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Primal,
    Dual,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepArg {
    P,
    Q,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MonotoneArg {
    F,
    #[value(name = "g")]
    Gp,
    /// `G_P = f_P − g(P)`.
    #[value(name = "G")]
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Cost,
    Distill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleArg {
    Channel,
    Superchannel,
    Realization,
    Comb,
    FreeChannel,
    FreeSuperchannel,
    FreeComb,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a Choi matrix is a channel (and free, with --theory).
    ValidateChannel {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check the superchannel conditions (and freeness, with --theory).
    ValidateSuperchannel {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check the comb conditions (and freeness, with --theory).
    ValidateComb {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Minimal realization of a superchannel.
    Realize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Unitary relating two realizations with the same environment.
    Align {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Apply a superchannel or comb to channels.
    Apply {
        #[arg(long = "in")]
        input: PathBuf,
        /// One channel per slot.
        #[arg(long = "channel", required = true)]
        channels: Vec<PathBuf>,
    },
    /// P, Q or R representation of a superchannel.
    Rep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        rep: RepArg,
    },
    /// f_P(N), g(P) or G_P(N).
    Monotone {
        /// The channel N (not needed for g).
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        p: PathBuf,
        #[arg(long, value_enum, default_value_t = MonotoneArg::F)]
        kind: MonotoneArg,
    },
    /// Conversion distance from one channel to another under free superchannels.
    ConvertDistance {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Single-shot ε-cost in maximally entangled golden resources.
    Cost {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Single-shot ε-distillation of maximally entangled golden resources.
    Distill {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Cost or distillation with n resources in a free comb.
    Adaptive {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Slot k receives resource order[k].
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// Half the diamond-norm distance, from both semidefinite forms.
    Diamond {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Resource witness separating two channels, and a channel P with f_P
    /// ordered against the conversion.
    Witness {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Seeded random objects.
    Sample {
        #[arg(long, value_enum)]
        kind: SampleArg,
        /// System A (channels, slots) as in,out.
        #[arg(long, value_delimiter = ',', default_value = "2,2")]
        sys_a: Vec<usize>,
        /// System B (output side, comb io) as in,out.
        #[arg(long, value_delimiter = ',', default_value = "2,2")]
        sys_b: Vec<usize>,
        /// Environment dimension of the underlying dilation.
        #[arg(long, default_value_t = 2)]
        env: usize,
    },
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs an invocation without touching the process streams.
pub fn execute<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match run(&cli) {
        Ok(report) => match emit(&cli.opts, &report) {
            Ok(stdout) => Outcome { code: 0, stdout, stderr: String::new() },
            Err(e) => failure(&e),
        },
        Err(e) => failure(&e),
    }
}

fn failure(e: &CliError) -> Outcome {
    let body = json!({"error": {"kind": e.category, "message": e.message}});
    let text = serde_json::to_string_pretty(&body).expect("json") + "\n";
    match e.kind {
        crate::ErrorKind::Domain => Outcome { code: 1, stdout: text, stderr: String::new() },
        crate::ErrorKind::Usage => {
            Outcome { code: 2, stdout: String::new(), stderr: format!("error: {}\n", e.message) }
        }
    }
}

fn emit(opts: &Options, report: &Value) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(report).expect("json") + "\n";
    match &opts.out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(render(report))
        }
        None => Ok(text),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable report")
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn load_channel(path: &Path) -> Result<ChannelChoi, CliError> {
    read_json::<ChannelJson>(path)?.to_channel()
}

/// Loads a channel and rejects it unless it is CPTP.
fn load_valid_channel(path: &Path) -> Result<ChannelChoi, CliError> {
    let n = load_channel(path)?;
    let v = validate_channel(&n);
    if !v.valid {
        return Err(dynres_core::Error::InvalidChannel(format!("{}: {}", path.display(), v.notes.join("; "))).into());
    }
    Ok(n)
}

fn settings(opts: &Options, use_tol: bool) -> Result<IpmSettings, CliError> {
    let mut s = IpmSettings::default();
    if let Ok(v) = std::env::var(ITERS_ENV) {
        s.max_iter =
            v.trim().parse().map_err(|_| CliError::usage(format!("{ITERS_ENV} must be a positive integer")))?;
    }
    if use_tol {
        if let Some(t) = opts.tol {
            s.feas_tol = t;
            s.gap_tol = t;
        }
    }
    Ok(s)
}

fn form(opts: &Options) -> Form {
    match opts.form {
        FormArg::Primal => Form::Primal,
        FormArg::Dual => Form::Dual,
        FormArg::Both => Form::Both,
    }
}

fn bipartition(opts: &Options) -> Result<Option<TheoryJson>, CliError> {
    let Some(b) = &opts.bipartition else { return Ok(None) };
    let text = if b.trim_start().starts_with('{') { b.clone() } else { read_text(Path::new(b))? };
    TheoryJson::parse(&text).map(Some)
}

fn kind(opts: &Options) -> Result<TheoryKind, CliError> {
    let from_json = bipartition(opts)?.map(|b| b.kind()).transpose()?.flatten();
    Ok(match (opts.theory, from_json) {
        (Some(TheoryArg::All), _) => TheoryKind::All,
        (Some(TheoryArg::Ppt), _) => TheoryKind::Ppt,
        (None, Some(k)) => k,
        (None, None) if opts.bipartition.is_some() => TheoryKind::Ppt,
        (None, None) => TheoryKind::All,
    })
}

fn theory_given(opts: &Options) -> bool {
    opts.theory.is_some() || opts.bipartition.is_some()
}

fn theory(opts: &Options, a: SystemPair, b: SystemPair) -> Result<TheorySpec, CliError> {
    match kind(opts)? {
        TheoryKind::All => {
            if opts.bipartition.is_some() && opts.theory == Some(TheoryArg::All) {
                return Err(CliError::usage("--bipartition is meaningless for --theory all"));
            }
            Ok(TheorySpec::all())
        }
        TheoryKind::Ppt => {
            let b_json = bipartition(opts)?.ok_or_else(|| CliError::usage("--theory ppt needs --bipartition"))?;
            Ok(TheorySpec::ppt(b_json.parties(a, b)?)?)
        }
    }
}

/// Theory in which a lone channel plays side A.
fn channel_theory(opts: &Options, s: SystemPair) -> Result<TheorySpec, CliError> {
    match kind(opts)? {
        TheoryKind::All => Ok(TheorySpec::all()),
        TheoryKind::Ppt => {
            let b_json = bipartition(opts)?.ok_or_else(|| CliError::usage("--theory ppt needs --bipartition"))?;
            let cp = b_json.channel_parties(s, ["A0", "A1"])?;
            Ok(TheorySpec::ppt(Parties::from_sides(&cp, &cp))?)
        }
    }
}

fn system(v: &[usize], what: &str) -> Result<SystemPair, CliError> {
    match v {
        [a, b] if *a > 0 && *b > 0 => Ok(SystemPair::new(*a, *b)),
        _ => Err(CliError::usage(format!("--{what} takes two positive dimensions, e.g. 2,2"))),
    }
}

/// Dispatches a parsed invocation to the library and builds its report.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let opts = &cli.opts;
    match &cli.command {
        Command::ValidateChannel { input } => {
            let n = load_channel(input)?;
            let mut v = ValidationJson::new(&validate_channel(&n));
            if theory_given(opts) {
                let f = is_free_channel(&n, &channel_theory(opts, n.sys)?, Side::A)?;
                v.free = Some(f.free && v.pass);
                v.pt_min_eig = Some(f.pt_min_eig);
            }
            Ok(to_value(&v))
        }
        Command::ValidateSuperchannel { input } => {
            let t = read_json::<SuperChoiJson>(input)?.to_superchoi()?;
            let mut v = ValidationJson::new(&validate_superchannel(&t));
            if theory_given(opts) {
                let f = is_free_superchannel(&t, &theory(opts, t.sys_a, t.sys_b)?)?;
                v.free = Some(f.free);
                v.pt_min_eig = Some(f.pt_min_eig);
            }
            Ok(to_value(&v))
        }
        Command::ValidateComb { input } => {
            let c = read_json::<CombJson>(input)?.to_comb()?;
            let mut v = ValidationJson::new(&validate_comb(&c)?);
            if theory_given(opts) {
                let slot = *c.teeth.first().ok_or_else(|| CliError::domain("comb has no slots"))?;
                if c.teeth.iter().any(|&t| t != slot) {
                    return Err(CliError::domain("free combs need identical slots"));
                }
                let f = is_free_comb(&c, &theory(opts, slot, c.io)?)?;
                v.free = Some(f.free);
                v.pt_min_eig = Some(f.pt_min_eig);
            }
            Ok(to_value(&v))
        }
        Command::Realize { input } => {
            let t = read_json::<SuperChoiJson>(input)?.to_superchoi()?;
            let v = validate_superchannel(&t);
            if !v.valid {
                return Err(dynres_core::Error::InvalidSuperchannel(v.notes.join("; ")).into());
            }
            Ok(to_value(&RealizationJson::new(&realize(&t)?)))
        }
        Command::Align { from, to } => {
            let r1 = read_json::<RealizationJson>(from)?.to_realization()?;
            let r2 = read_json::<RealizationJson>(to)?.to_realization()?;
            let a = align_realizations(&r1, &r2)?;
            Ok(json!({"unitary": MatrixJson::rect(&a.unitary), "residual": a.residual}))
        }
        Command::Apply { input, channels } => {
            let chans = channels.iter().map(|p| load_valid_channel(p)).collect::<Result<Vec<_>, _>>()?;
            let raw: Value = read_json(input)?;
            let out = if raw.get("teeth").is_some() {
                let c = serde_json::from_value::<CombJson>(raw)
                    .map_err(|e| CliError::domain(format!("{}: {e}", input.display())))?
                    .to_comb()?;
                comb_apply(&c, &chans)?
            } else {
                let t = serde_json::from_value::<SuperChoiJson>(raw)
                    .map_err(|e| CliError::domain(format!("{}: {e}", input.display())))?
                    .to_superchoi()?;
                let [n] = &chans[..] else {
                    return Err(CliError::usage("a superchannel takes exactly one --channel"));
                };
                apply_superchannel(&t, n)?
            };
            Ok(to_value(&ChannelJson::new(&out)))
        }
        Command::Rep { input, rep } => {
            let t = read_json::<SuperChoiJson>(input)?.to_superchoi()?;
            let rep = match rep {
                RepArg::P => Rep::P,
                RepArg::Q => Rep::Q,
                RepArg::R => Rep::R,
            };
            Ok(to_value(&RepJson::new(&rep_convert(&t, rep)?)))
        }
        Command::Monotone { input, p, kind: which } => {
            let pc = load_valid_channel(p)?;
            let s = settings(opts, true)?;
            let n = match input {
                Some(path) => Some(load_valid_channel(path)?),
                None if *which == MonotoneArg::Gp => None,
                None => return Err(CliError::usage("f and G need the channel N via --in")),
            };
            let a = n.as_ref().map_or(pc.sys, |n| n.sys);
            let t = theory(opts, a, pc.sys)?;
            Ok(match (which, n) {
                (MonotoneArg::Gp, _) => {
                    json!({"kind": "g", "theory": theory_json(&t), "bound": BoundJson::new(&g_value(&pc, &t, &s)?, opts.with_values)})
                }
                (MonotoneArg::F, Some(n)) => {
                    let b = monotone_f(&n, &pc, &t, form(opts), &s)?;
                    json!({"kind": "f", "value": b.value, "theory": theory_json(&t), "bound": BoundJson::new(&b, opts.with_values)})
                }
                (MonotoneArg::Shifted, Some(n)) => {
                    let m = shifted_monotone(&n, &pc, &t, form(opts), &s)?;
                    json!({
                        "kind": "G",
                        "value": m.value,
                        "theory": theory_json(&t),
                        "f": BoundJson::new(&m.f, opts.with_values),
                        "g": BoundJson::new(&m.g, opts.with_values),
                    })
                }
                _ => unreachable!("N is loaded for f and G"),
            })
        }
        Command::ConvertDistance { from, to } => {
            let (n, m) = (load_valid_channel(from)?, load_valid_channel(to)?);
            let t = theory(opts, n.sys, m.sys)?;
            let b = conversion_distance(&n, &m, &t, form(opts), &settings(opts, true)?)?;
            let mut v = to_value(&BoundJson::new(&b, opts.with_values));
            v["theory"] = to_value(&theory_json(&t));
            Ok(v)
        }
        Command::Cost { input } => protocol(opts, input, TaskArg::Cost, 1, None),
        Command::Distill { input } => protocol(opts, input, TaskArg::Distill, 1, None),
        Command::Adaptive { input, task, order } => protocol(opts, input, *task, opts.n, Some(order.as_deref())),
        Command::Diamond { from, to } => {
            let (e, f) = (load_valid_channel(from)?, load_valid_channel(to)?);
            let d = diamond_distance(&e, &f, &settings(opts, true)?)?;
            Ok(to_value(&DiamondJson::new(&d, opts.with_values)))
        }
        Command::Witness { from, to } => {
            let (n, m) = (load_valid_channel(from)?, load_valid_channel(to)?);
            let t = theory(opts, n.sys, m.sys)?;
            let b = conversion_distance(&n, &m, &t, Form::Both, &settings(opts, true)?)?;
            let w = extract_witness(&n, &m, &t, &b)?;
            let p = witness_channel(&w, m.sys)?;
            Ok(json!({
                "distance": b.value,
                "gap": b.gap(),
                "t": w.t,
                "objective": w.objective,
                "margin": w.cone.margin,
                "decomposition_error": w.cone.decomposition_error()?,
                "zeta": MatrixJson::new(&[m.sys.in_dim, m.sys.out_dim], &w.zeta),
                "eta": MatrixJson::new(&[m.sys.in_dim], &w.eta),
                "witness": MatrixJson::new(&[w.cone.w.nrows()], &w.cone.w),
                "channel": ChannelJson::new(&p),
            }))
        }
        Command::Sample { kind: what, sys_a, sys_b, env } => sample(opts, *what, sys_a, sys_b, *env),
    }
}

fn protocol(
    opts: &Options,
    input: &Path,
    task: TaskArg,
    n: usize,
    adaptive: Option<Option<&[usize]>>,
) -> Result<Value, CliError> {
    let ch = load_valid_channel(input)?;
    let k = kind(opts)?;
    let golden = GoldenFamily::new(k);
    let side = match task {
        TaskArg::Cost => ["B0", "B1"],
        TaskArg::Distill => ["A0", "A1"],
    };
    let parties = match k {
        TheoryKind::All => None,
        TheoryKind::Ppt => {
            let b = bipartition(opts)?.ok_or_else(|| CliError::usage("--theory ppt needs --bipartition"))?;
            Some(b.channel_parties(ch.sys, side)?)
        }
    };
    let scan = ScanOptions {
        d_max: opts.dmax,
        tol: opts.tol.unwrap_or(ZERO_TOL),
        settings: settings(opts, false)?,
        ..ScanOptions::default()
    };
    let r = match (task, adaptive) {
        (TaskArg::Cost, None) => cost_single_shot(&ch, parties.as_ref(), opts.eps, &golden, &scan)?,
        (TaskArg::Distill, None) => distill_single_shot(&ch, parties.as_ref(), opts.eps, &golden, &scan)?,
        (TaskArg::Cost, Some(order)) => adaptive_cost(&ch, parties.as_ref(), opts.eps, &golden, n, order, &scan)?,
        (TaskArg::Distill, Some(order)) => adaptive_distill(&ch, parties.as_ref(), opts.eps, &golden, n, order, &scan)?,
    };
    Ok(to_value(&ProtocolJson::new(&r)))
}

fn sample(opts: &Options, what: SampleArg, sys_a: &[usize], sys_b: &[usize], env: usize) -> Result<Value, CliError> {
    let a = system(sys_a, "sys-a")?;
    let b = system(sys_b, "sys-b")?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let teeth = vec![a; opts.n];
    Ok(match what {
        SampleArg::Channel => to_value(&ChannelJson::new(&random_channel(a, env, &mut rng)?)),
        SampleArg::Superchannel => to_value(&SuperChoiJson::new(&random_superchannel(a, b, env, &mut rng)?)),
        SampleArg::Realization => to_value(&RealizationJson::new(&random_realization(a, b, env, &mut rng)?)),
        SampleArg::Comb => to_value(&CombJson::new(&random_comb(b, &teeth, env, &mut rng)?)),
        SampleArg::FreeChannel => {
            let t = channel_theory(opts, a)?;
            to_value(&ChannelJson::new(&sample_free_channel(&t, Side::A, a, &mut rng)?))
        }
        SampleArg::FreeSuperchannel => {
            let t = theory(opts, a, b)?;
            to_value(&SuperChoiJson::new(&sample_free_superchannel(&t, a, b, &mut rng)?))
        }
        SampleArg::FreeComb => {
            let t = theory(opts, a, b)?;
            to_value(&CombJson::new(&sample_free_comb(&t, opts.n, a, b, &mut rng)?))
        }
    })
}
