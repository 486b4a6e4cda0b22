//! Command-line front end. One verb per pipeline stage; stages hand off
//! through the text formats of the library (model documents, sparse chains,
//! partitions, distributions).
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 usage, 3 negative
//! verdict (not lumpable, not symmetric, commutation or estimate failure),
//! 4 parse error, 5 validation or dimension error, 6 enumeration cap.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;

use crate::analysis::{absorption_analysis, classify_states, commutation_profile, propagate, Distribution};
use crate::configspace::{ConfigSpace, Configuration, DEFAULT_CAP};
use crate::error::Error;
use crate::lumping::{
    check_lumpable_with, frequency_partition, half_hypercube_partition, line_pairing, lump_by_representative,
    lump_with, moran_partition, LumpOptions, LumpVerdict,
};
use crate::microchain::{build_micro_chain, enumerate_maps};
use crate::model::{parse_model, ModelSpec};
use crate::partition::Partition;
use crate::rational::format_ratio;
use crate::sim::{estimate_matrix, simulate};
use crate::sparse::StochasticMatrix;
use crate::symmetry::{is_chain_symmetric, orbits, GeneratorSet, SymmetryVerdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;
pub const EXIT_CAP: i32 = 6;

/// Environment variable holding the default enumeration cap.
pub const CAP_ENV: &str = "ABMLUMP_CAP";

#[derive(Parser, Debug)]
#[command(
    name = "abmlump",
    version,
    about = "Exact Markov chains and lumpings of single-step agent-based models"
)]
struct Cli {
    /// Largest state space to enumerate. Raising it above the default is an
    /// explicit acknowledgment that enumeration may be slow.
    #[arg(long, global = true, env = CAP_ENV, default_value_t = DEFAULT_CAP)]
    cap: u64,

    /// Report style.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the primary output here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Kv,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Build the exact micro chain as a sparse file.
    Compile { model: PathBuf },
    /// List every realized map with its probability and image table.
    Maps { model: PathBuf },
    /// Orbit partition of the configuration space under a generator set.
    Orbits {
        model: PathBuf,
        #[command(flatten)]
        gens: GenArgs,
    },
    /// Canonical partitions: frequency, moran[:label], half, pairing.
    Partition { model: PathBuf, kind: String },
    /// Check that every generator is an automorphism of the chain.
    CheckSym {
        model: PathBuf,
        #[command(flatten)]
        gens: GenArgs,
        /// Use this compiled chain instead of rebuilding it.
        #[arg(long)]
        chain: Option<PathBuf>,
    },
    /// Strong lumpability test; exits 3 and prints a witness on failure.
    CheckLump {
        chain: PathBuf,
        partition: PathBuf,
        #[command(flatten)]
        lump: LumpArgs,
        /// Report every violating pair instead of the first.
        #[arg(long)]
        all: bool,
    },
    /// Lumped chain as a sparse file, states in partition block order.
    Lump {
        chain: PathBuf,
        partition: PathBuf,
        #[command(flatten)]
        lump: LumpArgs,
        /// Aggregate through each block's reference row even if not lumpable.
        #[arg(long)]
        force: bool,
        /// Also write the macro state labels as a singleton partition.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// State classification, absorption probabilities and expected times.
    Analyze {
        chain: PathBuf,
        /// Name states by the labels of this singleton partition.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Name states by configurations of this model.
        #[arg(long, conflicts_with = "labels")]
        model: Option<PathBuf>,
    },
    /// Exact distribution after `--steps` steps.
    Propagate {
        chain: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Aggregate the result over this partition.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// With --partition, compare against the lumped chain at every step; exits 3 on any discrepancy.
        #[arg(long, requires = "partition")]
        verify: bool,
    },
    /// Run one trajectory of the random mapping representation.
    Simulate {
        model: PathBuf,
        /// Start state as an index or a configuration such as `(white,black,black)`.
        #[arg(long)]
        start: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit block labels of this partition instead of configurations.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Compare sampled one-step frequencies with the exact chain; exits 3 when outside the bounds.
    Estimate {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Comma-separated presets: SN, Sdelta, Sdelta-1[:label], full, flip, identity.
    #[arg(long)]
    gens: Option<String>,
    /// Generator file, one generator per line.
    #[arg(long)]
    gens_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LumpArgs {
    /// Compare block sums in floating point within this tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Render states as configurations of this model.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct InitArgs {
    /// Initial distribution file with `index prob` lines.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Point mass on this state index.
    #[arg(long)]
    from: Option<usize>,
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. } => EXIT_PARSE,
        Error::Validation(_) | Error::Dimension(_) | Error::NoAbsorbingReachable { .. } => EXIT_VALIDATION,
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::NotLumpable(_) => EXIT_VERDICT,
        Error::Numerical(_) | Error::Io(_) => EXIT_IO,
    }
}

type Outcome = crate::error::Result<i32>;

fn execute(cli: &Cli) -> Outcome {
    if cli.cap > DEFAULT_CAP {
        eprintln!("note: enumeration cap raised to {}", cli.cap);
    }
    let out = Output {
        path: cli.output.as_deref(),
        format: cli.format,
    };
    match &cli.verb {
        Verb::Compile { model } => {
            let spec = load_model(model)?;
            let chain = build_micro_chain(&spec, cli.cap)?;
            out.write(&chain.matrix().to_text())
        }
        Verb::Maps { model } => {
            let spec = load_model(model)?;
            let space = ConfigSpace::for_model(&spec, cli.cap)?;
            let mut text = String::new();
            for x in 0..space.size() {
                let _ = writeln!(text, "# {x} {}", space.config_of(x)?.display(spec.alphabet()));
            }
            for map in enumerate_maps(&spec) {
                let images: Vec<String> = map.materialize(&spec, &space).iter().map(usize::to_string).collect();
                let _ = writeln!(
                    text,
                    "{} {}: {}",
                    map.label(&spec),
                    format_ratio(&map.probability),
                    images.join(" ")
                );
            }
            out.write(&text)
        }
        Verb::Orbits { model, gens } => {
            let spec = load_model(model)?;
            let space = ConfigSpace::for_model(&spec, cli.cap)?;
            let gens = load_gens(gens, &spec)?;
            out.write(&orbits(&space, &gens)?.to_text())
        }
        Verb::Partition { model, kind } => {
            let spec = load_model(model)?;
            let space = ConfigSpace::for_model(&spec, cli.cap)?;
            out.write(&canonical_partition(&spec, &space, kind)?.to_text())
        }
        Verb::CheckSym { model, gens, chain } => {
            let spec = load_model(model)?;
            let space = ConfigSpace::for_model(&spec, cli.cap)?;
            let gens = load_gens(gens, &spec)?;
            let matrix = match chain {
                Some(path) => StochasticMatrix::parse_text(&read(path)?)?,
                None => build_micro_chain(&spec, cli.cap)?.into_matrix(),
            };
            let verdict = is_chain_symmetric(&space, &matrix, &gens)?;
            let mut r = Report::default();
            r.push("generators", gens.generators().len());
            r.push("symmetric", verdict.is_symmetric());
            if let SymmetryVerdict::Broken(w) = &verdict {
                let name = |x: usize| state_name(Some(&spec), None, &space, x);
                r.push("witness.generator", w.generator);
                r.push("witness.from", name(w.x));
                r.push("witness.to", name(w.y));
                r.push("witness.p", format_ratio(&w.p));
                r.push("witness.image_from", name(w.image_x));
                r.push("witness.image_to", name(w.image_y));
                r.push("witness.image_p", format_ratio(&w.image_p));
            }
            out.write(&r.render(out.format))?;
            Ok(if verdict.is_symmetric() { EXIT_OK } else { EXIT_VERDICT })
        }
        Verb::CheckLump {
            chain,
            partition,
            lump,
            all,
        } => {
            let matrix = StochasticMatrix::parse_text(&read(chain)?)?;
            let part = load_partition(partition, matrix.n_states())?;
            let namer = Namer::new(lump.model.as_deref(), None, cli.cap)?;
            let opts = LumpOptions {
                tolerance: lump.tolerance,
                exhaustive: *all,
            };
            let verdict = check_lumpable_with(&matrix, &part, opts)?;
            let mut r = Report::default();
            r.push("states", matrix.n_states());
            r.push("blocks", part.n_blocks());
            r.push("lumpable", verdict.is_lumpable());
            if let LumpVerdict::NotLumpable(ws) = &verdict {
                r.push("witnesses", ws.len());
                for (k, w) in ws.iter().enumerate() {
                    let p = if ws.len() == 1 {
                        "witness".to_string()
                    } else {
                        format!("witness.{k}")
                    };
                    r.push(format!("{p}.source"), part.label(w.source_block));
                    r.push(format!("{p}.target"), part.label(w.target_block));
                    r.push(format!("{p}.state"), namer.name(w.state));
                    r.push(format!("{p}.state_sum"), format_ratio(&w.state_sum));
                    r.push(format!("{p}.other_state"), namer.name(w.other_state));
                    r.push(format!("{p}.other_sum"), format_ratio(&w.other_sum));
                }
            }
            out.write(&r.render(out.format))?;
            Ok(if verdict.is_lumpable() { EXIT_OK } else { EXIT_VERDICT })
        }
        Verb::Lump {
            chain,
            partition,
            lump,
            force,
            labels_out,
        } => {
            let matrix = StochasticMatrix::parse_text(&read(chain)?)?;
            let part = load_partition(partition, matrix.n_states())?;
            let macro_chain = if *force {
                lump_by_representative(&matrix, &part)?
            } else {
                let opts = LumpOptions {
                    tolerance: lump.tolerance,
                    exhaustive: false,
                };
                lump_with(&matrix, &part, opts)?
            };
            if let Some(path) = labels_out {
                let labels = Partition::new(
                    (0..part.n_blocks()).map(|k| vec![k]).collect(),
                    part.labels().to_vec(),
                    part.n_blocks(),
                )?;
                write_file(path, &labels.to_text())?;
            }
            out.write(&macro_chain.matrix().to_text())
        }
        Verb::Analyze { chain, labels, model } => {
            let matrix = StochasticMatrix::parse_text(&read(chain)?)?;
            let label_part = labels
                .as_deref()
                .map(|p| load_partition(p, matrix.n_states()))
                .transpose()?;
            let namer = Namer::new(model.as_deref(), label_part.as_ref(), cli.cap)?;
            let classes = classify_states(&matrix);
            let report = absorption_analysis(&matrix)?;
            let names = |xs: &[usize]| xs.iter().map(|&x| namer.name(x)).collect::<Vec<_>>().join(" ");
            let mut r = Report::default();
            r.push("states", matrix.n_states());
            r.push("absorbing", names(&classes.absorbing));
            r.push("transient", names(&classes.transient));
            for (k, class) in classes.recurrent_classes.iter().enumerate() {
                r.push(format!("recurrent.{k}"), names(class));
            }
            r.push("residual", format!("{:e}", report.residual));
            let mut table = String::from("state");
            for &a in &report.absorbing_states {
                let _ = write!(table, "\tP[->{}]", namer.name(a));
            }
            table.push_str("\tsteps\n");
            for (t, &x) in report.transient_states.iter().enumerate() {
                let _ = write!(table, "{}", namer.name(x));
                for (a, &abs) in report.absorbing_states.iter().enumerate() {
                    let p = report.absorption_probs[t][a];
                    let _ = write!(table, "\t{p:.12}");
                    r.push_kv(format!("absorb.{x}.{abs}"), format!("{p:.12}"));
                }
                let steps = report.expected_steps[t];
                let _ = writeln!(table, "\t{steps:.12}");
                r.push_kv(format!("steps.{x}"), format!("{steps:.12}"));
            }
            r.table = Some(table);
            out.write(&r.render(out.format))
        }
        Verb::Propagate {
            chain,
            init,
            steps,
            partition,
            verify,
        } => {
            let matrix = StochasticMatrix::parse_text(&read(chain)?)?;
            let n = matrix.n_states();
            let mu0 = match (&init.init, init.from) {
                (Some(path), _) => Distribution::parse_text(&read(path)?, n)?,
                (None, Some(x)) => Distribution::point_mass(n, x)?,
                (None, None) => unreachable!("clap requires one of --init and --from"),
            };
            let part = partition.as_deref().map(|p| load_partition(p, n)).transpose()?;
            if *verify {
                let part = part.as_ref().expect("clap enforces --partition with --verify");
                let profile = commutation_profile(&matrix, part, &mu0, *steps, false)?;
                let worst = profile.iter().max().cloned().unwrap_or_default();
                let mut r = Report::default();
                r.push("steps", steps);
                r.push("max_discrepancy", format_ratio(&worst));
                r.push("commutes", worst.is_zero());
                out.write(&r.render(out.format))?;
                return Ok(if worst.is_zero() { EXIT_OK } else { EXIT_VERDICT });
            }
            let mu = propagate(&matrix, &mu0, *steps)?;
            let mu = match &part {
                Some(p) => mu.aggregate(p)?,
                None => mu,
            };
            out.write(&mu.to_text())
        }
        Verb::Simulate {
            model,
            start,
            steps,
            seed,
            partition,
        } => {
            let spec = load_model(model)?;
            let space = ConfigSpace::for_model(&spec, cli.cap)?;
            let start = match start.trim().parse::<usize>() {
                Ok(x) => x,
                Err(_) => space.index_of(&Configuration::parse(start, spec.alphabet())?)?,
            };
            let run = simulate(&spec, &space, start, *steps, *seed)?;
            let text = match partition {
                Some(p) => run.to_macro_text(&load_partition(p, space.size())?)?,
                None => run.to_text(&spec, &space)?,
            };
            out.write(&text)
        }
        Verb::Estimate {
            model,
            samples,
            seed,
            sigmas,
        } => {
            let spec = load_model(model)?;
            let chain = build_micro_chain(&spec, cli.cap)?;
            let report = estimate_matrix(&spec, &chain, *samples, *seed, *sigmas)?;
            let mut r = Report::default();
            r.push("states", chain.space().size());
            r.push("samples_per_state", samples);
            r.push("seed", seed);
            r.push("sigmas", sigmas);
            r.push("max_deviation", format!("{:.6e}", report.max_deviation));
            r.push("max_bound", format!("{:.6e}", report.max_bound));
            r.push("violations", report.violations.len());
            for (k, v) in report.violations.iter().enumerate() {
                r.push(
                    format!("violation.{k}"),
                    format!(
                        "{} -> {}: empirical {:.6} exact {:.6} bound {:.6}",
                        v.from, v.to, v.empirical, v.exact, v.bound
                    ),
                );
            }
            r.push("within_bounds", report.within_bounds());
            out.write(&r.render(out.format))?;
            Ok(if report.within_bounds() { EXIT_OK } else { EXIT_VERDICT })
        }
    }
}

fn canonical_partition(spec: &ModelSpec, space: &ConfigSpace, kind: &str) -> crate::error::Result<Partition> {
    let (name, arg) = match kind.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (kind, None),
    };
    match (name, arg) {
        ("frequency", None) => frequency_partition(space),
        ("moran", arg) => {
            let label = arg.unwrap_or_else(|| spec.alphabet().label(0));
            let code = spec
                .alphabet()
                .code_of(label)
                .ok_or_else(|| Error::validation(format!("unknown attribute `{label}`")))?;
            moran_partition(space, code)
        }
        ("half", None) => half_hypercube_partition(space),
        ("pairing", None) => line_pairing(space.n_agents()),
        _ => Err(Error::validation(format!(
            "unknown partition kind `{kind}` (expected frequency, moran[:label], half or pairing)"
        ))),
    }
}

fn state_name(spec: Option<&ModelSpec>, labels: Option<&Partition>, space: &ConfigSpace, x: usize) -> String {
    match (spec, labels) {
        (Some(spec), _) => match space.config_of(x) {
            Ok(c) => format!("{x} {}", c.display(spec.alphabet())),
            Err(_) => x.to_string(),
        },
        (None, Some(p)) if x < p.n_states() => p.label(p.block_of(x)).to_string(),
        _ => x.to_string(),
    }
}

/// Renders state indices, optionally with configurations or labels.
struct Namer {
    spec: Option<ModelSpec>,
    space: Option<ConfigSpace>,
    labels: Option<Partition>,
}

impl Namer {
    fn new(model: Option<&Path>, labels: Option<&Partition>, cap: u64) -> crate::error::Result<Self> {
        let spec = model.map(load_model).transpose()?;
        let space = spec.as_ref().map(|s| ConfigSpace::for_model(s, cap)).transpose()?;
        Ok(Namer {
            spec,
            space,
            labels: labels.cloned(),
        })
    }

    fn name(&self, x: usize) -> String {
        match &self.space {
            Some(space) => state_name(self.spec.as_ref(), None, space, x),
            None => match &self.labels {
                Some(p) if x < p.n_states() => p.label(p.block_of(x)).to_string(),
                _ => x.to_string(),
            },
        }
    }
}

/// Ordered key/value report. Text output aligns `key: value` and appends an
/// optional table; kv output writes `key=value` lines including kv-only rows.
#[derive(Default)]
struct Report {
    entries: Vec<(String, String, bool)>,
    table: Option<String>,
}

impl Report {
    fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string(), true));
    }

    fn push_kv(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string(), false));
    }

    fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Kv => {
                for (k, v, _) in &self.entries {
                    let _ = writeln!(out, "{k}={v}");
                }
            }
            Format::Text => {
                let width = self
                    .entries
                    .iter()
                    .filter(|e| e.2)
                    .map(|e| e.0.len())
                    .max()
                    .unwrap_or(0);
                for (k, v, _) in self.entries.iter().filter(|e| e.2) {
                    let _ = writeln!(out, "{:width$}  {v}", format!("{k}:"), width = width + 1);
                }
                if let Some(t) = &self.table {
                    out.push('\n');
                    out.push_str(t);
                }
            }
        }
        out
    }
}

struct Output<'a> {
    path: Option<&'a Path>,
    format: Format,
}

impl Output<'_> {
    fn write(&self, text: &str) -> Outcome {
        match self.path {
            Some(p) => write_file(p, text)?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(EXIT_OK)
    }
}

fn read(path: &Path) -> crate::error::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_file(path: &Path, text: &str) -> crate::error::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_model(path: &Path) -> crate::error::Result<ModelSpec> {
    parse_model(&read(path)?)
}

fn load_partition(path: &Path, n_states: usize) -> crate::error::Result<Partition> {
    Partition::parse_text(&read(path)?, Some(n_states))
}

fn load_gens(args: &GenArgs, spec: &ModelSpec) -> crate::error::Result<GeneratorSet> {
    let preset = args
        .gens
        .as_deref()
        .map(|g| GeneratorSet::preset(g, spec.n_agents(), spec.alphabet()))
        .transpose()?;
    let file = args
        .gens_file
        .as_deref()
        .map(|p| GeneratorSet::parse_file(&read(p)?, spec.n_agents(), spec.alphabet()))
        .transpose()?;
    match (preset, file) {
        (Some(a), Some(b)) => Ok(a.union(&b)),
        (Some(g), None) | (None, Some(g)) => Ok(g),
        (None, None) => Err(Error::validation("give --gens or --gens-file")),
    }
}
