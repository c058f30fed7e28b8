//! Flag parsing, `key=value` config files and resolution into an
//! [`ExperimentSpec`].

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lattice_tt::eigen::{Mode, SpectrumBound};
use lattice_tt::lattice::ArithFn;

#[derive(Parser, Debug)]
#[command(name = "lattice-tt", version, about = "Tensor-train eigenvalue experiments for GCD and LCM tensors")]
pub struct Cli {
    /// Run the small-scale oracle-equivalence suites and exit (nonzero on failure).
    #[arg(long)]
    pub selftest: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// nnz and bytes of the order-independent GCD triplet (G1, G, Gd).
    Storage(Opts),
    /// Theoretical vs DMRG-cross maximal TT rank of LCM tensors.
    Ranks(Opts),
    /// Dominant H-/Z-eigenvalues of Smith tensors by S-HOPM.
    Dominant(Opts),
    /// Minimal H-/Z-eigenvalues of Smith tensors by prescreened GEAP.
    Minimal(Opts),
    /// Minimal eigenvalues of Ax^{d-1} = λBx^{d-1}, A = GCD, B = LCM.
    Generalized(Opts),
    /// Gershgorin-type disks and the eigenvalue upper bound.
    Bound(Opts),
    /// Same as `--selftest`.
    Selftest(Opts),
}

impl Command {
    pub fn kind(&self) -> Kind {
        match self {
            Command::Storage(_) => Kind::Storage,
            Command::Ranks(_) => Kind::Ranks,
            Command::Dominant(_) => Kind::Dominant,
            Command::Minimal(_) => Kind::Minimal,
            Command::Generalized(_) => Kind::Generalized,
            Command::Bound(_) => Kind::Bound,
            Command::Selftest(_) => Kind::Selftest,
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Storage(o)
            | Command::Ranks(o)
            | Command::Dominant(o)
            | Command::Minimal(o)
            | Command::Generalized(o)
            | Command::Bound(o)
            | Command::Selftest(o) => o,
        }
    }
}

/// Flags shared by every command. Everything is optional so that a config
/// file can fill the gaps; flags given on the command line win.
#[derive(Args, Debug, Clone, Default, PartialEq)]
pub struct Opts {
    /// `key=value` file with defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dimensions: comma list, `a..b` inclusive range or `a..b:step`.
    #[arg(long)]
    pub n: Option<String>,
    /// Orders, same syntax as `--n`.
    #[arg(long)]
    pub d: Option<String>,
    /// Arithmetic function: id, x^a, 1/x.
    #[arg(long)]
    pub f: Option<String>,
    /// H or Z.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prescreening guesses.
    #[arg(long)]
    pub guesses: Option<usize>,
    /// GEAP iterations per prescreening guess.
    #[arg(long = "pre-iters")]
    pub pre_iters: Option<usize>,
    /// Repeated S-HOPM starts per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// DMRG cross truncation threshold.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iteration cap of the main solver run.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// exact or gershgorin lower bound on λ_min(βH) inside GEAP.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for cached LCM tensors.
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Parser)]
#[command(no_binary_name = true)]
struct FileOpts {
    #[command(flatten)]
    opts: Opts,
}

impl Opts {
    /// Reads a config file: one `key=value` per line, `#` comments, keys
    /// named like the long flags.
    pub fn from_file(path: &Path) -> Result<Opts> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut args = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), lineno + 1);
            };
            let key = key.trim().replace('_', "-");
            if key == "config" {
                bail!("{}:{}: nested config files are not supported", path.display(), lineno + 1);
            }
            args.push(format!("--{key}"));
            args.push(value.trim().to_string());
        }
        let parsed = FileOpts::try_parse_from(args).with_context(|| format!("in config {}", path.display()))?;
        Ok(parsed.opts)
    }

    /// Field-wise merge; `self` wins.
    pub fn or(self, other: Opts) -> Opts {
        Opts {
            config: self.config.or(other.config),
            n: self.n.or(other.n),
            d: self.d.or(other.d),
            f: self.f.or(other.f),
            mode: self.mode.or(other.mode),
            tau: self.tau.or(other.tau),
            tol: self.tol.or(other.tol),
            seed: self.seed.or(other.seed),
            guesses: self.guesses.or(other.guesses),
            pre_iters: self.pre_iters.or(other.pre_iters),
            trials: self.trials.or(other.trials),
            eps: self.eps.or(other.eps),
            max_iters: self.max_iters.or(other.max_iters),
            spectrum: self.spectrum.or(other.spectrum),
            out: self.out.or(other.out),
            cache_dir: self.cache_dir.or(other.cache_dir),
        }
    }

    /// Flags merged over the config file, if one was given.
    pub fn with_config(&self) -> Result<Opts> {
        match &self.config {
            Some(path) => Ok(self.clone().or(Opts::from_file(path)?)),
            None => Ok(self.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Storage,
    Ranks,
    Dominant,
    Minimal,
    Generalized,
    Bound,
    Selftest,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Storage => "storage",
            Kind::Ranks => "ranks",
            Kind::Dominant => "dominant",
            Kind::Minimal => "minimal",
            Kind::Generalized => "generalized",
            Kind::Bound => "bound",
            Kind::Selftest => "selftest",
        })
    }
}

/// A fully resolved experiment, validated before any heavy work starts.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub ns: Vec<u64>,
    pub ds: Vec<usize>,
    pub f: ArithFn,
    pub mode: Mode,
    pub beta: f64,
    /// `None` means the per-command default.
    pub tau: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub guesses: usize,
    pub pre_iters: usize,
    pub trials: usize,
    pub eps: f64,
    pub max_iters: Option<usize>,
    pub spectrum: SpectrumBound,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

/// Parses `10,50,100`, `2..6` (inclusive) or `4..20:2`.
pub fn parse_list(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((h, st)) => (h, st.trim().parse::<u64>().with_context(|| format!("bad step in {item:?}"))?),
                None => (rest, 1),
            };
            let lo: u64 = lo.trim().parse().with_context(|| format!("bad range {item:?}"))?;
            let hi: u64 = hi.trim().parse().with_context(|| format!("bad range {item:?}"))?;
            if step == 0 || lo > hi {
                bail!("empty range {item:?}");
            }
            out.extend((lo..=hi).step_by(step as usize));
        } else {
            out.push(item.parse().with_context(|| format!("bad integer {item:?}"))?);
        }
    }
    if out.is_empty() {
        bail!("empty list {s:?}");
    }
    Ok(out)
}

fn default_ns(kind: Kind) -> &'static str {
    match kind {
        Kind::Storage => "10,100,1000,10000,100000",
        Kind::Ranks => "2..7",
        Kind::Dominant => "10,50,100,500,1000",
        Kind::Minimal => "2..6",
        Kind::Generalized => "2..5",
        Kind::Bound => "2..4",
        Kind::Selftest => "1",
    }
}

fn default_ds(kind: Kind) -> &'static str {
    match kind {
        Kind::Storage => "3",
        Kind::Ranks => "3..8",
        Kind::Dominant => "4..20:2",
        Kind::Minimal => "4..16:2",
        Kind::Generalized => "4,6,8",
        Kind::Bound => "3,4",
        Kind::Selftest => "2",
    }
}

impl ExperimentSpec {
    pub fn resolve(kind: Kind, opts: &Opts) -> Result<ExperimentSpec> {
        let o = opts.with_config()?;
        let ns = parse_list(o.n.as_deref().unwrap_or(default_ns(kind))).context("--n")?;
        let ds: Vec<usize> = parse_list(o.d.as_deref().unwrap_or(default_ds(kind)))
            .context("--d")?
            .into_iter()
            .map(|d| d as usize)
            .collect();
        let f: ArithFn = o.f.as_deref().unwrap_or("id").parse()?;
        let mode: Mode = o.mode.as_deref().unwrap_or("H").parse()?;
        let spectrum = match o.spectrum.as_deref().unwrap_or("exact") {
            "exact" => SpectrumBound::Exact,
            "gershgorin" => SpectrumBound::Gershgorin,
            other => bail!("--spectrum must be exact or gershgorin, got {other:?}"),
        };
        let trials = o.trials.unwrap_or(if mode == Mode::Z { 50 } else { 1 });
        let spec = ExperimentSpec {
            kind,
            ns,
            ds,
            f,
            mode,
            beta: if kind == Kind::Dominant { 1.0 } else { -1.0 },
            tau: o.tau,
            tol: o.tol.unwrap_or(1e-14),
            seed: o.seed.unwrap_or(0),
            guesses: o.guesses.unwrap_or(1000),
            pre_iters: o.pre_iters.unwrap_or(100),
            trials,
            eps: o.eps.unwrap_or(1e-14),
            max_iters: o.max_iters,
            spectrum,
            out: o.out,
            cache_dir: o.cache_dir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.contains(&0) {
            bail!("dimensions must be positive");
        }
        if self.ds.contains(&0) {
            bail!("orders must be positive");
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                bail!("--tau must be positive");
            }
        }
        if !(self.tol > 0.0) || !(self.eps > 0.0) {
            bail!("--tol and --eps must be positive");
        }
        if self.guesses == 0 || self.trials == 0 {
            bail!("--guesses and --trials must be at least 1");
        }
        let even = |what: &str| -> Result<()> {
            if let Some(d) = self.ds.iter().find(|&&d| d % 2 == 1 || d < 2) {
                bail!("{what} needs even orders d >= 2, got {d}");
            }
            Ok(())
        };
        match self.kind {
            Kind::Storage => {
                if let Some(n) = self.ns.iter().find(|&&n| n > 1_000_000) {
                    bail!("storage supports n <= 1e6, got {n}");
                }
            }
            Kind::Ranks => {
                if let Some(d) = self.ds.iter().find(|&&d| d < 2) {
                    bail!("ranks needs d >= 2, got {d}");
                }
            }
            Kind::Dominant => {
                even("dominant")?;
                if self.mode == Mode::B {
                    bail!("dominant B-eigenvalues are not supported");
                }
            }
            Kind::Minimal => {
                even("minimal")?;
                if self.mode == Mode::B {
                    bail!("use the generalized command for B-eigenvalues");
                }
            }
            Kind::Generalized => even("generalized")?,
            Kind::Bound | Kind::Selftest => {}
        }
        Ok(())
    }
}
