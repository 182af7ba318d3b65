use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dsq_core::codec::{encode_sequence, read_dump, write_dump, CodebookHeader, Codeword, QuantizerSpec};
use dsq_core::decoder::{decode, fuse_outputs};
use dsq_core::harness::{self, ExperimentConfig};
use dsq_core::model::SparsityModel;
use dsq_core::network::{connectivity_report, simulate_network, LinkFailureProcess, NetworkTopology};
use dsq_core::ratebound::{max_resolution_for_threshold, rate_threshold, resolution_for_rate, RateQuery};

#[derive(Parser)]
#[command(name = "dsq", version, about = "Distributed serial quantization toolkit")]
struct Cli {
    /// Experiment config (TOML sections). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config entry, e.g. `--set system.rate=1.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or dump codebooks.
    #[command(subcommand)]
    Codebook(CodebookCmd),
    /// Encode one encoder's samples into its b-bit register.
    Encode(EncodeArgs),
    /// Decode a fused word back to a support hypothesis and estimate.
    Decode(DecodeArgs),
    /// Push encoder words through a topology.
    Netsim(NetsimArgs),
    /// Rate threshold for a resolution, or resolution for a rate.
    Ratebound(RateboundArgs),
    /// Monte Carlo MSE versus rate for all configured schemes.
    SweepRate(SweepRateArgs),
    /// Rate threshold curves versus resolution.
    SweepResolution(SweepResolutionArgs),
}

#[derive(Subcommand)]
enum CodebookCmd {
    /// Write a codebook header from the config (or explicit flags).
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regenerate codebooks from a header and write the packed binary dump.
    Dump {
        #[arg(long)]
        header: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Check an existing dump against the header instead of writing.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    header: PathBuf,
    #[arg(long)]
    encoder: usize,
    /// Samples, comma or whitespace separated; `-` reads stdin.
    #[arg(long)]
    samples: String,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    header: PathBuf,
    /// Fused word as a bit string (bit 0 first), or `@file` holding one.
    #[arg(long)]
    y: String,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// `overall:<k>` or `structured:<k_s>x<k_t>`; defaults to overall with the header's k.
    #[arg(long)]
    model: Option<String>,
    /// Encoders known to be disconnected from the decoder.
    #[arg(long, value_delimiter = ',')]
    unreachable: Vec<usize>,
}

#[derive(Args)]
struct NetsimArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    failures: Option<PathBuf>,
    /// File with one encoder word (bit string) per line, in encoder order.
    #[arg(long)]
    inputs: PathBuf,
}

#[derive(Args)]
struct RateboundArgs {
    /// Resolution to evaluate R_ε(l) at.
    #[arg(long, conflicts_with = "rate")]
    l: Option<usize>,
    /// Rate to derive the resolution from.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Args)]
struct SweepRateArgs {
    /// Comma-separated rate grid; defaults to `[sweep] rates`.
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepResolutionArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long = "T", alias = "t", default_value_t = 90)]
    t: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Models as `overall:<k>` or `structured:<k_s>x<k_t>`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "overall:6,overall:12,overall:24,overall:36,structured:3x2,structured:3x4,structured:3x8,structured:3x12"
    )]
    models: Vec<String>,
    #[arg(long, default_value_t = 64)]
    l_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<SparsityModel> {
    Ok(s.parse()?)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    Ok(match &cli.config {
        Some(path) => ExperimentConfig::load(path, &cli.overrides)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::from_overrides(&cli.overrides)?,
    })
}

fn read_arg_or_file(arg: &str) -> Result<String> {
    if arg == "-" {
        return Ok(io::read_to_string(io::stdin())?);
    }
    match arg.strip_prefix('@') {
        Some(path) => Ok(fs::read_to_string(path).with_context(|| format!("reading {path}"))?),
        None => Ok(arg.to_string()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Codebook(CodebookCmd::Gen { out: path, seed }) => {
            let cfg = load_config(&cli)?;
            let p = cfg.params()?;
            let header = CodebookHeader::new(p.n, p.t, p.l, p.b, cfg.model.k(), seed.unwrap_or(cfg.master_seed));
            header.save(path)?;
            writeln!(out, "wrote {} (n={} T={} l={} b={} k={})", path.display(), p.n, p.t, p.l, p.b, header.k)?;
        }
        Command::Codebook(CodebookCmd::Dump { header, out: path, verify }) => {
            let header = CodebookHeader::load(header)?;
            let books = header.regenerate()?;
            let mut bytes = Vec::new();
            write_dump(&books, &mut bytes)?;
            if *verify {
                let existing = fs::read(path)?;
                read_dump(&header, existing.as_slice())?;
                if existing != bytes {
                    bail!("{} does not match the header", path.display());
                }
                writeln!(out, "ok: {} matches", path.display())?;
            } else {
                harness::write_atomic(path, &bytes)?;
                writeln!(out, "wrote {} bytes to {}", bytes.len(), path.display())?;
            }
        }
        Command::Encode(args) => {
            let header = CodebookHeader::load(&args.header)?;
            if args.encoder >= header.n {
                bail!("encoder {} out of range 0..{}", args.encoder, header.n);
            }
            let books = header.regenerate()?;
            let q = QuantizerSpec::new(header.l, args.gamma)?;
            let text = read_arg_or_file(&args.samples)?;
            let samples = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().with_context(|| format!("bad sample {s:?}")))
                .collect::<Result<Vec<_>>>()?;
            let x = encode_sequence(&books[args.encoder], &q, &samples)?;
            writeln!(out, "{x}")?;
        }
        Command::Decode(args) => {
            let header = CodebookHeader::load(&args.header)?;
            let books = header.regenerate()?;
            let q = QuantizerSpec::new(header.l, args.gamma)?;
            let y: Codeword = read_arg_or_file(&args.y)?.trim().parse()?;
            let model = match &args.model {
                Some(m) => parse_model(m)?,
                None => SparsityModel::Overall { k: header.k },
            };
            let mut reachable = vec![true; header.n];
            for &m in &args.unreachable {
                *reachable.get_mut(m).with_context(|| format!("encoder {m} out of range"))? = false;
            }
            let (outcome, result) = decode(&y, &books, &model, &q, reachable)?;
            writeln!(out, "status = {}", outcome.status)?;
            writeln!(out, "covers = {}", outcome.covers)?;
            for (m, i, j) in outcome.hypothesis.triples() {
                writeln!(out, "e{m} i={i} j={j} value={}", q.level(j))?;
            }
            for row in result.estimate.rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Command::Netsim(args) => {
            let topology = NetworkTopology::parse(&fs::read_to_string(&args.topology)?)?;
            let failures = match &args.failures {
                Some(p) => LinkFailureProcess::parse(&fs::read_to_string(p)?)?,
                None => LinkFailureProcess::None,
            };
            let inputs = fs::read_to_string(&args.inputs)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.parse::<Codeword>())
                .collect::<dsq_core::Result<Vec<_>>>()?;
            let state = failures.realize(&topology)?;
            let net = simulate_network(&topology, &state, &inputs)?;
            let report = connectivity_report(&topology, &state)?;
            for (p, z) in net.outputs.iter().enumerate() {
                writeln!(out, "p{p} {z}")?;
            }
            let b = inputs.first().map_or(0, Codeword::len);
            writeln!(out, "Y {}", fuse_outputs(b, &net.outputs)?)?;
            writeln!(out, "failed_links = {}", state.failed_count())?;
            for (m, (r, c)) in report.reachable.iter().zip(&report.encoder_min_cut).enumerate() {
                writeln!(out, "e{m} reachable={r} min_cut={c}")?;
            }
            writeln!(out, "min_cut = {}", report.min_cut)?;
        }
        Command::Ratebound(args) => {
            let cfg = load_config(&cli)?;
            let query = RateQuery::new(cfg.n, cfg.t, cfg.model, cfg.epsilon)?;
            match (args.l, args.rate) {
                (Some(l), _) => {
                    let th = rate_threshold(&query, l)?;
                    writeln!(out, "l = {l}\nR = {}\nu = {}", th.rate, th.u)?;
                }
                (None, rate) => {
                    let rate = rate.unwrap_or(cfg.rate);
                    let rule = resolution_for_rate(rate, cfg.n, cfg.t, cfg.model.k(), cfg.epsilon)?;
                    writeln!(out, "R = {rate}\nl_rule = {rule}")?;
                    writeln!(out, "R_threshold(l_rule) = {}", rate_threshold(&query, rule)?.rate)?;
                    match max_resolution_for_threshold(&query, rate) {
                        Ok(l) => writeln!(out, "l_max_within_threshold = {l}")?,
                        Err(e) => writeln!(out, "l_max_within_threshold = none ({e})")?,
                    }
                }
            }
        }
        Command::SweepRate(args) => {
            let mut cfg = load_config(&cli)?;
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            let rates = if args.rates.is_empty() { cfg.rates.clone() } else { args.rates.clone() };
            let path = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| "sweep_rate.csv".into());
            let sweep = harness::sweep_rate(&cfg, &rates, cfg.trials)?;
            let written = harness::write_sweep(&sweep, &cfg, &rates, &path)?;
            write!(out, "{}", harness::summary_csv(&sweep.summary)?)?;
            report_written(&mut out, &written)?;
        }
        Command::SweepResolution(args) => {
            let models = args.models.iter().map(|m| parse_model(m)).collect::<Result<Vec<_>>>()?;
            let grid: Vec<usize> = (1..=args.l_max).collect();
            let rows = harness::sweep_resolution(args.n, args.t, &models, args.epsilon, &grid)?;
            match &args.out {
                Some(path) => {
                    let written = harness::write_resolution(&rows, path)?;
                    report_written(&mut out, &written)?;
                }
                None => write!(out, "{}", harness::resolution_csv(&rows)?)?,
            }
        }
    }
    Ok(())
}

fn report_written(out: &mut impl Write, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}
