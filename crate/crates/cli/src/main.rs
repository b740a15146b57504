use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dagfsa::constraints::{default_specials, extract_lexicon, parse_word_list, StaticLexicon};
use dagfsa::dag::{generate_synthetic_dag, load_dag, SyntheticDagConfig};
use dagfsa::length::LengthPredictor;
use dagfsa::metrics::{evaluate, parse_eval_records, EvalVocabulary};
use dagfsa::pipeline::{
    parse_constraint_file, parse_manifest, run_batch, Decoder, DecoderConfig, JobConstraints, Lexicon,
    Mode, Status,
};
use dagfsa::token::TokenTable;

/// Exit status when decoding ran but found no admissible output.
const EXIT_NO_OUTPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "dagfsa", version, about = "Constrained decoding of token lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one lattice.
    Decode(DecodeArgs),
    /// Decode every job of a JSON-lines manifest.
    Batch(BatchArgs),
    /// Extract a word list from a corpus and optionally cache its automaton.
    BuildLexicon(BuildLexiconArgs),
    /// Fit the linear target-length predictor.
    FitLength(FitLengthArgs),
    /// Score outputs with SER, EOR, NEO and BP.
    Evaluate(EvaluateArgs),
    /// Write a random lattice.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DecoderArgs {
    /// Token table (`id<TAB>surface` lines).
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    /// Emissions kept per vertex.
    #[arg(long, default_value_t = 3)]
    ke: usize,
    /// Transitions kept per vertex.
    #[arg(long, default_value_t = 3)]
    kt: usize,
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Cumulative probability kept per state in length-constrained search.
    #[arg(long, default_value_t = 0.7)]
    edge_prune_p: f64,
    #[arg(long, default_value_t = 1.0)]
    strictness: f64,
    #[arg(long)]
    len_upper: Option<usize>,
    /// Two-line file: slope, intercept.
    #[arg(long)]
    len_predictor: Option<PathBuf>,
    /// Word list, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Special tokens, one per line. Defaults to punctuation and markers.
    #[arg(long)]
    specials: Option<PathBuf>,
    /// Cached static lexicon automaton written by `build-lexicon`.
    #[arg(long)]
    lexicon_cache: Option<PathBuf>,
    /// Leave wall time out of the results.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    dag: PathBuf,
    /// JSON-lines file holding one `{"phrases": [...], "entities": [...]}` record.
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long)]
    target_len: Option<usize>,
    /// Input length fed to the length predictor.
    #[arg(long)]
    input_len: Option<usize>,
    #[command(flatten)]
    decoder: DecoderArgs,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[command(flatten)]
    decoder: DecoderArgs,
}

#[derive(Args)]
struct BuildLexiconArgs {
    /// Text corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    cutoff: f64,
    /// Word list output.
    #[arg(long)]
    out: PathBuf,
    /// Also build and write the static automaton (needs `--tokens`).
    #[arg(long, requires = "tokens")]
    cache: Option<PathBuf>,
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    specials: Option<PathBuf>,
}

#[derive(Args)]
struct FitLengthArgs {
    /// One `input_len output_len` pair per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON-lines evaluation records.
    #[arg(long)]
    records: PathBuf,
    /// Vocabulary sources (word lists or corpora); enables NEO.
    #[arg(long)]
    vocab: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    vertices: usize,
    #[arg(long)]
    vocab_size: usize,
    #[arg(long, default_value_t = 3)]
    emission_degree: usize,
    #[arg(long, default_value_t = 3)]
    transition_degree: usize,
    #[arg(long, default_value_t = dagfsa::dag::SPARSE_CONCENTRATION)]
    concentration: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_table(path: &Path) -> Result<Arc<TokenTable>> {
    let table = TokenTable::parse(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Arc::new(table))
}

fn load_specials(path: Option<&Path>, table: &TokenTable) -> Result<Vec<String>> {
    Ok(match path {
        Some(p) => parse_word_list(&read_text(p)?),
        None => default_specials(table),
    })
}

fn load_predictor(path: Option<&Path>) -> Result<Option<LengthPredictor>> {
    path.map(|p| LengthPredictor::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display())))
        .transpose()
}

fn build_decoder(args: &DecoderArgs, needs_constraints: bool) -> Result<Decoder> {
    if args.mode.needs_constraint_file() && !needs_constraints {
        bail!("mode {} needs --constraints", args.mode);
    }
    let table = load_table(&args.tokens)?;
    let lexicon = match &args.lexicon {
        Some(path) => {
            let words = parse_word_list(&read_text(path)?);
            let specials = load_specials(args.specials.as_deref(), &table)?;
            Some(match &args.lexicon_cache {
                Some(cache) => {
                    let cached = StaticLexicon::from_cache_text(&read_text(cache)?)
                        .with_context(|| format!("parsing {}", cache.display()))?;
                    let (lex, hit) = Lexicon::with_cache(words, specials, &table, cached)?;
                    if !hit {
                        eprintln!("warning: {} does not match the lexicon; rebuilt", cache.display());
                    }
                    lex
                }
                None => Lexicon::build(words, specials, &table)?,
            })
        }
        None if args.mode.uses_vocabulary() => bail!("mode {} needs --lexicon", args.mode),
        None => None,
    };
    let cfg = DecoderConfig {
        mode: args.mode,
        k_e: args.ke,
        k_t: args.kt,
        beam: args.beam,
        strictness: args.strictness,
        edge_prune_p: args.edge_prune_p,
        len_upper: args.len_upper,
        timing: !args.no_timing,
    };
    Ok(Decoder::new(cfg, table, lexicon)?)
}

fn decode(args: DecodeArgs) -> Result<ExitCode> {
    let decoder = build_decoder(&args.decoder, args.constraints.is_some())?;
    let dag = load_dag(&fs::read(&args.dag).with_context(|| format!("reading {}", args.dag.display()))?)
        .with_context(|| format!("parsing {}", args.dag.display()))?;
    dag.check_vocab(decoder.table())?;
    let constraints = match &args.constraints {
        Some(path) => {
            let mut all = parse_constraint_file(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
            if all.len() > 1 {
                bail!("{} holds {} records; decode takes one", path.display(), all.len());
            }
            all.pop().unwrap_or_default()
        }
        None => JobConstraints::default(),
    };
    let target = match (args.target_len, load_predictor(args.decoder.len_predictor.as_deref())?) {
        (Some(t), _) => Some(t),
        (None, Some(p)) => match args.input_len {
            Some(x) => Some(p.predict(x)),
            None => bail!("--len-predictor needs --input-len"),
        },
        (None, None) => None,
    };
    if args.decoder.mode.uses_length() && target.is_none() {
        bail!("mode {} needs --target-len or --len-predictor", args.decoder.mode);
    }
    let result = decoder.decode(&dag, &constraints, target)?;
    write_output(args.decoder.out.as_deref(), &(result.to_json_line() + "\n"))?;
    Ok(if result.status == Status::Ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NO_OUTPUT)
    })
}

fn batch(args: BatchArgs) -> Result<ExitCode> {
    let decoder = build_decoder(&args.decoder, true)?;
    let jobs = parse_manifest(&read_text(&args.manifest)?).with_context(|| format!("parsing {}", args.manifest.display()))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let predictor = load_predictor(args.decoder.len_predictor.as_deref())?;
    let out = run_batch(&decoder, &jobs, base, predictor.as_ref(), args.parallel)?;
    write_output(args.decoder.out.as_deref(), &out.to_jsonl())?;
    Ok(ExitCode::SUCCESS)
}

fn build_lexicon(args: BuildLexiconArgs) -> Result<ExitCode> {
    let corpus = read_text(&args.corpus)?;
    let lines: Vec<&str> = corpus.lines().collect();
    let words = extract_lexicon(&lines, args.cutoff)?;
    let mut text = words.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    if let (Some(cache), Some(tokens)) = (&args.cache, &args.tokens) {
        let table = load_table(tokens)?;
        let specials = load_specials(args.specials.as_deref(), &table)?;
        let lex = StaticLexicon::build(&words, &specials, true, &table)?;
        fs::write(cache, lex.to_cache_text()).with_context(|| format!("writing {}", cache.display()))?;
    }
    eprintln!("{} words", words.len());
    Ok(ExitCode::SUCCESS)
}

fn fit_length(args: FitLengthArgs) -> Result<ExitCode> {
    let text = read_text(&args.pairs)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            [] => continue,
            [x, y] => {
                let num = |s: &str| s.parse::<f64>().with_context(|| format!("line {}: bad number {s:?}", i + 1));
                pairs.push((num(x)?, num(y)?));
            }
            _ => bail!("line {}: expected two numbers", i + 1),
        }
    }
    let p = LengthPredictor::fit(&pairs)?;
    fs::write(&args.out, p.to_text()).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn run_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let records = parse_eval_records(&read_text(&args.records)?).with_context(|| format!("parsing {}", args.records.display()))?;
    let vocab = if args.vocab.is_empty() {
        None
    } else {
        let mut texts = Vec::new();
        for p in &args.vocab {
            texts.push(read_text(p)?);
        }
        let lines: Vec<&str> = texts.iter().flat_map(|t| t.lines()).collect();
        Some(EvalVocabulary::from_corpus(&lines, &records)?)
    };
    let report = evaluate(&records, vocab.as_ref())?;
    write_output(args.out.as_deref(), &(serde_json::to_string(&report)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let cfg = SyntheticDagConfig {
        num_vertices: args.vertices,
        vocab_size: args.vocab_size,
        emission_degree: args.emission_degree,
        transition_degree: args.transition_degree,
        concentration: args.concentration,
    };
    let dag = generate_synthetic_dag(args.seed, &cfg)?;
    write_output(args.out.as_deref(), &(dag.to_json() + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Decode(a) => decode(a),
        Command::Batch(a) => batch(a),
        Command::BuildLexicon(a) => build_lexicon(a),
        Command::FitLength(a) => fit_length(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
