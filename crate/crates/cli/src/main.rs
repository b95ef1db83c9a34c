use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use strata_core::compressor::CompressionScope;
use strata_core::index::{
    read_query_dir, write_query_dir, Budget, EncoderDescriptor, IndexOptions,
};
use strata_core::scorer::run_queries;
use strata_core::synth::{gen_images, gen_training_sets, ImageSynthConfig};
use strata_core::trainer::{
    finite_difference_gradient, max_relative_error, random_gradcheck_instance, stencil_is_smooth,
};
use strata_core::{
    budget_sweep, build_index, combined_selector, contribution, encode_page, gen_corpus,
    ingest_external, load_index, mvtx, ndcg_at_k, sample_multires, GranularitySpec, HeadObjective,
    NestedPageRep, OracleTable, PageImage, RelevanceJudgments, RetrievalRun, Selector, SplitMix64,
    SynthConfig, TilerConfig, ToyEncoder, ToyEncoderConfig, TrainingConfig,
};

#[derive(Parser)]
#[command(
    name = "strata",
    version,
    about = "Multi-resolution multi-vector page retrieval"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut an image into per-level sub-images.
    Tile(TileArgs),
    /// Encode page images (toy encoder) or ingest external per-level embeddings.
    Encode(EncodeArgs),
    /// Build a (compressed) index from an embeddings directory.
    Index(IndexArgs),
    /// Score queries against an index and write a run.
    Search(SearchArgs),
    /// NDCG@K of a run against relevance judgments.
    Eval(EvalArgs),
    /// Mean NDCG@K across token budgets.
    Sweep(SweepArgs),
    /// Per-query best-of-systems combination of metric tables.
    Oracle(OracleArgs),
    /// Per-level share of MaxSim mass for sampled queries.
    Contrib(ContribArgs),
    /// Train a projection head on synthetic pairs.
    TrainToy(TrainArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic corpus and test images.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TileArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value = "1x1,1x2,2x2,2x3")]
    grids: GranularitySpec,
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    target: (usize, usize),
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Directory of PGM/PPM page images.
    #[arg(long, conflicts_with = "ingest", required_unless_present = "ingest")]
    images: Option<PathBuf>,
    /// Directory with one sub-directory of per-level MVTX files per page.
    #[arg(long)]
    ingest: Option<PathBuf>,
    #[arg(long, default_value = "1x1,1x2,2x2,2x3")]
    grids: GranularitySpec,
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    target: (usize, usize),
    #[arg(long, default_value_t = 128)]
    toy_dim: usize,
    #[arg(long, default_value_t = 4)]
    patch_grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Token budget per page, or `full`.
    #[arg(long, value_parser = parse_budget)]
    budget: Budget,
    #[arg(long, value_enum, default_value = "whole-sequence")]
    scope: ScopeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScopeArg {
    WholeSequence,
    PerLevel,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Score only the first `level` nested levels (uncompressed indexes).
    #[arg(long)]
    level: Option<usize>,
    /// Run file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "64,128,256,512,768,1024,1280,1536"
    )]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// CSV file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// `query_id,value` CSV per system; the file stem names the system.
    #[arg(long, value_delimiter = ',', required = true)]
    tables: Vec<PathBuf>,
}

#[derive(Args)]
struct ContribArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 100)]
    sample: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON training config; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained head as a `d_in x d_out` MVTX matrix.
    #[arg(long)]
    out: PathBuf,
    /// Optional `step,loss` CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    configs: u64,
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON corpus config; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// `train-toy` config file: training hyperparameters plus the synthetic
/// data they run on.
#[derive(Deserialize)]
#[serde(default)]
struct TrainFile {
    #[serde(flatten)]
    training: TrainingConfig,
    data_seed: u64,
    pages: usize,
    train_pairs: usize,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            training: TrainingConfig::default(),
            data_seed: 7,
            pages: 64,
            train_pairs: 32,
        }
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once('x')
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h = h.parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w = w.parse().map_err(|_| format!("bad width in {s:?}"))?;
    Ok((h, w))
}

fn parse_budget(s: &str) -> std::result::Result<Budget, String> {
    if s == "full" {
        return Ok(Budget::Full);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Budget::Tokens(n)),
        _ => Err(format!(
            "budget must be a positive integer or `full`, got {s:?}"
        )),
    }
}

fn read_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() == want_dirs {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .with_context(|| format!("bad file name {}", path.display()))
}

fn tile(args: TileArgs) -> Result<()> {
    let image = PageImage::read_pnm(&args.image)?;
    let cfg = TilerConfig::new(args.target.0, args.target.1, args.grids)?;
    let mut regions = 0;
    for batch in sample_multires(&image, &cfg)? {
        let dir = args
            .out
            .join(format!("level{}_{}", batch.level_index + 1, batch.grid));
        fs::create_dir_all(&dir)?;
        for (i, region) in batch.regions.iter().enumerate() {
            region.write_pnm(&dir.join(format!("region{i:02}.{}", region.pnm_extension())))?;
        }
        regions += batch.regions.len();
    }
    println!("levels {}", cfg.grids.len());
    println!("regions {regions}");
    Ok(())
}

fn encode(args: EncodeArgs, seed: u64) -> Result<()> {
    let (pages, encoder) = if let Some(dir) = &args.ingest {
        let pages = sorted_entries(dir, true)?
            .iter()
            .map(|page_dir| {
                let files = sorted_entries(page_dir, false)?;
                Ok(ingest_external(stem(page_dir)?, &files, &args.grids)?)
            })
            .collect::<Result<Vec<NestedPageRep>>>()?;
        (pages, EncoderDescriptor::External)
    } else {
        let dir = args
            .images
            .as_deref()
            .expect("clap enforces --images or --ingest");
        let config = ToyEncoderConfig {
            patch_grid: args.patch_grid,
            dim: args.toy_dim,
            seed,
        };
        let (h, w) = args.target;
        let tiler = TilerConfig::new(h, w, args.grids.clone())?;
        let backend = ToyEncoder::new(config)?.with_input_size(h, w);
        let pages = sorted_entries(dir, false)?
            .iter()
            .filter(|p| p.extension().is_some_and(|e| e == "pgm" || e == "ppm"))
            .map(|p| {
                Ok(encode_page(
                    stem(p)?,
                    &PageImage::read_pnm(p)?,
                    &tiler,
                    &backend,
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        let desc = EncoderDescriptor::Toy {
            config,
            target_h: h,
            target_w: w,
        };
        (pages, desc)
    };
    let mut opts = IndexOptions::new(Budget::Full);
    opts.grids = Some(args.grids);
    opts.encoder = encoder;
    if args.images.is_some() {
        opts.dim = Some(args.toy_dim);
    }
    let manifest = build_index(&pages, &args.out, &opts)?;
    println!("pages {}", manifest.pages.len());
    println!("dim {}", manifest.dim);
    println!(
        "tokens {}",
        pages.iter().map(NestedPageRep::total_tokens).sum::<usize>()
    );
    Ok(())
}

fn index(args: IndexArgs) -> Result<()> {
    let source = load_index(&args.embeddings)?;
    let pages = source.nested_pages()?;
    let opts = IndexOptions {
        budget: args.budget,
        scope: match args.scope {
            ScopeArg::WholeSequence => CompressionScope::WholeSequence,
            ScopeArg::PerLevel => CompressionScope::PerLevel,
        },
        grids: source.manifest.grids.clone(),
        encoder: source.manifest.encoder.clone(),
        dim: Some(source.manifest.dim),
    };
    let manifest = build_index(&pages, &args.out, &opts)?;
    let stored: usize = manifest.pages.iter().map(|p| p.rows).sum();
    println!("pages {}", manifest.pages.len());
    println!("stored_tokens {stored}");
    println!("data_bytes {}", stored * manifest.dim * 4);
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    let queries = read_query_dir(&args.queries)?;
    let selector = args.level.map_or(Selector::Full, Selector::Level);
    let run = run_queries(&queries, &index.pages, args.k, selector)?;
    write_or_print(args.out.as_deref(), &run.to_tsv())?;
    if args.out.is_some() {
        println!("queries {}", queries.len());
        println!("pages {}", index.pages.len());
    }
    Ok(())
}

fn read_qrels(path: &Path) -> Result<RelevanceJudgments> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RelevanceJudgments::parse_tsv(&text)?)
}

fn eval(args: EvalArgs) -> Result<()> {
    let text =
        fs::read_to_string(&args.run).with_context(|| format!("reading {}", args.run.display()))?;
    let run = RetrievalRun::parse_tsv(&text)?;
    let report = ndcg_at_k(&run, &read_qrels(&args.qrels)?, args.k)?;
    println!("mean_ndcg@{} {:.6}", args.k, report.mean);
    println!("queries_evaluated {}", report.evaluated());
    println!("queries_skipped {}", report.skipped);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let pages = load_index(&args.embeddings)?.nested_pages()?;
    let queries = read_query_dir(&args.queries)?;
    let rows = budget_sweep(
        &pages,
        &queries,
        &read_qrels(&args.qrels)?,
        &args.budgets,
        args.k,
    )?;
    write_or_print(
        args.out.as_deref(),
        &strata_core::evalkit::sweep_to_csv(&rows),
    )
}

fn oracle(args: OracleArgs) -> Result<()> {
    let mut table = OracleTable::new();
    for path in &args.tables {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        table.add_system(&stem(path)?, OracleTable::parse_system_csv(&text)?);
    }
    let report = combined_selector(&table)?;
    for (system, mean) in &report.system_means {
        println!("mean[{system}] {mean:.6}");
    }
    println!("combined_mean {:.6}", report.mean);
    if let Some((name, _)) = report.best_single() {
        println!("best_single {name}");
    }
    if let Some(gain) = report.relative_gain() {
        println!("relative_gain {gain:.6}");
    }
    Ok(())
}

fn contrib(args: ContribArgs, seed: u64) -> Result<()> {
    let pages = load_index(&args.embeddings)?.nested_pages()?;
    let qrels = read_qrels(&args.qrels)?;
    let mut queries = read_query_dir(&args.queries)?;
    queries.retain(|q| qrels.top_page(&q.query_id).is_some());
    SplitMix64::new(seed).shuffle(&mut queries);
    queries.truncate(args.sample);
    let levels = pages.first().map_or(0, NestedPageRep::levels);
    let mut sums = vec![0.0f64; levels];
    for q in &queries {
        let target = qrels.top_page(&q.query_id).expect("filtered above");
        let Some(page) = pages.iter().find(|p| p.page_id == target) else {
            bail!(
                "relevant page {target} of {} is not in the index",
                q.query_id
            );
        };
        for (s, r) in sums.iter_mut().zip(contribution(q, page)?.ratios) {
            *s += r;
        }
    }
    println!("queries {}", queries.len());
    for (k, s) in sums.iter().enumerate() {
        let mean = if queries.is_empty() {
            0.0
        } else {
            s / queries.len() as f64
        };
        println!("level{} {mean:.6}", k + 1);
    }
    Ok(())
}

fn train_toy(args: TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut file: TrainFile = read_json(args.config.as_deref())?;
    if let Some(s) = seed {
        file.training.seed = s;
    }
    let data = strata_core::synth::training_config(file.data_seed, file.pages);
    let (train, heldout) = gen_training_sets(&data, file.train_pairs)?;
    let out = strata_core::train_toy(&train, Some(&heldout), &file.training)?;
    mvtx::write(&args.out, &out.head.to_matrix())?;
    if let Some(p) = &args.trace {
        fs::write(p, out.trace_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("steps {}", file.training.steps);
    println!("initial_loss {:.6}", out.trace[0]);
    println!("final_loss {:.6}", out.trace[out.trace.len() - 1]);
    println!("heldout_ndcg@5 {:.6}", out.heldout_ndcg.unwrap_or(0.0));
    Ok(())
}

fn gradcheck(args: GradcheckArgs, seed: u64) -> Result<()> {
    let cfg = TrainingConfig::default();
    for s in seed..seed + args.configs {
        let (batch, head) = random_gradcheck_instance(s, 4, 8, 4, &[1, 2, 4, 6])?;
        let obj = HeadObjective::new(&batch, &cfg)?;
        let (_, analytic) = obj.loss_and_grad(&head)?;
        let numeric = finite_difference_gradient(&obj, &head, args.h)?;
        println!(
            "seed {s} max_relative_error {:.3e} smooth {}",
            max_relative_error(&analytic, &numeric, 1e-6),
            stencil_is_smooth(&obj, &head, args.h)?
        );
    }
    Ok(())
}

fn synth(args: SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg: SynthConfig = read_json(args.config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let corpus = gen_corpus(&cfg)?;
    let mut opts = IndexOptions::new(Budget::Full);
    opts.dim = Some(cfg.dim);
    build_index(&corpus.pages, &args.out.join("embeddings"), &opts)?;
    write_query_dir(&args.out.join("queries"), &corpus.queries)?;
    fs::write(args.out.join("qrels.tsv"), corpus.qrels.to_tsv())?;
    let images = gen_images(&ImageSynthConfig {
        seed: cfg.seed,
        ..Default::default()
    })?;
    for (family, set) in [("quadrant", &images.quadrant), ("legend", &images.legend)] {
        let dir = args.out.join("images").join(family);
        fs::create_dir_all(&dir)?;
        for (id, img) in set {
            img.write_pnm(&dir.join(format!("{id}.{}", img.pnm_extension())))?;
        }
    }
    println!("pages {}", corpus.pages.len());
    println!("queries {}", corpus.queries.len());
    println!("images {}", images.quadrant.len() + images.legend.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Tile(a) => tile(a),
        Command::Encode(a) => encode(a, seed),
        Command::Index(a) => index(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Contrib(a) => contrib(a, seed),
        Command::TrainToy(a) => train_toy(a, cli.seed),
        Command::Gradcheck(a) => gradcheck(a, seed),
        Command::Synth(a) => synth(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
