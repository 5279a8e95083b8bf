//! `rgm`: reduced Google matrix analysis from the command line.
//!
//! Exit status is 0 on success, 1 for usage or input errors and 2 when a
//! numerical computation fails.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rgm_core::dense::stationary;
use rgm_core::friends::{build_network, DotStyle};
use rgm_core::google::{cheirank, pagerank, write_subset_ranks, DEFAULT_MAX_ITER};
use rgm_core::graph::{generate_synthetic, load_edge_list, Model};
use rgm_core::reduced::{read_manifest, read_matrix_csv, reduce};
use rgm_core::sensitivity::{
    average_labeled, average_reports, cheirank_sensitivity, imbalance_matrix, sensitivity, two_way,
};
use rgm_core::{
    fmt_f64, DenseMatrix, DirectedGraph, Error, GoogleMatrix, Mode, NodeSubset, Perturbation,
    ReduceOptions, DEFAULT_ALPHA, DEFAULT_DELTA,
};

#[derive(Parser)]
#[command(
    name = "rgm",
    version,
    about = "Reduced Google matrix analysis of directed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PageRank and CheiRank of the full graph.
    Pagerank(PagerankArgs),
    /// Reduced matrix of a node subset and its three components.
    Reduce(ReduceArgs),
    /// Sensitivity of the reduced PageRank to boosting one link.
    Sensitivity(SensitivityArgs),
    /// Pairwise imbalance matrix F.
    Imbalance(ImbalanceArgs),
    /// Top-k friends or followers network as DOT and edge CSV.
    Friends(FriendsArgs),
    /// Seeded synthetic graph as an edge list.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, one "src dst" pair per line.
    #[arg(long)]
    graph: PathBuf,
    /// Label map, one "index<TAB>label" per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct PagerankArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Also report global and local ranks of these nodes (file or comma list).
    #[arg(long)]
    subset: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Subset labels: a file with one label per line, or a comma list.
    #[arg(long)]
    subset: String,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    edition: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Where reduced matrices come from: computed from a graph, or read back
/// from one or more `reduce` output directories.
#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with_all = ["reduced", "editions"], requires = "subset")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA, requires = "graph")]
    alpha: f64,
    #[arg(long, requires = "graph")]
    subset: Option<String>,
    #[arg(long, requires = "graph")]
    edition: Option<String>,
    /// A `reduce` output directory.
    #[arg(long, conflicts_with = "editions")]
    reduced: Option<PathBuf>,
    /// Several `reduce` output directories, averaged by label.
    #[arg(long, num_args = 1..)]
    editions: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RankArg {
    Pagerank,
    Cheirank,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    source: Source,
    /// Source node `j` of the boosted link `j → i`.
    #[arg(long)]
    from: String,
    /// Target node `i` of the boosted link.
    #[arg(long)]
    to: String,
    #[arg(long, default_value_t = DEFAULT_DELTA, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = RankArg::Pagerank)]
    rank: RankArg,
    /// Also write the sum of both link directions.
    #[arg(long)]
    two_way: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImbalanceArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = DEFAULT_DELTA, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatrixArg {
    Gr,
    Gqrnd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Friends,
    Followers,
}

#[derive(Args)]
struct FriendsArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value_t = MatrixArg::Gr)]
    matrix: MatrixArg,
    /// Comma-separated leader labels.
    #[arg(long)]
    leaders: String,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Friends)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Uniform,
    Preferential,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModelArg::Preferential)]
    model: ModelArg,
    /// Edge list to write.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CmdResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Pagerank(a) => cmd_pagerank(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Imbalance(a) => cmd_imbalance(a),
        Command::Friends(a) => cmd_friends(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn open(path: &Path) -> CmdResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> CmdResult<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn check_tol(tol: f64) -> CmdResult {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        usage(format!("--tol must be in (0, 1), got {tol}"))
    }
}

fn load_graph(args: &GraphArgs) -> CmdResult<DirectedGraph> {
    let labels = args.labels.as_deref().map(open).transpose()?;
    let (graph, stats) = load_edge_list(open(&args.graph)?, labels)?;
    if stats.self_loops > 0 || stats.duplicates > 0 {
        eprintln!(
            "note: dropped {} self-loops and {} duplicate edges",
            stats.self_loops, stats.duplicates
        );
    }
    Ok(graph)
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A subset argument names a file when one exists at that path.
fn subset_labels(arg: &str) -> CmdResult<Vec<String>> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{arg}: {e}")))?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect())
    } else {
        Ok(split_list(arg))
    }
}

fn resolve_subset(graph: &DirectedGraph, arg: &str) -> CmdResult<NodeSubset> {
    let names = subset_labels(arg)?;
    if names.is_empty() {
        return usage("--subset is empty");
    }
    if graph.labels().is_some() {
        return Ok(graph.resolve_subset(&names)?);
    }
    let indices = names
        .iter()
        .map(|s| {
            s.parse::<usize>().map_err(|_| {
                Failure::Usage(format!("{s:?} is not a node index (no --labels given)"))
            })
        })
        .collect::<CmdResult<Vec<_>>>()?;
    Ok(NodeSubset::new(graph, indices)?)
}

fn cmd_pagerank(a: PagerankArgs) -> CmdResult {
    check_tol(a.tol)?;
    let graph = load_graph(&a.graph)?;
    let subset = a
        .subset
        .as_deref()
        .map(|s| resolve_subset(&graph, s))
        .transpose()?;
    let google = GoogleMatrix::new(&graph, a.graph.alpha)?;
    let pr = pagerank(&google, a.tol, DEFAULT_MAX_ITER)?;
    let cr = cheirank(&google, a.tol, DEFAULT_MAX_ITER)?;
    eprintln!(
        "pagerank: {} iterations, cheirank: {} iterations",
        pr.iterations, cr.iterations
    );
    pr.write_csv(&graph, create(&a.out, "pagerank.csv")?)?;
    cr.write_csv(&graph, create(&a.out, "cheirank.csv")?)?;
    if let Some(subset) = subset {
        write_subset_ranks(&pr, &cr, &subset, create(&a.out, "subset_ranks.csv")?)?;
    }
    Ok(())
}

fn cmd_reduce(a: ReduceArgs) -> CmdResult {
    check_tol(a.tol)?;
    let graph = load_graph(&a.graph)?;
    let subset = resolve_subset(&graph, &a.subset)?;
    let google = GoogleMatrix::new(&graph, a.graph.alpha)?;
    let opts = ReduceOptions {
        tol: a.tol,
        ..ReduceOptions::default()
    };
    let red = reduce(&google, &subset, &opts)?;
    red.write_dir(&a.out, a.edition.as_deref())?;
    let w = red.weights;
    println!("lambda_c\t{}", fmt_f64(red.lambda_c));
    println!("W_rr\t{}", fmt_f64(w.w_rr));
    println!("W_pr\t{}", fmt_f64(w.w_pr));
    println!("W_qr\t{}", fmt_f64(w.w_qr));
    println!("neg_weight\t{}", fmt_f64(red.neg_weight));
    Ok(())
}

struct Loaded {
    edition: Option<String>,
    labels: Vec<String>,
    g_r: DenseMatrix,
    /// Only read when asked for.
    g_qr_ndiag: Option<DenseMatrix>,
}

fn read_dir(dir: &Path, need_qr: bool) -> CmdResult<Loaded> {
    let manifest = read_manifest(dir)?;
    let (labels, g_r) = read_matrix_csv(&dir.join("g_r.csv"))?;
    if labels != manifest.labels {
        return usage(format!(
            "{}: g_r.csv labels disagree with the manifest",
            dir.display()
        ));
    }
    let g_qr_ndiag = if need_qr {
        let (l, m) = read_matrix_csv(&dir.join("g_qr_ndiag.csv"))?;
        if l != labels {
            return usage(format!(
                "{}: g_qr_ndiag.csv labels disagree with g_r.csv",
                dir.display()
            ));
        }
        Some(m)
    } else {
        None
    };
    let edition = manifest
        .edition
        .or_else(|| dir.file_name().map(|s| s.to_string_lossy().into_owned()));
    Ok(Loaded {
        edition,
        labels,
        g_r,
        g_qr_ndiag,
    })
}

fn load_sources(s: &Source, tol: f64, need_qr: bool) -> CmdResult<Vec<Loaded>> {
    if let Some(path) = &s.graph {
        let graph = load_graph(&GraphArgs {
            graph: path.clone(),
            labels: s.labels.clone(),
            alpha: s.alpha,
        })?;
        let subset = resolve_subset(&graph, s.subset.as_deref().unwrap_or_default())?;
        let google = GoogleMatrix::new(&graph, s.alpha)?;
        let opts = ReduceOptions {
            tol,
            ..ReduceOptions::default()
        };
        let red = reduce(&google, &subset, &opts)?;
        return Ok(vec![Loaded {
            edition: s.edition.clone(),
            labels: subset.labels().to_vec(),
            g_r: red.g_r,
            g_qr_ndiag: Some(red.g_qr_ndiag),
        }]);
    }
    if let Some(dir) = &s.reduced {
        return Ok(vec![read_dir(dir, need_qr)?]);
    }
    if s.editions.is_empty() {
        return usage("give --graph with --subset, --reduced <dir> or --editions <dir...>");
    }
    let loaded = s
        .editions
        .iter()
        .map(|d| read_dir(d, need_qr))
        .collect::<CmdResult<Vec<_>>>()?;
    let mut names: Vec<&str> = loaded
        .iter()
        .map(|l| l.edition.as_deref().unwrap_or(""))
        .collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return usage("editions must have distinct names");
    }
    Ok(loaded)
}

fn position(labels: &[String], label: &str, what: &str) -> CmdResult<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Failure::Usage(format!("{what} {label:?} is not in the subset")))
}

fn check_delta(delta: f64) -> CmdResult {
    if delta != 0.0 && delta.abs() < 1.0 {
        Ok(())
    } else {
        usage(format!(
            "--delta must be nonzero with |delta| < 1, got {delta}"
        ))
    }
}

fn write_vector_csv<W: Write>(labels: &[String], values: &[f64], w: W) -> CmdResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "d"]).map_err(Error::from)?;
    for (l, v) in labels.iter().zip(values) {
        out.write_record([l.as_str(), &fmt_f64(*v)])
            .map_err(Error::from)?;
    }
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn suffixed(stem: &str, edition: Option<&str>, multi: bool) -> String {
    match (multi, edition) {
        (true, Some(e)) => format!("{stem}_{e}.csv"),
        _ => format!("{stem}.csv"),
    }
}

fn cmd_sensitivity(a: SensitivityArgs) -> CmdResult {
    check_tol(a.tol)?;
    check_delta(a.delta)?;
    if a.from == a.to {
        return usage(format!("--from and --to name the same node {:?}", a.from));
    }
    let sources = load_sources(&a.source, a.tol, false)?;
    let multi = sources.len() > 1;
    let mut reports = Vec::with_capacity(sources.len());
    let mut two_ways = Vec::new();
    for src in &sources {
        let j = position(&src.labels, &a.from, "--from")?;
        let i = position(&src.labels, &a.to, "--to")?;
        let p = Perturbation::new(i, j, a.delta)?;
        let report = match a.rank {
            RankArg::Pagerank => sensitivity(&src.g_r, &p, a.tol)?,
            RankArg::Cheirank => cheirank_sensitivity(&src.g_r, &p, a.tol)?,
        }
        .with_labels(&src.labels)?
        .with_edition(src.edition.as_deref());
        if report.noop {
            eprintln!(
                "warning: link {} -> {} has zero weight{}; perturbation is a no-op",
                a.from,
                a.to,
                src.edition
                    .as_ref()
                    .map(|e| format!(" in {e}"))
                    .unwrap_or_default()
            );
        }
        let stem = suffixed("sensitivity", src.edition.as_deref(), multi);
        report.write_csv(create(&a.out, &stem)?)?;
        report.write_json(create(&a.out, &stem.replace(".csv", ".json"))?)?;
        if a.two_way {
            if a.rank == RankArg::Cheirank {
                return usage("--two-way is defined for PageRank sensitivity only");
            }
            let d = two_way(&src.g_r, j, i, a.delta, a.tol)?;
            write_vector_csv(
                &src.labels,
                &d,
                create(&a.out, &suffixed("two_way", src.edition.as_deref(), multi))?,
            )?;
            two_ways.push(d);
        }
        reports.push(report);
    }
    if multi {
        let mean = average_reports(&reports)?;
        write_vector_csv(
            &reports[0].labels,
            &mean,
            create(&a.out, "sensitivity_mean.csv")?,
        )?;
        if a.two_way {
            let items: Vec<(&[String], &[f64])> = sources
                .iter()
                .zip(&two_ways)
                .map(|(s, d)| (s.labels.as_slice(), d.as_slice()))
                .collect();
            let mean = average_labeled(&items)?;
            write_vector_csv(
                &sources[0].labels,
                &mean,
                create(&a.out, "two_way_mean.csv")?,
            )?;
        }
    }
    Ok(())
}

fn cmd_imbalance(a: ImbalanceArgs) -> CmdResult {
    check_tol(a.tol)?;
    check_delta(a.delta)?;
    let sources = load_sources(&a.source, a.tol, false)?;
    let multi = sources.len() > 1;
    let mut matrices = Vec::with_capacity(sources.len());
    for src in &sources {
        let f = imbalance_matrix(&src.g_r, a.delta, a.tol)?;
        for (x, y, why) in &f.missing {
            eprintln!(
                "warning: pair ({}, {}) failed: {why}",
                src.labels[*x], src.labels[*y]
            );
        }
        f.write_csv(
            &src.labels,
            create(
                &a.out,
                &suffixed("imbalance", src.edition.as_deref(), multi),
            )?,
        )?;
        matrices.push(f.f);
    }
    if multi {
        let labels = &sources[0].labels;
        let n = labels.len();
        let mut mean = DenseMatrix::zeros(n);
        for (src, f) in sources.iter().zip(&matrices) {
            if src.labels.len() != n {
                return usage("label sets differ between editions");
            }
            let pos = labels
                .iter()
                .map(|l| position(&src.labels, l, "label"))
                .collect::<CmdResult<Vec<_>>>()?;
            for a in 0..n {
                for b in 0..n {
                    mean.set(a, b, mean.get(a, b) + f.get(pos[a], pos[b]));
                }
            }
        }
        let m = sources.len() as f64;
        let mean = DenseMatrix::from_columns(n, |j| (0..n).map(|i| mean.get(i, j) / m).collect());
        rgm_core::reduced::write_matrix_csv(&mean, labels, create(&a.out, "imbalance_mean.csv")?)?;
    }
    Ok(())
}

fn cmd_friends(a: FriendsArgs) -> CmdResult {
    check_tol(a.tol)?;
    let need_qr = a.matrix == MatrixArg::Gqrnd;
    let mut sources = load_sources(&a.source, a.tol, need_qr)?;
    if sources.len() != 1 {
        return usage("friends takes a single reduced matrix");
    }
    let src = sources.remove(0);
    let n = src.labels.len();
    if a.k == 0 || a.k >= n {
        return usage(format!("--k must be between 1 and {}", n.saturating_sub(1)));
    }
    let leaders = split_list(&a.leaders)
        .iter()
        .map(|l| position(&src.labels, l, "leader"))
        .collect::<CmdResult<Vec<_>>>()?;
    if leaders.is_empty() {
        return usage("--leaders is empty");
    }
    let weights = stationary(&src.g_r, a.tol, 100_000)?;
    let m = match a.matrix {
        MatrixArg::Gr => &src.g_r,
        MatrixArg::Gqrnd => src.g_qr_ndiag.as_ref().expect("loaded on request"),
    };
    let mode = match a.mode {
        ModeArg::Friends => Mode::Friends,
        ModeArg::Followers => Mode::Followers,
    };
    let net = build_network(m, &src.labels, &leaders, a.k, mode, &weights)?;
    let mut dot = create(&a.out, "friends.dot")?;
    dot.write_all(net.to_dot(&DotStyle::default()).as_bytes())
        .and_then(|()| dot.flush())
        .map_err(Error::from)?;
    net.write_edges_csv(create(&a.out, "friends_edges.csv")?)?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    let model = match a.model {
        ModelArg::Uniform => Model::Uniform,
        ModelArg::Preferential => Model::Preferential,
    };
    if a.nodes == 0 {
        return usage("--nodes must be positive");
    }
    let graph = generate_synthetic(a.nodes, a.edges, a.seed, model)?;
    let file =
        File::create(&a.out).map_err(|e| Failure::Usage(format!("{}: {e}", a.out.display())))?;
    let mut w = BufWriter::new(file);
    graph.write_edge_list(&mut w)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}
