//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `RGM_BLESS=1` to rewrite the pinned golden files instead of
//! comparing against them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgm_core::friends::{build_network, DotStyle};
use rgm_core::google::{cheirank, pagerank, DEFAULT_MAX_ITER};
use rgm_core::graph::{generate_synthetic, Model};
use rgm_core::oracle::{dense_google, dense_oracle_reduce, dense_stationary};
use rgm_core::reduced::{leading_ss_eigenpair, reduce, reduced_pagerank, Scattering};
use rgm_core::sensitivity::{imbalance_matrix, sensitivity};
use rgm_core::{
    DenseMatrix, DirectedGraph, GoogleMatrix, LinearOperator, Mode, NodeSubset, Perturbation,
    ReduceOptions, ReducedMatrices,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Case {
    graph: DirectedGraph,
    subset: NodeSubset,
    reduced: ReducedMatrices,
}

/// The 20 seeded oracle graphs: N cycles through {50, 200, 500}, edges per
/// node through 2..=10, N_r through {3, 10, 27}.
fn build_cases() -> Result<(Vec<Case>, Duration), String> {
    let sizes = [50, 200, 500];
    let subset_sizes = [3, 10, 27];
    let start = Instant::now();
    let mut cases = Vec::new();
    for k in 0..20u64 {
        let n = sizes[k as usize % 3];
        let per_node = 2 + (k as usize * 3) % 9;
        let nr = subset_sizes[(k as usize / 3) % 3];
        let model = if k % 2 == 0 {
            Model::Preferential
        } else {
            Model::Uniform
        };
        let graph =
            generate_synthetic(n, n * per_node, 1000 + k, model).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let subset = NodeSubset::new(&graph, sample(&mut rng, n, nr).into_vec())
            .map_err(|e| e.to_string())?;
        let google = GoogleMatrix::new(&graph, 0.85).map_err(|e| e.to_string())?;
        let reduced = reduce(&google, &subset, &ReduceOptions::default())
            .map_err(|e| format!("graph {k} (N={n}, N_r={nr}): {e}"))?;
        cases.push(Case {
            graph,
            subset,
            reduced,
        });
    }
    Ok((cases, start.elapsed()))
}

fn oracle_equivalence(cases: &[Case], reduce_time: Duration) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let dense = dense_google(&c.graph, 0.85).map_err(|e| e.to_string())?;
        let want = dense_oracle_reduce(&dense, c.subset.indices()).map_err(|e| e.to_string())?;
        let err = c.reduced.g_r.max_abs_diff(&want);
        ensure(err <= 1e-10, || {
            format!("graph {k}: max error {err:e} > 1e-10")
        })?;
        worst = worst.max(err);
    }
    let total = reduce_time + start.elapsed();
    ensure(total.as_secs_f64() <= 60.0, || {
        format!("took {total:?} > 60 s")
    })?;
    Ok(format!(
        "20 graphs, max |error| {worst:.2e}, {:.2} s",
        total.as_secs_f64()
    ))
}

fn pagerank_consistency(cases: &[Case]) -> Outcome {
    let mut worst = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let google = GoogleMatrix::new(&c.graph, 0.85).map_err(|e| e.to_string())?;
        let full = pagerank(&google, 1e-13, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
        let local = reduced_pagerank(&c.reduced, 1e-13, 100_000).map_err(|e| e.to_string())?;
        let mass: f64 = c.subset.indices().iter().map(|&i| full.p[i]).sum();
        let err: f64 = c
            .subset
            .indices()
            .iter()
            .zip(&local)
            .map(|(&i, &q)| (full.p[i] / mass - q).abs())
            .sum();
        ensure(err <= 1e-8, || {
            format!("graph {k}: L1 error {err:e} > 1e-8")
        })?;
        worst = worst.max(err);
    }
    Ok(format!("max L1 error {worst:.2e}"))
}

fn decomposition_identities(cases: &[Case]) -> Outcome {
    let mut worst_col = 0.0f64;
    let mut worst_rank1 = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let r = &c.reduced;
        ensure(r.g_r == r.g_rr.add(&r.g_pr).add(&r.g_qr), || {
            format!("graph {k}: g_r differs from g_rr + g_pr + g_qr")
        })?;
        for s in r.g_r.column_sums() {
            worst_col = worst_col.max((s - 1.0).abs());
        }
        ensure(worst_col <= 1e-10, || {
            format!("graph {k}: column sum off by {worst_col:e}")
        })?;
        let w = r.weights.sum();
        ensure((w - 1.0).abs() <= 1e-10, || {
            format!("graph {k}: weights sum to {w}")
        })?;
        let n = r.g_pr.n();
        let c0 = r.g_pr.column(0);
        for j in 1..n {
            let cj = r.g_pr.column(j);
            let ratio = cj[0] / c0[0];
            for i in 0..n {
                let rel = (cj[i] - ratio * c0[i]).abs() / cj[i].abs();
                worst_rank1 = worst_rank1.max(rel);
            }
        }
        ensure(worst_rank1 <= 1e-8, || {
            format!("graph {k}: g_pr columns not proportional ({worst_rank1:e})")
        })?;
    }
    Ok(format!(
        "exact sum, column sums within {worst_col:.1e}, rank-1 within {worst_rank1:.1e}"
    ))
}

fn projector_identities(cases: &[Case]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_pq, mut worst_eig) = (0.0f64, 0.0f64);
    for (k, c) in cases.iter().enumerate() {
        let google = GoogleMatrix::new(&c.graph, 0.85).map_err(|e| e.to_string())?;
        let pair =
            leading_ss_eigenpair(&google, &c.subset, 1e-13, 100_000).map_err(|e| e.to_string())?;
        let op = Scattering::new(&google, &c.subset);
        for _ in 0..5 {
            let v: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pq: f64 = pair
                .project_p(&pair.project_q(&v))
                .iter()
                .map(|x| x.abs())
                .sum();
            let pv = pair.project_p(&v);
            let mut gpv = vec![0.0; op.dim()];
            op.apply(&pv, &mut gpv);
            let eig: f64 = gpv
                .iter()
                .zip(&pv)
                .map(|(a, b)| (a - pair.lambda * b).abs())
                .sum();
            ensure(pq <= 1e-10, || format!("graph {k}: |P Q v| = {pq:e}"))?;
            ensure(eig <= 1e-9, || {
                format!("graph {k}: |(G_ss - lambda) P v| = {eig:e}")
            })?;
            worst_pq = worst_pq.max(pq);
            worst_eig = worst_eig.max(eig);
        }
    }
    Ok(format!(
        "|PQv| <= {worst_pq:.1e}, |(G_ss - l)Pv| <= {worst_eig:.1e}"
    ))
}

fn sensitivity_correctness(cases: &[Case]) -> Outcome {
    let uniform = DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
    let r = sensitivity(&uniform, &Perturbation::new(0, 1, 0.03).unwrap(), 1e-12)
        .map_err(|e| e.to_string())?;
    let closed = (r.d[0] - 0.2445).abs().max((r.d[1] + 0.2445).abs());
    ensure(closed <= 1e-3, || format!("2x2 case gives d = {:?}", r.d))?;

    let mut runs = 0;
    let mut worst_cancel = 0.0f64;
    let mut worst_rel = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let g = &c.reduced.g_r;
        let n = g.n();
        for (i, j) in [(0, 1), (n - 1, 0), (1, n - 1)] {
            let d: Vec<Vec<f64>> = [0.01, 0.03, 0.05]
                .iter()
                .map(|&delta| {
                    let r = sensitivity(g, &Perturbation::new(i, j, delta).unwrap(), 1e-12)
                        .map_err(|e| e.to_string())?;
                    let s: f64 = r.d.iter().zip(&r.p_base).map(|(d, p)| d * p).sum();
                    worst_cancel = worst_cancel.max(s.abs());
                    runs += 1;
                    Ok(r.d)
                })
                .collect::<Result<_, String>>()?;
            ensure(worst_cancel <= 1e-9, || {
                format!("graph {k}: sum d*p = {worst_cancel:e}")
            })?;
            for a in 0..n {
                let base = d[1][a];
                if base.abs() <= 1e-6 {
                    continue;
                }
                for other in [&d[0], &d[2]] {
                    let rel = (other[a] - base).abs() / base.abs();
                    ensure(other[a].signum() == base.signum() && rel <= 0.1, || {
                        format!(
                            "graph {k}, link {j}->{i}, node {a}: d varies by {rel:.3} across delta"
                        )
                    })?;
                    worst_rel = worst_rel.max(rel);
                }
            }
        }
    }
    Ok(format!(
        "2x2 d = ({:+.4}, {:+.4}); {runs} runs, |sum d*p| <= {worst_cancel:.1e}; delta spread <= {:.1}%",
        r.d[0],
        r.d[1],
        100.0 * worst_rel
    ))
}

// Log-derivative of the LU-solved stationary vector for link j -> i.
fn brute_d(g: &DenseMatrix, i: usize, j: usize, delta: f64) -> Result<Vec<f64>, String> {
    let n = g.n();
    let mut m = DenseMatrix::from_columns(n, |c| g.column(c));
    m.set(i, j, m.get(i, j) * (1.0 + delta));
    let col: f64 = (0..n).map(|r| m.get(r, j)).sum();
    for r in 0..n {
        m.set(r, j, m.get(r, j) / col);
    }
    let p = dense_stationary(g).map_err(|e| e.to_string())?;
    let q = dense_stationary(&m).map_err(|e| e.to_string())?;
    Ok(p.iter()
        .zip(&q)
        .map(|(p, q)| (q - p) / (delta * p))
        .collect())
}

fn imbalance_properties() -> Outcome {
    let graph =
        generate_synthetic(300, 1500, 77, Model::Preferential).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let subset =
        NodeSubset::new(&graph, sample(&mut rng, 300, 10).into_vec()).map_err(|e| e.to_string())?;
    let google = GoogleMatrix::new(&graph, 0.85).map_err(|e| e.to_string())?;
    let g = reduce(&google, &subset, &ReduceOptions::default())
        .map_err(|e| e.to_string())?
        .g_r;
    let f = imbalance_matrix(&g, 0.03, 1e-12).map_err(|e| e.to_string())?;
    ensure(f.missing.is_empty(), || {
        format!("{} pairs failed", f.missing.len())
    })?;
    let mut worst = 0.0f64;
    for a in 0..10 {
        ensure(f.f.get(a, a) == 0.0, || {
            format!("F({a},{a}) = {}", f.f.get(a, a))
        })?;
        for b in 0..10 {
            ensure(f.f.get(a, b) + f.f.get(b, a) == 0.0, || {
                format!("F({a},{b}) + F({b},{a}) != 0")
            })?;
            if a == b {
                continue;
            }
            let ab = brute_d(&g, b, a, 0.03)?;
            let ba = brute_d(&g, a, b, 0.03)?;
            let want = (ab[a] + ba[a]) - (ab[b] + ba[b]);
            worst = worst.max((f.f.get(a, b) - want).abs());
        }
    }
    ensure(worst <= 1e-10, || {
        format!("max deviation from brute force {worst:e}")
    })?;
    Ok(format!(
        "10x10 antisymmetric, zero diagonal, max deviation {worst:.1e}"
    ))
}

fn sorted_line(m: &DenseMatrix, j: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..m.n()).filter(|&i| i != j).collect();
    v.sort_by(|&a, &b| {
        m.get(b, j)
            .partial_cmp(&m.get(a, j))
            .unwrap()
            .then(a.cmp(&b))
    });
    v.truncate(k);
    v
}

fn closure_oracle(
    m: &DenseMatrix,
    leaders: &[usize],
    k: usize,
    mode: Mode,
) -> (BTreeSet<usize>, BTreeSet<(usize, usize)>) {
    let t = m.transpose();
    let edges_of = |j: usize| -> Vec<(usize, usize)> {
        match mode {
            Mode::Friends => sorted_line(m, j, k).into_iter().map(|i| (j, i)).collect(),
            Mode::Followers => sorted_line(&t, j, k).into_iter().map(|i| (i, j)).collect(),
        }
    };
    let mut nodes: BTreeSet<usize> = leaders.iter().copied().collect();
    let mut edges = BTreeSet::new();
    loop {
        let before = (nodes.len(), edges.len());
        for j in nodes.clone() {
            for (s, d) in edges_of(j) {
                nodes.insert(s);
                nodes.insert(d);
                edges.insert((s, d));
            }
        }
        if (nodes.len(), edges.len()) == before {
            return (nodes, edges);
        }
    }
}

fn friends_networks() -> Outcome {
    let labels: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
    let mut checked = 0;
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m =
            DenseMatrix::from_columns(10, |_| (0..10).map(|_| rng.gen_range(0.0..1.0)).collect());
        m.normalize_columns();
        let weights = dense_stationary(&m).map_err(|e| e.to_string())?;
        for mode in [Mode::Friends, Mode::Followers] {
            for (leaders, k) in [
                (vec![0, 1], 4),
                (vec![seed as usize % 10], 1),
                (vec![2, 5, 8], 2),
            ] {
                let net = build_network(&m, &labels, &leaders, k, mode, &weights)
                    .map_err(|e| e.to_string())?;
                let (nodes, edges) = closure_oracle(&m, &leaders, k, mode);
                let got: BTreeSet<_> = net
                    .primary_edges
                    .iter()
                    .chain(&net.closure_edges)
                    .map(|e| (e.src, e.dst))
                    .collect();
                ensure(net.nodes == nodes && got == edges, || {
                    format!("seed {seed}, leaders {leaders:?}, k {k}: network differs from oracle")
                })?;
                let dot = net.to_dot(&DotStyle::default());
                let again = build_network(&m, &labels, &leaders, k, mode, &weights)
                    .map_err(|e| e.to_string())?
                    .to_dot(&DotStyle::default());
                ensure(dot == again, || {
                    format!("seed {seed}: DOT bytes differ between runs")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} networks match the closure oracle, DOT byte-stable"
    ))
}

fn peak_rss_mb() -> Option<f64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

fn performance() -> Outcome {
    let t = Instant::now();
    let graph = generate_synthetic(100_000, 1_000_000, 42, Model::Preferential)
        .map_err(|e| e.to_string())?;
    let gen = t.elapsed();

    let start = Instant::now();
    let google = GoogleMatrix::new(&graph, 0.85).map_err(|e| e.to_string())?;
    let pr = pagerank(&google, 1e-12, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    let pr_time = start.elapsed();
    cheirank(&google, 1e-12, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    let cr_time = start.elapsed() - pr_time;
    let top: Vec<usize> = pr.order[..40].to_vec();
    let subset = NodeSubset::new(&graph, top).map_err(|e| e.to_string())?;
    let red = reduce(&google, &subset, &ReduceOptions::default()).map_err(|e| e.to_string())?;
    let total = start.elapsed();
    let red_time = total - pr_time - cr_time;

    let mem = peak_rss_mb();
    ensure(pr_time.as_secs_f64() < 5.0, || {
        format!("pagerank took {pr_time:?}")
    })?;
    ensure(total.as_secs_f64() < 60.0, || {
        format!("pipeline took {total:?}")
    })?;
    ensure(mem.is_some_and(|m| m < 2048.0), || {
        format!("peak memory {mem:?} MB")
    })?;
    Ok(format!(
        "N=1e5, 1e6 edges: pagerank {:.2} s, cheirank {:.2} s, reduce N_r=40 {:.2} s (lambda_c {:.4}), total {:.2} s, peak RSS {:.0} MB, {} threads; generation {:.2} s not counted",
        pr_time.as_secs_f64(),
        cr_time.as_secs_f64(),
        red_time.as_secs_f64(),
        red.lambda_c,
        total.as_secs_f64(),
        mem.unwrap_or(f64::NAN),
        std::thread::available_parallelism().map_or(1, |n| n.get()),
        gen.as_secs_f64(),
    ))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Every subcommand on the country fixture: (output directory, arguments).
/// `{F}` is the fixture directory and `{O}` the scratch output root.
const GOLDEN_RUNS: &[(&str, &str)] = &[
    (
        "pagerank",
        "pagerank --graph {F}/graph_en.txt --labels {F}/labels.tsv --subset {F}/subset.txt --out {O}/pagerank",
    ),
    (
        "reduce_en",
        "reduce --graph {F}/graph_en.txt --labels {F}/labels.tsv --subset {F}/subset.txt --edition en --out {O}/reduce_en",
    ),
    (
        "reduce_fr",
        "reduce --graph {F}/graph_fr.txt --labels {F}/labels.tsv --subset {F}/subset.txt --edition fr --out {O}/reduce_fr",
    ),
    (
        "sensitivity",
        "sensitivity --reduced {O}/reduce_en --from IT --to FR --out {O}/sensitivity",
    ),
    (
        "sensitivity_editions",
        "sensitivity --editions {O}/reduce_en {O}/reduce_fr --from IT --to FR --two-way --out {O}/sensitivity_editions",
    ),
    (
        "cheirank_sensitivity",
        "sensitivity --reduced {O}/reduce_en --from DE --to PL --rank cheirank --delta -0.03 --out {O}/cheirank_sensitivity",
    ),
    ("imbalance", "imbalance --reduced {O}/reduce_en --out {O}/imbalance"),
    (
        "friends_gr",
        "friends --reduced {O}/reduce_en --matrix gr --leaders DE,FR --k 4 --mode friends --out {O}/friends_gr",
    ),
    (
        "followers_gqrnd",
        "friends --reduced {O}/reduce_en --matrix gqrnd --leaders GB --k 2 --mode followers --out {O}/followers_gqrnd",
    ),
];

fn golden_run() -> Outcome {
    let bless = std::env::var_os("RGM_BLESS").is_some();
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = fixtures().join("countries");
    let golden = fixtures().join("golden");
    let mut compared = 0;
    for (name, args) in GOLDEN_RUNS {
        let line = args
            .replace("{F}", f.to_str().unwrap())
            .replace("{O}", scratch.path().to_str().unwrap());
        let out = Command::new(env!("CARGO_BIN_EXE_rgm"))
            .args(line.split_whitespace())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!(
                "{name}: exit {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
        let dir = scratch.path().join(name);
        fs::write(dir.join("stdout.txt"), &out.stdout).map_err(|e| e.to_string())?;
        let mut files: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        let want_dir = golden.join(name);
        if bless {
            let _ = fs::remove_dir_all(&want_dir);
            fs::create_dir_all(&want_dir).map_err(|e| e.to_string())?;
        }
        for file in &files {
            let got = fs::read(dir.join(file)).map_err(|e| e.to_string())?;
            if bless {
                fs::write(want_dir.join(file), &got).map_err(|e| e.to_string())?;
                continue;
            }
            let want = fs::read(want_dir.join(file)).map_err(|e| format!("{name}/{file}: {e}"))?;
            ensure(got == want, || {
                format!("{name}/{file} differs from the pinned bytes")
            })?;
            compared += 1;
        }
        if !bless {
            let pinned = fs::read_dir(&want_dir).map_err(|e| e.to_string())?.count();
            ensure(pinned == files.len(), || {
                format!("{name}: {pinned} pinned files, {} produced", files.len())
            })?;
        }
    }
    if bless {
        return Ok("golden files rewritten".into());
    }
    Ok(format!(
        "{} subcommand runs, {compared} files byte-identical",
        GOLDEN_RUNS.len()
    ))
}

fn report(id: usize, name: &str, outcome: &Outcome) {
    match outcome {
        Ok(detail) => println!("PASS [{id}] {name}: {detail}"),
        Err(why) => println!("FAIL [{id}] {name}: {why}"),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    match build_cases() {
        Ok((cases, t)) => {
            results.push((1, "oracle equivalence", oracle_equivalence(&cases, t)));
            results.push((
                2,
                "reduced PageRank consistency",
                pagerank_consistency(&cases),
            ));
            results.push((
                3,
                "decomposition identities",
                decomposition_identities(&cases),
            ));
            results.push((4, "projector identities", projector_identities(&cases)));
            results.push((
                5,
                "sensitivity correctness",
                sensitivity_correctness(&cases),
            ));
        }
        Err(e) => {
            for (id, name) in [
                (1, "oracle equivalence"),
                (2, "reduced PageRank consistency"),
                (3, "decomposition identities"),
                (4, "projector identities"),
                (5, "sensitivity correctness"),
            ] {
                results.push((
                    id,
                    name,
                    Err(format!("test graphs could not be reduced: {e}")),
                ));
            }
        }
    }
    results.push((6, "imbalance properties", imbalance_properties()));
    results.push((7, "friends and followers", friends_networks()));
    results.push((8, "performance", performance()));
    results.push((9, "golden run", golden_run()));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        report(*id, name, outcome);
        failed += outcome.is_err() as usize;
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
