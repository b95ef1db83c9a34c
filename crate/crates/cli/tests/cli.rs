use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = strata(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path, seed: &str) {
    let cfg = dir.join("synth.json");
    fs::write(
        &cfg,
        r#"{"n_pages": 12, "n_queries": 12, "dim": 8, "tokens_per_level": [2, 4, 6]}"#,
    )
    .unwrap();
    ok(&[
        "synth",
        "--config",
        p(&cfg),
        "--out",
        p(&dir.join("s")),
        "--seed",
        seed,
    ]);
}

#[test]
fn eval_rank_three_case() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.tsv");
    let qrels = dir.path().join("qrels.tsv");
    fs::write(
        &run,
        "q1\ta\t1\t0.9\nq1\tb\t2\t0.8\nq1\tc\t3\t0.7\nq1\td\t4\t0.6\n",
    )
    .unwrap();
    fs::write(&qrels, "q1\tc\t1\n").unwrap();
    let out = ok(&["eval", "--run", p(&run), "--qrels", p(&qrels), "--k", "5"]);
    assert_eq!(out.lines().next(), Some("mean_ndcg@5 0.500000"));
}

#[test]
fn sweep_emits_eight_rows() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "1");
    let s = dir.path().join("s");
    let out = ok(&[
        "sweep",
        "--embeddings",
        p(&s.join("embeddings")),
        "--queries",
        p(&s.join("queries")),
        "--qrels",
        p(&s.join("qrels.tsv")),
        "--budgets",
        "64,128,256,512,768,1024,1280,1536",
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "budget,mean_ndcg,queries_evaluated");
    assert_eq!(lines.len(), 9);
    assert!(lines[8].starts_with("1536,"));
}

#[test]
fn search_on_empty_index_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "2");
    let s = dir.path().join("s");
    let empty = dir.path().join("empty_images");
    fs::create_dir(&empty).unwrap();
    let idx = dir.path().join("idx");
    ok(&[
        "encode",
        "--images",
        p(&empty),
        "--toy-dim",
        "8",
        "--out",
        p(&idx),
    ]);
    let out = strata(&[
        "search",
        "--index",
        p(&idx),
        "--queries",
        p(&s.join("queries")),
        "--k",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyCorpus"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(strata(&["eval", "--run", "x"]).status.code(), Some(1));
    assert_eq!(strata(&["search", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        strata(&["index", "--embeddings", "e", "--budget", "0", "--out", "o"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        strata(&["tile", "--image", "i", "--grids", "2x2,1x1", "--out", "o"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(strata(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = strata(&[
        "eval",
        "--run",
        p(&dir.path().join("nope.tsv")),
        "--qrels",
        "q.tsv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    small_synth(dir, "5");
    let s = dir.join("s");
    let idx = dir.join("idx");
    let run = dir.join("run.tsv");
    let mut outputs = vec![
        (
            "index".to_string(),
            ok(&[
                "index",
                "--embeddings",
                p(&s.join("embeddings")),
                "--budget",
                "5",
                "--out",
                p(&idx),
            ])
            .into_bytes(),
        ),
        (
            "search".to_string(),
            ok(&[
                "search",
                "--index",
                p(&idx),
                "--queries",
                p(&s.join("queries")),
                "--out",
                p(&run),
            ])
            .into_bytes(),
        ),
    ];
    outputs.push((
        "eval".into(),
        ok(&["eval", "--run", p(&run), "--qrels", p(&s.join("qrels.tsv"))]).into_bytes(),
    ));
    outputs.push((
        "contrib".into(),
        ok(&[
            "contrib",
            "--embeddings",
            p(&s.join("embeddings")),
            "--queries",
            p(&s.join("queries")),
            "--qrels",
            p(&s.join("qrels.tsv")),
            "--sample",
            "5",
            "--seed",
            "3",
        ])
        .into_bytes(),
    ));
    let mut files = vec![
        s.join("qrels.tsv"),
        run.clone(),
        idx.join("manifest.json"),
        idx.join("docs/p0003.mvtx"),
        s.join("embeddings/docs/p0000.mvtx"),
        s.join("queries/q0007.mvtx"),
        s.join("images/legend/legend003.ppm"),
    ];
    files.sort();
    for f in files {
        let name = f.strip_prefix(dir).unwrap().display().to_string();
        outputs.push((name, fs::read(&f).unwrap()));
    }
    outputs
}

#[test]
fn identical_flags_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "6");
    let s = dir.path().join("s");
    let args = |t: &'static str| {
        ok(&[
            "--threads",
            t,
            "search",
            "--index",
            p(&s.join("embeddings")),
            "--queries",
            p(&s.join("queries")),
            "--k",
            "12",
        ])
    };
    assert_eq!(args("1"), args("3"));
}

#[test]
fn tile_writes_every_region() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "7");
    let image = dir.path().join("s/images/quadrant/quad000.ppm");
    let out = ok(&[
        "tile",
        "--image",
        p(&image),
        "--target",
        "16x16",
        "--out",
        p(&dir.path().join("t")),
    ]);
    assert_eq!(out, "levels 4\nregions 13\n");
    assert!(dir.path().join("t/level4_2x3/region05.ppm").exists());
}

#[test]
fn ingest_builds_nested_pages() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path(), "8");
    // Re-use two query matrices as the per-level files of one page.
    let page = dir.path().join("ingest/pageA");
    fs::create_dir_all(&page).unwrap();
    let q = dir.path().join("s/queries");
    fs::copy(q.join("q0000.mvtx"), page.join("0_coarse.mvtx")).unwrap();
    fs::copy(q.join("q0001.mvtx"), page.join("1_fine.mvtx")).unwrap();
    let out = ok(&[
        "encode",
        "--ingest",
        p(&dir.path().join("ingest")),
        "--grids",
        "1x1,1x2",
        "--out",
        p(&dir.path().join("emb")),
    ]);
    assert!(out.starts_with("pages 1\ndim 8\n"), "{out}");
}

#[test]
fn train_toy_and_gradcheck_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.json");
    fs::write(&cfg, r#"{"steps": 20, "pages": 48}"#).unwrap();
    let head = dir.path().join("head.mvtx");
    let out = ok(&[
        "train-toy",
        "--config",
        p(&cfg),
        "--out",
        p(&head),
        "--seed",
        "4",
    ]);
    assert!(out.starts_with("steps 20\ninitial_loss "), "{out}");
    assert!(head.exists());
    let out = ok(&["gradcheck", "--seed", "0", "--configs", "2"]);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn oracle_combines_tables() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("coarse.csv");
    let b = dir.path().join("fine.csv");
    fs::write(&a, "query_id,ndcg\nq1,1.0\nq2,0.0\n").unwrap();
    fs::write(&b, "q1,0.5\nq2,0.5\n").unwrap();
    let tables = format!("{},{}", p(&a), p(&b));
    let out = ok(&["oracle", "--tables", &tables]);
    assert!(out.contains("combined_mean 0.750000\n"), "{out}");
    assert!(out.contains("relative_gain 0.500000\n"), "{out}");
}
