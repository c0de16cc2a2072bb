//! End-to-end tests driving the `netsemantic` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_netsemantic")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn simulate_congestion(dir: &Path) -> PathBuf {
    let ds = dir.join("ds");
    let out = run(&[
        "simulate",
        "--topology",
        "star",
        "--nodes",
        "9",
        "--type",
        "uav",
        "--fault",
        "congestion:d1:4000-8000",
        "--seed",
        "7",
        "--out",
        ds.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    ds
}

fn read_dir_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulate_writes_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let dataset = netsemantic_core::datamodel::load_dataset(&ds).unwrap();
    assert_eq!(dataset.profiles.len(), 9);
    assert_eq!(dataset.labels.len(), 1);
    assert_eq!(dataset.topology.degree("d0"), 8);
}

#[test]
fn simulate_missing_out_is_usage_error() {
    let out = run(&["simulate", "--topology", "star"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = run(&[
            "simulate",
            "--topology",
            "ring",
            "--nodes",
            "10",
            "--type",
            "cellular",
            "--fault",
            "node_crash:d4:2000-6000",
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(read_dir_files(&a), read_dir_files(&b));
}

#[test]
fn diagnose_congestion_fixture_reports_congestion() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let run_dir = dir.path().join("run");
    let out = run(&[
        "diagnose",
        "--dataset",
        ds.to_str().unwrap(),
        "--provider",
        "mock",
        "--seed",
        "7",
        "--window",
        "4000-8000",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["fault_type"], "Network Congestion");
    for field in ["phenomenon", "explanation", "summary"] {
        assert!(!report[field].as_str().unwrap().is_empty(), "empty {field}");
    }
    assert!(!report["solutions"].as_array().unwrap().is_empty());
    assert!(run_dir.join("report.txt").is_file());
    assert!(run_dir.join("findings.json").is_file());
    assert!(run_dir.join("context.txt").is_file());
}

#[test]
fn diagnose_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    for out_dir in [&run1, &run2] {
        let out = run(&[
            "diagnose",
            "--dataset",
            ds.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["report.json", "report.txt", "context.txt", "findings.json", "audit.json"] {
        let a = fs::read(run1.join(name)).unwrap();
        let b = fs::read(run2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn diagnose_no_kg_omits_knowledge_and_skips_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let run_dir = dir.path().join("run");
    let out = run(&[
        "diagnose",
        "--dataset",
        ds.to_str().unwrap(),
        "--no-kg",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let context = fs::read_to_string(run_dir.join("context.txt")).unwrap();
    assert!(context.contains("KNOWLEDGE\n[omitted]"), "{context}");
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["retrieval_calls"], 0);
}

#[test]
fn diagnose_no_symbolic_records_zero_findings() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let run_dir = dir.path().join("run");
    let out = run(&[
        "diagnose",
        "--dataset",
        ds.to_str().unwrap(),
        "--no-symbolic",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let findings: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("findings.json")).unwrap()).unwrap();
    assert_eq!(findings.as_array().unwrap().len(), 0);
    let context = fs::read_to_string(run_dir.join("context.txt")).unwrap();
    assert!(context.contains("SYMBOLIC\n[omitted]"), "{context}");
}

#[test]
fn diagnose_unreachable_remote_provider_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let out = Command::new(bin())
        .args([
            "diagnose",
            "--dataset",
            ds.to_str().unwrap(),
            "--provider",
            "remote",
            "--out",
            dir.path().join("run").to_str().unwrap(),
        ])
        .env("NETSEM_LLM_ENDPOINT", "http://127.0.0.1:1/v1/chat")
        .env("NETSEM_LLM_MODEL", "test-model")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    // No partial outputs on failure.
    assert!(!dir.path().join("run").join("report.json").exists());
}

#[test]
fn diagnose_nonexistent_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "diagnose",
        "--dataset",
        dir.path().join("missing").to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kg_build_empty_file_gives_valid_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let triples = dir.path().join("triples.tsv");
    fs::write(&triples, "").unwrap();
    let graph_path = dir.path().join("graph.nkg");
    let out = run(&[
        "kg",
        "build",
        "--triples",
        triples.to_str().unwrap(),
        "--out",
        graph_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let g = netsemantic_core::nkg::load_graph(&graph_path).unwrap();
    assert!(g.is_empty());
}

#[test]
fn kg_query_matches_library_retrieval() {
    let dir = tempfile::tempdir().unwrap();
    let triples = dir.path().join("triples.tsv");
    fs::write(
        &triples,
        "E\tdelay_ms\tdelay_ms\tmetric\t0\n\
         E\tnetwork_congestion\tNetwork Congestion\tfault_type\t0\n\
         E\trssi_dbm\trssi_dbm\tmetric\t0\n\
         R\tdelay_ms\tindicates\tnetwork_congestion\n\
         F\tdelay_ms\tthreshold\twithin[0,100]\t0\n",
    )
    .unwrap();
    let graph_path = dir.path().join("graph.nkg");
    assert!(run(&[
        "kg",
        "build",
        "--triples",
        triples.to_str().unwrap(),
        "--out",
        graph_path.to_str().unwrap(),
    ])
    .status
    .success());

    let out = run(&[
        "kg",
        "query",
        "--graph",
        graph_path.to_str().unwrap(),
        "--query",
        "delay",
        "--top-k",
        "2",
        "--hops",
        "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);

    // The printed candidates must agree with a direct library call.
    let embedder = netsemantic_core::semgen::HashEmbedder::default();
    let mut g = netsemantic_core::nkg::load_graph(&graph_path).unwrap();
    netsemantic_core::nkg::index_entities(&mut g, &embedder).unwrap();
    let result = netsemantic_core::nkg::retrieve(&g, &embedder, "delay", 2, 1).unwrap();
    for (id, score) in &result.candidates {
        assert!(
            text.contains(&format!("{id} {score:.4}")),
            "missing candidate {id} in output:\n{text}"
        );
    }
    for line in result.subgraph.render_snippets() {
        assert!(text.contains(&line), "missing subgraph line {line:?}");
    }
}

#[test]
fn kg_update_reports_applied_and_stale() {
    let dir = tempfile::tempdir().unwrap();
    let triples = dir.path().join("triples.tsv");
    fs::write(&triples, "F\td1\tstate\tok\t100\n").unwrap();
    let graph_path = dir.path().join("graph.nkg");
    assert!(run(&[
        "kg",
        "build",
        "--triples",
        triples.to_str().unwrap(),
        "--out",
        graph_path.to_str().unwrap(),
    ])
    .status
    .success());

    let observations = dir.path().join("obs.tsv");
    fs::write(
        &observations,
        "F\td1\tstate\tstale-value\t50\nF\td1\tstate\tolder\t10\n",
    )
    .unwrap();
    let out = run(&[
        "kg",
        "update",
        "--graph",
        graph_path.to_str().unwrap(),
        "--observations",
        observations.to_str().unwrap(),
        "--out",
        dir.path().join("graph2.nkg").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("0 applied, 2 stale"), "{}", stdout(&out));
}

#[test]
fn eval_closed_form_prints_expected_metrics() {
    let dir = tempfile::tempdir().unwrap();
    // tp=8, fn=2, fp=1, tn=9 over 20 samples.
    let mut predictions = String::new();
    let mut labels = String::new();
    for i in 0..20 {
        let truth = i < 10;
        let predicted = if i < 8 {
            true // tp
        } else if i < 10 {
            false // fn
        } else {
            i == 10 // one fp, rest tn
        };
        predictions.push_str(&format!("s{i:02},{}\n", predicted as u8));
        labels.push_str(&format!("s{i:02},{}\n", truth as u8));
    }
    let p = dir.path().join("pred.csv");
    let l = dir.path().join("labels.csv");
    fs::write(&p, predictions).unwrap();
    fs::write(&l, labels).unwrap();
    let out = run(&[
        "eval",
        "--predictions",
        p.to_str().unwrap(),
        "--labels",
        l.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out).trim(),
        "acc=0.8500 recall=0.8000 fnr=0.2000 fpr=0.1000"
    );
}

#[test]
fn eval_all_correct_prints_ones() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = String::new();
    for i in 0..10 {
        file.push_str(&format!("s{i},{}\n", (i < 5) as u8));
    }
    let p = dir.path().join("pred.csv");
    let l = dir.path().join("labels.csv");
    fs::write(&p, &file).unwrap();
    fs::write(&l, &file).unwrap();
    let out = run(&[
        "eval",
        "--predictions",
        p.to_str().unwrap(),
        "--labels",
        l.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("acc=1.0000"), "{}", stdout(&out));
}

#[test]
fn eval_ablation_emits_one_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let rows_path = dir.path().join("rows.csv");
    let out = run(&[
        "eval",
        "--dataset",
        ds.to_str().unwrap(),
        "--ablation",
        "full,no_kg,no_symbolic",
        "--out",
        rows_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(&rows_path).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines.len(), 4, "{rows}"); // header + 3 variants
    assert!(lines[1].starts_with("full,"));
    assert!(lines[2].starts_with("no_kg,"));
    assert!(lines[3].starts_with("no_symbolic,"));
}

#[test]
fn semanticize_writes_samples_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let out_dir = dir.path().join("sem");
    let out = run(&[
        "semanticize",
        "--dataset",
        ds.to_str().unwrap(),
        "--samples",
        "3",
        "--window",
        "4000-8000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["table.txt", "prompt.txt", "sample_0.txt", "sample_2.txt", "selected.txt", "scores.csv"] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }
    let prompt = fs::read_to_string(out_dir.join("prompt.txt")).unwrap();
    assert!(prompt.contains("INSTRUCTIONS"));
    assert!(prompt.contains("CONSTRAINT"));
}

#[test]
fn symbolize_writes_facts_rules_findings() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let out_dir = dir.path().join("sym");
    let out = run(&[
        "symbolize",
        "--dataset",
        ds.to_str().unwrap(),
        "--window",
        "4000-8000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let facts = fs::read_to_string(out_dir.join("facts.txt")).unwrap();
    assert!(facts.contains("connected(d0,d1)"), "{facts}");
    let findings: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("findings.json")).unwrap()).unwrap();
    let entities: Vec<&str> = findings
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["entity"].as_str().unwrap())
        .collect();
    assert!(entities.contains(&"d1"), "{entities:?}");
    assert!(entities.iter().all(|e| *e == "d1"), "{entities:?}");
}

#[test]
fn diagnose_update_kg_writes_updated_graph() {
    let dir = tempfile::tempdir().unwrap();
    let ds = simulate_congestion(dir.path());
    let updated = dir.path().join("after.nkg");
    let out = run(&[
        "diagnose",
        "--dataset",
        ds.to_str().unwrap(),
        "--window",
        "4000-8000",
        "--update-kg",
        updated.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let g = netsemantic_core::nkg::load_graph(&updated).unwrap();
    // The dataset's devices were absorbed as entities.
    assert!(g.entity("d1").is_some());
    assert!(g.fact("d1", "delay_ms").is_some());
}
