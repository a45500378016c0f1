//! End-to-end tests driving the compiled `kbi` binary.

use std::path::Path;
use std::process::{Command, Output};

fn kbi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbi"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KBI_THREADS")
        .output()
        .expect("failed to spawn kbi")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is not JSON")
}

/// Tiny dataset + short run so the whole pipeline stays fast.
fn gen_args<'a>(out: &'a str) -> Vec<&'a str> {
    vec![
        "gen", "--regime", "latent-type", "--out", out, "--seed", "7", "--train", "300",
        "--valid", "30", "--test", "40", "--entities", "40",
    ]
}

const TRAIN_FAST: &[&str] = &[
    "--dim", "8", "--epochs", "4", "--eval-every", "2", "--neg", "10", "--batch-size", "128",
    "--seed", "3",
];

#[test]
fn gen_stats_train_eval_baseline_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let stats = stdout_json(&kbi(&gen_args("ds"), dir));
    assert_eq!(stats["entities"], 40);
    assert_eq!(stats["pair_oov_rate"], 1.0);

    let stats2 = stdout_json(&kbi(&["stats", "--dataset", "ds"], dir));
    assert_eq!(stats, stats2, "gen prints the same stats as `kbi stats`");

    let mut args = vec!["train", "--dataset", "ds", "--out", "ckpt", "--model", "distmult"];
    args.extend_from_slice(TRAIN_FAST);
    let summary = stdout_json(&kbi(&args, dir));
    assert_eq!(summary["model"], "distmult");
    assert_eq!(summary["diverged"], false);
    assert!(dir.join("ckpt/manifest.json").exists());
    assert!(dir.join("ckpt/train_log.jsonl").exists());
    assert!(
        !dir.join("ckpt.partial").exists(),
        "temporary checkpoint directory must not be left behind"
    );

    for protocol in ["kbi", "standard"] {
        let report = stdout_json(&kbi(
            &[
                "eval", "--dataset", "ds", "--checkpoint", "ckpt", "--protocol", protocol,
                "--out", "report.json", "--per-query", "pq.tsv",
            ],
            dir,
        ));
        assert_eq!(report["protocol"], protocol);
        assert_eq!(report["n_queries"], 40);
        assert_eq!(report["filtered"], true);
        let on_disk: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report, on_disk);
        let tsv = std::fs::read_to_string(dir.join("pq.tsv")).unwrap();
        assert!(tsv.starts_with("e1\trelation\te2\tgold_oov\t"));
        assert_eq!(tsv.lines().count(), 41, "header plus one line per query");
    }

    let base = stdout_json(&kbi(&["baseline", "--dataset", "ds", "--baseline", "mfreq-rel"], dir));
    assert_eq!(base["model"], "mfreq-rel");
    assert_eq!(base["protocol"], "kbi");
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    kbi(&gen_args("ds"), dir);

    let mut outputs = Vec::new();
    for ck in ["a", "b"] {
        let mut args = vec!["train", "--dataset", "ds", "--out", ck, "--model", "e+f-as"];
        args.extend_from_slice(TRAIN_FAST);
        let out = kbi(&args, dir);
        let mut summary = stdout_json(&out);
        summary.as_object_mut().unwrap().remove("checkpoint"); // path differs by design
        let eval = kbi(&["eval", "--dataset", "ds", "--checkpoint", ck], dir);
        assert!(eval.status.success());
        outputs.push((
            summary,
            std::fs::read(dir.join(ck).join("manifest.json")).unwrap(),
            std::fs::read(dir.join(ck).join("e/entity.tsv")).unwrap(),
            std::fs::read(dir.join(ck).join("f/pair.tsv")).unwrap(),
            std::fs::read(dir.join(ck).join("train_log.jsonl")).unwrap(),
            eval.stdout,
        ));
    }
    assert_eq!(
        outputs[0].0, outputs[1].0,
        "train summary must be reproducible"
    );
    assert_eq!(outputs[0].1, outputs[1].1);
    assert_eq!(outputs[0].2, outputs[1].2, "entity embeddings differ across runs");
    assert_eq!(outputs[0].3, outputs[1].3, "pair embeddings differ across runs");
    assert_eq!(outputs[0].4, outputs[1].4);
    assert_eq!(outputs[0].5, outputs[1].5, "evaluation must be reproducible");
}

#[test]
fn thread_cap_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    kbi(&gen_args("ds"), dir);
    let mut args = vec!["train", "--dataset", "ds", "--out", "ck", "--model", "distmult"];
    args.extend_from_slice(TRAIN_FAST);
    kbi(&args, dir);

    let wide = kbi(&["eval", "--dataset", "ds", "--checkpoint", "ck"], dir);
    let narrow = Command::new(env!("CARGO_BIN_EXE_kbi"))
        .args(["eval", "--dataset", "ds", "--checkpoint", "ck"])
        .current_dir(dir)
        .env("KBI_THREADS", "1")
        .output()
        .unwrap();
    assert!(narrow.status.success());
    assert_eq!(wide.stdout, narrow.stdout);
}

#[test]
fn exit_codes_distinguish_config_data_and_divergence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    kbi(&gen_args("ds"), dir);

    let code = |out: &Output| out.status.code().unwrap();

    assert_eq!(code(&kbi(&["--help"], dir)), 0);
    assert_eq!(code(&kbi(&["--version"], dir)), 0);

    // Configuration problems: exit 1.
    assert_eq!(code(&kbi(&["train", "--dataset", "ds", "--out", "x"], dir)), 1, "missing --model");
    assert_eq!(
        code(&kbi(&["train", "--dataset", "ds", "--out", "x", "--model", "nope"], dir)),
        1
    );
    assert_eq!(
        code(&kbi(&["eval", "--dataset", "ds", "--checkpoint", "x", "--protocol", "bogus"], dir)),
        1
    );
    assert_eq!(code(&kbi(&["--not-a-flag"], dir)), 1);
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_kbi"))
        .args(["stats", "--dataset", "ds"])
        .current_dir(dir)
        .env("KBI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code().unwrap(), 1);

    // Data problems: exit 2.
    assert_eq!(code(&kbi(&["stats", "--dataset", "no-such-dir"], dir)), 2);
    assert_eq!(
        code(&kbi(&["eval", "--dataset", "ds", "--checkpoint", "no-such-ckpt"], dir)),
        2
    );

    // Divergence: exit 3, but the last good checkpoint is still written.
    let out = kbi(
        &[
            "train", "--dataset", "ds", "--out", "dv", "--model", "distmult", "--dim", "8",
            "--epochs", "2", "--eval-every", "1", "--neg", "5", "--batch-size", "64",
            "--lr", "1e200",
        ],
        dir,
    );
    assert_eq!(code(&out), 3);
    assert!(dir.join("dv/manifest.json").exists());
    assert!(!dir.join("dv.partial").exists());
    let eval = kbi(&["eval", "--dataset", "ds", "--checkpoint", "dv"], dir);
    assert!(eval.status.success(), "retained checkpoint must still evaluate");
}

#[test]
fn checkpoint_refuses_a_different_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    kbi(&gen_args("ds"), dir);
    let mut other = gen_args("other");
    other[6] = "8"; // different seed => different vocabulary
    kbi(&other, dir);

    let mut args = vec!["train", "--dataset", "ds", "--out", "ck", "--model", "e"];
    args.extend_from_slice(TRAIN_FAST);
    assert!(kbi(&args, dir).status.success());

    let out = kbi(&["eval", "--dataset", "other", "--checkpoint", "ck"], dir);
    assert_eq!(out.status.code().unwrap(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn config_file_sets_defaults_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    kbi(&gen_args("ds"), dir);
    std::fs::write(
        dir.join("train.cfg"),
        "# defaults for small experiments\nmodel = distmult\ndim = 6\nepochs = 2\n\
         eval-every = 1\nneg = 5\nbatch-size = 64\nseed = 9\n",
    )
    .unwrap();

    // Everything from the file.
    let out = kbi(
        &["train", "--dataset", "ds", "--out", "a", "--config", "train.cfg"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["model"], "distmult");
    assert_eq!(manifest["dim"], 6);

    // An explicit flag wins over the file.
    let out = kbi(
        &["train", "--dataset", "ds", "--out", "b", "--config", "train.cfg", "--dim", "4"],
        dir,
    );
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("b/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["dim"], 4);

    // Unknown keys are rejected, not ignored.
    std::fs::write(dir.join("bad.cfg"), "model = e\nlearning_rate = 0.5\n").unwrap();
    let out = kbi(
        &["train", "--dataset", "ds", "--out", "c", "--config", "bad.cfg"],
        dir,
    );
    assert_eq!(out.status.code().unwrap(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown option"));
}
