//! End-to-end checks of the experiment runner, the plotter and the CLI.

use std::path::{Path, PathBuf};
use std::process::Command;

use freerider::experiment::{plot, run, ExperimentSpec, RunManifest, RunStatus, MANIFEST_FILE};
use freerider::Error;

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn self_play_spec(dir: &Path, out: &str) -> PathBuf {
    write(
        dir,
        &format!("{out}.toml"),
        &format!(
            "kind = \"self_play\"\nseeds = [0, 1, 2, 3, 4]\noutput_dir = \"{}\"\n\n[train]\ntotal_updates = 200\n",
            dir.join(out).display()
        ),
    )
}

#[test]
fn bundled_specs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(specs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentSpec::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert_eq!(n, 10, "one bundled spec per experiment kind");
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.toml",
        "kind = \"self_play\"\nseeds = [0]\nlearning_rate = 0.1\n",
    );
    let err = ExperimentSpec::from_file(&p).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }), "{err:?}");
    assert!(err.to_string().contains("learning_rate"), "{err}");

    // a key that exists but means nothing for this kind
    let p = write(
        dir.path(),
        "unused.toml",
        "kind = \"self_play\"\nseeds = [0]\nopponent = \"all_c\"\n",
    );
    let err = ExperimentSpec::from_file(&p).unwrap_err().to_string();
    assert!(err.contains("opponent"), "{err}");
}

#[test]
fn five_seed_run_writes_curves_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = self_play_spec(dir.path(), "a");
    let manifest = run(&spec).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete);
    assert_eq!(manifest.seeds.len(), 5);
    let run_dir = dir.path().join("a");
    for s in 0..5 {
        assert!(run_dir.join(format!("curves_seed{s}.csv")).is_file());
    }
    assert!(run_dir.join("summary.json").is_file());
    for out in manifest.all_outputs() {
        assert!(out.is_file(), "manifest lists missing {}", out.display());
    }
    let on_disk = RunManifest::read(&run_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(on_disk.spec_hash, manifest.spec_hash);
    assert_eq!(on_disk.seeds, manifest.seeds);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run(&self_play_spec(dir.path(), "a")).unwrap();
    run(&self_play_spec(dir.path(), "b")).unwrap();
    for s in 0..5 {
        let name = format!("curves_seed{s}.csv");
        let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let sa = std::fs::read(dir.path().join("a/summary.json")).unwrap();
    let sb = std::fs::read(dir.path().join("b/summary.json")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn spec_hash_ignores_key_order_and_output_location() {
    let a = "kind = \"audit_exact\"\np1 = \"all_c\"\np2 = \"tit_for_tat\"\ngamma = 0.9\n";
    let b = "gamma = 0.9\np2 = \"tit_for_tat\"\noutput_dir = \"elsewhere\"\nkind = \"audit_exact\"\np1 = \"all_c\"\n";
    let c = "kind = \"audit_exact\"\np1 = \"all_c\"\np2 = \"tit_for_tat\"\ngamma = 0.91\n";
    let h = |t: &str| {
        ExperimentSpec::from_toml_str(t, Path::new("x.toml"))
            .unwrap()
            .hash()
            .unwrap()
    };
    assert_eq!(h(a), h(b));
    assert_ne!(h(a), h(c));
    assert_eq!(h(a).len(), 64);
}

#[test]
fn plot_rejects_empty_and_mismatched_csv() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let err = plot(&[empty], &dir.path().join("o.svg")).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }), "{err:?}");
    assert!(err.to_string().contains("empty"), "{err}");

    let wrong = write(
        dir.path(),
        "wrong.csv",
        "update,seed,stage,slot,p_defect_start,p_cc\n1,0,0,1,0.5,0.5\n",
    );
    let err = plot(&[wrong], &dir.path().join("o.svg")).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }), "{err:?}");
    assert!(
        err.to_string().contains("column 6 is `p_cc`, expected `p_defect_cc`"),
        "{err}"
    );
    assert!(!dir.path().join("o.svg").exists());
}

#[test]
fn two_curve_files_give_two_panels() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "tft.toml",
        &format!(
            "kind = \"train_vs_fixed\"\nseeds = [3]\nopponent = \"tit_for_tat\"\noutput_dir = \"{}\"\n\n[train]\ntotal_updates = 100\n",
            dir.path().join("tft").display()
        ),
    );
    run(&spec).unwrap();
    let csv = dir.path().join("tft/curve_seed3.csv");
    let copy = dir.path().join("again.csv");
    std::fs::copy(&csv, &copy).unwrap();
    let out = plot(&[csv, copy], &dir.path().join("p.svg")).unwrap();
    let svg = std::fs::read_to_string(out).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<!-- panel ").count(), 2);
}

#[test]
fn cli_subcommands() {
    let exe = env!("CARGO_BIN_EXE_freerider");
    let dir = tempfile::tempdir().unwrap();

    let out = Command::new(exe)
        .args([
            "audit",
            "--p1",
            "all_c",
            "--p2",
            "all_c",
            "--gamma",
            "0.96",
            "--epsilon",
            "1e-6",
            "--json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["is_epsilon_nash"], false);
    assert!((report["max_gap"].as_f64().unwrap() - 25.0).abs() < 1e-6);

    let out = Command::new(exe)
        .args(["backward-induction", "--steps", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("defect"));

    // output root comes from the environment when the spec has no output_dir
    let spec = write(
        dir.path(),
        "bi.toml",
        "kind = \"backward_induction\"\nname = \"bi\"\nsteps = [3]\n",
    );
    let out = Command::new(exe)
        .args(["run", spec.to_str().unwrap()])
        .env("FREERIDER_OUTPUT_ROOT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("root/bi/backward_induction.json").is_file());
    assert!(dir.path().join("root/bi").join(MANIFEST_FILE).is_file());

    let out = Command::new(exe)
        .args(["replicate", "commons_table1_direction", "--output-dir"])
        .arg(dir.path().join("rep"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("rep/commons_table1_direction/indices.csv").is_file());

    let bad = write(dir.path(), "bad.toml", "kind = \"self_play\"\nseeds = [0]\nbogus = 1\n");
    let out = Command::new(exe).args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let out = Command::new(exe).args(["replicate", "figure9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
