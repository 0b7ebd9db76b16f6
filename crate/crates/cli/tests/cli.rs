use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use repack_core::driver::{Sample, SampleHeader, SampleSet};
use repack_core::instance::{
    validate_assignment, Affiliation, ChannelAssignment, ChannelUniverse, Instance, RepackProblem,
    Slot, Station,
};
use repack_core::sat::SolveStats;

fn repack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = repack(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generate an instance with a config file so every density can be set.
fn generate(dir: &Path, toml: &str) -> std::path::PathBuf {
    let cfg = dir.join("gen.toml");
    std::fs::write(&cfg, toml).unwrap();
    ok(&["gen", "--config", s(&cfg), "--out", s(dir)]);
    dir.join("instance")
}

#[test]
fn solve_trivial_fixture_writes_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "seed = 1\n[synthetic]\nstations = 4\nchannels = 6\nco_density = 0.0\ncross_dma_co_density = 0.0\nadj_density = 0.0\n");
    let out = dir.path().join("solve");
    let stdout = ok(&[
        "solve",
        "--instance",
        s(&inst),
        "--target",
        "6",
        "--repack-all",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("feasible (0 cleared)"), "{stdout}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve_6.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "feasible");
    assert_eq!(doc["assignment"].as_object().unwrap().len(), 4);
    assert_eq!(doc["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn min_clear_reports_certificate_on_planted_clique() {
    let dir = tempfile::tempdir().unwrap();
    // 6 stations, c = 3 after a 6 MHz target, one planted K4 and nothing else
    let inst_dir = generate(
        dir.path(),
        "seed = 2\n[synthetic]\nstations = 6\nchannels = 4\ndmas = 2\nco_density = 0.0\ncross_dma_co_density = 0.0\nadj_density = 0.0\n[[synthetic.planted]]\nsize = 4\n",
    );
    let out = dir.path().join("min");
    let stdout = ok(&[
        "min-clear",
        "--instance",
        s(&inst_dir),
        "--target",
        "6",
        "--out",
        s(&out),
    ]);
    assert!(
        stdout.contains("b*=1 (certificate: feasible@1, infeasible@0)"),
        "{stdout}"
    );
    let table = std::fs::read_to_string(out.join("min_clear.csv")).unwrap();
    assert!(table.starts_with("# config_digest: "));
    assert!(table.contains("\n6,1,true,infeasible,"), "{table}");

    // brute force: no assignment without a clearing exists
    let inst = repack_core::instance::load_instance(
        &inst_dir,
        repack_core::instance::InstanceFormat::CsvDir,
    )
    .unwrap();
    let p = RepackProblem::new(&inst, 6)
        .unwrap()
        .with_max_cleared(Some(0));
    let chans = [14u32, 15, 16];
    let n = inst.len();
    let feasible_at_zero = (0..3usize.pow(n as u32)).any(|code| {
        let slots = (0..n)
            .map(|i| Slot::Channel(chans[(code / 3usize.pow(i as u32)) % 3]))
            .collect();
        validate_assignment(&p, &ChannelAssignment::new(slots))
            .unwrap()
            .is_empty()
    });
    assert!(!feasible_at_zero);
}

fn tiny_instance() -> Instance {
    let stations = (0..8)
        .map(|i| Station {
            id: format!("K{i:03}"),
            dma: i % 2 + 1,
            affiliation: Affiliation::None,
            revenue: 0.0,
        })
        .collect();
    Instance::new(
        stations,
        ChannelUniverse::contiguous(14, 4, []),
        Vec::new(),
        Vec::new(),
        BTreeMap::from([(1, "North".into()), (2, "South".into())]),
    )
    .unwrap()
}

#[test]
fn stats_reproduces_missing_mass_row() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance();
    let inst_path = dir.path().join("inst.json");
    std::fs::write(&inst_path, inst.to_canonical_json()).unwrap();

    // 117 assignments seen once and 61 seen three times: 300 draws
    let slot = |d: usize| {
        if d == 3 {
            Slot::Cleared
        } else {
            Slot::Channel(14 + d as u32)
        }
    };
    let assignment =
        |code: usize| ChannelAssignment::new((0..8).map(|i| slot((code >> (2 * i)) & 3)).collect());
    let codes: Vec<usize> = (0..117).chain((117..178).flat_map(|c| [c, c, c])).collect();
    let set = SampleSet {
        header: SampleHeader {
            instance_digest: inst.digest(),
            target_mhz: 6,
            use_domain: true,
            minimum: 0,
            buffer: 0,
            cap: 0,
            master_seed: 0,
        },
        samples: codes
            .iter()
            .enumerate()
            .map(|(index, &c)| Sample {
                index,
                seed: index as u64,
                stats: SolveStats::default(),
                assignment: assignment(c),
            })
            .collect(),
    };
    let samples = dir.path().join("samples.jsonl");
    set.write_jsonl(&inst, std::fs::File::create(&samples).unwrap())
        .unwrap();

    let out = dir.path().join("stats");
    let stdout = ok(&[
        "stats",
        "--instance",
        s(&inst_path),
        "--samples",
        s(&samples),
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("missing mass 39.0%"), "{stdout}");
    let table = std::fs::read_to_string(out.join("missing_mass.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        [
            "buffer,draws,unique_solutions,singletons,missing_mass_pct",
            "0,300,178,117,39.0"
        ]
    );
    for name in [
        "dma_stats_samples.csv",
        "diversity_samples.csv",
        "frequencies_samples.csv",
        "dma_count.csv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn external_backend_matches_embedded() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(
        dir.path(),
        "seed = 5\n[synthetic]\nstations = 16\nchannels = 6\nco_density = 0.6\n",
    );
    let external = format!("{} sat", env!("CARGO_BIN_EXE_repack"));
    let run = |backend: &str| {
        let out = dir.path().join(backend);
        let o = Command::new(env!("CARGO_BIN_EXE_repack"))
            .args([
                "min-clear",
                "--instance",
                s(&inst),
                "--target",
                "6",
                "--target",
                "12",
            ])
            .args(["--backend", backend, "--out", s(&out)])
            .env("REPACK_EXTERNAL_SOLVER", &external)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(run("embedded"), run("external"));
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let o = repack(&["solve", "--instance", "/does/not/exist", "--target", "84"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let dir = tempfile::tempdir().unwrap();
    let o = repack(&["solve", "--target", "84", "--out", s(dir.path())]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("instance"));

    let o = repack(&["solve", "--target", "80"]);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let o = repack(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

fn strip_times(text: &str) -> String {
    let mut out = String::new();
    for l in text.lines() {
        let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
        strip(&mut v);
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

fn strip(v: &mut serde_json::Value) {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_time_ms");
        obj.values_mut().for_each(strip);
    }
}

#[test]
fn runs_are_reproducible_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(
        dir.path(),
        "seed = 9\n[synthetic]\nstations = 20\nchannels = 6\nco_density = 0.7\n",
    );
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "instance = {:?}\ntargets = [6]\ntrials = 30\nsamples = 6\nbuffers = [0, 2]\nseed = 4\ntrial_backend = \"clique-then-sat\"\n[[models]]\nkind = \"random_affiliates\"\nalpha = 0.5\n",
            s(&inst)
        ),
    )
    .unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        args[0] = "sample";
        ok(&args);
        out
    };
    let a = run("a", &[]);
    let b = run("b", &["--workers", "2"]);
    for f in ["summary.csv", "cliques.jsonl"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    for f in ["trials.jsonl", "samples_6_b0.jsonl", "samples_6_b2.jsonl"] {
        let x = strip_times(&std::fs::read_to_string(a.join(f)).unwrap());
        let y = strip_times(&std::fs::read_to_string(b.join(f)).unwrap());
        assert_eq!(x, y, "{f}");
    }

    let c = run("c", &["--seed", "5"]);
    let digest = |p: &Path| {
        std::fs::read_to_string(p.join("summary.csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));

    // stored trials and samples feed the stats tables
    let stats = dir.path().join("stats");
    let trials = a.join("trials.jsonl");
    let s0 = a.join("samples_6_b0.jsonl");
    let s2 = a.join("samples_6_b2.jsonl");
    ok(&[
        "stats",
        "--config",
        s(&cfg),
        "--trials",
        s(&trials),
        "--samples",
        s(&s0),
        "--samples",
        s(&s2),
        "--out",
        s(&stats),
    ]);
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let resummarized = std::fs::read_to_string(stats.join("trial_summary.csv")).unwrap();
    assert_eq!(
        summary.lines().skip(1).collect::<Vec<_>>(),
        resummarized.lines().skip(1).collect::<Vec<_>>()
    );
    assert!(stats
        .join("delta_samples_6_b0_vs_samples_6_b2.csv")
        .exists());
}

#[test]
fn encode_writes_dimacs_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(
        dir.path(),
        "seed = 3\n[synthetic]\nstations = 6\nchannels = 5\n",
    );
    let out = dir.path().join("enc");
    ok(&[
        "encode",
        "--instance",
        s(&inst),
        "--target",
        "12",
        "--out",
        s(&out),
    ]);
    let cnf = std::fs::read_to_string(out.join("formula_12.cnf")).unwrap();
    assert!(cnf.starts_with("c config_digest: "));
    let parsed = repack_core::cnf::parse_dimacs(&cnf).unwrap();
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("formula_12.varmap.json")).unwrap())
            .unwrap();
    assert_eq!(
        side["variables"].as_array().unwrap().len(),
        parsed.var_count() as usize
    );

    let sat = repack(&["sat", s(&out.join("formula_12.cnf"))]);
    assert!(matches!(sat.status.code(), Some(10) | Some(20)));
}
