use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{ensure, Context, Result};
use rayon::prelude::*;
use repack_core::analytics::{
    broadcaster_frequencies, config_delta, diversity_report, dma_correlations, dma_stats, mean,
    sample_missing_mass, std_dev, write_correlations_csv, write_delta_csv, write_diversity_csv,
    write_dma_count_csv, write_dma_stats_csv, write_frequencies_csv, write_missing_mass_csv,
    ClearingCounts, CorrelationFilter, DmaClearingStats, DmaCountRow, MissingMassRow,
    SolutionIdentity,
};
use repack_core::clique::{enumerate_cliques_greedy, CliqueCatalog};
use repack_core::cnf::{encode as encode_problem, parse_dimacs, write_dimacs};
use repack_core::driver::{
    check_feasibility, min_dma_clearings_isolated, min_dmas_with_clearing,
    min_nationwide_clearings, sample_solutions, FeasibilityStatus, MinSearch, SampleRequest,
    SampleSet,
};
use repack_core::instance::{
    generate_synthetic, write_instance_csv, Instance, PlantedClique, RepackProblem, Slot,
};
use repack_core::montecarlo::{
    estimate_success, shared_randomness_sweep, summarize, write_summary_csv, Estimate, Summary,
    TrialBackend, TrialConfig, TrialReport,
};
use repack_core::participation::ModelSpec;
use repack_core::sat::{solve as solve_cnf, SolverOptions, Verdict};
use repack_core::seed::{self, stream};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{line, Output};
use crate::ProblemArgs;

/// `KIND[:key=value,...]`, with `-` or `_` in the kind.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let (kind, params) = text.split_once(':').unwrap_or((text, ""));
    let mut obj = serde_json::Map::new();
    obj.insert("kind".into(), kind.trim().replace('-', "_").into());
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("model parameter `{kv}` is not key=value"))?;
        let v: f64 = v
            .trim()
            .parse()
            .with_context(|| format!("model parameter `{kv}` is not a number"))?;
        obj.insert(k.trim().to_string(), v.into());
    }
    let spec: ModelSpec = serde_json::from_value(obj.into())
        .with_context(|| format!("unrecognized model `{text}`"))?;
    spec.validate()?;
    Ok(spec)
}

/// `SIZE` or `SIZE:DMA`.
pub fn parse_plant(text: &str) -> Result<PlantedClique> {
    let (size, dma) = match text.split_once(':') {
        Some((s, d)) => (
            s,
            Some(
                d.trim()
                    .parse()
                    .with_context(|| format!("bad DMA in `{text}`"))?,
            ),
        ),
        None => (text, None),
    };
    Ok(PlantedClique {
        size: size
            .trim()
            .parse()
            .with_context(|| format!("bad clique size in `{text}`"))?,
        dma,
    })
}

fn problem<'a>(
    cfg: &ExperimentConfig,
    inst: &'a Instance,
    target: u32,
    args: &ProblemArgs,
) -> Result<RepackProblem<'a>> {
    let mut p = RepackProblem::new(inst, target)?
        .with_domain(cfg.use_domain_constraints)
        .with_max_cleared(args.max_cleared)
        .with_max_dmas(args.max_dmas);
    if args.repack_all {
        p = p.repack_all();
    }
    if !args.must_repack.is_empty() {
        let idx = args
            .must_repack
            .iter()
            .map(|id| {
                inst.station_index(id)
                    .with_context(|| format!("unknown station `{id}`"))
            })
            .collect::<Result<Vec<_>>>()?;
        p = p.with_must_repack(idx)?;
    }
    Ok(p)
}

pub fn gen(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let g = generate_synthetic(&cfg.synthetic, cfg.seed)?;
    let dir = out.path("instance");
    write_instance_csv(&g.instance, &dir)?;
    // stamp each CSV; the loader skips `#` lines
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let body = std::fs::read_to_string(&path)?;
            std::fs::write(&path, format!("# config_digest: {}\n{body}", out.digest()))?;
        }
    }
    let planted: Vec<Vec<String>> = g
        .planted
        .iter()
        .map(|k| {
            k.iter()
                .map(|&i| g.instance.station(i).id.clone())
                .collect()
        })
        .collect();
    out.json(
        "instance/planted.json",
        &serde_json::json!({ "instance_digest": g.instance.digest(), "seed": cfg.seed, "planted": planted }),
    )?;
    println!(
        "instance {} ({} stations) -> {}",
        g.instance.digest(),
        g.instance.len(),
        dir.display()
    );
    Ok(())
}

pub fn encode(cfg: &ExperimentConfig, args: &ProblemArgs, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    for &target in &cfg.targets {
        let p = problem(cfg, &inst, target, args)?;
        let f = encode_problem(&p);
        out.text(&format!("formula_{target}.cnf"), "c", |w| {
            Ok(write_dimacs(&f, w)?)
        })?;
        let entries = f.sidecar(&|i| inst.station(i).id.clone());
        out.json(
            &format!("formula_{target}.varmap.json"),
            &serde_json::json!({ "target_mhz": target, "instance_digest": inst.digest(), "variables": entries }),
        )?;
        println!(
            "target {target} MHz: {} variables, {} clauses",
            f.var_count(),
            f.clauses().len()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveDoc {
    target_mhz: u32,
    instance_digest: String,
    status: FeasibilityStatus,
    cleared: Option<usize>,
    stats: repack_core::sat::SolveStats,
    assignment: Option<BTreeMap<String, Slot>>,
}

pub fn solve(cfg: &ExperimentConfig, args: &ProblemArgs, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    for &target in &cfg.targets {
        let p = problem(cfg, &inst, target, args)?;
        let f = check_feasibility(
            &p,
            &driver.backend,
            seed::derive(cfg.seed, stream::SOLVE, 0),
            driver.budget,
        )?;
        let doc = SolveDoc {
            target_mhz: target,
            instance_digest: inst.digest(),
            status: f.status,
            cleared: f.assignment.as_ref().map(|a| a.cleared_count()),
            stats: f.stats.clone(),
            assignment: f.assignment.as_ref().map(|a| a.to_named(&inst)),
        };
        out.json(&format!("solve_{target}.json"), &doc)?;
        match doc.cleared {
            Some(n) => println!("target {target} MHz: feasible ({n} cleared)"),
            None => println!("target {target} MHz: {}", status_word(f.status)),
        }
    }
    Ok(())
}

fn status_word(s: FeasibilityStatus) -> &'static str {
    match s {
        FeasibilityStatus::Feasible => "feasible",
        FeasibilityStatus::Infeasible => "infeasible",
        FeasibilityStatus::TimedOut => "timed out",
    }
}

fn certificate(symbol: &str, r: &MinSearch) -> String {
    let m = r.minimum;
    match (m, r.below) {
        (0, _) => format!("{symbol}=0 (certificate: feasible@0)"),
        (_, Some(FeasibilityStatus::Infeasible)) => {
            format!(
                "{symbol}={m} (certificate: feasible@{m}, infeasible@{})",
                m - 1
            )
        }
        _ => format!(
            "{symbol}<={m} (upper bound only: cap {} not proved infeasible)",
            m - 1
        ),
    }
}

#[derive(Serialize)]
struct ProbeRecord<'a> {
    record: &'static str,
    search: &'a str,
    target_mhz: u32,
    #[serde(flatten)]
    probe: &'a repack_core::driver::Probe,
}

fn search_tables(
    name: &str,
    symbol: &str,
    out: &Output,
    results: &[(u32, MinSearch)],
    inst: &Instance,
) -> Result<()> {
    out.csv(&format!("{name}.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["target_mhz", "minimum", "certified", "below", "probes"])?;
        for (t, r) in results {
            c.write_record([
                t.to_string(),
                r.minimum.to_string(),
                r.is_certified().to_string(),
                r.below.map(status_word).unwrap_or("").to_string(),
                r.probes.len().to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.jsonl(&format!("{name}_probes.jsonl"), |w| {
        for (t, r) in results {
            for p in &r.probes {
                line(
                    w,
                    &ProbeRecord {
                        record: "probe",
                        search: name,
                        target_mhz: *t,
                        probe: p,
                    },
                )?;
            }
        }
        Ok(())
    })?;
    for (t, r) in results {
        out.json(
            &format!("{name}_{t}_witness.json"),
            &serde_json::json!({ "target_mhz": t, "minimum": r.minimum, "assignment": r.witness.to_named(inst) }),
        )?;
        println!("target {t} MHz: {}", certificate(symbol, r));
    }
    Ok(())
}

pub fn min_clear(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    let results = cfg
        .targets
        .iter()
        .map(|&t| Ok((t, min_nationwide_clearings(&inst, t, &driver, cfg.seed)?)))
        .collect::<Result<Vec<_>>>()?;
    search_tables("min_clear", "b*", out, &results, &inst)
}

pub fn min_dmas(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    let results = cfg
        .targets
        .iter()
        .map(|&t| Ok((t, min_dmas_with_clearing(&inst, t, &driver, cfg.seed)?)))
        .collect::<Result<Vec<_>>>()?;
    search_tables("min_dmas", "d*", out, &results, &inst)
}

pub fn min_dma_isolated(
    cfg: &ExperimentConfig,
    dmas: &[u32],
    nationwide: Option<usize>,
    out: &Output,
) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    let dmas: Vec<u32> = if dmas.is_empty() {
        inst.dma_members().keys().copied().collect()
    } else {
        dmas.to_vec()
    };
    let mut rows = Vec::new();
    for &target in &cfg.targets {
        let b = match nationwide {
            Some(b) => b,
            None => min_nationwide_clearings(&inst, target, &driver, cfg.seed)?.minimum,
        };
        let cap = b + (cfg.slack * b as f64).ceil() as usize;
        let results: Vec<(u32, MinSearch)> = dmas
            .par_iter()
            .map(|&d| {
                Ok((
                    d,
                    min_dma_clearings_isolated(&inst, target, d, b, cfg.slack, &driver, cfg.seed)?,
                ))
            })
            .collect::<Result<_>>()?;
        for (d, r) in results {
            rows.push((target, d, r, cap));
        }
    }
    out.csv("min_dma_isolated.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "target_mhz",
            "dma_id",
            "dma",
            "minimum",
            "certified",
            "nationwide_cap",
        ])?;
        for (t, d, r, cap) in &rows {
            c.write_record([
                t.to_string(),
                d.to_string(),
                inst.dma_name(*d).to_string(),
                r.minimum.to_string(),
                r.is_certified().to_string(),
                cap.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    println!("{} DMA minimums written", rows.len());
    Ok(())
}

pub fn sample(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    ensure!(cfg.samples > 0, "sample count must be positive");
    for &target in &cfg.targets {
        let min = min_nationwide_clearings(&inst, target, &driver, cfg.seed)?;
        if !min.is_certified() {
            log::warn!(
                "target {target}: nationwide minimum {} is an upper bound only",
                min.minimum
            );
        }
        for &buffer in &cfg.buffers {
            let req = SampleRequest {
                count: cfg.samples,
                buffer,
                minimum: Some(min.minimum),
                ..Default::default()
            };
            let set = sample_solutions(&inst, target, &driver, &req, cfg.seed)?;
            let name = format!("samples_{target}_b{buffer}.jsonl");
            out.jsonl(&name, |w| Ok(set.write_jsonl(&inst, w)?))?;
            println!(
                "target {target} MHz, buffer {buffer}: {} samples at cap {} -> {name}",
                set.len(),
                set.header.cap
            );
        }
    }
    Ok(())
}

/// One line of a trial file.
#[derive(Serialize, Deserialize)]
struct TrialLine {
    record: String,
    model: ModelSpec,
    target_mhz: u32,
    backend: TrialBackend,
    #[serde(flatten)]
    report: TrialReport,
}

fn load_catalog(cfg: &ExperimentConfig, inst: &Instance, out: &Output) -> Result<CliqueCatalog> {
    if let Some(path) = &cfg.catalog {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return Ok(CliqueCatalog::read_jsonl(inst, BufReader::new(f))?);
    }
    let cat = enumerate_cliques_greedy(
        inst,
        &cfg.cliques,
        seed::derive(cfg.seed, stream::CLIQUE, 0),
    );
    out.jsonl("cliques.jsonl", |w| Ok(cat.write_jsonl(inst, w)?))?;
    Ok(cat)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let driver = cfg.driver()?;
    let catalog = load_catalog(cfg, &inst, out)?;
    let mut runs: Vec<(ModelSpec, u32, Estimate)> = Vec::new();
    for &target in &cfg.targets {
        for model in &cfg.models {
            let tc = TrialConfig {
                model: *model,
                target_mhz: target,
                trials: cfg.trials,
                backend: cfg.trial_backend,
                driver: driver.clone(),
            };
            if !cfg.alphas.is_empty() && model.alpha().is_some() {
                for (alpha, e) in
                    shared_randomness_sweep(&inst, &tc, &cfg.alphas, Some(&catalog), cfg.seed)?
                {
                    runs.push((model.with_alpha(alpha)?, target, e));
                }
            } else {
                runs.push((
                    *model,
                    target,
                    estimate_success(&inst, &tc, Some(&catalog), cfg.seed)?,
                ));
            }
        }
    }
    let summaries: Vec<Summary> = runs.iter().map(|(_, _, e)| e.summary.clone()).collect();
    out.csv("summary.csv", |w| Ok(write_summary_csv(&summaries, w)?))?;
    out.jsonl("trials.jsonl", |w| {
        for (model, target, e) in &runs {
            for r in &e.reports {
                let rec = TrialLine {
                    record: "trial".into(),
                    model: *model,
                    target_mhz: *target,
                    backend: cfg.trial_backend,
                    report: r.clone(),
                };
                line(w, &rec)?;
            }
        }
        Ok(())
    })?;
    for s in &summaries {
        println!(
            "{} {} @ {} MHz: p = {:.3} +/- {:.3} over {} trials",
            s.model, s.params, s.target, s.p, s.stderr, s.trials
        );
    }
    Ok(())
}

pub fn cliques(cfg: &ExperimentConfig, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let cat = enumerate_cliques_greedy(
        &inst,
        &cfg.cliques,
        seed::derive(cfg.seed, stream::CLIQUE, 0),
    );
    out.jsonl("cliques.jsonl", |w| Ok(cat.write_jsonl(&inst, w)?))?;
    println!("{} cliques, largest {}", cat.len(), cat.largest());
    Ok(())
}

pub struct StatsOptions {
    pub samples: Vec<PathBuf>,
    pub trials: Vec<PathBuf>,
    pub min_dmas: Option<PathBuf>,
    pub identity: SolutionIdentity,
    pub filter: CorrelationFilter,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "samples".into())
}

fn read_min_dmas(path: &Path) -> Result<BTreeMap<u32, usize>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut out = BTreeMap::new();
    for rec in r.deserialize::<BTreeMap<String, String>>() {
        let rec = rec?;
        let field = |k: &str| {
            rec.get(k)
                .with_context(|| format!("{} lacks column {k}", path.display()))
        };
        out.insert(field("target_mhz")?.parse()?, field("minimum")?.parse()?);
    }
    Ok(out)
}

pub fn stats(cfg: &ExperimentConfig, opts: &StatsOptions, out: &Output) -> Result<()> {
    ensure!(
        !opts.samples.is_empty() || !opts.trials.is_empty(),
        "give at least one --samples or --trials file"
    );
    if !opts.samples.is_empty() {
        sample_stats(cfg, opts, out)?;
    }
    if !opts.trials.is_empty() {
        trial_stats(opts, out)?;
    }
    Ok(())
}

fn sample_stats(cfg: &ExperimentConfig, opts: &StatsOptions, out: &Output) -> Result<()> {
    let inst = cfg.load_instance()?;
    let mut mass_rows = Vec::new();
    let mut dma_rows: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut all_stats: Vec<(String, DmaClearingStats)> = Vec::new();
    for path in &opts.samples {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let set = SampleSet::read_jsonl(&inst, BufReader::new(f))
            .with_context(|| format!("reading {}", path.display()))?;
        ensure!(!set.is_empty(), "{} holds no samples", path.display());
        let name = stem(path);
        let counts = ClearingCounts::from_assignments(&inst, set.assignments());
        let st = dma_stats(&counts)?;
        if !st.conservation_holds(1e-9) {
            log::warn!("{name}: per-DMA means do not add up to the nationwide mean");
        }
        out.csv(&format!("dma_stats_{name}.csv"), |w| {
            Ok(write_dma_stats_csv(&st, w)?)
        })?;
        if counts.samples() >= 3 {
            let corr = dma_correlations(&counts, &opts.filter)?;
            out.csv(&format!("correlations_{name}.csv"), |w| {
                Ok(write_correlations_csv(&corr, w)?)
            })?;
        }
        if counts.samples() >= 2 {
            let div = diversity_report(&inst, set.assignments())?;
            out.csv(&format!("diversity_{name}.csv"), |w| {
                Ok(write_diversity_csv(&div, w)?)
            })?;
        }
        let freq = broadcaster_frequencies(&inst, set.assignments())?;
        out.csv(&format!("frequencies_{name}.csv"), |w| {
            Ok(write_frequencies_csv(&freq, w)?)
        })?;

        mass_rows.push(MissingMassRow {
            buffer: set.header.buffer,
            mass: sample_missing_mass(set.assignments(), opts.identity),
        });
        dma_rows
            .entry(set.header.target_mhz)
            .or_default()
            .extend(counts.dmas_with_clearing().into_iter().map(|d| d as f64));
        all_stats.push((name, st));
    }
    mass_rows.sort_by_key(|r| r.buffer);
    out.csv("missing_mass.csv", |w| {
        Ok(write_missing_mass_csv(&mass_rows, w)?)
    })?;

    let mins = opts
        .min_dmas
        .as_deref()
        .map(read_min_dmas)
        .transpose()?
        .unwrap_or_default();
    let count_rows: Vec<DmaCountRow> = dma_rows
        .iter()
        .map(|(&t, xs)| DmaCountRow {
            target_mhz: t,
            min_dmas: mins.get(&t).copied(),
            avg_dmas: mean(xs),
            std_dev: if xs.len() > 1 { std_dev(xs) } else { 0.0 },
        })
        .collect();
    out.csv("dma_count.csv", |w| {
        Ok(write_dma_count_csv(&count_rows, w)?)
    })?;

    for pair in all_stats.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let deltas = config_delta(&a.1, &b.1)?;
        out.csv(&format!("delta_{}_vs_{}.csv", a.0, b.0), |w| {
            Ok(write_delta_csv(&deltas, w)?)
        })?;
    }
    for r in &mass_rows {
        println!(
            "buffer {}: {} draws, {} unique, {} singletons, missing mass {:.1}%",
            r.buffer,
            r.mass.draws,
            r.mass.unique,
            r.mass.singletons,
            100.0 * r.mass.estimate
        );
    }
    Ok(())
}

/// Target, model name and model parameters.
type GroupKey = (u32, String, String);

fn trial_stats(opts: &StatsOptions, out: &Output) -> Result<()> {
    let mut groups: BTreeMap<GroupKey, (ModelSpec, TrialBackend, Vec<TrialReport>)> =
        BTreeMap::new();
    for path in &opts.trials {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for (n, raw) in BufReader::new(f).lines().enumerate() {
            let raw = raw?;
            if raw.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&raw)
                .with_context(|| format!("{}:{}: not JSON", path.display(), n + 1))?;
            if v.get("record").and_then(|r| r.as_str()) != Some("trial") {
                continue;
            }
            let t: TrialLine = serde_json::from_value(v)
                .with_context(|| format!("{}:{}: bad trial record", path.display(), n + 1))?;
            groups
                .entry((t.target_mhz, t.model.name().to_string(), t.model.params()))
                .or_insert_with(|| (t.model, t.backend, Vec::new()))
                .2
                .push(t.report);
        }
    }
    ensure!(!groups.is_empty(), "trial files hold no trial records");
    let summaries: Vec<Summary> = groups
        .iter()
        .map(|((target, _, _), (model, backend, reports))| {
            let tc = TrialConfig {
                model: *model,
                target_mhz: *target,
                trials: reports.len(),
                backend: *backend,
                driver: Default::default(),
            };
            summarize(&tc, reports)
        })
        .collect();
    out.csv("trial_summary.csv", |w| {
        Ok(write_summary_csv(&summaries, w)?)
    })?;
    println!("{} trial groups summarized", summaries.len());
    Ok(())
}

/// Solve a DIMACS file with the embedded solver. Exit code 10 means
/// satisfiable, 20 unsatisfiable, 0 unknown.
pub fn sat(path: &Path, timeout_secs: u64, seed: u64) -> Result<ExitCode> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f = parse_dimacs(&text)?;
    let budget = (timeout_secs > 0).then(|| Duration::from_secs(timeout_secs));
    let outcome = solve_cnf(&f, &SolverOptions::seeded(seed).with_budget(budget));
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let code = match &outcome.verdict {
        Verdict::Sat(model) => {
            writeln!(w, "s SATISFIABLE")?;
            let lits: Vec<String> = model
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v {
                        format!("{}", i + 1)
                    } else {
                        format!("-{}", i + 1)
                    }
                })
                .collect();
            for chunk in lits.chunks(20) {
                writeln!(w, "v {}", chunk.join(" "))?;
            }
            writeln!(w, "v 0")?;
            10
        }
        Verdict::Unsat => {
            writeln!(w, "s UNSATISFIABLE")?;
            20
        }
        Verdict::Timeout => {
            writeln!(w, "s UNKNOWN")?;
            0
        }
    };
    w.flush()?;
    Ok(ExitCode::from(code))
}
