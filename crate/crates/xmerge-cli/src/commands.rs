//! Implementations of the subcommands.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use xmerge::adjustment::{run_pipeline, AdjustmentConfig, AdjustmentResult};
use xmerge::diffexpr::{
    analyze, compare_callsets, variance_filter, CallSet, DiffResult, Direction, DEFAULT_Q,
};
use xmerge::distort::{
    apply_distortion, split_balanced, synthetic_dataset, DistortionSpec, SyntheticDesign,
};
use xmerge::estimation::InvariantSetSpec;
use xmerge::model::{align_gene_universe, Alignment, ExpressionMatrix, Study};
use xmerge::pca::first_plane;
use xmerge::spline::Lambda;

use crate::io::{self, ConfigFile};
use crate::params::{switch, LambdaArg, Resolver};
use crate::{CliError, CommonArgs, DiffArgs, MergeArgs, PcaArgs, SimulateArgs};

type CliResult<T> = Result<T, CliError>;

fn resolver(common: &CommonArgs) -> CliResult<Resolver> {
    let file: Option<ConfigFile> = match &common.config {
        Some(p) => Some(io::read_config(Path::new(p))?),
        None => None,
    };
    Ok(Resolver::new(file))
}

struct Common {
    out: PathBuf,
    labels: Option<String>,
    label_column: Option<String>,
    log2: bool,
}

fn resolve_common(r: &mut Resolver, c: &CommonArgs, default_out: &str) -> CliResult<Common> {
    Ok(Common {
        out: PathBuf::from(r.value("out", c.out.clone(), default_out.to_string())?),
        labels: r.optional("labels", c.labels.clone())?,
        label_column: r.optional("label_column", c.label_column.clone())?,
        log2: r.flag("log2", switch(c.log2, c.no_log2), false)?,
    })
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_file_id(id: &str, what: &str) -> CliResult<()> {
    if id.is_empty()
        || id.contains(['/', '\\'])
        || id.chars().any(char::is_whitespace)
        || id == "."
        || id == ".."
    {
        return Err(usage(format!("{what} '{id}' cannot be used in file names")));
    }
    Ok(())
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

fn study_ids(inputs: &[String], given: Vec<String>) -> CliResult<Vec<String>> {
    let ids = if given.is_empty() {
        inputs.iter().map(|p| file_stem(p)).collect::<Vec<_>>()
    } else if given.len() == inputs.len() {
        given
    } else {
        return Err(usage(format!(
            "{} study ids for {} inputs",
            given.len(),
            inputs.len()
        )));
    };
    let mut seen = HashSet::new();
    for id in &ids {
        check_file_id(id, "study id")?;
        if !seen.insert(id.as_str()) {
            return Err(usage(format!("duplicate study id '{id}'")));
        }
    }
    Ok(ids)
}

/// Reads every input as a study, attaching labels when a label file is given.
fn load_studies(inputs: &[String], ids: &[String], common: &Common) -> CliResult<Vec<Study>> {
    let labels = match &common.labels {
        Some(p) => Some((
            io::read_labels(Path::new(p), common.label_column.as_deref())?,
            p.clone(),
        )),
        None => None,
    };
    let mut studies = Vec::with_capacity(inputs.len());
    for (path, id) in inputs.iter().zip(ids) {
        let m = io::read_matrix(Path::new(path), common.log2)?;
        let study = match &labels {
            Some((table, source)) => {
                let l = io::labels_for(&m, table, Path::new(source))?;
                Study::new(id.clone(), m, l)?
            }
            None => Study::unlabeled(id.clone(), m),
        };
        studies.push(study);
    }
    Ok(studies)
}

fn write_manifest(out: &Path, command: &str, resolved: &BTreeMap<String, String>) -> CliResult<()> {
    let mut text = format!("# xmerge {} {command}\n", env!("CARGO_PKG_VERSION"));
    text.push_str(&io::key_values(resolved));
    io::write_text(&out.join("manifest.txt"), &text)?;
    Ok(())
}

fn lines_table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn merge(a: MergeArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let common = resolve_common(&mut r, &a.common, "xmerge-out")?;
    let inputs: Vec<String> = r.list("input", a.inputs, vec![])?;
    if inputs.is_empty() {
        return Err(usage("merge needs at least one --input"));
    }
    let ids: Vec<String> = r.list("study_id", a.study_ids, vec![])?;
    let ids = study_ids(&inputs, ids)?;
    let given: Vec<LambdaArg> = r.list("lambda", a.lambda, vec![LambdaArg(Lambda::Gcv)])?;
    let lambdas: Vec<Lambda> = match given.len() {
        1 => vec![given[0].0; inputs.len()],
        n if n == inputs.len() => given.iter().map(|l| l.0).collect(),
        n => return Err(usage(format!("{n} penalties for {} studies", inputs.len()))),
    };
    let spec_default = InvariantSetSpec::default();
    let spec = InvariantSetSpec {
        n_bins: r.value("invariant_bins", a.invariant_bins, spec_default.n_bins)?,
        fraction: r.value(
            "invariant_fraction",
            a.invariant_fraction,
            spec_default.fraction,
        )?,
    };
    let d = AdjustmentConfig::default();
    let config = AdjustmentConfig {
        max_outer_iters: r.value("max_outer_iters", a.max_outer_iters, d.max_outer_iters)?,
        max_inner_iters: r.value("max_inner_iters", a.max_inner_iters, d.max_inner_iters)?,
        rel_tol: r.value("rel_tol", a.rel_tol, d.rel_tol)?,
        deriv_floor: r.value("deriv_floor", a.deriv_floor, d.deriv_floor)?,
        damping: r.flag("damping", switch(a.damping, a.no_damping), d.damping)?,
        refit_each_outer: r.flag(
            "refit_each_outer",
            switch(a.refit_each_outer, a.no_refit_each_outer),
            d.refit_each_outer,
        )?,
        variance_floor: r.value("variance_floor", a.variance_floor, d.variance_floor)?,
        balance_scale: r.flag(
            "balance_scale",
            switch(a.balance_scale, a.no_balance_scale),
            d.balance_scale,
        )?,
    };
    let lambda_reg: f64 = r.value("lambda_reg", a.lambda_reg, 0.0)?;
    if !(lambda_reg >= 0.0 && lambda_reg.is_finite()) {
        return Err(usage("lambda_reg must be a non-negative number"));
    }
    r.value::<u64>("seed", a.common.seed, 0)?;
    let resolved = r.finish()?;

    let studies = load_studies(&inputs, &ids, &common)?;
    let Alignment { set, dropped } = align_gene_universe(studies)?;
    for (id, d) in ids.iter().zip(&dropped) {
        if !d.is_empty() {
            warn!(
                "study '{id}': {} genes absent from another study were dropped",
                d.len()
            );
        }
    }
    info!(
        "merging {} studies over {} genes",
        set.n_studies(),
        set.n_genes()
    );
    let result = run_pipeline(&set, &spec, &config, &lambdas, lambda_reg)?;
    if !result.converged {
        warn!(
            "no convergence after {} outer iterations",
            result.outer_iterations
        );
    }

    io::create_dir(&common.out)?;
    write_merge_outputs(&common.out, &set, &dropped, &result)?;
    write_manifest(&common.out, "merge", &resolved)
}

fn write_merge_outputs(
    out: &Path,
    set: &xmerge::model::StudySet,
    dropped: &[Vec<String>],
    result: &AdjustmentResult,
) -> CliResult<()> {
    let studies = set.studies();
    let mut adjusted = Vec::with_capacity(studies.len());
    for (k, s) in studies.iter().enumerate() {
        let m = s.matrix.with_values(result.adjusted[k].clone())?;
        io::write_matrix(&out.join(format!("adjusted_{}.tsv", s.id)), &m)?;
        io::write_text(
            &out.join(format!("observation_{}.tsv", s.id)),
            &result.studies[k].spline.to_table(),
        )?;
        io::write_text(
            &out.join(format!("rectification_{}.tsv", s.id)),
            &result.rectification.phis[k].to_table(),
        )?;
        let genes = set.gene_ids();
        io::write_text(
            &out.join(format!("invariant_{}.tsv", s.id)),
            &lines_table(
                "gene",
                result.invariant.per_study[k]
                    .iter()
                    .map(|&g| genes[g].clone()),
            ),
        )?;
        adjusted.push(m);
    }

    let mut seen = HashSet::new();
    let collide = studies
        .iter()
        .flat_map(|s| s.matrix.array_ids())
        .any(|a| !seen.insert(a.as_str()));
    let parts: Vec<ExpressionMatrix> = if collide {
        warn!("array ids repeat across studies; merged columns are named study:array");
        adjusted
            .iter()
            .zip(studies)
            .map(|(m, s)| {
                let ids = m
                    .array_ids()
                    .iter()
                    .map(|a| format!("{}:{a}", s.id))
                    .collect();
                ExpressionMatrix::new(m.gene_ids().to_vec(), ids, m.values().clone())
            })
            .collect::<Result<_, _>>()?
    } else {
        adjusted
    };
    let refs: Vec<&ExpressionMatrix> = parts.iter().collect();
    let merged = ExpressionMatrix::concat_arrays(&refs)?;
    io::write_matrix(&out.join("merged.tsv"), &merged)?;

    let mut arrays = Vec::new();
    for (p, s) in parts.iter().zip(studies) {
        for (c, a) in p.array_ids().iter().enumerate() {
            let label = s.labels.get(c).map_or("NA", String::as_str);
            arrays.push(format!("{a}\t{}\t{label}", s.id));
        }
    }
    io::write_text(
        &out.join("arrays.tsv"),
        &lines_table("array\tstudy\tlabel", arrays),
    )?;

    let genes = set
        .gene_ids()
        .iter()
        .enumerate()
        .map(|(g, id)| format!("{id}\t{}\t{}", result.genes.mu[g], result.genes.sigma2[g]));
    io::write_text(
        &out.join("genes.tsv"),
        &lines_table("gene\tmu\tsigma2", genes),
    )?;

    let rows = studies
        .iter()
        .zip(&result.studies)
        .enumerate()
        .map(|(k, (s, m))| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.id,
                s.matrix.n_arrays(),
                m.tau2,
                m.lambda,
                m.lambda_reg,
                result.invariant.per_study[k].len(),
                dropped[k].len()
            )
        });
    io::write_text(
        &out.join("studies.tsv"),
        &lines_table(
            "study\tarrays\ttau2\tlambda\tlambda_reg\tinvariant_genes\tdropped_genes",
            rows,
        ),
    )?;

    let dropped_rows = studies
        .iter()
        .zip(dropped)
        .flat_map(|(s, d)| d.iter().map(move |g| format!("{}\t{g}", s.id)));
    io::write_text(
        &out.join("dropped.tsv"),
        &lines_table("study\tgene", dropped_rows),
    )?;

    let trace = result
        .trace
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{i}\t{v}"));
    io::write_text(
        &out.join("trace.tsv"),
        &lines_table("iteration\tobjective", trace),
    )?;

    let p = &result.posterior;
    let mut fit = BTreeMap::new();
    fit.insert("converged".to_string(), result.converged.to_string());
    fit.insert(
        "outer_iterations".to_string(),
        result.outer_iterations.to_string(),
    );
    fit.insert(
        "monotone_violations".to_string(),
        result.monotone_violations.to_string(),
    );
    fit.insert(
        "rectification_iterations".to_string(),
        result.rectification.iterations.to_string(),
    );
    fit.insert("log_posterior_data".to_string(), p.l1.to_string());
    fit.insert("log_posterior_prior".to_string(), p.l2.to_string());
    fit.insert("log_posterior_smoothness".to_string(), p.l3.to_string());
    fit.insert("log_posterior".to_string(), p.total.to_string());
    io::write_text(&out.join("fit.txt"), &io::key_values(&fit))?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let common = resolve_common(&mut r, &a.common, "xmerge-sim")?;
    let input: Option<String> = r.optional("input", a.input)?;
    let seed: u64 = r.value("seed", a.common.seed, 0)?;
    let d = DistortionSpec::default();
    let spec = DistortionSpec {
        power_exponents: r.list("exponents", a.exponents, d.power_exponents.clone())?,
        noise_multipliers: r.list("multipliers", a.multipliers, d.noise_multipliers.clone())?,
        noise_tune: r.value("noise_tune", a.noise_tune, d.noise_tune)?,
        seed,
        standardize: r.flag(
            "standardize",
            switch(a.standardize, a.no_standardize),
            d.standardize,
        )?,
    };
    if spec.n_studies() != 2 {
        return Err(usage(
            "simulate produces two subsets: give exactly two exponents",
        ));
    }
    spec.validate()?;

    let synthetic = if input.is_none() {
        let sd = SyntheticDesign::default();
        let (lo, hi) = sd.effect_range;
        let default_conditions = sd
            .conditions
            .iter()
            .map(|(l, n)| format!("{l}:{n}"))
            .collect();
        let conditions = r
            .list("conditions", a.conditions, default_conditions)?
            .iter()
            .map(|c: &String| parse_condition(c))
            .collect::<CliResult<Vec<_>>>()?;
        Some(SyntheticDesign {
            conditions,
            n_genes: r.value("genes", a.genes, sd.n_genes)?,
            n_differential: r.value("differential", a.differential, sd.n_differential)?,
            effect_range: (
                r.value("effect_min", a.effect_min, lo)?,
                r.value("effect_max", a.effect_max, hi)?,
            ),
            seed,
        })
    } else {
        if a.genes.is_some()
            || a.differential.is_some()
            || !a.conditions.is_empty()
            || a.effect_min.is_some()
            || a.effect_max.is_some()
        {
            return Err(usage(
                "synthetic design options cannot be combined with --input",
            ));
        }
        None
    };
    let resolved = r.finish()?;

    io::create_dir(&common.out)?;
    let (base, labels) = match (&input, &synthetic) {
        (Some(path), _) => {
            let m = io::read_matrix(Path::new(path), common.log2)?;
            let Some(lp) = &common.labels else {
                return Err(usage("simulate with --input needs --labels"));
            };
            let table = io::read_labels(Path::new(lp), common.label_column.as_deref())?;
            let l = io::labels_for(&m, &table, Path::new(lp))?;
            (m, l)
        }
        (None, Some(design)) => {
            let data = synthetic_dataset(design)?;
            io::write_matrix(&common.out.join("base.tsv"), &data.matrix)?;
            let genes = data.matrix.gene_ids();
            let rows = data
                .differential
                .iter()
                .zip(&data.directions)
                .map(|(&g, &dir)| format!("{}\t{}", genes[g], if dir > 0 { "up" } else { "down" }));
            io::write_text(
                &common.out.join("differential.tsv"),
                &lines_table("gene\tdirection", rows),
            )?;
            (data.matrix, data.labels)
        }
        (None, None) => unreachable!("synthetic design is set without an input"),
    };

    let split = split_balanced(&base, &labels, seed)?;
    let parts = [
        (&split.first, &split.first_labels),
        (&split.second, &split.second_labels),
    ];
    let mut label_rows = Vec::new();
    let mut meta: BTreeMap<String, String> = spec.metadata().into_iter().collect();
    for (k, (m, l)) in parts.iter().enumerate() {
        let d = apply_distortion(m, k, &spec)?;
        let n = k + 1;
        io::write_matrix(&common.out.join(format!("truth_{n}.tsv")), &d.truth)?;
        io::write_matrix(&common.out.join(format!("distorted_{n}.tsv")), &d.distorted)?;
        meta.insert(format!("tau2_true_{n}"), d.tau2_true.to_string());
        meta.insert(format!("arrays_{n}"), m.n_arrays().to_string());
        for (a, lab) in m.array_ids().iter().zip(l.iter()) {
            label_rows.push(format!("{a}\t{lab}\t{n}"));
        }
    }
    meta.insert("genes".into(), base.n_genes().to_string());
    io::write_text(
        &common.out.join("labels.tsv"),
        &lines_table("array\tlabel\tsubset", label_rows),
    )?;
    io::write_text(&common.out.join("metadata.txt"), &io::key_values(&meta))?;
    write_manifest(&common.out, "simulate", &resolved)
}

fn parse_condition(spec: &str) -> CliResult<(String, usize)> {
    let bad = || usage(format!("condition '{spec}' must be given as label:arrays"));
    let (label, n) = spec.rsplit_once(':').ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    let label = label.trim();
    if label.is_empty() {
        return Err(bad());
    }
    Ok((label.to_string(), n))
}

fn parse_named(spec: &str) -> CliResult<(String, String)> {
    let (name, path) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("dataset '{spec}' must be given as name=path")))?;
    let name = name.trim().to_string();
    check_file_id(&name, "dataset name")?;
    Ok((name, path.trim().to_string()))
}

/// The two groups to compare: the given ones, or the two labels present when
/// there are exactly two, in sorted order.
fn groups(
    g1: Option<String>,
    g2: Option<String>,
    labels: &[String],
) -> CliResult<(String, String)> {
    match (g1, g2) {
        (Some(a), Some(b)) => Ok((a, b)),
        (None, None) => {
            let distinct: BTreeSet<&String> = labels.iter().collect();
            if distinct.len() != 2 {
                return Err(usage(format!(
                    "{} distinct labels; choose the groups with --group1 and --group2",
                    distinct.len()
                )));
            }
            let mut it = distinct.into_iter();
            Ok((it.next().unwrap().clone(), it.next().unwrap().clone()))
        }
        _ => Err(usage("give both --group1 and --group2 or neither")),
    }
}

pub fn diff(a: DiffArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let common = resolve_common(&mut r, &a.common, "xmerge-diff")?;
    let specs: Vec<String> = r.list("input", a.inputs, vec![])?;
    if specs.is_empty() {
        return Err(usage("diff needs at least one --input name=path"));
    }
    let named: Vec<(String, String)> = specs
        .iter()
        .map(|s| parse_named(s))
        .collect::<Result<_, _>>()?;
    let mut seen = HashSet::new();
    for (n, _) in &named {
        if !seen.insert(n.as_str()) {
            return Err(usage(format!("duplicate dataset name '{n}'")));
        }
    }
    let g1: Option<String> = r.optional("group1", a.group1)?;
    let g2: Option<String> = r.optional("group2", a.group2)?;
    let reference: String = r.value("reference", a.reference, named[0].0.clone())?;
    let intersect: Vec<String> = r.list("intersect", a.intersect, vec![])?;
    let q: f64 = r.value("q", a.q, DEFAULT_Q)?;
    let filter: f64 = r.value("filter", a.filter, 0.0)?;
    let _ = r.optional::<u64>("seed", a.common.seed)?;
    let resolved = r.finish()?;
    if !named.iter().any(|(n, _)| *n == reference) {
        return Err(usage(format!(
            "reference '{reference}' is not one of the datasets"
        )));
    }
    let Some(lp) = &common.labels else {
        return Err(usage("diff needs --labels"));
    };
    let table = io::read_labels(Path::new(lp), common.label_column.as_deref())?;

    let mut results: Vec<(String, DiffResult)> = Vec::with_capacity(named.len());
    let mut chosen: Option<(String, String)> = None;
    for (name, path) in &named {
        let m = io::read_matrix(Path::new(path), common.log2)?;
        let labels = io::labels_for(&m, &table, Path::new(lp))?;
        let (ga, gb) = match &chosen {
            Some(g) => g.clone(),
            None => {
                let g = groups(g1.clone(), g2.clone(), &labels)?;
                chosen = Some(g.clone());
                g
            }
        };
        let m = if filter > 0.0 {
            let keep = variance_filter(&m, filter)?;
            m.select_genes(&keep)?
        } else if filter < 0.0 {
            return Err(usage("filter must lie in [0, 1)"));
        } else {
            m
        };
        results.push((name.clone(), analyze(&m, &labels, &ga, &gb, q)?));
    }
    let (ga, gb) = chosen.expect("at least one dataset");

    io::create_dir(&common.out)?;
    let mut long = Vec::new();
    let mut sets: HashMap<String, CallSet> = HashMap::new();
    for (name, res) in &results {
        io::write_text(&common.out.join(format!("diff_{name}.tsv")), &res.to_tsv())?;
        for g in res.calls() {
            let dir = if res.direction[g] > 0 { "up" } else { "down" };
            long.push(format!(
                "{name}\t{dir}\t{}\t{}\t{}",
                res.gene_ids[g], res.p[g], res.p_adj[g]
            ));
        }
        sets.insert(name.clone(), res.callset(name.clone()));
    }
    let mut candidates: Vec<CallSet> = named
        .iter()
        .filter(|(n, _)| *n != reference)
        .map(|(n, _)| sets[n].clone())
        .collect();
    for spec in &intersect {
        let (x, y) = spec
            .split_once('+')
            .ok_or_else(|| usage(format!("intersection '{spec}' must be given as a+b")))?;
        let (x, y) = (x.trim(), y.trim());
        let (Some(sx), Some(sy)) = (sets.get(x), sets.get(y)) else {
            return Err(usage(format!(
                "intersection '{spec}' names an unknown dataset"
            )));
        };
        candidates.push(sx.intersection(sy, format!("{x}+{y}")));
    }
    let report = compare_callsets(&sets[&reference], &candidates, (&ga, &gb));
    io::write_text(&common.out.join("callsets.tsv"), &report.to_tsv())?;
    io::write_text(
        &common.out.join("calls.tsv"),
        &lines_table("dataset\tdirection\tgene\tp\tp_adj", long),
    )?;
    for c in &candidates {
        for d in Direction::BOTH {
            if let Some(row) = report.row(&c.name, d) {
                info!(
                    "{} vs {} ({d:?}): overlap {}, only reference {}, only candidate {}",
                    c.name, reference, row.overlap, row.reference_only, row.candidate_only
                );
            }
        }
    }
    write_manifest(&common.out, "diff", &resolved)
}

pub fn pca(a: PcaArgs) -> CliResult<()> {
    let mut r = resolver(&a.common)?;
    let common = resolve_common(&mut r, &a.common, "xmerge-pca")?;
    let inputs: Vec<String> = r.list("input", a.inputs, vec![])?;
    if inputs.is_empty() {
        return Err(usage("pca needs at least one --input"));
    }
    let ids: Vec<String> = r.list("study_id", a.study_ids, vec![])?;
    let ids = study_ids(&inputs, ids)?;
    let _ = r.optional::<u64>("seed", a.common.seed)?;
    let resolved = r.finish()?;

    let studies = load_studies(&inputs, &ids, &common)?;
    let Alignment { set, .. } = align_gene_universe(studies)?;
    let refs: Vec<&ExpressionMatrix> = set.studies().iter().map(|s| &s.matrix).collect();
    let pooled: Vec<ndarray::ArrayView2<f64>> = refs.iter().map(|m| m.values().view()).collect();
    let values =
        ndarray::concatenate(ndarray::Axis(1), &pooled).map_err(|e| usage(e.to_string()))?;
    let p = first_plane(&values)?;
    if p.constant_genes > 0 {
        warn!("{} constant genes were left out", p.constant_genes);
    }

    io::create_dir(&common.out)?;
    let mut rows = Vec::new();
    let mut c = 0;
    for s in set.studies() {
        for (j, arr) in s.matrix.array_ids().iter().enumerate() {
            let label = s.labels.get(j).map_or("NA", String::as_str);
            let [x, y] = p.scores[c];
            rows.push(format!("{arr}\t{}\t{label}\t{x}\t{y}", s.id));
            c += 1;
        }
    }
    io::write_text(
        &common.out.join("pca.tsv"),
        &lines_table("array\tstudy\tlabel\tpc1\tpc2", rows),
    )?;
    let var = (0..2).map(|i| format!("pc{}\t{}\t{}", i + 1, p.eigenvalues[i], p.explained[i]));
    io::write_text(
        &common.out.join("pca_variance.tsv"),
        &lines_table("component\teigenvalue\texplained", var),
    )?;
    write_manifest(&common.out, "pca", &resolved)
}
