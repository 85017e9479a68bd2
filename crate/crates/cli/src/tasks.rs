use rayon::prelude::*;
use serde_json::json;
use specmult_core::greens_function::{
    adjoint_symmetry_at, green_block, herglotz_margin, rank_update_check, schur_green,
    EpsilonSchedule, Side,
};
use specmult_core::multiplicity::{
    char_poly, corollary_bound, estimate_m_n, global_degeneracy, mult_by_clustering, mult_by_gcd,
    mult_exact_rational_f64,
};
use specmult_core::operator_model::{
    build_canopy_bethe, build_nested_model, build_random_dense, build_rooted_tree,
    build_shell_model, build_strip_with, load_model, sample_disorder_at, BaseModel, DisorderSpec,
    Distribution, ModelInstance, RootedTreeModel,
};
use specmult_core::spectral_measures::{
    averaging_center, block_basis, canonical_averaging_model, cyclic_subspace, decompose,
    dyadic_intervals, kernel_inclusion_check, matrix_weight, poltoratskii_ratio,
    spectral_averaging_estimate, trace_measure, LambdaLaw,
};
use specmult_core::tree_simplicity::{
    feynman_hellmann_check, sample_tau, simplicity_report, TreeTolerances,
};
use specmult_core::{CMatrix, CVector, Error, C64};

use crate::config::*;
use crate::error::RunError;
use crate::record::{Detail, Row, Sink};
use crate::tau::parse_tau;

/// Sums of weights and projector identities are held to this absolute level.
const IDENTITY_TOL: f64 = 1e-10;

pub(crate) struct TaskOutput {
    pub rows: Vec<Row>,
    pub details: Vec<Detail>,
    pub tables: serde_json::Value,
    pub notes: Vec<String>,
}

const ATOMIC_NOTE: &str =
    "all spectral measures are atomic at finite volume; singular parts are read as atoms";

struct Ensemble {
    base: BaseModel,
    disorder: DisorderSpec,
}

impl Ensemble {
    fn instance(&self, s: usize) -> Result<ModelInstance, RunError> {
        let omega = sample_disorder_at(&self.disorder, self.base.blocks.len(), s as u64)
            .map_err(RunError::num("sample_disorder"))?;
        self.base
            .assemble(&omega)
            .map_err(RunError::num("assemble"))
    }

    fn check_block(&self, path: &str, n: usize) -> Result<(), RunError> {
        if n >= self.base.blocks.len() {
            return Err(RunError::Config {
                path: path.into(),
                message: format!("block {n} out of range ({} blocks)", self.base.blocks.len()),
            });
        }
        Ok(())
    }

    fn blocks(&self, path: &str, chosen: &Option<Vec<usize>>) -> Result<Vec<usize>, RunError> {
        match chosen {
            None => Ok((0..self.base.blocks.len()).collect()),
            Some(list) => {
                for (i, &n) in list.iter().enumerate() {
                    self.check_block(&format!("{path}[{i}]"), n)?;
                }
                Ok(list.clone())
            }
        }
    }
}

fn model_error(e: Error) -> RunError {
    RunError::Config {
        path: "model".into(),
        message: e.to_string(),
    }
}

fn read_file(path: &str) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| RunError::Input {
        path: path.into(),
        message: e.to_string(),
    })
}

fn ensemble(cfg: &ExperimentConfig) -> Result<Ensemble, RunError> {
    let (base, file_disorder) = match &cfg.model {
        ModelSpec::Strip {
            length,
            fibers,
            vertical_hopping,
        } => (
            build_strip_with(*length, *fibers, *vertical_hopping).map_err(model_error)?,
            None,
        ),
        ModelSpec::Shell { d, radius } => {
            (build_shell_model(*d, *radius).map_err(model_error)?, None)
        }
        ModelSpec::Nested { levels } => (build_nested_model(*levels).map_err(model_error)?, None),
        ModelSpec::Canopy {
            k,
            depth,
            block_depth,
        } => (
            build_canopy_bethe(*k, *depth, *block_depth)
                .map_err(model_error)?
                .0,
            None,
        ),
        ModelSpec::RandomDense { dim, rank } => (
            build_random_dense(*dim, *rank, cfg.seed).map_err(model_error)?,
            None,
        ),
        ModelSpec::File { path } => load_model(&read_file(path)?).map_err(|e| match e {
            Error::InvalidDocument { path, message } => RunError::Config {
                path: format!("model file {path}"),
                message,
            },
            other => model_error(other),
        })?,
        ModelSpec::Tree { .. } | ModelSpec::CanonicalAveraging {} => {
            return Err(RunError::Usage("this model has no block ensemble".into()))
        }
    };
    let disorder = match (&cfg.disorder, file_disorder) {
        (Some(d), _) => DisorderSpec::iid(d.law, d.seed.unwrap_or(cfg.seed)),
        (None, Some(d)) => d,
        (None, None) => DisorderSpec::iid(Distribution::Uniform { a: -1.0, b: 1.0 }, cfg.seed),
    };
    disorder
        .validate(base.blocks.len())
        .map_err(|e| RunError::Config {
            path: "disorder".into(),
            message: e.to_string(),
        })?;
    Ok(Ensemble { base, disorder })
}

fn per_sample<F>(task: &'static str, samples: usize, f: F) -> Result<Vec<Row>, RunError>
where
    F: Fn(&mut Sink, usize) -> Result<(), RunError> + Sync,
{
    let chunks: Vec<Vec<Row>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut sink = Sink::new(task, Some(s));
            f(&mut sink, s)?;
            Ok(sink.rows)
        })
        .collect::<Result<_, RunError>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn zs(list: &[[f64; 2]]) -> Vec<C64> {
    list.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = (a - b).norm();
    if d == 0.0 {
        0.0
    } else {
        d / a.norm().max(b.norm())
    }
}

/// Rank updates, Herglotz sign, Schur form and adjoint symmetry above the spectrum.
fn green_suites(
    sink: &mut Sink,
    m: &ModelInstance,
    zs: &[C64],
    lambda: f64,
    tol: &Tolerances,
) -> Result<(), RunError> {
    let nb = m.blocks.len();
    for (zi, &z) in zs.iter().enumerate() {
        for p in 0..nb {
            let r =
                rank_update_check(m, p, lambda, z).map_err(RunError::num("rank_update_check"))?;
            let worst = r.max_residual();
            sink.check(
                "resolvent_identities",
                "rank_update",
                format!("p={p};z={zi}"),
                worst,
                worst <= tol.residual_tol,
            );
        }
        for n in 0..nb {
            let g = green_block(m, n, n, z)
                .map_err(RunError::num("green_block"))?
                .matrix;
            let margin = herglotz_margin(&g) * z.im.signum();
            let floor = -1e-12 * g.norm();
            sink.check(
                "herglotz",
                "signed_min_im_eig",
                format!("n={n};z={zi}"),
                margin,
                margin >= floor,
            );
            let s = schur_green(m, n, z)
                .map_err(RunError::num("schur_green"))?
                .matrix;
            let d = rel(&g, &s);
            sink.check(
                "schur",
                "relative_difference",
                format!("n={n};z={zi}"),
                d,
                d <= tol.residual_tol,
            );
        }
    }
    let above = C64::new(m.norm() + 1.0, 0.0);
    for p in 1..nb.min(4) {
        let r =
            adjoint_symmetry_at(m, 0, p, above).map_err(RunError::num("adjoint_symmetry_at"))?;
        sink.check(
            "adjoint_symmetry",
            "residual",
            format!("k=0;p={p};E={}", above.re),
            r.residual,
            r.residual <= tol.residual_tol,
        );
    }
    Ok(())
}

fn green(cfg: &ExperimentConfig, p: &GreenParams) -> Result<TaskOutput, RunError> {
    let ens = ensemble(cfg)?;
    let z = zs(&p.z);
    let rows = per_sample("green", p.samples, |sink, s| {
        let m = ens.instance(s)?;
        green_suites(sink, &m, &z, p.lambda, &cfg.tolerances)
    })?;
    Ok(TaskOutput {
        rows,
        details: vec![],
        tables: json!({}),
        notes: vec![],
    })
}

/// `M_n` per block, the chain `global_degeneracy <= sup_n M_n` and the corollary bound.
fn mult_suites(
    task: &'static str,
    ens: &Ensemble,
    samples: usize,
    z_count: usize,
    blocks: &[usize],
    tol: &Tolerances,
    model_name: &str,
) -> Result<(Vec<Row>, Detail, serde_json::Value), RunError> {
    let mut agg = Sink::new(task, None);
    let mut per_block = Vec::new();
    let first = ens.instance(0)?;
    let mut table = Vec::new();
    for &n in blocks {
        let rep = estimate_m_n(
            &ens.base,
            &ens.disorder,
            samples,
            z_count,
            &[],
            n,
            tol.cluster_tol,
        )
        .map_err(RunError::num("estimate_m_n"))?;
        let bound = corollary_bound(&first, n).map_err(RunError::num("corollary_bound"))?;
        let sup = rep.per_sample.iter().copied().max().unwrap_or(0);
        agg.check(
            "m_n_constancy",
            "exceptions",
            format!("n={n}"),
            rep.exceptions.len() as f64,
            rep.constant && rep.exceptions.is_empty(),
        );
        agg.value("m_n", "sup", format!("n={n}"), sup as f64);
        agg.value("corollary", "bound", format!("n={n}"), bound as f64);
        table.push(vec![
            n.to_string(),
            sup.to_string(),
            rep.constant.to_string(),
            rep.exceptions.len().to_string(),
            bound.to_string(),
        ]);
        per_block.push((rep.per_sample, bound));
    }
    let all_blocks = blocks.len() == ens.base.blocks.len();
    let max_bound = per_block.iter().map(|(_, b)| *b).max().unwrap_or(0);
    let rows_per_sample = per_sample(task, samples, |sink, s| {
        let m = ens.instance(s)?;
        let gd = global_degeneracy(&m, tol.cluster_tol);
        let sup = per_block.iter().map(|(v, _)| v[s]).max().unwrap_or(0);
        sink.value("degeneracy", "global", "", gd as f64);
        for (&n, (v, _)) in blocks.iter().zip(&per_block) {
            sink.value("m_n", "sample_max", format!("n={n}"), v[s] as f64);
        }
        if all_blocks {
            sink.check(
                "degeneracy_chain",
                "global_minus_sup_m_n",
                "",
                gd as f64 - sup as f64,
                gd <= sup,
            );
            sink.check(
                "corollary",
                "global_minus_bound",
                "",
                gd as f64 - max_bound as f64,
                gd <= max_bound,
            );
        }
        Ok(())
    })?;
    let sup_all = per_block
        .iter()
        .flat_map(|(v, _)| v.iter().copied())
        .max()
        .unwrap_or(0);
    let mut rows = agg.rows;
    let gd_max = rows_per_sample
        .iter()
        .filter(|r| r.suite == "degeneracy" && r.metric == "global")
        .map(|r| r.value as usize)
        .max()
        .unwrap_or(0);
    let respected = rows_per_sample
        .iter()
        .filter(|r| r.suite == "degeneracy_chain")
        .all(|r| r.pass == Some(true));
    rows.extend(rows_per_sample);
    let detail = Detail {
        name: "mn_table".into(),
        header: [
            "block",
            "sup_m_n",
            "constant",
            "exceptions",
            "corollary_bound",
        ]
        .map(String::from)
        .to_vec(),
        rows: table,
    };
    let chain = json!({
        "model": model_name,
        "sup_m_n": sup_all,
        "global_degeneracy": gd_max,
        "corollary_bound": max_bound,
        "bound_respected": all_blocks && respected,
        "all_blocks": all_blocks,
    });
    Ok((rows, detail, chain))
}

fn mult(cfg: &ExperimentConfig, p: &MultParams) -> Result<TaskOutput, RunError> {
    let ens = ensemble(cfg)?;
    let blocks = ens.blocks("task.mult.blocks", &p.blocks)?;
    let (rows, detail, chain) = mult_suites(
        "mult",
        &ens,
        p.samples,
        p.z_count,
        &blocks,
        &cfg.tolerances,
        &cfg.model.name(),
    )?;
    Ok(TaskOutput {
        rows,
        details: vec![detail],
        tables: json!({ "degeneracy_vs_bound": chain }),
        notes: vec![],
    })
}

/// Real energies in spectral gaps (and beyond both edges), spread evenly.
fn gap_energies(m: &ModelInstance, count: usize) -> Vec<f64> {
    let spec = m.spectrum();
    let scale = m.norm().max(1.0);
    let mut cands = vec![spec[0] - 0.5];
    for w in spec.windows(2) {
        if w[1] - w[0] > 1e-3 * scale {
            cands.push(0.5 * (w[0] + w[1]));
        }
    }
    cands.push(spec[spec.len() - 1] + 0.5);
    if count >= cands.len() {
        return cands;
    }
    if count == 1 {
        return vec![cands[cands.len() / 2]];
    }
    (0..count)
        .map(|i| cands[i * (cands.len() - 1) / (count - 1)])
        .collect()
}

fn sweep(cfg: &ExperimentConfig, p: &SweepParams) -> Result<TaskOutput, RunError> {
    let ens = ensemble(cfg)?;
    let blocks = ens.blocks("task.sweep.blocks", &p.blocks)?;
    let tol = cfg.tolerances;
    let rows = per_sample("sweep", p.samples, |sink, s| {
        let m = ens.instance(s)?;
        for e in gap_energies(&m, p.energies) {
            for &n in &blocks {
                let block = m.block(n).map_err(RunError::num("block"))?;
                let label = format!("n={n};E={e}");
                if block.rank() > p.max_rank {
                    sink.value(
                        "method_agreement",
                        "skipped_rank",
                        label,
                        block.rank() as f64,
                    );
                    continue;
                }
                let g = green_block(&m, n, n, C64::new(e, 0.0))
                    .map_err(RunError::num("green_block"))?;
                let poly = char_poly(block, &g).map_err(RunError::num("char_poly"))?;
                let kc = mult_by_clustering(&poly, tol.cluster_tol)
                    .map_err(RunError::num("mult_by_clustering"))?;
                let (kg, _) =
                    mult_by_gcd(&poly, tol.gcd_tol).map_err(RunError::num("mult_by_gcd"))?;
                let ke = mult_exact_rational_f64(&m, n, e)
                    .map_err(RunError::num("mult_exact_rational"))?;
                sink.value("method_agreement", "exact", label.clone(), ke.k as f64);
                sink.check(
                    "method_agreement",
                    "clustering",
                    label.clone(),
                    kc.k as f64,
                    kc.k == ke.k,
                );
                if kg.certified {
                    sink.check("method_agreement", "gcd", label, kg.k as f64, kg.k == ke.k);
                } else {
                    sink.value(
                        "method_agreement",
                        "gcd_uncertified",
                        label.clone(),
                        kg.k as f64,
                    );
                    sink.value("method_agreement", "adjudicated", label, ke.k as f64);
                }
            }
        }
        Ok(())
    })?;
    Ok(TaskOutput {
        rows,
        details: vec![],
        tables: json!({}),
        notes: vec![],
    })
}

fn log_histogram(values: &[f64]) -> Detail {
    let (lo, hi, width) = (-16.0f64, 2.0f64, 0.5f64);
    let bins = ((hi - lo) / width) as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let x = if v > 0.0 { v.log10() } else { lo };
        let i = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Detail {
        name: "min_gap_histogram".into(),
        header: ["log10_lo", "log10_hi", "count"].map(String::from).to_vec(),
        rows: counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let a = lo + width * i as f64;
                vec![a.to_string(), (a + width).to_string(), c.to_string()]
            })
            .collect(),
    }
}

fn tree_check(
    cfg: &ExperimentConfig,
    p: &TreeParams,
    tree: &RootedTreeModel,
) -> Result<TaskOutput, RunError> {
    let leaves = tree.boundary.len();
    let taus: Vec<Vec<f64>> = match &p.tau_file {
        Some(path) => parse_tau(&read_file(path)?, Some(leaves))?,
        None => (0..p.samples)
            .map(|s| sample_tau(tree, cfg.seed, s as u64))
            .collect(),
    };
    let tol = TreeTolerances {
        gap_tol: cfg.tolerances.gap_tol,
        amp_tol: cfg.tolerances.amp_tol,
    };
    let rows = per_sample("tree-check", taus.len(), |sink, s| {
        let tau = &taus[s];
        let r = simplicity_report(tree, tau, tol).map_err(RunError::num("simplicity_report"))?;
        sink.check("tree_simplicity", "min_gap", "", r.min_gap, r.simple);
        sink.check(
            "tree_simplicity",
            "min_root_amplitude",
            "",
            r.min_root_amplitude,
            r.root_nonvanishing,
        );
        if r.sibling_min_separation.is_finite() {
            sink.check(
                "tree_simplicity",
                "sibling_separation",
                "",
                r.sibling_min_separation,
                r.siblings_disjoint,
            );
        }
        sink.check(
            "tree_simplicity",
            "pole_count",
            format!("expected={}", r.expected_pole_count),
            r.pole_count as f64,
            r.poles_match,
        );
        if let Some(h) = p.fh_step {
            let site = tree.boundary[s % leaves];
            match feynman_hellmann_check(tree, tau, site, h, tol.gap_tol) {
                Ok(fh) => {
                    let label = format!("site={site};h={h}");
                    let estimate = fh.error_estimates.iter().copied().fold(0.0, f64::max);
                    sink.value(
                        "feynman_hellmann",
                        "truncation_estimate",
                        label.clone(),
                        estimate,
                    );
                    let within = fh
                        .residuals
                        .iter()
                        .zip(&fh.error_estimates)
                        .all(|(r, e)| *r <= cfg.tolerances.fh_tol.max(2.0 * e));
                    sink.check(
                        "feynman_hellmann",
                        "max_residual",
                        label,
                        fh.max_residual,
                        within,
                    );
                }
                Err(Error::Precondition(_)) | Err(Error::DegenerateSpectrum { .. }) => sink.value(
                    "feynman_hellmann",
                    "skipped_small_gap",
                    format!("site={site};h={h}"),
                    r.min_gap,
                ),
                Err(e) => return Err(RunError::num("feynman_hellmann_check")(e)),
            }
        }
        Ok(())
    })?;
    let gaps: Vec<f64> = rows
        .iter()
        .filter(|r| r.metric == "min_gap")
        .map(|r| r.value)
        .collect();
    let count = |metric: &str| {
        rows.iter()
            .filter(|r| r.metric == metric && r.pass == Some(true))
            .count()
    };
    let tables = json!({
        "tree": { "k": tree.k, "depth": tree.depth, "vertices": tree.vertex_count() },
        "samples": taus.len(),
        "simple": count("min_gap"),
        "root_nonvanishing": count("min_root_amplitude"),
        "siblings_disjoint": count("sibling_separation"),
        "poles_match": count("pole_count"),
        "min_gap_min": gaps.iter().copied().fold(f64::INFINITY, f64::min),
        "min_gap_max": gaps.iter().copied().fold(0.0, f64::max),
    });
    Ok(TaskOutput {
        rows,
        details: vec![log_histogram(&gaps)],
        tables,
        notes: vec![],
    })
}

/// Spectral-measure suites for one block of one instance.
fn measure_suites(
    sink: &mut Sink,
    m: &ModelInstance,
    block: usize,
    mode: MeasureMode,
    lambda: f64,
    tol: &Tolerances,
    detail_rows: &mut Vec<Vec<String>>,
    sample: usize,
) -> Result<(), RunError> {
    let d = decompose(m, tol.cluster_tol);
    let b = block_basis(m, block).map_err(RunError::num("block_basis"))?;
    let sched = EpsilonSchedule::default();
    let label = |j: usize| format!("n={block};atom={j}");
    match mode {
        MeasureMode::Atoms => {
            let atoms = trace_measure(&d, &b);
            let total: f64 = atoms.iter().map(|a| a.weight).sum();
            for (j, a) in atoms.iter().enumerate() {
                sink.value("trace_measure", "weight", label(j), a.weight);
                detail_rows.push(vec![
                    sample.to_string(),
                    j.to_string(),
                    a.energy.to_string(),
                    a.multiplicity.to_string(),
                    a.weight.to_string(),
                ]);
            }
            let defect = (total - b.ncols() as f64).abs();
            sink.check(
                "trace_measure",
                "rank_defect",
                format!("n={block}"),
                defect,
                defect <= IDENTITY_TOL,
            );
        }
        MeasureMode::Weights => {
            let w = matrix_weight(&d, &b);
            sink.check(
                "matrix_weight",
                "sum_defect",
                format!("n={block}"),
                w.sum_defect,
                w.sum_defect <= IDENTITY_TOL,
            );
            for a in &w.atoms {
                let min_f = a.f_values[0];
                sink.check(
                    "matrix_weight",
                    "min_eigenvalue",
                    label(a.atom),
                    min_f,
                    min_f >= -IDENTITY_TOL,
                );
                let entries: Vec<String> = a
                    .normalized
                    .iter()
                    .map(|z| format!("{}{:+}i", z.re, z.im))
                    .collect();
                detail_rows.push(vec![
                    sample.to_string(),
                    a.atom.to_string(),
                    a.energy.to_string(),
                    a.trace.to_string(),
                    a.f_values
                        .iter()
                        .map(f64::to_string)
                        .collect::<Vec<_>>()
                        .join(" "),
                    entries.join(" "),
                ]);
            }
        }
        MeasureMode::Poltoratskii => {
            let w = matrix_weight(&d, &b);
            for a in &w.atoms {
                match poltoratskii_ratio(m, &b, &d, a.atom, &sched) {
                    Ok(r) => {
                        sink.check(
                            "poltoratskii",
                            "final_deviation",
                            label(a.atom),
                            r.final_deviation,
                            r.final_deviation <= tol.deviation_tol,
                        );
                        sink.check(
                            "poltoratskii",
                            "monotone",
                            label(a.atom),
                            r.nearest_distance,
                            r.monotone,
                        );
                    }
                    Err(Error::AtomsUnresolved { distance, .. }) => {
                        sink.value("poltoratskii", "unresolved", label(a.atom), distance)
                    }
                    Err(e) => return Err(RunError::num("poltoratskii_ratio")(e)),
                }
            }
        }
        MeasureMode::Cyclic => {
            let sub = cyclic_subspace(m.assembled.matrix(), &d, &b)
                .map_err(RunError::num("cyclic_subspace"))?;
            let l = format!("n={block}");
            sink.check(
                "cyclic",
                "sum_identity_defect",
                l.clone(),
                sub.sum_identity_defect,
                sub.sum_identity_defect <= IDENTITY_TOL,
            );
            let inv_tol = IDENTITY_TOL * m.norm().max(1.0);
            sink.check(
                "cyclic",
                "invariance",
                l.clone(),
                sub.invariance_residual,
                sub.invariance_residual <= inv_tol,
            );
            sink.check(
                "cyclic",
                "containment",
                l.clone(),
                sub.containment_residual,
                sub.containment_residual <= IDENTITY_TOL,
            );
            sink.value("cyclic", "dimension", l, sub.basis.ncols() as f64);
        }
        MeasureMode::Kernel => {
            let r = kernel_inclusion_check(m, block, lambda, &sched, Side::Plus, tol.cluster_tol)
                .map_err(RunError::num("kernel_inclusion_check"))?;
            for a in &r.atoms {
                let l = format!("n={block};E={}", a.witness.energy);
                sink.check(
                    "kernel_inclusion",
                    "range_in_kernel",
                    l.clone(),
                    a.range_in_kernel_sine,
                    a.range_in_kernel_sine <= tol.angle_tol,
                );
                sink.check(
                    "kernel_inclusion",
                    "kernel_in_im_kernel",
                    l,
                    a.kernel_in_im_kernel_sine,
                    a.kernel_in_im_kernel_sine <= tol.angle_tol,
                );
            }
            for s in &r.skipped {
                sink.value(
                    "kernel_inclusion",
                    "skipped_atom",
                    format!("n={block};E={}", s.energy),
                    s.energy,
                );
            }
        }
    }
    Ok(())
}

fn measure_header(mode: MeasureMode) -> Option<(&'static str, Vec<String>)> {
    match mode {
        MeasureMode::Atoms => Some((
            "atoms",
            ["sample", "atom", "energy", "multiplicity", "weight"]
                .map(String::from)
                .to_vec(),
        )),
        MeasureMode::Weights => Some((
            "weights",
            [
                "sample",
                "atom",
                "energy",
                "trace",
                "f_values",
                "normalized_weight",
            ]
            .map(String::from)
            .to_vec(),
        )),
        _ => None,
    }
}

fn measure(cfg: &ExperimentConfig, p: &MeasureParams) -> Result<TaskOutput, RunError> {
    let ens = ensemble(cfg)?;
    ens.check_block("task.measure.block", p.block)?;
    let collected: Vec<(Vec<Row>, Vec<Vec<String>>)> = (0..p.samples)
        .into_par_iter()
        .map(|s| {
            let m = ens.instance(s)?;
            let mut sink = Sink::new("measure", Some(s));
            let mut detail = Vec::new();
            measure_suites(
                &mut sink,
                &m,
                p.block,
                p.mode,
                p.lambda,
                &cfg.tolerances,
                &mut detail,
                s,
            )?;
            Ok((sink.rows, detail))
        })
        .collect::<Result<_, RunError>>()?;
    let mut rows = Vec::new();
    let mut detail_rows = Vec::new();
    for (r, d) in collected {
        rows.extend(r);
        detail_rows.extend(d);
    }
    let details = measure_header(p.mode)
        .map(|(name, header)| Detail {
            name: name.into(),
            header,
            rows: detail_rows,
        })
        .into_iter()
        .collect();
    Ok(TaskOutput {
        rows,
        details,
        tables: json!({}),
        notes: vec![ATOMIC_NOTE.into()],
    })
}

fn avg(cfg: &ExperimentConfig, p: &AvgParams) -> Result<TaskOutput, RunError> {
    let (h, c_mat, phi): (CMatrix, CMatrix, CVector) = match &cfg.model {
        ModelSpec::CanonicalAveraging {} => canonical_averaging_model(cfg.seed),
        _ => {
            let ens = ensemble(cfg)?;
            ens.check_block("task.avg.block", p.block)?;
            let m = ens.instance(0)?;
            let blk = m.block(p.block).map_err(RunError::num("block"))?;
            let dim = m.dim();
            let phi = blk.embedded_basis(dim).column(0).into_owned();
            (m.assembled.matrix().clone(), blk.embedded_c(dim), phi)
        }
    };
    let law = LambdaLaw {
        a: p.law[0],
        b: p.law[1],
    };
    let center = p
        .intervals
        .center
        .unwrap_or_else(|| averaging_center(&h, &c_mat, &phi, law));
    let intervals = dyadic_intervals(center, p.intervals.first_len, p.intervals.count);
    let rep = spectral_averaging_estimate(&h, &c_mat, &phi, &intervals, law, p.samples, cfg.seed)
        .map_err(RunError::num("spectral_averaging_estimate"))?;
    let mut sink = Sink::new("avg", None);
    for (k, (m, l)) in rep.means.iter().zip(&rep.interval_lengths).enumerate() {
        sink.value("averaging", "mean", format!("k={k};len={l}"), *m);
    }
    match rep.slope {
        Some(s) => sink.check("averaging", "slope", "", s, rep.in_band),
        None => sink.value("averaging", "degenerate", "", 1.0),
    }
    let detail = Detail {
        name: "scaling".into(),
        header: ["k", "lo", "hi", "length", "mean"]
            .map(String::from)
            .to_vec(),
        rows: rep
            .intervals
            .iter()
            .zip(&rep.means)
            .enumerate()
            .map(|(k, ((lo, hi), m))| {
                vec![
                    k.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    (hi - lo).to_string(),
                    m.to_string(),
                ]
            })
            .collect(),
    };
    Ok(TaskOutput {
        rows: sink.rows,
        details: vec![detail],
        tables: json!({ "averaging": rep, "center": center }),
        notes: vec![],
    })
}

fn verify_all(cfg: &ExperimentConfig, p: &VerifyParams) -> Result<TaskOutput, RunError> {
    let ens = ensemble(cfg)?;
    let z = zs(&p.z);
    let tol = cfg.tolerances;
    let nb = ens.base.blocks.len();
    let mut rows = per_sample("verify-all", p.samples, |sink, s| {
        let m = ens.instance(s)?;
        green_suites(sink, &m, &z, p.lambda, &tol)?;
        let mut scratch = Vec::new();
        for n in 0..nb {
            measure_suites(
                sink,
                &m,
                n,
                MeasureMode::Weights,
                p.lambda,
                &tol,
                &mut scratch,
                s,
            )?;
            measure_suites(
                sink,
                &m,
                n,
                MeasureMode::Cyclic,
                p.lambda,
                &tol,
                &mut scratch,
                s,
            )?;
        }
        measure_suites(
            sink,
            &m,
            0,
            MeasureMode::Poltoratskii,
            p.lambda,
            &tol,
            &mut scratch,
            s,
        )?;
        measure_suites(
            sink,
            &m,
            0,
            MeasureMode::Kernel,
            p.lambda,
            &tol,
            &mut scratch,
            s,
        )?;
        Ok(())
    })?;
    let blocks: Vec<usize> = (0..nb).collect();
    let (mrows, detail, chain) = mult_suites(
        "verify-all",
        &ens,
        p.samples,
        p.z_count,
        &blocks,
        &tol,
        &cfg.model.name(),
    )?;
    rows.extend(mrows);
    Ok(TaskOutput {
        rows,
        details: vec![detail],
        tables: json!({ "degeneracy_vs_bound": chain }),
        notes: vec![ATOMIC_NOTE.into()],
    })
}

pub(crate) fn execute(cfg: &ExperimentConfig) -> Result<TaskOutput, RunError> {
    match &cfg.task {
        Task::Green(p) => green(cfg, p),
        Task::Mult(p) => mult(cfg, p),
        Task::Sweep(p) => sweep(cfg, p),
        Task::TreeCheck(p) => match cfg.model {
            ModelSpec::Tree { k, depth } => {
                let tree = build_rooted_tree(k, depth).map_err(model_error)?;
                tree_check(cfg, p, &tree)
            }
            _ => Err(RunError::Usage("tree-check needs a tree model".into())),
        },
        Task::Measure(p) => measure(cfg, p),
        Task::Avg(p) => avg(cfg, p),
        Task::VerifyAll(p) => verify_all(cfg, p),
    }
}
