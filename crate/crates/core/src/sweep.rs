//! Per-point analysis sweeps over a test set and their reports.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, ArrayView1};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    class_probe, interpolation_search, null_space_directions, pgd_attack, walk_ray, NullSpaceMode,
    PgdConfig, ProbeOptions, RegionKind, WalkOptions,
};
use crate::data::{mean_point_target, Dataset};
use crate::error::{Error, Result};
use crate::network::NetworkModel;
use crate::polytope::{insphere, remove_redundant};
use crate::region::{extract_region, HalfspaceSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisSet {
    pub insphere: bool,
    pub probes: bool,
    pub decision: bool,
    pub adversarial: bool,
    pub surround: bool,
}

impl Default for AnalysisSet {
    fn default() -> Self {
        AnalysisSet {
            insphere: true,
            probes: true,
            decision: true,
            adversarial: true,
            surround: true,
        }
    }
}

impl std::str::FromStr for AnalysisSet {
    type Err = Error;

    /// Comma-separated names to skip, e.g. `probes,surround`.
    fn from_str(skip: &str) -> Result<Self> {
        let mut set = AnalysisSet::default();
        for name in skip.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "insphere" => set.insphere = false,
                "probes" => set.probes = false,
                "decision" => set.decision = false,
                "adversarial" => set.adversarial = false,
                "surround" => set.surround = false,
                other => return Err(Error::Config(format!("unknown analysis {other:?}"))),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub points: usize,
    pub seed: u64,
    pub reduce: bool,
    pub analyses: AnalysisSet,
    pub probe: ProbeOptions,
    pub pgd: PgdConfig,
    pub interpolation_resolution: usize,
    pub directions: usize,
    pub epsilon_ray: f64,
    pub walk: WalkOptions,
    /// `None` picks by input dimension and class count.
    pub null_space: Option<NullSpaceMode>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            points: 1000,
            seed: 0,
            reduce: false,
            analyses: AnalysisSet::default(),
            probe: ProbeOptions::default(),
            pgd: PgdConfig::default(),
            interpolation_resolution: 10_000,
            directions: 100,
            epsilon_ray: 0.2,
            walk: WalkOptions::default(),
            null_space: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub kind: RegionKind,
    /// Interpolation weight of the generating point; 0 for manifold regions.
    pub alpha: f64,
    pub no_boundary: bool,
    pub constraint_count: usize,
    pub total_inequalities: usize,
    pub retained: Option<usize>,
    pub inradius: Option<f64>,
    pub activation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub target_class: usize,
    pub log_prob: f64,
    pub realized: bool,
    pub distortion: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub point_id: usize,
    pub dataset_index: usize,
    pub label: usize,
    pub predicted: usize,
    pub regions: Vec<RegionRecord>,
    pub decision_target_class: Option<usize>,
    /// The class mean was not classified into its own class and a member point was used instead.
    pub decision_target_fallback: bool,
    pub pgd_success: Option<bool>,
    pub probes: Vec<ProbeRecord>,
    pub class_region_count: Option<usize>,
    pub distortion: Option<f64>,
    pub surround_counts: Vec<usize>,
    pub relevance: Vec<f64>,
    pub undefined_relevance: usize,
    pub errors: Vec<String>,
}

impl PointRecord {
    pub fn region(&self, kind: RegionKind) -> Option<&RegionRecord> {
        self.regions.iter().find(|r| r.kind == kind)
    }
}

/// Distribution summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Stats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub points: usize,
    pub failed_points: usize,
    pub manifold_inradius: Option<Stats>,
    pub decision_inradius: Option<Stats>,
    pub adversarial_inradius: Option<Stats>,
    pub class_region_count: Option<Stats>,
    pub distortion: Option<Stats>,
    pub surround_unique_regions: Option<Stats>,
    pub relevance: Option<Stats>,
    pub pgd_success_rate: Option<f64>,
}

impl Aggregate {
    pub fn from_records(records: &[PointRecord]) -> Self {
        let inradii = |kind| {
            let v: Vec<f64> = records
                .iter()
                .filter_map(|r| r.region(kind).and_then(|g| g.inradius))
                .collect();
            Stats::of(&v)
        };
        let attacked: Vec<bool> = records.iter().filter_map(|r| r.pgd_success).collect();
        Aggregate {
            points: records.len(),
            failed_points: records.iter().filter(|r| !r.errors.is_empty()).count(),
            manifold_inradius: inradii(RegionKind::Manifold),
            decision_inradius: inradii(RegionKind::Decision),
            adversarial_inradius: inradii(RegionKind::Adversarial),
            class_region_count: Stats::of(
                &records.iter().filter_map(|r| r.class_region_count.map(|c| c as f64)).collect::<Vec<_>>(),
            ),
            distortion: Stats::of(&records.iter().filter_map(|r| r.distortion).collect::<Vec<_>>()),
            surround_unique_regions: Stats::of(
                &records.iter().flat_map(|r| r.surround_counts.iter().map(|&c| c as f64)).collect::<Vec<_>>(),
            ),
            relevance: Stats::of(&records.iter().flat_map(|r| r.relevance.iter().copied()).collect::<Vec<_>>()),
            pgd_success_rate: (!attacked.is_empty())
                .then(|| attacked.iter().filter(|&&s| s).count() as f64 / attacked.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: String,
    pub config: AnalyzeConfig,
    /// Dataset indices analyzed, in point-id order.
    pub point_indices: Vec<usize>,
    pub records: Vec<PointRecord>,
    pub aggregate: Aggregate,
}

/// First `count` indices of a seeded shuffle of `0..n`.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.truncate(count.min(n));
    order
}

/// Boundary targets per class: the class mean when the model assigns it to that
/// class, otherwise the first member point that the model classifies correctly.
#[derive(Debug, Clone)]
pub struct ClassTargets {
    pub points: Vec<Option<Array1<f64>>>,
    pub fallback: Vec<bool>,
}

impl ClassTargets {
    pub fn new(model: &NetworkModel, data: &Dataset) -> Result<Self> {
        let mut points = Vec::with_capacity(data.class_count);
        let mut fallback = Vec::with_capacity(data.class_count);
        for c in 0..data.class_count {
            let mean = match mean_point_target(data, c) {
                Ok(m) => m,
                Err(Error::EmptyClass(_)) => {
                    points.push(None);
                    fallback.push(false);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if model.classify(mean.view())? == c {
                points.push(Some(mean));
                fallback.push(false);
                continue;
            }
            let mut member = None;
            for i in data.class_indices(c) {
                let x = data.point(i);
                if model.classify(x.view())? == c {
                    member = Some(x);
                    break;
                }
            }
            points.push(member);
            fallback.push(true);
        }
        Ok(ClassTargets { points, fallback })
    }
}

fn point_seed(seed: u64, point_id: usize, stream: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((point_id as u64) << 8)
        .wrapping_add(stream)
}

fn region_record(
    kind: RegionKind,
    alpha: f64,
    no_boundary: bool,
    system: &HalfspaceSystem,
    cfg: &AnalyzeConfig,
    errors: &mut Vec<String>,
) -> RegionRecord {
    let mut record = RegionRecord {
        kind,
        alpha,
        no_boundary,
        constraint_count: system.len(),
        total_inequalities: system.total_inequalities(),
        retained: None,
        inradius: None,
        activation_rate: system.pattern().activation_rate(),
    };
    let reduced = if cfg.reduce {
        match remove_redundant(system) {
            Ok((r, _)) => {
                record.retained = Some(r.len());
                Some(r)
            }
            Err(e) => {
                errors.push(format!("{} redundancy: {e}", kind.name()));
                None
            }
        }
    } else {
        None
    };
    if cfg.analyses.insphere {
        match insphere(reduced.as_ref().unwrap_or(system)) {
            Ok(r) => record.inradius = Some(r.inradius),
            Err(e) => errors.push(format!("{} insphere: {e}", kind.name())),
        }
    }
    record
}

/// Runs every enabled analysis for one test point; sub-analysis failures are
/// recorded in `errors` and do not stop the others.
pub fn analyze_point(
    model: &NetworkModel,
    x: ArrayView1<f64>,
    label: usize,
    point_id: usize,
    dataset_index: usize,
    targets: &ClassTargets,
    cfg: &AnalyzeConfig,
) -> PointRecord {
    let mut errors = Vec::new();
    let mut record = PointRecord {
        point_id,
        dataset_index,
        label,
        predicted: 0,
        regions: Vec::new(),
        decision_target_class: None,
        decision_target_fallback: false,
        pgd_success: None,
        probes: Vec::new(),
        class_region_count: None,
        distortion: None,
        surround_counts: Vec::new(),
        relevance: Vec::new(),
        undefined_relevance: 0,
        errors: Vec::new(),
    };
    let predicted = match model.classify(x) {
        Ok(c) => c,
        Err(e) => {
            record.errors.push(format!("forward: {e}"));
            return record;
        }
    };
    record.predicted = predicted;
    let system = match extract_region(model, x) {
        Ok(s) => s,
        Err(e) => {
            record.errors.push(format!("manifold region: {e}"));
            return record;
        }
    };
    record
        .regions
        .push(region_record(RegionKind::Manifold, 0.0, false, &system, cfg, &mut errors));

    let affine = model.region_affine_map(x);
    if cfg.analyses.probes {
        if let Ok(affine) = &affine {
            for t in 0..model.class_count() {
                match class_probe(&system, affine, x, t, &cfg.probe) {
                    Ok(p) => record.probes.push(ProbeRecord {
                        target_class: t,
                        log_prob: p.log_prob,
                        realized: p.realized,
                        distortion: p.distortion,
                        gap: p.gap,
                        iterations: p.iterations,
                    }),
                    Err(e) => errors.push(format!("class probe {t}: {e}")),
                }
            }
            if record.probes.len() == model.class_count() {
                record.class_region_count = Some(record.probes.iter().filter(|p| p.realized).count());
                record.distortion = Some(record.probes.iter().map(|p| p.distortion).fold(0.0, f64::max));
            }
        }
    }

    if cfg.analyses.decision {
        let mut rng = ChaCha8Rng::seed_from_u64(point_seed(cfg.seed, point_id, 1));
        let others: Vec<usize> = (0..model.class_count())
            .filter(|&c| c != predicted && targets.points.get(c).is_some_and(|p| p.is_some()))
            .collect();
        match others.choose(&mut rng) {
            Some(&c) => {
                record.decision_target_class = Some(c);
                record.decision_target_fallback = targets.fallback[c];
                let target = targets.points[c].as_ref().expect("filtered above");
                match interpolation_search(model, x, target.view(), cfg.interpolation_resolution) {
                    Ok(r) => record.regions.push(region_record(
                        RegionKind::Decision,
                        r.alpha_star,
                        r.no_boundary,
                        &r.boundary_system,
                        cfg,
                        &mut errors,
                    )),
                    Err(e) => errors.push(format!("decision search: {e}")),
                }
            }
            None => errors.push("decision search: no target class available".into()),
        }
    }

    if cfg.analyses.adversarial {
        let pgd = PgdConfig {
            seed: point_seed(cfg.seed, point_id, 2),
            ..cfg.pgd
        };
        match pgd_attack(model, x, label, &pgd) {
            Ok(adv) => {
                record.pgd_success = Some(adv.success);
                match interpolation_search(model, x, adv.x_adv.view(), cfg.interpolation_resolution) {
                    Ok(r) => record.regions.push(region_record(
                        RegionKind::Adversarial,
                        r.alpha_star,
                        r.no_boundary,
                        &r.boundary_system,
                        cfg,
                        &mut errors,
                    )),
                    Err(e) => errors.push(format!("adversarial search: {e}")),
                }
            }
            Err(e) => errors.push(format!("pgd: {e}")),
        }
    }

    if cfg.analyses.surround {
        match &affine {
            Ok(affine) => {
                let mode = cfg
                    .null_space
                    .unwrap_or_else(|| NullSpaceMode::auto(model.input_dim(), model.class_count()));
                match null_space_directions(affine, cfg.directions, point_seed(cfg.seed, point_id, 3), mode) {
                    Ok(dirs) => {
                        for e in dirs {
                            match walk_ray(model, x, e.view(), cfg.epsilon_ray, &cfg.walk) {
                                Ok(p) => {
                                    record.surround_counts.push(p.unique_region_count);
                                    for r in p.relevance {
                                        match r {
                                            Some(v) => record.relevance.push(v),
                                            None => record.undefined_relevance += 1,
                                        }
                                    }
                                }
                                Err(e) => errors.push(format!("ray walk: {e}")),
                            }
                        }
                    }
                    Err(e) => errors.push(format!("null space: {e}")),
                }
            }
            Err(e) => errors.push(format!("affine map: {e}")),
        }
    }
    record.errors = errors;
    record
}

/// Analyzes the first `cfg.points` points of a seeded shuffle of `test`, in parallel.
pub fn run_sweep(
    model_name: &str,
    model: &NetworkModel,
    test: &Dataset,
    targets: &ClassTargets,
    cfg: &AnalyzeConfig,
) -> SweepReport {
    let indices = sample_indices(test.len(), cfg.points, cfg.seed);
    let records: Vec<PointRecord> = indices
        .par_iter()
        .enumerate()
        .map(|(id, &i)| analyze_point(model, test.point(i).view(), test.labels[i], id, i, targets, cfg))
        .collect();
    SweepReport {
        model: model_name.to_string(),
        config: cfg.clone(),
        aggregate: Aggregate::from_records(&records),
        point_indices: indices,
        records,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn joined<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub const POINT_CSV_HEADER: [&str; 16] = [
    "point_id",
    "dataset_index",
    "label",
    "predicted",
    "manifold_inradius",
    "decision_alpha",
    "decision_inradius",
    "adversarial_alpha",
    "adversarial_inradius",
    "pgd_success",
    "class_region_count",
    "distortion",
    "surround_counts",
    "relevance",
    "undefined_relevance",
    "errors",
];

/// One row per point. Floats use the shortest representation that round-trips.
pub fn write_points_csv<W: Write>(writer: W, records: &[PointRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(POINT_CSV_HEADER)?;
    for r in records {
        let inradius = |k| opt(r.region(k).and_then(|g| g.inradius));
        let alpha = |k| opt(r.region(k).map(|g| g.alpha));
        w.write_record([
            r.point_id.to_string(),
            r.dataset_index.to_string(),
            r.label.to_string(),
            r.predicted.to_string(),
            inradius(RegionKind::Manifold),
            alpha(RegionKind::Decision),
            inradius(RegionKind::Decision),
            alpha(RegionKind::Adversarial),
            inradius(RegionKind::Adversarial),
            opt(r.pgd_success),
            opt(r.class_region_count),
            opt(r.distortion),
            joined(&r.surround_counts),
            joined(&r.relevance),
            r.undefined_relevance.to_string(),
            r.errors.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per analyzed region, tagged with its kind.
pub fn write_regions_csv<W: Write>(writer: W, records: &[PointRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "point_id",
        "region_type",
        "alpha",
        "no_boundary",
        "constraint_count",
        "total_inequalities",
        "retained",
        "inradius",
        "activation_rate",
    ])?;
    for r in records {
        for g in &r.regions {
            w.write_record([
                r.point_id.to_string(),
                g.kind.name().to_string(),
                g.alpha.to_string(),
                g.no_boundary.to_string(),
                g.constraint_count.to_string(),
                g.total_inequalities.to_string(),
                opt(g.retained),
                opt(g.inradius),
                g.activation_rate.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/points_<model>.json`, `points_<model>.csv`, `regions_<model>.csv` and `aggregate_<model>.json`.
pub fn write_report(dir: &Path, report: &SweepReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let name = &report.model;
    crate::io::save_json_precise(&dir.join(format!("points_{name}.json")), report)?;
    write_points_csv(std::fs::File::create(dir.join(format!("points_{name}.csv")))?, &report.records)?;
    write_regions_csv(std::fs::File::create(dir.join(format!("regions_{name}.csv")))?, &report.records)?;
    crate::io::save_json_precise(&dir.join(format!("aggregate_{name}.json")), &report.aggregate)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let s = Stats::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!(s.mean, 2.5);
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn sampling_is_a_seeded_prefix() {
        let a = sample_indices(100, 10, 7);
        assert_eq!(a, sample_indices(100, 10, 7));
        assert_eq!(&sample_indices(100, 20, 7)[..10], &a[..]);
        assert_eq!(sample_indices(5, 10, 1).len(), 5);
    }

    #[test]
    fn skip_list_parses() {
        let s: AnalysisSet = "probes, surround".parse().unwrap();
        assert!(!s.probes && !s.surround && s.insphere);
        assert!("bogus".parse::<AnalysisSet>().is_err());
    }
}
