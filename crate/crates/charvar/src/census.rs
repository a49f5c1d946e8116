//! Generator censuses and the verdicts attached to them.
//!
//! A census solves the pinned intersection problem for one diagram, clusters
//! the solutions into components, computes the diagram's first homology, and
//! then runs every verdict that the diagram's standard family pins down:
//! component counts, classifications, trace signatures, Betti totals, and
//! Euler characteristic accounting.  Reports serialize to canonical JSON so
//! one seed always produces one byte stream.

use crate::diagram::{CurveFamily, HeegaardDiagram, StandardFamily};
use crate::error::{Error, Result};
use crate::lm;
use crate::quat::Su2;
use crate::report::canonical_json;
use crate::snf::{cokernel_invariants, AbelianInvariants};
use crate::solver::{
    cluster_components, match_reports, point_distance, solve_intersection, Classification,
    Component, ComponentReport, ConstraintSystem, MatchReport, SolverConfig,
};
use crate::tol;
use crate::word::FreeWord;
use serde_json::{json, Value};

/// Tolerance for comparing component trace signatures against exact values.
pub const TRACE_TOL: f64 = 1e-8;

pub use crate::report::{all_pass, Check};

/// Euler characteristic predicted by first homology: the torsion order when
/// the group is finite, zero otherwise.  The sign convention is positive.
pub fn predict_euler(h1: &AbelianInvariants) -> i64 {
    if h1.free_rank > 0 {
        0
    } else {
        h1.torsion_order() as i64
    }
}

#[derive(Debug, Clone)]
pub struct CensusReport {
    pub clustered: ComponentReport,
    pub h1: AbelianInvariants,
    pub euler_prediction: i64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl CensusReport {
    pub fn diagram(&self) -> &HeegaardDiagram {
        &self.clustered.solutions.diagram
    }

    pub fn components(&self) -> &[Component] {
        &self.clustered.components
    }

    pub fn to_value(&self) -> Result<Value> {
        let s = &self.clustered.solutions;
        Ok(json!({
            "diagram": s.diagram.to_json_value()?,
            "seed": s.config.seed,
            "starts": s.attempted_starts,
            "converged_starts": s.converged_starts,
            "distinct_solutions": s.points.len(),
            "h1": h1_value(&self.h1),
            "euler_prediction": self.euler_prediction,
            "components": self.clustered.components.iter().map(component_value).collect::<Vec<_>>(),
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        }))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&self.to_value()?))
    }
}

fn h1_value(h1: &AbelianInvariants) -> Value {
    json!({ "free_rank": h1.free_rank, "torsion": h1.torsion })
}

fn component_value(c: &Component) -> Value {
    json!({
        "classification": c.classification.as_str(),
        "dim": c.dimension,
        "samples": c.samples.len(),
        "trace_signature": c.trace_signature,
        "signature_constant": c.signature_constant,
        "dimension_agreement": c.dimension_agreement,
        "probe_dim": c.probe_dimension,
    })
}

fn trivial_component_index(report: &ComponentReport) -> Option<usize> {
    let slots = 2 * report.solutions.diagram.genus as usize;
    let theta = vec![Su2::IDENTITY; slots];
    let (idx, d) = report
        .solutions
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, point_distance(p, &theta)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("distances are finite"))?;
    if d <= tol::DEDUP_RADIUS {
        report.component_of_sample(idx)
    } else {
        None
    }
}

fn structural_checks(report: &ComponentReport) -> Vec<Check> {
    let mut checks = Vec::new();

    let trivial = trivial_component_index(report);
    checks.push(Check::new(
        "trivial solution present",
        trivial.is_some(),
        match trivial {
            Some(i) => format!("identity handles land in component {i}"),
            None => "no solution within dedup radius of the identity tuple".to_string(),
        },
    ));

    let worst_agreement = report
        .components
        .iter()
        .map(|c| c.dimension_agreement)
        .fold(1.0f64, f64::min);
    checks.push(Check::new(
        "kernel dimension agreement",
        worst_agreement >= 0.9,
        format!("lowest per-component agreement {worst_agreement:.3}"),
    ));

    let probe_ok: Vec<usize> = report
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.probe_dimension != c.dimension)
        .map(|(i, _)| i)
        .collect();
    checks.push(Check::new(
        "probe dimension audit",
        probe_ok.is_empty(),
        if probe_ok.is_empty() {
            "perturb-and-refine dimension matches the kernel dimension on every component".to_string()
        } else {
            format!("components {probe_ok:?} disagree with their probe dimension")
        },
    ));

    checks
}

fn euler_total_check(report: &ComponentReport, prediction: i64) -> Option<Check> {
    let mut total = 0i64;
    for c in &report.components {
        total += c.classification.euler()?;
    }
    Some(Check::new(
        "euler characteristic total",
        total == prediction,
        format!("component total {total}, homology prediction {prediction}"),
    ))
}

fn lens_checks(report: &ComponentReport, p: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let comps = &report.components;

    let expected_components = (p / 2 + 1) as usize;
    checks.push(Check::new(
        "component count",
        comps.len() == expected_components,
        format!("found {}, expected {expected_components}", comps.len()),
    ));

    let expected_isolated = if p % 2 == 0 { 2 } else { 1 };
    let isolated = report.count_by(Classification::Isolated);
    let spheres = report.count_by(Classification::Sphere);
    checks.push(Check::new(
        "isolated count",
        isolated == expected_isolated,
        format!("found {isolated}, expected {expected_isolated}"),
    ));
    checks.push(Check::new(
        "sphere count",
        isolated + spheres == comps.len() && spheres == expected_components - expected_isolated,
        format!("found {spheres} spheres, expected {}", expected_components - expected_isolated),
    ));

    // Every component fixes the first handle at the identity and carries one
    // p-th root of unity class on the second.
    let first_ok = comps.iter().all(|c| (c.trace_signature[0] - 2.0).abs() <= TRACE_TOL);
    checks.push(Check::new(
        "first handle trace",
        first_ok,
        "trace 2 on the first handle of every component".to_string(),
    ));

    let mut got: Vec<f64> = comps.iter().map(|c| c.trace_signature[1]).collect();
    got.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut expected: Vec<f64> = (0..=p / 2)
        .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / p as f64).cos())
        .collect();
    expected.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let sig_ok = got.len() == expected.len()
        && got.iter().zip(&expected).all(|(g, e)| (g - e).abs() <= TRACE_TOL);
    checks.push(Check::new(
        "trace signature roots of unity",
        sig_ok,
        format!("second handle traces {got:?}"),
    ));

    let betti: Option<u64> = comps.iter().map(|c| c.classification.betti_rank()).sum();
    checks.push(Check::new(
        "betti rank total",
        betti == Some(p),
        format!("component Betti total {betti:?}, expected {p}"),
    ));

    checks
}

fn family_checks(report: &ComponentReport) -> Vec<Check> {
    let diagram = &report.solutions.diagram;
    match diagram.standard_family() {
        Some(StandardFamily::S3 { .. }) => {
            let one = report.components.len() == 1;
            let isolated = one && report.components[0].classification == Classification::Isolated;
            vec![
                Check::new(
                    "component count",
                    one,
                    format!("found {}, expected 1", report.components.len()),
                ),
                Check::new(
                    "isolated count",
                    isolated,
                    "the census is a single rigid point".to_string(),
                ),
            ]
        }
        Some(StandardFamily::S2xS1) => {
            let mut checks = Vec::new();
            let one = report.components.len() == 1;
            checks.push(Check::new(
                "component count",
                one,
                format!("found {}, expected 1", report.components.len()),
            ));
            let dim_ok = one && report.components[0].dimension == 3;
            checks.push(Check::new(
                "three-sphere-like component",
                dim_ok
                    && report.components[0].classification == Classification::ThreeSphereLike,
                format!(
                    "dimension {:?}",
                    report.components.first().map(|c| c.dimension)
                ),
            ));
            if one {
                let comp = &report.components[0];
                let traces: Vec<f64> = comp
                    .samples
                    .iter()
                    .map(|&i| report.solutions.points[i][1].trace())
                    .collect();
                let lo = traces.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = traces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                checks.push(Check::new(
                    "second handle trace spread",
                    lo <= -1.9 && hi >= 1.9,
                    format!("sampled traces cover [{lo:.4}, {hi:.4}]"),
                ));
            }
            checks
        }
        Some(StandardFamily::Lens { p, .. }) => lens_checks(report, p),
        None => Vec::new(),
    }
}

/// Census of one diagram: solve, cluster, compute homology, run verdicts.
pub fn generator_census(diagram: &HeegaardDiagram, cfg: &SolverConfig) -> Result<CensusReport> {
    let solutions = solve_intersection(diagram, cfg)?;
    let clustered = cluster_components(&solutions, cfg)?;
    let h1 = diagram.h1_invariants()?;
    let euler_prediction = predict_euler(&h1);

    let mut checks = structural_checks(&clustered);
    checks.extend(family_checks(&clustered));
    if let Some(check) = euler_total_check(&clustered, euler_prediction) {
        checks.push(check);
    }

    let pass = all_pass(&checks);
    Ok(CensusReport { clustered, h1, euler_prediction, checks, pass })
}

/// Largest distance any solution of `from` moves when re-solved under the
/// constraint system of `to`.  Zero sets that coincide produce displacements
/// at roundoff scale; a genuinely different set fails to stay put.
fn set_displacement(
    from: &ComponentReport,
    to_sys: &ConstraintSystem,
    cfg: &SolverConfig,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in &from.solutions.points {
        let refined = lm::refine(to_sys, p.clone(), cfg.converge_tol, cfg.max_iterations);
        if !refined.converged {
            return Err(Error::NotInStratum(
                "a solution fails to re-solve under the compared diagram".to_string(),
            ));
        }
        worst = worst.max(point_distance(p, &refined.point));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub enum MoveDescriptor {
    Isotopy { family: CurveFamily, curve: usize, path: FreeWord },
    Handleslide { family: CurveFamily, curve: usize, over: usize, path: FreeWord, sign: i8 },
    Stabilize,
}

impl MoveDescriptor {
    pub fn apply(&self, d: &HeegaardDiagram) -> Result<HeegaardDiagram> {
        match self {
            MoveDescriptor::Isotopy { family, curve, path } => d.isotopy(*family, *curve, path),
            MoveDescriptor::Handleslide { family, curve, over, path, sign } => {
                d.handleslide(*family, *curve, *over, path, *sign)
            }
            MoveDescriptor::Stabilize => Ok(d.stabilize()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MoveDescriptor::Isotopy { .. } => "isotopy",
            MoveDescriptor::Handleslide { .. } => "handleslide",
            MoveDescriptor::Stabilize => "stabilization",
        }
    }

    fn preserves_solution_set(&self) -> bool {
        !matches!(self, MoveDescriptor::Stabilize)
    }
}

#[derive(Debug, Clone)]
pub struct MoveReport {
    pub original: CensusReport,
    pub moved: CensusReport,
    pub matching: MatchReport,
    pub max_set_distance: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl MoveReport {
    pub fn to_value(&self) -> Result<Value> {
        Ok(json!({
            "original": self.original.to_value()?,
            "moved": self.moved.to_value()?,
            "component_pairs": self.matching.pairs,
            "max_set_distance": self.max_set_distance,
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        }))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&self.to_value()?))
    }
}

/// Verifies that a move leaves the census invariant.  Isotopies and
/// handleslides must preserve the solution set pointwise; stabilization must
/// extend each solution by identity handles and nothing else.
pub fn verify_move(
    diagram: &HeegaardDiagram,
    descriptor: &MoveDescriptor,
    cfg: &SolverConfig,
) -> Result<MoveReport> {
    let moved_diagram = descriptor.apply(diagram)?;
    let original = generator_census(diagram, cfg)?;
    let moved = generator_census(&moved_diagram, cfg)?;
    let mut checks = Vec::new();

    checks.push(Check::new(
        "first homology unchanged",
        original.h1 == moved.h1,
        format!("{:?} vs {:?}", original.h1, moved.h1),
    ));
    checks.push(Check::new(
        "euler prediction unchanged",
        original.euler_prediction == moved.euler_prediction,
        format!("{} vs {}", original.euler_prediction, moved.euler_prediction),
    ));

    let slots = 2 * diagram.genus as usize;
    let slot_map: Vec<usize> = (0..slots).collect();
    let matching = match_reports(&original.clustered, &moved.clustered, &slot_map, cfg)?;
    checks.push(Check::new(
        "component matching",
        matching.perfect,
        format!(
            "{} pairs, max displacement {:.3e}",
            matching.pairs.len(),
            matching.max_displacement
        ),
    ));

    let max_set_distance = if descriptor.preserves_solution_set() {
        let sys_orig = ConstraintSystem::new(diagram)?;
        let sys_moved = ConstraintSystem::new(&moved_diagram)?;
        let fwd = set_displacement(&original.clustered, &sys_moved, cfg)?;
        let rev = set_displacement(&moved.clustered, &sys_orig, cfg)?;
        let worst = fwd.max(rev);
        checks.push(Check::new(
            "solution sets coincide",
            worst <= tol::EQUALITY,
            format!("max re-solve displacement {worst:.3e}"),
        ));
        worst
    } else {
        // Stabilization: every new-diagram solution restricts to an old one
        // and extends by identity handles; the matching above already checks
        // displacements, here we bound them at set-equality scale.
        let sys_orig = ConstraintSystem::new(diagram)?;
        let sys_moved = ConstraintSystem::new(&moved_diagram)?;
        let mut worst = 0.0f64;
        for p in &original.clustered.solutions.points {
            let mut extended = p.clone();
            extended.push(Su2::IDENTITY);
            extended.push(Su2::IDENTITY);
            let refined = lm::refine(&sys_moved, extended.clone(), cfg.converge_tol, cfg.max_iterations);
            if !refined.converged {
                return Err(Error::NotInStratum(
                    "an extended solution fails the stabilized system".to_string(),
                ));
            }
            worst = worst.max(point_distance(&extended, &refined.point));
        }
        for p in &moved.clustered.solutions.points {
            let (restricted, extra) = p.split_at(slots);
            for q in extra {
                worst = worst.max(q.dist(&Su2::IDENTITY));
            }
            let refined =
                lm::refine(&sys_orig, restricted.to_vec(), cfg.converge_tol, cfg.max_iterations);
            if !refined.converged {
                return Err(Error::NotInStratum(
                    "a restricted solution fails the original system".to_string(),
                ));
            }
            worst = worst.max(point_distance(restricted, &refined.point));
        }
        checks.push(Check::new(
            "solution sets coincide",
            worst <= tol::EQUALITY,
            format!("max extension displacement {worst:.3e}"),
        ));
        worst
    };

    checks.push(Check::new(
        "both censuses pass",
        original.pass && moved.pass,
        format!("original {}, moved {}", original.pass, moved.pass),
    ));

    let pass = all_pass(&checks);
    Ok(MoveReport { original, moved, matching, max_set_distance, checks, pass })
}

/// Invariants of the direct sum of two finitely generated abelian groups,
/// recomputed through Smith normal form so the comparison does not reuse the
/// summands' own reduction.
fn direct_sum_invariants(a: &AbelianInvariants, b: &AbelianInvariants) -> Result<AbelianInvariants> {
    let torsion: Vec<u64> = a.torsion.iter().chain(&b.torsion).copied().collect();
    let ambient = a.free_rank + b.free_rank + torsion.len();
    let mut rows = Vec::new();
    for (i, t) in torsion.iter().enumerate() {
        let mut row = vec![0i64; ambient];
        row[i] = *t as i64;
        rows.push(row);
    }
    cokernel_invariants(&rows, ambient)
}

#[derive(Debug, Clone)]
pub struct KunnethReport {
    pub left: CensusReport,
    pub right: CensusReport,
    pub sum: CensusReport,
    /// Triples (sum component, left component, right component).
    pub pairs: Vec<(usize, usize, usize)>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl KunnethReport {
    pub fn to_value(&self) -> Result<Value> {
        Ok(json!({
            "left": self.left.to_value()?,
            "right": self.right.to_value()?,
            "sum": self.sum.to_value()?,
            "component_triples": self.pairs,
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        }))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&self.to_value()?))
    }
}

const KUNNETH_REPS: usize = 5;

/// Checks the product structure of a connected sum census: components of the
/// sum correspond to pairs of factor components and dimensions add.
pub fn kunneth_check(
    left_diagram: &HeegaardDiagram,
    right_diagram: &HeegaardDiagram,
    cfg: &SolverConfig,
) -> Result<KunnethReport> {
    let sum_diagram = left_diagram.connected_sum(right_diagram);
    let left = generator_census(left_diagram, cfg)?;
    let right = generator_census(right_diagram, cfg)?;
    let sum = generator_census(&sum_diagram, cfg)?;

    let left_sys = ConstraintSystem::new(left_diagram)?;
    let right_sys = ConstraintSystem::new(right_diagram)?;
    let left_slots = 2 * left_diagram.genus as usize;

    let mut checks = Vec::new();
    let mut pairs = Vec::new();
    let mut assignment_ok = true;
    let mut dims_ok = true;

    for (si, comp) in sum.clustered.components.iter().enumerate() {
        let mut assigned: Option<(usize, usize)> = None;
        for &sample in comp.samples.iter().take(KUNNETH_REPS) {
            let point = &sum.clustered.solutions.points[sample];
            let (xl, xr) = point.split_at(left_slots);
            let li = assign_to_component(&left.clustered, &left_sys, xl, cfg);
            let ri = assign_to_component(&right.clustered, &right_sys, xr, cfg);
            let (Some(li), Some(ri)) = (li, ri) else {
                assignment_ok = false;
                break;
            };
            match assigned {
                None => assigned = Some((li, ri)),
                Some(prev) if prev == (li, ri) => {}
                Some(_) => {
                    assignment_ok = false;
                    break;
                }
            }
        }
        let Some((li, ri)) = assigned else {
            assignment_ok = false;
            continue;
        };
        let expected_dim =
            left.clustered.components[li].dimension + right.clustered.components[ri].dimension;
        if comp.dimension != expected_dim {
            dims_ok = false;
        }
        pairs.push((si, li, ri));
    }

    let product_count = left.clustered.components.len() * right.clustered.components.len();
    let mut seen: Vec<(usize, usize)> = pairs.iter().map(|(_, l, r)| (*l, *r)).collect();
    seen.sort_unstable();
    seen.dedup();
    let bijective = assignment_ok
        && pairs.len() == sum.clustered.components.len()
        && seen.len() == pairs.len()
        && pairs.len() == product_count;

    checks.push(Check::new(
        "components factor as pairs",
        bijective,
        format!(
            "{} sum components against {} factor pairs",
            sum.clustered.components.len(),
            product_count
        ),
    ));
    checks.push(Check::new(
        "dimensions add",
        assignment_ok && dims_ok,
        "sum component dimension equals the sum of factor dimensions".to_string(),
    ));

    let expected_h1 = direct_sum_invariants(&left.h1, &right.h1)?;
    checks.push(Check::new(
        "first homology is the direct sum",
        sum.h1 == expected_h1,
        format!("{:?} vs {:?}", sum.h1, expected_h1),
    ));
    checks.push(Check::new(
        "euler prediction multiplies",
        sum.euler_prediction == left.euler_prediction * right.euler_prediction,
        format!(
            "{} vs {} * {}",
            sum.euler_prediction, left.euler_prediction, right.euler_prediction
        ),
    ));
    checks.push(Check::new(
        "factor censuses pass",
        left.pass && right.pass,
        format!("left {}, right {}", left.pass, right.pass),
    ));

    let pass = all_pass(&checks);
    Ok(KunnethReport { left, right, sum, pairs, checks, pass })
}

/// Projects a partial coordinate block onto a factor's solution set and
/// names the component it lands in; `None` when it does not land anywhere
/// within the cluster radius.
fn assign_to_component(
    report: &ComponentReport,
    sys: &ConstraintSystem,
    block: &[Su2],
    cfg: &SolverConfig,
) -> Option<usize> {
    let refined = lm::refine(sys, block.to_vec(), cfg.converge_tol, cfg.max_iterations);
    if !refined.converged || point_distance(block, &refined.point) > cfg.cluster_radius {
        return None;
    }
    let nearest = report
        .solutions
        .points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            point_distance(a.1, &refined.point)
                .partial_cmp(&point_distance(b.1, &refined.point))
                .expect("finite")
        })?
        .0;
    report.component_of_sample(nearest)
}

#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub censuses: Vec<CensusReport>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl BlowupReport {
    pub fn to_value(&self) -> Result<Value> {
        let mut censuses = Vec::new();
        for c in &self.censuses {
            censuses.push(c.to_value()?);
        }
        Ok(json!({
            "censuses": censuses,
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        }))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&self.to_value()?))
    }
}

/// The three genus-one diagrams whose attaching pairs are `(a, b)`,
/// `(b, b a^-1)`, and `(a, b a^-1)`.  All three present the three-sphere and
/// each census must be exactly the rigid trivial point.
pub fn blowup_triple_check(cfg: &SolverConfig) -> Result<BlowupReport> {
    let a = FreeWord::a(1);
    let b = FreeWord::b(1);
    let ba_inv = b.concat(&a.inverse());
    let diagrams = [
        HeegaardDiagram::new(1, vec![a.clone()], vec![b.clone()], "blowup(a,b)".to_string()),
        HeegaardDiagram::new(1, vec![b.clone()], vec![ba_inv.clone()], "blowup(b,ba^-1)".to_string()),
        HeegaardDiagram::new(1, vec![a.clone()], vec![ba_inv.clone()], "blowup(a,ba^-1)".to_string()),
    ];

    let mut censuses = Vec::new();
    let mut checks = Vec::new();
    for d in &diagrams {
        let census = generator_census(d, cfg)?;
        let single_rigid = census.components().len() == 1
            && census.components()[0].classification == Classification::Isolated
            && census.components()[0].trace_signature.iter().all(|t| (t - 2.0).abs() <= TRACE_TOL);
        checks.push(Check::new(
            "single rigid trivial point",
            single_rigid,
            format!(
                "{}: {} components",
                d.name,
                census.components().len()
            ),
        ));
        checks.push(Check::new(
            "trivial first homology",
            census.h1.is_trivial(),
            format!("{}: {:?}", d.name, census.h1),
        ));
        censuses.push(census);
    }

    let pass = all_pass(&checks);
    Ok(BlowupReport { censuses, checks, pass })
}
