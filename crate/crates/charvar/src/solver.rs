//! Numerical intersection of the two handlebody Lagrangians.
//!
//! With punctures pinned at `(i, j, -k)` the intersection is the zero set of
//! one residual map on `(S^3)^{2g}`: each attaching word's holonomy must be
//! 1 and the handle commutator word must be 1 (the pinned puncture product
//! is exactly 1, so the surface relation collapses to the commutator word).
//! The solver runs a seeded multistart refinement, deduplicates converged
//! points, reads component dimensions off constraint Jacobians, and groups
//! samples into connected components.
//!
//! Positive-dimensional components are recovered from finitely many samples,
//! so grouping cannot rely on a fixed proximity radius alone: two samples of
//! one 2-sphere are usually much farther apart than any sensible radius.
//! After the radius pass, clusters of equal positive kernel dimension are
//! joined only when a chord between them refines, step by step, into a chain
//! of solutions with no jump larger than [`tol::BRIDGE_GAP`]; distinct
//! components in the supported censuses are separated by gaps several times
//! that size, so the probe cannot fuse them.

use crate::diagram::HeegaardDiagram;
use crate::error::{Error, Result};
use crate::lm::{self, ManifoldProblem};
use crate::moduli::pinned_relator;
use crate::quat::{holonomy, Su2};
use crate::tol;
use crate::word::FreeWord;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Installs the global worker pool, honoring `CHARVAR_THREADS` when set.
/// Safe to call from every entry point; only the first call builds the pool.
pub fn init_thread_pool() {
    static POOL: OnceLock<()> = OnceLock::new();
    POOL.get_or_init(|| {
        if let Ok(raw) = std::env::var("CHARVAR_THREADS") {
            if let Ok(n) = raw.parse::<usize>() {
                if n >= 1 {
                    // An error here means a pool already exists, which is fine.
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of refinement starts; `None` picks `500 * 2^genus`.
    pub starts: Option<usize>,
    pub seed: u64,
    pub converge_tol: f64,
    pub dedup_radius: f64,
    pub cluster_radius: f64,
    pub rank_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            starts: None,
            seed: 0,
            converge_tol: tol::CONVERGE,
            dedup_radius: tol::DEDUP_RADIUS,
            cluster_radius: tol::CLUSTER_RADIUS,
            rank_tol: tol::RANK_REL,
            max_iterations: tol::MAX_ITERATIONS,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> SolverConfig {
        SolverConfig { seed, ..SolverConfig::default() }
    }

    pub fn effective_starts(&self, genus: u16) -> usize {
        self.starts.unwrap_or(500usize << genus.min(16))
    }
}

/// The pinned constraint system of a diagram: alpha words, beta words, then
/// the handle commutator word.
pub struct ConstraintSystem {
    genus: u16,
    words: Vec<FreeWord>,
}

impl ConstraintSystem {
    pub fn new(diagram: &HeegaardDiagram) -> Result<ConstraintSystem> {
        let report = diagram.validate();
        if !report.pass {
            return Err(Error::InvalidParameter(format!(
                "diagram {} fails validation: {}",
                diagram.name,
                report.reasons.join("; ")
            )));
        }
        let mut words: Vec<FreeWord> = Vec::with_capacity(2 * diagram.genus as usize + 1);
        words.extend(diagram.alpha.iter().cloned());
        words.extend(diagram.beta.iter().cloned());
        words.push(pinned_relator(diagram.genus));
        Ok(ConstraintSystem { genus: diagram.genus, words })
    }

    pub fn genus(&self) -> u16 {
        self.genus
    }

    fn slots(&self) -> usize {
        2 * self.genus as usize
    }
}

fn neg(q: &Su2) -> Su2 {
    Su2 { w: -q.w, x: -q.x, y: -q.y, z: -q.z }
}

const TANGENT_BASIS: [Su2; 3] = [Su2::I, Su2::J, Su2::K];

impl ManifoldProblem for ConstraintSystem {
    type Point = Vec<Su2>;

    fn residual_dim(&self) -> usize {
        4 * self.words.len()
    }

    fn tangent_dim(&self) -> usize {
        3 * self.slots()
    }

    fn residual(&self, p: &Vec<Su2>, out: &mut DVector<f64>) {
        for (idx, word) in self.words.iter().enumerate() {
            // Word generators were validated against the genus.
            let h = holonomy(word, p).expect("validated word stays in range");
            out[4 * idx] = h.w - 1.0;
            out[4 * idx + 1] = h.x;
            out[4 * idx + 2] = h.y;
            out[4 * idx + 3] = h.z;
        }
    }

    fn jacobian(&self, p: &Vec<Su2>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (widx, word) in self.words.iter().enumerate() {
            let letters = word.letters();
            let len = letters.len();
            // prefix[t] = product of the first t factors; suffix[t] = product
            // of factors from t on.
            let mut factors = Vec::with_capacity(len);
            for l in letters {
                let q = p[(l.gen - 1) as usize];
                factors.push(if l.sign > 0 { q } else { q.inv() });
            }
            let mut prefix = vec![Su2::IDENTITY; len + 1];
            for t in 0..len {
                prefix[t + 1] = prefix[t].mul(&factors[t]);
            }
            let mut suffix = vec![Su2::IDENTITY; len + 1];
            for t in (0..len).rev() {
                suffix[t] = factors[t].mul(&suffix[t + 1]);
            }
            for (t, l) in letters.iter().enumerate() {
                let slot = (l.gen - 1) as usize;
                let q = p[slot];
                for (u, e) in TANGENT_BASIS.iter().enumerate() {
                    // d/de of q e^{e u} is q e; of (q e^{e u})^-1 is -e q^-1.
                    let mid = if l.sign > 0 { q.mul(e) } else { neg(&e.mul(&q.inv())) };
                    let d = prefix[t].mul(&mid).mul(&suffix[t + 1]).as_array();
                    let col = 3 * slot + u;
                    for comp in 0..4 {
                        out[(4 * widx + comp, col)] += d[comp];
                    }
                }
            }
        }
    }

    fn apply_step(&self, p: &Vec<Su2>, step: &DVector<f64>) -> Vec<Su2> {
        p.iter()
            .enumerate()
            .map(|(m, q)| q.mul(&Su2::exp_imag([step[3 * m], step[3 * m + 1], step[3 * m + 2]])))
            .collect()
    }
}

pub fn flatten(point: &[Su2]) -> DVector<f64> {
    DVector::from_iterator(4 * point.len(), point.iter().flat_map(|q| q.as_array()))
}

/// Rebuilds a handle tuple from flat coordinates, renormalizing each slot.
/// Fails when a slot is too far from the unit sphere to project sensibly.
pub fn unflatten(v: &DVector<f64>) -> Option<Vec<Su2>> {
    let mut out = Vec::with_capacity(v.len() / 4);
    for c in v.as_slice().chunks_exact(4) {
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]).sqrt();
        if n < 0.3 {
            return None;
        }
        out.push(Su2 { w: c[0] / n, x: c[1] / n, y: c[2] / n, z: c[3] / n });
    }
    Some(out)
}

pub fn point_distance(a: &[Su2], b: &[Su2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dist(y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub diagram: HeegaardDiagram,
    pub points: Vec<Vec<Su2>>,
    pub residuals: Vec<f64>,
    pub kernel_dims: Vec<usize>,
    pub attempted_starts: usize,
    pub converged_starts: usize,
    pub config: SolverConfig,
}

/// Multistart solve.  Start 0 is the trivial point (identity handles), which
/// satisfies every constraint exactly, so the returned set is never empty;
/// the remaining starts are Haar-random tuples drawn from per-index streams
/// of the seeded generator, which makes the outcome independent of thread
/// count and schedule.
pub fn solve_intersection(diagram: &HeegaardDiagram, cfg: &SolverConfig) -> Result<SolutionSet> {
    init_thread_pool();
    let sys = ConstraintSystem::new(diagram)?;
    let genus = diagram.genus;

    if genus == 0 {
        // No handles: the pinned punctures are the whole solution.
        return Ok(SolutionSet {
            diagram: diagram.clone(),
            points: vec![Vec::new()],
            residuals: vec![0.0],
            kernel_dims: vec![0],
            attempted_starts: 1,
            converged_starts: 1,
            config: cfg.clone(),
        });
    }

    let starts = cfg.effective_starts(genus);
    let slots = 2 * genus as usize;
    let outcomes: Vec<lm::RefineOutcome<Vec<Su2>>> = (0..starts)
        .into_par_iter()
        .map(|idx| {
            let start: Vec<Su2> = if idx == 0 {
                vec![Su2::IDENTITY; slots]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                (0..slots).map(|_| Su2::random(&mut rng)).collect()
            };
            lm::refine(&sys, start, cfg.converge_tol, cfg.max_iterations)
        })
        .collect();

    let mut points: Vec<Vec<Su2>> = Vec::new();
    let mut residuals = Vec::new();
    let mut converged_starts = 0;
    for out in outcomes {
        if !out.converged {
            continue;
        }
        converged_starts += 1;
        if points.iter().all(|kept| point_distance(kept, &out.point) > cfg.dedup_radius) {
            points.push(out.point);
            residuals.push(out.residual);
        }
    }

    let theta = vec![Su2::IDENTITY; slots];
    if !points.iter().any(|p| point_distance(p, &theta) <= cfg.dedup_radius) {
        // Start 0 converges at iteration zero, so this cannot trigger; keep
        // the guarantee explicit anyway.
        return Err(Error::Configuration("trivial solution missing from solve".into()));
    }

    let kernel_dims = points
        .par_iter()
        .map(|p| {
            let jac = lm::numeric_jacobian(&sys, p, tol::FD_STEP);
            lm::kernel_dimension(&jac, cfg.rank_tol)
        })
        .collect();

    Ok(SolutionSet {
        diagram: diagram.clone(),
        points,
        residuals,
        kernel_dims,
        attempted_starts: starts,
        converged_starts,
        config: cfg.clone(),
    })
}

/// Kernel dimension of the constraint Jacobian at a given solution, from the
/// central-difference Jacobian.
pub fn jacobian_kernel_dim(
    diagram: &HeegaardDiagram,
    point: &[Su2],
    cfg: &SolverConfig,
) -> Result<usize> {
    let sys = ConstraintSystem::new(diagram)?;
    if point.len() != 2 * diagram.genus as usize {
        return Err(Error::Shape(format!(
            "expected {} handle slots, got {}",
            2 * diagram.genus,
            point.len()
        )));
    }
    let owned = point.to_vec();
    let residual = lm::residual_norm(&sys, &owned);
    if residual > crate::moduli::PIN_INPUT_TOL {
        return Err(Error::NotInStratum(format!(
            "point has residual {residual:.3e}, not a solution"
        )));
    }
    let jac = lm::numeric_jacobian(&sys, &owned, tol::FD_STEP);
    Ok(lm::kernel_dimension(&jac, cfg.rank_tol))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }
    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            // Smaller root wins so cluster ids are stable.
            let (lo, hi) = (ri.min(rj), ri.max(rj));
            self.parent[hi] = lo;
        }
    }
}

/// Groups flat samples into connected components.  `refine_flat` projects a
/// nearby off-manifold vector back onto the solution set and returns `None`
/// when refinement fails to converge.
pub(crate) fn cluster_flat(
    points: &[DVector<f64>],
    kernel_dims: &[usize],
    cluster_radius: f64,
    refine_flat: &(dyn Fn(&DVector<f64>) -> Option<DVector<f64>> + Sync),
) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut uf = UnionFind::new(n);

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (&points[i] - &points[j]).norm();
            if d <= cluster_radius {
                uf.union(i, j);
            } else if kernel_dims[i] == kernel_dims[j] && kernel_dims[i] > 0 {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));

    // Chord probes, nearest pairs first; a few failures between the same two
    // clusters rule the join out.
    let mut failures: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (d, i, j) in pairs {
        let (ri, rj) = (uf.find(i), uf.find(j));
        if ri == rj {
            continue;
        }
        let key = (ri.min(rj), ri.max(rj));
        if *failures.get(&key).unwrap_or(&0) >= 5 {
            continue;
        }
        if chord_connects(&points[i], &points[j], d, refine_flat) {
            uf.union(i, j);
        } else {
            *failures.entry(key).or_insert(0) += 1;
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Walks the straight chord from `x` to `y` in steps of [`tol::BRIDGE_STEP`],
/// projecting each interior point onto the solution set.  Connection holds
/// when every projection converges and consecutive projected points never
/// jump by more than [`tol::BRIDGE_GAP`].
fn chord_connects(
    x: &DVector<f64>,
    y: &DVector<f64>,
    dist: f64,
    refine_flat: &(dyn Fn(&DVector<f64>) -> Option<DVector<f64>> + Sync),
) -> bool {
    let steps = (dist / tol::BRIDGE_STEP).ceil() as usize;
    let mut prev = x.clone();
    for s in 1..steps {
        let t = s as f64 / steps as f64;
        let mid = x * (1.0 - t) + y * t;
        let Some(z) = refine_flat(&mid) else {
            return false;
        };
        if (&z - &prev).norm() > tol::BRIDGE_GAP {
            return false;
        }
        prev = z;
    }
    (y - &prev).norm() <= tol::BRIDGE_GAP.max(tol::BRIDGE_STEP * 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Isolated,
    Sphere,
    ThreeSphereLike,
    Family,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Isolated => "isolated",
            Classification::Sphere => "sphere",
            Classification::ThreeSphereLike => "three-sphere-like",
            Classification::Family => "family",
        }
    }

    /// Euler characteristic of the model space, when one is pinned down.
    pub fn euler(&self) -> Option<i64> {
        match self {
            Classification::Isolated => Some(1),
            Classification::Sphere => Some(2),
            Classification::ThreeSphereLike => Some(0),
            Classification::Family => None,
        }
    }

    /// Total Betti rank of the model space.
    pub fn betti_rank(&self) -> Option<u64> {
        match self {
            Classification::Isolated => Some(1),
            Classification::Sphere => Some(2),
            Classification::ThreeSphereLike => Some(2),
            Classification::Family => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Component {
    pub dimension: usize,
    pub classification: Classification,
    /// Traces of the handle slots at the representative sample.
    pub trace_signature: Vec<f64>,
    /// Whether every sample matches the representative signature.
    pub signature_constant: bool,
    /// Fraction of samples sharing the modal kernel dimension.
    pub dimension_agreement: f64,
    /// Local dimension re-estimated by perturb-and-refine probing.
    pub probe_dimension: usize,
    /// Ascending indices into the owning solution set.
    pub samples: Vec<usize>,
}

impl Component {
    pub fn representative_index(&self) -> usize {
        self.samples[0]
    }
}

#[derive(Debug, Clone)]
pub struct ComponentReport {
    pub solutions: SolutionSet,
    pub components: Vec<Component>,
}

impl ComponentReport {
    pub fn count_by(&self, c: Classification) -> usize {
        self.components.iter().filter(|comp| comp.classification == c).count()
    }

    pub fn component_of_sample(&self, sample: usize) -> Option<usize> {
        self.components.iter().position(|c| c.samples.binary_search(&sample).is_ok())
    }
}

fn modal_dimension(dims: &[usize]) -> (usize, f64) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for d in dims {
        *counts.entry(*d).or_insert(0) += 1;
    }
    let (modal, count) =
        counts.into_iter().max_by_key(|(dim, count)| (*count, usize::MAX - *dim)).expect("nonempty");
    (modal, count as f64 / dims.len() as f64)
}

/// Local dimension estimate at `base`: kick the point along random tangent
/// directions, refine back onto the solution set, and take the rank of the
/// displacement matrix.
fn probe_dimension(
    sys: &ConstraintSystem,
    base: &[Su2],
    cfg: &SolverConfig,
    probes: usize,
    seed: u64,
) -> usize {
    if base.is_empty() {
        return 0;
    }
    let kick = 1e-3;
    let base_flat = flatten(base);
    let mut displacements = DMatrix::zeros(probes, base_flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut kept = 0;
    for _ in 0..probes {
        let step = DVector::from_iterator(
            3 * base.len(),
            (0..3 * base.len()).map(|_| kick * rand::Rng::gen_range(&mut rng, -1.0..1.0)),
        );
        let kicked = sys.apply_step(&base.to_vec(), &step);
        let refined = lm::refine(sys, kicked, cfg.converge_tol, cfg.max_iterations);
        if !refined.converged {
            continue;
        }
        let delta = flatten(&refined.point) - &base_flat;
        displacements.set_row(kept, &delta.transpose());
        kept += 1;
    }
    if kept == 0 {
        return 0;
    }
    let displacements = displacements.rows(0, kept).into_owned();
    let svd = displacements.svd(false, false);
    svd.singular_values.iter().filter(|s| **s > 0.05 * kick).count()
}

/// Groups solution samples into connected components and classifies each by
/// dimension and trace behavior.
pub fn cluster_components(s: &SolutionSet, cfg: &SolverConfig) -> Result<ComponentReport> {
    let sys = ConstraintSystem::new(&s.diagram)?;
    let flats: Vec<DVector<f64>> = s.points.iter().map(|p| flatten(p)).collect();
    let refine_flat = |v: &DVector<f64>| -> Option<DVector<f64>> {
        let start = unflatten(v)?;
        let out = lm::refine(&sys, start, cfg.converge_tol, cfg.max_iterations);
        out.converged.then(|| flatten(&out.point))
    };
    let groups = cluster_flat(&flats, &s.kernel_dims, cfg.cluster_radius, &refine_flat);

    let mut components = Vec::with_capacity(groups.len());
    for samples in groups {
        let dims: Vec<usize> = samples.iter().map(|&i| s.kernel_dims[i]).collect();
        let (dimension, dimension_agreement) = modal_dimension(&dims);
        let rep = samples[0];
        let trace_signature: Vec<f64> = s.points[rep].iter().map(|q| q.trace()).collect();
        let signature_constant = samples.iter().all(|&i| {
            s.points[i]
                .iter()
                .zip(&trace_signature)
                .all(|(q, t)| (q.trace() - t).abs() <= tol::SIGNATURE_SPREAD)
        });
        let classification = match dimension {
            0 => Classification::Isolated,
            2 if signature_constant => Classification::Sphere,
            3 => Classification::ThreeSphereLike,
            _ => Classification::Family,
        };
        let probe = probe_dimension(&sys, &s.points[rep], cfg, 20, cfg.seed);
        components.push(Component {
            dimension,
            classification,
            trace_signature,
            signature_constant,
            dimension_agreement,
            probe_dimension: probe,
            samples,
        });
    }
    components.sort_by(|a, b| {
        (a.dimension, &a.trace_signature, a.samples[0])
            .partial_cmp(&(b.dimension, &b.trace_signature, b.samples[0]))
            .expect("signatures are finite")
    });
    Ok(ComponentReport { solutions: s.clone(), components })
}

/// How two clustered reports correspond under a map of handle slots.
#[derive(Debug, Clone)]
pub struct MatchReport {
    /// Component pairs (left index, right index) established by the map.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    /// Largest distance a mapped representative had to move to land on the
    /// other solution set, over both directions.
    pub max_displacement: f64,
    pub perfect: bool,
    pub notes: Vec<String>,
}

const MATCH_REPS: usize = 5;

/// Matches components of `left` and `right` through `slot_map`, which sends
/// handle slot `m` of the left diagram to slot `slot_map[m]` of the right.
/// Slots of the right diagram missing from the map are filled with the
/// identity (the value forced on standard stabilization handles).  Matching
/// is verified in both directions by projecting representative samples onto
/// the other solution set and requiring they land within `cluster_radius`.
pub fn match_reports(
    left: &ComponentReport,
    right: &ComponentReport,
    slot_map: &[usize],
    cfg: &SolverConfig,
) -> Result<MatchReport> {
    let left_slots = 2 * left.solutions.diagram.genus as usize;
    let right_slots = 2 * right.solutions.diagram.genus as usize;
    if slot_map.len() != left_slots {
        return Err(Error::Shape(format!(
            "slot map has {} entries for {} left handle slots",
            slot_map.len(),
            left_slots
        )));
    }
    let mut seen = vec![false; right_slots];
    for &m in slot_map {
        if m >= right_slots {
            return Err(Error::Shape(format!("slot map target {m} out of range")));
        }
        if seen[m] {
            return Err(Error::Shape(format!("slot map target {m} repeated")));
        }
        seen[m] = true;
    }

    let left_sys = ConstraintSystem::new(&left.solutions.diagram)?;
    let right_sys = ConstraintSystem::new(&right.solutions.diagram)?;
    let mut notes = Vec::new();
    let mut max_displacement = 0.0f64;

    let mut forward: Vec<Option<usize>> = Vec::with_capacity(left.components.len());
    for (li, comp) in left.components.iter().enumerate() {
        let mut target: Option<usize> = None;
        let mut ok = true;
        for &sample in comp.samples.iter().take(MATCH_REPS) {
            let x = &left.solutions.points[sample];
            let mut mapped = vec![Su2::IDENTITY; right_slots];
            for (m, &dst) in slot_map.iter().enumerate() {
                mapped[dst] = x[m];
            }
            let refined = lm::refine(&right_sys, mapped.clone(), cfg.converge_tol, cfg.max_iterations);
            if !refined.converged {
                notes.push(format!("left component {li}: mapped sample fails to solve the right system"));
                ok = false;
                break;
            }
            let disp = point_distance(&mapped, &refined.point);
            max_displacement = max_displacement.max(disp);
            if disp > cfg.cluster_radius {
                notes.push(format!(
                    "left component {li}: mapped sample sits {disp:.3e} away from the right solution set"
                ));
                ok = false;
                break;
            }
            let nearest = nearest_sample(&right.solutions, &refined.point);
            let assigned = right.component_of_sample(nearest).expect("every sample is clustered");
            match target {
                None => target = Some(assigned),
                Some(t) if t == assigned => {}
                Some(t) => {
                    notes.push(format!(
                        "left component {li}: representatives split between right components {t} and {assigned}"
                    ));
                    ok = false;
                    break;
                }
            }
        }
        forward.push(if ok { target } else { None });
    }

    // Reverse direction: restrict right samples to the mapped slots and
    // check the unmapped slots carry the fill value.
    let mut reverse: Vec<Option<usize>> = Vec::with_capacity(right.components.len());
    for (ri, comp) in right.components.iter().enumerate() {
        let mut target: Option<usize> = None;
        let mut ok = true;
        for &sample in comp.samples.iter().take(MATCH_REPS) {
            let y = &right.solutions.points[sample];
            for (dst, was_mapped) in seen.iter().enumerate() {
                if !was_mapped {
                    let d = y[dst].dist(&Su2::IDENTITY);
                    if d > cfg.cluster_radius {
                        notes.push(format!(
                            "right component {ri}: unmapped slot {dst} is {d:.3e} from the fill value"
                        ));
                        ok = false;
                    }
                }
            }
            if !ok {
                break;
            }
            let mut pulled = vec![Su2::IDENTITY; left_slots];
            for (m, &dst) in slot_map.iter().enumerate() {
                pulled[m] = y[dst];
            }
            let refined = lm::refine(&left_sys, pulled.clone(), cfg.converge_tol, cfg.max_iterations);
            if !refined.converged {
                notes.push(format!("right component {ri}: restricted sample fails the left system"));
                ok = false;
                break;
            }
            let disp = point_distance(&pulled, &refined.point);
            max_displacement = max_displacement.max(disp);
            if disp > cfg.cluster_radius {
                notes.push(format!(
                    "right component {ri}: restricted sample sits {disp:.3e} away from the left solution set"
                ));
                ok = false;
                break;
            }
            let nearest = nearest_sample(&left.solutions, &refined.point);
            let assigned = left.component_of_sample(nearest).expect("every sample is clustered");
            match target {
                None => target = Some(assigned),
                Some(t) if t == assigned => {}
                Some(_) => {
                    notes.push(format!("right component {ri}: representatives split between left components"));
                    ok = false;
                    break;
                }
            }
        }
        reverse.push(if ok { target } else { None });
    }

    let mut pairs = Vec::new();
    let mut unmatched_left = Vec::new();
    let mut unmatched_right: Vec<usize> = Vec::new();
    let mut perfect = true;
    for (li, fw) in forward.iter().enumerate() {
        match fw {
            Some(ri) => {
                let back = reverse.get(*ri).copied().flatten();
                if back != Some(li) {
                    perfect = false;
                    notes.push(format!(
                        "component pair ({li}, {ri}) is not mutual: reverse gives {back:?}"
                    ));
                }
                let (lc, rc) = (&left.components[li], &right.components[*ri]);
                if lc.dimension != rc.dimension {
                    perfect = false;
                    notes.push(format!(
                        "component pair ({li}, {ri}) has dimensions {} vs {}",
                        lc.dimension, rc.dimension
                    ));
                }
                if lc.signature_constant && rc.signature_constant {
                    for (m, &dst) in slot_map.iter().enumerate() {
                        if (lc.trace_signature[m] - rc.trace_signature[dst]).abs() > tol::SIGNATURE_SPREAD
                        {
                            perfect = false;
                            notes.push(format!(
                                "component pair ({li}, {ri}) disagrees on the trace of slot {m}"
                            ));
                        }
                    }
                }
                pairs.push((li, *ri));
            }
            None => {
                perfect = false;
                unmatched_left.push(li);
            }
        }
    }
    for (ri, rv) in reverse.iter().enumerate() {
        if rv.is_none() {
            perfect = false;
            unmatched_right.push(ri);
        }
    }
    {
        let mut targets: Vec<usize> = pairs.iter().map(|(_, r)| *r).collect();
        targets.sort_unstable();
        targets.dedup();
        if targets.len() != pairs.len() || targets.len() != right.components.len() {
            perfect = false;
        }
    }

    Ok(MatchReport { pairs, unmatched_left, unmatched_right, max_displacement, perfect, notes })
}

fn nearest_sample(s: &SolutionSet, point: &[Su2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (idx, candidate) in s.points.iter().enumerate() {
        let d = point_distance(candidate, point);
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolverConfig {
        SolverConfig { starts: Some(400), ..SolverConfig::with_seed(7) }
    }

    #[test]
    fn jacobians_agree_with_central_differences() {
        let d = HeegaardDiagram::lens(5, 2).unwrap();
        let sys = ConstraintSystem::new(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p: Vec<Su2> = (0..2).map(|_| Su2::random(&mut rng)).collect();
            let numeric = lm::numeric_jacobian(&sys, &p, tol::FD_STEP);
            let mut analytic = DMatrix::zeros(sys.residual_dim(), sys.tangent_dim());
            sys.jacobian(&p, &mut analytic);
            let err = (&numeric - &analytic).abs().max();
            assert!(err < 1e-5, "analytic and central-difference Jacobians differ by {err}");
        }
    }

    #[test]
    fn sphere_census_single_point_at_low_genus() {
        for genus in [0u16, 1] {
            let d = HeegaardDiagram::s3_genus(genus);
            let s = solve_intersection(&d, &cfg()).unwrap();
            assert_eq!(s.points.len(), 1, "genus {genus} sphere census");
            assert_eq!(s.kernel_dims, vec![0]);
        }
    }

    #[test]
    fn product_census_is_one_three_dimensional_component() {
        let d = HeegaardDiagram::s2xs1();
        let s = solve_intersection(&d, &cfg()).unwrap();
        assert!(s.points.len() > 100, "expected many samples, got {}", s.points.len());
        assert!(s.kernel_dims.iter().all(|&k| k == 3));
        let report = cluster_components(&s, &cfg()).unwrap();
        assert_eq!(report.components.len(), 1);
        let comp = &report.components[0];
        assert_eq!(comp.dimension, 3);
        assert_eq!(comp.classification, Classification::ThreeSphereLike);
        assert!(!comp.signature_constant, "the trace of B varies over the component");
        assert_eq!(comp.probe_dimension, 3);
    }

    #[test]
    fn small_lens_census_kernel_dims() {
        // L(5, 1): the trivial point is rigid, every other solution lies on
        // one of two 2-spheres of fifth roots of unity.
        let d = HeegaardDiagram::lens(5, 1).unwrap();
        let s = solve_intersection(&d, &cfg()).unwrap();
        for (p, k) in s.points.iter().zip(&s.kernel_dims) {
            if point_distance(p, &[Su2::IDENTITY, Su2::IDENTITY]) < 1e-6 {
                assert_eq!(*k, 0, "trivial point is isolated");
            } else {
                assert_eq!(*k, 2, "nontrivial solutions sample spheres");
            }
        }
        let report = cluster_components(&s, &cfg()).unwrap();
        assert_eq!(report.components.len(), 3);
        assert_eq!(report.count_by(Classification::Isolated), 1);
        assert_eq!(report.count_by(Classification::Sphere), 2);
        let mut traces: Vec<f64> = report
            .components
            .iter()
            .filter(|c| c.classification == Classification::Sphere)
            .map(|c| c.trace_signature[1])
            .collect();
        traces.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tau = 2.0 * std::f64::consts::PI / 5.0;
        let expected = [2.0 * (2.0 * tau).cos(), 2.0 * tau.cos()];
        for (got, want) in traces.iter().zip(expected) {
            assert!((got - want).abs() < 1e-8, "sphere trace {got} vs {want}");
        }
    }

    #[test]
    fn kernel_dim_rejects_non_solutions() {
        let d = HeegaardDiagram::lens(2, 1).unwrap();
        let err = jacobian_kernel_dim(&d, &[Su2::IDENTITY, Su2::I], &cfg());
        assert!(err.is_err());
        let ok = jacobian_kernel_dim(&d, &[Su2::IDENTITY, Su2::IDENTITY], &cfg()).unwrap();
        assert_eq!(ok, 0);
    }

    #[test]
    fn determinism_across_repeat_solves() {
        let d = HeegaardDiagram::lens(3, 1).unwrap();
        let a = solve_intersection(&d, &cfg()).unwrap();
        let b = solve_intersection(&d, &cfg()).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(
                p.iter().map(|x| x.as_array()).collect::<Vec<_>>(),
                q.iter().map(|x| x.as_array()).collect::<Vec<_>>(),
                "solves with one seed must agree bit for bit"
            );
        }
    }

    #[test]
    fn matching_identity_move() {
        let d = HeegaardDiagram::lens(3, 1).unwrap();
        let s = solve_intersection(&d, &cfg()).unwrap();
        let r = cluster_components(&s, &cfg()).unwrap();
        let m = match_reports(&r, &r, &[0, 1], &cfg()).unwrap();
        assert!(m.perfect, "self-match must be perfect: {:?}", m.notes);
        assert_eq!(m.pairs.len(), r.components.len());
    }
}
