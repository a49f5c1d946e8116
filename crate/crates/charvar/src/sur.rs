//! Higher-rank analogue of the census: handles in SU(r) and punctures in a
//! fixed conjugacy class cut out by an alcove label.
//!
//! The label with `j` eigenvalues `(r-j)/2r` and `r-j` eigenvalues `-j/2r`
//! generalizes the traceless class of the rank-two theory (`r = 2`, `j = 1`
//! recovers it).  The standing puncture data is `r + 1` punctures, all in
//! the `j = 1` class; at genus zero that system has a single solution up to
//! conjugation, which is what lets the solver pin the punctures once and
//! reduce higher genus to a plain word system in the handles.  Only the
//! `j = 1` class is solver-supported; general labels exist for bookkeeping
//! (`mu_label`, `sur_dimension`) and `require_admissible` refuses the rest.
//!
//! All solving happens inside SU(r): starts are special unitary, tangent
//! steps exponentiate the traceless antihermitian basis, and projections
//! restore both unitarity and unit determinant, so determinant conditions
//! are enforced structurally rather than as residuals.

use crate::diagram::{HeegaardDiagram, StandardFamily};
use crate::error::{Error, Result};
use crate::lm::{self, ManifoldProblem};
use crate::report::{all_pass, canonical_json, Check};
use crate::solver::{cluster_flat, init_thread_pool, SolverConfig};
use crate::tol;
use crate::word::FreeWord;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Mutex;

pub type CMat = DMatrix<Complex64>;

/// Eigenvalue label of a puncture class, stored as integer numerators over
/// `2r` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlcoveLabel {
    pub r: u32,
    pub numerators: Vec<i64>,
}

impl AlcoveLabel {
    /// The class with `j` eigenvalues `(r-j)/2r` and `r-j` eigenvalues
    /// `-j/2r`; requires `1 <= j < r`.
    pub fn mu_label(r: u32, j: u32) -> Result<AlcoveLabel> {
        if r < 2 {
            return Err(Error::InvalidParameter(format!("rank must be at least 2, got {r}")));
        }
        if j == 0 || j >= r {
            return Err(Error::InvalidParameter(format!(
                "class index must satisfy 1 <= j < r, got {j}"
            )));
        }
        let mut numerators = vec![-(j as i64); (r - j) as usize];
        numerators.extend(std::iter::repeat((r - j) as i64).take(j as usize));
        Ok(AlcoveLabel { r, numerators })
    }

    /// The trivial label: every eigenvalue angle zero.
    pub fn zero(r: u32) -> AlcoveLabel {
        AlcoveLabel { r, numerators: vec![0; r as usize] }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.numerators.iter().map(|n| *n as f64 / (2.0 * self.r as f64)).collect()
    }

    pub fn class_trace(&self) -> Complex64 {
        self.lambdas()
            .iter()
            .map(|l| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l))
            .sum()
    }

    /// Index of a fundamental coweight congruent to `2(r+1)` times the
    /// label, when one exists with index coprime to the rank.  The integer
    /// form of the condition: every numerator is congruent to `-d` mod `r`.
    pub fn coweight_witness(&self) -> Option<u32> {
        let r = self.r as i64;
        (1..self.r)
            .filter(|d| gcd(*d as u64, self.r as u64) == 1)
            .find(|d| self.numerators.iter().all(|n| (n + *d as i64).rem_euclid(r) == 0))
    }

    pub fn is_admissible(&self) -> bool {
        self.coweight_witness().is_some()
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Diagonal representative `diag(e^{2 pi i lambda_k})` of a label's class.
pub fn class_representative(label: &AlcoveLabel) -> CMat {
    let r = label.r as usize;
    let mut m = CMat::zeros(r, r);
    for (k, l) in label.lambdas().iter().enumerate() {
        m[(k, k)] = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l);
    }
    m
}

/// Expected dimension of the moduli space with `r + 1` punctures in the
/// class labeled by `j`; for `j = 1` this collapses to `2g(r^2 - 1)`.
pub fn sur_dimension(r: u32, j: u32, genus: u16) -> Result<i64> {
    AlcoveLabel::mu_label(r, j)?;
    let r = r as i64;
    let g = genus as i64;
    let j = j as i64;
    Ok((2 * g - 2) * (r * r - 1) + 2 * j * (r + 1) * (r - j))
}

/// Checks the coweight condition for a label and returns the witness index,
/// refusing labels the solver contract does not cover.
pub fn require_admissible(label: &AlcoveLabel) -> Result<u32> {
    label.coweight_witness().ok_or_else(|| {
        Error::Smoothness(format!(
            "label {:?} of rank {} fails the coweight condition; only admissible classes are solved",
            label.numerators, label.r
        ))
    })
}

pub fn identity_c(r: usize) -> CMat {
    CMat::identity(r, r)
}

pub fn frobenius_dist(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}

/// Matrix exponential by scaling and squaring with a Taylor tail.
pub fn matrix_exp(m: &CMat) -> CMat {
    let norm = m.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let r = m.nrows();
    let mut out = identity_c(r);
    let mut term = identity_c(r);
    for k in 1..64 {
        term = (&term * &scaled) / Complex64::new(k as f64, 0.0);
        out += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Nearest special unitary matrix: polar factor with the determinant phase
/// spread evenly across the spectrum.  `None` when the input is too singular
/// for the projection to be meaningful.
pub fn special_unitary_project(m: &CMat) -> Option<CMat> {
    let svd = m.clone().svd(true, true);
    if svd.singular_values.iter().any(|s| *s < 0.3) {
        return None;
    }
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let mut q = u * v_t;
    let det = det_c(&q);
    let phase = det.arg() / q.nrows() as f64;
    q *= Complex64::from_polar(1.0, -phase);
    Some(q)
}

fn det_c(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

pub fn is_special_unitary(m: &CMat, tol: f64) -> bool {
    let r = m.nrows();
    (m.adjoint() * m - identity_c(r)).norm() <= tol
        && (det_c(m) - Complex64::new(1.0, 0.0)).norm() <= tol
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the log argument is kept away from zero.
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

/// Haar-distributed special unitary matrix: QR of a complex Gaussian with
/// the R-diagonal phases absorbed, then the determinant fixed.
pub fn random_special_unitary(r: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(r, r, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let rm = qr.r();
    let mut q = qr.q();
    for k in 0..r {
        let d = rm[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..r {
            q[(row, k)] *= phase;
        }
    }
    let det = det_c(&q);
    q * Complex64::from_polar(1.0, -det.arg() / r as f64)
}

/// A matrix near a random center element `zeta^k I` of SU(r).  Haar sampling
/// almost never lands close to the center (eigenvalue repulsion starves those
/// neighborhoods), so solutions with fully degenerate spectrum need their own
/// start block.
pub fn near_central_unitary(r: usize, rng: &mut ChaCha8Rng) -> CMat {
    let k = rng.gen_range(0..r);
    let phase = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / r as f64);
    let basis = su_basis(r);
    let coeffs: Vec<f64> = basis.iter().map(|_| 0.15 * gaussian(rng)).collect();
    let m = matrix_exp(&step_to_su_algebra(&basis, &coeffs, r)) * phase;
    special_unitary_project(&m).unwrap_or(m)
}

/// Orthonormal basis of traceless antihermitian matrices: rotation and phase
/// pairs on each off-diagonal position, then diagonal differences.
pub fn su_basis(r: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(r * r - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for row in 0..r {
        for col in (row + 1)..r {
            let mut m = CMat::zeros(r, r);
            m[(row, col)] = Complex64::new(s, 0.0);
            m[(col, row)] = Complex64::new(-s, 0.0);
            basis.push(m);
            let mut m = CMat::zeros(r, r);
            m[(row, col)] = Complex64::new(0.0, s);
            m[(col, row)] = Complex64::new(0.0, s);
            basis.push(m);
        }
    }
    for k in 1..r {
        // i * diag(1, ..., 1, -k, 0, ..., 0), normalized.
        let scale = 1.0 / ((k * k + k) as f64).sqrt();
        let mut m = CMat::zeros(r, r);
        for d in 0..k {
            m[(d, d)] = Complex64::new(0.0, scale);
        }
        m[(k, k)] = Complex64::new(0.0, -(k as f64) * scale);
        basis.push(m);
    }
    basis
}

/// Flattens a tuple of complex matrices into interleaved real coordinates.
pub fn flatten_tuple(ms: &[CMat]) -> DVector<f64> {
    let r = ms.first().map_or(0, |m| m.nrows());
    let mut out = DVector::zeros(ms.len() * 2 * r * r);
    let mut idx = 0;
    for m in ms {
        for c in m.iter() {
            out[idx] = c.re;
            out[idx + 1] = c.im;
            idx += 2;
        }
    }
    out
}

fn unflatten_tuple(v: &DVector<f64>, slots: usize, r: usize) -> Option<Vec<CMat>> {
    let len = 2 * r * r;
    let mut out = Vec::with_capacity(slots);
    for s in 0..slots {
        let base = s * len;
        let m = CMat::from_fn(r, r, |row, col| {
            let k = base + 2 * (col * r + row);
            Complex64::new(v[k], v[k + 1])
        });
        out.push(special_unitary_project(&m)?);
    }
    Some(out)
}

pub fn tuple_distance(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

fn step_to_su_algebra(basis: &[CMat], coeffs: &[f64], r: usize) -> CMat {
    let mut x = CMat::zeros(r, r);
    for (a, b) in coeffs.iter().zip(basis) {
        x += b * Complex64::new(*a, 0.0);
    }
    x
}

/// Least squares for one unitary conjugating every pair at once:
/// `M A_i M^{-1} = B_i`.
struct ConjugacyProblem {
    pairs: Vec<(CMat, CMat)>,
    basis: Vec<CMat>,
}

impl ManifoldProblem for ConjugacyProblem {
    type Point = CMat;

    fn residual_dim(&self) -> usize {
        let r = self.pairs[0].0.nrows();
        2 * r * r * self.pairs.len()
    }

    fn tangent_dim(&self) -> usize {
        self.basis.len()
    }

    fn residual(&self, u: &CMat, out: &mut DVector<f64>) {
        let r = self.pairs[0].0.nrows();
        for (p, (a, b)) in self.pairs.iter().enumerate() {
            let d = u * a * u.adjoint() - b;
            for (k, c) in d.iter().enumerate() {
                out[2 * (p * r * r + k)] = c.re;
                out[2 * (p * r * r + k) + 1] = c.im;
            }
        }
    }

    fn jacobian(&self, u: &CMat, out: &mut DMatrix<f64>) {
        out.copy_from(&lm::numeric_jacobian(self, u, tol::FD_STEP));
    }

    fn apply_step(&self, u: &CMat, step: &DVector<f64>) -> CMat {
        let r = u.nrows();
        let x = step_to_su_algebra(&self.basis, step.as_slice(), r);
        let moved = u * matrix_exp(&x);
        special_unitary_project(&moved).unwrap_or(moved)
    }
}

const CONJUGACY_RESTARTS: usize = 50;

/// Decides whether two tuples of unitary matrices are simultaneously
/// conjugate inside the unitary group.
///
/// Three stages: per-matrix power traces must agree (they are conjugation
/// invariants), then the stacked Kronecker relaxation of `U A_i = B_i U`
/// either certifies impossibility or proposes a candidate, and finally the
/// candidate is projected to the group and polished by least squares, with
/// seeded random restarts as a backstop.  The certificate: the smallest
/// singular value of the stacked system times `sqrt(r)` bounds the
/// conjugation defect over all unitaries from below, because every unitary
/// vectorizes to a vector of norm exactly `sqrt(r)`.
pub fn unitary_conjugacy_test(a: &[CMat], b: &[CMat], tol: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "conjugacy test needs tuples of one length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(true);
    }
    let r = a[0].nrows();
    for m in a.iter().chain(b) {
        if m.nrows() != r || m.ncols() != r {
            return Err(Error::Shape("conjugacy test needs square matrices of one size".into()));
        }
        if (m.adjoint() * m - identity_c(r)).norm() > 1e-8 {
            return Err(Error::InvalidElement("conjugacy test input is not unitary".into()));
        }
    }

    for (x, y) in a.iter().zip(b) {
        let mut px = identity_c(r);
        let mut py = identity_c(r);
        for _ in 0..r {
            px = &px * x;
            py = &py * y;
            if (px.trace() - py.trace()).norm() > 1e-3 {
                return Ok(false);
            }
        }
    }

    let stacked = {
        let mut s = CMat::zeros(r * r * a.len(), r * r);
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let block = x.transpose().kronecker(&identity_c(r)) - identity_c(r).kronecker(y);
            s.view_mut((i * r * r, 0), (r * r, r * r)).copy_from(&block);
        }
        s
    };
    let svd = stacked.svd(false, true);
    let mut smallest = 0;
    for i in 1..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[smallest] {
            smallest = i;
        }
    }
    if svd.singular_values[smallest] * (r as f64).sqrt() > tol {
        return Ok(false);
    }
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let vec_u = v_t.row(smallest).adjoint();
    let candidate = CMat::from_fn(r, r, |row, col| vec_u[col * r + row]);

    let problem = ConjugacyProblem {
        pairs: a.iter().cloned().zip(b.iter().cloned()).collect(),
        basis: su_basis(r),
    };
    if let Some(u) = special_unitary_project(&candidate) {
        let polished = lm::refine(&problem, u, tol::CONVERGE, tol::MAX_ITERATIONS);
        if polished.residual <= tol {
            return Ok(true);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x636f6e6a);
    for _ in 0..CONJUGACY_RESTARTS {
        let start = random_special_unitary(r, &mut rng);
        let polished = lm::refine(&problem, start, tol::CONVERGE, tol::MAX_ITERATIONS);
        if polished.residual <= tol {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The genus-zero puncture system: `r + 1` factors in the `j = 1` class
/// with product one, each factor parametrized as a conjugate of the
/// diagonal class representative so membership is structural.
struct ClassTupleProblem {
    rep: CMat,
    basis: Vec<CMat>,
    factors: usize,
}

impl ClassTupleProblem {
    fn new(r: u32) -> Result<ClassTupleProblem> {
        let label = AlcoveLabel::mu_label(r, 1)?;
        Ok(ClassTupleProblem {
            rep: class_representative(&label),
            basis: su_basis(r as usize),
            factors: r as usize + 1,
        })
    }

    fn punctures(&self, us: &[CMat]) -> Vec<CMat> {
        us.iter().map(|u| u * &self.rep * u.adjoint()).collect()
    }
}

impl ManifoldProblem for ClassTupleProblem {
    type Point = Vec<CMat>;

    fn residual_dim(&self) -> usize {
        2 * self.rep.nrows() * self.rep.nrows()
    }

    fn tangent_dim(&self) -> usize {
        self.factors * self.basis.len()
    }

    fn residual(&self, us: &Vec<CMat>, out: &mut DVector<f64>) {
        let r = self.rep.nrows();
        let mut prod = identity_c(r);
        for c in self.punctures(us) {
            prod = &prod * &c;
        }
        prod -= identity_c(r);
        for (k, c) in prod.iter().enumerate() {
            out[2 * k] = c.re;
            out[2 * k + 1] = c.im;
        }
    }

    fn jacobian(&self, us: &Vec<CMat>, out: &mut DMatrix<f64>) {
        out.copy_from(&lm::numeric_jacobian(self, us, tol::FD_STEP));
    }

    fn apply_step(&self, us: &Vec<CMat>, step: &DVector<f64>) -> Vec<CMat> {
        let n = self.basis.len();
        let r = self.rep.nrows();
        us.iter()
            .enumerate()
            .map(|(s, u)| {
                let x = step_to_su_algebra(&self.basis, &step.as_slice()[s * n..(s + 1) * n], r);
                let moved = u * matrix_exp(&x);
                special_unitary_project(&moved).unwrap_or(moved)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Genus0Report {
    pub r: u32,
    /// Number of punctures, always `r + 1`.
    pub punctures: usize,
    pub converged: usize,
    pub orbit_count: usize,
    pub orbit_dimension: usize,
    pub expected_orbit_dimension: usize,
    pub max_residual: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Genus0Report {
    pub fn to_value(&self) -> Value {
        json!({
            "rank": self.r,
            "punctures": self.punctures,
            "converged": self.converged,
            "orbit_count": self.orbit_count,
            "orbit_dimension": self.orbit_dimension,
            "expected_orbit_dimension": self.expected_orbit_dimension,
            "max_residual": self.max_residual,
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        })
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(&self.to_value())
    }
}

const GENUS0_STARTS: usize = 48;

/// Solves `C_1 ... C_{r+1} = 1` with every factor in the `j = 1` class and
/// checks there is exactly one solution up to conjugation, with the
/// conjugation orbit as the only degrees of freedom.
pub fn genus0_uniqueness(r: u32, cfg: &SolverConfig) -> Result<Genus0Report> {
    init_thread_pool();
    let problem = ClassTupleProblem::new(r)?;
    let rr = r as usize;
    let starts = cfg.starts.unwrap_or(GENUS0_STARTS);
    let seed = cfg.seed;

    let outcomes: Vec<lm::RefineOutcome<Vec<CMat>>> = (0..starts)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let start: Vec<CMat> =
                (0..problem.factors).map(|_| random_special_unitary(rr, &mut rng)).collect();
            lm::refine(&problem, start, tol::CONVERGE, tol::MAX_ITERATIONS)
        })
        .collect();

    let mut orbit_reps: Vec<Vec<CMat>> = Vec::new();
    let mut converged = 0;
    let mut max_residual = 0.0f64;
    for out in &outcomes {
        if !out.converged {
            continue;
        }
        converged += 1;
        max_residual = max_residual.max(out.residual);
        let cs = problem.punctures(&out.point);
        let mut known = false;
        for existing in &orbit_reps {
            if unitary_conjugacy_test(&cs, existing, 1e-6)? {
                known = true;
                break;
            }
        }
        if !known {
            orbit_reps.push(cs);
        }
    }
    if orbit_reps.is_empty() {
        return Err(Error::Configuration("no converged puncture tuple found".to_string()));
    }

    // Orbit dimension by perturb-and-refine displacement rank at the first
    // solution: kicked starts land back on the orbit, so the displacements
    // span its tangent space.
    let base = outcomes
        .iter()
        .find(|o| o.converged)
        .expect("a converged start exists")
        .point
        .clone();
    let base_flat = flatten_tuple(&problem.punctures(&base));
    let kick = 1e-3;
    let probes = 2 * rr * rr + 6;
    let mut displacements = DMatrix::zeros(probes, base_flat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b9);
    let mut kept = 0;
    for _ in 0..probes {
        let step = DVector::from_iterator(
            problem.tangent_dim(),
            (0..problem.tangent_dim()).map(|_| kick * rng.gen_range(-1.0..1.0)),
        );
        let kicked = problem.apply_step(&base, &step);
        let refined = lm::refine(&problem, kicked, tol::CONVERGE, tol::MAX_ITERATIONS);
        if !refined.converged {
            continue;
        }
        let delta = flatten_tuple(&problem.punctures(&refined.point)) - &base_flat;
        displacements.set_row(kept, &delta.transpose());
        kept += 1;
    }
    let orbit_dimension = if kept == 0 {
        0
    } else {
        let svd = displacements.rows(0, kept).into_owned().svd(false, false);
        svd.singular_values.iter().filter(|s| **s > 0.05 * kick).count()
    };
    let expected_orbit_dimension = (r * r - 1) as usize;

    let checks = vec![
        Check::new(
            "puncture tuples exist",
            converged > 0,
            format!("{converged} converged of {starts} starts"),
        ),
        Check::new(
            "single conjugation orbit",
            orbit_reps.len() == 1,
            format!("{} orbits found", orbit_reps.len()),
        ),
        Check::new(
            "orbit dimension",
            orbit_dimension == expected_orbit_dimension,
            format!("probed {orbit_dimension}, expected {expected_orbit_dimension}"),
        ),
        Check::new(
            "residuals at roundoff",
            max_residual <= 1e-6,
            format!("max residual {max_residual:.3e}"),
        ),
    ];
    let pass = all_pass(&checks);
    Ok(Genus0Report {
        r,
        punctures: problem.factors,
        converged,
        orbit_count: orbit_reps.len(),
        orbit_dimension,
        expected_orbit_dimension,
        max_residual,
        checks,
        pass,
    })
}

/// Cached genus-zero puncture tuple for a rank, with the last puncture
/// replaced by the exact inverse of the product of the others so the pinned
/// product is the identity to the last bit.
pub fn pinned_punctures(r: u32) -> Result<Vec<CMat>> {
    static CACHE: Mutex<BTreeMap<u32, Vec<(Vec<f64>, Vec<f64>)>>> = Mutex::new(BTreeMap::new());
    if let Some(stored) = CACHE.lock().expect("cache lock").get(&r) {
        let rr = r as usize;
        return Ok(stored
            .iter()
            .map(|(re, im)| {
                CMat::from_fn(rr, rr, |row, col| {
                    Complex64::new(re[col * rr + row], im[col * rr + row])
                })
            })
            .collect());
    }

    let problem = ClassTupleProblem::new(r)?;
    let rr = r as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x70696e);
    let mut found: Option<Vec<CMat>> = None;
    for _ in 0..400 {
        let start: Vec<CMat> =
            (0..problem.factors).map(|_| random_special_unitary(rr, &mut rng)).collect();
        let out = lm::refine(&problem, start, tol::CONVERGE, tol::MAX_ITERATIONS);
        if out.converged {
            let mut cs = problem.punctures(&out.point);
            let head =
                cs[..problem.factors - 1].iter().fold(identity_c(rr), |acc, c| &acc * c);
            cs[problem.factors - 1] = head.adjoint();
            found = Some(cs);
            break;
        }
    }
    let cs = found
        .ok_or_else(|| Error::Configuration(format!("no puncture tuple converged for rank {r}")))?;
    let stored: Vec<(Vec<f64>, Vec<f64>)> = cs
        .iter()
        .map(|m| (m.iter().map(|c| c.re).collect(), m.iter().map(|c| c.im).collect()))
        .collect();
    CACHE.lock().expect("cache lock").insert(r, stored);
    Ok(cs)
}

/// Word-holonomy system over SU(r) tuples: attaching words then the handle
/// commutator relator, exactly as in the rank-two solver.  The puncture
/// block contributes nothing because the pinned product is one.
pub struct SurSystem {
    r: usize,
    words: Vec<FreeWord>,
    basis: Vec<CMat>,
    slots: usize,
}

impl SurSystem {
    pub fn new(diagram: &HeegaardDiagram, r: u32) -> Result<SurSystem> {
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
        words.push(crate::moduli::pinned_relator(diagram.genus));
        Ok(SurSystem {
            r: r as usize,
            words,
            basis: su_basis(r as usize),
            slots: 2 * diagram.genus as usize,
        })
    }

    fn word_holonomy(&self, word: &FreeWord, p: &[CMat]) -> CMat {
        let mut acc = identity_c(self.r);
        for l in word.letters() {
            let q = &p[(l.gen - 1) as usize];
            if l.sign > 0 {
                acc = &acc * q;
            } else {
                acc = &acc * &q.adjoint();
            }
        }
        acc
    }
}

impl ManifoldProblem for SurSystem {
    type Point = Vec<CMat>;

    fn residual_dim(&self) -> usize {
        2 * self.r * self.r * self.words.len()
    }

    fn tangent_dim(&self) -> usize {
        self.basis.len() * self.slots
    }

    fn residual(&self, p: &Vec<CMat>, out: &mut DVector<f64>) {
        let block = 2 * self.r * self.r;
        for (w, word) in self.words.iter().enumerate() {
            let h = self.word_holonomy(word, p) - identity_c(self.r);
            for (k, c) in h.iter().enumerate() {
                out[w * block + 2 * k] = c.re;
                out[w * block + 2 * k + 1] = c.im;
            }
        }
    }

    fn jacobian(&self, p: &Vec<CMat>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        let block = 2 * self.r * self.r;
        let nb = self.basis.len();
        for (widx, word) in self.words.iter().enumerate() {
            let letters = word.letters();
            let len = letters.len();
            let mut factors: Vec<CMat> = Vec::with_capacity(len);
            for l in letters {
                let q = &p[(l.gen - 1) as usize];
                factors.push(if l.sign > 0 { q.clone() } else { q.adjoint() });
            }
            let mut prefix = vec![identity_c(self.r); len + 1];
            for t in 0..len {
                prefix[t + 1] = &prefix[t] * &factors[t];
            }
            let mut suffix = vec![identity_c(self.r); len + 1];
            for t in (0..len).rev() {
                suffix[t] = &factors[t] * &suffix[t + 1];
            }
            for (t, l) in letters.iter().enumerate() {
                let slot = (l.gen - 1) as usize;
                let q = &p[slot];
                for (u, x) in self.basis.iter().enumerate() {
                    let mid = if l.sign > 0 { q * x } else { -(x * &q.adjoint()) };
                    let d = &(&prefix[t] * &mid) * &suffix[t + 1];
                    let col = slot * nb + u;
                    for (k, c) in d.iter().enumerate() {
                        out[(widx * block + 2 * k, col)] += c.re;
                        out[(widx * block + 2 * k + 1, col)] += c.im;
                    }
                }
            }
        }
    }

    fn apply_step(&self, p: &Vec<CMat>, step: &DVector<f64>) -> Vec<CMat> {
        let nb = self.basis.len();
        p.iter()
            .enumerate()
            .map(|(s, q)| {
                let x =
                    step_to_su_algebra(&self.basis, &step.as_slice()[s * nb..(s + 1) * nb], self.r);
                let moved = q * matrix_exp(&x);
                special_unitary_project(&moved).unwrap_or(moved)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SurComponent {
    pub dimension: usize,
    pub classification: &'static str,
    /// Complex slot traces of the representative, as (re, im) pairs.
    pub trace_signature: Vec<(f64, f64)>,
    pub dimension_agreement: f64,
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SurCensusReport {
    pub diagram: HeegaardDiagram,
    pub r: u32,
    pub points: Vec<Vec<CMat>>,
    pub kernel_dims: Vec<usize>,
    pub components: Vec<SurComponent>,
    pub attempted_starts: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SurCensusReport {
    pub fn to_value(&self) -> Result<Value> {
        Ok(json!({
            "diagram": self.diagram.to_json_value()?,
            "rank": self.r,
            "seed": self.seed,
            "starts": self.attempted_starts,
            "distinct_solutions": self.points.len(),
            "components": self.components.iter().map(|c| json!({
                "classification": c.classification,
                "dim": c.dimension,
                "samples": c.samples.len(),
                "trace_signature": c.trace_signature.iter()
                    .map(|(re, im)| json!([re, im])).collect::<Vec<_>>(),
                "dimension_agreement": c.dimension_agreement,
            })).collect::<Vec<_>>(),
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        }))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(canonical_json(&self.to_value()?))
    }
}

/// Eigenvalue multisets of `p`-th roots of unity in SU(r): ascending tuples
/// `k_1 <= ... <= k_r` modulo `p` with zero sum.  These enumerate the
/// conjugacy classes available to the second handle of a lens census.
pub fn lens_root_multisets(p: u64, r: u32) -> Vec<Vec<u64>> {
    fn rec(p: u64, remaining: u32, min: u64, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if remaining == 0 {
            if acc.iter().sum::<u64>() % p == 0 {
                out.push(acc.clone());
            }
            return;
        }
        for k in min..p {
            acc.push(k);
            rec(p, remaining - 1, k, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, r, 0, &mut Vec::new(), &mut out);
    out
}

/// Complex trace of the class with root exponents `ks` over `p`.
pub fn multiset_trace(p: u64, ks: &[u64]) -> Complex64 {
    ks.iter()
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * *k as f64 / p as f64))
        .sum()
}

fn default_sur_starts(genus: u16) -> usize {
    400usize << genus.min(16)
}

/// Higher-rank census: solve the pinned word system over SU(r) tuples and
/// classify the components.  Puncture data is `r + 1` punctures in the
/// `j = 1` class, pinned to the cached genus-zero solution.
pub fn solve_sur(diagram: &HeegaardDiagram, r: u32, cfg: &SolverConfig) -> Result<SurCensusReport> {
    init_thread_pool();
    let label = AlcoveLabel::mu_label(r, 1)?;
    require_admissible(&label)?;
    // The pinned punctures exist and multiply to one exactly; the handle
    // system below depends on them only through that product.
    let _ = pinned_punctures(r)?;

    let sys = SurSystem::new(diagram, r)?;
    let genus = diagram.genus;
    let rr = r as usize;
    let slots = 2 * genus as usize;

    if genus == 0 {
        let checks = vec![Check::new(
            "single pinned point",
            true,
            "no handles: the census is the pinned puncture tuple".to_string(),
        )];
        return Ok(SurCensusReport {
            diagram: diagram.clone(),
            r,
            points: vec![Vec::new()],
            kernel_dims: vec![0],
            components: vec![SurComponent {
                dimension: 0,
                classification: "isolated",
                trace_signature: Vec::new(),
                dimension_agreement: 1.0,
                samples: vec![0],
            }],
            attempted_starts: 1,
            seed: cfg.seed,
            checks,
            pass: true,
        });
    }

    let starts = cfg.starts.unwrap_or_else(|| default_sur_starts(genus));
    let outcomes: Vec<lm::RefineOutcome<Vec<CMat>>> = (0..starts)
        .into_par_iter()
        .map(|idx| {
            let start: Vec<CMat> = if idx == 0 {
                vec![identity_c(rr); slots]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                if idx <= starts / 8 {
                    (0..slots).map(|_| near_central_unitary(rr, &mut rng)).collect()
                } else {
                    (0..slots).map(|_| random_special_unitary(rr, &mut rng)).collect()
                }
            };
            lm::refine(&sys, start, cfg.converge_tol, cfg.max_iterations)
        })
        .collect();

    let mut points: Vec<Vec<CMat>> = Vec::new();
    for out in outcomes {
        if !out.converged {
            continue;
        }
        if points.iter().all(|kept| tuple_distance(kept, &out.point) > cfg.dedup_radius) {
            points.push(out.point);
        }
    }
    let theta = vec![identity_c(rr); slots];
    if !points.iter().any(|p| tuple_distance(p, &theta) <= cfg.dedup_radius) {
        return Err(Error::Configuration("trivial solution missing from solve".to_string()));
    }

    let kernel_dims: Vec<usize> = points
        .par_iter()
        .map(|p| {
            let jac = lm::numeric_jacobian(&sys, p, tol::FD_STEP);
            lm::kernel_dimension(&jac, cfg.rank_tol)
        })
        .collect();

    let flats: Vec<DVector<f64>> = points.iter().map(|p| flatten_tuple(p)).collect();
    let refine_flat = |v: &DVector<f64>| -> Option<DVector<f64>> {
        let start = unflatten_tuple(v, slots, rr)?;
        let out = lm::refine(&sys, start, cfg.converge_tol, cfg.max_iterations);
        out.converged.then(|| flatten_tuple(&out.point))
    };
    let groups = cluster_flat(&flats, &kernel_dims, cfg.cluster_radius, &refine_flat);

    let mut components: Vec<SurComponent> = groups
        .into_iter()
        .map(|samples| {
            let dims: Vec<usize> = samples.iter().map(|&i| kernel_dims[i]).collect();
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for d in &dims {
                *counts.entry(*d).or_insert(0) += 1;
            }
            let (dimension, count) = counts
                .into_iter()
                .max_by_key(|(dim, count)| (*count, usize::MAX - *dim))
                .expect("groups are nonempty");
            let rep = samples[0];
            let trace_signature: Vec<(f64, f64)> = points[rep]
                .iter()
                .map(|m| {
                    let t = m.trace();
                    (t.re, t.im)
                })
                .collect();
            SurComponent {
                dimension,
                classification: if dimension == 0 { "isolated" } else { "positive-dimensional" },
                trace_signature,
                dimension_agreement: count as f64 / dims.len() as f64,
                samples,
            }
        })
        .collect();
    components.sort_by(|a, b| {
        (a.dimension, &a.trace_signature, a.samples[0])
            .partial_cmp(&(b.dimension, &b.trace_signature, b.samples[0]))
            .expect("finite signatures")
    });

    let mut checks = Vec::new();
    let worst_agreement = components.iter().map(|c| c.dimension_agreement).fold(1.0f64, f64::min);
    checks.push(Check::new(
        "kernel dimension agreement",
        worst_agreement >= 0.9,
        format!("lowest per-component agreement {worst_agreement:.3}"),
    ));
    let trivial_found = components
        .iter()
        .any(|c| c.samples.iter().any(|&i| tuple_distance(&points[i], &theta) <= cfg.dedup_radius));
    checks.push(Check::new(
        "trivial solution present",
        trivial_found,
        "identity handles appear in some component".to_string(),
    ));

    match diagram.standard_family() {
        Some(StandardFamily::S3 { .. }) => {
            checks.push(Check::new(
                "component count",
                components.len() == 1 && components[0].dimension == 0,
                format!("found {} components", components.len()),
            ));
        }
        Some(StandardFamily::S2xS1) => {
            let expected = (r * r - 1) as usize;
            checks.push(Check::new(
                "single free-handle component",
                components.len() == 1 && components[0].dimension == expected,
                format!(
                    "found {} components, first dimension {:?}",
                    components.len(),
                    components.first().map(|c| c.dimension)
                ),
            ));
        }
        Some(StandardFamily::Lens { p, .. }) => {
            let classes = lens_root_multisets(p, r);
            checks.push(Check::new(
                "component count equals class count",
                components.len() == classes.len(),
                format!("found {}, expected {}", components.len(), classes.len()),
            ));
            let traces: Vec<Complex64> = classes.iter().map(|ks| multiset_trace(p, ks)).collect();
            let in_oracle = components.iter().all(|c| {
                let (re, im) = c.trace_signature[1];
                let t = Complex64::new(re, im);
                traces.iter().any(|e| (t - e).norm() <= 1e-6)
            });
            checks.push(Check::new(
                "second handle traces in the class list",
                in_oracle,
                "every component trace matches an eigenvalue multiset".to_string(),
            ));
            let first_ok = components.iter().all(|c| {
                let (re, im) = c.trace_signature[0];
                (re - r as f64).abs() <= 1e-6 && im.abs() <= 1e-6
            });
            checks.push(Check::new(
                "first handle trace",
                first_ok,
                format!("trace {r} on the first handle of every component"),
            ));
        }
        None => {}
    }

    let pass = all_pass(&checks);
    Ok(SurCensusReport {
        diagram: diagram.clone(),
        r,
        points,
        kernel_dims,
        components,
        attempted_starts: starts,
        seed: cfg.seed,
        checks,
        pass,
    })
}
