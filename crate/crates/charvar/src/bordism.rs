//! Elementary bordisms as correspondences between moduli spaces.
//!
//! A genus-raising bordism relates a point of the lower moduli space to the
//! points of the higher one that restrict to it: the shared handle slots and
//! the punctures agree up to a single global conjugation, and the holonomy
//! of the attaching circle (the standard curve `a_{g+1}`) is trivial.  A
//! genus-lowering bordism is the transpose, and a cylinder is the diagonal.
//!
//! Membership is decided by solving for the best global conjugator in closed
//! form; the defect is the residual of that solve together with the
//! attaching-holonomy error, both conjugation-invariant quantities.

use crate::error::{Error, Result};
use crate::lm::{self, ManifoldProblem};
use crate::moduli::{commutator_product, ht_embed, relation_residual, ModuliPoint, PIN_INPUT_TOL};
use crate::quat::{holonomy, solve_conjugator, Su2};
use crate::report::{all_pass, canonical_json, Check};
use crate::tol;
use crate::word::FreeWord;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Threshold separating numerically exact membership from failure.  True
/// members constructed from converged solves sit many orders below it, and
/// distinct points sit far above.
pub const DECISION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BordismKind {
    GenusRaising,
    GenusLowering,
    Cylinder,
}

impl BordismKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BordismKind::GenusRaising => "genus-raising",
            BordismKind::GenusLowering => "genus-lowering",
            BordismKind::Cylinder => "cylinder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementaryBordism {
    pub kind: BordismKind,
    /// Genus of the lower end (both ends, for a cylinder).
    pub lower_genus: u16,
}

impl ElementaryBordism {
    pub fn genus_raising(lower_genus: u16) -> ElementaryBordism {
        ElementaryBordism { kind: BordismKind::GenusRaising, lower_genus }
    }

    pub fn genus_lowering(lower_genus: u16) -> ElementaryBordism {
        ElementaryBordism { kind: BordismKind::GenusLowering, lower_genus }
    }

    pub fn cylinder(genus: u16) -> ElementaryBordism {
        ElementaryBordism { kind: BordismKind::Cylinder, lower_genus: genus }
    }

    pub fn incoming_genus(&self) -> u16 {
        match self.kind {
            BordismKind::GenusLowering => self.lower_genus + 1,
            _ => self.lower_genus,
        }
    }

    pub fn outgoing_genus(&self) -> u16 {
        match self.kind {
            BordismKind::GenusRaising => self.lower_genus + 1,
            _ => self.lower_genus,
        }
    }

    /// Attaching circle on the higher end; cylinders have none.
    pub fn attaching_word(&self) -> Option<FreeWord> {
        match self.kind {
            BordismKind::Cylinder => None,
            _ => Some(FreeWord::a(self.lower_genus + 1)),
        }
    }

    /// Conjugation-invariant distance of an (incoming, outgoing) pair from
    /// the correspondence.  Both points must satisfy their moduli relations.
    pub fn membership_defect(
        &self,
        incoming: &ModuliPoint,
        outgoing: &ModuliPoint,
    ) -> Result<f64> {
        if incoming.genus() != self.incoming_genus() || outgoing.genus() != self.outgoing_genus() {
            return Err(Error::Shape(format!(
                "bordism relates genus {} to {}, got {} to {}",
                self.incoming_genus(),
                self.outgoing_genus(),
                incoming.genus(),
                outgoing.genus()
            )));
        }
        for (label, p) in [("incoming", incoming), ("outgoing", outgoing)] {
            let r = relation_residual(p);
            if r > PIN_INPUT_TOL {
                return Err(Error::NotInStratum(format!(
                    "{label} point violates the moduli relation by {r:.3e}"
                )));
            }
        }

        let (lower, higher) = match self.kind {
            BordismKind::GenusRaising => (incoming, outgoing),
            BordismKind::GenusLowering => (outgoing, incoming),
            BordismKind::Cylinder => (incoming, outgoing),
        };

        let mut defect = 0.0f64;
        if let Some(word) = self.attaching_word() {
            let h = holonomy(&word, &higher.handles)?;
            defect = defect.max(h.dist(&Su2::IDENTITY));
        }

        let common = 2 * self.lower_genus as usize;
        let mut pairs: Vec<(Su2, Su2)> = Vec::with_capacity(common + 3);
        for m in 0..common {
            pairs.push((lower.handles[m], higher.handles[m]));
        }
        for k in 0..3 {
            pairs.push((lower.punctures[k], higher.punctures[k]));
        }
        let (_, residual) = solve_conjugator(&pairs);
        Ok(defect.max(residual))
    }

    pub fn membership(&self, incoming: &ModuliPoint, outgoing: &ModuliPoint) -> Result<bool> {
        Ok(self.membership_defect(incoming, outgoing)? <= DECISION_TOL)
    }
}

/// Composite of two elementary bordisms, when the composite is again
/// elementary.
pub fn compose(first: &ElementaryBordism, second: &ElementaryBordism) -> Result<ElementaryBordism> {
    if first.outgoing_genus() != second.incoming_genus() {
        return Err(Error::Shape(format!(
            "cannot glue ends of genus {} and {}",
            first.outgoing_genus(),
            second.incoming_genus()
        )));
    }
    match (first.kind, second.kind) {
        (BordismKind::GenusRaising, BordismKind::GenusLowering) => {
            Ok(ElementaryBordism::cylinder(first.lower_genus))
        }
        (BordismKind::Cylinder, BordismKind::Cylinder) => {
            Ok(ElementaryBordism::cylinder(first.lower_genus))
        }
        (a, b) => Err(Error::UnsupportedComposition(format!(
            "{} then {} is not elementary",
            a.as_str(),
            b.as_str()
        ))),
    }
}

/// Random moduli point with nontrivial handles: Haar handles conditioned on
/// a commutator-product trace above 1, punctures produced by the
/// near-trivial puncture construction, then a random global conjugation so
/// no preferred gauge survives.
pub fn sample_moduli_point(genus: u16, rng: &mut ChaCha8Rng) -> ModuliPoint {
    if genus == 0 {
        // The puncture-only stratum is a single gauge orbit.
        let m = Su2::random(rng);
        return ModuliPoint::trivial(0).conjugated_by(&m);
    }
    loop {
        let handles: Vec<Su2> = (0..2 * genus).map(|_| Su2::random(rng)).collect();
        if commutator_product(&handles).trace() > 1.05 {
            let ht = ht_embed(&handles).expect("trace is above the threshold");
            let m = Su2::random(rng);
            return ht.point.conjugated_by(&m);
        }
    }
}

/// Least-squares system for the middle point of a factorization: unknown
/// handles of the intermediate surface, punctures frozen to the incoming
/// point's, constrained to match both ends and kill the attaching holonomy.
struct FactorProblem {
    lower_handles: Vec<Su2>,
    pulled_handles: Vec<Su2>,
    puncture_product: Su2,
    attaching: Option<FreeWord>,
    middle_slots: usize,
}

impl ManifoldProblem for FactorProblem {
    type Point = Vec<Su2>;

    fn residual_dim(&self) -> usize {
        4 + self.attaching.as_ref().map_or(0, |_| 4)
            + 4 * (self.lower_handles.len() + self.pulled_handles.len())
    }

    fn tangent_dim(&self) -> usize {
        3 * self.middle_slots
    }

    fn residual(&self, p: &Vec<Su2>, out: &mut DVector<f64>) {
        let rel = commutator_product(p).mul(&self.puncture_product);
        out[0] = rel.w - 1.0;
        out[1] = rel.x;
        out[2] = rel.y;
        out[3] = rel.z;
        let mut row = 4;
        if let Some(word) = &self.attaching {
            let h = holonomy(word, p).expect("attaching word fits the middle surface");
            out[row] = h.w - 1.0;
            out[row + 1] = h.x;
            out[row + 2] = h.y;
            out[row + 3] = h.z;
            row += 4;
        }
        for (m, target) in self.lower_handles.iter().chain(&self.pulled_handles).enumerate() {
            let slot = m % self.lower_handles.len().max(1);
            let q = p[slot];
            out[row + 4 * m] = q.w - target.w;
            out[row + 4 * m + 1] = q.x - target.x;
            out[row + 4 * m + 2] = q.y - target.y;
            out[row + 4 * m + 3] = q.z - target.z;
        }
    }

    fn jacobian(&self, p: &Vec<Su2>, out: &mut DMatrix<f64>) {
        out.copy_from(&lm::numeric_jacobian(self, p, tol::FD_STEP));
    }

    fn apply_step(&self, p: &Vec<Su2>, step: &DVector<f64>) -> Vec<Su2> {
        p.iter()
            .enumerate()
            .map(|(m, q)| q.mul(&Su2::exp_imag([step[3 * m], step[3 * m + 1], step[3 * m + 2]])))
            .collect()
    }
}

/// Finds a middle point `y` with `(incoming, y)` in `first` and
/// `(y, outgoing)` in `second`, returning the least-squares residual of the
/// joint constraint system.  A residual at roundoff scale certifies the
/// factorization; no solution leaves it at the separation scale of the two
/// endpoint gauges.
pub fn factor_through_middle(
    first: &ElementaryBordism,
    second: &ElementaryBordism,
    incoming: &ModuliPoint,
    outgoing: &ModuliPoint,
    seed: u64,
) -> Result<f64> {
    let composite = compose(first, second)?;
    if incoming.genus() != composite.incoming_genus()
        || outgoing.genus() != composite.outgoing_genus()
    {
        return Err(Error::Shape("endpoint genera do not match the composite".to_string()));
    }

    // Work in the incoming point's gauge: pull the outgoing point back by
    // the best conjugator between the two.
    let mut pairs: Vec<(Su2, Su2)> =
        incoming.handles.iter().cloned().zip(outgoing.handles.iter().cloned()).collect();
    for k in 0..3 {
        pairs.push((incoming.punctures[k], outgoing.punctures[k]));
    }
    let (m, _) = solve_conjugator(&pairs);
    let pulled = outgoing.conjugated_by(&m.inv());

    let middle_genus = first.outgoing_genus();
    let middle_slots = 2 * middle_genus as usize;
    let puncture_product = incoming
        .punctures
        .iter()
        .fold(Su2::IDENTITY, |acc, c| acc.mul(c));
    let attaching = match first.kind {
        BordismKind::GenusRaising => Some(FreeWord::a(first.lower_genus + 1)),
        _ => None,
    };
    let problem = FactorProblem {
        lower_handles: incoming.handles.clone(),
        pulled_handles: pulled.handles.clone(),
        puncture_product,
        attaching,
        middle_slots,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = incoming.handles.clone();
    while start.len() < middle_slots {
        start.push(Su2::random(&mut rng));
    }
    let outcome = lm::refine(&problem, start, tol::CONVERGE, tol::MAX_ITERATIONS);
    Ok(outcome.residual)
}

#[derive(Debug, Clone)]
pub struct CompositionReport {
    pub first: ElementaryBordism,
    pub second: ElementaryBordism,
    pub composite: ElementaryBordism,
    pub samples: usize,
    /// Worst composite-membership defect of endpoints of sampled chains.
    pub max_endpoint_defect: f64,
    /// Worst factorization residual of sampled composite members.
    pub max_factorization_residual: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl CompositionReport {
    pub fn to_value(&self) -> Value {
        json!({
            "first": self.first.kind.as_str(),
            "second": self.second.kind.as_str(),
            "composite": self.composite.kind.as_str(),
            "lower_genus": self.composite.lower_genus,
            "samples": self.samples,
            "max_endpoint_defect": self.max_endpoint_defect,
            "max_factorization_residual": self.max_factorization_residual,
            "checks": self.checks.iter().map(Check::to_value).collect::<Vec<_>>(),
            "pass": self.pass,
        })
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(&self.to_value())
    }
}

/// Verifies on random samples that gluing `first` to `second` gives exactly
/// the claimed elementary composite: chains land in it, its members factor
/// through a middle point, and unrelated pairs are rejected.
pub fn composition_check(
    first: &ElementaryBordism,
    second: &ElementaryBordism,
    samples: usize,
    seed: u64,
) -> Result<CompositionReport> {
    let composite = compose(first, second)?;
    let genus = composite.lower_genus;

    let mut max_endpoint_defect = 0.0f64;
    let mut max_factorization_residual = 0.0f64;
    let mut chain_defect = 0.0f64;
    let mut rejected = true;

    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let x = sample_moduli_point(genus, &mut rng);

        // A chain through the middle: raise (or pass through) then descend.
        let middle = match first.kind {
            BordismKind::GenusRaising => {
                let mut handles = x.handles.clone();
                handles.push(Su2::IDENTITY);
                handles.push(Su2::random(&mut rng));
                ModuliPoint::new(handles, x.punctures)
            }
            _ => x.conjugated_by(&Su2::random(&mut rng)),
        };
        let z = match second.kind {
            BordismKind::GenusLowering => ModuliPoint::new(
                middle.handles[..2 * genus as usize].to_vec(),
                middle.punctures,
            )
            .conjugated_by(&Su2::random(&mut rng)),
            _ => middle.conjugated_by(&Su2::random(&mut rng)),
        };
        chain_defect = chain_defect
            .max(first.membership_defect(&x, &middle)?)
            .max(second.membership_defect(&middle, &z)?);
        max_endpoint_defect = max_endpoint_defect.max(composite.membership_defect(&x, &z)?);

        // A composite member must factor through some middle point.
        let mate = x.conjugated_by(&Su2::random(&mut rng));
        max_factorization_residual = max_factorization_residual
            .max(factor_through_middle(first, second, &x, &mate, seed ^ (i as u64))?);

        // An unrelated endpoint must be rejected on both counts.  At genus
        // zero the stratum is a single gauge orbit, so no unrelated points
        // exist and the control is vacuous.
        if genus > 0 {
            let stranger = sample_moduli_point(genus, &mut rng);
            if composite.membership(&x, &stranger)?
                || factor_through_middle(first, second, &x, &stranger, seed ^ (i as u64))? <= 1e-3
            {
                rejected = false;
            }
        }
    }

    let checks = vec![
        Check::new(
            "sampled chains stay in the correspondence",
            chain_defect <= DECISION_TOL,
            format!("worst chain defect {chain_defect:.3e}"),
        ),
        Check::new(
            "chain endpoints land in the composite",
            max_endpoint_defect <= DECISION_TOL,
            format!("worst endpoint defect {max_endpoint_defect:.3e}"),
        ),
        Check::new(
            "composite pairs factor through a middle point",
            max_factorization_residual <= DECISION_TOL,
            format!("worst factorization residual {max_factorization_residual:.3e}"),
        ),
        Check::new(
            "unrelated pairs are rejected",
            rejected,
            if genus > 0 {
                "independent endpoints fail membership and factorization".to_string()
            } else {
                "vacuous: the genus-zero stratum is a single gauge orbit".to_string()
            },
        ),
    ];
    let pass = all_pass(&checks);
    Ok(CompositionReport {
        first: *first,
        second: *second,
        composite,
        samples,
        max_endpoint_defect,
        max_factorization_residual,
        checks,
        pass,
    })
}
