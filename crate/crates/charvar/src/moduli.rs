//! The moduli space of relator-satisfying tuples on a three-pointed surface.
//!
//! A point of genus `g` consists of handle holonomies
//! `(A_1, B_1, ..., A_g, B_g)` and puncture holonomies `(C_1, C_2, C_3)`
//! subject to the relation `prod_j [A_j, B_j] * C_1 C_2 C_3 = 1`, with each
//! `C_m` traceless.  Conjugating every entry by one group element is a gauge
//! change; the unique traceless triple with product 1 up to conjugation is
//! `(i, j, -k)`, so pinning the punctures there kills all gauge freedom
//! except the center, which acts trivially.

use crate::error::{Error, Result};
use crate::quat::{standardize_triple, Su2};
use crate::tol;
use crate::word::FreeWord;

/// Puncture triple every gauge-fixed point carries.
pub const PINNED_PUNCTURES: [Su2; 3] = [
    Su2 { w: 0.0, x: 1.0, y: 0.0, z: 0.0 },
    Su2 { w: 0.0, x: 0.0, y: 1.0, z: 0.0 },
    Su2 { w: 0.0, x: 0.0, y: 0.0, z: -1.0 },
];

/// Residual bound under which a tuple is accepted for gauge pinning.
pub const PIN_INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ModuliPoint {
    pub handles: Vec<Su2>,
    pub punctures: [Su2; 3],
}

impl ModuliPoint {
    pub fn new(handles: Vec<Su2>, punctures: [Su2; 3]) -> ModuliPoint {
        ModuliPoint { handles, punctures }
    }

    /// The trivial point: identity handles over the pinned punctures.
    pub fn trivial(genus: u16) -> ModuliPoint {
        ModuliPoint {
            handles: vec![Su2::IDENTITY; 2 * genus as usize],
            punctures: PINNED_PUNCTURES,
        }
    }

    pub fn genus(&self) -> u16 {
        (self.handles.len() / 2) as u16
    }

    /// `prod_j [A_j, B_j]` over the handle slots.
    pub fn commutator_product(&self) -> Su2 {
        commutator_product(&self.handles)
    }

    /// Conjugates every slot by `m`.
    pub fn conjugated_by(&self, m: &Su2) -> ModuliPoint {
        ModuliPoint {
            handles: self.handles.iter().map(|q| q.conj_by(m)).collect(),
            punctures: [
                self.punctures[0].conj_by(m),
                self.punctures[1].conj_by(m),
                self.punctures[2].conj_by(m),
            ],
        }
    }
}

pub fn commutator_product(handles: &[Su2]) -> Su2 {
    let mut acc = Su2::IDENTITY;
    for pair in handles.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        acc = acc.mul(&a).mul(&b).mul(&a.inv()).mul(&b.inv());
    }
    acc
}

/// Distance of the defining relation from holding:
/// `| prod [A_j, B_j] * C_1 C_2 C_3 - 1 |`.
pub fn relation_residual(p: &ModuliPoint) -> f64 {
    let total = p
        .commutator_product()
        .mul(&p.punctures[0])
        .mul(&p.punctures[1])
        .mul(&p.punctures[2]);
    total.dist(&Su2::IDENTITY)
}

/// Moves a relator-satisfying tuple into the pinned gauge by the unique
/// conjugation standardizing its puncture triple.  The relation must hold
/// within [`PIN_INPUT_TOL`] and the punctures must form a traceless triple
/// with product 1 at the membership tolerance.
pub fn pin_gauge(p: &ModuliPoint) -> Result<ModuliPoint> {
    let residual = relation_residual(p);
    if residual > PIN_INPUT_TOL {
        return Err(Error::NotInStratum(format!(
            "relation residual {residual:.3e} exceeds {PIN_INPUT_TOL:.0e}"
        )));
    }
    let m = standardize_triple(&p.punctures[0], &p.punctures[1], &p.punctures[2])?;
    let mut out = p.conjugated_by(&m);
    // Conjugation maps the triple onto the pinned one up to rounding; snap
    // exactly so downstream comparisons never see drift.
    for (slot, target) in out.punctures.iter_mut().zip(PINNED_PUNCTURES) {
        debug_assert!(slot.approx_eq(&target, 1e-6));
        *slot = target;
    }
    Ok(out)
}

/// Dimension `6g - 6 + 2n` of the moduli space of a genus `g` surface with
/// `n` traceless punctures; defined for odd `n` only.
pub fn moduli_dimension(genus: u16, punctures: u16) -> Result<i64> {
    if punctures % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "an even puncture count ({punctures}) admits no traceless solutions to the relator"
        )));
    }
    Ok(6 * genus as i64 - 6 + 2 * punctures as i64)
}

/// Output of [`ht_embed`]: the assembled tuple together with the data the
/// embedding identities quantify over.
#[derive(Debug, Clone)]
pub struct HtPoint {
    pub point: ModuliPoint,
    /// `trace(prod [A_j, B_j])` of the input handles.
    pub t: f64,
    /// Rotation parameter of the second and third puncture slots.
    pub gamma: f64,
    /// The value `C_1 C_2 C_3` is constructed to equal: the inverse of the
    /// handle commutator product.
    pub inserted: Su2,
}

/// Extends a handle tuple whose commutator product `P` has trace in `(1, 2]`
/// to a puncture tuple satisfying the global relation.
///
/// The punctures are `C_1 = i`, `C_2 = e^{2 pi gamma k} i` and
/// `C_3 = -e^{2 pi gamma k} P^-1`, where `gamma = 1/2` when `P = 1` and
/// otherwise `gamma = arctan(cot(pi t / 4) / Q_k) / (2 pi)` with `Q_k` the
/// `k` component of `P` (`gamma = 1/4` when `Q_k = 0`).  Anticommutation of
/// `i` past `k`-axis rotations makes `C_1 C_2 C_3 = P^-1` exactly, so the
/// relation holds and `trace(C_1 C_2 C_3) = t`.  The first two punctures are
/// traceless by construction; the third is generally not, so the image
/// should not be fed to traceless-stratum consumers such as [`pin_gauge`].
pub fn ht_embed(handles: &[Su2]) -> Result<HtPoint> {
    if handles.len() % 2 != 0 {
        return Err(Error::Shape(format!(
            "handle tuples pair off as (A_j, B_j); got {} entries",
            handles.len()
        )));
    }
    let p = commutator_product(handles);
    let t = p.trace();
    if t <= 1.0 {
        return Err(Error::OutOfNeighborhood(format!(
            "commutator product trace {t:.6} is outside (1, 2]"
        )));
    }
    let gamma = if p.approx_eq(&Su2::IDENTITY, tol::UNIT_NORM) {
        0.5
    } else if p.z == 0.0 {
        0.25
    } else {
        let cot = {
            let angle = std::f64::consts::PI * t / 4.0;
            angle.cos() / angle.sin()
        };
        (cot / p.z).atan() / (2.0 * std::f64::consts::PI)
    };
    let rot = Su2::exp_imag([0.0, 0.0, 2.0 * std::f64::consts::PI * gamma]);
    let inserted = p.inv();
    let c1 = Su2::I;
    let c2 = rot.mul(&Su2::I);
    let minus_rot = Su2 { w: -rot.w, x: -rot.x, y: -rot.y, z: -rot.z };
    let c3 = minus_rot.mul(&inserted);
    Ok(HtPoint {
        point: ModuliPoint::new(handles.to_vec(), [c1, c2, c3]),
        t,
        gamma,
        inserted,
    })
}

/// Relator word of the pinned constraint system: with punctures at
/// `(i, j, -k)` the product `C_1 C_2 C_3` is 1, so the relation collapses to
/// the handle commutator word.
pub fn pinned_relator(genus: u16) -> FreeWord {
    FreeWord::surface_relator(genus)
}
