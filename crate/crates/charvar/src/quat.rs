//! SU(2) as unit quaternions.
//!
//! An element is stored as `w + x i + y j + z k` with `w^2+x^2+y^2+z^2 = 1`.
//! Under the usual identification with 2x2 special unitary matrices the
//! matrix trace is `2w`, so "traceless" means `w = 0`.  Conjugacy classes are
//! level sets of the trace; the class with trace `2 cos(2 pi mu)` is labeled
//! by `mu` in `[0, 1/2]`, the classes at the endpoints being the central
//! elements `1` and `-1`.

use crate::error::{Error, Result};
use crate::tol;
use crate::word::FreeWord;
use nalgebra::Matrix4;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2 {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const I: Su2 = Su2 { w: 0.0, x: 1.0, y: 0.0, z: 0.0 };
    pub const J: Su2 = Su2 { w: 0.0, x: 0.0, y: 1.0, z: 0.0 };
    pub const K: Su2 = Su2 { w: 0.0, x: 0.0, y: 0.0, z: 1.0 };

    /// Builds a group element from components, renormalizing small drift.
    /// Inputs further than [`tol::UNIT_NORM_REJECT`] from unit norm are
    /// rejected rather than silently rescaled.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Su2> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > tol::UNIT_NORM_REJECT {
            return Err(Error::InvalidElement(format!(
                "quaternion norm {n} is not within {} of 1",
                tol::UNIT_NORM_REJECT
            )));
        }
        Ok(Su2 { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Same as [`Su2::new`] but rescales any nonzero input.  Used internally
    /// after arithmetic that can only drift by rounding.
    fn renorm(w: f64, x: f64, y: f64, z: f64) -> Su2 {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Su2 { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Hamilton product, renormalized.
    pub fn mul(&self, o: &Su2) -> Su2 {
        Su2::renorm(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Inverse; for unit quaternions this is the conjugate.
    pub fn inv(&self) -> Su2 {
        Su2 { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Trace of the corresponding 2x2 matrix.
    pub fn trace(&self) -> f64 {
        2.0 * self.w
    }

    pub fn is_traceless(&self, tolerance: f64) -> bool {
        self.w.abs() <= tolerance / 2.0
    }

    /// `m * self * m^-1`.
    pub fn conj_by(&self, m: &Su2) -> Su2 {
        m.mul(self).mul(&m.inv())
    }

    /// Exponential of the purely imaginary quaternion `v`.
    pub fn exp_imag(v: [f64; 3]) -> Su2 {
        let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        // sin(theta)/theta, stable at zero.
        let s = if theta < 1e-8 { 1.0 - theta * theta / 6.0 } else { theta.sin() / theta };
        Su2::renorm(theta.cos(), s * v[0], s * v[1], s * v[2])
    }

    /// Imaginary logarithm; inverse of [`Su2::exp_imag`] away from `-1`,
    /// where the direction is not determined.
    pub fn log_imag(&self) -> [f64; 3] {
        let s = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if s < 1e-15 {
            return [0.0, 0.0, 0.0];
        }
        let theta = s.atan2(self.w);
        let f = theta / s;
        [f * self.x, f * self.y, f * self.z]
    }

    /// Euclidean distance between the 4-component vectors.
    pub fn dist(&self, o: &Su2) -> f64 {
        let d = [self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt()
    }

    pub fn approx_eq(&self, o: &Su2, tolerance: f64) -> bool {
        self.dist(o) <= tolerance
    }

    /// Uniform (Haar) sample on the group.
    pub fn random<R: Rng>(rng: &mut R) -> Su2 {
        let [a, b] = gaussian_pair(rng);
        let [c, d] = gaussian_pair(rng);
        Su2::renorm(a, b, c, d)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Su2> {
        Su2::new(a[0], a[1], a[2], a[3])
    }
}

/// Two independent standard normals via Box-Muller.
fn gaussian_pair<R: Rng>(rng: &mut R) -> [f64; 2] {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    [r * t.cos(), r * t.sin()]
}

/// Conjugacy class label `mu` in `[0, 1/2]`; the class has trace
/// `2 cos(2 pi mu)`.  `mu = 1/4` is the traceless class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassLabel {
    pub mu: f64,
}

impl ClassLabel {
    pub fn new(mu: f64) -> Result<ClassLabel> {
        if !(0.0..=0.5).contains(&mu) {
            return Err(Error::InvalidParameter(format!("class label {mu} outside [0, 1/2]")));
        }
        Ok(ClassLabel { mu })
    }

    pub const TRACELESS: ClassLabel = ClassLabel { mu: 0.25 };

    pub fn trace(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::PI * self.mu).cos()
    }

    pub fn contains(&self, q: &Su2, tolerance: f64) -> bool {
        (q.trace() - self.trace()).abs() <= tolerance
    }

    /// Uniform sample from the class.  The central classes are single points;
    /// the others are 2-spheres of fixed real part.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Su2 {
        let angle = 2.0 * std::f64::consts::PI * self.mu;
        let (s, c) = angle.sin_cos();
        if s.abs() < 1e-15 {
            return Su2 { w: c.signum(), x: 0.0, y: 0.0, z: 0.0 };
        }
        let [a, b] = gaussian_pair(rng);
        let [d, _] = gaussian_pair(rng);
        let n = (a * a + b * b + d * d).sqrt();
        Su2::renorm(c, s * a / n, s * b / n, s * d / n)
    }

    pub fn sample_seeded(&self, seed: u64) -> Su2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(&mut rng)
    }
}

/// Matrix of left multiplication by `p`, acting on `(w, x, y, z)` columns.
pub fn left_mul_matrix(p: &Su2) -> Matrix4<f64> {
    Matrix4::new(
        p.w, -p.x, -p.y, -p.z, //
        p.x, p.w, -p.z, p.y, //
        p.y, p.z, p.w, -p.x, //
        p.z, -p.y, p.x, p.w,
    )
}

/// Matrix of right multiplication by `p`.
pub fn right_mul_matrix(p: &Su2) -> Matrix4<f64> {
    Matrix4::new(
        p.w, -p.x, -p.y, -p.z, //
        p.x, p.w, p.z, -p.y, //
        p.y, -p.z, p.w, p.x, //
        p.z, p.y, -p.x, p.w,
    )
}

/// Best single conjugator for a list of pairs: minimizes
/// `sum_i |m u_i m^-1 - v_i|^2` over the group.
///
/// Because right multiplication by a unit quaternion is an isometry, each
/// term equals `|m u_i - v_i m|^2`, which is linear in `m`; the minimizer is
/// the smallest eigenvector of a 4x4 Gram matrix, so no iteration or
/// restarts are needed.  Returns the conjugator and the attained root sum of
/// squares.
pub fn solve_conjugator(pairs: &[(Su2, Su2)]) -> (Su2, f64) {
    let mut k = Matrix4::<f64>::zeros();
    for (u, v) in pairs {
        let t = right_mul_matrix(u) - left_mul_matrix(v);
        k += t.transpose() * t;
    }
    let eig = k.symmetric_eigen();
    let mut best = 0;
    for idx in 1..4 {
        if eig.eigenvalues[idx] < eig.eigenvalues[best] {
            best = idx;
        }
    }
    let col = eig.eigenvectors.column(best);
    let m = Su2::renorm(col[0], col[1], col[2], col[3]);
    let mut sq = 0.0;
    for (u, v) in pairs {
        let d = u.conj_by(&m).dist(v);
        sq += d * d;
    }
    (m, sq.sqrt())
}

/// Unique group element whose conjugation maps an orthonormal imaginary
/// frame `(rows of r)` onto `(i, j, k)`, with the sign fixed by `w >= 0`
/// (first nonzero imaginary component positive when `w = 0`).
fn quaternion_from_rotation_rows(r: [[f64; 3]; 3]) -> Su2 {
    // Shepperd's method on the transpose: conjugation by m has matrix
    // R(m) with R(m) u = frame-to-axes, and the entries below are those of
    // the standard quaternion-to-matrix map solved for (w, x, y, z).
    let tr = r[0][0] + r[1][1] + r[2][2];
    let (w, x, y, z);
    if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[2][1] - r[1][2]) / s;
        y = (r[0][2] - r[2][0]) / s;
        z = (r[1][0] - r[0][1]) / s;
    } else if r[0][0] >= r[1][1] && r[0][0] >= r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
        w = (r[2][1] - r[1][2]) / s;
        x = 0.25 * s;
        y = (r[0][1] + r[1][0]) / s;
        z = (r[0][2] + r[2][0]) / s;
    } else if r[1][1] >= r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
        w = (r[0][2] - r[2][0]) / s;
        x = (r[0][1] + r[1][0]) / s;
        y = 0.25 * s;
        z = (r[1][2] + r[2][1]) / s;
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
        w = (r[1][0] - r[0][1]) / s;
        x = (r[0][2] + r[2][0]) / s;
        y = (r[1][2] + r[2][1]) / s;
        z = 0.25 * s;
    }
    let mut m = Su2::renorm(w, x, y, z);
    let flip = if m.w.abs() > 1e-9 {
        m.w < 0.0
    } else {
        let first = [m.x, m.y, m.z].into_iter().find(|c| c.abs() > 1e-9).unwrap_or(1.0);
        first < 0.0
    };
    if flip {
        m = Su2 { w: -m.w, x: -m.x, y: -m.y, z: -m.z };
    }
    m
}

/// Conjugator moving a traceless triple with product 1 onto `(i, j, -k)`.
///
/// Such a triple is an orthonormal pair `(u, v)` of imaginary directions
/// together with `-u x v`, so exactly one rotation carries it to the
/// standard triple and the conjugator is unique up to the center.
pub fn standardize_triple(c1: &Su2, c2: &Su2, c3: &Su2) -> Result<Su2> {
    for (idx, c) in [c1, c2, c3].iter().enumerate() {
        if !c.is_traceless(tol::MEMBERSHIP) {
            return Err(Error::NotInStratum(format!(
                "triple entry {} has trace {:.3e}, expected traceless",
                idx + 1,
                c.trace()
            )));
        }
    }
    let prod = c1.mul(c2).mul(c3);
    if !prod.approx_eq(&Su2::IDENTITY, tol::MEMBERSHIP) {
        return Err(Error::NotInStratum(format!(
            "triple product is {:.3e} away from 1",
            prod.dist(&Su2::IDENTITY)
        )));
    }
    let mut u = [c1.x, c1.y, c1.z];
    normalize3(&mut u);
    let mut v = [c2.x, c2.y, c2.z];
    let d = dot3(&u, &v);
    for a in 0..3 {
        v[a] -= d * u[a];
    }
    normalize3(&mut v);
    let w = cross3(&u, &v);
    let m = quaternion_from_rotation_rows([u, v, w]);
    // The product condition already pins c3 to -u x v; verify to guard
    // against conditioning loss in near-degenerate inputs.
    let c3_std = c3.conj_by(&m);
    let minus_k = Su2 { w: 0.0, x: 0.0, y: 0.0, z: -1.0 };
    if !c3_std.approx_eq(&minus_k, 1e-6) {
        return Err(Error::NotInStratum(format!(
            "third entry maps {:.3e} away from -k under the frame conjugator",
            c3_std.dist(&minus_k)
        )));
    }
    Ok(m)
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3(a: &mut [f64; 3]) {
    let n = dot3(a, a).sqrt();
    for c in a.iter_mut() {
        *c /= n;
    }
}

/// Evaluates a word in the handle generators at the given assignment.
/// `handles[2j]` is `A_{j+1}` and `handles[2j+1]` is `B_{j+1}`.
pub fn holonomy(word: &FreeWord, handles: &[Su2]) -> Result<Su2> {
    let mut acc = Su2::IDENTITY;
    for letter in word.letters() {
        let slot = (letter.gen - 1) as usize;
        let q = handles.get(slot).ok_or_else(|| {
            Error::MalformedWord(format!(
                "generator index {} exceeds the {} available slots",
                letter.gen,
                handles.len()
            ))
        })?;
        let factor = if letter.sign > 0 { *q } else { q.inv() };
        acc = acc.mul(&factor);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::FreeWord;

    const EPS: f64 = 1e-12;

    fn assert_close(a: &Su2, b: &Su2, tolerance: f64, what: &str) {
        assert!(a.approx_eq(b, tolerance), "{what}: {a:?} vs {b:?}");
    }

    #[test]
    fn hamilton_multiplication_table() {
        assert_close(&Su2::I.mul(&Su2::J), &Su2::K, EPS, "ij = k");
        assert_close(&Su2::J.mul(&Su2::K), &Su2::I, EPS, "jk = i");
        assert_close(&Su2::K.mul(&Su2::I), &Su2::J, EPS, "ki = j");
        let minus_one = Su2 { w: -1.0, x: 0.0, y: 0.0, z: 0.0 };
        assert_close(&Su2::I.mul(&Su2::I), &minus_one, EPS, "i^2 = -1");
        assert_close(&Su2::J.mul(&Su2::I), &Su2::K.inv(), EPS, "ji = -k");
    }

    #[test]
    fn product_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (a, b, c) = (Su2::random(&mut rng), Su2::random(&mut rng), Su2::random(&mut rng));
            let left = a.mul(&b).mul(&c);
            let right = a.mul(&b.mul(&c));
            assert_close(&left, &right, 1e-14, "associativity");
        }
    }

    #[test]
    fn anticommutation_past_k_rotations() {
        // i e^{theta k} = e^{-theta k} i; at theta = 0.3 both sides are
        // (0, cos 0.3, -sin 0.3, 0).
        let theta = 0.3;
        let rot = Su2::exp_imag([0.0, 0.0, theta]);
        let lhs = Su2::I.mul(&rot);
        let rhs = Su2::exp_imag([0.0, 0.0, -theta]).mul(&Su2::I);
        let expected = Su2 {
            w: 0.0,
            x: 0.955336489125606,
            y: -0.29552020666133955,
            z: 0.0,
        };
        assert_close(&lhs, &expected, EPS, "i e^{theta k} components");
        assert_close(&lhs, &rhs, EPS, "anticommutation");
    }

    #[test]
    fn commutator_of_i_and_j_is_minus_one() {
        let word = FreeWord::commutator(1);
        let value = holonomy(&word, &[Su2::I, Su2::J]).unwrap();
        let minus_one = Su2 { w: -1.0, x: 0.0, y: 0.0, z: 0.0 };
        assert_close(&value, &minus_one, EPS, "[i, j]");
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v = [
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            ];
            let q = Su2::exp_imag(v);
            let back = q.log_imag();
            for a in 0..3 {
                assert!((back[a] - v[a]).abs() < 1e-10, "log(exp(v)) at component {a}");
            }
        }
    }

    #[test]
    fn rejects_far_from_unit_inputs() {
        assert!(Su2::new(2.0, 0.0, 0.0, 0.0).is_err());
        assert!(Su2::new(1.0 + 1e-9, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn standardize_fixes_the_standard_triple() {
        let minus_k = Su2::K.inv();
        let m = standardize_triple(&Su2::I, &Su2::J, &minus_k).unwrap();
        assert_close(&m, &Su2::IDENTITY, 1e-9, "standard triple conjugator");
    }

    /// Brute-force conjugator search: coarse axis-angle grid followed by a
    /// deterministic local random descent.  Used as an independent check on
    /// the closed-form frame construction.
    fn brute_force_conjugator(triple: [Su2; 3], target: [Su2; 3]) -> Su2 {
        let score = |m: &Su2| -> f64 {
            triple
                .iter()
                .zip(target.iter())
                .map(|(c, t)| {
                    let d = c.conj_by(m).dist(t);
                    d * d
                })
                .sum()
        };
        let mut best = Su2::IDENTITY;
        let mut best_score = score(&best);
        let steps = 24;
        for ia in 0..steps {
            for ib in 0..(2 * steps) {
                for ig in 0..(2 * steps) {
                    let polar = std::f64::consts::PI * (ia as f64 + 0.5) / steps as f64;
                    let azim = std::f64::consts::PI * ib as f64 / steps as f64;
                    let half = std::f64::consts::PI * ig as f64 / (2 * steps) as f64;
                    let axis = [polar.sin() * azim.cos(), polar.sin() * azim.sin(), polar.cos()];
                    let m = Su2::renorm(
                        half.cos(),
                        half.sin() * axis[0],
                        half.sin() * axis[1],
                        half.sin() * axis[2],
                    );
                    let s = score(&m);
                    if s < best_score {
                        best_score = s;
                        best = m;
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut radius = 0.1;
        while radius > 1e-12 {
            let mut improved = false;
            for _ in 0..400 {
                let v = [
                    rng.gen_range(-radius..radius),
                    rng.gen_range(-radius..radius),
                    rng.gen_range(-radius..radius),
                ];
                let candidate = best.mul(&Su2::exp_imag(v));
                let s = score(&candidate);
                if s < best_score {
                    best_score = s;
                    best = candidate;
                    improved = true;
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        if best.w < 0.0 {
            best = Su2 { w: -best.w, x: -best.x, y: -best.y, z: -best.z };
        }
        best
    }

    #[test]
    fn standardize_cyclic_triple_matches_brute_force() {
        // (j, k, -i) has product jk(-i) = i(-i) = 1 and is carried to
        // (i, j, -k) by a 120 degree rotation of the imaginary axes.
        let triple = [Su2::J, Su2::K, Su2::I.inv()];
        let m = standardize_triple(&triple[0], &triple[1], &triple[2]).unwrap();
        let expected = Su2 { w: 0.5, x: -0.5, y: -0.5, z: -0.5 };
        assert_close(&m, &expected, 1e-9, "cyclic frame conjugator");

        let oracle = brute_force_conjugator(triple, [Su2::I, Su2::J, Su2::K.inv()]);
        assert_close(&m, &oracle, 1e-5, "agrees with grid search");
        assert_close(&triple[0].conj_by(&m), &Su2::I, 1e-12, "maps first entry to i");
        assert_close(&triple[1].conj_by(&m), &Su2::J, 1e-12, "maps second entry to j");
    }

    #[test]
    fn standardize_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let g = Su2::random(&mut rng);
            let c1 = Su2::I.conj_by(&g);
            let c2 = Su2::J.conj_by(&g);
            let c3 = Su2::K.inv().conj_by(&g);
            let m = standardize_triple(&c1, &c2, &c3).unwrap();
            assert_close(&c1.conj_by(&m), &Su2::I, 1e-10, "first entry");
            assert_close(&c2.conj_by(&m), &Su2::J, 1e-10, "second entry");
            assert_close(&c3.conj_by(&m), &Su2::K.inv(), 1e-10, "third entry");
        }
    }

    #[test]
    fn standardize_rejects_non_traceless() {
        let tilted = Su2::exp_imag([0.3, 0.0, 0.0]);
        assert!(standardize_triple(&tilted, &Su2::J, &Su2::K.inv()).is_err());
    }

    #[test]
    fn conjugator_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let m = Su2::random(&mut rng);
            let us: Vec<Su2> = (0..4).map(|_| Su2::random(&mut rng)).collect();
            let pairs: Vec<(Su2, Su2)> = us.iter().map(|u| (*u, u.conj_by(&m))).collect();
            let (found, residual) = solve_conjugator(&pairs);
            assert!(residual < 1e-9, "conjugate tuples should align exactly, got {residual}");
            for (u, v) in &pairs {
                assert_close(&u.conj_by(&found), v, 1e-9, "recovered conjugator acts correctly");
            }
        }
    }

    #[test]
    fn conjugator_detects_non_conjugate_tuples() {
        // (i, j) and (i, i) have matching traces but no aligning rotation.
        let pairs = [(Su2::I, Su2::I), (Su2::J, Su2::I)];
        let (_, residual) = solve_conjugator(&pairs);
        assert!(residual > 0.5, "non-conjugate tuples must keep a large residual, got {residual}");
    }

    #[test]
    fn class_samples_sit_in_their_class() {
        let label = ClassLabel::new(0.17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let q = label.sample(&mut rng);
            assert!(label.contains(&q, 1e-12), "sample trace {}", q.trace());
            assert!((q.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn traceless_class_samples_average_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 10_000;
        let mut mean = [0.0f64; 3];
        for _ in 0..n {
            let q = ClassLabel::TRACELESS.sample(&mut rng);
            assert!(q.trace().abs() < 1e-12);
            mean[0] += q.x;
            mean[1] += q.y;
            mean[2] += q.z;
        }
        for (axis, m) in mean.iter().enumerate() {
            let avg = m / n as f64;
            assert!(avg.abs() < 0.05, "imaginary mean along axis {axis} is {avg}");
        }
    }

    #[test]
    fn central_classes_are_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let one = ClassLabel::new(0.0).unwrap().sample(&mut rng);
        assert_close(&one, &Su2::IDENTITY, EPS, "mu = 0");
        let minus = ClassLabel::new(0.5).unwrap().sample(&mut rng);
        assert_close(&minus, &Su2::IDENTITY.inv().mul(&Su2::IDENTITY).mul(&minus), EPS, "sanity");
        assert!((minus.trace() + 2.0).abs() < 1e-12, "mu = 1/2 has trace -2");
    }

    #[test]
    fn holonomy_rejects_out_of_range_generators() {
        let word = FreeWord::generator(3, 1).unwrap();
        assert!(holonomy(&word, &[Su2::I, Su2::J]).is_err());
    }
}
