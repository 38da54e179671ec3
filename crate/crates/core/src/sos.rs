//! Numerical verification of sum-of-squares identities and the self-testing
//! statements derived from them.
//!
//! A decomposition states `S_Q I - S = sum_i w_i P_i^dagger P_i` for every
//! choice of dichotomic Bob observables. Each `P_i` is built here as an
//! explicit 4x4 matrix from `Z_A, X_A, Y_A` (Paulis on Alice) and `B_k`
//! (arbitrary Bloch observables on Bob), so an identity is confirmed by
//! evaluating both sides on random settings.
//!
//! Weights are closed-form where the reference form closes. Where it does
//! not, the weights are refitted by nonnegative least squares on a fixed set
//! of generic settings, and the refitted identity is then validated on fresh
//! draws like every other id.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{BobObservable, BobSettings, Family, ModelError, SteeringInequality};
use crate::qmat::{
    self, identity, kron, partial_trace_dims, projector, r, Keep, Ket, Mat,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("{id} infeasible at alpha = {alpha}, beta = {beta}: {}", violated.join("; "))]
    Infeasible { id: SosId, alpha: f64, beta: f64, violated: Vec<String> },
    #[error("{id} needs {expected} Bob settings, got {got}")]
    SettingCount { id: SosId, expected: usize, got: usize },
    #[error("Bob settings make the regularised operators undefined: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SosId {
    MainSos1,
    MainSos2,
    DS2Sos1,
    DS2Sos2,
    DS1Sos1,
    DS1Sos2,
    DS1Sos3,
    DI2Sos1,
    DI2Sos2,
    DI1Sos1,
    DI1Sos2,
    DI1Sos3,
    Main3Set,
}

impl SosId {
    pub const ALL: [SosId; 13] = [
        SosId::MainSos1,
        SosId::MainSos2,
        SosId::DS2Sos1,
        SosId::DS2Sos2,
        SosId::DS1Sos1,
        SosId::DS1Sos2,
        SosId::DS1Sos3,
        SosId::DI2Sos1,
        SosId::DI2Sos2,
        SosId::DI1Sos1,
        SosId::DI1Sos2,
        SosId::DI1Sos3,
        SosId::Main3Set,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SosId::MainSos1 => "MAIN_SOS1",
            SosId::MainSos2 => "MAIN_SOS2",
            SosId::DS2Sos1 => "D_S2_SOS1",
            SosId::DS2Sos2 => "D_S2_SOS2",
            SosId::DS1Sos1 => "D_S1_SOS1",
            SosId::DS1Sos2 => "D_S1_SOS2",
            SosId::DS1Sos3 => "D_S1_SOS3",
            SosId::DI2Sos1 => "D_I2_SOS1",
            SosId::DI2Sos2 => "D_I2_SOS2",
            SosId::DI1Sos1 => "D_I1_SOS1",
            SosId::DI1Sos2 => "D_I1_SOS2",
            SosId::DI1Sos3 => "D_I1_SOS3",
            SosId::Main3Set => "MAIN_3SET",
        }
    }

    pub fn family(self) -> Family {
        match self {
            SosId::MainSos1 | SosId::MainSos2 => Family::TiltedAnalog,
            SosId::DS2Sos1 | SosId::DS2Sos2 => Family::TwoUntrusted,
            SosId::DS1Sos1 | SosId::DS1Sos2 | SosId::DS1Sos3 => Family::TwoTrusted,
            SosId::DI2Sos1 | SosId::DI2Sos2 => Family::ThreeUntrusted,
            SosId::DI1Sos1 | SosId::DI1Sos2 | SosId::DI1Sos3 | SosId::Main3Set => {
                Family::ThreeTrusted
            }
        }
    }

    /// Weights come from a nonnegative least-squares refit.
    pub fn refitted(self) -> bool {
        matches!(self, SosId::DS2Sos2 | SosId::DS1Sos3 | SosId::DI2Sos2 | SosId::DI1Sos3)
    }

    /// Human-readable parameter region.
    pub fn region(self) -> &'static str {
        match self.family() {
            Family::TiltedAnalog => "0 <= alpha < 2",
            Family::TwoUntrusted => "alpha >= 0, beta >= sqrt(1+alpha^2)",
            Family::ThreeUntrusted => "alpha >= 0, beta >= sqrt(4+alpha^2)",
            Family::TwoTrusted | Family::ThreeTrusted => "alpha >= 0, beta > 0",
        }
    }

    /// Discrepancies between the reference form of the identity and the verified one.
    pub fn reference_discrepancies(self) -> &'static [&'static str] {
        match self {
            SosId::DS2Sos2 => &[
                "reference weights alpha_3^2 = Delta alpha_4^2, alpha_4^2 = S_Q/(4 s beta (Delta^2+s^2)(Delta^2+1)) do not close the identity; all four weights refitted",
            ],
            SosId::DS1Sos2 => &["the weights of the two squares are swapped"],
            SosId::DS1Sos3 => &[
                "the two reference squares do not close the identity for any weights",
                "completed with (I+Z_A)(I-B0), (I-Z_A)(I+B0), -cB1+sX_AB0+Z_AB1 and S_Q I - S; weights refitted",
            ],
            SosId::DI2Sos2 => &[
                "reference weights alpha_1^2 = alpha_3^2 are negative and do not close the identity; all seven weights refitted",
            ],
            SosId::DI1Sos1 => &["sqrt(alpha^2-4) in the third weight should read sqrt(alpha^2+4)"],
            SosId::DI1Sos2 => &[
                "the square (X_A B1 - Y_A B2) with weight 1/(2 S_Q) is missing",
                "sqrt(4+alpha^3) in alpha_1^2; the weight closing the identity is beta sqrt(4+alpha^2)/(4 S_Q)",
            ],
            SosId::DI1Sos3 => &[
                "third square should read (Delta+s^2)Z_A - (Delta+1)B0 + c Z_A B0 - c s Y_A B2",
                "the four squares do not close the identity; completed with (X_AB1-Y_AB2), (I+Z_A)(I-B0), (I-Z_A)(I+B0), -cB1+sX_AB0+Z_AB1, -cB2+sY_AB0+Z_AB2 and S_Q I - I; weights refitted",
            ],
            _ => &[],
        }
    }
}

impl fmt::Display for SosId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violated: Vec<String>,
}

/// Exact region test; coefficients of every id are nonnegative exactly on this region.
pub fn feasibility(id: SosId, alpha: f64, beta: f64) -> Feasibility {
    let mut violated = Vec::new();
    if !(alpha >= 0.0) {
        violated.push(format!("alpha = {alpha} < 0"));
    }
    match id.family() {
        Family::TiltedAnalog => {
            if !(alpha < 2.0) {
                violated.push(format!("alpha = {alpha} >= 2"));
            }
        }
        Family::TwoUntrusted => {
            let min = (1.0 + alpha * alpha).sqrt();
            if !(beta >= min) {
                violated.push(format!("beta >= sqrt(1+alpha^2) = {min} (beta = {beta})"));
            }
        }
        Family::ThreeUntrusted => {
            let min = (4.0 + alpha * alpha).sqrt();
            if !(beta >= min) {
                violated.push(format!("beta >= sqrt(4+alpha^2) = {min} (beta = {beta})"));
            }
        }
        Family::TwoTrusted | Family::ThreeTrusted => {
            if !(beta > 0.0) {
                violated.push(format!("beta > 0 (beta = {beta})"));
            }
        }
    }
    Feasibility { feasible: violated.is_empty(), violated }
}

/// One weighted square `w P^dagger P`.
#[derive(Debug, Clone)]
pub struct SosTerm {
    pub weight: f64,
    pub polynomial: Mat,
}

#[derive(Debug, Clone)]
pub struct SosDecomposition {
    pub id: SosId,
    pub alpha: f64,
    pub beta: f64,
    pub terms: Vec<SosTerm>,
}

impl SosDecomposition {
    pub fn sum(&self) -> Mat {
        let mut out = qmat::zeros(4);
        for t in &self.terms {
            out += t.polynomial.adjoint() * &t.polynomial * r(t.weight);
        }
        out
    }
}

/// Alice's Paulis and Bob's observables embedded in the two-qubit space.
struct Ops {
    i: Mat,
    za: Mat,
    xa: Mat,
    ya: Mat,
    b: Vec<Mat>,
}

impl Ops {
    fn new(bob: &[Mat]) -> Self {
        let id2 = identity(2);
        Ops {
            i: identity(4),
            za: kron(&qmat::pauli_z(), &id2),
            xa: kron(&qmat::pauli_x(), &id2),
            ya: kron(&qmat::pauli_y(), &id2),
            b: bob.iter().map(|m| kron(&id2, m)).collect(),
        }
    }
}

/// `x * m` with a real scalar.
fn sc(x: f64, m: &Mat) -> Mat {
    m * r(x)
}

struct Params {
    alpha: f64,
    beta: f64,
    /// `sqrt(1+alpha^2)` for two-setting families, `sqrt(4+alpha^2)` for three-setting ones.
    root: f64,
    c: f64,
    s: f64,
    sq: f64,
}

impl Params {
    fn new(id: SosId, alpha: f64, beta: f64) -> Self {
        let family = id.family();
        let (root, num) = match family.settings() {
            3 => ((4.0 + alpha * alpha).sqrt(), 2.0),
            _ => ((1.0 + alpha * alpha).sqrt(), 1.0),
        };
        let sq = match family {
            Family::TiltedAnalog => (8.0 + 2.0 * alpha * alpha).sqrt(),
            _ => beta + root,
        };
        Params { alpha, beta, root, c: alpha / root, s: num / root, sq }
    }
}

fn inequality(id: SosId, alpha: f64, beta: f64) -> Result<SteeringInequality, ModelError> {
    let beta = if id.family() == Family::TiltedAnalog { 1.0 } else { beta };
    SteeringInequality::new(id.family(), alpha, beta)
}

/// `S_Q I - S` for the id's inequality.
fn shifted(id: SosId, p: &Params, o: &Ops, bob: &[Mat]) -> Mat {
    let ineq = inequality(id, p.alpha, p.beta).expect("checked by caller");
    &o.i * r(p.sq) - ineq.operator_from(bob)
}

/// `(Delta+s^2) A - (Delta+1) B + c A B - c s C D` style squares shared by several ids.
fn delta_even(p: &Params, delta: f64, first: &Mat, second: &Mat, cross: &Mat, tail: &Mat) -> Mat {
    sc(delta + p.s * p.s, first) - sc(delta + 1.0, second) + sc(p.c, cross) - sc(p.c * p.s, tail)
}

fn delta_odd(p: &Params, delta: f64, a: &Mat, b: &Mat, mid: &Mat, tail: &Mat) -> Mat {
    -sc(delta + p.s * p.s, a) + sc(p.s * (delta + 1.0), b) + sc(delta * p.c, mid) - sc(p.c * p.s, tail)
}

/// Squares of the verified form of each id.
fn polynomials(id: SosId, p: &Params, o: &Ops, bob: &[Mat]) -> Vec<Mat> {
    let (i, za, xa, ya) = (&o.i, &o.za, &o.xa, &o.ya);
    let (c, s, a) = (p.c, p.s, p.alpha);
    let b0 = &o.b[0];
    let b1 = &o.b[1];
    let lhs = || shifted(id, p, o, bob);
    match id {
        SosId::MainSos1 => {
            let s0 = za * (b0 - b1) + xa * (b0 + b1);
            vec![lhs(), sc(a, xa) - s0]
        }
        SosId::MainSos2 => {
            let s1 = za * (b0 + b1) - xa * (b0 - b1);
            let s2 = za * (b0 - b1) - xa * (b0 + b1);
            vec![
                sc(2.0, za) - sc(p.sq / 2.0, &(b0 + b1)) + sc(a / 2.0, &s1),
                sc(2.0, xa) - sc(p.sq / 2.0, &(b0 - b1)) + sc(a / 2.0, &s2),
            ]
        }
        SosId::DS2Sos1 => vec![
            i - sc(c, b0) - sc(s, &(xa * b1)),
            za - b0,
            -sc(c, b1) + sc(s, &(xa * b0)) + za * b1,
            lhs(),
        ],
        SosId::DS2Sos2 => {
            let d = p.beta / p.root;
            vec![
                i - sc(c, b0) - sc(s, &(xa * b1)),
                za - b0,
                delta_even(p, d, b0, za, &(za * b0), &(xa * b1)),
                delta_odd(p, d, b1, xa, &(za * b1), &(xa * b0)),
            ]
        }
        SosId::DS1Sos1 => vec![i - za * b0, i - sc(c, za) - sc(s, &(xa * b1))],
        SosId::DS1Sos2 => vec![-sc(c, xa) + sc(s, &(za * b1)) + xa * b0, lhs()],
        SosId::DS1Sos3 => {
            let d = p.beta / p.root;
            vec![
                delta_even(p, d, za, b0, &(za * b0), &(xa * b1)),
                delta_odd(p, d, xa, b1, &(xa * b0), &(za * b1)),
                (i + za) * (i - b0),
                (i - za) * (i + b0),
                -sc(c, b1) + sc(s, &(xa * b0)) + za * b1,
                lhs(),
            ]
        }
        SosId::DI2Sos1 => {
            let b2 = &o.b[2];
            vec![
                i - sc(c, b0) - sc(s, &(xa * b1)),
                za - b0,
                i - sc(c, b0) - sc(s, &(ya * b2)),
                -sc(c, b1) + sc(s, &(xa * b0)) + za * b1,
                -sc(c, b2) + sc(s, &(ya * b0)) + za * b2,
                lhs(),
                xa * b1 - ya * b2,
            ]
        }
        SosId::DI2Sos2 => {
            let b2 = &o.b[2];
            let d = 1.0;
            vec![
                i - sc(c, b0) - sc(s, &(xa * b1)),
                za - b0,
                i - sc(c, b0) - sc(s, &(ya * b2)),
                delta_even(p, d, b0, za, &(za * b0), &(xa * b1)),
                delta_even(p, d, b0, za, &(za * b0), &(ya * b2)),
                delta_odd(p, d, b1, xa, &(za * b1), &(xa * b0)),
                delta_odd(p, d, b2, ya, &(za * b2), &(ya * b0)),
            ]
        }
        SosId::DI1Sos1 | SosId::Main3Set => {
            let b2 = &o.b[2];
            vec![
                i - za * b0,
                i - sc(c, za) - sc(s, &(xa * b1)),
                i - sc(c, za) - sc(s, &(ya * b2)),
            ]
        }
        SosId::DI1Sos2 => {
            let b2 = &o.b[2];
            vec![
                -sc(c, xa) + sc(s, &(za * b1)) + xa * b0,
                -sc(c, ya) + sc(s, &(za * b2)) + ya * b0,
                lhs(),
                xa * b1 - ya * b2,
            ]
        }
        SosId::DI1Sos3 => {
            let b2 = &o.b[2];
            let d = p.beta / (1.0 + a * a).sqrt();
            vec![
                delta_even(p, d, za, b0, &(za * b0), &(xa * b1)),
                delta_odd(p, d, xa, b1, &(xa * b0), &(za * b1)),
                delta_even(p, d, za, b0, &(za * b0), &(ya * b2)),
                delta_odd(p, d, ya, b2, &(ya * b0), &(za * b2)),
                xa * b1 - ya * b2,
                (i + za) * (i - b0),
                (i - za) * (i + b0),
                -sc(c, b1) + sc(s, &(xa * b0)) + za * b1,
                -sc(c, b2) + sc(s, &(ya * b0)) + za * b2,
                lhs(),
            ]
        }
    }
}

/// Closed-form weights of the verified form; `None` for refitted ids.
fn closed_weights(id: SosId, p: &Params) -> Option<Vec<f64>> {
    let (b, rt, sq) = (p.beta, p.root, p.sq);
    Some(match id {
        SosId::MainSos1 | SosId::MainSos2 => vec![1.0 / (2.0 * sq); 2],
        SosId::DS2Sos1 => {
            let a4 = 1.0 / (4.0 * b);
            vec![(b * rt - rt * rt) * a4, (b - rt) / 4.0, b * rt * a4, a4]
        }
        SosId::DS1Sos1 => vec![b / 2.0, rt / 2.0],
        SosId::DS1Sos2 => vec![b * rt / (2.0 * sq), 1.0 / (2.0 * sq)],
        SosId::DI2Sos1 => {
            let a6 = 1.0 / (4.0 * b);
            let a4 = b * rt / 2.0 * a6;
            let a1 = (b * rt / 2.0 - rt * rt / 2.0) * a6;
            vec![a1, (b - rt) / 4.0, a1, a4, a4, a6, a6]
        }
        SosId::DI1Sos1 | SosId::Main3Set => vec![b / 2.0, rt / 4.0, rt / 4.0],
        SosId::DI1Sos2 => {
            let x = b * rt / (4.0 * sq);
            vec![x, x, 1.0 / (2.0 * sq), 1.0 / (2.0 * sq)]
        }
        _ => return None,
    })
}

/// The reference statement of an id (squares and weights), where it differs from the verified form.
fn reference_form(id: SosId, p: &Params, o: &Ops, bob: &[Mat]) -> Option<Vec<(f64, Mat)>> {
    let polys = polynomials(id, p, o, bob);
    let (a, b, rt, sq, s) = (p.alpha, p.beta, p.root, p.sq, p.s);
    let zip = |w: Vec<f64>, ps: Vec<Mat>| Some(w.into_iter().zip(ps).collect());
    match id {
        SosId::DS2Sos2 => {
            let d = b / rt;
            let a4 = sq / (4.0 * s * b * (d * d + s * s) * (d * d + 1.0));
            let first = closed_weights(SosId::DS2Sos1, p)?;
            zip(vec![first[0], first[1], d * a4, a4], polys)
        }
        SosId::DS1Sos2 => zip(vec![1.0 / (2.0 * sq), b * rt / (2.0 * sq)], polys),
        SosId::DS1Sos3 => {
            let d = b / rt;
            let a2 = rt.powi(4) / (2.0 * b * b * rt + b * rt * rt + sq);
            zip(vec![d * a2, a2], polys[..2].to_vec())
        }
        SosId::DI2Sos2 => {
            let d = 1.0;
            let a6 = 1.0 / (4.0 * s * d * (d * d + s));
            let a4 = d * a6;
            let a1 = 1.0 / (2.0 * sq) - (d + 1.0) * (d + s * s) * a6;
            let a2 = b / 2.0 - (d * d + 1.0) / (s * (d + 1.0));
            zip(vec![a1, a2, a1, a4, a4, a6, a6], polys)
        }
        SosId::DI1Sos1 => zip(vec![b / 2.0, rt / 4.0, (a * a - 4.0).sqrt() / 4.0], polys),
        SosId::DI1Sos2 => {
            let x = (a * a + b * b + b * (4.0 + a.powi(3)).sqrt() + 3.0) / (4.0 * sq);
            zip(vec![x, x, 1.0 / (2.0 * sq)], polys[..3].to_vec())
        }
        SosId::DI1Sos3 => {
            let d = b / (1.0 + a * a).sqrt();
            let x = b / (4.0 * (d + s * s) * (d + 1.0));
            let y = 1.0 / (2.0 * s * (d + s * s) * (d + 1.0));
            let (za, ya) = (&o.za, &o.ya);
            let (b0, b2) = (&o.b[0], &o.b[2]);
            let third = sc(d + s * s, za) - sc(d + 1.0, b0) + sc(p.c, &(ya * b0)) - sc(p.c * s, &(za * b2));
            let ps = vec![polys[0].clone(), polys[1].clone(), third, polys[3].clone()];
            zip(vec![x, y, x, y], ps)
        }
        _ => None,
    }
}

/// Fixed generic settings used for refitting; independent of any caller seed.
fn fitting_settings(count: usize) -> Vec<Vec<Mat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f17);
    (0..count).map(|_| random_settings(&mut rng, 3).matrices()).collect()
}

fn flatten_into(m: &Mat, out: &mut Vec<f64>) {
    out.extend(m.iter().map(|z| z.re));
    out.extend(m.iter().map(|z| z.im));
}

fn refit_weights(id: SosId, p: &Params) -> Vec<f64> {
    let settings = fitting_settings(8);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for bob in &settings {
        let o = Ops::new(bob);
        let polys = polynomials(id, p, &o, bob);
        if cols.is_empty() {
            cols = vec![Vec::new(); polys.len()];
        }
        for (col, poly) in cols.iter_mut().zip(&polys) {
            flatten_into(&(poly.adjoint() * poly), col);
        }
        flatten_into(&shifted(id, p, &o, bob), &mut rhs);
    }
    let rows = rhs.len();
    let a = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    nnls(&a, &DVector::from_vec(rhs)).iter().copied().collect()
}

/// Lawson-Hanson nonnegative least squares.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
        let z = sub.svd(true, true).solve(b, 1e-13).expect("svd with vectors");
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let z = solve(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut step = f64::INFINITY;
            for k in (0..n).filter(|&k| passive[k] && z[k] <= 0.0) {
                step = step.min(x[k] / (x[k] - z[k]));
            }
            x += (z - &x) * step;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    x
}

fn check_settings(id: SosId, bob: &BobSettings) -> Result<(), SosError> {
    let expected = id.family().settings();
    if bob.len() != expected {
        return Err(SosError::SettingCount { id, expected, got: bob.len() });
    }
    Ok(())
}

fn check_feasible(id: SosId, alpha: f64, beta: f64) -> Result<(), SosError> {
    let f = feasibility(id, alpha, beta);
    if !f.feasible {
        return Err(SosError::Infeasible { id, alpha, beta, violated: f.violated });
    }
    Ok(())
}

/// Weights of the verified form at `(alpha, beta)`.
pub fn weights(id: SosId, alpha: f64, beta: f64) -> Result<Vec<f64>, SosError> {
    check_feasible(id, alpha, beta)?;
    let p = Params::new(id, alpha, beta);
    Ok(closed_weights(id, &p).unwrap_or_else(|| refit_weights(id, &p)))
}

pub fn decomposition(id: SosId, alpha: f64, beta: f64, bob: &BobSettings) -> Result<SosDecomposition, SosError> {
    check_settings(id, bob)?;
    let w = weights(id, alpha, beta)?;
    Ok(assemble(id, alpha, beta, &w, bob))
}

fn assemble(id: SosId, alpha: f64, beta: f64, w: &[f64], bob: &BobSettings) -> SosDecomposition {
    let p = Params::new(id, alpha, beta);
    let mats = bob.matrices();
    let o = Ops::new(&mats);
    let terms = polynomials(id, &p, &o, &mats)
        .into_iter()
        .zip(w)
        .map(|(polynomial, &weight)| SosTerm { weight, polynomial })
        .collect();
    SosDecomposition { id, alpha, beta, terms }
}

/// Frobenius norm of `S_Q I - S - sum_i w_i P_i^dagger P_i`.
pub fn sos_residual(id: SosId, alpha: f64, beta: f64, bob: &BobSettings) -> Result<f64, SosError> {
    let w = weights(id, alpha, beta)?;
    residual_with(id, alpha, beta, &w, bob)
}

fn residual_with(id: SosId, alpha: f64, beta: f64, w: &[f64], bob: &BobSettings) -> Result<f64, SosError> {
    check_settings(id, bob)?;
    let d = assemble(id, alpha, beta, w, bob);
    let p = Params::new(id, alpha, beta);
    let mats = bob.matrices();
    let lhs = shifted(id, &p, &Ops::new(&mats), &mats);
    Ok((lhs - d.sum()).norm())
}

/// Residual of the reference statement, if it differs from the verified form.
/// `NaN` when a reference weight is undefined (e.g. the square root of a negative number).
pub fn reference_residual(id: SosId, alpha: f64, beta: f64, bob: &BobSettings) -> Result<Option<f64>, SosError> {
    check_settings(id, bob)?;
    check_feasible(id, alpha, beta)?;
    let p = Params::new(id, alpha, beta);
    let mats = bob.matrices();
    let o = Ops::new(&mats);
    Ok(reference_form(id, &p, &o, &mats).map(|terms| {
        let mut sum = qmat::zeros(4);
        for (w, poly) in &terms {
            sum += poly.adjoint() * poly * r(*w);
        }
        (shifted(id, &p, &o, &mats) - sum).norm()
    }))
}

/// Least-squares scalar `k` with `S_Q I - S = k sum_i w_i P_i^dagger P_i` for the second tilted identity.
pub fn main_sos2_scalar(alpha: f64, bob: &BobSettings) -> Result<f64, SosError> {
    let d = decomposition(SosId::MainSos2, alpha, 1.0, bob)?;
    let p = Params::new(SosId::MainSos2, alpha, 1.0);
    let mats = bob.matrices();
    let lhs = shifted(SosId::MainSos2, &p, &Ops::new(&mats), &mats);
    let rhs = d.sum();
    let num: f64 = rhs.iter().zip(lhs.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    Ok(num / rhs.norm_squared())
}

/// `||P_i psi||` for every square of the id.
pub fn annihilation_norms(id: SosId, alpha: f64, beta: f64, psi: &Ket, bob: &BobSettings) -> Result<Vec<f64>, SosError> {
    let d = decomposition(id, alpha, beta, bob)?;
    Ok(d.terms.iter().map(|t| (&t.polynomial * psi).norm()).collect())
}

/// Uniform random dichotomic observables.
pub fn random_settings<R: Rng + ?Sized>(rng: &mut R, count: usize) -> BobSettings {
    BobSettings((0..count).map(|_| random_observable(rng)).collect())
}

pub fn random_observable<R: Rng + ?Sized>(rng: &mut R) -> BobObservable {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return BobObservable::new(v.map(|x| x / n)).expect("unit by construction");
        }
    }
}

/// Random `(alpha, beta)` inside the id's region.
pub fn random_parameters<R: Rng + ?Sized>(id: SosId, rng: &mut R) -> (f64, f64) {
    match id.family() {
        Family::TiltedAnalog => (rng.random_range(0.0..1.95), 1.0),
        Family::TwoTrusted | Family::ThreeTrusted => (rng.random_range(0.0..3.0), rng.random_range(0.05..5.0)),
        Family::TwoUntrusted => {
            let a: f64 = rng.random_range(0.0..3.0);
            (a, (1.0 + a * a).sqrt() + rng.random_range(0.0..4.0))
        }
        Family::ThreeUntrusted => {
            let a: f64 = rng.random_range(0.0..3.0);
            (a, (4.0 + a * a).sqrt() + rng.random_range(0.0..4.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelationId {
    /// `Z_A psi = Z~ psi`.
    R1,
    /// `sin t X_A (I + Z~) psi = cos t X~ (I - Z_A) psi`.
    R2,
    AnticommZx,
    AnticommZy,
}

impl RelationId {
    pub fn name(self) -> &'static str {
        match self {
            RelationId::R1 => "R1",
            RelationId::R2 => "R2",
            RelationId::AnticommZx => "ANTICOMM_ZX",
            RelationId::AnticommZy => "ANTICOMM_ZY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationResidual {
    pub relation: RelationId,
    pub norm: f64,
}

/// Bob's regularised operators `Z~, X~` and, for three settings, `Y~ = -B2`.
pub struct BobFrame {
    pub z: Mat,
    pub x: Mat,
    pub y: Option<Mat>,
}

/// For the tilted family `Z~ = (B0+B1)/(2 cos mu)` and `X~ = (B0-B1)/(2 sin mu)`
/// with `mu` the ideal angle of the inequality; otherwise `Z~ = B0`, `X~ = B1`.
pub fn bob_frame(ineq: &SteeringInequality, bob: &BobSettings) -> Result<BobFrame, SosError> {
    let expected = ineq.family().settings();
    if bob.len() != expected {
        return Err(ModelError::SettingCount { family: ineq.family(), expected, got: bob.len() }.into());
    }
    let m = bob.matrices();
    let (z, x) = if ineq.family() == Family::TiltedAnalog {
        let (b0, b1) = (bob.0[0].bloch(), bob.0[1].bloch());
        let plus = (0..3).map(|k| (b0[k] + b1[k]).powi(2)).sum::<f64>().sqrt();
        let minus = (0..3).map(|k| (b0[k] - b1[k]).powi(2)).sum::<f64>().sqrt();
        if plus < 1e-12 || minus < 1e-12 {
            return Err(SosError::Degenerate("B0 = +-B1 (mu = 0 or pi/2)".into()));
        }
        let mu = ineq.ideal_mu();
        ((&m[0] + &m[1]) * r(0.5 / mu.cos()), (&m[0] - &m[1]) * r(0.5 / mu.sin()))
    } else {
        (m[0].clone(), m[1].clone())
    };
    let y = (expected == 3).then(|| -m[2].clone());
    Ok(BobFrame { z, x, y })
}

pub fn relation_residuals(ineq: &SteeringInequality, psi: &Ket, bob: &BobSettings) -> Result<Vec<RelationResidual>, SosError> {
    let frame = bob_frame(ineq, bob)?;
    let id2 = identity(2);
    let on_bob = |m: &Mat| kron(&id2, m);
    let (zb, xb) = (on_bob(&frame.z), on_bob(&frame.x));
    let za = kron(&qmat::pauli_z(), &id2);
    let xa = kron(&qmat::pauli_x(), &id2);
    let i4 = identity(4);
    let t = ineq.target_theta();
    let mut out = vec![
        RelationResidual { relation: RelationId::R1, norm: (&za * psi - &zb * psi).norm() },
        RelationResidual {
            relation: RelationId::R2,
            norm: ((&xa * (&i4 + &zb) * psi) * r(t.sin()) - (&xb * (&i4 - &za) * psi) * r(t.cos())).norm(),
        },
        RelationResidual { relation: RelationId::AnticommZx, norm: ((&zb * &xb + &xb * &zb) * psi).norm() },
    ];
    if let Some(y) = &frame.y {
        let yb = on_bob(y);
        out.push(RelationResidual { relation: RelationId::AnticommZy, norm: ((&zb * &yb + &yb * &zb) * psi).norm() });
    }
    Ok(out)
}

/// The two-sided SWAP circuit as a linear map from the original two qubits
/// to (original) (x) (Alice ancilla, Bob ancilla).
fn swap_map(frame: &BobFrame) -> Mat {
    let id2 = identity(2);
    let i4 = identity(4);
    let za = kron(&qmat::pauli_z(), &id2);
    let xa = kron(&qmat::pauli_x(), &id2);
    let zb = kron(&id2, &frame.z);
    let xb = kron(&id2, &frame.x);
    let branches = [
        (&i4 + &za) * (&i4 + &zb),
        &xa * (&i4 + &za) * (&i4 - &zb),
        &xb * (&i4 - &za) * (&i4 + &zb),
        &xa * &xb * (&i4 - &za) * (&i4 - &zb),
    ];
    let mut v = Mat::zeros(16, 4);
    for (k, m) in branches.iter().enumerate() {
        for row in 0..4 {
            for col in 0..4 {
                v[(row * 4 + k, col)] = m[(row, col)] * r(0.25);
            }
        }
    }
    v
}

#[derive(Debug, Clone)]
pub struct SwapOutput {
    /// Normalised state of the two ancillas.
    pub extracted: Mat,
    pub target_fidelity: f64,
    /// `||V^dagger V - I||`; nonzero when the regularised Bob operators are not unitary.
    pub isometry_defect: f64,
}

impl SwapOutput {
    pub fn degraded(&self) -> bool {
        self.isometry_defect > 1e-9
    }
}

pub fn swap_isometry_output(psi: &Ket, ineq: &SteeringInequality, bob: &BobSettings) -> Result<SwapOutput, SosError> {
    swap_isometry_output_mixed(&projector(psi), ineq, bob)
}

/// Mixed input by linearity of the circuit.
pub fn swap_isometry_output_mixed(rho: &Mat, ineq: &SteeringInequality, bob: &BobSettings) -> Result<SwapOutput, SosError> {
    let frame = bob_frame(ineq, bob)?;
    let v = swap_map(&frame);
    let out = &v * rho * v.adjoint();
    let anc = partial_trace_dims(&out, 4, 4, Keep::Second);
    let tr = anc.trace().re;
    let extracted = anc * r(1.0 / tr);
    let target = ineq.target().ket();
    let target_fidelity = qmat::braket(&target, &extracted).re;
    let isometry_defect = (v.adjoint() * &v - identity(4)).norm();
    Ok(SwapOutput { extracted, target_fidelity, isometry_defect })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementResiduals {
    pub z: f64,
    pub x: f64,
    pub y: Option<f64>,
}

impl MeasurementResiduals {
    pub fn max(&self) -> f64 {
        self.z.max(self.x).max(self.y.unwrap_or(0.0))
    }
}

/// `1 - <t| rho_anc |t>` where `rho_anc` is the ancilla state of `Phi(M psi)`
/// and `t = (I (x) sigma) |Phi(theta)>`.
pub fn measurement_selftest_residual(ineq: &SteeringInequality, psi: &Ket, bob: &BobSettings) -> Result<MeasurementResiduals, SosError> {
    let frame = bob_frame(ineq, bob)?;
    let v = swap_map(&frame);
    let target = ineq.target().ket();
    let id2 = identity(2);
    let defect = |bob_op: &Mat, sigma: Mat| {
        let moved = kron(&id2, bob_op) * psi;
        let out = &v * moved;
        let anc = partial_trace_dims(&projector(&out), 4, 4, Keep::Second);
        let tr = anc.trace().re;
        if tr <= 1e-300 {
            return 1.0;
        }
        let t = kron(&id2, &sigma) * &target;
        1.0 - qmat::braket(&t, &anc).re / tr
    };
    Ok(MeasurementResiduals {
        z: defect(&frame.z, qmat::pauli_z()),
        x: defect(&frame.x, qmat::pauli_x()),
        y: frame.y.as_ref().map(|y| defect(y, qmat::pauli_y())),
    })
}

/// Original-register factor `<Phi(theta)|_anc Phi(psi)>`; equals the junk state when the output factorises.
pub fn junk_state(psi: &Ket, ineq: &SteeringInequality, bob: &BobSettings) -> Result<Ket, SosError> {
    let frame = bob_frame(ineq, bob)?;
    let out = swap_map(&frame) * psi;
    let target = ineq.target().ket();
    let mut junk = Ket::zeros(4);
    for row in 0..4 {
        for k in 0..4 {
            junk[row] += target[k].conj() * out[row * 4 + k];
        }
    }
    Ok(junk)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdReport {
    pub id: SosId,
    pub draws: usize,
    pub max_residual: f64,
    /// Worst residual of the reference statement on the same draws, when it differs.
    pub reference_residual: Option<f64>,
}

impl IdReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual < tol
    }
}

/// Deliberate error injected into one weight, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub id: SosId,
    pub term: usize,
    pub relative: f64,
}

/// Checks one id on `draws` random `(alpha, beta, bob)` tuples.
pub fn verify_id<R: Rng + ?Sized>(id: SosId, draws: usize, rng: &mut R, perturb: Option<Perturbation>) -> IdReport {
    let mut max_residual: f64 = 0.0;
    let mut reference: Option<f64> = None;
    for _ in 0..draws {
        let (alpha, beta) = random_parameters(id, rng);
        let bob = random_settings(rng, id.family().settings());
        let mut w = weights(id, alpha, beta).expect("parameters drawn inside the region");
        if let Some(p) = perturb.filter(|p| p.id == id) {
            w[p.term] *= 1.0 + p.relative;
        }
        let res = residual_with(id, alpha, beta, &w, &bob).expect("setting count matches");
        max_residual = max_residual.max(if res.is_nan() { f64::INFINITY } else { res });
        if let Ok(Some(rr)) = reference_residual(id, alpha, beta, &bob) {
            let rr = if rr.is_nan() { f64::INFINITY } else { rr };
            reference = Some(reference.map_or(rr, |x: f64| x.max(rr)));
        }
    }
    IdReport { id, draws, max_residual, reference_residual: reference }
}
