//! Moment-matrix lower bound on the SWAP fidelity.
//!
//! `Gamma` is a block matrix indexed by words in Bob's projectors
//! `E_k = (I + B_k)/2`. Block `(i, j)` is `sigma_L^T`, where
//! `L = reduce(reverse(u_i) ++ u_j)` and `sigma_L = Tr_B[(I (x) E_L) rho_AB]`.
//! Words reduce only by idempotence `E_k E_k = E_k`.
//!
//! The program minimises `Tr(M Gamma)` over Hermitian `Gamma >= 0` with the
//! label pattern, `Tr rho_C = 1` and the steering value fixed. Free
//! parameters are the real coordinates of one 2x2 block per label class.
//! Eliminating the two equalities leaves a linear matrix inequality solved
//! by the interior-point method in [`ipm`] on the real embedding
//! `[[Re, -Im], [Im, Re]]`.

mod ipm;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{Family, SteeringInequality};
use crate::qmat::{self, c, identity, kron, partial_trace_dims, r, Keep, Mat, C64};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("moment matrices exist for 2 or 3 settings, not {0}")]
    Settings(usize),
    #[error("the moment-matrix bound is defined for the marginal families, not {0}")]
    UnsupportedFamily(Family),
    #[error("theta = {0} outside (0, pi/4]")]
    Theta(f64),
    #[error("observed value {observed} exceeds the quantum bound {bound}")]
    Infeasible { observed: f64, bound: f64 },
    #[error("strategy has {got} projectors, the pattern needs {expected}")]
    Strategy { expected: usize, got: usize },
    #[error("state dimension {0} is not 2 x d")]
    StateDimension(usize),
}

/// Reduced word in Bob's projectors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BobWord(pub Vec<u8>);

impl BobWord {
    pub fn reduced(letters: impl IntoIterator<Item = u8>) -> Self {
        let mut out: Vec<u8> = Vec::new();
        for l in letters {
            if out.last() != Some(&l) {
                out.push(l);
            }
        }
        BobWord(out)
    }

    pub fn adjoint(&self) -> Self {
        BobWord(self.0.iter().rev().copied().collect())
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.0.iter().eq(self.0.iter().rev())
    }

    /// Label of block `(self, other)`.
    pub fn pair(&self, other: &BobWord) -> BobWord {
        BobWord::reduced(self.0.iter().rev().chain(other.0.iter()).copied())
    }
}

impl fmt::Display for BobWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("rho");
        }
        let parts: Vec<String> = self.0.iter().map(|k| format!("0|{k}")).collect();
        write!(f, "sigma_{}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaPattern {
    pub settings: usize,
    pub words: Vec<BobWord>,
    /// `labels[i][j]` is the canonical label of block `(i, j)`.
    pub labels: Vec<Vec<BobWord>>,
}

impl GammaPattern {
    pub fn blocks(&self) -> usize {
        self.words.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.words.len()
    }

    /// Block positions grouped by label.
    pub fn classes(&self) -> BTreeMap<BobWord, Vec<(usize, usize)>> {
        let mut out: BTreeMap<BobWord, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, row) in self.labels.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                out.entry(l.clone()).or_default().push((i, j));
            }
        }
        out
    }

    fn index_of(&self, word: &[u8]) -> usize {
        self.words.iter().position(|w| w.0 == word).expect("word in pattern")
    }
}

pub fn build_gamma_pattern(settings: usize) -> Result<GammaPattern, SdpError> {
    let words: Vec<Vec<u8>> = match settings {
        3 => vec![vec![], vec![0], vec![1], vec![2], vec![1, 0], vec![2, 0], vec![2, 1]],
        2 => vec![vec![], vec![0], vec![1], vec![1, 0]],
        n => return Err(SdpError::Settings(n)),
    };
    let words: Vec<BobWord> = words.into_iter().map(BobWord).collect();
    let labels = words.iter().map(|u| words.iter().map(|v| u.pair(v)).collect()).collect();
    Ok(GammaPattern { settings, words, labels })
}

fn check_theta(theta: f64) -> Result<(), SdpError> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-12) {
        return Err(SdpError::Theta(theta));
    }
    Ok(())
}

/// `sigma_L` lookup used by the linear functionals below.
type Assemblage<'a> = dyn Fn(&[u8]) -> Mat + 'a;

fn trace_with(p: &Mat, m: &Mat) -> C64 {
    (p * m).trace()
}

/// SWAP fidelity as a linear function of the assemblage.
fn fidelity_expr(theta: f64, t: &Assemblage) -> f64 {
    let (cs, sn) = (theta.cos().powi(2), theta.sin().powi(2));
    let s2 = (2.0 * theta).sin();
    let (rho, s0, s10, s010, s01) = (t(&[]), t(&[0]), t(&[1, 0]), t(&[0, 1, 0]), t(&[0, 1]));
    let v = r(cs) * s0[(0, 0)] + r(sn) * (rho[(1, 1)] - s0[(1, 1)])
        + r(s2) * (s10[(0, 1)] - s010[(0, 1)] + s01[(1, 0)] - s010[(1, 0)]);
    v.re
}

fn functional_expr(ineq: &SteeringInequality, t: &Assemblage) -> f64 {
    let (rho, s0, s1) = (t(&[]), t(&[0]), t(&[1]));
    let (z, x, y) = (qmat::pauli_z(), qmat::pauli_x(), qmat::pauli_y());
    let (a, b) = (ineq.alpha(), ineq.beta());
    let marginal = if ineq.family().trusted_marginal() {
        trace_with(&z, &rho)
    } else {
        (s0.clone() * r(2.0) - &rho).trace()
    };
    let mut v = r(a) * marginal
        + r(b) * trace_with(&z, &(s0 * r(2.0) - &rho))
        + trace_with(&x, &(s1 * r(2.0) - &rho));
    if ineq.family().settings() == 3 {
        v += trace_with(&y, &(t(&[2]) * r(2.0) - &rho));
    }
    v.re
}

/// `Tr(M Gamma)` as a real symmetric matrix on the pattern's scalar indices.
pub fn objective_for(pattern: &GammaPattern, theta: f64) -> Result<DMatrix<f64>, SdpError> {
    check_theta(theta)?;
    let n = pattern.dim();
    let mut m = DMatrix::zeros(n, n);
    let (cs, sn, s2) = (theta.cos().powi(2), theta.sin().powi(2), (2.0 * theta).sin());
    let e = pattern.index_of(&[]);
    let z = pattern.index_of(&[0]);
    let zx = pattern.index_of(&[1, 0]);
    // sigma_L^T sits in block (i, j); T(L)[a, b] is the scalar entry (2i + b, 2j + a).
    m[(2 * e + 1, 2 * e + 1)] += sn;
    m[(2 * z, 2 * z)] += cs;
    m[(2 * z + 1, 2 * z + 1)] -= sn;
    // sin 2t * 2 Re T(1,0)[0,1] from block (empty, (1,0)); -sin 2t * 2 Re T(0,1,0)[0,1] from block ((1,0),(1,0)).
    for (i, j, w) in [(2 * e + 1, 2 * zx, s2), (2 * zx + 1, 2 * zx, -s2)] {
        m[(i, j)] += w;
        m[(j, i)] += w;
    }
    Ok(m)
}

pub fn objective_m(theta: f64) -> Result<DMatrix<f64>, SdpError> {
    objective_for(&build_gamma_pattern(3)?, theta)
}

/// Entries of the 3-setting objective that have reference values, 1-based:
/// `(row, col, reference, derived)`.
pub fn objective_checksum(theta: f64) -> Result<Vec<(usize, usize, f64, f64)>, SdpError> {
    let m = objective_m(theta)?;
    let (cs, sn, s2) = (theta.cos().powi(2), theta.sin().powi(2), (2.0 * theta).sin());
    let reference = [(2, 2, sn), (2, 9, s2), (9, 2, s2), (3, 3, cs), (4, 4, -sn), (9, 10, -s2), (10, 9, -s2)];
    Ok(reference.iter().map(|&(i, j, v)| (i, j, v, m[(i - 1, j - 1)])).collect())
}

/// `Gamma` of a genuine strategy: state on `C^2 (x) C^d` and Bob's projectors on `C^d`.
pub fn assemble_gamma(pattern: &GammaPattern, rho_ab: &Mat, projectors: &[Mat]) -> Result<Mat, SdpError> {
    if projectors.len() < pattern.settings {
        return Err(SdpError::Strategy { expected: pattern.settings, got: projectors.len() });
    }
    let n = rho_ab.nrows();
    if n % 2 != 0 || n == 0 {
        return Err(SdpError::StateDimension(n));
    }
    let d = n / 2;
    let word_op = |w: &[u8]| w.iter().fold(identity(d), |acc, &k| acc * &projectors[k as usize]);
    let k = pattern.blocks();
    let mut g = qmat::zeros(2 * k);
    for (i, u) in pattern.words.iter().enumerate() {
        for (j, v) in pattern.words.iter().enumerate() {
            let op = word_op(&u.adjoint().0) * word_op(&v.0);
            let sigma = partial_trace_dims(&(kron(&identity(2), &op) * rho_ab), 2, d, Keep::First);
            g.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&sigma.transpose());
        }
    }
    Ok(g)
}

/// Largest deviation between blocks that share a label, with adjoint labels compared to the adjoint block.
pub fn pattern_defect(pattern: &GammaPattern, gamma: &Mat) -> f64 {
    let block = |i: usize, j: usize| gamma.view((2 * i, 2 * j), (2, 2)).clone_owned();
    let mut worst: f64 = 0.0;
    let classes = pattern.classes();
    for (label, pos) in &classes {
        let (i0, j0) = pos[0];
        let first = block(i0, j0);
        for &(i, j) in &pos[1..] {
            worst = worst.max((block(i, j) - &first).norm());
        }
        if let Some(adj) = classes.get(&label.adjoint()) {
            let (i, j) = adj[0];
            worst = worst.max((block(i, j) - first.adjoint()).norm());
        }
    }
    worst
}

fn assemblage_of<'a>(pattern: &'a GammaPattern, gamma: &'a Mat) -> impl Fn(&[u8]) -> Mat + 'a {
    let classes = pattern.classes();
    move |w: &[u8]| {
        let (i, j) = classes[&BobWord(w.to_vec())][0];
        gamma.view((2 * i, 2 * j), (2, 2)).transpose()
    }
}

pub fn fidelity_value(pattern: &GammaPattern, theta: f64, gamma: &Mat) -> f64 {
    fidelity_expr(theta, &assemblage_of(pattern, gamma))
}

pub fn steering_value(pattern: &GammaPattern, ineq: &SteeringInequality, gamma: &Mat) -> f64 {
    functional_expr(ineq, &assemblage_of(pattern, gamma))
}

/// One real coordinate of the block attached to `label`.
struct Param {
    label: BobWord,
    block: Mat,
}

fn params(pattern: &GammaPattern) -> Vec<Param> {
    let unit = |a: usize, b: usize, z: C64| {
        let mut m = qmat::zeros(2);
        m[(a, b)] = z;
        m
    };
    let mut out = Vec::new();
    for label in pattern.classes().into_keys() {
        if label.is_self_adjoint() {
            out.push(Param { label: label.clone(), block: unit(0, 0, r(1.0)) });
            out.push(Param { label: label.clone(), block: unit(1, 1, r(1.0)) });
            out.push(Param { label: label.clone(), block: unit(0, 1, r(1.0)) + unit(1, 0, r(1.0)) });
            out.push(Param { label, block: unit(0, 1, c(0.0, -1.0)) + unit(1, 0, c(0.0, 1.0)) });
        } else if label < label.adjoint() {
            for a in 0..2 {
                for b in 0..2 {
                    out.push(Param { label: label.clone(), block: unit(a, b, r(1.0)) });
                    out.push(Param { label: label.clone(), block: unit(a, b, c(0.0, 1.0)) });
                }
            }
        }
    }
    out
}

impl Param {
    fn block_for(&self, label: &BobWord) -> Option<Mat> {
        if *label == self.label {
            Some(self.block.clone())
        } else if !self.label.is_self_adjoint() && *label == self.label.adjoint() {
            Some(self.block.adjoint())
        } else {
            None
        }
    }

    fn gamma(&self, pattern: &GammaPattern) -> Mat {
        let mut g = qmat::zeros(pattern.dim());
        for (i, row) in pattern.labels.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                if let Some(b) = self.block_for(l) {
                    g.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&b);
                }
            }
        }
        g
    }

    fn assemblage(&self) -> impl Fn(&[u8]) -> Mat + '_ {
        move |w: &[u8]| self.block_for(&BobWord(w.to_vec())).map(|b| b.transpose()).unwrap_or_else(|| qmat::zeros(2))
    }
}

fn real_embedding(h: &Mat) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

fn complex_from_embedding(e: &DMatrix<f64>) -> Mat {
    let n = e.nrows() / 2;
    Mat::from_fn(n, n, |i, j| {
        let re = 0.5 * (e[(i, j)] + e[(i + n, j + n)]);
        let im = 0.5 * (e[(i + n, j)] - e[(i, j + n)]);
        c(re, im)
    })
}

/// Orthonormal basis of the null space of the rows of `e`, plus the least-norm solution of `e y = rhs`.
fn eliminate(rows: &[DVector<f64>], rhs: &[f64]) -> (DVector<f64>, Vec<DVector<f64>>) {
    let p = rows[0].len();
    let e = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let gram = &e * e.transpose();
    let y0 = e.transpose() * gram.try_inverse().expect("independent equalities") * DVector::from_column_slice(rhs);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for q in &ortho {
            v -= q * q.dot(&v);
        }
        ortho.push(v.normalize());
    }
    for k in 0..p {
        let mut v = DVector::zeros(p);
        v[k] = 1.0;
        for q in ortho.iter().chain(basis.iter()) {
            v -= q * q.dot(&v);
        }
        for q in ortho.iter().chain(basis.iter()) {
            v -= q * q.dot(&v);
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
    }
    (y0, basis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    NotConverged,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::NotConverged => "not-converged",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Lower bound from the primal-side (dual to the moment problem) objective.
    pub f_min: f64,
    /// Value at the moment-matrix iterate; an upper bound on the minimum.
    pub f_upper: f64,
    pub status: SolverStatus,
    pub dual_gap: f64,
    pub iterations: usize,
    pub gamma: Mat,
}

fn pattern_for(ineq: &SteeringInequality) -> Result<GammaPattern, SdpError> {
    match ineq.family() {
        Family::TiltedAnalog => Err(SdpError::UnsupportedFamily(ineq.family())),
        f => build_gamma_pattern(f.settings()),
    }
}

/// Minimum SWAP fidelity over all moment matrices reaching `observed`.
pub fn solve_min_fidelity(
    ineq: &SteeringInequality,
    theta: f64,
    observed: f64,
    solver_tol: f64,
) -> Result<SdpSolution, SdpError> {
    check_theta(theta)?;
    let pattern = pattern_for(ineq)?;
    let bound = ineq.quantum_bound();
    if observed > bound + 1e-9 {
        return Err(SdpError::Infeasible { observed, bound });
    }
    let ps = params(&pattern);
    let np = ps.len();
    let mut cost = DVector::zeros(np);
    let mut trace_row = DVector::zeros(np);
    let mut value_row = DVector::zeros(np);
    let mut blocks = Vec::with_capacity(np);
    for (k, p) in ps.iter().enumerate() {
        let t = p.assemblage();
        cost[k] = fidelity_expr(theta, &t);
        trace_row[k] = t(&[]).trace().re;
        value_row[k] = functional_expr(ineq, &t);
        blocks.push(real_embedding(&p.gamma(&pattern)));
    }
    let (y0, null) = eliminate(&[trace_row, value_row], &[1.0, observed]);
    let dim = 2 * pattern.dim();
    let lift = |coeffs: &DVector<f64>| {
        let mut out = DMatrix::zeros(dim, dim);
        for (b, w) in blocks.iter().zip(coeffs.iter()) {
            if *w != 0.0 {
                out += b * *w;
            }
        }
        out
    };
    let f0 = lift(&y0);
    let shift = cost.dot(&y0);
    let a: Vec<DMatrix<f64>> = null.iter().map(|v| -lift(v)).collect();
    let b = DVector::from_iterator(null.len(), null.iter().map(|v| -cost.dot(v)));
    let data = ipm::SdpData { c: f0.clone(), a, b };
    let out = ipm::solve(&data, solver_tol.min(1e-7), MAX_ITERATIONS);
    let f_min = shift - out.primal;
    let f_upper = shift - out.dual;
    let mut y = y0.clone();
    for (v, zk) in null.iter().zip(out.y.iter()) {
        y += v * *zk;
    }
    let gamma = complex_from_embedding(&lift(&y));
    let converged = out.converged
        || (out.primal_infeasibility < solver_tol && out.dual_infeasibility < solver_tol && (f_upper - f_min).abs() < solver_tol);
    Ok(SdpSolution {
        f_min,
        f_upper,
        status: if converged { SolverStatus::Optimal } else { SolverStatus::NotConverged },
        dual_gap: (f_upper - f_min).abs(),
        iterations: out.iterations,
        gamma,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub observed: f64,
    pub result: Result<SdpSolution, SdpError>,
}

/// Solves each grid point independently; rows keep the grid order.
pub fn sweep_curve(
    ineq: &SteeringInequality,
    theta: f64,
    grid: &[f64],
    solver_tol: f64,
    workers: usize,
) -> Vec<SweepRow> {
    let workers = workers.max(1).min(grid.len().max(1));
    let mut rows: Vec<Option<SweepRow>> = vec![None; grid.len()];
    std::thread::scope(|scope| {
        let chunks: Vec<_> = rows.chunks_mut(grid.len().div_ceil(workers).max(1)).collect();
        let mut start = 0;
        for chunk in chunks {
            let len = chunk.len();
            let pts = &grid[start..start + len];
            start += len;
            scope.spawn(move || {
                for (slot, &obs) in chunk.iter_mut().zip(pts) {
                    *slot = Some(SweepRow { observed: obs, result: solve_min_fidelity(ineq, theta, obs, solver_tol) });
                }
            });
        }
    });
    rows.into_iter().map(|r| r.expect("every row solved")).collect()
}

/// `n` evenly spaced values from the LHS bound to the quantum bound.
pub fn violation_grid(ineq: &SteeringInequality, n: usize) -> Vec<f64> {
    let (lo, hi) = (ineq.lhs_bound(), ineq.quantum_bound());
    match n {
        0 => vec![],
        1 => vec![hi],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Random mixed state on `C^2 (x) C^bob_dim` and random rank-one projectors for Bob.
pub fn random_strategy<R: rand::Rng + ?Sized>(rng: &mut R, settings: usize, bob_dim: usize) -> (Mat, Vec<Mat>) {
    let mut entry = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let n = 2 * bob_dim;
    let g = Mat::from_fn(n, n, |_, _| entry());
    let rho = &g * g.adjoint();
    let rho = &rho * r(1.0 / rho.trace().re);
    let projectors = (0..settings)
        .map(|_| {
            let v = qmat::Ket::from_fn(bob_dim, |_, _| entry());
            qmat::projector(&v.normalize())
        })
        .collect();
    (rho, projectors)
}

pub const CSV_HEADER: &str = "observed,f_min,status,dual_gap";

pub fn csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        match &row.result {
            Ok(s) => out.push_str(&format!("{},{},{},{}\n", row.observed, s.f_min, s.status, s.dual_gap)),
            Err(SdpError::Infeasible { .. }) => out.push_str(&format!("{},,infeasible,\n", row.observed)),
            Err(_) => out.push_str(&format!("{},,error,\n", row.observed)),
        }
    }
    out
}
