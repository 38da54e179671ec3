//! Affine fidelity certificates `F >= s S + tau` from local extraction channels.
//!
//! For a channel whose Heisenberg image of the target projector is `K`, the
//! certificate holds at a given choice of Bob's settings iff
//! `G = K - s S - tau I` is positive semidefinite. Every certifier below picks
//! the channel weights in closed form, then confirms PSD-ness numerically on
//! a grid of settings.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, SQRT_2};

use thiserror::Error;

use crate::model::{BobObservable, BobSettings, Family, ModelError, SteeringInequality};
use crate::qmat::{
    self, bloch_operator, c, identity, kron, min_eigenvalue, pauli_x, pauli_y, pauli_z,
    projector, r, Ket, Mat,
};

/// A grid point is certified when the smallest eigenvalue of `G` is at least `-MARGIN_TOL`.
pub const MARGIN_TOL: f64 = 1e-9;

/// Default number of `mu` samples per case region.
pub const DEFAULT_MU_GRID: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("mu = {0} outside (0, pi/4]")]
    MuRange(f64),
    #[error("empty q1 window [{lo:.6}, {hi:.6}] at mu = {mu}")]
    EmptyWindow { mu: f64, lo: f64, hi: f64 },
    #[error("certificate invalid at {at}: {what} margin {margin:.3e}")]
    Invalid { at: String, what: &'static str, margin: f64 },
    #[error("invalid channel: {0}")]
    Channel(String),
    #[error("observed value {observed} exceeds the quantum bound {bound}")]
    AboveQuantum { observed: f64, bound: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which 2x2 block of the tilted operator owns the second-largest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// `cos 2mu >= alpha^2/4`: the `{|00>,|11>}` block.
    Case1,
    /// The `{|01>,|10>}` block.
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralData {
    pub case_tag: CaseTag,
    /// Descending; `lambdas[2] == -lambdas[1]`, `lambdas[3] == -lambdas[0]`.
    pub lambdas: [f64; 4],
    pub gamma: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl SpectralData {
    /// Eigenvectors aligned with `lambdas`.
    pub fn eigenvectors(&self) -> [Ket; 4] {
        let (cg, sg) = (self.gamma.cos(), self.gamma.sin());
        let v = |a: f64, b: f64, cc: f64, d: f64| qmat::ket(&[r(a), r(b), r(cc), r(d)]);
        let top = v(cg, 0.0, 0.0, sg);
        let even_low = v(sg, 0.0, 0.0, -cg);
        let odd_high = v(0.0, cg, sg, 0.0);
        let bottom = v(0.0, -sg, cg, 0.0);
        match self.case_tag {
            CaseTag::Case1 => [top, even_low, odd_high, bottom],
            CaseTag::Case2 => [top, odd_high, even_low, bottom],
        }
    }
}

/// Upper end of the Case-1 region.
pub fn case_boundary(alpha: f64) -> f64 {
    ((4.0 - alpha * alpha) / 8.0).sqrt().asin()
}

/// Closed-form spectrum of `alpha Z + Z(B0+B1) + X(B0-B1)` with `B_r = cos mu Z +- sin mu X`.
pub fn spectral_tilted(alpha: f64, mu: f64) -> Result<SpectralData, CertifyError> {
    if !(mu > 0.0 && mu <= FRAC_PI_4 + 1e-15) {
        return Err(CertifyError::MuRange(mu));
    }
    let root = (alpha * alpha + 4.0 * mu.sin().powi(2)).sqrt();
    let shift = 2.0 * mu.cos();
    let case_tag = if (2.0 * mu).cos() >= alpha * alpha / 4.0 { CaseTag::Case1 } else { CaseTag::Case2 };
    let (l1, l2) = match case_tag {
        CaseTag::Case1 => (root + shift, shift - root),
        CaseTag::Case2 => (root + shift, root - shift),
    };
    Ok(SpectralData {
        case_tag,
        lambdas: [l1, l2, -l2, -l1],
        gamma: 0.5 * (2.0 * mu.sin()).atan2(alpha),
        mu,
        alpha,
    })
}

/// Mixture of local unitaries on Bob's qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionChannel {
    branches: Vec<(f64, Mat)>,
}

impl ExtractionChannel {
    pub fn new(branches: Vec<(f64, Mat)>) -> Result<Self, CertifyError> {
        let total: f64 = branches.iter().map(|(q, _)| q).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CertifyError::Channel(format!("probabilities sum to {total}")));
        }
        for (q, u) in &branches {
            if *q < 0.0 {
                return Err(CertifyError::Channel(format!("negative probability {q}")));
            }
            if u.shape() != (2, 2) || (u.adjoint() * u - identity(2)).norm() > 1e-12 {
                return Err(CertifyError::Channel("branch is not a 2x2 unitary".into()));
            }
        }
        Ok(ExtractionChannel { branches })
    }

    pub fn identity() -> Self {
        ExtractionChannel { branches: vec![(1.0, identity(2))] }
    }

    /// `q1` on the identity, `1 - q1` on `u`.
    pub fn two_branch(q1: f64, u: Mat) -> Result<Self, CertifyError> {
        Self::new(vec![(q1, identity(2)), (1.0 - q1, u)])
    }

    pub fn branches(&self) -> &[(f64, Mat)] {
        &self.branches
    }
}

/// `K = sum_i q_i (I (x) U_i)|psi><psi|(I (x) U_i)^dagger`.
///
/// This is the Heisenberg image of `|psi><psi|` under the extraction channel
/// whose branches apply `U_i^dagger`; for Hermitian `U_i` the two coincide.
pub fn dual_channel_state(channel: &ExtractionChannel, psi: &Ket) -> Mat {
    let mut k = qmat::zeros(psi.len());
    for (q, u) in &channel.branches {
        let v = kron(&identity(2), u) * psi;
        k += projector(&v) * r(*q);
    }
    k
}

/// `G = K - s S - tau I` with `K` built from the inequality's target state.
pub fn g_matrix(
    ineq: &SteeringInequality,
    bob: &BobSettings,
    channel: &ExtractionChannel,
    s: f64,
    tau: f64,
) -> Result<Mat, CertifyError> {
    let k = dual_channel_state(channel, &ineq.target().ket());
    let op = ineq.steering_operator(bob)?;
    Ok(k - op * r(s) - identity(4) * r(tau))
}

pub fn g_margin(
    ineq: &SteeringInequality,
    bob: &BobSettings,
    channel: &ExtractionChannel,
    s: f64,
    tau: f64,
) -> Result<f64, CertifyError> {
    Ok(min_eigenvalue(&g_matrix(ineq, bob, channel, s, tau)?))
}

/// One certified grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessPoint {
    pub mu: f64,
    /// Angles of the third setting; zero for two-setting certificates.
    pub mu1: f64,
    pub mu2: f64,
    pub case_tag: Option<CaseTag>,
    /// Channel weights `(q1, q2, q3)`.
    pub q: [f64; 3],
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCertificate {
    pub inequality: SteeringInequality,
    pub s: f64,
    pub tau: f64,
    pub witness: Vec<WitnessPoint>,
}

impl RobustnessCertificate {
    pub fn worst(&self) -> Option<&WitnessPoint> {
        self.witness.iter().min_by(|a, b| a.margin.total_cmp(&b.margin))
    }

    pub fn worst_margin(&self) -> f64 {
        self.worst().map_or(f64::INFINITY, |w| w.margin)
    }

    /// Unclamped `s S + tau`.
    pub fn fidelity_raw(&self, observed: f64) -> f64 {
        self.s * observed + self.tau
    }

    pub fn fidelity(&self, observed: f64) -> f64 {
        self.fidelity_raw(observed).clamp(0.0, 1.0)
    }

    /// Violation at which the affine bound reaches `f`.
    pub fn threshold(&self, f: f64) -> f64 {
        (f - self.tau) / self.s
    }
}

fn finish(
    inequality: SteeringInequality,
    s: f64,
    tau: f64,
    witness: Vec<WitnessPoint>,
) -> Result<RobustnessCertificate, CertifyError> {
    let cert = RobustnessCertificate { inequality, s, tau, witness };
    if let Some(w) = cert.worst() {
        if w.margin < -MARGIN_TOL {
            return Err(CertifyError::Invalid {
                at: format!("mu = {}", w.mu),
                what: "G",
                margin: w.margin,
            });
        }
    }
    Ok(cert)
}

/// `sin^2(theta) / (sqrt(8+2 alpha^2) - 2 - alpha)`.
pub fn tilted_slope(alpha: f64) -> f64 {
    let theta = SteeringInequality::tilted(alpha).map_or(f64::NAN, |i| i.target_theta());
    theta.sin().powi(2) / ((8.0 + 2.0 * alpha * alpha).sqrt() - 2.0 - alpha)
}

/// Smallest `q` with `q P - A` PSD, for real symmetric 2x2 `A` and rank-one PSD `P`.
fn min_weight_for_psd(p: [[f64; 2]; 2], a: [[f64; 2]; 2]) -> Option<f64> {
    let mut lo = f64::NEG_INFINITY;
    for i in 0..2 {
        if p[i][i] > 0.0 {
            lo = lo.max(a[i][i] / p[i][i]);
        } else if a[i][i] > 0.0 {
            return None;
        }
    }
    // det(qP - A) is affine in q because det P = 0.
    let d1 = -(p[0][0] * a[1][1] + p[1][1] * a[0][0]) + 2.0 * p[0][1] * a[0][1];
    let d0 = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    if d1 > 0.0 {
        lo = lo.max(-d0 / d1);
    } else if d0 < 0.0 {
        return None;
    }
    Some(lo)
}

/// Certifies one `mu` of the tilted family with the closed-form channel.
pub fn tilted_point(alpha: f64, s: f64, tau: f64, mu: f64) -> Result<WitnessPoint, CertifyError> {
    let ineq = SteeringInequality::tilted(alpha)?;
    let spec = spectral_tilted(alpha, mu)?;
    let theta = ineq.target_theta();
    let (ct, st) = (theta.cos(), theta.sin());
    let (cm, sm) = (mu.cos(), mu.sin());
    let (q1, branch) = match spec.case_tag {
        CaseTag::Case1 => {
            // Even block of G with K = q1 Phi + q2 (I(x)Z) Phi (I(x)Z).
            let g00 = ct * ct - s * (alpha + 2.0 * cm) - tau;
            let g11 = st * st - s * (2.0 * cm - alpha) - tau;
            if g00 < -MARGIN_TOL || g11 < -MARGIN_TOL {
                return Err(CertifyError::EmptyWindow { mu, lo: f64::NAN, hi: f64::NAN });
            }
            let root = (g00.max(0.0) * g11.max(0.0)).sqrt();
            let centre = 2.0 * s * sm;
            let lo = (1.0 + (centre - root) / (ct * st)) / 2.0;
            let hi = (1.0 + (centre + root) / (ct * st)) / 2.0;
            let q1 = hi.min(1.0);
            if q1 < lo.max(0.0) - 1e-12 {
                return Err(CertifyError::EmptyWindow { mu, lo, hi });
            }
            (q1, pauli_z())
        }
        CaseTag::Case2 => {
            // K = q1 Phi + q2 (I(x)X) Phi (I(x)X); each 2x2 block sees one branch.
            let p = [[ct * ct, ct * st], [ct * st, st * st]];
            let even = [[s * (alpha + 2.0 * cm) + tau, 2.0 * s * sm], [2.0 * s * sm, s * (2.0 * cm - alpha) + tau]];
            let odd = [[s * (alpha - 2.0 * cm) + tau, 2.0 * s * sm], [2.0 * s * sm, -s * (alpha + 2.0 * cm) + tau]];
            let lo = min_weight_for_psd(p, even).unwrap_or(f64::INFINITY);
            let hi = 1.0 - min_weight_for_psd(p, odd).unwrap_or(f64::INFINITY);
            let q1 = lo.max(0.0);
            if q1 > hi.min(1.0) + 1e-12 {
                return Err(CertifyError::EmptyWindow { mu, lo, hi });
            }
            (q1.min(1.0), pauli_x())
        }
    };
    let channel = ExtractionChannel::two_branch(q1, branch)?;
    let margin = g_margin(&ineq, &BobSettings::tilted(mu), &channel, s, tau)?;
    Ok(WitnessPoint { mu, mu1: 0.0, mu2: 0.0, case_tag: Some(spec.case_tag), q: [q1, 1.0 - q1, 0.0], margin })
}

/// `grid` points in each of `(0, mu*]` and `(mu*, pi/4]`.
fn tilted_grid(alpha: f64, grid: usize) -> Vec<f64> {
    let edge = case_boundary(alpha).min(FRAC_PI_4);
    let mut mus: Vec<f64> = (1..=grid).map(|i| edge * i as f64 / grid as f64).collect();
    if FRAC_PI_4 - edge > 1e-12 {
        mus.extend((1..=grid).map(|i| edge + (FRAC_PI_4 - edge) * i as f64 / grid as f64));
    }
    mus
}

pub fn certify_tilted_analog(alpha: f64, mu_grid_size: usize) -> Result<RobustnessCertificate, CertifyError> {
    let ineq = SteeringInequality::tilted(alpha)?;
    let s = tilted_slope(alpha);
    let tau = 1.0 - ineq.quantum_bound() * s;
    let witness = tilted_grid(alpha, mu_grid_size.max(1))
        .into_iter()
        .map(|mu| tilted_point(alpha, s, tau, mu))
        .collect::<Result<Vec<_>, _>>()?;
    finish(ineq, s, tau, witness)
}

/// `1 / (4 - 2 sqrt 2)`.
pub fn chsh_slope() -> f64 {
    1.0 / (4.0 - 2.0 * SQRT_2)
}

/// `cos(pi/8) Z + sin(pi/8) X`; rotates the Bell state onto the eigenbasis of `Z B0 + X B1`.
pub fn chsh_frame() -> Mat {
    pauli_z() * r(FRAC_PI_8.cos()) + pauli_x() * r(FRAC_PI_8.sin())
}

fn bell_ket() -> Ket {
    let h = 0.5f64.sqrt();
    qmat::ket(&[r(h), r(0.0), r(0.0), r(h)])
}

/// Eigenvectors of `Z B0 + X B1` for `B_r = cos mu Z +- sin mu X`, independent of `mu`.
///
/// Eigenvalues are `sqrt2 (cos mu + sin mu)`, `sqrt2 (cos mu - sin mu)` and their negatives.
pub fn chsh_eigenvectors() -> [Ket; 4] {
    let u = chsh_frame();
    let psi1 = kron(&identity(2), &u) * bell_ket();
    let on_bob = |m: Mat| kron(&identity(2), &m) * &psi1;
    [psi1.clone(), on_bob(pauli_z()), on_bob(pauli_x()), on_bob(pauli_z() * pauli_x())]
}

/// Certifies one `mu` in `(0, pi/2)` for `Z B0 + X B1`.
pub fn chsh_point(s: f64, tau: f64, mu: f64) -> Result<WitnessPoint, CertifyError> {
    let ineq = SteeringInequality::new(Family::TwoTrusted, 0.0, 1.0)?;
    let l1 = SQRT_2 * (mu.cos() + mu.sin());
    let l2 = SQRT_2 * (mu.cos() - mu.sin()).abs();
    let lo = (1.0 - s * (2.0 - l1)).max(0.0);
    let hi = (s * (2.0 - l2)).min(1.0);
    if lo > hi + 1e-12 {
        return Err(CertifyError::EmptyWindow { mu, lo, hi });
    }
    let q1 = hi;
    let flip = if mu <= FRAC_PI_4 { pauli_z() } else { pauli_x() };
    let u = chsh_frame();
    let channel = ExtractionChannel::new(vec![(q1, u.clone()), (1.0 - q1, flip * u)])?;
    let k = dual_channel_state(&channel, &bell_ket());
    let op = ineq.steering_operator(&BobSettings::tilted(mu))?;
    let margin = min_eigenvalue(&(k - op * r(s) - identity(4) * r(tau)));
    Ok(WitnessPoint { mu, mu1: 0.0, mu2: 0.0, case_tag: None, q: [q1, 1.0 - q1, 0.0], margin })
}

pub fn certify_chsh_steering(mu_grid_size: usize) -> Result<RobustnessCertificate, CertifyError> {
    let ineq = SteeringInequality::new(Family::TwoTrusted, 0.0, 1.0)?;
    let s = chsh_slope();
    let tau = 1.0 - 2.0 * s;
    let n = mu_grid_size.max(1);
    let lower = (1..=n).map(|i| FRAC_PI_4 * i as f64 / n as f64);
    let upper = (1..=n).map(|i| FRAC_PI_4 + FRAC_PI_4 * i as f64 / (n + 1) as f64);
    let witness = lower.chain(upper).map(|mu| chsh_point(s, tau, mu)).collect::<Result<Vec<_>, _>>()?;
    finish(ineq, s, tau, witness)
}

/// The bound `1 - 24 sqrt(2 - S) - (2 - S)` that the CHSH-steering certificate improves on.
pub fn prior_chsh_bound(observed: f64) -> f64 {
    let eps = 2.0 - observed;
    1.0 - 24.0 * eps.max(0.0).sqrt() - eps
}

/// `3 / (12 - 4 sqrt 2)`.
pub fn three_setting_slope() -> f64 {
    3.0 / (12.0 - 4.0 * SQRT_2)
}

/// Weight of the branch that follows the third setting.
pub const THREE_SETTING_Q3: f64 = 0.5;

/// Rotation of the Bloch sphere taking `+y` to `b`.
fn rotation_from_y(b: [f64; 3]) -> Mat {
    let axis = [-b[2], 0.0, b[0]]; // y x b
    let sn = (axis[0] * axis[0] + axis[2] * axis[2]).sqrt();
    let cs = b[1];
    if sn < 1e-12 {
        return if cs > 0.0 { identity(2) } else { pauli_z() * c(0.0, -1.0) };
    }
    let half = 0.5 * sn.atan2(cs);
    let n = [axis[0] / sn, 0.0, axis[2] / sn];
    identity(2) * r(half.cos()) - bloch_operator(n) * c(0.0, half.sin())
}

/// The split of `G` into the part spanned by the top two eigenvectors and the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPoint {
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub q: [f64; 3],
    pub g1_margin: f64,
    pub g2_margin: f64,
    pub full_margin: f64,
}

#[derive(Debug, Clone)]
pub struct SplitMatrices {
    pub g1: Mat,
    pub g2: Mat,
    /// `K - s S - tau I` built directly from the channel.
    pub full: Mat,
    pub q: [f64; 3],
}

/// The two-part construction for `Z B0 + X B1 + Y B2` at `alpha = 0`, `beta = 1`.
///
/// Settings are `B_{0,1} = cos mu Z +- sin mu X` and the third setting from
/// `(mu1, mu2)`. The channel applies the `chsh_frame` rotation with weight
/// `q1`, the same followed by `Z` with weight `q2`, and with weight `q3 = 1/2`
/// the rotation carrying `+y` onto the third setting.
pub fn three_setting_matrices(mu: f64, mu1: f64, mu2: f64) -> SplitMatrices {
    let s = three_setting_slope();
    let tau = 1.0 - 3.0 * s;
    let l1 = SQRT_2 * (mu.cos() + mu.sin());
    let l2 = SQRT_2 * (mu.cos() - mu.sin());
    let q3 = THREE_SETTING_Q3;
    let q1 = (1.0 - q3 - s * l2 - tau).clamp(0.0, 1.0 - q3);
    let q2 = 1.0 - q3 - q1;
    let psi = chsh_eigenvectors();
    let p = |k: usize| projector(&psi[k]);
    let b2 = BobObservable::from_angles(mu1, mu2);
    let w = rotation_from_y(b2.bloch());
    let k3 = projector(&(kron(&identity(2), &w) * &psi[0]));
    let g1 = p(0) * r(q1 - s * l1 - tau) + p(1) * r(q2 - s * l2 - tau);
    let g2 = k3 * r(q3) + p(2) * r(s * l2 - tau) + p(3) * r(s * l1 - tau)
        - kron(&pauli_y(), &b2.matrix()) * r(s);

    let u = chsh_frame();
    let channel = ExtractionChannel {
        branches: vec![(q1, u.clone()), (q2, pauli_z() * &u), (q3, w * &u)],
    };
    let ineq = SteeringInequality::new(Family::ThreeTrusted, 0.0, 1.0).expect("fixed parameters");
    let op = ineq
        .steering_operator(&BobSettings::three(mu, mu1, mu2))
        .expect("three settings supplied");
    let full = dual_channel_state(&channel, &bell_ket()) - op * r(s) - identity(4) * r(tau);
    SplitMatrices { g1, g2, full, q: [q1, q2, q3] }
}

pub fn three_setting_split(mu: f64, mu1: f64, mu2: f64) -> SplitPoint {
    let m = three_setting_matrices(mu, mu1, mu2);
    SplitPoint {
        mu,
        mu1,
        mu2,
        q: m.q,
        g1_margin: min_eigenvalue(&m.g1),
        g2_margin: min_eigenvalue(&m.g2),
        full_margin: min_eigenvalue(&m.full),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScan {
    pub points: usize,
    pub worst_g1: SplitPoint,
    pub worst_g2: SplitPoint,
    pub worst_full: SplitPoint,
}

impl SplitScan {
    pub fn split_ok(&self) -> bool {
        self.worst_g1.g1_margin >= -MARGIN_TOL && self.worst_g2.g2_margin >= -MARGIN_TOL
    }
}

fn better(a: SplitPoint, b: SplitPoint, key: fn(&SplitPoint) -> f64) -> SplitPoint {
    if key(&b) < key(&a) {
        b
    } else {
        a
    }
}

/// Coordinate pattern search for the minimum of `key` near `start`.
fn refine(start: SplitPoint, key: fn(&SplitPoint) -> f64, step0: f64) -> (SplitPoint, usize) {
    let bounds = [(1e-9, FRAC_PI_4), (-FRAC_PI_2, FRAC_PI_2), (-FRAC_PI_2, FRAC_PI_2)];
    let mut best = start;
    let mut step = step0;
    let mut evals = 0;
    while step > 1e-7 {
        let mut improved = false;
        for axis in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut x = [best.mu, best.mu1, best.mu2];
                x[axis] = (x[axis] + dir * step).clamp(bounds[axis].0, bounds[axis].1);
                let cand = three_setting_split(x[0], x[1], x[2]);
                evals += 1;
                if key(&cand) < key(&best) {
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, evals)
}

/// Scans `mu in (0, pi/4]`, `mu1, mu2 in [-pi/2, pi/2]` on a `grid^3` lattice,
/// then refines the worst point of each margin.
pub fn scan_three_setting(grid: usize, workers: usize) -> SplitScan {
    let n = grid.max(2);
    let workers = workers.clamp(1, n);
    let angle = |j: usize| -FRAC_PI_2 + std::f64::consts::PI * j as f64 / (n - 1) as f64;
    let scan_mu = |i: usize| {
        let mu = FRAC_PI_4 * (i + 1) as f64 / n as f64;
        let first = three_setting_split(mu, angle(0), angle(0));
        let mut acc = (first, first, first);
        for j in 0..n {
            for k in 0..n {
                let p = three_setting_split(mu, angle(j), angle(k));
                acc.0 = better(acc.0, p, |x| x.g1_margin);
                acc.1 = better(acc.1, p, |x| x.g2_margin);
                acc.2 = better(acc.2, p, |x| x.full_margin);
            }
        }
        acc
    };
    let partial: Vec<(SplitPoint, SplitPoint, SplitPoint)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let scan_mu = &scan_mu;
                scope.spawn(move || (w..n).step_by(workers).map(scan_mu).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scan worker panicked")).collect()
    });
    let mut worst = partial[0];
    for p in &partial[1..] {
        worst.0 = better(worst.0, p.0, |x| x.g1_margin);
        worst.1 = better(worst.1, p.1, |x| x.g2_margin);
        worst.2 = better(worst.2, p.2, |x| x.full_margin);
    }
    let step = FRAC_PI_2 / n as f64;
    let (g1, e1) = refine(worst.0, |x| x.g1_margin, step);
    let (g2, e2) = refine(worst.1, |x| x.g2_margin, step);
    let (full, e3) = refine(worst.2, |x| x.full_margin, step);
    SplitScan { points: n * n * n + e1 + e2 + e3, worst_g1: g1, worst_g2: g2, worst_full: full }
}

/// Checks the two-part construction for `Z B0 + X B1 + Y B2` with `s = 3/(12 - 4 sqrt 2)`.
///
/// Fails with [`CertifyError::Invalid`] naming the part (`G1`, `G2`) and the
/// grid point with the most negative margin.
pub fn certify_three_setting(grid: usize, workers: usize) -> Result<RobustnessCertificate, CertifyError> {
    let ineq = SteeringInequality::new(Family::ThreeTrusted, 0.0, 1.0)?;
    let s = three_setting_slope();
    let tau = 1.0 - 3.0 * s;
    let scan = scan_three_setting(grid, workers);
    for (p, what, m) in [
        (scan.worst_g1, "G1", scan.worst_g1.g1_margin),
        (scan.worst_g2, "G2", scan.worst_g2.g2_margin),
        (scan.worst_full, "G", scan.worst_full.full_margin),
    ] {
        if m < -MARGIN_TOL {
            return Err(CertifyError::Invalid {
                at: format!("(mu, mu1, mu2) = ({:.6}, {:.6}, {:.6})", p.mu, p.mu1, p.mu2),
                what,
                margin: m,
            });
        }
    }
    let witness = [scan.worst_g1, scan.worst_g2, scan.worst_full]
        .iter()
        .map(|p| WitnessPoint {
            mu: p.mu,
            mu1: p.mu1,
            mu2: p.mu2,
            case_tag: None,
            q: p.q,
            margin: p.full_margin.min(p.g1_margin).min(p.g2_margin),
        })
        .collect();
    finish(ineq, s, tau, witness)
}

/// Scenario whose fidelity bound is evaluated on the tilted family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Both sides trusted.
    DeviceDependent,
    /// Alice trusted, Bob untrusted.
    OneSided,
    /// Neither side trusted; the conjectured affine bound.
    DeviceIndependent,
}

/// Slope and offset of the conjectured device-independent bound.
pub fn di_coefficients(alpha: f64) -> (f64, f64) {
    let q = (8.0 + 2.0 * alpha * alpha).sqrt();
    let s = (q + 2.0 + alpha) * (3.0 * q - (4.0 - alpha * alpha).sqrt() - alpha * SQRT_2)
        / (4.0 * (2.0 - alpha).powi(2) * q);
    (s, 1.0 - s * q)
}

/// Unclamped affine bound.
pub fn fidelity_lower_raw(scenario: Scenario, alpha: f64, observed: f64) -> Result<f64, CertifyError> {
    let ineq = SteeringInequality::tilted(alpha)?;
    let q = ineq.quantum_bound();
    if observed > q + 1e-9 {
        return Err(CertifyError::AboveQuantum { observed, bound: q });
    }
    Ok(match scenario {
        Scenario::DeviceDependent => observed / q,
        Scenario::OneSided => {
            let s = tilted_slope(alpha);
            s * observed + 1.0 - s * q
        }
        Scenario::DeviceIndependent => {
            let (s, mu) = di_coefficients(alpha);
            s * observed + mu
        }
    })
}

/// Affine bound clamped to `[0, 1]`.
pub fn fidelity_lower(scenario: Scenario, alpha: f64, observed: f64) -> Result<f64, CertifyError> {
    Ok(fidelity_lower_raw(scenario, alpha, observed)?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub observed: f64,
    pub dd: f64,
    pub one_sided: f64,
    pub di: f64,
}

pub fn comparison_table(alpha: f64, grid: &[f64]) -> Result<Vec<ComparisonRow>, CertifyError> {
    grid.iter()
        .map(|&observed| {
            Ok(ComparisonRow {
                observed,
                dd: fidelity_lower(Scenario::DeviceDependent, alpha, observed)?,
                one_sided: fidelity_lower(Scenario::OneSided, alpha, observed)?,
                di: fidelity_lower(Scenario::DeviceIndependent, alpha, observed)?,
            })
        })
        .collect()
}

/// Violation at which the unclamped bound of `scenario` reaches `f`.
pub fn scenario_threshold(scenario: Scenario, alpha: f64, f: f64) -> Result<f64, CertifyError> {
    let ineq = SteeringInequality::tilted(alpha)?;
    let q = ineq.quantum_bound();
    let (s, off) = match scenario {
        Scenario::DeviceDependent => (1.0 / q, 0.0),
        Scenario::OneSided => {
            let s = tilted_slope(alpha);
            (s, 1.0 - s * q)
        }
        Scenario::DeviceIndependent => di_coefficients(alpha),
    };
    Ok((f - off) / s)
}

/// Smallest eigenvalue of `|Phi><Phi| - scale * S / S_Q` at the ideal settings.
pub fn dd_operator_margin(alpha: f64, scale: f64) -> Result<f64, CertifyError> {
    let ineq = SteeringInequality::tilted(alpha)?;
    let op = ineq.steering_operator(&ineq.ideal_bob_settings())?;
    let m = ineq.target().density() - op * r(scale / ineq.quantum_bound());
    Ok(min_eigenvalue(&m))
}

pub fn dd_operator_check(alpha: f64) -> Result<f64, CertifyError> {
    dd_operator_margin(alpha, 1.0)
}
