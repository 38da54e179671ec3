//! Target states, Bob's qubit observables and the five steering-inequality families.
//!
//! Every family is stored as a list of [`Term`]s `coef * A (x) B_k` (or
//! `A (x) I` for a trusted marginal). The operator, the local-hidden-state
//! bound, and the moment-matrix functional are all derived from that list.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::qmat::{self, bloch_operator, identity, kron, r, Ket, Mat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters for {family}: {constraint}")]
    Region { family: Family, constraint: String },
    #[error("{family} needs {expected} Bob settings, got {got}")]
    SettingCount { family: Family, expected: usize, got: usize },
    #[error("Bloch vector has norm {0}, expected 1")]
    NonUnitBloch(f64),
    #[error("theta = {0} outside (0, pi/4]")]
    Theta(f64),
    #[error("visibility {0} outside [0, 1]")]
    Visibility(f64),
    #[error("violation has imaginary part {0:.3e}")]
    ImaginaryResidue(f64),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Qmat(#[from] qmat::QmatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `alpha Z + Z(B0+B1) + X(B0-B1)`.
    TiltedAnalog,
    /// `alpha Z + beta Z B0 + X B1`.
    TwoTrusted,
    /// `alpha B0 + beta Z B0 + X B1`.
    TwoUntrusted,
    /// `alpha Z + beta Z B0 + X B1 + Y B2`.
    ThreeTrusted,
    /// `alpha B0 + beta Z B0 + X B1 + Y B2`.
    ThreeUntrusted,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::TiltedAnalog,
        Family::TwoTrusted,
        Family::TwoUntrusted,
        Family::ThreeTrusted,
        Family::ThreeUntrusted,
    ];

    pub fn settings(self) -> usize {
        match self {
            Family::ThreeTrusted | Family::ThreeUntrusted => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::TiltedAnalog => "tilted-analog",
            Family::TwoTrusted => "two-trusted",
            Family::TwoUntrusted => "two-untrusted",
            Family::ThreeTrusted => "three-trusted",
            Family::ThreeUntrusted => "three-untrusted",
        }
    }

    /// The marginal term sits on Alice's side.
    pub fn trusted_marginal(self) -> bool {
        matches!(self, Family::TiltedAnalog | Family::TwoTrusted | Family::ThreeTrusted)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ModelError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat {
        match self {
            Pauli::I => identity(2),
            Pauli::X => qmat::pauli_x(),
            Pauli::Y => qmat::pauli_y(),
            Pauli::Z => qmat::pauli_z(),
        }
    }
}

/// `coef * alice (x) B_bob`, with `bob == None` meaning Bob's identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub alice: Pauli,
    pub bob: Option<usize>,
}

const fn term(coef: f64, alice: Pauli, bob: Option<usize>) -> Term {
    Term { coef, alice, bob }
}

/// Slack used when a parameter sits exactly on a region boundary.
const REGION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringInequality {
    family: Family,
    alpha: f64,
    beta: f64,
}

impl SteeringInequality {
    pub fn new(family: Family, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let region = |constraint: String| ModelError::Region { family, constraint };
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(region(format!("alpha = {alpha} must be >= 0")));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(region(format!("beta = {beta} must be > 0")));
        }
        match family {
            Family::TiltedAnalog => {
                if alpha >= 2.0 {
                    return Err(region(format!("alpha = {alpha} must be < 2")));
                }
                if (beta - 1.0).abs() > REGION_SLACK {
                    return Err(region(format!("beta = {beta} is fixed to 1")));
                }
            }
            Family::TwoUntrusted => {
                let min = (1.0 + alpha * alpha).sqrt();
                if beta < min - REGION_SLACK {
                    return Err(region(format!("beta = {beta} < sqrt(1+alpha^2) = {min}")));
                }
            }
            Family::ThreeUntrusted => {
                let min = (4.0 + alpha * alpha).sqrt();
                if beta < min - REGION_SLACK {
                    return Err(region(format!("beta = {beta} < sqrt(4+alpha^2) = {min}")));
                }
            }
            Family::TwoTrusted | Family::ThreeTrusted => {}
        }
        Ok(SteeringInequality { family, alpha, beta })
    }

    pub fn tilted(alpha: f64) -> Result<Self, ModelError> {
        Self::new(Family::TiltedAnalog, alpha, 1.0)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn terms(&self) -> Vec<Term> {
        use Pauli::*;
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            Family::TiltedAnalog => vec![
                term(a, Z, None),
                term(1.0, Z, Some(0)),
                term(1.0, Z, Some(1)),
                term(1.0, X, Some(0)),
                term(-1.0, X, Some(1)),
            ],
            Family::TwoTrusted => {
                vec![term(a, Z, None), term(b, Z, Some(0)), term(1.0, X, Some(1))]
            }
            Family::TwoUntrusted => {
                vec![term(a, I, Some(0)), term(b, Z, Some(0)), term(1.0, X, Some(1))]
            }
            Family::ThreeTrusted => vec![
                term(a, Z, None),
                term(b, Z, Some(0)),
                term(1.0, X, Some(1)),
                term(1.0, Y, Some(2)),
            ],
            Family::ThreeUntrusted => vec![
                term(a, I, Some(0)),
                term(b, Z, Some(0)),
                term(1.0, X, Some(1)),
                term(1.0, Y, Some(2)),
            ],
        }
    }

    /// `theta` of the target state `cos t |00> + sin t |11>`.
    pub fn target_theta(&self) -> f64 {
        let a2 = self.alpha * self.alpha;
        let sin2t = match self.family {
            Family::TiltedAnalog => ((4.0 - a2) / (4.0 + a2)).sqrt(),
            Family::TwoTrusted | Family::TwoUntrusted => 1.0 / (1.0 + a2).sqrt(),
            Family::ThreeTrusted | Family::ThreeUntrusted => 2.0 / (4.0 + a2).sqrt(),
        };
        0.5 * sin2t.min(1.0).asin()
    }

    pub fn target(&self) -> TargetState {
        TargetState { theta: self.target_theta() }
    }

    /// `mu` of the ideal settings `cos mu Z +- sin mu X`; only meaningful for the tilted family.
    pub fn ideal_mu(&self) -> f64 {
        (2.0 * self.target_theta()).sin().atan2(self.beta)
    }

    pub fn ideal_bob_settings(&self) -> BobSettings {
        match self.family {
            Family::TiltedAnalog => BobSettings::tilted(self.ideal_mu()),
            Family::TwoTrusted | Family::TwoUntrusted => {
                BobSettings(vec![BobObservable::Z, BobObservable::X])
            }
            Family::ThreeTrusted | Family::ThreeUntrusted => {
                BobSettings(vec![BobObservable::Z, BobObservable::X, BobObservable::MINUS_Y])
            }
        }
    }

    fn check_settings(&self, bob: &BobSettings) -> Result<(), ModelError> {
        let expected = self.family.settings();
        if bob.len() != expected {
            return Err(ModelError::SettingCount { family: self.family, expected, got: bob.len() });
        }
        Ok(())
    }

    pub fn steering_operator(&self, bob: &BobSettings) -> Result<Mat, ModelError> {
        self.check_settings(bob)?;
        let mats = bob.matrices();
        Ok(self.operator_from(&mats))
    }

    /// Same as [`Self::steering_operator`] but for arbitrary 2x2 Bob operators
    /// (used by the SOS verifier with exact Pauli inputs).
    pub fn operator_from(&self, bob: &[Mat]) -> Mat {
        let mut out = qmat::zeros(4);
        for t in self.terms() {
            let b = match t.bob {
                Some(k) => bob[k].clone(),
                None => identity(2),
            };
            out += kron(&t.alice.matrix(), &b) * r(t.coef);
        }
        out
    }

    /// Alice's 2x2 operator when Bob's outcomes are replaced by fixed signs.
    pub fn local_operator(&self, signs: &[f64]) -> Mat {
        let mut out = qmat::zeros(2);
        for t in self.terms() {
            let sign = t.bob.map_or(1.0, |k| signs[k]);
            out += t.alice.matrix() * r(t.coef * sign);
        }
        out
    }

    /// Brute-force bound over all deterministic sign assignments.
    pub fn lhs_bound(&self) -> f64 {
        let k = self.family.settings();
        (0..1usize << k)
            .map(|mask| {
                let signs: Vec<f64> =
                    (0..k).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                qmat::max_eigenvalue(&self.local_operator(&signs))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lhs_bound_closed(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            Family::TiltedAnalog => a + 2.0,
            Family::TwoTrusted => (1.0 + (a + b).powi(2)).sqrt(),
            Family::TwoUntrusted => a + (1.0 + b * b).sqrt(),
            Family::ThreeTrusted => (2.0 + (a + b).powi(2)).sqrt(),
            Family::ThreeUntrusted => a + (2.0 + b * b).sqrt(),
        }
    }

    pub fn quantum_bound(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            Family::TiltedAnalog => (8.0 + 2.0 * a * a).sqrt(),
            Family::TwoTrusted | Family::TwoUntrusted => b + (1.0 + a * a).sqrt(),
            Family::ThreeTrusted | Family::ThreeUntrusted => b + (4.0 + a * a).sqrt(),
        }
    }

    /// `Tr(rho S)`.
    pub fn violation(&self, rho: &Mat, bob: &BobSettings) -> Result<f64, ModelError> {
        let op = self.steering_operator(bob)?;
        let v = qmat::expectation(&op, rho);
        if v.im.abs() > 1e-10 {
            return Err(ModelError::ImaginaryResidue(v.im));
        }
        Ok(v.re)
    }
}

impl fmt::Display for SteeringInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(alpha={}, beta={})", self.family, self.alpha, self.beta)
    }
}

/// `cos theta |00> + sin theta |11>` with `theta` in `(0, pi/4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    theta: f64,
}

impl TargetState {
    pub fn new(theta: f64) -> Result<Self, ModelError> {
        if !(theta > 0.0 && theta <= FRAC_PI_4 + 1e-15) {
            return Err(ModelError::Theta(theta));
        }
        Ok(TargetState { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ket(&self) -> Ket {
        target_ket(self.theta)
    }

    pub fn density(&self) -> Mat {
        qmat::projector(&self.ket())
    }
}

pub fn target_ket(theta: f64) -> Ket {
    qmat::ket(&[r(theta.cos()), r(0.0), r(0.0), r(theta.sin())])
}

/// `v |Phi(theta)><Phi(theta)| + (1 - v) I/4`.
pub fn noisy_state(theta: f64, visibility: f64) -> Result<Mat, ModelError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(ModelError::Visibility(visibility));
    }
    let pure = qmat::projector(&target_ket(theta));
    Ok(pure * r(visibility) + identity(4) * r((1.0 - visibility) / 4.0))
}

/// Dichotomic qubit observable `n . sigma` with unit `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobObservable {
    bloch: [f64; 3],
}

impl BobObservable {
    pub const Z: BobObservable = BobObservable { bloch: [0.0, 0.0, 1.0] };
    pub const X: BobObservable = BobObservable { bloch: [1.0, 0.0, 0.0] };
    pub const Y: BobObservable = BobObservable { bloch: [0.0, 1.0, 0.0] };
    pub const MINUS_Y: BobObservable = BobObservable { bloch: [0.0, -1.0, 0.0] };

    /// Accepts vectors within 1e-9 of unit length and renormalises them.
    pub fn new(bloch: [f64; 3]) -> Result<Self, ModelError> {
        let n = bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(ModelError::NonUnitBloch(n));
        }
        Ok(BobObservable { bloch: bloch.map(|x| x / n) })
    }

    /// `cos mu1 cos mu2 Z + cos mu1 sin mu2 X + sin mu1 Y`.
    pub fn from_angles(mu1: f64, mu2: f64) -> Self {
        BobObservable {
            bloch: [mu1.cos() * mu2.sin(), mu1.sin(), mu1.cos() * mu2.cos()],
        }
    }

    /// `cos mu Z + sin mu X`.
    pub fn in_xz_plane(mu: f64) -> Self {
        BobObservable { bloch: [mu.sin(), 0.0, mu.cos()] }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    pub fn matrix(&self) -> Mat {
        bloch_operator(self.bloch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobSettings(pub Vec<BobObservable>);

impl BobSettings {
    /// `B_r = cos mu Z + (-1)^r sin mu X`.
    pub fn tilted(mu: f64) -> Self {
        BobSettings(vec![BobObservable::in_xz_plane(mu), BobObservable::in_xz_plane(-mu)])
    }

    /// Tilted pair plus `B2 = cos mu1 cos mu2 Z + cos mu1 sin mu2 X + sin mu1 Y`.
    pub fn three(mu: f64, mu1: f64, mu2: f64) -> Self {
        let mut s = Self::tilted(mu);
        s.0.push(BobObservable::from_angles(mu1, mu2));
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matrices(&self) -> Vec<Mat> {
        self.0.iter().map(BobObservable::matrix).collect()
    }
}
