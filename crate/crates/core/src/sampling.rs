//! Guessing probabilities and the number of copies needed for a fidelity
//! target at a given confidence.
//!
//! The marginal families with trusted `Z_A` become a game in which Bob
//! reports his outcome and Alice measures one of
//! `A_{0,1} = cos 2t Z +- sin 2t P` (`P = X` or `Y`), winning on `+1`.
//! The round with `(Z_A, B0)` is won when the outcomes agree.
//! Weighting rounds by the inequality's coefficients gives
//! `p = 1/2 + S / (2 S_Q)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{BobSettings, Family, ModelError, SteeringInequality};
use crate::qmat::{self, expectation, identity, kron, r, Mat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("no testing game is known for the {0} family")]
    NoGame(Family),
    #[error("observed value {observed} exceeds the quantum bound {bound}")]
    AboveQuantum { observed: f64, bound: f64 },
    #[error("epsilon = {0} outside (0, 1)")]
    Epsilon(f64),
    #[error("delta = {0} outside (0, 1)")]
    Delta(f64),
    #[error("slope s = {0} must be positive")]
    Slope(f64),
    #[error("c * epsilon = {0} >= 1, no plan exists")]
    Infeasible(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Quantum and algebraic game values coincide; `N` is linear in `1/epsilon`.
    Coinciding,
    /// Only an order bound `O(ln(1/delta) / (c epsilon)^2)` is available; reported with unit constant.
    Quadratic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Coinciding => "COINCIDING",
            Regime::Quadratic => "QUADRATIC",
        })
    }
}

fn regime(family: Family) -> Result<Regime, SamplingError> {
    match family {
        Family::TwoTrusted | Family::ThreeTrusted => Ok(Regime::Coinciding),
        Family::TiltedAnalog => Ok(Regime::Quadratic),
        f => Err(SamplingError::NoGame(f)),
    }
}

pub fn guessing_probability(ineq: &SteeringInequality, observed: f64) -> Result<f64, SamplingError> {
    regime(ineq.family())?;
    let bound = ineq.quantum_bound();
    if observed > bound + 1e-12 {
        return Err(SamplingError::AboveQuantum { observed, bound });
    }
    Ok(match ineq.family() {
        Family::TiltedAnalog => 0.5 + observed / 8.0,
        _ => 0.5 + observed / (2.0 * bound),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub n_required: u64,
    pub regime: Regime,
}

impl SamplePlan {
    pub fn order_of_magnitude(&self) -> bool {
        self.regime == Regime::Quadratic
    }
}

/// Copies needed so the average extractability exceeds `1 - epsilon` at significance `delta`,
/// for a certificate `F >= s S + tau`.
pub fn sample_count(ineq: &SteeringInequality, epsilon: f64, delta: f64, slope: f64) -> Result<SamplePlan, SamplingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SamplingError::Epsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SamplingError::Delta(delta));
    }
    if !(slope > 0.0) {
        return Err(SamplingError::Slope(slope));
    }
    let regime = regime(ineq.family())?;
    let c = 1.0 / (2.0 * slope * ineq.quantum_bound());
    let ce = c * epsilon;
    if ce >= 1.0 {
        return Err(SamplingError::Infeasible(ce));
    }
    let log_delta = (1.0 / delta).ln();
    let n = match regime {
        Regime::Coinciding => log_delta / -(1.0 - ce).ln(),
        Regime::Quadratic => log_delta / (ce * ce),
    };
    Ok(SamplePlan { epsilon, delta, c, n_required: (n.ceil() as u64).max(1), regime })
}

/// Alice's game observables `cos 2t Z +- sin 2t P`.
pub fn game_observables(theta: f64, pauli: &Mat) -> [Mat; 2] {
    let (c2, s2) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    let z = qmat::pauli_z();
    [&z * r(c2) + pauli * r(s2), &z * r(c2) - pauli * r(s2)]
}

/// Frobenius residual of `(alpha/2) Z + X B1 = (r/2)(A0 B1^+ + A1 B1^-) = (r/2)(2 A0^+ B1^+ + 2 A1^+ B1^- - I)`
/// with `r = sqrt(4 + alpha^2)`, for a generic Bob observable `B1` and the given `theta`.
pub fn game_identity_residual_at(alpha: f64, theta: f64) -> f64 {
    let rt = (4.0 + alpha * alpha).sqrt();
    let b1 = qmat::bloch_operator([0.36, 0.48, 0.8]);
    let id2 = identity(2);
    let (bp, bm) = ((&id2 + &b1) * r(0.5), (&id2 - &b1) * r(0.5));
    let [a0, a1] = game_observables(theta, &qmat::pauli_x());
    let (a0p, a1p) = ((&id2 + &a0) * r(0.5), (&id2 + &a1) * r(0.5));
    let lhs = kron(&qmat::pauli_z(), &id2) * r(alpha / 2.0) + kron(&qmat::pauli_x(), &b1);
    let mid = (kron(&a0, &bp) + kron(&a1, &bm)) * r(rt / 2.0);
    let rhs = ((kron(&a0p, &bp) + kron(&a1p, &bm)) * r(2.0) - identity(4)) * r(rt / 2.0);
    (&lhs - &mid).norm().max((&lhs - &rhs).norm())
}

/// Residual at the prescribed angle `sin 2t = 2 / sqrt(4 + alpha^2)`.
pub fn game_identity_residual(alpha: f64) -> f64 {
    let theta = 0.5 * (2.0 / (4.0 + alpha * alpha).sqrt()).asin();
    game_identity_residual_at(alpha, theta)
}

/// Win probabilities of the rounds of the game and their weights.
#[derive(Debug, Clone)]
pub struct GameRounds {
    /// `(weight, win probability)` per round type; weights sum to one.
    pub rounds: Vec<(f64, f64)>,
}

impl GameRounds {
    pub fn win_probability(&self) -> f64 {
        self.rounds.iter().map(|(w, p)| w * p).sum()
    }
}

fn projectors(m: &Mat) -> [Mat; 2] {
    let id = identity(2);
    [(&id + m) * r(0.5), (&id - m) * r(0.5)]
}

/// Exact round statistics of the game played with state `rho` and Bob's observables.
pub fn game_rounds(ineq: &SteeringInequality, rho: &Mat, bob: &BobSettings) -> Result<GameRounds, SamplingError> {
    if regime(ineq.family())? != Regime::Coinciding {
        return Err(SamplingError::NoGame(ineq.family()));
    }
    let expected = ineq.family().settings();
    if bob.len() != expected {
        return Err(ModelError::SettingCount { family: ineq.family(), expected, got: bob.len() }.into());
    }
    let b = bob.matrices();
    let theta = ineq.target_theta();
    let beta = ineq.beta();
    let steer_round = |pauli: Mat, bob_op: &Mat| {
        let [a0, a1] = game_observables(theta, &pauli);
        let [bp, bm] = projectors(bob_op);
        let [a0p, _] = projectors(&a0);
        let [a1p, _] = projectors(&a1);
        expectation(&(kron(&a0p, &bp) + kron(&a1p, &bm)), rho).re
    };
    let [zp, zm] = projectors(&qmat::pauli_z());
    let [b0p, b0m] = projectors(&b[0]);
    let agree = expectation(&(kron(&zp, &b0p) + kron(&zm, &b0m)), rho).re;
    let rounds = if expected == 3 {
        let rt = (4.0 + ineq.alpha().powi(2)).sqrt();
        let total = rt + beta;
        vec![
            (rt / (2.0 * total), steer_round(qmat::pauli_x(), &b[1])),
            (rt / (2.0 * total), steer_round(qmat::pauli_y(), &b[2])),
            (beta / total, agree),
        ]
    } else {
        let rt = (1.0 + ineq.alpha().powi(2)).sqrt();
        let total = rt + beta;
        vec![(rt / total, steer_round(qmat::pauli_x(), &b[1])), (beta / total, agree)]
    };
    Ok(GameRounds { rounds })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameTally {
    pub trials: u64,
    pub wins: u64,
}

impl GameTally {
    pub fn frequency(&self) -> f64 {
        self.wins as f64 / self.trials as f64
    }

    /// Binomial standard deviation of the frequency at success probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Plays `trials` rounds; worker `k` uses stream `k` of a ChaCha generator seeded with `seed`.
pub fn simulate_game(rounds: &GameRounds, trials: u64, seed: u64, workers: usize) -> GameTally {
    let workers = workers.max(1) as u64;
    let wins: u64 = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                let share = trials / workers + u64::from(k < trials % workers);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k);
                    let mut wins = 0;
                    for _ in 0..share {
                        let mut u: f64 = rng.random();
                        let mut chosen = rounds.rounds.len() - 1;
                        for (i, (w, _)) in rounds.rounds.iter().enumerate() {
                            if u < *w {
                                chosen = i;
                                break;
                            }
                            u -= w;
                        }
                        if rng.random::<f64>() < rounds.rounds[chosen].1 {
                            wins += 1;
                        }
                    }
                    wins
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).sum()
    });
    GameTally { trials, wins }
}
