//! Dense primal-dual interior-point method for
//! `min Tr(C X)  s.t.  Tr(A_i X) = b_i, X >= 0` and its dual
//! `max b^T y  s.t.  S = C - sum_i y_i A_i >= 0`, all matrices real symmetric.
//!
//! HKM search direction with Mehrotra predictor-corrector, infeasible start.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) struct SdpData {
    pub c: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub y: DVector<f64>,
    pub primal: f64,
    pub dual: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn trace_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `t` with `x + t dx >= 0`, or infinity.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = x.clone().cholesky() else { return 0.0 };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else { return 0.0 };
    let w = sym(&linv * dx * linv.transpose());
    let lmin = SymmetricEigen::new(w).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn apply(a: &[DMatrix<f64>], x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().map(|ai| trace_dot(ai, x)))
}

fn combine(a: &[DMatrix<f64>], y: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    for (ai, yi) in a.iter().zip(y.iter()) {
        out += ai * *yi;
    }
    out
}

pub(crate) fn solve(d: &SdpData, tol: f64, max_iter: usize) -> IpmOutcome {
    let n = d.c.nrows();
    let scale = 1.0 + d.c.norm().max(d.b.amax()).max(d.a.iter().map(|a| a.norm()).fold(0.0, f64::max));
    let mut x = DMatrix::identity(n, n) * scale;
    let mut s = DMatrix::identity(n, n) * scale;
    let mut y = DVector::zeros(d.a.len());
    let bnorm = 1.0 + d.b.norm();
    let cnorm = 1.0 + d.c.norm();
    let mut out = None;
    for it in 0..max_iter {
        let rp = &d.b - apply(&d.a, &x);
        let rd = &d.c - combine(&d.a, &y, n) - &s;
        let mu = trace_dot(&x, &s) / n as f64;
        let primal = trace_dot(&d.c, &x);
        let dual = d.b.dot(&y);
        let pinf = rp.norm() / bnorm;
        let dinf = rd.norm() / cnorm;
        let gap = (primal - dual).abs() / (1.0 + primal.abs() + dual.abs());
        let done = gap < tol && pinf < tol && dinf < tol;
        let diverged = !x.norm().is_finite() || x.norm() > 1e12 || y.norm() > 1e12;
        if done || diverged || it + 1 == max_iter {
            out = Some(IpmOutcome {
                y: y.clone(),
                primal,
                dual,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                converged: done,
                iterations: it,
            });
            break;
        }
        let Some(s_inv) = s.clone().try_inverse() else { break };
        let s_inv = sym(s_inv);
        let p: Vec<DMatrix<f64>> = d.a.iter().map(|aj| &x * aj * &s_inv).collect();
        let m = d.a.len();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = trace_dot(&d.a[i], &p[j].transpose());
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let ridge = 1e-14 * schur.trace().abs().max(1e-300);
        let Some(chol) = schur.clone().cholesky().or_else(|| (schur + DMatrix::identity(m, m) * ridge).cholesky()) else {
            break;
        };
        let x_rd = &x * &rd * &s_inv;
        let base = &d.b + apply(&d.a, &x_rd);
        let a_sinv = apply(&d.a, &s_inv);
        let direction = |sigma_mu: f64, corr: Option<&DMatrix<f64>>| {
            let mut rhs = &base - &a_sinv * sigma_mu;
            let corr_term = corr.map(|c| c * &s_inv);
            if let Some(ct) = &corr_term {
                rhs += apply(&d.a, ct);
            }
            let dy = chol.solve(&rhs);
            let ds = &rd - combine(&d.a, &dy, n);
            let mut dx = &s_inv * sigma_mu - &x - &x * &ds * &s_inv;
            if let Some(ct) = corr_term {
                dx -= ct;
            }
            (sym(dx), dy, ds)
        };
        let (dxa, _, dsa) = direction(0.0, None);
        let ap = max_step(&x, &dxa).min(1.0);
        let ad = max_step(&s, &dsa).min(1.0);
        let mu_aff = trace_dot(&(&x + &dxa * ap), &(&s + &dsa * ad)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr = &dxa * &dsa;
        let (dx, dy, ds) = direction(sigma * mu, Some(&corr));
        let ap = (0.95 * max_step(&x, &dx)).min(1.0);
        let ad = (0.95 * max_step(&s, &ds)).min(1.0);
        x = sym(x + dx * ap);
        y += dy * ad;
        s = sym(s + ds * ad);
    }
    out.unwrap_or_else(|| {
        let rp = &d.b - apply(&d.a, &x);
        let rd = &d.c - combine(&d.a, &y, n) - &s;
        IpmOutcome {
            primal: trace_dot(&d.c, &x),
            dual: d.b.dot(&y),
            primal_infeasibility: rp.norm() / bnorm,
            dual_infeasibility: rd.norm() / cnorm,
            y,
            converged: false,
            iterations: max_iter,
        }
    })
}
