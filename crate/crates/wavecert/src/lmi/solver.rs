//! Minimization of the worst-case top eigenvalue over the multiplier simplex.
//!
//! The feasibility problems here are small (four or five weights, a handful
//! of pencils) but must resolve hair-thin margins reliably. A projected
//! subgradient method with Polyak step sizes and a geometrically shrinking
//! target gap does that without bringing in an SDP solver: the objective
//! `f(S) = max_p lambda_max(sum_i S_i B_i^p)` is convex and positively
//! homogeneous, so normalizing to the simplex loses nothing.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Total evaluation budget.
    pub max_iters: usize,
    /// Lower bound kept on every weight so witnesses stay strictly positive.
    pub floor: f64,
    /// Return as soon as the best value drops below this threshold.
    pub early_exit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            floor: 1e-9,
            early_exit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub weights: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// The target gap shrank below resolution; the value is trustworthy as a
    /// (near-)minimum, not just as an upper bound.
    pub converged: bool,
    pub early: bool,
}

fn eval(pencils: &[Vec<DMatrix<f64>>], s: &[f64]) -> (f64, Vec<f64>) {
    let n = s.len();
    let mut worst = f64::NEG_INFINITY;
    let mut grad = vec![0.0; n];
    for basis in pencils {
        let dim = basis[0].nrows();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (i, b) in basis.iter().enumerate() {
            m += b * s[i];
        }
        let se = m.symmetric_eigen();
        let mut k = 0;
        for (j, &lam) in se.eigenvalues.iter().enumerate() {
            if lam > se.eigenvalues[k] {
                k = j;
            }
        }
        let lam = se.eigenvalues[k];
        if lam > worst {
            worst = lam;
            let v = se.eigenvectors.column(k);
            for (i, b) in basis.iter().enumerate() {
                grad[i] = (b * v).dot(&v);
            }
        }
    }
    (worst, grad)
}

/// Euclidean projection onto `{ s_i >= floor, sum s_i = 1 }`.
fn project(s: &mut [f64], floor: f64) {
    let n = s.len();
    let mass = 1.0 - floor * n as f64;
    let mut y: Vec<f64> = s.iter().map(|&x| x - floor).collect();
    let mut sorted = y.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for (i, v) in y.iter_mut().enumerate() {
        s[i] = (*v - theta).max(0.0) + floor;
    }
}

/// Minimize `max_p lambda_max(sum_i S_i B_i^p)` over the floored simplex.
///
/// Every pencil in `pencils` is a basis list, one symmetric matrix per
/// weight; all pencils must agree on the weight count. `starts` supplies
/// initial points (projected before use); an empty list falls back to the
/// uniform start.
pub fn minimize_max_lambda(
    pencils: &[Vec<DMatrix<f64>>],
    starts: &[Vec<f64>],
    opts: &SolveOptions,
) -> SolveOutcome {
    let n = pencils[0].len();
    let uniform = vec![1.0 / n as f64; n];
    let mut evals = 0usize;

    let mut s_best = Vec::new();
    let mut f_best = f64::INFINITY;
    let candidate_starts: Vec<Vec<f64>> = if starts.is_empty() {
        vec![uniform]
    } else {
        starts.to_vec()
    };
    let mut g_at_best = vec![0.0; n];
    for cand in &candidate_starts {
        let mut s = cand.clone();
        project(&mut s, opts.floor);
        let (f, g) = eval(pencils, &s);
        evals += 1;
        if f < f_best {
            f_best = f;
            s_best = s;
            g_at_best = g;
        }
        if let Some(th) = opts.early_exit {
            if f_best < th {
                return SolveOutcome {
                    weights: s_best,
                    value: f_best,
                    iterations: evals,
                    converged: false,
                    early: true,
                };
            }
        }
    }

    let mut s = s_best.clone();
    let mut f_cur = f_best;
    let mut g = g_at_best;
    let mut delta = 0.25 * (1.0 + f_best.abs());
    let stall_limit = 60 * n;
    let mut stall = 0usize;
    let mut f_mark = f_best;
    let mut converged = false;

    while evals < opts.max_iters {
        if let Some(th) = opts.early_exit {
            if f_best < th {
                return SolveOutcome {
                    weights: s_best,
                    value: f_best,
                    iterations: evals,
                    converged: false,
                    early: true,
                };
            }
        }
        let gn2: f64 = g.iter().map(|x| x * x).sum();
        if gn2 < 1e-300 {
            // Flat spot: either optimal or the target gap is exhausted.
            delta *= 0.5;
            if delta < 1e-12 * (1.0 + f_best.abs()) {
                converged = true;
                break;
            }
            continue;
        }
        let target = f_best - delta;
        let step = (f_cur - target) / gn2;
        let mut s_new: Vec<f64> = s
            .iter()
            .zip(g.iter())
            .map(|(si, gi)| si - step * gi)
            .collect();
        project(&mut s_new, opts.floor);
        let (f_new, g_new) = eval(pencils, &s_new);
        evals += 1;
        if f_new < f_best {
            f_best = f_new;
            s_best = s_new.clone();
        }
        if f_best < f_mark - 0.25 * delta {
            stall = 0;
            f_mark = f_best;
        } else {
            stall += 1;
        }
        if stall > stall_limit {
            delta *= 0.5;
            stall = 0;
            f_mark = f_best;
            if delta < 1e-12 * (1.0 + f_best.abs()) {
                converged = true;
                break;
            }
            s = s_best.clone();
            let (f_r, g_r) = eval(pencils, &s);
            evals += 1;
            f_cur = f_r;
            g = g_r;
            continue;
        }
        s = s_new;
        f_cur = f_new;
        g = g_new;
    }

    SolveOutcome {
        weights: s_best,
        value: f_best,
        iterations: evals,
        converged,
        early: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(entries: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(entries))
    }

    #[test]
    fn projection_lands_on_floored_simplex() {
        let mut s = vec![5.0, -3.0, 0.2];
        project(&mut s, 1e-9);
        let sum: f64 = s.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(s.iter().all(|&x| x >= 1e-9));
        // The large coordinate keeps dominating.
        assert!(s[0] > s[2] && s[2] > s[1] - 1e-15);
    }

    #[test]
    fn solves_a_balance_problem() {
        // f(S) = |S1 - S2| over the simplex: minimum 0 on the centre line.
        let basis = vec![diag(&[1.0, -1.0]), diag(&[-1.0, 1.0])];
        let out = minimize_max_lambda(&[basis], &[vec![0.9, 0.1]], &SolveOptions::default());
        assert!(out.converged);
        assert!(out.value.abs() < 1e-6, "value {}", out.value);
        assert!((out.weights[0] - 0.5).abs() < 1e-4, "{:?}", out.weights);
    }

    #[test]
    fn walks_to_a_vertex_optimum() {
        // f(S) = max(-S1 - 2 S2, S1 - S2); on the simplex the minimum sits
        // at S1 -> 0 with value -1.
        let basis = vec![diag(&[-1.0, 1.0]), diag(&[-2.0, -1.0])];
        let out = minimize_max_lambda(&[basis], &[], &SolveOptions::default());
        assert!(out.value < -0.999, "value {}", out.value);
    }

    #[test]
    fn early_exit_short_circuits() {
        let basis = vec![diag(&[-1.0, 0.0]), diag(&[0.0, -1.0])];
        let opts = SolveOptions {
            early_exit: Some(-0.1),
            ..SolveOptions::default()
        };
        let out = minimize_max_lambda(&[basis], &[], &opts);
        assert!(out.early);
        assert!(out.value < -0.1);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn reports_nonnegative_optimum_honestly() {
        // Both weights produce the identity: f(S) = 1 everywhere.
        let basis = vec![diag(&[1.0, 1.0]), diag(&[1.0, 1.0])];
        let out = minimize_max_lambda(&[basis], &[], &SolveOptions::default());
        assert!(out.converged);
        assert!((out.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multi_pencil_takes_the_worst_case() {
        // Pencil 1 rewards S1-heavy, pencil 2 rewards S2-heavy; the common
        // minimizer balances them.
        let p1 = vec![diag(&[1.0]), diag(&[-1.0])];
        let p2 = vec![diag(&[-1.0]), diag(&[1.0])];
        let out = minimize_max_lambda(&[p1, p2], &[], &SolveOptions::default());
        assert!(out.converged);
        assert!((out.weights[0] - 0.5).abs() < 1e-6);
        assert!(out.value < 1e-8);
    }
}
