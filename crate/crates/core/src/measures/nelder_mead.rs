/// Downhill simplex minimizer with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial simplex offsets along each coordinate.
    pub initial_step: Vec<f64>,
    /// Converged when the spread of vertex values is below this…
    pub f_tol: f64,
    /// …and every vertex lies within this distance of the best one.
    pub x_tol: f64,
    /// Also converged when the value spread is within `f_tol` and the best
    /// value has not improved by more than `f_tol` for this many iterations.
    /// Catches plateaus flatter than the rounding noise, where the simplex
    /// drifts instead of shrinking.
    pub stall_iter: usize,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn nelder_mead<F>(mut f: F, start: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    assert_eq!(opts.initial_step.len(), n, "one initial step per coordinate");

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for k in 0..n {
        let mut x = start.to_vec();
        x[k] += opts.initial_step[k];
        let v = f(&x);
        simplex.push((x, v));
    }

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect() };

    let mut iterations = 0;
    let mut converged = false;
    let mut anchor = f64::INFINITY;
    let mut since_progress = 0;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = worst - best;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best < anchor - opts.f_tol {
            anchor = best;
            since_progress = 0;
        } else {
            since_progress += 1;
        }
        let stalled = opts.stall_iter > 0 && since_progress >= opts.stall_iter;
        if spread <= opts.f_tol && (diameter <= opts.x_tol || stalled) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let x_worst = simplex[n].0.clone();
        let second_worst = simplex[n - 1].1;

        let xr = lerp(&centroid, &x_worst, -1.0);
        let fr = f(&xr);
        if fr < best {
            let xe = lerp(&centroid, &x_worst, -2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = lerp(&centroid, &xr, 0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &x_worst, 0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < worst.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = lerp(&x_best, &vertex.0, 0.5);
            let v = f(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult { x, value, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> NelderMeadOptions {
        NelderMeadOptions { initial_step: vec![0.5, 0.5], f_tol: 1e-14, x_tol: 1e-9, stall_iter: 0, max_iter: 5000 }
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = nelder_mead(rosen, &[-1.2, 1.0], &opts());
        assert!(res.converged);
        assert!((res.x[0] - 1.0).abs() < 1e-6 && (res.x[1] - 1.0).abs() < 1e-6, "{res:?}");
    }

    #[test]
    fn flat_objective_collapses_the_simplex() {
        let res = nelder_mead(|_| 3.0, &[0.0, 0.0], &opts());
        assert!(res.converged);
        assert_eq!(res.value, 3.0);
    }

    #[test]
    fn noisy_plateau_converges_by_stalling() {
        // Deterministic jitter far below f_tol on an otherwise flat valley floor.
        let noisy = |x: &[f64]| x[1] * x[1] + 1e-16 * ((x[0] * 1e9).sin());
        let strict = nelder_mead(noisy, &[0.0, 1.0], &NelderMeadOptions { max_iter: 3000, ..opts() });
        let o = NelderMeadOptions { f_tol: 1e-12, stall_iter: 100, max_iter: 3000, ..opts() };
        let res = nelder_mead(noisy, &[0.0, 1.0], &o);
        assert!(res.converged, "{res:?} (strict: {strict:?})");
        assert!(res.value < 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let o = NelderMeadOptions { max_iter: 3, ..opts() };
        let res = nelder_mead(|x| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &o);
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
    }
}
