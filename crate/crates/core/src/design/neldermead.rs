//! Nelder-Mead on a box. Trial points are projected onto the bounds.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the simplex values agree to this relative spread.
    pub f_tol: f64,
    /// ...and its vertices to this fraction of the box width.
    pub x_tol: f64,
    /// Initial edge length as a fraction of the box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 400, f_tol: 1e-9, x_tol: 1e-6, initial_step: 0.25 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimizes `f` over the box; infeasible evaluations should return `+∞`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut start = x0.to_vec();
    clamp(&mut start, bounds);
    let f0 = eval(&start, &mut evals);
    if n == 0 {
        return NelderMeadResult { x: start, f: f0, evals };
    }

    let mut simplex = vec![(start.clone(), f0)];
    for k in 0..n {
        let (lo, hi) = bounds[k];
        let width = hi - lo;
        let mut v = start.clone();
        let step = opts.initial_step * width;
        // step inward when the start sits at the upper bound
        v[k] = if v[k] + step <= hi { v[k] + step } else { v[k] - step };
        clamp(&mut v, bounds);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo).max(f64::MIN_POSITIVE)).collect();

    while evals < opts.max_evals {
        // stable sort keeps earlier vertices first on ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).zip(&widths).map(|((a, b), w)| (a - b).abs() / w))
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= opts.f_tol * best.abs().max(1e-300) && size <= opts.x_tol {
            break;
        }
        if size == 0.0 {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut p, bounds);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let x_best = simplex[0].0.clone();
        for k in 1..=n {
            let mut v: Vec<f64> = x_best.iter().zip(&simplex[k].0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            clamp(&mut v, bounds);
            let fv = eval(&v, &mut evals);
            simplex[k] = (v, fv);
            if evals >= opts.max_evals {
                break;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult { x, f: fx, evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_in_box() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions { max_evals: 5000, f_tol: 1e-14, x_tol: 1e-10, ..Default::default() };
        let r = nelder_mead(f, &[-1.0, 1.5], &[(-2.0, 2.0), (-2.0, 2.0)], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn active_bound() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 0.5).powi(2);
        let r = nelder_mead(f, &[0.5, 0.5], &[(0.0, 1.0), (0.0, 1.0)], &NelderMeadOptions { max_evals: 2000, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[1].abs() < 1e-6);
        assert!(r.evals <= 2000);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.2 { f64::INFINITY } else { x[0] };
        let r = nelder_mead(f, &[0.1], &[(0.0, 1.0)], &NelderMeadOptions::default());
        assert!(r.f <= 0.1);
    }
}
