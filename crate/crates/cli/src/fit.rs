//! Fitting (3,2)-mesh wave-plate angles to a given unitary.

use qae_core::{build_mesh, mesh_unitary, Matrix64, ParameterVector64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nelder-Mead simplex minimization from `start` with initial edge `step`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|i| {
            let mut p = start.to_vec();
            if i > 0 {
                p[i - 1] += step;
            }
            let v = f(&p);
            (p, v)
        })
        .collect();

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread <= 1e-30 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (p, v) in simplex.iter_mut().skip(1) {
                    for (x, b) in p.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    *v = f(p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Squared Frobenius distance between the rows of `a` and `b` after each
/// row of `b` is given its best global phase, restricted to `rows`.
fn rephased_distance_sqr(a: &Matrix64, b: &Matrix64, rows: std::ops::Range<usize>) -> f64 {
    rows.map(|r| {
        let (ra, rb) = (a.row(r), b.row(r));
        let na: f64 = ra.iter().map(|z| z.norm_sqr()).sum();
        let nb: f64 = rb.iter().map(|z| z.norm_sqr()).sum();
        let overlap = rb
            .iter()
            .zip(ra)
            .map(|(x, y)| x.conj() * y)
            .sum::<qae_core::Complex64>();
        na + nb - 2.0 * overlap.norm()
    })
    .sum::<f64>()
    .max(0.0)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MeshFit {
    pub angles: ParameterVector64,
    /// Frobenius distance to the target after per-row output phases.
    pub residual: f64,
    /// Distance of the junk row alone, up to phase; the only part that
    /// affects the cost.
    pub junk_row_residual: f64,
}

/// Best (3,2)-mesh approximation of a 3x3 target up to output-row phases.
pub fn fit_mesh(target: &Matrix64, seed: u64, restarts: usize) -> MeshFit {
    let layout = build_mesh(3, 2).expect("3 -> 2 is valid");
    let unitary_at = |x: &[f64]| {
        mesh_unitary(&layout, &ParameterVector64::new(x.to_vec()))
            .expect("4 angles")
            .into_matrix()
    };
    let objective = |x: &[f64]| rephased_distance_sqr(target, &unitary_at(x), 0..3);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..restarts {
        let start: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..360.0)).collect();
        let mut cur = nelder_mead(&objective, &start, 30.0, 2000);
        // restarting from the optimum with a shrinking simplex refines it further
        for step in [1.0, 1e-2, 1e-4] {
            let next = nelder_mead(&objective, &cur.0, step, 2000);
            if next.1 <= cur.1 {
                cur = next;
            }
        }
        if best.as_ref().is_none_or(|b| cur.1 < b.1) {
            best = Some(cur);
        }
        if best.as_ref().is_some_and(|b| b.1 < 1e-24) {
            break;
        }
    }
    let (x, value) = best.expect("at least one restart");
    let fitted = unitary_at(&x);
    MeshFit {
        angles: ParameterVector64::new(x),
        residual: value.sqrt(),
        junk_row_residual: rephased_distance_sqr(target, &fitted, 2..3).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let (x, v) = nelder_mead(&f, &[5.0, 5.0], 1.0, 5000);
        assert!(v < 1e-20, "{v}");
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_mesh_output() {
        let layout = build_mesh(3, 2).unwrap();
        let x = ParameterVector64::new(vec![12.0, 250.0, 71.0, 133.0]);
        let target = mesh_unitary(&layout, &x).unwrap().into_matrix();
        let fit = fit_mesh(&target, 1, 20);
        assert!(fit.residual <= 1e-9, "{}", fit.residual);
        assert!(fit.junk_row_residual <= fit.residual + 1e-15);
    }
}
