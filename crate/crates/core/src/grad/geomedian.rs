use crate::error::{Error, Result};
use crate::robust::median;

pub const DEFAULT_GM_TOL: f64 = 1e-12;
pub const DEFAULT_GM_MAX_ITER: usize = 10_000;
const COINCIDE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    pub point: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective `Σ‖g − pₖ‖` at the start point and after every accepted step.
    pub objectives: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn objective(points: &[Vec<f64>], g: &[f64]) -> f64 {
    points.iter().map(|p| dist(p, g)).sum()
}

/// Weiszfeld iteration with the Vardi-Zhang modification at data points,
/// started from the coordinatewise median. A step that would increase the
/// objective (possible only through rounding) ends the iteration.
pub fn geometric_median(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<GeometricMedian> {
    let first = points.first().ok_or_else(|| Error::domain("geometric median of no points"))?;
    let d = first.len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::domain("points have different dimensions"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite point"));
    }
    let mut y: Vec<f64> = (0..d)
        .map(|j| median(&points.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let mut f = objective(points, &y);
    let mut objectives = vec![f];
    if points.len() == 1 {
        return Ok(GeometricMedian { point: first.clone(), converged: true, iterations: 0, objectives });
    }

    let mut weighted = vec![0.0; d];
    let mut resid = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        weighted.fill(0.0);
        resid.fill(0.0);
        let mut wsum = 0.0;
        let mut coincide = 0.0;
        for p in points {
            let r = dist(p, &y);
            if r <= COINCIDE {
                coincide += 1.0;
                continue;
            }
            let w = 1.0 / r;
            wsum += w;
            for ((acc, res), (&pv, &yv)) in weighted.iter_mut().zip(resid.iter_mut()).zip(p.iter().zip(&y)) {
                *acc += w * pv;
                *res += w * (pv - yv);
            }
        }
        if wsum == 0.0 {
            converged = true;
            break;
        }
        let r_norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        if coincide > 0.0 && r_norm <= coincide {
            // the data point y is itself optimal
            converged = true;
            break;
        }
        let (a, b) = if coincide > 0.0 { (1.0 - coincide / r_norm, coincide / r_norm) } else { (1.0, 0.0) };
        for ((nv, &wv), &yv) in next.iter_mut().zip(&weighted).zip(&y) {
            *nv = a * wv / wsum + b * yv;
        }
        let f_next = objective(points, &next);
        if f_next > f {
            converged = true;
            break;
        }
        let step = dist(&next, &y);
        std::mem::swap(&mut y, &mut next);
        f = f_next;
        objectives.push(f);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step <= tol * (1.0 + norm) {
            converged = true;
            break;
        }
    }
    Ok(GeometricMedian { point: y, converged, iterations, objectives })
}
