//! Exact minimum enclosing ball of a small point set in arbitrary dimension.
//!
//! Randomized-incremental (Welzl-style, move-to-front) search. Balls of
//! boundary sets are circumballs computed in the set's affine hull, so the
//! ambient dimension only enters through dot products. Intended for the
//! subset sizes the gadget verifier enumerates (tens of points), where the
//! recursion is exact and fast.

use crate::error::{Error, Result};
use crate::util::dist_sq;

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius_sq: f64,
}

impl Ball {
    fn empty(dim: usize) -> Self {
        Ball { center: vec![0.0; dim], radius_sq: -1.0 }
    }

    pub fn radius(&self) -> f64 {
        if self.radius_sq < 0.0 {
            -1.0
        } else {
            self.radius_sq.sqrt()
        }
    }

    pub fn contains(&self, p: &[f64], slack: f64) -> bool {
        self.radius_sq >= 0.0 && dist_sq(&self.center, p) <= self.radius_sq + slack
    }
}

const CONTAIN_SLACK: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-12;

/// The unique smallest ball containing all `points`.
pub fn min_enclosing_ball(points: &[Vec<f64>]) -> Result<Ball> {
    if points.is_empty() {
        return Err(Error::Domain("minimum enclosing ball needs at least one point".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Domain("points must share a dimension".into()));
    }
    let mut refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let n = refs.len();
    let mut support: Vec<&[f64]> = Vec::new();
    Ok(welzl(&mut refs, n, &mut support, dim))
}

fn welzl<'a>(
    pts: &mut Vec<&'a [f64]>,
    end: usize,
    support: &mut Vec<&'a [f64]>,
    dim: usize,
) -> Ball {
    let mut ball = ball_of_support(support, dim);
    for i in 0..end {
        let slack = CONTAIN_SLACK * ball.radius_sq.max(1.0);
        if !ball.contains(pts[i], slack) {
            let p = pts[i];
            support.push(p);
            ball = welzl(pts, i, support, dim);
            support.pop();
            // Move-to-front keeps hard points early in later passes.
            pts[..=i].rotate_right(1);
        }
    }
    ball
}

/// Smallest ball with every support point on its boundary: the circumball
/// in the support's affine hull. Affinely dependent supports (which only
/// appear for cospherical degeneracies) fall back to exhaustive search over
/// sub-supports.
fn ball_of_support(support: &[&[f64]], dim: usize) -> Ball {
    match support.len() {
        0 => Ball::empty(dim),
        1 => Ball { center: support[0].to_vec(), radius_sq: 0.0 },
        _ => circumball(support).unwrap_or_else(|| meb_of_few(support, dim)),
    }
}

/// Circumcenter of affinely independent points: writing
/// `c = p0 + Σ λ_i (p_i − p0)`, equidistance gives the linear system
/// `2 (p_i − p0)·(p_j − p0) λ_j = ‖p_i − p0‖²`.
fn circumball(support: &[&[f64]]) -> Option<Ball> {
    let k = support.len() - 1;
    let p0 = support[0];
    let vs: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = 2.0 * dot(&vs[i], &vs[j]);
        }
        b[i] = dot(&vs[i], &vs[i]);
    }
    let lambda = solve(a, b)?;
    let mut center = p0.to_vec();
    for (l, v) in lambda.iter().zip(&vs) {
        for (c, x) in center.iter_mut().zip(v) {
            *c += l * x;
        }
    }
    let radius_sq = dist_sq(&center, p0);
    // Reject solutions that are not genuinely equidistant (near-singular
    // systems can pass elimination yet drift).
    for p in support {
        if (dist_sq(&center, p) - radius_sq).abs() > 1e-9 * radius_sq.max(1.0) {
            return None;
        }
    }
    Some(Ball { center, radius_sq })
}

/// Exact MEB of a handful of points by trying the circumball of every
/// subset and keeping the smallest one that contains everything.
fn meb_of_few(points: &[&[f64]], dim: usize) -> Ball {
    let n = points.len();
    let mut best = Ball::empty(dim);
    for mask in 1u32..(1 << n) {
        let subset: Vec<&[f64]> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect();
        let ball = match subset.len() {
            1 => Some(Ball { center: subset[0].to_vec(), radius_sq: 0.0 }),
            _ => circumball(&subset),
        };
        if let Some(ball) = ball {
            let slack = CONTAIN_SLACK * ball.radius_sq.max(1.0);
            if points.iter().all(|p| ball.contains(p, slack))
                && (best.radius_sq < 0.0 || ball.radius_sq < best.radius_sq)
            {
                best = ball;
            }
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` on (near) singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= PIVOT_TOL * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for j in col..n {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in (col + 1)..n {
            acc -= a[col][j] * x[j];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points_give_the_diameter_ball() {
        let ball =
            min_enclosing_ball(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_relative_eq!(ball.center[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ball.center[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(ball.radius_sq, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn obtuse_triangle_uses_longest_edge() {
        // The third point lies inside the diameter ball of the other two.
        let ball = min_enclosing_ball(&[
            vec![0.0, 0.0],
            vec![4.0, 0.0],
            vec![2.0, 0.5],
        ])
        .unwrap();
        assert_relative_eq!(ball.radius_sq, 4.0, epsilon = 1e-9);
        assert_relative_eq!(ball.center[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn equilateral_triangle_uses_circumball() {
        let h = 3.0f64.sqrt() / 2.0;
        let ball = min_enclosing_ball(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.5, h],
        ])
        .unwrap();
        // Circumradius of a unit equilateral triangle is 1/√3.
        assert_relative_eq!(ball.radius_sq, 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn regular_simplex_circumradius_matches_closed_form() {
        // k mutually equidistant points at squared distance L²:
        // circumradius² = L²(k−1)/(2k). Embed as scaled standard basis.
        for k in 2..=6usize {
            let pts: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    let mut p = vec![0.0; k];
                    p[i] = 1.0;
                    p
                })
                .collect();
            let ball = min_enclosing_ball(&pts).unwrap();
            let expect = 2.0 * (k as f64 - 1.0) / (2.0 * k as f64);
            assert_relative_eq!(ball.radius_sq, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn handles_cospherical_degeneracy() {
        // Four cocircular points (an affinely dependent boundary set).
        let pts = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let ball = min_enclosing_ball(&pts).unwrap();
        assert_relative_eq!(ball.radius_sq, 1.0, epsilon = 1e-9);
        assert!(ball.center[0].abs() < 1e-9 && ball.center[1].abs() < 1e-9);
    }

    #[test]
    fn matches_subset_oracle_on_random_sets() {
        // Independent oracle: the MEB is the smallest circumball of some
        // subset that contains everything.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..40 {
            let d = rng.random_range(2..4usize);
            let n = rng.random_range(2..8usize);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ball = min_enclosing_ball(&pts).unwrap();
            for p in &pts {
                assert!(
                    ball.contains(p, 1e-9 * ball.radius_sq.max(1.0)),
                    "trial {trial}: point outside"
                );
            }
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let oracle = meb_of_few(&refs, d);
            assert_relative_eq!(ball.radius_sq, oracle.radius_sq, epsilon = 1e-8);
        }
    }

    #[test]
    fn rejects_empty_input() {
        assert!(min_enclosing_ball(&[]).is_err());
    }
}
