//! The metric space of time/path pairs `(t, w(.))`: restriction, the
//! Hausdorff-style metric `dist` with its one-sided part `dist*`, moduli of
//! continuity, and the standard bounds relating them.

use crate::error::{FhjError, Result};
use crate::fraccalc::eval_ac_path;
use crate::path::{dist as point_dist, AcPath, PathPoint, SampledPath};

/// How the inner minimum of `dist*` is taken over the second path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMin {
    /// Minimum over grid nodes only. Conservative, O(N^2).
    #[default]
    Nodes,
    /// Minimum over the polyline segments of the second path, by projecting
    /// each graph point onto every segment in (t, w)-space.
    SegmentProjection,
}

/// Restriction of a sampled path to `[0, t_index]` as a path-space point.
pub fn restrict(x: &SampledPath, t_index: usize) -> Result<PathPoint> {
    Ok(PathPoint::new(x.restrict(t_index)?))
}

/// Restriction of a generator-form path; the truncated generator is kept with
/// the point so later solvers need not re-derive it.
pub fn restrict_ac(x: &AcPath, t_index: usize) -> Result<PathPoint> {
    let realized = eval_ac_path(x)?;
    PathPoint::with_generator(
        realized.restrict(t_index)?,
        x.generator().restrict(t_index)?,
    )
}

/// One-sided distance: max over graph points of `p` of the min distance to
/// the graph of `q`, in time-state space.
pub fn dist_star(p: &PathPoint, q: &PathPoint) -> Result<f64> {
    dist_star_with(p, q, InnerMin::Nodes)
}

pub fn dist_star_with(p: &PathPoint, q: &PathPoint, inner: InnerMin) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(FhjError::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let pp = p.path();
    let qq = q.path();
    let mut worst = 0.0_f64;
    for i in 0..=pp.last_index() {
        let ti = pp.grid().t(i);
        let wi = pp.value(i);
        let mut best = f64::INFINITY;
        for j in 0..=qq.last_index() {
            let tj = qq.grid().t(j);
            let wj = qq.value(j);
            let dt = ti - tj;
            let d2 = dt * dt + sq_dist(wi, wj);
            if d2 < best {
                best = d2;
            }
        }
        if inner == InnerMin::SegmentProjection {
            for j in 0..qq.last_index() {
                let d2 = sq_dist_to_segment(ti, wi, qq, j);
                if d2 < best {
                    best = d2;
                }
            }
        }
        let best = best.sqrt();
        if best > worst {
            worst = best;
        }
    }
    Ok(worst)
}

/// Metric on the path space: the larger of the two one-sided distances.
pub fn dist(p: &PathPoint, q: &PathPoint) -> Result<f64> {
    dist_with(p, q, InnerMin::Nodes)
}

pub fn dist_with(p: &PathPoint, q: &PathPoint, inner: InnerMin) -> Result<f64> {
    Ok(dist_star_with(p, q, inner)?.max(dist_star_with(q, p, inner)?))
}

/// Modulus of continuity: the largest oscillation over node pairs at time
/// distance `<= delta`. Nondecreasing in `delta`, zero at `delta = 0`.
pub fn modulus_of_continuity(p: &PathPoint, delta: f64) -> f64 {
    let path = p.path();
    let h = path.grid().step();
    // time gaps are multiples of h; a small slack keeps |t_i - t_j| <= delta
    // robust against rounding of the node times
    let span = if delta < 0.0 {
        return 0.0;
    } else {
        ((delta / h) * (1.0 + 1e-12)).floor() as usize
    };
    let mut worst = 0.0_f64;
    for i in 0..=path.last_index() {
        let hi = (i + span).min(path.last_index());
        for j in (i + 1)..=hi {
            worst = worst.max(point_dist(path.value(i), path.value(j)));
        }
    }
    worst
}

/// Residuals of the three metric bounds for `t_p >= t_q`:
///
/// 1. `dist <= (t - t') + kappa(t - t') + max ||w - w'||`
/// 2. `t - t' <= dist`
/// 3. `max ||w - w'|| <= dist + kappa(dist)`
///
/// where `kappa` is the modulus of continuity of the longer path. Each
/// residual is `lhs - rhs`; a bound holds when its residual `<= tolerance`.
#[derive(Debug, Clone, Copy)]
pub struct DistBounds {
    pub residuals: [f64; 3],
    pub holds: [bool; 3],
    pub tolerance: f64,
}

impl DistBounds {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|b| *b)
    }
}

/// Checks the three bounds with a grid-resolution-driven tolerance `10 h`
/// (the moduli and the inner minima are only evaluated on nodes).
pub fn check_dist_bounds(p: &PathPoint, q: &PathPoint) -> Result<DistBounds> {
    if p.t_index() < q.t_index() {
        return Err(FhjError::InvalidParameter(
            "check_dist_bounds expects t_p >= t_q".into(),
        ));
    }
    let d = dist(p, q)?;
    let gap = p.t() - q.t();
    let sup_common = p.path().max_node_distance(q.path(), q.t_index())?;
    let kappa_gap = modulus_of_continuity(p, gap);
    let kappa_d = modulus_of_continuity(p, d);
    let tolerance = 10.0 * p.grid().step();
    let residuals = [
        d - (gap + kappa_gap + sup_common),
        gap - d,
        sup_common - (d + kappa_d),
    ];
    let holds = [
        residuals[0] <= tolerance,
        residuals[1] <= tolerance,
        residuals[2] <= tolerance,
    ];
    Ok(DistBounds {
        residuals,
        holds,
        tolerance,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance from the graph point `(t, w)` to segment `j..j+1` of `q`
/// in R^{1+n}.
fn sq_dist_to_segment(t: f64, w: &[f64], q: &SampledPath, j: usize) -> f64 {
    let t0 = q.grid().t(j);
    let t1 = q.grid().t(j + 1);
    let a = q.value(j);
    let b = q.value(j + 1);
    // segment direction and point offset in (time, state) coordinates
    let mut dir_sq = (t1 - t0) * (t1 - t0);
    let mut offset_dot_dir = (t - t0) * (t1 - t0);
    for c in 0..w.len() {
        let d = b[c] - a[c];
        dir_sq += d * d;
        offset_dot_dir += (w[c] - a[c]) * d;
    }
    let lambda = if dir_sq > 0.0 {
        (offset_dot_dir / dir_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut acc = {
        let dt = t - (t0 + lambda * (t1 - t0));
        dt * dt
    };
    for c in 0..w.len() {
        let dc = w[c] - (a[c] + lambda * (b[c] - a[c]));
        acc += dc * dc;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::make_ac_path;
    use crate::grid::Grid;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    fn point(n: usize, last: usize, f: impl Fn(f64) -> f64) -> PathPoint {
        PathPoint::new(SampledPath::scalar_from_fn(grid(n), last, f).unwrap())
    }

    #[test]
    fn dist_of_point_with_itself_is_zero() {
        let p = point(50, 30, |t| t.sin());
        assert_eq!(dist(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn constant_paths_with_different_horizons() {
        // w = c on [0,1] against w' = c on [0,0.5]: the inner min saturates at
        // the shorter path's endpoint, so dist = 0.5 exactly
        let p = point(100, 100, |_| 0.7);
        let q = point(100, 50, |_| 0.7);
        let d = dist(&p, &q).unwrap();
        assert!((d - 0.5).abs() < 1e-12, "dist {d}");
        // the bounds are tight here: 0.5 <= 0.5 <= 0.5
        let b = check_dist_bounds(&p, &q).unwrap();
        assert!(b.all_hold());
        assert!(b.residuals[0].abs() < 1e-12);
        assert!(b.residuals[1].abs() < 1e-12);
    }

    #[test]
    fn time_gap_is_a_lower_bound() {
        let p = point(80, 80, |t| (3.0 * t).cos());
        let q = point(80, 40, |t| (3.0 * t).cos() + 0.1);
        let d = dist(&p, &q).unwrap();
        assert!(d >= p.t() - q.t());
    }

    #[test]
    fn extension_has_zero_one_sided_distance() {
        let x = SampledPath::scalar_from_fn(grid(60), 60, |t| t * t - t).unwrap();
        let p = restrict(&x, 35).unwrap();
        let q = restrict(&x, 60).unwrap();
        assert_eq!(dist_star(&p, &q).unwrap(), 0.0);
        assert!(dist_star(&q, &p).unwrap() > 0.0);
    }

    #[test]
    fn segment_projection_never_increases_dist_star() {
        let p = point(40, 40, |t| (5.0 * t).sin());
        let q = point(40, 25, |t| (4.0 * t).cos());
        let nodes = dist_star_with(&p, &q, InnerMin::Nodes).unwrap();
        let refined = dist_star_with(&p, &q, InnerMin::SegmentProjection).unwrap();
        assert!(refined <= nodes + 1e-15);
    }

    #[test]
    fn modulus_of_linear_path_is_the_gap() {
        let p = point(100, 100, |t| t);
        // |w(tau)-w(tau')| = |tau-tau'|, so kappa(0.25) = 0.25 on nodes
        assert!((modulus_of_continuity(&p, 0.25) - 0.25).abs() < 1e-12);
        assert_eq!(modulus_of_continuity(&p, 0.0), 0.0);
        // kappa(T) is the diameter of the value set
        assert!((modulus_of_continuity(&p, 1.0) - 1.0).abs() < 1e-12);
        let c = point(100, 100, |_| 3.0);
        assert_eq!(modulus_of_continuity(&c, 0.5), 0.0);
    }

    #[test]
    fn modulus_is_nondecreasing() {
        let p = point(64, 64, |t| (7.0 * t).sin() * t);
        let mut prev = 0.0;
        for k in 0..=10 {
            let m = modulus_of_continuity(&p, 0.1 * k as f64);
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn bounds_hold_on_restrictions_of_one_path() {
        let x = SampledPath::scalar_from_fn(grid(200), 200, |t| (2.0 * t).sin()).unwrap();
        let p = restrict(&x, 200).unwrap();
        let q = restrict(&x, 120).unwrap();
        let b = check_dist_bounds(&p, &q).unwrap();
        assert!(b.all_hold(), "residuals {:?}", b.residuals);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = point(10, 10, |t| t);
        let q = PathPoint::new(
            SampledPath::from_fn(grid(10), 2, 10, |t| vec![t, t]).unwrap(),
        );
        assert!(dist(&p, &q).is_err());
    }

    #[test]
    fn convergence_transport_on_constructed_sequences() {
        // x_k -> x uniformly and t_k -> t imply dist -> 0
        let n = 200;
        let x = SampledPath::scalar_from_fn(grid(n), n, |t| (2.0 * t).sin()).unwrap();
        let target = restrict(&x, 150).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1usize, 2, 4, 8, 16] {
            let bump = 1.0 / k as f64;
            let xk =
                SampledPath::scalar_from_fn(grid(n), n, |t| (2.0 * t).sin() + bump * (t * 9.0).cos())
                    .unwrap();
            let tk = 150 + 16 / k;
            let pk = restrict(&xk, tk).unwrap();
            let d = dist(&pk, &target).unwrap();
            assert!(d <= prev + 1e-12, "not shrinking at k={k}");
            prev = d;
        }
        assert!(prev < 0.1, "limit distance {prev}");
    }

    #[test]
    fn restrict_ac_keeps_the_generator() {
        let gen = SampledPath::scalar_from_fn(grid(50), 50, |t| t + 1.0).unwrap();
        let ac = make_ac_path(&[0.5], gen, 0.5).unwrap();
        let p = restrict_ac(&ac, 20).unwrap();
        assert_eq!(p.t_index(), 20);
        assert!(p.generator().is_some());
        assert_eq!(p.generator().unwrap().last_index(), 20);
    }
}
