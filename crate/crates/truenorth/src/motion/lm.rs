//! Damped least-squares refinement of spherical two-view motion.
//!
//! The residual per correspondence is the angular distance from the tracked
//! bearing `q` to the epipolar plane spanned by `R·p` and `t`:
//!
//! ```text
//! r = asin( qᵀ n / ‖n‖ ),    n = t × (R·p)
//! ```
//!
//! The rotation is parametrized as a left-multiplied axis-angle increment
//! `exp(w)·R` and `t` as a free 3-vector; the residual is invariant to the
//! scale of `t`, so `t` is only normalized after the optimization.

use nalgebra::{Matrix3, Matrix6, Unit, Vector3, Vector6};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::sphere::Rotation;

use super::{recover_theta, Correspondence, RelativeMotion};

/// Options for [`estimate_relative_motion`](super::estimate_relative_motion).
#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Accepted-step budget; the energy surface is near-convex and the solve
    /// converges within ten steps in practice.
    pub max_iterations: usize,
    /// Stop once an accepted step is shorter than this.
    pub step_tolerance: f64,
    pub initial_lambda: f64,
    /// Random-translation restarts; the best final energy wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 10,
            step_tolerance: 1e-10,
            initial_lambda: 1e-3,
            restarts: 3,
            seed: 0,
        }
    }
}

const MIN_PLANE_NORM: f64 = 1e-12;
const MAX_LAMBDA: f64 = 1e12;

/// Residual and its analytic gradient w.r.t. the rotation increment `w`
/// (at `w = 0`) and the free translation vector `t`.
///
/// Returns `None` when `t` is parallel to `R·p` and the epipolar plane is
/// undefined.
pub(super) fn residual_and_jacobian(
    rp: &Vector3<f64>,
    t: &Vector3<f64>,
    q: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>, Vector3<f64>)> {
    let n = t.cross(rp);
    let n_norm = n.norm();
    if n_norm < MIN_PLANE_NORM {
        return None;
    }
    let u = (q.dot(&n) / n_norm).clamp(-1.0, 1.0);
    let r = u.asin();

    // dr/dn = 1/sqrt(1-u²) · qᵀ (I/‖n‖ − n nᵀ/‖n‖³)
    let denom = (1.0 - u * u).max(1e-12).sqrt();
    let dr_dn = (q / n_norm - n * (q.dot(&n)) / (n_norm * n_norm * n_norm)) / denom;

    // n = t × (R p): the left-increment derivative of R p is −(Rp)×, so
    // dn/dw = −t× (Rp)× and dn/dt = −(Rp)×.
    let rp_cross = rp.cross_matrix();
    let dn_dw = -t.cross_matrix() * rp_cross;
    let dn_dt = -rp_cross;

    let grad_w = dn_dw.transpose() * dr_dn;
    let grad_t = dn_dt.transpose() * dr_dn;
    Some((r, grad_w, grad_t))
}

fn energy(rotation: &Rotation, t: &Vector3<f64>, correspondences: &[Correspondence]) -> f64 {
    correspondences
        .iter()
        .filter_map(|c| {
            residual_and_jacobian(&(rotation * c.p.into_inner()), t, &c.q).map(|(r, _, _)| r * r)
        })
        .sum()
}

struct Iterate {
    rotation: Rotation,
    t: Vector3<f64>,
    energy: f64,
}

fn solve_from(
    init_t: Vector3<f64>,
    correspondences: &[Correspondence],
    opts: &LmOptions,
) -> Iterate {
    let mut rotation = Rotation::identity();
    let mut t = init_t;
    let mut e = energy(&rotation, &t, correspondences);
    let mut lambda = opts.initial_lambda;

    for _ in 0..opts.max_iterations {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for c in correspondences {
            let rp = rotation * c.p.into_inner();
            if let Some((r, gw, gt)) = residual_and_jacobian(&rp, &t, &c.q) {
                let mut row = Vector6::zeros();
                row.fixed_rows_mut::<3>(0).copy_from(&gw);
                row.fixed_rows_mut::<3>(3).copy_from(&gt);
                h.syger(1.0, &row, &row, 1.0);
                g += row * r;
            }
        }
        // syger only fills the lower triangle.
        h.fill_upper_triangle_with_lower_triangle();

        let mut accepted = false;
        while lambda <= MAX_LAMBDA {
            let mut damped = h;
            for i in 0..6 {
                damped[(i, i)] += lambda;
            }
            if let Some(chol) = damped.cholesky() {
                let step = chol.solve(&(-g));
                let dw = Vector3::new(step[0], step[1], step[2]);
                let dt = Vector3::new(step[3], step[4], step[5]);
                let cand_rot = Rotation::from_scaled_axis(dw) * rotation;
                let cand_t = t + dt;
                let cand_e = energy(&cand_rot, &cand_t, correspondences);
                if cand_e.is_finite() && cand_e <= e {
                    rotation = cand_rot;
                    t = cand_t;
                    e = cand_e;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if step.norm() < opts.step_tolerance {
                        return Iterate { rotation, t, energy: e };
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Iterate { rotation, t, energy: e }
}

/// Minimizes the summed squared epipolar residual over all given
/// correspondences (the caller prefilters outliers), starting from the
/// identity rotation and a random unit translation.
///
/// The translation sign is fixed so that the median per-feature angle is
/// non-negative, which makes `t` point along the camera heading.
pub fn estimate_relative_motion(
    correspondences: &[Correspondence],
    opts: &LmOptions,
) -> Result<RelativeMotion> {
    if correspondences.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "need at least 8 correspondences, got {}",
            correspondences.len()
        )));
    }

    let mut best: Option<Iterate> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[restart as u64]));
        let init_t = loop {
            let v = Vector3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            if v.norm() > 1e-6 {
                break v.normalize();
            }
        };
        let it = solve_from(init_t, correspondences, opts);
        if best.as_ref().is_none_or(|b| it.energy < b.energy) {
            best = Some(it);
        }
    }
    let best = best.expect("at least one restart runs");
    if !best.energy.is_finite() {
        return Err(Error::NoConvergence(format!(
            "non-finite energy {} after {} restarts",
            best.energy,
            opts.restarts.max(1)
        )));
    }

    let t_norm = best.t.norm();
    if t_norm < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "translation collapsed to zero during optimization".into(),
        ));
    }
    let mut translation = Unit::new_normalize(best.t);

    // Direction/antidirection disambiguation: flip so the median recovered
    // per-feature angle is non-negative.
    let mut thetas: Vec<f64> = correspondences
        .iter()
        .filter_map(|c| recover_theta(&best.rotation, &translation, c).ok())
        .map(|(omega, _)| omega)
        .collect();
    if !thetas.is_empty() {
        thetas.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
        if thetas[thetas.len() / 2] < 0.0 {
            translation = Unit::new_unchecked(-translation.into_inner());
        }
    }

    let mut residual_sum = 0.0;
    let mut residual_count = 0usize;
    for c in correspondences {
        let rp = best.rotation * c.p.into_inner();
        if let Some((r, _, _)) = residual_and_jacobian(&rp, &translation, &c.q) {
            residual_sum += r.abs();
            residual_count += 1;
        }
    }

    Ok(RelativeMotion {
        rotation: best.rotation,
        translation,
        inliers: (0..correspondences.len()).collect(),
        mean_residual: if residual_count > 0 {
            residual_sum / residual_count as f64
        } else {
            0.0
        },
    })
}

/// Orthogonal-Procrustes rotation fit that ignores translation: minimizes
/// `Σ‖q − R·p‖²` via the cross-covariance of the correspondences.
pub fn estimate_rotation_only(correspondences: &[Correspondence]) -> Result<Rotation> {
    if correspondences.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 correspondences, got {}",
            correspondences.len()
        )));
    }
    let mut cov = Matrix3::<f64>::zeros();
    for c in correspondences {
        cov += c.q.into_inner() * c.p.into_inner().transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (
        svd.u.ok_or_else(|| Error::degenerate("SVD failed on cross-covariance"))?,
        svd.v_t.ok_or_else(|| Error::degenerate("SVD failed on cross-covariance"))?,
    );
    let sigma = svd.singular_values;
    if sigma[1] < 1e-12 * sigma[0].max(1e-300) {
        return Err(Error::degenerate(
            "cross-covariance is rank-deficient; correspondences are collinear",
        ));
    }
    let det = (u * v_t).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let r = u * d * v_t;
    Ok(Rotation::from_matrix(&r))
}
