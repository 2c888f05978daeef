//! Reference experiment suite: small, fully specified configurations with
//! declared fixed points, used by the verification tests and as CLI examples.

use std::sync::Arc;

use halpern_core::mdp::{cycle_mdp, FSpec, Mdp};
use halpern_core::noise::NoiseModel;
use halpern_core::op::NonexpansiveOp;
use halpern_core::rates::{hyp_from_fixed_point, HypCertificate};
use halpern_core::schedule::Schedule;
use halpern_core::scheme::SchemeConfig;
use halpern_core::space::{NormKind, Point};
use halpern_core::{make_halpern, make_km_tikhonov, PathRng};

/// A named configuration together with its boundedness certificate and the
/// noise decay constants entering the linear bounds.
#[derive(Clone, Debug)]
pub struct DeskCase {
    pub name: &'static str,
    pub config: SchemeConfig,
    /// `max(||x0 - p||, ||u - p||)` for the declared fixed point.
    pub k_point: f64,
    pub hyp: HypCertificate,
    /// decay constant of `E||xi_n|| <= K1/(n+2)^2` (0 for noise-free xi)
    pub k1: f64,
    /// decay constant of `E||delta_n|| <= K2/(n+2)^2`
    pub k2: f64,
}

/// Anchored iteration around a quarter rotation in the plane:
/// `u = 0`, `x0 = (1, 0)`, anchored step sizes, Gaussian-decay noise on `T`.
pub fn rotation_halpern(k1: f64) -> DeskCase {
    let xi = if k1 == 0.0 { NoiseModel::Zero } else { NoiseModel::GaussianDecay { k1 } };
    let config = make_halpern(
        NonexpansiveOp::Rotation { angle: std::f64::consts::FRAC_PI_2, plane: (0, 1) },
        Point::zero(2),
        Point::new(vec![1.0, 0.0]).unwrap(),
        Schedule::HalpernTwo,
        xi,
        NormKind::Euclidean,
    );
    let k_point = 1.0; // ||x0 - 0|| = 1, ||u - 0|| = 0
    let e_sum = config.xi.sum_bound();
    DeskCase {
        name: "rotation_halpern",
        config,
        k_point,
        hyp: hyp_from_fixed_point(k_point, e_sum, 0.0),
        k1,
        k2: 0.0,
    }
}

/// Averaged iteration with Tikhonov factors around the projection onto the
/// unit ball: `x0 = (2, 0)`, `beta = 1/2`, Gaussian-decay noise on `U`.
pub fn projection_kmt(k2: f64) -> DeskCase {
    let delta = if k2 == 0.0 { NoiseModel::Zero } else { NoiseModel::GaussianDecay { k1: k2 } };
    let config = make_km_tikhonov(
        NonexpansiveOp::BallProjection { center: Point::zero(2), radius: 1.0 },
        Schedule::HalpernTwo,
        Point::new(vec![2.0, 0.0]).unwrap(),
        Schedule::Constant(0.5),
        delta,
        NormKind::Euclidean,
    );
    let k_point = 2.0; // ||x0 - 0|| = 2, anchor is the origin
    let d_sum = config.delta.sum_bound();
    DeskCase {
        name: "projection_kmt",
        config,
        k_point,
        hyp: hyp_from_fixed_point(k_point, 0.0, d_sum),
        k1: 0.0,
        k2,
    }
}

/// Full two-operator scheme: projections onto two intersecting halfspaces
/// (`x <= 0` and `y <= 0`), common fixed point at the origin, Euclidean norm,
/// anchored step sizes with `beta = 1/2`, mild Gaussian-decay noise on both
/// operators so the almost-sure claims have content.
pub fn two_halfspaces(k1: f64, k2: f64) -> DeskCase {
    let xi = if k1 == 0.0 { NoiseModel::Zero } else { NoiseModel::GaussianDecay { k1 } };
    let delta = if k2 == 0.0 { NoiseModel::Zero } else { NoiseModel::GaussianDecay { k1: k2 } };
    let x0 = Point::new(vec![1.0, 1.0]).unwrap();
    let config = SchemeConfig {
        t: NonexpansiveOp::HalfspaceProjection { normal: Point::basis(2, 0), offset: 0.0 },
        u_op: NonexpansiveOp::HalfspaceProjection { normal: Point::basis(2, 1), offset: 0.0 },
        anchor: Point::zero(2),
        x0,
        alpha: Schedule::HalpernTwo,
        beta: Schedule::Constant(0.5),
        xi,
        delta,
        norm: NormKind::Euclidean,
        fixed_point: Some(Point::zero(2)),
    };
    let k_point = std::f64::consts::SQRT_2; // ||(1,1)||
    DeskCase {
        name: "two_halfspaces",
        config: config.clone(),
        k_point,
        hyp: hyp_from_fixed_point(k_point, config.xi.sum_bound(), config.delta.sum_bound()),
        k1,
        k2,
    }
}

/// Everything-is-identity smoke case: all recorded quantities vanish.
pub fn identity_smoke() -> DeskCase {
    let zero = Point::zero(2);
    let config = make_halpern(
        NonexpansiveOp::Identity,
        zero.clone(),
        zero,
        Schedule::HalpernTwo,
        NoiseModel::Zero,
        NormKind::Euclidean,
    );
    DeskCase {
        name: "identity_smoke",
        config,
        k_point: 0.0,
        hyp: hyp_from_fixed_point(0.0, 0.0, 0.0),
        k1: 0.0,
        k2: 0.0,
    }
}

/// The three verification-bearing cases at their standard parameters.
pub fn standard_suite() -> Vec<DeskCase> {
    vec![rotation_halpern(1.0), projection_kmt(1.0), two_halfspaces(0.5, 0.5)]
}

/// Two-state deterministic-cycle benchmark process (gain 1).
pub fn q_cycle() -> (Mdp, FSpec) {
    (cycle_mdp(), FSpec::PinnedEntry { state: 0, action: 0 })
}

/// Random 4-state / 2-action process with strictly positive kernel (hence
/// unichain) and rewards in `[0, 1/2]`, generated reproducibly from `seed`.
pub fn q_random4(seed: u64) -> (Mdp, FSpec) {
    let n_states = 4;
    let n_actions = 2;
    let mut rng = PathRng::seed_from_u64(seed);
    let mut rewards = Vec::with_capacity(n_states * n_actions);
    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        rewards.push(rng.uniform_in(0.0, 0.5));
        // near-deterministic row: bulk mass on one state, positive floor on all
        let main = rng.index(n_states);
        let floor = 0.04;
        let mut row = vec![floor; n_states];
        row[main] += 1.0 - floor * n_states as f64;
        transitions.extend_from_slice(&row);
    }
    (
        Mdp::new(n_states, n_actions, rewards, transitions).expect("generated tables are valid"),
        FSpec::PinnedEntry { state: 0, action: 0 },
    )
}

/// Bellman operator of the cycle process as a scheme operator, with the
/// relative-value anchor, for the cross-module equivalence checks.
pub fn q_cycle_operator() -> NonexpansiveOp {
    let (mdp, f) = q_cycle();
    NonexpansiveOp::BellmanRvi { mdp: Arc::new(mdp), anchor: Some(f) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use halpern_core::scheme::SchemeKind;

    #[test]
    fn desk_cases_validate() {
        for case in standard_suite().into_iter().chain([identity_smoke()]) {
            case.config.validate().unwrap_or_else(|e| panic!("{}: {e}", case.name));
        }
    }

    #[test]
    fn desk_case_kinds() {
        assert_eq!(rotation_halpern(1.0).config.kind(), SchemeKind::Halpern);
        assert_eq!(projection_kmt(1.0).config.kind(), SchemeKind::KmTikhonov);
        assert_eq!(two_halfspaces(0.5, 0.5).config.kind(), SchemeKind::General);
    }

    #[test]
    fn hyp_constants_match_fixed_point_route() {
        let c = rotation_halpern(1.0);
        assert_eq!(c.hyp.k0, 6.0); // 4*1 + 2*1
        let p = projection_kmt(1.0);
        assert_eq!(p.hyp.k0, 10.0); // 4*2 + 2*1
    }

    #[test]
    fn random_mdp_is_reproducible_and_positive() {
        let (a, _) = q_random4(2024);
        let (b, _) = q_random4(2024);
        assert_eq!(a, b);
        assert!(a.has_positive_kernel());
        let (c, _) = q_random4(2025);
        assert_ne!(a, c);
    }
}
