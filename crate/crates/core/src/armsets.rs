//! Decision sets with an argmax oracle `x*(θ)` and support value `J(θ) = max_x xᵀθ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{Vector, ARM_NORM_TOL};

/// Default step for [`grad_support_fd`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmSet {
    Finite {
        arms: Vec<Vector>,
    },
    UnitBall {
        dim: usize,
    },
    /// Vertices of `{−1/√d, +1/√d}^d`.
    ScaledHypercube {
        dim: usize,
    },
}

/// Result of an argmax query.
#[derive(Debug, Clone, PartialEq)]
pub struct BestArm {
    pub arm: Vector,
    /// Position in the arm list for finite sets.
    pub index: Option<usize>,
    pub value: f64,
}

/// Central finite-difference estimate of `∇J(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub grad: Vector,
    /// `θ` is within `10·h·‖θ‖` of a point where the argmax is not unique.
    pub tie: bool,
}

impl ArmSet {
    pub fn finite(arms: Vec<Vector>) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(invalid("finite arm set needs at least one arm"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(invalid("arms must have positive dimension"));
        }
        for (i, a) in arms.iter().enumerate() {
            if a.len() != dim {
                return Err(invalid(format!(
                    "arm {i} has dimension {}, expected {dim}",
                    a.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("arm {i} is not finite")));
            }
            if a.norm() > 1.0 + ARM_NORM_TOL {
                return Err(invalid(format!("arm {i} has norm {} > 1", a.norm())));
            }
        }
        Ok(ArmSet::Finite { arms })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(ArmSet::UnitBall { dim })
    }

    pub fn scaled_hypercube(dim: usize) -> Result<Self> {
        if dim == 0 || dim > 30 {
            return Err(invalid("hypercube dimension must be in 1..=30"));
        }
        Ok(ArmSet::ScaledHypercube { dim })
    }

    /// Reads one arm per line, whitespace-separated reals. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut arms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|tok| !tok.is_empty())
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| invalid(format!("line {}: cannot parse {tok:?}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            arms.push(Vector::from_vec(values));
        }
        Self::finite(arms)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn dim(&self) -> usize {
        match self {
            ArmSet::Finite { arms } => arms[0].len(),
            ArmSet::UnitBall { dim } | ArmSet::ScaledHypercube { dim } => *dim,
        }
    }

    /// The arm list of a finite set.
    pub fn arms(&self) -> Option<&[Vector]> {
        match self {
            ArmSet::Finite { arms } => Some(arms),
            _ => None,
        }
    }

    /// `x*(θ)` and `J(θ)`. Ties go to the lowest index (finite sets) or to
    /// the positive sign (hypercube); `θ = 0` on the ball yields `e₁`.
    pub fn best_arm(&self, theta: &Vector) -> Result<BestArm> {
        self.check_theta(theta)?;
        match self {
            ArmSet::Finite { arms } => {
                let mut best = 0;
                let mut best_value = arms[0].dot(theta);
                for (i, a) in arms.iter().enumerate().skip(1) {
                    let v = a.dot(theta);
                    if v > best_value {
                        best = i;
                        best_value = v;
                    }
                }
                Ok(BestArm {
                    arm: arms[best].clone(),
                    index: Some(best),
                    value: best_value,
                })
            }
            ArmSet::UnitBall { dim } => {
                let norm = theta.norm();
                let arm = if norm > 0.0 {
                    theta / norm
                } else {
                    let mut e1 = Vector::zeros(*dim);
                    e1[0] = 1.0;
                    e1
                };
                let value = arm.dot(theta);
                Ok(BestArm {
                    arm,
                    index: None,
                    value,
                })
            }
            ArmSet::ScaledHypercube { dim } => {
                let scale = 1.0 / (*dim as f64).sqrt();
                let arm = theta.map(|v| if v >= 0.0 { scale } else { -scale });
                let value = arm.dot(theta);
                Ok(BestArm {
                    arm,
                    index: None,
                    value,
                })
            }
        }
    }

    /// `J(θ)`.
    pub fn support_value(&self, theta: &Vector) -> Result<f64> {
        Ok(self.best_arm(theta)?.value)
    }

    /// Draws a point of the set uniformly (ball, finite list) or a uniform
    /// vertex (hypercube).
    pub fn sample_arm<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (Vector, Option<usize>) {
        match self {
            ArmSet::Finite { arms } => {
                let i = rng.random_range(0..arms.len());
                (arms[i].clone(), Some(i))
            }
            ArmSet::UnitBall { dim } => {
                let d = *dim;
                let dir = crate::samplers::unit_direction(d, rng);
                let radius = rng.random::<f64>().powf(1.0 / d as f64);
                (dir * radius, None)
            }
            ArmSet::ScaledHypercube { dim } => {
                let scale = 1.0 / (*dim as f64).sqrt();
                let v = Vector::from_fn(
                    *dim,
                    |_, _| if rng.random::<bool>() { scale } else { -scale },
                );
                (v, None)
            }
        }
    }

    fn check_theta(&self, theta: &Vector) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(invalid(format!(
                "parameter has dimension {}, arm set has {}",
                theta.len(),
                self.dim()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameter is not finite"));
        }
        Ok(())
    }

    /// Gap between the best and second-best achievable value at `θ`, for
    /// sets where the argmax can be non-unique.
    fn runner_up_gap(&self, theta: &Vector) -> f64 {
        match self {
            ArmSet::Finite { arms } => {
                let mut first = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                for a in arms {
                    let v = a.dot(theta);
                    if v > first {
                        second = first;
                        first = v;
                    } else if v > second {
                        second = v;
                    }
                }
                if second.is_finite() {
                    first - second
                } else {
                    f64::INFINITY
                }
            }
            ArmSet::UnitBall { .. } => {
                if theta.norm() > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            ArmSet::ScaledHypercube { dim } => {
                let scale = 1.0 / (*dim as f64).sqrt();
                theta
                    .iter()
                    .map(|v| 2.0 * v.abs() * scale)
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Central finite difference of `J` per coordinate.
pub fn grad_support_fd(set: &ArmSet, theta: &Vector, h: f64) -> Result<FdGradient> {
    if !(h > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let d = set.dim();
    let mut grad = Vector::zeros(d);
    let mut probe = theta.clone();
    for i in 0..d {
        probe[i] = theta[i] + h;
        let up = set.support_value(&probe)?;
        probe[i] = theta[i] - h;
        let down = set.support_value(&probe)?;
        probe[i] = theta[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    let tie = set.runner_up_gap(theta) <= 10.0 * h * theta.norm();
    Ok(FdGradient { grad, tie })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn two_arms() -> ArmSet {
        ArmSet::finite(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap()
    }

    #[test]
    fn unit_ball_projection() {
        let b = ArmSet::unit_ball(2)
            .unwrap()
            .best_arm(&v(&[3.0, 4.0]))
            .unwrap();
        assert_abs_diff_eq!(b.arm, v(&[0.6, 0.8]), epsilon = 1e-15);
        assert_abs_diff_eq!(b.value, 5.0, epsilon = 1e-14);
    }

    #[test]
    fn finite_two_arm_comparison() {
        let b = two_arms().best_arm(&v(&[0.2, 0.9])).unwrap();
        assert_eq!(b.arm, v(&[0.0, 1.0]));
        assert_eq!(b.index, Some(1));
        assert_eq!(b.value, 0.9);
    }

    #[test]
    fn hypercube_sign_rule_matches_vertex_scan() {
        let set = ArmSet::scaled_hypercube(2).unwrap();
        let theta = v(&[1.0, -2.0]);
        let b = set.best_arm(&theta).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(b.arm, v(&[s, -s]), epsilon = 1e-15);
        assert_abs_diff_eq!(b.value, 3.0 / 2f64.sqrt(), epsilon = 1e-15);
        let scan = [[s, s], [s, -s], [-s, s], [-s, -s]]
            .iter()
            .map(|a| v(a).dot(&theta))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(b.value, scan, epsilon = 1e-15);
    }

    #[test]
    fn hypercube_zero_coordinate_takes_positive_sign() {
        let set = ArmSet::scaled_hypercube(3).unwrap();
        let b = set.best_arm(&v(&[0.0, -1.0, 0.0])).unwrap();
        assert!(b.arm[0] > 0.0 && b.arm[1] < 0.0 && b.arm[2] > 0.0);
    }

    #[test]
    fn support_values() {
        let ball = ArmSet::unit_ball(2).unwrap();
        assert_eq!(ball.support_value(&v(&[0.0, 0.0])).unwrap(), 0.0);
        let ball3 = ArmSet::unit_ball(3).unwrap();
        assert_abs_diff_eq!(
            ball3.support_value(&v(&[1.0, 2.0, 2.0])).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        let set = ArmSet::finite(vec![v(&[0.5, 0.0]), v(&[-0.5, 0.0])]).unwrap();
        assert_eq!(set.support_value(&v(&[-2.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn zero_theta_on_ball_is_first_basis_vector() {
        let b = ArmSet::unit_ball(3)
            .unwrap()
            .best_arm(&Vector::zeros(3))
            .unwrap();
        assert_eq!(b.arm, v(&[1.0, 0.0, 0.0]));
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let b = two_arms().best_arm(&v(&[0.5, 0.5])).unwrap();
        assert_eq!(b.index, Some(0));
        let b = two_arms().best_arm(&Vector::zeros(2)).unwrap();
        assert_eq!(b.index, Some(0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            two_arms().best_arm(&Vector::zeros(3)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ArmSet::unit_ball(2)
                .unwrap()
                .support_value(&Vector::zeros(1)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn finite_construction_validates() {
        assert!(ArmSet::finite(vec![]).is_err());
        assert!(ArmSet::finite(vec![v(&[1.0, 0.1])]).is_err());
        assert!(ArmSet::finite(vec![v(&[1.0, 0.0]), v(&[1.0])]).is_err());
        assert!(ArmSet::finite(vec![v(&[f64::NAN, 0.0])]).is_err());
        assert!(ArmSet::finite(vec![v(&[1.0 + 1e-13, 0.0])]).is_ok());
    }

    #[test]
    fn parses_text_matrix() {
        let set = ArmSet::from_text("# arms\n1 0\n\n0.0   1.0\n-0.5 0.5\n").unwrap();
        assert_eq!(set.arms().unwrap().len(), 3);
        assert_eq!(set.dim(), 2);
        assert!(ArmSet::from_text("1 0\n0 x\n").is_err());
        let set = ArmSet::from_text("1, 0\n0,1\n").unwrap();
        assert_eq!(set.arms().unwrap().len(), 2);
        assert!(ArmSet::from_text("\n").is_err());
    }

    #[test]
    fn fd_gradient_on_ball() {
        let g = grad_support_fd(&ArmSet::unit_ball(2).unwrap(), &v(&[3.0, 4.0]), 1e-5).unwrap();
        assert!(!g.tie);
        assert!((g.grad[0] - 0.6).abs() <= 1e-6 && (g.grad[1] - 0.8).abs() <= 1e-6);
    }

    #[test]
    fn fd_gradient_locally_linear() {
        let g = grad_support_fd(&two_arms(), &v(&[0.2, 0.9]), 1e-5).unwrap();
        assert!(!g.tie);
        assert!((g.grad[0]).abs() <= 1e-9 && (g.grad[1] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn fd_gradient_flags_ties() {
        let g = grad_support_fd(&two_arms(), &v(&[0.5, 0.5]), 1e-5).unwrap();
        assert!(g.tie);
        assert!(grad_support_fd(&two_arms(), &v(&[0.5, 0.5]), 0.0).is_err());
    }

    fn random_sets(rng: &mut ChaCha8Rng) -> Vec<ArmSet> {
        let arms = (0..15)
            .map(|_| {
                let a = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let n = a.norm().max(1.0);
                a / n
            })
            .collect();
        vec![
            ArmSet::finite(arms).unwrap(),
            ArmSet::unit_ball(3).unwrap(),
            ArmSet::scaled_hypercube(3).unwrap(),
        ]
    }

    #[test]
    fn support_function_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for set in random_sets(&mut rng) {
            for _ in 0..1000 {
                let a = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                let b = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                let alpha: f64 = rng.random();
                let mid = set
                    .support_value(&(&a * alpha + &b * (1.0 - alpha)))
                    .unwrap();
                let chord = alpha * set.support_value(&a).unwrap()
                    + (1.0 - alpha) * set.support_value(&b).unwrap();
                assert!(mid <= chord + 1e-12, "{set:?}: {mid} > {chord}");
            }
        }
    }

    #[test]
    fn best_value_dominates_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for set in random_sets(&mut rng) {
            let theta = Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let best = set.best_arm(&theta).unwrap();
            assert_eq!(best.value, best.arm.dot(&theta));
            for _ in 0..100 {
                let (x, _) = set.sample_arm(&mut rng);
                assert!(x.dot(&theta) <= best.value + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn positively_homogeneous(
            t in prop::collection::vec(-5.0f64..5.0, 3),
            c in 0.0f64..20.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let theta = Vector::from_vec(t);
            for set in random_sets(&mut rng) {
                let lhs = set.support_value(&(&theta * c)).unwrap();
                let rhs = c * set.support_value(&theta).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + c.abs()) * (1.0 + theta.norm()));
            }
        }

        #[test]
        fn argmax_is_scale_invariant(
            t in prop::collection::vec(-5.0f64..5.0, 3),
            c in 1e-3f64..1e3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let theta = Vector::from_vec(t);
            let set = &random_sets(&mut rng)[0];
            let a = set.best_arm(&theta).unwrap();
            let b = set.best_arm(&(&theta * c)).unwrap();
            let gap = set.runner_up_gap(&theta);
            prop_assume!(gap > 1e-9 * theta.norm());
            prop_assert_eq!(a.index, b.index);
        }
    }
}
