//! Denavit–Hartenberg forward kinematics (standard/distal convention).

use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

/// DH parameter table of the UR3e, one joint per line.
pub const UR3E_DH_TABLE: &str = include_str!("../data/ur3e.dh");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DHJoint {
    /// Link length (m).
    pub a: f64,
    /// Link twist (rad).
    pub alpha: f64,
    /// Link offset (m).
    pub d_offset: f64,
    /// Joint angle (rad); the home value for a revolute joint.
    pub theta: f64,
}

impl DHJoint {
    pub fn new(a: f64, alpha: f64, d_offset: f64, theta: f64) -> Result<Self> {
        if ![a, alpha, d_offset, theta].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "DH parameters must be finite, got a={a} alpha={alpha} d={d_offset} theta={theta}"
            )));
        }
        Ok(Self {
            a,
            alpha,
            d_offset,
            theta,
        })
    }

    /// Same joint rotated to angle `theta`.
    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }
}

/// Rigid transform `[R p; 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            position: Vector3::zeros(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            position: self.rotation * other.position + self.position,
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Height of the frame origin, the `z_EE` consumed by the estimator.
    pub fn z(&self) -> f64 {
        self.position[2]
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

/// `Rot_z(θ) · Trans_z(d) · Trans_x(a) · Rot_x(α)`.
pub fn joint_transform(joint: &DHJoint) -> Pose {
    let (st, ct) = joint.theta.sin_cos();
    let (sa, ca) = joint.alpha.sin_cos();
    #[rustfmt::skip]
    let rotation = Matrix3::new(
        ct, -st * ca,  st * sa,
        st,  ct * ca, -ct * sa,
        0.0,      sa,       ca,
    );
    Pose {
        rotation,
        position: Vector3::new(joint.a * ct, joint.a * st, joint.d_offset),
    }
}

/// Serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct DHChain {
    joints: Vec<DHJoint>,
}

impl DHChain {
    pub fn new(joints: Vec<DHJoint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("a DH chain needs at least one joint"));
        }
        Ok(Self { joints })
    }

    pub fn ur3e() -> Self {
        parse_dh_table(UR3E_DH_TABLE).expect("bundled UR3e table is valid")
    }

    pub fn joints(&self) -> &[DHJoint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Home configuration: the `theta` column of the table.
    pub fn home(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.theta).collect()
    }

    /// Splits into two chains at `at` (the first keeps joints `0..at`).
    pub fn split_at(&self, at: usize) -> Result<(DHChain, DHChain)> {
        if at == 0 || at >= self.joints.len() {
            return Err(Error::invalid(format!(
                "split index {at} must lie strictly inside a chain of {} joints",
                self.joints.len()
            )));
        }
        let (head, tail) = self.joints.split_at(at);
        Ok((DHChain::new(head.to_vec())?, DHChain::new(tail.to_vec())?))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_dh_table(&text).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::format(path, msg),
            other => other,
        })
    }
}

/// End-effector pose `T₁ T₂ ⋯ T_m` with joint angles `q`.
pub fn forward_kinematics(chain: &DHChain, q: &[f64]) -> Result<Pose> {
    if q.len() != chain.len() {
        return Err(Error::invalid(format!(
            "expected {} joint angles, got {}",
            chain.len(),
            q.len()
        )));
    }
    Ok(chain
        .joints
        .iter()
        .zip(q)
        .fold(Pose::identity(), |pose, (joint, &theta)| {
            pose.compose(&joint_transform(&joint.with_theta(theta)))
        }))
}

/// Parses `a alpha d theta0` rows; `#` starts a comment.
pub fn parse_dh_table(text: &str) -> Result<DHChain> {
    let mut joints = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::invalid(format!(
                "line {}: expected 4 columns `a alpha d theta0`, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0; 4];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                Error::invalid(format!("line {}: `{field}` is not a number", lineno + 1))
            })?;
        }
        joints.push(DHJoint::new(vals[0], vals[1], vals[2], vals[3])?);
    }
    DHChain::new(joints)
}

/// Renders a chain in the table format accepted by [`parse_dh_table`].
pub fn format_dh_table(chain: &DHChain) -> String {
    let mut out = String::from("# a alpha d theta0\n");
    for j in &chain.joints {
        out.push_str(&format!(
            "{:e} {:e} {:e} {:e}\n",
            j.a, j.alpha, j.d_offset, j.theta
        ));
    }
    out
}
