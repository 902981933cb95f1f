use std::f64::consts::PI;

use mdr_indent::kinematics::{format_dh_table, forward_kinematics, parse_dh_table, DHChain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M4 = [[f64; 4]; 4];

fn dh(a: f64, alpha: f64, d: f64, theta: f64) -> M4 {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    [
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn mul(x: &M4, y: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

const UR3E: [(f64, f64, f64); 6] = [
    (0.0, PI / 2.0, 0.15185),
    (-0.24355, 0.0, 0.0),
    (-0.2132, 0.0, 0.0),
    (0.0, PI / 2.0, 0.13105),
    (0.0, -PI / 2.0, 0.08535),
    (0.0, 0.0, 0.0921),
];

#[test]
fn ur3e_matches_plain_matrix_products_at_random_angles() {
    let chain = DHChain::ur3e();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let q: Vec<f64> = (0..6).map(|_| rng.random_range(-PI..PI)).collect();
        let oracle = UR3E
            .iter()
            .zip(&q)
            .fold(dh(0.0, 0.0, 0.0, 0.0), |t, (&(a, alpha, d), &th)| {
                mul(&t, &dh(a, alpha, d, th))
            });
        let h = forward_kinematics(&chain, &q).unwrap().to_homogeneous();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (h[(i, j)] - oracle[i][j]).abs() < 1e-12,
                    "({i},{j}) at {q:?}"
                );
            }
        }
    }
}

#[test]
fn ur3e_home_position() {
    let chain = DHChain::ur3e();
    let p = forward_kinematics(&chain, &chain.home()).unwrap().position;
    assert!((p.x + 0.45675).abs() < 1e-12);
    assert!((p.y + 0.22315).abs() < 1e-12);
    assert!((p.z - 0.0665).abs() < 1e-12);
}

#[test]
fn table_text_round_trips() {
    let chain = DHChain::ur3e();
    let again = parse_dh_table(&format_dh_table(&chain)).unwrap();
    assert_eq!(again, chain);
}

#[test]
fn long_chains_stay_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let text: String = (0..100)
        .map(|_| {
            format!(
                "{} {} {} 0\n",
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
                rng.random_range(-1.0..1.0)
            )
        })
        .collect();
    let chain = parse_dh_table(&text).unwrap();
    let q: Vec<f64> = (0..100).map(|_| rng.random_range(-PI..PI)).collect();
    let pose = forward_kinematics(&chain, &q).unwrap();
    assert!(pose.orthonormality_error() < 1e-7);
}
