#![allow(dead_code)]

use branchflow::rational::{int, mult};
use branchflow::{Boundary, Mult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn square() -> Boundary {
    Boundary::planar(&[(0.0, 0.0, int(-1)), (1.0, 1.0, int(-1)), (1.0, 0.0, int(1)), (0.0, 1.0, int(1))]).unwrap()
}

/// One source of mass 2 at the origin, unit sinks at `(1, ±h)`.
pub fn symmetric_y(h: f64) -> Boundary {
    Boundary::planar(&[(0.0, 0.0, int(-2)), (1.0, h, int(1)), (1.0, -h, int(1))]).unwrap()
}

fn random_mass(r: &mut ChaCha8Rng) -> Mult {
    let d = r.gen_range(1..=3);
    let n = loop {
        let n = r.gen_range(-4..=4);
        if n != 0 {
            break n;
        }
    };
    mult(n, d)
}

/// Balanced planar boundary with `n` atoms in the unit square and small
/// rational masses.
pub fn random_boundary(r: &mut ChaCha8Rng, n: usize) -> Boundary {
    loop {
        let mut atoms: Vec<(f64, f64, Mult)> =
            (0..n - 1).map(|_| (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), random_mass(r))).collect();
        let total: Mult = atoms.iter().map(|a| a.2).sum();
        if total == int(0) {
            continue;
        }
        atoms.push((r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), -total));
        if let Ok(b) = Boundary::planar(&atoms) {
            if b.len() == n {
                return b;
            }
        }
    }
}

/// Unbalanced boundary, for flat-norm checks.
pub fn random_signed(r: &mut ChaCha8Rng, n: usize, spread: f64) -> Boundary {
    loop {
        let atoms: Vec<(f64, f64, Mult)> = (0..n)
            .map(|_| (r.gen_range(0.0..spread), r.gen_range(0.0..spread), random_mass(r)))
            .collect();
        if let Ok(b) = Boundary::planar(&atoms) {
            return b;
        }
    }
}

/// Named instances with the exponent they are solved at.
pub fn corpus() -> Vec<(String, Boundary, f64)> {
    let mut out = vec![
        ("dipole".to_string(), Boundary::planar(&[(0.0, 0.0, int(-1)), (2.0, 1.0, int(1))]).unwrap(), 0.5),
        ("square".into(), square(), 0.95),
        ("square-half".into(), square(), 0.5),
        ("y-0.6".into(), symmetric_y(1.5), 0.6),
        ("y-0.9".into(), symmetric_y(1.5), 0.9),
        (
            "v-collapse".into(),
            Boundary::planar(&[(0.0, 0.0, int(-2)), (1.0, 0.3, int(1)), (1.0, -0.3, int(1))]).unwrap(),
            0.95,
        ),
        (
            "two-sources".into(),
            Boundary::planar(&[(0.0, 0.0, int(-1)), (0.0, 1.0, int(-1)), (3.0, 0.5, int(2))]).unwrap(),
            0.5,
        ),
        (
            "local4".into(),
            Boundary::planar(&[(-4.0, 0.0, int(-1)), (-1.0, 0.05, mult(1, 6)), (1.0, -0.05, mult(-1, 6)), (4.0, 0.0, int(1))])
                .unwrap(),
            0.5,
        ),
        (
            "pentagon".into(),
            Boundary::planar(&[
                (0.0, 0.0, int(-3)),
                (1.0, 0.2, int(1)),
                (0.8, 1.0, int(1)),
                (-0.3, 0.9, mult(1, 2)),
                (-0.9, 0.1, mult(1, 2)),
            ])
            .unwrap(),
            0.7,
        ),
    ];
    let mut r = rng(2024);
    for i in 0..6 {
        let n = 3 + i % 3;
        let alpha = r.gen_range(0.3..1.0);
        out.push((format!("random-{i}"), random_boundary(&mut r, n), alpha));
    }
    out
}
