#![allow(dead_code)]

use fiblab_core::polymap::{MapDocument, TermDocument};
use fiblab_core::sampling::{self, stream_rng};
use fiblab_core::{Map, Vector};
use rand::Rng;

pub const RANDOM_MAPS: u64 = 100;

/// Random polynomial map with `2 ≤ p ≤ min(3, n)`, `n ≤ 6`, degree ≤ 4 and
/// no constant terms.
pub fn random_map<R: Rng>(rng: &mut R) -> Map {
    let n = rng.random_range(2..=6usize);
    let p = rng.random_range(2..=n.min(3));
    let components = (0..p)
        .map(|_| {
            let terms = rng.random_range(1..=4usize);
            (0..terms)
                .map(|_| {
                    let degree = rng.random_range(1..=4u32);
                    let mut e = vec![0u32; n];
                    for _ in 0..degree {
                        e[rng.random_range(0..n)] += 1;
                    }
                    let c =
                        rng.random_range(0.2..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                    TermDocument { c, e }
                })
                .collect()
        })
        .collect();
    let doc = MapDocument {
        n,
        p,
        components,
        name: None,
        constant_zero: Vec::new(),
    };
    Map::from_document(&doc).expect("random map is valid")
}

/// Random `(map, point)` pair `index` with `‖f(x)‖ > min_f`.
pub fn random_pair(seed: u64, index: u64, min_f: f64) -> (Map, Vector) {
    let mut rng = stream_rng(seed, RANDOM_MAPS, index);
    loop {
        let map = random_map(&mut rng);
        for _ in 0..20 {
            let r = rng.random_range(0.2..1.5);
            let x = sampling::unit_direction(&mut rng, map.n()) * r;
            if map.eval(&x).unwrap().norm() > min_f {
                return (map, x);
            }
        }
    }
}

/// `𝔉(y) = ‖y‖ f(y)/‖f(y)‖` evaluated directly.
pub fn spherified(map: &Map, y: &Vector) -> Vector {
    let fy = map.eval(y).unwrap();
    fy.clone() * (y.norm() / fy.norm())
}

/// Richardson-extrapolated central differences of `𝔉` at `x` with base step `h`.
pub fn fd_spherified(map: &Map, x: &Vector, h: f64) -> fiblab_core::Matrix {
    let central = |step: f64| {
        let mut d = fiblab_core::Matrix::zeros(map.p(), map.n());
        for j in 0..map.n() {
            let mut e = Vector::zeros(map.n());
            e[j] = step;
            let col = (spherified(map, &(x + &e)) - spherified(map, &(x - &e))) / (2.0 * step);
            d.set_column(j, &col);
        }
        d
    };
    let coarse = central(h);
    let fine = central(h / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// Richardson-extrapolated central differences of `f` at `x`.
pub fn fd_jacobian(map: &Map, x: &Vector, h: f64) -> fiblab_core::Matrix {
    let central = |step: f64| {
        let mut d = fiblab_core::Matrix::zeros(map.p(), map.n());
        for j in 0..map.n() {
            let mut e = Vector::zeros(map.n());
            e[j] = step;
            let col = (map.eval(&(x + &e)).unwrap() - map.eval(&(x - &e)).unwrap()) / (2.0 * step);
            d.set_column(j, &col);
        }
        d
    };
    let coarse = central(h);
    let fine = central(h / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// Difference step resolving the length scale of `𝔉` near `x`.
pub fn fd_step(map: &Map, x: &Vector) -> f64 {
    let fx = map.eval(x).unwrap();
    let jac = map.jacobian(x).unwrap();
    let scale = x.norm().min(fx.norm() / jac.norm().max(1e-300));
    1e-3 * scale
}
