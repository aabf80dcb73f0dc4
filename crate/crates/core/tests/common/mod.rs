#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rck_core::generator::{generate, GeneratorConfig};
use rck_core::Instance;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small generated instance with `n1 + n2 <= 16` on a 10×10 area, dense
/// enough that most nodes see several sites.
pub fn small_instance(seed: u64) -> Instance {
    let mut r = rng(seed ^ 0x5eed);
    let m = r.gen_range(2..=8);
    let n1 = r.gen_range(2..=8);
    let n2 = r.gen_range(2..=16 - n1).min(8);
    let cfg = GeneratorConfig::new(m, n1, n2, 7.0, 5.0, 10.0, 10.0, seed);
    generate(&cfg).unwrap()
}

/// Random oracle row: nominal in `[1e-6, 1]` (some exactly 1), deviation
/// keeping `nom + dev <= 1`, and a random selection.
pub fn random_row(r: &mut ChaCha8Rng, len: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut nom = Vec::with_capacity(len);
    let mut dev = Vec::with_capacity(len);
    for _ in 0..len {
        let p: f64 = if r.gen_bool(0.15) { 1.0 } else { r.gen_range(1e-6..1.0) };
        nom.push(p);
        dev.push(if p == 1.0 { 0.0 } else { r.gen_range(0.0..=1.0 - p) });
    }
    let sel = (0..len).map(|_| r.gen_bool(0.6)).collect();
    (nom, dev, sel)
}

/// Worst-case product by enumerating every subset of at most `gamma`
/// selected entries; products taken in ascending index order.
pub fn enumerate_worst_case(nom: &[f64], dev: &[f64], sel: &[bool], gamma: usize) -> f64 {
    let idx: Vec<usize> = (0..nom.len()).filter(|&j| sel[j] && nom[j] < 1.0).collect();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << idx.len()) {
        if mask.count_ones() as usize > gamma {
            continue;
        }
        let mut v = 1.0;
        for (b, &j) in idx.iter().enumerate() {
            v *= if mask >> b & 1 == 1 { nom[j] + dev[j] } else { nom[j] };
        }
        best = best.max(v);
    }
    best
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= tol
}
