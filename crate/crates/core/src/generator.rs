//! Seeded test-case generator.
//!
//! Demand nodes are scattered uniformly over an `ax × ay` km region and every
//! demand node doubles as a candidate y- and z-site. A site within covering
//! range of a node covers it with probability `U[0.9, 1.0]`; the stored
//! nominal miss probability is the complement. Out-of-range pairs get miss
//! probability 1 and no deviation.
//!
//! Draw order (ChaCha8 seeded with `seed_from_u64(seed)`):
//! demand positions, extra y-site positions, extra z-site positions, y costs,
//! z costs, then for every `(i, j)` two uniforms (coverage, deviation), then
//! the same for every `(i, k)`. Both uniforms are drawn for out-of-range pairs
//! too, so changing a covering range never shifts the rest of the stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Coords, Instance, INSTANCE_FORMAT, MIN_MISS_PROB};

pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    /// Covering range of y-facilities (km).
    pub yr: f64,
    /// Covering range of z-facilities (km).
    pub zr: f64,
    pub ax: f64,
    pub ay: f64,
    pub cost_range: [f64; 2],
    pub cover_prob_range: [f64; 2],
    pub dev_range: [f64; 2],
    pub seed: u64,
    #[serde(default = "default_rng")]
    pub rng: String,
}

fn default_rng() -> String {
    RNG_NAME.to_string()
}

impl GeneratorConfig {
    pub fn new(m: usize, n1: usize, n2: usize, yr: f64, zr: f64, ax: f64, ay: f64, seed: u64) -> Self {
        GeneratorConfig {
            m,
            n1,
            n2,
            yr,
            zr,
            ax,
            ay,
            cost_range: [0.0, 100.0],
            cover_prob_range: [0.9, 1.0],
            dev_range: [0.0, 0.1],
            seed,
            rng: default_rng(),
        }
    }

    /// Configuration of a Table I row (`P1`..`P10`) with the given seed.
    pub fn table1(row: &str, seed: u64) -> Result<Self> {
        let (size, yr, zr, a) = match row {
            "P1" => (20, 10.0, 5.0, 25.0),
            "P2" => (25, 10.0, 5.0, 25.0),
            "P3" => (30, 10.0, 5.0, 25.0),
            "P4" => (40, 14.0, 7.0, 50.0),
            "P5" => (50, 14.0, 7.0, 50.0),
            "P6" => (60, 14.0, 7.0, 50.0),
            "P7" => (80, 20.0, 10.0, 100.0),
            "P8" => (100, 20.0, 10.0, 100.0),
            "P9" => (120, 20.0, 10.0, 100.0),
            "P10" => (140, 20.0, 10.0, 100.0),
            other => return Err(Error::UnknownRow(other.to_string())),
        };
        Ok(Self::new(size, size, size, yr, zr, a, a, seed))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("yr", self.yr), ("zr", self.zr), ("ax", self.ax), ("ay", self.ay)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        let [c0, c1] = self.cost_range;
        if !(0.0 <= c0 && c0 <= c1 && c1.is_finite()) {
            return Err(Error::Config(format!("bad cost range {:?}", self.cost_range)));
        }
        for (name, [lo, hi]) in [("cover_prob_range", self.cover_prob_range), ("dev_range", self.dev_range)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::Config(format!("{name} = [{lo}, {hi}] not within [0,1]")));
            }
        }
        if self.rng != RNG_NAME {
            return Err(Error::Config(format!("unsupported rng `{}`", self.rng)));
        }
        Ok(())
    }
}

/// Table I row names in order.
pub const TABLE1_ROWS: [&str; 10] = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "P10"];

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Nominal miss probability and deviation of one node/site pair.
fn pair_entry(distance: f64, range: f64, cover: f64, deviation: f64) -> (f64, f64) {
    if distance <= range {
        let miss = (1.0 - cover).max(MIN_MISS_PROB);
        (miss, deviation.min(1.0 - miss))
    } else {
        (1.0, 0.0)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut point = |rng: &mut ChaCha8Rng| [config.ax * rng.gen::<f64>(), config.ay * rng.gen::<f64>()];

    let demand: Vec<[f64; 2]> = (0..config.m).map(|_| point(&mut rng)).collect();
    let sites = |n: usize, rng: &mut ChaCha8Rng, point: &mut dyn FnMut(&mut ChaCha8Rng) -> [f64; 2]| {
        (0..n)
            .map(|j| if j < demand.len() { demand[j] } else { point(rng) })
            .collect::<Vec<_>>()
    };
    let ys = sites(config.n1, &mut rng, &mut point);
    let zs = sites(config.n2, &mut rng, &mut point);

    let cost_y: Vec<f64> = (0..config.n1).map(|_| uniform(&mut rng, config.cost_range)).collect();
    let cost_z: Vec<f64> = (0..config.n2).map(|_| uniform(&mut rng, config.cost_range)).collect();

    let mut probs = |sites: &[[f64; 2]], range: f64| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut nom = vec![vec![1.0; sites.len()]; demand.len()];
        let mut dev = vec![vec![0.0; sites.len()]; demand.len()];
        for (i, &d) in demand.iter().enumerate() {
            for (j, &s) in sites.iter().enumerate() {
                let cover = uniform(&mut rng, config.cover_prob_range);
                let deviation = uniform(&mut rng, config.dev_range);
                (nom[i][j], dev[i][j]) = pair_entry(dist(d, s), range, cover, deviation);
            }
        }
        (nom, dev)
    };
    let (p_nom, p_dev) = probs(&ys, config.yr);
    let (q_nom, q_dev) = probs(&zs, config.zr);

    Ok(Instance {
        format: INSTANCE_FORMAT,
        m: config.m,
        n1: config.n1,
        n2: config.n2,
        cost_y,
        cost_z,
        p_nom,
        p_dev,
        q_nom,
        q_dev,
        coords: Some(Coords { demand, y: ys, z: zs }),
        seed: Some(config.seed),
        generator_config: Some(config.clone()),
    })
}

/// A generated instance together with its family/replicate name.
#[derive(Debug, Clone)]
pub struct NamedInstance {
    /// e.g. `P3.2`
    pub id: String,
    pub family: String,
    /// 1-based replicate number.
    pub replicate: usize,
    pub instance: Instance,
}

/// Generates `replicate_count` instances of a Table I row. Replicate `r`
/// (0-based) uses seed `base_seed + r` and is named `<row>.<r+1>`.
pub fn generate_suite(row: &str, replicate_count: usize, base_seed: u64) -> Result<Vec<NamedInstance>> {
    GeneratorConfig::table1(row, base_seed)?;
    (0..replicate_count)
        .map(|r| {
            let cfg = GeneratorConfig::table1(row, base_seed.wrapping_add(r as u64))?;
            Ok(NamedInstance {
                id: format!("{row}.{}", r + 1),
                family: row.to_string(),
                replicate: r + 1,
                instance: generate(&cfg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_dimensions() {
        let inst = generate(&GeneratorConfig::table1("P1", 7).unwrap()).unwrap();
        assert_eq!((inst.m, inst.n1, inst.n2), (20, 20, 20));
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = GeneratorConfig::table1("P2", 99).unwrap();
        let a = generate(&cfg).unwrap().to_json().unwrap();
        let b = generate(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_pair_is_certain_miss() {
        assert_eq!(pair_entry(11.0, 10.0, 0.95, 0.07), (1.0, 0.0));
        let (nom, dev) = pair_entry(10.0, 10.0, 0.95, 0.07);
        assert!((nom - 0.05).abs() < 1e-15 && dev == 0.07);
        assert_eq!(pair_entry(0.0, 10.0, 1.0, 0.05).0, MIN_MISS_PROB);
        // truncation keeps the interval inside [0, 1]
        assert_eq!(pair_entry(0.0, 1.0, 0.5, 0.9), (0.5, 0.5));
    }

    #[test]
    fn explicit_distance_rule() {
        // force positions: region so narrow that all nodes sit on a line,
        // then check every pair against the rule directly
        let cfg = GeneratorConfig::new(12, 12, 12, 10.0, 5.0, 40.0, 1e-9, 11);
        let inst = generate(&cfg).unwrap();
        let c = inst.coords.as_ref().unwrap();
        let mut saw_far = false;
        for i in 0..12 {
            for j in 0..12 {
                let d = dist(c.demand[i], c.y[j]);
                if d > 10.0 {
                    saw_far |= d >= 11.0;
                    assert_eq!((inst.p_nom[i][j], inst.p_dev[i][j]), (1.0, 0.0));
                } else {
                    assert!(inst.p_nom[i][j] <= 0.1);
                    assert!(inst.p_nom[i][j] + inst.p_dev[i][j] <= 1.0);
                }
                if dist(c.demand[i], c.z[j]) > 5.0 {
                    assert_eq!((inst.q_nom[i][j], inst.q_dev[i][j]), (1.0, 0.0));
                }
            }
        }
        assert!(saw_far);
    }

    #[test]
    fn suite_naming_and_seeds() {
        let suite = generate_suite("P1", 5, 42).unwrap();
        let ids: Vec<_> = suite.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["P1.1", "P1.2", "P1.3", "P1.4", "P1.5"]);
        assert_eq!(suite[3].instance.seed, Some(45));
        let p10 = generate_suite("P10", 1, 0).unwrap();
        assert_eq!(p10[0].instance.m, 140);
        assert!(matches!(generate_suite("P11", 5, 0), Err(Error::UnknownRow(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = GeneratorConfig::table1("P1", 0).unwrap();
        cfg.yr = 0.0;
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let mut cfg = GeneratorConfig::table1("P1", 0).unwrap();
        cfg.dev_range = [0.0, 1.5];
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn extra_sites_get_fresh_positions() {
        let cfg = GeneratorConfig::new(3, 5, 2, 10.0, 5.0, 25.0, 25.0, 1);
        let inst = generate(&cfg).unwrap();
        assert!(inst.validate().is_empty());
        let c = inst.coords.unwrap();
        assert_eq!(c.y.len(), 5);
        assert_eq!(c.y[2], c.demand[2]);
        assert_eq!(c.z.len(), 2);
    }
}
