//! Independent reference implementations for integration tests.
//!
//! Nothing here calls into the library's estimators or diagnostics: pools are
//! built through the public constructors, and every expectation is computed
//! by brute-force enumeration of the draw space.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sis_monitor::pool::AttrValue;
use sis_monitor::{Instance, Pool, Scalar, Stratification};

pub const FLOOR: f64 = 1e-6;

/// The six-instance reference pool: stratum A = ids 1..=4, B = ids 5, 6;
/// defects are ids 1 and 5.
pub fn t1(with_labels: bool) -> Pool {
    let rows = [
        (1, 0.9, true, "A"),
        (2, 0.1, false, "A"),
        (3, 0.2, false, "A"),
        (4, 0.2, false, "A"),
        (5, 0.8, true, "B"),
        (6, 0.4, false, "B"),
    ];
    let instances = rows
        .iter()
        .map(|&(id, s, defect, stratum)| {
            let inst = Instance::new(id, s, 1).with_attr("stratum", AttrValue::Cat(stratum.into()));
            if with_labels {
                inst.with_true_label(if defect { 0 } else { 1 })
            } else {
                inst
            }
        })
        .collect();
    Pool::new(instances).unwrap()
}

pub fn t1_strata() -> Stratification {
    Stratification::from_assignment(vec![0, 0, 0, 0, 1, 1], vec!["A".into(), "B".into()]).unwrap()
}

/// Random labelled pool with scores on the grid `k/20`, `k in 1..=19`, and a
/// random partition into exactly `strata` non-empty strata.
pub fn random_pool(rng: &mut ChaCha8Rng, size: usize, strata: usize) -> (Pool, Stratification) {
    assert!(strata >= 1 && strata <= size);
    let mut assignment: Vec<usize> = (0..size).map(|i| if i < strata { i } else { rng.gen_range(0..strata) }).collect();
    // Shuffle so the forced members are not always first.
    for i in (1..size).rev() {
        let j = rng.gen_range(0..=i);
        assignment.swap(i, j);
    }
    let instances = (0..size)
        .map(|i| {
            let score = rng.gen_range(1..20) as f64 / 20.0;
            let pred = i64::from(score >= 0.5);
            let defect = rng.gen_bool(0.35);
            Instance::new(i as u64 + 100, score, pred)
                .with_true_label(if defect { 1 - pred } else { pred })
                .with_attr("group", AttrValue::Num(assignment[i] as f64 + 1.0))
        })
        .collect();
    let labels = (0..strata).map(|j| format!("g{}", j + 1)).collect();
    (Pool::new(instances).unwrap(), Stratification::from_assignment(assignment, labels).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn defects(pool: &Pool) -> Vec<bool> {
    pool.instances()
        .iter()
        .map(|i| i.true_label.expect("labelled") != i.pred_label)
        .collect()
}

pub fn true_rate<T: Scalar>(pool: &Pool) -> T {
    let z = defects(pool);
    T::from_count(z.iter().filter(|&&d| d).count()) / T::from_count(z.len())
}

/// Unnormalised proposal mass `max(s, floor)^alpha` for the raw-score family.
pub fn raw_mass<T: Scalar>(score: f64, alpha: f64) -> T {
    if alpha == 0.0 {
        return T::one();
    }
    T::from_real(score.max(FLOOR)).pow_real(alpha)
}

/// Largest-remainder proportional allocation with at least one draw per
/// stratum, in exact integer arithmetic.
pub fn proportional_allocation(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| n * s / total).collect();
    let mut rema: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(j, &s)| (n * s % total, j)).collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let left = n - alloc.iter().sum::<usize>();
    for &(_, j) in rema.iter().take(left) {
        alloc[j] += 1;
    }
    while let Some(j) = alloc.iter().position(|&a| a == 0) {
        let donor = (0..alloc.len()).fold(0, |best, k| if alloc[k] > alloc[best] { k } else { best });
        alloc[donor] -= 1;
        alloc[j] = 1;
    }
    alloc
}

/// One draw slot: a categorical distribution over additive contributions to
/// the estimator.
type Slot<T> = Vec<(T, T)>;

#[derive(Debug, Clone, Copy)]
pub struct Moments<T> {
    pub mean: T,
    pub var: T,
}

/// Mean and variance of `Σ_slots contribution` by walking the full Cartesian
/// product of slot outcomes.
fn enumerate<T: Scalar>(slots: &[Slot<T>]) -> Moments<T> {
    fn walk<T: Scalar>(slots: &[Slot<T>], prob: T, acc: T, out: &mut Vec<(T, T)>) {
        match slots.split_first() {
            None => out.push((prob, acc)),
            Some((first, rest)) => {
                for &(p, c) in first {
                    walk(rest, prob * p, acc + c, out);
                }
            }
        }
    }
    let mut outcomes = Vec::new();
    walk(slots, T::one(), T::zero(), &mut outcomes);
    let mean = outcomes.iter().fold(T::zero(), |s, &(p, v)| s + p * v);
    let var = outcomes.iter().fold(T::zero(), |s, &(p, v)| s + p * (v - mean) * (v - mean));
    Moments { mean, var }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Rs,
    Srs,
    Is,
    Sis,
}

pub const DESIGNS: [Design; 4] = [Design::Rs, Design::Srs, Design::Is, Design::Sis];

/// Per-position weights the design attaches to a draw.
pub fn oracle_weights<T: Scalar>(design: Design, pool: &Pool, strata: &[usize], alpha: f64) -> Vec<T> {
    let n_pool = pool.len();
    let g: Vec<T> = pool.instances().iter().map(|i| raw_mass(i.score, alpha)).collect();
    match design {
        Design::Rs | Design::Srs => vec![T::one(); n_pool],
        Design::Is => {
            let total = g.iter().fold(T::zero(), |s, &x| s + x);
            g.iter().map(|&gi| total / (T::from_count(n_pool) * gi)).collect()
        }
        Design::Sis => {
            let p = strata.iter().max().unwrap() + 1;
            let mut mass = vec![T::zero(); p];
            let mut count = vec![0usize; p];
            for (i, &j) in strata.iter().enumerate() {
                mass[j] = mass[j] + g[i];
                count[j] += 1;
            }
            strata
                .iter()
                .enumerate()
                .map(|(i, &j)| mass[j] / (T::from_count(count[j]) * g[i]))
                .collect()
        }
    }
}

/// Exact mean and variance of a design's estimator at budget `n`.
pub fn oracle_moments<T: Scalar>(design: Design, pool: &Pool, strata: &[usize], alpha: f64, n: usize) -> Moments<T> {
    let z = defects(pool);
    let n_pool = pool.len();
    let g: Vec<T> = pool.instances().iter().map(|i| raw_mass(i.score, alpha)).collect();
    let w = oracle_weights::<T>(design, pool, strata, alpha);
    let zt = |i: usize| if z[i] { T::one() } else { T::zero() };

    let slots: Vec<Slot<T>> = match design {
        Design::Rs | Design::Is => {
            let probs: Vec<T> = if design == Design::Rs {
                vec![T::one() / T::from_count(n_pool); n_pool]
            } else {
                let total = g.iter().fold(T::zero(), |s, &x| s + x);
                g.iter().map(|&gi| gi / total).collect()
            };
            let slot: Slot<T> = (0..n_pool).map(|i| (probs[i], zt(i) * w[i] / T::from_count(n))).collect();
            vec![slot; n]
        }
        Design::Srs | Design::Sis => {
            let p = strata.iter().max().unwrap() + 1;
            let sizes: Vec<usize> = (0..p).map(|j| strata.iter().filter(|&&s| s == j).count()).collect();
            let alloc = proportional_allocation(&sizes, n);
            let mut slots = Vec::new();
            for j in 0..p {
                let members: Vec<usize> = (0..n_pool).filter(|&i| strata[i] == j).collect();
                let wj = T::from_count(sizes[j]) / T::from_count(n_pool);
                let probs: Vec<T> = if design == Design::Srs {
                    vec![T::one() / T::from_count(members.len()); members.len()]
                } else {
                    let total = members.iter().fold(T::zero(), |s, &i| s + g[i]);
                    members.iter().map(|&i| g[i] / total).collect()
                };
                let slot: Slot<T> = members
                    .iter()
                    .zip(&probs)
                    .map(|(&i, &q)| (q, wj * zt(i) * w[i] / T::from_count(alloc[j])))
                    .collect();
                for _ in 0..alloc[j] {
                    slots.push(slot.clone());
                }
            }
            slots
        }
    };
    enumerate(&slots)
}
