//! Brute-force planning oracle shared by the planner tests and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI_E: f64 = 2.837_877_066_409_345_5;

/// A synthetic planning instance with one operator variance for every layer.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub n: usize,
    pub sigma2: f64,
    pub m: usize,
    pub classes: usize,
    pub eta: f64,
}

impl Instance {
    pub fn fixture() -> Self {
        Instance { n: 100, sigma2: 0.05, m: 32, classes: 4, eta: 0.5 }
    }

    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(10..=100);
        let nsig: f64 = (rng.gen_range(-1.0f64..2.5)).exp();
        Instance {
            n,
            sigma2: nsig / n as f64,
            m: rng.gen_range(4..=256),
            classes: rng.gen_range(2..=16),
            eta: rng.gen_range(0.15..0.9),
        }
    }
}

/// φ, or `None` when the profile breaks any planning constraint.
pub fn feasible_phi(inst: &Instance, widths: &[usize], eps: f64) -> Option<f64> {
    let depth = widths.len() - 1;
    let n = inst.n as f64;
    let w: Vec<f64> = widths.iter().map(|&x| x as f64).collect();
    let terms: Vec<f64> = (0..depth).map(|l| (n * w[l] * inst.sigma2).ln()).collect();
    let phi = 0.5 * LN_2PI_E + 0.5 * terms.iter().sum::<f64>();

    let wbar = (w[1..].iter().map(|x| x.ln()).sum::<f64>() / depth as f64).exp();
    let kbar = (n * inst.sigma2).ln();
    let star = (1.0 - (LN_2PI_E + w[0].ln() - w[depth].ln() + depth as f64 * kbar) / depth as f64).exp();
    if !(wbar > star * (1.0 + eps)) || !(wbar.ln() > -kbar + eps) {
        return None;
    }

    let mut phi0 = 0.0;
    let mut cumulative = LN_2PI_E;
    for l in 0..depth {
        cumulative += terms[l];
        if cumulative <= 0.0 {
            return None;
        }
        phi0 += terms[l] / cumulative * (w[l] * w[l + 1] / (w[l] + w[l + 1])).ln();
    }
    let ln_n = n.ln();
    if phi0 < ln_n || phi0 > ln_n / inst.eta {
        return None;
    }
    Some(phi)
}

/// Every integer profile `w_1..w_{L-1} ∈ [2, w_max]` for each depth, best φ first.
pub fn grid_best(inst: &Instance, depth_max: usize, w_max: usize, eps: f64) -> Option<(f64, Vec<usize>)> {
    assert!(depth_max <= 3, "the grid oracle enumerates at most two free widths");
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |widths: Vec<usize>| {
        if let Some(phi) = feasible_phi(inst, &widths, eps) {
            if best.as_ref().map_or(true, |(b, _)| phi > *b) {
                best = Some((phi, widths));
            }
        }
    };
    consider(vec![inst.m, inst.classes]);
    if depth_max >= 2 {
        for a in 2..=w_max {
            consider(vec![inst.m, a, inst.classes]);
        }
    }
    if depth_max >= 3 {
        for a in 2..=w_max {
            for b in 2..=w_max {
                consider(vec![inst.m, a, b, inst.classes]);
            }
        }
    }
    best
}

/// All feasible integer profiles at one depth ≤ 3.
pub fn feasible_set(inst: &Instance, depth: usize, w_max: usize, eps: f64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let free: Vec<Vec<usize>> = match depth {
        1 => vec![vec![]],
        2 => (2..=w_max).map(|a| vec![a]).collect(),
        3 => (2..=w_max).flat_map(|a| (2..=w_max).map(move |b| vec![a, b])).collect(),
        _ => panic!("depth {depth} is outside the oracle's range"),
    };
    for mid in free {
        let mut w = vec![inst.m];
        w.extend(mid);
        w.push(inst.classes);
        if feasible_phi(inst, &w, eps).is_some() {
            out.push(w);
        }
    }
    out
}
