#![allow(dead_code)]

use plrank::model::sample_ranking;
use plrank::{Dataset, Edge, Observation, UtilityVector};
use rand::seq::SliceRandom;
use rand::Rng;

/// Utilities drawn uniformly from `[-spread, spread]`.
pub fn random_utilities<R: Rng>(rng: &mut R, n: usize, spread: f64) -> UtilityVector {
    UtilityVector::new((0..n).map(|_| rng.random_range(-spread..=spread)).collect()).unwrap()
}

/// Random edge of size `m` on `0..n`.
pub fn random_edge<R: Rng>(rng: &mut R, n: usize, m: usize) -> Edge {
    let mut items: Vec<usize> = (0..n).collect();
    items.shuffle(rng);
    items.truncate(m);
    Edge::new(items).unwrap()
}

/// Dataset of `count` observations with sizes in `sizes` and random cutoffs
/// (full rankings when `full` is set), outcomes sampled at `u`.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    u: &UtilityVector,
    count: usize,
    sizes: std::ops::RangeInclusive<usize>,
    full: bool,
) -> Dataset {
    let n = u.len();
    let obs = (0..count)
        .map(|_| {
            let m = rng.random_range(sizes.clone()).min(n);
            let edge = random_edge(rng, n, m);
            let order = sample_ranking(u, &edge, rng).order().to_vec();
            let y = if full { m } else { rng.random_range(1..=m) };
            Observation::new(order, y).unwrap()
        })
        .collect();
    Dataset::new(n, obs).unwrap()
}

/// Same edges, fresh outcomes at `u`.
pub fn resample<R: Rng>(rng: &mut R, u: &UtilityVector, data: &Dataset) -> Dataset {
    let obs = data
        .observations()
        .iter()
        .map(|o| Observation::new(sample_ranking(u, o.edge(), rng).order().to_vec(), o.cutoff()).unwrap())
        .collect();
    Dataset::new(data.n(), obs).unwrap()
}

/// Every permutation of `items`.
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Direct product form of the PL probability of the first `y` places of `order`.
pub fn pl_prob(u: &[f64], order: &[usize], y: usize) -> f64 {
    let mut p = 1.0;
    for j in 0..y {
        let denom: f64 = order[j..].iter().map(|&k| u[k].exp()).sum();
        p *= u[order[j]].exp() / denom;
    }
    p
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector field, `J[i][j] = d g_i / d x_j`.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += h;
        b[j] -= h;
        let ga = g(&a);
        let gb = g(&b);
        for i in 0..n {
            jac[i][j] = (ga[i] - gb[i]) / (2.0 * h);
        }
    }
    jac
}

/// Pairs `(winner, loser)` implied by an observation with its cutoff.
pub fn beats(obs: &Observation) -> Vec<(usize, usize)> {
    let o = obs.order();
    let mut out = Vec::new();
    for a in 0..obs.cutoff().min(o.len()) {
        for b in a + 1..o.len() {
            out.push((o[a], o[b]));
        }
    }
    out
}

/// MLE existence by scanning every nonempty proper subset: each one must hold
/// an item that loses to some item outside it.
pub fn brute_existence(data: &Dataset) -> bool {
    let n = data.n();
    let pairs: Vec<(usize, usize)> = data.observations().iter().flat_map(beats).collect();
    (1..(1u32 << n) - 1).all(|mask| {
        let inside = |k: usize| mask & (1 << k) != 0;
        pairs.iter().any(|&(w, l)| inside(l) && !inside(w))
    })
}

fn boundary(edges: &[Edge], set: u32) -> Vec<&Edge> {
    edges
        .iter()
        .filter(|e| {
            let inside = e.items().iter().filter(|&&k| set & (1 << k) != 0).count();
            inside > 0 && inside < e.len()
        })
        .collect()
}

/// `|boundary(U)| / min(|U|, n - |U|)`.
pub fn brute_ratio(edges: &[Edge], n: usize, set: u32) -> f64 {
    let size = set.count_ones() as usize;
    boundary(edges, set).len() as f64 / size.min(n - size) as f64
}

/// Modified Cheeger constant over all nonempty proper subsets.
pub fn brute_cheeger(edges: &[Edge], n: usize) -> f64 {
    (1..(1u32 << n) - 1).map(|s| brute_ratio(edges, n, s)).fold(f64::INFINITY, f64::min)
}

fn admissible(edges: &[Edge], a: u32, b: u32) -> bool {
    let bd = boundary(edges, a);
    let kept = bd.iter().filter(|e| e.items().iter().all(|&k| b & (1 << k) != 0)).count();
    2 * kept >= bd.len()
}

/// Largest chain sum by explicit depth-first search over every strictly
/// increasing admissible chain (no memoization).
pub fn brute_gamma_re(edges: &[Edge], n: usize) -> f64 {
    let full = (1u32 << n) - 1;
    fn walk(edges: &[Edge], n: usize, full: u32, set: u32) -> f64 {
        let mut best = 0.0f64;
        for next in 1..=full {
            if next & set == set && next != set && admissible(edges, set, next) {
                let w = ((n as f64).ln() / brute_ratio(edges, n, set)).sqrt();
                best = best.max(w + walk(edges, n, full, next));
            }
        }
        best
    }
    (1..=full).map(|s| if s == full { 0.0 } else { walk(edges, n, full, s) }).fold(0.0, f64::max)
}

/// Maximizes a smooth concave `f` with the first coordinate pinned at zero,
/// by damped Newton steps on finite-difference derivatives of `f` alone.
/// Returns the centered maximizer.
pub fn newton_maximize(f: impl Fn(&[f64]) -> f64, n: usize) -> Vec<f64> {
    let full = |z: &[f64]| {
        let mut x = vec![0.0];
        x.extend_from_slice(z);
        f(&x)
    };
    let d = n - 1;
    let mut z = vec![0.0; d];
    for _ in 0..200 {
        let g = fd_gradient(&full, &z, 1e-6);
        let h = fd_jacobian(|p| fd_gradient(&full, p, 1e-6), &z, 1e-4);
        let hm = nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * (h[i][j] + h[j][i]));
        let step = match hm.clone().cholesky() {
            Some(_) => hm.lu().solve(&nalgebra::DVector::from_vec(g.clone())).unwrap().map(|v| -v),
            None => nalgebra::DVector::from_vec(g.clone()),
        };
        let f0 = full(&z);
        let mut t = 1.0;
        let mut next = z.clone();
        while t > 1e-12 {
            next = z.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if full(&next) >= f0 {
                break;
            }
            t *= 0.5;
        }
        let moved = z.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = next;
        if moved < 1e-11 {
            break;
        }
    }
    let mut x = vec![0.0];
    x.extend(z);
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    x
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
