use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ScengenError;

/// One representative day: an input day acting as medoid and the share of
/// input days assigned to it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepresentativeDay {
    /// Row of the medoid in the input.
    pub index: usize,
    pub profile: Vec<f64>,
    pub probability: f64,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clustering {
    pub days: Vec<RepresentativeDay>,
    /// Total distance to the assigned medoid after the build step and after
    /// every accepted swap.
    pub objective_trace: Vec<f64>,
}

/// Min-max normalization per feature; constant features map to 0.
pub fn normalize_features(profiles: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = profiles[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in profiles {
        for (k, &v) in p.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    profiles
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(k, &v)| if hi[k] > lo[k] { (v - lo[k]) / (hi[k] - lo[k]) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let v = points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            d[a][b] = v;
            d[b][a] = v;
        }
    }
    d
}

fn total_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|i| medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// PAM clustering of daily profiles into `k` representative days.
///
/// Build picks medoids greedily; swap then applies the best improving
/// (medoid, non-medoid) exchange until none improves. The seed fixes the
/// order in which candidates are scanned, which only matters for ties.
pub fn representative_days(profiles: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, ScengenError> {
    if profiles.is_empty() {
        return Err(ScengenError::Argument("no profiles given".into()));
    }
    if k == 0 {
        return Err(ScengenError::Argument("k must be at least 1".into()));
    }
    let n = profiles.len();
    if k > n {
        return Err(ScengenError::Argument(format!("k = {k} exceeds the {n} profiles")));
    }
    let dim = profiles[0].len();
    if let Some(row) = profiles.iter().position(|p| p.len() != dim) {
        return Err(ScengenError::Argument(format!(
            "profile {row} has {} values, expected {dim}",
            profiles[row].len()
        )));
    }
    if profiles.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ScengenError::Argument("profiles must be finite".into()));
    }

    let d = distance_matrix(&normalize_features(profiles));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for &c in &order {
            if medoids.contains(&c) {
                continue;
            }
            let cost: f64 = (0..n).map(|i| nearest[i].min(d[i][c])).sum();
            if best.map_or(true, |(_, b)| cost < b) {
                best = Some((c, cost));
            }
        }
        let (c, _) = best.expect("k <= n leaves a candidate");
        medoids.push(c);
        for i in 0..n {
            nearest[i] = nearest[i].min(d[i][c]);
        }
    }

    let mut current = total_cost(&d, &medoids);
    let mut trace = vec![current];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for &c in &order {
                if medoids.contains(&c) {
                    continue;
                }
                let old = medoids[slot];
                medoids[slot] = c;
                let cost = total_cost(&d, &medoids);
                medoids[slot] = old;
                if cost < current - 1e-12 * current.max(1.0) && best.map_or(true, |(_, _, b)| cost < b) {
                    best = Some((slot, c, cost));
                }
            }
        }
        match best {
            Some((slot, c, cost)) => {
                medoids[slot] = c;
                current = cost;
                trace.push(cost);
            }
            None => break,
        }
    }

    medoids.sort_unstable();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        // Ties go to the lowest medoid index.
        let mut pick = 0;
        for slot in 1..k {
            if d[i][medoids[slot]] < d[i][medoids[pick]] {
                pick = slot;
            }
        }
        members[pick].push(i);
    }
    let days = medoids
        .iter()
        .zip(members)
        .map(|(&m, members)| RepresentativeDay {
            index: m,
            profile: profiles[m].clone(),
            probability: members.len() as f64 / n as f64,
            members,
        })
        .collect();
    Ok(Clustering {
        days,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_distinct_profile_is_its_own_medoid() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let c = representative_days(&p, 3, 1).unwrap();
        assert_eq!(c.days.iter().map(|d| d.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(c.days.iter().all(|d| d.probability == 1.0 / 3.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(representative_days(&[], 1, 0).is_err());
        assert!(representative_days(&[vec![1.0]], 0, 0).is_err());
        assert!(representative_days(&[vec![1.0]], 2, 0).is_err());
        assert!(representative_days(&[vec![1.0], vec![1.0, 2.0]], 1, 0).is_err());
    }
}
