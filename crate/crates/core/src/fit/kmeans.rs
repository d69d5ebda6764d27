use rand::Rng as _;

use crate::data::DataMatrix;
use crate::rng::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by `iters` Lloyd iterations. Returns hard
/// labels in `0..k`.
pub(crate) fn kmeans_labels(data: &DataMatrix, k: usize, iters: usize, rng: &mut Rng) -> Vec<usize> {
    let n = data.n();
    if k <= 1 {
        return vec![0; n];
    }
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(data.row(rng.random_range(0..n)).to_vec());
    let mut nearest: Vec<f64> = data.rows().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (d, x) in nearest.iter_mut().zip(data.rows()) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }

    let dim = data.dim();
    let mut labels = vec![0usize; n];
    for _ in 0..=iters {
        for (l, x) in labels.iter_mut().zip(data.rows()) {
            *l = closest(x, &centers);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (l, x) in labels.iter().zip(data.rows()) {
            counts[*l] += 1;
            for (s, v) in sums[*l].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // move an empty center onto the worst-served observation
                let far = data
                    .rows()
                    .zip(&labels)
                    .map(|(x, l)| sq_dist(x, &centers[*l]))
                    .enumerate()
                    .fold((0, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best })
                    .0;
                centers[j] = data.row(far).to_vec();
            }
        }
    }
    for (l, x) in labels.iter_mut().zip(data.rows()) {
        *l = closest(x, &centers);
    }
    labels
}

fn closest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}
