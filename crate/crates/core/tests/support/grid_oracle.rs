use shockpath::linalg::dist2;

/// Barycentric grid search followed by pattern-search zoom. Slow and
/// independent of the library's projection code.
pub fn grid_projection(vertices: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = vertices.len();
    let d = x.len();
    let point = |lam: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; d];
        for (l, v) in lam.iter().zip(vertices) {
            for i in 0..d {
                p[i] += l * v[i];
            }
        }
        p
    };
    // The last weight is implied.
    let full = |free: &[f64]| -> Option<Vec<f64>> {
        let rest = 1.0 - free.iter().sum::<f64>();
        if free.iter().any(|&l| l < 0.0) || rest < 0.0 {
            return None;
        }
        let mut lam = free.to_vec();
        lam.push(rest.max(0.0));
        Some(lam)
    };
    let cost = |free: &[f64]| full(free).map(|lam| dist2(&point(&lam), x));

    let free_dim = n - 1;
    let steps = 100usize;
    let mut best = vec![0.0; free_dim];
    let mut best_cost = cost(&best).unwrap();
    let mut idx = vec![0usize; free_dim];
    loop {
        let free: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        if let Some(c) = cost(&free) {
            if c < best_cost {
                best_cost = c;
                best = free;
            }
        }
        let mut j = 0;
        while j < free_dim {
            idx[j] += 1;
            if idx[j] <= steps {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == free_dim {
            break;
        }
    }

    let mut s = 1.0 / steps as f64;
    let offsets: Vec<Vec<i32>> = (0..5i32.pow(free_dim as u32))
        .map(|mut c| {
            (0..free_dim)
                .map(|_| {
                    let o = c % 5 - 2;
                    c /= 5;
                    o
                })
                .collect()
        })
        .collect();
    while s > 1e-12 {
        let mut improved = false;
        for o in &offsets {
            let cand: Vec<f64> = best.iter().zip(o).map(|(b, &k)| b + k as f64 * s).collect();
            if let Some(c) = cost(&cand) {
                if c < best_cost {
                    best_cost = c;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            s /= 4.0;
        }
    }
    point(&full(&best).unwrap())
}
