#![allow(dead_code)]

use vlasov_fem::integrator::SspTableau;

/// Composite closed Newton–Cotes rule on element-sized panels of a periodic column.
pub fn newton_cotes(column: &[f64], k: usize, panel: f64) -> f64 {
    let n = column.len();
    let f = |j: usize| column[j % n];
    (0..n / k)
        .map(|e| {
            let j = e * k;
            match k {
                1 => panel * (f(j) + f(j + 1)) / 2.0,
                2 => panel * (f(j) + 4.0 * f(j + 1) + f(j + 2)) / 6.0,
                3 => panel * (f(j) + 3.0 * f(j + 1) + 3.0 * f(j + 2) + f(j + 3)) / 8.0,
                _ => unreachable!(),
            }
        })
        .sum()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= m * a[c][j];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `(value, exact)` pairs of the eight order conditions up to order four.
pub fn order_conditions(tab: &SspTableau) -> Vec<(f64, f64)> {
    let (a, b, c) = tab.butcher();
    let s = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mat = |v: &[f64]| -> Vec<f64> { (0..s).map(|i| dot(&a[i], v)).collect() };
    let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
    let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
    let ac = mat(&c);
    let cac: Vec<f64> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();
    vec![
        (b.iter().sum::<f64>(), 1.0),
        (dot(&b, &c), 1.0 / 2.0),
        (dot(&b, &c2), 1.0 / 3.0),
        (dot(&b, &ac), 1.0 / 6.0),
        (dot(&b, &c3), 1.0 / 4.0),
        (dot(&b, &cac), 1.0 / 8.0),
        (dot(&b, &mat(&c2)), 1.0 / 12.0),
        (dot(&b, &mat(&ac)), 1.0 / 24.0),
    ]
}
