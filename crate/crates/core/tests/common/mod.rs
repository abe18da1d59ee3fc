//! Oracles shared by the integration tests.

use ndarray::ArrayView2;

/// Singular values by one-sided Jacobi on the columns of `a`, nonincreasing.
pub fn jacobi_singular_values(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut u = if a.ncols() > a.nrows() { a.t().to_owned() } else { a.to_owned() };
    let k = u.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let (ci, cj) = (u.column(i).to_owned(), u.column(j).to_owned());
                let (alpha, beta, gamma) = (ci.dot(&ci), cj.dot(&cj), ci.dot(&cj));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                u.column_mut(i).assign(&(&ci * c - &cj * sn));
                u.column_mut(j).assign(&(&ci * sn + &cj * c));
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
