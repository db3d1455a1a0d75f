use ndarray::{Array2, ArrayView2};

use super::BinnedData;

pub(crate) const PROB_FLOOR: f64 = 1e-12;

/// Negative log-likelihood over `rows`, with `y` row `r` belonging to subject
/// `rows[r]`. Accumulates `dL1/dy` into `grad` when given.
pub(crate) fn l1(y: ArrayView2<f64>, rows: &[usize], data: &BinnedData, mut grad: Option<&mut Array2<f64>>) -> f64 {
    let bins = data.n_bins();
    let causes = y.ncols() / bins;
    let mut total = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        let b = data.bins[i] - 1;
        let status = data.status[i] as usize;
        if status != 0 {
            let col = (status - 1) * bins + b;
            let v = y[[r, col]];
            total -= v.max(PROB_FLOOR).ln();
            if let Some(g) = grad.as_deref_mut() {
                if v > PROB_FLOOR {
                    g[[r, col]] -= 1.0 / v;
                }
            }
        } else {
            // Survivor mass 1 - sum_k F_k(b) equals the mass beyond bin b.
            let later = (0..causes).flat_map(|k| (b + 1..bins).map(move |c| k * bins + c));
            let surv: f64 = later.clone().map(|c| y[[r, c]]).sum();
            total -= surv.max(PROB_FLOOR).ln();
            if let Some(g) = grad.as_deref_mut() {
                if surv > PROB_FLOOR {
                    later.for_each(|c| g[[r, c]] -= 1.0 / surv);
                }
            }
        }
    }
    total
}

/// Pairwise ranking loss over `rows`. Pairs are formed within `rows` only.
pub(crate) fn l2(
    y: ArrayView2<f64>,
    rows: &[usize],
    data: &BinnedData,
    alpha: f64,
    sigma: f64,
    mut grad: Option<&mut Array2<f64>>,
) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let bins = data.n_bins();
    let cif = |r: usize, k: usize, b: usize| -> f64 { (0..=b).map(|c| y[[r, k * bins + c]]).sum() };
    let mut total = 0.0;
    for (ri, &i) in rows.iter().enumerate() {
        let status = data.status[i] as usize;
        if status == 0 {
            continue;
        }
        let k = status - 1;
        let b = data.bins[i] - 1;
        let fi = cif(ri, k, b);
        for (rj, &j) in rows.iter().enumerate() {
            if rj == ri || data.times[i] >= data.times[j] {
                continue;
            }
            let term = alpha * (-(fi - cif(rj, k, b)) / sigma).exp();
            total += term;
            if let Some(g) = grad.as_deref_mut() {
                let slope = term / sigma;
                for c in 0..=b {
                    g[[ri, k * bins + c]] -= slope;
                    g[[rj, k * bins + c]] += slope;
                }
            }
        }
    }
    total
}
