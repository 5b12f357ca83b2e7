//! External clustering metrics: ACC (best one-to-one relabelling), NMI and
//! ARI. Labels may be arbitrary integers; they are compacted internally.

use std::collections::BTreeMap;

use super::error::ClusterError;
use super::hungarian::min_cost_assignment;

/// Dense contingency table `table[u][v]` with compacted label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub table: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    // Re-number in sorted label order so results do not depend on input order.
    for (rank, v) in ids.values_mut().enumerate() {
        *v = rank;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

pub fn contingency(u: &[usize], v: &[usize]) -> Result<Contingency, ClusterError> {
    if u.len() != v.len() {
        return Err(ClusterError::LengthMismatch(u.len(), v.len()));
    }
    let (cu, ku) = compact(u);
    let (cv, kv) = compact(v);
    let mut table = vec![vec![0u64; kv]; ku];
    for (&a, &b) in cu.iter().zip(&cv) {
        table[a][b] += 1;
    }
    let row_sums = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..kv).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        table,
        row_sums,
        col_sums,
        n: u.len() as u64,
    })
}

/// Clustering accuracy under the best one-to-one cluster-to-label mapping.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64, ClusterError> {
    let c = contingency(truth, pred)?;
    if c.n == 0 {
        return Err(ClusterError::Empty);
    }
    let size = c.row_sums.len().max(c.col_sums.len());
    // Maximise matched counts == minimise negated counts on a zero-padded square.
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| -(c.table.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i64))
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let matched: i64 = assign.iter().enumerate().map(|(i, &j)| -cost[i][j]).sum();
    Ok(matched as f64 / c.n as f64)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2 I(U;V) / (H(U) + H(V))` with natural logarithms; 1.0 when both
/// labelings are a single cluster.
pub fn nmi(u: &[usize], v: &[usize]) -> Result<f64, ClusterError> {
    let c = contingency(u, v)?;
    if c.n == 0 {
        return Err(ClusterError::Empty);
    }
    let n = c.n as f64;
    let hu = entropy(&c.row_sums, n);
    let hv = entropy(&c.col_sums, n);
    if hu + hv == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.row_sums[i] as f64 * c.col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((2.0 * mi / (hu + hv)).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index in pair-counting form. When the denominator vanishes
/// the result is 1.0 for identical partitions and 0.0 otherwise.
pub fn ari(u: &[usize], v: &[usize]) -> Result<f64, ClusterError> {
    let c = contingency(u, v)?;
    if c.n < 2 {
        return Err(ClusterError::TooMany {
            k: 2,
            n: c.n as usize,
        });
    }
    let index: f64 = c.table.iter().flatten().map(|&x| choose2(x)).sum();
    let sum_a: f64 = c.row_sums.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = c.col_sums.iter().map(|&x| choose2(x)).sum();
    let expected = sum_a * sum_b / choose2(c.n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let same = c.row_sums.len() == c.col_sums.len()
            && c.table
                .iter()
                .all(|r| r.iter().filter(|&&x| x > 0).count() == 1);
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_of_relabelling_is_one() {
        let t = [0, 0, 1, 1, 2, 2];
        let p = [2, 2, 0, 0, 1, 1];
        assert_eq!(accuracy(&t, &p).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_crossed_pairs() {
        assert_eq!(accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_with_more_clusters_than_labels() {
        // Best mapping covers 2 of the 3 clusters.
        assert_eq!(accuracy(&[0, 0, 0, 1], &[0, 1, 2, 2]).unwrap(), 0.5);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert_eq!(
            accuracy(&[0, 1], &[0]).unwrap_err(),
            ClusterError::LengthMismatch(2, 1)
        );
        assert!(nmi(&[0], &[0, 1]).is_err());
        assert!(ari(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_edge_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1, 2], &[5, 5, 7, 7, 9]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 1, 1], &[3, 3, 3, 3]).unwrap(), 0.0);
        assert_eq!(nmi(&[1, 1, 1], &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_hand_contingency() {
        // truth [0,0,1,1] vs preds [0,1,1,1]:
        // H(U) = ln 2; H(V) = -(1/4 ln 1/4 + 3/4 ln 3/4)
        // MI = 1/4 ln 2 + 1/4 ln(2/3) + 1/2 ln(4/3)
        let hu = 2f64.ln();
        let hv = -(0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let mi = 0.25 * 2f64.ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.5 * (4.0f64 / 3.0).ln();
        let expected = 2.0 * mi / (hu + hv);
        assert!((nmi(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ari_crossed_pairs() {
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn ari_degenerate_denominators() {
        assert_eq!(ari(&[0, 0, 0], &[4, 4, 4]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
    }

    fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0..k, n)
    }

    proptest! {
        #[test]
        fn nmi_and_ari_are_symmetric((u, v) in (2usize..40).prop_flat_map(|n| (labels(n, 5), labels(n, 4)))) {
            prop_assert!((nmi(&u, &v).unwrap() - nmi(&v, &u).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&u, &v).unwrap() - ari(&v, &u).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn accuracy_is_relabelling_invariant(
            (u, v) in (1usize..40).prop_flat_map(|n| (labels(n, 4), labels(n, 4))),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let relabelled: Vec<usize> = v.iter().map(|&l| perm[l]).collect();
            let a = accuracy(&u, &v).unwrap();
            prop_assert_eq!(a, accuracy(&u, &relabelled).unwrap());
            prop_assert!(a >= 1.0 / u.len() as f64 && a <= 1.0);
        }
    }
}
