//! Dense Hungarian algorithm (shortest augmenting path with potentials).
//!
//! Costs are integers so that the optimum is exact: ties between
//! mathematically equal assignments cannot be broken by rounding.

/// Minimum-cost perfect matching of a square cost matrix given row-major.
/// Returns `assign[row] = col`.
pub fn hungarian(cost: &[i128], n: usize) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual root
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![i128::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i128::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost_of(cost: &[i128], n: usize, a: &[usize]) -> i128 {
        a.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
    }

    #[test]
    fn small_instances() {
        assert!(hungarian(&[], 0).is_empty());
        assert_eq!(hungarian(&[5], 1), vec![0]);
        let c = [4, 1, 3, 2, 0, 5, 3, 2, 2];
        let a = hungarian(&c, 3);
        assert_eq!(cost_of(&c, 3, &a), 5);
    }

    #[test]
    fn is_a_permutation() {
        let n = 9;
        let c: Vec<i128> = (0..n * n).map(|k| ((k * 7919) % 101) as i128).collect();
        let mut a = hungarian(&c, n);
        a.sort_unstable();
        assert_eq!(a, (0..n).collect::<Vec<_>>());
    }
}
