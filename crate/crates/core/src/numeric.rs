//! Floating-point accumulation helpers shared by the state-sum and Jones scans.

/// Neumaier's variant of Kahan summation.
///
/// Robust when later terms are larger in magnitude than the running sum,
/// which happens constantly for the mixed-sign weights of level ≥ 5 state sums.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Multiplies the accumulated value (and its error term) by `factor`.
    #[inline]
    pub fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.compensation *= factor;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        acc.extend(iter);
        acc
    }
}

/// Pairwise (tree) summation of partial results, in index order.
///
/// The combination order depends only on `values.len()`, so the result does not
/// depend on how the partials were scheduled across threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = terms.iter().sum();
        let acc: CompensatedSum = terms.iter().copied().collect();
        assert_eq!(naive, 0.0);
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn pairwise_sum_matches_sequential_on_exact_values() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
