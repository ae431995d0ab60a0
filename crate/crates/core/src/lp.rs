//! Exact feasibility of `A x = b, x >= 0` for small integer data.
//!
//! Phase-one simplex on an integer-preserving (Edmonds/Bareiss) tableau:
//! every entry is the true rational value scaled by the current basis
//! determinant, and each pivot divides exactly by the previous determinant.
//! No rounding ever occurs, so the answer is exact. Bland's rule (smallest
//! eligible column enters, smallest basic index leaves on ratio ties)
//! guarantees termination on degenerate problems.
//!
//! The arithmetic first runs on checked `i64`, retries on checked `i128`
//! when an intermediate overflows, and finally on `BigInt`. The 0/1 systems
//! used by the adjacency oracles almost always stay within `i64`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// Integer arithmetic the tableau needs; `None` signals overflow.
trait Ring: Clone + Sized {
    fn from_i64(x: i64) -> Self;
    fn sign(&self) -> Ordering;
    /// `(a * p - b * c) / den`, exact by construction.
    fn pivot_update(a: &Self, p: &Self, b: &Self, c: &Self, den: &Self) -> Option<Self>;
    /// Compares `a * b` with `c * d`.
    fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering>;
}

macro_rules! checked_ring {
    ($t:ty) => {
        impl Ring for $t {
            #[inline]
            fn from_i64(x: i64) -> Self {
                x as $t
            }

            #[inline]
            fn sign(&self) -> Ordering {
                self.cmp(&0)
            }

            #[inline]
            fn pivot_update(a: &Self, p: &Self, b: &Self, c: &Self, den: &Self) -> Option<Self> {
                let lhs = a.checked_mul(*p)?;
                let rhs = b.checked_mul(*c)?;
                let num = lhs.checked_sub(rhs)?;
                debug_assert_eq!(num % den, 0);
                num.checked_div(*den)
            }

            #[inline]
            fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering> {
                Some(a.checked_mul(*b)?.cmp(&c.checked_mul(*d)?))
            }
        }
    };
}

checked_ring!(i64);
checked_ring!(i128);

impl Ring for BigInt {
    fn from_i64(x: i64) -> Self {
        BigInt::from(x)
    }

    fn sign(&self) -> Ordering {
        if self.is_zero() {
            Ordering::Equal
        } else if self.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }

    fn pivot_update(a: &Self, p: &Self, b: &Self, c: &Self, den: &Self) -> Option<Self> {
        let num = a * p - b * c;
        let (q, r) = num.div_rem(den);
        debug_assert!(r.is_zero());
        Some(q)
    }

    fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering> {
        Some((a * b).cmp(&(c * d)))
    }
}

/// A linear system `A x = b` over the integers with `x >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualitySystem {
    rows: usize,
    cols: usize,
    /// row-major `rows x cols`
    a: Vec<i64>,
    b: Vec<i64>,
}

impl EqualitySystem {
    pub fn new(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Appends the constraint `row . x = rhs`.
    pub fn push_row(&mut self, row: &[i64], rhs: i64) {
        assert_eq!(row.len(), self.cols, "row width");
        // keep b >= 0 so the artificial basis starts feasible
        if rhs < 0 {
            self.a.extend(row.iter().map(|v| -v));
            self.b.push(-rhs);
        } else {
            self.a.extend_from_slice(row);
            self.b.push(rhs);
        }
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Whether some `x >= 0` satisfies every row exactly.
    pub fn is_feasible(&self) -> bool {
        if let Some(ans) = self.solve::<i64>() {
            return ans;
        }
        if let Some(ans) = self.solve::<i128>() {
            return ans;
        }
        self.solve::<BigInt>().expect("bigint arithmetic cannot overflow")
    }

    fn solve<R: Ring>(&self) -> Option<bool> {
        let m = self.rows;
        let n = self.cols;
        if m == 0 {
            return Some(true);
        }
        let width = n + m + 1;
        let rhs = n + m;
        let zero = R::from_i64(0);
        let mut t: Vec<R> = vec![zero.clone(); (m + 1) * width];
        for i in 0..m {
            for j in 0..n {
                t[i * width + j] = R::from_i64(self.a[i * n + j]);
            }
            t[i * width + n + i] = R::from_i64(1);
            t[i * width + rhs] = R::from_i64(self.b[i]);
        }
        // phase-one objective: minimise the sum of artificials, stored as
        // reduced costs with the negated objective value in the rhs column
        let obj = m * width;
        for j in 0..n {
            let s: i64 = (0..m).map(|i| self.a[i * n + j]).sum();
            t[obj + j] = R::from_i64(-s);
        }
        t[obj + rhs] = R::from_i64(-self.b.iter().sum::<i64>());
        let mut basic: Vec<usize> = (n..n + m).collect();
        let mut den = R::from_i64(1);

        loop {
            if t[obj + rhs].sign() == Ordering::Equal {
                return Some(true);
            }
            let Some(enter) = (0..n + m).find(|&j| t[obj + j].sign() == Ordering::Less) else {
                return Some(false);
            };
            let mut leave: Option<usize> = None;
            for i in 0..m {
                if t[i * width + enter].sign() != Ordering::Greater {
                    continue;
                }
                leave = Some(match leave {
                    None => i,
                    Some(best) => {
                        // b_i / a_i  vs  b_best / a_best
                        let ord = R::cmp_products(
                            &t[i * width + rhs],
                            &t[best * width + enter],
                            &t[best * width + rhs],
                            &t[i * width + enter],
                        )?;
                        match ord {
                            Ordering::Less => i,
                            Ordering::Equal if basic[i] < basic[best] => i,
                            _ => best,
                        }
                    }
                });
            }
            // phase one is bounded below by zero, so some row is eligible
            let r = leave.expect("phase-one simplex cannot be unbounded");
            let p = t[r * width + enter].clone();
            for i in 0..=m {
                if i == r {
                    continue;
                }
                let f = t[i * width + enter].clone();
                for j in 0..width {
                    let updated =
                        R::pivot_update(&t[i * width + j], &p, &f, &t[r * width + j], &den)?;
                    t[i * width + j] = updated;
                }
            }
            basic[r] = enter;
            den = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(rows: &[(&[i64], i64)]) -> EqualitySystem {
        let mut s = EqualitySystem::new(rows[0].0.len());
        for (row, rhs) in rows {
            s.push_row(row, *rhs);
        }
        s
    }

    #[test]
    fn trivially_feasible_and_infeasible() {
        assert!(system(&[(&[1, 1], 1)]).is_feasible());
        assert!(!system(&[(&[1, 1], -1)]).is_feasible());
        assert!(!system(&[(&[0, 0], 1)]).is_feasible());
        assert!(EqualitySystem::new(3).is_feasible());
    }

    #[test]
    fn half_integral_solution() {
        // x + y = 1, x - y = 0 -> x = y = 1/2
        assert!(system(&[(&[1, 1], 1), (&[1, -1], 0)]).is_feasible());
        // x + y = 1, x - y = 2 -> x = 3/2, y = -1/2 infeasible
        assert!(!system(&[(&[1, 1], 1), (&[1, -1], 2)]).is_feasible());
    }

    #[test]
    fn degenerate_redundant_rows() {
        let s = system(&[
            (&[1, 0, 1, 0], 1),
            (&[0, 1, 0, 1], 1),
            (&[1, 1, 1, 1], 2),
            (&[1, 1, 1, 1], 2),
        ]);
        assert!(s.is_feasible());
    }

    #[test]
    fn backends_agree_on_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let m = rng.random_range(1..6);
            let n = rng.random_range(1..9);
            let mut s = EqualitySystem::new(n);
            for _ in 0..m {
                let row: Vec<i64> = (0..n).map(|_| rng.random_range(-2..=2)).collect();
                s.push_row(&row, rng.random_range(-2..=3));
            }
            let small = s.solve::<i64>().unwrap();
            assert_eq!(small, s.solve::<i128>().unwrap());
            assert_eq!(small, s.solve::<BigInt>().unwrap());
        }
    }

    #[test]
    fn overflow_falls_back() {
        // entries near the i64 limit force the wider backends
        let big = i64::MAX / 4;
        let s = system(&[(&[big, big - 1], big), (&[big - 3, big], big - 2)]);
        assert!(s.solve::<i64>().is_none());
        let wide = s.solve::<BigInt>().unwrap();
        assert_eq!(s.is_feasible(), wide);
    }
}
