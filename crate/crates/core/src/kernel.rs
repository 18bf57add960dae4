//! Exact computation of `F_0(S, G)`: the `G`-invariant functions on a
//! support whose three marginals vanish identically.
//!
//! Elimination runs over the integers (fraction-free Gauss–Jordan with row
//! gcd reduction). A checked `i128` pass is tried first; if any product
//! overflows the whole elimination is redone with `BigInt`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::support::{orbits, OrbitIndex, Support, SymmetryGroup};

/// Generating matrix of `F_0(S, G)`, stored in orbit coordinates.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    orbit_index: OrbitIndex,
    /// `columns[j][o]`: value of basis function `j` on every triple of orbit `o`.
    columns: Vec<Vec<BigInt>>,
}

impl KernelBasis {
    /// χ(S, G).
    pub fn chi(&self) -> usize {
        self.columns.len()
    }

    /// dim F(S, G), the number of orbits.
    pub fn invariant_dim(&self) -> usize {
        self.orbit_index.orbit_count()
    }

    pub fn orbit_index(&self) -> &OrbitIndex {
        &self.orbit_index
    }

    /// `R_{sj}`.
    pub fn entry(&self, s: usize, j: usize) -> &BigInt {
        &self.columns[j][self.orbit_index.orbit_of(s)]
    }

    /// Column `j` in orbit coordinates.
    pub fn orbit_column(&self, j: usize) -> &[BigInt] {
        &self.columns[j]
    }

    /// Column `j` expanded to one entry per triple.
    pub fn column(&self, j: usize, support_len: usize) -> Vec<BigInt> {
        (0..support_len).map(|s| self.entry(s, j).clone()).collect()
    }

    /// Whether row `s` of `R` has a non-zero entry.
    pub fn touches(&self, s: usize) -> bool {
        let o = self.orbit_index.orbit_of(s);
        self.columns.iter().any(|c| !c[o].is_zero())
    }

    /// Columns as floating point, orbit coordinates.
    pub fn orbit_columns_f64(&self) -> Vec<Vec<f64>> {
        self.columns
            .iter()
            .map(|c| c.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

/// Orbit-parametrized marginal constraint matrix: one row per `(axis, symbol)`,
/// one column per orbit, entry = number of orbit members carrying that symbol.
pub fn marginal_constraint_matrix(support: &Support, orbit_index: &OrbitIndex) -> Vec<Vec<i64>> {
    let mut rows = Vec::new();
    for axis in 0..3 {
        let base = rows.len();
        rows.extend((0..support.alphabet(axis).len()).map(|_| vec![0i64; orbit_index.orbit_count()]));
        for s in 0..support.len() {
            rows[base + support.symbol(s, axis)][orbit_index.orbit_of(s)] += 1;
        }
    }
    rows
}

/// Exact basis of `F_0(S, G)`.
pub fn kernel_basis(support: &Support, group: &SymmetryGroup) -> KernelBasis {
    let orbit_index = orbits(support, group);
    let matrix = marginal_constraint_matrix(support, &orbit_index);
    let columns = nullspace(&matrix, orbit_index.orbit_count());
    KernelBasis { orbit_index, columns }
}

/// Integer basis of the right null space of an integer matrix with `ncols`
/// columns. Each vector has gcd 1 and a positive first non-zero entry.
pub fn nullspace(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<BigInt>> {
    let small: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    match reduce(small, ncols) {
        Some((reduced, pivots)) => {
            let big = reduced
                .into_iter()
                .map(|r| r.into_iter().map(BigInt::from).collect())
                .collect();
            basis_from_reduced(big, &pivots, ncols)
        }
        None => {
            let big: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
            let (reduced, pivots) = reduce(big, ncols).expect("BigInt elimination cannot overflow");
            basis_from_reduced(reduced, &pivots, ncols)
        }
    }
}

/// Same as [`nullspace`] for matrices that already hold big integers.
pub fn nullspace_big(rows: Vec<Vec<BigInt>>, ncols: usize) -> Vec<Vec<BigInt>> {
    let (reduced, pivots) = reduce(rows, ncols).expect("BigInt elimination cannot overflow");
    basis_from_reduced(reduced, &pivots, ncols)
}

trait ExactInt: Clone + PartialEq + Zero + One {
    fn mul_c(&self, other: &Self) -> Option<Self>;
    fn sub_c(&self, other: &Self) -> Option<Self>;
    fn gcd_e(&self, other: &Self) -> Self;
    fn div_e(&self, other: &Self) -> Self;
}

impl ExactInt for i128 {
    fn mul_c(&self, other: &Self) -> Option<Self> {
        self.checked_mul(*other)
    }
    fn sub_c(&self, other: &Self) -> Option<Self> {
        self.checked_sub(*other)
    }
    fn gcd_e(&self, other: &Self) -> Self {
        self.gcd(other)
    }
    fn div_e(&self, other: &Self) -> Self {
        self / other
    }
}

impl ExactInt for BigInt {
    fn mul_c(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn sub_c(&self, other: &Self) -> Option<Self> {
        Some(self - other)
    }
    fn gcd_e(&self, other: &Self) -> Self {
        self.gcd(other)
    }
    fn div_e(&self, other: &Self) -> Self {
        self / other
    }
}

fn normalize_row<T: ExactInt>(row: &mut [T]) {
    let mut g = T::zero();
    for x in row.iter() {
        if !x.is_zero() {
            g = g.gcd_e(x);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for x in row.iter_mut() {
        if !x.is_zero() {
            *x = x.div_e(&g);
        }
    }
}

/// Fraction-free Gauss–Jordan. Returns the reduced rows (pivot rows first)
/// and the pivot column of each, or `None` on overflow.
fn reduce<T: ExactInt>(mut rows: Vec<Vec<T>>, ncols: usize) -> Option<(Vec<Vec<T>>, Vec<usize>)> {
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(found) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, found);
        normalize_row(&mut rows[rank]);
        let pivot_row = rows[rank].clone();
        let p = pivot_row[col].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == rank || row[col].is_zero() {
                continue;
            }
            let x = row[col].clone();
            for c in 0..ncols {
                if pivot_row[c].is_zero() && row[c].is_zero() {
                    continue;
                }
                let a = row[c].mul_c(&p)?;
                let b = pivot_row[c].mul_c(&x)?;
                row[c] = a.sub_c(&b)?;
            }
            normalize_row(row);
        }
        pivots.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    Some((rows, pivots))
}

fn basis_from_reduced(rows: Vec<Vec<BigInt>>, pivots: &[usize], ncols: usize) -> Vec<Vec<BigInt>> {
    let mut is_pivot = vec![None; ncols];
    for (r, &c) in pivots.iter().enumerate() {
        is_pivot[c] = Some(r);
    }
    let mut basis = Vec::new();
    for free in 0..ncols {
        if is_pivot[free].is_some() {
            continue;
        }
        // x_free = 1, x_pivot(r) = -rows[r][free] / rows[r][pivot]; clear denominators.
        let mut lcm = BigInt::one();
        for (r, &c) in pivots.iter().enumerate() {
            if !rows[r][free].is_zero() {
                let d = rows[r][c].abs() / rows[r][c].abs().gcd(&rows[r][free].abs());
                lcm = lcm.lcm(&d);
            }
        }
        let mut v = vec![BigInt::zero(); ncols];
        v[free] = lcm.clone();
        for (r, &c) in pivots.iter().enumerate() {
            if !rows[r][free].is_zero() {
                v[c] = -(&rows[r][free] * &lcm) / &rows[r][c];
            }
        }
        let mut g = BigInt::zero();
        for x in &v {
            g = g.gcd(x);
        }
        if !g.is_zero() && !g.is_one() {
            for x in v.iter_mut() {
                *x = &*x / &g;
            }
        }
        if v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
            for x in v.iter_mut() {
                *x = -&*x;
            }
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::support::{induced_group, make_support, CoordinateGroup, Triple};

    fn simplex(d: i64) -> Support {
        let mut v = Vec::new();
        for a in 0..=d {
            for b in 0..=d - a {
                v.push(Triple::new(a, b, d - a - b));
            }
        }
        make_support(v).unwrap()
    }

    fn check_columns(support: &Support, kb: &KernelBasis) {
        for j in 0..kb.chi() {
            let col = kb.column(j, support.len());
            let total: BigInt = col.iter().sum();
            assert!(total.is_zero(), "column {j} does not sum to zero");
            for axis in 0..3 {
                let mut m = vec![BigInt::zero(); support.alphabet(axis).len()];
                for (s, x) in col.iter().enumerate() {
                    m[support.symbol(s, axis)] += x;
                }
                assert!(m.iter().all(|x| x.is_zero()), "column {j} has a non-zero marginal on axis {axis}");
            }
            let first = col.iter().find(|x| !x.is_zero()).unwrap();
            assert!(first.is_positive());
        }
    }

    #[test]
    fn cw_base_has_no_kernel() {
        let s = simplex(2);
        let g = induced_group(&s, &CoordinateGroup::full()).unwrap();
        assert_eq!(kernel_basis(&s, &g).chi(), 0);
    }

    #[test]
    fn cw_fourth_power_chi_is_two() {
        let s = simplex(8);
        let g = induced_group(&s, &CoordinateGroup::full()).unwrap();
        let kb = kernel_basis(&s, &g);
        assert_eq!((kb.invariant_dim(), kb.chi()), (10, 2));
        check_columns(&s, &kb);
    }

    #[test]
    fn trivial_group_kernel_is_marginal_free() {
        let s = simplex(6);
        let kb = kernel_basis(&s, &SymmetryGroup::trivial(&s));
        // |S| minus the rank of the three marginal maps on a simplex slice
        assert_eq!(kb.chi(), s.len() - (3 * 7 - 3));
        check_columns(&s, &kb);
        assert!(kb.touches(s.index_of(&Triple::new(2, 2, 2)).unwrap()));
    }

    #[test]
    fn big_and_small_paths_agree() {
        let rows = vec![vec![2, 4, 6, 1], vec![1, 3, 5, 7], vec![3, 7, 11, 8]];
        let small = nullspace(&rows, 4);
        let big = nullspace_big(
            rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect(),
            4,
        );
        assert_eq!(small, big);
        assert_eq!(small.len(), 2);
    }
}
