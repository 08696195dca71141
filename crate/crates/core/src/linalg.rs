//! Exact rational linear algebra: elimination, integer kernel bases, and a
//! small simplex used to decide mass-conservation feasibility.

use num::rational::Ratio;
use num::{One, Zero};

/// Exact scalar. i128 components are ample for the small stoichiometric
/// matrices handled here; Ratio keeps them reduced after every operation.
pub type Rat = Ratio<i128>;

pub fn rat(n: i64) -> Rat {
    Ratio::from_integer(n as i128)
}

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix {
            rows,
            cols,
            data: vec![Rat::zero(); rows * cols],
        }
    }

    /// Build from integer columns (each of equal length).
    pub fn from_int_columns(columns: &[Vec<i64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = RatMatrix::zeros(rows, cols);
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            for (r, &v) in col.iter().enumerate() {
                m[(r, c)] = rat(v);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// In-place reduced row echelon form; returns pivot column indices.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| !self[(r, col)].is_zero()) else {
                continue;
            };
            self.swap_rows(row, p);
            let inv = self[(row, col)];
            for c in col..self.cols {
                self[(row, c)] = self[(row, c)] / inv;
            }
            for r in 0..self.rows {
                if r != row && !self[(r, col)].is_zero() {
                    let f = self[(r, col)];
                    for c in col..self.cols {
                        let sub = f * self[(row, c)];
                        self[(r, c)] = self[(r, c)] - sub;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(mut self) -> usize {
        self.rref().len()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn row(&self, r: usize) -> &[Rat] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rat;
    fn index(&self, (r, c): (usize, usize)) -> &Rat {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Rat {
        &mut self.data[r * self.cols + c]
    }
}

/// Rank of the integer matrix given by `columns`, exact.
pub fn rank_of_columns(columns: &[Vec<i64>]) -> usize {
    RatMatrix::from_int_columns(columns).rank()
}

/// Scale a rational vector to a primitive integer vector (gcd 1) whose first
/// nonzero entry is positive.
pub fn primitive_integer(v: &[Rat]) -> Vec<i64> {
    let mut denom_lcm: i128 = 1;
    for x in v {
        denom_lcm = num::integer::lcm(denom_lcm, *x.denom());
    }
    let mut ints: Vec<i128> = v.iter().map(|x| x.numer() * (denom_lcm / x.denom())).collect();
    let mut g: i128 = 0;
    for &x in &ints {
        g = num::integer::gcd(g, x.abs());
    }
    if g > 1 {
        for x in &mut ints {
            *x /= g;
        }
    }
    if let Some(first) = ints.iter().find(|&&x| x != 0) {
        if *first < 0 {
            for x in &mut ints {
                *x = -*x;
            }
        }
    }
    ints.into_iter().map(|x| x as i64).collect()
}

/// Basis of ker(A) for A given by integer `columns` (A is rows x cols).
/// Vectors are primitive integers with positive leading entry, ordered by the
/// free column they parametrize (ascending), derived from the RREF.
pub fn integer_kernel_basis(columns: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = columns.len();
    let mut m = RatMatrix::from_int_columns(columns);
    let pivots = m.rref();
    let rank = pivots.len();
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(n - rank);
    for &f in &free {
        let mut v = vec![Rat::zero(); n];
        v[f] = Rat::one();
        for (i, &p) in pivots.iter().enumerate() {
            v[p] = -m[(i, f)];
        }
        basis.push(primitive_integer(&v));
    }
    basis
}

/// Outcome of the phase-1/phase-2 simplex on `A x = b, x >= 0`.
pub enum Lp {
    Infeasible,
    /// A feasible (phase-2 optimal when an objective was given) point.
    Feasible(Vec<Rat>),
}

/// Solve `min c.x  s.t.  A x = b, x >= 0` exactly. Bland's rule, so the
/// result is deterministic and cycling-free. `c = None` stops after phase 1.
pub fn simplex(a: &RatMatrix, b: &[Rat], c: Option<&[Rat]>) -> Lp {
    let m = a.rows;
    let n = a.cols;
    assert_eq!(b.len(), m);

    // tableau: n structural + m artificial columns, then rhs
    let width = n + m + 1;
    let mut t = vec![vec![Rat::zero(); width]; m];
    for r in 0..m {
        let flip = b[r] < Rat::zero();
        for col in 0..n {
            t[r][col] = if flip { -a[(r, col)] } else { a[(r, col)] };
        }
        t[r][n + r] = Rat::one();
        t[r][width - 1] = if flip { -b[r] } else { b[r] };
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase 1: minimize sum of artificials
    let mut cost = vec![Rat::zero(); width];
    for r in 0..m {
        for col in 0..width {
            let add = t[r][col];
            cost[col] = cost[col] + add;
        }
    }
    for col in n..n + m {
        cost[col] = cost[col] - Rat::one();
    }
    pivot_until_optimal(&mut t, &mut basis, &mut cost, n + m);
    let obj: Rat = (0..m)
        .filter(|&r| basis[r] >= n)
        .map(|r| t[r][width - 1])
        .sum();
    if !obj.is_zero() {
        return Lp::Infeasible;
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&col| !t[r][col].is_zero()) {
                pivot(&mut t, &mut basis, &mut cost, r, col);
            }
        }
    }

    if let Some(cvec) = c {
        assert_eq!(cvec.len(), n);
        // phase 2 reduced costs z_j - c_j over structural columns only
        let mut cost2 = vec![Rat::zero(); width];
        for r in 0..m {
            if basis[r] < n {
                let cb = cvec[basis[r]];
                if !cb.is_zero() {
                    for col in 0..width {
                        let add = cb * t[r][col];
                        cost2[col] = cost2[col] + add;
                    }
                }
            }
        }
        for (col, &cj) in cvec.iter().enumerate() {
            cost2[col] = cost2[col] - cj;
        }
        // artificial columns are barred from re-entering
        for col in n..n + m {
            cost2[col] = -Rat::one();
        }
        pivot_until_optimal(&mut t, &mut basis, &mut cost2, n);
    }

    let mut x = vec![Rat::zero(); n];
    for r in 0..m {
        if basis[r] < n {
            x[basis[r]] = t[r][width - 1];
        }
    }
    Lp::Feasible(x)
}

fn pivot_until_optimal(
    t: &mut [Vec<Rat>],
    basis: &mut [usize],
    cost: &mut [Rat],
    enter_limit: usize,
) {
    let m = t.len();
    let width = t[0].len();
    loop {
        let Some(enter) =
            (0..enter_limit).find(|&j| !basis.contains(&j) && cost[j] > Rat::zero())
        else {
            return;
        };
        let mut leave: Option<usize> = None;
        let mut best: Option<Rat> = None;
        for r in 0..m {
            if t[r][enter] > Rat::zero() {
                let ratio = t[r][width - 1] / t[r][enter];
                let better = match (&best, &leave) {
                    (None, _) => true,
                    (Some(b), Some(l)) => ratio < *b || (ratio == *b && basis[r] < basis[*l]),
                    _ => unreachable!(),
                };
                if better {
                    best = Some(ratio);
                    leave = Some(r);
                }
            }
        }
        let Some(leave) = leave else {
            // unbounded direction; cannot occur for the feasibility LPs here
            return;
        };
        pivot(t, basis, cost, leave, enter);
    }
}

fn pivot(t: &mut [Vec<Rat>], basis: &mut [usize], cost: &mut [Rat], row: usize, col: usize) {
    let width = t[0].len();
    let pv = t[row][col];
    for c in 0..width {
        t[row][c] = t[row][c] / pv;
    }
    for r in 0..t.len() {
        if r != row && !t[r][col].is_zero() {
            let f = t[r][col];
            for c in 0..width {
                let sub = f * t[row][c];
                t[r][c] = t[r][c] - sub;
            }
        }
    }
    if !cost[col].is_zero() {
        let f = cost[col];
        for c in 0..width {
            let sub = f * t[row][c];
            cost[c] = cost[c] - sub;
        }
    }
    basis[row] = col;
}

/// Strictly positive rho with rho^T gamma = 0 and min(rho) >= 1, minimizing
/// sum(rho), if the mechanism conserves mass. `gamma` is given columnwise.
pub fn mass_vector(gamma_columns: &[Vec<i64>], species: usize) -> Option<Vec<Rat>> {
    let r = gamma_columns.len();
    // rho = 1 + x, x >= 0: gamma^T x = -gamma^T 1, minimize sum x
    let mut a = RatMatrix::zeros(r, species);
    let mut b = vec![Rat::zero(); r];
    for (step, col) in gamma_columns.iter().enumerate() {
        for (s, &v) in col.iter().enumerate() {
            a[(step, s)] = rat(v);
            b[step] = b[step] - rat(v);
        }
    }
    let c = vec![Rat::one(); species];
    match simplex(&a, &b, Some(&c)) {
        Lp::Infeasible => None,
        Lp::Feasible(x) => {
            let rho: Vec<Rat> = x.into_iter().map(|xi| xi + Rat::one()).collect();
            for col in gamma_columns {
                let dot: Rat = col.iter().zip(&rho).map(|(&g, p)| rat(g) * *p).sum();
                debug_assert!(dot.is_zero());
            }
            Some(rho)
        }
    }
}

/// Stiemke certificate of mass-conservation infeasibility: y with
/// gamma.y >= 0 and gamma.y != 0. Exactly one of `mass_vector` and this
/// exists for any gamma.
pub fn stiemke_certificate(gamma_columns: &[Vec<i64>], species: usize) -> Option<Vec<Rat>> {
    let r = gamma_columns.len();
    // variables: y+ (r), y- (r), w (species); gamma(y+ - y-) - w = 0, sum w = 1
    let n = 2 * r + species;
    let mut a = RatMatrix::zeros(species + 1, n);
    for (step, col) in gamma_columns.iter().enumerate() {
        for (s, &v) in col.iter().enumerate() {
            a[(s, step)] = rat(v);
            a[(s, r + step)] = rat(-v);
        }
    }
    for s in 0..species {
        a[(s, 2 * r + s)] = -Rat::one();
        a[(species, 2 * r + s)] = Rat::one();
    }
    let mut b = vec![Rat::zero(); species + 1];
    b[species] = Rat::one();
    match simplex(&a, &b, None) {
        Lp::Infeasible => None,
        Lp::Feasible(x) => Some((0..r).map(|i| x[i] - x[r + i]).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rref_rank() {
        // gamma of {X<=>Y, 2X<=>X+Y}: both columns (-1, 1)
        let cols = vec![vec![-1, 1], vec![-1, 1]];
        assert_eq!(rank_of_columns(&cols), 1);

        let cols = vec![vec![-1, 1, 0], vec![0, -1, 1], vec![1, 0, -1]];
        assert_eq!(rank_of_columns(&cols), 2);
    }

    #[test]
    fn kernel_basis_simple() {
        let cols = vec![vec![-1, 1], vec![-1, 1]];
        assert_eq!(integer_kernel_basis(&cols), vec![vec![1, -1]]);
    }

    #[test]
    fn kernel_basis_triangle() {
        // X<=>Y, Y<=>Z, Z<=>X
        let cols = vec![vec![-1, 1, 0], vec![0, -1, 1], vec![1, 0, -1]];
        assert_eq!(integer_kernel_basis(&cols), vec![vec![1, 1, 1]]);
    }

    #[test]
    fn kernel_empty_when_full_rank() {
        // X+Y<=>Z, Z<=>W over species (X,Y,Z,W)
        let cols = vec![vec![-1, -1, 1, 0], vec![0, 0, -1, 1]];
        assert!(integer_kernel_basis(&cols).is_empty());
    }

    #[test]
    fn kernel_vectors_are_primitive_with_positive_lead() {
        let cols = vec![vec![-2, 2], vec![-1, 1]];
        let basis = integer_kernel_basis(&cols);
        assert_eq!(basis, vec![vec![1, -2]]);
    }

    #[test]
    fn mass_vector_found_when_conserving() {
        // {X<=>Y, 2X<=>X+Y}
        let cols = vec![vec![-1, 1], vec![-1, 1]];
        let rho = mass_vector(&cols, 2).unwrap();
        assert!(rho.iter().all(|p| *p >= Rat::one()));
        assert!(stiemke_certificate(&cols, 2).is_none());
    }

    #[test]
    fn mass_vector_absent_with_certificate() {
        // {X<=>Y, Y<=>2X}: rho1=rho2 and rho2=2rho1 force rho=0
        let cols = vec![vec![-1, 1], vec![2, -1]];
        assert!(mass_vector(&cols, 2).is_none());
        let y = stiemke_certificate(&cols, 2).unwrap();
        // check gamma.y >= 0 and != 0
        let mut prod = vec![Rat::zero(); 2];
        for (step, col) in cols.iter().enumerate() {
            for (s, &g) in col.iter().enumerate() {
                prod[s] = prod[s] + rat(g) * y[step];
            }
        }
        assert!(prod.iter().all(|v| *v >= Rat::zero()));
        assert!(prod.iter().any(|v| *v > Rat::zero()));
    }

    #[test]
    fn mass_vector_unbalanced_coefficients() {
        // X <=> 2Y conserves with rho = (2, 1)
        let cols = vec![vec![-1, 2]];
        let rho = mass_vector(&cols, 2).unwrap();
        let dot = rat(-1) * rho[0] + rat(2) * rho[1];
        assert!(dot.is_zero());
    }

    #[test]
    fn simplex_picks_minimal_sum() {
        // rho^T gamma = 0 for single step X <=> Y: rho1 = rho2, minimal is (1,1)
        let cols = vec![vec![-1, 1]];
        let rho = mass_vector(&cols, 2).unwrap();
        assert_eq!(rho, vec![Rat::one(), Rat::one()]);
    }
}
