use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::meanfield;
use crate::model::ModelParams;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Truncated tensor-product Fock basis.
///
/// Basis index `r = sum_j n_j (n_max + 1)^j`: site 0 is the least
/// significant digit. Operators act on the displaced modes
/// `c_j = a_j + beta_j`, where `a_j` is the truncated annihilator.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    pub n_sites: usize,
    pub n_max: usize,
    pub displacement: Vec<Complex64>,
}

impl FockBasis {
    pub fn new(n_sites: usize, n_max: usize) -> Self {
        Self { n_sites, n_max, displacement: vec![ZERO; n_sites] }
    }

    pub fn displaced(n_sites: usize, n_max: usize, beta: Complex64) -> Self {
        Self { n_sites, n_max, displacement: vec![beta; n_sites] }
    }

    /// Plain Fock basis with the smallest `n_max` such that
    /// `n_mf + 6 sqrt(n_mf) < n_max`, `n_mf` the largest mean-field root.
    pub fn heuristic(params: &ModelParams, n_sites: usize) -> Self {
        let n_mf = meanfield::population_roots(params).last().copied().unwrap_or(0.0);
        let n_max = (n_mf + 6.0 * n_mf.sqrt()).floor() as usize + 1;
        Self::new(n_sites, n_max.max(4))
    }

    pub fn is_displaced(&self) -> bool {
        self.displacement.iter().any(|b| *b != ZERO)
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// `(n_max + 1)^n_sites`, or `None` on overflow.
    pub fn dimension(&self) -> Option<usize> {
        let mut d: usize = 1;
        for _ in 0..self.n_sites {
            d = d.checked_mul(self.levels())?;
        }
        Some(d)
    }

    pub(crate) fn stride(&self, site: usize) -> usize {
        self.levels().pow(site as u32)
    }

    #[inline]
    pub(crate) fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.stride(site)) % self.levels()
    }

    pub fn index_of(&self, occupations: &[usize]) -> usize {
        occupations.iter().enumerate().map(|(j, &n)| n * self.stride(j)).sum()
    }

    /// Truncated annihilator as a dense `(n_max+1)^2` matrix.
    pub(crate) fn annihilator(&self) -> DMatrix<Complex64> {
        let l = self.levels();
        DMatrix::from_fn(l, l, |r, c| if c == r + 1 { Complex64::new((c as f64).sqrt(), 0.0) } else { ZERO })
    }

    /// Displaced mode `c_j = a + beta_j` on one site.
    pub(crate) fn mode(&self, site: usize) -> DMatrix<Complex64> {
        let l = self.levels();
        self.annihilator() + DMatrix::identity(l, l) * self.displacement[site]
    }
}

/// Dense density matrix, row-major over a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Site-averaged `<a^dag a>`.
    Population,
    /// `mean_j <a^dag a^dag a a> / (mean_j <a^dag a>)^2`.
    G2,
    /// `<(-1)^(sum_j n_j)>`; plain basis only.
    Parity,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim], time: 0.0 }
    }

    /// Basis state `|r><r|`; the displaced vacuum when `r = 0`.
    pub fn basis_state(basis: &FockBasis, occupations: &[usize]) -> Self {
        let dim = basis.dimension().expect("dimension overflow");
        let mut rho = Self::zeros(dim);
        let r = basis.index_of(occupations);
        rho.data[r * dim + r] = Complex64::new(1.0, 0.0);
        rho
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        Self::basis_state(basis, &vec![0; basis.n_sites])
    }

    /// `|psi><psi|` for a normalised state vector.
    pub fn pure(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut rho = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                rho.data[r * dim + c] = psi[r] * psi[c].conj();
            }
        }
        rho
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    /// `max |rho - rho^dag|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.at(r, c) - self.at(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Entrywise L1 norm; bounds the trace norm from above.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_fn(self.dim, self.dim, |r, c| 0.5 * (self.at(r, c) + self.at(c, r).conj()));
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(rho O_j)` for a single-site operator `o` acting on `site`.
    pub(crate) fn local_expectation(&self, basis: &FockBasis, site: usize, o: &DMatrix<Complex64>) -> Complex64 {
        let stride = basis.stride(site);
        let mut acc = ZERO;
        for r in 0..self.dim {
            let nr = basis.digit(r, site);
            let base = r - nr * stride;
            for m in 0..basis.levels() {
                let om = o[(m, nr)];
                if om != ZERO {
                    acc += self.at(r, base + m * stride) * om;
                }
            }
        }
        acc
    }

    /// Copies the state into a larger cutoff with the same displacement.
    pub fn embed(&self, from: &FockBasis, to: &FockBasis) -> DensityMatrix {
        debug_assert!(from.n_sites == to.n_sites && from.displacement == to.displacement && to.n_max >= from.n_max);
        let map: Vec<usize> = (0..self.dim)
            .map(|i| (0..from.n_sites).map(|j| from.digit(i, j) * to.stride(j)).sum())
            .collect();
        let d = to.dimension().expect("checked by the caller");
        let mut out = DensityMatrix::zeros(d);
        for (r, &rr) in map.iter().enumerate() {
            for (c, &cc) in map.iter().enumerate() {
                out.data[rr * d + cc] = self.data[r * self.dim + c];
            }
        }
        out
    }

    /// Probability that `site` occupies its top retained level.
    pub fn top_level_weight(&self, basis: &FockBasis, site: usize) -> f64 {
        (0..self.dim).filter(|&r| basis.digit(r, site) == basis.n_max).map(|r| self.at(r, r).re).sum()
    }

    pub fn expectation(&self, basis: &FockBasis, observable: Observable) -> Result<f64> {
        match observable {
            Observable::Population => Ok(self.site_moments(basis).0),
            Observable::G2 => {
                let (n, n2) = self.site_moments(basis);
                Ok(n2 / (n * n))
            }
            Observable::Parity => {
                if basis.is_displaced() {
                    return Err(Error::InvalidConfig("parity needs an undisplaced basis".into()));
                }
                let p = (0..self.dim)
                    .map(|r| {
                        let total: usize = (0..basis.n_sites).map(|j| basis.digit(r, j)).sum();
                        let sign = if total % 2 == 0 { 1.0 } else { -1.0 };
                        sign * self.at(r, r).re
                    })
                    .sum();
                Ok(p)
            }
        }
    }

    /// Site-averaged `<c^dag c>` and `<c^dag c^dag c c>`.
    fn site_moments(&self, basis: &FockBasis) -> (f64, f64) {
        let mut n = 0.0;
        let mut n2 = 0.0;
        for j in 0..basis.n_sites {
            let c = basis.mode(j);
            let cd = c.adjoint();
            let num = &cd * &c;
            let pair = &cd * &cd * &c * &c;
            n += self.local_expectation(basis, j, &num).re;
            n2 += self.local_expectation(basis, j, &pair).re;
        }
        let s = basis.n_sites as f64;
        (n / s, n2 / s)
    }
}
