use std::collections::BTreeMap;

use num_complex::Complex64;

use super::basis::{DensityMatrix, FockBasis};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{LatticeSpec, ModelParams};

pub const DEFAULT_DIMENSION_CAP: usize = 4096;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Sparse row of a basis-space operator.
type Row = Vec<(usize, Complex64)>;

/// Matrix-free Lindblad generator
///
/// `L rho = -i (K rho - rho K^dag) + gamma sum_j a_j rho a_j^dag`
///
/// with the non-Hermitian `K = H' - i gamma/2 sum_j a_j^dag a_j`. In a
/// displaced basis `H'` is the Hamiltonian written in `c_j = a_j + beta_j`
/// plus `i gamma/2 (beta* a - beta a^dag)` from the displaced jump
/// operators. Only `K` (sparse, dimension^2 entries at most) is stored.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub basis: FockBasis,
    pub gamma: f64,
    dim: usize,
    k_rows: Vec<Row>,
    /// Row `c` of `K`, conjugated, for the right multiplication.
    k_conj: Vec<Row>,
    pub execution: Execution,
}

/// Builds the generator of the driven-dissipative Bose-Hubbard master
/// equation with Hamiltonian
///
/// `H = sum_j [-Delta n_j + U/2 a_j^dag^2 a_j^2 + F (a_j + a_j^dag)] - J sum_j sum_{j' in nn(j)} a_j^dag a_j'`.
///
/// The hopping sum runs over the neighbor table, so every bond of a ring or
/// torus with `L >= 3` appears once as `a_j^dag a_j' + h.c.`.
pub fn build_liouvillian(params: &ModelParams, lattice: &LatticeSpec, basis: &FockBasis, cap: usize) -> Result<Liouvillian> {
    params.check_lattice(lattice)?;
    if basis.n_sites != lattice.n_sites() {
        return Err(Error::SiteMismatch { expected: lattice.n_sites(), got: basis.n_sites });
    }
    let dim = basis.dimension().unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionCap { dimension: dim, cap });
    }
    let l = basis.levels();

    // Local (single-site) parts of K.
    let mut local: Vec<nalgebra::DMatrix<Complex64>> = Vec::with_capacity(basis.n_sites);
    let a = basis.annihilator();
    let ad = a.adjoint();
    for j in 0..basis.n_sites {
        let beta = basis.displacement[j];
        let c = basis.mode(j);
        let cd = c.adjoint();
        let mut h = (&cd * &c) * Complex64::new(-params.delta, 0.0)
            + (&cd * &cd * &c * &c) * Complex64::new(0.5 * params.u, 0.0)
            + (&c + &cd) * Complex64::new(params.f, 0.0);
        // displaced jump operators
        h += (&a * beta.conj() - &ad * beta) * (I * (0.5 * params.gamma));
        // damping
        h += (&ad * &a) * Complex64::new(0.0, -0.5 * params.gamma);
        local.push(h);
    }
    // hopping: -J c_j^dag c_j' = -J (a_j^dag a_j' + beta_j* a_j' + beta_j' a_j^dag + const)
    let mut bonds: Vec<(usize, usize)> = Vec::new();
    for (j, jp) in lattice.directed_bonds() {
        let hop = Complex64::new(-params.j_hop, 0.0);
        if j == jp {
            let c = basis.mode(j);
            local[j] += (c.adjoint() * &c) * hop;
        } else {
            local[jp] += &a * (hop * basis.displacement[j].conj());
            local[j] += &ad * (hop * basis.displacement[jp]);
            bonds.push((j, jp));
        }
    }

    let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); dim];
    for (site, h) in local.iter().enumerate() {
        let stride = basis.stride(site);
        for col in 0..dim {
            let n = basis.digit(col, site);
            let base = col - n * stride;
            for m in 0..l {
                let v = h[(m, n)];
                if v != ZERO {
                    *rows[base + m * stride].entry(col).or_insert(ZERO) += v;
                }
            }
        }
    }
    for &(j, jp) in &bonds {
        let (sj, sjp) = (basis.stride(j), basis.stride(jp));
        for col in 0..dim {
            let (nj, njp) = (basis.digit(col, j), basis.digit(col, jp));
            if njp == 0 || nj == basis.n_max {
                continue;
            }
            let v = -params.j_hop * ((njp * (nj + 1)) as f64).sqrt();
            *rows[col - sjp + sj].entry(col).or_insert(ZERO) += Complex64::new(v, 0.0);
        }
    }
    let k_rows: Vec<Row> = rows.into_iter().map(|r| r.into_iter().filter(|(_, v)| *v != ZERO).collect()).collect();
    let k_conj = k_rows.iter().map(|r| r.iter().map(|&(c, v)| (c, v.conj())).collect()).collect();
    Ok(Liouvillian { basis: basis.clone(), gamma: params.gamma, dim, k_rows, k_conj, execution: Execution::default() })
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.k_rows.iter().map(Vec::len).sum()
    }

    /// Upper bound on the spectral radius of the superoperator.
    pub fn norm_bound(&self) -> f64 {
        let row_max = self.k_rows.iter().map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
        let mut col = vec![0.0; self.dim];
        for r in &self.k_rows {
            for &(c, v) in r {
                col[c] += v.norm();
            }
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        2.0 * row_max.max(col_max) + self.gamma * (self.basis.n_sites * self.basis.n_max) as f64
    }

    /// Writes `L rho` into `out`.
    pub fn apply(&self, rho: &DensityMatrix, out: &mut DensityMatrix) {
        debug_assert_eq!(rho.dim, self.dim);
        let d = self.dim;
        let basis = &self.basis;
        let strides: Vec<usize> = (0..basis.n_sites).map(|j| basis.stride(j)).collect();
        let src = &rho.data;
        self.execution.for_each_chunk_mut(&mut out.data, d, |r, row| {
            row.iter_mut().for_each(|v| *v = ZERO);
            // K rho
            for &(cp, k) in &self.k_rows[r] {
                let s = &src[cp * d..(cp + 1) * d];
                for (o, x) in row.iter_mut().zip(s) {
                    *o += k * x;
                }
            }
            // - rho K^dag
            let rr = &src[r * d..(r + 1) * d];
            for (c, o) in row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for &(cp, kc) in &self.k_conj[c] {
                    acc += rr[cp] * kc;
                }
                *o -= acc;
            }
            // -i (...)
            for o in row.iter_mut() {
                *o = Complex64::new(o.im, -o.re);
            }
            // gamma a_j rho a_j^dag
            for (j, &sj) in strides.iter().enumerate() {
                let nr = basis.digit(r, j);
                if nr == basis.n_max {
                    continue;
                }
                let src_row = &src[(r + sj) * d..(r + sj + 1) * d];
                let fr = self.gamma * ((nr + 1) as f64).sqrt();
                for (c, o) in row.iter_mut().enumerate() {
                    let nc = basis.digit(c, j);
                    if nc < basis.n_max {
                        *o += src_row[c + sj] * (fr * ((nc + 1) as f64).sqrt());
                    }
                }
            }
        });
        out.time = rho.time;
    }

    /// Dense `dim^2 x dim^2` superoperator, column `r * dim + c` holding
    /// `L |r><c|`. Small systems only.
    pub fn dense_superoperator(&self) -> nalgebra::DMatrix<Complex64> {
        let d2 = self.dim * self.dim;
        let mut m = nalgebra::DMatrix::zeros(d2, d2);
        let mut e = DensityMatrix::zeros(self.dim);
        let mut out = DensityMatrix::zeros(self.dim);
        for k in 0..d2 {
            e.data[k] = Complex64::new(1.0, 0.0);
            self.apply(&e, &mut out);
            for (i, v) in out.data.iter().enumerate() {
                m[(i, k)] = *v;
            }
            e.data[k] = ZERO;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeKind;

    fn single() -> LatticeSpec {
        LatticeSpec::wrapped(LatticeKind::Ring, 1).unwrap()
    }

    fn params(delta: f64, u: f64, f: f64) -> ModelParams {
        ModelParams { delta, u, f, j_hop: 0.0, gamma: 1.0, z: 2 }
    }

    /// Reference generator from explicit dense operators: an independent
    /// route through the full Lindblad formula.
    fn dense_reference(p: &ModelParams, lat: &LatticeSpec, basis: &FockBasis, rho: &DensityMatrix) -> DensityMatrix {
        use nalgebra::DMatrix;
        let d = basis.dimension().unwrap();
        let l = basis.levels();
        let site_op = |j: usize, o: &DMatrix<Complex64>| {
            DMatrix::from_fn(d, d, |r, c| {
                let same = (0..basis.n_sites).filter(|&k| k != j).all(|k| basis.digit(r, k) == basis.digit(c, k));
                if same {
                    o[(basis.digit(r, j), basis.digit(c, j))]
                } else {
                    ZERO
                }
            })
        };
        let a1 = DMatrix::from_fn(l, l, |r, c| if c == r + 1 { Complex64::new((c as f64).sqrt(), 0.0) } else { ZERO });
        let modes: Vec<DMatrix<Complex64>> = (0..basis.n_sites)
            .map(|j| site_op(j, &a1) + DMatrix::identity(d, d) * basis.displacement[j])
            .collect();
        let mut h = DMatrix::zeros(d, d);
        for c in &modes {
            let cd = c.adjoint();
            h += (&cd * c) * Complex64::new(-p.delta, 0.0);
            h += (&cd * &cd * c * c) * Complex64::new(0.5 * p.u, 0.0);
            h += (c + &cd) * Complex64::new(p.f, 0.0);
        }
        for (j, jp) in lat.directed_bonds() {
            h += (modes[j].adjoint() * &modes[jp]) * Complex64::new(-p.j_hop, 0.0);
        }
        let r = DMatrix::from_row_slice(d, d, &rho.data);
        let mut out = (&h * &r - &r * &h) * Complex64::new(0.0, -1.0);
        for c in &modes {
            let cd = c.adjoint();
            let n = &cd * c;
            out += (c * &r * &cd - (&n * &r + &r * &n) * Complex64::new(0.5, 0.0)) * Complex64::new(p.gamma, 0.0);
        }
        let mut res = DensityMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                res.data[i * d + k] = out[(i, k)];
            }
        }
        res
    }

    fn random_rho(d: usize, seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rho = DensityMatrix::zeros(d);
        for v in rho.data.iter_mut() {
            *v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        rho
    }

    #[test]
    fn matches_dense_reference_plain_and_displaced() {
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.3, 0.7, 0.9).unwrap();
        for basis in [FockBasis::new(2, 4), FockBasis::displaced(2, 4, Complex64::new(0.4, -0.9))] {
            let liou = build_liouvillian(&p, &lat, &basis, DEFAULT_DIMENSION_CAP).unwrap();
            let rho = random_rho(25, 1);
            let mut out = DensityMatrix::zeros(25);
            liou.apply(&rho, &mut out);
            let reference = dense_reference(&p, &lat, &basis, &rho);
            let worst = out.data.iter().zip(&reference.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(worst < 1e-12, "displaced={} worst={worst}", basis.is_displaced());
        }
    }

    #[test]
    fn ring_bonds_are_counted_once() {
        let lat = LatticeSpec::ring(3).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.0, 0.0, 0.0, 0.9).unwrap();
        let basis = FockBasis::new(3, 1);
        let liou = build_liouvillian(&p, &lat, &basis, 100).unwrap();
        // <100| K |010> = -J exactly once
        let r = basis.index_of(&[1, 0, 0]);
        let c = basis.index_of(&[0, 1, 0]);
        let v: Complex64 = liou.k_rows[r].iter().filter(|(k, _)| *k == c).map(|(_, v)| *v).sum();
        assert!((v.re + 0.45).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn trace_is_preserved() {
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.1, 0.0, 0.9).unwrap();
        let basis = FockBasis::new(2, 5);
        let liou = build_liouvillian(&p, &lat, &basis, 1000).unwrap();
        let d = basis.dimension().unwrap();
        let mut rho = DensityMatrix::zeros(d);
        for i in 0..d {
            rho.data[i * d + i] = Complex64::new(1.0 / d as f64 * (1.0 + i as f64 % 3.0), 0.0);
        }
        let mut out = DensityMatrix::zeros(d);
        liou.apply(&rho, &mut out);
        assert!(out.trace().norm() < 1e-12);
        let p = p.with_drive(1.3);
        let liou = build_liouvillian(&p, &lat, &FockBasis::displaced(2, 5, Complex64::new(0.3, 0.2)), 1000).unwrap();
        liou.apply(&random_rho(d, 4), &mut out);
        assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn diagonal_states_only_decay_without_coherent_terms() {
        let lat = single();
        let p = ModelParams { gamma: 1e-300, ..params(0.3, 0.0, 0.0) };
        let basis = FockBasis::new(1, 6);
        let liou = build_liouvillian(&p, &lat, &basis, 100).unwrap();
        let rho = DensityMatrix::basis_state(&basis, &[3]);
        let mut out = DensityMatrix::zeros(7);
        liou.apply(&rho, &mut out);
        assert!(out.l1_norm() < 1e-250);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let lat = LatticeSpec::ring(4).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.0, 0.9).unwrap();
        let err = build_liouvillian(&p, &lat, &FockBasis::new(4, 10), 4096).unwrap_err();
        assert!(matches!(err, Error::DimensionCap { dimension: 14641, cap: 4096 }));
        assert!(build_liouvillian(&p, &lat, &FockBasis::new(3, 2), 4096).is_err());
    }

    #[test]
    fn parallel_and_sequential_apply_agree() {
        let lat = LatticeSpec::wrapped(LatticeKind::Ring, 2).unwrap();
        let p = ModelParams::for_lattice(&lat, 0.1, 0.1, 1.0, 0.9).unwrap();
        let mut liou = build_liouvillian(&p, &lat, &FockBasis::new(2, 6), 1000).unwrap();
        let rho = random_rho(49, 3);
        let mut a = DensityMatrix::zeros(49);
        let mut b = DensityMatrix::zeros(49);
        liou.apply(&rho, &mut a);
        liou.execution = Execution::Sequential;
        liou.apply(&rho, &mut b);
        assert_eq!(a, b);
    }
}
