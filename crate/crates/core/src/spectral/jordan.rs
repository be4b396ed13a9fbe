//! Real Jordan decomposition of `Dα`.
//!
//! The primary decomposition `L(G) = ⊕ ker p(Dα)^m` over the irreducible
//! factors `p` of the characteristic polynomial is exact. Jordan chains are then
//! computed in floating point inside each primary component, whose
//! eigenvalues are the (simple) roots of a single irreducible `p`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::poly::Poly;

use super::Automorphism;

const EIGEN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlockKind {
    /// Basis `w1, …, ws` with `Dα w_i = λ w_i + w_{i+1}`.
    Real,
    /// Basis `w1, w1', …, ws, ws'` for `λ = a + ib`, `b > 0`.
    Complex,
}

#[derive(Clone, Debug, Serialize)]
pub struct JordanBlock {
    pub kind: BlockKind,
    /// `(a, b)` with `λ = a + ib`; `b = 0` for real blocks.
    pub eigenvalue: (f64, f64),
    /// Chain length `s`.
    pub size: usize,
    /// Real basis vectors in the order listed on [`BlockKind`].
    pub basis: Vec<Vec<f64>>,
    /// Irreducible factor of the characteristic polynomial owning this block.
    pub factor: String,
}

impl JordanBlock {
    pub fn modulus(&self) -> f64 {
        self.eigenvalue.0.hypot(self.eigenvalue.1)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The block matrix `J` in its own basis.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let (a, b) = self.eigenvalue;
        let mut j = DMatrix::zeros(n, n);
        match self.kind {
            BlockKind::Real => {
                for i in 0..n {
                    j[(i, i)] = a;
                    if i + 1 < n {
                        j[(i + 1, i)] = 1.0;
                    }
                }
            }
            BlockKind::Complex => {
                for i in 0..self.size {
                    let (w, wp) = (2 * i, 2 * i + 1);
                    j[(w, w)] = a;
                    j[(wp, w)] = b;
                    j[(w, wp)] = -b;
                    j[(wp, wp)] = a;
                    if i + 1 < self.size {
                        j[(w + 2, w)] = 1.0;
                        j[(wp + 2, wp)] = 1.0;
                    }
                }
            }
        }
        j
    }
}

/// Blocks ordered by `|λ|`, then rotation angle, then factor order.
#[derive(Clone, Debug, Serialize)]
pub struct JordanSplit {
    pub blocks: Vec<JordanBlock>,
    pub unstable_basis: Vec<Vec<f64>>,
    pub stable_basis: Vec<Vec<f64>>,
    pub central_basis: Vec<Vec<f64>>,
    /// `σ_max / σ_min` of the assembled basis.
    pub condition: f64,
}

impl JordanSplit {
    /// Columns are the block bases in order.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<&Vec<f64>> = self.blocks.iter().flat_map(|b| b.basis.iter()).collect();
        let d = cols.first().map_or(0, |c| c.len());
        DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r])
    }

    /// Block-diagonal assembly of the block matrices.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let n: usize = self.blocks.iter().map(JordanBlock::dim).sum();
        let mut j = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let m = b.matrix();
            j.view_mut((off, off), (b.dim(), b.dim())).copy_from(&m);
            off += b.dim();
        }
        j
    }

    pub fn unstable_blocks(&self) -> impl Iterator<Item = &JordanBlock> {
        self.blocks.iter().filter(|b| b.modulus() > 1.0 + EIGEN_TOL)
    }
}

/// Exact primary decomposition followed by numerical real Jordan chains.
pub fn jordan_split(aut: &Automorphism) -> Result<JordanSplit> {
    let d = aut.dim();
    let m = aut.matrix();
    let mf = m.to_f64();
    let mut blocks: Vec<(usize, JordanBlock)> = Vec::new();
    let mut worst = 1.0f64;
    for (p, mult) in aut.charpoly().factor() {
        let kernel = m.eval_poly(&p.pow(mult)).nullspace();
        let k = kernel.len();
        debug_assert_eq!(k, p.degree() * mult as usize);
        let basis = QMatrix::from_columns(&kernel);
        let restricted = restrict(m, &basis);
        let bf = basis.to_f64();
        let bc = bf.map(|x| Complex64::new(x, 0.0));
        let restricted_f = restricted.to_f64();
        let restricted_c = restricted_f.map(|x| Complex64::new(x, 0.0));
        for root in p.complex_roots() {
            if root.im < -EIGEN_TOL * root.norm().max(1.0) {
                continue;
            }
            let is_real = root.im.abs() <= EIGEN_TOL * root.norm().max(1.0);
            let block_list: Vec<JordanBlock> = if is_real {
                let (chains, cond) = jordan_chains(&restricted_f, root.re, mult as usize)?;
                worst = worst.max(cond);
                chains
                    .into_iter()
                    .map(|chain| {
                        let lifted = normalize_chain(chain.iter().map(|v| &bf * v).collect());
                        JordanBlock {
                            kind: BlockKind::Real,
                            eigenvalue: (root.re, 0.0),
                            size: lifted.len(),
                            basis: lifted.iter().map(|v| v.iter().copied().collect()).collect(),
                            factor: p.to_string(),
                        }
                    })
                    .collect()
            } else {
                let (chains, cond) = jordan_chains(&restricted_c, root, mult as usize)?;
                worst = worst.max(cond);
                chains
                    .into_iter()
                    .map(|chain| {
                        let lifted = normalize_chain(chain.iter().map(|v| &bc * v).collect());
                        JordanBlock {
                            kind: BlockKind::Complex,
                            eigenvalue: (root.re, root.im),
                            size: lifted.len(),
                            basis: lifted
                                .iter()
                                .flat_map(|v| {
                                    [v.iter().map(|z| z.re).collect::<Vec<_>>(), v.iter().map(|z| -z.im).collect()]
                                })
                                .collect(),
                            factor: p.to_string(),
                        }
                    })
                    .collect()
            };
            for block in block_list {
                blocks.push((blocks.len(), block));
            }
        }
    }
    blocks.sort_by(|(ia, a), (ib, b)| {
        let key = |x: &JordanBlock| (x.modulus(), x.eigenvalue.1.atan2(x.eigenvalue.0).abs());
        let (ka, kb) = (key(a), key(b));
        ka.0.partial_cmp(&kb.0)
            .unwrap()
            .then(ka.1.partial_cmp(&kb.1).unwrap())
            .then(ia.cmp(ib))
    });
    let blocks: Vec<JordanBlock> = blocks.into_iter().map(|(_, b)| b).collect();
    let mut split = JordanSplit {
        unstable_basis: Vec::new(),
        stable_basis: Vec::new(),
        central_basis: Vec::new(),
        condition: 1.0,
        blocks,
    };
    for b in &split.blocks {
        let target = if b.modulus() > 1.0 + EIGEN_TOL {
            &mut split.unstable_basis
        } else if b.modulus() < 1.0 - EIGEN_TOL {
            &mut split.stable_basis
        } else {
            &mut split.central_basis
        };
        target.extend(b.basis.iter().cloned());
    }
    let bm = split.basis_matrix();
    if bm.ncols() != d {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let sv = bm.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    split.condition = cond.max(worst);
    let residual = (&mf * &bm - &bm * split.block_matrix()).amax();
    if !cond.is_finite() || cond > 1e10 || residual > 1e-9 * mf.amax().max(1.0) {
        return Err(Error::IllConditioned { condition: split.condition });
    }
    Ok(split)
}

/// Matrix of `m` restricted to the invariant subspace spanned by the columns of `basis`.
fn restrict(m: &QMatrix, basis: &QMatrix) -> QMatrix {
    let bt = basis.transpose();
    let gram_inv = bt.mul(basis).inverse().expect("basis columns are independent");
    gram_inv.mul(&bt).mul(&m.mul(basis))
}

fn matrix_nullspace<T: ComplexField<RealField = f64>>(n: &DMatrix<T>, tol: f64) -> (Vec<DVector<T>>, f64) {
    let svd = n.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max().max(1.0);
    let mut null = Vec::new();
    let mut smallest_kept = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol * smax {
            null.push(vt.row(i).adjoint().into_owned());
        } else {
            smallest_kept = smallest_kept.min(s);
        }
    }
    (null, smax / smallest_kept.min(smax))
}

type Chain<T> = Vec<DVector<T>>;

/// Jordan chains `[v_1, …, v_s]` with `(R - λ) v_i = v_{i+1}` spanning the
/// generalized eigenspace of `λ`, whose dimension must equal `mult`.
fn jordan_chains<T: ComplexField<RealField = f64>>(
    r: &DMatrix<T>,
    lambda: T,
    mult: usize,
) -> Result<(Vec<Chain<T>>, f64)> {
    let k = r.nrows();
    let n = r - DMatrix::<T>::identity(k, k) * lambda;
    let tol = 1e-7;
    let mut powers = vec![DMatrix::<T>::identity(k, k)];
    let mut nullities = vec![0usize];
    let mut kernels = vec![Vec::new()];
    let mut cond = 1.0f64;
    for j in 1..=mult {
        let pj = &powers[j - 1] * &n;
        let (null, c) = matrix_nullspace(&pj, tol);
        cond = cond.max(c.min(1e300));
        nullities.push(null.len());
        kernels.push(null);
        powers.push(pj);
        if nullities[j] == mult {
            break;
        }
    }
    let top = nullities.len() - 1;
    if nullities[top] != mult {
        return Err(Error::IllConditioned { condition: cond });
    }
    let mut chains: Vec<Chain<T>> = Vec::new();
    let mut bottoms: Vec<DVector<T>> = Vec::new();
    for s in (1..=top).rev() {
        let longer = |j: usize| if j > top { 0 } else { nullities[j] - nullities[j - 1] };
        let wanted = longer(s) - longer(s + 1);
        let mut found = 0;
        for v in &kernels[s] {
            if found == wanted {
                break;
            }
            let bottom = &powers[s - 1] * v;
            if bottom.norm() < tol {
                continue;
            }
            let mut trial = bottoms.clone();
            trial.push(bottom.normalize());
            if independent(&trial) {
                bottoms = trial;
                let mut chain = vec![v.clone()];
                for _ in 1..s {
                    let next = &n * chain.last().unwrap();
                    chain.push(next);
                }
                chains.push(chain);
                found += 1;
            }
        }
        if found != wanted {
            return Err(Error::IllConditioned { condition: cond });
        }
    }
    Ok((chains, cond))
}

fn independent<T: ComplexField<RealField = f64>>(vs: &[DVector<T>]) -> bool {
    let m = DMatrix::from_columns(vs);
    let sv = m.svd(false, false).singular_values;
    sv.min() > 1e-6
}

/// Scales a chain so its top vector has unit norm and its largest entry is real positive.
fn normalize_chain<T: ComplexField<RealField = f64>>(chain: Chain<T>) -> Chain<T> {
    let top = &chain[0];
    let mut pivot = 0;
    for i in 0..top.len() {
        if top[i].clone().modulus() > top[pivot].clone().modulus() * (1.0 + 1e-9) {
            pivot = i;
        }
    }
    let phase = top[pivot].clone().unscale(top[pivot].clone().modulus());
    let scale = (phase * T::from_real(top.norm())).recip();
    chain.into_iter().map(|v| v * scale.clone()).collect()
}

/// Irreducible factors of `p` as display strings, with multiplicities.
pub fn factor_table(p: &Poly) -> Vec<(String, u32)> {
    p.factor().into_iter().map(|(f, m)| (f.to_string(), m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilmanifold::Nilmanifold;

    fn check_relations(aut: &Automorphism, split: &JordanSplit) {
        let b = split.basis_matrix();
        let r = aut.matrix().to_f64() * &b - &b * split.block_matrix();
        assert!(r.amax() <= 1e-10, "residual {}", r.amax());
    }

    #[test]
    fn cat_map_split() {
        let a = Automorphism::cat_map();
        let s = jordan_split(&a).unwrap();
        assert_eq!(s.blocks.len(), 2);
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((s.blocks[1].eigenvalue.0 - phi2).abs() < 1e-12);
        assert!((s.blocks[0].eigenvalue.0 - 1.0 / phi2).abs() < 1e-12);
        assert_eq!(s.unstable_basis.len(), 1);
        let u = &s.unstable_basis[0];
        assert!((u[1] / u[0] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(s.central_basis.is_empty());
        check_relations(&a, &s);
    }

    #[test]
    fn heisenberg_split_has_central_e3() {
        let a = Automorphism::heisenberg_cat();
        let s = jordan_split(&a).unwrap();
        assert_eq!((s.unstable_basis.len(), s.stable_basis.len(), s.central_basis.len()), (1, 1, 1));
        let c = &s.central_basis[0];
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
        check_relations(&a, &s);
    }

    #[test]
    fn identity_is_all_central() {
        let a = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[0, 1]]).unwrap();
        let s = jordan_split(&a).unwrap();
        assert_eq!(s.central_basis.len(), 2);
        assert!(s.unstable_basis.is_empty() && s.stable_basis.is_empty());
        check_relations(&a, &s);
    }

    #[test]
    fn unipotent_shear_gives_one_chain() {
        let a = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[1, 1]]).unwrap();
        let s = jordan_split(&a).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].size, 2);
        check_relations(&a, &s);
    }

    #[test]
    fn rotation_gives_complex_block() {
        let a = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[0, -1], &[1, 0]]).unwrap();
        let s = jordan_split(&a).unwrap();
        assert_eq!(s.blocks[0].kind, BlockKind::Complex);
        assert!((s.blocks[0].eigenvalue.1 - 1.0).abs() < 1e-12);
        check_relations(&a, &s);
    }

    #[test]
    fn factor_table_lists_factors() {
        let t = factor_table(Automorphism::heisenberg_cat().charpoly());
        assert_eq!(t, vec![("x - 1".to_string(), 1), ("x^2 - 3x + 1".to_string(), 1)]);
    }
}
