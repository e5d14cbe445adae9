//! Exact diagonalization of small systems.
//!
//! States are Kronecker products over lattice sites in site-index order,
//! site 0 most significant. The local basis digit j stands for the S³
//! eigenvalue m = j − S. Every operator used is real.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::weights::{Field, Spin};
use crate::{Error, Result};

/// Largest Hilbert-space dimension the oracle accepts.
pub const MAX_DIM: usize = 4096;

/// A real operator on ⊗_x C^{2S+1}.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
    pub spin: Spin,
    pub sites: usize,
}

fn dimension(spin: Spin, sites: usize) -> Result<usize> {
    let theta = spin.theta();
    let mut dim = 1usize;
    for _ in 0..sites {
        dim = dim.saturating_mul(theta);
        if dim > MAX_DIM {
            return Err(Error::DimensionBudget { dim, max: MAX_DIM });
        }
    }
    Ok(dim)
}

/// Place value of `site` in a basis index.
fn stride(spin: Spin, sites: usize, site: usize) -> usize {
    spin.theta().pow((sites - 1 - site) as u32)
}

fn digit(spin: Spin, sites: usize, state: usize, site: usize) -> usize {
    (state / stride(spin, sites, site)) % spin.theta()
}

fn check_field(lattice: &Lattice, field: &Field) -> Result<()> {
    if field.len() != lattice.len() {
        return Err(Error::pre(format!("field has {} entries for {} sites", field.len(), lattice.len())));
    }
    Ok(())
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::pre(format!("u must lie in [0, 1], got {u}")));
    }
    Ok(())
}

fn add_field(h: &mut DMatrix<f64>, spin: Spin, sites: usize, field: &Field) {
    let s = spin.value();
    for state in 0..h.nrows() {
        let mut e = 0.0;
        for (site, hx) in field.values().iter().enumerate() {
            e -= hx * (digit(spin, sites, state, site) as f64 - s);
        }
        h[(state, state)] += e;
    }
}

/// H = −Σ_{xy} (u T_xy + (1−u) Q_xy − 1) − Σ_x h_x S³_x.
pub fn build_hamiltonian_general(lattice: &Lattice, spin: Spin, u: f64, field: &Field) -> Result<DenseOperator> {
    check_u(u)?;
    check_field(lattice, field)?;
    let n = lattice.len();
    let dim = dimension(spin, n)?;
    let theta = spin.theta();
    let mut h = DMatrix::zeros(dim, dim);
    for &(x, y) in lattice.edges() {
        let (sx, sy) = (stride(spin, n, x), stride(spin, n, y));
        for state in 0..dim {
            let a = (state / sx) % theta;
            let b = (state / sy) % theta;
            h[(state, state)] += 1.0;
            // T|a,b> = |b,a>
            let swapped = state + b * sx + a * sy - a * sx - b * sy;
            h[(swapped, state)] -= u;
            // <a,b|Q|c,d> = δ_ab δ_cd
            if a == b {
                let base = state - a * sx - a * sy;
                for c in 0..theta {
                    h[(base + c * sx + c * sy, state)] -= 1.0 - u;
                }
            }
        }
    }
    add_field(&mut h, spin, n, field);
    Ok(DenseOperator { matrix: h, spin, sites: n })
}

/// H = −2 Σ_{xy} (S¹S¹ + (2u−1) S²S² + S³S³ − ¼) − Σ_x h_x S³_x for S = ½.
pub fn build_hamiltonian_spin_half(lattice: &Lattice, u: f64, field: &Field) -> Result<DenseOperator> {
    check_u(u)?;
    check_field(lattice, field)?;
    let spin = Spin::HALF;
    let n = lattice.len();
    let dim = dimension(spin, n)?;
    let mut h = DMatrix::zeros(dim, dim);
    let c2 = 2.0 * u - 1.0;
    for &(x, y) in lattice.edges() {
        let (sx, sy) = (stride(spin, n, x), stride(spin, n, y));
        for state in 0..dim {
            let mx = ((state / sx) % 2) as f64 - 0.5;
            let my = ((state / sy) % 2) as f64 - 0.5;
            h[(state, state)] -= 2.0 * (mx * my - 0.25);
            // S¹ = (S⁺+S⁻)/2 and S² = (S⁺−S⁻)/2i flip one spin each with matrix
            // element ½; S¹S¹ gives ¼ for every double flip, S²S² gives −¼ when
            // both spins move the same way and +¼ when they move oppositely.
            let flipped = state ^ sx ^ sy;
            let same_way = mx == my;
            let s2s2 = if same_way { -0.25 } else { 0.25 };
            h[(flipped, state)] -= 2.0 * (0.25 + c2 * s2s2);
        }
    }
    add_field(&mut h, spin, n, field);
    Ok(DenseOperator { matrix: h, spin, sites: n })
}

fn pair_operator(spin: Spin, f: impl Fn(usize, usize, &mut DMatrix<f64>, usize)) -> DMatrix<f64> {
    let theta = spin.theta();
    let mut m = DMatrix::zeros(theta * theta, theta * theta);
    for a in 0..theta {
        for b in 0..theta {
            f(a, b, &mut m, theta);
        }
    }
    m
}

/// T on C^{2S+1} ⊗ C^{2S+1}.
pub fn transposition(spin: Spin) -> DMatrix<f64> {
    pair_operator(spin, |a, b, m, t| m[(b * t + a, a * t + b)] = 1.0)
}

/// Q on C^{2S+1} ⊗ C^{2S+1}.
pub fn q_operator(spin: Spin) -> DMatrix<f64> {
    pair_operator(spin, |a, c, m, t| m[(a * t + a, c * t + c)] = 1.0)
}

/// Total magnetization Σ_x S³_x.
pub fn total_s3(spin: Spin, sites: usize) -> Result<DMatrix<f64>> {
    let dim = dimension(spin, sites)?;
    let s = spin.value();
    Ok(DMatrix::from_diagonal(&DVector::from_fn(dim, |state, _| {
        (0..sites).map(|site| digit(spin, sites, state, site) as f64 - s).sum()
    })))
}

/// v ↦ S¹_site v.
fn apply_s1(spin: Spin, sites: usize, site: usize, v: &[f64], out: &mut [f64]) {
    let st = stride(spin, sites, site);
    let s = spin.value();
    let c = spin.casimir();
    let top = spin.twice() as usize;
    out.fill(0.0);
    for (state, &amp) in v.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let j = (state / st) % spin.theta();
        let m = j as f64 - s;
        if j < top {
            out[state + st] += 0.5 * (c - m * (m + 1.0)).sqrt() * amp;
        }
        if j > 0 {
            out[state - st] += 0.5 * (c - m * (m - 1.0)).sqrt() * amp;
        }
    }
}

/// Eigendecomposition of a Hamiltonian, reused across observables.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub spin: Spin,
    pub sites: usize,
    ground: f64,
}

impl Spectrum {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        let asym = (&h.matrix - h.matrix.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::pre(format!("operator is not symmetric (max asymmetry {asym:e})")));
        }
        let eig = SymmetricEigen::new(h.matrix.clone());
        let ground = eig.eigenvalues.min();
        Ok(Spectrum { energies: eig.eigenvalues, vectors: eig.eigenvectors, spin: h.spin, sites: h.sites, ground })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Σ_i e^{−β(λ_i − λ_min)}.
    fn shifted_partition(&self, beta: f64) -> f64 {
        self.energies.iter().map(|l| (-beta * (l - self.ground)).exp()).sum()
    }

    /// Tr e^{−βH}.
    pub fn partition(&self, beta: f64) -> f64 {
        (-beta * self.ground).exp() * self.shifted_partition(beta)
    }

    /// Vᵀ S¹_site V.
    fn s1_eigenbasis(&self, site: usize) -> DMatrix<f64> {
        let dim = self.dim();
        let mut av = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let v = self.vectors.column(col);
            let mut out = vec![0.0; dim];
            apply_s1(self.spin, self.sites, site, v.as_slice(), &mut out);
            av.column_mut(col).copy_from_slice(&out);
        }
        self.vectors.transpose() * av
    }

    /// Tr(S¹_a e^{−(β−t)H} S¹_b e^{−tH}) / Z.
    pub fn schwinger(&self, beta: f64, t: f64, a: usize, b: usize) -> Result<f64> {
        if !(0.0..=beta).contains(&t) {
            return Err(Error::pre(format!("t = {t} outside [0, beta]")));
        }
        for site in [a, b] {
            if site >= self.sites {
                return Err(Error::pre(format!("site {site} outside the lattice")));
            }
        }
        let sa = self.s1_eigenbasis(a);
        let sb = if a == b { sa.clone() } else { self.s1_eigenbasis(b) };
        let wt: Vec<f64> = self.energies.iter().map(|l| (-t * (l - self.ground)).exp()).collect();
        let wr: Vec<f64> = self.energies.iter().map(|l| (-(beta - t) * (l - self.ground)).exp()).collect();
        let mut sum = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                sum += sa[(i, j)] * wr[j] * sb[(j, i)] * wt[i];
            }
        }
        Ok(sum / self.shifted_partition(beta))
    }

    pub fn two_point(&self, beta: f64, a: usize, b: usize) -> Result<f64> {
        self.schwinger(beta, 0.0, a, b)
    }
}

/// Z(β) = Tr e^{−βH}.
pub fn exact_partition(h: &DenseOperator, beta: f64) -> Result<f64> {
    Ok(Spectrum::new(h)?.partition(beta))
}

/// ⟨S¹_a S¹_b⟩ = Tr(S¹_a S¹_b e^{−βH}) / Z.
pub fn exact_two_point(h: &DenseOperator, beta: f64, a: usize, b: usize) -> Result<f64> {
    Spectrum::new(h)?.two_point(beta, a, b)
}

/// Tr(S¹_a e^{−(β−t)H} S¹_b e^{−tH}) / Z.
pub fn exact_schwinger(h: &DenseOperator, beta: f64, t: f64, a: usize, b: usize) -> Result<f64> {
    Spectrum::new(h)?.schwinger(beta, t, a, b)
}

/// A uniform-field S = ½ chain {−L/2, …, L/2}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub side: u32,
    pub u: f64,
    pub beta: f64,
    pub h: f64,
}

/// Exact ⟨S¹₀ S¹ₓ⟩ for ‖x‖ = 1, …, L/2 along the positive half of the chain.
pub fn decay_profile(p: &ChainParams) -> Result<Vec<(u32, f64)>> {
    let lattice = Lattice::new_box(1, p.side)?;
    if lattice.len() > 10 {
        return Err(Error::pre(format!("decay profile is limited to 10 sites, got {}", lattice.len())));
    }
    let h = build_hamiltonian_spin_half(&lattice, p.u, &Field::new(vec![p.h; lattice.len()])?)?;
    let spectrum = Spectrum::new(&h)?;
    let origin = lattice.origin();
    (1..=(p.side / 2) as i32)
        .map(|r| {
            let x = lattice.require_site(&[r])?;
            Ok((r as u32, spectrum.two_point(p.beta, origin, x)?))
        })
        .collect()
}
