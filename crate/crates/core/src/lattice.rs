//! Finite boxes of Z^d and the space-time graphs built on them.
//!
//! Sites and edges are stored in lexicographic order so that every sample
//! drawn downstream is reproducible from a seed alone.

use std::collections::HashMap;

use crate::{Error, Result};

/// Upper bound on the number of sites any single lattice may hold.
pub const MAX_SITES: usize = 1 << 22;

/// True iff the coordinate sum is even.
pub fn is_even(site: &[i32]) -> bool {
    site.iter().map(|&c| c as i64).sum::<i64>().rem_euclid(2) == 0
}

/// ℓ¹ norm, used as ‖x‖ throughout the crate.
pub fn norm(site: &[i32]) -> u32 {
    site.iter().map(|c| c.unsigned_abs()).sum()
}

/// A finite region of Z^d with open boundaries and nearest-neighbour edges.
#[derive(Clone, Debug)]
pub struct Lattice {
    dim: usize,
    side: Option<u32>,
    coords: Vec<i32>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    index: HashMap<Vec<i32>, usize>,
    edge_index: HashMap<(usize, usize), usize>,
    origin: usize,
}

impl Lattice {
    /// The box {-L/2, …, L/2}^d.
    pub fn new_box(dim: usize, side: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::pre("dimension must be at least 1"));
        }
        if side < 2 || side % 2 != 0 {
            return Err(Error::pre(format!("side must be even and >= 2, got {side}")));
        }
        let width = side as usize + 1;
        let count = width
            .checked_pow(dim as u32)
            .filter(|&c| c <= MAX_SITES)
            .ok_or_else(|| Error::pre(format!("{width}^{dim} sites exceed the memory budget")))?;
        let half = (side / 2) as i32;

        let mut coords = Vec::with_capacity(count * dim);
        let mut cur = vec![-half; dim];
        for _ in 0..count {
            coords.extend_from_slice(&cur);
            // Odometer increment, last coordinate fastest.
            for axis in (0..dim).rev() {
                if cur[axis] < half {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = -half;
            }
        }
        Ok(Self::from_coords(dim, Some(side), coords))
    }

    /// An open chain of `n` sites at coordinates 0, 1, …, n−1.
    ///
    /// Boxes always have an odd number of sites per axis; this is the way to
    /// get two-site (or any even-length) systems with the origin at one end.
    pub fn segment(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::pre("segment needs at least one site"));
        }
        if n > MAX_SITES {
            return Err(Error::pre("segment exceeds the memory budget"));
        }
        Ok(Self::from_coords(1, None, (0..n as i32).collect()))
    }

    fn from_coords(dim: usize, side: Option<u32>, coords: Vec<i32>) -> Self {
        let n = coords.len() / dim;
        let index: HashMap<Vec<i32>, usize> = coords
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, c)| (c.to_vec(), i))
            .collect();

        let mut edges = Vec::new();
        let mut probe = vec![0; dim];
        for i in 0..n {
            for axis in 0..dim {
                probe.copy_from_slice(&coords[i * dim..(i + 1) * dim]);
                probe[axis] += 1;
                if let Some(&j) = index.get(&probe) {
                    edges.push((i, j));
                }
            }
        }
        let mut neighbours = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        let edge_index = edges
            .iter()
            .enumerate()
            .flat_map(|(e, &(a, b))| [((a, b), e), ((b, a), e)])
            .collect();
        let origin = index[&vec![0; dim]];
        Lattice { dim, side, coords, edges, neighbours, index, edge_index, origin }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box side L, or `None` for a segment.
    pub fn side(&self) -> Option<u32> {
        self.side
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, site: usize) -> &[i32] {
        &self.coords[site * self.dim..(site + 1) * self.dim]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, site: usize) -> &[usize] {
        &self.neighbours[site]
    }

    pub fn site_index(&self, coords: &[i32]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Resolves coordinates or fails with a precondition error.
    pub fn require_site(&self, coords: &[i32]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::pre(format!(
                "site {coords:?} has dimension {}, lattice has {}",
                coords.len(),
                self.dim
            )));
        }
        self.site_index(coords)
            .ok_or_else(|| Error::pre(format!("site {coords:?} is outside the lattice")))
    }

    /// Index of the edge joining `a` and `b`, in either orientation.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a, b)).copied()
    }

    /// Index of the site at the origin of Z^d.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn is_even(&self, site: usize) -> bool {
        is_even(self.coords(site))
    }

    pub fn norm(&self, site: usize) -> u32 {
        norm(self.coords(site))
    }
}

/// The interval graph Γ: columns of the lattice cut into `slabs` intervals of
/// width δ, periodic in time.
#[derive(Clone, Debug)]
pub struct IntervalGrid {
    lattice: Lattice,
    beta: f64,
    delta: f64,
    slabs: usize,
}

impl IntervalGrid {
    /// Fails unless β/δ is an integer to within 10⁻⁹.
    pub fn new(lattice: &Lattice, beta: f64, delta: f64) -> Result<Self> {
        if !(beta > 0.0 && delta > 0.0) {
            return Err(Error::pre("beta and delta must be positive"));
        }
        let ratio = beta / delta;
        let slabs = ratio.round();
        if (ratio - slabs).abs() > 1e-9 || slabs < 1.0 {
            return Err(Error::pre(format!("beta/delta = {ratio} is not an integer")));
        }
        Ok(IntervalGrid { lattice: lattice.clone(), beta, delta, slabs: slabs as usize })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn slabs(&self) -> usize {
        self.slabs
    }

    pub fn len(&self) -> usize {
        self.lattice.len() * self.slabs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn interval(&self, site: usize, slab: usize) -> usize {
        site * self.slabs + slab
    }

    #[inline]
    pub fn site_of(&self, interval: usize) -> usize {
        interval / self.slabs
    }

    #[inline]
    pub fn slab_of(&self, interval: usize) -> usize {
        interval % self.slabs
    }

    /// The slab containing time `t` ∈ [0, β).
    pub fn slab_at(&self, t: f64) -> usize {
        ((t / self.delta).floor() as usize).min(self.slabs - 1)
    }

    /// Neighbour multiset: lattice neighbours in the same slab, then slabs
    /// k+1 and k−1 (mod N) of the same site. For N = 2 the vertical neighbour
    /// appears twice; for N = 1 there is none.
    pub fn neighbours(&self, interval: usize) -> impl Iterator<Item = usize> + '_ {
        let site = self.site_of(interval);
        let slab = self.slab_of(interval);
        let n = self.slabs;
        let spatial = self.lattice.neighbours(site).iter().map(move |&y| y * n + slab);
        let vertical = (n > 1)
            .then(|| [site * n + (slab + 1) % n, site * n + (slab + n - 1) % n])
            .into_iter()
            .flatten();
        spatial.chain(vertical)
    }
}

/// The graph Ξ: even sites of the box [−R, R]^d times N periodic slabs, with
/// same-slab adjacency between sites at ℓ¹-distance 2.
#[derive(Clone, Debug)]
pub struct XiGraph {
    dim: usize,
    radius: u32,
    slabs: usize,
    coords: Vec<i32>,
    // Dense box index -> even-site index (u32::MAX for odd sites).
    box_to_even: Vec<u32>,
    offsets: Vec<Vec<i32>>,
}

impl XiGraph {
    pub fn new(dim: usize, radius: u32, slabs: usize) -> Result<Self> {
        if dim == 0 || radius == 0 || slabs == 0 {
            return Err(Error::pre("Xi needs d >= 1, R >= 1, N >= 1"));
        }
        let width = 2 * radius as usize + 1;
        let total = width
            .checked_pow(dim as u32)
            .filter(|&c| c.saturating_mul(slabs) <= MAX_SITES * 4)
            .ok_or_else(|| Error::pre("Xi box exceeds the memory budget"))?;
        let r = radius as i32;
        let mut coords = Vec::new();
        let mut box_to_even = vec![u32::MAX; total];
        let mut cur = vec![-r; dim];
        let mut next = 0u32;
        for slot in box_to_even.iter_mut() {
            if is_even(&cur) {
                coords.extend_from_slice(&cur);
                *slot = next;
                next += 1;
            }
            for axis in (0..dim).rev() {
                if cur[axis] < r {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = -r;
            }
        }

        let mut offsets = Vec::new();
        for i in 0..dim {
            for s in [-2, 2] {
                let mut v = vec![0; dim];
                v[i] = s;
                offsets.push(v);
            }
            for j in i + 1..dim {
                for si in [-1, 1] {
                    for sj in [-1, 1] {
                        let mut v = vec![0; dim];
                        v[i] = si;
                        v[j] = sj;
                        offsets.push(v);
                    }
                }
            }
        }
        offsets.sort();
        Ok(XiGraph { dim, radius, slabs, coords, box_to_even, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn slabs(&self) -> usize {
        self.slabs
    }

    pub fn site_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn len(&self) -> usize {
        self.site_count() * self.slabs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn site_coords(&self, site: usize) -> &[i32] {
        &self.coords[site * self.dim..(site + 1) * self.dim]
    }

    /// Even-site index of `coords`, if it lies in the box and is even.
    pub fn site_index(&self, coords: &[i32]) -> Option<usize> {
        if coords.len() != self.dim {
            return None;
        }
        let r = self.radius as i32;
        let width = 2 * self.radius as usize + 1;
        let mut flat = 0usize;
        for &c in coords {
            if c < -r || c > r {
                return None;
            }
            flat = flat * width + (c + r) as usize;
        }
        match self.box_to_even[flat] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    #[inline]
    pub fn vertex(&self, site: usize, slab: usize) -> usize {
        site * self.slabs + slab
    }

    #[inline]
    pub fn site_of(&self, vertex: usize) -> usize {
        vertex / self.slabs
    }

    #[inline]
    pub fn slab_of(&self, vertex: usize) -> usize {
        vertex % self.slabs
    }

    /// Neighbours of `vertex`, written into `out` (cleared first).
    pub fn neighbours_into(&self, vertex: usize, out: &mut Vec<usize>) {
        out.clear();
        let site = self.site_of(vertex);
        let slab = self.slab_of(vertex);
        let base = self.site_coords(site);
        let mut probe = base.to_vec();
        for off in &self.offsets {
            for ((p, b), o) in probe.iter_mut().zip(base).zip(off) {
                *p = b + o;
            }
            if let Some(y) = self.site_index(&probe) {
                out.push(self.vertex(y, slab));
            }
        }
        let n = self.slabs;
        if n > 1 {
            out.push(self.vertex(site, (slab + 1) % n));
            out.push(self.vertex(site, (slab + n - 1) % n));
        }
    }

    pub fn neighbours(&self, vertex: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.neighbours_into(vertex, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, VecDeque};

    #[test]
    fn smallest_chain() {
        let l = Lattice::new_box(1, 2).unwrap();
        assert_eq!(l.len(), 3);
        assert_eq!(l.edges().len(), 2);
        assert_eq!(l.coords(0), &[-1]);
        assert_eq!(l.coords(l.origin()), &[0]);
    }

    #[test]
    fn three_by_three_grid_has_twelve_edges() {
        let l = Lattice::new_box(2, 2).unwrap();
        assert_eq!(l.len(), 9);
        // Hand count: 3 rows * 2 horizontal + 3 columns * 2 vertical.
        assert_eq!(l.edges().len(), 12);
    }

    #[test]
    fn odd_side_and_zero_dim_rejected() {
        assert!(matches!(Lattice::new_box(1, 3), Err(Error::Precondition(_))));
        assert!(matches!(Lattice::new_box(0, 2), Err(Error::Precondition(_))));
        assert!(Lattice::new_box(2, 0).is_err());
    }

    #[test]
    fn parity() {
        assert!(is_even(&[0, 0]));
        assert!(!is_even(&[1, 0]));
        assert!(is_even(&[1, 1]));
        assert!(is_even(&[-1, 1]));
        assert!(!is_even(&[-3]));
    }

    #[test]
    fn edges_are_unit_and_bipartite() {
        for (d, side) in [(1, 6), (2, 4), (3, 2)] {
            let l = Lattice::new_box(d, side).unwrap();
            assert_eq!(l.len(), (side as usize + 1).pow(d as u32));
            let mut seen = BTreeSet::new();
            for &(a, b) in l.edges() {
                let dist: i32 = l.coords(a).iter().zip(l.coords(b)).map(|(x, y)| (x - y).abs()).sum();
                assert_eq!(dist, 1);
                assert_ne!(l.is_even(a), l.is_even(b));
                assert!(seen.insert((a.min(b), a.max(b))), "duplicate edge");
            }
            // Every in-box unit step is present.
            let expected: usize = (0..l.len())
                .map(|i| {
                    (0..d)
                        .filter(|&ax| {
                            let mut c = l.coords(i).to_vec();
                            c[ax] += 1;
                            l.site_index(&c).is_some()
                        })
                        .count()
                })
                .sum();
            assert_eq!(l.edges().len(), expected);
        }
    }

    #[test]
    fn sites_are_lexicographic() {
        let l = Lattice::new_box(2, 2).unwrap();
        let all: Vec<Vec<i32>> = (0..l.len()).map(|i| l.coords(i).to_vec()).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn segment_of_two() {
        let l = Lattice::segment(2).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.edges(), &[(0, 1)]);
        assert_eq!(l.origin(), 0);
    }

    #[test]
    fn interval_grid_slab_count() {
        let l = Lattice::new_box(1, 2).unwrap();
        assert_eq!(IntervalGrid::new(&l, 1.0, 0.25).unwrap().slabs(), 4);
        assert!(IntervalGrid::new(&l, 1.0, 0.3).is_err());
    }

    /// Brute-force neighbour rule straight from the definition.
    fn gamma_adjacent(l: &Lattice, n: usize, (x, k): (usize, usize), (y, m): (usize, usize)) -> usize {
        let spatial = usize::from(k == m && l.neighbours(x).contains(&y));
        let vertical = if x == y && n > 1 {
            usize::from((k + 1) % n == m) + usize::from((m + 1) % n == k)
        } else {
            0
        };
        spatial + vertical
    }

    #[test]
    fn gamma_neighbours_match_definition() {
        let l = Lattice::new_box(1, 2).unwrap();
        let g = IntervalGrid::new(&l, 1.0, 0.5).unwrap();
        assert_eq!(g.len(), 6);
        let mut nb: Vec<(i32, usize)> = g
            .neighbours(g.interval(l.origin(), 0))
            .map(|v| (l.coords(g.site_of(v))[0], g.slab_of(v)))
            .collect();
        nb.sort();
        assert_eq!(nb, vec![(-1, 0), (0, 1), (0, 1), (1, 0)]);

        for (d, side, n) in [(1, 4, 1), (1, 4, 2), (2, 2, 3), (2, 2, 5)] {
            let l = Lattice::new_box(d, side).unwrap();
            let g = IntervalGrid::new(&l, 1.0, 1.0 / n as f64).unwrap();
            for v in 0..g.len() {
                let got: Vec<usize> = g.neighbours(v).collect();
                assert!(!got.contains(&v), "self loop");
                for w in 0..g.len() {
                    let want = gamma_adjacent(&l, n, (g.site_of(v), g.slab_of(v)), (g.site_of(w), g.slab_of(w)));
                    assert_eq!(got.iter().filter(|&&u| u == w).count(), want);
                    let back = g.neighbours(w).filter(|&u| u == v).count();
                    assert_eq!(back, want, "asymmetric");
                }
                if n >= 3 {
                    let vertical = got.iter().filter(|&&u| g.site_of(u) == g.site_of(v)).count();
                    assert_eq!(vertical, 2);
                    assert!((2..=2 * d + 2).contains(&got.len()));
                }
            }
        }
    }

    #[test]
    fn xi_small_cases() {
        let xi = XiGraph::new(2, 1, 1).unwrap();
        assert_eq!(xi.site_count(), 5);
        let o = xi.site_index(&[0, 0]).unwrap();
        let mut nb: Vec<Vec<i32>> = xi.neighbours(xi.vertex(o, 0)).iter().map(|&v| xi.site_coords(xi.site_of(v)).to_vec()).collect();
        nb.sort();
        assert_eq!(nb, vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);

        let xi = XiGraph::new(1, 2, 2).unwrap();
        let sites: Vec<i32> = (0..xi.site_count()).map(|s| xi.site_coords(s)[0]).collect();
        assert_eq!(sites, vec![-2, 0, 2]);
        let o = xi.site_index(&[0]).unwrap();
        let v = xi.neighbours(xi.vertex(o, 0));
        assert!(v.contains(&xi.vertex(o, 1)));

        let xi = XiGraph::new(2, 1, 3).unwrap();
        for v in 0..xi.len() {
            let vertical = xi.neighbours(v).iter().filter(|&&w| xi.site_of(w) == xi.site_of(v)).count();
            assert_eq!(vertical, 2);
        }
    }

    #[test]
    fn xi_edges_are_distance_two_and_slab_connected() {
        for (d, r) in [(2, 1), (2, 3), (3, 2)] {
            let xi = XiGraph::new(d, r, 1).unwrap();
            for v in 0..xi.len() {
                let a = xi.site_coords(xi.site_of(v));
                assert!(is_even(a));
                for w in xi.neighbours(v) {
                    let b = xi.site_coords(xi.site_of(w));
                    let dist: i32 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                    assert!(dist == 0 || dist == 2);
                }
            }
            // BFS over a single slab reaches every even site.
            let mut seen = vec![false; xi.len()];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(v) = queue.pop_front() {
                for w in xi.neighbours(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            assert!(seen.iter().all(|&s| s), "d={d} R={r} not connected");
        }
    }
}
