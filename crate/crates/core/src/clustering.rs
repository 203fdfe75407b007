//! Coordination clusters and the 0/1 association maps between cluster-local
//! covariances and network-wide antenna coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netgen::LargeScaleGains;

/// Per-user base sets (ascending) plus the derived per-base user sets and
/// antenna bookkeeping. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLayout {
    bases: Vec<Vec<usize>>,
    users: Vec<Vec<usize>>,
    base_antennas: Vec<usize>,
    base_offsets: Vec<usize>,
    antenna_index: Vec<Vec<usize>>,
    antenna_owner: Vec<Vec<usize>>,
}

impl ClusterLayout {
    /// Build from per-user base sets. Sets are sorted; duplicates, empty sets
    /// and out-of-range bases are rejected.
    pub fn new(mut bases: Vec<Vec<usize>>, base_antennas: Vec<usize>) -> Result<Self> {
        let b = base_antennas.len();
        if let Some(j) = base_antennas.iter().position(|&m| m == 0) {
            return Err(Error::InvalidInput(format!("base {j} has no antennas")));
        }
        let mut base_offsets = Vec::with_capacity(b + 1);
        let mut acc = 0;
        for &m in &base_antennas {
            base_offsets.push(acc);
            acc += m;
        }
        base_offsets.push(acc);

        let mut users = vec![Vec::new(); b];
        let mut antenna_index = Vec::with_capacity(bases.len());
        let mut antenna_owner = Vec::with_capacity(bases.len());
        for (i, set) in bases.iter_mut().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidInput(format!("user {i} has an empty cluster")));
            }
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("user {i} lists a base twice: {set:?}")));
            }
            if let Some(&j) = set.iter().find(|&&j| j >= b) {
                return Err(Error::IndexOutOfRange { index: j, limit: b });
            }
            let mut idx = Vec::new();
            let mut owner = Vec::new();
            for &j in set.iter() {
                users[j].push(i);
                for a in 0..base_antennas[j] {
                    idx.push(base_offsets[j] + a);
                    owner.push(j);
                }
            }
            antenna_index.push(idx);
            antenna_owner.push(owner);
        }
        Ok(Self { bases, users, base_antennas, base_offsets, antenna_index, antenna_owner })
    }

    /// Every user served by every base.
    pub fn full(num_users: usize, base_antennas: Vec<usize>) -> Result<Self> {
        let all: Vec<usize> = (0..base_antennas.len()).collect();
        Self::new(vec![all; num_users], base_antennas)
    }

    pub fn num_users(&self) -> usize {
        self.bases.len()
    }

    pub fn num_bases(&self) -> usize {
        self.base_antennas.len()
    }

    pub fn base_antennas(&self) -> &[usize] {
        &self.base_antennas
    }

    pub fn total_antennas(&self) -> usize {
        *self.base_offsets.last().unwrap_or(&0)
    }

    /// `B_i`, ascending.
    pub fn cluster(&self, user: usize) -> &[usize] {
        &self.bases[user]
    }

    /// `K_j`, ascending.
    pub fn served_users(&self, base: usize) -> &[usize] {
        &self.users[base]
    }

    /// `M̄_i`: antennas in user `user`'s cluster.
    pub fn cluster_antennas(&self, user: usize) -> usize {
        self.antenna_index[user].len()
    }

    /// Network-wide antenna index of each row of `Q_i` (the columns of `C_i`).
    pub fn antenna_index(&self, user: usize) -> &[usize] {
        &self.antenna_index[user]
    }

    /// Base owning each row of `Q_i`.
    pub fn antenna_owner(&self, user: usize) -> &[usize] {
        &self.antenna_owner[user]
    }

    pub fn is_full(&self) -> bool {
        self.bases.iter().all(|s| s.len() == self.num_bases())
    }

    /// `E_j`: M̄ × M_j selector of base `base`'s antennas.
    pub fn selector(&self, base: usize) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.total_antennas(), self.base_antennas[base]);
        for a in 0..self.base_antennas[base] {
            e[(self.base_offsets[base] + a, a)] = 1.0;
        }
        e
    }

    /// `C_i = [E_{B_i[1]} … E_{B_i[|B_i|]}]`.
    pub fn association(&self, user: usize) -> DMatrix<f64> {
        let idx = &self.antenna_index[user];
        let mut c = DMatrix::zeros(self.total_antennas(), idx.len());
        for (col, &row) in idx.iter().enumerate() {
            c[(row, col)] = 1.0;
        }
        c
    }

    /// `C_i Q C_iᵀ`, the cluster covariance in network coordinates.
    pub fn embed(&self, user: usize, q: &CMat) -> CMat {
        let idx = &self.antenna_index[user];
        assert_eq!(q.nrows(), idx.len(), "covariance size does not match cluster");
        let m = self.total_antennas();
        let mut out = CMat::zeros(m, m);
        for (a, &ra) in idx.iter().enumerate() {
            for (b, &rb) in idx.iter().enumerate() {
                out[(ra, rb)] = q[(a, b)];
            }
        }
        out
    }

    /// `tr(E_jᵀ C_i Q C_iᵀ E_j)`: the power base `base` spends on this block.
    pub fn block_power(&self, user: usize, base: usize, q: &CMat) -> f64 {
        self.antenna_owner[user]
            .iter()
            .enumerate()
            .filter(|(_, &owner)| owner == base)
            .map(|(a, _)| q[(a, a)].re)
            .sum()
    }

    /// One line per user, `i: j1,j2,…` (0-based indices).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, set) in self.bases.iter().enumerate() {
            let list: Vec<String> = set.iter().map(|j| j.to_string()).collect();
            out.push_str(&format!("{i}: {}\n", list.join(",")));
        }
        out
    }

    pub fn from_text(text: &str, base_antennas: Vec<usize>) -> Result<Self> {
        let mut bases = Vec::new();
        for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("cluster line {}: missing ':'", line_no + 1)))?;
            let user: usize = head
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("cluster line {}: bad user index", line_no + 1)))?;
            if user != bases.len() {
                return Err(Error::InvalidInput(format!(
                    "cluster line {}: expected user {}, found {user}",
                    line_no + 1,
                    bases.len()
                )));
            }
            let set = tail
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidInput(format!("cluster line {}: bad base index", line_no + 1)))?;
            bases.push(set);
        }
        Self::new(bases, base_antennas)
    }
}

fn ranked_desc(values: impl Iterator<Item = (usize, f64)>) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> = values.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(idx, _)| idx).collect()
}

fn check_size(gains: &LargeScaleGains, cluster_size: usize, base_antennas: &[usize]) -> Result<()> {
    let b = gains.num_bases();
    if cluster_size == 0 || cluster_size > b {
        return Err(Error::InvalidInput(format!("cluster size {cluster_size} outside 1..={b}")));
    }
    if base_antennas.len() != b {
        return Err(Error::InvalidInput(format!(
            "{} antenna counts for {b} bases",
            base_antennas.len()
        )));
    }
    Ok(())
}

/// Base with the largest average gain for `user`, lowest index on ties.
pub fn home_base(gains: &LargeScaleGains, user: usize) -> usize {
    ranked_desc((0..gains.num_bases()).map(|j| (j, gains.get(user, j))))[0]
}

/// Each user picks the `cluster_size` bases with the largest average gain.
pub fn nearest_bases(
    gains: &LargeScaleGains,
    cluster_size: usize,
    base_antennas: &[usize],
) -> Result<ClusterLayout> {
    check_size(gains, cluster_size, base_antennas)?;
    let bases = (0..gains.num_users())
        .map(|i| {
            let mut order = ranked_desc((0..gains.num_bases()).map(|j| (j, gains.get(i, j))));
            order.truncate(cluster_size);
            order
        })
        .collect();
    ClusterLayout::new(bases, base_antennas.to_vec())
}

/// Each user joins its home base with the home bases of the `cluster_size - 1`
/// users that receive the most power from that home base. Shared home bases
/// collapse, so a cluster may come out smaller than `cluster_size`.
pub fn nearest_interferers(
    gains: &LargeScaleGains,
    cluster_size: usize,
    base_antennas: &[usize],
) -> Result<ClusterLayout> {
    check_size(gains, cluster_size, base_antennas)?;
    let k = gains.num_users();
    let homes: Vec<usize> = (0..k).map(|i| home_base(gains, i)).collect();
    let bases = (0..k)
        .map(|i| {
            let home = homes[i];
            let victims = ranked_desc((0..k).filter(|&u| u != i).map(|u| (u, gains.get(u, home))));
            let mut set = vec![home];
            for &u in victims.iter().take(cluster_size - 1) {
                if !set.contains(&homes[u]) {
                    set.push(homes[u]);
                }
            }
            set
        })
        .collect();
    ClusterLayout::new(bases, base_antennas.to_vec())
}

/// Copy `q` into a complex matrix (helper for tests and examples).
pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, trace_re};
    use crate::netgen::{line_gains, line_geometry};
    use proptest::prelude::*;

    fn line21() -> LargeScaleGains {
        line_gains(&line_geometry(21, 1.0, 1.0).unwrap(), 4.0).unwrap()
    }

    #[test]
    fn nearest_bases_line_examples() {
        let layout = nearest_bases(&line21(), 3, &[1; 21]).unwrap();
        assert_eq!(layout.cluster(1), &[0, 1, 2]);
        assert_eq!(layout.cluster(0), &[0, 1, 20]);
        for j in 0..21 {
            assert_eq!(layout.served_users(j).len(), 3);
        }
    }

    #[test]
    fn full_size_is_full_coordination() {
        let layout = nearest_bases(&line21(), 21, &[1; 21]).unwrap();
        assert!(layout.is_full());
        for j in 0..21 {
            assert_eq!(layout.served_users(j), (0..21).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn nearest_interferers_line_matches_neighbours() {
        let layout = nearest_interferers(&line21(), 3, &[1; 21]).unwrap();
        for i in 0..21 {
            let mut expect = vec![(i + 20) % 21, i, (i + 1) % 21];
            expect.sort_unstable();
            assert_eq!(layout.cluster(i), expect.as_slice());
        }
        let single = nearest_interferers(&line21(), 1, &[1; 21]).unwrap();
        for i in 0..21 {
            assert_eq!(single.cluster(i), &[i]);
        }
    }

    #[test]
    fn nearest_interferers_dedups_shared_homes() {
        // Users 1 and 2 both call base 1 home; user 0's two strongest victims
        // are exactly those users, so its cluster has two bases, not three.
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.01, 0.5, 1.0, 0.01, 0.4, 1.0, 0.02]);
        let gains = LargeScaleGains::new(g).unwrap();
        let layout = nearest_interferers(&gains, 3, &[1; 3]).unwrap();
        assert_eq!(layout.cluster(0), &[0, 1]);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        let gains = LargeScaleGains::new(DMatrix::from_element(2, 4, 1.0)).unwrap();
        let layout = nearest_bases(&gains, 2, &[1; 4]).unwrap();
        assert_eq!(layout.cluster(0), &[0, 1]);
        assert_eq!(home_base(&gains, 1), 0);
    }

    #[test]
    fn association_matches_worked_example() {
        let layout = ClusterLayout::new(vec![vec![0, 2, 3]], vec![1; 5]).unwrap();
        let c = layout.association(0);
        let mut expect = DMatrix::zeros(5, 3);
        expect[(0, 0)] = 1.0;
        expect[(2, 1)] = 1.0;
        expect[(3, 2)] = 1.0;
        assert_eq!(c, expect);
        let full = layout.embed(0, &CMat::identity(3, 3));
        for a in 0..5 {
            for b in 0..5 {
                let on = a == b && [0, 2, 3].contains(&a);
                assert_eq!(full[(a, b)].re, if on { 1.0 } else { 0.0 });
            }
        }
        let mut q = CMat::zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                q[(a, b)] = C64::new((a * 3 + b) as f64, 0.0);
            }
        }
        let via_matrix = real_to_complex(&c) * &q * real_to_complex(&c.transpose());
        assert_eq!(layout.embed(0, &q), via_matrix);
    }

    #[test]
    fn association_built_from_selectors() {
        let layout = ClusterLayout::new(vec![vec![2, 0], vec![1]], vec![2, 1, 3]).unwrap();
        let c = layout.association(0);
        let mut stacked = DMatrix::zeros(6, 5);
        stacked.columns_mut(0, 2).copy_from(&layout.selector(0));
        stacked.columns_mut(2, 3).copy_from(&layout.selector(2));
        assert_eq!(c, stacked);
        assert_eq!(layout.cluster_antennas(0), 5);
        assert_eq!(layout.antenna_owner(0), &[0, 0, 2, 2, 2]);
    }

    #[test]
    fn rejects_duplicates_and_bad_indices() {
        assert!(ClusterLayout::new(vec![vec![1, 1]], vec![1; 3]).is_err());
        assert!(ClusterLayout::new(vec![vec![]], vec![1; 3]).is_err());
        assert!(matches!(
            ClusterLayout::new(vec![vec![4]], vec![1; 3]),
            Err(Error::IndexOutOfRange { index: 4, limit: 3 })
        ));
        assert!(nearest_bases(&line21(), 0, &[1; 21]).is_err());
        assert!(nearest_bases(&line21(), 22, &[1; 21]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let layout = nearest_bases(&line21(), 3, &[1; 21]).unwrap();
        let text = layout.to_text();
        assert!(text.starts_with("0: 0,1,20\n1: 0,1,2\n"));
        assert_eq!(ClusterLayout::from_text(&text, vec![1; 21]).unwrap(), layout);
        assert!(ClusterLayout::from_text("0 1,2", vec![1; 3]).is_err());
    }

    fn random_layout() -> impl Strategy<Value = (ClusterLayout, Vec<CMat>)> {
        (1usize..5, 1usize..4).prop_flat_map(|(b, k)| {
            let antennas = prop::collection::vec(1usize..3, b);
            let sets = prop::collection::vec(prop::collection::btree_set(0..b, 1..=b), k);
            (antennas, sets, any::<u64>()).prop_map(|(antennas, sets, seed)| {
                let layout =
                    ClusterLayout::new(sets.into_iter().map(|s| s.into_iter().collect()).collect(), antennas)
                        .unwrap();
                let mut state = seed | 1;
                let mut next = || {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state % 2000) as f64 / 1000.0 - 1.0
                };
                let qs = (0..layout.num_users())
                    .map(|i| {
                        let n = layout.cluster_antennas(i);
                        let a = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
                        &a * a.adjoint()
                    })
                    .collect();
                (layout, qs)
            })
        })
    }

    proptest! {
        #[test]
        fn duality_and_bookkeeping((layout, qs) in random_layout()) {
            for i in 0..layout.num_users() {
                for j in 0..layout.num_bases() {
                    prop_assert_eq!(layout.cluster(i).contains(&j), layout.served_users(j).contains(&i));
                }
                let c = layout.association(i);
                prop_assert_eq!(c.transpose() * &c, DMatrix::identity(c.ncols(), c.ncols()));
                let q = &qs[i];
                let full = layout.embed(i, q);
                prop_assert!((trace_re(&full) - trace_re(q)).abs() < 1e-9);
                let per_base: f64 = layout.cluster(i).iter().map(|&j| layout.block_power(i, j, q)).sum();
                prop_assert!((per_base - trace_re(q)).abs() < 1e-9);
                for j in 0..layout.num_bases() {
                    let e = real_to_complex(&layout.selector(j));
                    let direct = trace_re(&(e.transpose() * &full * &e));
                    prop_assert!((direct - layout.block_power(i, j, q)).abs() < 1e-9);
                }
                prop_assert!(crate::linalg::min_eigenvalue(&full) > -1e-9);
                prop_assert!(max_abs(&(full.adjoint() - &full)) < 1e-12);
            }
        }
    }
}
