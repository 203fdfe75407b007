//! Network geometry, large-scale gains and fast-fading channel draws.
//!
//! Everything here is a pure function of its arguments and an explicit `u64`
//! seed, so independent trials can be generated concurrently.

mod hex;
mod line;

pub use hex::{
    hex_gains, hex_layout, hex_pathloss_antenna_gain, parabolic_pattern_db, shadowing_db,
    HexParams, CELL_EDGE_KM, HEX_CELLS, HEX_SECTORS, INTER_SITE_KM,
};
pub use line::{line_gains, line_geometry, wrap_distance};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Line,
    Hex,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Line => "line",
            NetworkKind::Hex => "hex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub spacing: f64,
    pub offset: f64,
}

/// Positions are in km for the hexagonal layout and in units of the
/// inter-site spacing for the line network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    pub kind: NetworkKind,
    pub base_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub base_antennas: Vec<usize>,
    pub user_antennas: Vec<usize>,
    /// Sector boresight in radians; empty for the line network.
    pub boresight: Vec<f64>,
    /// Site (cell) hosting each base; sectors of one cell share a site.
    pub base_site: Vec<usize>,
    /// Base each user is attached to for non-cooperative service.
    pub serving: Vec<usize>,
    pub line: Option<LineParams>,
}

impl NetworkGeometry {
    pub fn num_bases(&self) -> usize {
        self.base_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn total_antennas(&self) -> usize {
        self.base_antennas.iter().sum()
    }

    pub fn is_scalar(&self) -> bool {
        self.base_antennas.iter().all(|&m| m == 1) && self.user_antennas.iter().all(|&n| n == 1)
    }

    /// CSV dump: `role,index,x,y,boresight_rad,serving`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("role,index,x,y,boresight_rad,serving\n");
        for (j, p) in self.base_positions.iter().enumerate() {
            let bore = self.boresight.get(j).copied().unwrap_or(0.0);
            out.push_str(&format!("base,{j},{},{},{bore},\n", p[0], p[1]));
        }
        for (i, p) in self.user_positions.iter().enumerate() {
            out.push_str(&format!("user,{i},{},{},,{}\n", p[0], p[1], self.serving[i]));
        }
        out
    }
}

/// K × B matrix of average linear power gains (rows = users).
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleGains {
    gains: DMatrix<f64>,
}

impl LargeScaleGains {
    pub fn new(gains: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "large-scale gains must be finite and positive, found {bad}"
            )));
        }
        Ok(Self { gains })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_bases(&self) -> usize {
        self.gains.ncols()
    }

    pub fn get(&self, user: usize, base: usize) -> f64 {
        self.gains[(user, base)]
    }

    /// CSV dump, row = user, column = base, value in dB.
    pub fn to_csv_db(&self) -> String {
        let mut out = String::from("user");
        for j in 0..self.num_bases() {
            out.push_str(&format!(",base{j}"));
        }
        out.push('\n');
        for i in 0..self.num_users() {
            out.push_str(&i.to_string());
            for j in 0..self.num_bases() {
                out.push_str(&format!(",{:.4}", 10.0 * self.gains[(i, j)].log10()));
            }
            out.push('\n');
        }
        out
    }
}

/// All channel matrices for one fading block.
///
/// Only the aggregate per-user matrices `[H_i1 … H_iB]` are stored; the
/// per-link blocks are column slices of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    base_antennas: Vec<usize>,
    user_antennas: Vec<usize>,
    base_offsets: Vec<usize>,
    aggregate: Vec<CMat>,
}

impl ChannelSet {
    pub fn from_aggregate(
        base_antennas: Vec<usize>,
        user_antennas: Vec<usize>,
        aggregate: Vec<CMat>,
    ) -> Result<Self> {
        let total: usize = base_antennas.iter().sum();
        if aggregate.len() != user_antennas.len() {
            return Err(Error::InvalidInput(format!(
                "{} aggregate matrices for {} users",
                aggregate.len(),
                user_antennas.len()
            )));
        }
        for (i, h) in aggregate.iter().enumerate() {
            if h.nrows() != user_antennas[i] || h.ncols() != total {
                return Err(Error::InvalidInput(format!(
                    "user {i}: aggregate channel is {}x{}, expected {}x{total}",
                    h.nrows(),
                    h.ncols(),
                    user_antennas[i]
                )));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("user {i}: non-finite channel entry")));
            }
        }
        let mut base_offsets = Vec::with_capacity(base_antennas.len() + 1);
        let mut acc = 0;
        for &m in &base_antennas {
            base_offsets.push(acc);
            acc += m;
        }
        base_offsets.push(acc);
        Ok(Self { base_antennas, user_antennas, base_offsets, aggregate })
    }

    /// Single-antenna network from a K × B matrix of scalar gains `h_ij`.
    pub fn from_scalar(h: &CMat) -> Result<Self> {
        let k = h.nrows();
        let b = h.ncols();
        let aggregate = (0..k).map(|i| h.rows(i, 1).into_owned()).collect();
        Self::from_aggregate(vec![1; b], vec![1; k], aggregate)
    }

    pub fn num_users(&self) -> usize {
        self.user_antennas.len()
    }

    pub fn num_bases(&self) -> usize {
        self.base_antennas.len()
    }

    pub fn total_antennas(&self) -> usize {
        *self.base_offsets.last().unwrap_or(&0)
    }

    pub fn base_antennas(&self) -> &[usize] {
        &self.base_antennas
    }

    pub fn user_antennas(&self) -> &[usize] {
        &self.user_antennas
    }

    pub fn base_offset(&self, base: usize) -> usize {
        self.base_offsets[base]
    }

    pub fn aggregate(&self, user: usize) -> &CMat {
        &self.aggregate[user]
    }

    pub fn link(&self, user: usize, base: usize) -> CMat {
        self.aggregate[user]
            .columns(self.base_offsets[base], self.base_antennas[base])
            .into_owned()
    }

    pub fn is_scalar(&self) -> bool {
        self.base_antennas.iter().all(|&m| m == 1) && self.user_antennas.iter().all(|&n| n == 1)
    }

    /// K × B matrix `[h_ij]` for single-antenna networks.
    pub fn scalar_matrix(&self) -> Result<CMat> {
        if !self.is_scalar() {
            return Err(Error::InvalidInput("scalar channel matrix requires single antennas".into()));
        }
        let mut h = CMat::zeros(self.num_users(), self.num_bases());
        for i in 0..self.num_users() {
            for j in 0..self.num_bases() {
                h[(i, j)] = self.aggregate[i][(0, j)];
            }
        }
        Ok(h)
    }
}

/// Draw one block of i.i.d. Rayleigh fading scaled by the large-scale gains:
/// every entry of `H_ij` is `CN(0, gain_ij)`.
pub fn draw_channels(
    gains: &LargeScaleGains,
    geometry: &NetworkGeometry,
    seed: u64,
) -> Result<ChannelSet> {
    let k = geometry.num_users();
    let b = geometry.num_bases();
    if gains.num_users() != k || gains.num_bases() != b {
        return Err(Error::InvalidInput(format!(
            "gain matrix is {}x{}, geometry has {k} users and {b} bases",
            gains.num_users(),
            gains.num_bases()
        )));
    }
    let mut rng = rng(seed);
    let total = geometry.total_antennas();
    let mut aggregate = Vec::with_capacity(k);
    for i in 0..k {
        let n = geometry.user_antennas[i];
        let mut h = CMat::zeros(n, total);
        let mut col = 0;
        for j in 0..b {
            let std = (gains.get(i, j) / 2.0).sqrt();
            for _ in 0..geometry.base_antennas[j] {
                for r in 0..n {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    h[(r, col)] = C64::new(std * re, std * im);
                }
                col += 1;
            }
        }
        aggregate.push(h);
    }
    ChannelSet::from_aggregate(geometry.base_antennas.clone(), geometry.user_antennas.clone(), aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_has_total_antenna_columns() {
        let mut geo = line_geometry(4, 1.0, 1.0).unwrap();
        geo.base_antennas = vec![1, 2, 3, 1];
        geo.user_antennas = vec![2, 1, 1, 3];
        let gains = line_gains(&geo, 4.0).unwrap();
        let ch = draw_channels(&gains, &geo, 7).unwrap();
        for i in 0..4 {
            assert_eq!(ch.aggregate(i).ncols(), 7);
            assert_eq!(ch.aggregate(i).nrows(), geo.user_antennas[i]);
        }
        assert_eq!(ch.link(3, 2).shape(), (3, 3));
        assert_eq!(ch.link(0, 2), ch.aggregate(0).columns(3, 3).into_owned());
    }

    #[test]
    fn same_seed_same_channels() {
        let geo = line_geometry(5, 1.0, 1.0).unwrap();
        let gains = line_gains(&geo, 4.0).unwrap();
        let a = draw_channels(&gains, &geo, 42).unwrap();
        let b = draw_channels(&gains, &geo, 42).unwrap();
        let c = draw_channels(&gains, &geo, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_entry_power_is_unit_for_unit_gain() {
        // 10^4 draws of a unit-gain entry; sample mean of |h|^2 within 3%.
        let mut geo = line_geometry(1, 1.0, 1.0).unwrap();
        geo.user_antennas = vec![100];
        geo.base_antennas = vec![100];
        let gains = LargeScaleGains::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let ch = draw_channels(&gains, &geo, 2024).unwrap();
        let mean = ch.aggregate(0).iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
        assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn rayleigh_variance_tracks_gain() {
        // Per-entry variance matches the configured gain within three standard errors.
        let mut geo = line_geometry(2, 1.0, 1.0).unwrap();
        geo.user_antennas = vec![100, 100];
        geo.base_antennas = vec![100, 100];
        let gains = LargeScaleGains::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.04, 2.0])).unwrap();
        let ch = draw_channels(&gains, &geo, 99).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let link = ch.link(i, j);
                let n = link.len() as f64;
                let mean = link.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
                // |h|^2 is exponential: std equals its mean.
                let se = gains.get(i, j) / n.sqrt();
                assert!((mean - gains.get(i, j)).abs() < 3.0 * se, "({i},{j}) {mean}");
            }
        }
    }

    #[test]
    fn gains_reject_nonpositive_entries() {
        assert!(LargeScaleGains::new(DMatrix::from_element(1, 2, 0.0)).is_err());
        assert!(LargeScaleGains::new(DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn gain_csv_is_in_db() {
        let gains = LargeScaleGains::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.01])).unwrap();
        let csv = gains.to_csv_db();
        assert_eq!(csv, "user,base0,base1\n0,0.0000,-20.0000\n");
    }
}
