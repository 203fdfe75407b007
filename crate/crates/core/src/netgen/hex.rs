//! Two-ring hexagonal layout (19 cells × 3 sectors) with wraparound.
//!
//! Positions are in km. The cell-edge reference point sits on a sector
//! boresight at `CELL_EDGE_KM` from the site with zero shadowing; gains are
//! normalized so that point has unit average gain, which makes the per-base
//! power budget equal to the cell-edge SNR.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{rng, LargeScaleGains, NetworkGeometry, NetworkKind};
use crate::error::{Error, Result};

pub const HEX_CELLS: usize = 19;
pub const HEX_SECTORS: usize = 3 * HEX_CELLS;
pub const INTER_SITE_KM: f64 = 0.5;
pub const CELL_EDGE_KM: f64 = 0.25;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HexParams {
    pub inter_site_km: f64,
    pub pathloss_exponent: f64,
    pub shadow_std_db: f64,
    pub shadow_decorrelation_km: f64,
    pub site_correlation: f64,
    pub beamwidth_deg: f64,
    pub max_attenuation_db: f64,
    pub first_boresight_deg: f64,
    pub min_distance_km: f64,
    pub cell_edge_km: f64,
    pub placement_rounds: usize,
}

impl Default for HexParams {
    fn default() -> Self {
        Self {
            inter_site_km: INTER_SITE_KM,
            pathloss_exponent: 3.76,
            shadow_std_db: 8.0,
            shadow_decorrelation_km: 0.05,
            site_correlation: 0.5,
            beamwidth_deg: 70.0,
            max_attenuation_db: 20.0,
            first_boresight_deg: 30.0,
            min_distance_km: 0.035,
            cell_edge_km: CELL_EDGE_KM,
            placement_rounds: 100,
        }
    }
}

/// Axial coordinates of the centre cell and the two surrounding rings.
fn cell_axial() -> Vec<(i32, i32)> {
    let mut cells = vec![(0, 0)];
    let dirs = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    for ring in 1..=2 {
        // Start at ring × direction 4 and walk the six sides.
        let (mut q, mut r) = (dirs[4].0 * ring, dirs[4].1 * ring);
        for dir in dirs {
            for _ in 0..ring {
                cells.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
    }
    cells
}

fn axial_to_xy(q: i32, r: i32, spacing: f64) -> [f64; 2] {
    [spacing * (q as f64 + r as f64 / 2.0), spacing * (r as f64 * SQRT3 / 2.0)]
}

/// Translations that tile the plane with copies of the 19-cell cluster.
fn wrap_shifts(spacing: f64) -> [[f64; 2]; 7] {
    let mut out = [[0.0; 2]; 7];
    let (mut q, mut r) = (3, 2);
    for slot in out.iter_mut().skip(1) {
        *slot = axial_to_xy(q, r, spacing);
        (q, r) = (-r, q + r);
    }
    out
}

/// Displacement from `from` to the nearest wrapped image of `to`.
fn wrapped_offset(from: [f64; 2], to: [f64; 2], shifts: &[[f64; 2]; 7]) -> [f64; 2] {
    let mut best = [to[0] - from[0], to[1] - from[1]];
    let mut best_d = best[0].hypot(best[1]);
    for s in &shifts[1..] {
        let v = [to[0] + s[0] - from[0], to[1] + s[1] - from[1]];
        let d = v[0].hypot(v[1]);
        if d < best_d {
            best = v;
            best_d = d;
        }
    }
    best
}

fn inside_hexagon(p: [f64; 2], centre: [f64; 2], spacing: f64) -> bool {
    let v = [p[0] - centre[0], p[1] - centre[1]];
    [0.0_f64, 60.0, 120.0].iter().all(|deg| {
        let a = deg.to_radians();
        (v[0] * a.cos() + v[1] * a.sin()).abs() <= spacing / 2.0
    })
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI) % (2.0 * PI);
    if x < 0.0 {
        x += 2.0 * PI;
    }
    x - PI
}

/// Sector antenna attenuation in dB (non-positive) at `off_boresight` radians.
pub fn parabolic_pattern_db(off_boresight: f64, params: &HexParams) -> f64 {
    let ratio = wrap_angle(off_boresight).to_degrees() / params.beamwidth_deg;
    -(12.0 * ratio * ratio).min(params.max_attenuation_db)
}

/// Average gain from a sector to a point, excluding shadowing.
pub fn hex_pathloss_antenna_gain(
    geometry: &NetworkGeometry,
    params: &HexParams,
    point: [f64; 2],
    sector: usize,
) -> f64 {
    let shifts = wrap_shifts(params.inter_site_km);
    pathloss_antenna(
        geometry.base_positions[sector],
        geometry.boresight[sector],
        point,
        params,
        &shifts,
    )
}

fn pathloss_antenna(
    site: [f64; 2],
    boresight: f64,
    point: [f64; 2],
    params: &HexParams,
    shifts: &[[f64; 2]; 7],
) -> f64 {
    let v = wrapped_offset(site, point, shifts);
    let d = v[0].hypot(v[1]).max(params.min_distance_km);
    let angle = if v[0] == 0.0 && v[1] == 0.0 { boresight } else { v[1].atan2(v[0]) };
    let pattern = parabolic_pattern_db(angle - boresight, params);
    (d / params.cell_edge_km).powf(-params.pathloss_exponent) * 10f64.powf(pattern / 10.0)
}

/// Build the sectorized layout and drop users: each user attaches to the
/// sector with the strongest distance/antenna gain, one user per sector.
/// When two users compete for a sector the stronger one stays and the other
/// is redrawn, for at most `placement_rounds` rounds.
pub fn hex_layout(params: &HexParams, seed: u64) -> Result<NetworkGeometry> {
    if !(params.inter_site_km > 0.0 && params.cell_edge_km > 0.0) {
        return Err(Error::InvalidInput("hex spacing and cell edge must be positive".into()));
    }
    let spacing = params.inter_site_km;
    let shifts = wrap_shifts(spacing);
    let centres: Vec<[f64; 2]> = cell_axial().into_iter().map(|(q, r)| axial_to_xy(q, r, spacing)).collect();

    let mut base_positions = Vec::with_capacity(HEX_SECTORS);
    let mut boresight = Vec::with_capacity(HEX_SECTORS);
    let mut base_site = Vec::with_capacity(HEX_SECTORS);
    for (c, centre) in centres.iter().enumerate() {
        for s in 0..3 {
            base_positions.push(*centre);
            boresight.push(wrap_angle((params.first_boresight_deg + 120.0 * s as f64).to_radians()));
            base_site.push(c);
        }
    }

    let mut rng = rng(seed);
    let half_height = spacing / SQRT3;
    let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| -> [f64; 2] {
        let centre = centres[rng.random_range(0..HEX_CELLS)];
        loop {
            let p = [
                centre[0] + rng.random_range(-spacing / 2.0..spacing / 2.0),
                centre[1] + rng.random_range(-half_height..half_height),
            ];
            if inside_hexagon(p, centre, spacing) {
                return p;
            }
        }
    };

    let mut occupant: Vec<Option<([f64; 2], f64)>> = vec![None; HEX_SECTORS];
    let mut pending = HEX_SECTORS;
    for _ in 0..params.placement_rounds {
        if pending == 0 {
            break;
        }
        let mut displaced = 0;
        for _ in 0..pending {
            let p = draw_point(&mut rng);
            let (sector, gain) = (0..HEX_SECTORS)
                .map(|j| (j, pathloss_antenna(base_positions[j], boresight[j], p, params, &shifts)))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            match occupant[sector] {
                None => occupant[sector] = Some((p, gain)),
                Some((_, held)) => {
                    if gain > held {
                        occupant[sector] = Some((p, gain));
                    }
                    displaced += 1;
                }
            }
        }
        pending = displaced;
    }

    let mut user_positions = Vec::new();
    let mut serving = Vec::new();
    for (j, slot) in occupant.iter().enumerate() {
        if let Some((p, _)) = slot {
            user_positions.push(*p);
            serving.push(j);
        }
    }
    let k = user_positions.len();
    Ok(NetworkGeometry {
        kind: NetworkKind::Hex,
        base_positions,
        user_positions,
        base_antennas: vec![1; HEX_SECTORS],
        user_antennas: vec![1; k],
        boresight,
        base_site,
        serving,
        line: None,
    })
}

/// Lognormal shadowing in dB for each (user, site) pair.
///
/// Each value is `σ (√ρ Z_common(u) + √(1-ρ) Z_site(u))`, where the common
/// field and the per-site fields are independent Gaussian fields over user
/// positions with correlation `exp(-Δ / d_corr)`.
pub fn shadowing_db(
    user_positions: &[[f64; 2]],
    sites: usize,
    params: &HexParams,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let k = user_positions.len();
    let shifts = wrap_shifts(params.inter_site_km);
    let mut corr = DMatrix::<f64>::zeros(k, k);
    for u in 0..k {
        for v in 0..k {
            let off = wrapped_offset(user_positions[u], user_positions[v], &shifts);
            corr[(u, v)] = (-off[0].hypot(off[1]) / params.shadow_decorrelation_km).exp();
        }
        corr[(u, u)] += 1e-10;
    }
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::Numerical("shadowing correlation not positive definite".into()))?;
    let l = chol.l();
    let mut rng = rng(seed);
    let field = |rng: &mut rand_chacha::ChaCha8Rng| {
        let z = nalgebra::DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
        &l * z
    };
    let common = field(&mut rng);
    let rho = params.site_correlation;
    let mut out = DMatrix::zeros(k, sites);
    for c in 0..sites {
        let own = field(&mut rng);
        for u in 0..k {
            out[(u, c)] = params.shadow_std_db * (rho.sqrt() * common[u] + (1.0 - rho).sqrt() * own[u]);
        }
    }
    Ok(out)
}

/// Path loss × shadowing × antenna pattern for every (user, sector) pair.
pub fn hex_gains(geometry: &NetworkGeometry, params: &HexParams, seed: u64) -> Result<LargeScaleGains> {
    if geometry.kind != NetworkKind::Hex {
        return Err(Error::InvalidInput("hex_gains needs a hex geometry".into()));
    }
    let sites = geometry.base_site.iter().copied().max().map_or(0, |m| m + 1);
    let shadow = shadowing_db(&geometry.user_positions, sites, params, seed)?;
    let k = geometry.num_users();
    let b = geometry.num_bases();
    let mut gains = DMatrix::zeros(k, b);
    for i in 0..k {
        for j in 0..b {
            let base = hex_pathloss_antenna_gain(geometry, params, geometry.user_positions[i], j);
            gains[(i, j)] = base * 10f64.powf(shadow[(i, geometry.base_site[j])] / 10.0);
        }
    }
    LargeScaleGains::new(gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nineteen_distinct_cells_half_km_apart() {
        let cells = cell_axial();
        assert_eq!(cells.len(), 19);
        let xy: Vec<_> = cells.iter().map(|&(q, r)| axial_to_xy(q, r, INTER_SITE_KM)).collect();
        let mut min_d = f64::INFINITY;
        for a in 0..19 {
            for b in (a + 1)..19 {
                min_d = min_d.min((xy[a][0] - xy[b][0]).hypot(xy[a][1] - xy[b][1]));
            }
        }
        assert!((min_d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wraparound_makes_every_cell_a_centre() {
        // Under wraparound, each cell sees exactly 6 neighbours at 0.5 km and
        // 12 cells within two rings, like the centre cell does.
        let shifts = wrap_shifts(INTER_SITE_KM);
        let xy: Vec<_> = cell_axial().iter().map(|&(q, r)| axial_to_xy(q, r, INTER_SITE_KM)).collect();
        for a in 0..19 {
            let mut dists: Vec<f64> = (0..19)
                .filter(|&b| b != a)
                .map(|b| {
                    let v = wrapped_offset(xy[a], xy[b], &shifts);
                    v[0].hypot(v[1])
                })
                .collect();
            dists.sort_by(f64::total_cmp);
            assert!(dists[..6].iter().all(|d| (d - 0.5).abs() < 1e-9), "cell {a}: {dists:?}");
            assert!(dists[6..].iter().all(|d| *d > 0.5 + 1e-9 && *d < 1.0 + 1e-9));
        }
    }

    #[test]
    fn sector_count_and_boresights() {
        let geo = hex_layout(&HexParams::default(), 3).unwrap();
        assert_eq!(geo.num_bases(), 57);
        for c in 0..19 {
            let mut angles: Vec<f64> =
                (0..3).map(|s| geo.boresight[3 * c + s].to_degrees().rem_euclid(360.0)).collect();
            angles.sort_by(f64::total_cmp);
            assert!((angles[0] - 30.0).abs() < 1e-9);
            assert!((angles[1] - 150.0).abs() < 1e-9);
            assert!((angles[2] - 270.0).abs() < 1e-9);
        }
    }

    #[test]
    fn at_most_one_user_per_sector_and_attached_to_strongest() {
        let params = HexParams::default();
        let geo = hex_layout(&params, 11).unwrap();
        assert!(geo.num_users() <= 57 && geo.num_users() >= 50);
        let mut seen = [false; 57];
        for (i, &s) in geo.serving.iter().enumerate() {
            assert!(!seen[s]);
            seen[s] = true;
            let own = hex_pathloss_antenna_gain(&geo, &params, geo.user_positions[i], s);
            for j in 0..57 {
                assert!(hex_pathloss_antenna_gain(&geo, &params, geo.user_positions[i], j) <= own);
            }
        }
    }

    #[test]
    fn layout_is_deterministic() {
        let a = hex_layout(&HexParams::default(), 5).unwrap();
        let b = hex_layout(&HexParams::default(), 5).unwrap();
        assert_eq!(a.user_positions, b.user_positions);
        let c = hex_layout(&HexParams::default(), 6).unwrap();
        assert_ne!(a.user_positions, c.user_positions);
    }

    #[test]
    fn cell_edge_boresight_user_sees_twenty_db() {
        let params = HexParams::default();
        let geo = hex_layout(&params, 1).unwrap();
        let sector = 0;
        let bore = geo.boresight[sector];
        let site = geo.base_positions[sector];
        let p = [site[0] + CELL_EDGE_KM * bore.cos(), site[1] + CELL_EDGE_KM * bore.sin()];
        let gain = hex_pathloss_antenna_gain(&geo, &params, p, sector);
        let power = 100.0;
        assert!((10.0 * (power * gain).log10() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn antenna_pattern_shape() {
        let p = HexParams::default();
        assert_eq!(parabolic_pattern_db(0.0, &p), 0.0);
        assert!((parabolic_pattern_db(35f64.to_radians(), &p) + 3.0).abs() < 1e-12);
        assert_eq!(parabolic_pattern_db(PI, &p), -20.0);
        assert!((parabolic_pattern_db(-2.0 * PI + 0.1, &p) - parabolic_pattern_db(0.1, &p)).abs() < 1e-12);
    }

    #[test]
    fn shadowing_std_and_site_correlation() {
        let params = HexParams::default();
        let mut samples = Vec::new();
        let mut cross = 0.0;
        let mut pairs = 0.0;
        for seed in 0..527u64 {
            let s = shadowing_db(&[[0.1, 0.1]], 19, &params, seed).unwrap();
            for c in 0..19 {
                samples.push(s[(0, c)]);
            }
            for c in 1..19 {
                cross += s[(0, 0)] * s[(0, c)];
                pairs += 1.0;
            }
        }
        let n = samples.len() as f64;
        assert!(n >= 1e4);
        let mean = samples.iter().sum::<f64>() / n;
        let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 8.0).abs() < 0.5, "std {std}");
        let rho = cross / pairs / 64.0;
        assert!((rho - 0.5).abs() < 0.1, "rho {rho}");
    }

    #[test]
    fn shadowing_correlation_vanishes_with_separation_zero() {
        let params = HexParams::default();
        let mut diff_close = 0.0;
        let mut diff_far = 0.0;
        for seed in 0..200u64 {
            let s = shadowing_db(&[[0.0, 0.0], [0.0005, 0.0], [0.6, 0.0]], 1, &params, seed).unwrap();
            diff_close += (s[(0, 0)] - s[(1, 0)]).powi(2);
            diff_far += (s[(0, 0)] - s[(2, 0)]).powi(2);
        }
        // exp(-0.5 m / 50 m) ≈ 0.99: mean squared difference ≈ 2σ²(1-ρ) ≈ 1.27 dB².
        assert!(diff_close / 200.0 < 3.0);
        assert!(diff_far / 200.0 > 40.0);
    }

    #[test]
    fn gains_are_positive_and_deterministic() {
        let params = HexParams::default();
        let geo = hex_layout(&params, 9).unwrap();
        let a = hex_gains(&geo, &params, 1).unwrap();
        let b = hex_gains(&geo, &params, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.matrix().iter().all(|g| *g > 0.0 && g.is_finite()));
    }
}
