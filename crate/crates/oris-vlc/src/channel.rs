//! Lambertian channel gains for LoS, mirror (ORIS), and diffuse wall paths,
//! the DCO-OFDM link budget, SNR with select-best combining, and the IM/DD
//! rate lower bound.
//!
//! All gains are dimensionless and land in [0, 1); the table builder
//! asserts that in debug builds. Gains below `GAIN_FLOOR` are clamped to 0
//! to keep the tables sparse — that floor sits ~90 dB below a typical LoS
//! gain.

use crate::geometry::{PhotodiodeOrientation, Vec3};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, FRAC_PI_2, PI};
use thiserror::Error;

/// Gains below this are treated as exactly zero.
pub const GAIN_FLOOR: f64 = 1e-15;

/// APs are ceiling-mounted LEDs facing straight down.
const AP_NORMAL: Vec3 = Vec3::new(0.0, 0.0, -1.0);

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("half-power semi-angle must be in (0, pi/2), got {0}")]
    HalfAngleOutOfRange(f64),
    #[error("SNR must be non-negative, got {0}")]
    NegativeSnr(f64),
    #[error("subcarrier count must be even and at least 4, got {0}")]
    BadSubcarrierCount(usize),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// DCO-OFDM link budget. The first and N/2-th subcarriers carry no data,
/// so the total optical power relates to the per-subcarrier power as
/// `P_tot = P_sc · √(N_sc − 2)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Optical power per subcarrier, W.
    pub power_per_subcarrier: f64,
    /// Total optical power per AP, W.
    pub total_power: f64,
    pub subcarriers: usize,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    /// Communication bandwidth, Hz.
    pub bandwidth: f64,
}

impl LinkBudget {
    pub fn new(
        total_power: f64,
        subcarriers: usize,
        noise_psd: f64,
        bandwidth: f64,
    ) -> Result<Self, ChannelError> {
        if subcarriers < 4 || !subcarriers.is_multiple_of(2) {
            return Err(ChannelError::BadSubcarrierCount(subcarriers));
        }
        for (name, value) in [
            ("total_power", total_power),
            ("noise_psd", noise_psd),
            ("bandwidth", bandwidth),
        ] {
            if value <= 0.0 {
                return Err(ChannelError::NonPositive { name, value });
            }
        }
        Ok(Self {
            power_per_subcarrier: total_power / ((subcarriers as f64 - 2.0).sqrt()),
            total_power,
            subcarriers,
            noise_psd,
            bandwidth,
        })
    }
}

/// Lambertian order `m = −1 / log₂(cos φ_half)` for a half-power
/// semi-angle in (0, π/2).
pub fn lambertian_order(half_power_semi_angle: f64) -> Result<f64, ChannelError> {
    if half_power_semi_angle <= 0.0 || half_power_semi_angle >= FRAC_PI_2 {
        return Err(ChannelError::HalfAngleOutOfRange(half_power_semi_angle));
    }
    Ok(-1.0 / half_power_semi_angle.cos().log2())
}

/// `cos(φ)^m` for possibly non-integer m; defined only for cos φ > 0.
/// A source behind the emitter plane radiates nothing.
fn cos_pow(cos_phi: f64, m: f64) -> f64 {
    if cos_phi <= 0.0 {
        0.0
    } else {
        (m * cos_phi.ln()).exp()
    }
}

fn clamp_floor(gain: f64) -> f64 {
    debug_assert!(gain < 1.0, "channel gain {gain} out of [0, 1)");
    if gain < GAIN_FLOOR {
        0.0
    } else {
        gain
    }
}

/// Incidence cosine at a photodiode for light arriving from `source`.
fn incidence_cos(device: Vec3, source: Vec3, pd: &PhotodiodeOrientation) -> f64 {
    pd.pointing.dot((source - device).normalized())
}

/// LoS Lambertian gain from an AP to one photodiode.
///
/// Returns `I · (m+1)·A_PD / (2π d²) · cosᵐ(φ) · cos(ϕ)` when the incidence
/// angle is within the field of view (inclusive) and the AP sees the
/// device; 0 otherwise.
pub fn los_gain(
    ap: Vec3,
    device: Vec3,
    pd: &PhotodiodeOrientation,
    fov: f64,
    pd_area: f64,
    m: f64,
    unblocked: bool,
) -> f64 {
    if !unblocked {
        return 0.0;
    }
    let cos_irradiance = crate::geometry::cos_angle_between(ap, device, AP_NORMAL)
        .expect("AP and device must not coincide");
    let cos_incidence = incidence_cos(device, ap, pd);
    if cos_incidence < fov.cos() {
        return 0.0;
    }
    let d2 = ap.distance(device).powi(2);
    clamp_floor(
        (m + 1.0) * pd_area / (2.0 * PI * d2)
            * cos_pow(cos_irradiance, m)
            * cos_incidence.max(0.0),
    )
}

/// Gain contributed by one perfectly steered mirror element redirecting
/// light from an AP to one photodiode.
///
/// `r̂ · (m+1)·A_PD / (2π (d_ap + d_dev)²) · cosᵐ(φ_ap) · cos(ϕ_pd)` within
/// the field of view, else 0. The mirror has no pointing-loss term.
#[allow(clippy::too_many_arguments)]
pub fn oris_gain(
    ap: Vec3,
    element: Vec3,
    device: Vec3,
    pd: &PhotodiodeOrientation,
    fov: f64,
    pd_area: f64,
    m: f64,
    reflectivity: f64,
) -> f64 {
    let cos_irradiance = crate::geometry::cos_angle_between(ap, element, AP_NORMAL)
        .expect("AP and mirror must not coincide");
    let cos_incidence = incidence_cos(device, element, pd);
    if cos_incidence < fov.cos() {
        return 0.0;
    }
    let path = ap.distance(element) + element.distance(device);
    clamp_floor(
        reflectivity * (m + 1.0) * pd_area / (2.0 * PI * path * path)
            * cos_pow(cos_irradiance, m)
            * cos_incidence.max(0.0),
    )
}

/// Diffuse gain contributed by one wall grid cell.
///
/// `r̃ · (m+1)·A_PD·A_w / (2π d1² d2²) · cosᵐ(φ_ap) · cos(ϕ_wall) ·
/// cos(φ_wall) · cos(ϕ_pd)` within the field of view; any cosine factor at
/// or beyond 90° zeroes the path.
#[allow(clippy::too_many_arguments)]
pub fn wall_gain(
    ap: Vec3,
    element_center: Vec3,
    element_normal: Vec3,
    element_area: f64,
    reflectivity: f64,
    device: Vec3,
    pd: &PhotodiodeOrientation,
    fov: f64,
    pd_area: f64,
    m: f64,
) -> f64 {
    let cos_irradiance_ap = crate::geometry::cos_angle_between(ap, element_center, AP_NORMAL)
        .expect("AP and wall cell must not coincide");
    let cos_onto_wall = element_normal.dot((ap - element_center).normalized());
    let cos_off_wall = element_normal.dot((device - element_center).normalized());
    let cos_incidence = incidence_cos(device, element_center, pd);
    if cos_incidence < fov.cos() {
        return 0.0;
    }
    if cos_onto_wall <= 0.0 || cos_off_wall <= 0.0 {
        return 0.0;
    }
    let d1_sq = ap.distance(element_center).powi(2);
    let d2_sq = element_center.distance(device).powi(2);
    clamp_floor(
        reflectivity * (m + 1.0) * pd_area * element_area / (2.0 * PI * d1_sq * d2_sq)
            * cos_pow(cos_irradiance_ap, m)
            * cos_onto_wall
            * cos_off_wall
            * cos_incidence.max(0.0),
    )
}

/// Assignment of one ORIS element to an (AP, photodiode, user) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub ap: usize,
    pub photodiode: usize,
    pub user: usize,
}

/// Assignment of every ORIS element: each entry is either unassigned or one
/// (AP, photodiode, user) triple. One entry per element makes the
/// at-most-once allocation constraint hold by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assignment: Vec<Option<Assignment>>,
}

impl Allocation {
    pub fn empty(element_count: usize) -> Self {
        Self {
            assignment: vec![None; element_count],
        }
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }
}

/// Precomputed channel gains for a scene: LoS and summed diffuse gains per
/// (AP, photodiode, user), and the gain each ORIS element would add per
/// (AP, element, photodiode, user) if allocated. Indicators are already
/// folded in, so blocked entries are zero.
#[derive(Debug, Clone)]
pub struct GainTables {
    pub aps: usize,
    pub oris_count: usize,
    pub photodiodes: usize,
    pub users: usize,
    pub responsivity: Vec<f64>,
    los: Vec<f64>,
    wall_nlos: Vec<f64>,
    oris_contrib: Vec<f64>,
}

impl GainTables {
    /// Evaluate every gain in the scene. All users must carry the same
    /// number of photodiodes.
    pub fn build(scenario: &Scenario) -> Result<Self, ChannelError> {
        let m = lambertian_order(scenario.room.led_half_power_semi_angle)?;
        let aps = scenario.room.ap_positions.len();
        let users = scenario.users.len();
        let photodiodes = scenario.users.first().map_or(0, |u| u.adr.len());
        assert!(
            scenario.users.iter().all(|u| u.adr.len() == photodiodes),
            "all users must share the same ADR size"
        );
        let oris_count = scenario.oris_elements.len();
        let mut tables = Self {
            aps,
            oris_count,
            photodiodes,
            users,
            responsivity: scenario.users.iter().map(|u| u.responsivity).collect(),
            los: vec![0.0; aps * photodiodes * users],
            wall_nlos: vec![0.0; aps * photodiodes * users],
            oris_contrib: vec![0.0; aps * oris_count * photodiodes * users],
        };
        for (l, ap) in scenario.room.ap_positions.iter().enumerate() {
            for (u, user) in scenario.users.iter().enumerate() {
                for (n, pd) in user.adr.iter().enumerate() {
                    let idx = tables.linear_index(l, n, u);
                    tables.los[idx] = los_gain(
                        *ap,
                        user.device_position,
                        pd,
                        user.fov,
                        user.pd_area,
                        m,
                        scenario.blockage.los(l, u),
                    );
                    let mut diffuse = 0.0;
                    for (w, cell) in scenario.wall_elements.iter().enumerate() {
                        if !scenario.blockage.wall(l, w, u) {
                            continue;
                        }
                        diffuse += wall_gain(
                            *ap,
                            cell.center,
                            cell.normal,
                            cell.area,
                            cell.reflectivity,
                            user.device_position,
                            pd,
                            user.fov,
                            user.pd_area,
                            m,
                        );
                    }
                    tables.wall_nlos[idx] = diffuse;
                    for (k, element) in scenario.oris_elements.iter().enumerate() {
                        if !scenario.blockage.oris(l, k, u) {
                            continue;
                        }
                        let g = oris_gain(
                            *ap,
                            element.center,
                            user.device_position,
                            pd,
                            user.fov,
                            user.pd_area,
                            m,
                            element.reflectivity,
                        );
                        let idx = tables.oris_index(l, k, n, u);
                        tables.oris_contrib[idx] = g;
                    }
                }
            }
        }
        Ok(tables)
    }

    fn linear_index(&self, l: usize, n: usize, u: usize) -> usize {
        (l * self.photodiodes + n) * self.users + u
    }

    fn oris_index(&self, l: usize, k: usize, n: usize, u: usize) -> usize {
        ((l * self.oris_count + k) * self.photodiodes + n) * self.users + u
    }

    pub fn los(&self, l: usize, n: usize, u: usize) -> f64 {
        self.los[self.linear_index(l, n, u)]
    }

    pub fn wall_nlos(&self, l: usize, n: usize, u: usize) -> f64 {
        self.wall_nlos[self.linear_index(l, n, u)]
    }

    pub fn oris_contrib(&self, l: usize, k: usize, n: usize, u: usize) -> f64 {
        self.oris_contrib[self.oris_index(l, k, n, u)]
    }

    /// Debug dump with columns `l,k,n,u,gain`; LoS and summed wall entries
    /// carry an empty `k`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "l,k,n,u,gain")?;
        for l in 0..self.aps {
            for n in 0..self.photodiodes {
                for u in 0..self.users {
                    writeln!(out, "{l},,{n},{u},{}", self.los(l, n, u) + self.wall_nlos(l, n, u))?;
                    for k in 0..self.oris_count {
                        let g = self.oris_contrib(l, k, n, u);
                        if g > 0.0 {
                            writeln!(out, "{l},{k},{n},{u},{g}")?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Overall gain from AP `l` to photodiode `n` of user `u` under an
/// allocation: LoS, plus diffuse wall sum, plus every ORIS element assigned
/// to exactly this (AP, photodiode, user) triple.
pub fn total_gain(
    l: usize,
    n: usize,
    u: usize,
    allocation: &Allocation,
    tables: &GainTables,
) -> f64 {
    let mut gain = tables.los(l, n, u) + tables.wall_nlos(l, n, u);
    for (k, assigned) in allocation.assignment.iter().enumerate() {
        if let Some(a) = assigned {
            if a.ap == l && a.photodiode == n && a.user == u {
                gain += tables.oris_contrib(l, k, n, u);
            }
        }
    }
    gain
}

/// Electrical SNR of photodiode `n` of user `u`: all APs transmit the same
/// data, so their gains add before squaring.
pub fn snr(
    n: usize,
    u: usize,
    allocation: &Allocation,
    budget: &LinkBudget,
    tables: &GainTables,
) -> f64 {
    let gain_sum: f64 = (0..tables.aps)
        .map(|l| total_gain(l, n, u, allocation, tables))
        .sum();
    let signal = tables.responsivity[u] * budget.power_per_subcarrier * gain_sum;
    signal * signal / (budget.noise_psd * budget.bandwidth)
}

/// Select-best combining: the SNR of user `u` is the best photodiode's SNR.
/// Ties go to the lowest photodiode index. Returns (SNR, photodiode index).
pub fn user_snr(
    u: usize,
    allocation: &Allocation,
    budget: &LinkBudget,
    tables: &GainTables,
) -> (f64, usize) {
    assert!(tables.photodiodes > 0, "ADR must have at least one photodiode");
    let mut best = (snr(0, u, allocation, budget, tables), 0);
    for n in 1..tables.photodiodes {
        let value = snr(n, u, allocation, budget, tables);
        if value > best.0 {
            best = (value, n);
        }
    }
    best
}

/// Tight lower bound of the IM/DD capacity, bits/s/Hz:
/// `log₂(1 + (e / 2π) · γ)`.
pub fn rate(snr: f64) -> Result<f64, ChannelError> {
    if snr < 0.0 {
        return Err(ChannelError::NegativeSnr(snr));
    }
    Ok((1.0 + E / (2.0 * PI) * snr).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        build_crown_molding, build_wall_grid, RoomConfig, Scenario, UserModel,
    };

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    fn assert_rel(actual: f64, expected: f64, rel: f64) {
        assert!(
            (actual - expected).abs() <= rel * expected.abs(),
            "expected {expected}, got {actual} (rel {rel})"
        );
    }

    fn upward_pd() -> PhotodiodeOrientation {
        PhotodiodeOrientation::new(0.0, 0.0).unwrap()
    }

    #[test]
    fn lambertian_order_reference_values() {
        assert_close(lambertian_order(60f64.to_radians()).unwrap(), 1.0, 1e-12);
        assert_close(lambertian_order(80f64.to_radians()).unwrap(), 0.3959, 1e-3);
        assert_close(lambertian_order(45f64.to_radians()).unwrap(), 2.0, 1e-9);
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(FRAC_PI_2).is_err());
    }

    #[test]
    fn los_gain_overhead_golden_value() {
        // AP 2 m above an upward photodiode, m = 1, A_PD = 1 cm²:
        // 2e-4 / (8π).
        let g = los_gain(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(0.0, 0.0, 1.0),
            &upward_pd(),
            60f64.to_radians(),
            1e-4,
            1.0,
            true,
        );
        assert_close(g, 7.957747154594767e-6, 1e-10);
    }

    #[test]
    fn los_gain_blocked_is_zero() {
        let g = los_gain(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(0.0, 0.0, 1.0),
            &upward_pd(),
            60f64.to_radians(),
            1e-4,
            1.0,
            false,
        );
        assert_eq!(g, 0.0);
    }

    #[test]
    fn los_gain_fov_boundary_is_inclusive() {
        let fov = 30f64.to_radians();
        let device = Vec3::new(0.0, 0.0, 1.0);
        // Incidence exactly at the FoV boundary.
        let ap_at = |angle: f64| Vec3::new(2.0 * angle.tan(), 0.0, 3.0);
        let at_boundary = los_gain(ap_at(fov), device, &upward_pd(), fov, 1e-4, 1.0, true);
        assert!(at_boundary > 0.0);
        let past = los_gain(
            ap_at(fov + 1f64.to_radians()),
            device,
            &upward_pd(),
            fov,
            1e-4,
            1.0,
            true,
        );
        assert_eq!(past, 0.0);
    }

    #[test]
    fn oris_gain_collinear_golden_value() {
        // AP, mirror, and photodiode on a vertical line, total path 2 m,
        // mirror reflectivity 0.95: 0.95 · 2e-4 / (8π).
        let g = oris_gain(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(0.0, 0.0, 1.0),
            &upward_pd(),
            60f64.to_radians(),
            1e-4,
            1.0,
            0.95,
        );
        assert_close(g, 7.5598597968650295e-6, 1e-10);
    }

    #[test]
    fn oris_gain_gates() {
        let out_of_fov = oris_gain(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(2.0, 0.0, 2.0),
            Vec3::new(0.0, 0.0, 1.0),
            &upward_pd(),
            30f64.to_radians(),
            1e-4,
            1.0,
            0.95,
        );
        assert_eq!(out_of_fov, 0.0, "incidence 63° exceeds 30° FoV");
        let absorbing = oris_gain(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(0.0, 0.0, 1.0),
            &upward_pd(),
            60f64.to_radians(),
            1e-4,
            1.0,
            0.0,
        );
        assert_eq!(absorbing, 0.0);
    }

    #[test]
    fn wall_gain_symmetric_golden_value() {
        // All four cosine factors 1/√2, both hops 2 m, cell area 0.0625 m²,
        // wall reflectivity 0.4, m = 1. Hand evaluation gives
        // 0.4 · 2e-4 · 0.0625 / (2π · 16) · 0.25 = 1.2434e-8.
        let s = std::f64::consts::SQRT_2;
        let g = wall_gain(
            Vec3::new(s, 0.0, s),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.0625,
            0.4,
            Vec3::new(s, 0.0, -s),
            &upward_pd(),
            60f64.to_radians(),
            1e-4,
            1.0,
        );
        assert_close(g, 1.243397992905432e-8, 1e-13);
    }

    #[test]
    fn wall_gain_gates() {
        let s = std::f64::consts::SQRT_2;
        // Device on the back side of the wall plane: cos(φ_wall) < 0.
        let behind = wall_gain(
            Vec3::new(s, 0.0, s),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.0625,
            0.4,
            Vec3::new(-s, 0.0, -s),
            &upward_pd(),
            89f64.to_radians(),
            1e-4,
            1.0,
        );
        assert_eq!(behind, 0.0);
        // Incidence at the photodiode past the FoV.
        let narrow = wall_gain(
            Vec3::new(s, 0.0, s),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.0625,
            0.4,
            Vec3::new(s, 0.0, -s),
            &upward_pd(),
            30f64.to_radians(),
            1e-4,
            1.0,
        );
        assert_eq!(narrow, 0.0);
    }

    #[test]
    fn link_budget_invariant_and_validation() {
        let budget = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
        assert_close(
            budget.total_power,
            budget.power_per_subcarrier * (62f64).sqrt(),
            1e-12,
        );
        let big = LinkBudget::new(1.0, 256, 2.5e-20, 2e7).unwrap();
        assert_close(big.power_per_subcarrier, 1.0 / 254f64.sqrt(), 1e-15);
        assert!(LinkBudget::new(1.0, 3, 2.5e-20, 2e7).is_err());
        assert!(LinkBudget::new(1.0, 6, 2.5e-20, 2e7).is_ok());
        assert!(LinkBudget::new(1.0, 7, 2.5e-20, 2e7).is_err());
        assert!(LinkBudget::new(-1.0, 64, 2.5e-20, 2e7).is_err());
    }

    fn small_room() -> RoomConfig {
        RoomConfig {
            width: 4.0,
            depth: 4.0,
            height: 3.0,
            ap_positions: vec![
                Vec3::new(1.0, 1.0, 3.0),
                Vec3::new(1.0, 3.0, 3.0),
                Vec3::new(3.0, 1.0, 3.0),
                Vec3::new(3.0, 3.0, 3.0),
            ],
            led_half_power_semi_angle: 80f64.to_radians(),
        }
    }

    fn small_model(tiers: u32, fov_deg: f64) -> UserModel {
        UserModel {
            body_height: 1.75,
            body_radius: 0.15,
            device_offset: 0.3,
            device_height: 1.0,
            tiers,
            fov: fov_deg.to_radians(),
            pd_area: 1e-4,
            responsivity: 0.4,
        }
    }

    fn scene_with_users(positions: &[(f64, f64)], tiers: u32, fov_deg: f64) -> Scenario {
        let room = small_room();
        let model = small_model(tiers, fov_deg);
        let users = positions
            .iter()
            .map(|&(x, y)| model.place(Vec3::new(x, y, 1.0), 0.0).unwrap())
            .collect();
        let crown = build_crown_molding(&room, 6, 2, 1.0 / 3.0, 0.95);
        let grid = build_wall_grid(&room, 1.0, 1.0 / 3.0, 0.4);
        Scenario::new(room, crown, grid, users, false)
    }

    #[test]
    fn total_gain_is_additive_in_assignments() {
        let scenario = scene_with_users(&[(1.0, 1.0), (3.0, 2.5)], 1, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        let empty = Allocation::empty(tables.oris_count);
        let base = total_gain(0, 0, 0, &empty, &tables);
        assert_close(base, tables.los(0, 0, 0) + tables.wall_nlos(0, 0, 0), 0.0);

        // Find an element with nonzero contribution to (0, 0, 0).
        let k = (0..tables.oris_count)
            .find(|&k| tables.oris_contrib(0, k, 0, 0) > 0.0)
            .expect("some element must reach the user");
        let mut allocation = Allocation::empty(tables.oris_count);
        allocation.assignment[k] = Some(Assignment {
            ap: 0,
            photodiode: 0,
            user: 0,
        });
        let with_oris = total_gain(0, 0, 0, &allocation, &tables);
        assert_close(with_oris, base + tables.oris_contrib(0, k, 0, 0), 1e-18);
        // Assigning the element to the other user leaves this one unchanged.
        allocation.assignment[k] = Some(Assignment {
            ap: 0,
            photodiode: 0,
            user: 1,
        });
        assert_eq!(total_gain(0, 0, 0, &allocation, &tables), base);
    }

    #[test]
    fn snr_arithmetic_reference() {
        // γ = (ρ · P_sc · ΣH)² / (N₀B) with ρ = 0.4, P_sc = 0.1, ΣH = 1e-5,
        // N₀B = 5e-13 comes to 0.32.
        let signal = 0.4 * 0.1 * 1e-5;
        let value: f64 = signal * signal / (2.5e-20 * 2e7);
        assert_close(value, 0.32, 1e-12);
    }

    #[test]
    fn snr_scales_with_power_squared() {
        let scenario = scene_with_users(&[(2.0, 2.0)], 1, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        let empty = Allocation::empty(tables.oris_count);
        let b1 = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
        let b2 = LinkBudget::new(2.0, 64, 2.5e-20, 2e7).unwrap();
        let s1 = snr(0, 0, &empty, &b1, &tables);
        let s2 = snr(0, 0, &empty, &b2, &tables);
        assert!(s1 > 0.0);
        assert_rel(s2, 4.0 * s1, 1e-12);
    }

    #[test]
    fn user_snr_select_best() {
        let scenario = scene_with_users(&[(2.0, 2.0)], 1, 45.0);
        let tables = GainTables::build(&scenario).unwrap();
        let empty = Allocation::empty(tables.oris_count);
        let budget = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
        let (best, chosen) = user_snr(0, &empty, &budget, &tables);
        for n in 0..tables.photodiodes {
            assert!(best >= snr(n, 0, &empty, &budget, &tables));
        }
        // At the room center under the symmetric AP layout the upward
        // central photodiode wins.
        assert_eq!(chosen, 0);
    }

    #[test]
    fn more_photodiodes_never_hurt() {
        for &fov in &[15.0, 45.0, 75.0] {
            let mut previous = 0.0;
            for tiers in 0..=3 {
                let scenario = scene_with_users(&[(1.3, 2.6)], tiers, fov);
                let tables = GainTables::build(&scenario).unwrap();
                let empty = Allocation::empty(tables.oris_count);
                let budget = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
                let (value, _) = user_snr(0, &empty, &budget, &tables);
                assert!(
                    value >= previous,
                    "tier {tiers} at {fov}° must not lose SNR"
                );
                previous = value;
            }
        }
    }

    #[test]
    fn gain_tables_monotone_in_fov() {
        let narrow = scene_with_users(&[(1.2, 3.1)], 1, 15.0);
        let wide = scene_with_users(&[(1.2, 3.1)], 1, 75.0);
        let tn = GainTables::build(&narrow).unwrap();
        let tw = GainTables::build(&wide).unwrap();
        for l in 0..tn.aps {
            for n in 0..tn.photodiodes {
                assert!(tw.los(l, n, 0) >= tn.los(l, n, 0));
                assert!(tw.wall_nlos(l, n, 0) >= tn.wall_nlos(l, n, 0));
                for k in 0..tn.oris_count {
                    assert!(tw.oris_contrib(l, k, n, 0) >= tn.oris_contrib(l, k, n, 0));
                }
            }
        }
    }

    #[test]
    fn db_gain_is_power_invariant() {
        let scenario = scene_with_users(&[(0.8, 0.8)], 1, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        let k = (0..tables.oris_count)
            .find(|&k| tables.oris_contrib(0, k, 0, 0) > 0.0)
            .unwrap();
        let mut allocation = Allocation::empty(tables.oris_count);
        allocation.assignment[k] = Some(Assignment {
            ap: 0,
            photodiode: 0,
            user: 0,
        });
        let empty = Allocation::empty(tables.oris_count);
        let ratio_at = |power: f64| {
            let budget = LinkBudget::new(power, 64, 2.5e-20, 2e7).unwrap();
            snr(0, 0, &allocation, &budget, &tables) / snr(0, 0, &empty, &budget, &tables)
        };
        assert_rel(ratio_at(1.0), ratio_at(10.0), 1e-12);
    }

    #[test]
    fn optical_snr_is_affine_in_assignment_flips() {
        let scenario = scene_with_users(&[(1.0, 2.0)], 1, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        let budget = LinkBudget::new(1.0, 64, 2.5e-20, 2e7).unwrap();
        let noise = (budget.noise_psd * budget.bandwidth).sqrt();
        let empty = Allocation::empty(tables.oris_count);
        for k in 0..tables.oris_count.min(40) {
            let c = tables.oris_contrib(2, k, 1, 0);
            let mut flipped = Allocation::empty(tables.oris_count);
            flipped.assignment[k] = Some(Assignment {
                ap: 2,
                photodiode: 1,
                user: 0,
            });
            let before = snr(1, 0, &empty, &budget, &tables).sqrt();
            let after = snr(1, 0, &flipped, &budget, &tables).sqrt();
            let predicted = tables.responsivity[0] * budget.power_per_subcarrier * c / noise;
            assert_close(after - before, predicted, 1e-9 * after.max(1.0));
        }
    }

    #[test]
    fn gains_invariant_under_scene_translation() {
        let pd = upward_pd();
        let shift = Vec3::new(11.0, -3.0, 5.0);
        let ap = Vec3::new(1.0, 1.0, 3.0);
        let device = Vec3::new(2.0, 2.5, 1.0);
        let mirror = Vec3::new(0.0, 1.7, 2.6);
        let g0 = oris_gain(ap, mirror, device, &pd, 1.0, 1e-4, 0.4, 0.95);
        let g1 = oris_gain(ap + shift, mirror + shift, device + shift, &pd, 1.0, 1e-4, 0.4, 0.95);
        assert!(g0 > 0.0);
        assert_rel(g1, g0, 1e-12);
    }

    #[test]
    fn all_gains_stay_below_one() {
        let scenario = scene_with_users(&[(0.5, 0.5), (3.5, 2.0)], 2, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        for l in 0..tables.aps {
            for n in 0..tables.photodiodes {
                for u in 0..tables.users {
                    assert!(tables.los(l, n, u) < 1.0);
                    assert!(tables.wall_nlos(l, n, u) < 1.0);
                    for k in 0..tables.oris_count {
                        assert!(tables.oris_contrib(l, k, n, u) < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn rate_reference_values() {
        assert_eq!(rate(0.0).unwrap(), 0.0);
        assert_close(rate(2.0 * PI / E).unwrap(), 1.0, 1e-12);
        assert_close(rate(1000.0).unwrap(), 8.7605, 1e-3);
        assert!(rate(-1.0).is_err());
    }

    #[test]
    fn gain_csv_dump_round_trips() {
        let scenario = scene_with_users(&[(2.0, 2.0)], 0, 75.0);
        let tables = GainTables::build(&scenario).unwrap();
        let mut buffer = Vec::new();
        tables.write_csv(&mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "l,k,n,u,gain");
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            if !fields[1].is_empty() {
                let l: usize = fields[0].parse().unwrap();
                let k: usize = fields[1].parse().unwrap();
                let gain: f64 = fields[4].parse().unwrap();
                assert_eq!(gain, tables.oris_contrib(l, k, 0, 0));
            }
        }
    }
}
