//! Uplink power control, SINR and effective-SINR evaluation, and rates.
//!
//! Received powers are kept in noise-normalized units: a weight `w` means
//! `P·ζ/σ²`, so the noise term of every SINR denominator is `‖z‖² = 1`.

use serde::{Deserialize, Serialize};

use crate::channel::{
    path_loss_gain, ChannelError, ChannelSet, CsiView, ImperfectChannelSet, LinkKind,
};
use crate::scenario::Scenario;
use crate::types::{CMatrix, CVector, C64};

/// UAV-to-base-station association, binary or relaxed to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    num_bs: usize,
    num_uav: usize,
    /// Entry `(i, u)` lives at `u * num_bs + i`.
    values: Vec<f64>,
    binary: bool,
}

impl Association {
    pub fn empty(num_bs: usize, num_uav: usize) -> Self {
        Association {
            num_bs,
            num_uav,
            values: vec![0.0; num_bs * num_uav],
            binary: true,
        }
    }

    pub fn from_choice(num_bs: usize, choice: &[Option<usize>]) -> Self {
        let mut a = Association::empty(num_bs, choice.len());
        for (u, c) in choice.iter().enumerate() {
            if let Some(i) = c {
                a.values[u * num_bs + i] = 1.0;
            }
        }
        a
    }

    /// Relaxed association from a vector laid out as [`Association::as_slice`].
    pub fn relaxed(num_bs: usize, num_uav: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), num_bs * num_uav, "association vector length");
        Association {
            num_bs,
            num_uav,
            values,
            binary: false,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_uav(&self) -> usize {
        self.num_uav
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn get(&self, bs: usize, u: usize) -> f64 {
        self.values[u * self.num_bs + bs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Serving base station of `u` in a binary association.
    pub fn serving(&self, u: usize) -> Option<usize> {
        (0..self.num_bs).find(|&i| self.get(i, u) > 0.5)
    }

    pub fn choice(&self) -> Vec<Option<usize>> {
        (0..self.num_uav).map(|u| self.serving(u)).collect()
    }

    pub fn row_sum(&self, bs: usize) -> f64 {
        (0..self.num_uav).map(|u| self.get(bs, u)).sum()
    }

    pub fn col_sum(&self, u: usize) -> f64 {
        (0..self.num_bs).map(|i| self.get(i, u)).sum()
    }

    pub fn activated(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `G × U` rows for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_bs)
            .map(|i| (0..self.num_uav).map(|u| self.get(i, u)).collect())
            .collect()
    }

    /// Checks that every UAV has exactly one base station (or at most one when
    /// `partial`) and that no base station exceeds `capacity`.
    pub fn is_valid(&self, capacity: usize, partial: bool) -> bool {
        let binary = self.values.iter().all(|&v| v == 0.0 || v == 1.0);
        let cols = (0..self.num_uav).all(|u| {
            let s = self.col_sum(u);
            if partial {
                s <= 1.0
            } else {
                s == 1.0
            }
        });
        let rows = (0..self.num_bs).all(|i| self.row_sum(i) <= capacity as f64);
        binary && cols && rows
    }
}

/// One unit-norm receive vector per ground user (at its cell) and per
/// associated UAV (at its serving base station).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamformerSet {
    pub gue: Vec<CVector>,
    pub uav: Vec<Option<CVector>>,
}

impl BeamformerSet {
    pub fn all_vectors(&self) -> impl Iterator<Item = &CVector> {
        self.gue.iter().chain(self.uav.iter().flatten())
    }
}

pub fn tx_power_gue(scn: &Scenario, bs: usize, k: usize) -> f64 {
    let p = &scn.params;
    let r = scn.horizontal_gue(bs, k);
    let d2 = r * r + p.bs_height * p.bs_height;
    p.max_power_gue
        .min(p.power_scale_nlos * d2.powf(p.path_loss_exp_nlos / 2.0))
}

pub fn tx_power_uav(scn: &Scenario, bs: usize, u: usize, height: f64) -> f64 {
    let p = &scn.params;
    let r = scn.horizontal_uav(bs, u);
    let dz = height - p.bs_height;
    p.max_power_uav
        .min(p.power_scale_los * (r * r + dz * dz).powf(p.path_loss_exp_los / 2.0))
}

/// Uncapped UAV power written in terms of `x = (h − h_G)²`.
pub fn tx_power_uav_from_x(scn: &Scenario, bs: usize, u: usize, x: f64) -> f64 {
    let p = &scn.params;
    let r = scn.horizontal_uav(bs, u);
    p.power_scale_los * (r * r + x).powf(p.path_loss_exp_los / 2.0)
}

/// Noise-normalized received powers for every transmitter/receiver pair at
/// fixed UAV heights.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    num_bs: usize,
    num_uav: usize,
    /// `[i * K + k]`: ground user `k` at base station `i`.
    gue: Vec<f64>,
    num_gue: usize,
    /// `[(g * G + i) * U + u]`: UAV `u`, powered for base station `g`, heard at `i`.
    uav: Vec<f64>,
}

impl LinkBudget {
    pub fn new(scn: &Scenario, heights: &[f64]) -> Result<Self, ChannelError> {
        let p = &scn.params;
        let noise = p.noise_power();
        let (g_n, k_n, u_n) = (scn.num_bs(), scn.num_gue(), scn.num_uav());
        let mut gue = vec![0.0; g_n * k_n];
        for k in 0..k_n {
            let power = tx_power_gue(scn, scn.gues[k].serving, k);
            for i in 0..g_n {
                gue[i * k_n + k] = power
                    * path_loss_gain(scn.horizontal_gue(i, k), 0.0, LinkKind::NLoS, p)?
                    / noise;
            }
        }
        let mut uav = vec![0.0; g_n * g_n * u_n];
        for u in 0..u_n {
            let gains: Vec<f64> = (0..g_n)
                .map(|i| path_loss_gain(scn.horizontal_uav(i, u), heights[u], LinkKind::LoS, p))
                .collect::<Result<_, _>>()?;
            for g in 0..g_n {
                let power = tx_power_uav(scn, g, u, heights[u]);
                for i in 0..g_n {
                    uav[(g * g_n + i) * u_n + u] = power * gains[i] / noise;
                }
            }
        }
        Ok(LinkBudget {
            num_bs: g_n,
            num_uav: u_n,
            gue,
            num_gue: k_n,
            uav,
        })
    }

    pub fn gue(&self, bs: usize, k: usize) -> f64 {
        self.gue[bs * self.num_gue + k]
    }

    /// UAV `u` with the power it uses toward `serving`, as heard at `at`.
    pub fn uav(&self, serving: usize, at: usize, u: usize) -> f64 {
        self.uav[(serving * self.num_bs + at) * self.num_uav + u]
    }

    /// Received weight of UAV `u` at `at`, averaged over a relaxed association.
    pub fn uav_mixed(&self, assoc: &Association, at: usize, u: usize) -> f64 {
        (0..self.num_bs)
            .map(|g| assoc.get(g, u) * self.uav(g, at, u))
            .sum()
    }
}

/// Receiver identity at a base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserId {
    Gue(usize),
    Uav(usize),
}

/// Interference-plus-noise covariance at base station `bs` seen by `own`.
///
/// Every other transmitter contributes `w (ĥĥᴴ + σ²R)`; the own link
/// contributes its estimation error `own_error_weight · σ²R`.
pub fn interference_covariance(
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    num_gue: usize,
    bs: usize,
    own: UserId,
    own_error_weight: f64,
) -> CMatrix {
    let n = view.num_antennas();
    let mut c = CMatrix::identity(n, n);
    let mut total = own_error_weight;
    for k in 0..num_gue {
        if own == UserId::Gue(k) {
            continue;
        }
        let w = budget.gue(bs, k);
        add_rank_one(&mut c, view.gue(bs, k), w);
        total += w;
    }
    for u in 0..assoc.num_uav() {
        if own == UserId::Uav(u) {
            continue;
        }
        let w = budget.uav_mixed(assoc, bs, u);
        if w > 0.0 {
            add_rank_one(&mut c, view.uav(bs, u), w);
            total += w;
        }
    }
    if let (Some(r), true) = (view.corr, view.has_error()) {
        c += r.scale(total * view.error_var);
    }
    c
}

pub(crate) fn add_rank_one(c: &mut CMatrix, h: &CVector, w: f64) {
    c.ger(C64::new(w, 0.0), h, &h.conjugate(), C64::new(1.0, 0.0));
}

/// (Effective) SINR of ground user `k` at its cell with beamformer `z`.
pub fn gue_sinr(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    k: usize,
    z: &CVector,
) -> f64 {
    let i = scn.gues[k].serving;
    let own = budget.gue(i, k);
    let err = view.error_power(z);
    let signal = own * z.dotc(view.gue(i, k)).norm_sqr();
    let mut den = 1.0 + own * err;
    for k2 in 0..scn.num_gue() {
        if k2 != k {
            den += budget.gue(i, k2) * view.second_moment(z, view.gue(i, k2));
        }
    }
    for u in 0..scn.num_uav() {
        let w = budget.uav_mixed(assoc, i, u);
        if w > 0.0 {
            den += w * view.second_moment(z, view.uav(i, u));
        }
    }
    signal / den
}

/// (Effective) SINR of UAV `u` at base station `bs` with beamformer `z`,
/// scaled by `a(bs, u)` in the numerator.
pub fn uav_sinr(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    bs: usize,
    u: usize,
    z: &CVector,
) -> f64 {
    let a = assoc.get(bs, u);
    if a == 0.0 {
        return 0.0;
    }
    let own = budget.uav(bs, bs, u);
    let signal = a * own * z.dotc(view.uav(bs, u)).norm_sqr();
    let mut den = 1.0 + a * own * view.error_power(z);
    for k in 0..scn.num_gue() {
        den += budget.gue(bs, k) * view.second_moment(z, view.gue(bs, k));
    }
    for u2 in 0..scn.num_uav() {
        if u2 == u {
            continue;
        }
        let w = budget.uav_mixed(assoc, bs, u2);
        if w > 0.0 {
            den += w * view.second_moment(z, view.uav(bs, u2));
        }
    }
    signal / den
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SinrReport {
    pub gue: Vec<f64>,
    /// Zero for UAVs without a base station.
    pub uav: Vec<f64>,
}

impl SinrReport {
    pub fn min_uav(&self) -> f64 {
        self.uav.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_gue(&self) -> f64 {
        self.gue.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// SINRs of all users under a binary association.
pub fn sinr_with_view(
    scn: &Scenario,
    view: &CsiView<'_>,
    assoc: &Association,
    bf: &BeamformerSet,
    heights: &[f64],
) -> Result<SinrReport, ChannelError> {
    let budget = LinkBudget::new(scn, heights)?;
    Ok(sinr_with_budget(scn, view, &budget, assoc, bf))
}

pub fn sinr_with_budget(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    bf: &BeamformerSet,
) -> SinrReport {
    let gue = (0..scn.num_gue())
        .map(|k| gue_sinr(scn, view, budget, assoc, k, &bf.gue[k]))
        .collect();
    let uav = (0..scn.num_uav())
        .map(|u| match (assoc.serving(u), &bf.uav[u]) {
            (Some(i), Some(z)) => uav_sinr(scn, view, budget, assoc, i, u, z),
            _ => 0.0,
        })
        .collect();
    SinrReport { gue, uav }
}

/// Perfect-CSI SINRs on `channels`.
pub fn sinr_all(
    scn: &Scenario,
    channels: &ChannelSet,
    assoc: &Association,
    bf: &BeamformerSet,
    heights: &[f64],
) -> Result<SinrReport, ChannelError> {
    sinr_with_view(scn, &CsiView::perfect(channels), assoc, bf, heights)
}

/// Effective SINRs from channel estimates and error statistics.
pub fn effective_sinr_all(
    scn: &Scenario,
    imp: &ImperfectChannelSet,
    assoc: &Association,
    bf: &BeamformerSet,
    heights: &[f64],
) -> Result<SinrReport, ChannelError> {
    sinr_with_view(scn, &CsiView::estimated(imp), assoc, bf, heights)
}

pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn rates(sinrs: &[f64]) -> Vec<f64> {
    sinrs.iter().map(|&s| rate(s)).collect()
}

pub fn min_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&s| rate(s)).fold(f64::INFINITY, f64::min)
}
