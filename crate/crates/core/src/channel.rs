//! Path loss, Nakagami-m small-scale fading and imperfect channel knowledge.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

use crate::numerics::{psd_sqrt_real, quad_form};
use crate::scenario::{Scenario, SystemParams};
use crate::types::{CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("zero distance between base station and user")]
    ZeroDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    /// UAV links.
    LoS,
    /// Ground-user links.
    NLoS,
}

/// Large-scale gain `A·d^(−α)` for a user at `ue_height`, `horizontal` meters
/// from a base station.
pub fn path_loss_gain(
    horizontal: f64,
    ue_height: f64,
    kind: LinkKind,
    params: &SystemParams,
) -> Result<f64, ChannelError> {
    let dz = ue_height - params.bs_height;
    let d2 = horizontal * horizontal + dz * dz;
    if !(d2 > 0.0) {
        return Err(ChannelError::ZeroDistance);
    }
    let (a, alpha) = match kind {
        LinkKind::LoS => (params.path_loss_ref_los, params.path_loss_exp_los),
        LinkKind::NLoS => (params.path_loss_ref_nlos, params.path_loss_exp_nlos),
    };
    Ok(a * d2.powf(-alpha / 2.0))
}

/// One channel vector whose entries have Gamma(m, m) power and uniform phase.
pub fn sample_fading_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, shape: u32) -> CVector {
    let exp = Exp::new(shape as f64).expect("positive rate");
    CVector::from_fn(n, |_, _| {
        let power: f64 = (0..shape).map(|_| exp.sample(rng)).sum();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        C64::from_polar(power.sqrt(), theta)
    })
}

/// `[m, n] = ρ^|m−n|`.
pub fn correlation_matrix(rho: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |a, b| {
        let k = a.abs_diff(b);
        if k == 0 {
            1.0
        } else {
            rho.powi(k as i32)
        }
    })
}

/// Small-scale channels for every (base station, user) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub num_antennas: usize,
    /// `gue[i][k]`: ground user `k` seen at base station `i`.
    pub gue: Vec<Vec<CVector>>,
    /// `uav[i][u]`: UAV `u` seen at base station `i`.
    pub uav: Vec<Vec<CVector>>,
    /// Large-scale gains at realization time. Gains for other UAV heights
    /// come from [`path_loss_gain`].
    pub gue_gain: Vec<Vec<f64>>,
    pub uav_gain: Vec<Vec<f64>>,
}

impl ChannelSet {
    pub fn num_links(&self) -> usize {
        self.gue.iter().map(Vec::len).sum::<usize>() + self.uav.iter().map(Vec::len).sum::<usize>()
    }

    /// Link kind of a UAV or ground-user link.
    pub fn kind(is_uav: bool) -> LinkKind {
        if is_uav {
            LinkKind::LoS
        } else {
            LinkKind::NLoS
        }
    }

    /// Writes one CSV row per antenna entry.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bs", "user_kind", "user", "antenna", "re", "im", "gain"])?;
        for (label, vecs, gains) in [
            ("gue", &self.gue, &self.gue_gain),
            ("uav", &self.uav, &self.uav_gain),
        ] {
            for (i, row) in vecs.iter().enumerate() {
                for (j, h) in row.iter().enumerate() {
                    for (a, c) in h.iter().enumerate() {
                        w.write_record(&[
                            i.to_string(),
                            label.to_string(),
                            j.to_string(),
                            a.to_string(),
                            format!("{:e}", c.re),
                            format!("{:e}", c.im),
                            format!("{:e}", gains[i][j]),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws fading for every link of `scn`, deterministic in `seed`.
pub fn realize_channels(scn: &Scenario, seed: u64) -> Result<ChannelSet, ChannelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    realize_channels_with(scn, &mut rng)
}

pub fn realize_channels_with<R: Rng + ?Sized>(
    scn: &Scenario,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    let p = &scn.params;
    let n = p.antennas_per_bs;
    let mut set = ChannelSet {
        num_antennas: n,
        gue: Vec::new(),
        uav: Vec::new(),
        gue_gain: Vec::new(),
        uav_gain: Vec::new(),
    };
    for i in 0..scn.num_bs() {
        let mut gv = Vec::new();
        let mut gg = Vec::new();
        for k in 0..scn.num_gue() {
            gv.push(sample_fading_vector(rng, n, p.nakagami_shape_nlos));
            gg.push(path_loss_gain(
                scn.horizontal_gue(i, k),
                0.0,
                LinkKind::NLoS,
                p,
            )?);
        }
        let mut uv = Vec::new();
        let mut ug = Vec::new();
        for u in 0..scn.num_uav() {
            uv.push(sample_fading_vector(rng, n, p.nakagami_shape_los));
            ug.push(path_loss_gain(
                scn.horizontal_uav(i, u),
                scn.uav_heights[u],
                LinkKind::LoS,
                p,
            )?);
        }
        set.gue.push(gv);
        set.gue_gain.push(gg);
        set.uav.push(uv);
        set.uav_gain.push(ug);
    }
    Ok(set)
}

/// Channel estimates together with error statistics and one realization of
/// the actual channels `h = ĥ + R^{1/2} e`.
#[derive(Debug, Clone)]
pub struct ImperfectChannelSet {
    pub estimate: ChannelSet,
    pub actual: ChannelSet,
    pub error_var: f64,
    pub rho: f64,
    pub corr: CMatrix,
    pub corr_sqrt: CMatrix,
}

pub fn corrupt_channels(
    set: &ChannelSet,
    error_var: f64,
    rho: f64,
    seed: u64,
) -> ImperfectChannelSet {
    let n = set.num_antennas;
    let corr_real = correlation_matrix(rho, n);
    let sqrt_real = psd_sqrt_real(&corr_real);
    let corr = corr_real.map(|x| C64::new(x, 0.0));
    let corr_sqrt = sqrt_real.map(|x| C64::new(x, 0.0));
    let actual = if error_var == 0.0 {
        set.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perturb = |rows: &Vec<Vec<CVector>>| -> Vec<Vec<CVector>> {
            rows.iter()
                .map(|row| {
                    row.iter()
                        .map(|h| h + &corr_sqrt * complex_normal(&mut rng, n, error_var))
                        .collect()
                })
                .collect()
        };
        let gue = perturb(&set.gue);
        let uav = perturb(&set.uav);
        ChannelSet {
            gue,
            uav,
            ..set.clone()
        }
    };
    ImperfectChannelSet {
        estimate: set.clone(),
        actual,
        error_var,
        rho,
        corr,
        corr_sqrt,
    }
}

/// Entries i.i.d. circularly-symmetric complex normal with variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVector {
    let s = (var / 2.0).sqrt();
    CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// The channel knowledge a receiver designs and evaluates with.
///
/// With `error_var = 0` every second moment collapses to `|zᴴh|²`.
#[derive(Debug, Clone, Copy)]
pub struct CsiView<'a> {
    pub channels: &'a ChannelSet,
    pub error_var: f64,
    pub corr: Option<&'a CMatrix>,
}

impl<'a> CsiView<'a> {
    pub fn perfect(channels: &'a ChannelSet) -> Self {
        CsiView {
            channels,
            error_var: 0.0,
            corr: None,
        }
    }

    /// Estimates plus error statistics.
    pub fn estimated(imp: &'a ImperfectChannelSet) -> Self {
        CsiView {
            channels: &imp.estimate,
            error_var: imp.error_var,
            corr: Some(&imp.corr),
        }
    }

    pub fn has_error(&self) -> bool {
        self.error_var > 0.0 && self.corr.is_some()
    }

    /// `σ² zᴴRz`.
    pub fn error_power(&self, z: &CVector) -> f64 {
        match self.corr {
            Some(r) if self.error_var > 0.0 => self.error_var * quad_form(r, z),
            _ => 0.0,
        }
    }

    /// `E|zᴴh|² = |zᴴĥ|² + σ² zᴴRz`.
    pub fn second_moment(&self, z: &CVector, h: &CVector) -> f64 {
        z.dotc(h).norm_sqr() + self.error_power(z)
    }

    pub fn gue(&self, bs: usize, k: usize) -> &'a CVector {
        &self.channels.gue[bs][k]
    }

    pub fn uav(&self, bs: usize, u: usize) -> &'a CVector {
        &self.channels.uav[bs][u]
    }

    pub fn num_antennas(&self) -> usize {
        self.channels.num_antennas
    }
}
