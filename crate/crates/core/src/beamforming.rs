//! Receive beamformer designs: the big-M quotient maximizer used during
//! association search, MMSE, and the MF / partial zero-forcing baselines.
//!
//! Every design reads channels through a [`CsiView`]. With estimation error
//! the rank-one terms `hhᴴ` of each covariance become `ĥĥᴴ + σ²R`, while the
//! desired numerator stays `ĥĥᴴ`; with zero error the view reproduces the
//! perfect-CSI designs exactly.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::CsiView;
use crate::linkmetrics::{interference_covariance, Association, BeamformerSet, LinkBudget, UserId};
use crate::numerics::{canonical_phase, leading_gen_eigpair, NumericsError};
use crate::scenario::Scenario;
use crate::types::{CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformingError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("desired channel is zero")]
    ZeroChannel,
    #[error("UAV {0} has no serving base station")]
    Unassociated(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformerKind {
    /// SINR-optimal (MMSE) receiver.
    Optimal,
    Pzf,
    Mf,
}

impl BeamformerKind {
    pub fn label(self) -> &'static str {
        match self {
            BeamformerKind::Optimal => "optimal",
            BeamformerKind::Pzf => "pzf",
            BeamformerKind::Mf => "mf",
        }
    }
}

impl std::str::FromStr for BeamformerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" | "mmse" => Ok(BeamformerKind::Optimal),
            "pzf" => Ok(BeamformerKind::Pzf),
            "mf" => Ok(BeamformerKind::Mf),
            other => Err(format!("unknown beamformer kind `{other}`")),
        }
    }
}

fn normalized(v: CVector) -> Result<CVector, BeamformingError> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(BeamformingError::ZeroChannel);
    }
    Ok(canonical_phase(v.unscale(n)))
}

/// `C⁻¹h / ‖C⁻¹h‖`, the maximizer of `|zᴴh|² / zᴴCz`.
pub fn mmse_direction(cov: &CMatrix, h: &CVector) -> Result<CVector, BeamformingError> {
    if h.norm() == 0.0 {
        return Err(BeamformingError::ZeroChannel);
    }
    let chol = Cholesky::new(cov.clone()).ok_or(NumericsError::SingularMatrix)?;
    normalized(chol.solve(h))
}

/// Covariance seen by UAV `u` at base station `bs` under a (possibly relaxed)
/// association. The own estimation-error term is weighted by `a(bs, u)`.
pub fn uav_covariance(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    bs: usize,
    u: usize,
) -> CMatrix {
    let own_err = assoc.get(bs, u) * budget.uav(bs, bs, u);
    interference_covariance(
        view,
        budget,
        assoc,
        scn.num_gue(),
        bs,
        UserId::Uav(u),
        own_err,
    )
}

/// Covariance seen by ground user `k` at its own base station.
pub fn gue_covariance(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    k: usize,
) -> CMatrix {
    let i = scn.gues[k].serving;
    interference_covariance(
        view,
        budget,
        assoc,
        scn.num_gue(),
        i,
        UserId::Gue(k),
        budget.gue(i, k),
    )
}

/// Maximizer of `(a·w·|zᴴĥ|² + M(1−a)) / zᴴCz` for UAV `u` at `bs`.
///
/// At `a = 1` the identity term vanishes and the closed form `C⁻¹ĥ` is used;
/// otherwise the generalized eigenproblem is solved.
pub fn bf_uav_big_m(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    big_m: f64,
    bs: usize,
    u: usize,
) -> Result<CVector, BeamformingError> {
    let cov = uav_covariance(scn, view, budget, assoc, bs, u);
    let a = assoc.get(bs, u);
    let h = view.uav(bs, u);
    let slack = big_m * (1.0 - a);
    if slack <= 0.0 || a >= 1.0 {
        return mmse_direction(&cov, h);
    }
    let n = view.num_antennas();
    let mut num = CMatrix::identity(n, n).scale(slack);
    num.ger(
        C64::new(a * budget.uav(bs, bs, u), 0.0),
        h,
        &h.conjugate(),
        C64::new(1.0, 0.0),
    );
    let (_, z) = leading_gen_eigpair(&num, &cov)?;
    Ok(z)
}

/// Ground-user beamformer in closed form `C⁻¹ĥ`.
pub fn bf_gue(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    k: usize,
) -> Result<CVector, BeamformingError> {
    let i = scn.gues[k].serving;
    mmse_direction(&gue_covariance(scn, view, budget, assoc, k), view.gue(i, k))
}

/// Ground-user beamformer as the leading generalized eigenvector of
/// `(w ĥĥᴴ, C)`. Collinear with [`bf_gue`].
pub fn bf_gue_eigen(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    k: usize,
) -> Result<CVector, BeamformingError> {
    let i = scn.gues[k].serving;
    let h = view.gue(i, k);
    let n = view.num_antennas();
    let mut num = CMatrix::zeros(n, n);
    num.ger(
        C64::new(budget.gue(i, k), 0.0),
        h,
        &h.conjugate(),
        C64::new(1.0, 0.0),
    );
    let (_, z) = leading_gen_eigpair(&num, &gue_covariance(scn, view, budget, assoc, k))?;
    Ok(z)
}

/// MMSE beamformer of UAV `u` at its serving base station. The link budget
/// carries the height-dependent transmit powers.
pub fn bf_mmse_uav(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    u: usize,
) -> Result<CVector, BeamformingError> {
    let i = assoc.serving(u).ok_or(BeamformingError::Unassociated(u))?;
    mmse_direction(
        &uav_covariance(scn, view, budget, assoc, i, u),
        view.uav(i, u),
    )
}

/// MMSE beamformers for every ground user and associated UAV.
pub fn mmse_set(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
) -> Result<BeamformerSet, BeamformingError> {
    let gue = (0..scn.num_gue())
        .map(|k| bf_gue(scn, view, budget, assoc, k))
        .collect::<Result<_, _>>()?;
    let uav = (0..scn.num_uav())
        .map(|u| match assoc.serving(u) {
            Some(_) => bf_mmse_uav(scn, view, budget, assoc, u).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_, _>>()?;
    Ok(BeamformerSet { gue, uav })
}

pub fn matched_filter(h: &CVector) -> Result<CVector, BeamformingError> {
    normalized(h.clone())
}

/// Projects `h` off the span of the strongest `N − 1` interferers.
///
/// `interferers` pairs each channel with its received power; weaker ones are
/// dropped first when they would exhaust the spatial dimensions. Returns the
/// beamformer and whether it degenerated to the matched filter because `h`
/// lies inside the nulled span.
pub fn partial_zero_forcing(
    h: &CVector,
    interferers: &[(CVector, f64)],
) -> Result<(CVector, bool), BeamformingError> {
    let n = h.len();
    let mut order: Vec<usize> = (0..interferers.len()).collect();
    order.sort_by(|&a, &b| {
        interferers[b]
            .1
            .total_cmp(&interferers[a].1)
            .then(a.cmp(&b))
    });
    let mut kept = order.clone();
    let basis = loop {
        let basis = orthonormal_basis(kept.iter().map(|&j| &interferers[j].0), n);
        if basis.ncols() < n || kept.is_empty() {
            break basis;
        }
        kept.pop();
    };
    let proj = h - &basis * (basis.adjoint() * h);
    if proj.norm() <= 1e-9 * h.norm() {
        return Ok((matched_filter(h)?, true));
    }
    Ok((normalized(proj)?, false))
}

fn orthonormal_basis<'a>(vectors: impl Iterator<Item = &'a CVector>, n: usize) -> CMatrix {
    let cols: Vec<&CVector> = vectors.collect();
    if cols.is_empty() {
        return CMatrix::zeros(n, 0);
    }
    let m = CMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| svd.singular_values[j] > 1e-10 * smax.max(f64::MIN_POSITIVE))
        .collect();
    CMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

/// Nulling set of a user at `bs`: every other user served by `bs` plus every
/// UAV served elsewhere, with its received power at `bs`.
fn nulling_set(
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    bs: usize,
    me: UserId,
) -> Vec<(CVector, f64)> {
    let mut set = Vec::new();
    for k in scn.gues_of(bs) {
        if me != UserId::Gue(k) {
            set.push((view.gue(bs, k).clone(), budget.gue(bs, k)));
        }
    }
    for u in 0..scn.num_uav() {
        if me == UserId::Uav(u) {
            continue;
        }
        if let Some(g) = assoc.serving(u) {
            set.push((view.uav(bs, u).clone(), budget.uav(g, bs, u)));
        }
    }
    set
}

/// A baseline or optimal beamformer set; `degenerate` counts PZF users that
/// fell back to the matched filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignedBeamformers {
    pub set: BeamformerSet,
    pub degenerate: usize,
}

/// Beamformer of a single user under the chosen design.
pub fn bf_baseline(
    kind: BeamformerKind,
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
    user: UserId,
) -> Result<(CVector, bool), BeamformingError> {
    let (bs, h) = match user {
        UserId::Gue(k) => (scn.gues[k].serving, view.gue(scn.gues[k].serving, k)),
        UserId::Uav(u) => {
            let i = assoc.serving(u).ok_or(BeamformingError::Unassociated(u))?;
            (i, view.uav(i, u))
        }
    };
    match kind {
        BeamformerKind::Mf => Ok((matched_filter(h)?, false)),
        BeamformerKind::Pzf => {
            partial_zero_forcing(h, &nulling_set(scn, view, budget, assoc, bs, user))
        }
        BeamformerKind::Optimal => {
            let z = match user {
                UserId::Gue(k) => bf_gue(scn, view, budget, assoc, k)?,
                UserId::Uav(u) => bf_mmse_uav(scn, view, budget, assoc, u)?,
            };
            Ok((z, false))
        }
    }
}

pub fn design_beamformers(
    kind: BeamformerKind,
    scn: &Scenario,
    view: &CsiView<'_>,
    budget: &LinkBudget,
    assoc: &Association,
) -> Result<DesignedBeamformers, BeamformingError> {
    let mut degenerate = 0;
    let mut gue = Vec::with_capacity(scn.num_gue());
    for k in 0..scn.num_gue() {
        let (z, d) = bf_baseline(kind, scn, view, budget, assoc, UserId::Gue(k))?;
        degenerate += d as usize;
        gue.push(z);
    }
    let mut uav = Vec::with_capacity(scn.num_uav());
    for u in 0..scn.num_uav() {
        if assoc.serving(u).is_none() {
            uav.push(None);
            continue;
        }
        let (z, d) = bf_baseline(kind, scn, view, budget, assoc, UserId::Uav(u))?;
        degenerate += d as usize;
        uav.push(Some(z));
    }
    Ok(DesignedBeamformers {
        set: BeamformerSet { gue, uav },
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{corrupt_channels, realize_channels, ChannelSet};
    use crate::linkmetrics::sinr_with_budget;
    use crate::numerics::{quad_form, rayleigh_quotient};
    use crate::scenario::{generate_scenario, GroundUser, Point2, SystemParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn collinear(a: &CVector, b: &CVector) -> f64 {
        a.dotc(b).norm() / (a.norm() * b.norm())
    }

    fn random_case(seed: u64) -> (Scenario, ChannelSet, Association) {
        let params = SystemParams {
            antennas_per_bs: 8,
            ..Default::default()
        };
        let scn = generate_scenario(seed, &params).unwrap();
        let ch = realize_channels(&scn, seed ^ 0xabc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..3 * scn.num_uav())
            .map(|_| rng.random::<f64>() / 3.0)
            .collect();
        (scn, ch, Association::relaxed(3, params.num_uav, values))
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        let v = CVector::from_fn(n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        v.unscale(v.norm())
    }

    fn lone_uav() -> Scenario {
        let params = SystemParams {
            num_bs: 1,
            gues_per_cell: 0,
            num_uav: 1,
            ..Default::default()
        };
        Scenario {
            params,
            bs_positions: vec![Point2::new(0.0, 0.0)],
            gues: vec![],
            uav_positions: vec![Point2::new(40.0, 30.0)],
            uav_heights: vec![120.0],
        }
    }

    #[test]
    fn lone_active_uav_gets_matched_filter() {
        let scn = lone_uav();
        let ch = realize_channels(&scn, 1).unwrap();
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        let assoc = Association::from_choice(1, &[Some(0)]);
        let z = bf_uav_big_m(&scn, &CsiView::perfect(&ch), &budget, &assoc, 5.0, 0, 0).unwrap();
        assert!(collinear(&z, &ch.uav[0][0]) > 1.0 - 1e-12);
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inactive_uav_picks_least_interfered_direction() {
        let (scn, ch, mut assoc) = random_case(2);
        let mut v = assoc.as_slice().to_vec();
        v[0] = 0.0;
        assoc = Association::relaxed(3, scn.num_uav(), v);
        let view = CsiView::perfect(&ch);
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        let z = bf_uav_big_m(&scn, &view, &budget, &assoc, 1e3, 0, 0).unwrap();
        let cov = uav_covariance(&scn, &view, &budget, &assoc, 0, 0);
        let eig = nalgebra::SymmetricEigen::new(cov.clone());
        let lmin = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((quad_form(&cov, &z) - lmin).abs() < 1e-8 * lmin);
    }

    #[test]
    fn big_m_beamformer_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5 {
            let (scn, ch, assoc) = random_case(seed);
            let view = CsiView::perfect(&ch);
            let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
            let (bs, u, m) = (1, 2, 50.0);
            let z = bf_uav_big_m(&scn, &view, &budget, &assoc, m, bs, u).unwrap();
            let cov = uav_covariance(&scn, &view, &budget, &assoc, bs, u);
            let a = assoc.get(bs, u);
            let h = view.uav(bs, u);
            let mut num = CMatrix::identity(8, 8).scale(m * (1.0 - a));
            num += (h * h.adjoint()).scale(a * budget.uav(bs, bs, u));
            let best = rayleigh_quotient(&num, &cov, &z);
            for _ in 0..1000 {
                let p = random_unit(&mut rng, 8);
                assert!(rayleigh_quotient(&num, &cov, &p) <= best * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn gue_closed_form_and_eigen_paths_agree() {
        for seed in 0..10 {
            let (scn, ch, assoc) = random_case(seed);
            let view = CsiView::perfect(&ch);
            let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
            for k in 0..scn.num_gue() {
                let a = bf_gue(&scn, &view, &budget, &assoc, k).unwrap();
                let b = bf_gue_eigen(&scn, &view, &budget, &assoc, k).unwrap();
                assert!(collinear(&a, &b) >= 1.0 - 1e-8);
            }
        }
    }

    #[test]
    fn interference_free_gue_gets_matched_filter() {
        let params = SystemParams {
            num_bs: 1,
            gues_per_cell: 1,
            num_uav: 0,
            ..Default::default()
        };
        let scn = Scenario {
            params,
            bs_positions: vec![Point2::new(0.0, 0.0)],
            gues: vec![GroundUser {
                x: 30.0,
                y: 0.0,
                serving: 0,
            }],
            uav_positions: vec![],
            uav_heights: vec![],
        };
        let ch = realize_channels(&scn, 5).unwrap();
        let budget = LinkBudget::new(&scn, &[]).unwrap();
        let z = bf_gue(
            &scn,
            &CsiView::perfect(&ch),
            &budget,
            &Association::empty(1, 0),
            0,
        )
        .unwrap();
        assert!(collinear(&z, &ch.gue[0][0]) > 1.0 - 1e-12);
    }

    #[test]
    fn orthogonal_interferer_leaves_matched_filter() {
        let mut scn = lone_uav();
        scn.params.gues_per_cell = 1;
        scn.gues = vec![GroundUser {
            x: 50.0,
            y: 0.0,
            serving: 0,
        }];
        let mut ch = realize_channels(&scn, 6).unwrap();
        let n = ch.num_antennas;
        let mut h = CVector::zeros(n);
        h[0] = C64::new(1.0, 0.0);
        let mut g = CVector::zeros(n);
        g[1] = C64::new(0.0, 2.0);
        ch.gue[0][0] = h.clone();
        ch.uav[0][0] = g;
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        let assoc = Association::from_choice(1, &[Some(0)]);
        let z = bf_gue(&scn, &CsiView::perfect(&ch), &budget, &assoc, 0).unwrap();
        assert!(collinear(&z, &h) > 1.0 - 1e-12);
    }

    #[test]
    fn mmse_uav_matches_big_m_when_active() {
        let (scn, ch, _) = random_case(7);
        let choice: Vec<Option<usize>> = (0..scn.num_uav()).map(|u| Some(u % 3)).collect();
        let assoc = Association::from_choice(3, &choice);
        let view = CsiView::perfect(&ch);
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        for u in 0..scn.num_uav() {
            let a = bf_mmse_uav(&scn, &view, &budget, &assoc, u).unwrap();
            let b = bf_uav_big_m(&scn, &view, &budget, &assoc, 1e4, u % 3, u).unwrap();
            assert!(collinear(&a, &b) >= 1.0 - 1e-10);
            assert!((a.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pzf_nulls_and_falls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_unit(&mut rng, 4);
        let g = random_unit(&mut rng, 4);
        let (z, degen) = partial_zero_forcing(&h, &[(g.clone(), 1.0)]).unwrap();
        assert!(!degen && z.dotc(&g).norm() < 1e-9);
        let (z, _) = partial_zero_forcing(&h, &[]).unwrap();
        assert!((z - matched_filter(&h).unwrap()).norm() < 1e-12);
        let (_, degen) = partial_zero_forcing(&h, &[(h.scale(2.0), 1.0)]).unwrap();
        assert!(degen);
    }

    #[test]
    fn pzf_drops_weakest_when_dimensions_run_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_unit(&mut rng, 3);
        let ints: Vec<(CVector, f64)> = (0..4)
            .map(|j| (random_unit(&mut rng, 3), [5.0, 1.0, 3.0, 0.5][j]))
            .collect();
        let (z, degen) = partial_zero_forcing(&h, &ints).unwrap();
        assert!(!degen);
        assert!(z.dotc(&ints[0].0).norm() < 1e-9 && z.dotc(&ints[2].0).norm() < 1e-9);
        assert!(z.dotc(&ints[1].0).norm() > 1e-6);
    }

    #[test]
    fn robust_design_collapses_without_error() {
        let (scn, ch, assoc) = random_case(10);
        let imp = corrupt_channels(&ch, 0.0, 0.6, 1);
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        let a = bf_uav_big_m(&scn, &CsiView::perfect(&ch), &budget, &assoc, 30.0, 0, 1).unwrap();
        let b = bf_uav_big_m(&scn, &CsiView::estimated(&imp), &budget, &assoc, 30.0, 0, 1).unwrap();
        assert_eq!(a, b);
        let a = bf_gue(&scn, &CsiView::perfect(&ch), &budget, &assoc, 2).unwrap();
        let b = bf_gue(&scn, &CsiView::estimated(&imp), &budget, &assoc, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_error_tends_to_correlation_whitened_direction() {
        let (scn, ch, assoc) = random_case(11);
        let imp = corrupt_channels(&ch, 1e6, 0.6, 1);
        let view = CsiView::estimated(&imp);
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        let z = bf_gue(&scn, &view, &budget, &assoc, 0).unwrap();
        // Covariance is dominated by σ²R; the leading direction of (σ²R + I)⁻¹ĥĥᴴ.
        let n = ch.num_antennas;
        let cov = imp.corr.scale(1e6) + CMatrix::identity(n, n);
        let h = view.gue(scn.gues[0].serving, 0);
        let (_, want) = leading_gen_eigpair(&(h * h.adjoint()), &cov).unwrap();
        assert!(collinear(&z, &want) > 1.0 - 1e-6);
    }

    #[test]
    fn robust_design_wins_on_effective_sinr() {
        for seed in 0..10 {
            let (scn, ch, _) = random_case(seed);
            let choice: Vec<Option<usize>> = (0..scn.num_uav()).map(|u| Some(u % 3)).collect();
            let assoc = Association::from_choice(3, &choice);
            let imp = corrupt_channels(&ch, 0.05, 0.6, seed);
            let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
            let robust_view = CsiView::estimated(&imp);
            let naive = mmse_set(&scn, &CsiView::perfect(&ch), &budget, &assoc).unwrap();
            let robust = mmse_set(&scn, &robust_view, &budget, &assoc).unwrap();
            let a = sinr_with_budget(&scn, &robust_view, &budget, &assoc, &robust);
            let b = sinr_with_budget(&scn, &robust_view, &budget, &assoc, &naive);
            for (x, y) in a.gue.iter().chain(&a.uav).zip(b.gue.iter().chain(&b.uav)) {
                assert!(*x >= y * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn designs_are_unit_norm() {
        let (scn, ch, _) = random_case(12);
        let choice: Vec<Option<usize>> = (0..scn.num_uav()).map(|u| Some(u % 3)).collect();
        let assoc = Association::from_choice(3, &choice);
        let view = CsiView::perfect(&ch);
        let budget = LinkBudget::new(&scn, &scn.uav_heights).unwrap();
        for kind in [
            BeamformerKind::Optimal,
            BeamformerKind::Pzf,
            BeamformerKind::Mf,
        ] {
            let d = design_beamformers(kind, &scn, &view, &budget, &assoc).unwrap();
            assert!(d.set.all_vectors().all(|z| (z.norm() - 1.0).abs() < 1e-9));
        }
    }
}
