//! System parameters, network geometry and scenario files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Physical constants and network dimensions. All quantities are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub path_loss_ref_los: f64,
    pub path_loss_exp_los: f64,
    pub path_loss_ref_nlos: f64,
    pub path_loss_exp_nlos: f64,
    pub nakagami_shape_los: u32,
    pub nakagami_shape_nlos: u32,
    /// W·m^(−α) for UAV links.
    pub power_scale_los: f64,
    /// W·m^(−α) for ground-user links.
    pub power_scale_nlos: f64,
    #[serde(deserialize_with = "de_power")]
    pub max_power_gue: f64,
    #[serde(deserialize_with = "de_power")]
    pub max_power_uav: f64,
    /// Noise spectral density in W/Hz.
    #[serde(deserialize_with = "de_density")]
    pub noise_density: f64,
    pub bandwidth: f64,
    /// Linear SINR every ground user must reach.
    pub gue_target_sinr: f64,
    pub bs_height: f64,
    pub uav_height_min: f64,
    pub uav_height_max: f64,
    pub antennas_per_bs: usize,
    pub gues_per_cell: usize,
    pub num_bs: usize,
    pub num_uav: usize,
    pub channel_error_var: f64,
    pub correlation_coeff: f64,
    /// Require `uav_height_min ≥ 100 m`, where the LoS model for UAV links holds.
    pub enforce_los_regime: bool,
    /// Side of the square deployment area, centered at the origin.
    pub area_side: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            path_loss_ref_los: 6e-3,
            path_loss_exp_los: 2.09,
            path_loss_ref_nlos: 1e-3,
            path_loss_exp_nlos: 3.75,
            nakagami_shape_los: 3,
            nakagami_shape_nlos: 1,
            power_scale_los: 1.2e-8,
            power_scale_nlos: 1.67e-9,
            max_power_gue: 0.2,
            max_power_uav: 0.2,
            noise_density: dbm_to_watt(-174.0),
            bandwidth: 1e6,
            gue_target_sinr: 2.0,
            bs_height: 25.0,
            uav_height_min: 100.0,
            uav_height_max: 300.0,
            antennas_per_bs: 8,
            gues_per_cell: 2,
            num_bs: 3,
            num_uav: 6,
            channel_error_var: 0.0,
            correlation_coeff: 0.0,
            enforce_los_regime: true,
            area_side: 600.0,
        }
    }
}

impl SystemParams {
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.bandwidth
    }

    /// Number of UAVs a base station can serve next to its ground users.
    pub fn uav_capacity(&self) -> usize {
        self.antennas_per_bs - self.gues_per_cell
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("path_loss_ref_los", self.path_loss_ref_los),
            ("path_loss_exp_los", self.path_loss_exp_los),
            ("path_loss_ref_nlos", self.path_loss_ref_nlos),
            ("path_loss_exp_nlos", self.path_loss_exp_nlos),
            ("power_scale_los", self.power_scale_los),
            ("power_scale_nlos", self.power_scale_nlos),
            ("max_power_gue", self.max_power_gue),
            ("max_power_uav", self.max_power_uav),
            ("noise_density", self.noise_density),
            ("bandwidth", self.bandwidth),
            ("gue_target_sinr", self.gue_target_sinr),
            ("area_side", self.area_side),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be finite and positive, got {v}"),
                ));
            }
        }
        if self.nakagami_shape_los == 0 {
            return Err(invalid("nakagami_shape_los", "must be at least 1"));
        }
        if self.nakagami_shape_nlos == 0 {
            return Err(invalid("nakagami_shape_nlos", "must be at least 1"));
        }
        if !(self.bs_height.is_finite() && self.bs_height >= 0.0) {
            return Err(invalid("bs_height", "must be finite and non-negative"));
        }
        if !(self.uav_height_min.is_finite() && self.uav_height_min > self.bs_height) {
            return Err(invalid("uav_height_min", "must exceed bs_height"));
        }
        if self.enforce_los_regime && self.uav_height_min < 100.0 {
            return Err(invalid(
                "uav_height_min",
                "must be at least 100 m while enforce_los_regime is set",
            ));
        }
        if !(self.uav_height_max.is_finite() && self.uav_height_max >= self.uav_height_min) {
            return Err(invalid("uav_height_max", "must be at least uav_height_min"));
        }
        if self.antennas_per_bs == 0 {
            return Err(invalid("antennas_per_bs", "must be at least 1"));
        }
        if self.gues_per_cell > self.antennas_per_bs {
            return Err(invalid("gues_per_cell", "cannot exceed antennas_per_bs"));
        }
        if self.num_bs == 0 {
            return Err(invalid("num_bs", "must be at least 1"));
        }
        if !(self.channel_error_var.is_finite() && self.channel_error_var >= 0.0) {
            return Err(invalid(
                "channel_error_var",
                "must be finite and non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.correlation_coeff) {
            return Err(invalid("correlation_coeff", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrText {
    Num(f64),
    Int(i64),
    Text(String),
}

fn parse_quantity(text: &str, units: &[(&str, fn(f64) -> f64)]) -> Result<f64, String> {
    let t = text.trim().replace('\u{2212}', "-");
    for (suffix, conv) in units {
        if let Some(num) = t.strip_suffix(suffix) {
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad number in {text:?}"))?;
            return Ok(conv(v));
        }
    }
    let names: Vec<&str> = units.iter().map(|u| u.0).collect();
    Err(format!("{text:?} needs one of the unit suffixes {names:?}"))
}

fn de_power<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match NumOrText::deserialize(d)? {
        NumOrText::Num(v) => Ok(v),
        NumOrText::Int(v) => Ok(v as f64),
        NumOrText::Text(s) => parse_quantity(
            &s,
            &[("dBm", dbm_to_watt), ("mW", |v| v * 1e-3), ("W", |v| v)],
        )
        .map_err(serde::de::Error::custom),
    }
}

fn de_density<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match NumOrText::deserialize(d)? {
        NumOrText::Num(v) => Ok(v),
        NumOrText::Int(v) => Ok(v as f64),
        NumOrText::Text(s) => parse_quantity(&s, &[("dBm/Hz", dbm_to_watt), ("W/Hz", |v| v)])
            .map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundUser {
    pub x: f64,
    pub y: f64,
    /// Index of the base station the user is pre-associated with.
    pub serving: usize,
}

impl GroundUser {
    pub fn pos(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavPlacement {
    pub x: f64,
    pub y: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub bs_positions: Vec<Point2>,
    pub gues: Vec<GroundUser>,
    pub uav_positions: Vec<Point2>,
    pub uav_heights: Vec<f64>,
}

impl Scenario {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_gue(&self) -> usize {
        self.gues.len()
    }

    pub fn num_uav(&self) -> usize {
        self.uav_positions.len()
    }

    /// Ground users pre-associated with base station `bs`.
    pub fn gues_of(&self, bs: usize) -> impl Iterator<Item = usize> + '_ {
        self.gues
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.serving == bs)
            .map(|(k, _)| k)
    }

    pub fn horizontal_gue(&self, bs: usize, k: usize) -> f64 {
        self.bs_positions[bs].dist(&self.gues[k].pos())
    }

    pub fn horizontal_uav(&self, bs: usize, u: usize) -> f64 {
        self.bs_positions[bs].dist(&self.uav_positions[u])
    }

    pub fn with_heights(&self, heights: &[f64]) -> Scenario {
        let mut s = self.clone();
        s.uav_heights = heights.to_vec();
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let p = &self.params;
        p.validate()?;
        if self.bs_positions.len() != p.num_bs {
            return Err(invalid(
                "num_bs",
                format!(
                    "{} base stations listed, num_bs is {}",
                    self.bs_positions.len(),
                    p.num_bs
                ),
            ));
        }
        if self.uav_positions.len() != p.num_uav || self.uav_heights.len() != p.num_uav {
            return Err(invalid(
                "num_uav",
                format!(
                    "{} UAVs listed, num_uav is {}",
                    self.uav_positions.len(),
                    p.num_uav
                ),
            ));
        }
        let finite = |pt: &Point2| pt.x.is_finite() && pt.y.is_finite();
        if !self.bs_positions.iter().all(finite) || !self.uav_positions.iter().all(finite) {
            return Err(invalid("geometry", "positions must be finite"));
        }
        if self.gues.len() != p.num_bs * p.gues_per_cell {
            return Err(invalid(
                "gues_per_cell",
                format!(
                    "{} ground users listed, expected {} per base station",
                    self.gues.len(),
                    p.gues_per_cell
                ),
            ));
        }
        for (k, g) in self.gues.iter().enumerate() {
            if g.serving >= p.num_bs {
                return Err(invalid(
                    "serving",
                    format!("ground user {k} names base station {}", g.serving),
                ));
            }
            if !(g.x.is_finite() && g.y.is_finite()) {
                return Err(invalid(
                    "geometry",
                    format!("ground user {k} has a non-finite position"),
                ));
            }
        }
        for bs in 0..p.num_bs {
            let n = self.gues_of(bs).count();
            if n != p.gues_per_cell {
                return Err(invalid(
                    "gues_per_cell",
                    format!(
                        "base station {bs} serves {n} ground users, expected {}",
                        p.gues_per_cell
                    ),
                ));
            }
        }
        for (u, &h) in self.uav_heights.iter().enumerate() {
            if !(h >= p.uav_height_min) {
                return Err(invalid("uav_height_min", format!("UAV {u} flies at {h} m")));
            }
            if !(h <= p.uav_height_max) {
                return Err(invalid("uav_height_max", format!("UAV {u} flies at {h} m")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            params: self.params.clone(),
            geometry: Some(GeometrySection {
                bs: self.bs_positions.clone(),
                gue: self.gues.clone(),
                uav: self
                    .uav_positions
                    .iter()
                    .zip(&self.uav_heights)
                    .map(|(p, &h)| UavPlacement {
                        x: p.x,
                        y: p.y,
                        height: h,
                    })
                    .collect(),
            }),
            generate: None,
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    params: SystemParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<GeometrySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generate: Option<GenerateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    bs: Vec<Point2>,
    #[serde(default)]
    gue: Vec<GroundUser>,
    #[serde(default)]
    uav: Vec<UavPlacement>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateSection {
    seed: u64,
}

/// Parses a TOML scenario.
///
/// Without a `[geometry]` section the layout is generated from
/// `[generate].seed` (default 0).
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    match file.geometry {
        Some(geo) => {
            if file.generate.is_some() {
                return Err(invalid("generate", "cannot be combined with [geometry]"));
            }
            let scn = Scenario {
                params: file.params,
                bs_positions: geo.bs,
                gues: geo.gue,
                uav_positions: geo.uav.iter().map(|u| Point2::new(u.x, u.y)).collect(),
                uav_heights: geo.uav.iter().map(|u| u.height).collect(),
            };
            scn.validate()?;
            Ok(scn)
        }
        None => generate_scenario(file.generate.map_or(0, |g| g.seed), &file.params),
    }
}

/// Reads only the `[params]` table of a scenario file.
pub fn load_params(text: &str) -> Result<SystemParams, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.params.validate()?;
    Ok(file.params)
}

/// Base stations at the centers of `num_bs` equal vertical strips of the square.
pub fn bs_layout(params: &SystemParams) -> Vec<Point2> {
    let side = params.area_side;
    let g = params.num_bs as f64;
    (0..params.num_bs)
        .map(|i| Point2::new(-side / 2.0 + (i as f64 + 0.5) * side / g, 0.0))
        .collect()
}

/// Index of the closest base station in the plane, lower index on ties.
pub fn nearest_bs(bs: &[Point2], p: &Point2) -> usize {
    let mut best = 0;
    for (i, b) in bs.iter().enumerate().skip(1) {
        if b.dist(p) < bs[best].dist(p) {
            best = i;
        }
    }
    best
}

pub fn generate_scenario(seed: u64, params: &SystemParams) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = params.area_side / 2.0;
    let bs = bs_layout(params);
    let draw = |rng: &mut ChaCha8Rng| {
        Point2::new(rng.random_range(-half..half), rng.random_range(-half..half))
    };
    let mut gues = Vec::with_capacity(params.num_bs * params.gues_per_cell);
    for i in 0..params.num_bs {
        let mut placed = 0;
        while placed < params.gues_per_cell {
            let p = draw(&mut rng);
            if nearest_bs(&bs, &p) == i {
                gues.push(GroundUser {
                    x: p.x,
                    y: p.y,
                    serving: i,
                });
                placed += 1;
            }
        }
    }
    let uav_positions: Vec<Point2> = (0..params.num_uav).map(|_| draw(&mut rng)).collect();
    let scn = Scenario {
        params: params.clone(),
        bs_positions: bs,
        gues,
        uav_heights: vec![params.uav_height_min; params.num_uav],
        uav_positions,
    };
    scn.validate()?;
    Ok(scn)
}
