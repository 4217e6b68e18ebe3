//! Synthetic campaigns with a known sensor distortion, route and lag.
//!
//! The reference meter reads the ambient field along the route. The node
//! reads
//!
//! ```text
//! gain·L + bias + nonlinearity·(L − 80)² + motion_coupling·v + N(0, noise_sd²)
//! ```
//!
//! with `L` taken `lag` seconds earlier, plus occasional outliers. Every random
//! component draws from its own ChaCha stream of the seed, so changing one
//! component leaves the others untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, EARTH_RADIUS_M};
use crate::ingest::{
    seconds_of_day, Campaign, CampaignMeta, DayClass, GeoSample, LogFormat, Session,
    DEFAULT_UTC_OFFSET_SECONDS, LEVEL_MAX_DBA, LEVEL_MIN_DBA,
};

pub const MIN_DURATION: u32 = 60;
pub const MAX_OUTLIER_RATE: f64 = 0.05;

/// 2024-05-01 09:00 +05:30
pub const DEFAULT_START: i64 = 1_714_534_200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorErrorModel {
    pub bias: f64,
    pub gain: f64,
    /// Coefficient on `(L − 80)²`.
    pub nonlinearity: f64,
    pub noise_sd: f64,
    /// Positive: the node trails the reference.
    pub lag: i64,
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
    /// dBA added to the node per m/s of vehicle speed (wind and vibration).
    #[serde(default)]
    pub motion_coupling: f64,
}

impl SensorErrorModel {
    pub fn identity() -> Self {
        Self {
            bias: 0.0,
            gain: 1.0,
            nonlinearity: 0.0,
            noise_sd: 0.0,
            lag: 0,
            outlier_rate: 0.0,
            outlier_magnitude: 0.0,
            motion_coupling: 0.0,
        }
    }

    /// Distorted reading for a true level and speed, before noise.
    pub fn distort(&self, level: f64, speed: f64) -> f64 {
        let u = level - 80.0;
        self.gain * level + self.bias + self.nonlinearity * u * u + self.motion_coupling * speed
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.bias,
            self.gain,
            self.nonlinearity,
            self.noise_sd,
            self.outlier_rate,
            self.outlier_magnitude,
            self.motion_coupling,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "non-finite sensor error parameter".into(),
            ));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::InvalidParameter("noise_sd must be ≥ 0".into()));
        }
        if !(0.0..=MAX_OUTLIER_RATE).contains(&self.outlier_rate) {
            return Err(Error::InvalidParameter(format!(
                "outlier_rate must lie in [0, {MAX_OUTLIER_RATE}]"
            )));
        }
        Ok(())
    }
}

/// Constant speed held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPhase {
    pub duration: u32,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedProfile {
    /// Phases repeated cyclically.
    Phases { phases: Vec<SpeedPhase> },
    /// Piecewise-constant speeds drawn uniformly from `[min_speed, max_speed]`,
    /// each held for a uniform `[min_hold, max_hold]` seconds.
    Random {
        min_speed: f64,
        max_speed: f64,
        min_hold: u32,
        max_hold: u32,
    },
}

/// Short loud events (firecrackers, horns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    /// Expected burst starts per second.
    pub rate: f64,
    /// Mean of the exponential burst height, dBA.
    pub mean_magnitude: f64,
    pub min_duration: u32,
    pub max_duration: u32,
}

/// The true sound level along the route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientField {
    /// Base level per route segment (one value applies to every segment).
    pub segment_base: Vec<f64>,
    /// Peak-to-mean amplitude of a daily cosine, peaking at `tod_peak_hour`.
    pub tod_amplitude: f64,
    pub tod_peak_hour: f64,
    /// dBA per m/s of vehicle speed.
    pub velocity_coupling: f64,
    /// AR(1) fluctuation: stationary standard deviation and lag-1 correlation.
    pub variability_sd: f64,
    pub variability_corr: f64,
    /// Slow sinusoidal sweep, e.g. a laboratory source stepped through levels.
    pub sweep_amplitude: f64,
    pub sweep_period: u32,
    pub bursts: Option<BurstSpec>,
    /// Hard limits on the field.
    pub bounds: Option<(f64, f64)>,
}

impl Default for AmbientField {
    fn default() -> Self {
        Self {
            segment_base: vec![70.0],
            tod_amplitude: 0.0,
            tod_peak_hour: 9.0,
            velocity_coupling: 0.0,
            variability_sd: 0.0,
            variability_corr: 0.0,
            sweep_amplitude: 0.0,
            sweep_period: 600,
            bursts: None,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    /// `(latitude, longitude)` polyline, driven out and back.
    pub waypoints: Vec<(f64, f64)>,
    pub speed: SpeedProfile,
    pub ambient: AmbientField,
    pub start: i64,
    pub utc_offset_seconds: i32,
    /// Standard deviation of horizontal GPS error, metres.
    #[serde(default)]
    pub gps_noise_m: f64,
    #[serde(default)]
    pub meta: CampaignMeta,
}

impl RouteSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("invalid route: {m}")));
        if self.waypoints.len() < 2 {
            return bad("at least two waypoints are needed".into());
        }
        if self
            .waypoints
            .iter()
            .any(|&(a, b)| !(-90.0..=90.0).contains(&a) || !(-180.0..=180.0).contains(&b))
        {
            return bad("waypoint outside WGS84 range".into());
        }
        let segs = self.waypoints.len() - 1;
        let n_base = self.ambient.segment_base.len();
        if n_base != 1 && n_base != segs {
            return bad(format!("{n_base} segment levels for {segs} segments"));
        }
        match &self.speed {
            SpeedProfile::Phases { phases } => {
                if phases.is_empty() || phases.iter().all(|p| p.duration == 0) {
                    return bad("empty speed profile".into());
                }
                if phases
                    .iter()
                    .any(|p| !(p.speed >= 0.0 && p.speed.is_finite()))
                {
                    return bad("speeds must be finite and ≥ 0".into());
                }
            }
            SpeedProfile::Random {
                min_speed,
                max_speed,
                min_hold,
                max_hold,
            } => {
                if !(*min_speed >= 0.0 && min_speed <= max_speed && max_speed.is_finite()) {
                    return bad("speed range must satisfy 0 ≤ min ≤ max".into());
                }
                if *min_hold == 0 || min_hold > max_hold {
                    return bad("hold range must satisfy 1 ≤ min ≤ max".into());
                }
            }
        }
        let a = &self.ambient;
        if !(0.0..1.0).contains(&a.variability_corr) || a.variability_sd < 0.0 {
            return bad("variability needs sd ≥ 0 and correlation in [0, 1)".into());
        }
        if a.sweep_period == 0 {
            return bad("sweep period must be positive".into());
        }
        if let Some(b) = &a.bursts {
            if b.rate < 0.0 || b.min_duration == 0 || b.min_duration > b.max_duration {
                return bad("burst rate must be ≥ 0 with 1 ≤ min ≤ max duration".into());
            }
        }
        if self.gps_noise_m < 0.0 {
            return bad("gps noise must be ≥ 0".into());
        }
        Ok(())
    }
}

/// Everything the generator knows about a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub seed: u64,
    pub start: i64,
    pub duration: u32,
    pub lag: i64,
    pub error: SensorErrorModel,
    /// True speed for every second of the campaign, m/s.
    pub velocity: Vec<f64>,
    /// Node timestamps carrying an injected outlier.
    pub outlier_timestamps: Vec<i64>,
    /// Distance driven between the first and last sample.
    pub distance_m: f64,
}

impl SimTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub node: Campaign,
    pub reference: Campaign,
    pub truth: SimTruth,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn round_level(l: f64) -> f64 {
    (l.clamp(LEVEL_MIN_DBA, LEVEL_MAX_DBA) * 10.0).round() / 10.0
}

fn speed_series(profile: &SpeedProfile, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    match profile {
        SpeedProfile::Phases { phases } => {
            for p in phases.iter().cycle() {
                if out.len() >= len {
                    break;
                }
                out.extend(std::iter::repeat_n(p.speed, p.duration as usize));
            }
        }
        SpeedProfile::Random {
            min_speed,
            max_speed,
            min_hold,
            max_hold,
        } => {
            while out.len() < len {
                let s = if min_speed < max_speed {
                    rng.random_range(*min_speed..=*max_speed)
                } else {
                    *min_speed
                };
                let hold = rng.random_range(*min_hold..=*max_hold) as usize;
                out.extend(std::iter::repeat_n(s, hold));
            }
        }
    }
    out.truncate(len);
    out
}

struct Path {
    points: Vec<(f64, f64)>,
    /// Cumulative distance at each waypoint.
    cumulative: Vec<f64>,
}

impl Path {
    fn new(points: &[(f64, f64)]) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = haversine_m(w[0].0, w[0].1, w[1].0, w[1].1);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Self {
            points: points.to_vec(),
            cumulative,
        }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and segment index after travelling `s` metres out and back.
    fn locate(&self, s: f64) -> ((f64, f64), usize) {
        let len = self.length();
        if len <= 0.0 {
            return (self.points[0], 0);
        }
        let m = s.rem_euclid(2.0 * len);
        let d = if m <= len { m } else { 2.0 * len - m };
        let seg =
            (self.cumulative.partition_point(|&c| c <= d).max(1) - 1).min(self.points.len() - 2);
        let span = self.cumulative[seg + 1] - self.cumulative[seg];
        let f = if span > 0.0 {
            ((d - self.cumulative[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        ((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)), seg)
    }
}

/// Ambient level, speed and position for every second of `[t0, t0 + len)`.
struct Trajectory {
    t0: i64,
    level: Vec<f64>,
    speed: Vec<f64>,
    position: Vec<(f64, f64)>,
}

fn trajectory(route: &RouteSpec, t0: i64, len: usize, seed: u64) -> Trajectory {
    let speed = speed_series(&route.speed, len, &mut stream(seed, 1));
    let path = Path::new(&route.waypoints);
    let a = &route.ambient;
    let mut ar_rng = stream(seed, 0);
    let innovation = Normal::new(
        0.0,
        a.variability_sd * (1.0 - a.variability_corr.powi(2)).sqrt(),
    )
    .expect("validated sd");
    let mut ar = if a.variability_sd > 0.0 {
        Normal::new(0.0, a.variability_sd)
            .expect("validated sd")
            .sample(&mut ar_rng)
    } else {
        0.0
    };

    let mut burst = vec![0.0; len];
    if let Some(b) = a.bursts {
        let mut rng = stream(seed, 5);
        let height = Exp::new(1.0 / b.mean_magnitude.max(1e-9)).expect("positive rate");
        for i in 0..len {
            if rng.random_bool(b.rate.min(1.0)) {
                let h = height.sample(&mut rng);
                let d = rng.random_range(b.min_duration..=b.max_duration) as usize;
                for slot in burst.iter_mut().skip(i).take(d) {
                    // concurrent bursts add energetically
                    *slot = 10.0 * (10f64.powf(*slot / 10.0) + 10f64.powf(h / 10.0) - 1.0).log10();
                }
            }
        }
    }

    let mut level = Vec::with_capacity(len);
    let mut position = Vec::with_capacity(len);
    let mut s = 0.0;
    for i in 0..len {
        if i > 0 {
            // speed[i] covers the second ending at i
            s += speed[i];
            if a.variability_sd > 0.0 {
                ar = a.variability_corr * ar + innovation.sample(&mut ar_rng);
            }
        }
        let t = t0 + i as i64;
        let (pos, seg) = path.locate(s);
        position.push(pos);
        let base = if a.segment_base.len() == 1 {
            a.segment_base[0]
        } else {
            a.segment_base[seg]
        };
        let hour = seconds_of_day(t, route.utc_offset_seconds) as f64 / 3600.0;
        let tod = a.tod_amplitude * (std::f64::consts::TAU * (hour - a.tod_peak_hour) / 24.0).cos();
        let sweep = a.sweep_amplitude
            * (std::f64::consts::TAU * (t - route.start) as f64 / a.sweep_period as f64).sin();
        let mut l = base + tod + sweep + a.velocity_coupling * speed[i] + ar + burst[i];
        if let Some((lo, hi)) = a.bounds {
            l = l.clamp(lo, hi);
        }
        level.push(l);
    }
    Trajectory {
        t0,
        level,
        speed,
        position,
    }
}

fn jitter(pos: (f64, f64), sd_m: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    if sd_m == 0.0 {
        return pos;
    }
    let dn = noise.sample(rng) * sd_m;
    let de = noise.sample(rng) * sd_m;
    (
        pos.0 + (dn / EARTH_RADIUS_M).to_degrees(),
        pos.1 + (de / (EARTH_RADIUS_M * pos.0.to_radians().cos())).to_degrees(),
    )
}

/// Generates a node log and a reference log over `[start, start + duration)`.
///
/// The node clock runs `lag` seconds behind: its record stamped `t` holds the
/// level and position of true time `t − lag`.
pub fn generate_campaign(
    route: &RouteSpec,
    err: &SensorErrorModel,
    duration: u32,
    seed: u64,
) -> Result<Generated> {
    if duration < MIN_DURATION {
        return Err(Error::InvalidParameter(format!(
            "duration must be at least {MIN_DURATION} s, got {duration}"
        )));
    }
    route.validate()?;
    err.validate()?;

    // the field must exist `lag` seconds either side of the campaign
    let pad = err.lag.unsigned_abs() as usize;
    let t0 = route.start - pad as i64;
    let n = duration as usize;
    let traj = trajectory(route, t0, n + 2 * pad, seed);
    let at = |t: i64| (t - traj.t0) as usize;

    let mut noise_rng = stream(seed, 2);
    let mut outlier_rng = stream(seed, 3);
    let mut gps_rng = stream(seed, 4);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut node = Vec::with_capacity(n);
    let mut reference = Vec::with_capacity(n);
    let mut outliers = Vec::new();
    for i in 0..n {
        let t = route.start + i as i64;
        let now = at(t);
        let then = at(t - err.lag);
        let pos = jitter(
            traj.position[now],
            route.gps_noise_m,
            &std_normal,
            &mut gps_rng,
        );
        let node_pos = jitter(
            traj.position[then],
            route.gps_noise_m,
            &std_normal,
            &mut gps_rng,
        );
        reference.push(GeoSample {
            timestamp: t,
            latitude: pos.0,
            longitude: pos.1,
            node_level: round_level(traj.level[now]),
            ref_level: None,
        });
        let mut reading = err.distort(traj.level[then], traj.speed[then]);
        if err.noise_sd > 0.0 {
            reading += err.noise_sd * std_normal.sample(&mut noise_rng);
        }
        if err.outlier_rate > 0.0 && outlier_rng.random_bool(err.outlier_rate) {
            let sign = if outlier_rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            reading += sign * err.outlier_magnitude;
            outliers.push(t);
        }
        node.push(GeoSample {
            timestamp: t,
            latitude: node_pos.0,
            longitude: node_pos.1,
            node_level: round_level(reading),
            ref_level: None,
        });
    }
    let first = at(route.start);
    let velocity = traj.speed[first..first + n].to_vec();
    let truth = SimTruth {
        seed,
        start: route.start,
        duration,
        lag: err.lag,
        error: err.clone(),
        distance_m: velocity[1..].iter().sum(),
        velocity,
        outlier_timestamps: outliers,
    };
    Ok(Generated {
        node: Campaign::new(format!("node-{seed}"), LogFormat::NodeCsv, node)
            .with_meta(route.meta.clone()),
        reference: Campaign::new(format!("ref-{seed}"), LogFormat::RefCsv, reference)
            .with_meta(route.meta.clone()),
        truth,
    })
}

/// A named route/sensor pairing with a suggested duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub route: RouteSpec,
    pub error: SensorErrorModel,
    pub duration: u32,
}

/// Loop through western Hyderabad used by the mobile scenarios.
fn city_loop() -> Vec<(f64, f64)> {
    vec![
        (17.4456, 78.3497),
        (17.4401, 78.3615),
        (17.4327, 78.3750),
        (17.4268, 78.3904),
        (17.4222, 78.4071),
        (17.4159, 78.4228),
        (17.4105, 78.4385),
    ]
}

/// The low-cost node shared by every scenario: steep, curved response with
/// wind noise while moving.
pub fn default_sensor() -> SensorErrorModel {
    SensorErrorModel {
        bias: -16.0,
        gain: 1.0,
        nonlinearity: 0.035,
        noise_sd: 1.0,
        lag: 4,
        outlier_rate: 0.005,
        outlier_magnitude: 15.0,
        motion_coupling: 0.35,
    }
}

fn mobile_route(start: i64, meta: CampaignMeta) -> RouteSpec {
    RouteSpec {
        waypoints: city_loop(),
        speed: SpeedProfile::Random {
            min_speed: 1.0,
            max_speed: 12.0,
            min_hold: 20,
            max_hold: 90,
        },
        ambient: AmbientField {
            segment_base: vec![88.0, 91.0, 87.0, 93.0, 89.0, 90.0],
            tod_amplitude: 1.5,
            tod_peak_hour: 10.0,
            velocity_coupling: -0.5,
            variability_sd: 12.0,
            variability_corr: 0.97,
            ..AmbientField::default()
        },
        start,
        utc_offset_seconds: DEFAULT_UTC_OFFSET_SECONDS,
        gps_noise_m: 0.0,
        meta,
    }
}

/// `lab`, `mobile` and `festival`.
pub fn default_scenarios() -> Vec<Scenario> {
    let sensor = default_sensor();
    let lab = Scenario {
        name: "lab".into(),
        route: RouteSpec {
            // stationary bench next to the reference meter
            waypoints: vec![(17.4456, 78.3497), (17.4456, 78.3497)],
            speed: SpeedProfile::Phases {
                phases: vec![SpeedPhase {
                    duration: 1,
                    speed: 0.0,
                }],
            },
            ambient: AmbientField {
                segment_base: vec![75.0],
                sweep_amplitude: 12.0,
                sweep_period: 900,
                variability_sd: 2.0,
                variability_corr: 0.9,
                bounds: Some((50.0, 90.0)),
                ..AmbientField::default()
            },
            start: DEFAULT_START,
            utc_offset_seconds: DEFAULT_UTC_OFFSET_SECONDS,
            gps_noise_m: 0.0,
            meta: CampaignMeta::default(),
        },
        error: sensor.clone(),
        duration: 7200,
    };
    let mobile = Scenario {
        name: "mobile".into(),
        route: mobile_route(
            DEFAULT_START,
            CampaignMeta {
                route: Some("loop".into()),
                session: Some(Session::Morning),
                day_class: Some(DayClass::Weekday),
            },
        ),
        error: sensor.clone(),
        // about 5,000 ten-second windows
        duration: 50_000,
    };
    let mut festival_route = mobile_route(
        // 2024-10-31 18:30 +05:30
        1_730_379_600,
        CampaignMeta {
            route: Some("loop".into()),
            session: Some(Session::Evening),
            day_class: Some(DayClass::Festival),
        },
    );
    festival_route.ambient.bursts = Some(BurstSpec {
        rate: 0.01,
        mean_magnitude: 14.0,
        min_duration: 3,
        max_duration: 30,
    });
    let festival = Scenario {
        name: "festival".into(),
        route: festival_route,
        error: sensor,
        duration: 10_800,
    };
    vec![lab, mobile, festival]
}

pub fn scenario(name: &str) -> Result<Scenario> {
    default_scenarios()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Unknown {
            kind: "scenario",
            value: name.to_string(),
        })
}
