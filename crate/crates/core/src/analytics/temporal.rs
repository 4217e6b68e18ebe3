use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_var, sorted};
use crate::error::{Error, Result};
use crate::ingest::{seconds_of_day, Campaign, DayClass};

/// Timestamped levels under one group label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledLevels {
    pub group: String,
    /// `(epoch seconds, dBA)`
    pub levels: Vec<(i64, f64)>,
}

/// How campaigns are labelled for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupBy {
    /// `weekday`, `weekend`, `festival`, `typical`
    DayClass,
    /// e.g. `weekday-morning`
    #[default]
    DayClassSession,
    Route,
    All,
}

impl std::str::FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "day-class" | "dayclass" | "day_class" => Ok(GroupBy::DayClass),
            "day-class-session" | "day_class_session" => Ok(GroupBy::DayClassSession),
            "route" => Ok(GroupBy::Route),
            "all" => Ok(GroupBy::All),
            _ => Err(Error::Unknown {
                kind: "grouping",
                value: s.to_string(),
            }),
        }
    }
}

/// Labels a campaign's levels. The day class comes from the metadata, or
/// from the calendar day of the first sample when absent. `level` picks the
/// value reported for each sample (calibrated, reference, raw node, …).
pub fn label_campaign(
    c: &Campaign,
    group_by: GroupBy,
    utc_offset_seconds: i32,
    level: impl Fn(&crate::ingest::GeoSample) -> Option<f64>,
) -> Result<LabeledLevels> {
    let first = c.samples.first().ok_or(Error::EmptyCampaign)?;
    let day = c
        .meta
        .day_class
        .unwrap_or_else(|| DayClass::from_timestamp(first.timestamp, utc_offset_seconds));
    let group = match group_by {
        GroupBy::DayClass => day.to_string(),
        GroupBy::DayClassSession => match c.meta.session {
            Some(s) => format!("{day}-{}", s.as_str()),
            None => day.to_string(),
        },
        GroupBy::Route => c.meta.route.clone().unwrap_or_else(|| c.id.clone()),
        GroupBy::All => "all".to_string(),
    };
    Ok(LabeledLevels {
        group,
        levels: c
            .samples
            .iter()
            .filter_map(|s| level(s).map(|l| (s.timestamp, l)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub group: String,
    /// Bucket start, seconds since local midnight.
    pub bucket: u32,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub count: usize,
}

/// Mean and variance per group and local time-of-day bucket, sorted by
/// group then bucket.
pub fn temporal_profile(
    inputs: &[LabeledLevels],
    bucket: u32,
    utc_offset_seconds: i32,
) -> Result<Vec<TemporalProfile>> {
    if bucket == 0 || bucket > 86_400 {
        return Err(Error::InvalidParameter(format!(
            "bucket must be within 1..=86400 seconds, got {bucket}"
        )));
    }
    let mut bins: BTreeMap<(&str, u32), Vec<f64>> = BTreeMap::new();
    for input in inputs {
        for &(t, l) in &input.levels {
            let b = seconds_of_day(t, utc_offset_seconds) / bucket * bucket;
            bins.entry((input.group.as_str(), b)).or_default().push(l);
        }
    }
    if bins.is_empty() {
        return Err(Error::InvalidDataset("no levels in the selection".into()));
    }
    Ok(bins
        .into_iter()
        .map(|((group, b), values)| {
            let v = sorted(values);
            let (mean, variance) = mean_var(&v);
            TemporalProfile {
                group: group.to_string(),
                bucket: b,
                mean,
                variance,
                count: v.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub label: String,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn summarize(label: &str, values: &[f64]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::InvalidDataset(format!("no values for `{label}`")));
    }
    let v = sorted(values.iter().copied());
    let (mean, variance) = mean_var(&v);
    Ok(DistributionSummary {
        label: label.to_string(),
        // keep min ≤ mean ≤ max under rounding
        mean: mean.clamp(v[0], v[v.len() - 1]),
        variance,
        min: v[0],
        max: v[v.len() - 1],
        count: v.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: DistributionSummary,
    pub b: DistributionSummary,
    /// `mean(a) − mean(b)`
    pub mean_diff: f64,
    /// `var(a) / var(b)`; undefined when `var(b) = 0`, except that two
    /// constant samples compare as 1.
    pub var_ratio: Option<f64>,
}

pub fn compare_distributions(
    a_label: &str,
    a: &[f64],
    b_label: &str,
    b: &[f64],
) -> Result<Comparison> {
    let a = summarize(a_label, a)?;
    let b = summarize(b_label, b)?;
    let var_ratio = if b.variance > 0.0 {
        Some(a.variance / b.variance)
    } else if a.variance == 0.0 {
        Some(1.0)
    } else {
        None
    };
    Ok(Comparison {
        mean_diff: a.mean - b.mean,
        var_ratio,
        a,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CampaignMeta, GeoSample, LogFormat, Session};
    use proptest::prelude::*;

    const IST: i32 = 19_800;
    // 2024-05-01 00:00 IST
    const MIDNIGHT: i64 = 1_714_501_800;

    #[test]
    fn one_bucket_is_overall_mean() {
        let levels: Vec<(i64, f64)> = (0..100)
            .map(|i| (MIDNIGHT + 9 * 3600 + i, 70.0 + (i % 7) as f64))
            .collect();
        let input = LabeledLevels {
            group: "g".into(),
            levels: levels.clone(),
        };
        let p = temporal_profile(&[input], 86_400, IST).unwrap();
        assert_eq!(p.len(), 1);
        let m = levels.iter().map(|l| l.1).sum::<f64>() / 100.0;
        assert!((p[0].mean - m).abs() < 1e-12);
        assert_eq!(p[0].bucket, 0);
    }

    #[test]
    fn constructed_weekday_offset() {
        let weekend: Vec<(i64, f64)> = (0..3600)
            .map(|i| (MIDNIGHT + 9 * 3600 + i, 72.0 + ((i * 13) % 9) as f64 * 0.5))
            .collect();
        let weekday: Vec<(i64, f64)> = weekend.iter().map(|&(t, l)| (t, l + 2.4)).collect();
        let p = temporal_profile(
            &[
                LabeledLevels {
                    group: "weekday-morning".into(),
                    levels: weekday,
                },
                LabeledLevels {
                    group: "weekend-morning".into(),
                    levels: weekend,
                },
            ],
            900,
            IST,
        )
        .unwrap();
        assert_eq!(p.len(), 8);
        for (wd, we) in p[..4].iter().zip(&p[4..]) {
            assert_eq!(wd.bucket, we.bucket);
            assert!((wd.mean - we.mean - 2.4).abs() < 1e-9);
            assert!((wd.variance - we.variance).abs() < 1e-9);
        }
    }

    #[test]
    fn bucket_bounds() {
        let input = LabeledLevels {
            group: "g".into(),
            levels: vec![(0, 70.0)],
        };
        assert!(temporal_profile(std::slice::from_ref(&input), 86_401, IST).is_err());
        assert!(temporal_profile(&[input], 0, IST).is_err());
        assert!(temporal_profile(&[], 60, IST).is_err());
    }

    #[test]
    fn labels_from_meta_and_calendar() {
        let s = |t| GeoSample {
            timestamp: t,
            latitude: 17.0,
            longitude: 78.0,
            node_level: 70.0,
            ref_level: Some(71.0),
        };
        // 2024-05-04 was a Saturday
        let sat = Campaign::new(
            "c",
            LogFormat::MergedCsv,
            vec![s(MIDNIGHT + 3 * 86_400 + 36_000)],
        );
        let l = label_campaign(&sat, GroupBy::DayClass, IST, |s| s.ref_level).unwrap();
        assert_eq!(l.group, "weekend");
        assert_eq!(l.levels, vec![(MIDNIGHT + 3 * 86_400 + 36_000, 71.0)]);
        let tagged = sat.with_meta(CampaignMeta {
            route: Some("r2".into()),
            session: Some(Session::Evening),
            day_class: Some(DayClass::Festival),
        });
        assert_eq!(
            label_campaign(&tagged, GroupBy::DayClassSession, IST, |s| Some(
                s.node_level
            ))
            .unwrap()
            .group,
            "festival-evening"
        );
        assert_eq!(
            label_campaign(&tagged, GroupBy::Route, IST, |s| Some(s.node_level))
                .unwrap()
                .group,
            "r2"
        );
    }

    #[test]
    fn identical_samples_compare_equal() {
        let a = [70.0, 75.0, 80.0, 72.5];
        let c = compare_distributions("a", &a, "b", &a).unwrap();
        assert_eq!(c.mean_diff, 0.0);
        assert_eq!(c.var_ratio, Some(1.0));
        assert!(compare_distributions("a", &a, "b", &[]).is_err());
        assert_eq!(
            compare_distributions("a", &a, "b", &[70.0, 70.0])
                .unwrap()
                .var_ratio,
            None
        );
    }

    #[test]
    fn bimodal_versus_unimodal() {
        let bimodal: Vec<f64> = (0..400)
            .map(|i| {
                if i % 2 == 0 {
                    68.0 + (i % 10) as f64 * 0.3
                } else {
                    95.0 - (i % 6) as f64 * 0.4
                }
            })
            .collect();
        let unimodal: Vec<f64> = (0..300)
            .map(|i| 74.0 + ((i * 7) % 11) as f64 * 0.2)
            .collect();
        let c = compare_distributions("festival", &bimodal, "typical", &unimodal).unwrap();
        // two-pass oracle
        let mv = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (
                m,
                v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64,
            )
        };
        let (ma, va) = mv(&bimodal);
        let (mb, vb) = mv(&unimodal);
        assert!((c.a.mean - ma).abs() < 1e-9 * ma);
        assert!((c.a.variance - va).abs() < 1e-9 * va);
        assert!((c.mean_diff - (ma - mb)).abs() < 1e-9);
        assert!((c.var_ratio.unwrap() - va / vb).abs() < 1e-9 * va / vb);
    }

    proptest! {
        #[test]
        fn group_means_reconstruct_pooled(
            levels in proptest::collection::vec((0i64..86_400 * 3, 40.0f64..110.0), 1..300),
            bucket in 60u32..20_000,
        ) {
            let levels: Vec<(i64, f64)> = levels.into_iter().map(|(t, l)| (MIDNIGHT + t, l)).collect();
            let p = temporal_profile(&[LabeledLevels { group: "g".into(), levels: levels.clone() }], bucket, IST).unwrap();
            let n: usize = p.iter().map(|b| b.count).sum();
            prop_assert_eq!(n, levels.len());
            let weighted = p.iter().map(|b| b.mean * b.count as f64).sum::<f64>() / n as f64;
            let pooled = levels.iter().map(|l| l.1).sum::<f64>() / n as f64;
            prop_assert!((weighted - pooled).abs() <= 1e-9 * pooled);
            prop_assert!(p.windows(2).all(|w| w[0].bucket < w[1].bucket));
        }

        #[test]
        fn summary_is_permutation_invariant(mut v in proptest::collection::vec(30.0f64..130.0, 1..200), seed in any::<u64>()) {
            use rand::{SeedableRng, seq::SliceRandom};
            let a = summarize("x", &v).unwrap();
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = summarize("x", &v).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.min <= a.mean && a.mean <= a.max && a.variance >= 0.0);
        }
    }
}
