//! One-hot time encodings: hour slot, weekday, month.

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::{Error, Result};

/// One-hot vectors for a timestamp. Exactly one `1.0` per vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeOneHots {
    /// Width `24 / granularity_hours`.
    pub hour_slot: Vec<f64>,
    /// Width 7, Monday = 0.
    pub weekday: Vec<f64>,
    /// Width 12, January = 0.
    pub month: Vec<f64>,
}

pub fn one_hot_time(timestamp: DateTime<Utc>, granularity_hours: u32) -> Result<TimeOneHots> {
    if granularity_hours == 0 || 24 % granularity_hours != 0 {
        return Err(Error::Argument(format!(
            "granularity {granularity_hours} must divide 24"
        )));
    }
    let slots = (24 / granularity_hours) as usize;
    let slot = (timestamp.hour() / granularity_hours) as usize;
    let mut hour_slot = vec![0.0; slots];
    hour_slot[slot] = 1.0;
    let mut weekday = vec![0.0; 7];
    weekday[timestamp.weekday().num_days_from_monday() as usize] = 1.0;
    let mut month = vec![0.0; 12];
    month[timestamp.month0() as usize] = 1.0;
    Ok(TimeOneHots {
        hour_slot,
        weekday,
        month,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn nine_am_at_eight_hours_is_slot_one() {
        let ts = Utc.with_ymd_and_hms(2020, 1, 6, 9, 0, 0).unwrap();
        let oh = one_hot_time(ts, 8).unwrap();
        assert_eq!(oh.hour_slot, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn each_vector_sums_to_one() {
        for h in [0u32, 5, 13, 23] {
            let ts = Utc.with_ymd_and_hms(2021, 7, 15, h, 30, 0).unwrap();
            for g in [2u32, 4, 8, 12, 24] {
                let oh = one_hot_time(ts, g).unwrap();
                assert_eq!(oh.hour_slot.iter().sum::<f64>(), 1.0);
                assert_eq!(oh.weekday.iter().sum::<f64>(), 1.0);
                assert_eq!(oh.month.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn monday_january_maps_to_index_zero() {
        // 2020-01-06 was a Monday
        let ts = Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap();
        let oh = one_hot_time(ts, 8).unwrap();
        assert_eq!(oh.weekday[0], 1.0);
        assert_eq!(oh.month[0], 1.0);
    }

    #[test]
    fn granularity_must_divide_day() {
        let ts = Utc.with_ymd_and_hms(2020, 1, 6, 0, 0, 0).unwrap();
        assert!(one_hot_time(ts, 5).is_err());
    }
}
