//! Precomputed per-combination estimates, for classification of values
//! obtained elsewhere.
//!
//! ```text
//! # clicktree estimates v1
//! # order channels statistic value std_error
//! 2 0,1 g 0.407 0.012
//! 2 0,1 theta 1.00000004 2e-8
//! ```
//!
//! `statistic` is `theta` or `g`. A combination may give either or both.

use std::io::BufRead;

use clicktree_core::estimator::{CombinationEstimate, Estimate, PrecomputedOrder, MAX_ORDER, MIN_ORDER};
use clicktree_core::{ChannelMask, Error as ModelError, MAX_CHANNELS};

use super::read_line;
use crate::error::{Error, Location, Result};

pub const MAGIC: &str = "# clicktree estimates v1";

const NOT_PROVIDED: ModelError = ModelError::UndefinedEstimator { reason: "not provided" };

fn parse_channels(text: &str) -> Option<ChannelMask> {
    let mut mask = ChannelMask::EMPTY;
    for part in text.split(',') {
        let c: usize = part.trim().parse().ok()?;
        if c >= MAX_CHANNELS || mask.contains(c) {
            return None;
        }
        mask = mask.with(c);
    }
    Some(mask)
}

pub fn read(reader: &mut impl BufRead) -> Result<Vec<PrecomputedOrder>> {
    let mut buf = Vec::new();
    if read_line(reader, &mut buf, 1)?.as_deref().map(str::trim_end) != Some(MAGIC) {
        return Err(Error::format(Location::Line(1), format!("expected `{MAGIC}`")));
    }
    let mut orders: Vec<PrecomputedOrder> = Vec::new();
    let mut number = 1;
    loop {
        number += 1;
        let Some(line) = read_line(reader, &mut buf, number)? else { break };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = Location::Line(number);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [order, channels, statistic, value, std_error] = fields[..] else {
            return Err(Error::format(location, "expected `order channels statistic value std_error`"));
        };
        let order: usize = order.parse().map_err(|e| Error::format(location, format!("order: {e}")))?;
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(Error::format(location, format!("order {order} outside {MIN_ORDER}..={MAX_ORDER}")));
        }
        let mask = parse_channels(channels)
            .ok_or_else(|| Error::format(location, format!("bad channel list `{channels}`")))?;
        if mask.len() != order {
            return Err(Error::format(location, format!("{} channels listed for order {order}", mask.len())));
        }
        let number = |name: &str, text: &str| -> Result<f64> {
            let v: f64 = text.parse().map_err(|e| Error::format(location, format!("{name} `{text}`: {e}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::format(location, format!("{name} must be finite")))
            }
        };
        let estimate = Estimate::new(number("value", value)?, number("std_error", std_error)?);
        if estimate.std_error < 0.0 {
            return Err(Error::format(location, "std_error must be >= 0"));
        }

        let idx = match orders.iter().position(|o| o.order == order) {
            Some(i) => i,
            None => {
                orders.push(PrecomputedOrder { order, combinations: Vec::new() });
                orders.len() - 1
            }
        };
        let combos = &mut orders[idx].combinations;
        let combo = match combos.iter().position(|c| c.channels == mask) {
            Some(i) => &mut combos[i],
            None => {
                combos.push(CombinationEstimate { channels: mask, theta: Err(NOT_PROVIDED), g: Err(NOT_PROVIDED) });
                combos.last_mut().unwrap()
            }
        };
        let slot = match statistic {
            "theta" => &mut combo.theta,
            "g" => &mut combo.g,
            other => return Err(Error::format(location, format!("unknown statistic `{other}`"))),
        };
        if slot.is_ok() {
            return Err(Error::format(location, format!("{statistic} for {mask} given twice")));
        }
        *slot = Ok(estimate);
    }
    if orders.is_empty() {
        return Err(Error::format(Location::Header, "no estimates"));
    }
    orders.sort_by_key(|o| o.order);
    Ok(orders)
}
