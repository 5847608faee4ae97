//! Ingestion and cleaning of option quotes and index levels.
//!
//! Raw vendor quotes are grouped into per-(date, expiry) chains, filtered by
//! liquidity and static no-arbitrage bounds, and reduced to one
//! out-of-the-money-side price per strike (in-the-money calls are converted to
//! put prices through put–call parity). Index levels are turned into gross
//! N-day return series, either overlapping or sampled mid-month.

use chrono::{Datelike, NaiveDate};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Option side of a quote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionFlag {
    Put,
    Call,
}

/// One raw quote as delivered by the vendor export.
#[derive(Debug, Clone)]
pub struct RawOptionQuote {
    pub observation_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    pub flag: OptionFlag,
    pub bid: f64,
    pub ask: f64,
    pub underlying: f64,
    /// Forward price of the underlying for this expiry, when the vendor
    /// provides one.
    pub forward: Option<f64>,
    /// Gross risk-free rate over the quote's maturity (e.g. 1.002).
    pub risk_free_gross: f64,
}

/// A cleaned per-strike price inside an [`OptionChain`].
#[derive(Debug, Clone)]
pub struct ChainQuote {
    pub strike: f64,
    /// Midprice after any parity conversion; converted in-the-money calls
    /// carry a synthetic put price here.
    pub midprice: f64,
    pub flag: OptionFlag,
    /// Bid–ask spread of the source quote (used for dedup preference).
    pub spread: f64,
}

/// All cleaned quotes for one observation date and expiry.
#[derive(Debug, Clone)]
pub struct OptionChain {
    pub observation_date: NaiveDate,
    pub maturity_days: i64,
    /// Strictly increasing in strike; one quote per strike.
    pub quotes: Vec<ChainQuote>,
    pub underlying: f64,
    pub forward: Option<f64>,
    pub risk_free_gross: f64,
}

/// Gross N-day market returns on ordered dates.
#[derive(Debug, Clone)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub horizon_days: i64,
    pub values: Vec<f64>,
    pub overlapping: bool,
}

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("no option chain survived cleaning")]
    EmptyAfterCleaning,
    #[error("insufficient index data: {0}")]
    InsufficientData(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
    #[error("invalid index series: {0}")]
    InvalidSeries(String),
}

impl OptionChain {
    /// Check the structural invariants of a cleaned chain.
    pub fn validate(&self) -> Result<(), MarketDataError> {
        if self.maturity_days < 1 {
            return Err(MarketDataError::InvalidQuote(format!(
                "non-positive maturity {} days",
                self.maturity_days
            )));
        }
        for w in self.quotes.windows(2) {
            if w[1].strike <= w[0].strike {
                return Err(MarketDataError::InvalidQuote(format!(
                    "strikes not strictly increasing: {} then {}",
                    w[0].strike, w[1].strike
                )));
            }
        }
        for q in &self.quotes {
            if !price_within_bounds(
                q.midprice,
                q.flag,
                q.strike,
                self.underlying,
                self.risk_free_gross,
            ) {
                return Err(MarketDataError::InvalidQuote(format!(
                    "price {} at strike {} violates static bounds",
                    q.midprice, q.strike
                )));
            }
        }
        Ok(())
    }
}

impl ReturnSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        horizon_days: i64,
        values: Vec<f64>,
        overlapping: bool,
    ) -> Result<Self, MarketDataError> {
        if dates.len() != values.len() {
            return Err(MarketDataError::InvalidSeries(format!(
                "{} dates vs {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MarketDataError::InvalidSeries(
                "dates not strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(MarketDataError::InvalidSeries(
                "returns must be finite and strictly positive".into(),
            ));
        }
        Ok(ReturnSeries {
            dates,
            horizon_days,
            values,
            overlapping,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Static no-arbitrage bounds at midprice: a put must lie in
/// [max(0, K/R_f − S), K/R_f] and a call in [max(0, S − K/R_f), S].
fn price_within_bounds(price: f64, flag: OptionFlag, strike: f64, spot: f64, rf: f64) -> bool {
    let disc_strike = strike / rf;
    let tol = 1e-9 * spot.max(1.0);
    let (lo, hi) = match flag {
        OptionFlag::Put => ((disc_strike - spot).max(0.0), disc_strike),
        OptionFlag::Call => ((spot - disc_strike).max(0.0), spot),
    };
    price >= lo - tol && price <= hi + tol
}

/// Put price implied by a call price through put–call parity.
///
/// With a forward price F the parity relation is C − P = (F − K)/R_f;
/// without one it reduces to the spot form C − P = S − K/R_f.
pub fn put_from_call_parity(
    call_mid: f64,
    strike: f64,
    underlying: f64,
    forward: Option<f64>,
    rf: f64,
) -> f64 {
    let carry = match forward {
        Some(f) => (f - strike) / rf,
        None => underlying - strike / rf,
    };
    call_mid - carry
}

/// Call price implied by a put price through put–call parity.
pub fn call_from_put_parity(
    put_mid: f64,
    strike: f64,
    underlying: f64,
    forward: Option<f64>,
    rf: f64,
) -> f64 {
    let carry = match forward {
        Some(f) => (f - strike) / rf,
        None => underlying - strike / rf,
    };
    put_mid + carry
}

/// Group raw quotes into per-(date, expiry) chains and apply the cleaning
/// rules: positive bid, maturity within `[min_maturity_days,
/// max_maturity_days]`, static no-arbitrage bounds at midprice, one
/// out-of-the-money-side price per strike (smaller-spread quote wins ties),
/// and parity conversion of in-the-money calls to put prices.
///
/// Groups that lose every quote are dropped with a warning, never fabricated;
/// the call errors only when nothing at all survives.
pub fn clean_quotes(
    raw: &[RawOptionQuote],
    min_maturity_days: i64,
    max_maturity_days: i64,
) -> Result<Vec<OptionChain>, MarketDataError> {
    let mut groups: BTreeMap<(NaiveDate, NaiveDate), Vec<&RawOptionQuote>> = BTreeMap::new();
    for q in raw {
        groups
            .entry((q.observation_date, q.expiry_date))
            .or_default()
            .push(q);
    }

    let mut chains = Vec::new();
    for ((obs, expiry), quotes) in groups {
        let maturity = (expiry - obs).num_days();
        if maturity < min_maturity_days || maturity > max_maturity_days {
            log::warn!("dropping chain {obs}/{expiry}: maturity {maturity}d outside range");
            continue;
        }
        let spot = quotes[0].underlying;
        let forward = quotes[0].forward;
        let rf = quotes[0].risk_free_gross;
        // Strike at which the out-of-the-money side flips from puts to calls.
        let pivot = forward.unwrap_or(spot * rf);

        // Survivors of the per-quote filters, keyed by strike.
        let mut by_strike: BTreeMap<u64, Vec<&RawOptionQuote>> = BTreeMap::new();
        for q in quotes {
            if q.bid <= 0.0 || q.ask < q.bid {
                continue;
            }
            let mid = 0.5 * (q.bid + q.ask);
            if !price_within_bounds(mid, q.flag, q.strike, spot, rf) {
                continue;
            }
            by_strike.entry(q.strike.to_bits()).or_default().push(q);
        }

        let mut cleaned = Vec::new();
        for (_, candidates) in by_strike {
            let strike = candidates[0].strike;
            let preferred = if strike < pivot {
                OptionFlag::Put
            } else {
                OptionFlag::Call
            };
            // Prefer the out-of-the-money side, then the tighter quote.
            let best = candidates
                .iter()
                .min_by(|a, b| {
                    let pref = (a.flag != preferred).cmp(&(b.flag != preferred));
                    pref.then(
                        (a.ask - a.bid)
                            .total_cmp(&(b.ask - b.bid))
                            .then((a.flag == OptionFlag::Call).cmp(&(b.flag == OptionFlag::Call))),
                    )
                })
                .unwrap();
            let mid = 0.5 * (best.bid + best.ask);
            let (price, flag) = if best.flag == OptionFlag::Call && strike < pivot {
                // In-the-money call: carry the information as a put price.
                (
                    put_from_call_parity(mid, strike, spot, forward, rf),
                    OptionFlag::Put,
                )
            } else {
                (mid, best.flag)
            };
            if !price_within_bounds(price, flag, strike, spot, rf) {
                continue;
            }
            cleaned.push(ChainQuote {
                strike,
                midprice: price,
                flag,
                spread: best.ask - best.bid,
            });
        }

        if cleaned.is_empty() {
            log::warn!("dropping chain {obs}/{expiry}: no quote survived cleaning");
            continue;
        }
        chains.push(OptionChain {
            observation_date: obs,
            maturity_days: maturity,
            quotes: cleaned,
            underlying: spot,
            forward,
            risk_free_gross: rf,
        });
    }

    if chains.is_empty() {
        return Err(MarketDataError::EmptyAfterCleaning);
    }
    Ok(chains)
}

/// Build gross N-day returns from an ordered `(date, level)` series.
///
/// For each date t the terminal level is taken from the nearest available
/// date in the window `[t+N, t+N+3]` calendar days (weekend/holiday bridge);
/// dates with no level in the window are skipped. With `overlapping = false`
/// one return per month is kept — the valid date closest to the 15th — and a
/// minimum spacing of N days is enforced.
pub fn build_returns(
    index_levels: &[(NaiveDate, f64)],
    horizon_days: i64,
    overlapping: bool,
) -> Result<ReturnSeries, MarketDataError> {
    if index_levels.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(MarketDataError::InvalidSeries(
            "index dates not strictly increasing".into(),
        ));
    }
    if index_levels.iter().any(|&(_, l)| !(l > 0.0) || !l.is_finite()) {
        return Err(MarketDataError::InvalidSeries(
            "index levels must be finite and strictly positive".into(),
        ));
    }
    let by_date: BTreeMap<NaiveDate, f64> = index_levels.iter().copied().collect();

    let mut candidates: Vec<(NaiveDate, f64)> = Vec::new();
    for &(t, level_t) in index_levels {
        let target = t + chrono::Duration::days(horizon_days);
        let terminal = by_date
            .range(target..=target + chrono::Duration::days(3))
            .next();
        if let Some((_, &level_n)) = terminal {
            candidates.push((t, level_n / level_t));
        }
    }
    if candidates.is_empty() {
        return Err(MarketDataError::InsufficientData(format!(
            "no date pair spans the {horizon_days}-day horizon"
        )));
    }

    let picked = if overlapping {
        candidates
    } else {
        // One return per month, anchored nearest the 15th, spaced >= N days.
        let mut monthly: BTreeMap<(i32, u32), (NaiveDate, f64)> = BTreeMap::new();
        for &(t, r) in &candidates {
            let key = (t.year(), t.month());
            let dist = (t.day() as i64 - 15).abs();
            match monthly.get(&key) {
                Some(&(prev, _)) if (prev.day() as i64 - 15).abs() <= dist => {}
                _ => {
                    monthly.insert(key, (t, r));
                }
            }
        }
        let mut out = Vec::new();
        let mut last: Option<NaiveDate> = None;
        for (_, (t, r)) in monthly {
            if let Some(prev) = last {
                if (t - prev).num_days() < horizon_days {
                    continue;
                }
            }
            out.push((t, r));
            last = Some(t);
        }
        out
    };

    let (dates, values): (Vec<_>, Vec<_>) = picked.into_iter().unzip();
    ReturnSeries::new(dates, horizon_days, values, overlapping)
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    what: &str,
    path: &str,
    line: u64,
) -> Result<T, MarketDataError> {
    raw.trim().parse().map_err(|_| MarketDataError::Parse {
        path: path.to_string(),
        line,
        msg: format!("bad {what}: {raw:?}"),
    })
}

fn parse_date(raw: &str, what: &str, path: &str, line: u64) -> Result<NaiveDate, MarketDataError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|_| MarketDataError::Parse {
        path: path.to_string(),
        line,
        msg: format!("bad {what} (want YYYY-MM-DD): {raw:?}"),
    })
}

/// Read a vendor options export with header
/// `date,expiry,strike,flag,bid,ask,underlying,forward,rf`.
/// The forward column may be empty. Malformed rows abort with the line number.
pub fn read_options_csv(path: &Path) -> Result<Vec<RawOptionQuote>, MarketDataError> {
    let pstr = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MarketDataError::Io {
            path: pstr.clone(),
            source: std::io::Error::other(e),
        })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketDataError::Parse {
            path: pstr.clone(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 9 {
            return Err(MarketDataError::Parse {
                path: pstr.clone(),
                line,
                msg: format!("expected 9 columns, found {}", record.len()),
            });
        }
        let flag = match record[3].trim() {
            "P" | "p" => OptionFlag::Put,
            "C" | "c" => OptionFlag::Call,
            other => {
                return Err(MarketDataError::Parse {
                    path: pstr.clone(),
                    line,
                    msg: format!("bad flag (want P or C): {other:?}"),
                })
            }
        };
        let forward = if record[7].trim().is_empty() {
            None
        } else {
            Some(parse_field(&record[7], "forward", &pstr, line)?)
        };
        let quote = RawOptionQuote {
            observation_date: parse_date(&record[0], "date", &pstr, line)?,
            expiry_date: parse_date(&record[1], "expiry", &pstr, line)?,
            strike: parse_field(&record[2], "strike", &pstr, line)?,
            flag,
            bid: parse_field(&record[4], "bid", &pstr, line)?,
            ask: parse_field(&record[5], "ask", &pstr, line)?,
            underlying: parse_field(&record[6], "underlying", &pstr, line)?,
            forward,
            risk_free_gross: parse_field(&record[8], "rf", &pstr, line)?,
        };
        if quote.expiry_date <= quote.observation_date {
            return Err(MarketDataError::Parse {
                path: pstr.clone(),
                line,
                msg: "expiry not after observation date".into(),
            });
        }
        out.push(quote);
    }
    Ok(out)
}

/// Read an index-level series with header `date,level`.
pub fn read_index_csv(path: &Path) -> Result<Vec<(NaiveDate, f64)>, MarketDataError> {
    let pstr = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MarketDataError::Io {
            path: pstr.clone(),
            source: std::io::Error::other(e),
        })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketDataError::Parse {
            path: pstr.clone(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(MarketDataError::Parse {
                path: pstr.clone(),
                line,
                msg: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let date = parse_date(&record[0], "date", &pstr, line)?;
        let level: f64 = parse_field(&record[1], "level", &pstr, line)?;
        out.push((date, level));
    }
    Ok(out)
}
