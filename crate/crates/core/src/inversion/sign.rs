//! Signed traces from magnitudes: anchor at the largest value, propagate
//! along the arc, and flip across each zero band iff its vanishing order is
//! odd. The order is the least-squares slope of log ξ against log distance
//! to the band center, estimated from both sides.
//!
//! Bands come from two detectors. The threshold rule (ξ below zero_tol·max)
//! catches exact zeros; grid sampling rarely lands on a zero, so deep
//! strict local minima are treated as band candidates too — a positive
//! local minimum then produces a near-zero slope, an even order, and no
//! flip, so false candidates are harmless.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroBand {
    /// patch-node index range of the band (inclusive)
    pub start: usize,
    pub end: usize,
    /// refined arc coordinate of the band center used for the fits
    pub center: f64,
    pub order_left: f64,
    pub order_right: f64,
    /// rounded average order; the sign flips across the band iff odd
    pub order: usize,
    pub flips: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignedTrace {
    /// ψ with |ψ| = ξ nodewise and ψ(anchor) > 0
    pub values: Vec<f64>,
    pub anchor: usize,
    pub bands: Vec<ZeroBand>,
}

/// Fraction of the local neighborhood maximum below which a strict local
/// minimum is considered a zero-band candidate.
const DIP_FRACTION: f64 = 0.5;

/// Recover the sign pattern of a nonnegative trace magnitude along the arc.
pub fn recover_sign(
    xi: &[f64],
    arcs: &[f64],
    zero_tol: f64,
    fit_window: usize,
) -> Result<SignedTrace> {
    let n = xi.len();
    if n < 4 || arcs.len() != n {
        return Err(CoreError::Contract(
            "sign recovery needs at least 4 arc-ordered samples".into(),
        ));
    }
    if xi.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(CoreError::Contract("ξ must be finite and nonnegative".into()));
    }
    if fit_window < 3 {
        return Err(CoreError::Config("fit_window must be at least 3".into()));
    }
    let ximax = xi.iter().cloned().fold(0.0f64, f64::max);
    if ximax <= 0.0 {
        return Err(CoreError::Contract(
            "ξ vanishes identically; no sign to recover".into(),
        ));
    }
    let threshold = zero_tol * ximax;

    let mut in_band = vec![false; n];
    for i in 0..n {
        in_band[i] = xi[i] < threshold;
    }
    for i in 1..n - 1 {
        if in_band[i] || in_band[i - 1] || in_band[i + 1] {
            continue;
        }
        if xi[i - 1] > xi[i] && xi[i + 1] >= xi[i] {
            let lo = i.saturating_sub(fit_window);
            let hi = (i + fit_window).min(n - 1);
            let local_max = xi[lo..=hi].iter().cloned().fold(0.0f64, f64::max);
            if xi[i] <= DIP_FRACTION * local_max {
                in_band[i] = true;
            }
        }
    }

    // maximal runs
    let mut bands: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if in_band[i] {
            let start = i;
            while i + 1 < n && in_band[i + 1] {
                i += 1;
            }
            bands.push((start, i));
        }
        i += 1;
    }

    let mut classified = Vec::with_capacity(bands.len());
    for (band_idx, &(p, q)) in bands.iter().enumerate() {
        if p == 0 || q == n - 1 {
            // a band touching the end of Σ separates nothing: there is no
            // region beyond it to continue into, so no parity is needed
            classified.push(ZeroBand {
                start: p,
                end: q,
                center: 0.5 * (arcs[p] + arcs[q]),
                order_left: f64::NAN,
                order_right: f64::NAN,
                order: 0,
                flips: false,
            });
            continue;
        }
        let band = classify_band(xi, arcs, &in_band, p, q, fit_window).map_err(|detail| {
            CoreError::OrderAmbiguity {
                band: band_idx,
                detail,
            }
        })?;
        classified.push(band);
    }

    // anchor at the arg-max; it cannot lie in a band
    let anchor = xi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    debug_assert!(!in_band[anchor]);

    let mut sign = vec![1.0f64; n];
    // rightward sweep
    let mut cur = 1.0;
    let mut pos = anchor + 1;
    while pos < n {
        if in_band[pos] {
            let band = classified
                .iter()
                .find(|b| pos >= b.start && pos <= b.end)
                .unwrap();
            let factor = if band.flips { -1.0 } else { 1.0 };
            let mid = (band.start + band.end) / 2;
            for j in band.start..=band.end {
                sign[j] = if j <= mid { cur } else { cur * factor };
            }
            cur *= factor;
            pos = band.end + 1;
        } else {
            sign[pos] = cur;
            pos += 1;
        }
    }
    // leftward sweep
    cur = 1.0;
    let mut pos = anchor as isize - 1;
    while pos >= 0 {
        let p = pos as usize;
        if in_band[p] {
            let band = classified
                .iter()
                .find(|b| p >= b.start && p <= b.end)
                .unwrap();
            let factor = if band.flips { -1.0 } else { 1.0 };
            let mid = (band.start + band.end) / 2;
            for j in band.start..=band.end {
                sign[j] = if j > mid { cur } else { cur * factor };
            }
            cur *= factor;
            pos = band.start as isize - 1;
        } else {
            sign[p] = cur;
            pos -= 1;
        }
    }

    let values = xi.iter().zip(&sign).map(|(v, s)| v * s).collect();
    Ok(SignedTrace {
        values,
        anchor,
        bands: classified,
    })
}

/// Fit nodes on one side of a band. The power law only holds on the
/// monotone rise out of the zero, so the walk stops at other bands, the
/// window budget, or a clear descent past a local maximum; nodes in the
/// curved top of the rise (above 65% of the local maximum) and nodes at
/// the band's own contamination level are dropped.
fn side_window(
    xi: &[f64],
    in_band: &[bool],
    start: isize,
    step: isize,
    fit_window: usize,
    floor: f64,
) -> Vec<usize> {
    let n = xi.len() as isize;
    let mut nodes = Vec::new();
    let mut run_max = 0.0f64;
    let mut max_pos = 0usize;
    let mut j = start;
    while j >= 0 && j < n && nodes.len() < fit_window && !in_band[j as usize] {
        let v = xi[j as usize];
        if v > run_max {
            run_max = v;
            max_pos = nodes.len();
        } else if v < 0.85 * run_max {
            // clear descent: keep only the rise up to the maximum
            nodes.truncate(max_pos + 1);
            break;
        }
        nodes.push(j as usize);
        j += step;
    }
    let cap = 0.65 * run_max;
    let above_floor: Vec<usize> = nodes.iter().cloned().filter(|&i| xi[i] > floor).collect();
    let capped: Vec<usize> = above_floor
        .iter()
        .cloned()
        .filter(|&i| xi[i] <= cap)
        .collect();
    if capped.len() >= 3 {
        capped
    } else {
        // a short rise leaves too few nodes under the cap; the closest
        // above-floor nodes are the least curved ones, use those
        above_floor.into_iter().take(3).collect()
    }
}

fn classify_band(
    xi: &[f64],
    arcs: &[f64],
    in_band: &[bool],
    p: usize,
    q: usize,
    fit_window: usize,
) -> std::result::Result<ZeroBand, String> {
    let band_min = xi[p..=q].iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = 1.2 * band_min;
    let left = side_window(xi, in_band, p as isize - 1, -1, fit_window, floor);
    let right = side_window(xi, in_band, q as isize + 1, 1, fit_window, floor);
    if left.len() < 3 || right.len() < 3 {
        return Err(format!(
            "band [{p}, {q}] has too few fit nodes ({} left, {} right)",
            left.len(),
            right.len()
        ));
    }

    // sub-grid refinement of the band center: the true zero usually falls
    // between nodes, and a half-spacing offset biases the log-log slope
    let spacing = (arcs[right[0]] - arcs[left[0]]).abs() / (right[0] - left[0]) as f64;
    let base_center = 0.5 * (arcs[p] + arcs[q]);
    // (residual, center, left fit, right fit)
    let mut best: Option<(f64, f64, LogFit, LogFit)> = None;
    for offset in -6i32..=6 {
        let center = base_center + offset as f64 * spacing / 8.0;
        let (Some(fl), Some(fr)) = (
            log_fit(xi, arcs, &left, center),
            log_fit(xi, arcs, &right, center),
        ) else {
            continue;
        };
        // per-point normalization keeps a long window on one side from
        // dominating the center choice
        let residual = fl.sse / left.len() as f64 + fr.sse / right.len() as f64;
        if best.as_ref().map_or(true, |(r, _, _, _)| residual < *r) {
            best = Some((residual, center, fl, fr));
        }
    }
    let Some((_, center, fit_l, fit_r)) = best else {
        return Err(format!("band [{p}, {q}]: log-log fit impossible"));
    };
    let (m_left, m_right) = (fit_l.slope, fit_r.slope);

    // a vanishing point must extrapolate through the dip: when the band
    // minimum sits far above the power law's value half a spacing from the
    // center, the trace never vanishes there — a positive local minimum,
    // which the sign passes through unchanged
    let half = 0.5 * spacing;
    let pred = (fit_l.eval(half) * fit_r.eval(half)).sqrt();
    if band_min > 3.0 * pred && m_left.min(m_right) > 0.6 {
        return Ok(ZeroBand {
            start: p,
            end: q,
            center,
            order_left: m_left,
            order_right: m_right,
            order: 0,
            flips: false,
        });
    }

    let check = |m: f64, side: &str| -> std::result::Result<i64, String> {
        let rounded = m.round();
        if (m - rounded).abs() > 0.25 {
            return Err(format!(
                "band [{p}, {q}]: {side} order {m:.3} is not near an integer"
            ));
        }
        Ok(rounded.max(0.0) as i64)
    };
    let rl = check(m_left, "left")?;
    let rr = check(m_right, "right")?;
    if rl % 2 != rr % 2 {
        return Err(format!(
            "band [{p}, {q}]: side orders {m_left:.3}/{m_right:.3} disagree in parity"
        ));
    }
    let order = (0.5 * (m_left + m_right)).round().max(0.0) as usize;
    Ok(ZeroBand {
        start: p,
        end: q,
        center,
        order_left: m_left,
        order_right: m_right,
        order,
        flips: order % 2 == 1,
    })
}

struct LogFit {
    slope: f64,
    intercept: f64,
    sse: f64,
}

impl LogFit {
    /// power-law value at distance d from the center
    fn eval(&self, d: f64) -> f64 {
        (self.intercept + self.slope * d.ln()).exp()
    }
}

/// Least-squares fit of ln ξ = intercept + slope·ln|s − center| over the
/// given nodes. Nodes with nonpositive ξ are skipped.
fn log_fit(xi: &[f64], arcs: &[f64], nodes: &[usize], center: f64) -> Option<LogFit> {
    let mut xs = Vec::with_capacity(nodes.len());
    let mut ys = Vec::with_capacity(nodes.len());
    for &i in nodes {
        let d = (arcs[i] - center).abs();
        if d <= 0.0 || xi[i] <= 0.0 {
            continue;
        }
        xs.push(d.ln());
        ys.push(xi[i].ln());
    }
    if xs.len() < 3 {
        return None;
    }
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let mut sse = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fit = mean_y + slope * (x - mean_x);
        sse += (y - fit) * (y - fit);
    }
    Some(LogFit {
        slope,
        intercept: mean_y - slope * mean_x,
        sse,
    })
}
