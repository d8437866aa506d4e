//! Comparison of the heat-flow map with the quantile coupling.

use rayon::prelude::*;

use crate::error::Result;
use crate::transport::TransportMapGrid;
use crate::verify::cdf::{monge_quantile_map, MeasureCdf};
use crate::verify::report::{Fingerprint, VerificationReport};

/// Default sup-norm tolerance against the quantile map.
pub const MONGE_TOL: f64 = 1e-3;
/// Default KS threshold for the pushforward.
pub const KS_TOL: f64 = 0.01;

/// Quantile map at every grid point.
pub fn monge_on_grid(map: &TransportMapGrid, mu: &MeasureCdf, nu: &MeasureCdf) -> Result<Vec<f64>> {
    map.points.par_iter().map(|&x| monge_quantile_map(mu, nu, x)).collect()
}

/// Sup-norm and metric discrepancy between `T` and the quantile map over the
/// grid points carrying the central 99% of `μ`.
pub fn compare_transport_to_monge(
    map: &TransportMapGrid,
    mu: &MeasureCdf,
    nu: &MeasureCdf,
    tol: f64,
    fingerprint: Fingerprint,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("monge_comparison", fingerprint);
    let gen = mu.generator();
    let lo = mu.quantile(0.005)?;
    let hi = mu.quantile_upper(0.005)?;
    let monge = monge_on_grid(map, mu, nu)?;
    let mut sup = 0.0f64;
    let mut metric_sup = 0.0f64;
    let mut used = 0usize;
    for i in 0..map.points.len() {
        let x = map.points[i];
        if x < lo || x > hi {
            continue;
        }
        used += 1;
        let d = (map.values[i] - monge[i]).abs();
        sup = sup.max(d);
        metric_sup = metric_sup.max(gen.metric_distance(map.values[i], monge[i])?);
        report.observe("|T - monge|", None, Some(x), d, tol);
    }
    report.metric("sup_discrepancy", sup);
    report.metric("metric_discrepancy", metric_sup);
    report.metric("points", used as f64);
    report.metric("central_lo", lo);
    report.metric("central_hi", hi);
    if used == 0 {
        report.note("no grid point inside the central 99% interval");
        report.observe("grid coverage", None, None, 1.0, 0.0);
    }
    Ok(report.finish(0.0))
}

/// `sup_y |F_μ(T^{-1}(y)) − F_ν(y)|` over the grid images `y = T(x_i)`, where
/// the monotone grid map inverts exactly. Each term is taken from whichever
/// side (cumulative or survival) is smaller to avoid cancellation.
pub fn pushforward_ks(map: &TransportMapGrid, mu: &MeasureCdf, nu: &MeasureCdf) -> Result<f64> {
    let rows: Vec<(f64, f64, f64, f64)> = map
        .points
        .par_iter()
        .zip(&map.values)
        .map(|(&x, &y)| -> Result<(f64, f64, f64, f64)> { Ok((mu.cdf(x)?, nu.cdf(y)?, mu.survival(x)?, nu.survival(y)?)) })
        .collect::<Result<_>>()?;
    let mut ks = 0.0f64;
    for &(fm, fn_, sm, sn) in &rows {
        ks = ks.max((fm - fn_).abs().min((sm - sn).abs()));
    }
    Ok(ks)
}
