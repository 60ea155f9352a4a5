//! Aggregates of per-point optima: error moments, parameter histograms,
//! the local threshold classification and box-plot quartiles.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::optimizer::{fixed_errors, ErrorValue, ParameterGrid, PointOptimum};
use crate::spatial::NeighborIndex;
use crate::weighting::SigmoidParams;

/// Moments of the finite error values; degenerate values are only counted.
///
/// `sd` is the population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
    pub count: usize,
    pub n_degenerate: usize,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summary of a list of error values.
pub fn summary_stats(values: &[ErrorValue]) -> Result<SummaryStats> {
    let finite: Vec<f64> = values.iter().filter_map(ErrorValue::finite).collect();
    if finite.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let (mean, sd) = mean_sd(&finite);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SummaryStats {
        // guards against rounding pushing the mean outside [min, max]
        mean: mean.clamp(min, max),
        min,
        max,
        sd,
        count: finite.len(),
        n_degenerate: values.len() - finite.len(),
    })
}

/// Which error values a summary is taken over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsMode {
    /// The per-point optimum `E(a*, b*, k*)`.
    Optimal,
    /// Thresholds held fixed, minimized over the grid's `k` only.
    Fixed(SigmoidParams),
}

/// Per-point error values selected by `mode`.
pub fn mode_errors(
    cloud: &PointCloud,
    index: &NeighborIndex,
    optima: &[PointOptimum],
    grid: &ParameterGrid,
    mode: StatsMode,
) -> Result<Vec<ErrorValue>> {
    match mode {
        StatsMode::Optimal => Ok(optima.iter().map(|o| o.e_star).collect()),
        StatsMode::Fixed(params) => Ok(fixed_errors(cloud, index, grid, &params)?
            .into_iter()
            .map(|(e, _)| e)
            .collect()),
    }
}

/// One admissible `(a, b)` cell; `k_strata[t]` counts points with `k* = grid.k_values()[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbCell {
    pub a: f64,
    pub b: f64,
    pub count: usize,
    pub k_strata: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbHistogram {
    pub cells: Vec<AbCell>,
    pub n_degenerate: usize,
}

impl AbHistogram {
    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn cell(&self, a: f64, b: f64) -> Option<&AbCell> {
        self.cells.iter().find(|c| c.a == a && c.b == b)
    }
}

/// Counts optimal `(a*, b*)` per admissible pair, stratified by `k*`.
///
/// Points without any finite evaluation go to `n_degenerate`.
pub fn ab_histogram(optima: &[PointOptimum], grid: &ParameterGrid) -> Result<AbHistogram> {
    let pairs = grid.pairs();
    let ks = grid.k_values();
    let mut cells: Vec<AbCell> = pairs
        .iter()
        .map(|&(a, b)| AbCell {
            a,
            b,
            count: 0,
            k_strata: vec![0; ks.len()],
        })
        .collect();
    let mut n_degenerate = 0;
    for o in optima {
        if o.all_degenerate {
            n_degenerate += 1;
            continue;
        }
        let cell = grid
            .pair_index(o.a, o.b)
            .ok_or_else(|| Error::InvalidGrid(format!("({}, {}) is not a grid pair", o.a, o.b)))?;
        let kt = ks
            .iter()
            .position(|&k| k == o.k)
            .ok_or_else(|| Error::InvalidGrid(format!("k = {} is not in the grid", o.k)))?;
        cells[cell].count += 1;
        cells[cell].k_strata[kt] += 1;
    }
    Ok(AbHistogram { cells, n_degenerate })
}

/// Share of non-degenerate points per `k`, with the population mean and sd of `k*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KHistogram {
    pub k_values: Vec<usize>,
    pub fractions: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

pub fn k_histogram(optima: &[PointOptimum], grid: &ParameterGrid) -> Result<KHistogram> {
    let ks = grid.k_values();
    let chosen: Vec<usize> = optima
        .iter()
        .filter(|o| !o.all_degenerate)
        .map(|o| o.k)
        .collect();
    if chosen.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let mut counts = vec![0usize; ks.len()];
    for &k in &chosen {
        let t = ks
            .iter()
            .position(|&x| x == k)
            .ok_or_else(|| Error::InvalidGrid(format!("k = {k} is not in the grid")))?;
        counts[t] += 1;
    }
    let n = chosen.len() as f64;
    let as_f: Vec<f64> = chosen.iter().map(|&k| k as f64).collect();
    let (mean, sd) = mean_sd(&as_f);
    Ok(KHistogram {
        k_values: ks.to_vec(),
        fractions: counts.iter().map(|&c| c as f64 / n).collect(),
        mean,
        sd,
    })
}

/// Shares of the six local threshold cases.
///
/// For `a*`: zero, decreasable (one grid step down stays evaluable for some
/// `k`), or not decreasable. For `b*`: equal to `a*`, decreasable, or not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalABRow {
    pub a0: f64,
    pub a_dec: f64,
    pub not_a_dec: f64,
    pub b_eq_a: f64,
    pub b_dec: f64,
    pub not_b_dec: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ACase {
    Zero,
    Decreasable,
    NotDecreasable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BCase {
    EqualsA,
    Decreasable,
    NotDecreasable,
}

fn previous_below(values: &[f64], x: f64, floor: f64) -> Option<f64> {
    values.iter().copied().rfind(|&v| v < x && v >= floor)
}

/// Cases of a single optimum. `b*` with no admissible grid value between
/// `a*` and `b*` counts as [`BCase::EqualsA`].
pub fn local_ab_cases(o: &PointOptimum, grid: &ParameterGrid) -> Result<(ACase, BCase)> {
    let pairs = grid.pairs();
    if o.pair_degenerate.len() != pairs.len() {
        return Err(Error::MissingDegeneracyRecord(o.index));
    }
    let degenerate_at = |a: f64, b: f64| -> Result<bool> {
        grid.pair_index(a, b)
            .map(|t| o.pair_degenerate[t])
            .ok_or_else(|| Error::InvalidGrid(format!("({a}, {b}) is not a grid pair")))
    };

    let a_case = match previous_below(grid.a_values(), o.a, 0.0) {
        _ if o.a == 0.0 => ACase::Zero,
        None => ACase::Zero,
        Some(prev) if degenerate_at(prev, o.b)? => ACase::NotDecreasable,
        Some(_) => ACase::Decreasable,
    };
    let b_case = match previous_below(grid.b_values(), o.b, o.a) {
        _ if o.b == o.a => BCase::EqualsA,
        None => BCase::EqualsA,
        Some(prev) if degenerate_at(o.a, prev)? => BCase::NotDecreasable,
        Some(_) => BCase::Decreasable,
    };
    Ok((a_case, b_case))
}

/// Fractions of the six cases over the non-degenerate points.
pub fn local_ab_classification(optima: &[PointOptimum], grid: &ParameterGrid) -> Result<LocalABRow> {
    let mut a_counts = [0usize; 3];
    let mut b_counts = [0usize; 3];
    let mut count = 0usize;
    for o in optima.iter().filter(|o| !o.all_degenerate) {
        let (a, b) = local_ab_cases(o, grid)?;
        a_counts[a as usize] += 1;
        b_counts[b as usize] += 1;
        count += 1;
    }
    if count == 0 {
        return Err(Error::AllDegenerate);
    }
    let f = |c: usize| c as f64 / count as f64;
    Ok(LocalABRow {
        a0: f(a_counts[0]),
        a_dec: f(a_counts[1]),
        not_a_dec: f(a_counts[2]),
        b_eq_a: f(b_counts[0]),
        b_dec: f(b_counts[1]),
        not_b_dec: f(b_counts[2]),
        count,
    })
}

/// Box-plot numbers with whiskers at the data extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quartiles as Tukey hinges: each hinge is the median of one half of the
/// sorted data, and the middle value belongs to both halves when `n` is odd.
pub fn k_sd_distribution(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::EmptyInput("k standard deviations"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let half = n.div_ceil(2);
    Ok(FiveNumber {
        lower_whisker: v[0],
        q1: median_sorted(&v[..half]),
        median: median_sorted(&v),
        q3: median_sorted(&v[n - half..]),
        upper_whisker: v[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

impl From<SummaryStats> for Moments {
    fn from(s: SummaryStats) -> Self {
        Moments {
            min: s.min,
            mean: s.mean,
            max: s.max,
            sd: s.sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub mean: f64,
    pub sd: f64,
    pub hist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAbSummary {
    pub a0: f64,
    pub a_dec: f64,
    pub not_a_dec: f64,
    pub b_eq_a: f64,
    pub b_dec: f64,
    pub not_b_dec: f64,
}

/// The machine-readable report of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub corpus: String,
    pub n_points: usize,
    pub n_degenerate: usize,
    pub sd_convention: String,
    pub stats_optimal: Moments,
    pub stats_equal: Moments,
    pub k: KSummary,
    pub ab_hist: Vec<AbCell>,
    pub local_ab: LocalAbSummary,
    pub k_sd_box: FiveNumber,
}

/// One model's cloud and its optima.
#[derive(Debug, Clone, Copy)]
pub struct ModelRun<'a> {
    pub cloud: &'a PointCloud,
    pub optima: &'a [PointOptimum],
}

/// Pools the optima of every model into one [`Summary`]. The box plot is
/// taken over the per-model standard deviations of `k*`.
pub fn build_summary(corpus: &str, models: &[ModelRun<'_>], grid: &ParameterGrid) -> Result<Summary> {
    if models.is_empty() {
        return Err(Error::EmptyInput("models"));
    }
    let mut optimal_errors = Vec::new();
    let mut equal_errors = Vec::new();
    let mut pooled = Vec::new();
    let mut k_sds = Vec::with_capacity(models.len());
    for m in models {
        let index = NeighborIndex::build(m.cloud)?;
        optimal_errors.extend(mode_errors(m.cloud, &index, m.optima, grid, StatsMode::Optimal)?);
        equal_errors.extend(mode_errors(
            m.cloud,
            &index,
            m.optima,
            grid,
            StatsMode::Fixed(SigmoidParams::EQUAL),
        )?);
        k_sds.push(k_histogram(m.optima, grid)?.sd);
        pooled.extend_from_slice(m.optima);
    }
    let ab = ab_histogram(&pooled, grid)?;
    let kh = k_histogram(&pooled, grid)?;
    let local = local_ab_classification(&pooled, grid)?;
    Ok(Summary {
        corpus: corpus.to_string(),
        n_points: pooled.len(),
        n_degenerate: ab.n_degenerate,
        sd_convention: "population".into(),
        stats_optimal: summary_stats(&optimal_errors)?.into(),
        stats_equal: summary_stats(&equal_errors)?.into(),
        k: KSummary {
            mean: kh.mean,
            sd: kh.sd,
            hist: kh.fractions,
        },
        ab_hist: ab.cells,
        local_ab: LocalAbSummary {
            a0: local.a0,
            a_dec: local.a_dec,
            not_a_dec: local.not_a_dec,
            b_eq_a: local.b_eq_a,
            b_dec: local.b_dec,
            not_b_dec: local.not_b_dec,
        },
        k_sd_box: k_sd_distribution(&k_sds)?,
    })
}

fn angle_label(x: f64) -> String {
    let sixths = x * 6.0 / std::f64::consts::PI;
    if (sixths - sixths.round()).abs() < 1e-9 {
        match sixths.round() as i64 {
            0 => "0".into(),
            1 => "π/6".into(),
            6 => "π".into(),
            n => format!("{n}π/6"),
        }
    } else {
        format!("{x:.3}")
    }
}

/// A plain SVG bar chart.
pub fn svg_bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let (bar, gap, height, pad) = (24.0, 6.0, 200.0, 40.0);
    let width = pad * 2.0 + labels.len() as f64 * (bar + gap);
    let top = values.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="10">"#,
        height + pad * 3.0
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-size="14">{title}</text>"#);
    for (t, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = pad + t as f64 * (bar + gap);
        let h = v / top * height;
        let y = pad + height - h;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{bar}" height="{h}" fill="#4a7ab5"><title>{label}: {v}</title></rect>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" transform="rotate(60 {} {})">{label}</text>"#,
            x + 4.0,
            pad + height + 12.0,
            x + 4.0,
            pad + height + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of the `(a, b)` cell counts.
pub fn ab_histogram_svg(hist: &AbHistogram) -> String {
    let labels: Vec<String> = hist
        .cells
        .iter()
        .map(|c| format!("({}, {})", angle_label(c.a), angle_label(c.b)))
        .collect();
    let values: Vec<f64> = hist.cells.iter().map(|c| c.count as f64).collect();
    svg_bar_chart("(a*, b*) counts", &labels, &values)
}

/// Bar chart of the `k*` fractions.
pub fn k_histogram_svg(hist: &KHistogram) -> String {
    let labels: Vec<String> = hist.k_values.iter().map(|k| k.to_string()).collect();
    svg_bar_chart("k* fractions", &labels, &hist.fractions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn opt(a: f64, b: f64, k: usize, e: f64, record: Vec<bool>) -> PointOptimum {
        PointOptimum {
            index: 0,
            a,
            b,
            k,
            e_star: ErrorValue::Finite(e),
            all_degenerate: false,
            features: None,
            pair_degenerate: record,
        }
    }

    fn degenerate_opt(n_pairs: usize) -> PointOptimum {
        PointOptimum {
            e_star: ErrorValue::Infinite,
            all_degenerate: true,
            ..opt(0.0, 0.0, 6, 0.0, vec![true; n_pairs])
        }
    }

    #[test]
    fn summary_examples() {
        let s = summary_stats(&[ErrorValue::Finite(0.5)]).unwrap();
        assert_eq!((s.min, s.mean, s.max, s.sd), (0.5, 0.5, 0.5, 0.0));

        let s = summary_stats(&[ErrorValue::Finite(0.0), ErrorValue::Finite(LN_2), ErrorValue::Infinite]).unwrap();
        assert!((s.mean - LN_2 / 2.0).abs() < 1e-15);
        assert!((s.sd - LN_2 / 2.0).abs() < 1e-15);
        assert_eq!(s.count, 2);
        assert_eq!(s.n_degenerate, 1);

        assert!(matches!(summary_stats(&[ErrorValue::Infinite]), Err(Error::AllDegenerate)));
    }

    #[test]
    fn ab_histogram_single_unit() {
        let grid = ParameterGrid::default_grid();
        let n = grid.pairs().len();
        let optima = vec![opt(0.0, PI / 6.0, 7, 0.1, vec![false; n]), degenerate_opt(n)];
        let h = ab_histogram(&optima, &grid).unwrap();
        let cell = h.cell(0.0, PI / 6.0).unwrap();
        assert_eq!(cell.count, 1);
        assert_eq!(cell.k_strata[1], 1);
        assert_eq!(h.total() + h.n_degenerate, 2);
    }

    #[test]
    fn k_histogram_examples() {
        let grid = ParameterGrid::default_grid();
        let n = grid.pairs().len();
        let all6: Vec<_> = (0..4).map(|_| opt(0.0, 0.0, 6, 0.0, vec![false; n])).collect();
        let h = k_histogram(&all6, &grid).unwrap();
        assert_eq!(h.fractions[0], 1.0);
        assert_eq!((h.mean, h.sd), (6.0, 0.0));

        let two = vec![opt(0.0, 0.0, 6, 0.0, vec![false; n]), opt(0.0, 0.0, 20, 0.0, vec![false; n])];
        let h = k_histogram(&two, &grid).unwrap();
        assert_eq!((h.mean, h.sd), (13.0, 7.0));
        assert!((h.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_cases() {
        let grid = ParameterGrid::default_grid();
        let n = grid.pairs().len();
        let zero = opt(0.0, 0.0, 6, 0.0, vec![false; n]);
        assert_eq!(local_ab_cases(&zero, &grid).unwrap(), (ACase::Zero, BCase::EqualsA));

        let mut record = vec![false; n];
        record[grid.pair_index(0.0, 0.0).unwrap()] = true;
        let fan = opt(0.0, PI / 6.0, 6, 0.0, record);
        assert_eq!(local_ab_cases(&fan, &grid).unwrap(), (ACase::Zero, BCase::NotDecreasable));

        let mut record = vec![false; n];
        record[grid.pair_index(PI / 6.0, PI / 2.0).unwrap()] = true;
        let mid = opt(PI / 3.0, PI / 2.0, 6, 0.0, record);
        assert_eq!(
            local_ab_cases(&mid, &grid).unwrap(),
            (ACase::NotDecreasable, BCase::Decreasable)
        );

        let missing = opt(0.0, 0.0, 6, 0.0, vec![]);
        assert!(matches!(
            local_ab_classification(&[missing], &grid),
            Err(Error::MissingDegeneracyRecord(0))
        ));

        let row = local_ab_classification(&[zero, fan, mid, degenerate_opt(n)], &grid).unwrap();
        assert_eq!(row.count, 3);
        assert!((row.a0 + row.a_dec + row.not_a_dec - 1.0).abs() < 1e-12);
        assert!((row.b_eq_a + row.b_dec + row.not_b_dec - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartiles() {
        let f = k_sd_distribution(&[4.7]).unwrap();
        assert!([f.lower_whisker, f.q1, f.median, f.q3, f.upper_whisker].iter().all(|&v| v == 4.7));
        let f = k_sd_distribution(&[5.0, 3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(
            [f.lower_whisker, f.q1, f.median, f.q3, f.upper_whisker],
            [1.0, 2.0, 3.0, 4.0, 5.0]
        );
        let f = k_sd_distribution(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!([f.q1, f.median, f.q3], [1.5, 2.5, 3.5]);
        assert!(k_sd_distribution(&[]).is_err());
    }

    #[test]
    fn svg_has_one_bar_per_cell() {
        let grid = ParameterGrid::default_grid();
        let h = ab_histogram(&[], &grid).unwrap();
        let svg = ab_histogram_svg(&h);
        assert_eq!(svg.matches("<rect").count(), 28);
        assert!(svg.contains("(π/6, π)"));
        assert!(svg.contains("(2π/6, 3π/6)"));
    }
}
