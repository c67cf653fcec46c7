//! Paired significance tests over a detection matrix: Cochran's Q, exact
//! McNemar and Holm's step-down adjustment.

mod gamma;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DetectionMatrix;
use crate::model::ToolId;

pub use gamma::{chi2_ln_sf, chi2_sf, ln_gamma_q};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmnibusResult {
    pub tools: Vec<ToolId>,
    pub instances: usize,
    pub q_statistic: f64,
    pub degrees_freedom: u32,
    pub p_value: f64,
    /// Natural log of `p_value`; finite even when `p_value` underflows.
    pub ln_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub tool_a: ToolId,
    pub tool_b: ToolId,
    /// Detected by A, missed by B.
    pub n10: usize,
    pub n01: usize,
    pub p_raw: f64,
    pub p_adj: f64,
}

impl PairwiseComparison {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_adj < alpha
    }
}

/// Cochran's Q over the matrix columns.
///
/// `Q = (k-1)(k ΣC² - N²) / (kN - ΣR²)` with column totals `C`, row totals
/// `R` and grand total `N`. Numerator and denominator are exact integers.
pub fn cochran_q(m: &DetectionMatrix) -> Result<OmnibusResult> {
    let k = m.tools.len();
    if k < 2 {
        return Err(Error::Usage(format!(
            "Cochran's Q needs at least 2 tools, got {k}"
        )));
    }
    if m.rows() == 0 {
        return Err(Error::Usage(
            "Cochran's Q needs at least one instance".into(),
        ));
    }
    let k = k as i128;
    let cols: Vec<i128> = (0..m.tools.len())
        .map(|j| m.column_total(j) as i128)
        .collect();
    let n: i128 = cols.iter().sum();
    let sum_c2: i128 = cols.iter().map(|c| c * c).sum();
    let sum_r2: i128 = (0..m.rows()).map(|g| (m.row_total(g) as i128).pow(2)).sum();
    let num = (k - 1) * (k * sum_c2 - n * n);
    let den = k * n - sum_r2;
    let df = (k - 1) as u32;
    let (q, ln_p) = if den == 0 {
        (0.0, 0.0)
    } else {
        let q = num as f64 / den as f64;
        (q, chi2_ln_sf(q, df))
    };
    Ok(OmnibusResult {
        tools: m.tools.clone(),
        instances: m.rows(),
        q_statistic: q,
        degrees_freedom: df,
        p_value: ln_p.exp(),
        ln_p_value: ln_p,
    })
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln` of the two-sided exact McNemar p-value.
///
/// Binomial test of `n10` successes in `n10 + n01` trials at rate ½; the
/// smaller tail is taken inclusive of the observed count and doubled, capped
/// at 1.
pub fn mcnemar_exact_ln(n10: usize, n01: usize) -> f64 {
    let n = n10 + n01;
    if n == 0 {
        return 0.0;
    }
    let k = n10.min(n01);
    // ln C(n, i), built incrementally from ln C(n, 0) = 0.
    let mut ln_c = 0.0;
    let mut ln_tail = f64::NEG_INFINITY;
    for i in 0..=k {
        if i > 0 {
            ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        ln_tail = ln_add(ln_tail, ln_c);
    }
    let ln_p = std::f64::consts::LN_2 + ln_tail - n as f64 * std::f64::consts::LN_2;
    ln_p.min(0.0)
}

pub fn mcnemar_exact(n10: usize, n01: usize) -> f64 {
    mcnemar_exact_ln(n10, n01).exp()
}

/// Holm step-down adjustment. Output is in input order; ties keep input order.
pub fn holm_adjust(p_raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_raw.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Usage(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| p_raw[*a].total_cmp(&p_raw[*b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p_raw[i]).min(1.0));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

/// Discordant counts for one pair of columns.
pub fn discordant(a: &[bool], b: &[bool]) -> (usize, usize) {
    a.iter()
        .zip(b)
        .fold((0, 0), |(n10, n01), (x, y)| match (x, y) {
            (true, false) => (n10 + 1, n01),
            (false, true) => (n10, n01 + 1),
            _ => (n10, n01),
        })
}

/// All tool pairs with Holm-adjusted exact McNemar p-values, sorted by raw p.
/// Within a pair, `tool_a` is the one whose name sorts first.
pub fn pairwise_table(m: &DetectionMatrix) -> Result<Vec<PairwiseComparison>> {
    if m.tools.len() < 2 {
        return Err(Error::Usage(
            "pairwise comparison needs at least 2 tools".into(),
        ));
    }
    let mut rows = Vec::new();
    for i in 0..m.tools.len() {
        for j in i + 1..m.tools.len() {
            let (a, b) = if m.tools[i].as_str() <= m.tools[j].as_str() {
                (i, j)
            } else {
                (j, i)
            };
            let (n10, n01) = discordant(&m.columns[a], &m.columns[b]);
            rows.push(PairwiseComparison {
                tool_a: m.tools[a],
                tool_b: m.tools[b],
                n10,
                n01,
                p_raw: mcnemar_exact(n10, n01),
                p_adj: 0.0,
            });
        }
    }
    let adjusted = holm_adjust(&rows.iter().map(|r| r.p_raw).collect::<Vec<_>>())?;
    for (r, p) in rows.iter_mut().zip(adjusted) {
        r.p_adj = p;
    }
    rows.sort_by(|x, y| {
        x.p_raw.total_cmp(&y.p_raw).then_with(|| {
            (x.tool_a.as_str(), x.tool_b.as_str()).cmp(&(y.tool_a.as_str(), y.tool_b.as_str()))
        })
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: Vec<Vec<bool>>) -> DetectionMatrix {
        let tools = ToolId::EVALUATED[..cols.len()].to_vec();
        let n = cols[0].len();
        let instances = (0..n)
            .map(|i| {
                (
                    crate::model::EcosystemId::Npm,
                    format!("c{i}"),
                    "1.0.0".to_string(),
                    crate::model::VulnId::new("CVE-1"),
                )
            })
            .collect();
        DetectionMatrix::new(tools, instances, cols).unwrap()
    }

    #[test]
    fn mcnemar_edges() {
        assert_eq!(mcnemar_exact(0, 0), 1.0);
        assert_eq!(mcnemar_exact(3, 3), 1.0);
        assert!((mcnemar_exact(0, 1) - 1.0).abs() < 1e-15);
        // (5, 0): 2 / 32.
        assert!((mcnemar_exact(5, 0) - 0.0625).abs() < 1e-15);
        assert_eq!(mcnemar_exact(70, 96), mcnemar_exact(96, 70));
    }

    #[test]
    fn holm_single_and_cap() {
        assert_eq!(holm_adjust(&[0.03]).unwrap(), vec![0.03]);
        assert_eq!(holm_adjust(&[0.4, 0.6]).unwrap(), vec![0.8, 0.8]);
        assert!(holm_adjust(&[1.5]).is_err());
    }

    #[test]
    fn identical_columns_give_zero_q() {
        let c = vec![true, false, true, true];
        let r = cochran_q(&matrix(vec![c.clone(), c.clone(), c])).unwrap();
        assert_eq!(r.q_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.degrees_freedom, 2);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(cochran_q(&matrix(vec![vec![true]])).is_err());
        assert!(pairwise_table(&matrix(vec![vec![true]])).is_err());
    }
}
