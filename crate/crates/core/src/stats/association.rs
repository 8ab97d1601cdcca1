use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::special::{chi2_sf, f_sf, normal_two_sided_p, student_t_two_sided_p};
use crate::dataset::Num;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationTest {
    Chi2,
    Anova,
}

/// Orientation of the deviation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationSign {
    /// `(E - O) / E`: positive when a cell is under-represented.
    #[default]
    ExpectedMinusObserved,
    /// `(O - E) / E`: positive when a cell is enriched.
    ObservedMinusExpected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEffect {
    pub segment: usize,
    /// Variable level for contingency cells; `None` for numeric variables.
    pub level: Option<String>,
    /// Deviation score or mean offset.
    pub value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub variable: String,
    pub test: AssociationTest,
    pub statistic: f64,
    pub df: (f64, f64),
    pub p_value: f64,
    pub per_segment: Vec<SegmentEffect>,
}

/// Pearson chi-square test of segment against a categorical variable.
/// `values` holds level codes into `levels`; `None` entries are skipped.
pub fn chi2_association(
    variable: &str,
    labels: &[usize],
    values: &[Option<usize>],
    levels: &[String],
    sign: DeviationSign,
) -> Result<AssociationResult> {
    if labels.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: values.len(),
        });
    }
    let mut table: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut col_tot: BTreeMap<usize, f64> = BTreeMap::new();
    for (&s, v) in labels.iter().zip(values) {
        if let Some(c) = *v {
            if c >= levels.len() {
                return Err(Error::InvalidArgument(format!("level code {c} out of range")));
            }
            *table.entry(s).or_default().entry(c).or_default() += 1.0;
            *col_tot.entry(c).or_default() += 1.0;
        }
    }
    if table.len() < 2 || col_tot.len() < 2 {
        return Err(Error::DegenerateTable(format!(
            "{variable}: {} segments and {} levels with data",
            table.len(),
            col_tot.len()
        )));
    }
    let n: f64 = col_tot.values().sum();
    let mut statistic = 0.0;
    let mut per_segment = Vec::new();
    for (&s, row) in &table {
        let row_tot: f64 = row.values().sum();
        for (&c, &ct) in &col_tot {
            let o = row.get(&c).copied().unwrap_or(0.0);
            let e = row_tot * ct / n;
            if e < 1e-9 {
                continue;
            }
            statistic += (o - e) * (o - e) / e;
            let score = match sign {
                DeviationSign::ExpectedMinusObserved => (e - o) / e,
                DeviationSign::ObservedMinusExpected => (o - e) / e,
            };
            let var = e * (1.0 - row_tot / n) * (1.0 - ct / n);
            let p = if var > 0.0 {
                normal_two_sided_p((o - e) / var.sqrt())
            } else {
                1.0
            };
            per_segment.push(SegmentEffect {
                segment: s,
                level: Some(levels[c].clone()),
                value: score,
                p_value: p,
            });
        }
    }
    let df = ((table.len() - 1) * (col_tot.len() - 1)) as f64;
    Ok(AssociationResult {
        variable: variable.to_string(),
        test: AssociationTest::Chi2,
        statistic,
        df: (df, 0.0),
        p_value: chi2_sf(statistic, df).clamp(0.0, 1.0),
        per_segment,
    })
}

/// One-way ANOVA of a numeric variable on segment membership. Each
/// segment's coefficient is its mean minus the grand mean, tested with a
/// t statistic on the pooled residual variance. NaN values are skipped.
pub fn anova_association(variable: &str, labels: &[usize], values: &[f64]) -> Result<AssociationResult> {
    if labels.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: values.len(),
        });
    }
    let mut groups: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut n = 0.0;
    let mut total = 0.0;
    for (&s, &y) in labels.iter().zip(values) {
        if y.is_nan() {
            continue;
        }
        let g = groups.entry(s).or_insert((0.0, 0.0));
        g.0 += 1.0;
        g.1 += y;
        n += 1.0;
        total += y;
    }
    let k = groups.len();
    if k < 2 {
        return Err(Error::DegenerateTable(format!("{variable}: fewer than 2 segments with data")));
    }
    if n <= k as f64 {
        return Err(Error::InsufficientData(format!("{variable}: not enough points for ANOVA")));
    }
    let grand = total / n;
    let mut ssw = 0.0;
    let mut sst = 0.0;
    for (&s, &y) in labels.iter().zip(values) {
        if y.is_nan() {
            continue;
        }
        let (c, sum) = groups[&s];
        ssw += (y - sum / c).powi(2);
        sst += (y - grand).powi(2);
    }
    if sst <= 1e-12 * (1.0 + grand * grand) * n {
        return Err(Error::ConstantColumn(variable.to_string()));
    }
    let ssb = (sst - ssw).max(0.0);
    let df1 = (k - 1) as f64;
    let df2 = n - k as f64;
    let mse = ssw / df2;
    let (statistic, p_value) = if mse > 0.0 {
        let f = (ssb / df1) / mse;
        (f, f_sf(f, df1, df2))
    } else {
        (f64::INFINITY, 0.0)
    };
    let per_segment = groups
        .iter()
        .map(|(&s, &(c, sum))| {
            let offset = sum / c - grand;
            let se = (mse * (1.0 / c - 1.0 / n)).max(0.0).sqrt();
            let p = if se > 0.0 {
                student_t_two_sided_p(offset / se, df2)
            } else if offset == 0.0 {
                1.0
            } else {
                0.0
            };
            SegmentEffect {
                segment: s,
                level: None,
                value: offset,
                p_value: p,
            }
        })
        .collect();
    Ok(AssociationResult {
        variable: variable.to_string(),
        test: AssociationTest::Anova,
        statistic,
        df: (df1, df2),
        p_value: p_value.clamp(0.0, 1.0),
        per_segment,
    })
}

/// Benjamini-Hochberg adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.clamp(0.0, 1.0);
    }
    adjusted
}

impl AssociationResult {
    /// Writes results as a long table, one row per segment effect.
    pub fn write_csv(results: &[AssociationResult], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let q = benjamini_hochberg(&results.iter().map(|r| r.p_value).collect::<Vec<_>>());
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "variable,test,statistic,p_value,q_value,segment,level,value,segment_p_value").map_err(io)?;
        for (r, q) in results.iter().zip(q) {
            let test = match r.test {
                AssociationTest::Chi2 => "chi2",
                AssociationTest::Anova => "anova",
            };
            for e in &r.per_segment {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    r.variable,
                    test,
                    Num(r.statistic),
                    Num(r.p_value),
                    Num(q),
                    e.segment,
                    e.level.as_deref().unwrap_or(""),
                    Num(e.value),
                    Num(e.p_value)
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_2x2() {
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let values: Vec<Option<usize>> = (0..20).map(|i| Some(i / 10)).collect();
        let levels = vec!["a".to_string(), "b".to_string()];
        let r = chi2_association("v", &labels, &values, &levels, DeviationSign::default()).unwrap();
        assert!((r.statistic - 20.0).abs() < 1e-12);
        assert!((r.p_value - 7.744e-6).abs() < 1e-8);
        let empty = r.per_segment.iter().find(|e| e.segment == 0 && e.level.as_deref() == Some("b")).unwrap();
        assert_eq!(empty.value, 1.0);
    }

    #[test]
    fn bh_is_monotone() {
        let q = benjamini_hochberg(&[0.01, 0.04, 0.03, 0.2]);
        assert!((q[0] - 0.04).abs() < 1e-12);
        assert!((q[1] - 0.16 / 3.0).abs() < 1e-12);
        assert_eq!(q[1], q[2]);
        assert!((q[3] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn constant_variable_rejected() {
        assert!(anova_association("v", &[0, 0, 1, 1], &[2.0; 4]).is_err());
    }
}
