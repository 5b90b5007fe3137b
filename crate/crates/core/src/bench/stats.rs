use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn std_error(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    std_dev(v) / (v.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestFlag {
    Regular,
    /// Every difference is zero; reported as p = 1.
    Identical,
    /// Constant non-zero difference: zero variance, reported as p = 0.
    ExactSeparation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p_value: f64,
    pub flag: TTestFlag,
}

/// Two-sided paired t-test on `b − a`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "paired t-test needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let n = d.len();
    let md = mean(&d);
    if d.iter().all(|&x| x == 0.0) {
        return Ok(PairedTTest { n, mean_difference: 0.0, t: 0.0, p_value: 1.0, flag: TTestFlag::Identical });
    }
    let sd = std_dev(&d);
    if sd == 0.0 || sd < 1e-14 * md.abs() {
        return Ok(PairedTTest {
            n,
            mean_difference: md,
            t: md.signum() * f64::INFINITY,
            p_value: 0.0,
            flag: TTestFlag::ExactSeparation,
        });
    }
    let t = md / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest { n, mean_difference: md, t, p_value: p, flag: TTestFlag::Regular })
}
