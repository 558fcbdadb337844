//! Item characteristic curves, item and test information, and the
//! standard error of measurement on a grid of ability values.

use serde::{Deserialize, Serialize};

use super::model::logistic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub item_id: String,
    /// Discrimination (slope).
    pub a: f64,
    /// Easiness; difficulty `b = -e`.
    pub e: f64,
}

impl ItemParams {
    pub fn b(&self) -> f64 {
        -self.e
    }

    pub fn probability(&self, theta: f64) -> f64 {
        logistic(self.a * (theta + self.e))
    }

    pub fn information(&self, theta: f64) -> f64 {
        let p = self.probability(theta);
        self.a * self.a * p * (1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            min: -4.0,
            max: 4.0,
            step: 0.05,
        }
    }
}

impl Grid {
    /// Grid points computed as `min + k * step`, so no rounding drift accumulates.
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid grid {self:?}")));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.min + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub theta: Vec<f64>,
    pub items: Vec<String>,
    /// `icc[i][g]`: probability of a correct response for item `i` at grid point `g`.
    pub icc: Vec<Vec<f64>>,
    pub information: Vec<Vec<f64>>,
    pub test_information: Vec<f64>,
    pub sem: Vec<f64>,
}

pub fn compute_curves(items: &[ItemParams], grid: &Grid) -> Result<CurveSet> {
    if items.is_empty() {
        return Err(Error::Empty("item parameters"));
    }
    for it in items {
        if !(it.a.is_finite() && it.e.is_finite()) {
            return Err(Error::NonFinite(format!("parameters of {}", it.item_id)));
        }
        if it.a <= 0.0 {
            return Err(Error::InvalidItem {
                item: it.item_id.clone(),
                reason: format!("discrimination {} is not positive", it.a),
            });
        }
    }
    let theta = grid.points()?;
    let icc: Vec<Vec<f64>> = items.iter().map(|it| theta.iter().map(|&t| it.probability(t)).collect()).collect();
    let information: Vec<Vec<f64>> = items
        .iter()
        .zip(&icc)
        .map(|(it, ps)| ps.iter().map(|p| it.a * it.a * p * (1.0 - p)).collect())
        .collect();
    let test_information: Vec<f64> = (0..theta.len()).map(|g| information.iter().map(|row| row[g]).sum()).collect();
    let sem = test_information.iter().map(|tif| 1.0 / tif.sqrt()).collect();
    Ok(CurveSet {
        theta,
        items: items.iter().map(|it| it.item_id.clone()).collect(),
        icc,
        information,
        test_information,
        sem,
    })
}

impl CurveSet {
    /// Long form: `item_id,theta,p,information`.
    pub fn icc_csv(&self) -> String {
        let mut out = String::from("item_id,theta,p,information\n");
        for (i, id) in self.items.iter().enumerate() {
            for (g, t) in self.theta.iter().enumerate() {
                out.push_str(&format!("{id},{t:.2},{},{}\n", self.icc[i][g], self.information[i][g]));
            }
        }
        out
    }

    /// `theta,tif,sem`.
    pub fn tif_csv(&self) -> String {
        let mut out = String::from("theta,tif,sem\n");
        for (g, t) in self.theta.iter().enumerate() {
            out.push_str(&format!("{t:.2},{},{}\n", self.test_information[g], self.sem[g]));
        }
        out
    }

    /// Grid point of maximal test information.
    pub fn peak_information(&self) -> (f64, f64) {
        let (g, v) = self
            .test_information
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (g, &v)| if v > acc.1 { (g, v) } else { acc });
        (self.theta[g], v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(a: f64, e: f64) -> ItemParams {
        ItemParams {
            item_id: format!("i_{a}_{e}"),
            a,
            e,
        }
    }

    #[test]
    fn default_grid_has_161_points() {
        let g = Grid::default().points().unwrap();
        assert_eq!(g.len(), 161);
        assert_eq!(g[0], -4.0);
        assert!((g[160] - 4.0).abs() < 1e-12);
        assert!(Grid { min: 0.0, max: 1.0, step: 0.0 }.points().is_err());
    }

    #[test]
    fn information_peaks_at_difficulty() {
        let it = item(1.7, -0.5);
        let grid = Grid { min: -3.0, max: 3.0, step: 0.01 };
        let c = compute_curves(&[it], &grid).unwrap();
        let (t, v) = c.peak_information();
        assert!((t - 0.5).abs() < 0.011);
        assert!((v - 1.7 * 1.7 / 4.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(compute_curves(&[], &Grid::default()).is_err());
        assert!(compute_curves(&[item(0.0, 0.0)], &Grid::default()).is_err());
        assert!(compute_curves(&[item(f64::NAN, 0.0)], &Grid::default()).is_err());
    }

    proptest! {
        #[test]
        fn curve_identities(
            params in prop::collection::vec((0.2f64..3.0, -3.0f64..3.0), 1..8),
            t in -4.0f64..4.0,
        ) {
            let items: Vec<ItemParams> = params.iter().map(|&(a, e)| item(a, e)).collect();
            for it in &items {
                prop_assert!((it.probability(-it.e) - 0.5).abs() < 1e-15);
                prop_assert!(it.probability(t + 0.1) > it.probability(t));
            }
            let grid = Grid { min: t, max: t + 1.0, step: 0.25 };
            let c = compute_curves(&items, &grid).unwrap();
            for g in 0..c.theta.len() {
                let sum: f64 = c.information.iter().map(|row| row[g]).sum();
                prop_assert!((c.test_information[g] - sum).abs() < 1e-12);
                prop_assert!((c.sem[g] * c.test_information[g].sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }
}
