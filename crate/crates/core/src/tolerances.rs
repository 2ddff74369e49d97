//! Default thresholds of the certification suites. Every value can be
//! overridden from the run configuration; residuals are compared after
//! division by their local scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cotton: f64,
    pub codazzi: f64,
    pub lemma: f64,
    pub principal_angle: f64,
    /// Lower bound on the smallest pairwise principal-curvature gap.
    pub min_gap: f64,
    pub dual_route: f64,
    pub normal: f64,
    /// Lower bound on `σ_min / σ_max` of the differential.
    pub regularity: f64,
    pub theta: f64,
    pub varphi: f64,
    pub system: f64,
    pub roundtrip: f64,
    pub cartan: f64,
    pub item: f64,
    pub fit: f64,
    pub killing: f64,
    pub conformality: f64,
    /// Scaled gap below which a frame is rejected in the cyclic suite.
    pub frame_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cotton: 1e-6,
            codazzi: 1e-6,
            lemma: 1e-6,
            principal_angle: 1e-7,
            min_gap: 1e-4,
            dual_route: 1e-8,
            normal: 1e-10,
            regularity: 1e-6,
            theta: 1e-7,
            varphi: 1e-7,
            system: 1e-6,
            roundtrip: 1e-12,
            cartan: 1e-6,
            item: 1e-4,
            fit: 1e-6,
            killing: 1e-6,
            conformality: 1e-8,
            frame_gap: 1e-5,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("cotton", self.cotton),
            ("codazzi", self.codazzi),
            ("lemma", self.lemma),
            ("principal_angle", self.principal_angle),
            ("min_gap", self.min_gap),
            ("dual_route", self.dual_route),
            ("normal", self.normal),
            ("regularity", self.regularity),
            ("theta", self.theta),
            ("varphi", self.varphi),
            ("system", self.system),
            ("roundtrip", self.roundtrip),
            ("cartan", self.cartan),
            ("item", self.item),
            ("fit", self.fit),
            ("killing", self.killing),
            ("conformality", self.conformality),
            ("frame_gap", self.frame_gap),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_merge_with_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"cotton": 1e-5}"#).unwrap();
        assert_eq!(t.cotton, 1e-5);
        assert_eq!(t.lemma, Tolerances::default().lemma);
        assert!(serde_json::from_str::<Tolerances>(r#"{"cotten": 1e-5}"#).is_err());
        let bad = Tolerances { fit: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
