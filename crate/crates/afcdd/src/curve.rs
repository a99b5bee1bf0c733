//! Efficiency-decay curves: (storage time, efficiency, standard error)
//! samples plus provenance metadata, with the CSV interchange format
//! (columns t_spin_s, eta, sigma_eta; '#'-prefixed comment lines).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::SequenceKind;

/// Which sweep variable was held fixed when the curve was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "var", content = "value")]
pub enum FixedVar {
    None,
    /// Fixed total pulse count n; storage time swept via tau.
    PulseCount(u32),
    /// Fixed inter-pulse delay tau (seconds); storage time swept via n.
    PulseSpacing(f64),
}

/// Provenance of a decay curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub kind: Option<SequenceKind>,
    pub fixed: FixedVar,
    /// OU sigma/2pi in Hz used to generate the curve, if simulated.
    pub sigma_hz: Option<f64>,
    pub tau_c_s: Option<f64>,
    pub epsilon_rad: Option<f64>,
    /// False when sigma_eta was not supplied (unweighted fits, with warning).
    pub weights_supplied: bool,
}

impl Default for CurveMeta {
    fn default() -> Self {
        Self {
            kind: None,
            fixed: FixedVar::None,
            sigma_hz: None,
            tau_c_s: None,
            epsilon_rad: None,
            weights_supplied: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t_spin_s: f64,
    pub eta: f64,
    pub sigma_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub points: Vec<CurvePoint>,
    pub meta: CurveMeta,
}

impl DecayCurve {
    pub fn new(points: Vec<CurvePoint>, meta: CurveMeta) -> Result<Self> {
        let curve = Self { points, meta };
        curve.validate()?;
        Ok(curve)
    }

    // negated comparisons reject NaN along with out-of-range values
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for p in &self.points {
            if !(p.t_spin_s > prev) {
                return Err(Error::InvalidInput(
                    "t_spin must be strictly increasing".into(),
                ));
            }
            if !(p.eta >= 0.0) || !p.eta.is_finite() {
                return Err(Error::InvalidInput("eta must be >= 0".into()));
            }
            if !(p.sigma_eta > 0.0) {
                return Err(Error::InvalidInput("sigma_eta must be > 0".into()));
            }
            prev = p.t_spin_s;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Serializes to the interchange CSV. Floats carry 17 significant digits
    /// so that re-reading reproduces the f64 values exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# decay curve")?;
        let meta = serde_json::to_string(&self.meta).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "# meta: {meta}")?;
        writeln!(w, "t_spin_s,eta,sigma_eta")?;
        for p in &self.points {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p.t_spin_s, p.eta, p.sigma_eta)?;
        }
        Ok(())
    }

    /// Parses the interchange CSV. A two-column body (no sigma_eta) is
    /// accepted; the points get unit sigma and the curve is flagged
    /// unweighted so downstream fits can warn.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut meta: Option<CurveMeta> = None;
        let mut points = Vec::new();
        let mut saw_header = false;
        let mut two_column = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(json) = rest.trim().strip_prefix("meta:") {
                    meta = Some(
                        serde_json::from_str(json.trim())
                            .map_err(|e| Error::Parse(format!("bad meta comment: {e}")))?,
                    );
                }
                continue;
            }
            if !saw_header {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                match cols.as_slice() {
                    ["t_spin_s", "eta", "sigma_eta"] => {}
                    ["t_spin_s", "eta"] => two_column = true,
                    _ => {
                        return Err(Error::Parse(format!("unexpected CSV header '{line}'")));
                    }
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let expect = if two_column { 2 } else { 3 };
            if fields.len() != expect {
                return Err(Error::Parse(format!("expected {expect} columns: '{line}'")));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad float '{s}': {e}")))
            };
            points.push(CurvePoint {
                t_spin_s: parse(fields[0])?,
                eta: parse(fields[1])?,
                sigma_eta: if two_column { 1.0 } else { parse(fields[2])? },
            });
        }
        if !saw_header {
            return Err(Error::Parse("missing CSV header".into()));
        }
        let mut meta = meta.unwrap_or_default();
        if two_column {
            meta.weights_supplied = false;
        }
        Self::new(points, meta)
    }
}
