//! Resolution of measure inputs: an FMZ file, an inline recipe document, or
//! shorthand zoo flags.

use std::path::PathBuf;

use fractlab::error::{Error, Result};
use fractlab::zoo::{self, ZooSpec};
use fractlab::DyadicMeasure;

/// Shorthand flags shared by every command that consumes a measure.
#[derive(Debug, Clone, clap::Args)]
pub struct MeasureArgs {
    /// FMZ measure file to load.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,

    /// Inline zoo recipe as a JSON document (overrides the shorthand flags).
    #[arg(long)]
    pub spec: Option<String>,

    /// Zoo kind: cantor | ifs | lebesgue | line | product | dirac | schottky.
    #[arg(long)]
    pub kind: Option<String>,

    /// Word depth for IFS-backed kinds.
    #[arg(long)]
    pub depth: Option<u32>,

    /// Dyadic scale of the generated measure.
    #[arg(long)]
    pub scale: Option<u32>,

    /// Ambient dimension (lebesgue).
    #[arg(long)]
    pub d: Option<usize>,

    /// Comma-separated point (dirac, line).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,

    /// Comma-separated direction (line).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,

    /// Segment length (line).
    #[arg(long)]
    pub length: Option<f64>,

    /// Product rotation in degrees (product).
    #[arg(long)]
    pub angle: Option<f64>,

    /// Product factors as two zoo kinds "cantor,lebesgue" (product).
    #[arg(long, value_delimiter = ',')]
    pub factors: Option<Vec<String>>,

    /// Schottky interval pairs "s0,s1:t0,t1;s0,s1:t0,t1" (schottky).
    #[arg(long, allow_hyphen_values = true)]
    pub intervals: Option<String>,
}

pub fn parse_interval_pairs(text: &str) -> Result<Vec<[[f64; 2]; 2]>> {
    let mut pairs = Vec::new();
    for pair in text.split(';') {
        let (src, tgt) = pair
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("interval pair {pair:?} needs 'src:tgt'")))?;
        let ends = |s: &str| -> Result<[f64; 2]> {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Input(format!("interval {s:?} needs two endpoints")));
            }
            let lo: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad endpoint {:?}", parts[0])))?;
            let hi: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad endpoint {:?}", parts[1])))?;
            Ok([lo, hi])
        };
        pairs.push([ends(src)?, ends(tgt)?]);
    }
    Ok(pairs)
}

impl MeasureArgs {
    /// The resolved recipe, when the source is a zoo recipe (not a file).
    pub fn recipe(&self) -> Result<Option<ZooSpec>> {
        if let Some(text) = &self.spec {
            let spec: ZooSpec = serde_json::from_str(text)
                .map_err(|e| Error::Input(format!("bad --spec document: {e}")))?;
            return Ok(Some(spec));
        }
        let Some(kind) = &self.kind else {
            return Ok(None);
        };
        let scale = self.scale.unwrap_or(10);
        let spec = match kind.as_str() {
            "cantor" => ZooSpec::Cantor { depth: self.depth.unwrap_or(0), scale },
            "lebesgue" => ZooSpec::Lebesgue { d: self.d.unwrap_or(1), scale },
            "line" => ZooSpec::Line {
                point: self.point.clone().unwrap_or_else(|| vec![0.0, 0.0]),
                direction: self.direction.clone().unwrap_or_else(|| vec![1.0, 0.0]),
                length: self.length.unwrap_or(1.0),
                scale,
            },
            "dirac" => ZooSpec::Dirac {
                point: self.point.clone().unwrap_or_else(|| vec![0.0]),
                scale,
            },
            "product" => {
                let factors = self.factors.clone().unwrap_or_else(|| {
                    vec!["cantor".to_string(), "cantor".to_string()]
                });
                if factors.len() != 2 {
                    return Err(Error::Input("product needs exactly two factors".into()));
                }
                let factor = |name: &str| -> Result<ZooSpec> {
                    match name {
                        "cantor" => Ok(ZooSpec::Cantor { depth: self.depth.unwrap_or(0), scale }),
                        "lebesgue" => Ok(ZooSpec::Lebesgue { d: 1, scale }),
                        other => Err(Error::Input(format!("unsupported product factor {other:?}"))),
                    }
                };
                ZooSpec::Product {
                    x: Box::new(factor(&factors[0])?),
                    y: Box::new(factor(&factors[1])?),
                    angle_degrees: self.angle.unwrap_or(0.0),
                    scale,
                }
            }
            "ifs" => {
                return Err(Error::Input(
                    "supply IFS systems through --spec with maps and weights".into(),
                ))
            }
            "schottky" => {
                let text = self
                    .intervals
                    .as_ref()
                    .ok_or_else(|| Error::Input("schottky needs --intervals".into()))?;
                ZooSpec::Schottky {
                    intervals: parse_interval_pairs(text)?,
                    scale,
                    depth: self.depth.unwrap_or(scale + 3),
                    tol: 1e-8,
                }
            }
            other => return Err(Error::Input(format!("unknown zoo kind {other:?}"))),
        };
        Ok(Some(spec))
    }

    /// Loads or generates the measure.
    pub fn resolve(&self) -> Result<DyadicMeasure> {
        if let Some(path) = &self.input {
            return fractlab::fmz::read_file(path);
        }
        match self.recipe()? {
            Some(spec) => zoo::generate(&spec),
            None => Err(Error::Input(
                "no measure source: pass --in FILE, --spec JSON, or --kind".into(),
            )),
        }
    }

    /// Config echo for the report envelope.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "in": self.input.as_ref().map(|p| p.display().to_string()),
            "recipe": self.recipe().ok().flatten(),
        })
    }
}
