//! `name:key=value,key=value` shorthand for config objects on the command line.

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use spagg::oracle::BoundSpec;
use spagg::PatternFamily;

/// Parses `name[:k=v,...]` into a tagged config value whose tag field is
/// `tag`. Hyphens in the name become underscores. Values that are not numbers
/// or booleans are treated as strings; lists use `+` separators (`5+` is the one-element list).
pub fn parse<T: DeserializeOwned>(text: &str, tag: &str) -> anyhow::Result<T> {
    let (name, rest) = match text.split_once(':') {
        Some((n, r)) => (n, r),
        None => (text, ""),
    };
    let mut doc = format!("{tag} = {}\n", quote(&name.trim().replace('-', "_")));
    for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .with_context(|| format!("expected key=value in `{pair}`"))?;
        doc.push_str(&format!("{} = {}\n", k.trim(), value(v.trim())));
    }
    toml::from_str(&doc).with_context(|| format!("cannot interpret `{text}`"))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn value(v: &str) -> String {
    if v.parse::<i64>().is_ok() || v.parse::<f64>().is_ok() || v == "true" || v == "false" {
        return v.to_string();
    }
    if v.contains('+') {
        let items: Vec<String> = v
            .split('+')
            .filter(|x| !x.trim().is_empty())
            .map(|x| value(x.trim()))
            .collect();
        return format!("[{}]", items.join(", "));
    }
    quote(v)
}

/// `FAMILY:C:c:e`.
pub fn bound_spec(text: &str) -> anyhow::Result<BoundSpec> {
    let Some((family, rest)) = text.split_once(':') else {
        bail!("oracle spec must look like FAMILY:C:c:e, got `{text}`");
    };
    let family = match family {
        "monotone" => PatternFamily::Monotone,
        "convex" => PatternFamily::Convex,
        other => bail!("unknown family `{other}`"),
    };
    Ok(BoundSpec::parse(family, rest)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spagg::harness::{EstimatorSpec, QaggParams, SignalSpec};
    use spagg::qagg::DictionaryMode;
    use spagg::ShapeClass;

    #[test]
    fn signals() {
        let s: SignalSpec = parse("staircase:k=2,v=1", "family").unwrap();
        assert_eq!(s, SignalSpec::Staircase { k: 2, v: 1.0 });
        let s: SignalSpec = parse("custom-csv:path=data/mu.csv", "family").unwrap();
        assert_eq!(
            s,
            SignalSpec::CustomCsv {
                path: "data/mu.csv".into()
            }
        );
    }

    #[test]
    fn estimators() {
        let e: EstimatorSpec = parse("qagg:dict=maxcard=8", "method").unwrap();
        assert_eq!(
            e,
            EstimatorSpec::Qagg(QaggParams {
                dict: DictionaryMode::MaxCardinality { m: 8 },
                ..QaggParams::default()
            })
        );
        let e: EstimatorSpec = parse("qagg-convex:dict=sampled=100:7", "method").unwrap();
        assert!(matches!(e, EstimatorSpec::QaggConvex(_)));
        let e: EstimatorSpec = parse("projection:family=monotone,pattern=2+5", "method").unwrap();
        assert_eq!(
            e,
            EstimatorSpec::Projection {
                family: PatternFamily::Monotone,
                pattern: vec![2, 5]
            }
        );
        assert!(parse::<EstimatorSpec>("nonsense", "method").is_err());
    }

    #[test]
    fn classes_and_specs() {
        let c: ShapeClass = parse("monotone_k_pieces:k=3", "kind").unwrap();
        assert_eq!(c, ShapeClass::MonotoneKPieces { k: 3 });
        let b = bound_spec("convex:6:6:1.25").unwrap();
        assert_eq!(b.penalty_exponent, 1.25);
        assert!(bound_spec("wiggly:1:1:1").is_err());
    }
}
