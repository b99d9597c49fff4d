//! Text formats: significant-digit numbers and distribution CSV.

use crate::analysis::Distribution;
use crate::error::{Error, Result};
use crate::game::{GameSpec, ProfileIndex};

/// Formats `x` with `digits` significant digits, `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV with header `profile,label,probability`, rows in profile order,
/// probabilities with 12 significant digits.
pub fn distribution_csv(game: &GameSpec, dist: &Distribution) -> Result<String> {
    if dist.len() != game.num_profiles() {
        return Err(Error::ShapeMismatch(format!(
            "distribution over {} profiles, game has {}",
            dist.len(),
            game.num_profiles()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["profile", "label", "probability"])?;
    for (k, &p) in dist.probs().iter().enumerate() {
        w.write_record([
            k.to_string(),
            game.profile_label(ProfileIndex(k)),
            sig(p, 12),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads the CSV written by [`distribution_csv`]. Profiles may appear in any
/// order; missing profiles get probability zero.
pub fn parse_distribution_csv(text: &str, game: &GameSpec) -> Result<Distribution> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidDistribution(format!("missing column `{name}`")))
    };
    let (profile_col, prob_col) = (col("profile")?, col("probability")?);
    let mut probs = vec![0.0; game.num_profiles()];
    let mut seen = vec![false; game.num_profiles()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::InvalidDistribution(format!("data row {}: {what}", line + 1));
        let k: usize = record
            .get(profile_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("unparsable profile index"))?;
        let p: f64 = record
            .get(prob_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("unparsable probability"))?;
        if k >= probs.len() {
            return Err(bad("profile index out of range"));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(bad("duplicate profile"));
        }
        probs[k] = p;
    }
    Distribution::new(probs)
}
