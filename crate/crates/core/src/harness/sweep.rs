use super::config::FederationConfig;
use super::HarnessError;

/// Split `KEY=V1,V2,...` into the key and its values. Commas inside brackets
/// or quotes stay with their value, so array values work.
pub fn parse_axis(axis: &str) -> Result<(String, Vec<String>), HarnessError> {
    let (key, rest) = axis
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("sweep axis {axis:?} must look like KEY=V1,V2")))?;
    let mut values = Vec::new();
    let (mut depth, mut quoted, mut cur) = (0i32, false, String::new());
    for ch in rest.chars() {
        match ch {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth -= 1,
            ',' if depth == 0 && !quoted => {
                values.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    values.push(cur);
    let values: Vec<String> = values.into_iter().map(|v| v.trim().to_string()).collect();
    if key.trim().is_empty() || values.iter().any(String::is_empty) {
        return Err(HarnessError::Config(format!("sweep axis {axis:?} has an empty key or value")));
    }
    Ok((key.trim().to_string(), values))
}

fn literal(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

/// One config per axis value, differing only in the swept key and in the
/// output directory, which gains a `KEY=VALUE` subdirectory.
pub fn expand_sweep(cfg: &FederationConfig, axis: &str) -> Result<Vec<(String, FederationConfig)>, HarnessError> {
    let (key, values) = parse_axis(axis)?;
    let base = toml::Value::try_from(cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    let path: Vec<&str> = key.split('.').collect();
    let mut out = Vec::with_capacity(values.len());
    for v in &values {
        let mut doc = base.clone();
        let mut node = &mut doc;
        for part in &path[..path.len() - 1] {
            node = node
                .get_mut(*part)
                .filter(|n| n.is_table())
                .ok_or_else(|| HarnessError::Config(format!("sweep key {key:?}: no section {part:?}")))?;
        }
        let table = node.as_table_mut().expect("checked table");
        table.insert(path[path.len() - 1].to_string(), literal(v));
        let mut point: FederationConfig =
            doc.try_into().map_err(|e: toml::de::Error| HarnessError::Config(format!("sweep {key}={v}: {e}")))?;
        point.base_dir = cfg.base_dir.clone();
        let label = format!("{key}={}", v.trim_matches('"'));
        point.output_dir = format!("{}/{label}", cfg.output_dir);
        out.push((label, point));
    }
    Ok(out)
}
