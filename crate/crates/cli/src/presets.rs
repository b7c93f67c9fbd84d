//! Figure presets shipped with the binary.

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2a", include_str!("../../../presets/fig2a.cfg")),
    ("fig2b", include_str!("../../../presets/fig2b.cfg")),
    ("fig2c", include_str!("../../../presets/fig2c.cfg")),
    ("fig2d", include_str!("../../../presets/fig2d.cfg")),
    ("fig3", include_str!("../../../presets/fig3.cfg")),
    ("fig4", include_str!("../../../presets/fig4.cfg")),
    ("fig5a", include_str!("../../../presets/fig5a.cfg")),
    ("fig5b", include_str!("../../../presets/fig5b.cfg")),
    ("fig6", include_str!("../../../presets/fig6.cfg")),
    ("fig7", include_str!("../../../presets/fig7.cfg")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rashba_ring::config::RunConfig;

    #[test]
    fn every_preset_validates() {
        for (name, text) in PRESETS {
            let cfg = RunConfig::from_text(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn every_value_is_annotated() {
        for (name, text) in PRESETS {
            for line in text.lines().filter(|l| l.contains('=') && !l.starts_with('#')) {
                let key = line.split('=').next().unwrap().trim();
                let annotated = line.contains("# given") || line.contains("# inferred") || line.contains("# one drive period");
                let bookkeeping = matches!(
                    key,
                    "mode" | "basis" | "state" | "m_max" | "profiles" | "harmonics" | "snapshots" | "autocorrelation" | "peak_threshold" | "n_phi"
                );
                assert!(annotated || bookkeeping, "{name}: `{line}` lacks a given/inferred note");
            }
        }
    }
}
