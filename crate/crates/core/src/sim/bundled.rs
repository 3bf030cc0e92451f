//! Scenarios shipped with the library, addressable as `bundled:<name>`.

pub const NAMES: &[&str] = &["fig4", "fig5", "fig6a", "fig6b", "indoor-floor", "los-short"];

pub fn get(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig4" => include_str!("../../scenarios/fig4.toml"),
        "fig5" => include_str!("../../scenarios/fig5.toml"),
        "fig6a" => include_str!("../../scenarios/fig6a.toml"),
        "fig6b" => include_str!("../../scenarios/fig6b.toml"),
        "indoor-floor" => include_str!("../../scenarios/indoor-floor.toml"),
        "los-short" => include_str!("../../scenarios/los-short.toml"),
        _ => return None,
    })
}
