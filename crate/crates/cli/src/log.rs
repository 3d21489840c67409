//! Minimal stderr logging gated by the `ATRP_LOG` environment variable.

use std::sync::OnceLock;

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Error,
    Warn,
    Info,
    Debug,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("ATRP_LOG").as_deref() {
        Ok("debug") => Level::Debug,
        Ok("info") => Level::Info,
        Ok("error") => Level::Error,
        _ => Level::Warn,
    })
}

pub fn warn(msg: &str) {
    if level() >= Level::Warn {
        eprintln!("warn: {msg}");
    }
}

pub fn info(msg: &str) {
    if level() >= Level::Info {
        eprintln!("info: {msg}");
    }
}

#[allow(dead_code)]
pub fn debug(msg: &str) {
    if level() >= Level::Debug {
        eprintln!("debug: {msg}");
    }
}
