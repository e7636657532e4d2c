//! Minimal stderr logger controlled by the `BLINKLIGHT_LOG` environment
//! variable: error, warn, info (default), or debug.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error,
    Warn,
    Info,
    Debug,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn init_from_env() {
    let level = match std::env::var("BLINKLIGHT_LOG").as_deref() {
        Ok("error") => Level::Error,
        Ok("warn") => Level::Warn,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    };
    let _ = LEVEL.set(level);
}

fn enabled(level: Level) -> bool {
    level <= *LEVEL.get_or_init(|| Level::Info)
}

pub fn error(msg: &str) {
    if enabled(Level::Error) {
        eprintln!("error: {msg}");
    }
}

pub fn warn(msg: &str) {
    if enabled(Level::Warn) {
        eprintln!("warn: {msg}");
    }
}

pub fn info(msg: &str) {
    if enabled(Level::Info) {
        eprintln!("info: {msg}");
    }
}

pub fn debug(msg: &str) {
    if enabled(Level::Debug) {
        eprintln!("debug: {msg}");
    }
}
