pub mod config;
pub mod handshake;
pub mod leg;
pub mod metrics;
pub mod oracle;
pub mod pref;
pub mod protocol;
pub mod sim;
pub mod synchrony;
