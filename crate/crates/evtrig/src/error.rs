use thiserror::Error;

use crate::sim::RunRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class-K violation: {0}")]
    ClassK(String),

    #[error("certificate inconsistency: {0}")]
    Certificate(String),

    #[error("gamma chain: inner term r - g2(g3(r)) is negative at r = {r} (value {value:.3e})")]
    ChainInner { r: f64, value: f64 },

    #[error("inverse: {0}")]
    Inverse(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("bracket invalid on [{t_lo}, {t_hi}]: margins {m_lo:.3e}, {m_hi:.3e}")]
    Bracket { t_lo: f64, t_hi: f64, m_lo: f64, m_hi: f64 },

    #[error("state diverged at t = {t}")]
    Divergence { t: f64, record: Box<RunRecord> },

    #[error("event accumulation at t = {t}: {events} events, recent rate {rate:.3e}/s exceeds limit")]
    Zeno {
        t: f64,
        events: usize,
        rate: f64,
        record: Box<RunRecord>,
    },

    #[error("L_psi_inv invalid: {0}")]
    LipschitzCondition(String),

    #[error("design: {0}")]
    Design(String),

    #[error("config line {line}: {field}: {msg}")]
    Parse { line: usize, field: String, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
