use std::fmt;

/// Why a command failed, mapped onto the exit-code contract:
/// 2 bad input, 3 dependency unavailable, 4 partial failure.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Dependency(anyhow::Error),
    Partial(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Dependency(_) => 3,
            Failure::Partial(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) | Failure::Dependency(e) => write!(f, "{e:#}"),
            Failure::Partial(s) => f.write_str(s),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags an error with its exit class.
pub trait Classify<T> {
    fn input(self) -> CmdResult<T>;
    fn dependency(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn dependency(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Dependency(e.into()))
    }
}

pub fn input_error(msg: impl fmt::Display) -> Failure {
    Failure::Input(anyhow::anyhow!("{msg}"))
}
