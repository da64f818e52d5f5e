use serde::Serialize;

/// Exit codes by failure class.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_DOMAIN: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(flattop::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn kind(&self) -> &'static str {
        use flattop::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => match e {
                E::Io(_) => "io",
                E::Parse { .. } | E::Json(_) | E::Csv(_) => "parse",
                E::Quadrature { .. } | E::ToleranceUnattainable { .. } => "numerical",
                _ => "domain",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => EXIT_USAGE,
            "io" => EXIT_IO,
            "parse" => EXIT_PARSE,
            "numerical" => EXIT_NUMERICAL,
            _ => EXIT_DOMAIN,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<usize>,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            schema: u32,
            error: Body<'a>,
        }
        let line = match self {
            CliError::Lib(flattop::Error::Parse { line, .. }) => Some(*line),
            CliError::Lib(flattop::Error::Csv(e)) => e.position().map(|p| p.line() as usize),
            CliError::Lib(flattop::Error::Json(e)) => Some(e.line()),
            _ => None,
        };
        let env = Envelope {
            schema: crate::config::SCHEMA,
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
                line,
            },
        };
        serde_json::to_string(&env).expect("error envelope serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<flattop::Error> for CliError {
    fn from(e: flattop::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(flattop::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(flattop::Error::Json(e))
    }
}
