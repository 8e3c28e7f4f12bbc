use serde::{Deserialize, Serialize};
use worldgrid::auth::AuthError;
use worldgrid::datamgmt::DataError;
use worldgrid::fabric::ScenarioError;
use worldgrid::grid::GridError;
use worldgrid::infosys::InfoError;
use worldgrid::jdl::JdlError;
use worldgrid::monitor::MonitorError;
use worldgrid::wms::WmsError;

/// Machine tag, HTTP status and process exit code for every error the
/// gateway can report.
pub const CODES: &[(&str, u16, i32)] = &[
    ("BadRequest", 400, 3),
    ("NotFound", 404, 4),
    ("MethodNotAllowed", 405, 5),
    ("Unavailable", 503, 6),
    ("InteractiveMode", 409, 7),
    ("Internal", 500, 8),
    ("ScriptError", 400, 9),
    ("JdlSyntax", 400, 10),
    ("JdlDuplicateAttribute", 400, 11),
    ("UnknownJob", 404, 20),
    ("UnknownBroker", 404, 21),
    ("UnknownCe", 404, 22),
    ("UnknownUser", 404, 23),
    ("UnknownSite", 404, 24),
    ("UnknownCatalog", 404, 25),
    ("UnknownIndex", 404, 26),
    ("UnknownVo", 404, 27),
    ("UnknownLfn", 404, 28),
    ("UnknownPair", 404, 29),
    ("UnknownSe", 404, 30),
    ("UnknownNode", 404, 31),
    ("UnknownFilterValue", 400, 32),
    ("VoMembership", 403, 40),
    ("NotAuthorized", 403, 41),
    ("UntrustedCa", 403, 42),
    ("CertificateExpired", 403, 43),
    ("CertificateRevoked", 403, 44),
    ("StaleCrl", 403, 45),
    ("NoVo", 400, 46),
    ("InvalidCertificate", 400, 47),
    ("DuplicateVo", 409, 48),
    ("DuplicateMember", 409, 49),
    ("GatekeeperDown", 503, 50),
    ("ServiceDown", 503, 51),
    ("AllIndexesDown", 503, 52),
    ("NodeDown", 503, 53),
    ("SandboxMissing", 400, 60),
    ("OutputNotReady", 409, 61),
    ("IllegalTransition", 409, 62),
    ("LfnExists", 409, 63),
    ("NoSpace", 507, 64),
    ("ConnectivityDenied", 403, 65),
    ("SourceMissing", 404, 66),
    ("InvalidLfn", 400, 67),
    ("InvalidEndpoint", 400, 68),
    ("FilterSyntax", 400, 69),
    ("BadFilter", 400, 70),
    ("TimeTravel", 409, 71),
    ("Invalid", 400, 72),
    ("ScenarioParse", 400, 73),
    ("ScenarioInvalid", 400, 74),
    ("ScenarioIo", 500, 75),
    ("InvalidDn", 400, 76),
    ("SchemaViolation", 400, 77),
    ("LdifSyntax", 400, 78),
    ("DuplicateSource", 409, 79),
    ("DuplicateNode", 409, 80),
    ("IndexCycle", 409, 81),
    ("NotTopLevel", 400, 82),
    ("VoFileSyntax", 400, 83),
    ("MapDocument", 400, 84),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub status: u16,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        let status = CODES.iter().find(|c| c.0 == code).map_or(500, |c| c.1);
        Self { code: code.to_string(), message: message.into(), status }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("BadRequest", message)
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(&self.code)
    }
}

pub fn exit_code(code: &str) -> i32 {
    CODES.iter().find(|c| c.0 == code).map_or(1, |c| c.2)
}

fn code_of(e: &GridError) -> &'static str {
    match e {
        GridError::Scenario(e) => match e {
            ScenarioError::Parse { .. } => "ScenarioParse",
            ScenarioError::Invalid { .. } => "ScenarioInvalid",
            ScenarioError::Io { .. } => "ScenarioIo",
        },
        GridError::Jdl(e) => match e {
            JdlError::Syntax { .. } => "JdlSyntax",
            JdlError::DuplicateAttribute { .. } => "JdlDuplicateAttribute",
        },
        GridError::Wms(e) => match e {
            WmsError::UnknownJob(_) => "UnknownJob",
            WmsError::UnknownBroker(_) => "UnknownBroker",
            WmsError::UnknownCe(_) => "UnknownCe",
            WmsError::UnknownUser(_) => "UnknownUser",
            WmsError::VoMembership { .. } => "VoMembership",
            WmsError::NoVo => "NoVo",
            WmsError::NotAuthorized(_) => "NotAuthorized",
            WmsError::GatekeeperDown(_) => "GatekeeperDown",
            WmsError::ServiceDown(_) => "ServiceDown",
            WmsError::SandboxMissing(_) => "SandboxMissing",
            WmsError::OutputNotReady(_) => "OutputNotReady",
            WmsError::IllegalTransition { .. } => "IllegalTransition",
        },
        GridError::Auth(e) => match e {
            AuthError::UntrustedCa(_) => "UntrustedCa",
            AuthError::Expired => "CertificateExpired",
            AuthError::Revoked(_) => "CertificateRevoked",
            AuthError::StaleCrl(_) => "StaleCrl",
            AuthError::NotAuthorized(_) => "NotAuthorized",
            AuthError::UnknownVo(_) => "UnknownVo",
            AuthError::DuplicateVo(_) => "DuplicateVo",
            AuthError::DuplicateMember { .. } => "DuplicateMember",
            AuthError::InvalidCertificate(_) => "InvalidCertificate",
            AuthError::Parse { .. } => "VoFileSyntax",
        },
        GridError::Data(e) => match e {
            DataError::InvalidLfn(_) => "InvalidLfn",
            DataError::InvalidEndpoint(_) => "InvalidEndpoint",
            DataError::UnknownLfn(_) => "UnknownLfn",
            DataError::UnknownPair { .. } => "UnknownPair",
            DataError::UnknownSe(_) => "UnknownSe",
            DataError::UnknownSite(_) => "UnknownSite",
            DataError::LfnExists { .. } => "LfnExists",
            DataError::NoSpace { .. } => "NoSpace",
            DataError::ConnectivityDenied { .. } => "ConnectivityDenied",
            DataError::SourceMissing(_) => "SourceMissing",
            DataError::ServiceDown(_) => "ServiceDown",
        },
        GridError::Info(e) => match e {
            InfoError::InvalidDn(_) => "InvalidDn",
            InfoError::Schema(_) => "SchemaViolation",
            InfoError::FilterSyntax { .. } => "FilterSyntax",
            InfoError::Ldif { .. } => "LdifSyntax",
            InfoError::DuplicateSourceId(_) => "DuplicateSource",
            InfoError::DuplicateNode(_) => "DuplicateNode",
            InfoError::UnknownNode(_) => "UnknownNode",
            InfoError::CycleDetected { .. } => "IndexCycle",
            InfoError::NodeDown(_) => "NodeDown",
            InfoError::NotTopLevel(_) => "NotTopLevel",
            InfoError::AllIndexesDown => "AllIndexesDown",
        },
        GridError::Monitor(e) => match e {
            MonitorError::UnknownFilterValue { .. } => "UnknownFilterValue",
            MonitorError::BadFilter(_) => "BadFilter",
            MonitorError::Document(_) => "MapDocument",
        },
        GridError::UnknownSite(_) => "UnknownSite",
        GridError::UnknownCatalog(_) => "UnknownCatalog",
        GridError::UnknownIndex(_) => "UnknownIndex",
        GridError::TimeTravel { .. } => "TimeTravel",
        GridError::Invalid(_) => "Invalid",
    }
}

impl From<GridError> for ApiError {
    fn from(e: GridError) -> Self {
        ApiError::new(code_of(&e), e.to_string())
    }
}

macro_rules! via_grid {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                GridError::from(e).into()
            }
        }
    )*};
}

via_grid!(ScenarioError, JdlError, WmsError, AuthError, DataError, InfoError, MonitorError);
