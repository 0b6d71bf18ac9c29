#include "orca/error.h"

namespace orca {

const char*
error_code_name(ErrorCode code)
{
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::BadDType: return "BadDType";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::MetaKindMismatch: return "MetaKindMismatch";
    case ErrorCode::EmptyKey: return "EmptyKey";
    case ErrorCode::BadCount: return "BadCount";
    case ErrorCode::BadTopology: return "BadTopology";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::DTypeMismatch: return "DTypeMismatch";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::BadScript: return "BadScript";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::WrongShard: return "WrongShard";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::ModelNotFound: return "ModelNotFound";
    case ErrorCode::ExecError: return "ExecError";
    case ErrorCode::InputMissing: return "InputMissing";
    case ErrorCode::BadModel: return "BadModel";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::ProtocolVersionMismatch: return "ProtocolVersionMismatch";
    case ErrorCode::PartialBroadcast: return "PartialBroadcast";
    case ErrorCode::UnequalLengths: return "UnequalLengths";
    case ErrorCode::EmptyParams: return "EmptyParams";
    case ErrorCode::MissingParam: return "MissingParam";
    case ErrorCode::TemplateNotFound: return "TemplateNotFound";
    case ErrorCode::SpawnFailed: return "SpawnFailed";
    case ErrorCode::AlreadyRunning: return "AlreadyRunning";
    case ErrorCode::BadState: return "BadState";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::ShardStartTimeout: return "ShardStartTimeout";
    case ErrorCode::CellFailed: return "CellFailed";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateFeature: return "DegenerateFeature";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
  }
  return "Unknown";
}

namespace {

std::string
compose(ErrorCode code, const std::string& message)
{
  return std::string(error_code_name(code)) + ": " + message;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(compose(code, message)), code_(code), detail_(message)
{
}

Error::Error(ErrorCode code, const std::string& message, uint32_t owner)
    : std::runtime_error(compose(code, message)), code_(code), detail_(message),
      owner_(owner)
{
}

Error::Error(
    ErrorCode code, const std::string& message, std::vector<uint32_t> shards)
    : std::runtime_error(compose(code, message)), code_(code), detail_(message),
      shards_(std::move(shards))
{
}

}  // namespace orca
