#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace orca {

enum class ErrorCode {
  // tensor-core
  ShapeMismatch,
  BadShape,
  Truncated,
  BadDType,
  DuplicateName,
  MetaKindMismatch,
  // cluster-routing
  EmptyKey,
  BadCount,
  BadTopology,
  // exec-engine
  BadMagic,
  BadVersion,
  DimMismatch,
  WidthMismatch,
  DTypeMismatch,
  ArityMismatch,
  DomainError,
  BadScript,
  // wire status codes (values 1..8 on the wire)
  NotFound,
  WrongShard,
  Malformed,
  WrongKind,
  ModelNotFound,
  ExecError,
  InputMissing,
  BadModel,
  // client
  Unreachable,
  ProtocolVersionMismatch,
  PartialBroadcast,
  // launcher
  UnequalLengths,
  EmptyParams,
  MissingParam,
  TemplateNotFound,
  SpawnFailed,
  AlreadyRunning,
  BadState,
  PortInUse,
  ShardStartTimeout,
  // bench
  CellFailed,
  EmptyGroup,
  IoError,
  // eke
  DegenerateFeature,
  DegenerateRange,
};

const char* error_code_name(ErrorCode code);

// Single exception type carried through every layer. `owner` is populated
// for WrongShard, `shards` for PartialBroadcast.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, uint32_t owner);
  Error(
      ErrorCode code, const std::string& message,
      std::vector<uint32_t> shards);

  ErrorCode code() const { return code_; }
  uint32_t owner() const { return owner_; }
  const std::vector<uint32_t>& shards() const { return shards_; }

  // Message without the "<CodeName>: " prefix.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
  uint32_t owner_ = 0;
  std::vector<uint32_t> shards_;
};

}  // namespace orca
