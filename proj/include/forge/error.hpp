// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

// Every failure the library raises carries one of these codes. The CLI maps
// each code to its own process exit status.
enum class ErrorCode {
  kInvalidArgument,
  kConfigInvalid,
  kManifestInvalid,
  kRecordInvalid,
  kMissingImage,
  kInsufficientImages,
  kParseFailure,
  kOutOfRange,
  kBackendUnavailable,
  kMissingScore,
  kPlanMismatch,
  kEmptyDocument,
  kNoVectors,
  kEmptyTask,
  kRateLimited,
  kUpstreamError,
  kTimeout,
  kEmptyDemoPool,
  kInvalidKind,
  kAbortThresholdExceeded,
  kDanglingParent,
  kIoError,
  kStageFailed,
};

std::string_view error_code_name(ErrorCode code);

// Process exit status for a code; 0 is reserved for success.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by load_corpus for a bad line in a records file.
class RecordInvalid : public Error {
 public:
  RecordInvalid(std::string dataset_id, std::size_t line, std::string reason);

  const std::string& dataset_id() const noexcept { return dataset_id_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string dataset_id_;
  std::size_t line_;
  std::string reason_;
};

class EmptyDocument : public Error {
 public:
  explicit EmptyDocument(std::size_t index);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Wraps a failure raised inside a pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause_code() const noexcept { return cause_code_; }

 private:
  std::string stage_;
  ErrorCode cause_code_;
};

}  // namespace forge
