// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/error.hpp"

namespace forge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kManifestInvalid: return "ManifestInvalid";
    case ErrorCode::kRecordInvalid: return "RecordInvalid";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kInsufficientImages: return "InsufficientImages";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kMissingScore: return "MissingScore";
    case ErrorCode::kPlanMismatch: return "PlanMismatch";
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kNoVectors: return "NoVectors";
    case ErrorCode::kEmptyTask: return "EmptyTask";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kUpstreamError: return "UpstreamError";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kEmptyDemoPool: return "EmptyDemoPool";
    case ErrorCode::kInvalidKind: return "InvalidKind";
    case ErrorCode::kAbortThresholdExceeded: return "AbortThresholdExceeded";
    case ErrorCode::kDanglingParent: return "DanglingParent";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kStageFailed: return "StageFailed";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfigInvalid:
      return 2;
    case ErrorCode::kManifestInvalid:
    case ErrorCode::kRecordInvalid:
      return 3;
    case ErrorCode::kMissingImage:
    case ErrorCode::kInsufficientImages:
      return 4;
    case ErrorCode::kMissingScore:
    case ErrorCode::kPlanMismatch:
      return 5;
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kRateLimited:
    case ErrorCode::kUpstreamError:
    case ErrorCode::kTimeout:
      return 6;
    case ErrorCode::kParseFailure:
    case ErrorCode::kOutOfRange:
      return 7;
    case ErrorCode::kEmptyDocument:
    case ErrorCode::kNoVectors:
    case ErrorCode::kEmptyTask:
    case ErrorCode::kEmptyDemoPool:
    case ErrorCode::kInvalidKind:
      return 8;
    case ErrorCode::kAbortThresholdExceeded:
      return 9;
    case ErrorCode::kDanglingParent:
      return 10;
    case ErrorCode::kIoError:
      return 11;
    case ErrorCode::kStageFailed:
      return 12;
  }
  return 1;
}

RecordInvalid::RecordInvalid(std::string dataset_id, std::size_t line, std::string reason)
    : Error(ErrorCode::kRecordInvalid,
            dataset_id + ":" + std::to_string(line) + ": " + reason),
      dataset_id_(std::move(dataset_id)),
      line_(line),
      reason_(std::move(reason)) {}

EmptyDocument::EmptyDocument(std::size_t index)
    : Error(ErrorCode::kEmptyDocument,
            "document " + std::to_string(index) + " has no tokens"),
      index_(index) {}

StageError::StageError(std::string stage, const Error& cause)
    : Error(ErrorCode::kStageFailed,
            "stage '" + stage + "' failed: [" + std::string(error_code_name(cause.code())) +
                "] " + cause.what()),
      stage_(std::move(stage)),
      cause_code_(cause.code()) {}

}  // namespace forge
