#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mapscope {

enum class Errc {
  // registry
  DuplicateCommunity,
  BadCategory,
  BadSubclass,
  UnknownCommunity,
  // corpus
  DuplicateId,
  EmptyPost,
  // embed
  EmptyInput,
  ProviderError,
  CacheCorrupt,
  BadVector,
  // distill
  EmptyWindow,
  // classify
  EmptyClass,
  BadK,
  ZeroVector,
  EmptyTraining,
  EmptyMatrix,
  // mapper / graphan
  DegenerateData,
  BadDim,
  UnknownId,
  EmptyRegion,
  // general
  InvalidArgument,
  Malformed,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Error carrying a machine-checkable code. Every failure the library
/// reports on purpose is one of these; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Remote provider failure; status 0 means the request never got a response.
class ProviderFailure : public Error {
 public:
  ProviderFailure(int status, std::string body_excerpt)
      : Error(Errc::ProviderError,
              "HTTP " + std::to_string(status) + ": " + body_excerpt),
        status_(status),
        body_(std::move(body_excerpt)) {}

  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace mapscope
