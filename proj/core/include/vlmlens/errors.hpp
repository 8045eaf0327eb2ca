#pragma once

#include <stdexcept>
#include <string>

namespace vlmlens {

// Every rejected contract in the library throws Error with a stable machine-readable
// kind; the CLI serializes these to JSON error records and exits nonzero.
enum class ErrorKind {
  dimension,              // shape/size mismatch between arrays or model pieces
  contract,               // API precondition violated (bad argument range, wrong state)
  reuse,                  // consumed-once object used again (gradient tape)
  generation,             // scene generation could not satisfy constraints
  lookup,                 // unknown name (token, head, column, config key)
  capacity,               // fixed budget exceeded (sequence length, vocab)
  intervention_conflict,  // two interventions claim the same site
  empty_support,          // operation over an empty set (no cells, no pairs)
  training,               // optimizer diverged / non-finite loss
  construction,           // planted-circuit assembly failed validation
  parse,                  // malformed file or config text
  undefined_denominator,  // mediation fraction with base == source perplexity
  io                      // file read/write failure
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  const char* kind_name() const { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Contract check used across the library; cheap enough to keep on in release builds.
inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) fail(kind, message);
}

}  // namespace vlmlens
