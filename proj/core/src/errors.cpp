#include "vlmlens/errors.hpp"

namespace vlmlens {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::contract: return "contract";
    case ErrorKind::reuse: return "reuse";
    case ErrorKind::generation: return "generation";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::intervention_conflict: return "intervention_conflict";
    case ErrorKind::empty_support: return "empty_support";
    case ErrorKind::training: return "training";
    case ErrorKind::construction: return "construction";
    case ErrorKind::parse: return "parse";
    case ErrorKind::undefined_denominator: return "undefined_denominator";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace vlmlens
