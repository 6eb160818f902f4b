#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clis {

// Coarse error taxonomy. The CLI maps `client` and `io` to exit code 2
// (environment problems), everything else to exit code 1 (operator input).
enum class ErrorKind {
  argument,            // bad value passed to a pure function
  layout,              // bounding box violates the unit-square constraints
  graph,               // scene-graph validation failure
  parse,               // model response / document could not be parsed
  binding,             // layout entry names an unknown object
  pool_miss,           // score requested against an empty example list
  malformed_response,  // client answered, but outside its contract
  client,              // transport-level client failure (possibly retriable)
  config,              // bad configuration
  io,                  // filesystem failure
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::layout: return "layout";
    case ErrorKind::graph: return "graph";
    case ErrorKind::parse: return "parse";
    case ErrorKind::binding: return "binding";
    case ErrorKind::pool_miss: return "pool-miss";
    case ErrorKind::malformed_response: return "malformed-response";
    case ErrorKind::client: return "client";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace clis
