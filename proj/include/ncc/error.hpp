#pragma once

#include <stdexcept>
#include <string>

namespace ncc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (bad row, bad code, dangling reference).
struct IngestError : Error {
  using Error::Error;
};

// A matched set violates its preconditions (e.g. index before entry).
struct MalformedSetError : Error {
  using Error::Error;
};

// A pipeline stage failed; carries the stage name for resume diagnostics.
struct StageError : Error {
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_name(stage) {}
  std::string stage_name;
};

}  // namespace ncc
