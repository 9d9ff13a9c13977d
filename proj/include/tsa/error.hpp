#pragma once

#include <stdexcept>
#include <string>

namespace tsa {

/// All recoverable failures in the toolkit. The message is the stable,
/// user-facing reason ("malformed case", "no crossing", ...), optionally
/// followed by ": <detail>".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& reason) { throw Error(reason); }

[[noreturn]] inline void fail(const std::string& reason, const std::string& detail) {
  throw Error(reason + ": " + detail);
}

}  // namespace tsa
