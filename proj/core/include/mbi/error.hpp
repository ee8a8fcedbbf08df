#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mbi {

enum class Errc {
  invalid_argument,
  io,
  parse,
  // table / tree files
  bad_magic,
  version_mismatch,
  truncated,
  size_mismatch,
  // IDX datasets
  wrong_magic,
  dim_mismatch,
  // RAM weights
  topology_incomplete,
  shape_mismatch,
  blob_length_mismatch,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can tell bad input data from misuse.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void throw_error(Errc code, const std::string& what);

inline void require(bool cond, const std::string& what) {
  if (!cond) throw_error(Errc::invalid_argument, what);
}

}  // namespace mbi
