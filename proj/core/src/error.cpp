#include "mbi/error.hpp"

namespace mbi {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::io: return "i/o error";
    case Errc::parse: return "parse error";
    case Errc::bad_magic: return "bad magic";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::truncated: return "truncated payload";
    case Errc::size_mismatch: return "config/payload size inconsistency";
    case Errc::wrong_magic: return "wrong magic";
    case Errc::dim_mismatch: return "dim mismatch";
    case Errc::topology_incomplete: return "topology incomplete";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::blob_length_mismatch: return "blob length mismatch";
  }
  return "unknown error";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void throw_error(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mbi
