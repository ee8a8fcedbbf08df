#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mbi {

/// Minimal CSV emitter. The optional first line is a `# generated <UTC time>`
/// comment; everything after it is reproducible.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, bool timestamp);

  void header(std::initializer_list<std::string_view> columns);

  template <typename T>
  CsvWriter& operator<<(const T& value) {
    separator();
    out_ << value;
    return *this;
  }

  void end_row();

 private:
  void separator();

  std::ostream& out_;
  bool first_ = true;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

/// Reads a header + rows file, skipping '#' comment lines.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace mbi
